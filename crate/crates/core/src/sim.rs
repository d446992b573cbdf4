//! Cycle-granular timing simulation of one kernel on one machine:
//! occupancy-limited block dispatch, per-SM warp scheduling across SMBs,
//! compute issue, the memory instruction lifecycle, and barriers.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::arch::GpuConfig;
use crate::error::SimError;
use crate::mem::{coalesce, MemStats, MemorySystem};
use crate::workload::{expand_addresses, KernelSpec, WarpInstr, WARP_SIZE};

pub const DEFAULT_CYCLE_CAP: u64 = 1_000_000_000;

/// How many thread blocks one SM can host concurrently, with the four
/// binding limits it was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupancyReport {
    pub limit_threads: u32,
    pub limit_registers: u32,
    pub limit_shmem: u32,
    pub limit_blockcap: u32,
    pub blocks_per_sm: u32,
}

impl OccupancyReport {
    /// Occupancy math: threads (with the warp cap folded in), registers,
    /// shared memory and the hardware block cap; the minimum binds.
    /// Resources a kernel does not use are reported at the block cap.
    pub fn of(sm: &crate::arch::SmConfig, kernel: &KernelSpec) -> OccupancyReport {
        let tpb = kernel.threads_per_block;
        let wpb = kernel.warps_per_block();
        let limit_threads = ((sm.max_threads / tpb).min(sm.max_warps / wpb)).min(u32::MAX);
        let regs_per_block = kernel.regs_per_thread as u64 * tpb as u64;
        let limit_registers = if regs_per_block == 0 {
            sm.max_blocks
        } else {
            (sm.regfile_regs / regs_per_block).min(u32::MAX as u64) as u32
        };
        let limit_shmem = if kernel.shmem_per_block == 0 {
            sm.max_blocks
        } else {
            (sm.shmem_bytes / kernel.shmem_per_block).min(u32::MAX as u64) as u32
        };
        let limit_blockcap = sm.max_blocks;
        let blocks_per_sm = limit_threads
            .min(limit_registers)
            .min(limit_shmem)
            .min(limit_blockcap);
        OccupancyReport {
            limit_threads,
            limit_registers,
            limit_shmem,
            limit_blockcap,
            blocks_per_sm,
        }
    }

    fn binding_limit(&self) -> &'static str {
        let m = self.blocks_per_sm;
        if self.limit_threads == m {
            "threads"
        } else if self.limit_registers == m {
            "registers"
        } else if self.limit_shmem == m {
            "shared memory"
        } else {
            "block cap"
        }
    }
}

/// Occupancy with the unschedulable case turned into an error naming the
/// binding resource.
pub fn max_blocks_per_sm(
    sm: &crate::arch::SmConfig,
    kernel: &KernelSpec,
) -> Result<OccupancyReport, SimError> {
    let report = OccupancyReport::of(sm, kernel);
    if report.blocks_per_sm == 0 {
        Err(SimError::Unschedulable {
            binding: report.binding_limit().to_string(),
        })
    } else {
        Ok(report)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmActivity {
    pub busy_cycles: u64,
    pub stall_cycles_mem: u64,
    pub stall_cycles_issue: u64,
}

/// Everything one simulation run reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub total_cycles: u64,
    pub wall_time_estimate: f64,
    pub instructions_issued: u64,
    pub per_sm: Vec<SmActivity>,
    pub l1_stats: MemStats,
    pub l2_stats: MemStats,
    pub blocks_executed: u64,
    pub kernel_label: String,
}

/// The paper-style normalized execution time: variant cycles over
/// baseline cycles. Below 1.0 means the variant is faster.
pub fn slowdown(baseline: &SimResult, variant: &SimResult) -> Result<f64, SimError> {
    if baseline.kernel_label != variant.kernel_label
        || baseline.blocks_executed != variant.blocks_executed
        || baseline.instructions_issued != variant.instructions_issued
    {
        return Err(SimError::KernelMismatch);
    }
    Ok(variant.total_cycles as f64 / baseline.total_cycles as f64)
}

/// Warp scheduler pick order. Oldest-ready is the default; round-robin
/// rotates the starting point among a scheduler's ready warps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SchedulerPolicy {
    #[default]
    OldestReady,
    RoundRobin,
}

pub struct SimOptions {
    pub cycle_cap: u64,
    /// Outstanding L1-miss lines per SM before memory issue stalls.
    pub mshr_per_sm: u32,
    pub policy: SchedulerPolicy,
    pub trace: Option<Box<dyn Write>>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            cycle_cap: DEFAULT_CYCLE_CAP,
            mshr_per_sm: 32,
            policy: SchedulerPolicy::OldestReady,
            trace: None,
        }
    }
}

pub fn simulate(config: &GpuConfig, kernel: &KernelSpec) -> Result<SimResult, SimError> {
    simulate_with(config, kernel, SimOptions::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Ready,
    Waiting,
    AtBarrier,
    Done,
}

struct Warp {
    global_id: u64,
    slot: u64,
    scheduler: usize,
    smb: usize,
    block_slot: usize,
    pc: usize,
    iter: u32,
    remaining: u64,
    phase: Phase,
    waiting_mem: bool,
    miss_release: u32,
}

struct BlockSlot {
    live_warps: u32,
    barrier_arrived: u32,
    warp_idx: Vec<usize>,
}

struct SmState {
    warps: Vec<Warp>,
    free_warps: Vec<usize>,
    blocks: Vec<Option<BlockSlot>>,
    ready: Vec<BTreeSet<(u64, usize)>>,
    last_pick: Vec<u64>,
    ready_count: usize,
    wait_mem: usize,
    resident_warps: usize,
    next_slot: u64,
    smb_issue_cycle: Vec<u64>,
    smb_port_free: Vec<u64>,
    in_flight_misses: u32,
    activity: SmActivity,
    issued_this_cycle: bool,
}

impl SmState {
    fn free_block_slot(&self) -> Option<usize> {
        self.blocks.iter().position(|b| b.is_none())
    }
}

struct Engine<'a> {
    config: &'a GpuConfig,
    kernel: &'a KernelSpec,
    mshr_cap: u32,
    policy: SchedulerPolicy,
    program_len: usize,
    total_per_warp: u64,
    warps_per_block: u32,
    sms: Vec<SmState>,
    mem: MemorySystem,
    // (cycle, seq, sm, warp) wake events; seq keeps the heap total-ordered.
    events: BinaryHeap<Reverse<(u64, u64, u32, u32)>>,
    event_seq: u64,
    next_block: u64,
    blocks_executed: u64,
    last_retire: u64,
    instructions_issued: u64,
}

impl<'a> Engine<'a> {
    fn new(config: &'a GpuConfig, kernel: &'a KernelSpec, opts: &mut SimOptions) -> Self {
        let blocks_per_sm = OccupancyReport::of(&config.sm, kernel).blocks_per_sm as usize;
        let schedulers = config.sm.warp_schedulers as usize;
        let smbs = config.sm.smb_per_sm as usize;
        let sms = (0..config.num_sms)
            .map(|_| SmState {
                warps: Vec::new(),
                free_warps: Vec::new(),
                blocks: (0..blocks_per_sm).map(|_| None).collect(),
                ready: vec![BTreeSet::new(); schedulers],
                last_pick: vec![0; schedulers],
                ready_count: 0,
                wait_mem: 0,
                resident_warps: 0,
                next_slot: 0,
                smb_issue_cycle: vec![u64::MAX; smbs],
                smb_port_free: vec![0; smbs],
                in_flight_misses: 0,
                activity: SmActivity::default(),
                issued_this_cycle: false,
            })
            .collect();
        Engine {
            config,
            kernel,
            mshr_cap: opts.mshr_per_sm,
            policy: opts.policy,
            program_len: kernel.program.instructions.len(),
            total_per_warp: kernel.program.instructions.len() as u64
                * kernel.program.iterations as u64,
            warps_per_block: kernel.warps_per_block(),
            sms,
            mem: MemorySystem::new(config, opts.trace.take()),
            events: BinaryHeap::new(),
            event_seq: 0,
            next_block: 0,
            blocks_executed: 0,
            last_retire: 0,
            instructions_issued: 0,
        }
    }

    fn wake_at(&mut self, cycle: u64, sm: usize, warp: usize) {
        self.event_seq += 1;
        self.events
            .push(Reverse((cycle, self.event_seq, sm as u32, warp as u32)));
    }

    fn dispatch(&mut self, cycle: u64) {
        let grid = self.kernel.grid_blocks;
        loop {
            let mut placed = false;
            for sm_id in 0..self.sms.len() {
                if self.next_block >= grid {
                    return;
                }
                let Some(slot) = self.sms[sm_id].free_block_slot() else {
                    continue;
                };
                let block_id = self.next_block;
                self.next_block += 1;
                placed = true;
                self.place_block(sm_id, slot, block_id, cycle);
            }
            if !placed {
                return;
            }
        }
    }

    fn place_block(&mut self, sm_id: usize, slot: usize, block_id: u64, _cycle: u64) {
        let schedulers = self.config.sm.warp_schedulers as u64;
        let smbs = self.config.sm.smb_per_sm as u64;
        let sm = &mut self.sms[sm_id];
        let mut warp_idx = Vec::with_capacity(self.warps_per_block as usize);
        for w in 0..self.warps_per_block {
            let warp_slot = sm.next_slot;
            sm.next_slot += 1;
            let warp = Warp {
                global_id: block_id * self.warps_per_block as u64 + w as u64,
                slot: warp_slot,
                scheduler: (warp_slot % schedulers) as usize,
                smb: (warp_slot % smbs) as usize,
                block_slot: slot,
                pc: 0,
                iter: 0,
                remaining: self.total_per_warp,
                phase: Phase::Ready,
                waiting_mem: false,
                miss_release: 0,
            };
            let idx = match sm.free_warps.pop() {
                Some(i) => {
                    sm.warps[i] = warp;
                    i
                }
                None => {
                    sm.warps.push(warp);
                    sm.warps.len() - 1
                }
            };
            sm.ready[(warp_slot % schedulers) as usize].insert((warp_slot, idx));
            sm.ready_count += 1;
            sm.resident_warps += 1;
            warp_idx.push(idx);
        }
        sm.blocks[slot] = Some(BlockSlot {
            live_warps: self.warps_per_block,
            barrier_arrived: 0,
            warp_idx,
        });
    }

    fn handle_wake(&mut self, cycle: u64, sm_id: usize, warp_idx: usize) {
        let sm = &mut self.sms[sm_id];
        let warp = &mut sm.warps[warp_idx];
        if warp.waiting_mem {
            warp.waiting_mem = false;
            sm.wait_mem -= 1;
            sm.in_flight_misses -= warp.miss_release;
            warp.miss_release = 0;
        }
        if warp.remaining == 0 {
            warp.phase = Phase::Done;
            sm.resident_warps -= 1;
            let block_slot = warp.block_slot;
            let block = sm.blocks[block_slot].as_mut().expect("block is resident");
            block.live_warps -= 1;
            if block.live_warps == 0 {
                for idx in sm.blocks[block_slot].take().expect("resident").warp_idx {
                    sm.free_warps.push(idx);
                }
                self.blocks_executed += 1;
                self.last_retire = cycle;
            }
        } else {
            warp.phase = Phase::Ready;
            sm.ready[warp.scheduler].insert((warp.slot, warp_idx));
            sm.ready_count += 1;
        }
    }

    /// Oldest ready warp for a scheduler, or the round-robin pick.
    fn pick(&self, sm_id: usize, sched: usize) -> Option<(u64, usize)> {
        let sm = &self.sms[sm_id];
        let queue = &sm.ready[sched];
        match self.policy {
            SchedulerPolicy::OldestReady => queue.first().copied(),
            SchedulerPolicy::RoundRobin => {
                let from = sm.last_pick[sched];
                queue
                    .range((from, 0)..)
                    .next()
                    .or_else(|| queue.first())
                    .copied()
            }
        }
    }

    fn issue(&mut self, cycle: u64) {
        let cores = self.config.sm.cores_per_smb;
        let core_occupancy = WARP_SIZE.div_ceil(cores).max(1) as u64;
        for sm_id in 0..self.sms.len() {
            self.sms[sm_id].issued_this_cycle = false;
            for sched in 0..self.config.sm.warp_schedulers as usize {
                let Some((slot, warp_idx)) = self.pick(sm_id, sched) else {
                    continue;
                };
                let (smb, pc) = {
                    let w = &self.sms[sm_id].warps[warp_idx];
                    (w.smb, w.pc)
                };
                // One instruction accepted per SMB per cycle.
                if self.sms[sm_id].smb_issue_cycle[smb] == cycle {
                    continue;
                }
                let instr = &self.kernel.program.instructions[pc];
                match instr {
                    WarpInstr::Compute { .. } => {
                        if self.sms[sm_id].smb_port_free[smb] > cycle {
                            continue;
                        }
                    }
                    WarpInstr::Load { .. } | WarpInstr::Store { .. } => {
                        // Outstanding-miss limit stalls the scheduler.
                        if self.sms[sm_id].in_flight_misses >= self.mshr_cap {
                            continue;
                        }
                    }
                    _ => {}
                }

                let sm = &mut self.sms[sm_id];
                sm.ready[sched].remove(&(slot, warp_idx));
                sm.ready_count -= 1;
                sm.last_pick[sched] = slot + 1;
                sm.smb_issue_cycle[smb] = cycle;
                sm.issued_this_cycle = true;
                self.instructions_issued += 1;

                let (global_id, iter) = {
                    let w = &mut sm.warps[warp_idx];
                    w.remaining -= 1;
                    let at = (w.global_id, w.iter);
                    w.pc += 1;
                    if w.pc == self.program_len {
                        w.pc = 0;
                        w.iter += 1;
                    }
                    at
                };
                let ordinal = iter as u64 * self.program_len as u64 + pc as u64;

                match instr {
                    WarpInstr::Compute { issue_cycles } => {
                        let sm = &mut self.sms[sm_id];
                        sm.smb_port_free[smb] = cycle + core_occupancy;
                        sm.warps[warp_idx].phase = Phase::Waiting;
                        let dur = (*issue_cycles as u64).max(core_occupancy);
                        self.wake_at(cycle + dur, sm_id, warp_idx);
                    }
                    WarpInstr::Shmem { latency } => {
                        self.sms[sm_id].warps[warp_idx].phase = Phase::Waiting;
                        self.wake_at(cycle + *latency as u64, sm_id, warp_idx);
                    }
                    WarpInstr::Load { pattern } | WarpInstr::Store { pattern } => {
                        let is_write = matches!(instr, WarpInstr::Store { .. });
                        let mut addrs = [0u64; 32];
                        for (lane, a) in addrs.iter_mut().enumerate() {
                            *a = expand_addresses(
                                pattern,
                                global_id,
                                lane as u32,
                                ordinal,
                                self.kernel.seed,
                            );
                        }
                        let lines = coalesce(&addrs, self.mem.line_bytes());
                        let (done, misses) = self.mem.warp_access(sm_id, cycle, &lines, is_write);
                        let sm = &mut self.sms[sm_id];
                        sm.in_flight_misses += misses;
                        sm.wait_mem += 1;
                        let w = &mut sm.warps[warp_idx];
                        w.phase = Phase::Waiting;
                        w.waiting_mem = true;
                        w.miss_release = misses;
                        self.wake_at(done.max(cycle + 1), sm_id, warp_idx);
                    }
                    WarpInstr::Barrier => {
                        let sm = &mut self.sms[sm_id];
                        let block_slot = sm.warps[warp_idx].block_slot;
                        sm.warps[warp_idx].phase = Phase::AtBarrier;
                        let block = sm.blocks[block_slot].as_mut().expect("resident");
                        block.barrier_arrived += 1;
                        if block.barrier_arrived == self.warps_per_block {
                            block.barrier_arrived = 0;
                            let members = block.warp_idx.clone();
                            for idx in members {
                                if self.sms[sm_id].warps[idx].phase == Phase::AtBarrier {
                                    self.sms[sm_id].warps[idx].phase = Phase::Waiting;
                                    self.wake_at(cycle + 1, sm_id, idx);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    fn account(&mut self, cycles: u64, issued_pass: bool) {
        for sm in &mut self.sms {
            if sm.resident_warps == 0 {
                continue;
            }
            if issued_pass && sm.issued_this_cycle {
                sm.activity.busy_cycles += 1;
                if cycles > 1 {
                    // Remainder of a skipped span is a stall.
                    if sm.wait_mem > 0 {
                        sm.activity.stall_cycles_mem += cycles - 1;
                    } else {
                        sm.activity.stall_cycles_issue += cycles - 1;
                    }
                }
            } else if sm.wait_mem > 0 {
                sm.activity.stall_cycles_mem += cycles;
            } else {
                sm.activity.stall_cycles_issue += cycles;
            }
        }
    }

    fn run(mut self, cycle_cap: u64) -> Result<SimResult, SimError> {
        let grid = self.kernel.grid_blocks;
        let mut cycle: u64 = 0;
        loop {
            while let Some(&Reverse((at, _, _, _))) = self.events.peek() {
                if at > cycle {
                    break;
                }
                let Reverse((_, _, sm, warp)) = self.events.pop().expect("peeked");
                self.handle_wake(cycle, sm as usize, warp as usize);
            }
            if self.next_block < grid {
                self.dispatch(cycle);
            }
            self.issue(cycle);
            if self.blocks_executed == grid {
                self.account(1, true);
                break;
            }
            let total_ready: usize = self.sms.iter().map(|s| s.ready_count).sum();
            let next = if total_ready > 0 {
                cycle + 1
            } else {
                match self.events.peek() {
                    Some(&Reverse((at, _, _, _))) => at.max(cycle + 1),
                    None => cycle + 1,
                }
            };
            self.account(next - cycle, true);
            if next > cycle_cap {
                return Err(SimError::CycleCapExceeded { cap: cycle_cap });
            }
            cycle = next;
        }

        debug_assert_eq!(
            self.instructions_issued,
            self.kernel.total_instructions(),
            "issued instruction count must match the closed form"
        );
        Ok(SimResult {
            total_cycles: self.last_retire,
            wall_time_estimate: self.last_retire as f64 / (self.config.clock_ghz * 1e9),
            instructions_issued: self.instructions_issued,
            per_sm: self.sms.iter().map(|s| s.activity).collect(),
            l1_stats: self.mem.l1_stats(),
            l2_stats: self.mem.l2_stats(),
            blocks_executed: self.blocks_executed,
            kernel_label: self.kernel.label.clone(),
        })
    }
}

pub fn simulate_with(
    config: &GpuConfig,
    kernel: &KernelSpec,
    mut opts: SimOptions,
) -> Result<SimResult, SimError> {
    let violations = config.validate();
    if !violations.is_empty() {
        return Err(SimError::InvalidConfig(violations));
    }
    let violations = kernel.validate();
    if !violations.is_empty() {
        return Err(SimError::InvalidKernel(violations));
    }
    max_blocks_per_sm(&config.sm, kernel)?;
    let cap = opts.cycle_cap;
    Engine::new(config, kernel, &mut opts).run(cap)
}
