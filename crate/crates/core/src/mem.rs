//! Memory hierarchy timing: warp coalescing, per-SM L1 and shared banked
//! L2 (set-associative, LRU, write-back write-allocate), and a DRAM
//! bandwidth/latency model.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::arch::{CacheGeometry, GpuConfig};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemStats {
    pub accesses: u64,
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
    pub dram_bytes: u64,
}

impl MemStats {
    pub fn merge(&mut self, other: &MemStats) {
        self.accesses += other.accesses;
        self.hits += other.hits;
        self.misses += other.misses;
        self.evictions += other.evictions;
        self.dram_bytes += other.dram_bytes;
    }
}

/// One line-granular request headed for DRAM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemRequest {
    pub line_address: u64,
    pub is_write: bool,
    pub sm_id: u32,
    pub ready_cycle: u64,
}

/// Merge a warp's 32 lane addresses into the unique cache-line
/// transactions they need, sorted ascending.
pub fn coalesce(addresses: &[u64; 32], line_bytes: u64) -> Vec<u64> {
    let lines: BTreeSet<u64> = addresses.iter().map(|a| a - a % line_bytes).collect();
    lines.into_iter().collect()
}

#[derive(Debug, Clone, Copy)]
struct Way {
    tag: u64,
    dirty: bool,
    last_used: u64,
}

pub struct EvictedLine {
    pub line_address: u64,
    pub dirty: bool,
}

pub enum AccessOutcome {
    Hit,
    Miss { evicted: Option<EvictedLine> },
}

impl AccessOutcome {
    pub fn is_hit(&self) -> bool {
        matches!(self, AccessOutcome::Hit)
    }
}

/// Set-associative LRU cache. Write-back, write-allocate: a write hit
/// dirties the line, a miss allocates at MRU and a full set evicts its
/// LRU way (dirty evictions are handed back for write-back).
pub struct CacheState {
    geometry: CacheGeometry,
    sets: Vec<Vec<Way>>,
    tick: u64,
    pub stats: MemStats,
}

impl CacheState {
    pub fn new(geometry: CacheGeometry) -> Self {
        let set_count = geometry.set_count() as usize;
        assert!(set_count >= 1, "geometry must have at least one set");
        CacheState {
            geometry,
            sets: vec![Vec::with_capacity(geometry.associativity as usize); set_count],
            tick: 0,
            stats: MemStats::default(),
        }
    }

    pub fn geometry(&self) -> &CacheGeometry {
        &self.geometry
    }

    pub fn access(&mut self, line_address: u64, is_write: bool) -> AccessOutcome {
        debug_assert_eq!(line_address % self.geometry.line_bytes, 0);
        self.tick += 1;
        self.stats.accesses += 1;
        let set_count = self.sets.len() as u64;
        let set = &mut self.sets[((line_address / self.geometry.line_bytes) % set_count) as usize];

        if let Some(way) = set.iter_mut().find(|w| w.tag == line_address) {
            way.last_used = self.tick;
            way.dirty |= is_write;
            self.stats.hits += 1;
            return AccessOutcome::Hit;
        }

        self.stats.misses += 1;
        let evicted = if set.len() == self.geometry.associativity as usize {
            let lru = set
                .iter()
                .enumerate()
                .min_by_key(|(_, w)| w.last_used)
                .map(|(i, _)| i)
                .expect("set is full");
            let victim = set.swap_remove(lru);
            self.stats.evictions += 1;
            Some(EvictedLine {
                line_address: victim.tag,
                dirty: victim.dirty,
            })
        } else {
            None
        };
        set.push(Way {
            tag: line_address,
            dirty: is_write,
            last_used: self.tick,
        });
        AccessOutcome::Miss { evicted }
    }
}

/// Single-channel DRAM: each request completes at
/// `max(issue + latency, token)` where tokens release one line-time
/// apart, so back-to-back requests serialize at the link bandwidth.
pub struct DramModel {
    latency_cycles: u64,
    cycles_per_line: f64,
    next_token: f64,
}

impl DramModel {
    pub fn new(latency_cycles: u64, bandwidth_bytes_per_cycle: f64, line_bytes: u64) -> Self {
        DramModel {
            latency_cycles,
            cycles_per_line: line_bytes as f64 / bandwidth_bytes_per_cycle,
            next_token: 0.0,
        }
    }

    /// Completion cycle for a demand fetch issued at `issue_cycle`.
    pub fn service(&mut self, issue_cycle: u64) -> u64 {
        let done = ((issue_cycle + self.latency_cycles) as f64).max(self.next_token);
        self.next_token = done + self.cycles_per_line;
        done.ceil() as u64
    }

    /// Consume bandwidth for traffic nobody waits on (write-backs, fills
    /// issued on behalf of writes).
    pub fn consume(&mut self, issue_cycle: u64) {
        let start = (issue_cycle as f64).max(self.next_token);
        self.next_token = start + self.cycles_per_line;
    }

    /// FIFO service of a whole queue; completion cycle per request.
    pub fn service_queue(&mut self, queue: &[MemRequest], current_cycle: u64) -> Vec<u64> {
        queue
            .iter()
            .map(|req| self.service(req.ready_cycle.max(current_cycle)))
            .collect()
    }
}

/// A trace record per cache lookup, for external cross-checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheLevel {
    L1,
    L2,
}

impl std::fmt::Display for CacheLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CacheLevel::L1 => "L1",
            CacheLevel::L2 => "L2",
        })
    }
}

/// The full hierarchy one simulation instance owns: private L1 per SM, a
/// shared banked L2 behind one request port per cluster, and DRAM.
///
/// Timing works by resource reservation: every lookup reserves its port,
/// bank and DRAM slots at processing time, in deterministic issue order,
/// and yields the cycle its data is ready.
pub struct MemorySystem {
    line_bytes: u64,
    l1_latency: u64,
    l2_latency: u64,
    l1: Vec<CacheState>,
    l2: CacheState,
    dram: DramModel,
    bank_free: Vec<u64>,
    cluster_port_free: Vec<u64>,
    sms_per_cluster: u32,
    pub l2_dirty_writebacks: u64,
    pub dram_bytes: u64,
    trace: Option<Box<dyn Write>>,
}

impl MemorySystem {
    pub fn new(config: &GpuConfig, trace: Option<Box<dyn Write>>) -> Self {
        let line_bytes = config.sm.l1.line_bytes;
        MemorySystem {
            line_bytes,
            l1_latency: config.sm.l1.hit_latency,
            l2_latency: config.l2.hit_latency,
            l1: (0..config.num_sms)
                .map(|_| CacheState::new(config.sm.l1))
                .collect(),
            l2: CacheState::new(config.l2),
            dram: DramModel::new(
                config.dram.latency_cycles,
                config.dram.bandwidth_bytes_per_cycle,
                line_bytes,
            ),
            bank_free: vec![0; config.dram.l2_banks as usize],
            cluster_port_free: vec![0; config.clusters() as usize],
            sms_per_cluster: config.sms_per_cluster,
            l2_dirty_writebacks: 0,
            dram_bytes: 0,
            trace,
        }
    }

    pub fn line_bytes(&self) -> u64 {
        self.line_bytes
    }

    fn record(&mut self, cycle: u64, sm: usize, level: CacheLevel, line: u64, hit: bool) {
        if let Some(w) = self.trace.as_mut() {
            let _ = writeln!(
                w,
                "{cycle} {sm} {level} {line} {}",
                if hit { "hit" } else { "miss" }
            );
        }
    }

    /// Grant cycle for one L2 access from `sm` that becomes ready at
    /// `ready`: one request per cluster port per cycle, one access per
    /// bank per cycle.
    fn grant_l2(&mut self, sm: usize, line: u64, ready: u64) -> u64 {
        let cluster = sm / self.sms_per_cluster as usize;
        let at_port = ready.max(self.cluster_port_free[cluster]);
        self.cluster_port_free[cluster] = at_port + 1;
        let bank = ((line / self.line_bytes) % self.bank_free.len() as u64) as usize;
        let granted = at_port.max(self.bank_free[bank]);
        self.bank_free[bank] = granted + 1;
        granted
    }

    /// L2 lookup for a demand fetch; returns the data-ready cycle.
    fn l2_fetch(&mut self, sm: usize, line: u64, ready: u64) -> u64 {
        let granted = self.grant_l2(sm, line, ready);
        match self.l2.access(line, false) {
            AccessOutcome::Hit => {
                self.record(granted, sm, CacheLevel::L2, line, true);
                granted + self.l2_latency
            }
            AccessOutcome::Miss { evicted } => {
                self.record(granted, sm, CacheLevel::L2, line, false);
                self.dram_bytes += self.line_bytes;
                let done = self.dram.service(granted + self.l2_latency);
                self.retire_l2_eviction(evicted, done);
                done
            }
        }
    }

    /// L2 write on behalf of an L1 write-back; nobody waits on it.
    fn l2_writeback(&mut self, sm: usize, line: u64, ready: u64) {
        let granted = self.grant_l2(sm, line, ready);
        match self.l2.access(line, true) {
            AccessOutcome::Hit => self.record(granted, sm, CacheLevel::L2, line, true),
            AccessOutcome::Miss { evicted } => {
                self.record(granted, sm, CacheLevel::L2, line, false);
                // Write-allocate still fetches the line.
                self.dram_bytes += self.line_bytes;
                self.dram.consume(granted + self.l2_latency);
                self.retire_l2_eviction(evicted, granted + self.l2_latency);
            }
        }
    }

    fn retire_l2_eviction(&mut self, evicted: Option<EvictedLine>, at: u64) {
        if let Some(ev) = evicted {
            if ev.dirty {
                self.l2_dirty_writebacks += 1;
                self.dram_bytes += self.line_bytes;
                self.dram.consume(at);
            }
        }
    }

    /// Run one warp memory instruction's coalesced lines through the
    /// hierarchy. Returns the cycle the last line completes and how many
    /// lines missed in L1 (the outstanding-miss count the SM tracks).
    pub fn warp_access(
        &mut self,
        sm: usize,
        cycle: u64,
        lines: &[u64],
        is_write: bool,
    ) -> (u64, u32) {
        let mut done = cycle;
        let mut l1_misses = 0u32;
        for &line in lines {
            let after_l1 = cycle + self.l1_latency;
            match self.l1[sm].access(line, is_write) {
                AccessOutcome::Hit => {
                    self.record(cycle, sm, CacheLevel::L1, line, true);
                    done = done.max(after_l1);
                }
                AccessOutcome::Miss { evicted } => {
                    self.record(cycle, sm, CacheLevel::L1, line, false);
                    l1_misses += 1;
                    let ready = self.l2_fetch(sm, line, after_l1);
                    if let Some(ev) = evicted {
                        if ev.dirty {
                            self.l2_writeback(sm, ev.line_address, after_l1);
                        }
                    }
                    done = done.max(ready);
                }
            }
        }
        (done, l1_misses)
    }

    pub fn l1_stats(&self) -> MemStats {
        let mut total = MemStats::default();
        for c in &self.l1 {
            total.merge(&c.stats);
        }
        total
    }

    pub fn l2_stats(&self) -> MemStats {
        let mut stats = self.l2.stats;
        stats.dram_bytes = self.dram_bytes;
        stats
    }
}
