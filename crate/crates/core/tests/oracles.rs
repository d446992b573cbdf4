//! Independent oracles and property tests: a brute-force occupancy
//! packer, a naive reference LRU simulator, and randomized invariants
//! over coalescing, address expansion, overrides and regranularization.

use proptest::prelude::*;

use gpu_dse_core::mem::{AccessOutcome, CacheState};
use gpu_dse_core::sim::OccupancyReport;
use gpu_dse_core::workload::{BlockProgram, WARP_SIZE};
use gpu_dse_core::*;

/// Deterministic pseudo-random stream for oracle inputs.
struct Stream(u64);

impl Stream {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn below(&mut self, bound: u64) -> u64 {
        self.next() % bound
    }
}

/// Packs blocks one at a time until any SM resource is exhausted. This is
/// the occupancy oracle: it never looks at the closed-form limits.
fn brute_force_pack(sm: &SmConfig, kernel: &KernelSpec) -> u32 {
    let mut blocks = 0u32;
    loop {
        let next = blocks as u64 + 1;
        let threads = next * kernel.threads_per_block as u64;
        let warps = next * (kernel.threads_per_block / WARP_SIZE) as u64;
        let regs = next * kernel.regs_per_thread as u64 * kernel.threads_per_block as u64;
        let shmem = next * kernel.shmem_per_block;
        if threads > sm.max_threads as u64
            || warps > sm.max_warps as u64
            || regs > sm.regfile_regs
            || shmem > sm.shmem_bytes
            || next > sm.max_blocks as u64
        {
            return blocks;
        }
        blocks += 1;
    }
}

#[test]
fn occupancy_matches_brute_force_packing() {
    let mut rng = Stream(0xDEAD_BEEF);
    let base = preset(Platform::Tx2).sm;
    for round in 0..2000 {
        let mut sm = base.clone();
        sm.max_threads = 32 * (1 + rng.below(64)) as u32;
        sm.max_warps = (1 + rng.below(64)) as u32;
        sm.max_blocks = (1 + rng.below(32)) as u32;
        sm.regfile_regs = 1 + rng.below(1 << 17);
        sm.shmem_bytes = rng.below(1 << 17);
        let kernel = KernelSpec {
            grid_blocks: 1,
            threads_per_block: 32 * (1 + rng.below(32)) as u32,
            regs_per_thread: rng.below(64) as u32,
            shmem_per_block: rng.below(1 << 15),
            footprint_bytes: 1 << 16,
            seed: round,
            label: "occ".into(),
            program: BlockProgram {
                iterations: 1,
                instructions: vec![WarpInstr::Compute { issue_cycles: 1 }],
            },
        };
        let report = OccupancyReport::of(&sm, &kernel);
        let packed = brute_force_pack(&sm, &kernel);
        assert_eq!(
            report.blocks_per_sm, packed,
            "round {round}: formula {report:?} vs packer {packed} for sm={sm:?} tpb={} regs={} shmem={}",
            kernel.threads_per_block, kernel.regs_per_thread, kernel.shmem_per_block
        );
    }
}

/// Naive reference LRU: one ordered list per set, most recent first.
/// Deliberately a different mechanism than the timestamped implementation.
struct RefLru {
    sets: Vec<Vec<u64>>,
    assoc: usize,
    line: u64,
}

impl RefLru {
    fn new(size: u64, assoc: u32, line: u64) -> Self {
        RefLru {
            sets: vec![Vec::new(); (size / (assoc as u64 * line)) as usize],
            assoc: assoc as usize,
            line,
        }
    }

    fn access(&mut self, line_addr: u64) -> bool {
        let set_count = self.sets.len() as u64;
        let set = &mut self.sets[((line_addr / self.line) % set_count) as usize];
        if let Some(pos) = set.iter().position(|&t| t == line_addr) {
            let tag = set.remove(pos);
            set.insert(0, tag);
            true
        } else {
            set.insert(0, line_addr);
            set.truncate(self.assoc);
            false
        }
    }
}

fn sweep_grid_geometries() -> Vec<CacheGeometry> {
    let tx2 = preset(Platform::Tx2);
    let mut out = Vec::new();
    for size in default_grid(ParamAxis::L1Size) {
        out.push(CacheGeometry {
            size_bytes: size,
            ..tx2.sm.l1
        });
    }
    for assoc in default_grid(ParamAxis::L1Assoc) {
        out.push(CacheGeometry {
            associativity: assoc as u32,
            ..tx2.sm.l1
        });
    }
    for size in default_grid(ParamAxis::L2Size) {
        out.push(CacheGeometry {
            size_bytes: size,
            ..tx2.l2
        });
    }
    for assoc in default_grid(ParamAxis::L2Assoc) {
        out.push(CacheGeometry {
            associativity: assoc as u32,
            ..tx2.l2
        });
    }
    out
}

#[test]
fn cache_matches_reference_lru_on_sweep_grids() {
    for geometry in sweep_grid_geometries() {
        let mut cache = CacheState::new(geometry);
        let mut reference = RefLru::new(
            geometry.size_bytes,
            geometry.associativity,
            geometry.line_bytes,
        );
        let mut rng = Stream(geometry.size_bytes ^ geometry.associativity as u64);
        let span = 4 * geometry.size_bytes / geometry.line_bytes;
        for i in 0..100_000u64 {
            let line = rng.below(span) * geometry.line_bytes;
            let got = cache.access(line, i % 5 == 0).is_hit();
            let expected = reference.access(line);
            assert_eq!(
                got, expected,
                "access {i} to line {line} diverged on {geometry:?}"
            );
        }
    }
}

#[test]
fn lru_stack_property_on_random_traces() {
    // Fixed set count: growing associativity must never add misses.
    let set_count = 64u64;
    let line = 64u64;
    for trace_id in 0..100u64 {
        let mut rng = Stream(trace_id * 7 + 1);
        let trace: Vec<u64> = (0..2000).map(|_| rng.below(set_count * 12) * line).collect();
        let mut prev_misses = u64::MAX;
        for assoc in [1u32, 2, 4, 8] {
            let mut cache = CacheState::new(CacheGeometry {
                size_bytes: set_count * assoc as u64 * line,
                associativity: assoc,
                line_bytes: line,
                hit_latency: 1,
            });
            for &a in &trace {
                cache.access(a, false);
            }
            assert!(
                cache.stats.misses <= prev_misses,
                "trace {trace_id}: assoc {assoc} added misses"
            );
            prev_misses = cache.stats.misses;
        }
    }
}

proptest! {
    #[test]
    fn coalesce_bounds_and_order(addrs in prop::array::uniform32(0u64..1_000_000), shift in 2u32..8) {
        let line = 1u64 << shift;
        let lines = coalesce(&addrs, line);
        prop_assert!(!lines.is_empty() && lines.len() <= 32);
        prop_assert!(lines.windows(2).all(|w| w[0] < w[1]), "sorted unique");
        prop_assert!(lines.iter().all(|l| l % line == 0));
        for a in addrs {
            prop_assert!(lines.contains(&(a - a % line)));
        }
    }

    #[test]
    fn expanded_addresses_stay_in_region(
        mode in prop::sample::select(vec![
            AccessMode::CoalescedStride,
            AccessMode::Strided,
            AccessMode::RandomUniform,
        ]),
        base in 0u64..4096,
        stride in 4u64..512,
        region_quanta in 1u64..4096,
        warp in 0u64..10_000,
        lane in 0u32..32,
        ordinal in 0u64..10_000,
        seed: u64,
    ) {
        let pattern = AccessPattern {
            mode,
            base_offset: base * 4,
            stride_bytes: stride,
            region_bytes: region_quanta * 4,
        };
        let addr = expand_addresses(&pattern, warp, lane, ordinal, seed);
        prop_assert!(addr >= pattern.base_offset);
        prop_assert!(addr < pattern.base_offset + pattern.region_bytes);
        prop_assert_eq!(addr, expand_addresses(&pattern, warp, lane, ordinal, seed));
    }

    #[test]
    fn regranularize_is_conservative(
        grid in 1u64..128,
        warps_per_block in 1u32..16,
        shmem_quanta in 0u64..64,
        split in 1u32..16,
    ) {
        let tpb = warps_per_block * 32;
        let kernel = KernelSpec {
            grid_blocks: grid,
            threads_per_block: tpb,
            regs_per_thread: 16,
            shmem_per_block: shmem_quanta * 1024,
            footprint_bytes: 1 << 20,
            seed: 9,
            label: "prop".into(),
            program: BlockProgram {
                iterations: 3,
                instructions: vec![WarpInstr::Compute { issue_cycles: 2 }],
            },
        };
        // Regranularize to a block size that divides the total work.
        let total = grid * tpb as u64;
        let new_tpb = 32 * split;
        prop_assume!(total % new_tpb as u64 == 0);
        match regranularize(&kernel, new_tpb) {
            Ok(re) => {
                prop_assert_eq!(re.grid_blocks * re.threads_per_block as u64, total);
                prop_assert_eq!(re.total_instructions(), kernel.total_instructions());
                prop_assert_eq!(
                    re.shmem_per_block * re.grid_blocks,
                    kernel.shmem_per_block * kernel.grid_blocks
                );
                prop_assert_eq!(re.footprint_bytes, kernel.footprint_bytes);
            }
            // Only the uneven shared-memory split may reject here.
            Err(_) => {
                let new_grid = total / new_tpb as u64;
                prop_assert!((kernel.shmem_per_block * grid) % new_grid != 0);
            }
        }
    }

    #[test]
    fn overrides_commute_and_idempotent(
        a in prop::sample::select(ParamAxis::ALL.to_vec()),
        b in prop::sample::select(ParamAxis::ALL.to_vec()),
        pick_a in 0usize..5,
        pick_b in 0usize..5,
    ) {
        // num_sms and sms_per_cluster intentionally share a field, so the
        // commutation property quantifies over pairs that do not couple.
        let coupled = |x: ParamAxis, y: ParamAxis| {
            matches!(
                (x, y),
                (ParamAxis::NumSms, ParamAxis::SmsPerCluster)
                    | (ParamAxis::SmsPerCluster, ParamAxis::NumSms)
            )
        };
        prop_assume!(a != b && !coupled(a, b));
        let base = preset(Platform::Tx2);
        let grid_a = default_grid(a);
        let grid_b = default_grid(b);
        let va = grid_a[pick_a % grid_a.len()];
        let vb = grid_b[pick_b % grid_b.len()];

        let once = base.apply_override(a, va).unwrap();
        prop_assert_eq!(&once.apply_override(a, va).unwrap(), &once);

        // Validation can reject a combination (e.g. more schedulers than
        // the SMB bound allows); both orders must then agree on it.
        let ab = once.apply_override(b, vb);
        let ba = base.apply_override(b, vb).and_then(|c| c.apply_override(a, va));
        match (ab, ba) {
            (Ok(x), Ok(y)) => prop_assert_eq!(x, y),
            (Err(_), Err(_)) => {}
            (x, y) => prop_assert!(false, "orders disagree: {x:?} vs {y:?}"),
        }
    }
}
