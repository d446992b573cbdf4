//! Synthetic kernels: grid/block geometry, per-thread resource usage, and
//! per-warp instruction programs with parametric address streams.
//!
//! Archetype generators stand in for the usual GPU benchmark problem
//! categories (dense linear algebra, structured grids, graph traversal,
//! dynamic programming, unstructured grids). Everything here is a pure
//! function of explicit seeds.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Violation, WorkloadError};

pub const WARP_SIZE: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessMode {
    /// Lane-contiguous: `base + (warp*32 + lane) * stride mod region`.
    CoalescedStride,
    /// Like coalesced, but the window walks forward by a warp-span per
    /// executed instruction, giving streaming with neighborhood reuse.
    Strided,
    /// Hashed over the region, 4-byte aligned.
    RandomUniform,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessPattern {
    pub mode: AccessMode,
    pub base_offset: u64,
    pub stride_bytes: u64,
    pub region_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WarpInstr {
    Compute { issue_cycles: u32 },
    Load { pattern: AccessPattern },
    Store { pattern: AccessPattern },
    Shmem { latency: u32 },
    Barrier,
}

impl WarpInstr {
    pub fn is_memory(&self) -> bool {
        matches!(self, WarpInstr::Load { .. } | WarpInstr::Store { .. })
    }
}

/// The instruction sequence every warp of a block executes, repeated
/// `iterations` times.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockProgram {
    pub iterations: u32,
    pub instructions: Vec<WarpInstr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub grid_blocks: u64,
    pub threads_per_block: u32,
    pub regs_per_thread: u32,
    pub shmem_per_block: u64,
    pub footprint_bytes: u64,
    pub seed: u64,
    pub label: String,
    pub program: BlockProgram,
}

impl KernelSpec {
    pub fn warps_per_block(&self) -> u32 {
        self.threads_per_block / WARP_SIZE
    }

    pub fn total_warps(&self) -> u64 {
        self.grid_blocks * self.warps_per_block() as u64
    }

    /// Closed-form count of instructions a full run issues.
    pub fn total_instructions(&self) -> u64 {
        self.total_warps()
            * self.program.instructions.len() as u64
            * self.program.iterations as u64
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.grid_blocks < 1 {
            out.push(Violation::new("grid_blocks", "must be >= 1"));
        }
        if self.threads_per_block < WARP_SIZE || self.threads_per_block % WARP_SIZE != 0 {
            out.push(Violation::new(
                "threads_per_block",
                format!("{} is not a positive multiple of 32", self.threads_per_block),
            ));
        }
        if self.footprint_bytes < 64 {
            out.push(Violation::new(
                "footprint_bytes",
                "must be at least one cache line (64 bytes)",
            ));
        }
        if self.program.instructions.is_empty() {
            out.push(Violation::new("program.instructions", "must be nonempty"));
        }
        if self.program.iterations < 1 {
            out.push(Violation::new("program.iterations", "must be >= 1"));
        }
        for (i, instr) in self.program.instructions.iter().enumerate() {
            let at = |f: &str| format!("program.instructions[{i}].{f}");
            match instr {
                WarpInstr::Compute { issue_cycles } => {
                    if *issue_cycles < 1 {
                        out.push(Violation::new(at("issue_cycles"), "must be >= 1"));
                    }
                }
                WarpInstr::Shmem { latency } => {
                    if *latency < 1 {
                        out.push(Violation::new(at("latency"), "must be >= 1"));
                    }
                }
                WarpInstr::Load { pattern } | WarpInstr::Store { pattern } => {
                    if pattern.stride_bytes < 4 {
                        out.push(Violation::new(at("pattern.stride_bytes"), "must be >= 4"));
                    }
                    if pattern.region_bytes < 4 {
                        out.push(Violation::new(at("pattern.region_bytes"), "must be >= 4"));
                    }
                    if pattern.region_bytes > self.footprint_bytes {
                        out.push(Violation::new(
                            at("pattern.region_bytes"),
                            format!(
                                "{} exceeds footprint_bytes = {}",
                                pattern.region_bytes, self.footprint_bytes
                            ),
                        ));
                    } else if pattern.base_offset + pattern.region_bytes > self.footprint_bytes {
                        out.push(Violation::new(
                            at("pattern.base_offset"),
                            "base_offset + region_bytes exceeds the footprint",
                        ));
                    }
                }
                WarpInstr::Barrier => {}
            }
        }
        out
    }

    pub fn validated(self) -> Result<KernelSpec, WorkloadError> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(WorkloadError::Invalid(violations))
        }
    }
}

/// SplitMix64 step; the only mixing primitive used anywhere.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(seed: u64, a: u64, b: u64, c: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed ^ a) ^ b) ^ c)
}

/// Byte address one lane of one warp touches for one executed memory
/// instruction. Pure in all five arguments; always inside
/// `[base_offset, base_offset + region_bytes)`.
pub fn expand_addresses(
    pattern: &AccessPattern,
    warp_index: u64,
    lane: u32,
    instr_ordinal: u64,
    seed: u64,
) -> u64 {
    debug_assert!(lane < WARP_SIZE);
    let region = pattern.region_bytes.max(1);
    let offset = match pattern.mode {
        AccessMode::CoalescedStride => {
            (warp_index * 32 + lane as u64).wrapping_mul(pattern.stride_bytes) % region
        }
        AccessMode::Strided => ((warp_index + instr_ordinal) * 32 + lane as u64)
            .wrapping_mul(pattern.stride_bytes)
            % region,
        AccessMode::RandomUniform => {
            (mix(seed, warp_index, lane as u64, instr_ordinal) % region) & !3
        }
    };
    pattern.base_offset + offset
}

/// Redistribute the same total work over a different block size. Total
/// threads, the per-thread program and the footprint are conserved;
/// shared memory per block scales with the block size.
pub fn regranularize(
    kernel: &KernelSpec,
    new_threads_per_block: u32,
) -> Result<KernelSpec, WorkloadError> {
    if new_threads_per_block < WARP_SIZE || new_threads_per_block % WARP_SIZE != 0 {
        return Err(WorkloadError::Regranularize(format!(
            "{new_threads_per_block} threads per block is not a positive multiple of 32"
        )));
    }
    let total_threads = kernel.grid_blocks * kernel.threads_per_block as u64;
    if total_threads % new_threads_per_block as u64 != 0 {
        return Err(WorkloadError::Regranularize(format!(
            "total work of {total_threads} threads is not divisible by {new_threads_per_block}"
        )));
    }
    let new_grid = total_threads / new_threads_per_block as u64;
    let total_shmem = kernel.shmem_per_block * kernel.grid_blocks;
    if total_shmem % new_grid != 0 {
        return Err(WorkloadError::Regranularize(format!(
            "shared memory of {total_shmem} bytes does not split evenly over {new_grid} blocks"
        )));
    }
    Ok(KernelSpec {
        grid_blocks: new_grid,
        threads_per_block: new_threads_per_block,
        shmem_per_block: total_shmem / new_grid,
        ..kernel.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchetypeKind {
    DenseLinearAlgebra,
    StructuredGrid,
    GraphTraversal,
    DynamicProgramming,
    UnstructuredGrid,
}

impl ArchetypeKind {
    pub const ALL: [ArchetypeKind; 5] = [
        ArchetypeKind::DenseLinearAlgebra,
        ArchetypeKind::StructuredGrid,
        ArchetypeKind::GraphTraversal,
        ArchetypeKind::DynamicProgramming,
        ArchetypeKind::UnstructuredGrid,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ArchetypeKind::DenseLinearAlgebra => "dense_linear_algebra",
            ArchetypeKind::StructuredGrid => "structured_grid",
            ArchetypeKind::GraphTraversal => "graph_traversal",
            ArchetypeKind::DynamicProgramming => "dynamic_programming",
            ArchetypeKind::UnstructuredGrid => "unstructured_grid",
        }
    }
}

impl fmt::Display for ArchetypeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ArchetypeKind {
    type Err = WorkloadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ArchetypeKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| WorkloadError::Parse {
                path: "<archetype>".into(),
                message: format!("unknown archetype `{s}`"),
            })
    }
}

/// Footprint tiers chosen to straddle the L1/L2 sizes under sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Tiny,
    Small,
    Medium,
}

impl Scale {
    pub const ALL: [Scale; 3] = [Scale::Tiny, Scale::Small, Scale::Medium];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scale::Tiny => "tiny",
            Scale::Small => "small",
            Scale::Medium => "medium",
        }
    }

    pub fn footprint_bytes(&self) -> u64 {
        match self {
            Scale::Tiny => 64 * 1024,
            Scale::Small => 1024 * 1024,
            Scale::Medium => 8 * 1024 * 1024,
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scale {
    type Err = WorkloadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scale::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| WorkloadError::Parse {
                path: "<scale>".into(),
                message: format!("unknown scale `{s}` (expected tiny, small or medium)"),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Archetype {
    pub name: ArchetypeKind,
    pub scale: Scale,
}

fn coalesced(base: u64, region: u64) -> AccessPattern {
    AccessPattern {
        mode: AccessMode::CoalescedStride,
        base_offset: base,
        stride_bytes: 4,
        region_bytes: region,
    }
}

fn strided(base: u64, stride: u64, region: u64) -> AccessPattern {
    AccessPattern {
        mode: AccessMode::Strided,
        base_offset: base,
        stride_bytes: stride,
        region_bytes: region,
    }
}

fn random(base: u64, region: u64) -> AccessPattern {
    AccessPattern {
        mode: AccessMode::RandomUniform,
        base_offset: base,
        stride_bytes: 4,
        region_bytes: region,
    }
}

/// Deterministic synthetic kernel for one problem archetype. The seed
/// feeds the address hash and the label; structure and sizes come from
/// the archetype alone.
pub fn gen_archetype(archetype: Archetype, seed: u64) -> KernelSpec {
    use WarpInstr::{Barrier, Compute, Load, Shmem, Store};
    let fp = archetype.scale.footprint_bytes();
    let half = fp / 2;
    let label = format!("{}-{}-s{}", archetype.name, archetype.scale, seed);
    let spec = match archetype.name {
        // Compute-heavy with lane-contiguous streams; issue-rate bound
        // once enough warps are resident.
        ArchetypeKind::DenseLinearAlgebra => {
            let (grid, tpb, iters) = match archetype.scale {
                Scale::Tiny => (8, 128, 12),
                Scale::Small => (32, 256, 12),
                Scale::Medium => (64, 256, 8),
            };
            let mut instructions = vec![Load {
                pattern: coalesced(0, half),
            }];
            instructions.extend(std::iter::repeat_n(Compute { issue_cycles: 1 }, 5));
            instructions.push(Load {
                pattern: coalesced(half, half),
            });
            instructions.extend(std::iter::repeat_n(Compute { issue_cycles: 1 }, 5));
            instructions.push(Store {
                pattern: coalesced(0, half),
            });
            instructions.extend(std::iter::repeat_n(Compute { issue_cycles: 1 }, 4));
            KernelSpec {
                grid_blocks: grid,
                threads_per_block: tpb,
                regs_per_thread: 32,
                shmem_per_block: 0,
                footprint_bytes: fp,
                seed,
                label,
                program: BlockProgram {
                    iterations: iters,
                    instructions,
                },
            }
        }
        // Stencil-style strided walks with spatial reuse inside lines.
        ArchetypeKind::StructuredGrid => {
            let (grid, tpb, iters) = match archetype.scale {
                Scale::Tiny => (16, 128, 10),
                Scale::Small => (48, 128, 10),
                Scale::Medium => (64, 128, 8),
            };
            KernelSpec {
                grid_blocks: grid,
                threads_per_block: tpb,
                regs_per_thread: 24,
                shmem_per_block: 2048,
                footprint_bytes: fp,
                seed,
                label,
                program: BlockProgram {
                    iterations: iters,
                    instructions: vec![
                        Load {
                            pattern: strided(0, 32, fp),
                        },
                        Compute { issue_cycles: 2 },
                        Load {
                            pattern: strided(0, 32, fp),
                        },
                        Compute { issue_cycles: 2 },
                        Store {
                            pattern: strided(0, 32, fp),
                        },
                        Compute { issue_cycles: 1 },
                    ],
                },
            }
        }
        // Memory-bound: hashed accesses over a hot index region plus a
        // contiguous scan of the full footprint. The hot region is 5/16
        // of the footprint so capacity effects kick in below it.
        ArchetypeKind::GraphTraversal => {
            let (grid, tpb, iters) = match archetype.scale {
                Scale::Tiny => (8, 128, 12),
                Scale::Small => (32, 128, 12),
                Scale::Medium => (48, 128, 8),
            };
            let hot = (fp / 16 * 5) & !63;
            KernelSpec {
                grid_blocks: grid,
                threads_per_block: tpb,
                regs_per_thread: 20,
                shmem_per_block: 0,
                footprint_bytes: fp,
                seed,
                label,
                program: BlockProgram {
                    iterations: iters,
                    instructions: vec![
                        Load {
                            pattern: random(0, hot),
                        },
                        Compute { issue_cycles: 1 },
                        Load {
                            pattern: random(0, hot),
                        },
                        Compute { issue_cycles: 1 },
                        Load {
                            pattern: coalesced(0, fp),
                        },
                        Store {
                            pattern: random(0, hot),
                        },
                    ],
                },
            }
        }
        // Wavefront phases: shared-memory traffic fenced by barriers.
        ArchetypeKind::DynamicProgramming => {
            let (grid, tpb, iters) = match archetype.scale {
                Scale::Tiny => (16, 128, 16),
                Scale::Small => (48, 128, 16),
                Scale::Medium => (96, 128, 12),
            };
            KernelSpec {
                grid_blocks: grid,
                threads_per_block: tpb,
                regs_per_thread: 24,
                shmem_per_block: 8192,
                footprint_bytes: fp,
                seed,
                label,
                program: BlockProgram {
                    iterations: iters,
                    instructions: vec![
                        Shmem { latency: 24 },
                        Compute { issue_cycles: 2 },
                        Barrier,
                        Load {
                            pattern: coalesced(0, fp),
                        },
                        Shmem { latency: 24 },
                        Compute { issue_cycles: 1 },
                        Barrier,
                    ],
                },
            }
        }
        // Mixed profile built from 8-cycle latency chains. With 14
        // resident warps per SM the issue demand sits between one and
        // two instructions per cycle, which makes it the scheduler probe:
        // a single scheduler saturates, two already keep up.
        ArchetypeKind::UnstructuredGrid => {
            let (grid, tpb, iters) = match archetype.scale {
                Scale::Tiny => (4, 224, 24),
                Scale::Small => (16, 224, 20),
                Scale::Medium => (32, 224, 16),
            };
            KernelSpec {
                grid_blocks: grid,
                threads_per_block: tpb,
                regs_per_thread: 32,
                shmem_per_block: 32768,
                footprint_bytes: fp,
                seed,
                label,
                program: BlockProgram {
                    iterations: iters,
                    instructions: vec![
                        Compute { issue_cycles: 8 },
                        Compute { issue_cycles: 8 },
                        Compute { issue_cycles: 8 },
                        Load {
                            pattern: coalesced(0, half),
                        },
                        Compute { issue_cycles: 8 },
                        Compute { issue_cycles: 8 },
                        Compute { issue_cycles: 8 },
                        Shmem { latency: 12 },
                    ],
                },
            }
        }
    };
    debug_assert!(spec.validate().is_empty());
    spec
}

pub fn kernel_to_toml(spec: &KernelSpec) -> String {
    toml::to_string_pretty(spec).expect("KernelSpec serializes")
}

pub fn kernel_from_toml(text: &str) -> Result<KernelSpec, WorkloadError> {
    let spec: KernelSpec = toml::from_str(text).map_err(|e| WorkloadError::Parse {
        path: "<kernel>".into(),
        message: e.to_string(),
    })?;
    spec.validated()
}

pub fn read_kernel_file(path: &Path) -> Result<KernelSpec, WorkloadError> {
    let text = std::fs::read_to_string(path).map_err(|source| WorkloadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    kernel_from_toml(&text).map_err(|e| match e {
        WorkloadError::Parse { message, .. } => WorkloadError::Parse {
            path: path.display().to_string(),
            message,
        },
        other => other,
    })
}

pub fn write_kernel_file(path: &Path, spec: &KernelSpec) -> Result<(), WorkloadError> {
    std::fs::write(path, kernel_to_toml(spec)).map_err(|source| WorkloadError::Io {
        path: path.display().to_string(),
        source,
    })
}
