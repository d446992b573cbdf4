//! Deterministic GPU microarchitecture timing simulator with a
//! design-space-exploration engine for Pascal/Volta-class embedded parts.
//!
//! The crate is organized around the workflow:
//! machine descriptions and presets ([`arch`]), synthetic kernels
//! ([`workload`]), the cache/DRAM timing model ([`mem`]), the cycle-level
//! simulator ([`sim`]), sweep planning, classification and improved
//! setups ([`dse`]), and result renderers ([`report`]).

pub mod arch;
pub mod dse;
pub mod error;
pub mod mem;
pub mod report;
pub mod sim;
pub mod workload;

pub use arch::{
    area_cost, preset, preset_by_name, AreaCost, AreaWeights, CacheGeometry, DramConfig,
    GpuConfig, ParamAxis, Platform, SmConfig,
};
pub use dse::{
    classify, classify_all, compare_setups, default_grid, default_single_plan,
    default_software_axes, improved_setups, run_sweep, ImprovedSetup, ParamCategory,
    ParamClassification, SetupComparison, SetupName, SweepMode, SweepOptions, SweepPlan,
    SweepResult,
};
pub use error::{ConfigError, DseError, SimError, Violation, WorkloadError};
pub use mem::{coalesce, CacheState, DramModel, MemRequest, MemStats, MemorySystem};
pub use sim::{
    max_blocks_per_sm, simulate, simulate_with, slowdown, OccupancyReport, SimOptions, SimResult,
    DEFAULT_CYCLE_CAP,
};
pub use workload::{
    expand_addresses, gen_archetype, read_kernel_file, regranularize, write_kernel_file,
    AccessMode, AccessPattern, Archetype, ArchetypeKind, BlockProgram, KernelSpec, Scale,
    WarpInstr,
};
