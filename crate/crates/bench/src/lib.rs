//! Shared workload builders for the benchmark targets.

use gpu_dse_core::{gen_archetype, Archetype, ArchetypeKind, KernelSpec, Scale};

pub fn bench_kernel(kind: ArchetypeKind) -> KernelSpec {
    gen_archetype(
        Archetype {
            name: kind,
            scale: Scale::Small,
        },
        42,
    )
}
