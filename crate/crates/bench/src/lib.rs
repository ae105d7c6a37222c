//! Criterion benchmarks for the simulator, compiler, MPS bridge and gradients; see `benches/`.
