//! Criterion benchmarks for kernels, simulation, inference and prediction; see `benches/`.
