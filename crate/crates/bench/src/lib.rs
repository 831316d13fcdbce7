//! Criterion benchmarks for the augssl kernels; see `benches/`.
