//! Criterion benchmarks for the qnls kernels live in `benches/`.
