//! Criterion benchmarks for the surfhjb solvers live in `benches/`.
