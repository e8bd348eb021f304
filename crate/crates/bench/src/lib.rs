//! Criterion benchmarks for the filter, kernels and map building; see `benches/`.
