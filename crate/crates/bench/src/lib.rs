//! Criterion benchmarks for the tensor kernels and network forward pass; see `benches/`.
