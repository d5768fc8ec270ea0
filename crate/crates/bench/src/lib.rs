//! Criterion benchmarks for the urbanscope toolkit; see `benches/`.
