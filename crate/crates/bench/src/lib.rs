//! Benchmarks for the allocation engine live in `benches/`.
