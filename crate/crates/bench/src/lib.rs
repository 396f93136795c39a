//! Criterion benchmarks for the matcher, batch scoring and metrics.
//! See `benches/`.
