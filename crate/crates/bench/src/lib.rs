//! Criterion benchmarks for the fincot harness; see `benches/harness.rs`.
