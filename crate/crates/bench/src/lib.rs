//! Benchmarks for the tracking pipeline; see `benches/pipeline.rs`.
