//! Criterion benchmarks for `dmbn-core`; see `benches/`.
