//! Criterion benchmarks for the analysis passes; see `benches/analysis.rs`.
