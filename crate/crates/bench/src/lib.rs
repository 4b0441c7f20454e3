//! Criterion benchmarks for `proxkern` live in `benches/`; run them with
//! `cargo bench -p proxkern-bench`.
