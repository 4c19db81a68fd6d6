//! Benchmarks live in `benches/`; run them with `cargo bench -p salfold-bench`.
