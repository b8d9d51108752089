//! Benchmarks live in `benches/`; run with `cargo bench -p esn-fractal-bench`.
