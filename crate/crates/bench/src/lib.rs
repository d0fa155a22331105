//! Criterion benchmarks for the simulator, circuit gradients and environment.
//! Run with `cargo bench -p qmarl-bench`.
