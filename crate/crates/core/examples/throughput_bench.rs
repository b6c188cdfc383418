//! Naive (one item per call) versus batched throughput on a backend with a
//! fixed per-call overhead.
//!
//! ```sh
//! cargo run --release --example throughput_bench -- 10
//! ```

use std::time::Duration;

use infergate::catalog::{simulated_registry, CallCost};
use infergate::loadgen::{bench_throughput, BenchMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let overhead_ms: u64 = std::env::args().nth(1).map_or(Ok(10), |a| a.parse())?;
    let registry = simulated_registry(CallCost {
        per_call: Duration::from_millis(overhead_ms),
        per_item: Duration::from_micros(100),
    });

    let naive = bench_throughput(&registry, "food", BenchMode::Naive, 100, 1)?;
    println!("{naive}");
    for batch in [2, 4, 8, 16] {
        let batched = bench_throughput(&registry, "food", BenchMode::Batched, 100, batch)?;
        println!("{batched}  ({:.2}x naive)", batched.fps / naive.fps);
    }
    Ok(())
}
