//! Minimizes Branin with both acquisitions and prints the regret curve.
//!
//! `cargo run --release -p popbo-core --example quickstart -- [seed]`

use popbo::{run, BenchmarkFunctionF64, BoRunConfig};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let branin = BenchmarkFunctionF64::branin();
    for (name, base) in [("eri", BoRunConfig::eri()), ("r-lcb", BoRunConfig::r_lcb())] {
        let cfg = BoRunConfig { seed, n_iters: 40, ..base };
        let trace = match run(&branin, &cfg) {
            Ok(t) => t,
            Err(failure) => {
                eprintln!("{name}: {failure}");
                std::process::exit(1);
            }
        };
        print!("{name:>5}:");
        for r in trace.records.iter().step_by(8) {
            print!(" {:.4}", r.regret.unwrap());
        }
        println!("  final {:.5}", trace.final_regret().unwrap());
    }
}
