//! Table-1 preset rerun for each tau factor given on the command line:
//! `cargo run --release --example tau_sweep -- 0.5 0.75 1.0`.

use musel::sim::{render_markdown, run_experiment, SimConfig, TauRule};

fn main() {
    let factors: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().unwrap()).collect();
    for f in factors {
        let cfg = SimConfig {
            seed: 2024,
            tau_rule: TauRule::NoiseScaled { factor: f, confidence: 0.05 },
            ..SimConfig::preset("table1").unwrap()
        };
        let t = std::time::Instant::now();
        let out = run_experiment(&cfg).unwrap();
        println!("factor {f} tau {:.4} ({:?})\n{}", out.rows[0].tau_mean, t.elapsed(), render_markdown(&out.rows));
    }
}
