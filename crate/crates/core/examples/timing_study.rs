//! Scaling of the per-particle classical pipeline with particle count n and
//! search depth m, next to a fixed-cost path.

use holofocus::metrics::{timing_study, TimingConfig};

fn main() -> holofocus::Result<()> {
    let config = TimingConfig {
        fov: 128,
        repeats: 3,
        ..TimingConfig::default()
    };
    let study = timing_study(&[2, 4, 8], &[4, 8, 16], &config)?;
    for row in &study.rows {
        println!("{:>10} n={:>2} m={:>2} {:8.4} s", row.method, row.n, row.m, row.seconds);
    }
    println!(
        "log-log slopes: classical m {:.2} n {:.2}, fixed cost m {:.2} n {:.2}",
        study.classical_slope_m, study.classical_slope_n, study.fixed_cost_slope_m, study.fixed_cost_slope_n
    );
    Ok(())
}
