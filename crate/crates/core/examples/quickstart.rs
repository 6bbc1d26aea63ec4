//! Trains a small network on the flow-transmission system and compares it
//! with the RK4 reference: `cargo run --release --example quickstart`.

use mss_pinn::catalog::MetricChannels;
use mss_pinn::harness::{oracle_for, train, TrainingConfig};

fn main() -> mss_pinn::Result<()> {
    let mut config = TrainingConfig::preset("example3")?;
    config.iterations = 2000;
    config.collocation.points = 200;

    let model = config.build_model()?;
    let oracle = oracle_for(&config, &model)?;
    let run = train(&config, Some(&oracle))?;

    let loss = &run.manifest.final_loss;
    println!("after {} iterations: L_u {:.3e}, L_f {:.3e}", config.iterations, loss.loss_u, loss.loss_f);
    let metrics = run.manifest.metrics.expect("scored against the oracle");
    assert_eq!(config.channels, MetricChannels::PerformanceRates);
    for (name, rmse) in metrics.channels.iter().zip(&metrics.per_channel_rmse) {
        println!("{name:>6}: rmse {rmse:.2e}");
    }
    println!("overall rmse {:.3e}", metrics.rmse_overall);
    Ok(())
}
