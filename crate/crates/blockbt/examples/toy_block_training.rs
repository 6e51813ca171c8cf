//! Block-schedule training dynamics at desk scale: per-domain loss
//! oscillates with the block switches, and both smoothing and checkpoint
//! averaging flatten the curve.
//!
//! ```bash
//! cargo run --release -p blockbt --example toy_block_training
//! ```

use blockbt::corpus::DatasetTag;
use blockbt::schedule::compile_block_schedule;
use blockbt::toytrain::{
    run_toy_experiment, write_curve_csv, CurvePoint, SyntheticDomain, ToyConfig, Variant,
};

fn variance(series: &[f64]) -> f64 {
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (series.len() - 1) as f64
}

fn main() -> blockbt::Result<()> {
    let dim = 6;
    let domains = vec![
        SyntheticDomain::axis(DatasetTag::Auth, dim, 0, 2.0, 0.05, 512, 256, 101)?,
        SyntheticDomain::axis(DatasetTag::Bt, dim, 1, 2.0, 0.05, 512, 256, 202)?,
        SyntheticDomain::axis(DatasetTag::Ft, dim, 2, 2.0, 0.05, 512, 256, 303)?,
    ];
    // 200-update blocks; the 8-checkpoint averaging window (8 × 100) spans
    // exactly one auth-bt-auth-ft cycle
    let manifest = compile_block_schedule(200, 3200, 100)?;
    let config = ToyConfig {
        lr: 0.05,
        batch_size: 8,
        alpha: 0.001,
        avg_k: 8,
        eval_every: 25,
        seed: 0,
        record_trajectory: false,
    };
    let result = run_toy_experiment(&domains, &manifest, &config)?;

    println!("auth-domain eval loss along the schedule (raw weights):");
    for point in result
        .curve
        .iter()
        .filter(|p| p.variant == Variant::Raw && p.update % 100 == 0 && p.update <= 1600)
    {
        // label with the block the weights were just trained in
        let block = manifest.block_type_at(point.update - 1).unwrap();
        let loss = point.losses[&DatasetTag::Auth];
        let bar = "#".repeat((loss * 4.0).min(60.0) as usize);
        println!("  update {:4} [{block:4}] {loss:7.3} {bar}", point.update);
    }

    let half = manifest.total_updates / 2;
    let series = |variant: Variant| -> Vec<f64> {
        result
            .curve
            .iter()
            .filter(|p| p.variant == variant && p.update > half)
            .map(CurvePoint::mean_loss)
            .collect()
    };
    let raw_var = variance(&series(Variant::Raw));
    println!("\nsecond-half variance of the mean-loss curve:");
    for variant in [Variant::Raw, Variant::Exp, Variant::AvgK, Variant::ExpAvgK] {
        let var = variance(&series(variant));
        println!("  {variant:8} {var:10.6}  ({:.3}× raw)", var / raw_var);
    }

    let dir = tempfile::tempdir().expect("temp dir");
    let csv_path = dir.path().join("curves.csv");
    let mut file = std::fs::File::create(&csv_path).expect("create csv");
    write_curve_csv(&mut file, &result.curve).expect("write csv");
    println!(
        "\nwrote {} curve points to {} for plotting",
        result.curve.len(),
        csv_path.display()
    );
    Ok(())
}
