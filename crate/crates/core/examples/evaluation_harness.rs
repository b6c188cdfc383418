//! Score backends against labelled data: accuracy for classifiers, Pearson
//! correlation and MAE for regressors, printed as an evaluation table.
//!
//! ```sh
//! cargo run --example evaluation_harness
//! ```

use infergate::catalog::stock_registry;
use infergate::registry::{EvaluationReport, EvaluationTarget};

fn sample(i: u32) -> Vec<u8> {
    format!("sample-{i:04}").into_bytes()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let registry = stock_registry();
    let mut report = EvaluationReport::new();

    // A classifier dataset whose labels agree with the model 4 times in 5.
    let labelled: Vec<(Vec<u8>, String)> = (0..200)
        .map(|i| {
            let img = sample(i);
            let predicted = registry.classify("nsfw", &img, 1).unwrap().top_k[0].label.clone();
            let label = if i % 5 == 0 { "neutral-but-wrong".into() } else { predicted };
            (img, label)
        })
        .collect();
    let target = EvaluationTarget::new("cv/nsfw", "stub", "synthetic-200");
    report.push(registry.evaluate_classifier("nsfw", &labelled, &target)?)?;

    // Regressor ground truth: the model's own score plus bounded noise.
    let scored: Vec<(Vec<u8>, f64)> = (0..200)
        .map(|i| {
            let img = sample(i);
            let s = registry.score("fbp", &img).unwrap().score;
            (img, s + ((i % 7) as f64 - 3.0) * 0.05)
        })
        .collect();
    let target = EvaluationTarget::new("cv/fbp", "stub", "synthetic-200");
    for row in registry.evaluate_regressor("fbp", &scored, &target)? {
        report.push(row)?;
    }

    print!("{}", report.render());
    Ok(())
}
