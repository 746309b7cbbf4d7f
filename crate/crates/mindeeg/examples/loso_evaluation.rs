//! Leave-one-subject-out evaluation: each fold trains on all subjects but
//! one and tests on the held-out subject.

use mindeeg::config::ModelConfig;
use mindeeg::data::{synth_generate, SynthSpec};
use mindeeg::metrics::{aggregate_accuracy, format_acc_std};
use mindeeg::splits::split_loso;
use mindeeg::train::run_training;

fn main() {
    let mut spec = SynthSpec::new(11, 3, 4, 6);
    spec.n = 16;
    spec.d = 3;
    let ds = synth_generate(&spec);

    let cfg = ModelConfig {
        n: 16,
        d: 3,
        q: 4,
        k1: 8,
        k2: 8,
        k3: 16,
        embed_dim: 8,
        global_out: 12,
        intra_out: 12,
        inter_out: 10,
        head_hidden1: 32,
        head_hidden2: 16,
        classes: 4,
        batch_size: 16,
        epochs: 12,
        seed: 11,
        ..ModelConfig::default()
    };

    let mut reports = Vec::new();
    for plan in split_loso(&ds).unwrap() {
        let outcome = run_training(&cfg, &ds, &plan, |_, _| {}).unwrap();
        println!(
            "{}: {} train / {} test samples, accuracy {:.1}%",
            plan.name,
            plan.train.len(),
            plan.test.len(),
            100.0 * outcome.report.accuracy
        );
        reports.push(outcome.report);
    }
    let (mean, std) = aggregate_accuracy(&reports);
    println!("LOSO: {} (chance is 25.0%)", format_acc_std(mean, std));
}
