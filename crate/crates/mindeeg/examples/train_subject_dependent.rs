//! Train one model per subject under the subject-dependent protocol and
//! report mean accuracy over all plans.

use mindeeg::config::ModelConfig;
use mindeeg::data::{synth_generate, SynthSpec};
use mindeeg::metrics::{aggregate_accuracy, format_acc_std};
use mindeeg::splits::{split_subject_dependent, DependentProtocol};
use mindeeg::train::run_training;

fn main() {
    let mut spec = SynthSpec::new(1, 2, 4, 12);
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
        epochs: 60,
        seed: 3,
        ..ModelConfig::default()
    };

    let plans = split_subject_dependent(&ds, DependentProtocol::LastTwoPerClass).unwrap();
    let mut reports = Vec::new();
    for plan in &plans {
        let outcome = run_training(&cfg, &ds, plan, |epoch, loss| {
            if epoch % 5 == 0 {
                println!("  [{}] epoch {epoch:>3}  loss {loss:.4}", plan.name);
            }
        })
        .unwrap();
        println!(
            "{}: train {:.1}%  test {:.1}%  macro-F1 {:.3}",
            plan.name,
            100.0 * outcome.train_accuracy,
            100.0 * outcome.report.accuracy,
            outcome.report.macro_f1
        );
        reports.push(outcome.report);
    }
    let (mean, std) = aggregate_accuracy(&reports);
    println!("subject-dependent: {}", format_acc_std(mean, std));
}
