//! Compare the full model against its single-granularity ablations: dropped
//! branches stop contributing parameters and the head shrinks accordingly.

use mindeeg::config::ModelConfig;
use mindeeg::data::{synth_generate, SynthSpec};
use mindeeg::model::MindEegModel;
use mindeeg::splits::{split_subject_dependent, DependentProtocol};
use mindeeg::train::run_training;

fn main() {
    let mut spec = SynthSpec::new(9, 1, 4, 8);
    spec.n = 16;
    spec.d = 3;
    let ds = synth_generate(&spec);
    let plan = split_subject_dependent(&ds, DependentProtocol::LastTwoPerClass)
        .unwrap()
        .remove(0);

    let base = ModelConfig {
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
        epochs: 15,
        seed: 9,
        ..ModelConfig::default()
    };

    let variants: [(&str, fn(&mut ModelConfig)); 5] = [
        ("full", |_| {}),
        ("drop_global", |c| c.drop_global = true),
        ("drop_intra", |c| c.drop_intra = true),
        ("drop_inter", |c| c.drop_inter = true),
        ("drop_regional", |c| c.drop_regional = true),
    ];

    println!("{:<14} {:>10} {:>10} {:>10}", "variant", "params", "train %", "test %");
    for (name, tweak) in variants {
        let mut cfg = base.clone();
        tweak(&mut cfg);
        let params = MindEegModel::new(&cfg).unwrap().trainable_param_count();
        let outcome = run_training(&cfg, &ds, &plan, |_, _| {}).unwrap();
        println!(
            "{name:<14} {params:>10} {:>10.1} {:>10.1}",
            100.0 * outcome.train_accuracy,
            100.0 * outcome.report.accuracy
        );
    }
}
