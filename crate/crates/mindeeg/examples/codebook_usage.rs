//! Train briefly, then print how often each codebook embedding is selected.
//! Revival between epochs keeps every codebook non-degenerate.

use mindeeg::codebook::histogram_csv;
use mindeeg::config::ModelConfig;
use mindeeg::data::{synth_generate, SynthSpec};
use mindeeg::splits::{split_subject_dependent, DependentProtocol};
use mindeeg::train::run_training;

fn main() {
    let mut spec = SynthSpec::new(5, 1, 4, 10);
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
        epochs: 15,
        seed: 5,
        ..ModelConfig::default()
    };

    let plan = split_subject_dependent(&ds, DependentProtocol::LastTwoPerClass)
        .unwrap()
        .remove(0);
    let outcome = run_training(&cfg, &ds, &plan, |_, _| {}).unwrap();

    for (name, hist) in &outcome.histograms {
        let used = hist.iter().filter(|(_, c, _)| *c > 0).count();
        println!("codebook {name}: {used}/{} embeddings in use", hist.len());
        print!("{}", histogram_csv(hist));
        println!();
    }
}
