//! Save a trained model, reload it, and show that the restored model makes
//! identical predictions. Same seed and config always produce byte-identical
//! checkpoints.

use mindeeg::config::ModelConfig;
use mindeeg::data::{synth_generate, SynthSpec};
use mindeeg::splits::{split_subject_dependent, DependentProtocol};
use mindeeg::train::{load_checkpoint, predict, run_training, save_checkpoint};
use mindeeg::Tensor;

fn main() {
    let mut spec = SynthSpec::new(13, 1, 4, 6);
    spec.n = 16;
    spec.d = 3;
    let ds = synth_generate(&spec);
    let plan = split_subject_dependent(&ds, DependentProtocol::LastTwoPerClass)
        .unwrap()
        .remove(0);

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
        epochs: 8,
        seed: 13,
        ..ModelConfig::default()
    };

    let outcome = run_training(&cfg, &ds, &plan, |_, _| {}).unwrap();
    let path = std::env::temp_dir().join("mindeeg_demo.meeg");
    save_checkpoint(&path, &outcome.model, &outcome.normalizer).unwrap();
    let bytes = std::fs::metadata(&path).unwrap().len();
    println!("saved {} ({bytes} bytes)", path.display());

    let (restored, norm) = load_checkpoint(&path).unwrap();
    let mut mismatches = 0;
    for &i in &plan.test {
        let x = Tensor::new(ds.n, ds.d, norm.apply(&ds.samples[i].features));
        let y = Tensor::new(ds.n, ds.d, outcome.normalizer.apply(&ds.samples[i].features));
        if predict(&restored, &x) != predict(&outcome.model, &y) {
            mismatches += 1;
        }
    }
    println!(
        "{} test predictions compared, {mismatches} mismatches",
        plan.test.len()
    );
    std::fs::remove_file(&path).ok();
}
