//! Quantize adjacency graphs through a discrete codebook and inspect the
//! straight-through gradient and the usage histogram.

use mindeeg::codebook::{histogram_csv, GraphCodebook, SimilarityMetric};
use mindeeg::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let nodes = 4;
    let cb = GraphCodebook::new(&mut rng, 8, 6, nodes, 0.25, SimilarityMetric::L2, 1.0).unwrap();

    for _ in 0..50 {
        let a = Tensor::new(
            nodes,
            nodes,
            (0..nodes * nodes).map(|_| rng.gen_range(0.0..2.0)).collect(),
        );
        cb.quantize(&a);
    }
    println!("usage after 50 quantizations:");
    print!("{}", histogram_csv(&cb.usage_histogram()));

    // the straight-through estimator keeps the encoder trainable
    let a = Tensor::param(
        nodes,
        nodes,
        (0..nodes * nodes).map(|_| rng.gen_range(0.0..2.0)).collect(),
    );
    let r = cb.quantize(&a);
    println!("\npicked embedding {} with commitment loss {:.6}", r.index, r.vq_loss.item());
    r.quantized_adjacency.sumsq().backward();
    let live = a.grad().iter().filter(|&&g| g != 0.0).count();
    println!("gradient reached {live}/{} input entries through the quantization", a.numel());
}
