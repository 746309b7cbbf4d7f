//! Encode one feature matrix into per-band adjacency graphs, fuse them with
//! squeeze-and-excitation weights, and normalize the result.

use mindeeg::graph::{normalize_adjacency, AdaptiveGraphEncoder, SqueezeExcitation};
use mindeeg::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let (nodes, bands) = (6, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let enc = AdaptiveGraphEncoder::new(&mut rng, nodes, bands, 1.0);
    let se = SqueezeExcitation::new(&mut rng, bands, 2);

    let x = Tensor::new(
        nodes,
        bands,
        (0..nodes * bands).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    );
    let graphs = enc.encode(&x);
    for (b, g) in graphs.iter().enumerate() {
        let d = g.data();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        println!("band {b}: {}x{} adjacency, mean weight {:.4}", g.rows(), g.cols(), mean);
    }

    let weights = se.excitation(&graphs);
    println!("band weights: {:?}", weights.data().iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>());

    let fused = se.fuse(&graphs);
    println!("fused + normalized adjacency:");
    for i in 0..nodes {
        let row: Vec<String> = (0..nodes).map(|j| format!("{:.3}", fused.get(i, j))).collect();
        println!("  {}", row.join(" "));
    }
    // symmetric normalization leaves row sums data-dependent but bounded
    let plain = normalize_adjacency(&graphs[0]);
    println!("band 0 normalized row sums: {:?}", plain.row_sums().data().iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>());
}
