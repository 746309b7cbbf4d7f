//! Multi-layer attention-based graph convolution: GCN layers over a
//! normalized adjacency, CBAM-style node/feature attention refinement, and
//! residual connections.

use rand::Rng;

use crate::tensor::Tensor;

/// One graph convolution `relu(L H W)`.
pub struct GcnLayer {
    pub weight: Tensor,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl GcnLayer {
    pub fn new(rng: &mut impl Rng, in_dim: usize, out_dim: usize) -> Self {
        GcnLayer {
            weight: Tensor::param_fan_in(rng, in_dim, out_dim, in_dim),
            in_dim,
            out_dim,
        }
    }

    /// Pre-activation propagation `L H W`.
    pub fn propagate(&self, h: &Tensor, laplacian: &Tensor) -> Tensor {
        let (n, f) = h.shape();
        assert_eq!(
            laplacian.shape(),
            (n, n),
            "gcn_forward: adjacency must be {n}x{n}, got {:?}",
            laplacian.shape()
        );
        assert_eq!(f, self.in_dim, "gcn_forward: feature width {f} != layer input {}", self.in_dim);
        laplacian.matmul(h).matmul(&self.weight)
    }

    pub fn forward(&self, h: &Tensor, laplacian: &Tensor) -> Tensor {
        self.propagate(h, laplacian).relu()
    }
}

/// Node-then-feature attention gating. Node attention pools max+mean across
/// features per node through a shared bottleneck; feature attention pools
/// max+mean across nodes per feature through a learned 1x2 projection.
pub struct CbamBlock {
    pub node_w1: Tensor,
    pub node_w2: Tensor,
    pub feature_proj: Tensor,
    pub nodes: usize,
}

impl CbamBlock {
    pub fn new(rng: &mut impl Rng, nodes: usize, reduction: usize) -> Self {
        let hidden = (nodes / reduction).max(1);
        // Pooled stats of relu features are nonnegative, so a positive first
        // layer keeps the bottleneck relu live at init.
        let bound = 1.0 / (nodes as f64).sqrt();
        let w1_data: Vec<f64> = (0..hidden * nodes).map(|_| rng.gen_range(0.0..bound)).collect();
        CbamBlock {
            node_w1: Tensor::param(hidden, nodes, w1_data),
            node_w2: Tensor::param_fan_in(rng, nodes, hidden, hidden),
            feature_proj: Tensor::param_fan_in(rng, 1, 2, 2),
            nodes,
        }
    }

    fn node_attention(&self, h: &Tensor) -> Tensor {
        let mean = h.row_means(); // n x 1
        let max = h.row_max(); // n x 1
        let shared = |s: &Tensor| self.node_w2.matmul(&self.node_w1.matmul(s).relu());
        shared(&mean).add(&shared(&max)).sigmoid()
    }

    fn feature_attention(&self, h: &Tensor) -> Tensor {
        let mean = h.col_means(); // 1 x f
        let max = h.col_max(); // 1 x f
        let stacked = Tensor::concat_rows(&[&mean, &max]); // 2 x f
        self.feature_proj.matmul(&stacked).sigmoid() // 1 x f
    }

    pub fn forward(&self, h: &Tensor) -> Tensor {
        assert_eq!(h.rows(), self.nodes, "cbam_forward: expected {} nodes", self.nodes);
        let gated = h.scale_rows(&self.node_attention(h));
        gated.scale_cols(&self.feature_attention(&gated))
    }
}

/// GCN + CBAM + residual. The residual adapter is the identity when the
/// dimensions match and a learned linear map otherwise.
pub struct MagcnBlock {
    pub gcn: GcnLayer,
    pub cbam: CbamBlock,
    pub adapter: Option<Tensor>,
}

impl MagcnBlock {
    pub fn new(rng: &mut impl Rng, nodes: usize, in_dim: usize, out_dim: usize, reduction: usize) -> Self {
        let adapter = if in_dim == out_dim {
            None
        } else {
            Some(Tensor::param_fan_in(rng, in_dim, out_dim, in_dim))
        };
        MagcnBlock {
            gcn: GcnLayer::new(rng, in_dim, out_dim),
            cbam: CbamBlock::new(rng, nodes, reduction),
            adapter,
        }
    }

    pub fn forward(&self, h: &Tensor, laplacian: &Tensor, use_residual: bool) -> Tensor {
        let out = self.cbam.forward(&self.gcn.forward(h, laplacian));
        if !use_residual {
            return out;
        }
        let res = match &self.adapter {
            Some(w) => h.matmul(w),
            None => h.clone(),
        };
        out.add(&res)
    }
}

/// A stack of MAGCN blocks sharing one Laplacian per forward pass.
pub struct MagcnStack {
    pub blocks: Vec<MagcnBlock>,
    pub use_residual: bool,
}

impl MagcnStack {
    /// `depth` blocks; the first maps `in_dim -> out_dim`, the rest keep
    /// `out_dim`.
    pub fn new(
        rng: &mut impl Rng,
        nodes: usize,
        in_dim: usize,
        out_dim: usize,
        depth: usize,
        reduction: usize,
    ) -> Self {
        assert!(depth >= 1, "magcn stack needs at least one block");
        let mut blocks = Vec::with_capacity(depth);
        blocks.push(MagcnBlock::new(rng, nodes, in_dim, out_dim, reduction));
        for _ in 1..depth {
            blocks.push(MagcnBlock::new(rng, nodes, out_dim, out_dim, reduction));
        }
        MagcnStack {
            blocks,
            use_residual: true,
        }
    }

    /// The normalized-with-self-loops Laplacian used by every layer:
    /// `normalize(A + I)`.
    pub fn laplacian(adjacency: &Tensor) -> Tensor {
        let n = adjacency.rows();
        crate::graph::normalize_adjacency(&adjacency.add(&Tensor::identity(n)))
    }

    pub fn forward(&self, x: &Tensor, adjacency: &Tensor) -> Tensor {
        let lap = Self::laplacian(adjacency);
        let mut h = x.clone();
        for block in &self.blocks {
            h = block.forward(&h, &lap, self.use_residual);
        }
        h
    }

    pub fn params(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("layer{i}.gcn_w"), b.gcn.weight.clone()));
            out.push((format!("layer{i}.cbam_node_w1"), b.cbam.node_w1.clone()));
            out.push((format!("layer{i}.cbam_node_w2"), b.cbam.node_w2.clone()));
            out.push((format!("layer{i}.cbam_feature"), b.cbam.feature_proj.clone()));
            if let Some(a) = &b.adapter {
                out.push((format!("layer{i}.adapter"), a.clone()));
            }
        }
        out
    }
}
