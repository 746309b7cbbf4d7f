//! One granularity stream: adaptive graph encoder, per-band codebook
//! quantization, squeeze-and-excitation fusion, and a MAGCN stack.
//!
//! The global state encoder is one of these at `n = 62`; each intra-regional
//! encoder is one at its region's size; the inter-regional encoder wraps one
//! behind a band projection.

use rand::Rng;

use crate::codebook::{GraphCodebook, SimilarityMetric};
use crate::graph::{AdaptiveGraphEncoder, SqueezeExcitation};
use crate::magcn::MagcnStack;
use crate::tensor::Tensor;
use crate::Result;

pub struct EncoderSettings {
    pub nodes: usize,
    pub bands: usize,
    /// Feature width fed to the MAGCN stack; equals `bands` except for the
    /// inter-regional encoder, whose graph encoder runs on projected bands
    /// while the MAGCN consumes the full fused features.
    pub magcn_in: usize,
    pub out_dim: usize,
    pub codebook_entries: usize,
    pub embed_dim: usize,
    pub commitment_weight: f64,
    pub metric: SimilarityMetric,
    pub shift: f64,
    pub se_reduction: usize,
    pub cbam_reduction: usize,
    pub depth: usize,
    pub use_residual: bool,
    pub straight_through: bool,
}

/// AGE -> codebook -> SE fuse -> MAGCN.
pub struct GranularEncoder {
    pub age: AdaptiveGraphEncoder,
    pub codebook: GraphCodebook,
    pub se: SqueezeExcitation,
    pub magcn: MagcnStack,
    pub straight_through: bool,
}

pub struct EncoderOutput {
    /// `n x out_dim` node features.
    pub features: Tensor,
    /// Sum of the per-band codebook losses.
    pub vq_loss: Tensor,
    /// Fused, normalized adjacency used by the MAGCN.
    pub adjacency: Tensor,
    /// Codebook entry chosen for each band graph.
    pub indices: Vec<usize>,
}

impl GranularEncoder {
    pub fn new(rng: &mut impl Rng, s: &EncoderSettings) -> Result<Self> {
        let mut magcn = MagcnStack::new(rng, s.nodes, s.magcn_in, s.out_dim, s.depth, s.cbam_reduction);
        magcn.use_residual = s.use_residual;
        Ok(GranularEncoder {
            age: AdaptiveGraphEncoder::new(rng, s.nodes, s.bands, s.shift),
            codebook: GraphCodebook::new(
                rng,
                s.codebook_entries,
                s.embed_dim,
                s.nodes,
                s.commitment_weight,
                s.metric,
                s.shift,
            )?,
            se: SqueezeExcitation::new(rng, s.bands, s.se_reduction),
            magcn,
            straight_through: s.straight_through,
        })
    }

    pub fn forward(&self, x: &Tensor) -> EncoderOutput {
        let band_graphs = self.age.encode(x);
        let mut quantized = Vec::with_capacity(band_graphs.len());
        let mut indices = Vec::with_capacity(band_graphs.len());
        let mut vq_loss: Option<Tensor> = None;
        for g in &band_graphs {
            let r = self.codebook.quantize_with(g, self.straight_through);
            indices.push(r.index);
            quantized.push(r.quantized_adjacency);
            vq_loss = Some(match vq_loss {
                Some(acc) => acc.add(&r.vq_loss),
                None => r.vq_loss,
            });
        }
        let adjacency = self.se.fuse(&quantized);
        let features = self.magcn.forward(x, &adjacency);
        EncoderOutput {
            features,
            vq_loss: vq_loss.expect("at least one band"),
            adjacency,
            indices,
        }
    }

    pub fn params(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for (k, t) in self.age.params() {
            out.push((format!("age.{k}"), t));
        }
        for (k, t) in self.codebook.params() {
            out.push((format!("codebook.{k}"), t));
        }
        for (k, t) in self.se.params() {
            out.push((k.to_string(), t));
        }
        for (k, t) in self.magcn.params() {
            out.push((format!("magcn.{k}"), t));
        }
        out
    }

    /// Copy every parameter value from another encoder of identical layout.
    pub fn copy_params_from(&self, other: &GranularEncoder) {
        let mine = self.params();
        let theirs = other.params();
        assert_eq!(mine.len(), theirs.len(), "encoder layouts differ");
        for ((ka, ta), (kb, tb)) in mine.iter().zip(theirs.iter()) {
            assert_eq!(ka, kb, "encoder layouts differ: {ka} vs {kb}");
            ta.set_data(&tb.data());
        }
    }
}
