//! Regional processing: channel partitioning, per-region intra-regional
//! encoders, attention fusion of each region to a single node, and the
//! inter-regional encoder over the fused nodes.

use rand::Rng;

use crate::encoder::{EncoderSettings, GranularEncoder};
use crate::tensor::Tensor;
use crate::{Error, ModelConfig, Result};

const DEFAULT_PARTITION: &str = include_str!("data/regions62.txt");

/// Assignment of the `n` channels to named regions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionPartition {
    pub regions: Vec<(String, Vec<usize>)>,
    pub channels: usize,
}

impl RegionPartition {
    /// The shipped 7-region grouping of the 62-channel montage.
    pub fn default_62() -> RegionPartition {
        RegionPartition::parse(DEFAULT_PARTITION, 62, false)
            .expect("shipped partition table is valid")
    }

    /// Parse `region_name: idx,idx,...` lines (0-based indices).
    pub fn parse(text: &str, channels: usize, allow_overlap: bool) -> Result<RegionPartition> {
        let mut regions = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, rest) = line.split_once(':').ok_or_else(|| {
                Error::Format(format!("partition line {}: expected `name: indices`", lineno + 1))
            })?;
            let mut idx = Vec::new();
            for tok in rest.split(',') {
                let tok = tok.trim();
                if tok.is_empty() {
                    continue;
                }
                let i: usize = tok.parse().map_err(|_| {
                    Error::Format(format!("partition line {}: bad index `{tok}`", lineno + 1))
                })?;
                idx.push(i);
            }
            regions.push((name.trim().to_string(), idx));
        }
        let p = RegionPartition { regions, channels };
        p.validate(allow_overlap)?;
        Ok(p)
    }

    pub fn load(path: &std::path::Path, channels: usize, allow_overlap: bool) -> Result<RegionPartition> {
        RegionPartition::parse(&std::fs::read_to_string(path)?, channels, allow_overlap)
    }

    fn validate(&self, allow_overlap: bool) -> Result<()> {
        if self.regions.is_empty() {
            return Err(Error::Format("partition has no regions".into()));
        }
        let mut seen = vec![0usize; self.channels];
        for (name, idx) in &self.regions {
            if idx.is_empty() {
                return Err(Error::Format(format!("region `{name}` is empty")));
            }
            let mut local = std::collections::HashSet::new();
            for &i in idx {
                if i >= self.channels {
                    return Err(Error::Format(format!(
                        "region `{name}`: channel {i} out of range for {} channels",
                        self.channels
                    )));
                }
                if !local.insert(i) {
                    return Err(Error::Format(format!(
                        "region `{name}`: channel {i} listed twice"
                    )));
                }
                seen[i] += 1;
            }
        }
        for (i, &count) in seen.iter().enumerate() {
            if count == 0 {
                return Err(Error::Format(format!("channel {i} belongs to no region")));
            }
            if count > 1 && !allow_overlap {
                return Err(Error::Format(format!(
                    "channel {i} belongs to {count} regions (set allow_overlap to permit this)"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }
}

/// Row-gather the per-region submatrices; gradients scatter back additively.
pub fn partition_features(x: &Tensor, p: &RegionPartition) -> Vec<Tensor> {
    assert_eq!(
        x.rows(),
        p.channels,
        "partition: feature matrix has {} rows, partition expects {}",
        x.rows(),
        p.channels
    );
    p.regions.iter().map(|(_, idx)| x.gather_rows(idx)).collect()
}

/// Collapse one region to a single node: `a = (XW)(XW)^T`, score each node by
/// its row sum of `a`, and take the softmax-weighted combination of the rows.
pub fn region_attention_fuse(x: &Tensor, w: &Tensor) -> Tensor {
    let (_, f) = x.shape();
    assert_eq!(w.shape(), (f, f), "region fuse: W must be {f}x{f}, got {:?}", w.shape());
    let xw = x.matmul(w);
    let scores = xw.matmul(&xw.transpose()).row_sums(); // n_i x 1
    let weights = scores.transpose().softmax_rows(); // 1 x n_i
    weights.matmul(x) // 1 x f
}

/// Per-region intra-regional encoders plus attention fusion to `Q x out`.
pub struct IntraRegionalModule {
    pub partition: RegionPartition,
    pub encoders: Vec<GranularEncoder>,
    /// Per-region attention weight matrices (all clones of one tensor when
    /// the weight is shared).
    pub fuse_weights: Vec<Tensor>,
}

pub struct IntraOutput {
    /// `Q x out` fused regional features.
    pub fused: Tensor,
    /// Sum of per-region codebook losses.
    pub vq_loss: Tensor,
    /// Per-region features before fusion.
    pub region_features: Vec<Tensor>,
}

impl IntraRegionalModule {
    pub fn new(rng: &mut impl Rng, cfg: &ModelConfig, partition: RegionPartition) -> Result<Self> {
        let mut encoders = Vec::with_capacity(partition.len());
        for (_, idx) in &partition.regions {
            encoders.push(GranularEncoder::new(
                rng,
                &EncoderSettings {
                    nodes: idx.len(),
                    bands: cfg.d,
                    magcn_in: cfg.d,
                    out_dim: cfg.intra_out,
                    codebook_entries: cfg.k2,
                    embed_dim: cfg.embed_dim,
                    commitment_weight: cfg.beta_vq,
                    metric: crate::model::metric_of(cfg),
                    shift: cfg.adjacency_shift,
                    se_reduction: cfg.se_reduction,
                    cbam_reduction: cfg.cbam_reduction,
                    depth: cfg.layers,
                    use_residual: cfg.use_residual,
                    straight_through: cfg.straight_through,
                },
            )?);
        }
        let fuse_weights = if cfg.shared_fuse_weight {
            let shared = Tensor::param_fan_in(rng, cfg.intra_out, cfg.intra_out, cfg.intra_out);
            vec![shared; partition.len()]
        } else {
            (0..partition.len())
                .map(|_| Tensor::param_fan_in(rng, cfg.intra_out, cfg.intra_out, cfg.intra_out))
                .collect()
        };
        Ok(IntraRegionalModule {
            partition,
            encoders,
            fuse_weights,
        })
    }

    pub fn forward(&self, x: &Tensor) -> IntraOutput {
        let slices = partition_features(x, &self.partition);
        let mut fused_rows = Vec::with_capacity(slices.len());
        let mut region_features = Vec::with_capacity(slices.len());
        let mut vq: Option<Tensor> = None;
        for ((slice, enc), w) in slices.iter().zip(&self.encoders).zip(&self.fuse_weights) {
            let out = enc.forward(slice);
            fused_rows.push(region_attention_fuse(&out.features, w));
            region_features.push(out.features);
            vq = Some(match vq {
                Some(acc) => acc.add(&out.vq_loss),
                None => out.vq_loss,
            });
        }
        let refs: Vec<&Tensor> = fused_rows.iter().collect();
        IntraOutput {
            fused: Tensor::concat_rows(&refs),
            vq_loss: vq.expect("at least one region"),
            region_features,
        }
    }

    pub fn params(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for (i, enc) in self.encoders.iter().enumerate() {
            for (k, t) in enc.params() {
                out.push((format!("region{i}.{k}"), t));
            }
        }
        for (i, w) in self.fuse_weights.iter().enumerate() {
            out.push((format!("region{i}.fuse_w"), w.clone()));
        }
        out
    }
}

/// The inter-regional encoder: a learned band projection brings the `Q x f`
/// fused features down to graph-encoder width, then a standard granular
/// encoder runs over the `Q` region nodes.
pub struct InterRegionalModule {
    /// `f x inter_bands` projection feeding the adaptive graph encoder.
    pub band_proj: Tensor,
    pub encoder: GranularEncoder,
}

impl InterRegionalModule {
    pub fn new(rng: &mut impl Rng, cfg: &ModelConfig) -> Result<Self> {
        Ok(InterRegionalModule {
            band_proj: Tensor::param_fan_in(rng, cfg.intra_out, cfg.inter_bands, cfg.intra_out),
            encoder: GranularEncoder::new(
                rng,
                &EncoderSettings {
                    nodes: cfg.q,
                    bands: cfg.inter_bands,
                    magcn_in: cfg.intra_out,
                    out_dim: cfg.inter_out,
                    codebook_entries: cfg.k3,
                    embed_dim: cfg.embed_dim,
                    commitment_weight: cfg.beta_vq,
                    metric: crate::model::metric_of(cfg),
                    shift: cfg.adjacency_shift,
                    se_reduction: cfg.se_reduction,
                    cbam_reduction: cfg.cbam_reduction,
                    depth: cfg.layers,
                    use_residual: cfg.use_residual,
                    straight_through: cfg.straight_through,
                },
            )?,
        })
    }

    /// `Q x f -> (Q x inter_out, vq_loss)`.
    pub fn forward(&self, fused: &Tensor) -> (Tensor, Tensor) {
        let banded = fused.matmul(&self.band_proj); // Q x inter_bands
        let graphs = self.encoder.age.encode(&banded);
        let mut quantized = Vec::with_capacity(graphs.len());
        let mut vq: Option<Tensor> = None;
        for g in &graphs {
            let r = self
                .encoder
                .codebook
                .quantize_with(g, self.encoder.straight_through);
            quantized.push(r.quantized_adjacency);
            vq = Some(match vq {
                Some(acc) => acc.add(&r.vq_loss),
                None => r.vq_loss,
            });
        }
        let adjacency = self.encoder.se.fuse(&quantized);
        // MAGCN consumes the full-width fused features, not the band projection.
        let features = self.encoder.magcn.forward(fused, &adjacency);
        (features, vq.expect("at least one band"))
    }

    pub fn params(&self) -> Vec<(String, Tensor)> {
        let mut out = vec![("band_proj".to_string(), self.band_proj.clone())];
        for (k, t) in self.encoder.params() {
            out.push((k, t));
        }
        out
    }
}
