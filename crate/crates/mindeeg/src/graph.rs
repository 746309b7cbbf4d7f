//! Per-sample graph construction: the adaptive graph encoder, symmetric
//! adjacency normalization, and squeeze-and-excitation fusion of the
//! per-band graphs.

use rand::Rng;

use crate::tensor::Tensor;

/// Learnable encoder mapping an `n x d` feature matrix to `d` band-wise
/// adjacency matrices via `ELU((M X + B) N P)` followed by a positivity
/// shift.
pub struct AdaptiveGraphEncoder {
    /// `n x n` left-multiplication matrix encoding spatial relationships.
    pub m: Tensor,
    /// `n x d` bias.
    pub b: Tensor,
    /// `d x d` band-fusion matrix.
    pub n_mat: Tensor,
    /// `d x (n*d)` projection.
    pub p: Tensor,
    pub nodes: usize,
    pub bands: usize,
    /// Added after the ELU so adjacency entries are strictly positive.
    pub shift: f64,
}

impl AdaptiveGraphEncoder {
    pub fn new(rng: &mut impl Rng, nodes: usize, bands: usize, shift: f64) -> Self {
        AdaptiveGraphEncoder {
            m: Tensor::param_fan_in(rng, nodes, nodes, nodes),
            b: Tensor::param_fan_in(rng, nodes, bands, nodes),
            n_mat: Tensor::param_fan_in(rng, bands, bands, bands),
            p: Tensor::param_fan_in(rng, bands, nodes * bands, bands),
            nodes,
            bands,
            shift,
        }
    }

    /// Encode a feature matrix into one adjacency per frequency band.
    ///
    /// The `n x (n*d)` pre-activation is split column-wise into `d` blocks of
    /// `n x n`; block `i` is the graph for band `i`.
    pub fn encode(&self, x: &Tensor) -> Vec<Tensor> {
        assert_eq!(
            x.shape(),
            (self.nodes, self.bands),
            "age_encode: input must be {}x{}, got {:?}",
            self.nodes,
            self.bands,
            x.shape()
        );
        let pre = self
            .m
            .matmul(x)
            .add(&self.b)
            .matmul(&self.n_mat)
            .matmul(&self.p)
            .elu()
            .add_scalar(self.shift);
        let n = self.nodes;
        (0..self.bands)
            .map(|i| pre.slice_cols(i * n, (i + 1) * n))
            .collect()
    }

    pub fn params(&self) -> Vec<(&'static str, Tensor)> {
        vec![
            ("m", self.m.clone()),
            ("b", self.b.clone()),
            ("n", self.n_mat.clone()),
            ("p", self.p.clone()),
        ]
    }
}

/// Symmetric normalization `D^(-1/2) A D^(-1/2)` with `D_ii = sum_j A_ij`.
/// Zero-degree rows/columns map to zero rather than dividing by zero.
pub fn normalize_adjacency(a: &Tensor) -> Tensor {
    let (r, c) = a.shape();
    assert_eq!(r, c, "normalize_adjacency: matrix must be square, got {r}x{c}");
    let dinv = a.row_sums().rsqrt_or_zero();
    a.scale_rows(&dinv).scale_cols(&dinv.transpose())
}

/// Squeeze-and-excitation over the band axis: per-band adjacency means are
/// squeezed through a bottleneck MLP, and the resulting sigmoid weights blend
/// the band graphs into one matrix.
pub struct SqueezeExcitation {
    /// `hidden x d` reduction.
    pub w1: Tensor,
    /// `d x hidden` expansion.
    pub w2: Tensor,
    pub bands: usize,
}

impl SqueezeExcitation {
    pub fn new(rng: &mut impl Rng, bands: usize, reduction: usize) -> Self {
        let hidden = (bands / reduction).max(1);
        // Band-graph means are always positive, so a positive w1 keeps the
        // bottleneck relu live at init instead of risking a dead unit.
        let bound = 1.0 / (bands as f64).sqrt();
        let w1_data: Vec<f64> = (0..hidden * bands).map(|_| rng.gen_range(0.0..bound)).collect();
        SqueezeExcitation {
            w1: Tensor::param(hidden, bands, w1_data),
            w2: Tensor::param_fan_in(rng, bands, hidden, hidden),
            bands,
        }
    }

    /// Per-band weights in (0, 1), a `d x 1` tensor.
    pub fn excitation(&self, graphs: &[Tensor]) -> Tensor {
        assert_eq!(graphs.len(), self.bands, "se_fuse: expected {} band graphs", self.bands);
        let means: Vec<Tensor> = graphs.iter().map(|g| g.mean()).collect();
        let refs: Vec<&Tensor> = means.iter().collect();
        let squeeze = Tensor::concat_rows(&refs); // d x 1
        self.w2.matmul(&self.w1.matmul(&squeeze).relu()).sigmoid()
    }

    /// Weighted sum of the band graphs, re-normalized symmetrically.
    pub fn fuse(&self, graphs: &[Tensor]) -> Tensor {
        let w = self.excitation(graphs);
        let mut acc: Option<Tensor> = None;
        for (i, g) in graphs.iter().enumerate() {
            let wi = w.gather_rows(&[i]); // 1 x 1
            let term = g.scale_by(&wi);
            acc = Some(match acc {
                Some(a) => a.add(&term),
                None => term,
            });
        }
        normalize_adjacency(&acc.expect("se_fuse: at least one band graph required"))
    }

    pub fn params(&self) -> Vec<(&'static str, Tensor)> {
        vec![("se_w1", self.w1.clone()), ("se_w2", self.w2.clone())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn normalize_identity() {
        let out = normalize_adjacency(&Tensor::identity(3));
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(close(out.get(i, j), want, 1e-12));
            }
        }
    }

    #[test]
    fn normalize_all_ones() {
        let out = normalize_adjacency(&Tensor::new(2, 2, vec![1.0; 4]));
        for v in out.data() {
            assert!(close(v, 0.5, 1e-12));
        }
    }

    #[test]
    fn normalize_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 5;
        let data: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.0..2.0)).collect();
        let a = Tensor::new(n, n, data.clone());
        let out = normalize_adjacency(&a);
        // brute-force D^(-1/2) A D^(-1/2)
        let mut deg = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                deg[i] += data[i * n + j];
            }
        }
        for i in 0..n {
            for j in 0..n {
                let want = data[i * n + j] / (deg[i].sqrt() * deg[j].sqrt());
                assert!(close(out.get(i, j), want, 1e-12));
            }
        }
    }

    #[test]
    fn normalize_zero_row_stays_zero() {
        let a = Tensor::new(2, 2, vec![0.0, 0.0, 0.0, 1.0]);
        let out = normalize_adjacency(&a);
        assert_eq!(out.get(0, 0), 0.0);
        assert_eq!(out.get(0, 1), 0.0);
        assert!(close(out.get(1, 1), 1.0, 1e-12));
    }

    #[test]
    fn normalize_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data: Vec<f64> = (0..16).map(|_| rng.gen_range(0.01..1.0)).collect();
        let a = Tensor::new(4, 4, data.clone());
        let scaled = Tensor::new(4, 4, data.iter().map(|v| v * 3.7).collect());
        let na = normalize_adjacency(&a);
        let ns = normalize_adjacency(&scaled);
        for (x, y) in na.data().iter().zip(ns.data()) {
            assert!(close(*x, y, 1e-12));
        }
    }

    #[test]
    fn age_zero_params_give_zero_adjacency() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut enc = AdaptiveGraphEncoder::new(&mut rng, 3, 2, 0.0);
        enc.m.set_data(&vec![0.0; 9]);
        enc.b.set_data(&vec![0.0; 6]);
        let graphs = enc.encode(&Tensor::new(3, 2, vec![1.0; 6]));
        assert_eq!(graphs.len(), 2);
        for g in &graphs {
            assert_eq!(g.shape(), (3, 3));
            assert!(g.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn age_matches_straight_line_oracle() {
        // Independent step-by-step evaluation with plain loops.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, d) = (3, 2);
        let enc = AdaptiveGraphEncoder::new(&mut rng, n, d, 1.0);
        let x: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let graphs = enc.encode(&Tensor::new(n, d, x.clone()));

        let (m, b, nm, p) = (enc.m.data(), enc.b.data(), enc.n_mat.data(), enc.p.data());
        let mut mx = vec![0.0; n * d];
        for i in 0..n {
            for j in 0..d {
                for k in 0..n {
                    mx[i * d + j] += m[i * n + k] * x[k * d + j];
                }
                mx[i * d + j] += b[i * d + j];
            }
        }
        let mut mxn = vec![0.0; n * d];
        for i in 0..n {
            for j in 0..d {
                for k in 0..d {
                    mxn[i * d + j] += mx[i * d + k] * nm[k * d + j];
                }
            }
        }
        let w = n * d;
        let mut full = vec![0.0; n * w];
        for i in 0..n {
            for j in 0..w {
                for k in 0..d {
                    full[i * w + j] += mxn[i * d + k] * p[k * w + j];
                }
            }
        }
        for v in full.iter_mut() {
            *v = if *v > 0.0 { *v } else { v.exp() - 1.0 } + 1.0;
        }
        for (band, g) in graphs.iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    let want = full[i * w + band * n + j];
                    assert!(close(g.get(i, j), want, 1e-12));
                }
            }
        }
    }

    #[test]
    fn age_paper_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let enc = AdaptiveGraphEncoder::new(&mut rng, 62, 5, 1.0);
        let x = Tensor::new(62, 5, vec![0.1; 310]);
        let graphs = enc.encode(&x);
        assert_eq!(graphs.len(), 5);
        for g in graphs {
            assert_eq!(g.shape(), (62, 62));
        }
    }

    #[test]
    fn se_single_band_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let se = SqueezeExcitation::new(&mut rng, 1, 2);
        let a = Tensor::new(3, 3, vec![1.0, 0.5, 0.2, 0.5, 1.0, 0.3, 0.2, 0.3, 1.0]);
        let out = se.fuse(std::slice::from_ref(&a));
        for i in 0..3 {
            for j in 0..3 {
                assert!(close(out.get(i, j), out.get(j, i), 1e-12));
            }
        }
    }

    #[test]
    fn se_identical_bands_reduce_to_normalization() {
        // positive scaling cancels under symmetric normalization
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let se = SqueezeExcitation::new(&mut rng, 5, 2);
        let data: Vec<f64> = (0..9).map(|_| rng.gen_range(0.1..1.0)).collect();
        let a = Tensor::new(3, 3, data);
        let bands: Vec<Tensor> = (0..5).map(|_| a.clone()).collect();
        let fused = se.fuse(&bands);
        let plain = normalize_adjacency(&a);
        for (x, y) in fused.data().iter().zip(plain.data()) {
            assert!(close(*x, y, 1e-12));
        }
    }

    #[test]
    fn se_frozen_weights_select_band() {
        // Force the excitation toward [1,0,...,0] by pinning w2 rows.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let se = SqueezeExcitation::new(&mut rng, 5, 2);
        let hidden = se.w1.rows();
        // w1 = 0 makes relu output 0, so excitation = sigmoid(0) = 0.5 for all
        // bands; instead pin w1 rows to large values and shape w2 so band 0
        // gets +inf-ish logit and the others large negative.
        se.w1.set_data(&vec![1000.0; hidden * 5]);
        let mut w2 = vec![-1.0; 5 * hidden];
        for j in 0..hidden {
            w2[j] = 1.0;
        }
        se.w2.set_data(&w2);
        let bands: Vec<Tensor> = (0..5)
            .map(|i| {
                let mut d = vec![0.1; 9];
                d[0] = 0.1 + i as f64;
                Tensor::new(3, 3, d)
            })
            .collect();
        let w = se.excitation(&bands);
        assert!(w.get(0, 0) > 0.999999);
        for i in 1..5 {
            assert!(w.get(i, 0) < 1e-6);
        }
        // With weights ~[1,0,0,0,0] the fused output is normalize(A_1).
        let fused = se.fuse(&bands);
        let want = normalize_adjacency(&bands[0]);
        for (x, y) in fused.data().iter().zip(want.data()) {
            assert!(close(*x, y, 1e-5));
        }
    }

    #[test]
    fn se_excitation_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let se = SqueezeExcitation::new(&mut rng, 5, 2);
        let bands: Vec<Tensor> = (0..5)
            .map(|_| Tensor::new(4, 4, (0..16).map(|_| rng.gen_range(0.0..2.0)).collect()))
            .collect();
        let w = se.excitation(&bands);
        for v in w.data() {
            assert!(v > 0.0 && v < 1.0);
        }
    }

    #[test]
    fn normalize_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 4;
        let x0: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.2..2.0)).collect();
        let mut f = |x: &[f64]| {
            let a = Tensor::new(n, n, x.to_vec());
            normalize_adjacency(&a).sumsq().item()
        };
        let numeric = gradcheck::finite_diff(&mut f, &x0, 1e-5);
        let a = Tensor::param(n, n, x0.clone());
        normalize_adjacency(&a).sumsq().backward();
        assert!(gradcheck::max_rel_err(&a.grad(), &numeric) < 1e-6);
    }
}
