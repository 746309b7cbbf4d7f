//! Dense 2-D tensors with reverse-mode automatic differentiation.
//!
//! Every operation records its inputs and a backward closure on the value it
//! produces, so the computation graph is the tape: calling [`Tensor::backward`]
//! on a scalar replays the recorded adjoints in reverse topological order.
//! Gradients accumulate additively, so a value consumed by two branches
//! receives the sum of both contributions. All storage is row-major `f64`.

use std::cell::RefCell;
use std::collections::HashSet;
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

type BackwardFn = Box<dyn Fn(&[f64])>;

pub(crate) struct TensorData {
    shape: [usize; 2],
    data: Vec<f64>,
    grad: Vec<f64>,
    requires_grad: bool,
    op: &'static str,
    parents: Vec<Tensor>,
    backward: Option<BackwardFn>,
    id: u64,
}

/// Shared handle to a tensor node in the computation graph.
#[derive(Clone)]
pub struct Tensor(Rc<RefCell<TensorData>>);

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0.borrow();
        write!(f, "Tensor[{}x{}, op={}]", b.shape[0], b.shape[1], b.op)
    }
}

fn accumulate(t: &Tensor, g: &[f64]) {
    let mut b = t.0.borrow_mut();
    debug_assert_eq!(b.grad.len(), g.len());
    for (a, &x) in b.grad.iter_mut().zip(g) {
        *a += x;
    }
}

impl Tensor {
    fn make(
        rows: usize,
        cols: usize,
        data: Vec<f64>,
        op: &'static str,
        parents: Vec<Tensor>,
        backward: Option<BackwardFn>,
    ) -> Tensor {
        assert_eq!(
            rows * cols,
            data.len(),
            "tensor {}x{} needs {} values, got {}",
            rows,
            cols,
            rows * cols,
            data.len()
        );
        let n = data.len();
        Tensor(Rc::new(RefCell::new(TensorData {
            shape: [rows, cols],
            data,
            grad: vec![0.0; n],
            requires_grad: false,
            op,
            parents,
            backward,
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
        })))
    }

    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
        Tensor::make(rows, cols, data, "leaf", vec![], None)
    }

    /// Leaf tensor marked as a learnable parameter.
    pub fn param(rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
        let t = Tensor::new(rows, cols, data);
        t.0.borrow_mut().requires_grad = true;
        t
    }

    pub fn zeros(rows: usize, cols: usize) -> Tensor {
        Tensor::new(rows, cols, vec![0.0; rows * cols])
    }

    /// Zero-initialized learnable parameter (bias vectors).
    pub fn zeros_param(rows: usize, cols: usize) -> Tensor {
        Tensor::param(rows, cols, vec![0.0; rows * cols])
    }

    /// Learnable parameter drawn from `uniform(-bound, bound)`.
    pub fn param_uniform(rng: &mut impl rand::Rng, rows: usize, cols: usize, bound: f64) -> Tensor {
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
        Tensor::param(rows, cols, data)
    }

    /// Parameter with the usual `1/sqrt(fan_in)` uniform init.
    pub fn param_fan_in(rng: &mut impl rand::Rng, rows: usize, cols: usize, fan_in: usize) -> Tensor {
        Tensor::param_uniform(rng, rows, cols, 1.0 / (fan_in as f64).sqrt())
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor::new(1, 1, vec![v])
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Tensor {
        let r = rows.len();
        let c = rows[0].len();
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Tensor::new(r, c, data)
    }

    pub fn identity(n: usize) -> Tensor {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Tensor::new(n, n, data)
    }

    pub fn rows(&self) -> usize {
        self.0.borrow().shape[0]
    }

    pub fn cols(&self) -> usize {
        self.0.borrow().shape[1]
    }

    pub fn shape(&self) -> (usize, usize) {
        let s = self.0.borrow().shape;
        (s[0], s[1])
    }

    pub fn numel(&self) -> usize {
        self.0.borrow().data.len()
    }

    pub fn data(&self) -> Vec<f64> {
        self.0.borrow().data.clone()
    }

    pub fn grad(&self) -> Vec<f64> {
        self.0.borrow().grad.clone()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let b = self.0.borrow();
        b.data[i * b.shape[1] + j]
    }

    /// Scalar value of a 1x1 tensor.
    pub fn item(&self) -> f64 {
        let b = self.0.borrow();
        assert_eq!(b.data.len(), 1, "item() on non-scalar {}x{}", b.shape[0], b.shape[1]);
        b.data[0]
    }

    pub fn requires_grad(&self) -> bool {
        self.0.borrow().requires_grad
    }

    pub fn op_name(&self) -> &'static str {
        self.0.borrow().op
    }

    pub fn id(&self) -> u64 {
        self.0.borrow().id
    }

    /// Overwrite the stored values in place. Shape must match.
    pub fn set_data(&self, data: &[f64]) {
        let mut b = self.0.borrow_mut();
        assert_eq!(b.data.len(), data.len(), "set_data length mismatch");
        b.data.copy_from_slice(data);
    }

    pub fn zero_grad(&self) {
        let mut b = self.0.borrow_mut();
        for g in b.grad.iter_mut() {
            *g = 0.0;
        }
    }

    /// One plain gradient-descent update `p <- p - lr * grad`, then zero the grad.
    pub fn sgd_update(&self, lr: f64) {
        let mut b = self.0.borrow_mut();
        let n = b.data.len();
        for i in 0..n {
            let g = b.grad[i];
            b.data[i] -= lr * g;
            b.grad[i] = 0.0;
        }
    }

    pub fn has_nan(&self) -> bool {
        self.0.borrow().data.iter().any(|v| !v.is_finite())
    }

    /// Walk the graph below `self` and report the op name of the earliest
    /// recorded node holding a non-finite value, if any.
    pub fn first_nan_op(&self) -> Option<&'static str> {
        let order = self.topo_order();
        order
            .iter()
            .filter(|t| t.has_nan())
            .min_by_key(|t| t.id())
            .map(|t| t.op_name())
    }

    fn topo_order(&self) -> Vec<Tensor> {
        let mut order = Vec::new();
        let mut visited = HashSet::new();
        // Iterative post-order DFS.
        let mut stack: Vec<(Tensor, usize)> = vec![(self.clone(), 0)];
        visited.insert(self.id());
        while let Some((node, child)) = stack.pop() {
            let next = {
                let b = node.0.borrow();
                b.parents.get(child).cloned()
            };
            match next {
                Some(p) => {
                    stack.push((node, child + 1));
                    if visited.insert(p.id()) {
                        stack.push((p, 0));
                    }
                }
                None => order.push(node),
            }
        }
        order
    }

    /// Reverse-mode sweep from a scalar: seeds the adjoint with 1 and replays
    /// every recorded operation exactly once in reverse topological order.
    pub fn backward(&self) {
        assert_eq!(self.numel(), 1, "backward() requires a scalar loss");
        let order = self.topo_order();
        self.0.borrow_mut().grad[0] = 1.0;
        for node in order.iter().rev() {
            let b = node.0.borrow();
            if let Some(f) = &b.backward {
                f(&b.grad);
            }
        }
    }

    // ── linear algebra ───────────────────────────────────────────────

    pub fn matmul(&self, other: &Tensor) -> Tensor {
        let (m, k) = self.shape();
        let (k2, n) = other.shape();
        assert_eq!(
            k, k2,
            "matmul: inner dimensions disagree: {}x{} vs {}x{}",
            m, k, k2, n
        );
        let ad = self.data();
        let bd = other.data();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let a = ad[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let brow = &bd[p * n..(p + 1) * n];
                let orow = &mut out[i * n..(i + 1) * n];
                for j in 0..n {
                    orow[j] += a * brow[j];
                }
            }
        }
        let (pa, pb) = (self.clone(), other.clone());
        let backward = move |g: &[f64]| {
            // dA = dC * B^T
            let mut da = vec![0.0; m * k];
            for i in 0..m {
                for p in 0..k {
                    let mut s = 0.0;
                    for j in 0..n {
                        s += g[i * n + j] * bd[p * n + j];
                    }
                    da[i * k + p] = s;
                }
            }
            accumulate(&pa, &da);
            // dB = A^T * dC
            let mut db = vec![0.0; k * n];
            for p in 0..k {
                for i in 0..m {
                    let a = ad[i * k + p];
                    if a == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        db[p * n + j] += a * g[i * n + j];
                    }
                }
            }
            accumulate(&pb, &db);
        };
        Tensor::make(
            m,
            n,
            out,
            "matmul",
            vec![self.clone(), other.clone()],
            Some(Box::new(backward)),
        )
    }

    pub fn transpose(&self) -> Tensor {
        let (r, c) = self.shape();
        let d = self.data();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = d[i * c + j];
            }
        }
        let p = self.clone();
        let backward = move |g: &[f64]| {
            let mut dg = vec![0.0; r * c];
            for i in 0..r {
                for j in 0..c {
                    dg[i * c + j] = g[j * r + i];
                }
            }
            accumulate(&p, &dg);
        };
        Tensor::make(c, r, out, "transpose", vec![self.clone()], Some(Box::new(backward)))
    }

    pub fn reshape(&self, rows: usize, cols: usize) -> Tensor {
        assert_eq!(
            rows * cols,
            self.numel(),
            "reshape: cannot view {:?} as {}x{}",
            self.shape(),
            rows,
            cols
        );
        let p = self.clone();
        let backward = move |g: &[f64]| accumulate(&p, g);
        Tensor::make(
            rows,
            cols,
            self.data(),
            "reshape",
            vec![self.clone()],
            Some(Box::new(backward)),
        )
    }

    // ── elementwise binary ───────────────────────────────────────────

    fn binary(
        &self,
        other: &Tensor,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
        dfa: impl Fn(f64, f64) -> f64 + 'static,
        dfb: impl Fn(f64, f64) -> f64 + 'static,
    ) -> Tensor {
        let (r, c) = self.shape();
        assert_eq!(
            self.shape(),
            other.shape(),
            "{}: shape mismatch {:?} vs {:?}",
            op,
            self.shape(),
            other.shape()
        );
        let ad = self.data();
        let bd = other.data();
        let out: Vec<f64> = ad.iter().zip(&bd).map(|(&a, &b)| f(a, b)).collect();
        let (pa, pb) = (self.clone(), other.clone());
        let backward = move |g: &[f64]| {
            let da: Vec<f64> = g
                .iter()
                .enumerate()
                .map(|(i, &gi)| gi * dfa(ad[i], bd[i]))
                .collect();
            accumulate(&pa, &da);
            let db: Vec<f64> = g
                .iter()
                .enumerate()
                .map(|(i, &gi)| gi * dfb(ad[i], bd[i]))
                .collect();
            accumulate(&pb, &db);
        };
        Tensor::make(
            r,
            c,
            out,
            op,
            vec![self.clone(), other.clone()],
            Some(Box::new(backward)),
        )
    }

    pub fn add(&self, other: &Tensor) -> Tensor {
        self.binary(other, "add", |a, b| a + b, |_, _| 1.0, |_, _| 1.0)
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        self.binary(other, "sub", |a, b| a - b, |_, _| 1.0, |_, _| -1.0)
    }

    pub fn mul(&self, other: &Tensor) -> Tensor {
        self.binary(other, "mul", |a, b| a * b, |_, b| b, |a, _| a)
    }

    // ── elementwise unary ────────────────────────────────────────────

    fn unary(
        &self,
        op: &'static str,
        f: impl Fn(f64) -> f64,
        // derivative as a function of (input, output)
        df: impl Fn(f64, f64) -> f64 + 'static,
    ) -> Tensor {
        let (r, c) = self.shape();
        let xd = self.data();
        let out: Vec<f64> = xd.iter().map(|&x| f(x)).collect();
        let yd = out.clone();
        let p = self.clone();
        let backward = move |g: &[f64]| {
            let dx: Vec<f64> = g
                .iter()
                .enumerate()
                .map(|(i, &gi)| gi * df(xd[i], yd[i]))
                .collect();
            accumulate(&p, &dx);
        };
        Tensor::make(r, c, out, op, vec![self.clone()], Some(Box::new(backward)))
    }

    pub fn add_scalar(&self, s: f64) -> Tensor {
        self.unary("add_scalar", move |x| x + s, |_, _| 1.0)
    }

    pub fn mul_scalar(&self, s: f64) -> Tensor {
        self.unary("mul_scalar", move |x| x * s, move |_, _| s)
    }

    pub fn neg(&self) -> Tensor {
        self.mul_scalar(-1.0)
    }

    pub fn relu(&self) -> Tensor {
        self.unary("relu", |x| x.max(0.0), |x, _| if x > 0.0 { 1.0 } else { 0.0 })
    }

    /// ELU with slope parameter 1: `x` for `x > 0`, `exp(x) - 1` otherwise.
    pub fn elu(&self) -> Tensor {
        self.unary(
            "elu",
            |x| if x > 0.0 { x } else { x.exp() - 1.0 },
            |x, y| if x > 0.0 { 1.0 } else { y + 1.0 },
        )
    }

    pub fn sigmoid(&self) -> Tensor {
        self.unary(
            "sigmoid",
            |x| 1.0 / (1.0 + (-x).exp()),
            |_, y| y * (1.0 - y),
        )
    }

    pub fn exp(&self) -> Tensor {
        self.unary("exp", |x| x.exp(), |_, y| y)
    }

    pub fn ln(&self) -> Tensor {
        self.unary("ln", |x| x.ln(), |x, _| 1.0 / x)
    }

    /// `x^(-1/2)` for positive entries, 0 elsewhere. Used for degree
    /// normalization where zero-degree nodes must stay isolated.
    pub fn rsqrt_or_zero(&self) -> Tensor {
        self.unary(
            "rsqrt_or_zero",
            |x| if x > 0.0 { 1.0 / x.sqrt() } else { 0.0 },
            |x, y| if x > 0.0 { -0.5 * y / x } else { 0.0 },
        )
    }

    // ── reductions ───────────────────────────────────────────────────

    pub fn sum(&self) -> Tensor {
        let s: f64 = self.0.borrow().data.iter().sum();
        let (r, c) = self.shape();
        let p = self.clone();
        let backward = move |g: &[f64]| {
            accumulate(&p, &vec![g[0]; r * c]);
        };
        Tensor::make(1, 1, vec![s], "sum", vec![self.clone()], Some(Box::new(backward)))
    }

    pub fn mean(&self) -> Tensor {
        let n = self.numel() as f64;
        self.sum().mul_scalar(1.0 / n)
    }

    /// Squared L2 norm of all entries.
    pub fn sumsq(&self) -> Tensor {
        let xd = self.data();
        let s: f64 = xd.iter().map(|v| v * v).sum();
        let p = self.clone();
        let backward = move |g: &[f64]| {
            let dx: Vec<f64> = xd.iter().map(|&x| 2.0 * x * g[0]).collect();
            accumulate(&p, &dx);
        };
        Tensor::make(1, 1, vec![s], "sumsq", vec![self.clone()], Some(Box::new(backward)))
    }

    /// Sum each row: `r x c -> r x 1`.
    pub fn row_sums(&self) -> Tensor {
        let (r, c) = self.shape();
        let d = self.data();
        let out: Vec<f64> = (0..r).map(|i| d[i * c..(i + 1) * c].iter().sum()).collect();
        let p = self.clone();
        let backward = move |g: &[f64]| {
            let mut dx = vec![0.0; r * c];
            for i in 0..r {
                for j in 0..c {
                    dx[i * c + j] = g[i];
                }
            }
            accumulate(&p, &dx);
        };
        Tensor::make(r, 1, out, "row_sums", vec![self.clone()], Some(Box::new(backward)))
    }

    /// Sum each column: `r x c -> 1 x c`.
    pub fn col_sums(&self) -> Tensor {
        let (r, c) = self.shape();
        let d = self.data();
        let mut out = vec![0.0; c];
        for i in 0..r {
            for j in 0..c {
                out[j] += d[i * c + j];
            }
        }
        let p = self.clone();
        let backward = move |g: &[f64]| {
            let mut dx = vec![0.0; r * c];
            for i in 0..r {
                dx[i * c..(i + 1) * c].copy_from_slice(g);
            }
            accumulate(&p, &dx);
        };
        Tensor::make(1, c, out, "col_sums", vec![self.clone()], Some(Box::new(backward)))
    }

    pub fn row_means(&self) -> Tensor {
        let c = self.cols() as f64;
        self.row_sums().mul_scalar(1.0 / c)
    }

    pub fn col_means(&self) -> Tensor {
        let r = self.rows() as f64;
        self.col_sums().mul_scalar(1.0 / r)
    }

    /// Max of each row: `r x c -> r x 1`. Gradient routes to the first argmax.
    pub fn row_max(&self) -> Tensor {
        let (r, c) = self.shape();
        let d = self.data();
        let mut out = Vec::with_capacity(r);
        let mut arg = Vec::with_capacity(r);
        for i in 0..r {
            let row = &d[i * c..(i + 1) * c];
            let (mut bj, mut bv) = (0, row[0]);
            for (j, &v) in row.iter().enumerate() {
                if v > bv {
                    bv = v;
                    bj = j;
                }
            }
            out.push(bv);
            arg.push(bj);
        }
        let p = self.clone();
        let backward = move |g: &[f64]| {
            let mut dx = vec![0.0; r * c];
            for i in 0..r {
                dx[i * c + arg[i]] = g[i];
            }
            accumulate(&p, &dx);
        };
        Tensor::make(r, 1, out, "row_max", vec![self.clone()], Some(Box::new(backward)))
    }

    /// Max of each column: `r x c -> 1 x c`.
    pub fn col_max(&self) -> Tensor {
        self.transpose().row_max().transpose()
    }

    /// Numerically stabilized softmax along each row; rows sum to 1.
    pub fn softmax_rows(&self) -> Tensor {
        let (r, c) = self.shape();
        let d = self.data();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let row = &d[i * c..(i + 1) * c];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for j in 0..c {
                let e = (row[j] - m).exp();
                out[i * c + j] = e;
                z += e;
            }
            for j in 0..c {
                out[i * c + j] /= z;
            }
        }
        let yd = out.clone();
        let p = self.clone();
        let backward = move |g: &[f64]| {
            let mut dx = vec![0.0; r * c];
            for i in 0..r {
                let y = &yd[i * c..(i + 1) * c];
                let gr = &g[i * c..(i + 1) * c];
                let dot: f64 = y.iter().zip(gr).map(|(&yj, &gj)| yj * gj).sum();
                for j in 0..c {
                    dx[i * c + j] = y[j] * (gr[j] - dot);
                }
            }
            accumulate(&p, &dx);
        };
        Tensor::make(r, c, out, "softmax", vec![self.clone()], Some(Box::new(backward)))
    }

    /// Softmax along each column.
    pub fn softmax_cols(&self) -> Tensor {
        self.transpose().softmax_rows().transpose()
    }

    // ── structural ops ───────────────────────────────────────────────

    pub fn concat_rows(parts: &[&Tensor]) -> Tensor {
        assert!(!parts.is_empty(), "concat_rows: no inputs");
        let c = parts[0].cols();
        let mut data = Vec::new();
        let mut row_counts = Vec::with_capacity(parts.len());
        for p in parts {
            assert_eq!(p.cols(), c, "concat_rows: column mismatch {} vs {}", p.cols(), c);
            data.extend(p.data());
            row_counts.push(p.rows());
        }
        let r: usize = row_counts.iter().sum();
        let owned: Vec<Tensor> = parts.iter().map(|p| (*p).clone()).collect();
        let parents = owned.clone();
        let backward = move |g: &[f64]| {
            let mut off = 0;
            for (p, &rc) in owned.iter().zip(&row_counts) {
                accumulate(p, &g[off..off + rc * c]);
                off += rc * c;
            }
        };
        Tensor::make(r, c, data, "concat_rows", parents, Some(Box::new(backward)))
    }

    /// Columns `[start, end)` as a new tensor.
    pub fn slice_cols(&self, start: usize, end: usize) -> Tensor {
        let (r, c) = self.shape();
        assert!(start < end && end <= c, "slice_cols: [{start}, {end}) out of 0..{c}");
        let w = end - start;
        let d = self.data();
        let mut out = Vec::with_capacity(r * w);
        for i in 0..r {
            out.extend_from_slice(&d[i * c + start..i * c + end]);
        }
        let p = self.clone();
        let backward = move |g: &[f64]| {
            let mut dx = vec![0.0; r * c];
            for i in 0..r {
                dx[i * c + start..i * c + end].copy_from_slice(&g[i * w..(i + 1) * w]);
            }
            accumulate(&p, &dx);
        };
        Tensor::make(r, w, out, "slice_cols", vec![self.clone()], Some(Box::new(backward)))
    }

    /// Gather the listed rows (duplicates allowed); the gradient scatters back
    /// additively.
    pub fn gather_rows(&self, indices: &[usize]) -> Tensor {
        let (r, c) = self.shape();
        for &i in indices {
            assert!(i < r, "gather_rows: index {i} out of range for {r} rows");
        }
        let d = self.data();
        let mut out = Vec::with_capacity(indices.len() * c);
        for &i in indices {
            out.extend_from_slice(&d[i * c..(i + 1) * c]);
        }
        let idx = indices.to_vec();
        let p = self.clone();
        let backward = move |g: &[f64]| {
            let mut dx = vec![0.0; r * c];
            for (k, &i) in idx.iter().enumerate() {
                for j in 0..c {
                    dx[i * c + j] += g[k * c + j];
                }
            }
            accumulate(&p, &dx);
        };
        Tensor::make(
            indices.len(),
            c,
            out,
            "gather_rows",
            vec![self.clone()],
            Some(Box::new(backward)),
        )
    }

    /// Multiply row `i` by `w[i]` (`w` is `r x 1`).
    pub fn scale_rows(&self, w: &Tensor) -> Tensor {
        let (r, c) = self.shape();
        assert_eq!(w.shape(), (r, 1), "scale_rows: weights must be {r}x1, got {:?}", w.shape());
        let xd = self.data();
        let wd = w.data();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[i * c + j] = xd[i * c + j] * wd[i];
            }
        }
        let (px, pw) = (self.clone(), w.clone());
        let backward = move |g: &[f64]| {
            let mut dx = vec![0.0; r * c];
            let mut dw = vec![0.0; r];
            for i in 0..r {
                for j in 0..c {
                    dx[i * c + j] = g[i * c + j] * wd[i];
                    dw[i] += g[i * c + j] * xd[i * c + j];
                }
            }
            accumulate(&px, &dx);
            accumulate(&pw, &dw);
        };
        Tensor::make(
            r,
            c,
            out,
            "scale_rows",
            vec![self.clone(), w.clone()],
            Some(Box::new(backward)),
        )
    }

    /// Multiply column `j` by `w[j]` (`w` is `1 x c`).
    pub fn scale_cols(&self, w: &Tensor) -> Tensor {
        let (r, c) = self.shape();
        assert_eq!(w.shape(), (1, c), "scale_cols: weights must be 1x{c}, got {:?}", w.shape());
        let xd = self.data();
        let wd = w.data();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[i * c + j] = xd[i * c + j] * wd[j];
            }
        }
        let (px, pw) = (self.clone(), w.clone());
        let backward = move |g: &[f64]| {
            let mut dx = vec![0.0; r * c];
            let mut dw = vec![0.0; c];
            for i in 0..r {
                for j in 0..c {
                    dx[i * c + j] = g[i * c + j] * wd[j];
                    dw[j] += g[i * c + j] * xd[i * c + j];
                }
            }
            accumulate(&px, &dx);
            accumulate(&pw, &dw);
        };
        Tensor::make(
            r,
            c,
            out,
            "scale_cols",
            vec![self.clone(), w.clone()],
            Some(Box::new(backward)),
        )
    }

    /// Multiply every entry by a 1x1 tensor; differentiable in both inputs.
    pub fn scale_by(&self, s: &Tensor) -> Tensor {
        assert_eq!(s.numel(), 1, "scale_by: scale must be 1x1");
        let (r, c) = self.shape();
        let xd = self.data();
        let sv = s.item();
        let out: Vec<f64> = xd.iter().map(|&x| x * sv).collect();
        let (px, ps) = (self.clone(), s.clone());
        let backward = move |g: &[f64]| {
            let dx: Vec<f64> = g.iter().map(|&gi| gi * sv).collect();
            accumulate(&px, &dx);
            let ds: f64 = g.iter().zip(&xd).map(|(&gi, &x)| gi * x).sum();
            accumulate(&ps, &[ds]);
        };
        Tensor::make(
            r,
            c,
            out,
            "scale_by",
            vec![self.clone(), s.clone()],
            Some(Box::new(backward)),
        )
    }

    // ── gradient-control ops ─────────────────────────────────────────

    /// Forward identity, zero adjoint.
    pub fn stop_gradient(&self) -> Tensor {
        let (r, c) = self.shape();
        Tensor::make(r, c, self.data(), "stop_gradient", vec![], None)
    }

    /// Forward value of `quantized`; the backward pass hands the output
    /// gradient to `self` unchanged and sends nothing into `quantized`.
    pub fn straight_through(&self, quantized: &Tensor) -> Tensor {
        assert_eq!(
            self.shape(),
            quantized.shape(),
            "straight_through: shape mismatch {:?} vs {:?}",
            self.shape(),
            quantized.shape()
        );
        let (r, c) = self.shape();
        let p = self.clone();
        let backward = move |g: &[f64]| accumulate(&p, g);
        Tensor::make(
            r,
            c,
            quantized.data(),
            "straight_through",
            vec![self.clone()],
            Some(Box::new(backward)),
        )
    }

    /// Cross-entropy of a `1 x C` logit row against an integer label.
    pub fn cross_entropy(&self, label: usize) -> Tensor {
        let (r, c) = self.shape();
        assert_eq!(r, 1, "cross_entropy expects a 1xC logit row");
        assert!(label < c, "cross_entropy: label {label} out of range for {c} classes");
        let d = self.data();
        let m = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = d.iter().map(|&x| (x - m).exp()).sum();
        let loss = m + z.ln() - d[label];
        let probs: Vec<f64> = d.iter().map(|&x| (x - m).exp() / z).collect();
        let p = self.clone();
        let backward = move |g: &[f64]| {
            let mut dx: Vec<f64> = probs.iter().map(|&pj| pj * g[0]).collect();
            dx[label] -= g[0];
            accumulate(&p, &dx);
        };
        Tensor::make(
            1,
            1,
            vec![loss],
            "cross_entropy",
            vec![self.clone()],
            Some(Box::new(backward)),
        )
    }
}
