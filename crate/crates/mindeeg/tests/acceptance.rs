//! End-to-end acceptance suite. Each criterion prints one pass/fail line;
//! run with `cargo test --test acceptance -- --nocapture` to see them all.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mindeeg::codebook::{GraphCodebook, SimilarityMetric};
use mindeeg::data::{synth_generate, Dataset, Normalizer, SynthSpec};
use mindeeg::gradcheck;
use mindeeg::graph::normalize_adjacency;
use mindeeg::metrics::aggregate_accuracy;
use mindeeg::model::MindEegModel;
use mindeeg::splits::{split_loso, split_subject_dependent, DependentProtocol};
use mindeeg::train::{collect_usage, evaluate, predict, run_training, write_checkpoint};
use mindeeg::{ModelConfig, SplitPlan, Tensor};

struct Outcome {
    name: &'static str,
    result: Result<String, String>,
}

fn small_config() -> ModelConfig {
    ModelConfig {
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
        ..Default::default()
    }
}

fn random_sample(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::new(
        cfg.n,
        cfg.d,
        (0..cfg.n * cfg.d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
}

// ── criterion 1: gradient integrity ─────────────────────────────────

fn check_op(
    label: &str,
    dims: usize,
    f: &mut dyn FnMut(&[f64]) -> f64,
    g: &dyn Fn(&[f64]) -> Vec<f64>,
    x0: &[f64],
) -> Result<(), String> {
    assert_eq!(x0.len(), dims);
    let numeric = gradcheck::finite_diff(f, x0, 1e-5);
    let analytic = g(x0);
    let err = gradcheck::max_rel_err(&analytic, &numeric);
    if err < 1e-4 {
        Ok(())
    } else {
        Err(format!("{label}: max rel err {err:.3e}"))
    }
}

fn op_level_checks(rng: &mut ChaCha8Rng) -> Result<(), String> {
    // linear algebra chain: matmul, transpose, reshape, add, sub, mul
    let y0: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let x0: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
    {
        let y = y0.clone();
        let chain = |t: &Tensor| -> Tensor {
            let other = Tensor::new(4, 3, y.clone());
            let prod = t.matmul(&other).reshape(1, 9).sumsq();
            t.transpose()
                .add(&other)
                .sub(&other.mul_scalar(0.5))
                .mul(&other)
                .sumsq()
                .add(&prod)
        };
        let mut f = |x: &[f64]| chain(&Tensor::new(3, 4, x.to_vec())).item();
        let g = |x: &[f64]| {
            let t = Tensor::param(3, 4, x.to_vec());
            chain(&t).backward();
            t.grad()
        };
        check_op("linear chain", 12, &mut f, &g, &x0)?;
    }
    // pointwise nonlinearities (inputs kept away from the relu kink)
    {
        let chain = |t: &Tensor| -> Tensor {
            let pos = t.sigmoid().add_scalar(0.5);
            t.elu()
                .add(&t.add_scalar(3.0).relu())
                .add(&pos.ln().neg())
                .add(&t.mul_scalar(0.3).exp())
                .add(&pos.rsqrt_or_zero())
                .sumsq()
        };
        let x0: Vec<f64> = (0..9).map(|_| rng.gen_range(0.2..1.0)).collect();
        let mut f = |x: &[f64]| chain(&Tensor::new(3, 3, x.to_vec())).item();
        let g = |x: &[f64]| {
            let t = Tensor::param(3, 3, x.to_vec());
            chain(&t).backward();
            t.grad()
        };
        check_op("pointwise ops", 9, &mut f, &g, &x0)?;
    }
    // reductions and softmaxes
    {
        let chain = |t: &Tensor| -> Tensor {
            t.softmax_rows()
                .matmul(&t.softmax_cols().transpose())
                .row_sums()
                .sumsq()
                .add(&t.col_means().sumsq())
                .add(&t.row_means().sum())
                .add(&t.col_sums().sumsq())
                .add(&t.mean())
        };
        let x0: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut f = |x: &[f64]| chain(&Tensor::new(3, 4, x.to_vec())).item();
        let g = |x: &[f64]| {
            let t = Tensor::param(3, 4, x.to_vec());
            chain(&t).backward();
            t.grad()
        };
        check_op("reductions", 12, &mut f, &g, &x0)?;
    }
    // structural ops: concat, slice, gather, scaling, max pools
    {
        let chain = |t: &Tensor| -> Tensor {
            let top = t.slice_cols(0, 2);
            let picked = t.gather_rows(&[2, 0, 1]);
            let stacked = Tensor::concat_rows(&[&top, &picked.slice_cols(1, 3)]);
            let w = stacked.row_sums().sigmoid();
            stacked
                .scale_rows(&w)
                .scale_cols(&stacked.col_means().sigmoid())
                .scale_by(&stacked.mean())
                .sumsq()
                .add(&t.row_max().sumsq())
                .add(&t.col_max().sumsq())
        };
        // distinct magnitudes keep the max pools away from ties
        let x0: Vec<f64> = (0..12).map(|i| 0.05 * i as f64 + 0.3).collect();
        let mut f = |x: &[f64]| chain(&Tensor::new(4, 3, x.to_vec())).item();
        let g = |x: &[f64]| {
            let t = Tensor::param(4, 3, x.to_vec());
            chain(&t).backward();
            t.grad()
        };
        check_op("structural ops", 12, &mut f, &g, &x0)?;
    }
    // classification loss
    {
        let x0: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut f = |x: &[f64]| Tensor::new(1, 5, x.to_vec()).cross_entropy(2).item();
        let g = |x: &[f64]| {
            let t = Tensor::param(1, 5, x.to_vec());
            t.cross_entropy(2).backward();
            t.grad()
        };
        check_op("cross entropy", 5, &mut f, &g, &x0)?;
    }
    // graph normalization
    {
        let x0: Vec<f64> = (0..16).map(|_| rng.gen_range(0.2..1.5)).collect();
        let mut f = |x: &[f64]| normalize_adjacency(&Tensor::new(4, 4, x.to_vec())).sumsq().item();
        let g = |x: &[f64]| {
            let t = Tensor::param(4, 4, x.to_vec());
            normalize_adjacency(&t).sumsq().backward();
            t.grad()
        };
        check_op("adjacency normalization", 16, &mut f, &g, &x0)?;
    }
    Ok(())
}

fn criterion_gradient_integrity() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    op_level_checks(&mut rng)?;

    // end-to-end: full-size model, mean loss over a random 4-sample batch
    let cfg = ModelConfig {
        classes: 4,
        ..Default::default()
    };
    let model = MindEegModel::new(&cfg).map_err(|e| e.to_string())?;
    let batch: Vec<(Tensor, usize)> = (0..4)
        .map(|i| (random_sample(&cfg, &mut rng), i % 4))
        .collect();
    let batch_loss = |m: &MindEegModel| -> f64 {
        batch
            .iter()
            .map(|(x, label)| m.integrative_loss(&m.forward(x), *label).item())
            .sum::<f64>()
            / batch.len() as f64
    };

    model.zero_grads();
    {
        let mut total: Option<Tensor> = None;
        for (x, label) in &batch {
            let loss = model.integrative_loss(&model.forward(x), *label);
            total = Some(match total {
                Some(t) => t.add(&loss),
                None => loss,
            });
        }
        total.unwrap().mul_scalar(0.25).backward();
    }

    // Spot-check parameters whose path to the loss is smooth. Parameters
    // upstream of a quantization choice or a stop-gradient are excluded
    // here: the estimator is deliberately biased there, and criteria 2 and
    // 3 pin down that behaviour exactly instead.
    let targets: Vec<(&str, Tensor)> = vec![
        ("global up_proj", model.global.codebook.up_proj.clone()),
        ("global se_w1", model.global.se.w1.clone()),
        ("global gcn_w", model.global.magcn.blocks[0].gcn.weight.clone()),
        ("inter gcn_w", model.inter.encoder.magcn.blocks[0].gcn.weight.clone()),
        ("inter se_w1", model.inter.encoder.se.w1.clone()),
        ("inter up_proj", model.inter.encoder.codebook.up_proj.clone()),
        ("inter_to_head", model.inter_to_head.clone()),
        ("head attn_w", model.head.attn_w.clone()),
        ("head fc1_w", model.head.fc1_w.clone()),
        ("head fc3_b", model.head.fc3_b.clone()),
    ];
    let mut checked = 0;
    for (label, t) in &targets {
        let base = t.data();
        let analytic = t.grad();
        for _ in 0..3 {
            let i = rng.gen_range(0..base.len());
            let mut f = |x: &[f64]| {
                t.set_data(x);
                let v = batch_loss(&model);
                t.set_data(&base);
                v
            };
            let numeric = gradcheck::finite_diff_at(&mut f, &base, i, 1e-5);
            let err = gradcheck::rel_err(analytic[i], numeric);
            // below ~1e-7 the central difference is cancellation noise
            if err >= 1e-4 && (analytic[i] - numeric).abs() >= 1e-7 {
                return Err(format!(
                    "{label}[{i}]: analytic {:.6e} vs numeric {numeric:.6e} (rel err {err:.3e})",
                    analytic[i]
                ));
            }
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    if elapsed.as_secs() >= 120 {
        return Err(format!("took {elapsed:.1?}, budget is 2 minutes"));
    }
    Ok(format!("{checked} end-to-end coordinates in {elapsed:.1?}"))
}

// ── criterion 2: stop-gradient semantics ────────────────────────────

fn criterion_stop_gradient() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let beta = 0.25;
    for _ in 0..100 {
        let d = rng.gen_range(2..10);
        let a0: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let v0: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let a = Tensor::param(1, d, a0.clone());
        let v = Tensor::param(1, d, v0.clone());
        mindeeg::codebook::loss_vq(&a, &v, beta).backward();
        let (ga, gv) = (a.grad(), v.grad());
        for i in 0..d {
            let want_da = 2.0 * beta * (a0[i] - v0[i]);
            let want_dv = 2.0 * (v0[i] - a0[i]);
            if (ga[i] - want_da).abs() > 1e-10 {
                return Err(format!("d/da[{i}]: got {} want {want_da}", ga[i]));
            }
            if (gv[i] - want_dv).abs() > 1e-10 {
                return Err(format!("d/dv[{i}]: got {} want {want_dv}", gv[i]));
            }
        }
    }
    Ok("both closed-form gradients match to 1e-10 over 100 random cases".into())
}

// ── criterion 3: straight-through liveness ──────────────────────────

fn criterion_straight_through() -> Result<String, String> {
    let cfg_on = small_config();
    let cfg_off = ModelConfig {
        straight_through: false,
        ..small_config()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let batch: Vec<(Tensor, usize)> = (0..4)
        .map(|i| (random_sample(&cfg_on, &mut rng), i % cfg_on.classes))
        .collect();
    let classification_grads = |cfg: &ModelConfig| -> Result<Vec<Vec<f64>>, String> {
        let model = MindEegModel::new(cfg).map_err(|e| e.to_string())?;
        model.zero_grads();
        for (x, label) in &batch {
            model.forward(x).logits.cross_entropy(*label).backward();
        }
        Ok(model.global.age.params().into_iter().map(|(_, t)| t.grad()).collect())
    };
    let live = classification_grads(&cfg_on)?;
    if !live.iter().flatten().any(|&g| g != 0.0) {
        return Err("graph-encoder parameters got no classification gradient".into());
    }
    let cut = classification_grads(&cfg_off)?;
    if cut.iter().flatten().any(|&g| g != 0.0) {
        return Err("disabling the straight-through path left a nonzero gradient".into());
    }
    Ok("encoder gradient nonzero with the estimator, exactly zero without".into())
}

// ── criterion 4: overfit capability ─────────────────────────────────

struct OverfitRun {
    model: MindEegModel,
    normalizer: Normalizer,
    dataset: Dataset,
    train_accuracy: f64,
    epochs_used: usize,
}

fn criterion_overfit() -> Result<(String, OverfitRun), String> {
    let start = Instant::now();
    let cfg = ModelConfig {
        classes: 4,
        ..Default::default()
    };
    let ds = synth_generate(&SynthSpec::new(7, 1, 4, 20)); // 4 classes x 20 samples
    assert_eq!(ds.len(), 80);
    let all: Vec<usize> = (0..ds.len()).collect();
    let model = MindEegModel::new(&cfg).map_err(|e| e.to_string())?;
    let normalizer = Normalizer::fit(&ds, &all);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed));
    let mut order = all.clone();

    let mut train_accuracy = 0.0;
    let mut epochs_used = 0;
    for epoch in 0..cfg.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(cfg.batch_size) {
            let mut batch_loss: Option<Tensor> = None;
            for &i in chunk {
                let x = Tensor::new(ds.n, ds.d, normalizer.apply(&ds.samples[i].features));
                let out = model.forward(&x);
                let loss = model.integrative_loss(&out, ds.samples[i].label as usize);
                batch_loss = Some(match batch_loss {
                    Some(acc) => acc.add(&loss),
                    None => loss,
                });
            }
            let loss = batch_loss.unwrap().mul_scalar(1.0 / chunk.len() as f64);
            if !loss.item().is_finite() {
                return Err(format!("non-finite loss at epoch {epoch}"));
            }
            loss.backward();
            model.sgd_step(cfg.lr);
        }
        model.revive_codebooks();
        epochs_used = epoch + 1;
        let report = evaluate(&model, &ds, &normalizer, &all).map_err(|e| e.to_string())?;
        train_accuracy = report.accuracy;
        if train_accuracy >= 0.95 {
            break;
        }
    }
    let elapsed = start.elapsed();
    if train_accuracy < 0.95 {
        return Err(format!(
            "train accuracy {:.1}% after {epochs_used} epochs, need 95%",
            100.0 * train_accuracy
        ));
    }
    if elapsed.as_secs() >= 300 {
        return Err(format!("took {elapsed:.1?}, budget is 5 minutes"));
    }
    Ok((
        format!(
            "train accuracy {:.1}% after {epochs_used} epochs in {elapsed:.1?}",
            100.0 * train_accuracy
        ),
        OverfitRun {
            model,
            normalizer,
            dataset: ds,
            train_accuracy,
            epochs_used,
        },
    ))
}

// ── criterion 5: generalization sanity ──────────────────────────────

fn criterion_generalization() -> Result<String, String> {
    let mut summaries = Vec::new();
    for seed in [1u64, 2, 3] {
        let cfg = ModelConfig {
            seed,
            epochs: 60,
            ..small_config()
        };
        let ds = synth_generate(&SynthSpec {
            n: cfg.n,
            d: cfg.d,
            ..SynthSpec::new(seed, 6, 4, 12)
        });
        let dep_plans = split_subject_dependent(&ds, DependentProtocol::LastTwoPerClass)
            .map_err(|e| e.to_string())?;
        let mut dep_reports = Vec::new();
        for plan in &dep_plans {
            let out = run_training(&cfg, &ds, plan, |_, _| {}).map_err(|e| e.to_string())?;
            dep_reports.push(out.report);
        }
        let (dep_mean, _) = aggregate_accuracy(&dep_reports);
        if dep_mean < 0.45 {
            return Err(format!(
                "seed {seed}: subject-dependent accuracy {:.1}%, need 45%",
                100.0 * dep_mean
            ));
        }

        let loso_cfg = ModelConfig {
            epochs: 20,
            ..cfg.clone()
        };
        let loso_plans = split_loso(&ds).map_err(|e| e.to_string())?;
        let mut loso_reports = Vec::new();
        for plan in &loso_plans {
            let out = run_training(&loso_cfg, &ds, plan, |_, _| {}).map_err(|e| e.to_string())?;
            loso_reports.push(out.report);
        }
        let (loso_mean, _) = aggregate_accuracy(&loso_reports);
        if loso_mean <= 0.25 {
            return Err(format!(
                "seed {seed}: LOSO accuracy {:.1}% does not beat 25% chance",
                100.0 * loso_mean
            ));
        }
        summaries.push(format!(
            "seed {seed}: dep {:.0}%, loso {:.0}%",
            100.0 * dep_mean,
            100.0 * loso_mean
        ));
    }
    Ok(summaries.join("; "))
}

// ── criterion 6: oracle equivalences ────────────────────────────────

fn criterion_oracles() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(66);

    // dense normalization oracle
    for _ in 0..20 {
        let n = rng.gen_range(2..9);
        let data: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.05..2.0)).collect();
        let out = normalize_adjacency(&Tensor::new(n, n, data.clone()));
        let mut deg = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                deg[i] += data[i * n + j];
            }
        }
        for i in 0..n {
            for j in 0..n {
                let want = data[i * n + j] / (deg[i].sqrt() * deg[j].sqrt());
                if (out.get(i, j) - want).abs() >= 1e-12 {
                    return Err(format!("normalization mismatch at ({i},{j})"));
                }
            }
        }
    }

    // quantization index vs an exhaustive scan, 10^4 random cases
    let (k, d) = (64, 8);
    let cb = GraphCodebook::new(&mut rng, k, d, 4, 0.25, SimilarityMetric::L2, 1.0)
        .map_err(|e| e.to_string())?;
    let emb = cb.embeddings.data();
    for case in 0..10_000 {
        let q: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let got = cb.nearest_index(&q);
        let mut best = 0usize;
        let mut best_dist = f64::INFINITY;
        for e in 0..k {
            let dist: f64 = emb[e * d..(e + 1) * d]
                .iter()
                .zip(&q)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum();
            if dist < best_dist {
                best_dist = dist;
                best = e;
            }
        }
        if got != best {
            return Err(format!("case {case}: nearest index {got} vs scan {best}"));
        }
    }

    // a single-region regional path must reproduce the global path once the
    // parameters are copied across
    let cfg = ModelConfig {
        n: 10,
        d: 3,
        q: 1,
        k1: 8,
        k2: 8,
        k3: 8,
        embed_dim: 8,
        global_out: 12,
        intra_out: 12,
        inter_out: 10,
        head_hidden1: 24,
        head_hidden2: 12,
        classes: 3,
        ..Default::default()
    };
    let model = MindEegModel::new(&cfg).map_err(|e| e.to_string())?;
    model.intra.encoders[0].copy_params_from(&model.global);
    let x = random_sample(&cfg, &mut rng);
    let g = model.global.forward(&x);
    let r = model.intra.encoders[0].forward(&x);
    if g.indices != r.indices {
        return Err(format!("codebook choices diverged: {:?} vs {:?}", g.indices, r.indices));
    }
    let max_diff = g
        .features
        .data()
        .iter()
        .zip(r.features.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let loss_diff = (g.vq_loss.item() - r.vq_loss.item()).abs();
    if max_diff >= 1e-9 || loss_diff >= 1e-9 {
        return Err(format!(
            "single-region path diverged: features {max_diff:.2e}, loss {loss_diff:.2e}"
        ));
    }
    Ok("normalization, 10^4 quantize scans, single-region equivalence all match".into())
}

// ── criterion 7: ablation correctness ───────────────────────────────

fn criterion_ablations() -> Result<String, String> {
    let base = small_config();
    let full = MindEegModel::new(&base).map_err(|e| e.to_string())?;
    let full_count = full.trainable_param_count();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut counts = Vec::new();
    for (name, cfg) in [
        ("global", ModelConfig { drop_global: true, ..base.clone() }),
        ("intra", ModelConfig { drop_intra: true, ..base.clone() }),
        ("inter", ModelConfig { drop_inter: true, ..base.clone() }),
        ("regional", ModelConfig { drop_regional: true, ..base.clone() }),
    ] {
        let model = MindEegModel::new(&cfg).map_err(|e| e.to_string())?;
        let count = model.trainable_param_count();
        if count >= full_count {
            return Err(format!(
                "dropping {name}: {count} trainable params, full model has {full_count}"
            ));
        }
        model.zero_grads();
        for i in 0..3 {
            let x = random_sample(&cfg, &mut rng);
            let out = model.forward(&x);
            if out.logits.cols() != cfg.classes {
                return Err(format!("dropping {name}: bad logits shape"));
            }
            model.integrative_loss(&out, i % cfg.classes).backward();
        }
        let active: std::collections::HashSet<u64> =
            model.active_params().iter().map(|(_, t)| t.id()).collect();
        for (pname, t) in model.named_params() {
            if !active.contains(&t.id()) && t.grad().iter().any(|&g| g != 0.0) {
                return Err(format!("dropping {name}: inactive param {pname} got gradient"));
            }
        }
        if active.is_empty() {
            return Err(format!("dropping {name}: no active parameters"));
        }
        counts.push(format!("{name} {count}"));
    }
    Ok(format!("full {full_count}; {}", counts.join(", ")))
}

// ── criterion 8: codebook usage analysis ────────────────────────────

fn criterion_usage(run: &OverfitRun) -> Result<String, String> {
    let all: Vec<usize> = (0..run.dataset.len()).collect();
    let histograms = collect_usage(&run.model, &run.dataset, &run.normalizer, &all);
    if histograms.is_empty() {
        return Err("no histograms collected".into());
    }
    let mut used_summary = Vec::new();
    for (name, rows) in &histograms {
        let used = rows.iter().filter(|r| r.1 > 0).count();
        if used < 2 {
            return Err(format!("codebook {name}: only {used} embedding(s) used"));
        }
        let total_percent: f64 = rows.iter().map(|r| r.2).sum();
        if (total_percent - 100.0).abs() > 0.01 {
            return Err(format!("codebook {name}: percentages sum to {total_percent}"));
        }
        used_summary.push(format!("{name} {used}"));
    }
    Ok(format!("embeddings used per codebook: {}", used_summary.join(", ")))
}

// ── criterion 9: determinism ────────────────────────────────────────

fn criterion_determinism() -> Result<String, String> {
    let cfg = ModelConfig {
        epochs: 4,
        ..small_config()
    };
    let ds = synth_generate(&SynthSpec {
        n: cfg.n,
        d: cfg.d,
        ..SynthSpec::new(9, 1, 4, 5)
    });
    let half = ds.len() / 2;
    let plan = SplitPlan {
        name: "det".into(),
        train: (0..half).collect(),
        test: (half..ds.len()).collect(),
    };
    let a = run_training(&cfg, &ds, &plan, |_, _| {}).map_err(|e| e.to_string())?;
    let b = run_training(&cfg, &ds, &plan, |_, _| {}).map_err(|e| e.to_string())?;
    let mut buf_a = Vec::new();
    let mut buf_b = Vec::new();
    write_checkpoint(&mut buf_a, &a.model, &a.normalizer).map_err(|e| e.to_string())?;
    write_checkpoint(&mut buf_b, &b.model, &b.normalizer).map_err(|e| e.to_string())?;
    if buf_a != buf_b {
        return Err("checkpoints differ between identical runs".into());
    }
    // predictions agree too
    for &i in &plan.test {
        let x = Tensor::new(ds.n, ds.d, a.normalizer.apply(&ds.samples[i].features));
        if predict(&a.model, &x) != predict(&b.model, &x) {
            return Err(format!("runs disagree on test sample {i}"));
        }
    }
    Ok(format!("two runs produced identical {}-byte checkpoints", buf_a.len()))
}

// ── criterion 10: protocol hygiene ──────────────────────────────────

fn criterion_protocols() -> Result<String, String> {
    let mut audited = 0usize;

    // 24 trials of 4 classes per subject
    let seed_iv = synth_generate(&SynthSpec {
        n: 8,
        d: 2,
        samples_per_trial: 2,
        ..SynthSpec::new(10, 3, 4, 6)
    });
    let plans = split_subject_dependent(&seed_iv, DependentProtocol::LastTwoPerClass)
        .map_err(|e| e.to_string())?;
    if plans.len() != 3 {
        return Err(format!("last-two split produced {} plans, expected 3", plans.len()));
    }
    for p in &plans {
        p.audit().map_err(|e| e.to_string())?;
        audited += 1;
    }

    // 15 trials per session, three sessions, split in thirds
    let seed_v = synth_generate(&SynthSpec {
        n: 8,
        d: 2,
        sessions: 3,
        ..SynthSpec::new(11, 3, 3, 5)
    });
    let plans = split_subject_dependent(&seed_v, DependentProtocol::ThreeFold)
        .map_err(|e| e.to_string())?;
    if plans.len() != 9 {
        return Err(format!("three-fold split produced {} plans, expected 9", plans.len()));
    }
    for p in &plans {
        p.audit().map_err(|e| e.to_string())?;
        audited += 1;
    }

    // 28 trials per subject, first 21 train
    let mped = synth_generate(&SynthSpec {
        n: 8,
        d: 2,
        ..SynthSpec::new(12, 3, 4, 7)
    });
    let plans = split_subject_dependent(&mped, DependentProtocol::FirstTrialsTrain { train_trials: 21 })
        .map_err(|e| e.to_string())?;
    for p in &plans {
        p.audit().map_err(|e| e.to_string())?;
        let test_trials: std::collections::BTreeSet<(u32, u32)> = p
            .test
            .iter()
            .map(|&i| (mped.samples[i].session, mped.samples[i].trial))
            .collect();
        if test_trials.len() != 7 {
            return Err(format!("plan {}: {} test trials, expected 7", p.name, test_trials.len()));
        }
        audited += 1;
    }

    // leave-one-subject-out on all three shapes
    for ds in [&seed_iv, &seed_v, &mped] {
        for p in split_loso(ds).map_err(|e| e.to_string())? {
            p.audit().map_err(|e| e.to_string())?;
            let train_subj: std::collections::BTreeSet<u32> =
                p.train.iter().map(|&i| ds.samples[i].subject).collect();
            let test_subj: std::collections::BTreeSet<u32> =
                p.test.iter().map(|&i| ds.samples[i].subject).collect();
            if !train_subj.is_disjoint(&test_subj) {
                return Err(format!("plan {}: subject leaks across the split", p.name));
            }
            audited += 1;
        }
    }
    Ok(format!("{audited} plans audited with no train/test overlap"))
}

// ── harness ─────────────────────────────────────────────────────────

#[test]
fn acceptance_criteria() {
    let mut outcomes: Vec<Outcome> = Vec::new();
    let mut overfit: Option<OverfitRun> = None;

    let record = |outcomes: &mut Vec<Outcome>, name: &'static str, result: Result<String, String>| {
        let line = match &result {
            Ok(detail) => format!("[PASS] {name}: {detail}"),
            Err(detail) => format!("[FAIL] {name}: {detail}"),
        };
        println!("{line}");
        outcomes.push(Outcome { name, result });
    };

    record(&mut outcomes, "1 gradient integrity", criterion_gradient_integrity());
    record(&mut outcomes, "2 stop-gradient semantics", criterion_stop_gradient());
    record(&mut outcomes, "3 straight-through liveness", criterion_straight_through());
    match criterion_overfit() {
        Ok((detail, run)) => {
            overfit = Some(run);
            record(&mut outcomes, "4 overfit capability", Ok(detail));
        }
        Err(e) => record(&mut outcomes, "4 overfit capability", Err(e)),
    }
    record(&mut outcomes, "5 generalization sanity", criterion_generalization());
    record(&mut outcomes, "6 oracle equivalences", criterion_oracles());
    record(&mut outcomes, "7 ablation correctness", criterion_ablations());
    let usage_result = match &overfit {
        Some(run) => {
            let _ = (run.train_accuracy, run.epochs_used);
            criterion_usage(run)
        }
        None => Err("skipped: overfit run unavailable".into()),
    };
    record(&mut outcomes, "8 codebook usage", usage_result);
    record(&mut outcomes, "9 determinism", criterion_determinism());
    record(&mut outcomes, "10 protocol hygiene", criterion_protocols());

    let failures: Vec<String> = outcomes
        .iter()
        .filter_map(|o| o.result.as_ref().err().map(|e| format!("{}: {e}", o.name)))
        .collect();
    assert!(
        failures.is_empty(),
        "{} of {} criteria failed:\n{}",
        failures.len(),
        outcomes.len(),
        failures.join("\n")
    );
}
