//! Training loop, evaluation, codebook-usage collection, and the binary
//! checkpoint format.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Normalizer};
use crate::metrics::MetricsReport;
use crate::model::MindEegModel;
use crate::splits::SplitPlan;
use crate::tensor::Tensor;
use crate::{Error, ModelConfig, Result};

pub struct TrainOutcome {
    pub model: MindEegModel,
    pub normalizer: Normalizer,
    pub report: MetricsReport,
    pub train_accuracy: f64,
    pub epoch_losses: Vec<f64>,
    /// `(codebook name, histogram rows)` collected during the final test pass.
    pub histograms: Vec<(String, Vec<(usize, u64, f64)>)>,
}

fn sample_tensor(ds: &Dataset, norm: &Normalizer, index: usize) -> Tensor {
    Tensor::new(ds.n, ds.d, norm.apply(&ds.samples[index].features))
}

pub fn predict(model: &MindEegModel, x: &Tensor) -> usize {
    let logits = model.forward(x).logits.data();
    logits
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap()
}

pub fn evaluate(
    model: &MindEegModel,
    ds: &Dataset,
    norm: &Normalizer,
    indices: &[usize],
) -> Result<MetricsReport> {
    if indices.is_empty() {
        return Err(Error::Protocol("evaluate: empty test set".into()));
    }
    let mut truth = Vec::with_capacity(indices.len());
    let mut pred = Vec::with_capacity(indices.len());
    for &i in indices {
        truth.push(ds.samples[i].label as usize);
        pred.push(predict(model, &sample_tensor(ds, norm, i)));
    }
    Ok(MetricsReport::from_predictions(&truth, &pred, ds.classes))
}

/// Quantization-usage histograms after a fresh pass over `indices`.
pub fn collect_usage(
    model: &MindEegModel,
    ds: &Dataset,
    norm: &Normalizer,
    indices: &[usize],
) -> Vec<(String, Vec<(usize, u64, f64)>)> {
    model.reset_usage();
    for &i in indices {
        model.forward(&sample_tensor(ds, norm, i));
    }
    let mut out = vec![("global".to_string(), model.global.codebook.usage_histogram())];
    for (i, enc) in model.intra.encoders.iter().enumerate() {
        out.push((format!("region{i}"), enc.codebook.usage_histogram()));
    }
    out.push(("inter".to_string(), model.inter.encoder.codebook.usage_histogram()));
    out
}

/// Train one model on the plan's train split, evaluate on its test split,
/// and collect codebook usage for the test pass.
pub fn run_training(
    cfg: &ModelConfig,
    ds: &Dataset,
    plan: &SplitPlan,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    plan.audit()?;
    if ds.n != cfg.n || ds.d != cfg.d {
        return Err(Error::Config(format!(
            "dataset is {}x{} but config expects {}x{}",
            ds.n, ds.d, cfg.n, cfg.d
        )));
    }
    if ds.classes != cfg.classes {
        return Err(Error::Config(format!(
            "dataset has {} classes but config expects {}",
            ds.classes, cfg.classes
        )));
    }
    let model = MindEegModel::new(cfg)?;
    let normalizer = Normalizer::fit(ds, &plan.train);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = plan.train.to_vec();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut batch_loss: Option<Tensor> = None;
            for &i in batch {
                let x = sample_tensor(ds, &normalizer, i);
                let out = model.forward(&x);
                let loss = model.integrative_loss(&out, ds.samples[i].label as usize);
                batch_loss = Some(match batch_loss {
                    Some(acc) => acc.add(&loss),
                    None => loss,
                });
            }
            let loss = batch_loss
                .expect("non-empty batch")
                .mul_scalar(1.0 / batch.len() as f64);
            let value = loss.item();
            if !value.is_finite() {
                let culprit = loss.first_nan_op().unwrap_or("unknown");
                return Err(Error::Training(format!(
                    "non-finite loss at epoch {epoch}; first non-finite op: {culprit}"
                )));
            }
            loss.backward();
            model.sgd_step(cfg.lr);
            epoch_loss += value * batch.len() as f64;
        }
        let mean_loss = epoch_loss / order.len() as f64;
        epoch_losses.push(mean_loss);
        model.revive_codebooks();
        on_epoch(epoch, mean_loss);
    }

    let train_report = evaluate(&model, ds, &normalizer, &plan.train)?;
    let report = evaluate(&model, ds, &normalizer, &plan.test)?;
    let histograms = collect_usage(&model, ds, &normalizer, &plan.test);
    Ok(TrainOutcome {
        model,
        normalizer,
        report,
        train_accuracy: train_report.accuracy,
        epoch_losses,
        histograms,
    })
}

// ── checkpoint format ────────────────────────────────────────────────
// Magic `MEEG`, version u32, length-prefixed UTF-8 config text, then a u32
// parameter count followed by each named parameter as (length-prefixed name,
// rows u32, cols u32, little-endian f64 data). The normalizer travels as two
// extra entries named `norm.mean` and `norm.std`.

const CKPT_MAGIC: &[u8; 4] = b"MEEG";
const CKPT_VERSION: u32 = 1;

pub fn write_checkpoint(
    w: &mut impl Write,
    model: &MindEegModel,
    norm: &Normalizer,
) -> Result<()> {
    w.write_all(CKPT_MAGIC)?;
    w.write_all(&CKPT_VERSION.to_le_bytes())?;
    let cfg_text = model.cfg.to_text();
    w.write_all(&(cfg_text.len() as u32).to_le_bytes())?;
    w.write_all(cfg_text.as_bytes())?;
    let mut entries: Vec<(String, usize, usize, Vec<f64>)> = model
        .named_params()
        .into_iter()
        .map(|(name, t)| {
            let (r, c) = t.shape();
            (name, r, c, t.data())
        })
        .collect();
    entries.push(("norm.mean".into(), 1, norm.mean.len(), norm.mean.clone()));
    entries.push(("norm.std".into(), 1, norm.std.len(), norm.std.clone()));
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (name, rows, cols, data) in entries {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(rows as u32).to_le_bytes())?;
        w.write_all(&(cols as u32).to_le_bytes())?;
        for v in data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn save_checkpoint(path: &Path, model: &MindEegModel, norm: &Normalizer) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(&mut f, model, norm)
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<(MindEegModel, Normalizer)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CKPT_MAGIC {
        return Err(Error::Format(format!(
            "bad checkpoint magic {magic:?}; expected {CKPT_MAGIC:?}"
        )));
    }
    let version = read_u32(r)?;
    if version != CKPT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let cfg_len = read_u32(r)? as usize;
    let mut cfg_buf = vec![0u8; cfg_len];
    r.read_exact(&mut cfg_buf)?;
    let cfg_text = String::from_utf8(cfg_buf)
        .map_err(|_| Error::Format("checkpoint config is not UTF-8".into()))?;
    let cfg = ModelConfig::parse(&cfg_text)?;
    let model = MindEegModel::new(&cfg)?;
    let mut by_name: std::collections::HashMap<String, Tensor> =
        model.named_params().into_iter().collect();

    let count = read_u32(r)? as usize;
    let mut norm_mean: Option<Vec<f64>> = None;
    let mut norm_std: Option<Vec<f64>> = None;
    for _ in 0..count {
        let name_len = read_u32(r)? as usize;
        let mut name_buf = vec![0u8; name_len];
        r.read_exact(&mut name_buf)?;
        let name = String::from_utf8(name_buf)
            .map_err(|_| Error::Format("checkpoint parameter name is not UTF-8".into()))?;
        let rows = read_u32(r)? as usize;
        let cols = read_u32(r)? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            let mut buf = [0u8; 8];
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        match name.as_str() {
            "norm.mean" => norm_mean = Some(data),
            "norm.std" => norm_std = Some(data),
            _ => {
                let t = by_name.remove(&name).ok_or_else(|| {
                    Error::Format(format!("checkpoint has unknown parameter `{name}`"))
                })?;
                if t.shape() != (rows, cols) {
                    return Err(Error::Format(format!(
                        "parameter `{name}`: checkpoint shape {rows}x{cols} does not match model {:?}",
                        t.shape()
                    )));
                }
                t.set_data(&data);
            }
        }
    }
    if !by_name.is_empty() {
        let mut missing: Vec<&String> = by_name.keys().collect();
        missing.sort();
        return Err(Error::Format(format!(
            "checkpoint is missing parameters: {missing:?}"
        )));
    }
    let (mean, std) = match (norm_mean, norm_std) {
        (Some(m), Some(s)) if m.len() == s.len() && m.len() == cfg.n * cfg.d => (m, s),
        _ => {
            return Err(Error::Format(
                "checkpoint is missing or has malformed normalization statistics".into(),
            ))
        }
    };
    Ok((model, Normalizer { mean, std }))
}

pub fn load_checkpoint(path: &Path) -> Result<(MindEegModel, Normalizer)> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_checkpoint(&mut f)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, SynthSpec};

    fn tiny_cfg() -> ModelConfig {
        ModelConfig {
            n: 8,
            d: 3,
            q: 2,
            k1: 4,
            k2: 4,
            k3: 4,
            embed_dim: 6,
            global_out: 8,
            intra_out: 8,
            inter_out: 6,
            head_hidden1: 16,
            head_hidden2: 8,
            classes: 3,
            epochs: 3,
            batch_size: 8,
            ..Default::default()
        }
    }

    fn tiny_data() -> Dataset {
        synth_generate(&SynthSpec {
            n: 8,
            d: 3,
            ..SynthSpec::new(5, 1, 3, 6)
        })
    }

    fn whole_plan(ds: &Dataset) -> SplitPlan {
        let half = ds.len() / 2;
        SplitPlan {
            name: "test".into(),
            train: (0..half).collect(),
            test: (half..ds.len()).collect(),
        }
    }

    #[test]
    fn training_runs_and_reports() {
        let ds = tiny_data();
        let out = run_training(&tiny_cfg(), &ds, &whole_plan(&ds), |_, _| {}).unwrap();
        assert_eq!(out.epoch_losses.len(), 3);
        assert!(out.report.total > 0);
        for (_, h) in &out.histograms {
            let total: f64 = h.iter().map(|r| r.2).sum();
            assert!((total - 100.0).abs() < 0.01);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let ds = tiny_data();
        let plan = whole_plan(&ds);
        let a = run_training(&tiny_cfg(), &ds, &plan, |_, _| {}).unwrap();
        let b = run_training(&tiny_cfg(), &ds, &plan, |_, _| {}).unwrap();
        assert_eq!(a.epoch_losses, b.epoch_losses);
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        write_checkpoint(&mut buf_a, &a.model, &a.normalizer).unwrap();
        write_checkpoint(&mut buf_b, &b.model, &b.normalizer).unwrap();
        assert_eq!(buf_a, buf_b, "checkpoints must be bitwise identical");
    }

    #[test]
    fn checkpoint_roundtrip_preserves_predictions() {
        let ds = tiny_data();
        let plan = whole_plan(&ds);
        let out = run_training(&tiny_cfg(), &ds, &plan, |_, _| {}).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &out.model, &out.normalizer).unwrap();
        let (loaded, norm) = read_checkpoint(&mut buf.as_slice()).unwrap();
        for &i in &plan.test {
            let x = sample_tensor(&ds, &norm, i);
            assert_eq!(predict(&out.model, &x), predict(&loaded, &x));
        }
    }

    #[test]
    fn checkpoint_rejects_garbage() {
        assert!(read_checkpoint(&mut &b"XXXX"[..]).is_err());
        let mut truncated = Vec::new();
        {
            let ds = tiny_data();
            let out = run_training(&tiny_cfg(), &ds, &whole_plan(&ds), |_, _| {}).unwrap();
            write_checkpoint(&mut truncated, &out.model, &out.normalizer).unwrap();
        }
        truncated.truncate(truncated.len() / 2);
        assert!(read_checkpoint(&mut truncated.as_slice()).is_err());
    }

    #[test]
    fn mismatched_dataset_rejected() {
        let ds = tiny_data();
        let cfg = ModelConfig {
            n: 9,
            ..tiny_cfg()
        };
        assert!(run_training(&cfg, &ds, &whole_plan(&ds), |_, _| {}).is_err());
    }
}
