//! Sample ingestion: the binary feature-file format, CSV import, per-dimension
//! z-score normalization, and the synthetic class-conditional generator used
//! in place of the licensed EEG datasets.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

/// One 1-second sample: a node-by-band feature matrix plus identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct EEGSample {
    /// Row-major `n x d` features.
    pub features: Vec<f64>,
    pub label: u32,
    pub subject: u32,
    pub session: u32,
    pub trial: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n: usize,
    pub d: usize,
    pub classes: usize,
    pub samples: Vec<EEGSample>,
}

const MAGIC: &[u8; 4] = b"MEFX";
const VERSION: u32 = 1;

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn subjects(&self) -> Vec<u32> {
        let mut s: Vec<u32> = self.samples.iter().map(|x| x.subject).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    fn validate(&self) -> Result<()> {
        let width = self.n * self.d;
        for (i, s) in self.samples.iter().enumerate() {
            if s.features.len() != width {
                return Err(Error::Format(format!(
                    "sample {i}: expected {width} features, found {}",
                    s.features.len()
                )));
            }
            if s.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::Format(format!("sample {i}: non-finite feature value")));
            }
            if s.label as usize >= self.classes {
                return Err(Error::Format(format!(
                    "sample {i}: label {} out of range for {} classes",
                    s.label, self.classes
                )));
            }
        }
        Ok(())
    }

    // ── binary format ────────────────────────────────────────────────
    // Header: magic `MEFX`, version u32, n u32, d u32, classes u32,
    // sample count u64. Per sample: subject u32, session u32, trial u32,
    // label u32, then n*d little-endian f64 features.

    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&(self.d as u32).to_le_bytes())?;
        w.write_all(&(self.classes as u32).to_le_bytes())?;
        w.write_all(&(self.samples.len() as u64).to_le_bytes())?;
        for s in &self.samples {
            for v in [s.subject, s.session, s.trial, s.label] {
                w.write_all(&v.to_le_bytes())?;
            }
            for f in &s.features {
                w.write_all(&f.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut f)
    }

    pub fn read(r: &mut impl Read) -> Result<Dataset> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format(format!(
                "bad magic {magic:?}; expected {MAGIC:?}"
            )));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported feature-file version {version}")));
        }
        let n = read_u32(r)? as usize;
        let d = read_u32(r)? as usize;
        let classes = read_u32(r)? as usize;
        let count = read_u64(r)? as usize;
        if n == 0 || d == 0 || classes == 0 {
            return Err(Error::Format("header dimensions must be positive".into()));
        }
        let mut samples = Vec::with_capacity(count);
        for _ in 0..count {
            let subject = read_u32(r)?;
            let session = read_u32(r)?;
            let trial = read_u32(r)?;
            let label = read_u32(r)?;
            let mut features = Vec::with_capacity(n * d);
            for _ in 0..n * d {
                let mut buf = [0u8; 8];
                r.read_exact(&mut buf)?;
                features.push(f64::from_le_bytes(buf));
            }
            samples.push(EEGSample {
                features,
                label,
                subject,
                session,
                trial,
            });
        }
        let ds = Dataset {
            n,
            d,
            classes,
            samples,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Dataset::read(&mut f)
    }

    // ── CSV import ───────────────────────────────────────────────────
    // Inspection-friendly form: header `subject,session,trial,label,f0,...`,
    // one row per sample.

    pub fn from_csv(text: &str, n: usize, d: usize, classes: usize) -> Result<Dataset> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty CSV".into()))?;
        let expected_cols = 4 + n * d;
        if header.split(',').count() != expected_cols {
            return Err(Error::Format(format!(
                "CSV header has {} columns; expected {expected_cols}",
                header.split(',').count()
            )));
        }
        let mut samples = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != expected_cols {
                return Err(Error::Format(format!(
                    "CSV line {}: {} columns, expected {expected_cols}",
                    lineno + 2,
                    fields.len()
                )));
            }
            let parse_u32 = |s: &str, what: &str| {
                s.trim().parse::<u32>().map_err(|_| {
                    Error::Format(format!("CSV line {}: bad {what} `{s}`", lineno + 2))
                })
            };
            let subject = parse_u32(fields[0], "subject")?;
            let session = parse_u32(fields[1], "session")?;
            let trial = parse_u32(fields[2], "trial")?;
            let label = parse_u32(fields[3], "label")?;
            let mut features = Vec::with_capacity(n * d);
            for f in &fields[4..] {
                let v: f64 = f.trim().parse().map_err(|_| {
                    Error::Format(format!("CSV line {}: bad feature `{f}`", lineno + 2))
                })?;
                features.push(v);
            }
            samples.push(EEGSample {
                features,
                label,
                subject,
                session,
                trial,
            });
        }
        let ds = Dataset {
            n,
            d,
            classes,
            samples,
        };
        ds.validate()?;
        Ok(ds)
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

// ── normalization ────────────────────────────────────────────────────

/// Per-dimension mean and standard deviation, computed on the training split
/// only and applied everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Fit on the listed training indices.
    pub fn fit(ds: &Dataset, train: &[usize]) -> Normalizer {
        let width = ds.n * ds.d;
        let mut mean = vec![0.0; width];
        let count = train.len().max(1) as f64;
        for &i in train {
            for (m, &v) in mean.iter_mut().zip(&ds.samples[i].features) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= count;
        }
        let mut var = vec![0.0; width];
        for &i in train {
            for (j, &v) in ds.samples[i].features.iter().enumerate() {
                let dv = v - mean[j];
                var[j] += dv * dv;
            }
        }
        let std = var
            .iter()
            .map(|v| {
                let s = (v / count).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Normalizer { mean, std }
    }

    pub fn apply(&self, features: &[f64]) -> Vec<f64> {
        features
            .iter()
            .enumerate()
            .map(|(j, &v)| (v - self.mean[j]) / self.std[j])
            .collect()
    }
}

// ── synthetic generator ──────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub seed: u64,
    pub subjects: usize,
    pub sessions: usize,
    pub classes: usize,
    /// Trials per class per subject per session.
    pub trials_per_class: usize,
    /// Samples drawn per trial.
    pub samples_per_trial: usize,
    pub n: usize,
    pub d: usize,
    /// Scale of the structured (covariance-template) noise.
    pub noise: f64,
}

impl SynthSpec {
    pub fn new(seed: u64, subjects: usize, classes: usize, samples_per_class: usize) -> SynthSpec {
        SynthSpec {
            seed,
            subjects,
            sessions: 1,
            classes,
            trials_per_class: samples_per_class,
            samples_per_trial: 1,
            n: 62,
            d: 5,
            noise: 0.4,
        }
    }
}

/// Class-conditional generator: each class owns a mean template and a latent
/// `n x n` covariance factor; each subject applies a random affine
/// perturbation. Labels stay recoverable by construction.
pub fn synth_generate(spec: &SynthSpec) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, d) = (spec.n, spec.d);
    let width = n * d;
    let normal = StandardNormal;

    // per-class structure
    let mut class_mean = Vec::with_capacity(spec.classes);
    let mut class_cov = Vec::with_capacity(spec.classes);
    let mut band_offset = Vec::with_capacity(spec.classes);
    for _ in 0..spec.classes {
        let mean: Vec<f64> = (0..width)
            .map(|_| <StandardNormal as Distribution<f64>>::sample(&normal, &mut rng))
            .collect();
        let cov: Vec<f64> = (0..n * n)
            .map(|_| {
                <StandardNormal as Distribution<f64>>::sample(&normal, &mut rng) / (n as f64).sqrt()
            })
            .collect();
        let offsets: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect();
        class_mean.push(mean);
        class_cov.push(cov);
        band_offset.push(offsets);
    }

    // per-subject affine perturbation
    let mut subj_scale = Vec::with_capacity(spec.subjects);
    let mut subj_shift = Vec::with_capacity(spec.subjects);
    for _ in 0..spec.subjects {
        subj_scale.push(rng.gen_range(0.85..1.15));
        let shift: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.2..0.2)).collect();
        subj_shift.push(shift);
    }

    let mut samples = Vec::new();
    for subject in 0..spec.subjects {
        for session in 0..spec.sessions {
            // trials interleave classes so any prefix covers all classes
            let trials = spec.classes * spec.trials_per_class;
            for trial in 0..trials {
                let class = trial % spec.classes;
                for _ in 0..spec.samples_per_trial {
                    let z: Vec<f64> = (0..width)
                        .map(|_| <StandardNormal as Distribution<f64>>::sample(&normal, &mut rng))
                        .collect();
                    // structured noise: covariance factor mixes channels
                    let mut noise = vec![0.0; width];
                    let cov = &class_cov[class];
                    for i in 0..n {
                        for b in 0..d {
                            let mut acc = 0.0;
                            for k in 0..n {
                                acc += cov[i * n + k] * z[k * d + b];
                            }
                            noise[i * d + b] = acc;
                        }
                    }
                    let mut features = Vec::with_capacity(width);
                    for i in 0..n {
                        for b in 0..d {
                            let j = i * d + b;
                            let v = class_mean[class][j]
                                + band_offset[class][b]
                                + spec.noise * noise[j];
                            features.push(subj_scale[subject] * v + subj_shift[subject][b]);
                        }
                    }
                    samples.push(EEGSample {
                        features,
                        label: class as u32,
                        subject: subject as u32,
                        session: session as u32,
                        trial: trial as u32,
                    });
                }
            }
        }
    }
    Dataset {
        n,
        d,
        classes: spec.classes,
        samples,
    }
}

/// Nearest-centroid accuracy oracle (fit and score on the whole dataset).
pub fn nearest_centroid_accuracy(ds: &Dataset) -> f64 {
    let width = ds.n * ds.d;
    let mut centroids = vec![vec![0.0; width]; ds.classes];
    let mut counts = vec![0usize; ds.classes];
    for s in &ds.samples {
        counts[s.label as usize] += 1;
        for (c, &v) in centroids[s.label as usize].iter_mut().zip(&s.features) {
            *c += v;
        }
    }
    for (c, &n) in centroids.iter_mut().zip(&counts) {
        if n > 0 {
            for v in c.iter_mut() {
                *v /= n as f64;
            }
        }
    }
    let mut correct = 0;
    for s in &ds.samples {
        let mut best = 0;
        let mut bd = f64::INFINITY;
        for (k, c) in centroids.iter().enumerate() {
            let d: f64 = c
                .iter()
                .zip(&s.features)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum();
            if d < bd {
                bd = d;
                best = k;
            }
        }
        if best == s.label as usize {
            correct += 1;
        }
    }
    correct as f64 / ds.len() as f64
}
