//! Noise-level probe: a logistic classifier telling clean frames from
//! timbre-swapped ones after both are corrupted to a given noise fraction.
//! The smallest fraction at which it drops to chance is the partial-noise
//! fraction used by the baselines.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mi::{build_mask, ChannelMask, MiReport};
use crate::schedule::Schedule;
use crate::world::World;

/// Input features of the probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeFeatures {
    /// Frame vector and log sigma.
    Linear,
    /// Adds all pairwise products of the frame's top principal components.
    Quadratic { components: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeParams {
    pub frames_per_class: usize,
    /// Fraction of channels swapped, taken from the top of the MI ranking.
    pub swap_k: f64,
    pub features: ProbeFeatures,
    pub holdout: f64,
    pub l2: f64,
    pub max_iter: usize,
    pub f_grid: Vec<f64>,
    pub chance_band: f64,
}

impl Default for ProbeParams {
    fn default() -> Self {
        Self {
            frames_per_class: 5_000,
            swap_k: 0.375,
            features: ProbeFeatures::Quadratic { components: 16 },
            holdout: 0.2,
            l2: 1.0,
            max_iter: 50,
            f_grid: (1..=10).map(|i| i as f64 / 10.0).collect(),
            chance_band: 0.03,
        }
    }
}

/// For each frame, replaces the timbre-masked channels with those of a random
/// frame carrying a different instrument label.
pub fn make_swapped<R: Rng>(
    frames: &DMatrix<f64>,
    labels: &[usize],
    mask: &ChannelMask,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let n = frames.ncols();
    if labels.len() != n {
        return Err(invalid(format!("{} labels for {n} frames", labels.len())));
    }
    if mask.channels() != frames.nrows() {
        return Err(invalid("mask and frames disagree on channel count"));
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::Degenerate("swapping needs at least two instruments".into()));
    }
    let chans = mask.timbre_channels();
    let mut out = frames.clone();
    for t in 0..n {
        let donor = loop {
            let j = rng.gen_range(0..n);
            if labels[j] != labels[t] {
                break j;
            }
        };
        for &c in &chans {
            out[(c, t)] = frames[(c, donor)];
        }
    }
    Ok(out)
}

/// Maps noisy frames to probe features.
#[derive(Debug, Clone)]
struct FeatureMap {
    kind: ProbeFeatures,
    centre: DVector<f64>,
    /// rows are principal directions
    basis: DMatrix<f64>,
}

impl FeatureMap {
    fn fit(kind: ProbeFeatures, clean: &DMatrix<f64>) -> Result<Self> {
        let c = clean.nrows();
        let centre = clean.column_mean();
        let basis = match kind {
            ProbeFeatures::Linear => DMatrix::zeros(0, c),
            ProbeFeatures::Quadratic { components } => {
                if components == 0 || components > c {
                    return Err(invalid(format!("component count {components} out of range")));
                }
                let mut x = clean.clone();
                for mut col in x.column_iter_mut() {
                    col -= &centre;
                }
                let cov = &x * x.transpose() / (clean.ncols().max(2) - 1) as f64;
                let eig = cov.symmetric_eigen();
                let mut order: Vec<usize> = (0..c).collect();
                order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
                DMatrix::from_fn(components, c, |r, ch| eig.eigenvectors[(ch, order[r])])
            }
        };
        Ok(Self { kind, centre, basis })
    }

    fn dim(&self, c: usize) -> usize {
        let d = self.basis.nrows();
        c + d * (d + 1) / 2 + 1
    }

    /// Samples x features.
    fn apply(&self, z: &DMatrix<f64>, log_sigma: f64) -> DMatrix<f64> {
        let c = z.nrows();
        let d = self.basis.nrows();
        let mut out = DMatrix::zeros(z.ncols(), self.dim(c));
        let mut centred = z.clone();
        for mut col in centred.column_iter_mut() {
            col -= &self.centre;
        }
        let proj = &self.basis * &centred;
        for t in 0..z.ncols() {
            for ch in 0..c {
                out[(t, ch)] = z[(ch, t)];
            }
            let mut at = c;
            if matches!(self.kind, ProbeFeatures::Quadratic { .. }) {
                for i in 0..d {
                    for j in i..d {
                        out[(t, at)] = proj[(i, t)] * proj[(j, t)];
                        at += 1;
                    }
                }
            }
            out[(t, at)] = log_sigma;
        }
        out
    }
}

/// L2-regularized logistic regression on standardized features, fitted by
/// damped Newton steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel {
    /// Bias first, then one weight per standardized feature.
    pub weights: Vec<f64>,
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    pub iterations: usize,
    pub final_loss: f64,
    pub converged: bool,
}

impl ProbeModel {
    pub fn fit(x: &DMatrix<f64>, y: &[bool], l2: f64, max_iter: usize) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 || y.len() != n {
            return Err(invalid("training set is empty or mislabeled"));
        }
        let mean: Vec<f64> = (0..p).map(|j| x.column(j).mean()).collect();
        let scale: Vec<f64> = (0..p)
            .map(|j| {
                let sd = x.column(j).variance().sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        let xs = standardize(x, &mean, &scale);
        let target = DVector::from_iterator(n, y.iter().map(|&b| b as u8 as f64));
        let mut w = DVector::zeros(p + 1);
        let loss_at = |w: &DVector<f64>| -> f64 {
            let eta = &xs * w;
            let mut l = 0.0;
            for i in 0..n {
                l += softplus(eta[i]) - target[i] * eta[i];
            }
            l + 0.5 * l2 * w.rows(1, p).norm_squared()
        };
        let mut loss = loss_at(&w);
        let mut converged = false;
        let mut iterations = 0;
        for _ in 0..max_iter {
            iterations += 1;
            let eta = &xs * &w;
            let prob = eta.map(sigmoid);
            let mut grad = xs.tr_mul(&(&prob - &target));
            let mut weighted = xs.clone();
            for i in 0..n {
                let s = (prob[i] * (1.0 - prob[i])).max(1e-12).sqrt();
                weighted.row_mut(i).scale_mut(s);
            }
            let mut hess = weighted.tr_mul(&weighted);
            for j in 1..=p {
                grad[j] += l2 * w[j];
                hess[(j, j)] += l2;
            }
            hess[(0, 0)] += 1e-9;
            let Some(chol) = hess.cholesky() else {
                return Err(Error::Degenerate("probe Hessian is not positive definite".into()));
            };
            let step = chol.solve(&grad);
            let mut t = 1.0;
            let mut next = &w - &step * t;
            let mut next_loss = loss_at(&next);
            while next_loss > loss && t > 1e-6 {
                t *= 0.5;
                next = &w - &step * t;
                next_loss = loss_at(&next);
            }
            let gain = loss - next_loss;
            if next_loss <= loss {
                w = next;
                loss = next_loss;
            }
            if gain.abs() <= 1e-10 * (1.0 + loss.abs()) {
                converged = true;
                break;
            }
        }
        Ok(Self {
            weights: w.iter().copied().collect(),
            feature_mean: mean,
            feature_scale: scale,
            iterations,
            final_loss: loss,
            converged,
        })
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<bool> {
        let xs = standardize(x, &self.feature_mean, &self.feature_scale);
        let w = DVector::from_column_slice(&self.weights);
        (&xs * w).iter().map(|e| *e > 0.0).collect()
    }

    pub fn accuracy(&self, x: &DMatrix<f64>, y: &[bool]) -> f64 {
        let hits = self.predict(x).iter().zip(y).filter(|(a, b)| a == b).count();
        hits as f64 / y.len().max(1) as f64
    }
}

fn standardize(x: &DMatrix<f64>, mean: &[f64], scale: &[f64]) -> DMatrix<f64> {
    let (n, p) = x.shape();
    DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { (x[(i, j - 1)] - mean[j - 1]) / scale[j - 1] })
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn softplus(v: f64) -> f64 {
    if v > 30.0 {
        v
    } else {
        v.exp().ln_1p()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub f: f64,
    pub step: usize,
    pub sigma: f64,
    pub accuracy: f64,
    pub n_heldout: usize,
    pub final_loss: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeCurve {
    pub points: Vec<CurvePoint>,
}

impl ProbeCurve {
    /// Columns `f, accuracy, n_heldout`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["f", "accuracy", "n_heldout"])?;
        for p in &self.points {
            w.write_record([format!("{:.4}", p.f), format!("{:.6}", p.accuracy), p.n_heldout.to_string()])?;
        }
        w.flush().map_err(|e| Error::Io { path: "<csv>".into(), source: e })?;
        Ok(())
    }
}

/// Trains one fresh probe per noise fraction and reports held-out accuracy.
/// `flip_labels` shuffles the class labels, which should leave the probe at chance.
pub fn train_probe(
    clean: &DMatrix<f64>,
    swapped: &DMatrix<f64>,
    s: &Schedule,
    params: &ProbeParams,
    seed: u64,
) -> Result<ProbeCurve> {
    train_probe_with(clean, swapped, s, params, seed, false)
}

pub fn train_probe_with(
    clean: &DMatrix<f64>,
    swapped: &DMatrix<f64>,
    s: &Schedule,
    params: &ProbeParams,
    seed: u64,
    flip_labels: bool,
) -> Result<ProbeCurve> {
    if clean.shape() != swapped.shape() {
        return Err(invalid("clean and swapped sets must have the same shape"));
    }
    if params.f_grid.is_empty() {
        return Err(Error::Empty("noise fraction grid".into()));
    }
    if !(params.holdout > 0.0 && params.holdout < 1.0) {
        return Err(invalid("holdout must lie in (0, 1)"));
    }
    let n = clean.ncols();
    let n_test = ((n as f64) * params.holdout).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(invalid("too few frames for the split"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let (test_idx, train_idx) = order.split_at(n_test);
    let pick = |m: &DMatrix<f64>, idx: &[usize]| m.select_columns(idx);
    let join = |a: DMatrix<f64>, b: DMatrix<f64>| {
        let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
        out.columns_mut(0, a.ncols()).copy_from(&a);
        out.columns_mut(a.ncols(), b.ncols()).copy_from(&b);
        out
    };
    let train = join(pick(clean, train_idx), pick(swapped, train_idx));
    let test = join(pick(clean, test_idx), pick(swapped, test_idx));
    let labels = |m: usize| -> Vec<bool> { (0..2 * m).map(|i| i >= m).collect() };
    let mut y_train = labels(train_idx.len());
    let mut y_test = labels(n_test);
    if flip_labels {
        y_train.shuffle(&mut rng);
        y_test.shuffle(&mut rng);
    }
    let map = FeatureMap::fit(params.features, &pick(clean, train_idx))?;

    let points = params
        .f_grid
        .par_iter()
        .enumerate()
        .map(|(i, &f)| {
            let step = s.step_for_fraction(f)?;
            let sigma = s.sigma(step);
            let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
            noise_rng.set_stream(i as u64 + 1);
            let corrupt = |m: &DMatrix<f64>, r: &mut ChaCha8Rng| {
                m.map(|v| v + sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, r))
            };
            let xtr = map.apply(&corrupt(&train, &mut noise_rng), sigma.ln());
            let xte = map.apply(&corrupt(&test, &mut noise_rng), sigma.ln());
            let model = ProbeModel::fit(&xtr, &y_train, params.l2, params.max_iter)?;
            Ok(CurvePoint {
                f,
                step,
                sigma,
                accuracy: model.accuracy(&xte, &y_test),
                n_heldout: y_test.len(),
                final_loss: model.final_loss,
                converged: model.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProbeCurve { points })
}

/// Outcome of [`select_f_par`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub f: f64,
    /// False when no grid point reached the chance band and the largest
    /// fraction was returned instead.
    pub at_chance: bool,
}

/// Smallest fraction whose accuracy lies within `delta` of 0.5.
pub fn select_f_par(curve: &ProbeCurve, delta: f64) -> Result<Selection> {
    let Some(last) = curve.points.last() else {
        return Err(Error::Empty("probe curve".into()));
    };
    if curve.points.windows(2).any(|w| w[1].f < w[0].f) {
        return Err(invalid("probe curve must be ordered by fraction"));
    }
    Ok(curve
        .points
        .iter()
        .find(|p| (p.accuracy - 0.5).abs() <= delta)
        .map(|p| Selection { f: p.f, at_chance: true })
        .unwrap_or(Selection { f: last.f, at_chance: false }))
}

/// Full probe run on a world: sample frames, swap the top-MI channels,
/// train across the noise grid.
pub fn run_probe(
    world: &World,
    report: &MiReport,
    s: &Schedule,
    params: &ProbeParams,
    seed: u64,
) -> Result<ProbeCurve> {
    let set = world.sample_frames(params.frames_per_class, seed);
    let mask = build_mask(report, params.swap_k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let swapped = make_swapped(&set.frames, &set.instruments, &mask, &mut rng)?;
    train_probe(&set.frames, &swapped, s, params, seed)
}
