//! Metric analogs, the evaluation harness and the hyperparameter grid.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::edits::{edit_with_inversion, invert_context, EditConfig, Strategy};
use crate::error::{invalid, Error, Result};
use crate::mi::{build_mask, ChannelMask, MiReport};
use crate::sampler::{Inversion, Solver};
use crate::schedule::Schedule;
use crate::world::{LatentClip, World};

/// Squared Fréchet distance between Gaussian fits of two frame sets
/// (columns are frames): `|m_a - m_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2))`.
pub fn frechet_gaussian(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != b.nrows() {
        return Err(invalid(format!("frame sets have {} and {} channels", a.nrows(), b.nrows())));
    }
    let c = a.nrows();
    for (name, m) in [("first", a), ("second", b)] {
        if m.ncols() < c + 1 {
            return Err(Error::Empty(format!("{name} set has {} frames, needs at least {}", m.ncols(), c + 1)));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!("{name} set has non-finite values")));
        }
    }
    let (ma, sa) = moments(a);
    let (mb, sb) = moments(b);
    let root_a = psd_sqrt(&sa);
    let inner = &root_a * &sb * &root_a;
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross: f64 = SymmetricEigen::new(inner).eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    let d2 = (ma - mb).norm_squared() + sa.trace() + sb.trace() - 2.0 * cross;
    Ok(d2.max(0.0))
}

fn moments(x: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.ncols() as f64;
    let mean = x.column_mean();
    let mut centred = x.clone();
    for mut col in centred.column_iter_mut() {
        col -= &mean;
    }
    let cov = &centred * centred.transpose() / (n - 1.0);
    let cov = (&cov + cov.transpose()) * 0.5;
    (mean, cov)
}

fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new(m.clone());
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|l| l.max(0.0).sqrt()));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

fn check_lengths(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(invalid(format!("track lengths differ: {} vs {}", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return Err(Error::Empty("pitch tracks are empty".into()));
    }
    Ok(())
}

/// Frames where the track changes value.
pub fn onsets(track: &[usize]) -> Vec<usize> {
    (1..track.len()).filter(|&t| track[t] != track[t - 1]).collect()
}

/// F1 of predicted against true onsets under a maximum one-to-one matching
/// within `tol` frames.
pub fn onset_f1(pred: &[usize], truth: &[usize], tol: usize) -> Result<f64> {
    check_lengths(pred, truth)?;
    let p = onsets(pred);
    let t = onsets(truth);
    if p.is_empty() && t.is_empty() {
        return Ok(1.0);
    }
    // both lists are sorted; taking the earliest reachable true onset is optimal
    let (mut j, mut hits) = (0, 0usize);
    for &x in &p {
        while j < t.len() && t[j] + tol < x {
            j += 1;
        }
        if j < t.len() && t[j] <= x + tol {
            hits += 1;
            j += 1;
        }
    }
    if hits == 0 {
        return Ok(0.0);
    }
    let precision = hits as f64 / p.len() as f64;
    let recall = hits as f64 / t.len() as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Mean absolute pitch-class distance per frame.
pub fn dpd_analog(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let total: usize = pred.iter().zip(truth).map(|(a, b)| a.abs_diff(*b)).sum();
    Ok(total as f64 / pred.len() as f64)
}

/// Expected `|U - V|` for independent uniform classes in `0..p`.
pub fn random_dpd(p: usize) -> f64 {
    (p * p - 1) as f64 / (3 * p) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipMetrics {
    pub class_sim: f64,
    pub dpd: f64,
    pub onset_f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub fad_analog: f64,
    pub class_sim: f64,
    pub dpd_analog: f64,
    pub onset_f1: f64,
    pub n_clips: usize,
}

/// One edited clip: the context it came from, the edit output and the target.
#[derive(Debug, Clone)]
pub struct EditedClip<'a> {
    pub source: &'a LatentClip,
    pub output: &'a DMatrix<f64>,
    pub target: usize,
}

/// Per-clip metrics. Pitch reference is the decoded source clip, so an
/// untouched clip scores a perfect pitch distance and onset F1.
pub fn clip_metrics(w: &World, source: &DMatrix<f64>, output: &DMatrix<f64>, target: usize) -> Result<ClipMetrics> {
    if source.shape() != output.shape() {
        return Err(invalid("output and source clip shapes differ"));
    }
    let reference = w.decode_pitch(source)?;
    let pred = w.decode_pitch(output)?;
    Ok(ClipMetrics {
        class_sim: w.class_posterior(output, target)?,
        dpd: dpd_analog(&pred, &reference)?,
        onset_f1: onset_f1(&pred, &reference, 1)?,
    })
}

/// Fresh frames of each target class, one clip per edit, for the FAD reference.
pub fn reference_frames(w: &World, targets: &[usize], frames: usize, seed: u64) -> Result<DMatrix<f64>> {
    let mut blocks = Vec::with_capacity(targets.len());
    for (j, &t) in targets.iter().enumerate() {
        let mut rng = stream_rng(seed, j as u64);
        blocks.push(w.sample_clip_with(frames, Some(t), &mut rng)?.data);
    }
    hconcat(&blocks)
}

fn hconcat(blocks: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let rows = blocks.first().ok_or_else(|| Error::Empty("no clips".into()))?.nrows();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.columns_mut(at, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    Ok(out)
}

fn summarize(per_clip: &[ClipMetrics], fad: f64) -> MetricsReport {
    let n = per_clip.len() as f64;
    let mean = |f: fn(&ClipMetrics) -> f64| per_clip.iter().map(f).sum::<f64>() / n;
    MetricsReport {
        fad_analog: fad,
        class_sim: mean(|m| m.class_sim),
        dpd_analog: mean(|m| m.dpd),
        onset_f1: mean(|m| m.onset_f1),
        n_clips: per_clip.len(),
    }
}

/// Scores a batch of edits against the given FAD reference frames.
pub fn evaluate_with_reference(
    w: &World,
    edits: &[EditedClip<'_>],
    reference: &DMatrix<f64>,
) -> Result<(MetricsReport, Vec<ClipMetrics>)> {
    if edits.is_empty() {
        return Err(Error::Empty("no edits to evaluate".into()));
    }
    let per_clip =
        edits.iter().map(|e| clip_metrics(w, &e.source.data, e.output, e.target)).collect::<Result<Vec<_>>>()?;
    let outputs: Vec<DMatrix<f64>> = edits.iter().map(|e| e.output.clone()).collect();
    let fad = frechet_gaussian(&hconcat(&outputs)?, reference)?;
    Ok((summarize(&per_clip, fad), per_clip))
}

/// Scores a batch of edits; the FAD reference is drawn fresh from the target classes.
pub fn evaluate_edit(w: &World, edits: &[EditedClip<'_>], seed: u64) -> Result<(MetricsReport, Vec<ClipMetrics>)> {
    let frames = edits.first().ok_or_else(|| Error::Empty("no edits to evaluate".into()))?.output.ncols();
    let targets: Vec<usize> = edits.iter().map(|e| e.target).collect();
    let reference = reference_frames(w, &targets, frames, seed)?;
    evaluate_with_reference(w, edits, &reference)
}

/// A ChaCha8 generator on its own stream of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// One grid cell. `f` is `f_par` for the partial-noise baselines and
/// `f_clamp` for mi-inpaint; both are unused by ddim-inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub method: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<f64>,
}

impl GridCell {
    pub fn new(method: Strategy, k: Option<f64>, f: Option<f64>) -> Self {
        Self { method, k, f }
    }

    pub fn edit_config(&self, params: &GridParams, steps: usize, target: usize, seed: u64) -> EditConfig {
        let mut c = EditConfig::new(self.method, target, seed);
        c.steps = steps;
        c.cfg_weight = params.cfg_weight;
        c.solver = params.solver;
        c.inversion = params.inversion;
        match self.method {
            Strategy::Pni | Strategy::DdimPni => c.f_par = self.f,
            Strategy::DdimInversion => {}
            Strategy::MiInpaint => {
                c.k = self.k;
                c.f_clamp = self.f;
            }
        }
        c
    }

    /// Key used for CSV rows and lookups, e.g. `mi-inpaint k=0.50 f=0.45`.
    pub fn label(&self) -> String {
        let mut s = self.method.to_string();
        if let Some(k) = self.k {
            s += &format!(" k={k:.2}");
        }
        if let Some(f) = self.f {
            s += &format!(" f={f:.2}");
        }
        s
    }
}

/// The baselines at `f_par`, then the 3x2 ablation grid with k descending and f ascending.
pub fn standard_cells(f_par: f64) -> Vec<GridCell> {
    let mut cells = vec![
        GridCell::new(Strategy::Pni, None, Some(f_par)),
        GridCell::new(Strategy::DdimPni, None, Some(f_par)),
        GridCell::new(Strategy::DdimInversion, None, None),
    ];
    for k in [0.55, 0.50, 0.45] {
        for f in [0.40, 0.45] {
            cells.push(GridCell::new(Strategy::MiInpaint, Some(k), Some(f)));
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridParams {
    pub n_clips: usize,
    pub frames: usize,
    pub cfg_weight: f64,
    pub solver: Solver,
    pub inversion: Inversion,
    pub cells: Vec<GridCell>,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            n_clips: 200,
            frames: 32,
            cfg_weight: 1.25,
            solver: Solver::Euler,
            inversion: Inversion::default(),
            cells: standard_cells(0.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub cell: GridCell,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub per_clip: Vec<ClipMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub params: GridParams,
    pub seed: u64,
    pub rows: Vec<GridRow>,
}

/// The paired clip set: clip `j` and its target depend only on `(seed, j)`.
#[derive(Debug, Clone)]
pub struct PairedClip {
    pub clip: LatentClip,
    pub target: usize,
    pub edit_seed: u64,
}

pub fn paired_clips(w: &World, n: usize, frames: usize, seed: u64) -> Result<Vec<PairedClip>> {
    if w.instruments() < 2 {
        return Err(invalid("timbre transfer needs at least two instruments"));
    }
    (0..n)
        .map(|j| {
            let mut rng = stream_rng(seed, 1 + j as u64);
            let clip = w.sample_clip_with(frames, None, &mut rng)?;
            let shift = 1 + rng.gen_range(0..w.instruments() - 1);
            let target = (clip.instrument + shift) % w.instruments();
            Ok(PairedClip { clip, target, edit_seed: rng.gen() })
        })
        .collect()
}

/// Runs every cell on the same paired clips and noise seeds. A cell that
/// fails on any clip is reported with its error instead of metrics.
pub fn run_grid(w: &World, s: &Schedule, report: &MiReport, params: &GridParams, seed: u64) -> Result<GridResult> {
    if params.cells.is_empty() {
        return Err(invalid("grid has no cells"));
    }
    if params.n_clips == 0 {
        return Err(invalid("grid needs at least one clip"));
    }
    let masks: Vec<Option<ChannelMask>> = params
        .cells
        .iter()
        .map(|c| match (c.method, c.k) {
            (Strategy::MiInpaint, Some(k)) => build_mask(report, k).map(Some),
            _ => Ok(None),
        })
        .collect::<Result<_>>()?;
    let pairs = paired_clips(w, params.n_clips, params.frames, seed)?;
    let targets: Vec<usize> = pairs.iter().map(|p| p.target).collect();
    let reference = reference_frames(w, &targets, params.frames, seed ^ 0x5eed_fad0)?;

    // outputs[clip][cell]
    let outputs: Vec<Vec<std::result::Result<DMatrix<f64>, String>>> = pairs
        .par_iter()
        .map(|p| {
            let inv = invert_context(w, s, &p.clip.data, params.inversion);
            params
                .cells
                .iter()
                .zip(&masks)
                .map(|(cell, mask)| {
                    let inv = inv.as_ref().map_err(|e| e.to_string())?;
                    let cfg = cell.edit_config(params, s.steps(), p.target, p.edit_seed);
                    edit_with_inversion(w, s, &p.clip.data, inv, &cfg, mask.as_ref())
                        .map(|r| r.output)
                        .map_err(|e| e.to_string())
                })
                .collect()
        })
        .collect();

    let rows = params
        .cells
        .iter()
        .enumerate()
        .map(|(ci, cell)| {
            let mut outs = Vec::with_capacity(pairs.len());
            for (j, per) in outputs.iter().enumerate() {
                match &per[ci] {
                    Ok(o) => outs.push(o),
                    Err(e) => return failed(*cell, format!("clip {j}: {e}")),
                }
            }
            let edits: Vec<EditedClip> = pairs
                .iter()
                .zip(outs)
                .map(|(p, o)| EditedClip { source: &p.clip, output: o, target: p.target })
                .collect();
            match evaluate_with_reference(w, &edits, &reference) {
                Ok((m, per_clip)) => GridRow { cell: *cell, metrics: Some(m), error: None, per_clip },
                Err(e) => failed(*cell, e.to_string()),
            }
        })
        .collect();
    Ok(GridResult { params: params.clone(), seed, rows })
}

fn failed(cell: GridCell, error: String) -> GridRow {
    GridRow { cell, metrics: None, error: Some(error), per_clip: Vec::new() }
}

impl GridResult {
    /// First row for `cell`; duplicated cells produce identical rows.
    pub fn row(&self, cell: &GridCell) -> Option<&GridRow> {
        let key = cell.label();
        self.rows.iter().find(|r| r.cell.label() == key)
    }

    /// One row per cell: method, k, f, FAD, DPD, class similarity, onset F1.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "k", "f", "fad_analog", "dpd_analog", "class_sim", "onset_f1"])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_default();
        for r in &self.rows {
            let mut rec = vec![r.cell.method.to_string(), opt(r.cell.k), opt(r.cell.f)];
            match &r.metrics {
                Some(m) => {
                    rec.extend([m.fad_analog, m.dpd_analog, m.class_sim, m.onset_f1].iter().map(|v| format!("{v:.6}")))
                }
                None => rec.extend(std::iter::repeat(String::new()).take(4)),
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::Io { path: "<csv>".into(), source: e })?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Percentile 95% interval of the mean of `diff` over paired resamples.
pub fn bootstrap_ci(diff: &[f64], resamples: usize, seed: u64) -> Result<(f64, f64)> {
    if diff.is_empty() || resamples == 0 {
        return Err(Error::Empty("bootstrap needs data and resamples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = diff.len();
    let mut means: Vec<f64> =
        (0..resamples).map(|_| (0..n).map(|_| diff[rng.gen_range(0..n)]).sum::<f64>() / n as f64).collect();
    means.sort_by(|a, b| a.total_cmp(b));
    let q = |p: f64| means[((p * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    Ok((q(0.025), q(0.975)))
}

/// Largest unfavourable difference a non-strict claim ("at least",
/// "does not increase") tolerates at the lower confidence bound.
pub const NON_STRICT_MARGIN: f64 = 0.005;

/// One ordering claim checked on paired per-clip differences, oriented so
/// that a positive difference favours the claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    pub name: String,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub strict: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Metric {
    ClassSim,
    Dpd,
    Onset,
}

impl Metric {
    fn of(self, m: &ClipMetrics) -> f64 {
        match self {
            Metric::ClassSim => m.class_sim,
            Metric::Dpd => m.dpd,
            Metric::Onset => m.onset_f1,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn ordering(
    g: &GridResult,
    name: String,
    better: &GridCell,
    worse: &GridCell,
    metric: Metric,
    higher_is_better: bool,
    strict: bool,
    seed: u64,
) -> Result<OrderingCheck> {
    let get = |c: &GridCell| -> Result<&Vec<ClipMetrics>> {
        let row = g.row(c).ok_or_else(|| invalid(format!("grid has no cell {}", c.label())))?;
        if let Some(e) = &row.error {
            return Err(invalid(format!("cell {} failed: {e}", c.label())));
        }
        Ok(&row.per_clip)
    };
    let (a, b) = (get(better)?, get(worse)?);
    let sign = if higher_is_better { 1.0 } else { -1.0 };
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| sign * (metric.of(x) - metric.of(y))).collect();
    let mean = diff.iter().sum::<f64>() / diff.len() as f64;
    let (lo, hi) = bootstrap_ci(&diff, 2000, seed)?;
    Ok(OrderingCheck { name, mean, lo, hi, strict, pass: if strict { lo > 0.0 } else { lo >= -NON_STRICT_MARGIN } })
}

/// The expected method orderings: DDIM-PnI beats PnI on structure, DDIM inversion
/// transfers timbre at least as well as DDIM-PnI with the worst pitch error,
/// and along the ablation grid structure improves while class similarity
/// does not rise.
pub fn ordering_checks(g: &GridResult, f_par: f64, seed: u64) -> Result<Vec<OrderingCheck>> {
    let pni = GridCell::new(Strategy::Pni, None, Some(f_par));
    let dpni = GridCell::new(Strategy::DdimPni, None, Some(f_par));
    let inv = GridCell::new(Strategy::DdimInversion, None, None);
    let mut out = vec![
        ordering(g, "ddim-pni pitch error below pni".into(), &dpni, &pni, Metric::Dpd, false, true, seed)?,
        ordering(g, "ddim-pni onset F1 above pni".into(), &dpni, &pni, Metric::Onset, true, true, seed)?,
        ordering(
            g,
            "ddim-inversion class-sim at least ddim-pni".into(),
            &inv,
            &dpni,
            Metric::ClassSim,
            true,
            false,
            seed,
        )?,
        ordering(g, "ddim-inversion pitch error above pni".into(), &pni, &inv, Metric::Dpd, false, true, seed)?,
        ordering(g, "ddim-inversion pitch error above ddim-pni".into(), &dpni, &inv, Metric::Dpd, false, true, seed)?,
    ];
    let seq: Vec<GridCell> = standard_cells(f_par).into_iter().filter(|c| c.method == Strategy::MiInpaint).collect();
    for pair in seq.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let step = format!("({:.2},{:.2})->({:.2},{:.2})", a.k.unwrap(), a.f.unwrap(), b.k.unwrap(), b.f.unwrap());
        out.push(ordering(g, format!("{step} pitch error decreases"), b, a, Metric::Dpd, false, true, seed)?);
        out.push(ordering(g, format!("{step} onset F1 increases"), b, a, Metric::Onset, true, true, seed)?);
        out.push(ordering(
            g,
            format!("{step} class-sim does not increase"),
            a,
            b,
            Metric::ClassSim,
            true,
            false,
            seed,
        )?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn onset_table() {
        let t = [0, 0, 3, 3, 5, 5, 1, 1];
        assert_eq!(onset_f1(&t, &t, 1).unwrap(), 1.0);
        assert_eq!(onset_f1(&[2; 8], &t, 1).unwrap(), 0.0);
        let shifted = [0, 0, 0, 3, 3, 5, 5, 1];
        assert_eq!(onset_f1(&shifted, &t, 1).unwrap(), 1.0);
        assert_eq!(onset_f1(&shifted, &t, 0).unwrap(), 0.0);
        assert_eq!(onset_f1(&[4; 5], &[4; 5], 1).unwrap(), 1.0);
        assert!(onset_f1(&[1, 2], &[1], 1).is_err());
    }

    #[test]
    fn onset_matching_is_one_to_one() {
        // two predicted onsets near one true onset: P = 1/2, R = 1
        let truth = [0, 0, 0, 1, 1, 1];
        let pred = [0, 0, 2, 1, 1, 1];
        assert!((onset_f1(&pred, &truth, 1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn onset_matching_is_maximal() {
        // predicted onsets at 2 and 3, true ones at 1 and 2: both can be matched
        let truth = [0, 1, 2, 2, 2];
        let pred = [0, 0, 1, 2, 2];
        assert_eq!(onsets(&pred), vec![2, 3]);
        assert_eq!(onsets(&truth), vec![1, 2]);
        assert_eq!(onset_f1(&pred, &truth, 1).unwrap(), 1.0);
    }

    #[test]
    fn dpd_table() {
        let t = [0, 3, 7, 15];
        assert_eq!(dpd_analog(&t, &t).unwrap(), 0.0);
        assert_eq!(dpd_analog(&[1, 4, 8, 14], &t).unwrap(), 1.0);
        assert!(dpd_analog(&[], &[]).is_err());
    }

    #[test]
    fn random_dpd_matches_brute_force() {
        let p: usize = 16;
        let brute: usize = (0..p).flat_map(|a| (0..p).map(move |b| a.abs_diff(b))).sum();
        assert!((random_dpd(p) - brute as f64 / (p * p) as f64).abs() < 1e-15);
        assert!((random_dpd(16) - 5.3125).abs() < 1e-15);
    }

    #[test]
    fn frechet_identical_sets_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(4, 50, |_, _| rng.gen::<f64>());
        assert!(frechet_gaussian(&a, &a).unwrap() < 1e-12);
        assert!(frechet_gaussian(&a, &a.columns(0, 4).into_owned()).is_err());
    }

    #[test]
    fn bootstrap_brackets_the_mean() {
        let d: Vec<f64> = (0..100).map(|i| (i % 7) as f64 - 2.0).collect();
        let m = d.iter().sum::<f64>() / 100.0;
        let (lo, hi) = bootstrap_ci(&d, 2000, 1).unwrap();
        assert!(lo < m && m < hi);
        assert_eq!(bootstrap_ci(&[2.0; 10], 100, 1).unwrap(), (2.0, 2.0));
    }

    #[test]
    fn labels_are_unique_for_table_cells() {
        let cells = standard_cells(0.5);
        let labels: std::collections::BTreeSet<String> = cells.iter().map(|c| c.label()).collect();
        assert_eq!(labels.len(), 9);
        assert_eq!(cells[3].label(), "mi-inpaint k=0.55 f=0.40");
    }
}
