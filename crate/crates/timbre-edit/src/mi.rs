//! Per-channel mutual information with instrument and pitch labels, channel
//! ranking and the complementary timbre/structure masks built from it.

use std::io::Write;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::world::FrameSet;

/// Quantile-binned channels, reusable across label sets.
#[derive(Debug, Clone)]
pub struct BinnedFrames {
    bins: usize,
    /// channel -> bin index per frame
    codes: Vec<Vec<u16>>,
    constant: Vec<bool>,
}

impl BinnedFrames {
    /// Equal-frequency binning of every channel (rows of `frames`). Equal values
    /// share the bin of their first rank, so a constant channel lands in one bin.
    pub fn new(frames: &DMatrix<f64>, bins: usize) -> Result<Self> {
        let n = frames.ncols();
        if bins < 2 || bins > u16::MAX as usize {
            return Err(invalid(format!("bin count {bins} out of range")));
        }
        if n < 10 * bins {
            return Err(invalid(format!("need at least {} frames for {bins} bins, got {n}", 10 * bins)));
        }
        if frames.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite frame value"));
        }
        let (codes, constant): (Vec<_>, Vec<_>) = (0..frames.nrows())
            .into_par_iter()
            .map(|ch| {
                let row: Vec<f64> = frames.row(ch).iter().copied().collect();
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
                let mut code = vec![0u16; n];
                let mut first = 0;
                for (r, &i) in order.iter().enumerate() {
                    if r > 0 && row[i] != row[order[r - 1]] {
                        first = r;
                    }
                    code[i] = (first * bins / n) as u16;
                }
                let constant = row[order[0]] == row[order[n - 1]];
                (code, constant)
            })
            .unzip();
        Ok(Self { bins, codes, constant })
    }

    pub fn channels(&self) -> usize {
        self.codes.len()
    }

    pub fn frames(&self) -> usize {
        self.codes.first().map_or(0, Vec::len)
    }

    pub fn constant_channels(&self) -> Vec<usize> {
        (0..self.channels()).filter(|&c| self.constant[c]).collect()
    }

    /// Normalized plug-in MI of every channel with `labels`.
    pub fn mi(&self, labels: &[usize]) -> Result<Vec<f64>> {
        if labels.len() != self.frames() {
            return Err(invalid(format!("{} labels for {} frames", labels.len(), self.frames())));
        }
        let (dense, classes) = relabel(labels);
        if classes < 2 {
            return Err(Error::Degenerate("labels contain a single class".into()));
        }
        Ok(self
            .codes
            .par_iter()
            .zip(&self.constant)
            .map(|(code, &constant)| if constant { 0.0 } else { plug_in_mi(code, self.bins, &dense, classes) })
            .collect())
    }
}

fn relabel(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut distinct: Vec<usize> = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let dense = labels.iter().map(|l| distinct.binary_search(l).unwrap()).collect();
    (dense, distinct.len())
}

fn entropy(counts: &[f64], n: f64) -> f64 {
    counts.iter().filter(|&&c| c > 0.0).map(|&c| -(c / n) * (c / n).ln()).sum()
}

/// `I(X; Y) / min(H(X), H(Y))`, zero when either entropy vanishes.
fn plug_in_mi(x: &[u16], bins: usize, y: &[usize], classes: usize) -> f64 {
    let n = x.len() as f64;
    let mut joint = vec![0.0; bins * classes];
    let mut px = vec![0.0; bins];
    let mut py = vec![0.0; classes];
    for (&a, &b) in x.iter().zip(y) {
        joint[a as usize * classes + b] += 1.0;
        px[a as usize] += 1.0;
        py[b] += 1.0;
    }
    let hx = entropy(&px, n);
    let hy = entropy(&py, n);
    let denom = hx.min(hy);
    if denom <= 0.0 {
        return 0.0;
    }
    let mut mi = 0.0;
    for a in 0..bins {
        for b in 0..classes {
            let c = joint[a * classes + b];
            if c > 0.0 {
                mi += c / n * (c * n / (px[a] * py[b])).ln();
            }
        }
    }
    (mi / denom).clamp(0.0, 1.0)
}

/// Normalized MI of each channel (row) of `frames` with `labels`.
/// Constant channels get 0.
pub fn estimate_mi(frames: &DMatrix<f64>, labels: &[usize], bins: usize) -> Result<Vec<f64>> {
    BinnedFrames::new(frames, bins)?.mi(labels)
}

/// Shuffled-label null: mean + 5 sd of MI pooled over channels and shuffles.
pub fn null_threshold(binned: &BinnedFrames, labels: &[usize], shuffles: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = Vec::new();
    let constant = binned.constant_channels();
    for _ in 0..shuffles.max(1) {
        let mut perm = labels.to_vec();
        perm.shuffle(&mut rng);
        let mi = binned.mi(&perm)?;
        pool.extend(mi.iter().enumerate().filter(|(c, _)| !constant.contains(c)).map(|(_, v)| *v));
    }
    if pool.is_empty() {
        return Ok(0.0);
    }
    let n = pool.len() as f64;
    let mean = pool.iter().sum::<f64>() / n;
    let var = pool.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(mean + 5.0 * var.sqrt())
}

/// Settings for [`analyze`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiParams {
    pub frames: usize,
    pub bins: usize,
    pub null_shuffles: usize,
}

impl Default for MiParams {
    fn default() -> Self {
        Self { frames: 10_000, bins: 16, null_shuffles: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiReport {
    /// Normalized MI with instrument, per channel.
    pub instrument: Vec<f64>,
    /// Normalized MI with pitch, per channel.
    pub pitch: Vec<f64>,
    /// Channels by instrument MI, highest first; ties go to the lower index.
    pub ranking: Vec<usize>,
    /// Share of total instrument MI held by the first `j + 1` ranked channels.
    pub cumulative: Vec<f64>,
    /// Shuffled-label threshold for instrument MI.
    pub null_threshold: f64,
    pub bins: usize,
    pub frames: usize,
    pub constant_channels: Vec<usize>,
}

impl MiReport {
    /// Assembles a report from per-channel MI values.
    pub fn from_values(instrument: Vec<f64>, pitch: Vec<f64>, null_threshold: f64, bins: usize, frames: usize) -> Self {
        let ranking = rank_channels(&instrument);
        let total: f64 = instrument.iter().sum();
        let mut acc = 0.0;
        let cumulative = ranking
            .iter()
            .map(|&c| {
                acc += instrument[c];
                if total > 0.0 {
                    (acc / total).min(1.0)
                } else {
                    0.0
                }
            })
            .collect();
        Self { instrument, pitch, ranking, cumulative, null_threshold, bins, frames, constant_channels: vec![] }
    }

    pub fn channels(&self) -> usize {
        self.instrument.len()
    }

    /// One row per channel: channel, instrument MI, pitch MI, rank, cumulative share.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut rank = vec![0; self.channels()];
        for (r, &c) in self.ranking.iter().enumerate() {
            rank[c] = r;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["channel", "instrument_mi", "pitch_mi", "rank", "cumulative"])?;
        for (c, &r) in rank.iter().enumerate() {
            w.write_record([
                c.to_string(),
                format!("{:.6}", self.instrument[c]),
                format!("{:.6}", self.pitch[c]),
                r.to_string(),
                format!("{:.6}", self.cumulative[r]),
            ])?;
        }
        w.flush().map_err(|e| Error::Io { path: "<csv>".into(), source: e })?;
        Ok(())
    }
}

/// Indices sorted by value, descending, ties to the lower index.
pub fn rank_channels(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

/// Instrument and pitch MI of a labeled frame set.
pub fn analyze(set: &FrameSet, params: &MiParams, seed: u64) -> Result<MiReport> {
    let binned = BinnedFrames::new(&set.frames, params.bins)?;
    let instrument = binned.mi(&set.instruments)?;
    let pitch = binned.mi(&set.pitches)?;
    let null = null_threshold(&binned, &set.instruments, params.null_shuffles, seed)?;
    let mut report = MiReport::from_values(instrument, pitch, null, params.bins, set.len());
    report.constant_channels = binned.constant_channels();
    Ok(report)
}

/// Complementary channel masks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelMask {
    pub timbre: Vec<bool>,
    pub structure: Vec<bool>,
}

impl ChannelMask {
    pub fn from_timbre(channels: usize, timbre: &[usize]) -> Result<Self> {
        let mut t = vec![false; channels];
        for &c in timbre {
            if c >= channels {
                return Err(invalid(format!("channel {c} out of range")));
            }
            t[c] = true;
        }
        let s = t.iter().map(|x| !x).collect();
        Ok(Self { timbre: t, structure: s })
    }

    pub fn channels(&self) -> usize {
        self.timbre.len()
    }

    pub fn timbre_count(&self) -> usize {
        self.timbre.iter().filter(|x| **x).count()
    }

    pub fn timbre_channels(&self) -> Vec<usize> {
        (0..self.channels()).filter(|&c| self.timbre[c]).collect()
    }

    pub fn structure_channels(&self) -> Vec<usize> {
        (0..self.channels()).filter(|&c| self.structure[c]).collect()
    }
}

fn count_for(k: f64, channels: usize) -> Result<usize> {
    if !(0.0..=1.0).contains(&k) {
        return Err(invalid(format!("k must lie in [0, 1], got {k}")));
    }
    Ok((k * channels as f64).round() as usize)
}

/// Top `round(k C)` channels by instrument MI form the timbre mask.
pub fn build_mask(report: &MiReport, k: f64) -> Result<ChannelMask> {
    let n = count_for(k, report.channels())?;
    ChannelMask::from_timbre(report.channels(), &report.ranking[..n])
}

/// Instrument MI held by the top `round(k C)` channels, and the rest.
pub fn cumulative_mi(report: &MiReport, k: f64) -> Result<(f64, f64)> {
    let n = count_for(k, report.channels())?;
    let top: f64 = report.ranking[..n].iter().map(|&c| report.instrument[c]).sum();
    let rest: f64 = report.ranking[n..].iter().map(|&c| report.instrument[c]).sum();
    Ok((top, rest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::WorldParams;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn independent_channel_has_small_mi() {
        let n = 50_000;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..8)).collect();
        let frames = DMatrix::from_fn(1, n, |_, _| StandardNormal.sample(&mut rng));
        let mi = estimate_mi(&frames, &labels, 16).unwrap();
        assert!(mi[0] < 0.02, "{}", mi[0]);
    }

    #[test]
    fn deterministic_channel_has_unit_mi() {
        let labels: Vec<usize> = (0..800).map(|i| i % 8).collect();
        let frames = DMatrix::from_fn(1, 800, |_, t| labels[t] as f64);
        let mi = estimate_mi(&frames, &labels, 16).unwrap();
        assert!((mi[0] - 1.0).abs() < 1e-12, "{}", mi[0]);
    }

    #[test]
    fn constant_channel_is_zero_and_flagged() {
        let labels: Vec<usize> = (0..400).map(|i| i % 4).collect();
        let frames = DMatrix::from_fn(2, 400, |r, t| if r == 0 { 3.5 } else { t as f64 });
        let b = BinnedFrames::new(&frames, 16).unwrap();
        assert_eq!(b.mi(&labels).unwrap()[0], 0.0);
        assert_eq!(b.constant_channels(), vec![0]);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let frames = DMatrix::from_fn(1, 400, |_, t| t as f64);
        assert!(estimate_mi(&frames, &vec![2; 400], 16).is_err());
        assert!(estimate_mi(&frames, &vec![0; 399], 16).is_err());
        assert!(estimate_mi(&DMatrix::zeros(1, 100), &vec![0; 100], 16).is_err());
    }

    fn report(values: Vec<f64>) -> MiReport {
        let n = values.len();
        MiReport::from_values(values, vec![0.0; n], 0.0, 16, 1000)
    }

    #[test]
    fn masks_select_rounded_top_k() {
        let r = report((0..64).map(|c| (c as f64 * 7.0) % 13.0 / 13.0).collect());
        let m = build_mask(&r, 0.5).unwrap();
        assert_eq!(m.timbre_count(), 32);
        assert!(m.timbre.iter().zip(&m.structure).all(|(a, b)| a != b));
        let one = build_mask(&r, 1.0 / 64.0).unwrap();
        assert_eq!(one.timbre_channels(), vec![r.ranking[0]]);
        assert!(build_mask(&r, 1.5).is_err());
        assert_eq!(build_mask(&r, 0.0).unwrap().timbre_count(), 0);
        assert_eq!(build_mask(&r, 1.0).unwrap().timbre_count(), 64);
    }

    #[test]
    fn ranking_breaks_ties_by_index() {
        assert_eq!(rank_channels(&[0.2, 0.5, 0.2, 0.5]), vec![1, 3, 0, 2]);
    }

    #[test]
    fn cumulative_mass() {
        let r = report(vec![0.3, 0.1, 0.4, 0.2]);
        let (top, rest) = cumulative_mi(&r, 1.0).unwrap();
        assert!((top - 1.0).abs() < 1e-12 && rest == 0.0);
        let u = report(vec![0.25; 8]);
        let (top, rest) = cumulative_mi(&u, 0.5).unwrap();
        assert!((top - rest).abs() < 1e-12);
        assert!(r.cumulative.windows(2).all(|w| w[0] <= w[1]));
        assert!((r.cumulative[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_has_one_row_per_channel() {
        let r = report(vec![0.3, 0.1, 0.4]);
        let mut buf = vec![];
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("channel,instrument_mi,pitch_mi,rank,cumulative"));
    }

    #[test]
    fn planted_timbre_channels_are_recovered() {
        let p = WorldParams::planted();
        let w = p.build().unwrap();
        let set = w.sample_frames(10_000, 2);
        let r = analyze(&set, &MiParams::default(), 3).unwrap();
        let planted = &w.spec().timbre_channels;
        let m = build_mask(&r, planted.len() as f64 / 64.0).unwrap();
        let hits = planted.iter().filter(|&&c| m.timbre[c]).count();
        assert!(hits as f64 / planted.len() as f64 >= 0.9, "{hits}");
        let best_structure = w.spec().structure_channels.iter().map(|&c| r.instrument[c]).fold(0.0, f64::max);
        assert!(planted.iter().all(|&c| r.instrument[c] > best_structure));
    }

    #[test]
    fn planted_world_concentrates_instrument_mi() {
        let w = WorldParams::planted().build().unwrap();
        let set = w.sample_frames(10_000, 4);
        let r = analyze(&set, &MiParams::default(), 5).unwrap();
        let (top, rest) = cumulative_mi(&r, 0.5).unwrap();
        assert!(top / (top + rest) >= 0.8, "{}", top / (top + rest));
    }
}
