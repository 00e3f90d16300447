//! Synthetic labeled latent world.
//!
//! Every frame is drawn from an isotropic Gaussian mixture with one component
//! per (instrument, pitch) pair. Timbre channels carry instrument codes,
//! structure channels carry pitch codes, and shared channels blend the two
//! with an instrument gain set by the entanglement knob. Because the mixture is
//! known, the posterior-mean denoiser and the Bayes decoders are exact.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, StandardNormal, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// How an instrument condition reshapes the component prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Conditioning {
    /// Prior restricted to the target instrument's components.
    Hard,
    /// Target components up-weighted by `strength`; the rest keep their prior.
    Soft { strength: f64 },
}

/// Generator settings for a planted world.
///
/// Pitch enters the structure channels twice: a register ("height") code that
/// moves linearly with pitch and has a large span, and a fine random code that
/// tells neighbouring pitches apart. Shared channel `j` has mean
/// `g_j * timbre + (1 - g_j) * shared_pitch_gain * height`, with gains spread
/// around `entanglement`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldParams {
    pub channels: usize,
    pub instruments: usize,
    pub pitches: usize,
    pub timbre_channels: usize,
    pub shared_channels: usize,
    pub height_channels: usize,
    pub fine_channels: usize,
    pub component_std: f64,
    /// Typical distance between two instrument codes.
    pub timbre_separation: f64,
    /// Distance between the lowest and highest pitch on the height code.
    pub height_span: f64,
    /// Typical distance between two fine pitch codes.
    pub fine_separation: f64,
    pub shared_pitch_gain: f64,
    /// Mean instrument gain of the shared channels; 0 makes them pure structure.
    pub entanglement: f64,
    /// Relative spread of the gains around `entanglement`.
    pub entanglement_spread: f64,
    /// Instruments are assigned round-robin to this many pitch registers.
    /// Zero gives every instrument a uniform pitch prior.
    pub register_groups: usize,
    pub register_width: f64,
    /// Weight of the register bump against a uniform floor.
    pub register_mix: f64,
    pub conditioning: Conditioning,
    pub mean_segment: f64,
    pub seed: u64,
}

impl Default for WorldParams {
    fn default() -> Self {
        Self {
            channels: 64,
            instruments: 8,
            pitches: 16,
            timbre_channels: 16,
            shared_channels: 24,
            height_channels: 8,
            fine_channels: 8,
            component_std: 1.0,
            timbre_separation: 21.0,
            height_span: 181.0,
            fine_separation: 14.0,
            shared_pitch_gain: 1.0,
            entanglement: 0.6,
            entanglement_spread: 5.0 / 12.0,
            register_groups: 4,
            register_width: 2.0,
            register_mix: 0.8,
            conditioning: Conditioning::Soft { strength: 50.0 },
            mean_segment: 8.0,
            seed: 2,
        }
    }
}

impl WorldParams {
    /// Timbre lives only on the planted timbre channels: no entanglement and
    /// no instrument-dependent pitch register.
    pub fn planted() -> Self {
        Self { entanglement: 0.0, register_groups: 0, ..Self::default() }
    }

    /// Instrument gain of the `j`-th of `n` shared channels.
    pub fn shared_gain(&self, j: usize, n: usize) -> f64 {
        let pos = if n > 1 { 1.0 - 2.0 * j as f64 / (n - 1) as f64 } else { 0.0 };
        (self.entanglement * (1.0 + self.entanglement_spread * pos)).clamp(0.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let used = self.timbre_channels + self.shared_channels + self.height_channels + self.fine_channels;
        if used > self.channels {
            return Err(invalid(format!("{used} planted channels exceed {} channels", self.channels)));
        }
        if self.instruments < 2 || self.pitches < 1 {
            return Err(invalid("need at least 2 instruments and 1 pitch"));
        }
        if !(self.component_std > 0.0) {
            return Err(invalid("component_std must be positive"));
        }
        if !(0.0..=1.0).contains(&self.entanglement) {
            return Err(invalid("entanglement must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.register_mix) || !(self.register_width > 0.0) {
            return Err(invalid("register_mix must lie in [0, 1] and register_width be positive"));
        }
        if !(self.mean_segment >= 1.0) {
            return Err(invalid("mean_segment must be at least 1"));
        }
        if let Conditioning::Soft { strength } = self.conditioning {
            if !(strength > 0.0) {
                return Err(invalid("soft conditioning strength must be positive"));
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<World> {
        World::new(self.spec()?)
    }

    /// Draws the concrete mixture.
    pub fn spec(&self) -> Result<WorldSpec> {
        self.validate()?;
        let (c, ni, np) = (self.channels, self.instruments, self.pitches);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);

        let mut perm: Vec<usize> = (0..c).collect();
        perm.shuffle(&mut rng);
        let mut at = 0;
        let mut take = |n: usize| {
            let s = perm[at..at + n].to_vec();
            at += n;
            s
        };
        let mut timbre = take(self.timbre_channels);
        let shared = take(self.shared_channels);
        let mut height = take(self.height_channels);
        let mut fine = take(self.fine_channels);
        timbre.sort_unstable();
        height.sort_unstable();
        fine.sort_unstable();

        let nt = self.timbre_channels.max(1) as f64;
        let timbre_scale = self.timbre_separation / (2.0 * nt).sqrt();
        let codes: Vec<f64> = (0..ni * c).map(|_| normal(&mut rng) * timbre_scale).collect();
        let code = |i: usize, ch: usize| codes[i * c + ch];
        let sign: Vec<f64> = (0..c).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        let nf = self.fine_channels.max(1) as f64;
        let fine_scale = self.fine_separation / (2.0 * nf).sqrt();
        let fine_codes: Vec<f64> = (0..np * self.fine_channels).map(|_| normal(&mut rng) * fine_scale).collect();

        let nh = self.height_channels.max(1) as f64;
        let centre = (np as f64 - 1.0) / 2.0;
        let step = if np > 1 { self.height_span / ((np as f64 - 1.0) * nh.sqrt()) } else { 0.0 };
        let height_code = |p: usize| (p as f64 - centre) * step;

        let mut means = vec![vec![0.0; c]; ni * np];
        for i in 0..ni {
            for p in 0..np {
                let m = &mut means[i * np + p];
                for &ch in &timbre {
                    m[ch] = code(i, ch);
                }
                for &ch in &height {
                    m[ch] = height_code(p) * sign[ch];
                }
                for (q, &ch) in fine.iter().enumerate() {
                    m[ch] = fine_codes[p * self.fine_channels + q];
                }
                for (j, &ch) in shared.iter().enumerate() {
                    let g = self.shared_gain(j, shared.len());
                    m[ch] = g * code(i, ch) + (1.0 - g) * self.shared_pitch_gain * height_code(p) * sign[ch];
                }
            }
        }

        let mut log_prior = Vec::with_capacity(ni * np);
        for i in 0..ni {
            let pitch = self.pitch_prior(i);
            log_prior.extend(pitch.iter().map(|q| q.ln() - (ni as f64).ln()));
        }

        let mut structure: Vec<usize> = height.iter().chain(fine.iter()).copied().collect();
        structure.sort_unstable();
        let mut shared_sorted = shared.clone();
        shared_sorted.sort_unstable();

        Ok(WorldSpec {
            channels: c,
            instruments: ni,
            pitches: np,
            timbre_channels: timbre,
            structure_channels: structure,
            shared_channels: shared_sorted,
            component_means: means,
            log_prior,
            component_std: self.component_std,
            entanglement: self.entanglement,
            conditioning: self.conditioning,
            mean_segment: self.mean_segment,
            seed: self.seed,
        })
    }

    /// `P(pitch | instrument)`.
    fn pitch_prior(&self, i: usize) -> Vec<f64> {
        let np = self.pitches;
        if self.register_groups == 0 {
            return vec![1.0 / np as f64; np];
        }
        let g = self.register_groups;
        let centre = if g > 1 { (np as f64 - 1.0) * (i % g) as f64 / (g - 1) as f64 } else { (np as f64 - 1.0) / 2.0 };
        let bump: Vec<f64> =
            (0..np).map(|p| (-0.5 * ((p as f64 - centre) / self.register_width).powi(2)).exp()).collect();
        let total: f64 = bump.iter().sum();
        bump.iter().map(|b| self.register_mix * b / total + (1.0 - self.register_mix) / np as f64).collect()
    }
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Serialized description of a world: the mixture itself plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub channels: usize,
    pub instruments: usize,
    pub pitches: usize,
    pub timbre_channels: Vec<usize>,
    pub structure_channels: Vec<usize>,
    pub shared_channels: Vec<usize>,
    /// Row `i * pitches + p` is the mean of component (i, p).
    pub component_means: Vec<Vec<f64>>,
    /// Log prior of each component, same indexing.
    pub log_prior: Vec<f64>,
    pub component_std: f64,
    pub entanglement: f64,
    pub conditioning: Conditioning,
    pub mean_segment: f64,
    pub seed: u64,
}

impl WorldSpec {
    /// Uniform prior over the given component means, all channels treated as
    /// structure. Means are ordered instrument-major, so `means.len()` must be
    /// a multiple of `instruments`.
    pub fn from_means(means: Vec<Vec<f64>>, instruments: usize, tau: f64, conditioning: Conditioning) -> Self {
        let k = means.len();
        let c = means.first().map_or(0, Vec::len);
        WorldSpec {
            channels: c,
            instruments,
            pitches: k.checked_div(instruments).unwrap_or(0),
            timbre_channels: vec![],
            structure_channels: (0..c).collect(),
            shared_channels: vec![],
            component_means: means,
            log_prior: vec![0.0; k],
            component_std: tau,
            entanglement: 0.0,
            conditioning,
            mean_segment: 8.0,
            seed: 0,
        }
    }
}

/// A clip of `T` frames: `data` is channels x frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ClipFile", try_from = "ClipFile")]
pub struct LatentClip {
    pub data: DMatrix<f64>,
    pub instrument: usize,
    pub pitch_track: Vec<usize>,
}

/// On-disk clip layout, one row per frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClipFile {
    pub instrument: usize,
    pub pitch_track: Vec<usize>,
    pub frames: Vec<Vec<f64>>,
}

impl From<LatentClip> for ClipFile {
    fn from(c: LatentClip) -> Self {
        ClipFile { instrument: c.instrument, pitch_track: c.pitch_track, frames: to_rows(&c.data) }
    }
}

impl TryFrom<ClipFile> for LatentClip {
    type Error = Error;

    fn try_from(f: ClipFile) -> Result<Self> {
        let data = from_rows(&f.frames)?;
        if f.pitch_track.len() != data.ncols() {
            return Err(invalid(format!(
                "pitch track has {} entries for {} frames",
                f.pitch_track.len(),
                data.ncols()
            )));
        }
        Ok(LatentClip { data, instrument: f.instrument, pitch_track: f.pitch_track })
    }
}

/// Frames as rows.
pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

/// Inverse of [`to_rows`]; all rows must have the same length.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let Some(first) = rows.first() else {
        return Err(Error::Empty("no frames".into()));
    };
    let c = first.len();
    if rows.iter().any(|r| r.len() != c) {
        return Err(invalid("frames have different lengths"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid("non-finite value in frames"));
    }
    Ok(DMatrix::from_fn(c, rows.len(), |r, t| rows[t][r]))
}

/// Serde adapter storing a channels x frames matrix as one row per frame.
pub mod frames_serde {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        super::to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        super::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// One labeled frame of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub z: Vec<f64>,
    pub inst: usize,
    pub pitch: usize,
}

/// Labeled frames in matrix form (channels x frames).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet {
    pub frames: DMatrix<f64>,
    pub instruments: Vec<usize>,
    pub pitches: Vec<usize>,
}

impl FrameSet {
    pub fn len(&self) -> usize {
        self.frames.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.ncols() == 0
    }

    pub fn to_records(&self) -> Vec<DatasetRecord> {
        self.frames
            .column_iter()
            .zip(self.instruments.iter().zip(&self.pitches))
            .map(|(z, (&inst, &pitch))| DatasetRecord { z: z.iter().copied().collect(), inst, pitch })
            .collect()
    }

    pub fn from_records(records: &[DatasetRecord]) -> Result<Self> {
        let rows: Vec<Vec<f64>> = records.iter().map(|r| r.z.clone()).collect();
        Ok(Self {
            frames: from_rows(&rows)?,
            instruments: records.iter().map(|r| r.inst).collect(),
            pitches: records.iter().map(|r| r.pitch).collect(),
        })
    }
}

/// A validated world with the matrices the oracles need.
#[derive(Debug, Clone)]
pub struct World {
    spec: WorldSpec,
    /// components x channels
    means: DMatrix<f64>,
    mean_sq: DVector<f64>,
    decode_channels: Vec<usize>,
    decode_means: DMatrix<f64>,
    decode_mean_sq: DVector<f64>,
    pitch_given_inst: Vec<WeightedIndex<f64>>,
}

impl World {
    pub fn new(mut spec: WorldSpec) -> Result<Self> {
        let (c, ni, np) = (spec.channels, spec.instruments, spec.pitches);
        let k = ni * np;
        if c == 0 || ni < 1 || np < 1 {
            return Err(invalid("world needs channels, instruments and pitches"));
        }
        if spec.component_means.len() != k || spec.component_means.iter().any(|m| m.len() != c) {
            return Err(invalid(format!("expected {k} component means of length {c}")));
        }
        if spec.component_means.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite component mean"));
        }
        if spec.log_prior.len() != k || spec.log_prior.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(invalid(format!("expected {k} finite log prior entries")));
        }
        if !(spec.component_std > 0.0) {
            return Err(invalid("component_std must be positive"));
        }
        let in_range = |s: &[usize]| s.iter().all(|&x| x < c);
        if !in_range(&spec.timbre_channels) || !in_range(&spec.structure_channels) || !in_range(&spec.shared_channels) {
            return Err(invalid("channel index out of range"));
        }
        if spec.timbre_channels.iter().any(|x| spec.structure_channels.contains(x)) {
            return Err(invalid("timbre and structure channels overlap"));
        }
        let norm = log_sum_exp(&spec.log_prior);
        if !norm.is_finite() {
            return Err(invalid("prior has no mass"));
        }
        for v in &mut spec.log_prior {
            *v -= norm;
        }

        let means = DMatrix::from_fn(k, c, |r, ch| spec.component_means[r][ch]);
        let mean_sq = DVector::from_fn(k, |r, _| means.row(r).norm_squared());
        let mut decode_channels: Vec<usize> =
            spec.structure_channels.iter().chain(spec.shared_channels.iter()).copied().collect();
        decode_channels.sort_unstable();
        decode_channels.dedup();
        let decode_means = means.select_columns(&decode_channels);
        let decode_mean_sq = DVector::from_fn(k, |r, _| decode_means.row(r).norm_squared());
        let pitch_given_inst = (0..ni)
            .map(|i| {
                let w: Vec<f64> = (0..np).map(|p| spec.log_prior[i * np + p].exp()).collect();
                WeightedIndex::new(w).map_err(|e| invalid(format!("instrument {i} has no pitch mass: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { spec, means, mean_sq, decode_channels, decode_means, decode_mean_sq, pitch_given_inst })
    }

    pub fn spec(&self) -> &WorldSpec {
        &self.spec
    }

    pub fn channels(&self) -> usize {
        self.spec.channels
    }

    pub fn instruments(&self) -> usize {
        self.spec.instruments
    }

    pub fn pitches(&self) -> usize {
        self.spec.pitches
    }

    pub fn tau(&self) -> f64 {
        self.spec.component_std
    }

    pub fn components(&self) -> usize {
        self.spec.instruments * self.spec.pitches
    }

    pub fn instrument_of(&self, k: usize) -> usize {
        k / self.spec.pitches
    }

    pub fn pitch_of(&self, k: usize) -> usize {
        k % self.spec.pitches
    }

    /// Components x channels.
    pub fn means(&self) -> &DMatrix<f64> {
        &self.means
    }

    pub fn mean(&self, instrument: usize, pitch: usize) -> DVector<f64> {
        self.means.row(instrument * self.spec.pitches + pitch).transpose()
    }

    /// Channels read by [`World::decode_pitch`].
    pub fn decode_channels(&self) -> &[usize] {
        &self.decode_channels
    }

    /// Mixture mean, optionally under a condition.
    pub fn mixture_mean(&self, condition: Option<usize>) -> Result<DVector<f64>> {
        let lp = self.log_prior_for(condition)?;
        let w = softmax(&lp);
        Ok(self.means.tr_mul(&DVector::from_vec(w)))
    }

    fn check_instrument(&self, i: usize) -> Result<()> {
        if i >= self.spec.instruments {
            return Err(invalid(format!("instrument {i} out of range 0..{}", self.spec.instruments)));
        }
        Ok(())
    }

    fn log_prior_for(&self, condition: Option<usize>) -> Result<Vec<f64>> {
        let mut lp = self.spec.log_prior.clone();
        if let Some(c) = condition {
            self.check_instrument(c)?;
            let np = self.spec.pitches;
            match self.spec.conditioning {
                Conditioning::Hard => {
                    for (k, v) in lp.iter_mut().enumerate() {
                        if k / np != c {
                            *v = f64::NEG_INFINITY;
                        }
                    }
                }
                Conditioning::Soft { strength } => {
                    for v in &mut lp[c * np..(c + 1) * np] {
                        *v += strength.ln();
                    }
                }
            }
        }
        Ok(lp)
    }

    /// Component responsibilities (components x frames) of `z` under
    /// `N(mu_k, var I)` with the given log prior.
    fn responsibilities(
        &self,
        z: &DMatrix<f64>,
        var: f64,
        log_prior: &[f64],
        means: &DMatrix<f64>,
        mean_sq: &DVector<f64>,
    ) -> DMatrix<f64> {
        // ||z||^2 is constant per frame and drops out of the softmax.
        let mut w = means * z;
        let inv = 1.0 / (2.0 * var);
        for mut col in w.column_iter_mut() {
            let mut max = f64::NEG_INFINITY;
            for (k, v) in col.iter_mut().enumerate() {
                *v = log_prior[k] + (2.0 * *v - mean_sq[k]) * inv;
                max = max.max(*v);
            }
            let mut total = 0.0;
            for v in col.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            col /= total;
        }
        w
    }

    fn check_shape(&self, z: &DMatrix<f64>) -> Result<()> {
        if z.nrows() != self.spec.channels {
            return Err(invalid(format!("expected {} channels, got {}", self.spec.channels, z.nrows())));
        }
        Ok(())
    }

    /// Exact posterior mean `E[x | x + sigma * eps = z]`, frame by frame.
    pub fn denoise(&self, z: &DMatrix<f64>, sigma: f64, condition: Option<usize>) -> Result<DMatrix<f64>> {
        if !(sigma >= 0.0) {
            return Err(invalid(format!("sigma must be non-negative, got {sigma}")));
        }
        self.check_shape(z)?;
        let lp = self.log_prior_for(condition)?;
        if sigma == 0.0 {
            return Ok(z.clone());
        }
        let t2 = self.tau() * self.tau();
        let s2 = sigma * sigma;
        let var = t2 + s2;
        let w = self.responsibilities(z, var, &lp, &self.means, &self.mean_sq);
        let mut out = self.means.tr_mul(&w);
        out *= s2;
        out += z * t2;
        out /= var;
        Ok(out)
    }

    /// Bayes pitch per frame from structure and shared channels only.
    pub fn decode_pitch(&self, z: &DMatrix<f64>) -> Result<Vec<usize>> {
        self.check_shape(z)?;
        let sub = z.select_rows(&self.decode_channels);
        let t2 = self.tau() * self.tau();
        let w = self.responsibilities(&sub, t2, &self.spec.log_prior, &self.decode_means, &self.decode_mean_sq);
        let np = self.spec.pitches;
        Ok(w.column_iter()
            .map(|col| {
                let mut mass = vec![0.0; np];
                for (k, v) in col.iter().enumerate() {
                    mass[k % np] += v;
                }
                argmax(&mass)
            })
            .collect())
    }

    /// Posterior instrument probabilities per frame (instruments x frames).
    pub fn instrument_posterior(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_shape(z)?;
        let t2 = self.tau() * self.tau();
        let w = self.responsibilities(z, t2, &self.spec.log_prior, &self.means, &self.mean_sq);
        let np = self.spec.pitches;
        Ok(DMatrix::from_fn(self.spec.instruments, z.ncols(), |i, t| w.view((i * np, t), (np, 1)).sum()))
    }

    /// Mean over frames of `P(instrument | frame)`.
    pub fn class_posterior(&self, z: &DMatrix<f64>, instrument: usize) -> Result<f64> {
        self.check_instrument(instrument)?;
        if z.ncols() == 0 {
            return Err(Error::Empty("clip has no frames".into()));
        }
        let post = self.instrument_posterior(z)?;
        Ok(post.row(instrument).mean())
    }

    /// Draws a clip with a uniformly chosen instrument.
    pub fn sample_clip(&self, frames: usize, seed: u64) -> Result<LatentClip> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_clip_with(frames, None, &mut rng)
    }

    pub fn sample_clip_with<R: Rng>(
        &self,
        frames: usize,
        instrument: Option<usize>,
        rng: &mut R,
    ) -> Result<LatentClip> {
        if frames == 0 {
            return Err(invalid("a clip needs at least one frame"));
        }
        let i = match instrument {
            Some(i) => {
                self.check_instrument(i)?;
                i
            }
            None => rng.gen_range(0..self.spec.instruments),
        };
        let seg = Geometric::new(1.0 / self.spec.mean_segment).map_err(|e| invalid(e.to_string()))?;
        let mut track = Vec::with_capacity(frames);
        while track.len() < frames {
            let len = 1 + seg.sample(rng) as usize;
            let p = self.pitch_given_inst[i].sample(rng);
            track.extend(std::iter::repeat(p).take(len.min(frames - track.len())));
        }
        let data = self.frames_for(i, &track, rng);
        Ok(LatentClip { data, instrument: i, pitch_track: track })
    }

    fn frames_for<R: Rng>(&self, i: usize, track: &[usize], rng: &mut R) -> DMatrix<f64> {
        let (c, np, tau) = (self.spec.channels, self.spec.pitches, self.tau());
        let mut data = DMatrix::zeros(c, track.len());
        for (t, &p) in track.iter().enumerate() {
            let row = self.means.row(i * np + p);
            for ch in 0..c {
                data[(ch, t)] = row[ch] + tau * normal(rng);
            }
        }
        data
    }

    /// Independent labeled frames: instrument uniform, pitch from its prior.
    pub fn sample_frames(&self, n: usize, seed: u64) -> FrameSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut instruments = Vec::with_capacity(n);
        let mut pitches = Vec::with_capacity(n);
        let mut frames = DMatrix::zeros(self.spec.channels, n);
        for t in 0..n {
            let i = rng.gen_range(0..self.spec.instruments);
            let p = self.pitch_given_inst[i].sample(&mut rng);
            let f = self.frames_for(i, &[p], &mut rng);
            frames.set_column(t, &f.column(0));
            instruments.push(i);
            pitches.push(p);
        }
        FrameSet { frames, instruments, pitches }
    }
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let z = log_sum_exp(v);
    v.iter().map(|x| (x - z).exp()).collect()
}

/// First index of the largest value.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
