//! Deterministic samplers over a noise grid: EDM Euler/Heun, DDIM and DDIM
//! inversion, with classifier-free guidance on the denoised prediction.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::schedule::{DdimCoefficients, Schedule};
use crate::world::{to_rows, World};

/// Predicts the clean latent from a noisy one.
pub trait Denoiser {
    fn denoise(&self, z: &DMatrix<f64>, sigma: f64, condition: Option<usize>) -> Result<DMatrix<f64>>;
}

impl Denoiser for World {
    fn denoise(&self, z: &DMatrix<f64>, sigma: f64, condition: Option<usize>) -> Result<DMatrix<f64>> {
        World::denoise(self, z, sigma, condition)
    }
}

impl<F> Denoiser for F
where
    F: Fn(&DMatrix<f64>, f64, Option<usize>) -> Result<DMatrix<f64>>,
{
    fn denoise(&self, z: &DMatrix<f64>, sigma: f64, condition: Option<usize>) -> Result<DMatrix<f64>> {
        self(z, sigma, condition)
    }
}

/// Condition and CFG weight for a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Guidance {
    pub condition: Option<usize>,
    pub weight: f64,
}

impl Guidance {
    pub const fn none() -> Self {
        Self { condition: None, weight: 0.0 }
    }

    pub const fn new(condition: usize, weight: f64) -> Self {
        Self { condition: Some(condition), weight }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    #[default]
    Euler,
    Heun,
}

/// `D(z, s, none) + w * (D(z, s, c) - D(z, s, none))`.
pub fn cfg_denoise<D: Denoiser + ?Sized>(d: &D, z: &DMatrix<f64>, sigma: f64, g: Guidance) -> Result<DMatrix<f64>> {
    if !(g.weight >= 0.0) {
        return Err(invalid(format!("guidance weight must be non-negative, got {}", g.weight)));
    }
    let Some(c) = g.condition else {
        return d.denoise(z, sigma, None);
    };
    if g.weight == 0.0 {
        return d.denoise(z, sigma, None);
    }
    let cond = d.denoise(z, sigma, Some(c))?;
    if g.weight == 1.0 {
        return Ok(cond);
    }
    let uncond = d.denoise(z, sigma, None)?;
    Ok(&uncond + (cond - &uncond) * g.weight)
}

/// One state of a run; `step` is `None` for the clean level below the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub step: Option<usize>,
    pub sigma: f64,
    pub z: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub states: Vec<State>,
}

#[derive(Serialize)]
struct StateLine {
    step: Option<usize>,
    sigma: f64,
    z: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> &DMatrix<f64> {
        &self.states.last().expect("trajectory is never empty").z
    }

    pub fn into_last(mut self) -> DMatrix<f64> {
        self.states.pop().expect("trajectory is never empty").z
    }

    /// State at a grid level, if the run visited it.
    pub fn at(&self, step: usize) -> Option<&DMatrix<f64>> {
        self.states.iter().find(|s| s.step == Some(step)).map(|s| &s.z)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// One JSON object per state, frames as rows.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for s in &self.states {
            let line = StateLine { step: s.step, sigma: s.sigma, z: to_rows(&s.z) };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n").map_err(|e| Error::Io { path: "<trajectory>".into(), source: e })?;
        }
        Ok(())
    }
}

/// Where a reverse run stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    Level(usize),
    /// Past level 0 onto sigma = 0.
    Clean,
}

fn check_finite(z: &DMatrix<f64>, step: usize, sigma: f64) -> Result<()> {
    if z.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { step, sigma })
    }
}

/// One reverse ODE step from `sigma` to `sigma_next`.
pub fn edm_step<D: Denoiser + ?Sized>(
    d: &D,
    z: &DMatrix<f64>,
    sigma: f64,
    sigma_next: f64,
    g: Guidance,
    solver: Solver,
) -> Result<DMatrix<f64>> {
    let den = cfg_denoise(d, z, sigma, g)?;
    let euler = &den + (z - &den) * (sigma_next / sigma);
    if solver == Solver::Euler || sigma_next == 0.0 {
        return Ok(euler);
    }
    let slope = (z - &den) / sigma;
    let den2 = cfg_denoise(d, &euler, sigma_next, g)?;
    let slope2 = (&euler - den2) / sigma_next;
    Ok(z + (slope + slope2) * (0.5 * (sigma_next - sigma)))
}

/// Reverse run from grid level `t_start` down to `stop`.
pub fn edm_sample<D: Denoiser + ?Sized>(
    d: &D,
    s: &Schedule,
    z_start: &DMatrix<f64>,
    t_start: usize,
    stop: Stop,
    g: Guidance,
    solver: Solver,
) -> Result<Trajectory> {
    edm_sample_with(d, s, z_start, t_start, stop, g, solver, |_, _| {})
}

/// Like [`edm_sample`], calling `after_step(t, z)` right after each step that
/// leaves level `t`, before the state is recorded or used again.
#[allow(clippy::too_many_arguments)]
pub fn edm_sample_with<D, F>(
    d: &D,
    s: &Schedule,
    z_start: &DMatrix<f64>,
    t_start: usize,
    stop: Stop,
    g: Guidance,
    solver: Solver,
    mut after_step: F,
) -> Result<Trajectory>
where
    D: Denoiser + ?Sized,
    F: FnMut(usize, &mut DMatrix<f64>),
{
    if t_start > s.steps() {
        return Err(invalid(format!("start level {t_start} beyond grid of {} steps", s.steps())));
    }
    let last = match stop {
        Stop::Level(l) if l > t_start => {
            return Err(invalid(format!("stop level {l} above start level {t_start}")));
        }
        Stop::Level(l) => l + 1,
        Stop::Clean => 0,
    };
    check_finite(z_start, t_start, s.sigma(t_start))?;
    let mut states = vec![State { step: Some(t_start), sigma: s.sigma(t_start), z: z_start.clone() }];
    let mut z = z_start.clone();
    for t in (last..=t_start).rev() {
        let (next_step, next_sigma) = if t == 0 { (None, 0.0) } else { (Some(t - 1), s.sigma(t - 1)) };
        z = edm_step(d, &z, s.sigma(t), next_sigma, g, solver)?;
        after_step(t, &mut z);
        check_finite(&z, t, s.sigma(t))?;
        states.push(State { step: next_step, sigma: next_sigma, z: z.clone() });
    }
    Ok(Trajectory { states })
}

/// Deterministic DDIM update between two grid levels in either direction,
/// evaluating the denoiser at the `t_from` state.
pub fn ddim_step<D: Denoiser + ?Sized>(
    d: &D,
    c: &DdimCoefficients,
    z: &DMatrix<f64>,
    t_from: usize,
    t_to: usize,
    g: Guidance,
) -> Result<DMatrix<f64>> {
    if t_from >= c.len() || t_to >= c.len() {
        return Err(invalid("step index beyond the grid"));
    }
    if t_from == t_to {
        return Ok(z.clone());
    }
    let (a0, b0) = (c.alpha(t_from), c.one_minus_alpha(t_from));
    let (a1, b1) = (c.alpha(t_to), c.one_minus_alpha(t_to));
    let x0 = cfg_denoise(d, z, c.sigma(t_from), g)?;
    // variance-preserving state and its noise estimate
    let vp = z * a0.sqrt();
    let eps = (vp - &x0 * a0.sqrt()) / b0.sqrt();
    let vp_next = x0 * a1.sqrt() + eps * b1.sqrt();
    Ok(vp_next / a1.sqrt())
}

/// Reverse DDIM run between grid levels `t_from >= t_to`.
pub fn ddim_sample<D: Denoiser + ?Sized>(
    d: &D,
    c: &DdimCoefficients,
    z: &DMatrix<f64>,
    t_from: usize,
    t_to: usize,
    g: Guidance,
) -> Result<Trajectory> {
    if t_to > t_from || t_from >= c.len() {
        return Err(invalid(format!("cannot sample from level {t_from} to {t_to}")));
    }
    let mut states = vec![State { step: Some(t_from), sigma: c.sigma(t_from), z: z.clone() }];
    let mut cur = z.clone();
    for t in ((t_to + 1)..=t_from).rev() {
        cur = ddim_step(d, c, &cur, t, t - 1, g)?;
        check_finite(&cur, t, c.sigma(t))?;
        states.push(State { step: Some(t - 1), sigma: c.sigma(t - 1), z: cur.clone() });
    }
    Ok(Trajectory { states })
}

/// Inverts a clean latent, taken as the level-0 state, up to level `t_to`.
/// Every intermediate state is kept.
pub fn ddim_invert<D: Denoiser + ?Sized>(
    d: &D,
    c: &DdimCoefficients,
    z0: &DMatrix<f64>,
    t_to: usize,
    g: Guidance,
) -> Result<Trajectory> {
    if t_to >= c.len() {
        return Err(invalid(format!("cannot invert to level {t_to}")));
    }
    check_finite(z0, 0, 0.0)?;
    let mut states = vec![State { step: Some(0), sigma: c.sigma(0), z: z0.clone() }];
    let mut cur = z0.clone();
    for t in 0..t_to {
        cur = ddim_step(d, c, &cur, t, t + 1, g)?;
        check_finite(&cur, t + 1, c.sigma(t + 1))?;
        states.push(State { step: Some(t + 1), sigma: c.sigma(t + 1), z: cur.clone() });
    }
    Ok(Trajectory { states })
}

/// How [`ddim_invert_with`] takes each upward step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Inversion {
    /// Plain DDIM inversion: the denoiser is evaluated at the lower state.
    Explicit,
    /// The explicit step followed by fixed-point corrections towards the
    /// state that the reverse Euler step maps exactly back onto the lower one.
    Corrected { iterations: usize },
}

impl Default for Inversion {
    fn default() -> Self {
        Inversion::Corrected { iterations: 1 }
    }
}

/// Inverts a clean latent, taken as the level-0 state, up to level `t_to`.
///
/// A corrected step solves `z_next = r z + (1 - r) D(z_next)` with
/// `r = sigma_next / sigma`, starting from the explicit step. The residual is
/// scaled by `1 / r`, which keeps the iteration contractive both where `D` is
/// close to the identity (low noise) and where it is nearly constant.
pub fn ddim_invert_with<D: Denoiser + ?Sized>(
    d: &D,
    c: &DdimCoefficients,
    z0: &DMatrix<f64>,
    t_to: usize,
    g: Guidance,
    inversion: Inversion,
) -> Result<Trajectory> {
    let iterations = match inversion {
        Inversion::Explicit => return ddim_invert(d, c, z0, t_to, g),
        Inversion::Corrected { iterations } => iterations,
    };
    if t_to >= c.len() {
        return Err(invalid(format!("cannot invert to level {t_to}")));
    }
    check_finite(z0, 0, 0.0)?;
    let mut states = vec![State { step: Some(0), sigma: c.sigma(0), z: z0.clone() }];
    let mut cur = z0.clone();
    for t in 0..t_to {
        let s1 = c.sigma(t + 1);
        let r = s1 / c.sigma(t);
        let mut next = ddim_step(d, c, &cur, t, t + 1, g)?;
        let target = &cur * r;
        for _ in 0..iterations {
            let den = cfg_denoise(d, &next, s1, g)?;
            let resid = &next - &target - den * (1.0 - r);
            next -= resid / r;
        }
        check_finite(&next, t + 1, s1)?;
        cur = next;
        states.push(State { step: Some(t + 1), sigma: s1, z: cur.clone() });
    }
    Ok(Trajectory { states })
}
