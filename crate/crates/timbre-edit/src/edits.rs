//! Editing strategies: partial noise injection (PnI), DDIM-based PnI, full
//! DDIM-inversion editing, and MI-guided dimension-wise noise injection with
//! early-step structure clamping.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mi::ChannelMask;
use crate::sampler::{
    ddim_invert_with, edm_sample, edm_sample_with, Denoiser, Guidance, Inversion, Solver, Stop, Trajectory,
};
use crate::schedule::Schedule;
use crate::world::{frames_serde, LatentClip};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Pni,
    DdimPni,
    DdimInversion,
    MiInpaint,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Pni, Strategy::DdimPni, Strategy::DdimInversion, Strategy::MiInpaint];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Pni => "pni",
            Strategy::DdimPni => "ddim-pni",
            Strategy::DdimInversion => "ddim-inversion",
            Strategy::MiInpaint => "mi-inpaint",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            invalid(format!("unknown strategy {s:?}; expected one of pni, ddim-pni, ddim-inversion, mi-inpaint"))
        })
    }
}

/// How `f_clamp` picks the last clamped level `t_c`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClampRule {
    /// Clamp the first `round(f_clamp * T)` steps: `t_c = T - round(f_clamp * T)`.
    #[default]
    StepFraction,
    /// `t_c` is the level whose sigma is nearest `f_clamp * sigma_max`.
    SigmaFraction,
}

impl ClampRule {
    pub fn clamp_level(self, s: &Schedule, f_clamp: f64) -> Result<usize> {
        if !(f_clamp > 0.0 && f_clamp <= 1.0) {
            return Err(invalid(format!("f_clamp must lie in (0, 1], got {f_clamp}")));
        }
        match self {
            ClampRule::StepFraction => {
                let t = s.steps();
                Ok(t - ((f_clamp * t as f64).round() as usize).min(t))
            }
            ClampRule::SigmaFraction => s.step_for_fraction(f_clamp),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditConfig {
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_clamp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_par: Option<f64>,
    pub steps: usize,
    pub cfg_weight: f64,
    pub target: usize,
    pub seed: u64,
    #[serde(default)]
    pub clamp_rule: ClampRule,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub inversion: Inversion,
    #[serde(default)]
    pub record_trajectory: bool,
}

impl EditConfig {
    pub fn new(strategy: Strategy, target: usize, seed: u64) -> Self {
        Self {
            strategy,
            k: None,
            f_clamp: None,
            f_par: None,
            steps: 30,
            cfg_weight: 1.25,
            target,
            seed,
            clamp_rule: ClampRule::default(),
            solver: Solver::default(),
            inversion: Inversion::default(),
            record_trajectory: false,
        }
    }

    pub fn pni(f_par: f64, target: usize, seed: u64) -> Self {
        Self { f_par: Some(f_par), ..Self::new(Strategy::Pni, target, seed) }
    }

    pub fn ddim_pni(f_par: f64, target: usize, seed: u64) -> Self {
        Self { f_par: Some(f_par), ..Self::new(Strategy::DdimPni, target, seed) }
    }

    pub fn ddim_inversion(target: usize, seed: u64) -> Self {
        Self::new(Strategy::DdimInversion, target, seed)
    }

    pub fn mi_inpaint(k: f64, f_clamp: f64, target: usize, seed: u64) -> Self {
        Self { k: Some(k), f_clamp: Some(f_clamp), ..Self::new(Strategy::MiInpaint, target, seed) }
    }

    fn guidance(&self) -> Guidance {
        Guidance::new(self.target, self.cfg_weight)
    }

    pub fn validate(&self, s: &Schedule) -> Result<()> {
        if self.steps != s.steps() {
            return Err(invalid(format!("config asks for {} steps, schedule has {}", self.steps, s.steps())));
        }
        if !(self.cfg_weight >= 0.0) {
            return Err(invalid("cfg_weight must be non-negative"));
        }
        let frac = |name: &str, v: Option<f64>| -> Result<f64> {
            let v = v.ok_or_else(|| invalid(format!("{} needs {name}", self.strategy)))?;
            if !(v > 0.0 && v <= 1.0) {
                return Err(invalid(format!("{name} must lie in (0, 1], got {v}")));
            }
            Ok(v)
        };
        match self.strategy {
            Strategy::Pni | Strategy::DdimPni => {
                frac("f_par", self.f_par)?;
            }
            Strategy::DdimInversion => {}
            Strategy::MiInpaint => {
                frac("f_clamp", self.f_clamp)?;
                let k = self.k.ok_or_else(|| invalid("mi-inpaint needs k"))?;
                if !(0.0..=1.0).contains(&k) {
                    return Err(invalid(format!("k must lie in [0, 1], got {k}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditResult {
    #[serde(with = "frames_serde")]
    pub output: DMatrix<f64>,
    pub config: EditConfig,
    /// Level the reverse run started from.
    pub start_level: usize,
    /// Last clamped level, for mi-inpaint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clamp_level: Option<usize>,
    pub elapsed_ms: f64,
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
}

/// An edit together with the clip it was applied to, as written by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditRecord {
    pub source: LatentClip,
    pub result: EditResult,
}

/// One standard-normal draw shaped like the context, fixed by the seed.
pub fn edit_noise(channels: usize, frames: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(channels, frames, |_, _| StandardNormal.sample(&mut rng))
}

/// Unguided DDIM inversion of the context to the top of the grid.
pub fn invert_context<D: Denoiser + ?Sized>(
    d: &D,
    s: &Schedule,
    ctx: &DMatrix<f64>,
    inversion: Inversion,
) -> Result<Trajectory> {
    ddim_invert_with(d, &s.to_ddim(), ctx, s.steps(), Guidance::none(), inversion)
}

/// Runs whichever strategy `cfg` names. `mask` is required for mi-inpaint.
pub fn edit<D: Denoiser + ?Sized>(
    d: &D,
    s: &Schedule,
    ctx: &DMatrix<f64>,
    cfg: &EditConfig,
    mask: Option<&ChannelMask>,
) -> Result<EditResult> {
    match cfg.strategy {
        Strategy::Pni => edit_pni(d, s, ctx, cfg),
        Strategy::DdimPni => edit_ddim_pni(d, s, ctx, cfg),
        Strategy::DdimInversion => edit_ddim_inversion(d, s, ctx, cfg),
        Strategy::MiInpaint => {
            let mask = mask.ok_or_else(|| invalid("mi-inpaint needs a channel mask"))?;
            edit_mi_inpaint(d, s, ctx, cfg, mask)
        }
    }
}

/// Same as [`edit`], reusing an inversion of `ctx` that reaches the top level.
pub fn edit_with_inversion<D: Denoiser + ?Sized>(
    d: &D,
    s: &Schedule,
    ctx: &DMatrix<f64>,
    inversion: &Trajectory,
    cfg: &EditConfig,
    mask: Option<&ChannelMask>,
) -> Result<EditResult> {
    let start = Instant::now();
    cfg.validate(s)?;
    if ctx.nrows() == 0 || ctx.ncols() == 0 {
        return Err(invalid("context clip is empty"));
    }
    if inversion.len() != s.steps() + 1 {
        return Err(invalid("inversion does not cover the whole grid"));
    }
    let level = |t: usize| inversion.states[t].z.clone();
    let g = cfg.guidance();
    let (traj, start_level, clamp_level) = match cfg.strategy {
        Strategy::Pni => {
            let tf = s.step_for_fraction(cfg.f_par.unwrap())?;
            let z = ctx + edit_noise(ctx.nrows(), ctx.ncols(), cfg.seed) * s.sigma(tf);
            (edm_sample(d, s, &z, tf, Stop::Clean, g, cfg.solver)?, tf, None)
        }
        Strategy::DdimPni => {
            let tf = s.step_for_fraction(cfg.f_par.unwrap())?;
            (edm_sample(d, s, &level(tf), tf, Stop::Clean, g, cfg.solver)?, tf, None)
        }
        Strategy::DdimInversion => {
            let t = s.steps();
            (edm_sample(d, s, &level(t), t, Stop::Clean, g, cfg.solver)?, t, None)
        }
        Strategy::MiInpaint => {
            let mask = mask.ok_or_else(|| invalid("mi-inpaint needs a channel mask"))?;
            let (traj, tc) = mi_inpaint_run(d, s, ctx, inversion, cfg, mask)?;
            (traj, s.steps(), Some(tc))
        }
    };
    let output = traj.last().clone();
    Ok(EditResult {
        output,
        config: cfg.clone(),
        start_level,
        clamp_level,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        trajectory: cfg.record_trajectory.then_some(traj),
    })
}

/// `z_tf = ctx + sigma_tf * eps`, then a guided reverse run to clean.
pub fn edit_pni<D: Denoiser + ?Sized>(d: &D, s: &Schedule, ctx: &DMatrix<f64>, cfg: &EditConfig) -> Result<EditResult> {
    expect(cfg, Strategy::Pni)?;
    cfg.validate(s)?;
    // PnI never reads the inversion; a placeholder of the right length suffices.
    let fake = Trajectory {
        states: (0..=s.steps())
            .map(|t| crate::sampler::State { step: Some(t), sigma: s.sigma(t), z: DMatrix::zeros(0, 0) })
            .collect(),
    };
    edit_with_inversion(d, s, ctx, &fake, cfg, None)
}

/// Unguided inversion to `t_f`, then a guided reverse run to clean.
pub fn edit_ddim_pni<D: Denoiser + ?Sized>(
    d: &D,
    s: &Schedule,
    ctx: &DMatrix<f64>,
    cfg: &EditConfig,
) -> Result<EditResult> {
    expect(cfg, Strategy::DdimPni)?;
    cfg.validate(s)?;
    let tf = s.step_for_fraction(cfg.f_par.unwrap())?;
    let start = Instant::now();
    let inv = ddim_invert_with(d, &s.to_ddim(), ctx, tf, Guidance::none(), cfg.inversion)?;
    let traj = edm_sample(d, s, inv.last(), tf, Stop::Clean, cfg.guidance(), cfg.solver)?;
    Ok(EditResult {
        output: traj.last().clone(),
        config: cfg.clone(),
        start_level: tf,
        clamp_level: None,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        trajectory: cfg.record_trajectory.then_some(traj),
    })
}

/// Unguided inversion to the top level, then a guided reverse run to clean.
pub fn edit_ddim_inversion<D: Denoiser + ?Sized>(
    d: &D,
    s: &Schedule,
    ctx: &DMatrix<f64>,
    cfg: &EditConfig,
) -> Result<EditResult> {
    expect(cfg, Strategy::DdimInversion)?;
    let inv = invert_context(d, s, ctx, cfg.inversion)?;
    edit_with_inversion(d, s, ctx, &inv, cfg, None)
}

/// Starts from noise on the timbre channels and the inverted context on the
/// structure channels, then overwrites the structure channels with the
/// context trajectory after every step down to `t_c`.
pub fn edit_mi_inpaint<D: Denoiser + ?Sized>(
    d: &D,
    s: &Schedule,
    ctx: &DMatrix<f64>,
    cfg: &EditConfig,
    mask: &ChannelMask,
) -> Result<EditResult> {
    expect(cfg, Strategy::MiInpaint)?;
    cfg.validate(s)?;
    let inv = invert_context(d, s, ctx, cfg.inversion)?;
    edit_with_inversion(d, s, ctx, &inv, cfg, Some(mask))
}

fn mi_inpaint_run<D: Denoiser + ?Sized>(
    d: &D,
    s: &Schedule,
    ctx: &DMatrix<f64>,
    inversion: &Trajectory,
    cfg: &EditConfig,
    mask: &ChannelMask,
) -> Result<(Trajectory, usize)> {
    let (c, n) = ctx.shape();
    if mask.channels() != c {
        return Err(invalid(format!("mask covers {} channels, context has {c}", mask.channels())));
    }
    let k = cfg.k.unwrap();
    if ((k * c as f64).round() as usize) != mask.timbre_count() {
        return Err(invalid(format!("mask selects {} channels but k = {k}", mask.timbre_count())));
    }
    let top = s.steps();
    let tc = cfg.clamp_rule.clamp_level(s, cfg.f_clamp.unwrap())?;
    let structure = mask.structure_channels();
    let eps = edit_noise(c, n, cfg.seed);
    let ctx_top = &inversion.states[top].z;
    let mut z = eps * s.sigma_max();
    for &ch in &structure {
        z.set_row(ch, &ctx_top.row(ch));
    }
    let traj = edm_sample_with(d, s, &z, top, Stop::Clean, cfg.guidance(), cfg.solver, |t, z| {
        if t >= tc {
            let src = &inversion.states[t.saturating_sub(1)].z;
            for &ch in &structure {
                z.set_row(ch, &src.row(ch));
            }
        }
    })?;
    Ok((traj, tc))
}

fn expect(cfg: &EditConfig, s: Strategy) -> Result<()> {
    if cfg.strategy != s {
        return Err(invalid(format!("config is for {}, not {s}", cfg.strategy)));
    }
    Ok(())
}
