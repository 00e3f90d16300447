//! Run configuration shared by the CLI, the examples and the acceptance run.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bench::{run_grid, stream_rng, GridParams, GridResult};
use crate::error::Result;
use crate::mi::{analyze, MiParams, MiReport};
use crate::probe::{run_probe, ProbeCurve, ProbeParams};
use crate::schedule::{Schedule, ScheduleParams};
use crate::world::{World, WorldParams};

/// Sub-stream ids for the master seed.
const MI_STREAM: u64 = 1;
const PROBE_STREAM: u64 = 2;
const GRID_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub schedule: ScheduleParams,
    pub world: WorldParams,
    pub mi: MiParams,
    pub probe: ProbeParams,
    /// Noise fraction for the partial-noise baselines.
    pub f_par: f64,
    pub grid: GridParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            schedule: ScheduleParams::default(),
            world: WorldParams::default(),
            mi: MiParams::default(),
            probe: ProbeParams::default(),
            f_par: 0.5,
            grid: GridParams::default(),
        }
    }
}

impl RunConfig {
    fn sub_seed(&self, stream: u64) -> u64 {
        stream_rng(self.seed, stream).gen()
    }

    pub fn build(&self) -> Result<(World, Schedule)> {
        Ok((self.world.build()?, self.schedule.build()?))
    }

    /// MI analysis of freshly sampled labeled frames.
    pub fn mi_report(&self, world: &World) -> Result<MiReport> {
        let seed = self.sub_seed(MI_STREAM);
        analyze(&world.sample_frames(self.mi.frames, seed), &self.mi, seed.wrapping_add(1))
    }

    pub fn probe_curve(&self, world: &World, s: &Schedule, report: &MiReport) -> Result<ProbeCurve> {
        run_probe(world, report, s, &self.probe, self.sub_seed(PROBE_STREAM))
    }

    pub fn grid(&self, world: &World, s: &Schedule, report: &MiReport) -> Result<GridResult> {
        run_grid(world, s, report, &self.grid, self.sub_seed(GRID_STREAM))
    }
}
