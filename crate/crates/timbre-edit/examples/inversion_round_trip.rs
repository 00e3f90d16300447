//! Invert a clip to the top of the grid and sample it back, explicit vs corrected.

use timbre_edit::sampler::{ddim_invert_with, ddim_sample};
use timbre_edit::{Guidance, Inversion, Schedule, WorldParams};

fn main() -> timbre_edit::Result<()> {
    let world = WorldParams::default().build()?;
    let clip = world.sample_clip(16, 21)?;
    for steps in [25, 50, 100, 200] {
        let s = Schedule::new(steps, 0.002, 80.0, 7.0)?;
        let c = s.to_ddim();
        print!("{steps:>4} steps:");
        for inv in [Inversion::Explicit, Inversion::Corrected { iterations: 1 }] {
            let up = ddim_invert_with(&world, &c, &clip.data, steps, Guidance::none(), inv)?;
            let back = ddim_sample(&world, &c, up.last(), steps, 0, Guidance::none())?.into_last();
            let err = (back - &clip.data).norm() / clip.data.norm();
            print!("  {inv:?} {err:.2e}");
        }
        println!();
    }
    Ok(())
}
