//! All four strategies on the same clip and noise seed.

use timbre_edit::bench::clip_metrics;
use timbre_edit::{build_mask, edit, EditConfig, RunConfig, Strategy};

fn main() -> timbre_edit::Result<()> {
    let cfg = RunConfig::default();
    let (world, schedule) = cfg.build()?;
    let mask = build_mask(&cfg.mi_report(&world)?, 0.5)?;
    let source = world.sample_clip(32, 11)?;
    let target = (source.instrument + 1) % world.instruments();

    println!("{:<15} {:>9} {:>7} {:>7}", "strategy", "class_sim", "dpd", "onset");
    for s in Strategy::ALL {
        let ec = match s {
            Strategy::Pni => EditConfig::pni(cfg.f_par, target, 3),
            Strategy::DdimPni => EditConfig::ddim_pni(cfg.f_par, target, 3),
            Strategy::DdimInversion => EditConfig::ddim_inversion(target, 3),
            Strategy::MiInpaint => EditConfig::mi_inpaint(0.5, 0.4, target, 3),
        };
        let out = edit(&world, &schedule, &source.data, &ec, Some(&mask))?.output;
        let m = clip_metrics(&world, &source.data, &out, target)?;
        println!("{:<15} {:>9.3} {:>7.3} {:>7.3}", s.name(), m.class_sim, m.dpd, m.onset_f1);
    }
    Ok(())
}
