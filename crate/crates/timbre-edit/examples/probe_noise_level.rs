//! Noise-level probe: how long does instrument identity survive the noise?

use timbre_edit::probe::select_f_par;
use timbre_edit::RunConfig;

fn main() -> timbre_edit::Result<()> {
    let cfg = RunConfig::default();
    let (world, schedule) = cfg.build()?;
    let report = cfg.mi_report(&world)?;
    let curve = cfg.probe_curve(&world, &schedule, &report)?;
    println!("   f  step    sigma  accuracy");
    for p in &curve.points {
        println!("{:.2}  {:>4}  {:>7.3}  {:.3}", p.f, p.step, p.sigma, p.accuracy);
    }
    let sel = select_f_par(&curve, cfg.probe.chance_band)?;
    println!("selected f_par = {:.2} (reached chance: {})", sel.f, sel.at_chance);
    Ok(())
}
