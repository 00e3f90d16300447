//! A reduced method grid with the ordering checks, written as CSV.
//! At 60 clips the closest baseline ordering may not resolve; the default grid uses 200.

use timbre_edit::bench::ordering_checks;
use timbre_edit::io::create;
use timbre_edit::RunConfig;

fn main() -> timbre_edit::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.grid.n_clips = 60;
    let (world, schedule) = cfg.build()?;
    let report = cfg.mi_report(&world)?;
    let grid = cfg.grid(&world, &schedule, &report)?;
    print!("{}", grid.to_csv_string()?);
    grid.write_csv(create("out/grid.csv".as_ref())?)?;
    for c in ordering_checks(&grid, cfg.f_par, cfg.seed)? {
        println!("{} {:<60} {:+.4} [{:+.4}, {:+.4}]", if c.pass { "ok  " } else { "FAIL" }, c.name, c.mean, c.lo, c.hi);
    }
    Ok(())
}
