//! One MI-guided edit: inpaint the timbre channels, clamp the structure ones.
//!
//! cargo run --example edit_clip -- <k> <f_clamp>

use timbre_edit::bench::clip_metrics;
use timbre_edit::{build_mask, edit, EditConfig, RunConfig};

fn main() -> timbre_edit::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<f64>().expect("numeric argument"));
    let k = args.next().unwrap_or(0.5);
    let f_clamp = args.next().unwrap_or(0.4);

    let cfg = RunConfig::default();
    let (world, schedule) = cfg.build()?;
    let mask = build_mask(&cfg.mi_report(&world)?, k)?;
    let source = world.sample_clip(24, 5)?;
    let target = (source.instrument + 3) % world.instruments();

    let mut ec = EditConfig::mi_inpaint(k, f_clamp, target, 9);
    ec.record_trajectory = true;
    let result = edit(&world, &schedule, &source.data, &ec, Some(&mask))?;
    let m = clip_metrics(&world, &source.data, &result.output, target)?;

    println!("instrument {} -> {target}, clamped down to level {:?}", source.instrument, result.clamp_level);
    println!("source pitch {:?}", world.decode_pitch(&source.data)?);
    println!("edited pitch {:?}", world.decode_pitch(&result.output)?);
    println!("class posterior {:.3}, pitch distance {:.3}, onset F1 {:.3}", m.class_sim, m.dpd, m.onset_f1);
    println!("{} states recorded in {} ms", result.trajectory.map_or(0, |t| t.len()), result.elapsed_ms);
    Ok(())
}
