//! Per-channel mutual information and the channel mask it induces.

use timbre_edit::mi::{analyze, cumulative_mi};
use timbre_edit::{build_mask, MiParams, WorldParams};

fn main() -> timbre_edit::Result<()> {
    let world = WorldParams::planted().build()?;
    let params = MiParams::default();
    let report = analyze(&world.sample_frames(params.frames, 3), &params, 4)?;

    let planted = &world.spec().structure_channels;
    println!("null threshold {:.4}", report.null_threshold);
    println!("rank  ch  I(z;inst)  I(z;pitch)  structure");
    for (r, &c) in report.ranking.iter().take(20).enumerate() {
        println!(
            "{r:>4} {c:>3}  {:>9.4}  {:>10.4}  {}",
            report.instrument[c],
            report.pitch[c],
            if planted.contains(&c) { "yes" } else { "" }
        );
    }
    for k in [0.25, 0.5, 0.75] {
        let (top, rest) = cumulative_mi(&report, k)?;
        let mask = build_mask(&report, k)?;
        let share = top / (top + rest);
        println!("k={k:.2}: {} timbre channels hold {:.1}% of instrument MI", mask.timbre_count(), 100.0 * share);
    }
    Ok(())
}
