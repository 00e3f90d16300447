//! Score a batch of edits: FAD analog, class posterior, pitch distance, onset F1.

use timbre_edit::bench::{evaluate_edit, paired_clips, EditedClip};
use timbre_edit::{edit, EditConfig, RunConfig};

fn main() -> timbre_edit::Result<()> {
    let cfg = RunConfig::default();
    let (world, schedule) = cfg.build()?;
    let pairs = paired_clips(&world, 40, 16, 1)?;
    let outputs = pairs
        .iter()
        .map(|p| {
            edit(&world, &schedule, &p.clip.data, &EditConfig::pni(0.5, p.target, p.edit_seed), None).map(|r| r.output)
        })
        .collect::<timbre_edit::Result<Vec<_>>>()?;
    let edits: Vec<EditedClip> =
        pairs.iter().zip(&outputs).map(|(p, o)| EditedClip { source: &p.clip, output: o, target: p.target }).collect();
    let (report, _) = evaluate_edit(&world, &edits, 2)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
