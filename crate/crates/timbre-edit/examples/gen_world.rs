//! Build the default world, print its layout and write a small labeled dataset.
//!
//! cargo run --example gen_world -- out/dataset.jsonl

use timbre_edit::io::save_dataset;
use timbre_edit::WorldParams;

fn main() -> timbre_edit::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "out/dataset.jsonl".into());
    let params = WorldParams::default();
    let world = params.build()?;
    let spec = world.spec();
    println!(
        "{} channels, {} instruments x {} pitches, tau {}",
        world.channels(),
        world.instruments(),
        world.pitches(),
        world.tau()
    );
    println!("structure channels: {:?}", spec.structure_channels);

    let clip = world.sample_clip(16, 1)?;
    println!("clip of instrument {} with pitch track {:?}", clip.instrument, clip.pitch_track);
    println!("decoded pitch        {:?}", world.decode_pitch(&clip.data)?);

    let set = world.sample_frames(2_000, 2);
    save_dataset(&set, path.as_ref())?;
    println!("wrote {} frames to {path}", set.len());
    Ok(())
}
