use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use timbre_edit::mi::{analyze, build_mask};
use timbre_edit::probe::{make_swapped, run_probe, train_probe, train_probe_with, ProbeParams};
use timbre_edit::{ChannelMask, MiParams, Schedule, World, WorldParams};

fn grid() -> Schedule {
    Schedule::new(30, 0.002, 80.0, 7.0).unwrap()
}

fn params(f_grid: Vec<f64>) -> ProbeParams {
    ProbeParams { frames_per_class: 3000, f_grid, ..Default::default() }
}

fn report(w: &World) -> timbre_edit::MiReport {
    analyze(&w.sample_frames(10_000, 1), &MiParams::default(), 2).unwrap()
}

#[test]
fn well_separated_world_is_probed_perfectly_at_low_noise() {
    // shared channels copy a widely spaced timbre code, so a swap contradicts them
    let w = WorldParams { entanglement: 1.0, entanglement_spread: 0.0, timbre_separation: 40.0, ..Default::default() }
        .build()
        .unwrap();
    let c = run_probe(&w, &report(&w), &grid(), &params(vec![0.01, 1.0]), 3).unwrap();
    assert!(c.points[0].accuracy >= 0.95, "{}", c.points[0].accuracy);
    assert!((0.45..=0.55).contains(&c.points[1].accuracy));
}

#[test]
fn identical_populations_stay_at_chance() {
    let w = WorldParams::default().build().unwrap();
    let p = ProbeParams { swap_k: 0.0, ..params(vec![0.1, 0.5, 1.0]) };
    let c = run_probe(&w, &report(&w), &grid(), &p, 4).unwrap();
    for pt in &c.points {
        assert!((pt.accuracy - 0.5).abs() <= 0.05, "{} {}", pt.f, pt.accuracy);
    }
}

#[test]
fn shuffled_labels_stay_in_the_chance_band() {
    let w = WorldParams::default().build().unwrap();
    let r = report(&w);
    let set = w.sample_frames(3000, 5);
    let mask = build_mask(&r, 0.375).unwrap();
    let swapped = make_swapped(&set.frames, &set.instruments, &mask, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    let p = params(vec![0.1, 0.3, 0.6, 1.0]);
    let c = train_probe_with(&set.frames, &swapped, &grid(), &p, 7, true).unwrap();
    for pt in &c.points {
        assert!((pt.accuracy - 0.5).abs() <= p.chance_band + 0.02, "{} {}", pt.f, pt.accuracy);
    }
    // and the real labels are separable at low noise
    let real = train_probe(&set.frames, &swapped, &grid(), &p, 7).unwrap();
    assert!(real.points[0].accuracy > 0.6);
}

#[test]
fn swap_extremes() {
    let w = WorldParams::default().build().unwrap();
    let set = w.sample_frames(200, 8);
    let none = ChannelMask::from_timbre(64, &[]).unwrap();
    let out = make_swapped(&set.frames, &set.instruments, &none, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(out, set.frames);
    let all: Vec<usize> = (0..64).collect();
    let full = ChannelMask::from_timbre(64, &all).unwrap();
    let out = make_swapped(&set.frames, &set.instruments, &full, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    for (j, col) in out.column_iter().enumerate() {
        let src = set.frames.column_iter().position(|c| c == col).expect("whole frame copied");
        assert_ne!(set.instruments[src], set.instruments[j]);
    }
}

#[test]
fn swapping_planted_channels_keeps_pitch_and_removes_the_instrument() {
    let w = WorldParams::planted().build().unwrap();
    let set = w.sample_frames(400, 9);
    let mask = build_mask(&report(&w), 0.25).unwrap();
    let out = make_swapped(&set.frames, &set.instruments, &mask, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    assert_eq!(w.decode_pitch(&out).unwrap(), w.decode_pitch(&set.frames).unwrap());
    let post = w.instrument_posterior(&out).unwrap();
    let mean: f64 = (0..set.len()).map(|j| post[(set.instruments[j], j)]).sum::<f64>() / set.len() as f64;
    assert!(mean < 1.0 / 8.0 + 0.1, "{mean}");
}
