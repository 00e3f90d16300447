use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use timbre_edit::bench::{
    evaluate_edit, evaluate_with_reference, frechet_gaussian, paired_clips, random_dpd, reference_frames, EditedClip,
};
use timbre_edit::edits::edit;
use timbre_edit::{build_mask, GridCell, GridParams, MiReport, Schedule, Strategy, WorldParams};

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn moments(x: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.ncols() as f64;
    let m = x.column_mean();
    let c = x - &m * DMatrix::from_element(1, x.ncols(), 1.0);
    (m, &c * c.transpose() / (n - 1.0))
}

/// Denman-Beavers iteration for the principal square root.
fn sqrtm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let (mut y, mut z) = (a.clone(), DMatrix::identity(n, n));
    for _ in 0..100 {
        let yi = y.clone().try_inverse().unwrap();
        let zi = z.clone().try_inverse().unwrap();
        y = (&y + zi) * 0.5;
        z = (&z + yi) * 0.5;
    }
    y
}

#[test]
fn frechet_matches_a_denman_beavers_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for d in [1, 3, 6] {
        let ta = gaussian(d, d, &mut rng) + DMatrix::identity(d, d) * 2.0;
        let a = &ta * gaussian(d, 80, &mut rng);
        let b = gaussian(d, 120, &mut rng) * 1.5 + DMatrix::from_element(d, 120, 0.7);
        let (ma, ca) = moments(&a);
        let (mb, cb) = moments(&b);
        let expect = (&ma - &mb).norm_squared() + ca.trace() + cb.trace() - 2.0 * sqrtm(&(&ca * &cb)).trace();
        let got = frechet_gaussian(&a, &b).unwrap();
        assert!((got - expect).abs() < 1e-6 * (1.0 + expect), "d={d}: {got} vs {expect}");
    }
}

#[test]
fn frechet_of_shifted_copies_is_the_squared_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = gaussian(4, 50, &mut rng);
    let shift = DVector::from_vec(vec![1.0, -2.0, 0.5, 0.0]);
    let b = DMatrix::from_fn(4, 50, |i, j| a[(i, j)] + shift[i]);
    assert!((frechet_gaussian(&a, &b).unwrap() - shift.norm_squared()).abs() < 1e-9);
}

#[test]
fn untouched_clips_keep_their_pitch() {
    let w = WorldParams::default().build().unwrap();
    let pairs = paired_clips(&w, 20, 16, 3).unwrap();
    let edits: Vec<EditedClip> =
        pairs.iter().map(|p| EditedClip { source: &p.clip, output: &p.clip.data, target: p.target }).collect();
    let (m, per) = evaluate_edit(&w, &edits, 1).unwrap();
    assert_eq!(m.dpd_analog, 0.0);
    assert_eq!(m.onset_f1, 1.0);
    assert_eq!(per.len(), 20);
    // the context is still the source instrument, never the target
    assert!(m.class_sim < 0.05, "{}", m.class_sim);
}

fn fresh_outputs<'a>(
    pairs: &'a [timbre_edit::bench::PairedClip],
    frames: usize,
    seed: u64,
    store: &'a mut Vec<DMatrix<f64>>,
    w: &timbre_edit::World,
) -> Vec<EditedClip<'a>> {
    let targets: Vec<usize> = pairs.iter().map(|p| p.target).collect();
    let fresh = reference_frames(w, &targets, frames, seed).unwrap();
    *store = (0..pairs.len()).map(|j| fresh.columns(frames * j, frames).into_owned()).collect();
    pairs.iter().zip(store.iter()).map(|(p, o)| EditedClip { source: &p.clip, output: o, target: p.target }).collect()
}

#[test]
fn fresh_target_frames_sit_on_the_reference() {
    // single frames keep the sampling noise of the pitch mix small; every
    // clip goes to instrument 0 so the untouched sources are off-distribution
    let w = WorldParams::planted().build().unwrap();
    let mut pairs = paired_clips(&w, 4000, 1, 5).unwrap();
    for p in &mut pairs {
        p.target = 0;
    }
    let mut store = Vec::new();
    let (m, _) = evaluate_edit(&w, &fresh_outputs(&pairs, 1, 77, &mut store, &w), 1).unwrap();
    let untouched: Vec<EditedClip> =
        pairs.iter().map(|p| EditedClip { source: &p.clip, output: &p.clip.data, target: 0 }).collect();
    let (base, _) = evaluate_edit(&w, &untouched, 1).unwrap();
    // noise floor: two independent reference draws
    let targets = vec![0; pairs.len()];
    let floor = frechet_gaussian(
        &reference_frames(&w, &targets, 1, 2).unwrap(),
        &reference_frames(&w, &targets, 1, 3).unwrap(),
    )
    .unwrap();
    assert!(m.fad_analog < 3.0 * floor, "{} vs floor {floor}", m.fad_analog);
    assert!(base.fad_analog > 20.0 * m.fad_analog, "{} vs {}", base.fad_analog, m.fad_analog);
    assert!(m.class_sim > 0.95);
}

#[test]
fn fresh_target_clips_lose_the_source_pitch() {
    // uniform pitch prior, so independent decoded pitches are uniform pairs
    let w = WorldParams::planted().build().unwrap();
    let pairs = paired_clips(&w, 300, 32, 5).unwrap();
    let mut store = Vec::new();
    let (m, _) = evaluate_edit(&w, &fresh_outputs(&pairs, 32, 77, &mut store, &w), 1).unwrap();
    assert!((m.dpd_analog - random_dpd(w.pitches())).abs() < 0.4, "{}", m.dpd_analog);
    assert!(m.onset_f1 < 0.4, "{}", m.onset_f1);
}

fn small_report(channels: usize) -> MiReport {
    let v: Vec<f64> = (0..channels).map(|c| ((c * 37) % channels) as f64 / channels as f64).collect();
    MiReport::from_values(v.clone(), v, 0.0, 8, 1000)
}

#[test]
fn a_one_cell_grid_matches_a_direct_evaluation() {
    let w = WorldParams::default().build().unwrap();
    let s = Schedule::new(30, 0.002, 80.0, 7.0).unwrap();
    let report = small_report(w.channels());
    let cell = GridCell::new(Strategy::MiInpaint, Some(0.5), Some(0.4));
    let params = GridParams { n_clips: 10, frames: 8, cells: vec![cell], ..Default::default() };
    let seed = 12;
    let g = timbre_edit::run_grid(&w, &s, &report, &params, seed).unwrap();

    let pairs = paired_clips(&w, 10, 8, seed).unwrap();
    let mask = build_mask(&report, 0.5).unwrap();
    let outs: Vec<DMatrix<f64>> = pairs
        .iter()
        .map(|p| {
            edit(&w, &s, &p.clip.data, &cell.edit_config(&params, 30, p.target, p.edit_seed), Some(&mask))
                .unwrap()
                .output
        })
        .collect();
    let edits: Vec<EditedClip> =
        pairs.iter().zip(&outs).map(|(p, o)| EditedClip { source: &p.clip, output: o, target: p.target }).collect();
    let targets: Vec<usize> = pairs.iter().map(|p| p.target).collect();
    let reference = reference_frames(&w, &targets, 8, seed ^ 0x5eed_fad0).unwrap();
    let (m, per) = evaluate_with_reference(&w, &edits, &reference).unwrap();
    assert_eq!(g.rows[0].metrics, Some(m));
    assert_eq!(g.rows[0].per_clip, per);
}

#[test]
fn duplicated_cells_give_identical_rows_and_pairs_ignore_the_cells() {
    let w = WorldParams::default().build().unwrap();
    let s = Schedule::new(30, 0.002, 80.0, 7.0).unwrap();
    let report = small_report(w.channels());
    let pni = GridCell::new(Strategy::Pni, None, Some(0.5));
    let inv = GridCell::new(Strategy::DdimInversion, None, None);
    let params = GridParams { n_clips: 12, frames: 6, cells: vec![pni, inv, pni], ..Default::default() };
    let g = timbre_edit::run_grid(&w, &s, &report, &params, 8).unwrap();
    assert_eq!(g.rows[0], g.rows[2]);
    let solo = GridParams { cells: vec![inv], ..params.clone() };
    let h = timbre_edit::run_grid(&w, &s, &report, &solo, 8).unwrap();
    assert_eq!(h.rows[0], g.rows[1]);
    // pairing depends on the seed and the clip index only
    let a = paired_clips(&w, 5, 6, 8).unwrap();
    let b = paired_clips(&w, 3, 6, 8).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!((x.target, x.edit_seed, &x.clip), (y.target, y.edit_seed, &y.clip));
        assert_ne!(x.target, x.clip.instrument);
    }
}

#[test]
fn failing_cells_are_reported_not_fatal() {
    let w = WorldParams::default().build().unwrap();
    let s = Schedule::new(30, 0.002, 80.0, 7.0).unwrap();
    let bad = GridCell::new(Strategy::Pni, None, None);
    let ok = GridCell::new(Strategy::DdimInversion, None, None);
    let params = GridParams { n_clips: 17, frames: 4, cells: vec![bad, ok], ..Default::default() };
    let g = timbre_edit::run_grid(&w, &s, &small_report(w.channels()), &params, 1).unwrap();
    assert!(g.rows[0].metrics.is_none() && g.rows[0].error.is_some());
    assert!(g.rows[1].metrics.is_some());
}
