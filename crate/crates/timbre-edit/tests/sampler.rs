use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use timbre_edit::sampler::{ddim_invert_with, ddim_sample, edm_sample, Inversion};
use timbre_edit::world::{Conditioning, WorldSpec};
use timbre_edit::{Guidance, Schedule, Solver, Stop, World, WorldParams};

fn round_trip_error(w: &World, clip: &DMatrix<f64>, steps: usize, inversion: Inversion) -> f64 {
    let s = Schedule::new(steps, 0.002, 80.0, 7.0).unwrap();
    let c = s.to_ddim();
    let inv = ddim_invert_with(w, &c, clip, steps, Guidance::none(), inversion).unwrap();
    let back = edm_sample(w, &s, inv.last(), steps, Stop::Clean, Guidance::none(), Solver::Euler).unwrap();
    (back.last() - clip).norm() / clip.norm()
}

#[test]
fn inversion_round_trip_improves_with_steps() {
    let w = WorldParams::default().build().unwrap();
    let clip = w.sample_clip(32, 21).unwrap().data;
    let errs: Vec<f64> =
        [25, 50, 100, 200].iter().map(|&n| round_trip_error(&w, &clip, n, Inversion::default())).collect();
    assert!(errs.windows(2).all(|e| e[1] < e[0]), "{errs:?}");
    assert!(errs[3] < 1e-2, "{errs:?}");
}

#[test]
fn explicit_inversion_converges_slowly() {
    // first order, with occasional basin flips near component boundaries
    let w = WorldParams::default().build().unwrap();
    let clip = w.sample_clip(32, 21).unwrap().data;
    let errs: Vec<f64> =
        [25, 50, 100, 200].iter().map(|&n| round_trip_error(&w, &clip, n, Inversion::Explicit)).collect();
    assert!(errs.windows(2).all(|e| e[1] < e[0]), "{errs:?}");
    let corrected = round_trip_error(&w, &clip, 200, Inversion::default());
    assert!(corrected < errs[3] / 10.0, "{corrected} vs {errs:?}");
}

#[test]
fn more_corrections_shrink_the_round_trip_error() {
    let w = WorldParams::default().build().unwrap();
    let clip = w.sample_clip(32, 22).unwrap().data;
    let e1 = round_trip_error(&w, &clip, 100, Inversion::Corrected { iterations: 1 });
    let e3 = round_trip_error(&w, &clip, 100, Inversion::Corrected { iterations: 3 });
    assert!(e3 < e1, "{e3} {e1}");
}

#[test]
fn ddim_terminal_mass_matches_mixture_weights() {
    // 1-D world with components at -3 and +3, prior 0.3 / 0.7
    let mut spec = WorldSpec::from_means(vec![vec![-3.0], vec![3.0]], 1, 0.5, Conditioning::Hard);
    spec.log_prior = vec![0.3f64.ln(), 0.7f64.ln()];
    let w = World::new(spec).unwrap();
    let s = Schedule::new(200, 0.002, 80.0, 7.0).unwrap();
    let c = s.to_ddim();
    let n = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // start from the exact noisy marginal at sigma_T
    let sd = (0.25f64 + 80.0 * 80.0).sqrt();
    let z = DMatrix::from_fn(1, n, |_, _| {
        let centre = if rand::Rng::gen_bool(&mut rng, 0.7) { 3.0 } else { -3.0 };
        centre + sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
    });
    let out = ddim_sample(&w, &c, &z, 200, 0, Guidance::none()).unwrap();
    let pos = out.last().iter().filter(|v| **v > 0.0).count() as f64 / n as f64;
    assert!((pos - 0.7).abs() < 0.03, "{pos}");
}
