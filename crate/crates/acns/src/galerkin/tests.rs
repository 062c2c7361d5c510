use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::noise::NoiseSpec;
use crate::spectral::{BasisConfig, RealModeKind};

fn problem(n: usize, noise: NoiseSpec, lambda: f64, dt: f64) -> Problem {
    let basis = Arc::new(SpectralBasis::new(BasisConfig::periodic(n, 2.0 * PI)).unwrap());
    let noise = NoiseModel::new(&basis, noise).unwrap();
    Problem::new(
        basis,
        PotentialSpec::new(1.0, 2.0).unwrap(),
        YosidaLayer::new(lambda).unwrap(),
        noise,
        StepperConfig::with_dt(dt),
    )
    .unwrap()
}

fn quiet(n: usize) -> Problem {
    problem(n, NoiseSpec::off(), 0.01, 1e-3)
}

fn zero_velocity(p: &Problem) -> Option<VectorField> {
    Some(VectorField::zeros(p.basis.len()))
}

fn cos_mode(p: &Problem, k: (i64, i64)) -> ScalarField {
    let m = p
        .basis
        .scalar_modes()
        .iter()
        .find(|m| m.k == k && m.kind == RealModeKind::Cos)
        .unwrap();
    p.basis.scalar_mode(m)
}

#[test]
fn mu_vanishes_for_zero_phase() {
    let p = quiet(16);
    let (c, _) = p.assemble_mu(&ScalarField::zeros(p.basis.len())).unwrap();
    assert_eq!(c.max_abs(), 0.0);
}

#[test]
fn mu_linearization_for_small_amplitude() {
    let p = quiet(16);
    let eps = 1e-6;
    let mode = cos_mode(&p, (1, 2));
    let idx = p.basis.entry(1, 2);
    let b = mode.scaled(eps);
    let (c, _) = p.assemble_mu(&b).unwrap();
    let h = 1e-5;
    let f2 = (p.layer.eval_fprime_lambda(&p.potential, h).unwrap()
        - p.layer.eval_fprime_lambda(&p.potential, -h).unwrap())
        / (2.0 * h);
    let expected = b.coefficients()[idx] * (p.basis.eigenvalue(idx) + f2);
    assert!((c.coefficients()[idx] - expected).norm() < 1e-6 * expected.norm());
}

#[test]
fn mu_approaches_the_singular_chemical_potential() {
    let basis = Arc::new(SpectralBasis::new(BasisConfig::periodic(16, 2.0 * PI)).unwrap());
    let pot = PotentialSpec::new(1.0, 2.0).unwrap();
    let phi = basis.project_scalar(|x, y| 0.25 * (x.cos() + y.sin()));
    let values = basis.scalar_to_physical(&phi);
    assert!(values.iter().all(|v| v.abs() <= 0.5));
    let fp: Vec<f64> = values.iter().map(|&v| pot.eval_fprime(v).unwrap()).collect();
    let exact = basis.laplacian(&phi).scaled(-1.0).axpy(1.0, &basis.scalar_from_physical(&fp));
    let mut errs = Vec::new();
    for lambda in [1e-2, 1e-3, 1e-4] {
        let noise = NoiseModel::new(&basis, NoiseSpec::off()).unwrap();
        let p = Problem::new(
            basis.clone(),
            pot,
            YosidaLayer::new(lambda).unwrap(),
            noise,
            StepperConfig::default(),
        )
        .unwrap();
        let (c, _) = p.assemble_mu(&phi).unwrap();
        errs.push(basis.norm_h(&c.sub(&exact)));
    }
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    assert!(errs[2] < 1e-3);
}

#[test]
fn drift_linear_limits() {
    let p = quiet(16).with_physics(Physics::linear());
    let b = cos_mode(&p, (2, 1)).scaled(0.3);
    let s = p.state(0.0, 0, zero_velocity(&p), b.clone()).unwrap();
    let d = p.drift(&s).unwrap();
    let idx = p.basis.entry(2, 1);
    assert!((d.phase.coefficients()[idx] + b.coefficients()[idx] * p.basis.eigenvalue(idx)).norm() < 1e-14);

    // A single ± pair of one polarization mode does not advect itself.
    let p = quiet(16);
    let m = p.basis.stokes_modes().iter().find(|m| m.k == (1, 2)).unwrap();
    let u = p.basis.stokes_mode(m).unwrap().scaled(0.8);
    let s = p.state(0.0, 0, Some(u.clone()), ScalarField::zeros(p.basis.len())).unwrap();
    let d = p.drift(&s).unwrap();
    let expected = p.basis.stokes(&u).unwrap().scaled(-1.0);
    assert!(d.velocity.unwrap().sub(&expected).max_abs() < 1e-13);
}

#[test]
fn coupling_power_cancels() {
    let p = quiet(16);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let u = p.basis.random_velocity(&mut rng, 1.0, 1.0).unwrap();
        let b = p.basis.random_scalar(&mut rng, 0.3, 2.0);
        let s = p.state(0.0, 0, Some(u.clone()), b).unwrap();
        let force = p.basis.korteweg(&s.c, &s.b).unwrap();
        let conv = p.basis.convect(&u, &s.b).unwrap();
        let diff = p.basis.inner_velocity(&force, &u) - p.basis.inner_scalar(&conv, &s.c);
        assert!(diff.abs() <= 1e-9, "{diff}");
    }
}

#[test]
fn implicit_linear_decay_is_geometric() {
    let p = quiet(16).with_physics(Physics::linear());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let u0 = p.basis.random_velocity(&mut rng, 1.0, 1.0).unwrap();
    let b0 = p.basis.random_scalar(&mut rng, 0.2, 2.0);
    let s0 = p.state(0.0, 0, Some(u0.clone()), b0.clone()).unwrap();
    let steps = 25;
    let out = p.simulate(s0, steps as f64 * 1e-3, &p.noise, &mut []).unwrap();
    let s = out.final_state;
    for i in 0..p.basis.len() {
        let g = (1.0 + 1e-3 * p.basis.eigenvalue(i)).powi(-steps);
        let ea: Complex64 = u0.coefficients()[i] * g;
        let eb: Complex64 = b0.coefficients()[i] * g;
        assert!((s.a.as_ref().unwrap().coefficients()[i] - ea).norm() < 1e-14);
        assert!((s.b.coefficients()[i] - eb).norm() < 1e-14);
    }
}

#[test]
fn single_noise_step_from_rest() {
    let p = problem(16, NoiseSpec { seed: 3, ..NoiseSpec::default() }, 0.01, 1e-3);
    let s0 = p.state(0.0, 0, zero_velocity(&p), ScalarField::zeros(p.basis.len())).unwrap();
    let inc = p.noise.sample_increment(1e-3, 0).unwrap();
    let (s1, terms) = p.step(&s0, &inc).unwrap();
    let g1 = p.noise.apply_g1(&p.basis, &VectorField::zeros(p.basis.len()), &inc.dw1).unwrap();
    for i in 0..p.basis.len() {
        let expected = g1.coefficients()[i] / (1.0 + 1e-3 * p.basis.eigenvalue(i));
        assert!((s1.a.as_ref().unwrap().coefficients()[i] - expected).norm() < 1e-15);
    }
    let g2 = p
        .noise
        .apply_g2_lambda(&p.basis, &p.layer, &p.potential, &s0.b, &inc.dw2)
        .unwrap();
    assert!(s1.b.sub(&g2).max_abs() < 1e-15);
    assert_eq!(terms.martingale, 0.0);
    assert!((terms.g1_hs - p.noise.s1()).abs() < 1e-15);
}

#[test]
fn zero_horizon_returns_initial_state() {
    let p = quiet(16);
    let b = cos_mode(&p, (1, 0)).scaled(0.1);
    let s0 = p.initial_state(zero_velocity(&p), b).unwrap();
    let mut rec = Recorder::every(1);
    let out = p.simulate(s0.clone(), 0.0, &p.noise, &mut [&mut rec]).unwrap();
    assert_eq!(out.steps, 0);
    assert_eq!(out.final_state, s0);
    assert_eq!(rec.states.len(), 1);
}

#[test]
fn deterministic_energy_is_non_increasing() {
    let p = quiet(16);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u = p.basis.random_velocity(&mut rng, 0.1, 1.0).unwrap();
    let b = p.basis.random_scalar(&mut rng, 0.1, 2.0);
    let s0 = p.initial_state(Some(u), b).unwrap();
    let mut rec = Recorder::every(1);
    p.simulate(s0, 0.2, &p.noise, &mut [&mut rec]).unwrap();
    let e: Vec<f64> = rec.states.iter().map(|s| p.energy(s)).collect();
    for w in e.windows(2) {
        assert!(w[1] <= w[0] + 1e-10, "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn simulate_is_reproducible() {
    let p = problem(16, NoiseSpec { seed: 11, ..NoiseSpec::default() }, 0.01, 1e-3);
    let b = p.basis.project_scalar(|x, _| 0.5 * x.cos());
    let s0 = p.initial_state(zero_velocity(&p), b).unwrap();
    let a = p.simulate(s0.clone(), 0.05, &p.noise, &mut []).unwrap();
    let b = p.simulate(s0, 0.05, &p.noise, &mut []).unwrap();
    assert_eq!(a.final_state, b.final_state);
    assert!(a.final_state.a.unwrap().coefficients()[0].norm() == 0.0);
}

#[test]
fn parameter_validation() {
    let p = quiet(16);
    let explicit = StepperConfig {
        dt: 0.02,
        scheme: Scheme::FullyExplicitEm,
        ..StepperConfig::default()
    };
    let err = p.clone().with_stepper(explicit).unwrap_err().to_string();
    assert!(err.contains("λ"), "{err}");
    assert!(p.steps_to(0.0105).is_err());
    assert_eq!(p.steps_to(0.5).unwrap(), 500);
    let too_big = p.basis.project_scalar(|_, _| 1.5);
    assert!(p.initial_state(zero_velocity(&p), too_big).is_err());
}

#[test]
fn explicit_scheme_runs_when_stable() {
    let p = quiet(16);
    let stepper = StepperConfig {
        dt: 1e-3,
        scheme: Scheme::FullyExplicitEm,
        ..StepperConfig::default()
    };
    let p = p.with_stepper(stepper).unwrap();
    let b = cos_mode(&p, (1, 1)).scaled(0.2);
    let s0 = p.initial_state(zero_velocity(&p), b).unwrap();
    let out = p.simulate(s0.clone(), 0.05, &p.noise, &mut []).unwrap();
    assert!(p.energy(&out.final_state) < p.energy(&s0));
}

#[test]
fn neumann_phase_only_run() {
    let basis = Arc::new(SpectralBasis::new(BasisConfig::neumann(8, 1.0)).unwrap());
    let noise = NoiseModel::new(&basis, NoiseSpec { k1: 0, ..NoiseSpec::default() }).unwrap();
    let p = Problem::new(
        basis.clone(),
        PotentialSpec::new(1.0, 2.0).unwrap(),
        YosidaLayer::new(0.01).unwrap(),
        noise,
        StepperConfig::with_dt(1e-4),
    )
    .unwrap();
    let b = basis.project_scalar(|x, _| 0.3 * (PI * x).cos());
    let s0 = p.initial_state(None, b).unwrap();
    let out = p.simulate(s0, 0.01, &p.noise, &mut []).unwrap();
    assert!(out.final_state.a.is_none());
    assert!(out.final_state.b.is_finite());
}
