mod common;

use common::{normal, rng};
use kernsyn_core::gmm::{fit_gmm, fit_joint, generate_reference, gmr_condition, EmSettings, GaussianComponent, GmmModel};
use kernsyn_core::synergy::{JointConfiguration, SynergyBasis, SynergyPoint};
use kernsyn_core::trajectory::{interpolate_coefficients, uniform_grid, Demonstration, SynergyTrajectory};
use kernsyn_core::{DMatrix, DVector, Error};

fn identity_basis(j: usize, s: usize) -> SynergyBasis {
    let fractions = vec![1.0 / s as f64; s];
    SynergyBasis::new(DMatrix::identity(j, s), JointConfiguration::zeros(j), fractions).unwrap()
}

fn demo(f: impl Fn(f64) -> Vec<f64>, n: usize, duration: f64) -> Demonstration {
    Demonstration::new(
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                (t * duration + 2.0, JointConfiguration::from_slice(&f(t)))
            })
            .collect(),
    )
}

#[test]
fn constant_demo_at_nominal_is_zero() {
    let basis = identity_basis(3, 2);
    let d = demo(|_| vec![0.0; 3], 10, 4.0);
    let out = interpolate_coefficients(&[d], &basis, &uniform_grid(7)).unwrap();
    assert!(out[0].points.iter().all(|p| p.iter().all(|v| *v == 0.0)));
}

#[test]
fn linear_demo_midpoint_exact() {
    let basis = identity_basis(2, 2);
    let d = demo(|t| vec![2.0 * t - 1.0, 0.5 * t], 2, 3.0);
    let out = interpolate_coefficients(&[d], &basis, &[0.5]).unwrap();
    assert!((out[0].points[0][0] - 0.0).abs() < 1e-15);
    assert!((out[0].points[0][1] - 0.25).abs() < 1e-15);
}

#[test]
fn sine_demo_dense_grid() {
    let basis = identity_basis(1, 1);
    let f = |t: f64| (2.0 * std::f64::consts::PI * t).sin();
    let d = demo(|t| vec![f(t)], 401, 1.7);
    let grid = uniform_grid(1000);
    let out = interpolate_coefficients(&[d], &basis, &grid).unwrap();
    let worst = grid.iter().zip(&out[0].points).map(|(&t, p)| (p[0] - f(t)).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn demo_errors() {
    let basis = identity_basis(1, 1);
    let short = Demonstration::new(vec![(0.0, JointConfiguration::zeros(1))]);
    assert!(matches!(interpolate_coefficients(&[short], &basis, &[0.0]), Err(Error::EmptyDemo(0))));
    let back = Demonstration::new(vec![(1.0, JointConfiguration::zeros(1)), (0.5, JointConfiguration::zeros(1))]);
    assert!(matches!(interpolate_coefficients(&[back], &basis, &[0.0]), Err(Error::NonMonotonicTime(0))));
}

fn gaussian_samples(seed: u64, n: usize) -> Vec<DVector<f64>> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let (a, b, c) = (normal(&mut r), normal(&mut r), normal(&mut r));
            DVector::from_vec(vec![0.5 + 0.2 * a, 1.0 + 0.3 * a + 0.1 * b, -2.0 + 0.05 * c])
        })
        .collect()
}

#[test]
fn single_component_recovers_sample_moments() {
    let data = gaussian_samples(1, 500);
    let n = data.len() as f64;
    let fit = fit_joint(&data, &EmSettings { components: 1, ..EmSettings::default() }).unwrap();
    let comp = &fit.model.components()[0];
    let mean = data.iter().fold(DVector::zeros(3), |acc, x| acc + x) / n;
    let cov = data.iter().fold(DMatrix::zeros(3, 3), |acc, x| acc + (x - &mean) * (x - &mean).transpose()) / n;
    for i in 0..3 {
        let se = (cov[(i, i)] / n).sqrt();
        assert!((comp.mean[i] - mean[i]).abs() < 3.0 * se);
        assert!((comp.mean[i] - mean[i]).abs() < 1e-9);
    }
    assert!((&comp.covariance - &cov).amax() < 1e-4 * cov.amax());
    assert!((comp.prior - 1.0).abs() < 1e-12);
}

#[test]
fn bimodal_data_is_separated() {
    let mut r = rng(4);
    let sigma = 0.05;
    let centers = [[0.2, -0.25], [0.8, 0.25]];
    let data: Vec<DVector<f64>> = (0..200)
        .map(|i| {
            let c = centers[i % 2];
            DVector::from_vec(vec![c[0] + sigma * normal(&mut r), c[1] + sigma * normal(&mut r)])
        })
        .collect();
    let fit = fit_joint(&data, &EmSettings { components: 2, seed: 9, ..EmSettings::default() }).unwrap();
    let model = &fit.model;
    // nearest-mean labelling as the oracle
    let comps = model.components();
    let mut agree = 0;
    for x in &data {
        let nearest = (0..2)
            .min_by(|&a, &b| (x - &comps[a].mean).norm().partial_cmp(&(x - &comps[b].mean).norm()).unwrap())
            .unwrap();
        let post = posterior(model, x);
        if post[nearest] > 0.99 {
            agree += 1;
        }
    }
    assert!(agree as f64 / data.len() as f64 > 0.99);
}

fn posterior(model: &GmmModel, x: &DVector<f64>) -> Vec<f64> {
    let dens: Vec<f64> = model
        .components()
        .iter()
        .map(|c| {
            let d = x.len() as f64;
            let inv = c.covariance.clone().try_inverse().unwrap();
            let diff = x - &c.mean;
            let q = (diff.transpose() * inv * &diff)[(0, 0)];
            c.prior * (-0.5 * q).exp() / ((2.0 * std::f64::consts::PI).powf(d) * c.covariance.determinant()).sqrt()
        })
        .collect();
    let total: f64 = dens.iter().sum();
    dens.iter().map(|v| v / total).collect()
}

fn wavy(noise: f64, seed: u64) -> Vec<SynergyTrajectory> {
    let mut r = rng(seed);
    (0..6)
        .map(|k| {
            let times = uniform_grid(40);
            let points = times
                .iter()
                .map(|&t| {
                    let a = (3.0 * t).sin() + 0.02 * k as f64 + noise * normal(&mut r);
                    let b = t * t - 0.01 * k as f64 + noise * normal(&mut r);
                    SynergyPoint::from_slice(&[a, b])
                })
                .collect();
            SynergyTrajectory::new(times, points).unwrap()
        })
        .collect()
}

fn non_decreasing(history: &[f64]) -> bool {
    history.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0))
}

#[test]
fn em_monotone_and_deterministic() {
    let trajs = wavy(0.02, 8);
    let settings = EmSettings { components: 4, seed: 21, ..EmSettings::default() };
    let a = fit_gmm(&trajs, &settings).unwrap();
    let b = fit_gmm(&trajs, &settings).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.log_likelihood, b.log_likelihood);
    assert!(non_decreasing(&a.objective));
    assert!(non_decreasing(&a.log_likelihood), "{:?}", a.log_likelihood);
    let priors: f64 = a.model.components().iter().map(|c| c.prior).sum();
    assert!((priors - 1.0).abs() < 1e-9);
}

#[test]
fn penalized_objective_monotone_on_near_degenerate_data() {
    let fit = fit_gmm(&wavy(0.0, 0), &EmSettings { components: 4, seed: 21, ..EmSettings::default() }).unwrap();
    assert!(non_decreasing(&fit.objective));
}

#[test]
fn too_few_samples() {
    let data = gaussian_samples(2, 5);
    assert!(matches!(
        fit_joint(&data, &EmSettings { components: 2, ..EmSettings::default() }),
        Err(Error::InsufficientSamples { .. })
    ));
}

fn component(prior: f64, mean: &[f64], cov: DMatrix<f64>) -> GaussianComponent {
    GaussianComponent {
        prior,
        mean: DVector::from_column_slice(mean),
        covariance: cov,
    }
}

#[test]
fn single_component_conditional_closed_form() {
    let cov = DMatrix::from_row_slice(3, 3, &[0.04, 0.01, -0.006, 0.01, 0.09, 0.0, -0.006, 0.0, 0.05]);
    let model = GmmModel::new(vec![component(1.0, &[0.5, 1.0, -1.0], cov.clone())]).unwrap();
    let t = 0.8;
    let (m, c) = gmr_condition(&model, t);
    let sxx = cov[(0, 0)];
    let syx = cov.view((1, 0), (2, 1)).into_owned();
    let syy = cov.view((1, 1), (2, 2)).into_owned();
    let mean = DVector::from_column_slice(&[1.0, -1.0]) + &syx * ((t - 0.5) / sxx);
    let expected_cov = syy - &syx * syx.transpose() / sxx;
    assert!((&*m - mean).amax() < 1e-12);
    assert!((c - expected_cov).amax() < 1e-12);
}

#[test]
fn far_components_do_not_leak() {
    let s = 0.01;
    let cov = DMatrix::from_row_slice(2, 2, &[s * s, 0.3 * s * s, 0.3 * s * s, s * s]);
    let model = GmmModel::new(vec![
        component(0.5, &[0.2, 1.0], cov.clone()),
        component(0.5, &[0.2 + 10.0 * s, -1.0], cov.clone()),
    ])
    .unwrap();
    let (m, c) = gmr_condition(&model, 0.2);
    let (m0, c0) = model.component_conditional(0, 0.2);
    assert!((&*m - m0).amax() < 1e-6);
    assert!((c - c0).amax() < 1e-6);
}

#[test]
fn decoupled_component_is_flat() {
    let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![0.1, 0.2, 0.3]));
    let model = GmmModel::new(vec![component(1.0, &[0.5, 0.7, -0.2], cov)]).unwrap();
    let (a, _) = gmr_condition(&model, 0.0);
    let (b, _) = gmr_condition(&model, 1.0);
    assert_eq!(a, b);
}

#[test]
fn reference_from_linear_data() {
    let grid = uniform_grid(50);
    let line = |t: f64| [0.3 - 0.6 * t, 0.1 + 0.4 * t];
    let trajs: Vec<SynergyTrajectory> = (0..3)
        .map(|_| SynergyTrajectory::new(grid.clone(), grid.iter().map(|&t| SynergyPoint::from_slice(&line(t))).collect()).unwrap())
        .collect();
    let fit = fit_gmm(&trajs, &EmSettings { components: 3, seed: 1, ..EmSettings::default() }).unwrap();
    let reference = generate_reference(&fit.model, &grid).unwrap();
    for (t, m) in grid.iter().zip(reference.means()) {
        let l = line(*t);
        assert!((m[0] - l[0]).abs() < 0.02 && (m[1] - l[1]).abs() < 0.02);
    }
    for c in reference.covariances() {
        assert!(c.clone().symmetric_eigenvalues().min() >= -1e-9);
    }
    let one = generate_reference(&fit.model, &[0.4]).unwrap();
    let (m, c) = gmr_condition(&fit.model, 0.4);
    assert_eq!(one.means()[0], m);
    assert_eq!(one.covariances()[0], c);
}
