use kernsyn_core::force::{adapt_force, contact_forces, friction_cone_check, grasp_matrix, Contact, ForceProfile, GraspModel};
use kernsyn_core::gmm::{gmr_condition, GaussianComponent, GmmModel};
use kernsyn_core::kernel::{build_kernel_matrix, KernelKind, KernelSpec};
use kernsyn_core::kmp::{fuse_priorities, insert_via_point, kmp_fit, KmpSettings, MeanRegularizer, ViaPoint};
use kernsyn_core::metrics::{pearson_r, rmse};
use kernsyn_core::perception::{euclidean_cluster, pose_to_synergy, ransac_plane, svm_train, ObjectPose, PointCloud, RansacSettings, SvmSettings, SynergyMappingParams};
use kernsyn_core::synergy::{fit_synergy_basis, ConfigurationMatrix, JointConfiguration, PcaSpectrum, SynergyBasis, SynergyPoint};
use kernsyn_core::trajectory::{uniform_grid, ReferenceTrajectory};
use kernsyn_core::{DMatrix, DVector};
use proptest::collection::vec;
use proptest::prelude::*;

fn min_eig(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().min()
}

fn kernel_spec() -> impl Strategy<Value = KernelSpec> {
    (0usize..3, 0.01f64..0.5, 0.1f64..5.0, 0.05f64..20.0).prop_map(|(k, l, s, a)| match KernelKind::ALL[k] {
        KernelKind::Exponential => KernelSpec::exponential(l, s),
        KernelKind::Gaussian => KernelSpec::gaussian(l, s),
        KernelKind::Cauchy => KernelSpec::cauchy(l, s, a),
    })
}

fn postures() -> impl Strategy<Value = Vec<Vec<f64>>> {
    vec(vec(-1.5f64..1.5, 6), 3..30)
}

fn fitted_basis(rows: &[Vec<f64>]) -> Option<SynergyBasis> {
    let configs = ConfigurationMatrix::from_postures(rows, None).ok()?;
    fit_synergy_basis(&configs, 0.9).ok()
}

/// Random SPD matrix `A Aᵀ + εI`.
fn spd(dim: usize) -> impl Strategy<Value = DMatrix<f64>> {
    vec(-1.0f64..1.0, dim * dim).prop_map(move |v| {
        let a = DMatrix::from_vec(dim, dim, v);
        &a * a.transpose() + DMatrix::identity(dim, dim) * 0.05
    })
}

fn gmm(dim: usize) -> impl Strategy<Value = GmmModel> {
    vec((0.05f64..1.0, vec(-1.0f64..1.0, dim), spd(dim)), 1..5).prop_map(|parts| {
        let total: f64 = parts.iter().map(|p| p.0).sum();
        GmmModel::new(
            parts
                .into_iter()
                .map(|(w, m, c)| GaussianComponent { prior: w / total, mean: DVector::from_vec(m), covariance: c })
                .collect(),
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn basis_columns_orthonormal(rows in postures()) {
        if let Some(b) = fitted_basis(&rows) {
            let gram = b.e_hat().transpose() * b.e_hat();
            prop_assert!((gram - DMatrix::identity(b.synergy_dim(), b.synergy_dim())).amax() <= 1e-9);
            prop_assert!(b.variance_fractions().windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(b.variance_fractions().iter().sum::<f64>() >= 0.9 - 1e-12);
        }
    }

    #[test]
    fn project_reconstruct_roundtrip(rows in postures(), e in vec(-3.0f64..3.0, 6)) {
        if let Some(b) = fitted_basis(&rows) {
            let e = SynergyPoint::from_slice(&e[..b.synergy_dim()]);
            let back = b.project(&b.reconstruct(&e).unwrap()).unwrap();
            prop_assert!((&*back - &*e).amax() <= 1e-9);
        }
    }

    #[test]
    fn spectrum_fractions_sum_to_one(rows in postures()) {
        if let Ok(configs) = ConfigurationMatrix::from_postures(&rows, None) {
            if let Ok(s) = PcaSpectrum::of(&configs) {
                prop_assert!(s.fractions.iter().all(|f| *f >= 0.0));
                prop_assert!((s.fractions.sum() - 1.0).abs() <= 1e-9);
                prop_assert_eq!(fitted_basis(&rows), fitted_basis(&rows));
            }
        }
    }

    #[test]
    fn gmr_output_symmetric_psd(model in gmm(3), t in -2.0f64..2.0) {
        let (_, cov) = gmr_condition(&model, t);
        prop_assert!((&cov - cov.transpose()).amax() <= 1e-9);
        prop_assert!(min_eig(&cov) >= -1e-9);
        let h: f64 = model.responsibilities(t).iter().sum();
        prop_assert!((h - 1.0).abs() <= 1e-9);
        let priors: f64 = model.components().iter().map(|c| c.prior).sum();
        prop_assert!((priors - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn kernel_symmetry_and_decay(spec in kernel_spec(), a in -2.0f64..2.0, b in -2.0f64..2.0, d in 0.0f64..1.0, extra in 0.0f64..1.0) {
        prop_assert_eq!(spec.eval(a, b), spec.eval(b, a));
        prop_assert!(spec.eval(0.0, d + extra) <= spec.eval(0.0, d));
        prop_assert!(spec.eval(a, b) >= 0.0);
    }

    #[test]
    fn cauchy_tails_dominate_gaussian(l in 0.01f64..0.5, s in 0.1f64..5.0, alpha in 0.05f64..50.0, ds in vec(0.0f64..3.0, 1..40)) {
        let g = KernelSpec::gaussian(l, s);
        let c = KernelSpec::cauchy(l, s, alpha);
        for d in ds {
            let (kg, kc) = (g.eval(0.0, d), c.eval(0.0, d));
            if kg > 0.0 {
                prop_assert!(kc / kg >= 1.0 - 1e-12);
            }
        }
    }

    #[test]
    fn kernel_matrix_symmetric_psd(spec in kernel_spec(), times in vec(0.0f64..1.0, 1..30), dim in 1usize..3) {
        let k = build_kernel_matrix(&spec, &times, dim);
        prop_assert!((&k - k.transpose()).amax() <= 1e-9);
        prop_assert!(min_eig(&k) >= -1e-9);
    }

    #[test]
    fn via_point_attained(
        kind in 0usize..3,
        lambda in 0.01f64..1.0,
        t_via in 0.05f64..0.95,
        target in vec(-1.0f64..1.0, 2),
        var in 1e-9f64..1e-6,
    ) {
        let times = uniform_grid(21);
        let means = times.iter().map(|&t| SynergyPoint::from_slice(&[t.sin(), t * t])).collect();
        let reference = ReferenceTrajectory::new(times, means, vec![DMatrix::identity(2, 2) * 0.01; 21]).unwrap();
        let via = ViaPoint::isotropic(t_via, SynergyPoint::from_slice(&target), var).unwrap();
        let adapted = insert_via_point(&reference, &via, 0.025).unwrap();
        let settings = KmpSettings::new(KernelSpec::default_for(KernelKind::ALL[kind]), lambda)
            .with_regularizer(MeanRegularizer::ReferenceCovariance);
        let model = kmp_fit(&adapted, &settings).unwrap();
        let p = model.predict_mean(t_via);
        for d in 0..2 {
            prop_assert!((p[d] - target[d]).abs() <= 0.01, "{} vs {}", p[d], target[d]);
        }
    }

    #[test]
    fn fused_precision_is_sum(a in spd(2), b in spd(2), ma in vec(-1.0f64..1.0, 2), mb in vec(-1.0f64..1.0, 2), wa in 0.1f64..10.0, wb in 0.1f64..10.0) {
        let ra = ReferenceTrajectory::new(vec![0.0], vec![SynergyPoint::from_slice(&ma)], vec![a.clone()]).unwrap();
        let rb = ReferenceTrajectory::new(vec![0.0], vec![SynergyPoint::from_slice(&mb)], vec![b.clone()]).unwrap();
        let f = fuse_priorities(&[ra, rb], &[vec![wa], vec![wb]]).unwrap();
        let cov = &f.covariances()[0];
        prop_assert!(min_eig(cov) >= -1e-9);
        let precision = a.try_inverse().unwrap() * wa + b.try_inverse().unwrap() * wb;
        let fused_precision = cov.clone().try_inverse().unwrap();
        prop_assert!((fused_precision - &precision).amax() <= 1e-9 * precision.amax().max(1.0));
    }

    #[test]
    fn clusters_disjoint_and_chained(pts in vec((0.0f64..0.2, 0.0f64..0.2, 0.0f64..0.02), 1..300), eps in 0.005f64..0.03, min_points in 1usize..5) {
        let pts: Vec<[f64; 3]> = pts.into_iter().map(|(x, y, z)| [x, y, z]).collect();
        let cloud = PointCloud::from_xyz(&pts).unwrap();
        let clusters = euclidean_cluster(&cloud, eps, min_points).unwrap();
        let mut seen = vec![false; pts.len()];
        for c in &clusters {
            prop_assert!(c.len() >= min_points);
            for &i in &c.indices {
                prop_assert!(!seen[i]);
                seen[i] = true;
            }
            // chain connectivity: every member reachable inside the cluster
            let mut reached = vec![c.indices[0]];
            let mut frontier = vec![c.indices[0]];
            while let Some(i) = frontier.pop() {
                for &j in &c.indices {
                    if !reached.contains(&j) && dist(&pts[i], &pts[j]) <= eps {
                        reached.push(j);
                        frontier.push(j);
                    }
                }
            }
            prop_assert_eq!(reached.len(), c.len());
        }
        // a discarded point only links to other discarded points of a small component
        for (i, p) in pts.iter().enumerate() {
            if !seen[i] {
                for (j, q) in pts.iter().enumerate() {
                    if dist(p, q) <= eps {
                        prop_assert!(!seen[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn ransac_argmax_consistent(pts in vec((-1.0f64..1.0, -1.0f64..1.0, -0.1f64..0.1), 3..200), seed in 0u64..1000) {
        let pts: Vec<[f64; 3]> = pts.into_iter().map(|(x, y, z)| [x, y, z]).collect();
        let cloud = PointCloud::from_xyz(&pts).unwrap();
        if let Ok(fit) = ransac_plane(&cloud, &RansacSettings { iterations: 30, inlier_threshold: 0.02, seed }) {
            prop_assert!(fit.candidate_counts.iter().all(|&c| c <= fit.inliers.len()));
        }
    }

    #[test]
    fn svm_checkpoints_non_increasing(xs in vec(vec(-2.0f64..2.0, 3), 4..60), seed in 0u64..100) {
        let labels: Vec<bool> = xs.iter().map(|x| x[0] + 0.3 * x[1] > 0.0).collect();
        if labels.iter().any(|l| *l) && labels.iter().any(|l| !*l) {
            let t = svm_train(&xs, &labels, ("n", "p"), &SvmSettings { c: 1.0, epochs: 20, seed }).unwrap();
            prop_assert!(t.objective_checkpoints.iter().all(|v| v.is_finite()));
            prop_assert!(t.objective_checkpoints.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn pose_map_linear(a in vec(-1.0f64..1.0, 6), b in vec(-1.0f64..1.0, 6), k in -3.0f64..3.0) {
        let mut e = DMatrix::zeros(6, 2);
        e[(0, 0)] = 1.0;
        e[(4, 1)] = 1.0;
        let basis = SynergyBasis::new(e, JointConfiguration::zeros(6), vec![0.5, 0.4]).unwrap();
        let params = SynergyMappingParams {
            compliance: DMatrix::from_fn(6, 6, |i, j| if i == j { 1.5 } else { 0.05 * (i + j) as f64 }),
            motion_transfer: DMatrix::from_fn(6, 6, |i, j| if i == j { 1.0 } else { 0.02 * (i as f64 - j as f64) }),
        };
        let pose = |v: &[f64]| ObjectPose { centroid: [v[0], v[1], v[2]], extents: [v[3], v[4], v[5]], label: String::new(), score: 0.0 };
        let map = |v: &[f64]| pose_to_synergy(&pose(v), &params, &basis, 0.5, 1e-6).unwrap().desired_e.into_inner();
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let scaled: Vec<f64> = a.iter().map(|x| k * x).collect();
        prop_assert!((map(&sum) - (map(&a) + map(&b))).amax() <= 1e-12);
        prop_assert!((map(&scaled) - map(&a) * k).amax() <= 1e-12);
    }

    #[test]
    fn contact_forces_superpose(w1 in vec(-1.0f64..1.0, 6), w2 in vec(-1.0f64..1.0, 6), e1 in vec(-1.0f64..1.0, 2), e2 in vec(-1.0f64..1.0, 2)) {
        let (model, basis) = grasp_fixture();
        let f = |w: &[f64], e: &[f64]| {
            let omega: [f64; 6] = w.try_into().unwrap();
            contact_forces(&model, &omega, &basis, &SynergyPoint::from_slice(e)).unwrap().stacked()
        };
        let ws: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| a + b).collect();
        let es: Vec<f64> = e1.iter().zip(&e2).map(|(a, b)| a + b).collect();
        prop_assert!((f(&ws, &es) - (f(&w1, &e1) + f(&w2, &e2))).amax() <= 1e-12);
    }

    #[test]
    fn cone_scale_and_spin_invariant(fx in -2.0f64..2.0, fy in -2.0f64..2.0, fz in -1.0f64..3.0, c in 0.01f64..100.0, angle in 0.0f64..6.283, mu in 0.05f64..1.5) {
        let f = [fx, fy, fz];
        let flag = friction_cone_check(&f, mu);
        // stay away from the boundary where round-off decides
        let t = (fx * fx + fy * fy).sqrt();
        if t > 0.0 && (fz / t - mu).abs() > 1e-9 {
            prop_assert_eq!(friction_cone_check(&f.map(|v| v * c), mu), flag);
            let (s, co) = angle.sin_cos();
            prop_assert_eq!(friction_cone_check(&[co * fx - s * fy, s * fx + co * fy, fz], mu), flag);
        }
    }

    #[test]
    fn adaptation_reduces_error(target in 2.4f64..4.2, measured in 1.0f64..5.0, gain in 0.05f64..1.0) {
        let (model, basis) = grasp_fixture();
        let omega = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let times = vec![0.0, 0.1];
        let base = contact_forces(&model, &omega, &basis, &SynergyPoint::from_slice(&[measured / 3.0, 0.0])).unwrap();
        let start = base.grip();
        let tp = ForceProfile::new(times.clone(), vec![target, target], 1.0).unwrap();
        let mp = ForceProfile::new(times, vec![start, start], 1.0).unwrap();
        let de = adapt_force(&tp, &mp, &model, &basis, gain).unwrap();
        let e0 = SynergyPoint::from_slice(&[measured / 3.0, 0.0]);
        let after = contact_forces(&model, &omega, &basis, &(&e0 + &de)).unwrap().grip();
        if (target - start).abs() > 1e-9 {
            prop_assert!((target - after).abs() < (target - start).abs());
        }
    }

    #[test]
    fn pearson_affine_invariant(a in vec(-5.0f64..5.0, 3..50), p in vec(-5.0f64..5.0, 50), s in 0.1f64..10.0, o in -10.0f64..10.0) {
        let p = &p[..a.len()];
        if let Ok(r) = pearson_r(&a, p) {
            let scaled: Vec<f64> = a.iter().map(|v| s * v + o).collect();
            let r2 = pearson_r(&scaled, p).unwrap();
            prop_assert!((r - r2).abs() <= 1e-9);
            prop_assert!((-1.0..=1.0).contains(&r));
        }
        prop_assert_eq!(rmse(&a, p).unwrap(), rmse(p, &a).unwrap());
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn grasp_fixture() -> (GraspModel, SynergyBasis) {
    let contacts = [
        Contact { position: [0.03, 0.0, 0.0], normal: [-1.0, 0.0, 0.0] },
        Contact { position: [-0.015, 0.026, 0.0], normal: [0.5, -0.866, 0.0] },
        Contact { position: [-0.015, -0.026, 0.0], normal: [0.5, 0.866, 0.0] },
    ];
    let mut xi = DMatrix::zeros(9, 6);
    for c in 0..3 {
        xi[(3 * c + 2, 0)] = 3.0;
        xi[(3 * c + 2, 1)] = 1.0;
        xi[(3 * c, 2 + c)] = 0.5;
    }
    let model = GraspModel {
        grasp_matrix: grasp_matrix(&contacts).unwrap(),
        internal_stiffness: xi,
        hand_jacobian: DMatrix::identity(9, 9),
        motor_constants: vec![1.0; 9],
    };
    let mut e = DMatrix::zeros(6, 2);
    e[(0, 0)] = 1.0;
    e[(2, 1)] = 1.0;
    (model, SynergyBasis::new(e, JointConfiguration::zeros(6), vec![0.6, 0.3]).unwrap())
}
