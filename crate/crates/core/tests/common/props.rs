//! Randomized property suites shared by the `properties` and `acceptance`
//! targets. Each suite runs a fixed number of deterministic proptest cases.

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRng, TestRunner};
use rigid_witness::cost::{eval_loss, lipschitz_constants, InnerDistance, OuterLoss};
use rigid_witness::data::{generate_instance, random_rotation, InstanceSpec};
use rigid_witness::geom::{
    apply_alignment, embed_subspace_rotation, project_cloud, rotation_aligning_directions,
};
use rigid_witness::prob::prob_alignment;
use rigid_witness::registration::{
    align_and_match, icp, AlignMatchOptions, IcpOptions, WitnessBudget,
};
use rigid_witness::witness::{best_exhaustive, best_sampled};
use rigid_witness::{Aggregator, CostSpec, RotationMatrix, Subspace, Vector};

use super::{random_alignment, random_vector, rng, uniform_cloud};

pub const CASES: u32 = 1000;

pub fn run<S: Strategy>(
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let config = Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config.clone(), TestRng::deterministic_rng(config.rng_algorithm));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn check_rotation(r: &RotationMatrix) -> Result<(), TestCaseError> {
    let m = r.matrix();
    let d = m.nrows();
    let err = (m.transpose() * m - nalgebra::DMatrix::<f64>::identity(d, d)).norm();
    prop_assert!(err < 1e-9, "orthogonality error {err}");
    let det = m.determinant();
    prop_assert!((det - 1.0).abs() < 1e-9, "determinant {det}");
    Ok(())
}

fn random_subspace(d: usize, k: usize, seed: u64) -> Subspace {
    let mut g = rng(seed);
    loop {
        let vs: Vec<Vector> = (0..k).map(|_| random_vector(d, 1.0, &mut g)).collect();
        if let Ok(s) = Subspace::spanned_by(&vs) {
            if s.dim() == k {
                return s;
            }
        }
    }
}

/// Rotations built by direction alignment, subspace embedding and random
/// sampling are proper orthogonal.
pub fn so_d_invariants() -> Result<(), String> {
    run((2usize..=7, any::<u64>()), |(d, seed)| {
        let mut g = rng(seed);
        let k = 2 + (seed as usize % (d - 1));
        let x = random_subspace(d, k, seed ^ 0x9e37);
        let p = x.project(&random_vector(d, 1.0, &mut g));
        let q = x.project(&random_vector(d, 1.0, &mut g));
        if p.norm() > 1e-6 && q.norm() > 1e-6 {
            let r = rotation_aligning_directions(&p, &q, &x).map_err(|e| TestCaseError::fail(e.to_string()))?;
            check_rotation(&r)?;
            let image = r.apply(p.as_slice());
            let cos = image.dot(&q) / (image.norm() * q.norm());
            prop_assert!(cos > 1.0 - 1e-9);
        }
        let inner = random_rotation(k, &mut g);
        check_rotation(&inner)?;
        let r = embed_subspace_rotation(&inner, &x).map_err(|e| TestCaseError::fail(e.to_string()))?;
        check_rotation(&r)?;
        check_rotation(&random_rotation(d, &mut g))?;
        Ok(())
    })
}

/// A rotation inside a 2-plane `X` by `|θ| ≤ π/2` moves no vector, relative
/// to its length, more than it moves the vectors of `X`.
pub fn displacement_monotonicity() -> Result<(), String> {
    run(
        (2usize..=7, -std::f64::consts::FRAC_PI_2..=std::f64::consts::FRAC_PI_2, any::<u64>()),
        |(d, theta, seed)| {
            let mut g = rng(seed);
            let x = random_subspace(d, 2, seed);
            let r = embed_subspace_rotation(&RotationMatrix::planar(theta), &x).unwrap();
            let p = x.project(&random_vector(d, 1.0, &mut g));
            let q = random_vector(d, 1.0, &mut g);
            prop_assume!(p.norm() > 1e-9 && q.norm() > 1e-9);
            let moved = |v: &Vector| (r.apply(v.as_slice()) - v).norm() / v.norm();
            prop_assert!(moved(&q) <= moved(&p) * (1.0 + 1e-9) + 1e-12);
            Ok(())
        },
    )
}

fn loss_strategy() -> impl Strategy<Value = OuterLoss> {
    prop_oneof![
        (0.1f64..4.0).prop_map(|r| OuterLoss::power(r).unwrap()),
        (0.1f64..4.0, 0.01f64..5.0).prop_map(|(r, t)| OuterLoss::threshold(r, t).unwrap()),
        (0.01f64..5.0).prop_map(|d| OuterLoss::huber(d).unwrap()),
    ]
}

/// `ℓ(c·x) ≤ c^r·ℓ(x)` for every `c ≥ 1`, and for every `c > 0` when `ℓ`
/// is a pure power.
pub fn log_lipschitz_law() -> Result<(), String> {
    run((loss_strategy(), 0.0f64..10.0, 0.0f64..8.0), |(loss, x, c_raw)| {
        let r = loss.log_lipschitz();
        let c = 1.0 + c_raw;
        let lhs = eval_loss(&loss, c * x).unwrap();
        let rhs = c.powf(r) * eval_loss(&loss, x).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-300, "{loss:?} x={x} c={c}: {lhs} > {rhs}");
        if let OuterLoss::Power { .. } = loss {
            let c = c_raw / 8.0 + 1e-3;
            let lhs = eval_loss(&loss, c * x).unwrap();
            let rhs = c.powf(r) * eval_loss(&loss, x).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-300);
        }
        Ok(())
    })
}

/// `ℓ(D(p,q)) ≤ ρ·c^r·(ℓ(D(p,v)) + ℓ(D(v,q)))`.
pub fn weak_triangle() -> Result<(), String> {
    run((loss_strategy(), 0.3f64..4.0, 2usize..=6, any::<u64>()), |(loss, z, d, seed)| {
        let mut g = rng(seed);
        let spec = CostSpec::new(InnerDistance::new(z).unwrap(), loss, Aggregator::SumAll);
        let k = lipschitz_constants(&spec, d);
        let [p, q, v] = [0, 1, 2].map(|_| random_vector(d, 2.0, &mut g));
        let lhs = spec.pair_loss(p.as_slice(), q.as_slice());
        let rhs = k.rho
            * k.c_norm.powf(k.r)
            * (spec.pair_loss(p.as_slice(), v.as_slice()) + spec.pair_loss(v.as_slice(), q.as_slice()));
        prop_assert!(lhs <= rhs * (1.0 + 1e-12), "{spec}: {lhs} > {rhs}");
        Ok(())
    })
}

/// The matched SSD of ICP never increases.
pub fn icp_monotone_descent() -> Result<(), String> {
    run((2usize..=4, 3usize..=30, any::<u64>()), |(d, n, seed)| {
        let mut g = rng(seed);
        let p = uniform_cloud(d, n, &mut g);
        let q = if seed % 2 == 0 {
            uniform_cloud(d, n + (seed as usize % 5), &mut g)
        } else {
            super::jitter(&apply_alignment(&p, &random_alignment(d, 0.3, &mut g)).unwrap(), 0.001, &mut g)
        };
        let init = random_alignment(d, 0.2, &mut g);
        let out = icp(&p, &q, &init, &IcpOptions::default()).unwrap();
        for w in out.history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
        prop_assert!(out.iterations <= IcpOptions::default().max_iters);
        Ok(())
    })
}

/// Projecting twice equals projecting once.
pub fn projector_idempotence() -> Result<(), String> {
    run((2usize..=7, 1usize..=20, any::<u64>()), |(d, n, seed)| {
        let mut g = rng(seed);
        let k = 1 + (seed as usize % d);
        let w = random_subspace(d, k, seed ^ 77);
        let c = uniform_cloud(d, n, &mut g);
        let once = project_cloud(&c, w.basis()).unwrap();
        let twice = project_cloud(&once, w.basis()).unwrap();
        for (a, b) in once.as_slice().iter().zip(twice.as_slice()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        Ok(())
    })
}

/// Identical seeds give identical instances and identical randomized
/// solver output.
pub fn seed_determinism() -> Result<(), String> {
    run((2usize..=4, any::<u64>(), any::<bool>()), |(d, seed, shuffle)| {
        let mut spec = InstanceSpec::synthetic(d, 12, seed);
        spec.shuffle = shuffle;
        spec.sigma2 = 0.001;
        spec.outlier_fraction = 0.25;
        let a = generate_instance(&spec).unwrap();
        let b = generate_instance(&spec).unwrap();
        prop_assert_eq!(&a, &b);
        let ssd = CostSpec::ssd();
        let s1 = best_sampled(&a.p, &a.q, &ssd, 5, seed, 0).unwrap();
        let s2 = best_sampled(&b.p, &b.q, &ssd, 5, seed, 0).unwrap();
        prop_assert_eq!(s1, s2);
        let c1 = prob_alignment(&a.p, &a.q, 2.0, seed, Some(3)).unwrap();
        let c2 = prob_alignment(&b.p, &b.q, 2.0, seed, Some(3)).unwrap();
        prop_assert_eq!(c1, c2);
        let opts = AlignMatchOptions {
            budget: WitnessBudget::Sampled { beta: 2 },
            ..Default::default()
        };
        let r1 = align_and_match(&a.p, &a.q, &ssd, &opts, seed).unwrap();
        let r2 = align_and_match(&b.p, &b.q, &ssd, &opts, seed).unwrap();
        prop_assert_eq!((r1.alignment, r1.matching, r1.cost), (r2.alignment, r2.matching, r2.cost));
        Ok(())
    })
}

/// The selected candidate does not depend on the number of workers.
pub fn worker_count_invariance() -> Result<(), String> {
    run((2usize..=3, any::<u64>(), 2usize..=4), |(d, seed, jobs)| {
        let mut g = rng(seed);
        let n = if d == 2 { 6 } else { 5 };
        let p = uniform_cloud(d, n, &mut g);
        let q = super::jitter(&apply_alignment(&p, &random_alignment(d, 0.1, &mut g)).unwrap(), 0.01, &mut g);
        let spec: CostSpec = if seed % 2 == 0 {
            CostSpec::ssd()
        } else {
            "z=1,loss=thresh:1:0.3,agg=trimk:1".parse().unwrap()
        };
        let one = best_exhaustive(&p, &q, &spec, 1).unwrap();
        let many = best_exhaustive(&p, &q, &spec, jobs).unwrap();
        prop_assert_eq!(&one, &many);
        let one = best_sampled(&p, &q, &spec, 7, seed, 1).unwrap();
        let many = best_sampled(&p, &q, &spec, 7, seed, jobs).unwrap();
        prop_assert_eq!(&one, &many);
        if d == 2 {
            let q = q.select(&[0, 1, 2, 3]);
            let p = p.select(&[3, 2, 1, 0]);
            let o1 = AlignMatchOptions { jobs: 1, ..Default::default() };
            let on = AlignMatchOptions { jobs, ..Default::default() };
            let a = align_and_match(&p, &q, &spec, &o1, 0).unwrap();
            let b = align_and_match(&p, &q, &spec, &on, 0).unwrap();
            prop_assert_eq!((a.alignment, a.matching, a.cost), (b.alignment, b.matching, b.cost));
        }
        Ok(())
    })
}

/// The suites behind the property acceptance criterion, by name.
pub fn suites() -> Vec<(&'static str, fn() -> Result<(), String>)> {
    vec![
        ("SO(d) invariants", so_d_invariants),
        ("displacement monotonicity", displacement_monotonicity),
        ("log-Lipschitz law", log_lipschitz_law),
        ("weak triangle inequality", weak_triangle),
        ("ICP monotone descent", icp_monotone_descent),
        ("projector idempotence", projector_idempotence),
        ("seed determinism", seed_determinism),
        ("worker-count invariance", worker_count_invariance),
    ]
}
