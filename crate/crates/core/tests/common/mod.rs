#![allow(dead_code)]

pub mod props;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rigid_witness::data::random_rotation;
use rigid_witness::{Alignment, PointCloud, Vector};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` points uniform in `[−0.5, 0.5]^d`.
pub fn uniform_cloud(d: usize, n: usize, rng: &mut ChaCha8Rng) -> PointCloud {
    PointCloud::new(d, (0..n * d).map(|_| rng.random::<f64>() - 0.5).collect()).unwrap()
}

pub fn random_vector(d: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vector {
    Vector::from_fn(d, |_, _| (rng.random::<f64>() * 2.0 - 1.0) * scale)
}

/// A random rotation with a translation of norm at most `t_max`.
pub fn random_alignment(d: usize, t_max: f64, rng: &mut ChaCha8Rng) -> Alignment {
    let rotation = random_rotation(d, rng);
    let mut t = random_vector(d, 1.0, rng);
    let len = t.norm();
    if len > 1.0 {
        t /= len;
    }
    Alignment::new(rotation, t * t_max).unwrap()
}

/// `cloud` with iid Gaussian noise of variance `sigma2` (Box–Muller).
pub fn jitter(cloud: &PointCloud, sigma2: f64, rng: &mut ChaCha8Rng) -> PointCloud {
    let s = sigma2.sqrt();
    let coords = cloud
        .as_slice()
        .iter()
        .map(|x| {
            let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            let u2: f64 = rng.random();
            x + s * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        })
        .collect();
    PointCloud::new(cloud.dim(), coords).unwrap()
}

/// Per-pair Euclidean residuals `‖R·pᵢ − t − qᵢ‖`.
pub fn residuals(p: &PointCloud, q: &PointCloud, a: &Alignment) -> Vec<f64> {
    (0..p.len())
        .map(|i| (a.apply(p.point(i)) - Vector::from_column_slice(q.point(i))).norm())
        .collect()
}

/// Visits every permutation of `0..n` (Heap's algorithm).
pub fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    f(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            f(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Minimum of `Σᵢ C[i][σ(i)]` over all permutations.
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for_each_permutation(cost.len(), |perm| {
        let s: f64 = perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        best = best.min(s);
    });
    best
}

/// Index of the nearest point of `q` to `x` by exhaustive scan, ties to the
/// lowest index.
pub fn brute_nearest(q: &PointCloud, x: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for j in 0..q.len() {
        let d: f64 = q.point(j).iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.1 {
            best = (j, d);
        }
    }
    best.0
}
