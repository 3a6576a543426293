//! Synthetic registration instances.
//!
//! `Q` is the clean target: `n` points drawn from the unit cube or from the
//! vertices of a normalized model. `P` is `Q` moved by a random alignment,
//! perturbed by Gaussian noise, with a fraction of its points corrupted by
//! extra noise and, optionally, shuffled.

use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::io::{load_cloud, CloudFormat};
use crate::geom::{Alignment, PointCloud, RotationMatrix, Vector};
use crate::parallel::stream_rng;
use crate::registration::Matching;
use crate::witness::MAX_DIM;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// Uniform samples from `[−0.5, 0.5]^d`.
    UniformCube,
    /// Vertices of a CSV or PLY model, normalized to the unit cube.
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub source: Source,
    pub n: usize,
    pub d: usize,
    pub sigma2: f64,
    pub translation_bound: f64,
    pub shuffle: bool,
    pub outlier_fraction: f64,
    pub outlier_sigma2: f64,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn synthetic(d: usize, n: usize, seed: u64) -> Self {
        Self {
            source: Source::UniformCube,
            n,
            d,
            sigma2: 0.0,
            translation_bound: 0.1,
            shuffle: false,
            outlier_fraction: 0.0,
            outlier_sigma2: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_DIM).contains(&self.d) {
            return Err(Error::invalid(format!("dimension {} outside 2..={MAX_DIM}", self.d)));
        }
        if self.n < self.d {
            return Err(Error::invalid(format!("n = {} is below d = {}", self.n, self.d)));
        }
        for (name, v) in [
            ("sigma2", self.sigma2),
            ("translation_bound", self.translation_bound),
            ("outlier_sigma2", self.outlier_sigma2),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(Error::invalid(format!(
                "outlier_fraction must lie in [0, 1), got {}",
                self.outlier_fraction
            )));
        }
        Ok(())
    }

    /// Number of corrupted points: `round(outlier_fraction · n)`.
    pub fn outlier_count(&self) -> usize {
        (self.outlier_fraction * self.n as f64).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedInstance {
    pub p: PointCloud,
    pub q: PointCloud,
    /// The alignment applied to `Q` to produce `P` (before noise).
    pub true_alignment: Alignment,
    /// `true_matching[i]` is the index in `Q` that `P[i]` came from.
    pub true_matching: Matching,
    /// Indices into `P` of the corrupted points, ascending.
    pub outlier_indices: Vec<usize>,
}

impl GeneratedInstance {
    /// The alignment taking `P` back onto `Q`: the inverse of
    /// `true_alignment`.
    pub fn recovering_alignment(&self) -> Alignment {
        self.true_alignment.inverse()
    }
}

/// Uniform scale and translation putting the bounding box's centre at the
/// origin with largest half-extent 0.5. A cloud with zero extent is only
/// centred.
pub fn normalize_to_cube(cloud: &PointCloud) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::invalid("cannot normalize an empty cloud"));
    }
    let d = cloud.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in cloud.iter() {
        for k in 0..d {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let centre: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let half = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (b - a)).fold(0.0, f64::max);
    let scale = if half > 0.0 { 0.5 / half } else { 1.0 };
    let coords = cloud
        .iter()
        .flat_map(|p| p.iter().zip(&centre).map(|(x, c)| ((x - c) * scale).clamp(-0.5, 0.5)).collect::<Vec<_>>())
        .collect();
    PointCloud::new(d, coords)
}

fn axis_rotation(d: usize, a: usize, b: usize, theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    let mut m = DMatrix::identity(d, d);
    m[(a, a)] = c;
    m[(a, b)] = -s;
    m[(b, a)] = s;
    m[(b, b)] = c;
    m
}

/// A random rotation. In the plane a uniform angle; in 3-D the product
/// `R_z R_y R_x` of axis rotations with angles uniform in `[−π, π]`; above
/// that the orthogonal factor of a Gaussian matrix, sign-corrected to
/// determinant +1.
pub fn random_rotation<R: Rng + ?Sized>(d: usize, rng: &mut R) -> RotationMatrix {
    use std::f64::consts::PI;
    let m = match d {
        1 => DMatrix::identity(1, 1),
        2 => axis_rotation(2, 0, 1, rng.random_range(-PI..=PI)),
        3 => {
            let rx = axis_rotation(3, 1, 2, rng.random_range(-PI..=PI));
            let ry = axis_rotation(3, 2, 0, rng.random_range(-PI..=PI));
            let rz = axis_rotation(3, 0, 1, rng.random_range(-PI..=PI));
            rz * ry * rx
        }
        _ => {
            let g = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
            let qr = g.qr();
            let r = qr.r();
            let mut q = qr.q();
            for k in 0..d {
                if r[(k, k)] < 0.0 {
                    q.column_mut(k).neg_mut();
                }
            }
            if q.determinant() < 0.0 {
                q.column_mut(0).neg_mut();
            }
            q
        }
    };
    RotationMatrix::from_matrix_unchecked(m)
}

fn uniform_ball<R: Rng + ?Sized>(d: usize, radius: f64, rng: &mut R) -> Vector {
    loop {
        let g = Vector::from_fn(d, |_, _| StandardNormal.sample(rng));
        let len = g.norm();
        if len > 0.0 {
            let u: f64 = rng.random();
            return g * (radius * u.powf(1.0 / d as f64) / len);
        }
    }
}

fn add_noise<R: Rng + ?Sized>(x: &mut [f64], sigma2: f64, rng: &mut R) {
    if sigma2 > 0.0 {
        let normal = Normal::new(0.0, sigma2.sqrt()).expect("finite standard deviation");
        for v in x {
            *v += normal.sample(rng);
        }
    }
}

fn source_cloud<R: Rng + ?Sized>(spec: &InstanceSpec, rng: &mut R) -> Result<PointCloud> {
    match &spec.source {
        Source::UniformCube => {
            let coords = (0..spec.n * spec.d).map(|_| rng.random::<f64>() - 0.5).collect();
            PointCloud::new(spec.d, coords)
        }
        Source::File(path) => {
            let model = load_cloud(path, CloudFormat::from_path(path))?;
            if model.dim() != spec.d {
                return Err(Error::DimensionMismatch {
                    expected: spec.d,
                    found: model.dim(),
                });
            }
            if model.len() < spec.n {
                return Err(Error::invalid(format!(
                    "model has {} vertices, {} requested",
                    model.len(),
                    spec.n
                )));
            }
            let model = normalize_to_cube(&model)?;
            let mut picked = index::sample(rng, model.len(), spec.n).into_vec();
            picked.sort_unstable();
            Ok(model.select(&picked))
        }
    }
}

/// Builds an instance; everything random is drawn from one stream of
/// `spec.seed`.
pub fn generate_instance(spec: &InstanceSpec) -> Result<GeneratedInstance> {
    spec.validate()?;
    let (n, d) = (spec.n, spec.d);
    let mut rng = stream_rng(spec.seed, 0);
    let q = source_cloud(spec, &mut rng)?;
    let rotation = random_rotation(d, &mut rng);
    let translation = uniform_ball(d, spec.translation_bound, &mut rng);
    let true_alignment = Alignment {
        rotation,
        translation,
    };
    let mut coords = Vec::with_capacity(n * d);
    let mut buf = vec![0.0; d];
    for x in q.iter() {
        true_alignment.apply_into(x, &mut buf);
        add_noise(&mut buf, spec.sigma2, &mut rng);
        coords.extend_from_slice(&buf);
    }
    let mut outliers = index::sample(&mut rng, n, spec.outlier_count()).into_vec();
    outliers.sort_unstable();
    for &i in &outliers {
        add_noise(&mut coords[i * d..(i + 1) * d], spec.outlier_sigma2, &mut rng);
    }
    let mut order: Vec<usize> = (0..n).collect();
    if spec.shuffle {
        order.shuffle(&mut rng);
    }
    let p = PointCloud::new(d, coords)?.select(&order);
    let mut is_outlier = vec![false; n];
    for &i in &outliers {
        is_outlier[i] = true;
    }
    let outlier_indices = (0..n).filter(|&i| is_outlier[order[i]]).collect();
    Ok(GeneratedInstance {
        p,
        q,
        true_alignment,
        true_matching: Matching::new_unchecked(order),
        outlier_indices,
    })
}
