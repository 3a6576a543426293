//! Randomized linear-time alignment.
//!
//! Instead of enumerating witness tuples, [`prob_rot`] samples each
//! rotation pair with probability proportional to `‖pᵢ‖^r`, so a good
//! witness is hit with probability at least `2^{−(d−1)}`. [`prob_alignment`]
//! repeats this from uniformly chosen pivots often enough to succeed with
//! probability above one half.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;

use crate::geom::{minimal_rotation, norm, Alignment, PointCloud, RotationMatrix, Subspace, Vector};
use crate::parallel::stream_rng;
use crate::witness::{project_out, Candidate, CandidateSet, WitnessTuple, DEGENERATE_REL, MAX_DIM};
use crate::{Error, Result};

/// Sampling distribution over pair indices.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleWeights {
    weights: Vec<f64>,
    all_zero: bool,
}

impl SampleWeights {
    /// `wᵢ ∝ ‖pᵢ‖^r`, with `wᵢ = 0` whenever `qᵢ = 0`.
    pub fn compute(p: &PointCloud, q: &PointCloud, r: f64) -> Result<Self> {
        check_pair(p, q)?;
        check_r(r)?;
        Ok(Self::from_flat(p.as_slice(), q.as_slice(), p.dim(), r, 0.0))
    }

    /// Indices whose `p` or `q` norm is at most `tol` get weight 0.
    fn from_flat(p: &[f64], q: &[f64], d: usize, r: f64, tol: f64) -> Self {
        let raw: Vec<f64> = p
            .chunks_exact(d)
            .zip(q.chunks_exact(d))
            .map(|(a, b)| {
                let (na, nb) = (norm(a), norm(b));
                if na > tol && nb > tol {
                    na.powf(r)
                } else {
                    0.0
                }
            })
            .collect();
        let total: f64 = raw.iter().sum();
        if total > 0.0 && total.is_finite() {
            return Self {
                weights: raw.iter().map(|w| w / total).collect(),
                all_zero: false,
            };
        }
        // Underflow or overflow of the powers: uniform over eligible indices.
        let eligible: Vec<bool> = p
            .chunks_exact(d)
            .zip(q.chunks_exact(d))
            .map(|(a, b)| norm(a) > tol && norm(b) > tol)
            .collect();
        let count = eligible.iter().filter(|&&e| e).count();
        if count == 0 {
            return Self {
                weights: vec![0.0; raw.len()],
                all_zero: true,
            };
        }
        Self {
            weights: eligible
                .iter()
                .map(|&e| if e { 1.0 / count as f64 } else { 0.0 })
                .collect(),
            all_zero: false,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// True when no index is eligible.
    pub fn is_all_zero(&self) -> bool {
        self.all_zero
    }

    /// Draws an index, or `None` when no index is eligible.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        if self.all_zero {
            return None;
        }
        let dist = WeightedIndex::new(&self.weights).ok()?;
        Some(dist.sample(rng))
    }
}

/// What one [`prob_rot`] call did.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbRotTrace {
    pub rotation: RotationMatrix,
    /// Sampled index at each level that produced a rotation.
    pub sampled: Vec<usize>,
    /// Arithmetic operations spent on per-point work (weights, rotations and
    /// projections); grows as `n·d²` per level.
    pub ops: u64,
}

fn check_pair(p: &PointCloud, q: &PointCloud) -> Result<()> {
    p.check_same_dim(q)?;
    if p.len() != q.len() {
        return Err(Error::SizeMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(())
}

fn check_r(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("weight exponent must be positive, got {r}")))
    }
}

/// Sampled direction alignment inside `subspace`.
///
/// At each level an index `j` is drawn with probability `∝ ‖p_j‖^r`, the
/// direction of `p_j` is rotated onto that of `q_j`, and both clouds are
/// projected onto the complement of `q_j`. Levels with no eligible index
/// are left as identity.
pub fn prob_rot<R: Rng + ?Sized>(
    p: &PointCloud,
    q: &PointCloud,
    r: f64,
    subspace: &Subspace,
    rng: &mut R,
) -> Result<RotationMatrix> {
    prob_rot_traced(p, q, r, subspace, rng).map(|t| t.rotation)
}

/// [`prob_rot`] with the sampled indices and an operation count.
pub fn prob_rot_traced<R: Rng + ?Sized>(
    p: &PointCloud,
    q: &PointCloud,
    r: f64,
    subspace: &Subspace,
    rng: &mut R,
) -> Result<ProbRotTrace> {
    check_pair(p, q)?;
    check_r(r)?;
    if p.is_empty() {
        return Err(Error::invalid("prob_rot needs at least one pair"));
    }
    let d = p.dim();
    if subspace.ambient_dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: subspace.ambient_dim(),
        });
    }
    if d > MAX_DIM {
        return Err(Error::invalid(format!("dimension {d} above {MAX_DIM}")));
    }
    let scale = p.diameter().max(q.diameter()).max(
        p.iter().chain(q.iter()).map(norm).fold(0.0, f64::max),
    );
    for x in p.iter().chain(q.iter()) {
        let residual = subspace.residual(&Vector::from_column_slice(x));
        if residual > 1e-8 * scale.max(1.0) {
            return Err(Error::NotInSubspace { residual });
        }
    }
    let tol = DEGENERATE_REL * scale;
    let mut pf = p.as_slice().to_vec();
    let mut qf = q.as_slice().to_vec();
    Ok(rot_chain(&mut pf, &mut qf, d, subspace.clone(), r, tol, rng))
}

fn rot_chain<R: Rng + ?Sized>(
    p: &mut [f64],
    q: &mut [f64],
    d: usize,
    mut subspace: Subspace,
    r: f64,
    tol: f64,
    rng: &mut R,
) -> ProbRotTrace {
    let n = p.len() / d;
    let per_point = (d * d + 4 * d) as u64;
    let mut acc = nalgebra::DMatrix::<f64>::identity(d, d);
    let mut sampled = Vec::new();
    let mut ops = 0u64;
    let mut rotated = [0.0f64; MAX_DIM];
    while subspace.dim() >= 2 {
        let weights = SampleWeights::from_flat(p, q, d, r, tol);
        ops += n as u64 * (2 * d) as u64;
        let Some(j) = weights.sample(rng) else {
            break;
        };
        let (pj, qj) = (&p[j * d..(j + 1) * d], &q[j * d..(j + 1) * d]);
        let rot = minimal_rotation(pj, qj, subspace.basis());
        acc = &rot * acc;
        sampled.push(j);
        if subspace.dim() == 2 {
            break;
        }
        let qn = norm(qj);
        let qhat = Vector::from_iterator(d, qj.iter().map(|x| x / qn));
        let rot = RotationMatrix::from_matrix_unchecked(rot);
        for i in 0..n {
            let out = &mut rotated[..d];
            rot.apply_into(&p[i * d..(i + 1) * d], out);
            project_out(out, qhat.as_slice());
            p[i * d..(i + 1) * d].copy_from_slice(out);
            project_out(&mut q[i * d..(i + 1) * d], qhat.as_slice());
        }
        ops += n as u64 * (per_point - 2 * d as u64);
        subspace = match subspace.without_direction(&qhat) {
            Ok(s) => s,
            Err(_) => break,
        };
    }
    ProbRotTrace {
        rotation: RotationMatrix::from_matrix_unchecked(acc),
        sampled,
        ops,
    }
}

/// `⌈1 / ln(2^d / (2^d − 1))⌉`: enough independent trials for a success
/// probability above one half.
pub fn iteration_count(d: usize) -> usize {
    let k = 2f64.powi(d as i32);
    (1.0 / (k / (k - 1.0)).ln()).ceil() as usize
}

/// Candidates from repeated pivoted [`prob_rot`] runs.
///
/// Iteration `i` draws from its own stream `(seed, i)`: a uniform pivot `j`,
/// then `prob_rot` on both clouds centered at `(p_j, q_j)` with the pivot
/// removed. The candidate is `(R, R·p_j − q_j)`. `iterations = None` uses
/// [`iteration_count`].
pub fn prob_alignment(
    p: &PointCloud,
    q: &PointCloud,
    r: f64,
    seed: u64,
    iterations: Option<usize>,
) -> Result<CandidateSet> {
    check_pair(p, q)?;
    check_r(r)?;
    let (n, d) = (p.len(), p.dim());
    if n < 2 {
        return Err(Error::invalid("prob_alignment needs at least two pairs"));
    }
    if !(2..=MAX_DIM).contains(&d) {
        return Err(Error::invalid(format!("dimension {d} outside 2..={MAX_DIM}")));
    }
    let k = iterations.unwrap_or_else(|| iteration_count(d));
    let tol = DEGENERATE_REL * p.diameter().max(q.diameter());
    let candidates: Vec<Candidate> = (0..k)
        .into_par_iter()
        .map(|it| {
            let mut rng = stream_rng(seed, it as u64);
            let pivot = rng.random_range(0..n);
            pivoted_candidate(p, q, pivot, r, tol, &mut rng)
        })
        .collect();
    Ok(candidates.into_iter().collect())
}

fn pivoted_candidate<R: Rng + ?Sized>(
    p: &PointCloud,
    q: &PointCloud,
    pivot: usize,
    r: f64,
    tol: f64,
    rng: &mut R,
) -> Candidate {
    let (n, d) = (p.len(), p.dim());
    let (pp, qp) = (p.point(pivot), q.point(pivot));
    let mut pf = Vec::with_capacity((n - 1) * d);
    let mut qf = Vec::with_capacity((n - 1) * d);
    let mut original = Vec::with_capacity(n - 1);
    for i in (0..n).filter(|&i| i != pivot) {
        pf.extend(p.point(i).iter().zip(pp).map(|(a, b)| a - b));
        qf.extend(q.point(i).iter().zip(qp).map(|(a, b)| a - b));
        original.push(i);
    }
    let trace = rot_chain(&mut pf, &mut qf, d, Subspace::full(d), r, tol, rng);
    let translation = trace.rotation.apply(pp) - Vector::from_column_slice(qp);
    Candidate {
        alignment: Alignment {
            rotation: trace.rotation,
            translation,
        },
        witness: WitnessTuple {
            pivot,
            rotation_indices: trace.sampled.iter().map(|&j| original[j]).collect(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{eval_cost, CostSpec};
    use crate::geom::apply_alignment;
    use crate::witness::best_alignment;
    use nalgebra::DMatrix;

    #[test]
    fn iteration_counts() {
        assert_eq!(iteration_count(2), 4);
        assert_eq!(iteration_count(3), 8);
        assert_eq!(iteration_count(4), 16);
    }

    #[test]
    fn single_pair_quarter_turn() {
        let p = PointCloud::from_points(2, [[1.0, 0.0]]).unwrap();
        let q = PointCloud::from_points(2, [[0.0, 1.0]]).unwrap();
        let mut rng = stream_rng(0, 0);
        let r = prob_rot(&p, &q, 1.0, &Subspace::full(2), &mut rng).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!((r.matrix() - expected).norm() < 1e-12);
    }

    #[test]
    fn equal_clouds_give_identity() {
        let p = PointCloud::from_points(3, (0..20).map(|i| {
            let x = i as f64;
            [x.sin(), (2.0 * x).cos(), 0.1 * x]
        }))
        .unwrap();
        let mut rng = stream_rng(3, 0);
        for _ in 0..20 {
            let r = prob_rot(&p, &p, 2.0, &Subspace::full(3), &mut rng).unwrap();
            assert!((r.matrix() - DMatrix::<f64>::identity(3, 3)).norm() < 1e-12);
        }
        let set = prob_alignment(&p, &p, 2.0, 1, None).unwrap();
        assert_eq!(set.len(), 8);
        let best = best_alignment(&p, &p, &set, &CostSpec::ssd()).unwrap();
        assert!(best.cost < 1e-9 * p.diameter());
    }

    #[test]
    fn weights_closed_form() {
        let p = PointCloud::from_points(2, [[2.0, 0.0], [0.0, 1.0], [3.0, 0.0]]).unwrap();
        let q = PointCloud::from_points(2, [[1.0, 0.0], [1.0, 0.0], [0.0, 0.0]]).unwrap();
        let w = SampleWeights::compute(&p, &q, 2.0).unwrap();
        assert_eq!(w.weights(), &[0.8, 0.2, 0.0]);
        let z = PointCloud::from_points(2, [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]).unwrap();
        let w = SampleWeights::compute(&p, &z, 1.0).unwrap();
        assert!(w.is_all_zero());
        assert_eq!(w.sample(&mut stream_rng(0, 0)), None);
    }

    #[test]
    fn sampling_frequencies() {
        let p = PointCloud::from_points(2, [[2.0, 0.0], [0.0, 1.0]]).unwrap();
        let q = PointCloud::from_points(2, [[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let w = SampleWeights::compute(&p, &q, 1.0).unwrap();
        let mut rng = stream_rng(17, 0);
        let draws = 100_000;
        let first = (0..draws).filter(|_| w.sample(&mut rng) == Some(0)).count() as f64;
        let expected = [draws as f64 * 2.0 / 3.0, draws as f64 / 3.0];
        let observed = [first, draws as f64 - first];
        let chi2: f64 = observed
            .iter()
            .zip(expected)
            .map(|(o, e)| (o - e) * (o - e) / e)
            .sum();
        // 99.9% quantile of chi-square with one degree of freedom.
        assert!(chi2 < 10.83, "chi2 {chi2}");
    }

    #[test]
    fn degenerate_levels_stay_identity() {
        let p = PointCloud::from_points(3, [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]).unwrap();
        let mut rng = stream_rng(0, 0);
        let t = prob_rot_traced(&p, &p, 1.0, &Subspace::full(3), &mut rng).unwrap();
        assert!(t.sampled.is_empty());
        assert_eq!(t.rotation.matrix(), &DMatrix::<f64>::identity(3, 3));
    }

    #[test]
    fn candidates_are_rotations_and_reproducible() {
        let p = PointCloud::from_points(3, (0..30).map(|i| {
            let x = i as f64;
            [(0.3 * x).sin(), (1.1 * x).cos(), (0.7 * x).sin() * 0.5]
        }))
        .unwrap();
        let a = Alignment::new(
            RotationMatrix::from_row_slice(3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap(),
            Vector::from_column_slice(&[0.1, 0.2, 0.3]),
        )
        .unwrap();
        let q = apply_alignment(&p, &a).unwrap();
        let s1 = prob_alignment(&p, &q, 2.0, 5, Some(20)).unwrap();
        let s2 = prob_alignment(&p, &q, 2.0, 5, Some(20)).unwrap();
        assert_eq!(s1, s2);
        for c in &s1 {
            assert!(c.alignment.rotation.is_valid(1e-9));
        }
        let best = best_alignment(&p, &q, &s1, &CostSpec::ssd()).unwrap();
        assert!(eval_cost(&p, &q, &best.alignment, &CostSpec::ssd()).unwrap() >= 0.0);
        assert!(prob_alignment(&p.select(&[0]), &q.select(&[0]), 2.0, 0, None).is_err());
    }

    #[test]
    fn ops_grow_linearly() {
        let make = |n: usize| {
            PointCloud::from_points(3, (0..n).map(|i| {
                let x = i as f64;
                [(0.3 * x).sin() + 1.0, (1.1 * x).cos(), (0.7 * x).sin() * 0.5]
            }))
            .unwrap()
        };
        let (small, large) = (make(100), make(200));
        let mut rng = stream_rng(0, 0);
        let a = prob_rot_traced(&small, &small, 1.0, &Subspace::full(3), &mut rng).unwrap();
        let b = prob_rot_traced(&large, &large, 1.0, &Subspace::full(3), &mut rng).unwrap();
        assert_eq!(a.sampled.len(), b.sampled.len());
        assert_eq!(2 * a.ops, b.ops);
    }
}
