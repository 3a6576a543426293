//! Witness-set alignment.
//!
//! [`get_rot`] aligns the direction of a leading pair, projects the remaining
//! pairs onto the hyperplane orthogonal to the aligned target direction and
//! recurses inside that hyperplane, so later rotations never disturb the
//! directions fixed by earlier ones.
//!
//! A witness tuple is a pivot index plus an ordered list of `d − 1` rotation
//! indices. Centering both clouds at the pivot pair and running [`get_rot`]
//! on the rotation pairs yields the candidate `(R, R·p_pivot − q_pivot)`.
//! Some candidate among all tuples has every per-pair residual within
//! `(1+√2)^d` of any reference alignment's residual.

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;

use crate::cost::{bounded_cost, CostSpec};
use crate::geom::{minimal_rotation, norm, Alignment, PointCloud, RotationMatrix, Subspace, Vector};
use crate::parallel::{better, stream_rng, with_jobs};
use crate::{Error, Result};

/// Largest supported point dimension.
pub const MAX_DIM: usize = 16;

/// Relative norm (against the cloud diameter) under which a centered
/// witness point counts as the origin.
pub(crate) const DEGENERATE_REL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WitnessTuple {
    pub pivot: usize,
    /// Ordered, distinct, all different from `pivot`. Normally `d − 1`
    /// entries; randomized candidates may carry fewer when the sampled
    /// recursion ran out of usable pairs.
    pub rotation_indices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub alignment: Alignment,
    pub witness: WitnessTuple,
}

/// Candidates in generation order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CandidateSet {
    candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, c: Candidate) {
        self.candidates.push(c);
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Candidate> {
        self.candidates.iter()
    }

    pub fn as_slice(&self) -> &[Candidate] {
        &self.candidates
    }
}

impl FromIterator<Candidate> for CandidateSet {
    fn from_iter<I: IntoIterator<Item = Candidate>>(iter: I) -> Self {
        Self {
            candidates: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a CandidateSet {
    type Item = &'a Candidate;
    type IntoIter = std::slice::Iter<'a, Candidate>;

    fn into_iter(self) -> Self::IntoIter {
        self.candidates.iter()
    }
}

/// The cheapest candidate of a search.
#[derive(Clone, Debug, PartialEq)]
pub struct BestAlignment {
    pub alignment: Alignment,
    pub cost: f64,
    pub witness: Option<WitnessTuple>,
    /// Position of the winner in generation order.
    pub generation: u64,
    /// Candidates whose cost was evaluated (possibly partially).
    pub evaluated: u64,
}

/// Sequential direction alignment on `count` pairs stored row-major in
/// `p` and `q`, which are overwritten with their projections.
///
/// Stops early (leaving the remaining levels as identity) when a pair's
/// norm falls below `tol` or the subspace becomes one-dimensional.
pub(crate) fn align_chain(
    p: &mut [f64],
    q: &mut [f64],
    d: usize,
    mut subspace: Subspace,
    tol: f64,
) -> (DMatrix<f64>, usize) {
    let count = p.len() / d;
    let mut acc = DMatrix::<f64>::identity(d, d);
    let mut levels = 0;
    let mut rotated = vec![0.0; d];
    for level in 0..count {
        if subspace.dim() < 2 {
            break;
        }
        let (pj, qj) = (&p[level * d..(level + 1) * d], &q[level * d..(level + 1) * d]);
        if norm(pj) < tol || norm(qj) < tol {
            break;
        }
        let r = minimal_rotation(pj, qj, subspace.basis());
        acc = &r * acc;
        levels += 1;
        if level + 1 == count || subspace.dim() == 2 {
            break;
        }
        let qn = norm(qj);
        let qhat = Vector::from_iterator(d, qj.iter().map(|x| x / qn));
        let r = RotationMatrix::from_matrix_unchecked(r);
        for i in level + 1..count {
            r.apply_into(&p[i * d..(i + 1) * d], &mut rotated);
            project_out(&mut rotated, qhat.as_slice());
            p[i * d..(i + 1) * d].copy_from_slice(&rotated);
            project_out(&mut q[i * d..(i + 1) * d], qhat.as_slice());
        }
        subspace = match subspace.without_direction(&qhat) {
            Ok(s) => s,
            Err(_) => break,
        };
    }
    (acc, levels)
}

/// `x ← (I − û ûᵀ) x` for a unit vector `û`.
#[inline]
pub(crate) fn project_out(x: &mut [f64], unit: &[f64]) {
    let c: f64 = x.iter().zip(unit).map(|(a, b)| a * b).sum();
    for (a, b) in x.iter_mut().zip(unit) {
        *a -= c * b;
    }
}

/// Recursive direction alignment of `τ − 1` pairs inside a `τ`-dimensional
/// subspace.
///
/// The result `R` lies in `R_subspace`, maps the direction of `p[0]` onto
/// that of `q[0]` and, for each later pair, aligns its projection onto the
/// complement of the previously fixed target directions.
pub fn get_rot(p: &[Vector], q: &[Vector], subspace: &Subspace) -> Result<RotationMatrix> {
    let tau = subspace.dim();
    let d = subspace.ambient_dim();
    if tau < 2 {
        return Err(Error::invalid("get_rot needs a subspace of dimension at least 2"));
    }
    if p.len() != tau - 1 || q.len() != tau - 1 {
        return Err(Error::invalid(format!(
            "get_rot in a {tau}-dimensional subspace takes {} pairs, got {} and {}",
            tau - 1,
            p.len(),
            q.len()
        )));
    }
    let mut pf = Vec::with_capacity(d * p.len());
    let mut qf = Vec::with_capacity(d * q.len());
    for (a, b) in p.iter().zip(q) {
        for v in [a, b] {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: v.len(),
                });
            }
            let residual = subspace.residual(v);
            if residual > 1e-8 * v.norm().max(1.0) {
                return Err(Error::NotInSubspace { residual });
            }
        }
        pf.extend_from_slice(a.as_slice());
        qf.extend_from_slice(b.as_slice());
    }
    let scale = p.iter().chain(q).map(|v| v.norm()).fold(0.0, f64::max);
    let tol = DEGENERATE_REL * scale;
    if p[0].norm() <= tol || q[0].norm() <= tol {
        return Err(Error::ZeroNorm);
    }
    let (r, _) = align_chain(&mut pf, &mut qf, d, subspace.clone(), tol);
    Ok(RotationMatrix::from_matrix_unchecked(r))
}

fn check_alignment_input(p: &PointCloud, q: &PointCloud) -> Result<()> {
    p.check_same_dim(q)?;
    if p.len() != q.len() {
        return Err(Error::SizeMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let d = p.dim();
    if !(2..=MAX_DIM).contains(&d) {
        return Err(Error::invalid(format!("dimension {d} outside 2..={MAX_DIM}")));
    }
    if p.len() < d {
        return Err(Error::invalid(format!(
            "need at least d = {d} points, got {}",
            p.len()
        )));
    }
    Ok(())
}

/// Builds the candidate induced by a witness tuple, or `None` when its
/// leading centered pair is (numerically) at the origin.
pub(crate) fn witness_candidate(
    p: &PointCloud,
    q: &PointCloud,
    w: &WitnessTuple,
    tol: f64,
) -> Option<Alignment> {
    let d = p.dim();
    let (pp, qp) = (p.point(w.pivot), q.point(w.pivot));
    let mut pf = Vec::with_capacity(d * w.rotation_indices.len());
    let mut qf = Vec::with_capacity(d * w.rotation_indices.len());
    for &j in &w.rotation_indices {
        pf.extend(p.point(j).iter().zip(pp).map(|(a, b)| a - b));
        qf.extend(q.point(j).iter().zip(qp).map(|(a, b)| a - b));
    }
    if w.rotation_indices.is_empty() || norm(&pf[..d]) <= tol || norm(&qf[..d]) <= tol {
        return None;
    }
    let (r, _) = align_chain(&mut pf, &mut qf, d, Subspace::full(d), tol);
    let rotation = RotationMatrix::from_matrix_unchecked(r);
    let translation = rotation.apply(pp) - Vector::from_column_slice(qp);
    Some(Alignment {
        rotation,
        translation,
    })
}

fn degenerate_tol(p: &PointCloud, q: &PointCloud) -> f64 {
    DEGENERATE_REL * p.diameter().max(q.diameter())
}

/// Ordered `(d−1)`-tuples of indices in `0..n` excluding `pivot`, in
/// lexicographic order.
fn rotation_tuples(n: usize, k: usize, pivot: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..n).filter(move |&j| j != pivot).permutations(k)
}

/// Every candidate of the exhaustive witness enumeration, in generation
/// order (pivot-major, then lexicographic rotation tuples).
pub fn approx_alignment_exhaustive(p: &PointCloud, q: &PointCloud) -> Result<CandidateSet> {
    check_alignment_input(p, q)?;
    let (n, d) = (p.len(), p.dim());
    let tol = degenerate_tol(p, q);
    let mut out = CandidateSet::new();
    for pivot in 0..n {
        for rotation_indices in rotation_tuples(n, d - 1, pivot) {
            let witness = WitnessTuple {
                pivot,
                rotation_indices,
            };
            if let Some(alignment) = witness_candidate(p, q, &witness, tol) {
                out.push(Candidate { alignment, witness });
            }
        }
    }
    Ok(out)
}

/// Number of ordered rotation tuples per pivot: `(n−1)!/(n−d)!`.
fn tuples_per_pivot(n: usize, d: usize) -> u64 {
    (0..d as u64 - 1).map(|i| (n as u64 - 1) - i).product()
}

/// Streams the exhaustive enumeration and keeps the cheapest candidate
/// under `spec`. `jobs == 0` uses the global thread pool.
pub fn best_exhaustive(
    p: &PointCloud,
    q: &PointCloud,
    spec: &CostSpec,
    jobs: usize,
) -> Result<BestAlignment> {
    check_alignment_input(p, q)?;
    let (n, d) = (p.len(), p.dim());
    let tol = degenerate_tol(p, q);
    let per_pivot = tuples_per_pivot(n, d);
    let best = with_jobs(jobs, || {
        (0..n)
            .into_par_iter()
            .map(|pivot| {
                let mut local: Option<BestAlignment> = None;
                let mut evaluated = 0;
                let mut scratch = Vec::new();
                for (k, rotation_indices) in rotation_tuples(n, d - 1, pivot).enumerate() {
                    let generation = pivot as u64 * per_pivot + k as u64;
                    let witness = WitnessTuple {
                        pivot,
                        rotation_indices,
                    };
                    let Some(alignment) = witness_candidate(p, q, &witness, tol) else {
                        continue;
                    };
                    evaluated += 1;
                    let bound = local.as_ref().map_or(f64::INFINITY, |b| b.cost);
                    if let Some(cost) = bounded_cost(p, q, &alignment, spec, bound, &mut scratch) {
                        if local
                            .as_ref()
                            .is_none_or(|b| better((cost, generation), (b.cost, b.generation)))
                        {
                            local = Some(BestAlignment {
                                alignment,
                                cost,
                                witness: Some(witness),
                                generation,
                                evaluated: 0,
                            });
                        }
                    }
                }
                (local, evaluated)
            })
            .reduce(|| (None, 0), merge_best)
    })?;
    finish(best)
}

fn merge_best(
    a: (Option<BestAlignment>, u64),
    b: (Option<BestAlignment>, u64),
) -> (Option<BestAlignment>, u64) {
    let evaluated = a.1 + b.1;
    let best = match (a.0, b.0) {
        (Some(x), Some(y)) => {
            if better((y.cost, y.generation), (x.cost, x.generation)) {
                Some(y)
            } else {
                Some(x)
            }
        }
        (x, y) => x.or(y),
    };
    (best, evaluated)
}

fn finish(best: (Option<BestAlignment>, u64)) -> Result<BestAlignment> {
    let (best, evaluated) = best;
    let mut best = best.ok_or(Error::EmptyCandidates)?;
    best.evaluated = evaluated;
    Ok(best)
}

/// Draws up to `beta` non-degenerate witness tuples: pivot uniform, rotation
/// indices a uniformly random ordered tuple of distinct non-pivot indices.
/// Degenerate draws are retried, for at most `10·beta` draws in total.
pub fn sample_witness_tuples(
    p: &PointCloud,
    q: &PointCloud,
    beta: usize,
    seed: u64,
) -> Result<Vec<WitnessTuple>> {
    check_alignment_input(p, q)?;
    if beta == 0 {
        return Err(Error::invalid("beta must be at least 1"));
    }
    let (n, d) = (p.len(), p.dim());
    let tol = degenerate_tol(p, q);
    let mut rng = stream_rng(seed, 0);
    let mut out = Vec::with_capacity(beta);
    for _ in 0..beta.saturating_mul(10) {
        if out.len() == beta {
            break;
        }
        let pivot = rng.random_range(0..n);
        let mut rotation_indices: Vec<usize> = index::sample(&mut rng, n - 1, d - 1)
            .into_iter()
            .map(|j| if j >= pivot { j + 1 } else { j })
            .collect();
        rotation_indices.shuffle(&mut rng);
        let lead = rotation_indices[0];
        let pd = crate::geom::dist2(p.point(lead), p.point(pivot)).sqrt();
        let qd = crate::geom::dist2(q.point(lead), q.point(pivot)).sqrt();
        if pd <= tol || qd <= tol {
            continue;
        }
        out.push(WitnessTuple {
            pivot,
            rotation_indices,
        });
    }
    if out.is_empty() {
        return Err(Error::Degenerate(
            "no non-degenerate witness tuple found".into(),
        ));
    }
    Ok(out)
}

/// Candidates from `beta` uniformly sampled witness tuples; deterministic
/// for a fixed seed.
pub fn approx_alignment_sampled(
    p: &PointCloud,
    q: &PointCloud,
    beta: usize,
    seed: u64,
) -> Result<CandidateSet> {
    let tuples = sample_witness_tuples(p, q, beta, seed)?;
    let tol = degenerate_tol(p, q);
    Ok(tuples
        .into_iter()
        .filter_map(|witness| {
            witness_candidate(p, q, &witness, tol).map(|alignment| Candidate { alignment, witness })
        })
        .collect())
}

/// Streams `beta` sampled witness candidates and keeps the cheapest.
pub fn best_sampled(
    p: &PointCloud,
    q: &PointCloud,
    spec: &CostSpec,
    beta: usize,
    seed: u64,
    jobs: usize,
) -> Result<BestAlignment> {
    let tuples = sample_witness_tuples(p, q, beta, seed)?;
    let tol = degenerate_tol(p, q);
    let best = with_jobs(jobs, || {
        tuples
            .par_iter()
            .enumerate()
            .fold(
                || (None, 0u64, Vec::new()),
                |(local, evaluated, mut scratch): (Option<BestAlignment>, u64, Vec<f64>), (g, w)| {
                    let Some(alignment) = witness_candidate(p, q, w, tol) else {
                        return (local, evaluated, scratch);
                    };
                    let bound = local.as_ref().map_or(f64::INFINITY, |b| b.cost);
                    let mut local = local;
                    if let Some(cost) = bounded_cost(p, q, &alignment, spec, bound, &mut scratch) {
                        if local
                            .as_ref()
                            .is_none_or(|b| better((cost, g as u64), (b.cost, b.generation)))
                        {
                            local = Some(BestAlignment {
                                alignment,
                                cost,
                                witness: Some(w.clone()),
                                generation: g as u64,
                                evaluated: 0,
                            });
                        }
                    }
                    (local, evaluated + 1, scratch)
                },
            )
            .map(|(b, e, _)| (b, e))
            .reduce(|| (None, 0), merge_best)
    })?;
    finish(best)
}

/// The candidate with minimal cost; ties go to the earliest candidate.
pub fn best_alignment(
    p: &PointCloud,
    q: &PointCloud,
    candidates: &CandidateSet,
    spec: &CostSpec,
) -> Result<BestAlignment> {
    best_alignment_with_jobs(p, q, candidates, spec, 0)
}

pub fn best_alignment_with_jobs(
    p: &PointCloud,
    q: &PointCloud,
    candidates: &CandidateSet,
    spec: &CostSpec,
    jobs: usize,
) -> Result<BestAlignment> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    // Validate shapes once through the checked evaluator.
    crate::cost::eval_cost(p, q, &candidates.as_slice()[0].alignment, spec)?;
    let best = with_jobs(jobs, || {
        candidates
            .as_slice()
            .par_iter()
            .enumerate()
            .fold(
                || (None, 0u64, Vec::new()),
                |(local, evaluated, mut scratch): (Option<BestAlignment>, u64, Vec<f64>), (g, c)| {
                    let bound = local.as_ref().map_or(f64::INFINITY, |b| b.cost);
                    let mut local = local;
                    if let Some(cost) = bounded_cost(p, q, &c.alignment, spec, bound, &mut scratch) {
                        if local
                            .as_ref()
                            .is_none_or(|b| better((cost, g as u64), (b.cost, b.generation)))
                        {
                            local = Some(BestAlignment {
                                alignment: c.alignment.clone(),
                                cost,
                                witness: Some(c.witness.clone()),
                                generation: g as u64,
                                evaluated: 0,
                            });
                        }
                    }
                    (local, evaluated + 1, scratch)
                },
            )
            .map(|(b, e, _)| (b, e))
            .reduce(|| (None, 0), merge_best)
    })?;
    finish(best)
}
