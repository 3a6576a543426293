//! Align-and-Match: registration with unknown correspondence.
//!
//! Every pair of `d`-subsets `(P′, Q′)` (a `d`-combination of P against an
//! ordered `d`-tuple of Q) is paired up and expanded into the `d!` witness
//! candidates of those `d` pairs (each pivot, each order of the rest). Every
//! candidate is scored after matching each transformed `p` to its nearest
//! `q`, or through an optimal bijection.

use std::time::Instant;

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::seq::index;
use rayon::prelude::*;

use crate::cost::{eval_matched_cost, CostSpec};
use crate::geom::{apply_alignment, Alignment, PointCloud};
use crate::parallel::{better, stream_rng, with_jobs};
use crate::registration::hungarian::hungarian_match;
use crate::registration::icp::{icp, IcpOptions};
use crate::registration::nn::{match_with_index, SpatialIndex};
use crate::registration::{Matching, RegistrationResult};
use crate::witness::{witness_candidate, WitnessTuple, DEGENERATE_REL, MAX_DIM};
use crate::{Error, Result};

/// How many subset pairs to try.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WitnessBudget {
    /// Every pair of `d`-subsets.
    Exhaustive,
    /// `beta` uniformly sampled pairs of `d`-subsets.
    Sampled { beta: usize },
}

/// How a candidate alignment is turned into a correspondence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MatchMode {
    #[default]
    NearestNeighbor,
    /// Minimum-cost permutation; requires `|P| = |Q|`.
    Bijective,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AlignMatchOptions {
    pub budget: WitnessBudget,
    pub mode: MatchMode,
    /// Worker threads; 0 uses the global pool.
    pub jobs: usize,
}

impl Default for AlignMatchOptions {
    fn default() -> Self {
        Self {
            budget: WitnessBudget::Exhaustive,
            mode: MatchMode::NearestNeighbor,
            jobs: 0,
        }
    }
}

/// Scores candidate alignments against a fixed pair of clouds.
struct Scorer<'a> {
    p: &'a PointCloud,
    q: &'a PointCloud,
    spec: &'a CostSpec,
    mode: MatchMode,
    index: SpatialIndex<'a>,
    /// Squared Euclidean radius beyond which the loss is constant.
    saturation: Option<(f64, f64)>,
}

impl<'a> Scorer<'a> {
    fn new(p: &'a PointCloud, q: &'a PointCloud, spec: &'a CostSpec, mode: MatchMode) -> Self {
        let saturation = if spec.distance.z() == 2.0 {
            spec.loss
                .saturation_distance()
                .map(|s| (s * s, spec.loss.eval_unchecked(f64::INFINITY)))
        } else {
            None
        };
        Self {
            p,
            q,
            spec,
            mode,
            index: SpatialIndex::build(q),
            saturation,
        }
    }

    /// Matched cost of `a`, or `None` once it provably exceeds `bound`.
    fn score(&self, a: &Alignment, bound: f64, scratch: &mut Vec<f64>) -> Option<f64> {
        match self.mode {
            MatchMode::NearestNeighbor => self.score_nn(a, bound, scratch),
            MatchMode::Bijective => self.score_bijective(a),
        }
    }

    fn score_nn(&self, a: &Alignment, bound: f64, scratch: &mut Vec<f64>) -> Option<f64> {
        let d = self.p.dim();
        let mut buf = [0.0f64; MAX_DIM];
        let buf = &mut buf[..d];
        let sum = self.spec.aggregator.is_sum();
        let mut total = 0.0;
        scratch.clear();
        for i in 0..self.p.len() {
            a.apply_into(self.p.point(i), buf);
            let loss = match self.saturation {
                Some((r2, cap)) => match self.index.nearest_within(buf, r2) {
                    Some((j, _)) => self.spec.pair_loss(buf, self.q.point(j)),
                    None => cap,
                },
                None => {
                    let (j, _) = self.index.nearest(buf)?;
                    self.spec.pair_loss(buf, self.q.point(j))
                }
            };
            if sum {
                total += loss;
                if total > bound {
                    return None;
                }
            } else {
                scratch.push(loss);
            }
        }
        if sum {
            Some(total)
        } else {
            self.spec.aggregator.aggregate(scratch).ok()
        }
    }

    fn score_bijective(&self, a: &Alignment) -> Option<f64> {
        let matching = self.bijection(a);
        eval_matched_cost(self.p, self.q, &matching, a, self.spec).ok()
    }

    fn bijection(&self, a: &Alignment) -> Matching {
        let n = self.p.len();
        let moved = apply_alignment(self.p, a).expect("dimensions checked");
        let costs = DMatrix::from_fn(n, n, |i, j| self.spec.pair_loss(moved.point(i), self.q.point(j)));
        let assignment = hungarian_match(&costs).expect("square finite matrix");
        Matching::new_unchecked(assignment.permutation)
    }

    fn matching(&self, a: &Alignment) -> Matching {
        match self.mode {
            MatchMode::NearestNeighbor => match_with_index(self.p, a, &self.index),
            MatchMode::Bijective => self.bijection(a),
        }
    }
}

#[derive(Clone)]
struct Best {
    alignment: Alignment,
    cost: f64,
    generation: u64,
}

type Partial = (Option<Best>, u64);

fn merge(a: Partial, b: Partial) -> Partial {
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
    (best, a.1 + b.1)
}

/// Scores all `d!` witness candidates of one subset pair into `acc`.
fn score_pair(
    scorer: &Scorer<'_>,
    pi: &[usize],
    qi: &[usize],
    base_generation: u64,
    tol: f64,
    acc: &mut Partial,
    scratch: &mut Vec<f64>,
) {
    let d = pi.len();
    let sub_p = scorer.p.select(pi);
    let sub_q = scorer.q.select(qi);
    let mut k = 0u64;
    for pivot in 0..d {
        for rotation_indices in (0..d).filter(|&j| j != pivot).permutations(d - 1) {
            let generation = base_generation + k;
            k += 1;
            let witness = WitnessTuple {
                pivot,
                rotation_indices,
            };
            let Some(alignment) = witness_candidate(&sub_p, &sub_q, &witness, tol) else {
                continue;
            };
            acc.1 += 1;
            let bound = acc.0.as_ref().map_or(f64::INFINITY, |b| b.cost);
            if let Some(cost) = scorer.score(&alignment, bound, scratch) {
                if acc
                    .0
                    .as_ref()
                    .is_none_or(|b| better((cost, generation), (b.cost, b.generation)))
                {
                    acc.0 = Some(Best {
                        alignment,
                        cost,
                        generation,
                    });
                }
            }
        }
    }
}

fn factorial(k: usize) -> u64 {
    (1..=k as u64).product()
}

fn check_input(p: &PointCloud, q: &PointCloud, mode: MatchMode) -> Result<()> {
    p.check_same_dim(q)?;
    let d = p.dim();
    if !(2..=MAX_DIM).contains(&d) {
        return Err(Error::invalid(format!("dimension {d} outside 2..={MAX_DIM}")));
    }
    if mode == MatchMode::Bijective && p.len() != q.len() {
        return Err(Error::SizeMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    if p.len() < d || q.len() < d {
        return Err(Error::invalid(format!(
            "need at least d = {d} points in each cloud, got {} and {}",
            p.len(),
            q.len()
        )));
    }
    Ok(())
}

/// Registration with unknown correspondence.
///
/// Carries the approximation guarantee (`guaranteed = true`) only for an
/// exhaustive run with sum aggregation; a trimmed aggregator or a sampled
/// budget still runs but is labelled heuristic.
pub fn align_and_match(
    p: &PointCloud,
    q: &PointCloud,
    spec: &CostSpec,
    opts: &AlignMatchOptions,
    seed: u64,
) -> Result<RegistrationResult> {
    let start = Instant::now();
    check_input(p, q, opts.mode)?;
    let (n, m, d) = (p.len(), q.len(), p.dim());
    let scorer = Scorer::new(p, q, spec, opts.mode);
    let tol = DEGENERATE_REL * p.diameter().max(q.diameter());
    let per_pair = factorial(d);
    let (best, evaluated) = match opts.budget {
        WitnessBudget::Exhaustive => {
            let q_tuples_per_comb = (0..d as u64).map(|i| m as u64 - i).product::<u64>();
            let combos: Vec<Vec<usize>> = (0..n).combinations(d).collect();
            with_jobs(opts.jobs, || {
                combos
                    .par_iter()
                    .enumerate()
                    .map(|(c, pi)| {
                        let mut acc: Partial = (None, 0);
                        let mut scratch = Vec::new();
                        for (k, qi) in (0..m).permutations(d).enumerate() {
                            let base = (c as u64 * q_tuples_per_comb + k as u64) * per_pair;
                            score_pair(&scorer, pi, &qi, base, tol, &mut acc, &mut scratch);
                        }
                        acc
                    })
                    .reduce(|| (None, 0), merge)
            })?
        }
        WitnessBudget::Sampled { beta } => {
            if beta == 0 {
                return Err(Error::invalid("beta must be at least 1"));
            }
            let mut rng = stream_rng(seed, 0);
            let pairs: Vec<(Vec<usize>, Vec<usize>)> = (0..beta)
                .map(|_| {
                    let mut pi = index::sample(&mut rng, n, d).into_vec();
                    pi.sort_unstable();
                    let qi = index::sample(&mut rng, m, d).into_vec();
                    (pi, qi)
                })
                .collect();
            with_jobs(opts.jobs, || {
                pairs
                    .par_iter()
                    .enumerate()
                    .fold(
                        || ((None, 0), Vec::new()),
                        |(mut acc, mut scratch): (Partial, Vec<f64>), (g, (pi, qi))| {
                            score_pair(&scorer, pi, qi, g as u64 * per_pair, tol, &mut acc, &mut scratch);
                            (acc, scratch)
                        },
                    )
                    .map(|(acc, _)| acc)
                    .reduce(|| (None, 0), merge)
            })?
        }
    };
    let best = best.ok_or(Error::EmptyCandidates)?;
    let matching = scorer.matching(&best.alignment);
    let cost = eval_matched_cost(p, q, &matching, &best.alignment, spec)?;
    Ok(RegistrationResult {
        alignment: best.alignment,
        matching,
        cost,
        candidates_evaluated: evaluated,
        wall_time: start.elapsed().as_secs_f64(),
        guaranteed: spec.aggregator.is_sum() && opts.budget == WitnessBudget::Exhaustive,
    })
}

/// Align-and-Match followed by a single ICP run on the transformed P.
///
/// The refined alignment is the composition of both stages. Its cost under
/// `spec` (with a fresh correspondence) is compared against the unrefined
/// one and the cheaper of the two is returned.
pub fn p_icp_refined(
    p: &PointCloud,
    q: &PointCloud,
    spec: &CostSpec,
    opts: &AlignMatchOptions,
    seed: u64,
) -> Result<RegistrationResult> {
    let start = Instant::now();
    let coarse = align_and_match(p, q, spec, opts, seed)?;
    let moved = apply_alignment(p, &coarse.alignment)?;
    let refined = icp(&moved, q, &Alignment::identity(p.dim()), &IcpOptions::default())?;
    let alignment = coarse.alignment.then(&refined.result.alignment);
    let scorer = Scorer::new(p, q, spec, opts.mode);
    let matching = scorer.matching(&alignment);
    let cost = eval_matched_cost(p, q, &matching, &alignment, spec)?;
    let evaluated = coarse.candidates_evaluated + refined.iterations as u64;
    let mut out = if cost < coarse.cost {
        RegistrationResult {
            alignment,
            matching,
            cost,
            candidates_evaluated: 0,
            wall_time: 0.0,
            guaranteed: coarse.guaranteed,
        }
    } else {
        coarse
    };
    out.candidates_evaluated = evaluated;
    out.wall_time = start.elapsed().as_secs_f64();
    Ok(out)
}
