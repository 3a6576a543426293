//! Algorithm selection and the single-run driver shared by all subcommands.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rigid_witness::cost::{eval_cost, eval_matched_cost};
use rigid_witness::data::InstanceSpec;
use rigid_witness::prob::prob_alignment;
use rigid_witness::registration::{
    align_and_match, icp, kabsch_ssd, p_icp_refined, AlignMatchOptions, IcpOptions, MatchMode, WitnessBudget,
};
use rigid_witness::report::{MatchingRecord, RunReport};
use rigid_witness::witness::{best_alignment, best_exhaustive, best_sampled};
use rigid_witness::{Alignment, CostSpec, Matching, PointCloud};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Algo {
    /// Every witness tuple.
    Exhaustive,
    /// `beta` sampled witness tuples.
    Sampled(usize),
    /// Randomized alignment with weight exponent `r`.
    Prob(f64),
    Kabsch,
    Icp,
    /// Align-and-match; `None` enumerates every witness tuple.
    ApproxMatch(Option<usize>),
    PIcpRefined(Option<usize>),
}

impl Algo {
    /// Alignment algorithms assume index correspondence; the others recover it.
    pub fn is_alignment(&self) -> bool {
        matches!(self, Algo::Exhaustive | Algo::Sampled(_) | Algo::Prob(_) | Algo::Kabsch)
    }

    pub fn beta(&self) -> Option<usize> {
        match *self {
            Algo::Sampled(b) => Some(b),
            Algo::ApproxMatch(b) | Algo::PIcpRefined(b) => b,
            _ => None,
        }
    }

    /// File-name friendly form.
    pub fn slug(&self) -> String {
        self.to_string().replace(':', "-")
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algo::Exhaustive => write!(f, "exhaustive"),
            Algo::Sampled(b) => write!(f, "sampled:{b}"),
            Algo::Prob(r) => write!(f, "prob:{r}"),
            Algo::Kabsch => write!(f, "kabsch"),
            Algo::Icp => write!(f, "icp"),
            Algo::ApproxMatch(None) => write!(f, "approx-match"),
            Algo::ApproxMatch(Some(b)) => write!(f, "approx-match:{b}"),
            Algo::PIcpRefined(None) => write!(f, "p-icp-refined"),
            Algo::PIcpRefined(Some(b)) => write!(f, "p-icp-refined:{b}"),
        }
    }
}

impl FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let beta = |a: &str| -> Result<usize, String> {
            match a.parse::<usize>() {
                Ok(b) if b > 0 => Ok(b),
                _ => Err(format!("beta must be a positive integer, got {a:?}")),
            }
        };
        match (name, arg) {
            ("exhaustive", None) => Ok(Algo::Exhaustive),
            ("sampled", Some(a)) => Ok(Algo::Sampled(beta(a)?)),
            ("prob", Some(a)) => match a.parse::<f64>() {
                Ok(r) if r >= 0.0 && r.is_finite() => Ok(Algo::Prob(r)),
                _ => Err(format!("prob exponent must be finite and nonnegative, got {a:?}")),
            },
            ("kabsch", None) => Ok(Algo::Kabsch),
            ("icp", None) => Ok(Algo::Icp),
            ("approx-match", a) => Ok(Algo::ApproxMatch(a.map(beta).transpose()?)),
            ("p-icp-refined", a) => Ok(Algo::PIcpRefined(a.map(beta).transpose()?)),
            _ => Err(format!(
                "unknown algorithm {s:?}; expected exhaustive, sampled:B, prob:R, kabsch, icp, \
                 approx-match[:B] or p-icp-refined[:B]"
            )),
        }
    }
}

/// Ground truth for an instance, when known.
#[derive(Clone, Debug, PartialEq)]
pub struct Truth {
    pub instance: Option<InstanceSpec>,
    /// `matching[i]` is the Q index of `P[i]`.
    pub matching: Vec<usize>,
    pub outliers: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub p: PointCloud,
    pub q: PointCloud,
    pub truth: Option<Truth>,
}

impl Problem {
    fn true_matching(&self) -> Result<Option<Matching>, CliError> {
        self.truth
            .as_ref()
            .map(|t| Matching::new(t.matching.clone(), self.q.len()))
            .transpose()
            .map_err(CliError::from)
    }

    /// Q reordered so that `P[i]` corresponds to `Q'[i]`.
    fn corresponding_q(&self) -> Result<PointCloud, CliError> {
        match &self.truth {
            Some(t) => {
                if t.matching.len() != self.p.len() || t.matching.iter().any(|&j| j >= self.q.len()) {
                    return Err(CliError::Usage("truth matching does not fit the clouds".into()));
                }
                Ok(self.q.select(&t.matching))
            }
            None => Ok(self.q.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub seed: u64,
    pub bijective: bool,
}

/// Runs one algorithm and evaluates its output under `spec`.
pub fn run(problem: &Problem, algo: Algo, spec: &CostSpec, opts: RunOptions) -> Result<RunReport, CliError> {
    if opts.bijective && !matches!(algo, Algo::ApproxMatch(_) | Algo::PIcpRefined(_)) {
        return Err(CliError::Usage(format!("--bijective does not apply to {algo}")));
    }
    let mut report = if algo.is_alignment() {
        run_alignment(problem, algo, spec, opts)?
    } else {
        run_registration(problem, algo, spec, opts)?
    };
    report.instance = problem.truth.as_ref().and_then(|t| t.instance.clone());
    Ok(report)
}

fn run_alignment(problem: &Problem, algo: Algo, spec: &CostSpec, opts: RunOptions) -> Result<RunReport, CliError> {
    let p = &problem.p;
    let q = problem.corresponding_q()?;
    let start = Instant::now();
    let (alignment, evaluated, guaranteed) = match algo {
        Algo::Exhaustive => {
            let b = best_exhaustive(p, &q, spec, 0)?;
            (b.alignment, b.evaluated, spec.aggregator.is_sum())
        }
        Algo::Sampled(beta) => {
            let b = best_sampled(p, &q, spec, beta, opts.seed, 0)?;
            (b.alignment, b.evaluated, false)
        }
        Algo::Prob(r) => {
            let set = prob_alignment(p, &q, r, opts.seed, None)?;
            let b = best_alignment(p, &q, &set, spec)?;
            (b.alignment, set.len() as u64, false)
        }
        Algo::Kabsch => (kabsch_ssd(p, &q, None)?, 1, spec.is_ssd()),
        _ => unreachable!("registration algorithm routed to alignment"),
    };
    let wall = start.elapsed().as_secs_f64();
    let cost = eval_cost(p, &q, &alignment, spec)?;
    let mut report = RunReport::new(algo.to_string(), spec.to_string(), &alignment, cost, opts.seed);
    report.candidates_evaluated = evaluated;
    report.guaranteed = guaranteed;
    report.wall_time_seconds = wall;
    if spec.is_ssd() {
        let k = kabsch_ssd(p, &q, None)?;
        record_optimal(&mut report, eval_cost(p, &q, &k, spec)?, p, &q);
    }
    Ok(report)
}

fn run_registration(problem: &Problem, algo: Algo, spec: &CostSpec, opts: RunOptions) -> Result<RunReport, CliError> {
    let (p, q) = (&problem.p, &problem.q);
    let am = |beta: Option<usize>| AlignMatchOptions {
        budget: beta.map_or(WitnessBudget::Exhaustive, |beta| WitnessBudget::Sampled { beta }),
        mode: if opts.bijective {
            MatchMode::Bijective
        } else {
            MatchMode::NearestNeighbor
        },
        jobs: 0,
    };
    let start = Instant::now();
    let result = match algo {
        Algo::Icp => {
            let mut out = icp(p, q, &Alignment::identity(p.dim()), &IcpOptions::default())?;
            out.result.candidates_evaluated = out.iterations as u64;
            out.result
        }
        Algo::ApproxMatch(beta) => align_and_match(p, q, spec, &am(beta), opts.seed)?,
        Algo::PIcpRefined(beta) => p_icp_refined(p, q, spec, &am(beta), opts.seed)?,
        _ => unreachable!("alignment algorithm routed to registration"),
    };
    let wall = start.elapsed().as_secs_f64();
    let cost = eval_matched_cost(p, q, &result.matching, &result.alignment, spec)?;
    let mut report = RunReport::new(algo.to_string(), spec.to_string(), &result.alignment, cost, opts.seed);
    report.matching = Some(MatchingRecord::from(&result.matching));
    report.candidates_evaluated = result.candidates_evaluated;
    report.guaranteed = result.guaranteed && algo != Algo::Icp;
    report.wall_time_seconds = wall;
    if let (Some(truth), Some(tm)) = (&problem.truth, problem.true_matching()?) {
        report.permutation_recovery = permutation_recovery(result.matching.as_slice(), &truth.matching, &truth.outliers);
        if spec.is_ssd() {
            let k = kabsch_ssd(p, q, Some(&tm))?;
            record_optimal(&mut report, eval_matched_cost(p, q, &tm, &k, spec)?, p, q);
        }
    }
    Ok(report)
}

/// An optimum at rounding level (`n·(ε·diam)²`) is recorded as exactly zero,
/// so noiseless instances carry no ratio.
fn record_optimal(report: &mut RunReport, optimal: f64, p: &PointCloud, q: &PointCloud) {
    let scale = p.diameter().max(q.diameter()) * f64::EPSILON;
    let noise_floor = p.len() as f64 * scale * scale;
    report.set_optimal(if optimal <= noise_floor { 0.0 } else { optimal });
}

/// Fraction of non-outlier indices matched to their true partner.
pub fn permutation_recovery(found: &[usize], truth: &[usize], outliers: &[usize]) -> Option<f64> {
    let mut is_outlier = vec![false; truth.len()];
    for &i in outliers {
        if let Some(flag) = is_outlier.get_mut(i) {
            *flag = true;
        }
    }
    let (mut hit, mut total) = (0usize, 0usize);
    for (i, (&f, &t)) in found.iter().zip(truth).enumerate() {
        if !is_outlier[i] {
            total += 1;
            hit += usize::from(f == t);
        }
    }
    (total > 0).then(|| hit as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algo_names_round_trip() {
        for s in [
            "exhaustive",
            "sampled:40",
            "prob:2",
            "kabsch",
            "icp",
            "approx-match",
            "approx-match:3000",
            "p-icp-refined:3000",
        ] {
            assert_eq!(s.parse::<Algo>().unwrap().to_string(), s);
        }
        for bad in ["sampled", "sampled:0", "prob:-1", "kabsch:3", "ransac"] {
            assert!(bad.parse::<Algo>().is_err(), "{bad}");
        }
        assert_eq!("sampled:40".parse::<Algo>().unwrap().slug(), "sampled-40");
    }

    #[test]
    fn recovery_skips_outliers() {
        assert_eq!(permutation_recovery(&[0, 1, 2, 0], &[0, 1, 2, 3], &[3]), Some(1.0));
        assert_eq!(permutation_recovery(&[0, 0, 2, 3], &[0, 1, 2, 3], &[]), Some(0.75));
        assert_eq!(permutation_recovery(&[0], &[0], &[0]), None);
    }
}
