//! Iterative closest point.

use std::time::Instant;

use crate::cost::{eval_matched_cost, CostSpec};
use crate::geom::{Alignment, PointCloud};
use crate::registration::kabsch::kabsch_pairs;
use crate::registration::nn::{match_with_index, SpatialIndex};
use crate::registration::RegistrationResult;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IcpOptions {
    pub max_iters: usize,
    /// Stop once an iteration improves the SSD by less than this fraction.
    pub rel_tol: f64,
}

impl Default for IcpOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            rel_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct IcpOutcome {
    pub result: RegistrationResult,
    pub iterations: usize,
    /// Matched SSD at the start and after every accepted iteration.
    pub history: Vec<f64>,
}

/// Alternates nearest-neighbour matching and the closed-form SSD alignment,
/// starting from `init`. The SSD never increases: an iteration that would
/// raise it (by rounding) is discarded and the loop stops.
pub fn icp(p: &PointCloud, q: &PointCloud, init: &Alignment, opts: &IcpOptions) -> Result<IcpOutcome> {
    let start = Instant::now();
    if p.is_empty() || q.is_empty() {
        return Err(Error::invalid("ICP needs nonempty clouds"));
    }
    p.check_same_dim(q)?;
    if init.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: init.dim(),
        });
    }
    if !(opts.rel_tol >= 0.0) {
        return Err(Error::invalid("ICP tolerance must be nonnegative"));
    }
    let spec = CostSpec::ssd();
    let index = SpatialIndex::build(q);
    let mut alignment = init.clone();
    let mut matching = match_with_index(p, &alignment, &index);
    let mut cost = eval_matched_cost(p, q, &matching, &alignment, &spec)?;
    let mut history = vec![cost];
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let next = kabsch_pairs(p, q, |i| matching.get(i));
        let next_matching = match_with_index(p, &next, &index);
        let next_cost = eval_matched_cost(p, q, &next_matching, &next, &spec)?;
        if next_cost > cost {
            break;
        }
        let improvement = cost - next_cost;
        let previous = cost;
        alignment = next;
        matching = next_matching;
        cost = next_cost;
        history.push(cost);
        if improvement <= opts.rel_tol * previous {
            break;
        }
    }
    Ok(IcpOutcome {
        result: RegistrationResult {
            alignment,
            matching,
            cost,
            candidates_evaluated: iterations as u64,
            wall_time: start.elapsed().as_secs_f64(),
            guaranteed: false,
        },
        iterations,
        history,
    })
}
