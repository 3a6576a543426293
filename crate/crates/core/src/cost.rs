//! The cost family `cost(P, Q, (R, t)) = f(ℓ(D(Rp₁ − t, q₁)), …, ℓ(D(Rpₙ − t, qₙ)))`.
//!
//! `D` is an `ℓ_z` distance, `ℓ` an `r`-log-Lipschitz outer loss and `f` an
//! `s`-log-Lipschitz aggregator. The approximation factors of the witness
//! algorithms depend only on `(z, r, s, d)`; see [`theoretical_factor`].
//!
//! Specs have a compact text form used on the command line:
//!
//! ```text
//! z=2,loss=power:2,agg=sum          sum of squared distances
//! z=2,loss=thresh:2:0.2,agg=sum     Σ min{‖·‖², 0.2}
//! z=1,loss=huber:0.5,agg=trim:0.1   trimmed Huber on ℓ₁ distances
//! ```

use std::fmt;
use std::str::FromStr;

use crate::geom::{Alignment, PointCloud};
use crate::registration::Matching;
use crate::{Error, Result};

const SQRT2_PLUS_1: f64 = 1.0 + std::f64::consts::SQRT_2;

/// `D(p, q) = ‖p − q‖_z`. For `z < 1` this is a quasi-norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerDistance {
    z: f64,
}

impl InnerDistance {
    pub fn new(z: f64) -> Result<Self> {
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::invalid(format!("norm order z must be positive, got {z}")));
        }
        Ok(Self { z })
    }

    pub fn euclidean() -> Self {
        Self { z: 2.0 }
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    /// `‖a − b‖_z`.
    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        if self.z == 2.0 {
            crate::geom::dist2(a, b).sqrt()
        } else if self.z == 1.0 {
            a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
        } else {
            let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs().powf(self.z)).sum();
            s.powf(1.0 / self.z)
        }
    }
}

/// The outer loss `ℓ : [0, ∞) → [0, ∞)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OuterLoss {
    /// `x^r`.
    Power { r: f64 },
    /// `min{x^r, cap}`: the threshold M-estimator.
    Threshold { r: f64, cap: f64 },
    /// `x²/2` up to `delta`, then `delta·(x − delta/2)`.
    Huber { delta: f64 },
}

impl OuterLoss {
    pub fn power(r: f64) -> Result<Self> {
        check_positive("power exponent", r)?;
        Ok(OuterLoss::Power { r })
    }

    pub fn threshold(r: f64, cap: f64) -> Result<Self> {
        check_positive("threshold exponent", r)?;
        check_positive("threshold cap", cap)?;
        Ok(OuterLoss::Threshold { r, cap })
    }

    pub fn huber(delta: f64) -> Result<Self> {
        check_positive("Huber delta", delta)?;
        Ok(OuterLoss::Huber { delta })
    }

    /// The log-Lipschitz constant `r`: `ℓ(cx) ≤ c^r ℓ(x)` for `c ≥ 1`.
    pub fn log_lipschitz(&self) -> f64 {
        match *self {
            OuterLoss::Power { r } | OuterLoss::Threshold { r, .. } => r,
            OuterLoss::Huber { .. } => 2.0,
        }
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        match *self {
            OuterLoss::Power { r } => pow(x, r),
            OuterLoss::Threshold { r, cap } => pow(x, r).min(cap),
            OuterLoss::Huber { delta } => {
                if x <= delta {
                    0.5 * x * x
                } else {
                    delta * (x - 0.5 * delta)
                }
            }
        }
    }

    /// Smallest distance at which the loss saturates, if it does.
    pub(crate) fn saturation_distance(&self) -> Option<f64> {
        match *self {
            OuterLoss::Threshold { r, cap } => Some(cap.powf(1.0 / r)),
            _ => None,
        }
    }
}

#[inline]
fn pow(x: f64, r: f64) -> f64 {
    if r == 1.0 {
        x
    } else if r == 2.0 {
        x * x
    } else {
        x.powf(r)
    }
}

fn check_positive(what: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} must be positive, got {x}")))
    }
}

/// `ℓ(x)` for `x ≥ 0`.
pub fn eval_loss(loss: &OuterLoss, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::invalid(format!("loss argument must be non-negative, got {x}")));
    }
    Ok(loss.eval_unchecked(x))
}

/// How many of the largest entries a trimmed aggregator drops.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Trim {
    Count(usize),
    /// `k = round(fraction · n)`.
    Fraction(f64),
}

/// The aggregator `f : [0, ∞)ⁿ → [0, ∞)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Aggregator {
    /// `‖v‖₁`.
    SumAll,
    /// Sum of the `n − k` smallest entries.
    SumSmallest(Trim),
}

impl Aggregator {
    pub fn log_lipschitz(&self) -> f64 {
        1.0
    }

    /// Number of ignored entries for an input of length `n`.
    pub fn outliers(&self, n: usize) -> Result<usize> {
        let k = match *self {
            Aggregator::SumAll => 0,
            Aggregator::SumSmallest(Trim::Count(k)) => k,
            Aggregator::SumSmallest(Trim::Fraction(f)) => {
                if !(0.0..1.0).contains(&f) {
                    return Err(Error::invalid(format!("trim fraction {f} outside [0, 1)")));
                }
                (f * n as f64).round() as usize
            }
        };
        if k > 0 && k >= n {
            return Err(Error::invalid(format!("cannot ignore {k} of {n} entries")));
        }
        Ok(k)
    }

    /// Aggregates per-pair losses; reorders `values` when trimming.
    pub fn aggregate(&self, values: &mut [f64]) -> Result<f64> {
        let k = self.outliers(values.len())?;
        if k == 0 {
            return Ok(values.iter().sum());
        }
        values.sort_unstable_by(f64::total_cmp);
        Ok(values[..values.len() - k].iter().sum())
    }

    pub fn is_sum(&self) -> bool {
        matches!(self, Aggregator::SumAll)
    }
}

/// A full cost specification `(D, ℓ, f)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostSpec {
    pub distance: InnerDistance,
    pub loss: OuterLoss,
    pub aggregator: Aggregator,
}

impl CostSpec {
    pub fn new(distance: InnerDistance, loss: OuterLoss, aggregator: Aggregator) -> Self {
        Self {
            distance,
            loss,
            aggregator,
        }
    }

    /// Sum of squared Euclidean distances.
    pub fn ssd() -> Self {
        Self::new(
            InnerDistance::euclidean(),
            OuterLoss::Power { r: 2.0 },
            Aggregator::SumAll,
        )
    }

    /// Sum of Euclidean distances.
    pub fn sum_of_distances() -> Self {
        Self::new(
            InnerDistance::euclidean(),
            OuterLoss::Power { r: 1.0 },
            Aggregator::SumAll,
        )
    }

    pub fn is_ssd(&self) -> bool {
        *self == Self::ssd()
    }

    /// `ℓ(D(a, b))`.
    #[inline]
    pub fn pair_loss(&self, a: &[f64], b: &[f64]) -> f64 {
        self.loss.eval_unchecked(self.distance.eval(a, b))
    }

    pub fn r(&self) -> f64 {
        self.loss.log_lipschitz()
    }

    pub fn s(&self) -> f64 {
        self.aggregator.log_lipschitz()
    }
}

impl fmt::Display for CostSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "z={},loss=", self.distance.z)?;
        match self.loss {
            OuterLoss::Power { r } => write!(f, "power:{r}")?,
            OuterLoss::Threshold { r, cap } => write!(f, "thresh:{r}:{cap}")?,
            OuterLoss::Huber { delta } => write!(f, "huber:{delta}")?,
        }
        match self.aggregator {
            Aggregator::SumAll => write!(f, ",agg=sum"),
            Aggregator::SumSmallest(Trim::Fraction(x)) => write!(f, ",agg=trim:{x}"),
            Aggregator::SumSmallest(Trim::Count(k)) => write!(f, ",agg=trimk:{k}"),
        }
    }
}

impl FromStr for CostSpec {
    type Err = Error;

    /// Parses `z=<z>,loss=<loss>,agg=<agg>`; omitted keys default to the
    /// sum of squared Euclidean distances.
    fn from_str(s: &str) -> Result<Self> {
        let mut spec = CostSpec::ssd();
        let num = |key: &str, v: &str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("cost spec: bad number {v:?} for {key}")))
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("cost spec: expected key=value, got {part:?}")))?;
            let fields: Vec<&str> = value.split(':').collect();
            match (key.trim(), fields.as_slice()) {
                ("z", [z]) => spec.distance = InnerDistance::new(num("z", z)?)?,
                ("loss", ["power", r]) => spec.loss = OuterLoss::power(num("power", r)?)?,
                ("loss", ["thresh", r, cap]) => {
                    spec.loss = OuterLoss::threshold(num("thresh", r)?, num("thresh", cap)?)?
                }
                ("loss", ["thresh", cap]) => {
                    spec.loss = OuterLoss::threshold(1.0, num("thresh", cap)?)?
                }
                ("loss", ["huber", delta]) => spec.loss = OuterLoss::huber(num("huber", delta)?)?,
                ("agg", ["sum"]) => spec.aggregator = Aggregator::SumAll,
                ("agg", ["trim", frac]) => {
                    let frac = num("trim", frac)?;
                    if !(0.0..1.0).contains(&frac) {
                        return Err(Error::invalid(format!("trim fraction {frac} outside [0, 1)")));
                    }
                    spec.aggregator = Aggregator::SumSmallest(Trim::Fraction(frac));
                }
                ("agg", ["trimk", k]) => {
                    let k = k
                        .trim()
                        .parse::<usize>()
                        .map_err(|_| Error::invalid(format!("cost spec: bad count {k:?}")))?;
                    spec.aggregator = Aggregator::SumSmallest(Trim::Count(k));
                }
                _ => return Err(Error::invalid(format!("cost spec: unrecognised {part:?}"))),
            }
        }
        Ok(spec)
    }
}

/// Constants of the weak triangle inequality
/// `ℓ(D(p,q)) ≤ ρ·c^r·(ℓ(D(p,v)) + ℓ(D(v,q)))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryConstants {
    pub r: f64,
    pub s: f64,
    pub z: f64,
    pub d: usize,
    /// `max{2^(r−1), 1}`.
    pub rho: f64,
    /// `d^|1/z − 1/2|`: the worst-case ratio between `ℓ_z` and `ℓ₂` norms.
    pub c_norm: f64,
}

pub fn lipschitz_constants(spec: &CostSpec, d: usize) -> TheoryConstants {
    let r = spec.r();
    let z = spec.distance.z;
    TheoryConstants {
        r,
        s: spec.s(),
        z,
        d,
        rho: 2f64.powf(r - 1.0).max(1.0),
        c_norm: (d as f64).powf((1.0 / z - 0.5).abs()),
    }
}

/// `w^{rs}·(1+√2)^{drs}`, the guaranteed factor of the best exhaustive
/// witness candidate.
pub fn theoretical_factor(spec: &CostSpec, d: usize) -> f64 {
    let k = lipschitz_constants(spec, d);
    let rs = k.r * k.s;
    k.c_norm.powf(rs) * SQRT2_PLUS_1.powf(d as f64 * rs)
}

/// `w^r·(1+√2)^{dr}`, the guaranteed factor of exhaustive align-and-match
/// (sum aggregator).
pub fn registration_factor(spec: &CostSpec, d: usize) -> f64 {
    let k = lipschitz_constants(spec, d);
    k.c_norm.powf(k.r) * SQRT2_PLUS_1.powf(d as f64 * k.r)
}

/// `(12ρ⁴c^{5r})^{d−1}·3ρc^r`, the constant in the randomized guarantee.
/// Reported for information only; it is astronomically loose.
pub fn prob_sigma(spec: &CostSpec, d: usize) -> f64 {
    let k = lipschitz_constants(spec, d);
    let cr = k.c_norm.powf(k.r);
    (12.0 * k.rho.powi(4) * cr.powi(5)).powi(d as i32 - 1) * 3.0 * k.rho * cr
}

/// Cost with identity correspondence (`pᵢ ↔ qᵢ`).
pub fn eval_cost(p: &PointCloud, q: &PointCloud, a: &Alignment, spec: &CostSpec) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::SizeMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    check_dims(p, q, a)?;
    let mut losses = pair_losses(p, a, spec, |i| q.point(i));
    spec.aggregator.aggregate(&mut losses)
}

/// Cost with correspondence `pᵢ ↔ q_{m(i)}`.
pub fn eval_matched_cost(
    p: &PointCloud,
    q: &PointCloud,
    m: &Matching,
    a: &Alignment,
    spec: &CostSpec,
) -> Result<f64> {
    if m.len() != p.len() {
        return Err(Error::SizeMismatch {
            left: p.len(),
            right: m.len(),
        });
    }
    if let Some(&bad) = m.as_slice().iter().find(|&&j| j >= q.len()) {
        return Err(Error::invalid(format!(
            "matching refers to index {bad} of a {}-point cloud",
            q.len()
        )));
    }
    if p.is_empty() {
        return Ok(0.0);
    }
    check_dims(p, q, a)?;
    let mut losses = pair_losses(p, a, spec, |i| q.point(m.get(i)));
    spec.aggregator.aggregate(&mut losses)
}

fn check_dims(p: &PointCloud, q: &PointCloud, a: &Alignment) -> Result<()> {
    p.check_same_dim(q)?;
    if a.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: a.dim(),
        });
    }
    Ok(())
}

fn pair_losses<'a>(
    p: &PointCloud,
    a: &Alignment,
    spec: &CostSpec,
    target: impl Fn(usize) -> &'a [f64],
) -> Vec<f64> {
    let mut buf = vec![0.0; p.dim()];
    (0..p.len())
        .map(|i| {
            a.apply_into(p.point(i), &mut buf);
            spec.pair_loss(&buf, target(i))
        })
        .collect()
}

/// Identity-correspondence cost that gives up (returning `None`) once a
/// partial sum exceeds `bound`. Only sum aggregation can be pruned; the
/// returned value is bit-identical to [`eval_cost`].
pub(crate) fn bounded_cost(
    p: &PointCloud,
    q: &PointCloud,
    a: &Alignment,
    spec: &CostSpec,
    bound: f64,
    scratch: &mut Vec<f64>,
) -> Option<f64> {
    let d = p.dim();
    let mut buf = [0.0f64; 16];
    let buf = &mut buf[..d];
    if spec.aggregator.is_sum() {
        let mut total = 0.0;
        for i in 0..p.len() {
            a.apply_into(p.point(i), buf);
            total += spec.pair_loss(buf, q.point(i));
            if total > bound {
                return None;
            }
        }
        Some(total)
    } else {
        scratch.clear();
        for i in 0..p.len() {
            a.apply_into(p.point(i), buf);
            scratch.push(spec.pair_loss(buf, q.point(i)));
        }
        spec.aggregator.aggregate(scratch).ok()
    }
}
