//! Closed-form minimizer of the sum of squared distances for known
//! correspondence.

use nalgebra::DMatrix;

use crate::geom::{Alignment, PointCloud, RotationMatrix, Vector};
use crate::registration::Matching;
use crate::{Error, Result};

/// Global minimizer of `Σ ‖R·pᵢ − t − q_{m(i)}‖²` (identity matching by
/// default).
///
/// With `H = Σ p̄ᵢ q̄ᵢᵀ = U Σ Vᵀ` on centered points, `R = V·diag(1, …, 1, s)·Uᵀ`
/// where `s = sign det(V Uᵀ)` flips the direction of the smallest singular
/// value. Then `t = R·c_P − c_Q`.
pub fn kabsch_ssd(p: &PointCloud, q: &PointCloud, matching: Option<&Matching>) -> Result<Alignment> {
    p.check_same_dim(q)?;
    let n = p.len();
    match matching {
        Some(m) => {
            if m.len() != n {
                return Err(Error::SizeMismatch {
                    left: n,
                    right: m.len(),
                });
            }
            if m.as_slice().iter().any(|&j| j >= q.len()) {
                return Err(Error::invalid("matching refers past the end of Q"));
            }
        }
        None => {
            if q.len() != n {
                return Err(Error::SizeMismatch {
                    left: n,
                    right: q.len(),
                });
            }
        }
    }
    if n < p.dim() {
        return Err(Error::invalid(format!(
            "need at least d = {} pairs, got {n}",
            p.dim()
        )));
    }
    Ok(kabsch_pairs(p, q, |i| matching.map_or(i, |m| m.get(i))))
}

/// Kabsch on the pairs `(pᵢ, q_{target(i)})`; any `n ≥ 1`.
pub(crate) fn kabsch_pairs(p: &PointCloud, q: &PointCloud, target: impl Fn(usize) -> usize) -> Alignment {
    let d = p.dim();
    let n = p.len();
    let mut cp = Vector::zeros(d);
    let mut cq = Vector::zeros(d);
    for i in 0..n {
        for k in 0..d {
            cp[k] += p.point(i)[k];
            cq[k] += q.point(target(i))[k];
        }
    }
    cp /= n as f64;
    cq /= n as f64;
    let mut h = DMatrix::<f64>::zeros(d, d);
    for i in 0..n {
        let (a, b) = (p.point(i), q.point(target(i)));
        for r in 0..d {
            let x = a[r] - cp[r];
            for c in 0..d {
                h[(r, c)] += x * (b[c] - cq[c]);
            }
        }
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("SVD requested U");
    let v_t = svd.v_t.expect("SVD requested Vᵀ");
    let v = v_t.transpose();
    let mut r = &v * u.transpose();
    if r.determinant() < 0.0 {
        let smallest = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(d - 1);
        let mut flip = DMatrix::<f64>::identity(d, d);
        flip[(smallest, smallest)] = -1.0;
        r = &v * flip * u.transpose();
    }
    let rotation = RotationMatrix::from_matrix_unchecked(r);
    let translation = rotation.matrix() * cp - cq;
    Alignment {
        rotation,
        translation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{eval_cost, CostSpec};
    use crate::geom::apply_alignment;

    fn cloud() -> PointCloud {
        PointCloud::from_points(3, (0..12).map(|i| {
            let x = i as f64;
            [(0.9 * x).sin(), (0.4 * x).cos() * 0.7, 0.05 * x - 0.3]
        }))
        .unwrap()
    }

    #[test]
    fn equal_clouds_give_identity() {
        let p = cloud();
        let a = kabsch_ssd(&p, &p, None).unwrap();
        assert!((a.rotation.matrix() - DMatrix::<f64>::identity(3, 3)).norm() < 1e-12);
        assert!(a.translation.norm() < 1e-12);
    }

    #[test]
    fn recovers_generating_alignment() {
        let p = cloud();
        let r = RotationMatrix::from_row_slice(3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let truth = Alignment::new(r, Vector::from_column_slice(&[0.2, -0.1, 0.05])).unwrap();
        let q = apply_alignment(&p, &truth).unwrap();
        let a = kabsch_ssd(&p, &q, None).unwrap();
        assert!((a.rotation.matrix() - truth.rotation.matrix()).norm() < 1e-9);
        assert!((&a.translation - &truth.translation).norm() < 1e-9);
        assert!(a.rotation.is_valid(1e-9));
        assert!(eval_cost(&p, &q, &a, &CostSpec::ssd()).unwrap() < 1e-20);
    }

    #[test]
    fn honours_matching() {
        let p = cloud();
        let perm: Vec<usize> = (0..12).rev().collect();
        let q = p.select(&perm);
        let m = Matching::new(perm, 12).unwrap();
        let a = kabsch_ssd(&p, &q, Some(&m)).unwrap();
        assert!(a.translation.norm() < 1e-12);
    }

    #[test]
    fn collinear_input_still_proper_rotation() {
        let p = PointCloud::from_points(3, (0..5).map(|i| [i as f64, 0.0, 0.0])).unwrap();
        let q = PointCloud::from_points(3, (0..5).map(|i| [0.0, i as f64, 0.0])).unwrap();
        let a = kabsch_ssd(&p, &q, None).unwrap();
        assert!(a.rotation.is_valid(1e-9));
        assert!(eval_cost(&p, &q, &a, &CostSpec::ssd()).unwrap() < 1e-18);
    }

    #[test]
    fn too_few_points() {
        let p = cloud().select(&[0, 1]);
        assert!(kabsch_ssd(&p, &p, None).is_err());
    }
}
