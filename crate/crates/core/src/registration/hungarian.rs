//! Minimum-cost perfect assignment (Kuhn–Munkres with potentials, O(n³)).

use nalgebra::DMatrix;

use crate::{Error, Result};

/// An optimal assignment: row `i` takes column `permutation[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub permutation: Vec<usize>,
    pub cost: f64,
}

/// Solves `min_σ Σᵢ C[i, σ(i)]` over permutations `σ` exactly.
pub fn hungarian_match(cost: &DMatrix<f64>) -> Result<Assignment> {
    let n = cost.nrows();
    if cost.ncols() != n {
        return Err(Error::invalid(format!(
            "assignment needs a square matrix, got {}x{}",
            n,
            cost.ncols()
        )));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("assignment cost matrix".into()));
    }
    // 1-based potentials; column 0 is a virtual column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut permutation = vec![0; n];
    for j in 1..=n {
        permutation[owner[j] - 1] = j - 1;
    }
    let total = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[(i, j)])
        .sum();
    Ok(Assignment {
        permutation,
        cost: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_examples() {
        let a = hungarian_match(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap();
        assert_eq!(a.permutation, vec![0, 1]);
        assert_eq!(a.cost, 2.0);

        let mut m = DMatrix::from_element(4, 4, 5.0);
        m.fill_diagonal(0.0);
        let a = hungarian_match(&m).unwrap();
        assert_eq!(a.permutation, vec![0, 1, 2, 3]);
        assert_eq!(a.cost, 0.0);

        let a = hungarian_match(&DMatrix::from_row_slice(3, 3, &[4., 1., 3., 2., 0., 5., 3., 2., 2.])).unwrap();
        assert_eq!(a.cost, 5.0);

        assert_eq!(hungarian_match(&DMatrix::zeros(0, 0)).unwrap().cost, 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(hungarian_match(&DMatrix::zeros(2, 3)).is_err());
        assert!(hungarian_match(&DMatrix::from_row_slice(1, 1, &[f64::NAN])).is_err());
    }
}
