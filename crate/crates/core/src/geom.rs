//! Linear-geometry building blocks: point clouds, rotations, alignments and
//! rotations confined to a linear subspace.
//!
//! An [`Alignment`] `(R, t)` acts on a point as `p ↦ R·p − t`.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Default numerical tolerance used by validity checks.
pub const TOLERANCE: f64 = 1e-9;

/// Residual below which a candidate direction is considered linearly
/// dependent during orthogonalization.
const DEPENDENCE_THRESHOLD: f64 = 1e-10;

/// Below this norm of the sine component two directions are treated as
/// parallel (or antipodal).
const PARALLEL_THRESHOLD: f64 = 1e-12;

pub type Vector = DVector<f64>;

/// An ordered set of `d`-dimensional points stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("point dimension must be positive"));
        }
        if coords.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "{} coordinates do not split into points of dimension {dim}",
                coords.len()
            )));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("coordinate {bad}")));
        }
        Ok(Self { dim, coords })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
        }
    }

    pub fn from_points<I, P>(dim: usize, points: I) -> Result<Self>
    where
        I: IntoIterator<Item = P>,
        P: AsRef<[f64]>,
    {
        let mut coords = Vec::new();
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            coords.extend_from_slice(p);
        }
        Self::new(dim, coords)
    }

    pub fn from_vectors(dim: usize, points: &[Vector]) -> Result<Self> {
        Self::from_points(dim, points.iter().map(|v| v.as_slice()))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vector(&self, i: usize) -> Vector {
        Vector::from_column_slice(self.point(i))
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    /// Points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        PointCloud {
            dim: self.dim,
            coords,
        }
    }

    pub fn centroid(&self) -> Vector {
        let mut c = Vector::zeros(self.dim);
        if self.is_empty() {
            return c;
        }
        for p in self.iter() {
            for (ck, pk) in c.iter_mut().zip(p) {
                *ck += pk;
            }
        }
        c / self.len() as f64
    }

    /// Largest pairwise Euclidean distance.
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.len() {
            let a = self.point(i);
            for j in i + 1..self.len() {
                best = best.max(dist2(a, self.point(j)));
            }
        }
        best.sqrt()
    }

    pub(crate) fn check_same_dim(&self, other: &PointCloud) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }
}

/// Squared Euclidean distance.
#[inline]
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// An element of SO(d).
#[derive(Clone, Debug, PartialEq)]
pub struct RotationMatrix(DMatrix<f64>);

impl RotationMatrix {
    /// Validates `RᵀR = I` and `det R = 1` within [`TOLERANCE`].
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::invalid(format!(
                "rotation must be a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let r = Self(m);
        if !r.is_valid(TOLERANCE) {
            return Err(Error::invalid("matrix is not a proper rotation"));
        }
        Ok(r)
    }

    pub(crate) fn from_matrix_unchecked(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn identity(d: usize) -> Self {
        Self(DMatrix::identity(d, d))
    }

    /// Counter-clockwise planar rotation by `theta` radians.
    pub fn planar(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self(DMatrix::from_row_slice(2, 2, &[c, -s, s, c]))
    }

    pub fn from_row_slice(d: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(d, d, entries))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// The inverse rotation.
    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// `self · other`: apply `other` first.
    pub fn compose(&self, other: &RotationMatrix) -> Self {
        Self(&self.0 * &other.0)
    }

    pub fn orthogonality_error(&self) -> f64 {
        let d = self.dim();
        (self.0.transpose() * &self.0 - DMatrix::<f64>::identity(d, d)).norm()
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.orthogonality_error() < tol && (self.0.determinant() - 1.0).abs() < tol
    }

    /// Writes `R·p` into `out`.
    #[inline]
    pub fn apply_into(&self, p: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for (r, o) in out.iter_mut().enumerate().take(d) {
            let mut acc = 0.0;
            for (c, pc) in p.iter().enumerate() {
                acc += self.0[(r, c)] * pc;
            }
            *o = acc;
        }
    }

    pub fn apply(&self, p: &[f64]) -> Vector {
        let mut out = Vector::zeros(self.dim());
        self.apply_into(p, out.as_mut_slice());
        out
    }

    /// Row-major entries.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0
            .row_iter()
            .map(|row| row.iter().copied().collect())
            .collect()
    }
}

/// A rigid transformation `p ↦ R·p − t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    pub rotation: RotationMatrix,
    pub translation: Vector,
}

impl Alignment {
    pub fn new(rotation: RotationMatrix, translation: Vector) -> Result<Self> {
        if rotation.dim() != translation.len() {
            return Err(Error::DimensionMismatch {
                expected: rotation.dim(),
                found: translation.len(),
            });
        }
        if translation.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("translation".into()));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            rotation: RotationMatrix::identity(d),
            translation: Vector::zeros(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.rotation.dim()
    }

    /// Writes `R·p − t` into `out`.
    #[inline]
    pub fn apply_into(&self, p: &[f64], out: &mut [f64]) {
        self.rotation.apply_into(p, out);
        for (o, t) in out.iter_mut().zip(self.translation.iter()) {
            *o -= t;
        }
    }

    pub fn apply(&self, p: &[f64]) -> Vector {
        let mut out = Vector::zeros(self.dim());
        self.apply_into(p, out.as_mut_slice());
        out
    }

    /// The alignment equivalent to applying `self` and then `next`:
    /// `(R₂R₁, R₂t₁ + t₂)`.
    pub fn then(&self, next: &Alignment) -> Alignment {
        let rotation = next.rotation.compose(&self.rotation);
        let translation = next.rotation.matrix() * &self.translation + &next.translation;
        Alignment {
            rotation,
            translation,
        }
    }

    /// The alignment undoing `self`: `(Rᵀ, −Rᵀt)`.
    pub fn inverse(&self) -> Alignment {
        let rotation = self.rotation.transpose();
        let translation = -(rotation.matrix() * &self.translation);
        Alignment {
            rotation,
            translation,
        }
    }
}

/// A linear subspace given by an orthonormal basis (columns of a `d×J`
/// matrix).
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        let j = basis.ncols();
        if j > basis.nrows() {
            return Err(Error::invalid(format!(
                "{j} basis vectors exceed ambient dimension {}",
                basis.nrows()
            )));
        }
        let err = (basis.transpose() * &basis - DMatrix::<f64>::identity(j, j)).norm();
        if err >= TOLERANCE {
            return Err(Error::invalid(format!(
                "basis columns are not orthonormal (error {err:e})"
            )));
        }
        Ok(Self { basis })
    }

    /// Orthonormalizes `vectors` (which must be linearly independent).
    pub fn spanned_by(vectors: &[Vector]) -> Result<Self> {
        let d = vectors
            .first()
            .map(|v| v.len())
            .ok_or_else(|| Error::invalid("no spanning vectors"))?;
        let mut cols: Vec<Vector> = Vec::new();
        for v in vectors {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: v.len(),
                });
            }
            let scale = v.norm();
            match orthogonalize(v, &cols, scale) {
                Some(u) => cols.push(u),
                None => return Err(Error::Degenerate("spanning vectors are dependent".into())),
            }
        }
        Self::new(DMatrix::from_columns(&cols))
    }

    /// All of ℝ^d with the standard basis.
    pub fn full(d: usize) -> Self {
        Self {
            basis: DMatrix::identity(d, d),
        }
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Orthogonal projection onto the subspace.
    pub fn project(&self, x: &Vector) -> Vector {
        &self.basis * (self.basis.transpose() * x)
    }

    /// Distance between `x` and its projection.
    pub fn residual(&self, x: &Vector) -> f64 {
        (x - self.project(x)).norm()
    }

    /// The subspace intersected with the hyperplane orthogonal to `q`
    /// (`q` must lie in the subspace).
    pub fn without_direction(&self, q: &Vector) -> Result<Subspace> {
        let coords = self.basis.transpose() * q;
        let inner = orthonormal_complement(&coords)?;
        Ok(Subspace {
            basis: &self.basis * inner,
        })
    }
}

/// Gram–Schmidt step with one re-orthogonalization pass. Returns `None`
/// when the residual is negligible relative to `scale`.
fn orthogonalize(v: &Vector, basis: &[Vector], scale: f64) -> Option<Vector> {
    let mut u = v.clone();
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(&u);
            u.axpy(-c, b, 1.0);
        }
    }
    let n = u.norm();
    if n <= DEPENDENCE_THRESHOLD * scale.max(f64::MIN_POSITIVE) || n == 0.0 {
        None
    } else {
        Some(u / n)
    }
}

/// Builds `V_X [R 0; 0 I] V_Xᵀ`, the rotation acting as `inner_rot` inside
/// `subspace` and fixing its orthogonal complement pointwise.
pub fn embed_subspace_rotation(
    inner_rot: &RotationMatrix,
    subspace: &Subspace,
) -> Result<RotationMatrix> {
    let j = subspace.dim();
    if inner_rot.dim() != j {
        return Err(Error::DimensionMismatch {
            expected: j,
            found: inner_rot.dim(),
        });
    }
    if j < 2 {
        return Err(Error::invalid(
            "a subspace rotation needs a subspace of dimension at least 2",
        ));
    }
    let d = subspace.ambient_dim();
    let b = subspace.basis();
    let delta = inner_rot.matrix() - DMatrix::<f64>::identity(j, j);
    let m = DMatrix::<f64>::identity(d, d) + b * delta * b.transpose();
    Ok(RotationMatrix(m))
}

/// Minimal-angle rotation taking the direction of `p` to the direction of
/// `q`, acting in the plane `span{p, q}`.
///
/// When `q ∝ −p` the plane is spanned by `p` and the column of
/// `fallback_basis` least aligned with `p`. Inputs must be non-zero.
pub(crate) fn minimal_rotation(p: &[f64], q: &[f64], fallback_basis: &DMatrix<f64>) -> DMatrix<f64> {
    let d = p.len();
    let pn = norm(p);
    let qn = norm(q);
    let u: Vector = Vector::from_iterator(d, p.iter().map(|x| x / pn));
    let qh: Vector = Vector::from_iterator(d, q.iter().map(|x| x / qn));
    let cos = u.dot(&qh).clamp(-1.0, 1.0);
    let w = &qh - &u * cos;
    let sin = w.norm();
    let mut r = DMatrix::<f64>::identity(d, d);
    if sin > PARALLEL_THRESHOLD {
        let v = w / sin;
        // R = I + sin (v uᵀ − u vᵀ) + (cos − 1)(u uᵀ + v vᵀ)
        for a in 0..d {
            for b in 0..d {
                r[(a, b)] += sin * (v[a] * u[b] - u[a] * v[b])
                    + (cos - 1.0) * (u[a] * u[b] + v[a] * v[b]);
            }
        }
        return r;
    }
    if cos > 0.0 {
        return r;
    }
    // Antipodal: half turn in the plane of u and the least aligned basis
    // direction.
    let mut best: Option<(f64, usize)> = None;
    for k in 0..fallback_basis.ncols() {
        let a = fallback_basis.column(k).dot(&u).abs();
        if best.is_none_or(|(b, _)| a < b) {
            best = Some((a, k));
        }
    }
    let k = best.map(|(_, k)| k).unwrap_or(0);
    let e: Vector = fallback_basis.column(k).into_owned();
    let v = orthogonalize(&e, std::slice::from_ref(&u), 1.0)
        .expect("a unit vector cannot be parallel to every basis column of a 2+ dim subspace");
    for a in 0..d {
        for b in 0..d {
            r[(a, b)] -= 2.0 * (u[a] * u[b] + v[a] * v[b]);
        }
    }
    r
}

/// The minimal-angle rotation in `R_subspace` with `R·p/‖p‖ = q/‖q‖`.
pub fn rotation_aligning_directions(
    p: &Vector,
    q: &Vector,
    subspace: &Subspace,
) -> Result<RotationMatrix> {
    let d = subspace.ambient_dim();
    for v in [p, q] {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: v.len(),
            });
        }
    }
    if subspace.dim() < 2 {
        return Err(Error::invalid(
            "direction alignment needs a subspace of dimension at least 2",
        ));
    }
    if p.norm() == 0.0 || q.norm() == 0.0 {
        return Err(Error::ZeroNorm);
    }
    for v in [p, q] {
        let residual = subspace.residual(v);
        if residual > 1e-8 * v.norm().max(1.0) {
            return Err(Error::NotInSubspace { residual });
        }
    }
    Ok(RotationMatrix(minimal_rotation(
        p.as_slice(),
        q.as_slice(),
        subspace.basis(),
    )))
}

/// A `d×(d−1)` matrix with orthonormal columns spanning the hyperplane
/// orthogonal to `q`.
pub fn orthonormal_complement(q: &Vector) -> Result<DMatrix<f64>> {
    let d = q.len();
    let qn = q.norm();
    if qn == 0.0 || !qn.is_finite() {
        return Err(Error::ZeroNorm);
    }
    let mut basis: Vec<Vector> = vec![q / qn];
    for k in 0..d {
        if basis.len() == d {
            break;
        }
        let e = Vector::from_fn(d, |i, _| if i == k { 1.0 } else { 0.0 });
        if let Some(u) = orthogonalize(&e, &basis, 1.0) {
            basis.push(u);
        }
    }
    debug_assert_eq!(basis.len(), d);
    Ok(DMatrix::from_columns(&basis[1..]))
}

/// Replaces every point `p` by `W Wᵀ p`.
pub fn project_cloud(cloud: &PointCloud, w: &DMatrix<f64>) -> Result<PointCloud> {
    if w.nrows() != cloud.dim() {
        return Err(Error::DimensionMismatch {
            expected: cloud.dim(),
            found: w.nrows(),
        });
    }
    let projector = w * w.transpose();
    let r = RotationMatrix::from_matrix_unchecked(projector);
    let mut coords = vec![0.0; cloud.as_slice().len()];
    for (p, out) in cloud.iter().zip(coords.chunks_exact_mut(cloud.dim())) {
        r.apply_into(p, out);
    }
    PointCloud::new(cloud.dim(), coords)
}

/// Maps every point `p` to `R·p − t`.
pub fn apply_alignment(cloud: &PointCloud, a: &Alignment) -> Result<PointCloud> {
    if a.dim() != cloud.dim() {
        return Err(Error::DimensionMismatch {
            expected: cloud.dim(),
            found: a.dim(),
        });
    }
    let mut coords = vec![0.0; cloud.as_slice().len()];
    for (p, out) in cloud.iter().zip(coords.chunks_exact_mut(cloud.dim())) {
        a.apply_into(p, out);
    }
    PointCloud::new(cloud.dim(), coords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn assert_mat(m: &DMatrix<f64>, rows: &[&[f64]]) {
        for (i, row) in rows.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                assert!((m[(i, j)] - x).abs() < 1e-12, "{m} differs at ({i},{j})");
            }
        }
    }

    #[test]
    fn embed_identity_in_full_plane() {
        let r = embed_subspace_rotation(&RotationMatrix::identity(2), &Subspace::full(2)).unwrap();
        assert_mat(r.matrix(), &[&[1.0, 0.0], &[0.0, 1.0]]);
    }

    #[test]
    fn embed_quarter_turn_in_xy_plane() {
        let xy = Subspace::new(DMatrix::from_row_slice(3, 2, &[1., 0., 0., 1., 0., 0.])).unwrap();
        let r = embed_subspace_rotation(&RotationMatrix::planar(FRAC_PI_2), &xy).unwrap();
        assert_mat(
            r.matrix(),
            &[&[0.0, -1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]],
        );
    }

    #[test]
    fn embed_half_turn_in_oblique_plane() {
        let x = Subspace::spanned_by(&[v(&[1.0, 1.0, 0.0]), v(&[0.0, 0.0, 1.0])]).unwrap();
        let r = embed_subspace_rotation(&RotationMatrix::planar(PI), &x).unwrap();
        let fixed = r.apply(&[1.0, -1.0, 0.0]);
        assert_relative_eq!(fixed, v(&[1.0, -1.0, 0.0]), epsilon = 1e-12);
        let flipped = r.apply(&[1.0, 1.0, 0.0]);
        assert_relative_eq!(flipped, v(&[-1.0, -1.0, 0.0]), epsilon = 1e-12);
        assert!(r.is_valid(TOLERANCE));
    }

    #[test]
    fn embed_rejects_dimension_mismatch() {
        let err = embed_subspace_rotation(&RotationMatrix::identity(3), &Subspace::full(2));
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn align_directions_examples() {
        let full2 = Subspace::full(2);
        let r = rotation_aligning_directions(&v(&[1.0, 0.0]), &v(&[1.0, 0.0]), &full2).unwrap();
        assert_mat(r.matrix(), &[&[1.0, 0.0], &[0.0, 1.0]]);

        let r = rotation_aligning_directions(&v(&[1.0, 0.0]), &v(&[0.0, 2.0]), &full2).unwrap();
        assert_mat(r.matrix(), &[&[0.0, -1.0], &[1.0, 0.0]]);

        let q = v(&[1.0, 1.0, 0.0]) * (3.0 * FRAC_1_SQRT_2);
        let r = rotation_aligning_directions(&v(&[1.0, 0.0, 0.0]), &q, &Subspace::full(3)).unwrap();
        let s = FRAC_1_SQRT_2;
        assert_mat(
            r.matrix(),
            &[&[s, -s, 0.0], &[s, s, 0.0], &[0.0, 0.0, 1.0]],
        );
    }

    #[test]
    fn align_antipodal_uses_least_aligned_axis() {
        let p = v(&[1.0, 0.2, 0.0]);
        let q = -&p * 3.0;
        let r = rotation_aligning_directions(&p, &q, &Subspace::full(3)).unwrap();
        assert!(r.is_valid(TOLERANCE));
        assert_relative_eq!(r.apply(p.as_slice()) / p.norm(), &q / q.norm(), epsilon = 1e-12);
        // Half turn in span{p, e₃}: the complement direction is fixed.
        let fixed = v(&[-0.2, 1.0, 0.0]);
        assert_relative_eq!(r.apply(fixed.as_slice()), fixed, epsilon = 1e-12);
    }

    #[test]
    fn align_errors() {
        let s = Subspace::full(2);
        assert!(matches!(
            rotation_aligning_directions(&v(&[0.0, 0.0]), &v(&[1.0, 0.0]), &s),
            Err(Error::ZeroNorm)
        ));
        let xy = Subspace::new(DMatrix::from_row_slice(3, 2, &[1., 0., 0., 1., 0., 0.])).unwrap();
        assert!(matches!(
            rotation_aligning_directions(&v(&[1.0, 0.0, 1.0]), &v(&[0.0, 1.0, 0.0]), &xy),
            Err(Error::NotInSubspace { .. })
        ));
    }

    #[test]
    fn complement_examples() {
        let w = orthonormal_complement(&v(&[0.0, 0.0, 1.0])).unwrap();
        assert_eq!(w.shape(), (3, 2));
        assert_mat(&w, &[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]]);

        let w = orthonormal_complement(&v(&[1.0, 0.0])).unwrap();
        assert_eq!(w.shape(), (2, 1));
        assert!((w[(0, 0)]).abs() < 1e-15 && (w[(1, 0)].abs() - 1.0).abs() < 1e-15);

        let q = v(&[1.0, 1.0, 1.0]);
        let w = orthonormal_complement(&q).unwrap();
        assert!((w.transpose() * &w - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12);
        assert!((w.transpose() * &q).norm() < 1e-12);
        let mut full = w.clone().insert_column(2, 0.0);
        full.set_column(2, &(&q / q.norm()));
        assert!((full.determinant().abs() - 1.0).abs() < 1e-12);

        assert!(matches!(
            orthonormal_complement(&v(&[0.0, 0.0])),
            Err(Error::ZeroNorm)
        ));
    }

    #[test]
    fn projection_examples() {
        let w = orthonormal_complement(&v(&[0.0, 0.0, 1.0])).unwrap();
        let c = PointCloud::from_points(3, [[3.0, 4.0, 5.0], [1.0, 2.0, 0.0]]).unwrap();
        let p = project_cloud(&c, &w).unwrap();
        assert_eq!(p.point(0), &[3.0, 4.0, 0.0]);
        assert_eq!(p.point(1), &[1.0, 2.0, 0.0]);

        let w = orthonormal_complement(&v(&[1.0, 1.0, 1.0])).unwrap();
        let c = PointCloud::from_points(3, [[1.0, 0.0, 0.0]]).unwrap();
        let p = project_cloud(&c, &w).unwrap();
        let expected = [2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0];
        for (a, b) in p.point(0).iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }

        assert!(project_cloud(&c, &DMatrix::identity(2, 1)).is_err());
    }

    #[test]
    fn apply_alignment_examples() {
        let c = PointCloud::from_points(3, [[1.0, 0.0, 0.0], [0.5, -2.0, 3.0]]).unwrap();
        assert_eq!(apply_alignment(&c, &Alignment::identity(3)).unwrap(), c);

        let t = v(&[0.5, 1.0, -1.0]);
        let shifted =
            apply_alignment(&c, &Alignment::new(RotationMatrix::identity(3), t.clone()).unwrap())
                .unwrap();
        assert_eq!(shifted.point(1), &[0.0, -3.0, 4.0]);

        let rz = RotationMatrix::from_row_slice(3, &[0., -1., 0., 1., 0., 0., 0., 0., 1.]).unwrap();
        let a = Alignment::new(rz, v(&[1.0, 0.0, 0.0])).unwrap();
        let out = apply_alignment(&c, &a).unwrap();
        assert_eq!(out.point(0), &[-1.0, 1.0, 0.0]);

        assert!(apply_alignment(&c, &Alignment::identity(2)).is_err());
    }

    #[test]
    fn inverse_undoes_alignment() {
        let r = embed_subspace_rotation(
            &RotationMatrix::planar(0.7),
            &Subspace::spanned_by(&[v(&[1.0, 2.0, 0.0]), v(&[0.0, 1.0, 1.0])]).unwrap(),
        )
        .unwrap();
        let a = Alignment::new(r, v(&[0.3, -0.1, 0.2])).unwrap();
        let p = [0.4, 0.5, -0.6];
        let back = a.inverse().apply(a.apply(&p).as_slice());
        assert_relative_eq!(back, v(&p), epsilon = 1e-12);
    }

    #[test]
    fn cloud_rejects_bad_input() {
        assert!(PointCloud::new(3, vec![1.0, 2.0]).is_err());
        assert!(PointCloud::new(2, vec![1.0, f64::NAN]).is_err());
        assert!(PointCloud::from_points(3, [vec![1.0, 2.0]]).is_err());
        assert!(RotationMatrix::from_row_slice(2, &[1.0, 0.0, 0.0, -1.0]).is_err());
    }

    #[test]
    fn diameter_and_centroid() {
        let c = PointCloud::from_points(2, [[0.0, 0.0], [3.0, 4.0], [1.0, 1.0]]).unwrap();
        assert_eq!(c.diameter(), 5.0);
        assert_relative_eq!(c.centroid(), v(&[4.0 / 3.0, 5.0 / 3.0]), epsilon = 1e-15);
    }
}
