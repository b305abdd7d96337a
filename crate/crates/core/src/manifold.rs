//! The product manifold `St(1,r)ⁿ × St(K,r)` of factor matrices.
//!
//! A point is an `(n + K) × r` matrix `R` whose first `n` rows are unit
//! vectors and whose optional trailing `K × r` block `B` has orthonormal
//! rows (`BBᵀ = I_K`). Without the bottom block this is the feasible set of
//! the factored ±1 relaxation; with it, of the factored {0,1} relaxation.
//!
//! All calculus is for costs `f(R) = trace(M R Rᵀ)` with `M` symmetric,
//! under the Frobenius metric inherited from the ambient space.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::sparse::SymmetricCsr;

/// Below this norm a retracted row is considered collapsed.
const DEGENERATE_NORM: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ManifoldShape {
    pub n_sphere_rows: usize,
    pub bottom_block_rows: usize,
    pub rank: usize,
}

impl ManifoldShape {
    pub fn new(n_sphere_rows: usize, bottom_block_rows: usize, rank: usize) -> Result<Self> {
        let shape = ManifoldShape { n_sphere_rows, bottom_block_rows, rank };
        shape.validate()?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidShape("rank must be at least 1".into()));
        }
        if self.bottom_block_rows > self.rank {
            return Err(Error::InvalidShape(format!(
                "a {}-row orthonormal block needs rank >= {}, got {}",
                self.bottom_block_rows, self.bottom_block_rows, self.rank
            )));
        }
        if self.n_sphere_rows + self.bottom_block_rows == 0 {
            return Err(Error::InvalidShape("manifold has no rows".into()));
        }
        Ok(())
    }

    pub fn nrows(&self) -> usize {
        self.n_sphere_rows + self.bottom_block_rows
    }

    pub fn with_rank(&self, rank: usize) -> Result<Self> {
        ManifoldShape::new(self.n_sphere_rows, self.bottom_block_rows, rank)
    }

    /// Trace of `RRᵀ`, fixed by the constraints.
    pub fn trace_of_gram(&self) -> f64 {
        (self.n_sphere_rows + self.bottom_block_rows) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductStiefelPoint {
    r: DMatrix<f64>,
    shape: ManifoldShape,
}

/// A tangent vector, stored as an ambient matrix. It is only meaningful at
/// the point it was produced for.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector(pub DMatrix<f64>);

impl TangentVector {
    pub fn zeros(shape: &ManifoldShape) -> Self {
        TangentVector(DMatrix::zeros(shape.nrows(), shape.rank))
    }

    pub fn inner(&self, other: &TangentVector) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scaled(&self, s: f64) -> TangentVector {
        TangentVector(&self.0 * s)
    }
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

impl ProductStiefelPoint {
    /// Wraps a matrix, checking the manifold constraints to `tol`.
    pub fn from_matrix(shape: ManifoldShape, r: DMatrix<f64>, tol: f64) -> Result<Self> {
        shape.validate()?;
        if r.nrows() != shape.nrows() || r.ncols() != shape.rank {
            return Err(Error::invalid(format!(
                "matrix is {}x{}, shape needs {}x{}",
                r.nrows(),
                r.ncols(),
                shape.nrows(),
                shape.rank
            )));
        }
        let p = ProductStiefelPoint { r, shape };
        let err = p.constraint_violation();
        if !(err <= tol) {
            return Err(Error::invalid(format!("point is off the manifold by {err:e}")));
        }
        Ok(p)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.r
    }

    pub fn shape(&self) -> &ManifoldShape {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.rank
    }

    /// Largest violation among `|‖xᵢ‖ − 1|` over sphere rows and
    /// `‖BBᵀ − I‖_F` for the bottom block.
    pub fn constraint_violation(&self) -> f64 {
        let n = self.shape.n_sphere_rows;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            worst = worst.max((self.r.row(i).norm() - 1.0).abs());
        }
        let k = self.shape.bottom_block_rows;
        if k > 0 {
            let b = self.r.rows(n, k);
            let gram = &b * b.transpose();
            worst = worst.max((gram - DMatrix::<f64>::identity(k, k)).norm());
        }
        worst
    }

    /// Appends zero columns up to `new_rank`; the result stays feasible.
    pub fn lift(&self, new_rank: usize) -> Result<Self> {
        let shape = self.shape.with_rank(new_rank)?;
        if new_rank < self.shape.rank {
            return Err(Error::InvalidShape("cannot lift to a smaller rank".into()));
        }
        let mut r = DMatrix::zeros(shape.nrows(), new_rank);
        r.columns_mut(0, self.shape.rank).copy_from(&self.r);
        Ok(ProductStiefelPoint { r, shape })
    }
}

/// Orthonormal rows spanning the row space of a `K × r` matrix, by thin QR
/// of its transpose with the sign convention `diag(R) > 0`.
fn orthonormal_rows_qr(a: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = a.transpose().qr();
    let (mut q, rr) = qr.unpack();
    for j in 0..q.ncols() {
        if rr[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q.transpose()
}

/// Draws a point: normalized Gaussian sphere rows, orthonormalized Gaussian
/// bottom block.
pub fn random_point(shape: &ManifoldShape, seed: u64) -> Result<ProductStiefelPoint> {
    shape.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = DMatrix::from_fn(shape.nrows(), shape.rank, |_, _| StandardNormal.sample(&mut rng));
    for i in 0..shape.n_sphere_rows {
        let mut row = r.row_mut(i);
        let nrm = row.norm();
        row /= nrm;
    }
    let (n, k) = (shape.n_sphere_rows, shape.bottom_block_rows);
    if k > 0 {
        let b = orthonormal_rows_qr(&r.rows(n, k).into_owned());
        r.rows_mut(n, k).copy_from(&b);
    }
    Ok(ProductStiefelPoint { r, shape: *shape })
}

/// Orthogonal projection of an ambient direction onto the tangent space.
pub fn project_tangent(point: &ProductStiefelPoint, ambient: &DMatrix<f64>) -> TangentVector {
    let (n, k) = (point.shape.n_sphere_rows, point.shape.bottom_block_rows);
    let x = &point.r;
    let mut v = ambient.clone();
    for i in 0..n {
        let c = ambient.row(i).dot(&x.row(i));
        let mut row = v.row_mut(i);
        row -= x.row(i) * c;
    }
    if k > 0 {
        let b = x.rows(n, k);
        let g = ambient.rows(n, k);
        let s = sym(&(g * b.transpose()));
        let corr = &s * b;
        let mut vb = v.rows_mut(n, k);
        vb -= corr;
    }
    TangentVector(v)
}

/// Retraction: row normalization on spheres, polar factor on the
/// orthonormal block. Both are metric projections, hence second order.
pub fn retract(point: &ProductStiefelPoint, tangent: &TangentVector) -> Result<ProductStiefelPoint> {
    let (n, k) = (point.shape.n_sphere_rows, point.shape.bottom_block_rows);
    let x = &point.r;
    let v = &tangent.0;
    if v.shape() != x.shape() {
        return Err(Error::invalid("tangent and point dimensions differ"));
    }
    let mut out = x.clone();
    for i in 0..n {
        if v.row(i).iter().all(|&e| e == 0.0) {
            continue;
        }
        let moved = x.row(i) + v.row(i);
        let nrm = moved.norm();
        if !(nrm >= DEGENERATE_NORM) {
            return Err(Error::DegenerateStep { row: i, norm: nrm });
        }
        out.row_mut(i).copy_from(&(moved / nrm));
    }
    if k > 0 && v.rows(n, k).iter().any(|&e| e != 0.0) {
        let moved = x.rows(n, k) + v.rows(n, k);
        let svd = moved.svd(true, true);
        let smin = svd.singular_values.min();
        if !(smin >= DEGENERATE_NORM) {
            return Err(Error::DegenerateStep { row: n, norm: smin });
        }
        let polar = svd.u.unwrap() * svd.v_t.unwrap();
        out.rows_mut(n, k).copy_from(&polar);
    }
    Ok(ProductStiefelPoint { r: out, shape: point.shape })
}

fn check_dims(m: &SymmetricCsr, point: &ProductStiefelPoint) -> Result<()> {
    if m.dim() != point.shape.nrows() {
        return Err(Error::invalid(format!(
            "cost matrix is {0}x{0}, point has {1} rows",
            m.dim(),
            point.shape.nrows()
        )));
    }
    Ok(())
}

/// Euclidean gradient `2MR` and the normal-space multipliers derived from
/// it, cached so repeated Hessian-vector products at one point are cheap.
#[derive(Debug, Clone)]
pub struct LocalCurvature {
    egrad: DMatrix<f64>,
    /// `⟨(2MR)ᵢ, xᵢ⟩` for every sphere row.
    sphere: Vec<f64>,
    /// `sym((2MR)_b Bᵀ)` for the orthonormal block.
    block: DMatrix<f64>,
}

impl LocalCurvature {
    pub fn new(m: &SymmetricCsr, point: &ProductStiefelPoint) -> Result<Self> {
        check_dims(m, point)?;
        let egrad = m.mul_dense(&point.r) * 2.0;
        Ok(Self::from_egrad(egrad, point))
    }

    fn from_egrad(egrad: DMatrix<f64>, point: &ProductStiefelPoint) -> Self {
        let (n, k) = (point.shape.n_sphere_rows, point.shape.bottom_block_rows);
        let sphere = (0..n).map(|i| egrad.row(i).dot(&point.r.row(i))).collect();
        let block = if k > 0 {
            sym(&(egrad.rows(n, k) * point.r.rows(n, k).transpose()))
        } else {
            DMatrix::zeros(0, 0)
        };
        LocalCurvature { egrad, sphere, block }
    }

    pub fn euclidean_gradient(&self) -> &DMatrix<f64> {
        &self.egrad
    }

    pub fn gradient(&self, point: &ProductStiefelPoint) -> TangentVector {
        project_tangent(point, &self.egrad)
    }

    /// Riemannian Hessian applied to a tangent vector:
    /// `Proj(2MV) − W(V)`, where the Weingarten term `W` scales each sphere
    /// row by its multiplier and left-multiplies the block by `sym((2MR)_b Bᵀ)`.
    pub fn hessian_vec(&self, m: &SymmetricCsr, point: &ProductStiefelPoint, v: &TangentVector) -> TangentVector {
        let (n, k) = (point.shape.n_sphere_rows, point.shape.bottom_block_rows);
        let mut amb = m.mul_dense(&v.0) * 2.0;
        for i in 0..n {
            let mut row = amb.row_mut(i);
            row -= v.0.row(i) * self.sphere[i];
        }
        if k > 0 {
            let corr = &self.block * v.0.rows(n, k);
            let mut ab = amb.rows_mut(n, k);
            ab -= corr;
        }
        project_tangent(point, &amb)
    }

    /// Hessian at the zero-padded lift `[R, 0]` restricted to directions
    /// `[0, w]` that only move the new column. That subspace is invariant;
    /// the returned vector is the new-column part, `(2M − Λ)w`.
    pub fn new_column_hessian(&self, m: &SymmetricCsr, w: &DVector<f64>) -> DVector<f64> {
        let n = self.sphere.len();
        let k = self.block.nrows();
        let mut out = m.mul_vec(w) * 2.0;
        for i in 0..n {
            out[i] -= self.sphere[i] * w[i];
        }
        if k > 0 {
            let wb = w.rows(n, k).into_owned();
            let corr = &self.block * wb;
            let mut ob = out.rows_mut(n, k);
            ob -= corr;
        }
        out
    }

    /// Dense `2M − Λ`, for small problems and tests.
    pub fn new_column_hessian_dense(&self, m: &SymmetricCsr) -> DMatrix<f64> {
        let n = self.sphere.len();
        let k = self.block.nrows();
        let mut c = m.to_dense() * 2.0;
        for i in 0..n {
            c[(i, i)] -= self.sphere[i];
        }
        if k > 0 {
            let mut cb = c.view_mut((n, n), (k, k));
            cb -= &self.block;
        }
        c
    }
}

pub fn riemannian_gradient(m: &SymmetricCsr, point: &ProductStiefelPoint) -> Result<TangentVector> {
    Ok(LocalCurvature::new(m, point)?.gradient(point))
}

pub fn riemannian_hessian_vec(
    m: &SymmetricCsr,
    point: &ProductStiefelPoint,
    tangent: &TangentVector,
) -> Result<TangentVector> {
    Ok(LocalCurvature::new(m, point)?.hessian_vec(m, point, tangent))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shapes() -> Vec<ManifoldShape> {
        vec![
            ManifoldShape::new(6, 0, 3).unwrap(),
            ManifoldShape::new(5, 3, 4).unwrap(),
            ManifoldShape::new(4, 2, 2).unwrap(),
        ]
    }

    fn random_ambient(shape: &ManifoldShape, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(shape.nrows(), shape.rank, |_, _| StandardNormal.sample(&mut rng))
    }

    fn tangency_error(p: &ProductStiefelPoint, v: &TangentVector) -> f64 {
        let (n, k) = (p.shape.n_sphere_rows, p.shape.bottom_block_rows);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            worst = worst.max(v.0.row(i).dot(&p.r.row(i)).abs());
        }
        if k > 0 {
            let b = p.r.rows(n, k);
            let vb = v.0.rows(n, k);
            worst = worst.max((vb * b.transpose() + b * vb.transpose()).norm());
        }
        worst
    }

    #[test]
    fn shape_validation() {
        assert!(ManifoldShape::new(3, 3, 2).is_err());
        assert!(ManifoldShape::new(3, 0, 0).is_err());
        assert!(random_point(&ManifoldShape { n_sphere_rows: 2, bottom_block_rows: 3, rank: 2 }, 0).is_err());
    }

    #[test]
    fn random_points_are_feasible_and_deterministic() {
        let s1 = ManifoldShape::new(5, 0, 1).unwrap();
        let p = random_point(&s1, 1).unwrap();
        assert!(p.matrix().iter().all(|&e| e == 1.0 || e == -1.0));
        for shape in shapes() {
            let a = random_point(&shape, 17).unwrap();
            let b = random_point(&shape, 17).unwrap();
            assert!(a.constraint_violation() < 1e-12);
            assert_eq!(a, b);
            assert!(ProductStiefelPoint::from_matrix(shape, a.matrix().clone(), 1e-10).is_ok());
        }
    }

    #[test]
    fn projection_properties() {
        for (s, shape) in shapes().into_iter().enumerate() {
            let p = random_point(&shape, s as u64).unwrap();
            let g = random_ambient(&shape, 100 + s as u64);
            let v = project_tangent(&p, &g);
            assert!(tangency_error(&p, &v) < 1e-12);
            let vv = project_tangent(&p, &v.0);
            assert!((vv.0 - &v.0).norm() < 1e-12);
            // Self-adjointness.
            let h = random_ambient(&shape, 200 + s as u64);
            let w = project_tangent(&p, &h);
            assert!((v.0.dot(&h) - g.dot(&w.0)).abs() < 1e-12);
            // Radial directions are annihilated on sphere rows.
            let radial = project_tangent(&p, p.matrix());
            for i in 0..shape.n_sphere_rows {
                assert!(radial.0.row(i).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn retraction_properties() {
        for (s, shape) in shapes().into_iter().enumerate() {
            let p = random_point(&shape, 7 + s as u64).unwrap();
            assert_eq!(retract(&p, &TangentVector::zeros(&shape)).unwrap(), p);
            for t in 0..5 {
                let v = project_tangent(&p, &(random_ambient(&shape, t) * 3.0));
                let q = retract(&p, &v).unwrap();
                assert!(q.constraint_violation() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_sphere_step() {
        let shape = ManifoldShape::new(1, 0, 2).unwrap();
        let p = ProductStiefelPoint::from_matrix(shape, DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), 1e-12).unwrap();
        let v = TangentVector(DMatrix::from_row_slice(1, 2, &[-1.0, 0.0]));
        assert!(matches!(retract(&p, &v), Err(Error::DegenerateStep { .. })));
    }

    #[test]
    fn gradient_vanishes_for_identity_cost() {
        let shape = ManifoldShape::new(5, 0, 3).unwrap();
        let id = SymmetricCsr::from_triplets(5, &(0..5).map(|i| (i, i, 1.0)).collect::<Vec<_>>()).unwrap();
        let p = random_point(&shape, 3).unwrap();
        assert!(riemannian_gradient(&id, &p).unwrap().norm() < 1e-14);
        let zero = SymmetricCsr::zeros(5);
        assert_eq!(riemannian_gradient(&zero, &p).unwrap().norm(), 0.0);
        let wrong = SymmetricCsr::zeros(4);
        assert!(riemannian_gradient(&wrong, &p).is_err());
    }

    #[test]
    fn new_column_hessian_matches_full_operator() {
        let shape = ManifoldShape::new(5, 3, 4).unwrap();
        let mut trip = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for i in 0..8 {
            for j in 0..=i {
                let v: f64 = StandardNormal.sample(&mut rng);
                trip.push((i, j, v));
                if i != j {
                    trip.push((j, i, v));
                }
            }
        }
        let m = SymmetricCsr::from_triplets(8, &trip).unwrap();
        let p = random_point(&shape, 9).unwrap();
        let lifted = p.lift(5).unwrap();
        let curv_lifted = LocalCurvature::new(&m, &lifted).unwrap();
        let curv = LocalCurvature::new(&m, &p).unwrap();
        let w = DVector::from_fn(8, |i, _| (i as f64 * 0.7).sin());
        let mut dir = DMatrix::zeros(8, 5);
        dir.column_mut(4).copy_from(&w);
        let full = curv_lifted.hessian_vec(&m, &lifted, &TangentVector(dir));
        let col = curv.new_column_hessian(&m, &w);
        assert!(full.0.columns(0, 4).norm() < 1e-12);
        assert!((full.0.column(4) - &col).norm() < 1e-12);
        let dense = curv.new_column_hessian_dense(&m);
        assert!((dense * &w - col).norm() < 1e-12);
    }
}
