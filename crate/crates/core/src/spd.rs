//! Riemannian operations on the manifold of symmetric positive-definite
//! matrices under the affine-invariant metric.
//!
//! Matrix square roots, logarithms and exponentials all go through a symmetric
//! eigendecomposition. Tangent vectors are symmetric matrices anchored at a
//! base point; [`sym_vec`] gives them a Euclidean coordinate vector whose dot
//! product equals the Frobenius inner product.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, EIGEN_FLOOR};

/// Largest dimension for which the dense covariance tensor is stored.
pub const MAX_COVARIANCE_DIM: usize = 6;

fn symmetry_tolerance(m: &DMatrix<f64>) -> f64 {
    1e-10 * linalg::max_abs(m).max(1.0)
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let asym = linalg::max_asymmetry(m);
    if asym > symmetry_tolerance(m) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    Ok(())
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, got: b });
    }
    Ok(())
}

/// A symmetric positive-definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    data: DMatrix<f64>,
}

impl SpdMatrix {
    /// Validates symmetry and positive definiteness. The stored matrix is the
    /// exact symmetric part of the input.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        check_symmetric(&m)?;
        let data = linalg::symmetrize(&m);
        let min = linalg::sym_eigenvalues(&data)[0];
        if min <= EIGEN_FLOOR {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
        }
        Ok(SpdMatrix { data })
    }

    pub fn identity(dim: usize) -> Self {
        SpdMatrix {
            data: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_row_slice(diag)))
    }

    pub fn from_row_slice(dim: usize, values: &[f64]) -> Result<Self> {
        if values.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: values.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, values))
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::sym_eigenvalues(&self.data)
    }

    pub fn determinant(&self) -> f64 {
        self.eigenvalues().iter().product()
    }

    pub fn inverse(&self) -> SpdMatrix {
        SpdMatrix {
            data: linalg::sym_fn(&self.data, |x| 1.0 / x),
        }
    }

    /// `(A^{1/2}, A^{-1/2})` from one eigendecomposition.
    pub fn sqrt_and_inv_sqrt(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let eig = SymmetricEigen::new(self.data.clone());
        (
            linalg::sym_fn_from_eig(&eig, |x| x.max(EIGEN_FLOOR).sqrt()),
            linalg::sym_fn_from_eig(&eig, |x| 1.0 / x.max(EIGEN_FLOOR).sqrt()),
        )
    }

    /// Upper triangle including the diagonal, row-major.
    pub fn upper_triangular_row_major(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                out.push(self.data[(i, j)]);
            }
        }
        out
    }

    pub fn from_upper_triangular_row_major(dim: usize, values: &[f64]) -> Result<Self> {
        if values.len() != dim * (dim + 1) / 2 {
            return Err(Error::DimensionMismatch {
                expected: dim * (dim + 1) / 2,
                got: values.len(),
            });
        }
        let mut m = DMatrix::zeros(dim, dim);
        let mut it = values.iter();
        for i in 0..dim {
            for j in i..dim {
                let v = *it.next().expect("length checked");
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self::new(m)
    }

    /// Congruence `A Σ Aᵀ`. Fails if `a` is singular.
    pub fn congruence(&self, a: &DMatrix<f64>) -> Result<SpdMatrix> {
        check_dims(self.dim(), a.ncols())?;
        SpdMatrix::new(linalg::symmetrize(&(a * &self.data * a.transpose())))
    }
}

#[derive(Serialize, Deserialize)]
struct SpdWire {
    dim: usize,
    upper_triangular_row_major: Vec<f64>,
}

impl Serialize for SpdMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SpdWire {
            dim: self.dim(),
            upper_triangular_row_major: self.upper_triangular_row_major(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpdMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = SpdWire::deserialize(d)?;
        SpdMatrix::from_upper_triangular_row_major(w.dim, &w.upper_triangular_row_major)
            .map_err(serde::de::Error::custom)
    }
}

/// A symmetric matrix in the tangent space at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentSym {
    base: SpdMatrix,
    value: DMatrix<f64>,
}

impl TangentSym {
    pub fn new(base: SpdMatrix, value: DMatrix<f64>) -> Result<Self> {
        check_dims(base.dim(), value.nrows())?;
        check_symmetric(&value)?;
        Ok(TangentSym {
            base,
            value: linalg::symmetrize(&value),
        })
    }

    pub fn zero(base: SpdMatrix) -> Self {
        let n = base.dim();
        TangentSym {
            base,
            value: DMatrix::zeros(n, n),
        }
    }

    pub fn base(&self) -> &SpdMatrix {
        &self.base
    }

    pub fn value(&self) -> &DMatrix<f64> {
        &self.value
    }

    pub fn scaled(&self, t: f64) -> TangentSym {
        TangentSym {
            base: self.base.clone(),
            value: &self.value * t,
        }
    }

    /// Norm under the affine-invariant metric at the base point.
    pub fn riemannian_norm(&self) -> f64 {
        let (_, inv_sqrt) = self.base.sqrt_and_inv_sqrt();
        (&inv_sqrt * &self.value * &inv_sqrt).norm()
    }

    pub fn vec(&self) -> SymVec {
        sym_vec_unchecked(&self.value)
    }
}

/// `‖log(a^{-1/2} b a^{-1/2})‖_F`.
pub fn spd_distance(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    let (_, inv_sqrt) = a.sqrt_and_inv_sqrt();
    let whitened = &inv_sqrt * b.matrix() * &inv_sqrt;
    let eig = linalg::sym_eigenvalues(&whitened);
    Ok(eig
        .iter()
        .map(|&l| {
            let ln = l.max(EIGEN_FLOOR).ln();
            ln * ln
        })
        .sum::<f64>()
        .sqrt())
}

/// Exponential map `Exp_base(L) = S^{1/2} exp(S^{-1/2} L S^{-1/2}) S^{1/2}`.
pub fn spd_exp(base: &SpdMatrix, tangent: &TangentSym) -> Result<SpdMatrix> {
    check_dims(base.dim(), tangent.base.dim())?;
    let tol = 1e-12 * linalg::max_abs(base.matrix()).max(1.0);
    if (base.matrix() - tangent.base.matrix()).abs().max() > tol {
        return Err(Error::BaseMismatch);
    }
    exp_map(base, &tangent.value)
}

/// Exponential map applied to a raw symmetric matrix.
pub fn exp_map(base: &SpdMatrix, value: &DMatrix<f64>) -> Result<SpdMatrix> {
    check_dims(base.dim(), value.nrows())?;
    let (sqrt, inv_sqrt) = base.sqrt_and_inv_sqrt();
    let inner = linalg::sym_exp(&(&inv_sqrt * value * &inv_sqrt));
    SpdMatrix::new(linalg::symmetrize(&(&sqrt * inner * &sqrt)))
}

/// Logarithmic map `Log_base(target) = S^{1/2} log(S^{-1/2} T S^{-1/2}) S^{1/2}`.
pub fn spd_log(base: &SpdMatrix, target: &SpdMatrix) -> Result<TangentSym> {
    check_dims(base.dim(), target.dim())?;
    let (sqrt, inv_sqrt) = base.sqrt_and_inv_sqrt();
    let inner = whitened_log_with(&inv_sqrt, target)?;
    Ok(TangentSym {
        base: base.clone(),
        value: linalg::symmetrize(&(&sqrt * inner * &sqrt)),
    })
}

/// `log(S^{-1/2} T S^{-1/2})`: the logarithm expressed in the tangent space
/// at the identity after whitening by the base point.
pub fn whitened_log(base: &SpdMatrix, target: &SpdMatrix) -> Result<DMatrix<f64>> {
    check_dims(base.dim(), target.dim())?;
    let (_, inv_sqrt) = base.sqrt_and_inv_sqrt();
    whitened_log_with(&inv_sqrt, target)
}

pub(crate) fn whitened_log_with(inv_sqrt: &DMatrix<f64>, target: &SpdMatrix) -> Result<DMatrix<f64>> {
    let whitened = linalg::symmetrize(&(inv_sqrt * target.matrix() * inv_sqrt));
    let eig = SymmetricEigen::new(whitened);
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if min <= 0.0 {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }
    Ok(linalg::sym_fn_from_eig(&eig, |x| x.max(EIGEN_FLOOR).ln()))
}

/// Point at parameter `t ∈ [0, 1]` on the geodesic from `a` to `b`.
pub fn geodesic(a: &SpdMatrix, b: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange {
            value: t,
            range: "[0, 1]",
        });
    }
    let log = spd_log(a, b)?;
    exp_map(a, &(log.value * t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrechetOptions {
    /// Stop once the Riemannian norm of the tangent-space mean drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FrechetOptions {
    fn default() -> Self {
        FrechetOptions {
            tol: 1e-10,
            max_iter: 100,
        }
    }
}

/// Fréchet (Karcher) mean by Gauss-Newton iteration started at the first point.
pub fn frechet_mean(points: &[SpdMatrix], opts: FrechetOptions) -> Result<SpdMatrix> {
    let w = vec![1.0; points.len()];
    weighted_frechet_mean(points, &w, opts)
}

/// Weighted Fréchet mean. Weights must be nonnegative with a positive sum; the
/// iteration starts from the point with the largest weight.
pub fn weighted_frechet_mean(points: &[SpdMatrix], weights: &[f64], opts: FrechetOptions) -> Result<SpdMatrix> {
    if points.is_empty() {
        return Err(Error::TooFewSamples { required: 1, got: 0 });
    }
    check_dims(points.len(), weights.len())?;
    let dim = points[0].dim();
    for p in points {
        check_dims(dim, p.dim())?;
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::OutOfRange {
            value: total,
            range: "nonnegative weights with positive sum",
        });
    }

    let start = weights
        .iter()
        .enumerate()
        .fold(0, |best, (i, &w)| if w > weights[best] { i } else { best });
    let mut mean = points[start].clone();
    if points.len() == 1 {
        return Ok(mean);
    }

    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let (sqrt, inv_sqrt) = mean.sqrt_and_inv_sqrt();
        let mut step = DMatrix::zeros(dim, dim);
        for (p, &w) in points.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            step += whitened_log_with(&inv_sqrt, p)? * (w / total);
        }
        residual = step.norm();
        mean = SpdMatrix::new(linalg::symmetrize(&(&sqrt * linalg::sym_exp(&step) * &sqrt)))?;
        if residual < opts.tol {
            return Ok(mean);
        }
    }
    Err(Error::MeanNotConverged {
        iterations: opts.max_iter,
        residual,
        last: Box::new(mean),
    })
}

/// Fourth-order covariance tensor of SPD data, expressed in the tangent space
/// of the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdCovariance {
    dim: usize,
    tensor: Vec<f64>,
    base: SpdMatrix,
}

impl SpdCovariance {
    pub fn zeros(base: SpdMatrix) -> Result<Self> {
        let dim = base.dim();
        if dim > MAX_COVARIANCE_DIM {
            return Err(Error::DimensionMismatch {
                expected: MAX_COVARIANCE_DIM,
                got: dim,
            });
        }
        Ok(SpdCovariance {
            dim,
            tensor: vec![0.0; dim.pow(4)],
            base,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn base(&self) -> &SpdMatrix {
        &self.base
    }

    fn index(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.dim + j) * self.dim + k) * self.dim + l
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.tensor[self.index(i, j, k, l)]
    }

    /// Matricized form in `sym_vec` coordinates: `(1/(N-1)) Σ vec(L) vec(L)ᵀ`.
    pub fn matricized(&self) -> DMatrix<f64> {
        let d = sym_vec_len(self.dim);
        let pairs = sym_vec_pairs(self.dim);
        DMatrix::from_fn(d, d, |a, b| {
            let (i, j) = pairs[a];
            let (k, l) = pairs[b];
            self.get(i, j, k, l) * sym_vec_scale(i, j) * sym_vec_scale(k, l)
        })
    }

    /// Rebuilds the tensor from its matricized form.
    pub fn from_matricized(base: SpdMatrix, m: &DMatrix<f64>) -> Result<Self> {
        let dim = base.dim();
        let d = sym_vec_len(dim);
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: m.nrows(),
            });
        }
        let mut cov = SpdCovariance::zeros(base)?;
        let pairs = sym_vec_pairs(dim);
        for (a, &(i, j)) in pairs.iter().enumerate() {
            for (b, &(k, l)) in pairs.iter().enumerate() {
                let v = m[(a, b)] / (sym_vec_scale(i, j) * sym_vec_scale(k, l));
                for (x, y) in [(i, j), (j, i)] {
                    for (z, w) in [(k, l), (l, k)] {
                        let idx = cov.index(x, y, z, w);
                        cov.tensor[idx] = v;
                    }
                }
            }
        }
        Ok(cov)
    }

    /// Square root of the diagonal entries `S[i,i,i,i]`.
    pub fn axis_std(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i, i, i).max(0.0).sqrt()).collect()
    }

    pub fn to_wire(&self) -> CovarianceWire {
        let m = self.matricized();
        let d = m.nrows();
        CovarianceWire {
            dim: self.dim,
            matricized: (0..d)
                .flat_map(|a| (0..d).map(move |b| (a, b)))
                .map(|(a, b)| m[(a, b)])
                .collect(),
        }
    }

    pub fn from_wire(base: SpdMatrix, wire: &CovarianceWire) -> Result<Self> {
        check_dims(base.dim(), wire.dim)?;
        let d = sym_vec_len(wire.dim);
        check_dims(d * d, wire.matricized.len())?;
        Self::from_matricized(base, &DMatrix::from_row_slice(d, d, &wire.matricized))
    }
}

/// JSON form of a covariance tensor: row-major matricized entries in `sym_vec` ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceWire {
    pub dim: usize,
    pub matricized: Vec<f64>,
}

/// `(1/(N-1)) Σ Log_Ξ(Σn) ⊗ Log_Ξ(Σn)` with `(X ⊗ Y)[i,j,k,l] = X[i,j] Y[k,l]`.
pub fn spd_covariance(points: &[SpdMatrix], mean: &SpdMatrix) -> Result<SpdCovariance> {
    if points.len() < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            got: points.len(),
        });
    }
    let mut cov = SpdCovariance::zeros(mean.clone())?;
    let n = mean.dim();
    let scale = 1.0 / (points.len() as f64 - 1.0);
    for p in points {
        let log = spd_log(mean, p)?;
        let l = log.value();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for m in 0..n {
                        let idx = cov.index(i, j, k, m);
                        cov.tensor[idx] += scale * l[(i, j)] * l[(k, m)];
                    }
                }
            }
        }
    }
    Ok(cov)
}

/// Inner-product preserving coordinates of a symmetric matrix: diagonal
/// entries in index order, then the strict upper triangle row-major scaled by √2.
#[derive(Debug, Clone, PartialEq)]
pub struct SymVec {
    dim: usize,
    values: DVector<f64>,
}

impl SymVec {
    pub fn from_vector(dim: usize, values: DVector<f64>) -> Result<Self> {
        check_dims(sym_vec_len(dim), values.len())?;
        Ok(SymVec { dim, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.values
    }
}

pub fn sym_vec_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Matrix index pairs in `sym_vec` order.
pub fn sym_vec_pairs(dim: usize) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = (0..dim).map(|i| (i, i)).collect();
    for i in 0..dim {
        for j in (i + 1)..dim {
            pairs.push((i, j));
        }
    }
    pairs
}

fn sym_vec_scale(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        std::f64::consts::SQRT_2
    }
}

pub fn sym_vec(m: &DMatrix<f64>) -> Result<SymVec> {
    check_symmetric(m)?;
    Ok(sym_vec_unchecked(m))
}

pub(crate) fn sym_vec_unchecked(m: &DMatrix<f64>) -> SymVec {
    let dim = m.nrows();
    let pairs = sym_vec_pairs(dim);
    SymVec {
        dim,
        values: DVector::from_iterator(
            pairs.len(),
            pairs.iter().map(|&(i, j)| {
                if i == j {
                    m[(i, i)]
                } else {
                    0.5 * (m[(i, j)] + m[(j, i)]) * std::f64::consts::SQRT_2
                }
            }),
        ),
    }
}

pub fn sym_unvec(v: &SymVec) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(v.dim, v.dim);
    for (a, (i, j)) in sym_vec_pairs(v.dim).into_iter().enumerate() {
        if i == j {
            m[(i, i)] = v.values[a];
        } else {
            let x = v.values[a] / std::f64::consts::SQRT_2;
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{E, SQRT_2};

    fn m2(a: f64, b: f64, c: f64) -> SpdMatrix {
        SpdMatrix::from_row_slice(2, &[a, b, b, c]).unwrap()
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(SpdMatrix::new(asym), Err(Error::NotSymmetric { .. })));
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(SpdMatrix::new(indef), Err(Error::NotPositiveDefinite { .. })));
        assert!(matches!(
            SpdMatrix::from_diagonal(&[1.0, 0.0]),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn distance_examples() {
        let s = m2(2.0, 0.3, 1.0);
        assert!(spd_distance(&s, &s).unwrap() < 1e-12);
        let d = spd_distance(&SpdMatrix::identity(2), &SpdMatrix::from_diagonal(&[E, E]).unwrap()).unwrap();
        assert_relative_eq!(d, SQRT_2, epsilon = 1e-12);
        let d = spd_distance(
            &SpdMatrix::from_diagonal(&[1.0, 4.0]).unwrap(),
            &SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap(),
        )
        .unwrap();
        let ln4 = 4.0f64.ln();
        assert_relative_eq!(d, (2.0 * ln4 * ln4).sqrt(), epsilon = 1e-12);
        assert_relative_eq!(d, 1.9605, epsilon = 1e-4);
        assert!(matches!(
            spd_distance(&SpdMatrix::identity(2), &SpdMatrix::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn exp_log_examples() {
        let s = m2(2.0, 0.3, 1.0);
        let zero = TangentSym::zero(s.clone());
        assert_relative_eq!(spd_exp(&s, &zero).unwrap().matrix(), s.matrix(), epsilon = 1e-12);
        let i = SpdMatrix::identity(2);
        let t = TangentSym::new(i.clone(), DMatrix::identity(2, 2)).unwrap();
        let e = spd_exp(&i, &t).unwrap();
        assert_relative_eq!(e.matrix(), &DMatrix::from_diagonal_element(2, 2, E), epsilon = 1e-12);

        assert!(spd_log(&s, &s).unwrap().value().norm() < 1e-12);
        let l = spd_log(&i, &SpdMatrix::from_diagonal(&[E, E]).unwrap()).unwrap();
        assert_relative_eq!(l.value(), &DMatrix::identity(2, 2), epsilon = 1e-12);

        // exp at a different base than the tangent's anchor is rejected
        assert!(matches!(spd_exp(&s, &t), Err(Error::BaseMismatch)));
    }

    #[test]
    fn log_norm_matches_distance() {
        let a = m2(2.0, 0.3, 1.0);
        let b = m2(0.5, -0.2, 3.0);
        let l = spd_log(&a, &b).unwrap();
        assert_relative_eq!(l.riemannian_norm(), spd_distance(&a, &b).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn frechet_examples() {
        let s = m2(2.0, 0.3, 1.0);
        let mean = frechet_mean(&[s.clone(), s.clone(), s.clone()], FrechetOptions::default()).unwrap();
        assert_relative_eq!(mean.matrix(), s.matrix(), epsilon = 1e-12);

        let mean = frechet_mean(
            &[SpdMatrix::identity(2), SpdMatrix::from_diagonal(&[4.0, 4.0]).unwrap()],
            FrechetOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(
            mean.matrix(),
            &DMatrix::from_diagonal_element(2, 2, 2.0),
            epsilon = 1e-10
        );

        let a = m2(2.0, 0.3, 1.0);
        let b = m2(0.5, -0.2, 3.0);
        let mean = frechet_mean(&[a.clone(), b.clone()], FrechetOptions::default()).unwrap();
        let dab = spd_distance(&a, &b).unwrap();
        assert_relative_eq!(spd_distance(&mean, &a).unwrap(), dab / 2.0, epsilon = 1e-9);
        assert_relative_eq!(spd_distance(&mean, &b).unwrap(), dab / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn frechet_reports_non_convergence() {
        let a = m2(2.0, 0.3, 1.0);
        let b = m2(0.5, -0.2, 3.0);
        let err = frechet_mean(
            &[a, b],
            FrechetOptions {
                tol: 1e-10,
                max_iter: 1,
            },
        )
        .unwrap_err();
        match err {
            Error::MeanNotConverged {
                iterations,
                residual,
                last,
            } => {
                assert_eq!(iterations, 1);
                assert!(residual > 1e-10);
                assert_eq!(last.dim(), 2);
            }
            e => panic!("unexpected {e}"),
        }
        assert!(frechet_mean(&[], FrechetOptions::default()).is_err());
    }

    #[test]
    fn covariance_examples() {
        let s = m2(2.0, 0.3, 1.0);
        let cov = spd_covariance(&[s.clone(), s.clone()], &s).unwrap();
        assert!(cov.matricized().abs().max() < 1e-24);
        assert!(matches!(
            spd_covariance(std::slice::from_ref(&s), &s),
            Err(Error::TooFewSamples { .. })
        ));

        // data varying only in entry (0,0)
        let pts: Vec<_> = [1.0, 2.0, 4.0]
            .iter()
            .map(|&x| SpdMatrix::from_diagonal(&[x, 3.0]).unwrap())
            .collect();
        let mean = frechet_mean(&pts, FrechetOptions::default()).unwrap();
        let cov = spd_covariance(&pts, &mean).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        let v = cov.get(i, j, k, l);
                        if (i, j, k, l) == (0, 0, 0, 0) {
                            assert!(v > 1e-3);
                        } else {
                            assert!(v.abs() < 1e-12, "S[{i},{j},{k},{l}] = {v}");
                        }
                    }
                }
            }
        }
        // direct expansion: mean is 2, logs at 2 are 2*ln(x/2)
        let expected: f64 = [1.0f64, 2.0, 4.0]
            .iter()
            .map(|&x| (2.0 * (x / 2.0).ln()).powi(2))
            .sum::<f64>()
            / 2.0;
        assert_relative_eq!(cov.get(0, 0, 0, 0), expected, epsilon = 1e-10);
    }

    #[test]
    fn covariance_of_two_points_is_rank_one() {
        let a = m2(2.0, 0.3, 1.0);
        let b = m2(0.5, -0.2, 3.0);
        let mid = geodesic(&a, &b, 0.5).unwrap();
        let cov = spd_covariance(&[a, b], &mid).unwrap();
        let eig = linalg::sym_eigenvalues(&cov.matricized());
        let top = eig[eig.len() - 1];
        assert!(top > 1e-3);
        for &e in &eig[..eig.len() - 1] {
            assert!(e.abs() < 1e-10 * top);
        }
    }

    #[test]
    fn covariance_wire_roundtrip_preserves_tensor() {
        let pts = vec![m2(2.0, 0.3, 1.0), m2(0.5, -0.2, 3.0), m2(1.0, 0.1, 1.0)];
        let mean = frechet_mean(&pts, FrechetOptions::default()).unwrap();
        let cov = spd_covariance(&pts, &mean).unwrap();
        let back = SpdCovariance::from_wire(mean, &cov.to_wire()).unwrap();
        for (x, y) in cov.tensor.iter().zip(&back.tensor) {
            assert_relative_eq!(x, y, epsilon = 1e-14);
        }
    }

    #[test]
    fn sym_vec_examples() {
        let v = sym_vec(&DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, 2.0]))).unwrap();
        assert_eq!(v.values().as_slice(), &[1.0, 2.0, 0.0]);
        let v = sym_vec(&DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 2.0])).unwrap();
        assert_relative_eq!(v.values()[2], 3.0 * SQRT_2, epsilon = 1e-15);
        assert_eq!(&v.values().as_slice()[..2], &[1.0, 2.0]);
        assert!(sym_vec(&DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 2.0])).is_err());
    }

    #[test]
    fn geodesic_examples() {
        let a = SpdMatrix::identity(2);
        let b = SpdMatrix::from_diagonal(&[4.0, 4.0]).unwrap();
        assert_relative_eq!(geodesic(&a, &b, 0.0).unwrap().matrix(), a.matrix(), epsilon = 1e-12);
        assert_relative_eq!(geodesic(&a, &b, 1.0).unwrap().matrix(), b.matrix(), epsilon = 1e-12);
        assert_relative_eq!(
            geodesic(&a, &b, 0.5).unwrap().matrix(),
            &DMatrix::from_diagonal_element(2, 2, 2.0),
            epsilon = 1e-12
        );
        assert!(geodesic(&a, &b, 1.5).is_err());
        assert!(geodesic(&a, &b, -0.1).is_err());

        let c = m2(0.5, -0.2, 3.0);
        let d = spd_distance(&a, &c).unwrap();
        for t in [0.25, 0.5, 0.75] {
            let g = geodesic(&a, &c, t).unwrap();
            assert_relative_eq!(spd_distance(&a, &g).unwrap(), t * d, epsilon = 1e-10);
        }
    }

    #[test]
    fn json_format() {
        let s = m2(2.0, 0.3, 1.0);
        let j = serde_json::to_value(&s).unwrap();
        assert_eq!(j["dim"], 2);
        assert_eq!(j["upper_triangular_row_major"], serde_json::json!([2.0, 0.3, 1.0]));
        let back: SpdMatrix = serde_json::from_value(j).unwrap();
        assert_eq!(back, s);
        let bad = serde_json::json!({"dim": 2, "upper_triangular_row_major": [1.0, 2.0, 1.0]});
        assert!(serde_json::from_value::<SpdMatrix>(bad).is_err());
    }
}
