//! Small dense linear-algebra helpers shared by the geometry and control code.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};

/// Eigenvalues below this are treated as non-positive by the SPD matrix functions.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Relative singular-value cutoff for rank decisions in exact pseudoinverses.
pub const RANK_RTOL: f64 = 1e-10;

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Applies a scalar function to the spectrum of a symmetric matrix.
pub fn sym_fn(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    sym_fn_from_eig(&eig, f)
}

pub fn sym_fn_from_eig(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let v = &eig.eigenvectors;
    let d = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&x| f(x)));
    let out = v * DMatrix::from_diagonal(&d) * v.transpose();
    symmetrize(&out)
}

pub fn sym_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_fn(m, f64::exp)
}

pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Pseudoinverse from one SVD.
///
/// With `damping > 0` each singular value maps to `s / (s^2 + damping^2)`, which
/// equals `Jᵀ(JJᵀ + λ²I)⁻¹`. With `damping == 0` singular values below
/// `RANK_RTOL * s_max` are dropped.
pub fn damped_pinv(m: &DMatrix<f64>, damping: f64) -> DMatrix<f64> {
    SvdParts::new(m).pinv(damping)
}

/// Thin SVD with the pieces needed to build both pseudoinverses and nullspace
/// projectors of the same matrix.
pub struct SvdParts {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v_t: DMatrix<f64>,
    pub ncols: usize,
    pub nrows: usize,
}

impl SvdParts {
    pub fn new(m: &DMatrix<f64>) -> Self {
        let (nrows, ncols) = m.shape();
        if nrows == 0 || ncols == 0 {
            return SvdParts {
                u: DMatrix::zeros(nrows, 0),
                s: DVector::zeros(0),
                v_t: DMatrix::zeros(0, ncols),
                ncols,
                nrows,
            };
        }
        let svd = m.clone().svd(true, true);
        SvdParts {
            u: svd.u.expect("u requested"),
            s: svd.singular_values,
            v_t: svd.v_t.expect("v_t requested"),
            ncols,
            nrows,
        }
    }

    pub fn max_singular(&self) -> f64 {
        self.s.iter().fold(0.0f64, |a, &b| a.max(b))
    }

    pub fn min_singular(&self) -> f64 {
        self.s.iter().fold(f64::INFINITY, |a, &b| a.min(b))
    }

    fn cutoff(&self) -> f64 {
        (RANK_RTOL * self.max_singular()).max(f64::MIN_POSITIVE)
    }

    pub fn rank(&self) -> usize {
        let cut = self.cutoff();
        self.s.iter().filter(|&&s| s > cut).count()
    }

    pub fn pinv(&self, damping: f64) -> DMatrix<f64> {
        let cut = self.cutoff();
        let inv = DVector::from_iterator(
            self.s.len(),
            self.s.iter().map(|&s| {
                if damping > 0.0 {
                    s / (s * s + damping * damping)
                } else if s > cut {
                    1.0 / s
                } else {
                    0.0
                }
            }),
        );
        self.v_t.transpose() * DMatrix::from_diagonal(&inv) * self.u.transpose()
    }

    /// `I - M⁺M` with the exact (rank-truncated) pseudoinverse.
    pub fn nullspace_projector(&self) -> DMatrix<f64> {
        let cut = self.cutoff();
        let mut p = DMatrix::identity(self.ncols, self.ncols);
        for (k, &s) in self.s.iter().enumerate() {
            if s > cut {
                let v = self.v_t.row(k).transpose();
                p -= &v * v.transpose();
            }
        }
        p
    }
}

/// Exact nullspace projector `I - M⁺M`.
pub fn nullspace_projector(m: &DMatrix<f64>) -> DMatrix<f64> {
    SvdParts::new(m).nullspace_projector()
}
