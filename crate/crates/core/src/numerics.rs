//! Dense real/complex matrix primitives shared by the whole crate.
//!
//! Matrices here are small (a few dozen sites at most), so everything is a
//! dense algorithm: a partially pivoted LU solve written in place, and
//! symmetric/general eigendecompositions delegated to LAPACK (`dsyev`,
//! `zgeev`) behind safe wrappers with fixed ordering conventions.

use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Numerical tolerances used by validation and factorization.
///
/// The defaults are fixed constants suitable for dimensions up to a few
/// dozen; construct a custom value and use the `*_with` entry points to
/// override them.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Allowed relative asymmetry `|a_ij - a_ji|` when accepting a symmetric matrix.
    pub symmetry: f64,
    /// Relative pivot threshold below which a matrix is declared singular.
    pub pivot: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            symmetry: 1e-12,
            pivot: 1e-13,
        }
    }
}

/// Real symmetric matrix with the symmetry invariant enforced exactly.
///
/// Input that is symmetric only to within [`Tolerances::symmetry`] is
/// projected onto its symmetric part, so stored entries satisfy
/// `a[i][j] == a[j][i]` bitwise.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSymMatrix {
    entries: Array2<f64>,
}

impl RealSymMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        Self::new_with(entries, &Tolerances::default())
    }

    pub fn new_with(entries: Array2<f64>, tol: &Tolerances) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c {
            return Err(Error::DimensionMismatch(format!(
                "symmetric matrix must be square, got {r}x{c}"
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "matrix entries must be finite".into(),
            ));
        }
        let scale = entries.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
        let mut sym = entries;
        for i in 0..r {
            for j in (i + 1)..r {
                let d = (sym[[i, j]] - sym[[j, i]]).abs();
                if d > tol.symmetry * scale {
                    return Err(Error::InvalidParameter(format!(
                        "matrix not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {d:.3e}"
                    )));
                }
                let avg = 0.5 * (sym[[i, j]] + sym[[j, i]]);
                sym[[i, j]] = avg;
                sym[[j, i]] = avg;
            }
        }
        Ok(RealSymMatrix { entries: sym })
    }

    /// Builds from an entry generator; `f` is only consulted for `i <= j`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Array2::zeros((dim, dim));
        for i in 0..dim {
            for j in i..dim {
                let x = f(i, j);
                m[[i, j]] = x;
                m[[j, i]] = x;
            }
        }
        RealSymMatrix { entries: m }
    }

    pub fn zeros(dim: usize) -> Self {
        RealSymMatrix {
            entries: Array2::zeros((dim, dim)),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn into_array(self) -> Array2<f64> {
        self.entries
    }

    pub fn to_complex(&self) -> ComplexMatrix {
        ComplexMatrix {
            entries: self.entries.mapv(|x| Complex64::new(x, 0.0)),
        }
    }
}

/// Dense complex matrix with finite entries. Square where a square matrix
/// is required (eigendecomposition, the left side of a solve); right-hand
/// sides may be rectangular.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    entries: Array2<Complex64>,
}

impl ComplexMatrix {
    pub fn new(entries: Array2<Complex64>) -> Result<Self> {
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter(
                "matrix entries must be finite".into(),
            ));
        }
        Ok(ComplexMatrix { entries })
    }

    pub fn identity(dim: usize) -> Self {
        ComplexMatrix {
            entries: Array2::eye(dim).mapv(|x: f64| Complex64::new(x, 0.0)),
        }
    }

    fn require_square(&self, context: &str) -> Result<usize> {
        let (r, c) = self.entries.dim();
        if r != c {
            return Err(Error::DimensionMismatch(format!(
                "{context}: matrix must be square, got {r}x{c}"
            )));
        }
        Ok(r)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn as_array(&self) -> &Array2<Complex64> {
        &self.entries
    }

    pub fn into_array(self) -> Array2<Complex64> {
        self.entries
    }
}

/// Eigendecomposition result.
///
/// Eigenvalues are sorted by real part ascending, imaginary part as the
/// tie-break; `eigenvectors` holds unit-norm column vectors aligned with
/// the eigenvalue order. For a real symmetric input the imaginary parts
/// are exactly zero.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    pub eigenvectors: Array2<Complex64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn real_eigenvalues(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|z| z.re).collect()
    }
}

// ---------------------------------------------------------------------------
// Linear solve (partially pivoted LU)
// ---------------------------------------------------------------------------

/// LU factorization with row pivoting, reusable across right-hand sides.
pub(crate) struct LuFactors {
    lu: Array2<Complex64>,
    perm: Vec<usize>,
}

pub(crate) fn lu_factor(a: ArrayView2<Complex64>, pivot_tol: f64) -> Result<LuFactors> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let scale = a.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if scale == 0.0 {
        return Err(Error::SingularMatrix {
            pivot: 0.0,
            tolerance: 0.0,
        });
    }
    let tol = pivot_tol * scale;
    let mut lu = a.to_owned();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (pivot_row, pivot_mag) = (k..n)
            .map(|i| (i, lu[[i, k]].norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty pivot search");
        if pivot_mag < tol {
            return Err(Error::SingularMatrix {
                pivot: pivot_mag,
                tolerance: tol,
            });
        }
        if pivot_row != k {
            for j in 0..n {
                let tmp = lu[[k, j]];
                lu[[k, j]] = lu[[pivot_row, j]];
                lu[[pivot_row, j]] = tmp;
            }
            perm.swap(k, pivot_row);
        }
        let pivot = lu[[k, k]];
        for i in (k + 1)..n {
            let factor = lu[[i, k]] / pivot;
            lu[[i, k]] = factor;
            for j in (k + 1)..n {
                let upd = factor * lu[[k, j]];
                lu[[i, j]] -= upd;
            }
        }
    }
    Ok(LuFactors { lu, perm })
}

impl LuFactors {
    pub(crate) fn solve(&self, b: ArrayView2<Complex64>) -> Array2<Complex64> {
        let n = self.lu.nrows();
        let m = b.ncols();
        debug_assert_eq!(b.nrows(), n);
        let mut x = Array2::zeros((n, m));
        for i in 0..n {
            for j in 0..m {
                x[[i, j]] = b[[self.perm[i], j]];
            }
        }
        // forward substitution with unit lower triangle
        for k in 0..n {
            for i in (k + 1)..n {
                let f = self.lu[[i, k]];
                for j in 0..m {
                    let upd = f * x[[k, j]];
                    x[[i, j]] -= upd;
                }
            }
        }
        // back substitution
        for k in (0..n).rev() {
            let d = self.lu[[k, k]];
            for j in 0..m {
                x[[k, j]] /= d;
            }
            for i in 0..k {
                let f = self.lu[[i, k]];
                for j in 0..m {
                    let upd = f * x[[k, j]];
                    x[[i, j]] -= upd;
                }
            }
        }
        x
    }
}

/// Solves `A X = B` for square `A`.
pub fn solve_linear(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    solve_linear_with(a, b, &Tolerances::default())
}

pub fn solve_linear_with(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    tol: &Tolerances,
) -> Result<ComplexMatrix> {
    a.require_square("solve")?;
    if a.dim() != b.as_array().nrows() {
        return Err(Error::DimensionMismatch(format!(
            "solve: A is {}x{} but B has {} rows",
            a.dim(),
            a.dim(),
            b.as_array().nrows()
        )));
    }
    let f = lu_factor(a.as_array().view(), tol.pivot)?;
    Ok(ComplexMatrix {
        entries: f.solve(b.as_array().view()),
    })
}

// ---------------------------------------------------------------------------
// Eigendecompositions (LAPACK)
// ---------------------------------------------------------------------------

/// Symmetric eigendecomposition returning raw real parts, ascending.
pub(crate) fn sym_eigen(a: &RealSymMatrix) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.dim();
    if n == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }
    // stored exactly symmetric, so row-major data doubles as column-major
    let mut buf: Vec<f64> = a.as_array().iter().copied().collect();
    let ni = n as i32;
    let mut w = vec![0.0f64; n];
    let mut info = 0i32;
    let mut query = [0.0f64];
    unsafe {
        lapack::dsyev(b'V', b'L', ni, &mut buf, ni, &mut w, &mut query, -1, &mut info);
    }
    let lwork = query[0] as i32;
    let mut work = vec![0.0f64; lwork.max(1) as usize];
    unsafe {
        lapack::dsyev(b'V', b'L', ni, &mut buf, ni, &mut w, &mut work, lwork, &mut info);
    }
    if info > 0 {
        return Err(Error::ConvergenceFailure { info });
    }
    assert!(info == 0, "dsyev: illegal argument {info}");
    // buf now holds eigenvectors column-major: column j = eigenvector j
    let mut vecs = Array2::zeros((n, n));
    for j in 0..n {
        for i in 0..n {
            vecs[[i, j]] = buf[i + j * n];
        }
    }
    Ok((Array1::from_vec(w), vecs))
}

/// Eigendecomposition of a real symmetric matrix.
///
/// Eigenvalues come out real (zero imaginary part by construction),
/// ascending, with orthonormal eigenvectors in the matching columns.
pub fn eig_sym(a: &RealSymMatrix) -> Result<Spectrum> {
    let (w, v) = sym_eigen(a)?;
    let n = w.len();
    let eigenvalues = w.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut eigenvectors = Array2::zeros((n, n));
    for j in 0..n {
        for i in 0..n {
            eigenvectors[[i, j]] = Complex64::new(v[[i, j]], 0.0);
        }
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigendecomposition of a general square complex matrix.
///
/// Eigenvalues are sorted by (real, imaginary) ascending and columns of
/// the returned matrix hold the matching unit-norm right eigenvectors.
pub fn eig_complex(a: &ComplexMatrix) -> Result<Spectrum> {
    let n = a.require_square("eigendecomposition")?;
    if n == 0 {
        return Ok(Spectrum {
            eigenvalues: vec![],
            eigenvectors: Array2::zeros((0, 0)),
        });
    }
    let ni = n as i32;
    // zgeev wants column-major input
    let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        for i in 0..n {
            buf[i + j * n] = a.as_array()[[i, j]];
        }
    }
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    let mut vl = [Complex64::new(0.0, 0.0)];
    let mut vr = vec![Complex64::new(0.0, 0.0); n * n];
    let mut rwork = vec![0.0f64; 2 * n];
    let mut info = 0i32;
    let mut query = [Complex64::new(0.0, 0.0)];
    unsafe {
        lapack::zgeev(
            b'N', b'V', ni, &mut buf, ni, &mut w, &mut vl, 1, &mut vr, ni, &mut query, -1,
            &mut rwork, &mut info,
        );
    }
    let lwork = query[0].re as i32;
    let mut work = vec![Complex64::new(0.0, 0.0); lwork.max(1) as usize];
    unsafe {
        lapack::zgeev(
            b'N', b'V', ni, &mut buf, ni, &mut w, &mut vl, 1, &mut vr, ni, &mut work, lwork,
            &mut rwork, &mut info,
        );
    }
    if info > 0 {
        return Err(Error::ConvergenceFailure { info });
    }
    assert!(info == 0, "zgeev: illegal argument {info}");

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        w[i].re
            .total_cmp(&w[j].re)
            .then(w[i].im.total_cmp(&w[j].im))
    });
    let eigenvalues: Vec<Complex64> = order.iter().map(|&i| w[i]).collect();
    let mut eigenvectors = Array2::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        let norm = (0..n)
            .map(|i| vr[i + src * n].norm_sqr())
            .sum::<f64>()
            .sqrt();
        for i in 0..n {
            eigenvectors[[i, col]] = vr[i + src * n] / norm;
        }
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}
