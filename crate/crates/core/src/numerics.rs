//! Minimal complex linear-algebra kernel.
//!
//! The scheduler only ever needs the dominant eigenpair of a small Hermitian
//! PSD matrix (the weighted Gram matrix `H W Hᴴ`), so the kernel is built
//! around a power iteration rather than a full SVD. The Hermitian square root
//! used for correlated channel sampling is backed by nalgebra's Hermitian
//! eigensolver.

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Eigenvalues of a covariance in `[-PSD_CLIP, 0)` are clipped to zero.
pub const PSD_CLIP: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Dense complex matrix stored in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    /// All-zero matrix. Panics if either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch(format!(
                "matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    /// Stacks equally long column vectors side by side.
    pub fn from_columns(columns: &[Vec<Complex64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch("columns of unequal length".into()));
        }
        let mut data = vec![ZERO; rows * cols];
        for (c, col) in columns.iter().enumerate() {
            for (r, z) in col.iter().enumerate() {
                data[r * cols + c] = *z;
            }
        }
        Self::from_row_major(rows, cols, data)
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(*d, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_row_major(&self) -> &[Complex64] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn set_column(&mut self, c: usize, values: &[Complex64]) {
        assert_eq!(values.len(), self.rows);
        for (r, z) in values.iter().enumerate() {
            self[(r, c)] = *z;
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == ZERO {
                    continue;
                }
                for c in 0..rhs.cols {
                    out.data[r * rhs.cols + c] += a * rhs[(k, c)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// `M Mᴴ`.
    pub fn gram(&self) -> Self {
        let mut g = Self::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            let ri = &self.data[i * self.cols..(i + 1) * self.cols];
            for j in i..self.rows {
                let rj = &self.data[j * self.cols..(j + 1) * self.cols];
                let s: Complex64 = ri.iter().zip(rj).map(|(a, b)| a * b.conj()).sum();
                g[(i, j)] = s;
                g[(j, i)] = s.conj();
            }
        }
        g
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest `|M_ij - conj(M_ji)|`; zero for exactly Hermitian matrices.
    pub fn hermitian_asymmetry(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    fn from_nalgebra(m: &DMatrix<Complex64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// `aᴴ b`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Returns `v / ‖v‖`, or `None` for the zero vector.
pub fn normalized(v: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = norm(v);
    (n > 0.0 && n.is_finite()).then(|| v.iter().map(|z| z / n).collect())
}

/// Leading eigenvector and eigenvalue of `M Mᴴ`, i.e. the dominant left
/// singular vector of `M` and its squared singular value.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularPair {
    pub vector: Vec<Complex64>,
    pub value: f64,
}

/// Dominant left singular pair of `m` by power iteration on `M Mᴴ`.
pub fn leading_left_singular_pair(m: &ComplexMatrix, tol: f64, max_iter: usize) -> Result<SingularPair> {
    dominant_eigenpair(&m.gram(), tol, max_iter)
}

/// Dominant eigenpair of a Hermitian PSD matrix.
///
/// Starts from a deterministic vector (the heaviest column, perturbed by a
/// fixed generic direction so it cannot be orthogonal to the top eigenspace
/// by structure) and stops once the Rayleigh quotient changes by less than
/// `tol` relative to its value.
pub fn dominant_eigenpair(g: &ComplexMatrix, tol: f64, max_iter: usize) -> Result<SingularPair> {
    if g.rows() != g.cols() {
        return Err(Error::DimensionMismatch("eigenpair needs a square matrix".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let n = g.rows();
    let (heaviest, weight) = (0..n)
        .map(|i| (i, g[(i, i)].re))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    if !(weight > 0.0) {
        return Err(Error::Degenerate("zero matrix has no dominant singular pair"));
    }

    let col = g.column(heaviest);
    let scale = 1e-3 * norm(&col);
    let start: Vec<Complex64> = col
        .iter()
        .enumerate()
        .map(|(i, z)| z + Complex64::from_polar(scale * (1.0 + 0.1 * i as f64), 0.7 + 1.3 * i as f64))
        .collect();
    let mut v = normalized(&start).ok_or(Error::Degenerate("zero start vector"))?;

    let mut gv = g.mul_vec(&v);
    let mut rho = inner(&v, &gv).re;
    for _ in 0..max_iter {
        v = normalized(&gv).ok_or(Error::Degenerate("iterate fell into the null space"))?;
        gv = g.mul_vec(&v);
        let next = inner(&v, &gv).re;
        let change = (next - rho).abs();
        rho = next;
        if change <= tol * rho.abs() {
            return Ok(SingularPair { vector: v, value: rho.max(0.0) });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        vector: v,
        value: rho,
    })
}

/// Hermitian square root `B` with `B Bᴴ = R` for a PSD `R`.
///
/// Eigenvalues in `[-1e-9, 0)` are treated as round-off and clipped to zero;
/// anything more negative is rejected.
pub fn hermitian_sqrt(r: &ComplexMatrix) -> Result<ComplexMatrix> {
    let scale = r.as_row_major().iter().map(|z| z.norm()).fold(1.0f64, f64::max);
    let asymmetry = r.hermitian_asymmetry();
    if asymmetry > 1e-10 * scale {
        return Err(Error::NotHermitian { asymmetry });
    }
    let eig = r.to_nalgebra().symmetric_eigen();
    if let Some(&worst) = eig.eigenvalues.iter().find(|&&l| l < -PSD_CLIP) {
        return Err(Error::NotPositiveSemidefinite { eigenvalue: worst });
    }
    let u = &eig.eigenvectors;
    let n = r.rows();
    let roots: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    let mut b = DMatrix::<Complex64>::zeros(n, n);
    for (k, s) in roots.iter().enumerate() {
        if *s == 0.0 {
            continue;
        }
        for i in 0..n {
            let uik = u[(i, k)] * *s;
            for j in 0..n {
                b[(i, j)] += uik * u[(j, k)].conj();
            }
        }
    }
    Ok(ComplexMatrix::from_nalgebra(&b))
}

/// Circularly-symmetric complex Gaussian sample with `E|z|² = variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Uniformly distributed point on the unit sphere of `ℂⁿ`.
pub fn random_unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Complex64> {
    assert!(n >= 1, "dimension must be positive");
    loop {
        let v: Vec<Complex64> = (0..n).map(|_| complex_gaussian(rng, 1.0)).collect();
        if let Some(u) = normalized(&v) {
            return u;
        }
    }
}
