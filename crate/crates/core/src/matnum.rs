//! Small dense linear algebra kernel.
//!
//! Everything here is sized for desk-scale control problems (a handful of
//! states), so the algorithms favour directness over asymptotic cost: the
//! matrix exponential is a scaled Taylor series, the Lyapunov equation is
//! solved through its vectorized linear system, and symmetric eigenvalues
//! come from cyclic Jacobi rotations.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from nested rows. An empty outer list is a 0x0 matrix.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Matrix::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn column(v: &[f64]) -> Self {
        Matrix {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn diag(v: &[f64]) -> Self {
        let mut m = Matrix::zeros(v.len(), v.len());
        for (i, &x) in v.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, k: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * k).collect(),
        }
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        Ok(out)
    }

    /// `self · v`.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.rows];
        self.mul_vec_acc(v, 1.0, &mut out)?;
        Ok(out)
    }

    /// `out += alpha · self · v` without allocating.
    pub fn mul_vec_acc(&self, v: &[f64], alpha: f64, out: &mut [f64]) -> Result<()> {
        if self.cols != v.len() || self.rows != out.len() {
            return Err(Error::Dimension(format!(
                "{}x{} matrix applied to vector of length {} into {}",
                self.rows,
                self.cols,
                v.len(),
                out.len()
            )));
        }
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            *o += alpha * row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(())
    }

    pub fn hstack(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.rows != rhs.rows {
            return Err(Error::Dimension("hstack row counts differ".into()));
        }
        let mut out = Matrix::zeros(self.rows, self.cols + rhs.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self[(i, j)];
            }
            for j in 0..rhs.cols {
                out[(i, self.cols + j)] = rhs[(i, j)];
            }
        }
        Ok(out)
    }

    pub fn vstack(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.cols {
            return Err(Error::Dimension("vstack column counts differ".into()));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&rhs.data);
        Matrix::from_row_major(self.rows + rhs.rows, self.cols, data)
    }

    /// Assembles `[[a, b], [c, d]]`.
    pub fn block2(a: &Matrix, b: &Matrix, c: &Matrix, d: &Matrix) -> Result<Matrix> {
        a.hstack(b)?.vstack(&c.hstack(d)?)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Induced 1-norm (max column sum).
    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Spectral norm, the largest singular value.
    pub fn norm_2(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        // eigenvalues of the smaller Gram matrix
        let gram = if self.rows < self.cols {
            self.matmul(&self.transpose())
        } else {
            self.transpose().matmul(self)
        }
        .expect("gram dimensions");
        symmetric_eigenvalues(&gram)
            .into_iter()
            .fold(0.0, f64::max)
            .max(0.0)
            .sqrt()
    }

    fn check_finite(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::from_rows(&rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.to_rows()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix{}x{}{:?}", self.rows, self.cols, self.to_rows())
    }
}

fn zip_same(a: &Matrix, b: &Matrix, op: impl Fn(f64, f64) -> f64) -> Matrix {
    assert_eq!(a.shape(), b.shape(), "elementwise op on mismatched shapes");
    Matrix {
        rows: a.rows,
        cols: a.cols,
        data: a.data.iter().zip(&b.data).map(|(x, y)| op(*x, *y)).collect(),
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        zip_same(self, rhs, |a, b| a + b)
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        zip_same(self, rhs, |a, b| a - b)
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    /// Panics on mismatched inner dimensions; use [`Matrix::matmul`] for a
    /// fallible product.
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs).expect("matrix product dimensions")
    }
}

/// Euclidean norm of a vector.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `e^{M t}` by scaling and squaring a truncated Taylor series.
pub fn mat_exp(m: &Matrix, t: f64) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "matrix exponential of non-square {}x{}",
            m.rows, m.cols
        )));
    }
    m.check_finite("matrix exponential argument")?;
    if !t.is_finite() {
        return Err(Error::NonFinite("matrix exponential time"));
    }
    let n = m.rows;
    let a = m.scale(t);
    let norm = a.norm_1();
    // scale until the series argument has 1-norm at most 1/2
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let a = a.scale(0.5f64.powi(squarings));

    let mut sum = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=60 {
        term = (&term * &a).scale(1.0 / k as f64);
        sum = &sum + &term;
        if term.norm_1() <= 1e-16 * sum.norm_1() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum.check_finite("matrix exponential result")?;
    Ok(sum)
}

/// Solves `A x = b` for square `A` by Gaussian elimination with partial
/// pivoting. `b` may hold several right-hand-side columns.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !a.is_square() || a.rows != b.rows {
        return Err(Error::Dimension(format!(
            "solve with {}x{} system and {}x{} rhs",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let n = a.rows;
    let mut m = a.clone();
    let mut x = b.clone();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))
            .expect("non-empty pivot range");
        if m[(pivot, col)].abs() <= 1e-13 * scale {
            return Err(Error::Singular(format!("pivot {col} vanishes")));
        }
        if pivot != col {
            swap_rows(&mut m, pivot, col);
            swap_rows(&mut x, pivot, col);
        }
        let p = m[(col, col)];
        for r in col + 1..n {
            let f = m[(r, col)] / p;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                m[(r, c)] -= f * m[(col, c)];
            }
            for c in 0..x.cols {
                x[(r, c)] -= f * x[(col, c)];
            }
        }
    }
    for col in (0..n).rev() {
        for c in 0..x.cols {
            let mut acc = x[(col, c)];
            for k in col + 1..n {
                acc -= m[(col, k)] * x[(k, c)];
            }
            x[(col, c)] = acc / m[(col, col)];
        }
    }
    Ok(x)
}

fn swap_rows(m: &mut Matrix, a: usize, b: usize) {
    for c in 0..m.cols {
        m.data.swap(a * m.cols + c, b * m.cols + c);
    }
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    solve(a, &Matrix::identity(a.rows))
}

/// Numerical rank by row echelon reduction with a relative tolerance.
pub fn rank(a: &Matrix) -> usize {
    let mut m = a.clone();
    let tol = 1e-10 * a.max_abs().max(f64::MIN_POSITIVE);
    let mut rank = 0;
    for col in 0..m.cols {
        if rank == m.rows {
            break;
        }
        let pivot = (rank..m.rows)
            .max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))
            .expect("non-empty");
        if m[(pivot, col)].abs() <= tol {
            continue;
        }
        swap_rows(&mut m, pivot, rank);
        for r in rank + 1..m.rows {
            let f = m[(r, col)] / m[(rank, col)];
            for c in col..m.cols {
                m[(r, c)] -= f * m[(rank, c)];
            }
        }
        rank += 1;
    }
    rank
}

/// Left Moore-Penrose pseudo-inverse `(BᵀB)⁻¹Bᵀ` of a full column rank `B`.
pub fn pseudo_inverse(b: &Matrix) -> Result<Matrix> {
    b.check_finite("pseudo-inverse argument")?;
    if rank(b) < b.cols {
        return Err(Error::Singular(format!(
            "{}x{} matrix lacks full column rank",
            b.rows, b.cols
        )));
    }
    let bt = b.transpose();
    solve(&(&bt * b), &bt)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(a: &Matrix) -> Vec<f64> {
    assert!(a.is_square(), "symmetric eigenvalues of non-square matrix");
    let n = a.rows;
    let mut m = a.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off <= 1e-30 * m.norm_fro().powi(2).max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Cholesky test for positive definiteness of a symmetric matrix.
pub fn is_positive_definite(a: &Matrix) -> bool {
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    true
}

/// Solves `P A + Aᵀ P = −I` for the symmetric positive definite `P`.
///
/// A Hurwitz `A` is detected by the outcome: the vectorized system must be
/// nonsingular and its solution positive definite.
pub fn solve_lyapunov(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::Dimension("Lyapunov equation needs a square matrix".into()));
    }
    a.check_finite("Lyapunov argument")?;
    let n = a.rows;
    let idx = |i: usize, j: usize| i * n + j;
    let mut sys = Matrix::zeros(n * n, n * n);
    let mut rhs = Matrix::zeros(n * n, 1);
    for i in 0..n {
        for j in 0..n {
            let row = idx(i, j);
            for k in 0..n {
                // (P A)_ij = Σ_k P_ik A_kj,  (Aᵀ P)_ij = Σ_k A_ki P_kj
                sys[(row, idx(i, k))] += a[(k, j)];
                sys[(row, idx(k, j))] += a[(k, i)];
            }
            if i == j {
                rhs[(row, 0)] = -1.0;
            }
        }
    }
    let vec_p = solve(&sys, &rhs).map_err(|_| Error::NotHurwitz)?;
    let p = Matrix::from_row_major(n, n, vec_p.into_vec())?;
    let p = (&p + &p.transpose()).scale(0.5);
    if !is_positive_definite(&p) {
        return Err(Error::NotHurwitz);
    }
    Ok(p)
}

/// Characteristic polynomial coefficients `[1, c1, ..., cn]` of
/// `det(λI − A)` by the Faddeev-LeVerrier recursion.
pub fn char_poly(a: &Matrix) -> Vec<f64> {
    let n = a.rows;
    let mut coeffs = vec![1.0];
    let mut m = Matrix::zeros(n, n);
    let id = Matrix::identity(n);
    for k in 1..=n {
        let c_prev = *coeffs.last().expect("non-empty");
        m = &(a * &m) + &id.scale(c_prev);
        let am = a * &m;
        let trace: f64 = (0..n).map(|i| am[(i, i)]).sum();
        coeffs.push(-trace / k as f64);
    }
    coeffs
}

/// Coefficients of `Π (λ − r_i)` for real roots, leading 1 first.
pub fn poly_from_roots(roots: &[f64]) -> Vec<f64> {
    let mut c = vec![1.0];
    for &r in roots {
        let mut next = vec![0.0; c.len() + 1];
        for (i, &ci) in c.iter().enumerate() {
            next[i] += ci;
            next[i + 1] -= r * ci;
        }
        c = next;
    }
    c
}
