//! Dense complex matrices and the handful of decompositions the optimizer needs.
//!
//! Everything here is double precision and row-major. Dimensions in this
//! domain stay small (d ≤ 64), so the dense O(d³) routines are the right tool.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

use crate::error::{QmtError, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4e}{:+.4e}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting wrong lengths and
    /// non-finite values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(QmtError::Dimension(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QmtError::Numeric(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &x) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(x, 0.0);
        }
        m
    }

    /// Outer product |v⟩⟨v|.
    pub fn projector(v: &[C64]) -> Self {
        Self::from_fn(v.len(), v.len(), |r, c| v[r] * v[c].conj())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: C64, other: &CMatrix) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// ‖A − A†‖∞ (max entry modulus).
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// (A + A†)/2
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |r, c| {
            (self[(r, c)] + self[(c, r)].conj()) * 0.5
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn matmul(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.cols != rhs.rows {
            return Err(QmtError::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(self.mul_unchecked(rhs))
    }

    pub(crate) fn mul_unchecked(&self, rhs: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        let n = rhs.cols;
        for r in 0..self.rows {
            let out_row = &mut out.data[r * n..(r + 1) * n];
            for (k, &a) in self.row(r).iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// A† B without materializing A†.
    pub fn adjoint_mul(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.rows != rhs.rows {
            return Err(QmtError::Dimension(format!(
                "cannot form A†B for A {}x{} and B {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = CMatrix::zeros(self.cols, rhs.cols);
        let n = rhs.cols;
        for k in 0..self.rows {
            let b_row = rhs.row(k);
            for (r, &a) in self.row(k).iter().enumerate() {
                let a = a.conj();
                if a == ZERO {
                    continue;
                }
                let out_row = &mut out.data[r * n..(r + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(QmtError::Dimension(format!(
                "cannot apply {}x{} matrix to vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect())
    }

    /// Copies rows `start..start+count` into a new matrix.
    pub fn row_block(&self, start: usize, count: usize) -> CMatrix {
        CMatrix {
            rows: count,
            cols: self.cols,
            data: self.data[start * self.cols..(start + count) * self.cols].to_vec(),
        }
    }

    /// Stacks matrices vertically; all must share a column count.
    pub fn vstack(blocks: &[CMatrix]) -> Result<CMatrix> {
        let cols = blocks.first().map_or(0, |b| b.cols);
        if blocks.iter().any(|b| b.cols != cols) {
            return Err(QmtError::Dimension("vstack: column counts differ".into()));
        }
        let rows = blocks.iter().map(|b| b.rows).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for b in blocks {
            data.extend_from_slice(&b.data);
        }
        Ok(CMatrix { rows, cols, data })
    }

    /// Places matrices side by side; all must share a row count.
    pub fn hstack(blocks: &[&CMatrix]) -> Result<CMatrix> {
        let rows = blocks.first().map_or(0, |b| b.rows);
        if blocks.iter().any(|b| b.rows != rows) {
            return Err(QmtError::Dimension("hstack: row counts differ".into()));
        }
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut out = CMatrix::zeros(rows, cols);
        let mut offset = 0;
        for b in blocks {
            for r in 0..rows {
                out.data[r * cols + offset..r * cols + offset + b.cols].copy_from_slice(b.row(r));
            }
            offset += b.cols;
        }
        Ok(out)
    }

    fn check_same_shape(&self, other: &CMatrix, what: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(QmtError::Dimension(format!(
                "{what}: shapes {:?} and {:?} differ",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    pub fn try_sub(&self, other: &CMatrix) -> Result<CMatrix> {
        self.check_same_shape(other, "subtraction")?;
        Ok(self - other)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl<'a> Add<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix addition shape mismatch");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<'a> Sub<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix subtraction shape mismatch");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<'a> Mul<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product shape mismatch");
        self.mul_unchecked(rhs)
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.scale_real(-1.0)
    }
}

impl AddAssign<&CMatrix> for CMatrix {
    fn add_assign(&mut self, rhs: &CMatrix) {
        assert_eq!(self.shape(), rhs.shape(), "matrix addition shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&CMatrix> for CMatrix {
    fn sub_assign(&mut self, rhs: &CMatrix) {
        assert_eq!(self.shape(), rhs.shape(), "matrix subtraction shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

/// Spectrum and eigenvectors of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the eigenvector for `eigenvalues[i]`.
    pub eigenvectors: CMatrix,
}

impl EigenDecomposition {
    /// V f(Λ) V† for a real function of the spectrum.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let v = &self.eigenvectors;
        let n = v.rows();
        let fl: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = CMatrix::zeros(n, n);
        for r in 0..n {
            for c in r..n {
                let mut acc = ZERO;
                for (k, &w) in fl.iter().enumerate() {
                    acc += v[(r, k)] * v[(c, k)].conj() * w;
                }
                out[(r, c)] = acc;
                if r != c {
                    out[(c, r)] = acc.conj();
                }
            }
        }
        for i in 0..n {
            out[(i, i)].im = 0.0;
        }
        out
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.apply_fn(|l| l)
    }
}

const MAX_QL_SWEEPS: usize = 60;

/// Eigendecomposition of a Hermitian matrix.
///
/// The input is symmetrized as (H + H†)/2 first, then reduced to a real
/// symmetric tridiagonal form by Householder reflections and a diagonal phase
/// change, and finally diagonalized with implicit-shift QL.
pub fn herm_eig(h: &CMatrix) -> Result<EigenDecomposition> {
    if !h.is_square() {
        return Err(QmtError::Dimension(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            h.rows(),
            h.cols()
        )));
    }
    let n = h.rows();
    if n == 0 {
        return Ok(EigenDecomposition {
            eigenvalues: vec![],
            eigenvectors: CMatrix::zeros(0, 0),
        });
    }
    let mut a = h.hermitian_part();
    let mut q = CMatrix::identity(n);

    // Householder reduction: column k is zeroed below the subdiagonal.
    let mut v = vec![ZERO; n];
    let mut p = vec![ZERO; n];
    for k in 0..n.saturating_sub(2) {
        let norm_x = (k + 1..n).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        let tail = (k + 2..n).map(|i| a[(i, k)].norm_sqr()).sum::<f64>();
        if tail == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { ONE };
        let alpha = -phase * norm_x;
        for i in 0..n {
            v[i] = if i <= k { ZERO } else { a[(i, k)] };
        }
        v[k + 1] -= alpha;
        let vnorm_sq: f64 = v[k + 1..].iter().map(|z| z.norm_sqr()).sum();
        if vnorm_sq == 0.0 {
            continue;
        }
        let tau = 2.0 / vnorm_sq;
        // p = τ A v over the trailing block (rows/cols k+1..n)
        for i in k + 1..n {
            let mut acc = ZERO;
            for j in k + 1..n {
                acc += a[(i, j)] * v[j];
            }
            p[i] = acc * tau;
        }
        let vp: C64 = (k + 1..n).map(|i| v[i].conj() * p[i]).sum();
        let half = vp * (0.5 * tau);
        for i in k + 1..n {
            p[i] -= half * v[i];
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let upd = v[i] * p[j].conj() + p[i] * v[j].conj();
                a[(i, j)] -= upd;
            }
        }
        a[(k + 1, k)] = alpha;
        a[(k, k + 1)] = alpha.conj();
        for i in k + 2..n {
            a[(i, k)] = ZERO;
            a[(k, i)] = ZERO;
        }
        // Q ← Q H with H = I − τ v v†
        for r in 0..n {
            let qv: C64 = (k + 1..n).map(|j| q[(r, j)] * v[j]).sum::<C64>() * tau;
            for j in k + 1..n {
                let upd = qv * v[j].conj();
                q[(r, j)] -= upd;
            }
        }
    }

    // Diagonal phase change making the subdiagonal real and non-negative.
    let mut diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    let mut off = vec![0.0; n];
    let mut phases = vec![ONE; n];
    for i in 0..n - 1 {
        let e = a[(i + 1, i)];
        let mag = e.norm();
        off[i + 1] = mag;
        phases[i + 1] = if mag > 0.0 { phases[i] * (e / mag) } else { phases[i] };
    }

    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    tql2(&mut diag, &mut off, &mut z, n)?;

    // V = Q · D · Z
    let mut qd = q;
    for r in 0..n {
        for c in 0..n {
            qd[(r, c)] *= phases[c];
        }
    }
    let mut vecs = CMatrix::zeros(n, n);
    for r in 0..n {
        for k in 0..n {
            let a_rk = qd[(r, k)];
            if a_rk == ZERO {
                continue;
            }
            for c in 0..n {
                vecs[(r, c)] += a_rk * z[k * n + c];
            }
        }
    }
    Ok(EigenDecomposition {
        eigenvalues: diag,
        eigenvectors: vecs,
    })
}

/// Implicit QL on a real symmetric tridiagonal matrix. `e[i]` couples rows
/// i−1 and i (e[0] unused). Eigenvalues land in `d` sorted ascending with
/// the matching columns of `z`.
fn tql2(d: &mut [f64], e: &mut [f64], z: &mut [f64], n: usize) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_SWEEPS {
                    return Err(QmtError::Numeric(format!(
                        "Hermitian eigensolver did not converge for eigenvalue {l} after {MAX_QL_SWEEPS} iterations"
                    )));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let zk1 = z[k * n + i + 1];
                        let zk = z[k * n + i];
                        z[k * n + i + 1] = s * zk + c * zk1;
                        z[k * n + i] = c * zk - s * zk1;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // selection sort, ascending
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for r in 0..n {
                z.swap(r * n + i, r * n + k);
            }
        }
    }
    Ok(())
}

/// V diag(1/√max(λ, δ)) V†.
///
/// Clipping the spectrum at `delta` keeps zero or slightly negative
/// eigenvalues from blowing up.
pub fn inv_sqrt_psd(s: &CMatrix, delta: f64) -> Result<CMatrix> {
    if !(delta > 0.0) {
        return Err(QmtError::InvalidArgument(format!(
            "clip threshold must be positive, got {delta}"
        )));
    }
    let eig = herm_eig(s)?;
    Ok(eig.apply_fn(|l| 1.0 / l.max(delta).sqrt()))
}

pub fn kron_product(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    CMatrix::from_fn(ra * rb, ca * cb, |r, c| {
        a[(r / rb, c / cb)] * b[(r % rb, c % cb)]
    })
}

pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect()
}

/// Tr(AB) as Σ_mn A_mn B_nm, never forming AB.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Result<C64> {
    if a.cols() != b.rows() || a.rows() != b.cols() {
        return Err(QmtError::Dimension(format!(
            "trace of product needs A m×n and B n×m, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(trace_product_unchecked(a, b))
}

#[inline]
pub(crate) fn trace_product_unchecked(a: &CMatrix, b: &CMatrix) -> C64 {
    let mut acc = ZERO;
    let n = a.cols();
    for m in 0..a.rows() {
        let row = a.row(m);
        for (k, &x) in row.iter().enumerate().take(n) {
            acc += x * b.as_slice()[k * b.cols() + m];
        }
    }
    acc
}

/// Real part of Tr(AB) for Hermitian A and B of equal size.
#[inline]
pub(crate) fn trace_product_hermitian(a: &CMatrix, b: &CMatrix) -> f64 {
    // Tr(AB) = Σ_mn A_mn B_nm = Σ_mn A_mn conj(B_mn) for Hermitian B.
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

/// Solves `A X = B` by LU with partial pivoting.
pub fn lu_solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() || a.rows() != b.rows() {
        return Err(QmtError::Dimension(format!(
            "cannot solve system with A {:?} and B {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let n = a.rows();
    let mut lu = a.clone();
    let mut x = b.clone();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let mut max_pivot = 0.0f64;
    let mut min_pivot = f64::INFINITY;
    for k in 0..n {
        let (piv, piv_mag) = (k..n)
            .map(|r| (r, lu[(r, k)].norm()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        max_pivot = max_pivot.max(piv_mag);
        min_pivot = min_pivot.min(piv_mag);
        if piv_mag <= scale * 1e-14 {
            return Err(QmtError::Numeric(format!(
                "singular system in LU solve at column {k} (condition estimate {:.3e})",
                if piv_mag > 0.0 { max_pivot / piv_mag } else { f64::INFINITY }
            )));
        }
        if piv != k {
            for c in 0..n {
                lu.as_mut_slice().swap(piv * n + c, k * n + c);
            }
            let xc = x.cols();
            for c in 0..xc {
                x.as_mut_slice().swap(piv * xc + c, k * xc + c);
            }
        }
        let pivot = lu[(k, k)];
        for r in k + 1..n {
            let factor = lu[(r, k)] / pivot;
            if factor == ZERO {
                continue;
            }
            lu[(r, k)] = factor;
            for c in k + 1..n {
                let u = lu[(k, c)];
                lu[(r, c)] -= factor * u;
            }
            for c in 0..x.cols() {
                let xk = x[(k, c)];
                x[(r, c)] -= factor * xk;
            }
        }
    }
    for c in 0..x.cols() {
        for r in (0..n).rev() {
            let mut acc = x[(r, c)];
            for j in r + 1..n {
                acc -= lu[(r, j)] * x[(j, c)];
            }
            x[(r, c)] = acc / lu[(r, r)];
        }
    }
    let _ = min_pivot;
    Ok(x)
}

/// Orthonormalizes the columns of a tall matrix (modified Gram–Schmidt,
/// two passes).
pub fn orthonormalize_columns(m: &CMatrix) -> Result<CMatrix> {
    let (rows, cols) = m.shape();
    if cols > rows {
        return Err(QmtError::Dimension(format!(
            "cannot orthonormalize {cols} columns in dimension {rows}"
        )));
    }
    let mut q = m.clone();
    for j in 0..cols {
        for _ in 0..2 {
            for i in 0..j {
                let proj: C64 = (0..rows).map(|r| q[(r, i)].conj() * q[(r, j)]).sum();
                for r in 0..rows {
                    let qi = q[(r, i)];
                    q[(r, j)] -= proj * qi;
                }
            }
        }
        let norm = (0..rows).map(|r| q[(r, j)].norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return Err(QmtError::Numeric(format!(
                "column {j} is linearly dependent during orthonormalization"
            )));
        }
        for r in 0..rows {
            q[(r, j)] /= norm;
        }
    }
    Ok(q)
}
