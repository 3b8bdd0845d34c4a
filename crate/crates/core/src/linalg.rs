//! Dense complex linear algebra on Hermitian operators.
//!
//! Multi-system operators use A-major index order: for a split `(d_A, d_B)`
//! the basis ket `|a⟩⊗|b⟩` sits at index `a·d_B + b`. The general helpers
//! ([`kron`], [`partial_trace_systems`], [`permute_systems`]) extend this to
//! any number of tensor factors, the first factor being most significant.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Largest asymmetry tolerated when an operator is built from external data.
pub const HERMITIAN_INPUT_TOL: f64 = 1e-9;
/// Eigenvalues above `-PSD_CLAMP` count as nonnegative.
pub const PSD_CLAMP: f64 = 1e-9;
/// Relative cutoff (times `λ_max`) used for ranks, supports and pseudo-inverses.
pub const RANK_CUTOFF: f64 = 1e-12;

const EIGEN_SWEEP_FACTOR: usize = 1000;

/// A dense Hermitian matrix. Hermiticity is exact: constructors symmetrize.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    m: CMatrix,
}

/// Which factor of a bipartite split to keep in a partial trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Spectral functions understood by [`matrix_function`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFunction {
    Sqrt,
    /// Pseudo-inverse square root; eigenvalues below `RANK_CUTOFF·λ_max` map to zero.
    PinvSqrt,
    Abs,
}

/// Eigenvalues in descending order with matching orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl SpectralDecomposition {
    pub fn reconstruct(&self) -> HermitianOperator {
        self.map(|x| x)
    }

    /// `V·diag(f(λ))·V†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> HermitianOperator {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &v) in self.values.iter().enumerate() {
            let fv = f(v);
            for i in 0..n {
                scaled[(i, j)] *= fv;
            }
        }
        HermitianOperator::hermitian_part(&scaled * self.vectors.adjoint())
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }

    pub fn min(&self) -> f64 {
        *self.values.last().expect("nonempty spectrum")
    }
}

impl HermitianOperator {
    /// Validates squareness and Hermiticity (to [`HERMITIAN_INPUT_TOL`]), then symmetrizes.
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidState("operator dimension must be at least 1".into()));
        }
        let asym = max_asymmetry(&m);
        if asym > HERMITIAN_INPUT_TOL {
            return Err(Error::NotHermitian(asym));
        }
        Ok(Self::hermitian_part(m))
    }

    /// `(m + m†)/2` without any tolerance check. Panics if `m` is not square.
    pub fn hermitian_part(m: CMatrix) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "hermitian_part needs a square matrix");
        let n = m.nrows();
        let mut h = m;
        for i in 0..n {
            h[(i, i)] = Complex64::new(h[(i, i)].re, 0.0);
            for j in (i + 1)..n {
                let avg = (h[(i, j)] + h[(j, i)].conj()) * 0.5;
                h[(i, j)] = avg;
                h[(j, i)] = avg.conj();
            }
        }
        Self { m: h }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: CMatrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            m: CMatrix::zeros(n, n),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        Self { m }
    }

    /// Builds from rows of real entries (symmetric input expected).
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotSquare { rows: n, cols: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = Complex64::new(v, 0.0);
            }
        }
        Self::new(m)
    }

    /// The rank-one projector `|v⟩⟨v|` (no normalization applied).
    pub fn projector(v: &CVector) -> Self {
        Self::hermitian_part(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.m[(i, i)].re).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            m: self.m.map(|z| z * s),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            m: &self.m + &other.m,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            m: &self.m - &other.m,
        }
    }

    /// `k·H·k†` for an arbitrary (not necessarily square) matrix `k`.
    pub fn conjugate_by(&self, k: &CMatrix) -> Self {
        Self::hermitian_part(k * &self.m * k.adjoint())
    }

    /// Hilbert–Schmidt inner product `tr(self·other)`, real for Hermitian pairs.
    pub fn inner(&self, other: &Self) -> f64 {
        hs_inner(&self.m, &other.m)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        max_abs_entry(&(&self.m - &other.m))
    }

    pub fn eig(&self) -> Result<SpectralDecomposition> {
        eig_hermitian(self)
    }

    pub fn lambda_max(&self) -> Result<f64> {
        Ok(self.eig()?.max())
    }

    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        Ok(self.eig()?.min() >= -tol)
    }
}

/// Real part of `tr(a·b)`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..a.ncols() {
            let x = a[(i, k)];
            let y = b[(k, i)];
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

pub fn max_abs_entry(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn max_asymmetry(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Kronecker product with the first argument most significant.
pub fn kron(x: &CMatrix, y: &CMatrix) -> CMatrix {
    x.kronecker(y)
}

/// `x ⊗ y` for Hermitian factors.
pub fn tensor_product(x: &HermitianOperator, y: &HermitianOperator) -> HermitianOperator {
    HermitianOperator::hermitian_part(kron(&x.m, &y.m))
}

fn digits(mut index: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = index % dims[k];
        index /= dims[k];
    }
}

/// Traces out every factor whose `keep` flag is false.
pub fn partial_trace_systems(m: &CMatrix, dims: &[usize], keep: &[bool]) -> Result<CMatrix> {
    let total: usize = dims.iter().product();
    if m.nrows() != total || m.ncols() != total {
        return Err(Error::DimensionMismatch {
            expected: total,
            got: m.nrows(),
        });
    }
    if keep.len() != dims.len() {
        return Err(Error::DimensionMismatch {
            expected: dims.len(),
            got: keep.len(),
        });
    }
    let kept_dims: Vec<usize> = dims
        .iter()
        .zip(keep)
        .filter(|(_, &k)| k)
        .map(|(&d, _)| d)
        .collect();
    let out_dim: usize = kept_dims.iter().product();
    let mut out = CMatrix::zeros(out_dim, out_dim);
    let mut di = vec![0; dims.len()];
    let mut dj = vec![0; dims.len()];
    for i in 0..total {
        digits(i, dims, &mut di);
        let mut oi = 0;
        for k in 0..dims.len() {
            if keep[k] {
                oi = oi * dims[k] + di[k];
            }
        }
        for j in 0..total {
            digits(j, dims, &mut dj);
            let mut same = true;
            let mut oj = 0;
            for k in 0..dims.len() {
                if keep[k] {
                    oj = oj * dims[k] + dj[k];
                } else if di[k] != dj[k] {
                    same = false;
                    break;
                }
            }
            if same {
                out[(oi, oj)] += m[(i, j)];
            }
        }
    }
    Ok(out)
}

/// `tr_B(m)` when `keep = A`, `tr_A(m)` when `keep = B`.
pub fn partial_trace(
    m: &HermitianOperator,
    d_a: usize,
    d_b: usize,
    keep: Subsystem,
) -> Result<HermitianOperator> {
    let mask = match keep {
        Subsystem::A => [true, false],
        Subsystem::B => [false, true],
    };
    partial_trace_systems(&m.m, &[d_a, d_b], &mask).map(HermitianOperator::hermitian_part)
}

/// Reorders tensor factors: factor `k` of the output is factor `perm[k]` of the input.
pub fn permute_systems(m: &CMatrix, dims: &[usize], perm: &[usize]) -> Result<CMatrix> {
    let total: usize = dims.iter().product();
    if m.nrows() != total || perm.len() != dims.len() {
        return Err(Error::DimensionMismatch {
            expected: total,
            got: m.nrows(),
        });
    }
    let mut seen = vec![false; dims.len()];
    for &p in perm {
        if p >= dims.len() || seen[p] {
            return Err(Error::InvalidProblem(format!("{perm:?} is not a permutation")));
        }
        seen[p] = true;
    }
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let map_index = |old: usize, buf: &mut [usize]| {
        digits(old, dims, buf);
        perm.iter()
            .zip(&new_dims)
            .fold(0, |acc, (&p, &d)| acc * d + buf[p])
    };
    let mut buf = vec![0; dims.len()];
    let new_index: Vec<usize> = (0..total).map(|i| map_index(i, &mut buf)).collect();
    let mut out = CMatrix::zeros(total, total);
    for i in 0..total {
        for j in 0..total {
            out[(new_index[i], new_index[j])] = m[(i, j)];
        }
    }
    Ok(out)
}

/// Hermitian eigendecomposition, eigenvalues descending.
pub fn eig_hermitian(m: &HermitianOperator) -> Result<SpectralDecomposition> {
    let n = m.dim();
    let eig = nalgebra::SymmetricEigen::try_new(m.m.clone(), f64::EPSILON, EIGEN_SWEEP_FACTOR * n.max(1))
        .ok_or(Error::EigenNonConvergence(n))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SpectralDecomposition { values, vectors })
}

pub fn matrix_function(m: &HermitianOperator, f: MatrixFunction) -> Result<HermitianOperator> {
    let eig = m.eig()?;
    Ok(match f {
        MatrixFunction::Sqrt => eig.map(|x| x.max(0.0).sqrt()),
        MatrixFunction::Abs => eig.map(f64::abs),
        MatrixFunction::PinvSqrt => {
            let cutoff = RANK_CUTOFF * eig.max().max(0.0);
            eig.map(|x| if x > cutoff && x > 0.0 { 1.0 / x.sqrt() } else { 0.0 })
        }
    })
}

/// Schatten 1-norm: sum of absolute eigenvalues.
pub fn trace_norm(m: &HermitianOperator) -> Result<f64> {
    Ok(m.eig()?.values.iter().map(|x| x.abs()).sum())
}

/// Orthonormal basis of the eigenspaces with eigenvalue above `RANK_CUTOFF·λ_max`,
/// returned as `(eigenvalues, columns)`.
pub fn support(m: &HermitianOperator) -> Result<(Vec<f64>, CMatrix)> {
    let eig = m.eig()?;
    let cutoff = RANK_CUTOFF * eig.max().max(0.0);
    let rank = eig.values.iter().filter(|&&x| x > cutoff && x > 0.0).count();
    Ok((
        eig.values[..rank].to_vec(),
        eig.vectors.columns(0, rank).into_owned(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample_hermitian(n: usize, salt: f64) -> HermitianOperator {
        let m = CMatrix::from_fn(n, n, |i, j| {
            let t = (i * 7 + j * 3) as f64 + salt;
            c(t.sin(), (1.3 * t).cos())
        });
        HermitianOperator::hermitian_part(m)
    }

    #[test]
    fn identity_tensor_identity() {
        let id2 = HermitianOperator::identity(2);
        assert_eq!(tensor_product(&id2, &id2), HermitianOperator::identity(4));
    }

    #[test]
    fn diagonal_tensor_product() {
        let z = HermitianOperator::from_diagonal(&[1.0, -1.0]);
        let zz = tensor_product(&z, &z);
        assert_eq!(zz, HermitianOperator::from_diagonal(&[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn tensor_product_matches_index_formula() {
        let x = sample_hermitian(2, 0.3);
        let y = sample_hermitian(2, 1.7);
        let xy = tensor_product(&x, &y);
        for a in 0..2 {
            for b in 0..2 {
                for a2 in 0..2 {
                    for b2 in 0..2 {
                        let want = x.matrix()[(a, a2)] * y.matrix()[(b, b2)];
                        let got = xy.matrix()[(a * 2 + b, a2 * 2 + b2)];
                        assert!((want - got).norm() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn partial_trace_of_product() {
        let ra = HermitianOperator::from_real_rows(&[&[0.7, 0.2], &[0.2, 0.3]]).unwrap();
        let rb = HermitianOperator::from_diagonal(&[0.5, 0.25, 0.25]);
        let prod = tensor_product(&ra, &rb);
        let back = partial_trace(&prod, 2, 3, Subsystem::A).unwrap();
        assert!(back.max_abs_diff(&ra) < 1e-15);
        let back_b = partial_trace(&prod, 2, 3, Subsystem::B).unwrap();
        assert!(back_b.max_abs_diff(&rb) < 1e-15);
    }

    #[test]
    fn partial_trace_matches_index_sum() {
        let m = sample_hermitian(6, 0.9);
        let (da, db) = (2, 3);
        let ta = partial_trace(&m, da, db, Subsystem::A).unwrap();
        let tb = partial_trace(&m, da, db, Subsystem::B).unwrap();
        for a in 0..da {
            for a2 in 0..da {
                let mut s = c(0.0, 0.0);
                for b in 0..db {
                    s += m.matrix()[(a * db + b, a2 * db + b)];
                }
                assert!((s - ta.matrix()[(a, a2)]).norm() < 1e-12);
            }
        }
        for b in 0..db {
            for b2 in 0..db {
                let mut s = c(0.0, 0.0);
                for a in 0..da {
                    s += m.matrix()[(a * db + b, a * db + b2)];
                }
                assert!((s - tb.matrix()[(b, b2)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn partial_trace_rejects_bad_split() {
        let m = HermitianOperator::identity(5);
        assert!(matches!(
            partial_trace(&m, 2, 3, Subsystem::A),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn tensor_and_partial_trace_are_adjoint() {
        let x = sample_hermitian(2, 0.1);
        let m = sample_hermitian(6, 2.2);
        let lhs = tensor_product(&x, &HermitianOperator::identity(3)).inner(&m);
        let rhs = x.inner(&partial_trace(&m, 2, 3, Subsystem::A).unwrap());
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
    }

    #[test]
    fn permutation_swaps_tensor_factors() {
        let x = sample_hermitian(2, 0.4);
        let y = sample_hermitian(3, 1.1);
        let xy = kron(x.matrix(), y.matrix());
        let yx = kron(y.matrix(), x.matrix());
        let swapped = permute_systems(&xy, &[2, 3], &[1, 0]).unwrap();
        assert!(max_abs_entry(&(swapped - yx)) < 1e-15);
    }

    #[test]
    fn eig_identity_and_pauli_x() {
        let e = eig_hermitian(&HermitianOperator::identity(3)).unwrap();
        for v in e.values {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
        }
        let x = HermitianOperator::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let e = eig_hermitian(&x).unwrap();
        assert_abs_diff_eq!(e.values[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], -1.0, epsilon = 1e-14);
    }

    #[test]
    fn eig_reconstructs_and_is_unitary() {
        let m = sample_hermitian(4, 0.77);
        let e = eig_hermitian(&m).unwrap();
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        assert!(e.reconstruct().max_abs_diff(&m) <= 1e-10 * 4.0);
        let vv = e.vectors.adjoint() * &e.vectors;
        assert!(max_abs_entry(&(vv - CMatrix::identity(4, 4))) < 1e-10);
    }

    #[test]
    fn matrix_functions_on_diagonals() {
        let id = HermitianOperator::identity(3);
        assert!(matrix_function(&id, MatrixFunction::Sqrt).unwrap().max_abs_diff(&id) < 1e-14);
        let d = HermitianOperator::from_diagonal(&[4.0, 9.0]);
        let s = matrix_function(&d, MatrixFunction::Sqrt).unwrap();
        assert!(s.max_abs_diff(&HermitianOperator::from_diagonal(&[2.0, 3.0])) < 1e-14);
        let p = matrix_function(&HermitianOperator::from_diagonal(&[4.0, 0.0]), MatrixFunction::PinvSqrt)
            .unwrap();
        assert!(p.max_abs_diff(&HermitianOperator::from_diagonal(&[0.5, 0.0])) < 1e-14);
        let a = matrix_function(&HermitianOperator::from_diagonal(&[1.0, -2.0]), MatrixFunction::Abs)
            .unwrap();
        assert!(a.max_abs_diff(&HermitianOperator::from_diagonal(&[1.0, 2.0])) < 1e-14);
    }

    #[test]
    fn trace_norms() {
        assert_abs_diff_eq!(trace_norm(&HermitianOperator::identity(3)).unwrap(), 3.0, epsilon = 1e-14);
        let z = HermitianOperator::from_diagonal(&[1.0, -1.0]);
        assert_abs_diff_eq!(trace_norm(&z).unwrap(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn trace_norm_of_helstrom_difference() {
        // ½|0⟩⟨0| − ½|+⟩⟨+| = [[1/4, -1/4], [-1/4, -1/4]], eigenvalues ±√2/4.
        let m = HermitianOperator::from_real_rows(&[&[0.25, -0.25], &[-0.25, -0.25]]).unwrap();
        assert_abs_diff_eq!(trace_norm(&m).unwrap(), 1.0 / 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn construction_rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.0), c(0.1, 0.0), c(1.0, 0.0)]);
        assert!(matches!(HermitianOperator::new(m), Err(Error::NotHermitian(_))));
        let rect = CMatrix::zeros(2, 3);
        assert!(matches!(HermitianOperator::new(rect), Err(Error::NotSquare { .. })));
    }
}
