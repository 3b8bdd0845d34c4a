//! Dense primal-dual interior-point solver for block-diagonal Hermitian
//! semidefinite programs.
//!
//! Standard form, with `X = diag(X_1, …, X_K)` Hermitian:
//!
//! ```text
//! primal:  minimize ⟨C, X⟩  subject to  ⟨A_i, X⟩ = b_i,  X ⪰ 0
//! dual:    maximize b·y     subject to  C − Σ_i y_i A_i = Z ⪰ 0
//! ```
//!
//! The iteration is Mehrotra predictor-corrector with Nesterov–Todd scaling,
//! carried out directly in complex arithmetic. Inequalities are encoded by
//! the caller through extra blocks. Constraint matrices are stored sparsely
//! because every problem built by this crate has a handful of nonzeros per
//! constraint.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{hs_inner, CMatrix, HermitianOperator};

/// Rank tolerance for the Gram matrix of the constraint family.
pub const GRAM_RANK_TOL: f64 = 1e-10;
/// Slack allowed before a reported dual value is said to exceed the primal value.
pub const WEAK_DUALITY_TOL: f64 = 1e-9;

/// A Hermitian matrix given by its nonzero entries. Both `(r, c)` and `(c, r)`
/// are listed for off-diagonal positions.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseHermitian {
    dim: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

impl SparseHermitian {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    /// The matrix `A` with `⟨A, X⟩ = Re X_ij`.
    pub fn real_part(dim: usize, i: usize, j: usize) -> Self {
        let mut s = Self::empty(dim);
        s.push_real_part(i, j, 1.0);
        s
    }

    /// The matrix `A` with `⟨A, X⟩ = Im X_ij` (requires `i ≠ j`).
    pub fn imag_part(dim: usize, i: usize, j: usize) -> Self {
        let mut s = Self::empty(dim);
        s.push_imag_part(i, j, 1.0);
        s
    }

    /// Adds `scale·A` where `⟨A, X⟩ = Re X_ij`.
    pub fn push_real_part(&mut self, i: usize, j: usize, scale: f64) {
        assert!(i < self.dim && j < self.dim);
        if i == j {
            self.entries.push((i, i, Complex64::new(scale, 0.0)));
        } else {
            let h = Complex64::new(0.5 * scale, 0.0);
            self.entries.push((i, j, h));
            self.entries.push((j, i, h));
        }
    }

    /// Adds `scale·A` where `⟨A, X⟩ = Im X_ij`.
    pub fn push_imag_part(&mut self, i: usize, j: usize, scale: f64) {
        assert!(i < self.dim && j < self.dim && i != j);
        let h = Complex64::new(0.0, 0.5 * scale);
        self.entries.push((i, j, h));
        self.entries.push((j, i, -h));
    }

    pub fn from_dense(m: &HermitianOperator) -> Self {
        let n = m.dim();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let z = m.matrix()[(i, j)];
                if z != Complex64::new(0.0, 0.0) {
                    entries.push((i, j, z));
                }
            }
        }
        Self { dim: n, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// `⟨A, X⟩ = Re tr(A·X)`.
    pub fn inner(&self, x: &CMatrix) -> f64 {
        self.entries
            .iter()
            .map(|&(r, c, v)| {
                let w = x[(c, r)];
                v.re * w.re - v.im * w.im
            })
            .sum()
    }

    pub fn add_scaled_to(&self, target: &mut CMatrix, s: f64) {
        for &(r, c, v) in &self.entries {
            target[(r, c)] += v * s;
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        self.add_scaled_to(&mut m, 1.0);
        m
    }

    /// `W·A·W` for Hermitian `W`.
    fn sandwich(&self, w: &CMatrix) -> CMatrix {
        let n = self.dim;
        let mut out = CMatrix::zeros(n, n);
        for &(r, c, v) in &self.entries {
            for q in 0..n {
                let right = v * w[(c, q)];
                if right == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for p in 0..n {
                    out[(p, q)] += w[(p, r)] * right;
                }
            }
        }
        out
    }
}

/// One linear equality `Σ_terms ⟨A_k, X_block⟩ = rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(usize, SparseHermitian)>,
    pub rhs: f64,
}

impl Constraint {
    pub fn single(block: usize, a: SparseHermitian, rhs: f64) -> Self {
        Self {
            terms: vec![(block, a)],
            rhs,
        }
    }

    fn inner(&self, x: &[CMatrix]) -> f64 {
        self.terms.iter().map(|(b, a)| a.inner(&x[*b])).sum()
    }
}

/// A minimization problem over block-diagonal Hermitian PSD variables.
#[derive(Clone, Debug)]
pub struct HermitianSdp {
    blocks: Vec<usize>,
    objective: Vec<HermitianOperator>,
    constraints: Vec<Constraint>,
}

impl HermitianSdp {
    /// Validates block dimensions and checks that the constraint matrices are
    /// linearly independent (Gram matrix rank, tolerance [`GRAM_RANK_TOL`]).
    pub fn new(
        blocks: Vec<usize>,
        objective: Vec<HermitianOperator>,
        constraints: Vec<Constraint>,
    ) -> Result<Self> {
        if blocks.is_empty() || blocks.contains(&0) {
            return Err(Error::InvalidProblem("blocks must be nonempty with positive size".into()));
        }
        if objective.len() != blocks.len() {
            return Err(Error::DimensionMismatch {
                expected: blocks.len(),
                got: objective.len(),
            });
        }
        for (c, &d) in objective.iter().zip(&blocks) {
            if c.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: c.dim(),
                });
            }
        }
        for con in &constraints {
            for (b, a) in &con.terms {
                let d = *blocks
                    .get(*b)
                    .ok_or_else(|| Error::InvalidProblem(format!("constraint uses unknown block {b}")))?;
                if a.dim() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: a.dim(),
                    });
                }
            }
            if !con.rhs.is_finite() {
                return Err(Error::InvalidProblem("non-finite right-hand side".into()));
            }
        }
        let p = Self {
            blocks,
            objective,
            constraints,
        };
        p.check_independence()?;
        Ok(p)
    }

    fn check_independence(&self) -> Result<()> {
        let m = self.constraints.len();
        if m == 0 {
            return Ok(());
        }
        let mut gram = DMatrix::<f64>::zeros(m, m);
        for j in 0..m {
            let dense = self.scatter(j);
            for i in 0..m {
                gram[(i, j)] = self.constraints[i].inner(&dense);
            }
        }
        let gram = (&gram + gram.transpose()) * 0.5;
        let eig = nalgebra::SymmetricEigen::try_new(gram, f64::EPSILON, 1000 * m)
            .ok_or(Error::EigenNonConvergence(m))?;
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if !(max > 0.0) || min <= GRAM_RANK_TOL * max {
            return Err(Error::InvalidProblem(format!(
                "constraint matrices are linearly dependent (Gram eigenvalues {min:.3e}..{max:.3e})"
            )));
        }
        Ok(())
    }

    fn scatter(&self, i: usize) -> Vec<CMatrix> {
        let mut out: Vec<CMatrix> = self.blocks.iter().map(|&d| CMatrix::zeros(d, d)).collect();
        for (b, a) in &self.constraints[i].terms {
            a.add_scaled_to(&mut out[*b], 1.0);
        }
        out
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn objective(&self) -> &[HermitianOperator] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn rhs(&self) -> DVector<f64> {
        DVector::from_iterator(self.constraints.len(), self.constraints.iter().map(|c| c.rhs))
    }

    /// `𝒜(X)_i = Σ ⟨A_i, X⟩`.
    pub fn apply(&self, x: &[CMatrix]) -> DVector<f64> {
        DVector::from_iterator(self.constraints.len(), self.constraints.iter().map(|c| c.inner(x)))
    }

    /// `𝒜*(y) = Σ_i y_i A_i`, block by block.
    pub fn apply_adjoint(&self, y: &[f64]) -> Vec<CMatrix> {
        let mut out: Vec<CMatrix> = self.blocks.iter().map(|&d| CMatrix::zeros(d, d)).collect();
        for (con, &yi) in self.constraints.iter().zip(y) {
            if yi == 0.0 {
                continue;
            }
            for (b, a) in &con.terms {
                a.add_scaled_to(&mut out[*b], yi);
            }
        }
        out
    }

    pub fn objective_value(&self, x: &[HermitianOperator]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c.inner(x)).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Optimal,
    MaxIterations,
    InfeasibleSuspected,
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Bound on relative gap, complementarity and both infeasibilities.
    pub tol: f64,
    pub max_iterations: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    /// Iterate norm above which the problem is declared suspect.
    pub divergence: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iterations: 200,
            step_fraction: 0.98,
            divergence: 1e12,
        }
    }
}

/// Optional user-provided initial iterate; `Z` is derived as `C − 𝒜*(y)` and
/// must be positive definite, as must every block of `x`.
#[derive(Clone, Debug)]
pub struct StartPoint {
    pub x: Vec<HermitianOperator>,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub x: Vec<HermitianOperator>,
    pub y: Vec<f64>,
    pub z: Vec<HermitianOperator>,
    pub primal_value: f64,
    pub dual_value: f64,
    /// `primal_value − dual_value`.
    pub gap: f64,
    pub status: SolverStatus,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolverStatus::Optimal
    }

    /// Converts a non-optimal status into an error.
    pub fn require_optimal(self) -> Result<Self> {
        if self.is_optimal() {
            Ok(self)
        } else {
            Err(Error::Solver {
                status: self.status,
                iterations: self.iterations,
            })
        }
    }
}

pub fn solve(p: &HermitianSdp) -> Result<SdpSolution> {
    solve_with(p, &SolverOptions::default(), None)
}

/// Per-block Nesterov–Todd scaling data: `W = G·G†`, with
/// `G⁻¹·X·G⁻† = G†·Z·G = diag(λ)`.
struct Scaling {
    g: CMatrix,
    g_inv: CMatrix,
    w: CMatrix,
    lambda: Vec<f64>,
}

fn scaling(x: &CMatrix, z: &CMatrix) -> Result<Scaling> {
    let n = x.nrows();
    let ex = HermitianOperator::hermitian_part(x.clone()).eig()?;
    let floor = f64::MIN_POSITIVE.sqrt();
    let sq: Vec<f64> = ex.values.iter().map(|&v| v.max(floor).sqrt()).collect();
    let mut vs = ex.vectors.clone();
    let mut vis = ex.vectors.clone();
    for j in 0..n {
        for i in 0..n {
            vs[(i, j)] *= sq[j];
            vis[(i, j)] /= sq[j];
        }
    }
    let x_half = &vs * ex.vectors.adjoint();
    let x_inv_half = &vis * ex.vectors.adjoint();
    let mid = HermitianOperator::hermitian_part(&x_half * z * &x_half).eig()?;
    let lambda: Vec<f64> = mid.values.iter().map(|&v| v.max(floor * floor).sqrt()).collect();
    let mut g = &x_half * &mid.vectors;
    let mut g_inv = mid.vectors.adjoint() * &x_inv_half;
    for j in 0..n {
        let s = lambda[j].sqrt();
        for i in 0..n {
            g[(i, j)] /= s;
            g_inv[(j, i)] *= s;
        }
    }
    let w = HermitianOperator::hermitian_part(&g * g.adjoint()).into_matrix();
    Ok(Scaling {
        g,
        g_inv,
        w,
        lambda,
    })
}

/// Largest `α` with `diag(λ) + α·D ⪰ 0`, where `D` is the scaled direction.
fn max_step(lambda: &[f64], scaled_dir: &CMatrix) -> Result<f64> {
    let n = lambda.len();
    let mut m = scaled_dir.clone();
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] /= (lambda[i] * lambda[j]).sqrt();
        }
    }
    let min = HermitianOperator::hermitian_part(m).eig()?.min();
    Ok(if min < 0.0 { -1.0 / min } else { f64::INFINITY })
}

fn frob2(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

struct Directions {
    dx: Vec<CMatrix>,
    dy: DVector<f64>,
    dz: Vec<CMatrix>,
}

/// Solves the Newton system for a given centering right-hand side `R_c`
/// (`ΔX + W·ΔZ·W = R_c`).
fn directions(
    p: &HermitianSdp,
    chol: &SchurFactor,
    sc: &[Scaling],
    r_p: &DVector<f64>,
    r_d: &[CMatrix],
    r_c: Vec<CMatrix>,
) -> Directions {
    let wrw: Vec<CMatrix> = sc.iter().zip(r_d).map(|(s, r)| &s.w * r * &s.w).collect();
    let rhs = r_p - p.apply(&r_c) + p.apply(&wrw);
    let dy = chol.solve(&rhs);
    let aty = p.apply_adjoint(dy.as_slice());
    let dz: Vec<CMatrix> = r_d
        .iter()
        .zip(&aty)
        .map(|(r, a)| HermitianOperator::hermitian_part(r - a).into_matrix())
        .collect();
    let dx = r_c
        .into_iter()
        .zip(sc.iter().zip(&dz))
        .map(|(rc, (s, dzk))| HermitianOperator::hermitian_part(rc - &s.w * dzk * &s.w).into_matrix())
        .collect();
    Directions { dx, dy, dz }
}

enum SchurFactor {
    Chol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    Empty,
}

impl SchurFactor {
    fn new(m: DMatrix<f64>) -> Self {
        if m.nrows() == 0 {
            return Self::Empty;
        }
        if let Some(c) = nalgebra::Cholesky::new(m.clone()) {
            return Self::Chol(c);
        }
        let scale = m.diagonal().amax().max(1.0);
        let mut reg = m.clone();
        for i in 0..reg.nrows() {
            reg[(i, i)] += 1e-14 * scale;
        }
        match nalgebra::Cholesky::new(reg) {
            Some(c) => Self::Chol(c),
            None => Self::Lu(m.lu()),
        }
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::Chol(c) => c.solve(rhs),
            Self::Lu(lu) => lu.solve(rhs).unwrap_or_else(|| DVector::zeros(rhs.len())),
            Self::Empty => DVector::zeros(0),
        }
    }
}

fn schur_matrix(p: &HermitianSdp, sc: &[Scaling]) -> DMatrix<f64> {
    let m = p.constraints.len();
    let nb = p.blocks.len();
    // constraint indices touching each block, with the term's position
    let mut by_block: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nb];
    for (i, con) in p.constraints.iter().enumerate() {
        for (t, (b, _)) in con.terms.iter().enumerate() {
            by_block[*b].push((i, t));
        }
    }
    let mut schur = DMatrix::<f64>::zeros(m, m);
    for (b, members) in by_block.iter().enumerate() {
        for &(j, tj) in members {
            let wajw = p.constraints[j].terms[tj].1.sandwich(&sc[b].w);
            for &(i, ti) in members {
                if i > j {
                    continue;
                }
                let v = p.constraints[i].terms[ti].1.inner(&wajw);
                schur[(i, j)] += v;
            }
        }
    }
    for j in 0..m {
        for i in 0..j {
            schur[(j, i)] = schur[(i, j)];
        }
    }
    schur
}

/// Runs the interior-point iteration. Without a start point the iterate is
/// initialized at scaled identities with `y = 0`.
pub fn solve_with(
    p: &HermitianSdp,
    opts: &SolverOptions,
    start: Option<&StartPoint>,
) -> Result<SdpSolution> {
    let m = p.constraints.len();
    let b = p.rhs();
    let c: Vec<CMatrix> = p.objective.iter().map(|o| o.matrix().clone()).collect();
    let n_total: usize = p.blocks.iter().sum();
    let b_norm = b.norm();
    let c_norm = c.iter().map(frob2).sum::<f64>().sqrt();

    let (mut x, mut y, mut z) = match start {
        Some(s) => initial_from(p, s)?,
        None => default_start(p, c_norm),
    };

    let mut status = SolverStatus::MaxIterations;
    let mut iterations = 0;
    for iter in 0..=opts.max_iterations {
        iterations = iter;
        let r_p = &b - p.apply(&x);
        let aty = p.apply_adjoint(y.as_slice());
        let r_d: Vec<CMatrix> = c
            .iter()
            .zip(&z)
            .zip(&aty)
            .map(|((ck, zk), ak)| ck - zk - ak)
            .collect();
        let pobj: f64 = c.iter().zip(&x).map(|(ck, xk)| hs_inner(ck, xk)).sum();
        let dobj = b.dot(&y);
        let xz: f64 = x.iter().zip(&z).map(|(xk, zk)| hs_inner(xk, zk)).sum();
        let mu = xz / n_total as f64;

        let scale = 1.0 + pobj.abs() + dobj.abs();
        let pinf = r_p.norm() / (1.0 + b_norm);
        let dinf = r_d.iter().map(frob2).sum::<f64>().sqrt() / (1.0 + c_norm);
        let relgap = (pobj - dobj).abs() / scale;
        let compl = xz.abs() / scale;
        if pinf.max(dinf).max(relgap).max(compl) <= opts.tol {
            status = SolverStatus::Optimal;
            break;
        }
        let size = x
            .iter()
            .chain(&z)
            .map(frob2)
            .sum::<f64>()
            .sqrt()
            .max(y.norm());
        if !size.is_finite() || size > opts.divergence {
            status = SolverStatus::InfeasibleSuspected;
            break;
        }
        if iter == opts.max_iterations {
            break;
        }

        let sc: Vec<Scaling> = x
            .iter()
            .zip(&z)
            .map(|(xk, zk)| scaling(xk, zk))
            .collect::<Result<_>>()?;
        let chol = SchurFactor::new(schur_matrix(p, &sc));

        // predictor: R_c = −X
        let centering = |target: f64, corr: Option<(&[CMatrix], &[CMatrix])>| -> Vec<CMatrix> {
            sc.iter()
                .enumerate()
                .map(|(k, s)| {
                    let n = s.lambda.len();
                    let mut r = CMatrix::zeros(n, n);
                    for i in 0..n {
                        r[(i, i)] = Complex64::new(target - s.lambda[i] * s.lambda[i], 0.0);
                    }
                    if let Some((dxs, dzs)) = corr {
                        let dxt = &s.g_inv * &dxs[k] * s.g_inv.adjoint();
                        let dzt = s.g.adjoint() * &dzs[k] * &s.g;
                        let sym = (&dxt * &dzt + &dzt * &dxt) * Complex64::new(0.5, 0.0);
                        r -= sym;
                    }
                    for i in 0..n {
                        for j in 0..n {
                            r[(i, j)] *= 2.0 / (s.lambda[i] + s.lambda[j]);
                        }
                    }
                    &s.g * r * s.g.adjoint()
                })
                .collect()
        };

        let aff = directions(p, &chol, &sc, &r_p, &r_d, centering(0.0, None));
        let (ap, ad) = step_lengths(&sc, &aff)?;
        let ap = ap.min(1.0);
        let ad = ad.min(1.0);
        let mut xz_aff = 0.0;
        for k in 0..x.len() {
            let xa = &x[k] + &aff.dx[k] * Complex64::new(ap, 0.0);
            let za = &z[k] + &aff.dz[k] * Complex64::new(ad, 0.0);
            xz_aff += hs_inner(&xa, &za);
        }
        let sigma = if mu > 0.0 {
            (xz_aff / n_total as f64 / mu).clamp(0.0, 1.0).powi(3)
        } else {
            0.0
        };

        let corr = directions(
            p,
            &chol,
            &sc,
            &r_p,
            &r_d,
            centering(sigma * mu, Some((&aff.dx, &aff.dz))),
        );
        let (ap, ad) = step_lengths(&sc, &corr)?;
        let ap = (opts.step_fraction * ap).min(1.0);
        let ad = (opts.step_fraction * ad).min(1.0);
        for k in 0..x.len() {
            x[k] = HermitianOperator::hermitian_part(&x[k] + &corr.dx[k] * Complex64::new(ap, 0.0))
                .into_matrix();
            z[k] = HermitianOperator::hermitian_part(&z[k] + &corr.dz[k] * Complex64::new(ad, 0.0))
                .into_matrix();
        }
        y += &corr.dy * ad;
        debug_assert_eq!(y.len(), m);
    }

    let x: Vec<HermitianOperator> = x.into_iter().map(HermitianOperator::hermitian_part).collect();
    let z: Vec<HermitianOperator> = z.into_iter().map(HermitianOperator::hermitian_part).collect();
    let primal_value = p.objective_value(&x);
    let dual_value = b.dot(&y);
    Ok(SdpSolution {
        x,
        y: y.as_slice().to_vec(),
        z,
        primal_value,
        dual_value,
        gap: primal_value - dual_value,
        status,
        iterations,
    })
}

fn step_lengths(sc: &[Scaling], d: &Directions) -> Result<(f64, f64)> {
    let mut ap = f64::INFINITY;
    let mut ad = f64::INFINITY;
    for (k, s) in sc.iter().enumerate() {
        let dxt = &s.g_inv * &d.dx[k] * s.g_inv.adjoint();
        let dzt = s.g.adjoint() * &d.dz[k] * &s.g;
        ap = ap.min(max_step(&s.lambda, &dxt)?);
        ad = ad.min(max_step(&s.lambda, &dzt)?);
    }
    Ok((ap, ad))
}

type Iterate = (Vec<CMatrix>, DVector<f64>, Vec<CMatrix>);

fn default_start(p: &HermitianSdp, c_norm: f64) -> Iterate {
    let n_total: usize = p.blocks.iter().sum();
    let root_n = (n_total as f64).sqrt();
    let mut xi: f64 = 10f64.max(root_n);
    let mut eta: f64 = 10f64.max(root_n).max(c_norm);
    for con in &p.constraints {
        let a_norm = con
            .terms
            .iter()
            .map(|(_, a)| frob2(&a.to_dense()))
            .sum::<f64>()
            .sqrt();
        xi = xi.max(n_total as f64 * (1.0 + con.rhs.abs()) / (1.0 + a_norm));
        eta = eta.max(a_norm);
    }
    let x = p.blocks.iter().map(|&d| CMatrix::identity(d, d) * Complex64::new(xi, 0.0)).collect();
    let z = p.blocks.iter().map(|&d| CMatrix::identity(d, d) * Complex64::new(eta, 0.0)).collect();
    (x, DVector::zeros(p.constraints.len()), z)
}

fn initial_from(p: &HermitianSdp, s: &StartPoint) -> Result<Iterate> {
    if s.x.len() != p.blocks.len() || s.y.len() != p.constraints.len() {
        return Err(Error::InvalidProblem("start point does not match problem shape".into()));
    }
    let aty = p.apply_adjoint(&s.y);
    let mut z = Vec::with_capacity(p.blocks.len());
    for (k, (xk, ak)) in s.x.iter().zip(&aty).enumerate() {
        if xk.dim() != p.blocks[k] {
            return Err(Error::DimensionMismatch {
                expected: p.blocks[k],
                got: xk.dim(),
            });
        }
        let zk = HermitianOperator::hermitian_part(p.objective[k].matrix() - ak);
        if xk.eig()?.min() <= 0.0 || zk.eig()?.min() <= 0.0 {
            return Err(Error::InvalidProblem("start point is not strictly feasible".into()));
        }
        z.push(zk.into_matrix());
    }
    Ok((
        s.x.iter().map(|h| h.matrix().clone()).collect(),
        DVector::from_column_slice(&s.y),
        z,
    ))
}

/// Residuals recomputed from scratch for a claimed solution.
#[derive(Clone, Debug, Serialize)]
pub struct CertificateReport {
    /// `max_i |⟨A_i, X⟩ − b_i|`.
    pub primal_residual: f64,
    /// Largest entry modulus of `C − Z − 𝒜*(y)`.
    pub dual_residual: f64,
    pub x_min_eigenvalue: f64,
    pub z_min_eigenvalue: f64,
    pub recomputed_primal: f64,
    pub recomputed_dual: f64,
    /// Recomputed `⟨C, X⟩ − b·y`.
    pub gap: f64,
    /// Largest discrepancy between reported and recomputed objective values.
    pub value_mismatch: f64,
    pub weak_duality_violated: bool,
}

impl CertificateReport {
    /// True when every residual, cone violation and the gap are within `tol`
    /// (gap relative to `1 + |primal|`).
    pub fn within(&self, tol: f64) -> bool {
        self.primal_residual <= tol
            && self.dual_residual <= tol
            && self.x_min_eigenvalue >= -tol
            && self.z_min_eigenvalue >= -tol
            && self.gap.abs() <= tol * (1.0 + self.recomputed_primal.abs())
            && self.value_mismatch <= tol * (1.0 + self.recomputed_primal.abs())
            && !self.weak_duality_violated
    }
}

/// Re-derives feasibility residuals, cone violations and the gap of `s` using
/// only the problem data.
pub fn check_certificate(p: &HermitianSdp, s: &SdpSolution) -> Result<CertificateReport> {
    if s.x.len() != p.blocks.len() || s.z.len() != p.blocks.len() || s.y.len() != p.constraints.len() {
        return Err(Error::InvalidProblem("solution does not match problem shape".into()));
    }
    let xm: Vec<CMatrix> = s.x.iter().map(|h| h.matrix().clone()).collect();
    let ax = p.apply(&xm);
    let primal_residual = p
        .constraints
        .iter()
        .zip(ax.iter())
        .map(|(c, v)| (v - c.rhs).abs())
        .fold(0.0, f64::max);
    let aty = p.apply_adjoint(&s.y);
    let mut dual_residual = 0.0_f64;
    let mut x_min = f64::INFINITY;
    let mut z_min = f64::INFINITY;
    for k in 0..p.blocks.len() {
        let r = p.objective[k].matrix() - s.z[k].matrix() - &aty[k];
        dual_residual = dual_residual.max(crate::linalg::max_abs_entry(&r));
        x_min = x_min.min(s.x[k].eig()?.min());
        z_min = z_min.min(s.z[k].eig()?.min());
    }
    let recomputed_primal = p.objective_value(&s.x);
    let recomputed_dual: f64 = p.constraints.iter().zip(&s.y).map(|(c, y)| c.rhs * y).sum();
    let value_mismatch = (recomputed_primal - s.primal_value)
        .abs()
        .max((recomputed_dual - s.dual_value).abs());
    let slack = WEAK_DUALITY_TOL * (1.0 + s.primal_value.abs());
    let weak_duality_violated = s.dual_value > s.primal_value + slack;
    Ok(CertificateReport {
        primal_residual,
        dual_residual,
        x_min_eigenvalue: x_min,
        z_min_eigenvalue: z_min,
        recomputed_primal,
        recomputed_dual,
        gap: recomputed_primal - recomputed_dual,
        value_mismatch,
        weak_duality_violated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Constraints `X_block_a − X_block_b = target`, entry by entry.
    fn difference_constraints(n: usize, a: usize, b: usize, target: &HermitianOperator) -> Vec<Constraint> {
        let mut out = Vec::new();
        for i in 0..n {
            for j in i..n {
                let t = target.matrix()[(i, j)];
                let mut neg = SparseHermitian::real_part(n, i, j);
                neg.entries.iter_mut().for_each(|e| e.2 = -e.2);
                out.push(Constraint {
                    terms: vec![(a, SparseHermitian::real_part(n, i, j)), (b, neg)],
                    rhs: t.re,
                });
                if i != j {
                    let mut neg = SparseHermitian::imag_part(n, i, j);
                    neg.entries.iter_mut().for_each(|e| e.2 = -e.2);
                    out.push(Constraint {
                        terms: vec![(a, SparseHermitian::imag_part(n, i, j)), (b, neg)],
                        rhs: t.im,
                    });
                }
            }
        }
        out
    }

    /// `min tr σ` subject to `σ ⪰ ρ_k` for every `k`.
    fn dominating_trace(rhos: &[HermitianOperator]) -> HermitianSdp {
        let n = rhos[0].dim();
        let mut blocks = vec![n];
        let mut objective = vec![HermitianOperator::identity(n)];
        let mut cons = Vec::new();
        for (k, r) in rhos.iter().enumerate() {
            blocks.push(n);
            objective.push(HermitianOperator::zeros(n));
            cons.extend(difference_constraints(n, 0, k + 1, r));
        }
        HermitianSdp::new(blocks, objective, cons).unwrap()
    }

    fn tilted_projector() -> HermitianOperator {
        let (t, phi) = (std::f64::consts::PI / 5.0, 0.4);
        let v = nalgebra::DVector::from_vec(vec![
            Complex64::new(t.cos(), 0.0),
            Complex64::from_polar(t.sin(), phi),
        ]);
        HermitianOperator::projector(&v).scale(0.6)
    }

    #[test]
    fn scalar_problem() {
        let mut neg = SparseHermitian::real_part(1, 0, 0);
        neg.entries[0].2 = Complex64::new(-1.0, 0.0);
        let con = Constraint {
            terms: vec![(0, SparseHermitian::real_part(1, 0, 0)), (1, neg)],
            rhs: 3.0,
        };
        let p = HermitianSdp::new(
            vec![1, 1],
            vec![HermitianOperator::identity(1), HermitianOperator::zeros(1)],
            vec![con],
        )
        .unwrap();
        let s = solve(&p).unwrap();
        assert_eq!(s.status, SolverStatus::Optimal);
        assert_abs_diff_eq!(s.primal_value, 3.0, epsilon = 1e-7);
        assert_abs_diff_eq!(s.dual_value, 3.0, epsilon = 1e-7);
    }

    #[test]
    fn monotone_objective_returns_the_bound() {
        let rho = crate::state::random_density(3, 17);
        let p = dominating_trace(&[rho.op().clone()]);
        let s = solve(&p).unwrap();
        assert!(s.is_optimal());
        assert_abs_diff_eq!(s.primal_value, 1.0, epsilon = 1e-7);
        assert!(s.x[0].max_abs_diff(rho.op()) < 1e-6);
    }

    /// Coarse-to-fine grid over `(σ11, Re σ12, Im σ12)`; `σ22` is set to its
    /// smallest feasible value from the 2×2 determinant condition.
    fn grid_oracle(rhos: &[HermitianOperator]) -> f64 {
        let min_s22 = |s11: f64, re: f64, im: f64| -> f64 {
            let mut need = f64::NEG_INFINITY;
            for r in rhos {
                let m = r.matrix();
                let d11 = s11 - m[(0, 0)].re;
                if d11 < 0.0 {
                    return f64::INFINITY;
                }
                let off = Complex64::new(re, im) - m[(0, 1)];
                let req = if d11 == 0.0 {
                    if off.norm() > 0.0 {
                        f64::INFINITY
                    } else {
                        m[(1, 1)].re
                    }
                } else {
                    m[(1, 1)].re + off.norm_sqr() / d11
                };
                need = need.max(req);
            }
            need
        };
        let mut center = (1.0, 0.0, 0.0);
        let mut half = (1.0, 1.0, 1.0);
        let mut best = f64::INFINITY;
        for step in [1e-1, 1e-2, 1e-3] {
            let mut arg = center;
            let count = |h: f64| (h / step).round() as i64;
            for a in -count(half.0)..=count(half.0) {
                let s11 = center.0 + a as f64 * step;
                for b in -count(half.1)..=count(half.1) {
                    let re = center.1 + b as f64 * step;
                    for c in -count(half.2)..=count(half.2) {
                        let im = center.2 + c as f64 * step;
                        let v = s11 + min_s22(s11, re, im);
                        if v < best {
                            best = v;
                            arg = (s11, re, im);
                        }
                    }
                }
            }
            center = arg;
            half = (20.0 * step * 0.1, 20.0 * step * 0.1, 20.0 * step * 0.1);
            half = (half.0.max(2.0 * step), half.1.max(2.0 * step), half.2.max(2.0 * step));
        }
        best
    }

    #[test]
    fn non_commuting_instance_matches_grid_search() {
        let rhos = [HermitianOperator::from_diagonal(&[0.7, 0.2]), tilted_projector()];
        let oracle = grid_oracle(&rhos);
        let s = solve(&dominating_trace(&rhos)).unwrap();
        assert!(s.is_optimal());
        assert!((s.primal_value - oracle).abs() < 1e-4, "{} vs {oracle}", s.primal_value);
        // grid points are feasible, so the oracle never beats the optimum
        assert!(oracle >= s.primal_value - 1e-9);
    }

    #[test]
    fn certificate_of_solved_problem_is_clean() {
        let rhos = [HermitianOperator::from_diagonal(&[0.7, 0.2]), tilted_projector()];
        let p = dominating_trace(&rhos);
        let s = solve(&p).unwrap();
        let rep = check_certificate(&p, &s).unwrap();
        assert!(rep.within(1e-7), "{rep:?}");
    }

    #[test]
    fn certificate_detects_perturbed_primal() {
        let p = dominating_trace(&[tilted_projector()]);
        let mut s = solve(&p).unwrap();
        let mut m = s.x[1].matrix().clone();
        m[(0, 0)] += Complex64::new(0.1, 0.0);
        s.x[1] = HermitianOperator::hermitian_part(m);
        let rep = check_certificate(&p, &s).unwrap();
        assert!(rep.primal_residual > 0.05);
        assert!(!rep.within(1e-7));
    }

    #[test]
    fn certificate_flags_weak_duality_violation() {
        let p = dominating_trace(&[tilted_projector()]);
        let mut s = solve(&p).unwrap();
        s.dual_value = s.primal_value + 1e-6;
        let rep = check_certificate(&p, &s).unwrap();
        assert!(rep.weak_duality_violated);
    }

    #[test]
    fn solve_is_deterministic() {
        let p = dominating_trace(&[crate::state::random_density(3, 1).op().clone(), tilted_projector_3()]);
        let a = solve(&p).unwrap();
        let b = solve(&p).unwrap();
        assert_eq!(a.primal_value.to_bits(), b.primal_value.to_bits());
        assert_eq!(a.y, b.y);
        assert_eq!(a.x, b.x);
    }

    fn tilted_projector_3() -> HermitianOperator {
        crate::state::random_density(3, 99).op().scale(0.8)
    }

    #[test]
    fn scale_covariance() {
        let rhos = [crate::state::random_density(3, 4).op().clone(), tilted_projector_3()];
        let p = dominating_trace(&rhos);
        let base = solve(&p).unwrap();
        for alpha in [0.25, 3.0, 40.0] {
            let scaled = HermitianSdp::new(
                p.blocks().to_vec(),
                p.objective().iter().map(|c| c.scale(alpha)).collect(),
                p.constraints().to_vec(),
            )
            .unwrap();
            let s = solve(&scaled).unwrap();
            assert!(s.is_optimal());
            let rel = (s.primal_value - alpha * base.primal_value).abs() / (alpha * base.primal_value);
            assert!(rel < 1e-7, "alpha {alpha}: rel {rel}");
        }
    }

    #[test]
    fn dependent_constraints_are_rejected() {
        let a = SparseHermitian::real_part(2, 0, 1);
        let cons = vec![Constraint::single(0, a.clone(), 0.0), Constraint::single(0, a, 0.0)];
        let err = HermitianSdp::new(vec![2], vec![HermitianOperator::identity(2)], cons);
        assert!(matches!(err, Err(Error::InvalidProblem(_))));
    }

    #[test]
    fn strictly_feasible_start_is_accepted() {
        let rho = crate::state::random_density(2, 8);
        let p = dominating_trace(&[rho.op().clone()]);
        let bad = StartPoint {
            x: vec![HermitianOperator::zeros(2), HermitianOperator::identity(2)],
            y: vec![0.0; p.constraints().len()],
        };
        assert!(solve_with(&p, &SolverOptions::default(), Some(&bad)).is_err());
    }

    #[test]
    fn infeasible_problem_is_not_reported_optimal() {
        // X ⪰ 0 with X_00 = −1 has no solution
        let p = HermitianSdp::new(
            vec![1],
            vec![HermitianOperator::identity(1)],
            vec![Constraint::single(0, SparseHermitian::real_part(1, 0, 0), -1.0)],
        )
        .unwrap();
        let s = solve(&p).unwrap();
        assert_ne!(s.status, SolverStatus::Optimal);
    }
}
