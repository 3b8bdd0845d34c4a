//! Density operators, bipartite and classical-quantum states, pure states and
//! the canonical constructors built on them.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{
    kron, matrix_function, partial_trace, partial_trace_systems, permute_systems, support,
    CMatrix, CVector, HermitianOperator, MatrixFunction, Subsystem, PSD_CLAMP,
};

/// Trace tolerance for density operators and probability vectors.
pub const TRACE_TOL: f64 = 1e-9;
/// Norm tolerance for pure-state amplitudes.
pub const NORM_TOL: f64 = 1e-10;

/// A positive semidefinite operator of unit trace.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    op: HermitianOperator,
}

impl DensityOperator {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let tr = op.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let min = op.eig()?.min();
        if min < -PSD_CLAMP {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self { op })
    }

    /// Clamps negative eigenvalues to zero and rescales to unit trace.
    pub fn from_psd_normalized(op: &HermitianOperator) -> Result<Self> {
        let clamped = op.eig()?.map(|x| x.max(0.0));
        let tr = clamped.trace();
        if !(tr > 0.0) {
            return Err(Error::InvalidState("operator has no positive part".into()));
        }
        Ok(Self {
            op: clamped.scale(1.0 / tr),
        })
    }

    /// `id/d`.
    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            op: HermitianOperator::identity(d).scale(1.0 / d as f64),
        }
    }

    /// `|k⟩⟨k|` in dimension `d`.
    pub fn basis(d: usize, k: usize) -> Self {
        let mut diag = vec![0.0; d];
        diag[k] = 1.0;
        Self {
            op: HermitianOperator::from_diagonal(&diag),
        }
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        self.op.matrix()
    }
}

/// A density operator on `A⊗B`, A-major.
#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteState {
    rho: DensityOperator,
    d_a: usize,
    d_b: usize,
}

impl BipartiteState {
    pub fn new(rho: DensityOperator, d_a: usize, d_b: usize) -> Result<Self> {
        if d_a == 0 || d_b == 0 {
            return Err(Error::InvalidState("subsystem dimensions must be positive".into()));
        }
        if rho.dim() != d_a * d_b {
            return Err(Error::DimensionMismatch {
                expected: d_a * d_b,
                got: rho.dim(),
            });
        }
        Ok(Self { rho, d_a, d_b })
    }

    pub fn product(rho_a: &DensityOperator, rho_b: &DensityOperator) -> Self {
        let op = HermitianOperator::hermitian_part(kron(rho_a.matrix(), rho_b.matrix()));
        Self {
            rho: DensityOperator { op },
            d_a: rho_a.dim(),
            d_b: rho_b.dim(),
        }
    }

    pub fn from_pure(psi: &PureState, d_a: usize, d_b: usize) -> Result<Self> {
        Self::new(psi.density(), d_a, d_b)
    }

    pub fn rho(&self) -> &DensityOperator {
        &self.rho
    }

    pub fn op(&self) -> &HermitianOperator {
        self.rho.op()
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn d_b(&self) -> usize {
        self.d_b
    }

    pub fn marginal_a(&self) -> DensityOperator {
        let op = partial_trace(self.op(), self.d_a, self.d_b, Subsystem::A)
            .expect("split checked at construction");
        DensityOperator { op }
    }

    pub fn marginal_b(&self) -> DensityOperator {
        let op = partial_trace(self.op(), self.d_a, self.d_b, Subsystem::B)
            .expect("split checked at construction");
        DensityOperator { op }
    }

    /// `ρ_AB ⊗ ρ_A'B'` regrouped as `(AA')⊗(BB')`.
    pub fn tensor(&self, other: &Self) -> Self {
        let joint = kron(self.rho.matrix(), other.rho.matrix());
        let dims = [self.d_a, self.d_b, other.d_a, other.d_b];
        let regrouped = permute_systems(&joint, &dims, &[0, 2, 1, 3]).expect("valid permutation");
        Self {
            rho: DensityOperator {
                op: HermitianOperator::hermitian_part(regrouped),
            },
            d_a: self.d_a * other.d_a,
            d_b: self.d_b * other.d_b,
        }
    }
}

/// A classical random variable `X` with conditional states `ρ_B^x`.
#[derive(Clone, Debug, PartialEq)]
pub struct CqEnsemble {
    probs: Vec<f64>,
    states: Vec<DensityOperator>,
}

impl CqEnsemble {
    pub fn new(probs: Vec<f64>, states: Vec<DensityOperator>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidState("ensemble needs at least one outcome".into()));
        }
        if probs.len() != states.len() {
            return Err(Error::DimensionMismatch {
                expected: probs.len(),
                got: states.len(),
            });
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0)) {
            return Err(Error::InvalidState(format!("negative probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("probabilities sum to {total}")));
        }
        let d = states[0].dim();
        if let Some(s) = states.iter().find(|s| s.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: s.dim(),
            });
        }
        Ok(Self { probs, states })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn states(&self) -> &[DensityOperator] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn d_b(&self) -> usize {
        self.states[0].dim()
    }
}

/// A normalized state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
}

impl PureState {
    pub fn new(amplitudes: CVector) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidState("empty amplitude vector".into()));
        }
        let norm2 = amplitudes.norm_squared();
        if (norm2 - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("squared norm is {norm2}")));
        }
        Ok(Self { amplitudes })
    }

    /// Rescales a nonzero vector to unit norm.
    pub fn normalized(v: CVector) -> Result<Self> {
        let n = v.norm();
        if !(n > 0.0) {
            return Err(Error::InvalidState("zero vector".into()));
        }
        Ok(Self { amplitudes: v / Complex64::new(n, 0.0) })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn density(&self) -> DensityOperator {
        DensityOperator {
            op: HermitianOperator::projector(&self.amplitudes),
        }
    }
}

/// `‖√ρ√σ‖₁`; its square is the overlap `⟨ψ|ρ|ψ⟩` when `σ = |ψ⟩⟨ψ|`.
pub fn root_fidelity(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: sigma.dim(),
        });
    }
    let sr = matrix_function(rho.op(), MatrixFunction::Sqrt)?;
    let ss = matrix_function(sigma.op(), MatrixFunction::Sqrt)?;
    let prod = sr.matrix() * ss.matrix();
    let f: f64 = prod.singular_values().iter().sum();
    Ok(f.clamp(0.0, 1.0))
}

/// A purification together with the dimension of its ancilla.
#[derive(Clone, Debug)]
pub struct Purification {
    /// Lives on `system ⊗ ancilla`, system index most significant.
    pub state: PureState,
    pub ancilla_dim: usize,
}

/// Purifies over an ancilla whose dimension is the numerical rank of `rho`.
pub fn purify(rho: &DensityOperator) -> Result<Purification> {
    let n = rho.dim();
    let (vals, vecs) = support(rho.op())?;
    let r = vals.len().max(1);
    let mut amps = CVector::zeros(n * r);
    for (k, &lam) in vals.iter().enumerate() {
        let w = lam.sqrt();
        for i in 0..n {
            amps[i * r + k] = vecs[(i, k)] * w;
        }
    }
    // renormalize away the mass of discarded eigenvalues
    let state = PureState::normalized(amps)?;
    Ok(Purification {
        state,
        ancilla_dim: r,
    })
}

/// `(1/√d) Σ_x |x⟩|x⟩` on `d ⊗ d`.
pub fn maximally_entangled(d: usize) -> PureState {
    assert!(d >= 1, "dimension must be positive");
    let mut amps = CVector::zeros(d * d);
    let a = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
    for x in 0..d {
        amps[x * d + x] = a;
    }
    PureState { amplitudes: amps }
}

/// `Σ_x p_x |x⟩⟨x| ⊗ ρ_B^x` with `d_A = |X|`.
pub fn cq_to_density(e: &CqEnsemble) -> BipartiteState {
    let nx = e.len();
    let db = e.d_b();
    let mut m = CMatrix::zeros(nx * db, nx * db);
    for (x, (p, s)) in e.probs.iter().zip(&e.states).enumerate() {
        let block = s.matrix() * Complex64::new(*p, 0.0);
        m.view_mut((x * db, x * db), (db, db)).copy_from(&block);
    }
    BipartiteState {
        rho: DensityOperator {
            op: HermitianOperator::hermitian_part(m),
        },
        d_a: nx,
        d_b: db,
    }
}

/// The deterministic generator used for every seeded construction: ChaCha20
/// keyed by `seed_from_u64`.
pub fn seeded_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// `d_rows × d_cols` matrix of independent standard complex Gaussians.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    // column-major fill order is part of the reproducibility contract
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// `G·G†/tr(G·G†)` for a square Ginibre matrix `G` drawn from `rng`.
pub fn random_density_from<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DensityOperator {
    assert!(d >= 1, "dimension must be positive");
    let g = ginibre(rng, d, d);
    let w = HermitianOperator::hermitian_part(&g * g.adjoint());
    let tr = w.trace();
    DensityOperator { op: w.scale(1.0 / tr) }
}

/// Ginibre-ensemble density operator from a fresh ChaCha20 stream keyed by `seed`.
pub fn random_density(d: usize, seed: u64) -> DensityOperator {
    random_density_from(&mut seeded_rng(seed), d)
}

/// Haar-random pure state (normalized complex Gaussian vector).
pub fn random_pure_from<R: Rng + ?Sized>(rng: &mut R, d: usize) -> PureState {
    let v = DVector::from_fn(d, |_, _| complex_gaussian(rng));
    PureState::normalized(v).expect("Gaussian vector is nonzero almost surely")
}

/// Haar-random isometry with `rows ≥ cols`: the Q factor of a Ginibre matrix,
/// column phases fixed so that `R` has a positive diagonal.
pub fn haar_isometry<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    assert!(rows >= cols, "isometry needs rows >= cols");
    let g = ginibre(rng, rows, cols);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..cols {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..rows {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Convenience: random bipartite Ginibre state with the given split.
pub fn random_bipartite_from<R: Rng + ?Sized>(rng: &mut R, d_a: usize, d_b: usize) -> BipartiteState {
    let rho = random_density_from(rng, d_a * d_b);
    BipartiteState { rho, d_a, d_b }
}

/// Reduced state on the kept factors of a multipartite pure state.
pub fn reduced_state(psi: &PureState, dims: &[usize], keep: &[bool]) -> Result<DensityOperator> {
    let full = HermitianOperator::projector(psi.amplitudes());
    let red = partial_trace_systems(full.matrix(), dims, keep)?;
    Ok(DensityOperator {
        op: HermitianOperator::hermitian_part(red),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_entry;
    use approx::assert_abs_diff_eq;

    fn ket(d: usize, amps: &[(usize, Complex64)]) -> PureState {
        let mut v = CVector::zeros(d);
        for &(i, a) in amps {
            v[i] = a;
        }
        PureState::normalized(v).unwrap()
    }

    #[test]
    fn density_validation() {
        assert!(DensityOperator::new(HermitianOperator::identity(2)).is_err());
        assert!(DensityOperator::new(HermitianOperator::from_diagonal(&[1.5, -0.5])).is_err());
        assert!(DensityOperator::new(HermitianOperator::from_diagonal(&[0.25, 0.75])).is_ok());
    }

    #[test]
    fn maximally_entangled_amplitudes() {
        let one = maximally_entangled(1);
        assert_eq!(one.amplitudes().len(), 1);
        assert_abs_diff_eq!(one.amplitudes()[0].re, 1.0);
        let phi2 = maximally_entangled(2);
        let s = 1.0 / 2f64.sqrt();
        let want = [s, 0.0, 0.0, s];
        for (a, w) in phi2.amplitudes().iter().zip(want) {
            assert_abs_diff_eq!(a.re, w, epsilon = 1e-15);
            assert_abs_diff_eq!(a.im, 0.0);
        }
    }

    #[test]
    fn marginal_of_maximally_entangled_is_mixed() {
        let st = BipartiteState::from_pure(&maximally_entangled(3), 3, 3).unwrap();
        let mixed = DensityOperator::maximally_mixed(3);
        assert!(st.marginal_b().op().max_abs_diff(mixed.op()) < 1e-15);
        assert!(st.marginal_a().op().max_abs_diff(mixed.op()) < 1e-15);
    }

    #[test]
    fn fidelity_known_values() {
        let rho = random_density(3, 5);
        assert_abs_diff_eq!(root_fidelity(&rho, &rho).unwrap(), 1.0, epsilon = 1e-10);
        let zero = DensityOperator::basis(2, 0);
        let s = Complex64::new(1.0 / 2f64.sqrt(), 0.0);
        let plus = ket(2, &[(0, s), (1, s)]).density();
        assert_abs_diff_eq!(root_fidelity(&zero, &plus).unwrap(), s.re, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_is_symmetric() {
        for seed in 0..10 {
            let a = random_density(3, seed);
            let b = random_density(3, seed + 100);
            let fab = root_fidelity(&a, &b).unwrap();
            let fba = root_fidelity(&b, &a).unwrap();
            assert_abs_diff_eq!(fab, fba, epsilon = 1e-10);
            assert!(fab < 1.0 - 1e-6);
        }
    }

    #[test]
    fn purify_pure_input_has_trivial_ancilla() {
        let psi = ket(3, &[(0, Complex64::new(0.6, 0.0)), (2, Complex64::new(0.0, 0.8))]);
        let p = purify(&psi.density()).unwrap();
        assert_eq!(p.ancilla_dim, 1);
        let overlap = (p.state.amplitudes().adjoint() * psi.amplitudes())[(0, 0)].norm();
        assert_abs_diff_eq!(overlap, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn purify_mixed_qubit_is_maximally_entangled() {
        let p = purify(&DensityOperator::maximally_mixed(2)).unwrap();
        assert_eq!(p.ancilla_dim, 2);
        let anc = reduced_state(&p.state, &[2, 2], &[false, true]).unwrap();
        assert!(anc.op().max_abs_diff(DensityOperator::maximally_mixed(2).op()) < 1e-12);
    }

    #[test]
    fn purify_random_state_recovers_input() {
        let rho = random_density(3, 11);
        let p = purify(&rho).unwrap();
        let back = reduced_state(&p.state, &[3, p.ancilla_dim], &[true, false]).unwrap();
        assert!(back.op().max_abs_diff(rho.op()) < 1e-10);
    }

    #[test]
    fn cq_single_outcome_is_conditional_state() {
        let s = random_density(2, 3);
        let e = CqEnsemble::new(vec![1.0], vec![s.clone()]).unwrap();
        let st = cq_to_density(&e);
        assert_eq!((st.d_a(), st.d_b()), (1, 2));
        assert!(st.op().max_abs_diff(s.op()) < 1e-15);
    }

    #[test]
    fn cq_independent_is_product() {
        let tau = DensityOperator::maximally_mixed(2);
        let e = CqEnsemble::new(vec![0.5, 0.5], vec![tau.clone(), tau.clone()]).unwrap();
        let st = cq_to_density(&e);
        let want = BipartiteState::product(&tau, &tau);
        assert!(st.op().max_abs_diff(want.op()) < 1e-15);
    }

    #[test]
    fn cq_helstrom_block_assembly() {
        let zero = DensityOperator::basis(2, 0);
        let plus = DensityOperator::new(
            HermitianOperator::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]).unwrap(),
        )
        .unwrap();
        let st = cq_to_density(&CqEnsemble::new(vec![0.5, 0.5], vec![zero, plus]).unwrap());
        let want = HermitianOperator::from_real_rows(&[
            &[0.5, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.25, 0.25],
            &[0.0, 0.0, 0.25, 0.25],
        ])
        .unwrap();
        assert!(st.op().max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn cq_states_are_classical() {
        let e = CqEnsemble::new(
            vec![0.2, 0.3, 0.5],
            vec![random_density(2, 1), random_density(2, 2), random_density(2, 3)],
        )
        .unwrap();
        let st = cq_to_density(&e);
        let label = HermitianOperator::from_diagonal(&[0.0, 1.0, 2.0]);
        let obs = kron(label.matrix(), &CMatrix::identity(2, 2));
        let comm = st.op().matrix() * &obs - &obs * st.op().matrix();
        assert!(max_abs_entry(&comm) < 1e-12);
    }

    #[test]
    fn random_density_is_deterministic_and_valid() {
        let a = random_density(4, 42);
        let b = random_density(4, 42);
        assert_eq!(a, b);
        assert!(DensityOperator::new(a.op().clone()).is_ok());
        assert_ne!(a, random_density(4, 43));
    }

    #[test]
    fn tensor_regroups_subsystems() {
        let mut rng = seeded_rng(9);
        let s1 = random_bipartite_from(&mut rng, 2, 3);
        let s2 = random_bipartite_from(&mut rng, 2, 1);
        let t = s1.tensor(&s2);
        assert_eq!((t.d_a(), t.d_b()), (4, 3));
        let ma = t.marginal_a();
        let want = kron(s1.marginal_a().matrix(), s2.marginal_a().matrix());
        assert!(max_abs_entry(&(ma.matrix() - want)) < 1e-14);
    }
}
