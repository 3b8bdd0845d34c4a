//! Conditional min- and max-entropies and their operational forms.
//!
//! `H_min(A|B) = −log₂ min{tr σ : id_A⊗σ ⪰ ρ_AB}`. The solver works on the
//! dual side: the primal variable is `E_AB ⪰ 0` with `tr_A E = id_B` and the
//! objective `max tr(ρ E)`; the optimal `σ` is read off the multipliers.

use num_complex::Complex64;
use serde::Serialize;

use crate::channels::{adjoint_channel, ChoiMatrix};
use crate::error::{Error, Result};
use crate::linalg::{
    kron, matrix_function, partial_trace, support, trace_norm, CMatrix, HermitianOperator, MatrixFunction,
    Subsystem,
};
use crate::sdp::{solve_with, Constraint, HermitianSdp, SdpSolution, SolverOptions, SparseHermitian, StartPoint};
use crate::state::{purify, reduced_state, root_fidelity, BipartiteState, CqEnsemble, DensityOperator, PureState};

/// Trace-leakage bound above which `D_∞` is infinite.
pub const SUPPORT_LEAK_TOL: f64 = 1e-9;
/// Smallest admissible squared Schmidt coefficient of a target state.
pub const SCHMIDT_TOL: f64 = 1e-9;
/// Tolerance used to validate the structural cases of [`closed_form`].
pub const STRUCTURE_TOL: f64 = 1e-9;

/// An entropy value together with the solver run that certifies it.
#[derive(Clone, Debug)]
pub struct EntropyReport {
    pub quantity: &'static str,
    pub value_bits: f64,
    pub certificate: SdpSolution,
    /// Normalized optimal `σ_B`, when the quantity has one.
    pub optimizer_sigma: Option<DensityOperator>,
    /// Optimal `E_AB`, viewed as the Choi matrix of a unital map `A → B`.
    pub dual_optimizer: Option<ChoiMatrix>,
    pub gap: f64,
}

/// The recovery map built from an optimal `E_AB`.
#[derive(Clone, Debug)]
pub struct RecoveryCertificate {
    /// CPTP map `B → A′`.
    pub channel: ChoiMatrix,
    /// `d_A·⟨Φ|(id⊗ℱ)(ρ_AB)|Φ⟩`, recomputed from the channel.
    pub achieved_overlap: f64,
    /// `2^{−H_min(A|B)}`.
    pub predicted: f64,
    /// Whether `d_A ≤ d_B`.
    pub dims_ordered: bool,
}

#[derive(Clone, Debug)]
pub struct CorrelationReport {
    pub value: f64,
    pub recovery: RecoveryCertificate,
    pub entropy: EntropyReport,
}

#[derive(Clone, Debug)]
pub struct GuessReport {
    pub probability: f64,
    pub povm: Vec<HermitianOperator>,
    pub certificate: SdpSolution,
}

#[derive(Clone, Debug)]
pub struct DecouplingReport {
    /// `d_A·max_σ F(ρ_AB, τ_A⊗σ)²`.
    pub value: f64,
    /// The maximal root fidelity.
    pub fidelity: f64,
    pub optimizer_sigma: DensityOperator,
    pub certificate: SdpSolution,
}

#[derive(Clone, Debug)]
pub struct SecrecyReport {
    pub value: f64,
    /// `(Σ_x √p_x·F(ρ_x, σ*))²` at the SDP optimizer.
    pub block_formula: f64,
    pub optimizer_sigma: DensityOperator,
    pub certificate: SdpSolution,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedFormCase {
    Product,
    Pure,
}

/// `(h_min_bits, h_max_bits)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClosedForm {
    pub h_min_bits: f64,
    pub h_max_bits: f64,
}

/// Entry point carrying the solver configuration.
#[derive(Clone, Debug, Default)]
pub struct Engine {
    pub options: SolverOptions,
}

/// `D_∞(τ‖τ′) = log₂ λ_max(τ′^{−1/2} τ τ′^{−1/2})` on the support of `τ′`;
/// `+∞` when `τ` leaks out of that support.
pub fn d_infinity(tau: &HermitianOperator, tau_prime: &HermitianOperator) -> Result<f64> {
    if tau.dim() != tau_prime.dim() {
        return Err(Error::DimensionMismatch {
            expected: tau_prime.dim(),
            got: tau.dim(),
        });
    }
    let (vals, vecs) = support(tau_prime)?;
    let inside = HermitianOperator::hermitian_part(vecs.adjoint() * tau.matrix() * &vecs);
    if tau.trace() - inside.trace() > SUPPORT_LEAK_TOL {
        return Ok(f64::INFINITY);
    }
    if vals.is_empty() {
        return Ok(f64::NEG_INFINITY);
    }
    let scale = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        vals.len(),
        vals.iter().map(|v| Complex64::new(1.0 / v.sqrt(), 0.0)),
    ));
    Ok(inside.conjugate_by(&scale).lambda_max()?.log2())
}

/// Constraints `⟨A_i, X⟩ = b_i` fixing the Hermitian matrix `X[off.., off..]`
/// of size `target.dim()` to `target`.
fn pin_block(dim: usize, off: usize, target: &CMatrix) -> Vec<Constraint> {
    let n = target.nrows();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in i..n {
            out.push(Constraint::single(
                0,
                SparseHermitian::real_part(dim, off + i, off + j),
                target[(i, j)].re,
            ));
            if i != j {
                out.push(Constraint::single(
                    0,
                    SparseHermitian::imag_part(dim, off + i, off + j),
                    target[(i, j)].im,
                ));
            }
        }
    }
    out
}

/// The solver problem behind `min{tr σ : id_A⊗σ ⪰ ρ}`: maximize `tr(ρE)` over
/// `E ⪰ 0` with `tr_A E = id_B`.
pub fn h_min_problem(rho: &HermitianOperator, d_a: usize, d_b: usize) -> Result<HermitianSdp> {
    let n = d_a * d_b;
    if rho.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: rho.dim() });
    }
    let mut constraints = Vec::with_capacity(d_b * d_b);
    for b in 0..d_b {
        for b2 in b..d_b {
            let mut re = SparseHermitian::empty(n);
            for a in 0..d_a {
                re.push_real_part(a * d_b + b, a * d_b + b2, 1.0);
            }
            constraints.push(Constraint::single(0, re, if b == b2 { 1.0 } else { 0.0 }));
            if b != b2 {
                let mut im = SparseHermitian::empty(n);
                for a in 0..d_a {
                    im.push_imag_part(a * d_b + b, a * d_b + b2, 1.0);
                }
                constraints.push(Constraint::single(0, im, 0.0));
            }
        }
    }
    HermitianSdp::new(vec![n], vec![rho.scale(-1.0)], constraints)
}

/// Multipliers of [`h_min_problem`] for `σ = c·id_B`.
fn scalar_sigma_multipliers(d_b: usize, c: f64) -> Vec<f64> {
    let mut y = Vec::with_capacity(d_b * d_b);
    for b in 0..d_b {
        for b2 in b..d_b {
            y.push(if b == b2 { -c } else { 0.0 });
            if b != b2 {
                y.push(0.0);
            }
        }
    }
    y
}

/// `M^{-1/2}·X·M^{-1/2}`-type correction so that the constraint holds exactly.
fn renormalize(x: &HermitianOperator, m: &HermitianOperator, d_a: usize) -> Result<HermitianOperator> {
    let inv = matrix_function(m, MatrixFunction::PinvSqrt)?;
    let k = kron(&CMatrix::identity(d_a, d_a), inv.matrix());
    Ok(x.conjugate_by(&k))
}

struct MinTrace {
    /// `min tr σ` (taken from the multipliers).
    value: f64,
    sigma: HermitianOperator,
    e: HermitianOperator,
    solution: SdpSolution,
}

impl Engine {
    pub fn new(options: SolverOptions) -> Self {
        Self { options }
    }

    fn min_trace_sigma(&self, rho: &HermitianOperator, d_a: usize, d_b: usize) -> Result<MinTrace> {
        let p = h_min_problem(rho, d_a, d_b)?;
        let lam = rho.lambda_max()?.max(f64::MIN_POSITIVE);
        let start = StartPoint {
            x: vec![HermitianOperator::identity(d_a * d_b).scale(1.0 / d_a as f64)],
            y: scalar_sigma_multipliers(d_b, 2.0 * lam),
        };
        let solution = solve_with(&p, &self.options, Some(&start))?.require_optimal()?;
        let y_op = &p.apply_adjoint(&solution.y)[0];
        let sigma = HermitianOperator::hermitian_part(-y_op.view((0, 0), (d_b, d_b)).into_owned());
        let e_raw = &solution.x[0];
        let m = partial_trace(e_raw, d_a, d_b, Subsystem::B)?;
        let e = renormalize(e_raw, &m, d_a)?;
        Ok(MinTrace {
            value: -solution.dual_value,
            sigma,
            e,
            solution,
        })
    }

    pub fn h_min(&self, state: &BipartiteState) -> Result<EntropyReport> {
        let (d_a, d_b) = (state.d_a(), state.d_b());
        let mt = self.min_trace_sigma(state.op(), d_a, d_b)?;
        let sigma_n = mt.sigma.scale(1.0 / mt.sigma.trace());
        Ok(EntropyReport {
            quantity: "h_min",
            value_bits: -mt.value.log2(),
            gap: mt.solution.gap,
            optimizer_sigma: DensityOperator::from_psd_normalized(&sigma_n).ok(),
            dual_optimizer: Some(ChoiMatrix::new(mt.e, d_a, d_b)?),
            certificate: mt.solution,
        })
    }

    /// `H_max(A|B) = −H_min(A|C)` on a purification over `C`.
    pub fn h_max(&self, state: &BipartiteState) -> Result<EntropyReport> {
        let (d_a, d_b) = (state.d_a(), state.d_b());
        let pur = purify(state.rho())?;
        let d_c = pur.ancilla_dim;
        let rho_ac = reduced_state(&pur.state, &[d_a, d_b, d_c], &[true, false, true])?;
        let inner = self.h_min(&BipartiteState::new(rho_ac, d_a, d_c)?)?;
        Ok(EntropyReport {
            quantity: "h_max",
            value_bits: -inner.value_bits,
            gap: inner.gap,
            optimizer_sigma: None,
            dual_optimizer: None,
            certificate: inner.certificate,
        })
    }

    /// Optimal guessing probability of `X` from `B` and the optimal POVM.
    pub fn p_guess(&self, e: &CqEnsemble) -> Result<GuessReport> {
        let nx = e.len();
        let d = e.d_b();
        let weighted: Vec<HermitianOperator> =
            e.probs().iter().zip(e.states()).map(|(p, s)| s.op().scale(*p)).collect();
        let mut constraints = Vec::with_capacity(d * d);
        for b in 0..d {
            for b2 in b..d {
                let terms = (0..nx).map(|x| (x, SparseHermitian::real_part(d, b, b2))).collect();
                constraints.push(Constraint {
                    terms,
                    rhs: if b == b2 { 1.0 } else { 0.0 },
                });
                if b != b2 {
                    let terms = (0..nx).map(|x| (x, SparseHermitian::imag_part(d, b, b2))).collect();
                    constraints.push(Constraint { terms, rhs: 0.0 });
                }
            }
        }
        let p = HermitianSdp::new(vec![d; nx], weighted.iter().map(|w| w.scale(-1.0)).collect(), constraints)?;
        let mut lam = f64::MIN_POSITIVE;
        for w in &weighted {
            lam = lam.max(w.lambda_max()?);
        }
        let start = StartPoint {
            x: vec![HermitianOperator::identity(d).scale(1.0 / nx as f64); nx],
            y: scalar_sigma_multipliers(d, 2.0 * lam),
        };
        let solution = solve_with(&p, &self.options, Some(&start))?.require_optimal()?;
        let total = solution
            .x
            .iter()
            .fold(HermitianOperator::zeros(d), |acc, ex| acc.add(ex));
        let mut povm = Vec::with_capacity(nx);
        for ex in &solution.x {
            povm.push(renormalize(ex, &total, 1)?);
        }
        Ok(GuessReport {
            probability: -solution.dual_value,
            povm,
            certificate: solution,
        })
    }

    /// Maximal singlet fraction and the recovery channel achieving it.
    pub fn q_corr(&self, state: &BipartiteState) -> Result<CorrelationReport> {
        let entropy = self.h_min(state)?;
        let d_a = state.d_a();
        let e = entropy.dual_optimizer.as_ref().expect("h_min sets the dual optimizer");
        let channel = adjoint_channel(e);
        let out = channel.apply_on_second(state.op(), d_a)?;
        let mut overlap = 0.0;
        for a in 0..d_a {
            for a2 in 0..d_a {
                overlap += out.matrix()[(a * d_a + a, a2 * d_a + a2)].re;
            }
        }
        let value = 2f64.powf(-entropy.value_bits);
        Ok(CorrelationReport {
            value,
            recovery: RecoveryCertificate {
                channel,
                achieved_overlap: overlap,
                predicted: value,
                dims_ordered: d_a <= state.d_b(),
            },
            entropy,
        })
    }

    /// `d_A·max_σ F(ρ_AB, τ_A⊗σ_B)²` through the block characterization of the
    /// root fidelity, restricted to the support of `ρ_AB`.
    pub fn q_decpl_direct(&self, state: &BipartiteState) -> Result<DecouplingReport> {
        let (d_a, d_b) = (state.d_a(), state.d_b());
        let n = d_a * d_b;
        let (vals, v) = support(state.op())?;
        let r = vals.len();
        let dim = r + n;

        let mut c = CMatrix::zeros(dim, dim);
        let half = Complex64::new(-0.5, 0.0);
        for i in 0..n {
            for k in 0..r {
                c[(k, r + i)] = half * v[(i, k)].conj();
                c[(r + i, k)] = half * v[(i, k)];
            }
        }
        let lambda = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            r,
            vals.iter().map(|&x| Complex64::new(x, 0.0)),
        ));
        let mut constraints = pin_block(dim, 0, &lambda);
        let idx = |a: usize, b: usize| r + a * d_b + b;
        for a in 1..d_a {
            for b in 0..d_b {
                for b2 in b..d_b {
                    let mut re = SparseHermitian::empty(dim);
                    re.push_real_part(idx(a, b), idx(a, b2), 1.0);
                    re.push_real_part(idx(0, b), idx(0, b2), -1.0);
                    constraints.push(Constraint::single(0, re, 0.0));
                    if b != b2 {
                        let mut im = SparseHermitian::empty(dim);
                        im.push_imag_part(idx(a, b), idx(a, b2), 1.0);
                        im.push_imag_part(idx(0, b), idx(0, b2), -1.0);
                        constraints.push(Constraint::single(0, im, 0.0));
                    }
                }
            }
        }
        for a in 0..d_a {
            for a2 in a + 1..d_a {
                for b in 0..d_b {
                    for b2 in 0..d_b {
                        let (i, j) = (idx(a, b), idx(a2, b2));
                        constraints.push(Constraint::single(0, SparseHermitian::real_part(dim, i, j), 0.0));
                        constraints.push(Constraint::single(0, SparseHermitian::imag_part(dim, i, j), 0.0));
                    }
                }
            }
        }
        let mut tr = SparseHermitian::empty(dim);
        for i in 0..n {
            tr.push_real_part(r + i, r + i, 1.0);
        }
        constraints.push(Constraint::single(0, tr, 1.0));
        let m = constraints.len();
        let p = HermitianSdp::new(vec![dim], vec![HermitianOperator::hermitian_part(c)], constraints)?;

        let mut x0 = CMatrix::zeros(dim, dim);
        x0.view_mut((0, 0), (r, r)).copy_from(&lambda);
        for i in 0..n {
            x0[(r + i, r + i)] = Complex64::new(1.0 / n as f64, 0.0);
        }
        // 𝒜*(y) = −id: −1 on the diagonal pins of Λ and on the trace row
        let mut y0 = vec![0.0; m];
        let mut k = 0;
        for i in 0..r {
            for j in i..r {
                if i == j {
                    y0[k] = -1.0;
                }
                k += if i == j { 1 } else { 2 };
            }
        }
        y0[m - 1] = -1.0;
        let start = StartPoint {
            x: vec![HermitianOperator::hermitian_part(x0)],
            y: y0,
        };
        let solution = solve_with(&p, &self.options, Some(&start))?.require_optimal()?;

        let fidelity = -0.5 * (solution.primal_value + solution.dual_value);
        let y22 = HermitianOperator::hermitian_part(solution.x[0].matrix().view((r, r), (n, n)).into_owned());
        let sigma = partial_trace(&y22, d_a, d_b, Subsystem::B)?;
        let optimizer_sigma = DensityOperator::from_psd_normalized(&sigma)?;
        Ok(DecouplingReport {
            value: d_a as f64 * fidelity * fidelity,
            fidelity,
            optimizer_sigma,
            certificate: solution,
        })
    }

    /// `max_σ (Σ_x √p_x·F(ρ_x, σ))²`, solved as the decoupling SDP of the
    /// embedded cq state and re-evaluated through the block formula.
    pub fn p_secr(&self, e: &CqEnsemble) -> Result<SecrecyReport> {
        let rep = self.q_decpl_direct(&crate::state::cq_to_density(e))?;
        let block_formula = secrecy_block_formula(e, &rep.optimizer_sigma)?;
        Ok(SecrecyReport {
            value: rep.value,
            block_formula,
            optimizer_sigma: rep.optimizer_sigma,
            certificate: rep.certificate,
        })
    }

    /// `max_ℱ ⟨Ψ|(id_A⊗ℱ)(ρ_AB)|Ψ⟩` over CPTP `ℱ: B → A′`, where `A′` has
    /// dimension `target.dim() / d_A`.
    pub fn max_fidelity_with_target(&self, state: &BipartiteState, target: &PureState) -> Result<f64> {
        let d_a = state.d_a();
        if !target.dim().is_multiple_of(d_a) {
            return Err(Error::DimensionMismatch {
                expected: d_a,
                got: target.dim(),
            });
        }
        let d_ap = target.dim() / d_a;
        let k = CMatrix::from_fn(d_a, d_ap, |a, x| target.amplitudes()[a * d_ap + x]);
        let smallest = k
            .singular_values()
            .iter()
            .fold(f64::INFINITY, |acc, s| acc.min(s * s));
        if smallest <= SCHMIDT_TOL {
            return Err(Error::SchmidtRankDeficient(smallest));
        }
        // ⟨Ψ|(id⊗ℱ)ρ|Ψ⟩ = ⟨Γ|(id⊗ℱ)ρ′|Γ⟩ with ρ′ = (K†⊗id)ρ(K⊗id), Γ = Σ_x |xx⟩
        let lift = kron(&k.adjoint(), &CMatrix::identity(state.d_b(), state.d_b()));
        let rho_p = state.op().conjugate_by(&lift);
        Ok(self.min_trace_sigma(&rho_p, d_ap, state.d_b())?.value)
    }
}

/// `(Σ_x √p_x·F(ρ_x, σ))²`.
pub fn secrecy_block_formula(e: &CqEnsemble, sigma: &DensityOperator) -> Result<f64> {
    let mut s = 0.0;
    for (p, rho) in e.probs().iter().zip(e.states()) {
        s += p.sqrt() * root_fidelity(rho, sigma)?;
    }
    Ok(s * s)
}

/// Closed-form entropies for product and pure states, after checking the case.
pub fn closed_form(state: &BipartiteState, case: ClosedFormCase) -> Result<ClosedForm> {
    let rho_a = state.marginal_a();
    let spec_a = rho_a.op().eig()?;
    let lmax = spec_a.max();
    let tr_sqrt: f64 = spec_a.values.iter().map(|x| x.max(0.0).sqrt()).sum();
    match case {
        ClosedFormCase::Product => {
            let prod = BipartiteState::product(&rho_a, &state.marginal_b());
            let dist = trace_norm(&state.op().sub(prod.op()))?;
            if dist > STRUCTURE_TOL {
                return Err(Error::Structure(format!("state is not a product (distance {dist:.3e})")));
            }
            Ok(ClosedForm {
                h_min_bits: -lmax.log2(),
                h_max_bits: 2.0 * tr_sqrt.log2(),
            })
        }
        ClosedFormCase::Pure => {
            let top = state.op().lambda_max()?;
            if top < 1.0 - STRUCTURE_TOL {
                return Err(Error::Structure(format!("state is not pure (largest eigenvalue {top:.12})")));
            }
            Ok(ClosedForm {
                h_min_bits: -2.0 * tr_sqrt.log2(),
                h_max_bits: lmax.log2(),
            })
        }
    }
}

pub fn h_min(state: &BipartiteState) -> Result<EntropyReport> {
    Engine::default().h_min(state)
}

pub fn h_max(state: &BipartiteState) -> Result<EntropyReport> {
    Engine::default().h_max(state)
}

pub fn p_guess(e: &CqEnsemble) -> Result<GuessReport> {
    Engine::default().p_guess(e)
}

pub fn q_corr(state: &BipartiteState) -> Result<CorrelationReport> {
    Engine::default().q_corr(state)
}

pub fn q_decpl_direct(state: &BipartiteState) -> Result<DecouplingReport> {
    Engine::default().q_decpl_direct(state)
}

pub fn p_secr(e: &CqEnsemble) -> Result<SecrecyReport> {
    Engine::default().p_secr(e)
}

pub fn max_fidelity_with_target(state: &BipartiteState, target: &PureState) -> Result<f64> {
    Engine::default().max_fidelity_with_target(state, target)
}
