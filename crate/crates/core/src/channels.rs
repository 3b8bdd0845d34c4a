//! Choi–Jamiołkowski representation of linear maps.
//!
//! A map `ℰ: L(A') → L(B)` is stored as `J(ℰ) = d_A·(id_A ⊗ ℰ)(|Φ⟩⟨Φ|)
//! = Σ_{x,y} |x⟩⟨y| ⊗ ℰ(|x⟩⟨y|)`, input factor first. With this
//! normalization ℰ is trace preserving iff `tr_out J = id_in` and unital iff
//! `tr_in J = id_out`.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{max_abs_entry, partial_trace_systems, CMatrix, HermitianOperator};
use crate::state::{haar_isometry, DensityOperator};

/// Residual bound used by [`classify`].
pub const CLASSIFY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct ChoiMatrix {
    op: HermitianOperator,
    d_in: usize,
    d_out: usize,
}

/// CP / trace-preserving / unital flags with the residuals they were decided on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MapClass {
    pub cp: bool,
    pub trace_preserving: bool,
    pub unital: bool,
    /// Smallest eigenvalue of the Choi matrix.
    pub min_eigenvalue: f64,
    /// `‖tr_out J − id_in‖_max`.
    pub tp_residual: f64,
    /// `‖tr_in J − id_out‖_max`.
    pub unital_residual: f64,
}

impl ChoiMatrix {
    pub fn new(op: HermitianOperator, d_in: usize, d_out: usize) -> Result<Self> {
        if d_in == 0 || d_out == 0 {
            return Err(Error::InvalidState("channel dimensions must be positive".into()));
        }
        if op.dim() != d_in * d_out {
            return Err(Error::DimensionMismatch {
                expected: d_in * d_out,
                got: op.dim(),
            });
        }
        Ok(Self { op, d_in, d_out })
    }

    /// `J = Σ_{x,y} |x⟩⟨y| ⊗ |x⟩⟨y|`.
    pub fn identity(d: usize) -> Self {
        let mut m = CMatrix::zeros(d * d, d * d);
        for x in 0..d {
            for y in 0..d {
                m[(x * d + x, y * d + y)] = Complex64::new(1.0, 0.0);
            }
        }
        Self {
            op: HermitianOperator::hermitian_part(m),
            d_in: d,
            d_out: d,
        }
    }

    /// The map `ρ ↦ tr(ρ)·ω`.
    pub fn trace_and_prepare(d_in: usize, omega: &DensityOperator) -> Self {
        let m = CMatrix::identity(d_in, d_in).kronecker(omega.matrix());
        Self {
            op: HermitianOperator::hermitian_part(m),
            d_in,
            d_out: omega.dim(),
        }
    }

    /// The map `ρ ↦ tr(ρ)·id/d_out`.
    pub fn fully_depolarizing(d_in: usize, d_out: usize) -> Self {
        Self::trace_and_prepare(d_in, &DensityOperator::maximally_mixed(d_out))
    }

    /// Choi matrix of `ρ ↦ Σ_k K_k ρ K_k†`; each `K_k` is `d_out × d_in`.
    pub fn from_kraus(kraus: &[CMatrix]) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::InvalidState("empty Kraus family".into()))?;
        let (d_out, d_in) = first.shape();
        let mut m = CMatrix::zeros(d_in * d_out, d_in * d_out);
        for k in kraus {
            if k.shape() != (d_out, d_in) {
                return Err(Error::DimensionMismatch {
                    expected: d_out * d_in,
                    got: k.nrows() * k.ncols(),
                });
            }
            // column (x) of K is K|x⟩
            for x in 0..d_in {
                for y in 0..d_in {
                    for b in 0..d_out {
                        for b2 in 0..d_out {
                            m[(x * d_out + b, y * d_out + b2)] += k[(b, x)] * k[(b2, y)].conj();
                        }
                    }
                }
            }
        }
        Ok(Self {
            op: HermitianOperator::hermitian_part(m),
            d_in,
            d_out,
        })
    }

    /// Random CPTP map from a Haar isometry `A' → B⊗E` followed by `tr_E`.
    /// `d_env` is raised to `⌈d_in/d_out⌉` when smaller.
    pub fn random_cptp<R: Rng + ?Sized>(rng: &mut R, d_in: usize, d_out: usize, d_env: usize) -> Self {
        let d_env = d_env.max(d_in.div_ceil(d_out));
        let v = haar_isometry(rng, d_out * d_env, d_in);
        let kraus: Vec<CMatrix> = (0..d_env)
            .map(|e| CMatrix::from_fn(d_out, d_in, |b, x| v[(b * d_env + e, x)]))
            .collect();
        Self::from_kraus(&kraus).expect("consistent Kraus shapes")
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    /// `ℰ(M) = tr_in[(Mᵀ ⊗ id) J]` for any `d_in × d_in` matrix `M`.
    pub fn apply_matrix(&self, m: &CMatrix) -> Result<CMatrix> {
        if m.nrows() != self.d_in || m.ncols() != self.d_in {
            return Err(Error::DimensionMismatch {
                expected: self.d_in,
                got: m.nrows(),
            });
        }
        let (di, d) = (self.d_in, self.d_out);
        let j = self.op.matrix();
        let mut out = CMatrix::zeros(d, d);
        for x in 0..di {
            for y in 0..di {
                let c = m[(x, y)];
                if c == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for b in 0..d {
                    for b2 in 0..d {
                        out[(b, b2)] += c * j[(x * d + b, y * d + b2)];
                    }
                }
            }
        }
        Ok(out)
    }

    /// `(id_R ⊗ ℰ)(ρ)` for an operator on `R ⊗ A'` with `R` of dimension `d_r`.
    pub fn apply_on_second(&self, rho: &HermitianOperator, d_r: usize) -> Result<HermitianOperator> {
        if rho.dim() != d_r * self.d_in {
            return Err(Error::DimensionMismatch {
                expected: d_r * self.d_in,
                got: rho.dim(),
            });
        }
        let (di, d) = (self.d_in, self.d_out);
        let mut out = CMatrix::zeros(d_r * d, d_r * d);
        for a in 0..d_r {
            for a2 in 0..d_r {
                let block = rho.matrix().view((a * di, a2 * di), (di, di)).into_owned();
                let img = self.apply_matrix(&block)?;
                out.view_mut((a * d, a2 * d), (d, d)).copy_from(&img);
            }
        }
        Ok(HermitianOperator::hermitian_part(out))
    }
}

/// `ℰ(ρ)`.
pub fn apply_channel(j: &ChoiMatrix, rho: &HermitianOperator) -> Result<HermitianOperator> {
    j.apply_matrix(rho.matrix()).map(HermitianOperator::hermitian_part)
}

/// Choi matrix of `ℰ†`, obtained by swapping the tensor factors and conjugating:
/// `J(ℰ†)[(b,x),(b',y)] = conj(J(ℰ)[(x,b),(y,b')])`.
pub fn adjoint_channel(j: &ChoiMatrix) -> ChoiMatrix {
    let (di, d) = (j.d_in, j.d_out);
    let src = j.op.matrix();
    let mut m = CMatrix::zeros(di * d, di * d);
    for x in 0..di {
        for b in 0..d {
            for y in 0..di {
                for b2 in 0..d {
                    m[(b * di + x, b2 * di + y)] = src[(x * d + b, y * d + b2)].conj();
                }
            }
        }
    }
    ChoiMatrix {
        op: HermitianOperator::hermitian_part(m),
        d_in: d,
        d_out: di,
    }
}

pub fn classify(j: &ChoiMatrix) -> Result<MapClass> {
    let min_eigenvalue = j.op.eig()?.min();
    let dims = [j.d_in, j.d_out];
    let tr_out = partial_trace_systems(j.op.matrix(), &dims, &[true, false])?;
    let tr_in = partial_trace_systems(j.op.matrix(), &dims, &[false, true])?;
    let tp_residual = max_abs_entry(&(tr_out - CMatrix::identity(j.d_in, j.d_in)));
    let unital_residual = max_abs_entry(&(tr_in - CMatrix::identity(j.d_out, j.d_out)));
    Ok(MapClass {
        cp: min_eigenvalue >= -CLASSIFY_TOL,
        trace_preserving: tp_residual <= CLASSIFY_TOL,
        unital: unital_residual <= CLASSIFY_TOL,
        min_eigenvalue,
        tp_residual,
        unital_residual,
    })
}
