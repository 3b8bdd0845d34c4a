//! JSON file formats for states, ensembles, targets and Choi matrices.
//!
//! Matrices are row-major arrays of `[re, im]` pairs. Writers print every
//! float with 17 significant digits.

use std::io;
use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::channels::ChoiMatrix;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, HermitianOperator};
use crate::state::{BipartiteState, CqEnsemble, DensityOperator, PureState};

pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    #[serde(rename = "d_A")]
    pub d_a: usize,
    #[serde(rename = "d_B")]
    pub d_b: usize,
    pub matrix: JsonMatrix,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CqFile {
    pub probs: Vec<f64>,
    pub states: Vec<JsonMatrix>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChoiFile {
    pub d_in: usize,
    pub d_out: usize,
    pub matrix: JsonMatrix,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplitudeFile {
    pub amplitudes: Vec<[f64; 2]>,
}

/// A target is either an amplitude vector or a rank-one state file.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum TargetFile {
    Amplitudes(AmplitudeFile),
    State(StateFile),
}

/// Compact JSON with `{:.16e}` floats; non-finite values become `null`.
struct PreciseFormatter;

impl serde_json::ser::Formatter for PreciseFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PreciseFormatter);
    value.serialize(&mut ser).expect("serialization into memory");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn matrix_to_json(m: &CMatrix) -> JsonMatrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn matrix_from_json(rows: &JsonMatrix) -> Result<CMatrix> {
    let n = rows.len();
    for r in rows {
        if r.len() != n {
            return Err(Error::NotSquare { rows: n, cols: r.len() });
        }
    }
    Ok(CMatrix::from_fn(n, n, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
}

fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| {
        if e.line() > 0 {
            let full = e.to_string();
            let suffix = format!(" at line {} column {}", e.line(), e.column());
            let msg = full.strip_suffix(&suffix).unwrap_or(&full);
            Error::Parse(format!("line {} column {}: {msg}", e.line(), e.column()))
        } else {
            Error::Parse(e.to_string())
        }
    })
}

fn density_from_json(rows: &JsonMatrix) -> Result<DensityOperator> {
    DensityOperator::new(HermitianOperator::new(matrix_from_json(rows)?)?)
}

pub fn parse_state(text: &str) -> Result<BipartiteState> {
    let f: StateFile = parse(text)?;
    BipartiteState::new(density_from_json(&f.matrix)?, f.d_a, f.d_b)
}

pub fn parse_cq(text: &str) -> Result<CqEnsemble> {
    let f: CqFile = parse(text)?;
    let states = f.states.iter().map(density_from_json).collect::<Result<Vec<_>>>()?;
    CqEnsemble::new(f.probs, states)
}

pub fn parse_choi(text: &str) -> Result<ChoiMatrix> {
    let f: ChoiFile = parse(text)?;
    ChoiMatrix::new(HermitianOperator::new(matrix_from_json(&f.matrix)?)?, f.d_in, f.d_out)
}

/// Reads a pure target from amplitudes or from a rank-one density matrix.
pub fn parse_target(text: &str) -> Result<PureState> {
    match parse::<TargetFile>(text)? {
        TargetFile::Amplitudes(a) => PureState::new(CVector::from_iterator(
            a.amplitudes.len(),
            a.amplitudes.iter().map(|z| Complex64::new(z[0], z[1])),
        )),
        TargetFile::State(s) => {
            let rho = density_from_json(&s.matrix)?;
            let eig = rho.op().eig()?;
            if eig.max() < 1.0 - crate::state::TRACE_TOL {
                return Err(Error::InvalidState("target density matrix is not pure".into()));
            }
            PureState::normalized(eig.vectors.column(0).into_owned())
        }
    }
}

fn read(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

pub fn read_state(path: &Path) -> Result<BipartiteState> {
    parse_state(&read(path)?)
}

pub fn read_cq(path: &Path) -> Result<CqEnsemble> {
    parse_cq(&read(path)?)
}

pub fn read_target(path: &Path) -> Result<PureState> {
    parse_target(&read(path)?)
}

pub fn read_choi(path: &Path) -> Result<ChoiMatrix> {
    parse_choi(&read(path)?)
}

pub fn state_to_json(s: &BipartiteState) -> String {
    to_json_string(&StateFile {
        d_a: s.d_a(),
        d_b: s.d_b(),
        matrix: matrix_to_json(s.op().matrix()),
    })
}

pub fn cq_to_json(e: &CqEnsemble) -> String {
    to_json_string(&CqFile {
        probs: e.probs().to_vec(),
        states: e.states().iter().map(|s| matrix_to_json(s.matrix())).collect(),
    })
}

pub fn choi_to_json(j: &ChoiMatrix) -> String {
    to_json_string(&ChoiFile {
        d_in: j.d_in(),
        d_out: j.d_out(),
        matrix: matrix_to_json(j.op().matrix()),
    })
}

pub fn target_to_json(psi: &PureState) -> String {
    to_json_string(&AmplitudeFile {
        amplitudes: psi.amplitudes().iter().map(|z| [z.re, z.im]).collect(),
    })
}
