//! JSON file formats. Complex numbers are `[re, im]` pairs; targets also
//! accept plain real numbers. Coins carry both their canonical angles and
//! their matrix so that a reloaded solution reproduces the walk exactly.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::engineer::EngineeringSolution;
use crate::error::{QwError, Result};
use crate::mat2::Mat2;
use crate::walk::{plus_bra, run_walk};
use crate::{CoinOperator, Complex64, TargetSuperposition, WalkerState};

/// A real number or a `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AmplitudeRepr {
    Real(f64),
    Complex(Complex64),
}

impl AmplitudeRepr {
    pub fn value(self) -> Complex64 {
        match self {
            AmplitudeRepr::Real(x) => Complex64::new(x, 0.0),
            AmplitudeRepr::Complex(z) => z,
        }
    }
}

/// `{"amplitudes": [...]}` over sites `1..=len`; normalized on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetFile {
    pub amplitudes: Vec<AmplitudeRepr>,
}

impl TargetFile {
    pub fn from_target(t: &TargetSuperposition) -> Self {
        Self {
            amplitudes: t.amps().iter().map(|&z| AmplitudeRepr::Complex(z)).collect(),
        }
    }

    pub fn to_target(&self) -> Result<TargetSuperposition> {
        TargetSuperposition::new(self.amplitudes.iter().map(|a| a.value()).collect())
    }
}

/// A walker state: `amplitudes[k] = (up, down)` of site `origin + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub origin: i64,
    pub amplitudes: Vec<[Complex64; 2]>,
}

impl StateFile {
    /// Stores the phase-canonical representative.
    pub fn from_state(s: &WalkerState) -> Self {
        let c = s.phase_canonical();
        Self {
            origin: c.origin(),
            amplitudes: c.amps().to_vec(),
        }
    }

    pub fn to_state(&self) -> WalkerState {
        WalkerState::new(self.origin, self.amplitudes.clone())
    }
}

/// A coin: canonical angles, global phase and (optionally) the matrix rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoinRecord {
    pub theta: f64,
    pub xi: f64,
    pub zeta: f64,
    #[serde(default)]
    pub phase: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub matrix: Option<[[Complex64; 2]; 2]>,
}

impl CoinRecord {
    pub fn from_coin(c: &CoinOperator) -> Self {
        let p = c.params();
        Self {
            theta: p.theta,
            xi: p.xi,
            zeta: p.zeta,
            phase: p.phase,
            matrix: Some(c.matrix().m),
        }
    }

    /// The matrix when present, otherwise the angles.
    pub fn to_coin(&self) -> Result<CoinOperator> {
        match self.matrix {
            Some(m) => CoinOperator::from_matrix(Mat2 { m }),
            None => {
                let mut p = crate::CoinParams::new(self.theta, self.xi, self.zeta);
                p.phase = self.phase;
                Ok(CoinOperator::from_coin_params_unchecked(&p))
            }
        }
    }
}

fn default_up() -> [Complex64; 2] {
    [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]
}

/// A walk to simulate: initial coin, coins in application order and an
/// optional projection bra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkFile {
    #[serde(default = "default_up")]
    pub initial_coin: [Complex64; 2],
    pub coins: Vec<CoinRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub projection: Option<[Complex64; 2]>,
}

impl WalkFile {
    pub fn coins(&self) -> Result<Vec<CoinOperator>> {
        self.coins.iter().map(CoinRecord::to_coin).collect()
    }

    pub fn projection_bra(&self) -> [Complex64; 2] {
        self.projection.unwrap_or_else(plus_bra)
    }
}

/// One engineered solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    /// Interior parameters `d_2..d_n` (empty for optimizer output).
    pub d: Vec<Complex64>,
    pub probability: f64,
    pub fidelity: f64,
    pub initial_coin: [Complex64; 2],
    pub projection: [Complex64; 2],
    pub coins: Vec<CoinRecord>,
    /// Phase-canonical pre-measurement state.
    pub full_state: StateFile,
}

impl SolutionRecord {
    pub fn from_solution(s: &EngineeringSolution) -> Self {
        Self {
            d: s.d.clone(),
            probability: s.probability,
            fidelity: s.fidelity,
            initial_coin: s.initial_coin,
            projection: s.projection,
            coins: s.coins.iter().map(CoinRecord::from_coin).collect(),
            full_state: StateFile::from_state(&s.full_state),
        }
    }

    /// Rebuilds the solution; the full state is recomputed from the coins.
    pub fn to_solution(&self) -> Result<EngineeringSolution> {
        let coins = self.coins.iter().map(CoinRecord::to_coin).collect::<Result<Vec<_>>>()?;
        let full_state = run_walk(self.initial_coin, &coins)?;
        Ok(EngineeringSolution {
            d: self.d.clone(),
            full_state,
            coins,
            initial_coin: self.initial_coin,
            projection: self.projection,
            probability: self.probability,
            fidelity: self.fidelity,
        })
    }
}

/// Extra report of an optimizer run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerReport {
    pub iterations: usize,
    pub converged: bool,
    pub restart: usize,
}

/// Output of `engineer`, `optimize` and `reproduce`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionsFile {
    pub target: Vec<Complex64>,
    pub solutions: Vec<SolutionRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diagnostic: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub optimizer: Option<OptimizerReport>,
}

impl SolutionsFile {
    pub fn target(&self) -> Result<TargetSuperposition> {
        TargetSuperposition::new(self.target.clone())
    }
}

/// Machine-readable error report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorObject {
    pub code: i32,
    pub message: String,
    pub context: serde_json::Value,
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let text = fs::read_to_string(path.as_ref())?;
    Ok(serde_json::from_str(&text)?)
}

/// Pretty JSON with a trailing newline; deterministic for equal values.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    fs::write(path.as_ref(), to_json(value)?)?;
    Ok(())
}

/// Rejects a malformed walk file early with a domain error.
pub fn check_walk_file(w: &WalkFile) -> Result<()> {
    if w.coins.is_empty() {
        return Err(QwError::domain("a walk needs at least one coin"));
    }
    Ok(())
}
