// Copyright 2026 The insitu Authors
// SPDX-License-Identifier: Apache-2.0

//! Gate-design problems: maps from a control vector to the implemented
//! unitary, paired with a target gate.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::quantum::{cnot, expm_hermitian, gate_fidelity, pauli, Axis, Hermitian, Unitary};
use crate::{Error, Result};

/// A point in the control space: one amplitude per piecewise-constant
/// segment and control channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ControlVector(Vec<f64>);

impl ControlVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "control vector",
            });
        }
        Ok(Self(values))
    }

    pub fn zeros(p: usize) -> Self {
        Self(vec![0.0; p])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// `self + scale * direction`.
    pub fn offset(&self, scale: f64, direction: &[f64]) -> ControlVector {
        debug_assert_eq!(self.0.len(), direction.len());
        Self(
            self.0
                .iter()
                .zip(direction)
                .map(|(c, d)| c + scale * d)
                .collect(),
        )
    }

    /// Euclidean distance to `other`.
    pub fn distance(&self, other: &ControlVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl From<ControlVector> for Vec<f64> {
    fn from(c: ControlVector) -> Self {
        c.0
    }
}

/// A control problem: piecewise-constant dynamics plus a target gate.
pub trait ControlProblem: fmt::Debug + Send + Sync {
    /// Number of control parameters `p`.
    fn control_dim(&self) -> usize;

    /// Hilbert-space dimension `d`.
    fn system_dim(&self) -> usize;

    fn target(&self) -> &Unitary;

    /// Propagator implemented by the controls.
    fn unitary(&self, controls: &ControlVector) -> Result<Unitary>;

    /// Exact fidelity of the implemented gate to the target.
    fn true_fidelity(&self, controls: &ControlVector) -> Result<f64> {
        gate_fidelity(&self.unitary(controls)?, self.target())
    }

    fn check_len(&self, controls: &ControlVector) -> Result<()> {
        if controls.len() != self.control_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.control_dim(),
                found: controls.len(),
            });
        }
        Ok(())
    }
}

/// Product of segment exponentials, earliest segment rightmost. Builds each
/// segment Hamiltonian on the fly to avoid holding the whole list.
fn ordered_product<F>(d: usize, segments: usize, dt: f64, mut hamiltonian: F) -> Result<Unitary>
where
    F: FnMut(usize) -> Hermitian,
{
    let mut total = DMatrix::<Complex64>::identity(d, d);
    for j in 0..segments {
        let step = expm_hermitian(&hamiltonian(j), dt)?;
        total = step.matrix() * total;
    }
    Unitary::new(total)
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and positive, got {value}"),
        });
    }
    Ok(())
}

/// Random Hermitian drift error `ΔH` with a prescribed spectral norm.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftPerturbation {
    operator: Hermitian,
    norm: f64,
}

impl DriftPerturbation {
    /// Wraps an explicit operator, recording its spectral norm.
    pub fn from_operator(operator: Hermitian) -> Self {
        let norm = operator.spectral_norm();
        Self { operator, norm }
    }

    pub fn zero(d: usize) -> Self {
        Self {
            operator: Hermitian::zeros(d),
            norm: 0.0,
        }
    }

    pub fn operator(&self) -> &Hermitian {
        &self.operator
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }
}

/// GUE-style random Hermitian matrix (real Gaussian diagonal, complex
/// Gaussian upper triangle) rescaled to spectral norm `norm`.
pub fn random_drift_perturbation<R: Rng + ?Sized>(
    d: usize,
    norm: f64,
    rng: &mut R,
) -> Result<DriftPerturbation> {
    check_positive("norm", norm)?;
    if d == 0 {
        return Err(Error::InvalidParameter {
            name: "d",
            reason: "dimension must be at least 1".into(),
        });
    }
    let mut m = DMatrix::<Complex64>::zeros(d, d);
    let off_scale = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..d {
        let diag: f64 = rng.sample(StandardNormal);
        m[(i, i)] = Complex64::new(diag, 0.0);
        for j in (i + 1)..d {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let z = Complex64::new(re * off_scale, im * off_scale);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    let raw = Hermitian::new(m)?;
    let scale = norm / raw.spectral_norm();
    let operator = &raw * scale;
    Ok(DriftPerturbation { operator, norm })
}

/// Single qubit with drift `ω₀ Z` (plus an optional mis-modelled `ΔH`) and
/// a piecewise-constant `X` control on each of `segments` intervals.
#[derive(Clone, Debug)]
pub struct SingleQubitProblem {
    omega0: f64,
    segments: usize,
    dt: f64,
    target: Unitary,
    perturbation: Option<DriftPerturbation>,
    drift: Hermitian,
    control: Hermitian,
}

impl SingleQubitProblem {
    pub const DEFAULT_OMEGA0: f64 = 1.0;
    pub const DEFAULT_SEGMENTS: usize = 10;
    pub const DEFAULT_DT: f64 = 1.0;

    pub fn new(omega0: f64, segments: usize, dt: f64, target: Unitary) -> Result<Self> {
        if segments == 0 {
            return Err(Error::InvalidParameter {
                name: "segments",
                reason: "at least one segment required".into(),
            });
        }
        check_positive("dt", dt)?;
        if !omega0.is_finite() {
            return Err(Error::NonFinite { what: "omega0" });
        }
        if target.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: target.dim(),
            });
        }
        let drift = &pauli(Axis::Z, 0, 1)? * omega0;
        Ok(Self {
            omega0,
            segments,
            dt,
            target,
            perturbation: None,
            drift,
            control: pauli(Axis::X, 0, 1)?,
        })
    }

    /// Default parameters (`ω₀ = 1`, 10 segments, `dt = 1`).
    pub fn with_target(target: Unitary) -> Result<Self> {
        Self::new(
            Self::DEFAULT_OMEGA0,
            Self::DEFAULT_SEGMENTS,
            Self::DEFAULT_DT,
            target,
        )
    }

    /// Same problem with drift `ω₀ Z + ΔH`; the target is unchanged.
    pub fn perturbed(&self, delta: &DriftPerturbation) -> Result<Self> {
        if delta.operator.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: delta.operator.dim(),
            });
        }
        let mut out = self.clone();
        out.drift = &self.drift + &delta.operator;
        out.perturbation = Some(delta.clone());
        Ok(out)
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn perturbation(&self) -> Option<&DriftPerturbation> {
        self.perturbation.as_ref()
    }

    pub fn drift(&self) -> &Hermitian {
        &self.drift
    }

    /// Hamiltonian of segment `j` under `controls`.
    pub fn segment_hamiltonian(&self, controls: &ControlVector, j: usize) -> Hermitian {
        let mut h = self.drift.clone();
        h.add_scaled(controls.as_slice()[j], &self.control);
        h
    }
}

impl ControlProblem for SingleQubitProblem {
    fn control_dim(&self) -> usize {
        self.segments
    }

    fn system_dim(&self) -> usize {
        2
    }

    fn target(&self) -> &Unitary {
        &self.target
    }

    fn unitary(&self, controls: &ControlVector) -> Result<Unitary> {
        self.check_len(controls)?;
        ordered_product(2, self.segments, self.dt, |j| {
            self.segment_hamiltonian(controls, j)
        })
    }
}

/// The four control channels of [`CnotProblem`], one amplitude per segment.
#[derive(Clone, Debug, PartialEq)]
pub struct CnotControls {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
}

impl CnotControls {
    /// Concatenates channels in the order `x1, x2, y1, y2`.
    pub fn pack(&self) -> Result<ControlVector> {
        let q = self.x1.len();
        for channel in [&self.x2, &self.y1, &self.y2] {
            if channel.len() != q {
                return Err(Error::DimensionMismatch {
                    expected: q,
                    found: channel.len(),
                });
            }
        }
        let mut values = Vec::with_capacity(4 * q);
        for channel in [&self.x1, &self.x2, &self.y1, &self.y2] {
            values.extend_from_slice(channel);
        }
        ControlVector::new(values)
    }

    pub fn unpack(controls: &ControlVector) -> Result<Self> {
        let p = controls.len();
        if !p.is_multiple_of(4) {
            return Err(Error::InvalidParameter {
                name: "controls",
                reason: format!("length {p} is not a multiple of 4"),
            });
        }
        let q = p / 4;
        let mut chunks = controls
            .as_slice()
            .chunks_exact(q.max(1))
            .map(<[f64]>::to_vec);
        let mut next = || chunks.next().unwrap_or_default();
        Ok(Self {
            x1: next(),
            x2: next(),
            y1: next(),
            y2: next(),
        })
    }
}

/// Two qubits with Zeeman plus Heisenberg-exchange drift
/// `δ₁Z₁ + δ₂Z₂ + (J/2)(X₁X₂ + Y₁Y₂ + Z₁Z₂)` and transverse controls
/// `X₁, X₂, Y₁, Y₂`, each piecewise constant over `segments` intervals.
#[derive(Clone, Debug)]
pub struct CnotProblem {
    delta1: f64,
    delta2: f64,
    exchange: f64,
    segments: usize,
    dt: f64,
    target: Unitary,
    drift: Hermitian,
    controls: [Hermitian; 4],
}

impl CnotProblem {
    pub const DEFAULT_DELTA1: f64 = 1.0;
    pub const DEFAULT_DELTA2: f64 = -1.0;
    pub const DEFAULT_EXCHANGE: f64 = 0.1;
    pub const DEFAULT_SEGMENTS: usize = 10;
    pub const DEFAULT_DT: f64 = 1.0;

    pub fn new(
        delta1: f64,
        delta2: f64,
        exchange: f64,
        segments: usize,
        dt: f64,
        target: Unitary,
    ) -> Result<Self> {
        if segments == 0 {
            return Err(Error::InvalidParameter {
                name: "segments",
                reason: "at least one segment required".into(),
            });
        }
        check_positive("dt", dt)?;
        if ![delta1, delta2, exchange].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                what: "drift parameters",
            });
        }
        if target.dim() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                found: target.dim(),
            });
        }
        let x1 = pauli(Axis::X, 0, 2)?;
        let x2 = pauli(Axis::X, 1, 2)?;
        let y1 = pauli(Axis::Y, 0, 2)?;
        let y2 = pauli(Axis::Y, 1, 2)?;
        let z1 = pauli(Axis::Z, 0, 2)?;
        let z2 = pauli(Axis::Z, 1, 2)?;
        let mut drift = Hermitian::zeros(4);
        drift.add_scaled(delta1, &z1);
        drift.add_scaled(delta2, &z2);
        let coupling = exchange / 2.0;
        for (a, b) in [(&x1, &x2), (&y1, &y2), (&z1, &z2)] {
            drift.add_scaled(coupling, &Hermitian::new(a.matrix() * b.matrix())?);
        }
        Ok(Self {
            delta1,
            delta2,
            exchange,
            segments,
            dt,
            target,
            drift,
            controls: [x1, x2, y1, y2],
        })
    }

    /// Default parameters (`δ₁ = 1`, `δ₂ = -1`, `J = 0.1`, 10 segments,
    /// `dt = 1`) with a CNOT target.
    pub fn standard() -> Self {
        Self::new(
            Self::DEFAULT_DELTA1,
            Self::DEFAULT_DELTA2,
            Self::DEFAULT_EXCHANGE,
            Self::DEFAULT_SEGMENTS,
            Self::DEFAULT_DT,
            cnot(),
        )
        .expect("default parameters are valid")
    }

    /// Same problem with `ΔH` added to the drift; the target is unchanged.
    pub fn perturbed(&self, delta: &DriftPerturbation) -> Result<Self> {
        if delta.operator.dim() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                found: delta.operator.dim(),
            });
        }
        let mut out = self.clone();
        out.drift = &self.drift + &delta.operator;
        Ok(out)
    }

    pub fn delta1(&self) -> f64 {
        self.delta1
    }

    pub fn delta2(&self) -> f64 {
        self.delta2
    }

    pub fn exchange(&self) -> f64 {
        self.exchange
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn drift(&self) -> &Hermitian {
        &self.drift
    }

    /// Hamiltonian of segment `j` under `controls`.
    pub fn segment_hamiltonian(&self, controls: &ControlVector, j: usize) -> Hermitian {
        let q = self.segments;
        let c = controls.as_slice();
        let mut h = self.drift.clone();
        for (channel, op) in self.controls.iter().enumerate() {
            h.add_scaled(c[channel * q + j], op);
        }
        h
    }
}

impl ControlProblem for CnotProblem {
    fn control_dim(&self) -> usize {
        4 * self.segments
    }

    fn system_dim(&self) -> usize {
        4
    }

    fn target(&self) -> &Unitary {
        &self.target
    }

    fn unitary(&self, controls: &ControlVector) -> Result<Unitary> {
        self.check_len(controls)?;
        ordered_product(4, self.segments, self.dt, |j| {
            self.segment_hamiltonian(controls, j)
        })
    }
}
