//! State-quality and entanglement metrics.
//!
//! Both the fidelity and the concurrence reduce to singular values of
//! `A†B` where `ρ = AA†` and `σ = BB†`. Factoring first (and dropping
//! round-off sized eigenvalues) keeps pure and rank-deficient states exact
//! instead of paying `√ε` for every zero eigenvalue.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, DensityMatrix, TwoModeState, I02, I20};
use crate::linalg::{self, c, C64};

/// Negative eigenvalues down to this are clamped to zero.
pub const CLAMP_TOL: f64 = 1e-9;

/// Two-qubit density matrix over `{|0̄0̄⟩, |0̄1̄⟩, |1̄0̄⟩, |1̄1̄⟩}`, the first
/// qubit being mode 1, with `|0⟩ → |0̄⟩` and `|2⟩ → |1̄⟩` in each mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitDensity(pub Matrix4<C64>);

impl QubitDensity {
    pub fn to_dmatrix(&self) -> DMatrix<C64> {
        DMatrix::from_fn(4, 4, |i, j| self.0[(i, j)])
    }

    /// Applies the local unitary `diag(1, e^{iθ₁}) ⊗ diag(1, e^{iθ₂})`.
    pub fn local_phase(&self, theta1: f64, theta2: f64) -> Self {
        let phase = |k: usize| {
            let (q1, q2) = (k >> 1, k & 1);
            C64::from_polar(1.0, theta1 * q1 as f64 + theta2 * q2 as f64)
        };
        Self(Matrix4::from_fn(|i, j| phase(i) * self.0[(i, j)] * phase(j).conj()))
    }
}

/// Index of the embedded `|0̄1̄⟩ = |0,2⟩`.
pub const Q01: usize = 1;
/// Index of the embedded `|1̄0̄⟩ = |2,0⟩`.
pub const Q10: usize = 2;

/// Anything that can be viewed as a dense square density matrix.
pub trait DenseState {
    fn dense(&self) -> DMatrix<C64>;
}

impl DenseState for DensityMatrix {
    fn dense(&self) -> DMatrix<C64> {
        self.to_dmatrix()
    }
}

impl DenseState for QubitDensity {
    fn dense(&self) -> DMatrix<C64> {
        self.to_dmatrix()
    }
}

impl DenseState for DMatrix<C64> {
    fn dense(&self) -> DMatrix<C64> {
        self.clone()
    }
}

fn factor(m: &DMatrix<C64>, what: &str) -> Result<DMatrix<C64>> {
    let report = fock::physicality_of(m, CLAMP_TOL);
    if !report.hermitian || !report.unit_trace {
        return Err(Error::Unphysical(format!("{what}: {}", report.describe())));
    }
    linalg::psd_factor(m, CLAMP_TOL)
        .map_err(|min| Error::Unphysical(format!("{what}: negative eigenvalue {min:.3e}")))
}

/// `F(ρ, σ) = (Tr √(√ρ σ √ρ))²`.
pub fn fidelity(rho: &impl DenseState, sigma: &impl DenseState) -> Result<f64> {
    let (a, b) = (rho.dense(), sigma.dense());
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(a.nrows(), b.nrows()));
    }
    let fa = factor(&a, "first argument")?;
    let fb = factor(&b, "second argument")?;
    let nuclear: f64 = linalg::singular_values(&(fa.adjoint() * fb)).iter().sum();
    Ok((nuclear * nuclear).clamp(0.0, 1.0))
}

/// Embeds `ρ` in two qubits and filters out `|1,1⟩`.
///
/// Returns the renormalized filtered state and `P = ρ₂₀ + ρ₀₂`, the weight
/// of the state inside the `{|2,0⟩, |0,2⟩}` subspace.
pub fn embed_and_filter(rho: &DensityMatrix) -> Result<(QubitDensity, f64)> {
    rho.checked(CLAMP_TOL)?;
    let p = rho.get(I20, I20).re + rho.get(I02, I02).re;
    if p < 1e-12 {
        return Err(Error::EmptySubspace(p));
    }
    let mut q = Matrix4::zeros();
    let map = [(Q10, I20), (Q01, I02)];
    for &(qi, fi) in &map {
        for &(qj, fj) in &map {
            q[(qi, qj)] = rho.get(fi, fj) / p;
        }
    }
    Ok((QubitDensity(q), p))
}

/// `σ_y ⊗ σ_y` applied to a column index of the two-qubit basis.
fn spin_flip(m: &DMatrix<C64>) -> DMatrix<C64> {
    // σ_y = [[0, -i], [i, 0]]; σ_y⊗σ_y maps |00⟩→−|11⟩, |01⟩→|10⟩, |10⟩→|01⟩, |11⟩→−|00⟩
    let yy = DMatrix::from_row_slice(
        4,
        4,
        &[
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(-1.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(1.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(1.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(-1.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
        ],
    );
    yy * m
}

/// Wootters concurrence `max(0, λ₁ − λ₂ − λ₃ − λ₄)`.
///
/// The `λᵢ` are the square roots of the eigenvalues of `ρρ̃` with
/// `ρ̃ = (σ_y⊗σ_y)ρ*(σ_y⊗σ_y)`. With `ρ = AA†`, `ρ̃ = BB†` for
/// `B = (σ_y⊗σ_y)A*`, so they are the singular values of `A†B`.
pub fn concurrence(rho_t: &QubitDensity) -> Result<f64> {
    let a = factor(&rho_t.to_dmatrix(), "two-qubit state")?;
    let b = spin_flip(&a.map(|z| z.conj()));
    let mut lambdas = linalg::singular_values(&(a.adjoint() * b));
    lambdas.resize(4, 0.0);
    let value = lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3];
    Ok(value.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilteredConcurrence {
    /// `P·C(ρ_t)`, a lower bound on the entanglement of the unfiltered state.
    pub c_nf: f64,
    pub p: f64,
    pub c: f64,
}

pub fn filtered_concurrence(rho: &DensityMatrix) -> Result<FilteredConcurrence> {
    let (rho_t, p) = embed_and_filter(rho)?;
    let c = concurrence(&rho_t)?;
    Ok(FilteredConcurrence {
        c_nf: (p * c).clamp(0.0, 1.0),
        p,
        c,
    })
}

/// `(|2,0⟩ + e^{iφ}|0,2⟩)/√2`, the ideal interference output with
/// delay-line phase `φ`.
pub fn ideal_hom_state(phi: f64) -> DensityMatrix {
    TwoModeState::from_amplitudes(
        c(FRAC_1_SQRT_2, 0.0),
        c(0.0, 0.0),
        C64::from_polar(FRAC_1_SQRT_2, phi),
    )
    .expect("nonzero amplitudes")
    .density()
}

const PHASE_STEP: f64 = 1e-3;

/// Phase `φ` (1e-3 rad grid over `(−π, π]`) maximizing the fidelity with
/// the ideal state of phase `φ`. Returns `(φ, fidelity)`.
pub fn phase_estimate(rho: &DensityMatrix) -> Result<(f64, f64)> {
    rho.checked(CLAMP_TOL)?;
    // fidelity with a pure state is ⟨ψ|ρ|ψ⟩ = ½(ρ₂₀ + ρ₀₂) + Re(ρ_{20,02} e^{iφ})
    let base = 0.5 * (rho.get(I20, I20).re + rho.get(I02, I02).re);
    let corner = rho.get(I20, I02);
    let steps = (2.0 * PI / PHASE_STEP).ceil() as usize;
    let (phi, value) = (1..=steps)
        .map(|k| -PI + (k as f64 * PHASE_STEP).min(2.0 * PI))
        .map(|phi| (phi, base + (corner * C64::from_polar(1.0, phi)).re))
        .fold((0.0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    Ok((phi, value.clamp(0.0, 1.0)))
}

/// Summary written by the `metrics` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub fidelity_vs_ideal: f64,
    /// `[p02, p11, p20]`
    pub populations: [f64; 3],
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "C_nf")]
    pub c_nf: f64,
    pub phase_estimate: f64,
}

impl MetricReport {
    pub fn of(rho: &DensityMatrix) -> Result<Self> {
        let fc = filtered_concurrence(rho)?;
        let [p20, p11, p02] = rho.populations();
        Ok(Self {
            fidelity_vs_ideal: fidelity(rho, &ideal_hom_state(0.0))?,
            populations: [p02, p11, p20],
            p: fc.p,
            c: fc.c,
            c_nf: fc.c_nf,
            phase_estimate: phase_estimate(rho)?.0,
        })
    }
}
