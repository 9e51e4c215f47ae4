//! Polarization tomography of the two-photon single-mode state.
//!
//! After the path-to-polarization conversion, mode 1 is H and mode 2 is V,
//! so `|2,0⟩` is two H photons. The analyzer (QWP1, QWP2, HWP1, then the
//! H port of PBS2) transmits the mode `a_T = u·a_H + v·a_V`, and a
//! coincidence behind the final 50/50 splitter measures `⟨a_T†² a_T²⟩`.

mod linear;
mod mle;

pub use linear::{coherences_to_density, design_matrix, linear_invert, CoherenceVector, DesignMatrix};
pub use mle::{mle_reconstruct, MleFit, MleOptions};

use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

use nalgebra::{Matrix2, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{is_physical, DensityMatrix, PHYSICAL_TOL};
use crate::linalg::{c, C64};

/// One waveplate configuration, angles in radians between each fast axis
/// and the vertical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleSet {
    pub a_qwp1: f64,
    pub a_qwp2: f64,
    pub a_hwp1: f64,
}

impl AngleSet {
    pub const fn new(a_qwp1: f64, a_qwp2: f64, a_hwp1: f64) -> Self {
        Self { a_qwp1, a_qwp2, a_hwp1 }
    }
}

/// The nine angle sets shipped as the default tomography schedule.
pub fn table1() -> [AngleSet; 9] {
    [
        AngleSet::new(0.102, 0.440, 1.740),
        AngleSet::new(1.803, 1.144, -0.330),
        AngleSet::new(2.010, 1.083, -0.464),
        AngleSet::new(0.102, -0.236, 1.402),
        AngleSet::new(0.232, -0.427, 1.241),
        AngleSet::new(0.439, -0.488, 1.107),
        AngleSet::new(FRAC_PI_4, FRAC_PI_4, 13.0 * PI / 16.0),
        AngleSet::new(FRAC_PI_4, FRAC_PI_4, 7.0 * PI / 8.0),
        AngleSet::new(FRAC_PI_4, FRAC_PI_4, 15.0 * PI / 16.0),
    ]
}

/// Coincidence counts recorded for one angle set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountsRecord {
    /// 1-based index into the angle-set list.
    pub angle_set_id: usize,
    pub coincidences: u64,
    /// Seconds.
    pub integration_time: f64,
    /// Effective number of pairs sent during the window. Only ratios between
    /// settings matter; the absolute scale is fitted.
    pub trials_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plate {
    Quarter,
    Half,
}

impl Plate {
    fn retardance(self) -> f64 {
        match self {
            Plate::Quarter => PI / 2.0,
            Plate::Half => PI,
        }
    }
}

/// Jones matrix in the `(H, V)` basis of a retarder whose fast axis sits at
/// `angle` from vertical: `f fᵀ + e^{iΓ} s sᵀ` with fast axis
/// `f = (sin θ, cos θ)` and slow axis `s = (cos θ, −sin θ)`.
pub fn waveplate_unitary(plate: Plate, angle: f64) -> Matrix2<C64> {
    let (sin, cos) = angle.sin_cos();
    let delay = C64::from_polar(1.0, plate.retardance());
    let fast = Matrix2::new(sin * sin, sin * cos, sin * cos, cos * cos).map(|x| c(x, 0.0));
    let slow = Matrix2::new(cos * cos, -sin * cos, -sin * cos, sin * sin).map(|x| c(x, 0.0));
    fast + slow * delay
}

/// Coefficients `(u, v)` of the analyzed mode `a_T = u·a_H + v·a_V`.
pub fn analysis_vector(s: &AngleSet) -> (C64, C64) {
    let m = waveplate_unitary(Plate::Half, s.a_hwp1)
        * waveplate_unitary(Plate::Quarter, s.a_qwp2)
        * waveplate_unitary(Plate::Quarter, s.a_qwp1);
    (m[(0, 0)], m[(0, 1)])
}

/// `⟨0|a_T²|k⟩` for the three basis states.
fn pair_amplitudes((u, v): (C64, C64)) -> [C64; 3] {
    [u * u * SQRT_2, u * v * 2.0, v * v * SQRT_2]
}

pub(crate) fn g2_of(rho: &Matrix3<C64>, analyzer: (C64, C64)) -> f64 {
    let m = pair_amplitudes(analyzer);
    let mut acc = c(0.0, 0.0);
    for i in 0..3 {
        for j in 0..3 {
            acc += rho[(i, j)] * m[i] * m[j].conj();
        }
    }
    acc.re
}

/// `⟨a_T†² a_T²⟩` behind the analyzer configured by `s`.
pub fn predicted_g2(rho: &DensityMatrix, s: &AngleSet) -> Result<f64> {
    let report = is_physical(rho, PHYSICAL_TOL);
    if !report.physical {
        return Err(Error::Unphysical(report.describe()));
    }
    Ok(g2_of(rho.matrix(), analysis_vector(s)))
}

pub(crate) fn validate_sets(sets: &[AngleSet]) -> Result<()> {
    if sets.len() != 9 {
        return Err(Error::InvalidInput(format!("expected 9 angle sets, got {}", sets.len())));
    }
    if let Some(s) = sets
        .iter()
        .find(|s| !(s.a_qwp1.is_finite() && s.a_qwp2.is_finite() && s.a_hwp1.is_finite()))
    {
        return Err(Error::InvalidInput(format!("non-finite angle in {s:?}")));
    }
    Ok(())
}
