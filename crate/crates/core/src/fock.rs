//! Two-mode, two-excitation Fock sector.
//!
//! Every state and matrix here is expressed in the ordered basis
//! `{|2,0⟩, |1,1⟩, |0,2⟩}`, the first label being the photon number in
//! mode 1 (the H polarization after the path-to-polarization conversion).

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{self, C64};

/// Index of `|2,0⟩`.
pub const I20: usize = 0;
/// Index of `|1,1⟩`.
pub const I11: usize = 1;
/// Index of `|0,2⟩`.
pub const I02: usize = 2;

pub const BASIS_TAG: &str = "20,11,02";

/// Default tolerance for [`is_physical`].
pub const PHYSICAL_TOL: f64 = 1e-9;

/// Pure state over the two-excitation sector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeState {
    pub amp20: C64,
    pub amp11: C64,
    pub amp02: C64,
}

impl TwoModeState {
    /// Normalizes the amplitudes. The global phase is kept as given.
    pub fn from_amplitudes(a20: C64, a11: C64, a02: C64) -> Result<Self> {
        let norm = (a20.norm_sqr() + a11.norm_sqr() + a02.norm_sqr()).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroState);
        }
        Ok(Self {
            amp20: a20 / norm,
            amp11: a11 / norm,
            amp02: a02 / norm,
        })
    }

    pub fn amplitudes(&self) -> [C64; 3] {
        [self.amp20, self.amp11, self.amp02]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes().iter().map(|a| a.norm_sqr()).sum()
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn density(&self) -> DensityMatrix {
        let a = self.amplitudes();
        DensityMatrix(Matrix3::from_fn(|i, j| a[i] * a[j].conj()))
    }
}

/// 3×3 density matrix over `{|2,0⟩, |1,1⟩, |0,2⟩}`.
///
/// Construction does not enforce physicality; use [`is_physical`] or
/// [`DensityMatrix::checked`] where a valid state is required.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(pub Matrix3<C64>);

impl DensityMatrix {
    pub fn from_matrix(m: Matrix3<C64>) -> Self {
        Self(m)
    }

    pub fn from_row_slice(elements: &[C64; 9]) -> Self {
        Self(Matrix3::from_row_slice(elements))
    }

    pub fn diagonal(p20: f64, p11: f64, p02: f64) -> Self {
        let mut m = Matrix3::zeros();
        m[(I20, I20)] = linalg::c(p20, 0.0);
        m[(I11, I11)] = linalg::c(p11, 0.0);
        m[(I02, I02)] = linalg::c(p02, 0.0);
        Self(m)
    }

    /// Basis projector `|k⟩⟨k|`.
    pub fn projector(k: usize) -> Self {
        let mut m = Matrix3::zeros();
        m[(k, k)] = linalg::c(1.0, 0.0);
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix3<C64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn to_dmatrix(&self) -> DMatrix<C64> {
        DMatrix::from_fn(3, 3, |i, j| self.0[(i, j)])
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// Diagonal populations `(p20, p11, p02)`.
    pub fn populations(&self) -> [f64; 3] {
        [self.0[(0, 0)].re, self.0[(1, 1)].re, self.0[(2, 2)].re]
    }

    pub fn checked(self, tol: f64) -> Result<Self> {
        let report = is_physical(&self, tol);
        if report.physical {
            Ok(self)
        } else {
            Err(Error::Unphysical(report.describe()))
        }
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        (self.0 - other.0).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Convex combination `Σ wₖ ρₖ`.
pub fn mix(states: &[DensityMatrix], weights: &[f64]) -> Result<DensityMatrix> {
    if states.len() != weights.len() {
        return Err(Error::BadWeights(format!(
            "{} states but {} weights",
            states.len(),
            weights.len()
        )));
    }
    if states.is_empty() {
        return Err(Error::BadWeights("no states to mix".into()));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(Error::BadWeights(format!("negative or non-finite weight {w}")));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::BadWeights(format!("weights sum to {sum}, not 1")));
    }
    let m = states
        .iter()
        .zip(weights)
        .fold(Matrix3::zeros(), |acc, (s, &w)| acc + s.0.scale(w));
    Ok(DensityMatrix(m))
}

/// Random phase on the second mode: multiplies the `|2,0⟩⟨0,2|` coherence
/// (and its conjugate) by `d`.
///
/// A Gaussian phase `χ` per mode-2 photon damps a coherence whose photon
/// numbers differ by `k` by `exp(−k²σ²/2)`; with the `k = 2` factor set to
/// `d`, the `|1,1⟩` coherences (`k = 1`) scale by `d^¼`. Scaling the corners
/// alone would leave states with `|1,1⟩` coherence non-positive.
pub fn dephase_corner(rho: &DensityMatrix, d: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&d) {
        return Err(Error::range("d", d, "[0, 1]"));
    }
    let side = d.powf(0.25);
    let mut m = rho.0;
    m[(I20, I02)] *= d;
    m[(I02, I20)] *= d;
    for k in [I20, I02] {
        m[(k, I11)] *= side;
        m[(I11, k)] *= side;
    }
    Ok(DensityMatrix(m))
}

/// Unequal per-photon collection efficiency of the two output paths.
///
/// With `ratio = η₁/η₂`, postselection on both photons arriving applies the
/// local filter `diag(ratio, √ratio, 1)` to the amplitudes, followed by
/// renormalization. `ratio = 1` is the identity.
pub fn path_efficiency_filter(rho: &DensityMatrix, ratio: f64) -> Result<DensityMatrix> {
    if !(ratio > 0.0) || !ratio.is_finite() {
        return Err(Error::range("path_efficiency_ratio", ratio, "(0, ∞)"));
    }
    let k = [ratio, ratio.sqrt(), 1.0];
    let m = Matrix3::from_fn(|i, j| rho.0[(i, j)] * (k[i] * k[j]));
    let tr = m.trace().re;
    if !(tr > 0.0) {
        return Err(Error::ZeroState);
    }
    Ok(DensityMatrix(m.unscale(tr)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalityReport {
    pub physical: bool,
    pub hermitian: bool,
    pub unit_trace: bool,
    pub positive: bool,
    /// max |ρ − ρ†|
    pub hermiticity_error: f64,
    /// |Tr ρ − 1|
    pub trace_error: f64,
    /// Smallest eigenvalue of the Hermitian part.
    pub min_eigenvalue: f64,
}

impl PhysicalityReport {
    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if !self.hermitian {
            parts.push(format!("not Hermitian (|ρ-ρ†| = {:.3e})", self.hermiticity_error));
        }
        if !self.unit_trace {
            parts.push(format!("trace off by {:.3e}", self.trace_error));
        }
        if !self.positive {
            parts.push(format!("negative eigenvalue {:.3e}", self.min_eigenvalue));
        }
        if parts.is_empty() {
            "physical".into()
        } else {
            parts.join("; ")
        }
    }
}

pub fn is_physical(rho: &DensityMatrix, tol: f64) -> PhysicalityReport {
    physicality_of(&rho.to_dmatrix(), tol)
}

pub(crate) fn physicality_of(m: &DMatrix<C64>, tol: f64) -> PhysicalityReport {
    let hermiticity_error = linalg::max_abs(&(m - m.adjoint()));
    let trace_error = (m.trace().re - 1.0).abs().max(m.trace().im.abs());
    let (values, _) = linalg::hermitian_eigen(m);
    let min_eigenvalue = values.last().copied().unwrap_or(0.0);
    let hermitian = hermiticity_error <= tol;
    let unit_trace = trace_error <= tol;
    let positive = min_eigenvalue >= -tol;
    PhysicalityReport {
        physical: hermitian && unit_trace && positive,
        hermitian,
        unit_trace,
        positive,
        hermiticity_error,
        trace_error,
        min_eigenvalue,
    }
}

#[derive(Serialize, Deserialize)]
struct DensityJson {
    basis: String,
    elements: Vec<[f64; 2]>,
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut elements = Vec::with_capacity(9);
        for i in 0..3 {
            for j in 0..3 {
                let z = self.0[(i, j)];
                elements.push([z.re, z.im]);
            }
        }
        DensityJson {
            basis: BASIS_TAG.into(),
            elements,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = DensityJson::deserialize(deserializer)?;
        if raw.basis != BASIS_TAG {
            return Err(D::Error::custom(format!(
                "basis tag {:?}, expected {BASIS_TAG:?}",
                raw.basis
            )));
        }
        if raw.elements.len() != 9 {
            return Err(D::Error::custom(format!(
                "expected 9 row-major elements, found {}",
                raw.elements.len()
            )));
        }
        let mut m = Matrix3::zeros();
        for (k, [re, im]) in raw.elements.into_iter().enumerate() {
            m[(k / 3, k % 3)] = linalg::c(re, im);
        }
        Ok(DensityMatrix(m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn one() -> C64 {
        c(1.0, 0.0)
    }
    fn zero() -> C64 {
        c(0.0, 0.0)
    }

    #[test]
    fn normalizes_amplitudes() {
        let s = TwoModeState::from_amplitudes(one(), zero(), zero()).unwrap();
        assert_eq!(s.amp20, one());

        let s = TwoModeState::from_amplitudes(one(), zero(), one()).unwrap();
        assert!((s.amp20.re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((s.amp02.re - FRAC_1_SQRT_2).abs() < 1e-15);

        // global phase is kept
        let s = TwoModeState::from_amplitudes(c(0.0, 2.0), zero(), zero()).unwrap();
        assert!((s.amp20 - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_amplitudes_rejected() {
        assert!(matches!(
            TwoModeState::from_amplitudes(zero(), zero(), zero()),
            Err(Error::ZeroState)
        ));
    }

    #[test]
    fn pure_densities() {
        let rho = TwoModeState::from_amplitudes(one(), zero(), zero()).unwrap().density();
        assert_eq!(rho, DensityMatrix::diagonal(1.0, 0.0, 0.0));

        let rho = TwoModeState::from_amplitudes(one(), zero(), one()).unwrap().density();
        for (i, j) in [(0, 0), (0, 2), (2, 0), (2, 2)] {
            assert!((rho.get(i, j) - c(0.5, 0.0)).norm() < 1e-15);
        }
        assert!(rho.get(1, 1).norm() < 1e-15);

        let rho = TwoModeState::from_amplitudes(one(), zero(), c(0.0, 1.0)).unwrap().density();
        assert!((rho.get(0, 2) - c(0.0, -0.5)).norm() < 1e-15);
        assert!((rho.get(2, 0) - c(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn mixing() {
        let dephased = mix(
            &[DensityMatrix::projector(I20), DensityMatrix::projector(I02)],
            &[0.5, 0.5],
        )
        .unwrap();
        assert_eq!(dephased, DensityMatrix::diagonal(0.5, 0.0, 0.5));

        let rho = DensityMatrix::diagonal(0.2, 0.3, 0.5);
        assert_eq!(mix(&[rho], &[1.0]).unwrap(), rho);

        let m = mix(
            &[
                DensityMatrix::projector(I20),
                DensityMatrix::projector(I11),
                DensityMatrix::projector(I02),
            ],
            &[0.25, 0.25, 0.5],
        )
        .unwrap();
        assert_eq!(m, DensityMatrix::diagonal(0.25, 0.25, 0.5));
    }

    #[test]
    fn mixing_rejects_bad_weights() {
        let p = DensityMatrix::projector(I20);
        assert!(matches!(mix(&[p, p], &[0.5, 0.6]), Err(Error::BadWeights(_))));
        assert!(matches!(mix(&[p, p], &[1.5, -0.5]), Err(Error::BadWeights(_))));
        assert!(matches!(mix(&[p], &[0.5, 0.5]), Err(Error::BadWeights(_))));
    }

    #[test]
    fn corner_dephasing() {
        let noon = TwoModeState::from_amplitudes(one(), zero(), one()).unwrap().density();
        assert_eq!(dephase_corner(&noon, 1.0).unwrap(), noon);
        let full = dephase_corner(&noon, 0.0).unwrap();
        assert!(full.max_abs_diff(&DensityMatrix::diagonal(0.5, 0.0, 0.5)) < 1e-15);
        let half = dephase_corner(&noon, 0.5).unwrap();
        assert!((half.get(0, 2).norm() - 0.25).abs() < 1e-15);
        assert!((half.get(2, 0).norm() - 0.25).abs() < 1e-15);
        assert!(matches!(dephase_corner(&noon, 1.5), Err(Error::OutOfRange { .. })));
        assert!(matches!(dephase_corner(&noon, -0.1), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn dephasing_keeps_middle_coherent_states_physical() {
        let psi = TwoModeState::from_amplitudes(c(0.6, 0.0), c(0.5, 0.1), c(-0.6, 0.0)).unwrap().density();
        for d in [0.0, 0.3, 0.75, 1.0] {
            let out = dephase_corner(&psi, d).unwrap();
            assert!(is_physical(&out, 1e-12).physical, "d = {d}");
            assert!((out.get(I11, I20).norm() - psi.get(I11, I20).norm() * d.powf(0.25)).abs() < 1e-15);
        }
        let twice = dephase_corner(&dephase_corner(&psi, 0.5).unwrap(), 0.4).unwrap();
        assert!(twice.max_abs_diff(&dephase_corner(&psi, 0.2).unwrap()) < 1e-15);
    }

    #[test]
    fn physicality_checks() {
        assert!(is_physical(&DensityMatrix::diagonal(0.5, 0.0, 0.5), 1e-9).physical);

        let r = is_physical(&DensityMatrix::diagonal(1.2, -0.2, 0.0), 1e-9);
        assert!(!r.physical && !r.positive && r.hermitian && r.unit_trace);
        assert!((r.min_eigenvalue + 0.2).abs() < 1e-12);

        // corner block [[0.5, 0.6], [0.6, 0.5]] has eigenvalues 0.5 ± 0.6
        let mut m = DensityMatrix::diagonal(0.5, 0.0, 0.5);
        m.0[(0, 2)] = c(0.6, 0.0);
        m.0[(2, 0)] = c(0.6, 0.0);
        let r = is_physical(&m, 1e-9);
        assert!(!r.physical && !r.positive);
        assert!((r.min_eigenvalue + 0.1).abs() < 1e-12);

        let mut m = DensityMatrix::diagonal(0.5, 0.0, 0.5);
        m.0[(0, 1)] = c(0.0, 0.1);
        let r = is_physical(&m, 1e-9);
        assert!(!r.hermitian);
        assert!(r.describe().contains("Hermitian"));
    }

    #[test]
    fn collection_filter() {
        let rho = DensityMatrix::diagonal(0.25, 0.5, 0.25);
        assert!(path_efficiency_filter(&rho, 1.0).unwrap().max_abs_diff(&rho) < 1e-15);
        let f = path_efficiency_filter(&rho, 0.5).unwrap();
        let [p20, p11, p02] = f.populations();
        // weights 0.25·0.25 : 0.5·0.5 : 0.25
        let norm = 0.0625 + 0.25 + 0.25;
        assert!((p20 - 0.0625 / norm).abs() < 1e-15);
        assert!((p11 - 0.25 / norm).abs() < 1e-15);
        assert!((p02 - 0.25 / norm).abs() < 1e-15);
        assert!(path_efficiency_filter(&rho, 0.0).is_err());
    }

    #[test]
    fn json_shape() {
        let rho = TwoModeState::from_amplitudes(one(), zero(), c(0.0, 1.0)).unwrap().density();
        let v = serde_json::to_value(rho).unwrap();
        assert_eq!(v["basis"], "20,11,02");
        assert_eq!(v["elements"].as_array().unwrap().len(), 9);
        let back: DensityMatrix = serde_json::from_value(v).unwrap();
        assert_eq!(back, rho);

        let bad = serde_json::json!({"basis": "02,11,20", "elements": []});
        assert!(serde_json::from_value::<DensityMatrix>(bad).is_err());
    }
}
