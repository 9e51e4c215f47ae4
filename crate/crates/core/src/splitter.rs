//! Lossy beamsplitter physics: two-photon output state, coincidence rates,
//! HOM visibility and dip profile, and the Mach–Zehnder measurement used to
//! pin down the phase between reflection and transmission.
//!
//! Reflection and transmission are renormalized to the coincidence basis,
//! so `|r|² + |t|² = 1` even for a lossy device; the loss survives only as
//! the deviation of the relative phase `φ` from `π/2`. The transmission
//! coefficient is taken real, `r = |r|e^{iφ}`, `t = |t|`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use nalgebra::Matrix3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, DensityMatrix, I02, I11, I20};
use crate::linalg::{c, C64};

/// Speed of light in m/s.
const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitterSpec {
    pub rmag: f64,
    pub tmag: f64,
    pub phi: f64,
}

impl SplitterSpec {
    pub fn new(rmag: f64, tmag: f64, phi: f64) -> Result<Self> {
        let spec = Self { rmag, tmag, phi };
        spec.validate()?;
        Ok(spec)
    }

    /// Spec from the reflectance `|r|²`, with `|t|² = 1 − |r|²`.
    pub fn from_reflectance(reflectance: f64, phi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&reflectance) {
            return Err(Error::range("reflectance", reflectance, "[0, 1]"));
        }
        Self::new(reflectance.sqrt(), (1.0 - reflectance).sqrt(), phi)
    }

    /// `r = i/√2`, `t = 1/√2`.
    pub fn symmetric_lossless() -> Self {
        Self {
            rmag: FRAC_1_SQRT_2,
            tmag: FRAC_1_SQRT_2,
            phi: PI / 2.0,
        }
    }

    /// Measured plasmonic device: `|r|² = 0.51`, `|t|² = 0.49`, `φ = 1.21`.
    pub fn plasmonic() -> Self {
        Self {
            rmag: 0.51f64.sqrt(),
            tmag: 0.49f64.sqrt(),
            phi: 1.21,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let Self { rmag, tmag, phi } = *self;
        if !(0.0..=1.0).contains(&rmag) || !(0.0..=1.0).contains(&tmag) {
            return Err(Error::InvalidSplitter(format!(
                "|r| = {rmag}, |t| = {tmag} must lie in [0, 1]"
            )));
        }
        if (rmag * rmag + tmag * tmag - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSplitter(format!(
                "|r|² + |t|² = {} is not 1",
                rmag * rmag + tmag * tmag
            )));
        }
        if !(phi > -PI && phi <= PI) {
            return Err(Error::InvalidSplitter(format!("φ = {phi} is outside (-π, π]")));
        }
        Ok(())
    }

    pub fn r(&self) -> C64 {
        C64::from_polar(self.rmag, self.phi)
    }

    pub fn t(&self) -> C64 {
        c(self.tmag, 0.0)
    }

    /// `Re[r*² t²]`, the interference term of the coincidence rate.
    pub fn interference_term(&self) -> f64 {
        (self.r().conj().powi(2) * self.t().powi(2)).re
    }
}

fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::range(name, value, "[0, 1]"))
    }
}

/// Unnormalized two-excitation output populations `(p20, p11, p02)` for
/// photons with temporal overlap `eta`.
///
/// Indistinguishable photons give the bunched weight `2|rt|²` per corner
/// and `|r*² + t*²|²` for `|1,1⟩`; distinguishable ones give `|rt|²` and
/// `|r|⁴ + |t|⁴`. `eta` mixes the two linearly.
pub fn raw_populations(spec: &SplitterSpec, eta: f64) -> Result<[f64; 3]> {
    spec.validate()?;
    check_unit("eta", eta)?;
    let rt2 = (spec.rmag * spec.tmag).powi(2);
    let corner = (1.0 + eta) * rt2;
    Ok([corner, coincidence_probability(spec, eta)?, corner])
}

/// Density matrix of the two photons leaving the splitter, renormalized to
/// the coincidence sector.
///
/// The coherent part is `−√2 r*t* |2,0⟩ + (r*² + t*²)|1,1⟩ − √2 r*t* e^{iφ_d}|0,2⟩`
/// with weight `eta`; the distinguishable remainder keeps full `|2,0⟩↔|0,2⟩`
/// coherence but none with `|1,1⟩`. `d` then scales the corner coherence.
pub fn hom_output(spec: &SplitterSpec, eta: f64, d: f64, phi_d: f64) -> Result<DensityMatrix> {
    spec.validate()?;
    check_unit("eta", eta)?;
    check_unit("d", d)?;
    let (r, t) = (spec.r(), spec.t());
    let bunched = -SQRT_2 * r.conj() * t.conj();
    let paired = r.conj().powi(2) + t.conj().powi(2);
    let psi = [bunched, paired, bunched * C64::from_polar(1.0, phi_d)];
    let coherent = Matrix3::from_fn(|i, j| psi[i] * psi[j].conj());

    let rt2 = (spec.rmag * spec.tmag).powi(2);
    let mut incoherent = Matrix3::zeros();
    incoherent[(I20, I20)] = c(rt2, 0.0);
    incoherent[(I02, I02)] = c(rt2, 0.0);
    incoherent[(I11, I11)] = c(spec.rmag.powi(4) + spec.tmag.powi(4), 0.0);
    incoherent[(I20, I02)] = coherent[(I20, I02)] * 0.5;
    incoherent[(I02, I20)] = coherent[(I02, I20)] * 0.5;

    let raw = coherent.scale(eta) + incoherent.scale(1.0 - eta);
    let tr = raw.trace().re;
    fock::dephase_corner(&DensityMatrix(raw.unscale(tr)), d)
}

/// `|r|⁴ + |t|⁴ + 2·eta·Re[r*² t²]`: probability of one photon per output.
pub fn coincidence_probability(spec: &SplitterSpec, eta: f64) -> Result<f64> {
    spec.validate()?;
    check_unit("eta", eta)?;
    let p = spec.rmag.powi(4) + spec.tmag.powi(4) + 2.0 * eta * spec.interference_term();
    Ok(p.clamp(0.0, 1.0))
}

/// `V = (N_no-int − N_int) / N_no-int`.
pub fn visibility(n_noint: f64, n_int: f64) -> Result<f64> {
    if n_noint == 0.0 {
        return Err(Error::DivisionByZero("no-interference count is zero"));
    }
    if !(n_noint > 0.0) {
        return Err(Error::range("n_noint", n_noint, "(0, ∞)"));
    }
    if !(n_int >= 0.0) {
        return Err(Error::range("n_int", n_int, "[0, ∞)"));
    }
    Ok((n_noint - n_int) / n_noint)
}

/// Visibility for perfectly overlapping photons.
pub fn max_visibility(spec: &SplitterSpec) -> Result<f64> {
    visibility(coincidence_probability(spec, 0.0)?, coincidence_probability(spec, 1.0)?)
}

/// Coherence time (fs) of light through a Gaussian filter.
///
/// The FWHM is converted to the Gaussian width `Δλ = fwhm/√(2 ln 2)` and
/// `τ_c = λ0² / (π c Δλ)`.
pub fn coherence_time_fs(lambda0_nm: f64, fwhm_nm: f64) -> Result<f64> {
    if !(lambda0_nm > 0.0) {
        return Err(Error::range("lambda0", lambda0_nm, "(0, ∞) nm"));
    }
    if !(fwhm_nm > 0.0) {
        return Err(Error::range("fwhm", fwhm_nm, "(0, ∞) nm"));
    }
    let width = fwhm_nm / (2.0 * 2f64.ln()).sqrt();
    let lambda0 = lambda0_nm * 1e-9;
    Ok(lambda0 * lambda0 / (PI * SPEED_OF_LIGHT * width * 1e-9) * 1e15)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomProfile {
    pub delays: Vec<f64>,
    pub expected_coincidences: Vec<f64>,
    pub tau_c: f64,
    pub baseline: f64,
}

impl HomProfile {
    /// `(N_max − N_min)/N_max` over the sampled delays.
    pub fn observed_visibility(&self) -> Option<f64> {
        let max = self.expected_coincidences.iter().copied().fold(f64::NAN, f64::max);
        let min = self.expected_coincidences.iter().copied().fold(f64::NAN, f64::min);
        visibility(max, min).ok()
    }
}

/// Expected coincidences `baseline·(1 − V_max·eta_max·exp(−(τ/τ_c)²))`.
pub fn hom_dip_profile(
    spec: &SplitterSpec,
    eta_max: f64,
    baseline: f64,
    lambda0_nm: f64,
    fwhm_nm: f64,
    delays: &[f64],
) -> Result<HomProfile> {
    check_unit("eta_max", eta_max)?;
    if !(baseline >= 0.0) {
        return Err(Error::range("baseline", baseline, "[0, ∞)"));
    }
    let tau_c = coherence_time_fs(lambda0_nm, fwhm_nm)?;
    let v_max = max_visibility(spec)?;
    let expected_coincidences = delays
        .iter()
        .map(|&tau| {
            let overlap = eta_max * (-(tau / tau_c).powi(2)).exp();
            (baseline * (1.0 - v_max * overlap)).max(0.0)
        })
        .collect();
    Ok(HomProfile {
        delays: delays.to_vec(),
        expected_coincidences,
        tau_c,
        baseline,
    })
}

/// Output intensities `(|R_MZ|², |T_MZ|²)` with this splitter as the second
/// element of a Mach–Zehnder whose first splitter is symmetric and lossless,
/// for arm phases `φ_p1 = 0` and `φ_p2 = phi_p2`.
pub fn mzi_output(spec: &SplitterSpec, phi_p2: f64) -> (f64, f64) {
    let rp = c(0.0, FRAC_1_SQRT_2);
    let tp = c(FRAC_1_SQRT_2, 0.0);
    let arm2 = C64::from_polar(1.0, phi_p2);
    let (r, t) = (spec.r(), spec.t());
    let big_r = rp * r * arm2 + tp * t;
    let big_t = rp * t * arm2 + r * tp;
    (big_r.norm_sqr(), big_t.norm_sqr())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeSample {
    pub phi_p2: f64,
    pub i_r: f64,
    pub i_t: f64,
}

/// `n` equally spaced samples over `[0, 2π)` with additive Gaussian noise of
/// standard deviation `noise` on each port.
pub fn synthesize_fringes(spec: &SplitterSpec, n: usize, noise: f64, seed: u64) -> Result<Vec<FringeSample>> {
    spec.validate()?;
    if !(noise >= 0.0) {
        return Err(Error::range("noise", noise, "[0, ∞)"));
    }
    let normal = Normal::new(0.0, noise).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|k| {
            let phi_p2 = 2.0 * PI * k as f64 / n as f64;
            let (i_r, i_t) = mzi_output(spec, phi_p2);
            FringeSample {
                phi_p2,
                i_r: i_r + normal.sample(&mut rng),
                i_t: i_t + normal.sample(&mut rng),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MziFit {
    pub phi: f64,
    /// Root-mean-square residual per port sample.
    pub residual_rms: f64,
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = (phi + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

const MZI_GRID: usize = 2048;

/// Least-squares estimate of `φ` from both MZI output ports, with `|r|` and
/// `|t|` fixed from independent intensity measurements.
pub fn fit_mzi_phase(fringes: &[FringeSample], rmag: f64, tmag: f64) -> Result<MziFit> {
    if fringes.len() < 8 {
        return Err(Error::InvalidInput(format!(
            "need at least 8 fringe samples, got {}",
            fringes.len()
        )));
    }
    let n = fringes.len() as f64;
    let lo = fringes.iter().map(|f| f.phi_p2).fold(f64::INFINITY, f64::min);
    let hi = fringes.iter().map(|f| f.phi_p2).fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 2.0 * PI * (1.0 - 1.0 / n) - 1e-9 {
        return Err(Error::InvalidInput(format!(
            "fringe samples span {:.4} rad, less than one period",
            hi - lo
        )));
    }
    let spread = |f: fn(&FringeSample) -> f64| {
        let mean = fringes.iter().map(f).sum::<f64>() / n;
        fringes.iter().map(|s| (f(s) - mean).powi(2)).sum::<f64>() / n
    };
    if spread(|s| s.i_r) < 1e-18 && spread(|s| s.i_t) < 1e-18 {
        return Err(Error::Unidentifiable("fringes are constant".into()));
    }
    if rmag * tmag < 1e-9 {
        return Err(Error::Unidentifiable(
            "fringe contrast vanishes when |r| or |t| is zero".into(),
        ));
    }

    let cost = |phi: f64| {
        let spec = SplitterSpec { rmag, tmag, phi };
        fringes
            .iter()
            .map(|s| {
                let (r, t) = mzi_output(&spec, s.phi_p2);
                (r - s.i_r).powi(2) + (t - s.i_t).powi(2)
            })
            .sum::<f64>()
    };

    let step = 2.0 * PI / MZI_GRID as f64;
    let (best, _) = (0..MZI_GRID)
        .map(|k| -PI + step * (k + 1) as f64)
        .map(|phi| (phi, cost(phi)))
        .fold((0.0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });

    let phi = golden_section(&cost, best - step, best + step, 1e-12);
    let phi = wrap_phase(phi);
    let value = cost(phi);
    Ok(MziFit {
        phi,
        residual_rms: (value / (2.0 * n)).sqrt(),
    })
}

fn golden_section(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}
