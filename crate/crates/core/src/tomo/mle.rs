//! Maximum-likelihood reconstruction.
//!
//! The objective is the Gaussian approximation to the Poisson likelihood,
//! `Σ (n_pred − n)² / (2·max(n, 1))`, with `n_pred = s·N_t·g2(ρ)/2` and an
//! unknown overall scale `s`. Writing `σ = s·ρ` turns this into a convex
//! quadratic in the unnormalized positive semidefinite matrix `σ`, so the
//! minimum is unique. It is found with a log-det barrier and Newton steps on
//! the nine real parameters of `σ`; the barrier weight bounds the distance
//! to the optimum. The state is `ρ = σ/Tr σ` and the scale `Tr σ`.

use nalgebra::{Matrix3, SMatrix, SVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{analysis_vector, coherences_to_density, g2_of, linear_invert, AngleSet, CountsRecord};
use crate::error::{Error, Result};
use crate::fock::DensityMatrix;
use crate::linalg::{self, c, C64};

/// `g2` of a two-photon state is at most 2; dividing by it gives the
/// probability that both photons pass the analyzer.
const G2_NORMALIZATION: f64 = 2.0;

/// Barrier weight reduction per centring round.
const MU_FACTOR: f64 = 0.1;
/// Weight of the identity mixed into start points to make them strictly feasible.
const INTERIOR_MIX: f64 = 1e-3;

type Vec9 = SVector<f64, 9>;
type Mat9 = SMatrix<f64, 9, 9>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Newton steps allowed per restart.
    pub max_iterations: usize,
    /// Bound on the objective gap to the optimum at which a run has converged.
    pub tolerance: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            seed: 0,
            max_iterations: 1000,
            tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleFit {
    pub rho: DensityMatrix,
    pub objective: f64,
    /// Newton steps taken.
    pub iterations: usize,
    /// Index of the restart that produced this fit (0 starts from the
    /// projected linear inversion).
    pub restart: usize,
    /// Fitted counts per unit `trials_scale` per unit normalized `g2`.
    pub scale: f64,
    pub converged: bool,
}

const OFF: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Hermitian basis: three diagonal units, then `E_ij + E_ji` and
/// `i(E_ij − E_ji)` for the three upper pairs.
fn hermitian_basis() -> [Matrix3<C64>; 9] {
    let mut basis = [Matrix3::zeros(); 9];
    for k in 0..3 {
        basis[k][(k, k)] = c(1.0, 0.0);
    }
    for (k, &(i, j)) in OFF.iter().enumerate() {
        basis[3 + k][(i, j)] = c(1.0, 0.0);
        basis[3 + k][(j, i)] = c(1.0, 0.0);
        basis[6 + k][(i, j)] = c(0.0, 1.0);
        basis[6 + k][(j, i)] = c(0.0, -1.0);
    }
    basis
}

fn to_matrix(x: &Vec9) -> Matrix3<C64> {
    let mut m = Matrix3::zeros();
    for k in 0..3 {
        m[(k, k)] = c(x[k], 0.0);
    }
    for (k, &(i, j)) in OFF.iter().enumerate() {
        m[(i, j)] = c(x[3 + k], x[6 + k]);
        m[(j, i)] = c(x[3 + k], -x[6 + k]);
    }
    m
}

fn to_params(m: &Matrix3<C64>) -> Vec9 {
    let mut x = Vec9::zeros();
    for k in 0..3 {
        x[k] = m[(k, k)].re;
    }
    for (k, &(i, j)) in OFF.iter().enumerate() {
        x[3 + k] = m[(i, j)].re;
        x[6 + k] = m[(i, j)].im;
    }
    x
}

struct Problem {
    basis: [Matrix3<C64>; 9],
    /// Predicted counts are `design · x`.
    design: Mat9,
    counts: Vec9,
    weights: Vec9,
    /// `2·Aᵀ W A`, the constant Hessian of the objective.
    hessian: Mat9,
}

impl Problem {
    fn new(analyzers: &[(C64, C64)], trials: &[f64], counts: &[f64]) -> Self {
        let basis = hermitian_basis();
        let design = Mat9::from_fn(|i, k| trials[i] * g2_of(&basis[k], analyzers[i]) / G2_NORMALIZATION);
        let counts = Vec9::from_column_slice(counts);
        let weights = counts.map(|n| 1.0 / (2.0 * n.max(1.0)));
        let weighted = Mat9::from_fn(|i, k| weights[i] * design[(i, k)]);
        let hessian = design.transpose() * weighted * 2.0;
        Self {
            basis,
            design,
            counts,
            weights,
            hessian,
        }
    }

    fn objective(&self, x: &Vec9) -> f64 {
        let r = self.design * x - self.counts;
        r.component_mul(&r).dot(&self.weights)
    }

    fn gradient(&self, x: &Vec9) -> Vec9 {
        let r = self.design * x - self.counts;
        self.design.transpose() * r.component_mul(&self.weights) * 2.0
    }

    /// `f − μ·log det σ`, infinite outside the open cone.
    fn penalized(&self, x: &Vec9, mu: f64) -> Option<f64> {
        let l = linalg::hermitian_cholesky(&to_matrix(x))?;
        let log_det = 2.0 * (0..3).map(|k| l[(k, k)].re.ln()).sum::<f64>();
        log_det.is_finite().then(|| self.objective(x) - mu * log_det)
    }

    /// Minimizes `f − μ·log det σ` for a decreasing sequence of `μ`. On the
    /// central path the objective exceeds the optimum by at most `3μ`.
    fn solve_from(&self, mut x: Vec9, restart: usize, opts: &MleOptions) -> MleFit {
        let mut mu = self.objective(&x).max(opts.tolerance) / 3.0;
        let mut iterations = 0;
        let mut converged = false;
        'outer: loop {
            loop {
                if iterations >= opts.max_iterations {
                    break 'outer;
                }
                let sigma = to_matrix(&x);
                let Some(inv) = linalg::hermitian_cholesky(&sigma).and_then(|_| sigma.try_inverse()) else {
                    break 'outer;
                };
                iterations += 1;
                let s_e: Vec<Matrix3<C64>> = self.basis.iter().map(|e| inv * e).collect();
                let grad = self.gradient(&x) - Vec9::from_fn(|k, _| mu * s_e[k].trace().re);
                let hess = self.hessian + Mat9::from_fn(|k, l| mu * (s_e[k] * s_e[l]).trace().re);
                let step = match hess.cholesky() {
                    Some(ch) => ch.solve(&-grad),
                    None => match hess.lu().solve(&-grad) {
                        Some(s) => s,
                        None => break 'outer,
                    },
                };
                let decrement = -grad.dot(&step);
                let current = self.penalized(&x, mu).unwrap_or(f64::INFINITY);
                // below this the line search only sees rounding
                let floor = (0.1 * opts.tolerance).max(1e3 * f64::EPSILON * current.abs());
                if !(decrement > floor) {
                    break;
                }
                let mut t = 1.0;
                let accepted = loop {
                    let trial = x + step * t;
                    if let Some(v) = self.penalized(&trial, mu) {
                        if v <= current - 0.25 * t * decrement {
                            break Some(trial);
                        }
                    }
                    t *= 0.5;
                    if t < 1e-12 {
                        break None;
                    }
                };
                match accepted {
                    Some(next) if next != x => x = next,
                    // no representable descent left at this μ
                    _ => break,
                }
            }
            if 3.0 * mu <= opts.tolerance {
                converged = true;
                break;
            }
            mu *= MU_FACTOR;
        }

        let sigma = to_matrix(&x);
        let scale = sigma.trace().re;
        MleFit {
            rho: DensityMatrix(sigma.unscale(scale)),
            objective: self.objective(&x),
            iterations,
            restart,
            scale,
            converged,
        }
    }

    /// Strictly feasible point along `ρ` with the best scale for it.
    fn interior(&self, rho: &Matrix3<C64>) -> Vec9 {
        let mixed = rho.scale(1.0 - INTERIOR_MIX) + Matrix3::identity().scale(INTERIOR_MIX / 3.0);
        let x = to_params(&mixed);
        let unit = self.design * x;
        let num = unit.component_mul(&self.weights).dot(&self.counts);
        let den = unit.component_mul(&self.weights).dot(&unit);
        let scale = if num > 0.0 && den > 0.0 { num / den } else { 1.0 };
        x * scale
    }

    /// Linear inversion projected onto the unit-trace positive cone.
    fn linear_start(&self, trials: &[f64], sets: &[AngleSet]) -> Vec9 {
        let mut intensities = [0.0; 9];
        for (i, slot) in intensities.iter_mut().enumerate() {
            *slot = self.counts[i] / trials[i] * G2_NORMALIZATION;
        }
        let guess = linear_invert(&intensities, sets)
            .and_then(|g| coherences_to_density(&g))
            .map(|rho| rho.to_dmatrix());
        let rho = match guess {
            Ok(m) => {
                let (values, vectors) = linalg::hermitian_eigen(&m);
                let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
                let mut rho = Matrix3::zeros();
                if total > 0.0 {
                    for (k, v) in values.iter().enumerate() {
                        let col = vectors.column(k);
                        for i in 0..3 {
                            for j in 0..3 {
                                rho[(i, j)] += col[i] * col[j].conj() * (v.max(0.0) / total);
                            }
                        }
                    }
                } else {
                    rho = Matrix3::identity().unscale(3.0);
                }
                rho
            }
            Err(_) => Matrix3::identity().unscale(3.0),
        };
        self.interior(&rho)
    }
}

/// Most likely physical state given the nine counts.
///
/// Restart 0 starts from the projected linear inversion; the rest start
/// from `T†T/Tr` with `T` drawn from a seeded normal distribution. The
/// problem is convex, so restarts agree to within the tolerance; the lowest
/// objective wins. If no restart converges, `NoConvergence` carries the best
/// fit.
pub fn mle_reconstruct(counts: &[CountsRecord], sets: &[AngleSet], opts: &MleOptions) -> Result<MleFit> {
    super::design_matrix(sets)?;
    if counts.len() != sets.len() {
        return Err(Error::InvalidInput(format!(
            "{} count records for {} angle sets",
            counts.len(),
            sets.len()
        )));
    }
    let mut ordered: Vec<Option<&CountsRecord>> = vec![None; sets.len()];
    for rec in counts {
        let slot = rec
            .angle_set_id
            .checked_sub(1)
            .and_then(|i| ordered.get_mut(i))
            .ok_or_else(|| Error::InvalidInput(format!("angle_set_id {} out of range", rec.angle_set_id)))?;
        if slot.replace(rec).is_some() {
            return Err(Error::InvalidInput(format!("duplicate angle_set_id {}", rec.angle_set_id)));
        }
        if !(rec.trials_scale > 0.0) || !rec.trials_scale.is_finite() {
            return Err(Error::InvalidInput(format!(
                "trials_scale {} for angle set {} must be positive",
                rec.trials_scale, rec.angle_set_id
            )));
        }
    }
    let ordered: Vec<&CountsRecord> = ordered.into_iter().map(|r| r.expect("all slots filled")).collect();
    if ordered.iter().all(|r| r.coincidences == 0) {
        return Err(Error::InvalidInput("all counts are zero".into()));
    }
    if opts.restarts == 0 {
        return Err(Error::InvalidInput("at least one restart is required".into()));
    }

    let analyzers: Vec<(C64, C64)> = sets.iter().map(analysis_vector).collect();
    let trials: Vec<f64> = ordered.iter().map(|r| r.trials_scale).collect();
    let n: Vec<f64> = ordered.iter().map(|r| r.coincidences as f64).collect();
    let problem = Problem::new(&analyzers, &trials, &n);

    let fits: Vec<MleFit> = (0..opts.restarts)
        .into_par_iter()
        .map(|restart| {
            let start = if restart == 0 {
                problem.linear_start(&trials, sets)
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(restart as u64);
                let t = Matrix3::<C64>::from_fn(|_, _| c(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)));
                let m = t.adjoint() * t;
                problem.interior(&m.unscale(m.trace().re))
            };
            problem.solve_from(start, restart, opts)
        })
        .collect();

    let best = |fits: &mut dyn Iterator<Item = MleFit>| {
        fits.min_by(|a, b| a.objective.total_cmp(&b.objective).then(a.restart.cmp(&b.restart)))
    };
    match best(&mut fits.iter().filter(|f| f.converged).cloned()) {
        Some(fit) => Ok(fit),
        None => Err(Error::NoConvergence {
            restarts: opts.restarts,
            best: Box::new(best(&mut fits.into_iter()).expect("at least one restart")),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{is_physical, TwoModeState};
    use crate::tomo::table1;

    fn noiseless(rho: &DensityMatrix, pairs: f64) -> Vec<CountsRecord> {
        table1()
            .iter()
            .enumerate()
            .map(|(i, s)| CountsRecord {
                angle_set_id: i + 1,
                coincidences: (pairs * g2_of(rho.matrix(), analysis_vector(s)) / 2.0).round() as u64,
                integration_time: 1.0,
                trials_scale: pairs,
            })
            .collect()
    }

    #[test]
    fn parameters_round_trip() {
        let m = TwoModeState::from_amplitudes(c(0.3, 0.1), c(0.5, -0.2), c(0.0, 0.7))
            .unwrap()
            .density()
            .0;
        assert_eq!(to_matrix(&to_params(&m)), m);
        let basis = hermitian_basis();
        let x = to_params(&m);
        let sum = (0..9).fold(Matrix3::zeros(), |acc, k| acc + basis[k] * c(x[k], 0.0));
        assert!((sum - m).norm() < 1e-15);
    }

    #[test]
    fn recovers_mixed_state() {
        let rho = DensityMatrix::diagonal(0.4, 0.25, 0.35);
        let fit = mle_reconstruct(&noiseless(&rho, 1e9), &table1(), &MleOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.rho.max_abs_diff(&rho) < 1e-6);
        assert!(is_physical(&fit.rho, 1e-9).physical);
        assert!((fit.scale - 1.0).abs() < 1e-6);
    }

    #[test]
    fn restarts_agree() {
        let rho = TwoModeState::from_amplitudes(c(0.6, 0.0), c(0.2, 0.1), c(0.0, 0.7)).unwrap().density();
        let mut counts = noiseless(&rho, 1e3);
        counts[4].coincidences += 40;
        let sets = table1();
        let fits: Vec<MleFit> = (1..=4)
            .map(|r| {
                mle_reconstruct(&counts, &sets, &MleOptions { restarts: r, ..MleOptions::default() }).unwrap()
            })
            .collect();
        for f in &fits {
            assert!((f.objective - fits[0].objective).abs() < 1e-10);
            assert!(f.rho.max_abs_diff(&fits[0].rho) < 1e-4);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let rho = DensityMatrix::diagonal(0.4, 0.25, 0.35);
        let mut counts = noiseless(&rho, 1e4);
        assert!(mle_reconstruct(&counts[..8], &table1(), &MleOptions::default()).is_err());
        counts[1].angle_set_id = 1;
        assert!(matches!(
            mle_reconstruct(&counts, &table1(), &MleOptions::default()),
            Err(Error::InvalidInput(_))
        ));
        let zeros: Vec<_> = noiseless(&rho, 1e4)
            .into_iter()
            .map(|r| CountsRecord { coincidences: 0, ..r })
            .collect();
        assert!(mle_reconstruct(&zeros, &table1(), &MleOptions::default()).is_err());
        let opts = MleOptions { restarts: 0, ..MleOptions::default() };
        assert!(mle_reconstruct(&noiseless(&rho, 1e4), &table1(), &opts).is_err());
    }

    #[test]
    fn non_convergence_reports_best() {
        let rho = DensityMatrix::diagonal(0.4, 0.25, 0.35);
        let opts = MleOptions {
            max_iterations: 1,
            ..MleOptions::default()
        };
        let mut counts = noiseless(&rho, 1e4);
        counts[0].coincidences += 500;
        match mle_reconstruct(&counts, &table1(), &opts) {
            Err(Error::NoConvergence { best, restarts }) => {
                assert_eq!(restarts, 8);
                assert!(is_physical(&best.rho, 1e-9).physical);
            }
            other => panic!("expected no-convergence, got {other:?}"),
        }
    }
}
