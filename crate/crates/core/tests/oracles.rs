//! Cross-checks against independent constructions: dense Fock-space
//! operators, permanents, the square-root form of the concurrence and
//! closed-form fidelities.

mod common;

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use homtomo::entangle::{self, concurrence, fidelity, QubitDensity};
use homtomo::fock::{DensityMatrix, I02, I11, I20};
use homtomo::linalg::{c, C64};
use homtomo::splitter::{self, SplitterSpec};
use homtomo::tomo::{self, analysis_vector, predicted_g2, table1, AngleSet, CoherenceVector};
use nalgebra::{DMatrix, Matrix4};
use rand::Rng;

/// Photon-number cutoff per mode; two photons need occupations 0..=2.
const LEVELS: usize = 3;
const DIM: usize = LEVELS * LEVELS;

fn index(n_h: usize, n_v: usize) -> usize {
    n_h * LEVELS + n_v
}

/// Annihilation operator of mode H (`first`) or V on the truncated space.
fn annihilate(first: bool) -> DMatrix<C64> {
    let mut a = DMatrix::zeros(DIM, DIM);
    for n_h in 0..LEVELS {
        for n_v in 0..LEVELS {
            let (n, target) = if first {
                (n_h, n_h.checked_sub(1).map(|m| index(m, n_v)))
            } else {
                (n_v, n_v.checked_sub(1).map(|m| index(n_h, m)))
            };
            if let Some(t) = target {
                a[(t, index(n_h, n_v))] = c((n as f64).sqrt(), 0.0);
            }
        }
    }
    a
}

/// The 3×3 two-photon state placed in the truncated two-mode space.
fn embed(rho: &DensityMatrix) -> DMatrix<C64> {
    let slots = [(I20, index(2, 0)), (I11, index(1, 1)), (I02, index(0, 2))];
    let mut big = DMatrix::zeros(DIM, DIM);
    for &(i, bi) in &slots {
        for &(j, bj) in &slots {
            big[(bi, bj)] = rho.get(i, j);
        }
    }
    big
}

fn expect(rho: &DMatrix<C64>, op: &DMatrix<C64>) -> C64 {
    (rho * op).trace()
}

fn power(m: &DMatrix<C64>, k: usize) -> DMatrix<C64> {
    (0..k).fold(DMatrix::identity(DIM, DIM), |acc, _| acc * m)
}

#[test]
fn g2_matches_dense_operators() {
    let (a_h, a_v) = (annihilate(true), annihilate(false));
    let mut r = common::rng(21);
    let mut sets = table1().to_vec();
    for _ in 0..20 {
        sets.push(AngleSet::new(
            r.random_range(-PI..PI),
            r.random_range(-PI..PI),
            r.random_range(-PI..PI),
        ));
    }
    for _ in 0..20 {
        let rho = common::random_density(&mut r);
        let big = embed(&rho);
        for s in &sets {
            let (u, v) = analysis_vector(s);
            let a_t = &a_h * u + &a_v * v;
            let op = a_t.adjoint() * a_t.adjoint() * &a_t * &a_t;
            let oracle = expect(&big, &op);
            assert!(oracle.im.abs() < 1e-12);
            assert!((predicted_g2(&rho, s).unwrap() - oracle.re).abs() < 1e-12);
        }
    }
}

#[test]
fn ideal_state_g2_values() {
    // `|u² + v²|²` for `(|2,0⟩ + |0,2⟩)/√2`
    let rho = common::ideal_hom();
    for s in table1() {
        let (u, v) = analysis_vector(&s);
        let oracle = (u * u + v * v).norm_sqr();
        assert!((predicted_g2(&rho, &s).unwrap() - oracle).abs() < 1e-12);
    }
}

#[test]
fn coherences_match_dense_operators() {
    let (a_h, a_v) = (annihilate(true), annihilate(false));
    let mut r = common::rng(22);
    for _ in 0..20 {
        let rho = common::random_density(&mut r);
        let big = embed(&rho);
        let g = CoherenceVector::from_density(&rho);
        for w in 0..3 {
            for y in 0..3 {
                let op = power(&a_h.adjoint(), 2 - w)
                    * power(&a_v.adjoint(), w)
                    * power(&a_h, 2 - y)
                    * power(&a_v, y);
                assert!((g.get(w, y) - expect(&big, &op)).norm() < 1e-12, "g({w},{y})");
            }
        }
    }
}

#[test]
fn hom_populations_are_permanents() {
    let mut r = common::rng(23);
    for _ in 0..200 {
        let spec = SplitterSpec::from_reflectance(r.random_range(0.0..=1.0), r.random_range(-3.0..3.0)).unwrap();
        let (rr, t) = (spec.r(), spec.t());
        // two photons into distinct ports: |perm U|² for one per output,
        // 2|U₁₁U₂₁|² for both in one output
        let p11 = (rr * rr + t * t).norm_sqr();
        let corner = 2.0 * (rr * t).norm_sqr();
        let total = p11 + 2.0 * corner;
        let rho = splitter::hom_output(&spec, 1.0, 1.0, 0.0).unwrap();
        let pops = rho.populations();
        assert!((pops[I11] - p11 / total).abs() < 1e-12);
        assert!((pops[I20] - corner / total).abs() < 1e-12);
        assert!((splitter::coincidence_probability(&spec, 1.0).unwrap() - p11).abs() < 1e-12);
        // distinguishable photons add probabilities instead of amplitudes
        let classical = rr.norm_sqr().powi(2) + t.norm_sqr().powi(2);
        assert!((splitter::coincidence_probability(&spec, 0.0).unwrap() - classical).abs() < 1e-12);
    }
}

#[test]
fn symmetric_splitter_gives_the_ideal_state() {
    let rho = splitter::hom_output(&SplitterSpec::symmetric_lossless(), 1.0, 1.0, 0.0).unwrap();
    assert!(rho.populations()[I11] < 1e-15);
    assert!((fidelity(&rho, &common::ideal_hom()).unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn plasmonic_visibility_by_hand() {
    // 0.51² + 0.49² = 0.5002, 2·0.51·0.49·cos(2·1.21) = −0.37514...
    let spec = SplitterSpec::plasmonic();
    let base = 0.51f64.powi(2) + 0.49f64.powi(2);
    let dip = 2.0 * 0.51 * 0.49 * (2.0f64 * 1.21).cos();
    let v = -dip / base;
    assert!((splitter::max_visibility(&spec).unwrap() - v).abs() < 1e-12);
}

/// `(Y⊗Y) ρ* (Y⊗Y)` built from explicit Pauli matrices.
fn spin_flipped(rho: &Matrix4<C64>) -> Matrix4<C64> {
    let (z, i) = (c(0.0, 0.0), c(0.0, 1.0));
    let y = nalgebra::Matrix2::new(z, -i, i, z);
    let yy = y.kronecker(&y);
    yy * rho.map(|e| e.conj()) * yy
}

/// `√ρ` via the Hermitian eigendecomposition.
fn sqrt_psd(m: &Matrix4<C64>) -> Matrix4<C64> {
    let eig = m.symmetric_eigen();
    let d = Matrix4::from_diagonal(&eig.eigenvalues.map(|l| c(l.max(0.0).sqrt(), 0.0)));
    eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

/// Wootters' λᵢ as eigenvalues of `√(√ρ ρ̃ √ρ)`.
fn concurrence_oracle(rho: &Matrix4<C64>) -> f64 {
    let s = sqrt_psd(rho);
    let r = sqrt_psd(&(s * spin_flipped(rho) * s));
    let mut l: Vec<f64> = r.symmetric_eigen().eigenvalues.iter().copied().collect();
    l.sort_by(|a, b| b.total_cmp(a));
    (l[0] - l[1] - l[2] - l[3]).max(0.0)
}

fn random_two_qubit(r: &mut rand_chacha::ChaCha8Rng, rank: usize) -> Matrix4<C64> {
    let g = nalgebra::DMatrix::from_fn(4, rank, |_, _| common::gaussian_c(r));
    let m = &g * g.adjoint();
    let m = Matrix4::from_fn(|i, j| m[(i, j)]);
    m.unscale(m.trace().re)
}

#[test]
fn concurrence_matches_square_root_form() {
    let mut r = common::rng(24);
    for k in 0..500 {
        let rho = random_two_qubit(&mut r, 1 + k % 4);
        let ours = concurrence(&QubitDensity(rho)).unwrap();
        assert!((ours - concurrence_oracle(&rho)).abs() < 1e-7, "rank {}", 1 + k % 4);
    }
}

#[test]
fn pure_state_concurrence() {
    // C(a|00⟩ + b|01⟩ + c|10⟩ + d|11⟩) = 2|ad − bc|
    let mut r = common::rng(25);
    for _ in 0..200 {
        let v = nalgebra::Vector4::from_fn(|_, _| common::gaussian_c(&mut r)).normalize();
        let oracle = 2.0 * (v[0] * v[3] - v[1] * v[2]).norm();
        let ours = concurrence(&QubitDensity(v * v.adjoint())).unwrap();
        assert!((ours - oracle).abs() < 1e-9);
    }
}

#[test]
fn fidelity_with_pure_state_is_overlap() {
    let mut r = common::rng(26);
    for _ in 0..200 {
        let psi = nalgebra::Vector3::from_fn(|_, _| common::gaussian_c(&mut r)).normalize();
        let sigma = common::random_density(&mut r);
        let oracle = (psi.adjoint() * sigma.0 * psi)[(0, 0)].re;
        let ours = fidelity(&DensityMatrix(psi * psi.adjoint()), &sigma).unwrap();
        assert!((ours - oracle).abs() < 1e-9);
    }
}

#[test]
fn fidelity_of_commuting_states_is_classical() {
    let mut r = common::rng(27);
    for _ in 0..200 {
        let p: Vec<f64> = (0..3).map(|_| r.random_range(0.0..1.0)).collect();
        let q: Vec<f64> = (0..3).map(|_| r.random_range(0.0..1.0)).collect();
        let (sp, sq) = (p.iter().sum::<f64>(), q.iter().sum::<f64>());
        let a = DensityMatrix::diagonal(p[0] / sp, p[1] / sp, p[2] / sp);
        let b = DensityMatrix::diagonal(q[0] / sq, q[1] / sq, q[2] / sq);
        let bc: f64 = p.iter().zip(&q).map(|(x, y)| (x / sp * y / sq).sqrt()).sum();
        assert!((fidelity(&a, &b).unwrap() - bc * bc).abs() < 1e-10);
    }
}

#[test]
fn phase_estimate_recovers_delay_phase() {
    for k in -30..=30 {
        let phi = k as f64 * 0.1;
        let (est, f) = entangle::phase_estimate(&entangle::ideal_hom_state(phi)).unwrap();
        assert!(splitter::wrap_phase(est - phi).abs() <= 1e-3, "{phi} -> {est}");
        assert!(f > 1.0 - 1e-6);
    }
}

#[test]
fn ideal_state_has_expected_amplitudes() {
    let rho = entangle::ideal_hom_state(PI / 3.0);
    let h = FRAC_1_SQRT_2 * FRAC_1_SQRT_2;
    assert!((rho.get(I20, I02) - C64::from_polar(h, -PI / 3.0)).norm() < 1e-15);
}

#[test]
fn mle_recovers_noiseless_mixed_state() {
    let mut r = common::rng(28);
    let truth = common::random_density(&mut r);
    let sets = table1();
    let counts: Vec<_> = sets
        .iter()
        .enumerate()
        .map(|(i, s)| tomo::CountsRecord {
            angle_set_id: i + 1,
            coincidences: (1e9 * predicted_g2(&truth, s).unwrap() / 2.0).round() as u64,
            integration_time: 1.0,
            trials_scale: 1e9,
        })
        .collect();
    let fit = tomo::mle_reconstruct(&counts, &sets, &tomo::MleOptions::default()).unwrap();
    assert!(fit.rho.max_abs_diff(&truth) < 1e-6);
    assert!((fit.scale - 1.0).abs() < 1e-6);
}
