#![allow(dead_code)]

use homtomo::entangle::QubitDensity;
use homtomo::fock::DensityMatrix;
use homtomo::linalg::{c, C64};
use nalgebra::{Matrix2, Matrix3, Matrix4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_c(rng: &mut ChaCha8Rng) -> C64 {
    c(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

/// Ginibre-distributed mixed state: `G G† / Tr`.
pub fn random_density(rng: &mut ChaCha8Rng) -> DensityMatrix {
    let g = Matrix3::from_fn(|_, _| gaussian_c(rng));
    let m = g * g.adjoint();
    DensityMatrix(m.unscale(m.trace().re))
}

pub fn random_pure(rng: &mut ChaCha8Rng) -> DensityMatrix {
    let v = nalgebra::Vector3::from_fn(|_, _| gaussian_c(rng)).normalize();
    DensityMatrix(v * v.adjoint())
}

/// Random state supported on the `{|0̄1̄⟩, |1̄0̄⟩}` block.
pub fn random_block_state(rng: &mut ChaCha8Rng) -> QubitDensity {
    let g = Matrix2::from_fn(|_, _| gaussian_c(rng));
    let b = g * g.adjoint();
    let b = b.unscale(b.trace().re);
    let mut m = Matrix4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            m[(1 + i, 1 + j)] = b[(i, j)];
        }
    }
    QubitDensity(m)
}

/// `(|2,0⟩ + |0,2⟩)/√2`
pub fn ideal_hom() -> DensityMatrix {
    let (h, z) = (c(0.5, 0.0), c(0.0, 0.0));
    DensityMatrix::from_row_slice(&[h, z, h, z, z, z, h, z, h])
}

pub fn dephased_mixture() -> DensityMatrix {
    DensityMatrix::diagonal(0.5, 0.0, 0.5)
}
