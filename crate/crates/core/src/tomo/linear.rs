use nalgebra::{Matrix3, SMatrix, SVector};

use super::{analysis_vector, validate_sets, AngleSet};
use crate::error::{Error, Result};
use crate::fock::DensityMatrix;
use crate::linalg::{c, C64};

/// Smallest-to-largest singular value ratio below which the nine angle sets
/// are declared dependent.
const SINGULAR_TOL: f64 = 1e-10;

const FACTORIAL: [f64; 3] = [1.0, 1.0, 2.0];

/// `√((2−y)! y! (2−w)! w!)`, linking coherence `g(w, y)` to `ρ[y][w]`.
fn element_norm(w: usize, y: usize) -> f64 {
    (FACTORIAL[2 - y] * FACTORIAL[y] * FACTORIAL[2 - w] * FACTORIAL[w]).sqrt()
}

fn binomial2(k: usize) -> f64 {
    [1.0, 2.0, 1.0][k]
}

/// Off-diagonal `(w, y)` pairs in parameter order.
const OFF: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// The nine second-order coherences
/// `g(w, y) = ⟨(a_H†)^{2−w} (a_V†)^w a_H^{2−y} a_V^y⟩`, indexed `[w][y]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceVector(pub [[C64; 3]; 3]);

impl CoherenceVector {
    pub fn zero() -> Self {
        Self([[c(0.0, 0.0); 3]; 3])
    }

    pub fn get(&self, w: usize, y: usize) -> C64 {
        self.0[w][y]
    }

    /// Coherences of a density matrix; the inverse of [`coherences_to_density`].
    pub fn from_density(rho: &DensityMatrix) -> Self {
        let mut g = [[c(0.0, 0.0); 3]; 3];
        for (w, row) in g.iter_mut().enumerate() {
            for (y, slot) in row.iter_mut().enumerate() {
                *slot = rho.get(y, w) * element_norm(w, y);
            }
        }
        Self(g)
    }

    /// Real parameters `[g00, g11, g22, Re g01, Re g02, Re g12, Im g01, Im g02, Im g12]`.
    pub fn to_params(&self) -> [f64; 9] {
        let g = &self.0;
        let mut x = [g[0][0].re, g[1][1].re, g[2][2].re, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        for (k, &(w, y)) in OFF.iter().enumerate() {
            x[3 + k] = g[w][y].re;
            x[6 + k] = g[w][y].im;
        }
        x
    }

    /// Inverse of [`Self::to_params`]; fills the lower triangle by conjugation.
    pub fn from_params(x: &[f64; 9]) -> Self {
        let mut g = [[c(0.0, 0.0); 3]; 3];
        for k in 0..3 {
            g[k][k] = c(x[k], 0.0);
        }
        for (k, &(w, y)) in OFF.iter().enumerate() {
            g[w][y] = c(x[3 + k], x[6 + k]);
            g[y][w] = c(x[3 + k], -x[6 + k]);
        }
        Self(g)
    }

    /// Largest violation of `g(w, y) = g(y, w)*` and of real diagonals.
    pub fn pairing_error(&self) -> f64 {
        let g = &self.0;
        let mut err: f64 = 0.0;
        for w in 0..3 {
            err = err.max(g[w][w].im.abs());
            for y in 0..3 {
                err = err.max((g[w][y] - g[y][w].conj()).norm());
            }
        }
        err
    }
}

/// Maps coherences to density-matrix elements, `ρ[y][w] = g(w, y)/√((2−y)! y! (2−w)! w!)`.
///
/// The result is Hermitian but is not renormalized or projected, so noisy
/// input can give a trace away from 1 or negative eigenvalues.
pub fn coherences_to_density(g: &CoherenceVector) -> Result<DensityMatrix> {
    let scale = g.0.iter().flatten().map(|z| z.norm()).fold(1.0, f64::max);
    let err = g.pairing_error();
    if err > 1e-10 * scale {
        return Err(Error::Consistency(format!(
            "coherences violate Hermitian pairing by {err:.3e}"
        )));
    }
    let rho = Matrix3::from_fn(|y, w| g.get(w, y) / element_norm(w, y));
    Ok(DensityMatrix(rho))
}

/// Linear map from the coherence parameters to the nine intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub matrix: SMatrix<f64, 9, 9>,
    pub condition: f64,
}

/// Coefficients of one intensity row: `I = Σ_{w,y} c(w,y) g(w,y)` with
/// `c(w,y) = C(2,w) C(2,y) u*^{2−w} v*^w u^{2−y} v^y`, folded onto the
/// nine real parameters.
pub(crate) fn design_row(s: &AngleSet) -> [f64; 9] {
    let (u, v) = analysis_vector(s);
    let coef = |w: usize, y: usize| {
        u.conj().powi((2 - w) as i32) * v.conj().powi(w as i32) * u.powi((2 - y) as i32) * v.powi(y as i32)
            * (binomial2(w) * binomial2(y))
    };
    let mut row = [coef(0, 0).re, coef(1, 1).re, coef(2, 2).re, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    for (k, &(w, y)) in OFF.iter().enumerate() {
        let cw = coef(w, y);
        row[3 + k] = 2.0 * cw.re;
        row[6 + k] = -2.0 * cw.im;
    }
    row
}

pub fn design_matrix(sets: &[AngleSet]) -> Result<DesignMatrix> {
    validate_sets(sets)?;
    let mut matrix = SMatrix::<f64, 9, 9>::zeros();
    for (i, s) in sets.iter().enumerate() {
        for (j, x) in design_row(s).into_iter().enumerate() {
            matrix[(i, j)] = x;
        }
    }
    let sv = matrix.singular_values();
    let (max, min) = (sv.max(), sv.min());
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(min > SINGULAR_TOL * max) {
        return Err(Error::DependentAngleSets { condition });
    }
    Ok(DesignMatrix { matrix, condition })
}

/// Solves the nine intensity equations for the coherences. No physicality
/// is imposed.
pub fn linear_invert(intensities: &[f64; 9], sets: &[AngleSet]) -> Result<CoherenceVector> {
    let design = design_matrix(sets)?;
    let rhs = SVector::<f64, 9>::from_column_slice(intensities);
    let x = design
        .matrix
        .lu()
        .solve(&rhs)
        .ok_or(Error::DependentAngleSets { condition: design.condition })?;
    let mut params = [0.0; 9];
    params.copy_from_slice(x.as_slice());
    Ok(CoherenceVector::from_params(&params))
}
