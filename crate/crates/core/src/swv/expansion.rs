//! Polynomial fits of pointer correlators in the coupling strength.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::chain::{evolve, pointer_joint_expectation, post_select, Chain};
use crate::error::{Error, Result};
use crate::qcore::PointerSetting;

use super::bracket::readout_mask;

pub const MAX_GRID_GAMMA: f64 = 0.3;
pub const MAX_FIT_RESIDUAL: f64 = 1e-9;

/// Least-squares coefficients of a correlator as a polynomial in γ, orders `0..=2N`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionTable {
    pub settings: Vec<PointerSetting>,
    pub coefficients: Vec<f64>,
    /// Largest absolute residual over the grid.
    pub residual: f64,
}

impl ExpansionTable {
    pub fn coefficient(&self, order: usize) -> f64 {
        self.coefficients.get(order).copied().unwrap_or(0.0)
    }

    /// Coefficient of `γ^|M|`, `M` the set of non-Identity pointers.
    pub fn leading_coefficient(&self) -> f64 {
        self.coefficient(readout_mask(&self.settings).count_ones() as usize)
    }
}

/// Fits `pointer_joint_expectation(γ)` with every module at the same strength γ.
pub fn expansion_coefficients(
    chain: &Chain,
    settings: &[PointerSetting],
    gamma_grid: &[f64],
) -> Result<ExpansionTable> {
    let n = chain.len();
    if settings.len() != n {
        return Err(Error::SettingsLength { expected: n, got: settings.len() });
    }
    let mut sorted = gamma_grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() < 2 * n + 2 {
        return Err(Error::InvalidGrid(format!("need at least {} distinct values, got {}", 2 * n + 2, sorted.len())));
    }
    if sorted.iter().any(|g| !(*g > 0.0 && *g <= MAX_GRID_GAMMA)) {
        return Err(Error::InvalidGrid(format!("values must lie in (0, {MAX_GRID_GAMMA}]")));
    }

    let samples = sorted
        .par_iter()
        .map(|&g| {
            let c = chain.with_uniform_gamma(g)?;
            let ps = post_select(&evolve(&c)?, c.psi_f());
            pointer_joint_expectation(&ps, settings)
        })
        .collect::<Result<Vec<f64>>>()?;

    // Scaled abscissa keeps the Vandermonde matrix well conditioned.
    let scale = *sorted.last().unwrap();
    let degree = 2 * n;
    let rows = sorted.len();
    let vander = DMatrix::from_fn(rows, degree + 1, |r, k| (sorted[r] / scale).powi(k as i32));
    let rhs = DVector::from_vec(samples.clone());
    let svd = vander.clone().svd(true, true);
    let scaled = svd
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::InvalidGrid(e.to_string()))?;
    let residual = (&vander * &scaled - &rhs).amax();
    if residual > MAX_FIT_RESIDUAL {
        return Err(Error::FitDiverged(residual));
    }
    let coefficients = scaled.iter().enumerate().map(|(k, c)| c / scale.powi(k as i32)).collect();
    Ok(ExpansionTable { settings: settings.to_vec(), coefficients, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{Ket2, PauliObservable};
    use PointerSetting::*;

    pub(crate) fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn single_module_coefficients() {
        let chain = Chain::uniform(Ket2::plus(), &[PauliObservable::sz()], 0.1, Ket2::h()).unwrap();
        // A quadratic absorbs the γ³ term, so c₁ carries an O(γ_max²) bias.
        let t = expansion_coefficients(&chain, &[Plus], &grid(8, 1e-4, 1e-3)).unwrap();
        assert!((t.coefficient(1) - 2.0).abs() < 1e-5, "{:?}", t.coefficients);
        let t = expansion_coefficients(&chain, &[Circular], &grid(8, 1e-4, 1e-3)).unwrap();
        assert!(t.coefficient(1).abs() < 1e-9);
    }

    #[test]
    fn triple_sz_coefficient_is_eight() {
        let sz = PauliObservable::sz();
        let chain = Chain::uniform(Ket2::plus(), &[sz, sz, sz], 0.1, Ket2::h()).unwrap();
        let t = expansion_coefficients(&chain, &[Plus, Plus, Plus], &grid(12, 0.0005, 0.005)).unwrap();
        assert!((t.leading_coefficient() - 8.0).abs() < 1e-6, "{:?}", t.coefficients);
    }

    #[test]
    fn grid_validation() {
        let chain = Chain::uniform(Ket2::plus(), &[PauliObservable::sz()], 0.1, Ket2::h()).unwrap();
        assert!(matches!(
            expansion_coefficients(&chain, &[Plus], &[0.01, 0.02, 0.03]),
            Err(Error::InvalidGrid(_))
        ));
        assert!(matches!(
            expansion_coefficients(&chain, &[Plus], &[0.01, 0.01, 0.02, 0.02, 0.03]),
            Err(Error::InvalidGrid(_))
        ));
        assert!(matches!(
            expansion_coefficients(&chain, &[Plus], &[0.1, 0.2, 0.3, 0.4]),
            Err(Error::InvalidGrid(_))
        ));
        // A wide grid cannot be fitted by a quadratic to 1e-9.
        assert!(matches!(
            expansion_coefficients(&chain, &[Plus], &grid(10, 0.03, 0.29)),
            Err(Error::FitDiverged(_))
        ));
    }
}
