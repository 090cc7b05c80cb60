//! Sequential weak values: the definition-level oracle and their extraction
//! from pointer expectation values.
//!
//! For a chain whose pointers all start in `|0⟩`, each coupling maps the pointer
//! to `cos γ_k|0⟩ + sin γ_k A_k|1⟩`, so the post-selected pointer amplitude on
//! the bit pattern `S` is `⟨ψ_f|ψ_i⟩ Π cos γ_k Π_{k∈S} tan γ_k · W_S`, where
//! `W_S` is the sequential weak value of the modules in `S` (in chain order).
//! Every expectation value is then a finite sum over subsets, which is what
//! [`bracket`] enumerates and [`reconstruct`] inverts.

pub mod bracket;
pub mod expansion;
pub mod reconstruct;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::qcore::{c, Ket2, PauliObservable, PointerSetting, C64};

pub use bracket::{leading_bracket, setting_phase, SubsetValues};
pub use expansion::{expansion_coefficients, ExpansionTable};
pub use reconstruct::{
    reconstruct, schedule, simulate_extraction, simulate_observations, Extraction, Observation, RootPolicy, RunKind,
    ScheduledRun,
};

/// `|⟨ψ_f|ψ_i⟩|` at or below this is treated as orthogonal post-selection.
pub const ORTHOGONAL_OVERLAP: f64 = 1e-12;

/// A sequential weak value together with the observables it belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct SWValue {
    pub value: C64,
    pub order: usize,
    pub observables: Vec<PauliObservable>,
}

impl SWValue {
    pub fn from_oracle(psi_i: &Ket2, psi_f: &Ket2, observables: &[PauliObservable]) -> Result<Self> {
        Ok(SWValue {
            value: weak_value_oracle(psi_i, psi_f, observables)?,
            order: observables.len(),
            observables: observables.to_vec(),
        })
    }
}

/// `⟨ψ_f|A_N···A_1|ψ_i⟩ / ⟨ψ_f|ψ_i⟩` by direct matrix products.
pub fn weak_value_oracle(psi_i: &Ket2, psi_f: &Ket2, observables: &[PauliObservable]) -> Result<C64> {
    let overlap = psi_f.inner(psi_i);
    if overlap.norm() <= ORTHOGONAL_OVERLAP {
        return Err(Error::OrthogonalPostSelection(overlap.norm()));
    }
    let mut v = *psi_i.amp();
    for obs in observables {
        v = obs.matrix() * v;
    }
    Ok(psi_f.amp().dotc(&v) / overlap)
}

/// Which part of the sequential weak value a pointer setting combination reads out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    RealPart,
    ImagPart,
}

/// Even number of `σ_R` settings reads the real part, odd the imaginary part.
pub fn parity_rule(settings: &[PointerSetting]) -> Result<Part> {
    if settings.iter().all(|s| s.is_identity()) {
        return Err(Error::AllIdentity);
    }
    let circular = settings.iter().filter(|s| **s == PointerSetting::Circular).count();
    Ok(if circular % 2 == 0 { Part::RealPart } else { Part::ImagPart })
}

fn check_strength(gamma: f64) -> Result<()> {
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::ZeroStrength(gamma));
    }
    Ok(())
}

/// Inverts `⟨σ₊⟩ = 2γ Re W`, `⟨σ_R⟩ = 2γ Im W`.
pub fn extract_single_firstorder(e_plus: f64, e_circ: f64, gamma: f64) -> Result<C64> {
    check_strength(gamma)?;
    Ok(c(e_plus / (2.0 * gamma), e_circ / (2.0 * gamma)))
}

/// Exact inversion of the single-Pauli pointer expectations
/// `⟨σ₊⟩ = sin 2γ Re W / (cos²γ + sin²γ |W|²)` (and `Im W` for `⟨σ_R⟩`).
///
/// Two weak values, `W` and `W / (tan²γ |W|²)`, produce identical expectations;
/// this picks the branch connected to `W = 0`. Use [`extract_single_exact_with`]
/// with [`RootPolicy::PassRatio`] when the post-selection rate is known.
pub fn extract_single_exact(e_plus: f64, e_circ: f64, gamma: f64) -> Result<C64> {
    extract_single_exact_with(e_plus, e_circ, gamma, RootPolicy::Continuity)
}

pub fn extract_single_exact_with(e_plus: f64, e_circ: f64, gamma: f64, policy: RootPolicy) -> Result<C64> {
    if !(gamma > 0.0 && gamma <= std::f64::consts::FRAC_PI_4 + 1e-15) {
        return Err(Error::ZeroStrength(gamma));
    }
    let values = SubsetValues::new(1);
    reconstruct::solve_exact(
        0b1,
        &[PointerSetting::Plus],
        e_plus,
        &[PointerSetting::Circular],
        e_circ,
        &values,
        &[gamma],
        policy,
    )
}

/// First-order extraction of a two-observable sequential weak value.
///
/// `e` must hold `(Plus, Plus)` and one odd-parity pair. The odd-pair sign
/// structure comes from [`leading_bracket`]'s subset enumeration, which the
/// test suite checks against [`expansion_coefficients`] fits.
pub fn extract_pair_firstorder(
    e: &BTreeMap<(PointerSetting, PointerSetting), f64>,
    w1: C64,
    w2: C64,
    gammas: [f64; 2],
) -> Result<C64> {
    use PointerSetting::*;
    gammas.iter().try_for_each(|g| check_strength(*g))?;
    let e_pp = *e.get(&(Plus, Plus)).ok_or_else(|| Error::MissingSetting("(Plus, Plus)".into()))?;
    let odd: Vec<_> = e
        .iter()
        .filter(|(k, _)| {
            !k.0.is_identity() && !k.1.is_identity() && parity_rule(&[k.0, k.1]) == Ok(Part::ImagPart)
        })
        .collect();
    let (odd_key, e_odd) = match odd.as_slice() {
        [(k, v)] => (**k, **v),
        [] => return Err(Error::MissingSetting("odd-parity pair, e.g. (Plus, Circular)".into())),
        _ => return Err(Error::InvalidArgument("more than one odd-parity pair supplied".into())),
    };
    let mut lower = SubsetValues::new(2);
    lower.set(0b01, w1);
    lower.set(0b10, w2);
    reconstruct::solve_firstorder(0b11, &[Plus, Plus], e_pp, &[odd_key.0, odd_key.1], e_odd, &lower, &gammas)
}

/// Lower-order values for [`extract_triple_firstorder`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowerOrder {
    pub w1: C64,
    pub w2: C64,
    pub w3: C64,
    pub w12: C64,
    pub w13: C64,
    pub w23: C64,
}

/// First-order extraction of a three-observable sequential weak value from
/// `⟨σ₊σ₊σ₊⟩` and `⟨σ_Rσ_Rσ_R⟩`:
///
/// `Re W₁₂₃ = e₊₊₊/(2γ³) − Re Σ`, `Im W₁₂₃ = −e_RRR/(2γ³) + Im Σ`,
/// with `Σ = W₁₂W₃* + W₁₃W₂* + W₂₃W₁*`.
pub fn extract_triple_firstorder(e_ppp: f64, e_ccc: f64, lower: &LowerOrder, gammas: [f64; 3]) -> Result<C64> {
    gammas.iter().try_for_each(|g| check_strength(*g))?;
    let t = gammas.iter().product::<f64>();
    let cross = lower.w12 * lower.w3.conj() + lower.w13 * lower.w2.conj() + lower.w23 * lower.w1.conj();
    Ok(c(e_ppp / (2.0 * t) - cross.re, -e_ccc / (2.0 * t) + cross.im))
}
