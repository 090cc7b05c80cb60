//! Subset enumeration of pointer correlators.
//!
//! With `Φ_S ∝ (Π_{k∈S} t_k) W_S`, the correlator of a setting combination that
//! reads the pointer set `M` is `Σ_{S⊆M} conj(Φ_{M∖S}) φ(S) Φ_S`, where a Circular
//! pointer contributes `+i` when its bit is off in `S` and `−i` when it is on.

use crate::qcore::{PointerSetting, C64, I, ONE};

/// Sequential weak values keyed by module bitmask (bit `k` = module `k`).
/// The empty subset always holds `1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsetValues {
    n: usize,
    values: Vec<Option<C64>>,
}

impl SubsetValues {
    pub fn new(n: usize) -> Self {
        let mut values = vec![None; 1 << n];
        values[0] = Some(ONE);
        SubsetValues { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, mask: u32) -> Option<C64> {
        self.values.get(mask as usize).copied().flatten()
    }

    pub fn set(&mut self, mask: u32, value: C64) {
        self.values[mask as usize] = Some(value);
    }

    /// All known nonempty subsets in ascending mask order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, C64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .skip(1)
            .filter_map(|(m, v)| v.map(|v| (m as u32, v)))
    }
}

/// Bitmask of the non-Identity settings.
pub fn readout_mask(settings: &[PointerSetting]) -> u32 {
    settings
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.is_identity())
        .fold(0, |m, (k, _)| m | 1 << k)
}

/// Phase picked up by `Φ_S` under the Circular readouts.
pub fn setting_phase(settings: &[PointerSetting], subset: u32) -> C64 {
    settings
        .iter()
        .enumerate()
        .filter(|(_, s)| **s == PointerSetting::Circular)
        .fold(ONE, |acc, (k, _)| if subset >> k & 1 == 1 { acc * -I } else { acc * I })
}

/// Iterates every subset of `mask`, including `0` and `mask` itself.
pub fn subsets(mask: u32) -> impl Iterator<Item = u32> {
    let mut next = Some(mask);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 { None } else { Some((cur - 1) & mask) };
        Some(cur)
    })
}

/// Coefficient of `Π_{k∈M} γ_k` in the small-strength expansion of the
/// correlator read by `settings`. Panics if a needed subset value is missing.
pub fn leading_bracket(settings: &[PointerSetting], values: &SubsetValues) -> f64 {
    let m = readout_mask(settings);
    subsets(m)
        .map(|s| {
            let ws = values.get(s).expect("subset weak value");
            let wc = values.get(m & !s).expect("subset weak value");
            wc.conj() * setting_phase(settings, s) * ws
        })
        .sum::<C64>()
        .re
}

/// Part of the bracket that involves only proper, nonempty subsets of the readout set.
pub(crate) fn cross_terms(settings: &[PointerSetting], values: &SubsetValues, weights: &[f64]) -> f64 {
    let m = readout_mask(settings);
    subsets(m)
        .filter(|&s| s != 0 && s != m)
        .map(|s| {
            let ws = values.get(s).expect("lower-order weak value") * weight(weights, s);
            let wc = values.get(m & !s).expect("lower-order weak value") * weight(weights, m & !s);
            wc.conj() * setting_phase(settings, s) * ws
        })
        .sum::<C64>()
        .re
}

pub(crate) fn weight(weights: &[f64], subset: u32) -> f64 {
    weights
        .iter()
        .enumerate()
        .filter(|(k, _)| subset >> k & 1 == 1)
        .map(|(_, w)| *w)
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::c;
    use PointerSetting::*;

    #[test]
    fn subset_enumeration() {
        let mut all: Vec<u32> = subsets(0b101).collect();
        all.sort();
        assert_eq!(all, vec![0b000, 0b001, 0b100, 0b101]);
        assert_eq!(subsets(0).collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn phases() {
        assert_eq!(setting_phase(&[Plus, Plus], 0b11), ONE);
        assert_eq!(setting_phase(&[Circular], 0), I);
        assert_eq!(setting_phase(&[Circular], 1), -I);
        assert_eq!(setting_phase(&[Circular, Circular, Circular], 0b111), I);
    }

    #[test]
    fn single_bracket_reads_re_and_im() {
        let mut v = SubsetValues::new(1);
        v.set(1, c(0.3, -0.7));
        assert!((leading_bracket(&[Plus], &v) - 0.6).abs() < 1e-15);
        assert!((leading_bracket(&[Circular], &v) + 1.4).abs() < 1e-15);
        assert_eq!(leading_bracket(&[Identity], &v), 1.0);
    }

    #[test]
    fn triple_brackets_match_printed_forms() {
        let mut v = SubsetValues::new(3);
        let vals = [
            (0b001, c(0.2, 0.5)),
            (0b010, c(-1.1, 0.3)),
            (0b100, c(0.4, -0.9)),
            (0b011, c(0.7, 0.1)),
            (0b101, c(-0.2, 0.6)),
            (0b110, c(1.3, -0.4)),
            (0b111, c(0.5, 0.8)),
        ];
        for (m, w) in vals {
            v.set(m, w);
        }
        let g = |m: u32| v.get(m).unwrap();
        let sum = g(0b011) * g(0b100).conj() + g(0b101) * g(0b010).conj() + g(0b110) * g(0b001).conj();
        let ppp = 2.0 * (g(0b111) + sum).re;
        let ccc = 2.0 * (-g(0b111) + sum).im;
        assert!((leading_bracket(&[Plus, Plus, Plus], &v) - ppp).abs() < 1e-14);
        assert!((leading_bracket(&[Circular, Circular, Circular], &v) - ccc).abs() < 1e-14);
    }
}
