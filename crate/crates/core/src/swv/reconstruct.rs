//! Bottom-up reconstruction of every sub-sequence weak value from a schedule
//! of pointer measurements.
//!
//! Each nonempty subset `S` of the target modules is measured on its own with
//! the remaining modules switched off (`γ = 0`): one even-parity combination
//! (all Plus) and one odd-parity combination. Lower-order values are solved
//! first and feed the cross terms of higher orders.

use crate::chain::{evolve, pointer_joint_expectation, post_select, Chain};
use crate::error::{Error, Result};
use crate::qcore::{c, PointerSetting, C64};

use super::bracket::{cross_terms, readout_mask, setting_phase, subsets, weight, SubsetValues};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Extraction {
    /// Leading-order inversion, bias `O(γ²)`.
    FirstOrder,
    /// Exact inversion for Pauli observables.
    ExactPauli,
}

/// How the exact inversion picks between its two algebraic roots.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RootPolicy {
    /// The branch connected to vanishing weak value.
    Continuity,
    /// The root closest to the measured ratio
    /// `p_pass(γ) / (p_pass(γ=0) Π cos²γ_k)`.
    PassRatio(f64),
    /// Skips the quadratic and uses the measured ratio as the normalization.
    /// Linear in the data, so it stays well conditioned where the two roots meet.
    Normalization(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunKind {
    /// All modules off; measures `|⟨ψ_f|ψ_i⟩|²`.
    Reference,
    Even,
    Odd,
}

/// One measurement configuration: which modules are on and what each pointer reads.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScheduledRun {
    pub mask: u32,
    pub settings: Vec<PointerSetting>,
    pub kind: RunKind,
}

/// Measured (or computed) outcome of one [`ScheduledRun`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub expectation: f64,
    pub pass_probability: f64,
}

fn settings_for(n: usize, mask: u32, odd: bool) -> Vec<PointerSetting> {
    let members: Vec<usize> = (0..n).filter(|k| mask >> k & 1 == 1).collect();
    let mut settings = vec![PointerSetting::Identity; n];
    for (pos, &k) in members.iter().enumerate() {
        settings[k] = if !odd {
            PointerSetting::Plus
        } else if members.len() % 2 == 1 || pos > 0 {
            PointerSetting::Circular
        } else {
            PointerSetting::Plus
        };
    }
    settings
}

/// Runs needed to reconstruct the weak value of `target` on an `n`-module chain.
///
/// Ordered by subset size then mask, so a single pass can solve them in order.
pub fn schedule(n: usize, target: u32, extraction: Extraction) -> Vec<ScheduledRun> {
    let mut masks: Vec<u32> = subsets(target).filter(|&m| m != 0).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    let mut runs = Vec::with_capacity(2 * masks.len() + 1);
    if extraction == Extraction::ExactPauli {
        runs.push(ScheduledRun {
            mask: 0,
            settings: vec![PointerSetting::Identity; n],
            kind: RunKind::Reference,
        });
    }
    for m in masks {
        runs.push(ScheduledRun { mask: m, settings: settings_for(n, m, false), kind: RunKind::Even });
        runs.push(ScheduledRun { mask: m, settings: settings_for(n, m, true), kind: RunKind::Odd });
    }
    runs
}

/// Noiseless observations of every scheduled run on `chain`.
pub fn simulate_observations(chain: &Chain, runs: &[ScheduledRun]) -> Result<Vec<Observation>> {
    runs.iter()
        .map(|r| {
            let sub = chain.restricted(r.mask);
            let ps = post_select(&evolve(&sub)?, sub.psi_f());
            Ok(Observation {
                expectation: pointer_joint_expectation(&ps, &r.settings)?,
                pass_probability: ps.norm_sq(),
            })
        })
        .collect()
}

/// Weak value of all active modules of `chain`, extracted from its exact pointer statistics.
pub fn simulate_extraction(chain: &Chain, extraction: Extraction) -> Result<C64> {
    let target = chain.active_mask();
    if target == 0 {
        return Err(Error::ZeroStrength(0.0));
    }
    let runs = schedule(chain.len(), target, extraction);
    let obs = simulate_observations(chain, &runs)?;
    Ok(reconstruct(&chain.gammas(), &runs, &obs, extraction)?.get(target).expect("target reconstructed"))
}

/// Solves the schedule bottom-up and returns the weak value of every subset.
pub fn reconstruct(
    gammas: &[f64],
    runs: &[ScheduledRun],
    observations: &[Observation],
    extraction: Extraction,
) -> Result<SubsetValues> {
    if runs.len() != observations.len() {
        return Err(Error::InvalidArgument(format!(
            "{} runs but {} observations",
            runs.len(),
            observations.len()
        )));
    }
    let n = gammas.len();
    let mut values = SubsetValues::new(n);
    let reference = runs
        .iter()
        .zip(observations)
        .find(|(r, _)| r.kind == RunKind::Reference)
        .map(|(_, o)| o.pass_probability);

    let mut i = 0;
    while i < runs.len() {
        let run = &runs[i];
        if run.kind == RunKind::Reference {
            i += 1;
            continue;
        }
        let (even, odd) = match runs.get(i + 1) {
            Some(next) if next.mask == run.mask => {
                if run.kind == RunKind::Even {
                    ((run, &observations[i]), (next, &observations[i + 1]))
                } else {
                    ((next, &observations[i + 1]), (run, &observations[i]))
                }
            }
            _ => return Err(Error::MissingSetting(format!("partner run for subset {:#b}", run.mask))),
        };
        let mask = run.mask;
        let w = match extraction {
            Extraction::FirstOrder => solve_firstorder(
                mask,
                &even.0.settings,
                even.1.expectation,
                &odd.0.settings,
                odd.1.expectation,
                &values,
                gammas,
            )?,
            Extraction::ExactPauli => {
                let policy = match reference {
                    Some(p0) if p0 > 0.0 => {
                        let p = 0.5 * (even.1.pass_probability + odd.1.pass_probability);
                        let cos2 = weight(&gammas.iter().map(|g| g.cos().powi(2)).collect::<Vec<_>>(), mask);
                        RootPolicy::Normalization(p / (p0 * cos2))
                    }
                    _ => RootPolicy::Continuity,
                };
                solve_exact(
                    mask,
                    &even.0.settings,
                    even.1.expectation,
                    &odd.0.settings,
                    odd.1.expectation,
                    &values,
                    gammas,
                    policy,
                )?
            }
        };
        values.set(mask, w);
        i += 2;
    }
    Ok(values)
}

fn check_pair(mask: u32, s_even: &[PointerSetting], s_odd: &[PointerSetting], gammas: &[f64]) -> Result<()> {
    if readout_mask(s_even) != mask || readout_mask(s_odd) != mask {
        return Err(Error::InvalidArgument(format!("settings do not read out exactly subset {mask:#b}")));
    }
    for (k, g) in gammas.iter().enumerate() {
        if mask >> k & 1 == 1 && (g.is_nan() || *g <= 0.0) {
            return Err(Error::ZeroStrength(*g));
        }
    }
    Ok(())
}

// Solves Re(φ_e W) = x_e, Re(φ_o W) = x_o for W.
fn solve_linear(phi_e: C64, x_e: f64, phi_o: C64, x_o: f64) -> Result<C64> {
    let det = -phi_e.re * phi_o.im + phi_e.im * phi_o.re;
    if det.abs() < 0.5 {
        return Err(Error::InvalidArgument("setting pair does not contain both parities".into()));
    }
    let re = (-x_e * phi_o.im + phi_e.im * x_o) / det;
    let im = (phi_e.re * x_o - phi_o.re * x_e) / det;
    Ok(c(re, im))
}

/// Leading-order inversion for the subset `mask` given its lower-order values.
pub(crate) fn solve_firstorder(
    mask: u32,
    s_even: &[PointerSetting],
    e_even: f64,
    s_odd: &[PointerSetting],
    e_odd: f64,
    lower: &SubsetValues,
    gammas: &[f64],
) -> Result<C64> {
    check_pair(mask, s_even, s_odd, gammas)?;
    let t = weight(gammas, mask);
    let unit = vec![1.0; gammas.len()];
    let x_e = 0.5 * (e_even / t - cross_terms(s_even, lower, &unit));
    let x_o = 0.5 * (e_odd / t - cross_terms(s_odd, lower, &unit));
    solve_linear(setting_phase(s_even, mask), x_e, setting_phase(s_odd, mask), x_o)
}

/// Exact inversion for Pauli observables.
///
/// With `t_k = tan γ_k`, `T = Π t_k` and `N = Σ_{S⊆M} |t^S W_S|²` (the
/// post-selection rate relative to `|⟨ψ_f|ψ_i⟩|² Π cos²γ_k`), each readout obeys
/// `E N = L + 2T Re(φ_M W)`. Solving the two readouts for `W(N)` and
/// substituting into the definition of `N` gives a quadratic in `N`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn solve_exact(
    mask: u32,
    s_even: &[PointerSetting],
    e_even: f64,
    s_odd: &[PointerSetting],
    e_odd: f64,
    lower: &SubsetValues,
    gammas: &[f64],
    policy: RootPolicy,
) -> Result<C64> {
    check_pair(mask, s_even, s_odd, gammas)?;
    let tans: Vec<f64> = gammas.iter().map(|g| g.tan()).collect();
    let t = weight(&tans, mask);
    let k: f64 = subsets(mask)
        .filter(|&s| s != mask)
        .map(|s| {
            let w = lower.get(s).ok_or_else(|| Error::MissingSetting(format!("subset {s:#b}")))?;
            Ok(w.norm_sqr() * weight(&tans, s).powi(2))
        })
        .sum::<Result<f64>>()?;
    let l_e = cross_terms(s_even, lower, &tans);
    let l_o = cross_terms(s_odd, lower, &tans);
    let (phi_e, phi_o) = (setting_phase(s_even, mask), setting_phase(s_odd, mask));
    // W(N) = αN + β
    let alpha = solve_linear(phi_e, e_even / (2.0 * t), phi_o, e_odd / (2.0 * t))?;
    let beta = solve_linear(phi_e, -l_e / (2.0 * t), phi_o, -l_o / (2.0 * t))?;
    if let RootPolicy::Normalization(n) = policy {
        if !n.is_finite() || n <= 0.0 {
            return Err(Error::NoPhysicalRoot);
        }
        return Ok(alpha * n + beta);
    }
    let t2 = t * t;
    let a = t2 * alpha.norm_sqr();
    let b = 1.0 - 2.0 * t2 * (alpha.re * beta.re + alpha.im * beta.im);
    let c0 = t2 * beta.norm_sqr() + k;

    let tol = 1e-9 * k.max(1.0);
    let roots: Vec<f64> = if a <= 1e-300 {
        if b <= 0.0 {
            return Err(Error::NoPhysicalRoot);
        }
        vec![c0 / b]
    } else {
        let mut disc = b * b - 4.0 * a * c0;
        if disc < 0.0 {
            if disc < -1e-10 * b * b {
                return Err(Error::NoPhysicalRoot);
            }
            disc = 0.0;
        }
        if b <= 0.0 {
            return Err(Error::NoPhysicalRoot);
        }
        let sq = disc.sqrt();
        vec![2.0 * c0 / (b + sq), (b + sq) / (2.0 * a)]
    };
    let physical: Vec<f64> = roots.into_iter().filter(|&n| n.is_finite() && n >= k - tol).collect();
    let n = match policy {
        RootPolicy::Continuity => physical.first().copied(),
        RootPolicy::PassRatio(r) => physical
            .iter()
            .copied()
            .min_by(|x, y| (x - r).abs().total_cmp(&(y - r).abs())),
        RootPolicy::Normalization(_) => unreachable!(),
    }
    .ok_or(Error::NoPhysicalRoot)?;
    Ok(alpha * n + beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{sigma_phi, Ket2, PauliObservable};
    use crate::swv::weak_value_oracle;
    use PointerSetting::*;

    fn exact_observations(chain: &Chain, runs: &[ScheduledRun]) -> Vec<Observation> {
        simulate_observations(chain, runs).unwrap()
    }

    #[test]
    fn schedule_layout() {
        let runs = schedule(3, 0b111, Extraction::ExactPauli);
        assert_eq!(runs.len(), 15);
        assert_eq!(runs[0].kind, RunKind::Reference);
        assert_eq!(runs[1].settings, vec![Plus, Identity, Identity]);
        assert_eq!(runs[2].settings, vec![Circular, Identity, Identity]);
        let pair = runs.iter().find(|r| r.mask == 0b011 && r.kind == RunKind::Odd).unwrap();
        assert_eq!(pair.settings, vec![Plus, Circular, Identity]);
        let last = runs.last().unwrap();
        assert_eq!(last.settings, vec![Circular, Circular, Circular]);
        assert_eq!(schedule(3, 0b101, Extraction::FirstOrder).len(), 6);
    }

    #[test]
    fn exact_hierarchy_recovers_every_subset() {
        let obs = [PauliObservable::sy(), PauliObservable::sz(), sigma_phi(std::f64::consts::FRAC_PI_3).unwrap()];
        let psi_i = Ket2::plus();
        for theta in [0.0f64, 30.0, 95.0, 130.0, 140.0, 170.0] {
            let psi_f = Ket2::linear(theta.to_radians());
            for deg in [25.0f64, 30.0] {
                let chain = Chain::uniform(psi_i, &obs, deg.to_radians(), psi_f).unwrap();
                let runs = schedule(3, 0b111, Extraction::ExactPauli);
                let values =
                    reconstruct(&chain.gammas(), &runs, &exact_observations(&chain, &runs), Extraction::ExactPauli)
                        .unwrap();
                for (mask, w) in values.iter() {
                    let sub: Vec<_> = (0..3).filter(|k| mask >> k & 1 == 1).map(|k| obs[k]).collect();
                    let oracle = weak_value_oracle(&psi_i, &psi_f, &sub).unwrap();
                    assert!(
                        (w - oracle).norm() < 1e-9 * (1.0 + oracle.norm()),
                        "θ={theta} γ={deg} mask={mask:#b}: {w} vs {oracle}"
                    );
                }
            }
        }
    }

    #[test]
    fn mixed_strengths_are_supported() {
        let obs = [PauliObservable::sy(), sigma_phi(0.3).unwrap()];
        let psi_i = Ket2::normalized(c(0.9, 0.0), c(0.1, 0.4)).unwrap();
        let psi_f = Ket2::linear(0.7);
        let modules = vec![
            crate::chain::WeakModule::new(obs[0], 0.2).unwrap(),
            crate::chain::WeakModule::new(obs[1], 0.55).unwrap(),
        ];
        let chain = Chain::new(psi_i, modules, psi_f).unwrap();
        let runs = schedule(2, 0b11, Extraction::ExactPauli);
        let values =
            reconstruct(&chain.gammas(), &runs, &exact_observations(&chain, &runs), Extraction::ExactPauli).unwrap();
        let oracle = weak_value_oracle(&psi_i, &psi_f, &obs).unwrap();
        assert!((values.get(0b11).unwrap() - oracle).norm() < 1e-9);
    }

    #[test]
    fn firstorder_hierarchy_converges() {
        let obs = [PauliObservable::sy(), PauliObservable::sz(), sigma_phi(std::f64::consts::FRAC_PI_3).unwrap()];
        let psi_i = Ket2::plus();
        let psi_f = Ket2::h();
        let oracle = weak_value_oracle(&psi_i, &psi_f, &obs).unwrap();
        let err = |g: f64| {
            let chain = Chain::uniform(psi_i, &obs, g, psi_f).unwrap();
            let runs = schedule(3, 0b111, Extraction::FirstOrder);
            let v = reconstruct(&chain.gammas(), &runs, &exact_observations(&chain, &runs), Extraction::FirstOrder)
                .unwrap();
            (v.get(0b111).unwrap() - oracle).norm()
        };
        assert!(err(0.01) <= err(0.1) / 5.0);
        assert!(err(0.01) < 1e-3);
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let runs = schedule(1, 0b1, Extraction::FirstOrder);
        assert!(reconstruct(&[0.1], &runs, &[], Extraction::FirstOrder).is_err());
        let obs = vec![Observation { expectation: 0.1, pass_probability: 0.5 }; 2];
        assert!(matches!(reconstruct(&[0.0], &runs, &obs, Extraction::FirstOrder), Err(Error::ZeroStrength(_))));
    }
}
