//! System–pointer evolution for a chain of weak-measurement modules.
//!
//! Each module couples the system qubit to its own pointer qubit through
//! `exp(−iγ σ_A ⊗ σ_y) = cos γ − i sin γ (σ_A ⊗ σ_y)`. With `σ_y|0⟩ = +i|1⟩`
//! the `+1` eigenstate of `σ_A` rotates its pointer towards `+|1⟩`.
//!
//! Joint amplitudes are indexed with the system qubit as the most significant
//! bit and pointer `k` (1-based) at bit position `N − k`.

use std::f64::consts::FRAC_PI_4;

use nalgebra::Matrix4;

use crate::error::{Error, Result};
use crate::qcore::{c, Amp2, Ket2, Op2, PauliObservable, PointerSetting, C64, ZERO};

pub type Op4 = Matrix4<C64>;

pub const MAX_MODULES: usize = 12;
/// Post-selection weights at or below this are reported as [`Error::ZeroPostSelection`].
pub const ZERO_POSTSELECTION: f64 = 1e-15;

/// One weak measurement: a Pauli observable coupled with strength `gamma` (radians).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakModule {
    obs: PauliObservable,
    gamma: f64,
}

impl WeakModule {
    /// `gamma` must lie in `[0, π/4]`; zero means the module performs no measurement.
    pub fn new(obs: PauliObservable, gamma: f64) -> Result<Self> {
        if !gamma.is_finite() {
            return Err(Error::NonFinite("gamma"));
        }
        if !(0.0..=FRAC_PI_4 + 1e-15).contains(&gamma) {
            return Err(Error::StrengthOutOfRange(gamma));
        }
        Ok(WeakModule { obs, gamma })
    }

    pub fn obs(&self) -> &PauliObservable {
        &self.obs
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        WeakModule::new(self.obs, gamma)
    }

    pub fn is_active(&self) -> bool {
        self.gamma > 0.0
    }
}

/// Pre-selection, ordered modules, post-selection.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    psi_i: Ket2,
    modules: Vec<WeakModule>,
    psi_f: Ket2,
}

impl Chain {
    pub fn new(psi_i: Ket2, modules: Vec<WeakModule>, psi_f: Ket2) -> Result<Self> {
        if modules.is_empty() {
            return Err(Error::EmptyChain);
        }
        if modules.len() > MAX_MODULES {
            return Err(Error::ChainTooLong(modules.len()));
        }
        Ok(Chain { psi_i, modules, psi_f })
    }

    /// Convenience constructor with one shared strength.
    pub fn uniform(psi_i: Ket2, observables: &[PauliObservable], gamma: f64, psi_f: Ket2) -> Result<Self> {
        let modules = observables
            .iter()
            .map(|o| WeakModule::new(*o, gamma))
            .collect::<Result<Vec<_>>>()?;
        Chain::new(psi_i, modules, psi_f)
    }

    pub fn psi_i(&self) -> &Ket2 {
        &self.psi_i
    }

    pub fn psi_f(&self) -> &Ket2 {
        &self.psi_f
    }

    pub fn modules(&self) -> &[WeakModule] {
        &self.modules
    }

    pub fn len(&self) -> usize {
        self.modules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modules.is_empty()
    }

    pub fn observables(&self) -> Vec<PauliObservable> {
        self.modules.iter().map(|m| m.obs).collect()
    }

    /// Bitmask of the modules with `γ > 0`.
    pub fn active_mask(&self) -> u32 {
        self.modules
            .iter()
            .enumerate()
            .filter(|(_, m)| m.is_active())
            .fold(0, |acc, (k, _)| acc | 1 << k)
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.modules.iter().map(|m| m.gamma).collect()
    }

    pub fn with_psi_f(&self, psi_f: Ket2) -> Chain {
        Chain { psi_f, ..self.clone() }
    }

    /// Same chain with every strength replaced by `gamma`.
    pub fn with_uniform_gamma(&self, gamma: f64) -> Result<Chain> {
        let modules = self
            .modules
            .iter()
            .map(|m| m.with_gamma(gamma))
            .collect::<Result<Vec<_>>>()?;
        Ok(Chain { modules, ..self.clone() })
    }

    /// Keeps the modules whose bit is set in `mask` (bit `k` = module `k`, 0-based)
    /// and sets all others to `γ = 0`.
    pub fn restricted(&self, mask: u32) -> Chain {
        let modules = self
            .modules
            .iter()
            .enumerate()
            .map(|(k, m)| if mask >> k & 1 == 1 { *m } else { WeakModule { gamma: 0.0, ..*m } })
            .collect();
        Chain { modules, ..self.clone() }
    }
}

/// System ⊗ pointers amplitudes of length `2^(N+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointState {
    n_pointers: usize,
    amplitudes: Vec<C64>,
}

impl JointState {
    pub fn n_pointers(&self) -> usize {
        self.n_pointers
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Index of basis state (system `s`, pointer bits `p[0..N]`).
    pub fn index(n_pointers: usize, system: usize, pointers: &[usize]) -> usize {
        let mut idx = system << n_pointers;
        for (k, &p) in pointers.iter().enumerate() {
            idx |= p << (n_pointers - 1 - k);
        }
        idx
    }
}

/// Unnormalized pointer amplitudes after post-selection, length `2^N`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointerState {
    n_pointers: usize,
    amplitudes: Vec<C64>,
    norm_sq: f64,
}

impl PointerState {
    pub fn n_pointers(&self) -> usize {
        self.n_pointers
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    /// Post-selection success probability.
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }
}

/// `cos γ · I₄ − i sin γ · (σ_A ⊗ σ_y)`, tensor order system ⊗ pointer.
pub fn coupling_unitary(obs: &PauliObservable, gamma: f64) -> Op4 {
    let a = obs.matrix();
    let y = crate::qcore::pauli_y();
    let (s, cg) = gamma.sin_cos();
    let mut u = Op4::identity() * c(cg, 0.0);
    let k = c(0.0, -s);
    for r in 0..4 {
        for col in 0..4 {
            u[(r, col)] += k * a[(r / 2, col / 2)] * y[(r % 2, col % 2)];
        }
    }
    u
}

pub fn evolve(chain: &Chain) -> Result<JointState> {
    let n = chain.modules.len();
    if n > MAX_MODULES {
        return Err(Error::ChainTooLong(n));
    }
    let dim = 1usize << (n + 1);
    let mut amps = vec![ZERO; dim];
    amps[0] = chain.psi_i.a0();
    amps[1 << n] = chain.psi_i.a1();
    let sbit = 1usize << n;
    for (k, module) in chain.modules.iter().enumerate() {
        if module.gamma == 0.0 {
            continue;
        }
        let u = coupling_unitary(&module.obs, module.gamma);
        let pbit = 1usize << (n - 1 - k);
        for base in 0..dim {
            if base & (sbit | pbit) != 0 {
                continue;
            }
            let idx = [base, base | pbit, base | sbit, base | sbit | pbit];
            let v = [amps[idx[0]], amps[idx[1]], amps[idx[2]], amps[idx[3]]];
            for r in 0..4 {
                amps[idx[r]] = (0..4).map(|col| u[(r, col)] * v[col]).sum();
            }
        }
    }
    Ok(JointState { n_pointers: n, amplitudes: amps })
}

/// Contracts the system qubit with `⟨ψ_f|`.
pub fn post_select(joint: &JointState, psi_f: &Ket2) -> PointerState {
    let n = joint.n_pointers;
    let half = 1usize << n;
    let (f0, f1) = (psi_f.a0().conj(), psi_f.a1().conj());
    let amplitudes: Vec<C64> = (0..half)
        .map(|p| f0 * joint.amplitudes[p] + f1 * joint.amplitudes[half + p])
        .collect();
    let norm_sq = amplitudes.iter().map(|a| a.norm_sqr()).sum();
    PointerState { n_pointers: n, amplitudes, norm_sq }
}

/// `⟨Φ| ⊗_k O_k |Φ⟩ / ⟨Φ|Φ⟩` for the given per-pointer settings.
pub fn pointer_joint_expectation(ps: &PointerState, settings: &[PointerSetting]) -> Result<f64> {
    let n = ps.n_pointers;
    if settings.len() != n {
        return Err(Error::SettingsLength { expected: n, got: settings.len() });
    }
    if ps.norm_sq <= ZERO_POSTSELECTION {
        return Err(Error::ZeroPostSelection(ps.norm_sq));
    }
    let mut applied = ps.amplitudes.clone();
    for (k, setting) in settings.iter().enumerate() {
        if setting.is_identity() {
            continue;
        }
        apply_single(&mut applied, n, k, &setting.operator());
    }
    let num: C64 = ps
        .amplitudes
        .iter()
        .zip(&applied)
        .map(|(a, b)| a.conj() * b)
        .sum();
    Ok((num.re / ps.norm_sq).clamp(-1.0, 1.0))
}

/// Applies a single-qubit operator to pointer `k` (0-based) of an `n`-pointer register.
pub(crate) fn apply_single(amps: &mut [C64], n: usize, k: usize, op: &Op2) {
    let bit = 1usize << (n - 1 - k);
    for base in 0..amps.len() {
        if base & bit != 0 {
            continue;
        }
        let (a, b) = (amps[base], amps[base | bit]);
        amps[base] = op[(0, 0)] * a + op[(0, 1)] * b;
        amps[base | bit] = op[(1, 0)] * a + op[(1, 1)] * b;
    }
}

/// System operator `⟨outcome|_p U |0⟩_p` for a pointer analyzer result.
pub fn kraus_branch(module: &WeakModule, outcome: &Ket2) -> Op2 {
    let u = coupling_unitary(&module.obs, module.gamma);
    let o = [outcome.a0().conj(), outcome.a1().conj()];
    let mut k = Op2::zeros();
    for r in 0..2 {
        for col in 0..2 {
            k[(r, col)] = (0..2).map(|p| o[p] * u[(2 * r + p, 2 * col)]).sum();
        }
    }
    k
}

/// `⟨ψ_f|ψ_i⟩ exp(−iγW σ_y)|0⟩` with complex `W`, the weak-coupling approximation
/// of the single-module post-selected pointer state.
pub fn first_order_pointer(overlap: C64, weak_value: C64, gamma: f64) -> Amp2 {
    let arg = weak_value * gamma;
    Amp2::new(overlap * arg.cos(), overlap * arg.sin())
}
