//! Optical realization of a weak-measurement module.
//!
//! The photon carries a path qubit (arm `Down` = 0, `Up` = 1) and its
//! polarization. A module first rotates the observable's eigenbasis onto H/V,
//! then a beam displacer moves the system into the path and leaves the
//! polarization free to act as the pointer:
//!
//! ```text
//! prolog    basis change (HWP(φ/2) for linear observables, QWP·HWP otherwise)
//! core      BD, HWP(π/4) up, HWP(−γ/2) down, HWP(γ/2) up
//! analyzer  QWP(q), HWP(h), PBS
//! epilog    HWP(π/4) down, BD, PathSwap, HWP(π/4), inverse basis change
//! ```
//!
//! Conventions:
//! - `HWP(θ) = [[cos 2θ, sin 2θ], [sin 2θ, −cos 2θ]]`.
//! - `QWP(θ) = R(θ) diag(1, i) R(−θ)`, so `QWP(π/4)|H⟩ ∝ |L⟩ = (|H⟩ − i|V⟩)/√2`.
//! - BD: H keeps its arm, V moves from `Down` to `Up`. V already in `Up` would
//!   leave the apparatus and is reported as [`Error::InvalidLayout`].
//! - PBS: H is transmitted, V reflected; the reflected port is re-encoded as H
//!   so both branches share the epilog.
//! - The core realizes `exp(+iγ σ_A⊗σ_y)`, the mirror image of the abstract
//!   coupling. On Plus and Circular analyzers this swaps the two outcomes,
//!   recorded in [`CircuitModule::labels`].

use std::f64::consts::FRAC_PI_4;
use std::fmt;

use nalgebra::Vector4;
use rayon::prelude::*;

use crate::chain::{kraus_branch, Chain, WeakModule};
use crate::error::{Error, Result};
use crate::qcore::{c, Amp2, Ket2, Op2, PauliObservable, PointerSetting, C64, I, ONE, ZERO};
use crate::sampler::{Cell, OutcomeDistribution, Port};

/// Path ⊗ polarization amplitudes, index `2·arm + pol`.
pub type Amp4 = Vector4<C64>;

/// A compiled module passes verification below this deviation.
pub const VERIFY_TOL: f64 = 1e-10;
const LAYOUT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Hwp,
    Qwp,
    Pbs,
    Bd,
    PathSwap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Arm {
    Both,
    Up,
    Down,
}

impl Arm {
    fn indices(self) -> &'static [usize] {
        match self {
            Arm::Both => &[0, 1],
            Arm::Down => &[0],
            Arm::Up => &[1],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Element {
    pub kind: ElementKind,
    /// Fast-axis angle in radians; zero for non-waveplates.
    pub angle: f64,
    pub arm: Arm,
}

impl Element {
    pub fn new(kind: ElementKind, angle: f64, arm: Arm) -> Result<Self> {
        if !angle.is_finite() {
            return Err(Error::NonFinite("element angle"));
        }
        let waveplate = matches!(kind, ElementKind::Hwp | ElementKind::Qwp);
        if !waveplate && (arm != Arm::Both || angle != 0.0) {
            return Err(Error::InvalidLayout(format!("{kind:?} spans both arms and has no angle")));
        }
        Ok(Element { kind, angle, arm })
    }

    pub fn hwp(angle: f64, arm: Arm) -> Self {
        Element { kind: ElementKind::Hwp, angle, arm }
    }

    pub fn qwp(angle: f64, arm: Arm) -> Self {
        Element { kind: ElementKind::Qwp, angle, arm }
    }

    fn fixed(kind: ElementKind) -> Self {
        Element { kind, angle: 0.0, arm: Arm::Both }
    }
}

impl fmt::Display for Element {
    /// `KIND angle_deg arm`, e.g. `HWP 30.0 both`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ElementKind::Hwp => "HWP",
            ElementKind::Qwp => "QWP",
            ElementKind::Pbs => "PBS",
            ElementKind::Bd => "BD",
            ElementKind::PathSwap => "PATHSWAP",
        };
        let arm = match self.arm {
            Arm::Both => "both",
            Arm::Up => "up",
            Arm::Down => "down",
        };
        let mut deg = (self.angle.to_degrees() * 1e9).round() / 1e9;
        if deg == 0.0 {
            deg = 0.0;
        }
        let text = format!("{deg}");
        let text = if text.contains('.') { text } else { format!("{text}.0") };
        write!(f, "{kind} {text} {arm}")
    }
}

/// Jones matrix of a waveplate.
pub fn jones_matrix(e: &Element) -> Result<Op2> {
    let (s, co) = e.angle.sin_cos();
    match e.kind {
        ElementKind::Hwp => {
            let (s2, c2) = (2.0 * e.angle).sin_cos();
            Ok(Op2::new(c(c2, 0.0), c(s2, 0.0), c(s2, 0.0), c(-c2, 0.0)))
        }
        ElementKind::Qwp => {
            let r = Op2::new(c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0));
            let d = Op2::new(ONE, ZERO, ZERO, I);
            Ok(r * d * r.transpose())
        }
        other => Err(Error::NotAWaveplate(format!("{other:?}"))),
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct CircuitModule {
    pub prolog: Vec<Element>,
    pub core: Vec<Element>,
    /// Waveplates followed by a PBS; empty means no analyzer.
    pub analyzer: Vec<Element>,
    /// Outcome label `s` of the (transmitted, reflected) PBS ports.
    pub labels: [i8; 2],
    pub epilog: Vec<Element>,
    pub setting: Option<PointerSetting>,
}

impl CircuitModule {
    pub fn elements(&self) -> impl Iterator<Item = &Element> {
        self.prolog.iter().chain(&self.core).chain(&self.analyzer).chain(&self.epilog)
    }

    /// One element per line in `KIND angle_deg arm` form.
    pub fn export_text(&self) -> String {
        self.elements().map(|e| format!("{e}\n")).collect()
    }
}

fn bloch(v: &Amp2) -> [f64; 3] {
    let x = v[0].conj() * v[1];
    [2.0 * x.re, 2.0 * x.im, v[0].norm_sqr() - v[1].norm_sqr()]
}

/// Waveplate angles `(q, h)` with `HWP(h)·QWP(q)|target⟩ ∝ |H⟩`.
pub fn analyzer_angles(target: &Ket2) -> (f64, f64) {
    let [x, _, z] = bloch(target.amp());
    let q = 0.5 * x.atan2(z);
    let v = jones_matrix(&Element::qwp(q, Arm::Both)).expect("waveplate") * target.amp();
    let [lx, _, lz] = bloch(&v);
    (q, 0.25 * lx.atan2(lz))
}

/// Prolog and epilog that carry the observable's eigenbasis to and from H/V.
pub fn basis_change(obs: &PauliObservable) -> (Vec<Element>, Vec<Element>) {
    let [x, y, z] = obs.bloch();
    if y.abs() < 1e-12 {
        let plate = Element::hwp(0.25 * x.atan2(z), Arm::Down);
        return (vec![plate], vec![plate]);
    }
    let (plus, _) = crate::qcore::eigenbasis(obs);
    let (q, h) = analyzer_angles(&plus);
    (
        vec![Element::qwp(q, Arm::Down), Element::hwp(h, Arm::Down)],
        vec![Element::hwp(h, Arm::Down), Element::qwp(q + std::f64::consts::FRAC_PI_2, Arm::Down)],
    )
}

/// Element sequence for one module measuring `obs` at strength `gamma`, read with `setting`.
pub fn compile_module(obs: &PauliObservable, gamma: f64, setting: PointerSetting) -> Result<CircuitModule> {
    WeakModule::new(*obs, gamma)?;
    let (prolog, epilog_basis) = basis_change(obs);
    let core = vec![
        Element::fixed(ElementKind::Bd),
        Element::hwp(FRAC_PI_4, Arm::Up),
        Element::hwp(-gamma / 2.0, Arm::Down),
        Element::hwp(gamma / 2.0, Arm::Up),
    ];
    let (up, _) = setting.analyzer_basis();
    let (q, h) = analyzer_angles(&up);
    let analyzer =
        vec![Element::qwp(q, Arm::Both), Element::hwp(h, Arm::Both), Element::fixed(ElementKind::Pbs)];
    let labels = match setting {
        PointerSetting::Identity => [1, -1],
        _ => [-1, 1],
    };
    let mut epilog = vec![
        Element::hwp(FRAC_PI_4, Arm::Down),
        Element::fixed(ElementKind::Bd),
        Element::fixed(ElementKind::PathSwap),
        Element::hwp(FRAC_PI_4, Arm::Down),
    ];
    epilog.extend(epilog_basis);
    Ok(CircuitModule { prolog, core, analyzer, labels, epilog, setting: Some(setting) })
}

fn apply(e: &Element, s: &mut Amp4) -> Result<()> {
    match e.kind {
        ElementKind::Hwp | ElementKind::Qwp => {
            let j = jones_matrix(e)?;
            for &arm in e.arm.indices() {
                let v = j * Amp2::new(s[2 * arm], s[2 * arm + 1]);
                s[2 * arm] = v[0];
                s[2 * arm + 1] = v[1];
            }
        }
        ElementKind::Bd => {
            if s[3].norm() > LAYOUT_TOL {
                return Err(Error::InvalidLayout("V light in the upper arm would leave the displacer".into()));
            }
            s[3] = s[1];
            s[1] = ZERO;
        }
        ElementKind::PathSwap => {
            s.swap_rows(0, 2);
            s.swap_rows(1, 3);
        }
        ElementKind::Pbs => return Err(Error::InvalidLayout("PBS outside the analyzer".into())),
    }
    Ok(())
}

fn run(elements: &[Element], s: &mut Amp4) -> Result<()> {
    elements.iter().try_for_each(|e| apply(e, s))
}

fn embed(input: &Amp2) -> Amp4 {
    Amp4::new(input[0], input[1], ZERO, ZERO)
}

/// Two-arm state after prolog and core, before the analyzer.
pub fn mid_module_state(cm: &CircuitModule, input: &Ket2) -> Result<Amp4> {
    let mut s = embed(input.amp());
    run(&cm.prolog, &mut s)?;
    run(&cm.core, &mut s)?;
    Ok(s)
}

/// Output polarization for each analyzer outcome, unnormalized.
fn propagate(cm: &CircuitModule, input: &Amp2) -> Result<Vec<(i8, Amp2)>> {
    let mut s = embed(input);
    run(&cm.prolog, &mut s)?;
    run(&cm.core, &mut s)?;
    let split = cm.analyzer.iter().position(|e| e.kind == ElementKind::Pbs);
    let branches = match split {
        None => {
            run(&cm.analyzer, &mut s)?;
            vec![(1, s)]
        }
        Some(p) => {
            run(&cm.analyzer[..p], &mut s)?;
            let transmitted = Amp4::new(s[0], ZERO, s[2], ZERO);
            let reflected = Amp4::new(s[1], ZERO, s[3], ZERO);
            let mut out = vec![(cm.labels[0], transmitted), (cm.labels[1], reflected)];
            for (_, b) in &mut out {
                run(&cm.analyzer[p + 1..], b)?;
            }
            out
        }
    };
    branches
        .into_iter()
        .map(|(label, mut b)| {
            run(&cm.epilog, &mut b)?;
            if b[2].norm() > LAYOUT_TOL || b[3].norm() > LAYOUT_TOL {
                return Err(Error::InvalidLayout("light left in the upper arm at the module exit".into()));
            }
            Ok((label, Amp2::new(b[0], b[1])))
        })
        .collect()
}

/// Analyzer outcome `s` and the output polarization amplitudes of that branch.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub label: i8,
    pub amplitudes: Amp2,
}

impl Branch {
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }
}

pub fn simulate_circuit(cm: &CircuitModule, input: &Ket2) -> Result<Vec<Branch>> {
    Ok(propagate(cm, input.amp())?
        .into_iter()
        .map(|(label, amplitudes)| Branch { label, amplitudes })
        .collect())
}

/// Kraus operator of each analyzer branch, built column by column.
pub fn branch_operators(cm: &CircuitModule) -> Result<Vec<(i8, Op2)>> {
    let h = propagate(cm, &Amp2::new(ONE, ZERO))?;
    let v = propagate(cm, &Amp2::new(ZERO, ONE))?;
    Ok(h.into_iter()
        .zip(v)
        .map(|((label, a), (_, b))| (label, Op2::from_columns(&[a, b])))
        .collect())
}

/// `min_δ ‖a − e^{iδ} b‖` (Frobenius).
pub fn phase_distance(a: &Op2, b: &Op2) -> f64 {
    let overlap = (b.adjoint() * a).trace();
    let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { ONE };
    (a - b * phase).norm()
}

/// Largest branch deviation from the abstract Kraus operators; `∞` if the layout is broken.
pub fn verify_module(cm: &CircuitModule, obs: &PauliObservable, gamma: f64) -> f64 {
    let (Some(setting), Ok(module)) = (cm.setting, WeakModule::new(*obs, gamma)) else {
        return f64::INFINITY;
    };
    let (up, down) = setting.analyzer_basis();
    match branch_operators(cm) {
        Ok(ops) => ops
            .iter()
            .map(|(label, k)| {
                let target = kraus_branch(&module, if *label > 0 { &up } else { &down });
                phase_distance(k, &target)
            })
            .fold(0.0, f64::max),
        Err(_) => f64::INFINITY,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub phi: f64,
    pub gamma: f64,
    pub setting: PointerSetting,
    pub deviation: f64,
}

impl GridPoint {
    pub fn passed(&self) -> bool {
        self.deviation < VERIFY_TOL
    }
}

pub const DEFAULT_PHI_GRID: [f64; 4] =
    [0.0, std::f64::consts::FRAC_PI_8, FRAC_PI_4, std::f64::consts::FRAC_PI_3];
pub const DEFAULT_GAMMA_GRID_DEG: [f64; 4] = [0.0, 10.0, 25.0, 30.0];

/// Compiles and verifies `σ_φ` modules over a (φ, γ) grid for every analyzer setting.
pub fn verify_grid(phis: &[f64], gammas: &[f64]) -> Result<Vec<GridPoint>> {
    let settings = [PointerSetting::Plus, PointerSetting::Circular, PointerSetting::Identity];
    let mut jobs = Vec::new();
    for &phi in phis {
        for &gamma in gammas {
            for setting in settings {
                jobs.push((phi, gamma, setting));
            }
        }
    }
    jobs.par_iter()
        .map(|&(phi, gamma, setting)| {
            let obs = crate::qcore::sigma_phi(phi)?;
            let cm = compile_module(&obs, gamma, setting)?;
            Ok(GridPoint { phi, gamma, setting, deviation: verify_module(&cm, &obs, gamma) })
        })
        .collect()
}

/// Outcome table of a chain run through compiled modules, in the cell order of
/// [`crate::sampler::outcome_distribution`] with the fail port resolved.
pub fn compiled_distribution(chain: &Chain, settings: &[PointerSetting]) -> Result<OutcomeDistribution> {
    if settings.len() != chain.len() {
        return Err(Error::SettingsLength { expected: chain.len(), got: settings.len() });
    }
    let mut states = vec![*chain.psi_i().amp()];
    for (k, (m, &setting)) in chain.modules().iter().zip(settings).enumerate() {
        let ops = branch_operators(&compile_module(m.obs(), m.gamma(), setting)?)?;
        let mut next = vec![Amp2::zeros(); states.len() * 2];
        for (label, op) in &ops {
            let bit = if *label > 0 { 0 } else { 1 << k };
            for (flips, v) in states.iter().enumerate() {
                next[flips | bit] = op * v;
            }
        }
        states = next;
    }
    let f = chain.psi_f();
    let fp = f.perp();
    let mut cells = Vec::new();
    let mut probabilities = Vec::new();
    for (flips, v) in states.iter().enumerate() {
        for (port, ket) in [(Port::Pass, f), (Port::Fail, &fp)] {
            cells.push(Cell { flips: flips as u32, port });
            probabilities.push(ket.amp().dotc(v).norm_sqr());
        }
    }
    Ok(OutcomeDistribution { n_pointers: chain.len(), settings: settings.to_vec(), cells, probabilities })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{eigenbasis, observable_matrix, op_distance, pauli_z, sigma_phi};
    use crate::sampler::{outcome_distribution, MeasurementPlan};
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_8};
    use PointerSetting::*;

    fn deg(x: f64) -> f64 {
        x.to_radians()
    }

    fn compose(elements: &[Element]) -> Op2 {
        elements.iter().fold(Op2::identity(), |acc, e| jones_matrix(e).unwrap() * acc)
    }

    #[test]
    fn jones_examples() {
        let h0 = jones_matrix(&Element::hwp(0.0, Arm::Both)).unwrap();
        assert!(op_distance(&h0, &pauli_z()) < 1e-15);
        let out = jones_matrix(&Element::hwp(FRAC_PI_8, Arm::Both)).unwrap() * Ket2::h().amp();
        assert!((Ket2::plus().amp().dotc(&out).norm() - 1.0).abs() < 1e-12);
        let out = jones_matrix(&Element::qwp(FRAC_PI_4, Arm::Both)).unwrap() * Ket2::h().amp();
        assert!((Ket2::l().amp().dotc(&out).norm() - 1.0).abs() < 1e-12);
        for angle in [0.0, 0.3, -1.1, 2.0] {
            for e in [Element::hwp(angle, Arm::Up), Element::qwp(angle, Arm::Down)] {
                let j = jones_matrix(&e).unwrap();
                assert!(op_distance(&(j.adjoint() * j), &Op2::identity()) < 1e-12);
            }
            let h = jones_matrix(&Element::hwp(angle, Arm::Up)).unwrap();
            assert!(op_distance(&h, &h.adjoint()) < 1e-12);
        }
        assert!(matches!(jones_matrix(&Element::fixed(ElementKind::Bd)), Err(Error::NotAWaveplate(_))));
        assert!(Element::new(ElementKind::Pbs, 0.0, Arm::Up).is_err());
        assert!(Element::new(ElementKind::Hwp, f64::NAN, Arm::Up).is_err());
        assert!(Element::new(ElementKind::Hwp, 0.2, Arm::Up).is_ok());
    }

    #[test]
    fn export_format() {
        let cm = compile_module(&sigma_phi(FRAC_PI_3).unwrap(), deg(25.0), Plus).unwrap();
        let text = cm.export_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "HWP 30.0 down");
        assert_eq!(lines[1], "BD 0.0 both");
        assert_eq!(lines[3], "HWP -12.5 down");
        assert_eq!(*lines.last().unwrap(), "HWP 30.0 down");
        assert_eq!(lines.len(), 1 + 4 + 3 + 5);
    }

    #[test]
    fn sigma_phi_prolog_at_half_angle() {
        let cm = compile_module(&sigma_phi(FRAC_PI_3).unwrap(), deg(25.0), Circular).unwrap();
        assert_eq!(cm.prolog.len(), 1);
        assert_eq!(cm.prolog[0].kind, ElementKind::Hwp);
        assert!((cm.prolog[0].angle - FRAC_PI_3 / 2.0).abs() < 1e-12);
        assert!((cm.epilog.last().unwrap().angle - FRAC_PI_3 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn analyzer_angle_table() {
        let close = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12;
        assert!(close(analyzer_angles(&Ket2::plus()), (FRAC_PI_4, FRAC_PI_8)));
        assert!(close(analyzer_angles(&Ket2::r()), (0.0, -FRAC_PI_8)));
        assert!(close(analyzer_angles(&Ket2::h()), (0.0, 0.0)));
    }

    #[test]
    fn basis_change_bookkeeping() {
        let mut obs = vec![PauliObservable::sx(), PauliObservable::sy(), PauliObservable::sz()];
        obs.push(PauliObservable::new([0.48, 0.6, 0.64]).unwrap());
        obs.push(PauliObservable::new([-0.36, -0.48, 0.8]).unwrap());
        obs.push(PauliObservable::new([0.0, -1.0, 0.0]).unwrap());
        for phi in [0.0, FRAC_PI_8, FRAC_PI_4, FRAC_PI_3, 2.0] {
            obs.push(sigma_phi(phi).unwrap());
        }
        for o in &obs {
            let (pro, epi) = basis_change(o);
            let p = compose(&pro);
            let e = compose(&epi);
            // V = P† diagonalizes: V σ_z V† = σ_A
            assert!(phase_distance(&(p.adjoint() * pauli_z() * p), &observable_matrix(o)) < 1e-10, "{o:?}");
            assert!(phase_distance(&e, &p.adjoint()) < 1e-10);
            let (plus, _) = eigenbasis(o);
            assert!(((p * plus.amp())[0].norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn default_grid_passes() {
        let gammas: Vec<f64> = DEFAULT_GAMMA_GRID_DEG.iter().map(|g| deg(*g)).collect();
        let points = verify_grid(&DEFAULT_PHI_GRID, &gammas).unwrap();
        assert_eq!(points.len(), 48);
        for p in points {
            assert!(p.passed(), "{p:?}");
        }
    }

    #[test]
    fn spot_verifications() {
        let cm = compile_module(&PauliObservable::sz(), deg(25.0), Plus).unwrap();
        assert!(verify_module(&cm, &PauliObservable::sz(), deg(25.0)) < VERIFY_TOL);
        let cm = compile_module(&PauliObservable::sy(), deg(30.0), Circular).unwrap();
        assert_eq!(cm.prolog[0].kind, ElementKind::Qwp);
        assert!(verify_module(&cm, &PauliObservable::sy(), deg(30.0)) < VERIFY_TOL);
        let general = PauliObservable::new([0.48, 0.6, 0.64]).unwrap();
        for s in [Plus, Circular, Identity] {
            let cm = compile_module(&general, deg(17.0), s).unwrap();
            assert!(verify_module(&cm, &general, deg(17.0)) < VERIFY_TOL);
        }
        // wrong target is caught
        let cm = compile_module(&PauliObservable::sz(), deg(25.0), Plus).unwrap();
        assert!(verify_module(&cm, &PauliObservable::sx(), deg(25.0)) > 1e-3);
        assert!(compile_module(&PauliObservable::sz(), -0.1, Plus).is_err());
    }

    #[test]
    fn tampered_plate_is_detected() {
        let obs = sigma_phi(FRAC_PI_3).unwrap();
        let base = compile_module(&obs, deg(25.0), Plus).unwrap();
        let plates: Vec<(usize, usize)> = [
            (0, base.prolog.len()),
            (1, base.core.len()),
            (2, base.analyzer.len()),
            (3, base.epilog.len()),
        ]
        .iter()
        .flat_map(|&(part, len)| (0..len).map(move |i| (part, i)))
        .collect();
        let mut checked = 0;
        for (part, i) in plates {
            let mut cm = base.clone();
            let list = match part {
                0 => &mut cm.prolog,
                1 => &mut cm.core,
                2 => &mut cm.analyzer,
                _ => &mut cm.epilog,
            };
            if !matches!(list[i].kind, ElementKind::Hwp | ElementKind::Qwp) {
                continue;
            }
            list[i].angle += deg(1.0);
            let d = verify_module(&cm, &obs, deg(25.0));
            assert!(d > 1e-3, "part {part} element {i}: {d}");
            checked += 1;
        }
        assert_eq!(checked, 9);
    }

    #[test]
    fn simulation_examples() {
        let empty = CircuitModule::default();
        let b = simulate_circuit(&empty, &Ket2::plus()).unwrap();
        assert_eq!(b.len(), 1);
        assert!((b[0].norm_sqr() - 1.0).abs() < 1e-12);

        let g = deg(25.0);
        let cm = compile_module(&PauliObservable::sz(), g, Plus).unwrap();
        let b = simulate_circuit(&cm, &Ket2::h()).unwrap();
        let plus = b.iter().find(|x| x.label == 1).unwrap().norm_sqr();
        let minus = b.iter().find(|x| x.label == -1).unwrap().norm_sqr();
        assert!((plus - (1.0 + (2.0 * g).sin()) / 2.0).abs() < 1e-12);
        assert!((minus - (1.0 - (2.0 * g).sin()) / 2.0).abs() < 1e-12);

        let cm = compile_module(&sigma_phi(0.7).unwrap(), 0.0, Identity).unwrap();
        let input = Ket2::linear(0.3);
        let b = simulate_circuit(&cm, &input).unwrap();
        let pass = b.iter().find(|x| x.label == 1).unwrap();
        let other = b.iter().find(|x| x.label == -1).unwrap();
        assert!((pass.amplitudes.dotc(input.amp()).norm() - 1.0).abs() < 1e-12);
        assert!(other.norm_sqr() < 1e-24);
    }

    #[test]
    fn branch_norms_are_complete() {
        let obs = PauliObservable::new([-0.36, -0.48, 0.8]).unwrap();
        for s in [Plus, Circular, Identity] {
            let cm = compile_module(&obs, deg(33.0), s).unwrap();
            let total: f64 = simulate_circuit(&cm, &Ket2::r()).unwrap().iter().map(Branch::norm_sqr).sum();
            assert!((total - 1.0).abs() < 1e-10);
            let ops = branch_operators(&cm).unwrap();
            let sum = ops.iter().fold(Op2::zeros(), |acc, (_, k)| acc + k.adjoint() * k);
            assert!(op_distance(&sum, &Op2::identity()) < 1e-10);
        }
    }

    #[test]
    fn quoted_mid_module_state() {
        let g = deg(25.0);
        let (cg, sg) = (g.cos(), g.sin());
        let input = Ket2::new(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        for phi in [0.0, FRAC_PI_3] {
            let cm = compile_module(&sigma_phi(phi).unwrap(), g, Plus).unwrap();
            let s = mid_module_state(&cm, &input).unwrap();
            let alpha = Ket2::linear(phi).inner(&input);
            // HWP(φ/2) sends |φ⊥⟩ to −|V⟩: the upper path carries −β.
            let beta = -Ket2::linear(phi + std::f64::consts::FRAC_PI_2).inner(&input);
            let want = Amp4::new(alpha * cg, -alpha * sg, beta * cg, beta * sg);
            assert!((s - want).norm() < 1e-12, "{s} vs {want}");
        }
    }

    #[test]
    fn broken_layout_is_reported() {
        let mut cm = compile_module(&PauliObservable::sz(), deg(20.0), Plus).unwrap();
        // light left behind in the lower arm exits through the wrong port
        cm.epilog[0].angle += deg(5.0);
        assert!(matches!(simulate_circuit(&cm, &Ket2::h()), Err(Error::InvalidLayout(_))));
        assert_eq!(verify_module(&cm, &PauliObservable::sz(), deg(20.0)), f64::INFINITY);
        let mut cm = CircuitModule::default();
        cm.core.push(Element::fixed(ElementKind::Pbs));
        assert!(simulate_circuit(&cm, &Ket2::h()).is_err());
    }

    #[test]
    fn compiled_pipeline_matches_abstract_distribution() {
        let obs = [PauliObservable::sy(), PauliObservable::sz(), sigma_phi(FRAC_PI_3).unwrap()];
        for (gamma, theta) in [(deg(25.0), deg(20.0)), (deg(30.0), deg(100.0))] {
            let chain = Chain::uniform(Ket2::plus(), &obs, gamma, Ket2::linear(theta)).unwrap();
            for settings in [vec![Plus, Plus, Plus], vec![Circular, Plus, Identity], vec![Circular; 3]] {
                let optical = compiled_distribution(&chain, &settings).unwrap();
                let plan = MeasurementPlan::new(chain.clone(), settings.clone(), true).unwrap();
                let abstract_dist = outcome_distribution(&plan);
                assert_eq!(optical.cells, abstract_dist.cells);
                for (a, b) in optical.probabilities.iter().zip(&abstract_dist.probabilities) {
                    assert!((a - b).abs() < 1e-10);
                }
            }
        }
    }
}
