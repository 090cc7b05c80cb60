//! Qubit primitives: kets, Pauli observables and pointer readout settings.
//!
//! Basis labels used throughout the crate: `|0⟩ ≡ |H⟩`, `|1⟩ ≡ |V⟩`,
//! `|±⟩ = (|0⟩ ± |1⟩)/√2`, `|R⟩ = (|0⟩ + i|1⟩)/√2`, `|L⟩ = (|0⟩ − i|1⟩)/√2`.

use std::fmt;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
/// 2×2 complex operator acting on a single qubit.
pub type Op2 = Matrix2<C64>;
/// Unnormalized single-qubit amplitudes.
pub type Amp2 = Vector2<C64>;

/// Tolerance for noiseless algebra at dimension ≤ 16.
pub const TOL: f64 = 1e-12;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity2() -> Op2 {
    Op2::identity()
}

pub fn pauli_x() -> Op2 {
    Op2::new(ZERO, ONE, ONE, ZERO)
}

pub fn pauli_y() -> Op2 {
    Op2::new(ZERO, -I, I, ZERO)
}

pub fn pauli_z() -> Op2 {
    Op2::new(ONE, ZERO, ZERO, -ONE)
}

/// A normalized pure qubit state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ket2(Amp2);

impl Ket2 {
    /// Builds a ket, rejecting non-finite or non-normalized amplitudes.
    pub fn new(a0: C64, a1: C64) -> Result<Self> {
        if !(a0.re.is_finite() && a0.im.is_finite() && a1.re.is_finite() && a1.im.is_finite()) {
            return Err(Error::NonFinite("ket amplitude"));
        }
        let norm_sq = a0.norm_sqr() + a1.norm_sqr();
        if (norm_sq - 1.0).abs() > TOL {
            return Err(Error::NotNormalized(norm_sq));
        }
        Ok(Ket2(Amp2::new(a0, a1)))
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(a0: C64, a1: C64) -> Result<Self> {
        let norm = (a0.norm_sqr() + a1.norm_sqr()).sqrt();
        if !norm.is_finite() {
            return Err(Error::NonFinite("ket amplitude"));
        }
        if norm < 1e-300 {
            return Err(Error::NotNormalized(0.0));
        }
        Ket2::new(a0 / norm, a1 / norm)
    }

    pub fn from_amp(v: Amp2) -> Result<Self> {
        Ket2::new(v[0], v[1])
    }

    pub fn h() -> Self {
        Ket2(Amp2::new(ONE, ZERO))
    }

    pub fn v() -> Self {
        Ket2(Amp2::new(ZERO, ONE))
    }

    pub fn plus() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Ket2(Amp2::new(c(s, 0.0), c(s, 0.0)))
    }

    pub fn minus() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Ket2(Amp2::new(c(s, 0.0), c(-s, 0.0)))
    }

    pub fn r() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Ket2(Amp2::new(c(s, 0.0), c(0.0, s)))
    }

    pub fn l() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Ket2(Amp2::new(c(s, 0.0), c(0.0, -s)))
    }

    /// Linear polarization `cos θ|H⟩ + sin θ|V⟩`.
    pub fn linear(theta: f64) -> Self {
        Ket2(Amp2::new(c(theta.cos(), 0.0), c(theta.sin(), 0.0)))
    }

    pub fn a0(&self) -> C64 {
        self.0[0]
    }

    pub fn a1(&self) -> C64 {
        self.0[1]
    }

    pub fn amp(&self) -> &Amp2 {
        &self.0
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Ket2) -> C64 {
        self.0.dotc(&other.0)
    }

    /// The orthogonal state `−a1*|0⟩ + a0*|1⟩`.
    pub fn perp(&self) -> Ket2 {
        Ket2(Amp2::new(-self.0[1].conj(), self.0[0].conj()))
    }

    /// `|self⟩⟨self|`.
    pub fn projector(&self) -> Op2 {
        self.0 * self.0.adjoint()
    }
}

impl fmt::Display for Ket2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})|0⟩ + ({})|1⟩", self.0[0], self.0[1])
    }
}

/// A Pauli-type observable `σ⃗·n⃗` given by a unit Bloch direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PauliObservable {
    n: [f64; 3],
}

impl PauliObservable {
    pub fn new(n: [f64; 3]) -> Result<Self> {
        if n.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("Bloch vector"));
        }
        let norm = n.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > TOL {
            return Err(Error::NotUnitBloch(norm));
        }
        Ok(PauliObservable { n })
    }

    /// Accepts any nonzero direction and normalizes it.
    pub fn from_direction(n: [f64; 3]) -> Result<Self> {
        let norm = n.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(Error::NotUnitBloch(norm));
        }
        PauliObservable::new([n[0] / norm, n[1] / norm, n[2] / norm])
    }

    pub fn sx() -> Self {
        PauliObservable { n: [1.0, 0.0, 0.0] }
    }

    pub fn sy() -> Self {
        PauliObservable { n: [0.0, 1.0, 0.0] }
    }

    pub fn sz() -> Self {
        PauliObservable { n: [0.0, 0.0, 1.0] }
    }

    pub fn bloch(&self) -> [f64; 3] {
        self.n
    }

    /// `n_x σ_x + n_y σ_y + n_z σ_z`.
    pub fn matrix(&self) -> Op2 {
        observable_matrix(self)
    }

    /// True when the observable commutes with `other` (parallel or antiparallel axes).
    pub fn commutes_with(&self, other: &PauliObservable) -> bool {
        let [a, b, c] = self.n;
        let [x, y, z] = other.n;
        let cross = [b * z - c * y, c * x - a * z, a * y - b * x];
        cross.iter().all(|v| v.abs() < 1e-12)
    }
}

/// `σ_φ = |φ⟩⟨φ| − |φ⊥⟩⟨φ⊥|` with `|φ⟩ = cos φ|H⟩ + sin φ|V⟩`; Bloch vector `(sin 2φ, 0, cos 2φ)`.
pub fn sigma_phi(phi: f64) -> Result<PauliObservable> {
    if !phi.is_finite() {
        return Err(Error::NonFinite("phi"));
    }
    let (s, c) = (2.0 * phi).sin_cos();
    PauliObservable::new([s, 0.0, c])
}

pub fn observable_matrix(obs: &PauliObservable) -> Op2 {
    let [x, y, z] = obs.n;
    pauli_x() * c(x, 0.0) + pauli_y() * c(y, 0.0) + pauli_z() * c(z, 0.0)
}

/// Eigenvectors `(v₊, v₋)` with `σ_A v± = ±v±`.
///
/// Phase convention: the first component with magnitude above 1e-12 is real and positive.
pub fn eigenbasis(obs: &PauliObservable) -> (Ket2, Ket2) {
    let m = observable_matrix(obs);
    let id = identity2();
    let plus = eigvec_from_projector((id + m) * c(0.5, 0.0));
    let minus = eigvec_from_projector((id - m) * c(0.5, 0.0));
    (plus, minus)
}

// A rank-1 projector's larger column is its range.
fn eigvec_from_projector(p: Op2) -> Ket2 {
    let col0 = p.column(0).into_owned();
    let col1 = p.column(1).into_owned();
    let v = if col0.norm_squared() >= col1.norm_squared() { col0 } else { col1 };
    let v = v / c(v.norm(), 0.0);
    fix_phase(v)
}

pub(crate) fn fix_phase(v: Amp2) -> Ket2 {
    let lead = if v[0].norm() > TOL { v[0] } else { v[1] };
    let phase = lead.conj() / lead.norm();
    let w = v * phase;
    // Exact zero imaginary part on the leading entry after rotation.
    let w = if v[0].norm() > TOL {
        Amp2::new(c(w[0].norm(), 0.0), w[1])
    } else {
        Amp2::new(w[0], c(w[1].norm(), 0.0))
    };
    Ket2(w)
}

/// Pointer observable read out by an analyzer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PointerSetting {
    /// `σ₊ = |+⟩⟨+| − |−⟩⟨−|`
    Plus,
    /// `σ_R = |R⟩⟨R| − |L⟩⟨L|`
    Circular,
    /// Pointer traced out.
    Identity,
}

impl PointerSetting {
    pub fn operator(self) -> Op2 {
        match self {
            PointerSetting::Plus => pauli_x(),
            PointerSetting::Circular => pauli_y(),
            PointerSetting::Identity => identity2(),
        }
    }

    /// Analyzer outcome pair `(s = +1, s = −1)`. Identity uses the H/V basis
    /// and its outcome sign is ignored by estimators.
    pub fn analyzer_basis(self) -> (Ket2, Ket2) {
        match self {
            PointerSetting::Plus => (Ket2::plus(), Ket2::minus()),
            PointerSetting::Circular => (Ket2::r(), Ket2::l()),
            PointerSetting::Identity => (Ket2::h(), Ket2::v()),
        }
    }

    pub fn is_identity(self) -> bool {
        self == PointerSetting::Identity
    }

    pub fn short(self) -> char {
        match self {
            PointerSetting::Plus => 'P',
            PointerSetting::Circular => 'C',
            PointerSetting::Identity => 'I',
        }
    }
}

/// Frobenius distance between two operators.
pub fn op_distance(a: &Op2, b: &Op2) -> f64 {
    (a - b).norm()
}
