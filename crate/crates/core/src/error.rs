use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("state is not normalized (|ψ|² = {0})")]
    NotNormalized(f64),
    #[error("Bloch vector is not a unit vector (norm = {0})")]
    NotUnitBloch(f64),
    #[error("coupling strength {0} rad outside [0, π/4]")]
    StrengthOutOfRange(f64),
    #[error("chain must contain at least one module")]
    EmptyChain,
    #[error("chain of {0} modules exceeds the cap of {max}", max = crate::chain::MAX_MODULES)]
    ChainTooLong(usize),
    #[error("expected {expected} pointer settings, got {got}")]
    SettingsLength { expected: usize, got: usize },
    #[error("post-selection has vanishing success probability ({0:e})")]
    ZeroPostSelection(f64),
    #[error("post-selected state is orthogonal to the pre-selected state (|⟨ψ_f|ψ_i⟩| = {0:e})")]
    OrthogonalPostSelection(f64),
    #[error("all pointer settings are Identity")]
    AllIdentity,
    #[error("coupling strength must be positive for extraction (got {0})")]
    ZeroStrength(f64),
    #[error("missing measurement for setting {0}")]
    MissingSetting(String),
    #[error("pointer expectations admit no physical weak value")]
    NoPhysicalRoot,
    #[error("polynomial fit residual {0:e} exceeds 1e-9")]
    FitDiverged(f64),
    #[error("invalid gamma grid: {0}")]
    InvalidGrid(String),
    #[error("fewer than two post-selected events ({0})")]
    NoPassEvents(u64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("element {0} is not a waveplate")]
    NotAWaveplate(String),
    #[error("invalid optical layout: {0}")]
    InvalidLayout(String),
}

impl Error {
    /// Short stable identifier, e.g. for flags in tabular output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonFinite(_) => "non_finite",
            Error::NotNormalized(_) => "not_normalized",
            Error::NotUnitBloch(_) => "not_unit_bloch",
            Error::StrengthOutOfRange(_) => "strength_out_of_range",
            Error::EmptyChain => "empty_chain",
            Error::ChainTooLong(_) => "chain_too_long",
            Error::SettingsLength { .. } => "settings_length",
            Error::ZeroPostSelection(_) => "zero_post_selection",
            Error::OrthogonalPostSelection(_) => "orthogonal_post_selection",
            Error::AllIdentity => "all_identity",
            Error::ZeroStrength(_) => "zero_strength",
            Error::MissingSetting(_) => "missing_setting",
            Error::NoPhysicalRoot => "no_physical_root",
            Error::FitDiverged(_) => "fit_diverged",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::NoPassEvents(_) => "no_pass_events",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NotAWaveplate(_) => "not_a_waveplate",
            Error::InvalidLayout(_) => "invalid_layout",
        }
    }
}
