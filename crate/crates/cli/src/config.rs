//! Run configuration: a flat JSON object.
//!
//! ```json
//! {
//!   "pre_state": "plus",
//!   "post_select": "sweep",
//!   "theta_deg_start": 0, "theta_deg_stop": 180, "theta_deg_step": 5,
//!   "modules": [{"observable": "sy", "gamma_deg": 25}],
//!   "mode": "exact",
//!   "extraction": "exact_pauli"
//! }
//! ```
//!
//! State specs: `plus`, `minus`, `h`, `v`, `r`, `l`, `theta:DEG`
//! (`cos θ|H⟩ + sin θ|V⟩`), `amp:re0,im0,re1,im1`.
//! Observable specs: `sx`, `sy`, `sz`, `sigma_phi:DEG`, `bloch:x,y,z`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use seqweak_core::chain::MAX_MODULES;
use seqweak_core::qcore::c;
use seqweak_core::{sigma_phi, Chain, Extraction, Ket2, PauliObservable, WeakModule};

pub const DEFAULT_SHOTS: u64 = 1_000_000;
pub const DEFAULT_RESAMPLES: u32 = 200;
pub const MAX_ROWS: usize = 100_000;
const NORM_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation { field: field.into(), message: message.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Sampled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionKind {
    #[serde(rename = "firstorder")]
    FirstOrder,
    ExactPauli,
}

impl From<ExtractionKind> for Extraction {
    fn from(k: ExtractionKind) -> Self {
        match k {
            ExtractionKind::FirstOrder => Extraction::FirstOrder,
            ExtractionKind::ExactPauli => Extraction::ExactPauli,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModule {
    observable: String,
    gamma_deg: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    pre_state: String,
    post_select: String,
    theta_deg_start: Option<f64>,
    theta_deg_stop: Option<f64>,
    theta_deg_step: Option<f64>,
    modules: Vec<RawModule>,
    mode: Option<Mode>,
    shots: Option<u64>,
    seed: Option<u64>,
    resamples: Option<u32>,
    extraction: Option<ExtractionKind>,
    output_path: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModuleConfig {
    pub observable: String,
    pub gamma_deg: f64,
    #[serde(skip)]
    pub obs: PauliObservable,
    /// Radians.
    #[serde(skip)]
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PostSelect {
    Sweep { theta_deg_start: f64, theta_deg_stop: f64, theta_deg_step: f64 },
    Fixed { state: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub pre_state: String,
    pub post_select: PostSelect,
    pub modules: Vec<ModuleConfig>,
    pub mode: Mode,
    pub shots: u64,
    pub seed: u64,
    pub resamples: u32,
    pub extraction: ExtractionKind,
    pub output_path: Option<String>,
    #[serde(skip)]
    pub psi_i: Ket2,
    #[serde(skip)]
    pub psi_f_fixed: Option<Ket2>,
}

impl RunConfig {
    /// Post-selection angles in degrees; empty for a fixed post-selection.
    pub fn thetas_deg(&self) -> Vec<f64> {
        match self.post_select {
            PostSelect::Sweep { theta_deg_start, theta_deg_stop, theta_deg_step } => {
                let count = ((theta_deg_stop - theta_deg_start) / theta_deg_step + 1e-9).floor() as usize + 1;
                (0..count).map(|i| theta_deg_start + i as f64 * theta_deg_step).collect()
            }
            PostSelect::Fixed { .. } => Vec::new(),
        }
    }

    pub fn chain(&self, psi_f: Ket2) -> seqweak_core::Result<Chain> {
        let modules = self
            .modules
            .iter()
            .map(|m| WeakModule::new(m.obs, m.gamma))
            .collect::<seqweak_core::Result<Vec<_>>>()?;
        Chain::new(self.psi_i, modules, psi_f)
    }
}

fn parse_number(field: &str, text: &str) -> Result<f64, ConfigError> {
    let v: f64 = text.trim().parse().map_err(|_| invalid(field, format!("`{text}` is not a number")))?;
    if !v.is_finite() {
        return Err(invalid(field, "value must be finite"));
    }
    Ok(v)
}

pub fn parse_state(field: &str, spec: &str) -> Result<Ket2, ConfigError> {
    let spec = spec.trim();
    let named = match spec {
        "plus" => Some(Ket2::plus()),
        "minus" => Some(Ket2::minus()),
        "h" => Some(Ket2::h()),
        "v" => Some(Ket2::v()),
        "r" => Some(Ket2::r()),
        "l" => Some(Ket2::l()),
        _ => None,
    };
    if let Some(k) = named {
        return Ok(k);
    }
    if let Some(deg) = spec.strip_prefix("theta:") {
        return Ok(Ket2::linear(parse_number(field, deg)?.to_radians()));
    }
    if let Some(list) = spec.strip_prefix("amp:") {
        let parts: Vec<&str> = list.split(',').collect();
        if parts.len() != 4 {
            return Err(invalid(field, "amp: needs four numbers re0,im0,re1,im1"));
        }
        let v = parts.iter().map(|p| parse_number(field, p)).collect::<Result<Vec<_>, _>>()?;
        let norm = v.iter().map(|x| x * x).sum::<f64>();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(invalid(field, format!("amplitudes not normalized (|ψ|² = {norm})")));
        }
        return Ket2::normalized(c(v[0], v[1]), c(v[2], v[3])).map_err(|e| invalid(field, e.to_string()));
    }
    Err(invalid(field, format!("unknown state `{spec}`")))
}

pub fn parse_observable(field: &str, spec: &str) -> Result<PauliObservable, ConfigError> {
    let spec = spec.trim();
    match spec {
        "sx" => return Ok(PauliObservable::sx()),
        "sy" => return Ok(PauliObservable::sy()),
        "sz" => return Ok(PauliObservable::sz()),
        _ => {}
    }
    if let Some(deg) = spec.strip_prefix("sigma_phi:") {
        return sigma_phi(parse_number(field, deg)?.to_radians()).map_err(|e| invalid(field, e.to_string()));
    }
    if let Some(list) = spec.strip_prefix("bloch:") {
        let v = list.split(',').map(|p| parse_number(field, p)).collect::<Result<Vec<_>, _>>()?;
        if v.len() != 3 {
            return Err(invalid(field, "bloch: needs three components"));
        }
        return PauliObservable::from_direction([v[0], v[1], v[2]]).map_err(|e| invalid(field, e.to_string()));
    }
    Err(invalid(field, format!("unknown observable `{spec}`")))
}

/// Parses and validates a configuration. Angles are stored in radians alongside their degree inputs.
pub fn parse_config(text: &[u8]) -> Result<RunConfig, ConfigError> {
    let text = std::str::from_utf8(text).map_err(|e| ConfigError::Parse {
        line: 0,
        column: e.valid_up_to(),
        message: "input is not UTF-8".into(),
    })?;
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let psi_i = parse_state("pre_state", &raw.pre_state)?;
    let sweep_keys = [raw.theta_deg_start, raw.theta_deg_stop, raw.theta_deg_step];
    let (post_select, psi_f_fixed) = if raw.post_select.trim() == "sweep" {
        let start = raw.theta_deg_start.unwrap_or(0.0);
        let stop = raw.theta_deg_stop.unwrap_or(180.0);
        let step = raw.theta_deg_step.unwrap_or(5.0);
        for (name, v) in [("theta_deg_start", start), ("theta_deg_stop", stop), ("theta_deg_step", step)] {
            if !v.is_finite() {
                return Err(invalid(name, "value must be finite"));
            }
        }
        if step <= 0.0 {
            return Err(invalid("theta_deg_step", "step must be positive"));
        }
        if stop < start {
            return Err(invalid("theta_deg_stop", "stop must not be below start"));
        }
        if (stop - start) / step >= MAX_ROWS as f64 {
            return Err(invalid("theta_deg_step", format!("sweep exceeds {MAX_ROWS} rows")));
        }
        (PostSelect::Sweep { theta_deg_start: start, theta_deg_stop: stop, theta_deg_step: step }, None)
    } else {
        if sweep_keys.iter().any(Option::is_some) {
            return Err(invalid("post_select", "theta_deg_* keys require post_select = \"sweep\""));
        }
        let k = parse_state("post_select", &raw.post_select)?;
        (PostSelect::Fixed { state: raw.post_select.trim().to_string() }, Some(k))
    };

    if raw.modules.is_empty() {
        return Err(invalid("modules", "at least one module is required"));
    }
    if raw.modules.len() > MAX_MODULES {
        return Err(invalid("modules", format!("at most {MAX_MODULES} modules are supported")));
    }
    let mut modules = Vec::with_capacity(raw.modules.len());
    for (i, m) in raw.modules.into_iter().enumerate() {
        let field = format!("modules[{i}]");
        let obs = parse_observable(&format!("{field}.observable"), &m.observable)?;
        if !m.gamma_deg.is_finite() || !(0.0..=45.0).contains(&m.gamma_deg) {
            return Err(invalid(format!("{field}.gamma_deg"), format!("{} is outside [0, 45]", m.gamma_deg)));
        }
        modules.push(ModuleConfig { observable: m.observable, gamma_deg: m.gamma_deg, obs, gamma: m.gamma_deg.to_radians() });
    }
    if modules.iter().all(|m| m.gamma_deg == 0.0) {
        return Err(invalid("modules", "at least one module needs gamma_deg > 0"));
    }

    let mode = raw.mode.unwrap_or(Mode::Exact);
    let shots = raw.shots.unwrap_or(DEFAULT_SHOTS);
    let resamples = raw.resamples.unwrap_or(DEFAULT_RESAMPLES);
    if mode == Mode::Sampled {
        if shots < 10_000 {
            return Err(invalid("shots", "sampled mode needs at least 10000 shots"));
        }
        if resamples < 100 {
            return Err(invalid("resamples", "sampled mode needs at least 100 resamples"));
        }
    }
    Ok(RunConfig {
        pre_state: raw.pre_state.trim().to_string(),
        post_select,
        modules,
        mode,
        shots,
        seed: raw.seed.unwrap_or(0),
        resamples,
        extraction: raw.extraction.unwrap_or(ExtractionKind::ExactPauli),
        output_path: raw.output_path,
        psi_i,
        psi_f_fixed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG2: &str = include_str!("../configs/fig2.cfg");

    fn with(patch: &str) -> String {
        format!(
            r#"{{"pre_state": "plus", "post_select": "sweep", "modules": [{{"observable": "sz", "gamma_deg": 25}}]{patch}}}"#
        )
    }

    fn field_of(e: ConfigError) -> String {
        match e {
            ConfigError::Validation { field, .. } => field,
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn shipped_config_is_valid() {
        let cfg = parse_config(FIG2.as_bytes()).unwrap();
        assert_eq!(cfg.modules.len(), 3);
        assert_eq!(cfg.modules[2].observable, "sigma_phi:60");
        assert!((cfg.modules[0].gamma - 25f64.to_radians()).abs() < 1e-15);
        let thetas = cfg.thetas_deg();
        assert_eq!(thetas.len(), 37);
        assert_eq!(thetas[36], 180.0);
        assert_eq!(cfg.psi_i, Ket2::plus());
    }

    #[test]
    fn defaults() {
        let cfg = parse_config(with("").as_bytes()).unwrap();
        assert_eq!(cfg.mode, Mode::Exact);
        assert_eq!(cfg.extraction, ExtractionKind::ExactPauli);
        assert_eq!(cfg.shots, DEFAULT_SHOTS);
        assert_eq!(cfg.thetas_deg().len(), 37);
    }

    #[test]
    fn rejections() {
        let bad_gamma = r#"{"pre_state": "plus", "post_select": "sweep", "modules": [{"observable": "sz", "gamma_deg": -5}]}"#;
        assert_eq!(field_of(parse_config(bad_gamma.as_bytes()).unwrap_err()), "modules[0].gamma_deg");
        let empty = r#"{"pre_state": "plus", "post_select": "sweep", "modules": []}"#;
        assert_eq!(field_of(parse_config(empty.as_bytes()).unwrap_err()), "modules");
        assert!(matches!(parse_config(with(r#", "colour": 1"#).as_bytes()), Err(ConfigError::Parse { .. })));
        assert!(matches!(parse_config(b"{\n  \"pre_state\": \n}"), Err(ConfigError::Parse { line: 3, .. })));
        assert_eq!(field_of(parse_config(with(r#", "theta_deg_step": 0"#).as_bytes()).unwrap_err()), "theta_deg_step");
        assert_eq!(
            field_of(parse_config(with(r#", "mode": "sampled", "shots": 10"#).as_bytes()).unwrap_err()),
            "shots"
        );
        let fixed_with_sweep = r#"{"pre_state": "plus", "post_select": "h", "theta_deg_step": 5, "modules": [{"observable": "sz", "gamma_deg": 25}]}"#;
        assert_eq!(field_of(parse_config(fixed_with_sweep.as_bytes()).unwrap_err()), "post_select");
        let idle = r#"{"pre_state": "plus", "post_select": "h", "modules": [{"observable": "sz", "gamma_deg": 0}]}"#;
        assert_eq!(field_of(parse_config(idle.as_bytes()).unwrap_err()), "modules");
        assert!(matches!(parse_config(&[0xff, 0xfe]), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn state_and_observable_specs() {
        assert_eq!(parse_state("s", "theta:90").unwrap().a1().re, 1.0);
        let k = parse_state("s", "amp:0.6,0,0,0.8").unwrap();
        assert_eq!((k.a0().re, k.a1().im), (0.6, 0.8));
        assert!(parse_state("s", "amp:1,0,1,0").is_err());
        assert!(parse_state("s", "diagonal").is_err());
        assert_eq!(parse_observable("o", "bloch:0,0,2").unwrap(), PauliObservable::sz());
        assert_eq!(parse_observable("o", "sigma_phi:0").unwrap(), PauliObservable::sz());
        assert!(parse_observable("o", "bloch:0,0").is_err());
        assert!(parse_observable("o", "bloch:0,0,0").is_err());
        assert!(parse_observable("o", "sw").is_err());
    }

    #[test]
    fn fixed_post_selection() {
        let cfg = parse_config(
            br#"{"pre_state": "plus", "post_select": "h", "modules": [{"observable": "sz", "gamma_deg": 10}]}"#,
        )
        .unwrap();
        assert!(cfg.thetas_deg().is_empty());
        assert_eq!(cfg.psi_f_fixed, Some(Ket2::h()));
    }
}
