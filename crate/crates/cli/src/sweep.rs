use rayon::prelude::*;

use seqweak_core::sampler::{derive_seed, estimate_swv_pipeline_with, PipelineOptions};
use seqweak_core::{evolve, post_select, simulate_extraction, weak_value_oracle, Error, Ket2, C64};

use crate::config::{Mode, RunConfig};

/// Rows with `|⟨ψ_f|ψ_i⟩|` at or below this carry a divergence flag and no values.
pub const DIVERGENCE_OVERLAP: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub enum RowStatus {
    Ok,
    Diverged,
    Failed(Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    /// `None` for a fixed post-selection.
    pub theta_deg: Option<f64>,
    pub oracle: Option<C64>,
    pub estimate: Option<C64>,
    pub p_pass: Option<f64>,
    pub n_pass: Option<u64>,
    pub sd: Option<(f64, f64)>,
    pub status: RowStatus,
}

impl Row {
    fn empty(theta_deg: Option<f64>, status: RowStatus) -> Self {
        Row { theta_deg, oracle: None, estimate: None, p_pass: None, n_pass: None, sd: None, status }
    }

    /// `(|Δre|, |Δim|)` between estimate and oracle.
    pub fn errors(&self) -> Option<(f64, f64)> {
        let (o, e) = (self.oracle?, self.estimate?);
        Some(((e.re - o.re).abs(), (e.im - o.im).abs()))
    }

    pub fn flags(&self) -> String {
        match &self.status {
            RowStatus::Ok => String::new(),
            RowStatus::Diverged => "diverged".into(),
            RowStatus::Failed(e) => format!("failed:{}", e.code()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub mode: Mode,
    pub rows: Vec<Row>,
}

fn run_row(cfg: &RunConfig, index: usize, theta_deg: Option<f64>, psi_f: Ket2) -> Row {
    if cfg.psi_i.inner(&psi_f).norm() <= DIVERGENCE_OVERLAP {
        return Row::empty(theta_deg, RowStatus::Diverged);
    }
    let chain = match cfg.chain(psi_f) {
        Ok(c) => c,
        Err(e) => return Row::empty(theta_deg, RowStatus::Failed(e)),
    };
    let active: Vec<_> = chain.modules().iter().filter(|m| m.is_active()).map(|m| *m.obs()).collect();
    let mut row = Row::empty(theta_deg, RowStatus::Ok);
    match weak_value_oracle(chain.psi_i(), chain.psi_f(), &active) {
        Ok(w) => row.oracle = Some(w),
        Err(e) => {
            row.status = RowStatus::Failed(e);
            return row;
        }
    }
    let extraction = cfg.extraction.into();
    let outcome = match cfg.mode {
        Mode::Exact => evolve(&chain).and_then(|joint| {
            row.p_pass = Some(post_select(&joint, chain.psi_f()).norm_sq());
            simulate_extraction(&chain, extraction)
        }),
        Mode::Sampled => {
            let opts = PipelineOptions {
                shots: cfg.shots,
                seed: derive_seed(cfg.seed, index as u64),
                resamples: cfg.resamples,
                extraction,
            };
            estimate_swv_pipeline_with(&chain, &opts).map(|est| {
                row.p_pass = Some(est.p_pass);
                row.n_pass = Some(est.n_pass);
                row.sd = Some((est.re_sd, est.im_sd));
                est.value
            })
        }
    };
    match outcome {
        Ok(w) => row.estimate = Some(w),
        Err(e) => {
            row.p_pass = None;
            row.status = RowStatus::Failed(e);
        }
    }
    row
}

/// One row per post-selection angle, computed in parallel and returned in angle order.
/// Row failures are recorded in the row and never abort the sweep.
pub fn run_sweep(cfg: &RunConfig) -> ResultTable {
    let rows = match &cfg.psi_f_fixed {
        Some(k) => vec![run_row(cfg, 0, None, *k)],
        None => cfg
            .thetas_deg()
            .par_iter()
            .enumerate()
            .map(|(i, &t)| run_row(cfg, i, Some(t), Ket2::linear(t.to_radians())))
            .collect(),
    };
    ResultTable { mode: cfg.mode, rows }
}

/// Agreement of a finished sweep with the oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub rows: usize,
    pub diverged: usize,
    pub failed: usize,
    pub max_abs_err: f64,
    /// Rows with both parts within three bootstrap SDs of the oracle (sampled mode).
    pub within_3sd: usize,
}

pub fn summarize(table: &ResultTable) -> Summary {
    let mut s = Summary { rows: table.rows.len(), diverged: 0, failed: 0, max_abs_err: 0.0, within_3sd: 0 };
    for row in &table.rows {
        match row.status {
            RowStatus::Diverged => s.diverged += 1,
            RowStatus::Failed(_) => s.failed += 1,
            RowStatus::Ok => {}
        }
        if let Some((re, im)) = row.errors() {
            s.max_abs_err = s.max_abs_err.max(re.max(im));
            if let Some((re_sd, im_sd)) = row.sd {
                if re < 3.0 * re_sd && im < 3.0 * im_sd {
                    s.within_3sd += 1;
                }
            }
        }
    }
    s
}

impl Summary {
    pub fn report(&self, mode: Mode) -> String {
        let valid = self.rows - self.diverged - self.failed;
        let mut text = format!(
            "{} rows: {} valid, {} diverged, {} failed; max |error| vs oracle {:.3e}",
            self.rows, valid, self.diverged, self.failed, self.max_abs_err
        );
        if mode == Mode::Sampled {
            text.push_str(&format!("; {}/{} within 3 SD", self.within_3sd, valid));
        }
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn single(theta_start: f64, theta_stop: f64, extra: &str) -> RunConfig {
        let text = format!(
            r#"{{"pre_state": "plus", "post_select": "sweep", "theta_deg_start": {theta_start},
                "theta_deg_stop": {theta_stop}, "theta_deg_step": 45,
                "modules": [{{"observable": "sz", "gamma_deg": 25}}]{extra}}}"#
        );
        parse_config(text.as_bytes()).unwrap()
    }

    #[test]
    fn single_module_examples() {
        let table = run_sweep(&single(0.0, 180.0, ""));
        let at = |t: f64| table.rows.iter().find(|r| r.theta_deg == Some(t)).unwrap();
        // ψ_f = ψ_i: W = ⟨+|σ_z|+⟩ = 0
        assert!(at(45.0).oracle.unwrap().norm() < 1e-12);
        let row = at(135.0);
        assert_eq!(row.status, RowStatus::Diverged);
        assert_eq!((row.oracle, row.estimate, row.p_pass), (None, None, None));
        assert_eq!(row.flags(), "diverged");
        let row = at(0.0);
        assert!((row.estimate.unwrap() - C64::new(1.0, 0.0)).norm() < 1e-9);
        assert!(row.errors().unwrap().0 < 1e-9);
        assert!(row.sd.is_none());
    }

    #[test]
    fn rows_come_in_angle_order() {
        let table = run_sweep(&single(0.0, 180.0, ""));
        let thetas: Vec<f64> = table.rows.iter().map(|r| r.theta_deg.unwrap()).collect();
        assert_eq!(thetas, vec![0.0, 45.0, 90.0, 135.0, 180.0]);
    }

    #[test]
    fn first_order_rows_are_biased() {
        let table = run_sweep(&single(0.0, 0.0, r#", "extraction": "firstorder""#));
        let err = table.rows[0].errors().unwrap().0;
        assert!(err > 1e-3 && err < 0.2, "{err}");
    }

    #[test]
    fn sampled_rows_carry_uncertainty() {
        let table = run_sweep(&single(0.0, 90.0, r#", "mode": "sampled", "shots": 100000, "resamples": 100"#));
        for row in &table.rows {
            let (re_sd, im_sd) = row.sd.unwrap();
            assert!(re_sd > 0.0 && im_sd > 0.0);
            assert!(row.n_pass.unwrap() > 0);
        }
        let s = summarize(&table);
        assert_eq!((s.rows, s.diverged, s.failed), (3, 0, 0));
        assert!(s.report(Mode::Sampled).contains("within 3 SD"));
    }
}
