//! Finite-shot emulation of heralded coincidence counting.
//!
//! Every heralded photon ends in one cell `(s₁…s_N, port)`: `s_k = ±1` is the
//! analyzer outcome of pointer `k` and `port` says whether the photon passed
//! post-selection. Sampling is a multinomial draw driven by a ChaCha stream
//! keyed by `(seed, plan index, resample index)`, so results do not depend on
//! the order in which parallel tasks run.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::chain::{kraus_branch, Chain};
use crate::error::{Error, Result};
use crate::qcore::{Amp2, Ket2, Op2, PointerSetting, C64};
use crate::swv::{reconstruct, schedule, Extraction, Observation, RunKind, ScheduledRun};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Port {
    Pass,
    Fail,
}

/// A chain plus the analyzer setting of every pointer.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementPlan {
    pub chain: Chain,
    pub settings: Vec<PointerSetting>,
    /// Resolve failed post-selections per analyzer outcome. When false, all
    /// failures land in a single cell.
    pub include_fail_port: bool,
}

impl MeasurementPlan {
    pub fn new(chain: Chain, settings: Vec<PointerSetting>, include_fail_port: bool) -> Result<Self> {
        if settings.len() != chain.len() {
            return Err(Error::SettingsLength { expected: chain.len(), got: settings.len() });
        }
        Ok(MeasurementPlan { chain, settings, include_fail_port })
    }

    /// Orthonormal outcome pair `(s = +1, s = −1)` of every pointer.
    pub fn analyzer_bases(&self) -> Vec<(Ket2, Ket2)> {
        self.settings.iter().map(|s| s.analyzer_basis()).collect()
    }
}

/// One outcome cell. Bit `k` of `flips` set means pointer `k` gave `−1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub flips: u32,
    pub port: Port,
}

impl Cell {
    pub fn sign(&self, k: usize) -> i8 {
        if self.flips >> k & 1 == 1 {
            -1
        } else {
            1
        }
    }

    pub fn signs(&self, n: usize) -> Vec<i8> {
        (0..n).map(|k| self.sign(k)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDistribution {
    pub n_pointers: usize,
    pub settings: Vec<PointerSetting>,
    pub cells: Vec<Cell>,
    pub probabilities: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn probability(&self, cell: Cell) -> f64 {
        self.cells
            .iter()
            .position(|c| *c == cell)
            .map(|i| self.probabilities[i])
            .unwrap_or(0.0)
    }

    pub fn pass_probability(&self) -> f64 {
        self.cells
            .iter()
            .zip(&self.probabilities)
            .filter(|(c, _)| c.port == Port::Pass)
            .map(|(_, p)| p)
            .sum()
    }
}

/// Unnormalized system amplitudes for every analyzer outcome pattern, indexed by flip bits.
pub(crate) fn branch_states(chain: &Chain, settings: &[PointerSetting]) -> Vec<Amp2> {
    let mut states = vec![*chain.psi_i().amp()];
    for (k, (module, setting)) in chain.modules().iter().zip(settings).enumerate() {
        let (up, down) = setting.analyzer_basis();
        let kp: Op2 = kraus_branch(module, &up);
        let km: Op2 = kraus_branch(module, &down);
        let mut next = vec![Amp2::zeros(); states.len() * 2];
        for (flips, v) in states.iter().enumerate() {
            next[flips] = kp * v;
            next[flips | 1 << k] = km * v;
        }
        states = next;
    }
    states
}

/// `P(s, pass) = |⟨ψ_f|K_{s_N}···K_{s_1}|ψ_i⟩|²`, fail port with `⟨ψ_f⊥|`.
pub fn outcome_distribution(plan: &MeasurementPlan) -> OutcomeDistribution {
    let n = plan.chain.len();
    let f = plan.chain.psi_f();
    let fp = f.perp();
    let states = branch_states(&plan.chain, &plan.settings);
    let mut cells = Vec::with_capacity(2 * states.len());
    let mut probabilities = Vec::with_capacity(2 * states.len());
    let mut lost = 0.0;
    for (flips, v) in states.iter().enumerate() {
        cells.push(Cell { flips: flips as u32, port: Port::Pass });
        probabilities.push(f.amp().dotc(v).norm_sqr());
        let pf = fp.amp().dotc(v).norm_sqr();
        if plan.include_fail_port {
            cells.push(Cell { flips: flips as u32, port: Port::Fail });
            probabilities.push(pf);
        } else {
            lost += pf;
        }
    }
    if !plan.include_fail_port {
        cells.push(Cell { flips: 0, port: Port::Fail });
        probabilities.push(lost);
    }
    OutcomeDistribution { n_pointers: n, settings: plan.settings.clone(), cells, probabilities }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountsTable {
    pub n_pointers: usize,
    pub settings: Vec<PointerSetting>,
    pub cells: Vec<Cell>,
    pub counts: Vec<u64>,
    pub n_total: u64,
    pub seed: u64,
}

impl CountsTable {
    pub fn n_pass(&self) -> u64 {
        self.cells
            .iter()
            .zip(&self.counts)
            .filter(|(c, _)| c.port == Port::Pass)
            .map(|(_, n)| n)
            .sum()
    }

    pub fn entries(&self) -> impl Iterator<Item = (Cell, u64)> + '_ {
        self.cells.iter().copied().zip(self.counts.iter().copied())
    }
}

/// SplitMix64 mix of a base seed with an index, for per-row or per-task seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream_rng(seed: u64, plan: u32, resample: u32) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream((plan as u64) << 32 | resample as u64);
    rng
}

fn multinomial(probabilities: &[f64], n: u64, rng: &mut ChaCha20Rng) -> Vec<u64> {
    let mut counts = vec![0u64; probabilities.len()];
    let mut left_n = n;
    let mut left_p: f64 = probabilities.iter().map(|p| p.max(0.0)).sum();
    for (i, &p) in probabilities.iter().enumerate() {
        if left_n == 0 {
            break;
        }
        let p = p.max(0.0);
        if i + 1 == probabilities.len() {
            counts[i] = left_n;
            break;
        }
        let q = if left_p > 0.0 { (p / left_p).clamp(0.0, 1.0) } else { 0.0 };
        let k = if q >= 1.0 {
            left_n
        } else if q <= 0.0 {
            0
        } else {
            Binomial::new(left_n, q).expect("valid binomial").sample(rng)
        };
        counts[i] = k;
        left_n -= k;
        left_p -= p;
    }
    counts
}

/// Multinomial draw of `n` heralded photons; identical inputs give identical tables.
pub fn sample_counts(dist: &OutcomeDistribution, n: u64, seed: u64) -> Result<CountsTable> {
    sample_counts_stream(dist, n, seed, 0, 0)
}

/// [`sample_counts`] on an explicit `(plan, resample)` stream.
pub fn sample_counts_stream(
    dist: &OutcomeDistribution,
    n: u64,
    seed: u64,
    plan: u32,
    resample: u32,
) -> Result<CountsTable> {
    if n == 0 {
        return Err(Error::InvalidArgument("shot count must be at least 1".into()));
    }
    let mut rng = stream_rng(seed, plan, resample);
    let counts = multinomial(&dist.probabilities, n, &mut rng);
    Ok(CountsTable {
        n_pointers: dist.n_pointers,
        settings: dist.settings.clone(),
        cells: dist.cells.clone(),
        counts,
        n_total: n,
        seed,
    })
}

/// Mean of a ±1-valued product estimator with its binomial standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_pass: u64,
}

/// `Σ_pass (Π s_k) n / n_pass` over the non-Identity pointers.
pub fn estimate_joint_expectation(counts: &CountsTable) -> Result<Estimate> {
    let n_pass = counts.n_pass();
    if n_pass < 2 {
        return Err(Error::NoPassEvents(n_pass));
    }
    let readout: Vec<usize> = (0..counts.n_pointers).filter(|&k| !counts.settings[k].is_identity()).collect();
    let signed: i64 = counts
        .entries()
        .filter(|(c, _)| c.port == Port::Pass)
        .map(|(c, n)| {
            let parity = readout.iter().filter(|&&k| c.flips >> k & 1 == 1).count();
            if parity % 2 == 0 {
                n as i64
            } else {
                -(n as i64)
            }
        })
        .sum();
    let mean = signed as f64 / n_pass as f64;
    let stderr = ((1.0 - mean * mean).max(0.0) / n_pass as f64).sqrt();
    Ok(Estimate { mean, stderr, n_pass })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineOptions {
    pub shots: u64,
    pub seed: u64,
    pub resamples: u32,
    pub extraction: Extraction,
}

impl PipelineOptions {
    pub fn new(shots: u64, seed: u64, resamples: u32) -> Self {
        PipelineOptions { shots, seed, resamples, extraction: Extraction::ExactPauli }
    }
}

/// Extracted sequential weak value of all active modules, with bootstrap spread.
#[derive(Clone, Debug, PartialEq)]
pub struct SwvEstimate {
    pub value: C64,
    pub re_sd: f64,
    pub im_sd: f64,
    /// Post-selected events in the full-chain even-parity run.
    pub n_pass: u64,
    /// Post-selection rate of that run.
    pub p_pass: f64,
    pub failed_resamples: u32,
}

fn observations(runs: &[ScheduledRun], tables: &[CountsTable]) -> Result<Vec<Observation>> {
    runs.iter()
        .zip(tables)
        .map(|(_, t)| {
            let e = estimate_joint_expectation(t)?;
            Ok(Observation { expectation: e.mean, pass_probability: t.n_pass() as f64 / t.n_total as f64 })
        })
        .collect()
}

/// Emulates the full measurement procedure with exact Pauli extraction: every
/// scheduled run is sampled with `shots` heralded photons, expectations are
/// estimated from pass events and the weak value is reconstructed. Uncertainty
/// is the standard deviation over `resamples` parametric bootstrap replicas of
/// all count tables.
pub fn estimate_swv_pipeline(chain: &Chain, shots: u64, seed: u64, resamples: u32) -> Result<SwvEstimate> {
    estimate_swv_pipeline_with(chain, &PipelineOptions::new(shots, seed, resamples))
}

pub fn estimate_swv_pipeline_with(chain: &Chain, opts: &PipelineOptions) -> Result<SwvEstimate> {
    if opts.shots < 10_000 {
        return Err(Error::InvalidArgument("pipeline needs at least 10^4 shots per run".into()));
    }
    if opts.resamples < 100 {
        return Err(Error::InvalidArgument("pipeline needs at least 100 bootstrap resamples".into()));
    }
    let target = chain.active_mask();
    if target == 0 {
        return Err(Error::ZeroStrength(0.0));
    }
    let n = chain.len();
    let gammas = chain.gammas();
    let runs = schedule(n, target, opts.extraction);
    let dists: Vec<OutcomeDistribution> = runs
        .iter()
        .map(|r| {
            let plan = MeasurementPlan::new(chain.restricted(r.mask), r.settings.clone(), true)?;
            Ok(outcome_distribution(&plan))
        })
        .collect::<Result<_>>()?;
    let tables: Vec<CountsTable> = dists
        .iter()
        .enumerate()
        .map(|(p, d)| sample_counts_stream(d, opts.shots, opts.seed, p as u32, 0))
        .collect::<Result<_>>()?;
    let value = reconstruct(&gammas, &runs, &observations(&runs, &tables)?, opts.extraction)?
        .get(target)
        .expect("target reconstructed");

    let replicas: Vec<Option<C64>> = (1..=opts.resamples)
        .into_par_iter()
        .map(|r| {
            let boot: Result<Vec<CountsTable>> = tables
                .iter()
                .enumerate()
                .map(|(p, t)| {
                    let empirical: Vec<f64> = t.counts.iter().map(|&k| k as f64 / t.n_total as f64).collect();
                    let mut rng = stream_rng(opts.seed, p as u32, r);
                    Ok(CountsTable { counts: multinomial(&empirical, t.n_total, &mut rng), ..t.clone() })
                })
                .collect();
            let obs = observations(&runs, &boot.ok()?).ok()?;
            reconstruct(&gammas, &runs, &obs, opts.extraction).ok()?.get(target)
        })
        .collect();
    let ok: Vec<C64> = replicas.iter().flatten().copied().collect();
    let failed_resamples = (replicas.len() - ok.len()) as u32;
    if ok.len() < 2 || failed_resamples as usize * 2 > replicas.len() {
        return Err(Error::NoPhysicalRoot);
    }
    let sd = |f: fn(&C64) -> f64| {
        let m = ok.iter().map(f).sum::<f64>() / ok.len() as f64;
        (ok.iter().map(|v| (f(v) - m).powi(2)).sum::<f64>() / (ok.len() - 1) as f64).sqrt()
    };
    let top = runs
        .iter()
        .position(|r| r.mask == target && r.kind == RunKind::Even)
        .expect("top-level run");
    Ok(SwvEstimate {
        value,
        re_sd: sd(|v| v.re),
        im_sd: sd(|v| v.im),
        n_pass: tables[top].n_pass(),
        p_pass: tables[top].n_pass() as f64 / tables[top].n_total as f64,
        failed_resamples,
    })
}
