//! Monte Carlo transmission harness: seeded channel sampling, frame error
//! rate estimation with Wilson confidence intervals, the analytic union
//! bound, and the polarization-rate trend curve.

use std::io::Write as IoWrite;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::Dmc;
use crate::code::{encode, CodeConstruction};
use crate::decode::ScDecoder;
use crate::error::{Error, Result};
use crate::polarize::{sample_paths, SynthesisParams, SynthesisTable};

/// Precomputed per-input cumulative distributions for inverse-CDF sampling.
pub struct OutputSampler {
    m: usize,
    cdf: Vec<f64>,
}

impl OutputSampler {
    pub fn new(w: &Dmc) -> Self {
        let m = w.num_outputs();
        let mut cdf = Vec::with_capacity(w.q() * m);
        for x in 0..w.q() {
            let mut acc = 0.0;
            for &p in w.input_row(x) {
                acc += p;
                cdf.push(acc);
            }
        }
        Self { m, cdf }
    }

    /// Draws an output index for input `x`.
    pub fn sample<R: Rng>(&self, x: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let row = &self.cdf[x * self.m..(x + 1) * self.m];
        row.partition_point(|&c| c < u).min(self.m - 1)
    }
}

/// Draws one output of `W` given input `x`.
pub fn sample_output<R: Rng>(sampler: &OutputSampler, x: usize, rng: &mut R) -> usize {
    sampler.sample(x, rng)
}

/// Simulation parameters.
#[derive(Debug, Clone)]
pub struct SimParams {
    pub trials: u64,
    pub seed: u64,
    /// Also run a genie-aided pass per trial, recording per-index error
    /// counts under a correct past.
    pub genie: bool,
    /// Stop after this many frame errors (checked between chunks).
    pub max_frame_errors: Option<u64>,
}

/// Aggregated simulation outcome.
#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    /// Trials actually run (may stop early on the frame-error cap).
    pub trials: u64,
    pub frame_errors: u64,
    pub symbol_errors: u64,
    pub fer: f64,
    pub fer_ci95: (f64, f64),
    /// Analytic union bound, when a synthesis table was supplied.
    pub union_bound: Option<f64>,
    pub seed: u64,
    /// Wall-clock seconds; the only nondeterministic field.
    pub wall_time: f64,
    pub stop_rule: String,
    /// Genie-aided per-index error counts (same trial count).
    pub genie_index_errors: Option<Vec<u64>>,
}

impl SimReport {
    /// JSON with full-precision floats.
    pub fn to_json(&self) -> Vec<u8> {
        crate::channel::to_precise_json(self).expect("report serialization cannot fail")
    }

    pub fn csv_header() -> &'static str {
        "trials,frame_errors,symbol_errors,fer,fer_lo,fer_hi,union_bound,seed,wall_time"
    }

    pub fn csv_row(&self) -> String {
        let ub = self
            .union_bound
            .map(|u| format!("{u:.16e}"))
            .unwrap_or_default();
        format!(
            "{},{},{},{:.16e},{:.16e},{:.16e},{},{},{:.6}",
            self.trials,
            self.frame_errors,
            self.symbol_errors,
            self.fer,
            self.fer_ci95.0,
            self.fer_ci95.1,
            ub,
            self.seed,
            self.wall_time
        )
    }
}

/// Wilson 95% score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054_f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// The union bound on block error probability: over every index that
/// carries data, the sum of `Z_v` over the nonzero error offsets `v` whose
/// top `k_j` bits vanish (the offsets reachable within the frozen coset).
pub fn union_bound(c: &CodeConstruction, table: &SynthesisTable) -> Result<f64> {
    Ok(index_union_terms(c, table)?.iter().sum::<f64>().max(0.0))
}

/// The per-index terms of the union bound; zero for fully frozen indices.
pub fn index_union_terms(c: &CodeConstruction, table: &SynthesisTable) -> Result<Vec<f64>> {
    if c.fingerprint != table.fingerprint {
        return Err(Error::FingerprintMismatch {
            expected: table.fingerprint.clone(),
            actual: c.fingerprint.clone(),
        });
    }
    if c.n != table.n || c.r != table.r {
        return Err(Error::InvalidConfig(
            "construction and table disagree on n or r".into(),
        ));
    }
    Ok(c.k
        .iter()
        .zip(&table.records)
        .map(|(&k, rec)| {
            let width = c.r - u32::from(k);
            (1..(1usize << width)).map(|v| rec.stats.z_v[v - 1]).sum()
        })
        .collect())
}

struct TrialOutcome {
    frame_error: bool,
    symbol_errors: u64,
    genie_errors: Option<Vec<bool>>,
}

fn run_trial(
    w: &Dmc,
    c: &CodeConstruction,
    sampler: &OutputSampler,
    seed: u64,
    trial: u64,
    genie: bool,
) -> TrialOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let bits: Vec<u8> = (0..c.rate_bits()).map(|_| rng.random_range(0..2u8)).collect();
    let (u, x) = encode(c, &bits).expect("bit count matches construction");
    let y: Vec<usize> = x.iter().map(|&sym| sampler.sample(sym, &mut rng)).collect();
    let mut dec = ScDecoder::new_unchecked(w, c);
    let res = dec.decode(&y).expect("frame dimensions match");
    let frame_error = res.data_bits != bits;
    let symbol_errors = res
        .u_hat
        .iter()
        .zip(&u)
        .zip(&c.k)
        .filter(|((a, b), &k)| u32::from(k) < c.r && a != b)
        .count() as u64;
    let genie_errors = genie.then(|| {
        let g = dec.decode_genie(&y, &u).expect("frame dimensions match");
        g.correct.iter().map(|&ok| !ok).collect()
    });
    TrialOutcome {
        frame_error,
        symbol_errors,
        genie_errors,
    }
}

/// Runs the encode/transmit/decode loop. Trials use independent derived RNG
/// streams, so results do not depend on the worker count; with an early-stop
/// cap the trial count is still deterministic because the cap is checked on
/// chunk boundaries.
pub fn simulate_fer(
    w: &Dmc,
    c: &CodeConstruction,
    table: Option<&SynthesisTable>,
    params: &SimParams,
) -> Result<SimReport> {
    if params.trials == 0 {
        return Err(Error::InvalidConfig("need at least one trial".into()));
    }
    // Validates the channel/construction pairing.
    ScDecoder::new(w, c)?;
    let bound = table.map(|t| union_bound(c, t)).transpose()?;
    let start = Instant::now();
    let sampler = OutputSampler::new(w);
    let big_n = c.block_length();

    let mut trials_run = 0u64;
    let mut frame_errors = 0u64;
    let mut symbol_errors = 0u64;
    let mut genie_counts = params.genie.then(|| vec![0u64; big_n]);
    let mut stop_rule = "completed".to_string();

    const CHUNK: u64 = 256;
    while trials_run < params.trials {
        let chunk = CHUNK.min(params.trials - trials_run);
        let outcomes: Vec<TrialOutcome> = (trials_run..trials_run + chunk)
            .into_par_iter()
            .map(|t| run_trial(w, c, &sampler, params.seed, t, params.genie))
            .collect();
        for o in outcomes {
            frame_errors += u64::from(o.frame_error);
            symbol_errors += o.symbol_errors;
            if let (Some(counts), Some(errs)) = (genie_counts.as_mut(), o.genie_errors) {
                for (cnt, e) in counts.iter_mut().zip(errs) {
                    *cnt += u64::from(e);
                }
            }
        }
        trials_run += chunk;
        if let Some(cap) = params.max_frame_errors {
            if frame_errors >= cap {
                stop_rule = format!("stopped at {frame_errors} frame errors (cap {cap})");
                break;
            }
        }
    }

    Ok(SimReport {
        trials: trials_run,
        frame_errors,
        symbol_errors,
        fer: frame_errors as f64 / trials_run as f64,
        fer_ci95: wilson_interval(frame_errors, trials_run),
        union_bound: bound,
        seed: params.seed,
        wall_time: start.elapsed().as_secs_f64(),
        stop_rule,
        genie_index_errors: genie_counts,
    })
}

/// One row of the polarization-rate curve.
#[derive(Debug, Clone, Serialize)]
pub struct RateCurveRow {
    pub n: u32,
    pub threshold: f64,
    pub fraction: f64,
    pub ci95: (f64, f64),
    pub paths: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateCurve {
    pub alpha: f64,
    pub seed: u64,
    pub rows: Vec<RateCurveRow>,
}

impl RateCurve {
    pub fn write_csv<W: IoWrite>(&self, out: &mut W, provenance: Option<&str>) -> Result<()> {
        if let Some(p) = provenance {
            writeln!(out, "# {p}")?;
        }
        writeln!(out, "n,threshold,fraction,ci_lo,ci_hi,paths")?;
        for row in &self.rows {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                row.n, row.threshold, row.fraction, row.ci95.0, row.ci95.1, row.paths
            )?;
        }
        Ok(())
    }
}

/// For each depth in `n_list`, the Monte Carlo fraction of trajectories with
/// `Z_max^(r) < 2^(-2^(alpha n))` after `n` steps. Trajectory `(i, t)` uses
/// RNG stream `i << 32 | t`, so the curve is reproducible.
pub fn polarization_rate_curve(
    w: &Dmc,
    n_list: &[u32],
    alpha: f64,
    paths_per_n: usize,
    seed: u64,
    params: &SynthesisParams,
) -> Result<RateCurve> {
    if !(alpha > 0.0) || paths_per_n == 0 {
        return Err(Error::InvalidConfig(
            "alpha must be positive and at least one path is required".into(),
        ));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for (i, &n) in n_list.iter().enumerate() {
        let threshold = (-((alpha * n as f64).exp2())).exp2();
        let base = (i as u64) << 32;
        let hits = (0..paths_per_n)
            .into_par_iter()
            .map(|t| {
                let trace =
                    crate::polarize::sample_path(w, n, seed, base | t as u64, params)?;
                let last = trace.steps.last().expect("nonempty trace");
                let zr = *last.z_max_level.last().expect("r >= 1");
                Ok(usize::from(zr < threshold))
            })
            .collect::<Result<Vec<usize>>>()?
            .into_iter()
            .sum::<usize>();
        rows.push(RateCurveRow {
            n,
            threshold,
            fraction: hits as f64 / paths_per_n as f64,
            ci95: wilson_interval(hits as u64, paths_per_n as u64),
            paths: paths_per_n,
        });
    }
    Ok(RateCurve {
        alpha,
        seed,
        rows,
    })
}

/// Empirical distribution of final classifications over sampled paths:
/// fractions with `k = 0..=r` good bits, plus the unpolarized fraction.
pub fn sampled_class_fractions(
    w: &Dmc,
    n: u32,
    paths: usize,
    seed: u64,
    epsilon: f64,
    params: &SynthesisParams,
) -> Result<(Vec<f64>, f64)> {
    let traces = sample_paths(w, n, seed, paths, params)?;
    let r = w.r() as usize;
    let mut counts = vec![0usize; r + 1];
    let mut unpolarized = 0usize;
    for trace in &traces {
        let last = trace.steps.last().expect("nonempty");
        match crate::polarize::classify(&last.z_level, epsilon).k {
            Some(frozen) => counts[r - frozen as usize] += 1,
            None => unpolarized += 1,
        }
    }
    Ok((
        counts.iter().map(|&c| c as f64 / paths as f64).collect(),
        unpolarized as f64 / paths as f64,
    ))
}
