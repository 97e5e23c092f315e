//! Rate functions and seeded Monte Carlo studies: dyadic-norm decay across
//! interpolation depths, boundedness probes, exponential-tightness trend
//! surfaces, and the level-1 tail-slope check against the Gaussian rate
//! function.
//!
//! Every estimate carries its seed; replicas are reduced in a fixed order
//! (pairwise summation over the ordered sample vector), so re-running a
//! configuration reproduces tables bit for bit regardless of thread count.
//!
//! Slope conventions: decay rates across dyadic depths are fitted on log2
//! data; tail probabilities are fitted on natural-log data against 1/eps^2,
//! matching the eps^2 log P normalization of the rate function.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cm::CameronMartinPath;
use crate::dyadic::DyadicRoughPath;
use crate::error::{Error, Result};
use crate::kernel::{kernel_unchecked, HurstParams};
use crate::metrics::{d_jp_all, d_jp_norm_all, dp_upper_bound_from_parts, MetricParams};
use crate::quad::integrate_singular_both;
use crate::sampler::CholeskySampler;
use crate::stats::{mean_se, ols_fit, ols_log2_fit, pairwise_sum, SlopeFit};

/// Minimum sample count for any stochastic claim check.
pub const MIN_CLAIM_SAMPLES: usize = 1000;
/// Minimum hit count for a tail cell to enter a slope fit.
pub const MIN_TAIL_HITS: usize = 5;

/// Configuration of a Monte Carlo experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub hurst: f64,
    pub p: f64,
    pub gamma: f64,
    pub dim: usize,
    /// coarse depth range (inclusive)
    pub m_lo: usize,
    pub m_hi: usize,
    /// the reference "W" is W(m_hi + m_fine_offset)
    pub m_fine_offset: usize,
    /// epsilon grid, strictly decreasing
    pub epsilons: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    /// threshold for tail events
    pub delta: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        HurstParams::new(self.hurst, self.p, self.gamma, self.dim)?;
        if self.m_lo > self.m_hi {
            return Err(Error::InvalidParameter {
                name: "m_lo",
                reason: format!("m range [{}, {}] is empty", self.m_lo, self.m_hi),
            });
        }
        if self.samples < MIN_CLAIM_SAMPLES {
            return Err(Error::InsufficientSamples {
                context: "experiment",
                got: self.samples,
                need: MIN_CLAIM_SAMPLES,
            });
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter {
                name: "epsilons",
                reason: "grid must be strictly decreasing".into(),
            });
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: "threshold must be finite and nonnegative".into(),
            });
        }
        Ok(())
    }

    fn metric(&self) -> Result<MetricParams> {
        MetricParams::new(self.p, self.gamma)
    }

    pub fn m_fine(&self) -> usize {
        self.m_hi + self.m_fine_offset
    }
}

/// A labelled Monte Carlo estimate with its provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McEstimate {
    pub label: String,
    pub mean: f64,
    pub std_error: f64,
    pub count: usize,
    pub seed: u64,
}

/// Rate function of a Cameron-Martin path: ||hdot||_2^2 / 2.
pub fn rate_function_cm(h: &CameronMartinPath) -> f64 {
    0.5 * h.cm_norm().powi(2)
}

/// Rate of a rough path known only through an optional Cameron-Martin
/// registration; unregistered level-1 paths get +infinity.
pub fn rate_function_declared(registered: Option<&CameronMartinPath>) -> f64 {
    match registered {
        Some(h) => rate_function_cm(h),
        None => f64::INFINITY,
    }
}

// ---------------------------------------------------------------------
// moment decay study (random interpolations)
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentRow {
    pub m: usize,
    pub j: usize,
    pub q: f64,
    /// (E D^q)^{1/q}
    pub estimate: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentDecayStudy {
    pub seed: u64,
    pub samples: usize,
    pub m_fine: usize,
    /// pair rows: D_{j,p}(W(m), W(m_fine))
    pub pair_rows: Vec<MomentRow>,
    /// single rows: D_{j,p}(W(m)), j = 1, 2
    pub single_rows: Vec<MomentRow>,
    /// fitted log2 slopes of the pair estimates over m, per (j, q)
    pub slopes: Vec<(usize, f64, SlopeFit)>,
}

/// Estimates (E D_{j,p}(W(m), W(m_fine))^q)^{1/q} for q in {p, 2p} across
/// the configured m range, plus the boundedness rows D_{j,p}(W(m)).
pub fn moment_decay_study(cfg: &ExperimentConfig) -> Result<MomentDecayStudy> {
    cfg.validate()?;
    let metric = cfg.metric()?;
    let m_fine = cfg.m_fine();
    let sampler = CholeskySampler::new(cfg.hurst, cfg.dim, m_fine)?;
    let ms: Vec<usize> = (cfg.m_lo..=cfg.m_hi).collect();
    let cols_per_m = 5; // D1, D2, D3 pair; D1, D2 single
    let n_cols = ms.len() * cols_per_m;

    let rows: Result<Vec<Vec<f64>>> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let path = sampler.sample(cfg.seed, i);
            let fine = DyadicRoughPath::from_points(&path.values, m_fine)?;
            let mut out = Vec::with_capacity(n_cols);
            for &m in &ms {
                let coarse_path = path.coarsen(m)?;
                let coarse = DyadicRoughPath::from_points(&coarse_path.values, m)?;
                let pair = d_jp_all(&coarse, &fine, &metric)?;
                let single = d_jp_norm_all(&coarse, &metric)?;
                out.push(pair[0].value);
                out.push(pair[1].value);
                out.push(pair[2].value);
                out.push(single[0].value);
                out.push(single[1].value);
            }
            Ok(out)
        })
        .collect();
    let rows = rows?;

    let column = |c: usize| -> Vec<f64> { rows.iter().map(|r| r[c]).collect() };
    let mut pair_rows = Vec::new();
    let mut single_rows = Vec::new();
    for (mi, &m) in ms.iter().enumerate() {
        for j in 1..=3usize {
            let xs = column(mi * cols_per_m + (j - 1));
            for q in [cfg.p, 2.0 * cfg.p] {
                pair_rows.push(moment_row(m, j, q, &xs));
            }
        }
        for j in 1..=2usize {
            let xs = column(mi * cols_per_m + 3 + (j - 1));
            single_rows.push(moment_row(m, j, cfg.p, &xs));
        }
    }

    let mut slopes = Vec::new();
    let xs: Vec<f64> = ms.iter().map(|m| *m as f64).collect();
    for j in 1..=3usize {
        for q in [cfg.p, 2.0 * cfg.p] {
            let ys: Vec<f64> = pair_rows
                .iter()
                .filter(|r| r.j == j && r.q == q)
                .map(|r| r.estimate)
                .collect();
            if let Some(fit) = ols_log2_fit(&xs, &ys) {
                slopes.push((j, q, fit));
            }
        }
    }

    Ok(MomentDecayStudy {
        seed: cfg.seed,
        samples: cfg.samples,
        m_fine,
        pair_rows,
        single_rows,
        slopes,
    })
}

/// (E X^q)^{1/q} with a delta-method standard error.
fn moment_row(m: usize, j: usize, q: f64, xs: &[f64]) -> MomentRow {
    let powered: Vec<f64> = xs.iter().map(|x| x.powf(q)).collect();
    let ms = mean_se(&powered);
    let estimate = ms.mean.powf(1.0 / q);
    let std_error = if ms.mean > 0.0 {
        estimate / (q * ms.mean) * ms.std_error
    } else {
        0.0
    };
    MomentRow {
        m,
        j,
        q,
        estimate,
        std_error,
    }
}

// ---------------------------------------------------------------------
// deterministic decay study (Cameron-Martin interpolations)
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeterministicRow {
    pub m: usize,
    pub j: usize,
    /// D_{j,p}(h(m), h(m+1))
    pub pair: f64,
    /// D_{j,p}(h(m)), reported for j = 1, 2
    pub single: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeterministicDecayStudy {
    pub rows: Vec<DeterministicRow>,
    pub slopes: Vec<(usize, SlopeFit)>,
}

/// D_{j,p}(h(m), h(m+1)) and D_{j,p}(h(m)) across depths for a fixed
/// Cameron-Martin path, from one fine grid of exact path values.
pub fn deterministic_decay_study(
    h: &CameronMartinPath,
    params: &HurstParams,
    metric: &MetricParams,
    m_lo: usize,
    m_hi: usize,
) -> Result<DeterministicDecayStudy> {
    if m_lo > m_hi {
        return Err(Error::InvalidParameter {
            name: "m_lo",
            reason: "empty depth range".into(),
        });
    }
    let fine_depth = m_hi + 1;
    let grid = h.cm_eval_grid(params, fine_depth)?;
    let path_at = |m: usize| -> Result<DyadicRoughPath> {
        let step = 1usize << (fine_depth - m);
        let pts: Vec<Vec<f64>> = grid.iter().step_by(step).cloned().collect();
        DyadicRoughPath::from_points(&pts, m)
    };
    let mut rows = Vec::new();
    for m in m_lo..=m_hi {
        let a = path_at(m)?;
        let b = path_at(m + 1)?;
        let pair = d_jp_all(&a, &b, metric)?;
        let single = d_jp_norm_all(&a, metric)?;
        for j in 1..=3usize {
            rows.push(DeterministicRow {
                m,
                j,
                pair: pair[j - 1].value,
                single: (j <= 2).then(|| single[j - 1].value),
            });
        }
    }
    let xs: Vec<f64> = (m_lo..=m_hi).map(|m| m as f64).collect();
    let mut slopes = Vec::new();
    for j in 1..=3usize {
        let ys: Vec<f64> = rows
            .iter()
            .filter(|r| r.j == j)
            .map(|r| r.pair)
            .collect();
        if let Some(fit) = ols_log2_fit(&xs, &ys) {
            slopes.push((j, fit));
        }
    }
    Ok(DeterministicDecayStudy { rows, slopes })
}

// ---------------------------------------------------------------------
// exponential tightness probe
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TightnessCell {
    pub m: usize,
    pub eps: f64,
    pub hits: usize,
    pub count: usize,
    /// regularized probability (hits + 1) / count -- an upper bound proxy
    /// when the cell is empty
    pub p_regularized: f64,
    pub p_std_error: f64,
    /// eps^2 ln(p_regularized)
    pub eps2_log_p: f64,
    pub zero_hits: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TightnessProbe {
    pub seed: u64,
    pub delta: f64,
    pub cells: Vec<TightnessCell>,
}

impl TightnessProbe {
    /// True when eps^2 ln p is nonincreasing in m at the given eps
    /// (within a slack of `tol`).
    pub fn nonincreasing_in_m(&self, eps: f64, tol: f64) -> bool {
        let mut cells: Vec<&TightnessCell> = self
            .cells
            .iter()
            .filter(|c| (c.eps - eps).abs() < 1e-12)
            .collect();
        cells.sort_by_key(|c| c.m);
        cells.windows(2).all(|w| w[1].eps2_log_p <= w[0].eps2_log_p + tol)
    }
}

/// Estimates eps^2 ln P(M(eps, m) > delta) where M is the combiner-bound
/// proxy for d_p(F(eps W(m)), F(eps W(m_fine))). The seven D-products are
/// computed once per (sample, m) and rescaled across the eps grid through
/// the dilation homogeneity of the levels.
pub fn exp_tightness_probe(cfg: &ExperimentConfig, delta: f64) -> Result<TightnessProbe> {
    cfg.validate()?;
    if cfg.epsilons.is_empty() {
        return Err(Error::InvalidParameter {
            name: "epsilons",
            reason: "need at least one epsilon".into(),
        });
    }
    let metric = cfg.metric()?;
    let m_fine = cfg.m_fine();
    let sampler = CholeskySampler::new(cfg.hurst, cfg.dim, m_fine)?;
    let ms: Vec<usize> = (cfg.m_lo..=cfg.m_hi).collect();

    // per sample and per m: [d1, d2, d3, d1x, d2x, d1y, d2y]
    let base: Result<Vec<Vec<[f64; 7]>>> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| -> Result<Vec<[f64; 7]>> {
            let path = sampler.sample(cfg.seed, i);
            let fine = DyadicRoughPath::from_points(&path.values, m_fine)?;
            let fine_norms = d_jp_norm_all(&fine, &metric)?;
            let mut out = Vec::with_capacity(ms.len());
            for &m in &ms {
                let coarse_path = path.coarsen(m)?;
                let coarse = DyadicRoughPath::from_points(&coarse_path.values, m)?;
                let pair = d_jp_all(&coarse, &fine, &metric)?;
                let single = d_jp_norm_all(&coarse, &metric)?;
                out.push([
                    pair[0].value,
                    pair[1].value,
                    pair[2].value,
                    single[0].value,
                    single[1].value,
                    fine_norms[0].value,
                    fine_norms[1].value,
                ]);
            }
            Ok(out)
        })
        .collect();
    let base = base?;

    let mut cells = Vec::new();
    for (mi, &m) in ms.iter().enumerate() {
        for &eps in &cfg.epsilons {
            let e2 = eps * eps;
            let e3 = e2 * eps;
            let mut hits = 0usize;
            for row in &base {
                let [d1, d2, d3, d1x, d2x, d1y, d2y] = row[mi];
                let bound = dp_upper_bound_from_parts(
                    [eps * d1, e2 * d2, e3 * d3],
                    [eps * d1x, e2 * d2x],
                    [eps * d1y, e2 * d2y],
                );
                if bound > delta {
                    hits += 1;
                }
            }
            let n = cfg.samples;
            let p_reg = (hits as f64 + 1.0) / n as f64;
            let p_hat = hits as f64 / n as f64;
            cells.push(TightnessCell {
                m,
                eps,
                hits,
                count: n,
                p_regularized: p_reg,
                p_std_error: (p_hat * (1.0 - p_hat) / n as f64).sqrt(),
                eps2_log_p: e2 * p_reg.ln(),
                zero_hits: hits == 0,
            });
        }
    }
    Ok(TightnessProbe {
        seed: cfg.seed,
        delta,
        cells,
    })
}

// ---------------------------------------------------------------------
// level-1 tail slope (Schilder-type probe)
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchilderCell {
    pub eps: f64,
    pub threshold: f64,
    pub hits: usize,
    pub count: usize,
    pub log_p: f64,
    pub usable: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchilderReport {
    pub seed: u64,
    pub delta: f64,
    pub depth: usize,
    pub cells: Vec<SchilderCell>,
    /// fitted slope of ln P against 1/eps^2 over the usable cells
    pub fit: Option<SlopeFit>,
    /// the rate-function prediction -delta^2 / 2
    pub target_slope: f64,
}

/// Tail probabilities P(sup_grid |eps W| >= delta) across the eps grid and
/// the fitted decay slope against 1/eps^2. Cells with fewer than
/// `MIN_TAIL_HITS` hits are flagged and excluded from the fit.
pub fn schilder_slope_probe(cfg: &ExperimentConfig, delta: f64) -> Result<SchilderReport> {
    cfg.validate()?;
    if cfg.dim != 1 {
        return Err(Error::InvalidParameter {
            name: "dim",
            reason: "the level-1 tail probe is one-dimensional".into(),
        });
    }
    if cfg.epsilons.is_empty() {
        return Err(Error::InvalidParameter {
            name: "epsilons",
            reason: "need at least one epsilon".into(),
        });
    }
    let depth = cfg.m_hi;
    let sampler = CholeskySampler::new(cfg.hurst, 1, depth)?;
    let n = 1usize << depth;
    let mut cells = Vec::new();
    for (ei, &eps) in cfg.epsilons.iter().enumerate() {
        let threshold = delta / eps;
        let base_stream = (ei as u64) << 32;
        let hits: usize = (0..cfg.samples as u64)
            .into_par_iter()
            .map_init(
                || (vec![0.0f64; n], vec![0.0f64; n]),
                |(z, out), i| {
                    sampler.sample_flat(cfg.seed, base_stream | i, z, out);
                    let sup = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    usize::from(sup >= threshold)
                },
            )
            .sum();
        let p_hat = hits as f64 / cfg.samples as f64;
        cells.push(SchilderCell {
            eps,
            threshold,
            hits,
            count: cfg.samples,
            log_p: p_hat.ln(),
            usable: hits >= MIN_TAIL_HITS,
        });
    }
    let xs: Vec<f64> = cells
        .iter()
        .filter(|c| c.usable)
        .map(|c| 1.0 / (c.eps * c.eps))
        .collect();
    let ys: Vec<f64> = cells.iter().filter(|c| c.usable).map(|c| c.log_p).collect();
    let fit = ols_fit(&xs, &ys);
    Ok(SchilderReport {
        seed: cfg.seed,
        delta,
        depth,
        cells,
        fit,
        target_slope: -0.5 * delta * delta,
    })
}

// ---------------------------------------------------------------------
// rate-function minimization over a terminal constraint
// ---------------------------------------------------------------------

/// Minimizes ||hdot||^2 / 2 over step densities on a cosine-graded grid
/// subject to h(1) = delta, by exact least-squares projection onto the
/// kernel slice K(1, .). Returns (rate, minimizer). The rate converges to
/// delta^2 / 2 as the grid refines because int K(1,s)^2 ds = 1.
pub fn rate_minimizer_projection(
    params: &HurstParams,
    delta: f64,
    pieces: usize,
) -> Result<(f64, CameronMartinPath)> {
    if pieces < 2 {
        return Err(Error::InvalidParameter {
            name: "pieces",
            reason: "need at least 2 pieces".into(),
        });
    }
    // cosine-graded breakpoints cluster quadratically at both endpoints,
    // where K(1, .) is singular
    let breaks: Vec<f64> = (0..=pieces)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / pieces as f64).cos()))
        .collect();
    let beta = params.hurst() - 0.5;
    let mut weights = Vec::with_capacity(pieces);
    for k in 0..pieces {
        let (lo, hi) = (breaks[k], breaks[k + 1]);
        let beta_lo = if k == 0 { beta } else { 0.0 };
        let beta_hi = if k + 1 == pieces { beta } else { 0.0 };
        let a = integrate_singular_both(
            |s| kernel_unchecked(params, 1.0, s),
            lo,
            hi,
            beta_lo,
            beta_hi,
            1e-10,
        )?
        .value;
        weights.push(a);
    }
    // minimize (1/2) sum v_k^2 w_k subject to sum v_k a_k = delta:
    // v_k = lambda a_k / w_k with lambda = delta / sum(a_k^2 / w_k)
    let denom: f64 = weights
        .iter()
        .enumerate()
        .map(|(k, a)| a * a / (breaks[k + 1] - breaks[k]))
        .sum();
    let lambda = delta / denom;
    let values: Vec<Vec<f64>> = weights
        .iter()
        .enumerate()
        .map(|(k, a)| vec![lambda * a / (breaks[k + 1] - breaks[k])])
        .collect();
    let h = CameronMartinPath::new(breaks, values)?;
    Ok((rate_function_cm(&h), h))
}

/// Deterministic total of per-sample values in index order; used by
/// callers assembling custom tables.
pub fn deterministic_total(values: &[f64]) -> f64 {
    pairwise_sum(values)
}
