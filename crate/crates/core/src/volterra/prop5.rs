//! Convergence study for discrete integrals against linear interpolations:
//! sup_t | int_0^t G(m) dh(m) - int_0^t G dh | across a range of depths,
//! with the hypothesis constants (Hoelder bounds and the uniform gap c(m))
//! estimated from fine grids and reported rather than assumed.

use serde::{Deserialize, Serialize};

use crate::cm::CameronMartinPath;
use crate::error::Result;
use crate::kernel::HurstParams;
use crate::stats::ols_log2_fit;

use super::{integrate_against_h, integrate_against_hm, CmGrid, HoelderFunction, IntegralReport};

/// Hypothesis-constant grid: 2^12 points.
const HYP_GRID: usize = 1 << 12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prop5Report {
    pub m_values: Vec<usize>,
    /// sup over the t-grid of the euclidean gap per depth
    pub sup_discrepancy: Vec<f64>,
    /// c(m) = sup |G(m) - G| on the hypothesis grid
    pub c_m: Vec<f64>,
    pub g_holder_constant: f64,
    pub gm_holder_constants: Vec<f64>,
    /// whether the estimated hypothesis constants look uniform and c(m)
    /// shrinks; a failed check is flagged, not fatal
    pub hypotheses_ok: bool,
    /// discrepancies decreasing in trend (log2 slope < 0 or net decrease)
    pub decreasing_trend: bool,
    /// the continuous reference curve int_0^t G dh on the t-grid
    pub reference: IntegralReport,
}

/// Runs the study for G and the family m -> G(m) against h.
pub fn prop5_convergence_study(
    g: &HoelderFunction,
    g_m: &dyn Fn(usize) -> Result<HoelderFunction>,
    h: &CameronMartinPath,
    params: &HurstParams,
    m_range: std::ops::RangeInclusive<usize>,
    t_depth: usize,
) -> Result<Prop5Report> {
    let nt = 1usize << t_depth;
    let times: Vec<f64> = (0..=nt).map(|l| l as f64 / nt as f64).collect();

    // continuous reference, computed once
    let mut ref_values = Vec::with_capacity(times.len());
    let mut ref_errors = Vec::with_capacity(times.len());
    for &t in &times {
        let v = integrate_against_h(g, h, params, t)?;
        ref_values.push(v);
        ref_errors.push(1e-6); // outer tolerance of the K* quadrature
    }
    let reference = IntegralReport {
        grid_depth: t_depth,
        times: times.clone(),
        values: ref_values.clone(),
        error_estimates: ref_errors,
    };

    let g_holder_constant = holder_estimate(|t| g.eval(t), params.hurst());

    let mut m_values = Vec::new();
    let mut sup_discrepancy = Vec::new();
    let mut c_m = Vec::new();
    let mut gm_holder_constants = Vec::new();
    for m in m_range {
        let gm = g_m(m)?;
        let grid = CmGrid::build(h, params, m)?;
        let mut sup = 0.0f64;
        for (ti, &t) in times.iter().enumerate() {
            let discrete = integrate_against_hm(&gm, &grid, t)?;
            let gap: f64 = discrete
                .iter()
                .zip(&ref_values[ti])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            sup = sup.max(gap);
        }
        let gap_sup = (0..=HYP_GRID)
            .map(|l| {
                let t = l as f64 / HYP_GRID as f64;
                (gm.eval(t) - g.eval(t)).abs()
            })
            .fold(0.0f64, f64::max);
        gm_holder_constants.push(holder_estimate(|t| gm.eval(t), params.hurst()));
        c_m.push(gap_sup);
        sup_discrepancy.push(sup);
        m_values.push(m);
    }

    let holder_uniform = gm_holder_constants
        .iter()
        .all(|c| c.is_finite() && *c <= 10.0 * (g_holder_constant + 1e-9));
    let c_shrinks = c_m.len() < 2 || c_m.last().unwrap() < c_m.first().unwrap();
    let hypotheses_ok = holder_uniform && c_shrinks;

    let xs: Vec<f64> = m_values.iter().map(|m| *m as f64).collect();
    let slope = ols_log2_fit(&xs, &sup_discrepancy).map(|f| f.slope);
    let decreasing_trend = match slope {
        Some(s) => s < 0.0,
        None => sup_discrepancy.last() <= sup_discrepancy.first(),
    };

    Ok(Prop5Report {
        m_values,
        sup_discrepancy,
        c_m,
        g_holder_constant,
        gm_holder_constants,
        hypotheses_ok,
        decreasing_trend,
        reference,
    })
}

/// Hoelder-H constant estimate on the 2^12 grid (adjacent increments).
fn holder_estimate(f: impl Fn(f64) -> f64, hurst: f64) -> f64 {
    let n = HYP_GRID;
    let step = (1.0 / n as f64).powf(hurst);
    let mut prev = f(0.0);
    let mut worst = 0.0f64;
    for l in 1..=n {
        let v = f(l as f64 / n as f64);
        worst = worst.max((v - prev).abs() / step);
        prev = v;
    }
    worst
}
