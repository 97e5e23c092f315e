//! Adaptive Gauss-Kronrod quadrature with power substitutions for
//! endpoint singularities.
//!
//! All singular integrals in the crate follow one policy: substitute
//! x = a + v^kappa (or x = b - v^kappa) to remove an integrable power
//! singularity at an endpoint, then integrate the smooth remainder with
//! adaptive G7-K15 panels.

use crate::error::{Error, Result};

// 15-point Kronrod abscissae on [-1, 1] (positive half) and weights,
// with the embedded 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// One G7-K15 panel: returns (kronrod, |kronrod - gauss|).
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, &x) in XGK.iter().enumerate().take(7) {
        let dx = h * x;
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    (kronrod * h, (kronrod - gauss).abs() * h)
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub panels: usize,
}

/// Adaptive integral of `f` over [a, b] to absolute tolerance `tol`.
///
/// Globally adaptive: the panel with the largest error estimate is split
/// first, and a split whose children do not reduce the error marks a noise
/// floor (for integrands that are themselves computed numerically) and is
/// accepted rather than refined forever.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            abs_error: 0.0,
            panels: 0,
        });
    }
    let tol = tol.max(1e-300);
    const MAX_DEPTH: u32 = 52;
    // active panels kept sorted by error (small vector, insertion sort)
    struct Panel {
        lo: f64,
        hi: f64,
        value: f64,
        err: f64,
        depth: u32,
    }
    let (v0, e0) = gk15(&mut f, a, b);
    let mut panels = 1usize;
    let mut active: Vec<Panel> = vec![Panel {
        lo: a,
        hi: b,
        value: v0,
        err: e0,
        depth: 0,
    }];
    let mut done_value = 0.0f64;
    let mut done_err = 0.0;
    let mut active_err = e0;
    let mut active_mag = v0.abs();
    while active_err + done_err > tol.max(64.0 * f64::EPSILON * (active_mag + done_value.abs())) {
        // split the worst active panel
        let worst = match active
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.partial_cmp(&y.1.err).unwrap())
        {
            Some((i, _)) => i,
            None => break,
        };
        let p = active.swap_remove(worst);
        if p.depth >= MAX_DEPTH {
            done_value += p.value;
            done_err += p.err;
            active_err -= p.err;
            continue;
        }
        let mid = 0.5 * (p.lo + p.hi);
        let (vl, el) = gk15(&mut f, p.lo, mid);
        let (vr, er) = gk15(&mut f, mid, p.hi);
        panels += 2;
        if panels > 100_000 {
            return Err(Error::Quadrature {
                context: "integrate",
                reason: "panel budget exhausted".into(),
            });
        }
        active_err -= p.err;
        active_mag += vl.abs() + vr.abs() - p.value.abs();
        if el + er >= 0.9 * p.err && p.err < 1e100 {
            // no improvement: the estimate sits on an evaluation noise floor
            done_value += vl + vr;
            done_err += el + er;
        } else {
            active_err += el + er;
            active.push(Panel {
                lo: p.lo,
                hi: mid,
                value: vl,
                err: el,
                depth: p.depth + 1,
            });
            active.push(Panel {
                lo: mid,
                hi: p.hi,
                value: vr,
                err: er,
                depth: p.depth + 1,
            });
        }
    }
    let mut value = done_value;
    let mut err = done_err;
    for p in &active {
        value += p.value;
        err += p.err;
    }
    if !value.is_finite() {
        return Err(Error::Quadrature {
            context: "integrate",
            reason: "non-finite integral value".into(),
        });
    }
    Ok(QuadResult {
        value,
        abs_error: err,
        panels,
    })
}

/// Number of geometric grading levels toward a singular endpoint. The
/// leftover sliver beyond the last level is captured by exact geometric
/// extrapolation of the leading power term.
const GRADE_LEVELS: usize = 64;

/// Integral of `f` over [a, b] where f ~ (x - a)^beta near a with
/// beta > -1. Integrates geometrically graded panels
/// [a + w 2^{-k-1}, a + w 2^{-k}] and extrapolates the remaining sliver
/// with the exact level ratio 2^{-(beta+1)} of the leading term.
pub fn integrate_singular_lower<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    beta: f64,
    tol: f64,
) -> Result<QuadResult> {
    graded(f, a, b, beta, tol, false)
}

/// Integral of `f` over [a, b] where f ~ (b - x)^beta near b with beta > -1.
pub fn integrate_singular_upper<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    beta: f64,
    tol: f64,
) -> Result<QuadResult> {
    graded(f, a, b, beta, tol, true)
}

fn graded<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    beta: f64,
    tol: f64,
    toward_upper: bool,
) -> Result<QuadResult> {
    if beta <= -1.0 {
        return Err(Error::DivergentSingularity {
            reason: format!("endpoint exponent {beta} <= -1"),
        });
    }
    let width = b - a;
    if width <= 0.0 {
        return Ok(QuadResult {
            value: 0.0,
            abs_error: 0.0,
            panels: 0,
        });
    }
    let panel_tol = tol / (GRADE_LEVELS as f64 + 8.0);
    let mut value = 0.0;
    let mut err = 0.0;
    let mut panels = 0usize;
    let mut last = 0.0f64;
    let mut k = 0usize;
    while k < GRADE_LEVELS {
        let hi_off = width * (0.5f64).powi(k as i32);
        let lo_off = 0.5 * hi_off;
        let (lo, hi) = if toward_upper {
            (b - hi_off, b - lo_off)
        } else {
            (a + lo_off, a + hi_off)
        };
        // stop before panels shrink to ulp scale at the endpoint
        if lo >= hi || hi - lo < 8.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            break;
        }
        let r = integrate(&mut f, lo, hi, panel_tol)?;
        value += r.value;
        err += r.abs_error;
        panels += r.panels;
        last = r.value;
        k += 1;
        // stop early once the level contribution and its geometric tail are
        // below the tolerance
        let ratio = (0.5f64).powf(beta + 1.0);
        if k >= 8 && (last.abs() * ratio / (1.0 - ratio)) < 0.1 * tol {
            break;
        }
    }
    // leading-power extrapolation of the unreached sliver
    let ratio = (0.5f64).powf(beta + 1.0);
    let rem = last * ratio / (1.0 - ratio);
    value += rem;
    err += rem.abs() * (0.5f64).powi(k.min(52) as i32) + 1e-18 * rem.abs();
    if !value.is_finite() {
        return Err(Error::Quadrature {
            context: "integrate_singular",
            reason: "non-finite integral value".into(),
        });
    }
    Ok(QuadResult {
        value,
        abs_error: err,
        panels,
    })
}

/// Integral over [a, b] with power singularities at both endpoints; split at
/// the midpoint and grade toward each side.
pub fn integrate_singular_both<F: FnMut(f64) -> f64 + Copy>(
    f: F,
    a: f64,
    b: f64,
    beta_lower: f64,
    beta_upper: f64,
    tol: f64,
) -> Result<QuadResult> {
    let mid = 0.5 * (a + b);
    let lo = integrate_singular_lower(f, a, mid, beta_lower, 0.5 * tol)?;
    let hi = integrate_singular_upper(f, mid, b, beta_upper, 0.5 * tol)?;
    Ok(QuadResult {
        value: lo.value + hi.value,
        abs_error: lo.abs_error + hi.abs_error,
        panels: lo.panels + hi.panels,
    })
}

// ---- vector-valued variants -------------------------------------------
//
// Integrands write into a slice; panel error is the max across components.
// Used where many tensor components share the same expensive kernel
// evaluations.

/// One G7-K15 panel of a vector integrand; accumulates the Kronrod value
/// into `value` and returns the max-component |K - G| estimate.
fn gk15_vec<F: FnMut(f64, &mut [f64])>(
    f: &mut F,
    a: f64,
    b: f64,
    value: &mut [f64],
    scratch: &mut [f64],
) -> f64 {
    let ncomp = value.len();
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = vec![0.0; ncomp];
    let mut gauss = vec![0.0; ncomp];
    f(c, scratch);
    for i in 0..ncomp {
        kron[i] = scratch[i] * WGK[7];
        gauss[i] = scratch[i] * WG[3];
    }
    for (j, &x) in XGK.iter().enumerate().take(7) {
        let dx = h * x;
        f(c - dx, scratch);
        for i in 0..ncomp {
            kron[i] += WGK[j] * scratch[i];
            if j % 2 == 1 {
                gauss[i] += WG[j / 2] * scratch[i];
            }
        }
        f(c + dx, scratch);
        for i in 0..ncomp {
            kron[i] += WGK[j] * scratch[i];
            if j % 2 == 1 {
                gauss[i] += WG[j / 2] * scratch[i];
            }
        }
    }
    let mut err = 0.0f64;
    for i in 0..ncomp {
        value[i] += kron[i] * h;
        err = err.max((kron[i] - gauss[i]).abs() * h.abs());
    }
    err
}

/// Adaptive vector integral over [a, b]; tolerance applies to the max
/// component error. Globally adaptive with the same noise-floor stall
/// handling as the scalar version.
pub fn integrate_vec<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    ncomp: usize,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<(Vec<f64>, f64)> {
    let mut value = vec![0.0; ncomp];
    if a == b {
        return Ok((value, 0.0));
    }
    let tol = tol.max(1e-300);
    const MAX_DEPTH: u32 = 52;
    struct Panel {
        lo: f64,
        hi: f64,
        value: Vec<f64>,
        err: f64,
        depth: u32,
    }
    let mut scratch = vec![0.0; ncomp];
    let mut v0 = vec![0.0; ncomp];
    let e0 = gk15_vec(&mut f, a, b, &mut v0, &mut scratch);
    let mut panels = 1usize;
    let mut active: Vec<Panel> = vec![Panel {
        lo: a,
        hi: b,
        value: v0,
        err: e0,
        depth: 0,
    }];
    let mut done = vec![0.0; ncomp];
    let mut done_err = 0.0;
    let mut active_err = e0;
    while active_err + done_err > tol {
        let worst = match active
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.partial_cmp(&y.1.err).unwrap())
        {
            Some((i, _)) => i,
            None => break,
        };
        let p = active.swap_remove(worst);
        active_err -= p.err;
        if p.depth >= MAX_DEPTH {
            for (d, v) in done.iter_mut().zip(&p.value) {
                *d += v;
            }
            done_err += p.err;
            continue;
        }
        let mid = 0.5 * (p.lo + p.hi);
        let mut vl = vec![0.0; ncomp];
        let el = gk15_vec(&mut f, p.lo, mid, &mut vl, &mut scratch);
        let mut vr = vec![0.0; ncomp];
        let er = gk15_vec(&mut f, mid, p.hi, &mut vr, &mut scratch);
        panels += 2;
        if panels > 100_000 {
            return Err(Error::Quadrature {
                context: "integrate_vec",
                reason: "panel budget exhausted".into(),
            });
        }
        if el + er >= 0.9 * p.err {
            for i in 0..ncomp {
                done[i] += vl[i] + vr[i];
            }
            done_err += el + er;
        } else {
            active_err += el + er;
            active.push(Panel {
                lo: p.lo,
                hi: mid,
                value: vl,
                err: el,
                depth: p.depth + 1,
            });
            active.push(Panel {
                lo: mid,
                hi: p.hi,
                value: vr,
                err: er,
                depth: p.depth + 1,
            });
        }
    }
    for p in &active {
        for (v, x) in value.iter_mut().zip(&p.value) {
            *v += x;
        }
    }
    for (v, d) in value.iter_mut().zip(&done) {
        *v += d;
    }
    let err = active_err + done_err;
    if value.iter().any(|v| !v.is_finite()) {
        return Err(Error::Quadrature {
            context: "integrate_vec",
            reason: "non-finite integral value".into(),
        });
    }
    Ok((value, err))
}

/// Vector integral of `f` over [a, b] with a power singularity at the lower
/// endpoint; geometric grading with leading-term extrapolation, component
/// error as the max.
pub fn integrate_vec_singular_lower<F: FnMut(f64, &mut [f64])>(
    f: F,
    ncomp: usize,
    a: f64,
    b: f64,
    beta: f64,
    tol: f64,
) -> Result<(Vec<f64>, f64)> {
    graded_vec(f, ncomp, a, b, beta, tol, false)
}

/// Vector integral with a power singularity at the upper endpoint.
pub fn integrate_vec_singular_upper<F: FnMut(f64, &mut [f64])>(
    f: F,
    ncomp: usize,
    a: f64,
    b: f64,
    beta: f64,
    tol: f64,
) -> Result<(Vec<f64>, f64)> {
    graded_vec(f, ncomp, a, b, beta, tol, true)
}

fn graded_vec<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    ncomp: usize,
    a: f64,
    b: f64,
    beta: f64,
    tol: f64,
    toward_upper: bool,
) -> Result<(Vec<f64>, f64)> {
    if beta <= -1.0 {
        return Err(Error::DivergentSingularity {
            reason: format!("endpoint exponent {beta} <= -1"),
        });
    }
    let width = b - a;
    let mut value = vec![0.0; ncomp];
    if width <= 0.0 {
        return Ok((value, 0.0));
    }
    let panel_tol = tol / (GRADE_LEVELS as f64 + 8.0);
    let mut err = 0.0;
    let mut last = vec![0.0; ncomp];
    let mut k = 0usize;
    let ratio = (0.5f64).powf(beta + 1.0);
    while k < GRADE_LEVELS {
        let hi_off = width * (0.5f64).powi(k as i32);
        let lo_off = 0.5 * hi_off;
        let (lo, hi) = if toward_upper {
            (b - hi_off, b - lo_off)
        } else {
            (a + lo_off, a + hi_off)
        };
        if lo >= hi || hi - lo < 8.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            break;
        }
        let (v, e) = integrate_vec(&mut f, ncomp, lo, hi, panel_tol)?;
        for (acc, x) in value.iter_mut().zip(&v) {
            *acc += x;
        }
        err += e;
        last = v;
        k += 1;
        let last_mag = last.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if k >= 8 && last_mag * ratio / (1.0 - ratio) < 0.1 * tol {
            break;
        }
    }
    let scale = ratio / (1.0 - ratio);
    let mut rem_mag = 0.0f64;
    for (acc, l) in value.iter_mut().zip(&last) {
        *acc += l * scale;
        rem_mag = rem_mag.max((l * scale).abs());
    }
    err += rem_mag * (0.5f64).powi(k.min(52) as i32) + 1e-18 * rem_mag;
    if value.iter().any(|v| !v.is_finite()) {
        return Err(Error::Quadrature {
            context: "integrate_vec_singular",
            reason: "non-finite integral value".into(),
        });
    }
    Ok((value, err))
}

/// Vector integral over [a, b] graded at both endpoints.
pub fn integrate_vec_singular_both<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    ncomp: usize,
    a: f64,
    b: f64,
    beta_lower: f64,
    beta_upper: f64,
    tol: f64,
) -> Result<(Vec<f64>, f64)> {
    let mid = 0.5 * (a + b);
    let (mut lo, e1) = graded_vec(&mut f, ncomp, a, mid, beta_lower, 0.5 * tol, false)?;
    let (hi, e2) = graded_vec(&mut f, ncomp, mid, b, beta_upper, 0.5 * tol, true)?;
    for (l, h) in lo.iter_mut().zip(&hi) {
        *l += h;
    }
    Ok((lo, e1 + e2))
}
