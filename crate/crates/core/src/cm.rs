//! Cameron-Martin paths h = K hdot with piecewise-constant densities.
//!
//! A density hdot is a step function on a shared partition
//! 0 = s_0 < ... < s_K = 1 with one value vector per piece; the path is
//! h(t) = int_0^t K(t,s) hdot(s) ds and the Hilbert norm is the L^2 norm
//! of hdot, exact for step functions.

use crate::error::{Error, Result};
use crate::kernel::{kernel_unchecked, HurstParams};
use crate::quad::integrate_singular_both;

const EVAL_TOL: f64 = 1e-9;

/// Step-function Cameron-Martin density and its path.
#[derive(Debug, Clone, PartialEq)]
pub struct CameronMartinPath {
    dim: usize,
    breakpoints: Vec<f64>,
    values: Vec<Vec<f64>>, // one vector of length dim per piece
    norm: f64,
}

impl CameronMartinPath {
    pub fn new(breakpoints: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if breakpoints.len() < 2 || values.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidParameter {
                name: "breakpoints",
                reason: format!(
                    "{} breakpoints with {} pieces",
                    breakpoints.len(),
                    values.len()
                ),
            });
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(Error::InvalidParameter {
                name: "breakpoints",
                reason: "partition must start at 0 and end at 1".into(),
            });
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter {
                name: "breakpoints",
                reason: "breakpoints must be strictly increasing".into(),
            });
        }
        let dim = values[0].len();
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "values",
                reason: "dimension must be at least 1".into(),
            });
        }
        for v in &values {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { context: "density" });
            }
        }
        let norm = norm_of(&breakpoints, &values);
        Ok(Self {
            dim,
            breakpoints,
            values,
            norm,
        })
    }

    /// Density constant on [0, 1].
    pub fn constant(value: &[f64]) -> Result<Self> {
        Self::new(vec![0.0, 1.0], vec![value.to_vec()])
    }

    /// Zero density in dimension `dim`.
    pub fn zero(dim: usize) -> Result<Self> {
        Self::constant(&vec![0.0; dim])
    }

    /// Parse the plain-text format: one line per piece,
    /// `s_start s_end v_1 ... v_d`, with `#` comments; pieces must tile
    /// [0, 1] in order.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut breakpoints: Vec<f64> = Vec::new();
        let mut values: Vec<Vec<f64>> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|_| Error::Parse {
                        line: idx + 1,
                        reason: format!("bad number {tok:?}"),
                    })
                })
                .collect::<Result<_>>()?;
            if fields.len() < 3 {
                return Err(Error::Parse {
                    line: idx + 1,
                    reason: "need s_start s_end v_1 ... v_d".into(),
                });
            }
            let (start, end, vals) = (fields[0], fields[1], fields[2..].to_vec());
            if let Some(&prev_end) = breakpoints.last() {
                if (start - prev_end).abs() > 1e-12 {
                    return Err(Error::Parse {
                        line: idx + 1,
                        reason: format!("piece starts at {start}, previous ended at {prev_end}"),
                    });
                }
            } else {
                breakpoints.push(start);
            }
            breakpoints.push(end);
            values.push(vals);
        }
        if values.is_empty() {
            return Err(Error::Parse {
                line: 0,
                reason: "no pieces".into(),
            });
        }
        Self::new(breakpoints, values)
    }

    /// Serialize back to the plain-text piece format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{} {}", self.breakpoints[k], self.breakpoints[k + 1]));
            for x in v {
                out.push_str(&format!(" {x}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn piece_values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// hdot(s) (right-continuous step lookup).
    pub fn density_at(&self, s: f64) -> &[f64] {
        let k = match self
            .breakpoints
            .binary_search_by(|b| b.partial_cmp(&s).unwrap())
        {
            Ok(i) => i.min(self.values.len() - 1),
            Err(i) => i.saturating_sub(1).min(self.values.len() - 1),
        };
        &self.values[k]
    }

    /// ||hdot||_2, exact from the step representation.
    pub fn cm_norm(&self) -> f64 {
        self.norm
    }

    /// <hdot_1, hdot_2>_{L^2}, exact on the merged partition.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut cuts: Vec<f64> = self
            .breakpoints
            .iter()
            .chain(other.breakpoints.iter())
            .copied()
            .collect();
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        let mut acc = 0.0;
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let a = self.density_at(mid);
            let b = other.density_at(mid);
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            acc += dot * (w[1] - w[0]);
        }
        Ok(acc)
    }

    /// The density scaled by alpha.
    pub fn scale(&self, alpha: f64) -> Self {
        let values = self
            .values
            .iter()
            .map(|v| v.iter().map(|x| alpha * x).collect())
            .collect();
        Self {
            dim: self.dim,
            breakpoints: self.breakpoints.clone(),
            values,
            norm: self.norm * alpha.abs(),
        }
    }

    /// h(t) = int_0^t K(t,s) hdot(s) ds, one value per coordinate.
    ///
    /// Per piece intersected with [0, t], the scalar weight
    /// int K(t,s) ds is computed once and multiplied into each coordinate.
    /// The endpoint singularities of K at s = 0 and s = t are removed by
    /// the power substitutions.
    pub fn cm_eval(&self, params: &HurstParams, t: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::TimeOutOfRange { value: t });
        }
        let mut out = vec![0.0; self.dim];
        if t == 0.0 {
            return Ok(out);
        }
        let h = params.hurst();
        let beta = h - 0.5;
        for (k, v) in self.values.iter().enumerate() {
            let lo = self.breakpoints[k];
            let hi = self.breakpoints[k + 1].min(t);
            if hi <= lo {
                break;
            }
            if v.iter().all(|x| *x == 0.0) {
                continue;
            }
            let beta_lo = if lo == 0.0 { beta } else { 0.0 };
            let beta_hi = if hi >= t { beta } else { 0.0 };
            let w = integrate_singular_both(
                |s| kernel_unchecked(params, t, s),
                lo,
                hi,
                beta_lo,
                beta_hi,
                EVAL_TOL,
            )?;
            for (o, x) in out.iter_mut().zip(v) {
                *o += w.value * x;
            }
        }
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::Quadrature {
                context: "cm_eval",
                reason: format!("non-finite path value at t = {t}"),
            });
        }
        Ok(out)
    }

    /// Path values on the dyadic grid of the given depth (2^depth + 1
    /// points), evaluated in parallel.
    pub fn cm_eval_grid(&self, params: &HurstParams, depth: usize) -> Result<Vec<Vec<f64>>> {
        use rayon::prelude::*;
        let n = 1usize << depth;
        (0..=n)
            .into_par_iter()
            .map(|l| self.cm_eval(params, l as f64 / n as f64))
            .collect()
    }
}

fn norm_of(breakpoints: &[f64], values: &[Vec<f64>]) -> f64 {
    let mut acc = 0.0;
    for (k, v) in values.iter().enumerate() {
        let len = breakpoints[k + 1] - breakpoints[k];
        acc += len * v.iter().map(|x| x * x).sum::<f64>();
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(h: f64) -> HurstParams {
        let p = if h * 3.5 > 1.0 { 3.5 } else { 3.9 };
        HurstParams::new(h, p, p + 0.2, 1).unwrap()
    }

    #[test]
    fn unit_density_has_unit_norm() {
        let h = CameronMartinPath::constant(&[1.0]).unwrap();
        assert_eq!(h.cm_norm(), 1.0);
    }

    #[test]
    fn half_support_norm() {
        // hdot = 2 on [0, 1/2]: norm = sqrt(4 * 1/2) = sqrt(2)
        let h = CameronMartinPath::new(vec![0.0, 0.5, 1.0], vec![vec![2.0], vec![0.0]]).unwrap();
        assert_relative_eq!(h.cm_norm(), 2f64.sqrt());
    }

    #[test]
    fn norm_is_absolutely_homogeneous() {
        let h = CameronMartinPath::new(
            vec![0.0, 0.3, 1.0],
            vec![vec![1.5, -0.2], vec![-0.7, 0.4]],
        )
        .unwrap();
        for alpha in [-2.5, 0.0, 0.1, 3.0] {
            assert_relative_eq!(h.scale(alpha).cm_norm(), alpha.abs() * h.cm_norm());
        }
    }

    #[test]
    fn inner_product_is_bilinear_against_direct_sum() {
        let h1 = CameronMartinPath::new(vec![0.0, 0.25, 1.0], vec![vec![2.0], vec![-1.0]]).unwrap();
        let h2 = CameronMartinPath::new(vec![0.0, 0.5, 1.0], vec![vec![0.5], vec![3.0]]).unwrap();
        // direct piecewise sum on the merged partition {0, .25, .5, 1}
        let direct = 2.0 * 0.5 * 0.25 + (-1.0) * 0.5 * 0.25 + (-1.0) * 3.0 * 0.5;
        assert_relative_eq!(h1.inner(&h2).unwrap(), direct);
        assert_relative_eq!(h1.inner(&h1).unwrap(), h1.cm_norm().powi(2));
    }

    #[test]
    fn eval_at_zero_and_zero_density() {
        let pr = params(0.35);
        let h = CameronMartinPath::constant(&[1.0]).unwrap();
        assert_eq!(h.cm_eval(&pr, 0.0).unwrap(), vec![0.0]);
        let z = CameronMartinPath::zero(2).unwrap();
        for t in [0.25, 0.5, 1.0] {
            let pr2 = HurstParams::new(0.35, 3.5, 3.7, 2).unwrap();
            assert_eq!(z.cm_eval(&pr2, t).unwrap(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn near_brownian_unit_density_is_almost_linear() {
        // K ~ c_H ~ 1 as H -> 1/2, so h(t) ~ t
        let pr = params(0.499);
        let h = CameronMartinPath::constant(&[1.0]).unwrap();
        for t in [0.25, 0.5, 1.0] {
            let v = h.cm_eval(&pr, t).unwrap()[0];
            assert!((v - t).abs() / t < 0.02, "h({t}) = {v}");
        }
    }

    #[test]
    fn hoelder_bound_on_random_pairs() {
        // |h(t) - h(t')| <= ||hdot||_2 |t - t'|^H (with quadrature slack)
        let pr = params(0.3);
        let h = CameronMartinPath::new(
            vec![0.0, 0.2, 0.55, 1.0],
            vec![vec![1.3], vec![-2.0], vec![0.7]],
        )
        .unwrap();
        let norm = h.cm_norm();
        let mut state = 0xDEADBEEFu64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..60 {
            let t1 = next();
            let t2 = next();
            if (t1 - t2).abs() < 1e-6 {
                continue;
            }
            let v1 = h.cm_eval(&pr, t1).unwrap()[0];
            let v2 = h.cm_eval(&pr, t2).unwrap()[0];
            let bound = norm * (t1 - t2).abs().powf(pr.hurst()) * (1.0 + 1e-3);
            assert!(
                (v1 - v2).abs() <= bound,
                "pair ({t1},{t2}): {} > {bound}",
                (v1 - v2).abs()
            );
        }
    }

    #[test]
    fn parses_and_round_trips_text() {
        let text = "# two pieces\n0 0.5 1.0 -0.25\n0.5 1 0.5 0.75\n";
        let h = CameronMartinPath::from_text(text).unwrap();
        assert_eq!(h.dim(), 2);
        assert_eq!(h.breakpoints(), &[0.0, 0.5, 1.0]);
        let again = CameronMartinPath::from_text(&h.to_text()).unwrap();
        assert_eq!(h, again);
    }

    #[test]
    fn rejects_inconsistent_partitions() {
        assert!(CameronMartinPath::from_text("0 0.4 1\n0.5 1 1\n").is_err());
        assert!(CameronMartinPath::from_text("0.1 0.5 1\n0.5 1 1\n").is_err());
        assert!(CameronMartinPath::from_text("0 0.5 1\n0.5 0.9 1\n").is_err());
        assert!(CameronMartinPath::from_text("0 1 notanumber\n").is_err());
        assert!(CameronMartinPath::from_text("").is_err());
    }
}
