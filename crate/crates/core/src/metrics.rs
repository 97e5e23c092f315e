//! The p-variation distance machinery: weighted dyadic norms D_{j,p}, a
//! dynamic-programming lower bound for d_p over dyadic partitions, and the
//! max-of-products combiner that controls d_p from the D's.
//!
//! D_{j,p}(X,Y) = (sum_n n^gamma sum_l |X^j - Y^j|^{p/j})^{j/p} over dyadic
//! levels n; the level sum is truncated at min(max available depth, n_max)
//! and the dropped tail is reported as a geometric-extrapolation bound, not
//! silently ignored. Tensor norms are Frobenius at every level.

use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicRoughPath;
use crate::error::{Error, Result};
use crate::tensor::TruncatedTensor;

/// Parameters of the metric computations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    pub p: f64,
    pub gamma: f64,
    /// truncation depth of the dyadic level sum
    pub n_max: usize,
    /// max dyadic depth for the d_p partition supremum
    pub partition_depth: usize,
}

impl MetricParams {
    pub fn new(p: f64, gamma: f64) -> Result<Self> {
        if !(3.0 < p && p < 4.0) {
            return Err(Error::InvalidParameter {
                name: "p",
                reason: format!("p = {p} must lie in (3, 4)"),
            });
        }
        if gamma <= p - 1.0 {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("gamma = {gamma} must exceed p - 1 = {}", p - 1.0),
            });
        }
        Ok(Self {
            p,
            gamma,
            n_max: 16,
            partition_depth: 6,
        })
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max;
        self
    }

    pub fn with_partition_depth(mut self, depth: usize) -> Self {
        self.partition_depth = depth;
        self
    }
}

/// One D_{j,p} evaluation, serializable for reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub j: usize,
    pub p: f64,
    pub gamma: f64,
    pub n_max: usize,
    pub value: f64,
    /// estimated increase of `value` if the truncated levels were included;
    /// infinite when the level sums are not yet decaying
    pub tail_bound: f64,
}

fn check_compatible(x: &DyadicRoughPath, y: &DyadicRoughPath) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: y.dim(),
        });
    }
    Ok(())
}

/// Per-level inner sums sum_l |X^j - Y^j|^{p/j} for j = 1, 2, 3 at once.
///
/// A path shallower than the level in play contributes the affine
/// sub-segment increment of its leaf, constant across the sub-cells of that
/// leaf, so it is rebuilt only when the leaf changes.
fn level_sums(
    x: &DyadicRoughPath,
    y: Option<&DyadicRoughPath>,
    params: &MetricParams,
) -> Result<Vec<[f64; 3]>> {
    let max_depth = y.map_or(x.depth(), |y| x.depth().max(y.depth()));
    let n_top = max_depth.min(params.n_max);
    let p = params.p;
    let mut out = Vec::with_capacity(n_top);
    for n in 1..=n_top {
        let mut acc = [0.0f64; 3];
        let mut sub_x: Option<(usize, TruncatedTensor)> = None;
        let mut sub_y: Option<(usize, TruncatedTensor)> = None;
        for l in 0..(1usize << n) {
            let xt = cached_increment(x, n, l, &mut sub_x)?;
            let norms = match y {
                Some(y) => {
                    let yt = cached_increment(y, n, l, &mut sub_y)?;
                    xt.diff_level_norms(yt)
                }
                None => xt.level_norms(),
            };
            for (j, a) in acc.iter_mut().enumerate() {
                if norms[j] > 0.0 {
                    *a += norms[j].powf(p / (j + 1) as f64);
                }
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// Tree node when the level is stored; otherwise the per-leaf sub-segment
/// increment, memoized in `cache` keyed by the leaf index.
fn cached_increment<'a>(
    path: &'a DyadicRoughPath,
    n: usize,
    l: usize,
    cache: &'a mut Option<(usize, TruncatedTensor)>,
) -> Result<&'a TruncatedTensor> {
    if let Some(t) = path.increment_ref(n, l) {
        return Ok(t);
    }
    let leaf = l >> (n - path.depth());
    let refresh = match cache {
        Some((k, _)) => *k != leaf,
        None => true,
    };
    if refresh {
        *cache = Some((leaf, path.subsegment_increment(n, l)?));
    }
    Ok(&cache.as_ref().unwrap().1)
}

fn assemble(level_sums: &[[f64; 3]], j: usize, params: &MetricParams) -> MetricReport {
    let p = params.p;
    let gamma = params.gamma;
    let jf = j as f64;
    let mut total = 0.0;
    let mut last = 0.0;
    let mut prev = 0.0;
    for (idx, sums) in level_sums.iter().enumerate() {
        let n = (idx + 1) as f64;
        let term = n.powf(gamma) * sums[j - 1];
        prev = last;
        last = term;
        total += term;
    }
    let value = total.powf(jf / p);
    // geometric tail extrapolation from the last two weighted terms
    let n_top = level_sums.len();
    let tail_sum = if last == 0.0 {
        0.0
    } else if prev <= 0.0 || last >= prev {
        f64::INFINITY
    } else {
        // weighted term at level N+k estimated as last * rho^k * ((N+k)/N)^gamma
        let rho = last / prev;
        let mut tail = 0.0;
        for k in 1..=4000usize {
            let n = (n_top + k) as f64;
            let t = last * rho.powi(k as i32) * (n / n_top as f64).powf(gamma);
            tail += t;
            if t < 1e-18 * (total + tail) {
                break;
            }
        }
        tail
    };
    let tail_bound = if tail_sum.is_infinite() {
        f64::INFINITY
    } else {
        (total + tail_sum).powf(jf / p) - value
    };
    MetricReport {
        j,
        p,
        gamma,
        n_max: n_top,
        value,
        tail_bound,
    }
}

/// D_{j,p}(X, Y).
pub fn d_jp(
    x: &DyadicRoughPath,
    y: &DyadicRoughPath,
    j: usize,
    params: &MetricParams,
) -> Result<MetricReport> {
    check_compatible(x, y)?;
    check_level(j)?;
    let sums = level_sums(x, Some(y), params)?;
    Ok(assemble(&sums, j, params))
}

/// D_{j,p}(X) = D_{j,p}(X, 0).
pub fn d_jp_norm(x: &DyadicRoughPath, j: usize, params: &MetricParams) -> Result<MetricReport> {
    check_level(j)?;
    let sums = level_sums(x, None, params)?;
    Ok(assemble(&sums, j, params))
}

/// All three D_{j,p}(X, Y) sharing one pass over the levels.
pub fn d_jp_all(
    x: &DyadicRoughPath,
    y: &DyadicRoughPath,
    params: &MetricParams,
) -> Result<[MetricReport; 3]> {
    check_compatible(x, y)?;
    let sums = level_sums(x, Some(y), params)?;
    Ok([
        assemble(&sums, 1, params),
        assemble(&sums, 2, params),
        assemble(&sums, 3, params),
    ])
}

/// All three D_{j,p}(X) sharing one pass.
pub fn d_jp_norm_all(x: &DyadicRoughPath, params: &MetricParams) -> Result<[MetricReport; 3]> {
    let sums = level_sums(x, None, params)?;
    Ok([
        assemble(&sums, 1, params),
        assemble(&sums, 2, params),
        assemble(&sums, 3, params),
    ])
}

fn check_level(j: usize) -> Result<()> {
    if (1..=3).contains(&j) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "j",
            reason: format!("level j = {j} must be 1, 2 or 3"),
        })
    }
}

/// Lower bound on d_p(X, Y): the partition supremum restricted to
/// partitions with points on the depth-`partition_depth` dyadic grid,
/// evaluated exactly by dynamic programming per level, then max over j.
pub fn d_p_dyadic(
    x: &DyadicRoughPath,
    y: &DyadicRoughPath,
    params: &MetricParams,
) -> Result<f64> {
    check_compatible(x, y)?;
    let depth = params.partition_depth as u32;
    let n = 1usize << depth;
    let p = params.p;
    let mut best = 0.0f64;
    for j in 1..=3usize {
        // cum[v] = max over partitions of [0, v] of the level-j power sum
        let mut cum = vec![0.0f64; n + 1];
        for v in 1..=n {
            let mut m = 0.0f64;
            for u in 0..v {
                let inc = x
                    .increment_range(u as u64, v as u64, depth)?
                    .sub(&y.increment_range(u as u64, v as u64, depth)?)?;
                let nrm = inc.level_norm(j);
                let cand = cum[u]
                    + if nrm > 0.0 {
                        nrm.powf(p / j as f64)
                    } else {
                        0.0
                    };
                if cand > m {
                    m = cand;
                }
            }
            cum[v] = m;
        }
        best = best.max(cum[n].powf(j as f64 / p));
    }
    Ok(best)
}

/// The max-of-products term M built from D_{j,p} values so that
/// d_p(X, Y) <= C M with an absolute constant C (reported separately as
/// unknown). The seven products follow the combiner inequality shape.
pub fn dp_upper_bound(
    x: &DyadicRoughPath,
    y: &DyadicRoughPath,
    params: &MetricParams,
) -> Result<f64> {
    let pair = d_jp_all(x, y, params)?;
    let dx = d_jp_norm_all(x, params)?;
    let dy = d_jp_norm_all(y, params)?;
    Ok(dp_upper_bound_from_parts(
        [pair[0].value, pair[1].value, pair[2].value],
        [dx[0].value, dx[1].value],
        [dy[0].value, dy[1].value],
    ))
}

/// The combiner evaluated from precomputed D values:
/// pair = [D1(X,Y), D2(X,Y), D3(X,Y)], x_norms = [D1(X), D2(X)],
/// y_norms = [D1(Y), D2(Y)].
pub fn dp_upper_bound_from_parts(pair: [f64; 3], x_norms: [f64; 2], y_norms: [f64; 2]) -> f64 {
    let [d1, d2, d3] = pair;
    let (d1x, d2x) = (x_norms[0], x_norms[1]);
    let (d1y, d2y) = (y_norms[0], y_norms[1]);
    let terms = [
        d1,
        d1 * (d1x + d1y),
        d2,
        d2 * (d1x + d1y),
        d1 * (d2x + d2y),
        d1 * (d1x * d1x + d1y * d1y),
        d3,
    ];
    terms.into_iter().fold(0.0, f64::max)
}

/// Zero rough path of matching shape, for D_{j,p}(X) style comparisons in
/// callers that want an explicit second argument.
pub fn zero_path(dim: usize, depth: usize) -> DyadicRoughPath {
    let leaves = vec![TruncatedTensor::identity(dim); 1 << depth];
    DyadicRoughPath::from_leaf_signatures(leaves, depth, dim).expect("zero path")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mp() -> MetricParams {
        MetricParams::new(3.2, 2.25).unwrap()
    }

    fn random_path(depth: usize, dim: usize, seed: u64) -> DyadicRoughPath {
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let n = 1 << depth;
        let mut pts = vec![vec![0.0; dim]];
        for _ in 0..n {
            let prev = pts.last().unwrap().clone();
            pts.push((0..dim).map(|i| prev[i] + next()).collect());
        }
        DyadicRoughPath::from_points(&pts, depth).unwrap()
    }

    #[test]
    fn params_validated() {
        assert!(MetricParams::new(2.0, 3.0).is_err());
        assert!(MetricParams::new(3.5, 2.0).is_err());
        assert!(MetricParams::new(3.5, 2.8).is_ok());
    }

    #[test]
    fn identical_paths_have_zero_distance() {
        let x = random_path(4, 2, 1);
        for j in 1..=3 {
            let r = d_jp(&x, &x, j, &mp()).unwrap();
            assert_eq!(r.value, 0.0);
            assert_eq!(r.tail_bound, 0.0);
        }
        assert_eq!(d_p_dyadic(&x, &x, &mp()).unwrap(), 0.0);
        assert_eq!(dp_upper_bound(&x, &x, &mp()).unwrap(), 0.0);
    }

    #[test]
    fn single_level_norm_is_explicit() {
        // depth-1 path, d=1, increments a and b, against zero:
        // D_{1,p} truncated at level 1 = (1^gamma (|a|^p + |b|^p))^{1/p}
        let pts = vec![vec![0.0], vec![0.7], vec![0.2]];
        let x = DyadicRoughPath::from_points(&pts, 1).unwrap();
        let params = mp().with_n_max(1);
        let r = d_jp_norm(&x, 1, &params).unwrap();
        let expect = (0.7f64.powf(3.2) + 0.5f64.powf(3.2)).powf(1.0 / 3.2);
        assert!((r.value - expect).abs() < 1e-12);
    }

    #[test]
    fn symmetry_and_positivity() {
        let x = random_path(4, 2, 2);
        let y = random_path(4, 2, 3);
        for j in 1..=3 {
            let a = d_jp(&x, &y, j, &mp()).unwrap().value;
            let b = d_jp(&y, &x, j, &mp()).unwrap().value;
            assert!(a > 0.0);
            assert!((a - b).abs() <= 1e-12 * a);
        }
        let ub_xy = dp_upper_bound(&x, &y, &mp()).unwrap();
        let ub_yx = dp_upper_bound(&y, &x, &mp()).unwrap();
        assert!((ub_xy - ub_yx).abs() <= 1e-12 * ub_xy);
    }

    #[test]
    fn monotone_in_truncation_depth() {
        let x = random_path(5, 2, 4);
        let y = random_path(5, 2, 5);
        let mut prev = 0.0;
        for n_max in 1..=8 {
            let params = mp().with_n_max(n_max);
            let v = d_jp(&x, &y, 1, &params).unwrap().value;
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn dilation_homogeneity_against_recomputation() {
        let x = random_path(4, 2, 6);
        let y = random_path(4, 2, 7);
        let eps = 0.37;
        let xs = x.dilate(eps);
        let ys = y.dilate(eps);
        for j in 1..=3usize {
            let base = d_jp(&x, &y, j, &mp()).unwrap().value;
            let scaled = d_jp(&xs, &ys, j, &mp()).unwrap().value;
            let factor = eps.powi(j as i32);
            assert!(
                (scaled - factor * base).abs() <= 1e-10 * scaled.max(1e-30),
                "j={j}: {scaled} vs {}",
                factor * base
            );
        }
    }

    #[test]
    fn dp_lower_bound_single_interval_for_monotone_path() {
        // monotone d=1 increments sharing a sign: the j=1 supremum is the
        // single-interval partition, |X^1_{0,1}|
        let pts: Vec<Vec<f64>> = (0..=16)
            .map(|l| vec![(l as f64 / 16.0).powi(2)])
            .collect();
        let x = DyadicRoughPath::from_points(&pts, 4).unwrap();
        let z = zero_path(1, 4);
        let params = mp().with_partition_depth(4);
        let d = d_p_dyadic(&x, &z, &params).unwrap();
        // reference DP over all dyadic partitions handled inside; compare
        // against the total increment
        let total = x.total().level1()[0].abs();
        // j=2,3 values of a 1-d path are powers of the level-1 increment and
        // stay below; allow tiny slack
        assert!((d - total).abs() <= 1e-9, "{d} vs {total}");
    }

    #[test]
    fn dp_lower_bound_monotone_in_partition_depth() {
        let x = random_path(4, 2, 8);
        let y = random_path(4, 2, 9);
        let mut prev = 0.0;
        for depth in 1..=5 {
            let params = mp().with_partition_depth(depth);
            let v = d_p_dyadic(&x, &y, &params).unwrap();
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn triangle_inequality_spot_checks() {
        let params = mp().with_partition_depth(4);
        for seed in 0..6 {
            let x = random_path(4, 2, 30 + seed);
            let y = random_path(4, 2, 40 + seed);
            let z = random_path(4, 2, 50 + seed);
            let xy = d_p_dyadic(&x, &y, &params).unwrap();
            let yz = d_p_dyadic(&y, &z, &params).unwrap();
            let xz = d_p_dyadic(&x, &z, &params).unwrap();
            assert!(xz <= xy + yz + 1e-9, "{xz} > {xy} + {yz}");
        }
    }

    #[test]
    fn upper_bound_shape_dominates_lower_bound_empirically() {
        // one global constant across a corpus of random pairs
        let params = mp().with_partition_depth(3);
        let mut worst = 0.0f64;
        for seed in 0..40 {
            let x = random_path(3, 2, 100 + seed);
            let y = random_path(3, 2, 200 + seed);
            let lo = d_p_dyadic(&x, &y, &params).unwrap();
            let hi = dp_upper_bound(&x, &y, &params).unwrap();
            assert!(hi > 0.0);
            worst = worst.max(lo / hi);
        }
        // the combiner bound holds with some constant C; check the measured
        // ratio is uniformly bounded (value recorded by the assertion)
        assert!(worst < 50.0, "empirical C = {worst}");
    }

    #[test]
    fn tail_bound_reported_for_decaying_levels() {
        let x = random_path(6, 1, 77);
        let params = mp().with_n_max(6);
        let r = d_jp_norm(&x, 1, &params).unwrap();
        assert!(r.value > 0.0);
        assert!(r.tail_bound.is_finite() || r.tail_bound.is_infinite());
        // serialization shape
        let js = serde_json::to_string(&r).unwrap();
        assert!(js.contains("tail_bound"));
    }
}
