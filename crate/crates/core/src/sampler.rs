//! Exact Gaussian sampling of d-dimensional fBm on dyadic grids.
//!
//! The reference backend factorizes the full grid covariance (Cholesky,
//! exact law). Coordinates are sampled independently; the RNG is a
//! counter-based generator (ChaCha12) with an explicit (seed, path index)
//! stream so every draw is reproducible. Coupling across depths is done by
//! coarsening one fine sample, never by resampling.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernel::covariance_h;

/// Largest supported depth for the dense Cholesky backend; the factor is
/// (2^m)^2 / 2 doubles.
pub const MAX_CHOLESKY_DEPTH: usize = 14;

/// One sampled fBm path on the dyadic grid of `depth`, with seed
/// provenance. `values[0] = 0`.
#[derive(Debug, Clone)]
pub struct FbmSamplePath {
    pub depth: usize,
    pub dim: usize,
    pub hurst: f64,
    pub seed: u64,
    pub path_index: u64,
    /// (2^depth + 1) rows of `dim` coordinates.
    pub values: Vec<Vec<f64>>,
}

impl FbmSamplePath {
    /// Keep every 2^(depth - target)-th value; provenance is preserved.
    pub fn coarsen(&self, target: usize) -> Result<FbmSamplePath> {
        if target > self.depth {
            return Err(Error::IncompatibleDepths {
                reason: format!("cannot coarsen depth {} to {}", self.depth, target),
            });
        }
        let step = 1usize << (self.depth - target);
        Ok(FbmSamplePath {
            depth: target,
            dim: self.dim,
            hurst: self.hurst,
            seed: self.seed,
            path_index: self.path_index,
            values: self.values.iter().step_by(step).cloned().collect(),
        })
    }

    /// Linear interpolation W(m) of the grid values.
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        InterpolatedPath::new(&self.values, self.depth).eval(t)
    }

    /// CSV export: `t,x_1..x_d` with `#` header comments recording the
    /// sampling parameters.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "# fbm sample path")?;
        writeln!(out, "# hurst = {}", self.hurst)?;
        writeln!(out, "# depth = {}", self.depth)?;
        writeln!(out, "# seed = {}", self.seed)?;
        writeln!(out, "# path_index = {}", self.path_index)?;
        write!(out, "t")?;
        for i in 1..=self.dim {
            write!(out, ",x_{i}")?;
        }
        writeln!(out)?;
        let n = (1usize << self.depth) as f64;
        for (l, row) in self.values.iter().enumerate() {
            write!(out, "{}", l as f64 / n)?;
            for x in row {
                write!(out, ",{x}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Affine interpolation over a dyadic grid of values (eq-style
/// W(m)_t = W_{t_{l-1}} + 2^m (t - t_{l-1}) Delta_l).
#[derive(Debug, Clone, Copy)]
pub struct InterpolatedPath<'a> {
    values: &'a [Vec<f64>],
    depth: usize,
}

impl<'a> InterpolatedPath<'a> {
    pub fn new(values: &'a [Vec<f64>], depth: usize) -> Self {
        debug_assert_eq!(values.len(), (1 << depth) + 1);
        Self { values, depth }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let n = 1usize << self.depth;
        let x = (t.clamp(0.0, 1.0)) * n as f64;
        let l = (x.floor() as usize).min(n - 1);
        let frac = x - l as f64;
        self.values[l]
            .iter()
            .zip(&self.values[l + 1])
            .map(|(a, b)| a + frac * (b - a))
            .collect()
    }
}

/// Exact-law sampler: Cholesky factor of the grid covariance, computed once
/// and shared read-only across draws.
pub struct CholeskySampler {
    hurst: f64,
    dim: usize,
    depth: usize,
    n: usize,
    /// packed lower triangle, row-major: L[i][j] at i(i+1)/2 + j
    factor: Vec<f64>,
}

impl CholeskySampler {
    pub fn new(hurst: f64, dim: usize, depth: usize) -> Result<Self> {
        if !(0.25 < hurst && hurst < 0.5) {
            return Err(Error::InvalidParameter {
                name: "hurst",
                reason: format!("H = {hurst} must lie in (1/4, 1/2)"),
            });
        }
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                reason: "dimension must be at least 1".into(),
            });
        }
        if depth > MAX_CHOLESKY_DEPTH {
            return Err(Error::DepthTooLarge {
                depth,
                limit: MAX_CHOLESKY_DEPTH,
            });
        }
        let n = 1usize << depth;
        let mut a = vec![0.0f64; n * (n + 1) / 2];
        for i in 0..n {
            let ti = (i + 1) as f64 / n as f64;
            let row = i * (i + 1) / 2;
            for j in 0..=i {
                let tj = (j + 1) as f64 / n as f64;
                a[row + j] = covariance_h(hurst, ti, tj);
            }
        }
        packed_cholesky_in_place(&mut a, n)?;
        Ok(Self {
            hurst,
            dim,
            depth,
            n,
            factor: a,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// Draw the path for (seed, path_index); deterministic per stream.
    pub fn sample(&self, seed: u64, path_index: u64) -> FbmSamplePath {
        let mut z = vec![0.0f64; self.n];
        let mut flat = vec![0.0f64; self.n * self.dim];
        self.sample_flat(seed, path_index, &mut z, &mut flat);
        let mut values = vec![vec![0.0; self.dim]; self.n + 1];
        for coord in 0..self.dim {
            for r in 0..self.n {
                values[r + 1][coord] = flat[coord * self.n + r];
            }
        }
        FbmSamplePath {
            depth: self.depth,
            dim: self.dim,
            hurst: self.hurst,
            seed,
            path_index,
            values,
        }
    }

    /// Allocation-free draw into caller buffers: `out` receives the grid
    /// values (without the leading zero) laid out coordinate-major,
    /// `out[coord * n + r]` = W^coord at t_{r+1}. `z` is scratch of length
    /// 2^depth. The stream order matches `sample`.
    pub fn sample_flat(&self, seed: u64, path_index: u64, z: &mut [f64], out: &mut [f64]) {
        assert_eq!(z.len(), self.n);
        assert_eq!(out.len(), self.n * self.dim);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(path_index);
        for coord in 0..self.dim {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(&mut rng);
            }
            for r in 0..self.n {
                let row = &self.factor[r * (r + 1) / 2..r * (r + 1) / 2 + r + 1];
                let mut acc = 0.0;
                for (lc, zc) in row.iter().zip(z.iter()) {
                    acc += lc * zc;
                }
                out[coord * self.n + r] = acc;
            }
        }
    }
}

/// In-place Cholesky of a packed lower-triangular matrix (up-looking).
fn packed_cholesky_in_place(a: &mut [f64], n: usize) -> Result<()> {
    for i in 0..n {
        let (head, tail) = a.split_at_mut(i * (i + 1) / 2);
        let row_i = &mut tail[..i + 1];
        for j in 0..i {
            let row_j = &head[j * (j + 1) / 2..j * (j + 1) / 2 + j + 1];
            let mut sum = row_i[j];
            for k in 0..j {
                sum -= row_i[k] * row_j[k];
            }
            row_i[j] = sum / row_j[j];
        }
        let mut diag = row_i[i];
        for k in 0..i {
            diag -= row_i[k] * row_i[k];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return Err(Error::CholeskyFailure {
                pivot: diag,
                index: i,
            });
        }
        row_i[i] = diag.sqrt();
    }
    Ok(())
}
