//! Truncated tensor algebra T^3(R^d).
//!
//! A rough-path increment is the tuple (1, X^1, X^2, X^3) with X^j in
//! (R^d)^{tensor j}. The scalar level is implicitly 1 and never stored.
//! The truncation level is fixed at 3, matching roughness p in (3, 4);
//! contractions are unrolled for that case.

use crate::error::{Error, Result};

/// Element (1, X^1, X^2, X^3) of the truncated tensor algebra over R^d.
///
/// Level 2 is stored row-major (`[i*d + j]`), level 3 as `[(i*d + j)*d + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedTensor {
    dim: usize,
    level1: Vec<f64>,
    level2: Vec<f64>,
    level3: Vec<f64>,
}

impl TruncatedTensor {
    /// The algebra identity (1, 0, 0, 0).
    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            level1: vec![0.0; dim],
            level2: vec![0.0; dim * dim],
            level3: vec![0.0; dim * dim * dim],
        }
    }

    pub fn from_parts(dim: usize, level1: Vec<f64>, level2: Vec<f64>, level3: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                reason: "dimension must be at least 1".into(),
            });
        }
        if level1.len() != dim || level2.len() != dim * dim || level3.len() != dim * dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: level1.len(),
            });
        }
        let t = Self {
            dim,
            level1,
            level2,
            level3,
        };
        t.check_finite()?;
        Ok(t)
    }

    /// Signature of a straight segment with increment `delta`:
    /// (1, d, d⊗d/2, d⊗d⊗d/6).
    pub fn segment_signature(delta: &[f64]) -> Result<Self> {
        let dim = delta.len();
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: "empty increment".into(),
            });
        }
        if delta.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: "segment_signature",
            });
        }
        let mut level2 = vec![0.0; dim * dim];
        let mut level3 = vec![0.0; dim * dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                level2[i * dim + j] = 0.5 * delta[i] * delta[j];
                for k in 0..dim {
                    level3[(i * dim + j) * dim + k] = delta[i] * delta[j] * delta[k] / 6.0;
                }
            }
        }
        Ok(Self {
            dim,
            level1: delta.to_vec(),
            level2,
            level3,
        })
    }

    /// Chen composition x ⊗ y:
    /// level1 = x1 + y1, level2 = x2 + y2 + x1⊗y1,
    /// level3 = x3 + y3 + x2⊗y1 + x1⊗y2.
    pub fn chen_compose(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let d = self.dim;
        let mut out = Self::identity(d);
        for i in 0..d {
            out.level1[i] = self.level1[i] + other.level1[i];
        }
        for i in 0..d {
            for j in 0..d {
                out.level2[i * d + j] =
                    self.level2[i * d + j] + other.level2[i * d + j] + self.level1[i] * other.level1[j];
            }
        }
        for i in 0..d {
            for j in 0..d {
                let x2 = self.level2[i * d + j];
                for k in 0..d {
                    out.level3[(i * d + j) * d + k] = self.level3[(i * d + j) * d + k]
                        + other.level3[(i * d + j) * d + k]
                        + x2 * other.level1[k]
                        + self.level1[i] * other.level2[j * d + k];
                }
            }
        }
        Ok(out)
    }

    /// Componentwise difference (as a tuple in the ambient vector space,
    /// not the group operation).
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        Ok(Self {
            dim: self.dim,
            level1: self
                .level1
                .iter()
                .zip(&other.level1)
                .map(|(a, b)| a - b)
                .collect(),
            level2: self
                .level2
                .iter()
                .zip(&other.level2)
                .map(|(a, b)| a - b)
                .collect(),
            level3: self
                .level3
                .iter()
                .zip(&other.level3)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// Dilation δ_ε: level j scaled by ε^j. Matches rescaling the underlying
    /// path by ε.
    pub fn dilate(&self, eps: f64) -> Self {
        let e2 = eps * eps;
        let e3 = e2 * eps;
        Self {
            dim: self.dim,
            level1: self.level1.iter().map(|x| eps * x).collect(),
            level2: self.level2.iter().map(|x| e2 * x).collect(),
            level3: self.level3.iter().map(|x| e3 * x).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level1(&self) -> &[f64] {
        &self.level1
    }

    pub fn level2(&self) -> &[f64] {
        &self.level2
    }

    pub fn level3(&self) -> &[f64] {
        &self.level3
    }

    pub fn level2_at(&self, i: usize, j: usize) -> f64 {
        self.level2[i * self.dim + j]
    }

    pub fn level3_at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.level3[(i * self.dim + j) * self.dim + k]
    }

    /// Frobenius norm of level j (j = 1, 2, 3).
    pub fn level_norm(&self, j: usize) -> f64 {
        let v = match j {
            1 => &self.level1,
            2 => &self.level2,
            3 => &self.level3,
            _ => panic!("level must be 1, 2 or 3"),
        };
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Max of the three level norms; a convenient overall magnitude.
    pub fn magnitude(&self) -> f64 {
        self.level_norm(1).max(self.level_norm(2)).max(self.level_norm(3))
    }

    /// Frobenius norms of all three levels at once.
    pub fn level_norms(&self) -> [f64; 3] {
        [
            self.level_norm(1),
            self.level_norm(2),
            self.level_norm(3),
        ]
    }

    /// Frobenius norms of the componentwise difference, without allocating.
    pub fn diff_level_norms(&self, other: &Self) -> [f64; 3] {
        debug_assert_eq!(self.dim, other.dim);
        let sq = |a: &[f64], b: &[f64]| -> f64 {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        };
        [
            sq(&self.level1, &other.level1),
            sq(&self.level2, &other.level2),
            sq(&self.level3, &other.level3),
        ]
    }

    /// Antisymmetric part of level 2: (X^2 - (X^2)^T)/2.
    pub fn level2_antisymmetric(&self) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = 0.5 * (self.level2[i * d + j] - self.level2[j * d + i]);
            }
        }
        out
    }

    fn check_finite(&self) -> Result<()> {
        let ok = self.level1.iter().all(|x| x.is_finite())
            && self.level2.iter().all(|x| x.is_finite())
            && self.level3.iter().all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::NonFinite {
                context: "TruncatedTensor",
            })
        }
    }

    /// Scaled distance: ||x - y|| relative to max(1, ||x||, ||y||), where
    /// ||.|| is the max of level Frobenius norms.
    pub fn rel_distance(&self, other: &Self) -> f64 {
        let diff = self.sub(other).expect("dimension mismatch in rel_distance");
        let scale = self.magnitude().max(other.magnitude()).max(1.0);
        diff.magnitude() / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_segment_is_identity() {
        let t = TruncatedTensor::segment_signature(&[0.0, 0.0]).unwrap();
        assert_eq!(t, TruncatedTensor::identity(2));
    }

    #[test]
    fn one_dimensional_segment_powers() {
        // delta = 2: levels are 2, 2^2/2 = 2, 2^3/6 = 4/3
        let t = TruncatedTensor::segment_signature(&[2.0]).unwrap();
        assert_relative_eq!(t.level1()[0], 2.0);
        assert_relative_eq!(t.level2()[0], 2.0);
        assert_relative_eq!(t.level3()[0], 4.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn segment_level2_is_symmetric() {
        let t = TruncatedTensor::segment_signature(&[1.0, 0.0, -0.5]).unwrap();
        let anti = t.level2_antisymmetric();
        assert!(anti.iter().all(|x| x.abs() == 0.0));
    }

    #[test]
    fn identity_is_neutral() {
        let y = TruncatedTensor::segment_signature(&[0.3, -1.2]).unwrap();
        let id = TruncatedTensor::identity(2);
        assert_eq!(id.chen_compose(&y).unwrap(), y);
        assert_eq!(y.chen_compose(&id).unwrap(), y);
    }

    #[test]
    fn one_dimensional_exponential_identity() {
        // composing two unit segments equals the signature of a single
        // segment of length 2 (collinear case)
        let s1 = TruncatedTensor::segment_signature(&[1.0]).unwrap();
        let s2 = TruncatedTensor::segment_signature(&[2.0]).unwrap();
        let c = s1.chen_compose(&s1).unwrap();
        assert!(c.rel_distance(&s2) < 1e-15);
        assert_relative_eq!(c.level1()[0], 2.0);
        assert_relative_eq!(c.level2()[0], 2.0);
        assert_relative_eq!(c.level3()[0], 4.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn cross_term_e1_then_e2() {
        // hand evaluation of the x1 ⊗ y1 term
        let e1 = TruncatedTensor::segment_signature(&[1.0, 0.0]).unwrap();
        let e2 = TruncatedTensor::segment_signature(&[0.0, 1.0]).unwrap();
        let c = e1.chen_compose(&e2).unwrap();
        assert_relative_eq!(c.level2_at(0, 0), 0.5);
        assert_relative_eq!(c.level2_at(1, 1), 0.5);
        assert_relative_eq!(c.level2_at(0, 1), 1.0);
        assert_relative_eq!(c.level2_at(1, 0), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = TruncatedTensor::identity(2);
        let b = TruncatedTensor::identity(3);
        assert!(a.chen_compose(&b).is_err());
    }

    #[test]
    fn non_finite_segment_rejected() {
        assert!(TruncatedTensor::segment_signature(&[f64::NAN]).is_err());
        assert!(TruncatedTensor::segment_signature(&[f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn dilation_scales_levels_homogeneously() {
        let t = TruncatedTensor::segment_signature(&[0.7, -0.2]).unwrap();
        let s = t.dilate(2.0);
        assert_relative_eq!(s.level1()[0], 2.0 * t.level1()[0]);
        assert_relative_eq!(s.level2_at(0, 1), 4.0 * t.level2_at(0, 1));
        assert_relative_eq!(s.level3_at(0, 1, 1), 8.0 * t.level3_at(0, 1, 1));
    }
}
