//! Bernoulli coordinate masks and dense linear measurements.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// The set of observed coordinates: sorted, unique, all below `ambient_dim`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleMask {
    ambient_dim: usize,
    indices: Vec<usize>,
}

impl SampleMask {
    pub fn new(ambient_dim: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("mask indices must be unique"));
        }
        if let Some(&last) = indices.last() {
            if last >= ambient_dim {
                return Err(Error::invalid(format!(
                    "mask index {last} out of range for ambient dimension {ambient_dim}"
                )));
            }
        }
        Ok(SampleMask {
            ambient_dim,
            indices,
        })
    }

    pub fn full(ambient_dim: usize) -> Self {
        SampleMask {
            ambient_dim,
            indices: (0..ambient_dim).collect(),
        }
    }

    pub fn empty(ambient_dim: usize) -> Self {
        SampleMask {
            ambient_dim,
            indices: Vec::new(),
        }
    }

    /// `{ i : uniforms[i] < rho }`. Masks built from one uniform vector are
    /// nested in `rho`.
    pub fn from_uniforms(uniforms: &[f64], rho: f64) -> Result<Self> {
        check_rho(rho)?;
        Ok(SampleMask {
            ambient_dim: uniforms.len(),
            indices: uniforms
                .iter()
                .enumerate()
                .filter(|(_, u)| **u < rho)
                .map(|(i, _)| i)
                .collect(),
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// Bernoulli indicator vector ε.
    pub fn indicators(&self) -> Vec<bool> {
        let mut eps = vec![false; self.ambient_dim];
        for &i in &self.indices {
            eps[i] = true;
        }
        eps
    }

    /// Rows of `m` at the mask indices, in index order.
    pub fn select_rows(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if m.nrows() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim,
                found: m.nrows(),
            });
        }
        Ok(m.select_rows(self.indices.iter()))
    }
}

impl fmt::Display for SampleMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.indices.iter().map(usize::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// Parses a comma-separated index list; the ambient dimension is supplied
/// separately because the list alone does not carry it.
pub fn parse_mask(list: &str, ambient_dim: usize) -> Result<SampleMask> {
    let trimmed = list.trim();
    if trimmed.is_empty() {
        return Ok(SampleMask::empty(ambient_dim));
    }
    let indices = trimmed
        .split(',')
        .map(|s| usize::from_str(s.trim()).map_err(|e| Error::parse("mask", format!("{s:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    SampleMask::new(ambient_dim, indices)
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::invalid(format!("sampling rate {rho} outside [0, 1]")));
    }
    Ok(())
}

/// Draws one uniform per coordinate, in coordinate order.
pub fn draw_uniforms<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// Each coordinate is kept independently with probability `rho`.
pub fn draw_mask<R: Rng + ?Sized>(n: usize, rho: f64, rng: &mut R) -> Result<SampleMask> {
    check_rho(rho)?;
    SampleMask::from_uniforms(&draw_uniforms(n, rng), rho)
}

pub fn project(mask: &SampleMask, v: &DVector<f64>) -> Result<DVector<f64>> {
    if v.len() != mask.ambient_dim {
        return Err(Error::DimensionMismatch {
            expected: mask.ambient_dim,
            found: v.len(),
        });
    }
    Ok(DVector::from_iterator(
        mask.len(),
        mask.indices.iter().map(|&i| v[i]),
    ))
}

/// A dense measurement map `ℝⁿ → ℝᵐ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMeasurement {
    matrix: DMatrix<f64>,
}

impl LinearMeasurement {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 {
            return Err(Error::invalid("linear measurement needs at least one row"));
        }
        Ok(LinearMeasurement { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn measurements(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: v.len(),
            });
        }
        Ok(&self.matrix * v)
    }
}

/// i.i.d. standard Gaussian `m × n` matrix, filled row by row.
pub fn generic_linear_map<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<LinearMeasurement> {
    if n == 0 || m == 0 {
        return Err(Error::invalid("generic linear map needs m, n >= 1"));
    }
    let data: Vec<f64> = (0..m * n).map(|_| rng.sample(StandardNormal)).collect();
    LinearMeasurement::new(DMatrix::from_row_slice(m, n, &data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::numerical_rank;
    use crate::rng::{seeded, stream};

    #[test]
    fn extreme_rates() {
        let mut rng = seeded(1);
        assert_eq!(draw_mask(17, 1.0, &mut rng).unwrap(), SampleMask::full(17));
        assert!(draw_mask(17, 0.0, &mut rng).unwrap().is_empty());
        assert!(draw_mask(17, 1.5, &mut rng).is_err());
        assert!(draw_mask(17, -0.1, &mut rng).is_err());
    }

    #[test]
    fn pooled_mask_fraction_concentrates() {
        let n = 10_000;
        let mut total = 0usize;
        for seed in 0..100u64 {
            total += draw_mask(n, 0.3, &mut seeded(seed)).unwrap().len();
        }
        let frac = total as f64 / (100 * n) as f64;
        assert!((frac - 0.3).abs() <= 0.015, "{frac}");
    }

    #[test]
    fn mask_is_deterministic_per_seed() {
        let a = draw_mask(500, 0.4, &mut stream(9, 4)).unwrap();
        let b = draw_mask(500, 0.4, &mut stream(9, 4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn projection_examples() {
        let v = DVector::from_vec(vec![5.0, 6.0, 7.0]);
        assert_eq!(project(&SampleMask::full(3), &v).unwrap(), v);
        let m = SampleMask::new(3, vec![2, 0]).unwrap();
        assert_eq!(project(&m, &v).unwrap().as_slice(), &[5.0, 7.0]);
        assert_eq!(project(&SampleMask::empty(3), &v).unwrap().len(), 0);
        assert!(project(&m, &DVector::zeros(4)).is_err());
    }

    #[test]
    fn mask_validation() {
        assert!(SampleMask::new(3, vec![0, 0]).is_err());
        assert!(SampleMask::new(3, vec![3]).is_err());
        assert_eq!(parse_mask("0, 3,7", 8).unwrap().indices(), &[0, 3, 7]);
        assert!(parse_mask("0,x", 8).is_err());
        assert_eq!(parse_mask("1,4,2", 5).unwrap().to_string(), "1,2,4");
    }

    #[test]
    fn gaussian_map_is_full_rank_and_applies() {
        let g = generic_linear_map(50, 50, &mut seeded(11)).unwrap();
        assert_eq!(numerical_rank(g.matrix(), 1e-10).0, 50);
        let again = generic_linear_map(50, 50, &mut seeded(11)).unwrap();
        assert_eq!(g, again);
        let v = DVector::from_fn(50, |i, _| i as f64 - 3.0);
        let y = g.apply(&v).unwrap();
        for r in 0..50 {
            let explicit: f64 = (0..50).map(|c| g.matrix()[(r, c)] * v[c]).sum();
            assert!((y[r] - explicit).abs() < 1e-10);
        }
        assert!(generic_linear_map(0, 3, &mut seeded(1)).is_err());
    }
}
