//! Dense helpers shared by the flat and variety code: a rank-revealing
//! Householder QR with column-norm pivoting, singular values and principal
//! angles between subspaces.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Householder QR with Businger-Golub column pivoting.
///
/// `diag[i]` holds `|R_ii|`, which is non-increasing, so the numerical rank
/// is the number of leading entries above a cutoff.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    rows: usize,
    reflectors: Vec<DVector<f64>>,
    diag: Vec<f64>,
    perm: Vec<usize>,
}

impl PivotedQr {
    pub fn new(a: &DMatrix<f64>) -> Self {
        let (m, n) = a.shape();
        let steps = m.min(n);
        let mut w = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut reflectors = Vec::with_capacity(steps);
        let mut diag = Vec::with_capacity(steps);

        for j in 0..steps {
            let mut best = j;
            let mut best_norm = -1.0;
            for c in j..n {
                let norm = w.view((j, c), (m - j, 1)).norm_squared();
                if norm > best_norm {
                    best_norm = norm;
                    best = c;
                }
            }
            if best != j {
                w.swap_columns(j, best);
                perm.swap(j, best);
            }

            let x = w.view((j, j), (m - j, 1)).clone_owned();
            let alpha = x.norm();
            let mut v = DVector::from_column_slice(x.as_slice());
            if alpha == 0.0 {
                diag.push(0.0);
                reflectors.push(DVector::zeros(m - j));
                continue;
            }
            let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
            v[0] += sign * alpha;
            let vnorm = v.norm();
            v /= vnorm;

            // w[j.., j..] -= 2 v (vᵀ w[j.., j..])
            let mut block = w.view_mut((j, j), (m - j, n - j));
            let proj = v.transpose() * &block;
            block -= 2.0 * &v * proj;

            diag.push(alpha);
            reflectors.push(v);
        }

        PivotedQr {
            rows: m,
            reflectors,
            diag,
            perm,
        }
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Column permutation: column `i` of `A·P` is column `perm()[i]` of `A`.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Count of `|R_ii|` strictly above `rel_tol · |R_00|`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let Some(&top) = self.diag.first() else {
            return 0;
        };
        if top == 0.0 {
            return 0;
        }
        self.diag.iter().take_while(|&&d| d > rel_tol * top).count()
    }

    /// First `k` columns of the orthogonal factor.
    pub fn q_columns(&self, k: usize) -> DMatrix<f64> {
        let m = self.rows;
        assert!(k <= self.reflectors.len());
        let mut q = DMatrix::<f64>::zeros(m, k);
        for i in 0..k {
            q[(i, i)] = 1.0;
        }
        for (j, v) in self.reflectors.iter().enumerate().rev() {
            let mut block = q.view_mut((j, 0), (m - j, k));
            let proj = v.transpose() * &block;
            block -= 2.0 * v * proj;
        }
        q
    }
}

/// Default scale-aware cutoff for pivoted QR: `max(m, n) · ε`.
pub fn default_qr_cutoff(a: &DMatrix<f64>) -> f64 {
    a.nrows().max(a.ncols()) as f64 * f64::EPSILON
}

/// Singular values in descending order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Numerical rank with cutoff `rel_tol · σ_max`, plus the smallest retained
/// singular value (0 when the rank is zero).
pub fn numerical_rank(a: &DMatrix<f64>, rel_tol: f64) -> (usize, f64) {
    let s = singular_values(a);
    let Some(&top) = s.first() else {
        return (0, 0.0);
    };
    if top == 0.0 {
        return (0, 0.0);
    }
    let rank = s.iter().take_while(|&&v| v > rel_tol * top).count();
    let smallest = if rank == 0 { 0.0 } else { s[rank - 1] };
    (rank, smallest)
}

/// Principal angles (radians, ascending) between the column spans of two
/// orthonormal bases of equal width.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            found: b.ncols(),
        });
    }
    let cross = a.transpose() * b;
    let mut angles: Vec<f64> = singular_values(&cross)
        .into_iter()
        .map(|s| s.clamp(-1.0, 1.0).acos())
        .collect();
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

/// Geodesic distance on the Grassmannian: `sqrt(Σ θᵢ²)`.
pub fn grassmann_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    Ok(principal_angles(a, b)?
        .iter()
        .map(|t| t * t)
        .sum::<f64>()
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn qr_reconstructs_permuted_input() {
        let a = DMatrix::from_row_slice(4, 3, &[1.0, 2.0, 0.5, -1.0, 0.0, 3.0, 2.0, 1.0, 1.0, 0.0, 4.0, -2.0]);
        let qr = PivotedQr::new(&a);
        assert_eq!(qr.rank(default_qr_cutoff(&a)), 3);
        let q = qr.q_columns(3);
        let qtq = q.transpose() * &q;
        assert_abs_diff_eq!(qtq, DMatrix::identity(3, 3), epsilon = 1e-12);
        // every input column lies in span(Q)
        for c in 0..3 {
            let col = a.column(c).clone_owned();
            let resid = &col - &q * (q.transpose() * &col);
            assert!(resid.norm() < 1e-12);
        }
        for w in qr.diag().windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn qr_detects_dependent_columns() {
        let a = DMatrix::from_column_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 0.0]);
        let qr = PivotedQr::new(&a);
        assert_eq!(qr.rank(default_qr_cutoff(&a)), 2);
    }

    #[test]
    fn identical_subspaces_have_zero_distance() {
        let a = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_abs_diff_eq!(grassmann_distance(&a, &a).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn orthogonal_lines_are_at_right_angle() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let b = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert_abs_diff_eq!(
            grassmann_distance(&a, &b).unwrap(),
            std::f64::consts::FRAC_PI_2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn numerical_rank_of_empty_matrix_is_zero() {
        let a = DMatrix::<f64>::zeros(0, 4);
        assert_eq!(numerical_rank(&a, 1e-8), (0, 0.0));
    }
}
