//! Affine flats in coordinate space and their coherence.
//!
//! A flat is stored as an orthonormal basis (columns) plus an offset. The
//! coherence of a flat is the largest squared norm of the projection of a
//! coordinate vector onto the flat's direction space; the per-coordinate
//! values are the leverage scores. All arithmetic is over the reals; a real
//! flat and its complex closure have the same coherence.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{default_qr_cutoff, PivotedQr};

/// Tolerance on `BᵀB = I` accepted for a stored basis.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Flat {
    basis: DMatrix<f64>,
    offset: DVector<f64>,
}

impl Flat {
    /// Orthonormalizes the column space of `spanning` (pivoted QR) and drops
    /// numerically dependent columns.
    pub fn from_spanning_matrix(spanning: &DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        let n = spanning.nrows();
        if n == 0 || spanning.ncols() == 0 {
            return Err(Error::ZeroSpan);
        }
        if offset.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: offset.len(),
            });
        }
        if spanning.iter().all(|v| *v == 0.0) {
            return Err(Error::ZeroSpan);
        }
        let qr = PivotedQr::new(spanning);
        let k = qr.rank(default_qr_cutoff(spanning));
        if k == 0 {
            return Err(Error::ZeroSpan);
        }
        Ok(Flat {
            basis: qr.q_columns(k),
            offset,
        })
    }

    /// Wraps a basis that is already orthonormal (checked within
    /// [`ORTHONORMAL_TOL`]).
    pub fn from_orthonormal(basis: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        let (n, k) = basis.shape();
        if k == 0 || k > n {
            return Err(Error::invalid(format!("flat dimension {k} not in 1..={n}")));
        }
        if offset.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: offset.len(),
            });
        }
        let gram = basis.transpose() * &basis;
        let err = (gram - DMatrix::<f64>::identity(k, k)).amax();
        if err > ORTHONORMAL_TOL {
            return Err(Error::invalid(format!(
                "basis columns are not orthonormal (max deviation {err:e})"
            )));
        }
        Ok(Flat { basis, offset })
    }

    /// Linear subspace (zero offset) spanned by the columns of `spanning`.
    pub fn linear(spanning: &DMatrix<f64>) -> Result<Self> {
        Self::from_spanning_matrix(spanning, DVector::zeros(spanning.nrows()))
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    /// Orthogonal projection onto the affine flat.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        let shifted = x - &self.offset;
        &self.offset + &self.basis * (self.basis.transpose() * shifted)
    }

    /// `‖P(eᵢ) − P(0)‖²` for every coordinate i, i.e. squared row norms of the basis.
    pub fn leverage_scores(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.ambient_dim(),
            self.basis.row_iter().map(|row| row.norm_squared()),
        )
    }

    pub fn coherence(&self) -> f64 {
        self.leverage_scores().max()
    }

    /// Same direction space, new offset.
    pub fn translated(&self, offset: DVector<f64>) -> Result<Self> {
        if offset.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                found: offset.len(),
            });
        }
        Ok(Flat {
            basis: self.basis.clone(),
            offset,
        })
    }

    /// The same flat viewed inside `ℝ^{n+extra}` with zero trailing coordinates.
    pub fn zero_padded(&self, extra: usize) -> Self {
        let (n, k) = self.basis.shape();
        let mut basis = DMatrix::zeros(n + extra, k);
        basis.view_mut((0, 0), (n, k)).copy_from(&self.basis);
        let mut offset = DVector::zeros(n + extra);
        offset.rows_mut(0, n).copy_from(&self.offset);
        Flat { basis, offset }
    }

    /// Whether the direction space of `other` lies inside this one, measured by
    /// the largest residual of `other`'s basis after projection.
    pub fn contains_directions(&self, other: &Flat, tol: f64) -> bool {
        if other.ambient_dim() != self.ambient_dim() {
            return false;
        }
        let resid = &other.basis - &self.basis * (self.basis.transpose() * &other.basis);
        resid.amax() <= tol
    }

    /// Plain-text form: `n k`, then one line per basis column, then the offset.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.ambient_dim(), self.dim());
        for col in self.basis.column_iter() {
            out.push_str(&join_floats(col.iter()));
            out.push('\n');
        }
        out.push_str(&join_floats(self.offset.iter()));
        out.push('\n');
        out
    }
}

fn join_floats<'a>(values: impl Iterator<Item = &'a f64>) -> String {
    values
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(" ")
}

impl FromStr for Flat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (line_no, header) = lines.next().ok_or(Error::Malformed {
            line: 1,
            detail: "empty flat file".into(),
        })?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Malformed {
                line: line_no + 1,
                detail: format!("bad header: {e}"),
            })?;
        let [n, k] = dims[..] else {
            return Err(Error::Malformed {
                line: line_no + 1,
                detail: "header must be `n k`".into(),
            });
        };
        let mut read_row = |what: &str| -> Result<Vec<f64>> {
            let (idx, line) = lines.next().ok_or(Error::Malformed {
                line: line_no + 1,
                detail: format!("missing {what}"),
            })?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Malformed {
                    line: idx + 1,
                    detail: format!("bad number: {e}"),
                })?;
            if row.len() != n {
                return Err(Error::Malformed {
                    line: idx + 1,
                    detail: format!("expected {n} values, found {}", row.len()),
                });
            }
            Ok(row)
        };
        let mut data = Vec::with_capacity(n * k);
        for c in 0..k {
            data.extend(read_row(&format!("basis column {}", c + 1))?);
        }
        let offset = DVector::from_vec(read_row("offset line")?);
        Flat::from_orthonormal(DMatrix::from_vec(n, k, data), offset)
    }
}

/// Builds a flat from spanning vectors; dependent vectors are dropped, so the
/// dimension of the result is the numerical rank of the input.
pub fn make_flat(spanning_vectors: &[Vec<f64>], offset: &[f64]) -> Result<Flat> {
    let Some(first) = spanning_vectors.first() else {
        return Err(Error::ZeroSpan);
    };
    let n = first.len();
    if let Some(bad) = spanning_vectors.iter().find(|v| v.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.len(),
        });
    }
    let m = DMatrix::from_fn(n, spanning_vectors.len(), |i, j| spanning_vectors[j][i]);
    Flat::from_spanning_matrix(&m, DVector::from_column_slice(offset))
}

pub fn leverage_scores(flat: &Flat) -> DVector<f64> {
    flat.leverage_scores()
}

pub fn coherence_of_flat(flat: &Flat) -> f64 {
    flat.coherence()
}

/// Disjoint-support basis: k vectors, each equal to `sqrt(k/n)` on its own
/// block of `n/k` consecutive coordinates. Requires `k | n`.
pub fn block_flat(n: usize, k: usize) -> Result<Flat> {
    check_range(n, k)?;
    if n % k != 0 {
        return Err(Error::invalid(format!("block construction needs k | n (n={n}, k={k})")));
    }
    let width = n / k;
    let value = (k as f64 / n as f64).sqrt();
    let basis = DMatrix::from_fn(n, k, |i, j| if i / width == j { value } else { 0.0 });
    Flat::from_orthonormal(basis, DVector::zeros(n))
}

/// Real harmonic frame: columns are sampled cosines/sines of frequencies
/// `1..=⌊k/2⌋` at `n` equispaced angles (plus the constant column when k is
/// odd), scaled to unit norm. Every row has squared norm `k/n`.
pub fn harmonic_frame(n: usize, k: usize) -> Result<Flat> {
    check_range(n, k)?;
    if k == n {
        return Flat::from_orthonormal(DMatrix::identity(n, n), DVector::zeros(n));
    }
    let nf = n as f64;
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(k);
    if k % 2 == 1 {
        cols.push(DVector::from_element(n, 1.0 / nf.sqrt()));
    }
    let scale = (2.0 / nf).sqrt();
    for freq in 1..=k / 2 {
        let angle = |t: usize| 2.0 * PI * (freq * t) as f64 / nf;
        cols.push(DVector::from_fn(n, |t, _| scale * angle(t).cos()));
        cols.push(DVector::from_fn(n, |t, _| scale * angle(t).sin()));
    }
    let frame = DMatrix::from_columns(&cols);
    Flat::linear(&frame)
}

/// A linear k-flat in ℝⁿ with coherence exactly `k/n`: block construction when
/// `k | n`, harmonic frame otherwise.
pub fn max_incoherent_flat(n: usize, k: usize) -> Result<Flat> {
    check_range(n, k)?;
    if n % k == 0 {
        block_flat(n, k)
    } else {
        harmonic_frame(n, k)
    }
}

fn check_range(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::invalid(format!("need 1 <= k <= n, got n={n}, k={k}")));
    }
    Ok(())
}
