//! Parameterized signal varieties: embeddings, tangent flats and coherence.
//!
//! Coordinate conventions (these fix the meaning of mask indices):
//!
//! * `LowRank`: entry `(i, j)` of the `m × n` matrix is coordinate `i·n + j`
//!   (row-major).
//! * `SymLowRank`: entries `i ≤ j` in lexicographic order
//!   `(0,0), (0,1), …, (0,n−1), (1,1), …`.
//! * `UnitDiagGram`, `CayleyMenger`: entries `i < j` in lexicographic order
//!   `(0,1), (0,2), …, (1,2), …`; the constant diagonal is dropped.
//!
//! Symmetric low-rank models carry a [`SymEmbedding`]. In the plain embedding
//! every distinct entry is one coordinate. In the isometric one the
//! off-diagonal coordinates are scaled by √2, which makes the coordinate space
//! isometric to the symmetric matrices with the Frobenius norm; only that
//! embedding reproduces the closed form `1 − (1 − coh(col span))²` for the
//! coherence of a symmetric point. Identifiability verdicts do not depend on
//! the choice since coordinate scaling preserves the rank of every row subset.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{default_qr_cutoff, grassmann_distance, PivotedQr};
use crate::linflat::Flat;
use crate::rng;

/// Relative pivot cutoff used when orthonormalizing tangent generators.
pub const TANGENT_RANK_TOL: f64 = 1e-9;

/// Tolerance on `‖xᵢ‖ = 1` for Gram-model parameters.
pub const UNIT_NORM_TOL: f64 = 1e-8;

/// Seed of the internal generic point used to fix the dimension of a
/// Minkowski sum.
const SUM_DIMENSION_SEED: u64 = 0x5eed_d1e5;

/// Redraws allowed after a degenerate generic point.
const GENERIC_REDRAWS: usize = 3;

/// Placeholder constant of the distance/Gram coherence bound `C·d/n`.
pub const CAYLEY_BOUND_CONSTANT: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SymEmbedding {
    #[default]
    Plain,
    Isometric,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Linear(Flat),
    LowRank {
        rows: usize,
        cols: usize,
        rank: usize,
    },
    SymLowRank {
        n: usize,
        rank: usize,
        embedding: SymEmbedding,
    },
    /// Gram matrices of `n` unit vectors in `ℝ^rank`.
    UnitDiagGram {
        n: usize,
        rank: usize,
    },
    /// Squared distance matrices of `n` points in `ℝ^dim`.
    CayleyMenger {
        n: usize,
        dim: usize,
    },
    MinkowskiSum {
        left: Box<VarietyModel>,
        right: Box<VarietyModel>,
        dim: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarietyModel {
    kind: ModelKind,
}

impl VarietyModel {
    pub fn linear(flat: Flat) -> Self {
        VarietyModel {
            kind: ModelKind::Linear(flat),
        }
    }

    pub fn low_rank(rows: usize, cols: usize, rank: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || rank == 0 || rank > rows.min(cols) {
            return Err(Error::invalid(format!(
                "low-rank model needs 1 <= r <= min(m, n), got m={rows}, n={cols}, r={rank}"
            )));
        }
        Ok(VarietyModel {
            kind: ModelKind::LowRank { rows, cols, rank },
        })
    }

    pub fn sym_low_rank(n: usize, rank: usize) -> Result<Self> {
        Self::sym_low_rank_with(n, rank, SymEmbedding::Plain)
    }

    pub fn sym_low_rank_with(n: usize, rank: usize, embedding: SymEmbedding) -> Result<Self> {
        if rank == 0 || rank > n {
            return Err(Error::invalid(format!(
                "symmetric low-rank model needs 1 <= r <= n, got n={n}, r={rank}"
            )));
        }
        Ok(VarietyModel {
            kind: ModelKind::SymLowRank { n, rank, embedding },
        })
    }

    /// `rank` is the dimension of the space holding the unit vectors, so the
    /// model has dimension `(rank − 1)·n − rank·(rank − 1)/2`.
    pub fn unit_diag_gram(n: usize, rank: usize) -> Result<Self> {
        if rank < 2 || rank > n {
            return Err(Error::invalid(format!(
                "unit-diagonal Gram model needs 2 <= r <= n, got n={n}, r={rank}"
            )));
        }
        Ok(VarietyModel {
            kind: ModelKind::UnitDiagGram { n, rank },
        })
    }

    pub fn cayley_menger(n: usize, dim: usize) -> Result<Self> {
        if dim == 0 || dim >= n {
            return Err(Error::invalid(format!(
                "Cayley-Menger model needs 1 <= d < n, got n={n}, d={dim}"
            )));
        }
        Ok(VarietyModel {
            kind: ModelKind::CayleyMenger { n, dim },
        })
    }

    /// `X + Y`. The dimension is the rank of the joint tangent generators at
    /// a fixed internal generic point.
    pub fn minkowski_sum(left: VarietyModel, right: VarietyModel) -> Result<Self> {
        if left.ambient_dim() != right.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: left.ambient_dim(),
                found: right.ambient_dim(),
            });
        }
        let mut model = VarietyModel {
            kind: ModelKind::MinkowskiSum {
                left: Box::new(left),
                right: Box::new(right),
                dim: 0,
            },
        };
        let mut rng = rng::seeded(SUM_DIMENSION_SEED);
        let params = model.draw_params(&mut rng);
        let gens = model.tangent_generators(&params)?;
        let qr = PivotedQr::new(&gens);
        let dim = qr.rank(TANGENT_RANK_TOL);
        if let ModelKind::MinkowskiSum { dim: d, .. } = &mut model.kind {
            *d = dim;
        }
        Ok(model)
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn ambient_dim(&self) -> usize {
        match &self.kind {
            ModelKind::Linear(flat) => flat.ambient_dim(),
            ModelKind::LowRank { rows, cols, .. } => rows * cols,
            ModelKind::SymLowRank { n, .. } => n * (n + 1) / 2,
            ModelKind::UnitDiagGram { n, .. } | ModelKind::CayleyMenger { n, .. } => {
                n * (n - 1) / 2
            }
            ModelKind::MinkowskiSum { left, .. } => left.ambient_dim(),
        }
    }

    pub fn param_dim(&self) -> usize {
        match &self.kind {
            ModelKind::Linear(flat) => flat.dim(),
            ModelKind::LowRank { rows, cols, rank } => rank * (rows + cols),
            ModelKind::SymLowRank { n, rank, .. } | ModelKind::UnitDiagGram { n, rank } => n * rank,
            ModelKind::CayleyMenger { n, dim } => n * dim,
            ModelKind::MinkowskiSum { left, right, .. } => left.param_dim() + right.param_dim(),
        }
    }

    pub fn dimension(&self) -> usize {
        match &self.kind {
            ModelKind::Linear(flat) => flat.dim(),
            ModelKind::LowRank { rows, cols, rank } => rank * (rows + cols - rank),
            ModelKind::SymLowRank { n, rank, .. } => rank * n - rank * (rank - 1) / 2,
            ModelKind::UnitDiagGram { n, rank } => (rank - 1) * n - rank * (rank - 1) / 2,
            ModelKind::CayleyMenger { n, dim } => dim * n - dim * (dim + 1) / 2,
            ModelKind::MinkowskiSum { dim, .. } => *dim,
        }
    }

    /// Ambient coordinate of matrix entry `(i, j)`, or `None` when the entry
    /// is not a coordinate (diagonal of distance/Gram models, out of range).
    /// Symmetric models accept either order of `i, j`.
    pub fn coordinate_of(&self, i: usize, j: usize) -> Option<usize> {
        match &self.kind {
            ModelKind::LowRank { rows, cols, .. } => (i < *rows && j < *cols).then(|| i * cols + j),
            ModelKind::SymLowRank { n, .. } => {
                let (a, b) = (i.min(j), i.max(j));
                (b < *n).then(|| sym_index(*n, a, b))
            }
            ModelKind::UnitDiagGram { n, .. } | ModelKind::CayleyMenger { n, .. } => {
                let (a, b) = (i.min(j), i.max(j));
                (a != b && b < *n).then(|| strict_index(*n, a, b))
            }
            _ => None,
        }
    }

    /// Matrix entry of every ambient coordinate, in coordinate order. Empty
    /// for linear models and sums of linear models.
    pub fn coordinates(&self) -> Vec<(usize, usize)> {
        match &self.kind {
            ModelKind::LowRank { rows, cols, .. } => {
                (0..*rows).flat_map(|i| (0..*cols).map(move |j| (i, j))).collect()
            }
            ModelKind::SymLowRank { n, .. } => upper_pairs(*n, false),
            ModelKind::UnitDiagGram { n, .. } | ModelKind::CayleyMenger { n, .. } => {
                upper_pairs(*n, true)
            }
            ModelKind::MinkowskiSum { left, .. } => left.coordinates(),
            ModelKind::Linear(_) => Vec::new(),
        }
    }

    /// Maps parameters to ambient coordinates.
    pub fn embed(&self, params: &[f64]) -> Result<DVector<f64>> {
        self.check_params(params)?;
        Ok(self.embed_unchecked(params))
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.param_dim(),
                found: params.len(),
            });
        }
        match &self.kind {
            ModelKind::UnitDiagGram { n, rank } => {
                for i in 0..*n {
                    let norm = params[i * rank..(i + 1) * rank]
                        .iter()
                        .map(|v| v * v)
                        .sum::<f64>()
                        .sqrt();
                    if (norm - 1.0).abs() > UNIT_NORM_TOL {
                        return Err(Error::invalid(format!(
                            "Gram parameter {i} has norm {norm}, expected a unit vector"
                        )));
                    }
                }
                Ok(())
            }
            ModelKind::MinkowskiSum { left, right, .. } => {
                let split = left.param_dim();
                left.check_params(&params[..split])?;
                right.check_params(&params[split..])
            }
            _ => Ok(()),
        }
    }

    fn embed_unchecked(&self, params: &[f64]) -> DVector<f64> {
        match &self.kind {
            ModelKind::Linear(flat) => {
                flat.offset() + flat.basis() * DVector::from_column_slice(params)
            }
            ModelKind::LowRank { rows, cols, rank } => {
                let (u, v) = params.split_at(rows * rank);
                DVector::from_fn(rows * cols, |idx, _| {
                    let (i, j) = (idx / cols, idx % cols);
                    dot(&u[i * rank..(i + 1) * rank], &v[j * rank..(j + 1) * rank])
                })
            }
            ModelKind::SymLowRank { n, rank, embedding } => {
                let pairs = upper_pairs(*n, false);
                DVector::from_iterator(
                    pairs.len(),
                    pairs.iter().map(|&(i, j)| {
                        sym_weight(*embedding, i, j)
                            * dot(&params[i * rank..(i + 1) * rank], &params[j * rank..(j + 1) * rank])
                    }),
                )
            }
            ModelKind::UnitDiagGram { n, rank } => {
                let pairs = upper_pairs(*n, true);
                DVector::from_iterator(
                    pairs.len(),
                    pairs.iter().map(|&(i, j)| {
                        dot(&params[i * rank..(i + 1) * rank], &params[j * rank..(j + 1) * rank])
                    }),
                )
            }
            ModelKind::CayleyMenger { n, dim } => {
                let pairs = upper_pairs(*n, true);
                DVector::from_iterator(
                    pairs.len(),
                    pairs.iter().map(|&(i, j)| {
                        (0..*dim)
                            .map(|a| {
                                let diff = params[i * dim + a] - params[j * dim + a];
                                diff * diff
                            })
                            .sum()
                    }),
                )
            }
            ModelKind::MinkowskiSum { left, right, .. } => {
                let split = left.param_dim();
                left.embed_unchecked(&params[..split]) + right.embed_unchecked(&params[split..])
            }
        }
    }

    /// Analytic Jacobian of [`embed`](Self::embed): `ambient_dim × param_dim`.
    pub fn jacobian(&self, params: &[f64]) -> Result<DMatrix<f64>> {
        if params.len() != self.param_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.param_dim(),
                found: params.len(),
            });
        }
        Ok(self.jacobian_unchecked(params))
    }

    fn jacobian_unchecked(&self, params: &[f64]) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.ambient_dim(), self.param_dim());
        match &self.kind {
            ModelKind::Linear(flat) => jac.copy_from(flat.basis()),
            ModelKind::LowRank { rows, cols, rank } => {
                let (u, v) = params.split_at(rows * rank);
                for i in 0..*rows {
                    for j in 0..*cols {
                        let row = i * cols + j;
                        for c in 0..*rank {
                            jac[(row, i * rank + c)] = v[j * rank + c];
                            jac[(row, rows * rank + j * rank + c)] = u[i * rank + c];
                        }
                    }
                }
            }
            ModelKind::SymLowRank { n, rank, embedding } => {
                for (row, &(i, j)) in upper_pairs(*n, false).iter().enumerate() {
                    let w = sym_weight(*embedding, i, j);
                    for c in 0..*rank {
                        // dA_ij/dU_ic = U_jc, dA_ij/dU_jc = U_ic (summed when i = j)
                        jac[(row, i * rank + c)] += w * params[j * rank + c];
                        jac[(row, j * rank + c)] += w * params[i * rank + c];
                    }
                }
            }
            ModelKind::UnitDiagGram { n, rank } => {
                for (row, &(i, j)) in upper_pairs(*n, true).iter().enumerate() {
                    for c in 0..*rank {
                        jac[(row, i * rank + c)] = params[j * rank + c];
                        jac[(row, j * rank + c)] = params[i * rank + c];
                    }
                }
            }
            ModelKind::CayleyMenger { n, dim } => {
                // dD_ij/dx_k = 2(δ_ki − δ_kj)(x_i − x_j)
                for (row, &(i, j)) in upper_pairs(*n, true).iter().enumerate() {
                    for a in 0..*dim {
                        let diff = 2.0 * (params[i * dim + a] - params[j * dim + a]);
                        jac[(row, i * dim + a)] = diff;
                        jac[(row, j * dim + a)] = -diff;
                    }
                }
            }
            ModelKind::MinkowskiSum { left, right, .. } => {
                let split = left.param_dim();
                let ambient = self.ambient_dim();
                jac.view_mut((0, 0), (ambient, split))
                    .copy_from(&left.jacobian_unchecked(&params[..split]));
                jac.view_mut((0, split), (ambient, right.param_dim()))
                    .copy_from(&right.jacobian_unchecked(&params[split..]));
            }
        }
        jac
    }

    /// Vectors spanning the tangent space: the Jacobian, with Gram-model
    /// directions restricted to the tangent planes of the spheres.
    fn tangent_generators(&self, params: &[f64]) -> Result<DMatrix<f64>> {
        let jac = self.jacobian(params)?;
        Ok(match &self.kind {
            ModelKind::UnitDiagGram { n, rank } => {
                let r = *rank;
                let mut out = DMatrix::zeros(jac.nrows(), jac.ncols());
                for k in 0..*n {
                    let x = DVector::from_column_slice(&params[k * r..(k + 1) * r]);
                    let proj = DMatrix::<f64>::identity(r, r) - &x * x.transpose();
                    let block = jac.columns(k * r, r) * proj;
                    out.columns_mut(k * r, r).copy_from(&block);
                }
                out
            }
            ModelKind::MinkowskiSum { left, right, .. } => {
                let split = left.param_dim();
                let l = left.tangent_generators(&params[..split])?;
                let r = right.tangent_generators(&params[split..])?;
                let mut out = DMatrix::zeros(self.ambient_dim(), l.ncols() + r.ncols());
                out.columns_mut(0, l.ncols()).copy_from(&l);
                out.columns_mut(l.ncols(), r.ncols()).copy_from(&r);
                out
            }
            _ => jac,
        })
    }

    fn draw_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.kind {
            ModelKind::UnitDiagGram { n, rank } => {
                let mut params = Vec::with_capacity(n * rank);
                for _ in 0..*n {
                    let v: Vec<f64> = (0..*rank).map(|_| rng.sample(StandardNormal)).collect();
                    let norm = dot(&v, &v).sqrt();
                    params.extend(v.iter().map(|x| x / norm));
                }
                params
            }
            ModelKind::MinkowskiSum { left, right, .. } => {
                let mut params = left.draw_params(rng);
                params.extend(right.draw_params(rng));
                params
            }
            _ => (0..self.param_dim()).map(|_| rng.sample(StandardNormal)).collect(),
        }
    }

    /// Gaussian parameters (normalized Gaussians for sphere points). A draw
    /// whose tangent is rank-deficient is redrawn up to three times.
    pub fn sample_generic_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Point> {
        let mut last_err = None;
        for _ in 0..=GENERIC_REDRAWS {
            let point = Point::new(self.clone(), self.draw_params(rng))?;
            match self.tangent_space(&point) {
                Ok(_) => return Ok(point),
                Err(e) if e.is_numerical() => last_err = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last_err.expect("at least one draw"))
    }

    /// Tangent flat at `point`, offset at the point itself.
    pub fn tangent_space(&self, point: &Point) -> Result<Flat> {
        if point.ambient.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                found: point.ambient.len(),
            });
        }
        if let ModelKind::Linear(flat) = &self.kind {
            return flat.translated(point.ambient.clone());
        }
        let gens = self.tangent_generators(&point.params)?;
        let qr = PivotedQr::new(&gens);
        let rank = qr.rank(TANGENT_RANK_TOL);
        let dim = self.dimension();
        if rank < dim || dim == 0 {
            return Err(Error::RankDeficient {
                expected: dim,
                found: rank,
            });
        }
        Flat::from_orthonormal(qr.q_columns(dim), point.ambient.clone())
    }

    pub fn coherence_at(&self, point: &Point) -> Result<f64> {
        Ok(self.tangent_space(point)?.coherence())
    }

    /// Closed-form (or documented upper-bound) coherence of the whole variety.
    pub fn coherence_formula(&self) -> Result<CoherenceValue> {
        match &self.kind {
            ModelKind::Linear(flat) => Ok(CoherenceValue {
                value: flat.coherence(),
                exact: true,
            }),
            ModelKind::LowRank { rows, cols, rank } => Ok(CoherenceValue {
                value: (rank * (rows + cols - rank)) as f64 / (rows * cols) as f64,
                exact: true,
            }),
            ModelKind::SymLowRank { n, rank, embedding } => Ok(CoherenceValue {
                value: (rank * (2 * n - rank)) as f64 / (n * n) as f64,
                exact: *embedding == SymEmbedding::Isometric,
            }),
            ModelKind::CayleyMenger { n, dim: r } | ModelKind::UnitDiagGram { n, rank: r } => {
                Ok(CoherenceValue {
                    value: (CAYLEY_BOUND_CONSTANT * *r as f64 / *n as f64).min(1.0),
                    exact: false,
                })
            }
            ModelKind::MinkowskiSum { .. } => Err(Error::NoFormula(self.to_string())),
        }
    }

    /// Smallest pointwise coherence over `samples` generic points. An upper
    /// estimate of the infimum, never exact.
    pub fn coherence_monte_carlo<R: Rng + ?Sized>(
        &self,
        samples: usize,
        rng: &mut R,
    ) -> Result<MonteCarloCoherence> {
        if samples == 0 {
            return Err(Error::invalid("Monte Carlo coherence needs at least one sample"));
        }
        let mut best = f64::INFINITY;
        for _ in 0..samples {
            let p = self.sample_generic_point(rng)?;
            best = best.min(self.coherence_at(&p)?);
        }
        Ok(MonteCarloCoherence {
            value: best,
            samples,
        })
    }

    /// Low-rank point with the given factors (`U: m×r`, `V: n×r`).
    pub fn low_rank_point(&self, u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<Point> {
        let ModelKind::LowRank { rows, cols, rank } = self.kind else {
            return Err(Error::invalid("low_rank_point needs a low-rank model"));
        };
        if u.shape() != (rows, rank) || v.shape() != (cols, rank) {
            return Err(Error::invalid("factor shapes do not match the model"));
        }
        let mut params = row_major(u);
        params.extend(row_major(v));
        Point::new(self.clone(), params)
    }

    /// Configuration point for point-set models (`n × d` rows are points).
    pub fn configuration_point(&self, config: &DMatrix<f64>) -> Result<Point> {
        let (n, d) = match self.kind {
            ModelKind::CayleyMenger { n, dim } => (n, dim),
            ModelKind::UnitDiagGram { n, rank } => (n, rank),
            ModelKind::SymLowRank { n, rank, .. } => (n, rank),
            _ => return Err(Error::invalid("configuration_point needs a point-set model")),
        };
        if config.shape() != (n, d) {
            return Err(Error::invalid(format!(
                "configuration is {}x{}, model expects {n}x{d}",
                config.nrows(),
                config.ncols()
            )));
        }
        Point::new(self.clone(), row_major(config))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CoherenceValue {
    pub value: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MonteCarloCoherence {
    pub value: f64,
    pub samples: usize,
}

/// A point of a variety: parameters and their embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    model: VarietyModel,
    params: Vec<f64>,
    ambient: DVector<f64>,
}

impl Point {
    pub fn new(model: VarietyModel, params: Vec<f64>) -> Result<Self> {
        let ambient = model.embed(&params)?;
        Ok(Point {
            model,
            params,
            ambient,
        })
    }

    pub fn model(&self) -> &VarietyModel {
        &self.model
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn ambient(&self) -> &DVector<f64> {
        &self.ambient
    }

    pub fn tangent_space(&self) -> Result<Flat> {
        self.model.tangent_space(self)
    }

    pub fn coherence(&self) -> Result<f64> {
        self.model.coherence_at(self)
    }
}

pub fn embed(model: &VarietyModel, params: &[f64]) -> Result<DVector<f64>> {
    model.embed(params)
}

pub fn dimension(model: &VarietyModel) -> usize {
    model.dimension()
}

pub fn sample_generic_point<R: Rng + ?Sized>(model: &VarietyModel, rng: &mut R) -> Result<Point> {
    model.sample_generic_point(rng)
}

pub fn tangent_space(model: &VarietyModel, point: &Point) -> Result<Flat> {
    model.tangent_space(point)
}

pub fn coherence_at(model: &VarietyModel, point: &Point) -> Result<f64> {
    model.coherence_at(point)
}

pub fn coherence_formula(model: &VarietyModel) -> Result<CoherenceValue> {
    model.coherence_formula()
}

/// Pointwise coherence of a matrix of rank at most `rank` from the coherences
/// of its column and row spans: `1 − (1 − coh(col))(1 − coh(row))`, or
/// `1 − (1 − coh(col))²` for a symmetric matrix.
pub fn matrix_coherence(a: &DMatrix<f64>, rank: usize, symmetric: bool) -> Result<f64> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::invalid("empty matrix"));
    }
    if symmetric {
        if m != n {
            return Err(Error::invalid("symmetric coherence needs a square matrix"));
        }
        let asym = (a - a.transpose()).amax();
        if asym > 1e-10 * a.amax().max(1.0) {
            return Err(Error::invalid(format!("matrix is not symmetric (deviation {asym:e})")));
        }
    }
    let sv = crate::linalg::singular_values(a);
    let top = sv[0];
    if top == 0.0 {
        return Err(Error::invalid("zero matrix has no row or column span"));
    }
    let cutoff = default_qr_cutoff(a) * top;
    let found = sv.iter().filter(|&&s| s > cutoff).count();
    if found > rank {
        return Err(Error::RankExceeded { limit: rank, found });
    }
    // spans from pivoted QR: more accurate than the SVD factors for wide inputs
    let u = PivotedQr::new(a).q_columns(found);
    let v = PivotedQr::new(&a.transpose()).q_columns(found);
    let col = Flat::from_orthonormal(u, DVector::zeros(m))?.coherence();
    if symmetric {
        return Ok(1.0 - (1.0 - col).powi(2));
    }
    let row = Flat::from_orthonormal(v, DVector::zeros(n))?.coherence();
    Ok(1.0 - (1.0 - col) * (1.0 - row))
}

/// `(x, h) / sqrt(xᵀx + h²)`: lifts `x` to height `h` and projects onto the
/// unit sphere.
pub fn nu_h(x: &[f64], h: f64) -> Result<DVector<f64>> {
    let norm = (dot(x, x) + h * h).sqrt();
    if norm == 0.0 {
        return Err(Error::invalid("nu_h is undefined at x = 0, h = 0"));
    }
    let mut out = DVector::zeros(x.len() + 1);
    for (i, v) in x.iter().enumerate() {
        out[i] = v / norm;
    }
    out[x.len()] = h / norm;
    Ok(out)
}

/// Grassmann distances between the tangent flat of the distance model at
/// `config` (rows are points) and the tangent flat of the unit-diagonal Gram
/// model at the lifted points `nu_h(xᵢ)`, one per entry of `h_values`.
pub fn tangent_limit_probe(config: &DMatrix<f64>, h_values: &[f64]) -> Result<Vec<f64>> {
    let (n, d) = config.shape();
    if h_values.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::invalid("h values must be positive"));
    }
    if h_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("h values must be increasing"));
    }
    let distance_model = VarietyModel::cayley_menger(n, d)?;
    let t_d = distance_model
        .configuration_point(config)?
        .tangent_space()?;
    let gram_model = VarietyModel::unit_diag_gram(n, d + 1)?;
    h_values
        .iter()
        .map(|&h| {
            let mut lifted = DMatrix::zeros(n, d + 1);
            for i in 0..n {
                let row: Vec<f64> = config.row(i).iter().copied().collect();
                lifted.row_mut(i).copy_from(&nu_h(&row, h)?.transpose());
            }
            let t_a = gram_model.configuration_point(&lifted)?.tangent_space()?;
            grassmann_distance(t_a.basis(), t_d.basis())
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn sym_weight(embedding: SymEmbedding, i: usize, j: usize) -> f64 {
    match embedding {
        SymEmbedding::Isometric if i != j => std::f64::consts::SQRT_2,
        _ => 1.0,
    }
}

fn upper_pairs(n: usize, strict: bool) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| ((if strict { i + 1 } else { i })..n).map(move |j| (i, j)))
        .collect()
}

// rows before i hold n + (n−1) + … + (n−i+1) = i·n − i(i−1)/2 entries
fn sym_index(n: usize, i: usize, j: usize) -> usize {
    i * n - i * i.saturating_sub(1) / 2 + (j - i)
}

fn strict_index(n: usize, i: usize, j: usize) -> usize {
    i * (n - 1) - i * (i.saturating_sub(1)) / 2 + (j - i - 1)
}

impl fmt::Display for VarietyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ModelKind::Linear(flat) => write!(f, "linear:n={},k={}", flat.ambient_dim(), flat.dim()),
            ModelKind::LowRank { rows, cols, rank } => write!(f, "lowrank:m={rows},n={cols},r={rank}"),
            ModelKind::SymLowRank { n, rank, embedding } => {
                write!(f, "symlowrank:n={n},r={rank}")?;
                if *embedding == SymEmbedding::Isometric {
                    f.write_str(",embedding=isometric")?;
                }
                Ok(())
            }
            ModelKind::UnitDiagGram { n, rank } => write!(f, "unitgram:n={n},r={rank}"),
            ModelKind::CayleyMenger { n, dim } => write!(f, "cayley:n={n},d={dim}"),
            ModelKind::MinkowskiSum { left, right, .. } => write!(f, "sum:{left}+{right}"),
        }
    }
}

fn parse_fields(body: &str) -> Result<Vec<(String, String)>> {
    body.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::parse("model descriptor", format!("expected key=value, got {kv:?}")))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn field<T: FromStr>(fields: &[(String, String)], key: &str) -> Result<T> {
    let (_, raw) = fields
        .iter()
        .find(|(k, _)| k == key)
        .ok_or_else(|| Error::parse("model descriptor", format!("missing field {key:?}")))?;
    raw.parse()
        .map_err(|_| Error::parse("model descriptor", format!("bad value for {key}: {raw:?}")))
}

fn check_keys(fields: &[(String, String)], allowed: &[&str]) -> Result<()> {
    for (k, _) in fields {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::parse("model descriptor", format!("unknown field {k:?}")));
        }
    }
    Ok(())
}

/// Parses a compact model descriptor.
///
/// Accepted forms: `lowrank:m=..,n=..,r=..`, `symlowrank:n=..,r=..[,embedding=plain|isometric]`,
/// `unitgram:n=..,r=..`, `cayley:n=..,d=..`, `linear:@path.flat`,
/// `block:n=..,k=..` (disjoint-support flat), `frame:n=..,k=..` (maximally
/// incoherent flat) and `sum:<descriptor>+<descriptor>`.
pub fn parse_model(descriptor: &str) -> Result<VarietyModel> {
    let descriptor = descriptor.trim();
    let (kind, body) = descriptor
        .split_once(':')
        .ok_or_else(|| Error::parse("model descriptor", format!("missing ':' in {descriptor:?}")))?;
    match kind {
        "sum" => {
            let (l, r) = body
                .split_once('+')
                .ok_or_else(|| Error::parse("model descriptor", "sum needs <left>+<right>"))?;
            VarietyModel::minkowski_sum(parse_model(l)?, parse_model(r)?)
        }
        "linear" => {
            let path = body
                .strip_prefix('@')
                .ok_or_else(|| Error::parse("model descriptor", "linear expects @<file>"))?;
            load_flat(Path::new(path)).map(VarietyModel::linear)
        }
        _ => {
            let fields = parse_fields(body)?;
            match kind {
                "lowrank" => {
                    check_keys(&fields, &["m", "n", "r"])?;
                    VarietyModel::low_rank(field(&fields, "m")?, field(&fields, "n")?, field(&fields, "r")?)
                }
                "symlowrank" => {
                    check_keys(&fields, &["n", "r", "embedding"])?;
                    let embedding = match fields.iter().find(|(k, _)| k == "embedding") {
                        None => SymEmbedding::Plain,
                        Some((_, v)) if v == "plain" => SymEmbedding::Plain,
                        Some((_, v)) if v == "isometric" => SymEmbedding::Isometric,
                        Some((_, v)) => {
                            return Err(Error::parse("model descriptor", format!("unknown embedding {v:?}")))
                        }
                    };
                    VarietyModel::sym_low_rank_with(field(&fields, "n")?, field(&fields, "r")?, embedding)
                }
                "unitgram" => {
                    check_keys(&fields, &["n", "r"])?;
                    VarietyModel::unit_diag_gram(field(&fields, "n")?, field(&fields, "r")?)
                }
                "cayley" => {
                    check_keys(&fields, &["n", "d"])?;
                    VarietyModel::cayley_menger(field(&fields, "n")?, field(&fields, "d")?)
                }
                "block" => {
                    check_keys(&fields, &["n", "k"])?;
                    crate::linflat::block_flat(field(&fields, "n")?, field(&fields, "k")?).map(VarietyModel::linear)
                }
                "frame" => {
                    check_keys(&fields, &["n", "k"])?;
                    crate::linflat::max_incoherent_flat(field(&fields, "n")?, field(&fields, "k")?)
                        .map(VarietyModel::linear)
                }
                other => Err(Error::parse("model descriptor", format!("unknown model kind {other:?}"))),
            }
        }
    }
}

pub fn load_flat(path: &Path) -> Result<Flat> {
    std::fs::read_to_string(path)?.parse()
}

impl FromStr for VarietyModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_model(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::singular_values;
    use crate::linflat::{make_flat, max_incoherent_flat};

    fn all_kinds() -> Vec<VarietyModel> {
        vec![
            VarietyModel::linear(max_incoherent_flat(7, 3).unwrap()),
            VarietyModel::low_rank(4, 5, 2).unwrap(),
            VarietyModel::sym_low_rank(5, 2).unwrap(),
            VarietyModel::sym_low_rank_with(5, 2, SymEmbedding::Isometric).unwrap(),
            VarietyModel::unit_diag_gram(6, 3).unwrap(),
            VarietyModel::cayley_menger(6, 2).unwrap(),
            VarietyModel::minkowski_sum(
                VarietyModel::low_rank(4, 4, 1).unwrap(),
                VarietyModel::low_rank(4, 4, 1).unwrap(),
            )
            .unwrap(),
        ]
    }

    #[test]
    fn embed_examples() {
        let cm = VarietyModel::cayley_menger(2, 1).unwrap();
        assert_eq!(cm.embed(&[0.0, 1.0]).unwrap()[0], 1.0);
        let cm2 = VarietyModel::cayley_menger(3, 2).unwrap();
        let d = cm2.embed(&[0.0, 0.0, 1.0, 0.0, 0.0, 2.0]).unwrap();
        assert_eq!(d.as_slice(), &[1.0, 4.0, 5.0]);

        let sym = VarietyModel::sym_low_rank(2, 1).unwrap();
        assert_eq!(sym.embed(&[1.0, 1.0]).unwrap().as_slice(), &[1.0, 1.0, 1.0]);

        let gram = VarietyModel::unit_diag_gram(4, 2).unwrap();
        let same = [0.6, 0.8].repeat(4);
        let a = gram.embed(&same).unwrap();
        assert!(a.iter().all(|v| (v - 1.0).abs() < 1e-15));
        assert!(gram.embed(&[1.0, 1.0].repeat(4)).is_err());
        assert!(sym.embed(&[1.0]).is_err());
    }

    #[test]
    fn dimension_examples() {
        assert_eq!(VarietyModel::cayley_menger(3, 2).unwrap().dimension(), 3);
        assert_eq!(VarietyModel::low_rank(2, 2, 1).unwrap().dimension(), 3);
        let flat = max_incoherent_flat(9, 5).unwrap();
        assert_eq!(VarietyModel::linear(flat).dimension(), 5);
        // distance model in d-space and Gram model of unit vectors in (d+1)-space agree
        for n in 4..9 {
            for d in 1..3 {
                assert_eq!(
                    VarietyModel::cayley_menger(n, d).unwrap().dimension(),
                    VarietyModel::unit_diag_gram(n, d + 1).unwrap().dimension()
                );
            }
        }
        let sum = VarietyModel::minkowski_sum(
            VarietyModel::low_rank(5, 5, 1).unwrap(),
            VarietyModel::low_rank(5, 5, 1).unwrap(),
        )
        .unwrap();
        assert_eq!(sum.dimension(), VarietyModel::low_rank(5, 5, 2).unwrap().dimension());
    }

    #[test]
    fn invalid_models_are_rejected() {
        assert!(VarietyModel::low_rank(2, 3, 3).is_err());
        assert!(VarietyModel::sym_low_rank(3, 4).is_err());
        assert!(VarietyModel::unit_diag_gram(3, 1).is_err());
        assert!(VarietyModel::cayley_menger(3, 3).is_err());
        assert!(VarietyModel::minkowski_sum(
            VarietyModel::low_rank(2, 2, 1).unwrap(),
            VarietyModel::low_rank(2, 3, 1).unwrap()
        )
        .is_err());
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let step = 1e-6;
        for (s, model) in all_kinds().into_iter().enumerate() {
            let params = model.draw_params(&mut rng::seeded(100 + s as u64));
            let jac = model.jacobian(&params).unwrap();
            for c in 0..params.len() {
                let mut plus = params.clone();
                let mut minus = params.clone();
                plus[c] += step;
                minus[c] -= step;
                let fd = (model.embed_unchecked(&plus) - model.embed_unchecked(&minus)) / (2.0 * step);
                for r in 0..fd.len() {
                    let exact = jac[(r, c)];
                    assert!(
                        (fd[r] - exact).abs() <= 1e-4 * exact.abs().max(1.0),
                        "{model}: entry ({r},{c}) analytic {exact} vs numeric {}",
                        fd[r]
                    );
                }
            }
        }
    }

    #[test]
    fn coordinate_maps_are_bijective() {
        for model in all_kinds() {
            let coords = model.coordinates();
            if matches!(model.kind(), ModelKind::Linear(_)) {
                assert!(coords.is_empty());
                continue;
            }
            assert_eq!(coords.len(), model.ambient_dim(), "{model}");
            for (idx, &(i, j)) in coords.iter().enumerate() {
                if !matches!(model.kind(), ModelKind::MinkowskiSum { .. }) {
                    assert_eq!(model.coordinate_of(i, j), Some(idx), "{model} ({i},{j})");
                }
            }
        }
        let lr = VarietyModel::low_rank(3, 4, 1).unwrap();
        assert_eq!(lr.coordinate_of(2, 1), Some(9));
        assert_eq!(lr.coordinate_of(3, 0), None);
        let sym = VarietyModel::sym_low_rank(4, 1).unwrap();
        assert_eq!(sym.coordinate_of(1, 1), Some(4));
        assert_eq!(sym.coordinate_of(3, 1), Some(6));
        let cm = VarietyModel::cayley_menger(4, 1).unwrap();
        assert_eq!(cm.coordinate_of(1, 2), Some(3));
        assert_eq!(cm.coordinate_of(2, 2), None);
        assert_eq!(cm.coordinate_of(2, 3), Some(5));
    }

    #[test]
    fn generic_points() {
        let lr = VarietyModel::low_rank(4, 4, 2).unwrap();
        let p = lr.sample_generic_point(&mut rng::seeded(7)).unwrap();
        let mat = DMatrix::from_row_slice(4, 4, p.ambient().as_slice());
        let sv = singular_values(&mat);
        assert!(sv[1] > 1e-6 * sv[0] && sv[2] < 1e-12 * sv[0]);

        let cm = VarietyModel::cayley_menger(5, 2).unwrap();
        let q = cm.sample_generic_point(&mut rng::seeded(1)).unwrap();
        assert_eq!(cm.tangent_space(&q).unwrap().dim(), 7);

        for model in all_kinds() {
            let a = model.sample_generic_point(&mut rng::seeded(3)).unwrap();
            let b = model.sample_generic_point(&mut rng::seeded(3)).unwrap();
            assert_eq!(a, b);
            let diff = (a.ambient() - model.embed(a.params()).unwrap()).amax();
            assert!(diff <= 1e-10);
        }
    }

    #[test]
    fn tangent_examples() {
        let flat = make_flat(&[vec![1.0, 1.0, 0.0]], &[0.0, 0.0, 5.0]).unwrap();
        let lin = VarietyModel::linear(flat.clone());
        let p = lin.sample_generic_point(&mut rng::seeded(2)).unwrap();
        let t = lin.tangent_space(&p).unwrap();
        assert_eq!(t.offset(), p.ambient());
        assert!(t.contains_directions(&flat, 1e-12) && flat.contains_directions(&t, 1e-12));

        let cm = VarietyModel::cayley_menger(3, 2).unwrap();
        let tri = cm
            .configuration_point(&DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.1, 0.3, 0.9]))
            .unwrap();
        let t = cm.tangent_space(&tri).unwrap();
        assert_eq!((t.dim(), t.ambient_dim()), (3, 3));
        // collinear points are not generic
        let line = cm
            .configuration_point(&DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 2.0, 0.0]))
            .unwrap();
        assert!(matches!(cm.tangent_space(&line), Err(Error::RankDeficient { .. })));

        for kind in all_kinds() {
            let p = kind.sample_generic_point(&mut rng::seeded(11)).unwrap();
            assert_eq!(kind.tangent_space(&p).unwrap().dim(), kind.dimension(), "{kind}");
        }
    }

    #[test]
    fn sum_tangent_contains_summand_tangent() {
        let x = VarietyModel::low_rank(5, 4, 1).unwrap();
        let y = VarietyModel::low_rank(5, 4, 2).unwrap();
        let sum = VarietyModel::minkowski_sum(x.clone(), y.clone()).unwrap();
        let mut g = rng::seeded(4);
        let px = x.sample_generic_point(&mut g).unwrap();
        let py = y.sample_generic_point(&mut g).unwrap();
        let mut params = px.params().to_vec();
        params.extend_from_slice(py.params());
        let pz = Point::new(sum.clone(), params).unwrap();
        assert!((pz.ambient() - (px.ambient() + py.ambient())).amax() < 1e-12);
        let tz = sum.tangent_space(&pz).unwrap();
        assert!(tz.contains_directions(&x.tangent_space(&px).unwrap(), 1e-9));
        assert!(tz.contains_directions(&y.tangent_space(&py).unwrap(), 1e-9));
    }

    #[test]
    fn coherence_at_examples() {
        let lr = VarietyModel::low_rank(2, 2, 1).unwrap();
        let ones = DMatrix::from_element(2, 1, 1.0);
        let p = lr.low_rank_point(&ones, &ones).unwrap();
        assert!((lr.coherence_at(&p).unwrap() - 0.75).abs() < 1e-12);

        let lr = VarietyModel::low_rank(3, 4, 1).unwrap();
        let e1 = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let v = DMatrix::from_column_slice(4, 1, &[0.3, -1.2, 0.7, 2.0]);
        let p = lr.low_rank_point(&e1, &v).unwrap();
        assert!((lr.coherence_at(&p).unwrap() - 1.0).abs() < 1e-12);

        let flat = max_incoherent_flat(10, 4).unwrap();
        let lin = VarietyModel::linear(flat.clone());
        for seed in 0..3 {
            let p = lin.sample_generic_point(&mut rng::seeded(seed)).unwrap();
            assert!((lin.coherence_at(&p).unwrap() - flat.coherence()).abs() < 1e-15);
        }
    }

    #[test]
    fn matrix_coherence_examples() {
        let ones = DMatrix::from_element(2, 2, 1.0);
        assert!((matrix_coherence(&ones, 1, false).unwrap() - 0.75).abs() < 1e-12);
        let diag = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!((matrix_coherence(&diag, 1, false).unwrap() - 1.0).abs() < 1e-12);
        let ones3 = DMatrix::from_element(3, 3, 1.0);
        assert!((matrix_coherence(&ones3, 1, true).unwrap() - 5.0 / 9.0).abs() < 1e-12);
        assert!(matches!(
            matrix_coherence(&DMatrix::identity(3, 3), 2, false),
            Err(Error::RankExceeded { limit: 2, found: 3 })
        ));
        assert!(matrix_coherence(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]), 2, true).is_err());
    }

    #[test]
    fn symmetric_formula_needs_isometric_embedding() {
        let u = DMatrix::from_element(3, 1, 1.0);
        let iso = VarietyModel::sym_low_rank_with(3, 1, SymEmbedding::Isometric).unwrap();
        let plain = VarietyModel::sym_low_rank(3, 1).unwrap();
        let p_iso = iso.configuration_point(&u).unwrap();
        let p_plain = plain.configuration_point(&u).unwrap();
        let formula = matrix_coherence(&DMatrix::from_element(3, 3, 1.0), 1, true).unwrap();
        assert!((iso.coherence_at(&p_iso).unwrap() - formula).abs() < 1e-12);
        // plain coordinates: leverage of a diagonal entry is 1/3 + 1/3 + 1/30 = 0.7
        assert!((plain.coherence_at(&p_plain).unwrap() - 0.7).abs() < 1e-12);

        let mut g = rng::seeded(21);
        for _ in 0..20 {
            let p = iso.sample_generic_point(&mut g).unwrap();
            let mut a = DMatrix::zeros(3, 3);
            for (idx, (i, j)) in iso.coordinates().into_iter().enumerate() {
                let w = sym_weight(SymEmbedding::Isometric, i, j);
                a[(i, j)] = p.ambient()[idx] / w;
                a[(j, i)] = p.ambient()[idx] / w;
            }
            let expected = matrix_coherence(&a, 1, true).unwrap();
            assert!((iso.coherence_at(&p).unwrap() - expected).abs() < 1e-8);
        }
    }

    #[test]
    fn coherence_formula_examples() {
        let v = VarietyModel::low_rank(3, 3, 1).unwrap().coherence_formula().unwrap();
        assert!((v.value - 5.0 / 9.0).abs() < 1e-15 && v.exact);
        let v = VarietyModel::sym_low_rank_with(3, 1, SymEmbedding::Isometric)
            .unwrap()
            .coherence_formula()
            .unwrap();
        assert!((v.value - 5.0 / 9.0).abs() < 1e-15 && v.exact);
        assert!(!VarietyModel::sym_low_rank(3, 1).unwrap().coherence_formula().unwrap().exact);
        for (m, n, r) in [(3, 5, 1), (6, 6, 2), (4, 9, 3)] {
            let model = VarietyModel::low_rank(m, n, r).unwrap();
            let v = model.coherence_formula().unwrap().value;
            assert!((v - model.dimension() as f64 / model.ambient_dim() as f64).abs() < 1e-15);
        }
        let cm = VarietyModel::cayley_menger(30, 3).unwrap().coherence_formula().unwrap();
        assert!((cm.value - 0.3).abs() < 1e-15 && !cm.exact);
        let sum = VarietyModel::minkowski_sum(
            VarietyModel::low_rank(2, 2, 1).unwrap(),
            VarietyModel::low_rank(2, 2, 1).unwrap(),
        )
        .unwrap();
        assert!(matches!(sum.coherence_formula(), Err(Error::NoFormula(_))));
        let mc = sum.coherence_monte_carlo(5, &mut rng::seeded(1)).unwrap();
        assert_eq!(mc.samples, 5);
        assert!(mc.value <= 1.0 + 1e-12);
    }

    #[test]
    fn nu_h_examples() {
        assert_eq!(nu_h(&[0.0, 0.0], 1.0).unwrap().as_slice(), &[0.0, 0.0, 1.0]);
        let v = nu_h(&[1.0, 0.0], 1.0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v - DVector::from_column_slice(&[s, 0.0, s])).amax() < 1e-15);
        let mut g = rng::seeded(5);
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| g.sample(StandardNormal)).collect();
            let h: f64 = g.sample(StandardNormal);
            assert!((nu_h(&x, h).unwrap().norm() - 1.0).abs() < 1e-12);
        }
        assert!(nu_h(&[0.0], 0.0).is_err());
    }

    #[test]
    fn tangent_limit_examples() {
        let mut g = rng::seeded(8);
        let config = DMatrix::from_fn(6, 2, |_, _| g.sample::<f64, _>(StandardNormal));
        let hs = [10.0, 31.6, 100.0, 316.0];
        let dist = tangent_limit_probe(&config, &hs).unwrap();
        assert!(dist.windows(2).all(|w| w[1] < w[0]), "{dist:?}");
        let ratio = dist[0] / dist[2];
        assert!((50.0..200.0).contains(&ratio), "{ratio}");

        let pair = DMatrix::from_row_slice(2, 1, &[0.2, 1.5]);
        for d in tangent_limit_probe(&pair, &[1.0, 10.0, 100.0]).unwrap() {
            assert!(d.abs() < 1e-7);
        }
        assert!(tangent_limit_probe(&config, &[10.0, 5.0]).is_err());
        assert!(tangent_limit_probe(&config, &[0.0, 5.0]).is_err());
    }

    #[test]
    fn descriptors_round_trip() {
        for d in [
            "lowrank:m=20,n=30,r=2",
            "cayley:n=40,d=3",
            "symlowrank:n=15,r=2",
            "symlowrank:n=15,r=2,embedding=isometric",
            "unitgram:n=15,r=3",
            "sum:lowrank:m=3,n=3,r=1+lowrank:m=3,n=3,r=1",
        ] {
            assert_eq!(parse_model(d).unwrap().to_string(), d);
        }
        let block = parse_model("block:n=16,k=4").unwrap();
        assert_eq!((block.ambient_dim(), block.dimension()), (16, 4));
        for bad in ["lowrank:m=2,n=2", "lowrank:m=2,n=2,r=1,q=3", "cayley", "linear:nofile", "symlowrank:n=3,r=1,embedding=odd"] {
            assert!(parse_model(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn linear_descriptor_reads_flat_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.flat");
        let flat = max_incoherent_flat(6, 2).unwrap();
        std::fs::write(&path, flat.to_text()).unwrap();
        let model = parse_model(&format!("linear:@{}", path.display())).unwrap();
        assert_eq!(model.dimension(), 2);
        assert!((model.coherence_formula().unwrap().value - 1.0 / 3.0).abs() < 1e-12);
    }
}
