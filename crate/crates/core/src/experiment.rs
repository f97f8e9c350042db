//! Monte Carlo phase-transition sweeps and the reference computations they
//! are compared against.
//!
//! A sweep runs `trials` independent trials. Trial `t` draws its generic
//! point and one uniform per coordinate from stream `t` of the base seed; the
//! mask at rate `ρ` is `{ i : uᵢ < ρ }`. Masks of one trial are therefore
//! nested across the grid, and since adding rows never lowers a rank, each
//! trial's verdict is monotone in `ρ`.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identify::{contraction_norm_from_basis, identifiable_from_basis};
use crate::linflat::Flat;
use crate::rng::{self, RNG_NAME};
use crate::sampling::{draw_uniforms, SampleMask};
use crate::variety::{parse_model, VarietyModel};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

pub const CSV_COLUMNS: [&str; 6] = ["rho", "trials", "successes", "success_rate", "ci_low", "ci_high"];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub model: String,
    pub rho_grid: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    pub tol: f64,
    pub lambda: f64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rho_grid.is_empty() {
            return Err(Error::invalid("rho grid is empty"));
        }
        if self.rho_grid.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
            return Err(Error::invalid("rho grid values must lie in (0, 1]"));
        }
        if self.rho_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("rho grid must be strictly increasing"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be positive"));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::invalid("tolerance must lie in (0, 1)"));
        }
        if !(self.lambda >= 1.0) {
            return Err(Error::invalid("lambda must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub rho: f64,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl SweepRecord {
    pub fn new(rho: f64, trials: usize, successes: usize) -> Self {
        assert!(trials > 0 && successes <= trials);
        let (ci_low, ci_high) = wilson_interval(successes, trials);
        SweepRecord {
            rho,
            trials,
            successes,
            success_rate: successes as f64 / trials as f64,
            ci_low,
            ci_high,
        }
    }
}

/// 95% Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // at p = 0 or 1 the bound equals p exactly; rounding could push it past
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRecord>> {
    let model = parse_model(&config.model)?;
    run_sweep_on(&model, config)
}

/// Runs a sweep on an already constructed model; `config.model` is only
/// used for reporting.
pub fn run_sweep_on(model: &VarietyModel, config: &SweepConfig) -> Result<Vec<SweepRecord>> {
    config.validate()?;
    let outcomes: Vec<Vec<bool>> = (0..config.trials)
        .into_par_iter()
        .map(|t| trial_outcomes(model, config, t as u64))
        .collect::<Result<_>>()?;
    Ok(config
        .rho_grid
        .iter()
        .enumerate()
        .map(|(ri, &rho)| {
            let successes = outcomes.iter().filter(|o| o[ri]).count();
            SweepRecord::new(rho, config.trials, successes)
        })
        .collect())
}

fn trial_outcomes(model: &VarietyModel, config: &SweepConfig, trial: u64) -> Result<Vec<bool>> {
    let mut rng = rng::stream(config.base_seed, trial);
    let point = model.sample_generic_point(&mut rng)?;
    let tangent = model.tangent_space(&point)?;
    let uniforms = draw_uniforms(model.ambient_dim(), &mut rng);
    let dim = tangent.dim();
    let mut out = Vec::with_capacity(config.rho_grid.len());
    let mut settled = false;
    for &rho in &config.rho_grid {
        if settled {
            out.push(true);
            continue;
        }
        let mask = SampleMask::from_uniforms(&uniforms, rho)?;
        // fewer observed coordinates than the dimension can never reach full rank
        let ok = mask.len() >= dim && identifiable_from_basis(tangent.basis(), &mask, config.tol)?.identifiable;
        settled = ok;
        out.push(ok);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdEstimate {
    /// `None` when no pair of adjacent grid points brackets 50%.
    pub rho_half: Option<f64>,
    pub method: &'static str,
}

/// First crossing of a 50% success rate, by linear interpolation between the
/// bracketing grid points.
pub fn estimate_threshold(records: &[SweepRecord]) -> ThresholdEstimate {
    let rho_half = records.windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        if a.success_rate < 0.5 && b.success_rate >= 0.5 {
            let frac = (0.5 - a.success_rate) / (b.success_rate - a.success_rate);
            Some(a.rho + frac * (b.rho - a.rho))
        } else {
            None
        }
    });
    ThresholdEstimate {
        rho_half,
        method: "linear interpolation between bracketing grid points",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Natural,
    Two,
    Ten,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Two => x.log2(),
            LogBase::Ten => x.log10(),
        }
    }
}

impl std::str::FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "e" | "ln" | "natural" => Ok(LogBase::Natural),
            "2" | "log2" => Ok(LogBase::Two),
            "10" | "log10" => Ok(LogBase::Ten),
            other => Err(Error::parse("log base", other.to_string())),
        }
    }
}

/// `min(1, c · λ · coh(X) · log(ambient_dim))` with the model's closed-form
/// (or bound) coherence.
pub fn theoretical_rate(model: &VarietyModel, lambda: f64, c: f64, base: LogBase) -> Result<f64> {
    if !(lambda >= 1.0) {
        return Err(Error::invalid("lambda must be at least 1"));
    }
    if !(c > 0.0) {
        return Err(Error::invalid("constant must be positive"));
    }
    let coh = model.coherence_formula()?.value;
    Ok((c * lambda * coh * base.log(model.ambient_dim() as f64)).min(1.0))
}

/// Probability that every one of the `k` disjoint blocks of size `n/k`
/// receives at least one observed coordinate: `(1 − (1 − ρ)^{n/k})^k`.
pub fn coupon_reference(n: usize, k: usize, rho: f64) -> Result<f64> {
    if k == 0 || n % k != 0 {
        return Err(Error::invalid(format!("k must divide n (n={n}, k={k})")));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::invalid(format!("rho {rho} outside [0, 1]")));
    }
    let block = (n / k) as i32;
    Ok((1.0 - (1.0 - rho).powi(block)).powi(k as i32))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RudelsonRow {
    pub rho: f64,
    pub mean_norm: f64,
    pub max_leverage: f64,
    /// `sqrt(ln n / ρ) · sqrt(max leverage)`
    pub bound_shape: f64,
}

/// Mean contraction norm of the flat under Bernoulli masks. Masks are coupled
/// across the grid: each trial draws one uniform vector and thresholds it at
/// every `ρ`.
pub fn rudelson_probe<R: Rng + ?Sized>(
    flat: &Flat,
    rho_grid: &[f64],
    trials: usize,
    rng: &mut R,
) -> Result<Vec<RudelsonRow>> {
    if trials == 0 {
        return Err(Error::invalid("trials must be positive"));
    }
    let n = flat.ambient_dim();
    let max_leverage = flat.coherence();
    let mut sums = vec![0.0; rho_grid.len()];
    for _ in 0..trials {
        let uniforms = draw_uniforms(n, rng);
        for (slot, &rho) in sums.iter_mut().zip(rho_grid) {
            let mask = SampleMask::from_uniforms(&uniforms, rho)?;
            *slot += contraction_norm_from_basis(flat.basis(), &mask, rho)?;
        }
    }
    Ok(rho_grid
        .iter()
        .zip(sums)
        .map(|(&rho, sum)| RudelsonRow {
            rho,
            mean_norm: sum / trials as f64,
            max_leverage,
            bound_shape: ((n as f64).ln() / rho).sqrt() * max_leverage.sqrt(),
        })
        .collect())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid("slope needs at least two paired values"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::invalid("log-log slope needs positive values"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("x values must not all coincide"));
    }
    Ok(sxy / sxx)
}

/// Largest vertex count accepted by [`laman_brute_oracle`].
pub const LAMAN_MAX_VERTICES: usize = 7;

/// Generic rigidity in the plane by exhaustive search: true iff some set of
/// `2n − 3` edges induces at most `2n′ − 3` edges on every vertex subset of
/// size `n′ ≥ 2`.
pub fn laman_brute_oracle(n: usize, edges: &[(usize, usize)]) -> Result<bool> {
    if n > LAMAN_MAX_VERTICES {
        return Err(Error::invalid(format!(
            "brute-force rigidity is limited to n <= {LAMAN_MAX_VERTICES}, got {n}"
        )));
    }
    let mut seen = std::collections::HashSet::new();
    for &(a, b) in edges {
        if a == b || a >= n || b >= n {
            return Err(Error::invalid(format!("invalid edge ({a}, {b}) for {n} vertices")));
        }
        if !seen.insert((a.min(b), a.max(b))) {
            return Err(Error::invalid(format!("duplicate edge ({a}, {b})")));
        }
    }
    if n <= 1 {
        return Ok(true);
    }
    let need = 2 * n - 3;
    let m = edges.len();
    if m < need {
        return Ok(false);
    }

    // edge bitmask induced by each vertex subset with at least two vertices
    let constraints: Vec<(u32, u32)> = (0u32..1 << n)
        .filter(|s| s.count_ones() >= 2)
        .map(|s| {
            let inside = edges
                .iter()
                .enumerate()
                .filter(|(_, (a, b))| s >> a & 1 == 1 && s >> b & 1 == 1)
                .fold(0u32, |acc, (i, _)| acc | 1 << i);
            (inside, 2 * s.count_ones() - 3)
        })
        .collect();

    // Gosper's hack over all `need`-subsets of the m edges
    let mut subset: u32 = (1 << need) - 1;
    let limit: u64 = 1 << m;
    while (subset as u64) < limit {
        if constraints
            .iter()
            .all(|&(inside, cap)| (subset & inside).count_ones() <= cap)
        {
            return Ok(true);
        }
        let low = subset & subset.wrapping_neg();
        let ripple = subset + low;
        subset = (((ripple ^ subset) >> 2) / low) | ripple;
        if ripple == 0 {
            break;
        }
    }
    Ok(false)
}

/// Metadata block written as `# key=value` lines above the CSV body.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepMetadata {
    pub model: String,
    pub base_seed: u64,
    pub trials: usize,
    pub tol: f64,
    pub lambda: f64,
    pub rho_grid: Vec<f64>,
    pub rng: String,
    pub version: String,
    /// Additional `key=value` pairs (e.g. `coherence`, `theoretical_rate`),
    /// written after the fixed keys in the given order.
    pub extra: Vec<(String, String)>,
}

impl SweepMetadata {
    pub fn from_config(config: &SweepConfig) -> Self {
        SweepMetadata {
            model: config.model.clone(),
            base_seed: config.base_seed,
            trials: config.trials,
            tol: config.tol,
            lambda: config.lambda,
            rho_grid: config.rho_grid.clone(),
            rng: RNG_NAME.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            extra: Vec::new(),
        }
    }

    pub fn extra(&self, key: &str) -> Option<&str> {
        self.extra.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

pub fn to_csv_string(meta: &SweepMetadata, records: &[SweepRecord]) -> Result<String> {
    let mut out = Vec::new();
    writeln!(out, "# model={}", meta.model)?;
    writeln!(out, "# base_seed={}", meta.base_seed)?;
    writeln!(out, "# trials={}", meta.trials)?;
    writeln!(out, "# tol={:?}", meta.tol)?;
    writeln!(out, "# lambda={:?}", meta.lambda)?;
    let grid: Vec<String> = meta.rho_grid.iter().map(|r| format!("{r:?}")).collect();
    writeln!(out, "# rho_grid={}", grid.join(","))?;
    writeln!(out, "# rng={}", meta.rng)?;
    writeln!(out, "# version={}", meta.version)?;
    for (k, v) in &meta.extra {
        writeln!(out, "# {k}={v}")?;
    }
    {
        let mut w = csv::Writer::from_writer(&mut out);
        for r in records {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    String::from_utf8(out).map_err(|e| Error::invalid(e.to_string()))
}

pub fn write_csv(path: &Path, meta: &SweepMetadata, records: &[SweepRecord]) -> Result<()> {
    fs::write(path, to_csv_string(meta, records)?)?;
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<(SweepMetadata, Vec<SweepRecord>)> {
    let mut fields: Vec<(String, String)> = Vec::new();
    let mut body_start = 0;
    for (i, line) in text.lines().enumerate() {
        let Some(rest) = line.strip_prefix('#') else {
            body_start = i;
            break;
        };
        let (k, v) = rest.trim_start().split_once('=').ok_or(Error::Malformed {
            line: i + 1,
            detail: "metadata line must be `# key=value`".into(),
        })?;
        fields.push((k.trim().to_string(), v.to_string()));
        body_start = i + 1;
    }
    let take = |key: &str| -> Result<String> {
        fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.clone())
            .ok_or(Error::Malformed {
                line: 1,
                detail: format!("missing metadata key {key:?}"),
            })
    };
    let num = |key: &str| -> Result<f64> {
        take(key)?.parse().map_err(|_| Error::Malformed {
            line: 1,
            detail: format!("bad numeric metadata {key:?}"),
        })
    };
    let fixed = ["model", "base_seed", "trials", "tol", "lambda", "rho_grid", "rng", "version"];
    let rho_grid = take("rho_grid")?
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::Malformed {
            line: 1,
            detail: "bad rho_grid".into(),
        })?;
    let meta = SweepMetadata {
        model: take("model")?,
        base_seed: take("base_seed")?.parse().map_err(|_| Error::Malformed {
            line: 1,
            detail: "bad base_seed".into(),
        })?,
        trials: num("trials")? as usize,
        tol: num("tol")?,
        lambda: num("lambda")?,
        rho_grid,
        rng: take("rng")?,
        version: take("version")?,
        extra: fields
            .iter()
            .filter(|(k, _)| !fixed.contains(&k.as_str()))
            .cloned()
            .collect(),
    };

    let body: String = text.lines().skip(body_start).map(|l| format!("{l}\n")).collect();
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_COLUMNS {
        return Err(Error::Malformed {
            line: body_start + 1,
            detail: format!("expected columns {}", CSV_COLUMNS.join(",")),
        });
    }
    let mut records = Vec::new();
    for (i, row) in reader.deserialize::<SweepRecord>().enumerate() {
        let line = body_start + 2 + i;
        let r = row.map_err(|e| Error::Malformed {
            line,
            detail: e.to_string(),
        })?;
        if r.trials == 0 || r.successes > r.trials {
            return Err(Error::Malformed {
                line,
                detail: format!("successes {} exceed trials {}", r.successes, r.trials),
            });
        }
        if (r.success_rate - r.successes as f64 / r.trials as f64).abs() > 1e-12 {
            return Err(Error::Malformed {
                line,
                detail: "success_rate differs from successes/trials".into(),
            });
        }
        records.push(r);
    }
    Ok((meta, records))
}

pub fn read_csv(path: &Path) -> Result<(SweepMetadata, Vec<SweepRecord>)> {
    parse_csv(&fs::read_to_string(path)?)
}
