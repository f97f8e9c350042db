//! The `cohlab` command line.
//!
//! Every subcommand is a pure function of its argument list (plus an optional
//! `--config` file). Results go to standard output as JSON, CSV or flat text;
//! the resolved configuration is logged to standard error.

use std::collections::HashSet;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{CommandFactory, Parser, Subcommand};
use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiment::{
    estimate_threshold, laman_brute_oracle, loglog_slope, rudelson_probe, run_sweep_on, theoretical_rate,
    to_csv_string, LogBase, SweepConfig, SweepMetadata,
};
use crate::identify::{identifiable_linear, identifiable_mask, DEFAULT_TOL};
use crate::linflat::max_incoherent_flat;
use crate::rng;
use crate::sampling::{draw_mask, generic_linear_map, parse_mask};
use crate::variety::{parse_model, tangent_limit_probe, ModelKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable capping the worker threads of sweeps (0 = automatic).
pub const THREADS_ENV: &str = "COHLAB_THREADS";

const INDEX_HELP: &str = "\
Coordinate indices (used by --mask and in all outputs):
  lowrank:m=M,n=N,r=R      entry (i,j) -> i*N + j (row-major)
  symlowrank:n=N,r=R       entries i<=j in lexicographic order (0,0),(0,1),..,(0,N-1),(1,1),..
  unitgram:n=N,r=R         entries i<j in lexicographic order (0,1),(0,2),..,(1,2),..
  cayley:n=N,d=D           entries i<j in lexicographic order (0,1),(0,2),..,(1,2),..
  linear:@FILE, block:n=N,k=K, frame:n=N,k=K   coordinates of the ambient space
  sum:A+B                  coordinates of A (which must match B)

Config files: one key=value per line, '#' starts a comment; keys are long
flag names without dashes. Explicit flags win over file values.
Environment: COHLAB_THREADS caps sweep parallelism (0 = automatic).";

#[derive(Debug, Parser)]
#[command(name = "cohlab", version, about = "Coherence and sampling-rate experiments on signal varieties", after_help = INDEX_HELP)]
struct Cli {
    /// key=value file merged beneath the explicit flags
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Coherence of a model: closed form, at a generic point, or a Monte Carlo infimum
    #[command(after_help = INDEX_HELP)]
    Coherence {
        #[arg(long)]
        model: String,
        /// closed-form value (or bound) instead of a sampled point
        #[arg(long, conflicts_with = "monte_carlo")]
        formula: bool,
        /// include the leverage vector of the sampled tangent flat
        #[arg(long, conflicts_with = "formula")]
        leverage: bool,
        /// minimum over this many generic points
        #[arg(long, value_name = "SAMPLES")]
        monte_carlo: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Identifiability of a generic point from a mask or a generic linear map
    #[command(after_help = INDEX_HELP)]
    Identify {
        #[arg(long)]
        model: String,
        /// comma-separated coordinate indices
        #[arg(long, conflicts_with_all = ["rho", "measurements"])]
        mask: Option<String>,
        /// draw a Bernoulli mask at this rate
        #[arg(long, conflicts_with = "measurements")]
        rho: Option<f64>,
        /// use a generic linear map with this many measurements
        #[arg(long)]
        measurements: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Phase-transition sweep written as CSV
    #[command(after_help = INDEX_HELP)]
    Sweep {
        #[arg(long)]
        model: String,
        /// `start:stop:step` or a comma-separated list
        #[arg(long)]
        rho_grid: String,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// oversampling factor recorded with the theoretical rate
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// constant in the theoretical rate `c·λ·coh·log(n)`
        #[arg(long, default_value_t = 1.0)]
        rate_constant: f64,
        /// logarithm of the theoretical rate: e, 2 or 10
        #[arg(long, default_value = "e")]
        log_base: String,
        /// output file (standard output when absent)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Maximally incoherent k-flat in n-space, as a flat file
    Frame {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grassmann distance between distance and lifted Gram tangent flats as h grows
    TangentLimit {
        /// number of points
        #[arg(long, default_value_t = 6)]
        n: usize,
        /// dimension of the configuration
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// comma-separated increasing lift heights
        #[arg(long, default_value = "10,31.6,100,316")]
        h: String,
        /// configuration file, one whitespace-separated point per line
        /// (overrides --n, --d and the random draw)
        #[arg(long, value_name = "FILE")]
        positions: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Mean contraction norm of a maximally incoherent flat under Bernoulli masks
    Rudelson {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        rho_grid: String,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Planar generic rigidity of a small graph by exhaustive Laman search
    RigidityOracle {
        #[arg(long)]
        n: usize,
        /// edges as `a-b` pairs separated by commas
        #[arg(long, default_value = "")]
        edges: String,
    },
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

/// Runs the command line and returns the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv = match merge_config(argv) {
        Ok(a) => a,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{rendered}")
            } else {
                write!(out, "{rendered}")
            };
            return code;
        }
    };
    let _ = writeln!(err, "cohlab: resolved {:?}", cli.command);
    match dispatch(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Run(e)) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_USAGE
            }
        }
    }
}

/// Appends `--key value` for every config-file entry whose flag is not
/// given explicitly.
fn merge_config(argv: Vec<OsString>) -> std::result::Result<Vec<OsString>, String> {
    let strings: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut path = None;
    let mut sub = None;
    let mut i = 1;
    while i < strings.len() {
        let a = &strings[i];
        if a == "--config" {
            path = strings.get(i + 1).cloned();
            i += 2;
            continue;
        }
        if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else if sub.is_none() && !a.starts_with('-') {
            sub = Some(a.clone());
        }
        i += 1;
    }
    let (Some(path), Some(sub)) = (path, sub) else {
        return Ok(argv);
    };
    let command = Cli::command();
    let Some(subcmd) = command.find_subcommand(&sub) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let explicit: HashSet<&str> = strings
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a))
        .collect();
    let mut merged = argv.clone();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| format!("{path}:{}: expected key=value", lineno + 1))?;
        let arg = subcmd
            .get_arguments()
            .find(|a| a.get_long() == Some(key))
            .ok_or_else(|| format!("{path}:{}: unknown key {key:?} for {sub}", lineno + 1))?;
        if explicit.contains(key) {
            continue;
        }
        if arg.get_action().takes_values() {
            merged.push(format!("--{key}").into());
            merged.push(value.into());
        } else {
            match value {
                "true" => merged.push(format!("--{key}").into()),
                "false" => {}
                _ => return Err(format!("{path}:{}: {key} expects true or false", lineno + 1)),
            }
        }
    }
    Ok(merged)
}

fn require_seed(seed: Option<u64>, why: &str) -> std::result::Result<u64, Failure> {
    seed.ok_or_else(|| Failure::Usage(format!("--seed is required {why}")))
}

fn json<T: Serialize>(out: &mut dyn Write, value: &T) -> std::result::Result<(), Failure> {
    let text = serde_json::to_string(value).map_err(|e| Failure::Usage(e.to_string()))?;
    writeln!(out, "{text}").map_err(Error::from)?;
    Ok(())
}

fn emit(out: &mut dyn Write, path: Option<&PathBuf>, text: &str) -> std::result::Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(Error::from)?,
        None => out.write_all(text.as_bytes()).map_err(Error::from)?,
    }
    Ok(())
}

fn thread_pool() -> std::result::Result<rayon::ThreadPool, Failure> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Failure::Usage(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::Usage(e.to_string()))
}

/// Parses `start:stop:step` (inclusive of `stop` up to rounding) or a comma list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = |what: &str| Error::parse("grid", format!("{what} in {text:?}"));
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [a, b, step] => {
            let a: f64 = a.trim().parse().map_err(|_| bad("bad start"))?;
            let b: f64 = b.trim().parse().map_err(|_| bad("bad stop"))?;
            let step: f64 = step.trim().parse().map_err(|_| bad("bad step"))?;
            if !(step > 0.0) || b < a {
                return Err(bad("empty range"));
            }
            let count = ((b - a) / step + 1e-9).floor() as usize;
            // rounding keeps 0.1:1.0:0.1 from producing 0.30000000000000004
            Ok((0..=count)
                .map(|i| ((a + i as f64 * step) * 1e12).round() / 1e12)
                .collect())
        }
        [_] => text
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad("bad value")))
            .collect(),
        _ => Err(bad("expected start:stop:step or a comma list")),
    }
}

fn parse_edges(text: &str) -> Result<Vec<(usize, usize)>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|e| {
            let (a, b) = e
                .split_once('-')
                .ok_or_else(|| Error::parse("edge list", format!("expected a-b, got {e:?}")))?;
            let a = a.trim().parse().map_err(|_| Error::parse("edge list", e.to_string()))?;
            let b = b.trim().parse().map_err(|_| Error::parse("edge list", e.to_string()))?;
            Ok((a, b))
        })
        .collect()
}

fn read_positions(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Malformed {
                line: i + 1,
                detail: e.to_string(),
            })?;
        if rows.first().is_some_and(|first| first.len() != row.len()) {
            return Err(Error::Malformed {
                line: i + 1,
                detail: "all points need the same dimension".into(),
            });
        }
        rows.push(row);
    }
    let d = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || d == 0 {
        return Err(Error::invalid("configuration file has no points"));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), d, rows.into_iter().flatten()))
}

#[derive(Serialize)]
struct PointCoherence {
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    leverage: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct LimitPair {
    h: f64,
    distance: f64,
}

#[derive(Serialize)]
struct LimitReport {
    pairs: Vec<LimitPair>,
    loglog_slope: f64,
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> std::result::Result<(), Failure> {
    match command {
        Command::Coherence {
            model,
            formula,
            leverage,
            monte_carlo,
            seed,
        } => {
            let model = parse_model(&model)?;
            if formula {
                return json(out, &model.coherence_formula()?);
            }
            if let Some(samples) = monte_carlo {
                let seed = require_seed(seed, "for --monte-carlo")?;
                return json(out, &model.coherence_monte_carlo(samples, &mut rng::seeded(seed))?);
            }
            let tangent = match model.kind() {
                ModelKind::Linear(flat) => flat.clone(),
                _ => {
                    let seed = require_seed(seed, "to draw a generic point")?;
                    let point = model.sample_generic_point(&mut rng::seeded(seed))?;
                    model.tangent_space(&point)?
                }
            };
            json(
                out,
                &PointCoherence {
                    value: tangent.coherence(),
                    leverage: leverage.then(|| tangent.leverage_scores().iter().copied().collect()),
                },
            )
        }
        Command::Identify {
            model,
            mask,
            rho,
            measurements,
            seed,
            tol,
        } => {
            let model = parse_model(&model)?;
            let seed = require_seed(seed, "to draw a generic point")?;
            let mut rng = rng::seeded(seed);
            let point = model.sample_generic_point(&mut rng)?;
            let verdict = if let Some(m) = measurements {
                let map = generic_linear_map(model.ambient_dim(), m, &mut rng)?;
                identifiable_linear(&model, &point, &map, tol)?
            } else {
                let mask = match (mask, rho) {
                    (Some(list), None) => parse_mask(&list, model.ambient_dim())?,
                    (None, Some(r)) => draw_mask(model.ambient_dim(), r, &mut rng)?,
                    _ => return Err(Failure::Usage("one of --mask, --rho or --measurements is required".into())),
                };
                identifiable_mask(&model, &point, &mask, tol)?
            };
            json(out, &verdict)
        }
        Command::Sweep {
            model: descriptor,
            rho_grid,
            trials,
            seed,
            tol,
            lambda,
            rate_constant,
            log_base,
            out: path,
        } => {
            let model = parse_model(&descriptor)?;
            let base: LogBase = log_base.parse()?;
            let config = SweepConfig {
                model: descriptor,
                rho_grid: parse_grid(&rho_grid)?,
                trials,
                base_seed: seed,
                tol,
                lambda,
            };
            config.validate()?;
            let records = thread_pool()?.install(|| run_sweep_on(&model, &config))?;
            let mut meta = SweepMetadata::from_config(&config);
            if let Ok(coh) = model.coherence_formula() {
                meta.extra.push(("coherence".into(), format!("{:?}", coh.value)));
                meta.extra.push(("coherence_exact".into(), coh.exact.to_string()));
                let rate = theoretical_rate(&model, lambda, rate_constant, base)?;
                meta.extra.push(("rate_constant".into(), format!("{rate_constant:?}")));
                meta.extra.push(("log_base".into(), log_base.clone()));
                meta.extra.push(("theoretical_rate".into(), format!("{rate:?}")));
            }
            let threshold = estimate_threshold(&records);
            match threshold.rho_half {
                Some(r) => meta.extra.push(("rho_half".into(), format!("{r:?}"))),
                None => meta.extra.push(("rho_half".into(), "not_bracketed".into())),
            }
            let _ = writeln!(err, "cohlab: {} grid points x {} trials done", records.len(), trials);
            emit(out, path.as_ref(), &to_csv_string(&meta, &records)?)
        }
        Command::Frame { n, k, out: path } => {
            let flat = max_incoherent_flat(n, k)?;
            emit(out, path.as_ref(), &flat.to_text())
        }
        Command::TangentLimit {
            n,
            d,
            h,
            positions,
            seed,
        } => {
            let h_values = parse_grid(&h)?;
            let config = match positions {
                Some(path) => read_positions(&fs::read_to_string(path).map_err(Error::from)?)?,
                None => {
                    let mut rng = rng::seeded(require_seed(seed, "unless --positions is given")?);
                    DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng))
                }
            };
            let distances = tangent_limit_probe(&config, &h_values)?;
            let slope = loglog_slope(&h_values, &distances)?;
            json(
                out,
                &LimitReport {
                    pairs: h_values
                        .iter()
                        .zip(&distances)
                        .map(|(&h, &distance)| LimitPair { h, distance })
                        .collect(),
                    loglog_slope: slope,
                },
            )
        }
        Command::Rudelson {
            n,
            k,
            rho_grid,
            trials,
            seed,
        } => {
            let flat = max_incoherent_flat(n, k)?;
            let grid = parse_grid(&rho_grid)?;
            let rows = rudelson_probe(&flat, &grid, trials, &mut rng::seeded(seed))?;
            let mut text = String::from("rho,mean_norm,max_leverage,bound_shape\n");
            for r in rows {
                text.push_str(&format!(
                    "{:?},{:?},{:?},{:?}\n",
                    r.rho, r.mean_norm, r.max_leverage, r.bound_shape
                ));
            }
            emit(out, None, &text)
        }
        Command::RigidityOracle { n, edges } => {
            let rigid = laman_brute_oracle(n, &parse_edges(&edges)?)?;
            json(out, &rigid)
        }
    }
}

/// Entry point of the binary.
pub fn main_exit() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
