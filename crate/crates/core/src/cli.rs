//! Command-line front end: JSON model configuration in, CSV and JSON report out.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::json;
use thiserror::Error;

use crate::checker::{
    simulate_until, CheckError, Evaluator, FixpointReport, McEstimate, Model, ModelError,
    OperatorReport, SatSet, SolverOptions,
};
use crate::formula::{parse, ParseError, StateFormula};
use crate::kernel::{affine_gaussian_kernel, finite_kernel, Grid, KernelError, Region};
use crate::models::{self, FisheryStrategy, InvalidPortfolio, PortfolioStrategy};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    /// Reserved for command-line usage errors (clap).
    pub const USAGE: i32 = 2;
    pub const CONFIG: i32 = 3;
    pub const SYNTAX: i32 = 4;
    pub const UNBOUND_ATOM: i32 = 5;
    pub const NOT_CONVERGED: i32 = 6;
    pub const CHECK: i32 = 7;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("formula {0}")]
    Syntax(#[from] ParseError),
    #[error("{0}")]
    UnboundAtom(String),
    #[error("{0}")]
    NotConverged(String),
    #[error("{0}")]
    Check(CheckError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => exit::IO,
            CliError::Config(_) => exit::CONFIG,
            CliError::Syntax(_) => exit::SYNTAX,
            CliError::UnboundAtom(_) => exit::UNBOUND_ATOM,
            CliError::NotConverged(_) => exit::NOT_CONVERGED,
            CliError::Check(_) => exit::CHECK,
        }
    }
}

impl From<CheckError> for CliError {
    fn from(e: CheckError) -> Self {
        match e {
            CheckError::UnboundAtom(_) => CliError::UnboundAtom(e.to_string()),
            CheckError::NotConverged { .. } => CliError::NotConverged(e.to_string()),
            other => CliError::Check(other),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<KernelError> for CliError {
    fn from(e: KernelError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<InvalidPortfolio> for CliError {
    fn from(e: InvalidPortfolio) -> Self {
        CliError::Config(e.to_string())
    }
}

/// Interval endpoint: a number, or the strings `"-inf"` / `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Endpoint(pub f64);

impl Serialize for Endpoint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else if self.0 == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Endpoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Endpoint(v)),
            Raw::Str(s) => match s.as_str() {
                "inf" | "+inf" => Ok(Endpoint(f64::INFINITY)),
                "-inf" => Ok(Endpoint(f64::NEG_INFINITY)),
                other => Err(serde::de::Error::custom(format!(
                    "invalid endpoint `{other}`, expected a number, \"-inf\" or \"inf\""
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Fishery {
        strategy: FisheryStrategy,
    },
    Retirement {
        a: f64,
        b: f64,
        c: f64,
    },
    Finite {
        matrix: Vec<Vec<f64>>,
        state_values: Vec<f64>,
    },
    /// `x' = mean[0] + mean[1] x + (std[0] + std[1] x) Z`, with `Z` standard normal.
    AffineGaussian {
        mean: [f64; 2],
        std: [f64; 2],
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

fn default_true() -> String {
    "true".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default)]
    pub x0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// State formula that must hold until `psi` is reached.
    #[serde(default = "default_true")]
    pub phi: String,
    pub psi: String,
}

/// Contents of a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    /// Extra or overriding regions; built-in models provide `safe` and `target`.
    #[serde(default)]
    pub regions: BTreeMap<String, Vec<[Endpoint; 2]>>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSpec>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn solver_options(
        &self,
        tol: Option<f64>,
        max_iter: Option<usize>,
    ) -> Result<SolverOptions, CliError> {
        let defaults = SolverOptions::default();
        let opts = SolverOptions {
            tol: tol.or(self.solver.tol).unwrap_or(defaults.tol),
            max_iter: max_iter
                .or(self.solver.max_iter)
                .unwrap_or(defaults.max_iter),
        };
        if !(opts.tol > 0.0 && opts.tol.is_finite()) {
            return Err(CliError::Config(format!(
                "solver tol must be positive, got {}",
                opts.tol
            )));
        }
        if opts.max_iter < 1 {
            return Err(CliError::Config(
                "solver max_iter must be at least 1".into(),
            ));
        }
        Ok(opts)
    }

    fn grid(&self) -> Result<Grid, CliError> {
        let spec = match (&self.grid, &self.model) {
            (Some(g), _) => *g,
            (None, ModelSpec::Fishery { .. }) => GridSpec {
                lo: models::FISHERY_GRID.0,
                hi: models::FISHERY_GRID.1,
                cells: models::FISHERY_DEFAULT_CELLS,
            },
            (None, ModelSpec::Retirement { .. }) => GridSpec {
                lo: 0.0,
                hi: models::RETIREMENT_TARGET,
                cells: models::RETIREMENT_DEFAULT_CELLS,
            },
            (None, _) => {
                return Err(CliError::Config(
                    "`grid` is required for this model kind".into(),
                ))
            }
        };
        Ok(Grid::new(spec.lo, spec.hi, spec.cells)?)
    }

    /// Builds the model described by this configuration.
    pub fn build_model(&self) -> Result<Model, CliError> {
        let grid = self.grid()?;
        let (kernel, mut regions) = match &self.model {
            ModelSpec::Fishery { strategy } => {
                (models::fishery_kernel(*strategy), models::fishery_regions())
            }
            ModelSpec::Retirement { a, b, c } => (
                models::retirement_kernel(PortfolioStrategy::new(*a, *b, *c)?),
                models::retirement_regions(),
            ),
            ModelSpec::Finite {
                matrix,
                state_values,
            } => (
                finite_kernel(matrix.clone(), state_values.clone())?,
                BTreeMap::new(),
            ),
            ModelSpec::AffineGaussian { mean, std } => {
                let (m0, m1) = (mean[0], mean[1]);
                let (s0, s1) = (std[0], std[1]);
                (
                    affine_gaussian_kernel(move |x| m0 + m1 * x, move |x| (s0 + s1 * x).abs()),
                    BTreeMap::new(),
                )
            }
        };
        for (name, intervals) in &self.regions {
            let region = Region::new(intervals.iter().map(|[lo, hi]| (lo.0, hi.0)))?;
            regions.insert(name.clone(), region);
        }
        Ok(Model::new(kernel, grid, regions)?)
    }
}

/// Formats with 12 significant digits in plain decimal notation.
pub fn format_sig12(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{:.11}", if v == 0.0 { 0.0 } else { v });
    }
    // the exponent of the rounded scientific form accounts for carries (9.99.. -> 10.0..)
    let sci = format!("{v:.11e}");
    let exponent: i32 = sci
        .rsplit('e')
        .next()
        .and_then(|e| e.parse().ok())
        .unwrap_or(0);
    let decimals = (11 - exponent).max(0) as usize;
    format!("{v:.decimals$}")
}

fn write_csv(path: &Path, model: &Model, values: &[f64], sat: &SatSet) -> Result<(), CliError> {
    let io = |source: std::io::Error| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| io(e.into()))?;
    w.write_record(["cell_index", "cell_center", "value", "satisfied"])
        .map_err(|e| io(e.into()))?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([
            i.to_string(),
            format_sig12(model.grid().center(i)),
            format_sig12(*v),
            u8::from(sat.mask[i]).to_string(),
        ])
        .map_err(|e| io(e.into()))?;
    }
    w.flush().map_err(io)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Inputs of a `check` run.
#[derive(Debug, Clone)]
pub struct CheckRequest<'a> {
    pub config_path: &'a Path,
    pub formula: &'a str,
    pub out_csv: &'a Path,
    pub report_path: &'a Path,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

fn sat_json(sat: &SatSet, model: &Model) -> serde_json::Value {
    json!({
        "intervals": sat.intervals(model.grid()).iter().map(|(a, b)| [a, b]).collect::<Vec<_>>(),
        "extents": sat
            .extents(model.grid())
            .into_iter()
            .map(|(a, b)| [Endpoint(a), Endpoint(b)])
            .collect::<Vec<_>>(),
        "cells": sat.count(),
        "lower_tail": sat.lower_tail,
        "upper_tail": sat.upper_tail,
    })
}

/// Top-level operator diagnostics: the last operator evaluated is the outermost.
fn top_level(
    reports: &[OperatorReport],
    f: &StateFormula,
) -> (Option<f64>, Option<FixpointReport>) {
    if !matches!(f, StateFormula::Prob { .. }) {
        return (None, None);
    }
    match reports.last() {
        Some(r) => (r.contraction_factor, r.fixpoint.clone()),
        None => (None, None),
    }
}

/// Runs `check`: writes the CSV and the report. On non-convergence only the
/// report is written.
pub fn run(req: &CheckRequest<'_>) -> Result<(), CliError> {
    let config = RunConfig::load(req.config_path)?;
    let formula = parse(req.formula)?;
    let opts = config.solver_options(req.tol, req.max_iter)?;
    let model = config.build_model()?;
    if let Some(name) = formula
        .atom_names()
        .into_iter()
        .find(|a| model.atom(a).is_none())
    {
        return Err(CheckError::UnboundAtom(name).into());
    }
    let desugared = formula.desugar();
    let mut evaluator = Evaluator::new(&model, opts);
    let outcome = evaluator.evaluate(&formula);
    let inputs = json!({
        "config": config,
        "formula": req.formula,
        "canonical_formula": desugared.to_string(),
        "solver": { "tol": opts.tol, "max_iter": opts.max_iter },
    });
    let grid = model.grid();
    let grid_json =
        json!({ "lo": grid.lo(), "hi": grid.hi(), "cells": grid.cells(), "width": grid.width() });
    match outcome {
        Ok(eval) => {
            let (alpha, fixpoint) = top_level(&eval.operators, &desugared);
            let report = json!({
                "status": "ok",
                "inputs": inputs,
                "grid": grid_json,
                "satisfaction_set": sat_json(&eval.sat, &model),
                "contraction_factor": alpha,
                "fixpoint": fixpoint,
                "operators": eval.operators,
            });
            write_csv(req.out_csv, &model, &eval.values.values, &eval.sat)?;
            write_json(req.report_path, &report)?;
            Ok(())
        }
        Err(err @ CheckError::NotConverged { .. }) => {
            let (alpha, fixpoint) = match &err {
                CheckError::NotConverged { report, .. } => {
                    (Some(report.alpha), Some(report.clone()))
                }
                _ => unreachable!(),
            };
            let report = json!({
                "status": "not_converged",
                "inputs": inputs,
                "grid": grid_json,
                "satisfaction_set": null,
                "contraction_factor": alpha,
                "fixpoint": fixpoint,
                "operators": evaluator.reports(),
            });
            write_json(req.report_path, &report)?;
            Err(err.into())
        }
        Err(err) => Err(err.into()),
    }
}

/// Inputs of a `simulate` run; unset fields fall back to the config's `simulation` section.
#[derive(Debug, Clone, Default)]
pub struct SimulateRequest {
    pub x0: Option<f64>,
    pub n: Option<usize>,
    pub horizon: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub x0: f64,
    #[serde(flatten)]
    pub estimate: McEstimate,
    pub horizon: usize,
    pub seed: u64,
    /// `V_horizon` from the grid recursion at the cell containing `x0`.
    pub dp_value: Option<f64>,
}

pub fn simulate(
    config: &RunConfig,
    req: &SimulateRequest,
) -> Result<Vec<SimulationResult>, CliError> {
    let spec = config
        .simulation
        .as_ref()
        .ok_or_else(|| CliError::Config("`simulation` section with `psi` is required".into()))?;
    let missing = |what: &str| {
        CliError::Config(format!(
            "simulation `{what}` not given on the command line or in the config"
        ))
    };
    let x0s = match req.x0 {
        Some(x) => vec![x],
        None if !spec.x0.is_empty() => spec.x0.clone(),
        None => return Err(missing("x0")),
    };
    let n = req.n.or(spec.n).ok_or_else(|| missing("n"))?;
    let horizon = req
        .horizon
        .or(spec.horizon)
        .ok_or_else(|| missing("horizon"))?;
    let seed = req.seed.or(spec.seed).ok_or_else(|| missing("seed"))?;
    if n == 0 {
        return Err(CliError::Config("simulation `n` must be at least 1".into()));
    }
    let phi_f = parse(&spec.phi)?;
    let psi_f = parse(&spec.psi)?;
    let model = config.build_model()?;
    let opts = config.solver_options(None, None)?;
    let mut eval = Evaluator::new(&model, opts);
    let phi = eval.evaluate(&phi_f)?.sat;
    let psi = eval.evaluate(&psi_f)?.sat;
    let values = crate::checker::bounded_until(&model, &phi, &psi, horizon)?;
    let v = values.last().expect("non-empty");
    x0s.into_iter()
        .map(|x0| {
            let estimate = simulate_until(&model, x0, &phi, &psi, horizon, n, seed)?;
            Ok(SimulationResult {
                x0,
                estimate,
                horizon,
                seed,
                dp_value: model.value_at(v, x0),
            })
        })
        .collect()
}

#[derive(Debug, Parser)]
#[command(
    name = "pctl",
    version,
    about = "PCTL model checking for Markov chains on the real line"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a state formula on every grid cell.
    Check {
        /// JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// State formula, e.g. `P>=0.9[ safe U<=5 target ]`.
        #[arg(long)]
        formula: String,
        /// Per-cell CSV output.
        #[arg(long)]
        out: PathBuf,
        /// JSON report output.
        #[arg(long)]
        report: PathBuf,
        /// Fixed-point tolerance; overrides the config.
        #[arg(long)]
        tol: Option<f64>,
        /// Fixed-point iteration cap; overrides the config.
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Monte Carlo estimate of a bounded until probability from given start states.
    Simulate {
        /// JSON run configuration with a `simulation` section.
        #[arg(long)]
        config: PathBuf,
        /// Start state; defaults to the config's `x0` list.
        #[arg(long, allow_negative_numbers = true)]
        x0: Option<f64>,
        /// Number of trajectories.
        #[arg(long)]
        n: Option<usize>,
        /// Step bound of the until.
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Check { .. } => "check",
            Command::Simulate { .. } => "simulate",
        })
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Check {
            config,
            formula,
            out,
            report,
            tol,
            max_iter,
        } => run(&CheckRequest {
            config_path: &config,
            formula: &formula,
            out_csv: &out,
            report_path: &report,
            tol,
            max_iter,
        }),
        Command::Simulate {
            config,
            x0,
            n,
            horizon,
            seed,
        } => {
            let cfg = RunConfig::load(&config)?;
            let results = simulate(
                &cfg,
                &SimulateRequest {
                    x0,
                    n,
                    horizon,
                    seed,
                },
            )?;
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            serde_json::to_writer_pretty(&mut lock, &results).expect("results serialize");
            writeln!(lock).map_err(|source| CliError::Io {
                path: PathBuf::from("<stdout>"),
                source,
            })
        }
    }
}

/// Entry point for the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            };
        }
    };
    let command = cli.command.to_string();
    match dispatch(cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("pctl {command}: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig12_formatting() {
        assert_eq!(format_sig12(0.6), "0.600000000000");
        assert_eq!(format_sig12(150.25), "150.250000000");
        assert_eq!(format_sig12(1.0), "1.00000000000");
        assert_eq!(format_sig12(0.0), "0.00000000000");
        assert_eq!(format_sig12(199950.0), "199950.000000");
        assert_eq!(format_sig12(9.9999999999999), "10.0000000000");
        assert_eq!(format_sig12(1.5e-5), "0.0000150000000000");
    }

    #[test]
    fn config_parses_all_model_kinds() {
        let text = r#"{
            "model": {"kind": "finite", "matrix": [[0.5,0.3,0.2],[0,1,0],[0,0,1]], "state_values": [0,1,2]},
            "grid": {"lo": -0.5, "hi": 2.5, "cells": 3},
            "regions": {"phi": [[-0.5, 0.5]], "psi": [[0.5, 1.5]], "all": [["-inf", "inf"]]}
        }"#;
        let cfg = RunConfig::from_json(text).unwrap();
        let model = cfg.build_model().unwrap();
        assert_eq!(model.atom("psi").unwrap().mask, vec![false, true, false]);
        assert_eq!(model.atom("all").unwrap().lower_tail, Some(true));

        let fish =
            RunConfig::from_json(r#"{"model": {"kind": "fishery", "strategy": "hcr"}}"#).unwrap();
        assert_eq!(fish.build_model().unwrap().cells(), 800);

        let ret = RunConfig::from_json(
            r#"{"model": {"kind": "retirement", "a": 0.2, "b": 0.8, "c": 0}}"#,
        )
        .unwrap();
        assert_eq!(ret.build_model().unwrap().cells(), 2000);

        let aff = RunConfig::from_json(
            r#"{"model": {"kind": "affine_gaussian", "mean": [1, 0.9], "std": [0.5, 0]},
                "grid": {"lo": 0, "hi": 10, "cells": 20}}"#,
        )
        .unwrap();
        assert_eq!(aff.build_model().unwrap().cells(), 20);
    }

    #[test]
    fn config_errors() {
        assert!(matches!(
            RunConfig::from_json(r#"{"model": {"kind": "fishery", "strategy": "trawl"}}"#),
            Err(CliError::Config(_))
        ));
        let bad_portfolio = RunConfig::from_json(
            r#"{"model": {"kind": "retirement", "a": 0.5, "b": 0.5, "c": 0.5}}"#,
        )
        .unwrap();
        assert!(matches!(
            bad_portfolio.build_model(),
            Err(CliError::Config(_))
        ));
        let misaligned = RunConfig::from_json(
            r#"{"model": {"kind": "fishery", "strategy": "stop"}, "regions": {"low": [[0, 10.2]]}}"#,
        )
        .unwrap();
        assert!(matches!(misaligned.build_model(), Err(CliError::Config(_))));
        let no_grid = RunConfig::from_json(
            r#"{"model": {"kind": "affine_gaussian", "mean": [0, 1], "std": [1, 0]}}"#,
        )
        .unwrap();
        assert!(matches!(no_grid.build_model(), Err(CliError::Config(_))));
        assert!(RunConfig::from_json(r#"{"model": {"kind": "fishery", "strategy": "stop"}, "regions": {"r": [["-infinity", 0]]}}"#).is_err());
        let cfg = RunConfig::from_json(
            r#"{"model": {"kind": "fishery", "strategy": "stop"}, "solver": {"tol": 0}}"#,
        )
        .unwrap();
        assert!(cfg.solver_options(None, None).is_err());
    }

    #[test]
    fn endpoints_round_trip_through_json() {
        let e: Vec<[Endpoint; 2]> = serde_json::from_str(r#"[["-inf", 3.5], [4, "inf"]]"#).unwrap();
        assert_eq!(
            serde_json::to_string(&e).unwrap(),
            r#"[["-inf",3.5],[4.0,"inf"]]"#
        );
    }
}
