//! Evaluation of PCTL formulas over a gridded model.
//!
//! Satisfaction sets are cell masks plus a membership flag for each grid
//! tail. The until operators are computed with the one-step operator
//!
//! ```text
//! L[W](x) = 1_psi(x) + 1_{phi \ psi}(x) * sum_j Q(x, cell_j) W(c_j) + tails
//! ```
//!
//! iterated from `V_0 = 1_psi` with Jacobi sweeps, so `V_k` is exactly the
//! `k`-step bounded-until probability and the limit is the least nonnegative
//! fixed point even when `L` has several.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::exec::Execution;
use crate::formula::{PathFormula, Relation, StateFormula};
use crate::kernel::{
    discretize_with, DiscretizedKernel, Grid, Kernel, KernelError, Location, Region,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    Lower,
    Upper,
}

impl std::fmt::Display for Tail {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Tail::Lower => "lower",
            Tail::Upper => "upper",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(
        "region `{region}` has endpoint {endpoint} inside the grid but not on a cell boundary"
    )]
    Misaligned { region: String, endpoint: f64 },
    #[error("region `{region}` covers only part of the {tail} grid tail")]
    SplitTail { region: String, tail: Tail },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CheckError {
    #[error("atom `{0}` is not bound to a region")]
    UnboundAtom(String),
    #[error("unbounded until did not converge for {formula}: residual {} after {} iterations", report.final_residual, report.iterations)]
    NotConverged {
        formula: String,
        report: FixpointReport,
    },
    #[error("dimension mismatch: expected {expected} cells, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("the {0} grid tail lies in phi \\ psi and receives probability mass; extend the grid to cover phi \\ psi")]
    TailInContinuation(Tail),
    #[error("membership of the {0} grid tail is undetermined for this formula and it receives probability mass")]
    UndeterminedTail(Tail),
}

/// Solver settings for unbounded until.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-9,
            max_iter: 1_000_000,
        }
    }
}

/// Cells (and grid tails) satisfying a state formula.
///
/// A tail flag is `None` when membership cannot be decided from cell values,
/// which happens for probability operators over `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct SatSet {
    pub mask: Vec<bool>,
    pub lower_tail: Option<bool>,
    pub upper_tail: Option<bool>,
}

fn and3(a: Option<bool>, b: Option<bool>) -> Option<bool> {
    match (a, b) {
        (Some(false), _) | (_, Some(false)) => Some(false),
        (Some(true), Some(true)) => Some(true),
        _ => None,
    }
}

fn or3(a: Option<bool>, b: Option<bool>) -> Option<bool> {
    match (a, b) {
        (Some(true), _) | (_, Some(true)) => Some(true),
        (Some(false), Some(false)) => Some(false),
        _ => None,
    }
}

impl SatSet {
    pub fn all(cells: usize) -> Self {
        SatSet {
            mask: vec![true; cells],
            lower_tail: Some(true),
            upper_tail: Some(true),
        }
    }

    pub fn none(cells: usize) -> Self {
        SatSet {
            mask: vec![false; cells],
            lower_tail: Some(false),
            upper_tail: Some(false),
        }
    }

    /// Set with the given cell mask and both tails outside.
    pub fn from_mask(mask: Vec<bool>) -> Self {
        SatSet {
            mask,
            lower_tail: Some(false),
            upper_tail: Some(false),
        }
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn contains_cell(&self, i: usize) -> bool {
        self.mask[i]
    }

    pub fn tail(&self, tail: Tail) -> Option<bool> {
        match tail {
            Tail::Lower => self.lower_tail,
            Tail::Upper => self.upper_tail,
        }
    }

    pub fn at(&self, loc: Location) -> Option<bool> {
        match loc {
            Location::LowerTail => self.lower_tail,
            Location::Cell(i) => Some(self.mask[i]),
            Location::UpperTail => self.upper_tail,
        }
    }

    pub fn complement(&self) -> SatSet {
        SatSet {
            mask: self.mask.iter().map(|b| !b).collect(),
            lower_tail: self.lower_tail.map(|b| !b),
            upper_tail: self.upper_tail.map(|b| !b),
        }
    }

    pub fn intersect(&self, other: &SatSet) -> SatSet {
        SatSet {
            mask: self
                .mask
                .iter()
                .zip(&other.mask)
                .map(|(a, b)| *a && *b)
                .collect(),
            lower_tail: and3(self.lower_tail, other.lower_tail),
            upper_tail: and3(self.upper_tail, other.upper_tail),
        }
    }

    pub fn union(&self, other: &SatSet) -> SatSet {
        SatSet {
            mask: self
                .mask
                .iter()
                .zip(&other.mask)
                .map(|(a, b)| *a || *b)
                .collect(),
            lower_tail: or3(self.lower_tail, other.lower_tail),
            upper_tail: or3(self.upper_tail, other.upper_tail),
        }
    }

    /// `self \ other`.
    pub fn minus(&self, other: &SatSet) -> SatSet {
        self.intersect(&other.complement())
    }

    /// Maximal runs of satisfying cells as `[first center, last center]`.
    pub fn intervals(&self, grid: &Grid) -> Vec<(f64, f64)> {
        self.runs()
            .into_iter()
            .map(|(a, b)| (grid.center(a), grid.center(b - 1)))
            .collect()
    }

    /// Maximal half-open runs `[lo, hi)` covered by satisfying cells. A run
    /// reaching a grid end extends to infinity when that tail is known to satisfy.
    pub fn extents(&self, grid: &Grid) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        let mut push = |lo: f64, hi: f64| match out.last_mut() {
            Some(last) if last.1 == lo => last.1 = hi,
            _ => out.push((lo, hi)),
        };
        if self.lower_tail == Some(true) {
            push(f64::NEG_INFINITY, grid.lo());
        }
        for (a, b) in self.runs() {
            push(grid.boundary(a), grid.boundary(b));
        }
        if self.upper_tail == Some(true) {
            push(grid.hi(), f64::INFINITY);
        }
        out
    }

    /// Maximal runs of set cells as index ranges `[a, b)`.
    fn runs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = None;
        for (i, &b) in self.mask.iter().enumerate() {
            match (b, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    out.push((s, i));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push((s, self.mask.len()));
        }
        out
    }
}

/// Per-cell probabilities, plus the value attributed to each grid tail.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub values: Vec<f64>,
    pub lower_tail_value: Option<f64>,
    pub upper_tail_value: Option<f64>,
}

impl ValueFunction {
    pub fn zeros(cells: usize) -> Self {
        ValueFunction {
            values: vec![0.0; cells],
            lower_tail_value: Some(0.0),
            upper_tail_value: Some(0.0),
        }
    }

    pub fn indicator(set: &SatSet) -> Self {
        let to_f = |b: bool| if b { 1.0 } else { 0.0 };
        ValueFunction {
            values: set.mask.iter().map(|&b| to_f(b)).collect(),
            lower_tail_value: set.lower_tail.map(to_f),
            upper_tail_value: set.upper_tail.map(to_f),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sup-norm distance over cells.
    pub fn distance(&self, other: &ValueFunction) -> f64 {
        sup_distance(&self.values, &other.values)
    }
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Convergence diagnostics for a fixed-point solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixpointReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub alpha: f64,
    pub converged: bool,
    /// `||V_{k+1} - V_k||` for every sweep performed.
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

/// The operator `L` for fixed `phi` and `psi`, with tail values resolved.
#[derive(Debug, Clone)]
pub struct ReachOperator<'a> {
    dk: &'a DiscretizedKernel,
    psi: &'a [bool],
    continue_mask: Vec<bool>,
    lower_tail_value: Option<f64>,
    upper_tail_value: Option<f64>,
}

impl<'a> ReachOperator<'a> {
    pub fn new(
        dk: &'a DiscretizedKernel,
        phi: &'a SatSet,
        psi: &'a SatSet,
    ) -> Result<Self, CheckError> {
        let n = dk.cells();
        for set in [phi, psi] {
            if set.len() != n {
                return Err(CheckError::DimensionMismatch {
                    expected: n,
                    found: set.len(),
                });
            }
        }
        let continue_mask: Vec<bool> = phi
            .mask
            .iter()
            .zip(&psi.mask)
            .map(|(&f, &s)| f && !s)
            .collect();
        let outflow = |tail: &[f64]| {
            tail.iter()
                .zip(&continue_mask)
                .filter(|(_, &c)| c)
                .map(|(m, _)| *m)
                .fold(0.0, f64::max)
        };
        let lower_tail_value = attribute_tail(
            Tail::Lower,
            phi.lower_tail,
            psi.lower_tail,
            outflow(dk.lower_tail()),
        )?;
        let upper_tail_value = attribute_tail(
            Tail::Upper,
            phi.upper_tail,
            psi.upper_tail,
            outflow(dk.upper_tail()),
        )?;
        Ok(ReachOperator {
            dk,
            psi: &psi.mask,
            continue_mask,
            lower_tail_value,
            upper_tail_value,
        })
    }

    pub fn cells(&self) -> usize {
        self.dk.cells()
    }

    /// `V_0 = 1_psi`.
    pub fn initial(&self) -> ValueFunction {
        ValueFunction {
            values: self
                .psi
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
            lower_tail_value: self.lower_tail_value,
            upper_tail_value: self.upper_tail_value,
        }
    }

    /// Cells of `phi \ psi`.
    pub fn continuation(&self) -> &[bool] {
        &self.continue_mask
    }

    /// Writes `L[w]` into `out`. Tail values of `w` are ignored; the
    /// operator's own attribution is used.
    pub fn apply_into(&self, w: &[f64], out: &mut [f64], exec: Execution) {
        let lower = self.lower_tail_value.unwrap_or(0.0);
        let upper = self.upper_tail_value.unwrap_or(0.0);
        let dk = self.dk;
        exec.for_each_indexed(out, |i, slot| {
            *slot = if self.psi[i] {
                1.0
            } else if self.continue_mask[i] {
                let integral: f64 = dk.row(i).iter().zip(w).map(|(q, v)| q * v).sum();
                let v = integral + dk.lower_tail()[i] * lower + dk.upper_tail()[i] * upper;
                v.clamp(0.0, 1.0)
            } else {
                0.0
            };
        });
    }

    pub fn apply(&self, w: &ValueFunction) -> Result<ValueFunction, CheckError> {
        self.apply_with(w, Execution::default())
    }

    pub fn apply_with(
        &self,
        w: &ValueFunction,
        exec: Execution,
    ) -> Result<ValueFunction, CheckError> {
        if w.len() != self.cells() {
            return Err(CheckError::DimensionMismatch {
                expected: self.cells(),
                found: w.len(),
            });
        }
        let mut out = vec![0.0; self.cells()];
        self.apply_into(&w.values, &mut out, exec);
        Ok(ValueFunction {
            values: out,
            lower_tail_value: self.lower_tail_value,
            upper_tail_value: self.upper_tail_value,
        })
    }

    /// `sup_{x in phi \ psi} Q(x, phi \ psi)`, capped at 1; 0 when `phi \ psi` is empty.
    pub fn contraction_factor(&self) -> f64 {
        let dk = self.dk;
        let lower_in = self.lower_tail_value.is_none();
        let upper_in = self.upper_tail_value.is_none();
        (0..self.cells())
            .filter(|&i| self.continue_mask[i])
            .map(|i| {
                let mut m: f64 = dk
                    .row(i)
                    .iter()
                    .zip(&self.continue_mask)
                    .filter(|(_, &c)| c)
                    .map(|(q, _)| q)
                    .sum();
                if lower_in {
                    m += dk.lower_tail()[i];
                }
                if upper_in {
                    m += dk.upper_tail()[i];
                }
                m
            })
            .fold(0.0, f64::max)
            .min(1.0)
    }

    /// `V_0..=V_k`.
    pub fn bounded(&self, k: usize, exec: Execution) -> Vec<ValueFunction> {
        let mut seq = Vec::with_capacity(k + 1);
        seq.push(self.initial());
        for _ in 0..k {
            let prev = seq.last().expect("sequence starts non-empty");
            let mut next = vec![0.0; self.cells()];
            self.apply_into(&prev.values, &mut next, exec);
            seq.push(ValueFunction {
                values: next,
                lower_tail_value: self.lower_tail_value,
                upper_tail_value: self.upper_tail_value,
            });
        }
        seq
    }

    /// Iterates from `1_psi` until the sup-norm step falls below `tol`.
    pub fn fixpoint(
        &self,
        opts: SolverOptions,
        exec: Execution,
    ) -> (ValueFunction, FixpointReport) {
        let mut current = self.initial().values;
        let mut next = vec![0.0; self.cells()];
        let mut residuals = Vec::new();
        let mut residual = f64::INFINITY;
        let mut iterations = 0;
        while iterations < opts.max_iter {
            self.apply_into(&current, &mut next, exec);
            residual = sup_distance(&current, &next);
            residuals.push(residual);
            std::mem::swap(&mut current, &mut next);
            iterations += 1;
            if residual < opts.tol {
                break;
            }
        }
        let report = FixpointReport {
            iterations,
            final_residual: residual,
            alpha: self.contraction_factor(),
            converged: residual < opts.tol,
            residuals,
        };
        let value = ValueFunction {
            values: current,
            lower_tail_value: self.lower_tail_value,
            upper_tail_value: self.upper_tail_value,
        };
        (value, report)
    }

    /// `||L[w] - w||` over cells.
    pub fn residual(&self, w: &ValueFunction) -> f64 {
        let mut out = vec![0.0; self.cells()];
        self.apply_into(&w.values, &mut out, Execution::Sequential);
        sup_distance(&out, &w.values)
    }
}

/// Value carried by a grid tail: 1 inside psi, 0 outside phi and psi. A tail
/// that may lie in `phi \ psi` is only accepted when no continuation cell
/// sends mass to it, in which case its value is irrelevant (`None`).
fn attribute_tail(
    tail: Tail,
    phi: Option<bool>,
    psi: Option<bool>,
    outflow: f64,
) -> Result<Option<f64>, CheckError> {
    match (phi, psi) {
        (_, Some(true)) => Ok(Some(1.0)),
        (Some(false), Some(false)) => Ok(Some(0.0)),
        _ if outflow == 0.0 => Ok(None),
        (Some(true), Some(false)) => Err(CheckError::TailInContinuation(tail)),
        _ => Err(CheckError::UndeterminedTail(tail)),
    }
}

/// A kernel on a grid with named regions bound to atoms.
#[derive(Debug, Clone)]
pub struct Model {
    kernel: Kernel,
    grid: Grid,
    dk: DiscretizedKernel,
    regions: BTreeMap<String, Region>,
    atoms: BTreeMap<String, SatSet>,
    exec: Execution,
}

impl Model {
    pub fn new(
        kernel: Kernel,
        grid: Grid,
        regions: BTreeMap<String, Region>,
    ) -> Result<Self, ModelError> {
        Model::with_execution(kernel, grid, regions, Execution::default())
    }

    pub fn with_execution(
        kernel: Kernel,
        grid: Grid,
        regions: BTreeMap<String, Region>,
        exec: Execution,
    ) -> Result<Self, ModelError> {
        let mut atoms = BTreeMap::new();
        for (name, region) in &regions {
            atoms.insert(name.clone(), region_mask(name, region, &grid)?);
        }
        let dk = discretize_with(&kernel, &grid, exec)?;
        Ok(Model {
            kernel,
            grid,
            dk,
            regions,
            atoms,
            exec,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn discretized(&self) -> &DiscretizedKernel {
        &self.dk
    }

    pub fn regions(&self) -> &BTreeMap<String, Region> {
        &self.regions
    }

    pub fn execution(&self) -> Execution {
        self.exec
    }

    /// Same model, evaluated with a different execution mode.
    pub fn set_execution(&mut self, exec: Execution) {
        self.exec = exec;
    }

    pub fn atom(&self, name: &str) -> Option<&SatSet> {
        self.atoms.get(name)
    }

    pub fn cells(&self) -> usize {
        self.grid.cells()
    }

    /// Value of `v` at the cell containing `x`, or the tail value off-grid.
    pub fn value_at(&self, v: &ValueFunction, x: f64) -> Option<f64> {
        match self.grid.locate(x) {
            Location::LowerTail => v.lower_tail_value,
            Location::Cell(i) => Some(v.values[i]),
            Location::UpperTail => v.upper_tail_value,
        }
    }

    pub fn reach_operator<'a>(
        &'a self,
        phi: &'a SatSet,
        psi: &'a SatSet,
    ) -> Result<ReachOperator<'a>, CheckError> {
        ReachOperator::new(&self.dk, phi, psi)
    }
}

fn region_mask(name: &str, region: &Region, grid: &Grid) -> Result<SatSet, ModelError> {
    for iv in region.intervals() {
        for e in [iv.lo, iv.hi] {
            if e.is_finite() && e > grid.lo() && e < grid.hi() && !grid.is_boundary(e) {
                return Err(ModelError::Misaligned {
                    region: name.to_string(),
                    endpoint: e,
                });
            }
        }
    }
    let ivs = region.intervals();
    let lower = if ivs
        .iter()
        .any(|iv| iv.lo == f64::NEG_INFINITY && iv.hi >= grid.lo())
    {
        true
    } else if ivs.iter().all(|iv| iv.lo >= grid.lo()) {
        false
    } else {
        return Err(ModelError::SplitTail {
            region: name.to_string(),
            tail: Tail::Lower,
        });
    };
    let upper = if ivs
        .iter()
        .any(|iv| iv.hi == f64::INFINITY && iv.lo <= grid.hi())
    {
        true
    } else if ivs.iter().all(|iv| iv.hi <= grid.hi()) {
        false
    } else {
        return Err(ModelError::SplitTail {
            region: name.to_string(),
            tail: Tail::Upper,
        });
    };
    Ok(SatSet {
        mask: (0..grid.cells())
            .map(|i| region.contains(grid.center(i)))
            .collect(),
        lower_tail: Some(lower),
        upper_tail: Some(upper),
    })
}

/// `L[w]` for the given sets.
pub fn apply_l(
    dk: &DiscretizedKernel,
    phi: &SatSet,
    psi: &SatSet,
    w: &ValueFunction,
) -> Result<ValueFunction, CheckError> {
    ReachOperator::new(dk, phi, psi)?.apply(w)
}

/// `V_0..=V_k` for `phi U<=k psi`.
pub fn bounded_until(
    model: &Model,
    phi: &SatSet,
    psi: &SatSet,
    k: usize,
) -> Result<Vec<ValueFunction>, CheckError> {
    Ok(model.reach_operator(phi, psi)?.bounded(k, model.exec))
}

/// Least fixed point of `L` by iteration from `1_psi`. A report with
/// `converged == false` signals that `max_iter` was reached first.
pub fn unbounded_until(
    model: &Model,
    phi: &SatSet,
    psi: &SatSet,
    opts: SolverOptions,
) -> Result<(ValueFunction, FixpointReport), CheckError> {
    Ok(model.reach_operator(phi, psi)?.fixpoint(opts, model.exec))
}

/// `Q(c_i, phi)` for every cell.
pub fn next_values(model: &Model, phi: &SatSet) -> Result<ValueFunction, CheckError> {
    let dk = &model.dk;
    let n = dk.cells();
    if phi.len() != n {
        return Err(CheckError::DimensionMismatch {
            expected: n,
            found: phi.len(),
        });
    }
    let tail_weight = |tail: Tail, masses: &[f64]| -> Result<f64, CheckError> {
        match phi.tail(tail) {
            Some(b) => Ok(if b { 1.0 } else { 0.0 }),
            None if masses.iter().all(|&m| m == 0.0) => Ok(0.0),
            None => Err(CheckError::UndeterminedTail(tail)),
        }
    };
    let lower = tail_weight(Tail::Lower, dk.lower_tail())?;
    let upper = tail_weight(Tail::Upper, dk.upper_tail())?;
    let mut values = vec![0.0; n];
    model.exec.for_each_indexed(&mut values, |i, slot| {
        let inside: f64 = dk
            .row(i)
            .iter()
            .zip(&phi.mask)
            .filter(|(_, &b)| b)
            .map(|(q, _)| q)
            .sum();
        *slot = (inside + dk.lower_tail()[i] * lower + dk.upper_tail()[i] * upper).clamp(0.0, 1.0);
    });
    Ok(ValueFunction {
        values,
        lower_tail_value: None,
        upper_tail_value: None,
    })
}

pub fn contraction_factor(model: &Model, phi: &SatSet, psi: &SatSet) -> Result<f64, CheckError> {
    Ok(model.reach_operator(phi, psi)?.contraction_factor())
}

pub fn threshold_set(v: &ValueFunction, rel: Relation, p: f64) -> SatSet {
    SatSet {
        mask: v.values.iter().map(|&x| rel.holds(x, p)).collect(),
        lower_tail: v.lower_tail_value.map(|x| rel.holds(x, p)),
        upper_tail: v.upper_tail_value.map(|x| rel.holds(x, p)),
    }
}

/// Diagnostics for one probability operator evaluated during a check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorReport {
    pub formula: String,
    pub kind: &'static str,
    /// Step bound of a bounded until.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixpoint: Option<FixpointReport>,
}

/// Result of evaluating a top-level formula.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub sat: SatSet,
    /// Probability per cell for a top-level `P` operator, the indicator otherwise.
    pub values: ValueFunction,
    pub operators: Vec<OperatorReport>,
}

/// Recursive evaluator; keeps per-operator reports, also after an error.
#[derive(Debug)]
pub struct Evaluator<'m> {
    model: &'m Model,
    options: SolverOptions,
    reports: Vec<OperatorReport>,
}

impl<'m> Evaluator<'m> {
    pub fn new(model: &'m Model, options: SolverOptions) -> Self {
        Evaluator {
            model,
            options,
            reports: Vec::new(),
        }
    }

    pub fn reports(&self) -> &[OperatorReport] {
        &self.reports
    }

    pub fn evaluate(&mut self, f: &StateFormula) -> Result<Evaluation, CheckError> {
        let f = f.desugar();
        if let Some(name) = f
            .atom_names()
            .into_iter()
            .find(|a| self.model.atom(a).is_none())
        {
            return Err(CheckError::UnboundAtom(name));
        }
        let (sat, values) = match &f {
            StateFormula::Prob { rel, p, path } => {
                let v = self.path_values(path)?;
                (threshold_set(&v, *rel, *p), v)
            }
            other => {
                let sat = self.state(other)?;
                let v = ValueFunction::indicator(&sat);
                (sat, v)
            }
        };
        Ok(Evaluation {
            sat,
            values,
            operators: self.reports.clone(),
        })
    }

    fn state(&mut self, f: &StateFormula) -> Result<SatSet, CheckError> {
        let n = self.model.cells();
        Ok(match f {
            StateFormula::True => SatSet::all(n),
            StateFormula::False => SatSet::none(n),
            StateFormula::Atom(name) => self
                .model
                .atom(name)
                .cloned()
                .ok_or_else(|| CheckError::UnboundAtom(name.clone()))?,
            StateFormula::Not(a) => self.state(a)?.complement(),
            StateFormula::And(a, b) => self.state(a)?.intersect(&self.state(b)?),
            StateFormula::Or(a, b) => self.state(a)?.union(&self.state(b)?),
            StateFormula::Implies(a, b) => self.state(a)?.complement().union(&self.state(b)?),
            StateFormula::Prob { rel, p, path } => {
                let v = self.path_values(path)?;
                threshold_set(&v, *rel, *p)
            }
        })
    }

    fn path_values(&mut self, path: &PathFormula) -> Result<ValueFunction, CheckError> {
        let model = self.model;
        match path {
            PathFormula::Next(inner) => {
                let phi = self.state(inner)?;
                let v = next_values(model, &phi)?;
                self.reports.push(OperatorReport {
                    formula: path.to_string(),
                    kind: "next",
                    steps: None,
                    contraction_factor: None,
                    fixpoint: None,
                });
                Ok(v)
            }
            PathFormula::BoundedUntil { left, bound, right } => {
                let phi = self.state(left)?;
                let psi = self.state(right)?;
                let op = model.reach_operator(&phi, &psi)?;
                let mut seq = op.bounded(*bound as usize, model.exec);
                self.reports.push(OperatorReport {
                    formula: path.to_string(),
                    kind: "bounded_until",
                    steps: Some(*bound),
                    contraction_factor: Some(op.contraction_factor()),
                    fixpoint: None,
                });
                Ok(seq.pop().expect("bounded sequence is non-empty"))
            }
            PathFormula::Until { left, right } => {
                let phi = self.state(left)?;
                let psi = self.state(right)?;
                let op = model.reach_operator(&phi, &psi)?;
                let (v, report) = op.fixpoint(self.options, model.exec);
                self.reports.push(OperatorReport {
                    formula: path.to_string(),
                    kind: "until",
                    steps: None,
                    contraction_factor: Some(report.alpha),
                    fixpoint: Some(report.clone()),
                });
                if !report.converged {
                    return Err(CheckError::NotConverged {
                        formula: path.to_string(),
                        report,
                    });
                }
                Ok(v)
            }
            PathFormula::Eventually(_) | PathFormula::BoundedEventually { .. } => {
                self.path_values(&path.desugar())
            }
        }
    }
}

/// Satisfaction set of `f` with default solver settings.
pub fn check(model: &Model, f: &StateFormula) -> Result<SatSet, CheckError> {
    check_with(model, f, SolverOptions::default())
}

pub fn check_with(
    model: &Model,
    f: &StateFormula,
    opts: SolverOptions,
) -> Result<SatSet, CheckError> {
    Evaluator::new(model, opts).evaluate(f).map(|e| e.sat)
}

/// Monte Carlo estimate of `P_x0(phi U<=horizon psi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    /// `3 * sqrt(p (1 - p) / n)`.
    pub half_width: f64,
    pub samples: usize,
}

const MC_CHUNK: usize = 4096;

/// Simulates `n` trajectories from `x0`, counting those that enter `psi`
/// before leaving `phi ∪ psi` within `horizon` steps. Chunk `c` of
/// trajectories uses ChaCha stream `c` of `seed`, so the result does not
/// depend on the execution mode or thread count.
pub fn simulate_until(
    model: &Model,
    x0: f64,
    phi: &SatSet,
    psi: &SatSet,
    horizon: usize,
    n: usize,
    seed: u64,
) -> Result<McEstimate, CheckError> {
    for set in [phi, psi] {
        if set.len() != model.cells() {
            return Err(CheckError::DimensionMismatch {
                expected: model.cells(),
                found: set.len(),
            });
        }
        for tail in [Tail::Lower, Tail::Upper] {
            if set.tail(tail).is_none() {
                return Err(CheckError::UndeterminedTail(tail));
            }
        }
    }
    let grid = model.grid;
    let kernel = &model.kernel;
    // tails are known to be determined here
    let status = |x: f64| -> Option<bool> {
        let loc = grid.locate(x);
        if psi.at(loc) == Some(true) {
            Some(true)
        } else if phi.at(loc) == Some(true) {
            None
        } else {
            Some(false)
        }
    };
    let run = |rng: &mut ChaCha8Rng| -> bool {
        let mut x = x0;
        for step in 0..=horizon {
            if let Some(done) = status(x) {
                return done;
            }
            if step == horizon {
                break;
            }
            x = kernel.sample(x, rng);
        }
        false
    };
    let chunks = n.div_ceil(MC_CHUNK);
    let hits: usize = model
        .exec
        .map_range(chunks, |c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = MC_CHUNK.min(n - c * MC_CHUNK);
            (0..count).filter(|_| run(&mut rng)).count()
        })
        .into_iter()
        .sum();
    let estimate = if n == 0 { 0.0 } else { hits as f64 / n as f64 };
    let half_width = if n == 0 {
        f64::INFINITY
    } else {
        3.0 * (estimate * (1.0 - estimate) / n as f64).sqrt()
    };
    Ok(McEstimate {
        estimate,
        half_width,
        samples: n,
    })
}
