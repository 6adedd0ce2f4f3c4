//! Stochastic kernels on the real line and their discretization onto a grid.
//!
//! Every set here is half-open: an interval `(lo, hi)` in a [`Region`] means
//! `[lo, hi)`, grid cell `j` is `[lo + j*h, lo + (j+1)*h)`, the lower grid tail
//! is `(-inf, grid.lo)` and the upper tail is `[grid.hi, +inf)`. For
//! continuous kernels endpoint conventions carry no probability; for finite
//! chains and Dirac steps they make cell and region masses agree exactly.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::exec::Execution;

/// Row-sum tolerance accepted by [`finite_kernel`].
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("transition matrix must be square with one row per state value: {rows} rows, {cols} columns, {states} state values")]
    Shape {
        rows: usize,
        cols: usize,
        states: usize,
    },
    #[error("transition matrix row {row} sums to {sum}, expected 1")]
    RowSum { row: usize, sum: f64 },
    #[error("transition probability at ({row}, {col}) is {value}, outside [0, 1]")]
    Entry { row: usize, col: usize, value: f64 },
    #[error("state value {value} (state {state}) lies outside the grid [{lo}, {hi})")]
    StateOffGrid {
        state: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("states {first} and {second} fall in the same grid cell {cell}; refine the grid")]
    StatesShareCell {
        first: usize,
        second: usize,
        cell: usize,
    },
    #[error("duplicate or non-finite state value {0}")]
    BadStateValue(f64),
    #[error("invalid grid: lo={lo}, hi={hi}, cells={cells}")]
    Grid { lo: f64, hi: f64, cells: usize },
    #[error("invalid interval [{lo}, {hi})")]
    Interval { lo: f64, hi: f64 },
    #[error("kernel standard deviation at x={x} is {std}, expected a finite nonnegative value")]
    BadStd { x: f64, std: f64 },
    #[error("kernel mean at x={x} is not finite")]
    BadMean { x: f64 },
}

/// A half-open interval `[lo, hi)`; either endpoint may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x < self.hi
    }
}

/// A finite union of disjoint intervals, sorted ascending.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Region {
    intervals: Vec<Interval>,
}

impl Region {
    /// Builds a normalized region. Overlapping or touching intervals merge;
    /// empty intervals (`lo == hi`) are dropped.
    pub fn new<I>(intervals: I) -> Result<Self, KernelError>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut raw = Vec::new();
        for (lo, hi) in intervals {
            if lo.is_nan()
                || hi.is_nan()
                || lo > hi
                || lo == f64::INFINITY
                || hi == f64::NEG_INFINITY
            {
                return Err(KernelError::Interval { lo, hi });
            }
            if lo < hi {
                raw.push(Interval { lo, hi });
            }
        }
        raw.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut merged: Vec<Interval> = Vec::with_capacity(raw.len());
        for iv in raw {
            match merged.last_mut() {
                Some(last) if iv.lo <= last.hi => last.hi = last.hi.max(iv.hi),
                _ => merged.push(iv),
            }
        }
        Ok(Region { intervals: merged })
    }

    pub fn empty() -> Self {
        Region::default()
    }

    pub fn whole() -> Self {
        Region {
            intervals: vec![Interval {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
            }],
        }
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self, KernelError> {
        Region::new([(lo, hi)])
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|iv| iv.contains(x))
    }
}

/// Uniform grid of `cells` half-open cells covering `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    lo: f64,
    hi: f64,
    cells: usize,
}

/// Where a real number falls relative to a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    LowerTail,
    Cell(usize),
    UpperTail,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, cells: usize) -> Result<Self, KernelError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi && cells >= 1) {
            return Err(KernelError::Grid { lo, hi, cells });
        }
        Ok(Grid { lo, hi, cells })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width()
    }

    /// Left edge of cell `j`; `boundary(cells) == hi`.
    pub fn boundary(&self, j: usize) -> f64 {
        if j == self.cells {
            self.hi
        } else {
            self.lo + j as f64 * self.width()
        }
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.center(i)).collect()
    }

    pub fn locate(&self, x: f64) -> Location {
        if x < self.lo {
            return Location::LowerTail;
        }
        if x >= self.hi {
            return Location::UpperTail;
        }
        let mut j = ((x - self.lo) / self.width()).floor() as usize;
        j = j.min(self.cells - 1);
        // floor() can land one cell off near a boundary
        if x < self.boundary(j) {
            j -= 1;
        } else if j + 1 < self.cells && x >= self.boundary(j + 1) {
            j += 1;
        }
        Location::Cell(j)
    }

    /// Whether `x` coincides with a cell boundary (relative tolerance 1e-9 of a cell).
    pub fn is_boundary(&self, x: f64) -> bool {
        let t = (x - self.lo) / self.width();
        (t - t.round()).abs() <= 1e-9 * t.abs().max(1.0)
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One-step Gaussian kernel `Q(x, .) = N(mean(x), std(x)^2)`; `std(x) == 0` is a Dirac step.
#[derive(Clone)]
pub struct GaussianKernel {
    mean: ScalarFn,
    std: ScalarFn,
}

impl GaussianKernel {
    pub fn mean(&self, x: f64) -> f64 {
        (self.mean)(x)
    }

    pub fn std(&self, x: f64) -> f64 {
        (self.std)(x)
    }

    fn moments(&self, x: f64) -> Result<(f64, f64), KernelError> {
        let m = self.mean(x);
        let s = self.std(x);
        if !m.is_finite() {
            return Err(KernelError::BadMean { x });
        }
        if !(s.is_finite() && s >= 0.0) {
            return Err(KernelError::BadStd { x, std: s });
        }
        Ok((m, s))
    }

    /// P(next < t) from state `x`.
    fn cdf_below(m: f64, s: f64, t: f64) -> f64 {
        if t == f64::NEG_INFINITY {
            return 0.0;
        }
        if t == f64::INFINITY {
            return 1.0;
        }
        if s == 0.0 {
            return if m < t { 1.0 } else { 0.0 };
        }
        standard_normal_cdf((t - m) / s)
    }
}

impl fmt::Debug for GaussianKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GaussianKernel").finish_non_exhaustive()
    }
}

/// Finite chain embedded on the real line: state `i` sits at `state_values[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteKernel {
    matrix: Vec<Vec<f64>>,
    state_values: Vec<f64>,
}

impl FiniteKernel {
    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    pub fn state_values(&self) -> &[f64] {
        &self.state_values
    }

    pub fn len(&self) -> usize {
        self.state_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state_values.is_empty()
    }

    /// Index of the state closest to `x`.
    pub fn nearest_state(&self, x: f64) -> usize {
        let mut best = 0;
        for (i, v) in self.state_values.iter().enumerate() {
            if (v - x).abs() < (self.state_values[best] - x).abs() {
                best = i;
            }
        }
        best
    }
}

/// A stochastic kernel `Q(x, .)`.
#[derive(Debug, Clone)]
pub enum Kernel {
    Finite(FiniteKernel),
    AffineGaussian(GaussianKernel),
}

pub fn finite_kernel(matrix: Vec<Vec<f64>>, state_values: Vec<f64>) -> Result<Kernel, KernelError> {
    let n = state_values.len();
    if n == 0 || matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
        return Err(KernelError::Shape {
            rows: matrix.len(),
            cols: matrix.first().map_or(0, Vec::len),
            states: n,
        });
    }
    for (r, row) in matrix.iter().enumerate() {
        for (c, &value) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(KernelError::Entry {
                    row: r,
                    col: c,
                    value,
                });
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(KernelError::RowSum { row: r, sum });
        }
    }
    for (i, v) in state_values.iter().enumerate() {
        if !v.is_finite() || state_values[..i].contains(v) {
            return Err(KernelError::BadStateValue(*v));
        }
    }
    Ok(Kernel::Finite(FiniteKernel {
        matrix,
        state_values,
    }))
}

pub fn affine_gaussian_kernel<M, S>(mean_fn: M, std_fn: S) -> Kernel
where
    M: Fn(f64) -> f64 + Send + Sync + 'static,
    S: Fn(f64) -> f64 + Send + Sync + 'static,
{
    Kernel::AffineGaussian(GaussianKernel {
        mean: Arc::new(mean_fn),
        std: Arc::new(std_fn),
    })
}

/// Standard normal distribution function.
pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

impl Kernel {
    /// `Q(x, [a, b))`.
    ///
    /// Panics if a Gaussian kernel reports a negative or non-finite std at `x`;
    /// [`discretize`] reports the same condition as an error.
    pub fn mass_between(&self, x: f64, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match self {
            Kernel::Finite(fk) => {
                let row = &fk.matrix[fk.nearest_state(x)];
                fk.state_values
                    .iter()
                    .zip(row)
                    .filter(|(v, _)| a <= **v && **v < b)
                    .map(|(_, p)| p)
                    .sum()
            }
            Kernel::AffineGaussian(g) => {
                let (m, s) = g.moments(x).unwrap_or_else(|e| panic!("{e}"));
                let upper = GaussianKernel::cdf_below(m, s, b);
                let lower = GaussianKernel::cdf_below(m, s, a);
                (upper - lower).clamp(0.0, 1.0)
            }
        }
    }

    /// `Q(x, r)`. Finite kernels use the state nearest to `x`.
    pub fn mass(&self, x: f64, r: &Region) -> f64 {
        let total: f64 = r
            .intervals()
            .iter()
            .map(|iv| self.mass_between(x, iv.lo, iv.hi))
            .sum();
        total.clamp(0.0, 1.0)
    }

    /// Draws one successor of `x`.
    pub fn sample<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> f64 {
        match self {
            Kernel::Finite(fk) => {
                let row = &fk.matrix[fk.nearest_state(x)];
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (j, p) in row.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return fk.state_values[j];
                    }
                }
                // rounding left u above the final partial sum
                let last = row.iter().rposition(|&p| p > 0.0).unwrap_or(0);
                fk.state_values[last]
            }
            Kernel::AffineGaussian(g) => {
                let z: f64 = StandardNormal.sample(rng);
                g.mean(x) + g.std(x) * z
            }
        }
    }
}

/// Row-stochastic cell-to-cell matrix with the probability of leaving the
/// grid on either side.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedKernel {
    grid: Grid,
    matrix: Vec<f64>,
    lower_tail: Vec<f64>,
    upper_tail: Vec<f64>,
}

impl DiscretizedKernel {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn cells(&self) -> usize {
        self.grid.cells
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.grid.cells;
        &self.matrix[i * n..(i + 1) * n]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.grid.cells + j]
    }

    pub fn lower_tail(&self) -> &[f64] {
        &self.lower_tail
    }

    pub fn upper_tail(&self) -> &[f64] {
        &self.upper_tail
    }

    /// Largest `|row sum + tails - 1|` over all rows.
    pub fn max_row_defect(&self) -> f64 {
        (0..self.grid.cells)
            .map(|i| {
                let s: f64 = self.row(i).iter().sum();
                (s + self.lower_tail[i] + self.upper_tail[i] - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

pub fn discretize(k: &Kernel, g: &Grid) -> Result<DiscretizedKernel, KernelError> {
    discretize_with(k, g, Execution::default())
}

/// Builds the cell-to-cell matrix `Q(c_i, cell_j)` plus tail masses, one row per cell.
pub fn discretize_with(
    k: &Kernel,
    g: &Grid,
    exec: Execution,
) -> Result<DiscretizedKernel, KernelError> {
    let n = g.cells;
    let mut matrix = vec![0.0; n * n];
    let mut lower_tail = vec![0.0; n];
    let mut upper_tail = vec![0.0; n];
    match k {
        Kernel::Finite(fk) => {
            let cell_of_state = finite_state_cells(fk, g)?;
            let centers = g.centers();
            for i in 0..n {
                let from = fk.nearest_state(centers[i]);
                for (to, &p) in fk.matrix[from].iter().enumerate() {
                    matrix[i * n + cell_of_state[to]] += p;
                }
            }
        }
        Kernel::AffineGaussian(gk) => {
            let moments: Vec<(f64, f64)> = (0..n)
                .map(|i| gk.moments(g.center(i)))
                .collect::<Result<_, _>>()?;
            let boundaries: Vec<f64> = (0..=n).map(|j| g.boundary(j)).collect();
            exec.for_each_row(&mut matrix, n, |i, row| {
                let (m, s) = moments[i];
                let mut prev = GaussianKernel::cdf_below(m, s, boundaries[0]);
                for (j, slot) in row.iter_mut().enumerate() {
                    let next = GaussianKernel::cdf_below(m, s, boundaries[j + 1]);
                    *slot = (next - prev).max(0.0);
                    prev = next;
                }
            });
            for i in 0..n {
                let (m, s) = moments[i];
                lower_tail[i] = GaussianKernel::cdf_below(m, s, g.lo);
                upper_tail[i] = 1.0 - GaussianKernel::cdf_below(m, s, g.hi);
            }
        }
    }
    Ok(DiscretizedKernel {
        grid: *g,
        matrix,
        lower_tail,
        upper_tail,
    })
}

fn finite_state_cells(fk: &FiniteKernel, g: &Grid) -> Result<Vec<usize>, KernelError> {
    let mut owner: Vec<Option<usize>> = vec![None; g.cells];
    let mut cells = Vec::with_capacity(fk.len());
    for (state, &value) in fk.state_values.iter().enumerate() {
        let Location::Cell(cell) = g.locate(value) else {
            return Err(KernelError::StateOffGrid {
                state,
                value,
                lo: g.lo,
                hi: g.hi,
            });
        };
        if let Some(first) = owner[cell] {
            return Err(KernelError::StatesShareCell {
                first,
                second: state,
                cell,
            });
        }
        owner[cell] = Some(state);
        cells.push(cell);
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixture() -> Kernel {
        finite_kernel(
            vec![
                vec![0.5, 0.3, 0.2],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
            vec![0.0, 1.0, 2.0],
        )
        .unwrap()
    }

    /// Independent normal-CDF oracle: composite Simpson on the density.
    fn simpson_normal_mass(m: f64, s: f64, a: f64, b: f64) -> f64 {
        let a = a.max(m - 12.0 * s);
        let b = b.min(m + 12.0 * s);
        if b <= a {
            return 0.0;
        }
        let n = 20_000;
        let h = (b - a) / n as f64;
        let pdf = |x: f64| {
            let z = (x - m) / s;
            (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
        };
        let mut acc = pdf(a) + pdf(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * pdf(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn region_normalizes() {
        let r = Region::new([(5.0, 6.0), (0.0, 2.0), (1.0, 3.0), (3.0, 4.0), (7.0, 7.0)]).unwrap();
        assert_eq!(
            r.intervals(),
            &[Interval { lo: 0.0, hi: 4.0 }, Interval { lo: 5.0, hi: 6.0 }]
        );
        assert!(Region::new([(2.0, 1.0)]).is_err());
        assert!(Region::new([(f64::NAN, 1.0)]).is_err());
        assert!(Region::empty().is_empty());
        assert!(Region::whole().contains(-1e300));
    }

    #[test]
    fn grid_geometry() {
        let g = Grid::new(0.0, 400.0, 800).unwrap();
        assert_eq!(g.width(), 0.5);
        assert_eq!(g.center(0), 0.25);
        assert_eq!(g.locate(100.0), Location::Cell(200));
        assert_eq!(g.locate(-1e-9), Location::LowerTail);
        assert_eq!(g.locate(400.0), Location::UpperTail);
        assert!(g.is_boundary(150.0));
        assert!(!g.is_boundary(150.25));
        assert!(Grid::new(1.0, 1.0, 3).is_err());
        assert!(Grid::new(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn finite_constructor_validation() {
        assert!(matches!(
            finite_kernel(vec![vec![0.5, 0.3, 0.1]; 3], vec![0.0, 1.0, 2.0]),
            Err(KernelError::RowSum { row: 0, .. })
        ));
        assert!(matches!(
            finite_kernel(vec![vec![1.5, -0.5], vec![0.0, 1.0]], vec![0.0, 1.0]),
            Err(KernelError::Entry { .. })
        ));
        assert!(matches!(
            finite_kernel(vec![vec![1.0, 0.0]], vec![0.0, 1.0]),
            Err(KernelError::Shape { .. })
        ));
        let _ = fixture();
    }

    #[test]
    fn finite_mass_is_row_lookup() {
        let k = fixture();
        let r = Region::interval(0.5, 1.5).unwrap();
        assert_eq!(k.mass(0.0, &r), 0.3);
        assert_eq!(k.mass(0.0, &Region::whole()), 1.0);
    }

    #[test]
    fn gaussian_mass_against_quadrature() {
        // fishery stop policy at x = 100: m = 155, s^2 = 2125
        let k = affine_gaussian_kernel(|_| 155.0, |_| 2125f64.sqrt());
        let r = Region::interval(150.0, 400.0).unwrap();
        let got = k.mass(100.0, &r);
        let oracle = simpson_normal_mass(155.0, 2125f64.sqrt(), 150.0, 400.0);
        assert!((got - oracle).abs() < 1e-9, "{got} vs {oracle}");
        assert!((got - 0.543).abs() < 1e-3);
        assert_eq!(k.mass(3.0, &Region::whole()), 1.0);
    }

    #[test]
    fn dirac_discretizes_to_identity() {
        let k = affine_gaussian_kernel(|x| x, |_| 0.0);
        let g = Grid::new(0.0, 10.0, 10).unwrap();
        let dk = discretize(&k, &g).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                assert_eq!(dk.entry(i, j), if i == j { 1.0 } else { 0.0 });
            }
            assert_eq!(dk.lower_tail()[i], 0.0);
            assert_eq!(dk.upper_tail()[i], 0.0);
        }
    }

    #[test]
    fn finite_discretization_places_states_in_cells() {
        let g = Grid::new(-0.5, 2.5, 3).unwrap();
        let dk = discretize(&fixture(), &g).unwrap();
        assert_eq!(dk.row(0), &[0.5, 0.3, 0.2]);
        assert_eq!(dk.max_row_defect(), 0.0);

        let coarse = Grid::new(-0.5, 2.5, 2).unwrap();
        assert!(matches!(
            discretize(&fixture(), &coarse),
            Err(KernelError::StatesShareCell { .. })
        ));
        let short = Grid::new(-0.5, 1.5, 4).unwrap();
        assert!(matches!(
            discretize(&fixture(), &short),
            Err(KernelError::StateOffGrid { state: 2, .. })
        ));
    }

    #[test]
    fn negative_std_is_reported() {
        let k = affine_gaussian_kernel(|x| x, |x| x - 5.0);
        let g = Grid::new(0.0, 10.0, 10).unwrap();
        assert!(matches!(
            discretize(&k, &g),
            Err(KernelError::BadStd { .. })
        ));
    }

    #[test]
    fn execution_modes_agree() {
        let k = affine_gaussian_kernel(|x| 0.9 * x + 3.0, |x| 0.2 * x + 1.0);
        let g = Grid::new(0.0, 50.0, 64).unwrap();
        let reference = discretize_with(&k, &g, Execution::Sequential).unwrap();
        for &exec in Execution::available() {
            assert_eq!(discretize_with(&k, &g, exec).unwrap(), reference);
        }
    }

    fn gaussian_params() -> impl Strategy<Value = (f64, f64, f64, f64)> {
        (-2.0f64..2.0, -20.0f64..20.0, 0.0f64..5.0, 0.0f64..0.5)
    }

    proptest! {
        #[test]
        fn rows_are_stochastic((slope, shift, s0, s1) in gaussian_params(), cells in 1usize..120) {
            let k = affine_gaussian_kernel(move |x| slope * x + shift, move |x| s0 + s1 * x.abs());
            let g = Grid::new(-10.0, 30.0, cells).unwrap();
            let dk = discretize(&k, &g).unwrap();
            prop_assert!(dk.max_row_defect() <= 1e-9);
            for i in 0..cells {
                prop_assert!(dk.row(i).iter().all(|p| (0.0..=1.0).contains(p)));
            }
        }

        #[test]
        fn refinement_is_additive((slope, shift, s0, s1) in gaussian_params(), cells in 1usize..60) {
            let k = affine_gaussian_kernel(move |x| slope * x + shift, move |x| s0 + s1 * x.abs());
            let coarse = Grid::new(-10.0, 30.0, cells).unwrap();
            let fine = Grid::new(-10.0, 30.0, 2 * cells).unwrap();
            let fine_dk = discretize(&k, &fine).unwrap();
            // fine cell 2i+1 shares its center's x with nothing coarse, so
            // compare masses from the same start point via `mass_between`
            for i in 0..2 * cells {
                let x = fine.center(i);
                for c in 0..cells {
                    let whole = k.mass_between(x, coarse.boundary(c), coarse.boundary(c + 1));
                    let parts = fine_dk.entry(i, 2 * c) + fine_dk.entry(i, 2 * c + 1);
                    prop_assert!((whole - parts).abs() <= 1e-9);
                }
            }
        }

        #[test]
        fn aligned_region_mass_matches_cell_sum((slope, shift, s0, s1) in gaussian_params(), a in 0usize..40, len in 0usize..40) {
            let k = affine_gaussian_kernel(move |x| slope * x + shift, move |x| s0 + s1 * x.abs());
            let g = Grid::new(-10.0, 30.0, 80).unwrap();
            let dk = discretize(&k, &g).unwrap();
            let b = (a + len).min(80);
            let r = Region::interval(g.boundary(a), g.boundary(b)).unwrap();
            for i in (0..80).step_by(7) {
                let cell_sum: f64 = (a..b).map(|j| dk.entry(i, j)).sum();
                prop_assert!((cell_sum - k.mass(g.center(i), &r)).abs() <= 1e-9);
            }
        }
    }
}
