//! Built-in case studies: single-species fishery recovery and a retirement fund.
//!
//! Both dynamics are affine in independent Gaussian noise for a fixed state,
//! so the one-step law is Gaussian with mean and variance obtained by
//! composition; no kernel estimation is involved.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checker::Model;
use crate::kernel::{affine_gaussian_kernel, Grid, Kernel, Region};

/// Half the biomass limit.
pub const FISHERY_K: f64 = 200.0;
/// Per-capita recruitment.
pub const FISHERY_R: f64 = 1.0;
/// Deterministic mortality.
pub const FISHERY_MU: f64 = 0.2;
// noise laws: mortality N(mu, 0.1^2), recruitment N(1, 0.6^2), catch N(1.1, 0.2^2)
const MORTALITY_STD: f64 = 0.1;
const RECRUITMENT_MEAN: f64 = 1.0;
const RECRUITMENT_STD: f64 = 0.6;
const CATCH_MEAN: f64 = 1.1;
const CATCH_STD: f64 = 0.2;

pub const FISHERY_GRID: (f64, f64) = (0.0, 400.0);
pub const FISHERY_DEFAULT_CELLS: usize = 800;

pub const RETIREMENT_SAFE_MEAN: f64 = 0.03;
pub const RETIREMENT_SAFE_STD: f64 = 0.005;
pub const RETIREMENT_RISKY_MEAN: f64 = 0.10;
pub const RETIREMENT_RISKY_STD: f64 = 0.2;
pub const RETIREMENT_CONTRIBUTION: f64 = 2500.0;
pub const RETIREMENT_TARGET: f64 = 200_000.0;
pub const RETIREMENT_DEFAULT_CELLS: usize = 2000;

/// `K (r - mu)^2 / (2 r)`.
pub fn msy_catch() -> f64 {
    FISHERY_K * (FISHERY_R - FISHERY_MU).powi(2) / (2.0 * FISHERY_R)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FisheryStrategy {
    /// Constant catch at the deterministic maximum sustainable yield.
    Msy,
    /// Harvest control rule: catch proportional to biomass below `K`.
    Hcr,
    /// No fishing.
    Stop,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown fishery strategy `{0}` (expected msy, hcr or stop)")]
pub struct UnknownStrategy(pub String);

impl FromStr for FisheryStrategy {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "msy" => Ok(FisheryStrategy::Msy),
            "hcr" => Ok(FisheryStrategy::Hcr),
            "stop" => Ok(FisheryStrategy::Stop),
            other => Err(UnknownStrategy(other.to_string())),
        }
    }
}

impl FisheryStrategy {
    pub const ALL: [FisheryStrategy; 3] = [
        FisheryStrategy::Msy,
        FisheryStrategy::Hcr,
        FisheryStrategy::Stop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FisheryStrategy::Msy => "msy",
            FisheryStrategy::Hcr => "hcr",
            FisheryStrategy::Stop => "stop",
        }
    }

    /// Target catch `C(x)`.
    pub fn catch(self, x: f64) -> f64 {
        let c_msy = msy_catch();
        match self {
            FisheryStrategy::Msy => c_msy,
            FisheryStrategy::Hcr if x < FISHERY_K => c_msy * x / FISHERY_K,
            FisheryStrategy::Hcr => c_msy,
            FisheryStrategy::Stop => 0.0,
        }
    }
}

/// Recruitment `R(x) = max(r x (1 - x / 2K), 0)`.
pub fn recruitment(x: f64) -> f64 {
    (FISHERY_R * x * (1.0 - x / (2.0 * FISHERY_K))).max(0.0)
}

/// Mean of `(1 - nu) x + gamma R(x) - delta C(x)`.
pub fn fishery_mean(strategy: FisheryStrategy, x: f64) -> f64 {
    (1.0 - FISHERY_MU) * x + RECRUITMENT_MEAN * recruitment(x) - CATCH_MEAN * strategy.catch(x)
}

pub fn fishery_variance(strategy: FisheryStrategy, x: f64) -> f64 {
    let r = recruitment(x);
    let c = strategy.catch(x);
    (x * MORTALITY_STD).powi(2) + (r * RECRUITMENT_STD).powi(2) + (c * CATCH_STD).powi(2)
}

pub fn fishery_kernel(strategy: FisheryStrategy) -> Kernel {
    affine_gaussian_kernel(
        move |x| fishery_mean(strategy, x),
        move |x| fishery_variance(strategy, x).sqrt(),
    )
}

/// Regions `target = [150, 400]` and `safe = (0, 400]`; the lower grid tail
/// (negative biomass) is outside both.
pub fn fishery_regions() -> BTreeMap<String, Region> {
    BTreeMap::from([
        (
            "target".to_string(),
            Region::interval(150.0, 400.0).expect("valid interval"),
        ),
        (
            "safe".to_string(),
            Region::interval(0.0, 400.0).expect("valid interval"),
        ),
    ])
}

pub fn fishery_grid(cells: usize) -> Grid {
    Grid::new(FISHERY_GRID.0, FISHERY_GRID.1, cells.max(1)).expect("valid grid")
}

pub fn fishery_model(strategy: FisheryStrategy, grid_cells: usize) -> Model {
    Model::new(
        fishery_kernel(strategy),
        fishery_grid(grid_cells),
        fishery_regions(),
    )
    .expect("fishery regions align with every grid on [0, 400] whose cells divide 150")
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("portfolio fractions a={a}, b={b}, c={c} must lie in [0, 1] and sum to 1")]
pub struct InvalidPortfolio {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Capital split between a safe asset, a risky asset and cash.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPortfolio", into = "RawPortfolio")]
pub struct PortfolioStrategy {
    a: f64,
    b: f64,
    c: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPortfolio {
    a: f64,
    b: f64,
    c: f64,
}

impl TryFrom<RawPortfolio> for PortfolioStrategy {
    type Error = InvalidPortfolio;

    fn try_from(raw: RawPortfolio) -> Result<Self, Self::Error> {
        PortfolioStrategy::new(raw.a, raw.b, raw.c)
    }
}

impl From<PortfolioStrategy> for RawPortfolio {
    fn from(p: PortfolioStrategy) -> Self {
        RawPortfolio {
            a: p.a,
            b: p.b,
            c: p.c,
        }
    }
}

impl PortfolioStrategy {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self, InvalidPortfolio> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(in_unit(a) && in_unit(b) && in_unit(c)) || (a + b + c - 1.0).abs() > 1e-12 {
            return Err(InvalidPortfolio { a, b, c });
        }
        Ok(PortfolioStrategy { a, b, c })
    }

    /// The three published allocations (i), (ii), (iii).
    pub fn published() -> [PortfolioStrategy; 3] {
        [
            PortfolioStrategy {
                a: 0.4,
                b: 0.4,
                c: 0.2,
            },
            PortfolioStrategy {
                a: 0.8,
                b: 0.2,
                c: 0.0,
            },
            PortfolioStrategy {
                a: 0.2,
                b: 0.8,
                c: 0.0,
            },
        ]
    }

    pub fn safe(&self) -> f64 {
        self.a
    }

    pub fn risky(&self) -> f64 {
        self.b
    }

    pub fn cash(&self) -> f64 {
        self.c
    }

    /// Expected growth factor of invested capital.
    pub fn drift(&self) -> f64 {
        self.a * (1.0 + RETIREMENT_SAFE_MEAN) + self.b * (1.0 + RETIREMENT_RISKY_MEAN) + self.c
    }

    pub fn mean(&self, x: f64) -> f64 {
        x * self.drift() + RETIREMENT_CONTRIBUTION
    }

    pub fn variance(&self, x: f64) -> f64 {
        x * x * ((self.a * RETIREMENT_SAFE_STD).powi(2) + (self.b * RETIREMENT_RISKY_STD).powi(2))
    }
}

pub fn retirement_kernel(strategy: PortfolioStrategy) -> Kernel {
    affine_gaussian_kernel(
        move |x| strategy.mean(x),
        move |x| strategy.variance(x).sqrt(),
    )
}

/// `target = [200000, inf)`, which is exactly the upper grid tail, and `safe = (0, inf)`.
pub fn retirement_regions() -> BTreeMap<String, Region> {
    BTreeMap::from([
        (
            "target".to_string(),
            Region::interval(RETIREMENT_TARGET, f64::INFINITY).expect("valid interval"),
        ),
        (
            "safe".to_string(),
            Region::interval(0.0, f64::INFINITY).expect("valid interval"),
        ),
    ])
}

pub fn retirement_grid(cells: usize) -> Grid {
    Grid::new(0.0, RETIREMENT_TARGET, cells.max(1)).expect("valid grid")
}

pub fn retirement_model(strategy: PortfolioStrategy, grid_cells: usize) -> Model {
    Model::new(
        retirement_kernel(strategy),
        retirement_grid(grid_cells),
        retirement_regions(),
    )
    .expect("retirement regions only touch the grid ends")
}
