//! Independent oracles and random model generators shared by the integration tests.

#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use pctl::{affine_gaussian_kernel, finite_kernel, Grid, Model, Region, SatSet, ValueFunction};
use rand::Rng;

/// Random row-stochastic matrix; each entry is zero with probability 0.3.
pub fn random_chain<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let mut row: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.random_bool(0.3) {
                        0.0
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect();
            if row.iter().all(|&p| p == 0.0) {
                row[rng.random_range(0..n)] = 1.0;
            }
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= total);
            row
        })
        .collect()
}

pub fn random_mask<R: Rng>(rng: &mut R, n: usize, p: f64) -> Vec<bool> {
    (0..n).map(|_| rng.random_bool(p)).collect()
}

/// Finite chain with state `i` at position `i`, one cell per state.
pub fn finite_model(matrix: Vec<Vec<f64>>) -> Model {
    let n = matrix.len();
    let values = (0..n).map(|i| i as f64).collect();
    let k = finite_kernel(matrix, values).expect("valid chain");
    let g = Grid::new(-0.5, n as f64 - 0.5, n).expect("valid grid");
    Model::new(k, g, BTreeMap::new()).expect("valid model")
}

/// `P_x(phi U<=k psi)` by summing the probability of every path
/// `x = x_0, .., x_i` with `x_0..x_{i-1}` in `phi \ psi`, `x_i` in `psi`, `i <= k`.
pub fn enumerate_bounded_until(
    p: &[Vec<f64>],
    phi: &[bool],
    psi: &[bool],
    k: usize,
    x: usize,
) -> f64 {
    fn walk(
        p: &[Vec<f64>],
        phi: &[bool],
        psi: &[bool],
        left: usize,
        state: usize,
        prob: f64,
    ) -> f64 {
        if psi[state] {
            return prob;
        }
        if !phi[state] || left == 0 {
            return 0.0;
        }
        (0..p.len())
            .filter(|&next| p[state][next] > 0.0)
            .map(|next| walk(p, phi, psi, left - 1, next, prob * p[state][next]))
            .sum()
    }
    walk(p, phi, psi, k, x, 1.0)
}

/// `P_x(phi U psi)` by a direct linear solve on the states of `phi \ psi`
/// that can reach `psi` through `phi \ psi`; all others get 0 (or 1 on psi).
pub fn solve_unbounded_until(p: &[Vec<f64>], phi: &[bool], psi: &[bool]) -> Vec<f64> {
    let n = p.len();
    let cont: Vec<bool> = (0..n).map(|i| phi[i] && !psi[i]).collect();
    // backward reachability of psi inside phi \ psi
    let mut reach = psi.to_vec();
    loop {
        let mut changed = false;
        for i in 0..n {
            if cont[i] && !reach[i] && (0..n).any(|j| reach[j] && p[i][j] > 0.0) {
                reach[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let transient: Vec<usize> = (0..n).filter(|&i| cont[i] && reach[i]).collect();
    let mut out: Vec<f64> = psi.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    if transient.is_empty() {
        return out;
    }
    let m = transient.len();
    let a = DMatrix::from_fn(m, m, |r, c| {
        let delta = if r == c { 1.0 } else { 0.0 };
        delta - p[transient[r]][transient[c]]
    });
    let b = DVector::from_fn(m, |r, _| {
        (0..n).filter(|&j| psi[j]).map(|j| p[transient[r]][j]).sum()
    });
    let x = a
        .lu()
        .solve(&b)
        .expect("I - P_TT is nonsingular on states reaching psi");
    for (r, &i) in transient.iter().enumerate() {
        out[i] = x[r];
    }
    out
}

/// A random affine-Gaussian model on `[0, 20)` with 40 cells, plus reach sets
/// whose tails never lie in `phi \ psi`.
pub struct GaussianCase {
    pub model: Model,
    pub phi: SatSet,
    pub psi: SatSet,
}

pub fn random_gaussian_case<R: Rng>(rng: &mut R) -> GaussianCase {
    let slope = rng.random_range(0.6..1.2);
    let shift = rng.random_range(-2.0..3.0);
    let s0 = rng.random_range(0.2..3.0);
    let s1 = rng.random_range(0.0..0.15);
    let k = affine_gaussian_kernel(move |x| slope * x + shift, move |x| s0 + s1 * x.abs());
    let g = Grid::new(0.0, 20.0, 40).expect("valid grid");
    let h = g.width();
    let edge = |rng: &mut R, lo: usize, hi: usize| rng.random_range(lo..=hi) as f64 * h;
    let phi_lo = edge(rng, 0, 15);
    let phi_hi = edge(rng, 25, 40);
    let psi = if rng.random_bool(0.5) {
        Region::interval(edge(rng, 20, 40), f64::INFINITY).unwrap()
    } else {
        let a = rng.random_range(0..39);
        let b = (a + rng.random_range(1..=8)).min(40);
        Region::interval(a as f64 * h, b as f64 * h).unwrap()
    };
    let regions = BTreeMap::from([
        ("phi".to_string(), Region::interval(phi_lo, phi_hi).unwrap()),
        ("psi".to_string(), psi),
    ]);
    let model = Model::new(k, g, regions).expect("aligned regions");
    let phi = model.atom("phi").unwrap().clone();
    let psi = model.atom("psi").unwrap().clone();
    GaussianCase { model, phi, psi }
}

/// Random member of `M_b^01(phi, psi)`.
pub fn random_member<R: Rng>(rng: &mut R, phi: &SatSet, psi: &SatSet) -> ValueFunction {
    let values = phi
        .mask
        .iter()
        .zip(&psi.mask)
        .map(|(&f, &s)| {
            if s {
                1.0
            } else if f {
                rng.random::<f64>()
            } else {
                0.0
            }
        })
        .collect();
    ValueFunction {
        values,
        lower_tail_value: None,
        upper_tail_value: None,
    }
}

pub fn sup_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Prints one acceptance line and asserts.
pub fn verdict(name: &str, ok: bool, detail: impl std::fmt::Display) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("[{tag}] {name}: {detail}");
    assert!(ok, "{name} failed: {detail}");
}
