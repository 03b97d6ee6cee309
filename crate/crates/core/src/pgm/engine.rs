//! Multiplicative EM updates shared by the plain and attribute-augmented fits.
//!
//! Every step maximizes a Jensen lower bound of the objective in one block
//! (U, V, W, then Beta) with the others fixed, so the objective is
//! non-decreasing up to rounding.

use std::collections::HashSet;

use log::warn;
use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{MtcovParams, PgmFitConfig, PgmParams};
use crate::error::{Error, Result};
use crate::graph::{Dyad, EdgeSplit, Graph};
use crate::graph::split::orient;
use crate::rng::{derive_seed, rng_from_seed};

/// Training-visible structure of one fold as ordered dyads.
pub(crate) struct Observed {
    pub n_nodes: usize,
    /// Dyads with `A_ij = 1`.
    pub train: Vec<Dyad>,
    /// Dyads removed from the likelihood.
    pub held_out: Vec<Dyad>,
}

impl Observed {
    pub fn new(g: &Graph, split: &EdgeSplit) -> Self {
        let directed = g.is_directed();
        let train = orient(split.train_pos.iter().copied(), directed);
        let mut seen = HashSet::new();
        let held_out = orient(split.held_out(), directed)
            .into_iter()
            .filter(|d| seen.insert(*d))
            .collect();
        Self {
            n_nodes: g.n_nodes(),
            train,
            held_out,
        }
    }
}

pub(crate) struct AttributeTerm<'a> {
    pub labels: &'a [usize],
    pub n_categories: usize,
    pub gamma: f64,
}

/// Per-restart convergence record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub restart: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Final value of the maximized objective.
    pub objective: f64,
    /// Objective before the first update and after every iteration.
    pub history: Vec<f64>,
}

/// Row-major storage of a standard-layout matrix.
fn flat(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("parameters are kept in standard layout")
}

fn row_dot(a: &[f64], i: usize, b: &[f64], j: usize, k: usize) -> f64 {
    a[i * k..(i + 1) * k].iter().zip(&b[j * k..(j + 1) * k]).map(|(x, y)| x * y).sum()
}

pub(crate) fn network_loglik(obs: &Observed, p: &PgmParams, eps: f64) -> f64 {
    let k = p.w.nrows();
    let uw = p.u.dot(&p.w);
    let (uw_s, v_s) = (flat(&uw), flat(&p.v));
    let mut ll = 0.0;
    for &(i, j) in &obs.train {
        ll += (row_dot(uw_s, i, v_s, j, k) + eps).ln();
    }
    let su = p.u.sum_axis(Axis(0));
    let sv = p.v.sum_axis(Axis(0));
    let mut total = su.dot(&p.w).dot(&sv);
    for i in 0..obs.n_nodes {
        total -= row_dot(uw_s, i, v_s, i, k);
    }
    for &(i, j) in &obs.held_out {
        total -= row_dot(uw_s, i, v_s, j, k);
    }
    ll - total
}

/// `(S_i, D_i)`: total averaged membership and its attribute-weighted part.
fn attribute_stats(p: &MtcovParams, labels: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let (u, v) = (&p.params.u, &p.params.v);
    let mut s = vec![0.0; u.nrows()];
    let mut d = vec![0.0; u.nrows()];
    for (i, &z) in labels.iter().enumerate() {
        for c in 0..u.ncols() {
            let avg = 0.5 * (u[[i, c]] + v[[i, c]]);
            s[i] += avg;
            d[i] += avg * p.beta[[c, z]];
        }
    }
    (s, d)
}

fn attribute_loglik(p: &MtcovParams, labels: &[usize], eps: f64) -> f64 {
    let (s, d) = attribute_stats(p, labels);
    s.iter().zip(&d).map(|(s, d)| (d + eps).ln() - (s + eps).ln()).sum()
}

fn objective(obs: &Observed, p: &MtcovParams, attr: Option<&AttributeTerm<'_>>, eps: f64) -> f64 {
    let lg = network_loglik(obs, &p.params, eps);
    match attr {
        None => lg,
        Some(a) => (1.0 - a.gamma) * lg + a.gamma * attribute_loglik(p, a.labels, eps),
    }
}

/// Which membership matrix a step updates.
#[derive(Clone, Copy, PartialEq)]
enum Side {
    Out,
    In,
}

/// Updates `U` (`Side::Out`) or `V` (`Side::In`) with the others fixed.
fn update_membership(obs: &Observed, p: &mut MtcovParams, attr: Option<&AttributeTerm<'_>>, eps: f64, side: Side) {
    let k = p.params.w.nrows();
    let n = obs.n_nodes;
    // partner factor: row j of `partner` times row i of the updated matrix gives M
    let partner = match side {
        Side::Out => p.params.v.dot(&p.params.w.t()),
        Side::In => p.params.u.dot(&p.params.w),
    };
    let stats = attr.map(|a| attribute_stats(p, a.labels));
    let gamma = attr.map_or(0.0, |a| a.gamma);
    let target = match side {
        Side::Out => &mut p.params.u,
        Side::In => &mut p.params.v,
    };

    let ps = flat(&partner);
    let ts = flat(target);
    let mut num = vec![0.0; n * k];
    for &(i, j) in &obs.train {
        let (own, other) = if side == Side::Out { (i, j) } else { (j, i) };
        let r = 1.0 / (row_dot(ts, own, ps, other, k) + eps);
        let src = &ps[other * k..(other + 1) * k];
        for (acc, x) in num[own * k..(own + 1) * k].iter_mut().zip(src) {
            *acc += x * r;
        }
    }
    let colsum: Array1<f64> = partner.sum_axis(Axis(0));
    let mut den: Vec<f64> = (0..n * k).map(|ic| colsum[ic % k] - ps[ic]).collect();
    for &(i, j) in &obs.held_out {
        let (own, other) = if side == Side::Out { (i, j) } else { (j, i) };
        let src = &ps[other * k..(other + 1) * k];
        for (acc, x) in den[own * k..(own + 1) * k].iter_mut().zip(src) {
            *acc -= x;
        }
    }

    for i in 0..n {
        for c in 0..k {
            let x = target[[i, c]];
            let (extra_num, extra_den) = match (&stats, attr) {
                (Some((s, d)), Some(a)) => (
                    0.5 * x * p.beta[[c, a.labels[i]]] / (d[i] + eps),
                    0.5 / (s[i] + eps),
                ),
                _ => (0.0, 0.0),
            };
            let numer = (1.0 - gamma) * (x * num[i * k + c]) + gamma * extra_num;
            let denom = (1.0 - gamma) * den[i * k + c] + gamma * extra_den;
            if denom > 0.0 {
                target[[i, c]] = numer / denom;
            }
        }
    }
}

fn update_affinity(obs: &Observed, p: &mut PgmParams, eps: f64) {
    let k = p.w.nrows();
    let n = obs.n_nodes;
    let uw = p.u.dot(&p.w);
    let (uw_s, v_s) = (flat(&uw), flat(&p.v));
    // num = Uᵀ Q with Q_i = Σ_j r_ij v_j; held-out mass likewise through H
    let mut q = Array2::<f64>::zeros((n, k));
    let mut h = Array2::<f64>::zeros((n, k));
    {
        let qs = q.as_slice_mut().expect("fresh array");
        for &(i, j) in &obs.train {
            let r = 1.0 / (row_dot(uw_s, i, v_s, j, k) + eps);
            for (acc, vb) in qs[i * k..(i + 1) * k].iter_mut().zip(&v_s[j * k..(j + 1) * k]) {
                *acc += r * vb;
            }
        }
        let hs = h.as_slice_mut().expect("fresh array");
        for &(i, j) in &obs.held_out {
            for (acc, vb) in hs[i * k..(i + 1) * k].iter_mut().zip(&v_s[j * k..(j + 1) * k]) {
                *acc += vb;
            }
        }
    }
    let num = p.u.t().dot(&q);
    let su = p.u.sum_axis(Axis(0));
    let sv = p.v.sum_axis(Axis(0));
    let removed = p.u.t().dot(&p.v) + p.u.t().dot(&h);
    for a in 0..k {
        for b in 0..k {
            let d = su[a] * sv[b] - removed[[a, b]];
            if d > 0.0 {
                p.w[[a, b]] *= num[[a, b]] / d;
            }
        }
    }
}

fn update_emission(p: &mut MtcovParams, attr: &AttributeTerm<'_>, eps: f64) {
    let k = p.params.w.nrows();
    let (_, d) = attribute_stats(p, attr.labels);
    let mut acc = Array2::<f64>::zeros((k, attr.n_categories));
    for (i, &z) in attr.labels.iter().enumerate() {
        for c in 0..k {
            let avg = 0.5 * (p.params.u[[i, c]] + p.params.v[[i, c]]);
            acc[[c, z]] += avg * p.beta[[c, z]] / (d[i] + eps);
        }
    }
    for (mut row, acc_row) in p.beta.rows_mut().into_iter().zip(acc.rows()) {
        let total = acc_row.sum();
        if total > 0.0 {
            row.assign(&acc_row.mapv(|x| x / total));
        }
    }
}

/// Runs EM from `start` until the relative objective change drops below
/// `rel_tol` or `max_iter` iterations pass.
pub(crate) fn run(
    obs: &Observed,
    mut p: MtcovParams,
    attr: Option<&AttributeTerm<'_>>,
    cfg: &PgmFitConfig,
    restart: usize,
) -> (MtcovParams, FitTrace) {
    let eps = cfg.epsilon;
    for m in [&mut p.params.u, &mut p.params.v, &mut p.params.w] {
        if !m.is_standard_layout() {
            *m = m.as_standard_layout().into_owned();
        }
    }
    let mut prev = objective(obs, &p, attr, eps);
    let mut history = vec![prev];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..cfg.max_iter {
        update_membership(obs, &mut p, attr, eps, Side::Out);
        update_membership(obs, &mut p, attr, eps, Side::In);
        update_affinity(obs, &mut p.params, eps);
        if let Some(a) = attr {
            update_emission(&mut p, a, eps);
        }
        iterations += 1;
        let current = objective(obs, &p, attr, eps);
        history.push(current);
        if !current.is_finite() {
            break;
        }
        if ((current - prev) / prev.abs().max(f64::MIN_POSITIVE)).abs() < cfg.rel_tol {
            converged = true;
            break;
        }
        prev = current;
    }
    let trace = FitTrace {
        restart,
        iterations,
        converged,
        objective: *history.last().expect("history starts non-empty"),
        history,
    };
    (p, trace)
}

pub(crate) fn random_start(n: usize, k: usize, n_categories: usize, seed: u64) -> MtcovParams {
    let mut rng = rng_from_seed(seed);
    let mut draw = |rows: usize, cols: usize| Array2::from_shape_fn((rows, cols), |_| rng.random::<f64>());
    let u = draw(n, k);
    let v = draw(n, k);
    let w = draw(k, k);
    let mut beta = draw(k, n_categories);
    for mut row in beta.rows_mut() {
        let total = row.sum();
        row /= total;
    }
    MtcovParams {
        params: PgmParams { u, v, w },
        beta,
        gamma: 0.0,
    }
}

pub(crate) fn fit_restarts(
    obs: &Observed,
    cfg: &PgmFitConfig,
    attr: Option<&AttributeTerm<'_>>,
) -> Result<(MtcovParams, FitTrace)> {
    let n_categories = attr.map_or(0, |a| a.n_categories);
    let mut best: Option<(MtcovParams, FitTrace)> = None;
    let restarts = cfg.n_restarts.max(1);
    for r in 0..restarts {
        let start = random_start(obs.n_nodes, cfg.k, n_categories, derive_seed(cfg.seed, r as u64));
        let (mut fit, trace) = run(obs, start, attr, cfg, r);
        fit.gamma = attr.map_or(0.0, |a| a.gamma);
        let finite = fit.params.is_valid()
            && fit.beta.iter().all(|x| x.is_finite())
            && trace.objective.is_finite();
        if !finite {
            warn!("restart {r} produced non-finite parameters; discarded");
            continue;
        }
        if best.as_ref().is_none_or(|(_, t)| trace.objective > t.objective) {
            best = Some((fit, trace));
        }
    }
    best.ok_or(Error::Diverged { restarts })
}
