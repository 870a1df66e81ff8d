//! Lasso-penalized Cox proportional hazards regression.
//!
//! Maximizes `(1/n)·ℓ(β) − λ‖β‖₁` where `ℓ` is the partial log-likelihood
//! with Breslow handling of tied event times. Columns are standardized to
//! unit variance before fitting and coefficients are returned on the
//! original scale; `λ` always refers to the standardized problem.
//!
//! The optimizer is an outer Newton loop on a diagonal approximation of the
//! Hessian in the linear predictor, with cyclic coordinate descent and
//! soft-thresholding inside. A step that lowers the penalized objective is
//! shortened by backtracking.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::ArrayView2;

use crate::error::{Error, Result};

pub const DEFAULT_EPV: usize = 10;
/// Curvature of a unit-variance column below which the fit has degenerated.
const MIN_CURVATURE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CoxConfig {
    pub max_outer_iterations: usize,
    pub max_inner_sweeps: usize,
    /// Largest standardized coefficient change accepted at convergence.
    pub tolerance: f64,
    /// Largest subgradient violation accepted at convergence.
    pub kkt_tolerance: f64,
    /// Standardized coefficients beyond this magnitude signal divergence.
    pub coefficient_cap: f64,
}

impl Default for CoxConfig {
    fn default() -> Self {
        CoxConfig {
            max_outer_iterations: 500,
            max_inner_sweeps: 10_000,
            tolerance: 1e-7,
            kkt_tolerance: 1e-6,
            coefficient_cap: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathConfig {
    pub n_lambda: usize,
    /// Smallest λ on the path as a fraction of λ_max.
    pub min_ratio: f64,
    pub cox: CoxConfig,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            n_lambda: 100,
            min_ratio: 0.01,
            cox: CoxConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoxFit {
    pub gene_ids: Vec<String>,
    /// Original-scale coefficients.
    pub beta: Vec<f64>,
    pub lambda: f64,
    pub n_nonzero: usize,
    pub pmax: usize,
    pub partial_loglik: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl CoxFit {
    pub fn with_gene_ids(mut self, gene_ids: Vec<String>) -> Result<Self> {
        if gene_ids.len() != self.beta.len() {
            return Err(Error::invalid(format!(
                "{} gene ids for {} coefficients",
                gene_ids.len(),
                self.beta.len()
            )));
        }
        self.gene_ids = gene_ids;
        Ok(self)
    }

    /// `(gene, β)` for nonzero coefficients, in column order.
    pub fn active(&self) -> Vec<(&str, f64)> {
        self.gene_ids
            .iter()
            .zip(&self.beta)
            .filter(|(_, b)| **b != 0.0)
            .map(|(g, b)| (g.as_str(), *b))
            .collect()
    }
}

/// Admissible fits along a λ path, largest λ first.
#[derive(Debug, Clone, PartialEq)]
pub struct CoxPath {
    pub lambda_max: f64,
    pub fits: Vec<CoxFit>,
}

impl CoxPath {
    /// The smallest-λ admissible fit.
    pub fn selected(&self) -> &CoxFit {
        self.fits.last().expect("path holds at least the λ_max fit")
    }
}

/// `⌈events / epv⌉`, the events-per-variable cap on model size.
pub fn pmax_from_events(n_events: usize, epv: usize) -> Result<usize> {
    if n_events == 0 {
        return Err(Error::NoEvents);
    }
    if epv == 0 {
        return Err(Error::invalid("epv must be at least 1"));
    }
    Ok(n_events.div_ceil(epv))
}

fn check_inputs(x: ArrayView2<'_, f64>, time: &[f64], event: &[bool]) -> Result<()> {
    let n = x.nrows();
    if time.len() != n || event.len() != n {
        return Err(Error::invalid(format!(
            "{n} rows but {} times and {} event flags",
            time.len(),
            event.len()
        )));
    }
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 samples, got {n}")));
    }
    if let Some(t) = time.iter().find(|t| !t.is_finite() || **t < 0.0) {
        return Err(Error::invalid(format!("invalid survival time {t}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("design matrix has non-finite entries"));
    }
    if !event.iter().any(|&e| e) {
        return Err(Error::NoEvents);
    }
    Ok(())
}

/// Samples sorted by decreasing time, grouped by distinct time; the risk
/// set of group `g` is the prefix `0..groups[g].end`.
struct RiskSets {
    order: Vec<usize>,
    event: Vec<bool>,
    groups: Vec<Group>,
    /// Group index of each sorted sample.
    group_of: Vec<usize>,
}

struct Group {
    start: usize,
    end: usize,
    deaths: usize,
}

impl RiskSets {
    fn new(time: &[f64], event: &[bool]) -> Self {
        let mut order: Vec<usize> = (0..time.len()).collect();
        order.sort_by(|&a, &b| time[b].total_cmp(&time[a]).then(a.cmp(&b)));
        let mut groups = Vec::new();
        let mut group_of = vec![0; order.len()];
        let mut start = 0;
        while start < order.len() {
            let t = time[order[start]];
            let mut end = start;
            let mut deaths = 0;
            while end < order.len() && time[order[end]] == t {
                deaths += usize::from(event[order[end]]);
                group_of[end] = groups.len();
                end += 1;
            }
            groups.push(Group { start, end, deaths });
            start = end;
        }
        let event = order.iter().map(|&i| event[i]).collect();
        RiskSets {
            order,
            event,
            groups,
            group_of,
        }
    }

    /// Partial log-likelihood for a linear predictor in sorted order.
    fn loglik(&self, eta: &[f64]) -> f64 {
        let shift = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut s0 = 0.0;
        let mut ll = 0.0;
        for g in &self.groups {
            for k in g.start..g.end {
                s0 += (eta[k] - shift).exp();
                if self.event[k] {
                    ll += eta[k];
                }
            }
            if g.deaths > 0 {
                ll -= g.deaths as f64 * (s0.ln() + shift);
            }
        }
        ll
    }

    /// Per-sample gradient and diagonal Hessian magnitude of `ℓ` in `η`.
    fn gradient(&self, eta: &[f64], grad: &mut [f64], hess: &mut [f64]) {
        let n = eta.len();
        let shift = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = eta.iter().map(|e| (e - shift).exp()).collect();
        let mut s0 = vec![0.0; self.groups.len()];
        let mut acc = 0.0;
        for (gi, g) in self.groups.iter().enumerate() {
            acc += w[g.start..g.end].iter().sum::<f64>();
            s0[gi] = acc;
        }
        // c1[g] = Σ_{m ≥ g} d_m / S0_m, c2 likewise with S0²
        let mut c1 = vec![0.0; self.groups.len()];
        let mut c2 = vec![0.0; self.groups.len()];
        let (mut a1, mut a2) = (0.0, 0.0);
        for gi in (0..self.groups.len()).rev() {
            let d = self.groups[gi].deaths as f64;
            if d > 0.0 {
                a1 += d / s0[gi];
                a2 += d / (s0[gi] * s0[gi]);
            }
            c1[gi] = a1;
            c2[gi] = a2;
        }
        for k in 0..n {
            let g = self.group_of[k];
            let wc1 = w[k] * c1[g];
            grad[k] = f64::from(u8::from(self.event[k])) - wc1;
            hess[k] = (wc1 - w[k] * w[k] * c2[g]).max(0.0);
        }
    }
}

/// Column-standardized design in sorted sample order, stored by column.
struct Design {
    n: usize,
    p: usize,
    /// `cols[j]` is column j, centered and scaled.
    cols: Vec<Vec<f64>>,
    scale: Vec<f64>,
    risk: RiskSets,
}

impl Design {
    fn new(x: ArrayView2<'_, f64>, time: &[f64], event: &[bool]) -> Result<Self> {
        check_inputs(x, time, event)?;
        let (n, p) = x.dim();
        let risk = RiskSets::new(time, event);
        let mut cols = Vec::with_capacity(p);
        let mut scale = Vec::with_capacity(p);
        for j in 0..p {
            let col: Vec<f64> = risk.order.iter().map(|&i| x[[i, j]]).collect();
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            // columns constant up to rounding carry no information
            if sd <= 1e-12 * mean.abs().max(1.0) {
                cols.push(vec![0.0; n]);
                scale.push(0.0);
            } else {
                cols.push(col.iter().map(|v| (v - mean) / sd).collect());
                scale.push(sd);
            }
        }
        Ok(Design { n, p, cols, scale, risk })
    }

    fn eta(&self, beta: &[f64]) -> Vec<f64> {
        let mut eta = vec![0.0; self.n];
        for (col, &b) in self.cols.iter().zip(beta) {
            if b != 0.0 {
                for (e, z) in eta.iter_mut().zip(col) {
                    *e += b * z;
                }
            }
        }
        eta
    }

    /// `(1/n)·∂ℓ/∂β_j` at the given linear predictor.
    fn scores(&self, eta: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; self.n];
        let mut hess = vec![0.0; self.n];
        self.risk.gradient(eta, &mut grad, &mut hess);
        self.cols
            .iter()
            .map(|c| c.iter().zip(&grad).map(|(z, g)| z * g).sum::<f64>() / self.n as f64)
            .collect()
    }

    fn penalized(&self, beta: &[f64], lambda: f64) -> f64 {
        self.risk.loglik(&self.eta(beta)) / self.n as f64 - lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    fn lambda_max(&self) -> f64 {
        self.scores(&vec![0.0; self.n]).iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    fn to_original(&self, beta_std: &[f64]) -> Vec<f64> {
        beta_std
            .iter()
            .zip(&self.scale)
            .map(|(b, s)| if *s == 0.0 { 0.0 } else { b / s })
            .collect()
    }

    fn kkt(&self, beta: &[f64], lambda: f64) -> f64 {
        let scores = self.scores(&self.eta(beta));
        let mut worst = 0.0_f64;
        for j in 0..self.p {
            if self.scale[j] == 0.0 {
                continue;
            }
            let r = if beta[j] != 0.0 {
                (scores[j] - lambda * beta[j].signum()).abs()
            } else {
                (scores[j].abs() - lambda).max(0.0)
            };
            worst = worst.max(r);
        }
        worst
    }

    /// Fits at one λ from a warm start, returning standardized coefficients.
    fn fit(&self, lambda: f64, beta0: &[f64], cfg: &CoxConfig) -> Result<(Vec<f64>, bool, usize)> {
        let n = self.n as f64;
        let mut beta = beta0.to_vec();
        let mut current = self.penalized(&beta, lambda);
        let mut grad = vec![0.0; self.n];
        let mut hess = vec![0.0; self.n];
        for outer in 1..=cfg.max_outer_iterations {
            let eta0 = self.eta(&beta);
            self.risk.gradient(&eta0, &mut grad, &mut hess);
            let curvature: Vec<f64> = self
                .cols
                .iter()
                .map(|c| c.iter().zip(&hess).map(|(z, h)| h * z * z).sum::<f64>() / n)
                .collect();
            // an active coefficient whose curvature vanished has run off to infinity
            if let Some(j) = (0..self.p).find(|&j| beta[j] != 0.0 && curvature[j] < MIN_CURVATURE) {
                return Err(Error::UnboundedCoefficient(j));
            }
            // u = g − h·(η − η₀), the working residual of the quadratic model
            let mut u = grad.clone();
            let mut proposal = beta.clone();
            self.coordinate_descent(&mut proposal, &mut u, &hess, &curvature, lambda, cfg);

            let mut step = 1.0;
            let mut candidate = proposal.clone();
            let mut value = self.penalized(&candidate, lambda);
            let mut halvings = 0;
            while value < current - 1e-14 * current.abs().max(1.0) && halvings < 40 {
                step *= 0.5;
                halvings += 1;
                for j in 0..self.p {
                    candidate[j] = beta[j] + step * (proposal[j] - beta[j]);
                }
                value = self.penalized(&candidate, lambda);
            }
            let change = candidate
                .iter()
                .zip(&beta)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            beta = candidate;
            current = value;
            if let Some(j) = beta.iter().position(|b| b.abs() > cfg.coefficient_cap || !b.is_finite()) {
                return Err(Error::UnboundedCoefficient(j));
            }
            if change < cfg.tolerance && self.kkt(&beta, lambda) <= cfg.kkt_tolerance {
                return Ok((beta, true, outer));
            }
        }
        Ok((beta, false, cfg.max_outer_iterations))
    }

    /// Cyclic coordinate descent on the quadratic model, alternating full
    /// sweeps with sweeps over the active set.
    fn coordinate_descent(
        &self,
        beta: &mut [f64],
        u: &mut [f64],
        hess: &[f64],
        curvature: &[f64],
        lambda: f64,
        cfg: &CoxConfig,
    ) {
        let n = self.n as f64;
        let inner_tol = cfg.tolerance * 0.1;
        let update = |j: usize, beta: &mut [f64], u: &mut [f64]| -> f64 {
            let v = curvature[j];
            if v <= 0.0 {
                return 0.0;
            }
            let col = &self.cols[j];
            let g = col.iter().zip(u.iter()).map(|(z, r)| z * r).sum::<f64>() / n;
            let new = soft_threshold(v * beta[j] + g, lambda) / v;
            let delta = new - beta[j];
            if delta != 0.0 {
                for ((r, z), h) in u.iter_mut().zip(col).zip(hess) {
                    *r -= h * z * delta;
                }
                beta[j] = new;
            }
            delta.abs()
        };
        let mut sweeps = 0;
        loop {
            let mut full_change = 0.0_f64;
            for j in 0..self.p {
                full_change = full_change.max(update(j, beta, u));
            }
            sweeps += 1;
            if full_change < inner_tol || sweeps >= cfg.max_inner_sweeps {
                return;
            }
            let active: Vec<usize> = (0..self.p).filter(|&j| beta[j] != 0.0).collect();
            loop {
                let mut change = 0.0_f64;
                for &j in &active {
                    change = change.max(update(j, beta, u));
                }
                sweeps += 1;
                if change < inner_tol || sweeps >= cfg.max_inner_sweeps {
                    break;
                }
            }
        }
    }

    fn make_fit(&self, beta_std: &[f64], lambda: f64, pmax: usize, converged: bool, iterations: usize) -> CoxFit {
        let beta = self.to_original(beta_std);
        CoxFit {
            gene_ids: (1..=self.p).map(|j| format!("V{j}")).collect(),
            n_nonzero: beta.iter().filter(|b| **b != 0.0).count(),
            beta,
            lambda,
            pmax,
            partial_loglik: self.risk.loglik(&self.eta(beta_std)),
            converged,
            iterations,
        }
    }

    fn to_standardized(&self, beta: &[f64]) -> Vec<f64> {
        beta.iter().zip(&self.scale).map(|(b, s)| b * s).collect()
    }
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Breslow partial log-likelihood `Σ_{δᵢ=1} [xᵢβ − log Σ_{Yⱼ ≥ Yᵢ} exp(xⱼβ)]`.
pub fn partial_loglik(x: ArrayView2<'_, f64>, time: &[f64], event: &[bool], beta: &[f64]) -> Result<f64> {
    check_inputs(x, time, event)?;
    if beta.len() != x.ncols() {
        return Err(Error::invalid(format!("{} coefficients for {} columns", beta.len(), x.ncols())));
    }
    let risk = RiskSets::new(time, event);
    let eta: Vec<f64> = risk
        .order
        .iter()
        .map(|&i| x.row(i).iter().zip(beta).map(|(a, b)| a * b).sum())
        .collect();
    Ok(risk.loglik(&eta))
}

/// Smallest λ (standardized scale) at which the all-zero solution is optimal.
pub fn lambda_max(x: ArrayView2<'_, f64>, time: &[f64], event: &[bool]) -> Result<f64> {
    Ok(Design::new(x, time, event)?.lambda_max())
}

/// Fits at a single λ from `β = 0`.
pub fn cox_fit(x: ArrayView2<'_, f64>, time: &[f64], event: &[bool], lambda: f64, cfg: &CoxConfig) -> Result<CoxFit> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
    }
    let design = Design::new(x, time, event)?;
    let (beta, converged, iterations) = design.fit(lambda, &vec![0.0; design.p], cfg)?;
    Ok(design.make_fit(&beta, lambda, design.p, converged, iterations))
}

/// Largest subgradient violation of `fit` on the standardized problem:
/// `|s_j − λ·sign β_j|` for active and `max(0, |s_j| − λ)` for inactive
/// coefficients, with `s_j` the score divided by `n`.
pub fn subgradient_residual(x: ArrayView2<'_, f64>, time: &[f64], event: &[bool], fit: &CoxFit) -> Result<f64> {
    let design = Design::new(x, time, event)?;
    if fit.beta.len() != design.p {
        return Err(Error::invalid("fit does not match the design"));
    }
    Ok(design.kkt(&design.to_standardized(&fit.beta), fit.lambda))
}

/// Warm-started λ path from λ_max downward, truncated the first time more
/// than `pmax` coefficients become active.
pub fn fit_path_with_pmax(
    x: ArrayView2<'_, f64>,
    time: &[f64],
    event: &[bool],
    pmax: usize,
    cfg: &PathConfig,
) -> Result<CoxPath> {
    if pmax == 0 {
        return Err(Error::invalid("pmax must be at least 1"));
    }
    if cfg.n_lambda < 1 || !(cfg.min_ratio > 0.0 && cfg.min_ratio < 1.0) {
        return Err(Error::invalid("path needs n_lambda >= 1 and min_ratio in (0, 1)"));
    }
    let design = Design::new(x, time, event)?;
    let lmax = design.lambda_max();
    let mut beta = vec![0.0; design.p];
    let mut fits: Vec<CoxFit> = Vec::new();
    for k in 0..cfg.n_lambda {
        let frac = if cfg.n_lambda == 1 { 0.0 } else { k as f64 / (cfg.n_lambda - 1) as f64 };
        let lambda = lmax * cfg.min_ratio.powf(frac);
        let (next, converged, iterations) = match design.fit(lambda, &beta, &cfg.cox) {
            Ok(r) => r,
            Err(Error::UnboundedCoefficient(j)) if !fits.is_empty() => {
                log::warn!("coefficient {j} diverges at lambda {lambda:.6}; path stopped");
                break;
            }
            Err(e) => return Err(e),
        };
        let fit = design.make_fit(&next, lambda, pmax, converged, iterations);
        if fit.n_nonzero > pmax {
            break;
        }
        if !converged {
            log::warn!("cox fit at lambda {lambda:.6} did not converge");
        }
        if let Some(prev) = fits.last() {
            if fit.n_nonzero + 1 < prev.n_nonzero {
                log::warn!(
                    "active set shrank from {} to {} at lambda {lambda:.6}",
                    prev.n_nonzero,
                    fit.n_nonzero
                );
            }
        }
        fits.push(fit);
        beta = next;
    }
    assert!(!fits.is_empty(), "the λ_max fit is always admissible");
    Ok(CoxPath { lambda_max: lmax, fits })
}

/// The last admissible fit of [`fit_path_with_pmax`].
pub fn fit_with_pmax(x: ArrayView2<'_, f64>, time: &[f64], event: &[bool], pmax: usize, cfg: &PathConfig) -> Result<CoxFit> {
    Ok(fit_path_with_pmax(x, time, event, pmax, cfg)?.selected().clone())
}

/// Writes the fit header and one `gene\tbeta` row per active gene.
pub fn write_cox_fit(path: impl AsRef<Path>, fit: &CoxFit) -> Result<()> {
    let path = path.as_ref();
    let write = || -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(
            w,
            "# lambda={} pmax={} n_nonzero={} loglik={} converged={}",
            fit.lambda, fit.pmax, fit.n_nonzero, fit.partial_loglik, fit.converged
        )?;
        writeln!(w, "gene\tbeta")?;
        for (g, b) in fit.active() {
            writeln!(w, "{g}\t{b}")?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Reads a fit written by [`write_cox_fit`]; only active genes are present.
pub fn read_cox_fit(path: impl AsRef<Path>) -> Result<CoxFit> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        column: 1,
        message,
    };
    let mut fit = CoxFit {
        gene_ids: Vec::new(),
        beta: Vec::new(),
        lambda: 0.0,
        n_nonzero: 0,
        pmax: 0,
        partial_loglik: 0.0,
        converged: false,
        iterations: 0,
    };
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = idx + 1;
        if let Some(header) = line.strip_prefix('#') {
            for field in header.split_whitespace() {
                let (key, value) = field
                    .split_once('=')
                    .ok_or_else(|| parse_err(lineno, format!("malformed header field {field:?}")))?;
                let bad = |_| parse_err(lineno, format!("bad value for {key}"));
                match key {
                    "lambda" => fit.lambda = value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
                    "pmax" => fit.pmax = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
                    "loglik" => {
                        fit.partial_loglik = value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?
                    }
                    "converged" => fit.converged = value == "true",
                    _ => {}
                }
            }
            continue;
        }
        if line.trim().is_empty() || line == "gene\tbeta" {
            continue;
        }
        let (g, b) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(lineno, "expected gene<TAB>beta".into()))?;
        let b: f64 = b.trim().parse().map_err(|_| parse_err(lineno, format!("non-numeric beta {b:?}")))?;
        fit.gene_ids.push(g.to_string());
        fit.beta.push(b);
    }
    fit.n_nonzero = fit.beta.iter().filter(|b| **b != 0.0).count();
    Ok(fit)
}
