//! ℓ1-penalized Gaussian maximum likelihood for a sparse precision matrix.
//!
//! Maximizes `log det Θ − tr(SΘ) − ρ‖Θ‖₁` by block coordinate descent over
//! columns. Each block update works on the precision matrix itself: with
//! `Θ₁₁` held fixed, the optimal `θ₂₂ − θ₁₂ᵀΘ₁₁⁻¹θ₁₂` has the closed form
//! `1/w₂₂` (with `w₂₂ = s₂₂ + ρ`, or `s₂₂` when the diagonal is left
//! unpenalized) and `θ₁₂` solves the lasso
//!
//! ```text
//! min_x  ½ xᵀ (w₂₂ Θ₁₁⁻¹) x + s₁₂ᵀ x + ρ‖x‖₁
//! ```
//!
//! by cyclic coordinate descent. Every block step is an exact (or
//! monotone) minimization of the full objective in that block, so iterates
//! stay positive definite and the objective never decreases between sweeps.
//! The working covariance `W = Θ⁻¹` is maintained by rank-one updates inside
//! a sweep and refreshed from a Cholesky factorization after it.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub struct GlassoConfig {
    pub rho: f64,
    pub penalize_diagonal: bool,
    pub max_iterations: usize,
    /// Bound on both the relative change of `W` between sweeps and the
    /// final KKT residual.
    pub tolerance: f64,
    /// Entries with smaller magnitude count as structural zeros.
    pub zero_epsilon: f64,
}

impl Default for GlassoConfig {
    fn default() -> Self {
        GlassoConfig {
            rho: 0.1,
            penalize_diagonal: true,
            max_iterations: 1000,
            tolerance: 1e-6,
            zero_epsilon: 1e-8,
        }
    }
}

impl GlassoConfig {
    pub fn with_rho(rho: f64) -> Self {
        GlassoConfig {
            rho,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return Err(Error::invalid(format!("rho must be >= 0, got {}", self.rho)));
        }
        if !(self.tolerance > 0.0) || !(self.zero_epsilon > 0.0) {
            return Err(Error::invalid("tolerance and zero_epsilon must be > 0"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be positive"));
        }
        Ok(())
    }
}

/// Estimated precision matrix with solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionMatrix {
    pub gene_ids: Vec<String>,
    pub theta: Array2<f64>,
    pub rho_used: f64,
    pub penalize_diagonal: bool,
    pub converged: bool,
    pub iterations: usize,
    /// `F − R` at the returned `theta`.
    pub objective_value: f64,
    pub kkt_residual: f64,
}

impl PrecisionMatrix {
    pub fn with_gene_ids(mut self, gene_ids: Vec<String>) -> Result<Self> {
        if gene_ids.len() != self.theta.nrows() {
            return Err(Error::invalid(format!(
                "{} gene ids for a {}x{} precision matrix",
                gene_ids.len(),
                self.theta.nrows(),
                self.theta.nrows()
            )));
        }
        self.gene_ids = gene_ids;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.theta.nrows()
    }

    /// Off-diagonal pairs `i < j` with `|θ_ij| ≥ zero_epsilon`.
    pub fn edge_count(&self, zero_epsilon: f64) -> usize {
        let p = self.dim();
        let mut count = 0;
        for i in 0..p {
            for j in (i + 1)..p {
                if self.theta[[i, j]].abs() >= zero_epsilon {
                    count += 1;
                }
            }
        }
        count
    }

    /// Per-gene number of incident edges.
    pub fn degrees(&self, zero_epsilon: f64) -> Vec<usize> {
        let p = self.dim();
        (0..p)
            .map(|i| {
                (0..p)
                    .filter(|&j| j != i && self.theta[[i, j]].abs() >= zero_epsilon)
                    .count()
            })
            .collect()
    }
}

fn default_ids(p: usize) -> Vec<String> {
    (1..=p).map(|i| format!("V{i}")).collect()
}

/// The two parts of the objective, `(F, R)` with
/// `F = log det Θ − tr(SΘ)` and `R = ρ‖Θ‖₁` (off-diagonal only when the
/// diagonal is unpenalized).
pub fn objective(
    theta: ArrayView2<'_, f64>,
    s: ArrayView2<'_, f64>,
    rho: f64,
    penalize_diagonal: bool,
) -> Result<(f64, f64)> {
    check_square_pair(theta, s)?;
    let l = linalg::cholesky(theta)?;
    let log_det = linalg::log_det_from_cholesky(&l);
    let p = theta.nrows();
    let mut trace = 0.0;
    let mut l1 = 0.0;
    for i in 0..p {
        for j in 0..p {
            trace += s[[i, j]] * theta[[j, i]];
            if i != j || penalize_diagonal {
                l1 += theta[[i, j]].abs();
            }
        }
    }
    Ok((log_det - trace, rho * l1))
}

/// Largest violation of the optimality conditions
/// `W − S − ρ·sign(Θ) = 0` (nonzero entries) and `|W − S| ≤ ρ` (zero entries),
/// with `W = Θ⁻¹`.
pub fn kkt_residual(
    theta: ArrayView2<'_, f64>,
    s: ArrayView2<'_, f64>,
    rho: f64,
    penalize_diagonal: bool,
    zero_epsilon: f64,
) -> Result<f64> {
    check_square_pair(theta, s)?;
    let w = linalg::inverse_spd(theta)?;
    Ok(kkt_with_inverse(theta, &w, s, rho, penalize_diagonal, zero_epsilon))
}

fn kkt_with_inverse(
    theta: ArrayView2<'_, f64>,
    w: &Array2<f64>,
    s: ArrayView2<'_, f64>,
    rho: f64,
    penalize_diagonal: bool,
    zero_epsilon: f64,
) -> f64 {
    let p = theta.nrows();
    let mut worst = 0.0_f64;
    for i in 0..p {
        for j in 0..p {
            let g = w[[i, j]] - s[[i, j]];
            let t = theta[[i, j]];
            let r = if i == j && !penalize_diagonal {
                g.abs()
            } else if t.abs() >= zero_epsilon {
                (g - rho * t.signum()).abs()
            } else {
                (g.abs() - rho).max(0.0)
            };
            worst = worst.max(r);
        }
    }
    worst
}

fn check_square_pair(theta: ArrayView2<'_, f64>, s: ArrayView2<'_, f64>) -> Result<()> {
    if theta.nrows() != theta.ncols() || theta.dim() != s.dim() {
        return Err(Error::invalid(format!(
            "shape mismatch: theta {:?}, S {:?}",
            theta.dim(),
            s.dim()
        )));
    }
    Ok(())
}

/// Fits the graphical lasso to the covariance `s`.
///
/// Gene ids default to `V1..Vp`; see [`PrecisionMatrix::with_gene_ids`].
/// Running out of iterations is not an error: the result carries
/// `converged = false`.
pub fn glasso_fit(s: ArrayView2<'_, f64>, config: &GlassoConfig) -> Result<PrecisionMatrix> {
    Solver::new(s, config)?.run(None)
}

/// As [`glasso_fit`], also returning `F − R` after initialization and after
/// every sweep.
pub fn glasso_fit_traced(s: ArrayView2<'_, f64>, config: &GlassoConfig) -> Result<(PrecisionMatrix, Vec<f64>)> {
    let mut trace = Vec::new();
    let fit = Solver::new(s, config)?.run(Some(&mut trace))?;
    Ok((fit, trace))
}

struct Solver<'a> {
    s: ArrayView2<'a, f64>,
    cfg: &'a GlassoConfig,
    /// Target diagonal of `W` at the optimum.
    w_diag: Vec<f64>,
}

impl<'a> Solver<'a> {
    fn new(s: ArrayView2<'a, f64>, cfg: &'a GlassoConfig) -> Result<Self> {
        cfg.validate()?;
        let p = s.nrows();
        if p == 0 || s.ncols() != p {
            return Err(Error::invalid(format!("covariance must be square and non-empty, got {:?}", s.dim())));
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("covariance has non-finite entries"));
        }
        let scale = s.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        if linalg::asymmetry(s) > 1e-10 * scale {
            return Err(Error::invalid("covariance is not symmetric"));
        }
        if cfg.rho == 0.0 && linalg::cholesky(s).is_err() {
            return Err(Error::IllPosed);
        }
        let shift = if cfg.penalize_diagonal { cfg.rho } else { 0.0 };
        let w_diag: Vec<f64> = (0..p).map(|i| s[[i, i]] + shift).collect();
        if let Some(i) = w_diag.iter().position(|&w| !(w > 0.0)) {
            return Err(Error::invalid(format!(
                "variable {} has zero variance and an unpenalized diagonal",
                i + 1
            )));
        }
        Ok(Solver { s, cfg, w_diag })
    }

    /// `W = S + ρI` (the usual glasso start) when that is positive definite,
    /// otherwise its diagonal.
    fn start(&self) -> (Array2<f64>, Array2<f64>) {
        let p = self.s.nrows();
        let mut w = self.s.to_owned();
        for i in 0..p {
            w[[i, i]] = self.w_diag[i];
        }
        if let Ok(theta) = linalg::inverse_spd(w.view()) {
            if linalg::is_positive_definite(theta.view()) {
                return (theta, w);
            }
        }
        let mut theta = Array2::<f64>::zeros((p, p));
        let mut w = Array2::<f64>::zeros((p, p));
        for i in 0..p {
            theta[[i, i]] = 1.0 / self.w_diag[i];
            w[[i, i]] = self.w_diag[i];
        }
        (theta, w)
    }

    fn objective(&self, theta: &Array2<f64>, chol: &Array2<f64>) -> f64 {
        let p = theta.nrows();
        let mut trace = 0.0;
        let mut l1 = 0.0;
        for i in 0..p {
            for j in 0..p {
                trace += self.s[[i, j]] * theta[[i, j]];
                if i != j || self.cfg.penalize_diagonal {
                    l1 += theta[[i, j]].abs();
                }
            }
        }
        linalg::log_det_from_cholesky(chol) - trace - self.cfg.rho * l1
    }

    fn run(self, mut trace: Option<&mut Vec<f64>>) -> Result<PrecisionMatrix> {
        let p = self.s.nrows();
        let cfg = self.cfg;
        let (mut theta, mut w) = self.start();
        let chol = linalg::cholesky(theta.view())?;
        let mut objective = self.objective(&theta, &chol);
        if let Some(t) = trace.as_deref_mut() {
            t.push(objective);
        }

        let s_scale = (0..p).map(|i| self.s[[i, i]].abs()).fold(1.0_f64, f64::max);
        let mut inner_tol = cfg.tolerance * 0.1 * s_scale;
        let mut converged = p == 1;
        let mut iterations = 0;
        let mut kkt = kkt_with_inverse(theta.view(), &w, self.s, cfg.rho, cfg.penalize_diagonal, cfg.zero_epsilon);

        let mut scratch = Workspace::new(p);
        while !converged && iterations < cfg.max_iterations {
            iterations += 1;
            let w_old = w.clone();
            for j in 0..p {
                self.update_column(j, &mut theta, &mut w, inner_tol, &mut scratch);
            }
            // refresh W from Θ to stop drift in the rank-one updates
            let chol = linalg::cholesky(theta.view())?;
            w = linalg::inverse_from_cholesky(&chol);
            objective = self.objective(&theta, &chol);
            if let Some(t) = trace.as_deref_mut() {
                t.push(objective);
            }

            let change: f64 = w.iter().zip(w_old.iter()).map(|(a, b)| (a - b).abs()).sum();
            let size: f64 = w_old.iter().map(|v| v.abs()).sum();
            if change <= cfg.tolerance * size {
                kkt = kkt_with_inverse(theta.view(), &w, self.s, cfg.rho, cfg.penalize_diagonal, cfg.zero_epsilon);
                if kkt <= cfg.tolerance {
                    converged = true;
                } else {
                    inner_tol = (inner_tol * 0.1).max(1e-15 * s_scale);
                }
            }
        }
        if !converged && p > 1 {
            kkt = kkt_with_inverse(theta.view(), &w, self.s, cfg.rho, cfg.penalize_diagonal, cfg.zero_epsilon);
            log::warn!(
                "glasso did not converge in {} sweeps (rho = {}, KKT residual {:.3e})",
                iterations,
                cfg.rho,
                kkt
            );
        }
        if p == 1 {
            kkt = kkt_with_inverse(theta.view(), &w, self.s, cfg.rho, cfg.penalize_diagonal, cfg.zero_epsilon);
        }
        Ok(PrecisionMatrix {
            gene_ids: default_ids(p),
            theta,
            rho_used: cfg.rho,
            penalize_diagonal: cfg.penalize_diagonal,
            converged,
            iterations,
            objective_value: objective,
            kkt_residual: kkt,
        })
    }

    /// Exact block minimization over row/column `j` of Θ.
    fn update_column(&self, j: usize, theta: &mut Array2<f64>, w: &mut Array2<f64>, inner_tol: f64, ws: &mut Workspace) {
        let p = theta.nrows();
        let m = p - 1;
        let rest = |k: usize| if k < j { k } else { k + 1 };
        let w22 = w[[j, j]];
        let target = self.w_diag[j];

        // A = Θ₁₁⁻¹ = W₁₁ − w₁₂w₁₂ᵀ / w₂₂
        for a in 0..m {
            let ia = rest(a);
            let wa = w[[ia, j]];
            for b in 0..=a {
                let ib = rest(b);
                let v = w[[ia, ib]] - wa * w[[ib, j]] / w22;
                ws.a[[a, b]] = v;
                ws.a[[b, a]] = v;
            }
            ws.x[a] = theta[[ia, j]];
            ws.lin[a] = self.s[[ia, j]];
        }

        lasso_cd(&ws.a, target, &ws.lin, self.cfg.rho, &mut ws.x, &mut ws.grad, inner_tol);

        // Ax and the new column of Θ
        for a in 0..m {
            let mut v = 0.0;
            for b in 0..m {
                v += ws.a[[a, b]] * ws.x[b];
            }
            ws.ax[a] = v;
        }
        let quad: f64 = (0..m).map(|a| ws.x[a] * ws.ax[a]).sum();
        theta[[j, j]] = 1.0 / target + quad;
        for a in 0..m {
            let ia = rest(a);
            theta[[ia, j]] = ws.x[a];
            theta[[j, ia]] = ws.x[a];
        }

        // W blocks for the updated Θ
        w[[j, j]] = target;
        for a in 0..m {
            let ia = rest(a);
            let w12a = -ws.ax[a] * target;
            w[[ia, j]] = w12a;
            w[[j, ia]] = w12a;
        }
        for a in 0..m {
            let ia = rest(a);
            let ua = ws.ax[a];
            for b in 0..=a {
                let ib = rest(b);
                let v = ws.a[[a, b]] + target * ua * ws.ax[b];
                w[[ia, ib]] = v;
                w[[ib, ia]] = v;
            }
        }
    }
}

struct Workspace {
    a: Array2<f64>,
    x: Array1<f64>,
    lin: Array1<f64>,
    grad: Array1<f64>,
    ax: Array1<f64>,
}

impl Workspace {
    fn new(p: usize) -> Self {
        let m = p.saturating_sub(1);
        Workspace {
            a: Array2::zeros((m, m)),
            x: Array1::zeros(m),
            lin: Array1::zeros(m),
            grad: Array1::zeros(m),
            ax: Array1::zeros(m),
        }
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Cyclic coordinate descent for `min ½ xᵀ(c·A)x + linᵀx + ρ‖x‖₁`, warm
/// started at `x`. `grad` is scratch space for `c·A·x`.
fn lasso_cd(
    a: &Array2<f64>,
    c: f64,
    lin: &Array1<f64>,
    rho: f64,
    x: &mut Array1<f64>,
    grad: &mut Array1<f64>,
    tol: f64,
) {
    let m = x.len();
    for k in 0..m {
        let mut v = 0.0;
        for l in 0..m {
            v += a[[k, l]] * x[l];
        }
        grad[k] = c * v;
    }
    const MAX_SWEEPS: usize = 10_000;
    for _ in 0..MAX_SWEEPS {
        let mut biggest = 0.0_f64;
        for k in 0..m {
            let qkk = c * a[[k, k]];
            let old = x[k];
            let r = lin[k] + grad[k] - qkk * old;
            let new = -soft_threshold(r, rho) / qkk;
            let delta = new - old;
            if delta != 0.0 {
                x[k] = new;
                for l in 0..m {
                    grad[l] += c * a[[l, k]] * delta;
                }
                biggest = biggest.max(delta.abs() * qkk);
            }
        }
        if biggest <= tol {
            break;
        }
    }
}

/// Writes the upper triangle (diagonal included) of Θ as
/// `gene_i gene_j theta_ij` rows, skipping entries below `zero_epsilon`.
pub fn write_triplets(path: impl AsRef<Path>, prec: &PrecisionMatrix, zero_epsilon: f64) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let p = prec.dim();
    let mut write = || -> std::io::Result<()> {
        writeln!(
            w,
            "# genes={} rho={} penalize_diagonal={} converged={} iterations={} objective={}",
            p, prec.rho_used, prec.penalize_diagonal, prec.converged, prec.iterations, prec.objective_value
        )?;
        for i in 0..p {
            for j in i..p {
                let v = prec.theta[[i, j]];
                if v.abs() >= zero_epsilon {
                    writeln!(w, "{}\t{}\t{}", prec.gene_ids[i], prec.gene_ids[j], v)?;
                }
            }
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Reads a file written by [`write_triplets`]. Gene order is the order of
/// first appearance on the diagonal rows.
pub fn read_triplets(path: impl AsRef<Path>) -> Result<PrecisionMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        column: 0,
        message,
    };
    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?
        .map_err(|e| Error::io(path, e))?;
    let field = |key: &str| -> Result<String> {
        header
            .split_whitespace()
            .find_map(|t| t.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .map(str::to_string)
            .ok_or_else(|| parse_err(1, format!("header lacks {key}")))
    };
    let p: usize = field("genes")?.parse().map_err(|_| parse_err(1, "bad gene count".into()))?;
    let rho: f64 = field("rho")?.parse().map_err(|_| parse_err(1, "bad rho".into()))?;
    let penalize_diagonal = field("penalize_diagonal")? == "true";
    let converged = field("converged")? == "true";
    let iterations: usize = field("iterations")?.parse().unwrap_or(0);
    let objective_value: f64 = field("objective")?.parse().unwrap_or(f64::NAN);

    let mut ids: Vec<String> = Vec::with_capacity(p);
    let mut index = std::collections::HashMap::new();
    let mut entries = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 3 {
            return Err(parse_err(k + 2, "expected three tab-separated fields".into()));
        }
        let v: f64 = parts[2].parse().map_err(|_| parse_err(k + 2, "bad value".into()))?;
        for g in &parts[..2] {
            if !index.contains_key(*g) {
                index.insert(g.to_string(), ids.len());
                ids.push(g.to_string());
            }
        }
        entries.push((index[parts[0]], index[parts[1]], v));
    }
    if ids.len() != p {
        return Err(parse_err(1, format!("header says {p} genes, found {}", ids.len())));
    }
    let mut theta = Array2::<f64>::zeros((p, p));
    for (i, j, v) in entries {
        theta[[i, j]] = v;
        theta[[j, i]] = v;
    }
    Ok(PrecisionMatrix {
        gene_ids: ids,
        theta,
        rho_used: rho,
        penalize_diagonal,
        converged,
        iterations,
        objective_value,
        kkt_residual: f64::NAN,
    })
}
