//! Seeded synthetic cohorts with known structure: sparse precision matrices,
//! Gaussian expression drawn from them, and exponential proportional-hazards
//! survival.

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus::{ClinicalRecord, ClinicalTable, ExpressionMatrix, GliomaLabel, GliomaType};
use crate::error::{Error, Result};
use crate::linalg;

const WEIGHT_LOW: f64 = 0.2;
const WEIGHT_HIGH: f64 = 0.6;
const DIAGONAL_MARGIN: f64 = 0.5;
/// Smaller margin for planted blocks, which strengthens their correlations.
const BLOCK_MARGIN: f64 = 0.1;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn random_weight(rng: &mut impl Rng) -> f64 {
    let magnitude = rng.random_range(WEIGHT_LOW..WEIGHT_HIGH);
    if rng.random_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

/// Sets each diagonal entry to its row's absolute off-diagonal sum plus a
/// margin, which makes the matrix strictly diagonally dominant and so PD.
fn fill_diagonal(theta: &mut Array2<f64>, margin: f64) {
    let p = theta.nrows();
    for i in 0..p {
        let off: f64 = (0..p).filter(|&j| j != i).map(|j| theta[[i, j]].abs()).sum();
        theta[[i, i]] = off + margin;
    }
}

/// Random sparse precision matrix: each off-diagonal pair is an edge with
/// probability `edge_density`, weights uniform in ±[0.2, 0.6].
pub fn sample_sparse_precision(p: usize, edge_density: f64, seed: u64) -> Result<Array2<f64>> {
    if p < 2 {
        return Err(Error::invalid(format!("need p >= 2, got {p}")));
    }
    if !(edge_density > 0.0 && edge_density < 1.0) {
        return Err(Error::invalid(format!("edge density must lie in (0, 1), got {edge_density}")));
    }
    let mut rng = rng_for(seed, 0);
    let mut theta = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        for j in (i + 1)..p {
            if rng.random_bool(edge_density) {
                let w = random_weight(&mut rng);
                theta[[i, j]] = w;
                theta[[j, i]] = w;
            }
        }
    }
    fill_diagonal(&mut theta, DIAGONAL_MARGIN);
    Ok(theta)
}

/// A precision matrix whose only edges form one connected block.
#[derive(Debug, Clone)]
pub struct PlantedBlock {
    pub theta: Array2<f64>,
    /// Block members, ascending.
    pub block: Vec<usize>,
}

/// `DΘD` with `D = diag(sqrt(Σ_ii))`, so that `Σ = Θ⁻¹` has unit diagonal.
/// Sparsity and partial correlations are unchanged.
fn unit_variance(theta: Array2<f64>) -> Result<Array2<f64>> {
    let sigma = linalg::inverse_spd(theta.view())?;
    let d: Vec<f64> = sigma.diag().iter().map(|v| v.sqrt()).collect();
    Ok(Array2::from_shape_fn(theta.dim(), |(i, j)| (d[i] * d[j]) * theta[[i, j]]))
}

/// Plants a connected block on `block` (a random spanning tree plus extra
/// edges with probability `within_density`); all other genes are isolated.
/// Every gene has unit marginal variance, so block membership shows only
/// in the correlations.
pub fn plant_block(p: usize, block: &[usize], within_density: f64, rng: &mut impl Rng) -> Array2<f64> {
    let mut theta = Array2::<f64>::zeros((p, p));
    let mut order = block.to_vec();
    order.shuffle(rng);
    for k in 1..order.len() {
        let parent = order[rng.random_range(0..k)];
        let w = random_weight(rng);
        theta[[order[k], parent]] = w;
        theta[[parent, order[k]]] = w;
    }
    for a in 0..block.len() {
        for b in (a + 1)..block.len() {
            let (i, j) = (block[a], block[b]);
            if theta[[i, j]] == 0.0 && rng.random_bool(within_density) {
                let w = random_weight(rng);
                theta[[i, j]] = w;
                theta[[j, i]] = w;
            }
        }
    }
    fill_diagonal(&mut theta, BLOCK_MARGIN);
    unit_variance(theta).expect("diagonally dominant matrices are PD")
}

pub fn planted_block_precision(p: usize, block_size: usize, within_density: f64, seed: u64) -> Result<PlantedBlock> {
    if block_size < 2 || block_size > p {
        return Err(Error::invalid(format!("block size {block_size} out of range for p = {p}")));
    }
    if !(0.0..=1.0).contains(&within_density) {
        return Err(Error::invalid("within-block density must lie in [0, 1]"));
    }
    let mut rng = rng_for(seed, 1);
    let mut genes: Vec<usize> = (0..p).collect();
    genes.shuffle(&mut rng);
    let mut block = genes[..block_size].to_vec();
    block.sort_unstable();
    let theta = plant_block(p, &block, within_density, &mut rng);
    Ok(PlantedBlock { theta, block })
}

pub fn gene_names(p: usize) -> Vec<String> {
    let width = p.to_string().len().max(3);
    (1..=p).map(|j| format!("g{j:0width$}")).collect()
}

pub fn sample_names(n: usize) -> Vec<String> {
    let width = n.to_string().len().max(3);
    (1..=n).map(|i| format!("s{i:0width$}")).collect()
}

/// Rows `x = L z` with `L Lᵀ = Θ⁻¹` and `z` standard normal.
fn draw_gaussian_rows(n: usize, theta: ArrayView2<'_, f64>, rng: &mut impl Rng) -> Result<Array2<f64>> {
    let sigma = linalg::inverse_spd(theta)?;
    let l = linalg::cholesky(sigma.view())?;
    let p = theta.nrows();
    let mut x = Array2::<f64>::zeros((n, p));
    let mut z = vec![0.0; p];
    for i in 0..n {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        for a in 0..p {
            let mut s = 0.0;
            for b in 0..=a {
                s += l[[a, b]] * z[b];
            }
            x[[i, a]] = s;
        }
    }
    Ok(x)
}

/// `n` independent draws from `N(0, Θ⁻¹)` with generated sample and gene ids.
pub fn sample_expression(n: usize, theta: ArrayView2<'_, f64>, seed: u64) -> Result<ExpressionMatrix> {
    let mut rng = rng_for(seed, 2);
    let x = draw_gaussian_rows(n, theta, &mut rng)?;
    ExpressionMatrix::new(sample_names(n), gene_names(theta.nrows()), x)
}

/// Exponential event times with hazard `baseline_scale · exp(xᵢβ)`, and
/// independent uniform censoring on `[0, c]` with `c` chosen so the
/// expected censored fraction matches `censor_rate`.
pub fn sample_survival(
    x: ArrayView2<'_, f64>,
    beta: &[f64],
    baseline_scale: f64,
    censor_rate: f64,
    seed: u64,
) -> Result<(Vec<f64>, Vec<bool>)> {
    if beta.len() != x.ncols() {
        return Err(Error::invalid(format!("{} coefficients for {} columns", beta.len(), x.ncols())));
    }
    if !(0.0..1.0).contains(&censor_rate) {
        return Err(Error::invalid(format!("censor rate must lie in [0, 1), got {censor_rate}")));
    }
    if !(baseline_scale > 0.0) {
        return Err(Error::invalid("baseline scale must be positive"));
    }
    let mut rng = rng_for(seed, 3);
    let beta = Array1::from(beta.to_vec());
    let eta = x.dot(&beta);
    let event_times: Vec<f64> = eta
        .iter()
        .map(|e| {
            let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
            -u.ln() / (baseline_scale * e.exp())
        })
        .collect();
    if censor_rate == 0.0 {
        return Ok((event_times, vec![true; x.nrows()]));
    }
    let cmax = calibrate_censoring(&event_times, censor_rate);
    let mut time = Vec::with_capacity(event_times.len());
    let mut event = Vec::with_capacity(event_times.len());
    for t in event_times {
        let c = rng.random::<f64>() * cmax;
        if c < t {
            time.push(c);
            event.push(false);
        } else {
            time.push(t);
            event.push(true);
        }
    }
    Ok((time, event))
}

/// Solves `mean(min(Tᵢ, c)) / c = rate` for `c` by bisection in `log c`.
fn calibrate_censoring(times: &[f64], rate: f64) -> f64 {
    let censored_fraction = |c: f64| times.iter().map(|t| t.min(c)).sum::<f64>() / (c * times.len() as f64);
    let max_t = times.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
    let (mut lo, mut hi) = ((max_t * 1e-12).ln(), (max_t * 1e12).ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if censored_fraction(mid.exp()) > rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// Ground truth behind one generated precision matrix.
#[derive(Debug, Clone)]
pub struct SyntheticTruth {
    pub theta_true: Array2<f64>,
    pub edges: Vec<(usize, usize)>,
    /// Genes of maximal degree.
    pub hub_ids: Vec<String>,
    pub beta_true: Vec<f64>,
    pub censor_rate: f64,
    pub seed: u64,
}

impl SyntheticTruth {
    fn from_theta(theta: Array2<f64>, names: &[String], beta_true: Vec<f64>, censor_rate: f64, seed: u64) -> Self {
        let p = theta.nrows();
        let mut edges = Vec::new();
        let mut degree = vec![0usize; p];
        for i in 0..p {
            for j in (i + 1)..p {
                if theta[[i, j]] != 0.0 {
                    edges.push((i, j));
                    degree[i] += 1;
                    degree[j] += 1;
                }
            }
        }
        let top = degree.iter().copied().max().unwrap_or(0);
        let hub_ids = if top == 0 {
            Vec::new()
        } else {
            (0..p).filter(|&i| degree[i] == top).map(|i| names[i].clone()).collect()
        };
        SyntheticTruth {
            theta_true: theta,
            edges,
            hub_ids,
            beta_true,
            censor_rate,
            seed,
        }
    }

    /// Genes with at least one edge.
    pub fn connected_genes(&self, names: &[String]) -> Vec<String> {
        let mut flag = vec![false; self.theta_true.nrows()];
        for &(i, j) in &self.edges {
            flag[i] = true;
            flag[j] = true;
        }
        (0..flag.len()).filter(|&i| flag[i]).map(|i| names[i].clone()).collect()
    }
}

/// Settings for [`generate_cohort`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub n_genes: usize,
    /// Size of each type's planted block.
    pub block_size: usize,
    /// Genes shared by consecutive type blocks.
    pub block_overlap: usize,
    pub within_density: f64,
    /// Number of prognostic genes, taken from the GBM block.
    pub n_prognostic: usize,
    /// True log-hazard coefficient of each prognostic gene.
    pub effect: f64,
    /// Mean shift (in marginal sd units) of prognostic genes in high-risk samples.
    pub risk_shift: f64,
    pub baseline_scale: f64,
    pub censor_rate: f64,
    /// Fraction of astrocytoma samples relabeled GBM under the 2021 scheme.
    pub relabel_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_samples: 300,
            n_genes: 100,
            block_size: 10,
            block_overlap: 3,
            within_density: 0.2,
            n_prognostic: 3,
            effect: 1.0,
            risk_shift: 2.5,
            baseline_scale: 1e-3,
            censor_rate: 0.3,
            relabel_fraction: 0.1,
            seed: 1,
        }
    }
}

/// A three-type cohort with per-type planted networks and a prognostic
/// signal concentrated in the GBM samples.
#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    pub expression: ExpressionMatrix,
    pub clinical: ClinicalTable,
    /// One truth per type, in [`GliomaType::TYPES`] order.
    pub type_truths: Vec<(GliomaType, SyntheticTruth)>,
    pub prognostic_genes: Vec<String>,
    /// Latent high-risk membership per sample (the shifted samples).
    pub high_risk: Vec<bool>,
}

impl SyntheticCohort {
    pub fn block_genes(&self, glioma_type: GliomaType) -> Vec<String> {
        self.type_truths
            .iter()
            .find(|(t, _)| *t == glioma_type)
            .map(|(_, truth)| truth.connected_genes(self.expression.gene_ids()))
            .unwrap_or_default()
    }
}

pub fn generate_cohort(cfg: &SynthConfig) -> Result<SyntheticCohort> {
    let p = cfg.n_genes;
    let stride = cfg.block_size.checked_sub(cfg.block_overlap).filter(|s| *s > 0).ok_or_else(|| {
        Error::invalid("block overlap must be smaller than the block size")
    })?;
    let span = 2 * stride + cfg.block_size;
    if span > p {
        return Err(Error::invalid(format!("three blocks need {span} genes, only {p} available")));
    }
    if cfg.n_prognostic > cfg.block_size {
        return Err(Error::invalid("more prognostic genes than block members"));
    }
    if cfg.n_samples < 9 {
        return Err(Error::invalid("need at least 9 samples"));
    }
    let names = gene_names(p);
    let mut rng = rng_for(cfg.seed, 10);
    let mut perm: Vec<usize> = (0..p).collect();
    perm.shuffle(&mut rng);

    let mut type_truths = Vec::new();
    let mut x = Array2::<f64>::zeros((cfg.n_samples, p));
    let labels: Vec<GliomaType> = (0..cfg.n_samples).map(|i| GliomaType::TYPES[i % 3]).collect();
    let mut prognostic = Vec::new();
    for (k, &t) in GliomaType::TYPES.iter().enumerate() {
        let mut block = perm[k * stride..k * stride + cfg.block_size].to_vec();
        if t == GliomaType::Gbm {
            prognostic = block[..cfg.n_prognostic].to_vec();
        }
        block.sort_unstable();
        let theta = plant_block(p, &block, cfg.within_density, &mut rng);
        let rows: Vec<usize> = (0..cfg.n_samples).filter(|&i| labels[i] == t).collect();
        let draws = draw_gaussian_rows(rows.len(), theta.view(), &mut rng)?;
        for (r, &i) in rows.iter().enumerate() {
            x.row_mut(i).assign(&draws.row(r));
        }
        type_truths.push((t, SyntheticTruth::from_theta(theta, &names, Vec::new(), cfg.censor_rate, cfg.seed)));
    }

    // GBM samples carry the prognostic shift; marginal sds are 1
    let high_risk: Vec<bool> = labels.iter().map(|&t| t == GliomaType::Gbm).collect();
    for &g in &prognostic {
        for i in 0..cfg.n_samples {
            if high_risk[i] {
                x[[i, g]] += cfg.risk_shift;
            }
        }
    }
    let mut beta = vec![0.0; p];
    for &g in &prognostic {
        beta[g] = cfg.effect;
    }
    for (_, truth) in type_truths.iter_mut() {
        truth.beta_true = beta.clone();
    }
    let (time, event) = sample_survival(x.view(), &beta, cfg.baseline_scale, cfg.censor_rate, cfg.seed)?;

    let samples = sample_names(cfg.n_samples);
    let mut records = Vec::with_capacity(cfg.n_samples);
    for i in 0..cfg.n_samples {
        let l16 = match labels[i] {
            GliomaType::Astro => GliomaLabel::Astro,
            GliomaType::Oligo => GliomaLabel::Oligo,
            _ => GliomaLabel::Gbm,
        };
        let l21 = if l16 == GliomaLabel::Astro && rng.random_bool(cfg.relabel_fraction) {
            GliomaLabel::Gbm
        } else {
            l16
        };
        records.push(ClinicalRecord {
            sample_id: samples[i].clone(),
            time: time[i],
            event: event[i],
            label_2016: l16,
            label_2021: l21,
        });
    }
    let mut prognostic_genes: Vec<String> = prognostic.iter().map(|&g| names[g].clone()).collect();
    prognostic_genes.sort();
    Ok(SyntheticCohort {
        expression: ExpressionMatrix::new(samples, names, x)?,
        clinical: ClinicalTable::new(records)?,
        type_truths,
        prognostic_genes,
        high_risk,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::empirical_covariance;

    #[test]
    fn precision_is_positive_definite_and_seeded() {
        for seed in 0..10 {
            let t = sample_sparse_precision(30, 0.2, seed).unwrap();
            assert!(linalg::is_positive_definite(t.view()));
            assert_eq!(t, sample_sparse_precision(30, 0.2, seed).unwrap());
        }
    }

    #[test]
    fn realized_density_near_target() {
        let p = 60;
        for seed in 0..20 {
            let t = sample_sparse_precision(p, 0.1, seed).unwrap();
            let mut edges = 0;
            for i in 0..p {
                for j in (i + 1)..p {
                    if t[[i, j]] != 0.0 {
                        edges += 1;
                        let w = t[[i, j]].abs();
                        assert!((WEIGHT_LOW..WEIGHT_HIGH).contains(&w));
                    }
                }
            }
            let density = edges as f64 / (p * (p - 1) / 2) as f64;
            assert!((density - 0.1).abs() <= 2.0 / p as f64, "seed {seed}: {density}");
        }
    }

    #[test]
    fn expression_covariance_matches_truth() {
        let theta = sample_sparse_precision(5, 0.5, 4).unwrap();
        let x = sample_expression(50_000, theta.view(), 9).unwrap();
        let s = empirical_covariance(&x).unwrap();
        let sigma = linalg::inverse_spd(theta.view()).unwrap();
        for (a, b) in s.iter().zip(sigma.iter()) {
            assert!((a - b).abs() < 0.05, "{a} vs {b}");
        }
        assert_eq!(x, sample_expression(50_000, theta.view(), 9).unwrap());
    }

    #[test]
    fn diagonal_precision_gives_uncorrelated_columns() {
        let theta = Array2::<f64>::eye(4) * 2.0;
        let x = sample_expression(10_000, theta.view(), 1).unwrap();
        let s = empirical_covariance(&x).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    let r = s[[i, j]] / (s[[i, i]] * s[[j, j]]).sqrt();
                    assert!(r.abs() < 0.05);
                }
            }
        }
    }

    #[test]
    fn null_survival_is_exponential() {
        let x = Array2::<f64>::zeros((10_000, 2));
        let (t, e) = sample_survival(x.view(), &[0.0, 0.0], 0.5, 0.0, 3).unwrap();
        assert!(e.iter().all(|&d| d));
        let mean = t.iter().sum::<f64>() / t.len() as f64;
        assert!((mean - 2.0).abs() < 0.1, "{mean}");
    }

    #[test]
    fn higher_risk_dies_sooner() {
        let mut rng = rng_for(5, 0);
        let x = Array2::from_shape_fn((1000, 1), |_| StandardNormal.sample(&mut rng));
        let (t, _) = sample_survival(x.view(), &[1.0], 1.0, 0.0, 8).unwrap();
        let rx = crate::stats::average_ranks(&x.column(0).to_vec());
        let rt = crate::stats::average_ranks(&t);
        let n = rx.len() as f64;
        let m = (n + 1.0) / 2.0;
        let cov: f64 = rx.iter().zip(&rt).map(|(a, b)| (a - m) * (b - m)).sum();
        assert!(cov < 0.0);
    }

    #[test]
    fn censoring_rate_calibrated() {
        let x = Array2::<f64>::zeros((5_000, 1));
        let (_, e) = sample_survival(x.view(), &[0.0], 1.0, 0.3, 2).unwrap();
        let censored = e.iter().filter(|d| !**d).count() as f64 / 5_000.0;
        assert!((censored - 0.3).abs() < 0.03, "{censored}");
    }

    #[test]
    fn planted_block_has_unit_variances() {
        let mut rng = rng_for(3, 0);
        let theta = plant_block(20, &[2, 5, 7, 11, 13], 0.5, &mut rng);
        let sigma = linalg::inverse_spd(theta.view()).unwrap();
        for i in 0..20 {
            assert!((sigma[[i, i]] - 1.0).abs() < 1e-12);
        }
        assert!(theta[[2, 5]] != 0.0 || theta[[2, 7]] != 0.0 || theta[[2, 11]] != 0.0 || theta[[2, 13]] != 0.0);
        assert_eq!(theta[[0, 1]], 0.0);
    }

    #[test]
    fn cohort_has_planted_structure() {
        let c = generate_cohort(&SynthConfig::default()).unwrap();
        assert_eq!(c.expression.n_samples(), 300);
        for t in GliomaType::TYPES {
            assert_eq!(c.block_genes(t).len(), 10);
        }
        let gbm = c.block_genes(GliomaType::Gbm);
        assert!(c.prognostic_genes.iter().all(|g| gbm.contains(g)));
        let again = generate_cohort(&SynthConfig::default()).unwrap();
        assert_eq!(again.expression, c.expression);
        assert_eq!(again.clinical, c.clinical);
    }
}
