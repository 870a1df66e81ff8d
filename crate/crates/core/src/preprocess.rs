//! Gaussianization, normality filtering and the empirical covariance.
//!
//! The nonparanormal transform replaces each column by normal quantiles of
//! its truncated empirical CDF. Only ranks enter, so the output is unchanged
//! by any strictly increasing per-column transform of the input.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::corpus::ExpressionMatrix;
use crate::error::{Error, Result};
use crate::stats;

/// Default Jarque-Bera significance level.
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Smallest vector `jarque_bera` accepts.
pub const MIN_JB_LENGTH: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct NormalityReport {
    pub gene_id: String,
    pub jb_statistic: f64,
    pub p_value: f64,
    pub kept: bool,
}

/// Truncation level of the shrunken empirical CDF,
/// `1 / (4 n^{1/4} sqrt(pi log n))`.
pub fn truncation_level(n: usize) -> f64 {
    let n = n as f64;
    1.0 / (4.0 * n.powf(0.25) * (std::f64::consts::PI * n.ln()).sqrt())
}

fn npn_column(x: &[f64], gene: &str, normal: &Normal) -> Result<Vec<f64>> {
    let n = x.len();
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::ConstantColumn(gene.to_string()));
    }
    let delta = truncation_level(n);
    let z: Vec<f64> = stats::average_ranks(x)
        .into_iter()
        .map(|r| normal.inverse_cdf((r / n as f64).clamp(delta, 1.0 - delta)))
        .collect();
    let m = stats::mean(&z);
    let sd = stats::sample_sd(&z);
    Ok(z.into_iter().map(|v| (v - m) / sd).collect())
}

/// Nonparanormal transform of every column: ranks, truncated ECDF, normal
/// quantile, then centering and scaling to unit sample variance.
pub fn npn_transform(expr: &ExpressionMatrix) -> Result<ExpressionMatrix> {
    let n = expr.n_samples();
    if n < 3 {
        return Err(Error::invalid(format!("nonparanormal transform needs n >= 3, got {n}")));
    }
    let normal = Normal::standard();
    let columns: Vec<Vec<f64>> = (0..expr.n_genes())
        .into_par_iter()
        .map(|j| {
            let col = expr.column(j).to_vec();
            npn_column(&col, &expr.gene_ids()[j], &normal)
        })
        .collect::<Result<_>>()?;
    let mut out = Array2::<f64>::zeros((n, expr.n_genes()));
    for (j, col) in columns.into_iter().enumerate() {
        out.column_mut(j).assign(&ndarray::Array1::from(col));
    }
    Ok(expr.with_values(out))
}

/// Jarque-Bera statistic `(n/6)(S² + K²/4)` from population moments, with
/// its chi-square(2) upper-tail p-value.
pub fn jarque_bera(x: &[f64]) -> Result<(f64, f64)> {
    let n = x.len();
    if n < MIN_JB_LENGTH {
        return Err(Error::invalid(format!(
            "Jarque-Bera needs at least {MIN_JB_LENGTH} values, got {n}"
        )));
    }
    let m = stats::mean(x);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let nf = n as f64;
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    if m2 <= f64::EPSILON * m * m || m2 == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2) - 3.0;
    let jb = nf / 6.0 * (skew * skew + kurt * kurt / 4.0);
    Ok((jb, stats::chi2_sf_2(jb)))
}

/// Keeps the columns whose Jarque-Bera p-value exceeds `alpha`, in their
/// original order.
pub fn filter_normal(expr: &ExpressionMatrix, alpha: f64) -> Result<(ExpressionMatrix, Vec<NormalityReport>)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let reports: Vec<NormalityReport> = (0..expr.n_genes())
        .into_par_iter()
        .map(|j| {
            let (jb, p) = jarque_bera(&expr.column(j).to_vec())?;
            Ok(NormalityReport {
                gene_id: expr.gene_ids()[j].clone(),
                jb_statistic: jb,
                p_value: p,
                kept: p > alpha,
            })
        })
        .collect::<Result<_>>()?;
    let keep: Vec<usize> = reports
        .iter()
        .enumerate()
        .filter_map(|(j, r)| r.kept.then_some(j))
        .collect();
    if keep.is_empty() {
        return Err(Error::NothingPassesFilter);
    }
    log::info!("normality filter kept {} of {} genes", keep.len(), expr.n_genes());
    Ok((expr.select_columns(&keep), reports))
}

pub fn write_normality_report(path: impl AsRef<Path>, reports: &[NormalityReport]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(w, "gene_id\tjb\tp\tkept")?;
        for r in reports {
            writeln!(w, "{}\t{}\t{}\t{}", r.gene_id, r.jb_statistic, r.p_value, r.kept)?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceDivisor {
    /// Maximum-likelihood `1/n`.
    #[default]
    N,
    /// Unbiased `1/(n − 1)`.
    NMinusOne,
}

/// `S = Xᶜᵀ Xᶜ / n` with column-centered `Xᶜ`.
pub fn empirical_covariance(expr: &ExpressionMatrix) -> Result<Array2<f64>> {
    covariance_with(expr.values(), CovarianceDivisor::N)
}

pub fn empirical_covariance_with(expr: &ExpressionMatrix, divisor: CovarianceDivisor) -> Result<Array2<f64>> {
    covariance_with(expr.values(), divisor)
}

pub(crate) fn covariance_with(x: &Array2<f64>, divisor: CovarianceDivisor) -> Result<Array2<f64>> {
    let (n, p) = x.dim();
    if n < 2 {
        return Err(Error::invalid(format!("covariance needs n >= 2, got {n}")));
    }
    let means = x.mean_axis(Axis(0)).expect("n >= 2");
    // genes as contiguous rows
    let centered: Array2<f64> = (x - &means).t().as_standard_layout().into_owned();
    let denom = match divisor {
        CovarianceDivisor::N => n as f64,
        CovarianceDivisor::NMinusOne => (n - 1) as f64,
    };
    let upper: Vec<Vec<f64>> = (0..p)
        .into_par_iter()
        .map(|i| {
            let ri = centered.row(i);
            (i..p).map(|j| ri.dot(&centered.row(j)) / denom).collect()
        })
        .collect();
    let mut s = Array2::<f64>::zeros((p, p));
    for (i, row) in upper.into_iter().enumerate() {
        for (k, v) in row.into_iter().enumerate() {
            s[[i, i + k]] = v;
            s[[i + k, i]] = v;
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Exp1, StandardNormal};

    fn matrix(values: Array2<f64>) -> ExpressionMatrix {
        let (n, p) = values.dim();
        ExpressionMatrix::new(
            (0..n).map(|i| format!("s{i}")).collect(),
            (0..p).map(|j| format!("g{j}")).collect(),
            values,
        )
        .unwrap()
    }

    #[test]
    fn npn_of_one_to_five_matches_formula() {
        // scipy: norm.ppf(clip(r/5, d, 1-d)), centered, divided by sd(ddof=1)
        let expected = [
            -1.2612336115750555,
            -0.6048998388864701,
            -0.0395842780023303,
            0.616749494686255,
            1.288968233777601,
        ];
        let m = matrix(array![[1.0], [2.0], [3.0], [4.0], [5.0]]);
        let out = npn_transform(&m).unwrap();
        for (got, want) in out.column(0).iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert!((truncation_level(5) - 0.07435076776134315).abs() < 1e-15);
    }

    #[test]
    fn npn_invariant_under_exp() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let vals = Array2::from_shape_fn((40, 3), |_| StandardNormal.sample(&mut rng));
        let base = matrix(vals.clone());
        let mut warped = vals;
        warped.column_mut(1).mapv_inplace(f64::exp);
        let a = npn_transform(&base).unwrap();
        let b = npn_transform(&matrix(warped)).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn npn_preserves_order_of_normal_column() {
        // Truncation ties the extreme ranks; everything else keeps strict order.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let vals = Array2::from_shape_fn((50, 1), |_| StandardNormal.sample(&mut rng));
        let out = npn_transform(&matrix(vals.clone())).unwrap();
        let n = 50.0;
        let delta = truncation_level(50);
        let x = vals.column(0);
        let y = out.column(0);
        for i in 0..50 {
            for j in 0..50 {
                if x[i] < x[j] {
                    assert!(y[i] <= y[j]);
                    let ri = stats::average_ranks(&x.to_vec())[i] / n;
                    let rj = stats::average_ranks(&x.to_vec())[j] / n;
                    if ri > delta && rj < 1.0 - delta {
                        assert!(y[i] < y[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn npn_rejects_constant_column() {
        let m = matrix(array![[1.0, 2.0], [1.0, 3.0], [1.0, 4.0]]);
        assert!(matches!(npn_transform(&m), Err(Error::ConstantColumn(g)) if g == "g0"));
    }

    #[test]
    fn jarque_bera_symmetric_vector() {
        // population moments: m2 = 10/6, m4 = 34/6, excess kurtosis = -0.96
        let x = [-2.0, -1.0, 0.0, 0.0, 1.0, 2.0];
        let m2: f64 = 10.0 / 6.0;
        let m4: f64 = 34.0 / 6.0;
        let k = m4 / (m2 * m2) - 3.0;
        assert!((k + 0.96).abs() < 1e-12);
        let (jb, p) = jarque_bera(&x).unwrap();
        assert!((jb - k * k / 4.0).abs() < 1e-12);
        assert!((jb - 0.2304).abs() < 1e-12);
        assert!((p - 0.8911878885041845).abs() < 1e-12);
    }

    #[test]
    fn jarque_bera_null_statistic() {
        // m2 = 1, m4 = 3: zero skewness and zero excess kurtosis
        let r3 = 3.0_f64.sqrt();
        let (jb, p) = jarque_bera(&[-r3, 0.0, 0.0, 0.0, 0.0, r3]).unwrap();
        assert!(jb < 1e-20, "{jb}");
        assert!((p - 1.0).abs() < 1e-15);
    }

    #[test]
    fn jarque_bera_rejects_zero_variance() {
        assert!(matches!(jarque_bera(&[2.0; 10]), Err(Error::ZeroVariance)));
    }

    #[test]
    fn filter_drops_skewed_column() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut vals = Array2::from_shape_fn((500, 4), |_| StandardNormal.sample(&mut rng));
        for i in 0..500 {
            vals[[i, 2]] = Exp1.sample(&mut rng);
        }
        let (kept, reports) = filter_normal(&matrix(vals), 0.05).unwrap();
        assert!(!reports[2].kept);
        assert!(!kept.gene_ids().contains(&"g2".to_string()));
    }

    #[test]
    fn alpha_one_rejects_everything() {
        let m = matrix(array![[1.0], [2.0], [4.0], [3.0], [9.0]]);
        assert!(matches!(filter_normal(&m, 1.0), Err(Error::NothingPassesFilter)));
    }

    #[test]
    fn covariance_hand_example() {
        let s = empirical_covariance(&matrix(array![[1.0, 0.0], [0.0, 1.0]])).unwrap();
        assert_eq!(s, array![[0.25, -0.25], [-0.25, 0.25]]);
        let s1 = empirical_covariance_with(&matrix(array![[1.0, 0.0], [0.0, 1.0]]), CovarianceDivisor::NMinusOne).unwrap();
        assert_eq!(s1, array![[0.5, -0.5], [-0.5, 0.5]]);
    }

    #[test]
    fn covariance_of_duplicated_column() {
        let s = empirical_covariance(&matrix(array![[1.0, 1.0], [3.0, 3.0], [2.0, 2.0]])).unwrap();
        assert_eq!(s[[0, 0]], s[[1, 1]]);
        assert_eq!(s[[0, 1]], s[[0, 0]]);
    }
}
