//! Risk stratification from a fitted Cox model: prognostic index, a
//! density-based split, Kaplan-Meier curves and the log-rank test.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::corpus::ExpressionMatrix;
use crate::coxlasso::CoxFit;
use crate::error::{Error, Result};
use crate::stats;

pub const KDE_GRID_POINTS: usize = 512;
/// Grid margin around the data, in bandwidths.
const KDE_CUT: f64 = 3.0;

/// `X·β` with genes looked up by name; inactive genes are ignored.
pub fn prognostic_index(x: &ExpressionMatrix, fit: &CoxFit) -> Result<Vec<f64>> {
    if fit.gene_ids.len() != fit.beta.len() {
        return Err(Error::invalid("fit has mismatched gene ids and coefficients"));
    }
    let mut terms = Vec::new();
    for (g, b) in fit.active() {
        let j = x.gene_index(g).ok_or_else(|| Error::UnknownGene(g.to_string()))?;
        terms.push((j, b));
    }
    let values = x.values();
    Ok((0..x.n_samples())
        .map(|i| terms.iter().map(|&(j, b)| values[[i, j]] * b).sum())
        .collect())
}

/// Gaussian kernel density evaluated on an even grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    /// Median of the underlying values, the fallback split.
    pub median: f64,
}

impl DensityCurve {
    /// Trapezoid-rule integral over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }

    /// Grid indices of strict local maxima.
    pub fn local_maxima(&self) -> Vec<usize> {
        let d = &self.density;
        (1..d.len().saturating_sub(1))
            .filter(|&k| d[k] > d[k - 1] && d[k] > d[k + 1])
            .collect()
    }
}

/// `0.9 · min(sd, IQR / 1.34) · n^(−1/5)`.
pub fn default_bandwidth(values: &[f64]) -> f64 {
    let sd = stats::sample_sd(values);
    let iqr = stats::quantile(values, 0.75) - stats::quantile(values, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * (values.len() as f64).powf(-0.2)
}

pub fn kde(values: &[f64], bandwidth: Option<f64>) -> Result<DensityCurve> {
    if values.len() < 2 {
        return Err(Error::invalid("density estimation needs at least 2 values"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in density input"));
    }
    let sd = stats::sample_sd(values);
    if !(sd > 0.0) {
        return Err(Error::DegenerateDistribution);
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(Error::invalid(format!("bandwidth must be positive, got {h}"))),
        None => default_bandwidth(values),
    };
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min) - KDE_CUT * h;
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + KDE_CUT * h;
    let step = (hi - lo) / (KDE_GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..KDE_GRID_POINTS).map(|k| lo + step * k as f64).collect();
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let density = grid
        .iter()
        .map(|&x| {
            norm * values
                .iter()
                .map(|v| {
                    let u = (x - v) / h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
        })
        .collect();
    Ok(DensityCurve {
        grid,
        density,
        bandwidth: h,
        median: stats::median(values),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdSource {
    KdeLocalMin,
    MedianFallback,
}

impl fmt::Display for ThresholdSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThresholdSource::KdeLocalMin => "kde_local_min",
            ThresholdSource::MedianFallback => "median_fallback",
        })
    }
}

/// The density minimum between the two highest local maxima, or the median
/// when the curve has a single peak.
pub fn split_threshold(curve: &DensityCurve) -> (f64, ThresholdSource) {
    let mut peaks = curve.local_maxima();
    if peaks.len() < 2 {
        log::warn!("PI density is not bimodal; splitting at the median");
        return (curve.median, ThresholdSource::MedianFallback);
    }
    // highest first, ties broken by position for determinism
    peaks.sort_by(|&a, &b| curve.density[b].total_cmp(&curve.density[a]).then(a.cmp(&b)));
    let (a, b) = (peaks[0].min(peaks[1]), peaks[0].max(peaks[1]));
    let valley = ((a + 1)..b)
        .min_by(|&i, &j| curve.density[i].total_cmp(&curve.density[j]).then(i.cmp(&j)))
        .expect("strict maxima are at least two grid points apart");
    (curve.grid[valley], ThresholdSource::KdeLocalMin)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RiskGroup {
    Low,
    High,
}

impl fmt::Display for RiskGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RiskGroup::Low => "low",
            RiskGroup::High => "high",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskStratification {
    pub sample_ids: Vec<String>,
    pub pi: Vec<f64>,
    pub threshold: f64,
    pub group: Vec<RiskGroup>,
    pub threshold_source: ThresholdSource,
}

impl RiskStratification {
    /// Indices of the samples in `group`.
    pub fn members(&self, group: RiskGroup) -> Vec<usize> {
        (0..self.group.len()).filter(|&i| self.group[i] == group).collect()
    }
}

/// Low iff `pi ≤ threshold`. Sample ids default to `S1..Sn`.
pub fn stratify(pi: &[f64], threshold: f64) -> Result<RiskStratification> {
    let group: Vec<RiskGroup> = pi
        .iter()
        .map(|&v| if v <= threshold { RiskGroup::Low } else { RiskGroup::High })
        .collect();
    if !group.contains(&RiskGroup::Low) {
        return Err(Error::DegenerateStratification("low-risk"));
    }
    if !group.contains(&RiskGroup::High) {
        return Err(Error::DegenerateStratification("high-risk"));
    }
    Ok(RiskStratification {
        sample_ids: (1..=pi.len()).map(|i| format!("S{i}")).collect(),
        pi: pi.to_vec(),
        threshold,
        group,
        threshold_source: ThresholdSource::KdeLocalMin,
    })
}

/// KDE of the prognostic index, split, and stratification in one step.
pub fn stratify_by_density(sample_ids: &[String], pi: &[f64]) -> Result<RiskStratification> {
    if sample_ids.len() != pi.len() {
        return Err(Error::invalid("sample ids and PI differ in length"));
    }
    let curve = kde(pi, None)?;
    let (threshold, source) = split_threshold(&curve);
    let mut strat = stratify(pi, threshold)?;
    strat.sample_ids = sample_ids.to_vec();
    strat.threshold_source = source;
    Ok(strat)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    /// Distinct event times, increasing.
    pub event_times: Vec<f64>,
    pub survival: Vec<f64>,
    pub at_risk: Vec<usize>,
    pub n_events: Vec<usize>,
}

impl SurvivalCurve {
    /// Right-continuous step value at `t`.
    pub fn survival_at(&self, t: f64) -> f64 {
        match self.event_times.partition_point(|&e| e <= t) {
            0 => 1.0,
            k => self.survival[k - 1],
        }
    }
}

/// Product-limit estimator with steps at event times only.
pub fn kaplan_meier(time: &[f64], event: &[bool]) -> Result<SurvivalCurve> {
    if time.is_empty() || time.len() != event.len() {
        return Err(Error::invalid("kaplan_meier needs equally long, nonempty time and event vectors"));
    }
    let mut order: Vec<usize> = (0..time.len()).collect();
    order.sort_by(|&a, &b| time[a].total_cmp(&time[b]));
    let mut curve = SurvivalCurve {
        event_times: Vec::new(),
        survival: Vec::new(),
        at_risk: Vec::new(),
        n_events: Vec::new(),
    };
    let mut at_risk = time.len();
    let mut s = 1.0;
    let mut k = 0;
    while k < order.len() {
        let t = time[order[k]];
        let mut end = k;
        let mut deaths = 0;
        while end < order.len() && time[order[end]] == t {
            deaths += usize::from(event[order[end]]);
            end += 1;
        }
        if deaths > 0 {
            s *= (at_risk - deaths) as f64 / at_risk as f64;
            curve.event_times.push(t);
            curve.survival.push(s);
            curve.at_risk.push(at_risk);
            curve.n_events.push(deaths);
        }
        at_risk -= end - k;
        k = end;
    }
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRankResult {
    pub statistic: f64,
    pub p_value: f64,
    pub df: usize,
}

/// Two-group log-rank test with hypergeometric variance.
pub fn logrank(time_a: &[f64], event_a: &[bool], time_b: &[f64], event_b: &[bool]) -> Result<LogRankResult> {
    if time_a.is_empty() || time_b.is_empty() {
        return Err(Error::invalid("log-rank test needs two nonempty groups"));
    }
    if time_a.len() != event_a.len() || time_b.len() != event_b.len() {
        return Err(Error::invalid("time and event vectors differ in length"));
    }
    let mut all: Vec<(f64, bool, bool)> = time_a
        .iter()
        .zip(event_a)
        .map(|(&t, &e)| (t, e, true))
        .chain(time_b.iter().zip(event_b).map(|(&t, &e)| (t, e, false)))
        .collect();
    if !all.iter().any(|r| r.1) {
        return Err(Error::NoEvents);
    }
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    // both groups' O − E are accumulated so that swapping labels is exact
    let (mut n_a, mut n_b) = (time_a.len() as f64, time_b.len() as f64);
    let (mut u_a, mut u_b, mut var) = (0.0, 0.0, 0.0);
    let mut k = 0;
    while k < all.len() {
        let t = all[k].0;
        let mut end = k;
        let (mut d_a, mut d_b, mut leave_a, mut leave_b) = (0.0, 0.0, 0.0, 0.0);
        while end < all.len() && all[end].0 == t {
            let (_, e, in_a) = all[end];
            match (in_a, e) {
                (true, true) => d_a += 1.0,
                (false, true) => d_b += 1.0,
                _ => {}
            }
            if in_a {
                leave_a += 1.0;
            } else {
                leave_b += 1.0;
            }
            end += 1;
        }
        let d = d_a + d_b;
        let n = n_a + n_b;
        if d > 0.0 {
            u_a += d_a - d * n_a / n;
            u_b += d_b - d * n_b / n;
            if n > 1.0 {
                var += d * (n_a * n_b) / (n * n) * (n - d) / (n - 1.0);
            }
        }
        n_a -= leave_a;
        n_b -= leave_b;
        k = end;
    }
    let o_minus_e = 0.5 * (u_a - u_b);
    if !(var > 0.0) {
        return Err(Error::ZeroLogRankVariance);
    }
    let statistic = o_minus_e * o_minus_e / var;
    Ok(LogRankResult {
        statistic,
        p_value: stats::chi2_sf_1(statistic),
        df: 1,
    })
}

fn io_result(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let run = || -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write(&mut w)?;
        w.flush()
    };
    run().map_err(|e| Error::io(path, e))
}

/// Per-group curve table: `group time survival at_risk events`.
pub fn write_km_table(path: impl AsRef<Path>, curves: &[(String, SurvivalCurve)]) -> Result<()> {
    io_result(path.as_ref(), |w| {
        writeln!(w, "group\ttime\tsurvival\tat_risk\tevents")?;
        for (label, c) in curves {
            for k in 0..c.event_times.len() {
                writeln!(
                    w,
                    "{label}\t{}\t{}\t{}\t{}",
                    c.event_times[k], c.survival[k], c.at_risk[k], c.n_events[k]
                )?;
            }
        }
        Ok(())
    })
}

/// Step-function vertices `group x y`, starting at `(0, 1)` and ending at
/// `end_time` (the last follow-up time of the group).
pub fn write_km_plot_data(path: impl AsRef<Path>, curves: &[(String, SurvivalCurve, f64)]) -> Result<()> {
    io_result(path.as_ref(), |w| {
        writeln!(w, "group\tx\ty")?;
        for (label, c, end_time) in curves {
            let mut y = 1.0;
            writeln!(w, "{label}\t0\t1")?;
            for (t, s) in c.event_times.iter().zip(&c.survival) {
                writeln!(w, "{label}\t{t}\t{y}")?;
                writeln!(w, "{label}\t{t}\t{s}")?;
                y = *s;
            }
            writeln!(w, "{label}\t{end_time}\t{y}")?;
        }
        Ok(())
    })
}

pub fn write_logrank(path: impl AsRef<Path>, result: &LogRankResult) -> Result<()> {
    io_result(path.as_ref(), |w| {
        writeln!(w, "statistic\t{}", result.statistic)?;
        writeln!(w, "df\t{}", result.df)?;
        writeln!(w, "p\t{}", result.p_value)
    })
}

pub fn write_stratification(path: impl AsRef<Path>, strat: &RiskStratification) -> Result<()> {
    io_result(path.as_ref(), |w| {
        writeln!(w, "# threshold={} source={}", strat.threshold, strat.threshold_source)?;
        writeln!(w, "sample_id\tpi\tgroup")?;
        for i in 0..strat.pi.len() {
            writeln!(w, "{}\t{}\t{}", strat.sample_ids[i], strat.pi[i], strat.group[i])?;
        }
        Ok(())
    })
}
