use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::select::{comparison, io_write, load_selection, TypeSelection};
use super::{create_dir, Case, Manifest, PipelineConfig, Status};
use crate::corpus::{self, CohortDataset, GliomaType};
use crate::coxlasso::{self, CoxPath, PathConfig};
use crate::error::{Error, Result};
use crate::netselect;
use crate::survstrat::{self, RiskGroup, RiskStratification, ThresholdSource};

pub(crate) fn case_dir(cfg: &PipelineConfig, scheme: corpus::Scheme, case: Case) -> PathBuf {
    cfg.stage_dir("survival").join(scheme.to_string()).join(case.to_string())
}

/// Genes entering the design matrix for `case`.
pub(crate) fn case_genes(selections: &[TypeSelection], case: Case) -> Result<BTreeSet<String>> {
    Ok(match case {
        Case::AllSelected => selections.iter().flat_map(|s| s.selected.iter().cloned()).collect(),
        Case::ExclusiveOnly => {
            comparison(selections.iter().map(|s| (s.glioma_type.to_string(), s.selected.clone())))?.all_exclusive()
        }
        Case::HubsOnly => selections.iter().flat_map(|s| s.ranking.hubs()).collect(),
    })
}

struct CaseResult {
    outputs: Vec<PathBuf>,
    converged: bool,
}

fn run_case(cfg: &PipelineConfig, pan: &CohortDataset, genes: &BTreeSet<String>, dir: &Path) -> Result<CaseResult> {
    // design columns follow the expression file's gene order
    let ordered: Vec<&String> = pan.expression.gene_ids().iter().filter(|g| genes.contains(*g)).collect();
    let x = pan.expression.select_genes(&ordered)?;
    let time = pan.clinical.times();
    let event = pan.clinical.events();
    let pmax = coxlasso::pmax_from_events(pan.clinical.n_events(), cfg.epv)?;
    let path = coxlasso::fit_path_with_pmax(x.values().view(), &time, &event, pmax, &PathConfig::default())?;
    let fit = path.selected().clone().with_gene_ids(x.gene_ids().to_vec())?;
    let pi = survstrat::prognostic_index(&x, &fit)?;
    let strat = survstrat::stratify_by_density(pan.expression.sample_ids(), &pi)?;

    let mut curves = Vec::new();
    let mut groups = Vec::new();
    for g in [RiskGroup::Low, RiskGroup::High] {
        let idx = strat.members(g);
        let t: Vec<f64> = idx.iter().map(|&i| time[i]).collect();
        let e: Vec<bool> = idx.iter().map(|&i| event[i]).collect();
        let end = t.iter().cloned().fold(0.0, f64::max);
        curves.push((g.to_string(), survstrat::kaplan_meier(&t, &e)?, end));
        groups.push((t, e));
    }
    let lr = survstrat::logrank(&groups[0].0, &groups[0].1, &groups[1].0, &groups[1].1)?;
    log::info!(
        "{}: {} genes, pmax {pmax}, {} active at lambda {:.5}, split {} ({}), log-rank p {:.3e}",
        dir.display(),
        ordered.len(),
        fit.n_nonzero,
        fit.lambda,
        strat.threshold,
        strat.threshold_source,
        lr.p_value
    );

    create_dir(dir)?;
    let files = [
        "genes.txt",
        "path.tsv",
        "cox_fit.tsv",
        "stratification.tsv",
        "km.tsv",
        "km_plot.tsv",
        "logrank.tsv",
    ]
    .map(|f| dir.join(f));
    netselect::write_gene_list(&files[0], ordered.iter().copied())?;
    write_path(&files[1], &path)?;
    coxlasso::write_cox_fit(&files[2], &fit)?;
    survstrat::write_stratification(&files[3], &strat)?;
    let table: Vec<_> = curves.iter().map(|(l, c, _)| (l.clone(), c.clone())).collect();
    survstrat::write_km_table(&files[4], &table)?;
    survstrat::write_km_plot_data(&files[5], &curves)?;
    survstrat::write_logrank(&files[6], &lr)?;
    Ok(CaseResult {
        outputs: files.to_vec(),
        converged: path.fits.iter().all(|f| f.converged),
    })
}

fn write_path(path: &Path, cox: &CoxPath) -> Result<()> {
    io_write(path, |w| {
        writeln!(w, "# lambda_max={}", cox.lambda_max)?;
        writeln!(w, "lambda\tn_nonzero\tloglik\tconverged")?;
        for f in &cox.fits {
            writeln!(w, "{}\t{}\t{}\t{}", f.lambda, f.n_nonzero, f.partial_loglik, f.converged)?;
        }
        Ok(())
    })
}

/// Reads a file written by the survival stage.
pub fn read_stratification(path: impl AsRef<Path>) -> Result<RiskStratification> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, message: &str| Error::Parse {
        path: path.to_path_buf(),
        line,
        column: 0,
        message: message.to_string(),
    };
    let mut strat = RiskStratification {
        sample_ids: Vec::new(),
        pi: Vec::new(),
        threshold: f64::NAN,
        group: Vec::new(),
        threshold_source: ThresholdSource::KdeLocalMin,
    };
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if let Some(header) = line.strip_prefix('#') {
            for field in header.split_whitespace() {
                match field.split_once('=') {
                    Some(("threshold", v)) => strat.threshold = v.parse().map_err(|_| bad(k + 1, "bad threshold"))?,
                    Some(("source", "median_fallback")) => strat.threshold_source = ThresholdSource::MedianFallback,
                    _ => {}
                }
            }
            continue;
        }
        if k <= 1 || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(bad(k + 1, "expected sample_id, pi, group"));
        }
        strat.sample_ids.push(f[0].to_string());
        strat.pi.push(f[1].parse().map_err(|_| bad(k + 1, "bad prognostic index"))?);
        strat.group.push(match f[2] {
            "low" => RiskGroup::Low,
            "high" => RiskGroup::High,
            _ => return Err(bad(k + 1, "group must be low or high")),
        });
    }
    Ok(strat)
}

/// Cox lasso, density split and Kaplan-Meier/log-rank comparison on the
/// pan-glioma cohort for every configured case.
pub fn run_survival(cfg: &PipelineConfig) -> Result<Status> {
    cfg.validate()?;
    let expr = cfg.load_preprocessed()?;
    let clin = cfg.load_clinical()?;
    let base = cfg.stage_dir("survival");
    let mut outputs = Vec::new();
    let mut status = Status::Success;
    let mut failed = Vec::new();

    for &scheme in &cfg.schemes {
        let selections = load_selection(cfg, scheme)?;
        let pan = corpus::build_cohort(&expr, &clin, scheme, GliomaType::PanGlioma)?;
        let jobs: Vec<(Case, BTreeSet<String>)> = cfg
            .cases
            .iter()
            .map(|&c| Ok((c, case_genes(&selections, c)?)))
            .collect::<Result<_>>()?;
        let (empty, jobs): (Vec<_>, Vec<_>) = jobs.into_iter().partition(|(_, genes)| genes.is_empty());
        for (case, _) in empty {
            log::warn!("{scheme}/{case}: no genes in this case, skipped");
        }
        let results: Vec<(Case, Result<CaseResult>)> = jobs
            .par_iter()
            .map(|(case, genes)| (*case, run_case(cfg, &pan, genes, &case_dir(cfg, scheme, *case))))
            .collect();
        for (case, result) in results {
            match result {
                Ok(r) => {
                    if !r.converged {
                        log::warn!("{scheme}/{case}: some Cox fits did not converge");
                        status = status.max(Status::NotConverged);
                    }
                    outputs.extend(r.outputs);
                }
                Err(e) => {
                    log::error!("{scheme}/{case}: {e}");
                    failed.push(format!("{scheme}/{case}: {e}"));
                }
            }
        }
    }

    create_dir(&base)?;
    let manifest = Manifest::new("survival", cfg).input(&cfg.stage_dir("preprocess").join("expression.tsv"))?;
    manifest.outputs(&base, &outputs)?.write(&base)?;
    if !failed.is_empty() {
        return Err(Error::invalid(format!("survival analysis failed for {}", failed.join("; "))));
    }
    Ok(status)
}
