use super::select::{io_write, load_selection};
use super::{create_dir, Manifest, PipelineConfig, Status};
use crate::corpus::{self, GliomaType};
use crate::error::{Error, Result};
use crate::subsetval::{self, ValidationReport};

/// Checks each type's selected genes against random subsets of its cohort.
///
/// A cohort fails when its subset loses to any random draw, disconnects at
/// every grid value, or has fewer than two selected genes.
pub fn run_validate(cfg: &PipelineConfig) -> Result<Status> {
    cfg.validate()?;
    let expr = cfg.load_preprocessed()?;
    let clin = cfg.load_clinical()?;
    let base = cfg.stage_dir("validate");
    let mut outputs = Vec::new();
    let mut status = Status::Success;

    for &scheme in &cfg.schemes {
        let selections = load_selection(cfg, scheme)?;
        let mut reports: Vec<(String, ValidationReport)> = Vec::new();
        let mut failures: Vec<(GliomaType, String)> = Vec::new();
        for sel in &selections {
            let t = sel.glioma_type;
            let cohort = corpus::build_cohort(&expr, &clin, scheme, t)?;
            if sel.selected.len() < 2 {
                failures.push((t, format!("only {} selected genes", sel.selected.len())));
                continue;
            }
            let genes: Vec<&String> = sel.selected.iter().collect();
            let subset = cohort.expression.select_genes(&genes)?;
            let base_cfg = cfg.glasso_config(cfg.rho);
            let rho_val = match subsetval::choose_validation_rho_with(&subset, &cfg.rho_grid, &base_cfg) {
                Ok(r) => r,
                Err(Error::SubsetDisconnects) => {
                    failures.push((t, "subset disconnects at all tested rho".into()));
                    continue;
                }
                Err(e) => return Err(e),
            };
            let report = subsetval::validate_subset_with(
                &cohort.expression,
                &sel.selected,
                &cfg.glasso_config(rho_val),
                cfg.n_random,
                cfg.seed,
            )?;
            log::info!(
                "{scheme}/{t}: rho_val {rho_val}, F_D {:.4}, best F_R {:.4}, wins {}/{}",
                report.f_d,
                report.f_r_best,
                report.wins,
                report.n_random
            );
            if !report.passed() {
                failures.push((t, format!("{} of {} random subsets not beaten", report.n_random - report.wins, report.n_random)));
            }
            reports.push((t.to_string(), report));
        }

        let dir = base.join(scheme.to_string());
        create_dir(&dir)?;
        let path = dir.join("report.tsv");
        subsetval::write_validation_reports(&path, &reports)?;
        let fail_path = dir.join("failures.tsv");
        io_write(&fail_path, |w| {
            use std::io::Write;
            writeln!(w, "cohort\treason")?;
            for (t, reason) in &failures {
                writeln!(w, "{t}\t{reason}")?;
            }
            Ok(())
        })?;
        for (t, reason) in &failures {
            log::warn!("{scheme}/{t}: validation failed: {reason}");
        }
        if !failures.is_empty() {
            status = status.max(Status::ValidationFailed);
        }
        outputs.extend([path, fail_path]);
    }

    let manifest = Manifest::new("validate", cfg).input(&cfg.stage_dir("preprocess").join("expression.tsv"))?;
    manifest.outputs(&base, &outputs)?.write(&base)?;
    Ok(status)
}
