//! Batch pipeline: preprocessing, per-cohort network selection, subset
//! validation, survival analysis on the pan-glioma cohort, and reporting.
//!
//! Each stage reads its inputs from the output directory of the stages
//! before it, so stages can be re-run individually:
//!
//! ```text
//! <out>/preprocess/   expression.tsv, normality.tsv
//! <out>/select/<scheme>/<type>/   network.{triplets,dot,graphml}, selected.txt, hubs.tsv
//! <out>/select/<scheme>/          comparison_*.tsv, cross_rank.tsv
//! <out>/validate/<scheme>/        report.tsv, failures.tsv
//! <out>/survival/<scheme>/<case>/ genes.txt, path.tsv, cox_fit.tsv, stratification.tsv, km.tsv, km_plot.tsv, logrank.tsv
//! <out>/report/<scheme>/          summary.tsv, exclusive.tsv, composition_<case>.tsv, <type>/ annotated networks
//! ```
//!
//! Every stage also writes `manifest.toml` with the configuration hash,
//! seed, crate version and output file digests.

mod manifest;
mod report;
mod select;
mod survival;
mod validate;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{self, Orientation, Scheme};
use crate::error::{Error, Result};
use crate::preprocess;
use crate::subsetval::{DEFAULT_N_RANDOM, DEFAULT_RHO_GRID};

pub use manifest::{config_digest, file_digest, Manifest};
pub use report::run_report;
pub use select::run_select;
pub use survival::{read_stratification, run_survival};
pub use validate::run_validate;

pub const DEFAULT_RHO: f64 = 0.9;

/// Gene set used as the survival design matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    /// Every gene selected for any glioma type.
    AllSelected,
    /// Genes selected for exactly one type.
    ExclusiveOnly,
    /// Hubs of any type.
    HubsOnly,
}

impl Case {
    pub const ALL: [Case; 3] = [Case::AllSelected, Case::ExclusiveOnly, Case::HubsOnly];
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::AllSelected => "all_selected",
            Case::ExclusiveOnly => "exclusive_only",
            Case::HubsOnly => "hubs_only",
        })
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all_selected" | "1" => Ok(Case::AllSelected),
            "exclusive_only" | "2" => Ok(Case::ExclusiveOnly),
            "hubs_only" | "3" => Ok(Case::HubsOnly),
            _ => Err(Error::invalid(format!(
                "unknown case {s:?} (expected all_selected, exclusive_only or hubs_only)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Raw expression matrix, read by the preprocess stage.
    pub expression: Option<PathBuf>,
    pub clinical: Option<PathBuf>,
    pub orientation: Orientation,
    pub schemes: Vec<Scheme>,
    pub rho: f64,
    pub penalize_diagonal: bool,
    pub hub_threshold: f64,
    pub alpha: f64,
    pub epv: usize,
    pub cases: Vec<Case>,
    pub n_random: usize,
    pub rho_grid: Vec<f64>,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads; 0 lets the runtime decide.
    pub threads: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            expression: None,
            clinical: None,
            orientation: Orientation::default(),
            schemes: Scheme::ALL.to_vec(),
            rho: DEFAULT_RHO,
            penalize_diagonal: true,
            hub_threshold: crate::netselect::DEFAULT_HUB_THRESHOLD,
            alpha: preprocess::DEFAULT_ALPHA,
            epv: crate::coxlasso::DEFAULT_EPV,
            cases: Case::ALL.to_vec(),
            n_random: DEFAULT_N_RANDOM,
            rho_grid: DEFAULT_RHO_GRID.to_vec(),
            seed: 1,
            out_dir: PathBuf::from("out"),
            threads: 0,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::invalid(format!("{}: {}", path.display(), e.message())))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return Err(Error::invalid(format!("rho must be >= 0, got {}", self.rho)));
        }
        if !(self.hub_threshold > 0.0 && self.hub_threshold < 100.0) {
            return Err(Error::invalid(format!(
                "hub threshold must lie in (0, 100), got {}",
                self.hub_threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if self.epv < 1 {
            return Err(Error::invalid("epv must be at least 1"));
        }
        if self.n_random < 1 {
            return Err(Error::invalid("n_random must be at least 1"));
        }
        if self.schemes.is_empty() || self.cases.is_empty() {
            return Err(Error::invalid("at least one scheme and one case are required"));
        }
        if self.rho_grid.is_empty() || self.rho_grid.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::invalid("rho grid must be nonempty with positive entries"));
        }
        Ok(())
    }

    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.out_dir.join(stage)
    }

    pub(crate) fn glasso_config(&self, rho: f64) -> crate::glasso::GlassoConfig {
        crate::glasso::GlassoConfig {
            rho,
            penalize_diagonal: self.penalize_diagonal,
            ..Default::default()
        }
    }

    /// The preprocessed matrix written by [`run_preprocess`].
    pub(crate) fn load_preprocessed(&self) -> Result<corpus::ExpressionMatrix> {
        corpus::load_expression(self.stage_dir("preprocess").join("expression.tsv"), Orientation::SamplesByGenes)
    }

    pub(crate) fn load_clinical(&self) -> Result<corpus::ClinicalTable> {
        let path = self
            .clinical
            .as_ref()
            .ok_or_else(|| Error::invalid("no clinical file configured"))?;
        corpus::load_clinical(path)
    }
}

/// Result of a stage that ran to completion. Ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Success,
    /// A selected subset did not beat every random subset.
    ValidationFailed,
    /// A solver stopped at its iteration limit.
    NotConverged,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::ValidationFailed => 2,
            Status::NotConverged => 3,
        }
    }
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// npn transform and normality filter of the configured expression file.
pub fn run_preprocess(cfg: &PipelineConfig) -> Result<Status> {
    cfg.validate()?;
    let input = cfg
        .expression
        .as_ref()
        .ok_or_else(|| Error::invalid("no expression file configured"))?;
    let raw = corpus::load_expression(input, cfg.orientation)?;
    let transformed = preprocess::npn_transform(&raw)?;
    let (kept, reports) = preprocess::filter_normal(&transformed, cfg.alpha)?;
    log::info!("preprocess: kept {} of {} genes", kept.n_genes(), raw.n_genes());
    let dir = cfg.stage_dir("preprocess");
    create_dir(&dir)?;
    let expr_path = dir.join("expression.tsv");
    let report_path = dir.join("normality.tsv");
    corpus::write_expression(&expr_path, &kept)?;
    preprocess::write_normality_report(&report_path, &reports)?;
    Manifest::new("preprocess", cfg)
        .input(input)?
        .outputs(&dir, &[expr_path, report_path])?
        .write(&dir)?;
    Ok(Status::Success)
}

/// All stages in order. Later stages still run after a validation failure.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Status> {
    let mut status = run_preprocess(cfg)?;
    status = status.max(run_select(cfg)?);
    status = status.max(run_validate(cfg)?);
    status = status.max(run_survival(cfg)?);
    status = status.max(run_report(cfg)?);
    Ok(status)
}

/// Writes a synthetic cohort in the corpus formats plus its ground truth.
pub fn run_synth(cfg: &crate::synthgen::SynthConfig, out_dir: &Path) -> Result<crate::synthgen::SyntheticCohort> {
    use std::io::Write;
    let cohort = crate::synthgen::generate_cohort(cfg)?;
    create_dir(out_dir)?;
    corpus::write_expression(out_dir.join("expression.tsv"), &cohort.expression)?;
    corpus::write_clinical(out_dir.join("clinical.csv"), &cohort.clinical)?;
    let truth_path = out_dir.join("truth.tsv");
    let write = || -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(&truth_path)?);
        writeln!(w, "kind\tname\tgenes")?;
        for (t, truth) in &cohort.type_truths {
            writeln!(w, "block\t{t}\t{}", truth.connected_genes(cohort.expression.gene_ids()).join(","))?;
            writeln!(w, "hubs\t{t}\t{}", truth.hub_ids.join(","))?;
        }
        writeln!(w, "prognostic\t-\t{}", cohort.prognostic_genes.join(","))?;
        let high: Vec<&str> = cohort
            .expression
            .sample_ids()
            .iter()
            .zip(&cohort.high_risk)
            .filter(|(_, h)| **h)
            .map(|(s, _)| s.as_str())
            .collect();
        writeln!(w, "high_risk\t-\t{}", high.join(","))?;
        w.flush()
    };
    write().map_err(|e| Error::io(&truth_path, e))?;
    Ok(cohort)
}
