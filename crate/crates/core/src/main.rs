use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use netsurv::corpus::{Orientation, Scheme};
use netsurv::pipeline::{self, Case, PipelineConfig, Status};
use netsurv::synthgen::SynthConfig;
use netsurv::Result;

#[derive(Parser)]
#[command(name = "netsurv", version, about = "Network-based gene selection and survival stratification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Nonparanormal transform and normality filter.
    Preprocess(Overrides),
    /// Per-type glasso networks, selected genes and hubs.
    Select(Overrides),
    /// Selected genes against random subsets of equal size.
    Validate(Overrides),
    /// Cox lasso, risk stratification and log-rank tests.
    Survival(Overrides),
    /// Summary tables and annotated networks.
    Report(Overrides),
    /// Every stage in order.
    Pipeline(Overrides),
    /// Write a synthetic cohort with known structure.
    Synth(SynthArgs),
}

/// Settings given on the command line win over the config file.
#[derive(Args)]
struct Overrides {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    expression: Option<PathBuf>,
    #[arg(long)]
    clinical: Option<PathBuf>,
    /// samples_by_genes or genes_by_samples.
    #[arg(long)]
    orientation: Option<Orientation>,
    /// Repeat to run several schemes (who2016, who2021).
    #[arg(long = "scheme")]
    schemes: Vec<Scheme>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    penalize_diagonal: Option<bool>,
    #[arg(long)]
    hub_threshold: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epv: Option<usize>,
    /// Repeat to run several cases (all_selected, exclusive_only, hubs_only).
    #[arg(long = "case")]
    cases: Vec<Case>,
    #[arg(long)]
    n_random: Option<usize>,
    /// Comma-separated penalties tried by the validation stage.
    #[arg(long, value_delimiter = ',')]
    rho_grid: Vec<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "out")]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

impl Overrides {
    fn resolve(self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_toml_file(path)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field { cfg.$field = v; }
            )*};
        }
        set!(orientation, rho, penalize_diagonal, hub_threshold, alpha, epv, n_random, seed, out_dir, threads);
        if self.expression.is_some() {
            cfg.expression = self.expression;
        }
        if self.clinical.is_some() {
            cfg.clinical = self.clinical;
        }
        if !self.schemes.is_empty() {
            cfg.schemes = self.schemes;
        }
        if !self.cases.is_empty() {
            cfg.cases = self.cases;
        }
        if !self.rho_grid.is_empty() {
            cfg.rho_grid = self.rho_grid;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long = "out")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = SynthConfig::default().n_samples)]
    n_samples: usize,
    #[arg(long, default_value_t = SynthConfig::default().n_genes)]
    n_genes: usize,
    #[arg(long, default_value_t = SynthConfig::default().block_size)]
    block_size: usize,
    #[arg(long, default_value_t = SynthConfig::default().block_overlap)]
    block_overlap: usize,
    #[arg(long, default_value_t = SynthConfig::default().within_density)]
    within_density: f64,
    #[arg(long, default_value_t = SynthConfig::default().n_prognostic)]
    n_prognostic: usize,
    #[arg(long, default_value_t = SynthConfig::default().effect)]
    effect: f64,
    #[arg(long, default_value_t = SynthConfig::default().risk_shift)]
    risk_shift: f64,
    #[arg(long, default_value_t = SynthConfig::default().censor_rate)]
    censor_rate: f64,
    #[arg(long, default_value_t = SynthConfig::default().relabel_fraction)]
    relabel_fraction: f64,
    #[arg(long, default_value_t = SynthConfig::default().seed)]
    seed: u64,
}

impl SynthArgs {
    fn config(&self) -> SynthConfig {
        SynthConfig {
            n_samples: self.n_samples,
            n_genes: self.n_genes,
            block_size: self.block_size,
            block_overlap: self.block_overlap,
            within_density: self.within_density,
            n_prognostic: self.n_prognostic,
            effect: self.effect,
            risk_shift: self.risk_shift,
            censor_rate: self.censor_rate,
            relabel_fraction: self.relabel_fraction,
            seed: self.seed,
            ..SynthConfig::default()
        }
    }
}

fn run(command: Command) -> Result<Status> {
    let (stage, overrides): (fn(&PipelineConfig) -> Result<Status>, Overrides) = match command {
        Command::Preprocess(o) => (pipeline::run_preprocess, o),
        Command::Select(o) => (pipeline::run_select, o),
        Command::Validate(o) => (pipeline::run_validate, o),
        Command::Survival(o) => (pipeline::run_survival, o),
        Command::Report(o) => (pipeline::run_report, o),
        Command::Pipeline(o) => (pipeline::run_pipeline, o),
        Command::Synth(args) => {
            let cohort = pipeline::run_synth(&args.config(), &args.out_dir)?;
            log::info!(
                "wrote {} samples x {} genes to {}",
                cohort.expression.n_samples(),
                cohort.expression.n_genes(),
                args.out_dir.display()
            );
            return Ok(Status::Success);
        }
    };
    let cfg = overrides.resolve()?;
    if cfg.threads > 0 {
        // fails only if a pool was already built, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    stage(&cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    // clap reports usage errors with code 2, which is reserved for validation failures
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(status) => ExitCode::from(status.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
