use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use edgespin::{EnsembleKind, KappaVector, PostQuench};
use edgespin_cli::checks::{checks, run_check, Level, VerifyOptions};
use edgespin_cli::config::{GridSpec, Perturbation, TimeSpec};
use edgespin_cli::{load_config, run_experiment, CliError, Experiment, ExperimentConfig, Format};

/// Transverse-field Ising edge-spin experiments.
#[derive(Parser)]
#[command(name = "edgespin", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (default: $EDGESPIN_OUT_DIR/<preset> or edgespin-out/<preset>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for grid fan-out and linear algebra.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Low-lying spectra vs g for four perturbation panels.
    Fig1(Overrides),
    /// Echo under the pulse that realizes the parity string.
    Fig2a(Overrides),
    /// Echo after a quench of the edge pseudospin field.
    Fig2b(Overrides),
    /// Time-averaged echo vs g for several chain lengths.
    Fig2c(Overrides),
    /// Thermal echoes for the three ensembles.
    Fig3a(Overrides),
    /// Canonical thermal echoes across the transition.
    Fig3b(Overrides),
    /// Thermal echoes at several temperatures.
    #[command(name = "fig_temp")]
    FigTemp(Overrides),
    /// Exact vs free-fermion spectra.
    #[command(name = "oracle_check")]
    OracleCheck(Overrides),
    /// Hadamard and phase gates in the ground pair.
    Gates(Overrides),
    /// Run an experiment from a TOML or JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the verification checks; exits 3 if any fails.
    Verify {
        #[arg(long, value_enum, default_value = "fast")]
        level: LevelArg,
        /// Run only these check ids (comma separated).
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<String>>,
        /// Fault injection for the verifier itself.
        #[arg(long, hide = true)]
        corrupt_gauge: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Fast,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnsembleArg {
    RandomPhase,
    FixedParity,
    Canonical,
}

#[derive(Clone, Copy, ValueEnum)]
enum PostQuenchArg {
    ExactEdge,
    Local,
}

#[derive(Clone, Copy, ValueEnum)]
enum PerturbationArg {
    Simplified,
    Exact,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    n_sites: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    n_sites_list: Option<Vec<usize>>,
    #[arg(long)]
    j: Option<f64>,
    /// One or more field values, comma separated.
    #[arg(long, value_delimiter = ',')]
    g: Option<Vec<f64>>,
    #[arg(long)]
    kappa_x: Option<f64>,
    #[arg(long)]
    kappa_y: Option<f64>,
    #[arg(long)]
    kappa_z: Option<f64>,
    #[arg(long)]
    kappa_pre_x: Option<f64>,
    #[arg(long)]
    kappa_pre_y: Option<f64>,
    #[arg(long)]
    kappa_pre_z: Option<f64>,
    #[arg(long, value_enum)]
    perturbation: Option<PerturbationArg>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    beta: Option<Vec<f64>>,
    #[arg(long)]
    t_total: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pairs: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', value_enum)]
    ensembles: Option<Vec<EnsembleArg>>,
    #[arg(long, value_enum)]
    post_quench: Option<PostQuenchArg>,
}

fn with_components(
    base: Option<KappaVector>,
    x: Option<f64>,
    y: Option<f64>,
    z: Option<f64>,
) -> Option<KappaVector> {
    if x.is_none() && y.is_none() && z.is_none() {
        return None;
    }
    let b = base.unwrap_or_default();
    Some(KappaVector::new(
        x.unwrap_or(b.x),
        y.unwrap_or(b.y),
        z.unwrap_or(b.z),
    ))
}

impl Overrides {
    /// Overlay onto `cfg`; vector and time overrides replace single
    /// components of the preset values.
    fn apply(self, cfg: &mut ExperimentConfig) -> Result<(), CliError> {
        let defaults = cfg.resolve()?;
        let o = ExperimentConfig {
            n_sites: self.n_sites,
            n_sites_list: self.n_sites_list,
            j: self.j,
            g_values: self.g.map(GridSpec::Values),
            kappa: with_components(defaults.kappa, self.kappa_x, self.kappa_y, self.kappa_z),
            kappa_pre: with_components(
                defaults.kappa_pre,
                self.kappa_pre_x,
                self.kappa_pre_y,
                self.kappa_pre_z,
            ),
            perturbation: self.perturbation.map(|p| match p {
                PerturbationArg::Simplified => Perturbation::Simplified,
                PerturbationArg::Exact => Perturbation::Exact,
            }),
            delta: self.delta,
            betas: self.beta,
            t_total: self.t_total,
            time: match (self.t_max.or(self.t_total), self.points) {
                (None, None) => None,
                (t, p) => {
                    let d = defaults.time.unwrap_or(TimeSpec {
                        t_max: 1.0,
                        points: 2,
                    });
                    Some(TimeSpec {
                        t_max: t.unwrap_or(d.t_max),
                        points: p.unwrap_or(d.points),
                    })
                }
            },
            levels: self.levels,
            pairs: self.pairs,
            ensembles: self.ensembles.map(|v| {
                v.into_iter()
                    .map(|e| match e {
                        EnsembleArg::RandomPhase => EnsembleKind::RandomPhase,
                        EnsembleArg::FixedParity => EnsembleKind::FixedParity,
                        EnsembleArg::Canonical => EnsembleKind::Canonical,
                    })
                    .collect()
            }),
            post_quench: self.post_quench.map(|p| match p {
                PostQuenchArg::ExactEdge => PostQuench::ExactEdge,
                PostQuenchArg::Local => PostQuench::Local,
            }),
            ..Default::default()
        };
        cfg.merge(o);
        Ok(())
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("error: {e}");
    eprintln!("{}", serde_json::to_string(&e.record()).unwrap_or_default());
    ExitCode::from(e.exit_code() as u8)
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::validation(format!("thread pool: {e}")))?;
    }
    let (mut cfg, overrides) = match cli.command {
        Command::Verify {
            level,
            only,
            corrupt_gauge,
        } => {
            let level = match level {
                LevelArg::Fast => Level::Fast,
                LevelArg::Full => Level::Full,
            };
            let opts = VerifyOptions { corrupt_gauge };
            let outcomes: Vec<_> = checks(level)
                .iter()
                .filter(|c| {
                    only.as_ref()
                        .map_or(true, |ids| ids.iter().any(|i| i == c.id))
                })
                .map(|c| {
                    let o = run_check(c, &opts);
                    println!("{}", o.line());
                    o
                })
                .collect();
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            println!("{} passed, {failed} failed", outcomes.len() - failed);
            return Ok(if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            });
        }
        Command::Run { config, overrides } => (load_config(&config)?, overrides),
        Command::Fig1(o) => (ExperimentConfig::preset(Experiment::Fig1), o),
        Command::Fig2a(o) => (ExperimentConfig::preset(Experiment::Fig2a), o),
        Command::Fig2b(o) => (ExperimentConfig::preset(Experiment::Fig2b), o),
        Command::Fig2c(o) => (ExperimentConfig::preset(Experiment::Fig2c), o),
        Command::Fig3a(o) => (ExperimentConfig::preset(Experiment::Fig3a), o),
        Command::Fig3b(o) => (ExperimentConfig::preset(Experiment::Fig3b), o),
        Command::FigTemp(o) => (ExperimentConfig::preset(Experiment::FigTemp), o),
        Command::OracleCheck(o) => (ExperimentConfig::preset(Experiment::OracleCheck), o),
        Command::Gates(o) => (ExperimentConfig::preset(Experiment::Gates), o),
    };
    overrides.apply(&mut cfg)?;
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if let Some(f) = cli.format {
        cfg.format = Some(match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        });
    }
    for path in run_experiment(&cfg, cli.out.as_deref())? {
        println!("{}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => fail(&e),
    }
}
