//! Experiment configuration: TOML or JSON files, per-preset defaults and
//! validation.
//!
//! A config names an experiment and may set any subset of the parameters;
//! [`ExperimentConfig::resolve`] fills the rest from the preset and drops
//! fields the experiment does not read, so the resolved config doubles as
//! the manifest record.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use edgespin::{EnsembleKind, KappaVector, PostQuench, DENSE_SITE_CAP};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Fig1,
    Fig2a,
    Fig2b,
    Fig2c,
    Fig3a,
    Fig3b,
    FigTemp,
    OracleCheck,
    Gates,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Self::Fig1,
        Self::Fig2a,
        Self::Fig2b,
        Self::Fig2c,
        Self::Fig3a,
        Self::Fig3b,
        Self::FigTemp,
        Self::OracleCheck,
        Self::Gates,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Fig1 => "fig1",
            Self::Fig2a => "fig2a",
            Self::Fig2b => "fig2b",
            Self::Fig2c => "fig2c",
            Self::Fig3a => "fig3a",
            Self::Fig3b => "fig3b",
            Self::FigTemp => "fig_temp",
            Self::OracleCheck => "oracle_check",
            Self::Gates => "gates",
        }
    }

    fn is_thermal(self) -> bool {
        matches!(self, Self::Fig3a | Self::Fig3b | Self::FigTemp)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| CliError::validation(format!("unknown preset `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(CliError::validation(format!("unknown format `{other}`"))),
        }
    }
}

/// Which form of the edge perturbation enters quench Hamiltonians.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// `κx σˣ_1 − κy b_N + κz p`.
    Simplified,
    /// `κx(D†+D) + iκy(D†−D) + κz p`; ordered phase only.
    Exact,
}

/// Field values, either listed or as an inclusive arithmetic range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Values(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::Values(v) => v.clone(),
            Self::Range { start, stop, step } => {
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                // Round to the step's decimal resolution so grid points print cleanly.
                (0..count)
                    .map(|k| round12(start + k as f64 * step))
                    .collect()
            }
        }
    }
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_sites: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_sites_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_values: Option<GridSpec>,
    /// Postquench (or panel) perturbation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<KappaVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_pre: Option<KappaVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_panels: Option<Vec<KappaVector>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_total: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensembles: Option<Vec<EnsembleKind>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_quench: Option<PostQuench>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

/// Validation failure tied to a config key, so file diagnostics can point
/// at its line.
struct Invalid {
    field: &'static str,
    message: String,
}

fn invalid(field: &'static str, message: impl Into<String>) -> Invalid {
    Invalid {
        field,
        message: message.into(),
    }
}

fn panels() -> Vec<KappaVector> {
    vec![
        KappaVector::default(),
        KappaVector::new(0.1, 0.0, 0.0),
        KappaVector::new(0.0, 0.1, 0.0),
        KappaVector::new(0.0, 0.0, -0.1),
    ]
}

impl ExperimentConfig {
    pub fn preset(experiment: Experiment) -> Self {
        Self {
            experiment: Some(experiment),
            ..Self::default()
        }
    }

    pub fn experiment(&self) -> Result<Experiment> {
        self.experiment
            .ok_or_else(|| CliError::validation("missing `experiment`"))
    }

    /// Overlay every field set in `other`.
    pub fn merge(&mut self, other: ExperimentConfig) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            experiment,
            n_sites,
            n_sites_list,
            j,
            g_values,
            kappa,
            kappa_pre,
            kappa_panels,
            perturbation,
            delta,
            betas,
            t_total,
            time,
            ensembles,
            post_quench,
            levels,
            pairs,
            seed,
            out_dir,
            format
        );
    }

    /// Fill defaults for the named experiment, drop unused fields and
    /// validate.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        self.resolve_inner().map_err(|e| CliError::Validation {
            message: e.message,
            line: None,
        })
    }

    fn resolve_inner(&self) -> std::result::Result<ExperimentConfig, Invalid> {
        use Experiment::*;
        let exp = self
            .experiment
            .ok_or_else(|| invalid("experiment", "missing `experiment`"))?;
        let s = self.clone();
        let mut r = ExperimentConfig {
            experiment: Some(exp),
            seed: Some(s.seed.unwrap_or(0)),
            format: Some(s.format.unwrap_or_default()),
            out_dir: s.out_dir.clone(),
            j: Some(s.j.unwrap_or(1.0)),
            ..Default::default()
        };
        let g = |d: GridSpec| Some(s.g_values.clone().unwrap_or(d));
        match exp {
            Fig1 => {
                r.n_sites = Some(s.n_sites.unwrap_or(10));
                r.g_values = g(GridSpec::Range {
                    start: 0.05,
                    stop: 2.0,
                    step: 0.05,
                });
                r.kappa_panels = Some(s.kappa_panels.unwrap_or_else(panels));
                r.levels = Some(s.levels.unwrap_or(8));
            }
            Fig2a => {
                r.n_sites = Some(s.n_sites.unwrap_or(12));
                r.g_values = g(GridSpec::Values(vec![0.5, 1.5]));
                r.kappa = Some(s.kappa.unwrap_or(KappaVector::new(0.05, 0.0, 0.0)));
                r.delta = Some(s.delta.unwrap_or(0.1));
                r.time = Some(s.time.unwrap_or(TimeSpec {
                    t_max: 0.5,
                    points: 101,
                }));
            }
            Fig2b => {
                r.n_sites = Some(s.n_sites.unwrap_or(12));
                r.g_values = g(GridSpec::Values(vec![0.4, 0.8, 1.2, 1.6]));
                r.kappa_pre = Some(s.kappa_pre.unwrap_or(KappaVector::new(0.05, 0.0, 0.0)));
                r.kappa = Some(s.kappa.unwrap_or(KappaVector::new(0.05, 0.1, 0.0)));
                r.perturbation = Some(s.perturbation.unwrap_or(Perturbation::Simplified));
                r.pairs = Some(s.pairs.unwrap_or_else(|| vec![0]));
                let k = r.kappa.unwrap();
                let w = k.x.hypot(k.y);
                if w == 0.0 {
                    return Err(invalid("kappa", "postquench κx and κy are both zero"));
                }
                r.time = Some(s.time.unwrap_or(TimeSpec {
                    t_max: 3.0 * PI / w,
                    points: 1000,
                }));
            }
            Fig2c => {
                r.n_sites_list = Some(s.n_sites_list.unwrap_or_else(|| vec![8, 10, 12]));
                r.g_values = g(GridSpec::Range {
                    start: 0.1,
                    stop: 2.0,
                    step: 0.1,
                });
                r.kappa_pre = Some(s.kappa_pre.unwrap_or(KappaVector::new(0.05, 0.0, 0.0)));
                r.kappa = Some(s.kappa.unwrap_or(KappaVector::new(0.05, 0.1, 0.0)));
                r.perturbation = Some(s.perturbation.unwrap_or(Perturbation::Simplified));
                let t_total = s.t_total.unwrap_or(500.0);
                r.t_total = Some(t_total);
                r.time = Some(s.time.unwrap_or(TimeSpec {
                    t_max: t_total,
                    points: 1001,
                }));
            }
            Fig3a | Fig3b | FigTemp => {
                r.n_sites = Some(s.n_sites.unwrap_or(10));
                r.kappa = Some(s.kappa.unwrap_or(KappaVector::new(0.1, 0.0, 0.0)));
                r.post_quench = Some(s.post_quench.unwrap_or(PostQuench::Local));
                r.time = Some(s.time.unwrap_or(TimeSpec {
                    t_max: 80.0,
                    points: 81,
                }));
                let all = vec![
                    EnsembleKind::RandomPhase,
                    EnsembleKind::FixedParity,
                    EnsembleKind::Canonical,
                ];
                let (gs, kinds, betas) = match exp {
                    Fig3a => (vec![0.4], all, vec![1.0]),
                    Fig3b => (
                        vec![0.4, 0.8, 1.2, 1.5],
                        vec![EnsembleKind::Canonical],
                        vec![1.0],
                    ),
                    _ => (vec![0.4], all, vec![0.5, 1.0, 2.0]),
                };
                r.g_values = g(GridSpec::Values(gs));
                r.ensembles = Some(s.ensembles.unwrap_or(kinds));
                r.betas = Some(s.betas.unwrap_or(betas));
            }
            OracleCheck => {
                r.n_sites_list = Some(s.n_sites_list.unwrap_or_else(|| vec![6, 8, 10]));
                r.g_values = g(GridSpec::Values(vec![0.1, 0.4, 0.7, 1.0, 1.3, 1.9]));
            }
            Gates => {
                r.n_sites = Some(s.n_sites.unwrap_or(12));
                r.g_values = g(GridSpec::Values(vec![0.5]));
                r.kappa = Some(s.kappa.unwrap_or(KappaVector::new(0.05, 0.0, 0.05)));
                r.pairs = Some(s.pairs.unwrap_or_else(|| vec![0]));
            }
        }
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> std::result::Result<(), Invalid> {
        let exp = self.experiment.unwrap();
        let j = self.j.unwrap();
        if !(j > 0.0 && j.is_finite()) {
            return Err(invalid(
                "j",
                format!("coupling j must be positive, got {j}"),
            ));
        }
        let sizes: Vec<usize> = self
            .n_sites
            .into_iter()
            .chain(self.n_sites_list.iter().flatten().copied())
            .collect();
        if self.n_sites_list.as_ref().is_some_and(|l| l.is_empty()) {
            return Err(invalid("n_sites_list", "n_sites_list is empty"));
        }
        for &n in &sizes {
            let field = if self.n_sites == Some(n) {
                "n_sites"
            } else {
                "n_sites_list"
            };
            if n > DENSE_SITE_CAP {
                return Err(invalid(
                    field,
                    format!("n_sites = {n} exceeds the dense diagonalization cap of {DENSE_SITE_CAP} sites"),
                ));
            }
            let min = if matches!(exp, Experiment::Fig1 | Experiment::OracleCheck) {
                1
            } else {
                2
            };
            if n < min {
                return Err(invalid(
                    field,
                    format!("n_sites must be at least {min}, got {n}"),
                ));
            }
        }
        let gs = self
            .g_values
            .as_ref()
            .map(GridSpec::values)
            .unwrap_or_default();
        if let Some(GridSpec::Range { start, stop, step }) = &self.g_values {
            if !(*step > 0.0 && stop >= start) {
                return Err(invalid(
                    "g_values",
                    "g range needs step > 0 and stop >= start",
                ));
            }
        }
        if gs.is_empty() {
            return Err(invalid("g_values", "no field values given"));
        }
        if let Some(&g) = gs.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(invalid(
                "g_values",
                format!("field values must be positive, got {g}"),
            ));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(invalid(
                    "delta",
                    format!("pulse width must be positive, got {d}"),
                ));
            }
        }
        if let Some(t) = self.time {
            if t.points < 2 || !(t.t_max > 0.0 && t.t_max.is_finite()) {
                return Err(invalid(
                    "time",
                    "time grid needs t_max > 0 and at least 2 points",
                ));
            }
        }
        if let Some(t) = self.t_total {
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid("t_total", format!("T must be positive, got {t}")));
            }
            if self.time.is_some_and(|s| (s.t_max - t).abs() > 1e-9 * t) {
                return Err(invalid(
                    "time",
                    "time.t_max must equal t_total for averaged echoes",
                ));
            }
        }
        if let Some(b) = &self.betas {
            if b.is_empty() {
                return Err(invalid("betas", "betas is empty"));
            }
            if let Some(&beta) = b.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
                return Err(invalid("betas", format!("β must be >= 0, got {beta}")));
            }
        }
        if self.levels == Some(0) {
            return Err(invalid("levels", "levels must be positive"));
        }
        let max_ratio = gs.iter().fold(0.0f64, |m, g| m.max(g / j));
        let ordered_only = |what: &str, field: &'static str| {
            if max_ratio >= 1.0 {
                Err(invalid(
                    field,
                    format!("{what} needs the ordered phase, got g/J = {max_ratio}"),
                ))
            } else {
                Ok(())
            }
        };
        if exp.is_thermal() {
            let structured = self
                .ensembles
                .iter()
                .flatten()
                .any(|k| *k != EnsembleKind::Canonical);
            if structured && max_ratio >= 1.0 {
                return Err(invalid(
                    "g_values",
                    format!(
                        "random_phase and fixed_parity ensembles are absent in the disordered phase \
                         (levels are not degenerate at g/J = {max_ratio}); use the canonical ensemble"
                    ),
                ));
            }
            if self.post_quench == Some(PostQuench::ExactEdge) {
                ordered_only("the exact_edge postquench", "post_quench")?;
            }
            if self.ensembles.as_ref().is_some_and(|e| e.is_empty()) {
                return Err(invalid("ensembles", "ensembles is empty"));
            }
        }
        if self.perturbation == Some(Perturbation::Exact) {
            ordered_only("the exact edge perturbation", "perturbation")?;
        }
        if exp == Experiment::Gates {
            ordered_only("gates", "g_values")?;
        }
        if exp == Experiment::Fig2b {
            let k = self.kappa_pre.unwrap();
            if k.is_zero() {
                return Err(invalid("kappa_pre", "prequench perturbation is zero"));
            }
        }
        Ok(())
    }
}

/// Parse a TOML or JSON config (by extension; JSON when the text starts
/// with `{`), then resolve it. Errors carry the line of the offending key.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    let cfg = parse_config(path, &text)?;
    cfg.resolve_inner().map_err(|e| CliError::Validation {
        message: e.message,
        line: key_line(&text, e.field),
    })
}

pub fn parse_config(path: &Path, text: &str) -> Result<ExperimentConfig> {
    let is_json =
        path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
    if is_json {
        serde_json::from_str(text).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    } else {
        toml::from_str(text).map_err(|e| {
            let offset = e.span().map(|s| s.start).unwrap_or(0);
            let (line, column) = line_col(text, offset);
            CliError::Parse {
                path: path.to_path_buf(),
                line,
                column,
                message: e.message().to_string(),
            }
        })
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map(|p| offset - p).unwrap_or(offset + 1);
    (line, column)
}

/// First line that assigns `key` (TOML `key =`, JSON `"key":`).
fn key_line(text: &str, key: &str) -> Option<usize> {
    text.lines()
        .position(|l| {
            let t = l.trim_start().trim_start_matches(['{', ',']).trim_start();
            let t = t.strip_prefix('"').unwrap_or(t);
            t.strip_prefix(key).is_some_and(|rest| {
                let rest = rest.strip_prefix('"').unwrap_or(rest).trim_start();
                rest.starts_with('=') || rest.starts_with(':') || rest.starts_with('.')
            }) || t.starts_with(&format!("[{key}]"))
        })
        .map(|p| p + 1)
}
