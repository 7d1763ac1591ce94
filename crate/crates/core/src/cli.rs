//! Configuration files, built-in scenarios, CSV output and run orchestration
//! for the `csaloha` binary.
//!
//! Config files are plain text with four sections:
//!
//! ```text
//! # two user classes sharing one slot class
//! [users]        # one row per class: fraction loss_prob
//! 0.5 0.25
//! 0.5 0.5
//! [slots]        # one row per class: fraction
//! 1.0
//! [access]       # L rows of J access constants
//! 3.05
//! 0
//! [run]
//! epsilon = -0.3
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::degree::expected_slot_degree;
use crate::density_evolution::{evolve, EvolveOptions, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::model::{AccessMatrix, SlotClass, SystemConfig, UserClass};
use crate::optimizer::{self, AlphaGrid, AlphaOptimum, FloorSearch};
use crate::simulator::{self, TrialStats};

pub const PRESET_NAMES: [&str; 3] = ["scenario1", "scenario2", "scenario3"];

/// Built-in scenarios: one user class without loss, one user class with loss
/// 0.375, and two equal classes with losses 0.25 and 0.5, all on a single
/// slot class. Access constants and epsilon sit at the throughput-optimal
/// operating point of each, rounded to two decimals on the decodable side of
/// the threshold.
pub fn preset(name: &str) -> Result<SystemConfig> {
    let (users, alpha, epsilon): (Vec<UserClass>, Vec<Vec<f64>>, f64) = match name {
        "scenario1" => (vec![UserClass::new(1.0, 0.0)], vec![vec![3.05]], 0.05),
        "scenario2" => (vec![UserClass::new(1.0, 0.375)], vec![vec![3.1]], 0.7),
        "scenario3" => (
            vec![UserClass::new(0.5, 0.25), UserClass::new(0.5, 0.5)],
            vec![vec![3.05], vec![0.0]],
            -0.3,
        ),
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    SystemConfig::new(
        users,
        vec![SlotClass::new(1.0)],
        AccessMatrix::from_rows(&alpha)?,
        epsilon,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Users,
    Slots,
    Access,
    Run,
}

fn parse_number(token: &str, line: usize, what: &str) -> Result<f64> {
    token.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("{what}: `{token}` is not a number"),
    })
}

/// Parses config text and validates the result.
pub fn parse_config(text: &str) -> Result<SystemConfig> {
    let mut section = None;
    let mut users = Vec::new();
    let mut slots = Vec::new();
    let mut access: Vec<Vec<f64>> = Vec::new();
    let mut access_line = 0;
    let mut epsilon = None;
    let mut seen = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let s = match name.trim() {
                "users" => Section::Users,
                "slots" => Section::Slots,
                "access" => Section::Access,
                "run" => Section::Run,
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown section `[{other}]`"),
                    })
                }
            };
            if seen.contains(&s) {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate section `[{}]`", name.trim()),
                });
            }
            seen.push(s);
            section = Some(s);
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match section {
            None => {
                return Err(Error::Parse {
                    line,
                    message: format!("`{content}` appears before any section"),
                })
            }
            Some(Section::Users) => {
                if tokens.len() != 2 {
                    return Err(Error::Parse {
                        line,
                        message: "[users] rows need `fraction loss_prob`".into(),
                    });
                }
                users.push(UserClass::new(
                    parse_number(tokens[0], line, "users.fraction")?,
                    parse_number(tokens[1], line, "users.loss_prob")?,
                ));
            }
            Some(Section::Slots) => {
                if tokens.len() != 1 {
                    return Err(Error::Parse {
                        line,
                        message: "[slots] rows need a single `fraction`".into(),
                    });
                }
                slots.push(SlotClass::new(parse_number(tokens[0], line, "slots.fraction")?));
            }
            Some(Section::Access) => {
                let row = tokens
                    .iter()
                    .map(|t| parse_number(t, line, "access"))
                    .collect::<Result<Vec<_>>>()?;
                if let Some(first) = access.first() {
                    if first.len() != row.len() {
                        return Err(Error::Parse {
                            line,
                            message: format!(
                                "access row has {} entries, previous rows have {}",
                                row.len(),
                                first.len()
                            ),
                        });
                    }
                }
                access_line = line;
                access.push(row);
            }
            Some(Section::Run) => {
                let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                    line,
                    message: format!("expected `key = value` in [run], got `{content}`"),
                })?;
                match key.trim() {
                    "epsilon" => {
                        epsilon = Some(parse_number(value.trim(), line, "run.epsilon")?)
                    }
                    other => {
                        return Err(Error::Parse {
                            line,
                            message: format!("unknown key `{other}` in [run]"),
                        })
                    }
                }
            }
        }
    }

    let end = text.lines().count();
    let missing = |what: &str| Error::Parse {
        line: end,
        message: format!("missing {what}"),
    };
    if users.is_empty() {
        return Err(missing("[users] rows"));
    }
    if slots.is_empty() {
        return Err(missing("[slots] rows"));
    }
    if access.is_empty() {
        return Err(missing("[access] rows"));
    }
    let epsilon = epsilon.ok_or_else(|| missing("key `epsilon` in [run]"))?;
    if access.len() != users.len() || access[0].len() != slots.len() {
        return Err(Error::Parse {
            line: access_line,
            message: format!(
                "access matrix is {}x{}, expected {}x{} (user classes x slot classes)",
                access.len(),
                access[0].len(),
                users.len(),
                slots.len()
            ),
        });
    }
    SystemConfig::new(users, slots, AccessMatrix::from_rows(&access)?, epsilon)
}

/// Renders a config in the format read by [`parse_config`]. Numbers use the
/// shortest representation that parses back to the same value.
pub fn dump_config(config: &SystemConfig) -> String {
    let mut out = String::new();
    out.push_str("[users]\n");
    for u in &config.user_classes {
        let _ = writeln!(out, "{} {}", u.fraction, u.loss_prob);
    }
    out.push_str("[slots]\n");
    for s in &config.slot_classes {
        let _ = writeln!(out, "{}", s.fraction);
    }
    out.push_str("[access]\n");
    for l in 0..config.num_user_classes() {
        let row: Vec<String> = config.access.row(l).iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out.push_str("[run]\n");
    let _ = writeln!(out, "epsilon = {}", config.epsilon);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigSource {
    Preset(String),
    File(PathBuf),
}

/// Resolves a preset name or reads and parses a config file.
pub fn load_config(source: &ConfigSource) -> Result<SystemConfig> {
    match source {
        ConfigSource::Preset(name) => preset(name),
        ConfigSource::File(path) => parse_config(&fs::read_to_string(path)?),
    }
}

/// Formats `x` with six significant digits and a `.` decimal separator.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-4..=15).contains(&magnitude) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

fn csv_row(values: &[f64]) -> String {
    values.iter().map(|&v| format_sig6(v)).collect::<Vec<_>>().join(",")
}

fn slot_and_alpha_headers(config: &SystemConfig) -> Vec<String> {
    let mut headers: Vec<String> = (1..=config.num_slot_classes())
        .map(|j| format!("beta_{j}"))
        .collect();
    for l in 1..=config.num_user_classes() {
        for j in 1..=config.num_slot_classes() {
            headers.push(format!("alpha_{l}_{j}"));
        }
    }
    headers
}

/// CSV with columns `m_over_n, throughput, resolution_prob, beta_j..., alpha_l_j...`.
pub fn optimum_csv(config: &SystemConfig, points: &[AlphaOptimum]) -> String {
    let mut header = vec![
        "m_over_n".to_string(),
        "throughput".into(),
        "resolution_prob".into(),
    ];
    header.extend(slot_and_alpha_headers(config));
    let mut out = header.join(",");
    out.push('\n');
    for p in points {
        let mut row = vec![1.0 + p.epsilon, p.throughput, p.resolution];
        row.extend_from_slice(&p.slot_degrees);
        row.extend_from_slice(p.access.as_slice());
        out.push_str(&csv_row(&row));
        out.push('\n');
    }
    out
}

/// One row per iteration with the per-class unresolved probabilities.
pub fn trajectory_csv(trajectories: &[Vec<f64>]) -> String {
    let mut out = String::from("iteration");
    for l in 1..=trajectories.len() {
        let _ = write!(out, ",y_{l}");
    }
    out.push('\n');
    let len = trajectories.first().map_or(0, Vec::len);
    for i in 0..len {
        out.push_str(&i.to_string());
        for t in trajectories {
            out.push(',');
            out.push_str(&format_sig6(t[i]));
        }
        out.push('\n');
    }
    out
}

pub fn trials_csv(stats: &TrialStats) -> String {
    let classes = stats.mean_per_class_resolved_fraction.len();
    let mut out = String::from("trial,resolved_fraction,throughput");
    for l in 1..=classes {
        let _ = write!(out, ",resolved_fraction_{l}");
    }
    out.push_str(",peel_rounds,num_slots,num_edges\n");
    for t in &stats.trials {
        let mut row = vec![t.resolved_fraction, t.throughput];
        row.extend_from_slice(&t.per_class_resolved_fraction);
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            t.trial,
            csv_row(&row),
            t.peel_rounds,
            t.num_slots,
            t.num_edges
        );
    }
    out
}

/// Human-readable table of the headline metrics.
pub fn summary_table(
    config: &SystemConfig,
    throughput: f64,
    resolution: f64,
    per_class: &[f64],
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<18}{:>12}", "M/N", format_sig6(config.slots_per_user()));
    let _ = writeln!(out, "{:<18}{:>12}", "T", format_sig6(throughput));
    let _ = writeln!(out, "{:<18}{:>12}", "P_R", format_sig6(resolution));
    for (l, p) in per_class.iter().enumerate() {
        let _ = writeln!(out, "{:<18}{:>12}", format!("P_R[{}]", l + 1), format_sig6(*p));
    }
    for j in 0..config.num_slot_classes() {
        let beta = expected_slot_degree(config, j).unwrap_or(f64::NAN);
        let _ = writeln!(out, "{:<18}{:>12}", format!("beta[{}]", j + 1), format_sig6(beta));
    }
    for l in 0..config.num_user_classes() {
        for j in 0..config.num_slot_classes() {
            let _ = writeln!(
                out,
                "{:<18}{:>12}",
                format!("alpha[{}][{}]", l + 1, j + 1),
                format_sig6(config.access.get(l, j))
            );
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Evolve,
    Sweep,
    Simulate,
    Optimize,
    Dump,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub mode: Mode,
    pub source: ConfigSource,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub eps_min: f64,
    pub eps_max: f64,
    pub eps_steps: usize,
    pub alpha_max: f64,
    pub alpha_step: f64,
    pub target_pr: Option<f64>,
    pub out: Option<PathBuf>,
    pub max_iter: usize,
    pub tol: f64,
}

impl RunSpec {
    pub fn new(mode: Mode, source: ConfigSource) -> Self {
        Self {
            mode,
            source,
            n: 10_000,
            trials: 100,
            seed: 1,
            eps_min: -0.5,
            eps_max: 1.5,
            eps_steps: 41,
            alpha_max: 8.0,
            alpha_step: 0.1,
            target_pr: None,
            out: None,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
        }
    }

    fn options(&self) -> EvolveOptions {
        EvolveOptions::new(self.max_iter, self.tol)
    }

    fn grid(&self) -> AlphaGrid {
        AlphaGrid::new(self.alpha_max, self.alpha_step)
    }
}

fn write_output(path: Option<&Path>, contents: &str) -> Result<()> {
    if let Some(path) = path {
        fs::write(path, contents)?;
    }
    Ok(())
}

/// Executes `spec`, writes its output file if one was requested and returns
/// the summary text for standard output.
pub fn run(spec: &RunSpec) -> Result<String> {
    let config = load_config(&spec.source)?;
    let out = spec.out.as_deref();
    match spec.mode {
        Mode::Dump => {
            let text = dump_config(&config);
            write_output(out, &text)?;
            Ok(text)
        }
        Mode::Evolve => {
            let result = evolve(&config, &spec.options())?;
            write_output(out, &trajectory_csv(&result.trajectories))?;
            let mut summary = summary_table(
                &config,
                result.throughput,
                result.aggregate_resolution,
                &result.resolution_probs,
            );
            let _ = writeln!(
                summary,
                "{:<18}{:>12}\n{:<18}{:>12}",
                "iterations",
                result.iterations_used,
                "converged",
                result.converged
            );
            Ok(summary)
        }
        Mode::Sweep => {
            let report = optimizer::sweep_eps(
                &config,
                spec.eps_min,
                spec.eps_max,
                spec.eps_steps,
                &spec.grid(),
                &spec.options(),
            )?;
            write_output(out, &optimum_csv(&config, &report.sweep_samples))?;
            let best = config
                .with_access(report.best_alpha.clone())
                .with_epsilon(report.best_epsilon);
            Ok(format!(
                "best operating point over M/N in [{}, {}]\n{}",
                format_sig6(1.0 + spec.eps_min),
                format_sig6(1.0 + spec.eps_max),
                summary_table(
                    &best,
                    report.best_throughput,
                    report.best_resolution,
                    &report.per_class_resolution
                )
            ))
        }
        Mode::Optimize => {
            let optimum = match spec.target_pr {
                Some(target) => {
                    FloorSearch::new(&config, &[config.epsilon], &spec.grid(), &spec.options())?
                        .best_with_floor(target)?
                }
                None => optimizer::optimize_alpha_at_eps(
                    &config,
                    config.epsilon,
                    &spec.grid(),
                    &spec.options(),
                )?,
            };
            write_output(out, &optimum_csv(&config, std::slice::from_ref(&optimum)))?;
            let best = config.with_access(optimum.access.clone());
            Ok(summary_table(
                &best,
                optimum.throughput,
                optimum.resolution,
                &optimum.per_class_resolution,
            ))
        }
        Mode::Simulate => {
            let stats = simulator::run_trials(&config, spec.n, spec.trials, spec.seed)?;
            write_output(out, &trials_csv(&stats))?;
            let asymptotic = evolve(&config, &spec.options())?;
            let mut summary = String::new();
            let _ = writeln!(
                summary,
                "{} trials, N = {}, M = {}, seed = {}",
                spec.trials,
                spec.n,
                simulator::num_slots(&config, spec.n),
                spec.seed
            );
            let _ = writeln!(
                summary,
                "{:<18}{:>12}{:>12}{:>12}",
                "", "mean", "stderr", "asymptotic"
            );
            let _ = writeln!(
                summary,
                "{:<18}{:>12}{:>12}{:>12}",
                "T",
                format_sig6(stats.mean_throughput),
                format_sig6(stats.stderr_throughput),
                format_sig6(asymptotic.throughput)
            );
            let _ = writeln!(
                summary,
                "{:<18}{:>12}{:>12}{:>12}",
                "P_R",
                format_sig6(stats.mean_resolved_fraction),
                format_sig6(stats.stderr_resolved_fraction),
                format_sig6(asymptotic.aggregate_resolution)
            );
            for l in 0..config.num_user_classes() {
                let _ = writeln!(
                    summary,
                    "{:<18}{:>12}{:>12}{:>12}",
                    format!("P_R[{}]", l + 1),
                    format_sig6(stats.mean_per_class_resolved_fraction[l]),
                    format_sig6(stats.stderr_per_class_resolved_fraction[l]),
                    format_sig6(asymptotic.resolution_probs[l])
                );
            }
            Ok(summary)
        }
    }
}
