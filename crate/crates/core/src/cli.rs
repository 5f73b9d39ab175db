//! Command-line front end.
//!
//! Parameters come from an optional TOML file (`--config`) whose keys mirror
//! the long flag names with `_` for `-`; flags override file values. Sweeps
//! are written as CSV with `%.12e` numbers, single runs as JSON lines.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Deserialize;
use toml::Spanned;

use crate::fock::{AtomLevel, ModeFockLabel, TwoModeState};
use crate::oracle::crosscheck_batch;
use crate::quasimode::BasisTransform;
use crate::schemes::{
    conditional_overlap, conditional_state, conditional_success_probability, deterministic_schedule,
    nonconditional_weights, single_step_probability, BellSign, BellTarget, Target, TargetState,
};
use crate::wigner::CouplingConfig;
use crate::C64;

const DEFAULT_STEPS: usize = 201;
const DEFAULT_DRAWS: usize = 50;
const DEFAULT_ORACLE_CUTOFF: u32 = 8;
/// Rounding slack before a computed probability is reported as invalid.
const PROBABILITY_SLACK: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(name = "twomode-jc", version, about = "Two-mode Jaynes-Cummings dynamics and entangled photon state generation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bell-state probabilities for the eight one-photon initial states
    /// with equal real couplings, over a tau grid.
    Figure1(Flags),
    /// Single-step generation probability of a target state over a tau grid.
    Single(Flags),
    /// Conditional scheme: final state, success probability, Bell overlaps.
    Conditional(Flags),
    /// Non-conditional scheme: weight table and target probabilities.
    Nonconditional(Flags),
    /// Crosscheck the algebraic evolution against brute force.
    Oracle(Flags),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Records,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignArg {
    Plus,
    Minus,
}

impl From<SignArg> for BellSign {
    fn from(s: SignArg) -> Self {
        match s {
            SignArg::Plus => BellSign::Plus,
            SignArg::Minus => BellSign::Minus,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    #[arg(long)]
    pub g1_mag: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub g1_phase: Option<f64>,
    #[arg(long)]
    pub g2_mag: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub g2_phase: Option<f64>,
    /// Target photon number N.
    #[arg(long)]
    pub n_photons: Option<u32>,
    #[arg(long, value_enum)]
    pub bell_sign: Option<SignArg>,
    /// One interaction time (g t).
    #[arg(long)]
    pub tau: Option<f64>,
    /// Comma-separated interaction times.
    #[arg(long, value_delimiter = ',')]
    pub tau_list: Option<Vec<f64>>,
    /// Upper end of the tau grid [0, tau_max].
    #[arg(long)]
    pub tau_max: Option<f64>,
    /// Number of tau grid points.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Photon-number cutoff n1 + n2 <= cutoff.
    #[arg(long)]
    pub cutoff: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of oracle draws.
    #[arg(long)]
    pub draws: Option<usize>,
    /// Initial atom-field Fock state for `single`, e.g. `e;1,0`.
    #[arg(long)]
    pub initial: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    g1_mag: Option<Spanned<f64>>,
    g1_phase: Option<Spanned<f64>>,
    g2_mag: Option<Spanned<f64>>,
    g2_phase: Option<Spanned<f64>>,
    n_photons: Option<Spanned<u32>>,
    bell_sign: Option<Spanned<SignArg>>,
    /// `[[re, im], ...]` over `|N-k, k>`, `k = 0..=N`.
    coefficients: Option<Spanned<Vec<[f64; 2]>>>,
    tau: Option<Spanned<f64>>,
    tau_list: Option<Spanned<Vec<f64>>>,
    tau_max: Option<Spanned<f64>>,
    steps: Option<Spanned<usize>>,
    cutoff: Option<Spanned<u32>>,
    seed: Option<Spanned<u64>>,
    format: Option<Spanned<Format>>,
    out: Option<Spanned<PathBuf>>,
    draws: Option<Spanned<usize>>,
    initial: Option<Spanned<String>>,
}

/// Where a parameter value came from, for error messages.
#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    Default,
    Flag(&'static str),
    File { path: PathBuf, line: usize },
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Default => f.write_str("default"),
            Origin::Flag(name) => write!(f, "--{}", name.replace('_', "-")),
            Origin::File { path, line } => write!(f, "{}:{line}", path.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub value: T,
    pub origin: Origin,
}

impl<T> Param<T> {
    fn fail(&self, msg: impl fmt::Display) -> anyhow::Error {
        anyhow!("{}: {msg}", self.origin)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TauSpec {
    Single(f64),
    List(Vec<f64>),
    Grid { max: f64, steps: usize },
}

/// Fully resolved parameters. Values not set anywhere are `None` and get
/// per-command defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub couplings: CouplingConfig,
    pub n_photons: Option<Param<u32>>,
    pub bell_sign: BellSign,
    pub coefficients: Option<Param<Vec<C64>>>,
    pub taus: Option<Param<TauSpec>>,
    pub cutoff: Option<Param<u32>>,
    pub seed: u64,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub draws: Option<Param<usize>>,
    pub initial: Option<Param<(AtomLevel, ModeFockLabel)>>,
}

struct Source<'a> {
    path: &'a Path,
    text: &'a str,
}

impl Source<'_> {
    fn line(&self, span: std::ops::Range<usize>) -> usize {
        self.text[..span.start.min(self.text.len())].matches('\n').count() + 1
    }
}

fn pick<T: Clone>(flag: Option<T>, name: &'static str, file: &Option<Spanned<T>>, src: Option<&Source>) -> Option<Param<T>> {
    if let Some(value) = flag {
        return Some(Param {
            value,
            origin: Origin::Flag(name),
        });
    }
    match (file, src) {
        (Some(s), Some(src)) => Some(Param {
            value: s.get_ref().clone(),
            origin: Origin::File {
                path: src.path.to_path_buf(),
                line: src.line(s.span()),
            },
        }),
        _ => None,
    }
}

fn finite(p: &Param<f64>, what: &str) -> anyhow::Result<f64> {
    if !p.value.is_finite() {
        return Err(p.fail(format!("{what} must be finite")));
    }
    Ok(p.value)
}

fn nonneg(p: &Param<f64>, what: &str) -> anyhow::Result<f64> {
    let v = finite(p, what)?;
    if v < 0.0 {
        return Err(p.fail(format!("{what} must be non-negative, got {v}")));
    }
    Ok(v)
}

/// Parses `e;n1,n2` or `g;n1,n2`.
pub fn parse_initial(s: &str) -> Option<(AtomLevel, ModeFockLabel)> {
    let (level, rest) = s.trim().split_once(';')?;
    let level = match level.trim() {
        "e" => AtomLevel::Excited,
        "g" => AtomLevel::Ground,
        _ => return None,
    };
    let (a, b) = rest.split_once(',')?;
    Some((level, ModeFockLabel::new(a.trim().parse().ok()?, b.trim().parse().ok()?)))
}

pub fn format_initial(level: AtomLevel, label: ModeFockLabel) -> String {
    format!("{level};{},{}", label.n1, label.n2)
}

impl RunConfig {
    /// Merges the config file (if any) with flag overrides and validates
    /// everything that does not depend on the subcommand.
    pub fn resolve(flags: &Flags) -> anyhow::Result<Self> {
        let text;
        let (file, src) = match &flags.config {
            Some(path) => {
                text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let file: FileConfig =
                    toml::from_str(&text).map_err(|e| anyhow!("{}: {}", path.display(), e.to_string().trim_end()))?;
                (file, Some(Source { path, text: &text }))
            }
            None => (FileConfig::default(), None),
        };
        let src = src.as_ref();
        let f = flags.clone();

        let mags = [
            pick(f.g1_mag, "g1_mag", &file.g1_mag, src),
            pick(f.g2_mag, "g2_mag", &file.g2_mag, src),
        ];
        let phases = [
            pick(f.g1_phase, "g1_phase", &file.g1_phase, src),
            pick(f.g2_phase, "g2_phase", &file.g2_phase, src),
        ];
        let mut m = [1.0, 1.0];
        let mut ph = [0.0, 0.0];
        for i in 0..2 {
            if let Some(p) = &mags[i] {
                m[i] = nonneg(p, "coupling magnitude")?;
            }
            if let Some(p) = &phases[i] {
                ph[i] = finite(p, "coupling phase")?;
            }
        }
        let couplings = CouplingConfig::from_polar(m[0], ph[0], m[1], ph[1]).map_err(|e| {
            let origin = mags.iter().flatten().next().map_or(Origin::Default, |p| p.origin.clone());
            anyhow!("{origin}: {e}")
        })?;

        let n_photons = pick(f.n_photons, "n_photons", &file.n_photons, src);
        if let Some(n) = &n_photons {
            if n.value == 0 {
                return Err(n.fail("n_photons must be at least 1"));
            }
        }

        let bell_sign = pick(f.bell_sign, "bell_sign", &file.bell_sign, src).map_or(BellSign::Plus, |p| p.value.into());

        let coefficients = match (&file.coefficients, src) {
            (Some(s), Some(src)) => Some(Param {
                value: s.get_ref().iter().map(|[re, im]| C64::new(*re, *im)).collect::<Vec<_>>(),
                origin: Origin::File {
                    path: src.path.to_path_buf(),
                    line: src.line(s.span()),
                },
            }),
            _ => None,
        };
        if let Some(c) = &coefficients {
            if c.value.len() < 2 {
                return Err(c.fail("coefficients need at least two entries"));
            }
            let expected = n_photons.as_ref().map_or(c.value.len(), |n| n.value as usize + 1);
            TargetState::new(expected as u32 - 1, c.value.clone()).map_err(|e| c.fail(e))?;
        }

        let tau = pick(f.tau, "tau", &file.tau, src);
        let tau_list = pick(f.tau_list, "tau_list", &file.tau_list, src);
        let tau_max = pick(f.tau_max, "tau_max", &file.tau_max, src);
        let steps = pick(f.steps, "steps", &file.steps, src);
        let taus = match (tau, tau_list) {
            (Some(t), Some(l)) => {
                return Err(l.fail(format!("tau_list conflicts with tau set at {}", t.origin)));
            }
            (Some(t), None) => Some(Param {
                value: TauSpec::Single(nonneg(&t, "tau")?),
                origin: t.origin,
            }),
            (None, Some(l)) => {
                for &v in &l.value {
                    if !v.is_finite() || v < 0.0 {
                        return Err(l.fail(format!("tau_list entries must be finite and non-negative, got {v}")));
                    }
                }
                Some(Param {
                    value: TauSpec::List(l.value),
                    origin: l.origin,
                })
            }
            (None, None) if tau_max.is_some() || steps.is_some() => {
                let max = match &tau_max {
                    Some(p) => nonneg(p, "tau_max")?,
                    None => 2.0 * std::f64::consts::PI,
                };
                let n = steps.as_ref().map_or(DEFAULT_STEPS, |p| p.value);
                if n < 2 {
                    return Err(steps.as_ref().expect("steps set").fail("steps must be at least 2"));
                }
                let origin = tau_max.or(steps.map(|s| Param { value: 0.0, origin: s.origin })).expect("one is set").origin;
                Some(Param {
                    value: TauSpec::Grid { max, steps: n },
                    origin,
                })
            }
            (None, None) => None,
        };

        let initial = match pick(f.initial, "initial", &file.initial, src) {
            Some(p) => {
                let parsed = parse_initial(&p.value).ok_or_else(|| p.fail(format!("cannot parse initial state {:?}, expected e.g. e;1,0", p.value)))?;
                Some(Param {
                    value: parsed,
                    origin: p.origin,
                })
            }
            None => None,
        };

        Ok(Self {
            couplings,
            n_photons,
            bell_sign,
            coefficients,
            taus,
            cutoff: pick(f.cutoff, "cutoff", &file.cutoff, src),
            seed: pick(f.seed, "seed", &file.seed, src).map_or(0, |p| p.value),
            format: pick(f.format, "format", &file.format, src).map(|p| p.value),
            out: pick(f.out, "out", &file.out, src).map(|p| p.value),
            draws: pick(f.draws, "draws", &file.draws, src),
            initial,
        })
    }

    fn n(&self) -> u32 {
        match (&self.n_photons, &self.coefficients) {
            (Some(n), _) => n.value,
            (None, Some(c)) => c.value.len() as u32 - 1,
            (None, None) => 1,
        }
    }

    fn general_target(&self) -> Option<TargetState> {
        self.coefficients
            .as_ref()
            .map(|c| TargetState::new(c.value.len() as u32 - 1, c.value.clone()).expect("validated in resolve"))
    }

    /// The configured target: explicit coefficients, else a Bell state.
    pub fn target(&self, n: u32) -> anyhow::Result<Target> {
        match self.general_target() {
            Some(t) => Ok(Target::General(t)),
            None => Ok(Target::Bell(BellTarget::new(n, self.bell_sign)?)),
        }
    }

    /// Grid (or list) of interaction times for sweeps.
    fn tau_grid(&self) -> Vec<f64> {
        match self.taus.as_ref().map(|p| &p.value) {
            Some(TauSpec::Single(t)) => vec![*t],
            Some(TauSpec::List(l)) => l.clone(),
            Some(TauSpec::Grid { max, steps }) => grid(*max, *steps),
            None => grid(2.0 * std::f64::consts::PI, DEFAULT_STEPS),
        }
    }

    /// Per-atom interaction times for an `n`-photon sequence; the default is
    /// the schedule `pi / (2 sqrt(l))`.
    fn sequence_taus(&self, n: u32) -> anyhow::Result<Vec<f64>> {
        match &self.taus {
            None => Ok(deterministic_schedule(n as usize)),
            Some(p) => match &p.value {
                TauSpec::Single(t) => Ok(vec![*t; n as usize]),
                TauSpec::List(l) => Ok(l.clone()),
                TauSpec::Grid { .. } => Err(p.fail("a sequence needs tau or tau_list, not a grid")),
            },
        }
    }
}

fn grid(max: f64, steps: usize) -> Vec<f64> {
    (0..steps).map(|i| max * i as f64 / (steps - 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

/// Rows of named columns; the unit of all CLI output.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// C-style `%.12e`: `1.000000000000e+00`.
pub fn format_sci(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    format!("{mantissa}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
}

pub fn render_csv(table: &Table) -> anyhow::Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|c| match c {
            Cell::Num(x) => format_sci(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }))?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// One JSON object per row.
pub fn render_records(table: &Table) -> anyhow::Result<String> {
    let mut out = String::new();
    for row in &table.rows {
        let mut obj = serde_json::Map::new();
        for (h, c) in table.header.iter().zip(row) {
            let v = match c {
                Cell::Num(x) => serde_json::Number::from_f64(*x)
                    .map(serde_json::Value::Number)
                    .ok_or_else(|| anyhow!("non-finite value in column {h}"))?,
                Cell::Int(i) => serde_json::Value::from(*i),
                Cell::Text(s) => serde_json::Value::from(s.as_str()),
                Cell::Empty => serde_json::Value::Null,
            };
            obj.insert(h.clone(), v);
        }
        out.push_str(&serde_json::to_string(&obj)?);
        out.push('\n');
    }
    Ok(out)
}

/// Checks that `p` is a probability up to rounding and clamps it.
fn probability(p: f64, what: &str) -> anyhow::Result<f64> {
    if !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&p) {
        bail!("{what} = {p} is not a probability");
    }
    Ok(p.clamp(0.0, 1.0))
}

/// The eight one-photon-target initial states, atom-excited first.
pub const FIGURE1_STATES: [(AtomLevel, ModeFockLabel); 8] = [
    (AtomLevel::Excited, ModeFockLabel::new(1, 0)),
    (AtomLevel::Excited, ModeFockLabel::new(0, 1)),
    (AtomLevel::Excited, ModeFockLabel::new(0, 0)),
    (AtomLevel::Ground, ModeFockLabel::new(1, 0)),
    (AtomLevel::Ground, ModeFockLabel::new(0, 1)),
    (AtomLevel::Ground, ModeFockLabel::new(2, 0)),
    (AtomLevel::Ground, ModeFockLabel::new(1, 1)),
    (AtomLevel::Ground, ModeFockLabel::new(0, 2)),
];

/// `(tau, initial_state, p_plus, p_minus)` for one-photon Bell targets,
/// equal real couplings.
pub fn cmd_figure1(tau_max: f64, steps: usize) -> anyhow::Result<Table> {
    if steps < 2 {
        bail!("steps must be at least 2");
    }
    if !tau_max.is_finite() || tau_max < 0.0 {
        bail!("tau_max must be finite and non-negative");
    }
    figure1_rows(&grid(tau_max, steps))
}

fn figure1_rows(taus: &[f64]) -> anyhow::Result<Table> {
    let cutoff = 2;
    let transform = BasisTransform::build(&CouplingConfig::equal_real(), cutoff)?;
    let plus: TargetState = BellTarget::new(1, BellSign::Plus)?.into();
    let minus: TargetState = BellTarget::new(1, BellSign::Minus)?.into();
    let mut table = Table::new(["tau", "initial_state", "p_plus", "p_minus"]);
    for (level, label) in FIGURE1_STATES {
        let field = TwoModeState::basis_state(label, cutoff)?;
        let rows = taus
            .par_iter()
            .map(|&tau| -> anyhow::Result<Vec<Cell>> {
                let pp = single_step_probability(&field, level, &plus, tau, &transform)?;
                let pm = single_step_probability(&field, level, &minus, tau, &transform)?;
                Ok(vec![
                    Cell::Num(tau),
                    Cell::Text(format_initial(level, label)),
                    Cell::Num(probability(pp, "p_plus")?),
                    Cell::Num(probability(pm, "p_minus")?),
                ])
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        table.rows.extend(rows);
    }
    Ok(table)
}

/// `(tau, probability)` for the configured initial state and target.
pub fn cmd_single(config: &RunConfig) -> anyhow::Result<Table> {
    let n = config.n();
    let (level, label) = config.initial.as_ref().map_or((AtomLevel::Excited, ModeFockLabel::new(0, 0)), |p| p.value);
    let cutoff = match &config.cutoff {
        Some(c) => {
            if c.value < n + 1 {
                return Err(c.fail(format!("cutoff {} must be at least n_photons + 1 = {}", c.value, n + 1)));
            }
            if c.value < label.total() {
                return Err(c.fail(format!("cutoff {} is below the initial state's {} photons", c.value, label.total())));
            }
            c.value
        }
        None => (n + 1).max(label.total()),
    };
    let target = config.target(n)?.to_target_state();
    let field = TwoModeState::basis_state(label, cutoff)?;
    let transform = BasisTransform::build(&config.couplings, cutoff)?;
    let initial = format_initial(level, label);
    let mut table = Table::new(["tau", "initial_state", "n_photons", "probability"]);
    table.rows = config
        .tau_grid()
        .par_iter()
        .map(|&tau| -> anyhow::Result<Vec<Cell>> {
            let p = single_step_probability(&field, level, &target, tau, &transform)?;
            Ok(vec![
                Cell::Num(tau),
                Cell::Text(initial.clone()),
                Cell::Int(n as i64),
                Cell::Num(probability(p, "probability")?),
            ])
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(table)
}

/// One row: success probability, Bell overlaps, optional target overlap and
/// the coefficients `c_k` of `|N-k, k>` in the final state.
pub fn cmd_conditional(config: &RunConfig) -> anyhow::Result<Table> {
    let taus = config.sequence_taus(config.n())?;
    let n = match (&config.n_photons, &config.taus) {
        (Some(np), Some(t)) if matches!(t.value, TauSpec::List(_)) && taus.len() != np.value as usize => {
            return Err(t.fail(format!("{} interaction times given for n_photons = {}", taus.len(), np.value)));
        }
        _ if taus.is_empty() => bail!("the conditional sequence needs at least one step"),
        _ => taus.len() as u32,
    };
    if let Some(c) = &config.coefficients {
        if c.value.len() != n as usize + 1 {
            return Err(c.fail(format!("target has {} coefficients but the sequence makes {n} photons", c.value.len())));
        }
    }
    let couplings = &config.couplings;
    let success = conditional_success_probability(&taus);
    let overlap = |sign| -> anyhow::Result<f64> {
        let p = conditional_overlap(&Target::Bell(BellTarget::new(n, sign)?), n, couplings)?;
        probability(p, "Bell overlap")
    };
    let state = conditional_state(n, couplings)?;

    let mut header: Vec<String> = ["n_photons", "success_probability", "bell_plus_overlap", "bell_minus_overlap", "target_overlap"]
        .map(String::from)
        .to_vec();
    let mut row = vec![
        Cell::Int(n as i64),
        Cell::Num(probability(success, "success probability")?),
        Cell::Num(overlap(BellSign::Plus)?),
        Cell::Num(overlap(BellSign::Minus)?),
        match config.general_target() {
            Some(t) => Cell::Num(probability(conditional_overlap(&Target::General(t), n, couplings)?, "target overlap")?),
            None => Cell::Empty,
        },
    ];
    for k in 0..=n {
        let c = state.amplitude(ModeFockLabel::new(n - k, k));
        header.push(format!("c{k}_re"));
        header.push(format!("c{k}_im"));
        row.push(Cell::Num(c.re));
        row.push(Cell::Num(c.im));
    }
    Ok(Table {
        header,
        rows: vec![row],
    })
}

/// Rows over `2j = 0..=n`: the weight `p_j` and the probabilities of the
/// `2j`-photon Bell states (and of the configured target at `2j = N`).
pub fn cmd_nonconditional(config: &RunConfig) -> anyhow::Result<Table> {
    let n = config.n();
    let taus = config.sequence_taus(n)?;
    if taus.len() < n as usize {
        let origin = config.taus.as_ref().map_or(Origin::Default, |p| p.origin.clone());
        bail!("{origin}: {} steps cannot produce a {n}-photon state", taus.len());
    }
    let weights = nonconditional_weights(&taus)?;
    let sum = weights.sum();
    if (sum - 1.0).abs() > 1e-12 {
        bail!("weights sum to {sum}");
    }
    let couplings = &config.couplings;
    let target = config.general_target();
    let mut table = Table::new(["steps", "twice_j", "weight", "p_bell_plus", "p_bell_minus", "p_target"]);
    for (k, &w) in weights.weights().iter().enumerate() {
        let k = k as u32;
        let bell = |sign| -> anyhow::Result<Cell> {
            if k == 0 {
                return Ok(Cell::Empty);
            }
            let ov = conditional_overlap(&Target::Bell(BellTarget::new(k, sign)?), k, couplings)?;
            Ok(Cell::Num(probability(ov * w, "Bell probability")?))
        };
        let p_target = match &target {
            Some(t) if t.n() == k => {
                Cell::Num(probability(conditional_overlap(&Target::General(t.clone()), k, couplings)? * w, "target probability")?)
            }
            _ => Cell::Empty,
        };
        table.rows.push(vec![
            Cell::Int(taus.len() as i64),
            Cell::Int(k as i64),
            Cell::Num(probability(w, "weight")?),
            bell(BellSign::Plus)?,
            bell(BellSign::Minus)?,
            p_target,
        ]);
    }
    Ok(table)
}

/// Batch crosscheck summary and whether it passed.
pub fn cmd_oracle(config: &RunConfig) -> anyhow::Result<(Table, bool)> {
    let draws = match &config.draws {
        Some(d) if d.value == 0 => return Err(d.fail("draws must be at least 1")),
        Some(d) => d.value,
        None => DEFAULT_DRAWS,
    };
    let cutoff = match &config.cutoff {
        Some(c) if c.value == 0 => return Err(c.fail("cutoff must be at least 1")),
        Some(c) => c.value,
        None => DEFAULT_ORACLE_CUTOFF,
    };
    let report = crosscheck_batch(draws, config.seed, cutoff)?;
    let w = &report.worst;
    let mut table = Table::new([
        "draws",
        "cutoff",
        "seed",
        "max_deviation",
        "passed",
        "worst_index",
        "worst_kind",
        "worst_initial",
        "worst_tau",
        "worst_g1_mag",
        "worst_g1_phase",
        "worst_g2_mag",
        "worst_g2_phase",
    ]);
    let kind = serde_json::to_value(w.kind)?.as_str().unwrap_or_default().to_string();
    table.rows.push(vec![
        Cell::Int(draws as i64),
        Cell::Int(cutoff as i64),
        Cell::Int(config.seed as i64),
        Cell::Num(report.max_deviation),
        Cell::Text(report.passed().to_string()),
        Cell::Int(w.index as i64),
        Cell::Text(kind),
        w.initial.clone().map_or(Cell::Empty, Cell::Text),
        Cell::Num(w.tau),
        Cell::Num(w.g1_mag),
        Cell::Num(w.g1_phase),
        Cell::Num(w.g2_mag),
        Cell::Num(w.g2_phase),
    ]);
    Ok((table, report.passed()))
}

/// Rendered output of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub text: String,
    pub out: Option<PathBuf>,
    /// False when the oracle batch exceeded its tolerance.
    pub passed: bool,
}

pub fn execute(cli: &Cli) -> anyhow::Result<Outcome> {
    let (flags, default_format) = match &cli.command {
        Command::Figure1(f) | Command::Single(f) => (f, Format::Csv),
        Command::Conditional(f) | Command::Nonconditional(f) | Command::Oracle(f) => (f, Format::Records),
    };
    let config = RunConfig::resolve(flags)?;
    let (table, passed) = match &cli.command {
        Command::Figure1(_) => (figure1_rows(&config.tau_grid())?, true),
        Command::Single(_) => (cmd_single(&config)?, true),
        Command::Conditional(_) => (cmd_conditional(&config)?, true),
        Command::Nonconditional(_) => (cmd_nonconditional(&config)?, true),
        Command::Oracle(_) => cmd_oracle(&config)?,
    };
    let text = match config.format.unwrap_or(default_format) {
        Format::Csv => render_csv(&table)?,
        Format::Records => render_records(&table)?,
    };
    Ok(Outcome {
        text,
        out: config.out,
        passed,
    })
}

/// Parses `std::env::args`, runs, writes output. Exit status 0 on success,
/// 1 when the oracle tolerance is exceeded, 2 on errors.
pub fn run() -> std::process::ExitCode {
    let cli = Cli::parse();
    match execute(&cli).and_then(|o| {
        match &o.out {
            Some(path) => std::fs::write(path, &o.text).with_context(|| format!("writing {}", path.display()))?,
            None => print!("{}", o.text),
        }
        Ok(o.passed)
    }) {
        Ok(true) => std::process::ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: oracle deviation exceeds tolerance");
            std::process::ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("twomode-jc").chain(args.iter().copied())).unwrap()
    }

    fn flags(args: &[&str]) -> Flags {
        match parse(&[&["single"], args].concat()).command {
            Command::Single(f) => f,
            _ => unreachable!(),
        }
    }

    fn num(table: &Table, row: usize, col: &str) -> f64 {
        match &table.rows[row][table.column(col).unwrap()] {
            Cell::Num(x) => *x,
            other => panic!("{other:?}"),
        }
    }

    fn write_config(name: &str, body: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("twomode-jc-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        std::fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn sci_format() {
        assert_eq!(format_sci(1.0), "1.000000000000e+00");
        assert_eq!(format_sci(0.0), "0.000000000000e+00");
        assert_eq!(format_sci(-2.5e-7), "-2.500000000000e-07");
        assert_eq!(format_sci(1.5e123), "1.500000000000e+123");
        assert_eq!(format_sci(f64::NAN), "nan");
    }

    #[test]
    fn initial_labels() {
        assert_eq!(parse_initial("e;1,0"), Some((AtomLevel::Excited, ModeFockLabel::new(1, 0))));
        assert_eq!(parse_initial(" g; 0 , 2 "), Some((AtomLevel::Ground, ModeFockLabel::new(0, 2))));
        assert_eq!(parse_initial("x;1,0"), None);
        assert_eq!(parse_initial("e;1"), None);
        assert_eq!(format_initial(AtomLevel::Ground, ModeFockLabel::new(1, 1)), "g;1,1");
    }

    #[test]
    fn figure1_table() {
        let t = cmd_figure1(PI, 3).unwrap();
        assert_eq!(t.rows.len(), 24);
        let row = t
            .rows
            .iter()
            .position(|r| r[1] == Cell::Text("e;0,0".into()) && r[0] == Cell::Num(FRAC_PI_2))
            .unwrap();
        assert!((num(&t, row, "p_plus") - 1.0).abs() < 1e-12);
        assert!(num(&t, row, "p_minus").abs() < 1e-12);
        for r in 0..t.rows.len() {
            for c in ["p_plus", "p_minus"] {
                assert!((0.0..=1.0).contains(&num(&t, r, c)));
            }
        }
        let states: std::collections::BTreeSet<_> = t
            .rows
            .iter()
            .map(|r| match &r[1] {
                Cell::Text(s) => s.clone(),
                other => panic!("{other:?}"),
            })
            .collect();
        assert_eq!(states.len(), 8);
        assert!(!states.contains("g;0,0"));
        assert!(cmd_figure1(1.0, 1).is_err());

        let csv = render_csv(&t).unwrap();
        assert!(csv.starts_with("tau,initial_state,p_plus,p_minus\n"));
        assert!(!csv.contains('\r'));
        assert!(csv.contains("\"e;0,0\""));
    }

    #[test]
    fn conditional_records() {
        let cfg = RunConfig::resolve(&flags(&["--n-photons", "1", "--tau-list", &FRAC_PI_2.to_string()])).unwrap();
        let t = cmd_conditional(&cfg).unwrap();
        assert!((num(&t, 0, "success_probability") - 1.0).abs() < 1e-12);
        assert!((num(&t, 0, "c0_re") - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((num(&t, 0, "c1_re") - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);

        let cfg = RunConfig::resolve(&flags(&["--n-photons", "2"])).unwrap();
        let t = cmd_conditional(&cfg).unwrap();
        assert!((num(&t, 0, "bell_plus_overlap") - 0.5).abs() < 1e-12);
        assert!((num(&t, 0, "success_probability") - 1.0).abs() < 1e-12);
        let line = render_records(&t).unwrap();
        let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
        assert_eq!(v["n_photons"], 2);
        assert!(v["target_overlap"].is_null());

        // no mode-two coupling leaves |N,0>
        let cfg = RunConfig::resolve(&flags(&["--n-photons", "3", "--g2-mag", "0"])).unwrap();
        let t = cmd_conditional(&cfg).unwrap();
        assert!((num(&t, 0, "c0_re").hypot(num(&t, 0, "c0_im")) - 1.0).abs() < 1e-12);
        for k in 1..=3 {
            assert!(num(&t, 0, &format!("c{k}_re")).abs() < 1e-12);
        }

        let cfg = RunConfig::resolve(&flags(&["--n-photons", "2", "--tau-list", "0.1"])).unwrap();
        assert!(cmd_conditional(&cfg).unwrap_err().to_string().starts_with("--tau-list"));
    }

    #[test]
    fn nonconditional_records() {
        let cfg = RunConfig::resolve(&flags(&["--n-photons", "3"])).unwrap();
        let t = cmd_nonconditional(&cfg).unwrap();
        assert_eq!(t.rows.len(), 4);
        assert!((num(&t, 3, "weight") - 1.0).abs() < 1e-12);
        for r in 0..3 {
            assert!(num(&t, r, "weight").abs() < 1e-12);
        }

        let (t1, t2): (f64, f64) = (0.4, 1.9);
        let cfg = RunConfig::resolve(&flags(&["--n-photons", "1", "--tau-list", "0.4,1.9"])).unwrap();
        let t = cmd_nonconditional(&cfg).unwrap();
        let r2 = 2f64.sqrt();
        let expected = [
            t1.cos().powi(2) * t2.cos().powi(2),
            t1.cos().powi(2) * t2.sin().powi(2) + t1.sin().powi(2) * (t2 * r2).cos().powi(2),
            t1.sin().powi(2) * (t2 * r2).sin().powi(2),
        ];
        let mut sum = 0.0;
        for (r, e) in expected.iter().enumerate() {
            assert!((num(&t, r, "weight") - e).abs() < 1e-13);
            sum += num(&t, r, "weight");
        }
        assert!((sum - 1.0).abs() < 1e-12);

        let cfg = RunConfig::resolve(&flags(&["--n-photons", "3", "--tau-list", "0.1,0.2"])).unwrap();
        assert!(cmd_nonconditional(&cfg).is_err());
    }

    #[test]
    fn single_sweep() {
        let cfg = RunConfig::resolve(&flags(&["--tau-max", "3", "--steps", "31"])).unwrap();
        let t = cmd_single(&cfg).unwrap();
        assert_eq!(t.rows.len(), 31);
        for r in 0..31 {
            let tau = num(&t, r, "tau");
            assert!((num(&t, r, "probability") - tau.sin().powi(2)).abs() < 1e-12);
        }
        let cfg = RunConfig::resolve(&flags(&["--n-photons", "2", "--cutoff", "2"])).unwrap();
        assert!(cmd_single(&cfg).unwrap_err().to_string().starts_with("--cutoff"));
    }

    #[test]
    fn oracle_command() {
        let cfg = RunConfig::resolve(&flags(&["--draws", "8", "--seed", "3"])).unwrap();
        let (t, ok) = cmd_oracle(&cfg).unwrap();
        assert!(ok);
        assert!(num(&t, 0, "max_deviation") <= 1e-9);
        let cfg = RunConfig::resolve(&flags(&["--draws", "40", "--cutoff", "1"])).unwrap();
        assert!(!cmd_oracle(&cfg).unwrap().1);
        let cfg = RunConfig::resolve(&flags(&["--draws", "0"])).unwrap();
        assert!(cmd_oracle(&cfg).is_err());
    }

    #[test]
    fn config_file_and_overrides() {
        let path = write_config("ok.toml", "g1_mag = 1.0\ng2_mag = 0.5\nn_photons = 2\ntau_list = [0.3, 0.7]\nseed = 4\n");
        let p = path.to_str().unwrap();
        let cfg = RunConfig::resolve(&flags(&["--config", p, "--seed", "9"])).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.n_photons.as_ref().unwrap().origin, Origin::File { path: path.clone(), line: 3 });
        assert!((cfg.couplings.gamma2().norm() - 0.5 / 1.25f64.sqrt()).abs() < 1e-15);
        assert_eq!(cfg.taus.unwrap().value, TauSpec::List(vec![0.3, 0.7]));

        let bad = write_config("bad.toml", "g1_mag = 1.0\n\ntau_max = -2.0\n");
        let err = RunConfig::resolve(&flags(&["--config", bad.to_str().unwrap()])).unwrap_err().to_string();
        assert!(err.contains("bad.toml:3"), "{err}");

        let unknown = write_config("unknown.toml", "g1_mag = 1.0\nbogus = 3\n");
        let err = RunConfig::resolve(&flags(&["--config", unknown.to_str().unwrap()])).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");

        let zero = write_config("zero.toml", "g1_mag = 0.0\ng2_mag = 0.0\n");
        assert!(RunConfig::resolve(&flags(&["--config", zero.to_str().unwrap()])).is_err());

        let coeffs = write_config(
            "coeffs.toml",
            "n_photons = 1\ncoefficients = [[0.6, 0.0], [0.0, 0.8]]\n",
        );
        let cfg = RunConfig::resolve(&flags(&["--config", coeffs.to_str().unwrap()])).unwrap();
        assert!(matches!(cfg.target(1).unwrap(), Target::General(_)));
        let unnorm = write_config("unnorm.toml", "\ncoefficients = [[0.6, 0.0], [0.0, 0.9]]\n");
        let err = RunConfig::resolve(&flags(&["--config", unnorm.to_str().unwrap()])).unwrap_err().to_string();
        assert!(err.contains("unnorm.toml:2"), "{err}");
    }

    #[test]
    fn flag_validation() {
        assert!(RunConfig::resolve(&flags(&["--tau", "nan"])).is_err());
        assert!(RunConfig::resolve(&flags(&["--tau", "1", "--tau-list", "1,2"])).is_err());
        assert!(RunConfig::resolve(&flags(&["--steps", "1"])).is_err());
        assert!(RunConfig::resolve(&flags(&["--n-photons", "0"])).is_err());
        let err = RunConfig::resolve(&flags(&["--initial", "q;1,1"])).unwrap_err().to_string();
        assert!(err.starts_with("--initial"), "{err}");
        assert!(RunConfig::resolve(&flags(&["--g1-phase", "-1.5"])).is_ok());
    }

    #[test]
    fn execute_formats() {
        let o = execute(&parse(&["figure1", "--steps", "2", "--tau-max", "1", "--format", "records"])).unwrap();
        assert_eq!(o.text.lines().count(), 16);
        assert!(o.passed);
        let o = execute(&parse(&["nonconditional", "--n-photons", "2", "--format", "csv"])).unwrap();
        assert!(o.text.starts_with("steps,twice_j,weight,p_bell_plus,p_bell_minus,p_target\n"));
    }
}
