//! Experiment descriptions and their execution.
//!
//! An [`ExperimentSpec`] is what `blab run --config` reads; the direct
//! subcommands build one from their flags and go through the same path.

use std::path::{Path, PathBuf};

use blab_core::bellman::{concavity_scan, omega_p, OMEGA_TOL};
use blab_core::extremal::{
    localization_report, search_extremal, slack_audit, validate_report,
};
use blab_core::{bellman_value, BellmanParams, SearchConfig, SearchReport, TreeSpec};
use serde::{Deserialize, Serialize};

use crate::artifact::{Artifact, Format, Table};
use crate::error::{CliError, CliResult};
use crate::fuzz::{fuzz_weak_type, Generator};
use crate::trend::{localization_trend, trace_table};

/// Smallest exponent the runner accepts; `[1, p/(p−1)]` grows without bound
/// as `p → 1`.
pub const MIN_P: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    BellmanEval,
    ConcavityScan,
    WeakTypeFuzz,
    ExtremalSearch,
    ExtremalAudit,
    LocalizationTrend,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    /// Falls back to `params.p`.
    #[serde(default)]
    pub p: Option<f64>,
    pub tmin: f64,
    pub tmax: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FuzzSpec {
    pub count: usize,
    pub seed: u64,
    pub lambdas: usize,
    #[serde(flatten)]
    pub generator: Generator,
}

impl Default for FuzzSpec {
    fn default() -> Self {
        FuzzSpec { count: 1000, seed: 0, lambdas: 32, generator: Generator::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: Kind,
    #[serde(default)]
    pub params: Option<BellmanParams>,
    #[serde(default)]
    pub tree_spec: Option<TreeSpec>,
    #[serde(default)]
    pub search: Option<SearchConfig>,
    #[serde(default)]
    pub output: OutputSpec,
    /// Accepted residual for `ω_p` in `bellman-eval`.
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub scan: Option<ScanSpec>,
    #[serde(default)]
    pub fuzz: Option<FuzzSpec>,
    /// A saved search report, for audits and trends.
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub levels: Option<Vec<usize>>,
}

impl ExperimentSpec {
    pub fn new(kind: Kind) -> Self {
        ExperimentSpec {
            kind,
            params: None,
            tree_spec: None,
            search: None,
            output: OutputSpec::default(),
            tol: None,
            scan: None,
            fuzz: None,
            input: None,
            levels: None,
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.to_path_buf(), source })
    }

    /// Applies `--seed` to whichever random component the kind uses.
    pub fn override_seed(&mut self, seed: u64) {
        match self.kind {
            Kind::WeakTypeFuzz => self.fuzz.get_or_insert_with(FuzzSpec::default).seed = seed,
            _ => self.search.get_or_insert_with(SearchConfig::default).seed = seed,
        }
    }

    fn params(&self) -> CliResult<BellmanParams> {
        let params = self
            .params
            .ok_or_else(|| CliError::usage(format!("{:?} needs params {{p, f, F}}", self.kind)))?;
        check_p(params.p)?;
        params.validate()?;
        Ok(params)
    }

    fn scan_p(&self) -> CliResult<(ScanSpec, f64)> {
        let scan = self
            .scan
            .ok_or_else(|| CliError::usage("concavity-scan needs scan {tmin, tmax, n}"))?;
        let p = scan
            .p
            .or(self.params.map(|p| p.p))
            .ok_or_else(|| CliError::usage("concavity-scan needs an exponent p"))?;
        check_p(p)?;
        Ok((scan, p))
    }

    fn require_input(&self) -> CliResult<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| CliError::usage(format!("{:?} needs an input report", self.kind)))
    }

    /// The search configuration, with depth and arity taken from a uniform
    /// `tree_spec` when one is given.
    fn search_config(&self) -> CliResult<SearchConfig> {
        let mut config = self.search.clone().unwrap_or_default();
        match &self.tree_spec {
            None => {}
            Some(TreeSpec::Uniform { arity, depth }) => {
                config.arity = *arity;
                config.depth = *depth;
            }
            Some(TreeSpec::Custom(_)) => {
                return Err(CliError::usage("extremal search runs on uniform trees only"))
            }
        }
        config.validate()?;
        Ok(config)
    }

    /// Kind-specific required fields and feasibility, before anything runs.
    pub fn validate(&self) -> CliResult<()> {
        match self.kind {
            Kind::BellmanEval => {
                self.params()?;
                if let Some(tol) = self.tol {
                    if !(tol > 0.0) {
                        return Err(CliError::usage("tol must be positive"));
                    }
                }
            }
            Kind::ConcavityScan => {
                self.scan_p()?;
            }
            Kind::WeakTypeFuzz => {
                self.fuzz.unwrap_or_default().generator.validate()?;
            }
            Kind::ExtremalSearch => {
                self.params()?;
                self.search_config()?;
            }
            Kind::ExtremalAudit => {
                self.require_input()?;
            }
            Kind::LocalizationTrend => {
                if self.input.is_none() {
                    self.params()?;
                    self.search_config()?;
                }
            }
        }
        Ok(())
    }
}

fn check_p(p: f64) -> CliResult<()> {
    if p >= MIN_P && p.is_finite() {
        Ok(())
    } else {
        Err(CliError::usage(format!("p = {p} must be at least {MIN_P}")))
    }
}

pub fn read_report(path: &Path) -> CliResult<SearchReport> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_slice(&bytes).map_err(|source| CliError::Json { path: path.to_path_buf(), source })
}

/// What a run produced, plus any invariant it found broken along the way.
#[derive(Debug)]
pub struct Outcome {
    pub artifact: Artifact,
    pub violation: Option<String>,
}

impl From<Artifact> for Outcome {
    fn from(artifact: Artifact) -> Self {
        Outcome { artifact, violation: None }
    }
}

pub fn execute(spec: &ExperimentSpec) -> CliResult<Outcome> {
    spec.validate()?;
    match spec.kind {
        Kind::BellmanEval => bellman_eval(spec),
        Kind::ConcavityScan => {
            let (scan, p) = spec.scan_p()?;
            let mut t = Table::new(vec!["t", "G", "second_diff"]);
            for pt in concavity_scan(p, scan.tmin, scan.tmax, scan.n)? {
                t.push(vec![pt.t.into(), pt.g.into(), pt.second_diff.into()]);
            }
            Ok(Artifact::Rows(t).into())
        }
        Kind::WeakTypeFuzz => weak_type(spec),
        Kind::ExtremalSearch => {
            let (_, report) = search_extremal(&spec.params()?, &spec.search_config()?)?;
            Ok(Artifact::Report(Box::new(report)).into())
        }
        Kind::ExtremalAudit => audit(spec),
        Kind::LocalizationTrend => {
            let report = match &spec.input {
                Some(path) => {
                    let report = read_report(path)?;
                    validate_report(&report)?;
                    report
                }
                None => search_extremal(&spec.params()?, &spec.search_config()?)?.1,
            };
            let summary = localization_trend(&report)?;
            let artifact = match spec.output.format {
                Some(Format::Csv) => Artifact::Rows(trace_table(&report, summary.threshold)),
                _ => Artifact::Record(summary.record()),
            };
            Ok(artifact.into())
        }
    }
}

fn bellman_eval(spec: &ExperimentSpec) -> CliResult<Outcome> {
    let params = spec.params()?;
    let tol = spec.tol.unwrap_or(OMEGA_TOL);
    let ratio = params.ratio();
    let omega = omega_p(params.p, ratio, tol)?;
    let s_p = bellman_value(&params)?;
    let mut t = Table::new(vec!["s_p", "omega", "ratio", "residual"]);
    t.push(vec![s_p.into(), omega.value.into(), ratio.into(), omega.residual.into()]);
    Ok(Artifact::Record(t).into())
}

fn weak_type(spec: &ExperimentSpec) -> CliResult<Outcome> {
    let fuzz = spec.fuzz.unwrap_or_default();
    let tree = spec.tree_spec.clone().unwrap_or(TreeSpec::Uniform { arity: 2, depth: 6 });
    let out = fuzz_weak_type(&tree, fuzz.count, fuzz.seed, fuzz.lambdas, &fuzz.generator)?;
    let mut t = Table::new(vec![
        "count",
        "lambdas",
        "violations",
        "worst_ratio",
        "worst_case",
        "worst_lambda",
        "spike_ratio",
    ]);
    t.push(vec![
        out.count.into(),
        out.lambdas.into(),
        out.violations.into(),
        out.worst_ratio.into(),
        out.worst_case.into(),
        out.worst_lambda.into(),
        out.spike_ratio.into(),
    ]);
    let violation = (out.violations > 0)
        .then(|| format!("{} weak-type violations in {} cases", out.violations, out.count));
    Ok(Outcome { artifact: Artifact::Record(t), violation })
}

fn audit(spec: &ExperimentSpec) -> CliResult<Outcome> {
    let report = read_report(spec.require_input()?)?;
    let candidate = validate_report(&report)?;
    let levels = spec.levels.clone().unwrap_or_else(|| vec![1]);
    let params = report.params;
    let loc = localization_report(&candidate.phi, &params, &levels)?;
    let slack = slack_audit(&candidate.phi, params.p, &levels)?;
    let mut t = Table::new(vec![
        "node_id",
        "level",
        "mass",
        "avg_phi",
        "avg_phip",
        "avg_maxenergy",
        "dev_f",
        "dev_F",
        "dev_S",
        "delta_slack",
    ]);
    for (e, s) in loc.entries.iter().zip(&slack) {
        debug_assert_eq!(e.node, s.node);
        t.push(vec![
            e.node.0.into(),
            e.level.into(),
            e.mass.into(),
            e.avg_phi.into(),
            e.avg_phip.into(),
            e.avg_maxenergy.into(),
            e.dev_f.into(),
            e.dev_big_f.into(),
            e.dev_s.into(),
            s.delta.into(),
        ]);
    }
    Ok(Artifact::Rows(t).into())
}
