//! Experiment configuration: TOML schema, defaults, overrides and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scorepost::mcmc::{Proposal, TransformSpec};
use scorepost::simulators::{ContaminationSpec, OutlierSource};
use scorepost::tuning::{ReferenceScore, DEFAULT_BANDWIDTH_DRAWS, DEFAULT_W_PAIRS};
use scorepost::{ChainConfig, ModelKind, ScoringRuleConfig, Simulator};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub model: ModelSection,
    pub data: DataSection,
    pub scoring: ScoringRuleConfig,
    #[serde(default)]
    pub chain: ChainSection,
    #[serde(default)]
    pub tuning: TuningSection,
    #[serde(default)]
    pub predictive: PredictiveSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
}

/// Where observations come from: generated at `theta_star`, or read from CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_star: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outliers: Option<OutlierSource>,
    /// One observation per row, no header unless `csv_header` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub csv_header: bool,
}

fn default_steps() -> usize {
    110_000
}
fn default_burn_in() -> usize {
    10_000
}
fn default_thinning() -> usize {
    10
}
fn default_m() -> usize {
    500
}
fn default_groups() -> usize {
    500
}
fn default_proposal_sd() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    /// Learning rate; tuned from the data when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<f64>,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_groups")]
    pub groups: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_thinning")]
    pub thinning: usize,
    /// Isotropic proposal scale, used when `proposal` is absent.
    #[serde(default = "default_proposal_sd")]
    pub proposal_sd: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal: Option<Proposal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
}

impl Default for ChainSection {
    fn default() -> Self {
        Self {
            w: None,
            m: default_m(),
            groups: default_groups(),
            steps: default_steps(),
            burn_in: default_burn_in(),
            thinning: default_thinning(),
            proposal_sd: default_proposal_sd(),
            proposal: None,
            transform: None,
            start: None,
        }
    }
}

fn default_pairs() -> usize {
    DEFAULT_W_PAIRS
}
fn default_bandwidth_draws() -> usize {
    DEFAULT_BANDWIDTH_DRAWS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningSection {
    #[serde(default = "default_pairs")]
    pub n_pairs: usize,
    /// Simulations per parameter; defaults to `chain.m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default)]
    pub reference: ReferenceScore,
    /// Simulations per prior draw for the bandwidth; defaults to `chain.m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_gamma: Option<usize>,
    #[serde(default = "default_bandwidth_draws")]
    pub m_theta_gamma: usize,
}

impl Default for TuningSection {
    fn default() -> Self {
        Self {
            n_pairs: default_pairs(),
            m: None,
            reference: ReferenceScore::default(),
            m_gamma: None,
            m_theta_gamma: default_bandwidth_draws(),
        }
    }
}

fn default_draws() -> usize {
    scorepost::diagnostics::DEFAULT_PREDICTIVE_DRAWS
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictiveSection {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_draws")]
    pub n_draws: usize,
    /// Kernel bandwidth for the kernel score; taken from a kernel scoring
    /// rule, else estimated, when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Trace to check; defaults to `trace.csv` in the output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    /// Second trace for per-timestep score differences (models with raw series).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_trace: Option<PathBuf>,
}

impl Default for PredictiveSection {
    fn default() -> Self {
        Self {
            enabled: true,
            n_draws: default_draws(),
            gamma: None,
            trace: None,
            compare_trace: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Dataset sizes; each run uses the first `n` observations.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n: Vec<usize>,
    /// Simulation counts.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub m: Vec<usize>,
    /// Group count for the m-sweep; `chain.groups` when it divides m, else m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<usize>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_out() }
    }
}

/// Set `path` (dot separated) in a TOML table. Values are parsed as TOML,
/// falling back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::validation(format!("override `{assignment}` is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::validation(format!("override key `{path}` is malformed")));
    }
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("just parsed"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let (last, parents) = keys.split_last().expect("non-empty");
    let mut cur = table;
    for k in parents {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::validation(format!("override `{path}`: `{k}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table = text.parse().map_err(CliError::validation)?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = table.try_into().map_err(CliError::validation)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }

    pub fn model(&self) -> Box<dyn Simulator> {
        self.model.kind.build()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let model = self.model();
        let p = model.theta_dim();
        let bad = |field: &str, reason: String| Err(CliError::validation(format!("`{field}`: {reason}")));

        match (&self.data.csv, &self.data.theta_star) {
            (None, None) => return bad("data", "need either `theta_star` or `csv`".into()),
            (Some(_), Some(_)) => return bad("data", "`theta_star` and `csv` are mutually exclusive".into()),
            _ => {}
        }
        if let Some(theta) = &self.data.theta_star {
            if theta.len() != p {
                return bad("data.theta_star", format!("expected {p} values, got {}", theta.len()));
            }
            if !model.prior().in_support(theta) {
                return bad("data.theta_star", "outside the prior support".into());
            }
            match self.data.n {
                None | Some(0) => return bad("data.n", "number of observations must be at least 1".into()),
                _ => {}
            }
            self.contamination()
                .expect("theta_star present")
                .validate()
                .map_err(CliError::validation)?;
            if self.data.epsilon > 0.0 && self.data.outliers.is_none() {
                return bad("data.outliers", "required when epsilon > 0".into());
            }
        }
        if let Some(w) = self.chain.w {
            if !(w.is_finite() && w > 0.0) {
                return bad("chain.w", format!("learning rate must be positive, got {w}"));
            }
        }
        self.chain_config(self.chain.w.unwrap_or(1.0), self.chain.m, self.chain.groups)
            .validate()
            .map_err(CliError::validation)?;
        if let Some(start) = &self.chain.start {
            if start.len() != p || !model.prior().in_support(start) {
                return bad("chain.start", "must be a point inside the prior support".into());
            }
        }
        if self.tuning.n_pairs == 0 {
            return bad("tuning.n_pairs", "must be at least 1".into());
        }
        if self.tuning.m.is_some_and(|m| m < 2) {
            return bad("tuning.m", "must be at least 2".into());
        }
        if self.tuning.m_gamma.is_some_and(|m| m < 2) {
            return bad("tuning.m_gamma", "must be at least 2".into());
        }
        if self.tuning.m_theta_gamma == 0 {
            return bad("tuning.m_theta_gamma", "must be at least 1".into());
        }
        self.tuning.reference.scoring.validate().map_err(CliError::validation)?;
        if !(self.tuning.reference.weight.is_finite() && self.tuning.reference.weight > 0.0) {
            return bad("tuning.reference.weight", "must be positive".into());
        }
        if self.predictive.n_draws == 0 {
            return bad("predictive.n_draws", "must be at least 1".into());
        }
        if let Some(g) = self.predictive.gamma {
            if !(g.is_finite() && g > 0.0) {
                return bad("predictive.gamma", format!("must be positive, got {g}"));
            }
        }
        if let Some(n_max) = self.data.n {
            if let Some(n) = self.sweep.n.iter().find(|&&n| n == 0 || n > n_max) {
                return bad("sweep.n", format!("{n} is outside 1..={n_max}"));
            }
        }
        for &m in &self.sweep.m {
            let g = self.sweep_groups(m);
            self.chain_config(1.0, m, g)
                .validate()
                .map_err(|e| CliError::validation(format!("`sweep.m` = {m}: {e}")))?;
        }
        Ok(())
    }

    pub fn contamination(&self) -> Option<ContaminationSpec> {
        let theta_star = self.data.theta_star.clone()?;
        Some(ContaminationSpec {
            theta_star,
            outlier_source: self.data.outliers.clone().unwrap_or(OutlierSource::Cauchy),
            epsilon: self.data.epsilon,
            n: self.data.n.unwrap_or(0),
        })
    }

    pub fn sweep_groups(&self, m: usize) -> usize {
        match self.sweep.groups {
            Some(g) => g,
            None if m % self.chain.groups == 0 => self.chain.groups,
            None => m,
        }
    }

    /// The sampler configuration for a given learning rate, m and G.
    pub fn chain_config(&self, w: f64, m: usize, groups: usize) -> ChainConfig {
        let p = self.model().theta_dim();
        ChainConfig {
            steps: self.chain.steps,
            burn_in: self.chain.burn_in,
            thinning: self.chain.thinning,
            w,
            m,
            groups,
            proposal: self
                .chain
                .proposal
                .clone()
                .unwrap_or_else(|| Proposal::isotropic(self.chain.proposal_sd, p)),
            transform: self.chain.transform.clone(),
            scoring: self.scoring,
            master_seed: 0,
            start: self.chain.start.clone(),
        }
    }

    /// Data paths in the config are resolved relative to the config file.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.data.csv.as_mut() {
            fix(p);
        }
        if let Some(p) = self.predictive.trace.as_mut() {
            fix(p);
        }
        if let Some(p) = self.predictive.compare_trace.as_mut() {
            fix(p);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
master_seed = 7
[model]
kind = "gk-univariate"
[data]
theta_star = [3.0, 1.5, 0.5, 1.5]
n = 10
[scoring]
kind = "energy"
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL, &[]).unwrap();
        assert_eq!(cfg.chain.m, 500);
        assert_eq!(cfg.chain.groups, 500);
        assert_eq!(cfg.chain.steps, 110_000);
        assert_eq!(cfg.chain.burn_in, 10_000);
        assert_eq!(cfg.chain.thinning, 10);
        assert_eq!(cfg.tuning.n_pairs, 100);
        assert_eq!(cfg.tuning.m_theta_gamma, 1000);
        assert_eq!(cfg.predictive.n_draws, 1000);
        assert_eq!(cfg.scoring, ScoringRuleConfig::energy());
    }

    #[test]
    fn nonpositive_w_rejected() {
        for w in ["0.0", "-1.0"] {
            let err = ExperimentConfig::from_toml_str(MINIMAL, &[format!("chain.w={w}")]).unwrap_err();
            assert!(matches!(err, CliError::Validation(ref m) if m.contains("chain.w")), "{err}");
        }
    }

    #[test]
    fn groups_must_divide_m() {
        let err = ExperimentConfig::from_toml_str(MINIMAL, &["chain.groups=7".into()]).unwrap_err();
        assert!(err.to_string().contains("G must divide m"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = ExperimentConfig::from_toml_str(MINIMAL, &["chain.bogus=1".into()]).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let text = MINIMAL.replace("[model]", "[model]\nflavour = 1");
        assert!(ExperimentConfig::from_toml_str(&text, &[]).is_err());
    }

    #[test]
    fn unknown_model_rejected() {
        let text = MINIMAL.replace("gk-univariate", "no-such-model");
        assert!(matches!(ExperimentConfig::from_toml_str(&text, &[]), Err(CliError::Validation(_))));
    }

    #[test]
    fn theta_star_checked() {
        assert!(ExperimentConfig::from_toml_str(MINIMAL, &["data.theta_star=[1.0]".into()]).is_err());
        assert!(ExperimentConfig::from_toml_str(MINIMAL, &["data.theta_star=[5.0, 1.0, 1.0, 1.0]".into()]).is_err());
        assert!(ExperimentConfig::from_toml_str(MINIMAL, &["data.epsilon=0.1".into()]).is_err());
    }

    #[test]
    fn overrides_create_and_replace() {
        let cfg = ExperimentConfig::from_toml_str(
            MINIMAL,
            &[
                "chain.m=100".into(),
                "chain.groups=50".into(),
                "output.dir=results".into(),
                "scoring.kind=\"kernel\"".into(),
                "scoring.gamma=5.5".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.chain.m, 100);
        assert_eq!(cfg.output.dir, PathBuf::from("results"));
        assert_eq!(cfg.scoring, ScoringRuleConfig::kernel(5.5));
        assert!(apply_override(&mut toml::Table::new(), "novalue").is_err());
        assert!(apply_override(&mut toml::Table::new(), "a..b=1").is_err());
    }

    #[test]
    fn echo_is_a_fixed_point() {
        let text = r#"
master_seed = 3
[model]
kind = "normal-location"
[data]
theta_star = [1.0]
n = 100
epsilon = 0.1
outliers = { kind = "normal-location", z = 10.0 }
[scoring]
kind = "semi-bsl"
bandwidth = { fixed = 0.25 }
[chain]
w = 2.8
m = 50
groups = 5
proposal = { kind = "full-normal", covariance = [[0.09]] }
[tuning]
reference = { scoring = { kind = "energy", beta = 1.5 }, weight = 0.1 }
[sweep]
n = [1, 5, 10]
m = [10, 50]
"#;
        let cfg = ExperimentConfig::from_toml_str(text, &[]).unwrap();
        let echoed = cfg.to_toml_string();
        let again = ExperimentConfig::from_toml_str(&echoed, &[]).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(echoed, again.to_toml_string());
    }
}
