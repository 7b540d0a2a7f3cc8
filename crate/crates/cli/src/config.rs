use std::path::Path;

use anyhow::{bail, Context, Result};
use groupvote::model::parse_real;
use groupvote::{
    build_scenario, Environment, GroupCriterion, GroupSpec, LandmarkQuery, McConfig, Method,
    Scenario, ScenarioOverrides, SocietyComposition, VotingRule,
};
use serde::{Deserialize, Serialize};

/// Everything a run depends on. Read from a TOML or JSON file and/or flags;
/// flags win. The resolved value is echoed into every output file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub participants: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub egoists: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Never affects results, so it is left out of the echo.
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub landmarks: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_capital: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident; $($f:ident),*) => {
        RunConfig { $($f: $top.$f.or($base.$f)),* }
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let is_json =
            path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        if is_json {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
        }
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(self, top: RunConfig) -> RunConfig {
        let base = self;
        overlay_fields!(base, top; scenario, participants, fixed, x, egoists, groups, mu, sigma,
            alpha, methods, trials, seed, workers, landmarks, steps, initial_capital, format)
    }

    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn format(&self) -> Result<Format> {
        match self.format.as_deref().unwrap_or("csv") {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => bail!("invalid format: `{other}` (expected csv or json)"),
        }
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        let raw = self.methods.clone().unwrap_or_else(|| vec!["exact".into()]);
        if raw.is_empty() {
            bail!("invalid method: at least one method is required");
        }
        raw.iter().map(|m| Ok(m.parse::<Method>()?)).collect()
    }

    pub fn mc(&self) -> Result<McConfig> {
        let trials = self.trials.unwrap_or(100_000);
        if trials == 0 {
            bail!("invalid trials: must be at least 1");
        }
        Ok(McConfig {
            trials,
            seed: self.seed.unwrap_or(0),
            workers: self.workers.unwrap_or(0),
        })
    }

    pub fn landmark_queries(&self) -> Result<Vec<LandmarkQuery>> {
        self.landmarks
            .iter()
            .flatten()
            .map(|s| Ok(s.parse::<LandmarkQuery>()?))
            .collect()
    }

    fn has_custom_society(&self) -> bool {
        self.egoists.is_some() || self.groups.is_some()
    }

    pub fn scenario(&self) -> Result<Option<Scenario>> {
        let Some(name) = &self.scenario else {
            return Ok(None);
        };
        if self.has_custom_society() {
            bail!("invalid scenario: --scenario cannot be combined with --egoists/--group");
        }
        let overrides = ScenarioOverrides {
            mu: self.mu,
            sigma: self.sigma,
            alpha: self.alpha,
            participants: self.participants,
            fixed: self.fixed,
        };
        Ok(Some(build_scenario(name, &overrides)?))
    }

    /// The single society a point-wise command runs on.
    pub fn society(&self) -> Result<(SocietyComposition, Environment, VotingRule)> {
        if let Some(s) = self.scenario()? {
            let x = self
                .x
                .context("invalid x: a scenario point needs --x <sweep value>")?;
            return Ok((s.composition_at(x)?, s.env, s.rule));
        }
        if !self.has_custom_society() {
            bail!("invalid society: give --scenario with --x, or --egoists and/or --group");
        }
        let groups = self
            .groups
            .iter()
            .flatten()
            .map(|g| parse_group(g))
            .collect::<Result<Vec<_>>>()?;
        let comp = SocietyComposition::new(self.egoists.unwrap_or(0), groups)?;
        let env = Environment::new(self.mu.unwrap_or(-0.8), self.sigma.unwrap_or(30.0))?;
        let rule = VotingRule::new(self.alpha.unwrap_or(0.5))?;
        Ok((comp, env, rule))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// `size` or `size:criterion`, e.g. `50`, `50:total`, `30:majority=0.6`.
pub fn parse_group(s: &str) -> Result<GroupSpec> {
    let (size, criterion) = match s.split_once(':') {
        Some((a, b)) => (a, b.parse::<GroupCriterion>()?),
        None => (s, GroupCriterion::TotalPositive),
    };
    let size = size
        .trim()
        .parse::<usize>()
        .with_context(|| format!("invalid group: size `{size}` is not a count"))?;
    Ok(GroupSpec { size, criterion })
}

/// Accepts decimals or ratios such as `2/3`.
pub fn real_arg(s: &str) -> std::result::Result<f64, String> {
    parse_real(s).map_err(|e| format!("`{s}`: {e}"))
}
