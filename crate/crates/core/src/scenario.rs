//! Named group-size sweeps and landmark detection on the resulting curves.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{approx_single_group, exact_increments, ExpectedIncrements};
use crate::error::{Error, Result};
use crate::mc::{estimate_increments, McConfig};
use crate::model::{Environment, Role, SocietyComposition, VotingRule};
use crate::stats::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    /// One group of size x, the rest egoists.
    Fig1,
    /// A fixed first group and a second group of size x, the rest egoists.
    Fig2,
    /// Groups of x + 50 and x, the rest egoists.
    Fig3,
    /// Groups of x + 5 and x, the rest egoists.
    Fig4,
    /// Fixed egoists; groups of x and (total − egoists − x).
    Fig5,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::Fig1,
        ScenarioKind::Fig2,
        ScenarioKind::Fig3,
        ScenarioKind::Fig4,
        ScenarioKind::Fig5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Fig1 => "fig1",
            ScenarioKind::Fig2 => "fig2",
            ScenarioKind::Fig3 => "fig3",
            ScenarioKind::Fig4 => "fig4",
            ScenarioKind::Fig5 => "fig5",
        }
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Optional replacements for a scenario's defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOverrides {
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub alpha: Option<f64>,
    /// Society size n.
    pub participants: Option<usize>,
    /// fig2: fixed first-group size. fig3/fig4: size lead of the first group.
    /// fig5: number of egoists.
    pub fixed: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub participants: usize,
    pub fixed: usize,
    pub env: Environment,
    pub rule: VotingRule,
}

/// Builds one of the five named scenarios. Defaults: n = 1000, μ = −0.8,
/// σ = 30, α = 0.5; fig5 uses n = 1500 with 500 egoists, σ = 100, α = 2/3.
pub fn build_scenario(name: &str, overrides: &ScenarioOverrides) -> Result<Scenario> {
    let kind: ScenarioKind = name.parse()?;
    let (participants, fixed, sigma, alpha) = match kind {
        ScenarioKind::Fig1 => (1000, 0, 30.0, 0.5),
        ScenarioKind::Fig2 => (1000, 50, 30.0, 0.5),
        ScenarioKind::Fig3 => (1000, 50, 30.0, 0.5),
        ScenarioKind::Fig4 => (1000, 5, 30.0, 0.5),
        ScenarioKind::Fig5 => (1500, 500, 100.0, 2.0 / 3.0),
    };
    let scenario = Scenario {
        kind,
        participants: overrides.participants.unwrap_or(participants),
        fixed: overrides.fixed.unwrap_or(fixed),
        env: Environment::new(
            overrides.mu.unwrap_or(-0.8),
            overrides.sigma.unwrap_or(sigma),
        )?,
        rule: VotingRule::new(overrides.alpha.unwrap_or(alpha))?,
    };
    if scenario.participants == 0 {
        return Err(Error::invalid("participants", "must be at least 1"));
    }
    if scenario.fixed > scenario.participants {
        return Err(Error::invalid(
            "fixed",
            format!(
                "{} exceeds the society size {}",
                scenario.fixed, scenario.participants
            ),
        ));
    }
    Ok(scenario)
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn sweep_variable(&self) -> &'static str {
        match self.kind {
            ScenarioKind::Fig1 => "size of the group",
            ScenarioKind::Fig2 => "size of the second group",
            ScenarioKind::Fig3 | ScenarioKind::Fig4 => "size of the second (smaller) group",
            ScenarioKind::Fig5 => "size of the first group",
        }
    }

    pub fn sweep_range(&self) -> RangeInclusive<usize> {
        let n = self.participants;
        let top = match self.kind {
            ScenarioKind::Fig1 => n,
            ScenarioKind::Fig2 | ScenarioKind::Fig5 => n - self.fixed,
            ScenarioKind::Fig3 | ScenarioKind::Fig4 => (n - self.fixed) / 2,
        };
        0..=top
    }

    /// Whether the scenario has a single group (the approximation applies).
    pub fn is_single_group(&self) -> bool {
        self.kind == ScenarioKind::Fig1
    }

    pub fn composition_at(&self, x: usize) -> Result<SocietyComposition> {
        if !self.sweep_range().contains(&x) {
            return Err(Error::invalid(
                "x",
                format!("{x} is outside the sweep range {:?}", self.sweep_range()),
            ));
        }
        let n = self.participants;
        let f = self.fixed;
        match self.kind {
            ScenarioKind::Fig1 => SocietyComposition::single_group(n - x, x),
            ScenarioKind::Fig2 => SocietyComposition::two_groups(n - f - x, f, x),
            ScenarioKind::Fig3 | ScenarioKind::Fig4 => {
                SocietyComposition::two_groups(n - f - 2 * x, x + f, x)
            }
            ScenarioKind::Fig5 => SocietyComposition::two_groups(f, x, n - f - x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Approx,
    Exact,
    MonteCarlo,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Approx => "approx",
            Method::Exact => "exact",
            Method::MonteCarlo => "mc",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "approx" => Ok(Method::Approx),
            "exact" => Ok(Method::Exact),
            "mc" | "monte_carlo" | "monte-carlo" => Ok(Method::MonteCarlo),
            other => Err(Error::invalid(
                "method",
                format!("unknown method `{other}` (expected approx, exact or mc)"),
            )),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub x: usize,
    pub increments: ExpectedIncrements,
    pub method: Method,
}

/// Evaluates one composition with the given method.
///
/// The approximation is undefined without egoists or without a group; those
/// points fall back to the exact engine and are labelled as such.
pub fn evaluate_point(
    comp: &SocietyComposition,
    env: &Environment,
    rule: VotingRule,
    method: Method,
    mc: Option<&McConfig>,
) -> Result<(ExpectedIncrements, Method)> {
    match method {
        Method::Exact => Ok((exact_increments(comp, env, rule)?, Method::Exact)),
        Method::Approx => {
            if comp.groups().len() > 1 {
                return Err(Error::Unsupported(
                    "the approximation covers single-group societies only".into(),
                ));
            }
            if comp.egoists() == 0 || comp.active_groups().next().is_none() {
                Ok((exact_increments(comp, env, rule)?, Method::Exact))
            } else {
                Ok((approx_single_group(comp, env, rule)?, Method::Approx))
            }
        }
        Method::MonteCarlo => {
            let mc = mc.ok_or_else(|| {
                Error::invalid("trials", "Monte Carlo needs a trial count and seed")
            })?;
            Ok((
                estimate_increments(comp, env, rule, mc)?,
                Method::MonteCarlo,
            ))
        }
    }
}

/// Monte Carlo configuration used at sweep point `x`: the seed is derived
/// from the sweep seed and x so that points are mutually independent.
pub fn point_config(mc: &McConfig, x: usize) -> McConfig {
    McConfig {
        seed: derive_seed(mc.seed, x as u64),
        ..*mc
    }
}

/// Evaluates `method` at every integer point of the sweep, in x order.
pub fn run_sweep(
    scenario: &Scenario,
    method: Method,
    mc: Option<&McConfig>,
) -> Result<Vec<SweepResult>> {
    if method == Method::Approx && !scenario.is_single_group() {
        return Err(Error::Unsupported(format!(
            "the approximation does not apply to the two-group scenario {}",
            scenario.name()
        )));
    }
    let point = |x: usize| -> Result<SweepResult> {
        let comp = scenario.composition_at(x)?;
        let cfg = mc.map(|m| point_config(m, x));
        let (increments, used) =
            evaluate_point(&comp, &scenario.env, scenario.rule, method, cfg.as_ref())?;
        Ok(SweepResult {
            x,
            increments,
            method: used,
        })
    };
    match method {
        // Each Monte Carlo point already fans out over the worker pool.
        Method::MonteCarlo => scenario.sweep_range().map(point).collect(),
        _ => scenario.sweep_range().into_par_iter().map(point).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandmarkKind {
    ArgMax,
    ArgMin,
    ZeroCrossing,
    CurveCrossing,
}

/// What a curve crossing is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossTarget {
    Role(Role),
    Level(f64),
}

/// A landmark request. Text form: `role:argmax`, `role:argmin`, `role:zero`,
/// `role:cross=other_role` or `role:cross=<level>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandmarkQuery {
    pub kind: LandmarkKind,
    pub role: Role,
    pub against: Option<CrossTarget>,
}

impl LandmarkQuery {
    pub fn argmax(role: Role) -> Self {
        Self {
            kind: LandmarkKind::ArgMax,
            role,
            against: None,
        }
    }

    pub fn argmin(role: Role) -> Self {
        Self {
            kind: LandmarkKind::ArgMin,
            role,
            against: None,
        }
    }

    pub fn zero_crossing(role: Role) -> Self {
        Self {
            kind: LandmarkKind::ZeroCrossing,
            role,
            against: None,
        }
    }

    pub fn crossing(role: Role, against: CrossTarget) -> Self {
        Self {
            kind: LandmarkKind::CurveCrossing,
            role,
            against: Some(against),
        }
    }
}

impl FromStr for LandmarkQuery {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (role, what) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid("landmarks", format!("`{s}` is not role:kind")))?;
        let role: Role = role.parse()?;
        let what = what.trim();
        Ok(match what {
            "argmax" | "max" => Self::argmax(role),
            "argmin" | "min" => Self::argmin(role),
            "zero" | "zero_crossing" => Self::zero_crossing(role),
            _ => {
                let target = what
                    .strip_prefix("cross=")
                    .ok_or_else(|| Error::invalid("landmarks", format!("unknown kind `{what}`")))?;
                let against = match target.parse::<Role>() {
                    Ok(r) => CrossTarget::Role(r),
                    Err(_) => CrossTarget::Level(target.parse::<f64>().map_err(|_| {
                        Error::invalid("landmarks", format!("bad crossing target `{target}`"))
                    })?),
                };
                Self::crossing(role, against)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub kind: LandmarkKind,
    pub roles: Vec<Role>,
    /// Sweep point: the extremum, or the first point past a sign change.
    pub x: usize,
    /// Curve value for extrema; interpolated crossing position otherwise.
    pub value: f64,
}

/// Scans sweep rows for the requested landmarks. Rows where a role is
/// absent are skipped; a query yields nothing when its curve never changes
/// sign. Ties resolve to the smaller x.
pub fn detect_landmarks(
    results: &[SweepResult],
    queries: &[LandmarkQuery],
) -> Result<Vec<Landmark>> {
    let mut found = Vec::new();
    for q in queries {
        let curve: Vec<(usize, f64)> = results
            .iter()
            .filter_map(|r| {
                let own = r.increments.get(q.role)?;
                let reference = match q.against {
                    None => 0.0,
                    Some(CrossTarget::Level(v)) => v,
                    Some(CrossTarget::Role(other)) => r.increments.get(other)?,
                };
                Some((r.x, own - reference))
            })
            .collect();
        if curve.is_empty() {
            return Err(Error::MissingRole(q.role));
        }
        let mut roles = vec![q.role];
        if let Some(CrossTarget::Role(other)) = q.against {
            roles.push(other);
        }
        let landmark = match q.kind {
            LandmarkKind::ArgMax | LandmarkKind::ArgMin => {
                let better = |a: f64, b: f64| match q.kind {
                    LandmarkKind::ArgMax => a > b,
                    _ => a < b,
                };
                let best =
                    curve[1..].iter().fold(
                        curve[0],
                        |best, &p| if better(p.1, best.1) { p } else { best },
                    );
                Some((best.0, best.1))
            }
            LandmarkKind::ZeroCrossing | LandmarkKind::CurveCrossing => first_sign_change(&curve),
        };
        if let Some((x, value)) = landmark {
            found.push(Landmark {
                kind: q.kind,
                roles,
                x,
                value,
            });
        }
    }
    Ok(found)
}

/// First point where the curve leaves the sign it last held, together with
/// the linearly interpolated crossing position.
fn first_sign_change(curve: &[(usize, f64)]) -> Option<(usize, f64)> {
    let mut last: Option<(usize, f64)> = None;
    for &(x, d) in curve {
        if let Some((px, pd)) = last {
            if d == 0.0 {
                return Some((x, x as f64));
            }
            if (d > 0.0) != (pd > 0.0) {
                let at = px as f64 + pd / (pd - d) * (x - px) as f64;
                return Some((x, at));
            }
        }
        if d != 0.0 {
            last = Some((x, d));
        }
    }
    None
}
