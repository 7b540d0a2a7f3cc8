//! Society model and single-step voting semantics.
//!
//! A society is `egoists` independent voters plus up to two groups that each
//! cast a block vote. Every step the environment proposes one i.i.d.
//! N(μ, σ²) capital increment per participant; the proposal passes iff it
//! collects at least ⌊αn⌋ + 1 votes, otherwise nobody's capital changes.
//!
//! Proposal vectors are laid out role by role: egoists first, then the
//! members of group 1, then group 2.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::RandomSource;

/// Products like α·n that land within this distance of an integer are taken
/// to be that integer, so α = 2/3 typed as a decimal behaves like the ratio.
const FLOOR_SLACK: f64 = 1e-9;

pub(crate) fn threshold_floor(fraction: f64, count: usize) -> usize {
    (fraction * count as f64 + FLOOR_SLACK).floor() as usize
}

/// Gaussian proposal environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub mu: f64,
    pub sigma: f64,
}

impl Environment {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::invalid("mu", format!("{mu} is not finite")));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(
                "sigma",
                format!("{sigma} must be positive and finite"),
            ));
        }
        Ok(Self { mu, sigma })
    }
}

/// How a group decides its common vote.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupCriterion {
    /// Support iff the members' total increment is positive.
    #[default]
    TotalPositive,
    /// Support iff more than ⌊α₁·g⌋ members individually gain.
    InternalMajority { alpha1: f64 },
    /// Support iff the members' mean increment exceeds `threshold`.
    AverageAbove { threshold: f64 },
}

impl GroupCriterion {
    pub fn validate(&self) -> Result<()> {
        match *self {
            GroupCriterion::TotalPositive => Ok(()),
            GroupCriterion::InternalMajority { alpha1 } => {
                if (0.0..1.0).contains(&alpha1) {
                    Ok(())
                } else {
                    Err(Error::invalid(
                        "alpha1",
                        format!("{alpha1} is not in [0, 1)"),
                    ))
                }
            }
            GroupCriterion::AverageAbove { threshold } => {
                if threshold.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid(
                        "threshold",
                        format!("{threshold} is not finite"),
                    ))
                }
            }
        }
    }

    /// Mean-increment threshold the group applies, if its decision depends
    /// only on the members' total.
    pub(crate) fn mean_threshold(&self) -> Option<f64> {
        match *self {
            GroupCriterion::TotalPositive => Some(0.0),
            GroupCriterion::AverageAbove { threshold } => Some(threshold),
            GroupCriterion::InternalMajority { .. } => None,
        }
    }
}

impl fmt::Display for GroupCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupCriterion::TotalPositive => write!(f, "total"),
            GroupCriterion::InternalMajority { alpha1 } => write!(f, "majority={alpha1}"),
            GroupCriterion::AverageAbove { threshold } => write!(f, "average={threshold}"),
        }
    }
}

impl FromStr for GroupCriterion {
    type Err = Error;

    /// `total`, `majority=<α₁>` or `average=<threshold>`.
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once('=') {
            Some((h, a)) => (h.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let number = |name: &'static str| -> Result<f64> {
            let raw = arg.ok_or_else(|| Error::invalid(name, "missing value"))?;
            parse_real(raw).map_err(|_| Error::invalid(name, format!("cannot parse `{raw}`")))
        };
        let c = match head {
            "total" | "total_positive" => GroupCriterion::TotalPositive,
            "majority" | "internal_majority" => GroupCriterion::InternalMajority {
                alpha1: number("alpha1")?,
            },
            "average" | "average_above" => GroupCriterion::AverageAbove {
                threshold: number("threshold")?,
            },
            other => {
                return Err(Error::invalid(
                    "criterion",
                    format!("unknown criterion `{other}`"),
                ))
            }
        };
        c.validate()?;
        Ok(c)
    }
}

/// Parses a real number, also accepting a ratio such as `2/3`.
pub fn parse_real(s: &str) -> std::result::Result<f64, std::num::ParseFloatError> {
    match s.split_once('/') {
        Some((a, b)) => Ok(a.trim().parse::<f64>()? / b.trim().parse::<f64>()?),
        None => s.trim().parse(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub size: usize,
    #[serde(default)]
    pub criterion: GroupCriterion,
}

impl GroupSpec {
    pub fn total_positive(size: usize) -> Self {
        Self {
            size,
            criterion: GroupCriterion::TotalPositive,
        }
    }
}

/// Head counts per role. A group of size zero is allowed and simply absent
/// from the vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocietyComposition {
    egoists: usize,
    groups: Vec<GroupSpec>,
}

impl SocietyComposition {
    pub const MAX_GROUPS: usize = 2;

    pub fn new(egoists: usize, groups: Vec<GroupSpec>) -> Result<Self> {
        if groups.len() > Self::MAX_GROUPS {
            return Err(Error::invalid(
                "groups",
                format!(
                    "at most {} groups are modelled, got {}",
                    Self::MAX_GROUPS,
                    groups.len()
                ),
            ));
        }
        for g in &groups {
            g.criterion.validate()?;
        }
        let comp = Self { egoists, groups };
        if comp.participants() == 0 {
            return Err(Error::invalid("composition", "society has no participants"));
        }
        Ok(comp)
    }

    pub fn egoists_only(n: usize) -> Result<Self> {
        Self::new(n, Vec::new())
    }

    pub fn single_group(egoists: usize, group: usize) -> Result<Self> {
        Self::new(egoists, vec![GroupSpec::total_positive(group)])
    }

    pub fn two_groups(egoists: usize, group1: usize, group2: usize) -> Result<Self> {
        Self::new(
            egoists,
            vec![
                GroupSpec::total_positive(group1),
                GroupSpec::total_positive(group2),
            ],
        )
    }

    pub fn egoists(&self) -> usize {
        self.egoists
    }

    pub fn groups(&self) -> &[GroupSpec] {
        &self.groups
    }

    /// Size of group `index` (0 or 1), zero if the group is not configured.
    pub fn group_size(&self, index: usize) -> usize {
        self.groups.get(index).map_or(0, |g| g.size)
    }

    /// Total head count n.
    pub fn participants(&self) -> usize {
        self.egoists + self.groups.iter().map(|g| g.size).sum::<usize>()
    }

    /// Groups with at least one member, paired with their role.
    pub fn active_groups(&self) -> impl Iterator<Item = (Role, &GroupSpec)> {
        self.groups
            .iter()
            .zip([Role::Group1, Role::Group2])
            .filter(|(g, _)| g.size > 0)
            .map(|(g, r)| (r, g))
    }

    pub fn role_size(&self, role: Role) -> usize {
        match role {
            Role::Group1 => self.group_size(0),
            Role::Group2 => self.group_size(1),
            Role::Egoist => self.egoists,
            Role::Random => self.participants(),
        }
    }

    /// Index range of `role` inside a proposal vector.
    pub fn role_range(&self, role: Role) -> Range<usize> {
        let g1 = self.egoists + self.group_size(0);
        match role {
            Role::Egoist => 0..self.egoists,
            Role::Group1 => self.egoists..g1,
            Role::Group2 => g1..g1 + self.group_size(1),
            Role::Random => 0..self.participants(),
        }
    }
}

/// α-majority rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VotingRule {
    pub alpha: f64,
}

impl VotingRule {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self { alpha })
        } else {
            Err(Error::invalid("alpha", format!("{alpha} is not in (0, 1)")))
        }
    }

    /// ⌊αn⌋ + 1, the number of votes needed to pass.
    pub fn min_votes(&self, n: usize) -> usize {
        (threshold_floor(self.alpha, n) + 1).min(n.max(1))
    }
}

/// One realised increment vector, laid out role by role.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub increments: Vec<f64>,
}

/// The participant roles an increment can be reported for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Group1,
    Group2,
    Egoist,
    /// A participant drawn uniformly from the whole society.
    Random,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Group1, Role::Group2, Role::Egoist, Role::Random];

    pub fn name(self) -> &'static str {
        match self {
            Role::Group1 => "group1",
            Role::Group2 => "group2",
            Role::Egoist => "egoist",
            Role::Random => "random",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "group1" | "group" | "g1" => Ok(Role::Group1),
            "group2" | "g2" => Ok(Role::Group2),
            "egoist" | "egoists" => Ok(Role::Egoist),
            "random" | "society" => Ok(Role::Random),
            other => Err(Error::invalid("role", format!("unknown role `{other}`"))),
        }
    }
}

/// One optional real per role.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RoleValues {
    pub group1: Option<f64>,
    pub group2: Option<f64>,
    pub egoist: Option<f64>,
    pub random: Option<f64>,
}

impl RoleValues {
    pub fn get(&self, role: Role) -> Option<f64> {
        match role {
            Role::Group1 => self.group1,
            Role::Group2 => self.group2,
            Role::Egoist => self.egoist,
            Role::Random => self.random,
        }
    }

    pub fn set(&mut self, role: Role, value: Option<f64>) {
        match role {
            Role::Group1 => self.group1 = value,
            Role::Group2 => self.group2 = value,
            Role::Egoist => self.egoist = value,
            Role::Random => self.random = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub accepted: bool,
    pub votes_for: usize,
    /// Realised mean increment per role; all zero when rejected.
    pub per_role_mean_increment: RoleValues,
}

pub fn egoist_vote(increment: f64) -> bool {
    increment > 0.0
}

/// The common vote of a group whose members would receive `member_increments`.
pub fn group_vote(member_increments: &[f64], criterion: GroupCriterion) -> Result<bool> {
    if member_increments.is_empty() {
        return Err(Error::invalid("group", "cannot vote with an empty group"));
    }
    Ok(group_vote_unchecked(member_increments, criterion))
}

fn group_vote_unchecked(member_increments: &[f64], criterion: GroupCriterion) -> bool {
    match criterion {
        GroupCriterion::TotalPositive => member_increments.iter().sum::<f64>() > 0.0,
        GroupCriterion::AverageAbove { threshold } => {
            member_increments.iter().sum::<f64>() / member_increments.len() as f64 > threshold
        }
        GroupCriterion::InternalMajority { alpha1 } => {
            let gainers = member_increments.iter().filter(|&&x| x > 0.0).count();
            gainers > threshold_floor(alpha1, member_increments.len())
        }
    }
}

pub fn tally(votes_for: usize, n: usize, rule: VotingRule) -> bool {
    debug_assert!(votes_for <= n);
    votes_for >= rule.min_votes(n)
}

pub fn generate_proposal(
    comp: &SocietyComposition,
    env: &Environment,
    rng: &mut RandomSource,
) -> Proposal {
    let mut increments = Vec::with_capacity(comp.participants());
    fill_proposal(comp, env, rng, &mut increments);
    Proposal { increments }
}

pub(crate) fn fill_proposal(
    comp: &SocietyComposition,
    env: &Environment,
    rng: &mut RandomSource,
    out: &mut Vec<f64>,
) {
    out.clear();
    out.extend((0..comp.participants()).map(|_| env.mu + env.sigma * rng.standard_normal()));
}

/// Votes on a given proposal and reports what each role receives.
pub fn decide(
    comp: &SocietyComposition,
    rule: VotingRule,
    proposal: &Proposal,
) -> Result<StepOutcome> {
    let n = comp.participants();
    if proposal.increments.len() != n {
        return Err(Error::invalid(
            "proposal",
            format!(
                "has {} components for a society of {n}",
                proposal.increments.len()
            ),
        ));
    }
    Ok(decide_unchecked(comp, rule, &proposal.increments))
}

pub(crate) fn decide_unchecked(
    comp: &SocietyComposition,
    rule: VotingRule,
    increments: &[f64],
) -> StepOutcome {
    let n = comp.participants();
    let mut votes_for = increments[comp.role_range(Role::Egoist)]
        .iter()
        .filter(|&&x| egoist_vote(x))
        .count();
    for (role, group) in comp.active_groups() {
        if group_vote_unchecked(&increments[comp.role_range(role)], group.criterion) {
            votes_for += group.size;
        }
    }
    let accepted = tally(votes_for, n, rule);

    let mut per_role = RoleValues::default();
    for role in Role::ALL {
        let range = comp.role_range(role);
        if range.is_empty() {
            continue;
        }
        let mean = if accepted {
            let len = range.len() as f64;
            increments[range].iter().sum::<f64>() / len
        } else {
            0.0
        };
        per_role.set(role, Some(mean));
    }
    StepOutcome {
        accepted,
        votes_for,
        per_role_mean_increment: per_role,
    }
}

/// Draws one proposal and votes on it.
pub fn run_step(
    comp: &SocietyComposition,
    env: &Environment,
    rule: VotingRule,
    rng: &mut RandomSource,
) -> StepOutcome {
    let proposal = generate_proposal(comp, env, rng);
    decide_unchecked(comp, rule, &proposal.increments)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule(alpha: f64) -> VotingRule {
        VotingRule::new(alpha).unwrap()
    }

    #[test]
    fn egoist_votes_strictly() {
        assert!(egoist_vote(0.1));
        assert!(!egoist_vote(0.0));
        assert!(!egoist_vote(-3.0));
    }

    #[test]
    fn group_criteria() {
        assert!(group_vote(&[1.0, -0.5], GroupCriterion::TotalPositive).unwrap());
        assert!(!group_vote(
            &[1.0, -2.0],
            GroupCriterion::AverageAbove { threshold: 0.0 }
        )
        .unwrap());
        assert!(group_vote(
            &[1.0, 1.0, -9.0],
            GroupCriterion::InternalMajority { alpha1: 0.5 }
        )
        .unwrap());
        assert!(!group_vote(
            &[1.0, -1.0, -9.0],
            GroupCriterion::InternalMajority { alpha1: 0.5 }
        )
        .unwrap());
        assert!(group_vote(&[], GroupCriterion::TotalPositive).is_err());
    }

    #[test]
    fn tally_is_strict() {
        assert!(tally(1001, 1500, rule(2.0 / 3.0)));
        assert!(!tally(1000, 1500, rule(2.0 / 3.0)));
        assert!(tally(501, 1000, rule(0.5)));
        assert!(!tally(500, 1000, rule(0.5)));
        assert!(!tally(0, 7, rule(0.3)));
    }

    #[test]
    fn min_votes_in_range() {
        assert_eq!(rule(2.0 / 3.0).min_votes(1500), 1001);
        assert_eq!(rule(0.666_666_666_666_666_6).min_votes(1500), 1001);
        assert_eq!(rule(0.5).min_votes(1), 1);
        assert_eq!(rule(0.999).min_votes(10), 10);
        assert_eq!(rule(0.01).min_votes(10), 1);
    }

    #[test]
    fn invalid_parameters() {
        assert!(VotingRule::new(1.5).is_err());
        assert!(VotingRule::new(0.0).is_err());
        assert!(Environment::new(0.0, 0.0).is_err());
        assert!(Environment::new(f64::NAN, 1.0).is_err());
        assert!(SocietyComposition::egoists_only(0).is_err());
        assert!(SocietyComposition::new(1, vec![GroupSpec::total_positive(1); 3]).is_err());
        assert!(SocietyComposition::new(
            1,
            vec![GroupSpec {
                size: 2,
                criterion: GroupCriterion::InternalMajority { alpha1: 1.0 }
            }]
        )
        .is_err());
    }

    #[test]
    fn criterion_parsing() {
        assert_eq!(
            "total".parse::<GroupCriterion>().unwrap(),
            GroupCriterion::TotalPositive
        );
        assert_eq!(
            "majority=2/3".parse::<GroupCriterion>().unwrap(),
            GroupCriterion::InternalMajority { alpha1: 2.0 / 3.0 }
        );
        assert_eq!(
            "average=0.25".parse::<GroupCriterion>().unwrap(),
            GroupCriterion::AverageAbove { threshold: 0.25 }
        );
        assert!("majority=1.2".parse::<GroupCriterion>().is_err());
        assert!("bogus".parse::<GroupCriterion>().is_err());
    }

    #[test]
    fn role_layout() {
        let c = SocietyComposition::two_groups(3, 2, 4).unwrap();
        assert_eq!(c.role_range(Role::Egoist), 0..3);
        assert_eq!(c.role_range(Role::Group1), 3..5);
        assert_eq!(c.role_range(Role::Group2), 5..9);
        assert_eq!(c.participants(), 9);
    }

    #[test]
    fn all_positive_proposal_passes_unanimously() {
        let c = SocietyComposition::egoists_only(5).unwrap();
        let p = Proposal {
            increments: vec![1.0, 2.0, 0.5, 0.1, 3.0],
        };
        let out = decide(&c, rule(0.5), &p).unwrap();
        assert!(out.accepted);
        assert_eq!(out.votes_for, 5);
        assert!((out.per_role_mean_increment.egoist.unwrap() - 1.32).abs() < 1e-12);
    }

    #[test]
    fn rejected_proposal_keeps_status_quo() {
        let c = SocietyComposition::single_group(3, 2).unwrap();
        let p = Proposal {
            increments: vec![-1.0; 5],
        };
        let out = decide(&c, rule(0.5), &p).unwrap();
        assert!(!out.accepted);
        assert_eq!(out.votes_for, 0);
        let r = out.per_role_mean_increment;
        assert_eq!(r.egoist, Some(0.0));
        assert_eq!(r.group1, Some(0.0));
        assert_eq!(r.group2, None);
        assert_eq!(r.random, Some(0.0));
    }

    #[test]
    fn whole_society_group_decides_alone() {
        let c = SocietyComposition::single_group(0, 4).unwrap();
        let yes = Proposal {
            increments: vec![5.0, -1.0, -1.0, -1.0],
        };
        let no = Proposal {
            increments: vec![1.0, -1.0, -1.0, 0.5],
        };
        assert!(decide(&c, rule(0.5), &yes).unwrap().accepted);
        assert!(!decide(&c, rule(0.5), &no).unwrap().accepted);
    }

    #[test]
    fn wrong_length_proposal_rejected() {
        let c = SocietyComposition::egoists_only(3).unwrap();
        let p = Proposal {
            increments: vec![1.0],
        };
        assert!(decide(&c, rule(0.5), &p).is_err());
    }

    #[test]
    fn proposal_generation() {
        let c = SocietyComposition::single_group(3, 4).unwrap();
        let env = Environment::new(5.0, 1e-9).unwrap();
        let p = generate_proposal(&c, &env, &mut RandomSource::new(1, 0));
        assert_eq!(p.increments.len(), 7);
        assert!(p.increments.iter().all(|x| (x - 5.0).abs() < 1e-7));
        let q = generate_proposal(&c, &env, &mut RandomSource::new(1, 0));
        assert_eq!(p, q);
    }
}
