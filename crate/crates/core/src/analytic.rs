//! Closed-form expected one-step increments.
//!
//! The exact engines condition on each group's decision and on the number of
//! supporting egoists. A group's decision depends only on its members' total
//! S ~ N(gμ, gσ²), so the member-level partial means are truncated-normal
//! moments of S divided by g. Egoist supporters are Binomial(ℓ, p) with
//! p = F(μ/σ), independent of the groups. For the egoist's own expectation
//! the voter's sign is split off and the other ℓ − 1 egoists are binomial.
//!
//! `approx_single_group` is the normal approximation to the same quantity
//! for one group, with the usual continuity correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::threshold_floor;
use crate::model::{Environment, Role, RoleValues, SocietyComposition, VotingRule};
use crate::stats::{cdf, lower_partial_mean, pdf, upper_partial_mean, BinomialTail};

/// Per-role expected one-step increments, in capital units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExpectedIncrements {
    pub group1: Option<f64>,
    pub group2: Option<f64>,
    pub egoist: Option<f64>,
    /// Size-weighted mean over all participants.
    pub random: f64,
    /// Standard errors, present for Monte Carlo estimates only.
    pub std_errors: Option<RoleValues>,
    /// Probability (or observed frequency) that a proposal passes.
    pub accept_rate: Option<f64>,
}

impl ExpectedIncrements {
    pub fn get(&self, role: Role) -> Option<f64> {
        match role {
            Role::Group1 => self.group1,
            Role::Group2 => self.group2,
            Role::Egoist => self.egoist,
            Role::Random => Some(self.random),
        }
    }

    pub fn std_error(&self, role: Role) -> Option<f64> {
        self.std_errors.and_then(|se| se.get(role))
    }

    pub fn values(&self) -> RoleValues {
        RoleValues {
            group1: self.group1,
            group2: self.group2,
            egoist: self.egoist,
            random: Some(self.random),
        }
    }

    /// Builds the record from role values, filling in the weighted mean.
    pub(crate) fn from_roles(comp: &SocietyComposition, roles: RoleValues) -> Self {
        let n = comp.participants() as f64;
        let mut total = 0.0;
        for role in [Role::Group1, Role::Group2, Role::Egoist] {
            if let Some(v) = roles.get(role) {
                total += comp.role_size(role) as f64 * v;
            }
        }
        Self {
            group1: roles.group1,
            group2: roles.group2,
            egoist: roles.egoist,
            random: total / n,
            std_errors: None,
            accept_rate: None,
        }
    }
}

/// Every quantity entering the single-group normal approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproximationTerms {
    /// Probability that one egoist gains, F(μ/σ).
    pub p: f64,
    pub q: f64,
    /// Probability that the group supports, F(μ√g/σ).
    pub p_group: f64,
    pub q_group: f64,
    /// Approximate P(egoist supporters > ⌊αn⌋).
    pub f_alpha_cdf: f64,
    /// Approximate P(egoist supporters > ⌊γn⌋), γ = α − g/n.
    pub f_gamma_cdf: f64,
    pub f_alpha_pdf: f64,
    pub f_gamma_pdf: f64,
    /// f(μ√g/σ)
    pub f_group: f64,
    /// f(μ/σ)
    pub f_single: f64,
    pub gamma: f64,
}

impl ApproximationTerms {
    pub fn new(comp: &SocietyComposition, env: &Environment, rule: VotingRule) -> Result<Self> {
        let (egoists, group) = single_group_sizes(comp)?;
        let n = comp.participants();
        let l = egoists as f64;
        let g = group as f64;
        let p = cdf(env.mu / env.sigma);
        let q = cdf(-env.mu / env.sigma);
        let spread = (p * q * l).sqrt();
        if spread == 0.0 {
            return Err(Error::Unsupported(
                "normal approximation degenerates when every egoist votes alike".into(),
            ));
        }
        let zg = env.mu * g.sqrt() / env.sigma;
        let floor_alpha = threshold_floor(rule.alpha, n) as f64;
        // ⌊γn⌋ = ⌊αn⌋ − g exactly, since g is an integer.
        let floor_gamma = floor_alpha - g;
        let z_alpha = (floor_alpha + 0.5 - p * l) / spread;
        let z_gamma = (floor_gamma + 0.5 - p * l) / spread;
        Ok(Self {
            p,
            q,
            p_group: cdf(zg),
            q_group: cdf(-zg),
            f_alpha_cdf: cdf(-z_alpha),
            f_gamma_cdf: cdf(-z_gamma),
            f_alpha_pdf: pdf(z_alpha),
            f_gamma_pdf: pdf(z_gamma),
            f_group: pdf(zg),
            f_single: pdf(env.mu / env.sigma),
            gamma: rule.alpha - g / n as f64,
        })
    }
}

fn single_group_sizes(comp: &SocietyComposition) -> Result<(usize, usize)> {
    let groups: Vec<_> = comp.active_groups().collect();
    if groups.len() != 1 || comp.groups().len() != 1 {
        return Err(Error::Unsupported(format!(
            "expected exactly one non-empty group, found {}",
            groups.len()
        )));
    }
    if groups[0].1.criterion.mean_threshold() != Some(0.0) {
        return Err(Error::Unsupported(
            "the single-group formulas assume the total-positive criterion".into(),
        ));
    }
    if comp.egoists() == 0 {
        return Err(Error::invalid("egoists", "must be at least 1"));
    }
    Ok((comp.egoists(), groups[0].1.size))
}

/// Normal approximation of the egoist and group-member expectations for a
/// society with one total-positive group.
pub fn approx_single_group(
    comp: &SocietyComposition,
    env: &Environment,
    rule: VotingRule,
) -> Result<ExpectedIncrements> {
    let t = ApproximationTerms::new(comp, env, rule)?;
    let (egoists, group) = single_group_sizes(comp)?;
    let (mu, sigma) = (env.mu, env.sigma);
    let spread = (t.p * t.q * egoists as f64).sqrt();
    let sqrt_g = (group as f64).sqrt();

    let egoist = t.p_group * (mu * t.f_gamma_cdf + sigma * t.f_single / spread * t.f_gamma_pdf)
        + t.q_group * (mu * t.f_alpha_cdf + sigma * t.f_single / spread * t.f_alpha_pdf);
    let member = t.f_gamma_cdf * (mu * t.p_group + sigma * t.f_group / sqrt_g)
        + t.f_alpha_cdf * (mu * t.q_group - sigma * t.f_group / sqrt_g);

    let mut out = ExpectedIncrements::from_roles(
        comp,
        RoleValues {
            group1: Some(member),
            egoist: Some(egoist),
            ..RoleValues::default()
        },
    );
    out.accept_rate = Some(t.p_group * t.f_gamma_cdf + t.q_group * t.f_alpha_cdf);
    Ok(out)
}

/// One block-voting group reduced to what the exact engine needs.
struct GroupTerms {
    role: Role,
    size: i64,
    support: f64,
    /// E[X_i·1{support}] for one member.
    member_if_support: f64,
    /// E[X_i·1{oppose}] for one member.
    member_if_oppose: f64,
}

impl GroupTerms {
    fn prob(&self, supports: bool) -> f64 {
        if supports {
            self.support
        } else {
            1.0 - self.support
        }
    }
}

/// Exact expectations for any composition whose groups decide on their total
/// (total-positive or average-above). Empty groups are reported as absent.
pub fn exact_increments(
    comp: &SocietyComposition,
    env: &Environment,
    rule: VotingRule,
) -> Result<ExpectedIncrements> {
    let (mu, sigma) = (env.mu, env.sigma);
    let mut groups = Vec::with_capacity(2);
    for (role, spec) in comp.active_groups() {
        let threshold = spec.criterion.mean_threshold().ok_or_else(|| {
            Error::Unsupported(
                "no closed form for the internal-majority criterion; use Monte Carlo".into(),
            )
        })?;
        let g = spec.size as f64;
        let sd = sigma / g.sqrt();
        // The member mean X̄ ~ N(μ, σ²/g) and E[X_i·1{X̄ > t}] = E[X̄·1{X̄ > t}].
        let upper = upper_partial_mean(mu - threshold, sd) + threshold * cdf((mu - threshold) / sd);
        let lower = lower_partial_mean(mu - threshold, sd) + threshold * cdf((threshold - mu) / sd);
        groups.push(GroupTerms {
            role,
            size: spec.size as i64,
            support: cdf((mu - threshold) / sd),
            member_if_support: upper,
            member_if_oppose: lower,
        });
    }

    let egoists = comp.egoists() as u64;
    let p = cdf(mu / sigma);
    let others = BinomialTail::new(egoists, p)?;
    let peers = BinomialTail::new(egoists.saturating_sub(1), p)?;
    let own_gain = upper_partial_mean(mu, sigma);
    let own_loss = lower_partial_mean(mu, sigma);
    let needed = rule.min_votes(comp.participants()) as i64;

    let mut member_totals = vec![0.0; groups.len()];
    let mut egoist_total = 0.0;
    let mut accept = 0.0;
    for mask in 0u32..(1 << groups.len()) {
        let supports = |j: usize| mask & (1 << j) != 0;
        let block: i64 = groups
            .iter()
            .enumerate()
            .filter(|&(j, _)| supports(j))
            .map(|(_, g)| g.size)
            .sum();
        let joint: f64 = groups
            .iter()
            .enumerate()
            .map(|(j, g)| g.prob(supports(j)))
            .product();
        let pass = others.tail_at_least(needed - block);
        accept += joint * pass;

        for (j, g) in groups.iter().enumerate() {
            let rest: f64 = groups
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(k, h)| h.prob(supports(k)))
                .product();
            let own = if supports(j) {
                g.member_if_support
            } else {
                g.member_if_oppose
            };
            member_totals[j] += rest * own * pass;
        }

        if egoists > 0 {
            egoist_total += joint
                * (own_gain * peers.tail_at_least(needed - block - 1)
                    + own_loss * peers.tail_at_least(needed - block));
        }
    }

    let mut roles = RoleValues::default();
    for (g, total) in groups.iter().zip(member_totals) {
        roles.set(g.role, Some(total));
    }
    if egoists > 0 {
        roles.egoist = Some(egoist_total);
    }
    let mut out = ExpectedIncrements::from_roles(comp, roles);
    out.accept_rate = Some(accept);
    Ok(out)
}

/// Exact expectations for a society with one total-positive group.
pub fn exact_single_group(
    comp: &SocietyComposition,
    env: &Environment,
    rule: VotingRule,
) -> Result<ExpectedIncrements> {
    single_group_sizes(comp)?;
    exact_increments(comp, env, rule)
}

/// Exact expectations for a society with two total-positive groups. The
/// second group may be empty, which reduces to the single-group case.
pub fn exact_two_groups(
    comp: &SocietyComposition,
    env: &Environment,
    rule: VotingRule,
) -> Result<ExpectedIncrements> {
    if comp.groups().len() != 2 {
        return Err(Error::Unsupported(format!(
            "expected two groups, found {}",
            comp.groups().len()
        )));
    }
    if comp
        .groups()
        .iter()
        .any(|g| g.criterion.mean_threshold() != Some(0.0))
    {
        return Err(Error::Unsupported(
            "the two-group formulas assume the total-positive criterion".into(),
        ));
    }
    if comp.active_groups().next().is_none() {
        return Err(Error::invalid("groups", "both groups are empty"));
    }
    exact_increments(comp, env, rule)
}

/// Expected egoist increment when all `n` participants are egoists.
pub fn group_free_baseline(n: usize, env: &Environment, rule: VotingRule) -> Result<f64> {
    let comp = SocietyComposition::egoists_only(n)?;
    let out = exact_increments(&comp, env, rule)?;
    Ok(out.egoist.expect("egoist role present"))
}

/// Exact probability that a proposal is accepted.
pub fn acceptance_probability(
    comp: &SocietyComposition,
    env: &Environment,
    rule: VotingRule,
) -> Result<f64> {
    Ok(exact_increments(comp, env, rule)?
        .accept_rate
        .expect("exact engine reports acceptance"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GroupCriterion, GroupSpec};
    use crate::stats::positive_part_mean;

    fn env(mu: f64, sigma: f64) -> Environment {
        Environment::new(mu, sigma).unwrap()
    }

    fn rule(a: f64) -> VotingRule {
        VotingRule::new(a).unwrap()
    }

    #[test]
    fn two_agents_by_enumeration() {
        // ℓ = 1, g = 1, v* = 2: both must support.
        let c = SocietyComposition::single_group(1, 1).unwrap();
        let e = env(-0.3, 1.7);
        let out = exact_single_group(&c, &e, rule(0.5)).unwrap();
        let p = cdf(-0.3 / 1.7);
        let gain = positive_part_mean(-0.3, 1.7).unwrap();
        assert!((out.egoist.unwrap() - p * gain).abs() < 1e-15);
        assert!((out.group1.unwrap() - p * gain).abs() < 1e-15);
        assert!((out.accept_rate.unwrap() - p * p).abs() < 1e-15);
    }

    #[test]
    fn favourable_environment_accepts_everything() {
        let c = SocietyComposition::single_group(60, 40).unwrap();
        let out = exact_single_group(&c, &env(10.0, 1.0), rule(0.5)).unwrap();
        assert!((out.group1.unwrap() - 10.0).abs() < 1e-9);
        assert!((out.egoist.unwrap() - 10.0).abs() < 1e-9);
        assert!((out.accept_rate.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn baseline_for_a_dictator() {
        let b = group_free_baseline(1, &env(-0.8, 30.0), rule(0.5)).unwrap();
        assert!((b - positive_part_mean(-0.8, 30.0).unwrap()).abs() < 1e-15);
        assert!(group_free_baseline(1000, &env(0.0, 2.0), rule(0.5)).unwrap() >= 0.0);
        assert!(group_free_baseline(0, &env(0.0, 2.0), rule(0.5)).is_err());
    }

    #[test]
    fn single_group_preconditions() {
        let e = env(-0.8, 30.0);
        let no_egoists = SocietyComposition::single_group(0, 10).unwrap();
        assert!(approx_single_group(&no_egoists, &e, rule(0.5)).is_err());
        assert!(exact_single_group(&no_egoists, &e, rule(0.5)).is_err());
        let empty = SocietyComposition::single_group(10, 0).unwrap();
        assert!(approx_single_group(&empty, &e, rule(0.5)).is_err());
        let two = SocietyComposition::two_groups(10, 3, 4).unwrap();
        assert!(exact_single_group(&two, &e, rule(0.5)).is_err());
        let majority = SocietyComposition::new(
            10,
            vec![GroupSpec {
                size: 5,
                criterion: GroupCriterion::InternalMajority { alpha1: 0.5 },
            }],
        )
        .unwrap();
        assert!(matches!(
            exact_increments(&majority, &e, rule(0.5)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn neutral_environment_approximation_is_nonnegative() {
        let c = SocietyComposition::single_group(800, 200).unwrap();
        let t = ApproximationTerms::new(&c, &env(0.0, 30.0), rule(0.5)).unwrap();
        assert_eq!(t.p, 0.5);
        assert_eq!(t.p_group, 0.5);
        assert!((t.gamma - 0.3).abs() < 1e-15);
        let out = approx_single_group(&c, &env(0.0, 30.0), rule(0.5)).unwrap();
        assert!(out.group1.unwrap() >= 0.0 && out.egoist.unwrap() >= 0.0);
    }

    #[test]
    fn weighted_mean_identity() {
        let c = SocietyComposition::two_groups(300, 120, 80).unwrap();
        let out = exact_two_groups(&c, &env(-0.5, 4.0), rule(0.5)).unwrap();
        let w = (300.0 * out.egoist.unwrap()
            + 120.0 * out.group1.unwrap()
            + 80.0 * out.group2.unwrap())
            / 500.0;
        assert!((w - out.random).abs() < 1e-12);
    }

    #[test]
    fn average_above_zero_matches_total_positive() {
        let e = env(-0.4, 3.0);
        let a = exact_increments(
            &SocietyComposition::single_group(70, 30).unwrap(),
            &e,
            rule(0.5),
        )
        .unwrap();
        let b = exact_increments(
            &SocietyComposition::new(
                70,
                vec![GroupSpec {
                    size: 30,
                    criterion: GroupCriterion::AverageAbove { threshold: 0.0 },
                }],
            )
            .unwrap(),
            &e,
            rule(0.5),
        )
        .unwrap();
        assert!((a.group1.unwrap() - b.group1.unwrap()).abs() < 1e-14);
        assert!((a.egoist.unwrap() - b.egoist.unwrap()).abs() < 1e-14);
    }
}
