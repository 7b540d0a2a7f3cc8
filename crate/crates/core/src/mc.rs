//! Monte Carlo estimation and capital trajectories.
//!
//! Trial `t` of an estimate draws its proposal from stream `t` of the
//! configured seed. Trials are grouped into fixed-size chunks, each chunk is
//! reduced on whichever worker picks it up, and chunk summaries are merged in
//! chunk order. The result is therefore bit-identical for any worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::ExpectedIncrements;
use crate::error::{Error, Result};
use crate::model::{
    decide_unchecked, fill_proposal, Environment, Role, RoleValues, SocietyComposition, VotingRule,
};
use crate::stats::RandomSource;

const CHUNK_TRIALS: u64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub trials: u64,
    pub seed: u64,
    /// Worker threads; 0 uses every available core. Never affects results.
    #[serde(default)]
    pub workers: usize,
}

impl McConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed,
            workers: 0,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        Ok(())
    }
}

/// Running mean and sum of squared deviations (Welford), mergeable.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let total = self.count + other.count;
        let delta = other.mean - self.mean;
        let w = other.count as f64 / total as f64;
        self.mean += delta * w;
        self.m2 += other.m2 + delta * delta * self.count as f64 * w;
        self.count = total;
    }

    fn std_error(&self) -> Option<f64> {
        (self.count >= 2).then(|| (self.m2 / (self.count - 1) as f64 / self.count as f64).sqrt())
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ChunkSummary {
    roles: [Moments; 4],
    accepted: u64,
}

impl ChunkSummary {
    fn merge(&mut self, other: &ChunkSummary) {
        for (a, b) in self.roles.iter_mut().zip(&other.roles) {
            a.merge(b);
        }
        self.accepted += other.accepted;
    }
}

fn run_chunk(
    comp: &SocietyComposition,
    env: &Environment,
    rule: VotingRule,
    seed: u64,
    trials: std::ops::Range<u64>,
) -> ChunkSummary {
    let mut summary = ChunkSummary::default();
    let mut buf = Vec::with_capacity(comp.participants());
    for t in trials {
        let mut rng = RandomSource::new(seed, t);
        fill_proposal(comp, env, &mut rng, &mut buf);
        let outcome = decide_unchecked(comp, rule, &buf);
        summary.accepted += u64::from(outcome.accepted);
        for (slot, role) in summary.roles.iter_mut().zip(Role::ALL) {
            if let Some(v) = outcome.per_role_mean_increment.get(role) {
                slot.push(v);
            }
        }
    }
    summary
}

fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        return job();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(job),
        Err(_) => job(),
    }
}

/// Sample means of realised one-step increments per role, with standard
/// errors sample-std/√trials. Rejected proposals count as zero increments.
pub fn estimate_increments(
    comp: &SocietyComposition,
    env: &Environment,
    rule: VotingRule,
    mc: &McConfig,
) -> Result<ExpectedIncrements> {
    mc.validate()?;
    let chunks = mc.trials.div_ceil(CHUNK_TRIALS);
    let summaries: Vec<ChunkSummary> = with_workers(mc.workers, || {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let start = c * CHUNK_TRIALS;
                let end = (start + CHUNK_TRIALS).min(mc.trials);
                run_chunk(comp, env, rule, mc.seed, start..end)
            })
            .collect()
    });
    let mut total = ChunkSummary::default();
    for s in &summaries {
        total.merge(s);
    }

    let mut means = RoleValues::default();
    let mut errors = RoleValues::default();
    for (m, role) in total.roles.iter().zip(Role::ALL) {
        if m.count > 0 {
            means.set(role, Some(m.mean));
            errors.set(role, m.std_error());
        }
    }
    Ok(ExpectedIncrements {
        group1: means.group1,
        group2: means.group2,
        egoist: means.egoist,
        random: means.random.unwrap_or(0.0),
        std_errors: (mc.trials >= 2).then_some(errors),
        accept_rate: Some(total.accepted as f64 / mc.trials as f64),
    })
}

/// State after one step of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    /// 1-based step number.
    pub step_index: u64,
    pub accepted: bool,
    pub votes_for: usize,
    /// Mean cumulative capital of each role's members.
    pub capital: RoleValues,
}

/// Repeated voting on fresh proposals, tracking every participant's capital.
///
/// `initial_capitals` holds one value per participant in proposal layout,
/// or is empty for an all-zero start. Step `s` uses stream `s − 1` of
/// `mc.seed`; `mc.trials` is ignored.
pub fn simulate_trajectory(
    comp: &SocietyComposition,
    env: &Environment,
    rule: VotingRule,
    steps: u64,
    initial_capitals: &[f64],
    mc: &McConfig,
) -> Result<Vec<TrajectoryRecord>> {
    let n = comp.participants();
    let mut capital = match initial_capitals.len() {
        0 => vec![0.0; n],
        len if len == n => initial_capitals.to_vec(),
        len => {
            return Err(Error::invalid(
                "initial_capitals",
                format!("expected {n} values, got {len}"),
            ))
        }
    };
    if let Some(bad) = capital.iter().find(|c| !c.is_finite()) {
        return Err(Error::invalid(
            "initial_capitals",
            format!("{bad} is not finite"),
        ));
    }

    let mut records = Vec::with_capacity(steps as usize);
    let mut buf = Vec::with_capacity(n);
    for s in 0..steps {
        let mut rng = RandomSource::new(mc.seed, s);
        fill_proposal(comp, env, &mut rng, &mut buf);
        let outcome = decide_unchecked(comp, rule, &buf);
        if outcome.accepted {
            for (c, d) in capital.iter_mut().zip(&buf) {
                *c += d;
            }
        }
        let mut role_capital = RoleValues::default();
        for role in Role::ALL {
            let range = comp.role_range(role);
            if !range.is_empty() {
                let len = range.len() as f64;
                role_capital.set(role, Some(capital[range].iter().sum::<f64>() / len));
            }
        }
        records.push(TrajectoryRecord {
            step_index: s + 1,
            accepted: outcome.accepted,
            votes_for: outcome.votes_for,
            capital: role_capital,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_merge_matches_sequential() {
        let xs: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64 - 3.5).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..17].iter().for_each(|&x| a.push(x));
        xs[17..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert_eq!(a.count, all.count);
        assert!((a.mean - all.mean).abs() < 1e-13);
        assert!((a.m2 - all.m2).abs() < 1e-10);
    }

    #[test]
    fn zero_trials_rejected() {
        let c = SocietyComposition::egoists_only(3).unwrap();
        let e = Environment::new(0.0, 1.0).unwrap();
        let r = VotingRule::new(0.5).unwrap();
        assert!(estimate_increments(&c, &e, r, &McConfig::new(0, 1)).is_err());
    }

    #[test]
    fn single_trial_has_no_standard_errors() {
        let c = SocietyComposition::egoists_only(3).unwrap();
        let e = Environment::new(0.0, 1.0).unwrap();
        let r = VotingRule::new(0.5).unwrap();
        let out = estimate_increments(&c, &e, r, &McConfig::new(1, 1)).unwrap();
        assert!(out.std_errors.is_none());
    }

    #[test]
    fn trajectory_rejects_bad_initial_capitals() {
        let c = SocietyComposition::egoists_only(3).unwrap();
        let e = Environment::new(0.0, 1.0).unwrap();
        let r = VotingRule::new(0.5).unwrap();
        let mc = McConfig::new(1, 1);
        assert!(simulate_trajectory(&c, &e, r, 3, &[1.0, 2.0], &mc).is_err());
        assert!(simulate_trajectory(&c, &e, r, 3, &[1.0, f64::NAN, 2.0], &mc).is_err());
        assert!(simulate_trajectory(&c, &e, r, 0, &[], &mc)
            .unwrap()
            .is_empty());
    }
}
