//! Scalar probability primitives: the standard normal, truncated-normal
//! partial means, exact binomial tails and reproducible random streams.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// 1/√(2π)
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

fn finite(name: &'static str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::invalid(name, format!("{x} is not finite")))
    }
}

/// Standard normal distribution function without input validation.
#[inline]
pub(crate) fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density without input validation.
#[inline]
pub(crate) fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// P(Z ≤ x) for a standard normal Z.
pub fn normal_cdf(x: f64) -> Result<f64> {
    finite("x", x).map(cdf)
}

/// exp(−x²/2)/√(2π).
pub fn normal_pdf(x: f64) -> Result<f64> {
    finite("x", x).map(pdf)
}

fn check_normal(mu: f64, sigma: f64) -> Result<()> {
    finite("mu", mu)?;
    finite("sigma", sigma)?;
    if sigma <= 0.0 {
        return Err(Error::invalid("sigma", format!("{sigma} must be positive")));
    }
    Ok(())
}

/// E[X·1{X>0}] for X ~ N(mu, sigma²).
pub fn positive_part_mean(mu: f64, sigma: f64) -> Result<f64> {
    check_normal(mu, sigma)?;
    Ok(upper_partial_mean(mu, sigma))
}

/// E[X·1{X≤0}] for X ~ N(mu, sigma²).
pub fn negative_part_mean(mu: f64, sigma: f64) -> Result<f64> {
    check_normal(mu, sigma)?;
    Ok(lower_partial_mean(mu, sigma))
}

#[inline]
pub(crate) fn upper_partial_mean(mu: f64, sigma: f64) -> f64 {
    let z = mu / sigma;
    mu * cdf(z) + sigma * pdf(z)
}

#[inline]
pub(crate) fn lower_partial_mean(mu: f64, sigma: f64) -> f64 {
    let z = mu / sigma;
    mu * cdf(-z) - sigma * pdf(z)
}

// Loader's saddle-point evaluation of the binomial pmf. `stirlerr(n)` is
// ln(n!) − ln(√(2πn)(n/e)^n) and `bd0(x, m)` is the deviance term
// x·ln(x/m) + m − x evaluated without cancellation.

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        return libm::lgamma(n + 1.0) - (n + 0.5) * n.ln() + n - LN_SQRT_2PI;
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

fn bd0(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let mut v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / f64::from(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / m).ln() + m - x
    }
}

/// P(B = k) for B ~ Binomial(n, p), with q = 1 − p supplied separately.
fn binomial_pmf(k: u64, n: u64, p: f64, q: f64) -> f64 {
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if q == 0.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    if k == 0 {
        if n == 0 {
            return 1.0;
        }
        let lc = if p < 0.1 {
            -bd0(nf, nf * q) - nf * p
        } else {
            nf * q.ln()
        };
        return lc.exp();
    }
    if k == n {
        let lc = if q < 0.1 {
            -bd0(nf, nf * p) - nf * q
        } else {
            nf * p.ln()
        };
        return lc.exp();
    }
    let kf = k as f64;
    let rest = nf - kf;
    let lc = stirlerr(nf) - stirlerr(kf) - stirlerr(rest) - bd0(kf, nf * p) - bd0(rest, nf * q);
    let lf = (2.0 * PI).ln() + kf.ln() + (-kf / nf).ln_1p();
    (lc - 0.5 * lf).exp()
}

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Exact upper tails of Binomial(trials, success_prob).
///
/// All `trials + 1` tails are tabulated on construction. Tails above the mode
/// are summed from the top; tails at or below it are taken as one minus the
/// (small) lower sum, so both sides keep full relative precision.
#[derive(Debug, Clone)]
pub struct BinomialTail {
    trials: u64,
    success_prob: f64,
    /// upper[k] = P(B ≥ k) for k in 0..=trials+1, filled above the split.
    upper: Vec<f64>,
    /// lower[k] = P(B ≤ k), filled below the split.
    lower: Vec<f64>,
    split: u64,
}

impl BinomialTail {
    pub fn new(trials: u64, success_prob: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&success_prob) {
            return Err(Error::invalid(
                "success_prob",
                format!("{success_prob} is not a probability"),
            ));
        }
        let q = 1.0 - success_prob;
        let len = trials as usize + 1;
        let pmf: Vec<f64> = (0..=trials)
            .map(|k| binomial_pmf(k, trials, success_prob, q))
            .collect();

        let split = ((trials as f64 + 1.0) * success_prob).floor() as u64;
        let split = split.min(trials);

        let mut upper = vec![0.0; len + 1];
        let mut acc = CompensatedSum::default();
        for k in (split as usize + 1..len).rev() {
            acc.add(pmf[k]);
            upper[k] = acc.value();
        }
        let mut lower = vec![0.0; len];
        let mut acc = CompensatedSum::default();
        for k in 0..=split as usize {
            acc.add(pmf[k]);
            lower[k] = acc.value();
        }
        Ok(Self {
            trials,
            success_prob,
            upper,
            lower,
            split,
        })
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn success_prob(&self) -> f64 {
        self.success_prob
    }

    /// P(B ≥ k). Arguments at or below zero give 1, above `trials` give 0.
    pub fn tail_at_least(&self, k: i64) -> f64 {
        if k <= 0 {
            return 1.0;
        }
        let k = k as u64;
        if k > self.trials {
            0.0
        } else if k > self.split {
            self.upper[k as usize]
        } else {
            (1.0 - self.lower[k as usize - 1]).max(0.0)
        }
    }
}

/// P(B ≥ k) for B ~ Binomial(trials, success_prob).
pub fn binomial_tail(trials: u64, success_prob: f64, k: i64) -> Result<f64> {
    Ok(BinomialTail::new(trials, success_prob)?.tail_at_least(k))
}

/// SplitMix64 finalizer, used to derive decorrelated seeds from an index.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A deterministic stream of random draws addressed by `(seed, stream_id)`.
///
/// Streams are ChaCha8 keystreams: the seed selects the key and the stream id
/// the nonce, so any two distinct ids are independent and can be generated in
/// any order or on any thread.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Another stream under the same seed.
    pub fn substream(&self, stream_id: u64) -> Self {
        Self::new(self.seed, stream_id)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random()
    }
}
