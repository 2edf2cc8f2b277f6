//! Closed-form variances, bit/probability conversions and posterior
//! interval sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{check_probability, Error, Result};
use crate::seed;

/// Products with more factors than this are taken in log space.
const LOG_SPACE_FACTORS: usize = 30;

/// Variance of the mean of `n` Bernoulli(`p`) draws: `p (1 - p) / n`.
pub fn bernoulli_variance(p: f64, n: usize) -> Result<f64> {
    check_probability(|| "p".into(), p)?;
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    Ok(p * (1.0 - p) / n as f64)
}

/// Variance of the product of independent per-stage success fractions, each
/// the mean of `n` Bernoulli draws:
/// `(prod p_i)^2 * sum_i (p_i (1 - p_i) / n) / p_i^2`.
pub fn product_estimator_variance(probs: &[f64], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let terms = stage_variance_ratios(probs, n)?;
    let mean = product(probs);
    Ok(mean * mean * terms.iter().sum::<f64>())
}

/// Per-stage `Var / E^2` terms of [`product_estimator_variance`].
pub fn stage_variance_ratios(probs: &[f64], n: usize) -> Result<Vec<f64>> {
    if probs.is_empty() {
        return Err(Error::InvalidArgument("need at least one stage".into()));
    }
    probs
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            check_probability(|| format!("probs[{i}]"), p)?;
            if p == 0.0 {
                return Err(Error::InvalidProbability {
                    what: format!("probs[{i}] (ratio undefined at zero)"),
                    value: p,
                });
            }
            Ok((p * (1.0 - p) / n as f64) / (p * p))
        })
        .collect()
}

/// `sum 1/p_i - n + 1 <= prod 1/p_i`, the inequality behind the milestone
/// estimator never having larger variance than the end-to-end one.
///
/// A relative slack of `1e-12` absorbs rounding at equality (`n = 1`).
pub fn variance_inequality_check(probs: &[f64]) -> bool {
    let n = probs.len() as f64;
    let lhs: f64 = probs.iter().map(|p| 1.0 / p).sum::<f64>() - n + 1.0;
    let rhs: f64 = probs.iter().map(|p| 1.0 / p).product();
    lhs <= rhs + 1e-12 * rhs.abs()
}

/// Closed-form and (optionally) empirical variances of the two estimators on
/// one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceBreakdown {
    pub name: String,
    pub end_to_end_variance: f64,
    pub milestone_variance: f64,
    pub per_stage_terms: Vec<f64>,
    pub inequality_holds: bool,
    pub empirical_end_to_end: Option<f64>,
    pub empirical_milestone: Option<f64>,
    /// Empirical within 15% of closed form; only judged for `R >= 1000`.
    pub end_to_end_agrees: Option<bool>,
    pub milestone_agrees: Option<bool>,
}

impl VarianceBreakdown {
    /// Closed-form variances for per-stage probabilities `probs` and `n`
    /// samples per estimator (or per stage).
    ///
    /// A zero-probability stage makes both estimators identically zero.
    pub fn closed_form(name: impl Into<String>, probs: &[f64], n: usize) -> Result<Self> {
        let truth = product(probs);
        let end_to_end = bernoulli_variance(truth, n)?;
        let (milestone, terms) = if probs.contains(&0.0) {
            for (i, &p) in probs.iter().enumerate() {
                check_probability(|| format!("probs[{i}]"), p)?;
            }
            let terms = probs
                .iter()
                .map(|&p| if p == 0.0 { f64::INFINITY } else { (1.0 - p) / (p * n as f64) })
                .collect();
            (0.0, terms)
        } else {
            (product_estimator_variance(probs, n)?, stage_variance_ratios(probs, n)?)
        };
        Ok(Self {
            name: name.into(),
            end_to_end_variance: end_to_end,
            milestone_variance: milestone,
            per_stage_terms: terms,
            inequality_holds: milestone <= end_to_end + 1e-12,
            empirical_end_to_end: None,
            empirical_milestone: None,
            end_to_end_agrees: None,
            milestone_agrees: None,
        })
    }
}

/// `2^-bits`.
pub fn bits_to_prob(bits: f64) -> f64 {
    (-bits).exp2()
}

/// `sum_{i=1}^{k} 1 / (i (i + 1))` by compensated summation. Telescopes to
/// `1 - 1/(k + 1)`.
pub fn prior_partial_sum(k: u64) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for i in 1..=k {
        let i = i as f64;
        let term = 1.0 / (i * (i + 1.0));
        let t = sum + term;
        if sum.abs() >= term.abs() {
            carry += (sum - t) + term;
        } else {
            carry += (term - t) + sum;
        }
        sum = t;
    }
    let sum = sum + carry;
    debug_assert!(k == 0 || (sum - (1.0 - 1.0 / (k as f64 + 1.0))).abs() <= 1e-12);
    sum
}

/// Product of probabilities, switching to log space for long products.
pub fn product(factors: &[f64]) -> f64 {
    if factors.len() <= LOG_SPACE_FACTORS {
        factors.iter().product()
    } else if factors.contains(&0.0) {
        0.0
    } else {
        factors.iter().map(|f| f.ln()).sum::<f64>().exp()
    }
}

/// Expected per-step expert best-of-N factor `1 / (i (i + 1))` given the
/// step has at least one productive completion, where the chosen rank `i`
/// follows the truncated geometric law `(1 - q)^(i - 1) q`.
pub fn expected_bon_step_factor(q: f64, completions: usize) -> f64 {
    if q <= 0.0 || completions == 0 {
        return 0.0;
    }
    let miss = 1.0 - q;
    let mut total = 0.0;
    let mut reach = 1.0;
    for i in 1..=completions {
        let i_f = i as f64;
        total += reach * q / (i_f * (i_f + 1.0));
        reach *= miss;
    }
    total / (1.0 - reach)
}

/// Sample mean and unbiased sample variance (`0` for fewer than two values).
pub fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Nearest-rank quantile of an ascending slice.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Pseudo-counts `(a, b)` of a Beta prior on a success rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPrior {
    pub a: f64,
    pub b: f64,
}

impl BetaPrior {
    /// `(0, 0)`: the posterior mean is the raw success fraction.
    pub const ZERO: BetaPrior = BetaPrior { a: 0.0, b: 0.0 };
    pub const UNIFORM: BetaPrior = BetaPrior { a: 1.0, b: 1.0 };

    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "beta prior parameters must be finite and non-negative, got ({a}, {b})"
            )));
        }
        Ok(Self { a, b })
    }

    /// Posterior `(alpha, beta)` after `successes` out of `trials`.
    pub fn posterior(&self, successes: usize, trials: usize) -> (f64, f64) {
        (
            successes as f64 + self.a,
            (trials - successes) as f64 + self.b,
        )
    }

    /// Posterior mean; with [`BetaPrior::ZERO`] this is `successes / trials`.
    pub fn posterior_mean(&self, successes: usize, trials: usize) -> f64 {
        let (alpha, beta) = self.posterior(successes, trials);
        if alpha + beta == 0.0 {
            return 0.0;
        }
        alpha / (alpha + beta)
    }
}

/// Exact quantile of Beta(alpha, beta), treating a zero shape parameter as a
/// point mass at the corresponding end of `[0, 1]`.
pub fn beta_quantile(alpha: f64, beta: f64, q: f64) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    if beta == 0.0 {
        return 1.0;
    }
    let dist = Beta::new(alpha, beta).expect("positive shape parameters");
    dist.inverse_cdf(q.clamp(0.0, 1.0)).clamp(0.0, 1.0)
}

const TABLE_NODES: usize = 1025;
const TABLE_LOGIT_SPAN: f64 = 20.0;

fn node_logit(j: usize) -> f64 {
    -TABLE_LOGIT_SPAN + 2.0 * TABLE_LOGIT_SPAN * j as f64 / (TABLE_NODES - 1) as f64
}

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Inverse-CDF sampler for one posterior stage.
///
/// The quantile function is tabulated on a grid uniform in `logit(u)` and
/// interpolated linearly, so the sample for a fixed uniform `u` is monotone
/// in both `u` and the stage's success count.
enum StageSampler {
    Point(f64),
    Table {
        values: Vec<f64>,
        u_lo: f64,
        u_hi: f64,
        alpha: f64,
        beta: f64,
    },
}

impl StageSampler {
    fn new(alpha: f64, beta: f64) -> Self {
        if alpha == 0.0 {
            return StageSampler::Point(0.0);
        }
        if beta == 0.0 {
            return StageSampler::Point(1.0);
        }
        let values = (0..TABLE_NODES)
            .map(|j| beta_quantile(alpha, beta, logistic(node_logit(j))))
            .collect();
        StageSampler::Table {
            values,
            u_lo: logistic(node_logit(0)),
            u_hi: logistic(node_logit(TABLE_NODES - 1)),
            alpha,
            beta,
        }
    }

    fn sample(&self, u: f64) -> f64 {
        match self {
            StageSampler::Point(v) => *v,
            StageSampler::Table {
                values,
                u_lo,
                u_hi,
                alpha,
                beta,
            } => {
                let last = TABLE_NODES - 1;
                // Beyond the grid the quantile follows the power-law tails
                // F(x) ~ x^alpha and 1 - F(x) ~ (1 - x)^beta.
                if u <= *u_lo {
                    values[0] * (u / u_lo).powf(1.0 / alpha)
                } else if u >= *u_hi {
                    1.0 - (1.0 - values[last]) * ((1.0 - u) / (1.0 - u_hi)).powf(1.0 / beta)
                } else {
                    let t = (u / (1.0 - u)).ln();
                    let x = (t + TABLE_LOGIT_SPAN) / (2.0 * TABLE_LOGIT_SPAN) * last as f64;
                    let j = (x.floor() as usize).min(last - 1);
                    let w = (x - j as f64).clamp(0.0, 1.0);
                    values[j] + w * (values[j + 1] - values[j])
                }
            }
        }
    }
}

/// Monte Carlo quantiles of `prod_i Beta(S_i + a, N_i - S_i + b)`.
///
/// Each of `draws` samples multiplies one inverse-CDF draw per stage; the
/// requested quantiles are read off the sorted products by nearest rank.
pub fn posterior_product_quantiles(
    successes: &[usize],
    trials: &[usize],
    prior: BetaPrior,
    draws: usize,
    quantiles: &[f64],
    rng_seed: u64,
) -> Result<Vec<f64>> {
    if successes.len() != trials.len() || successes.is_empty() {
        return Err(Error::InvalidArgument(
            "successes and trials must be non-empty and aligned".into(),
        ));
    }
    if draws < 1000 {
        return Err(Error::InvalidArgument(format!("need at least 1000 draws, got {draws}")));
    }
    for (i, (&s, &n)) in successes.iter().zip(trials).enumerate() {
        if s > n {
            return Err(Error::InvalidArgument(format!(
                "stage {i}: {s} successes exceed {n} trials"
            )));
        }
        if n == 0 && prior.a + prior.b == 0.0 {
            return Err(Error::InvalidArgument(format!("stage {i}: no trials and an empty prior")));
        }
    }
    for &q in quantiles {
        check_probability(|| "quantile".into(), q)?;
    }
    let samplers: Vec<StageSampler> = successes
        .iter()
        .zip(trials)
        .map(|(&s, &n)| {
            let (alpha, beta) = prior.posterior(s, n);
            StageSampler::new(alpha, beta)
        })
        .collect();

    let mut rng = seed::rng(rng_seed);
    let mut products: Vec<f64> = (0..draws)
        .map(|_| {
            samplers
                .iter()
                .map(|s| s.sample(rng.random::<f64>()))
                .product()
        })
        .collect();
    products.sort_by(f64::total_cmp);
    Ok(quantiles.iter().map(|&q| nearest_rank(&products, q)).collect())
}
