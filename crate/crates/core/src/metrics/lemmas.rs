use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionReport {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub e0: f64,
    pub iterations: usize,
    /// `ceil(alpha gamma)`, from where the general bound applies.
    pub threshold: usize,
    /// `max_{k >= threshold} k e_k / max(beta gamma^2/(alpha gamma - 1), threshold e_threshold)`.
    pub general_max_ratio: f64,
    /// `max_{k >= 2} e_k alpha^2 k / (8 beta)` when `gamma = 2/alpha`.
    pub tight_max_ratio: Option<f64>,
    pub first_violation: Option<usize>,
    pub passed: bool,
}

const SLACK: f64 = 1e-12;

/// Simulates `e_{k+1} = max(0, (1 - alpha gamma_k) e_k + beta gamma_k^2)` with
/// `gamma_0 = gamma`, `gamma_k = gamma/k`, and checks
/// `e_k <= max(beta gamma^2/(alpha gamma - 1), K e_K) / k` for `k >= K = ceil(alpha gamma)`
/// and, when `gamma = 2/alpha`, `e_k <= 8 beta / (alpha^2 k)` for `k >= 2`.
///
/// The sequence is kept at zero when the equality recursion would go negative: the
/// bounded quantity is nonnegative, and for `k < K` the coefficient `1 - alpha gamma_k`
/// is negative, so zero is the largest value a nonnegative sequence can take there.
pub fn verify_recursion_lemma(alpha: f64, beta: f64, gamma: f64, e0: f64, iterations: usize) -> Result<RecursionReport> {
    for (name, v) in [("alpha", alpha), ("gamma", gamma)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(invalid(name, format!("{v} is not positive")));
        }
    }
    if !(beta.is_finite() && beta >= 0.0) || !(e0.is_finite() && e0 >= 0.0) {
        return Err(invalid("beta", "beta and e0 must be nonnegative"));
    }
    if alpha * gamma <= 1.0 {
        return Err(invalid("gamma", format!("alpha gamma = {} must exceed 1", alpha * gamma)));
    }
    let threshold = (alpha * gamma).ceil() as usize;
    let tight = ((gamma - 2.0 / alpha).abs() <= 1e-12 * gamma).then_some(());
    let mut e = e0;
    let mut e_threshold = if threshold == 0 { e0 } else { f64::NAN };
    let mut general_max = 0.0f64;
    let mut tight_max = 0.0f64;
    let mut first_violation = None;
    for k in 0..=iterations {
        if k == threshold {
            e_threshold = e;
        }
        if k >= threshold && k >= 1 {
            let c = (beta * gamma * gamma / (alpha * gamma - 1.0)).max(threshold as f64 * e_threshold);
            let ratio = if c > 0.0 {
                k as f64 * e / c
            } else if e > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            general_max = general_max.max(ratio);
            if ratio > 1.0 + SLACK && first_violation.is_none() {
                first_violation = Some(k);
            }
        }
        if tight.is_some() && k >= 2 {
            let ratio = if beta > 0.0 {
                e * alpha * alpha * k as f64 / (8.0 * beta)
            } else if e > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            tight_max = tight_max.max(ratio);
            if ratio > 1.0 + SLACK && first_violation.is_none() {
                first_violation = Some(k);
            }
        }
        if k == iterations {
            break;
        }
        let g = if k == 0 { gamma } else { gamma / k as f64 };
        e = ((1.0 - alpha * g) * e + beta * g * g).max(0.0);
    }
    Ok(RecursionReport {
        alpha,
        beta,
        gamma,
        e0,
        iterations,
        threshold,
        general_max_ratio: general_max,
        tight_max_ratio: tight.map(|_| tight_max),
        first_violation,
        passed: first_violation.is_none(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumStatus {
    Pass,
    Fail,
    /// `K` does not exceed the rate threshold, so the bounds are not claimed.
    ThresholdNotMet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepsizeSumReport {
    pub gamma0: f64,
    pub r: f64,
    pub iterations: usize,
    pub threshold: usize,
    /// `sum_{k=0}^{K} gamma_k^{r+1}`.
    pub power_sum: f64,
    pub power_sum_upper: f64,
    /// `sum_{k=0}^{K-1} gamma_k^r`.
    pub weight_sum: f64,
    pub weight_sum_lower: f64,
    pub status: SumStatus,
}

/// `max(ceil(((3 - r)/2)^(2/(1-r))), 3)`; the rates hold for `K` strictly above it.
pub fn stepsize_sum_threshold(r: f64) -> usize {
    let t = ((3.0 - r) / 2.0).powf(2.0 / (1.0 - r)).ceil();
    (t as usize).max(3)
}

/// Checks the two estimates for `gamma_k = gamma_0/sqrt(k+1)` by direct summation:
/// `sum_{k<=K} gamma_k^{r+1} <= gamma_0^{r+1}(1 + ((K+2)^{(1-r)/2} - 1)/((1-r)/2))` and
/// `sum_{k<K} gamma_k^r >= gamma_0^r (K+1)^{1-r/2} / (2(1 - r/2))`.
pub fn verify_stepsize_sums(gamma0: f64, r: f64, iterations: usize) -> Result<StepsizeSumReport> {
    if !(gamma0.is_finite() && gamma0 > 0.0) {
        return Err(invalid("gamma0", format!("{gamma0} is not positive")));
    }
    if !(r.is_finite() && r < 1.0) {
        return Err(invalid("r", format!("{r} must be below 1")));
    }
    let k_max = iterations;
    let mut power_sum = 0.0;
    let mut weight_sum = 0.0;
    for k in 0..=k_max {
        let g = gamma0 / ((k + 1) as f64).sqrt();
        power_sum += g.powf(r + 1.0);
        if k < k_max {
            weight_sum += g.powf(r);
        }
    }
    let h = 0.5 * (1.0 - r);
    let kf = k_max as f64;
    let power_sum_upper = gamma0.powf(r + 1.0) * (1.0 + ((kf + 2.0).powf(h) - 1.0) / h);
    let weight_sum_lower = gamma0.powf(r) * (kf + 1.0).powf(1.0 - 0.5 * r) / (2.0 * (1.0 - 0.5 * r));
    let threshold = stepsize_sum_threshold(r);
    let status = if k_max <= threshold {
        SumStatus::ThresholdNotMet
    } else if power_sum <= power_sum_upper * (1.0 + SLACK) && weight_sum >= weight_sum_lower * (1.0 - SLACK) {
        SumStatus::Pass
    } else {
        SumStatus::Fail
    };
    Ok(StepsizeSumReport {
        gamma0,
        r,
        iterations,
        threshold,
        power_sum,
        power_sum_upper,
        weight_sum,
        weight_sum_lower,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tight_bound_example() {
        let r = verify_recursion_lemma(1.0, 1.0, 2.0, 10.0, 100_000).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.tight_max_ratio.unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn zero_noise_collapses() {
        let r = verify_recursion_lemma(1.0, 0.0, 2.0, 5.0, 100).unwrap();
        assert!(r.passed);
        assert_eq!(r.tight_max_ratio, Some(0.0));
    }

    #[test]
    fn general_bound_example() {
        let r = verify_recursion_lemma(1.0, 1.0, 3.0, 10.0, 10_000).unwrap();
        assert_eq!(r.threshold, 3);
        assert!(r.passed);
        assert!(r.tight_max_ratio.is_none());
    }

    #[test]
    fn precondition_enforced() {
        assert!(verify_recursion_lemma(1.0, 1.0, 0.5, 1.0, 10).is_err());
    }

    #[test]
    fn sums_examples() {
        assert_eq!(verify_stepsize_sums(1.0, 0.0, 100).unwrap().status, SumStatus::Pass);
        assert_eq!(verify_stepsize_sums(2.0, 0.5, 10_000).unwrap().status, SumStatus::Pass);
        assert_eq!(
            verify_stepsize_sums(1.0, 0.0, 2).unwrap().status,
            SumStatus::ThresholdNotMet
        );
        assert!(verify_stepsize_sums(1.0, 1.0, 10).is_err());
    }

    #[test]
    fn threshold_values() {
        // ((3 - r)/2)^(2/(1-r)) stays below e, so the floor of 3 always wins
        for r in [-5.0, -1.0, 0.0, 0.5, 0.9, 0.999] {
            assert_eq!(stepsize_sum_threshold(r), 3);
        }
    }
}
