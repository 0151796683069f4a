//! Finite distributions, the generalized logarithm, and the alpha-divergence.

use crate::error::{Error, Result};

/// Alpha values within this distance of 0 or 1 are evaluated as the KL
/// limits instead of through the `1/(alpha*(1-alpha))` form.
pub const ALPHA_ENDPOINT_DELTA: f64 = 1e-6;

/// A probability distribution over an explicit finite support, indexed by
/// position.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDist {
    probs: Vec<f64>,
}

impl FiniteDist {
    /// Validates non-negativity, finiteness, and normalization within 1e-12.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::domain("distribution over an empty support"));
        }
        let mut sum = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::domain(format!("probability {p} at index {i}")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!(
                "probabilities sum to {sum}, expected 1 within 1e-12"
            )));
        }
        Ok(FiniteDist { probs })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("distribution over an empty support"));
        }
        Ok(FiniteDist {
            probs: vec![1.0 / n as f64; n],
        })
    }

    /// Softmax of arbitrary finite logits (always normalized).
    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        let log_probs = log_softmax(logits)?;
        Ok(FiniteDist {
            probs: log_probs.iter().map(|&lp| lp.exp()).collect(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Shannon entropy in nats, with `0 ln 0 = 0`.
    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>()
    }
}

/// `log_alpha(x) = (x^(1-alpha) - 1) / (1-alpha)`, the generalized logarithm
/// that recovers `ln x` as alpha approaches 1.
pub fn generalized_log(x: f64, alpha: f64) -> Result<f64> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::domain(format!("generalized_log needs x > 0, got {x}")));
    }
    if !(alpha.is_finite() && (0.0..=1.0).contains(&alpha)) {
        return Err(Error::domain(format!("generalized_log alpha {alpha} outside [0, 1]")));
    }
    let beta = 1.0 - alpha;
    if beta.abs() <= ALPHA_ENDPOINT_DELTA {
        Ok(x.ln())
    } else {
        Ok((x.powf(beta) - 1.0) / beta)
    }
}

/// Numerically stable log-softmax.
pub fn log_softmax(logits: &[f64]) -> Result<Vec<f64>> {
    let lse = log_sum_exp(logits)?;
    Ok(logits.iter().map(|&x| x - lse).collect())
}

/// `ln sum_i exp(x_i)` with max shifting. Accepts `-inf` entries; errors when
/// every entry is `-inf` (nothing to normalize against) or any entry is NaN
/// or `+inf`.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("log_sum_exp of an empty slice"));
    }
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        if v.is_nan() || v == f64::INFINITY {
            return Err(Error::domain(format!("log_sum_exp input {v}")));
        }
        max = max.max(v);
    }
    if max == f64::NEG_INFINITY {
        return Err(Error::domain("log_sum_exp of all -inf values"));
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    Ok(max + sum.ln())
}

/// `KL(a || b) = sum a ln(a/b)` with `0 ln 0 = 0`; infinite when `a` puts
/// mass where `b` has none.
fn kl_divergence(a: &FiniteDist, b: &FiniteDist) -> f64 {
    let mut sum = KahanSum::default();
    for (&pa, &pb) in a.probs().iter().zip(b.probs()) {
        if pa == 0.0 {
            continue;
        }
        if pb == 0.0 {
            return f64::INFINITY;
        }
        sum.add(pa * (pa / pb).ln());
    }
    sum.value()
}

/// Amari alpha-divergence `D_A(p || q) = (1 - sum p^a q^(1-a)) / (a (1-a))`
/// for `alpha` in the open interior, switching to the KL limits within
/// [`ALPHA_ENDPOINT_DELTA`] of the endpoints: `KL(q || p)` at the alpha->0
/// end and `KL(p || q)` at the alpha->1 end.
///
/// The interior form is evaluated per term as
/// `alpha*p + (1-alpha)*q - exp(alpha ln p + (1-alpha) ln q)`, which sums to
/// `1 - sum p^a q^(1-a)` because the linear parts sum to one, is
/// non-negative term by term (weighted AM-GM), and avoids cancellation in
/// `1 - sum` when `p` is close to `q`. Terms where `p` or `q` is zero
/// contribute only their linear part. Compensated summation keeps the total
/// exact to a few ulps.
pub fn alpha_divergence(p: &FiniteDist, q: &FiniteDist, alpha: f64) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::domain(format!(
            "alpha_divergence over mismatched supports ({} vs {})",
            p.len(),
            q.len()
        )));
    }
    if !(alpha.is_finite() && (0.0..=1.0).contains(&alpha)) {
        return Err(Error::domain(format!("alpha {alpha} outside [0, 1]")));
    }

    if alpha <= ALPHA_ENDPOINT_DELTA {
        return Ok(kl_divergence(q, p));
    }
    if alpha >= 1.0 - ALPHA_ENDPOINT_DELTA {
        return Ok(kl_divergence(p, q));
    }

    let beta = 1.0 - alpha;
    let mut sum = KahanSum::default();
    for (&pp, &qq) in p.probs().iter().zip(q.probs()) {
        let linear = alpha * pp + beta * qq;
        let geometric = if pp == 0.0 || qq == 0.0 {
            0.0
        } else {
            (alpha * pp.ln() + beta * qq.ln()).exp()
        };
        sum.add(linear - geometric);
    }
    Ok(sum.value() / (alpha * beta))
}

/// Kahan compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.compensation;
        let t = self.sum + y;
        self.compensation = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(self) -> f64 {
        self.sum
    }
}
