//! Exact reference objectives and gradients over an enumerated support.
//!
//! These brute-force evaluations exist to check the sampled estimator and
//! the hand-derived model gradients against ground truth on toy instances.
//! Nothing here is used on real-sized vocabularies.

use crate::augment::AugmentedSample;
use crate::data::Sentence;
use crate::error::{Error, Result};
use crate::objectives::math::{alpha_divergence, log_softmax, log_sum_exp, FiniteDist, KahanSum};
use crate::objectives::weights::ObjectiveConfig;

/// All five exact objective values over one enumerated outcome set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValues {
    /// Negative log-likelihood of the reference outcome.
    pub ml: f64,
    /// Negative expected reward under the model.
    pub expected_reward: f64,
    /// Negative expected reward minus tau times model entropy.
    pub entropy_regularized: f64,
    /// Cross-entropy from the payoff distribution to the model.
    pub raml: f64,
    /// Tau times the alpha-divergence from model to payoff distribution.
    pub alpha_dimt: f64,
}

/// The payoff distribution `q[y] = exp(r[y]/tau) / Z` over the enumerated
/// support, along with `ln Z`.
pub fn payoff_distribution(rewards: &[f64], tau: f64) -> Result<(FiniteDist, f64)> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::config(format!("tau must be > 0, got {tau}")));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::non_finite("reward table".to_string()));
    }
    let scaled: Vec<f64> = rewards.iter().map(|&r| r / tau).collect();
    let log_z = log_sum_exp(&scaled)?;
    let probs: Vec<f64> = scaled.iter().map(|&s| (s - log_z).exp()).collect();
    Ok((FiniteDist::new(probs)?, log_z))
}

/// Evaluates every objective exactly. `y_star` indexes the reference
/// outcome within the enumerated support. Outcomes the model assigns zero
/// probability make `ml` or `raml` infinite rather than erroring.
pub fn oracle_objectives(
    p: &FiniteDist,
    rewards: &[f64],
    y_star: usize,
    cfg: &ObjectiveConfig,
) -> Result<ObjectiveValues> {
    cfg.validate()?;
    if rewards.len() != p.len() {
        return Err(Error::domain(format!(
            "{} rewards for a support of {}",
            rewards.len(),
            p.len()
        )));
    }
    if y_star >= p.len() {
        return Err(Error::domain(format!(
            "reference index {y_star} outside support of {}",
            p.len()
        )));
    }
    let (q_tau, _log_z) = payoff_distribution(rewards, cfg.tau)?;

    let ml = -p.probs()[y_star].ln();
    let mut reward_sum = KahanSum::default();
    for (&pp, &r) in p.probs().iter().zip(rewards) {
        reward_sum.add(pp * r);
    }
    let expected_reward = -reward_sum.value();
    let entropy_regularized = expected_reward - cfg.tau * p.entropy();
    let mut cross = KahanSum::default();
    let mut raml = 0.0;
    for (&qq, &pp) in q_tau.probs().iter().zip(p.probs()) {
        if qq == 0.0 {
            continue;
        }
        if pp == 0.0 {
            raml = f64::INFINITY;
            break;
        }
        cross.add(-qq * pp.ln());
    }
    if raml == 0.0 {
        raml = cross.value();
    }
    let alpha_dimt = cfg.tau * alpha_divergence(p, &q_tau, cfg.effective_alpha())?;

    Ok(ObjectiveValues {
        ml,
        expected_reward,
        entropy_regularized,
        raml,
        alpha_dimt,
    })
}

fn check_gradient_table(log_p: &[f64], grad_log_p: &[Vec<f64>], rewards: &[f64]) -> Result<usize> {
    if log_p.len() != rewards.len() || grad_log_p.len() != rewards.len() {
        return Err(Error::domain(format!(
            "support sizes disagree: {} log-probs, {} gradients, {} rewards",
            log_p.len(),
            grad_log_p.len(),
            rewards.len()
        )));
    }
    if log_p.iter().any(|lp| !lp.is_finite()) {
        return Err(Error::non_finite("model log-probability table".to_string()));
    }
    let dim = grad_log_p.first().map_or(0, Vec::len);
    if grad_log_p.iter().any(|g| g.len() != dim) {
        return Err(Error::domain("ragged gradient table".to_string()));
    }
    Ok(dim)
}

/// Exact objective gradient
/// `-sum_y (tau/(1-alpha)) p^alpha(y) q_tau^(1-alpha)(y) grad log p(y)`
/// with the prefactor and the normalized payoff distribution included.
///
/// `grad_log_p[y]` is the gradient of `log p(y)` in any fixed parameter
/// coordinate system. The model must be normalized over the enumerated
/// support; only then does the expression converge at both alpha limits.
pub fn oracle_gradient_alpha(
    log_p: &[f64],
    grad_log_p: &[Vec<f64>],
    rewards: &[f64],
    cfg: &ObjectiveConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let dim = check_gradient_table(log_p, grad_log_p, rewards)?;
    let alpha = cfg.effective_alpha();
    let beta = 1.0 - alpha;
    let scaled: Vec<f64> = rewards.iter().map(|&r| r / cfg.tau).collect();
    let log_z = log_sum_exp(&scaled)?;
    let prefactor = cfg.tau / beta;

    let mut grad = vec![0.0; dim];
    for ((&lp, g), &s) in log_p.iter().zip(grad_log_p).zip(&scaled) {
        let weight = prefactor * (alpha * lp + beta * (s - log_z)).exp();
        for (acc, &gd) in grad.iter_mut().zip(g) {
            *acc -= weight * gd;
        }
    }
    Ok(grad)
}

/// Exact gradient of the cross-entropy objective, `-sum_y q_tau(y) grad
/// log p(y)`. The alpha gradient approaches tau times this as alpha -> 0.
pub fn oracle_gradient_raml(
    grad_log_p: &[Vec<f64>],
    rewards: &[f64],
    tau: f64,
) -> Result<Vec<f64>> {
    let zeros = vec![0.0; rewards.len()];
    let dim = check_gradient_table(&zeros, grad_log_p, rewards)?;
    let (q_tau, _) = payoff_distribution(rewards, tau)?;
    let mut grad = vec![0.0; dim];
    for (&q, g) in q_tau.probs().iter().zip(grad_log_p) {
        for (acc, &gd) in grad.iter_mut().zip(g) {
            *acc -= q * gd;
        }
    }
    Ok(grad)
}

/// Exact gradient of the entropy-regularized objective, evaluated as
/// `-sum_y p(y) (r(y) - tau log p(y)) grad log p(y)`. The alpha gradient
/// approaches this as alpha -> 1. On a support the model normalizes over,
/// `sum_y p(y) grad log p(y) = 0`, so any constant shift of the payoff
/// leaves the value unchanged.
pub fn oracle_gradient_entropy_reg(
    log_p: &[f64],
    grad_log_p: &[Vec<f64>],
    rewards: &[f64],
    tau: f64,
) -> Result<Vec<f64>> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::config(format!("tau must be > 0, got {tau}")));
    }
    let dim = check_gradient_table(log_p, grad_log_p, rewards)?;
    let mut grad = vec![0.0; dim];
    for ((&lp, g), &r) in log_p.iter().zip(grad_log_p).zip(rewards) {
        let weight = lp.exp() * (r - tau * lp);
        for (acc, &gd) in grad.iter_mut().zip(g) {
            *acc -= weight * gd;
        }
    }
    Ok(grad)
}

/// A minimal differentiable model over an enumerated support: one logit per
/// outcome, probabilities by softmax. Exists so gradient oracles can be
/// checked against finite differences and against each other on supports
/// the model is exactly normalized over.
#[derive(Debug, Clone)]
pub struct SoftmaxModel {
    logits: Vec<f64>,
}

impl SoftmaxModel {
    pub fn new(logits: Vec<f64>) -> Result<Self> {
        if logits.is_empty() {
            return Err(Error::domain("softmax over an empty support"));
        }
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(Error::non_finite("softmax logits".to_string()));
        }
        Ok(SoftmaxModel { logits })
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn log_probs(&self) -> Vec<f64> {
        log_softmax(&self.logits).expect("finite logits")
    }

    pub fn dist(&self) -> FiniteDist {
        FiniteDist::from_logits(&self.logits).expect("finite logits")
    }

    /// Row y holds `d log p(y) / d logits = e_y - p`.
    pub fn grad_log_probs(&self) -> Vec<Vec<f64>> {
        let p: Vec<f64> = self.log_probs().iter().map(|&lp| lp.exp()).collect();
        (0..p.len())
            .map(|y| {
                let mut row: Vec<f64> = p.iter().map(|&pp| -pp).collect();
                row[y] += 1.0;
                row
            })
            .collect()
    }
}

/// Wraps an enumerated reward ball as a sample set drawn from the uniform
/// proposal over it. Every element appears once with `log_q0 = -ln n`; the
/// constant proposal cancels in the per-context softmax, so the resulting
/// weights are exactly the normalized `p^alpha q_tau^(1-alpha)` the oracle
/// gradient uses.
pub fn ball_as_uniform_samples(
    pair_id: usize,
    ball: &[(Sentence, usize)],
) -> Result<Vec<AugmentedSample>> {
    if ball.is_empty() {
        return Err(Error::domain("empty outcome ball".to_string()));
    }
    let log_q0 = -(ball.len() as f64).ln();
    Ok(ball
        .iter()
        .map(|(y_tilde, e)| AugmentedSample {
            pair_id,
            y_tilde: y_tilde.clone(),
            e: *e,
            reward: -(*e as f64),
            log_q0,
        })
        .collect())
}

/// `||a - b|| / max(||a||, ||b||)`, the scale-free gradient comparison used
/// by the endpoint checks. Zero when both vectors are zero.
pub fn relative_l2_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::domain(format!(
            "vector lengths {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(diff / scale)
}

/// Cosine similarity between two gradient directions.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::domain(format!(
            "vector lengths {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::domain("cosine of a zero vector".to_string()));
    }
    Ok(dot / (na * nb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::weights::ObjectiveKind;

    fn toy() -> (FiniteDist, Vec<f64>, ObjectiveConfig) {
        let p = FiniteDist::new(vec![0.5, 0.3, 0.2]).unwrap();
        let rewards = vec![0.0, -1.0, -2.0];
        let cfg = ObjectiveConfig {
            kind: ObjectiveKind::AlphaDimt,
            alpha: 0.5,
            tau: 3.0,
        };
        (p, rewards, cfg)
    }

    // Expected values in the next few tests are frozen from a
    // high-precision independent evaluation of the defining formulas.

    #[test]
    fn toy_payoff_distribution() {
        let (_, rewards, cfg) = toy();
        let (q, log_z) = payoff_distribution(&rewards, cfg.tau).unwrap();
        let expected = [
            0.44844086379904073,
            0.32132191985276878,
            0.23023721634819049,
        ];
        for (got, want) in q.probs().iter().zip(expected) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
        assert!((log_z - 0.8019784594675747).abs() < 1e-15, "log_z = {log_z}");
    }

    #[test]
    fn toy_objective_values() {
        let (p, rewards, cfg) = toy();
        let v = oracle_objectives(&p, &rewards, 0, &cfg).unwrap();
        assert!((v.ml - 0.6931471805599453).abs() < 1e-15, "ml = {}", v.ml);
        assert!((v.expected_reward - 0.7).abs() < 1e-15, "L* = {}", v.expected_reward);
        assert!(
            (v.entropy_regularized - -2.3889590421937206).abs() < 1e-14,
            "L*_tau = {}",
            v.entropy_regularized
        );
        assert!((v.raml - 1.0682508781707732).abs() < 1e-14, "raml = {}", v.raml);
        assert!(
            (v.alpha_dimt - 0.016993692107459039).abs() < 1e-14,
            "alpha objective = {}",
            v.alpha_dimt
        );
    }

    #[test]
    fn toy_objective_identities() {
        // tau*KL(p||q_tau) = entropy_regularized + tau*ln Z, and
        // tau*KL(q_tau||p) - tau*raml = -tau*H(q_tau).
        let (p, rewards, cfg) = toy();
        let v = oracle_objectives(&p, &rewards, 0, &cfg).unwrap();
        let (q_tau, log_z) = payoff_distribution(&rewards, cfg.tau).unwrap();

        let kl_pq = alpha_divergence(&p, &q_tau, 1.0).unwrap();
        let lhs_a = cfg.tau * kl_pq - v.entropy_regularized;
        assert!((lhs_a - cfg.tau * log_z).abs() < 1e-13, "identity A: {lhs_a}");
        assert!((cfg.tau * log_z - 2.405935378402724).abs() < 1e-14);

        let kl_qp = alpha_divergence(&q_tau, &p, 1.0).unwrap();
        let lhs_b = cfg.tau * kl_qp - cfg.tau * v.raml;
        let rhs_b = -cfg.tau * q_tau.entropy();
        assert!((lhs_b - rhs_b).abs() < 1e-13, "identity B: {lhs_b} vs {rhs_b}");
        assert!((rhs_b - -3.1877317309518737).abs() < 1e-13);
    }

    #[test]
    fn zero_objective_when_model_matches_payoff() {
        // Rewards tau*ln p + const make q_tau coincide with p exactly.
        let model = SoftmaxModel::new(vec![0.4, -0.2, 1.1, 0.0]).unwrap();
        let p = model.dist();
        let tau = 3.0;
        let rewards: Vec<f64> = model.log_probs().iter().map(|&lp| tau * lp + 5.0).collect();
        for alpha in [0.0, 0.1, 0.5, 0.9] {
            let cfg = ObjectiveConfig {
                kind: ObjectiveKind::AlphaDimt,
                alpha,
                tau,
            };
            let v = oracle_objectives(&p, &rewards, 0, &cfg).unwrap();
            assert!(
                v.alpha_dimt.abs() < 1e-12,
                "alpha = {alpha}: objective = {}",
                v.alpha_dimt
            );
        }
    }

    #[test]
    fn small_tau_recovers_expected_reward() {
        let (p, rewards, mut cfg) = toy();
        cfg.tau = 1e-4;
        let v = oracle_objectives(&p, &rewards, 0, &cfg).unwrap();
        // Entropy regularization vanishes linearly in tau.
        let bound = cfg.tau * (p.len() as f64).ln();
        assert!(
            (v.entropy_regularized - v.expected_reward).abs() <= bound,
            "{} vs {}",
            v.entropy_regularized,
            v.expected_reward
        );
    }

    fn endpoint_cfg(alpha: f64, tau: f64) -> ObjectiveConfig {
        ObjectiveConfig {
            kind: ObjectiveKind::AlphaDimt,
            alpha,
            tau,
        }
    }

    #[test]
    fn gradient_matches_scaled_raml_near_alpha_zero() {
        let model = SoftmaxModel::new(vec![0.5, -0.3, 0.8, 0.1, -0.6]).unwrap();
        let rewards = vec![0.0, -1.0, -2.0, -1.0, -3.0];
        let tau = 3.0;
        let near = oracle_gradient_alpha(
            &model.log_probs(),
            &model.grad_log_probs(),
            &rewards,
            &endpoint_cfg(1e-6, tau),
        )
        .unwrap();
        let raml = oracle_gradient_raml(&model.grad_log_probs(), &rewards, tau).unwrap();
        let scaled: Vec<f64> = raml.iter().map(|&g| tau * g).collect();
        let rel = relative_l2_distance(&near, &scaled).unwrap();
        assert!(rel <= 1e-4, "relative distance {rel}");
    }

    #[test]
    fn gradient_matches_entropy_reg_near_alpha_one() {
        let model = SoftmaxModel::new(vec![0.5, -0.3, 0.8, 0.1, -0.6]).unwrap();
        let rewards = vec![0.0, -1.0, -2.0, -1.0, -3.0];
        let tau = 3.0;
        let near = oracle_gradient_alpha(
            &model.log_probs(),
            &model.grad_log_probs(),
            &rewards,
            &endpoint_cfg(1.0 - 1e-6, tau),
        )
        .unwrap();
        let ent = oracle_gradient_entropy_reg(
            &model.log_probs(),
            &model.grad_log_probs(),
            &rewards,
            tau,
        )
        .unwrap();
        let rel = relative_l2_distance(&near, &ent).unwrap();
        assert!(rel <= 1e-3, "relative distance {rel}");
    }

    #[test]
    fn gradient_matches_finite_differences_at_half() {
        let logits = vec![0.3, -0.4, 0.9, 0.0];
        let rewards = vec![0.0, -2.0, -1.0, -3.0];
        let cfg = endpoint_cfg(0.5, 3.0);

        let model = SoftmaxModel::new(logits.clone()).unwrap();
        let analytic = oracle_gradient_alpha(
            &model.log_probs(),
            &model.grad_log_probs(),
            &rewards,
            &cfg,
        )
        .unwrap();

        let objective = |theta: &[f64]| -> f64 {
            let m = SoftmaxModel::new(theta.to_vec()).unwrap();
            let v = oracle_objectives(&m.dist(), &rewards, 0, &cfg).unwrap();
            v.alpha_dimt
        };
        let h = 1e-6;
        let mut numeric = vec![0.0; logits.len()];
        for d in 0..logits.len() {
            let mut hi = logits.clone();
            let mut lo = logits.clone();
            hi[d] += h;
            lo[d] -= h;
            numeric[d] = (objective(&hi) - objective(&lo)) / (2.0 * h);
        }
        let rel = relative_l2_distance(&analytic, &numeric).unwrap();
        assert!(rel <= 1e-6, "relative distance {rel}");
    }

    #[test]
    fn raml_gradient_hand_case() {
        // Two outcomes, equal rewards: q_tau uniform, so the gradient is
        // minus the average of the log-prob gradients.
        let grads = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let g = oracle_gradient_raml(&grads, &[-1.0, -1.0], 2.0).unwrap();
        assert!((g[0] - -0.5).abs() < 1e-15);
        assert!((g[1] - -0.5).abs() < 1e-15);
    }

    #[test]
    fn uniform_ball_samples() {
        let ball = vec![
            (Sentence::new(vec![3, 4]), 0),
            (Sentence::new(vec![3, 5]), 1),
            (Sentence::new(vec![4, 4]), 1),
        ];
        let samples = ball_as_uniform_samples(9, &ball).unwrap();
        assert_eq!(samples.len(), 3);
        for s in &samples {
            assert_eq!(s.pair_id, 9);
            assert!((s.log_q0 - -(3f64).ln()).abs() < 1e-15);
            assert_eq!(s.reward, -(s.e as f64));
        }
        assert!(ball_as_uniform_samples(0, &[]).is_err());
    }

    #[test]
    fn vector_comparisons() {
        assert_eq!(relative_l2_distance(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        let d = relative_l2_distance(&[2.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
        assert!((cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap()).abs() < 1e-15);
        assert!((cosine_similarity(&[2.0, 2.0], &[1.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(cosine_similarity(&[0.0], &[1.0]).is_err());
        assert!(relative_l2_distance(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn gradient_input_validation() {
        let cfg = endpoint_cfg(0.5, 3.0);
        assert!(oracle_gradient_alpha(&[0.0], &[vec![1.0]], &[0.0, 1.0], &cfg).is_err());
        assert!(oracle_gradient_alpha(
            &[0.0, f64::NAN],
            &[vec![1.0], vec![1.0]],
            &[0.0, 1.0],
            &cfg
        )
        .is_err());
        assert!(oracle_gradient_alpha(
            &[0.0, -1.0],
            &[vec![1.0], vec![1.0, 2.0]],
            &[0.0, 1.0],
            &cfg
        )
        .is_err());
        assert!(payoff_distribution(&[0.0, -1.0], 0.0).is_err());
    }
}
