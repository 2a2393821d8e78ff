use rand::seq::SliceRandom;
use rand::Rng;

use crate::guidance::{apply_mask_to_policy, softmax};
use crate::neural::{ActorCritic, Adam, Gradients};

use super::{normalize_advantages, Advantages, PpoConfig, PpoError, RolloutBuffer};

/// Sample means over every minibatch of one update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Fraction of samples whose ratio left `[1 - eps, 1 + eps]`.
    pub clip_fraction: f64,
}

/// Runs `config.epochs` passes of clipped-surrogate minibatch updates.
///
/// Advantages are normalised over the whole batch before the first epoch.
pub fn ppo_update<R: Rng + ?Sized>(
    net: &mut ActorCritic,
    adam: &mut Adam,
    buffer: &RolloutBuffer,
    advantages: &Advantages,
    config: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats, PpoError> {
    let len = buffer.len();
    if len == 0 {
        return Ok(UpdateStats::default());
    }
    let mut adv = advantages.advantages.clone();
    normalize_advantages(&mut adv);

    let minibatches = config.minibatches.clamp(1, len);
    let mut order: Vec<usize> = (0..len).collect();
    let mut grads = net.zero_gradients();
    let mut totals = UpdateStats::default();
    let mut samples = 0usize;

    for _ in 0..config.epochs {
        order.shuffle(rng);
        for m in 0..minibatches {
            let batch = &order[m * len / minibatches..(m + 1) * len / minibatches];
            if batch.is_empty() {
                continue;
            }
            grads.reset();
            let sums = minibatch_gradient(net, buffer, &adv, &advantages.returns, batch, config, &mut grads)?;
            totals.policy_loss += sums.policy_loss;
            totals.value_loss += sums.value_loss;
            totals.entropy += sums.entropy;
            totals.clip_fraction += sums.clip_fraction;
            samples += batch.len();
            grads.clip_norm(config.grad_clip_norm);
            adam.step(net.params_mut(), grads.values(), config.learning_rate);
        }
    }
    let n = samples as f64;
    Ok(UpdateStats {
        policy_loss: totals.policy_loss / n,
        value_loss: totals.value_loss / n,
        entropy: totals.entropy / n,
        clip_fraction: totals.clip_fraction / n,
    })
}

/// Accumulates into `grads` the gradient of the minibatch loss
/// `mean(-min(rA, clip(r)A)) + value_coef * mean((V - G)^2) - entropy_coef * mean(H)`.
///
/// Returns per-sample sums (not means) of the loss terms, with the clip count
/// in `clip_fraction`.
fn minibatch_gradient(
    net: &ActorCritic,
    buffer: &RolloutBuffer,
    advantages: &[f64],
    returns: &[f64],
    batch: &[usize],
    config: &PpoConfig,
    grads: &mut Gradients,
) -> Result<UpdateStats, PpoError> {
    let scale = 1.0 / batch.len() as f64;
    let mut sums = UpdateStats::default();
    let mut grad_logits = Vec::new();
    for &i in batch {
        let cache = net.forward_cached(buffer.observation(i))?;
        let out = cache.output();
        let sample = sample_terms(&out.logits, out.value, buffer, advantages, returns, i, config);
        let probs = &sample.probs;
        let action = buffer.actions[i];
        // gradient flows only through the unclipped branch when it is the minimum
        let d_log_prob = if sample.unclipped <= sample.clipped { -sample.unclipped } else { 0.0 };

        grad_logits.clear();
        grad_logits.extend(probs.iter().enumerate().map(|(j, &p)| {
            if p == 0.0 {
                return 0.0;
            }
            let indicator = if j == action { 1.0 } else { 0.0 };
            let policy = d_log_prob * (indicator - p);
            let entropy_term = config.entropy_coef * p * (p.ln() + sample.entropy);
            (policy + entropy_term) * scale
        }));
        let grad_value = config.value_coef * 2.0 * sample.value_error * scale;
        net.backward(&cache, &grad_logits, grad_value, grads)?;

        sums.policy_loss += -sample.unclipped.min(sample.clipped);
        sums.value_loss += sample.value_error * sample.value_error;
        sums.entropy += sample.entropy;
        if (sample.ratio - 1.0).abs() > config.clip_eps {
            sums.clip_fraction += 1.0;
        }
    }
    Ok(sums)
}

struct SampleTerms {
    probs: Vec<f64>,
    ratio: f64,
    unclipped: f64,
    clipped: f64,
    entropy: f64,
    value_error: f64,
}

fn sample_terms(
    logits: &[f64],
    value: f64,
    buffer: &RolloutBuffer,
    advantages: &[f64],
    returns: &[f64],
    i: usize,
    config: &PpoConfig,
) -> SampleTerms {
    let probs = match buffer.mask(i) {
        Some(mask) => apply_mask_to_policy(logits, mask).expect("stored mask matches action count"),
        None => softmax(logits),
    };
    let ratio = (probs[buffer.actions[i]].ln() - buffer.log_probs[i]).exp();
    let a = advantages[i];
    let entropy = probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
    SampleTerms {
        ratio,
        unclipped: ratio * a,
        clipped: ratio.clamp(1.0 - config.clip_eps, 1.0 + config.clip_eps) * a,
        entropy,
        value_error: value - returns[i],
        probs,
    }
}
