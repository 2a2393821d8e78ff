use super::RolloutBuffer;

/// Advantage estimates and return targets, indexed like the buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Advantages {
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

/// Generalised advantage estimation by the backward recursion.
pub fn compute_gae(buffer: &RolloutBuffer, gamma: f64, lambda: f64) -> Advantages {
    let n = buffer.num_envs;
    let steps = buffer.len() / n.max(1);
    let mut advantages = vec![0.0; buffer.len()];
    for e in 0..n {
        let mut next_adv = 0.0;
        let mut next_value = buffer.bootstrap_values[e];
        for t in (0..steps).rev() {
            let i = t * n + e;
            let live = if buffer.dones[i] { 0.0 } else { 1.0 };
            let delta = buffer.rewards[i] + gamma * next_value * live - buffer.values[i];
            next_adv = delta + gamma * lambda * live * next_adv;
            advantages[i] = next_adv;
            next_value = buffer.values[i];
        }
    }
    let returns = advantages
        .iter()
        .zip(&buffer.values)
        .map(|(a, v)| a + v)
        .collect();
    Advantages {
        advantages,
        returns,
    }
}

/// `A_t = sum_k (gamma lambda)^k delta_{t+k}`, truncated at the first done.
///
/// Quadratic in the rollout length; used to check [`compute_gae`].
pub fn gae_direct_sum(buffer: &RolloutBuffer, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = buffer.num_envs;
    let steps = buffer.len() / n.max(1);
    let delta = |t: usize, e: usize| {
        let i = t * n + e;
        let next_value = if t + 1 < steps {
            buffer.values[i + n]
        } else {
            buffer.bootstrap_values[e]
        };
        let live = if buffer.dones[i] { 0.0 } else { 1.0 };
        buffer.rewards[i] + gamma * next_value * live - buffer.values[i]
    };
    let mut out = vec![0.0; buffer.len()];
    for e in 0..n {
        for t in 0..steps {
            let mut sum = 0.0;
            let mut weight = 1.0;
            for k in t..steps {
                sum += weight * delta(k, e);
                if buffer.dones[k * n + e] {
                    break;
                }
                weight *= gamma * lambda;
            }
            out[t * n + e] = sum;
        }
    }
    out
}

/// Shifts and scales to mean 0 and (population) std 1. A constant batch is only centred.
pub fn normalize_advantages(advantages: &mut [f64]) {
    if advantages.is_empty() {
        return;
    }
    let n = advantages.len() as f64;
    let mean = advantages.iter().sum::<f64>() / n;
    for a in advantages.iter_mut() {
        *a -= mean;
    }
    let std = (advantages.iter().map(|a| a * a).sum::<f64>() / n).sqrt();
    if std > 0.0 {
        for a in advantages.iter_mut() {
            *a /= std;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn buffer(num_envs: usize, rewards: Vec<f64>, values: Vec<f64>, dones: Vec<bool>, boot: Vec<f64>) -> RolloutBuffer {
        let len = rewards.len();
        let mut b = RolloutBuffer::new(num_envs, len / num_envs, 1, false);
        b.observations = vec![0.0; len];
        b.actions = vec![0; len];
        b.log_probs = vec![0.0; len];
        b.rewards = rewards;
        b.values = values;
        b.dones = dones;
        b.bootstrap_values = boot;
        b
    }

    #[test]
    fn lambda_zero_gives_td_error() {
        let b = buffer(1, vec![1.0, 2.0, 3.0], vec![0.5, 0.25, 1.0], vec![false, false, false], vec![2.0]);
        let adv = compute_gae(&b, 0.9, 0.0);
        assert_eq!(adv.advantages, vec![1.0 + 0.9 * 0.25 - 0.5, 2.0 + 0.9 * 1.0 - 0.25, 3.0 + 0.9 * 2.0 - 1.0]);
    }

    #[test]
    fn gamma_zero_gives_reward_minus_value() {
        let b = buffer(1, vec![1.0, -2.0], vec![0.5, 0.25], vec![false, true], vec![9.0]);
        let adv = compute_gae(&b, 0.0, 0.95);
        assert_eq!(adv.advantages, vec![0.5, -2.25]);
        assert_eq!(adv.returns, vec![1.0, -2.0]);
    }

    #[test]
    fn done_cuts_bootstrap() {
        let b = buffer(1, vec![1.0], vec![0.0], vec![true], vec![100.0]);
        assert_eq!(compute_gae(&b, 0.99, 0.95).advantages, vec![1.0]);
    }

    proptest! {
        #[test]
        fn recursion_matches_direct_sum(
            num_envs in 1usize..4,
            steps in 1usize..20,
            seed in any::<u64>(),
            gamma in 0.0f64..0.999,
            lambda in 0.0f64..=1.0,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let len = num_envs * steps;
            let b = buffer(
                num_envs,
                (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                (0..len).map(|_| rng.gen_bool(0.2)).collect(),
                (0..num_envs).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            );
            let fast = compute_gae(&b, gamma, lambda).advantages;
            let slow = gae_direct_sum(&b, gamma, lambda);
            for (x, y) in fast.iter().zip(&slow) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }

        #[test]
        fn normalised_batch_has_unit_moments(values in prop::collection::vec(-100.0f64..100.0, 2..200)) {
            let mut v = values.clone();
            normalize_advantages(&mut v);
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-10);
            let spread = values.iter().any(|&x| (x - values[0]).abs() > 1e-6);
            if spread {
                let std = (v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
                prop_assert!((std - 1.0).abs() < 1e-10);
            }
        }
    }
}
