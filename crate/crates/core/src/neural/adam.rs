pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    steps: u64,
}

impl Adam {
    pub fn new(parameter_count: usize) -> Self {
        Self {
            first_moment: vec![0.0; parameter_count],
            second_moment: vec![0.0; parameter_count],
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), self.first_moment.len(), "parameter count changed");
        assert_eq!(grads.len(), params.len(), "gradient/parameter length mismatch");
        self.steps += 1;
        let t = self.steps as i32;
        let correction1 = 1.0 - ADAM_BETA1.powi(t);
        let correction2 = 1.0 - ADAM_BETA2.powi(t);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut adam = Adam::new(3);
        let mut p = vec![1.0, -2.0, 0.5];
        adam.step(&mut p, &[0.0; 3], 0.1);
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
        let mut adam = Adam::new(3);
        let mut p = vec![0.0; 3];
        let g = [0.5, -3.0, 1e-3];
        adam.step(&mut p, &g, 0.01);
        for (pi, gi) in p.iter().zip(g) {
            let expected = -0.01 * gi / (gi.abs() + ADAM_EPS);
            assert!((pi - expected).abs() < 1e-15);
            assert!((pi + 0.01 * gi.signum()).abs() < 1e-7);
        }
    }

    #[test]
    fn constant_gradient_steps_approach_lr() {
        let mut adam = Adam::new(1);
        let mut p = vec![0.0];
        let mut last = 0.0;
        for _ in 0..5000 {
            let before = p[0];
            adam.step(&mut p, &[2.5], 1e-3);
            last = p[0] - before;
        }
        assert!((last + 1e-3).abs() < 1e-9, "{last}");
        assert_eq!(adam.steps(), 5000);
    }
}
