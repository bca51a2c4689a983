use crate::network::{ModelConfig, ModelParams};
use crate::tensor::Real;

/// Momentum buffers, one per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<S> {
    pub velocity: ModelParams<S>,
    pub steps: usize,
    pub skipped: usize,
}

impl<S: Real> OptimizerState<S> {
    pub fn new(cfg: &ModelConfig) -> Self {
        Self {
            velocity: ModelParams::zeros(cfg),
            steps: 0,
            skipped: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub applied: bool,
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
    pub clipped: bool,
}

/// Classical momentum: `v ← μv + g`, `θ ← θ − ηv`, after scaling `grads` so
/// their global norm is at most `clip`. Non-finite gradients skip the step.
pub fn momentum_step<S: Real>(
    params: &mut ModelParams<S>,
    grads: &mut ModelParams<S>,
    state: &mut OptimizerState<S>,
    learning_rate: f64,
    momentum: f64,
    clip: Option<f64>,
) -> StepOutcome {
    if !grads.all_finite() {
        state.skipped += 1;
        log::warn!("non-finite gradient, skipping optimizer step {}", state.steps + state.skipped);
        return StepOutcome {
            applied: false,
            grad_norm: f64::NAN,
            clipped: false,
        };
    }
    let grad_norm = grads.global_norm();
    let clipped = match clip {
        Some(c) if grad_norm > c => {
            grads.scale(S::from_f64(c / grad_norm));
            true
        }
        _ => false,
    };
    state.velocity.scale(S::from_f64(momentum));
    state.velocity.add_scaled(grads, S::one());
    params.add_scaled(&state.velocity, S::from_f64(-learning_rate));
    state.steps += 1;
    StepOutcome {
        applied: true,
        grad_norm,
        clipped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::init_params;
    use proptest::prelude::*;

    fn cfg() -> ModelConfig {
        let mut c = ModelConfig::new(3, 4);
        c.hidden = 2;
        c.bidirectional = true;
        c
    }

    fn flat(p: &ModelParams<f64>) -> Vec<f64> {
        p.tensors().iter().flat_map(|t| t.data.to_vec()).collect()
    }

    #[test]
    fn plain_sgd_to_zero() {
        let c = cfg();
        let mut p: ModelParams<f64> = init_params(&c).unwrap();
        let mut g = p.clone();
        let mut s = OptimizerState::new(&c);
        momentum_step(&mut p, &mut g, &mut s, 1.0, 0.0, None);
        assert!(flat(&p).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_gradients_leave_params() {
        let c = cfg();
        let p0: ModelParams<f64> = init_params(&c).unwrap();
        let mut p = p0.clone();
        let mut s = OptimizerState::new(&c);
        for _ in 0..10 {
            let mut g = ModelParams::zeros(&c);
            momentum_step(&mut p, &mut g, &mut s, 0.1, 0.9, Some(5.0));
        }
        assert_eq!(p, p0);
    }

    #[test]
    fn two_steps_unrolled() {
        // Oracle: v1 = g, v2 = μg + g; total displacement −η(v1 + v2).
        let c = cfg();
        let p0: ModelParams<f64> = init_params(&c).unwrap();
        let mut g0 = p0.clone();
        g0.scale(0.01);
        let (eta, mu) = (0.0005, 0.9);
        let mut p = p0.clone();
        let mut s = OptimizerState::new(&c);
        for _ in 0..2 {
            let mut g = g0.clone();
            momentum_step(&mut p, &mut g, &mut s, eta, mu, None);
        }
        for ((a, b), g) in flat(&p).iter().zip(flat(&p0)).zip(flat(&g0)) {
            let expected = -eta * (g + (mu * g + g));
            assert!(((a - b) - expected).abs() <= 1e-15 + 1e-12 * expected.abs());
            assert!(((a - b) + eta * 2.9 * g).abs() <= 1e-15 + 1e-12 * g.abs());
        }
    }

    #[test]
    fn non_finite_gradient_is_skipped() {
        let c = cfg();
        let p0: ModelParams<f64> = init_params(&c).unwrap();
        let mut p = p0.clone();
        let mut g = ModelParams::zeros(&c);
        g.dense_b[0] = f64::NAN;
        let mut s = OptimizerState::new(&c);
        let out = momentum_step(&mut p, &mut g, &mut s, 1.0, 0.9, Some(5.0));
        assert!(!out.applied);
        assert_eq!(s.skipped, 1);
        assert_eq!(p, p0);
    }

    proptest! {
        #[test]
        fn clipped_norm_is_bounded(scale in 0.0f64..100.0, clip in 0.1f64..10.0, seed: u64) {
            let mut c = cfg();
            c.seed = seed;
            let mut g: ModelParams<f64> = init_params(&c).unwrap();
            g.scale(scale);
            let mut p = ModelParams::zeros(&c);
            let mut s = OptimizerState::new(&c);
            let out = momentum_step(&mut p, &mut g, &mut s, 1.0, 0.0, Some(clip));
            prop_assert!(g.global_norm() <= clip + 1e-6);
            prop_assert_eq!(out.clipped, out.grad_norm > clip);
            // With μ = 0 and η = 1 the step equals the clipped gradient.
            let mut neg = g.clone();
            neg.scale(-1.0);
            prop_assert_eq!(flat(&p), flat(&neg));
        }
    }
}
