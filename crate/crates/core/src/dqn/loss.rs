use ndarray::{Array1, Array2};

use super::mlp::{real, Mlp, Real};
use crate::error::{Error, Result};

/// A minibatch of transitions in dense form, one row per sample.
#[derive(Clone, Debug)]
pub struct Batch<F> {
    pub states: Array2<F>,
    pub actions: Vec<usize>,
    pub rewards: Vec<F>,
    pub next_states: Array2<F>,
    pub dones: Vec<bool>,
}

impl<F: Real> Batch<F> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    fn check(&self, k: usize) -> Result<()> {
        let b = self.len();
        if b == 0 {
            return Err(Error::Shape("empty batch".into()));
        }
        if self.states.nrows() != b
            || self.next_states.nrows() != b
            || self.rewards.len() != b
            || self.dones.len() != b
        {
            return Err(Error::Shape("batch fields disagree in length".into()));
        }
        if let Some(&a) = self.actions.iter().find(|&&a| a >= k) {
            return Err(Error::Shape(format!("action {a} outside a {k}-way head")));
        }
        Ok(())
    }
}

/// Bootstrap targets `y = r` for terminal samples and
/// `y = r + γ·max_a Q_target(s', a)` otherwise.
pub fn td_targets<F: Real>(target: &Mlp<F>, batch: &Batch<F>, gamma: F) -> Result<Array1<F>> {
    let next_q = target.forward(batch.next_states.view())?;
    Ok(Array1::from_iter((0..batch.len()).map(|i| {
        if batch.dones[i] {
            batch.rewards[i]
        } else {
            let best = next_q.row(i).iter().copied().fold(F::neg_infinity(), F::max);
            batch.rewards[i] + gamma * best
        }
    })))
}

/// Mean squared TD error of `online` against targets from `target`, and its
/// gradient with respect to `online`'s parameters.
pub fn dqn_loss_and_grad<F: Real>(
    online: &Mlp<F>,
    target: &Mlp<F>,
    batch: &Batch<F>,
    gamma: F,
) -> Result<(F, Mlp<F>)> {
    batch.check(online.output_dim())?;
    let y = td_targets(target, batch, gamma)?;
    let trace = online.forward_trace(batch.states.view())?;
    let q = trace.output();
    let n: F = real(batch.len() as f64);
    let mut loss = F::zero();
    let mut d_out = Array2::zeros(q.raw_dim());
    for (i, &a) in batch.actions.iter().enumerate() {
        let err = q[[i, a]] - y[i];
        loss += err * err;
        d_out[[i, a]] = real::<F>(2.0) * err / n;
    }
    Ok((loss / n, online.backward(&trace, d_out.view())))
}

/// Rescales `grads` in place so its global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm<F: Real>(grads: &mut Mlp<F>, max_norm: F) -> F {
    let norm = grads.l2_norm();
    if norm > max_norm && norm > F::zero() {
        grads.scale(max_norm / norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    /// Single-layer linear networks whose outputs are fixed by the bias.
    fn constant_net(values: &[f64], inputs: usize) -> Mlp<f64> {
        let mut net = Mlp::zeros(&[inputs, values.len()]);
        net.layers[0].bias = Array1::from(values.to_vec());
        net
    }

    fn one_sample(r: f64, done: bool) -> Batch<f64> {
        Batch {
            states: Array2::zeros((1, 3)),
            actions: vec![0],
            rewards: vec![r],
            next_states: Array2::zeros((1, 3)),
            dones: vec![done],
        }
    }

    #[test]
    fn terminal_sample_ignores_bootstrap() {
        let online = constant_net(&[1.5, 0.0], 3);
        let target = constant_net(&[100.0, 100.0], 3);
        let (loss, _) = dqn_loss_and_grad(&online, &target, &one_sample(1.0, true), 0.99).unwrap();
        assert!((loss - 0.25).abs() < 1e-12);
    }

    #[test]
    fn nonterminal_sample_bootstraps_on_target_max() {
        let online = constant_net(&[1.5, 0.0], 3);
        let target = constant_net(&[2.0, -3.0], 3);
        let (loss, _) = dqn_loss_and_grad(&online, &target, &one_sample(1.0, false), 0.99).unwrap();
        assert!((loss - 2.1904).abs() < 1e-12, "{loss}");
    }

    #[test]
    fn empty_batch_and_bad_action_are_shape_errors() {
        let net = constant_net(&[0.0, 0.0], 3);
        let mut b = one_sample(0.0, true);
        b.actions = vec![2];
        assert!(matches!(dqn_loss_and_grad(&net, &net, &b, 0.9), Err(Error::Shape(_))));
        let empty = Batch::<f64> {
            states: Array2::zeros((0, 3)),
            actions: vec![],
            rewards: vec![],
            next_states: Array2::zeros((0, 3)),
            dones: vec![],
        };
        assert!(matches!(dqn_loss_and_grad(&net, &net, &empty, 0.9), Err(Error::Shape(_))));
    }

    #[test]
    fn clipping_caps_global_norm() {
        let mut g = constant_net(&[3.0, 4.0], 1);
        let before = clip_grad_norm(&mut g, 1.0);
        assert!((before - 5.0).abs() < 1e-12);
        assert!((g.l2_norm() - 1.0).abs() < 1e-12);
        let mut small = constant_net(&[0.3, 0.4], 1);
        clip_grad_norm(&mut small, 1.0);
        assert_eq!(small.layers[0].bias.to_vec(), vec![0.3, 0.4]);
    }
}
