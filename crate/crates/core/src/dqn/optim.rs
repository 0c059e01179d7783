use serde::{Deserialize, Serialize};

use super::mlp::{contiguous, real, Mlp, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer together with its moment estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real", tag = "kind", rename_all = "snake_case")]
pub enum Optimizer<F> {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        params: AdamParams,
        t: u64,
        m: Mlp<F>,
        v: Mlp<F>,
    },
}

impl<F: Real> Optimizer<F> {
    pub fn new(kind: OptimizerKind, lr: f64, adam: AdamParams, shape: &Mlp<F>) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => Optimizer::Adam {
                lr,
                params: adam,
                t: 0,
                m: shape.zeros_like(),
                v: shape.zeros_like(),
            },
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        match self {
            Optimizer::Sgd { .. } => OptimizerKind::Sgd,
            Optimizer::Adam { .. } => OptimizerKind::Adam,
        }
    }

    /// One descent step on `net` along `grads`.
    pub fn step(&mut self, net: &mut Mlp<F>, grads: &Mlp<F>) {
        match self {
            Optimizer::Sgd { lr } => net.add_scaled(grads, real(-*lr)),
            Optimizer::Adam {
                lr,
                params,
                t,
                m,
                v,
            } => {
                *t += 1;
                let b1: F = real(params.beta1);
                let b2: F = real(params.beta2);
                let eps: F = real(params.eps);
                let one = F::one();
                let bc1 = one - b1.powi(*t as i32);
                let bc2 = one - b2.powi(*t as i32);
                let step: F = real::<F>(*lr) / bc1;
                let update = |p: &mut [F], g: &[F], m: &mut [F], v: &mut [F]| {
                    let moments = m.iter_mut().zip(v.iter_mut());
                    for ((p, &g), (m, v)) in p.iter_mut().zip(g).zip(moments) {
                        *m = b1 * *m + (one - b1) * g;
                        *v = b2 * *v + (one - b2) * g * g;
                        *p = *p - step * *m / ((*v / bc2).sqrt() + eps);
                    }
                };
                for (((layer, g), ml), vl) in net
                    .layers
                    .iter_mut()
                    .zip(&grads.layers)
                    .zip(&mut m.layers)
                    .zip(&mut v.layers)
                {
                    update(
                        slice_mut(layer.weight.as_slice_mut()),
                        contiguous(&g.weight),
                        slice_mut(ml.weight.as_slice_mut()),
                        slice_mut(vl.weight.as_slice_mut()),
                    );
                    update(
                        slice_mut(layer.bias.as_slice_mut()),
                        g.bias.as_slice().expect("contiguous"),
                        slice_mut(ml.bias.as_slice_mut()),
                        slice_mut(vl.bias.as_slice_mut()),
                    );
                }
            }
        }
    }
}

fn slice_mut<F>(s: Option<&mut [F]>) -> &mut [F] {
    s.expect("parameters are in standard layout")
}
