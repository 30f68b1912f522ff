//! Adam parameter updates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{GnnModel, Gradients, Mlp};

/// First/second moment accumulators mirroring a model's parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    m_state: Mlp,
    v_state: Mlp,
    m_out: Mlp,
    v_out: Mlp,
}

impl OptimizerState {
    pub fn new(model: &GnnModel, learning_rate: f64) -> Self {
        OptimizerState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m_state: model.state_mlp.zeros_like(),
            v_state: model.state_mlp.zeros_like(),
            m_out: model.output_mlp.zeros_like(),
            v_out: model.output_mlp.zeros_like(),
        }
    }
}

/// One Adam update over every parameter. Deterministic given inputs;
/// errors when the gradient shapes do not match the model.
pub fn adam_step(model: &mut GnnModel, grads: &Gradients, opt: &mut OptimizerState) -> Result<()> {
    if !model.state_mlp.same_shape(&grads.state_mlp)
        || !model.output_mlp.same_shape(&grads.output_mlp)
    {
        return Err(Error::Shape(
            "gradient shapes do not match model parameters".into(),
        ));
    }
    opt.step += 1;
    let bias1 = 1.0 - opt.beta1.powi(opt.step as i32);
    let bias2 = 1.0 - opt.beta2.powi(opt.step as i32);
    let scale = opt.learning_rate * bias2.sqrt() / bias1;

    let update = |params: &mut Mlp, grads: &Mlp, m: &mut Mlp, v: &mut Mlp| {
        for (((p, &g), m), v) in params
            .params_mut()
            .zip(grads.params())
            .zip(m.params_mut())
            .zip(v.params_mut())
        {
            *m = opt.beta1 * *m + (1.0 - opt.beta1) * g;
            *v = opt.beta2 * *v + (1.0 - opt.beta2) * g * g;
            *p -= scale * *m / (v.sqrt() + opt.epsilon);
        }
    };
    update(
        &mut model.state_mlp,
        &grads.state_mlp,
        &mut opt.m_state,
        &mut opt.v_state,
    );
    update(
        &mut model.output_mlp,
        &grads.output_mlp,
        &mut opt.m_out,
        &mut opt.v_out,
    );
    Ok(())
}
