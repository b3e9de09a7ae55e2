use super::network::CountModel;
use crate::error::Result;
use crate::tensor::{gradient_check_at, GradCheckReport, Graph, LossKind, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct ParamGradCheck {
    pub name: String,
    pub report: GradCheckReport,
}

/// Gradient check of `loss(model(image), target)` with respect to every
/// parameter tensor. `max_per_param` limits each tensor to an evenly strided
/// subset of its elements; `None` checks all of them.
pub fn check_model_gradients(
    model: &CountModel,
    image: &Tensor,
    target: f64,
    loss: LossKind,
    eps: f64,
    max_per_param: Option<usize>,
) -> Result<Vec<ParamGradCheck>> {
    let params = model.parameters();
    let names = model.parameter_names();
    let mut out = Vec::with_capacity(params.len());
    for (k, (p, name)) in params.iter().zip(names).enumerate() {
        let n = p.len();
        let indices: Vec<usize> = match max_per_param {
            Some(m) if m < n => (0..m).map(|i| i * n / m).collect(),
            _ => (0..n).collect(),
        };
        let f = |g: &mut Graph, x| {
            let img = g.constant(image.clone());
            let vars = params
                .iter()
                .enumerate()
                .map(|(i, q)| if i == k { x } else { g.constant((*q).clone()) })
                .collect();
            let fw = model.forward_with(g, img, vars)?;
            g.loss(fw.count, target, loss)
        };
        let report = gradient_check_at(f, p, eps, &indices)?;
        out.push(ParamGradCheck { name, report });
    }
    Ok(out)
}
