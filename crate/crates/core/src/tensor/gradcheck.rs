use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Graph, LossKind, Tensor, Var};
use crate::error::{Error, Result};

/// Outcome of comparing backprop gradients with central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// max over checked elements of `|a - n| / max(1, |a|, |n|)`.
    pub max_rel_error: f64,
    /// Flat index of the worst element.
    pub worst_index: usize,
    pub checked: usize,
    /// Elements whose `±eps` perturbation crossed a kink (changed
    /// [`Graph::kink_pattern`]); the central difference is meaningless there.
    pub skipped: usize,
}

/// Max relative error between the analytic gradient of `f` at `input` and
/// the central difference `(f(x+eps) - f(x-eps)) / 2eps`, over all elements
/// whose perturbations stay on the same smooth piece as `input`.
pub fn gradient_check<F>(f: F, input: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    let all: Vec<usize> = (0..input.len()).collect();
    gradient_check_at(f, input, eps, &all).map(|r| r.max_rel_error)
}

/// Like [`gradient_check`] but only perturbs the listed flat indices.
pub fn gradient_check_at<F>(f: F, input: &Tensor, eps: f64, indices: &[usize]) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    if !(eps > 0.0 && eps <= 1e-3) {
        return Err(Error::Contract(format!("gradient_check epsilon {eps} outside (0, 1e-3]")));
    }
    let mut g = Graph::new();
    let x = g.leaf(input.clone());
    let root = f(&mut g, x)?;
    check_output(g.value(root))?;
    let pattern = g.kink_pattern();
    g.backward(root)?;
    let analytic = g
        .grad(x)
        .cloned()
        .unwrap_or_else(|| Tensor::zeros(input.shape()));

    let eval = |t: Tensor| -> Result<(f64, u64)> {
        let mut g = Graph::new();
        let x = g.constant(t);
        let root = f(&mut g, x)?;
        Ok((check_output(g.value(root))?, g.kink_pattern()))
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        checked: 0,
        skipped: 0,
    };
    for &i in indices {
        let mut plus = input.clone();
        plus.data_mut()[i] += eps;
        let mut minus = input.clone();
        minus.data_mut()[i] -= eps;
        let ((fp, pp), (fm, pm)) = (eval(plus)?, eval(minus)?);
        if pp != pattern || pm != pattern {
            report.skipped += 1;
            continue;
        }
        let numeric = (fp - fm) / (2.0 * eps);
        let a = analytic.data()[i];
        let err = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
        if err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_index = i;
        }
        report.checked += 1;
    }
    Ok(report)
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("non-empty shape")
}

/// Reduces a `[C,H,W]` value to a scalar with a fixed random projection
/// (a single full-size convolution filter).
fn project(g: &mut Graph, y: Var, seed: u64) -> Result<Var> {
    let (c, h, w) = g.value(y).dims3()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = g.constant(random_tensor(&mut rng, &[1, c, h, w]));
    let b = g.constant(Tensor::scalar(0.0));
    let z = g.conv2d(y, k, b, 1, 0)?;
    let s = g.gsp(z)?;
    let one = g.constant(Tensor::scalar(1.0));
    g.linear(s, one, b)
}

fn dot(g: &mut Graph, v: Var, seed: u64) -> Result<Var> {
    let n = g.value(v).len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = g.constant(random_tensor(&mut rng, &[n]));
    let b = g.constant(Tensor::scalar(0.0));
    g.linear(v, w, b)
}

/// Gradient check of every differentiable graph op on seeded random inputs,
/// one named entry per (op, differentiated argument).
pub fn op_gradient_suite(seed: u64, eps: f64) -> Result<Vec<(String, GradCheckReport)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_tensor(&mut rng, &[2, 6, 6]);
    let kernel = random_tensor(&mut rng, &[3, 2, 3, 3]);
    let bias = random_tensor(&mut rng, &[3]);
    let vec5 = random_tensor(&mut rng, &[5]);
    let w5 = random_tensor(&mut rng, &[5]);
    let b1 = random_tensor(&mut rng, &[1]);
    let other = random_tensor(&mut rng, &[2, 6, 6]);
    let p = seed ^ 0x5eed;

    let mut out = Vec::new();
    let mut run = |name: &str, input: &Tensor, f: &dyn Fn(&mut Graph, Var) -> Result<Var>| -> Result<()> {
        let all: Vec<usize> = (0..input.len()).collect();
        out.push((name.to_string(), gradient_check_at(f, input, eps, &all)?));
        Ok(())
    };

    for (stride, padding) in [(1, 1), (2, 0)] {
        let tag = format!("s{stride}p{padding}");
        run(&format!("conv2d.input.{tag}"), &x, &|g, v| {
            let (k, b) = (g.constant(kernel.clone()), g.constant(bias.clone()));
            let y = g.conv2d(v, k, b, stride, padding)?;
            project(g, y, p)
        })?;
        run(&format!("conv2d.kernel.{tag}"), &kernel, &|g, v| {
            let (i, b) = (g.constant(x.clone()), g.constant(bias.clone()));
            let y = g.conv2d(i, v, b, stride, padding)?;
            project(g, y, p)
        })?;
        run(&format!("conv2d.bias.{tag}"), &bias, &|g, v| {
            let (i, k) = (g.constant(x.clone()), g.constant(kernel.clone()));
            let y = g.conv2d(i, k, v, stride, padding)?;
            project(g, y, p)
        })?;
    }
    run("relu", &x, &|g, v| {
        let y = g.relu(v)?;
        project(g, y, p)
    })?;
    for (k, stride) in [(2, 2), (3, 1)] {
        run(&format!("maxpool2d.k{k}s{stride}"), &x, &|g, v| {
            let y = g.maxpool2d(v, k, stride)?;
            project(g, y, p)
        })?;
    }
    run("gsp", &x, &|g, v| {
        let y = g.gsp(v)?;
        dot(g, y, p)
    })?;
    run("gap", &x, &|g, v| {
        let y = g.gap(v)?;
        dot(g, y, p)
    })?;
    run("linear.input", &vec5, &|g, v| {
        let (w, b) = (g.constant(w5.clone()), g.constant(b1.clone()));
        g.linear(v, w, b)
    })?;
    run("linear.weight", &w5, &|g, v| {
        let (i, b) = (g.constant(vec5.clone()), g.constant(b1.clone()));
        g.linear(i, v, b)
    })?;
    run("linear.bias", &b1, &|g, v| {
        let (i, w) = (g.constant(vec5.clone()), g.constant(w5.clone()));
        g.linear(i, w, v)
    })?;
    for kind in [LossKind::L1, LossKind::Mse] {
        let name = format!("loss.{}", if kind == LossKind::L1 { "l1" } else { "mse" });
        run(&name, &vec5, &|g, v| {
            let (w, b) = (g.constant(w5.clone()), g.constant(b1.clone()));
            let y = g.linear(v, w, b)?;
            g.loss(y, 0.3, kind)
        })?;
    }
    run("add", &x, &|g, v| {
        let o = g.constant(other.clone());
        let y = g.add(v, o)?;
        let y = g.add(y, v)?;
        project(g, y, p)
    })?;
    run("scale", &x, &|g, v| {
        let y = g.scale(v, -1.7)?;
        project(g, y, p)
    })?;
    Ok(out)
}

fn check_output(t: &Tensor) -> Result<f64> {
    if !t.is_scalar() {
        return Err(Error::Contract(format!(
            "gradient_check function must return a scalar, got {:?}",
            t.shape()
        )));
    }
    let v = t.item();
    if !v.is_finite() {
        return Err(Error::Numeric(format!("function value {v} is not finite")));
    }
    Ok(v)
}
