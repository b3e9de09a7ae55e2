//! Builds a tiny conv -> relu -> sum-pool -> linear graph by hand, backprops a
//! loss through it and compares the gradient with central differences.
//!
//! cargo run --example autodiff

use gsp_count::tensor::{gradient_check, Graph, LossKind, Tensor};

fn main() -> gsp_count::Result<()> {
    let image = Tensor::new(vec![1, 4, 4], (0..16).map(|i| (i as f64 * 0.37).sin()).collect())?;
    let kernel = Tensor::new(vec![2, 1, 3, 3], (0..18).map(|i| (i as f64 * 0.91).cos() * 0.5).collect())?;

    let mut g = Graph::new();
    let x = g.constant(image.clone());
    let k = g.leaf(kernel.clone());
    let b = g.leaf(Tensor::new(vec![2], vec![0.1, -0.1])?);
    let h = g.conv2d(x, k, b, 1, 1)?;
    let h = g.relu(h)?;
    let pooled = g.gsp(h)?;
    let w = g.leaf(Tensor::new(vec![2], vec![0.5, 0.25])?);
    let bias = g.leaf(Tensor::scalar(0.0));
    let count = g.linear(pooled, w, bias)?;
    let loss = g.loss(count, 3.0, LossKind::Mse)?;
    g.backward(loss)?;

    println!("count {:.6}, loss {:.6}", g.value(count).item(), g.value(loss).item());
    println!("dL/dw = {:?}", g.grad(w).unwrap().data());
    println!("dL/db = {:?}", g.grad(bias).unwrap().data());

    // Same function of the kernel alone, checked numerically.
    let f = |g: &mut Graph, k| {
        let x = g.constant(image.clone());
        let b = g.constant(Tensor::new(vec![2], vec![0.1, -0.1])?);
        let h = g.conv2d(x, k, b, 1, 1)?;
        let h = g.relu(h)?;
        let p = g.gsp(h)?;
        let w = g.constant(Tensor::new(vec![2], vec![0.5, 0.25])?);
        let bias = g.constant(Tensor::scalar(0.0));
        let c = g.linear(p, w, bias)?;
        g.loss(c, 3.0, LossKind::Mse)
    };
    let err = gradient_check(f, &kernel, 1e-5)?;
    println!("kernel gradient max relative error vs central differences: {err:.2e}");
    Ok(())
}
