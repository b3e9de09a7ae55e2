use serde::{Deserialize, Serialize};

use super::kernels::{self, ConvGeom};
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    #[default]
    L1,
    Mse,
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(LossKind::L1),
            "mse" => Ok(LossKind::Mse),
            _ => Err(Error::Config(format!("unknown loss kind {s:?} (expected l1|mse)"))),
        }
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d {
        input: Var,
        kernel: Var,
        bias: Var,
        geom: ConvGeom,
    },
    Relu(Var),
    MaxPool {
        input: Var,
        k: usize,
        stride: usize,
        argmax: Vec<usize>,
    },
    Gsp(Var),
    Gap(Var),
    Linear {
        input: Var,
        weight: Var,
        bias: Var,
    },
    Loss {
        pred: Var,
        target: f64,
        kind: LossKind,
    },
    Add(Var, Var),
    Scale(Var, f64),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    grad: Option<Tensor>,
    requires_grad: bool,
    op: Op,
}

/// Eagerly built computation graph. Nodes are appended in evaluation order,
/// so node ids are already a topological order for the backward sweep.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf that receives gradients.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push_raw(value, true, Op::Leaf)
    }

    /// Leaf that is treated as a constant by `backward`.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_raw(value, false, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Accumulated gradient of a leaf, if backward has reached it.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn take_grad(&mut self, v: Var) -> Option<Tensor> {
        self.nodes[v.0].grad.take()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    fn push_raw(&mut self, value: Tensor, requires_grad: bool, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, name: &str, value: Tensor, parents: &[Var], op: Op) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name.to_string() });
        }
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        Ok(self.push_raw(value, requires_grad, op))
    }

    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Var, stride: usize, padding: usize) -> Result<Var> {
        let (xs, ks, bs) = (
            self.value(input).shape(),
            self.value(kernel).shape(),
            self.value(bias).shape(),
        );
        let (c_in, h, w) = self.value(input).dims3()?;
        let [c_out, kc, k, k2] = ks[..] else {
            return Err(Error::dim(format!("conv2d kernel must be [C_out,C_in,k,k], got {ks:?}")));
        };
        if kc != c_in || k != k2 || bs != [c_out] {
            return Err(Error::dim(format!(
                "conv2d shapes disagree: input {xs:?}, kernel {ks:?}, bias {bs:?}"
            )));
        }
        if stride == 0 {
            return Err(Error::dim("conv2d stride must be >= 1"));
        }
        if k > h + 2 * padding || k > w + 2 * padding {
            return Err(Error::dim(format!(
                "conv2d kernel {k}x{k} larger than padded input {xs:?} (padding {padding})"
            )));
        }
        let geom = ConvGeom {
            c_in,
            h,
            w,
            c_out,
            k,
            stride,
            padding,
        };
        let out = kernels::conv2d_forward(
            &geom,
            self.value(input).data(),
            self.value(kernel).data(),
            self.value(bias).data(),
        );
        let value = Tensor::new(vec![c_out, geom.out_h(), geom.out_w()], out)?;
        self.push(
            "conv2d",
            value,
            &[input, kernel, bias],
            Op::Conv2d {
                input,
                kernel,
                bias,
                geom,
            },
        )
    }

    pub fn relu(&mut self, input: Var) -> Result<Var> {
        let x = self.value(input);
        let data = x.data().iter().map(|&v| v.max(0.0)).collect();
        let value = Tensor::new(x.shape().to_vec(), data)?;
        self.push("relu", value, &[input], Op::Relu(input))
    }

    pub fn maxpool2d(&mut self, input: Var, k: usize, stride: usize) -> Result<Var> {
        let (c, h, w) = self.value(input).dims3()?;
        if k == 0 || stride == 0 {
            return Err(Error::dim("maxpool window and stride must be >= 1"));
        }
        if k > h || k > w {
            return Err(Error::dim(format!("maxpool window {k}x{k} larger than input {c}x{h}x{w}")));
        }
        let (out, argmax) = kernels::maxpool_forward(self.value(input).data(), c, h, w, k, stride);
        let value = Tensor::new(vec![c, (h - k) / stride + 1, (w - k) / stride + 1], out)?;
        self.push(
            "maxpool2d",
            value,
            &[input],
            Op::MaxPool {
                input,
                k,
                stride,
                argmax,
            },
        )
    }

    /// Global sum pooling: `[C,H,W] -> [C]`.
    pub fn gsp(&mut self, input: Var) -> Result<Var> {
        let value = spatial_sums(self.value(input), "gsp")?;
        self.push("gsp", value, &[input], Op::Gsp(input))
    }

    /// Global average pooling: `[C,H,W] -> [C]`.
    pub fn gap(&mut self, input: Var) -> Result<Var> {
        let (_, h, w) = self.value(input).dims3()?;
        let mut value = spatial_sums(self.value(input), "gap")?;
        let area = (h * w) as f64;
        value.data_mut().iter_mut().for_each(|v| *v /= area);
        self.push("gap", value, &[input], Op::Gap(input))
    }

    /// `weight . input + bias` with `input, weight: [C]` and `bias: [1]`.
    pub fn linear(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let (x, wt, b) = (self.value(input), self.value(weight), self.value(bias));
        if x.rank() != 1 || x.shape() != wt.shape() || !b.is_scalar() {
            return Err(Error::dim(format!(
                "linear: input {:?}, weight {:?}, bias {:?}",
                x.shape(),
                wt.shape(),
                b.shape()
            )));
        }
        let dot: f64 = x.data().iter().zip(wt.data()).map(|(a, b)| a * b).sum();
        let value = Tensor::scalar(dot + b.item());
        self.push("linear", value, &[input, weight, bias], Op::Linear { input, weight, bias })
    }

    pub fn loss(&mut self, pred: Var, target: f64, kind: LossKind) -> Result<Var> {
        let p = self.value(pred);
        if !p.is_scalar() {
            return Err(Error::dim(format!("loss prediction must be scalar, got {:?}", p.shape())));
        }
        if !target.is_finite() {
            return Err(Error::Numeric(format!("loss target {target} is not finite")));
        }
        let d = p.item() - target;
        let value = Tensor::scalar(match kind {
            LossKind::L1 => d.abs(),
            LossKind::Mse => d * d,
        });
        self.push("loss", value, &[pred], Op::Loss { pred, target, kind })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(Error::dim(format!("add: {:?} vs {:?}", x.shape(), y.shape())));
        }
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p + q).collect();
        let value = Tensor::new(x.shape().to_vec(), data)?;
        self.push("add", value, &[a, b], Op::Add(a, b))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let x = self.value(a);
        let data = x.data().iter().map(|v| v * factor).collect();
        let value = Tensor::new(x.shape().to_vec(), data)?;
        self.push("scale", value, &[a], Op::Scale(a, factor))
    }

    /// Smallest distance of any recorded ReLU input from 0, of any max-pool
    /// window maximum from its runner-up (windows of all zeros excluded) and
    /// of an L1 prediction from its target. Finite differences with step
    /// `eps` are only trustworthy when this exceeds a few `eps`.
    pub fn kink_margin(&self) -> f64 {
        let mut margin = f64::INFINITY;
        for node in &self.nodes {
            match &node.op {
                Op::Relu(x) => {
                    for v in self.value(*x).data() {
                        margin = margin.min(v.abs());
                    }
                }
                Op::MaxPool { input, k, stride, .. } => {
                    let x = self.value(*input);
                    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
                    let (oh, ow) = ((h - k) / stride + 1, (w - k) / stride + 1);
                    if k * k < 2 {
                        continue;
                    }
                    for ch in 0..c {
                        for oy in 0..oh {
                            for ox in 0..ow {
                                let (mut top, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                                for ky in 0..*k {
                                    for kx in 0..*k {
                                        let v = x.at3(ch, oy * stride + ky, ox * stride + kx);
                                        if v > top {
                                            second = top;
                                            top = v;
                                        } else if v > second {
                                            second = v;
                                        }
                                    }
                                }
                                // A window of clamped zeros only moves when a ReLU input
                                // crosses 0, which the ReLU term already measures.
                                if !(top == 0.0 && second == 0.0) {
                                    margin = margin.min(top - second);
                                }
                            }
                        }
                    }
                }
                Op::Loss {
                    pred,
                    target,
                    kind: LossKind::L1,
                } => margin = margin.min((self.value(*pred).item() - target).abs()),
                _ => {}
            }
        }
        margin
    }

    /// Hash of every branch decision taken by piecewise ops: ReLU input
    /// signs, max-pool argmax positions and the sign of L1 residuals. Two
    /// evaluations with equal patterns lie on the same smooth piece.
    pub fn kink_pattern(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for node in &self.nodes {
            match &node.op {
                Op::Relu(x) => {
                    // Signs packed 64 per word; hashing bools one by one dominates otherwise.
                    let words: Vec<u64> = self
                        .value(*x)
                        .data()
                        .chunks(64)
                        .map(|c| c.iter().enumerate().fold(0u64, |w, (i, v)| w | (u64::from(*v > 0.0) << i)))
                        .collect();
                    words.hash(&mut h);
                }
                Op::MaxPool { argmax, .. } => argmax.hash(&mut h),
                Op::Loss {
                    pred,
                    target,
                    kind: LossKind::L1,
                } => (self.value(*pred).item() > *target).hash(&mut h),
                _ => {}
            }
        }
        h.finish()
    }

    /// Reverse sweep from a scalar root. Leaf gradients accumulate across
    /// calls until [`Graph::zero_grad`].
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if !self.value(root).is_scalar() {
            return Err(Error::Contract(format!(
                "backward root must be scalar, got shape {:?}",
                self.value(root).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(vec![1.0]);

        for id in (0..=root.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Leaf => {
                    grads[id] = Some(g);
                    continue;
                }
                Op::Conv2d {
                    input,
                    kernel,
                    bias,
                    geom,
                } => {
                    let (gi, gk, gb) = kernels::conv2d_backward(
                        geom,
                        self.value(*input).data(),
                        self.value(*kernel).data(),
                        &g,
                        self.needs(*input),
                        self.needs(*kernel),
                        self.needs(*bias),
                    );
                    for (var, gr) in [(*input, gi), (*kernel, gk), (*bias, gb)] {
                        if let Some(gr) = gr {
                            accumulate(&mut grads, var, &gr);
                        }
                    }
                }
                Op::Relu(x) => {
                    let gx: Vec<f64> = self
                        .value(*x)
                        .data()
                        .iter()
                        .zip(&g)
                        .map(|(&v, &d)| if v > 0.0 { d } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, *x, &gx);
                }
                Op::MaxPool { input, argmax, .. } => {
                    let mut gx = vec![0.0; self.value(*input).len()];
                    for (&idx, &d) in argmax.iter().zip(&g) {
                        gx[idx] += d;
                    }
                    accumulate(&mut grads, *input, &gx);
                }
                Op::Gsp(x) | Op::Gap(x) => {
                    let (c, h, w) = self.value(*x).dims3()?;
                    let per = if matches!(node.op, Op::Gap(_)) {
                        1.0 / (h * w) as f64
                    } else {
                        1.0
                    };
                    let mut gx = Vec::with_capacity(c * h * w);
                    for d in g.iter().take(c) {
                        gx.extend(std::iter::repeat_n(d * per, h * w));
                    }
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Linear { input, weight, bias } => {
                    let d = g[0];
                    if self.needs(*input) {
                        let gx: Vec<f64> = self.value(*weight).data().iter().map(|w| w * d).collect();
                        accumulate(&mut grads, *input, &gx);
                    }
                    if self.needs(*weight) {
                        let gw: Vec<f64> = self.value(*input).data().iter().map(|x| x * d).collect();
                        accumulate(&mut grads, *weight, &gw);
                    }
                    accumulate(&mut grads, *bias, &[d]);
                }
                Op::Loss { pred, target, kind } => {
                    let diff = self.value(*pred).item() - target;
                    let local = match kind {
                        LossKind::L1 => {
                            if diff > 0.0 {
                                1.0
                            } else if diff < 0.0 {
                                -1.0
                            } else {
                                0.0
                            }
                        }
                        LossKind::Mse => 2.0 * diff,
                    };
                    accumulate(&mut grads, *pred, &[local * g[0]]);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, &g);
                    accumulate(&mut grads, *b, &g);
                }
                Op::Scale(a, f) => {
                    let ga: Vec<f64> = g.iter().map(|d| d * f).collect();
                    accumulate(&mut grads, *a, &ga);
                }
            }
        }

        for (id, g) in grads.into_iter().enumerate() {
            let Some(g) = g else { continue };
            let node = &mut self.nodes[id];
            if !matches!(node.op, Op::Leaf) || !node.requires_grad {
                continue;
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    op: "backward".to_string(),
                });
            }
            match &mut node.grad {
                Some(existing) => existing.data_mut().iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                None => node.grad = Some(Tensor::new(node.value.shape().to_vec(), g)?),
            }
        }
        Ok(())
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, g: &[f64]) {
    match &mut grads[v.0] {
        Some(existing) => existing.iter_mut().zip(g).for_each(|(a, b)| *a += b),
        slot @ None => *slot = Some(g.to_vec()),
    }
}

fn spatial_sums(x: &Tensor, op: &str) -> Result<Tensor> {
    let (c, h, w) = x
        .dims3()
        .map_err(|_| Error::dim(format!("{op} expects rank-3 [C,H,W], got {:?}", x.shape())))?;
    let sums = x.data().chunks(h * w).take(c).map(|ch| ch.iter().sum()).collect();
    Tensor::new(vec![c], sums)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let mut g = Graph::new();
        let x = g.constant(t(&[1, 2, 3], &[1., 2., 3., 4., 5., 6.]));
        let k = g.constant(t(&[1, 1, 1, 1], &[1.0]));
        let b = g.constant(t(&[1], &[0.0]));
        let y = g.conv2d(x, k, b, 1, 0).unwrap();
        assert_eq!(g.value(y), g.value(x));
    }

    #[test]
    fn ones_conv_center_and_corner() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::full(&[1, 5, 5], 1.0));
        let k = g.constant(Tensor::full(&[1, 1, 3, 3], 1.0));
        let b = g.constant(Tensor::zeros(&[1]));
        let y = g.conv2d(x, k, b, 1, 1).unwrap();
        let out = g.value(y);
        assert_eq!(out.shape(), &[1, 5, 5]);
        assert_eq!(out.at3(0, 2, 2), 9.0);
        assert_eq!(out.at3(0, 0, 0), 4.0);
    }

    #[test]
    fn conv_rejects_mismatched_shapes() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(&[2, 4, 4]));
        let k = g.constant(Tensor::zeros(&[3, 1, 3, 3]));
        let b = g.constant(Tensor::zeros(&[3]));
        let err = g.conv2d(x, k, b, 1, 0).unwrap_err();
        assert!(matches!(err, Error::Dimension(ref m) if m.contains("[2, 4, 4]") && m.contains("[3, 1, 3, 3]")));
        let k = g.constant(Tensor::zeros(&[3, 2, 7, 7]));
        assert!(g.conv2d(x, k, b, 1, 1).is_err());
    }

    #[test]
    fn relu_values_and_grad() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[3], &[-1.0, 0.0, 2.0]));
        let y = g.relu(x).unwrap();
        assert_eq!(g.value(y).data(), &[0.0, 0.0, 2.0]);

        let mut g = Graph::new();
        let x = g.leaf(t(&[2], &[-1.0, 2.0]));
        let y = g.relu(x).unwrap();
        let w = g.constant(t(&[2], &[1.0, 1.0]));
        let b = g.constant(Tensor::scalar(0.0));
        let s = g.linear(y, w, b).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[0.0, 1.0]);
    }

    #[test]
    fn maxpool_basic_and_errors() {
        let mut g = Graph::new();
        let x = g.constant(t(&[1, 2, 2], &[1., 2., 3., 4.]));
        let y = g.maxpool2d(x, 2, 2).unwrap();
        assert_eq!(g.value(y).data(), &[4.0]);
        let c = g.constant(Tensor::full(&[2, 4, 4], 0.7));
        let y = g.maxpool2d(c, 2, 2).unwrap();
        assert!(g.value(y).data().iter().all(|&v| v == 0.7));
        assert!(matches!(g.maxpool2d(x, 3, 1), Err(Error::Dimension(_))));
    }

    #[test]
    fn maxpool_tie_routes_to_first_maximum() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[1, 2, 2], &[5., 5., 5., 5.]));
        let y = g.maxpool2d(x, 2, 2).unwrap();
        let y = g.gsp(y).unwrap();
        let w = g.constant(t(&[1], &[1.0]));
        let b = g.constant(Tensor::scalar(0.0));
        let s = g.linear(y, w, b).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn pooling_values() {
        let mut g = Graph::new();
        let x = g.constant(t(&[1, 2, 2], &[1., 2., 3., 4.]));
        let s = g.gsp(x).unwrap();
        let a = g.gap(x).unwrap();
        assert_eq!(g.value(s).data(), &[10.0]);
        assert_eq!(g.value(a).data(), &[2.5]);
        let ones = g.constant(Tensor::full(&[3, 4, 5], 1.0));
        let s = g.gsp(ones).unwrap();
        let a = g.gap(ones).unwrap();
        assert_eq!(g.value(s).data(), &[20.0, 20.0, 20.0]);
        assert_eq!(g.value(a).data(), &[1.0, 1.0, 1.0]);
        let flat = g.constant(Tensor::zeros(&[4]));
        assert!(matches!(g.gsp(flat), Err(Error::Dimension(_))));
        assert!(matches!(g.gap(flat), Err(Error::Dimension(_))));
    }

    #[test]
    fn linear_values_grads_and_errors() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[2], &[1., 2.]));
        let w = g.leaf(t(&[2], &[3., 4.]));
        let b = g.leaf(Tensor::scalar(1.0));
        let y = g.linear(x, w, b).unwrap();
        assert_eq!(g.value(y).item(), 12.0);
        g.backward(y).unwrap();
        assert_eq!(g.grad(w).unwrap().data(), &[1., 2.]);
        assert_eq!(g.grad(x).unwrap().data(), &[3., 4.]);
        assert_eq!(g.grad(b).unwrap().data(), &[1.]);

        let z = g.constant(Tensor::zeros(&[2]));
        let b5 = g.constant(Tensor::scalar(5.0));
        let y = g.linear(x, z, b5).unwrap();
        assert_eq!(g.value(y).item(), 5.0);

        let w3 = g.constant(Tensor::zeros(&[3]));
        assert!(matches!(g.linear(x, w3, b), Err(Error::Dimension(_))));
    }

    #[test]
    fn loss_values_and_grads() {
        for kind in [LossKind::L1, LossKind::Mse] {
            let mut g = Graph::new();
            let p = g.leaf(Tensor::scalar(3.0));
            let l = g.loss(p, 3.0, kind).unwrap();
            assert_eq!(g.value(l).item(), 0.0);
            g.backward(l).unwrap();
            assert_eq!(g.grad(p).unwrap().item(), 0.0);
        }
        let mut g = Graph::new();
        let p = g.leaf(Tensor::scalar(5.0));
        let l1 = g.loss(p, 3.0, LossKind::L1).unwrap();
        let mse = g.loss(p, 3.0, LossKind::Mse).unwrap();
        assert_eq!(g.value(l1).item(), 2.0);
        assert_eq!(g.value(mse).item(), 4.0);
        g.backward(mse).unwrap();
        assert_eq!(g.grad(p).unwrap().item(), 4.0);
    }

    #[test]
    fn backward_through_pooling_heads() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[1, 2, 2], &[1., 2., 3., 4.]));
        let s = g.gsp(x).unwrap();
        let w = g.constant(t(&[1], &[1.0]));
        let b = g.constant(Tensor::scalar(0.0));
        let y = g.linear(s, w, b).unwrap();
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[1.0; 4]);

        let mut g = Graph::new();
        let x = g.leaf(t(&[1, 2, 2], &[1., 2., 3., 4.]));
        let a = g.gap(x).unwrap();
        let w = g.constant(t(&[1], &[1.0]));
        let b = g.constant(Tensor::scalar(0.0));
        let y = g.linear(a, w, b).unwrap();
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[0.25; 4]);
    }

    #[test]
    fn backward_accumulates_and_zero_grad_resets() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(2.0));
        let y = g.scale(x, 3.0).unwrap();
        g.backward(y).unwrap();
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap().item(), 6.0);
        g.zero_grad();
        assert!(g.grad(x).is_none());
    }

    #[test]
    fn shared_subexpression_sums_paths() {
        // y = relu(x) + 2 * relu(x)
        let mut g = Graph::new();
        let x = g.leaf(t(&[2], &[1.5, -0.5]));
        let r = g.relu(x).unwrap();
        let r2 = g.scale(r, 2.0).unwrap();
        let s = g.add(r, r2).unwrap();
        let w = g.constant(t(&[2], &[1.0, 1.0]));
        let b = g.constant(Tensor::scalar(0.0));
        let y = g.linear(s, w, b).unwrap();
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[3.0, 0.0]);
    }

    #[test]
    fn non_scalar_root_is_contract_error() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(&[2]));
        assert!(matches!(g.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn non_finite_forward_is_reported() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(f64::MAX));
        let err = g.scale(x, 10.0).unwrap_err();
        assert!(matches!(err, Error::NonFinite { ref op } if op == "scale"));
    }

    #[test]
    fn constants_receive_no_grad() {
        let mut g = Graph::new();
        let x = g.constant(t(&[1, 1, 2], &[1., 2.]));
        let s = g.gsp(x).unwrap();
        let w = g.leaf(t(&[1], &[1.0]));
        let b = g.leaf(Tensor::scalar(0.0));
        let y = g.linear(s, w, b).unwrap();
        g.backward(y).unwrap();
        assert!(g.grad(x).is_none());
        assert_eq!(g.grad(w).unwrap().data(), &[3.0]);
    }
}
