//! Dense `f64` tensors and a reverse-mode autodiff graph covering the
//! operations used by the counting network.

mod gradcheck;
mod graph;
mod io;
pub(crate) mod kernels;

pub use gradcheck::{gradient_check, gradient_check_at, op_gradient_suite, GradCheckReport};
pub use graph::{Graph, LossKind, Var};
pub use io::{read_tensor, write_tensor};

use crate::error::{Error, Result};

/// Row-major dense array of `f64` values.
///
/// Scalars are represented with shape `[1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(Error::dim(format!("shape {shape:?} must be non-empty with positive dims")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::dim(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.shape == [1]
    }

    /// Value of a scalar tensor.
    pub fn item(&self) -> f64 {
        debug_assert!(self.is_scalar());
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `(C, H, W)` of a rank-3 tensor.
    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(Error::dim(format!("expected rank-3 [C,H,W], got {:?}", self.shape))),
        }
    }

    pub fn at3(&self, c: usize, y: usize, x: usize) -> f64 {
        let (_, h, w) = (self.shape[0], self.shape[1], self.shape[2]);
        self.data[(c * h + y) * w + x]
    }

    /// Spatial crop `[x0, x0+w) x [y0, y0+h)` of a `[C,H,W]` tensor.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Tensor> {
        let (c, ih, iw) = self.dims3()?;
        if w == 0 || h == 0 || x0 + w > iw || y0 + h > ih {
            return Err(Error::dim(format!(
                "crop ({x0},{y0},{w},{h}) outside {ih}x{iw} image"
            )));
        }
        let mut data = Vec::with_capacity(c * h * w);
        for ch in 0..c {
            for y in y0..y0 + h {
                let row = (ch * ih + y) * iw;
                data.extend_from_slice(&self.data[row + x0..row + x0 + w]);
            }
        }
        Tensor::new(vec![c, h, w], data)
    }

    /// Zero-pads a `[C,H,W]` tensor on the bottom and right up to `h x w`.
    pub fn pad_to(&self, h: usize, w: usize) -> Result<Tensor> {
        let (c, ih, iw) = self.dims3()?;
        if h < ih || w < iw {
            return Err(Error::dim(format!("cannot pad {ih}x{iw} down to {h}x{w}")));
        }
        let mut out = Tensor::zeros(&[c, h, w]);
        for ch in 0..c {
            for y in 0..ih {
                let src = (ch * ih + y) * iw;
                let dst = (ch * h + y) * w;
                out.data[dst..dst + iw].copy_from_slice(&self.data[src..src + iw]);
            }
        }
        Ok(out)
    }

    /// Concatenates two `[C,H,*]` tensors along the width axis.
    pub fn concat_width(&self, other: &Tensor) -> Result<Tensor> {
        let (c, h, w1) = self.dims3()?;
        let (c2, h2, w2) = other.dims3()?;
        if c != c2 || h != h2 {
            return Err(Error::dim(format!(
                "concat_width of {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        let mut data = Vec::with_capacity(c * h * (w1 + w2));
        for ch in 0..c {
            for y in 0..h {
                let a = (ch * h + y) * w1;
                let b = (ch * h + y) * w2;
                data.extend_from_slice(&self.data[a..a + w1]);
                data.extend_from_slice(&other.data[b..b + w2]);
            }
        }
        Tensor::new(vec![c, h, w1 + w2], data)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}
