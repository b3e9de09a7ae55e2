//! Raw forward/backward kernels on flat slices. Shapes are validated by the
//! graph layer before these are called.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub k: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeom {
    pub fn out_h(&self) -> usize {
        (self.h + 2 * self.padding - self.k) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.w + 2 * self.padding - self.k) / self.stride + 1
    }

    fn patch_len(&self) -> usize {
        self.c_in * self.k * self.k
    }
}

/// `c = a * b` (or `c += a * b`) where `a` is logically `m x k` and `b` is
/// `k x n`, each optionally stored transposed.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the slice lengths are checked above and the strides describe
    // exactly those m x k, k x n and m x n row/column-major layouts.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Unrolls zero-padded receptive fields into a `[C_in*k*k, H'*W']` matrix.
fn im2col(g: &ConvGeom, input: &[f64]) -> Vec<f64> {
    let (oh, ow) = (g.out_h(), g.out_w());
    let mut cols = vec![0.0; g.patch_len() * oh * ow];
    let p = g.padding as isize;
    for ci in 0..g.c_in {
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (ci * g.k + ky) * g.k + kx;
                let dst = &mut cols[row * oh * ow..(row + 1) * oh * ow];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - p;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let src = &input[(ci * g.h + iy as usize) * g.w..][..g.w];
                    for ox in 0..ow {
                        let ix = (ox * g.stride + kx) as isize - p;
                        if ix >= 0 && ix < g.w as isize {
                            dst[oy * ow + ox] = src[ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im(g: &ConvGeom, cols: &[f64], grad_input: &mut [f64]) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let p = g.padding as isize;
    for ci in 0..g.c_in {
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (ci * g.k + ky) * g.k + kx;
                let src = &cols[row * oh * ow..(row + 1) * oh * ow];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - p;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut grad_input[(ci * g.h + iy as usize) * g.w..][..g.w];
                    for ox in 0..ow {
                        let ix = (ox * g.stride + kx) as isize - p;
                        if ix >= 0 && ix < g.w as isize {
                            dst[ix as usize] += src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn conv2d_forward(g: &ConvGeom, input: &[f64], kernel: &[f64], bias: &[f64]) -> Vec<f64> {
    let spatial = g.out_h() * g.out_w();
    let cols = im2col(g, input);
    let mut out = vec![0.0; g.c_out * spatial];
    for (co, row) in out.chunks_mut(spatial).enumerate() {
        row.fill(bias[co]);
    }
    gemm(g.c_out, g.patch_len(), spatial, kernel, false, &cols, false, &mut out, true);
    out
}

/// Gradients with respect to (input, kernel, bias); `None` where not requested.
pub(crate) fn conv2d_backward(
    g: &ConvGeom,
    input: &[f64],
    kernel: &[f64],
    grad_out: &[f64],
    need_input: bool,
    need_kernel: bool,
    need_bias: bool,
) -> (Option<Vec<f64>>, Option<Vec<f64>>, Option<Vec<f64>>) {
    let spatial = g.out_h() * g.out_w();
    let plen = g.patch_len();
    let grad_kernel = need_kernel.then(|| {
        let cols = im2col(g, input);
        let mut gk = vec![0.0; g.c_out * plen];
        gemm(g.c_out, spatial, plen, grad_out, false, &cols, true, &mut gk, false);
        gk
    });
    let grad_bias = need_bias.then(|| grad_out.chunks(spatial).map(|r| r.iter().sum()).collect());
    let grad_input = need_input.then(|| {
        let mut dcols = vec![0.0; plen * spatial];
        gemm(plen, g.c_out, spatial, kernel, true, grad_out, false, &mut dcols, false);
        let mut gi = vec![0.0; g.c_in * g.h * g.w];
        col2im(g, &dcols, &mut gi);
        gi
    });
    (grad_input, grad_kernel, grad_bias)
}

/// Window maxima plus, for each output, the flat input index of the first
/// maximal element in row-major scan order.
pub(crate) fn maxpool_forward(
    input: &[f64],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
) -> (Vec<f64>, Vec<usize>) {
    let oh = (h - k) / stride + 1;
    let ow = (w - k) / stride + 1;
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0;
                for ky in 0..k {
                    let row = (ch * h + oy * stride + ky) * w + ox * stride;
                    for kx in 0..k {
                        let v = input[row + kx];
                        if v > best {
                            best = v;
                            best_idx = row + kx;
                        }
                    }
                }
                out.push(best);
                argmax.push(best_idx);
            }
        }
    }
    (out, argmax)
}
