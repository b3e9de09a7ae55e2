//! Kernels checked against direct nested-loop implementations.

use gsp_count::tensor::{Graph, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn conv_oracle(x: &Tensor, k: &Tensor, b: &Tensor, stride: usize, pad: usize) -> (Vec<usize>, Vec<f64>) {
    let (ci, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (co, kk) = (k.shape()[0], k.shape()[2]);
    let oh = (h + 2 * pad - kk) / stride + 1;
    let ow = (w + 2 * pad - kk) / stride + 1;
    let mut out = Vec::with_capacity(co * oh * ow);
    for o in 0..co {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut s = b.data()[o];
                for c in 0..ci {
                    for ky in 0..kk {
                        for kx in 0..kk {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            let kv = k.data()[((o * ci + c) * kk + ky) * kk + kx];
                            s += kv * x.at3(c, iy as usize, ix as usize);
                        }
                    }
                }
                out.push(s);
            }
        }
    }
    (vec![co, oh, ow], out)
}

#[test]
fn conv2d_matches_direct_convolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (ci, co, h, w, kk, stride, pad) in [
        (2, 4, 8, 8, 3, 1, 1),
        (2, 4, 8, 8, 3, 1, 0),
        (3, 2, 7, 5, 3, 2, 1),
        (1, 3, 6, 8, 5, 1, 2),
        (2, 2, 8, 8, 1, 1, 0),
        (4, 1, 5, 7, 2, 2, 0),
    ] {
        let x = random(&mut rng, &[ci, h, w]);
        let k = random(&mut rng, &[co, ci, kk, kk]);
        let b = random(&mut rng, &[co]);
        let mut g = Graph::new();
        let (xv, kv, bv) = (g.constant(x.clone()), g.constant(k.clone()), g.constant(b.clone()));
        let y = g.conv2d(xv, kv, bv, stride, pad).unwrap();
        let (shape, want) = conv_oracle(&x, &k, &b, stride, pad);
        assert_eq!(g.value(y).shape(), &shape[..]);
        for (a, e) in g.value(y).data().iter().zip(&want) {
            assert!((a - e).abs() <= 1e-12, "{a} vs {e}");
        }
    }
}

#[test]
fn conv2d_kernel_grad_matches_correlation_oracle() {
    // dL/dK[o,c,ky,kx] = sum_{oy,ox} G[o,oy,ox] * X[c, oy*s+ky-p, ox*s+kx-p]
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (x, k, b) = (random(&mut rng, &[2, 6, 6]), random(&mut rng, &[3, 2, 3, 3]), random(&mut rng, &[3]));
    let mut g = Graph::new();
    let (xv, kv, bv) = (g.constant(x.clone()), g.leaf(k.clone()), g.leaf(b.clone()));
    let y = g.conv2d(xv, kv, bv, 1, 1).unwrap();
    let s = g.gsp(y).unwrap();
    let w = g.constant(Tensor::new(vec![3], vec![0.5, -1.0, 2.0]).unwrap());
    let zero = g.constant(Tensor::scalar(0.0));
    let out = g.linear(s, w, zero).unwrap();
    g.backward(out).unwrap();
    let gk = g.grad(kv).unwrap();
    let wo = [0.5, -1.0, 2.0];
    for o in 0..3 {
        for c in 0..2 {
            for ky in 0..3 {
                for kx in 0..3 {
                    let mut e = 0.0;
                    for oy in 0..6 {
                        for ox in 0..6 {
                            let (iy, ix) = (oy as isize + ky as isize - 1, ox as isize + kx as isize - 1);
                            if (0..6).contains(&iy) && (0..6).contains(&ix) {
                                e += wo[o] * x.at3(c, iy as usize, ix as usize);
                            }
                        }
                    }
                    let a = gk.data()[((o * 2 + c) * 3 + ky) * 3 + kx];
                    assert!((a - e).abs() <= 1e-12);
                }
            }
        }
    }
    let gb = g.grad(bv).unwrap();
    for o in 0..3 {
        assert!((gb.data()[o] - 36.0 * wo[o]).abs() <= 1e-12);
    }
}

#[test]
fn maxpool_matches_window_max() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (c, h, w, k, s) in [(1, 6, 6, 2, 2), (2, 7, 5, 3, 2), (3, 8, 8, 2, 1), (1, 5, 5, 5, 1)] {
        let x = random(&mut rng, &[c, h, w]);
        let mut g = Graph::new();
        let xv = g.constant(x.clone());
        let y = g.maxpool2d(xv, k, s).unwrap();
        let (oh, ow) = ((h - k) / s + 1, (w - k) / s + 1);
        assert_eq!(g.value(y).shape(), &[c, oh, ow]);
        for ch in 0..c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut m = f64::NEG_INFINITY;
                    for ky in 0..k {
                        for kx in 0..k {
                            m = m.max(x.at3(ch, oy * s + ky, ox * s + kx));
                        }
                    }
                    assert_eq!(g.value(y).at3(ch, oy, ox), m);
                }
            }
        }
    }
}

#[test]
fn maxpool_gradient_goes_to_first_maximum() {
    let x = Tensor::new(vec![1, 2, 4], vec![3.0, 1.0, 2.0, 2.0, 3.0, 0.0, 2.0, 1.0]).unwrap();
    let mut g = Graph::new();
    let xv = g.leaf(x);
    let y = g.maxpool2d(xv, 2, 2).unwrap();
    let s = g.gsp(y).unwrap();
    let w = g.constant(Tensor::scalar(1.0));
    let out = g.linear(s, w, w).unwrap();
    g.backward(out).unwrap();
    assert_eq!(g.grad(xv).unwrap().data(), &[1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
}

#[test]
fn pooling_matches_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random(&mut rng, &[3, 5, 7]);
    let mut g = Graph::new();
    let xv = g.constant(x.clone());
    let (s, a) = (g.gsp(xv).unwrap(), g.gap(xv).unwrap());
    for c in 0..3 {
        let mut e = 0.0;
        for y in 0..5 {
            for xx in 0..7 {
                e += x.at3(c, y, xx);
            }
        }
        assert!((g.value(s).data()[c] - e).abs() <= 1e-13);
        let rel = (g.value(a).data()[c] - e / 35.0).abs() / (e / 35.0).abs();
        assert!(rel <= 1e-15 * 4.0, "{rel}");
    }
}

#[test]
fn shared_subexpression_accumulates_both_paths() {
    // f(x) = w . gsp(relu(x) + relu(x)) has gradient 2 w_c on positive entries.
    let x = Tensor::new(vec![2, 1, 2], vec![0.5, -0.25, 1.5, 2.0]).unwrap();
    let mut g = Graph::new();
    let xv = g.leaf(x);
    let r = g.relu(xv).unwrap();
    let d = g.add(r, r).unwrap();
    let s = g.gsp(d).unwrap();
    let w = g.constant(Tensor::new(vec![2], vec![3.0, -1.0]).unwrap());
    let b = g.constant(Tensor::scalar(0.0));
    let out = g.linear(s, w, b).unwrap();
    g.backward(out).unwrap();
    assert_eq!(g.grad(xv).unwrap().data(), &[6.0, 0.0, -2.0, -2.0]);
}
