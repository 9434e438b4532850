//! 2-D convolution (cross-correlation, no kernel flip) with SAME zero padding.
//!
//! Layouts: input `[batch, H, W, c_in]`, kernels `[kh, kw, c_in, c_out]`,
//! output `[batch, ceil(H/stride), ceil(W/stride), c_out]`. Total padding along an
//! axis is `max((out − 1)·stride + k − in, 0)`, split floor before / ceil after.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::activation::Activation;
use crate::layers::LayerCache;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvParams {
    /// `[kh, kw, c_in, c_out]`
    pub kernels: Tensor,
    /// `[c_out]`
    pub b: Tensor,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub kernels: Tensor,
    pub b: Tensor,
    pub input: Tensor,
}

/// Output extent and leading pad for one spatial axis under SAME padding.
pub fn same_padding(input: usize, kernel: usize, stride: usize) -> (usize, usize) {
    let out = input.div_ceil(stride);
    let total = ((out - 1) * stride + kernel).saturating_sub(input);
    (out, total / 2)
}

#[derive(Clone, Copy)]
struct Geometry {
    batch: usize,
    h: usize,
    w: usize,
    cin: usize,
    kh: usize,
    kw: usize,
    cout: usize,
    oh: usize,
    ow: usize,
    pad_top: usize,
    pad_left: usize,
    stride: usize,
}

impl Geometry {
    /// Calls `f(out_offset, in_offset, kernel_offset)` for every in-bounds tap,
    /// where the kernel offset points at `[ky, kx, 0, 0]`.
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        for n in 0..self.batch {
            for oy in 0..self.oh {
                for ox in 0..self.ow {
                    let out_off = ((n * self.oh + oy) * self.ow + ox) * self.cout;
                    for ky in 0..self.kh {
                        let iy = (oy * self.stride + ky) as isize - self.pad_top as isize;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        for kx in 0..self.kw {
                            let ix = (ox * self.stride + kx) as isize - self.pad_left as isize;
                            if ix < 0 || ix >= self.w as isize {
                                continue;
                            }
                            let in_off = ((n * self.h + iy as usize) * self.w + ix as usize) * self.cin;
                            let k_off = (ky * self.kw + kx) * self.cin * self.cout;
                            f(out_off, in_off, k_off);
                        }
                    }
                }
            }
        }
    }
}

impl ConvParams {
    pub fn new(kernels: Tensor, b: Tensor, stride: usize) -> Result<Self> {
        let &[_, _, _, cout] = kernels.shape() else {
            return Err(Error::Argument(format!(
                "conv kernels must be [kh, kw, c_in, c_out], got {:?}",
                kernels.shape()
            )));
        };
        if b.shape() != [cout] {
            return Err(Error::dim("conv bias", b.shape(), &[cout]));
        }
        if stride == 0 {
            return Err(Error::Argument("conv stride must be at least 1".into()));
        }
        Ok(ConvParams { kernels, b, stride })
    }

    fn geometry(&self, x: &Tensor) -> Result<Geometry> {
        let &[batch, h, w, cin] = x.shape() else {
            return Err(Error::Argument(format!(
                "conv input must be [batch, H, W, c], got {:?}",
                x.shape()
            )));
        };
        let &[kh, kw, kcin, cout] = self.kernels.shape() else {
            unreachable!("checked in ConvParams::new")
        };
        if kcin != cin {
            return Err(Error::dim("conv channels", x.shape(), self.kernels.shape()));
        }
        let (oh, pad_top) = same_padding(h, kh, self.stride);
        let (ow, pad_left) = same_padding(w, kw, self.stride);
        Ok(Geometry {
            batch,
            h,
            w,
            cin,
            kh,
            kw,
            cout,
            oh,
            ow,
            pad_top,
            pad_left,
            stride: self.stride,
        })
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let g = self.geometry(&Tensor::zeros(input))?;
        Ok(vec![g.batch, g.oh, g.ow, g.cout])
    }
}

pub fn conv2d_forward(params: &ConvParams, x: &Tensor, act: Activation) -> Result<(Tensor, LayerCache)> {
    let g = params.geometry(x)?;
    let mut out = vec![0.0; g.batch * g.oh * g.ow * g.cout];
    for chunk in out.chunks_mut(g.cout) {
        chunk.copy_from_slice(params.b.data());
    }
    let xd = x.data();
    let kd = params.kernels.data();
    g.for_each_tap(|o, i, k| {
        let acc = &mut out[o..o + g.cout];
        for ci in 0..g.cin {
            let xv = xd[i + ci];
            let krow = &kd[k + ci * g.cout..k + (ci + 1) * g.cout];
            for (a, &kv) in acc.iter_mut().zip(krow) {
                *a += xv * kv;
            }
        }
    });
    let z = Tensor::new(vec![g.batch, g.oh, g.ow, g.cout], out)?;
    let a = act.apply(&z);
    Ok((a.clone(), LayerCache { input: x.clone(), z, a }))
}

/// Backward pass given `∂E/∂a` for the layer output.
pub fn conv2d_backward(
    params: &ConvParams,
    cache: &LayerCache,
    upstream: &Tensor,
    act: Activation,
) -> Result<ConvGrads> {
    if upstream.shape() != cache.z.shape() {
        return Err(Error::dim("conv backward", upstream.shape(), cache.z.shape()));
    }
    let g = params.geometry(&cache.input)?;
    let delta = act.backward(&cache.z, &cache.a, upstream)?;
    let dd = delta.data();
    let xd = cache.input.data();
    let kd = params.kernels.data();
    let mut gk = vec![0.0; kd.len()];
    let mut gx = vec![0.0; xd.len()];
    g.for_each_tap(|o, i, k| {
        let d = &dd[o..o + g.cout];
        for ci in 0..g.cin {
            let xv = xd[i + ci];
            let krow = &kd[k + ci * g.cout..k + (ci + 1) * g.cout];
            let gkrow = &mut gk[k + ci * g.cout..k + (ci + 1) * g.cout];
            let mut acc = 0.0;
            for ((gkv, &kv), &dv) in gkrow.iter_mut().zip(krow).zip(d) {
                *gkv += xv * dv;
                acc += kv * dv;
            }
            gx[i + ci] += acc;
        }
    });
    let mut gb = vec![0.0; g.cout];
    for chunk in dd.chunks(g.cout) {
        for (b, &v) in gb.iter_mut().zip(chunk) {
            *b += v;
        }
    }
    Ok(ConvGrads {
        kernels: Tensor::new(params.kernels.shape().to_vec(), gk)?,
        b: Tensor::new(vec![g.cout], gb)?,
        input: Tensor::new(cache.input.shape().to_vec(), gx)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::dense::{dense_backward, dense_forward, DenseParams};

    #[test]
    fn same_padding_shapes() {
        assert_eq!(same_padding(3, 3, 2), (2, 1));
        assert_eq!(same_padding(28, 5, 1), (28, 2));
        assert_eq!(same_padding(28, 5, 2), (14, 1));
        assert_eq!(same_padding(14, 4, 2), (7, 1));
        assert_eq!(same_padding(4, 1, 1), (4, 0));
        // even total padding splits floor-left
        assert_eq!(same_padding(5, 4, 1), (5, 1));
    }

    #[test]
    fn unit_kernel_is_identity_plus_bias() {
        let p = ConvParams::new(Tensor::ones(&[1, 1, 1, 1]), Tensor::new(vec![1], vec![0.5]).unwrap(), 1).unwrap();
        let x = Tensor::new(vec![1, 2, 3, 1], vec![-3.0, -1.0, 0.0, 1.0, 2.0, 4.0]).unwrap();
        let (y, _) = conv2d_forward(&p, &x, Activation::Relu).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0, 0.5, 1.5, 2.5, 4.5]);
    }

    #[test]
    fn stride_two_output_shape() {
        let p = ConvParams::new(Tensor::ones(&[3, 3, 2, 4]), Tensor::zeros(&[4]), 2).unwrap();
        let x = Tensor::ones(&[2, 3, 3, 2]);
        let (y, _) = conv2d_forward(&p, &x, Activation::Linear).unwrap();
        assert_eq!(y.shape(), &[2, 2, 2, 4]);
    }

    #[test]
    fn zero_kernels_relu_zeros() {
        let p = ConvParams::new(Tensor::zeros(&[5, 5, 1, 3]), Tensor::zeros(&[3]), 1).unwrap();
        let x = Tensor::full(&[1, 4, 4, 1], 0.7);
        let (y, _) = conv2d_forward(&p, &x, Activation::Relu).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn channel_mismatch() {
        let p = ConvParams::new(Tensor::zeros(&[3, 3, 2, 1]), Tensor::zeros(&[1]), 1).unwrap();
        assert!(matches!(
            conv2d_forward(&p, &Tensor::zeros(&[1, 4, 4, 3]), Activation::Linear),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn known_3x3_cross_correlation() {
        // 3x3 input, 2x2 kernel, stride 1: pad 0 before, 1 after on both axes
        let x = Tensor::new(vec![1, 3, 3, 1], (1..=9).map(f64::from).collect()).unwrap();
        let k = Tensor::new(vec![2, 2, 1, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let p = ConvParams::new(k, Tensor::zeros(&[1]), 1).unwrap();
        let (y, _) = conv2d_forward(&p, &x, Activation::Linear).unwrap();
        // y[0,0] = 1·1 + 2·2 + 4·3 + 5·4 = 37 ; y[2,2] = 9·1 = 9 ; y[0,2] = 3·1 + 6·3 = 21
        assert_eq!(y.data()[0], 37.0);
        assert_eq!(y.data()[2], 21.0);
        assert_eq!(y.data()[8], 9.0);
    }

    #[test]
    fn zero_upstream_zero_grads() {
        let p = ConvParams::new(Tensor::full(&[3, 3, 1, 2], 0.3), Tensor::zeros(&[2]), 2).unwrap();
        let x = Tensor::full(&[1, 5, 5, 1], 0.2);
        let (y, cache) = conv2d_forward(&p, &x, Activation::Sigmoid).unwrap();
        let g = conv2d_backward(&p, &cache, &Tensor::zeros(y.shape()), Activation::Sigmoid).unwrap();
        assert!(g
            .kernels
            .data()
            .iter()
            .chain(g.b.data())
            .chain(g.input.data())
            .all(|&v| v == 0.0));
    }

    #[test]
    fn pointwise_kernel_matches_dense_per_pixel() {
        let (cin, cout) = (3, 2);
        let kd: Vec<f64> = (0..cin * cout).map(|i| 0.1 * i as f64 - 0.2).collect();
        let kernels = Tensor::new(vec![1, 1, cin, cout], kd.clone()).unwrap();
        let bias = Tensor::new(vec![cout], vec![0.05, -0.1]).unwrap();
        let conv = ConvParams::new(kernels, bias.clone(), 1).unwrap();
        // dense weight is the transposed pointwise kernel
        let mut wd = vec![0.0; cout * cin];
        for ci in 0..cin {
            for co in 0..cout {
                wd[co * cin + ci] = kd[ci * cout + co];
            }
        }
        let dense = DenseParams::new(Tensor::new(vec![cout, cin], wd).unwrap(), None, bias).unwrap();

        let x = Tensor::new(vec![1, 2, 2, cin], (0..12).map(|i| (i as f64).sin()).collect()).unwrap();
        let up = Tensor::new(vec![1, 2, 2, cout], (0..8).map(|i| (i as f64).cos()).collect()).unwrap();

        let (yc, cc) = conv2d_forward(&conv, &x, Activation::Sigmoid).unwrap();
        let gc = conv2d_backward(&conv, &cc, &up, Activation::Sigmoid).unwrap();
        let xp = x.reshape(&[4, cin]).unwrap();
        let (yd, cd) = dense_forward(&dense, &xp, Activation::Sigmoid).unwrap();
        let gd = dense_backward(&dense, &cd, &up.reshape(&[4, cout]).unwrap(), Activation::Sigmoid).unwrap();

        for (a, b) in yc.data().iter().zip(yd.data()) {
            assert!((a - b).abs() < 1e-14);
        }
        for (a, b) in gc.input.data().iter().zip(gd.input.data()) {
            assert!((a - b).abs() < 1e-14);
        }
        for ci in 0..cin {
            for co in 0..cout {
                let a = gc.kernels.data()[ci * cout + co];
                let b = gd.w.data()[co * cin + ci];
                assert!((a - b).abs() < 1e-14);
            }
        }
        for (a, b) in gc.b.data().iter().zip(gd.b.data()) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
