//! Layer kernels. All tensors are per-sample `[channels, height, width]`
//! slices; batching happens one level up.

use rand::Rng;

use super::Real;

/// Stride-1 convolution with "same" zero padding and odd kernel sizes,
/// lowered to a GEMM over an im2col buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    /// `[out][in][kh][kw]`.
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Conv2d<T> {
    pub fn new(in_channels: usize, out_channels: usize, kernel: (usize, usize), rng: &mut impl Rng) -> Self {
        let fan_in = in_channels * kernel.0 * kernel.1;
        Conv2d {
            in_channels,
            out_channels,
            kernel,
            weight: uniform_init(out_channels * fan_in, fan_in, rng),
            bias: uniform_init(out_channels, fan_in, rng),
        }
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel.0 * self.kernel.1
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    /// Fills `col` (`[in * kh * kw][h * w]`) with shifted copies of `input`.
    fn im2col(&self, input: &[T], h: usize, w: usize, col: &mut Vec<T>) {
        let (kh, kw) = self.kernel;
        let (ph, pw) = (kh / 2, kw / 2);
        let hw = h * w;
        col.clear();
        col.resize(self.patch_len() * hw, T::zero());
        for ci in 0..self.in_channels {
            let plane = &input[ci * hw..(ci + 1) * hw];
            for ky in 0..kh {
                for kx in 0..kw {
                    let row = &mut col[((ci * kh + ky) * kw + kx) * hw..][..hw];
                    let x0 = pw.saturating_sub(kx);
                    let x1 = (w + pw).saturating_sub(kx).min(w);
                    if x0 >= x1 {
                        continue;
                    }
                    for y in 0..h {
                        let sy = y + ky;
                        if sy < ph || sy - ph >= h {
                            continue;
                        }
                        let src = &plane[(sy - ph) * w..][..w];
                        row[y * w + x0..y * w + x1].copy_from_slice(&src[x0 + kx - pw..x1 + kx - pw]);
                    }
                }
            }
        }
    }

    /// Accumulates `col` gradients back onto the input image.
    fn col2im(&self, dcol: &[T], h: usize, w: usize, dinput: &mut [T]) {
        let (kh, kw) = self.kernel;
        let (ph, pw) = (kh / 2, kw / 2);
        let hw = h * w;
        dinput.fill(T::zero());
        for ci in 0..self.in_channels {
            let plane = &mut dinput[ci * hw..(ci + 1) * hw];
            for ky in 0..kh {
                for kx in 0..kw {
                    let row = &dcol[((ci * kh + ky) * kw + kx) * hw..][..hw];
                    let x0 = pw.saturating_sub(kx);
                    let x1 = (w + pw).saturating_sub(kx).min(w);
                    if x0 >= x1 {
                        continue;
                    }
                    for y in 0..h {
                        let sy = y + ky;
                        if sy < ph || sy - ph >= h {
                            continue;
                        }
                        let dst = &mut plane[(sy - ph) * w..][..w];
                        for (d, &g) in dst[x0 + kx - pw..x1 + kx - pw].iter_mut().zip(&row[y * w + x0..y * w + x1]) {
                            *d += g;
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&self, input: &[T], h: usize, w: usize, out: &mut [T], col: &mut Vec<T>) {
        let hw = h * w;
        self.im2col(input, h, w, col);
        for (co, &b) in self.bias.iter().enumerate() {
            out[co * hw..(co + 1) * hw].fill(b);
        }
        let k = self.patch_len();
        T::gemm(self.out_channels, k, hw, T::one(), &self.weight, (k, 1), col, (hw, 1), T::one(), out, (hw, 1));
    }

    /// Adds parameter gradients into `grad_w` / `grad_b` and, when
    /// requested, writes the input gradient.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        input: &[T],
        h: usize,
        w: usize,
        dout: &[T],
        grad_w: &mut [T],
        grad_b: &mut [T],
        dinput: Option<&mut [T]>,
        col: &mut Vec<T>,
        dcol: &mut Vec<T>,
    ) {
        let hw = h * w;
        let k = self.patch_len();
        self.im2col(input, h, w, col);
        // dW += dout * col^T
        T::gemm(self.out_channels, hw, k, T::one(), dout, (hw, 1), col, (1, hw), T::one(), grad_w, (k, 1));
        for (co, gb) in grad_b.iter_mut().enumerate() {
            *gb += dout[co * hw..(co + 1) * hw].iter().copied().sum::<T>();
        }
        if let Some(dinput) = dinput {
            dcol.clear();
            dcol.resize(k * hw, T::zero());
            // dcol = W^T * dout
            T::gemm(k, self.out_channels, hw, T::one(), &self.weight, (1, k), dout, (hw, 1), T::zero(), dcol, (hw, 1));
            self.col2im(dcol, h, w, dinput);
        }
    }
}

/// Non-overlapping average pooling (stride = kernel, no padding, trailing
/// rows/columns that do not fill a window are dropped).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AvgPool2d {
    pub kernel: (usize, usize),
}

impl AvgPool2d {
    pub fn output_hw(&self, h: usize, w: usize) -> (usize, usize) {
        (h / self.kernel.0, w / self.kernel.1)
    }

    pub fn forward<T: Real>(&self, input: &[T], c: usize, h: usize, w: usize, out: &mut [T]) {
        let (kh, kw) = self.kernel;
        let (oh, ow) = self.output_hw(h, w);
        let scale = T::one() / T::from_usize(kh * kw).unwrap();
        for ch in 0..c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = T::zero();
                    for dy in 0..kh {
                        let row = &input[(ch * h + oy * kh + dy) * w + ox * kw..][..kw];
                        for &v in row {
                            acc += v;
                        }
                    }
                    out[(ch * oh + oy) * ow + ox] = acc * scale;
                }
            }
        }
    }

    pub fn backward<T: Real>(&self, dout: &[T], c: usize, h: usize, w: usize, dinput: &mut [T]) {
        let (kh, kw) = self.kernel;
        let (oh, ow) = self.output_hw(h, w);
        let scale = T::one() / T::from_usize(kh * kw).unwrap();
        dinput.fill(T::zero());
        for ch in 0..c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let g = dout[(ch * oh + oy) * ow + ox] * scale;
                    for dy in 0..kh {
                        for v in &mut dinput[(ch * h + oy * kh + dy) * w + ox * kw..][..kw] {
                            *v = g;
                        }
                    }
                }
            }
        }
    }
}

/// Fully connected layer `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    /// `[out][in]`.
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Dense<T> {
    pub fn new(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        Dense {
            inputs,
            outputs,
            weight: uniform_init(inputs * outputs, inputs, rng),
            bias: uniform_init(outputs, inputs, rng),
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn forward(&self, input: &[T], out: &mut [T]) {
        for (o, y) in out.iter_mut().enumerate() {
            let row = &self.weight[o * self.inputs..(o + 1) * self.inputs];
            *y = self.bias[o] + row.iter().zip(input).map(|(&w, &x)| w * x).sum::<T>();
        }
    }

    pub fn backward(&self, input: &[T], dout: &[T], grad_w: &mut [T], grad_b: &mut [T], dinput: Option<&mut [T]>) {
        for (o, &g) in dout.iter().enumerate() {
            grad_b[o] += g;
            if g == T::zero() {
                continue;
            }
            for (gw, &x) in grad_w[o * self.inputs..(o + 1) * self.inputs].iter_mut().zip(input) {
                *gw += g * x;
            }
        }
        if let Some(dinput) = dinput {
            dinput.fill(T::zero());
            for (o, &g) in dout.iter().enumerate() {
                if g == T::zero() {
                    continue;
                }
                for (d, &w) in dinput.iter_mut().zip(&self.weight[o * self.inputs..(o + 1) * self.inputs]) {
                    *d += g * w;
                }
            }
        }
    }
}

pub fn relu_forward<T: Real>(values: &mut [T]) {
    for v in values {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Masks `grad` where the ReLU output was not positive.
pub fn relu_backward<T: Real>(output: &[T], grad: &mut [T]) {
    for (g, &y) in grad.iter_mut().zip(output) {
        if y <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
fn uniform_init<T: Real>(len: usize, fan_in: usize, rng: &mut impl Rng) -> Vec<T> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    (0..len).map(|_| T::from_f64_lossy(rng.random_range(-bound..=bound))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Direct-loop convolution used as reference.
    fn naive_conv(conv: &Conv2d<f64>, x: &[f64], h: usize, w: usize) -> Vec<f64> {
        let (kh, kw) = conv.kernel;
        let mut out = vec![0.0; conv.out_channels * h * w];
        for co in 0..conv.out_channels {
            for y in 0..h {
                for xx in 0..w {
                    let mut acc = conv.bias[co];
                    for ci in 0..conv.in_channels {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let sy = y as isize + ky as isize - (kh / 2) as isize;
                                let sx = xx as isize + kx as isize - (kw / 2) as isize;
                                if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                    continue;
                                }
                                acc += conv.weight[((co * conv.in_channels + ci) * kh + ky) * kw + kx]
                                    * x[(ci * h + sy as usize) * w + sx as usize];
                            }
                        }
                    }
                    out[(co * h + y) * w + xx] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_direct_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(cin, cout, h, w, k) in
            &[(1, 2, 5, 4, (3, 3)), (3, 4, 6, 7, (3, 3)), (2, 1, 4, 1, (3, 3)), (2, 3, 5, 5, (1, 3))]
        {
            let conv = Conv2d::<f64>::new(cin, cout, k, &mut rng);
            let x: Vec<f64> = (0..cin * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut out = vec![0.0; cout * h * w];
            conv.forward(&x, h, w, &mut out, &mut Vec::new());
            let reference = naive_conv(&conv, &x, h, w);
            for (a, b) in out.iter().zip(&reference) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pooling_constant_is_constant() {
        let pool = AvgPool2d { kernel: (2, 2) };
        let x = vec![2.5f64; 3 * 8 * 6];
        let mut out = vec![0.0; 3 * 4 * 3];
        pool.forward(&x, 3, 8, 6, &mut out);
        assert!(out.iter().all(|&v| (v - 2.5).abs() < 1e-15));
        let pool = AvgPool2d { kernel: (2, 1) };
        let mut out = vec![0.0; 3 * 4 * 6];
        pool.forward(&x, 3, 8, 6, &mut out);
        assert!(out.iter().all(|&v| (v - 2.5).abs() < 1e-15));
    }

    #[test]
    fn pooling_drops_ragged_edge() {
        let pool = AvgPool2d { kernel: (2, 2) };
        assert_eq!(pool.output_hw(5, 3), (2, 1));
        let x: Vec<f64> = (0..15).map(|i| i as f64).collect();
        let mut out = vec![0.0; 2];
        pool.forward(&x, 1, 5, 3, &mut out);
        assert_eq!(out, vec![(0.0 + 1.0 + 3.0 + 4.0) / 4.0, (6.0 + 7.0 + 9.0 + 10.0) / 4.0]);
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dense = Dense::<f32>::new(100, 10, &mut rng);
        assert!(dense.weight.iter().all(|w| w.abs() <= 0.1));
        assert_eq!(dense.param_count(), 1010);
    }
}
