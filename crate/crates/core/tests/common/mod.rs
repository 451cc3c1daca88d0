//! Reference implementations shared by the integration and acceptance
//! tests. Everything here is written from the definitions, not from the
//! library code: direct O(n^2) DFTs and central finite differences.
#![allow(dead_code, clippy::needless_range_loop)]

use std::f64::consts::PI;

use num_complex::Complex64;
use radarbeam::nn::layers::{relu_backward, relu_forward, AvgPool2d, Conv2d, Dense};
use radarbeam::nn::{sample_loss, CnnModel, ConvSpec, ModelSpec, Workspace};
use radarbeam::sim::RadarFrame;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_frame(shape: [usize; 3], rng: &mut impl Rng) -> RadarFrame {
    let mut frame = RadarFrame::zeros(shape);
    for z in &mut frame.data {
        *z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    }
    frame
}

/// `X[k] = sum_n x[n] exp(-j 2 pi k n / len)` with `x` zero-padded to `len`.
pub fn naive_dft(x: &[Complex64], len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(n, &v)| v * Complex64::from_polar(1.0, -2.0 * PI * (k * n) as f64 / len as f64))
                .sum()
        })
        .collect()
}

/// Bin of the unshifted spectrum shown at position `i` after an fftshift.
fn shifted(i: usize, n: usize) -> usize {
    (i + n - n / 2) % n
}

fn x(frame: &RadarFrame, m: usize, s: usize, a: usize) -> Complex64 {
    let [_, ns, na] = frame.shape;
    frame.data[(m * ns + s) * na + a]
}

/// Range spectrum `R[m][k][a]`.
fn range_spectrum(frame: &RadarFrame) -> Vec<Vec<Vec<Complex64>>> {
    let [m_r, s, a] = frame.shape;
    (0..m_r)
        .map(|m| {
            let cols: Vec<Vec<Complex64>> =
                (0..a).map(|ai| naive_dft(&(0..s).map(|si| x(frame, m, si, ai)).collect::<Vec<_>>(), s)).collect();
            (0..s).map(|k| (0..a).map(|ai| cols[ai][k]).collect()).collect()
        })
        .collect()
}

/// Range-angle map `[S][M_F]`.
pub fn reference_range_angle(frame: &RadarFrame, mf: usize, clutter_removal: bool) -> Vec<f64> {
    let [m_r, s, a] = frame.shape;
    let mut r = range_spectrum(frame);
    if clutter_removal {
        for row in r.iter_mut().flat_map(|per_m| per_m.iter_mut()) {
            let mean = row.iter().sum::<Complex64>() / a as f64;
            row.iter_mut().for_each(|z| *z -= mean);
        }
    }
    let mut out = vec![0.0; s * mf];
    for k in 0..s {
        for ai in 0..a {
            let across: Vec<Complex64> = (0..m_r).map(|m| r[m][k][ai]).collect();
            let spec = naive_dft(&across, mf);
            for i in 0..mf {
                out[k * mf + i] += spec[shifted(i, mf)].norm();
            }
        }
    }
    out
}

/// Range-Doppler spectrum `D[m][k][d]`.
fn range_doppler(frame: &RadarFrame) -> Vec<Vec<Vec<Complex64>>> {
    let [_, _, a] = frame.shape;
    range_spectrum(frame).into_iter().map(|per_m| per_m.into_iter().map(|row| naive_dft(&row, a)).collect()).collect()
}

/// Range-velocity map `[S][A]`.
pub fn reference_range_velocity(frame: &RadarFrame) -> Vec<f64> {
    let [m_r, s, a] = frame.shape;
    let d = range_doppler(frame);
    let mut out = vec![0.0; s * a];
    for k in 0..s {
        for i in 0..a {
            out[k * a + i] = (0..m_r).map(|m| d[m][k][shifted(i, a)].norm()).sum();
        }
    }
    out
}

/// Radar cube `[M_r][S][A]`.
pub fn reference_radar_cube(frame: &RadarFrame) -> Vec<f64> {
    let [m_r, s, a] = frame.shape;
    let d = range_doppler(frame);
    let mut out = vec![0.0; m_r * s * a];
    for k in 0..s {
        for di in 0..a {
            let across: Vec<Complex64> = (0..m_r).map(|m| d[m][k][shifted(di, a)]).collect();
            let spec = naive_dft(&across, m_r);
            for q in 0..m_r {
                out[(q * s + k) * a + di] = spec[shifted(q, m_r)].norm();
            }
        }
    }
    out
}

/// `max |a - b| / max |b|`.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Circular distance between bins on an axis of `n` bins.
pub fn circular_distance(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b) % n;
    d.min(n - d)
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

pub const FD_STEP: f64 = 1e-6;

/// Central differences of `f` at `x`.
pub fn numeric_gradient(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + FD_STEP;
            let up = f(&probe);
            probe[i] = orig - FD_STEP;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

pub fn uniform(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Values bounded away from zero so ReLU kinks are never crossed by a
/// finite-difference probe.
pub fn away_from_zero(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let v: f64 = rng.random_range(0.05..1.0);
            if rng.random_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Named relative errors of every gradient of one layer kind.
pub type GradReport = Vec<(String, f64)>;

/// Conv2d: input, weight and bias gradients of `L = r . conv(x)`.
pub fn check_conv(seed: u64, c_in: usize, c_out: usize, h: usize, w: usize, kernel: (usize, usize)) -> GradReport {
    let mut g = rng(seed);
    let conv: Conv2d<f64> = Conv2d::new(c_in, c_out, kernel, &mut g);
    let input = uniform(c_in * h * w, &mut g);
    let r = uniform(c_out * h * w, &mut g);
    let eval = |conv: &Conv2d<f64>, input: &[f64]| {
        let mut out = vec![0.0; c_out * h * w];
        conv.forward(input, h, w, &mut out, &mut Vec::new());
        dot(&out, &r)
    };
    let mut gw = vec![0.0; conv.weight.len()];
    let mut gb = vec![0.0; conv.bias.len()];
    let mut gx = vec![0.0; input.len()];
    conv.backward(&input, h, w, &r, &mut gw, &mut gb, Some(&mut gx), &mut Vec::new(), &mut Vec::new());

    let nx = numeric_gradient(&input, |x| eval(&conv, x));
    let nw = numeric_gradient(&conv.weight, |p| eval(&Conv2d { weight: p.to_vec(), ..conv.clone() }, &input));
    let nb = numeric_gradient(&conv.bias, |p| eval(&Conv2d { bias: p.to_vec(), ..conv.clone() }, &input));
    vec![
        ("conv input".into(), relative_l2(&gx, &nx)),
        ("conv weight".into(), relative_l2(&gw, &nw)),
        ("conv bias".into(), relative_l2(&gb, &nb)),
    ]
}

pub fn check_dense(seed: u64, inputs: usize, outputs: usize) -> GradReport {
    let mut g = rng(seed);
    let dense: Dense<f64> = Dense::new(inputs, outputs, &mut g);
    let input = uniform(inputs, &mut g);
    let r = uniform(outputs, &mut g);
    let eval = |d: &Dense<f64>, x: &[f64]| {
        let mut out = vec![0.0; outputs];
        d.forward(x, &mut out);
        dot(&out, &r)
    };
    let mut gw = vec![0.0; dense.weight.len()];
    let mut gb = vec![0.0; outputs];
    let mut gx = vec![0.0; inputs];
    dense.backward(&input, &r, &mut gw, &mut gb, Some(&mut gx));
    let nx = numeric_gradient(&input, |x| eval(&dense, x));
    let nw = numeric_gradient(&dense.weight, |p| eval(&Dense { weight: p.to_vec(), ..dense.clone() }, &input));
    let nb = numeric_gradient(&dense.bias, |p| eval(&Dense { bias: p.to_vec(), ..dense.clone() }, &input));
    vec![
        ("dense input".into(), relative_l2(&gx, &nx)),
        ("dense weight".into(), relative_l2(&gw, &nw)),
        ("dense bias".into(), relative_l2(&gb, &nb)),
    ]
}

pub fn check_pool(seed: u64, c: usize, h: usize, w: usize, kernel: (usize, usize)) -> GradReport {
    let mut g = rng(seed);
    let pool = AvgPool2d { kernel };
    let (oh, ow) = pool.output_hw(h, w);
    let input = uniform(c * h * w, &mut g);
    let r = uniform(c * oh * ow, &mut g);
    let mut gx = vec![0.0; input.len()];
    pool.backward(&r, c, h, w, &mut gx);
    let nx = numeric_gradient(&input, |x| {
        let mut out = vec![0.0; c * oh * ow];
        pool.forward(x, c, h, w, &mut out);
        dot(&out, &r)
    });
    vec![("avgpool input".into(), relative_l2(&gx, &nx))]
}

pub fn check_relu(seed: u64, n: usize) -> GradReport {
    let mut g = rng(seed);
    let input = away_from_zero(n, &mut g);
    let r = uniform(n, &mut g);
    let mut out = input.clone();
    relu_forward(&mut out);
    let mut gx = r.clone();
    relu_backward(&out, &mut gx);
    let nx = numeric_gradient(&input, |x| {
        let mut y = x.to_vec();
        relu_forward(&mut y);
        dot(&y, &r)
    });
    vec![("relu input".into(), relative_l2(&gx, &nx))]
}

pub fn check_loss(seed: u64, n_classes: usize) -> GradReport {
    let mut g = rng(seed);
    let logits: Vec<f64> = uniform(n_classes, &mut g).iter().map(|v| 3.0 * v).collect();
    let label = g.random_range(0..n_classes);
    let mut grad = vec![0.0; n_classes];
    sample_loss(&logits, label, 1.0, &mut grad);
    let num = numeric_gradient(&logits, |z| sample_loss(z, label, 1.0, &mut vec![0.0; n_classes]));
    vec![("cross-entropy logits".into(), relative_l2(&grad, &num))]
}

/// Whole model: every parameter tensor of a small network with two conv
/// blocks and two dense layers, against the scaled cross-entropy.
pub fn check_model(seed: u64) -> GradReport {
    let spec = ModelSpec {
        input_shape: [2, 6, 4],
        convs: vec![ConvSpec { channels: 3, pool: Some((2, 2)) }, ConvSpec { channels: 2, pool: None }],
        hidden: vec![5],
        n_outputs: 4,
    };
    let mut g = rng(seed);
    let model: CnnModel<f64> = CnnModel::from_spec(&spec, None, seed).unwrap();
    let input = uniform(2 * 6 * 4, &mut g);
    let label = 2;
    let loss_of = |m: &CnnModel<f64>| {
        let logits = m.logits(&input).unwrap();
        sample_loss(&logits, label, 1.0, &mut vec![0.0; logits.len()])
    };
    let mut ws = Workspace::default();
    let logits = model.forward_sample(&input, &mut ws).unwrap().to_vec();
    let mut dlogits = vec![0.0; logits.len()];
    sample_loss(&logits, label, 1.0, &mut dlogits);
    let mut grads = model.zero_grads();
    model.backward_sample(&dlogits, &mut grads, &mut ws);

    let params: Vec<Vec<f64>> = model.params().into_iter().map(|p| p.to_vec()).collect();
    let mut report = Vec::new();
    for (t, values) in params.iter().enumerate() {
        let num = numeric_gradient(values, |p| {
            let mut m = model.clone();
            m.params_mut()[t].copy_from_slice(p);
            loss_of(&m)
        });
        report.push((format!("model tensor {t}"), relative_l2(&grads[t], &num)));
    }
    report
}

/// Every layer check at a few sizes.
pub fn gradient_suite(seed: u64) -> GradReport {
    let mut all = Vec::new();
    all.extend(check_conv(seed, 2, 3, 5, 4, (3, 3)));
    all.extend(check_conv(seed + 1, 1, 2, 4, 6, (3, 1)));
    all.extend(check_conv(seed + 2, 3, 1, 3, 3, (1, 3)));
    all.extend(check_dense(seed + 3, 7, 5));
    all.extend(check_pool(seed + 4, 2, 6, 4, (2, 2)));
    all.extend(check_pool(seed + 5, 3, 5, 7, (2, 3)));
    all.extend(check_relu(seed + 6, 40));
    all.extend(check_loss(seed + 7, 64));
    all.extend(check_model(seed + 8));
    all
}
