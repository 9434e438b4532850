//! Shared by the gradient tests and the acceptance runner.
#![allow(dead_code)]

use dwnet::data::idx::{encode_images, encode_labels};
use dwnet::gradcheck::{gradient_check, relu_margin};
use dwnet::layers::{dense_backward, dense_forward};
use dwnet::{draw_truncated_normal, Activation, ConvParams, DenseParams, Layer, Loss, Model, Rng, Tensor};

pub const EPS: f64 = 1e-5;
pub const TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug)]
pub enum Kind {
    Dense,
    DoubleWeight,
    Conv,
}

pub fn normal(rng: &mut Rng, shape: &[usize], sigma: f64) -> Tensor {
    draw_truncated_normal(rng, shape, 0.0, sigma).unwrap()
}

/// A random 2-3 layer network of the given kind, plus a batch and targets.
pub fn random_case(rng: &mut Rng, kind: Kind, hidden: Activation, loss: Loss) -> (Model, Tensor, Tensor) {
    let out = 2 + (rng.next_u64() % 3) as usize;
    let batch = 1 + (rng.next_u64() % 3) as usize;
    let out_act = match loss {
        Loss::CrossEntropy => Activation::Softmax,
        Loss::Sse => hidden,
    };
    // scaled so pre-activations are O(1): saturated units have gradients far below
    // what central differences of an O(1) loss can resolve
    let dense = |rng: &mut Rng, fan_in: usize, units: usize, dw: bool, act: Activation| {
        let sigma = if dw {
            (fan_in as f64).powf(-0.25)
        } else {
            (fan_in as f64).powf(-0.5)
        };
        Layer::Dense {
            params: DenseParams::new(
                normal(rng, &[units, fan_in], sigma),
                dw.then(|| normal(rng, &[units, fan_in], sigma)),
                normal(rng, &[units], 0.3),
            )
            .unwrap(),
            activation: act,
        }
    };
    let (input_shape, layers) = match kind {
        Kind::Dense | Kind::DoubleWeight => {
            let dw = matches!(kind, Kind::DoubleWeight);
            let m = 2 + (rng.next_u64() % 4) as usize;
            let h = 2 + (rng.next_u64() % 4) as usize;
            (
                [1, 1, m],
                vec![dense(rng, m, h, dw, hidden), dense(rng, h, out, dw, out_act)],
            )
        }
        Kind::Conv => {
            let side = 3 + (rng.next_u64() % 3) as usize;
            let cin = 1 + (rng.next_u64() % 2) as usize;
            let depth = 1 + (rng.next_u64() % 3) as usize;
            let window = 1 + (rng.next_u64() % 3) as usize;
            let stride = 1 + (rng.next_u64() % 2) as usize;
            let params = ConvParams::new(
                normal(
                    rng,
                    &[window, window, cin, depth],
                    ((window * window * cin) as f64).powf(-0.5),
                ),
                normal(rng, &[depth], 0.3),
                stride,
            )
            .unwrap();
            let o = params.output_shape(&[1, side, side, cin]).unwrap();
            let fan_in = o[1] * o[2] * o[3];
            (
                [side, side, cin],
                vec![
                    Layer::Conv {
                        params,
                        activation: hidden,
                    },
                    dense(rng, fan_in, out, false, out_act),
                ],
            )
        }
    };
    let model = Model::from_layers(input_shape, layers, loss);
    let [h, w, c] = input_shape;
    let target = match loss {
        Loss::CrossEntropy => {
            let mut t = vec![0.0; batch * out];
            for r in 0..batch {
                t[r * out + (rng.next_u64() as usize % out)] = 1.0;
            }
            Tensor::new(vec![batch, out], t).unwrap()
        }
        Loss::Sse => normal(rng, &[batch, out], 0.5),
    };
    // redraw inputs until every ReLU pre-activation is clear of the kink
    for _ in 0..100 {
        let x = normal(rng, &[batch, h, w, c], 1.0);
        if relu_margin(&model, &x).unwrap().map_or(true, |m| m > 1e-3) {
            return (model, x, target);
        }
    }
    panic!("no kink-free input found");
}

/// Worst relative error per kind/activation/loss combination over `cases` random
/// configurations each.
pub fn random_configuration_sweep(cases: usize) -> Vec<(String, f64)> {
    let mut worst = Vec::new();
    for (ki, kind) in [Kind::Dense, Kind::DoubleWeight, Kind::Conv].into_iter().enumerate() {
        for (ai, act) in [Activation::Sigmoid, Activation::Relu, Activation::Linear]
            .into_iter()
            .enumerate()
        {
            for (li, loss) in [Loss::Sse, Loss::CrossEntropy].into_iter().enumerate() {
                let mut rng = Rng::new((ki * 100 + ai * 10 + li) as u64);
                let mut max = 0.0f64;
                for _ in 0..cases {
                    let (model, x, y) = random_case(&mut rng, kind, act, loss);
                    max = max.max(gradient_check(&model, &x, &y, EPS).unwrap().max_relative_error());
                }
                worst.push((format!("{kind:?}/{act:?}/{loss:?}"), max));
            }
        }
    }
    worst
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// The four back-propagation equations for a one-hidden-layer double-weight
/// network with squared-error cost, written out index by index for one sample.
/// Returns (dE/dw_l, dE/dγ_l, dE/dw_{l-1}, dE/dγ_{l-1}) in `[row][col]` layout.
#[allow(clippy::type_complexity, clippy::needless_range_loop)]
pub fn closed_form_oracle(
    w1: &[Vec<f64>],
    g1: &[Vec<f64>],
    w2: &[Vec<f64>],
    g2: &[Vec<f64>],
    x: &[f64],
    y: &[f64],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let phi = sigmoid;
    let dphi = |z: f64| sigmoid(z) * (1.0 - sigmoid(z));
    let (k_n, s_n, j_n) = (w1.len(), x.len(), w2.len());
    // z_k^{l-1} = Σ_s w_ks γ_ks ŷ_s^{l-2}
    let z1: Vec<f64> = (0..k_n)
        .map(|k| (0..s_n).map(|s| w1[k][s] * g1[k][s] * x[s]).sum())
        .collect();
    let h: Vec<f64> = z1.iter().map(|&z| phi(z)).collect();
    // z_j^l = Σ_i w_ji γ_ji ŷ_i^{l-1}
    let z2: Vec<f64> = (0..j_n)
        .map(|j| (0..k_n).map(|i| w2[j][i] * g2[j][i] * h[i]).sum())
        .collect();
    let out: Vec<f64> = z2.iter().map(|&z| phi(z)).collect();

    let mut dw2 = vec![vec![0.0; k_n]; j_n];
    let mut dg2 = vec![vec![0.0; k_n]; j_n];
    for j in 0..j_n {
        for i in 0..k_n {
            dw2[j][i] = (out[j] - y[j]) * dphi(z2[j]) * g2[j][i] * h[i];
            dg2[j][i] = (out[j] - y[j]) * dphi(z2[j]) * w2[j][i] * h[i];
        }
    }
    let mut dw1 = vec![vec![0.0; s_n]; k_n];
    let mut dg1 = vec![vec![0.0; s_n]; k_n];
    for k in 0..k_n {
        let back: f64 = (0..j_n)
            .map(|j| (y[j] - out[j]) * dphi(z2[j]) * g2[j][k] * w2[j][k])
            .sum();
        for s in 0..s_n {
            dw1[k][s] = -dphi(z1[k]) * g1[k][s] * x[s] * back;
            dg1[k][s] = -dphi(z1[k]) * w1[k][s] * x[s] * back;
        }
    }
    (dw2, dg2, dw1, dg1)
}

pub fn rows(t: &Tensor) -> Vec<Vec<f64>> {
    let (_, c) = t.dims2().unwrap();
    t.data().chunks(c).map(|r| r.to_vec()).collect()
}

/// Largest deviation between the library's chained dense backward pass and
/// [`closed_form_oracle`] over `cases` random one-hidden-layer networks.
pub fn closed_form_max_deviation(cases: usize) -> f64 {
    let mut rng = Rng::new(1234);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let (s, k, j) = (
            2 + (rng.next_u64() % 5) as usize,
            2 + (rng.next_u64() % 5) as usize,
            1 + (rng.next_u64() % 4) as usize,
        );
        let l1 = DenseParams::new(
            normal(&mut rng, &[k, s], 1.0),
            Some(normal(&mut rng, &[k, s], 1.0)),
            Tensor::zeros(&[k]),
        )
        .unwrap();
        let l2 = DenseParams::new(
            normal(&mut rng, &[j, k], 1.0),
            Some(normal(&mut rng, &[j, k], 1.0)),
            Tensor::zeros(&[j]),
        )
        .unwrap();
        let x = normal(&mut rng, &[1, s], 1.0);
        let y = normal(&mut rng, &[1, j], 1.0);

        // library path: two dense layers chained through dense_backward
        let (h, c1) = dense_forward(&l1, &x, Activation::Sigmoid).unwrap();
        let (out, c2) = dense_forward(&l2, &h, Activation::Sigmoid).unwrap();
        let (_, upstream) = Loss::Sse.loss_and_grad(&out, &y).unwrap();
        let g2 = dense_backward(&l2, &c2, &upstream, Activation::Sigmoid).unwrap();
        let g1 = dense_backward(&l1, &c1, &g2.input, Activation::Sigmoid).unwrap();

        let (dw2, dg2, dw1, dg1) = closed_form_oracle(
            &rows(&l1.w),
            &rows(l1.gamma.as_ref().unwrap()),
            &rows(&l2.w),
            &rows(l2.gamma.as_ref().unwrap()),
            x.data(),
            y.data(),
        );
        for (lib, oracle) in [
            (&g2.w, dw2),
            (g2.gamma.as_ref().unwrap(), dg2),
            (&g1.w, dw1),
            (g1.gamma.as_ref().unwrap(), dg1),
        ] {
            for (a, b) in lib.data().iter().zip(oracle.iter().flatten()) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    worst
}

/// A valid 3-image 4×5 IDX pair.
pub fn good_idx_pair() -> (Vec<u8>, Vec<u8>) {
    let pixels: Vec<u8> = (0..3 * 4 * 5).map(|i| (i * 7 % 256) as u8).collect();
    (encode_images(4, 5, &pixels), encode_labels(&[3, 0, 9]))
}

/// Each entry: name, image bytes, label bytes.
pub fn corrupted_idx_corpus() -> Vec<(&'static str, Vec<u8>, Vec<u8>)> {
    let (img, lbl) = good_idx_pair();
    let mut cases = Vec::new();

    let mut bad_magic = img.clone();
    bad_magic[3] = 0x04;
    cases.push(("image magic", bad_magic, lbl.clone()));

    cases.push(("label file given as images", lbl.clone(), lbl.clone()));
    cases.push(("image file given as labels", img.clone(), img.clone()));
    cases.push(("truncated image header", img[..10].to_vec(), lbl.clone()));
    cases.push(("truncated label header", img.clone(), lbl[..5].to_vec()));
    cases.push(("truncated pixels", img[..img.len() - 1].to_vec(), lbl.clone()));

    let mut trailing = img.clone();
    trailing.push(0);
    cases.push(("trailing image bytes", trailing, lbl.clone()));

    cases.push(("truncated labels", img.clone(), lbl[..lbl.len() - 1].to_vec()));

    let mut zero_rows = img.clone();
    zero_rows[8..12].copy_from_slice(&0u32.to_be_bytes());
    cases.push(("zero rows", zero_rows, lbl.clone()));

    let mut huge = img.clone();
    huge[4..8].copy_from_slice(&u32::MAX.to_be_bytes());
    huge[8..12].copy_from_slice(&u32::MAX.to_be_bytes());
    cases.push(("count promises more than the file holds", huge, lbl.clone()));

    let mut bad_label = lbl.clone();
    bad_label[9] = 10;
    cases.push(("label outside 0..10", img.clone(), bad_label));

    cases.push(("count mismatch", img, encode_labels(&[1, 2])));
    cases.push(("empty files", Vec::new(), Vec::new()));
    cases
}

/// The reparameterization and symmetry identities of a double-weight dense
/// layer, checked on `cases` random layers of each activation.
pub fn reparameterization_suite(cases: usize) -> Result<(), String> {
    let mut rng = Rng::new(2024);
    for case in 0..cases {
        let (b, i, o) = (
            1 + (rng.next_u64() % 4) as usize,
            1 + (rng.next_u64() % 6) as usize,
            1 + (rng.next_u64() % 6) as usize,
        );
        let x = normal(&mut rng, &[b, i], 1.0);
        let w = normal(&mut rng, &[o, i], 1.0);
        let g = normal(&mut rng, &[o, i], 1.0);
        let bias = normal(&mut rng, &[o], 1.0);
        let up = normal(&mut rng, &[b, o], 1.0);
        let act = [Activation::Sigmoid, Activation::Relu, Activation::Linear][case % 3];
        let run = |p: &DenseParams| {
            let (a, c) = dense_forward(p, &x, act).unwrap();
            (a, dense_backward(p, &c, &up, act).unwrap())
        };
        let dw = DenseParams::new(w.clone(), Some(g.clone()), bias.clone()).unwrap();
        let (a_dw, g_dw) = run(&dw);

        let product = DenseParams::new(w.hadamard(&g).unwrap(), None, bias.clone()).unwrap();
        let (a_std, g_std) = run(&product);
        if a_dw != a_std || g_dw.input != g_std.input {
            return Err(format!(
                "case {case}: DW forward differs from the standard forward on W∘Γ"
            ));
        }

        let ones = DenseParams::new(w.clone(), Some(Tensor::ones(w.shape())), bias.clone()).unwrap();
        let plain = DenseParams::new(w.clone(), None, bias.clone()).unwrap();
        let ((a1, g1), (a2, g2)) = (run(&ones), run(&plain));
        let gap =
            g1.w.data()
                .iter()
                .zip(g2.w.data())
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
        if a1 != a2 || gap > 1e-12 {
            return Err(format!(
                "case {case}: Γ = 1 layer differs from standard (grad gap {gap:e})"
            ));
        }

        let swapped = DenseParams::new(g.clone(), Some(w.clone()), bias.clone()).unwrap();
        let (a_sw, g_sw) = run(&swapped);
        if a_sw != a_dw || g_sw.w != *g_dw.gamma.as_ref().unwrap() || g_sw.gamma.as_ref().unwrap() != &g_dw.w {
            return Err(format!("case {case}: W↔Γ swap is not a symmetry"));
        }
    }
    Ok(())
}
