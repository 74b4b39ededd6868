//! Independent LSTM reference and finite-difference gradient check.

use hisa_core::lstm::{backward, sequence_forward, LstmParams, TENSOR_NAMES};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Plain nested-loop LSTM; shares nothing with the library beyond the
/// parameter struct's field layout.
pub fn reference_forward(seq: &[Vec<f64>], p: &LstmParams) -> f64 {
    let hsz = p.hidden_size;
    let isz = p.input_size;
    let mut h = vec![0.0; hsz];
    let mut c = vec![0.0; hsz];
    for x in seq {
        let mut z = x.clone();
        z.extend_from_slice(&h);
        let mut new_h = vec![0.0; hsz];
        let mut new_c = vec![0.0; hsz];
        for r in 0..hsz {
            let mut af = p.b_f[r];
            let mut ai = p.b_i[r];
            let mut ao = p.b_o[r];
            let mut ag = p.b_g[r];
            for k in 0..isz + hsz {
                af += p.w_f[[r, k]] * z[k];
                ai += p.w_i[[r, k]] * z[k];
                ao += p.w_o[[r, k]] * z[k];
                ag += p.w_g[[r, k]] * z[k];
            }
            let (f, i, o, g) = (sig(af), sig(ai), sig(ao), ag.tanh());
            new_c[r] = f * c[r] + i * g;
            new_h[r] = o * new_c[r].tanh();
        }
        h = new_h;
        c = new_c;
    }
    let mut y = p.b_y;
    for r in 0..hsz {
        y += p.w_y[r] * h[r];
    }
    y
}

pub fn random_params(input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> LstmParams {
    let mut p = LstmParams::init(input, hidden, rng.gen());
    // non-trivial biases so every path carries gradient
    for t in p.tensors_mut() {
        for v in t.iter_mut() {
            *v += rng.gen_range(-0.3..0.3);
        }
    }
    p
}

pub fn random_sequence(len: usize, input: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..len)
        .map(|_| (0..input).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

pub fn to_array(seq: &[Vec<f64>]) -> Array2<f64> {
    Array2::from_shape_fn((seq.len(), seq[0].len()), |(t, j)| seq[t][j])
}

/// Largest per-tensor relative error `‖a − n‖ / (‖a‖ + ‖n‖)` between the
/// analytic gradient and central differences of the reference loss.
pub fn worst_relative_error(seed: u64) -> (f64, &'static str) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = random_params(3, 4, &mut rng);
    let seq = random_sequence(5, 3, &mut rng);
    let label: f64 = rng.gen_range(-1.0..1.0);
    let loss = |q: &LstmParams| (reference_forward(&seq, q) - label).powi(2);

    let (pred, cache) = sequence_forward(to_array(&seq).view(), &p).unwrap();
    let grads = backward(&cache, 2.0 * (pred - label), &p).unwrap();

    let eps = 1e-5;
    let mut worst = (0.0, "");
    for (idx, (name, analytic)) in TENSOR_NAMES.iter().zip(grads.tensors()).enumerate() {
        let mut diff2 = 0.0;
        let mut a2 = 0.0;
        let mut n2 = 0.0;
        for k in 0..analytic.len() {
            let mut plus = p.clone();
            plus.tensors_mut()[idx][k] += eps;
            let mut minus = p.clone();
            minus.tensors_mut()[idx][k] -= eps;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * eps);
            diff2 += (analytic[k] - numeric).powi(2);
            a2 += analytic[k].powi(2);
            n2 += numeric.powi(2);
        }
        let rel = diff2.sqrt() / (a2.sqrt() + n2.sqrt()).max(1e-300);
        if rel > worst.0 {
            worst = (rel, *name);
        }
    }
    worst
}

