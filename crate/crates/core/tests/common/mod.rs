//! Finite-difference sweep shared by the gradient test and the acceptance
//! binary.

use curiosity_core::nn::{finite_diff_param, Activation, DenseNet, Gradients, ParamIndex};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-3;
pub const REL_TOL: f64 = 1e-4;
pub const DENOM_FLOOR: f64 = 1e-8;

struct Shape {
    sizes: [usize; 3],
    nets: usize,
    /// `None` checks every parameter.
    sampled: Option<usize>,
}

/// World model, neural critic, RND on the cell encoding and RND on the
/// observation.
const SHAPES: [Shape; 4] = [
    Shape { sizes: [60, 1024, 200], nets: 12, sampled: Some(400) },
    Shape { sizes: [60, 128, 1], nets: 40, sampled: None },
    Shape { sizes: [60, 128, 128], nets: 25, sampled: Some(400) },
    Shape { sizes: [200, 128, 128], nets: 25, sampled: Some(400) },
];

#[derive(Debug, Default)]
pub struct Sweep {
    pub nets: usize,
    pub checked: usize,
    pub skipped: usize,
    pub worst: f64,
    pub shapes: Vec<[usize; 3]>,
    /// First parameter over tolerance, if any.
    pub failure: Option<String>,
}

pub fn hidden_pre_activations(net: &DenseNet, x: &[f64]) -> Vec<f64> {
    let l = &net.layers()[0];
    (0..l.outputs()).map(|j| l.biases()[j] + (0..l.inputs()).map(|i| l.weight(j, i) * x[i]).sum::<f64>()).collect()
}

pub fn all_params(net: &DenseNet) -> Vec<ParamIndex> {
    let mut out = Vec::with_capacity(net.param_count());
    for (k, l) in net.layers().iter().enumerate() {
        for o in 0..l.outputs() {
            out.extend((0..l.inputs()).map(|inp| ParamIndex::Weight { layer: k, out: o, inp }));
            out.push(ParamIndex::Bias { layer: k, out: o });
        }
    }
    out
}

/// A first-layer perturbation of size h that could push its unit across the
/// ReLU kink makes the central difference meaningless.
pub fn near_kink(idx: ParamIndex, pre: &[f64], x: &[f64], h: f64) -> bool {
    match idx {
        ParamIndex::Weight { layer: 0, out, inp } => pre[out].abs() <= 2.0 * h * x[inp].abs(),
        ParamIndex::Bias { layer: 0, out } => pre[out].abs() <= 2.0 * h,
        _ => false,
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(DENOM_FLOOR)
}

fn random_input(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    if dim == 60 && rng.gen_bool(0.5) {
        let mut x = vec![0.0; 60];
        x[rng.gen_range(0..30)] = 1.0;
        x[30 + rng.gen_range(0..30)] = 1.0;
        x
    } else if dim == 200 && rng.gen_bool(0.5) {
        (0..dim).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect()
    } else {
        (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }
}

fn compare(net: &mut DenseNet, analytic: &Gradients, x: &[f64], t: &[f64], idx: ParamIndex, sweep: &mut Sweep) {
    let a = analytic.get(idx);
    let n = finite_diff_param(net, x, t, H, idx).unwrap();
    let rel = relative_error(a, n);
    if rel >= REL_TOL && sweep.failure.is_none() {
        let sizes: Vec<usize> =
            std::iter::once(net.input_dim()).chain(net.layers().iter().map(|l| l.outputs())).collect();
        sweep.failure = Some(format!("{sizes:?} {idx:?}: analytic {a:e} numeric {n:e} rel {rel:e}"));
    }
    sweep.worst = sweep.worst.max(rel);
    sweep.checked += 1;
}

/// Random nets of every trained shape with random biases, inputs and targets.
pub fn gradient_sweep(seed: u64) -> Sweep {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let acts = [Activation::Relu, Activation::Identity];
    let mut sweep = Sweep::default();
    for shape in &SHAPES {
        sweep.shapes.push(shape.sizes);
        for _ in 0..shape.nets {
            let mut net = DenseNet::new(&shape.sizes, &acts, &mut rng).unwrap();
            for l in net.layers_mut() {
                for b in l.biases_mut() {
                    *b = rng.gen_range(-0.1..0.1);
                }
            }
            let x = random_input(&mut rng, shape.sizes[0]);
            let t: Vec<f64> = (0..shape.sizes[2]).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (_, analytic) = net.gradients(&x, &t).unwrap();
            let pre = hidden_pre_activations(&net, &x);
            let params = all_params(&net);
            let picked: Vec<ParamIndex> = match shape.sampled {
                None => params,
                Some(n) => sample(&mut rng, params.len(), n).into_iter().map(|i| params[i]).collect(),
            };
            for idx in picked {
                if near_kink(idx, &pre, &x, H) {
                    sweep.skipped += 1;
                } else {
                    compare(&mut net, &analytic, &x, &t, idx, &mut sweep);
                }
            }
            sweep.nets += 1;
        }
    }
    sweep
}
