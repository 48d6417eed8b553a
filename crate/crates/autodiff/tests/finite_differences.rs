//! Every primitive checked against central finite differences, plus the
//! linearity and determinism properties of the tape and optimizer.

use flexfit_autodiff::{adam_step, grad_check, AdamConfig, AdamState, Tape, Unary, Var};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-4;
const TOL: f64 = 1e-5;

/// Uniform values in ±[0.1, 2], away from the kinks of relu/abs.
fn sample(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let m: f64 = rng.random_range(0.1..2.0);
            if rng.random::<bool>() {
                m
            } else {
                -m
            }
        })
        .collect()
}

/// Reduces a node to a scalar with fixed random weights so that every
/// output entry contributes a distinct adjoint.
fn weighted_sum(t: &mut Tape, v: Var, seed: u64) -> Var {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..v.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    t.dot_const(v, w)
}

fn check_primitive(name: &str, n: usize, build: impl Fn(&mut Tape, Var, &[f64]) -> Var) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xad);
    for trial in 0..100 {
        let point = sample(&mut rng, n);
        let aux = sample(&mut rng, 64);
        let err = grad_check(
            |t, x| {
                let y = build(t, x, &aux);
                weighted_sum(t, y, trial)
            },
            &point,
            H,
        )
        .unwrap();
        assert!(err < TOL, "{name}: trial {trial} error {err}");
    }
}

#[test]
fn unary_primitives_match_finite_differences() {
    for f in [
        Unary::Softplus,
        Unary::Tanh,
        Unary::Sigmoid,
        Unary::Relu,
        Unary::Abs,
        Unary::Square,
    ] {
        check_primitive(&format!("{f:?}"), 6, |t, x, _| t.unary(x, f));
    }
    check_primitive("Sqrt", 6, |t, x, _| {
        let a = t.abs(x);
        t.sqrt(a)
    });
}

#[test]
fn binary_primitives_match_finite_differences() {
    check_primitive("add", 6, |t, x, _| {
        let a = t.reshape(x, 2, 3);
        let b = t.columns(a, 0, 3);
        let r = t.rows(a, 1, 2);
        let s = t.add(a, r);
        t.add(s, b)
    });
    check_primitive("sub", 6, |t, x, aux| {
        let a = t.reshape(x, 2, 3);
        let c = t.constant(aux[..3].to_vec(), 1, 3);
        let s = t.sub(a, c);
        let r = t.rows(a, 0, 1);
        t.sub(s, r)
    });
    check_primitive("mul", 6, |t, x, aux| {
        let a = t.reshape(x, 3, 2);
        let b = t.constant(aux[..6].to_vec(), 3, 2);
        let p = t.mul(a, b);
        let r = t.rows(a, 2, 3);
        let q = t.mul(p, r);
        let s = t.columns(a, 1, 2);
        let s = t.sum(s);
        t.mul(q, s)
    });
    check_primitive("scale", 4, |t, x, _| t.scale(x, -2.5));
}

#[test]
fn structural_primitives_match_finite_differences() {
    check_primitive("matmul", 12, |t, x, aux| {
        let a = t.reshape(x, 3, 4);
        let b = t.constant(aux[..8].to_vec(), 4, 2);
        let c = t.matmul(a, b);
        let w = t.rows(a, 0, 2);
        let w = t.reshape(w, 2, 4);
        t.matmul(c, w)
    });
    check_primitive("concat", 6, |t, x, _| {
        let a = t.reshape(x, 2, 3);
        let b = t.columns(a, 1, 3);
        let c = t.concat(a, b);
        t.square(c)
    });
    check_primitive("gather", 8, |t, x, aux| {
        let table = t.reshape(x, 4, 2);
        let index = vec![0, 3, 3, 1, 2, 0, 3, 3];
        let weights = aux[..8].to_vec();
        let g = t.gather(table, index, weights, 2, 2);
        t.square(g)
    });
    check_primitive("sum", 5, |t, x, _| {
        let s = t.sum(x);
        t.square(s)
    });
    check_primitive("row_sum", 6, |t, x, _| {
        let a = t.reshape(x, 3, 2);
        let s = t.row_sum(a);
        t.tanh(s)
    });
}

#[test]
fn squared_norm_of_matrix_vector_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let w: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
    let v: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let err = grad_check(
        |t, x| {
            let m = t.reshape(x, 4, 4);
            let col = t.constant(v.clone(), 4, 1);
            let y = t.matmul(m, col);
            let sq = t.square(y);
            t.sum(sq)
        },
        &w,
        1e-4,
    )
    .unwrap();
    assert!(err < 1e-6, "{err}");
}

fn small_network(t: &mut Tape) -> (Var, Var) {
    let x = t.param(vec![0.3, -0.2, 0.8, 0.1, -0.5, 0.7], 2, 3);
    let w = t.param(vec![0.5, -1.0, 0.25, 0.75, -0.3, 0.2], 3, 2);
    let h = t.matmul(x, w);
    let h = t.softplus(h);
    let s = t.sum(h);
    (x, s)
}

#[test]
fn backward_is_linear_in_the_seed() {
    let mut t = Tape::new();
    let (x, s) = small_network(&mut t);
    let g1 = t.backward(s).unwrap().wrt(x);
    let g3 = t.backward_seeded(s, -3.0).unwrap().wrt(x);
    for (a, b) in g1.iter().zip(&g3) {
        assert!((b - (-3.0) * a).abs() <= 1e-15 * a.abs().max(1.0));
    }
}

#[test]
fn backward_leaves_values_unchanged() {
    let mut t = Tape::new();
    let (x, s) = small_network(&mut t);
    let before = t.value(s).to_vec();
    let xs = t.value(x).to_vec();
    let _ = t.backward(s).unwrap();
    assert_eq!(t.value(s), &before[..]);
    assert_eq!(t.value(x), &xs[..]);
}

proptest! {
    #[test]
    fn adam_is_bit_deterministic(
        params in proptest::collection::vec(-10.0f64..10.0, 1..16),
        seed in any::<u64>(),
        steps in 1usize..5,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grads: Vec<Vec<f64>> = (0..steps)
            .map(|_| (0..params.len()).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let run = || {
            let mut p = params.clone();
            let mut s = AdamState::new(p.len(), AdamConfig::with_lr(0.01));
            for g in &grads {
                adam_step(&mut p, g, &mut s).unwrap();
            }
            (p, s)
        };
        let (a, sa) = run();
        let (b, sb) = run();
        prop_assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                        b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(sa.step_count(), steps as u64);
        prop_assert_eq!(sa, sb);
    }
}
