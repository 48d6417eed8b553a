use std::cell::{Cell, RefCell};

use flexfit_inversion::{
    assemble_prompt, cma_step, optimize_embedding, pca_fit, pool, CmaState, EmbeddingSubspace, InversionError,
    OptimizeOptions, OracleError, PromptEmbedding, QuadraticOracle, ScoringOracle, Vocabulary,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

struct Setup {
    subspace: EmbeddingSubspace,
    base: PromptEmbedding,
}

fn setup(words: usize, dim: usize, d: usize, seed: u64) -> Setup {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tokens: Vec<String> = ["a", "image", "of"].map(String::from).to_vec();
    tokens.extend((3..words).map(|i| format!("w{i}")));
    let vocab = Vocabulary::new(tokens, DMatrix::from_fn(words, dim, |_, _| StandardNormal.sample(&mut rng))).unwrap();
    let subspace = pca_fit(vocab.embeddings(), d).unwrap();
    let base = assemble_prompt(gaussian(dim, &mut rng), gaussian(dim, &mut rng), gaussian(dim, &mut rng), &vocab).unwrap();
    Setup { subspace, base }
}

fn flat(q: &[DVector<f64>]) -> DVector<f64> {
    DVector::from_iterator(q.iter().map(|v| v.len()).sum(), q.iter().flat_map(|v| v.iter().copied()))
}

#[test]
fn sphere_converges_within_three_hundred_generations() {
    let c = DVector::from_vec(vec![0.5, -1.0, 2.0, 0.0, 0.25, -0.75, 1.5, 3.0]);
    let mut state = CmaState::new(DVector::zeros(8), 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..300 {
        let f: Vec<f64> = state.sample(&mut rng).iter().map(|x| (x - &c).norm_squared()).collect();
        cma_step(&mut state, &f).unwrap();
        if (&state.mean - &c).norm() < 1e-5 {
            return;
        }
    }
    panic!("mean still {} away", (&state.mean - &c).norm());
}

#[test]
fn step_size_stays_positive_on_a_random_quadratic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = DMatrix::from_fn(6, 6, |_, _| StandardNormal.sample(&mut rng));
    let h = a.transpose() * &a + DMatrix::identity(6, 6) * 0.1;
    let mut state = CmaState::new(gaussian(6, &mut rng), 0.5).unwrap();
    for _ in 0..1000 {
        let f: Vec<f64> = state.sample(&mut rng).iter().map(|x| (x.transpose() * &h * x)[(0, 0)]).collect();
        cma_step(&mut state, &f).unwrap();
        assert!(state.sigma > 0.0 && state.sigma.is_finite());
    }
}

fn mean_trace(start: DVector<f64>, shift: &DVector<f64>, generations: usize) -> Vec<DVector<f64>> {
    let g = |x: &DVector<f64>| x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v * v).sum::<f64>();
    let mut state = CmaState::new(start, 0.3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut out = Vec::new();
    for _ in 0..generations {
        let f: Vec<f64> = state.sample(&mut rng).iter().map(|x| g(&(x - shift))).collect();
        cma_step(&mut state, &f).unwrap();
        out.push(&state.mean - shift);
    }
    out
}

#[test]
fn trajectory_is_translation_invariant() {
    let m0 = DVector::from_vec(vec![1.0, -0.5, 0.3, 0.8, -1.2]);
    let c = DVector::from_vec(vec![3.0, -2.0, 0.5, 7.0, 1.0]);
    let plain = mean_trace(m0.clone(), &DVector::zeros(5), 40);
    let shifted = mean_trace(&m0 + &c, &c, 40);
    for (a, b) in plain.iter().zip(&shifted) {
        assert!((a - b).amax() < 1e-9 * (1.0 + c.amax()));
    }
}

#[test]
fn hidden_coefficients_are_recovered() {
    let s = setup(40, 32, 8, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let hidden: Vec<DVector<f64>> = (0..3).map(|_| gaussian(8, &mut rng)).collect();
    let targets: Vec<DVector<f64>> = (0..3).map(|k| s.base.pseudo(k) + s.subspace.lift(hidden[k].as_slice())).collect();
    let oracle = |p: &PromptEmbedding, _key: u64| -> Result<f64, OracleError> {
        Ok((0..3).map(|k| (p.pseudo(k) - &targets[k]).norm_squared()).sum())
    };
    let r = optimize_embedding(&oracle, &s.base, &s.subspace, 200, 1, &OptimizeOptions::default()).unwrap();
    let err = (flat(&r.coefficients) - flat(&hidden)).norm();
    assert!(err < 1e-3, "coefficient error {err}");
}

#[test]
fn single_generation_budget() {
    let s = setup(20, 16, 4, 1);
    let oracle = QuadraticOracle { target: DVector::from_element(16, 0.1) };
    let r = optimize_embedding(&oracle, &s.base, &s.subspace, 1, 9, &OptimizeOptions::default()).unwrap();
    assert_eq!(r.trace.len(), 1);
    assert_eq!(r.evaluations, 1 + flexfit_inversion::population_size(12));
    assert_eq!(r.trace[0].best_loss, r.best_loss);
    assert!(matches!(
        optimize_embedding(&oracle, &s.base, &s.subspace, 0, 9, &OptimizeOptions::default()),
        Err(InversionError::InvalidArgument(_))
    ));
}

#[test]
fn orthogonal_component_is_untouched() {
    let s = setup(24, 16, 4, 2);
    let oracle = QuadraticOracle { target: DVector::from_element(16, -0.3) };
    let r = optimize_embedding(&oracle, &s.base, &s.subspace, 30, 4, &OptimizeOptions::default()).unwrap();
    let w = &s.subspace.basis;
    for k in 0..3 {
        let perp = |v: &DVector<f64>| v - w * w.tr_mul(v);
        assert!((perp(r.prompt.pseudo(k)) - perp(s.base.pseudo(k))).amax() < 1e-12);
    }
    for i in [0, 2, 3] {
        assert_eq!(r.prompt.slots()[i], s.base.slots()[i]);
    }
}

#[test]
fn oracle_failure_carries_the_generation() {
    let s = setup(20, 8, 3, 3);
    let calls = Cell::new(0usize);
    let oracle = |p: &PromptEmbedding, _key: u64| -> Result<f64, OracleError> {
        calls.set(calls.get() + 1);
        if calls.get() > 25 {
            return Err(OracleError::Failed("backend gone".into()));
        }
        Ok(pool(p).norm())
    };
    let err = optimize_embedding(&oracle, &s.base, &s.subspace, 10, 0, &OptimizeOptions::default()).unwrap_err();
    // One initial call, then populations of 10.
    assert!(matches!(err, InversionError::Oracle { generation: 2, .. }), "{err:?}");
}

#[test]
fn noise_key_is_fixed_for_the_run() {
    let s = setup(20, 8, 3, 4);
    let keys = RefCell::new(Vec::new());
    let oracle = |p: &PromptEmbedding, key: u64| -> Result<f64, OracleError> {
        keys.borrow_mut().push(key);
        Ok(pool(p).norm())
    };
    let opts = OptimizeOptions { noise_key: Some(77), ..Default::default() };
    optimize_embedding(&oracle, &s.base, &s.subspace, 5, 0, &opts).unwrap();
    assert!(keys.borrow().iter().all(|&k| k == 77));
    keys.borrow_mut().clear();
    optimize_embedding(&oracle, &s.base, &s.subspace, 5, 13, &OptimizeOptions::default()).unwrap();
    assert!(keys.borrow().iter().all(|&k| k == 13));
}

#[test]
fn sequential_rounds_split_the_budget() {
    let s = setup(30, 16, 4, 8);
    let target = pool(&s.base) + s.subspace.lift(&[0.5, -0.2, 0.1, 0.3]);
    let oracle = QuadraticOracle { target };
    let opts = OptimizeOptions { sequential: true, ..Default::default() };
    let r = optimize_embedding(&oracle, &s.base, &s.subspace, 90, 2, &opts).unwrap();
    assert_eq!(r.trace.len(), 90);
    assert!(r.best_loss < 1e-3 * r.initial_loss);
    assert!((oracle.evaluate(&r.prompt, 2).unwrap() - r.best_loss).abs() < 1e-15);
}

fn confined_run(seed: u64, d: usize) -> (f64, f64, Vec<f64>) {
    let s = setup(32, 24, d, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
    let target = pool(&s.base) + s.subspace.lift(gaussian(d, &mut rng).as_slice());
    let quad = QuadraticOracle { target };
    let worst = Cell::new(0.0f64);
    let carriers_fixed = Cell::new(true);
    let base = &s.base;
    let sub = &s.subspace;
    let oracle = |p: &PromptEmbedding, key: u64| -> Result<f64, OracleError> {
        for k in 0..3 {
            worst.set(worst.get().max(sub.residual_norm(&(p.pseudo(k) - base.pseudo(k)))));
        }
        for i in [0, 2, 3] {
            carriers_fixed.set(carriers_fixed.get() && p.slots()[i] == base.slots()[i]);
        }
        quad.evaluate(p, key)
    };
    let r = optimize_embedding(&oracle, &s.base, &s.subspace, 25, seed, &OptimizeOptions::default()).unwrap();
    assert!(carriers_fixed.get());
    (worst.get(), r.initial_loss, r.trace.iter().map(|t| t.best_loss).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn candidates_stay_in_the_subspace(seed in any::<u64>(), d in 1usize..6) {
        let (worst, _, _) = confined_run(seed, d);
        prop_assert!(worst < 1e-10, "residual {worst}");
    }

    #[test]
    fn best_loss_trace_is_non_increasing(seed in any::<u64>()) {
        let (_, _, trace) = confined_run(seed, 4);
        prop_assert!(trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn quadratic_end_to_end(seed in 0u64..1000) {
        let s = setup(40, 48, 8, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(99));
        let target = pool(&s.base) + s.subspace.lift(gaussian(8, &mut rng).as_slice());
        let r = optimize_embedding(&QuadraticOracle { target }, &s.base, &s.subspace, 200, seed, &OptimizeOptions::default()).unwrap();
        prop_assert!(r.best_loss < 1e-6 * r.initial_loss, "{} vs {}", r.best_loss, r.initial_loss);
    }
}
