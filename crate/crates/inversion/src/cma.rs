use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::InversionError;

/// `4 + ⌊3 ln n⌋`, rounded up to an even count for mirrored sampling.
pub fn population_size(n: usize) -> usize {
    let base = 4 + (3.0 * (n.max(1) as f64).ln()).floor() as usize;
    base + base % 2
}

/// Covariance matrix adaptation state with mirrored sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct CmaState {
    pub mean: DVector<f64>,
    pub sigma: f64,
    pub cov: DMatrix<f64>,
    pub p_sigma: DVector<f64>,
    pub p_c: DVector<f64>,
    pub generation: usize,
    pub lambda: usize,
    /// Recombination weights of the best `λ/2` ranks.
    pub weights: Vec<f64>,
    pub mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c1: f64,
    c_mu: f64,
    chi_n: f64,
    /// Eigenvectors of `cov` (columns).
    basis: DMatrix<f64>,
    /// Square roots of the eigenvalues of `cov`.
    scales: DVector<f64>,
    population: Vec<DVector<f64>>,
}

impl CmaState {
    pub fn new(mean: DVector<f64>, sigma: f64) -> Result<Self, InversionError> {
        let n = mean.len();
        Self::with_population(mean, sigma, population_size(n))
    }

    pub fn with_population(mean: DVector<f64>, sigma: f64, lambda: usize) -> Result<Self, InversionError> {
        let n = mean.len();
        if n == 0 || !(sigma > 0.0 && sigma.is_finite()) || mean.iter().any(|x| !x.is_finite()) {
            return Err(InversionError::InvalidArgument("CMA-ES needs a finite mean and positive step size".into()));
        }
        if lambda < 2 || lambda % 2 != 0 {
            return Err(InversionError::InvalidArgument(format!("population {lambda} must be even and at least 2")));
        }
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu).map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln()).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let nf = n as f64;
        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        Ok(Self {
            mean,
            sigma,
            cov: DMatrix::identity(n, n),
            p_sigma: DVector::zeros(n),
            p_c: DVector::zeros(n),
            generation: 0,
            lambda,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c1,
            c_mu,
            chi_n,
            basis: DMatrix::identity(n, n),
            scales: DVector::from_element(n, 1.0),
            population: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Draws `λ` candidates as `λ/2` mirrored pairs `m ± σ·B·D·z`. The
    /// population is kept for the following [`cma_step`].
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &[DVector<f64>] {
        let n = self.dim();
        self.population.clear();
        for _ in 0..self.lambda / 2 {
            let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
            let y = &self.basis * z.component_mul(&self.scales);
            self.population.push(&self.mean + &y * self.sigma);
            self.population.push(&self.mean - &y * self.sigma);
        }
        &self.population
    }

    pub fn population(&self) -> &[DVector<f64>] {
        &self.population
    }

    /// Per-sample recombination weights: rank weights for the best `λ/2`
    /// samples, zero for the rest, averaged within groups of equal fitness.
    pub fn sample_weights(&self, fitness: &[f64]) -> Vec<f64> {
        let mut order: Vec<usize> = (0..fitness.len()).collect();
        order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)));
        let rank_weight = |r: usize| self.weights.get(r).copied().unwrap_or(0.0);
        let mut out = vec![0.0; fitness.len()];
        let mut start = 0;
        while start < order.len() {
            let mut end = start + 1;
            while end < order.len() && fitness[order[end]] == fitness[order[start]] {
                end += 1;
            }
            let avg = (start..end).map(rank_weight).sum::<f64>() / (end - start) as f64;
            for &i in &order[start..end] {
                out[i] = avg;
            }
            start = end;
        }
        out
    }
}

/// One generation of the rank-one plus rank-μ update with cumulative
/// step-size adaptation, from fitness values (lower is better) of the
/// population drawn by the last [`CmaState::sample`].
pub fn cma_step(state: &mut CmaState, fitness: &[f64]) -> Result<(), InversionError> {
    if state.population.len() != state.lambda || fitness.len() != state.lambda {
        return Err(InversionError::InvalidArgument(format!(
            "expected {} fitness values for a sampled population, got {}",
            state.lambda,
            fitness.len()
        )));
    }
    if let Some(index) = fitness.iter().position(|f| !f.is_finite()) {
        return Err(InversionError::NonFiniteFitness {
            generation: state.generation,
            index,
        });
    }
    let n = state.dim();
    let nf = n as f64;
    let w = state.sample_weights(fitness);
    let ys: Vec<DVector<f64>> = state
        .population
        .iter()
        .map(|x| (x - &state.mean) / state.sigma)
        .collect();
    let mut y_w = DVector::zeros(n);
    for (y, &wk) in ys.iter().zip(&w) {
        if wk != 0.0 {
            y_w += y * wk;
        }
    }
    state.mean += &y_w * state.sigma;

    let inv_sqrt = &state.basis * DMatrix::from_diagonal(&state.scales.map(|s| 1.0 / s)) * state.basis.transpose();
    let cs = state.c_sigma;
    state.p_sigma = &state.p_sigma * (1.0 - cs) + inv_sqrt * &y_w * (cs * (2.0 - cs) * state.mu_eff).sqrt();
    let g = (state.generation + 1) as i32;
    let ps_norm = state.p_sigma.norm();
    let h_sigma = ps_norm / (1.0 - (1.0 - cs).powi(2 * g)).sqrt() < (1.4 + 2.0 / (nf + 1.0)) * state.chi_n;
    let cc = state.c_c;
    let h = if h_sigma { 1.0 } else { 0.0 };
    state.p_c = &state.p_c * (1.0 - cc) + &y_w * (h * (cc * (2.0 - cc) * state.mu_eff).sqrt());
    let delta = (1.0 - h) * cc * (2.0 - cc);

    let mut rank_mu = DMatrix::zeros(n, n);
    for (y, &wk) in ys.iter().zip(&w) {
        if wk != 0.0 {
            rank_mu += y * y.transpose() * wk;
        }
    }
    let decay = 1.0 + state.c1 * delta - state.c1 - state.c_mu;
    let mut cov = &state.cov * decay + &state.p_c * state.p_c.transpose() * state.c1 + rank_mu * state.c_mu;
    cov = (&cov + cov.transpose()) * 0.5;

    state.sigma *= ((cs / state.d_sigma) * (ps_norm / state.chi_n - 1.0)).exp();
    if !(state.sigma > 0.0 && state.sigma.is_finite()) {
        return Err(InversionError::Degenerate {
            generation: state.generation,
            reason: "step size left (0, inf)",
        });
    }
    if Cholesky::new(cov.clone()).is_none() {
        return Err(InversionError::Degenerate {
            generation: state.generation,
            reason: "covariance is not positive definite",
        });
    }
    let eig = SymmetricEigen::new(cov.clone());
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(InversionError::Degenerate {
            generation: state.generation,
            reason: "covariance is not positive definite",
        });
    }
    state.scales = eig.eigenvalues.map(f64::sqrt);
    state.basis = eig.eigenvectors;
    state.cov = cov;
    state.generation += 1;
    state.population.clear();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn population_sizes() {
        assert_eq!(population_size(8), 10);
        assert_eq!(population_size(24), 14);
        assert_eq!(population_size(2), 6);
        assert_eq!(population_size(1), 4);
    }

    #[test]
    fn weights_are_normalized_and_decreasing() {
        let s = CmaState::new(DVector::zeros(8), 1.0).unwrap();
        assert_eq!(s.weights.len(), 5);
        assert!((s.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(s.weights.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn constant_fitness_keeps_the_mean() {
        let mut s = CmaState::new(DVector::from_element(8, 0.3), 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let m0 = s.mean.clone();
            s.sample(&mut rng);
            let f = vec![1.5; s.lambda];
            cma_step(&mut s, &f).unwrap();
            assert!((&s.mean - m0).amax() < s.sigma * 1e-12);
        }
    }

    #[test]
    fn tied_ranks_share_weight() {
        let s = CmaState::new(DVector::zeros(8), 1.0).unwrap();
        let w = s.sample_weights(&[3.0, 1.0, 1.0, 5.0, 0.0, 9.0, 9.0, 9.0, 9.0, 9.0]);
        assert_eq!(w[4], s.weights[0]);
        assert_eq!(w[1], w[2]);
        assert!((w[1] - 0.5 * (s.weights[1] + s.weights[2])).abs() < 1e-15);
        assert_eq!(w[5], 0.0);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_finite_fitness_names_the_sample() {
        let mut s = CmaState::new(DVector::zeros(4), 1.0).unwrap();
        s.sample(&mut ChaCha8Rng::seed_from_u64(0));
        let mut f = vec![0.0; s.lambda];
        f[3] = f64::NAN;
        assert!(matches!(
            cma_step(&mut s, &f),
            Err(InversionError::NonFiniteFitness { index: 3, .. })
        ));
    }
}
