use flexfit_inversion::pca_fit;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Cyclic Jacobi rotations on a dense symmetric matrix. Returns the
/// eigenvalues (unsorted) and the eigenvectors as columns.
fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let values = (0..n).map(|i| a[i][i]).collect();
    let vectors = (0..n).map(|j| (0..n).map(|i| v[i][j]).collect()).collect();
    (values, vectors)
}

fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

#[test]
fn matches_jacobi_on_ten_by_six() {
    let x = random_matrix(10, 6, 42);
    let rows: Vec<Vec<f64>> = (0..10).map(|i| (0..6).map(|j| x[(i, j)]).collect()).collect();
    let mean: Vec<f64> = (0..6).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / 10.0).collect();
    let cov: Vec<Vec<f64>> = (0..6)
        .map(|a| {
            (0..6)
                .map(|b| rows.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / 9.0)
                .collect()
        })
        .collect();
    let (values, vectors) = jacobi_eigen(&cov);
    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let sub = pca_fit(&x, 3).unwrap();
    for (j, &m) in mean.iter().enumerate() {
        assert!((sub.mean[j] - m).abs() < 1e-12);
    }
    for (k, &idx) in order.iter().take(3).enumerate() {
        assert!((sub.eigenvalues[k] - values[idx]).abs() < 1e-8, "eigenvalue {k}");
        let col = sub.basis.column(k);
        let dot: f64 = (0..6).map(|i| col[i] * vectors[idx][i]).sum();
        let sign = dot.signum();
        for i in 0..6 {
            assert!((col[i] - sign * vectors[idx][i]).abs() < 1e-8, "vector {k} entry {i}");
        }
    }
}

#[test]
fn jacobi_oracle_on_a_known_matrix() {
    let (mut values, _) = jacobi_eigen(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
    values.sort_by(f64::total_cmp);
    assert!((values[0] - 1.0).abs() < 1e-14 && (values[1] - 3.0).abs() < 1e-14);
}

fn reconstruction_error(x: &DMatrix<f64>, d: usize) -> f64 {
    let sub = pca_fit(x, d).unwrap();
    let mut total = 0.0;
    for i in 0..x.nrows() {
        let r = x.row(i).transpose() - &sub.mean;
        total += sub.residual_norm(&r).powi(2);
    }
    total / x.nrows() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reconstruction_error_is_monotone_in_d(seed in any::<u64>(), wide in any::<bool>()) {
        let x = if wide { random_matrix(12, 20, seed) } else { random_matrix(30, 10, seed) };
        let errors: Vec<f64> = [1, 2, 4, 8].iter().map(|&d| reconstruction_error(&x, d)).collect();
        for w in errors.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-10);
        }
    }

    #[test]
    fn basis_is_orthonormal(seed in any::<u64>(), d in 1usize..6) {
        let x = random_matrix(9, 7, seed);
        let sub = pca_fit(&x, d).unwrap();
        let g = sub.basis.tr_mul(&sub.basis);
        prop_assert!((g - DMatrix::identity(d, d)).amax() < 1e-8);
        prop_assert!(sub.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(sub.eigenvalues.iter().all(|&l| l >= 0.0));
    }
}
