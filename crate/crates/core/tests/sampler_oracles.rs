mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use panelvar::linalg::cholesky_lower;
use panelvar::model::{build_lag_matrices, simulate, Design, ModelSpec, Pooling};
use panelvar::sampler::*;
use panelvar::stats::{batch_means_se, mean, quantiles, variance};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn bare_design(x: DMatrix<f64>, y: DMatrix<f64>) -> Design {
    let t = y.nrows();
    Design { x, y, z: DMatrix::zeros(t, 0) }
}

fn short_spec(lags: usize, draws: usize, burn: usize) -> ModelSpec {
    ModelSpec {
        lags,
        n_draws: draws,
        n_burn: burn,
        ..ModelSpec::default()
    }
}

#[test]
fn diffuse_prior_mean_is_equationwise_ols() {
    let mut r = rng(1);
    let x = normal_matrix(50, 4, &mut r);
    let y = normal_matrix(50, 2, &mut r) + &x * normal_matrix(4, 2, &mut r);
    let sigma = random_spd(2, &mut r);
    let d = bare_design(x.clone(), y.clone());
    let (prec, rhs) = beta_conditional(
        &d,
        &DMatrix::zeros(0, 2),
        &sigma,
        &DVector::zeros(8),
        &DVector::from_element(8, 1e12),
    )
    .unwrap();
    let post = precision_mean(&prec, &rhs).unwrap();
    // identical regressors in every equation: GLS collapses to OLS
    let ols = (x.transpose() * &x).lu().solve(&(x.transpose() * &y)).unwrap();
    for (a, b) in post.iter().zip(ols.iter()) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn uninformative_data_returns_prior() {
    let mut r = rng(2);
    let d = bare_design(DMatrix::zeros(30, 4), normal_matrix(30, 2, &mut r));
    let b = normal_vector(8, &mut r);
    let var = DVector::from_fn(8, |i, _| 0.1 + i as f64);
    let (prec, rhs) = beta_conditional(&d, &DMatrix::zeros(0, 2), &random_spd(2, &mut r), &b, &var).unwrap();
    assert!((precision_mean(&prec, &rhs).unwrap() - &b).amax() < 1e-12);
    assert!((prec - DMatrix::from_diagonal(&var.map(|v| 1.0 / v))).amax() < 1e-12);
}

#[test]
fn scalar_beta_matches_conjugate_normal() {
    let mut r = rng(3);
    let x = normal_matrix(50, 1, &mut r);
    let y = &x * 0.6 + normal_matrix(50, 1, &mut r) * 0.5;
    let (s2, b0, v0) = (0.25, 0.2, 0.05);
    let xx = x.dot(&x);
    let xy = x.dot(&y);
    let post_var = 1.0 / (xx / s2 + 1.0 / v0);
    let post_mean = post_var * (xy / s2 + b0 / v0);

    let d = bare_design(x, y);
    let sigma = DMatrix::from_element(1, 1, s2);
    let draws: Vec<f64> = (0..50_000)
        .map(|_| {
            draw_beta_c(&d, &DMatrix::zeros(0, 1), &sigma, &DVector::from_element(1, b0), &DVector::from_element(1, v0), &mut r)
                .unwrap()[0]
        })
        .collect();
    assert!((mean(&draws) / post_mean - 1.0).abs() < 0.02);
    assert!((variance(&draws) / post_var - 1.0).abs() < 0.02);
}

#[test]
fn common_mean_oracles() {
    let mut r = rng(4);
    let var = DVector::from_element(3, 0.5);
    let beta = normal_vector(3, &mut r);
    let (m, v) = common_mean_conditional(&[beta.clone()], &var).unwrap();
    assert_eq!(m, beta);
    assert_eq!(v, var);

    let (m, _) = common_mean_conditional(&[beta.clone(), -beta.clone()], &var).unwrap();
    assert!(m.amax() < 1e-15);

    let betas: Vec<DVector<f64>> = (0..4).map(|_| normal_vector(3, &mut r)).collect();
    let target = betas.iter().fold(DVector::zeros(3), |a, b| a + b) / 4.0;
    let n = 100_000;
    let mut sum = DVector::zeros(3);
    for _ in 0..n {
        sum += draw_common_mean(&betas, &var, &mut r).unwrap();
    }
    let se = (0.5f64 / 4.0 / n as f64).sqrt();
    assert!((sum / n as f64 - target).amax() < 3.0 * se);
}

#[test]
fn lambda1_conditional_oracles() {
    let b = DVector::from_vec(vec![0.3, -0.1]);
    let omega = DVector::from_vec(vec![1.0, 2.0]);
    let (shape, scale) = lambda1_conditional(&[b.clone()], &b, &omega, 1.0, 1.0).unwrap();
    assert_eq!((shape, scale), (2.0, 1.0));
    assert_eq!(scale / (shape - 1.0), 1.0);

    let beta = DVector::from_vec(vec![1.0, 0.5]);
    let (_, s1) = lambda1_conditional(&[beta.clone()], &b, &omega, 1.0, 0.0).unwrap();
    let doubled = &b + (&beta - &b) * 2f64.sqrt();
    let (_, s2) = lambda1_conditional(&[doubled], &b, &omega, 1.0, 0.0).unwrap();
    assert!((s2 / s1 - 2.0).abs() < 1e-12);

    let mut r = rng(5);
    let betas = vec![beta.clone(), b.clone() * 2.0];
    let (shape, scale) = lambda1_conditional(&betas, &b, &omega, 3.0, 0.5).unwrap();
    let draws: Vec<f64> = (0..100_000)
        .map(|_| draw_lambda1(&betas, &b, &omega, 3.0, 0.5, &mut r).unwrap())
        .collect();
    assert!((mean(&draws) / (scale / (shape - 1.0)) - 1.0).abs() < 0.02);
}

#[test]
fn lambda1_rejects_degenerate_scale() {
    let b = DVector::from_element(2, 0.1);
    let mut r = rng(6);
    assert!(draw_lambda1(&[b.clone()], &b, &DVector::from_element(2, 1.0), 1.0, 0.0, &mut r).is_err());
}

#[test]
fn scalar_sigma_matches_scaled_inverse_chi_square() {
    let mut r = rng(7);
    let u = normal_matrix(40, 1, &mut r) * 1.5;
    let ss = u.dot(&u);
    let draws: Vec<f64> = (0..50_000).map(|_| draw_sigma_c(&u, &mut r).unwrap()[(0, 0)]).collect();
    let chi = ChiSquared::new(40.0).unwrap();
    let probs = [0.05, 0.16, 0.5, 0.84, 0.95];
    let got = quantiles(&draws, &probs).unwrap();
    for (p, g) in probs.iter().zip(got) {
        let expect = ss / chi.inverse_cdf(1.0 - p);
        assert!((g / expect - 1.0).abs() < 0.02, "p={p}: {g} vs {expect}");
    }
}

#[test]
fn sigma_concentrates_with_large_sample() {
    let mut r = rng(8);
    let t = 10_000;
    let qr = normal_matrix(t, 3, &mut r).qr();
    let u = qr.q() * (t as f64).sqrt();
    for _ in 0..20 {
        let s = draw_sigma_c(&u, &mut r).unwrap();
        assert!((s - DMatrix::<f64>::identity(3, 3)).amax() < 0.05);
    }
}

#[test]
fn sigma_draw_is_relabeling_equivariant() {
    let mut r = rng(9);
    let u = normal_matrix(25, 3, &mut r);
    let noise = normal_matrix(25, 3, &mut r);
    let perm = [2usize, 0, 1];
    let p = DMatrix::from_fn(3, 3, |i, j| if perm[i] == j { 1.0 } else { 0.0 });
    let base = inverse_wishart_from_noise(&(u.transpose() * &u), &noise).unwrap();
    let up = &u * p.transpose();
    let noise_p = &noise * p.transpose();
    let permuted = inverse_wishart_from_noise(&(up.transpose() * &up), &noise_p).unwrap();
    assert!((permuted - &p * base * p.transpose()).amax() < 1e-10);
}

#[test]
fn gamma_oracles() {
    let mut r = rng(10);
    let y = normal_matrix(60, 1, &mut r).add_scalar(3.0);
    let d = Design {
        x: DMatrix::zeros(60, 1),
        y: y.clone(),
        z: DMatrix::from_element(60, 1, 1.0),
    };
    let (hat, _) = gamma_conditional(&d, &DMatrix::zeros(1, 1)).unwrap();
    assert!((hat[(0, 0)] - y.mean()).abs() < 1e-12);

    let b = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.3]);
    let truth = DMatrix::from_row_slice(1, 2, &[1.5, -0.7]);
    let z = DMatrix::from_element(80, 1, 1.0);
    let full = simulate(&b, &truth, &DMatrix::from_element(1, 2, 0.2), &z, &DMatrix::zeros(80, 2)).unwrap();
    let (x, yy) = build_lag_matrices(&full, 1).unwrap();
    let d = Design { x, z: DMatrix::from_element(yy.nrows(), 1, 1.0), y: yy };
    let sigma = DMatrix::identity(2, 2) * 1e-8;
    for _ in 0..200 {
        let g = draw_gamma_c(&d, &b, &sigma, &mut r).unwrap();
        for j in 0..2 {
            assert!((g[(0, j)] / truth[(0, j)] - 1.0).abs() < 0.01);
        }
    }

    let d0 = bare_design(normal_matrix(20, 2, &mut r), normal_matrix(20, 2, &mut r));
    let g = draw_gamma_c(&d0, &DMatrix::zeros(2, 2), &DMatrix::identity(2, 2), &mut r).unwrap();
    assert_eq!(g.shape(), (0, 2));
}

fn two_country_panel(seed: u64, t: usize) -> (DMatrix<f64>, panelvar::PanelDataset) {
    let mut r = rng(seed);
    let b = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, -0.2, 0.4]);
    let c = DMatrix::from_row_slice(1, 2, &[0.2, -0.1]);
    let chol = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.3, 0.8]);
    let ys = (0..2).map(|_| simulate_var(&b, &c, &chol, t, &mut r)).collect();
    (b, panel_from(ys))
}

#[test]
fn pooled_countries_share_coefficients() {
    let (_, panel) = two_country_panel(11, 120);
    let spec = ModelSpec {
        pooling: Pooling::Full,
        ..short_spec(1, 200, 50)
    };
    let out = run_gibbs(&panel, &spec, &ChainConfig::default()).unwrap();
    assert_eq!(out.draws.len(), 150);
    for d in &out.draws {
        assert_eq!(d.countries[0].b, d.countries[1].b);
        assert_eq!(d.countries[0].gamma, d.countries[1].gamma);
        assert!(d.lambda1.is_none());
    }
    assert!(out.diagnostics.lambda1_quantiles.is_none());
}

#[test]
fn worker_count_does_not_change_draws() {
    let (_, panel) = two_country_panel(12, 100);
    let spec = short_spec(2, 300, 100);
    let run = |workers| {
        run_gibbs(
            &panel,
            &spec,
            &ChainConfig {
                seed: 77,
                n_chains: 3,
                thinning: 2,
                workers,
            },
        )
        .unwrap()
    };
    let one = run(1);
    let three = run(3);
    assert_eq!(one.draws, three.draws);
    assert_eq!(one.diagnostics, three.diagnostics);
    assert_eq!(one.draws.len(), 3 * 100);
    for d in &one.draws {
        for p in &d.countries {
            assert!(cholesky_lower(&p.sigma).is_some());
        }
    }
    let other = run_gibbs(&panel, &spec, &ChainConfig { seed: 78, ..ChainConfig::default() }).unwrap();
    assert_ne!(other.draws[0], one.draws[0]);
}

#[test]
fn common_mean_recovers_shared_coefficients() {
    let (b, panel) = two_country_panel(13, 400);
    let out = run_gibbs(&panel, &short_spec(1, 3000, 1000), &ChainConfig { seed: 5, ..ChainConfig::default() }).unwrap();
    for (i, truth) in b.iter().enumerate() {
        let draws: Vec<f64> = out.draws.iter().map(|d| d.common_mean[i]).collect();
        let sd = variance(&draws).sqrt();
        assert!((mean(&draws) - truth).abs() < 3.0 * sd, "element {i}");
    }
}

#[test]
fn fixed_tightness_controls_shrinkage() {
    let (_, panel) = two_country_panel(14, 150);
    let tight = ModelSpec {
        lambda1_fixed: Some(1e-8),
        ..short_spec(1, 1500, 500)
    };
    let out = run_gibbs(&panel, &tight, &ChainConfig::default()).unwrap();
    let n = out.draws.len() as f64;
    let b_hat = out.draws.iter().fold(DVector::zeros(4), |a, d| a + &d.common_mean) / n;
    for c in 0..2 {
        let beta_hat = out.draws.iter().fold(DVector::zeros(4), |a, d| a + d.countries[c].beta()) / n;
        assert!((beta_hat - &b_hat).amax() < 1e-3);
    }

    let loose = ModelSpec {
        lambda1_fixed: Some(1e6),
        ..short_spec(1, 6000, 1000)
    };
    let out = run_gibbs(&panel, &loose, &ChainConfig::default()).unwrap();
    let designs = panel.designs(1).unwrap();
    for (c, d) in designs.iter().enumerate() {
        let xz = DMatrix::from_fn(d.rows(), 3, |r, col| if col < 2 { d.x[(r, col)] } else { 1.0 });
        let ols = (xz.transpose() * &xz).lu().solve(&(xz.transpose() * &d.y)).unwrap();
        for eq in 0..2 {
            for k in 0..2 {
                let draws: Vec<f64> = out.draws.iter().map(|p| p.countries[c].b[(k, eq)]).collect();
                let se = batch_means_se(&draws);
                assert!((mean(&draws) - ols[(k, eq)]).abs() < 3.0 * se, "country {c} coef ({k},{eq})");
            }
        }
    }
}

/// Successive-conditional simulation of (β_c, data) with the remaining blocks
/// fixed: the β marginal must stay at its prior N(b, Λ).
#[test]
fn joint_distribution_agrees_with_prior() {
    let mut r = rng(15);
    let (n, t, countries) = (2, 30, 2);
    let b = DVector::from_vec(vec![0.4, 0.1, 0.1, 0.4]);
    let var = DVector::from_element(4, 0.01);
    let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
    let chol = cholesky_lower(&sigma).unwrap();
    let none = DMatrix::zeros(0, n);
    let iters = 20_000;
    let mut traces = vec![Vec::with_capacity(iters); 8];
    for _ in 0..countries {
        let mut beta = &b + normal_vector(4, &mut r).component_mul(&var.map(f64::sqrt));
        for _ in 0..iters {
            let bm = DMatrix::from_column_slice(n, n, beta.as_slice());
            let shocks = normal_matrix(t, n, &mut r) * chol.transpose();
            let y = simulate(&bm, &none, &DMatrix::zeros(1, n), &DMatrix::zeros(t, 0), &shocks).unwrap();
            let (x, yy) = build_lag_matrices(&y, 1).unwrap();
            beta = draw_beta_c(&bare_design(x, yy), &none, &sigma, &b, &var, &mut r).unwrap();
            for i in 0..4 {
                traces[i].push(beta[i]);
                traces[4 + i].push(beta[i] * beta[i]);
            }
        }
    }
    for i in 0..4 {
        let m = &traces[i];
        assert!((mean(m) - b[i]).abs() < 3.0 * batch_means_se(m), "mean {i}");
        let sq = &traces[4 + i];
        let expect = b[i] * b[i] + var[i];
        assert!((mean(sq) - expect).abs() < 3.0 * batch_means_se(sq), "second moment {i}");
    }
}
