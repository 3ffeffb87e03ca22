mod common;

use std::f64::consts::PI;

use common::{c, complex_matrix, max_eigenvalue_error, rng};
use kmd_core::linalg::svd;
use kmd_core::{
    build_pairs, companion_dmd, companion_model, exact_dmd, mode_stats, truncated_svd, unit_circle_deviation,
    vandermonde, ModeStyle, SnapshotMatrix, C64,
};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

/// `y_k = Re Σ_j b_j λ_j^k w_j` with random complex `w_j`, plus the full
/// conjugate-complete spectrum.
fn generic_oscillators(p: usize, n: usize, lambdas: &[C64], seed: u64) -> (DMatrix<f64>, Vec<C64>) {
    let mut r = rng(seed);
    let w = complex_matrix(&mut r, p, lambdas.len());
    let b: Vec<C64> = (0..lambdas.len()).map(|j| C64::from_polar(1.0 + j as f64, 0.3 * j as f64)).collect();
    let y = DMatrix::from_fn(p, n, |i, k| {
        lambdas
            .iter()
            .enumerate()
            .map(|(j, l)| (b[j] * l.powi(k as i32) * w[(i, j)]).re)
            .sum()
    });
    let mut all = Vec::new();
    for l in lambdas {
        all.push(*l);
        all.push(l.conj());
    }
    (y, all)
}

fn five_damped() -> Vec<C64> {
    [(1.0, 0.2), (0.97, 0.5), (0.93, 0.9), (0.88, 1.7), (0.8, 2.6)]
        .iter()
        .map(|&(m, a)| C64::from_polar(m, a))
        .collect()
}

#[test]
fn planted_spectrum_recovery() {
    let (y, planted) = generic_oscillators(50, 200, &five_damped(), 7);
    let pair = build_pairs(&SnapshotMatrix::new(y, "t")).unwrap();
    let res = exact_dmd(&pair, Some(10), ModeStyle::Exact).unwrap();
    assert_eq!(res.rank(), 10);
    let err = max_eigenvalue_error(&planted, &res.eigenvalues);
    assert!(err <= 1e-8, "eigenvalue error {err:e}");
}

#[test]
fn default_rank_is_numerical_rank() {
    let (y, _) = generic_oscillators(30, 60, &five_damped()[..3], 3);
    let pair = build_pairs(&SnapshotMatrix::new(y, "t")).unwrap();
    let res = exact_dmd(&pair, None, ModeStyle::Exact).unwrap();
    assert_eq!(res.rank(), 6);
}

#[test]
fn tail_energy_matches_symmetric_eigen_oracle() {
    let mut r = rng(11);
    let y = common::real_matrix(&mut r, 9, 14);
    let mut ev: Vec<f64> = SymmetricEigen::new(&y * y.transpose()).eigenvalues.iter().cloned().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    for rank in 1..=9 {
        let f = truncated_svd(&y, Some(rank)).unwrap();
        let approx = &f.u * DMatrix::from_diagonal(&f.s) * f.v.transpose();
        let residual = (&y - approx).norm_squared();
        let tail: f64 = ev[rank..].iter().map(|v| v.max(0.0)).sum();
        assert!((residual - tail).abs() <= 1e-10 * y.norm_squared(), "rank {rank}");
        for (k, s) in f.s.iter().enumerate() {
            assert!((s * s - ev[k]).abs() <= 1e-10 * ev[0]);
        }
    }
}

#[test]
fn svd_of_tall_wide_and_deficient_inputs() {
    let mut r = rng(5);
    let low = common::real_matrix(&mut r, 40, 3) * common::real_matrix(&mut r, 3, 25);
    for m in [low.clone(), low.transpose(), DMatrix::from_element(6, 4, 2.5)] {
        let f = svd(&m);
        let rec = &f.u * DMatrix::from_diagonal(&f.s) * f.v.transpose();
        assert!((rec - &m).norm() <= 1e-12 * m.norm());
    }
    let f = truncated_svd(&low, None).unwrap();
    assert_eq!(f.rank, 3);
}

#[test]
fn exact_and_projected_modes_share_a_column_space() {
    let (y, _) = generic_oscillators(20, 40, &five_damped()[..4], 9);
    let pair = build_pairs(&SnapshotMatrix::new(y, "t")).unwrap();
    let exact = exact_dmd(&pair, None, ModeStyle::Exact).unwrap();
    let projected = exact_dmd(&pair, None, ModeStyle::Projected).unwrap();
    assert_eq!(exact.rank(), projected.rank());
    let q = projected.modes.clone().qr().q();
    let mut normalised = exact.modes.clone();
    for mut col in normalised.column_iter_mut() {
        let n = col.norm();
        col.unscale_mut(n);
    }
    let outside = &normalised - &q * (q.adjoint() * &normalised);
    // sine of the largest principal angle
    let sin = svd(&outside).s[0];
    assert!(sin <= 1e-8, "principal angle sine {sin:e}");
}

#[test]
fn conjugate_symmetry_for_real_input() {
    let (y, _) = generic_oscillators(25, 80, &five_damped(), 21);
    let pair = build_pairs(&SnapshotMatrix::new(y, "t")).unwrap();
    let res = exact_dmd(&pair, Some(10), ModeStyle::Exact).unwrap();
    for l in &res.eigenvalues {
        let partner = res.eigenvalues.iter().map(|m| (m - l.conj()).norm()).fold(f64::INFINITY, f64::min);
        assert!(partner <= 1e-8);
    }
}

#[test]
fn mode_amplitude_products_match_the_generator() {
    let sys = common::planted(30, &common::ten_mode_oscillators([5.0, 3.0, 2.0, 1.5, 1.0, 0.5]));
    let y = sys.snapshots(60);
    let pair = build_pairs(&SnapshotMatrix::new(y.clone(), "t")).unwrap();
    let res = exact_dmd(&pair, Some(10), ModeStyle::Exact)
        .unwrap()
        .fit_amplitudes(&pair.y)
        .unwrap();
    let amps = res.amplitudes.as_ref().unwrap();
    for (j, l) in sys.eigenvalues.iter().enumerate() {
        let k = (0..res.rank())
            .min_by(|&a, &b| (res.eigenvalues[a] - l).norm().partial_cmp(&(res.eigenvalues[b] - l).norm()).unwrap())
            .unwrap();
        let est = res.modes.column(k) * amps[k];
        let truth = sys.modes.column(j) * sys.amplitudes[j];
        assert!((est - &truth).norm() <= 1e-8 * truth.norm(), "mode {j}");
    }
    // sorted by |b| descending
    assert!(amps.windows(2).all(|w| w[0].norm() >= w[1].norm()));

    // reconstruction identity
    let xi = vandermonde(&res.eigenvalues, pair.y.ncols());
    let b = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(amps.clone()));
    let model = &res.modes * b * &xi.data;
    let err = (kmd_core::linalg::to_complex(&pair.y) - model).norm() / pair.y.norm();
    assert!(err <= 1e-8, "relative residual {err:e}");
}

#[test]
fn period_four_companion_polynomial() {
    // x_{k+4} = x_k with four independent columns; the minimum-norm coefficients
    // are ½(e_0 + e_4), whose characteristic polynomial is (z⁴ − 1)(z⁴ + ½).
    let base = DMatrix::from_fn(6, 4, |i, j| ((i + 1) as f64 * (j as f64 + 0.5)).sin() + (i == j) as u8 as f64);
    let x = DMatrix::from_fn(6, 9, |i, k| base[(i, k % 4)]);
    let model = companion_model(&SnapshotMatrix::new(x.clone(), "t")).unwrap();
    let mut expected_c = vec![0.0; 8];
    expected_c[0] = 0.5;
    expected_c[4] = 0.5;
    for (a, b) in model.coefficients.iter().zip(&expected_c) {
        assert!((a - b).abs() <= 1e-10);
    }
    let mut roots: Vec<C64> = (0..4).map(|k| C64::from_polar(1.0, PI * k as f64 / 2.0)).collect();
    roots.extend((0..4).map(|k| C64::from_polar(0.5f64.powf(0.25), PI * (2 * k + 1) as f64 / 4.0)));
    assert!(max_eigenvalue_error(&roots, &model.companion_eigenvalues) <= 1e-8);
    assert!(max_eigenvalue_error(&model.companion_eigenvalues, &roots) <= 1e-8);

    let res = companion_dmd(&SnapshotMatrix::new(x, "t")).unwrap();
    assert_eq!(res.rank(), 8);
    assert!(max_eigenvalue_error(&roots[..4], &res.eigenvalues) <= 1e-8);
}

#[test]
fn companion_sits_closer_to_the_unit_circle() {
    for seed in 0..5 {
        let (y, _) = generic_oscillators(40, 60, &five_damped()[1..], 100 + seed);
        let x = SnapshotMatrix::new(y, "t");
        let pair = build_pairs(&x).unwrap();
        let dmd = exact_dmd(&pair, None, ModeStyle::Exact).unwrap();
        let cdmd = companion_dmd(&x).unwrap();
        let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
        let d_dmd = mean(unit_circle_deviation(&dmd.eigenvalues));
        let d_cdmd = mean(unit_circle_deviation(&cdmd.eigenvalues));
        assert!(d_cdmd <= d_dmd, "seed {seed}: cdmd {d_cdmd} > dmd {d_dmd}");
    }
}

#[test]
fn mode_statistics_table_values() {
    let s = mode_stats(c(1.0, 0.0)).unwrap();
    assert_eq!((s.magnitude, s.e_folding, s.period), (1.0, f64::INFINITY, f64::INFINITY));
    let s = mode_stats(c(0.0, -1.0)).unwrap();
    assert_eq!(s.magnitude, 1.0);
    assert_eq!(s.abs_period(), 4.0);
    assert_eq!(s.e_folding, f64::INFINITY);
    let s = mode_stats(c((-0.1f64).exp(), 0.0)).unwrap();
    assert!((s.e_folding - 10.0).abs() <= 1e-12);
    assert_eq!(s.period, f64::INFINITY);
    assert!(mode_stats(c(0.0, 0.0)).is_err());
}

proptest! {
    #[test]
    fn vandermonde_matches_powers(
        eig in prop::collection::vec((-1.5f64..1.5, -1.5f64..1.5), 1..5),
        m in 1usize..30,
    ) {
        let lambdas: Vec<C64> = eig.iter().map(|&(a, b)| c(a, b)).collect();
        let xi = vandermonde(&lambdas, m);
        for (i, l) in lambdas.iter().enumerate() {
            for k in 0..m {
                let expected = l.powi(k as i32);
                prop_assert!((xi.data[(i, k)] - expected).norm() <= 1e-12 * expected.norm().max(1.0));
            }
        }
    }

    #[test]
    fn mode_stats_consistency(re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let l = c(re, im);
        prop_assume!(l.norm() > 1e-6);
        let s = mode_stats(l).unwrap();
        prop_assert_eq!(s.magnitude, l.norm());
        let log = l.ln();
        if log.re.abs() >= 1e-12 {
            prop_assert!((s.e_folding * log.re.abs() - 1.0).abs() < 1e-12);
        }
        if log.im.abs() >= 1e-12 {
            prop_assert!((s.period * log.im - 2.0 * PI).abs() < 1e-12);
        }
    }
}
