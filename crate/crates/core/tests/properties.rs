mod common;

use lsportmanteau::bootstrap::{bootstrap_path, bootstrap_replicate, draw_multipliers, Bandwidth, BootstrapConfig};
use lsportmanteau::curves::{parse_curves, write_curves, LoadOptions};
use lsportmanteau::lagcov::lagcov_norm_integral_grid;
use lsportmanteau::{
    cum_lag_cov, lagcov_norm_integral, project_fourier, run_portmanteau_test, stat_classical, CoefficientSeries,
    Grid1D, ModelGenerator, ModelId,
};
use proptest::prelude::*;

use common::{brute_norm, brute_replicate, random_coef, rel_close};

fn column(mult: &nalgebra::DMatrix<f64>, k: usize) -> Vec<f64> {
    mult.column(k).iter().copied().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn streaming_norm_matches_brute_force(t_len in 3usize..25, dim in 1usize..4, seed in any::<u64>(), h in 1usize..3) {
        prop_assume!(h < t_len);
        let s = random_coef(t_len, dim, seed);
        let (fast, _) = lagcov_norm_integral(&s, h).unwrap();
        prop_assert!(rel_close(fast, brute_norm(&s, h), 1e-10));
    }

    #[test]
    fn replicate_matches_brute_force(
        t_len in 6usize..30,
        dim in 1usize..4,
        m in 1usize..6,
        n in 1usize..8,
        h in 1usize..4,
        seed in any::<u64>(),
    ) {
        prop_assume!(m <= t_len && n <= t_len && h < t_len);
        let s = random_coef(t_len, dim, seed);
        let cfg = BootstrapConfig { block_len: m, bandwidth: Bandwidth::Window(n), ..BootstrapConfig::for_length(t_len) };
        let mult = column(&draw_multipliers(t_len, 1, seed ^ 7), 0);
        let fast = bootstrap_replicate(&s, h, &cfg, &mult).unwrap()[h - 1];
        let (norm, inner) = brute_replicate(&s, h, m, n, &mult);
        prop_assert!(rel_close(fast.norm, norm, 1e-10), "{} vs {}", fast.norm, norm);
        prop_assert!(rel_close(fast.inner, inner, 1e-10), "{} vs {}", fast.inner, inner);
    }

    #[test]
    fn bootstrap_process_is_linear_in_multipliers(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let s = random_coef(20, 2, seed);
        let cfg = BootstrapConfig { block_len: 3, bandwidth: Bandwidth::Window(5), ..BootstrapConfig::for_length(20) };
        let mult = draw_multipliers(20, 2, seed);
        let (r1, r2) = (column(&mult, 0), column(&mult, 1));
        let mix: Vec<f64> = r1.iter().zip(&r2).map(|(x, y)| a * x + b * y).collect();
        let p1 = bootstrap_path(&s, 1, &cfg, &r1).unwrap();
        let p2 = bootstrap_path(&s, 1, &cfg, &r2).unwrap();
        let pm = bootstrap_path(&s, 1, &cfg, &mix).unwrap();
        for ((x, y), z) in p1.iter().zip(&p2).zip(&pm) {
            let expected = x * a + y * b;
            prop_assert!((z - &expected).amax() <= 1e-10 * (1.0 + expected.amax()));
        }
        let one = bootstrap_replicate(&s, 1, &cfg, &r1).unwrap()[0];
        let scaled: Vec<f64> = r1.iter().map(|x| a * x).collect();
        let two = bootstrap_replicate(&s, 1, &cfg, &scaled).unwrap()[0];
        prop_assert!((two.norm - a.abs() * one.norm).abs() <= 1e-10 * (1.0 + one.norm));
        prop_assert!((two.inner - a * one.inner).abs() <= 1e-10 * (1.0 + one.inner.abs()));
    }

    #[test]
    fn scaling_multiplies_statistics_and_keeps_p_values(seed in any::<u64>(), c in 0.01f64..100.0) {
        let s = random_coef(40, 3, seed);
        let base = stat_classical(&s, 3).unwrap();
        let scaled = stat_classical(&s.scaled(c), 3).unwrap();
        for (x, y) in base.per_lag.iter().zip(&scaled.per_lag) {
            prop_assert!(rel_close(*y, c * c * x, 1e-12));
        }
        let cfg = BootstrapConfig { replicates: 60, seed, ..BootstrapConfig::for_length(40) };
        let p0 = run_portmanteau_test(&s, 3, &cfg).unwrap().p_classical;
        let p1 = run_portmanteau_test(&s.scaled(c), 3, &cfg).unwrap().p_classical;
        for (x, y) in p0.iter().zip(&p1) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn parseval_and_idempotent_projection(dim in 1usize..18, seed in any::<u64>()) {
        let coef = random_coef(3, dim, seed);
        let grid = Grid1D::new(64).unwrap();
        let curves = coef.reconstruct(grid);
        for t in 0..3 {
            let energy = grid.integrate(&curves.curve(t).iter().map(|v| v * v).collect::<Vec<_>>());
            let sum: f64 = coef.row(t).iter().map(|v| v * v).sum();
            prop_assert!(rel_close(energy, sum, 1e-9));
        }
        let again = project_fourier(&curves, dim).unwrap();
        for (x, y) in again.as_slice().iter().zip(coef.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn cumulative_process_is_a_step_function(seed in any::<u64>(), s in 0usize..15, frac in 0.0f64..0.999) {
        let series = random_coef(15, 2, seed);
        let left = cum_lag_cov(&series, 2, s as f64 / 15.0).unwrap();
        let inside = cum_lag_cov(&series, 2, (s as f64 + frac) / 15.0).unwrap();
        prop_assert!((left - inside).amax() == 0.0);
    }
}

#[test]
fn grid_and_coefficient_routes_agree() {
    let grid = Grid1D::new(1000).unwrap();
    let coef = random_coef(30, 17, 3);
    let curves = coef.reconstruct(grid);
    let projected = project_fourier(&curves, 17).unwrap();
    for h in 1..=4 {
        let on_grid = lagcov_norm_integral_grid(&curves, h).unwrap();
        let (on_coef, _) = lagcov_norm_integral(&projected, h).unwrap();
        assert!((on_grid - on_coef).abs() <= 1e-4, "h={h}: {on_grid} vs {on_coef}");
    }
}

#[test]
fn cumulative_process_at_one_is_the_full_sum() {
    let s = random_coef(12, 3, 5);
    let (_, last) = lagcov_norm_integral(&s, 2).unwrap();
    let full = cum_lag_cov(&s, 2, 1.0).unwrap();
    assert!((last - full).amax() < 1e-14);
}

#[test]
fn write_then_read_roundtrip() {
    let generator = ModelGenerator::new(ModelId::N1, 15, Grid1D::new(37).unwrap(), 0).unwrap();
    let series = generator.generate(11).unwrap();
    let mut buf = Vec::new();
    write_curves(&mut buf, &series, None).unwrap();
    let back = parse_curves(buf.as_slice(), &LoadOptions::default()).unwrap().to_series().unwrap();
    assert_eq!(back.len(), series.len());
    for (a, b) in back.values().iter().zip(series.values()) {
        assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
    }
}

#[test]
fn zero_series_has_zero_everything() {
    let s = CoefficientSeries::new(vec![0.0; 40], 20, 2).unwrap();
    let cfg = BootstrapConfig { replicates: 10, ..BootstrapConfig::for_length(20) };
    let res = run_portmanteau_test(&s, 2, &cfg).unwrap();
    assert!(res.classical.per_lag.iter().all(|&v| v == 0.0));
    assert!(res.boot_norms.iter().flatten().all(|&v| v == 0.0));
    assert_eq!(res.p_classical, vec![1.0, 1.0]);
}
