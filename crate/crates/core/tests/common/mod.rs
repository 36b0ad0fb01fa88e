//! Brute-force oracles shared by the integration tests. They follow the
//! defining sums literally, in 1-based time, and share no code with the
//! library beyond the coefficient container.

#![allow(dead_code)]

use lsportmanteau::CoefficientSeries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn random_coef(t_len: usize, dim: usize, seed: u64) -> CoefficientSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..t_len * dim).map(|_| rng.sample(StandardNormal)).collect();
    CoefficientSeries::new(v, t_len, dim).unwrap()
}

/// `x_t x_{t+h}ᵀ` for 1-based `t`.
fn product(s: &CoefficientSeries, t: usize, h: usize) -> Vec<Vec<f64>> {
    let a = s.row(t - 1);
    let b = s.row(t + h - 1);
    a.iter().map(|ai| b.iter().map(|bj| ai * bj).collect()).collect()
}

fn frob_sq(x: &[Vec<f64>]) -> f64 {
    x.iter().flatten().map(|v| v * v).sum()
}

fn frob_dot(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    x.iter().flatten().zip(y.iter().flatten()).map(|(a, b)| a * b).sum()
}

/// `M̂_h(u)` on `[s/T, (s+1)/T)`: `T^{-1} Σ_{t=1}^{s ∧ (T-h)} x_t x_{t+h}ᵀ`.
pub fn brute_mhat(s: &CoefficientSeries, h: usize, step: usize) -> Vec<Vec<f64>> {
    let (t_len, d) = (s.len(), s.dim());
    let mut acc = vec![vec![0.0; d]; d];
    for t in 1..=step.min(t_len - h) {
        let p = product(s, t, h);
        for a in 0..d {
            for b in 0..d {
                acc[a][b] += p[a][b] / t_len as f64;
            }
        }
    }
    acc
}

/// `‖M̂_h‖_{2,3}` by integrating the step function in `u`.
pub fn brute_norm(s: &CoefficientSeries, h: usize) -> f64 {
    let t_len = s.len();
    let sq: f64 = (0..t_len).map(|step| frob_sq(&brute_mhat(s, h, step))).sum();
    (sq / t_len as f64).sqrt()
}

/// `(‖B̂_h‖_{2,3}, ⟨M̂_h, B̂_h⟩)` for one replicate with block length `m`,
/// centring half-width `n` and multipliers `r` (1-based `r[i-1] = R_i`).
pub fn brute_replicate(s: &CoefficientSeries, h: usize, m: usize, n: usize, r: &[f64]) -> (f64, f64) {
    let (t_len, d) = (s.len(), s.dim());
    let last = t_len - h;
    let mu = |t: usize| {
        let lo = t.saturating_sub(n).max(1);
        let hi = (t + n).min(last);
        let mut acc = vec![vec![0.0; d]; d];
        for j in lo..=hi {
            let p = product(s, j, h);
            for a in 0..d {
                for b in 0..d {
                    acc[a][b] += p[a][b] / (hi - lo + 1) as f64;
                }
            }
        }
        acc
    };
    let centred: Vec<Vec<Vec<f64>>> = (1..=last)
        .map(|t| {
            let p = product(s, t, h);
            let c = mu(t);
            (0..d).map(|a| (0..d).map(|b| p[a][b] - c[a][b]).collect()).collect()
        })
        .collect();
    let scale = 1.0 / ((m * t_len) as f64).sqrt();
    let mut norm_sq = 0.0;
    let mut inner = 0.0;
    for step in 0..t_len {
        let mut b = vec![vec![0.0; d]; d];
        for i in 1..=step.min(last) {
            for t in i..=(i + m - 1).min(last) {
                for a in 0..d {
                    for c in 0..d {
                        b[a][c] += r[i - 1] * scale * centred[t - 1][a][c];
                    }
                }
            }
        }
        norm_sq += frob_sq(&b);
        inner += frob_dot(&b, &brute_mhat(s, h, step));
    }
    ((norm_sq / t_len as f64).sqrt(), inner / t_len as f64)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300) || (a - b).abs() <= 1e-300
}
