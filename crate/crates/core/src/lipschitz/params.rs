use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Constant in front of the one-step separation bound `β_new = 4(…)`.
pub const DEFAULT_STEP_FACTOR: f64 = 4.0;

/// Scale multipliers for one refinement step: the outer partition is drawn
/// at `a·Δ`, the inner ℓ_q partition at `b·Δ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepParams {
    pub a: f64,
    pub b: f64,
}

fn check_step_domain(p: f64, q: f64) -> Result<()> {
    if !(p.is_finite() && q >= 2.0 && q < p) {
        return Err(Error::param(format!("need 2 <= q < p < inf, got p = {p}, q = {q}")));
    }
    Ok(())
}

fn check_beta(name: &str, v: f64) -> Result<()> {
    if !(v >= 1.0 && v.is_finite()) {
        return Err(Error::param(format!("{name} must be a finite value >= 1, got {v}")));
    }
    Ok(())
}

/// `a = ½(2qβ/(pβ*))^{q/p}`, `b = β*·a/β`. These satisfy `β/a = β*/b` and
/// `(p/q)(2a)^{p/q−1}·b = 1`; the second identity is what makes the pulled
/// back clusters have diameter at most Δ.
pub fn step_params(p: f64, q: f64, beta: f64, beta_star: f64) -> Result<StepParams> {
    check_step_domain(p, q)?;
    check_beta("beta", beta)?;
    check_beta("beta_star", beta_star)?;
    let a = 0.5 * (2.0 * q * beta / (p * beta_star)).powf(q / p);
    let b = beta_star * a / beta;
    Ok(StepParams { a, b })
}

/// Separation parameter after one refinement step:
/// `factor·(p/2q)^{q/p}·β*^{q/p}·β^{1−q/p}`, factor 4 by default.
pub fn beta_new(p: f64, q: f64, beta: f64, beta_star: f64) -> Result<f64> {
    beta_new_with(DEFAULT_STEP_FACTOR, p, q, beta, beta_star)
}

pub fn beta_new_with(factor: f64, p: f64, q: f64, beta: f64, beta_star: f64) -> Result<f64> {
    check_step_domain(p, q)?;
    check_beta("beta", beta)?;
    check_beta("beta_star", beta_star)?;
    let e = q / p;
    Ok(factor * (p / (2.0 * q)).powf(e) * beta_star.powf(e) * beta.powf(1.0 - e))
}

/// Fixed point of [`beta_new`] in `β`: `4^{p/q}·(p/2q)·β*`. Equals `16β*`
/// for `q = p/2` and `(p/4)·2^p·β*` for `q = 2`.
pub fn predict_fixpoint(p: f64, q: f64, beta_star: f64) -> Result<f64> {
    predict_fixpoint_with(DEFAULT_STEP_FACTOR, p, q, beta_star)
}

pub fn predict_fixpoint_with(factor: f64, p: f64, q: f64, beta_star: f64) -> Result<f64> {
    check_step_domain(p, q)?;
    check_beta("beta_star", beta_star)?;
    let r = p / q;
    // q = p/2 and q = 2 have exact closed forms; avoid powf rounding there
    if r == 2.0 && factor == DEFAULT_STEP_FACTOR {
        return Ok(16.0 * beta_star);
    }
    if q == 2.0 && factor == DEFAULT_STEP_FACTOR && p.fract() == 0.0 && p <= 1000.0 {
        return Ok(p / 4.0 * 2f64.powi(p as i32) * beta_star);
    }
    Ok(factor.powf(r) * (p / (2.0 * q)) * beta_star)
}

/// Inner iteration count `⌈log2(log2 p · log2 β₀)⌉`, at least 1.
pub fn iteration_count(p: f64, beta0: f64) -> usize {
    let inner = p.log2() * beta0.log2();
    if inner.is_nan() || inner <= 1.0 || inner.is_infinite() {
        return 1;
    }
    (inner.log2().ceil() as usize).max(1)
}

/// Exact value after `k` halving steps from `β₀`:
/// `4^{1+½+…+2^{1−k}} · β*^{½+…+2^{−k}} · β₀^{2^{−k}}`.
pub fn halving_partial_product(beta_star: f64, beta0: f64, k: u32) -> f64 {
    let (mut four, mut star) = (0.0f64, 0.0f64);
    for i in 0..k {
        four += 0.5f64.powi(i as i32);
        star += 0.5f64.powi(i as i32 + 1);
    }
    4f64.powf(four) * beta_star.powf(star) * beta0.powf(0.5f64.powi(k as i32))
}

/// Upper bound `16·β*·β₀^{2^{−k}}` on [`halving_partial_product`].
pub fn halving_closed_form(beta_star: f64, beta0: f64, k: u32) -> f64 {
    16.0 * beta_star * beta0.powf(0.5f64.powi(k as i32))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn step_params_example() {
        let s = step_params(4.0, 2.0, 100.0, 10.0).unwrap();
        assert!(rel(s.a, 10f64.sqrt() / 2.0) < 1e-15);
        assert!(rel(s.b, 10f64.sqrt() / 20.0) < 1e-15);
        assert!((s.a - 1.581139).abs() < 1e-6);
        assert!((s.b - 0.158114).abs() < 1e-6);
        assert!(rel(100.0 / s.a, 10.0 / s.b) < 1e-12);
        assert!((100.0 / s.a - 63.2456).abs() < 1e-4);
        assert!(rel(2.0 * (2.0 * s.a) * s.b, 1.0) < 1e-12);
    }

    #[test]
    fn step_params_unit_betas() {
        let s = step_params(4.0, 2.0, 1.0, 1.0).unwrap();
        assert!(rel(s.a, 0.5) < 1e-15);
        assert!(rel(s.b, 0.5) < 1e-15);
    }

    #[test]
    fn step_params_domain() {
        assert!(step_params(4.0, 1.5, 2.0, 2.0).is_err());
        assert!(step_params(4.0, 4.0, 2.0, 2.0).is_err());
        assert!(step_params(4.0, 2.0, 0.5, 2.0).is_err());
        assert!(step_params(4.0, 2.0, 2.0, 0.9).is_err());
        assert!(step_params(f64::INFINITY, 2.0, 2.0, 2.0).is_err());
    }

    #[test]
    fn beta_new_is_twice_beta_over_a() {
        for &(p, q, b, s) in &[(4.0, 2.0, 100.0, 10.0), (8.0, 4.0, 7.0, 3.0), (5.0, 4.0, 50.0, 2.0)] {
            let sp = step_params(p, q, b, s).unwrap();
            assert!(rel(beta_new(p, q, b, s).unwrap(), 2.0 * b / sp.a) < 1e-12);
        }
    }

    #[test]
    fn fixpoint_examples() {
        assert_eq!(predict_fixpoint(8.0, 4.0, 10.0).unwrap(), 160.0);
        assert_eq!(predict_fixpoint(4.0, 2.0, 10.0).unwrap(), 160.0);
        assert_eq!(predict_fixpoint(8.0, 2.0, 10.0).unwrap(), 5120.0);
        let fp = predict_fixpoint(6.0, 4.0, 3.0).unwrap();
        assert!(rel(beta_new(6.0, 4.0, fp, 3.0).unwrap(), fp) < 1e-12);
        assert!(predict_fixpoint(2.0, 2.0, 3.0).is_err());
    }

    #[test]
    fn fixpoint_matches_iteration_from_above() {
        let mut beta = 1e6;
        let mut steps = 0;
        loop {
            let next = beta_new(8.0, 2.0, beta, 10.0).unwrap();
            steps += 1;
            if (next - beta).abs() < 1e-6 * beta {
                beta = next;
                break;
            }
            beta = next;
            assert!(steps < 10_000);
        }
        assert!(rel(beta, 5120.0) < 1e-4);
    }

    #[test]
    fn k_formula() {
        assert_eq!(iteration_count(4.0, 64.0), 4);
        assert!(64f64.powf(1.0 / 16.0) <= 2f64.powf(1.0 / 4f64.log2()));
        assert_eq!(iteration_count(4.0, 1.0), 1);
        assert_eq!(iteration_count(2.0, 2.0), 1);
    }

    #[test]
    fn partial_product_matches_iterates() {
        let mut b: f64 = 64.0;
        for k in 1..=20u32 {
            b = 4.0 * (10.0 * b).sqrt();
            let exact = halving_partial_product(10.0, 64.0, k);
            assert!(rel(b, exact) < 1e-9, "k={k}");
            assert!(rel(exact, 160.0 * (64.0 / 160.0f64).powf(0.5f64.powi(k as i32))) < 1e-12);
            assert!(b <= halving_closed_form(10.0, 64.0, k) * (1.0 + 1e-12));
        }
    }
}
