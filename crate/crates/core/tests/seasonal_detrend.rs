use parevo_core::detrend::{decompose, fit_daily_polynomial, moving_daily_pattern, Parameter, SlotKey};
use parevo_core::sde::substream;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const PHI: [f64; 4] = [0.972, 1.33e-3, -7.97e-5, 1.55e-6];
const THETA: [f64; 3] = [4.45e6, -2.77e5, 6.97e3];

fn grid(days: usize, slots: usize) -> Vec<SlotKey> {
    (0..days).flat_map(|day| (0..slots).map(move |slot| SlotKey { day, slot })).collect()
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |a, &v| a * x + v)
}

#[test]
fn paper_phi_coefficients_recovered() {
    let td: Vec<f64> = (0..39).map(|j| 10.0 * j as f64).collect();
    let y: Vec<f64> = (0..39).map(|j| poly(&PHI, j as f64)).collect();
    let p = fit_daily_polynomial(Parameter::Phi, &td, &y, 3, 10.0, 390.0).unwrap();
    for (a, b) in p.coeffs.iter().zip(PHI) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
    assert!(p.residual_rms < 1e-9);
}

#[test]
fn paper_theta_coefficients_recovered() {
    let td: Vec<f64> = (0..39).map(|j| 10.0 * j as f64).collect();
    let y: Vec<f64> = (0..39).map(|j| poly(&THETA, j as f64)).collect();
    let p = fit_daily_polynomial(Parameter::Theta, &td, &y, 2, 10.0, 390.0).unwrap();
    for (a, b) in p.coeffs.iter().zip(THETA) {
        assert!((a / b - 1.0).abs() < 1e-6, "{a} vs {b}");
    }
    assert!(p.residual_rms < 1e-9 * 4.45e6);
}

#[test]
fn constant_input_cubic() {
    let td: Vec<f64> = (0..39).map(|j| 10.0 * j as f64).collect();
    let p = fit_daily_polynomial(Parameter::Phi, &td, &[2.5; 39], 3, 10.0, 390.0).unwrap();
    assert!((p.coeffs[0] - 2.5).abs() < 1e-12);
    assert!(p.coeffs[1..].iter().all(|c| c.abs() < 1e-12));
    assert!(fit_daily_polynomial(Parameter::Phi, &[0.0, 10.0, 10.0], &[1.0, 2.0, 3.0], 3, 10.0, 390.0).is_err());
}

#[test]
fn constant_series_decomposes_trivially() {
    let keys = grid(30, 39);
    let d = decompose(Parameter::Phi, &keys, &vec![0.97; keys.len()], 20, 3, 10.0, 390.0).unwrap();
    assert!(d.pattern.iter().all(|&p| p == 0.97));
    assert!(d.fluctuations.iter().all(|&f| f == 0.0));
}

#[test]
fn white_noise_fluctuation_spread() {
    let keys = grid(400, 39);
    let mut rng = substream(3, 0);
    let values: Vec<f64> = keys.iter().map(|k| poly(&PHI, k.slot as f64) + 0.1 * gauss(&mut rng)).collect();
    let d = decompose(Parameter::Phi, &keys, &values, 20, 3, 10.0, 390.0).unwrap();
    let n = d.fluctuations.len() as f64;
    let sd = (d.fluctuations.iter().map(|f| f * f).sum::<f64>() / n).sqrt();
    let expect = 0.1 * (1.0f64 - 1.0 / 20.0).sqrt();
    assert!((sd / expect - 1.0).abs() < 0.1, "sd {sd} vs {expect}");
}

#[test]
fn fluctuations_average_out_in_every_window() {
    let keys = grid(45, 6);
    let mut rng = substream(4, 0);
    let values: Vec<f64> = keys.iter().map(|_| rng.random_range(0.5..1.5)).collect();
    let window = 20;
    let pattern = moving_daily_pattern(&keys, &values, window).unwrap();
    for (i, k) in keys.iter().enumerate() {
        let (lo, hi) = (k.day.saturating_sub(window / 2), k.day + window / 2);
        let members: Vec<f64> = keys
            .iter()
            .zip(&values)
            .filter(|(o, _)| o.slot == k.slot && o.day >= lo && o.day <= hi)
            .map(|(_, &v)| v - pattern[i])
            .collect();
        let mean = members.iter().sum::<f64>() / members.len() as f64;
        assert!(mean.abs() < 1e-12);
    }
}

#[test]
fn shifting_by_a_constant_shifts_only_the_pattern() {
    let keys = grid(25, 39);
    let mut rng = substream(5, 0);
    let values: Vec<f64> = keys.iter().map(|k| poly(&PHI, k.slot as f64) + 0.01 * rng.random::<f64>()).collect();
    let shifted: Vec<f64> = values.iter().map(|v| v + 3.0).collect();
    let a = decompose(Parameter::Phi, &keys, &values, 20, 3, 10.0, 390.0).unwrap();
    let b = decompose(Parameter::Phi, &keys, &shifted, 20, 3, 10.0, 390.0).unwrap();
    for i in 0..keys.len() {
        assert!((b.pattern[i] - a.pattern[i] - 3.0).abs() < 1e-12);
        assert!((b.fluctuations[i] - a.fluctuations[i]).abs() < 1e-12);
        assert_eq!(b.pattern[i] + b.fluctuations[i], shifted[i]);
    }
    assert!((b.polynomial.coeffs[0] - a.polynomial.coeffs[0] - 3.0).abs() < 1e-9);
}

#[test]
fn ou_fluctuations_recovered_to_window_limit() {
    // k = 2.02e-4/s and 10-minute slots; one OU path per day, days independent
    let (days, slots, k, sigma) = (60usize, 39usize, 2.02e-4, 1.34e-4);
    let a = parevo_core::sde::OuAnalytic { k, sigma, phi_f: 0.0, phi0: 0.0, t0: 0.0 };
    let sd = a.stationary_variance().sqrt();
    let mut rng = substream(6, 0);
    let mut truth = Vec::new();
    for _ in 0..days {
        let mut x = sd * gauss(&mut rng);
        for _ in 0..slots {
            truth.push(x);
            x = a.exact_step(x, 600.0, gauss(&mut rng));
        }
    }
    let keys = grid(days, slots);
    let values: Vec<f64> = keys.iter().zip(&truth).map(|(k, t)| poly(&PHI, k.slot as f64) + t).collect();
    let d = decompose(Parameter::Phi, &keys, &values, 20, 3, 10.0, 390.0).unwrap();
    let n = truth.len() as f64;
    let rmse = (d.fluctuations.iter().zip(&truth).map(|(f, t)| (f - t).powi(2)).sum::<f64>() / n).sqrt();
    // The recovery error is the window mean of independent day values, so
    // its variance is s² times the average of 1/window size.
    let inv: f64 =
        keys.iter().map(|k| 1.0 / ((k.day + 10).min(days - 1) - k.day.saturating_sub(10) + 1) as f64).sum::<f64>() / n;
    let expect = sd * inv.sqrt();
    assert!((rmse / expect - 1.0).abs() < 0.15, "rmse {rmse} vs {expect}");
}

fn gauss(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}
