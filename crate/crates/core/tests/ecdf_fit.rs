use parevo_core::detrend::{DailyPattern, Parameter};
use parevo_core::ecdf::{fit_all, fit_model, fit_snapshot, EmpiricalCDF};
use parevo_core::ingest::{Mask, SnapshotSeries, TradingCalendar};
use parevo_core::sde::{generate_synthetic_dataset, substream, SyntheticSpec};
use parevo_core::{Error, ModelFamily, ModelParams};
use rand_distr::Distribution;

fn draws(m: &ModelParams, n: usize, seed: u64) -> Vec<f64> {
    let s = m.sampler();
    let mut rng = substream(seed, 0);
    (0..n).map(|_| s.sample(&mut rng)).collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn weibull_ecdf_within_ks_band() {
    let m = ModelParams::new(ModelFamily::Weibull, 2.0, 1.0).unwrap();
    // P(√n D > 0.06 √1000) ≈ 0.0015 under the Kolmogorov law
    let misses = (0..200u64)
        .filter(|&seed| EmpiricalCDF::from_sample(&draws(&m, 1000, seed), 1).unwrap().ks_distance(&m).unwrap() >= 0.06)
        .count();
    assert!(misses <= 2, "{misses} of 200 exceeded 0.06");
}

#[test]
fn inverse_gamma_tail_index_recovery() {
    let m = ModelParams::new(ModelFamily::InverseGamma, 0.97, 2.5e6).unwrap();
    let phis: Vec<f64> = (0..100u64)
        .map(|seed| {
            let e = EmpiricalCDF::from_sample(&draws(&m, 2000, 1000 + seed), 1).unwrap();
            fit_model(&e, ModelFamily::InverseGamma).unwrap().params.phi()
        })
        .collect();
    let within = phis.iter().filter(|p| (*p / 0.97 - 1.0).abs() < 0.05).count();
    // The CDF least-squares estimator has a spread of about 0.03 at n = 2000,
    // which puts roughly 89% of fits inside ±5%.
    assert!(within >= 80, "{within} of 100 within 5%");
    let mean = phis.iter().sum::<f64>() / phis.len() as f64;
    assert!((mean / 0.97 - 1.0).abs() < 0.01, "mean {mean}");
}

#[test]
fn true_family_has_smallest_median_sse() {
    let models = [
        ModelParams::new(ModelFamily::Gamma, 2.0, 1.0).unwrap(),
        ModelParams::new(ModelFamily::InverseGamma, 2.0, 1.0).unwrap(),
        ModelParams::new(ModelFamily::LogNormal, 0.0, 0.6).unwrap(),
        ModelParams::new(ModelFamily::Weibull, 1.5, 1.0).unwrap(),
    ];
    for (g, m) in models.iter().enumerate() {
        let mut sse = vec![Vec::new(); 4];
        for seed in 0..50u64 {
            let fits = fit_snapshot(&draws(m, 2000, 50 * g as u64 + seed), 1);
            for (f, r) in fits.iter().enumerate() {
                sse[f].push(r.as_ref().unwrap().sse);
            }
        }
        let medians: Vec<f64> = sse.into_iter().map(median).collect();
        for (f, &v) in medians.iter().enumerate() {
            assert!(medians[g] <= v, "generator {} beaten by {}: {:?}", m.family(), ModelFamily::ALL[f], medians);
        }
    }
}

#[test]
fn degenerate_snapshot_only_affects_its_cells() {
    let times: Vec<i64> = (0..3).map(|i| 19_000 * 86_400 + 540 * 60 + 600 * i).collect();
    let m = ModelParams::new(ModelFamily::Gamma, 2.0, 1.0).unwrap();
    let snaps = vec![draws(&m, 50, 1), vec![4.0; 30], draws(&m, 50, 2)];
    let series = SnapshotSeries::new(times, snaps, vec![Mask::Trading; 3]).unwrap();
    let p = fit_all(&series, 1);
    assert_eq!(p.fits.len(), 3);
    assert!(p.fits[1].iter().all(|r| matches!(r, Err(Error::Underdetermined(_)))));
    assert!(p.fits[0].iter().chain(&p.fits[2]).all(|r| r.is_ok()));
}

#[test]
fn fits_are_permutation_invariant() {
    let m = ModelParams::new(ModelFamily::LogNormal, 1.0, 0.7).unwrap();
    let xs = draws(&m, 400, 9);
    let mut ys = xs.clone();
    ys.reverse();
    ys.swap(3, 100);
    assert_eq!(fit_snapshot(&xs, 1), fit_snapshot(&ys, 1));
}

fn small_spec(days: usize, n_entities: usize, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        phi_pattern: DailyPattern::new(Parameter::Phi, vec![0.972, 1.33e-3, -7.97e-5, 1.55e-6], 10.0, 390.0).unwrap(),
        theta_pattern: DailyPattern::new(Parameter::Theta, vec![4.45e6, -2.77e5, 6.97e3], 10.0, 390.0).unwrap(),
        k: 2.02e-4,
        sigma: 1.34e-4,
        n_entities,
        days,
        first_day: 19_000,
        calendar: TradingCalendar::default(),
        seed,
        max_rejection_rate: 0.1,
    }
}

#[test]
fn cardinality_of_a_two_day_run() {
    let d = generate_synthetic_dataset(&small_spec(2, 50, 4)).unwrap();
    let p = fit_all(&d.series, 10);
    assert_eq!(p.fits.len(), 78);
    assert!(p.fits.iter().all(|row| row.len() == 4));
}

#[test]
fn fitted_tail_index_tracks_the_generator() {
    // Monte-Carlo spread of the estimator at a fixed snapshot law
    let m = ModelParams::new(ModelFamily::InverseGamma, 0.98, 2.5e6).unwrap();
    let reps: Vec<f64> = (0..40u64)
        .map(|s| {
            let e = EmpiricalCDF::from_sample(&draws(&m, 2000, 500 + s), 1).unwrap();
            fit_model(&e, ModelFamily::InverseGamma).unwrap().params.phi()
        })
        .collect();
    let mean = reps.iter().sum::<f64>() / reps.len() as f64;
    let mc_std = (reps.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / reps.len() as f64).sqrt();

    let d = generate_synthetic_dataset(&small_spec(1, 2000, 21)).unwrap();
    let p = fit_all(&d.series, 10);
    let col = p.column(ModelFamily::InverseGamma);
    assert_eq!(col.len(), 39);
    let rmse = (col.iter().zip(&d.phi).map(|((_, m), t)| (m.phi() - t).powi(2)).sum::<f64>() / 39.0).sqrt();
    assert!(rmse <= 3.0 * mc_std, "rmse {rmse} vs mc std {mc_std}");
}
