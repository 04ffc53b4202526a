use parevo_core::detrend::{DailyPattern, Parameter};
use parevo_core::ingest::TradingCalendar;
use parevo_core::sde::{
    ensemble_stats, euler_maruyama, generate_synthetic_dataset, moment_sde_coefficients, ou_ensemble, ou_mean_var,
    simulate_coupled, verify_moment_evolution, CoupledLangevinSpec, LangevinSpec1D, MomentEvolutionSpec, OuAnalytic,
    SyntheticSpec,
};
use parevo_core::{ModelFamily, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn brownian_variance_grows_linearly() {
    let (sigma2, dt, n) = (0.25, 0.01, 200);
    let ends: Vec<f64> = (0..10_000u64)
        .map(|p| {
            let spec =
                LangevinSpec1D { drift: |_| 0.0, diffusion: |_| sigma2, x0: 0.0, dt, n_steps: n, seed: 5, stream: p };
            *euler_maruyama(&spec).unwrap().last().unwrap()
        })
        .collect();
    let s = ensemble_stats(&ends);
    let expect = sigma2 * n as f64 * dt;
    assert!((s.variance / expect - 1.0).abs() <= 0.05, "{} vs {expect}", s.variance);
}

#[test]
fn ou_ensemble_matches_closed_forms() {
    let a = OuAnalytic { k: 1.0, sigma: 0.6, phi_f: 0.4, phi0: 1.5, t0: 0.0 };
    let dt = 0.002;
    let times = [0.5, 1.0, 2.0, 5.0];
    let checkpoints: Vec<usize> = times.iter().map(|t| (t / dt) as usize).collect();
    let stats = ou_ensemble(&a, dt, &checkpoints, 10_000, 17);
    for (s, &t) in stats.iter().zip(&times) {
        let (m, v) = ou_mean_var(&a, t).unwrap();
        assert!((s.mean - m).abs() <= 3.0 * s.mean_se, "t={t}: mean {} vs {m}", s.mean);
        assert!((s.variance - v).abs() <= 3.0 * s.variance_se, "t={t}: var {} vs {v}", s.variance);
    }
    // long run
    let (_, v) = ou_mean_var(&a, 1e6).unwrap();
    assert_eq!(v, a.stationary_variance());
    assert!((stats[3].variance - v).abs() <= 3.0 * stats[3].variance_se);
}

#[test]
fn paper_variance_after_one_response_time() {
    let a = OuAnalytic { k: 2.02e-4, sigma: 1.34e-4, phi_f: 0.0, phi0: 0.0, t0: 0.0 };
    let (_, v) = ou_mean_var(&a, 1.0 / a.k).unwrap();
    assert!((v - 3.8e-5).abs() < 0.05e-5, "{v}");
}

#[test]
fn coupled_ou_pair_reaches_stationary_variances() {
    let (k1, k2, s1, s2) = (1.0, 3.0, 0.5, 0.8);
    let (dt, steps) = (0.002, 2500);
    let (mut phis, mut thetas) = (Vec::new(), Vec::new());
    for seed in 0..4000 {
        let spec = CoupledLangevinSpec {
            drift: |p: f64, t: f64| (-k1 * p, -k2 * t),
            diffusion: |_, _| [[s1, 0.3 * s1], [0.0, s2]],
            x0: (0.0, 0.0),
            dt,
            n_steps: steps,
            seed,
        };
        let path = simulate_coupled(&spec).unwrap();
        phis.push(*path.phi.last().unwrap());
        thetas.push(*path.theta.last().unwrap());
    }
    let t = dt * steps as f64;
    let (p, q) = (ensemble_stats(&phis), ensemble_stats(&thetas));
    let vp = (s1 * s1 * 1.09) / (2.0 * k1) * (1.0 - (-2.0 * k1 * t).exp());
    let vq = s2 * s2 / (2.0 * k2) * (1.0 - (-2.0 * k2 * t).exp());
    assert!((p.variance - vp).abs() <= 3.0 * p.variance_se, "{} vs {vp}", p.variance);
    assert!((q.variance - vq).abs() <= 3.0 * q.variance_se, "{} vs {vq}", q.variance);
}

#[test]
fn zero_diffusion_follows_the_ode() {
    // dφ = −θφ, dθ = 1 − θ; reference by classical RK4 at a tiny step
    let f = |p: f64, t: f64| (-t * p, 1.0 - t);
    let horizon = 2.0;
    let rk4 = {
        let (mut p, mut t) = (1.0, 0.2);
        let h = 1e-4;
        for _ in 0..(horizon / h) as usize {
            let k1 = f(p, t);
            let k2 = f(p + 0.5 * h * k1.0, t + 0.5 * h * k1.1);
            let k3 = f(p + 0.5 * h * k2.0, t + 0.5 * h * k2.1);
            let k4 = f(p + h * k3.0, t + h * k3.1);
            p += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            t += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
        (p, t)
    };
    let err = |dt: f64| {
        let spec = CoupledLangevinSpec {
            drift: f,
            diffusion: |_, _| [[0.0; 2]; 2],
            x0: (1.0, 0.2),
            dt,
            n_steps: (horizon / dt).round() as usize,
            seed: 0,
        };
        let path = simulate_coupled(&spec).unwrap();
        (path.phi.last().unwrap() - rk4.0).abs().max((path.theta.last().unwrap() - rk4.1).abs())
    };
    let (e1, e2) = (err(0.01), err(0.005));
    assert!(e1 <= 0.1 * 0.01 * 10.0, "{e1}");
    assert!((e1 / e2 - 2.0).abs() < 0.1, "{e1} / {e2}");
}

/// Partials of `F_n` by Richardson-extrapolated central differences.
fn fd_partials(family: ModelFamily, n: u32, phi: f64, theta: f64) -> [f64; 5] {
    let f = |p: f64, t: f64| ModelParams::new(family, p, t).unwrap().moment(n).finite().unwrap();
    let (hp0, ht0) = (1e-3 * phi.abs().max(1.0), 1e-3 * theta);
    let at = |hp: f64, ht: f64| {
        let c = f(phi, theta);
        [
            (f(phi + hp, theta) - f(phi - hp, theta)) / (2.0 * hp),
            (f(phi, theta + ht) - f(phi, theta - ht)) / (2.0 * ht),
            (f(phi + hp, theta) - 2.0 * c + f(phi - hp, theta)) / (hp * hp),
            (f(phi, theta + ht) - 2.0 * c + f(phi, theta - ht)) / (ht * ht),
            (f(phi + hp, theta + ht) - f(phi + hp, theta - ht) - f(phi - hp, theta + ht) + f(phi - hp, theta - ht))
                / (4.0 * hp * ht),
        ]
    };
    let (coarse, fine) = (at(hp0, ht0), at(0.5 * hp0, 0.5 * ht0));
    core::array::from_fn(|i| (4.0 * fine[i] - coarse[i]) / 3.0)
}

#[test]
fn coefficients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..100 {
        let family = ModelFamily::ALL[i % 4];
        let n = rng.random_range(1..=3u32);
        let (phi, theta) = match family {
            ModelFamily::Gamma => (rng.random_range(0.5..5.0), rng.random_range(0.2..3.0)),
            ModelFamily::InverseGamma => (n as f64 + rng.random_range(0.5..5.0), rng.random_range(0.2..3.0)),
            ModelFamily::LogNormal => (rng.random_range(-1.0..1.0), rng.random_range(0.1..0.8)),
            ModelFamily::Weibull => (rng.random_range(0.7..4.0), rng.random_range(0.2..3.0)),
        };
        let h = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let g: [[f64; 2]; 2] = core::array::from_fn(|_| core::array::from_fn(|_| rng.random_range(-0.5..0.5)));
        let got = moment_sde_coefficients(family, n, (phi, theta), h, g).unwrap();
        let [fp, ft, fpp, ftt, fpt] = fd_partials(family, n, phi, theta);
        let terms_a = [
            fp * h.0,
            ft * h.1,
            fpt * (g[0][0] * g[1][0] + g[0][1] * g[1][1]),
            0.5 * fpp * (g[0][0] * g[0][0] + g[0][1] * g[0][1]),
            0.5 * ftt * (g[1][0] * g[1][0] + g[1][1] * g[1][1]),
        ];
        let terms_b = [fp * g[0][0], ft * g[1][0]];
        let terms_c = [fp * g[0][1], ft * g[1][1]];
        for (name, value, terms) in [("A", got.a, &terms_a[..]), ("B", got.b, &terms_b[..]), ("C", got.c, &terms_c[..])]
        {
            let expect: f64 = terms.iter().sum();
            let scale = terms.iter().map(|t| t.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
            assert!(
                (value - expect).abs() <= 1e-6 * scale,
                "{family} n={n} ({phi}, {theta}) {name}: {value} vs {expect}"
            );
        }
    }
}

#[test]
fn stochastic_parameters_converge_at_order_one_half() {
    let spec = MomentEvolutionSpec {
        family: ModelFamily::LogNormal,
        order: 1,
        coupled: CoupledLangevinSpec {
            drift: |p: f64, t: f64| (-0.5 * p, -0.5 * (t - 0.5)),
            diffusion: |_, _| [[0.3, 0.0], [0.0, 0.1]],
            x0: (0.0, 0.5),
            dt: 0.05,
            n_steps: 20,
            seed: 3,
        },
    };
    let r = verify_moment_evolution(&spec, 2000, 5).unwrap();
    assert!((r.fitted_order - 0.5).abs() <= 0.1, "{r:?}");
    for o in &r.orders {
        assert!((2f64.powf(*o) - 2f64.sqrt()).abs() < 0.25, "{r:?}");
    }
}

#[test]
fn deterministic_parameters_converge_at_order_one() {
    let spec = MomentEvolutionSpec {
        family: ModelFamily::Gamma,
        order: 2,
        coupled: CoupledLangevinSpec {
            drift: |p: f64, t: f64| (0.5 - 0.2 * p, 0.3 * t),
            diffusion: |_, _| [[0.0; 2]; 2],
            x0: (2.0, 1.0),
            dt: 0.05,
            n_steps: 20,
            seed: 3,
        },
    };
    let r = verify_moment_evolution(&spec, 1, 5).unwrap();
    assert!((r.fitted_order - 1.0).abs() <= 0.1, "{r:?}");
    for o in &r.orders {
        assert!((2f64.powf(*o) - 2.0).abs() < 0.2, "{r:?}");
    }
}

fn paper_spec(days: usize, n_entities: usize, seed: u64) -> SyntheticSpec {
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
fn sixty_days_of_two_thousand_entities() {
    let d = generate_synthetic_dataset(&paper_spec(60, 2000, 1)).unwrap();
    assert_eq!(d.series.trading_count(), 2340);
    assert!(d.series.snapshots().iter().all(|s| s.len() == 2000));
    assert_eq!(d.phi.len(), 2340);
    assert!(d.phi.iter().all(|&p| p > 0.0));
    assert!(d.rejections as f64 <= 0.1 * d.proposals as f64);
    let v = d.phi_star.iter().map(|x| x * x).sum::<f64>() / d.phi_star.len() as f64;
    assert!(v > 1e-5 && v < 2e-4, "{v}");
}

#[test]
fn generator_and_integrator_are_reproducible() {
    let a = generate_synthetic_dataset(&paper_spec(2, 30, 7)).unwrap();
    let b = generate_synthetic_dataset(&paper_spec(2, 30, 7)).unwrap();
    assert_eq!(a, b);
    let c = generate_synthetic_dataset(&paper_spec(2, 30, 8)).unwrap();
    assert_ne!(a.series, c.series);
    let spec = LangevinSpec1D {
        drift: |x: f64| -x,
        diffusion: |x: f64| 0.1 + x * x,
        x0: 0.2,
        dt: 0.01,
        n_steps: 1000,
        seed: 9,
        stream: 4,
    };
    assert_eq!(euler_maruyama(&spec).unwrap(), euler_maruyama(&spec).unwrap());
}
