use hawkes_gen::analytics::limit_constants;
use hawkes_gen::claims::ClaimLaw;
use hawkes_gen::deviations::{empirical_cumulant, min_root, rate_j, CumulantModel};
use hawkes_gen::kernel::{Baseline, Extension, Kernel, KernelSequence};
use hawkes_gen::simulate::{replicate, replicate_with, simulate_branching_with};
use proptest::prelude::*;

fn classical_with(norm: f64) -> KernelSequence {
    KernelSequence::classical(1.0, Kernel::exponential(2.0, 2.0 * norm).unwrap()).unwrap()
}

fn even_odd() -> KernelSequence {
    KernelSequence::new(
        Baseline::constant(2.0).unwrap(),
        vec![Kernel::exponential(2.0, 1.0).unwrap(), Kernel::exponential(1.0, 0.25).unwrap()],
        Extension::Cyclic,
    )
    .unwrap()
}

#[test]
fn classical_tangency() {
    let model = CumulantModel::new(classical_with(0.5));
    let tc = model.theta_c();
    assert!((tc.value - (2f64.ln() - 0.5)).abs() < 1e-8);
    assert!((model.f_limit(tc.value) - 2f64.ln()).abs() < 1e-3);
    assert!((model.gamma(tc.value) - 1.0).abs() < 2e-3);
    assert_eq!(model.f_limit(0.25), f64::INFINITY);
    assert_eq!(model.f_limit(0.0), 0.0);
}

#[test]
fn theta_c_even_odd_and_poisson() {
    let model = CumulantModel::new(even_odd());
    let tc = model.theta_c();
    assert!(!tc.capped);
    assert!(model.f_limit(tc.value - 1e-6).is_finite());
    assert_eq!(model.f_limit(tc.value + 1e-6), f64::INFINITY);
    assert!(tc.value >= 0.5 - 1.0 - 0.5f64.ln() - 1e-12);
    let poisson = CumulantModel::new(KernelSequence::poisson(1.0).unwrap());
    assert!(poisson.theta_c().capped);
}

#[test]
fn minimal_roots() {
    assert_eq!(min_root(0.0, 0.5).unwrap(), 0.0);
    assert_eq!(min_root(0.5 - 1.0 - 0.5f64.ln(), 0.5).unwrap(), 2f64.ln());
    let x = min_root(-1.0, 0.5).unwrap();
    // e^x − 1 < 0 pushes the root below θ
    assert!(x > -1.5 && x < -1.0);
    assert!((-1.0 + 0.5 * x.exp_m1() - x).abs() < 1e-12);
    assert!(min_root(0.3, 0.5).is_err());
}

#[test]
fn classical_rate_values() {
    let model = CumulantModel::new(classical_with(0.5));
    assert!((model.rate_i(1.0) - (0.5 - 1.5f64.ln())).abs() < 1e-9);
    assert!(model.rate_i(2.0).abs() < 1e-10);
    assert_eq!(model.rate_i(-1.0), f64::INFINITY);
    let lc = limit_constants(&classical_with(0.5), 1e-12).unwrap();
    assert_eq!(rate_j(&lc, 0.0), 0.0);
    assert!((rate_j(&lc, 2.0) - 0.25).abs() < 1e-12);
    assert_eq!(rate_j(&lc, -1.3), rate_j(&lc, 1.3));
}

#[test]
fn compound_cumulant() {
    let model = CumulantModel::new(classical_with(0.5));
    let det = ClaimLaw::Deterministic { value: 1.0 };
    assert_eq!(model.gamma_c(&det, 0.0), 0.0);
    assert!((model.gamma_c(&det, 0.1) - model.gamma(0.1)).abs() < 1e-12);
    assert!((model.rate_ic(&det, 1.0) - model.rate_i(1.0)).abs() < 1e-8);
    let exp = ClaimLaw::Exponential { mean: 0.5 };
    let target = model.gamma((1.0f64 / 0.95).ln());
    assert!((model.gamma_c(&exp, 0.1) - target).abs() < 1e-10);

    // Monte Carlo oracle on aggregate claims
    let (t, theta) = (50.0, 0.1);
    let seq = classical_with(0.5);
    let totals: Vec<f64> = replicate_with(31, 4000, |s| {
        let mut rng = s.rng();
        let log = simulate_branching_with(&seq, t, &mut rng, 1e-6).unwrap();
        (0..log.count()).map(|_| exp.sample(&mut rng)).sum::<f64>()
    });
    let est = empirical_cumulant(&totals, theta, t);
    // E[e^{θS_t}] carries an O(1/t) startup correction
    assert!((est.value - target).abs() < 3.0 * est.error + 0.01, "{est:?} vs {target}");
}

#[test]
fn poisson_empirical_cumulant() {
    let seq = KernelSequence::poisson(1.0).unwrap();
    let (t, theta) = (50.0, 0.2);
    let counts: Vec<f64> = replicate(&seq, t, 32, 4000, 1e-6).unwrap().iter().map(|s| s.count as f64).collect();
    let est = empirical_cumulant(&counts, theta, t);
    assert!((est.value - theta.exp_m1()).abs() < 3.0 * est.error, "{est:?}");
    assert_eq!(empirical_cumulant(&counts, 0.0, t).value, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gamma_is_convex(norm in 0.05f64..0.9, a in 0.0f64..1.0, b in 0.0f64..1.0, w in 0.0f64..1.0) {
        let model = CumulantModel::new(classical_with(norm));
        let tc = model.theta_c().value;
        let lo = -2.0 + a * (tc + 2.0) * 0.95;
        let hi = -2.0 + b * (tc + 2.0) * 0.95;
        let mid = w * lo + (1.0 - w) * hi;
        let chord = w * model.gamma(lo) + (1.0 - w) * model.gamma(hi);
        prop_assert!(model.gamma(mid) <= chord + 1e-9 * (1.0 + chord.abs()));
        prop_assert!(model.rate_i(model.gamma_prime(mid)) >= -1e-9);
    }

    #[test]
    fn f_m_is_monotone_in_depth(norm in 0.05f64..0.9, frac in 0.01f64..0.99, depth in 0usize..60) {
        let model = CumulantModel::new(classical_with(norm));
        let theta = frac * model.theta_c().value;
        prop_assert!(model.f_m(theta, depth + 1) >= model.f_m(theta, depth));
        prop_assert!(model.f_m(-theta, depth + 1) <= model.f_m(-theta, depth));
        prop_assert!(model.f_m(theta, depth) <= model.f_limit(theta) + 1e-9);
    }
}
