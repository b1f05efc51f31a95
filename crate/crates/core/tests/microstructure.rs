use hawkes_gen::analytics::{PartitionExtension, PartitionSpec};
use hawkes_gen::kernel::{Baseline, Extension, Kernel, KernelSequence, DEFAULT_TRUNCATION};
use hawkes_gen::microstructure::{
    analytic_second_moments, epps_curve, signature_plot, simulate_prices, stationary_warmup, CovarianceTable,
    PricePath,
};
use hawkes_gen::simulate::{simulate_stationary, RngStream};
use hawkes_gen::stats::mean_se;
use proptest::prelude::*;

fn classical() -> KernelSequence {
    KernelSequence::classical(1.0, Kernel::exponential(2.0, 1.0).unwrap()).unwrap()
}

fn even_odd() -> KernelSequence {
    KernelSequence::new(
        Baseline::constant(2.0).unwrap(),
        vec![Kernel::exponential(2.0, 1.0).unwrap(), Kernel::exponential(1.0, 0.25).unwrap()],
        Extension::Cyclic,
    )
    .unwrap()
}

fn table(seq: &KernelSequence, step: f64) -> CovarianceTable {
    let max_lag = 2.0 * seq.max_truncation_length(DEFAULT_TRUNCATION);
    CovarianceTable::new(seq, 30, step, max_lag).unwrap()
}

fn first_class() -> PartitionSpec {
    PartitionSpec::new(2, vec![0], PartitionExtension::Constant(1)).unwrap()
}

#[test]
fn immigrant_entry_and_symmetry() {
    let t = table(&classical(), 0.01);
    for lag in [0.3, 1.0, -2.5] {
        assert_eq!(t.rho(0, 0, lag), 1.0);
        assert_eq!(t.covariance(0, 0, lag), 0.0);
        assert!((t.rho(1, 1, lag) - t.rho(1, 1, -lag)).abs() < 1e-12);
        assert!((t.rho(1, 2, lag) - t.rho(2, 1, -lag)).abs() < 1e-12);
    }
    for (i, j) in [(0, 1), (1, 1), (1, 3), (2, 2)] {
        assert!(t.entry(i, j).unwrap().values().iter().all(|v| *v >= -1e-12));
    }
    let poisson = table(&KernelSequence::poisson(1.0).unwrap(), 0.01);
    assert_eq!(poisson.n_max(), 0);
    assert!(poisson.entry(0, 1).is_none());
}

#[test]
fn binned_pair_counts_match_rho_11() {
    let seq = classical();
    let t = table(&seq, 0.005);
    let (horizon, width, n_paths) = (100.0, 0.05, 10_000u64);
    let warmup = stationary_warmup(&seq);
    let lags = [0.1, 0.5, 1.0];
    let window = horizon - 1.0 - width;
    let per_path: Vec<[f64; 3]> = (0..n_paths)
        .map(|i| {
            let log = simulate_stationary(&seq, horizon, warmup, RngStream::new(51, i), 1e-6).unwrap();
            let g1: Vec<f64> = log.events.iter().filter(|e| e.generation == 1).map(|e| e.time).collect();
            let mut out = [0.0; 3];
            for (k, lag) in lags.iter().enumerate() {
                let (lo, hi) = (lag - width / 2.0, lag + width / 2.0);
                let mut pairs = 0usize;
                for (a_idx, a) in g1.iter().enumerate() {
                    if *a > window {
                        break;
                    }
                    pairs += g1[a_idx + 1..].iter().filter(|b| (lo..hi).contains(&(*b - a))).count();
                }
                out[k] = pairs as f64 / (window * width);
            }
            out
        })
        .collect();
    for (k, lag) in lags.iter().enumerate() {
        let est = mean_se(&per_path.iter().map(|r| r[k]).collect::<Vec<_>>());
        let analytic = (0..=10).map(|j| t.rho(1, 1, lag - width / 2.0 + j as f64 * width / 10.0)).sum::<f64>() / 11.0;
        assert!((est.value - analytic).abs() < 3.0 * est.error, "lag {lag}: {est:?} vs {analytic}");
    }
}

#[test]
fn poisson_moments() {
    let t = CovarianceTable::new(&KernelSequence::poisson(1.5).unwrap(), 30, 0.01, 2.0).unwrap();
    let m = analytic_second_moments(&t, &first_class(), 0.4).unwrap();
    assert!((m.x1 - (1.5 * 0.4 + 1.5f64.powi(2) * 0.16)).abs() < 1e-12);
    let zero = analytic_second_moments(&t, &first_class(), 0.0).unwrap();
    assert_eq!((zero.x1, zero.x2, zero.x12), (0.0, 0.0, 0.0));
}

#[test]
fn even_odd_signature_against_simulation() {
    let seq = even_odd();
    let t = table(&seq, 0.01);
    let part = PartitionSpec::even_odd();
    let paths: Vec<PricePath> = simulate_prices(&seq, &part, 200.0, 1000, 52, 1e-6)
        .unwrap()
        .into_iter()
        .map(|(x, _)| x)
        .collect();
    let taus = [0.1, 1.0, 10.0];
    for p in signature_plot(&paths, &taus).unwrap() {
        let analytic = analytic_second_moments(&t, &part, p.tau).unwrap().signature();
        let v = p.value.unwrap();
        assert!((v - analytic).abs() < 3.0 * p.se, "τ = {}: {v} ± {} vs {analytic}", p.tau, p.se);
    }
}

#[test]
fn poisson_signature_is_flat() {
    let seq = KernelSequence::poisson(1.0).unwrap();
    let paths: Vec<PricePath> = (0..400u64)
        .map(|i| {
            let a = simulate_stationary(&seq, 100.0, 1.0, RngStream::new(53, 2 * i), 1e-6).unwrap();
            let b = simulate_stationary(&seq, 100.0, 1.0, RngStream::new(53, 2 * i + 1), 1e-6).unwrap();
            PricePath::difference(&a, &b)
        })
        .collect();
    for p in signature_plot(&paths, &[0.05, 0.5, 5.0]).unwrap() {
        assert!((p.value.unwrap() - 2.0).abs() < 3.0 * p.se, "{p:?}");
    }
    // the uncentred component carries the drift term γ̄₀²τ
    let drift: Vec<PricePath> = (0..400u64)
        .map(|i| {
            let log = simulate_stationary(&seq, 100.0, 1.0, RngStream::new(54, i), 1e-6).unwrap();
            PricePath::component(&log, &first_class(), 0).unwrap()
        })
        .collect();
    for p in signature_plot(&drift, &[0.5, 5.0]).unwrap() {
        assert!((p.value.unwrap() - (1.0 + p.tau)).abs() < 3.0 * p.se, "{p:?}");
    }
}

#[test]
fn whole_horizon_scale_is_defined() {
    let seq = even_odd();
    let part = PartitionSpec::new(4, vec![], PartitionExtension::Cyclic(vec![0, 2])).unwrap();
    let pairs: Vec<_> = simulate_prices(&seq, &part, 50.0, 20, 55, 1e-6)
        .unwrap()
        .into_iter()
        .map(|(a, b)| (a, b.unwrap()))
        .collect();
    let c = signature_plot(&pairs.iter().map(|p| p.0.clone()).collect::<Vec<_>>(), &[50.0]).unwrap();
    assert!(c[0].value.unwrap().is_finite() && c[0].se.is_finite());
    let r = epps_curve(&pairs, &[50.0]).unwrap();
    assert!(r[0].value.unwrap().abs() <= 1.0);
    assert!(epps_curve(&pairs, &[60.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn empirical_correlation_is_bounded(seed in any::<u64>(), tau in 0.01f64..20.0, n in 2usize..6) {
        let seq = even_odd();
        let part = PartitionSpec::new(4, vec![], PartitionExtension::Cyclic(vec![0, 2, 1, 3])).unwrap();
        let pairs: Vec<_> = (0..n as u64)
            .map(|i| {
                let log = simulate_stationary(&seq, 20.0, 5.0, RngStream::new(seed, i), 1e-6).unwrap();
                (
                    PricePath::component(&log, &part, 0).unwrap(),
                    PricePath::component(&log, &part, 1).unwrap(),
                )
            })
            .collect();
        for p in epps_curve(&pairs, &[tau]).unwrap() {
            if let Some(v) = p.value {
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&v));
            }
        }
    }
}
