use hawkes_gen::analytics::{
    equilibrium_bound, equilibrium_monte_carlo, even_odd_bridge, limit_constants, mean_count, multivariate_check,
    partition_lln, PartitionExtension, PartitionSpec,
};
use hawkes_gen::kernel::{Baseline, Extension, Kernel, KernelSequence};
use hawkes_gen::simulate::replicate;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn classical() -> KernelSequence {
    KernelSequence::classical(1.0, Kernel::exponential(2.0, 1.0).unwrap()).unwrap()
}

fn even_odd(nu: f64) -> KernelSequence {
    KernelSequence::new(
        Baseline::constant(nu).unwrap(),
        vec![Kernel::exponential(2.0, 1.0).unwrap(), Kernel::exponential(1.0, 0.25).unwrap()],
        Extension::Cyclic,
    )
    .unwrap()
}

#[test]
fn classical_and_poisson_constants() {
    let lc = limit_constants(&classical(), 1e-12).unwrap();
    assert!((lc.m - 2.0).abs() < 1e-10 && (lc.sigma2 - 8.0).abs() < 1e-10);
    assert!(lc.truncation_error_m <= 0.5f64.powi(lc.m_n.len() as i32) / 0.5 + 1e-15);
    let p = limit_constants(&KernelSequence::poisson(1.5).unwrap(), 1e-12).unwrap();
    assert_eq!((p.m, p.sigma2), (1.5, 1.5));
}

#[test]
fn even_odd_variance_against_simulation() {
    let seq = even_odd(2.0);
    let lc = limit_constants(&seq, 1e-10).unwrap();
    assert!((lc.m - 24.0 / 7.0).abs() < 1e-10);
    let t = 500.0;
    let z: Vec<f64> = replicate(&seq, t, 21, 2000, 1e-6)
        .unwrap()
        .iter()
        .map(|s| (s.count as f64 - lc.m * t) / t.sqrt())
        .collect();
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let var = z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = var * (2.0 / (n - 1.0)).sqrt();
    assert!((var - lc.sigma2).abs() < 3.0 * se, "{var} vs {}", lc.sigma2);
}

#[test]
fn mean_count_cases() {
    assert_eq!(mean_count(&classical(), 0.0, 0.01, 1e-10).unwrap().0, 0.0);
    let (poisson, _) = mean_count(&KernelSequence::poisson(1.0).unwrap(), 7.0, 0.01, 1e-10).unwrap();
    assert!((poisson - 7.0).abs() < 1e-12);
    let (n, _) = mean_count(&classical(), 200.0, 0.01, 1e-10).unwrap();
    assert!((n / 200.0 - 2.0).abs() < 0.02);
    // E[N_t] = 2t − 1 + O(e^{−t}) for this kernel; the grid error is O(Δ)
    let (fine, _) = mean_count(&classical(), 200.0, 0.005, 1e-10).unwrap();
    let (coarse, fine) = ((n - 399.0).abs(), (fine - 399.0).abs());
    assert!(coarse < 0.05 && fine < 0.6 * coarse, "{coarse} {fine}");
}

#[test]
fn partition_rates() {
    let r = partition_lln(&even_odd(1.0), &PartitionSpec::even_odd(), 1e-13).unwrap().rates;
    assert!((r[0] - 8.0 / 7.0).abs() < 1e-10 && (r[1] - 4.0 / 7.0).abs() < 1e-10);
    let single = partition_lln(&classical(), &PartitionSpec::single(), 1e-13).unwrap().rates;
    assert_eq!(single.len(), 1);
    assert!((single[0] - 2.0).abs() < 1e-10);
    let split = PartitionSpec::new(2, vec![0], PartitionExtension::Constant(1)).unwrap();
    let r = partition_lln(&classical(), &split, 1e-13).unwrap().rates;
    assert!((r[0] - 1.0).abs() < 1e-12 && (r[1] - 1.0).abs() < 1e-10);
}

#[test]
fn multivariate_solve() {
    let zero = DMatrix::zeros(2, 2);
    assert_eq!(multivariate_check(&[1.0, 3.0], &zero).unwrap(), vec![1.0, 3.0]);
    let phi = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.25, 0.0]);
    let x = multivariate_check(&[1.0, 0.0], &phi).unwrap();
    assert!((x[0] - 8.0 / 7.0).abs() < 1e-12 && (x[1] - 2.0 / 7.0).abs() < 1e-12);
    assert_eq!(multivariate_check(&[0.0, 0.0], &phi).unwrap(), vec![0.0, 0.0]);
    let (nu, phi) = even_odd_bridge(1.0, 0.5, 0.25);
    let x = multivariate_check(&nu, &phi).unwrap();
    assert!((x[0] - 8.0 / 7.0).abs() < 1e-12 && (x[1] - 4.0 / 7.0).abs() < 1e-12);
    let bad = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 1.0, 0.0]);
    assert!(multivariate_check(&[1.0, 0.0], &bad).is_err());
}

#[test]
fn equilibrium_bounds() {
    let poisson = KernelSequence::poisson(1.0).unwrap();
    assert_eq!(equilibrium_bound(&poisson, 3.0, 1.0, 0.01, 1e-10).unwrap().value, 0.0);
    let seq = classical();
    let values: Vec<f64> = [0.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|s| equilibrium_bound(&seq, *s, 1.0, 0.01, 1e-10).unwrap().value)
        .collect();
    assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
    let (freq, mean) = equilibrium_monte_carlo(&seq, 10.0, 1.0, 100.0, 22, 4000, 1e-6).unwrap();
    assert!(freq <= mean && mean <= values[3] + 3.0 * (values[3] / 4000.0).sqrt(), "{freq} {mean} {}", values[3]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partitions_sum_to_m(
        n in prop::collection::vec(0.0f64..0.9, 1..4),
        classes in 1usize..5,
        explicit in prop::collection::vec(0usize..4, 0..6),
        cycle in prop::collection::vec(0usize..4, 1..4),
    ) {
        let kernels = n.iter().map(|v| Kernel::uniform(*v, 1.0).unwrap()).collect();
        let seq = KernelSequence::new(Baseline::constant(1.3).unwrap(), kernels, Extension::Cyclic).unwrap();
        let part = PartitionSpec::new(
            classes,
            explicit.iter().map(|c| c % classes).collect(),
            PartitionExtension::Cyclic(cycle.iter().map(|c| c % classes).collect()),
        ).unwrap();
        let total: f64 = partition_lln(&seq, &part, 1e-13).unwrap().rates.iter().sum();
        let lc = limit_constants(&seq, 1e-13).unwrap();
        prop_assert!((total - lc.m).abs() < 1e-10);
        prop_assert!(lc.sigma2 >= lc.m - 1e-12);
    }
}
