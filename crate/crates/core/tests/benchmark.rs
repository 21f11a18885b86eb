use nalgebra::{DMatrix, DVector};
use plci::baselines::{fit_mle, MethodKind, OptimizerConfig};
use plci::benchmark::*;
use plci::model::{central_gradient, DiffConfig, LogLikelihood};
use plci::quadmodel::is_negative_semidefinite;
use plci::rvm::{EndpointStatus, Side};
use plci::stats::{logistic, softplus, softplus_inverse};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Row-by-row log-likelihood with no merging of identical rows.
fn naive_log_likelihood(data: &Dataset, family: Family, theta: &[f64]) -> f64 {
    let k = family.covariates();
    let (alpha, beta): (Vec<f64>, &[f64]) = if family.free_powers() {
        (theta[..k].iter().map(|&a| (1.0 + a.exp()).ln()).collect(), &theta[k..])
    } else {
        (vec![1.0; k], theta)
    };
    (0..data.len())
        .map(|i| {
            let eta = beta[0] + (0..k).map(|j| beta[j + 1] * data.covariates[(i, j)].powf(alpha[j])).sum::<f64>();
            let p = 1.0 / (1.0 + (-eta).exp());
            if data.responses[i] == 1.0 {
                p.ln()
            } else {
                (1.0 - p).ln()
            }
        })
        .sum()
}

#[test]
fn negative_binomial_from_moments() {
    let (r, p) = BenchmarkSpec::default().negative_binomial();
    assert!((r - 5.0).abs() < 1e-12 && (p - 0.5).abs() < 1e-12);
}

#[test]
fn covariate_moments() {
    let spec = BenchmarkSpec::new(Family::Transformed11, 10_000, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let c = simulate_covariates(&spec, &mut rng).unwrap();
    let mean = |j: usize| c.column(j).mean();
    assert!((mean(0) - 5.0).abs() <= 0.2, "{}", mean(0));
    assert!((mean(1) - 1.0).abs() <= 0.1, "{}", mean(1));
    let var0 = c.column(0).variance();
    assert!((var0 - 10.0).abs() <= 1.0, "{var0}");
    assert!(c.iter().all(|&v| v > 0.0));
    // the perturbation is the only non-integer part
    assert!(c.iter().all(|&v| ((v - 1e-6) - (v - 1e-6).round()).abs() < 1e-9));
    // binomial children never exceed their parent count
    assert!((0..c.nrows()).all(|i| c[(i, 1)] <= c[(i, 0)]));
}

/// E[logistic(β₀ + β₁c^α)] for c ~ NB(5, 0.5), summed over the mass function.
fn expected_frequency(alpha: f64, b0: f64, b1: f64) -> f64 {
    let mut pmf = 0.5f64.powi(5);
    let mut total = 0.0;
    for k in 0..400u32 {
        let c = k as f64 + 1e-6;
        total += pmf * logistic(b0 + b1 * c.powf(alpha));
        pmf *= (k + 5) as f64 / (k + 1) as f64 * 0.5;
    }
    total
}

#[test]
fn responses_are_balanced_for_the_three_parameter_table() {
    let data = simulate(&BenchmarkSpec::new(Family::Transformed3, 10_000, 5), 0).unwrap();
    let freq = data.responses.iter().sum::<f64>() / data.len() as f64;
    let expected = expected_frequency(0.5, -10.0, 5.0);
    assert!((expected - 0.5601).abs() < 1e-3, "{expected}");
    // 4 standard errors
    assert!((freq - expected).abs() <= 4.0 * (0.25f64 / 1e4).sqrt(), "{freq} vs {expected}");
    assert!((freq - 0.5).abs() <= 0.1, "{freq}");
    assert!(data.responses.iter().all(|&x| x == 0.0 || x == 1.0));
}

#[test]
fn logistic_examples() {
    assert_eq!(logistic(0.0), 0.5);
    assert!((logistic(-10.0) - 4.539_786_870_243_439e-5).abs() < 1e-15);
}

#[test]
fn zero_coefficients_give_half_probability() {
    let data = simulate(&BenchmarkSpec::new(Family::Glm11, 300, 1), 0).unwrap();
    let m = LogisticModel::for_family(&data, Family::Glm11);
    let v = m.value(&[0.0; 11]);
    assert!((v + 300.0 * 2f64.ln()).abs() < 1e-9);
}

#[test]
fn single_row_value() {
    let data = Dataset {
        covariates: DMatrix::from_element(1, 1, 1.0),
        responses: vec![1.0],
    };
    let m = LogisticModel::new(&data, true);
    for a in [-3.0, 0.0, 2.0] {
        assert!((m.value(&[a, 0.0, 0.0]) + 2f64.ln()).abs() < 1e-15);
    }
}

#[test]
fn merged_rows_match_the_naive_sum() {
    for family in Family::ALL {
        let data = simulate(&BenchmarkSpec::new(family, 400, 9), 2).unwrap();
        let m = LogisticModel::for_family(&data, family);
        assert!(m.patterns() <= data.len());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let truth = family.truth().theta(family);
        for _ in 0..5 {
            let theta: Vec<f64> = truth.iter().map(|t| t + rng.random_range(-0.3..0.3)).collect();
            let a = m.value(&theta);
            let b = naive_log_likelihood(&data, family, &theta);
            assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{family}: {a} vs {b}");
        }
    }
}

#[test]
fn analytic_derivatives_match_central_differences() {
    let diff = DiffConfig::default();
    for family in Family::ALL {
        let data = simulate(&BenchmarkSpec::new(family, 200, 4), 0).unwrap();
        let m = LogisticModel::for_family(&data, family);
        let truth = family.truth().theta(family);
        let mut rng = ChaCha8Rng::seed_from_u64(family as u64);
        for _ in 0..20 {
            let theta: Vec<f64> = truth.iter().map(|t| t + rng.random_range(-0.5..0.5)).collect();
            let g = m.gradient(&theta).unwrap();
            let (g_fd, _) = central_gradient(|t| m.value(t), &theta, &diff).unwrap();
            let rel = (&g - &g_fd).amax() / g.amax().max(1.0);
            assert!(rel < 1e-5, "{family} gradient {rel}");
            let h = m.hessian(&theta).unwrap();
            let n = theta.len();
            let mut h_fd = DMatrix::zeros(n, n);
            for j in 0..n {
                let (col, _) = central_gradient(|t| m.gradient(t).unwrap()[j], &theta, &diff).unwrap();
                h_fd.set_row(j, &col.transpose());
            }
            let rel = (&h - &h_fd).amax() / h.amax().max(1.0);
            assert!(rel < 1e-4, "{family} hessian {rel}");
            assert_eq!(h, h.transpose());
        }
    }
}

#[test]
fn hessian_at_the_mle_is_negative_semidefinite() {
    let data = simulate(&BenchmarkSpec::new(Family::Transformed3, 10_000, 2), 0).unwrap();
    let m = LogisticModel::for_family(&data, Family::Transformed3);
    let start = Family::Transformed3.truth().theta(Family::Transformed3);
    let fit = fit_mle(&m, &start, &OptimizerConfig::default(), &DiffConfig::default()).unwrap();
    assert!(fit.converged);
    assert!(fit.gradient_norm <= 1e-5, "{}", fit.gradient_norm);
    assert!(is_negative_semidefinite(&m.hessian(fit.theta.as_slice()).unwrap(), 1e-8));
}

#[test]
fn simulation_is_reproducible() {
    let spec = BenchmarkSpec::new(Family::Transformed11, 500, 42);
    assert_eq!(simulate(&spec, 3).unwrap(), simulate(&spec, 3).unwrap());
    assert_ne!(simulate(&spec, 3).unwrap(), simulate(&spec, 4).unwrap());
    assert_eq!(replicate_seed(42, 3), splitmix64(45));
}

#[test]
fn family_layouts() {
    assert_eq!(Family::Transformed3.dim(), 3);
    assert_eq!(Family::Transformed11.dim(), 11);
    assert_eq!(Family::Glm11.dim(), 11);
    let t = Family::Glm11.truth().theta(Family::Glm11);
    assert_eq!(t, Family::Glm11.truth().beta);
    let t = Family::Transformed3.truth().theta(Family::Transformed3);
    assert!((softplus(t[0]) - 0.5).abs() < 1e-15);
    assert_eq!(&t[1..], &[-10.0, 5.0]);
    assert_eq!(Family::Transformed11.parameter_name(5), "beta0");
    assert_eq!(Family::Transformed11.parameter_name(0), "alpha1");
    assert_eq!(Family::Glm11.parameter_name(3), "beta3");
    assert!(!Family::Glm11.is_power(0));
    assert_eq!("GLM11".parse::<Family>().unwrap(), Family::Glm11);
    assert!(BenchmarkSpec { nb_var: 4.0, ..Default::default() }.validate().is_err());
}

#[test]
fn dataset_dump() {
    let data = simulate(&BenchmarkSpec::new(Family::Transformed11, 3, 0), 0).unwrap();
    let csv = data.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "x,c1,c2,c3,c4,c5");
    assert_eq!(lines.count(), 3);
}

#[test]
fn consensus_examples() {
    assert_eq!(consensus_truth(Side::Upper, 0.0, &[1.9, 1.96, 1.95]), Some(Truth::Finite(1.96)));
    assert_eq!(consensus_truth(Side::Lower, 0.0, &[-1.9, -1.96]), Some(Truth::Finite(-1.96)));
    assert_eq!(consensus_truth(Side::Upper, 0.0, &[1500.0, 2.0]), Some(Truth::Unbounded));
    assert_eq!(consensus_truth(Side::Upper, 0.0, &[0.7]), Some(Truth::Finite(0.7)));
    assert_eq!(consensus_truth(Side::Upper, 0.0, &[]), None);
    // 1000 away from the centre counts even inside [-1000, 1000]
    assert_eq!(consensus_truth(Side::Lower, 5.0, &[-995.0]), Some(Truth::Unbounded));
}

#[test]
fn scoring_examples() {
    use EndpointStatus::*;
    let s = |status, e, t| score_run(status, Side::Upper, 0.0, e, e, Truth::Finite(t));
    assert!(s(Converged, 2.09, 2.0).success);
    assert!(!s(Converged, 2.11, 2.0).success);
    assert!(s(Converged, 0.0012, 0.0005).success);
    assert!(!s(IterationLimit, 2.0, 2.0).success);
    assert!((s(Converged, 2.09, 2.0).error - 0.09).abs() < 1e-12);

    let u = |status, e| score_run(status, Side::Upper, 0.0, e, e, Truth::Unbounded).success;
    assert!(u(Inestimable, f64::INFINITY));
    assert!(u(Converged, 1200.0));
    assert!(!u(Converged, 20.0));
    assert!(!u(Failed, f64::INFINITY));
}

#[test]
fn scoring_is_symmetric_in_sign() {
    for (e, t) in [(2.05, 2.0), (3.0, 2.0), (0.0004, -0.0003)] {
        let up = score_run(EndpointStatus::Converged, Side::Upper, 0.0, e, e, Truth::Finite(t));
        let lo = score_run(EndpointStatus::Converged, Side::Lower, 0.0, -e, -e, Truth::Finite(-t));
        assert_eq!(up.success, lo.success);
        assert_eq!(up.error, lo.error);
    }
}

fn small_config(methods: Vec<MethodKind>, jobs: Option<usize>) -> BenchmarkConfig {
    BenchmarkConfig {
        spec: BenchmarkSpec::new(Family::Transformed3, 1000, 7),
        sizes: vec![1000],
        replicates: 5,
        methods,
        jobs,
        ..Default::default()
    }
}

#[test]
fn run_rows_and_csv_round_trip() {
    let cfg = small_config(vec![MethodKind::Rvm, MethodKind::Wald], Some(1));
    let out = run_benchmark(&cfg).unwrap();
    let rows: Vec<ScenarioResult> = out.iter().flat_map(|o| o.rows.clone()).collect();
    let kept = out.iter().filter(|o| o.mle_converged).count();
    assert_eq!(rows.len(), kept * 3 * 2 * 2);
    assert!(rows.iter().all(|r| !r.success || r.status != EndpointStatus::Failed));

    let text = write_runs(&rows);
    assert!(text.starts_with(RUNS_HEADER));
    let parsed = parse_runs(&text).unwrap();
    assert_eq!(write_runs(&parsed), text);
    assert_eq!(write_report(&aggregate(&parsed)), write_report(&aggregate(&rows)));
}

#[test]
fn parallel_and_sequential_agree() {
    let methods = vec![MethodKind::Rvm, MethodKind::Bisection];
    let a = run_benchmark(&small_config(methods.clone(), Some(1))).unwrap();
    let b = run_benchmark(&small_config(methods, None)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn report_is_associative_over_files() {
    let cfg = BenchmarkConfig {
        replicates: 4,
        ..small_config(vec![MethodKind::Rvm, MethodKind::Vm], Some(1))
    };
    let rows: Vec<ScenarioResult> = run_benchmark(&cfg).unwrap().into_iter().flat_map(|o| o.rows).collect();
    let (first, second) = rows.split_at(rows.len() / 2);
    let joined = format!("{}{}", write_runs(first), write_runs(second).split_once('\n').unwrap().1);
    let parsed = parse_runs(&joined).unwrap();
    assert_eq!(write_report(&aggregate(&parsed)), write_report(&aggregate(&rows)));
}

#[test]
fn report_edge_cases() {
    let row = |method, success, status, error, evals| ScenarioResult {
        method,
        family: Family::Transformed3,
        n: 10,
        replicate: 0,
        param: 0,
        side: Side::Upper,
        endpoint: 1.0,
        truth: Some(Truth::Finite(1.0)),
        success,
        status,
        n_evals: evals,
        error,
    };
    let rows = vec![
        row(MethodKind::Vm, false, EndpointStatus::Failed, f64::NAN, 5),
        row(MethodKind::Rvm, true, EndpointStatus::Converged, 0.0, 10),
        row(MethodKind::Rvm, false, EndpointStatus::Converged, 20.0, 30),
        ScenarioResult {
            truth: Some(Truth::Unbounded),
            endpoint: f64::INFINITY,
            error: f64::NAN,
            ..row(MethodKind::Rvm, true, EndpointStatus::Inestimable, f64::NAN, 50)
        },
        ScenarioResult {
            truth: None,
            ..row(MethodKind::Rvm, false, EndpointStatus::Converged, f64::NAN, 1)
        },
    ];
    let report = aggregate(&rows);
    let vm = report.iter().find(|r| r.method == MethodKind::Vm).unwrap();
    assert_eq!(vm.success_rate, 0.0);
    assert_eq!(vm.mean_evals, None);
    let rvm = report.iter().find(|r| r.method == MethodKind::Rvm).unwrap();
    assert!((rvm.success_rate - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(rvm.mean_error, Some(10.0));
    assert_eq!(rvm.mean_error_sub10, Some(0.0));
    assert_eq!(rvm.frac_error_gt10, Some(0.5));
    assert_eq!(rvm.mean_evals, Some(30.0));
    let text = write_report(&report);
    assert!(text.lines().any(|l| l == "vm,transformed3,10,0,,,,"), "{text}");

    let runs = write_runs(&rows);
    assert!(runs.contains(",inf,inf,true,inestimable,"));
    assert_eq!(parse_runs(&runs).unwrap().len(), rows.len());
}

#[test]
fn parse_errors_carry_line_numbers() {
    let bad = format!("{RUNS_HEADER}\nrvm,transformed3,10,0,0,upper,1,1,true,converged,5,0\nrvm,transformed3,ten,0,0,upper,1,1,true,converged,5,0\n");
    match parse_runs(&bad) {
        Err(plci::Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    assert!(matches!(parse_runs("a,b\n"), Err(plci::Error::Parse { line: 1, .. })));
}

#[test]
fn config_validation() {
    let mut cfg = small_config(vec![], None);
    assert!(run_benchmark(&cfg).is_err());
    cfg.methods = vec![MethodKind::Rvm];
    cfg.parameters = Some(vec![3]);
    assert!(run_benchmark(&cfg).is_err());
    cfg.parameters = None;
    cfg.replicates = 0;
    assert!(run_benchmark(&cfg).is_err());
}

proptest! {
    #[test]
    fn softplus_round_trip(alpha in 0.01..20.0f64) {
        let back = softplus(softplus_inverse(alpha));
        prop_assert!((back - alpha).abs() <= 1e-12 * alpha.max(1.0));
    }

    #[test]
    fn natural_scale_is_monotone(a in -30.0..30.0f64, b in -30.0..30.0f64) {
        let f = Family::Transformed3;
        prop_assume!(a < b);
        prop_assert!(f.natural_scale(0, a) <= f.natural_scale(0, b));
        prop_assert_eq!(f.natural_scale(1, a), a);
    }
}

#[test]
fn gradient_is_zero_vector_type() {
    let data = simulate(&BenchmarkSpec::new(Family::Transformed3, 50, 0), 0).unwrap();
    let m = LogisticModel::for_family(&data, Family::Transformed3);
    let g: DVector<f64> = m.gradient(&[0.0, 0.0, 0.0]).unwrap();
    assert_eq!(g.len(), 3);
}
