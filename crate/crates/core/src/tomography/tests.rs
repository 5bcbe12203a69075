use super::*;
use crate::cis::{random_cis, CisSet, DimensionProfile, FactorId};
use crate::random::{complex_gaussian, derive_seed, rng_from_seed};
use crate::simulator::{
    generate_dataset, probability, Dataset, ExperimentRecord, ExperimentScheme, OutcomeSequence, PrefixPolicy,
    RecordKind, TupleSelection,
};
use crate::stiefel::random_tangent;
use crate::tensor::{partial_trace, ComplexMatrix, SubsystemShape};
use rand::Rng;

type M = ComplexMatrix<f64>;

fn exhaustive() -> ExperimentScheme {
    ExperimentScheme { selection: TupleSelection::Exhaustive, prefixes: PrefixPolicy::AllLengths }
}

fn profile(ancillas: &[usize], env: usize, refd: usize) -> DimensionProfile {
    DimensionProfile::uniform(ancillas.len() - 1, 2, ancillas, 2, 2, env, 2, refd).unwrap()
}

fn exact(u: usize, v: Vec<usize>, x: Vec<usize>, value: f64) -> ExperimentRecord {
    ExperimentRecord { sequence: OutcomeSequence::new(u, v, x).unwrap(), value, kind: RecordKind::Exact, shots: 0 }
}

/// Random dataset of `n` records with arbitrary target values.
fn random_records(p: &DimensionProfile, n: usize, seed: u64) -> Dataset {
    let mut rng = rng_from_seed(seed);
    let records = (0..n)
        .map(|_| {
            let l = rng.gen_range(1..=p.slots());
            let v: Vec<usize> = (0..l).map(|t| rng.gen_range(0..p.n_instruments(t))).collect();
            let x: Vec<usize> = (0..l).map(|t| rng.gen_range(0..p.n_branches(t, v[t]))).collect();
            exact(rng.gen_range(0..p.n_states()), v, x, rng.gen::<f64>())
        })
        .collect();
    Dataset::new(records, seed, 0)
}

fn factors(cis: &CisSet<f64>) -> Vec<M> {
    cis.factor_matrices().into_iter().cloned().collect()
}

fn loss_at(p: &DimensionProfile, fs: Vec<M>, data: &Dataset) -> f64 {
    loss(&CisSet::from_factors_unchecked(p, fs).unwrap(), data).unwrap().total
}

#[test]
fn self_consistent_data_has_zero_loss() {
    let p = profile(&[1, 2, 2], 2, 2);
    let cis = random_cis::<f64>(&p, 1).unwrap();
    let data = generate_dataset(&cis, &exhaustive(), None, 0).unwrap();
    let report = loss(&cis, &data).unwrap();
    assert!(report.total < 1e-20);
    assert_eq!(report.records, data.len());
    assert_eq!(report.by_length.len(), 2);
}

#[test]
fn single_record_arithmetic() {
    // |+> measured by an instrument that reports outcome 0 with probability 3/4
    let p = DimensionProfile::new(vec![2, 2], vec![2], vec![1, 1], vec![vec![vec![1, 1]]], vec![1]).unwrap();
    let (a, b) = (0.75f64.sqrt(), 0.25f64.sqrt());
    let w0 = M::from_real_rows(&[&[a, 0.0], &[0.0, b]]).unwrap();
    let w1 = M::from_real_rows(&[&[b, 0.0], &[0.0, a]]).unwrap();
    let ins = crate::cis::Instrument::from_branches(&[w0, w1], 2).unwrap();
    let s = M::column(vec![num_complex::Complex64::new(1.0, 0.0), num_complex::Complex64::new(0.0, 0.0)]).unwrap();
    let fs = vec![M::identity(2), ins.stacked().matrix().clone(), s];
    let cis = CisSet::from_factors(&p, fs).unwrap();
    let data = Dataset::new(vec![exact(0, vec![0], vec![0], 1.0)], 0, 0);
    let r = loss(&cis, &data).unwrap();
    assert!((r.total - 0.0625).abs() < 1e-15);
}

#[test]
fn loss_matches_per_record_sum() {
    let p = profile(&[1, 2, 3], 2, 2);
    let model = random_cis::<f64>(&p, 2).unwrap();
    let truth = random_cis::<f64>(&p, 3).unwrap();
    let data = generate_dataset(&truth, &exhaustive(), None, 0).unwrap();
    let report = loss(&model, &data).unwrap();
    let mut by_length = [0.0; 2];
    for r in &data.records {
        let d = r.value - probability(&model, &r.sequence).unwrap();
        by_length[r.sequence.len() - 1] += d * d;
    }
    let oracle: f64 = by_length.iter().sum();
    assert!(report.total > 0.0);
    assert!((report.total - oracle).abs() < 1e-14);
    for (a, b) in report.by_length.iter().zip(by_length) {
        assert!((a - b).abs() < 1e-14);
    }
    assert!((report.by_length.iter().sum::<f64>() - report.total).abs() <= 1e-12 * report.total);
}

#[test]
fn duplicate_records_count_twice() {
    let p = profile(&[1, 2, 2], 1, 1);
    let cis = random_cis::<f64>(&p, 2).unwrap();
    let one = Dataset::new(vec![exact(0, vec![1, 0], vec![1, 1], 0.3)], 0, 0);
    let two = Dataset::new(vec![exact(0, vec![1, 0], vec![1, 1], 0.3); 2], 0, 0);
    let (a, b) = (loss(&cis, &one).unwrap().total, loss(&cis, &two).unwrap().total);
    assert!((2.0 * a - b).abs() < 1e-15);
    let (ga, gb) = (euclidean_gradient(&cis, &one).unwrap(), euclidean_gradient(&cis, &two).unwrap());
    for (x, y) in ga.factors.iter().zip(&gb.factors) {
        assert!(x.scale(2.0).max_abs_diff(y) < 1e-14);
    }
}

#[test]
fn stationary_at_zero_loss() {
    for anc in [[1, 2, 2], [1, 2, 3]] {
        let p = profile(&anc, 2, 2);
        let cis = random_cis::<f64>(&p, 4).unwrap();
        let data = generate_dataset(&cis, &exhaustive(), None, 0).unwrap();
        assert!(euclidean_gradient(&cis, &data).unwrap().max_abs() < 1e-10);
    }
}

fn fd_check(p: &DimensionProfile, seed: u64, directions: usize) {
    let cis = random_cis::<f64>(p, seed).unwrap();
    let data = random_records(p, 50, seed + 100);
    let grads = euclidean_gradient(&cis, &data).unwrap();
    let base = factors(&cis);
    let h = 1e-6;
    let mut rng = rng_from_seed(seed);
    for (k, g) in grads.factors.iter().enumerate() {
        for _ in 0..directions {
            let dir: M = complex_gaussian(base[k].rows(), base[k].cols(), &mut rng);
            let mut plus = base.clone();
            plus[k].axpy(h, &dir);
            let mut minus = base.clone();
            minus[k].axpy(-h, &dir);
            let fd = (loss_at(p, plus, &data) - loss_at(p, minus, &data)) / (2.0 * h);
            let analytic = g.real_inner(&dir);
            let rel = (fd - analytic).abs() / analytic.abs().max(1e-3);
            assert!(rel < 1e-6, "factor {k}: fd {fd} analytic {analytic}");
        }
    }
}

#[test]
fn gradient_matches_finite_differences_two_slots() {
    fd_check(&profile(&[1, 2, 2], 2, 2), 5, 3);
    fd_check(&profile(&[1, 2, 3], 1, 1), 6, 3);
}

#[test]
fn gradient_matches_finite_differences_one_slot() {
    fd_check(&profile(&[1, 2], 2, 2), 7, 20);
    fd_check(&profile(&[1, 1], 1, 1), 8, 20);
}

#[test]
fn untouched_factors_have_zero_gradient() {
    let p = profile(&[1, 2, 2], 1, 1);
    let cis = random_cis::<f64>(&p, 9).unwrap();
    let data = Dataset::new(vec![exact(1, vec![1], vec![0], 0.2)], 0, 0);
    let g = euclidean_gradient(&cis, &data).unwrap();
    for id in [FactorId::Comb(1), FactorId::Instrument { slot: 0, index: 0 }, FactorId::State(0)] {
        assert_eq!(g.get(&p, id).max_abs(), 0.0);
    }
    assert!(g.get(&p, FactorId::Instrument { slot: 0, index: 1 }).max_abs() > 0.0);
}

/// Closed form `4 p⁽ᵗ⁻¹⁾ (p⁽ᵗ⁻¹⁾ Tr[M η M†] − p̃) M η` for a projective
/// branch `M` acting on the normalized pre-measurement system state `η`.
fn closed_form(prev: f64, m: &M, eta: &M, target: f64) -> M {
    let inner = m.matmul(eta).unwrap().mul_adjoint(m).unwrap().trace().re;
    m.matmul(eta).unwrap().scale(4.0 * prev * (prev * inner - target))
}

fn system_state(cis: &CisSet<f64>, eta: &M, t: usize) -> M {
    let v = cis.comb().isometry(t).matrix();
    let xi = v.matmul(eta).unwrap().mul_adjoint(v).unwrap();
    let da = cis.profile().d_anc()[t + 1];
    partial_trace(&xi, &SubsystemShape::new(vec![2, da]).unwrap(), 1).unwrap()
}

#[test]
fn measurement_gradient_matches_closed_form_first_slot() {
    let spec = crate::simulator::ExperimentSpec {
        slots: 1,
        ancillas: vec![1, 2],
        instruments_per_slot: 3,
        n_states: 1,
        ref_dim: 1,
        seed: 3,
    };
    let model = crate::simulator::synthetic_model::<f64>(&spec, &crate::simulator::PerturbationSpec::none()).unwrap();
    let cis = model.truth;
    let p = cis.profile().clone();
    for (v, x) in [(0, 0), (1, 1), (2, 0)] {
        let target = 0.37;
        let data = Dataset::new(vec![exact(0, vec![v], vec![x], target)], 0, 0);
        let g = euclidean_gradient(&cis, &data).unwrap();
        let block = g.get(&p, FactorId::Instrument { slot: 0, index: v });
        let ins = cis.instrument(0, v).unwrap();
        let eta = system_state(&cis, &crate::cis::state_density(cis.state(0).unwrap()), 0);
        let expect = closed_form(1.0, &ins.branch(x), &eta, target);
        let got = block.block(ins.row_offset(x), 0, 2, 2).unwrap();
        assert!(got.max_abs_diff(&expect) < 1e-10);
    }
}

#[test]
fn measurement_gradient_matches_closed_form_second_slot() {
    let spec = crate::simulator::ExperimentSpec {
        slots: 2,
        ancillas: vec![1, 2, 2],
        instruments_per_slot: 3,
        n_states: 1,
        ref_dim: 1,
        seed: 4,
    };
    let cis = crate::simulator::synthetic_model::<f64>(&spec, &crate::simulator::PerturbationSpec::none()).unwrap().truth;
    let p = cis.profile().clone();
    let (v0, x0, v1, x1, target) = (1, 0, 2, 1, 0.21);
    let data = Dataset::new(vec![exact(0, vec![v0, v1], vec![x0, x1], target)], 0, 0);
    let g = euclidean_gradient(&cis, &data).unwrap();
    // unnormalized state on (i_1, a_1) after the first outcome
    let rho = crate::cis::state_density(cis.state(0).unwrap());
    let first = crate::simulator::IntermediateState::initial(rho).unwrap();
    let after = crate::simulator::step_comb(&first, cis.comb().isometry(0).matrix(), 2).unwrap();
    let w0 = cis.instrument(0, v0).unwrap().branch(x0);
    let eta1 = crate::simulator::step_instrument(&after, &w0, 2).unwrap();
    let prev = eta1.trace();
    let v = cis.comb().isometry(1).matrix();
    let xi = v.matmul(&eta1.matrix().scale(1.0 / prev)).unwrap().mul_adjoint(v).unwrap();
    let xi_sys = partial_trace(&xi, &SubsystemShape::new(vec![2, 2]).unwrap(), 1).unwrap();
    let ins = cis.instrument(1, v1).unwrap();
    let expect = closed_form(prev, &ins.branch(x1), &xi_sys, target);
    let got = g.get(&p, FactorId::Instrument { slot: 1, index: v1 }).block(ins.row_offset(x1), 0, 2, 2).unwrap();
    assert!(got.max_abs_diff(&expect) < 1e-10);
}

#[test]
fn profile_mismatch_is_rejected() {
    let p = profile(&[1, 2, 2], 1, 1);
    let q = profile(&[1, 2, 3], 1, 1);
    let data = random_records(&p, 5, 1);
    let obj = Objective::new(&p, &data).unwrap();
    assert!(obj.evaluate(&random_cis::<f64>(&q, 1).unwrap()).is_err());
    let bad = Dataset::new(vec![exact(5, vec![0], vec![0], 0.5)], 0, 0);
    assert!(matches!(Objective::new(&p, &bad), Err(crate::Error::Lookup(_))));
}

#[test]
fn non_finite_model_is_a_numeric_error() {
    let p = profile(&[1, 2, 2], 1, 1);
    let cis = random_cis::<f64>(&p, 1).unwrap();
    let mut fs = factors(&cis);
    fs[0][(0, 0)] = num_complex::Complex64::new(f64::NAN, 0.0);
    let bad = CisSet::from_factors_unchecked(&p, fs).unwrap();
    let data = random_records(&p, 10, 2);
    let err = Objective::new(&p, &data).unwrap().evaluate(&bad).unwrap_err();
    assert!(matches!(err, crate::Error::Numeric(ref m) if m.contains("state")), "{err}");
}

#[test]
fn init_strategies() {
    let p = profile(&[1, 2, 2], 1, 1);
    let a = init_strategy::<f64>(&p, &InitStrategy::Random { seed: 3 }).unwrap();
    assert_eq!(a, init_strategy::<f64>(&p, &InitStrategy::Random { seed: 3 }).unwrap());
    assert_eq!(a.shapes(), p.factor_shapes());
    let truth = random_cis::<f64>(&p, 4).unwrap();
    let same = init_strategy(&p, &InitStrategy::TruthPerturbed { truth: truth.clone(), angle: 0.0, seed: 1 }).unwrap();
    assert_eq!(same, truth.to_product_point());
    let moved = init_strategy(&p, &InitStrategy::TruthPerturbed { truth: truth.clone(), angle: 0.05, seed: 1 }).unwrap();
    assert!(moved.max_orthonormality_residual() < 1e-12);
    for (x, y) in moved.factors().iter().zip(truth.to_product_point().factors()) {
        let d = (x.matrix() - y.matrix()).frobenius_norm();
        assert!(d > 0.02 && d < 0.15, "{d}");
    }
    let q = profile(&[1, 2, 3], 1, 1);
    assert!(matches!(init_strategy(&q, &InitStrategy::FromPrior(truth.clone())), Err(crate::Error::Argument(_))));
    let prior = init_strategy(&p, &InitStrategy::FromPrior(truth.clone())).unwrap();
    let back = CisSet::from_product_point(&p, prior).unwrap();
    assert!(crate::cis::check_causality(back.comb()).unwrap().max() < 1e-10);
    let bad_angle = InitStrategy::TruthPerturbed { truth, angle: f64::NAN, seed: 0 };
    assert!(init_strategy(&p, &bad_angle).is_err());
}

#[test]
fn truth_init_converges_immediately() {
    let p = profile(&[1, 2, 2], 1, 1);
    let truth = random_cis::<f64>(&p, 4).unwrap();
    let data = generate_dataset(&truth, &exhaustive(), None, 0).unwrap();
    let r = reconstruct(&data, &p, &InitStrategy::FromPrior(truth), &OptimizerConfig::default()).unwrap();
    assert_eq!(r.termination, Termination::Converged);
    assert_eq!(r.loss_trace.len(), 1);
    assert_eq!(r.iterations, 0);
    assert!(r.final_loss() < 1e-16);
}

#[test]
fn optimizer_config_validation() {
    let mut cfg = OptimizerConfig::default();
    cfg.validate().unwrap();
    cfg.max_iterations = 0;
    assert!(cfg.validate().is_err());
    let cfg = OptimizerConfig { gradient_tolerance: 0.0, ..OptimizerConfig::default() };
    assert!(cfg.validate().is_err());
    let cfg = OptimizerConfig { loss_tolerance: Some(-1.0), ..OptimizerConfig::default() };
    assert!(cfg.validate().is_err());
}

#[test]
fn iqct_keeps_instruments_and_states_frozen() {
    let p = profile(&[1, 2, 2], 1, 1);
    let truth = random_cis::<f64>(&p, 4).unwrap();
    let nominal = random_cis::<f64>(&p, 5).unwrap();
    let data = generate_dataset(&truth, &exhaustive(), None, 0).unwrap();
    let cfg = OptimizerConfig { max_iterations: 50, ..OptimizerConfig::default() };
    let r = iqct_baseline(&data, &p, &nominal, &cfg).unwrap();
    assert_eq!(r.iterations, 50);
    assert_eq!(r.termination, Termination::MaxIterations);
    assert_eq!(r.cis.instruments(), nominal.instruments());
    assert_eq!(r.cis.states(), nominal.states());
    assert_ne!(r.cis.comb(), nominal.comb());
    assert_eq!(r.loss_trace.len(), 51);
}

#[test]
fn riemannian_norm_ignores_inactive_and_normal_parts() {
    let p = profile(&[1, 2], 1, 1);
    let cis = random_cis::<f64>(&p, 1).unwrap();
    let point = cis.to_product_point();
    // gradients along X itself are normal to the manifold
    let normal: Vec<M> = point.factors().iter().map(|f| f.matrix().clone()).collect();
    assert!(riemannian_norm(&point, &normal, &vec![true; point.len()]).unwrap() < 1e-12);
    let tangent: Vec<M> =
        point.factors().iter().enumerate().map(|(k, f)| random_tangent(f, derive_seed(99, k as u64)).unwrap()).collect();
    let all = riemannian_norm(&point, &tangent, &vec![true; point.len()]).unwrap();
    assert!((all - (point.len() as f64).sqrt()).abs() < 1e-12);
    let mut mask = vec![false; point.len()];
    mask[0] = true;
    assert!((riemannian_norm(&point, &tangent, &mask).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn benchmark_table_shape() {
    let profiles = vec![profile(&[1, 1], 1, 1), profile(&[1, 2], 1, 1)];
    assert!(benchmark_iteration(&profiles, &exhaustive(), 0, 1).unwrap().is_empty());
    let rows = benchmark_iteration(&profiles, &exhaustive(), 3, 1).unwrap();
    assert_eq!(rows.len(), 6);
    let means = mean_times(&rows);
    assert_eq!(means.iter().map(|m| m.0.as_str()).collect::<Vec<_>>(), vec!["1-1", "1-2"]);
    assert!(means.iter().all(|m| m.1 >= 0.0));
}
