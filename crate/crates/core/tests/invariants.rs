use num_complex::Complex64;
use proptest::prelude::*;

use qentropy::channels::{adjoint_channel, apply_channel, classify, ChoiMatrix};
use qentropy::entropy::{h_max, h_min, h_min_problem, p_guess, q_corr, q_decpl_direct};
use qentropy::linalg::{kron, max_abs_entry, partial_trace, CMatrix, HermitianOperator, Subsystem};
use qentropy::sdp::{check_certificate, solve};
use qentropy::state::{
    cq_to_density, ginibre, purify, random_bipartite_from, random_density, random_density_from, reduced_state,
    root_fidelity, seeded_rng, CqEnsemble,
};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn partial_trace_is_adjoint_to_tensoring(seed in any::<u64>(), da in 1usize..4, db in 1usize..4) {
        let mut rng = seeded_rng(seed);
        let m = HermitianOperator::hermitian_part(ginibre(&mut rng, da * db, da * db));
        let x = HermitianOperator::hermitian_part(ginibre(&mut rng, da, da));
        let lifted = kron(x.matrix(), &CMatrix::identity(db, db));
        let lhs = (lifted * m.matrix()).trace();
        let rhs = (x.matrix() * partial_trace(&m, da, db, Subsystem::A).unwrap().matrix()).trace();
        prop_assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn fidelity_is_symmetric(seed in any::<u64>(), d in 2usize..5) {
        let a = random_density(d, seed);
        let b = random_density(d, seed.wrapping_add(1));
        let f = root_fidelity(&a, &b).unwrap();
        prop_assert!((f - root_fidelity(&b, &a).unwrap()).abs() < 1e-10);
        prop_assert!((root_fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-10);
        prop_assert!(f < 1.0 - 1e-9);
    }

    #[test]
    fn purification_traces_back(seed in any::<u64>(), d in 1usize..6) {
        let rho = random_density(d, seed);
        let p = purify(&rho).unwrap();
        let back = reduced_state(&p.state, &[d, p.ancilla_dim], &[true, false]).unwrap();
        prop_assert!(back.op().max_abs_diff(rho.op()) < 1e-10);
    }

    #[test]
    fn cq_states_are_classical_on_x(seed in any::<u64>(), nx in 1usize..4, db in 1usize..4) {
        let mut rng = seeded_rng(seed);
        let states = (0..nx).map(|_| random_density_from(&mut rng, db)).collect();
        let e = CqEnsemble::new(vec![1.0 / nx as f64; nx], states).unwrap();
        let rho = cq_to_density(&e);
        let label = CMatrix::from_fn(nx, nx, |i, j| Complex64::new(if i == j { i as f64 } else { 0.0 }, 0.0));
        let x = kron(&label, &CMatrix::identity(db, db));
        let comm = &x * rho.op().matrix() - rho.op().matrix() * &x;
        prop_assert!(max_abs_entry(&comm) < 1e-12);
    }

    #[test]
    fn adjoint_exchanges_cptp_and_unital(seed in any::<u64>(), di in 1usize..4, d in 1usize..4, env in 1usize..4) {
        let j = ChoiMatrix::random_cptp(&mut seeded_rng(seed), di, d, env);
        let c = classify(&j).unwrap();
        prop_assert!(c.cp && c.trace_preserving);
        let a = classify(&adjoint_channel(&j)).unwrap();
        prop_assert!(a.cp && a.unital);
    }

    #[test]
    fn adjoint_identity_holds(seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let j = ChoiMatrix::random_cptp(&mut rng, 2, 3, 2);
        let adj = adjoint_channel(&j);
        let x = HermitianOperator::hermitian_part(ginibre(&mut rng, 2, 2));
        let y = HermitianOperator::hermitian_part(ginibre(&mut rng, 3, 3));
        let lhs = y.inner(&apply_channel(&j, &x).unwrap());
        let rhs = apply_channel(&adj, &y).unwrap().inner(&x);
        prop_assert!((lhs - rhs).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn solver_weak_duality_and_scale_covariance(seed in any::<u64>(), alpha in 0.1f64..10.0) {
        let s = random_bipartite_from(&mut seeded_rng(seed), 2, 2);
        let p = h_min_problem(s.op(), 2, 2).unwrap();
        let sol = solve(&p).unwrap();
        let cert = check_certificate(&p, &sol).unwrap();
        prop_assert!(!cert.weak_duality_violated);
        let scaled = h_min_problem(&s.op().scale(alpha), 2, 2).unwrap();
        let sol2 = solve(&scaled).unwrap();
        prop_assert!((sol2.primal_value - alpha * sol.primal_value).abs() <= 1e-7 * (alpha * sol.primal_value).abs());
        let again = solve(&p).unwrap();
        prop_assert_eq!(again.primal_value.to_bits(), sol.primal_value.to_bits());
        prop_assert_eq!(&again.y, &sol.y);
    }

    #[test]
    fn entropy_range_bounds(seed in any::<u64>(), da in 2usize..4, db in 2usize..4) {
        let s = random_bipartite_from(&mut seeded_rng(seed), da, db);
        let hmin = h_min(&s).unwrap().value_bits;
        let hmax = h_max(&s).unwrap().value_bits;
        let lo = -(da.min(db) as f64).log2();
        let hi = (da as f64).log2();
        prop_assert!(hmin >= lo - 1e-7 && hmin <= hi + 1e-7);
        prop_assert!(hmax <= hi + 1e-7);
        prop_assert!(hmin <= hmax + 1e-7);
    }

    #[test]
    fn max_entropy_matches_decoupling(seed in any::<u64>(), da in 2usize..4, db in 2usize..4) {
        let s = random_bipartite_from(&mut seeded_rng(seed), da, db);
        let hmax = h_max(&s).unwrap().value_bits;
        let q = q_decpl_direct(&s).unwrap().value;
        prop_assert!((hmax - q.log2()).abs() < 1e-6);
    }

    #[test]
    fn singlet_fraction_dominates_every_channel(seed in any::<u64>(), db in 2usize..4) {
        let mut rng = seeded_rng(seed);
        let s = random_bipartite_from(&mut rng, 2, db);
        let q = q_corr(&s).unwrap().value;
        for env in 1..4 {
            let f = ChoiMatrix::random_cptp(&mut rng, db, 2, env);
            let out = f.apply_on_second(s.op(), 2).unwrap();
            let overlap: f64 = (0..2)
                .flat_map(|a| (0..2).map(move |b| (a, b)))
                .map(|(a, b)| out.matrix()[(a * 2 + a, b * 2 + b)].re)
                .sum();
            prop_assert!(overlap <= q + 1e-9);
        }
    }

    #[test]
    fn guessing_povm_is_valid(seed in any::<u64>(), nx in 2usize..5, db in 2usize..4) {
        let mut rng = seeded_rng(seed);
        let states = (0..nx).map(|_| random_density_from(&mut rng, db)).collect();
        let e = CqEnsemble::new(vec![1.0 / nx as f64; nx], states).unwrap();
        let g = p_guess(&e).unwrap();
        let total = g.povm.iter().fold(HermitianOperator::zeros(db), |acc, x| acc.add(x));
        prop_assert!(total.max_abs_diff(&HermitianOperator::identity(db)) < 1e-8);
        for x in &g.povm {
            prop_assert!(x.eig().unwrap().min() >= -1e-8);
        }
        let hmin = h_min(&cq_to_density(&e)).unwrap().value_bits;
        prop_assert!((g.probability - 2f64.powf(-hmin)).abs() < 1e-7);
    }
}

#[test]
fn ginibre_qubit_mean_largest_eigenvalue() {
    // Hilbert–Schmidt qubit states fill the Bloch ball uniformly: E[λ_max] = 1/2 + E[r]/2 = 7/8
    let mut rng = seeded_rng(2024);
    let n = 10_000;
    let mean: f64 = (0..n)
        .map(|_| random_density_from(&mut rng, 2).op().lambda_max().unwrap())
        .sum::<f64>()
        / n as f64;
    assert!((mean - 0.875).abs() < 5e-3, "mean {mean}");
}
