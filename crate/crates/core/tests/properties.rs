mod common;

use hamforge_core::brackets::{invert_sigma, sigma_from_oneform};
use hamforge_core::dynamics::{exact_propagate, flow_matrix};
use hamforge_core::fock_oracle::{canonicalize, fock_hamiltonian, oracle_spectrum};
use hamforge_core::lagrangian::{build_structure_qp, build_structure_qu, chart_builder, chart_builders, QuadraticModel};
use hamforge_core::linalg::{self, Mat, Vector};
use hamforge_core::spectra::{
    catalog, catalog_entries, h1_levels, normal_modes, structure_spectrum, ModeKind, NcParams, NormalMode, ParamSet, DEFAULT_ZERO_TOL,
};
use proptest::prelude::*;

fn model_from_seed(seed: u64) -> QuadraticModel {
    let mut rng = common::rng(seed);
    common::random_model(&mut rng, 2 + (seed % 2) as usize, seed.is_multiple_of(3))
}

fn oscillator_frequencies(modes: &[NormalMode]) -> Vec<f64> {
    modes
        .iter()
        .filter(|m| m.kind == ModeKind::Oscillator)
        .flat_map(|m| std::iter::repeat_n(m.omega, m.multiplicity))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chart_oneforms_invert_to_their_structures(seed in any::<u64>()) {
        let model = model_from_seed(seed);
        for b in chart_builders().iter().filter(|b| b.applicable(&model).is_ok()) {
            let sigma = sigma_from_oneform(&b.lagrangian(&model).unwrap().oneform);
            let j = invert_sigma(&sigma).unwrap();
            let s = b.structure(&model).unwrap();
            prop_assert!(linalg::max_abs(&(&j.j - s.j())) < 1e-12, "{}", b.name());
        }
    }

    #[test]
    fn qp_flow_matches_first_order_equations(seed in any::<u64>()) {
        let model = model_from_seed(seed);
        let n = model.n();
        let mut rng = common::rng(seed ^ 0xabcd);
        let q = common::uniform_vector(&mut rng, n);
        let p = common::uniform_vector(&mut rng, n);
        let ti = model.t_inverse().unwrap();
        let vel = &ti * (&p + &model.theta * &q * 0.5);
        let pdot = &model.theta * &vel * 0.5 - &model.v * &q;
        let x = Vector::from_iterator(2 * n, q.iter().chain(p.iter()).copied());
        let xdot = build_structure_qp(&model).unwrap().vector_field(&x);
        let scale = vel.amax().max(pdot.amax()).max(1.0);
        prop_assert!((xdot.rows(0, n) - vel).amax() < 1e-13 * scale);
        prop_assert!((xdot.rows(n, n) - pdot).amax() < 1e-13 * scale);
    }

    #[test]
    fn normal_modes_are_chart_independent(seed in any::<u64>()) {
        let model = model_from_seed(seed);
        let freqs: Vec<Vec<f64>> = chart_builders()
            .iter()
            .filter(|b| b.applicable(&model).is_ok())
            .map(|b| oscillator_frequencies(&normal_modes(&b.structure(&model).unwrap(), DEFAULT_ZERO_TOL).unwrap()))
            .collect();
        for f in &freqs[1..] {
            prop_assert_eq!(f.len(), freqs[0].len());
            for (a, b) in f.iter().zip(&freqs[0]) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sum_rule_holds_for_random_models(seed in any::<u64>()) {
        let model = model_from_seed(seed);
        for b in chart_builders().iter().filter(|b| b.applicable(&model).is_ok()) {
            let s = b.structure(&model).unwrap();
            let k = flow_matrix(&s);
            let modes = normal_modes(&s, DEFAULT_ZERO_TOL).unwrap();
            let lhs: f64 = modes.iter().map(|m| m.multiplicity as f64 * (m.omega * m.omega - m.growth * m.growth)).sum();
            let rhs = -0.5 * (&k * &k).trace();
            prop_assert!((lhs - rhs).abs() < 1e-10 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn exact_propagator_conserves_energy(entry in 0usize..5, t in 0.0f64..100.0, xs in prop::collection::vec(-1.0f64..1.0, 4)) {
        let s = catalog_entries()[entry].build(&ParamSet::new()).unwrap();
        let x0 = Vector::from_vec(xs);
        let x = exact_propagate(&s, &x0, t).unwrap().state;
        prop_assert!((s.energy(&x) - s.energy(&x0)).abs() < 1e-11);
    }

    #[test]
    fn propagator_semigroup_and_liouville(entry in 0usize..5, a in -5.0f64..5.0, b in -5.0f64..5.0, xs in prop::collection::vec(-1.0f64..1.0, 4)) {
        let s = catalog_entries()[entry].build(&ParamSet::new()).unwrap();
        let x = Vector::from_vec(xs);
        let whole = exact_propagate(&s, &x, a + b).unwrap().state;
        let split = exact_propagate(&s, &exact_propagate(&s, &x, b).unwrap().state, a).unwrap().state;
        prop_assert!((&whole - split).amax() < 1e-12 * whole.amax().max(1.0));
        let det = linalg::expm(&(flow_matrix(&s) * a)).determinant();
        prop_assert!((det - 1.0).abs() < 1e-10);
    }

    #[test]
    fn canonicalize_round_trip(half in 1usize..4, vals in prop::collection::vec(-1.0f64..1.0, 36)) {
        let dim = 2 * half;
        let g = Mat::from_fn(dim, dim, |i, j| vals[i * 6 + j]);
        let j = &g - g.transpose();
        prop_assume!(linalg::condition_number(&j) < 1e6);
        let c = canonicalize(&j).unwrap();
        let residual = linalg::inf_norm(&(&c.s * &j * c.s.transpose() - linalg::canonical_j(half)));
        prop_assert!(residual < 1e-10, "{residual}");
    }
}

#[test]
fn oracle_matches_closed_form_on_definite_catalog_structures() {
    for name in ["nc_h2", "nc_np"] {
        let s = catalog(name, &ParamSet::new()).unwrap();
        let oracle = oracle_spectrum(&s, 40, 6).unwrap();
        let closed = structure_spectrum(&s, 8).unwrap().energies();
        for (a, b) in oracle.levels.iter().zip(&closed) {
            assert!((a - b).abs() < 1e-6, "{name}: {a} vs {b}");
        }
    }
}

#[test]
fn lowest_level_is_non_increasing_in_cutoff() {
    let s = catalog("nc_h2", &ParamSet::new()).unwrap();
    let lowest: Vec<f64> = [10, 20, 40].iter().map(|&c| fock_hamiltonian(&s, c).unwrap().eigenvalues().unwrap()[0]).collect();
    assert!(lowest[1] <= lowest[0] + 1e-12 && lowest[2] <= lowest[1] + 1e-12, "{lowest:?}");
}

#[test]
fn qu_and_qp_quantize_to_the_same_spectrum() {
    let model = NcParams { omega: 1.3, theta: 0.3, b: 0.4 }.model().unwrap();
    let a = oracle_spectrum(&build_structure_qu(&model).unwrap(), 40, 6).unwrap();
    let b = oracle_spectrum(&build_structure_qp(&model).unwrap(), 40, 6).unwrap();
    for (x, y) in a.levels.iter().zip(&b.levels) {
        assert!((x - y).abs() < 1e-6, "{x} vs {y}");
    }
}

#[test]
fn h1_table_against_qu_modes() {
    let p = NcParams::default();
    let table = h1_levels(&p, 8, 8).unwrap();
    let qu = chart_builder("qu").unwrap().structure(&p.model().unwrap()).unwrap();
    let modes = normal_modes(&qu, DEFAULT_ZERO_TOL).unwrap();
    let [w_minus, w_plus] = table.mode_frequencies();
    assert!((w_plus + w_minus - 2.0 * table.big_omega).abs() < 1e-10);
    assert!((w_plus - w_minus - table.lambda).abs() < 1e-10);
    assert_eq!(oscillator_frequencies(&modes).len(), 2);
    // every mode level with n₋ ≥ n₊ (ℓ = n₋ − n₊ ≥ 0) is a table entry with n = 2n₊
    let in_table = |e: f64| table.entries.iter().any(|t| (t.energy - e).abs() < 1e-10 * e.max(1.0));
    for n_plus in 0..=4u32 {
        for n_minus in n_plus..=(8 - n_plus) {
            let e = table.big_omega + n_plus as f64 * w_plus + n_minus as f64 * w_minus;
            assert!(in_table(e), "n+={n_plus} n-={n_minus}");
        }
    }
    // and every even-n entry is a mode level
    let spectrum = structure_spectrum(&qu, 16).unwrap();
    for t in table.entries.iter().filter(|t| t.n % 2 == 0 && t.n + t.l <= 8) {
        assert!(spectrum.contains(t.energy, 1e-10), "n={} l={}", t.n, t.l);
    }
}
