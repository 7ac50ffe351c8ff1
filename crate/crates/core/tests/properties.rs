use proptest::prelude::*;

use eprsdp::generators::{gen_nonsignalling, gen_random_quantum, gen_transpose_twist, random_density, rng, QuantumDims};
use eprsdp::io::{AssemblageFile, CertificateFile};
use eprsdp::linalg::{self, CMat};
use eprsdp::moment::{certificate_constraints, MomentIndex};
use eprsdp::oracle::reference_moment_matrix;
use eprsdp::reductions::{extended_correlations, gamma_from_jmrw, jmrw_from_gamma, npa_project, xi};
use eprsdp::sdp::{derealify, realify};
use eprsdp::words::{canonicalize, product, Canon, Letter, Word, WordSet};
use eprsdp::ScenarioSpec;

fn scenario() -> impl Strategy<Value = ScenarioSpec> {
    (1usize..=2, 2usize..=3, 1usize..=3, 1usize..=3, 1usize..=3)
        .prop_map(|(n, a, x, y, d)| ScenarioSpec::new(n, a, x, y, d).unwrap())
}

fn letter(s: ScenarioSpec) -> impl Strategy<Value = Letter> {
    prop_oneof![
        Just(Letter::Empty),
        (0..s.n_alices, 1..s.n_outcomes, 0..s.n_inputs).prop_map(|(p, a, x)| Letter::meas(p, a, x)),
        (0..s.n_bob_inputs).prop_map(Letter::BobInput),
    ]
}

fn scenario_and_word() -> impl Strategy<Value = (ScenarioSpec, Word)> {
    scenario().prop_flat_map(|s| (Just(s), prop::collection::vec(letter(s), 0..8).prop_map(Word)))
}

fn scenario_and_two_words() -> impl Strategy<Value = (ScenarioSpec, Word, Word)> {
    scenario().prop_flat_map(|s| {
        (
            Just(s),
            prop::collection::vec(letter(s), 0..5).prop_map(Word),
            prop::collection::vec(letter(s), 0..5).prop_map(Word),
        )
    })
}

fn canon_word(c: Canon) -> Option<Word> {
    c.word().cloned()
}

proptest! {
    #[test]
    fn canonicalize_is_idempotent_and_shrinks((s, w) in scenario_and_word()) {
        let c = canonicalize(&w, &s).unwrap();
        if let Some(u) = c.word() {
            prop_assert!(u.len() <= w.len());
            prop_assert_eq!(canonicalize(u, &s).unwrap(), c.clone());
            prop_assert!(!u.letters().contains(&Letter::Empty));
            prop_assert!(u.letters().windows(2).all(|p| p[0] != p[1]));
        }
    }

    #[test]
    fn dagger_is_involutive((_s, w) in scenario_and_word()) {
        prop_assert_eq!(w.dagger().dagger(), w);
    }

    #[test]
    fn concatenation_is_associative_up_to_equivalence((s, v, w) in scenario_and_two_words()) {
        let left = canonicalize(&v.concat(&w).concat(&v), &s).unwrap();
        let right = canonicalize(&v.concat(&w.concat(&v)), &s).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn class_of_is_symmetric((s, v, w) in scenario_and_two_words()) {
        let index = MomentIndex::build(&s, 1).unwrap();
        let (Some(v), Some(w)) = (canon_word(canonicalize(&v, &s).unwrap()), canon_word(canonicalize(&w, &s).unwrap())) else {
            return Ok(());
        };
        prop_assert_eq!(product(&v, &w, &s).is_null(), product(&w, &v, &s).is_null());
        if let (Some(a), Some(b)) = (index.class_of(&v, &w), index.class_of(&w, &v)) {
            prop_assert_eq!(a.class, b.class);
            prop_assert!(a.dagger != b.dagger || index.self_adjoint[a.class]);
        }
    }

    #[test]
    fn single_meas_with_trailing_y_is_self_adjoint(p in 0usize..2, a in 1usize..3, x in 0usize..3, y in 0usize..3) {
        let s = ScenarioSpec::new(2, 3, 3, 3, 2).unwrap();
        let w = Word(vec![Letter::meas(p, a, x), Letter::BobInput(y)]);
        prop_assert_eq!(canonicalize(&w.dagger(), &s).unwrap(), Canon::Word(w));
    }

    #[test]
    fn word_sets_are_nested(s in scenario()) {
        let small = WordSet::new(&s, 1).unwrap();
        let big = WordSet::new(&s, 2).unwrap();
        prop_assert_eq!(&big.words[..small.len()], &small.words[..]);
        prop_assert_eq!(&big.words[0], &Word::empty());
    }

    #[test]
    fn realify_round_trips_and_doubles_spectrum(seed in any::<u64>(), n in 1usize..5) {
        let mut r = rng(seed);
        let h = eprsdp::generators::random_hermitian(&mut r, n);
        let m = realify(&h);
        prop_assert!(linalg::max_abs_diff(&derealify(&m), &h) < 1e-14);
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let mut want: Vec<f64> = linalg::eigvalsh(&h).into_iter().flat_map(|v| [v, v]).collect();
        want.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip(&want) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn xi_maps_states_to_psd(seed in any::<u64>(), d in 1usize..=4) {
        let mut r = rng(seed);
        let x = random_density(&mut r, d).scale(3.0);
        prop_assert!(linalg::min_eigenvalue(&xi(&x)) >= -1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_assemblages_validate(seed in any::<u64>(), x in 1usize..=3, y in 1usize..=2) {
        let s = ScenarioSpec::new(1, 2, x, y, 2).unwrap();
        let q = gen_random_quantum(seed, &s, &QuantumDims::default_for(&s)).unwrap().assemblage().unwrap();
        prop_assert!(q.validate(1e-9).pass());
        let ns = gen_nonsignalling(seed, &s.with_bob_inputs(1)).unwrap();
        prop_assert!(ns.validate(1e-9).pass());
        let tw = gen_transpose_twist(seed, &s.with_bob_inputs(2)).unwrap();
        prop_assert!(tw.validate(1e-9).pass());
    }

    #[test]
    fn reference_certificates_validate_and_restrict(seed in any::<u64>(), aux in 1usize..=2, y in 1usize..=2) {
        let s = ScenarioSpec::new(1, 2, 2, y, 2).unwrap();
        let dims = QuantumDims { alice_dims: vec![2], aux_dim: aux };
        let qr = gen_random_quantum(seed, &s, &dims).unwrap();
        let asm = qr.assemblage().unwrap();
        let gamma = reference_moment_matrix(&qr, 2).unwrap();
        let rep = gamma.validate(&certificate_constraints(&gamma.index, &asm).unwrap(), 1e-8);
        prop_assert!(rep.pass(), "{}", rep);
        let low = gamma.restrict(1).unwrap();
        prop_assert!(low.validate(&certificate_constraints(&low.index, &asm).unwrap(), 1e-8).pass());
        let npa = npa_project(&gamma).unwrap();
        prop_assert!(npa.validate(1e-9).unwrap().pass());
    }

    #[test]
    fn extended_correlations_are_probabilities(seed in any::<u64>()) {
        let s = ScenarioSpec::new(1, 3, 2, 2, 2).unwrap();
        let qr = gen_random_quantum(seed, &s, &QuantumDims::default_for(&s)).unwrap();
        let gamma = reference_moment_matrix(&qr, 1).unwrap();
        let mut r = rng(seed ^ 1);
        let povm = eprsdp::generators::random_projective(&mut r, 2, 2).unwrap();
        let p = extended_correlations(&gamma, &povm).unwrap();
        prop_assert!(p.values.iter().all(|&v| v >= -1e-9));
        for x in 0..2 {
            for y in 0..2 {
                let total: f64 = (0..3).flat_map(|a| (0..2).map(move |k| (a, k))).map(|(a, k)| p.get(&[a], k, &[x], y)).sum();
                prop_assert!((total - 1.0).abs() < 1e-9);
            }
        }
        let single = extended_correlations(&gamma, &[linalg::identity(2)]).unwrap();
        let asm = qr.assemblage().unwrap();
        for a in 0..3 {
            let want = asm.block(&[a], &[1], 1).trace().re;
            prop_assert!((single.get(&[a], 0, &[1], 1) - want).abs() < 1e-10);
        }
    }

    #[test]
    fn jmrw_conversions_commute_with_restriction(seed in any::<u64>()) {
        let s = ScenarioSpec::new(1, 2, 2, 1, 2).unwrap();
        let qr = gen_random_quantum(seed, &s, &QuantumDims { alice_dims: vec![2], aux_dim: 2 }).unwrap();
        let gamma = reference_moment_matrix(&qr, 3).unwrap();
        let delta = jmrw_from_gamma(&gamma).unwrap();
        let delta_low = jmrw_from_gamma(&gamma.restrict(2).unwrap()).unwrap();
        let restricted = delta.moments.restrict(delta_low.level()).unwrap();
        for (a, b) in restricted.blocks.iter().zip(&delta_low.moments.blocks) {
            prop_assert!(linalg::max_abs_diff(a, b) < 1e-12);
        }
        let back = gamma_from_jmrw(&delta).unwrap();
        let back_low = gamma_from_jmrw(&delta_low).unwrap();
        let restricted = back.restrict(back_low.index.level()).unwrap();
        for (a, b) in restricted.blocks.iter().zip(&back_low.blocks) {
            prop_assert!(linalg::max_abs_diff(a, b) < 1e-12);
        }
    }

    #[test]
    fn files_round_trip_exactly(seed in any::<u64>()) {
        let s = ScenarioSpec::new(2, 2, 2, 2, 2).unwrap();
        let qr = gen_random_quantum(seed, &s, &QuantumDims::default_for(&s)).unwrap();
        let asm = qr.assemblage().unwrap();
        let text = serde_json::to_string(&AssemblageFile::new(&asm)).unwrap();
        let back = serde_json::from_str::<AssemblageFile>(&text).unwrap().into_assemblage().unwrap();
        prop_assert_eq!(&back, &asm);
        let gamma = reference_moment_matrix(&qr, 1).unwrap();
        let text = serde_json::to_string(&CertificateFile::bob_with_input(&gamma)).unwrap();
        let Ok(eprsdp::io::Certificate::BobWithInput(g)) = serde_json::from_str::<CertificateFile>(&text).unwrap().into_certificate() else {
            return Err(TestCaseError::fail("flavor"));
        };
        prop_assert_eq!(&g.blocks, &gamma.blocks);
    }
}

#[test]
fn jmrw_round_trip_on_data_is_exact() {
    let s = ScenarioSpec::new(1, 3, 2, 1, 2).unwrap();
    let qr = gen_random_quantum(21, &s, &QuantumDims::default_for(&s)).unwrap();
    let gamma = reference_moment_matrix(&qr, 3).unwrap();
    let delta = jmrw_from_gamma(&gamma).unwrap();
    let again = jmrw_from_gamma(&gamma_from_jmrw(&delta).unwrap()).unwrap();
    let e = Word::empty();
    for w in delta.moments.index.words.iter().filter(|w| w.len() <= 1) {
        let a: CMat = delta.moments.entry_words(&e, w).unwrap();
        let b: CMat = again.moments.entry_words(&e, w).unwrap();
        assert!(linalg::max_abs_diff(&a, &b) <= 1e-12);
    }
}
