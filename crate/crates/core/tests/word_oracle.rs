mod common;

use std::time::Instant;

use common::{agree, oracle_count};
use eprsdp::words::{canonicalize, Canon, Word, WordSet};
use eprsdp::ScenarioSpec;

#[test]
fn single_alice_two_inputs_two_bob_inputs() {
    let t = Instant::now();
    let s = ScenarioSpec::new(1, 2, 2, 2, 2).unwrap();
    let (n, nulls) = agree(&s, 4, 6);
    assert_eq!(n, 341);
    assert_eq!(nulls, 0);
    assert!(t.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn three_outcomes_expose_null_words() {
    let s = ScenarioSpec::new(1, 3, 1, 2, 2).unwrap();
    let (_, nulls) = agree(&s, 4, 6);
    assert!(nulls > 0);
}

#[test]
fn two_alices_commute() {
    let s = ScenarioSpec::new(2, 2, 1, 2, 2).unwrap();
    agree(&s, 4, 6);
}

#[test]
fn enumeration_counts_match_oracle() {
    let s = ScenarioSpec::new(1, 2, 2, 2, 2).unwrap();
    assert_eq!(oracle_count(&s, 1), 5);
    assert_eq!(oracle_count(&s, 2), 13);
    assert_eq!(WordSet::new(&s, 1).unwrap().len(), 5);
    assert_eq!(WordSet::new(&s, 2).unwrap().len(), 13);
    let s = ScenarioSpec::new(1, 3, 1, 2, 2).unwrap();
    for n in 1..=3 {
        assert_eq!(WordSet::new(&s, n).unwrap().len(), oracle_count(&s, n), "level {n}");
    }
}

#[test]
fn canonical_form_examples() {
    let s = ScenarioSpec::new(1, 3, 2, 2, 2).unwrap();
    let c = |t: &str| canonicalize(&Word::parse(t).unwrap(), &s).unwrap();
    assert_eq!(c(";1.e.1|1"), Canon::Word(Word::parse("1|1;1").unwrap()));
    assert!(c("1|1;1.2|1").is_null());
    assert_eq!(c(";1.e;2.1|1"), Canon::Word(Word::parse("1|1;1;2").unwrap()));
    assert_ne!(c("1|1;1;2"), c(";2.1|1;1"));
}
