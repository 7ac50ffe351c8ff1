#![allow(dead_code)]

//! Brute-force check of the word engine against single symmetry moves.
//!
//! Nodes are raw words over `∅` plus a four-letter alphabet, up to a length
//! cap above the tested lengths. Edges are the elementary moves: insert or
//! delete `∅`, collapse or duplicate an adjacent equal pair, swap an adjacent
//! Alice letter with a Bob letter, swap adjacent letters of different
//! Alices. Components of that graph are the oracle's equivalence classes.

use std::collections::{HashMap, HashSet};

use eprsdp::words::{canonicalize, Letter, Word};
use eprsdp::ScenarioSpec;

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra] = rb;
        }
    }
}

fn commute(a: Letter, b: Letter) -> bool {
    match (a, b) {
        (Letter::Meas { .. }, Letter::BobInput(_)) | (Letter::BobInput(_), Letter::Meas { .. }) => true,
        (Letter::Meas { party: p, .. }, Letter::Meas { party: q, .. }) => p != q,
        _ => false,
    }
}

fn exposes_null(w: &[Letter]) -> bool {
    w.windows(2).any(|p| match (p[0], p[1]) {
        (Letter::Meas { party: p1, outcome: a1, input: x1 }, Letter::Meas { party: p2, outcome: a2, input: x2 }) => {
            p1 == p2 && x1 == x2 && a1 != a2
        }
        _ => false,
    })
}

pub fn all_words(letters: &[Letter], max_len: usize) -> Vec<Vec<Letter>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &layer {
            for &l in letters {
                let mut v: Vec<Letter> = w.clone();
                v.push(l);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Moves that do not increase length; the reverse moves give the same
/// undirected edges.
fn shrinking_and_swap_moves(w: &[Letter]) -> Vec<Vec<Letter>> {
    let mut out = Vec::new();
    for i in 0..w.len() {
        if w[i] == Letter::Empty {
            let mut v = w.to_vec();
            v.remove(i);
            out.push(v);
        }
        if i + 1 < w.len() {
            if w[i] == w[i + 1] {
                let mut v = w.to_vec();
                v.remove(i);
                out.push(v);
            }
            if commute(w[i], w[i + 1]) {
                let mut v = w.to_vec();
                v.swap(i, i + 1);
                out.push(v);
            }
        }
    }
    out
}

struct Oracle {
    ids: HashMap<Vec<Letter>, usize>,
    dsu: Dsu,
    null_roots: HashSet<usize>,
}

impl Oracle {
    fn new(letters: &[Letter], cap: usize) -> Self {
        let mut with_empty = letters.to_vec();
        with_empty.push(Letter::Empty);
        let words = all_words(&with_empty, cap);
        let ids: HashMap<Vec<Letter>, usize> = words.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
        let mut dsu = Dsu((0..words.len()).collect());
        for (i, w) in words.iter().enumerate() {
            for v in shrinking_and_swap_moves(w) {
                dsu.union(i, ids[&v]);
            }
        }
        let mut null_roots = HashSet::new();
        for (i, w) in words.iter().enumerate() {
            if exposes_null(w) {
                null_roots.insert(dsu.find(i));
            }
        }
        Oracle { ids, dsu, null_roots }
    }

    fn class(&mut self, w: &[Letter]) -> usize {
        let i = self.ids[w];
        self.dsu.find(i)
    }

    fn is_null(&mut self, w: &[Letter]) -> bool {
        let r = self.class(w);
        self.null_roots.contains(&r)
    }
}

fn letters_of(s: &ScenarioSpec) -> Vec<Letter> {
    eprsdp::words::alphabet(s, true)
}

/// Compare same-class and null decisions for every pair of raw words of
/// length at most `len`.
pub fn agree(s: &ScenarioSpec, len: usize, cap: usize) -> (usize, usize) {
    let letters = letters_of(s);
    assert_eq!(letters.len(), 4);
    let mut oracle = Oracle::new(&letters, cap);
    let raw = all_words(&letters, len);
    let mut canon = Vec::with_capacity(raw.len());
    let mut class = Vec::with_capacity(raw.len());
    let mut nulls = 0;
    for w in &raw {
        let c = canonicalize(&Word(w.clone()), s).unwrap();
        assert_eq!(c.is_null(), oracle.is_null(w), "null decision for {}", Word(w.clone()));
        nulls += c.is_null() as usize;
        class.push(oracle.class(w));
        canon.push(c);
    }
    for i in 0..raw.len() {
        if canon[i].is_null() {
            continue;
        }
        for j in 0..raw.len() {
            if canon[j].is_null() {
                continue;
            }
            assert_eq!(
                canon[i] == canon[j],
                class[i] == class[j],
                "{} vs {}",
                Word(raw[i].clone()),
                Word(raw[j].clone())
            );
        }
    }
    (raw.len(), nulls)
}

/// Number of non-null oracle classes reachable with at most `n` letters.
pub fn oracle_count(s: &ScenarioSpec, n: usize) -> usize {
    let letters = letters_of(s);
    let mut oracle = Oracle::new(&letters, n + 2);
    let mut classes = HashSet::new();
    for w in all_words(&letters, n) {
        if !oracle.is_null(&w) {
            classes.insert(oracle.class(&w));
        }
    }
    classes.len()
}
