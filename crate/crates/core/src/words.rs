//! Letters, words and their canonical forms.
//!
//! The alphabet for a scenario consists of the empty letter, one measurement
//! letter `a|x` per party, nonzero outcome `a` and input `x`, and one letter
//! per Bob input `y`. Words are considered up to:
//!
//! * inserting or deleting the empty letter,
//! * `ℓℓ ≡ ℓ` for a single letter `ℓ`,
//! * `a|x y ≡ y a|x`,
//! * `a_k|x_k a_j|x_j ≡ a_j|x_j a_k|x_k` for different parties `k ≠ j`.
//!
//! A word is null when some equivalent word contains `a|x a'|x` (same party,
//! same input, `a ≠ a'`).
//!
//! # Normal form
//!
//! Letters are stably partitioned into buckets (party 1 measurements, …,
//! party N measurements, Bob inputs). Letters in different buckets commute
//! and letters inside a bucket never do, so the bucket contents are a
//! complete invariant once runs of equal letters are collapsed. The word is
//! null iff a collapsed bucket contains an adjacent same-input,
//! different-outcome pair.
//!
//! # Letter ids
//!
//! `Empty = 0`; `a|x` of party `k` (all 0-based, `a ≥ 1`) is
//! `1 + (k·|X| + x)·(|A|−1) + (a−1)`; Bob input `y` follows all measurement
//! letters. Word sets are ordered by length, then lexicographically by ids.
//!
//! # String form
//!
//! Labels in strings are 1-based for parties, inputs and Bob inputs; outcomes
//! keep their natural value. A measurement letter is `a|x`, with suffix `@k`
//! for party `k > 1`; a Bob input is `;y`; the empty letter is `e`.
//! Measurement and empty tokens after the first token are preceded by `.`.
//! The empty word is `e`. Example: `1|2.3|1@2;2` is `1|2 (3|1 of party 2) y₂`.

use std::collections::HashMap;
use std::fmt;

use crate::error::{invalid, Error, Result};
use crate::scenario::ScenarioSpec;

/// Default cap on the size of a word set.
pub const DEFAULT_WORD_CAP: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    Empty,
    /// Outcome `a` of input `x` for Alice `party` (0-based party and input,
    /// `outcome ≥ 1`).
    Meas { party: usize, outcome: usize, input: usize },
    /// Bob input `y` (0-based).
    BobInput(usize),
}

impl Letter {
    pub fn meas(party: usize, outcome: usize, input: usize) -> Self {
        Letter::Meas { party, outcome, input }
    }

    pub fn is_meas(&self) -> bool {
        matches!(self, Letter::Meas { .. })
    }

    pub fn is_bob(&self) -> bool {
        matches!(self, Letter::BobInput(_))
    }

    pub fn check(&self, s: &ScenarioSpec) -> Result<()> {
        match *self {
            Letter::Empty => Ok(()),
            Letter::Meas { party, outcome, input } => {
                if party >= s.n_alices {
                    Err(invalid(format!("party {} out of range", party + 1)))
                } else if outcome == 0 || outcome >= s.n_outcomes {
                    Err(invalid(format!("outcome {outcome} is not a letter outcome")))
                } else if input >= s.n_inputs {
                    Err(invalid(format!("input {} out of range", input + 1)))
                } else {
                    Ok(())
                }
            }
            Letter::BobInput(y) => {
                if y >= s.n_bob_inputs {
                    Err(invalid(format!("Bob input {} out of range", y + 1)))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn id(&self, s: &ScenarioSpec) -> u32 {
        let per_party = s.n_inputs * (s.n_outcomes - 1);
        match *self {
            Letter::Empty => 0,
            Letter::Meas { party, outcome, input } => {
                (1 + (party * s.n_inputs + input) * (s.n_outcomes - 1) + (outcome - 1)) as u32
            }
            Letter::BobInput(y) => (1 + s.n_alices * per_party + y) as u32,
        }
    }

    /// Bucket used by the normal form: parties first, Bob inputs last.
    fn bucket(&self, s: &ScenarioSpec) -> usize {
        match *self {
            Letter::Meas { party, .. } => party,
            _ => s.n_alices,
        }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Letter::Empty => write!(f, "e"),
            Letter::Meas { party, outcome, input } => {
                write!(f, "{}|{}", outcome, input + 1)?;
                if party > 0 {
                    write!(f, "@{}", party + 1)?;
                }
                Ok(())
            }
            Letter::BobInput(y) => write!(f, ";{}", y + 1),
        }
    }
}

/// All non-empty letters of the alphabet in id order.
pub fn alphabet(s: &ScenarioSpec, with_bob: bool) -> Vec<Letter> {
    let mut out = Vec::new();
    for party in 0..s.n_alices {
        for input in 0..s.n_inputs {
            for outcome in 1..s.n_outcomes {
                out.push(Letter::meas(party, outcome, input));
            }
        }
    }
    if with_bob {
        out.extend((0..s.n_bob_inputs).map(Letter::BobInput));
    }
    out
}

/// A finite sequence of letters. The empty sequence is the word `∅`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letter(l: Letter) -> Self {
        Word(vec![l])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    /// Letters in reverse order.
    pub fn dagger(&self) -> Word {
        Word(self.0.iter().rev().copied().collect())
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn ids(&self, s: &ScenarioSpec) -> Vec<u32> {
        self.0.iter().map(|l| l.id(s)).collect()
    }

    pub fn has_bob(&self) -> bool {
        self.0.iter().any(Letter::is_bob)
    }

    /// Measurement letters only, order preserved.
    pub fn strip_bob(&self) -> Word {
        Word(self.0.iter().copied().filter(Letter::is_meas).collect())
    }

    pub fn bob_letters(&self) -> Vec<usize> {
        self.0
            .iter()
            .filter_map(|l| match l {
                Letter::BobInput(y) => Some(*y),
                _ => None,
            })
            .collect()
    }

    pub fn parse(text: &str) -> Result<Word> {
        parse_word(text)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "e");
        }
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 && !l.is_bob() {
                write!(f, ".")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Word {
    type Err = Error;
    fn from_str(s: &str) -> Result<Word> {
        parse_word(s)
    }
}

fn parse_number(tok: &str, what: &str) -> Result<usize> {
    tok.trim()
        .parse::<usize>()
        .map_err(|_| invalid(format!("bad {what} `{tok}` in word")))
}

fn parse_meas(tok: &str) -> Result<Letter> {
    if tok == "e" {
        return Ok(Letter::Empty);
    }
    let (body, party) = match tok.split_once('@') {
        Some((b, p)) => (b, parse_number(p, "party")?),
        None => (tok, 1),
    };
    let (a, x) = body
        .split_once('|')
        .ok_or_else(|| invalid(format!("bad letter `{tok}`")))?;
    let outcome = parse_number(a, "outcome")?;
    let input = parse_number(x, "input")?;
    if party == 0 || input == 0 {
        return Err(invalid(format!("labels in `{tok}` are 1-based")));
    }
    Ok(Letter::meas(party - 1, outcome, input - 1))
}

fn parse_word(text: &str) -> Result<Word> {
    let text = text.trim();
    if text.is_empty() || text == "e" || text == "∅" {
        return Ok(Word::empty());
    }
    let mut letters = Vec::new();
    for (i, chunk) in text.split(';').enumerate() {
        let mut parts = chunk.split('.');
        if i > 0 {
            let y = parse_number(parts.next().unwrap_or(""), "Bob input")?;
            if y == 0 {
                return Err(invalid("Bob inputs are 1-based"));
            }
            letters.push(Letter::BobInput(y - 1));
        }
        for tok in parts {
            if i == 0 && tok.is_empty() && chunk.is_empty() {
                continue;
            }
            letters.push(parse_meas(tok.trim())?);
        }
    }
    Ok(Word(letters))
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Canon {
    Word(Word),
    Null,
}

impl Canon {
    pub fn word(&self) -> Option<&Word> {
        match self {
            Canon::Word(w) => Some(w),
            Canon::Null => None,
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Canon::Null)
    }
}

/// Normal form of `w`, or `Null`.
pub fn canonicalize(w: &Word, s: &ScenarioSpec) -> Result<Canon> {
    for l in w.letters() {
        l.check(s)?;
    }
    Ok(canonicalize_unchecked(w, s))
}

/// [`canonicalize`] without range checks; letters must be valid for `s`.
pub fn canonicalize_unchecked(w: &Word, s: &ScenarioSpec) -> Canon {
    let mut buckets: Vec<Vec<Letter>> = vec![Vec::new(); s.n_alices + 1];
    for &l in w.letters() {
        if l != Letter::Empty {
            buckets[l.bucket(s)].push(l);
        }
    }
    let mut out = Vec::with_capacity(w.len());
    for b in &mut buckets {
        b.dedup();
        for pair in b.windows(2) {
            if let (
                Letter::Meas { outcome: a, input: x, .. },
                Letter::Meas { outcome: a2, input: x2, .. },
            ) = (pair[0], pair[1])
            {
                if x == x2 && a != a2 {
                    return Canon::Null;
                }
            }
        }
        out.extend_from_slice(b);
    }
    Canon::Word(Word(out))
}

/// Canonical form of `v† w`.
pub fn product(v: &Word, w: &Word, s: &ScenarioSpec) -> Canon {
    canonicalize_unchecked(&v.dagger().concat(w), s)
}

/// Ordering key: length first, then letter ids.
pub fn order_key(w: &Word, s: &ScenarioSpec) -> (usize, Vec<u32>) {
    (w.len(), w.ids(s))
}

/// One representative per non-null class reachable with at most `level`
/// letters, indexed deterministically.
#[derive(Clone, Debug)]
pub struct WordSet {
    pub scenario: ScenarioSpec,
    pub level: usize,
    /// Whether Bob-input letters are part of the alphabet.
    pub with_bob: bool,
    pub words: Vec<Word>,
    lookup: HashMap<Word, usize>,
}

impl WordSet {
    pub fn new(s: &ScenarioSpec, level: usize) -> Result<Self> {
        Self::build(s, level, true, DEFAULT_WORD_CAP)
    }

    /// Word set over the alphabet without Bob inputs.
    pub fn without_bob(s: &ScenarioSpec, level: usize) -> Result<Self> {
        Self::build(s, level, false, DEFAULT_WORD_CAP)
    }

    pub fn build(s: &ScenarioSpec, level: usize, with_bob: bool, cap: usize) -> Result<Self> {
        s.check()?;
        if level == 0 {
            return Err(invalid("level must be at least 1"));
        }
        let letters = alphabet(s, with_bob);
        let mut seen: HashMap<Word, usize> = HashMap::new();
        let mut all = vec![Word::empty()];
        seen.insert(Word::empty(), 0);
        let mut frontier = vec![Word::empty()];
        for _ in 0..level {
            let mut next = Vec::new();
            for w in &frontier {
                for &l in &letters {
                    let mut raw = w.0.clone();
                    raw.push(l);
                    if let Canon::Word(c) = canonicalize_unchecked(&Word(raw), s) {
                        if !seen.contains_key(&c) {
                            seen.insert(c.clone(), 0);
                            all.push(c.clone());
                            next.push(c);
                            if all.len() > cap {
                                return Err(Error::WordSetTooLarge { level, cap });
                            }
                        }
                    }
                }
            }
            frontier = next;
        }
        all.sort_by_cached_key(|w| order_key(w, s));
        let lookup = all.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
        Ok(WordSet { scenario: *s, level, with_bob, words: all, lookup })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Index of a canonical word.
    pub fn index_of(&self, w: &Word) -> Option<usize> {
        self.lookup.get(w).copied()
    }

    /// Index of the class of an arbitrary word, if it is a member.
    pub fn find(&self, w: &Word) -> Option<usize> {
        match canonicalize_unchecked(w, &self.scenario) {
            Canon::Word(c) => self.index_of(&c),
            Canon::Null => None,
        }
    }

    pub fn contains(&self, w: &Word) -> bool {
        self.find(w).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Word> {
        self.words.iter()
    }
}
