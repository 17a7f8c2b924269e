//! Crossing strings and the rewriting bound on edge insertion.
//!
//! A missing edge `uv` crosses a run of triangles of `T`. The run is written
//! as a word `L X R` where `X` is a word over `U`/`D`: one symbol per
//! intermediate triangle, telling on which side of `uv` its uncrossed edge
//! lies. Unit flips act on the word by local replacements
//!
//! ```text
//! LU -> L   LD -> L   UR -> R   DR -> R
//! UU -> U   DD -> D   UD -> DU  DU -> UD   LR -> (empty)
//! ```
//!
//! and a parallel flip applies replacements on disjoint pairs at once.
//! `b(s)` is the fewest such rewritings that erase `s`, a lower bound on the
//! number of parallel flips needed to insert `uv`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, FormatError};
use crate::triangulation::{Edge, Triangulation};

/// Longest string handled by the exact search unless told otherwise.
pub const DEFAULT_EXACT_LIMIT: usize = 22;

/// Interior words are packed into a `u64`, one bit per symbol.
const MAX_INTERIOR: usize = 62;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sym {
    Left,
    Up,
    Down,
    Right,
}

impl Sym {
    pub fn as_char(self) -> char {
        match self {
            Sym::Left => 'L',
            Sym::Up => 'U',
            Sym::Down => 'D',
            Sym::Right => 'R',
        }
    }

    fn from_char(c: char) -> Option<Self> {
        match c {
            'L' | '◁' => Some(Sym::Left),
            'U' | '▲' => Some(Sym::Up),
            'D' | '▼' => Some(Sym::Down),
            'R' | '▷' => Some(Sym::Right),
            _ => None,
        }
    }
}

/// A crossing string: `L`, then `U`/`D` symbols, then `R`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TriString {
    syms: Vec<Sym>,
}

impl TriString {
    pub fn new(syms: Vec<Sym>) -> Result<Self, FormatError> {
        let ok = syms.len() >= 2
            && syms.len() - 2 <= MAX_INTERIOR
            && syms[0] == Sym::Left
            && syms[syms.len() - 1] == Sym::Right
            && syms[1..syms.len() - 1].iter().all(|s| matches!(s, Sym::Up | Sym::Down));
        if ok {
            Ok(Self { syms })
        } else {
            Err(FormatError::TriString(syms.iter().map(|s| s.as_char()).collect()))
        }
    }

    /// Builds `L X R` from `k` interior symbols; bit `i` of `bits` set means
    /// symbol `i` is `U`.
    pub fn from_interior(k: usize, bits: u64) -> Self {
        assert!(k <= MAX_INTERIOR);
        let mut syms = Vec::with_capacity(k + 2);
        syms.push(Sym::Left);
        syms.extend((0..k).map(|i| if bits >> i & 1 == 1 { Sym::Up } else { Sym::Down }));
        syms.push(Sym::Right);
        Self { syms }
    }

    pub fn interior(&self) -> (usize, u64) {
        let k = self.syms.len() - 2;
        let bits = self.syms[1..=k]
            .iter()
            .enumerate()
            .fold(0u64, |b, (i, s)| if *s == Sym::Up { b | 1 << i } else { b });
        (k, bits)
    }

    pub fn symbols(&self) -> &[Sym] {
        &self.syms
    }

    pub fn len(&self) -> usize {
        self.syms.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The same string with every `U` and `D` exchanged.
    pub fn swapped(&self) -> Self {
        let (k, bits) = self.interior();
        Self::from_interior(k, !bits & mask(k))
    }

    /// Subwords obtained by deleting one interior symbol.
    pub fn deletions(&self) -> Vec<TriString> {
        (1..self.syms.len() - 1)
            .map(|i| {
                let mut s = self.syms.clone();
                s.remove(i);
                Self { syms: s }
            })
            .collect()
    }
}

impl fmt::Display for TriString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.syms {
            write!(f, "{}", s.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for TriString {
    type Err = FormatError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let syms: Option<Vec<Sym>> = text.trim().chars().map(Sym::from_char).collect();
        match syms {
            Some(s) => Self::new(s),
            None => Err(FormatError::TriString(text.to_string())),
        }
    }
}

fn mask(k: usize) -> u64 {
    if k == 0 {
        0
    } else {
        u64::MAX >> (64 - k)
    }
}

/// `ceil(log2(len))` for `len >= 1`.
pub fn log2_ceil(len: usize) -> u32 {
    if len <= 1 {
        0
    } else {
        usize::BITS - (len - 1).leading_zeros()
    }
}

/// Crossing string of the missing edge `uv` in `t`, read from `uv.a` to
/// `uv.b`. `None` if `uv` is an edge of `t`.
pub fn extract_crossing_string(uv: Edge, t: &Triangulation) -> Option<TriString> {
    if t.contains(uv) {
        return None;
    }
    let mut lefts = Vec::new();
    t.walk(uv, |_, l| lefts.push(l));
    let mut syms = Vec::with_capacity(lefts.len() + 1);
    syms.push(Sym::Left);
    for w in lefts.windows(2) {
        // Consecutive crossed edges share their left endpoint iff the
        // triangle between them has its uncrossed edge on the right.
        syms.push(if w[0] == w[1] { Sym::Down } else { Sym::Up });
    }
    syms.push(Sym::Right);
    Some(TriString::new(syms).expect("walk yields a well formed string"))
}

/// Canonical representative under reversal and `U`/`D` exchange, both of
/// which preserve `b`.
fn canonical(k: usize, bits: u64) -> u64 {
    if k == 0 {
        return 0;
    }
    let m = mask(k);
    let rev = bits.reverse_bits() >> (64 - k);
    bits.min(rev).min(!bits & m).min(!rev & m)
}

/// Calls `f(len, bits)` for every word produced by a (possibly empty) set of
/// disjoint pair replacements inside `bits[0..k]`, skipping words longer
/// than `max_out`.
fn inner_rewritings(k: usize, bits: u64, max_out: usize, f: &mut impl FnMut(usize, u64)) {
    fn rec(j: usize, k: usize, bits: u64, len: usize, out: u64, max_out: usize, f: &mut impl FnMut(usize, u64)) {
        let rest = k - j;
        if len + rest - rest / 2 > max_out {
            return;
        }
        if j == k {
            f(len, out);
            return;
        }
        let x = bits >> j & 1;
        rec(j + 1, k, bits, len + 1, out | x << len, max_out, f);
        if j + 1 < k {
            let y = bits >> (j + 1) & 1;
            if x == y {
                rec(j + 2, k, bits, len + 1, out | x << len, max_out, f);
            } else {
                rec(j + 2, k, bits, len + 2, out | y << len | x << (len + 1), max_out, f);
            }
        }
    }
    rec(0, k, bits, 0, 0, max_out, f);
}

/// Successors of `L X R` under rewritings that apply both extreme
/// replacements (one when `|X| = 1`). `|X| = 0` has none: the only move
/// erases the string.
fn pruned_successors(k: usize, bits: u64, max_out: usize, f: &mut impl FnMut(usize, u64)) {
    match k {
        0 => {}
        1 => f(0, 0),
        _ => inner_rewritings(k - 2, bits >> 1 & mask(k - 2), max_out, f),
    }
}

struct Search {
    failed: HashSet<(usize, u64, u32)>,
}

impl Search {
    /// Can `L X R` be erased in at most `d` rewritings?
    fn solvable(&mut self, k: usize, bits: u64, d: u32) -> bool {
        if k == 0 {
            return d >= 1;
        }
        if log2_ceil(k + 2) > d {
            return false;
        }
        let key = (k, canonical(k, bits), d);
        if self.failed.contains(&key) {
            return false;
        }
        // After this step the word must fit in 2^(d-1) symbols.
        let max_out = (1usize << (d - 1).min(40)).saturating_sub(2);
        let mut succ = Vec::new();
        let mut seen = HashSet::new();
        pruned_successors(k, bits, max_out, &mut |len, out| {
            if seen.insert((len, canonical(len, out))) {
                succ.push((len, out));
            }
        });
        // Shortest first: they are the most promising.
        succ.sort_unstable_by_key(|&(len, _)| len);
        for (len, out) in succ {
            if self.solvable(len, out, d - 1) {
                return true;
            }
        }
        self.failed.insert(key);
        false
    }
}

/// `b(s)` by iterative deepening over pruned rewritings, for `|s| <= limit`.
pub fn rewrite_bound_exact_with_limit(s: &TriString, limit: usize) -> Result<u32, Error> {
    if s.len() > limit {
        return Err(Error::Limit(format!("string of length {} exceeds the exact limit {limit}", s.len())));
    }
    let (k, bits) = s.interior();
    let mut search = Search { failed: HashSet::new() };
    let mut d = log2_ceil(k + 2).max(1);
    while !search.solvable(k, bits, d) {
        d += 1;
    }
    Ok(d)
}

/// Exact `b(s)` with the default length limit.
pub fn rewrite_bound_exact(s: &TriString) -> Result<u32, Error> {
    rewrite_bound_exact_with_limit(s, DEFAULT_EXACT_LIMIT)
}

/// Every string reachable from `s` in one rewriting that uses only
/// non-lengthening replacements, extreme ones optional. Used by the
/// unpruned reference search.
pub fn all_rewritings(s: &TriString) -> Vec<Option<TriString>> {
    let (k, bits) = s.interior();
    if k == 0 {
        return vec![None];
    }
    let mut out = HashSet::new();
    // Choices for the two extreme pairs, then any matching inside.
    for left in [false, true] {
        for right in [false, true] {
            if left && right && k < 2 {
                continue;
            }
            let lo = usize::from(left);
            let hi = k - usize::from(right);
            let mid_bits = bits >> lo & mask(hi - lo);
            inner_rewritings(hi - lo, mid_bits, usize::MAX, &mut |len, w| {
                let changed = left || right || len != hi - lo || w != mid_bits;
                if changed {
                    out.insert((len, w));
                }
            });
        }
    }
    let mut v: Vec<Option<TriString>> = out.into_iter().map(|(len, w)| Some(TriString::from_interior(len, w))).collect();
    v.sort();
    v
}

/// Lookup table of exact values that the logarithmic bound underestimates.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BoundTable {
    entries: HashMap<TriString, u32>,
    exact_limit: usize,
}

impl BoundTable {
    pub fn new() -> Self {
        Self { entries: HashMap::new(), exact_limit: DEFAULT_EXACT_LIMIT }
    }

    /// Strings up to this length missing from the table are solved exactly
    /// on demand; longer ones fall back to the logarithmic bound.
    pub fn with_exact_limit(mut self, limit: usize) -> Self {
        self.exact_limit = limit;
        self
    }

    pub fn exact_limit(&self) -> usize {
        self.exact_limit
    }

    pub fn get(&self, s: &TriString) -> Option<u32> {
        self.entries.get(s).copied()
    }

    pub fn insert(&mut self, s: TriString, b: u32) {
        self.entries.insert(s, b);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TriString, u32)> {
        self.entries.iter().map(|(s, &b)| (s, b))
    }

    /// One `<string> <value>` line per entry, sorted by string.
    pub fn to_text(&self) -> String {
        let sorted: BTreeMap<String, u32> = self.entries.iter().map(|(s, &b)| (s.to_string(), b)).collect();
        let mut out = String::new();
        for (s, b) in sorted {
            out.push_str(&s);
            out.push(' ');
            out.push_str(&b.to_string());
            out.push('\n');
        }
        out
    }

    /// Parses the text form. Blank lines and lines starting with `#` are
    /// ignored.
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut table = Self::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| FormatError::Text { line: i + 1, msg };
            let mut parts = line.split_whitespace();
            let (Some(s), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(err("expected `<string> <value>`".into()));
            };
            let s: TriString = s.parse().map_err(|e: FormatError| err(e.to_string()))?;
            let b: u32 = b.parse().map_err(|_| err(format!("bad value {b:?}")))?;
            if b < log2_ceil(s.len()).max(1) {
                return Err(err(format!("value {b} is below the logarithmic bound of {s}")));
            }
            if table.entries.insert(s.clone(), b).is_some() {
                return Err(err(format!("duplicate entry {s}")));
            }
        }
        Ok(table)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, Error> {
        Ok(Self::parse(&std::fs::read_to_string(path)?)?)
    }

    pub fn store(&self, path: &std::path::Path) -> Result<(), Error> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Exact `b` for every string with at most `max_len` symbols, computed
/// bottom-up. Index `[k][bits]` holds the value of `L X R` with `|X| = k`.
pub fn all_exact_bounds(max_len: usize) -> Vec<Vec<u8>> {
    assert!(max_len >= 2 && max_len - 2 <= 30, "table size out of range");
    let kmax = max_len - 2;
    let mut b: Vec<Vec<u8>> = Vec::with_capacity(kmax + 1);
    b.push(vec![1]);
    for k in 1..=kmax {
        let row: Vec<u8> = (0..1u64 << k)
            .into_par_iter()
            .map(|bits| {
                let mut best = u8::MAX;
                pruned_successors(k, bits, usize::MAX, &mut |len, out| best = best.min(b[len][out as usize]));
                best + 1
            })
            .collect();
        b.push(row);
    }
    b
}

/// Exact values of every string up to `max_len` symbols on which the
/// logarithmic bound is not tight.
pub fn precompute_bound_table(max_len: usize) -> BoundTable {
    let mut table = BoundTable::new();
    if max_len < 2 {
        return table;
    }
    for (k, row) in all_exact_bounds(max_len).iter().enumerate() {
        let log = log2_ceil(k + 2);
        for (bits, &v) in row.iter().enumerate() {
            if u32::from(v) > log {
                table.insert(TriString::from_interior(k, bits as u64), u32::from(v));
            }
        }
    }
    table
}

/// A lower bound on `b(s)`: the table value, else the exact value when `s`
/// is short enough, else `ceil(log2 |s|)`.
pub fn rewrite_bound_estimate(s: &TriString, table: &BoundTable) -> u32 {
    if let Some(b) = table.get(s) {
        return b;
    }
    match rewrite_bound_exact_with_limit(s, table.exact_limit) {
        Ok(b) => b,
        Err(_) => log2_ceil(s.len()),
    }
}

/// Lower bound on the parallel flips needed before `uv` is an edge.
pub fn flip_insertion_lb(uv: Edge, t: &Triangulation, table: &BoundTable) -> u32 {
    match extract_crossing_string(uv, t) {
        None => 0,
        Some(s) => rewrite_bound_estimate(&s, table),
    }
}
