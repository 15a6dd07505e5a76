//! Exact half-open intervals `(a, b]` over arbitrary-precision rationals and
//! the combinatorics built on them: dilation to unit scale, the endpoint-
//! anchored dyadic decomposition, the well-distributedness degree, the
//! mod-3 splitting of doubled pieces and the completion of families whose
//! relative layout is shared across intervals.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use num::bigint::BigInt;
use num::{BigRational, One, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};

pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn pow2(k: u32) -> Rational {
    Rational::from_integer(BigInt::one() << k as usize)
}

pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// A nonempty half-open interval `(a, b]` with `a < b`.
///
/// Empty pieces are represented by `None` wherever they can occur.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    a: Rational,
    b: Rational,
}

impl Interval {
    pub fn new(a: Rational, b: Rational) -> Result<Self> {
        if a < b {
            Ok(Self { a, b })
        } else {
            Err(Error::Domain(format!("interval ({a}, {b}] is empty or reversed")))
        }
    }

    /// `(a, b]`, or `None` when `a == b`. Panics on `a > b`.
    pub fn piece(a: Rational, b: Rational) -> Option<Self> {
        match a.cmp(&b) {
            Ordering::Less => Some(Self { a, b }),
            Ordering::Equal => None,
            Ordering::Greater => panic!("reversed piece ({a}, {b}]"),
        }
    }

    pub fn from_ints(a: i64, b: i64) -> Result<Self> {
        Self::new(int(a), int(b))
    }

    pub fn left(&self) -> &Rational {
        &self.a
    }

    pub fn right(&self) -> &Rational {
        &self.b
    }

    pub fn length(&self) -> Rational {
        &self.b - &self.a
    }

    pub fn centre(&self) -> Rational {
        (&self.a + &self.b) / int(2)
    }

    /// Same centre, twice the length.
    pub fn doubled(&self) -> Self {
        let half = self.length() / int(2);
        Self {
            a: &self.a - &half,
            b: &self.b + &half,
        }
    }

    /// Dilation by a positive factor.
    pub fn scaled(&self, s: &Rational) -> Self {
        assert!(s.is_positive(), "dilation factor must be positive");
        Self {
            a: &self.a * s,
            b: &self.b * s,
        }
    }

    pub fn translated(&self, t: &Rational) -> Self {
        Self {
            a: &self.a + t,
            b: &self.b + t,
        }
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.a < x && x <= &self.b
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.a <= other.a && other.b <= self.b
    }

    /// Half-open intersection test: `(x, y]` and `(y, z]` do not meet.
    pub fn intersects(&self, other: &Interval) -> bool {
        self.a.max_ref(&other.a) < self.b.min_ref(&other.b)
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (to_f64(&self.a), to_f64(&self.b))
    }
}

trait MinMaxRef {
    fn max_ref<'a>(&'a self, o: &'a Self) -> &'a Self;
    fn min_ref<'a>(&'a self, o: &'a Self) -> &'a Self;
}

impl MinMaxRef for Rational {
    fn max_ref<'a>(&'a self, o: &'a Self) -> &'a Self {
        if self >= o {
            self
        } else {
            o
        }
    }
    fn min_ref<'a>(&'a self, o: &'a Self) -> &'a Self {
        if self <= o {
            self
        } else {
            o
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}]", self.a, self.b)
    }
}

/// Pairwise disjoint intervals sorted by left endpoint.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct DisjointFamily {
    intervals: Vec<Interval>,
}

impl DisjointFamily {
    pub fn new(mut intervals: Vec<Interval>) -> Result<Self> {
        intervals.sort_by(|x, y| x.a.cmp(&y.a));
        for w in intervals.windows(2) {
            precondition!(
                w[0].b <= w[1].a,
                "intervals {} and {} overlap",
                w[0],
                w[1]
            );
        }
        Ok(Self { intervals })
    }

    pub fn from_ints(pairs: &[(i64, i64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(a, b)| Interval::from_ints(a, b))
                .collect::<Result<_>>()?,
        )
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn min_length(&self) -> Option<Rational> {
        self.intervals.iter().map(Interval::length).min()
    }

    pub fn scaled(&self, s: &Rational) -> Self {
        Self {
            intervals: self.intervals.iter().map(|i| i.scaled(s)).collect(),
        }
    }
}

impl<'a> IntoIterator for &'a DisjointFamily {
    type Item = &'a Interval;
    type IntoIter = std::slice::Iter<'a, Interval>;
    fn into_iter(self) -> Self::IntoIter {
        self.intervals.iter()
    }
}

/// Dilates `fam` so that every interval has length at least 4.
///
/// Returns the factor and the dilated family; the factor is 1 when the
/// family already qualifies and `4 / min length` otherwise.
pub fn normalize_family(fam: &DisjointFamily) -> Result<(Rational, DisjointFamily)> {
    let min = fam
        .min_length()
        .ok_or_else(|| Error::Domain("cannot normalize an empty family".into()))?;
    let four = int(4);
    if min >= four {
        return Ok((Rational::one(), fam.clone()));
    }
    let scale = four / min;
    let out = fam.scaled(&scale);
    Ok((scale, out))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    A,
    B,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::A, Side::B];
}

/// Pieces of one source interval `(a_j, b_j]`.
///
/// `a_pieces[k - 1]` is the `k`-th left-anchored piece, `k = 1..=n`;
/// `b_pieces` mirror them from the right endpoint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDecomposition {
    pub source: Interval,
    pub n: u32,
    #[serde(with = "piece_list")]
    pub a_pieces: Vec<Option<Interval>>,
    #[serde(with = "piece_list")]
    pub b_pieces: Vec<Option<Interval>>,
    pub tilde_a: Interval,
    pub tilde_b: Interval,
}

impl SourceDecomposition {
    pub fn pieces(&self, side: Side) -> &[Option<Interval>] {
        match side {
            Side::A => &self.a_pieces,
            Side::B => &self.b_pieces,
        }
    }

    /// Piece `k` (1-based) on `side`.
    pub fn piece(&self, side: Side, k: u32) -> Option<&Interval> {
        if k == 0 {
            return None;
        }
        self.pieces(side).get(k as usize - 1).and_then(Option::as_ref)
    }

    pub fn tilde(&self, side: Side) -> &Interval {
        match side {
            Side::A => &self.tilde_a,
            Side::B => &self.tilde_b,
        }
    }

    /// Left anchor `a_{j,k} = a_j - 2 + 2^k`.
    pub fn a_anchor(&self, k: u32) -> Rational {
        self.source.left() - int(2) + pow2(k)
    }

    /// Right anchor `b_{j,k} = b_j + 2 - 2^k`.
    pub fn b_anchor(&self, k: u32) -> Rational {
        self.source.right() + int(2) - pow2(k)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicDecomposition {
    pub entries: Vec<SourceDecomposition>,
}

/// `n = max{n : 2^(n+1) <= len + 4}`.
pub fn scale_count(len: &Rational) -> u32 {
    let bound = (len + int(4)).floor().to_integer();
    assert!(bound >= BigInt::from(2), "length too small for a scale count");
    // 2^(n+1) <= bound < 2^(n+2)  <=>  n + 1 = bits(bound) - 1
    (bound.bits() - 2) as u32
}

/// Splits each interval into halves and tiles the halves with pieces of
/// length 2, 4, 8, ... anchored at the outer endpoints.
pub fn dyadic_decompose(fam: &DisjointFamily) -> Result<DyadicDecomposition> {
    let four = int(4);
    let mut entries = Vec::with_capacity(fam.len());
    for src in fam {
        let len = src.length();
        precondition!(
            len >= four,
            "interval {src} has length {len} < 4; normalize the family first"
        );
        let n = scale_count(&len);
        let mid = src.centre();
        let two = int(2);
        let a_anchor = |k: u32| src.left() - &two + pow2(k);
        let b_anchor = |k: u32| src.right() + &two - pow2(k);
        let mut a_pieces = Vec::with_capacity(n as usize);
        let mut b_pieces = Vec::with_capacity(n as usize);
        for k in 1..=n {
            let (lo, hi) = if k < n {
                (a_anchor(k), a_anchor(k + 1))
            } else {
                (a_anchor(k), mid.clone())
            };
            a_pieces.push(Interval::piece(lo, hi));
            let (lo, hi) = if k < n {
                (b_anchor(k + 1), b_anchor(k))
            } else {
                (mid.clone(), b_anchor(k))
            };
            b_pieces.push(Interval::piece(lo, hi));
        }
        let tilde_a = Interval::new(a_anchor(n), a_anchor(n + 1))?;
        let tilde_b = Interval::new(b_anchor(n + 1), b_anchor(n))?;
        entries.push(SourceDecomposition {
            source: src.clone(),
            n,
            a_pieces,
            b_pieces,
            tilde_a,
            tilde_b,
        });
    }
    Ok(DyadicDecomposition { entries })
}

impl DyadicDecomposition {
    /// Nonempty pieces on one side as `(j, k, piece)`, `k` 1-based.
    pub fn side_pieces(&self, side: Side) -> Vec<(usize, u32, &Interval)> {
        self.entries
            .iter()
            .enumerate()
            .flat_map(|(j, e)| {
                e.pieces(side)
                    .iter()
                    .enumerate()
                    .filter_map(move |(i, p)| p.as_ref().map(|p| (j, i as u32 + 1, p)))
            })
            .collect()
    }

    pub fn side_family(&self, side: Side) -> Vec<Interval> {
        self.side_pieces(side).into_iter().map(|(_, _, p)| p.clone()).collect()
    }

    pub fn max_scale(&self) -> u32 {
        self.entries.iter().map(|e| e.n).max().unwrap_or(0)
    }

    /// Checks every structural identity of the decomposition exactly and
    /// returns a description of each violation found.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (j, e) in self.entries.iter().enumerate() {
            let len = e.source.length();
            let n = e.n;
            let mid = e.source.centre();
            let l4 = &len + int(4);
            if !(pow2(n + 1) <= l4 && l4 < pow2(n + 2)) {
                out.push(format!("j={j}: n={n} is not maximal for length {len}"));
            }
            if e.a_pieces.len() != n as usize || e.b_pieces.len() != n as usize {
                out.push(format!("j={j}: piece lists do not have n={n} entries"));
                continue;
            }
            check_chain(
                &mut out,
                j,
                "a",
                e.source.left(),
                &mid,
                e.a_pieces.iter().map(Option::as_ref),
                false,
            );
            check_chain(
                &mut out,
                j,
                "b",
                e.source.right(),
                &mid,
                e.b_pieces.iter().map(Option::as_ref),
                true,
            );
            for side in Side::BOTH {
                let name = if side == Side::A { "a" } else { "b" };
                for k in 1..=n {
                    let piece = e.piece(side, k);
                    let plen = piece.map(Interval::length).unwrap_or_else(Rational::zero);
                    if k < n && plen != pow2(k) {
                        out.push(format!("j={j}: |{name}-piece {k}| = {plen}, expected 2^{k}"));
                    }
                    if k == n && (plen.is_negative() || plen >= pow2(n)) {
                        out.push(format!("j={j}: terminal {name}-piece length {plen} outside [0, 2^{n})"));
                    }
                    if k < n && piece.is_none() {
                        out.push(format!("j={j}: {name}-piece {k} < n is empty"));
                    }
                }
                let tilde = e.tilde(side);
                let expected = match side {
                    Side::A => (e.a_anchor(n), e.a_anchor(n + 1)),
                    Side::B => (e.b_anchor(n + 1), e.b_anchor(n)),
                };
                if (tilde.left(), tilde.right()) != (&expected.0, &expected.1) {
                    out.push(format!("j={j}: tilde {name} = {tilde} does not match its formula"));
                }
                if let Some(last) = e.piece(side, n) {
                    if !tilde.contains_interval(last) {
                        out.push(format!("j={j}: terminal {name}-piece {last} not inside {tilde}"));
                    }
                }
            }
            // The halves meet at the midpoint, so the a-chain ending at mid
            // and the b-chain starting there partition (a_j, b_j].
        }
        out
    }
}

fn check_chain<'a>(
    out: &mut Vec<String>,
    j: usize,
    name: &str,
    start: &Rational,
    mid: &Rational,
    pieces: impl Iterator<Item = Option<&'a Interval>>,
    leftwards: bool,
) {
    let mut cursor = start.clone();
    let mut seen_empty = false;
    for (i, p) in pieces.enumerate() {
        let Some(p) = p else {
            seen_empty = true;
            continue;
        };
        if seen_empty {
            out.push(format!("j={j}: {name}-piece {} follows an empty piece", i + 1));
        }
        let (near, far) = if leftwards {
            (p.right(), p.left())
        } else {
            (p.left(), p.right())
        };
        if near != &cursor {
            out.push(format!("j={j}: {name}-piece {} = {p} does not abut {cursor}", i + 1));
        }
        cursor = far.clone();
    }
    if &cursor != mid {
        out.push(format!("j={j}: {name}-pieces end at {cursor}, not at the midpoint {mid}"));
    }
}

/// Largest number of other doubled intervals that a doubled interval meets.
///
/// Sweep over doubled intervals sorted by left endpoint; each overlapping
/// pair is visited once.
pub fn well_distributed_degree(intervals: &[Interval]) -> usize {
    let mut doubled: Vec<Interval> = intervals.iter().map(Interval::doubled).collect();
    doubled.sort_by(|x, y| x.a.cmp(&y.a));
    let mut counts = vec![0usize; doubled.len()];
    for i in 0..doubled.len() {
        for j in i + 1..doubled.len() {
            if doubled[j].a >= doubled[i].b {
                break;
            }
            counts[i] += 1;
            counts[j] += 1;
        }
    }
    counts.into_iter().max().unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoubledPiece {
    pub j: usize,
    pub k: u32,
    pub doubled: Interval,
}

/// The doubled pieces of one side split by `k mod 3`.
///
/// `classes[l]` holds `2 I_{j,k}` for nonempty pieces with `k ≡ l (mod 3)`.
/// Disjointness is verified rather than assumed; `conflicts[l]` lists every
/// overlapping pair in class `l`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mod3Split {
    pub side: Side,
    pub classes: [Vec<DoubledPiece>; 3],
    pub disjoint: [bool; 3],
    pub conflicts: [Vec<((usize, u32), (usize, u32))>; 3],
    /// True when no conflict pairs two pieces of the same source interval.
    pub within_source_disjoint: bool,
}

impl Mod3Split {
    pub fn all_disjoint(&self) -> bool {
        self.disjoint.iter().all(|&d| d)
    }
}

pub fn split_mod3(dec: &DyadicDecomposition, side: Side) -> Mod3Split {
    let mut classes: [Vec<DoubledPiece>; 3] = Default::default();
    for (j, k, p) in dec.side_pieces(side) {
        classes[(k % 3) as usize].push(DoubledPiece {
            j,
            k,
            doubled: p.doubled(),
        });
    }
    let mut conflicts: [Vec<_>; 3] = Default::default();
    let mut within = true;
    for (l, class) in classes.iter_mut().enumerate() {
        class.sort_by(|x, y| x.doubled.a.cmp(&y.doubled.a).then(x.j.cmp(&y.j)));
        for i in 0..class.len() {
            for m in i + 1..class.len() {
                if class[m].doubled.a >= class[i].doubled.b {
                    break;
                }
                if class[i].j == class[m].j {
                    within = false;
                }
                let (p, q) = ((class[i].j, class[i].k), (class[m].j, class[m].k));
                conflicts[l].push(if p <= q { (p, q) } else { (q, p) });
            }
        }
        conflicts[l].sort();
    }
    let disjoint = [
        conflicts[0].is_empty(),
        conflicts[1].is_empty(),
        conflicts[2].is_empty(),
    ];
    Mod3Split {
        side,
        classes,
        disjoint,
        conflicts,
        within_source_disjoint: within,
    }
}

/// Per-source subintervals merged with the complementary pieces that make
/// each source fully covered, indexed left to right by `s = 1..=n_j + m_j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelativeDecomposition {
    pub sources: Vec<Interval>,
    /// `pieces[j][s - 1]`, absolute positions.
    pub pieces: Vec<Vec<Interval>>,
    /// Complementary pieces relative to the left endpoint, left to right.
    pub complement: Vec<Interval>,
    /// `n_j`: number of given pieces of source `j`.
    pub given_counts: Vec<usize>,
    /// `m_j`: number of complementary pieces of source `j`.
    pub complement_counts: Vec<usize>,
    /// Global index sets `K` and `L` (1-based positions).
    pub given_positions: BTreeSet<usize>,
    pub complement_positions: BTreeSet<usize>,
    /// `K_j` and `L_j`.
    pub given_positions_per_source: Vec<BTreeSet<usize>>,
    pub complement_positions_per_source: Vec<BTreeSet<usize>>,
}

/// Completes per-source subinterval lists whose positions relative to the
/// left endpoint agree across sources.
///
/// `given[j][k - 1]` is `I_{j,k}`. The complement of the relative pieces in
/// `(0, max_j |I_j|]` is cut at every relative right end `|I_j|`, so no such
/// point is interior to a complementary piece.
pub fn complete_relative_decomposition(
    fam: &DisjointFamily,
    given: &[Vec<Interval>],
) -> Result<RelativeDecomposition> {
    precondition!(
        given.len() == fam.len(),
        "{} given lists for {} intervals",
        given.len(),
        fam.len()
    );
    let sources = fam.intervals().to_vec();
    let mut relative: Vec<Option<Interval>> = Vec::new();
    for (j, (src, list)) in sources.iter().zip(given).enumerate() {
        let shift = -src.left().clone();
        let mut sorted: Vec<&Interval> = list.iter().collect();
        sorted.sort_by(|x, y| x.a.cmp(&y.a));
        for w in sorted.windows(2) {
            precondition!(w[0].b <= w[1].a, "given pieces {} and {} of source {j} overlap", w[0], w[1]);
        }
        for (k, piece) in list.iter().enumerate() {
            precondition!(src.contains_interval(piece), "given piece {piece} is not inside {src}");
            let rel = piece.translated(&shift);
            match relative.get(k) {
                None => relative.push(Some(rel)),
                Some(Some(prev)) if *prev != rel => {
                    return Err(Error::Precondition(format!(
                        "relative position of piece {} differs across sources: {prev} vs {rel}",
                        k + 1
                    )))
                }
                _ => {}
            }
        }
    }
    let relative: Vec<Interval> = relative.into_iter().flatten().collect();
    let lengths: Vec<Rational> = sources.iter().map(Interval::length).collect();

    // Pieces absent from a source must sit to the right of that source.
    for (j, (len, list)) in lengths.iter().zip(given).enumerate() {
        for (k, rel) in relative.iter().enumerate().skip(list.len()) {
            precondition!(
                rel.left() >= len,
                "relative piece {} = {rel} is absent from source {j} but falls inside (0, {len}]",
                k + 1
            );
        }
    }

    let max_len = lengths.iter().max().cloned().unwrap_or_else(Rational::zero);
    let mut sorted_rel: Vec<&Interval> = relative.iter().collect();
    sorted_rel.sort_by(|x, y| x.a.cmp(&y.a));
    let mut gaps: Vec<(Rational, Rational)> = Vec::new();
    let mut cursor = Rational::zero();
    for r in sorted_rel {
        if r.left() > &cursor {
            gaps.push((cursor.clone(), r.left().min(&max_len).clone()));
        }
        if r.right() > &cursor {
            cursor = r.right().clone();
        }
    }
    if cursor < max_len {
        gaps.push((cursor, max_len.clone()));
    }
    let cuts: BTreeSet<&Rational> = lengths.iter().collect();
    let mut complement = Vec::new();
    for (lo, hi) in gaps {
        let mut start = lo;
        for &c in cuts.range::<&Rational, _>((
            std::ops::Bound::Excluded(&start.clone()),
            std::ops::Bound::Excluded(&hi),
        )) {
            complement.push(Interval::new(start.clone(), c.clone())?);
            start = c.clone();
        }
        if start < hi {
            complement.push(Interval::new(start, hi)?);
        }
    }

    let mut pieces = Vec::with_capacity(sources.len());
    let mut given_counts = Vec::new();
    let mut complement_counts = Vec::new();
    let mut kj = Vec::new();
    let mut lj = Vec::new();
    for (j, src) in sources.iter().enumerate() {
        let m = complement.iter().take_while(|c| c.right() <= &lengths[j]).count();
        let mut merged: Vec<(Interval, bool)> = given[j]
            .iter()
            .map(|p| (p.clone(), true))
            .chain(complement[..m].iter().map(|c| (c.translated(src.left()), false)))
            .collect();
        merged.sort_by(|x, y| x.0.a.cmp(&y.0.a));
        let (mut k_set, mut l_set) = (BTreeSet::new(), BTreeSet::new());
        for (s, (_, is_given)) in merged.iter().enumerate() {
            if *is_given {
                k_set.insert(s + 1);
            } else {
                l_set.insert(s + 1);
            }
        }
        given_counts.push(given[j].len());
        complement_counts.push(m);
        pieces.push(merged.into_iter().map(|(p, _)| p).collect());
        kj.push(k_set);
        lj.push(l_set);
    }
    let given_positions: BTreeSet<usize> = kj.iter().flatten().copied().collect();
    let complement_positions: BTreeSet<usize> = lj.iter().flatten().copied().collect();
    if let Some(s) = given_positions.intersection(&complement_positions).next() {
        return Err(Error::Precondition(format!(
            "position {s} is a given piece for one source and a complement piece for another"
        )));
    }
    Ok(RelativeDecomposition {
        sources,
        pieces,
        complement,
        given_counts,
        complement_counts,
        given_positions,
        complement_positions,
        given_positions_per_source: kj,
        complement_positions_per_source: lj,
    })
}

impl RelativeDecomposition {
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut reference: Vec<Interval> = Vec::new();
        for (j, (src, list)) in self.sources.iter().zip(&self.pieces).enumerate() {
            let mut cursor = src.left().clone();
            for p in list {
                if p.left() != &cursor {
                    out.push(format!("j={j}: piece {p} does not abut {cursor}"));
                }
                cursor = p.right().clone();
            }
            if &cursor != src.right() {
                out.push(format!("j={j}: pieces end at {cursor}, not {}", src.right()));
            }
            let shift = -src.left().clone();
            for (s, p) in list.iter().enumerate() {
                let rel = p.translated(&shift);
                match reference.get(s) {
                    None => reference.push(rel),
                    Some(r) if *r != rel => {
                        out.push(format!("j={j}: piece {} relative position {rel} differs from {r}", s + 1))
                    }
                    _ => {}
                }
            }
            let total = self.given_counts[j] + self.complement_counts[j];
            let k_expected: BTreeSet<usize> = self.given_positions.range(1..=total).copied().collect();
            let l_expected: BTreeSet<usize> =
                self.complement_positions.range(1..=total).copied().collect();
            if k_expected != self.given_positions_per_source[j] {
                out.push(format!("j={j}: K_j differs from K ∩ [1, {total}]"));
            }
            if l_expected != self.complement_positions_per_source[j] {
                out.push(format!("j={j}: L_j differs from L ∩ [1, {total}]"));
            }
        }
        out
    }
}

// Serialization: an interval is the quadruple [num_a, den_a, num_b, den_b];
// integers that do not fit in i64 are written as decimal strings.

fn ser_bigint<S: SerializeSeq>(seq: &mut S, x: &BigInt) -> std::result::Result<(), S::Error> {
    match x.to_i64() {
        Some(v) => seq.serialize_element(&v),
        None => seq.serialize_element(&x.to_string()),
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(4))?;
        ser_bigint(&mut seq, self.a.numer())?;
        ser_bigint(&mut seq, self.a.denom())?;
        ser_bigint(&mut seq, self.b.numer())?;
        ser_bigint(&mut seq, self.b.denom())?;
        seq.end()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum IntRepr {
    Int(i64),
    Text(String),
}

impl IntRepr {
    fn into_bigint<E: de::Error>(self) -> std::result::Result<BigInt, E> {
        match self {
            IntRepr::Int(v) => Ok(BigInt::from(v)),
            IntRepr::Text(t) => t.parse().map_err(|_| E::custom(format!("bad integer {t:?}"))),
        }
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct Quad;
        impl<'de> Visitor<'de> for Quad {
            type Value = Interval;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("[num_a, den_a, num_b, den_b]")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Interval, A::Error> {
                let mut v = Vec::with_capacity(4);
                while let Some(x) = seq.next_element::<IntRepr>()? {
                    v.push(x.into_bigint::<A::Error>()?);
                }
                if v.len() != 4 {
                    return Err(de::Error::invalid_length(v.len(), &self));
                }
                if v[1].is_zero() || v[3].is_zero() {
                    return Err(de::Error::custom("zero denominator"));
                }
                let b = Rational::new(v[2].clone(), v[3].clone());
                let a = Rational::new(v[0].clone(), v[1].clone());
                Interval::new(a, b).map_err(de::Error::custom)
            }
        }
        d.deserialize_seq(Quad)
    }
}

impl Serialize for DisjointFamily {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.intervals.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DisjointFamily {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<Interval>::deserialize(d)?;
        DisjointFamily::new(v).map_err(de::Error::custom)
    }
}

/// Piece lists with explicit `"empty"` markers.
mod piece_list {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum PieceRepr {
        Piece(Interval),
        Marker(String),
    }

    pub fn serialize<S: Serializer>(v: &[Option<Interval>], s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for p in v {
            match p {
                Some(i) => seq.serialize_element(i)?,
                None => seq.serialize_element("empty")?,
            }
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Option<Interval>>, D::Error> {
        Vec::<PieceRepr>::deserialize(d)?
            .into_iter()
            .map(|p| match p {
                PieceRepr::Piece(i) => Ok(Some(i)),
                PieceRepr::Marker(m) if m == "empty" => Ok(None),
                PieceRepr::Marker(m) => Err(de::Error::custom(format!("unknown piece marker {m:?}"))),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(a: i64, b: i64) -> Interval {
        Interval::from_ints(a, b).unwrap()
    }

    fn ivr(a: (i64, i64), b: (i64, i64)) -> Interval {
        Interval::new(rat(a.0, a.1), rat(b.0, b.1)).unwrap()
    }

    #[test]
    fn half_open_semantics() {
        assert!(!iv(0, 1).intersects(&iv(1, 2)));
        assert!(iv(0, 2).intersects(&iv(1, 3)));
        assert!(iv(0, 1).contains(&int(1)));
        assert!(!iv(0, 1).contains(&int(0)));
        assert!(Interval::from_ints(1, 1).is_err());
        assert_eq!(iv(0, 2).doubled(), iv(-1, 3));
    }

    #[test]
    fn family_rejects_overlap() {
        assert!(DisjointFamily::from_ints(&[(0, 2), (1, 3)]).is_err());
        let f = DisjointFamily::from_ints(&[(2, 3), (0, 1)]).unwrap();
        assert_eq!(f.intervals()[0], iv(0, 1));
    }

    #[test]
    fn normalize_examples() {
        let f = DisjointFamily::from_ints(&[(0, 1), (2, 3)]).unwrap();
        let (s, g) = normalize_family(&f).unwrap();
        assert_eq!(s, int(4));
        assert_eq!(g.intervals(), &[iv(0, 4), iv(8, 12)]);

        let f = DisjointFamily::from_ints(&[(0, 4)]).unwrap();
        let (s, g) = normalize_family(&f).unwrap();
        assert_eq!(s, int(1));
        assert_eq!(g, f);

        assert!(matches!(
            normalize_family(&DisjointFamily::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn normalize_is_idempotent() {
        let f = DisjointFamily::new(vec![ivr((1, 3), (1, 2)), ivr((2, 1), (9, 4))]).unwrap();
        let (_, once) = normalize_family(&f).unwrap();
        let (s2, twice) = normalize_family(&once).unwrap();
        assert_eq!(s2, int(1));
        assert_eq!(once, twice);
    }

    #[test]
    fn decompose_zero_twenty() {
        let dec = dyadic_decompose(&DisjointFamily::from_ints(&[(0, 20)]).unwrap()).unwrap();
        let e = &dec.entries[0];
        assert_eq!(e.n, 3);
        assert_eq!(e.a_pieces, vec![Some(iv(0, 2)), Some(iv(2, 6)), Some(iv(6, 10))]);
        assert_eq!(e.b_pieces, vec![Some(iv(18, 20)), Some(iv(14, 18)), Some(iv(10, 14))]);
        assert_eq!(e.tilde_a, iv(6, 14));
        assert_eq!(e.tilde_b, iv(6, 14));
        assert!(dec.invariant_violations().is_empty());
    }

    #[test]
    fn decompose_minimal_and_empty_terminal() {
        let dec = dyadic_decompose(&DisjointFamily::from_ints(&[(0, 4)]).unwrap()).unwrap();
        let e = &dec.entries[0];
        assert_eq!(e.n, 2);
        assert_eq!(e.a_pieces, vec![Some(iv(0, 2)), None]);
        assert_eq!(e.b_pieces, vec![Some(iv(2, 4)), None]);
        assert!(dec.invariant_violations().is_empty());

        let dec = dyadic_decompose(&DisjointFamily::from_ints(&[(0, 12)]).unwrap()).unwrap();
        let e = &dec.entries[0];
        assert_eq!(e.n, 3);
        assert_eq!(e.a_pieces, vec![Some(iv(0, 2)), Some(iv(2, 6)), None]);
        assert!(dec.invariant_violations().is_empty());
    }

    #[test]
    fn decompose_requires_length_four() {
        let f = DisjointFamily::from_ints(&[(0, 3)]).unwrap();
        assert!(matches!(dyadic_decompose(&f), Err(Error::Precondition(_))));
    }

    #[test]
    fn invariant_checker_catches_tampering() {
        let mut dec = dyadic_decompose(&DisjointFamily::from_ints(&[(0, 20)]).unwrap()).unwrap();
        dec.entries[0].a_pieces[1] = Some(iv(2, 7));
        assert!(!dec.invariant_violations().is_empty());
    }

    #[test]
    fn degree_examples() {
        assert_eq!(well_distributed_degree(&[iv(0, 2), iv(2, 6), iv(6, 10)]), 2);
        assert_eq!(well_distributed_degree(&[iv(0, 1)]), 0);
        assert_eq!(well_distributed_degree(&[iv(0, 1), iv(10, 11)]), 0);
        assert_eq!(well_distributed_degree(&[]), 0);
    }

    #[test]
    fn mod3_single_source() {
        let dec = dyadic_decompose(&DisjointFamily::from_ints(&[(0, 36)]).unwrap()).unwrap();
        let split = split_mod3(&dec, Side::A);
        let ivs = |l: usize| -> Vec<Interval> { split.classes[l].iter().map(|p| p.doubled.clone()).collect() };
        assert_eq!(ivs(1), vec![iv(-1, 3), iv(12, 20)]);
        assert_eq!(ivs(2), vec![iv(0, 8)]);
        assert_eq!(ivs(0), vec![iv(2, 18)]);
        assert!(split.all_disjoint());
        assert!(split.within_source_disjoint);
    }

    #[test]
    fn mod3_two_sources() {
        let dec = dyadic_decompose(&DisjointFamily::from_ints(&[(0, 4), (4, 8)]).unwrap()).unwrap();
        let split = split_mod3(&dec, Side::A);
        let ivs: Vec<Interval> = split.classes[1].iter().map(|p| p.doubled.clone()).collect();
        assert_eq!(ivs, vec![iv(-1, 3), iv(3, 7)]);
        assert!(split.classes[0].is_empty() && split.classes[2].is_empty());
        assert!(split.all_disjoint());
    }

    #[test]
    fn mod3_reports_cross_source_overlap() {
        // Generated decompositions keep classes apart; a hand-built one with
        // two sources whose first pieces nearly coincide must be flagged.
        let mut dec = dyadic_decompose(&DisjointFamily::from_ints(&[(0, 20), (30, 50)]).unwrap()).unwrap();
        dec.entries[1].a_pieces[0] = Some(iv(2, 3));
        let split = split_mod3(&dec, Side::A);
        assert!(!split.disjoint[1]);
        assert!(split.conflicts[1].contains(&((0, 1), (1, 1))));
        assert!(split.disjoint[0] && split.disjoint[2]);
    }

    #[test]
    fn relative_completion_example() {
        let fam = DisjointFamily::from_ints(&[(0, 8), (10, 18)]).unwrap();
        let given = vec![vec![iv(1, 2)], vec![iv(11, 12)]];
        let rd = complete_relative_decomposition(&fam, &given).unwrap();
        assert_eq!(rd.complement, vec![iv(0, 1), iv(2, 8)]);
        assert_eq!(rd.complement_counts, vec![2, 2]);
        assert_eq!(rd.pieces[0], vec![iv(0, 1), iv(1, 2), iv(2, 8)]);
        assert_eq!(rd.pieces[1], vec![iv(10, 11), iv(11, 12), iv(12, 18)]);
        assert_eq!(rd.given_positions, BTreeSet::from([2]));
        assert_eq!(rd.complement_positions, BTreeSet::from([1, 3]));
        assert!(rd.invariant_violations().is_empty());
    }

    #[test]
    fn relative_completion_of_full_halves_adds_nothing() {
        let fam = DisjointFamily::from_ints(&[(0, 20), (30, 50)]).unwrap();
        let dec = dyadic_decompose(&fam).unwrap();
        let halves = DisjointFamily::from_ints(&[(0, 10), (30, 40)]).unwrap();
        let given: Vec<Vec<Interval>> = dec
            .entries
            .iter()
            .map(|e| e.a_pieces.iter().flatten().cloned().collect())
            .collect();
        let rd = complete_relative_decomposition(&halves, &given).unwrap();
        assert!(rd.complement_positions.is_empty());
        assert_eq!(rd.pieces, given);
        assert!(rd.invariant_violations().is_empty());
    }

    #[test]
    fn relative_completion_cuts_at_each_length() {
        let fam = DisjointFamily::from_ints(&[(0, 6), (10, 20)]).unwrap();
        let given = vec![vec![iv(0, 2)], vec![iv(10, 12)]];
        let rd = complete_relative_decomposition(&fam, &given).unwrap();
        assert_eq!(rd.complement, vec![iv(2, 6), iv(6, 10)]);
        assert_eq!(rd.complement_counts, vec![1, 2]);
        assert!(rd.invariant_violations().is_empty());
    }

    #[test]
    fn relative_completion_rejects_bad_input() {
        let fam = DisjointFamily::from_ints(&[(0, 8), (10, 18)]).unwrap();
        let mismatched = vec![vec![iv(1, 2)], vec![iv(12, 13)]];
        assert!(matches!(
            complete_relative_decomposition(&fam, &mismatched),
            Err(Error::Precondition(_))
        ));
        let overlapping = vec![vec![iv(1, 3), iv(2, 4)], vec![iv(11, 13), iv(12, 14)]];
        assert!(matches!(
            complete_relative_decomposition(&fam, &overlapping),
            Err(Error::Precondition(_))
        ));
        let outside = vec![vec![iv(7, 9)], vec![iv(17, 19)]];
        assert!(complete_relative_decomposition(&fam, &outside).is_err());
    }

    #[test]
    fn serde_round_trip_with_empty_markers() {
        let dec = dyadic_decompose(&DisjointFamily::from_ints(&[(0, 12)]).unwrap()).unwrap();
        let text = serde_json::to_string(&dec).unwrap();
        assert!(text.contains("\"empty\""));
        assert!(text.contains("[0,1,2,1]"));
        let back: DyadicDecomposition = serde_json::from_str(&text).unwrap();
        assert_eq!(back, dec);
    }

    #[test]
    fn serde_big_integers_as_strings() {
        let big = Rational::from_integer(BigInt::one() << 80usize);
        let i = Interval::new(Rational::zero(), big).unwrap();
        let text = serde_json::to_string(&i).unwrap();
        assert!(text.contains("\"1208925819614629174706176\""));
        let back: Interval = serde_json::from_str(&text).unwrap();
        assert_eq!(back, i);
    }
}
