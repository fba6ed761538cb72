//! Countably-indexed nonnegative integer matrices.
//!
//! A [`CountableMatrix`] is presented as a parametric *tail rule* covering
//! all but finitely many cells, plus a finite *exceptional* block that
//! overrides the rule cell by cell, plus an optional affine layer
//! `k·M + ℓ·E`. Entries are therefore evaluable exactly at any `(i, j)`,
//! and every column has finite support, which is what makes path counting
//! on certified windows possible (see [`crate::coeffs`]).
//!
//! The tail rules cover the shapes that actually occur for transition
//! matrices of countably-piecewise-monotone Markov interval maps:
//!
//! * `banded` — constant stencil along diagonals, e.g. the two-sided
//!   matrix with `a` below and `b` above the diagonal;
//! * `row_formula` — named row patterns such as the full-tent matrix
//!   (full first row, weighted subdiagonal);
//! * `upper_hull` — self-similar upper-triangular hulls where deleting
//!   the first row and column reproduces the matrix.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::IndexSet;

/// Whether `n` lies in the sparse index set `{1,2,3,4} ∪ {3^k+1, 3^k+2 : k ≥ 2}`.
fn in_b1(n: u64) -> bool {
    if (1..=4).contains(&n) {
        return true;
    }
    for d in 1..=2u64 {
        if n > d {
            let mut p = 9u64; // 3^2
            while p <= n - d {
                if p == n - d {
                    return true;
                }
                match p.checked_mul(3) {
                    Some(next) => p = next,
                    None => break,
                }
            }
        }
    }
    false
}

/// Membership rule for the "low" level of a two-level integer sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IndexRule {
    /// `{1, …, n}`
    UpTo { n: u64 },
    /// `{1,2,3,4} ∪ {3^k+1, 3^k+2 : k ≥ 2}`
    B1,
    /// explicit finite set
    List { values: Vec<u64> },
}

impl IndexRule {
    pub fn contains(&self, n: u64) -> bool {
        match self {
            IndexRule::UpTo { n: bound } => n >= 1 && n <= *bound,
            IndexRule::B1 => in_b1(n),
            IndexRule::List { values } => values.contains(&n),
        }
    }
}

/// Closed-form integer sequence `n ↦ a_n`, used for subdiagonal weights and
/// fan-out rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sequence {
    Const { value: u64 },
    /// `a_n = low` on `low_set`, `high` elsewhere.
    TwoLevel {
        low: u64,
        high: u64,
        low_set: IndexRule,
    },
    /// `a_n = values[n-1]` for `1 ≤ n ≤ values.len()`, `beyond` afterwards
    /// (and for `n = 0`).
    Explicit { values: Vec<u64>, beyond: u64 },
    /// `a_n = base^n`
    Geometric { base: u64 },
}

/// Supremum of a sequence, if finite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SeqBound {
    Finite(BigUint),
    Unbounded,
}

impl Sequence {
    pub fn value(&self, n: u64) -> BigUint {
        match self {
            Sequence::Const { value } => BigUint::from(*value),
            Sequence::TwoLevel { low, high, low_set } => {
                BigUint::from(if low_set.contains(n) { *low } else { *high })
            }
            Sequence::Explicit { values, beyond } => {
                if n >= 1 && (n as usize) <= values.len() {
                    BigUint::from(values[n as usize - 1])
                } else {
                    BigUint::from(*beyond)
                }
            }
            Sequence::Geometric { base } => BigUint::from(*base).pow(n as u32),
        }
    }

    pub fn value_u64(&self, n: u64) -> Option<u64> {
        self.value(n).to_u64()
    }

    pub fn sup(&self) -> SeqBound {
        match self {
            Sequence::Const { value } => SeqBound::Finite(BigUint::from(*value)),
            Sequence::TwoLevel { low, high, .. } => {
                SeqBound::Finite(BigUint::from((*low).max(*high)))
            }
            Sequence::Explicit { values, beyond } => SeqBound::Finite(BigUint::from(
                values.iter().copied().max().unwrap_or(0).max(*beyond),
            )),
            Sequence::Geometric { base } => {
                if *base <= 1 {
                    SeqBound::Finite(BigUint::from(*base))
                } else {
                    SeqBound::Unbounded
                }
            }
        }
    }

    /// All values strictly positive?
    pub fn is_positive(&self) -> bool {
        match self {
            Sequence::Const { value } => *value >= 1,
            Sequence::TwoLevel { low, high, .. } => *low >= 1 && *high >= 1,
            Sequence::Explicit { values, beyond } => {
                *beyond >= 1 && values.iter().all(|&v| v >= 1)
            }
            Sequence::Geometric { base } => *base >= 1,
        }
    }

    /// The constant the sequence eventually takes, when that is decidable
    /// from the rule alone.
    pub fn eventually_constant(&self) -> Option<u64> {
        match self {
            Sequence::Const { value } => Some(*value),
            Sequence::TwoLevel { high, low_set, .. } => match low_set {
                IndexRule::UpTo { .. } | IndexRule::List { .. } => Some(*high),
                IndexRule::B1 => None,
            },
            Sequence::Explicit { beyond, .. } => Some(*beyond),
            Sequence::Geometric { base } => {
                if *base <= 1 {
                    Some(*base)
                } else {
                    None
                }
            }
        }
    }
}

/// Named row-pattern rules.
///
/// Both `tent_perturbation` and `first_row_fanout` have a full first row;
/// all other rows carry a single weight on the subdiagonal.
/// `tent_split_base` is the tent pattern after splitting the base element
/// in two at a point mapping onto the old base/successor boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum RowFormula {
    /// row 0: all ones; row `n ≥ 1`: `a_n` at column `n−1`.
    TentPerturbation { seq: Sequence },
    /// row 0: `1 + 2·a_j` at column `j` (`a_0` pinned to 0); row `n ≥ 1`: 1 at `n−1`.
    FirstRowFanout { seq: Sequence },
    /// rows 0 and 2 target the split base pair `{0, 1}`; row 1 fans out over
    /// columns `≥ 2`; rows `n ≥ 3` carry `a_{n−1}` at `n−1`.
    TentSplitBase { seq: Sequence },
}

impl RowFormula {
    fn seq(&self) -> &Sequence {
        match self {
            RowFormula::TentPerturbation { seq }
            | RowFormula::FirstRowFanout { seq }
            | RowFormula::TentSplitBase { seq } => seq,
        }
    }
}

/// Tail rule of a [`CountableMatrix`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TailRule {
    Banded {
        stencil: BTreeMap<i64, u64>,
    },
    RowFormula {
        #[serde(flatten)]
        formula: RowFormula,
    },
    /// `m_ij = hull_value` for `j ≥ i + hull_offset`, `subdiagonal` at
    /// `j = i − 1` below the hull, 0 elsewhere. One-sided only.
    UpperHull {
        hull_offset: i64,
        hull_value: u64,
        subdiagonal: u64,
    },
}

/// Affine layer `entry ↦ scale·entry + shift·δ_ij`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Affine {
    pub scale: u64,
    pub shift: u64,
}

impl Default for Affine {
    fn default() -> Self {
        Affine { scale: 1, shift: 0 }
    }
}

impl Affine {
    fn is_identity(&self) -> bool {
        self.scale == 1 && self.shift == 0
    }
}

fn affine_is_identity(a: &Affine) -> bool {
    a.is_identity()
}

mod exc_serde {
    use super::*;
    use serde::de::Error as DeError;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<(i64, i64), u64>,
        ser: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let cells: Vec<(i64, i64, u64)> = map.iter().map(|(&(i, j), &v)| (i, j, v)).collect();
        serde::Serialize::serialize(&cells, ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        de: D,
    ) -> std::result::Result<BTreeMap<(i64, i64), u64>, D::Error> {
        let cells: Vec<(i64, i64, u64)> = serde::Deserialize::deserialize(de)?;
        let mut map = BTreeMap::new();
        for (i, j, v) in cells {
            if map.insert((i, j), v).is_some() {
                return Err(D::Error::custom(format!(
                    "duplicate exceptional cell ({i}, {j})"
                )));
            }
        }
        Ok(map)
    }
}

/// Lazily evaluated nonnegative integer matrix over a countable index set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountableMatrix {
    pub index_set: IndexSet,
    pub tail_rule: TailRule,
    #[serde(with = "exc_serde", default, skip_serializing_if = "BTreeMap::is_empty")]
    exceptional: BTreeMap<(i64, i64), u64>,
    pub finite_rows: bool,
    #[serde(default, skip_serializing_if = "affine_is_identity")]
    affine: Affine,
}

/// Row support of a matrix row.
#[derive(Debug, Clone)]
pub enum RowSupport {
    Finite(Vec<(i64, BigUint)>),
    /// The row has infinite support (full rows, hull rows).
    Infinite,
}

/// Result of a column-norm probe.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnNorm {
    /// Supremum of column sums, attained or approached within the tail rule.
    Exact(BigUint),
    /// Lower bound only; the tail structure gave no closure.
    LowerBound(BigUint),
    /// Column sums provably grow without bound.
    Unbounded,
}

impl CountableMatrix {
    pub fn new(index_set: IndexSet, tail_rule: TailRule) -> Result<Self> {
        let m = CountableMatrix {
            index_set,
            tail_rule,
            exceptional: BTreeMap::new(),
            finite_rows: false,
            affine: Affine::default(),
        };
        m.validated()
    }

    fn validated(mut self) -> Result<Self> {
        match &self.tail_rule {
            TailRule::Banded { .. } => {
                self.finite_rows = true;
            }
            TailRule::RowFormula { formula } => {
                if !formula.seq().is_positive() {
                    return Err(Error::Descriptor(
                        "row formula weight sequence must be positive".into(),
                    ));
                }
                if self.index_set != IndexSet::OneSided {
                    return Err(Error::Descriptor(
                        "row formulas are defined over the one-sided index set".into(),
                    ));
                }
                self.finite_rows = false;
            }
            TailRule::UpperHull { hull_value, .. } => {
                if self.index_set != IndexSet::OneSided {
                    return Err(Error::Descriptor(
                        "upper hull matrices are defined over the one-sided index set".into(),
                    ));
                }
                if *hull_value == 0 {
                    return Err(Error::Descriptor("hull value must be positive".into()));
                }
                self.finite_rows = false;
            }
        }
        if self.affine.scale == 0 {
            return Err(Error::InvalidParam("affine scale must be ≥ 1".into()));
        }
        Ok(self)
    }

    pub fn with_exceptional(mut self, cells: &[(i64, i64, u64)]) -> Result<Self> {
        for &(i, j, v) in cells {
            self.index_set.check(i)?;
            self.index_set.check(j)?;
            self.exceptional.insert((i, j), v);
        }
        Ok(self)
    }

    pub fn exceptional_cells(&self) -> impl Iterator<Item = (i64, i64, u64)> + '_ {
        self.exceptional.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    pub fn affine_part(&self) -> (u64, u64) {
        (self.affine.scale, self.affine.shift)
    }

    /// Identity matrix `E` over `index_set` (banded `{0: 1}`).
    pub fn identity(index_set: IndexSet) -> Self {
        CountableMatrix::new(index_set, TailRule::Banded { stencil: [(0, 1)].into() }).unwrap()
    }

    /// A finite matrix embedded at the start of the one-sided index set
    /// (zero tail, all entries exceptional).
    pub fn from_finite(f: &FiniteMatrix) -> Result<Self> {
        let mut cells = Vec::new();
        for r in 0..f.size {
            for c in 0..f.size {
                let v = f.get(r, c);
                if !v.is_zero() {
                    let v = v
                        .to_u64()
                        .ok_or_else(|| Error::InvalidParam("entry exceeds u64".into()))?;
                    cells.push((r as i64, c as i64, v));
                }
            }
        }
        CountableMatrix::new(IndexSet::OneSided, TailRule::Banded { stencil: BTreeMap::new() })?
            .with_exceptional(&cells)
    }

    /// Two-sided banded matrix with `a` below and `b` above the diagonal.
    pub fn banded_z(a: u64, b: u64) -> Result<Self> {
        if a == 0 || b == 0 {
            return Err(Error::InvalidParam("banded parameters must be ≥ 1".into()));
        }
        CountableMatrix::new(
            IndexSet::TwoSided,
            TailRule::Banded { stencil: [(-1, a), (1, b)].into() },
        )
    }

    /// One-sided matrix with `a` below, `b` above the diagonal, and first
    /// row `(0, c, 0, …)`.
    pub fn boundary_n(a: u64, b: u64, c: u64) -> Result<Self> {
        if a == 0 || b == 0 || c == 0 {
            return Err(Error::InvalidParam("boundary parameters must be ≥ 1".into()));
        }
        CountableMatrix::new(
            IndexSet::OneSided,
            TailRule::Banded { stencil: [(-1, a), (1, b)].into() },
        )?
        .with_exceptional(&[(0, 1, c)])
    }

    /// Full-tent transition matrix with subdiagonal weights `a_n`.
    pub fn tent(seq: Sequence) -> Result<Self> {
        CountableMatrix::new(
            IndexSet::OneSided,
            TailRule::RowFormula { formula: RowFormula::TentPerturbation { seq } },
        )
    }

    /// Fan-out matrix with first row `1, 1+2a_1, 1+2a_2, …` and unit subdiagonal.
    pub fn first_row_fanout(seq: Sequence) -> Result<Self> {
        CountableMatrix::new(
            IndexSet::OneSided,
            TailRule::RowFormula { formula: RowFormula::FirstRowFanout { seq } },
        )
    }

    /// Hull matrix with ones from the subdiagonal rightwards.
    pub fn bt12_matrix() -> Self {
        CountableMatrix::new(
            IndexSet::OneSided,
            TailRule::UpperHull { hull_offset: -1, hull_value: 1, subdiagonal: 0 },
        )
        .unwrap()
    }

    /// Hull matrix with fours from the diagonal rightwards and a unit subdiagonal.
    pub fn bosou_factor_matrix() -> Self {
        CountableMatrix::new(
            IndexSet::OneSided,
            TailRule::UpperHull { hull_offset: 0, hull_value: 4, subdiagonal: 1 },
        )
        .unwrap()
    }

    /// Base entry before the affine layer: exceptional block over tail rule.
    fn base_entry(&self, i: i64, j: i64) -> BigUint {
        if let Some(&v) = self.exceptional.get(&(i, j)) {
            return BigUint::from(v);
        }
        match &self.tail_rule {
            TailRule::Banded { stencil } => {
                BigUint::from(stencil.get(&(j - i)).copied().unwrap_or(0))
            }
            TailRule::RowFormula { formula } => match formula {
                RowFormula::TentPerturbation { seq } => {
                    if i == 0 {
                        BigUint::one()
                    } else if j == i - 1 {
                        seq.value(i as u64)
                    } else {
                        BigUint::zero()
                    }
                }
                RowFormula::FirstRowFanout { seq } => {
                    if i == 0 {
                        if j == 0 {
                            BigUint::one()
                        } else {
                            BigUint::one() + BigUint::from(2u32) * seq.value(j as u64)
                        }
                    } else if j == i - 1 {
                        BigUint::one()
                    } else {
                        BigUint::zero()
                    }
                }
                RowFormula::TentSplitBase { seq } => match i {
                    0 => {
                        if j == 0 || j == 1 {
                            BigUint::one()
                        } else {
                            BigUint::zero()
                        }
                    }
                    1 => {
                        if j >= 2 {
                            BigUint::one()
                        } else {
                            BigUint::zero()
                        }
                    }
                    2 => {
                        if j == 0 || j == 1 {
                            seq.value(1)
                        } else {
                            BigUint::zero()
                        }
                    }
                    _ => {
                        if j == i - 1 {
                            seq.value((i - 1) as u64)
                        } else {
                            BigUint::zero()
                        }
                    }
                },
            },
            TailRule::UpperHull { hull_offset, hull_value, subdiagonal } => {
                if j >= i + hull_offset {
                    BigUint::from(*hull_value)
                } else if j == i - 1 {
                    BigUint::from(*subdiagonal)
                } else {
                    BigUint::zero()
                }
            }
        }
    }

    /// Entry `m_ij`. Pure and total on the declared index set.
    pub fn entry(&self, i: i64, j: i64) -> Result<BigUint> {
        self.index_set.check(i)?;
        self.index_set.check(j)?;
        let mut v = self.base_entry(i, j) * BigUint::from(self.affine.scale);
        if i == j {
            v += BigUint::from(self.affine.shift);
        }
        Ok(v)
    }

    /// `k·M + ℓ·E` as a new descriptor.
    pub fn affine_transform(&self, k: u64, l: u64) -> Result<CountableMatrix> {
        if k == 0 {
            return Err(Error::InvalidParam("affine scale k must be ≥ 1".into()));
        }
        let mut out = self.clone();
        out.affine = Affine {
            scale: self
                .affine
                .scale
                .checked_mul(k)
                .ok_or_else(|| Error::InvalidParam("affine scale overflow".into()))?,
            shift: self
                .affine
                .shift
                .checked_mul(k)
                .and_then(|s| s.checked_add(l))
                .ok_or_else(|| Error::InvalidParam("affine shift overflow".into()))?,
        };
        Ok(out)
    }

    /// Support of row `i`, or `Infinite` for full/hull rows.
    pub fn row_support(&self, i: i64) -> Result<RowSupport> {
        self.index_set.check(i)?;
        let candidates: Vec<i64> = match &self.tail_rule {
            TailRule::Banded { stencil } => stencil
                .keys()
                .map(|off| i + off)
                .filter(|&j| self.index_set.contains(j))
                .collect(),
            TailRule::RowFormula { formula } => match formula {
                RowFormula::TentPerturbation { .. } | RowFormula::FirstRowFanout { .. } => {
                    if i == 0 {
                        return Ok(RowSupport::Infinite);
                    }
                    vec![i - 1]
                }
                RowFormula::TentSplitBase { .. } => match i {
                    0 => vec![0, 1],
                    1 => return Ok(RowSupport::Infinite),
                    2 => vec![0, 1],
                    _ => vec![i - 1],
                },
            },
            TailRule::UpperHull { .. } => return Ok(RowSupport::Infinite),
        };
        let mut out: Vec<(i64, BigUint)> = Vec::new();
        let mut cols: Vec<i64> = candidates;
        for (&(r, c), _) in self.exceptional.iter() {
            if r == i {
                cols.push(c);
            }
        }
        if self.affine.shift > 0 {
            cols.push(i);
        }
        cols.sort_unstable();
        cols.dedup();
        for j in cols {
            let v = self.entry(i, j)?;
            if !v.is_zero() {
                out.push((j, v));
            }
        }
        Ok(RowSupport::Finite(out))
    }

    /// Rows `i` with `m_ij > 0`. Finite for every supported tail rule; this is
    /// what certifies path-count windows.
    pub fn preds(&self, j: i64) -> Result<Vec<(i64, BigUint)>> {
        self.index_set.check(j)?;
        let mut rows: Vec<i64> = match &self.tail_rule {
            TailRule::Banded { stencil } => stencil
                .keys()
                .map(|off| j - off)
                .filter(|&i| self.index_set.contains(i))
                .collect(),
            TailRule::RowFormula { formula } => match formula {
                RowFormula::TentPerturbation { .. } | RowFormula::FirstRowFanout { .. } => {
                    vec![0, j + 1]
                }
                RowFormula::TentSplitBase { .. } => {
                    if j <= 1 {
                        vec![0, 2]
                    } else {
                        vec![1, j + 1]
                    }
                }
            },
            TailRule::UpperHull { hull_offset, subdiagonal, .. } => {
                let top = j - hull_offset; // rows 0..=top have j on/above their hull
                let mut v: Vec<i64> = (0..=top.max(-1)).collect();
                if *subdiagonal > 0 {
                    v.push(j + 1);
                }
                v
            }
        };
        for (&(r, c), _) in self.exceptional.iter() {
            if c == j {
                rows.push(r);
            }
        }
        if self.affine.shift > 0 {
            rows.push(j);
        }
        rows.sort_unstable();
        rows.dedup();
        let mut out = Vec::new();
        for i in rows {
            if !self.index_set.contains(i) {
                continue;
            }
            let v = self.entry(i, j)?;
            if !v.is_zero() {
                out.push((i, v));
            }
        }
        Ok(out)
    }

    /// `N×N` truncation over the first `N` enumerated indices.
    pub fn truncate(&self, n: usize) -> Result<FiniteMatrix> {
        if n == 0 {
            return Err(Error::InvalidParam("truncation size must be ≥ 1".into()));
        }
        let window = self.index_set.window(n);
        let mut data = vec![BigUint::zero(); n * n];
        for (p, &i) in window.iter().enumerate() {
            // fill row p from its support to avoid touching all n² cells
            match self.row_support(i)? {
                RowSupport::Finite(cells) => {
                    for (j, v) in cells {
                        if let Some(q) = self.index_set.position(j) {
                            if q < n {
                                data[p * n + q] = v;
                            }
                        }
                    }
                }
                RowSupport::Infinite => {
                    for (q, &j) in window.iter().enumerate() {
                        data[p * n + q] = self.entry(i, j)?;
                    }
                }
            }
        }
        Ok(FiniteMatrix { size: n, window, data })
    }

    /// Supremum of column sums (the operator norm on summable sequences),
    /// three-valued.
    pub fn column_norm(&self, probe_horizon: usize) -> Result<ColumnNorm> {
        let probe_horizon = probe_horizon.max(1);
        let scale = BigUint::from(self.affine.scale);
        let shift = BigUint::from(self.affine.shift);
        // Columns whose sums deviate from the generic tail formula:
        // exceptional columns plus (for one-sided sets) the boundary columns.
        let mut special: Vec<i64> = self.exceptional.keys().map(|&(_, c)| c).collect();
        let boundary = match &self.tail_rule {
            TailRule::Banded { stencil } => {
                stencil.keys().map(|&o| o.unsigned_abs()).max().unwrap_or(0) as i64
            }
            TailRule::RowFormula { .. } => 2,
            TailRule::UpperHull { .. } => 0,
        };
        if self.index_set == IndexSet::OneSided {
            for j in 0..=boundary {
                special.push(j);
            }
        }
        special.sort_unstable();
        special.dedup();
        let col_sum = |j: i64| -> Result<BigUint> {
            let mut s = BigUint::zero();
            for (_, v) in self.preds(j)? {
                s += v;
            }
            Ok(s)
        };

        let generic: SeqBound = match &self.tail_rule {
            TailRule::Banded { stencil } => {
                SeqBound::Finite(stencil.values().map(|&v| BigUint::from(v)).sum())
            }
            TailRule::RowFormula { formula } => {
                let seq = formula.seq();
                match (formula, seq.sup()) {
                    (_, SeqBound::Unbounded) => SeqBound::Unbounded,
                    (RowFormula::TentPerturbation { .. }, SeqBound::Finite(s))
                    | (RowFormula::TentSplitBase { .. }, SeqBound::Finite(s)) => {
                        // column j: 1 (full row) + a_{j+1}
                        SeqBound::Finite(BigUint::one() + s)
                    }
                    (RowFormula::FirstRowFanout { .. }, SeqBound::Finite(s)) => {
                        // column j: (1 + 2 a_j) + 1
                        SeqBound::Finite(BigUint::from(2u32) + BigUint::from(2u32) * s)
                    }
                }
            }
            TailRule::UpperHull { .. } => SeqBound::Unbounded,
        };

        match generic {
            SeqBound::Unbounded => Ok(ColumnNorm::Unbounded),
            SeqBound::Finite(tail_sup) => {
                let mut sup = tail_sup;
                for &j in &special {
                    if self.index_set.contains(j) {
                        sup = sup.max(col_sum(j)?);
                    }
                }
                // probe a few enumerated columns as a sanity floor
                for p in 0..probe_horizon.min(16) {
                    let j = self.index_set.enumerate(p);
                    sup = sup.max(col_sum(j)?);
                }
                Ok(ColumnNorm::Exact(sup * scale + shift))
            }
        }
    }

    /// Length of the shortest path `i → j` (`n(i,j) ≥ 1`), by backward
    /// breadth-first search from `j` over the (always finite) column supports.
    pub fn shortest_path_length(&self, i: i64, j: i64, horizon: usize) -> Result<usize> {
        self.index_set.check(i)?;
        self.index_set.check(j)?;
        if i == j {
            if !self.entry(j, j)?.is_zero() {
                return Ok(1);
            }
            let mut best: Option<usize> = None;
            for (p, _) in self.preds(j)? {
                if p == j {
                    continue;
                }
                if let Ok(d) = self.distance_into(j, p, horizon.saturating_sub(1)) {
                    let cand = d + 1;
                    best = Some(best.map_or(cand, |b| b.min(cand)));
                }
            }
            return best.ok_or(Error::PathNotFound { from: i, to: j, horizon });
        }
        self.distance_into(i, j, horizon)
    }

    /// Distance from `from` to `target` by backward BFS from `target`.
    fn distance_into(&self, from: i64, target: i64, horizon: usize) -> Result<usize> {
        let mut dist: BTreeMap<i64, usize> = BTreeMap::new();
        dist.insert(target, 0);
        let mut frontier = vec![target];
        for d in 1..=horizon {
            let mut next = Vec::new();
            for &v in &frontier {
                for (p, _) in self.preds(v)? {
                    if !dist.contains_key(&p) {
                        if p == from {
                            return Ok(d);
                        }
                        dist.insert(p, d);
                        next.push(p);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        Err(Error::PathNotFound { from, to: target, horizon })
    }

    /// `sup_i n(j,i)/n(i,j)` over the first `horizon` enumerated indices,
    /// with an exactness flag when the tail rule forces the ratio to be
    /// eventually dominated by the window values.
    pub fn s_supremum(&self, j: i64, horizon: usize) -> Result<SSupremum> {
        self.index_set.check(j)?;
        let cap = 4 * horizon + 16;
        let mut best = 0f64;
        let mut arg = j;
        let mut max_numer = 0usize;
        for p in 0..horizon {
            let i = self.index_set.enumerate(p);
            let n_ij = if i == j { 1 } else { self.distance_into(i, j, cap)? };
            let n_ji = if i == j { n_ij } else { self.distance_into(j, i, cap)? };
            max_numer = max_numer.max(n_ji);
            let ratio = n_ji as f64 / n_ij as f64;
            if ratio > best {
                best = ratio;
                arg = i;
            }
        }
        // Tail closure: banded rules have n(i,j) and n(j,i) both growing like
        // the index gap, so the off-window ratio tends to 1; full-row rules
        // keep n(j,i) bounded while n(i,j) grows past the window.
        let exact = match &self.tail_rule {
            TailRule::Banded { stencil } => {
                let has_up = stencil.iter().any(|(&o, &v)| o > 0 && v > 0);
                let has_down = stencil.iter().any(|(&o, &v)| o < 0 && v > 0);
                if has_up && has_down {
                    best = best.max(1.0);
                    true
                } else {
                    false
                }
            }
            TailRule::RowFormula { .. } | TailRule::UpperHull { .. } => {
                // numerator bounded by max window numerator + 1; denominators
                // beyond the window exceed it once the window is deep enough
                horizon > 2 * (max_numer + 2)
            }
        };
        Ok(SSupremum { value: best, exact, attained_at: arg })
    }

    /// Irreducibility and period of the `N`-truncation. Truncation-level
    /// evidence only; flagged as heuristic.
    pub fn structure_check(&self, n: usize) -> Result<StructureReport> {
        let f = self.truncate(n)?;
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|p| (0..n).filter(|&q| !f.get(p, q).is_zero()).collect())
            .collect();
        let radj: Vec<Vec<usize>> = {
            let mut r = vec![Vec::new(); n];
            for (p, row) in adj.iter().enumerate() {
                for &q in row {
                    r[q].push(p);
                }
            }
            r
        };
        let reach = |start: usize, graph: &Vec<Vec<usize>>| -> Vec<bool> {
            let mut seen = vec![false; n];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(v) = stack.pop() {
                for &w in &graph[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            seen
        };
        let fwd = reach(0, &adj);
        let bwd = reach(0, &radj);
        let scc0: Vec<usize> = (0..n).filter(|&v| fwd[v] && bwd[v]).collect();
        let irreducible = scc0.len() == n;
        // period: gcd of (level[u] + 1 - level[v]) over edges inside the SCC of 0
        let period = if scc0.len() <= 1 && f.get(0, 0).is_zero() {
            None
        } else {
            let mut level: BTreeMap<usize, i64> = BTreeMap::new();
            level.insert(0, 0);
            let mut queue = std::collections::VecDeque::from([0usize]);
            let in_scc: Vec<bool> = {
                let mut m = vec![false; n];
                for &v in &scc0 {
                    m[v] = true;
                }
                m
            };
            while let Some(v) = queue.pop_front() {
                for &w in &adj[v] {
                    if in_scc[w] && !level.contains_key(&w) {
                        level.insert(w, level[&v] + 1);
                        queue.push_back(w);
                    }
                }
            }
            let mut g: i64 = 0;
            for &v in &scc0 {
                for &w in &adj[v] {
                    if in_scc[w] {
                        g = num_integer::gcd(g, level[&v] + 1 - level[&w]);
                    }
                }
            }
            if g == 0 {
                None
            } else {
                Some(g.unsigned_abs())
            }
        };
        Ok(StructureReport {
            truncation: n,
            irreducible,
            period,
            note: "heuristic — truncation only",
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: CountableMatrix = serde_json::from_str(s)?;
        m.validated()
    }
}

/// Supremum report for the shortest-path ratio probe.
#[derive(Debug, Clone, PartialEq)]
pub struct SSupremum {
    pub value: f64,
    pub exact: bool,
    pub attained_at: i64,
}

/// Structural report on a truncation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureReport {
    pub truncation: usize,
    pub irreducible: bool,
    pub period: Option<u64>,
    pub note: &'static str,
}

/// Dense truncation of a [`CountableMatrix`], position-indexed.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMatrix {
    pub size: usize,
    /// original indices covered, in enumeration order
    pub window: Vec<i64>,
    data: Vec<BigUint>,
}

impl FiniteMatrix {
    pub fn from_rows(rows: Vec<Vec<u64>>) -> Result<Self> {
        let size = rows.len();
        if rows.iter().any(|r| r.len() != size) {
            return Err(Error::InvalidParam("finite matrix must be square".into()));
        }
        let data = rows
            .into_iter()
            .flat_map(|r| r.into_iter().map(BigUint::from))
            .collect();
        Ok(FiniteMatrix { size, window: (0..size as i64).collect(), data })
    }

    pub fn get(&self, row: usize, col: usize) -> &BigUint {
        &self.data[row * self.size + col]
    }

    /// Dense `f64` copy, for spectral estimation.
    pub fn to_f64(&self) -> Result<Vec<f64>> {
        self.data
            .iter()
            .map(|v| {
                v.to_f64()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::InvalidParam("entry exceeds f64 range".into()))
            })
            .collect()
    }

    pub fn rows_u64(&self) -> Option<Vec<Vec<u64>>> {
        let mut out = Vec::with_capacity(self.size);
        for r in 0..self.size {
            let mut row = Vec::with_capacity(self.size);
            for c in 0..self.size {
                row.push(self.get(r, c).to_u64()?);
            }
            out.push(row);
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn u(v: u64) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn banded_entries() {
        let m = CountableMatrix::banded_z(1, 1).unwrap();
        assert_eq!(m.entry(0, 1).unwrap(), u(1));
        assert_eq!(m.entry(0, -1).unwrap(), u(1));
        assert_eq!(m.entry(0, 0).unwrap(), u(0));
        assert_eq!(m.entry(3, 2).unwrap(), u(1));
    }

    #[test]
    fn identity_entries() {
        let e = CountableMatrix::identity(IndexSet::TwoSided);
        assert_eq!(e.entry(5, 5).unwrap(), u(1));
        assert_eq!(e.entry(5, 6).unwrap(), u(0));
    }

    #[test]
    fn boundary_matrix_entries() {
        // first row (0, c, 0, ...), then a below / b above the diagonal
        let m = CountableMatrix::boundary_n(1, 1, 2).unwrap();
        assert_eq!(m.entry(0, 1).unwrap(), u(2));
        assert_eq!(m.entry(1, 0).unwrap(), u(1));
        assert_eq!(m.entry(0, 0).unwrap(), u(0));
        assert_eq!(m.entry(1, 2).unwrap(), u(1));
        assert!(m.entry(-1, 0).is_err());
    }

    #[test]
    fn truncate_banded_spiral() {
        let m = CountableMatrix::banded_z(1, 1).unwrap();
        let f = m.truncate(3).unwrap();
        assert_eq!(f.window, vec![0, 1, -1]);
        let rows = f.rows_u64().unwrap();
        assert_eq!(rows, vec![vec![0, 1, 1], vec![1, 0, 0], vec![1, 0, 0]]);
    }

    #[test]
    fn truncate_identity() {
        let e = CountableMatrix::identity(IndexSet::OneSided);
        let f = e.truncate(2).unwrap();
        assert_eq!(f.rows_u64().unwrap(), vec![vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn truncate_bosou() {
        let m = CountableMatrix::bosou_factor_matrix();
        let f = m.truncate(3).unwrap();
        assert_eq!(
            f.rows_u64().unwrap(),
            vec![vec![4, 4, 4], vec![1, 4, 4], vec![0, 1, 4]]
        );
    }

    #[test]
    fn truncation_consistency() {
        let m = CountableMatrix::boundary_n(2, 3, 5).unwrap();
        let small = m.truncate(4).unwrap();
        let large = m.truncate(9).unwrap();
        for p in 0..4 {
            for q in 0..4 {
                assert_eq!(small.get(p, q), large.get(p, q));
            }
        }
    }

    #[test]
    fn column_norm_k_matrix() {
        let k = CountableMatrix::banded_z(1, 1)
            .unwrap()
            .affine_transform(2, 1)
            .unwrap();
        assert_eq!(k.column_norm(8).unwrap(), ColumnNorm::Exact(u(5)));
        let e = CountableMatrix::identity(IndexSet::OneSided);
        assert_eq!(e.column_norm(8).unwrap(), ColumnNorm::Exact(u(1)));
    }

    #[test]
    fn column_norm_unbounded_for_geometric_tent() {
        let m = CountableMatrix::tent(Sequence::Geometric { base: 3 }).unwrap();
        assert_eq!(m.column_norm(8).unwrap(), ColumnNorm::Unbounded);
    }

    #[test]
    fn affine_entry_examples() {
        let k = CountableMatrix::banded_z(1, 1)
            .unwrap()
            .affine_transform(2, 1)
            .unwrap();
        assert_eq!(k.entry(0, 0).unwrap(), u(1));
        assert_eq!(k.entry(0, 1).unwrap(), u(2));

        let m = CountableMatrix::boundary_n(1, 1, 3).unwrap();
        let n = m.affine_transform(2, 1).unwrap();
        assert_eq!(n.entry(0, 1).unwrap(), u(6));

        let same = m.affine_transform(1, 0).unwrap();
        assert_eq!(same.entry(2, 3).unwrap(), m.entry(2, 3).unwrap());
    }

    #[test]
    fn shortest_paths_on_k_matrix() {
        let k = CountableMatrix::banded_z(1, 1)
            .unwrap()
            .affine_transform(2, 1)
            .unwrap();
        assert_eq!(k.shortest_path_length(0, 5, 32).unwrap(), 5);
        assert_eq!(k.shortest_path_length(5, 0, 32).unwrap(), 5);
        assert_eq!(k.shortest_path_length(3, 3, 32).unwrap(), 1); // diagonal loop
    }

    #[test]
    fn shortest_paths_on_tent() {
        let m = CountableMatrix::tent(Sequence::Const { value: 1 }).unwrap();
        assert_eq!(m.shortest_path_length(0, 5, 32).unwrap(), 1);
        assert_eq!(m.shortest_path_length(5, 0, 32).unwrap(), 5);
        // m_00 = 1, so n(0,0) = 1
        assert_eq!(m.shortest_path_length(0, 0, 32).unwrap(), 1);
    }

    #[test]
    fn shortest_path_horizon_error() {
        let m = CountableMatrix::tent(Sequence::Const { value: 1 }).unwrap();
        assert!(matches!(
            m.shortest_path_length(50, 0, 3),
            Err(Error::PathNotFound { horizon: 3, .. })
        ));
    }

    #[test]
    fn s_supremum_k_matrix_is_one_exact() {
        let k = CountableMatrix::banded_z(1, 1)
            .unwrap()
            .affine_transform(2, 1)
            .unwrap();
        let s = k.s_supremum(0, 24).unwrap();
        assert!(s.exact);
        assert!((s.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn s_supremum_full_row_is_finite() {
        let m = CountableMatrix::tent(Sequence::Const { value: 1 }).unwrap();
        let s = m.s_supremum(0, 48).unwrap();
        assert!(s.exact);
        assert!(s.value <= 1.0 + 1e-12);
    }

    #[test]
    fn structure_reports() {
        let m = CountableMatrix::banded_z(1, 1).unwrap();
        let r = m.structure_check(12).unwrap();
        assert!(r.irreducible);
        assert_eq!(r.period, Some(2));

        let k = m.affine_transform(2, 1).unwrap();
        let rk = k.structure_check(12).unwrap();
        assert!(rk.irreducible);
        assert_eq!(rk.period, Some(1));

        let e = CountableMatrix::identity(IndexSet::OneSided);
        let re = e.structure_check(4).unwrap();
        assert!(!re.irreducible);
    }

    #[test]
    fn descriptor_round_trip() {
        let m = CountableMatrix::boundary_n(1, 2, 4)
            .unwrap()
            .affine_transform(2, 1)
            .unwrap();
        let json = m.to_json().unwrap();
        let back = CountableMatrix::from_json(&json).unwrap();
        assert_eq!(m, back);

        let tent = CountableMatrix::tent(Sequence::TwoLevel {
            low: 1,
            high: 3,
            low_set: IndexRule::UpTo { n: 2 },
        })
        .unwrap();
        let back = CountableMatrix::from_json(&tent.to_json().unwrap()).unwrap();
        assert_eq!(tent, back);
    }

    #[test]
    fn descriptor_rejects_unknown_fields() {
        let bad = r#"{"index_set":"n","tail_rule":{"kind":"banded","stencil":{"1":1}},"finite_rows":true,"bogus":1}"#;
        assert!(CountableMatrix::from_json(bad).is_err());
    }

    #[test]
    fn b1_membership_spot_checks() {
        for n in [1, 2, 3, 4, 10, 11, 28, 29, 82, 83, 244, 245] {
            assert!(in_b1(n), "{n} should be in B(1)");
        }
        for n in [5, 9, 12, 27, 30, 81, 84, 243, 246] {
            assert!(!in_b1(n), "{n} should not be in B(1)");
        }
    }

    proptest! {
        #[test]
        fn affine_entry_law(
            a in 1u64..4, b in 1u64..4, k in 1u64..4, l in 0u64..4,
            i in -12i64..12, j in -12i64..12,
        ) {
            let m = CountableMatrix::banded_z(a, b).unwrap();
            let n = m.affine_transform(k, l).unwrap();
            let lhs = n.entry(i, j).unwrap();
            let mut rhs = m.entry(i, j).unwrap() * BigUint::from(k);
            if i == j { rhs += BigUint::from(l); }
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn banded_shortest_path_is_gap(
            a in 1u64..4, b in 1u64..4,
            i in -10i64..10, j in -10i64..10,
        ) {
            prop_assume!(i != j);
            let m = CountableMatrix::banded_z(a, b).unwrap();
            let n = m.shortest_path_length(i, j, 64).unwrap();
            prop_assert_eq!(n as i64, (i - j).abs());
        }

        #[test]
        fn column_norm_affine_law(a in 1u64..4, b in 1u64..4, k in 1u64..4, l in 0u64..4) {
            let m = CountableMatrix::banded_z(a, b).unwrap();
            let n = m.affine_transform(k, l).unwrap();
            let (ColumnNorm::Exact(base), ColumnNorm::Exact(scaled)) =
                (m.column_norm(8).unwrap(), n.column_norm(8).unwrap())
            else { panic!("banded norms are exact") };
            prop_assert_eq!(scaled, base * BigUint::from(k) + BigUint::from(l));
        }
    }
}
