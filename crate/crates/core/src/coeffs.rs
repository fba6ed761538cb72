//! Exact path-count coefficient families on countable directed multigraphs.
//!
//! For a matrix `M` and indices `i, j`, the families computed here are
//!
//! * `m_ij(n)` — entries of `M^n`, i.e. weighted `n`-paths `i → j`;
//! * `f_ij(n)` — first entrance: `n`-paths avoiding `j` strictly inside;
//! * `l_ij(n)` — last exit: `n`-paths avoiding `i` strictly inside;
//! * `_k m_ij(n)` / `^k m_ij(n)` — taboo counts avoiding / passing `k`;
//! * `g^{P'}_ij(n)` — first entrance into a finite set `P'` at `j ∈ P'`.
//!
//! All values are exact big integers. Computation runs by dynamic
//! programming over a certified window: states at time `t` are pruned to
//! those that can still reach `j` within the remaining steps, a set that is
//! finite because every supported tail rule has finite column supports.
//! A brute-force enumeration oracle over small finite matrices provides an
//! independent check, and [`check_identities`] verifies the renewal and
//! taboo convolution identities order by order.

use std::collections::{HashMap, HashSet};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::matrix::{CountableMatrix, FiniteMatrix, RowSupport};

/// Which coefficient family a table holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoeffKind {
    Power,
    FirstEntrance,
    LastExit,
    Taboo(i64),
    TabooComplement(i64),
    GSet(Vec<i64>),
}

/// Exact coefficient sequence for one `(kind, i, j)` triple, indexed `0..=horizon`.
///
/// `values[0]` is `δ_ij` for `m`-tables, the taboo convention
/// `δ_ij(1−δ_ik)` for taboo tables, and 0 for the entrance/exit families
/// (those start at `n = 1`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoeffTable {
    pub kind: CoeffKind,
    pub i: i64,
    pub j: i64,
    pub values: Vec<BigUint>,
}

impl CoeffTable {
    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    pub fn value(&self, n: usize) -> &BigUint {
        &self.values[n]
    }

    pub fn to_f64(&self, n: usize) -> f64 {
        big_to_f64(&self.values[n])
    }

    /// Natural log of `values[n]`, or `None` when the value is zero.
    pub fn ln_value(&self, n: usize) -> Option<f64> {
        big_ln(&self.values[n])
    }

    pub fn from_values(kind: CoeffKind, i: i64, j: i64, values: Vec<BigUint>) -> Self {
        CoeffTable { kind, i, j, values }
    }
}

/// `f64` image of a big integer; `inf` past the representable range.
pub fn big_to_f64(v: &BigUint) -> f64 {
    v.to_f64().unwrap_or(f64::INFINITY)
}

/// `ln` of a big integer via its bit length, stable far past `f64` range.
pub fn big_ln(v: &BigUint) -> Option<f64> {
    if v.is_zero() {
        return None;
    }
    let bits = v.bits();
    if bits <= 52 {
        return Some((v.to_u64().unwrap() as f64).ln());
    }
    let shift = bits - 52;
    let top = (v >> shift).to_u64().unwrap() as f64;
    Some(top.ln() + shift as f64 * std::f64::consts::LN_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Filter<'a> {
    None,
    AvoidInterior(i64),
    AvoidSet(&'a [i64]),
}

impl Filter<'_> {
    fn keeps(&self, state: i64) -> bool {
        match self {
            Filter::None => true,
            Filter::AvoidInterior(k) => state != *k,
            Filter::AvoidSet(s) => !s.contains(&state),
        }
    }
}

/// Cumulative backward reach sets `B_r = {k : k reaches j in ≤ r steps}`.
fn backward_sets(m: &CountableMatrix, j: i64, n: usize) -> Result<Vec<HashSet<i64>>> {
    let mut sets: Vec<HashSet<i64>> = Vec::with_capacity(n + 1);
    let mut cur: HashSet<i64> = HashSet::from([j]);
    let mut frontier: Vec<i64> = vec![j];
    sets.push(cur.clone());
    for _ in 1..=n {
        let mut next_frontier = Vec::new();
        for &v in &frontier {
            for (p, _) in m.preds(v)? {
                if cur.insert(p) {
                    next_frontier.push(p);
                }
            }
        }
        frontier = next_frontier;
        sets.push(cur.clone());
    }
    Ok(sets)
}

/// Shared DP: counts of length-`t` paths `i → j` for `t ≤ n`, while states at
/// interior times are restricted by `filter` and pruned to the backward sets.
fn dp(
    m: &CountableMatrix,
    i: i64,
    j: i64,
    n: usize,
    filter: Filter,
    out0: BigUint,
) -> Result<Vec<BigUint>> {
    m.index_set.check(i)?;
    m.index_set.check(j)?;
    let back = backward_sets(m, j, n)?;
    let window = &back[n];
    // Row caches over the window, so full rows are expanded once.
    let mut rows: HashMap<i64, Vec<(i64, BigUint)>> = HashMap::new();
    let mut row_of = |k: i64, rows: &mut HashMap<i64, Vec<(i64, BigUint)>>| -> Result<()> {
        if rows.contains_key(&k) {
            return Ok(());
        }
        let cells = match m.row_support(k)? {
            RowSupport::Finite(cells) => cells
                .into_iter()
                .filter(|(l, _)| window.contains(l))
                .collect(),
            RowSupport::Infinite => {
                let mut cells = Vec::new();
                for &l in window.iter() {
                    let v = m.entry(k, l)?;
                    if !v.is_zero() {
                        cells.push((l, v));
                    }
                }
                cells
            }
        };
        rows.insert(k, cells);
        Ok(())
    };

    let mut out = vec![BigUint::zero(); n + 1];
    out[0] = out0;
    let mut cur: HashMap<i64, BigUint> = HashMap::from([(i, BigUint::one())]);
    for t in 1..=n {
        let allowed = &back[n - t];
        let mut next: HashMap<i64, BigUint> = HashMap::new();
        for (k, cnt) in cur.iter() {
            row_of(*k, &mut rows)?;
            for (l, w) in rows.get(k).unwrap() {
                let amount = cnt * w;
                if *l == j {
                    out[t] += &amount;
                }
                if filter.keeps(*l) && allowed.contains(l) {
                    *next.entry(*l).or_insert_with(BigUint::zero) += amount;
                }
            }
        }
        cur = next;
        if cur.is_empty() {
            break;
        }
    }
    Ok(out)
}

/// `m_ij(n)` for `0 ≤ n ≤ horizon`.
pub fn power_counts(m: &CountableMatrix, i: i64, j: i64, horizon: usize) -> Result<CoeffTable> {
    let out0 = if i == j { BigUint::one() } else { BigUint::zero() };
    let values = dp(m, i, j, horizon, Filter::None, out0)?;
    Ok(CoeffTable { kind: CoeffKind::Power, i, j, values })
}

/// First-entrance counts `f_ij(n)`: `n`-paths `i → j` avoiding `j` strictly inside.
pub fn first_entrance(m: &CountableMatrix, i: i64, j: i64, horizon: usize) -> Result<CoeffTable> {
    let values = dp(m, i, j, horizon, Filter::AvoidInterior(j), BigUint::zero())?;
    Ok(CoeffTable { kind: CoeffKind::FirstEntrance, i, j, values })
}

/// Last-exit counts `l_ij(n)`: `n`-paths `i → j` avoiding `i` strictly inside.
pub fn last_exit(m: &CountableMatrix, i: i64, j: i64, horizon: usize) -> Result<CoeffTable> {
    let values = dp(m, i, j, horizon, Filter::AvoidInterior(i), BigUint::zero())?;
    Ok(CoeffTable { kind: CoeffKind::LastExit, i, j, values })
}

/// Taboo counts: `_k m_ij(n)` (paths avoiding `k` strictly inside) and the
/// companion `^k m_ij(n) = m_ij(n) − _k m_ij(n)`.
pub fn taboo_counts(
    m: &CountableMatrix,
    i: i64,
    j: i64,
    k: i64,
    horizon: usize,
) -> Result<(CoeffTable, CoeffTable)> {
    m.index_set.check(k)?;
    let out0 = if i == j && i != k { BigUint::one() } else { BigUint::zero() };
    let avoid = dp(m, i, j, horizon, Filter::AvoidInterior(k), out0)?;
    let full = power_counts(m, i, j, horizon)?;
    let complement: Vec<BigUint> = full
        .values
        .iter()
        .zip(avoid.iter())
        .map(|(total, a)| total - a)
        .collect();
    Ok((
        CoeffTable { kind: CoeffKind::Taboo(k), i, j, values: avoid },
        CoeffTable { kind: CoeffKind::TabooComplement(k), i, j, values: complement },
    ))
}

/// First entrance into a finite set: `g^{P'}_ij(n)` with `j ∈ P'`.
pub fn gset_counts(
    m: &CountableMatrix,
    pset: &[i64],
    i: i64,
    j: i64,
    horizon: usize,
) -> Result<CoeffTable> {
    if !pset.contains(&j) {
        return Err(Error::InvalidParam(format!(
            "gset target {j} must belong to the taboo set"
        )));
    }
    let values = dp(m, i, j, horizon, Filter::AvoidSet(pset), BigUint::zero())?;
    Ok(CoeffTable { kind: CoeffKind::GSet(pset.to_vec()), i, j, values })
}

/// Taboo filter applied by the brute-force oracle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathMode {
    All,
    FirstEntrance,
    LastExit,
    Taboo(i64),
    TabooSet(Vec<i64>),
}

const BRUTE_FORCE_BUDGET: u64 = 20_000_000;

/// Weighted count of length-`n` vertex sequences `i → j` in a finite matrix,
/// by explicit enumeration. Independent of the DP path; used as its oracle.
///
/// Positions are row/column indices of `f`. Refuses (never truncates) when
/// the enumeration exceeds its expansion budget.
pub fn brute_force_paths(
    f: &FiniteMatrix,
    i: usize,
    j: usize,
    n: usize,
    mode: &PathMode,
) -> Result<BigUint> {
    if i >= f.size || j >= f.size {
        return Err(Error::InvalidParam("oracle endpoint outside matrix".into()));
    }
    if n == 0 {
        let hit = i == j
            && match mode {
                PathMode::Taboo(k) => i as i64 != *k,
                PathMode::All => true,
                _ => false,
            };
        return Ok(if hit { BigUint::one() } else { BigUint::zero() });
    }
    let interior_ok = |v: usize| -> bool {
        match mode {
            PathMode::All => true,
            PathMode::FirstEntrance => v != j,
            PathMode::LastExit => v != i,
            PathMode::Taboo(k) => v as i64 != *k,
            PathMode::TabooSet(s) => !s.contains(&(v as i64)),
        }
    };
    let mut budget = 0u64;
    let mut total = BigUint::zero();
    // iterative DFS: stack of (vertex, depth, weight-product)
    let mut stack: Vec<(usize, usize, BigUint)> = vec![(i, 0, BigUint::one())];
    while let Some((v, t, w)) = stack.pop() {
        budget += 1;
        if budget > BRUTE_FORCE_BUDGET {
            return Err(Error::BudgetExceeded { expansions: budget, limit: BRUTE_FORCE_BUDGET });
        }
        for next in 0..f.size {
            let e = f.get(v, next);
            if e.is_zero() {
                continue;
            }
            let w2 = &w * e;
            if t + 1 == n {
                if next == j {
                    total += w2;
                }
            } else if interior_ok(next) {
                stack.push((next, t + 1, w2));
            }
        }
    }
    Ok(total)
}

/// Convolution `(a * b)(n) = Σ_{s} a(s) b(n−s)` over `s_lo ≤ s ≤ s_hi`.
fn convolve_at(a: &[BigUint], b: &[BigUint], n: usize, s_lo: usize, s_hi: usize) -> BigUint {
    let mut acc = BigUint::zero();
    for s in s_lo..=s_hi.min(n) {
        if s < a.len() && n - s < b.len() {
            acc += &a[s] * &b[n - s];
        }
    }
    acc
}

/// One identity verified exactly at the coefficient level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentityResult {
    pub name: &'static str,
    pub pass: bool,
    /// `(i, j, n, lhs, rhs)` of the first failing coefficient.
    pub first_failure: Option<(i64, i64, usize, BigUint, BigUint)>,
}

/// Report of [`check_identities`]. Failures are data, not errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentityReport {
    pub results: Vec<IdentityResult>,
}

impl IdentityReport {
    pub fn all_pass(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }
}

/// Verify, exactly, the renewal identity and the taboo/last-exit convolution
/// identities on index pairs sampled from the first `window` enumerated
/// indices, to coefficient order `horizon`.
///
/// Checked identities (as formal power series, order by order):
/// * renewal: `m_jj(n) = Σ_s f_jj(s)·m_jj(n−s)`;
/// * last-exit factorization: `m_ik(n) = Σ_s m_ii(n−s)·l_ik(s)` for `i ≠ k`;
/// * taboo split: `m_ik(n) = _j m_ik(n) + ^j m_ik(n)`;
/// * taboo factorization: `^j m_ik(n) = Σ_s m_ij(n−s)·l_jk(s)`;
/// * set decomposition: `f_ij(n) = g^{P'}_ij(n) + Σ_{k∈P'\{j}} Σ_s g^{P'}_ik(s)·f_kj(n−s)`
///   for `i ∉ P'`, `j ∈ P'`.
pub fn check_identities(m: &CountableMatrix, window: usize, horizon: usize) -> Result<IdentityReport> {
    let idx: Vec<i64> = (0..window.min(4)).map(|p| m.index_set.enumerate(p)).collect();
    let mut results = Vec::new();

    // renewal at each sampled j
    {
        let mut fail = None;
        'outer: for &j in &idx {
            let mm = power_counts(m, j, j, horizon)?;
            let ff = first_entrance(m, j, j, horizon)?;
            for n in 1..=horizon {
                let rhs = convolve_at(&ff.values, &mm.values, n, 1, n);
                if *mm.value(n) != rhs {
                    fail = Some((j, j, n, mm.value(n).clone(), rhs));
                    break 'outer;
                }
            }
        }
        results.push(IdentityResult { name: "renewal", pass: fail.is_none(), first_failure: fail });
    }

    // last-exit factorization m_ik = m_ii * l_ik, i ≠ k
    {
        let mut fail = None;
        'outer: for &i in &idx {
            for &k in &idx {
                if i == k {
                    continue;
                }
                let mik = power_counts(m, i, k, horizon)?;
                let mii = power_counts(m, i, i, horizon)?;
                let lik = last_exit(m, i, k, horizon)?;
                for n in 1..=horizon {
                    let rhs = convolve_at(&lik.values, &mii.values, n, 1, n);
                    if *mik.value(n) != rhs {
                        fail = Some((i, k, n, mik.value(n).clone(), rhs));
                        break 'outer;
                    }
                }
            }
        }
        results.push(IdentityResult {
            name: "last_exit_factorization",
            pass: fail.is_none(),
            first_failure: fail,
        });
    }

    // taboo split and factorization through the first sampled index as taboo
    {
        let mut split_fail = None;
        let mut factor_fail = None;
        if let Some(&tj) = idx.first() {
            'outer: for &i in &idx {
                for &k in &idx {
                    let mik = power_counts(m, i, k, horizon)?;
                    let (avoid, through) = taboo_counts(m, i, k, tj, horizon)?;
                    let mij = power_counts(m, i, tj, horizon)?;
                    let ljk = last_exit(m, tj, k, horizon)?;
                    for n in 1..=horizon {
                        let sum = avoid.value(n) + through.value(n);
                        if *mik.value(n) != sum && split_fail.is_none() {
                            split_fail = Some((i, k, n, mik.value(n).clone(), sum));
                        }
                        if tj != k || tj != i {
                            let rhs = convolve_at(&ljk.values, &mij.values, n, 1, n.saturating_sub(1));
                            if *through.value(n) != rhs && factor_fail.is_none() {
                                factor_fail = Some((i, k, n, through.value(n).clone(), rhs));
                            }
                        }
                        if split_fail.is_some() && factor_fail.is_some() {
                            break 'outer;
                        }
                    }
                }
            }
        }
        results.push(IdentityResult {
            name: "taboo_split",
            pass: split_fail.is_none(),
            first_failure: split_fail,
        });
        results.push(IdentityResult {
            name: "taboo_factorization",
            pass: factor_fail.is_none(),
            first_failure: factor_fail,
        });
    }

    // set decomposition with P' = first two sampled indices
    {
        let mut fail = None;
        if idx.len() >= 3 {
            let pset = vec![idx[0], idx[1]];
            let j = idx[0];
            'outer: for &i in &idx[2..] {
                let fij = first_entrance(m, i, j, horizon)?;
                let gij = gset_counts(m, &pset, i, j, horizon)?;
                let mut rhs_parts: Vec<(CoeffTable, CoeffTable)> = Vec::new();
                for &k in &pset {
                    if k != j {
                        let gik = gset_counts(m, &pset, i, k, horizon)?;
                        let fkj = first_entrance(m, k, j, horizon)?;
                        rhs_parts.push((gik, fkj));
                    }
                }
                for n in 1..=horizon {
                    let mut rhs = gij.value(n).clone();
                    for (gik, fkj) in &rhs_parts {
                        rhs += convolve_at(&gik.values, &fkj.values, n, 1, n.saturating_sub(1));
                    }
                    if *fij.value(n) != rhs {
                        fail = Some((i, j, n, fij.value(n).clone(), rhs));
                        break 'outer;
                    }
                }
            }
        }
        results.push(IdentityResult {
            name: "set_decomposition",
            pass: fail.is_none(),
            first_failure: fail,
        });
    }

    Ok(IdentityReport { results })
}
