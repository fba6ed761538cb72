//! Perron value and generating-function estimation.
//!
//! The Perron value `λ_M` of an irreducible nonnegative matrix is the
//! common growth rate `lim m_ij(n)^{1/n}`; its logarithm is the Gurevich
//! entropy, the supremum of `log r(M′)` over finite submatrices `M′`.
//! Estimation therefore proceeds through truncation schedules: `r(M_N)` is
//! nondecreasing in `N` and every value is a certified lower bound.
//!
//! Spectral radii of truncations are computed by power iteration on
//! `M_N + I` (the shift makes period-2 matrices primitive and moves the
//! radius by exactly 1), with a Rayleigh-quotient drift stopping rule.

use num_traits::Zero;

use crate::coeffs::{big_to_f64, CoeffTable};
use crate::error::{Error, Result};
use crate::matrix::{CountableMatrix, FiniteMatrix};

/// Truncation schedule summary for a Perron value estimate.
#[derive(Debug, Clone)]
pub struct SpectralSummary {
    /// best certified lower bound on `λ_M` (max of the schedule values)
    pub lambda_lower: f64,
    pub lambda_estimate: f64,
    /// `1 / lambda_estimate`
    pub r_estimate: f64,
    /// `(N, r(truncate(M, N)))` along the schedule
    pub schedule: Vec<(usize, f64)>,
    pub converged: bool,
    pub tol: f64,
}

/// Default truncation schedule; all reference families converge visibly in
/// this range at desk scale.
pub fn default_schedule() -> Vec<usize> {
    vec![25, 50, 100, 200, 400]
}

/// Spectral radius of a finite nonnegative matrix by power iteration, to
/// relative tolerance `tol`. Deterministic all-ones start; period-2 guard
/// via the `+I` shift.
pub fn finite_spectral_radius(f: &FiniteMatrix, tol: f64) -> Result<f64> {
    let n = f.size;
    if n == 0 {
        return Err(Error::InvalidParam("empty matrix".into()));
    }
    let dense = f.to_f64()?;
    // sparse rows of A + I
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (p, row) in rows.iter_mut().enumerate() {
        for q in 0..n {
            let mut v = dense[p * n + q];
            if p == q {
                v += 1.0;
            }
            if v != 0.0 {
                row.push((q, v));
            }
        }
    }
    let mut v = vec![1.0f64; n];
    let mut w = vec![0.0f64; n];
    let mut prev_rq = f64::NAN;
    let mut stable = 0usize;
    let drift_tol = (tol * 0.125).max(1e-14);
    const CAP: usize = 100_000;
    for it in 0..CAP {
        let mut dot_vw = 0.0;
        let mut dot_vv = 0.0;
        let mut sup = 0.0f64;
        for (p, row) in rows.iter().enumerate() {
            let mut acc = 0.0;
            for &(q, a) in row {
                acc += a * v[q];
            }
            w[p] = acc;
            dot_vw += v[p] * acc;
            dot_vv += v[p] * v[p];
            sup = sup.max(acc.abs());
        }
        if sup == 0.0 {
            return Ok(0.0); // zero matrix: radius of A+I is 1
        }
        let rq = dot_vw / dot_vv;
        for x in w.iter_mut() {
            *x /= sup;
        }
        std::mem::swap(&mut v, &mut w);
        if it > 0 {
            if (rq - prev_rq).abs() <= drift_tol * rq.abs().max(1.0) {
                stable += 1;
                if stable >= 6 {
                    return Ok(rq - 1.0);
                }
            } else {
                stable = 0;
            }
        }
        prev_rq = rq;
    }
    Err(Error::NoConvergence { iterations: CAP, last: prev_rq - 1.0, previous: f64::NAN })
}

/// Evaluate `r(truncate(M, N))` along a strictly increasing schedule.
/// Non-converged summaries are legitimate outputs, not errors.
pub fn perron_value(
    m: &CountableMatrix,
    schedule: &[usize],
    tol: f64,
) -> Result<SpectralSummary> {
    if schedule.is_empty() {
        return Err(Error::InvalidParam("empty schedule".into()));
    }
    if schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParam("schedule must be strictly increasing".into()));
    }
    let mut points = Vec::with_capacity(schedule.len());
    for &n in schedule {
        let r = finite_spectral_radius(&m.truncate(n)?, tol)?;
        points.push((n, r));
    }
    let lambda_lower = points.iter().map(|&(_, r)| r).fold(f64::NEG_INFINITY, f64::max);
    let lambda_estimate = points.last().unwrap().1;
    let converged = points.len() >= 2 && {
        let k = points.len();
        (points[k - 1].1 - points[k - 2].1).abs() < tol
    };
    Ok(SpectralSummary {
        lambda_lower,
        lambda_estimate,
        r_estimate: 1.0 / lambda_estimate,
        schedule: points,
        converged,
        tol,
    })
}

/// Estimate `limsup c(n)^{1/n}` by regressing `log c(n)` on `n` over
/// `fit_lo..=fit_hi`. Tables with a vanishing parity class (period 2) are
/// fitted on the surviving parity only.
pub fn growth_rate(c: &CoeffTable, fit_lo: usize, fit_hi: usize) -> Result<f64> {
    let hi = fit_hi.min(c.horizon());
    let lo = fit_lo.min(hi).max(1);
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for n in lo..=hi {
        if let Some(ln) = c.ln_value(n) {
            pts.push((n as f64, ln));
        }
    }
    if pts.len() < 2 {
        return Err(Error::UndefinedGrowth);
    }
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in &pts {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(Error::UndefinedGrowth);
    }
    Ok((sxy / sxx).exp())
}

/// Default growth fit window: the last half of the table.
pub fn growth_rate_default(c: &CoeffTable) -> Result<f64> {
    growth_rate(c, c.horizon() / 2, c.horizon())
}

/// Tail handling requested for a series evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailModel {
    None,
    /// attach a geometric bound when the last term ratios are stable
    Geometric,
    /// closed-form tail bound supplied by the caller
    Declared(f64),
}

/// Outcome of the tail analysis of a partial series.
#[derive(Debug, Clone, PartialEq)]
pub enum TailBound {
    None,
    Geometric { bound: f64, ratio: f64 },
    Declared { bound: f64 },
    DivergesByRatio,
    DivergesByPartialSums,
}

/// Guarded evaluation of `Σ c(n) z^n` (or `Σ n·c(n) z^n`).
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesEval {
    pub z: f64,
    pub terms_used: usize,
    pub value_partial: f64,
    pub tail: TailBound,
}

impl SeriesEval {
    /// Certified upper bound on the full series, when the tail is bounded.
    pub fn certified_upper(&self) -> Option<f64> {
        match &self.tail {
            TailBound::Geometric { bound, .. } | TailBound::Declared { bound } => {
                Some(self.value_partial + bound)
            }
            TailBound::None | TailBound::DivergesByRatio | TailBound::DivergesByPartialSums => {
                None
            }
        }
    }

    pub fn divergence_flagged(&self) -> bool {
        matches!(
            self.tail,
            TailBound::DivergesByRatio | TailBound::DivergesByPartialSums
        )
    }
}

/// Partial-sum threshold beyond which a series is flagged divergent.
pub const PARTIAL_SUM_DIVERGENCE_THRESHOLD: f64 = 1e3;

/// Geometric certification: the empirical ratio must be < 1 with a 10%
/// safety margin, over 8 consecutive samples within 5% of each other
/// (guards against pre-asymptotic plateaus).
const RATIO_SAMPLES: usize = 8;
const RATIO_STABILITY: f64 = 0.05;
const RATIO_SAFETY: f64 = 1.1;

fn eval_weighted(c: &CoeffTable, z: f64, tail_model: TailModel, derivative: bool) -> Result<SeriesEval> {
    if z < 0.0 || !z.is_finite() {
        return Err(Error::InvalidParam("series evaluation point must be ≥ 0".into()));
    }
    let horizon = c.horizon();
    let ln_z = z.ln();
    let term = |n: usize| -> f64 {
        if c.values[n].is_zero() {
            return 0.0;
        }
        let weight = if derivative { n as f64 } else { 1.0 };
        if n == 0 {
            return weight * c.to_f64(0);
        }
        if z == 0.0 {
            return 0.0;
        }
        let direct = c.to_f64(n);
        if direct.is_finite() {
            weight * direct * z.powi(n as i32)
        } else {
            weight * (c.ln_value(n).unwrap() + n as f64 * ln_z).exp()
        }
    };

    let mut partial = 0.0f64;
    let mut nonzero_terms: Vec<(usize, f64)> = Vec::new();
    for n in 0..=horizon {
        let t = term(n);
        partial += t;
        if t > 0.0 {
            nonzero_terms.push((n, t));
        }
    }

    let tail = tail_analysis(&nonzero_terms, partial, tail_model);
    Ok(SeriesEval { z, terms_used: horizon, value_partial: partial, tail })
}

fn tail_analysis(nonzero: &[(usize, f64)], partial: f64, model: TailModel) -> TailBound {
    if partial > PARTIAL_SUM_DIVERGENCE_THRESHOLD {
        return TailBound::DivergesByPartialSums;
    }
    if let TailModel::Declared(bound) = model {
        return TailBound::Declared { bound };
    }
    if nonzero.len() < RATIO_SAMPLES + 1 {
        return TailBound::None;
    }
    let last = &nonzero[nonzero.len() - (RATIO_SAMPLES + 1)..];
    let ratios: Vec<f64> = last.windows(2).map(|w| w[1].1 / w[0].1).collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    if mean >= 1.0 {
        return TailBound::DivergesByRatio;
    }
    if model == TailModel::None {
        return TailBound::None;
    }
    let stable = ratios.iter().all(|r| (r - mean).abs() <= RATIO_STABILITY * mean);
    let padded = mean * RATIO_SAFETY;
    if stable && padded < 1.0 {
        let t_last = last.last().unwrap().1;
        TailBound::Geometric { bound: t_last * padded / (1.0 - padded), ratio: padded }
    } else {
        TailBound::None
    }
}

/// `Σ c(n) z^n` over the table horizon, plus a tail bound when the model applies.
pub fn series_eval(c: &CoeffTable, z: f64, tail_model: TailModel) -> Result<SeriesEval> {
    eval_weighted(c, z, tail_model, false)
}

/// `Σ n·c(n) z^n` over the table horizon.
pub fn derivative_series_eval(c: &CoeffTable, z: f64, tail_model: TailModel) -> Result<SeriesEval> {
    eval_weighted(c, z, tail_model, true)
}

/// Root of `Σ c(n) z^n = 1` in `(0, z_hi]`, by bisection (the partial sum is
/// increasing in `z`). `None` when the partial sums stay below 1 on the
/// bracket; reliable only when the table horizon carries the mass.
pub fn renewal_root(c: &CoeffTable, z_hi: f64) -> Result<Option<f64>> {
    let f = |z: f64| -> f64 {
        series_eval(c, z, TailModel::None)
            .map(|e| e.value_partial)
            .unwrap_or(f64::INFINITY)
    };
    if f(z_hi) < 1.0 {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0f64, z_hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{first_entrance, CoeffKind};
    use crate::matrix::Sequence;
    use num_bigint::BigUint;

    fn table(values: Vec<u64>) -> CoeffTable {
        CoeffTable::from_values(
            CoeffKind::FirstEntrance,
            0,
            0,
            values.into_iter().map(BigUint::from).collect(),
        )
    }

    #[test]
    fn golden_mean_radius() {
        let f = FiniteMatrix::from_rows(vec![vec![0, 1], vec![1, 1]]).unwrap();
        let r = finite_spectral_radius(&f, 1e-10).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((r - phi).abs() < 1e-8, "r={r}");
    }

    #[test]
    fn single_loop_radius() {
        let f = FiniteMatrix::from_rows(vec![vec![7]]).unwrap();
        let r = finite_spectral_radius(&f, 1e-12).unwrap();
        assert!((r - 7.0).abs() < 1e-9);
    }

    #[test]
    fn tridiagonal_truncation_radius() {
        // the N=41 spiral window of the two-sided band is a 41-path
        let m = CountableMatrix::banded_z(1, 1).unwrap();
        let r = finite_spectral_radius(&m.truncate(41).unwrap(), 1e-10).unwrap();
        let expect = 2.0 * (std::f64::consts::PI / 42.0).cos();
        assert!((r - expect).abs() < 1e-6, "r={r} expect={expect}");
        assert!(r < 2.0);
    }

    #[test]
    fn perron_banded_reaches_two() {
        let m = CountableMatrix::banded_z(1, 1).unwrap();
        let s = perron_value(&m, &[25, 50, 100, 200], 1e-3).unwrap();
        assert!((s.lambda_estimate - 2.0).abs() < 1e-3, "{s:?}");
        // schedule nondecreasing
        for w in s.schedule.windows(2) {
            assert!(w[1].1 >= w[0].1 - 1e-9);
        }
        assert!(s.lambda_lower <= s.lambda_estimate + 1e-12);
    }

    #[test]
    fn perron_affine_shift() {
        let k = CountableMatrix::banded_z(1, 1)
            .unwrap()
            .affine_transform(2, 1)
            .unwrap();
        let s = perron_value(&k, &[25, 50, 100, 200], 1e-2).unwrap();
        assert!((s.lambda_estimate - 5.0).abs() < 1e-2, "{s:?}");
    }

    #[test]
    fn growth_of_banded_first_returns() {
        let m = CountableMatrix::banded_z(1, 1).unwrap();
        let f = first_entrance(&m, 0, 0, 160).unwrap();
        let g = growth_rate_default(&f).unwrap();
        assert!((g - 2.0).abs() < 0.05, "g={g}");
    }

    #[test]
    fn growth_of_constant_table_is_one() {
        let c = table(vec![0; 1].into_iter().chain(vec![1; 40]).collect());
        let g = growth_rate_default(&c).unwrap();
        assert!((g - 1.0).abs() < 1e-9);
    }

    #[test]
    fn growth_of_eventually_geometric_tail() {
        let m = CountableMatrix::tent(Sequence::TwoLevel {
            low: 1,
            high: 3,
            low_set: crate::matrix::IndexRule::UpTo { n: 2 },
        })
        .unwrap();
        let f = first_entrance(&m, 0, 0, 80).unwrap();
        let g = growth_rate_default(&f).unwrap();
        assert!((g - 3.0).abs() < 1e-6, "g={g}");
    }

    #[test]
    fn growth_errors_on_zero_window() {
        let c = table(vec![0; 20]);
        assert!(matches!(growth_rate_default(&c), Err(Error::UndefinedGrowth)));
    }

    #[test]
    fn series_geometric_tail() {
        // f(n) = 1 at z = 1/2 sums to 1
        let c = table(std::iter::once(0).chain(std::iter::repeat(1).take(60)).collect());
        let e = series_eval(&c, 0.5, TailModel::Geometric).unwrap();
        let upper = e.certified_upper().expect("tail certified");
        assert!((upper - 1.0).abs() < 1e-9, "upper={upper}");
        assert!(e.value_partial < 1.0);
    }

    #[test]
    fn series_at_zero() {
        let c = table(vec![5, 3, 3, 3]);
        let e = series_eval(&c, 0.0, TailModel::None).unwrap();
        assert_eq!(e.value_partial, 5.0);
    }

    #[test]
    fn derivative_series_standard_sum() {
        let c = table(std::iter::once(0).chain(std::iter::repeat(1).take(80)).collect());
        let e = derivative_series_eval(&c, 0.5, TailModel::Geometric).unwrap();
        let upper = e.certified_upper().expect("tail certified");
        assert!((upper - 2.0).abs() < 1e-6, "Σ n 2^{{-n}} = 2, got {upper}");
    }

    #[test]
    fn derivative_series_zero_table() {
        let c = table(vec![0; 10]);
        let e = derivative_series_eval(&c, 0.5, TailModel::None).unwrap();
        assert_eq!(e.value_partial, 0.0);
    }

    #[test]
    fn divergence_by_ratio_flagged() {
        // terms grow: c(n) = 3^n at z = 1/2
        let vals: Vec<BigUint> = (0..30u32).map(|n| BigUint::from(3u64).pow(n)).collect();
        let c = CoeffTable::from_values(CoeffKind::Power, 0, 0, vals);
        let e = series_eval(&c, 0.5, TailModel::Geometric).unwrap();
        assert!(e.divergence_flagged());
    }

    #[test]
    fn renewal_root_of_tent() {
        let m = CountableMatrix::tent(Sequence::Const { value: 1 }).unwrap();
        let f = first_entrance(&m, 0, 0, 40).unwrap();
        let z = renewal_root(&f, 0.9).unwrap().expect("root exists");
        assert!((1.0 / z - 2.0).abs() < 1e-9, "λ={}", 1.0 / z);
    }
}
