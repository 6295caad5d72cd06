//! The convolution algebra of finitely supported functions, lower bounds on
//! convolution operator norms, and RD ratio profiles.
//!
//! Convolution is `(f*g)(x) = Σ_y f(y⁻¹) g(yx)`, so `δ_a * δ_b = δ_{ab}` and
//! `T_f h = f*h` acts on the left.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::cayley::{BallTable, WordMetric};
use crate::fit::{fit_line, top_half, LineFit};
use crate::group::{Element, GroupAutomorphism, GroupError, GroupKind};

#[derive(Debug, Error)]
pub enum ConvolutionError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("functions live on different groups ({0} and {1})")]
    MixedGroups(&'static str, &'static str),
    #[error("length of support element {0} is unknown")]
    UnknownLength(String),
    #[error("ball of radius {needed} required, table has radius {have}")]
    BallUnavailable { needed: usize, have: usize },
    #[error("support element {0} is outside the ball table")]
    OutsideTable(String),
}

/// A finitely supported real function on a group. Zero coefficients are
/// never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct FinSuppFunction {
    kind: GroupKind,
    coeffs: BTreeMap<Element, f64>,
}

impl FinSuppFunction {
    pub fn zero(kind: &GroupKind) -> Self {
        Self {
            kind: kind.clone(),
            coeffs: BTreeMap::new(),
        }
    }

    pub fn delta(kind: &GroupKind, x: Element) -> Result<Self, GroupError> {
        Self::from_pairs(kind, [(x, 1.0)])
    }

    /// Sum of `value·δ_x` over the pairs; repeated elements accumulate.
    pub fn from_pairs(
        kind: &GroupKind,
        pairs: impl IntoIterator<Item = (Element, f64)>,
    ) -> Result<Self, GroupError> {
        let mut f = Self::zero(kind);
        for (x, v) in pairs {
            if !kind.contains(&x) {
                return Err(GroupError::ForeignElement {
                    group: kind.family().to_string(),
                    element: x.canonical_key(),
                });
            }
            f.add_at(x, v);
        }
        Ok(f)
    }

    pub fn indicator<'a>(
        kind: &GroupKind,
        support: impl IntoIterator<Item = &'a Element>,
    ) -> Result<Self, GroupError> {
        Self::from_pairs(kind, support.into_iter().map(|x| (x.clone(), 1.0)))
    }

    /// `χ_{B_n}` read off a ball table.
    pub fn ball_indicator(table: &BallTable, n: usize) -> Self {
        let mut f = Self::zero(table.group().kind());
        for x in table.elements().take(table.ball_size(n)) {
            f.coeffs.insert(x.clone(), 1.0);
        }
        f
    }

    /// `χ_{S_n}` read off a ball table.
    pub fn sphere_indicator(table: &BallTable, n: usize) -> Self {
        let mut f = Self::zero(table.group().kind());
        for x in table.sphere(n) {
            f.coeffs.insert(x.clone(), 1.0);
        }
        f
    }

    pub(crate) fn add_at(&mut self, x: Element, v: f64) {
        let sum = self.get(&x) + v;
        if sum == 0.0 {
            self.coeffs.remove(&x);
        } else {
            self.coeffs.insert(x, sum);
        }
    }

    pub fn kind(&self) -> &GroupKind {
        &self.kind
    }

    pub fn get(&self, x: &Element) -> f64 {
        self.coeffs.get(x).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Support and coefficients in canonical element order.
    pub fn iter(&self) -> impl Iterator<Item = (&Element, f64)> + '_ {
        self.coeffs.iter().map(|(x, v)| (x, *v))
    }

    pub fn support(&self) -> impl Iterator<Item = &Element> + '_ {
        self.coeffs.keys()
    }

    pub fn l1_norm(&self) -> f64 {
        self.coeffs.values().map(|v| v.abs()).sum()
    }

    pub fn l2_norm_squared(&self) -> f64 {
        self.coeffs.values().map(|v| v * v).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_squared().sqrt()
    }

    fn same_group(&self, other: &Self) -> Result<(), ConvolutionError> {
        if self.kind != other.kind {
            return Err(ConvolutionError::MixedGroups(
                self.kind.family(),
                other.kind.family(),
            ));
        }
        Ok(())
    }

    /// `f*g`, by the exact double loop over both supports.
    pub fn convolve(&self, other: &Self) -> Result<Self, ConvolutionError> {
        self.same_group(other)?;
        let mut out = Self::zero(&self.kind);
        for (u, a) in &self.coeffs {
            for (v, b) in &other.coeffs {
                *out.coeffs
                    .entry(self.kind.mul_unchecked(u, v))
                    .or_insert(0.0) += a * b;
            }
        }
        out.coeffs.retain(|_, v| *v != 0.0);
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self, ConvolutionError> {
        self.same_group(other)?;
        let mut out = self.clone();
        for (x, v) in &other.coeffs {
            *out.coeffs.entry(x.clone()).or_insert(0.0) += v;
        }
        out.coeffs.retain(|_, v| *v != 0.0);
        Ok(out)
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = Self::zero(&self.kind);
        if c != 0.0 {
            out.coeffs = self
                .coeffs
                .iter()
                .map(|(x, v)| (x.clone(), c * v))
                .collect();
        }
        out
    }

    /// `f̃(x) = f(x⁻¹)`, the adjoint for real scalars.
    pub fn involution(&self) -> Self {
        Self {
            kind: self.kind.clone(),
            coeffs: self
                .coeffs
                .iter()
                .map(|(x, v)| (self.kind.inv_unchecked(x), *v))
                .collect(),
        }
    }

    /// `f∘α`, supported on `α⁻¹(supp f)`.
    pub fn compose(&self, alpha: &GroupAutomorphism) -> Result<Self, ConvolutionError> {
        if *alpha.group().kind() != self.kind {
            return Err(ConvolutionError::MixedGroups(
                self.kind.family(),
                alpha.group().kind().family(),
            ));
        }
        let mut out = Self::zero(&self.kind);
        for (y, v) in &self.coeffs {
            out.coeffs.insert(alpha.apply_inverse(y)?, *v);
        }
        Ok(out)
    }

    /// Largest coefficient difference over the union of supports.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut d: f64 = 0.0;
        for (x, v) in &self.coeffs {
            d = d.max((v - other.get(x)).abs());
        }
        for (x, v) in &other.coeffs {
            if !self.coeffs.contains_key(x) {
                d = d.max(v.abs());
            }
        }
        d
    }
}

/// `ℓ(f) = max{ℓ(x) : f(x) ≠ 0}`; zero for the zero function.
pub fn ell_of(f: &FinSuppFunction, metric: &impl WordMetric) -> Result<usize, ConvolutionError> {
    let mut best = 0;
    for x in f.support() {
        let n = metric
            .length(x)
            .ok_or_else(|| ConvolutionError::UnknownLength(x.canonical_key()))?;
        best = best.max(n);
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimatorOptions {
    /// Stop when the relative change of the estimate drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Weight of the deterministic perturbation on `S_1` in the start vector.
    pub perturbation: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 10_000,
            perturbation: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistoryEntry {
    pub m: usize,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// A certified lower bound on `‖T_f‖` with its truncation history.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OpNormEstimate {
    pub truncation_radius: usize,
    pub iterations: usize,
    pub value: f64,
    pub converged: bool,
    /// `‖f‖₁`, an upper bound on `‖T_f‖`.
    pub ceiling: f64,
    pub history: Vec<HistoryEntry>,
}

impl OpNormEstimate {
    /// CSV with columns `m,value,iterations`.
    pub fn write_history_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["m", "value", "iterations"])?;
        for h in &self.history {
            w.write_record([
                h.m.to_string(),
                format!("{:.12}", h.value),
                h.iterations.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `T_f` restricted to `ℓ²(B_m)`, as an index table: row `x` lists the
/// table index of `u·x` for each support element `u`.
struct TruncatedOperator {
    coeffs: Vec<f64>,
    targets: Vec<u32>,
    range: usize,
}

impl TruncatedOperator {
    fn new(f: &FinSuppFunction, table: &BallTable, m: usize) -> Result<Self, ConvolutionError> {
        let kind = table.group().kind();
        let support: Vec<(&Element, f64)> = f.iter().collect();
        let domain = table.ball_size(m);
        let mut targets = Vec::with_capacity(domain * support.len());
        let mut range = 0;
        for x in table.elements().take(domain) {
            for (u, _) in &support {
                let ux = kind.mul_unchecked(u, x);
                let i = table
                    .index_of(&ux)
                    .ok_or_else(|| ConvolutionError::OutsideTable(ux.canonical_key()))?;
                range = range.max(i + 1);
                targets.push(i as u32);
            }
        }
        Ok(Self {
            coeffs: support.iter().map(|(_, v)| *v).collect(),
            targets,
            range,
        })
    }

    /// `w = T h` for `h` supported on the first `h.len()` indices.
    fn forward(&self, h: &[f64], w: &mut [f64]) {
        w.iter_mut().for_each(|v| *v = 0.0);
        let k = self.coeffs.len();
        for (x, hx) in h.iter().enumerate() {
            if *hx == 0.0 {
                continue;
            }
            let row = &self.targets[x * k..(x + 1) * k];
            for (t, c) in row.iter().zip(&self.coeffs) {
                w[*t as usize] += c * hx;
            }
        }
    }

    /// `h = P_m T* w` on the first `h.len()` indices.
    fn adjoint(&self, w: &[f64], h: &mut [f64]) {
        let k = self.coeffs.len();
        for (x, hx) in h.iter_mut().enumerate() {
            let row = &self.targets[x * k..(x + 1) * k];
            *hx = row
                .iter()
                .zip(&self.coeffs)
                .map(|(t, c)| c * w[*t as usize])
                .sum();
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Lower bound on `‖T_f‖` from the largest singular value of `T_f` on
/// `ℓ²(B_m)`, by power iteration on `h ↦ P_m f̃*(f*h)`.
///
/// The truncation is swept over `0, 1, 2, 4, …, m`, each run from the same
/// start vector; the history records the running maximum. `table` must have
/// radius at least `m + ℓ(f)`.
pub fn opnorm_lower(
    f: &FinSuppFunction,
    table: &BallTable,
    m: usize,
    opts: &EstimatorOptions,
) -> Result<OpNormEstimate, ConvolutionError> {
    let ceiling = f.l1_norm();
    if f.is_empty() {
        return Ok(OpNormEstimate {
            truncation_radius: m,
            iterations: 0,
            value: 0.0,
            converged: true,
            ceiling,
            history: vec![],
        });
    }
    let ell = ell_of(f, &|x: &Element| table.length_in_table(x))?;
    if table.radius() < m + ell {
        return Err(ConvolutionError::BallUnavailable {
            needed: m + ell,
            have: table.radius(),
        });
    }
    let op = TruncatedOperator::new(f, table, m)?;
    let full = table.ball_size(m);
    let mut h = vec![0.0; full];
    let mut w = vec![0.0; op.range];
    let mut schedule = vec![0];
    let mut step = 1;
    while step < m {
        schedule.push(step);
        step *= 2;
    }
    if m > 0 {
        schedule.push(m);
    }

    let mut best = 0.0f64;
    let mut total = 0;
    let mut history = Vec::with_capacity(schedule.len());
    let mut converged = true;
    for &mk in &schedule {
        let dim = table.ball_size(mk);
        let hk = &mut h[..dim];
        hk.iter_mut().for_each(|v| *v = 0.0);
        hk[0] = 1.0;
        for v in hk.iter_mut().take(table.ball_size(1)).skip(1) {
            *v = opts.perturbation;
        }
        let n0 = norm(hk);
        hk.iter_mut().for_each(|v| *v /= n0);
        let mut value = 0.0f64;
        let mut iterations = 0;
        let mut done = false;
        while iterations < opts.max_iter {
            op.forward(hk, &mut w);
            let next = norm(&w);
            iterations += 1;
            let change = (next - value).abs();
            value = value.max(next);
            if change <= opts.tol * next {
                done = true;
                break;
            }
            op.adjoint(&w, hk);
            let n = norm(hk);
            if n == 0.0 {
                done = true;
                break;
            }
            hk.iter_mut().for_each(|v| *v /= n);
        }
        total += iterations;
        converged &= done;
        best = best.max(value);
        history.push(HistoryEntry {
            m: mk,
            value: best,
            iterations,
            converged: done,
        });
    }
    Ok(OpNormEstimate {
        truncation_radius: m,
        iterations: total,
        value: best,
        converged,
        ceiling,
        history,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RdRow {
    pub n: usize,
    pub ball_size: usize,
    pub l2: f64,
    pub opnorm_lower: f64,
    pub ratio: f64,
    pub converged: bool,
}

/// Ratios `r_n = ‖χ_{B_n}‖_op / ‖χ_{B_n}‖₂` with polynomial and exponential
/// fits over the top half of the radii.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RdProfile {
    pub truncation_radius: usize,
    pub rows: Vec<RdRow>,
    /// `log r_n` against `log(1+n)`; the slope is the fitted exponent.
    pub poly_fit: Option<LineFit>,
    /// `log r_n` against `n`.
    pub exp_fit: Option<LineFit>,
    pub fit_window: (usize, usize),
}

impl RdProfile {
    pub fn fitted_exponent(&self) -> Option<f64> {
        self.poly_fit.map(|f| f.slope)
    }

    /// CSV with columns `n,ball_size,l2,opnorm_lower_m,ratio`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "ball_size", "l2", "opnorm_lower_m", "ratio"])?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.ball_size.to_string(),
                format!("{:.12}", r.l2),
                format!("{:.12}", r.opnorm_lower),
                format!("{:.12}", r.ratio),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// RD ratios for `n = 1..=radius` at truncation `m`; `table` must reach
/// `radius + m`.
pub fn rd_profile(
    table: &BallTable,
    radius: usize,
    m: usize,
    opts: &EstimatorOptions,
) -> Result<RdProfile, ConvolutionError> {
    if table.radius() < radius + m {
        return Err(ConvolutionError::BallUnavailable {
            needed: radius + m,
            have: table.radius(),
        });
    }
    let mut rows = Vec::with_capacity(radius);
    for n in 1..=radius {
        let f = FinSuppFunction::ball_indicator(table, n);
        let est = opnorm_lower(&f, table, m, opts)?;
        let l2 = f.l2_norm();
        rows.push(RdRow {
            n,
            ball_size: table.ball_size(n),
            l2,
            opnorm_lower: est.value,
            ratio: est.value / l2,
            converged: est.converged,
        });
    }
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.ratio)).collect();
    let window = top_half(&points, 1.0);
    let ns: Vec<f64> = window.iter().map(|p| p.0).collect();
    let log_r: Vec<f64> = window.iter().map(|p| p.1.ln()).collect();
    let log_n1: Vec<f64> = ns.iter().map(|n| (1.0 + n).ln()).collect();
    Ok(RdProfile {
        truncation_radius: m,
        poly_fit: fit_line(&log_n1, &log_r),
        exp_fit: fit_line(&ns, &log_r),
        fit_window: (
            window.first().map_or(0, |p| p.0 as usize),
            window.last().map_or(0, |p| p.0 as usize),
        ),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RdCheck {
    /// `false` certifies a violation, since `lhs` is a lower bound.
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub margin: f64,
    pub ell: usize,
}

/// Evaluate `‖f‖_op ≤ C(1+ℓ(f))^s ‖f‖₂` with the truncated lower bound in
/// place of `‖f‖_op`.
pub fn check_rd_inequality(
    f: &FinSuppFunction,
    c: f64,
    s: f64,
    table: &BallTable,
    m: usize,
    opts: &EstimatorOptions,
) -> Result<RdCheck, ConvolutionError> {
    let ell = ell_of(f, table)?;
    let lhs = opnorm_lower(f, table, m, opts)?.value;
    let rhs = c * (1.0 + ell as f64).powf(s) * f.l2_norm();
    Ok(RdCheck {
        holds: lhs <= rhs * (1.0 + 1e-9),
        lhs,
        rhs,
        margin: rhs - lhs,
        ell,
    })
}
