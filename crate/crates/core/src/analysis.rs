//! Growth fits on sum curves and finite-radius bound reports.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::detsum::truncated_sum_curve;
use crate::error::{Error, Result};
use crate::lattice::canonical_embedding_lattice;
use crate::numberfield::{normalized_bound_constants, NumberField};
use crate::qoalgebra::{empirical_prefactor, order_lattice, qo_growth_bounds, CyclicAlgebraCode};
use crate::zeta::{ideal_counts, truncated_zeta};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub radius: f64,
    pub value: f64,
    pub point_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumCurve {
    pub label: String,
    pub exponent_m: f64,
    pub samples: Vec<Sample>,
    pub normalized: bool,
}

impl SumCurve {
    pub fn new(label: impl Into<String>, exponent_m: f64, normalized: bool) -> Self {
        SumCurve { label: label.into(), exponent_m, samples: Vec::new(), normalized }
    }

    pub fn push(&mut self, radius: f64, value: f64, point_count: u64) {
        self.samples.push(Sample { radius, value, point_count });
    }

    pub fn radii(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.radius).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.value).collect()
    }

    /// Whether values and point counts are nondecreasing in the radius.
    pub fn is_monotone(&self) -> bool {
        self.samples
            .windows(2)
            .all(|w| w[0].radius <= w[1].radius && w[0].value <= w[1].value && w[0].point_count <= w[1].point_count)
    }
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Span(format!("need at least two paired samples, got {}", xs.len().min(ys.len()))));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Span("all abscissae are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    /// `p` in `value ~ C (log M)^p`
    pub exponent: f64,
    pub prefactor: f64,
    pub residual_rms: f64,
    pub radii_used: Vec<f64>,
}

/// Minimum ratio `max log M / min log M` accepted by [`fit_log_power`].
pub const MIN_LOG_SPAN: f64 = 2.0;

/// Regression of `log value` on `log log M`.
pub fn fit_log_power(curve: &SumCurve) -> Result<GrowthFit> {
    let s = &curve.samples;
    if s.len() < 4 {
        return Err(Error::Span(format!("{}: {} samples, need at least 4", curve.label, s.len())));
    }
    if let Some(bad) = s.iter().find(|p| !(p.radius > 1.0) || !(p.value > 0.0)) {
        return Err(Error::Span(format!(
            "{}: sample at M = {} has value {} (need M > 1 and a positive value)",
            curve.label, bad.radius, bad.value
        )));
    }
    let logs: Vec<f64> = s.iter().map(|p| p.radius.ln()).collect();
    let lo = logs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().cloned().fold(0.0, f64::max);
    if hi / lo < MIN_LOG_SPAN {
        return Err(Error::Span(format!(
            "{}: log M spans [{lo:.3}, {hi:.3}], less than a factor {MIN_LOG_SPAN}",
            curve.label
        )));
    }
    let xs: Vec<f64> = logs.iter().map(|l| l.ln()).collect();
    let ys: Vec<f64> = s.iter().map(|p| p.value.ln()).collect();
    let (slope, intercept) = linear_fit(&xs, &ys)?;
    let rms = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum::<f64>()
        / xs.len() as f64)
        .sqrt();
    Ok(GrowthFit {
        exponent: slope,
        prefactor: intercept.exp(),
        residual_rms: rms,
        radii_used: curve.radii(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthComparison {
    pub qo_fit: Option<GrowthFit>,
    pub nf_fit: Option<GrowthFit>,
    /// `nf / qo` per radius
    pub ratios: Vec<f64>,
    pub ratio_increasing: bool,
}

fn same_grid(a: &SumCurve, b: &SumCurve) -> Result<()> {
    if a.samples.len() != b.samples.len() {
        return Err(Error::GridMismatch(format!("{} has {} radii, {} has {}", a.label, a.samples.len(), b.label, b.samples.len())));
    }
    for (x, y) in a.samples.iter().zip(&b.samples) {
        if (x.radius - y.radius).abs() > 1e-12 * x.radius.abs().max(1.0) {
            return Err(Error::GridMismatch(format!("radius {} vs {}", x.radius, y.radius)));
        }
    }
    if a.exponent_m != b.exponent_m {
        return Err(Error::GridMismatch(format!("exponents differ: {} vs {}", a.exponent_m, b.exponent_m)));
    }
    Ok(())
}

/// Fits both curves and tracks `nf / qo` across the shared radius grid.
///
/// A fit is `None` when the grid is too short for [`fit_log_power`]; the ratio
/// sequence is reported regardless.
pub fn compare_growth(qo: &SumCurve, nf: &SumCurve) -> Result<GrowthComparison> {
    same_grid(qo, nf)?;
    let ratios: Vec<f64> = qo.samples.iter().zip(&nf.samples).map(|(q, f)| f.value / q.value).collect();
    let ratio_increasing = ratios.windows(2).all(|w| w[1] > w[0]);
    Ok(GrowthComparison {
        qo_fit: fit_log_power(qo).ok(),
        nf_fit: fit_log_power(nf).ok(),
        ratios,
        ratio_increasing,
    })
}

/// `M = e^t` for `t = start, start + step, ...` up to `end` inclusive.
pub fn exp_radii(start: f64, end: f64, step: f64) -> Vec<f64> {
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|i| (start + i as f64 * step).exp()).collect()
}

/// Largest `t` of the default grid for a lattice of the given rank.
pub fn default_t_max(rank: usize) -> f64 {
    if rank <= 4 {
        10.0
    } else {
        4.5
    }
}

/// Default grid `t in {3, 3.5, ..., t_max}`.
pub fn default_radii(rank: usize) -> Vec<f64> {
    exp_radii(3.0, default_t_max(rank), 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlackRule {
    pub lower_factor: f64,
    pub upper_factor: f64,
    /// radii with `log M` below this are flagged pre-asymptotic
    pub asymptotic_log: f64,
}

impl Default for SlackRule {
    fn default() -> Self {
        SlackRule { lower_factor: 0.5, upper_factor: 2.0, asymptotic_log: 4.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub radius: f64,
    pub log_radius: f64,
    pub measured: f64,
    /// bracket width: the true value lies in `[measured, measured + measured_slack]`
    pub measured_slack: f64,
    pub lower_term: f64,
    pub upper_term: Option<f64>,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub pre_asymptotic: bool,
}

impl BoundRow {
    pub fn pass(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub label: String,
    pub proposition: String,
    pub lower_formula: String,
    pub upper_formula: String,
    pub slack: SlackRule,
    pub notes: Vec<String>,
    pub rows: Vec<BoundRow>,
}

impl BoundReport {
    /// Verdict over the radii that are not pre-asymptotic.
    pub fn asymptotic_pass(&self) -> bool {
        self.rows.iter().filter(|r| !r.pre_asymptotic).all(|r| r.pass())
    }

    /// Recomputes every verdict from the columns under a (possibly different) slack rule.
    pub fn with_slack(&self, slack: SlackRule) -> BoundReport {
        let rows = self
            .rows
            .iter()
            .map(|r| judge(r.radius, r.measured, r.measured_slack, r.lower_term, r.upper_term, &slack))
            .collect();
        BoundReport { slack, rows, ..self.clone() }
    }
}

pub(crate) fn judge(radius: f64, measured: f64, measured_slack: f64, lower: f64, upper: Option<f64>, slack: &SlackRule) -> BoundRow {
    let log_radius = radius.ln();
    // the lower bound is checked on the certified lower end and the upper bound on the certified upper end
    BoundRow {
        radius,
        log_radius,
        measured,
        measured_slack,
        lower_term: lower,
        upper_term: upper,
        lower_ok: measured >= slack.lower_factor * lower,
        upper_ok: upper.is_none_or(|u| measured + measured_slack <= slack.upper_factor * u),
        pre_asymptotic: log_radius < slack.asymptotic_log,
    }
}

/// Ideal-count table size used for the zeta factor of the upper bounds.
pub const ZETA_TABLE_LIMIT: u64 = 200_000;

/// Measured normalized sums against the diagonal-code bounds of `K` for exponent `m`.
///
/// The sums come from the determinant-truncated evaluator: `measured` is the
/// certified lower end and `measured_slack` the tail bound. The zeta factor of
/// the upper term is the truncated zeta value (a lower bound for `zeta_K(s)`),
/// which makes the upper check conservative.
pub fn field_bound_report(
    k: &Arc<NumberField>,
    m: f64,
    radii: &[f64],
    slack: SlackRule,
    work: u64,
    budget: u64,
) -> Result<BoundReport> {
    let constants = normalized_bound_constants(k, m)?;
    let lattice = canonical_embedding_lattice(k)?;
    let factor = lattice.normalization_factor(m);
    let scaled: Vec<f64> = radii.iter().map(|r| r * factor.radius_factor).collect();
    let sums = truncated_sum_curve(&lattice, &scaled, m, work, budget)?;
    let n = constants.n as i32;
    let mut notes = vec![format!(
        "determinant cap {:.6e}; normalization scale {:.6e}, radius factor {:.6}",
        sums.first().map_or(0.0, |s| s.det_cap),
        factor.scale,
        factor.radius_factor
    )];
    if k.is_totally_real() {
        notes.push("omega = 2 counts the roots of unity +1 and -1; a convention counting only +1 halves N_K".into());
    }
    let (upper_formula, upper_coefficient, upper_power) = if constants.proposition.has_zeta_upper() {
        let table = ideal_counts(k, ZETA_TABLE_LIMIT)?;
        let z = truncated_zeta(&table, constants.zeta_argument, ZETA_TABLE_LIMIT)?;
        notes.push(format!(
            "zeta_K({}) in [{:.10}, {:.10}]",
            constants.zeta_argument,
            z.value,
            z.value + z.tail_bound.unwrap_or(f64::INFINITY)
        ));
        (format!("N~_K zeta_K({}) (log M)^{}", constants.zeta_argument, n - 1), constants.n_tilde * z.value, n - 1)
    } else {
        (format!("c_K (log M)^{n}"), constants.c_k.expect("single-antenna constants carry c_K"), n)
    };
    let rows = radii
        .iter()
        .zip(&sums)
        .map(|(&r, s)| {
            let l = r.ln();
            judge(
                r,
                factor.scale * s.value,
                factor.scale * s.tail_bound,
                constants.n_tilde * l.powi(n - 1),
                Some(upper_coefficient * l.powi(upper_power)),
                &slack,
            )
        })
        .collect();
    Ok(BoundReport {
        label: format!("{} m={m}", k.name()),
        proposition: constants.proposition.label().to_string(),
        lower_formula: format!("N~_K (log M)^{}", n - 1),
        upper_formula,
        slack,
        notes,
        rows,
    })
}

/// Measured `S^(2 n_r)` of an order code against the explicit lower term; the upper side is symbolic.
pub fn order_bound_report(
    algebra: &Arc<CyclicAlgebraCode>,
    receive_antennas: u32,
    radii: &[f64],
    slack: SlackRule,
    work: u64,
    budget: u64,
) -> Result<BoundReport> {
    let first = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let bounds = qo_growth_bounds(algebra, first, receive_antennas)?;
    let lattice = order_lattice(algebra)?;
    let m = 2.0 * receive_antennas as f64;
    let sums = truncated_sum_curve(&lattice, radii, m, work, budget)?;
    let k = algebra.center_degree();
    let mut curve = SumCurve::new(algebra.name(), m, false);
    for s in &sums {
        curve.push(s.radius, s.value, s.point_count);
    }
    let rows = sums
        .iter()
        .map(|s| {
            let lower = qo_growth_bounds(algebra, s.radius, receive_antennas).map(|b| b.lower).unwrap_or(bounds.lower);
            judge(s.radius, s.value, s.tail_bound, lower, None, &slack)
        })
        .collect();
    Ok(BoundReport {
        label: format!("{} n_r={receive_antennas}", algebra.name()),
        proposition: "order code, n_r >= 2".into(),
        lower_formula: format!("N_K (log M)^{}", k - 1),
        upper_formula: bounds.upper_shape,
        slack,
        notes: vec![format!("empirical prefactor sup S/(log M)^{} = {:.6}", k - 1, empirical_prefactor(&curve, k))],
        rows,
    })
}
