//! Units of bounded Frobenius norm in the canonical embedding.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::analysis::{linear_fit, SumCurve};
use crate::error::{Error, Result};
use crate::exact::rational_to_f64;
use crate::lattice::within_radius;
use crate::numberfield::{unit_density_constant, NumberField};

/// Scans integer exponent vectors `v` of a free abelian group acting by
/// block-wise scalars with log-moduli `l_i(v) = sum_j v_j logs[j][i]`.
///
/// The generators satisfy `sum_i logs[j][i] = 0` (determinant one), so the
/// constraints `l_i <= upper_i` also force `l_i >= -sum_{i' != i} upper_i'`
/// and cut out a bounded box of exponents.
#[derive(Debug, Clone)]
pub struct ExponentScanner {
    logs: Vec<Vec<f64>>,
    blocks: usize,
    /// blocks whose log-rows form an invertible square system
    pivots: Vec<usize>,
    pivot_inverse: DMatrix<f64>,
}

impl ExponentScanner {
    pub fn new(logs: Vec<Vec<f64>>, blocks: usize) -> Result<Self> {
        let rank = logs.len();
        if rank >= blocks.max(1) && rank > 0 {
            return Err(Error::InvalidArgument(format!("{rank} generators on {blocks} blocks")));
        }
        if logs.iter().any(|l| l.len() != blocks) {
            return Err(Error::DimensionMismatch { expected: blocks, got: logs.iter().map(|l| l.len()).find(|&n| n != blocks).unwrap_or(0) });
        }
        for (j, l) in logs.iter().enumerate() {
            let s: f64 = l.iter().sum();
            let scale: f64 = l.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
            if s.abs() > 1e-8 * scale {
                return Err(Error::InvalidArgument(format!("generator {j} does not preserve the determinant (log sum {s:e})")));
            }
        }
        if rank == 0 {
            return Ok(ExponentScanner { logs, blocks, pivots: Vec::new(), pivot_inverse: DMatrix::zeros(0, 0) });
        }
        // first subset of `rank` blocks with an invertible square system
        let mut subset: Vec<usize> = (0..rank).collect();
        loop {
            let a = DMatrix::from_fn(rank, rank, |s, j| logs[j][subset[s]]);
            if a.determinant().abs() > 1e-9 {
                let inv = a.try_inverse().ok_or_else(|| Error::InvalidArgument("singular unit logarithms".into()))?;
                return Ok(ExponentScanner { logs, blocks, pivots: subset, pivot_inverse: inv });
            }
            if !next_subset(&mut subset, blocks) {
                return Err(Error::InvalidArgument("unit logarithms are linearly dependent".into()));
            }
        }
    }

    pub fn rank(&self) -> usize {
        self.logs.len()
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    /// `l_i(v)` for every block.
    pub fn block_logs(&self, v: &[i64]) -> Vec<f64> {
        (0..self.blocks)
            .map(|i| v.iter().zip(&self.logs).map(|(&e, l)| e as f64 * l[i]).sum())
            .collect()
    }

    /// `sum_j max_i |logs[j][i]|`, twice the worst offset of a balanced representative.
    pub fn spread(&self) -> f64 {
        self.logs.iter().map(|l| l.iter().fold(0.0f64, |m, x| m.max(x.abs()))).sum()
    }

    /// Half-widths of an exponent box containing every `v` with `l_i(v) <= upper_i`.
    pub fn box_bounds(&self, upper: &[f64]) -> Option<Vec<i64>> {
        let total: f64 = upper.iter().sum();
        if total < 0.0 {
            // l sums to zero, so some l_i >= 0 > upper_i is forced
            return None;
        }
        let reach: Vec<f64> = self
            .pivots
            .iter()
            .map(|&i| {
                let lo = -(total - upper[i]);
                upper[i].abs().max(lo.abs())
            })
            .collect();
        Some(
            (0..self.rank())
                .map(|j| {
                    let b: f64 = (0..self.rank()).map(|s| self.pivot_inverse[(j, s)].abs() * reach[s]).sum();
                    (b * (1.0 + 1e-9) + 1e-9).floor() as i64
                })
                .collect(),
        )
    }

    /// Calls `visit(v, l(v))` for every `v` in the box with `l_i(v) <= upper_i + slack` for all `i`.
    pub fn for_each<F: FnMut(&[i64], &[f64])>(&self, upper: &[f64], slack: f64, mut visit: F) {
        let Some(bounds) = self.box_bounds(upper) else { return };
        let r = self.rank();
        let mut v: Vec<i64> = bounds.iter().map(|b| -b).collect();
        loop {
            let l = self.block_logs(&v);
            if l.iter().zip(upper).all(|(x, u)| *x <= u + slack) {
                visit(&v, &l);
            }
            // odometer
            let mut j = 0;
            loop {
                if j == r {
                    return;
                }
                if v[j] < bounds[j] {
                    v[j] += 1;
                    break;
                }
                v[j] = -bounds[j];
                j += 1;
            }
        }
    }

    /// Number of exponent vectors with `sum_i weight_i exp(2 l_i(v)) <= radius^2`.
    pub fn count_in_ball(&self, weights: &[f64], radius: f64) -> u64 {
        let upper: Vec<f64> = weights.iter().map(|w| 0.5 * (radius * radius / w).ln()).collect();
        let mut count = 0;
        self.for_each(&upper, 1e-9, |_, l| {
            let norm_sq: f64 = weights.iter().zip(l).map(|(w, x)| w * (2.0 * x).exp()).sum();
            if within_radius(norm_sq.sqrt(), radius) {
                count += 1;
            }
        });
        count
    }
}

fn next_subset(s: &mut [usize], n: usize) -> bool {
    let k = s.len();
    for i in (0..k).rev() {
        if s[i] < n - k + i {
            s[i] += 1;
            for j in i + 1..k {
                s[j] = s[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[derive(Debug, Clone, Serialize)]
pub struct UnitBallCount {
    pub field: String,
    pub radius: f64,
    pub count: u64,
    /// `N_K (log M)^(n-1)`
    pub predicted: f64,
    pub residual: f64,
    /// false when the catalog units generate a proper subgroup; the count is then a lower bound
    pub complete: bool,
    /// exact units in lexicographic order of their coordinates
    pub units: Vec<Vec<i64>>,
}

/// All units `u` of `O_K` with `||psi(u)||_F <= M`.
///
/// Units are `zeta * prod_j eps_j^(k_j)`; roots of unity do not change the
/// norm, so the scan runs over the free part and membership is decided on
/// the exact Frobenius norm.
pub fn units_in_ball(k: &Arc<NumberField>, radius: f64) -> Result<UnitBallCount> {
    if !(radius >= 1.0) {
        return Err(Error::InvalidArgument(format!("unit ball radius must be at least 1, got {radius}")));
    }
    k.require_diagonal_type()?;
    let n = k.embedding_dimension();
    let scanner = ExponentScanner::new(k.unit_logs(), n)?;
    let upper = vec![radius.ln(); n];
    let mut free = Vec::new();
    let mut failure = None;
    scanner.for_each(&upper, 1e-9, |v, l| {
        if failure.is_some() {
            return;
        }
        let approx: f64 = l.iter().map(|x| (2.0 * x).exp()).sum();
        if approx.sqrt() > radius * (1.0 + 1e-6) + 1e-6 {
            return;
        }
        match k.apply_units_int(k.one(), v).and_then(|u| Ok((k.frobenius_sq_exact(&u)?, u))) {
            Ok((norm_sq, u)) => {
                if within_radius(rational_to_f64(&norm_sq).sqrt(), radius) {
                    free.push(u);
                }
            }
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let mut units = Vec::with_capacity(free.len() * k.torsion_units().len());
    for u in &free {
        for z in k.torsion_units() {
            units.push(k.mul_int(u, z)?);
        }
    }
    units.sort();
    units.dedup();
    let count = units.len() as u64;
    let predicted = unit_density_constant(k, n)? * radius.ln().powi(n as i32 - 1);
    Ok(UnitBallCount {
        field: k.name().to_string(),
        radius,
        count,
        predicted,
        residual: count as f64 - predicted,
        complete: k.unit_index() == 1,
        units,
    })
}

pub fn unit_count_curve(k: &Arc<NumberField>, radii: &[f64]) -> Result<Vec<UnitBallCount>> {
    radii.iter().map(|&m| units_in_ball(k, m)).collect()
}

/// The counts as a [`SumCurve`] (value = count).
pub fn unit_sum_curve(rows: &[UnitBallCount]) -> SumCurve {
    let label = rows.first().map(|r| format!("units {}", r.field)).unwrap_or_default();
    let mut c = SumCurve::new(label, 0.0, false);
    for r in rows {
        c.push(r.radius, r.count as f64, r.count);
    }
    c
}

/// Least-squares slope of the count against `(log M)^(n-1)`.
pub fn count_slope(rows: &[UnitBallCount], n: usize) -> Result<f64> {
    let xs: Vec<f64> = rows.iter().map(|r| r.radius.ln().powi(n as i32 - 1)).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.count as f64).collect();
    Ok(linear_fit(&xs, &ys)?.0)
}
