//! Inverse determinant sums `S^m(M) = sum |det X|^(-m)` over the nonzero points of a Frobenius ball.
//!
//! Two evaluators:
//! * direct enumeration of the ball ([`inverse_det_sum`], [`inverse_det_sum_curve`]);
//! * the determinant-truncated orbit sum ([`OrbitTable`]) for lattices with a
//!   block-scalar unit action. Points are grouped into unit orbits, the orbits
//!   with `|det| <= D` are summed exactly and the rest is bounded rigorously.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::SumCurve;
use crate::error::{Error, Result};
use crate::lattice::{frobenius_sq, unit_ball_volume, within_radius, ExactAbsDet, LatticePoint, MatrixLattice};
use crate::sum::CompensatedSum;
use crate::units::ExponentScanner;

#[derive(Debug, Clone, Serialize)]
pub struct DetSum {
    pub radius: f64,
    pub m: f64,
    pub value: f64,
    pub point_count: u64,
    pub min_abs_det: Option<f64>,
}

fn summand(p: &LatticePoint, m: f64) -> Result<f64> {
    if p.suspect_zero {
        return Err(Error::NvdViolation { coords: p.coords.clone(), abs_det: p.abs_det });
    }
    Ok(match &p.exact_det {
        Some(d) => d.inverse_power(m),
        None => p.abs_det.powf(-m),
    })
}

fn check_m(m: f64) -> Result<()> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::InvalidArgument(format!("the exponent m must be positive, got {m}")));
    }
    Ok(())
}

#[derive(Clone)]
struct Partial {
    sum: CompensatedSum,
    count: u64,
    min: Option<f64>,
}

impl Partial {
    fn new() -> Self {
        Partial { sum: CompensatedSum::new(), count: 0, min: None }
    }

    fn add(&mut self, term: f64, det: f64) {
        self.sum.add(term);
        self.count += 1;
        self.min = Some(self.min.map_or(det, |m| m.min(det)));
    }

    fn merge(&mut self, other: &Partial) {
        self.sum.merge(&other.sum);
        self.count += other.count;
        self.min = match (self.min, other.min) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
    }
}

/// Direct enumeration at each radius of `radii` (one pass over the largest ball).
///
/// Each value is bit-identical to a single-radius call: partitions and the
/// order inside them are the same, and empty partitions merge as no-ops.
pub fn inverse_det_sum_curve(lattice: &MatrixLattice, radii: &[f64], m: f64, budget: u64) -> Result<Vec<DetSum>> {
    check_m(m)?;
    if radii.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::InvalidArgument("radii must be nonnegative".into()));
    }
    let max = radii.iter().cloned().fold(0.0, f64::max);
    let parts = if max > 0.0 {
        lattice.fold_ball(
            max,
            budget,
            || vec![Partial::new(); radii.len()],
            |acc, p| {
                let term = summand(&p, m)?;
                for (a, &r) in acc.iter_mut().zip(radii) {
                    if within_radius(p.frobenius_norm, r) {
                        a.add(term, p.abs_det);
                    }
                }
                Ok(())
            },
        )?
    } else {
        Vec::new()
    };
    let mut total = vec![Partial::new(); radii.len()];
    for part in &parts {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    Ok(radii
        .iter()
        .zip(total)
        .map(|(&radius, t)| DetSum { radius, m, value: t.sum.value(), point_count: t.count, min_abs_det: t.min })
        .collect())
}

/// `S^m(M)` by direct enumeration. An empty ball gives the empty sum 0.
pub fn inverse_det_sum(lattice: &MatrixLattice, radius: f64, m: f64, budget: u64) -> Result<DetSum> {
    Ok(inverse_det_sum_curve(lattice, &[radius], m, budget)?.remove(0))
}

/// `Vol^(mn/k) S^m(M Vol^(1/k))`; with `legacy` the radius is not rescaled.
pub fn normalized_inverse_det_sum(lattice: &MatrixLattice, radius: f64, m: f64, legacy: bool, budget: u64) -> Result<DetSum> {
    let f = lattice.normalization_factor(m);
    let r = if legacy { radius } else { radius * f.radius_factor };
    let s = inverse_det_sum(lattice, r, m, budget)?;
    Ok(DetSum { radius, value: f.scale * s.value, ..s })
}

/// Pairwise-error union bound `S^(2 n_r)(2M)`.
pub fn union_bound(lattice: &MatrixLattice, radius: f64, receive_antennas: u32, budget: u64) -> Result<f64> {
    if receive_antennas == 0 {
        return Err(Error::InvalidArgument("at least one receive antenna is required".into()));
    }
    Ok(inverse_det_sum(lattice, 2.0 * radius, 2.0 * receive_antennas as f64, budget)?.value)
}

pub fn det_sum_curve(label: &str, rows: &[DetSum], normalized: bool) -> SumCurve {
    let mut c = SumCurve::new(label, rows.first().map_or(0.0, |r| r.m), normalized);
    for r in rows {
        c.push(r.radius, r.value, r.point_count);
    }
    c
}

// ---------------------------------------------------------------------------
// determinant-truncated orbit sums

/// Default cap on the number of lattice points visited while building an [`OrbitTable`].
pub const DEFAULT_ORBIT_WORK: u64 = 5_000_000;

#[derive(Debug, Clone)]
pub struct OrbitRep {
    pub coords: Vec<i64>,
    pub det: ExactAbsDet,
    pub det_value: f64,
    pub block_norms: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    rank: usize,
    size: usize,
    blocks: usize,
    block_size: usize,
    c: f64,
    rho: f64,
    volume: f64,
    /// half the sum of basis norms: covering radius of a centred fundamental cell
    cell_radius: f64,
}

impl Geometry {
    /// Radius of a ball holding a representative of every orbit with `|det| <= d`.
    fn small_ball(&self, d: f64) -> f64 {
        (self.c * self.blocks as f64 * (2.0 * self.rho).exp() * d.powf(2.0 / self.size as f64)).sqrt()
    }

    /// Rigorous bound on the number of lattice points with norm at most `r`.
    fn point_bound(&self, r: f64) -> f64 {
        unit_ball_volume(self.rank) * (r + self.cell_radius).powi(self.rank as i32) / self.volume
    }

    /// Largest `|det|` of any matrix of Frobenius norm `M` (AM-GM on singular values).
    fn max_det(&self, radius: f64) -> f64 {
        let n = self.size as f64;
        (radius * radius / n).powf(n / 2.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncatedSum {
    pub radius: f64,
    pub m: f64,
    pub det_cap: f64,
    /// exact sum over the orbits with `|det| <= det_cap`
    pub value: f64,
    /// `S^m(M) - value` lies in `[0, tail_bound]`
    pub tail_bound: f64,
    /// points counted in `value`
    pub point_count: u64,
    pub min_abs_det: Option<f64>,
    /// `det_cap` covers every determinant in the ball, so `value = S^m(M)`
    pub exact: bool,
}

/// Canonical orbit representatives of a lattice with a unit action, up to a determinant cap.
#[derive(Debug, Clone)]
pub struct OrbitTable {
    det_cap: f64,
    geometry: Geometry,
    scanner: ExponentScanner,
    reps: Vec<OrbitRep>,
    points_scanned: u64,
}

fn block_norms(matrix: &nalgebra::DMatrix<num_complex::Complex64>, blocks: usize, b: usize) -> Vec<f64> {
    (0..blocks)
        .map(|i| {
            let s = matrix.view((i * b, i * b), (b, b));
            s.iter().map(|z| z.norm_sqr()).sum()
        })
        .collect()
}

impl OrbitTable {
    /// Enumerates one representative per orbit with `|det| <= det_cap`.
    ///
    /// The representative is the orbit point of least Frobenius norm, ties
    /// broken by the exact norm and then lexicographically on coordinates.
    pub fn build(lattice: &MatrixLattice, det_cap: f64, budget: u64) -> Result<OrbitTable> {
        let tag = lattice
            .tag()
            .ok_or_else(|| Error::OutOfScope("truncated sums need an element-tagged lattice".into()))?
            .clone();
        let action = tag
            .orbit_action()
            .ok_or_else(|| Error::OutOfScope("the lattice has no block-scalar unit action".into()))?;
        if action.blocks * action.block_size != lattice.matrix_size() {
            return Err(Error::DimensionMismatch { expected: lattice.matrix_size(), got: action.blocks * action.block_size });
        }
        if !(det_cap >= 1.0) {
            return Err(Error::InvalidArgument(format!("determinant cap must be at least 1, got {det_cap}")));
        }
        let scanner = ExponentScanner::new(action.unit_logs.clone(), action.blocks)?;
        let geometry = Geometry {
            rank: lattice.rank(),
            size: lattice.matrix_size(),
            blocks: action.blocks,
            block_size: action.block_size,
            c: action.upper_block_constant,
            rho: 0.5 * scanner.spread(),
            volume: lattice.volume(),
            cell_radius: 0.5 * (0..lattice.rank()).map(|i| lattice.gram()[(i, i)].sqrt()).sum::<f64>(),
        };
        let radius = geometry.small_ball(det_cap);
        let parts = lattice.fold_ball(
            radius,
            budget,
            || (Vec::new(), 0u64),
            |(acc, seen), p| {
                *seen += 1;
                let det = p.exact_det.clone().expect("tagged lattice points carry exact determinants");
                if det.is_zero() {
                    return Err(Error::NvdViolation { coords: p.coords.clone(), abs_det: 0.0 });
                }
                let det_value = det.to_f64();
                if det_value > det_cap {
                    return Ok(());
                }
                let norms = block_norms(&lattice.point_matrix(&p.coords), geometry.blocks, geometry.block_size);
                if is_canonical(&scanner, tag.as_ref(), &p.coords, &norms)? {
                    acc.push(OrbitRep { coords: p.coords, det, det_value, block_norms: norms });
                }
                Ok(())
            },
        )?;
        let mut reps = Vec::new();
        let mut points_scanned = 0;
        for (r, s) in parts {
            reps.extend(r);
            points_scanned += s;
        }
        Ok(OrbitTable { det_cap, geometry, scanner, reps, points_scanned })
    }

    pub fn det_cap(&self) -> f64 {
        self.det_cap
    }

    pub fn representatives(&self) -> &[OrbitRep] {
        &self.reps
    }

    pub fn points_scanned(&self) -> u64 {
        self.points_scanned
    }

    /// Uniform bound on `#{v : ||v x|| <= M}` over orbits with `|det| >= 1`.
    fn orbit_count_bound(&self, radius: f64) -> u64 {
        let g = &self.geometry;
        if self.scanner.rank() == 0 {
            return 1;
        }
        let w = g.block_size as f64;
        let q = g.blocks as f64;
        let kappa = g.rho + 0.5 * (g.c * q / w).ln();
        let t = (radius / w.sqrt()).ln() + (q - 1.0) * kappa;
        let mut count = 0;
        self.scanner.for_each(&vec![t; g.blocks], 1e-9, |_, _| count += 1);
        count
    }

    /// Bound on the contribution of the orbits with `|det| > det_cap` to `S^m(M)`.
    pub fn tail_bound(&self, radius: f64, m: f64) -> f64 {
        let g = &self.geometry;
        let d_max = g.max_det(radius);
        if self.det_cap >= d_max {
            return 0.0;
        }
        let per_orbit = self.orbit_count_bound(radius) as f64;
        let ball_points = g.point_bound(radius);
        let mut tail = CompensatedSum::new();
        let mut lo = self.det_cap;
        while lo < d_max {
            let hi = 2.0 * lo;
            // canonical representatives of the orbits in (lo, hi] lie in both balls
            let reps = g.point_bound(g.small_ball(hi).min(radius));
            tail.add((per_orbit * reps).min(ball_points) * lo.powf(-m));
            lo = hi;
        }
        tail.value()
    }

    pub fn evaluate(&self, radius: f64, m: f64) -> Result<TruncatedSum> {
        check_m(m)?;
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
        }
        const CHUNK: usize = 4096;
        let parts: Vec<Partial> = self
            .reps
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut p = Partial::new();
                for rep in chunk {
                    let c = self.scanner.count_in_ball(&rep.block_norms, radius);
                    if c > 0 {
                        p.sum.add(c as f64 * rep.det.inverse_power(m));
                        p.count += c;
                        p.min = Some(p.min.map_or(rep.det_value, |x: f64| x.min(rep.det_value)));
                    }
                }
                p
            })
            .collect();
        let mut total = Partial::new();
        for p in &parts {
            total.merge(p);
        }
        let tail_bound = self.tail_bound(radius, m);
        Ok(TruncatedSum {
            radius,
            m,
            det_cap: self.det_cap,
            value: total.sum.value(),
            tail_bound,
            point_count: total.count,
            min_abs_det: total.min,
            exact: self.det_cap >= self.geometry.max_det(radius),
        })
    }
}

fn is_canonical(scanner: &ExponentScanner, tag: &dyn crate::lattice::ElementTag, coords: &[i64], norms: &[f64]) -> Result<bool> {
    if scanner.rank() == 0 {
        return Ok(true);
    }
    let f0: f64 = norms.iter().sum();
    let upper: Vec<f64> = norms.iter().map(|b| 0.5 * (f0 * (1.0 + 1e-9) / b).ln()).collect();
    let mut ties = Vec::new();
    let mut smaller = false;
    scanner.for_each(&upper, 1e-9, |v, l| {
        if smaller || v.iter().all(|&e| e == 0) {
            return;
        }
        let f: f64 = norms.iter().zip(l).map(|(b, x)| b * (2.0 * x).exp()).sum();
        if f < f0 * (1.0 - 1e-9) {
            smaller = true;
        } else if f <= f0 * (1.0 + 1e-9) {
            ties.push(v.to_vec());
        }
    });
    if smaller {
        return Ok(false);
    }
    if ties.is_empty() {
        return Ok(true);
    }
    let own = tag.frobenius_norm_sq(coords)?;
    for v in ties {
        let other = tag.apply_units(coords, &v)?;
        let norm = tag.frobenius_norm_sq(&other)?;
        if norm < own || (norm == own && other.as_slice() < coords) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Largest determinant cap whose representative ball holds about `work` points,
/// or the exact cap for `max_radius` if that is cheaper.
pub fn choose_det_cap(lattice: &MatrixLattice, max_radius: f64, work: u64) -> Result<f64> {
    let action = lattice
        .tag()
        .and_then(|t| t.orbit_action())
        .ok_or_else(|| Error::OutOfScope("the lattice has no block-scalar unit action".into()))?;
    let scanner = ExponentScanner::new(action.unit_logs.clone(), action.blocks)?;
    let k = lattice.rank();
    let n = lattice.matrix_size() as f64;
    let spread = action.upper_block_constant * action.blocks as f64 * scanner.spread().exp();
    let exact = (max_radius * max_radius / n).powf(n / 2.0);
    let r_work = (work as f64 * lattice.volume() / unit_ball_volume(k)).powf(1.0 / k as f64);
    let cap = (r_work * r_work / spread).powf(n / 2.0);
    Ok(cap.min(exact).max(1.0))
}

/// Truncated sums on a radius grid from one table built for the largest radius.
pub fn truncated_sum_curve(lattice: &MatrixLattice, radii: &[f64], m: f64, work: u64, budget: u64) -> Result<Vec<TruncatedSum>> {
    let max = radii.iter().cloned().fold(0.0, f64::max);
    let cap = choose_det_cap(lattice, max, work)?;
    let table = OrbitTable::build(lattice, cap, budget)?;
    radii.iter().map(|&r| table.evaluate(r, m)).collect()
}

/// Normalized truncated sums `Vol^(mn/k) S^m(M Vol^(1/k))`, labelled by the unscaled radii.
pub fn normalized_truncated_sums(lattice: &MatrixLattice, radii: &[f64], m: f64, work: u64, budget: u64) -> Result<Vec<TruncatedSum>> {
    let f = lattice.normalization_factor(m);
    let scaled: Vec<f64> = radii.iter().map(|r| r * f.radius_factor).collect();
    let sums = truncated_sum_curve(lattice, &scaled, m, work, budget)?;
    Ok(radii
        .iter()
        .zip(sums)
        .map(|(&radius, s)| TruncatedSum {
            radius,
            value: f.scale * s.value,
            tail_bound: f.scale * s.tail_bound,
            ..s
        })
        .collect())
}

pub fn truncated_curve(label: &str, rows: &[TruncatedSum], normalized: bool) -> SumCurve {
    let mut c = SumCurve::new(label, rows.first().map_or(0.0, |r| r.m), normalized);
    for r in rows {
        c.push(r.radius, r.value, r.point_count);
    }
    c
}

/// `||X||_F^2` of a point rebuilt from its exact preimage.
pub fn preimage_norm_sq(lattice: &MatrixLattice, coords: &[i64]) -> Result<f64> {
    match lattice.tag() {
        Some(t) => Ok(frobenius_sq(&t.preimage_matrix(coords)?)),
        None => Ok(frobenius_sq(&lattice.point_matrix(coords))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{canonical_embedding_lattice, DEFAULT_BUDGET};
    use crate::numberfield::catalog_lookup;

    fn field_lattice(name: &str) -> MatrixLattice {
        canonical_embedding_lattice(&catalog_lookup(name).unwrap()).unwrap()
    }

    #[test]
    fn gaussian_small_ball() {
        let l = field_lattice("GAUSSIAN");
        let s2 = inverse_det_sum(&l, 2.0, 2.0, DEFAULT_BUDGET).unwrap();
        assert_eq!(s2.value, 7.0);
        assert_eq!(s2.point_count, 12);
        assert_eq!(inverse_det_sum(&l, 2.0, 4.0, DEFAULT_BUDGET).unwrap().value, 5.25);
        assert_eq!(s2.min_abs_det, Some(1.0));
    }

    #[test]
    fn empty_ball_is_the_empty_sum() {
        let l = field_lattice("GAUSSIAN");
        let s = inverse_det_sum(&l, 0.5, 2.0, DEFAULT_BUDGET).unwrap();
        assert_eq!((s.value, s.point_count, s.min_abs_det), (0.0, 0, None));
    }

    #[test]
    fn curve_matches_single_radius_calls_bitwise() {
        let l = field_lattice("REAL_QUADRATIC_5");
        let radii = [3.0, 7.5, 20.0];
        let curve = inverse_det_sum_curve(&l, &radii, 2.0, DEFAULT_BUDGET).unwrap();
        for (row, &r) in curve.iter().zip(&radii) {
            let single = inverse_det_sum(&l, r, 2.0, DEFAULT_BUDGET).unwrap();
            assert_eq!(row.value.to_bits(), single.value.to_bits());
            assert_eq!(row.point_count, single.point_count);
        }
    }

    #[test]
    fn nonpositive_m_rejected() {
        let l = field_lattice("GAUSSIAN");
        assert!(inverse_det_sum(&l, 2.0, 0.0, DEFAULT_BUDGET).is_err());
    }

    #[test]
    fn exact_cap_reproduces_direct_sum() {
        for (name, m) in [("REAL_QUADRATIC_5", 2.0), ("GAUSSIAN", 4.0), ("CYCLOTOMIC_5", 4.0)] {
            let l = field_lattice(name);
            let radius = 12.0;
            let direct = inverse_det_sum(&l, radius, m, DEFAULT_BUDGET).unwrap();
            let cap = choose_det_cap(&l, radius, u64::MAX).unwrap();
            let t = OrbitTable::build(&l, cap, DEFAULT_BUDGET).unwrap().evaluate(radius, m).unwrap();
            assert!(t.exact, "{name}");
            assert_eq!(t.point_count, direct.point_count, "{name}");
            assert!((t.value - direct.value).abs() <= 1e-12 * direct.value, "{name}: {} vs {}", t.value, direct.value);
            assert_eq!(t.tail_bound, 0.0);
        }
    }

    #[test]
    fn small_cap_brackets_direct_sum() {
        let l = field_lattice("REAL_QUADRATIC_5");
        let radius = 40.0;
        let direct = inverse_det_sum(&l, radius, 2.0, DEFAULT_BUDGET).unwrap().value;
        for cap in [1.0, 5.0, 30.0] {
            let t = OrbitTable::build(&l, cap, DEFAULT_BUDGET).unwrap().evaluate(radius, 2.0).unwrap();
            assert!(t.value <= direct * (1.0 + 1e-12), "cap {cap}");
            assert!(direct <= t.value + t.tail_bound, "cap {cap}: {direct} > {} + {}", t.value, t.tail_bound);
        }
    }

    #[test]
    fn units_form_one_orbit() {
        let l = field_lattice("REAL_QUADRATIC_5");
        let t = OrbitTable::build(&l, 1.0, DEFAULT_BUDGET).unwrap();
        // determinant-one orbits: the units (+-1) times the free group
        assert_eq!(t.representatives().len(), 2);
        let s = t.evaluate(10.0, 2.0).unwrap();
        assert_eq!(s.point_count, 18);
    }
}
