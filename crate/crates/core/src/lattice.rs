//! Matrix lattices in `M_n(C)` and exhaustive enumeration of Frobenius balls.
//!
//! A lattice is given by `k` complex `n x n` basis matrices that are linearly
//! independent over the reals. All geometry goes through the real Gram matrix
//! `G_ij = Re tr(B_i B_j^H)`, so the Frobenius norm of `sum z_i B_i` is
//! `sqrt(z^T G z)`.
//!
//! Ball enumeration is Fincke–Pohst on the Cholesky factor of `G`. Points are
//! produced in ascending lexicographic order of their coordinate vectors (the
//! first coordinate is the outermost loop), which makes every downstream sum
//! reproducible bit for bit.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::Rational;
use crate::numberfield::{FieldTag, NumberField};

/// Default cap on the predicted number of lattice points in a ball.
pub const DEFAULT_BUDGET: u64 = 100_000_000;

/// Relative tolerance for the closed-ball boundary: points whose norm exceeds
/// the radius by at most this much (relative to `max(1, M)`) are included.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Numeric determinants below this are reported as suspect zeros.
pub const SUSPECT_ZERO: f64 = 1e-12;

/// Whether a point of Frobenius norm `norm` lies in the closed ball of radius `radius`.
pub fn within_radius(norm: f64, radius: f64) -> bool {
    norm <= radius + BOUNDARY_TOL * radius.max(1.0)
}

/// Exact absolute determinant `radicand^(1/root)`.
///
/// Determinants of diagonal codes over totally complex fields are square roots
/// of integer norms, hence the explicit root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactAbsDet {
    pub radicand: BigInt,
    pub root: u32,
}

impl ExactAbsDet {
    pub fn integer(value: BigInt) -> Self {
        ExactAbsDet { radicand: value, root: 1 }
    }

    pub fn is_zero(&self) -> bool {
        self.radicand.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.radicand == BigInt::from(1)
    }

    pub fn to_f64(&self) -> f64 {
        let r = self.radicand.to_f64().unwrap_or(f64::INFINITY);
        if self.root == 1 {
            r
        } else {
            r.powf(1.0 / self.root as f64)
        }
    }

    /// `|det|^(-m)`, evaluated from the exact radicand.
    pub fn inverse_power(&self, m: f64) -> f64 {
        let r = self.radicand.to_f64().unwrap_or(f64::INFINITY);
        r.powf(-m / self.root as f64)
    }
}

impl fmt::Display for ExactAbsDet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.root {
            1 => write!(f, "{}", self.radicand),
            2 => write!(f, "sqrt({})", self.radicand),
            r => write!(f, "{}^(1/{r})", self.radicand),
        }
    }
}

/// How a group of units acts on a block-diagonal lattice by block-wise scalars.
///
/// Generator `j` multiplies diagonal block `i` by a scalar of modulus
/// `exp(unit_logs[j][i])`. Used by the determinant-truncated sums in
/// [`crate::detsum`].
#[derive(Debug, Clone)]
pub struct OrbitAction {
    pub block_size: usize,
    pub blocks: usize,
    pub unit_logs: Vec<Vec<f64>>,
    /// `C` with `||block||_F^2 <= C |det block|^(2/b)` for every lattice point.
    pub upper_block_constant: f64,
}

/// Exact algebraic preimages for lattices built from number fields or orders.
pub trait ElementTag: Send + Sync + fmt::Debug {
    fn abs_det(&self, coords: &[i64]) -> Result<ExactAbsDet>;

    fn frobenius_norm_sq(&self, coords: &[i64]) -> Result<Rational>;

    /// Matrix rebuilt from the exact preimage (not from the basis matrices).
    fn preimage_matrix(&self, coords: &[i64]) -> Result<DMatrix<Complex64>>;

    fn describe(&self, coords: &[i64]) -> String;

    fn orbit_action(&self) -> Option<OrbitAction> {
        None
    }

    /// Coordinates of the point multiplied by `prod_j unit_j^exponents[j]`.
    fn apply_units(&self, _coords: &[i64], _exponents: &[i64]) -> Result<Vec<i64>> {
        Err(Error::OutOfScope("lattice has no unit action".into()))
    }
}

#[derive(Debug, Clone)]
pub struct LatticePoint {
    pub coords: Vec<i64>,
    pub frobenius_norm: f64,
    pub abs_det: f64,
    pub exact_det: Option<ExactAbsDet>,
    pub suspect_zero: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct NormalizationFactor {
    /// `Vol(L)^(m n / k)`
    pub scale: f64,
    /// `Vol(L)^(1 / k)`
    pub radius_factor: f64,
}

#[derive(Clone)]
pub struct MatrixLattice {
    basis: Vec<DMatrix<Complex64>>,
    matrix_size: usize,
    gram: DMatrix<f64>,
    volume: f64,
    tag: Option<Arc<dyn ElementTag>>,
}

impl fmt::Debug for MatrixLattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixLattice")
            .field("rank", &self.rank())
            .field("matrix_size", &self.matrix_size)
            .field("volume", &self.volume)
            .field("tag", &self.tag)
            .finish()
    }
}

pub fn real_inner(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x * y.conj()).re).sum()
}

pub fn frobenius_sq(a: &DMatrix<Complex64>) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Volume of the unit ball in `R^k`.
pub fn unit_ball_volume(k: usize) -> f64 {
    // pi^(k/2) / Gamma(k/2 + 1), by the two-step recursion V_k = 2 pi / k V_{k-2}
    let mut v = if k % 2 == 0 { 1.0 } else { 2.0 };
    let mut d = if k % 2 == 0 { 0 } else { 1 };
    while d < k {
        d += 2;
        v *= 2.0 * std::f64::consts::PI / d as f64;
    }
    v
}

impl MatrixLattice {
    pub fn new(basis: Vec<DMatrix<Complex64>>, tag: Option<Arc<dyn ElementTag>>) -> Result<Self> {
        let k = basis.len();
        if k == 0 {
            return Err(Error::InvalidArgument("empty lattice basis".into()));
        }
        let n = basis[0].nrows();
        if basis.iter().any(|b| b.nrows() != n || b.ncols() != n) {
            return Err(Error::InvalidArgument("basis matrices must be square of equal size".into()));
        }
        let gram = DMatrix::from_fn(k, k, |i, j| real_inner(&basis[i], &basis[j]));
        let chol = gram.clone().cholesky().ok_or_else(|| {
            Error::InvalidArgument("basis is not linearly independent over R".into())
        })?;
        let volume: f64 = chol.l().diagonal().iter().product();
        Ok(MatrixLattice {
            basis,
            matrix_size: n,
            gram,
            volume,
            tag,
        })
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn matrix_size(&self) -> usize {
        self.matrix_size
    }

    pub fn basis(&self) -> &[DMatrix<Complex64>] {
        &self.basis
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn tag(&self) -> Option<&Arc<dyn ElementTag>> {
        self.tag.as_ref()
    }

    /// The lattice `t L`. The exact tag does not survive scaling.
    pub fn scaled(&self, t: f64) -> Result<MatrixLattice> {
        let basis = self
            .basis
            .iter()
            .map(|b| b.map(|x| x * t))
            .collect();
        MatrixLattice::new(basis, None)
    }

    pub fn point_matrix(&self, coords: &[i64]) -> DMatrix<Complex64> {
        let n = self.matrix_size;
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for (c, b) in coords.iter().zip(&self.basis) {
            if *c != 0 {
                m += b * Complex64::new(*c as f64, 0.0);
            }
        }
        m
    }

    pub fn quadratic_form(&self, coords: &[i64]) -> f64 {
        let k = self.rank();
        let mut s = 0.0;
        for i in 0..k {
            if coords[i] == 0 {
                continue;
            }
            let mut row = 0.0;
            for j in 0..k {
                row += self.gram[(i, j)] * coords[j] as f64;
            }
            s += coords[i] as f64 * row;
        }
        s
    }

    pub fn make_point(&self, coords: Vec<i64>) -> Result<LatticePoint> {
        let matrix = self.point_matrix(&coords);
        let frobenius_norm = frobenius_sq(&matrix).sqrt();
        let (abs_det, exact_det, suspect_zero) = match &self.tag {
            Some(tag) => {
                let exact = tag.abs_det(&coords)?;
                let zero = exact.is_zero();
                (exact.to_f64(), Some(exact), zero)
            }
            None => {
                let d = matrix.determinant().norm();
                (d, None, d < SUSPECT_ZERO)
            }
        };
        Ok(LatticePoint {
            coords,
            frobenius_norm,
            abs_det,
            exact_det,
            suspect_zero,
        })
    }

    /// Gaussian-heuristic point count `V_k(M) / Vol(L)`.
    pub fn predicted_count(&self, radius: f64) -> f64 {
        unit_ball_volume(self.rank()) * radius.powi(self.rank() as i32) / self.volume
    }

    pub fn check_budget(&self, radius: f64, budget: u64) -> Result<()> {
        let predicted = self.predicted_count(radius);
        if predicted > budget as f64 {
            return Err(Error::BudgetExceeded { predicted, budget });
        }
        Ok(())
    }

    /// All nonzero points with `||X||_F <= M`, lexicographically ordered.
    pub fn enumerate_ball(&self, radius: f64, budget: u64) -> Result<BallIter<'_>> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
        }
        self.check_budget(radius, budget)?;
        Ok(BallIter {
            lattice: self,
            coords: BallCoords::new(&self.gram, radius, None),
        })
    }

    /// Range of the first coordinate over the ball.
    pub fn outer_range(&self, radius: f64) -> (i64, i64) {
        BallCoords::outer_range(&self.gram, radius)
    }

    /// Visits the ball partitioned by the value of the first coordinate.
    ///
    /// Partitions run in parallel on the current rayon pool; the returned
    /// accumulators are in ascending order of the first coordinate no matter
    /// how many threads ran them.
    pub fn fold_ball<A, I, F>(&self, radius: f64, budget: u64, init: I, visit: F) -> Result<Vec<A>>
    where
        A: Send,
        I: Fn() -> A + Sync,
        F: Fn(&mut A, LatticePoint) -> Result<()> + Sync,
    {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
        }
        self.check_budget(radius, budget)?;
        let (lo, hi) = self.outer_range(radius);
        (lo..=hi)
            .into_par_iter()
            .map(|outer| {
                let mut acc = init();
                for coords in BallCoords::new(&self.gram, radius, Some(outer)) {
                    let p = self.make_point(coords)?;
                    if within_radius(p.frobenius_norm, radius) {
                        visit(&mut acc, p)?;
                    }
                }
                Ok(acc)
            })
            .collect()
    }

    pub fn min_determinant_in_ball(&self, radius: f64, budget: u64) -> Result<(f64, LatticePoint)> {
        let parts = self.fold_ball(
            radius,
            budget,
            || None::<LatticePoint>,
            |best, p| {
                let better = match best {
                    Some(b) => p.abs_det < b.abs_det,
                    None => true,
                };
                if better {
                    *best = Some(p);
                }
                Ok(())
            },
        )?;
        let mut best: Option<LatticePoint> = None;
        for p in parts.into_iter().flatten() {
            if best.as_ref().is_none_or(|b| p.abs_det < b.abs_det) {
                best = Some(p);
            }
        }
        let p = best.ok_or(Error::NoPoints)?;
        Ok((p.abs_det, p))
    }

    pub fn normalization_factor(&self, m: f64) -> NormalizationFactor {
        let k = self.rank() as f64;
        let n = self.matrix_size as f64;
        NormalizationFactor {
            scale: self.volume.powf(m * n / k),
            radius_factor: self.volume.powf(1.0 / k),
        }
    }

    /// CSV with header `coords,frobenius_norm,abs_det`; coordinates are joined by spaces.
    pub fn write_points_csv<W: Write>(&self, radius: f64, budget: u64, out: W) -> Result<usize> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["coords", "frobenius_norm", "abs_det"])?;
        let mut count = 0;
        for p in self.enumerate_ball(radius, budget)? {
            let p = p?;
            let coords = p
                .coords
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            w.write_record([coords, p.frobenius_norm.to_string(), p.abs_det.to_string()])?;
            count += 1;
        }
        w.flush()?;
        Ok(count)
    }
}

/// The canonical embedding `psi(O_K)`: `x -> diag(sigma_1(x), ..., sigma_n(x))`
/// over the real embeddings (totally real) or one embedding per conjugate pair
/// (totally complex).
pub fn canonical_embedding_lattice(field: &Arc<NumberField>) -> Result<MatrixLattice> {
    field.require_diagonal_type()?;
    let basis = field
        .basis_embeddings()
        .into_iter()
        .map(|row| DMatrix::from_diagonal(&DVector::from_vec(row)))
        .collect();
    MatrixLattice::new(basis, Some(Arc::new(FieldTag::new(field.clone()))))
}

/// Lazy stream of the nonzero lattice points of a closed ball.
pub struct BallIter<'a> {
    lattice: &'a MatrixLattice,
    coords: BallCoords,
}

impl Iterator for BallIter<'_> {
    type Item = Result<LatticePoint>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let coords = self.coords.next()?;
            match self.lattice.make_point(coords) {
                Ok(p) if within_radius(p.frobenius_norm, self.coords.radius) => return Some(Ok(p)),
                Ok(_) => continue,
                Err(e) => return Some(Err(e)),
            }
        }
    }
}

/// Fincke–Pohst coordinate enumeration for a positive definite Gram matrix.
///
/// Yields candidate coordinate vectors `z != 0` with `z^T G z <= M^2` (plus a
/// small slack); callers apply the exact boundary rule.
#[derive(Debug, Clone)]
pub struct BallCoords {
    k: usize,
    radius: f64,
    // work in reversed index order so that original coordinate 0 is outermost
    diag: Vec<f64>,
    mu: Vec<Vec<f64>>,
    z: Vec<i64>,
    upper: Vec<i64>,
    center: Vec<f64>,
    remaining: Vec<f64>,
    level: usize,
    done: bool,
}

impl BallCoords {
    fn decompose(gram: &DMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
        let k = gram.nrows();
        // reversed Gram
        let g = DMatrix::from_fn(k, k, |i, j| gram[(k - 1 - i, k - 1 - j)]);
        // g = R^T R with R = L^T upper triangular, so
        // Q(z) = sum_i R_ii^2 (z_i + sum_{j>i} (R_ij / R_ii) z_j)^2
        let l = g
            .cholesky()
            .expect("Gram matrix is positive definite")
            .unpack();
        let diag = (0..k).map(|i| l[(i, i)] * l[(i, i)]).collect();
        let mu = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| if j > i { l[(j, i)] / l[(i, i)] } else { 0.0 })
                    .collect()
            })
            .collect();
        (diag, mu)
    }

    fn bound(radius: f64) -> f64 {
        let r = radius + 2.0 * BOUNDARY_TOL * radius.max(1.0);
        r * r * (1.0 + 1e-12) + 1e-12
    }

    pub fn outer_range(gram: &DMatrix<f64>, radius: f64) -> (i64, i64) {
        let (diag, _) = Self::decompose(gram);
        let k = diag.len();
        let w = (Self::bound(radius) / diag[k - 1]).sqrt();
        (-(w.floor() as i64), w.floor() as i64)
    }

    pub fn new(gram: &DMatrix<f64>, radius: f64, outer: Option<i64>) -> Self {
        let (diag, mu) = Self::decompose(gram);
        let k = diag.len();
        let mut s = BallCoords {
            k,
            radius,
            diag,
            mu,
            z: vec![0; k],
            upper: vec![0; k],
            center: vec![0.0; k],
            remaining: vec![0.0; k],
            level: k - 1,
            done: false,
        };
        let top = k - 1;
        s.remaining[top] = Self::bound(radius);
        s.center[top] = 0.0;
        s.set_range(top);
        if let Some(v) = outer {
            if v < s.z[top] || v > s.upper[top] {
                s.done = true;
            } else {
                s.z[top] = v;
                s.upper[top] = v;
            }
        }
        s
    }

    fn set_range(&mut self, level: usize) {
        let t = self.remaining[level];
        if t < 0.0 {
            self.z[level] = 1;
            self.upper[level] = 0;
            return;
        }
        let w = (t / self.diag[level]).sqrt();
        let c = self.center[level];
        self.z[level] = (c - w).ceil() as i64;
        self.upper[level] = (c + w).floor() as i64;
    }
}

impl Iterator for BallCoords {
    type Item = Vec<i64>;

    fn next(&mut self) -> Option<Vec<i64>> {
        if self.done {
            return None;
        }
        loop {
            let l = self.level;
            if self.z[l] > self.upper[l] {
                if l == self.k - 1 {
                    self.done = true;
                    return None;
                }
                self.level += 1;
                self.z[self.level] += 1;
                continue;
            }
            if l == 0 {
                let current = self.z.clone();
                self.z[0] += 1;
                if current.iter().all(|&x| x == 0) {
                    continue;
                }
                // back to original index order
                return Some(current.into_iter().rev().collect());
            }
            let d = self.z[l] as f64 - self.center[l];
            let below = l - 1;
            self.remaining[below] = self.remaining[l] - self.diag[l] * d * d;
            self.center[below] = -(below + 1..self.k)
                .map(|j| self.mu[below][j] * self.z[j] as f64)
                .sum::<f64>();
            self.set_range(below);
            self.level = below;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_lattice(values: &[f64]) -> MatrixLattice {
        let basis = values
            .iter()
            .map(|&v| DMatrix::from_element(1, 1, Complex64::new(v, 0.0)))
            .collect();
        MatrixLattice::new(basis, None).unwrap()
    }

    fn gaussian() -> MatrixLattice {
        let basis = vec![
            DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)),
            DMatrix::from_element(1, 1, Complex64::new(0.0, 1.0)),
        ];
        MatrixLattice::new(basis, None).unwrap()
    }

    #[test]
    fn unit_ball_volumes() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-15);
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-14);
        assert!((unit_ball_volume(8) - std::f64::consts::PI.powi(4) / 24.0).abs() < 1e-13);
    }

    #[test]
    fn gaussian_ball_of_radius_two() {
        let l = gaussian();
        let pts: Vec<_> = l.enumerate_ball(2.0, DEFAULT_BUDGET).unwrap().map(|p| p.unwrap()).collect();
        assert_eq!(pts.len(), 12);
        let coords: Vec<_> = pts.iter().map(|p| p.coords.clone()).collect();
        let mut sorted = coords.clone();
        sorted.sort();
        assert_eq!(coords, sorted, "lexicographic order");
        assert!(coords.contains(&vec![-2, 0]) && coords.contains(&vec![1, -1]));
    }

    #[test]
    fn empty_ball_below_shortest_vector() {
        let l = gaussian();
        assert_eq!(l.enumerate_ball(0.99, DEFAULT_BUDGET).unwrap().count(), 0);
        assert!(matches!(l.min_determinant_in_ball(0.5, DEFAULT_BUDGET), Err(Error::NoPoints)));
    }

    #[test]
    fn budget_guard_fires_before_enumeration() {
        let l = gaussian();
        let err = l.enumerate_ball(1e6, 1000).err().unwrap();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn dependent_basis_rejected() {
        let basis = vec![
            DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)),
            DMatrix::from_element(1, 1, Complex64::new(2.0, 0.0)),
        ];
        assert!(MatrixLattice::new(basis, None).is_err());
    }

    #[test]
    fn one_dimensional_counts() {
        let l = diag_lattice(&[0.5]);
        // +-0.5, +-1, ..., +-3 -> 12 points at radius 3 (boundary included)
        assert_eq!(l.enumerate_ball(3.0, DEFAULT_BUDGET).unwrap().count(), 12);
    }

    #[test]
    fn fixed_outer_partitions_cover_ball() {
        let l = gaussian();
        let (lo, hi) = l.outer_range(3.0);
        let total: usize = (lo..=hi)
            .map(|v| BallCoords::new(l.gram(), 3.0, Some(v)).filter(|z| l.quadratic_form(z) <= 9.0 + 1e-9).count())
            .sum();
        assert_eq!(total, l.enumerate_ball(3.0, DEFAULT_BUDGET).unwrap().count());
    }
}
