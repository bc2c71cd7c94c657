//! Catalog number fields: exact arithmetic on integral-basis coordinates,
//! numeric embeddings, and the constants built from `h`, `R`, `omega` and `d`.
//!
//! Every invariant shipped in the catalog is re-derived when a field is built;
//! see [`NumberField::from_record`] for the list of checks.

mod catalog;
mod element;

pub use catalog::{catalog_lookup, Catalog, FieldRecord, LocalFactorization, RationalEntry};
pub use element::FieldElement;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{
    det_bigint, det_i128_or_zero, exact_sqrt, inverse_rational, parse_rational, rat, to_i64_vec,
    vec_mat, Rational,
};
use crate::lattice::{BallCoords, ElementTag, ExactAbsDet, OrbitAction};
use crate::poly::{complex_roots, power_sums};

/// Relative tolerance for every numeric cross-check against exact data.
pub const CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct NumberField {
    name: String,
    degree: usize,
    signature: (usize, usize),
    polynomial: Vec<i64>,
    integral_basis: Vec<Vec<Rational>>,
    // w_i w_j = sum_k mult[i][j][k] w_k
    mult: Vec<Vec<Vec<i64>>>,
    traces: Vec<i64>,
    one: Vec<i64>,
    // root images: real roots (descending), then one representative per complex pair
    roots: Vec<Complex64>,
    discriminant: i64,
    class_number: u64,
    regulator: f64,
    roots_of_unity: u32,
    torsion: Vec<Vec<i64>>,
    fundamental_units: Vec<Vec<i64>>,
    unit_inverses: Vec<Vec<i64>>,
    unit_index: u64,
    conjugation: Option<Vec<Vec<i64>>>,
    polynomial_index: BigInt,
    local: BTreeMap<u64, Vec<(u32, u32)>>,
}

fn poly_mulmod(a: &[Rational], b: &[Rational], f: &[i64]) -> Vec<Rational> {
    let n = f.len() - 1;
    let mut r = vec![Rational::zero(); 2 * n - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            r[i + j] += x * y;
        }
    }
    for d in (n..r.len()).rev() {
        let c = std::mem::take(&mut r[d]);
        if c.is_zero() {
            continue;
        }
        for i in 0..n {
            r[d - n + i] -= &c * rat(f[i]);
        }
    }
    r.truncate(n);
    r
}

impl NumberField {
    /// Builds a field from a catalog record and runs every load-time check:
    ///
    /// - the polynomial has exactly `r1` real roots and `r1 + 2 r2 = degree`;
    /// - the basis is closed under multiplication with integral structure constants and contains 1;
    /// - `det(Tr(w_i w_j)) = d` exactly and `|det sigma_j(w_i)|^2 = |d|` numerically;
    /// - `disc(f) / d` is a perfect square (the polynomial index);
    /// - fundamental units have norm `+-1`, their count is the unit rank, and
    ///   their regulator equals `R` times the declared index;
    /// - the roots of unity found by a short-vector search number `omega`;
    /// - the listed unit of a rank-one group is not a proper power;
    /// - the conjugation matrix acts as complex conjugation on every embedding.
    pub fn from_record(rec: &FieldRecord) -> Result<NumberField> {
        let name = rec.name.as_str();
        let degree = rec.polynomial.len().saturating_sub(1);
        if degree == 0 || *rec.polynomial.last().unwrap() != 1 {
            return Err(Error::corrupted(name, "polynomial", "defining polynomial must be monic of positive degree"));
        }
        let (r1, r2) = rec.signature;
        if r1 + 2 * r2 != degree {
            return Err(Error::corrupted(name, "signature", format!("r1 + 2 r2 = {} but degree is {degree}", r1 + 2 * r2)));
        }
        if rec.integral_basis.len() != degree || rec.integral_basis.iter().any(|r| r.len() != degree) {
            return Err(Error::corrupted(name, "integral_basis", "basis must be degree x degree"));
        }
        let basis: Vec<Vec<Rational>> = rec
            .integral_basis
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| match e {
                        RationalEntry::Int(v) => Ok(rat(*v)),
                        RationalEntry::Text(s) => parse_rational(s),
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let basis_inverse = inverse_rational(&basis)
            .ok_or_else(|| Error::corrupted(name, "integral_basis", "basis is singular"))?;

        let to_basis = |power: &[Rational]| -> Option<Vec<i64>> { to_i64_vec(&vec_mat(power, &basis_inverse)) };

        let mut mult = vec![vec![vec![0i64; degree]; degree]; degree];
        for i in 0..degree {
            for j in 0..degree {
                let prod = poly_mulmod(&basis[i], &basis[j], &rec.polynomial);
                mult[i][j] = to_basis(&prod).ok_or_else(|| {
                    Error::corrupted(name, "closure", format!("w_{i} w_{j} is not integral in the basis"))
                })?;
            }
        }
        let mut unit_power = vec![Rational::zero(); degree];
        unit_power[0] = Rational::one();
        let one = to_basis(&unit_power)
            .ok_or_else(|| Error::corrupted(name, "closure", "1 is not in the span of the basis"))?;

        let sums = power_sums(&rec.polynomial, 2 * degree);
        let traces: Vec<i64> = basis
            .iter()
            .map(|row| {
                let t: Rational = row
                    .iter()
                    .zip(&sums)
                    .fold(Rational::zero(), |acc, (c, p)| acc + c * Rational::from_integer(p.clone()));
                if t.is_integer() {
                    t.to_integer().to_i64()
                } else {
                    None
                }
            })
            .collect::<Option<_>>()
            .ok_or_else(|| Error::corrupted(name, "closure", "basis element with non-integral trace"))?;

        // embeddings
        let raw = complex_roots(&rec.polynomial);
        let scale = 1.0 + raw.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut real: Vec<f64> = raw
            .iter()
            .filter(|z| z.im.abs() < 1e-7 * scale)
            .map(|z| z.re)
            .collect();
        if real.len() != r1 {
            return Err(Error::corrupted(name, "signature", format!("polynomial has {} real roots, catalog says {r1}", real.len())));
        }
        real.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut upper: Vec<Complex64> = raw.iter().filter(|z| z.im >= 1e-7 * scale).copied().collect();
        upper.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap().then(b.im.partial_cmp(&a.im).unwrap()));
        if upper.len() != r2 {
            return Err(Error::corrupted(name, "signature", "complex roots do not pair up"));
        }
        let mut roots: Vec<Complex64> = real.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        roots.extend(upper);

        let mut field = NumberField {
            name: name.to_string(),
            degree,
            signature: (r1, r2),
            polynomial: rec.polynomial.clone(),
            integral_basis: basis,
            mult,
            traces,
            one,
            roots,
            discriminant: rec.discriminant,
            class_number: rec.class_number,
            regulator: rec.regulator,
            roots_of_unity: rec.roots_of_unity,
            torsion: Vec::new(),
            fundamental_units: rec.fundamental_units.clone(),
            unit_inverses: Vec::new(),
            unit_index: rec.unit_index,
            conjugation: rec.conjugation.clone(),
            polynomial_index: BigInt::one(),
            local: rec.local.iter().map(|l| (l.p, l.factors.clone())).collect(),
        };
        field.check_discriminant()?;
        field.check_conjugation()?;
        field.check_units()?;
        field.check_torsion()?;
        field.check_unit_minimality()?;
        Ok(field)
    }

    fn check_discriminant(&mut self) -> Result<()> {
        let n = self.degree;
        let trace_form: Vec<Vec<BigInt>> = (0..n)
            .map(|i| (0..n).map(|j| BigInt::from(self.trace_int(&self.mult[i][j]))).collect())
            .collect();
        let d = det_bigint(&trace_form);
        if d != BigInt::from(self.discriminant) {
            return Err(Error::corrupted(&self.name, "discriminant", format!("det Tr(w_i w_j) = {d}, catalog says {}", self.discriminant)));
        }
        let all = self.all_basis_embeddings();
        let v = DMatrix::from_fn(n, n, |j, i| all[i][j]);
        let minkowski = v.determinant().norm_sqr();
        let target = (self.discriminant as f64).abs();
        if ((minkowski - target) / target).abs() > CHECK_TOL {
            return Err(Error::corrupted(&self.name, "discriminant", format!("Minkowski Gram determinant {minkowski} differs from |d| = {target}")));
        }
        let sums = power_sums(&self.polynomial, 2 * n);
        let power_form: Vec<Vec<BigInt>> = (0..n).map(|i| (0..n).map(|j| sums[i + j].clone()).collect()).collect();
        let disc_f = det_bigint(&power_form);
        let q = &disc_f / BigInt::from(self.discriminant);
        if &q * BigInt::from(self.discriminant) != disc_f {
            return Err(Error::corrupted(&self.name, "index", "disc(f) is not a multiple of d"));
        }
        self.polynomial_index = exact_sqrt(&q)
            .ok_or_else(|| Error::corrupted(&self.name, "index", "disc(f)/d is not a perfect square"))?;
        Ok(())
    }

    fn check_conjugation(&self) -> Result<()> {
        if self.signature.1 == 0 || (self.signature.0 > 0 && self.conjugation.is_none()) {
            return Ok(());
        }
        let Some(conj) = &self.conjugation else {
            return Err(Error::CatalogIncomplete {
                field: self.name.clone(),
                detail: "complex field without a conjugation matrix".into(),
            });
        };
        if conj.len() != self.degree || conj.iter().any(|r| r.len() != self.degree) {
            return Err(Error::corrupted(&self.name, "conjugation", "matrix must be degree x degree"));
        }
        for (i, row) in conj.iter().enumerate() {
            let image = self.embed_int(row);
            let base = self.embed_int(&self.basis_vector(i));
            for (a, b) in image.iter().zip(&base) {
                if (a - b.conj()).norm() > CHECK_TOL * (1.0 + b.norm()) {
                    return Err(Error::corrupted(&self.name, "conjugation", format!("row {i} is not the conjugate of w_{i}")));
                }
            }
        }
        Ok(())
    }

    fn check_units(&mut self) -> Result<()> {
        let rank = self.unit_rank();
        if self.fundamental_units.len() != rank {
            return Err(Error::corrupted(&self.name, "unit rank", format!("{} units listed, rank is {rank}", self.fundamental_units.len())));
        }
        let mut inverses = Vec::with_capacity(rank);
        for (j, u) in self.fundamental_units.iter().enumerate() {
            if u.len() != self.degree {
                return Err(Error::corrupted(&self.name, "units", format!("unit {j} has wrong length")));
            }
            if self.norm_int(u).abs() != BigInt::one() {
                return Err(Error::corrupted(&self.name, "units", format!("unit {j} does not have norm +-1")));
            }
            inverses.push(self.inverse_int(u).ok_or_else(|| Error::corrupted(&self.name, "units", format!("unit {j} has no integral inverse")))?);
        }
        self.unit_inverses = inverses;
        let reg = self.sublattice_regulator();
        let target = self.regulator * self.unit_index as f64;
        if ((reg - target) / target).abs() > CHECK_TOL {
            return Err(Error::corrupted(&self.name, "regulator", format!("listed units have regulator {reg}, expected R * index = {target}")));
        }
        Ok(())
    }

    fn t2_gram(&self) -> DMatrix<f64> {
        let all = self.all_basis_embeddings();
        let n = self.degree;
        DMatrix::from_fn(n, n, |i, j| all[i].iter().zip(&all[j]).map(|(a, b)| (a * b.conj()).re).sum())
    }

    fn check_torsion(&mut self) -> Result<()> {
        let n = self.degree;
        let gram = self.t2_gram();
        let mut found = Vec::new();
        for z in BallCoords::new(&gram, (n as f64).sqrt(), None) {
            let t2 = quadratic(&gram, &z);
            if (t2 - n as f64).abs() < 1e-6 && self.norm_int(&z).abs() == BigInt::one() {
                found.push(z);
            }
        }
        if found.len() != self.roots_of_unity as usize {
            return Err(Error::corrupted(&self.name, "roots of unity", format!("found {}, catalog says {}", found.len(), self.roots_of_unity)));
        }
        self.torsion = found;
        Ok(())
    }

    fn check_unit_minimality(&self) -> Result<()> {
        if self.unit_rank() != 1 || self.signature.0 + self.signature.1 != 2 {
            return Ok(());
        }
        let eps = &self.fundamental_units[0];
        let max_log = |x: &[i64]| -> f64 { self.embed_int(x).iter().map(|z| z.norm().ln().abs()).fold(0.0, f64::max) };
        let top = max_log(eps);
        // a unit with a smaller nonzero log vector has T2 < degree * e^(2 top)
        let gram = self.t2_gram();
        let radius = (self.degree as f64).sqrt() * top.exp();
        for z in BallCoords::new(&gram, radius, None) {
            let l = max_log(&z);
            if l > CHECK_TOL && l < top - CHECK_TOL && self.norm_int(&z).abs() == BigInt::one() {
                return Err(Error::corrupted(&self.name, "unit minimality", format!("unit {z:?} is smaller than the listed fundamental unit")));
            }
        }
        if self.is_totally_real() && self.degree == 2 {
            // box scan over coordinates bounded by those of the unit
            let c = eps.iter().map(|x| x.abs()).max().unwrap_or(1).max(1);
            let sigma_max = |x: &[i64]| self.embed_int(x).iter().map(|z| z.norm()).fold(0.0, f64::max);
            let bound = sigma_max(eps);
            for a in -c..=c {
                for b in -c..=c {
                    let x = [a, b];
                    let s = sigma_max(&x);
                    if s > 1.0 + CHECK_TOL && s < bound - CHECK_TOL && self.norm_int(&x).abs() == BigInt::one() {
                        return Err(Error::corrupted(&self.name, "unit minimality", format!("unit {x:?} is smaller than the listed fundamental unit")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn signature(&self) -> (usize, usize) {
        self.signature
    }

    pub fn is_totally_real(&self) -> bool {
        self.signature.1 == 0
    }

    pub fn is_totally_complex(&self) -> bool {
        self.signature.0 == 0
    }

    pub fn polynomial(&self) -> &[i64] {
        &self.polynomial
    }

    pub fn integral_basis(&self) -> &[Vec<Rational>] {
        &self.integral_basis
    }

    pub fn discriminant(&self) -> i64 {
        self.discriminant
    }

    pub fn class_number(&self) -> u64 {
        self.class_number
    }

    pub fn regulator(&self) -> f64 {
        self.regulator
    }

    pub fn roots_of_unity(&self) -> u32 {
        self.roots_of_unity
    }

    /// Integral-basis coordinates of every root of unity, in enumeration order.
    pub fn torsion_units(&self) -> &[Vec<i64>] {
        &self.torsion
    }

    pub fn fundamental_units(&self) -> &[Vec<i64>] {
        &self.fundamental_units
    }

    pub fn unit_inverses(&self) -> &[Vec<i64>] {
        &self.unit_inverses
    }

    /// Index of the listed units in the full unit group modulo torsion.
    pub fn unit_index(&self) -> u64 {
        self.unit_index
    }

    pub fn unit_rank(&self) -> usize {
        self.signature.0 + self.signature.1 - 1
    }

    /// `[O_K : Z[t]]`.
    pub fn polynomial_index(&self) -> &BigInt {
        &self.polynomial_index
    }

    /// Catalog factorization shape of `p`, for primes dividing the polynomial index.
    pub fn local_factorization(&self, p: u64) -> Option<&[(u32, u32)]> {
        self.local.get(&p).map(|v| v.as_slice())
    }

    /// Number of diagonal entries of the canonical embedding: `r1 + r2`.
    pub fn embedding_dimension(&self) -> usize {
        self.signature.0 + self.signature.1
    }

    /// Images of the defining root under the representative embeddings.
    pub fn embeddings(&self) -> &[Complex64] {
        &self.roots
    }

    pub fn one(&self) -> &[i64] {
        &self.one
    }

    pub fn basis_vector(&self, i: usize) -> Vec<i64> {
        let mut v = vec![0; self.degree];
        v[i] = 1;
        v
    }

    pub fn structure_constants(&self) -> &[Vec<Vec<i64>>] {
        &self.mult
    }

    pub fn conjugation_matrix(&self) -> Option<&[Vec<i64>]> {
        self.conjugation.as_deref()
    }

    /// `sigma_j(w_i)` for the representative embeddings, indexed `[i][j]`.
    pub fn basis_embeddings(&self) -> Vec<Vec<Complex64>> {
        self.integral_basis
            .iter()
            .map(|row| {
                self.roots
                    .iter()
                    .map(|t| {
                        let mut acc = Complex64::zero();
                        let mut pw = Complex64::one();
                        for c in row {
                            acc += pw * crate::exact::rational_to_f64(c);
                            pw *= t;
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }

    /// Like [`Self::basis_embeddings`] but over all `degree` embeddings (representatives, then their conjugates).
    pub fn all_basis_embeddings(&self) -> Vec<Vec<Complex64>> {
        let r1 = self.signature.0;
        self.basis_embeddings()
            .into_iter()
            .map(|mut row| {
                let conj: Vec<Complex64> = row[r1..].iter().map(|z| z.conj()).collect();
                row.extend(conj);
                row
            })
            .collect()
    }

    pub fn embed_int(&self, x: &[i64]) -> Vec<Complex64> {
        let values = self.basis_embeddings();
        let mut out = vec![Complex64::zero(); self.roots.len()];
        for (c, row) in x.iter().zip(&values) {
            if *c == 0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(row) {
                *o += v * (*c as f64);
            }
        }
        out
    }

    pub fn mul_int(&self, x: &[i64], y: &[i64]) -> Result<Vec<i64>> {
        let n = self.degree;
        let mut out = vec![0i128; n];
        for i in 0..n {
            if x[i] == 0 {
                continue;
            }
            for j in 0..n {
                if y[j] == 0 {
                    continue;
                }
                let xy = (x[i] as i128) * (y[j] as i128);
                for k in 0..n {
                    let c = self.mult[i][j][k];
                    if c != 0 {
                        out[k] = out[k]
                            .checked_add(xy.checked_mul(c as i128).ok_or(Error::Overflow("field product"))?)
                            .ok_or(Error::Overflow("field product"))?;
                    }
                }
            }
        }
        out.into_iter()
            .map(|v| i64::try_from(v).map_err(|_| Error::Overflow("field product")))
            .collect()
    }

    /// Rows are the coordinates of `x w_i`.
    pub fn mult_matrix_int(&self, x: &[i64]) -> Vec<Vec<i128>> {
        let n = self.degree;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|k| (0..n).map(|j| x[j] as i128 * self.mult[j][i][k] as i128).sum())
                    .collect()
            })
            .collect()
    }

    pub fn norm_int(&self, x: &[i64]) -> BigInt {
        let m = self.mult_matrix_int(x);
        match det_i128_or_zero(&m) {
            Some(d) => BigInt::from(d),
            None => det_bigint(
                &m.iter()
                    .map(|r| r.iter().map(|&v| BigInt::from(v)).collect())
                    .collect::<Vec<_>>(),
            ),
        }
    }

    pub fn trace_int(&self, x: &[i64]) -> i128 {
        x.iter().zip(&self.traces).map(|(a, t)| *a as i128 * *t as i128).sum()
    }

    pub fn conj_int(&self, x: &[i64]) -> Option<Vec<i64>> {
        let conj = self.conjugation.as_ref()?;
        Some(
            (0..self.degree)
                .map(|k| x.iter().zip(conj).map(|(c, row)| c * row[k]).sum())
                .collect(),
        )
    }

    /// Inverse of an integral element, if it is integral.
    pub fn inverse_int(&self, x: &[i64]) -> Option<Vec<i64>> {
        let m: Vec<Vec<Rational>> = self
            .mult_matrix_int(x)
            .iter()
            .map(|r| r.iter().map(|&v| Rational::from_integer(BigInt::from(v))).collect())
            .collect();
        let inv = inverse_rational(&m)?;
        let one: Vec<Rational> = self.one.iter().map(|&v| rat(v)).collect();
        to_i64_vec(&vec_mat(&one, &inv))
    }

    /// `x * prod_j unit_j^exponents[j]`.
    pub fn apply_units_int(&self, x: &[i64], exponents: &[i64]) -> Result<Vec<i64>> {
        let mut y = x.to_vec();
        for (j, &e) in exponents.iter().enumerate() {
            let factor = if e >= 0 { &self.fundamental_units[j] } else { &self.unit_inverses[j] };
            for _ in 0..e.unsigned_abs() {
                y = self.mul_int(&y, factor)?;
            }
        }
        Ok(y)
    }

    /// `log |sigma_j(unit_i)|` over the representative embeddings, indexed `[i][j]`.
    pub fn unit_logs(&self) -> Vec<Vec<f64>> {
        self.fundamental_units
            .iter()
            .map(|u| self.embed_int(u).iter().map(|z| z.norm().ln()).collect())
            .collect()
    }

    fn sublattice_regulator(&self) -> f64 {
        let rank = self.unit_rank();
        if rank == 0 {
            return 1.0;
        }
        let r1 = self.signature.0;
        let logs = self.unit_logs();
        let m = DMatrix::from_fn(rank, rank, |i, j| {
            let w = if j < r1 { 1.0 } else { 2.0 };
            w * logs[i][j]
        });
        m.determinant().abs()
    }

    /// `|det psi(x)|`: `|N(x)|` for totally real fields and `sqrt|N(x)|` for totally complex ones.
    pub fn abs_det(&self, x: &[i64]) -> ExactAbsDet {
        let n = self.norm_int(x).abs();
        if self.is_totally_real() {
            ExactAbsDet::integer(n)
        } else {
            ExactAbsDet { radicand: n, root: 2 }
        }
    }

    /// Exact `||psi(x)||_F^2`: `Tr(x^2)` for totally real fields, `Tr(x conj x) / 2` for complex ones.
    pub fn frobenius_sq_exact(&self, x: &[i64]) -> Result<Rational> {
        if self.is_totally_real() {
            let sq = self.mul_int(x, x)?;
            Ok(Rational::from_integer(BigInt::from(self.trace_int(&sq))))
        } else {
            let c = self
                .conj_int(x)
                .ok_or_else(|| Error::OutOfScope(format!("{} has no conjugation", self.name)))?;
            let p = self.mul_int(x, &c)?;
            Ok(Rational::new(BigInt::from(self.trace_int(&p)), BigInt::from(2)))
        }
    }

    pub(crate) fn require_diagonal_type(&self) -> Result<()> {
        if self.is_totally_real() || self.is_totally_complex() {
            Ok(())
        } else {
            Err(Error::UnsupportedSignature(format!(
                "{} has signature ({}, {}); only totally real or totally complex fields are supported",
                self.name, self.signature.0, self.signature.1
            )))
        }
    }
}

fn quadratic(g: &DMatrix<f64>, z: &[i64]) -> f64 {
    let k = z.len();
    let mut s = 0.0;
    for i in 0..k {
        for j in 0..k {
            s += g[(i, j)] * z[i] as f64 * z[j] as f64;
        }
    }
    s
}

// ---------------------------------------------------------------------------
// constants

/// `alpha_K = 2^r1 (2 pi)^r2 R / (omega sqrt|d|)`; the residue of the zeta function at 1 is `h alpha_K`.
pub fn residue_constant(k: &NumberField) -> f64 {
    let (r1, r2) = k.signature;
    2f64.powi(r1 as i32) * (2.0 * PI).powi(r2 as i32) * k.regulator
        / (k.roots_of_unity as f64 * (k.discriminant as f64).abs().sqrt())
}

/// `h_K alpha_K`.
pub fn residue_times_class_number(k: &NumberField) -> f64 {
    k.class_number as f64 * residue_constant(k)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// `omega n^(n-1) / (R (n-1)!)` with `n` the size of the diagonal embedding.
pub fn unit_density_constant(k: &NumberField, n: usize) -> Result<f64> {
    k.require_diagonal_type()?;
    let expected = k.embedding_dimension();
    if n != expected {
        return Err(Error::DimensionMismatch { expected, got: n });
    }
    Ok(unit_density_formula(k.roots_of_unity as f64, k.regulator, n))
}

pub(crate) fn unit_density_formula(omega: f64, regulator: f64, n: usize) -> f64 {
    omega * (n as f64).powi(n as i32 - 1) / (regulator * factorial(n - 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Proposition {
    /// totally real, `m > 1`
    RealSummable,
    /// totally real, `m = 1`
    RealSingleAntenna,
    /// totally complex, `m = 2 n_r` with `n_r > 1`
    ComplexSummable,
    /// totally complex, `m = 2`
    ComplexSingleAntenna,
}

impl Proposition {
    pub fn label(&self) -> &'static str {
        match self {
            Proposition::RealSummable => "totally real, m > 1",
            Proposition::RealSingleAntenna => "totally real, m = 1",
            Proposition::ComplexSummable => "totally complex, n_r > 1",
            Proposition::ComplexSingleAntenna => "totally complex, n_r = 1",
        }
    }

    /// Whether the upper envelope is `N~ zeta_K(s) (log M)^(n-1)` (else `c_K (log M)^n`).
    pub fn has_zeta_upper(&self) -> bool {
        matches!(self, Proposition::RealSummable | Proposition::ComplexSummable)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundConstants {
    pub proposition: Proposition,
    /// dimension `n` of the diagonal embedding
    pub n: usize,
    pub m: f64,
    /// zeta argument of the upper bound: `m` (real) or `n_r = m / 2` (complex)
    pub zeta_argument: f64,
    pub n_tilde: f64,
    /// only for the single-antenna propositions
    pub c_k: Option<f64>,
}

/// Constants of the applicable diagonal-code proposition for the sum exponent `m`.
pub fn normalized_bound_constants(k: &NumberField, m: f64) -> Result<BoundConstants> {
    k.require_diagonal_type()?;
    let n = k.embedding_dimension();
    let nk = unit_density_formula(k.roots_of_unity as f64, k.regulator, n);
    let sqrt_d = (k.discriminant as f64).abs().sqrt();
    let h = k.class_number as f64;
    if k.is_totally_real() {
        if m == 1.0 {
            return Ok(BoundConstants {
                proposition: Proposition::RealSingleAntenna,
                n,
                m,
                zeta_argument: 1.0,
                n_tilde: nk * sqrt_d,
                c_k: Some(h * 2f64.powi(n as i32) * (n as f64).powi(n as i32) / factorial(n - 1)),
            });
        }
        if m > 1.0 {
            return Ok(BoundConstants {
                proposition: Proposition::RealSummable,
                n,
                m,
                zeta_argument: m,
                n_tilde: nk * sqrt_d.powf(m),
                c_k: None,
            });
        }
        return Err(Error::OutOfScope(format!("no bound for totally real fields with m = {m} < 1")));
    }
    let nr = m / 2.0;
    if nr.fract() != 0.0 || nr < 1.0 {
        return Err(Error::OutOfScope(format!("complex diagonal bounds need m = 2 n_r with integer n_r >= 1, got m = {m}")));
    }
    let base = 2f64.powi(-(n as i32)) * sqrt_d;
    if nr == 1.0 {
        Ok(BoundConstants {
            proposition: Proposition::ComplexSingleAntenna,
            n,
            m,
            zeta_argument: 1.0,
            n_tilde: nk * base,
            c_k: Some(h * PI.powi(n as i32) * 2.0 * (n as f64).powi(n as i32) / (k.regulator * factorial(n - 1))),
        })
    } else {
        Ok(BoundConstants {
            proposition: Proposition::ComplexSummable,
            n,
            m,
            zeta_argument: nr,
            n_tilde: nk * base.powf(nr),
            c_k: None,
        })
    }
}

// ---------------------------------------------------------------------------
// canonical embedding tag

/// Exact preimages for the canonical embedding lattice `psi(O_K)`.
#[derive(Debug, Clone)]
pub struct FieldTag {
    field: Arc<NumberField>,
}

impl FieldTag {
    pub fn new(field: Arc<NumberField>) -> Self {
        FieldTag { field }
    }

    pub fn field(&self) -> &Arc<NumberField> {
        &self.field
    }
}

impl ElementTag for FieldTag {
    fn abs_det(&self, coords: &[i64]) -> Result<ExactAbsDet> {
        Ok(self.field.abs_det(coords))
    }

    fn frobenius_norm_sq(&self, coords: &[i64]) -> Result<Rational> {
        self.field.frobenius_sq_exact(coords)
    }

    fn preimage_matrix(&self, coords: &[i64]) -> Result<DMatrix<Complex64>> {
        Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.field.embed_int(coords))))
    }

    fn describe(&self, coords: &[i64]) -> String {
        format!("{}{coords:?}", self.field.name)
    }

    fn orbit_action(&self) -> Option<OrbitAction> {
        Some(OrbitAction {
            block_size: 1,
            blocks: self.field.embedding_dimension(),
            unit_logs: self.field.unit_logs(),
            upper_block_constant: 1.0,
        })
    }

    fn apply_units(&self, coords: &[i64], exponents: &[i64]) -> Result<Vec<i64>> {
        self.field.apply_units_int(coords, exponents)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(name: &str) -> Arc<NumberField> {
        catalog_lookup(name).unwrap()
    }

    #[test]
    fn every_catalog_entry_passes_self_checks() {
        for name in Catalog::builtin().names() {
            let k = catalog_lookup(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(k.signature.0 + 2 * k.signature.1, k.degree());
        }
    }

    #[test]
    fn unknown_name_is_a_catalog_miss() {
        assert!(matches!(catalog_lookup("NOT_A_FIELD"), Err(Error::UnknownField(_))));
    }

    #[test]
    fn gaussian_invariants() {
        let k = field("GAUSSIAN");
        assert_eq!(k.degree(), 2);
        assert_eq!(k.signature(), (0, 1));
        assert_eq!(k.discriminant(), -4);
        assert_eq!(k.roots_of_unity(), 4);
        assert_eq!(k.torsion_units().len(), 4);
    }

    #[test]
    fn golden_field_regulator_is_log_of_larger_embedding() {
        let k = field("REAL_QUADRATIC_5");
        let e = k.embed_int(&k.fundamental_units()[0]);
        let larger = e.iter().map(|z| z.re).fold(f64::MIN, f64::max);
        assert!((larger.ln() - k.regulator()).abs() < 1e-12);
        assert!((larger - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn residue_constants_match_closed_forms() {
        assert!((residue_constant(&field("GAUSSIAN")) - PI / 4.0).abs() < 1e-12);
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let want = 4.0 * phi.ln() / (2.0 * 5f64.sqrt());
        assert!((residue_constant(&field("REAL_QUADRATIC_5")) - want).abs() < 1e-12);
        assert!((want - 0.4304).abs() < 1e-4);
    }

    #[test]
    fn unit_density_values() {
        let k = field("REAL_QUADRATIC_5");
        let nk = unit_density_constant(&k, 2).unwrap();
        assert!((nk - 4.0 / ((1.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-12);
        assert!((nk - 8.3128).abs() < 1e-3);
        assert_eq!(unit_density_constant(&field("GAUSSIAN"), 1).unwrap(), 4.0);
        assert!(matches!(unit_density_constant(&k, 3), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn bound_constants_per_proposition() {
        let k = field("REAL_QUADRATIC_5");
        let b = normalized_bound_constants(&k, 2.0).unwrap();
        assert_eq!(b.proposition, Proposition::RealSummable);
        assert!((b.n_tilde - 5.0 * 4.0 / k.regulator()).abs() < 1e-9);
        assert!((b.n_tilde - 41.564).abs() < 5e-3);
        let g = normalized_bound_constants(&field("GAUSSIAN"), 4.0).unwrap();
        assert_eq!(g.proposition, Proposition::ComplexSummable);
        assert!((g.n_tilde - 4.0).abs() < 1e-12);
        let s = normalized_bound_constants(&k, 1.0).unwrap();
        assert_eq!(s.proposition, Proposition::RealSingleAntenna);
        assert_eq!(s.c_k, Some(4.0 * 4.0));
        assert!(normalized_bound_constants(&k, 0.5).is_err());
        assert!(normalized_bound_constants(&field("GAUSSIAN"), 3.0).is_err());
    }

    #[test]
    fn mixed_signature_is_rejected() {
        // x^3 - 2 has one real root and a complex pair
        let text = r#"
            [[field]]
            name = "CUBIC"
            polynomial = [-2, 0, 0, 1]
            integral_basis = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
            signature = [1, 1]
            discriminant = -108
            class_number = 1
            regulator = 1.3473773483293843
            roots_of_unity = 2
            fundamental_units = [[-1, 1, 0]]
        "#;
        let cat = Catalog::from_toml_str(text).unwrap();
        let k = cat.get("CUBIC").unwrap_or_else(|e| panic!("{e}"));
        assert!(matches!(normalized_bound_constants(&k, 2.0), Err(Error::UnsupportedSignature(_))));
        assert!(matches!(unit_density_constant(&k, 2), Err(Error::UnsupportedSignature(_))));
    }

    #[test]
    fn corrupted_entries_are_rejected() {
        let good = Catalog::builtin().record("REAL_QUADRATIC_5").unwrap().clone();
        let mut bad = good.clone();
        bad.discriminant = 8;
        assert!(matches!(NumberField::from_record(&bad), Err(Error::CorruptedCatalog { check: "discriminant", .. })));
        let mut bad = good.clone();
        bad.fundamental_units = vec![vec![1, 1]]; // phi^2
        assert!(NumberField::from_record(&bad).is_err());
        let mut bad = good.clone();
        bad.roots_of_unity = 4;
        assert!(matches!(NumberField::from_record(&bad), Err(Error::CorruptedCatalog { check: "roots of unity", .. })));
        let mut bad = good;
        bad.fundamental_units = vec![vec![2, 0]]; // norm 4
        assert!(matches!(NumberField::from_record(&bad), Err(Error::CorruptedCatalog { check: "units", .. })));
    }

    #[test]
    fn square_of_fundamental_unit_fails_minimality_not_regulator() {
        // phi^2 with the index declared as 2 passes the regulator check but not minimality
        let mut rec = Catalog::builtin().record("REAL_QUADRATIC_5").unwrap().clone();
        rec.fundamental_units = vec![vec![1, 1]];
        rec.unit_index = 2;
        assert!(matches!(NumberField::from_record(&rec), Err(Error::CorruptedCatalog { check: "unit minimality", .. })));
    }

    #[test]
    fn cyclotomic_20_units_have_full_regulator() {
        let k = field("CYCLOTOMIC_20");
        assert_eq!(k.unit_rank(), 3);
        assert_eq!(k.unit_index(), 1);
        assert_eq!(k.roots_of_unity(), 20);
    }

    #[test]
    fn exact_frobenius_matches_numeric() {
        for name in ["REAL_QUADRATIC_5", "CYCLOTOMIC_5", "BIQUADRATIC", "GAUSSIAN"] {
            let k = field(name);
            let x: Vec<i64> = (0..k.degree() as i64).map(|i| 2 * i - 3).collect();
            let exact = crate::exact::rational_to_f64(&k.frobenius_sq_exact(&x).unwrap());
            let numeric: f64 = k.embed_int(&x).iter().map(|z| z.norm_sqr()).sum();
            assert!((exact - numeric).abs() < 1e-9 * numeric.max(1.0), "{name}");
        }
    }
}
