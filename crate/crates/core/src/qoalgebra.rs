//! Quaternion algebras `D = E + uE` with `u^2 = gamma`, `x u = u x*`, over a
//! totally real center `K`, where `E = KF` for an imaginary quadratic `F` and
//! `*` is complex conjugation on `E`.
//!
//! Elements are written `x1 + x2 u`; the 2x2 representation
//! `phi(x1 + x2 u) = [[x1, x2], [gamma x2*, x1*]]` is multiplicative in this
//! convention. The multiblock map stacks the conjugates of `phi` under the
//! embeddings of `K` that send the generator of `F` to the upper half plane.

use std::path::Path;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::analysis::SumCurve;
use crate::error::{Error, Result};
use crate::exact::{det_bigint, exact_sqrt, inverse_rational, rat, vec_mat, Rational};
use crate::lattice::{frobenius_sq, ElementTag, ExactAbsDet, MatrixLattice, OrbitAction};
use crate::numberfield::{catalog_lookup, unit_density_constant, FieldElement, NumberField};
use crate::units::{units_in_ball, ExponentScanner};

const EMBED_TOL: f64 = 1e-9;

/// Text form of an algebra (see `data/algebras/`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgebraConfig {
    pub name: String,
    pub center: String,
    pub quadratic: String,
    pub compositum: String,
    /// integral-basis coordinates of `gamma` in the center
    pub gamma: Vec<i64>,
    /// compositum coordinates of each center basis element
    pub center_in_compositum: Vec<Vec<i64>>,
    /// compositum coordinates of each basis element of the quadratic field
    pub quadratic_in_compositum: Vec<Vec<i64>>,
    /// order basis as pairs `[x1, x2]` in compositum coordinates; the natural order when absent
    #[serde(default)]
    pub order_basis: Option<Vec<[Vec<i64>; 2]>>,
}

impl AlgebraConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

const BUILTIN: &[&str] = &[
    include_str!("../data/algebras/hamilton_sqrt5.toml"),
    include_str!("../data/algebras/alamouti.toml"),
];

fn builtin_configs() -> &'static [AlgebraConfig] {
    static CONFIGS: OnceLock<Vec<AlgebraConfig>> = OnceLock::new();
    CONFIGS.get_or_init(|| {
        BUILTIN
            .iter()
            .map(|t| AlgebraConfig::from_toml_str(t).expect("builtin algebra config parses"))
            .collect()
    })
}

pub fn algebra_names() -> Vec<&'static str> {
    builtin_configs().iter().map(|c| c.name.as_str()).collect()
}

/// A builtin algebra by name, or a config file path.
pub fn algebra_lookup(name_or_path: &str) -> Result<Arc<CyclicAlgebraCode>> {
    if let Some(c) = builtin_configs().iter().find(|c| c.name == name_or_path) {
        return CyclicAlgebraCode::new(c);
    }
    let path = Path::new(name_or_path);
    if path.exists() {
        let text = std::fs::read_to_string(path)?;
        return CyclicAlgebraCode::new(&AlgebraConfig::from_toml_str(&text)?);
    }
    Err(Error::UnknownField(name_or_path.to_string()))
}

#[derive(Debug, Clone, Serialize)]
pub struct DivisionCertificate {
    /// real places of the center where `gamma < 0`; the algebra ramifies there
    pub ramified_real_places: Vec<usize>,
    pub statement: String,
}

#[derive(Debug)]
pub struct CyclicAlgebraCode {
    name: String,
    center: Arc<NumberField>,
    quadratic: Arc<NumberField>,
    compositum: Arc<NumberField>,
    gamma_center: Vec<i64>,
    gamma: Vec<i64>,
    center_map: Vec<Vec<i64>>,
    conjugation: Vec<Vec<Rational>>,
    /// `tau_values[i][c]`: basis element `c` of the compositum under embedding `i`
    tau_values: Vec<Vec<Complex64>>,
    gamma_values: Vec<f64>,
    /// order basis in natural coordinates `(x1 | x2)`, one row per element
    order: Vec<Vec<i64>>,
    order_inverse: Vec<Vec<Rational>>,
    natural_order: bool,
    unit_closed: bool,
    certificate: DivisionCertificate,
}

fn image(map: &[Vec<i64>], x: &[i64]) -> Vec<i64> {
    let n = map.first().map_or(0, |r| r.len());
    let mut out = vec![0i64; n];
    for (c, row) in x.iter().zip(map) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += c * v;
        }
    }
    out
}

/// Checks that `map` (rows = images of the basis of `src`) is a unital ring homomorphism into `dst`.
fn check_embedding(src: &NumberField, dst: &NumberField, map: &[Vec<i64>], what: &'static str) -> Result<()> {
    if map.len() != src.degree() || map.iter().any(|r| r.len() != dst.degree()) {
        return Err(Error::DimensionMismatch { expected: src.degree(), got: map.len() });
    }
    if image(map, src.one()) != dst.one() {
        return Err(Error::InvalidArgument(format!("{what}: the image of 1 is not 1")));
    }
    let c = src.structure_constants();
    for a in 0..src.degree() {
        for b in 0..src.degree() {
            let lhs = dst.mul_int(&map[a], &map[b])?;
            let rhs = image(map, &c[a][b]);
            if lhs != rhs {
                return Err(Error::InvalidArgument(format!("{what}: not multiplicative on basis pair ({a}, {b})")));
            }
        }
    }
    Ok(())
}

fn eval(values: &[Complex64], x: &[i64]) -> Complex64 {
    x.iter().zip(values).map(|(&c, v)| v * c as f64).sum()
}

impl CyclicAlgebraCode {
    pub fn new(cfg: &AlgebraConfig) -> Result<Arc<Self>> {
        let center = catalog_lookup(&cfg.center)?;
        let quadratic = catalog_lookup(&cfg.quadratic)?;
        let compositum = catalog_lookup(&cfg.compositum)?;
        if !center.is_totally_real() {
            return Err(Error::UnsupportedSignature(format!("center {} is not totally real", center.name())));
        }
        if quadratic.degree() != 2 || !quadratic.is_totally_complex() {
            return Err(Error::UnsupportedSignature(format!("{} is not imaginary quadratic", quadratic.name())));
        }
        if compositum.degree() != 2 * center.degree() {
            return Err(Error::InvalidArgument(format!(
                "compositum degree {} is not twice the center degree {}",
                compositum.degree(),
                center.degree()
            )));
        }
        check_embedding(&center, &compositum, &cfg.center_in_compositum, "center_in_compositum")?;
        check_embedding(&quadratic, &compositum, &cfg.quadratic_in_compositum, "quadratic_in_compositum")?;
        if cfg.gamma.len() != center.degree() {
            return Err(Error::DimensionMismatch { expected: center.degree(), got: cfg.gamma.len() });
        }
        if cfg.gamma.iter().all(|&c| c == 0) {
            return Err(Error::InvalidArgument("gamma must be nonzero".into()));
        }
        let gamma = image(&cfg.center_in_compositum, &cfg.gamma);

        let conj_int = compositum
            .conjugation_matrix()
            .ok_or_else(|| Error::CatalogIncomplete { field: compositum.name().into(), detail: "no conjugation".into() })?;
        for (a, w) in cfg.center_in_compositum.iter().enumerate() {
            if compositum.conj_int(w).as_ref() != Some(w) {
                return Err(Error::InvalidArgument(format!("conjugation moves center basis element {a}")));
            }
        }
        let conjugation: Vec<Vec<Rational>> = conj_int.iter().map(|r| r.iter().map(|&v| rat(v)).collect()).collect();

        // embeddings of the compositum extending each embedding of the center,
        // with the quadratic field sent to its upper-half-plane representative
        let all = compositum.all_basis_embeddings();
        let n_emb = all[0].len();
        let column = |j: usize| -> Vec<Complex64> { all.iter().map(|row| row[j]).collect() };
        let k_values = center.basis_embeddings();
        let f_values = quadratic.basis_embeddings();
        let mut tau_values = Vec::new();
        for i in 0..center.degree() {
            let matches: Vec<usize> = (0..n_emb)
                .filter(|&j| {
                    let col = column(j);
                    let k_ok = cfg
                        .center_in_compositum
                        .iter()
                        .enumerate()
                        .all(|(a, w)| (eval(&col, w) - k_values[a][i]).norm() < EMBED_TOL * (1.0 + k_values[a][i].norm()));
                    let f_ok = cfg
                        .quadratic_in_compositum
                        .iter()
                        .enumerate()
                        .all(|(b, w)| (eval(&col, w) - f_values[b][0]).norm() < EMBED_TOL * (1.0 + f_values[b][0].norm()));
                    k_ok && f_ok
                })
                .collect();
            if matches.len() != 1 {
                return Err(Error::InvalidArgument(format!(
                    "{} compositum embeddings extend center embedding {i}",
                    matches.len()
                )));
            }
            tau_values.push(column(matches[0]));
        }
        // conjugation commutes with every tau
        for (i, vals) in tau_values.iter().enumerate() {
            for (c, row) in conj_int.iter().enumerate() {
                let lhs = eval(vals, row);
                if (lhs - vals[c].conj()).norm() > EMBED_TOL * (1.0 + vals[c].norm()) {
                    return Err(Error::InvalidArgument(format!("conjugation does not commute with embedding {i}")));
                }
            }
        }
        let gamma_values: Vec<f64> = tau_values.iter().map(|v| eval(v, &gamma).re).collect();

        let d = compositum.degree();
        let (order, natural_order) = match &cfg.order_basis {
            None => {
                let mut rows = Vec::new();
                for half in 0..2 {
                    for c in 0..d {
                        let mut r = vec![0i64; 2 * d];
                        r[half * d + c] = 1;
                        rows.push(r);
                    }
                }
                (rows, true)
            }
            Some(b) => {
                let rows: Vec<Vec<i64>> = b
                    .iter()
                    .map(|[x1, x2]| {
                        if x1.len() != d || x2.len() != d {
                            Err(Error::DimensionMismatch { expected: d, got: x1.len().min(x2.len()) })
                        } else {
                            Ok(x1.iter().chain(x2).cloned().collect())
                        }
                    })
                    .collect::<Result<_>>()?;
                (rows, false)
            }
        };
        if order.len() != 2 * d {
            return Err(Error::DegenerateOrder(format!("{} basis elements, need {}", order.len(), 2 * d)));
        }
        let order_rat: Vec<Vec<Rational>> = order.iter().map(|r| r.iter().map(|&v| rat(v)).collect()).collect();
        let order_inverse = inverse_rational(&order_rat).ok_or_else(|| Error::DegenerateOrder("order basis is linearly dependent".into()))?;

        let ramified: Vec<usize> = gamma_values.iter().enumerate().filter(|(_, g)| **g < 0.0).map(|(i, _)| i).collect();
        let statement = if ramified.is_empty() {
            "gamma is positive at every real place; division is not certified by ramification".to_string()
        } else {
            format!("gamma < 0 at real places {ramified:?}: the algebra ramifies there, so it is not split and hence a division algebra")
        };

        let mut alg = CyclicAlgebraCode {
            name: cfg.name.clone(),
            center,
            quadratic,
            compositum,
            gamma_center: cfg.gamma.clone(),
            gamma,
            center_map: cfg.center_in_compositum.clone(),
            conjugation,
            tau_values,
            gamma_values,
            order,
            order_inverse,
            natural_order,
            unit_closed: false,
            certificate: DivisionCertificate { ramified_real_places: ramified, statement },
        };
        alg.check_closure()?;
        alg.unit_closed = alg.check_unit_closure()?;
        Ok(Arc::new(alg))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn center(&self) -> &Arc<NumberField> {
        &self.center
    }

    pub fn quadratic(&self) -> &Arc<NumberField> {
        &self.quadratic
    }

    pub fn compositum(&self) -> &Arc<NumberField> {
        &self.compositum
    }

    /// `k`, the degree of the center.
    pub fn center_degree(&self) -> usize {
        self.center.degree()
    }

    /// `gamma` in center coordinates.
    pub fn gamma(&self) -> &[i64] {
        &self.gamma_center
    }

    /// `tau_i(gamma)` for each embedding of the center.
    pub fn gamma_values(&self) -> &[f64] {
        &self.gamma_values
    }

    pub fn division_certificate(&self) -> &DivisionCertificate {
        &self.certificate
    }

    pub fn is_natural_order(&self) -> bool {
        self.natural_order
    }

    /// Order basis in natural coordinates `(x1 | x2)`.
    pub fn order_basis(&self) -> &[Vec<i64>] {
        &self.order
    }

    fn d(&self) -> usize {
        self.compositum.degree()
    }

    /// Product in natural integer coordinates: `(x1, x2)(y1, y2) = (x1 y1 + gamma x2 y2*, x1 y2 + x2 y1*)`.
    pub fn mul_natural(&self, x: &[i64], y: &[i64]) -> Result<Vec<i64>> {
        let e = &self.compositum;
        let d = self.d();
        let (x1, x2) = x.split_at(d);
        let (y1, y2) = y.split_at(d);
        let conj = |v: &[i64]| e.conj_int(v).ok_or(Error::Overflow("conjugation"));
        let y1c = conj(y1)?;
        let y2c = conj(y2)?;
        let a = e.mul_int(x1, y1)?;
        let b = e.mul_int(&e.mul_int(&self.gamma, x2)?, &y2c)?;
        let c = e.mul_int(x1, y2)?;
        let f = e.mul_int(x2, &y1c)?;
        let mut out: Vec<i64> = a.iter().zip(&b).map(|(p, q)| p.checked_add(*q).ok_or(Error::Overflow("algebra product"))).collect::<Result<_>>()?;
        for (p, q) in c.iter().zip(&f) {
            out.push(p.checked_add(*q).ok_or(Error::Overflow("algebra product"))?);
        }
        Ok(out)
    }

    /// Natural coordinates of the order element with order coordinates `c`.
    pub fn to_natural(&self, c: &[i64]) -> Result<Vec<i64>> {
        if c.len() != self.order.len() {
            return Err(Error::DimensionMismatch { expected: self.order.len(), got: c.len() });
        }
        let mut out = vec![0i128; 2 * self.d()];
        for (ci, row) in c.iter().zip(&self.order) {
            if *ci == 0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(row) {
                *o += *ci as i128 * *v as i128;
            }
        }
        out.into_iter().map(|v| i64::try_from(v).map_err(|_| Error::Overflow("order coordinates"))).collect()
    }

    /// Order coordinates of an element given in rational natural coordinates.
    pub fn to_order_rational(&self, x: &[Rational]) -> Vec<Rational> {
        vec_mat(x, &self.order_inverse)
    }

    fn to_order(&self, x: &[i64]) -> Result<Vec<i64>> {
        let xr: Vec<Rational> = x.iter().map(|&v| rat(v)).collect();
        let c = self.to_order_rational(&xr);
        crate::exact::to_i64_vec(&c).ok_or_else(|| Error::NotInOrder(format!("{x:?} has coordinates {c:?}", c = c.iter().map(|v| v.to_string()).collect::<Vec<_>>())))
    }

    fn check_closure(&self) -> Result<()> {
        let mut one = vec![0i64; 2 * self.d()];
        one[..self.d()].copy_from_slice(self.compositum.one());
        if self.to_order(&one).is_err() {
            return Err(Error::DegenerateOrder("the order does not contain 1".into()));
        }
        for (a, x) in self.order.iter().enumerate() {
            for (b, y) in self.order.iter().enumerate() {
                let p = self.mul_natural(x, y)?;
                if self.to_order(&p).is_err() {
                    return Err(Error::DegenerateOrder(format!("product of basis elements {a} and {b} leaves the order")));
                }
            }
        }
        Ok(())
    }

    fn central(&self, k_elem: &[i64]) -> Vec<i64> {
        let mut out = image(&self.center_map, k_elem);
        out.extend(vec![0i64; self.d()]);
        out
    }

    fn check_unit_closure(&self) -> Result<bool> {
        for (u, inv) in self.center.fundamental_units().iter().zip(self.center.unit_inverses()) {
            for w in [u, inv] {
                let c = self.central(w);
                for x in &self.order {
                    if self.to_order(&self.mul_natural(&c, x)?).is_err() {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    /// `tau_i(x)` for compositum coordinates `x`.
    fn tau(&self, i: usize, x: &[i64]) -> Complex64 {
        eval(&self.tau_values[i], x)
    }

    /// `tau_i(phi(a))` for natural coordinates.
    fn block(&self, i: usize, x: &[i64]) -> [Complex64; 4] {
        let (x1, x2) = x.split_at(self.d());
        let a = self.tau(i, x1);
        let b = self.tau(i, x2);
        [a, b, b.conj() * self.gamma_values[i], a.conj()]
    }

    /// Multiblock matrix for natural integer coordinates.
    pub fn psi_natural(&self, x: &[i64]) -> DMatrix<Complex64> {
        let k = self.center_degree();
        let mut m = DMatrix::zeros(2 * k, 2 * k);
        for i in 0..k {
            let b = self.block(i, x);
            m[(2 * i, 2 * i)] = b[0];
            m[(2 * i, 2 * i + 1)] = b[1];
            m[(2 * i + 1, 2 * i)] = b[2];
            m[(2 * i + 1, 2 * i + 1)] = b[3];
        }
        m
    }

    /// Reduced norm `x1 x1* - gamma x2 x2*` (an element of the center, in compositum coordinates).
    pub fn reduced_norm_natural(&self, x: &[i64]) -> Result<Vec<i64>> {
        let e = &self.compositum;
        let (x1, x2) = x.split_at(self.d());
        let c1 = e.conj_int(x1).ok_or(Error::Overflow("conjugation"))?;
        let c2 = e.conj_int(x2).ok_or(Error::Overflow("conjugation"))?;
        let a = e.mul_int(x1, &c1)?;
        let b = e.mul_int(&e.mul_int(&self.gamma, x2)?, &c2)?;
        a.iter().zip(&b).map(|(p, q)| p.checked_sub(*q).ok_or(Error::Overflow("reduced norm"))).collect()
    }

    /// `|det psi(x)| = |N_{K/Q}(nrd x)|`, exact.
    pub fn abs_det_natural(&self, x: &[i64]) -> Result<ExactAbsDet> {
        let nrd = self.reduced_norm_natural(x)?;
        // N_{E/Q}(nrd) = N_{K/Q}(nrd)^2 since nrd lies in the center
        let n = self.compositum.norm_int(&nrd).abs();
        let root = exact_sqrt(&n).ok_or_else(|| Error::InvalidArgument(format!("norm of the reduced norm {n} is not a square")))?;
        Ok(ExactAbsDet::integer(root))
    }

    /// Exact `||psi(x)||_F^2 = Tr(x1 x1*) + Tr((1 + gamma^2) x2 x2*) / 2` (traces over the compositum).
    pub fn frobenius_sq_natural(&self, x: &[i64]) -> Result<Rational> {
        let e = &self.compositum;
        let (x1, x2) = x.split_at(self.d());
        let c1 = e.conj_int(x1).ok_or(Error::Overflow("conjugation"))?;
        let c2 = e.conj_int(x2).ok_or(Error::Overflow("conjugation"))?;
        let t1 = e.trace_int(&e.mul_int(x1, &c1)?);
        let g2 = e.mul_int(&self.gamma, &self.gamma)?;
        let w: Vec<i64> = e.one().iter().zip(&g2).map(|(a, b)| a + b).collect();
        let t2 = e.trace_int(&e.mul_int(&w, &e.mul_int(x2, &c2)?)?);
        Ok(Rational::new(BigInt::from(2 * t1 + t2), BigInt::from(2)))
    }

    /// Upper constant `C` with `||block||^2 <= C |det block|`, when `gamma` is negative everywhere.
    fn block_constant(&self) -> Option<f64> {
        if self.gamma_values.iter().any(|&g| g >= 0.0) {
            return None;
        }
        Some(self.gamma_values.iter().map(|g| 2f64.max((1.0 + g * g) / g.abs())).fold(0.0, f64::max))
    }
}

// ---------------------------------------------------------------------------
// elements

/// `x1 + x2 u` with `x1, x2` in the compositum.
#[derive(Debug, Clone)]
pub struct AlgebraElement {
    algebra: Arc<CyclicAlgebraCode>,
    pub x1: FieldElement,
    pub x2: FieldElement,
}

impl PartialEq for AlgebraElement {
    fn eq(&self, other: &Self) -> bool {
        self.x1 == other.x1 && self.x2 == other.x2
    }
}

impl AlgebraElement {
    pub fn new(algebra: &Arc<CyclicAlgebraCode>, x1: FieldElement, x2: FieldElement) -> Result<Self> {
        for x in [&x1, &x2] {
            if x.field().name() != algebra.compositum.name() {
                return Err(Error::InvalidArgument(format!("{} is not the compositum", x.field().name())));
            }
        }
        Ok(AlgebraElement { algebra: algebra.clone(), x1, x2 })
    }

    pub fn from_ints(algebra: &Arc<CyclicAlgebraCode>, x1: &[i64], x2: &[i64]) -> Result<Self> {
        let e = algebra.compositum.clone();
        Self::new(algebra, FieldElement::from_ints(e.clone(), x1)?, FieldElement::from_ints(e, x2)?)
    }

    /// Element with natural integer coordinates `(x1 | x2)`.
    pub fn from_natural(algebra: &Arc<CyclicAlgebraCode>, x: &[i64]) -> Result<Self> {
        let d = algebra.d();
        if x.len() != 2 * d {
            return Err(Error::DimensionMismatch { expected: 2 * d, got: x.len() });
        }
        Self::from_ints(algebra, &x[..d], &x[d..])
    }

    pub fn from_order_coords(algebra: &Arc<CyclicAlgebraCode>, c: &[i64]) -> Result<Self> {
        Self::from_natural(algebra, &algebra.to_natural(c)?)
    }

    pub fn one(algebra: &Arc<CyclicAlgebraCode>) -> Self {
        let e = algebra.compositum.clone();
        AlgebraElement { algebra: algebra.clone(), x1: FieldElement::one(e.clone()), x2: FieldElement::zero(e) }
    }

    pub fn u(algebra: &Arc<CyclicAlgebraCode>) -> Self {
        let e = algebra.compositum.clone();
        AlgebraElement { algebra: algebra.clone(), x1: FieldElement::zero(e.clone()), x2: FieldElement::one(e) }
    }

    /// Central element from center coordinates.
    pub fn central(algebra: &Arc<CyclicAlgebraCode>, k_elem: &[i64]) -> Result<Self> {
        if k_elem.len() != algebra.center_degree() {
            return Err(Error::DimensionMismatch { expected: algebra.center_degree(), got: k_elem.len() });
        }
        Self::from_natural(algebra, &algebra.central(k_elem))
    }

    pub fn algebra(&self) -> &Arc<CyclicAlgebraCode> {
        &self.algebra
    }

    pub fn is_zero(&self) -> bool {
        self.x1.is_zero() && self.x2.is_zero()
    }

    fn conj(&self, x: &FieldElement) -> FieldElement {
        FieldElement::new(x.field().clone(), vec_mat(x.coords(), &self.algebra.conjugation)).expect("same degree")
    }

    fn gamma(&self) -> FieldElement {
        FieldElement::from_ints(self.algebra.compositum.clone(), &self.algebra.gamma).expect("same degree")
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Ok(AlgebraElement { algebra: self.algebra.clone(), x1: self.x1.add(&other.x1)?, x2: self.x2.add(&other.x2)? })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        let g = self.gamma();
        let x1 = self.x1.mul(&other.x1)?.add(&g.mul(&self.x2)?.mul(&self.conj(&other.x2))?)?;
        let x2 = self.x1.mul(&other.x2)?.add(&self.x2.mul(&self.conj(&other.x1))?)?;
        Ok(AlgebraElement { algebra: self.algebra.clone(), x1, x2 })
    }

    /// Natural rational coordinates `(x1 | x2)`.
    pub fn natural_coords(&self) -> Vec<Rational> {
        self.x1.coords().iter().chain(self.x2.coords()).cloned().collect()
    }

    fn values(&self, i: usize) -> (Complex64, Complex64) {
        let ev = |x: &FieldElement| -> Complex64 {
            x.coords()
                .iter()
                .zip(&self.algebra.tau_values[i])
                .map(|(c, v)| v * crate::exact::rational_to_f64(c))
                .sum()
        };
        (ev(&self.x1), ev(&self.x2))
    }

    fn block_matrix(&self, i: usize) -> DMatrix<Complex64> {
        let (a, b) = self.values(i);
        let g = self.algebra.gamma_values[i];
        DMatrix::from_row_slice(2, 2, &[a, b, b.conj() * g, a.conj()])
    }

    /// `phi(a)` under the first embedding.
    pub fn phi(&self) -> DMatrix<Complex64> {
        self.block_matrix(0)
    }

    /// `diag(tau_1(phi(a)), ..., tau_k(phi(a)))`.
    pub fn psi(&self) -> DMatrix<Complex64> {
        let k = self.algebra.center_degree();
        let mut m = DMatrix::zeros(2 * k, 2 * k);
        for i in 0..k {
            m.view_mut((2 * i, 2 * i), (2, 2)).copy_from(&self.block_matrix(i));
        }
        m
    }

    pub fn reduced_norm(&self) -> Result<FieldElement> {
        let g = self.gamma();
        self.x1.mul(&self.conj(&self.x1))?.sub(&g.mul(&self.x2)?.mul(&self.conj(&self.x2))?)
    }
}

// ---------------------------------------------------------------------------
// the order lattice

/// Exact preimages for `psi(Lambda)` in order coordinates.
#[derive(Debug, Clone)]
pub struct OrderTag {
    algebra: Arc<CyclicAlgebraCode>,
}

impl ElementTag for OrderTag {
    fn abs_det(&self, coords: &[i64]) -> Result<ExactAbsDet> {
        self.algebra.abs_det_natural(&self.algebra.to_natural(coords)?)
    }

    fn frobenius_norm_sq(&self, coords: &[i64]) -> Result<Rational> {
        self.algebra.frobenius_sq_natural(&self.algebra.to_natural(coords)?)
    }

    fn preimage_matrix(&self, coords: &[i64]) -> Result<DMatrix<Complex64>> {
        Ok(self.algebra.psi_natural(&self.algebra.to_natural(coords)?))
    }

    fn describe(&self, coords: &[i64]) -> String {
        format!("{}{coords:?}", self.algebra.name)
    }

    fn orbit_action(&self) -> Option<OrbitAction> {
        if !self.algebra.unit_closed {
            return None;
        }
        Some(OrbitAction {
            block_size: 2,
            blocks: self.algebra.center_degree(),
            unit_logs: self.algebra.center.unit_logs(),
            upper_block_constant: self.algebra.block_constant()?,
        })
    }

    fn apply_units(&self, coords: &[i64], exponents: &[i64]) -> Result<Vec<i64>> {
        let k = &self.algebra.center;
        let unit = k.apply_units_int(k.one(), exponents)?;
        let c = self.algebra.central(&unit);
        let x = self.algebra.to_natural(coords)?;
        self.algebra.to_order(&self.algebra.mul_natural(&c, &x)?)
    }
}

/// `psi(Lambda)`: rank `4k` in `2k x 2k` matrices.
pub fn order_lattice(algebra: &Arc<CyclicAlgebraCode>) -> Result<MatrixLattice> {
    let basis = algebra.order.iter().map(|b| algebra.psi_natural(b)).collect();
    MatrixLattice::new(basis, Some(Arc::new(OrderTag { algebra: algebra.clone() }))).map_err(|e| match e {
        Error::InvalidArgument(msg) => Error::DegenerateOrder(msg),
        e => e,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalIndex {
    /// `[Lambda : x Lambda]`
    pub index: BigInt,
    pub abs_det: BigInt,
}

/// `[Lambda : x Lambda]` as `|det|` of the integer matrix of `lambda -> x lambda`
/// on the order basis, with the check `|det psi(x)|^2 = index`.
pub fn principal_ideal_index(x: &AlgebraElement) -> Result<PrincipalIndex> {
    let a = x.algebra();
    if x.is_zero() {
        return Err(Error::ZeroElement);
    }
    let order_coords = a.to_order_rational(&x.natural_coords());
    let c = crate::exact::to_i64_vec(&order_coords)
        .ok_or_else(|| Error::NotInOrder(order_coords.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")))?;
    let xn = a.to_natural(&c)?;
    let rows: Vec<Vec<BigInt>> = a
        .order
        .iter()
        .map(|b| Ok(a.to_order(&a.mul_natural(&xn, b)?)?.into_iter().map(BigInt::from).collect()))
        .collect::<Result<_>>()?;
    let index = det_bigint(&rows).abs();
    let det = a.abs_det_natural(&xn)?;
    if &det.radicand * &det.radicand != index {
        return Err(Error::InvalidArgument(format!("|det psi(x)|^2 = {} differs from the index {index}", &det.radicand * &det.radicand)));
    }
    Ok(PrincipalIndex { index, abs_det: det.radicand })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Orthogonality {
    pub lhs: f64,
    pub rhs: f64,
    pub defect: f64,
}

/// `||psi(x) + psi(u y)||^2` against `||psi(x)||^2 + ||psi(u y)||^2` for `x, y` in the compositum.
pub fn orthogonality_check(algebra: &Arc<CyclicAlgebraCode>, x: &[i64], y: &[i64]) -> Result<Orthogonality> {
    let e = &algebra.compositum;
    let zero = vec![0i64; e.degree()];
    let px = AlgebraElement::from_ints(algebra, x, &zero)?.psi();
    // u y = y* u
    let yc = e.conj_int(y).ok_or(Error::Overflow("conjugation"))?;
    let puy = AlgebraElement::from_ints(algebra, &zero, &yc)?.psi();
    let lhs = frobenius_sq(&(&px + &puy));
    let rhs = frobenius_sq(&px) + frobenius_sq(&puy);
    Ok(Orthogonality { lhs, rhs, defect: (lhs - rhs).abs() })
}

#[derive(Debug, Clone, Serialize)]
pub struct QoGrowthBounds {
    pub radius: f64,
    pub receive_antennas: u32,
    /// `N_K (log M)^(k-1)` from the center's units
    pub lower: f64,
    pub upper_shape: String,
}

pub fn qo_growth_bounds(algebra: &CyclicAlgebraCode, radius: f64, receive_antennas: u32) -> Result<QoGrowthBounds> {
    if receive_antennas < 2 {
        return Err(Error::OutOfScope(format!("the order-code bounds need n_r > 1, got {receive_antennas}")));
    }
    if !(radius >= std::f64::consts::E) {
        return Err(Error::InvalidArgument(format!("radius must be at least e, got {radius}")));
    }
    let k = algebra.center_degree();
    let lower = unit_density_constant(&algebra.center, k)? * radius.ln().powi(k as i32 - 1);
    Ok(QoGrowthBounds {
        radius,
        receive_antennas,
        lower,
        upper_shape: format!("zeta_Lambda({receive_antennas}) [Lambda^* : O_K^*] (log M)^{}", k - 1),
    })
}

/// `sup S(M) / (log M)^(k-1)` over the sampled radii.
pub fn empirical_prefactor(curve: &SumCurve, k: usize) -> f64 {
    curve
        .samples
        .iter()
        .map(|s| s.value / s.radius.ln().powi(k as i32 - 1))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct UnitFloor {
    pub radius: f64,
    /// points of `psi(Lambda)` in the ball with `|det| = 1`
    pub det_one_points: u64,
    /// `|psi(O_K^*) cap B(M)|`
    pub central_units: u64,
}

pub fn central_unit_floor(algebra: &Arc<CyclicAlgebraCode>, lattice: &MatrixLattice, radius: f64, budget: u64) -> Result<UnitFloor> {
    let parts = lattice.fold_ball(radius, budget, || 0u64, |n, p| {
        if p.exact_det.as_ref().is_some_and(|d| d.is_one()) {
            *n += 1;
        }
        Ok(())
    })?;
    // ||psi(eps)||^2 = 2 ||psi_K(eps)||^2 for central units
    let central_units = if radius / 2f64.sqrt() >= 1.0 {
        units_in_ball(&algebra.center, radius / 2f64.sqrt())?.count
    } else {
        0
    };
    Ok(UnitFloor { radius, det_one_points: parts.into_iter().sum(), central_units })
}

#[derive(Debug, Clone, Serialize)]
pub struct UnitCountConstant {
    pub radii: Vec<f64>,
    /// smallest `c` with `|psi(x) psi(O_K^*) cap B(M)| <= |psi(O_K^*) cap B(cM)|`, per radius
    pub per_radius: Vec<f64>,
    pub c: f64,
}

/// Fitted constant comparing the central-unit orbit of `x` with the central units themselves.
pub fn unit_count_constant(x: &AlgebraElement, radii: &[f64]) -> Result<UnitCountConstant> {
    let a = x.algebra();
    let k = a.center_degree();
    let scanner = ExponentScanner::new(a.center.unit_logs(), k)?;
    let psi = x.psi();
    let norms: Vec<f64> = (0..k)
        .map(|i| psi.view((2 * i, 2 * i), (2, 2)).iter().map(|z| z.norm_sqr()).sum())
        .collect();
    let unit_weights = vec![2.0; k];
    let mut per_radius = Vec::with_capacity(radii.len());
    for &m in radii {
        let need = scanner.count_in_ball(&norms, m);
        if need == 0 {
            per_radius.push(0.0);
            continue;
        }
        let mut r = m.max(2f64.sqrt() * k as f64);
        while scanner.count_in_ball(&unit_weights, r) < need {
            r *= 2.0;
        }
        let upper = vec![r.ln(); k];
        let mut unit_norms = Vec::new();
        scanner.for_each(&upper, 1e-9, |_, l| unit_norms.push(l.iter().map(|x| 2.0 * (2.0 * x).exp()).sum::<f64>().sqrt()));
        unit_norms.sort_by(|p, q| p.total_cmp(q));
        per_radius.push(unit_norms[need as usize - 1] / m);
    }
    let c = per_radius.iter().cloned().fold(0.0, f64::max);
    Ok(UnitCountConstant { radii: radii.to_vec(), per_radius, c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::DEFAULT_BUDGET;

    fn hamilton() -> Arc<CyclicAlgebraCode> {
        algebra_lookup("HAMILTON_SQRT5").unwrap()
    }

    fn close(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> bool {
        (a - b).iter().all(|z| z.norm() < 1e-9)
    }

    #[test]
    fn builtins_load() {
        assert_eq!(algebra_names(), vec!["HAMILTON_SQRT5", "ALAMOUTI"]);
        let a = hamilton();
        assert_eq!(a.gamma_values().len(), 2);
        assert!(a.gamma_values().iter().all(|g| (g + 1.0).abs() < 1e-12));
        assert_eq!(a.division_certificate().ramified_real_places, vec![0, 1]);
    }

    #[test]
    fn one_plus_u() {
        let a = hamilton();
        let x = AlgebraElement::one(&a).add(&AlgebraElement::u(&a)).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, -1.0, 1.0]).map(|v| Complex64::new(v, 0.0));
        assert!(close(&x.phi(), &expect));
        let psi = x.psi();
        assert!((psi.determinant().re - 4.0).abs() < 1e-9);
        assert!((frobenius_sq(&psi) - 8.0).abs() < 1e-9);
        let idx = principal_ideal_index(&x).unwrap();
        assert_eq!((idx.abs_det, idx.index), (BigInt::from(4), BigInt::from(16)));
    }

    #[test]
    fn u_and_sqrt5() {
        let a = hamilton();
        let u = AlgebraElement::u(&a);
        assert!((u.phi().determinant().re - 1.0).abs() < 1e-12);
        // sqrt 5 = 2 phi - 1
        let s = AlgebraElement::central(&a, &[-1, 2]).unwrap();
        let d: Vec<f64> = (0..4).map(|i| s.psi()[(i, i)].re).collect();
        let r5 = 5f64.sqrt();
        assert!(d.iter().zip([r5, r5, -r5, -r5]).all(|(x, y)| (x - y).abs() < 1e-12));
        assert!((s.psi().determinant().re - 25.0).abs() < 1e-9);
    }

    #[test]
    fn central_two_has_index_256() {
        let a = hamilton();
        let two = AlgebraElement::central(&a, &[2, 0]).unwrap();
        assert_eq!(principal_ideal_index(&two).unwrap().index, BigInt::from(256));
        assert_eq!(principal_ideal_index(&AlgebraElement::one(&a)).unwrap().index, BigInt::from(1));
    }

    #[test]
    fn zero_and_fractional_elements_rejected() {
        let a = hamilton();
        let zero = AlgebraElement::from_ints(&a, &[0; 4], &[0; 4]).unwrap();
        assert!(matches!(principal_ideal_index(&zero), Err(Error::ZeroElement)));
        let e = a.compositum().clone();
        let half = FieldElement::new(e.clone(), vec![Rational::new(1.into(), 2.into()), rat(0), rat(0), rat(0)]).unwrap();
        let x = AlgebraElement::new(&a, half, FieldElement::zero(e)).unwrap();
        assert!(matches!(principal_ideal_index(&x), Err(Error::NotInOrder(_))));
    }

    #[test]
    fn orthogonality_examples() {
        let a = hamilton();
        let o = orthogonality_check(&a, &[1, 0, 0, 0], &[1, 0, 0, 0]).unwrap();
        assert!((o.lhs - 8.0).abs() < 1e-12 && (o.rhs - 8.0).abs() < 1e-12);
        let o = orthogonality_check(&a, &[3, -1, 2, 5], &[0, 0, 0, 0]).unwrap();
        assert_eq!(o.defect, 0.0);
    }

    #[test]
    fn lattice_shape_and_exact_tag() {
        let a = hamilton();
        let l = order_lattice(&a).unwrap();
        assert_eq!((l.rank(), l.matrix_size()), (8, 4));
        assert!((l.volume() - 400.0).abs() < 1e-6);
        let tag = l.tag().unwrap();
        let c = [1, 0, 2, -1, 0, 1, 1, 3];
        let numeric = l.point_matrix(&c);
        assert!(close(&numeric, &tag.preimage_matrix(&c).unwrap()));
        let exact = crate::exact::rational_to_f64(&tag.frobenius_norm_sq(&c).unwrap());
        assert!((exact - frobenius_sq(&numeric)).abs() < 1e-9 * exact);
        let det = tag.abs_det(&c).unwrap().to_f64();
        assert!((det - numeric.determinant().norm()).abs() < 1e-9 * det);
    }

    #[test]
    fn alamouti_norm_is_twice_the_determinant() {
        let a = algebra_lookup("ALAMOUTI").unwrap();
        let l = order_lattice(&a).unwrap();
        assert!((l.volume() - 4.0).abs() < 1e-9);
        for p in l.enumerate_ball(4.0, DEFAULT_BUDGET).unwrap() {
            let p = p.unwrap();
            assert!((p.frobenius_norm.powi(2) - 2.0 * p.abs_det).abs() < 1e-9);
        }
    }

    #[test]
    fn phi_is_multiplicative() {
        let a = hamilton();
        let x = AlgebraElement::from_ints(&a, &[1, 2, -1, 0], &[0, 3, 1, -2]).unwrap();
        let y = AlgebraElement::from_ints(&a, &[-2, 0, 1, 1], &[1, -1, 0, 4]).unwrap();
        let xy = x.mul(&y).unwrap();
        assert!(close(&xy.psi(), &(x.psi() * y.psi())));
        let u = AlgebraElement::u(&a);
        let gamma = AlgebraElement::central(&a, a.gamma()).unwrap();
        assert_eq!(u.mul(&u).unwrap(), gamma);
    }

    #[test]
    fn growth_bounds_scope() {
        let a = hamilton();
        let b = qo_growth_bounds(&a, 10f64.exp(), 2).unwrap();
        assert!((b.lower - 10.0 * 4.0 / a.center().regulator()).abs() < 1e-9);
        assert!(matches!(qo_growth_bounds(&a, 100.0, 1), Err(Error::OutOfScope(_))));
        let k1 = algebra_lookup("ALAMOUTI").unwrap();
        assert!((qo_growth_bounds(&k1, 100.0, 2).unwrap().lower - 2.0).abs() < 1e-12);
    }

    #[test]
    fn non_closed_order_rejected() {
        let mut cfg = builtin_configs()[1].clone();
        // Z + Z i + Z u/2 + ... is not a ring
        cfg.order_basis = Some(vec![
            [vec![1, 0], vec![0, 0]],
            [vec![0, 1], vec![0, 0]],
            [vec![0, 0], vec![1, 0]],
            [vec![0, 0], vec![0, 1]],
        ]);
        assert!(CyclicAlgebraCode::new(&cfg).is_ok());
        cfg.order_basis = Some(vec![
            [vec![1, 0], vec![0, 0]],
            [vec![0, 2], vec![0, 0]],
            [vec![0, 0], vec![1, 0]],
            [vec![0, 0], vec![0, 1]],
        ]);
        assert!(matches!(CyclicAlgebraCode::new(&cfg), Err(Error::DegenerateOrder(_))));
        cfg.order_basis = Some(vec![
            [vec![1, 0], vec![0, 0]],
            [vec![2, 0], vec![0, 0]],
            [vec![0, 0], vec![1, 0]],
            [vec![0, 0], vec![0, 1]],
        ]);
        assert!(matches!(CyclicAlgebraCode::new(&cfg), Err(Error::DegenerateOrder(_))));
    }

    #[test]
    fn unit_constant_is_bounded() {
        let a = hamilton();
        let radii = [20.0, 200.0, 2000.0];
        let one = unit_count_constant(&AlgebraElement::one(&a), &radii).unwrap();
        assert!(one.c <= 1.0 + 1e-12);
        let x = AlgebraElement::from_ints(&a, &[1, 2, -1, 0], &[0, 3, 1, -2]).unwrap();
        assert!(unit_count_constant(&x, &radii).unwrap().c <= 2.0);
    }
}
