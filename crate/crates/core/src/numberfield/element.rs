use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::Zero;

use super::NumberField;
use crate::error::{Error, Result};
use crate::exact::{det_rational, rat, rational_to_f64, to_i64_vec, Rational};

/// An element of a catalog field, in rational coordinates over the integral basis.
#[derive(Debug, Clone)]
pub struct FieldElement {
    field: Arc<NumberField>,
    coords: Vec<Rational>,
}

impl PartialEq for FieldElement {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.field, &other.field) && self.coords == other.coords
    }
}

impl FieldElement {
    pub fn new(field: Arc<NumberField>, coords: Vec<Rational>) -> Result<Self> {
        if coords.len() != field.degree() {
            return Err(Error::DimensionMismatch { expected: field.degree(), got: coords.len() });
        }
        Ok(FieldElement { field, coords })
    }

    pub fn from_ints(field: Arc<NumberField>, coords: &[i64]) -> Result<Self> {
        Self::new(field, coords.iter().map(|&c| rat(c)).collect())
    }

    pub fn zero(field: Arc<NumberField>) -> Self {
        let n = field.degree();
        FieldElement { field, coords: vec![Rational::zero(); n] }
    }

    pub fn one(field: Arc<NumberField>) -> Self {
        let coords = field.one().iter().map(|&c| rat(c)).collect();
        FieldElement { field, coords }
    }

    pub fn field(&self) -> &Arc<NumberField> {
        &self.field
    }

    pub fn coords(&self) -> &[Rational] {
        &self.coords
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }

    /// Algebraic integers are exactly the elements with integral coordinates.
    pub fn is_integral(&self) -> bool {
        self.coords.iter().all(|c| c.is_integer())
    }

    pub fn to_ints(&self) -> Option<Vec<i64>> {
        to_i64_vec(&self.coords)
    }

    fn same_field(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.field, &other.field) || self.field.name() == other.field.name() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "elements of {} and {} cannot be combined",
                self.field.name(),
                other.field.name()
            )))
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_field(other)?;
        let coords = self.coords.iter().zip(&other.coords).map(|(a, b)| a + b).collect();
        Ok(FieldElement { field: self.field.clone(), coords })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_field(other)?;
        let coords = self.coords.iter().zip(&other.coords).map(|(a, b)| a - b).collect();
        Ok(FieldElement { field: self.field.clone(), coords })
    }

    pub fn neg(&self) -> Self {
        FieldElement { field: self.field.clone(), coords: self.coords.iter().map(|a| -a).collect() }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_field(other)?;
        let n = self.field.degree();
        let c = self.field.structure_constants();
        let mut out = vec![Rational::zero(); n];
        for (i, x) in self.coords.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in other.coords.iter().enumerate() {
                if y.is_zero() {
                    continue;
                }
                let xy = x * y;
                for (k, o) in out.iter_mut().enumerate() {
                    if c[i][j][k] != 0 {
                        *o += &xy * rat(c[i][j][k]);
                    }
                }
            }
        }
        Ok(FieldElement { field: self.field.clone(), coords: out })
    }

    /// Rows are the coordinates of `self * w_i`.
    fn mult_matrix(&self) -> Vec<Vec<Rational>> {
        let n = self.field.degree();
        let c = self.field.structure_constants();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|k| {
                        self.coords
                            .iter()
                            .enumerate()
                            .filter(|(j, x)| !x.is_zero() && c[*j][i][k] != 0)
                            .fold(Rational::zero(), |acc, (j, x)| acc + x * rat(c[j][i][k]))
                    })
                    .collect()
            })
            .collect()
    }

    pub fn norm(&self) -> Rational {
        det_rational(&self.mult_matrix())
    }

    pub fn trace(&self) -> Rational {
        let n = self.field.degree();
        let mut t = Rational::zero();
        for i in 0..n {
            if self.coords[i].is_zero() {
                continue;
            }
            let mut e = vec![0i64; n];
            e[i] = 1;
            t += &self.coords[i] * Rational::from_integer(BigInt::from(self.field.trace_int(&e)));
        }
        t
    }

    pub fn inverse(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::ZeroElement);
        }
        let inv = crate::exact::inverse_rational(&self.mult_matrix()).ok_or(Error::ZeroElement)?;
        let one: Vec<Rational> = self.field.one().iter().map(|&c| rat(c)).collect();
        Ok(FieldElement { field: self.field.clone(), coords: crate::exact::vec_mat(&one, &inv) })
    }

    /// Values under the representative embeddings.
    pub fn embed(&self) -> Vec<Complex64> {
        let values = self.field.basis_embeddings();
        let mut out = vec![Complex64::zero(); self.field.embeddings().len()];
        for (c, row) in self.coords.iter().zip(&values) {
            let c = rational_to_f64(c);
            for (o, v) in out.iter_mut().zip(row) {
                *o += v * c;
            }
        }
        out
    }

    /// Values under all `degree` embeddings (representatives, then their conjugates).
    pub fn embed_all(&self) -> Vec<Complex64> {
        let r1 = self.field.signature().0;
        let mut v = self.embed();
        let conj: Vec<Complex64> = v[r1..].iter().map(|z| z.conj()).collect();
        v.extend(conj);
        v
    }

    pub fn is_one(&self) -> bool {
        self.coords.iter().zip(self.field.one()).all(|(a, &b)| *a == rat(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numberfield::catalog_lookup;

    #[test]
    fn golden_ratio_arithmetic() {
        let k = catalog_lookup("REAL_QUADRATIC_5").unwrap();
        let phi = FieldElement::from_ints(k.clone(), &[0, 1]).unwrap();
        let sq = phi.mul(&phi).unwrap();
        // phi^2 = phi + 1
        assert_eq!(sq, FieldElement::from_ints(k.clone(), &[1, 1]).unwrap());
        assert_eq!(phi.norm(), rat(-1));
        assert_eq!(phi.trace(), rat(1));
        let inv = phi.inverse().unwrap();
        assert_eq!(inv, FieldElement::from_ints(k, &[-1, 1]).unwrap());
        assert!(inv.is_integral());
    }

    #[test]
    fn half_is_not_integral() {
        let k = catalog_lookup("GAUSSIAN").unwrap();
        let two = FieldElement::from_ints(k.clone(), &[2, 0]).unwrap();
        let half = two.inverse().unwrap();
        assert!(!half.is_integral());
        assert!(half.mul(&two).unwrap().is_one());
        assert_eq!(two.norm(), rat(4));
    }

    #[test]
    fn embedding_product_is_the_norm() {
        let k = catalog_lookup("CYCLOTOMIC_5").unwrap();
        let x = FieldElement::from_ints(k, &[3, -1, 2, 5]).unwrap();
        let prod: Complex64 = x.embed_all().iter().product();
        let n = rational_to_f64(&x.norm());
        assert!((prod.re - n).abs() < 1e-9 * n.abs());
        assert!(prod.im.abs() < 1e-9 * n.abs());
    }
}
