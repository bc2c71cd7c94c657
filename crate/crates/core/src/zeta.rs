//! Ideal counts by norm and truncated Dedekind zeta values.

use std::io::Write;

use num_bigint::BigInt;
use num_integer::Integer;
use serde::Serialize;

use crate::analysis::linear_fit;
use crate::error::{Error, Result};
use crate::numberfield::{residue_times_class_number, NumberField};
use crate::poly::factorization_shape_mod_p;
use crate::sum::CompensatedSum;

/// Largest supported sieve limit.
pub const MAX_LIMIT: u64 = 10_000_000;

/// `z[n]` = number of integral ideals of norm exactly `n`, for `1 <= n <= limit`.
#[derive(Debug, Clone)]
pub struct IdealCountTable {
    field: String,
    degree: usize,
    limit: u64,
    // index 0 unused
    z: Vec<u32>,
}

impl IdealCountTable {
    pub fn field(&self) -> &str {
        &self.field
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `z(n)`; panics if `n` is 0 or beyond the limit.
    pub fn z(&self, n: u64) -> u32 {
        assert!(n >= 1 && n <= self.limit, "norm {n} outside 1..={}", self.limit);
        self.z[n as usize]
    }

    /// `z(1), ..., z(limit)`.
    pub fn values(&self) -> &[u32] {
        &self.z[1..]
    }

    /// `N(K, m) = sum_{n <= m} z(n)`.
    pub fn cumulative(&self, m: u64) -> u64 {
        self.z[1..=m.min(self.limit) as usize].iter().map(|&v| v as u64).sum()
    }

    /// `sum_{n <= m} z(n) / n^s`, accumulated in increasing `n`.
    pub fn partial_zeta(&self, s: f64, m: u64) -> f64 {
        let mut acc = CompensatedSum::new();
        for n in 1..=m.min(self.limit) {
            let z = self.z[n as usize];
            if z != 0 {
                acc.add(z as f64 * (n as f64).powf(-s));
            }
        }
        acc.value()
    }

    /// First coprime pair `(a, b)` with `ab <= bound` and `z(ab) != z(a) z(b)`.
    pub fn multiplicativity_violation(&self, bound: u64) -> Option<(u64, u64)> {
        let bound = bound.min(self.limit);
        for a in 2..=bound {
            for b in a..=bound / a {
                if a.gcd(&b) == 1 && self.z(a * b) != self.z(a) * self.z(b) {
                    return Some((a, b));
                }
            }
        }
        None
    }

    /// CSV with header `n,z,cumulative,zeta1`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "z", "cumulative", "zeta1"])?;
        let mut cum = 0u64;
        let mut zeta = CompensatedSum::new();
        for n in 1..=self.limit {
            let z = self.z[n as usize];
            cum += z as u64;
            if z != 0 {
                zeta.add(z as f64 / n as f64);
            }
            w.write_record([n.to_string(), z.to_string(), cum.to_string(), zeta.value().to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Factorization shape of `p O_K` as `(e, f)` pairs.
///
/// Read off the defining polynomial modulo `p` when `p` does not divide the
/// polynomial index; otherwise taken from the catalog.
pub fn prime_shape(k: &NumberField, p: u64) -> Result<Vec<(u32, u32)>> {
    if k.polynomial_index() % BigInt::from(p) != BigInt::from(0) {
        return Ok(factorization_shape_mod_p(k.polynomial(), p));
    }
    match k.local_factorization(p) {
        Some(shape) => {
            let total: u32 = shape.iter().map(|(e, f)| e * f).sum();
            if total as usize != k.degree() {
                return Err(Error::corrupted(k.name(), "local factorization", format!("sum e f = {total} at p = {p}")));
            }
            Ok(shape.to_vec())
        }
        None => Err(Error::CatalogIncomplete {
            field: k.name().to_string(),
            detail: format!("prime {p} divides the polynomial index and has no local factorization entry"),
        }),
    }
}

/// Number of ideals of norm `p^j` for `j = 0..=max_power`, from the residue degrees.
fn local_counts(shape: &[(u32, u32)], max_power: usize) -> Vec<u32> {
    let mut c = vec![0u32; max_power + 1];
    c[0] = 1;
    for &(_, f) in shape {
        let f = f as usize;
        for j in f..=max_power {
            c[j] += c[j - f];
        }
    }
    c
}

/// Exact ideal counts `z(n)`, `n <= limit`, by a multiplicative sieve.
pub fn ideal_counts(k: &NumberField, limit: u64) -> Result<IdealCountTable> {
    if limit == 0 {
        return Err(Error::InvalidArgument("limit must be positive".into()));
    }
    if limit > MAX_LIMIT {
        return Err(Error::BudgetExceeded { predicted: limit as f64, budget: MAX_LIMIT });
    }
    let m = limit as usize;
    // smallest prime factor
    let mut spf = vec![0u32; m + 1];
    for i in 2..=m {
        if spf[i] == 0 {
            spf[i] = i as u32;
            if i * i <= m {
                for j in (i * i..=m).step_by(i) {
                    if spf[j] == 0 {
                        spf[j] = i as u32;
                    }
                }
            }
        }
    }
    let mut z = vec![0u32; m + 1];
    z[1] = 1;
    // local tables, built when a prime is first met (at n = p)
    let mut local: Vec<Vec<u32>> = vec![Vec::new(); m + 1];
    for n in 2..=m {
        let p = spf[n] as usize;
        if p == n {
            let mut max_power = 0;
            let mut q = 1usize;
            while q <= m / p {
                q *= p;
                max_power += 1;
            }
            local[p] = local_counts(&prime_shape(k, p as u64)?, max_power);
        }
        let mut rest = n;
        let mut a = 0;
        while rest % p == 0 {
            rest /= p;
            a += 1;
        }
        z[n] = z[rest] * local[p][a];
    }
    Ok(IdealCountTable {
        field: k.name().to_string(),
        degree: k.degree(),
        limit,
        z,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CumulativeCount {
    pub limit: u64,
    pub count: u64,
    /// `alpha_K h_K M`
    pub main_term: f64,
    pub abs_error: f64,
    /// `abs_error / main_term`
    pub relative_error: f64,
}

pub fn ideal_count_cumulative(k: &NumberField, table: &IdealCountTable, m: u64) -> CumulativeCount {
    let count = table.cumulative(m);
    let main_term = residue_times_class_number(k) * m as f64;
    let abs_error = (count as f64 - main_term).abs();
    CumulativeCount {
        limit: m,
        count,
        main_term,
        abs_error,
        relative_error: abs_error / main_term,
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TruncatedZeta {
    pub s: f64,
    pub limit: u64,
    pub value: f64,
    /// Upper bound on `zeta_K(s) - value`; only for `s > 1`.
    pub tail_bound: Option<f64>,
}

/// `zeta_K(s, M) = sum_{N(A) <= M} N(A)^(-s)`.
pub fn truncated_zeta(table: &IdealCountTable, s: f64, m: u64) -> Result<TruncatedZeta> {
    if !(s >= 1.0) {
        return Err(Error::InvalidArgument(format!("s must be at least 1, got {s}")));
    }
    if m > table.limit() {
        return Err(Error::InvalidArgument(format!("M = {m} exceeds the table limit {}", table.limit())));
    }
    let value = table.partial_zeta(s, m);
    let tail_bound = (s > 1.0).then(|| zeta_tail_bound(table.degree(), s, m));
    Ok(TruncatedZeta { s, limit: m, value, tail_bound })
}

/// Bound on `sum_{n > M} z(n) n^(-s)` for a field of the given degree.
///
/// Uses `z(n) <= d_k(n)` (the `k`-fold divisor function, `k` = degree) and
/// `sum_{n <= x} d_k(n) <= x (log x + k - 1)^(k-1) / (k-1)!`, then partial
/// summation: the tail is at most `s / (k-1)! * int_{log M}^inf e^{-(s-1)u} (u + k - 1)^(k-1) du`.
pub fn zeta_tail_bound(degree: usize, s: f64, m: u64) -> f64 {
    let k = degree.max(1);
    let j = k - 1;
    let c = s - 1.0;
    let a = (m.max(1) as f64).ln();
    let base = a + j as f64;
    // int_a^inf e^{-cu} (u + b)^j du = e^{-ca} sum_i j!/(j-i)! (a+b)^(j-i) / c^(i+1)
    let mut integral = 0.0;
    let mut falling = 1.0;
    for i in 0..=j {
        if i > 0 {
            falling *= (j - i + 1) as f64;
        }
        integral += falling * base.powi((j - i) as i32) / c.powi(i as i32 + 1);
    }
    integral *= (-c * a).exp();
    let fact: f64 = (1..=j).map(|v| v as f64).product();
    s * integral / fact
}

/// `zeta_K(s)` bracketed as `[value, value + tail]` at the table limit.
pub fn zeta_upper(table: &IdealCountTable, s: f64) -> Result<f64> {
    let t = truncated_zeta(table, s, table.limit())?;
    Ok(t.value + t.tail_bound.unwrap_or(f64::INFINITY))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Decomposition {
    pub limit: u64,
    /// `sum_{n <= M} (z(n) - h alpha) / n`
    pub s_term: f64,
    /// `h alpha H_M`
    pub t_term: f64,
}

/// The split `zeta_K(1, M) = S + T` with `T = h_K alpha_K H_M`.
pub fn lemma33_decomposition(k: &NumberField, table: &IdealCountTable, m: u64) -> Result<Decomposition> {
    let zeta = truncated_zeta(table, 1.0, m)?.value;
    let t_term = residue_times_class_number(k) * crate::sum::harmonic(m);
    Ok(Decomposition { limit: m, s_term: zeta - t_term, t_term })
}

/// `max_{M' <= M} |S(M')|` over every integer `M'`, for each requested `M` (ascending).
pub fn s_term_running_max(k: &NumberField, table: &IdealCountTable, checkpoints: &[u64]) -> Result<Vec<f64>> {
    let ha = residue_times_class_number(k);
    let last = checkpoints.iter().copied().max().unwrap_or(0);
    if last > table.limit() {
        return Err(Error::InvalidArgument(format!("checkpoint {last} exceeds the table limit {}", table.limit())));
    }
    let mut s = CompensatedSum::new();
    let mut best = 0.0f64;
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut sorted: Vec<u64> = checkpoints.to_vec();
    sorted.sort_unstable();
    let mut next = 0;
    for n in 1..=last {
        s.add((table.z(n) as f64 - ha) / n as f64);
        best = best.max(s.value().abs());
        while next < sorted.len() && sorted[next] == n {
            out.push(best);
            next += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErrorTermFit {
    /// `|N(K, M) - alpha h M| ~ c M^(1 - a)`
    pub c: f64,
    pub a: f64,
}

/// Log-log regression of the ideal-counting error term over the given radii.
pub fn fit_error_term(k: &NumberField, table: &IdealCountTable, radii: &[u64]) -> Result<ErrorTermFit> {
    let points: Vec<(f64, f64)> = radii
        .iter()
        .map(|&m| ideal_count_cumulative(k, table, m))
        .filter(|c| c.abs_error > 0.0)
        .map(|c| ((c.limit as f64).ln(), c.abs_error.ln()))
        .collect();
    if points.len() < 2 {
        return Err(Error::Span("need at least two radii with nonzero error".into()));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
    let (slope, intercept) = linear_fit(&xs, &ys)?;
    Ok(ErrorTermFit { c: intercept.exp(), a: 1.0 - slope })
}

/// Least-squares slope of `zeta_K(1, M)` against `log M`.
pub fn zeta_log_slope(table: &IdealCountTable, radii: &[u64]) -> Result<f64> {
    let xs: Vec<f64> = radii.iter().map(|&m| (m as f64).ln()).collect();
    let ys: Vec<f64> = radii
        .iter()
        .map(|&m| truncated_zeta(table, 1.0, m).map(|t| t.value))
        .collect::<Result<_>>()?;
    Ok(linear_fit(&xs, &ys)?.0)
}
