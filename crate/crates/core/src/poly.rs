//! Integer polynomials: complex roots, power sums, and factorization shape modulo a prime.
//!
//! Coefficient vectors are stored lowest degree first.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::Zero;

/// Complex roots of a monic integer polynomial (Aberth iteration, then Newton polish).
pub fn complex_roots(coeffs: &[i64]) -> Vec<Complex64> {
    let deg = coeffs.len() - 1;
    if deg == 1 {
        return vec![Complex64::new(-(coeffs[0] as f64), 0.0)];
    }
    let c: Vec<Complex64> = coeffs.iter().map(|&x| Complex64::new(x as f64, 0.0)).collect();
    let eval = |z: Complex64| -> (Complex64, Complex64) {
        let mut p = Complex64::zero();
        let mut dp = Complex64::zero();
        for a in c.iter().rev() {
            dp = dp * z + p;
            p = p * z + a;
        }
        (p, dp)
    };
    // Cauchy bound
    let bound = 1.0 + coeffs[..deg].iter().map(|&x| (x as f64).abs()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..deg)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / deg as f64 + 0.4;
            Complex64::from_polar(0.5 * bound, angle)
        })
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for k in 0..deg {
            let (p, dp) = eval(z[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..deg)
                .filter(|&j| j != k)
                .map(|j| Complex64::new(1.0, 0.0) / (z[k] - z[j]))
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            z[k] -= step;
            moved = moved.max(step.norm());
        }
        if moved < 1e-15 {
            break;
        }
    }
    for root in z.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = eval(*root);
            if dp.norm() > 0.0 {
                *root -= p / dp;
            }
        }
    }
    z
}

/// Power sums `p_j = sum of roots^j` for `j = 0..count` (Newton's identities).
pub fn power_sums(coeffs: &[i64], count: usize) -> Vec<BigInt> {
    let n = coeffs.len() - 1;
    // monic: x^n + a_{n-1} x^{n-1} + ... ; e_k = (-1)^k a_{n-k}
    let a = |k: usize| -> BigInt { BigInt::from(coeffs[n - k]) };
    let mut p: Vec<BigInt> = Vec::with_capacity(count);
    for j in 0..count {
        if j == 0 {
            p.push(BigInt::from(n as i64));
            continue;
        }
        // p_j + a_{n-1} p_{j-1} + ... + a_{n-j+1} p_1 + j a_{n-j} = 0   (j <= n)
        // p_j + a_{n-1} p_{j-1} + ... + a_0 p_{j-n} = 0                 (j > n)
        let mut s = BigInt::zero();
        for k in 1..=j.min(n) {
            if k < j {
                s += a(k) * &p[j - k];
            } else {
                s += a(k) * BigInt::from(j as i64);
            }
        }
        p.push(-s);
    }
    p
}

// ---------------------------------------------------------------------------
// polynomials over F_p

type Fp = Vec<u64>;

fn trim(mut f: Fp) -> Fp {
    while f.len() > 1 && *f.last().unwrap() == 0 {
        f.pop();
    }
    if f.is_empty() {
        f.push(0);
    }
    f
}

fn deg(f: &Fp) -> isize {
    if f.len() == 1 && f[0] == 0 {
        -1
    } else {
        f.len() as isize - 1
    }
}

fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

fn pow_mod(mut a: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1u64;
    a %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = r * a % p;
        }
        a = a * a % p;
        e >>= 1;
    }
    r
}

fn sub(f: &Fp, g: &Fp, p: u64) -> Fp {
    let n = f.len().max(g.len());
    let r = (0..n)
        .map(|i| {
            let a = f.get(i).copied().unwrap_or(0);
            let b = g.get(i).copied().unwrap_or(0);
            (a + p - b) % p
        })
        .collect();
    trim(r)
}

fn mul(f: &Fp, g: &Fp, p: u64) -> Fp {
    let mut r = vec![0u64; f.len() + g.len() - 1];
    for (i, &a) in f.iter().enumerate() {
        if a == 0 {
            continue;
        }
        for (j, &b) in g.iter().enumerate() {
            r[i + j] = (r[i + j] + a * b) % p;
        }
    }
    trim(r)
}

fn divrem(f: &Fp, g: &Fp, p: u64) -> (Fp, Fp) {
    let dg = deg(g);
    assert!(dg >= 0, "division by zero polynomial");
    let mut r = f.clone();
    if deg(&r) < dg {
        return (vec![0], r);
    }
    let lead_inv = inv_mod(g[dg as usize], p);
    let mut q = vec![0u64; (deg(&r) - dg + 1) as usize];
    while deg(&r) >= dg {
        let dr = deg(&r) as usize;
        let c = r[dr] * lead_inv % p;
        let shift = dr - dg as usize;
        q[shift] = c;
        for (j, &b) in g.iter().enumerate() {
            r[shift + j] = (r[shift + j] + p - c * b % p) % p;
        }
        r = trim(r);
    }
    (trim(q), r)
}

fn monic(f: Fp, p: u64) -> Fp {
    let d = deg(&f);
    if d < 0 {
        return f;
    }
    let inv = inv_mod(f[d as usize], p);
    f.into_iter().map(|c| c * inv % p).collect()
}

fn gcd(a: &Fp, b: &Fp, p: u64) -> Fp {
    let mut a = a.clone();
    let mut b = b.clone();
    while deg(&b) >= 0 {
        let (_, r) = divrem(&a, &b, p);
        a = b;
        b = r;
    }
    monic(a, p)
}

fn derivative(f: &Fp, p: u64) -> Fp {
    if f.len() == 1 {
        return vec![0];
    }
    trim(
        f.iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| (i as u64 % p) * c % p)
            .collect(),
    )
}

fn pth_root(f: &Fp, p: u64) -> Fp {
    // coefficients of F_p are fixed by Frobenius, so g(x)^p = g(x^p)
    trim(f.iter().step_by(p as usize).copied().collect())
}

fn squarefree_parts(f: &Fp, p: u64) -> Vec<(Fp, u32)> {
    let mut out = Vec::new();
    let d = derivative(f, p);
    if deg(&d) < 0 {
        for (g, e) in squarefree_parts(&pth_root(f, p), p) {
            out.push((g, e * p as u32));
        }
        return out;
    }
    let mut c = gcd(f, &d, p);
    let mut w = divrem(f, &c, p).0;
    let mut i = 1u32;
    while deg(&w) > 0 {
        let y = gcd(&w, &c, p);
        let fac = divrem(&w, &y, p).0;
        if deg(&fac) > 0 {
            out.push((monic(fac, p), i));
        }
        w = y;
        c = divrem(&c, &w, p).0;
        i += 1;
    }
    if deg(&c) > 0 {
        for (g, e) in squarefree_parts(&pth_root(&c, p), p) {
            out.push((g, e * p as u32));
        }
    }
    out
}

fn distinct_degree(f: &Fp, p: u64) -> Vec<u32> {
    let mut degrees = Vec::new();
    let mut g = f.clone();
    let mut h: Fp = vec![0, 1];
    let x: Fp = vec![0, 1];
    let mut i = 1u32;
    while deg(&g) >= 2 * i as isize {
        h = {
            // h <- h^p mod g
            let mut acc: Fp = vec![1];
            let mut base = divrem(&h, &g, p).1;
            let mut e = p;
            while e > 0 {
                if e & 1 == 1 {
                    acc = divrem(&mul(&acc, &base, p), &g, p).1;
                }
                base = divrem(&mul(&base, &base, p), &g, p).1;
                e >>= 1;
            }
            acc
        };
        let d = gcd(&g, &sub(&h, &x, p), p);
        if deg(&d) > 0 {
            for _ in 0..(deg(&d) as u32 / i) {
                degrees.push(i);
            }
            g = divrem(&g, &d, p).0;
            h = divrem(&h, &g, p).1;
        }
        i += 1;
    }
    if deg(&g) > 0 {
        degrees.push(deg(&g) as u32);
    }
    degrees
}

/// Shape of the factorization of a monic integer polynomial modulo `p`:
/// one `(multiplicity, degree)` pair per irreducible factor, sorted.
pub fn factorization_shape_mod_p(coeffs: &[i64], p: u64) -> Vec<(u32, u32)> {
    let f: Fp = trim(
        coeffs
            .iter()
            .map(|&c| c.rem_euclid(p as i64) as u64)
            .collect(),
    );
    let mut shape = Vec::new();
    for (part, e) in squarefree_parts(&f, p) {
        for d in distinct_degree(&part, p) {
            shape.push((e, d));
        }
    }
    shape.sort_unstable();
    shape
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots_of_x2_plus_1() {
        let mut r = complex_roots(&[1, 0, 1]);
        r.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!((r[0] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((r[1] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn roots_of_cyclotomic_20_lie_on_unit_circle() {
        let r = complex_roots(&[1, 0, -1, 0, 1, 0, -1, 0, 1]);
        assert_eq!(r.len(), 8);
        for z in r {
            assert!((z.norm() - 1.0).abs() < 1e-13);
            assert!((z.powu(20) - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn power_sums_of_golden_polynomial() {
        // roots phi, 1-phi: p1 = 1, p2 = 3, p3 = 4
        let p = power_sums(&[-1, -1, 1], 4);
        assert_eq!(p, vec![2.into(), 1.into(), 3.into(), 4.into()]);
    }

    #[test]
    fn shapes_modulo_small_primes() {
        // x^2 + 1: ramified at 2, split at 5, inert at 3
        assert_eq!(factorization_shape_mod_p(&[1, 0, 1], 2), vec![(2, 1)]);
        assert_eq!(factorization_shape_mod_p(&[1, 0, 1], 5), vec![(1, 1), (1, 1)]);
        assert_eq!(factorization_shape_mod_p(&[1, 0, 1], 3), vec![(1, 2)]);
        // Phi_5 mod 5 = (x - 1)^4; mod 11 splits completely; mod 2 irreducible
        assert_eq!(factorization_shape_mod_p(&[1, 1, 1, 1, 1], 5), vec![(4, 1)]);
        assert_eq!(factorization_shape_mod_p(&[1, 1, 1, 1, 1], 11), vec![(1, 1); 4]);
        assert_eq!(factorization_shape_mod_p(&[1, 1, 1, 1, 1], 2), vec![(1, 4)]);
        // Phi_5 mod 19: order of 19 mod 5 is 2
        assert_eq!(factorization_shape_mod_p(&[1, 1, 1, 1, 1], 19), vec![(1, 2), (1, 2)]);
    }

    #[test]
    fn shape_with_pth_power_part() {
        // (x^2 + x + 1)^2 * x mod 2 = x^5 + x^3 + x
        assert_eq!(
            factorization_shape_mod_p(&[0, 1, 0, 1, 0, 1], 2),
            vec![(1, 1), (2, 2)]
        );
        // x^4 + 1 = (x + 1)^4 mod 2
        assert_eq!(factorization_shape_mod_p(&[1, 0, 0, 0, 1], 2), vec![(4, 1)]);
    }
}
