//! One line per acceptance criterion: PASS, FAIL or SKIPPED, with the measured values.

use std::sync::Arc;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use invdet::analysis::{compare_growth, exp_radii, field_bound_report, fit_log_power, linear_fit, SlackRule, SumCurve};
use invdet::detsum::{inverse_det_sum, normalized_truncated_sums, truncated_curve, DEFAULT_ORBIT_WORK};
use invdet::lattice::{canonical_embedding_lattice, MatrixLattice, DEFAULT_BUDGET};
use invdet::numberfield::{catalog_lookup, residue_times_class_number, unit_density_constant, NumberField};
use invdet::qoalgebra::{algebra_lookup, order_lattice, orthogonality_check, principal_ideal_index, AlgebraElement};
use invdet::units::units_in_ball;
use invdet::zeta::{ideal_count_cumulative, ideal_counts, s_term_running_max, truncated_zeta, zeta_log_slope};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Pass,
    Fail,
    Skipped,
}

struct Outcome {
    verdict: Verdict,
    detail: String,
}

fn judged(ok: bool, detail: String) -> Outcome {
    Outcome { verdict: if ok { Verdict::Pass } else { Verdict::Fail }, detail }
}

fn run(id: u32, limit: Duration, f: impl FnOnce() -> Outcome) -> Verdict {
    let start = Instant::now();
    let mut out = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        judged(false, format!("panicked: {msg}"))
    });
    let elapsed = start.elapsed();
    if matches!(out.verdict, Verdict::Pass) && elapsed > limit {
        out.verdict = Verdict::Fail;
        out.detail.push_str(&format!("; runtime over the {:?} limit", limit));
    }
    let tag = match out.verdict {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::Skipped => "SKIPPED",
    };
    println!("criterion {id:>2}: {tag:<7} [{:.2}s] {}", elapsed.as_secs_f64(), out.detail);
    out.verdict
}

fn field(name: &str) -> Arc<NumberField> {
    catalog_lookup(name).unwrap()
}

// 1. exact small-ball sums over Z[i]
fn small_ball_sums() -> Outcome {
    let l = canonical_embedding_lattice(&field("GAUSSIAN")).unwrap();
    let s2 = inverse_det_sum(&l, 2.0, 2.0, DEFAULT_BUDGET).unwrap().value;
    let s4 = inverse_det_sum(&l, 2.0, 4.0, DEFAULT_BUDGET).unwrap().value;
    // brute force: 4 points of norm 1, 4 of norm 2, 4 of norm 4, |det| = |x|
    let mut o2 = 0.0;
    let mut o4 = 0.0;
    for a in -2i64..=2 {
        for b in -2i64..=2 {
            let n = (a * a + b * b) as f64;
            if n > 0.0 && n <= 4.0 {
                o2 += 1.0 / n;
                o4 += 1.0 / (n * n);
            }
        }
    }
    judged(s2 == 7.0 && s4 == 5.25 && o2 == 7.0 && o4 == 5.25, format!("S^2(2) = {s2}, S^4(2) = {s4} (oracle {o2}, {o4})"))
}

// 2. unit counting in Q(sqrt 5)
fn unit_counts() -> Outcome {
    let k = field("REAL_QUADRATIC_5");
    let nk = unit_density_constant(&k, 2).unwrap();
    // oracle: units are +-phi^j with ||psi||^2 = phi^(2j) + phi^(-2j) = L_(2|j|), a Lucas number
    let lucas_even: Vec<u128> = {
        let (mut a, mut b) = (2u128, 1u128);
        let mut out = Vec::new();
        for i in 0..120 {
            if i % 2 == 0 {
                out.push(a);
            }
            let c = a + b;
            a = b;
            b = c;
        }
        out
    };
    let mut ok = true;
    let mut parts = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for e in 1..=4 {
        let m = 10f64.powi(e);
        let m2 = 10u128.pow(2 * e as u32);
        let free = lucas_even.iter().enumerate().filter(|(_, &l)| l <= m2).map(|(j, _)| if j == 0 { 1 } else { 2 }).sum::<u64>();
        let oracle = 2 * free;
        let got = units_in_ball(&k, m).unwrap().count;
        let dev = (got as f64 - nk * m.ln()).abs();
        ok &= got == oracle && dev <= 6.0;
        parts.push(format!("M=1e{e}: {got} (oracle {oracle}, |dev| {dev:.2})"));
        xs.push(m.ln());
        ys.push(got as f64);
    }
    let slope = linear_fit(&xs, &ys).unwrap().0;
    let rel = (slope - nk).abs() / nk;
    ok &= rel <= 0.10;
    judged(ok, format!("{}; slope {slope:.4} vs N_K {nk:.4} ({:.1}%)", parts.join(", "), 100.0 * rel))
}

/// Ideals of norm `n <= limit` by direct enumeration of generators (both fields have class number 1).
fn direct_ideal_counts(name: &str, limit: u64) -> Vec<u32> {
    let mut z = vec![0u32; limit as usize + 1];
    match name {
        "GAUSSIAN" => {
            // a + bi up to units: a > 0, b >= 0
            for a in 1i64..=limit as i64 {
                for b in 0i64..=limit as i64 {
                    let n = (a * a + b * b) as u64;
                    if n <= limit {
                        z[n as usize] += 1;
                    }
                }
            }
        }
        "REAL_QUADRATIC_5" => {
            // a + b phi up to units: sigma_1 > 0 and 1 <= |sigma_1 / sigma_2| < phi^2
            let phi = (1.0 + 5f64.sqrt()) / 2.0;
            let psi = (1.0 - 5f64.sqrt()) / 2.0;
            let r = 3 * (limit as f64).sqrt() as i64 + 10;
            for a in -r..=r {
                for b in -r..=r {
                    let n = (a * a + a * b - b * b).unsigned_abs();
                    if n == 0 || n > limit {
                        continue;
                    }
                    let s1 = a as f64 + b as f64 * phi;
                    let s2 = a as f64 + b as f64 * psi;
                    let q = (s1 / s2).abs();
                    if s1 > 0.0 && q >= 1.0 - 1e-12 && q < phi * phi - 1e-12 {
                        z[n as usize] += 1;
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    z
}

// 3. ideal counting
fn ideal_counting() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["GAUSSIAN", "REAL_QUADRATIC_5"] {
        let k = field(name);
        let table = ideal_counts(&k, 1_000_000).unwrap();
        let direct = direct_ideal_counts(name, 500);
        let sieve_ok = (1..=500).all(|n| table.z(n) == direct[n as usize]);
        let e4 = ideal_count_cumulative(&k, &table, 10_000).relative_error;
        let e6 = ideal_count_cumulative(&k, &table, 1_000_000).relative_error;
        ok &= sieve_ok && e4 <= 0.05 && e6 <= 0.02;
        parts.push(format!("{name}: sieve=direct up to 500: {sieve_ok}, rel err {e4:.2e} @1e4, {e6:.2e} @1e6"));
    }
    judged(ok, parts.join("; "))
}

// 4. truncated zeta at s = 1
fn truncated_zeta_checks() -> Outcome {
    let gaussian = field("GAUSSIAN");
    let small = ideal_counts(&gaussian, 10).unwrap();
    let z10 = truncated_zeta(&small, 1.0, 10).unwrap().value;
    // hand oracle: z(n) for n = 1..10 is 1,1,0,1,2,0,0,1,1,2
    let hand = 1.0 + 0.5 + 0.25 + 0.4 + 0.125 + 1.0 / 9.0 + 0.2;
    let mut ok = (z10 - 2.5861).abs() <= 5e-5 && (z10 - hand).abs() < 1e-12;
    let mut parts = vec![format!("zeta_Q(i)(1,10) = {z10:.6}")];
    let radii = [100, 1_000, 10_000, 100_000, 1_000_000];
    for name in ["GAUSSIAN", "REAL_QUADRATIC_5"] {
        let k = field(name);
        let table = ideal_counts(&k, 1_000_000).unwrap();
        let slope = zeta_log_slope(&table, &radii).unwrap();
        let target = residue_times_class_number(&k);
        let rel = (slope - target).abs() / target;
        let maxes = s_term_running_max(&k, &table, &[10_000, 100_000, 1_000_000]).unwrap();
        let growth = (maxes[2] - maxes[0]) / maxes[0].abs();
        ok &= rel <= 0.05 && growth < 0.01;
        parts.push(format!("{name}: slope {slope:.5} vs h alpha {target:.5} ({:.2}%), S-term max growth {:.3}%", 100.0 * rel, 100.0 * growth));
    }
    judged(ok, parts.join("; "))
}

// 5. orthogonality of the two halves
fn orthogonality() -> Outcome {
    let a = algebra_lookup("HAMILTON_SQRT5").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let x: Vec<i64> = (0..4).map(|_| rng.gen_range(-10..=10)).collect();
        let y: Vec<i64> = (0..4).map(|_| rng.gen_range(-10..=10)).collect();
        let o = orthogonality_check(&a, &x, &y).unwrap();
        if o.rhs > 0.0 {
            worst = worst.max(o.defect / o.rhs);
        }
    }
    judged(worst <= 1e-12, format!("max relative defect {worst:.3e} over 1000 pairs"))
}

// 6. principal ideal index against |det psi(x)|^2
fn index_identity() -> Outcome {
    let a = algebra_lookup("HAMILTON_SQRT5").unwrap();
    let x = AlgebraElement::one(&a).add(&AlgebraElement::u(&a)).unwrap();
    let worked = principal_ideal_index(&x).unwrap();
    let mut ok = worked.abs_det == BigInt::from(4) && worked.index == BigInt::from(16);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut checked = 0;
    while checked < 1000 {
        let c: Vec<i64> = (0..8).map(|_| rng.gen_range(-3..=3)).collect();
        if c.iter().all(|&v| v == 0) {
            continue;
        }
        let e = AlgebraElement::from_order_coords(&a, &c).unwrap();
        let idx = principal_ideal_index(&e).unwrap();
        // independent side: numeric determinant of the multiblock matrix
        let det = e.psi().determinant().norm();
        ok &= BigInt::from((det * det).round() as i128) == idx.index;
        checked += 1;
    }
    judged(ok, format!("x = 1+u -> (|det| {}, index {}); {checked} random elements agree", worked.abs_det, worked.index))
}

// 7. minimum determinant of the k=2 order code
fn min_determinant() -> Outcome {
    let a = algebra_lookup("HAMILTON_SQRT5").unwrap();
    let l = order_lattice(&a).unwrap();
    let parts = l
        .fold_ball(12.0, DEFAULT_BUDGET, || (f64::INFINITY, 0u64), |(min, n), p| {
            *min = min.min(p.abs_det);
            *n += 1;
            Ok(())
        })
        .unwrap();
    let min = parts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let count: u64 = parts.iter().map(|p| p.1).sum();
    let one = l.make_point(vec![1, 0, 0, 0, 0, 0, 0, 0]).unwrap();
    let at_one = one.abs_det == 1.0 && one.frobenius_norm <= 12.0;
    judged(
        (min - 1.0).abs() <= 1e-9 && at_one,
        format!("{count} points, min |det| = {min}, |det psi(1)| = {} at norm {:.4}", one.abs_det, one.frobenius_norm),
    )
}

fn normalized_curve(label: &str, lattice: &MatrixLattice, radii: &[f64], m: f64) -> SumCurve {
    let sums = normalized_truncated_sums(lattice, radii, m, DEFAULT_ORBIT_WORK, DEFAULT_BUDGET).unwrap();
    for s in &sums {
        // the certified tail is negligible next to the fitted trend
        assert!(s.tail_bound <= 1e-4 * s.value, "{label}: tail {} vs value {}", s.tail_bound, s.value);
    }
    truncated_curve(label, &sums, true)
}

// 8. growth comparison at n = 2
fn comparison_n2() -> Outcome {
    let radii = exp_radii(3.0, 8.0, 1.0);
    let qo = normalized_curve("ALAMOUTI", &order_lattice(&algebra_lookup("ALAMOUTI").unwrap()).unwrap(), &radii, 4.0);
    let nf = normalized_curve("CYCLOTOMIC_5", &canonical_embedding_lattice(&field("CYCLOTOMIC_5")).unwrap(), &radii, 4.0);
    let cmp = compare_growth(&qo, &nf).unwrap();
    let (Some(qf), Some(nff)) = (&cmp.qo_fit, &cmp.nf_fit) else {
        return judged(false, "fit failed".into());
    };
    let ok = (-0.2..=0.3).contains(&qf.exponent) && (0.6..=1.4).contains(&nff.exponent) && cmp.ratio_increasing;
    judged(
        ok,
        format!(
            "qo exponent {:.4}, nf exponent {:.4}, ratios {:?}",
            qf.exponent,
            nff.exponent,
            cmp.ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()
        ),
    )
}

// 9. growth comparison at n = 4
fn comparison_n4() -> Outcome {
    let k = field("CYCLOTOMIC_20");
    let l = canonical_embedding_lattice(&k).unwrap();
    let radius = 3f64.exp() * l.normalization_factor(8.0).radius_factor;
    let predicted = l.predicted_count(radius);
    let span = fit_log_power(&{
        let mut c = SumCurve::new("grid", 8.0, true);
        for r in exp_radii(3.0, 4.5, 0.5) {
            c.push(r, 1.0, 0);
        }
        c
    });
    Outcome {
        verdict: Verdict::Skipped,
        detail: format!(
            "Q(zeta_20) ball at the smallest radius alone predicts {predicted:.2e} points (budget {DEFAULT_BUDGET}); \
             the grid t in {{3..4.5}} also fails the fit precondition: {}",
            span.err().map(|e| e.to_string()).unwrap_or_default()
        ),
    }
}

// 10. finite-radius sandwich
fn sandwich() -> Outcome {
    let slack = SlackRule::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, m) in [("REAL_QUADRATIC_5", 2.0), ("GAUSSIAN", 4.0)] {
        let k = field(name);
        let radii = exp_radii(4.0, 10.0, 1.0);
        let r = field_bound_report(&k, m, &radii, slack, DEFAULT_ORBIT_WORK, DEFAULT_BUDGET).unwrap();
        ok &= r.asymptotic_pass();
        let first = &r.rows[0];
        let last = r.rows.last().unwrap();
        parts.push(format!(
            "{name} m={m} {}: ratio to lower {:.3}..{:.3}, to upper {:.3}..{:.3}, all rows pass: {}",
            r.proposition,
            first.measured / first.lower_term,
            last.measured / last.lower_term,
            first.measured / first.upper_term.unwrap(),
            last.measured / last.upper_term.unwrap(),
            r.asymptotic_pass()
        ));
    }
    judged(ok, parts.join("; "))
}

// runs without the libtest harness so the criterion lines are never captured
fn main() {
    let secs = Duration::from_secs;
    let results = [
        run(1, secs(1), small_ball_sums),
        run(2, secs(5), unit_counts),
        run(3, secs(30), ideal_counting),
        run(4, secs(60), truncated_zeta_checks),
        run(5, secs(1), orthogonality),
        run(6, secs(10), index_identity),
        run(7, secs(120), min_determinant),
        run(8, secs(300), comparison_n2),
        run(9, secs(1800), comparison_n4),
        run(10, secs(120), sandwich),
    ];
    let count = |v: Verdict| results.iter().filter(|&&r| r == v).count();
    let failed = count(Verdict::Fail);
    println!("acceptance: {} passed, {} skipped, {failed} failed", count(Verdict::Pass), count(Verdict::Skipped));
    if failed > 0 {
        std::process::exit(1);
    }
}
