//! Numerical building blocks: log-gamma helpers, a log-space binomial
//! survival function, and adaptive Gauss–Kronrod quadrature.

pub use statrs::function::gamma::ln_gamma;

/// `ln C(n, k)`. Small `min(k, n - k)` uses an exact running product,
/// larger ones log-gamma.
pub fn ln_choose(n: f64, k: f64) -> f64 {
    let m = k.min(n - k);
    if m < 0.0 {
        return f64::NEG_INFINITY;
    }
    if m <= 30.0 && m.fract() == 0.0 && n < 1e15 {
        let base = n - m;
        let c = (1..=m as u64).fold(1.0, |acc, i| acc * (base + i as f64) / i as f64);
        return c.ln();
    }
    -(n + 1.0).ln() - ln_beta(k + 1.0, n - k + 1.0)
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln Gamma(x) - [(x - 1/2) ln x - x + ln sqrt(2 pi)]` for `x >= 10`.
fn stirling_correction(x: f64) -> f64 {
    const C: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
    ];
    let r = 1.0 / (x * x);
    C.iter().rev().fold(0.0, |acc, &c| acc * r + c) / x
}

/// `ln B(a, b)`. For large arguments the log-gamma terms are combined
/// analytically so their leading parts cancel exactly.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    let (p, q) = if a < b { (a, b) } else { (b, a) };
    let s = p + q;
    if p >= 10.0 {
        let corr = stirling_correction(p) + stirling_correction(q) - stirling_correction(s);
        -0.5 * q.ln() + LN_SQRT_2PI + corr + (p - 0.5) * (p / s).ln() + q * (-p / s).ln_1p()
    } else if q >= 10.0 {
        let corr = stirling_correction(q) - stirling_correction(s);
        ln_gamma(p) + corr + p - p * s.ln() + (q - 0.5) * (-p / s).ln_1p()
    } else {
        ln_gamma(p) + ln_gamma(q) - ln_gamma(s)
    }
}

/// `ln(1 - exp(x))` for `x <= 0`.
pub fn ln_1m_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `ln(exp(a) + exp(b))`.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `x ln y` with the convention `0 ln 0 = 0`.
fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Continued fraction for the incomplete beta function (modified Lentz).
/// Returns `None` if it does not converge within the iteration budget.
fn beta_cf(a: f64, b: f64, x: f64) -> Option<f64> {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let max_iter = 10_000 + (20.0 * a.max(b).sqrt()) as usize;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=max_iter {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Some(h);
        }
    }
    None
}

/// `ln I_x(a, b)`, the log of the regularized incomplete beta function.
/// The prefactor `x^a (1-x)^b / (a B(a,b))` is kept in log space so tiny
/// tails do not underflow. `None` signals non-convergence.
pub fn ln_beta_reg(a: f64, b: f64, x: f64) -> Option<f64> {
    debug_assert!(a > 0.0 && b > 0.0);
    if x <= 0.0 {
        return Some(f64::NEG_INFINITY);
    }
    if x >= 1.0 {
        return Some(0.0);
    }
    let ln_front = |a: f64, b: f64, x: f64| a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b) - a.ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        let cf = beta_cf(a, b, x)?;
        Some(ln_front(a, b, x) + cf.ln())
    } else {
        let cf = beta_cf(b, a, 1.0 - x)?;
        let ln_comp = ln_front(b, a, 1.0 - x) + cf.ln();
        Some(ln_1m_exp(ln_comp.min(0.0)))
    }
}

/// `ln P(X > l)` for `X ~ Binomial(n, c)`, by direct log-space summation of
/// probability masses. Summation runs away from the bulk of the
/// distribution so every partial sum is dominated by its first term.
pub fn ln_binom_sf_sum(l: u64, n: u64, c: f64) -> f64 {
    if l >= n || c <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if c >= 1.0 {
        return 0.0;
    }
    let (nf, lc, l1c) = (n as f64, c.ln(), (-c).ln_1p());
    let ln_pmf = |k: u64| ln_choose(nf, k as f64) + xlny(k as f64, c) + (nf - k as f64) * l1c;
    let odds = lc - l1c;
    let start = l + 1;
    if start as f64 >= nf * c {
        // Upper tail, masses non-increasing from `start`.
        let mut term = ln_pmf(start);
        let mut total = term;
        let mut k = start;
        while k < n {
            term += ((nf - k as f64) / (k as f64 + 1.0)).ln() + odds;
            k += 1;
            total = ln_add_exp(total, term);
            if term < total - 40.0 {
                break;
            }
        }
        total
    } else {
        // Lower tail P(X <= l), masses non-increasing going down from `l`.
        let mut term = ln_pmf(l);
        let mut total = term;
        let mut k = l;
        while k > 0 {
            term += (k as f64 / (nf - k as f64 + 1.0)).ln() - odds;
            k -= 1;
            total = ln_add_exp(total, term);
            if term < total - 40.0 {
                break;
            }
        }
        ln_1m_exp(total.min(0.0))
    }
}

/// `ln P(X > l)` for `X ~ Binomial(n, c)` via `P(X > l) = I_c(l + 1, n - l)`,
/// falling back to [`ln_binom_sf_sum`] when the continued fraction fails.
pub fn ln_binom_sf(l: u64, n: u64, c: f64) -> f64 {
    if l >= n || c <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if c >= 1.0 {
        return 0.0;
    }
    match ln_beta_reg(l as f64 + 1.0, (n - l) as f64, c) {
        Some(v) if v.is_finite() => v.min(0.0),
        _ => ln_binom_sf_sum(l, n, c),
    }
}

// Gauss–Kronrod 7/15 abscissae and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss–Kronrod quadrature of `f` over `[a, b]`, split first at
/// the given interior break points. Subintervals are bisected until each
/// error estimate is below `max(abs_tol, rel_tol * |total|)` weighted by
/// the subinterval's share of the range.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], abs_tol: f64, rel_tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut points: Vec<f64> = std::iter::once(a)
        .chain(breaks.iter().copied().filter(|&x| x > a && x < b))
        .chain(std::iter::once(b))
        .collect();
    points.sort_by(|x, y| x.partial_cmp(y).unwrap());
    points.dedup();

    let width = b - a;
    let mut stack: Vec<(f64, f64, f64, f64, u32)> = points
        .windows(2)
        .map(|w| {
            let (v, e) = gk15(&f, w[0], w[1]);
            (w[0], w[1], v, e, 0)
        })
        .collect();
    let rough: f64 = stack.iter().map(|s| s.2).sum();
    let mut total = 0.0;
    let mut evals = 0usize;
    while let Some((lo, hi, v, e, depth)) = stack.pop() {
        let tol = abs_tol.max(rel_tol * rough.abs()) * ((hi - lo) / width).max(1e-3);
        if e <= tol || depth >= 60 || evals > 200_000 {
            total += v;
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        evals += 2;
        stack.push((lo, mid, v1, e1, depth + 1));
        stack.push((mid, hi, v2, e2, depth + 1));
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact_sf(l: u64, n: u64, c: f64) -> f64 {
        // Straight summation in f64 for small n.
        (l + 1..=n)
            .map(|k| ln_choose(n as f64, k as f64).exp() * c.powi(k as i32) * (1.0 - c).powi((n - k) as i32))
            .sum()
    }

    #[test]
    fn survival_matches_direct_sum_small_n() {
        for n in 1..40u64 {
            for l in 0..n {
                for &c in &[0.01, 0.04, 0.3, 0.5, 0.9] {
                    let want = exact_sf(l, n, c);
                    if want < 1e-250 {
                        continue;
                    }
                    let a = ln_binom_sf(l, n, c).exp();
                    let b = ln_binom_sf_sum(l, n, c).exp();
                    assert!((a - want).abs() <= 1e-12 * want.max(1e-300) + 1e-300, "cf n={n} l={l} c={c}: {a} vs {want}");
                    assert!((b - want).abs() <= 1e-12 * want, "sum n={n} l={l} c={c}: {b} vs {want}");
                }
            }
        }
    }

    #[test]
    fn survival_agrees_for_large_n() {
        for &(l, n, c) in &[
            (400u64, 10_001u64, 0.045),
            (450, 10_001, 0.045),
            (480, 10_001, 0.045),
            (10, 1_000_001, 0.04),
            (40_000, 1_000_001, 0.04),
            (41_500, 1_000_001, 0.04),
        ] {
            let a = ln_binom_sf(l, n, c);
            let b = ln_binom_sf_sum(l, n, c);
            assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "l={l} n={n}: {a} vs {b}");
        }
    }

    #[test]
    fn ln_beta_accuracy() {
        // B(1, n) = 1/n and B(k+1, n-k+1) = 1/((n+1) C(n, k)).
        for n in [10.0f64, 40.0, 1e3, 1e6] {
            assert!((ln_beta(1.0, n) + n.ln()).abs() < 1e-14 * n.ln().max(1.0), "{n}");
        }
        let c = (1..=20u64).fold(1.0, |acc, i| acc * (80 + i) as f64 / i as f64);
        assert!((ln_beta(21.0, 81.0) + (101.0 * c).ln()).abs() < 1e-13);
        assert!((ln_choose(1000.0, 500.0) - 689.467_261_567_851_2).abs() < 1e-11);
    }

    #[test]
    fn survival_edges() {
        assert_eq!(ln_binom_sf(5, 5, 0.3), f64::NEG_INFINITY);
        assert_eq!(ln_binom_sf(0, 5, 1.0), 0.0);
        assert_eq!(ln_binom_sf(0, 5, 0.0), f64::NEG_INFINITY);
        // P(X > 0) = 1 - (1-c)^n
        let v = ln_binom_sf(0, 40, 0.04).exp();
        let want = 1.0 - 0.96f64.powi(40);
        assert!((v - want).abs() < 1e-13, "{v} vs {want}");
    }

    #[test]
    fn quadrature_basics() {
        let v = integrate(|x| x * x, 0.0, 1.0, &[], 1e-14, 1e-14);
        assert!((v - 1.0 / 3.0).abs() < 1e-14);
        let v = integrate(|x: f64| x.sqrt().recip(), 0.0, 1.0, &[], 1e-12, 1e-12);
        assert!((v - 2.0).abs() < 1e-8, "{v}");
        // Narrow peak found through a break point.
        let breaks: Vec<f64> = [-16.0, -4.0, -1.0, 0.0, 1.0, 4.0, 16.0].iter().map(|k| 0.3 + k * 1e-4).collect();
        let v = integrate(|x: f64| (-(x - 0.3).powi(2) / 2e-8).exp(), 0.0, 1.0, &breaks, 1e-16, 1e-12);
        let want = (2.0 * std::f64::consts::PI * 1e-8).sqrt();
        assert!((v - want).abs() < 1e-10 * want.max(1.0), "{v} vs {want}");
    }
}
