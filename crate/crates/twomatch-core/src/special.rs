//! Pure numeric kernel: truncated exponential tails, the phi ratio
//! functions and their derivatives, the A/B/C/D drift multipliers, the
//! epsilon ladder, and the derived constants report.

use crate::error::{Error, Result};

/// Truncated exponential tail `f_k(x) = e^x - sum_{i<k} x^i/i!` for k in 0..=3.
///
/// For small `x` the subtraction of nearly equal quantities destroys the
/// result (f_3(0.01) is ~1.7e-7 against e^0.01 ~ 1.01), so below 1 the tail
/// is summed directly as `sum_{i>=k} x^i/i!`.
pub fn f(k: u32, x: f64) -> f64 {
    debug_assert!(k <= 3, "f_k only needed for k <= 3");
    debug_assert!(x >= 0.0, "f_k domain is x >= 0");
    if x < 1.0 {
        let mut term = 1.0;
        for i in 1..=k as u64 {
            term *= x / i as f64;
        }
        let mut sum = term;
        let mut i = k as u64;
        while term > 0.0 {
            i += 1;
            term *= x / i as f64;
            let next = sum + term;
            if next == sum {
                break;
            }
            sum = next;
        }
        return sum;
    }
    let mut head = 0.0;
    let mut t = 1.0;
    for i in 0..k as u64 {
        head += t;
        t *= x / (i + 1) as f64;
    }
    x.exp() - head
}

/// `phi_j(x) = x f_{j-1}(x) / f_j(x)` for j in {2, 3}, extended by its
/// limit value `j` at x = 0. Increasing and convex, bounded below by j.
pub fn phi(j: u32, x: f64) -> f64 {
    debug_assert!(j == 2 || j == 3);
    if x <= 0.0 {
        return f64::from(j);
    }
    x * f(j - 1, x) / f(j, x)
}

fn series(coeff: impl Fn(u64) -> f64, x: f64, j0: u64) -> f64 {
    // sum_{j>=j0} coeff(j) x^j / j!
    let mut pow = 1.0;
    for i in 1..=j0 {
        pow *= x / i as f64;
    }
    let mut sum = 0.0;
    let mut j = j0;
    loop {
        let next = sum + coeff(j) * pow;
        if next == sum && j > j0 + 4 {
            return sum;
        }
        sum = next;
        j += 1;
        pow *= x / j as f64;
        if j > j0 + 400 {
            return sum;
        }
    }
}

/// Closed-form derivative of `phi_j`. Near 0 the closed numerators cancel
/// catastrophically and are replaced by their power series.
pub fn phi_prime(j: u32, x: f64) -> f64 {
    debug_assert!(j == 2 || j == 3);
    if x <= 0.0 {
        return 1.0 / f64::from(j + 1);
    }
    match j {
        2 => {
            let num = if x < 1.0 {
                series(|j| 2.0f64.powi(j as i32) - (j * (j - 1)) as f64 - 2.0, x, 4)
            } else {
                (2.0 * x).exp() - (x * x + 2.0) * x.exp() + 1.0
            };
            let d = f(2, x);
            num / (d * d)
        }
        _ => {
            let num = if x < 1.0 {
                series(
                    |j| {
                        2.0 * 2.0f64.powi(j as i32) - (j * (j - 1) * (j - 2)) as f64
                            + (j * (j - 1)) as f64
                            - 4.0 * j as f64
                            - 4.0
                    },
                    x,
                    6,
                )
            } else {
                2.0 * (2.0 * x).exp() - x.exp() * (x * x * x - x * x + 4.0 * x + 4.0)
                    + x * x
                    + 4.0 * x
                    + 2.0
            };
            let d = f(3, x);
            num / (2.0 * d * d)
        }
    }
}

/// The four drift multipliers at a state (y, z, mu) with parameter lambda.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Multipliers {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Multipliers {
    pub fn q(&self) -> f64 {
        q_value(self.a, self.b)
    }
}

/// A = yz l^5 f0 / (8 mu^2 f2 f3), B = z^2 l^4 f0 / (4 mu^2 f2^2),
/// C = y l f2 / (2 mu f3), D = z l^2 f0 / (2 mu f2).
pub fn abcd(y: f64, z: f64, mu: f64, lambda: f64) -> Result<Multipliers> {
    debug_assert!(mu > 0.0 && y + z > 0.0);
    let (f0, f2, f3) = (f(0, lambda), f(2, lambda), f(3, lambda));
    let l2 = lambda * lambda;
    let l4 = l2 * l2;
    let m = Multipliers {
        a: y * z * l4 * lambda * f0 / (8.0 * mu * mu * f2 * f3),
        b: z * z * l4 * f0 / (4.0 * mu * mu * f2 * f2),
        c: y * lambda * f2 / (2.0 * mu * f3),
        d: z * l2 * f0 / (2.0 * mu * f2),
    };
    if [m.a, m.b, m.c, m.d].iter().all(|v| v.is_finite()) {
        Ok(m)
    } else {
        Err(Error::NoConvergence { residual: f64::NAN, iterations: 0 })
    }
}

/// Q = 2A + B; the drift of y1 + 2y2 + z1 is -(1-Q) per forced move, and
/// Q < 1 whenever lambda > 0.
pub fn q_value(a: f64, b: f64) -> f64 {
    2.0 * a + b
}

/// The ray x = y/z maximizing Q at fixed lambda (subject to the degree
/// equation): xbar = f3 (l f1 - 2 f2) / (l f2^2).
pub fn worst_ray(lambda: f64) -> f64 {
    let (f1, f2, f3) = (f(1, lambda), f(2, lambda), f(3, lambda));
    f3 * (lambda * f1 - 2.0 * f2) / (lambda * f2 * f2)
}

/// Q evaluated on the worst ray, with mu fixed by the degree equation.
pub fn q_at_worst_ray(lambda: f64) -> Result<f64> {
    let x = worst_ray(lambda);
    let (y, z) = (x, 1.0);
    let mu = 0.5 * (y * phi(3, lambda) + z * phi(2, lambda));
    Ok(abcd(y, z, mu, lambda)?.q())
}

/// Closed form for the same maximum: F(xbar, l) = l^4 f0 / (4 f2 (l f1 - f2)).
/// An independent algebraic route used to cross-check `q_at_worst_ray`.
pub fn q_max_closed(lambda: f64) -> f64 {
    let (f0, f1, f2) = (f(0, lambda), f(1, lambda), f(2, lambda));
    let l2 = lambda * lambda;
    l2 * l2 * f0 / (4.0 * f2 * (lambda * f1 - f2))
}

// The epsilon ladder. Note the shifted constants in t2/t3 (t2 subtracts
// 2 + x, t3 subtracts 3 + 2x + x^2/2): the golden constants this crate
// reproduces are defined against this exact chain, and t3 > 0 needs
// x > 2.16, so the ladder is meaningful for x >= 3 or so.
fn t2(x: f64) -> f64 {
    x.exp() - 2.0 - x
}
fn t3(x: f64) -> f64 {
    x.exp() - 3.0 - 2.0 * x - 0.5 * x * x
}

/// The eleven epsilon functions quantifying how far the drift multipliers
/// sit from their large-lambda limits.
pub fn epsilon(p: u32, x: f64) -> f64 {
    let f0 = x.exp();
    let e1 = (t2(x) / t3(x)) - 1.0;
    let e2 = (f0 / t2(x)) - 1.0;
    let e3 = (f0 / t3(x)) - 1.0;
    let e4 = e1 / (1.0 + e1);
    let e5 = (1.0 + e2) * (1.0 + e3) * x * x * x / (8.0 * f0);
    let e6 = x * x * (1.0 + e2) * (1.0 + e2) / f0;
    match p {
        1 => e1,
        2 => e2,
        3 => e3,
        4 => e4,
        5 => e5,
        6 => e6,
        7 => (e4 + e5 + e6) / (1.0 - e5),
        8 => (e1 + e5) / (1.0 - e5),
        9 => x * e4,
        10 => 2.0 * x * e4 / (1.0 - e4),
        11 => (x * (e2 + e5) + e5) / ((1.0 - e4) * (1.0 - e5)),
        _ => panic!("epsilon index {p} out of range 1..=11"),
    }
}

/// delta_bar(x) = max(eps_1..eps_8).
pub fn delta_bar(x: f64) -> f64 {
    (1..=8).map(|p| epsilon(p, x)).fold(f64::MIN, f64::max)
}

/// Adaptive Simpson quadrature with an absolute tolerance.
pub fn adaptive_simpson(g: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn simpson(g: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64) {
        let m = 0.5 * (a + b);
        let fm = g(m);
        (fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    fn recurse(
        g: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let (flm, left) = simpson(g, a, fa, m, fm);
        let (frm, right) = simpson(g, m, fm, b, fb);
        let err = left + right - whole;
        if err.abs() <= 15.0 * tol {
            return Ok(left + right + err / 15.0);
        }
        if depth == 0 {
            return Err(Error::QuadratureFailure { tol, estimate: left + right });
        }
        Ok(recurse(g, a, fa, m, fm, left, flm, 0.5 * tol, depth - 1)?
            + recurse(g, m, fm, b, fb, right, frm, 0.5 * tol, depth - 1)?)
    }
    let (fa, fb) = (g(a), g(b));
    let (fm, whole) = simpson(g, a, fa, b, fb);
    recurse(g, a, fa, b, fb, whole, fm, tol, 48)
}

/// Which coefficient the third term of alpha_3 carries. The constants
/// table uses c + 1; the inline derivation uses 2c + 1. The difference is
/// far below every stated tolerance; `CPlusOne` is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Alpha3Coeff {
    #[default]
    CPlusOne,
    TwoCPlusOne,
}

/// Derived constants for a given c and epsilon-ladder evaluation point.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ConstantsReport {
    pub t_tilde_frac: f64,
    pub beta: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
    pub alpha5: f64,
    pub a1: f64,
    pub a2: f64,
    pub c1_value: f64,
    pub lambda_star: f64,
    pub delta_at: f64,
}

/// Fraction of steps at which the approximate trajectory's y-component
/// crosses zero: 1 - 2^{-1/2} e^{-pi/4}.
pub fn t_tilde_frac() -> f64 {
    1.0 - std::f64::consts::FRAC_1_SQRT_2 * (-std::f64::consts::FRAC_PI_4).exp()
}

/// Prefactor of the linear-in-c closed form, evaluated at argument `u`:
/// (1 + u) e^{-arctan u} / sqrt(1 + u^2).
pub(crate) fn arctan_prefactor(u: f64) -> f64 {
    (1.0 + u) * (-u.atan()).exp() / (1.0 + u * u).sqrt()
}

/// Integrand of the offset term: 2 e^{arctan x} / ((1+x) sqrt(1+x^2)).
pub(crate) fn arctan_integrand(x: f64) -> f64 {
    2.0 * x.atan().exp() / ((1.0 + x) * (1.0 + x * x).sqrt())
}

pub fn constants(c: f64, lambda_eval: f64) -> Result<ConstantsReport> {
    constants_with(c, lambda_eval, Alpha3Coeff::default())
}

pub fn constants_with(c: f64, lambda_eval: f64, v: Alpha3Coeff) -> Result<ConstantsReport> {
    assert!(c >= 2.0, "constants need c >= 2");
    let t = t_tilde_frac();
    let beta = -0.01 + 2.0 * (1.0 - t);
    let alpha0 = beta * ((2.0 * t / beta).exp() - 1.0);
    // a1, a2 carry the constants-table convention: the prefactor is taken
    // at T~/n rather than at the crossing value X = 1 of the ratio variable.
    let pref = arctan_prefactor(t);
    let a1 = 2.0 * pref;
    let integral = adaptive_simpson(&arctan_integrand, 0.0, 1.0, 1e-9)?;
    let a2 = pref * integral;
    let d = delta_bar(lambda_eval);
    let third = match v {
        Alpha3Coeff::CPlusOne => c + 1.0,
        Alpha3Coeff::TwoCPlusOne => 2.0 * c + 1.0,
    };
    let alpha3 = 10.0 * alpha0 * c / (beta * beta)
        + 8.0 * alpha0 * alpha0 * c * d / (beta * beta * beta)
        + third * d / (beta * (1.0 - d) * (1.0 - d));
    let alpha4 = alpha0 * alpha3 / 2.0;
    let alpha5 = 2.0 * c / beta + 2.0 * alpha4 / beta + 4.0 * c * alpha0 / (beta * beta);
    Ok(ConstantsReport {
        t_tilde_frac: t,
        beta,
        alpha0,
        alpha1: a1,
        alpha2: a2,
        alpha3,
        alpha4,
        alpha5,
        a1,
        a2,
        c1_value: a1 * c - a2 - alpha5 * d,
        lambda_star: a1 * c - a2 - 5.0,
        delta_at: d,
    })
}

/// Envelope F_a(x) = beta (e^{2ax/beta} - 1), valid for x <= T~/n.
pub fn envelope_f(a: f64, x: f64, beta: f64) -> f64 {
    beta * ((2.0 * a * x / beta).exp() - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tails_at_zero_and_one() {
        assert_eq!(f(0, 0.0), 1.0);
        assert_eq!(f(3, 0.0), 0.0);
        assert!((f(2, 1.0) - (std::f64::consts::E - 2.0)).abs() < 1e-15);
    }

    #[test]
    fn tail_recurrence_identity() {
        // f_k = f_{k-1} - x^{k-1}/(k-1)!
        for k in 1..=3u32 {
            let fact: f64 = (1..k as u64).map(|i| i as f64).product();
            for i in 0..200 {
                let x = 0.01 + 0.25 * i as f64;
                let lhs = f(k, x);
                let rhs = f(k - 1, x) - x.powi(k as i32 - 1) / fact;
                assert!(
                    (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1e-300),
                    "k={k} x={x}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn small_x_series_avoids_cancellation() {
        // direct subtraction at x = 0.01 would leave ~8 good digits; the
        // series value is good to full precision against 10*eps of itself
        let x = 0.01f64;
        let exact = x.powi(3) / 6.0
            * (1.0 + x / 4.0 + x * x / 20.0 + x.powi(3) / 120.0 + x.powi(4) / 840.0
                + x.powi(5) / 6720.0);
        assert!((f(3, x) - exact).abs() < 1e-13 * exact);
    }

    #[test]
    fn phi_limits_and_large_argument() {
        assert_eq!(phi(2, 0.0), 2.0);
        assert_eq!(phi(3, 0.0), 3.0);
        let p = phi(3, 30.0);
        // the ratio f_2/f_3 exceeds 1 by ~4.2e-11 at 30, so phi_3(30) sits
        // a hair above 30
        assert!(p > 30.0 && p < 30.0 + 1e-8, "phi_3(30) = {p}");
        // continuity of the limit
        assert!((phi(2, 1e-9) - 2.0).abs() < 1e-8);
        assert!((phi(3, 1e-9) - 3.0).abs() < 1e-8);
    }

    #[test]
    fn phi_monotone_convex_with_derivative_bounds() {
        for j in [2u32, 3] {
            let mut prev_d = phi_prime(j, 1e-6);
            for i in 1..=500 {
                let x = 0.1 * i as f64;
                let d = phi_prime(j, x);
                // 1/(j+1) <= phi' <= 1 and increasing derivative (convex)
                assert!(d >= 1.0 / (j as f64 + 1.0) - 1e-9, "j={j} x={x} d={d}");
                assert!(d <= 1.0 + 1e-9);
                assert!(d + 1e-9 >= prev_d, "convexity fails at j={j} x={x}");
                prev_d = d;
                // central difference agrees with the closed form
                let h = 1e-5;
                let fd = (phi(j, x + h) - phi(j, x - h)) / (2.0 * h);
                assert!((fd - d).abs() < 1e-4, "j={j} x={x}: fd {fd} vs {d}");
            }
        }
    }

    #[test]
    fn multipliers_zero_factors() {
        let m = abcd(5.0, 0.0, 7.0, 2.0).unwrap();
        assert_eq!((m.a, m.b, m.d), (0.0, 0.0, 0.0));
        let m = abcd(0.0, 5.0, 7.0, 2.0).unwrap();
        assert_eq!((m.a, m.c), (0.0, 0.0));
    }

    #[test]
    fn multipliers_cross_check_log_space() {
        // independent re-evaluation through logs on a solved state
        let (y, z) = (0.5, 0.5);
        let lambda = crate::degree::solve_lambda(y, z, 2.0 * 15.0, None).unwrap();
        let mu = 15.0;
        let m = abcd(y, z, mu, lambda).unwrap();
        let lf = |k: u32| f(k, lambda).ln();
        let a = ((y * z).ln() + 5.0 * lambda.ln() + lambda - lf(2) - lf(3)
            - (8.0 * mu * mu).ln())
        .exp();
        let b = ((z * z).ln() + 4.0 * lambda.ln() + lambda - 2.0 * lf(2)
            - (4.0 * mu * mu).ln())
        .exp();
        assert!((m.a - a).abs() < 1e-12 * a.max(1e-300));
        assert!((m.b - b).abs() < 1e-12 * b.max(1e-300));
        assert!(m.a > 0.0 && m.b > 0.0 && m.c > 0.0 && m.d > 0.0);
        assert!(m.a.is_finite() && m.b.is_finite() && m.c.is_finite() && m.d.is_finite());
    }

    #[test]
    fn q_trivial_and_worst_ray_below_one() {
        assert_eq!(q_value(0.0, 0.0), 0.0);
        for lam in [0.1, 1.0, 5.0, 20.0] {
            let q = q_at_worst_ray(lam).unwrap();
            let closed = q_max_closed(lam);
            assert!((q - closed).abs() < 1e-10 * closed.max(1e-12), "lam={lam}");
            assert!(q < 1.0, "lam={lam} q={q}");
        }
    }

    #[test]
    fn q_small_lambda_limit_scaling() {
        // 1 - Q = Theta(lambda^2) with constant near 1/18 as lambda -> 0
        for i in 1..=10 {
            let lam = 0.01 + 0.009 * i as f64;
            let q = q_at_worst_ray(lam).unwrap();
            let ratio = (1.0 - q) / (lam * lam);
            assert!((0.05..0.06).contains(&ratio), "lam={lam} ratio={ratio}");
        }
    }

    #[test]
    fn epsilon_golden_and_decay() {
        assert!((delta_bar(16.0) - 0.000102752).abs() < 1e-8);
        for p in 1..=11 {
            assert!(epsilon(p, 40.0) < epsilon(p, 16.0), "eps_{p} not decaying");
        }
        for i in 0..40 {
            let x = 4.0 + i as f64;
            let e1 = epsilon(1, x);
            let e4 = epsilon(4, x);
            assert!((e4 - e1 / (1.0 + e1)).abs() < 1e-15);
            assert!(e4 < e1);
        }
    }

    #[test]
    fn delta_bar_monotone_15_40() {
        let mut prev = delta_bar(15.0);
        for i in 1..=250 {
            let x = 15.0 + 0.1 * i as f64;
            let d = delta_bar(x);
            assert!(d < prev, "delta_bar not decreasing at {x}");
            prev = d;
        }
    }

    #[test]
    fn constants_golden() {
        let r = constants(15.0, 16.0).unwrap();
        assert!((r.t_tilde_frac - 0.677603).abs() < 1e-6);
        assert!((r.beta - 0.634794).abs() < 1e-5);
        assert!((r.alpha0 - 4.73302).abs() < 1e-4);
        assert!((r.a1 - 1.5312).abs() < 1e-3);
        assert!((r.a2 - 1.41846).abs() < 1e-4);
        assert!((r.c1_value - 20.1217).abs() < 1e-3);
        assert!((r.lambda_star - 16.5495).abs() < 1e-3);
        assert!(r.c1_value > r.lambda_star);
        assert!(r.t_tilde_frac > 0.0 && r.t_tilde_frac < 1.0);
        assert!(r.beta > 0.0 && r.beta < 1.0);
        for a in [r.alpha0, r.alpha1, r.alpha2, r.alpha3, r.alpha4, r.alpha5] {
            assert!(a > 0.0);
        }
        // the alternate alpha3 coefficient stays within the same tolerance
        let r2 = constants_with(15.0, 16.0, Alpha3Coeff::TwoCPlusOne).unwrap();
        assert!((r2.c1_value - 20.1217).abs() < 1e-3);
        assert!((r.c1_value - r2.c1_value).abs() < 1e-4);
    }

    #[test]
    fn simpson_exactness() {
        let v = adaptive_simpson(&|x: f64| x * x * x, 0.0, 2.0, 1e-12).unwrap();
        assert!((v - 4.0).abs() < 1e-10);
        let v = adaptive_simpson(&|x: f64| x.exp(), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - (std::f64::consts::E - 1.0)).abs() < 1e-10);
    }
}
