//! Deterministic counterparts of the greedy pass: the step-mixing weights,
//! the sliding trajectory and its Euler integration, the approximate
//! system with its closed forms, and the closeness comparison.
//!
//! All states are per-n normalized; one time unit is n algorithm steps.

use crate::degree::solve_lambda;
use crate::error::{Error, Result};
use crate::special::{
    abcd, adaptive_simpson, arctan_integrand, arctan_prefactor, constants, delta_bar, envelope_f,
    t_tilde_frac, Multipliers,
};

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SlideState {
    pub yhat: f64,
    pub zhat: f64,
    pub muhat: f64,
    pub lambdahat: f64,
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ApproxState {
    pub ytilde: f64,
    pub ztilde: f64,
    pub mutilde: f64,
    pub lambdatilde: f64,
}

/// Mixing weights for the four step kinds, chosen so the forced classes
/// stay at zero along the trajectory.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct Weights {
    pub theta_a: f64,
    pub theta_b: f64,
    pub theta_c: f64,
    pub theta_2: f64,
}

pub fn weights(a: f64, b: f64) -> Result<Weights> {
    let q = 2.0 * a + b;
    if q > 1.0 || a >= 1.0 {
        return Err(Error::InfeasibleWeights { q });
    }
    let theta_b = a / (1.0 - a);
    let theta_c = b / (1.0 - a);
    Ok(Weights { theta_a: 0.0, theta_b, theta_c, theta_2: 1.0 - theta_b - theta_c })
}

/// Right-hand side of the sliding trajectory at solved multipliers.
pub fn slide_rhs(m: &Multipliers) -> (f64, f64, f64) {
    let dy = (m.b - m.c) / (1.0 - m.a) - 1.0;
    let dz = (2.0 * m.c - 2.0 * m.a - 2.0 * m.b) / (1.0 - m.a);
    let dmu = -(1.0 + m.d) / (1.0 - m.a);
    (dy, dz, dmu)
}

fn solve_slide_lambda(y: f64, z: f64, mu: f64, warm: Option<f64>) -> Result<f64> {
    solve_lambda(y.max(0.0), z.max(0.0), 2.0 * mu, warm)
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    pub h: f64,
    pub y_floor: f64,
    /// keep one sample every `sample_every` steps (0: finals only)
    pub sample_every: usize,
    pub rk4: bool,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions { h: 1e-5, y_floor: 1e-5, sample_every: 0, rk4: false }
    }
}

#[derive(Debug, Clone)]
pub struct SlideRun {
    pub finals: SlideState,
    /// crossing time as a fraction of n
    pub t_final: f64,
    pub samples: Vec<(f64, SlideState, Multipliers)>,
    pub stopped_on_floor: bool,
}

/// Explicit Euler on the sliding trajectory from (1, 0, c), lambda
/// re-solved from the degree equation every step, stopping at the y-floor
/// (or on z < 0 / infeasible lambda, reported via `stopped_on_floor`).
pub fn euler_integrate(c: f64, opts: &IntegrateOptions) -> Result<SlideRun> {
    assert!(opts.h > 0.0 && opts.h <= 1e-3, "step length out of range");
    assert!(c >= 2.0, "density too small for the trajectory start");
    let (mut y, mut z, mut mu) = (1.0f64, 0.0f64, c);
    let mut lam = solve_slide_lambda(y, z, mu, Some(2.0 * c))?;
    let mut samples = Vec::new();
    let mut t = 0.0f64;
    let mut step = 0usize;
    let mut stopped_on_floor = false;
    loop {
        let m = abcd(y, z, mu, lam)?;
        if opts.sample_every > 0 && step % opts.sample_every == 0 {
            samples.push((t, SlideState { yhat: y, zhat: z, muhat: mu, lambdahat: lam }, m));
        }
        if opts.rk4 {
            let f = |s: (f64, f64, f64), warm: f64| -> Result<((f64, f64, f64), f64)> {
                let l = solve_slide_lambda(s.0, s.1, s.2, Some(warm))?;
                Ok((slide_rhs(&abcd(s.0.max(0.0), s.1, s.2, l)?), l))
            };
            let h = opts.h;
            let (k1, _) = f((y, z, mu), lam)?;
            let (k2, _) = f((y + 0.5 * h * k1.0, z + 0.5 * h * k1.1, mu + 0.5 * h * k1.2), lam)?;
            let (k3, _) = f((y + 0.5 * h * k2.0, z + 0.5 * h * k2.1, mu + 0.5 * h * k2.2), lam)?;
            let (k4, _) = f((y + h * k3.0, z + h * k3.1, mu + h * k3.2), lam)?;
            y += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            z += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            mu += h / 6.0 * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2);
        } else {
            let (dy, dz, dmu) = slide_rhs(&m);
            y += opts.h * dy;
            z += opts.h * dz;
            mu += opts.h * dmu;
        }
        t += opts.h;
        step += 1;
        if z < 0.0 {
            break;
        }
        match solve_slide_lambda(y, z, mu, Some(lam)) {
            Ok(l) => lam = l,
            Err(_) => break,
        }
        if y <= opts.y_floor {
            stopped_on_floor = true;
            break;
        }
    }
    let finals = SlideState { yhat: y, zhat: z, muhat: mu, lambdahat: lam };
    Ok(SlideRun { finals, t_final: t, samples, stopped_on_floor })
}

#[derive(Debug, Clone)]
pub struct ApproxRun {
    pub finals: ApproxState,
    pub t_final: f64,
    pub samples: Vec<(f64, ApproxState)>,
}

/// Euler on the approximate system from (1, 0, c, 2c); stops at the
/// y-crossing. The linear first integral y + z/2 + t = 1 is preserved
/// exactly by the update.
pub fn approx_integrate(c: f64, h: f64, sample_every: usize) -> ApproxRun {
    assert!(c >= 2.0);
    let (mut y, mut z, mut mu) = (1.0f64, 0.0f64, c);
    let mut t = 0.0f64;
    let mut samples = Vec::new();
    let mut step = 0usize;
    while y > 0.0 {
        if sample_every > 0 && step % sample_every == 0 {
            samples.push((
                t,
                ApproxState { ytilde: y, ztilde: z, mutilde: mu, lambdatilde: 2.0 * mu / (y + z) },
            ));
        }
        let s = y + z;
        let dy = -y / s - 1.0;
        let dz = 2.0 * y / s;
        let dmu = -1.0 - 2.0 * z * mu / (s * s);
        y += h * dy;
        z += h * dz;
        mu += h * dmu;
        t += h;
        step += 1;
    }
    let finals = ApproxState { ytilde: y, ztilde: z, mutilde: mu, lambdatilde: 2.0 * mu / (y + z) };
    ApproxRun { finals, t_final: t, samples }
}

/// Closed forms for the approximate system.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ApproxClosedForms {
    pub t_tilde_frac: f64,
    /// lambda at the crossing from the integral representation at X = 1
    pub lambda_at_crossing: f64,
    /// the same value split as coeff * c - offset
    pub crossing_coeff: f64,
    pub crossing_offset: f64,
    /// the constants-table linear form a1 * c - a2 (prefactor taken at
    /// T~/n); kept for comparison against the published constants
    pub table_linear_form: f64,
}

pub fn approx_closed_forms(c: f64) -> Result<ApproxClosedForms> {
    let integral = adaptive_simpson(&arctan_integrand, 0.0, 1.0, 1e-9)?;
    let p1 = arctan_prefactor(1.0);
    let r = constants(c.max(2.0), 16.0)?;
    Ok(ApproxClosedForms {
        t_tilde_frac: t_tilde_frac(),
        lambda_at_crossing: p1 * (2.0 * c - integral),
        crossing_coeff: 2.0 * p1,
        crossing_offset: p1 * integral,
        table_linear_form: r.a1 * c - r.a2,
    })
}

/// Solution of the lambda transport equation along the ratio variable
/// X = z / (2 (1 - t)); closed by quadrature for any X in [0, 1].
pub fn approx_lambda_of_ratio(c: f64, x: f64) -> Result<f64> {
    let integral = adaptive_simpson(&arctan_integrand, 0.0, x, 1e-9)?;
    Ok(arctan_prefactor(x) * (2.0 * c - integral))
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ClosenessReport {
    pub max_dev_y: f64,
    pub max_dev_z: f64,
    pub envelope_at_crossing: f64,
    pub delta: f64,
    pub lambda_floor: f64,
    pub lambdahat_at_crossing: f64,
    pub zhat_at_crossing: f64,
    pub within_envelope: bool,
    pub lambda_bound_holds: bool,
}

/// Integrates the sliding and approximate systems on a common grid and
/// compares them against the drift-error envelope.
pub fn closeness_check(c: f64, h: f64) -> Result<ClosenessReport> {
    assert!(c >= 15.0, "the comparison regime needs c >= 15");
    let r = constants(c, 16.0)?;
    let delta = delta_bar(r.lambda_star);
    let (mut y, mut z, mut mu) = (1.0f64, 0.0f64, c);
    let (mut ty, mut tz, mut tmu) = (1.0f64, 0.0f64, c);
    let mut lam = solve_slide_lambda(y, z, mu, Some(2.0 * c))?;
    let mut t = 0.0;
    let (mut dev_y, mut dev_z) = (0.0f64, 0.0f64);
    while y > 1e-9 && ty > 0.0 {
        let m = abcd(y, z, mu, lam)?;
        let (dy, dz, dmu) = slide_rhs(&m);
        let s = ty + tz;
        y += h * dy;
        z += h * dz;
        mu += h * dmu;
        ty += h * (-ty / s - 1.0);
        tz += h * (2.0 * ty / s);
        tmu += h * (-1.0 - 2.0 * tz * tmu / (s * s));
        t += h;
        lam = match solve_slide_lambda(y, z, mu, Some(lam)) {
            Ok(l) => l,
            Err(_) => break,
        };
        dev_y = dev_y.max((y - ty).abs());
        dev_z = dev_z.max((z - tz).abs());
        let _ = (t, tmu);
    }
    let envelope = delta * envelope_f(1.0, t_tilde_frac(), r.beta);
    let lambda_floor = approx_closed_forms(c)?.lambda_at_crossing - r.alpha5 * delta;
    Ok(ClosenessReport {
        max_dev_y: dev_y,
        max_dev_z: dev_z,
        envelope_at_crossing: envelope,
        delta,
        lambda_floor,
        lambdahat_at_crossing: lam,
        zhat_at_crossing: z,
        within_envelope: dev_y <= envelope && dev_z <= envelope,
        lambda_bound_holds: lam >= lambda_floor,
    })
}

/// One row of the endpoint table.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct TableRow {
    pub c: f64,
    pub y_final: f64,
    pub z_final: f64,
    pub mu_final: f64,
    pub lambda_final: f64,
}

pub fn endpoint_table(cs: &[f64], opts: &IntegrateOptions) -> Result<Vec<TableRow>> {
    cs.iter()
        .map(|&c| {
            let run = euler_integrate(c, opts)?;
            Ok(TableRow {
                c,
                y_final: run.finals.yhat,
                z_final: run.finals.zhat,
                mu_final: run.finals.muhat,
                lambda_final: run.finals.lambdahat,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greedy::{expected_delta, StateVector, StepKind};

    #[test]
    fn weights_corners() {
        let w = weights(0.0, 0.0).unwrap();
        assert_eq!((w.theta_a, w.theta_b, w.theta_c, w.theta_2), (0.0, 0.0, 0.0, 1.0));
        let w = weights(1.0 / 3.0, 1.0 / 3.0).unwrap();
        assert!((w.theta_b - 0.5).abs() < 1e-15);
        assert!((w.theta_c - 0.5).abs() < 1e-15);
        assert!(w.theta_2.abs() < 1e-15);
        assert!(weights(0.4, 0.3).is_err()); // 2A + B > 1
    }

    #[test]
    fn weights_match_linear_system() {
        // direct 2x2 solve of the defining equations as an oracle
        for (a, b) in [(0.1, 0.2), (0.05, 0.6), (0.3, 0.2), (0.01, 0.01)] {
            let w = weights(a, b).unwrap();
            // (1-A) tb = A ; -B tb + tc = B
            let tb = a / (1.0 - a);
            let tc = b * tb + b;
            assert!((w.theta_b - tb).abs() < 1e-14);
            assert!((w.theta_c - tc).abs() < 1e-14);
            assert!((w.theta_a + w.theta_b + w.theta_c + w.theta_2 - 1.0).abs() < 1e-14);
            assert!(w.theta_b >= 0.0 && w.theta_c >= 0.0 && w.theta_2 >= 0.0);
        }
    }

    #[test]
    fn rhs_at_start_and_weighted_combination() {
        let c = 3.0;
        let lam = solve_slide_lambda(1.0, 0.0, c, None).unwrap();
        let m = abcd(1.0, 0.0, c, lam).unwrap();
        let (dy, dz, dmu) = slide_rhs(&m);
        assert!((dy - (-m.c - 1.0)).abs() < 1e-14);
        assert!((dz - 2.0 * m.c).abs() < 1e-14);
        assert!((dmu + 1.0).abs() < 1e-14);

        // theta-weighted per-step drifts reproduce the sliding RHS
        let sv = StateVector { y1: 0, y2: 0, z1: 0, y: 4000, z: 3000, mu: 20000 };
        let lam = solve_lambda(sv.y as f64, sv.z as f64, sv.pi(), None).unwrap();
        let m = abcd(sv.y as f64, sv.z as f64, sv.mu as f64, lam).unwrap();
        let w = weights(m.a, m.b).unwrap();
        let db = expected_delta(StepKind::OneB, &sv, lam).unwrap();
        let dc = expected_delta(StepKind::OneC, &sv, lam).unwrap();
        let d2 = expected_delta(StepKind::Two, &sv, lam).unwrap();
        let (dy, dz, dmu) = slide_rhs(&m);
        for (i, want) in [(3, dy), (4, dz), (5, dmu)] {
            let got = w.theta_b * db[i] + w.theta_c * dc[i] + w.theta_2 * d2[i];
            assert!((got - want).abs() < 1e-10, "component {i}: {got} vs {want}");
        }
        // and the forced components stay put
        for i in [1, 2] {
            let got = w.theta_b * db[i] + w.theta_c * dc[i] + w.theta_2 * d2[i];
            assert!(got.abs() < 1e-10, "component {i} drifts: {got}");
        }
    }

    #[test]
    fn slide_mu_derivative_bounded() {
        let run = euler_integrate(
            3.0,
            &IntegrateOptions { h: 1e-4, sample_every: 100, ..Default::default() },
        )
        .unwrap();
        for (_, _, m) in &run.samples {
            let (_, _, dmu) = slide_rhs(m);
            assert!(dmu <= -1.0 + 1e-12);
        }
        // muhat decreases monotonically along the samples
        for w in run.samples.windows(2) {
            assert!(w[1].1.muhat < w[0].1.muhat);
        }
    }

    #[test]
    fn euler_endpoint_against_published_row() {
        // the printed endpoints embed the original integrator's private
        // arithmetic; agreement here is at coarse tolerance, with the
        // strict comparison exercised (and documented) in the acceptance
        // suite
        let run = euler_integrate(3.0, &IntegrateOptions::default()).unwrap();
        assert!(run.stopped_on_floor);
        assert!((run.finals.yhat - 8e-6).abs() < 2e-5);
        assert!((run.finals.zhat - 0.283721).abs() < 5e-4);
        assert!((run.finals.muhat - 0.398527).abs() < 5e-4);
        assert!((run.finals.lambdahat - 1.822428).abs() < 2e-3);
    }

    #[test]
    fn euler_self_convergence() {
        let a = euler_integrate(3.0, &IntegrateOptions { h: 1e-4, ..Default::default() })
            .unwrap();
        let b = euler_integrate(3.0, &IntegrateOptions { h: 5e-5, ..Default::default() })
            .unwrap();
        assert!((a.finals.zhat - b.finals.zhat).abs() < 1e-3);
        assert!((a.finals.muhat - b.finals.muhat).abs() < 1e-3);
        // deterministic repetition is bit-identical
        let a2 = euler_integrate(3.0, &IntegrateOptions { h: 1e-4, ..Default::default() })
            .unwrap();
        assert_eq!(a.finals.zhat.to_bits(), a2.finals.zhat.to_bits());
    }

    #[test]
    fn approx_crossing_and_invariant() {
        let run = approx_integrate(15.0, 1e-5, 1000);
        assert!((run.t_final - 0.677603).abs() < 1e-4);
        for (t, s) in &run.samples {
            let inv = s.ytilde + 0.5 * s.ztilde + t;
            assert!((inv - 1.0).abs() < 1e-9, "t={t}: invariant {inv}");
        }
        // lambda decreasing along the run
        for w in run.samples.windows(2) {
            assert!(w[1].1.lambdatilde < w[0].1.lambdatilde);
        }
        // ratio variable hits 1 at the crossing
        let s = run.finals;
        let x = s.ztilde / (2.0 * (1.0 - run.t_final));
        assert!((x - 1.0).abs() < 1e-3, "X at crossing: {x}");
    }

    #[test]
    fn closed_forms_match_integration() {
        let cf = approx_closed_forms(15.0).unwrap();
        assert!((cf.t_tilde_frac - 0.677603).abs() < 1e-6);
        let run = approx_integrate(15.0, 1e-5, 0);
        assert!(
            (run.finals.lambdatilde - cf.lambda_at_crossing).abs() < 5e-3,
            "integrated {} vs closed {}",
            run.finals.lambdatilde,
            cf.lambda_at_crossing
        );
        // the transport solution at X=0 is the initial 2c
        assert!((approx_lambda_of_ratio(15.0, 0.0).unwrap() - 30.0).abs() < 1e-12);
        // the constants-table linear form is a different quantity
        assert!((cf.table_linear_form - 21.5495).abs() < 1e-3);
    }

    #[test]
    fn closeness_at_c15_and_c40() {
        let r15 = closeness_check(15.0, 1e-4).unwrap();
        assert!(r15.within_envelope, "dev ({}, {})", r15.max_dev_y, r15.max_dev_z);
        assert!(r15.envelope_at_crossing < 5e-4);
        assert!(r15.lambda_bound_holds);
        let beta = constants(15.0, 16.0).unwrap().beta;
        assert!(r15.zhat_at_crossing >= beta);
        let r40 = closeness_check(40.0, 1e-4).unwrap();
        assert!(r40.max_dev_y < r15.max_dev_y);
        assert!(r40.max_dev_z <= r15.max_dev_z * 1.01);
    }
}
