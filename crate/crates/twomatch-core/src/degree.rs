//! Truncated Poisson degree machinery: the lambda root of the degree
//! equation, degree-sequence sampling conditioned on an exact total, and
//! distributional audits.

use crate::error::{Error, Result};
use crate::special::{f, phi, phi_prime};
use rand::Rng;

/// Root of `y phi_3(lambda) + z phi_2(lambda) = pi`.
///
/// The objective is increasing and convex in lambda, so bracketed Newton
/// from the initial guess `pi/(y+z)` cannot escape; bisection picks up any
/// step that leaves the bracket. Deterministic, no randomness involved.
pub fn solve_lambda(y: f64, z: f64, pi: f64, warm: Option<f64>) -> Result<f64> {
    assert!(y >= 0.0 && z >= 0.0 && y + z > 0.0);
    let floor = 3.0 * y + 2.0 * z;
    if pi <= floor {
        return Err(Error::InfeasiblePi { pi, floor });
    }
    let ratio = pi / (y + z);
    if ratio > 200.0 {
        return Err(Error::LambdaGuard { ratio });
    }
    let mut lo = 0.0;
    let mut hi = ratio + 1.0; // phi_j(x) > x, so g(hi) > 0
    let tol = 1e-12 * pi.max(1.0);
    let mut lam = warm.unwrap_or(ratio).clamp(1e-12, hi);
    for it in 0..200 {
        let g = y * phi(3, lam) + z * phi(2, lam) - pi;
        if g.abs() <= tol {
            return Ok(lam);
        }
        if g > 0.0 {
            hi = lam;
        } else {
            lo = lam;
        }
        let dg = y * phi_prime(3, lam) + z * phi_prime(2, lam);
        let newton = lam - g / dg;
        lam = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if it >= 100 && (hi - lo) < 1e-15 * hi.max(1.0) {
            return Ok(lam);
        }
    }
    let residual = y * phi(3, lam) + z * phi(2, lam) - pi;
    if residual.abs() <= 1e-10 * pi.max(1.0) {
        Ok(lam)
    } else {
        Err(Error::NoConvergence { residual, iterations: 200 })
    }
}

/// Poisson(lambda) conditioned on being >= `min_degree`.
#[derive(Debug, Clone)]
pub struct TruncatedPoisson {
    pub lambda: f64,
    pub min_degree: u32,
    cdf: Vec<f64>,
}

impl TruncatedPoisson {
    pub fn new(lambda: f64, min_degree: u32) -> Self {
        assert!(min_degree == 2 || min_degree == 3);
        assert!(lambda >= 0.0);
        let mut cdf = Vec::new();
        if lambda > 0.0 {
            let norm = f(min_degree, lambda);
            let mut p = lambda.powi(min_degree as i32) / factorial(min_degree) / norm;
            let mut acc = 0.0;
            let mut k = min_degree as u64;
            while acc < 1.0 - 1e-15 && cdf.len() < 4096 {
                acc += p;
                cdf.push(acc.min(1.0));
                k += 1;
                p *= lambda / k as f64;
            }
        }
        TruncatedPoisson { lambda, min_degree, cdf }
    }

    pub fn pmf(&self, t: u32) -> f64 {
        if t < self.min_degree {
            return 0.0;
        }
        if self.lambda == 0.0 {
            return if t == self.min_degree { 1.0 } else { 0.0 };
        }
        let mut p = self.lambda.powi(self.min_degree as i32) / factorial(self.min_degree)
            / f(self.min_degree, self.lambda);
        for k in self.min_degree as u64..t as u64 {
            p *= self.lambda / (k + 1) as f64;
        }
        p
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        if self.cdf.is_empty() {
            return self.min_degree; // lambda = 0 degenerates to the minimum
        }
        let u: f64 = rng.gen();
        match self.cdf.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
            Ok(i) | Err(i) => self.min_degree + (i.min(self.cdf.len() - 1)) as u32,
        }
    }
}

fn factorial(k: u32) -> f64 {
    (1..=k as u64).map(|i| i as f64).product()
}

/// sigma_ell^2 = lambda * phi_ell'(lambda); the variance of the truncated
/// Poisson at minimum degree ell.
pub fn sigma_sq(ell: u32, lambda: f64) -> f64 {
    lambda * phi_prime(ell, lambda)
}

pub fn pooled_sigma_sq(n2: usize, n3: usize, lambda: f64) -> f64 {
    let nbar = (n2 + n3) as f64;
    (n2 as f64 * sigma_sq(2, lambda) + n3 as f64 * sigma_sq(3, lambda)) / nbar
}

/// Which minimum-degree class a vertex belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinDeg {
    Fixed,
    Two,
    Three,
}

/// Per-vertex degrees plus the J0/J2/J3 partition and the exact total.
#[derive(Debug, Clone)]
pub struct DegreeProfile {
    pub degrees: Vec<u32>,
    pub class: Vec<MinDeg>,
    pub d_fixed: u64,
    pub total: u64,
}

impl DegreeProfile {
    pub fn new(degrees: Vec<u32>, class: Vec<MinDeg>) -> Result<Self> {
        if degrees.len() != class.len() {
            return Err(Error::BadProfile("degrees/class length mismatch".into()));
        }
        let mut d_fixed = 0u64;
        let mut total = 0u64;
        for (i, (&d, &c)) in degrees.iter().zip(&class).enumerate() {
            total += d as u64;
            match c {
                MinDeg::Fixed => d_fixed += d as u64,
                MinDeg::Two if d < 2 => {
                    return Err(Error::BadProfile(format!("vertex {i} below min degree 2")))
                }
                MinDeg::Three if d < 3 => {
                    return Err(Error::BadProfile(format!("vertex {i} below min degree 3")))
                }
                _ => {}
            }
        }
        Ok(DegreeProfile { degrees, class, d_fixed, total })
    }

    pub fn count(&self, c: MinDeg) -> usize {
        self.class.iter().filter(|&&x| x == c).count()
    }
}

/// Degree template: the partition and the fixed degrees, with the J2/J3
/// degrees left to be sampled.
#[derive(Debug, Clone)]
pub struct ProfileTemplate {
    pub class: Vec<MinDeg>,
    pub fixed_degrees: Vec<u32>, // nonzero only where class == Fixed
}

impl ProfileTemplate {
    pub fn min_degree3(n: usize) -> Self {
        ProfileTemplate { class: vec![MinDeg::Three; n], fixed_degrees: vec![0; n] }
    }

    pub fn min_degree2(n: usize) -> Self {
        ProfileTemplate { class: vec![MinDeg::Two; n], fixed_degrees: vec![0; n] }
    }
}

/// Outcome of conditioned sampling, with the rejection bookkeeping that the
/// acceptance-rate audit wants.
#[derive(Debug, Clone)]
pub struct SampledProfile {
    pub profile: DegreeProfile,
    pub attempts: u64,
    pub lambda: f64,
}

/// Draw i.i.d. truncated Poisson degrees for J2 and J3 conditioned on the
/// exact block sum `2m - D`, by whole-block rejection. Aborting an attempt
/// early (once the partial sum cannot land exactly on the target) does not
/// change the accepted distribution.
pub fn sample_conditioned_degrees<R: Rng>(
    template: &ProfileTemplate,
    m: u64,
    rng: &mut R,
) -> Result<SampledProfile> {
    let n = template.class.len();
    let d_fixed: u64 = template.fixed_degrees.iter().map(|&d| d as u64).sum();
    let n2 = template.class.iter().filter(|&&c| c == MinDeg::Two).count();
    let n3 = template.class.iter().filter(|&&c| c == MinDeg::Three).count();
    let nbar = n2 + n3;
    let target = (2 * m).checked_sub(d_fixed).ok_or_else(|| {
        Error::BadProfile(format!("fixed degrees sum {d_fixed} exceeds 2m = {}", 2 * m))
    })?;
    let min_sum = (2 * n2 + 3 * n3) as u64;
    if target < min_sum {
        return Err(Error::BadProfile(format!(
            "target block sum {target} below minimum {min_sum}"
        )));
    }
    if nbar == 0 {
        if target != 0 {
            return Err(Error::BadProfile("no free vertices but nonzero target".into()));
        }
        let profile =
            DegreeProfile::new(template.fixed_degrees.clone(), template.class.clone())?;
        return Ok(SampledProfile { profile, attempts: 0, lambda: 0.0 });
    }
    if target == min_sum {
        // lambda -> 0 degenerates to the all-minimum point mass
        let mut degrees = template.fixed_degrees.clone();
        for (d, c) in degrees.iter_mut().zip(&template.class) {
            match c {
                MinDeg::Two => *d = 2,
                MinDeg::Three => *d = 3,
                MinDeg::Fixed => {}
            }
        }
        let profile = DegreeProfile::new(degrees, template.class.clone())?;
        return Ok(SampledProfile { profile, attempts: 1, lambda: 0.0 });
    }

    let lambda = solve_lambda(n3 as f64, n2 as f64, target as f64, None)?;
    let p2 = TruncatedPoisson::new(lambda, 2);
    let p3 = TruncatedPoisson::new(lambda, 3);
    let sigma = pooled_sigma_sq(n2, n3, lambda).sqrt();
    let budget = 200 * (sigma * (2.0 * std::f64::consts::PI * nbar as f64).sqrt()).ceil() as u64;
    let budget = budget.max(1000);

    let order: Vec<u32> = (0..n as u32)
        .filter(|&v| template.class[v as usize] != MinDeg::Fixed)
        .collect();
    // cheapest completion from position i on: every later vertex at its minimum
    let mut rest_min = vec![0u64; order.len() + 1];
    for (i, &v) in order.iter().enumerate().rev() {
        let lo = if template.class[v as usize] == MinDeg::Two { 2 } else { 3 };
        rest_min[i] = rest_min[i + 1] + lo;
    }
    let mut degrees = template.fixed_degrees.clone();
    for attempt in 1..=budget {
        let mut sum = 0u64;
        let mut ok = true;
        for (i, &v) in order.iter().enumerate() {
            let c = template.class[v as usize];
            let d = match c {
                MinDeg::Two => p2.sample(rng),
                MinDeg::Three => p3.sample(rng),
                MinDeg::Fixed => unreachable!(),
            };
            degrees[v as usize] = d;
            sum += d as u64;
            if sum + rest_min[i + 1] > target {
                ok = false;
                break;
            }
        }
        if ok && sum == target {
            let profile = DegreeProfile::new(degrees, template.class.clone())?;
            return Ok(SampledProfile { profile, attempts: attempt, lambda });
        }
    }
    Err(Error::SamplingFailure { attempts: budget })
}

/// One bucket of the concentration audit.
#[derive(Debug, Clone)]
pub struct AuditBucket {
    pub min_degree: u32,
    pub k: u32,
    pub observed: u64,
    pub expected: f64,
    pub envelope: f64,
    pub inside: bool,
}

#[derive(Debug, Clone)]
pub struct ConcentrationReport {
    pub buckets: Vec<AuditBucket>,
    pub max_degree: u32,
    pub max_degree_bound: f64,
    pub max_degree_ok: bool,
    pub all_inside: bool,
}

/// Compares per-degree counts in each class against the truncated-Poisson
/// prediction with the (1 + sqrt(expected)) log^2 N envelope, and the
/// maximum degree against log N / sqrt(log log N) + 5. Diagnostic only.
pub fn degree_concentration_audit(profile: &DegreeProfile, lambda: f64) -> ConcentrationReport {
    let nbar = profile.class.iter().filter(|&&c| c != MinDeg::Fixed).count();
    let logn = (nbar.max(3) as f64).ln();
    let kmax = logn.floor() as u32;
    let mut buckets = Vec::new();
    let mut max_degree = 0;
    for ell in [2u32, 3] {
        let class = if ell == 2 { MinDeg::Two } else { MinDeg::Three };
        let members: Vec<u32> = profile
            .class
            .iter()
            .zip(&profile.degrees)
            .filter(|(&c, _)| c == class)
            .map(|(_, &d)| d)
            .collect();
        if members.is_empty() {
            continue;
        }
        let n_ell = members.len() as f64;
        let dist = TruncatedPoisson::new(lambda, ell);
        for k in ell..=kmax.max(ell) {
            let observed = members.iter().filter(|&&d| d == k).count() as u64;
            let expected = n_ell * dist.pmf(k);
            let envelope = (1.0 + expected.sqrt()) * logn * logn;
            buckets.push(AuditBucket {
                min_degree: ell,
                k,
                observed,
                expected,
                envelope,
                inside: (observed as f64 - expected).abs() <= envelope,
            });
        }
        max_degree = max_degree.max(members.iter().copied().max().unwrap_or(0));
    }
    let max_degree_bound = logn / logn.ln().sqrt() + 5.0;
    ConcentrationReport {
        all_inside: buckets.iter().all(|b| b.inside),
        max_degree,
        max_degree_bound,
        max_degree_ok: (max_degree as f64) <= max_degree_bound,
        buckets,
    }
}
