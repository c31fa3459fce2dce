//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line (visible with `cargo test --test acceptance -- --nocapture`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use twomatch_core::degree::{
    pooled_sigma_sq, sample_conditioned_degrees, solve_lambda, ProfileTemplate, TruncatedPoisson,
};
use twomatch_core::graph::{petersen, sample_gnm, sample_min_degree3, SimpleGraph};
use twomatch_core::greedy::{zeta_drift, Capture, RunOptions, StepKind, TwoGreedy};
use twomatch_core::hamilton::{ham, rotate, split_boosters, verify_hamilton};
use twomatch_core::matching::{augment, karp_sipser};
use twomatch_core::ode::{approx_closed_forms, approx_integrate, endpoint_table, euler_integrate, IntegrateOptions};
use twomatch_core::seq::{sample_simple, HalfEdgeSequence};
use twomatch_core::special::{constants, delta_bar, q_at_worst_ray, q_max_closed};
use twomatch_core::trial_seed;

fn seq_from_graph(g: &SimpleGraph) -> HalfEdgeSequence {
    let entries: Vec<u32> = g.edges.iter().flat_map(|&(u, v)| [u, v]).collect();
    HalfEdgeSequence::from_entries(g.n, entries)
}

/// Printed endpoint table (c, y, z, mu, lambda), reproduced at step 1e-5.
const PUBLISHED_ROWS: [(f64, f64, f64, f64, f64); 6] = [
    (3.0, 0.000008, 0.283721, 0.398527, 1.822428),
    (2.9, 0.000009, 0.242563, 0.326139, 1.602749),
    (2.8, 0.000010, 0.197461, 0.253645, 1.370798),
    (2.7, 0.000010, 0.148901, 0.182327, 1.123928),
    (2.6, 0.000010, 0.098344, 0.114494, 0.858355),
    (2.5, 0.000010, 0.048976, 0.054010, 0.565840),
];

#[test]
fn criterion_01_endpoint_table_reproduction() {
    let start = std::time::Instant::now();
    let cs: Vec<f64> = PUBLISHED_ROWS.iter().map(|r| r.0).collect();
    let rows = endpoint_table(&cs, &IntegrateOptions::default()).unwrap();
    let mut worst: f64 = 0.0;
    let mut lines = String::new();
    for (row, want) in rows.iter().zip(PUBLISHED_ROWS.iter()) {
        let dev = [
            row.y_final - want.1,
            row.z_final - want.2,
            row.mu_final - want.3,
            row.lambda_final - want.4,
        ];
        worst = dev.iter().fold(worst, |w, d| w.max(d.abs()));
        lines += &format!(
            "  c={:.1}: got ({:.6}, {:.6}, {:.6}, {:.6}) dev ({:+.1e}, {:+.1e}, {:+.1e}, {:+.1e})\n",
            row.c, row.y_final, row.z_final, row.mu_final, row.lambda_final,
            dev[0], dev[1], dev[2], dev[3],
        );
    }
    let elapsed = start.elapsed();
    let ok = worst <= 2e-5 && elapsed.as_secs() < 120;
    println!(
        "CRITERION 1: {} — endpoint table at h=1e-5, worst entry deviation {worst:.2e} (stated tolerance 2e-5), {:?}\n{lines}",
        if ok { "PASS" } else { "FAIL" },
        elapsed,
    );
    // The printed rows are internally inconsistent at this tolerance: the
    // published lambda column differs from the root of the degree equation
    // at the published (y, z, mu) by 7e-4 (c=3.0) to 5.3e-3 (c=2.5), so no
    // integrator that keeps the constraint satisfied can land within 2e-5
    // on all four columns. See the decisions ledger for the analysis.
    for &(c, y, z, mu, lam) in &PUBLISHED_ROWS {
        let solved = solve_lambda(y, z, 2.0 * mu, None).unwrap();
        println!(
            "  note: published row c={c}: lambda column {lam} vs constraint root {solved:.6} (gap {:+.1e})",
            lam - solved
        );
    }
    assert!(
        ok,
        "endpoint table off by {worst:.2e} > 2e-5; published rows are not \
         constraint-consistent at this tolerance (see decisions ledger)"
    );
}

#[test]
fn criterion_02_closed_forms() {
    let cf = approx_closed_forms(15.0).unwrap();
    let t_ok = (cf.t_tilde_frac - 0.677603).abs() <= 1e-6;
    let run = approx_integrate(15.0, 1e-5, 0);
    let gap = run.finals.lambdatilde - cf.lambda_at_crossing;
    let lam_ok = gap.abs() <= 5e-3;
    println!(
        "CRITERION 2: {} — crossing fraction {:.7} (want 0.677603 ±1e-6); integrated lambda at \
         crossing {:.6} vs closed form {:.6} (gap {:+.1e}, tolerance 5e-3)",
        if t_ok && lam_ok { "PASS" } else { "FAIL" },
        cf.t_tilde_frac,
        run.finals.lambdatilde,
        cf.lambda_at_crossing,
        gap
    );
    println!(
        "  note: the constants-table linear form a1*c - a2 = {:.4} takes its prefactor at \
         T~/n instead of at ratio 1 and sits {:+.2} from the integrated value; the closed form \
         above is the quadrature solution of the transport equation (see decisions ledger)",
        cf.table_linear_form,
        cf.table_linear_form - run.finals.lambdatilde
    );
    assert!(t_ok && lam_ok);
}

#[test]
fn criterion_03_constants_table() {
    let r = constants(15.0, 16.0).unwrap();
    let d = delta_bar(16.0);
    let checks = [
        ("delta_bar(16)", d, 0.000102752, 1e-8),
        ("beta", r.beta, 0.634794, 1e-5),
        ("alpha0", r.alpha0, 4.73302, 1e-4),
        ("a1", r.a1, 1.5312, 1e-3),
        ("a2", r.a2, 1.41846, 1e-4),
        ("c1(15,16)", r.c1_value, 20.1217, 1e-3),
    ];
    let ok = checks.iter().all(|(_, got, want, tol)| (got - want).abs() <= *tol);
    let detail: Vec<String> = checks
        .iter()
        .map(|(name, got, want, tol)| format!("{name}={got:.8} (want {want} ±{tol:.0e})"))
        .collect();
    println!("CRITERION 3: {} — {}", if ok { "PASS" } else { "FAIL" }, detail.join(", "));
    for (name, got, want, tol) in checks {
        assert!((got - want).abs() <= tol, "{name}: {got} vs {want}");
    }
}

#[test]
fn criterion_04_q_below_one_on_grid() {
    let mut max_q: f64 = 0.0;
    for i in 1..=1000 {
        let lam = 0.01 + (50.0 - 0.01) * i as f64 / 1000.0;
        let q = q_at_worst_ray(lam).unwrap();
        assert!(q < 1.0, "Q = {q} at lambda = {lam}");
        assert!(
            (q - q_max_closed(lam)).abs() <= 1e-9 * q.max(1e-9),
            "algebraic routes disagree at {lam}"
        );
        max_q = max_q.max(q);
    }
    let mut ratios = Vec::new();
    let mut i = 0;
    let mut lam = 0.011;
    while lam <= 0.1 {
        let q = q_at_worst_ray(lam).unwrap();
        ratios.push((1.0 - q) / (lam * lam));
        i += 1;
        lam = 0.011 + 0.003 * i as f64;
    }
    let (lo, hi) = ratios
        .iter()
        .fold((f64::MAX, f64::MIN), |(l, h), &r| (l.min(r), h.max(r)));
    let bounded = lo > 0.04 && hi < 0.07;
    println!(
        "CRITERION 4: {} — Q(worst ray) < 1 on 1000-point grid (max {max_q:.6}); \
         (1-Q)/lambda^2 in [{lo:.4}, {hi:.4}] on (0.01, 0.1]",
        if bounded { "PASS" } else { "FAIL" }
    );
    assert!(bounded, "(1-Q)/lambda^2 range [{lo}, {hi}] not bounded near 1/18");
}

#[test]
fn criterion_05_trajectory_coupling() {
    let n = 100_000usize;
    let c = 15.0;
    let m = (c * n as f64) as usize;
    // one reference trajectory; h = 1e-5 makes one ODE step one algorithm
    // step, sampled every 10 to match the capture stride at this n
    let ode = euler_integrate(
        c,
        &IntegrateOptions { h: 1e-5, sample_every: 10, ..Default::default() },
    )
    .unwrap();
    let ln_n = (n as f64).ln();
    let mut all_ok = true;
    let mut sups: Vec<(f64, f64, f64)> = Vec::new();
    for seed in 0..5u64 {
        let t0 = std::time::Instant::now();
        let mut rng = ChaCha12Rng::seed_from_u64(trial_seed(1405, seed));
        let g = sample_min_degree3(n, m, &mut rng).unwrap();
        let out = TwoGreedy::new(seq_from_graph(&g))
            .run(&mut rng, &RunOptions::default())
            .unwrap();
        let (mut sup_y, mut sup_z, mut sup_mu) = (0.0f64, 0.0f64, 0.0f64);
        for rec in &out.trajectory {
            if rec.t % 10 != 0 {
                continue; // the closing capture is not stride-aligned
            }
            let Some((_, s, _)) = ode.samples.get(rec.t / 10) else { break };
            sup_y = sup_y.max((rec.state.y as f64 / n as f64 - s.yhat).abs());
            sup_z = sup_z.max((rec.state.z as f64 / n as f64 - s.zhat).abs());
            sup_mu = sup_mu.max((rec.state.mu as f64 / n as f64 - s.muhat).abs());
        }
        let sup = sup_y.max(sup_z).max(sup_mu);
        let zeta_bound = ln_n * ln_n;
        let kappa_bound = 12.0 * ln_n;
        let ok = sup <= 0.02
            && out.summary.final_z as f64 >= 0.55 * n as f64
            && (out.summary.max_zeta as f64) <= zeta_bound
            && (out.summary.kappa_nontrivial as f64) <= kappa_bound
            && out.summary.new_path_events as f64 <= 20.0 * ln_n
            && t0.elapsed().as_secs() < 600;
        println!(
            "  seed {seed}: sup-dev y {sup_y:.5} z {sup_z:.5} mu {sup_mu:.5}, final z {} \
             ({:.4} n), max zeta {}, kappa {}, stranded-component events {}, {:?}",
            out.summary.final_z,
            out.summary.final_z as f64 / n as f64,
            out.summary.max_zeta,
            out.summary.kappa_nontrivial,
            out.summary.new_path_events,
            t0.elapsed()
        );
        all_ok &= ok;
        sups.push((sup_y, sup_z, sup_mu));
        assert!(out.summary.final_z as f64 >= 0.55 * n as f64);
        assert!((out.summary.max_zeta as f64) <= zeta_bound);
        assert!((out.summary.kappa_nontrivial as f64) <= kappa_bound);
    }
    println!(
        "CRITERION 5: {} — 5 seeds at n=1e5, c=15 (stated sup tolerance 0.02 on each of y, z, mu)",
        if all_ok { "PASS" } else { "FAIL" }
    );
    // The mu coordinate carries a systematic model gap: the closed drift
    // system transports the degree ansatz only approximately, and the
    // mechanical Z-degree flow exceeds the transported one, so the real
    // process sheds edges ~1% faster than the integrated muhat. The y and
    // z components track within 0.006; mu lands near 0.09 — inside the
    // n^{8/9}/n ~ 0.28 coupling envelope the source analysis proves, but
    // outside this criterion's 0.02. See the decisions ledger.
    assert!(
        all_ok,
        "sup deviations (y, z, mu) per seed: {sups:?}; the mu gap is a documented \
         model-transport bias (decisions ledger), not an implementation defect"
    );
}

#[test]
fn criterion_06_drift_sign_monte_carlo() {
    let n = 10_000usize;
    let c = 3.0;
    let m = (c * n as f64) as usize;
    let samples = 10_000usize;
    let mut rng = ChaCha12Rng::seed_from_u64(trial_seed(6, 0));
    let g = sample_min_degree3(n, m, &mut rng).unwrap();
    let mut runner = TwoGreedy::new(seq_from_graph(&g));
    let mut pending = vec![StepKind::OneA, StepKind::OneB, StepKind::OneC];
    let t_min = n / 10;
    let mut steps = 0usize;
    let mut all_ok = true;
    while !pending.is_empty() {
        let Some(kind) = runner.peek_kind() else { break };
        if steps >= t_min {
            if let Some(i) = pending.iter().position(|&k| k == kind) {
                pending.remove(i);
                let sv = runner.state_vector();
                assert!(sv.zeta() > 0, "forced kinds imply zeta > 0");
                let lambda = solve_lambda(sv.y as f64, sv.z as f64, sv.pi(), None).unwrap();
                let predicted = zeta_drift(kind, &sv, lambda).unwrap();
                let zeta0 = sv.zeta() as f64;
                let (mut sum, mut sumsq) = (0.0, 0.0);
                for s in 0..samples {
                    let mut clone = runner.clone();
                    let mut crng =
                        ChaCha12Rng::seed_from_u64(trial_seed(0xD51F ^ kind as u64, s as u64));
                    clone.step_once(&mut crng);
                    let d = clone.zeta() as f64 - zeta0;
                    sum += d;
                    sumsq += d * d;
                }
                let mean = sum / samples as f64;
                let var = (sumsq / samples as f64 - mean * mean).max(0.0);
                let se = (var / samples as f64).sqrt().max(1e-12);
                let z = (mean - predicted) / se;
                let ok = mean < 0.0 && z.abs() <= 3.0;
                println!(
                    "  {:?} at t={steps}, zeta={zeta0}: predicted {predicted:+.5}, empirical \
                     {mean:+.5} (se {se:.5}), z={z:+.2} -> {}",
                    kind,
                    if ok { "ok" } else { "OUT OF BAND" }
                );
                all_ok &= ok;
            }
        }
        runner.step_once(&mut rng);
        steps += 1;
    }
    assert!(pending.is_empty(), "kinds never seen mid-run: {pending:?}");
    println!(
        "CRITERION 6: {} — one-step zeta drift, 1e4 continuations per forced kind",
        if all_ok { "PASS" } else { "FAIL" }
    );
    assert!(all_ok);
}

#[test]
fn criterion_07_degree_model() {
    // exact-sum guarantee: hard assert over a spread of shapes
    let mut rng = ChaCha12Rng::seed_from_u64(trial_seed(7, 0));
    for (n, m) in [(50usize, 90u64), (400, 700), (1000, 1600)] {
        let t = ProfileTemplate::min_degree3(n);
        let s = sample_conditioned_degrees(&t, m, &mut rng).unwrap();
        assert_eq!(s.profile.total, 2 * m, "exact-sum violated");
    }

    // marginal pmf of a fixed vertex at N = 1e4 against the conditioned law
    let nbar = 10_000usize;
    let total = (3.5 * nbar as f64) as u64; // 2M
    let template = ProfileTemplate::min_degree3(nbar);
    let samples = 4000usize;
    let mut marginal = std::collections::HashMap::<u32, u64>::new();
    let mut attempts_used = 0u64;
    for _ in 0..samples {
        let s = sample_conditioned_degrees(&template, total / 2, &mut rng).unwrap();
        attempts_used += s.attempts;
        *marginal.entry(s.profile.degrees[0]).or_default() += 1;
    }
    let lambda = solve_lambda(nbar as f64, 0.0, total as f64, None).unwrap();
    let dist = TruncatedPoisson::new(lambda, 3);
    // bucket 3..=8 with a pooled tail
    let mut chi2 = 0.0;
    let mut dof = 0i32;
    let mut tail_p = 1.0;
    let mut tail_obs = samples as i64;
    for k in 3..=8u32 {
        let p = dist.pmf(k);
        let e = p * samples as f64;
        let o = *marginal.get(&k).unwrap_or(&0) as f64;
        chi2 += (o - e) * (o - e) / e;
        dof += 1;
        tail_p -= p;
        tail_obs -= o as i64;
    }
    let e_tail = tail_p * samples as f64;
    if e_tail > 5.0 {
        chi2 += (tail_obs as f64 - e_tail).powi(2) / e_tail;
        dof += 1;
    }
    dof -= 1;
    let p_value = chi_square_sf(chi2, dof as f64);

    // rejection acceptance rate against 1 / (sigma sqrt(2 pi N))
    let sigma = pooled_sigma_sq(0, nbar, lambda).sqrt();
    let predicted_rate = 1.0 / (sigma * (2.0 * std::f64::consts::PI * nbar as f64).sqrt());
    let observed_rate = samples as f64 / attempts_used as f64;
    let factor = observed_rate / predicted_rate;

    let ok = p_value > 0.001 && factor > 0.5 && factor < 2.0;
    println!(
        "CRITERION 7: {} — exact sums hold; marginal chi2 {chi2:.2} (dof {dof}) p={p_value:.4}; \
         acceptance rate {observed_rate:.5} vs predicted {predicted_rate:.5} (factor {factor:.2})",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(p_value > 0.001, "chi-square p = {p_value}");
    assert!(factor > 0.5 && factor < 2.0, "acceptance factor {factor}");
}

#[test]
fn criterion_08_matching_quality() {
    // brute-force agreement on small instances
    let mut rng = ChaCha12Rng::seed_from_u64(trial_seed(8, 0));
    let trials = 200;
    let mut agree = 0;
    for _ in 0..trials {
        let n = rng.gen_range(4..=12usize);
        let mmax = n * (n - 1) / 2;
        let m = rng.gen_range(n / 2..=mmax.min(2 * n));
        let g = sample_gnm(n, m, &mut rng).unwrap();
        let best = exact_max_matching(&g);
        let got = augment(&g, karp_sipser(&g, &mut rng), 100).size();
        assert!(got <= best);
        if got == best {
            agree += 1;
        }
    }
    let small_ok = agree * 100 >= trials * 95;

    // exposed count on residual-law samples at nu = 1e4
    let nu = 10_000usize;
    let allowed = 2usize.max(nu / 1000);
    let mut max_exposed = 0usize;
    for seed in 0..10u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(trial_seed(8, 1 + seed));
        // density ratios across [1.5, 2.0]: simple rejection stays cheap here
        let ratio = 1.5 + 0.05 * seed as f64;
        let m = (ratio * nu as f64) as usize;
        let template = ProfileTemplate::min_degree2(nu);
        let seq = sample_simple(
            |r: &mut ChaCha12Rng| {
                Ok(sample_conditioned_degrees(&template, m as u64, r)?.profile)
            },
            &mut rng,
            5000,
        )
        .unwrap();
        let g = SimpleGraph::from_halfedge(&seq).unwrap();
        let matching = augment(&g, karp_sipser(&g, &mut rng), 100);
        matching.validate(&g).unwrap();
        let exposed = matching.exposed(&g).len();
        max_exposed = max_exposed.max(exposed);
        assert!(exposed <= allowed, "seed {seed}: exposed {exposed} > {allowed}");
    }
    println!(
        "CRITERION 8: {} — optimal on {agree}/{trials} small instances (need 190, blossom-free \
         search may miss odd-component optima); residual-law exposed <= {max_exposed} of allowed \
         {allowed} across 10 seeds",
        if small_ok { "PASS" } else { "FAIL" }
    );
    assert!(small_ok, "only {agree}/{trials} optimal");
}

#[test]
fn criterion_09_hamilton_pipeline() {
    // rotation unit fixture
    assert_eq!(rotate(&[1, 2, 3, 4, 5], (5, 2)), vec![1, 2, 5, 4, 3]);

    // the hypohamiltonian fixture must fail
    let p = petersen();
    let mut rng = ChaCha12Rng::seed_from_u64(trial_seed(9, 99));
    let petersen_failed = ham(
        &p,
        &mut twomatch_core::hamilton::BoosterSet::empty(),
        &[],
        10_000,
        &mut rng,
    )
    .is_err();
    assert!(petersen_failed);

    let n = 10_000usize;
    let c = 15.0;
    let m = (c * n as f64) as usize;
    let ln2 = (n as f64).ln().powi(2);
    let nu = n.min(((n as f64).powf(0.75) * ln2).ceil() as usize);
    let s = (n as f64).sqrt().ceil() as usize;
    let mut successes = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(trial_seed(9, seed));
        let g = sample_min_degree3(n, m, &mut rng).unwrap();
        let (h, mut boosters) = split_boosters(&g, s, &mut rng).unwrap();
        assert!(h.min_degree() >= 3);
        let run = TwoGreedy::new(seq_from_graph(&h))
            .run(&mut rng, &RunOptions::default())
            .unwrap();
        match ham(&h, &mut boosters, &run.two_matching.edges, nu, &mut rng) {
            Ok(hr) => {
                assert!(verify_hamilton(&h, boosters.consumed(), &hr.cycle));
                successes += 1;
            }
            Err(e) => println!("  seed {seed}: failure {e}"),
        }
    }
    let ok = successes >= 8;
    println!(
        "CRITERION 9: {} — {successes}/10 verified cycles at n=1e4 c=15 (need 8); \
         hypohamiltonian fixture rejected; rotation fixtures exact",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok);
}

#[test]
fn criterion_10_invariant_suites() {
    // audited runs at n = 1e3 on both input models, audit every 100 steps
    for (seed, c, multigraph) in
        [(1u64, 2.0, false), (2, 2.5, false), (3, 15.0, false), (4, 2.0, true), (5, 15.0, true)]
    {
        let n = 1000usize;
        let m = (c * n as f64) as usize;
        let mut rng = ChaCha12Rng::seed_from_u64(trial_seed(10, seed));
        let seq = if multigraph {
            twomatch_core::graph::sample_pairing_min_degree3(n, m, &mut rng).unwrap()
        } else {
            seq_from_graph(&sample_min_degree3(n, m, &mut rng).unwrap())
        };
        seq.audit_counts().unwrap();
        let out = TwoGreedy::new(seq)
            .run(
                &mut rng,
                &RunOptions { audit_every: 100, capture: Capture::Full, ..Default::default() },
            )
            .unwrap();
        // combine's degree <= 2 guarantee doubles as the 2-matching check
        let total: usize = out.two_matching.component_sizes.iter().sum();
        assert_eq!(total, n, "census must span all vertices");
        assert_eq!(
            out.two_matching.kappa_total,
            out.two_matching.cycles + out.two_matching.paths + out.two_matching.isolated
        );
    }
    println!(
        "CRITERION 10: PASS — zero audit violations across audited runs; census and \
         degree checks clean (property corpus runs in the library tests)"
    );
}

/// Exact maximum matching by memoized branching over vertex bitmasks.
fn exact_max_matching(g: &SimpleGraph) -> usize {
    fn rec(
        g: &SimpleGraph,
        free: u32,
        memo: &mut std::collections::HashMap<u32, usize>,
    ) -> usize {
        if free == 0 {
            return 0;
        }
        if let Some(&v) = memo.get(&free) {
            return v;
        }
        let v = free.trailing_zeros();
        let mut best = rec(g, free & !(1 << v), memo);
        for &w in g.neighbors(v) {
            if free & (1 << w) != 0 {
                best = best.max(1 + rec(g, free & !(1 << v) & !(1 << w), memo));
            }
        }
        memo.insert(free, best);
        best
    }
    rec(g, (1u32 << g.n) - 1, &mut std::collections::HashMap::new())
}

/// Upper tail of the chi-square distribution via the regularized upper
/// incomplete gamma function (series / continued fraction split).
fn chi_square_sf(x: f64, dof: f64) -> f64 {
    upper_gamma_q(dof / 2.0, x / 2.0)
}

fn upper_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - lower_gamma_series(a, x)
    } else {
        upper_gamma_cf(a, x)
    }
}

fn ln_gamma(z: f64) -> f64 {
    // Lanczos g = 7, n = 9
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let z = z - 1.0;
    let mut acc = C[0];
    for (i, &c) in C.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

fn lower_gamma_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut n = a;
    for _ in 0..500 {
        n += 1.0;
        term *= x / n;
        sum += term;
        if term.abs() < sum.abs() * 1e-15 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn upper_gamma_cf(a: f64, x: f64) -> f64 {
    // Lentz's continued fraction
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-15 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

#[test]
fn chi_square_helper_sane() {
    // reference quantiles: chi2(0.999; 5) = 20.515, chi2(0.95; 5) = 11.07
    assert!((chi_square_sf(20.515, 5.0) - 0.001).abs() < 5e-5);
    assert!((chi_square_sf(11.07, 5.0) - 0.05).abs() < 2e-3);
    assert!(chi_square_sf(0.5, 5.0) > 0.99);
}
