//! Acceptance gate. Each test reports one `PASS`/`FAIL` line on stderr
//! (written past the libtest capture) and then asserts the criterion.

mod common;

use musel::estimators::{solve_compensated_mu, solve_dantzig, solve_mu_selector, SelectorConfig, SelectorProblem};
use musel::io::{table_rows_to_csv, to_json};
use musel::lp::LpStatus;
use musel::matrix::norm1;
use musel::missing::{apply_mask, column_mean_squares, estimate_pi, rescale, sigma_hat, sigma_true, uniform_pi};
use musel::missing::{MaskedDesign, PiMode};
use musel::model::gram;
use musel::rng::rng_for;
use musel::sensitivity::{kappa_inf_exact, kappa_one, SensitivityOptions};
use musel::sim::{
    design_for, gen_design, gen_theta, metrics, rep_data, run_experiment, run_experiment_with_threads, EstimatorKind,
    SimConfig, TableRow,
};
use musel::thresholds::{nu_bound, thresholds, NoiseParams};
use musel::{DenseMatrix, Domain, GramMatrix};
use rand_distr::{Distribution, Normal};
use std::io::Write;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "acceptance {id} [{tag}] {name}: {detail}");
}

fn row(rows: &[TableRow], s: usize, est: EstimatorKind, delta: f64) -> &TableRow {
    rows.iter()
        .find(|r| r.s == s && r.estimator == est && r.delta == delta)
        .expect("table row present")
}

#[test]
fn c1_table_one_reproduction() {
    let cfg = SimConfig { seed: 2024, delta_list: vec![0.1], ..SimConfig::preset("table1").unwrap() };
    assert_eq!((cfg.n, cfg.p, cfg.reps, cfg.pi_star), (100, 500, 100, 0.1));
    let out = run_experiment(&cfg).unwrap();
    let mu = row(&out.rows, 1, EstimatorKind::Mu, 0.1);
    let cmu = row(&out.rows, 1, EstimatorKind::Cmu, 0.1);
    let within = |v: f64, target: f64, tol: f64| (v - target).abs() <= tol;
    let checks = [
        within(mu.exact as f64, 36.0, 15.0),
        within(cmu.exact as f64, 54.0, 15.0),
        within(mu.err1.mean, 0.0110, 0.5 * 0.0110),
        within(cmu.err1.mean, 0.0044, 0.5 * 0.0044),
    ];
    let pass = checks.iter().all(|&c| c);
    report(
        1,
        "table 1, delta = 0.1",
        pass,
        &format!(
            "exact MU {} (36 +/- 15), CMU {} (54 +/- 15); err1 MU {:.5} (0.0110 +/- 50%), CMU {:.5} (0.0044 +/- 50%); failed reps {}/{}",
            mu.exact, cmu.exact, mu.err1.mean, cmu.err1.mean, mu.reps_failed, cmu.reps_failed
        ),
    );
    assert!(pass);
}

#[test]
fn c2_directional_improvement() {
    let deltas = [0.05, 0.075];
    let mut wins = 0;
    let mut detail = Vec::new();
    for batch in 0..10u64 {
        let cfg = SimConfig { seed: 100 + batch, delta_list: deltas.to_vec(), ..SimConfig::preset("reduced").unwrap() };
        assert_eq!((cfg.n, cfg.p, cfg.reps, cfg.s_list.clone()), (40, 120, 30, vec![1, 2]));
        let out = run_experiment(&cfg).unwrap();
        let ok = cfg.s_list.iter().all(|&s| {
            deltas.iter().all(|&d| {
                row(&out.rows, s, EstimatorKind::Cmu, d).err1.mean < row(&out.rows, s, EstimatorKind::Mu, d).err1.mean
            })
        });
        wins += ok as usize;
        detail.push(if ok { '+' } else { '-' });
    }
    let pass = wins >= 8;
    let pattern: String = detail.into_iter().collect();
    report(2, "CMU err1 < MU err1 at reduced scale", pass, &format!("{wins}/10 batches ({pattern}), need >= 8"));
    assert!(pass);
}

#[test]
fn c3_lp_oracle_equivalence() {
    use rand::{Rng, SeedableRng};
    let mut matched = 0;
    let mut worst: f64 = 0.0;
    let mut mismatches = 0;
    let mut seed = 0u64;
    while matched < 50 && seed < 1000 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let p = rng.random_range(1..=4);
        let n = rng.random_range(p.max(2)..=6);
        let (z, y) = common::random_instance(n, p, seed ^ 0xacce);
        let d: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..0.3)).collect();
        let mu = rng.random_range(0.0..0.3);
        let (c, a) = common::constraint_data(&z, &y, &d);
        let tau = rng.random_range(0.2..0.9) * c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        seed += 1;
        let Some(oracle) = common::cmu_grid_oracle(&c, &a, mu, tau, 16) else { continue };
        let cfg = SelectorConfig::new(mu, tau).with_compensation(d);
        let est = solve_compensated_mu(&z, &y, &cfg).unwrap();
        let rel = if est.status() == LpStatus::Optimal {
            (est.l1_norm - oracle).abs() / oracle.abs().max(1e-12)
        } else {
            f64::INFINITY
        };
        worst = worst.max(rel);
        mismatches += (rel > 1e-4) as usize;
        matched += 1;
    }
    let pass = matched == 50 && mismatches == 0;
    report(
        3,
        "LP vs grid-plus-refinement oracle",
        pass,
        &format!("{matched} feasible instances, worst relative gap {worst:.2e} (tolerance 1e-4)"),
    );
    assert!(pass);
}

/// Gaussian errors-in-variables draw: `Z = X + Ξ`, `y = Xθ* + ξ`.
struct Draw {
    z: DenseMatrix,
    y: Vec<f64>,
}

fn gaussian_draw(x: &DenseMatrix, theta: &[f64], sd_design: f64, sd_response: f64, seed: u64, rep: u64) -> Draw {
    let mut rng = rng_for(seed, &[rep]);
    let big = Normal::new(0.0, sd_design).unwrap();
    let small = Normal::new(0.0, sd_response).unwrap();
    let z_data = x.as_slice().iter().map(|v| v + big.sample(&mut rng)).collect();
    let z = DenseMatrix::new(x.rows(), x.cols(), z_data).unwrap();
    let y = x.mul_vec(theta).into_iter().map(|v| v + small.sample(&mut rng)).collect();
    Draw { z, y }
}

struct Protocol {
    x: DenseMatrix,
    theta: Vec<f64>,
    d: Vec<f64>,
    cfg: SelectorConfig,
    nu: f64,
}

const SD_DESIGN: f64 = 0.1;
const SD_RESPONSE: f64 = 0.1;
const EPS: f64 = 0.05;

fn protocol(n: usize, p: usize, s: usize, seed: u64) -> Protocol {
    let x = gen_design(n, p, &mut rng_for(seed, &[0])).unwrap();
    let theta = gen_theta(p, s, 0.5, &mut rng_for(seed, &[1])).unwrap();
    let m2 = column_mean_squares(&x).into_iter().fold(0.0, f64::max);
    let t = thresholds(&NoiseParams::new(SD_RESPONSE, SD_DESIGN, m2, EPS, n, p), None).unwrap();
    let d = vec![SD_DESIGN * SD_DESIGN; p];
    let cfg = SelectorConfig::new(t.mu_eps, t.tau_eps).with_compensation(d.clone());
    let nu = nu_bound(&t, norm1(&theta)).unwrap();
    Protocol { x, theta, d, cfg, nu }
}

#[test]
fn c4_true_parameter_coverage() {
    let reps = 500;
    let pr = protocol(100, 20, 2, 4040);
    let covered = (0..reps)
        .filter(|&r| {
            let dr = gaussian_draw(&pr.x, &pr.theta, SD_DESIGN, SD_RESPONSE, 4041, r);
            SelectorProblem::new(&dr.z, &dr.y, Some(&pr.d))
                .unwrap()
                .feasibility(&pr.theta, &pr.cfg)
                .feasible
        })
        .count();
    let freq = covered as f64 / reps as f64;
    let need = 1.0 - 6.0 * EPS - 0.05;
    let pass = freq >= need;
    report(4, "true parameter in the feasible set", pass, &format!("frequency {freq:.3} over {reps} reps, need >= {need:.2}"));
    assert!(pass);
}

#[test]
fn c5_l1_error_bound_validity() {
    let reps = 500;
    let s = 2;
    let pr = protocol(100, 8, s, 5050);
    let psi = gram(&pr.x).unwrap();
    let k1 = kappa_one(&psi, s, &SensitivityOptions::default()).unwrap();
    assert_eq!(k1.kind, musel::sensitivity::SensitivityKind::Exact);
    let bound = pr.nu / k1.value;
    let mut held = 0;
    let mut worst_ratio: f64 = 0.0;
    for r in 0..reps {
        let dr = gaussian_draw(&pr.x, &pr.theta, SD_DESIGN, SD_RESPONSE, 5051, r);
        let est = solve_compensated_mu(&dr.z, &dr.y, &pr.cfg).unwrap();
        if est.status() != LpStatus::Optimal {
            continue;
        }
        let err: f64 = est.theta.iter().zip(&pr.theta).map(|(a, b)| (a - b).abs()).sum();
        worst_ratio = worst_ratio.max(err / bound);
        held += (err <= bound) as usize;
    }
    let freq = held as f64 / reps as f64;
    let need = 1.0 - 6.0 * EPS - 0.05;
    let pass = freq >= need;
    report(
        5,
        "l1 error within nu / kappa_1(s)",
        pass,
        &format!(
            "frequency {freq:.3} over {reps} reps (need >= {need:.2}); kappa_1 = {:.4}, bound {bound:.4}, worst error/bound {worst_ratio:.3}",
            k1.value
        ),
    );
    assert!(pass);
}

#[test]
fn c6_sensitivity_chain() {
    use musel::bounds::c_q;
    use musel::model::{coherence, normalize_design};
    use musel::re::re_constant_bruteforce;
    use musel::sensitivity::{kappa_q_from_inf, kappa_q_vertex};
    use rand::{Rng, SeedableRng};

    let opts = SensitivityOptions::default();
    let mut violations = Vec::new();
    let mut pairs = 0;
    for seed in 0..30u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6000 + seed);
        let (p, n) = (4, 5 + (seed % 6) as usize);
        let x = DenseMatrix::new(n, p, (0..n * p).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let psi = gram(&normalize_design(&x).unwrap()).unwrap();
        let rho = coherence(&psi).unwrap();
        for s in 1..=2 {
            let sf = s as f64;
            let inf = kappa_inf_exact(&psi, s, &opts).unwrap().value;
            let one = kappa_one(&psi, s, &opts).unwrap().value;
            let mid = kappa_q_vertex(&psi, s, 1.5, &opts).unwrap().value;
            let two = kappa_q_vertex(&psi, s, 2.0, &opts).unwrap().value;
            let re_s = re_constant_bruteforce(&psi, s, 60).unwrap().value;
            let re_2s = re_constant_bruteforce(&psi, 2 * s, 60).unwrap().value;
            let mut check = |ok: bool, what: String| {
                pairs += 1;
                if !ok {
                    violations.push(format!("seed {seed} s {s}: {what}"));
                }
            };
            if rho < 1.0 / (2.0 * sf) {
                check(inf >= 1.0 - 2.0 * rho * sf - 1e-9, format!("k1 {inf}"));
            }
            for (q, k) in [(1.0, one), (1.5, mid), (2.0, two)] {
                check(k >= kappa_q_from_inf(inf, s, q) - 1e-9, format!("k2 q={q}"));
            }
            check(one >= re_s / (4.0 * sf) - 1e-9, format!("k3 {one} vs {re_s}"));
            for (q, k) in [(1.5, mid), (2.0, two)] {
                check(k >= c_q(q).unwrap() * sf.powf(-1.0 / q) * re_2s - 1e-9, format!("k4 q={q}"));
            }
        }
    }
    let id = GramMatrix::identity(5);
    let ident = [
        kappa_inf_exact(&id, 1, &opts).unwrap().value - 1.0,
        kappa_inf_exact(&id, 2, &opts).unwrap().value - 1.0,
        kappa_one(&id, 1, &opts).unwrap().value - 0.5,
        kappa_one(&id, 2, &opts).unwrap().value - 0.25,
    ];
    let ident_err = ident.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let pass = violations.is_empty() && ident_err <= 1e-6;
    report(
        6,
        "sensitivity inequality chain and identity values",
        pass,
        &format!(
            "{pairs} inequalities checked on 30 Grams, {} violated; identity max error {ident_err:.1e} (tolerance 1e-6){}",
            violations.len(),
            violations.first().map(|v| format!("; first: {v}")).unwrap_or_default()
        ),
    );
    assert!(pass);
}

#[test]
fn c7_missing_data_unbiasedness() {
    let (n, p, pi, masks) = (50, 5, 0.1, 10_000u64);
    let x = gen_design(n, p, &mut rng_for(7070, &[0])).unwrap();
    let pis = uniform_pi(pi, p);
    let truth = sigma_true(&x, &pis).unwrap();
    let mut sum = vec![0.0; p];
    let mut sq = vec![0.0; p];
    let (mut pi_sum, mut pi_sq) = (0.0, 0.0);
    for m in 0..masks {
        let masked = apply_mask(&x, &pis, 7071 + m).unwrap();
        let sh = sigma_hat(&masked.z_tilde, &pis).unwrap().sigma_hat_sq;
        for j in 0..p {
            sum[j] += sh[j];
            sq[j] += sh[j] * sh[j];
        }
        let ph = estimate_pi(&masked, PiMode::Pooled)[0];
        pi_sum += ph;
        pi_sq += ph * ph;
    }
    let mf = masks as f64;
    let z_score = |s: f64, s2: f64, target: f64| {
        let mean = s / mf;
        let var = (s2 / mf - mean * mean) * mf / (mf - 1.0);
        (mean - target).abs() / (var / mf).sqrt()
    };
    let sigma_z: Vec<f64> = (0..p).map(|j| z_score(sum[j], sq[j], truth[j])).collect();
    let pi_z = z_score(pi_sum, pi_sq, pi);
    let worst = sigma_z.iter().fold(0.0f64, |m, v| m.max(*v));
    let pass = worst <= 3.0 && pi_z <= 3.0;
    report(
        7,
        "sigma-hat and pi-hat unbiased",
        pass,
        &format!("max |mean - truth| / SE over columns {worst:.2}, pi-hat {pi_z:.2} (limit 3 SE, {masks} masks)"),
    );
    assert!(pass);
}

#[test]
fn c8_reductions_bitwise() {
    let mut failures = Vec::new();

    // δ = 0 MU cell of a simulation against the library Dantzig selector on Z.
    let cfg = SimConfig { reps: 6, delta_list: vec![0.0], seed: 8080, ..SimConfig::preset("reduced").unwrap() };
    let out = run_experiment(&cfg).unwrap();
    for rec in out.records.iter().filter(|r| r.estimator == EstimatorKind::Mu) {
        let x = design_for(&cfg, rec.s, rec.rep).unwrap();
        let data = rep_data(&cfg, x, rec.s, rec.rep).unwrap();
        let z = rescale(&MaskedDesign::observed(data.z_tilde.clone()), &uniform_pi(cfg.pi_star, cfg.p)).unwrap();
        let tau = cfg.tau_rule.tau(&z, cfg.noise_sd);
        let dz = solve_dantzig(&z, &data.y, tau, Domain::NonnegativeOrthant).unwrap();
        let m = metrics(&dz.theta, &data.theta_star, &data.x, cfg.nonzero_threshold);
        if rec.tau.to_bits() != tau.to_bits() || rec.metrics != Some(m) {
            failures.push(format!("sim delta=0 vs Dantzig, s {} rep {}", rec.s, rec.rep));
        }
    }

    // No design noise and zero compensation: every estimator coincides.
    let cfg = SimConfig {
        reps: 6,
        pi_star: 0.0,
        delta_list: vec![0.0, 0.05],
        estimators: vec![EstimatorKind::Mu, EstimatorKind::Cmu, EstimatorKind::Dantzig],
        seed: 8181,
        ..SimConfig::preset("reduced").unwrap()
    };
    let out = run_experiment(&cfg).unwrap();
    let find = |s, rep, est, delta: f64| {
        out.records
            .iter()
            .find(|r| r.s == s && r.rep == rep && r.estimator == est && r.delta == delta)
            .unwrap()
            .metrics
    };
    for s in [1, 2] {
        for rep in 0..cfg.reps {
            for delta in [0.0, 0.05] {
                if find(s, rep, EstimatorKind::Cmu, delta) != find(s, rep, EstimatorKind::Mu, delta) {
                    failures.push(format!("pi=0 CMU vs MU, s {s} rep {rep} delta {delta}"));
                }
            }
            if find(s, rep, EstimatorKind::Mu, 0.0) != find(s, rep, EstimatorKind::Dantzig, 0.0) {
                failures.push(format!("pi=0 MU vs Dantzig, s {s} rep {rep}"));
            }
        }
    }

    // Library level, both domains.
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    for seed in 0..20u64 {
        let (z, y) = common::random_instance(12, 8, 8282 + seed);
        let tau = 0.3 * norm1(SelectorProblem::new(&z, &y, None).unwrap().c()) / 8.0;
        for domain in [Domain::NonnegativeOrthant, Domain::AllReals] {
            let zero = vec![0.0; 8];
            let cmu = solve_compensated_mu(&z, &y, &SelectorConfig::new(0.0, tau).with_compensation(zero.clone()).with_domain(domain)).unwrap();
            let mu = solve_mu_selector(&z, &y, &SelectorConfig::new(0.0, tau).with_domain(domain)).unwrap();
            let dz = solve_dantzig(&z, &y, tau, domain).unwrap();
            if bits(&cmu.theta) != bits(&mu.theta) || bits(&mu.theta) != bits(&dz.theta) {
                failures.push(format!("library seed {seed} {domain:?}"));
            }
            let cmu = solve_compensated_mu(&z, &y, &SelectorConfig::new(0.1, tau).with_compensation(zero).with_domain(domain)).unwrap();
            let mu = solve_mu_selector(&z, &y, &SelectorConfig::new(0.1, tau).with_domain(domain)).unwrap();
            if bits(&cmu.theta) != bits(&mu.theta) {
                failures.push(format!("library mu=0.1 seed {seed} {domain:?}"));
            }
        }
    }

    let pass = failures.is_empty();
    report(
        8,
        "reductions are bitwise",
        pass,
        &if pass { "delta=0 equals Dantzig on Z; zero noise and zero compensation give CMU = MU = Dantzig".into() } else { failures.join("; ") },
    );
    assert!(pass);
}

#[test]
fn c9_determinism_across_workers() {
    let cfg = SimConfig { seed: 9090, ..SimConfig::preset("reduced").unwrap() };
    let render = |threads| {
        let out = run_experiment_with_threads(&cfg, threads).unwrap();
        (table_rows_to_csv(&out.rows), to_json(&out.records))
    };
    let base = render(1);
    let lib_ok = [2, 3, 8].iter().all(|&t| render(t) == base);

    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for t in ["1", "4", "0"] {
        let path = dir.path().join(format!("t{t}.csv"));
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_musel"))
            .args(["simulate", "--preset", "reduced-estimated-pi", "--seed", "11", "--raw", "--markdown", "--out"])
            .arg(&path)
            .env("MUSEL_THREADS", t)
            .status()
            .unwrap();
        assert!(status.success());
        let read = |ext: &str| std::fs::read(path.with_extension(ext)).unwrap();
        files.push((read("csv"), read("raw.json"), read("md")));
    }
    let cli_ok = files.windows(2).all(|w| w[0] == w[1]);
    let pass = lib_ok && cli_ok;
    report(
        9,
        "simulate output identical across worker counts",
        pass,
        &format!("library 1/2/3/8 workers identical: {lib_ok}; CLI MUSEL_THREADS 1/4/0 identical: {cli_ok}"),
    );
    assert!(pass);
}
