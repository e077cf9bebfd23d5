//! Acceptance gate. Every criterion runs, prints one status line, and the test
//! fails at the end if any criterion failed.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use reduced_schwarz::dense::{dot, norm2, Mat};
use reduced_schwarz::lowrank::{dense_svd, gaussian_matrix, qr_orthonormalize, rsvd_matrix, RsvdConfig};
use reduced_schwarz::schwarz::{
    offline_compress, relative_error, run_reduced, run_vanilla, solve_global, spectrum, RunOptions, SchwarzContext,
    REFERENCE_ITERATIONS,
};
use reduced_schwarz_cli::commands::cmd_bench;
use reduced_schwarz_cli::{strip_experiment, Setup};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

struct Fixture {
    setup: Setup,
    ctx: SchwarzContext,
    reference: reduced_schwarz::grid::GridFunction,
    ctx_built: Duration,
    reference_built: Duration,
}

fn fixture() -> Fixture {
    let setup = strip_experiment().validate(None).unwrap();
    let start = Instant::now();
    let ctx = setup.context().unwrap();
    let ctx_built = start.elapsed();
    let start = Instant::now();
    let reference = run_vanilla(&ctx, REFERENCE_ITERATIONS, &RunOptions::default()).unwrap().final_field;
    let reference_built = start.elapsed();
    Fixture {
        setup,
        ctx,
        reference,
        ctx_built,
        reference_built,
    }
}

fn reduced_error(fx: &Fixture, k: usize, t: usize) -> f64 {
    let rs = fx.setup.config.rsvd;
    let maps = offline_compress(&fx.ctx, k, rs.p, rs.seed).unwrap();
    let r = run_reduced(&fx.ctx, &maps, t, &RunOptions::default()).unwrap();
    relative_error(&r.final_field, &fx.reference).unwrap()
}

fn convergence(fx: &Fixture) -> Outcome {
    let rs = fx.setup.config.rsvd;
    let start = Instant::now();
    let maps = offline_compress(&fx.ctx, rs.k, rs.p, rs.seed).unwrap();
    let r = run_reduced(&fx.ctx, &maps, 50, &RunOptions::default()).unwrap();
    let elapsed = start.elapsed() + fx.ctx_built + fx.reference_built;
    let err = relative_error(&r.final_field, &fx.reference).unwrap();
    let pass = err <= 5e-5 && elapsed <= Duration::from_secs(300);
    outcome(pass, format!("k=70 p=10 T=50 rel_error {err:.3e} (≤ 5e-5), {:.2} s (≤ 300 s)", elapsed.as_secs_f64()))
}

fn saturation(fx: &Fixture) -> Outcome {
    let ks = [40, 70, 100, 130];
    let errs: Vec<f64> = ks.iter().map(|&k| reduced_error(fx, k, 50)).collect();
    let pass = errs.windows(2).all(|w| w[1] < w[0]);
    let list: Vec<String> = ks.iter().zip(&errs).map(|(k, e)| format!("k={k}: {e:.3e}")).collect();
    outcome(pass, format!("T=50 errors {}", list.join(", ")))
}

fn exponential_decay(fx: &Fixture) -> Outcome {
    let opts = RunOptions {
        reference: Some(&fx.reference),
        ..Default::default()
    };
    let r = run_vanilla(&fx.ctx, 40, &opts).unwrap();
    let pts: Vec<(f64, f64)> = r.history[5..=40]
        .iter()
        .map(|h| (h.iter as f64, h.rel_error.unwrap().log10()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = sxy * sxy / (sxx * syy);
    outcome(r2 >= 0.98 && slope < 0.0, format!("log10 error fit on t∈[5,40]: slope {slope:.4}, R² {r2:.5} (≥ 0.98)"))
}

// First index where σ_k(S̃)/σ_1(S̃) drops below 1e-3, and both ratios there.
const CROSSOVER_K: usize = 64;
const CROSSOVER_CONFINED: f64 = 6.134764543673387e-4;
const CROSSOVER_FULL: f64 = 2.7739131659478505e-1;

fn spectra_shape(fx: &Fixture) -> Outcome {
    let start = Instant::now();
    let s = spectrum(&fx.ctx, 3).unwrap();
    let elapsed = start.elapsed();
    let nonincreasing = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0]);
    let monotone = nonincreasing(&s.s_full) && nonincreasing(&s.s_confined) && nonincreasing(&s.s_edge);
    let ratio = |v: &[f64], k: usize| v[k - 1] / v[0];
    let hit = (1..=80).find(|&k| ratio(&s.s_confined, k) < 1e-3);
    let separated = hit.is_some_and(|k| ratio(&s.s_full, k) > 1e-3);
    let frozen = hit == Some(CROSSOVER_K)
        && (ratio(&s.s_confined, CROSSOVER_K) / CROSSOVER_CONFINED - 1.0).abs() < 1e-6
        && (ratio(&s.s_full, CROSSOVER_K) / CROSSOVER_FULL - 1.0).abs() < 1e-6;
    let pass = monotone && separated && frozen && elapsed <= Duration::from_secs(120);
    let detail = match hit {
        Some(k) => format!(
            "patch 3: nonincreasing {monotone}, S̃ ratio {:.4e} at k={k} while S ratio {:.4e}, matches frozen values {frozen}, {:.2} s",
            ratio(&s.s_confined, k),
            ratio(&s.s_full, k),
            elapsed.as_secs_f64()
        ),
        None => format!("patch 3: S̃ ratio never below 1e-3 for k ≤ 80 (σ80/σ1 = {:.3e})", ratio(&s.s_confined, 80)),
    };
    outcome(pass, detail)
}

fn adjoint_exactness(fx: &Fixture) -> Outcome {
    let mut worst = 0.0f64;
    for (p, op) in fx.ctx.patches.iter().enumerate() {
        let (nb, nc) = (op.n_boundary(), op.n_confine());
        // ‖S̃‖ by power iteration on S̃ᵀS̃
        let mut x = gaussian_matrix(nb, 1, 900 + p as u64).into_col_major();
        let mut est = 0.0;
        for _ in 0..30 {
            let y = op.apply_confined(&x).unwrap();
            let z = op.adjoint_confined(&y).unwrap();
            est = norm2(&y) / norm2(&x);
            let nz = norm2(&z);
            x = z.iter().map(|v| v / nz).collect();
        }
        let f = gaussian_matrix(nb, 20, 1000 + p as u64);
        let g = gaussian_matrix(nc, 20, 2000 + p as u64);
        for j in 0..20 {
            let (f, g) = (f.col(j), g.col(j));
            let sf = op.apply_confined(f).unwrap();
            let stg = op.adjoint_confined(g).unwrap();
            let defect = (dot(g, &sf) - dot(&stg, f)).abs();
            worst = worst.max(defect / (norm2(f) * norm2(g) * est));
        }
    }
    outcome(worst <= 1e-10, format!("worst scaled defect {worst:.3e} over 13 patches × 20 probes (≤ 1e-10)"))
}

fn rsvd_bound() -> Outcome {
    let n = 200;
    let u = qr_orthonormalize(&gaussian_matrix(n, n, 11)).unwrap();
    let v = qr_orthonormalize(&gaussian_matrix(n, n, 12)).unwrap();
    let mut us = u.clone();
    let sigma: Vec<f64> = (1..=n).map(|j| 0.5f64.powi(j as i32)).collect();
    us.scale_columns(&sigma);
    let a = us.matmul(&v.transpose());
    let mut total = 0.0;
    for seed in 0..20 {
        let out = rsvd_matrix(&a, &RsvdConfig::new(20, 10, seed)).unwrap();
        let resid: Mat = a.sub(&out.triple.reconstruct());
        total += dense_svd(&resid).unwrap().s[0];
    }
    let mean = total / 20.0;
    let bound = (1.0 + 4.0 * (2.0 * 200.0 / 19.0f64).sqrt()) * sigma[20];
    outcome(mean <= bound, format!("mean ‖A − UΣVᵀ‖₂ {mean:.3e} over 20 seeds (≤ {bound:.3e})"))
}

fn offline_online_split(fx: &Fixture) -> Outcome {
    let rs = fx.setup.config.rsvd;
    let maps = offline_compress(&fx.ctx, rs.k, rs.p, rs.seed).unwrap();
    let r = run_reduced(&fx.ctx, &maps, 50, &RunOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let rows = cmd_bench(&fx.setup, &[40, 70, 100, 130], 5, &dir.path().join("bench.csv")).unwrap();
    let vanilla = rows.iter().find(|r| r.k.is_none()).unwrap().total_s();
    let ratios: Vec<(usize, f64)> = rows.iter().filter_map(|r| r.k.map(|k| (k, vanilla / r.online_s))).collect();
    let pass = r.stats.loop_solves == 0 && ratios.iter().all(|&(_, q)| q >= 50.0);
    let list: Vec<String> = ratios.iter().map(|(k, q)| format!("k={k}: {q:.1}×")).collect();
    outcome(
        pass,
        format!(
            "loop solves {} (= 0), vanilla {vanilla:.4} s vs online: {} (≥ 50×)",
            r.stats.loop_solves,
            list.join(", ")
        ),
    )
}

fn oracle_cross_check(fx: &Fixture) -> Outcome {
    let global = solve_global(&fx.ctx.grid, &fx.ctx.media, &fx.ctx.boundary).unwrap();
    let err = relative_error(&fx.reference, &global).unwrap();
    outcome(err <= 1e-8, format!("vanilla T=100 vs direct solve {err:.3e} (≤ 1e-8)"))
}

fn run_solver(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_solver")).args(args).output().unwrap();
    assert!(out.status.success(), "solver {args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn bench_numbers(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            vec![rec[0].to_string(), rec[1].to_string(), rec[5].to_string()]
        })
        .collect()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("strip.json");
    std::fs::write(&cfg, serde_json::to_string_pretty(&strip_experiment()).unwrap()).unwrap();
    let c = cfg.to_str().unwrap();
    let p = |name: String| d.join(name).to_str().unwrap().to_string();

    let mut files = Vec::new();
    for run in 0..2 {
        let archive = p(format!("maps{run}.bin"));
        run_solver(&["spectrum", "--config", c, "--out", &p(format!("spec{run}.csv"))]);
        run_solver(&["offline", "--config", c, "--archive", &archive]);
        run_solver(&["online", "--config", c, "--archive", &archive, "--out", &p(format!("on{run}"))]);
        run_solver(&["vanilla", "--config", c, "--out", &p(format!("van{run}"))]);
        run_solver(&["solution", "--config", c, "--out", &p(format!("sol{run}.csv"))]);
        run_solver(&["bench", "--config", c, "--out", &p(format!("bench{run}.csv")), "--ranks", "40,70"]);
        files.push([
            format!("spec{run}.csv"),
            format!("maps{run}.bin"),
            format!("on{run}_field.csv"),
            format!("on{run}_history.csv"),
            format!("van{run}_field.csv"),
            format!("van{run}_history.csv"),
            format!("sol{run}.csv"),
        ]);
    }
    let mut differing = Vec::new();
    for (a, b) in files[0].iter().zip(&files[1]) {
        if std::fs::read(d.join(a)).unwrap() != std::fs::read(d.join(b)).unwrap() {
            differing.push(a.clone());
        }
    }
    if bench_numbers(&d.join("bench0.csv")) != bench_numbers(&d.join("bench1.csv")) {
        differing.push("bench0.csv".into());
    }
    let detail = if differing.is_empty() {
        "spectrum, offline, online, vanilla, solution, bench outputs identical across two runs".to_string()
    } else {
        format!("outputs differ: {}", differing.join(", "))
    };
    outcome(differing.is_empty(), detail)
}

#[test]
fn acceptance() {
    let fx = fixture();
    let results = [
        (1, convergence(&fx)),
        (2, saturation(&fx)),
        (3, exponential_decay(&fx)),
        (4, spectra_shape(&fx)),
        (5, adjoint_exactness(&fx)),
        (6, rsvd_bound()),
        (7, offline_online_split(&fx)),
        (8, oracle_cross_check(&fx)),
        (9, determinism()),
    ];
    println!();
    for (n, o) in &results {
        println!("criterion {n}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed: Vec<usize> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
