//! One function per subcommand. Each writes its artifacts and returns a summary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use reduced_schwarz::grid::GridFunction;
use reduced_schwarz::schwarz::{
    offline_compress, reference_solution, relative_error, run_online, run_reduced, run_vanilla, solve_global, spectrum,
    OnlinePlan, RunOptions, RunResult, SchwarzContext, Spectra,
};

use crate::archive;
use crate::config::{RunMethod, Setup};
use crate::error::CliError;
use crate::output::{fmt_f64, with_suffix, write_csv, write_field};

pub const SPECTRUM_HEADER: [&str; 7] = [
    "index",
    "sigma_S",
    "sigma_Sconf",
    "sigma_A",
    "sigma_S_norm",
    "sigma_Sconf_norm",
    "sigma_A_norm",
];
pub const HISTORY_HEADER: [&str; 4] = ["iter", "rel_error", "rel_change", "rel_error_global"];
pub const BENCH_HEADER: [&str; 6] = ["method", "k", "offline_s", "online_s", "total_s", "final_rel_error"];

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub spectra: Spectra,
    pub rows: usize,
}

pub fn cmd_spectrum(setup: &Setup, patch: usize, out: &Path) -> Result<SpectrumReport, CliError> {
    let n = setup.layout.n_patches;
    if patch >= n {
        return Err(CliError::Config(format!("--patch {patch}: valid patch ids are 0..={}", n - 1)));
    }
    let ctx = setup.context()?;
    let s = spectrum(&ctx, patch)?;
    let rows = s.s_full.len().max(s.s_confined.len()).max(s.s_edge.len());
    let norm = |v: &[f64], i: usize| v.get(i).map(|x| x / v[0]);
    let data = (0..rows).map(|i| {
        vec![
            (i + 1).to_string(),
            fmt_f64(s.s_full.get(i).copied()),
            fmt_f64(s.s_confined.get(i).copied()),
            fmt_f64(s.s_edge.get(i).copied()),
            fmt_f64(norm(&s.s_full, i)),
            fmt_f64(norm(&s.s_confined, i)),
            fmt_f64(norm(&s.s_edge, i)),
        ]
    });
    write_csv(out, &SPECTRUM_HEADER, data)?;
    Ok(SpectrumReport { spectra: s, rows })
}

#[derive(Debug, Clone)]
pub struct OfflineReport {
    pub seconds: f64,
    pub n_maps: usize,
}

pub fn cmd_offline(setup: &Setup, archive_path: &Path) -> Result<OfflineReport, CliError> {
    let r = setup.config.rsvd;
    setup.check_rank(r.k, r.p, "rsvd")?;
    let start = Instant::now();
    let ctx = setup.context()?;
    let maps = offline_compress(&ctx, r.k, r.p, r.seed)?;
    let seconds = start.elapsed().as_secs_f64();
    archive::save(archive_path, &maps)?;
    Ok(OfflineReport {
        seconds,
        n_maps: maps.len(),
    })
}

/// Outcome of a single solver run, with the files it produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub result: RunResult,
    pub final_rel_error: f64,
    pub final_rel_error_global: f64,
    pub files: Vec<PathBuf>,
}

struct References {
    reference: GridFunction,
    global: GridFunction,
}

fn references(ctx: &SchwarzContext) -> Result<References, CliError> {
    Ok(References {
        reference: reference_solution(ctx)?,
        global: solve_global(&ctx.grid, &ctx.media, &ctx.boundary)?,
    })
}

fn finish_run(setup: &Setup, result: RunResult, refs: &References, prefix: &Path) -> Result<RunReport, CliError> {
    let mut files = vec![with_suffix(prefix, "field")];
    write_field(&files[0], &setup.grid, &result.final_field)?;
    if setup.config.run.track_history {
        let path = with_suffix(prefix, "history");
        let rows = result.history.iter().map(|h| {
            vec![
                h.iter.to_string(),
                fmt_f64(h.rel_error),
                fmt_f64(h.rel_change),
                fmt_f64(h.rel_error_oracle),
            ]
        });
        write_csv(&path, &HISTORY_HEADER, rows)?;
        files.push(path);
    }
    Ok(RunReport {
        final_rel_error: relative_error(&result.final_field, &refs.reference)?,
        final_rel_error_global: relative_error(&result.final_field, &refs.global)?,
        result,
        files,
    })
}

fn run_opts<'a>(setup: &Setup, refs: &'a References) -> RunOptions<'a> {
    let track = setup.config.run.track_history;
    RunOptions {
        reference: track.then_some(&refs.reference),
        oracle: track.then_some(&refs.global),
        early_exit: None,
    }
}

pub fn cmd_online(setup: &Setup, archive_path: &Path, prefix: &Path) -> Result<RunReport, CliError> {
    let maps = archive::load(archive_path)?;
    let ctx = setup.context()?;
    let refs = references(&ctx)?;
    let result = run_reduced(&ctx, &maps, setup.config.run.t, &run_opts(setup, &refs))?;
    finish_run(setup, result, &refs, prefix)
}

pub fn cmd_vanilla(setup: &Setup, prefix: &Path) -> Result<RunReport, CliError> {
    let ctx = setup.context()?;
    let refs = references(&ctx)?;
    let result = run_vanilla(&ctx, setup.config.run.t, &run_opts(setup, &refs))?;
    finish_run(setup, result, &refs, prefix)
}

/// Runs the configured method and writes only the global field.
pub fn cmd_solution(setup: &Setup, out: &Path, archive_path: Option<&Path>) -> Result<GridFunction, CliError> {
    let ctx = setup.context()?;
    let t = setup.config.run.t;
    let result = match setup.config.run.method {
        RunMethod::Vanilla => run_vanilla(&ctx, t, &RunOptions::default())?,
        RunMethod::Reduced => {
            let maps = match archive_path {
                Some(p) => archive::load(p)?,
                None => {
                    let r = setup.config.rsvd;
                    setup.check_rank(r.k, r.p, "rsvd")?;
                    offline_compress(&ctx, r.k, r.p, r.seed)?
                }
            };
            run_reduced(&ctx, &maps, t, &RunOptions::default())?
        }
    };
    write_field(out, &setup.grid, &result.final_field)?;
    Ok(result.final_field)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    /// `None` for the vanilla row.
    pub k: Option<usize>,
    pub offline_s: f64,
    pub online_s: f64,
    pub final_rel_error: f64,
}

impl BenchRow {
    pub fn total_s(&self) -> f64 {
        self.offline_s + self.online_s
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Times offline and online stages for each rank plus one vanilla run, all at
/// the configured `T`. Vanilla has no offline stage, so its assembly and
/// factorization count as online time. Timings are medians over `repeat` runs.
pub fn cmd_bench(setup: &Setup, ranks: &[usize], repeat: usize, out: &Path) -> Result<Vec<BenchRow>, CliError> {
    let repeat = repeat.max(1);
    let p = setup.config.rsvd.p;
    for &k in ranks {
        setup.check_rank(k, p, "--ranks")?;
    }
    let t = setup.config.run.t;
    let quiet = RunOptions::default();
    let reference = reference_solution(&setup.context()?)?;

    let mut rows = Vec::new();
    for &k in ranks {
        let (mut off, mut on) = (Vec::new(), Vec::new());
        let mut err = f64::NAN;
        for _ in 0..repeat {
            let start = Instant::now();
            let ctx = setup.context()?;
            let maps = offline_compress(&ctx, k, p, setup.config.rsvd.seed)?;
            let plan = OnlinePlan::prepare(&ctx, &maps)?;
            off.push(start.elapsed().as_secs_f64());
            let r = run_online(&ctx, &plan, t, &quiet)?;
            on.push(r.timings.online_seconds);
            err = relative_error(&r.final_field, &reference)?;
        }
        rows.push(BenchRow {
            k: Some(k),
            offline_s: median(off),
            online_s: median(on),
            final_rel_error: err,
        });
    }
    let mut van = Vec::new();
    let mut err = f64::NAN;
    for _ in 0..repeat {
        let start = Instant::now();
        let ctx = setup.context()?;
        let r = run_vanilla(&ctx, t, &quiet)?;
        van.push(start.elapsed().as_secs_f64());
        err = relative_error(&r.final_field, &reference)?;
    }
    rows.push(BenchRow {
        k: None,
        offline_s: 0.0,
        online_s: median(van),
        final_rel_error: err,
    });

    let data = rows.iter().map(|r| {
        vec![
            if r.k.is_some() { "reduced" } else { "vanilla" }.to_string(),
            r.k.map(|k| k.to_string()).unwrap_or_default(),
            fmt_f64(Some(r.offline_s)),
            fmt_f64(Some(r.online_s)),
            fmt_f64(Some(r.total_s())),
            fmt_f64(Some(r.final_rel_error)),
        ]
    });
    write_csv(out, &BENCH_HEADER, data)?;
    Ok(rows)
}
