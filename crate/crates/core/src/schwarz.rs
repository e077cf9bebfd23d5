//! Vanilla and reduced Schwarz drivers, the whole-domain oracle, and error tracking.
//!
//! Both drivers run Jacobi sweeps on the [`BoundaryState`]: every patch maps
//! its trace to values on its confinement region, then each interior edge is
//! overwritten by its owner's values. The vanilla driver does this with exact
//! local solves. The reduced driver replaces them by `U Σ Vᵀ f`, evaluated
//! only where neighbours read it, and touches no factorization inside the
//! loop. Both finish with one exact solve per patch and a partition-of-unity
//! blend.

use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::decomp::{self, build_pou, BoundaryState, DecompError, DirichletData, Layout, PartitionOfUnity};
use crate::dense::{gemv_acc, Mat};
use crate::grid::{GridFunction, GridSpec, MediaField, MediaKind};
use crate::local_solver::{BoundaryTrace, InteriorField, LocalSolverError, MapKind, PatchOperator};
use crate::lowrank::{dense_svd, rsvd_operator, LowRankError, RsvdConfig, SvdTriple};

/// Iterations used for the reference solution.
pub const REFERENCE_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchwarzError {
    #[error(transparent)]
    Local(#[from] LocalSolverError),
    #[error(transparent)]
    Decomp(#[from] DecompError),
    #[error("patch {patch}: {source}")]
    LowRank {
        patch: usize,
        #[source]
        source: LowRankError,
    },
    #[error("map for patch {patch} was built for a different {component}")]
    FingerprintMismatch { patch: usize, component: &'static str },
    #[error("reduced maps do not match the layout: {0}")]
    MapMismatch(String),
    #[error("reference field has zero norm")]
    ZeroReference,
    #[error("fields live on different node sets")]
    GridMismatch,
}

/// Content hash of the discretization a map belongs to.
///
/// Bytes `0..11` hash the grid, `11..22` the media, `22..32` the layout, so a
/// mismatch can be attributed to one component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fingerprint(pub [u8; 32]);

const FP_SPLIT: [(usize, usize, &str); 3] = [(0, 11, "grid"), (11, 22, "media"), (22, 32, "layout")];

impl Fingerprint {
    pub fn of(grid: &GridSpec, media: &MediaField, layout: &Layout) -> Self {
        let mut g = Sha256::new();
        for v in [grid.lx, grid.ly, grid.h] {
            g.update(v.to_le_bytes());
        }
        let mut m = Sha256::new();
        match media.kind() {
            MediaKind::Oscillatory { epsilon } => {
                m.update([0u8]);
                m.update(epsilon.to_le_bytes());
            }
            MediaKind::Raster(r) => {
                m.update([1u8]);
                m.update((r.ncx as u64).to_le_bytes());
                m.update((r.ncy as u64).to_le_bytes());
                for v in [r.x0, r.y0, r.x1, r.y1].iter().chain(&r.cells) {
                    m.update(v.to_le_bytes());
                }
            }
        }
        let mut l = Sha256::new();
        l.update((layout.n_patches as u64).to_le_bytes());
        for p in 0..layout.n_patches {
            let r = layout.patch_rect(p);
            let c = layout.confine_rect(p);
            for v in [r.i0, r.i1, c.i0, c.i1] {
                l.update((v as u64).to_le_bytes());
            }
        }
        let mut out = [0u8; 32];
        out[..11].copy_from_slice(&g.finalize()[..11]);
        out[11..22].copy_from_slice(&m.finalize()[..11]);
        out[22..].copy_from_slice(&l.finalize()[..10]);
        Fingerprint(out)
    }

    /// First component whose hash segment differs, if any.
    pub fn differing_component(&self, other: &Fingerprint) -> Option<&'static str> {
        FP_SPLIT
            .iter()
            .find(|(a, b, _)| self.0[*a..*b] != other.0[*a..*b])
            .map(|(_, _, name)| *name)
    }
}

/// Everything the drivers need about one problem instance.
#[derive(Debug, Clone)]
pub struct SchwarzContext {
    pub grid: GridSpec,
    pub media: MediaField,
    pub layout: Layout,
    pub pou: PartitionOfUnity,
    pub boundary: DirichletData,
    pub patches: Vec<PatchOperator>,
    pub fingerprint: Fingerprint,
}

impl SchwarzContext {
    /// Assembles and factorizes every patch operator.
    pub fn new(grid: GridSpec, media: MediaField, layout: Layout, boundary: DirichletData) -> Result<Self, SchwarzError> {
        if *layout.grid() != grid || !boundary.matches(&grid) {
            return Err(SchwarzError::GridMismatch);
        }
        media.check_against(&grid).map_err(LocalSolverError::from)?;
        let patches = (0..layout.n_patches)
            .into_par_iter()
            .map(|p| PatchOperator::assemble(p, &grid, &media, layout.patch_rect(p), layout.confine_rect(p)))
            .collect::<Result<Vec<_>, _>>()?;
        let pou = build_pou(&layout);
        let fingerprint = Fingerprint::of(&grid, &media, &layout);
        Ok(SchwarzContext {
            grid,
            media,
            layout,
            pou,
            boundary,
            patches,
            fingerprint,
        })
    }

    /// Same operators, new Dirichlet data.
    pub fn with_boundary(&self, boundary: DirichletData) -> Result<Self, SchwarzError> {
        if !boundary.matches(&self.grid) {
            return Err(SchwarzError::GridMismatch);
        }
        Ok(SchwarzContext {
            boundary,
            ..self.clone()
        })
    }

    pub fn total_solves(&self) -> usize {
        self.patches.iter().map(|p| p.solve_count()).sum()
    }
}

/// Direct banded solve of the discrete problem on all of Ω.
pub fn solve_global(grid: &GridSpec, media: &MediaField, b: &DirichletData) -> Result<GridFunction, SchwarzError> {
    if !b.matches(grid) {
        return Err(SchwarzError::GridMismatch);
    }
    let full = grid.full_rect();
    let op = PatchOperator::assemble(usize::MAX, grid, media, full, full)?;
    let trace = BoundaryTrace {
        patch_id: usize::MAX,
        values: b.values().to_vec(),
    };
    Ok(op.solve_dirichlet(&trace)?)
}

/// `‖u − u_ref‖₂ / ‖u_ref‖₂` over all nodes.
pub fn relative_error(u: &GridFunction, u_ref: &GridFunction) -> Result<f64, SchwarzError> {
    if u.rect() != u_ref.rect() {
        return Err(SchwarzError::GridMismatch);
    }
    let den = crate::dense::norm2(u_ref.values());
    if den == 0.0 {
        return Err(SchwarzError::ZeroReference);
    }
    let num = u
        .values()
        .iter()
        .zip(u_ref.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Vanilla,
    Reduced,
    Global,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub offline_seconds: f64,
    pub online_seconds: f64,
}

/// Exact local solves performed by one run, by phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub loop_solves: usize,
    pub history_solves: usize,
    pub final_solves: usize,
}

/// One row of the convergence record; `iter = t` describes the field built from `f^t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub iter: usize,
    pub rel_error: Option<f64>,
    pub rel_error_oracle: Option<f64>,
    /// `‖f^t − f^{t−1}‖ / ‖f^t‖` over all traces; `None` at `t = 0`.
    pub rel_change: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub method: Method,
    pub iterations: usize,
    pub history: Vec<HistoryEntry>,
    /// Trace change of every performed sweep, tracked even without history.
    pub successive: Vec<f64>,
    pub final_field: GridFunction,
    pub timings: Timings,
    pub stats: SolveStats,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions<'a> {
    /// History is recorded when either reference is given.
    pub reference: Option<&'a GridFunction>,
    pub oracle: Option<&'a GridFunction>,
    /// Stop once the relative trace change drops below this value.
    pub early_exit: Option<f64>,
}

impl RunOptions<'_> {
    fn tracking(&self) -> bool {
        self.reference.is_some() || self.oracle.is_some()
    }

    fn entry(&self, iter: usize, u: &GridFunction, change: Option<f64>) -> Result<HistoryEntry, SchwarzError> {
        Ok(HistoryEntry {
            iter,
            rel_error: self.reference.map(|r| relative_error(u, r)).transpose()?,
            rel_error_oracle: self.oracle.map(|r| relative_error(u, r)).transpose()?,
            rel_change: change,
        })
    }
}

fn trace_change(old: &BoundaryState, new: &BoundaryState) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (a, b) in old.traces.iter().zip(&new.traces) {
        for (x, y) in a.values.iter().zip(&b.values) {
            num += (y - x) * (y - x);
            den += y * y;
        }
    }
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (num / den).sqrt()
    }
}

fn exact_fields(ctx: &SchwarzContext, state: &BoundaryState) -> Result<Vec<GridFunction>, SchwarzError> {
    ctx.patches
        .par_iter()
        .zip(&state.traces)
        .map(|(op, f)| op.solve_dirichlet(f).map_err(SchwarzError::from))
        .collect()
}

fn assemble(ctx: &SchwarzContext, fields: &[GridFunction]) -> Result<GridFunction, SchwarzError> {
    Ok(decomp::assemble_global(&ctx.layout, &ctx.pou, fields)?)
}

/// Jacobi–Schwarz with exact local solves for `t = 0, …, T−1`, then the final blend.
pub fn run_vanilla(ctx: &SchwarzContext, t_max: usize, opts: &RunOptions<'_>) -> Result<RunResult, SchwarzError> {
    let start = Instant::now();
    let solves0 = ctx.total_solves();
    let mut state = decomp::init_state(&ctx.layout, &ctx.boundary)?;
    let mut history = Vec::new();
    let mut successive = Vec::new();
    let mut t = 0;
    let final_fields = loop {
        let fields = exact_fields(ctx, &state)?;
        if opts.tracking() {
            let u = assemble(ctx, &fields)?;
            history.push(opts.entry(t, &u, t.checked_sub(1).map(|s| successive[s]))?);
        }
        let converged = matches!((opts.early_exit, successive.last()), (Some(tol), Some(&c)) if c < tol);
        if t == t_max || converged {
            break fields;
        }
        let confined = ctx
            .patches
            .iter()
            .zip(&fields)
            .map(|(op, u)| op.confine(u))
            .collect::<Result<Vec<InteriorField>, _>>()?;
        let next = decomp::exchange(&ctx.layout, &confined, &state)?;
        successive.push(trace_change(&state, &next));
        state = next;
        t += 1;
    };
    let final_field = assemble(ctx, &final_fields)?;
    let n = ctx.layout.n_patches;
    let total = ctx.total_solves() - solves0;
    Ok(RunResult {
        method: Method::Vanilla,
        iterations: t,
        history,
        successive,
        final_field,
        timings: Timings {
            offline_seconds: 0.0,
            online_seconds: start.elapsed().as_secs_f64(),
        },
        stats: SolveStats {
            loop_solves: total - n,
            history_solves: 0,
            final_solves: n,
        },
    })
}

/// `T = 100` vanilla run, final field.
pub fn reference_solution(ctx: &SchwarzContext) -> Result<GridFunction, SchwarzError> {
    Ok(run_vanilla(ctx, REFERENCE_ITERATIONS, &RunOptions::default())?.final_field)
}

/// Rank-`k` factorization of one patch's confined solution map.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedMap {
    pub patch_id: usize,
    pub triple: SvdTriple,
    pub k: usize,
    pub seed: u64,
    pub fingerprint: Fingerprint,
}

/// Per-patch seed: `seed ⊕ patch_id`.
pub fn patch_seed(seed: u64, patch_id: usize) -> u64 {
    seed ^ patch_id as u64
}

/// Offline stage: randomized SVD of every `S̃_i` via forward and adjoint solves.
pub fn offline_compress(ctx: &SchwarzContext, k: usize, p: usize, seed: u64) -> Result<Vec<ReducedMap>, SchwarzError> {
    ctx.patches
        .par_iter()
        .map(|op| {
            let id = op.patch_id();
            let cfg = RsvdConfig::new(k, p, patch_seed(seed, id));
            // lengths are fixed by rsvd_operator, so the solver calls cannot misalign
            let out = rsvd_operator(
                |f| op.apply_confined(f).expect("sample has boundary length"),
                |g| op.adjoint_confined(g).expect("basis vector has confinement length"),
                op.n_boundary(),
                op.n_confine(),
                &cfg,
            )
            .map_err(|source| SchwarzError::LowRank { patch: id, source })?;
            Ok(ReducedMap {
                patch_id: id,
                triple: out.triple,
                k,
                seed: cfg.seed,
                fingerprint: ctx.fingerprint,
            })
        })
        .collect()
}

/// Per-patch slice of the maps, restricted to the exchanged entries.
#[derive(Debug, Clone)]
struct PlanPatch {
    /// Trace positions rewritten by the exchange, with the `(owner, export slot)` feeding each.
    var_pos: Vec<usize>,
    var_src: Vec<(usize, usize)>,
    /// Row `j` of `V` for each variable position, `k` values each.
    v_rows: Vec<f64>,
    /// `V` with the variable rows zeroed, for the pinned part of the trace.
    v_fixed: Mat,
    /// `(U Σ)` restricted to exported confinement rows, column-major.
    us_exp: Vec<f64>,
    n_exp: usize,
}

/// Trace-extraction data for the online sweep. It depends on the maps and the
/// layout only, so one plan serves any number of boundary conditions.
#[derive(Debug, Clone)]
pub struct OnlinePlan {
    fingerprint: Fingerprint,
    patches: Vec<PlanPatch>,
}

impl OnlinePlan {
    pub fn prepare(ctx: &SchwarzContext, maps: &[ReducedMap]) -> Result<Self, SchwarzError> {
        check_maps(ctx, maps)?;
        let n = ctx.layout.n_patches;
        let mut exports: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut srcs: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        let mut var_pos: Vec<Vec<usize>> = vec![Vec::new(); n];
        for p in 0..n {
            for slot in ctx.layout.exchange_slots(p) {
                let owner = ctx.layout.owner(p, slot.side).expect("validated owner");
                srcs[p].push((owner, exports[owner].len()));
                exports[owner].push(slot.owner_pos);
                var_pos[p].push(slot.trace_pos);
            }
        }
        let patches = (0..n)
            .map(|p| {
                let t = &maps[p].triple;
                let k = t.rank();
                let mut v_fixed = t.v.clone();
                let mut v_rows = vec![0.0; var_pos[p].len() * k];
                for l in 0..k {
                    let col = v_fixed.col_mut(l);
                    for (jj, &j) in var_pos[p].iter().enumerate() {
                        v_rows[jj * k + l] = col[j];
                        col[j] = 0.0;
                    }
                }
                let n_exp = exports[p].len();
                let mut us_exp = Vec::with_capacity(n_exp * k);
                for l in 0..k {
                    let col = t.u.col(l);
                    us_exp.extend(exports[p].iter().map(|&r| col[r] * t.s[l]));
                }
                PlanPatch {
                    var_pos: std::mem::take(&mut var_pos[p]),
                    var_src: std::mem::take(&mut srcs[p]),
                    v_rows,
                    v_fixed,
                    us_exp,
                    n_exp,
                }
            })
            .collect();
        Ok(OnlinePlan {
            fingerprint: ctx.fingerprint,
            patches,
        })
    }
}

fn check_maps(ctx: &SchwarzContext, maps: &[ReducedMap]) -> Result<(), SchwarzError> {
    if maps.len() != ctx.layout.n_patches {
        return Err(SchwarzError::MapMismatch(format!("{} maps for {} patches", maps.len(), ctx.layout.n_patches)));
    }
    for (p, (m, op)) in maps.iter().zip(&ctx.patches).enumerate() {
        if let Some(component) = m.fingerprint.differing_component(&ctx.fingerprint) {
            return Err(SchwarzError::FingerprintMismatch { patch: m.patch_id, component });
        }
        let t = &m.triple;
        let shape_ok = m.patch_id == p
            && t.u.rows() == op.n_confine()
            && t.v.rows() == op.n_boundary()
            && t.u.cols() == t.s.len()
            && t.v.cols() == t.s.len();
        if !shape_ok {
            return Err(SchwarzError::MapMismatch(format!(
                "map {p}: patch {} with U {}×{}, V {}×{}; patch needs {}×k and {}×k",
                m.patch_id,
                t.u.rows(),
                t.u.cols(),
                t.v.rows(),
                t.v.cols(),
                op.n_confine(),
                op.n_boundary()
            )));
        }
    }
    Ok(())
}

/// Online stage: prepares the plan, then runs [`run_online`]. Timings cover both.
pub fn run_reduced(ctx: &SchwarzContext, maps: &[ReducedMap], t_max: usize, opts: &RunOptions<'_>) -> Result<RunResult, SchwarzError> {
    let start = Instant::now();
    let plan = OnlinePlan::prepare(ctx, maps)?;
    let mut r = run_online(ctx, &plan, t_max, opts)?;
    r.timings.online_seconds = start.elapsed().as_secs_f64();
    Ok(r)
}

/// `T` sweeps with the compressed maps, then exact solves and the blend.
/// No factorization is touched inside the sweep loop.
pub fn run_online(ctx: &SchwarzContext, plan: &OnlinePlan, t_max: usize, opts: &RunOptions<'_>) -> Result<RunResult, SchwarzError> {
    let start = Instant::now();
    if let Some(component) = plan.fingerprint.differing_component(&ctx.fingerprint) {
        return Err(SchwarzError::FingerprintMismatch { patch: 0, component });
    }
    let mut state = decomp::init_state(&ctx.layout, &ctx.boundary)?;
    let c_fixed: Vec<Vec<f64>> = plan
        .patches
        .iter()
        .zip(&state.traces)
        .map(|(op, f)| op.v_fixed.tr_matvec(&f.values))
        .collect();
    let mut vars: Vec<Vec<f64>> = plan
        .patches
        .iter()
        .zip(&state.traces)
        .map(|(op, f)| op.var_pos.iter().map(|&j| f.values[j]).collect())
        .collect();
    let mut exports: Vec<Vec<f64>> = plan.patches.iter().map(|op| vec![0.0; op.n_exp]).collect();
    let mut c = Vec::new();

    let mut stats = SolveStats::default();
    let mut history = Vec::new();
    let mut successive = Vec::new();
    let mut t = 0;
    loop {
        if opts.tracking() {
            let before = ctx.total_solves();
            let u = assemble(ctx, &exact_fields(ctx, &state)?)?;
            stats.history_solves += ctx.total_solves() - before;
            history.push(opts.entry(t, &u, t.checked_sub(1).map(|s| successive[s]))?);
        }
        let converged = matches!((opts.early_exit, successive.last()), (Some(tol), Some(&c)) if c < tol);
        if t == t_max || converged {
            break;
        }
        let before = ctx.total_solves();
        for (p, op) in plan.patches.iter().enumerate() {
            c.clear();
            c.extend_from_slice(&c_fixed[p]);
            gemv_acc(&op.v_rows, &vars[p], &mut c);
            let out = &mut exports[p];
            out.iter_mut().for_each(|v| *v = 0.0);
            gemv_acc(&op.us_exp, &c, out);
        }
        let (mut num, mut den) = (0.0, 0.0);
        for (p, op) in plan.patches.iter().enumerate() {
            for (v, &(owner, slot)) in vars[p].iter_mut().zip(&op.var_src) {
                let new = exports[owner][slot];
                num += (new - *v) * (new - *v);
                *v = new;
            }
            let trace = &mut state.traces[p].values;
            for (&j, &v) in op.var_pos.iter().zip(&vars[p]) {
                trace[j] = v;
            }
            den += trace.iter().map(|x| x * x).sum::<f64>();
        }
        state.iteration += 1;
        stats.loop_solves += ctx.total_solves() - before;
        successive.push(if den == 0.0 {
            if num == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (num / den).sqrt()
        });
        t += 1;
    }
    let before = ctx.total_solves();
    let final_field = assemble(ctx, &exact_fields(ctx, &state)?)?;
    stats.final_solves = ctx.total_solves() - before;
    Ok(RunResult {
        method: Method::Reduced,
        iterations: t,
        history,
        successive,
        final_field,
        timings: Timings {
            offline_seconds: 0.0,
            online_seconds: start.elapsed().as_secs_f64(),
        },
        stats,
    })
}

/// Singular values of the full solution map `S`, the confined map `S̃`,
/// and the boundary-to-boundary map `A` of one patch.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectra {
    pub s_full: Vec<f64>,
    pub s_confined: Vec<f64>,
    pub s_edge: Vec<f64>,
}

/// Confinement positions of `patch` that neighbours read.
pub fn edge_rows(ctx: &SchwarzContext, patch: usize) -> Vec<usize> {
    let mut rows = ctx.layout.exported_positions(patch);
    rows.sort_unstable();
    rows.dedup();
    rows
}

pub fn spectrum(ctx: &SchwarzContext, patch: usize) -> Result<Spectra, SchwarzError> {
    let op = ctx.patches.get(patch).ok_or_else(|| {
        SchwarzError::MapMismatch(format!("patch {patch} out of range 0..{}", ctx.layout.n_patches))
    })?;
    let rows = edge_rows(ctx, patch);
    let svals = |m: Mat| -> Result<Vec<f64>, SchwarzError> {
        dense_svd(&m)
            .map(|t| t.s)
            .map_err(|source| SchwarzError::LowRank { patch, source })
    };
    let s_full = svals(op.materialize(MapKind::Solution)?)?;
    let s_confined = svals(op.materialize(MapKind::Confined)?)?;
    let s_edge = if rows.is_empty() {
        Vec::new()
    } else {
        svals(op.materialize(MapKind::Restricted(&rows))?)?
    };
    Ok(Spectra {
        s_full,
        s_confined,
        s_edge,
    })
}
