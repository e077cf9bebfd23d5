//! Overlapping strip decomposition and the data exchanged between strips.
//!
//! Patch `i` covers `[i·stride, i·stride + width] × [0, ly]`. Adjacent strips
//! share a band of width `overlap = width − stride`; non-adjacent strips are
//! disjoint. The interior region of a patch is `[x_lo + overlap, x_hi − overlap]`,
//! end patches included, so it keeps distance `overlap` from both lateral
//! sides of the patch. Each interior-edge column of a
//! patch then lies exactly on the boundary of the neighbour's interior region,
//! at distance `overlap` from that neighbour's edge, and that neighbour owns
//! the edge: its confined field supplies the values there during exchange.

use std::collections::HashSet;
use std::path::Path;

use thiserror::Error;

use crate::grid::{GridFunction, GridSpec, NodeRect};
use crate::local_solver::{BoundaryTrace, InteriorField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecompError {
    #[error("non-conforming layout: {0}")]
    NonConformingLayout(String),
    #[error("patch {patch}: interior {side:?} edge has no owner")]
    MissingOwner { patch: usize, side: Side },
    #[error("misaligned input: {0}")]
    Misaligned(String),
    #[error("boundary data: {0}")]
    BoundaryData(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// One trace entry rewritten by [`exchange`]: `trace[trace_pos] ← field_owner[owner_pos]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExchangeSlot {
    pub trace_pos: usize,
    pub side: Side,
    pub owner_pos: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    grid: GridSpec,
    pub n_patches: usize,
    pub intervals: Vec<(f64, f64)>,
    pub overlap: f64,
    pub neighbor_sets: Vec<Vec<usize>>,
    pub interior_intervals: Vec<(f64, f64)>,
    /// `[left, right]` owner of each patch side; `None` on the physical boundary.
    pub edge_owner: Vec<[Option<usize>; 2]>,
    node_intervals: Vec<(usize, usize)>,
    interior_nodes: Vec<(usize, usize)>,
    overlap_nodes: usize,
    slots: Vec<Vec<ExchangeSlot>>,
}

fn nodes_of(grid: &GridSpec, len: f64, what: &str) -> Result<usize, DecompError> {
    crate::grid::integer_ratio(len, grid.h).ok_or_else(|| {
        DecompError::NonConformingLayout(format!("{what} {len} is not a multiple of h = {}", grid.h))
    })
}

/// Builds the strip layout; `stride` is ignored for a single patch.
pub fn build_layout(
    grid: &GridSpec,
    n_patches: usize,
    patch_width: f64,
    stride: Option<f64>,
) -> Result<Layout, DecompError> {
    let bad = |m: String| Err(DecompError::NonConformingLayout(m));
    if n_patches == 0 {
        return bad("need at least one patch".into());
    }
    let width = nodes_of(grid, patch_width, "patch width")?;
    let span = grid.nx - 1;
    let step = if n_patches == 1 {
        0
    } else {
        let s = stride.ok_or_else(|| DecompError::NonConformingLayout("stride required for several patches".into()))?;
        nodes_of(grid, s, "stride")?
    };
    if width < 2 {
        return bad(format!("patch width {patch_width} leaves no interior nodes"));
    }
    if (n_patches - 1) * step + width != span {
        return bad(format!(
            "({} − 1)·{} + {} = {} does not cover lx = {}",
            n_patches,
            stride.unwrap_or(0.0),
            patch_width,
            ((n_patches - 1) * step + width) as f64 * grid.h,
            grid.lx
        ));
    }
    let overlap_nodes = if n_patches == 1 { 0 } else { width.saturating_sub(step) };
    if n_patches > 1 {
        if step >= width {
            return bad(format!("stride {} leaves no overlap", step as f64 * grid.h));
        }
        if n_patches > 2 && 2 * step <= width {
            return bad("overlap bands of non-adjacent patches meet; need width < 2·stride".into());
        }
    }

    let node_intervals: Vec<(usize, usize)> = (0..n_patches).map(|i| (i * step, i * step + width)).collect();
    let interior_nodes: Vec<(usize, usize)> = node_intervals
        .iter()
        .map(|&(lo, hi)| (lo + overlap_nodes, hi - overlap_nodes))
        .collect();
    let neighbor_sets: Vec<Vec<usize>> = (0..n_patches)
        .map(|i| {
            (0..n_patches)
                .filter(|&j| {
                    j != i && {
                        let (a, b) = node_intervals[i];
                        let (c, d) = node_intervals[j];
                        a.max(c) < b.min(d)
                    }
                })
                .collect()
        })
        .collect();

    let owner_of = |patch: usize, col: usize| -> Option<usize> {
        let mut owners = neighbor_sets[patch].iter().copied().filter(|&n| {
            let (lo, hi) = node_intervals[n];
            let (a, b) = interior_nodes[n];
            lo < col && col < hi && a <= col && col <= b
        });
        let first = owners.next();
        if owners.next().is_some() {
            None
        } else {
            first
        }
    };
    let mut edge_owner = Vec::with_capacity(n_patches);
    for (p, &(lo, hi)) in node_intervals.iter().enumerate() {
        let left = if lo == 0 { None } else { Some(owner_of(p, lo).ok_or(DecompError::MissingOwner { patch: p, side: Side::Left })?) };
        let right = if hi == span { None } else { Some(owner_of(p, hi).ok_or(DecompError::MissingOwner { patch: p, side: Side::Right })?) };
        edge_owner.push([left, right]);
    }

    let to_x = |n: usize| grid.x(n);
    let mut layout = Layout {
        grid: *grid,
        n_patches,
        intervals: node_intervals.iter().map(|&(a, b)| (to_x(a), to_x(b))).collect(),
        overlap: overlap_nodes as f64 * grid.h,
        neighbor_sets,
        interior_intervals: interior_nodes.iter().map(|&(a, b)| (to_x(a), to_x(b))).collect(),
        edge_owner,
        node_intervals,
        interior_nodes,
        overlap_nodes,
        slots: Vec::new(),
    };
    layout.slots = (0..n_patches).map(|p| layout.build_slots(p)).collect();
    Ok(layout)
}

impl Layout {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn patch_rect(&self, p: usize) -> NodeRect {
        let (a, b) = self.node_intervals[p];
        NodeRect::new(a, b, 0, self.grid.ny - 1)
    }

    pub fn confine_rect(&self, p: usize) -> NodeRect {
        let (a, b) = self.interior_nodes[p];
        NodeRect::new(a, b, 0, self.grid.ny - 1)
    }

    pub fn overlap_nodes(&self) -> usize {
        self.overlap_nodes
    }

    pub fn owner(&self, patch: usize, side: Side) -> Option<usize> {
        self.edge_owner[patch][side as usize]
    }

    /// Trace entries of `patch` that are rewritten during exchange.
    pub fn exchange_slots(&self, patch: usize) -> &[ExchangeSlot] {
        &self.slots[patch]
    }

    /// Confinement positions of `owner` read by its neighbours, in exchange order.
    pub fn exported_positions(&self, owner: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for p in 0..self.n_patches {
            for s in &self.slots[p] {
                if self.owner(p, s.side) == Some(owner) {
                    out.push(s.owner_pos);
                }
            }
        }
        out
    }

    fn build_slots(&self, p: usize) -> Vec<ExchangeSlot> {
        let rect = self.patch_rect(p);
        let mut slots = Vec::new();
        for (k, (i, j)) in rect.boundary_nodes().into_iter().enumerate() {
            if self.grid.on_boundary(i, j) {
                continue;
            }
            let side = if i == rect.i0 { Side::Left } else { Side::Right };
            // owners were validated in build_layout
            let owner = self.owner(p, side).expect("validated owner");
            let owner_pos = self.confine_rect(owner).local_index(i, j);
            slots.push(ExchangeSlot {
                trace_pos: k,
                side,
                owner_pos,
            });
        }
        slots
    }

    #[cfg(test)]
    pub(crate) fn clear_owner(&mut self, patch: usize, side: Side) {
        self.edge_owner[patch][side as usize] = None;
    }
}

/// Per-patch weights, each stored over its patch rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionOfUnity {
    pub weights: Vec<GridFunction>,
}

/// Piecewise-linear ramps in `x` across every overlap band, 1 elsewhere on the
/// patch (including the outer bands of the end patches).
pub fn build_pou(layout: &Layout) -> PartitionOfUnity {
    let weights = (0..layout.n_patches)
        .map(|p| {
            let rect = layout.patch_rect(p);
            let (lo, hi) = layout.node_intervals[p];
            let a = if p == 0 { lo } else { lo + layout.overlap_nodes };
            let b = if p + 1 == layout.n_patches { hi } else { hi - layout.overlap_nodes };
            let column_weight = |i: usize| -> f64 {
                if i < a {
                    (i - lo) as f64 / (a - lo) as f64
                } else if i > b {
                    (hi - i) as f64 / (hi - b) as f64
                } else {
                    1.0
                }
            };
            let values = rect.nodes().map(|(i, _)| column_weight(i)).collect();
            GridFunction::new(rect, values).expect("rect-sized")
        })
        .collect();
    PartitionOfUnity { weights }
}

impl PartitionOfUnity {
    /// Weight of patch `p` at global node `(i, j)`; zero outside the patch.
    pub fn weight(&self, p: usize, i: usize, j: usize) -> f64 {
        let w = &self.weights[p];
        if w.rect().contains(i, j) {
            w.get(i, j)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirichletKind {
    BuiltinSine,
    FromFile,
    Custom,
}

/// Values of the global Dirichlet data on the nodes of ∂Ω (canonical edge order).
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletData {
    pub kind: DirichletKind,
    rect: NodeRect,
    values: Vec<f64>,
}

/// `sin(π/3·(x − 1/3)) · sin(3π(y − 1/4))`
pub fn sine_boundary(x: f64, y: f64) -> f64 {
    use std::f64::consts::PI;
    (PI / 3.0 * (x - 1.0 / 3.0)).sin() * (3.0 * PI * (y - 0.25)).sin()
}

impl DirichletData {
    pub fn from_fn(grid: &GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let rect = grid.full_rect();
        let values = rect
            .boundary_nodes()
            .into_iter()
            .map(|(i, j)| f(grid.x(i), grid.y(j)))
            .collect();
        DirichletData {
            kind: DirichletKind::Custom,
            rect,
            values,
        }
    }

    pub fn builtin_sine(grid: &GridSpec) -> Self {
        DirichletData {
            kind: DirichletKind::BuiltinSine,
            ..Self::from_fn(grid, sine_boundary)
        }
    }

    /// Parses `BND <n_nodes>` followed by `node value` pairs covering ∂Ω exactly once.
    pub fn parse(grid: &GridSpec, text: &str) -> Result<Self, DecompError> {
        let err = |m: String| DecompError::BoundaryData(m);
        let mut tok = text.split_whitespace();
        if tok.next() != Some("BND") {
            return Err(err("expected BND header".into()));
        }
        let n: usize = tok
            .next()
            .ok_or_else(|| err("missing node count".into()))?
            .parse()
            .map_err(|e| err(format!("node count: {e}")))?;
        let rect = grid.full_rect();
        let expected = rect.boundary_nodes().len();
        if n != expected {
            return Err(err(format!("grid has {expected} boundary nodes, header declares {n}")));
        }
        let mut values = vec![f64::NAN; expected];
        let mut seen = HashSet::new();
        for k in 0..n {
            let node: usize = tok
                .next()
                .ok_or_else(|| err(format!("missing pair {k}")))?
                .parse()
                .map_err(|e| err(format!("pair {k} node: {e}")))?;
            let value: f64 = tok
                .next()
                .ok_or_else(|| err(format!("missing value for pair {k}")))?
                .parse()
                .map_err(|e| err(format!("pair {k} value: {e}")))?;
            if node >= grid.n_nodes() {
                return Err(err(format!("node {node} outside the grid")));
            }
            let (i, j) = grid.node_coords(node);
            let pos = rect
                .boundary_position(i, j)
                .ok_or_else(|| err(format!("node {node} is not on the boundary")))?;
            if !seen.insert(node) {
                return Err(err(format!("node {node} listed twice")));
            }
            if !value.is_finite() {
                return Err(err(format!("node {node} has non-finite value")));
            }
            values[pos] = value;
        }
        if tok.next().is_some() {
            return Err(err("trailing data after the declared pairs".into()));
        }
        Ok(DirichletData {
            kind: DirichletKind::FromFile,
            rect,
            values,
        })
    }

    pub fn load(grid: &GridSpec, path: impl AsRef<Path>) -> Result<Self, DecompError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| DecompError::BoundaryData(format!("cannot read {}: {e}", path.as_ref().display())))?;
        Self::parse(grid, &text)
    }

    /// Serializes in the `BND` format, walking ∂Ω counterclockwise.
    pub fn to_bnd(&self, grid: &GridSpec) -> String {
        let mut out = format!("BND {}\n", self.values.len());
        for ((i, j), v) in self.rect.boundary_nodes().into_iter().zip(&self.values) {
            out.push_str(&format!("{} {:e}\n", grid.node_index(i, j), v));
        }
        out
    }

    pub fn value_at(&self, i: usize, j: usize) -> Option<f64> {
        self.rect.boundary_position(i, j).map(|k| self.values[k])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn matches(&self, grid: &GridSpec) -> bool {
        self.rect == grid.full_rect()
    }
}

/// The Schwarz unknown: one boundary trace per patch.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryState {
    pub traces: Vec<BoundaryTrace>,
    pub iteration: usize,
}

/// `b` on ∂Ω ∩ ∂Ω_i, zero on the interior edges.
pub fn init_state(layout: &Layout, b: &DirichletData) -> Result<BoundaryState, DecompError> {
    if !b.matches(&layout.grid) {
        return Err(DecompError::Misaligned("boundary data was built for another grid".into()));
    }
    let traces = (0..layout.n_patches)
        .map(|p| BoundaryTrace {
            patch_id: p,
            values: layout
                .patch_rect(p)
                .boundary_nodes()
                .into_iter()
                .map(|(i, j)| b.value_at(i, j).unwrap_or(0.0))
                .collect(),
        })
        .collect();
    Ok(BoundaryState { traces, iteration: 0 })
}

/// Jacobi update of every interior-edge trace from the owning neighbour's confined field.
pub fn exchange(layout: &Layout, fields: &[InteriorField], state: &BoundaryState) -> Result<BoundaryState, DecompError> {
    if fields.len() != layout.n_patches || state.traces.len() != layout.n_patches {
        return Err(DecompError::Misaligned(format!(
            "{} patches, {} fields, {} traces",
            layout.n_patches,
            fields.len(),
            state.traces.len()
        )));
    }
    for (p, f) in fields.iter().enumerate() {
        let expected = layout.confine_rect(p).n_nodes();
        if f.values.len() != expected {
            return Err(DecompError::Misaligned(format!("field {p} has {} values, expected {expected}", f.values.len())));
        }
    }
    let mut next = state.clone();
    for (p, trace) in next.traces.iter_mut().enumerate() {
        for slot in &layout.slots[p] {
            let owner = layout.owner(p, slot.side).ok_or(DecompError::MissingOwner { patch: p, side: slot.side })?;
            trace.values[slot.trace_pos] = fields[owner].values[slot.owner_pos];
        }
    }
    next.iteration += 1;
    Ok(next)
}

/// `u = Σ_i η_i u_i` over the whole grid.
pub fn assemble_global(layout: &Layout, pou: &PartitionOfUnity, fields: &[GridFunction]) -> Result<GridFunction, DecompError> {
    if fields.len() != layout.n_patches {
        return Err(DecompError::Misaligned(format!("{} patch fields for {} patches", fields.len(), layout.n_patches)));
    }
    let mut out = GridFunction::zeros(layout.grid.full_rect());
    for (p, field) in fields.iter().enumerate() {
        let rect = layout.patch_rect(p);
        if field.rect() != rect {
            return Err(DecompError::Misaligned(format!("field {p} does not cover patch {p}")));
        }
        let w = &pou.weights[p];
        for (k, (i, j)) in rect.nodes().enumerate() {
            let acc = out.get(i, j) + w.values()[k] * field.values()[k];
            out.set(i, j, acc);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn strip13() -> (GridSpec, Layout) {
        let g = GridSpec::new(10.0, 1.0, 1.0 / 40.0).unwrap();
        let l = build_layout(&g, 13, 1.0, Some(0.75)).unwrap();
        (g, l)
    }

    #[test]
    fn thirteen_strip_geometry() {
        let (_, l) = strip13();
        assert_eq!(l.intervals[3], (2.25, 3.25));
        assert_eq!(l.neighbor_sets[3], vec![2, 4]);
        assert_eq!(l.interior_intervals[3], (2.5, 3.0));
        assert!((l.overlap - 0.25).abs() < 1e-15);
        assert_eq!(l.neighbor_sets[0], vec![1]);
        assert_eq!(l.interior_intervals[0], (0.25, 0.75));
        assert_eq!(l.interior_intervals[12], (9.25, 9.75));
        assert_eq!(l.owner(4, Side::Left), Some(3));
        assert_eq!(l.owner(3, Side::Right), Some(4));
        assert_eq!(l.owner(0, Side::Left), None);
        // each interior edge is a quarter inside the owner, on its interior boundary
        for p in 0..13 {
            for side in [Side::Left, Side::Right] {
                if let Some(o) = l.owner(p, side) {
                    let x = if side == Side::Left { l.intervals[p].0 } else { l.intervals[p].1 };
                    let (a, b) = l.interior_intervals[o];
                    assert!(x == a || x == b);
                    let (lo, hi) = l.intervals[o];
                    assert!(((x - lo).min(hi - x) - 0.25).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn single_patch_and_bad_strides() {
        let g = GridSpec::new(1.0, 1.0, 1.0 / 8.0).unwrap();
        let l = build_layout(&g, 1, 1.0, None).unwrap();
        assert!(l.neighbor_sets[0].is_empty());
        assert_eq!(l.interior_intervals[0], (0.0, 1.0));
        assert!(l.exchange_slots(0).is_empty());

        let (g, _) = strip13();
        assert!(matches!(build_layout(&g, 13, 1.0, Some(0.8)), Err(DecompError::NonConformingLayout(_))));
        assert!(build_layout(&g, 10, 1.0, Some(1.0)).is_err());
        assert!(build_layout(&g, 13, 1.0, Some(0.7501)).is_err());
    }

    #[test]
    fn partition_of_unity_sums_to_one() {
        let (g, l) = strip13();
        let pou = build_pou(&l);
        for (i, j) in g.full_rect().nodes() {
            let s: f64 = (0..13).map(|p| pou.weight(p, i, j)).sum();
            assert!((s - 1.0).abs() <= 1e-12, "node ({i}, {j}): {s}");
            for p in 0..13 {
                let w = pou.weight(p, i, j);
                assert!((0.0..=1.0).contains(&w));
            }
        }
        // left edge of Ω_3 (x = 2.25 → column 90)
        assert_eq!(pou.weight(3, 90, 5), 0.0);
        // overlap band between 2 and 3 is [2.25, 2.5]; midpoint column 95
        assert_eq!(pou.weight(3, 95, 5), 0.5);
        assert_eq!(pou.weight(2, 95, 5), 0.5);
    }

    #[test]
    fn init_state_pins_physical_boundary() {
        let (g, l) = strip13();
        let b = DirichletData::builtin_sine(&g);
        let s = init_state(&l, &b).unwrap();
        let rect = l.patch_rect(0);
        for ((i, j), v) in rect.boundary_nodes().into_iter().zip(&s.traces[0].values) {
            if g.on_boundary(i, j) {
                assert_eq!(*v, sine_boundary(g.x(i), g.y(j)));
            } else {
                assert_eq!(i, rect.i1);
                assert_eq!(*v, 0.0);
            }
        }
        let z = DirichletData::from_fn(&g, |_, _| 0.0);
        assert!(init_state(&l, &z).unwrap().traces.iter().all(|t| t.values.iter().all(|&v| v == 0.0)));

        let g1 = GridSpec::new(1.0, 1.0, 0.125).unwrap();
        let l1 = build_layout(&g1, 1, 1.0, None).unwrap();
        let b1 = DirichletData::from_fn(&g1, |x, y| x + 2.0 * y);
        assert_eq!(init_state(&l1, &b1).unwrap().traces[0].values, b1.values());
    }

    fn constant_fields(l: &Layout, c: f64) -> Vec<InteriorField> {
        (0..l.n_patches)
            .map(|p| InteriorField {
                patch_id: p,
                values: vec![c; l.confine_rect(p).n_nodes()],
            })
            .collect()
    }

    #[test]
    fn exchange_fixed_point_and_wiring() {
        let (g, l) = strip13();
        let b = DirichletData::from_fn(&g, |_, _| 1.5);
        let s0 = init_state(&l, &b).unwrap();
        let s1 = exchange(&l, &constant_fields(&l, 1.5), &s0).unwrap();
        assert_eq!(s1.iteration, 1);
        assert!(s1.traces.iter().all(|t| t.values.iter().all(|&v| v == 1.5)));
        let s2 = exchange(&l, &constant_fields(&l, 1.5), &s1).unwrap();
        assert_eq!(s1.traces, s2.traces);

        // f_4's left edge (x = 3, column 120) reads patch 3 at column 120
        let mut fields = constant_fields(&l, 0.0);
        let c3 = l.confine_rect(3);
        for (k, (i, j)) in c3.nodes().enumerate() {
            fields[3].values[k] = (i * 1000 + j) as f64;
        }
        let s = exchange(&l, &fields, &s0).unwrap();
        let r4 = l.patch_rect(4);
        for ((i, j), v) in r4.boundary_nodes().into_iter().zip(&s.traces[4].values) {
            if i == 120 && !g.on_boundary(i, j) {
                assert_eq!(*v, (120 * 1000 + j) as f64);
            }
        }
    }

    #[test]
    fn exchange_on_single_patch_is_identity() {
        let g = GridSpec::new(1.0, 1.0, 0.125).unwrap();
        let l = build_layout(&g, 1, 1.0, None).unwrap();
        let s0 = init_state(&l, &DirichletData::from_fn(&g, |x, _| x)).unwrap();
        let s1 = exchange(&l, &constant_fields(&l, 9.0), &s0).unwrap();
        assert_eq!(s1.traces, s0.traces);
    }

    #[test]
    fn missing_owner_is_reported() {
        let (g, mut l) = strip13();
        let s0 = init_state(&l, &DirichletData::builtin_sine(&g)).unwrap();
        l.clear_owner(5, Side::Right);
        assert!(matches!(
            exchange(&l, &constant_fields(&l, 0.0), &s0),
            Err(DecompError::MissingOwner { patch: 5, side: Side::Right })
        ));
    }

    #[test]
    fn global_assembly() {
        let (g, l) = strip13();
        let pou = build_pou(&l);
        let w = GridFunction::from_fn(&g, g.full_rect(), |x, y| x.sin() * y + 2.0);
        let fields: Vec<GridFunction> = (0..13).map(|p| w.restrict(l.patch_rect(p))).collect();
        let u = assemble_global(&l, &pou, &fields).unwrap();
        for (a, b) in u.values().iter().zip(w.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn two_patch_blend_is_linear_across_overlap() {
        // [0, 1] and [0.5, 1.5] with h = 1/8; overlap band [0.5, 1.0] = columns 4..=8
        let g = GridSpec::new(1.5, 1.0, 0.125).unwrap();
        let l = build_layout(&g, 2, 1.0, Some(0.5)).unwrap();
        let pou = build_pou(&l);
        let f0 = GridFunction::from_fn(&g, l.patch_rect(0), |_, _| 0.0);
        let f1 = GridFunction::from_fn(&g, l.patch_rect(1), |_, _| 8.0);
        let u = assemble_global(&l, &pou, &[f0, f1]).unwrap();
        for (col, expect) in [(4, 0.0), (6, 4.0), (7, 6.0)] {
            assert!((u.get(col, 3) - expect).abs() < 1e-14, "column {col}");
        }
    }

    #[test]
    fn bnd_round_trip_and_errors() {
        let g = GridSpec::new(1.0, 0.5, 0.125).unwrap();
        let b = DirichletData::from_fn(&g, |x, y| x - y * 0.3);
        let parsed = DirichletData::parse(&g, &b.to_bnd(&g)).unwrap();
        assert_eq!(parsed.values(), b.values());
        assert!(DirichletData::parse(&g, "BND 3\n0 1\n1 1\n2 1").is_err());
        let mut text = b.to_bnd(&g);
        text = text.replacen("\n0 ", "\n10 ", 1); // node 10 = (1, 1) is interior
        assert!(DirichletData::parse(&g, &text).is_err());
    }

    proptest! {
        #[test]
        fn assembly_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..50) {
            let g = GridSpec::new(2.5, 0.5, 0.125).unwrap();
            let l = build_layout(&g, 3, 1.0, Some(0.75)).unwrap();
            let pou = build_pou(&l);
            let field = |s: u64, p: usize| GridFunction::from_fn(&g, l.patch_rect(p), move |x, y| ((s as f64 + 1.0) * x + p as f64 * y).cos());
            let u: Vec<_> = (0..3).map(|p| field(seed, p)).collect();
            let v: Vec<_> = (0..3).map(|p| field(seed + 7, p)).collect();
            let combo: Vec<_> = (0..3).map(|p| {
                let vals = u[p].values().iter().zip(v[p].values()).map(|(x, y)| a * x + b * y).collect();
                GridFunction::new(l.patch_rect(p), vals).unwrap()
            }).collect();
            let lhs = assemble_global(&l, &pou, &combo).unwrap();
            let gu = assemble_global(&l, &pou, &u).unwrap();
            let gv = assemble_global(&l, &pou, &v).unwrap();
            for k in 0..lhs.values().len() {
                prop_assert!((lhs.values()[k] - (a * gu.values()[k] + b * gv.values()[k])).abs() < 1e-12);
            }
        }
    }
}
