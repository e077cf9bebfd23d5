//! Uniform node grids over `[0, lx] × [0, ly]` and the media coefficient.
//!
//! Nodes are addressed by `(i, j)` with `x = i·h`, `y = j·h`; the global node
//! index is `j·nx + i` (row-major, bottom row first). The coefficient enters
//! the discretization only through its values at edge midpoints, see
//! [`edge_coefficient`].

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use thiserror::Error;

/// Relative tolerance used when checking that lengths are multiples of `h`.
pub const CONFORMITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("{axis} length {length} is not an integer multiple of h = {h}")]
    NonConformingGrid {
        axis: &'static str,
        length: f64,
        h: f64,
    },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("point ({x}, {y}) lies outside the media extent")]
    OutOfDomain { x: f64, y: f64 },
    #[error("raster parse error: {0}")]
    ParseError(String),
    #[error("media value {value} in cell {cell} is not positive")]
    NonPositiveMedia { cell: usize, value: f64 },
    #[error("media bounds [{alpha}, {beta}] invalid: coefficient must be strictly positive")]
    InvalidBounds { alpha: f64, beta: f64 },
}

/// Returns `n` when `length / h` is within [`CONFORMITY_TOL`] of the integer `n`.
pub fn integer_ratio(length: f64, h: f64) -> Option<usize> {
    if !(length.is_finite() && h.is_finite()) || h <= 0.0 || length < 0.0 {
        return None;
    }
    let r = length / h;
    let n = r.round();
    if (r - n).abs() <= CONFORMITY_TOL * n.max(1.0) {
        Some(n as usize)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lx: f64,
    pub ly: f64,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(lx: f64, ly: f64, h: f64) -> Result<Self, GridError> {
        if !(lx > 0.0 && ly > 0.0 && h > 0.0) {
            return Err(GridError::InvalidGrid(format!(
                "lx, ly and h must be positive (got {lx}, {ly}, {h})"
            )));
        }
        let cx = integer_ratio(lx, h).ok_or(GridError::NonConformingGrid {
            axis: "x",
            length: lx,
            h,
        })?;
        let cy = integer_ratio(ly, h).ok_or(GridError::NonConformingGrid {
            axis: "y",
            length: ly,
            h,
        })?;
        let (nx, ny) = (cx + 1, cy + 1);
        if nx < 3 || ny < 3 {
            return Err(GridError::InvalidGrid(format!(
                "need at least 3 nodes per direction, got {nx}×{ny}"
            )));
        }
        Ok(GridSpec { lx, ly, h, nx, ny })
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.nx {
            self.lx
        } else {
            i as f64 * self.h
        }
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        if j + 1 == self.ny {
            self.ly
        } else {
            j as f64 * self.h
        }
    }

    #[inline]
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn node_coords(&self, index: usize) -> (usize, usize) {
        (index % self.nx, index / self.nx)
    }

    pub fn n_nodes(&self) -> usize {
        self.nx * self.ny
    }

    /// True for nodes on the physical boundary ∂Ω.
    #[inline]
    pub fn on_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny
    }

    pub fn full_rect(&self) -> NodeRect {
        NodeRect::new(0, self.nx - 1, 0, self.ny - 1)
    }

    /// Node index of the coordinate `x`, if it is a multiple of `h` in range.
    pub fn column_of(&self, x: f64) -> Option<usize> {
        integer_ratio(x, self.h).filter(|&i| i < self.nx)
    }
}

/// Inclusive node subrectangle `i0..=i1 × j0..=j1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeRect {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

impl NodeRect {
    pub fn new(i0: usize, i1: usize, j0: usize, j1: usize) -> Self {
        assert!(i0 <= i1 && j0 <= j1, "empty node rectangle");
        NodeRect { i0, i1, j0, j1 }
    }

    pub fn width(&self) -> usize {
        self.i1 - self.i0 + 1
    }

    pub fn height(&self) -> usize {
        self.j1 - self.j0 + 1
    }

    pub fn n_nodes(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        (self.i0..=self.i1).contains(&i) && (self.j0..=self.j1).contains(&j)
    }

    pub fn contains_rect(&self, other: &NodeRect) -> bool {
        self.contains(other.i0, other.j0) && self.contains(other.i1, other.j1)
    }

    /// Row-major position of `(i, j)` inside the rectangle.
    #[inline]
    pub fn local_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(self.contains(i, j));
        (j - self.j0) * self.width() + (i - self.i0)
    }

    #[inline]
    pub fn local_coords(&self, k: usize) -> (usize, usize) {
        (self.i0 + k % self.width(), self.j0 + k / self.width())
    }

    pub fn on_edge(&self, i: usize, j: usize) -> bool {
        i == self.i0 || i == self.i1 || j == self.j0 || j == self.j1
    }

    /// Edge nodes in counterclockwise order from the lower-left corner,
    /// each corner listed once. Length is `2·((w−1) + (h−1))`.
    pub fn boundary_nodes(&self) -> Vec<(usize, usize)> {
        let (w, hgt) = (self.i1 - self.i0, self.j1 - self.j0);
        let mut out = Vec::with_capacity(2 * (w + hgt));
        out.extend((0..w).map(|s| (self.i0 + s, self.j0)));
        out.extend((0..hgt).map(|s| (self.i1, self.j0 + s)));
        out.extend((0..w).map(|s| (self.i1 - s, self.j1)));
        out.extend((0..hgt).map(|s| (self.i0, self.j1 - s)));
        out
    }

    /// Position of an edge node in [`NodeRect::boundary_nodes`] order.
    pub fn boundary_position(&self, i: usize, j: usize) -> Option<usize> {
        if !self.contains(i, j) {
            return None;
        }
        let (w, hgt) = (self.i1 - self.i0, self.j1 - self.j0);
        if j == self.j0 && i < self.i1 {
            Some(i - self.i0)
        } else if i == self.i1 && j < self.j1 {
            Some(w + (j - self.j0))
        } else if j == self.j1 && i > self.i0 {
            Some(w + hgt + (self.i1 - i))
        } else if i == self.i0 && j > self.j0 {
            Some(2 * w + hgt + (self.j1 - j))
        } else {
            None
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.j0..=self.j1).flat_map(move |j| (self.i0..=self.i1).map(move |i| (i, j)))
    }
}

/// Node values over a [`NodeRect`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    rect: NodeRect,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(rect: NodeRect, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != rect.n_nodes() {
            return Err(GridError::InvalidGrid(format!(
                "grid function needs {} values, got {}",
                rect.n_nodes(),
                values.len()
            )));
        }
        Ok(GridFunction { rect, values })
    }

    pub fn zeros(rect: NodeRect) -> Self {
        GridFunction {
            rect,
            values: vec![0.0; rect.n_nodes()],
        }
    }

    /// Samples `f(x, y)` at every node of `rect`.
    pub fn from_fn(grid: &GridSpec, rect: NodeRect, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = rect.nodes().map(|(i, j)| f(grid.x(i), grid.y(j))).collect();
        GridFunction { rect, values }
    }

    pub fn rect(&self) -> NodeRect {
        self.rect
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.rect.local_index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.rect.local_index(i, j);
        self.values[k] = v;
    }

    /// Copy of the values on a subrectangle.
    pub fn restrict(&self, sub: NodeRect) -> GridFunction {
        assert!(self.rect.contains_rect(&sub));
        let values = sub.nodes().map(|(i, j)| self.get(i, j)).collect();
        GridFunction { rect: sub, values }
    }
}

/// Piecewise-constant media on a uniform cell raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub ncx: usize,
    pub ncy: usize,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    /// Row-major cell values, bottom row first.
    pub cells: Vec<f64>,
}

impl Raster {
    pub fn new(
        ncx: usize,
        ncy: usize,
        extent: [f64; 4],
        cells: Vec<f64>,
    ) -> Result<Self, GridError> {
        let [x0, y0, x1, y1] = extent;
        if ncx == 0 || ncy == 0 {
            return Err(GridError::ParseError("raster needs at least one cell".into()));
        }
        if !(x1 > x0 && y1 > y0) {
            return Err(GridError::ParseError(format!(
                "degenerate raster extent [{x0}, {x1}] × [{y0}, {y1}]"
            )));
        }
        if cells.len() != ncx * ncy {
            return Err(GridError::ParseError(format!(
                "header declares {}×{} = {} cells, found {}",
                ncx,
                ncy,
                ncx * ncy,
                cells.len()
            )));
        }
        if let Some((cell, &value)) = cells
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
        {
            return Err(GridError::NonPositiveMedia { cell, value });
        }
        Ok(Raster {
            ncx,
            ncy,
            x0,
            y0,
            x1,
            y1,
            cells,
        })
    }

    /// Parses `RASTER <ncx> <ncy> <x0> <y0> <x1> <y1>` followed by the cell values.
    pub fn parse(text: &str) -> Result<Self, GridError> {
        let mut tokens = text.split_whitespace();
        match tokens.next() {
            Some("RASTER") => {}
            other => {
                return Err(GridError::ParseError(format!(
                    "expected RASTER header, found {other:?}"
                )))
            }
        }
        let mut header = |name: &str| {
            tokens
                .next()
                .ok_or_else(|| GridError::ParseError(format!("missing header field {name}")))
                .map(str::to_owned)
        };
        let parse_count = |s: String, name: &str| {
            s.parse::<usize>()
                .map_err(|e| GridError::ParseError(format!("{name}: {e}")))
        };
        let parse_real = |s: String, name: &str| {
            s.parse::<f64>()
                .map_err(|e| GridError::ParseError(format!("{name}: {e}")))
        };
        let ncx = parse_count(header("ncells_x")?, "ncells_x")?;
        let ncy = parse_count(header("ncells_y")?, "ncells_y")?;
        let x0 = parse_real(header("x0")?, "x0")?;
        let y0 = parse_real(header("y0")?, "y0")?;
        let x1 = parse_real(header("x1")?, "x1")?;
        let y1 = parse_real(header("y1")?, "y1")?;
        let cells = tokens
            .enumerate()
            .map(|(k, t)| {
                t.parse::<f64>()
                    .map_err(|e| GridError::ParseError(format!("cell {k}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Raster::new(ncx, ncy, [x0, y0, x1, y1], cells)
    }

    /// Cell index along one axis; points on a cell boundary go to the lower cell.
    fn axis_cell(t: f64, n: usize) -> usize {
        let fl = t.floor();
        let k = if fl == t && fl > 0.0 { fl - 1.0 } else { fl };
        (k.max(0.0) as usize).min(n - 1)
    }

    fn cell_at(&self, x: f64, y: f64) -> usize {
        let tx = (x - self.x0) * self.ncx as f64 / (self.x1 - self.x0);
        let ty = (y - self.y0) * self.ncy as f64 / (self.y1 - self.y0);
        Self::axis_cell(ty, self.ncy) * self.ncx + Self::axis_cell(tx, self.ncx)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MediaKind {
    /// `(2+1.8 sin(πx/ε))/(2+1.8 cos(πy/ε)) + (2+sin(πy/ε))/(2+1.8 sin(πx))`
    Oscillatory { epsilon: f64 },
    Raster(Raster),
}

/// Coefficient field `a(x, y)` with bounds `alpha ≤ a ≤ beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct MediaField {
    kind: MediaKind,
    extent: [f64; 4],
    alpha: f64,
    beta: f64,
}

impl fmt::Display for MediaField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            MediaKind::Oscillatory { epsilon } => write!(f, "oscillatory(ε = {epsilon})"),
            MediaKind::Raster(r) => write!(f, "raster({}×{} cells)", r.ncx, r.ncy),
        }?;
        write!(f, " in [{:.4}, {:.4}]", self.alpha, self.beta)
    }
}

/// The two-scale oscillatory coefficient, on its own.
pub fn oscillatory_value(epsilon: f64, x: f64, y: f64) -> f64 {
    let (sx, cy) = ((PI * x / epsilon).sin(), (PI * y / epsilon).cos());
    let sy = (PI * y / epsilon).sin();
    (2.0 + 1.8 * sx) / (2.0 + 1.8 * cy) + (2.0 + sy) / (2.0 + 1.8 * (PI * x).sin())
}

impl MediaField {
    /// Oscillatory media over the grid's domain. Bounds are the extremes over
    /// all edge midpoints of `grid`.
    pub fn oscillatory(epsilon: f64, grid: &GridSpec) -> Result<Self, GridError> {
        if !(epsilon > 0.0) {
            return Err(GridError::InvalidGrid(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        let mut m = MediaField {
            kind: MediaKind::Oscillatory { epsilon },
            extent: [0.0, 0.0, grid.lx, grid.ly],
            alpha: f64::NAN,
            beta: f64::NAN,
        };
        let (alpha, beta) = m.sample_bounds(grid)?;
        m.alpha = alpha;
        m.beta = beta;
        if !(alpha > 0.0) {
            return Err(GridError::InvalidBounds { alpha, beta });
        }
        Ok(m)
    }

    pub fn from_raster(raster: Raster) -> Self {
        let alpha = raster.cells.iter().cloned().fold(f64::INFINITY, f64::min);
        let beta = raster.cells.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let extent = [raster.x0, raster.y0, raster.x1, raster.y1];
        MediaField {
            kind: MediaKind::Raster(raster),
            extent,
            alpha,
            beta,
        }
    }

    /// Constant coefficient `c` over the grid's domain (a one-cell raster).
    pub fn constant(c: f64, grid: &GridSpec) -> Result<Self, GridError> {
        Raster::new(1, 1, [0.0, 0.0, grid.lx, grid.ly], vec![c]).map(Self::from_raster)
    }

    pub fn kind(&self) -> &MediaKind {
        &self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn extent(&self) -> [f64; 4] {
        self.extent
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64, GridError> {
        let [x0, y0, x1, y1] = self.extent;
        let tol = CONFORMITY_TOL * (x1 - x0).abs().max(y1 - y0).max(1.0);
        if !(x >= x0 - tol && x <= x1 + tol && y >= y0 - tol && y <= y1 + tol) {
            return Err(GridError::OutOfDomain { x, y });
        }
        Ok(match &self.kind {
            MediaKind::Oscillatory { epsilon } => oscillatory_value(*epsilon, x, y),
            MediaKind::Raster(r) => r.cells[r.cell_at(x, y)],
        })
    }

    /// Smallest and largest coefficient over every edge midpoint of `grid`.
    pub fn sample_bounds(&self, grid: &GridSpec) -> Result<(f64, f64), GridError> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                if i + 1 < grid.nx {
                    let a = edge_coefficient(self, grid, Edge::horizontal(i, j))?;
                    lo = lo.min(a);
                    hi = hi.max(a);
                }
                if j + 1 < grid.ny {
                    let a = edge_coefficient(self, grid, Edge::vertical(i, j))?;
                    lo = lo.min(a);
                    hi = hi.max(a);
                }
            }
        }
        Ok((lo, hi))
    }

    /// Fails unless the media covers `grid` and is positive at all of its edge midpoints.
    pub fn check_against(&self, grid: &GridSpec) -> Result<(), GridError> {
        let (alpha, beta) = self.sample_bounds(grid)?;
        if !(alpha > 0.0) {
            return Err(GridError::InvalidBounds { alpha, beta });
        }
        Ok(())
    }
}

pub fn load_raster(path: impl AsRef<Path>) -> Result<MediaField, GridError> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
        GridError::ParseError(format!("cannot read {}: {e}", path.as_ref().display()))
    })?;
    Raster::parse(&text).map(MediaField::from_raster)
}

/// Grid edge between two edge-adjacent nodes; the order of the endpoints is irrelevant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    p: (usize, usize),
    q: (usize, usize),
}

impl Edge {
    pub fn new(p: (usize, usize), q: (usize, usize)) -> Option<Self> {
        let dx = p.0.abs_diff(q.0);
        let dy = p.1.abs_diff(q.1);
        (dx + dy == 1).then_some(Edge { p, q })
    }

    pub fn horizontal(i: usize, j: usize) -> Self {
        Edge {
            p: (i, j),
            q: (i + 1, j),
        }
    }

    pub fn vertical(i: usize, j: usize) -> Self {
        Edge {
            p: (i, j),
            q: (i, j + 1),
        }
    }

    pub fn midpoint(&self, grid: &GridSpec) -> (f64, f64) {
        let x = (self.p.0 + self.q.0) as f64 * 0.5 * grid.h;
        let y = (self.p.1 + self.q.1) as f64 * 0.5 * grid.h;
        (x, y)
    }
}

/// Coefficient of the 5-point stencil on `edge`: `a` at the edge midpoint.
pub fn edge_coefficient(media: &MediaField, grid: &GridSpec, edge: Edge) -> Result<f64, GridError> {
    let (x, y) = edge.midpoint(grid);
    media.eval(x, y)
}
