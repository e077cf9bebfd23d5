//! Discrete local problems on one patch.
//!
//! A patch is a node rectangle of the global grid. Its interior nodes are the
//! unknowns; its edge nodes carry Dirichlet data. The 5-point divergence-form
//! stencil splits into
//!
//! ```text
//! [A | B] · [u_int; f] = rhs,
//! ```
//!
//! where `A` (interior × interior) is SPD and `B` (interior × boundary) couples
//! interior rows to edge nodes. Row `p` carries `Σ_e a_e / h²` on the diagonal
//! and `−a_e / h²` towards the neighbour across each incident edge `e`.
//!
//! The confined map is `S̃ f = C · u(f)`, a gather of the patch solution at the
//! nodes of the confinement rectangle. Its adjoint is realized as the exact
//! algebraic transpose
//!
//! ```text
//! S̃ᵀ g = −Bᵀ A⁻¹ C_intᵀ g + C_bndᵀ g,
//! ```
//!
//! i.e. the stencil residual of the zero-Dirichlet sourced solve read off at
//! the edge nodes (the discrete flux), plus the direct pass-through of
//! confinement nodes that lie on the patch edge. Euclidean pairings on node
//! values are used on both sides.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use thiserror::Error;

use crate::banded::{BandedCholesky, BandedError, SymBanded};
use crate::dense::Mat;
use crate::grid::{edge_coefficient, Edge, GridError, GridFunction, GridSpec, MediaField, NodeRect};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LocalSolverError {
    #[error("patch {patch}: factorization failed ({source}); assembly is not SPD")]
    FactorizationFailure {
        patch: usize,
        #[source]
        source: BandedError,
    },
    #[error("patch {patch}: {what} has length {got}, expected {expected}")]
    Misaligned {
        patch: usize,
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("patch {patch}: invalid geometry: {reason}")]
    InvalidPatch { patch: usize, reason: String },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Dirichlet values on a patch edge, aligned with [`PatchOperator::boundary_idx`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub patch_id: usize,
    pub values: Vec<f64>,
}

/// Values on the confinement nodes, aligned with [`PatchOperator::confine_idx`].
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorField {
    pub patch_id: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Interior(usize),
    Boundary(usize),
}

/// Which operator [`PatchOperator::materialize`] should tabulate.
#[derive(Debug, Clone, Copy)]
pub enum MapKind<'a> {
    /// Full patch field, row-major over the patch rectangle.
    Solution,
    /// Field gathered at the confinement nodes.
    Confined,
    /// Field gathered at the listed positions of the confinement node list.
    Restricted(&'a [usize]),
}

/// Assembled and factorized local operator for one patch.
#[derive(Debug)]
pub struct PatchOperator {
    patch_id: usize,
    rect: NodeRect,
    confine: NodeRect,
    /// Global node indices of the unknowns, `y` running fastest.
    pub interior_idx: Vec<usize>,
    /// Global node indices of the edge nodes in counterclockwise order.
    pub boundary_idx: Vec<usize>,
    /// Global node indices of the confinement rectangle, row-major.
    pub confine_idx: Vec<usize>,
    slots: Vec<Slot>,
    /// Interior slot of each confinement node, or `None` when it is an edge node.
    confine_slots: Vec<Slot>,
    stiffness: SymBanded,
    /// `(interior row, boundary column, value)`
    coupling: Vec<(u32, u32, f64)>,
    factor: BandedCholesky,
    solves: AtomicUsize,
}

impl Clone for PatchOperator {
    fn clone(&self) -> Self {
        PatchOperator {
            patch_id: self.patch_id,
            rect: self.rect,
            confine: self.confine,
            interior_idx: self.interior_idx.clone(),
            boundary_idx: self.boundary_idx.clone(),
            confine_idx: self.confine_idx.clone(),
            slots: self.slots.clone(),
            confine_slots: self.confine_slots.clone(),
            stiffness: self.stiffness.clone(),
            coupling: self.coupling.clone(),
            factor: self.factor.clone(),
            solves: AtomicUsize::new(0),
        }
    }
}

impl PatchOperator {
    /// Assembles the stencil on `patch_rect` and factorizes it.
    pub fn assemble(
        patch_id: usize,
        grid: &GridSpec,
        media: &MediaField,
        patch_rect: NodeRect,
        confine_rect: NodeRect,
    ) -> Result<Self, LocalSolverError> {
        let invalid = |reason: String| LocalSolverError::InvalidPatch {
            patch: patch_id,
            reason,
        };
        if patch_rect.i1 >= grid.nx || patch_rect.j1 >= grid.ny {
            return Err(invalid(format!("{patch_rect:?} exceeds the grid")));
        }
        if patch_rect.width() < 3 || patch_rect.height() < 3 {
            return Err(invalid("patch needs at least one interior node".into()));
        }
        if !patch_rect.contains_rect(&confine_rect) {
            return Err(invalid(format!(
                "confinement {confine_rect:?} not inside {patch_rect:?}"
            )));
        }

        let boundary_nodes = patch_rect.boundary_nodes();
        let mut slots = vec![Slot::Interior(usize::MAX); patch_rect.n_nodes()];
        for (b, &(i, j)) in boundary_nodes.iter().enumerate() {
            slots[patch_rect.local_index(i, j)] = Slot::Boundary(b);
        }
        // Interior ordering: column by column, y fastest; half-bandwidth = column height.
        let col_height = patch_rect.height() - 2;
        let mut interior = Vec::with_capacity((patch_rect.width() - 2) * col_height);
        for i in patch_rect.i0 + 1..patch_rect.i1 {
            for j in patch_rect.j0 + 1..patch_rect.j1 {
                slots[patch_rect.local_index(i, j)] = Slot::Interior(interior.len());
                interior.push((i, j));
            }
        }

        let h2 = grid.h * grid.h;
        let mut stiffness = SymBanded::zeros(interior.len(), col_height);
        let mut coupling = Vec::new();
        for (row, &(i, j)) in interior.iter().enumerate() {
            let neighbours = [(i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)];
            for q in neighbours {
                let a = edge_coefficient(media, grid, Edge::new((i, j), q).expect("adjacent"))? / h2;
                stiffness.add(row, row, a);
                match slots[patch_rect.local_index(q.0, q.1)] {
                    Slot::Interior(col) => {
                        if col < row {
                            stiffness.add(row, col, -a);
                        }
                    }
                    Slot::Boundary(b) => coupling.push((row as u32, b as u32, -a)),
                }
            }
        }
        let factor = stiffness
            .factor()
            .map_err(|source| LocalSolverError::FactorizationFailure {
                patch: patch_id,
                source,
            })?;

        let confine_slots = confine_rect
            .nodes()
            .map(|(i, j)| slots[patch_rect.local_index(i, j)])
            .collect();
        Ok(PatchOperator {
            patch_id,
            rect: patch_rect,
            confine: confine_rect,
            interior_idx: interior.iter().map(|&(i, j)| grid.node_index(i, j)).collect(),
            boundary_idx: boundary_nodes
                .iter()
                .map(|&(i, j)| grid.node_index(i, j))
                .collect(),
            confine_idx: confine_rect
                .nodes()
                .map(|(i, j)| grid.node_index(i, j))
                .collect(),
            slots,
            confine_slots,
            stiffness,
            coupling,
            factor,
            solves: AtomicUsize::new(0),
        })
    }

    pub fn patch_id(&self) -> usize {
        self.patch_id
    }

    pub fn rect(&self) -> NodeRect {
        self.rect
    }

    pub fn confine_rect(&self) -> NodeRect {
        self.confine
    }

    pub fn n_interior(&self) -> usize {
        self.interior_idx.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary_idx.len()
    }

    pub fn n_confine(&self) -> usize {
        self.confine_idx.len()
    }

    /// Number of linear solves with the cached factorization so far.
    pub fn solve_count(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    /// Dense copy of `A`; for inspection on small patches.
    pub fn stiffness_dense(&self) -> Mat {
        let n = self.n_interior();
        Mat::from_fn(n, n, |i, j| self.stiffness.get(i, j))
    }

    /// Dense copy of `B`; for inspection on small patches.
    pub fn coupling_dense(&self) -> Mat {
        let mut b = Mat::zeros(self.n_interior(), self.n_boundary());
        for &(r, c, v) in &self.coupling {
            b.set(r as usize, c as usize, b.get(r as usize, c as usize) + v);
        }
        b
    }

    /// `A · x` for an interior vector.
    pub fn stiffness_apply(&self, x: &[f64]) -> Vec<f64> {
        self.stiffness.matvec(x)
    }

    /// `B · f` for a boundary vector.
    pub fn coupling_apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_interior()];
        for &(r, c, v) in &self.coupling {
            out[r as usize] += v * f[c as usize];
        }
        out
    }

    fn coupling_tr_apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_boundary()];
        for &(r, c, v) in &self.coupling {
            out[c as usize] += v * x[r as usize];
        }
        out
    }

    fn check_len(&self, what: &'static str, got: usize, expected: usize) -> Result<(), LocalSolverError> {
        if got == expected {
            Ok(())
        } else {
            Err(LocalSolverError::Misaligned {
                patch: self.patch_id,
                what,
                got,
                expected,
            })
        }
    }

    fn solve_interior(&self, rhs: &mut [f64]) {
        self.solves.fetch_add(1, Ordering::Relaxed);
        self.factor.solve_in_place(rhs);
    }

    fn scatter_field(&self, interior: &[f64], boundary: Option<&[f64]>) -> GridFunction {
        let values = self
            .slots
            .iter()
            .map(|s| match *s {
                Slot::Interior(k) => interior[k],
                Slot::Boundary(b) => boundary.map_or(0.0, |f| f[b]),
            })
            .collect();
        GridFunction::new(self.rect, values).expect("slot table covers the patch")
    }

    /// Interior values of the Dirichlet solution, `u_int = −A⁻¹ B f`.
    pub fn dirichlet_interior(&self, f: &[f64]) -> Result<Vec<f64>, LocalSolverError> {
        self.check_len("boundary trace", f.len(), self.n_boundary())?;
        let mut rhs = self.coupling_apply(f);
        rhs.iter_mut().for_each(|v| *v = -*v);
        self.solve_interior(&mut rhs);
        Ok(rhs)
    }

    /// Patch field with `u = f` on the edge and `A u_int = −B f` inside.
    pub fn solve_dirichlet(&self, f: &BoundaryTrace) -> Result<GridFunction, LocalSolverError> {
        let u_int = self.dirichlet_interior(&f.values)?;
        Ok(self.scatter_field(&u_int, Some(&f.values)))
    }

    /// Gathers a patch field at the confinement nodes.
    pub fn confine(&self, u: &GridFunction) -> Result<InteriorField, LocalSolverError> {
        if u.rect() != self.rect {
            return Err(LocalSolverError::InvalidPatch {
                patch: self.patch_id,
                reason: format!("field lives on {:?}, patch is {:?}", u.rect(), self.rect),
            });
        }
        let values = self.confine.nodes().map(|(i, j)| u.get(i, j)).collect();
        Ok(InteriorField {
            patch_id: self.patch_id,
            values,
        })
    }

    /// `S̃ f` without materializing the patch field.
    pub fn apply_confined(&self, f: &[f64]) -> Result<Vec<f64>, LocalSolverError> {
        let u_int = self.dirichlet_interior(f)?;
        Ok(self
            .confine_slots
            .iter()
            .map(|s| match *s {
                Slot::Interior(k) => u_int[k],
                Slot::Boundary(b) => f[b],
            })
            .collect())
    }

    /// Interior values of the zero-Dirichlet solve with the zero-extended source `g`.
    fn sourced_interior(&self, g: &[f64]) -> Result<Vec<f64>, LocalSolverError> {
        self.check_len("confined field", g.len(), self.n_confine())?;
        let mut rhs = vec![0.0; self.n_interior()];
        for (s, &gv) in self.confine_slots.iter().zip(g) {
            if let Slot::Interior(k) = *s {
                rhs[k] = gv;
            }
        }
        self.solve_interior(&mut rhs);
        Ok(rhs)
    }

    /// Field `v` with zero edge values and `A v_int = Rᵀ g`.
    pub fn solve_sourced(&self, g: &InteriorField) -> Result<GridFunction, LocalSolverError> {
        let v_int = self.sourced_interior(&g.values)?;
        Ok(self.scatter_field(&v_int, None))
    }

    /// `S̃ᵀ g` as a plain vector; see [`PatchOperator::adjoint_apply`].
    pub fn adjoint_confined(&self, g: &[f64]) -> Result<Vec<f64>, LocalSolverError> {
        let v_int = self.sourced_interior(g)?;
        let mut flux = self.coupling_tr_apply(&v_int);
        flux.iter_mut().for_each(|v| *v = -*v);
        for (s, &gv) in self.confine_slots.iter().zip(g) {
            if let Slot::Boundary(b) = *s {
                flux[b] += gv;
            }
        }
        Ok(flux)
    }

    /// Discrete flux of the adjoint solve: the exact transpose of the confined map.
    pub fn adjoint_apply(&self, g: &InteriorField) -> Result<BoundaryTrace, LocalSolverError> {
        Ok(BoundaryTrace {
            patch_id: self.patch_id,
            values: self.adjoint_confined(&g.values)?,
        })
    }

    /// Tabulates an operator column by column on the canonical boundary basis.
    pub fn materialize(&self, kind: MapKind<'_>) -> Result<Mat, LocalSolverError> {
        let n = self.n_boundary();
        if let MapKind::Restricted(rows) = kind {
            if let Some(&bad) = rows.iter().find(|&&r| r >= self.n_confine()) {
                return Err(LocalSolverError::InvalidPatch {
                    patch: self.patch_id,
                    reason: format!("restriction row {bad} outside the confinement"),
                });
            }
        }
        let columns = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                let f = BoundaryTrace {
                    patch_id: self.patch_id,
                    values: e,
                };
                Ok(match kind {
                    MapKind::Solution => self.solve_dirichlet(&f)?.into_values(),
                    MapKind::Confined => self.apply_confined(&f.values)?,
                    MapKind::Restricted(rows) => {
                        let c = self.apply_confined(&f.values)?;
                        rows.iter().map(|&r| c[r]).collect()
                    }
                })
            })
            .collect::<Result<Vec<_>, LocalSolverError>>()?;
        let rows = match kind {
            MapKind::Solution => self.rect.n_nodes(),
            MapKind::Confined => self.n_confine(),
            MapKind::Restricted(r) => r.len(),
        };
        Ok(Mat::from_columns(rows, &columns))
    }

    /// Confinement positions (row-major) of the patch nodes listed by global index.
    pub fn confine_positions(&self, grid: &GridSpec, nodes: &[usize]) -> Option<Vec<usize>> {
        nodes
            .iter()
            .map(|&n| {
                let (i, j) = grid.node_coords(n);
                self.confine
                    .contains(i, j)
                    .then(|| self.confine.local_index(i, j))
            })
            .collect()
    }
}
