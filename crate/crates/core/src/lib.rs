//! Overlapping Schwarz iteration for `−∇·(a∇u) = 0` on rectangles, with
//! patch solution maps compressed by randomized SVD.
//!
//! The modules build on each other:
//!
//! - [`grid`]: node grids, coefficient fields, edge coefficients.
//! - [`local_solver`]: per-patch stencil assembly, banded Cholesky solves,
//!   the confined solution map and its exact adjoint.
//! - [`decomp`]: strip layouts, trace exchange, partition of unity,
//!   Dirichlet data.
//! - [`lowrank`]: Gaussian sketches, Gram–Schmidt, Jacobi SVD, randomized SVD.
//! - [`schwarz`]: vanilla and reduced drivers, direct global solve, spectra.
//!
//! [`dense`] and [`banded`] hold the small linear-algebra kernels used by the
//! others.
//!
//! ```
//! use reduced_schwarz::decomp::{build_layout, DirichletData};
//! use reduced_schwarz::grid::{GridSpec, MediaField};
//! use reduced_schwarz::schwarz::{relative_error, run_vanilla, solve_global, RunOptions, SchwarzContext};
//!
//! let g = GridSpec::new(1.75, 0.5, 0.125)?;
//! let m = MediaField::constant(1.0, &g)?;
//! let l = build_layout(&g, 2, 1.0, Some(0.75))?;
//! let ctx = SchwarzContext::new(g, m, l, DirichletData::from_fn(&g, |x, y| x * y))?;
//! let run = run_vanilla(&ctx, 40, &RunOptions::default())?;
//! let exact = solve_global(&ctx.grid, &ctx.media, &ctx.boundary)?;
//! assert!(relative_error(&run.final_field, &exact)? < 1e-10);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod banded;
pub mod decomp;
pub mod dense;
pub mod grid;
pub mod local_solver;
pub mod lowrank;
pub mod schwarz;
