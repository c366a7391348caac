//! Flattening geometry: the boundary-fitted grid, the surface-to-bulk
//! extension, the coefficient fields of the map and the transformed
//! differential operators.

mod extension;
mod fields;
mod grid;
mod ops;

pub use extension::{extend_surface, poisson_extend, smooth_window, SurfaceExtension};
pub use fields::{build_geometry, cutoff, GeometryFields, GeometryRates};
pub(crate) use fields::surface_slope;
pub use grid::{Grid, Lattice};
pub use ops::{
    div_a, div_m, div_tensor_m, grad_a, grad_m, lap_a, piola_residual, stress_a, stress_m,
    sym_grad_a, sym_grad_m, MatrixField, TensorField, VectorField,
};
