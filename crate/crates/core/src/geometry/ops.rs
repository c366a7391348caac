//! Transformed differential operators on a lattice. Every operator takes the
//! coefficient matrix explicitly so that the same stencils serve both the map
//! matrix and its time derivative.

use super::fields::GeometryFields;
use super::grid::Lattice;
use crate::error::{check_len, Result};

/// Nodal 2x2 matrix field.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    pub m11: Vec<f64>,
    pub m12: Vec<f64>,
    pub m21: Vec<f64>,
    pub m22: Vec<f64>,
}

/// Nodal vector field as two components.
pub type VectorField = [Vec<f64>; 2];

/// Nodal tensor field as components 11, 12, 21, 22.
pub type TensorField = [Vec<f64>; 4];

impl MatrixField {
    pub fn identity(n: usize) -> Self {
        Self { m11: vec![1.0; n], m12: vec![0.0; n], m21: vec![0.0; n], m22: vec![1.0; n] }
    }

    pub fn map(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        Self { m11: f(&self.m11), m12: f(&self.m12), m21: f(&self.m21), m22: f(&self.m22) }
    }

    pub fn len(&self) -> usize {
        self.m11.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m11.is_empty()
    }

    #[inline]
    pub fn at(&self, q: usize) -> [[f64; 2]; 2] {
        [[self.m11[q], self.m12[q]], [self.m21[q], self.m22[q]]]
    }
}

fn flat_grad(lat: &Lattice, f: &[f64]) -> VectorField {
    [lat.d1(f), lat.d2(f)]
}

/// (M grad f)_i = M_ij d_j f.
pub fn grad_m(lat: &Lattice, m: &MatrixField, f: &[f64]) -> Result<VectorField> {
    check_len(lat.len(), f.len())?;
    check_len(lat.len(), m.len())?;
    let [g1, g2] = flat_grad(lat, f);
    let c1 = (0..f.len()).map(|q| m.m11[q] * g1[q] + m.m12[q] * g2[q]).collect();
    let c2 = (0..f.len()).map(|q| m.m21[q] * g1[q] + m.m22[q] * g2[q]).collect();
    Ok([c1, c2])
}

/// div_M X = M_ij d_j X_i.
pub fn div_m(lat: &Lattice, m: &MatrixField, x: &VectorField) -> Result<Vec<f64>> {
    check_len(lat.len(), x[0].len())?;
    check_len(lat.len(), x[1].len())?;
    check_len(lat.len(), m.len())?;
    let [a1, a2] = flat_grad(lat, &x[0]);
    let [b1, b2] = flat_grad(lat, &x[1]);
    Ok((0..lat.len())
        .map(|q| m.m11[q] * a1[q] + m.m12[q] * a2[q] + m.m21[q] * b1[q] + m.m22[q] * b2[q])
        .collect())
}

/// (D_M u)_ij = M_ik d_k u_j + M_jk d_k u_i.
pub fn sym_grad_m(lat: &Lattice, m: &MatrixField, u: &VectorField) -> Result<TensorField> {
    let g1 = grad_m(lat, m, &u[0])?;
    let g2 = grad_m(lat, m, &u[1])?;
    // g_c[i] = (M grad u_c)_i = M_ik d_k u_c
    let n = lat.len();
    let d11: Vec<f64> = (0..n).map(|q| 2.0 * g1[0][q]).collect();
    let d12: Vec<f64> = (0..n).map(|q| g2[0][q] + g1[1][q]).collect();
    let d22: Vec<f64> = (0..n).map(|q| 2.0 * g2[1][q]).collect();
    Ok([d11, d12.clone(), d12, d22])
}

/// p I - mu D_M u.
pub fn stress_m(lat: &Lattice, m: &MatrixField, p: &[f64], u: &VectorField, mu: f64) -> Result<TensorField> {
    check_len(lat.len(), p.len())?;
    let [d11, d12, d21, d22] = sym_grad_m(lat, m, u)?;
    let n = lat.len();
    Ok([
        (0..n).map(|q| p[q] - mu * d11[q]).collect(),
        (0..n).map(|q| -mu * d12[q]).collect(),
        (0..n).map(|q| -mu * d21[q]).collect(),
        (0..n).map(|q| p[q] - mu * d22[q]).collect(),
    ])
}

/// (div_M S)_i = M_jk d_k S_ij.
pub fn div_tensor_m(lat: &Lattice, m: &MatrixField, s: &TensorField) -> Result<VectorField> {
    let r1 = div_m(lat, m, &[s[0].clone(), s[1].clone()])?;
    let r2 = div_m(lat, m, &[s[2].clone(), s[3].clone()])?;
    Ok([r1, r2])
}

pub fn grad_a(f: &GeometryFields, s: &[f64]) -> Result<VectorField> {
    grad_m(&f.lattice, &f.cal_a, s)
}

pub fn div_a(f: &GeometryFields, x: &VectorField) -> Result<Vec<f64>> {
    div_m(&f.lattice, &f.cal_a, x)
}

pub fn lap_a(f: &GeometryFields, s: &[f64]) -> Result<Vec<f64>> {
    div_a(f, &grad_a(f, s)?)
}

pub fn sym_grad_a(f: &GeometryFields, u: &VectorField) -> Result<TensorField> {
    sym_grad_m(&f.lattice, &f.cal_a, u)
}

pub fn stress_a(f: &GeometryFields, p: &[f64], u: &VectorField, mu: f64) -> Result<TensorField> {
    stress_m(&f.lattice, &f.cal_a, p, u, mu)
}

/// Largest nodal column divergence of J A, i.e. |d1 J - d2 A| (the second
/// column is constant).
pub fn piola_residual(f: &GeometryFields) -> f64 {
    let lat = &f.lattice;
    let dj = lat.d1(&f.j);
    let da = lat.d2(&f.a);
    dj.iter().zip(&da).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
