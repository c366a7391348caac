use crate::equilibrium::EquilibriumSurface;
use crate::error::{Error, Result};

/// Minimum number of fine-lattice intervals across the cutoff band.
pub const BAND_INTERVALS: usize = 8;

/// Nodes of a tensor lattice in reference coordinates (xi, s) in
/// [-ell, ell] x [0, 1], placed in the equilibrium domain by
/// x2 = -d + s (zeta0(xi) + d). Fields are stored row-major, `j * ni + i`,
/// with `j = nj - 1` the free surface.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub ni: usize,
    pub nj: usize,
    pub xi: Vec<f64>,
    pub s: Vec<f64>,
    pub h_xi: f64,
    pub h_s: f64,
    pub depth: f64,
    pub zeta0: Vec<f64>,
    pub dzeta0: Vec<f64>,
    pub d2zeta0: Vec<f64>,
    pub x2: Vec<f64>,
}

/// Second-order difference of a strided 1D sequence, one-sided at the ends.
pub(crate) fn diff_line(f: &[f64], start: usize, stride: usize, n: usize, h: f64, out: &mut [f64]) {
    let at = |k: usize| f[start + k * stride];
    for k in 0..n {
        let v = if k == 0 {
            (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
        } else if k == n - 1 {
            (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
        } else {
            (at(k + 1) - at(k - 1)) / (2.0 * h)
        };
        out[start + k * stride] = v;
    }
}

impl Lattice {
    fn new(surface: &EquilibriumSurface, depth: f64, ni: usize, nj: usize) -> Self {
        let ell = surface.ell();
        let h_xi = 2.0 * ell / (ni - 1) as f64;
        let h_s = 1.0 / (nj - 1) as f64;
        let xi: Vec<f64> = (0..ni).map(|i| -ell + i as f64 * h_xi).collect();
        let s: Vec<f64> = (0..nj).map(|j| j as f64 * h_s).collect();
        let mut zeta0 = Vec::with_capacity(ni);
        let mut dzeta0 = Vec::with_capacity(ni);
        let mut d2zeta0 = Vec::with_capacity(ni);
        for &x in &xi {
            let (z, dz, d2z) = surface.eval(x);
            zeta0.push(z);
            dzeta0.push(dz);
            d2zeta0.push(d2z);
        }
        let mut x2 = vec![0.0; ni * nj];
        for j in 0..nj {
            for i in 0..ni {
                x2[j * ni + i] = -depth + s[j] * (zeta0[i] + depth);
            }
        }
        Self { ni, nj, xi, s, h_xi, h_s, depth, zeta0, dzeta0, d2zeta0, x2 }
    }

    fn subsample(&self) -> Self {
        let ni = (self.ni - 1) / 2 + 1;
        let nj = (self.nj - 1) / 2 + 1;
        let pick = |v: &[f64]| v.iter().step_by(2).copied().collect::<Vec<_>>();
        let mut x2 = Vec::with_capacity(ni * nj);
        for j in 0..nj {
            for i in 0..ni {
                x2.push(self.x2[2 * j * self.ni + 2 * i]);
            }
        }
        Self {
            ni,
            nj,
            xi: pick(&self.xi),
            s: pick(&self.s),
            h_xi: 2.0 * self.h_xi,
            h_s: 2.0 * self.h_s,
            depth: self.depth,
            zeta0: pick(&self.zeta0),
            dzeta0: pick(&self.dzeta0),
            d2zeta0: pick(&self.d2zeta0),
            x2,
        }
    }

    pub fn len(&self) -> usize {
        self.ni * self.nj
    }

    pub fn is_empty(&self) -> bool {
        self.ni * self.nj == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ni + i
    }

    /// Index of the free-surface node above column i.
    #[inline]
    pub fn top(&self, i: usize) -> usize {
        (self.nj - 1) * self.ni + i
    }

    /// d x2 / d s (the equilibrium Jacobian determinant) in column i.
    #[inline]
    pub fn x2_s(&self, i: usize) -> f64 {
        self.zeta0[i] + self.depth
    }

    #[inline]
    pub fn x2_xi(&self, i: usize, j: usize) -> f64 {
        self.s[j] * self.dzeta0[i]
    }

    pub fn d_xi(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        for j in 0..self.nj {
            diff_line(f, j * self.ni, 1, self.ni, self.h_xi, &mut out);
        }
        out
    }

    pub fn d_s(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        for i in 0..self.ni {
            diff_line(f, i, self.ni, self.nj, self.h_s, &mut out);
        }
        out
    }

    /// Derivative in x1 at fixed x2.
    pub fn d1(&self, f: &[f64]) -> Vec<f64> {
        let fx = self.d_xi(f);
        let fs = self.d_s(f);
        let mut out = fx;
        for j in 0..self.nj {
            for i in 0..self.ni {
                let k = self.idx(i, j);
                out[k] -= self.x2_xi(i, j) / self.x2_s(i) * fs[k];
            }
        }
        out
    }

    /// Derivative in x2.
    pub fn d2(&self, f: &[f64]) -> Vec<f64> {
        let mut fs = self.d_s(f);
        for j in 0..self.nj {
            for i in 0..self.ni {
                fs[j * self.ni + i] /= self.x2_s(i);
            }
        }
        fs
    }

    /// Trapezoidal node weights for integrals over the equilibrium domain.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.len()];
        for j in 0..self.nj {
            let ws = if j == 0 || j == self.nj - 1 { 0.5 } else { 1.0 } * self.h_s;
            for i in 0..self.ni {
                let wx = if i == 0 || i == self.ni - 1 { 0.5 } else { 1.0 } * self.h_xi;
                w[j * self.ni + i] = wx * ws * self.x2_s(i);
            }
        }
        w
    }

    /// Trapezoidal weights along the free surface in x1.
    pub fn surface_weights(&self) -> Vec<f64> {
        (0..self.ni)
            .map(|i| if i == 0 || i == self.ni - 1 { 0.5 } else { 1.0 } * self.h_xi)
            .collect()
    }

    pub fn top_row<'a>(&self, f: &'a [f64]) -> &'a [f64] {
        &f[(self.nj - 1) * self.ni..]
    }

    /// Values along the walls and the bottom ordered left wall (bottom to
    /// top), right wall (bottom to top), bottom (left to right), paired with
    /// arc length weights in the equilibrium domain.
    pub fn side_trace(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut vals = Vec::new();
        let mut w = Vec::new();
        for &i in &[0, self.ni - 1] {
            for j in 0..self.nj {
                vals.push(f[self.idx(i, j)]);
                let end = if j == 0 || j == self.nj - 1 { 0.5 } else { 1.0 };
                w.push(end * self.h_s * self.x2_s(i));
            }
        }
        for i in 0..self.ni {
            vals.push(f[self.idx(i, 0)]);
            let end = if i == 0 || i == self.ni - 1 { 0.5 } else { 1.0 };
            w.push(end * self.h_xi);
        }
        (vals, w)
    }
}

/// Boundary-fitted grid of nx x ny quadrilateral elements. The fine lattice
/// carries the element corner, edge and centre nodes (velocity, geometry);
/// the coarse lattice carries element corners only (pressure, temperature).
#[derive(Debug, Clone)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub ell: f64,
    pub depth: f64,
    pub fine: Lattice,
    pub coarse: Lattice,
    pub band: (f64, f64),
}

impl Grid {
    pub fn new(surface: &EquilibriumSurface, depth: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::Domain(format!("grid needs at least 2x2 elements, got {nx}x{ny}")));
        }
        if !(depth > 0.0) {
            return Err(Error::Domain(format!("depth must be positive, got {depth}")));
        }
        let fine = Lattice::new(surface, depth, 2 * nx + 1, 2 * ny + 1);
        let coarse = fine.subsample();
        let zmin = surface.min_height();
        let zmax = surface.max_height();
        let band = (0.25 * zmin, 0.5 * zmin);
        let worst_spacing = (zmax + depth) * fine.h_s;
        let intervals = (band.1 - band.0) / worst_spacing;
        if intervals < BAND_INTERVALS as f64 - 1e-9 {
            let need = ((BAND_INTERVALS as f64 * (zmax + depth) / (band.1 - band.0)) / 2.0).ceil();
            return Err(Error::Domain(format!(
                "ny = {ny} resolves the cutoff band with {intervals:.2} intervals; need ny >= {need}"
            )));
        }
        Ok(Self { nx, ny, ell: surface.ell(), depth, fine, coarse, band })
    }

    /// Smallest ny accepted for the given heights.
    pub fn min_ny(surface: &EquilibriumSurface, depth: f64) -> usize {
        let zmin = surface.min_height();
        let zmax = surface.max_height();
        let width = 0.25 * zmin;
        ((BAND_INTERVALS as f64 * (zmax + depth) / width - 1e-9) / 2.0).ceil() as usize
    }

    /// Coarse-lattice values of a fine-lattice field.
    pub fn restrict(&self, f: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.coarse.len());
        for j in 0..self.coarse.nj {
            for i in 0..self.coarse.ni {
                out.push(f[self.fine.idx(2 * i, 2 * j)]);
            }
        }
        out
    }

    /// Bilinear interpolation of a coarse-lattice field onto the fine lattice.
    pub fn prolong(&self, f: &[f64]) -> Vec<f64> {
        let c = &self.coarse;
        let mut out = vec![0.0; self.fine.len()];
        for j in 0..self.fine.nj {
            let (j0, tj) = (j / 2, (j % 2) as f64 * 0.5);
            let j1 = (j0 + 1).min(c.nj - 1);
            for i in 0..self.fine.ni {
                let (i0, ti) = (i / 2, (i % 2) as f64 * 0.5);
                let i1 = (i0 + 1).min(c.ni - 1);
                let v = (1.0 - ti) * (1.0 - tj) * f[c.idx(i0, j0)]
                    + ti * (1.0 - tj) * f[c.idx(i1, j0)]
                    + (1.0 - ti) * tj * f[c.idx(i0, j1)]
                    + ti * tj * f[c.idx(i1, j1)];
                out[self.fine.idx(i, j)] = v;
            }
        }
        out
    }

    /// Surface samples on the coarse lattice from fine surface samples.
    pub fn restrict_surface(&self, f: &[f64]) -> Vec<f64> {
        f.iter().step_by(2).copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::PhysicalParams;

    fn flat() -> EquilibriumSurface {
        EquilibriumSurface::flat(&PhysicalParams::default(), 1.0, 64)
    }

    #[test]
    fn band_guard() {
        let s = flat();
        assert_eq!(Grid::min_ny(&s, 0.25), 20);
        assert!(Grid::new(&s, 0.25, 8, 19).is_err());
        assert!(Grid::new(&s, 0.25, 8, 20).is_ok());
    }

    #[test]
    fn lattice_is_monotone_and_nested() {
        let g = Grid::new(&flat(), 0.25, 6, 20).unwrap();
        assert_eq!(g.fine.ni, 13);
        assert_eq!(g.coarse.ni, 7);
        assert!(g.fine.xi.windows(2).all(|w| w[1] > w[0]));
        for j in 0..g.coarse.nj {
            for i in 0..g.coarse.ni {
                assert_eq!(g.coarse.x2[g.coarse.idx(i, j)], g.fine.x2[g.fine.idx(2 * i, 2 * j)]);
            }
        }
    }

    #[test]
    fn derivatives_exact_on_quadratics() {
        let g = Grid::new(&flat(), 0.25, 6, 20).unwrap();
        let l = &g.fine;
        let f: Vec<f64> = (0..l.len())
            .map(|k| {
                let (i, j) = (k % l.ni, k / l.ni);
                let (x, y) = (l.xi[i], l.x2[k]);
                let _ = j;
                x * x + 3.0 * x * y - y * y
            })
            .collect();
        let d1 = l.d1(&f);
        let d2 = l.d2(&f);
        for k in 0..l.len() {
            let (x, y) = (l.xi[k % l.ni], l.x2[k]);
            assert!((d1[k] - (2.0 * x + 3.0 * y)).abs() < 1e-11);
            assert!((d2[k] - (3.0 * x - 2.0 * y)).abs() < 1e-11);
        }
    }

    #[test]
    fn weights_integrate_area() {
        let g = Grid::new(&flat(), 0.25, 6, 20).unwrap();
        let area: f64 = g.fine.weights().iter().sum();
        assert!((area - 2.0 * 1.25).abs() < 1e-12);
    }

    #[test]
    fn prolong_restrict_roundtrip() {
        let g = Grid::new(&flat(), 0.25, 4, 20).unwrap();
        let f: Vec<f64> = (0..g.coarse.len()).map(|k| (k as f64).sin()).collect();
        let back = g.restrict(&g.prolong(&f));
        assert_eq!(back, f);
    }
}
