//! Quadrilateral elements on the mapped grid.
//!
//! Each grid cell is an isoparametric biquadratic element whose nine nodes
//! are the fine-lattice nodes of the cell placed at their physical positions.
//! Physical gradients of the element basis therefore equal the transformed
//! gradients of the flattened formulation, and the physical measure equals
//! J times the equilibrium measure. Biquadratic functions carry velocity and
//! geometry, bilinear functions on the cell corners carry pressure and
//! temperature.

use crate::geometry::Grid;

/// Three-point Gauss rule on [0, 1].
pub const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Quadratic Lagrange basis on the nodes 0, 1/2, 1 with derivatives.
#[inline]
pub fn q2_1d(t: f64) -> ([f64; 3], [f64; 3]) {
    (
        [2.0 * (t - 0.5) * (t - 1.0), 4.0 * t * (1.0 - t), 2.0 * t * (t - 0.5)],
        [4.0 * t - 3.0, 4.0 - 8.0 * t, 4.0 * t - 1.0],
    )
}

#[inline]
pub fn q1_1d(t: f64) -> ([f64; 2], [f64; 2]) {
    ([1.0 - t, t], [-1.0, 1.0])
}

#[derive(Debug, Clone)]
pub struct QuadPoint {
    /// Quadrature weight times the physical area element.
    pub weight: f64,
    pub y: [f64; 2],
    pub q2: [f64; 9],
    pub q2_grad: [[f64; 2]; 9],
    pub q1: [f64; 4],
    pub q1_grad: [[f64; 2]; 4],
}

#[derive(Debug, Clone)]
pub struct Element {
    pub ex: usize,
    pub ey: usize,
    /// Fine-lattice node indices, local order b * 3 + a.
    pub fine: [usize; 9],
    /// Coarse-lattice node indices, local order b * 2 + a.
    pub coarse: [usize; 4],
    pub points: Vec<QuadPoint>,
}

#[derive(Debug, Clone)]
pub struct SurfacePoint {
    /// Quadrature weight times dx1.
    pub weight: f64,
    pub x1: f64,
    pub psi: [f64; 3],
    pub dpsi: [f64; 3],
    pub d2psi: [f64; 3],
    pub q1: [f64; 2],
    /// Upward normal (-d y2/d x1, 1) of the discrete free surface.
    pub normal: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct SurfaceElement {
    pub ex: usize,
    /// Fine surface indices 2 ex .. 2 ex + 2.
    pub nodes: [usize; 3],
    /// Coarse surface indices ex, ex + 1.
    pub coarse: [usize; 2],
    pub points: Vec<SurfacePoint>,
}

#[derive(Debug, Clone)]
pub struct SideEdge {
    /// Fine-lattice node indices along the edge.
    pub fine: [usize; 3],
    /// Coarse-lattice end nodes.
    pub coarse: [usize; 2],
    /// Velocity component tangent to the edge.
    pub tangent: usize,
    /// (weight times arc length, edge basis) per quadrature point.
    pub points: Vec<(f64, [f64; 3], [f64; 2])>,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub elements: Vec<Element>,
    pub top: Vec<SurfaceElement>,
    pub sides: Vec<SideEdge>,
    pub fine_len: usize,
    pub coarse_len: usize,
    pub surface_len: usize,
    pub coarse_surface_len: usize,
}

impl Mesh {
    /// Elements for the node heights `y2` on the fine lattice.
    pub fn new(grid: &Grid, y2: &[f64]) -> Self {
        let f = &grid.fine;
        let c = &grid.coarse;
        let hx = 2.0 * f.h_xi;
        let mut elements = Vec::with_capacity(grid.nx * grid.ny);
        for ey in 0..grid.ny {
            for ex in 0..grid.nx {
                let mut fine = [0; 9];
                for b in 0..3 {
                    for a in 0..3 {
                        fine[b * 3 + a] = f.idx(2 * ex + a, 2 * ey + b);
                    }
                }
                let mut coarse = [0; 4];
                for b in 0..2 {
                    for a in 0..2 {
                        coarse[b * 2 + a] = c.idx(ex + a, ey + b);
                    }
                }
                let x0 = f.xi[2 * ex];
                let mut points = Vec::with_capacity(9);
                for &(u, wu) in &GAUSS3 {
                    let (nu, du) = q2_1d(u);
                    let (mu, dmu) = q1_1d(u);
                    for &(t, wt) in &GAUSS3 {
                        let (nt, dt) = q2_1d(t);
                        let (mt, dmt) = q1_1d(t);
                        let mut y2v = 0.0;
                        let mut y2t = 0.0;
                        let mut y2u = 0.0;
                        let mut q2 = [0.0; 9];
                        let mut q2r = [[0.0; 2]; 9];
                        for b in 0..3 {
                            for a in 0..3 {
                                let l = b * 3 + a;
                                q2[l] = nt[a] * nu[b];
                                q2r[l] = [dt[a] * nu[b], nt[a] * du[b]];
                                let yv = y2[fine[l]];
                                y2v += q2[l] * yv;
                                y2t += q2r[l][0] * yv;
                                y2u += q2r[l][1] * yv;
                            }
                        }
                        let det = hx * y2u;
                        let map = |g: [f64; 2]| [g[0] / hx - y2t / (hx * y2u) * g[1], g[1] / y2u];
                        let q2_grad = q2r.map(map);
                        let mut q1 = [0.0; 4];
                        let mut q1_grad = [[0.0; 2]; 4];
                        for b in 0..2 {
                            for a in 0..2 {
                                q1[b * 2 + a] = mt[a] * mu[b];
                                q1_grad[b * 2 + a] = map([dmt[a] * mu[b], mt[a] * dmu[b]]);
                            }
                        }
                        points.push(QuadPoint {
                            weight: wt * wu * det,
                            y: [x0 + t * hx, y2v],
                            q2,
                            q2_grad,
                            q1,
                            q1_grad,
                        });
                    }
                }
                elements.push(Element { ex, ey, fine, coarse, points });
            }
        }

        let top_row = (f.nj - 1) * f.ni;
        let mut top = Vec::with_capacity(grid.nx);
        for ex in 0..grid.nx {
            let nodes = [2 * ex, 2 * ex + 1, 2 * ex + 2];
            let ys = nodes.map(|i| y2[top_row + i]);
            let mut points = Vec::with_capacity(3);
            for &(t, w) in &GAUSS3 {
                let (n, d) = q2_1d(t);
                let (m, _) = q1_1d(t);
                let slope = (d[0] * ys[0] + d[1] * ys[1] + d[2] * ys[2]) / hx;
                points.push(SurfacePoint {
                    weight: w * hx,
                    x1: f.xi[2 * ex] + t * hx,
                    psi: n,
                    dpsi: d.map(|v| v / hx),
                    d2psi: [4.0, -8.0, 4.0].map(|v| v / (hx * hx)),
                    q1: m,
                    normal: [-slope, 1.0],
                });
            }
            top.push(SurfaceElement { ex, nodes, coarse: [ex, ex + 1], points });
        }

        let mut sides = Vec::new();
        for (col, ccol) in [(0, 0), (f.ni - 1, c.ni - 1)] {
            for ey in 0..grid.ny {
                let fine = [0, 1, 2].map(|b| f.idx(col, 2 * ey + b));
                let ys = fine.map(|q| y2[q]);
                let pts = GAUSS3
                    .iter()
                    .map(|&(u, w)| {
                        let (n, d) = q2_1d(u);
                        let (m, _) = q1_1d(u);
                        let ds = (d[0] * ys[0] + d[1] * ys[1] + d[2] * ys[2]).abs();
                        (w * ds, n, m)
                    })
                    .collect();
                sides.push(SideEdge {
                    fine,
                    coarse: [c.idx(ccol, ey), c.idx(ccol, ey + 1)],
                    tangent: 1,
                    points: pts,
                });
            }
        }
        for ex in 0..grid.nx {
            let fine = [0, 1, 2].map(|a| f.idx(2 * ex + a, 0));
            let pts = GAUSS3
                .iter()
                .map(|&(t, w)| {
                    let (n, _) = q2_1d(t);
                    let (m, _) = q1_1d(t);
                    (w * hx, n, m)
                })
                .collect();
            sides.push(SideEdge { fine, coarse: [c.idx(ex, 0), c.idx(ex + 1, 0)], tangent: 0, points: pts });
        }

        Self {
            elements,
            top,
            sides,
            fine_len: f.len(),
            coarse_len: c.len(),
            surface_len: f.ni,
            coarse_surface_len: c.ni,
        }
    }

    /// Lumped weights of the biquadratic surface traces: the integral of each
    /// trace basis function over the free surface in x1.
    pub fn surface_mass(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.surface_len];
        for e in &self.top {
            for p in &e.points {
                for a in 0..3 {
                    m[e.nodes[a]] += p.weight * p.psi[a];
                }
            }
        }
        m
    }

    /// Integral of a biquadratic nodal field over the physical domain.
    pub fn integrate_fine(&self, f: &[f64]) -> f64 {
        self.elements
            .iter()
            .flat_map(|e| e.points.iter().map(move |p| p.weight * (0..9).map(|l| p.q2[l] * f[e.fine[l]]).sum::<f64>()))
            .sum()
    }

    pub fn area(&self) -> f64 {
        self.elements.iter().flat_map(|e| e.points.iter().map(|p| p.weight)).sum()
    }
}
