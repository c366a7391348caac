use super::extension::SurfaceExtension;
use super::grid::{diff_line, Grid, Lattice};
use super::ops::MatrixField;
use crate::equilibrium::EquilibriumSurface;
use crate::error::{check_len, Error, Result};

/// Height cutoff phi: 0 below `lo`, the identity above `hi`, and
/// z * S((z - lo)/(hi - lo)) in between, S the C4 smoothstep of degree 9.
/// Returns (phi, phi').
pub fn cutoff(z: f64, lo: f64, hi: f64) -> (f64, f64) {
    if z <= lo {
        (0.0, 0.0)
    } else if z >= hi {
        (z, 1.0)
    } else {
        let w = hi - lo;
        let t = (z - lo) / w;
        let t4 = t * t * t * t;
        let s = t4 * t * (126.0 + t * (-420.0 + t * (540.0 + t * (-315.0 + 70.0 * t))));
        let ds = 630.0 * t4 * (1.0 - t).powi(4) / w;
        (z * s, s + z * ds)
    }
}

/// Time derivatives of the coefficient fields for a prescribed surface velocity.
#[derive(Debug, Clone)]
pub struct GeometryRates {
    pub deta_dt: Vec<f64>,
    pub eta_bar_t: Vec<f64>,
    pub d1_eta_bar_t: Vec<f64>,
    pub d2_eta_bar_t: Vec<f64>,
    pub a_t: Vec<f64>,
    pub j_t: Vec<f64>,
    pub k_t: Vec<f64>,
    pub cal_a_t: MatrixField,
    /// Vertical velocity of the mapped nodes, W times the extension rate.
    pub mesh_velocity: Vec<f64>,
    /// Surface slope of the velocity, d1 of deta_dt.
    pub d1_deta_dt: Vec<f64>,
    pub normal_t: Vec<[f64; 2]>,
    pub normal_len_t: Vec<f64>,
}

/// Coefficient fields of the flattening map on a lattice.
#[derive(Debug, Clone)]
pub struct GeometryFields {
    pub lattice: Lattice,
    pub eta: Vec<f64>,
    pub d1_eta: Vec<f64>,
    pub eta_bar: Vec<f64>,
    pub d1_eta_bar: Vec<f64>,
    pub d2_eta_bar: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub w: Vec<f64>,
    pub a: Vec<f64>,
    pub j: Vec<f64>,
    pub k: Vec<f64>,
    pub cal_a: MatrixField,
    /// Physical height of every node, x2 + W eta_bar.
    pub y2: Vec<f64>,
    pub normal: Vec<[f64; 2]>,
    pub normal_len: Vec<f64>,
    pub rates: Option<GeometryRates>,
}

/// Second-order slope of surface samples.
pub(crate) fn surface_slope(f: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    diff_line(f, 0, 1, f.len(), h, &mut out);
    out
}

struct Composition {
    eta_bar: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

fn compose(lat: &Lattice, ext: &SurfaceExtension) -> Composition {
    let n = lat.len();
    let mut c = Composition { eta_bar: vec![0.0; n], d1: vec![0.0; n], d2: vec![0.0; n] };
    for j in 0..lat.nj {
        for i in 0..lat.ni {
            let k = lat.idx(i, j);
            let z = lat.x2[k] - lat.zeta0[i];
            let (f, fx, fz) = ext.eval(lat.xi[i], z.min(0.0));
            c.eta_bar[k] = f;
            c.d1[k] = fx - lat.dzeta0[i] * fz;
            c.d2[k] = fz;
        }
    }
    c
}

/// Evaluates the map coefficients on the fine lattice of `grid` for the
/// surface perturbation `eta` (fine surface samples) and, optionally, its
/// time derivative.
pub fn build_geometry(
    surface: &EquilibriumSurface,
    eta: &[f64],
    deta_dt: Option<&[f64]>,
    grid: &Grid,
    j_min: f64,
) -> Result<GeometryFields> {
    let lat = &grid.fine;
    check_len(lat.ni, eta.len())?;
    if let Some(v) = deta_dt {
        check_len(lat.ni, v.len())?;
    }
    if (surface.ell() - grid.ell).abs() > 1e-12 * grid.ell {
        return Err(Error::Domain("grid and surface disagree on the vessel width".into()));
    }
    let (lo, hi) = grid.band;
    let n = lat.len();
    let ext = SurfaceExtension::new(eta, grid.ell);
    let comp = compose(lat, &ext);
    let mut phi = vec![0.0; n];
    let mut dphi = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut a = vec![0.0; n];
    let mut jac = vec![0.0; n];
    let mut kk = vec![0.0; n];
    let mut y2 = vec![0.0; n];
    for jr in 0..lat.nj {
        for i in 0..lat.ni {
            let q = lat.idx(i, jr);
            let (p, dp) = cutoff(lat.x2[q], lo, hi);
            let z0 = lat.zeta0[i];
            phi[q] = p;
            dphi[q] = dp;
            w[q] = p / z0;
            a[q] = w[q] * comp.d1[q] - p / (z0 * z0) * lat.dzeta0[i] * comp.eta_bar[q];
            jac[q] = 1.0 + dp / z0 * comp.eta_bar[q] + w[q] * comp.d2[q];
            kk[q] = 1.0 / jac[q];
            y2[q] = lat.x2[q] + w[q] * comp.eta_bar[q];
        }
    }
    let min_j = jac.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_j > j_min) {
        return Err(Error::Diffeomorphism { min_j, threshold: j_min });
    }
    let m12: Vec<f64> = a.iter().zip(&kk).map(|(a, k)| -a * k).collect();
    let cal_a = MatrixField { m11: vec![1.0; n], m12, m21: vec![0.0; n], m22: kk.clone() };
    let d1_eta = surface_slope(eta, lat.h_xi);
    let normal: Vec<[f64; 2]> =
        (0..lat.ni).map(|i| [-(lat.dzeta0[i] + d1_eta[i]), 1.0]).collect();
    let normal_len: Vec<f64> = normal.iter().map(|v| v[0].hypot(v[1])).collect();

    let rates = deta_dt.map(|v| {
        let ext_t = SurfaceExtension::new(v, grid.ell);
        let ct = compose(lat, &ext_t);
        let mut a_t = vec![0.0; n];
        let mut j_t = vec![0.0; n];
        let mut k_t = vec![0.0; n];
        let mut mesh = vec![0.0; n];
        for jr in 0..lat.nj {
            for i in 0..lat.ni {
                let q = lat.idx(i, jr);
                let z0 = lat.zeta0[i];
                a_t[q] = w[q] * ct.d1[q] - phi[q] / (z0 * z0) * lat.dzeta0[i] * ct.eta_bar[q];
                j_t[q] = dphi[q] / z0 * ct.eta_bar[q] + w[q] * ct.d2[q];
                k_t[q] = -j_t[q] / (jac[q] * jac[q]);
                mesh[q] = w[q] * ct.eta_bar[q];
            }
        }
        let m12_t: Vec<f64> = (0..n).map(|q| -(a_t[q] * kk[q] + a[q] * k_t[q])).collect();
        let cal_a_t = MatrixField { m11: vec![0.0; n], m12: m12_t, m21: vec![0.0; n], m22: k_t.clone() };
        let d1v = surface_slope(v, lat.h_xi);
        let normal_t: Vec<[f64; 2]> = d1v.iter().map(|d| [-d, 0.0]).collect();
        let normal_len_t: Vec<f64> = (0..lat.ni)
            .map(|i| (lat.dzeta0[i] + d1_eta[i]) * d1v[i] / normal_len[i])
            .collect();
        GeometryRates {
            deta_dt: v.to_vec(),
            eta_bar_t: ct.eta_bar,
            d1_eta_bar_t: ct.d1,
            d2_eta_bar_t: ct.d2,
            a_t,
            j_t,
            k_t,
            cal_a_t,
            mesh_velocity: mesh,
            d1_deta_dt: d1v,
            normal_t,
            normal_len_t,
        }
    });

    Ok(GeometryFields {
        lattice: lat.clone(),
        eta: eta.to_vec(),
        d1_eta,
        eta_bar: comp.eta_bar,
        d1_eta_bar: comp.d1,
        d2_eta_bar: comp.d2,
        phi,
        dphi,
        w,
        a,
        j: jac,
        k: kk,
        cal_a,
        y2,
        normal,
        normal_len,
        rates,
    })
}

impl GeometryFields {
    /// The same fields sampled on the coarse lattice of `grid`.
    pub fn restrict(&self, grid: &Grid) -> GeometryFields {
        let r = |v: &[f64]| grid.restrict(v);
        let rs = |v: &[f64]| grid.restrict_surface(v);
        let rs2 = |v: &[[f64; 2]]| v.iter().step_by(2).copied().collect::<Vec<_>>();
        GeometryFields {
            lattice: grid.coarse.clone(),
            eta: rs(&self.eta),
            d1_eta: rs(&self.d1_eta),
            eta_bar: r(&self.eta_bar),
            d1_eta_bar: r(&self.d1_eta_bar),
            d2_eta_bar: r(&self.d2_eta_bar),
            phi: r(&self.phi),
            dphi: r(&self.dphi),
            w: r(&self.w),
            a: r(&self.a),
            j: r(&self.j),
            k: r(&self.k),
            cal_a: self.cal_a.map(r),
            y2: r(&self.y2),
            normal: rs2(&self.normal),
            normal_len: rs(&self.normal_len),
            rates: self.rates.as_ref().map(|t| GeometryRates {
                deta_dt: rs(&t.deta_dt),
                eta_bar_t: r(&t.eta_bar_t),
                d1_eta_bar_t: r(&t.d1_eta_bar_t),
                d2_eta_bar_t: r(&t.d2_eta_bar_t),
                a_t: r(&t.a_t),
                j_t: r(&t.j_t),
                k_t: r(&t.k_t),
                cal_a_t: t.cal_a_t.map(r),
                mesh_velocity: r(&t.mesh_velocity),
                d1_deta_dt: rs(&t.d1_deta_dt),
                normal_t: rs2(&t.normal_t),
                normal_len_t: rs(&t.normal_len_t),
            }),
        }
    }

    pub fn rates(&self) -> Result<&GeometryRates> {
        self.rates.as_ref().ok_or_else(|| Error::MissingRates("geometry built without surface velocity".into()))
    }

    pub fn min_j(&self) -> f64 {
        self.j.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Node-wise dump of the scalar coefficient fields.
    pub fn to_csv(&self) -> String {
        let l = &self.lattice;
        let mut s = String::from("i,j,x1,x2,y2,eta_bar,A,J,K,W,A11,A12,A21,A22\n");
        for jr in 0..l.nj {
            for i in 0..l.ni {
                let q = l.idx(i, jr);
                s.push_str(&format!(
                    "{i},{jr},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e}\n",
                    l.xi[i], l.x2[q], self.y2[q], self.eta_bar[q], self.a[q], self.j[q], self.k[q], self.w[q],
                    self.cal_a.m11[q], self.cal_a.m12[q], self.cal_a.m21[q], self.cal_a.m22[q]
                ));
            }
        }
        s
    }
}
