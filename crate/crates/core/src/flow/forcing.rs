//! The geometric correction of the time derivative and the nonlinear
//! interaction terms of the differentiated problems, by nodal differences on
//! the lattices.

use super::contact::{curvature_remainder, curvature_remainder_ds, linear_weight};
use super::momentum::{FlowProblem, FlowState};
use crate::error::{check_len, Error, Result};
use crate::geometry::{
    div_tensor_m, grad_m, stress_m, surface_slope, sym_grad_m, GeometryFields, Lattice, MatrixField, TensorField,
    VectorField,
};
use crate::heat::dt_forcing_chain;

/// R = -(J_t K) I - (A_t A^-1)^T, so that D_t v = d_t v - R v keeps the
/// transformed divergence of v at zero.
pub fn transport_operator_r(fields: &GeometryFields) -> Result<MatrixField> {
    let rates = fields.rates()?;
    let n = fields.j.len();
    let mut r = MatrixField { m11: vec![0.0; n], m12: vec![0.0; n], m21: vec![0.0; n], m22: vec![0.0; n] };
    for q in 0..n {
        let a = fields.cal_a.at(q);
        let at = rates.cal_a_t.at(q);
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        assert!(det > 0.0, "singular map matrix at node {q}");
        let inv = [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]];
        let mut p = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                p[i][j] = at[i][0] * inv[0][j] + at[i][1] * inv[1][j];
            }
        }
        let s = rates.j_t[q] * fields.k[q];
        r.m11[q] = -s - p[0][0];
        r.m12[q] = -p[1][0];
        r.m21[q] = -p[0][1];
        r.m22[q] = -s - p[1][1];
    }
    Ok(r)
}

/// (M v)_i = M_ij v_j.
pub fn apply_matrix(m: &MatrixField, v: &VectorField) -> VectorField {
    let n = m.len();
    [
        (0..n).map(|q| m.m11[q] * v[0][q] + m.m12[q] * v[1][q]).collect(),
        (0..n).map(|q| m.m21[q] * v[0][q] + m.m22[q] * v[1][q]).collect(),
    ]
}

/// Interaction terms of one differentiated problem.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowForcing {
    pub order: usize,
    /// Bulk momentum forcing on the fine lattice.
    pub f1: VectorField,
    /// Curvature remainder term per fine surface node.
    pub f3: Vec<f64>,
    /// Vector traction forcing per fine surface node.
    pub f4: VectorField,
    /// Tangential wall forcing in the side-trace order of the fine lattice.
    pub f5: Vec<f64>,
    /// Contact-point forcing at -ell and +ell.
    pub f7: [f64; 2],
    /// Bulk heat forcing on the coarse lattice.
    pub f8: Vec<f64>,
    /// Surface heat forcing per coarse surface node.
    pub f9: Vec<f64>,
}

impl FlowForcing {
    pub fn sup_norm(&self) -> f64 {
        let parts: [&[f64]; 8] = [&self.f1[0], &self.f1[1], &self.f3, &self.f4[0], &self.f4[1], &self.f5, &self.f8, &self.f9];
        let m = parts.iter().flat_map(|v| v.iter()).fold(0.0f64, |m, x| m.max(x.abs()));
        m.max(self.f7[0].abs()).max(self.f7[1].abs())
    }

    fn rate(new: &Self, old: &Self, dt: f64) -> Self {
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) / dt).collect::<Vec<f64>>();
        Self {
            order: new.order,
            f1: [d(&new.f1[0], &old.f1[0]), d(&new.f1[1], &old.f1[1])],
            f3: d(&new.f3, &old.f3),
            f4: [d(&new.f4[0], &old.f4[0]), d(&new.f4[1], &old.f4[1])],
            f5: d(&new.f5, &old.f5),
            f7: [(new.f7[0] - old.f7[0]) / dt, (new.f7[1] - old.f7[1]) / dt],
            f8: d(&new.f8, &old.f8),
            f9: d(&new.f9, &old.f9),
        }
    }
}

/// One stored time level: the flow state, its geometry (with rates) and the
/// temperature with its rate on the coarse lattice.
#[derive(Debug, Clone, Copy)]
pub struct ForcingLevel<'a> {
    pub state: &'a FlowState,
    pub fields: &'a GeometryFields,
    pub theta: &'a [f64],
    pub dtheta_dt: &'a [f64],
}

fn add(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

fn add_v(a: &VectorField, b: &VectorField, s: f64) -> VectorField {
    [add(&a[0], &b[0], s), add(&a[1], &b[1], s)]
}

fn tensor_scale(t: TensorField, s: f64) -> TensorField {
    t.map(|c| c.into_iter().map(|v| v * s).collect())
}

/// (T n)_i at the surface nodes for a surface vector n.
fn tensor_on_normal(lat: &Lattice, t: &TensorField, n: &[[f64; 2]]) -> VectorField {
    let mut out = [vec![0.0; lat.ni], vec![0.0; lat.ni]];
    for i in 0..lat.ni {
        let q = lat.top(i);
        out[0][i] = t[0][q] * n[i][0] + t[1][q] * n[i][1];
        out[1][i] = t[2][q] * n[i][0] + t[3][q] * n[i][1];
    }
    out
}

/// (T nu) . tau along the walls and the bottom in side-trace order.
fn side_shear(lat: &Lattice, t: &TensorField) -> Vec<f64> {
    let (vals, _) = lat.side_trace(&t[2]);
    let (bottom, _) = lat.side_trace(&t[1]);
    let nj = lat.nj;
    let mut out = Vec::with_capacity(vals.len());
    for (k, v) in vals.iter().enumerate() {
        if k < nj {
            out.push(-v);
        } else if k < 2 * nj {
            out.push(*v);
        } else {
            out.push(-bottom[k]);
        }
    }
    out
}

/// Per-level quantities shared by the orders.
struct LevelData {
    r: MatrixField,
    p_fine: Vec<f64>,
    /// D_t u = u_t - R u.
    dtu: VectorField,
    time: f64,
}

fn level_data(problem: &FlowProblem, lv: &ForcingLevel) -> Result<LevelData> {
    let r = transport_operator_r(lv.fields)?;
    let ru = apply_matrix(&r, &lv.state.u);
    Ok(LevelData {
        p_fine: problem.grid.prolong(&lv.state.p),
        dtu: add_v(&lv.state.du_dt, &ru, -1.0),
        r,
        time: lv.state.time,
    })
}

fn check_level(problem: &FlowProblem, lv: &ForcingLevel) -> Result<()> {
    let g = &problem.grid;
    check_len(g.fine.len(), lv.fields.j.len())?;
    check_len(g.fine.len(), lv.state.u[0].len())?;
    check_len(g.coarse.len(), lv.theta.len())?;
    check_len(g.coarse.len(), lv.dtheta_dt.len())?;
    check_len(g.fine.ni, lv.state.eta.len())?;
    lv.fields.rates()?;
    Ok(())
}

fn order_zero(problem: &FlowProblem, lv: &ForcingLevel, eps: f64) -> Result<FlowForcing> {
    let prm = &problem.params;
    let grid = &problem.grid;
    let lat = &lv.fields.lattice;
    let f = lv.fields;
    let rates = f.rates()?;
    let st = lv.state;
    let theta_f = grid.prolong(lv.theta);
    let mut f1: VectorField = [vec![0.0; lat.len()], vec![0.0; lat.len()]];
    for c in 0..2 {
        let g = grad_m(lat, &f.cal_a, &st.u[c])?;
        let d2 = lat.d2(&st.u[c]);
        for q in 0..lat.len() {
            f1[c][q] = rates.mesh_velocity[q] * f.k[q] * d2[q] - (st.u[0][q] * g[0][q] + st.u[1][q] * g[1][q]);
        }
    }
    for q in 0..lat.len() {
        f1[1][q] -= prm.g * theta_f[q];
    }
    let ns = lat.ni;
    let h = lat.h_xi;
    let d1e = surface_slope(&st.eta, h);
    let d1v = surface_slope(&st.deta_dt, h);
    let f3: Vec<f64> = (0..ns).map(|i| prm.sigma1 * curvature_remainder(lat.dzeta0[i], d1e[i])).collect();
    let lin: Vec<f64> = (0..ns).map(|i| (d1e[i] + eps * d1v[i]) * linear_weight(lat.dzeta0[i])).collect();
    let dlin = surface_slope(&lin, h);
    let th_s = lat.top_row(&theta_f);
    let f4 = [0, 1].map(|c| (0..ns).map(|i| prm.sigma2 * th_s[i] * dlin[i] * f.normal[i][c]).collect());
    let (side, _) = lat.side_trace(&vec![0.0; lat.len()]);
    let m = &problem.model;
    let f7 = [m.kappa * m.remainder(st.deta_dt[0]), m.kappa * m.remainder(st.deta_dt[ns - 1])];
    let coarse = f.restrict(grid);
    let cl = &coarse.lattice;
    let uc = [grid.restrict(&st.u[0]), grid.restrict(&st.u[1])];
    let gt = grad_m(cl, &coarse.cal_a, lv.theta)?;
    let d2t = cl.d2(lv.theta);
    let crates = coarse.rates()?;
    let f8 = (0..cl.len())
        .map(|q| crates.mesh_velocity[q] * coarse.k[q] * d2t[q] - (uc[0][q] * gt[0][q] + uc[1][q] * gt[1][q]))
        .collect();
    Ok(FlowForcing { order: 0, f1, f3, f4, f5: vec![0.0; side.len()], f7, f8, f9: vec![0.0; cl.ni] })
}

/// Terms shared by orders one and two for a velocity-like field w with
/// pressure-like field q: -d_t R w0 - R D_t-like terms are added by the caller.
struct Commutators {
    /// -div_{A_t} S_A(q, w) + mu div_A D_{A_t} w + mu div_A D_A(R w).
    bulk: VectorField,
    /// mu D_{A_t} w + mu D_A(R w), the tensor itself.
    tensor: TensorField,
    /// S_A(q, w).
    stress: TensorField,
}

fn commutators(problem: &FlowProblem, f: &GeometryFields, r: &MatrixField, q: &[f64], w: &VectorField) -> Result<Commutators> {
    let mu = problem.params.mu;
    let lat = &f.lattice;
    let rates = f.rates()?;
    let stress = stress_m(lat, &f.cal_a, q, w, mu)?;
    let a = div_tensor_m(lat, &rates.cal_a_t, &stress)?;
    let dt_sym = sym_grad_m(lat, &rates.cal_a_t, w)?;
    let rw = apply_matrix(r, w);
    let r_sym = sym_grad_m(lat, &f.cal_a, &rw)?;
    let tensor: TensorField = [0, 1, 2, 3].map(|k| add(&dt_sym[k], &r_sym[k], 1.0));
    let tensor = tensor_scale(tensor, mu);
    let b = div_tensor_m(lat, &f.cal_a, &tensor)?;
    Ok(Commutators { bulk: add_v(&b, &a, -1.0), tensor, stress })
}

fn order_one(problem: &FlowProblem, levels: &[ForcingLevel], eps: f64) -> Result<FlowForcing> {
    let n = levels.len();
    let (now, prev) = (&levels[n - 1], &levels[n - 2]);
    let dnow = level_data(problem, now)?;
    let dprev = level_data(problem, prev)?;
    let dt = dnow.time - dprev.time;
    if !(dt > 0.0) {
        return Err(Error::Domain("forcing levels must have increasing times".into()));
    }
    let f0 = order_zero(problem, now, eps)?;
    let f0p = order_zero(problem, prev, eps)?;
    let rate = FlowForcing::rate(&f0, &f0p, dt);
    let prm = &problem.params;
    let f = now.fields;
    let rates = f.rates()?;
    let lat = &f.lattice;
    let st = now.state;
    let u = &st.u;
    let r = &dnow.r;
    let r_t = MatrixField {
        m11: add(&dnow.r.m11, &dprev.r.m11, -1.0).iter().map(|v| v / dt).collect(),
        m12: add(&dnow.r.m12, &dprev.r.m12, -1.0).iter().map(|v| v / dt).collect(),
        m21: add(&dnow.r.m21, &dprev.r.m21, -1.0).iter().map(|v| v / dt).collect(),
        m22: add(&dnow.r.m22, &dprev.r.m22, -1.0).iter().map(|v| v / dt).collect(),
    };
    let com = commutators(problem, f, r, &dnow.p_fine, u)?;
    let rtu = apply_matrix(&r_t, u);
    let rdtu = apply_matrix(r, &dnow.dtu);
    let r2u = apply_matrix(r, &apply_matrix(r, u));
    let mut f1 = add_v(&rate.f1, &rtu, -1.0);
    f1 = add_v(&f1, &rdtu, -1.0);
    f1 = add_v(&f1, &r2u, -1.0);
    f1 = add_v(&f1, &com.bulk, 1.0);

    let ns = lat.ni;
    let h = lat.h_xi;
    let d1e = surface_slope(&st.eta, h);
    let d1v = surface_slope(&st.deta_dt, h);
    let d1a = surface_slope(&st.d2eta_dt2, h);
    let f3: Vec<f64> = (0..ns)
        .map(|i| prm.sigma1 * curvature_remainder_ds(lat.dzeta0[i], d1e[i]).0 * d1v[i])
        .collect();
    let bracket: Vec<f64> = (0..ns)
        .map(|i| (d1e[i] + eps * d1v[i]) * linear_weight(lat.dzeta0[i]) + curvature_remainder(lat.dzeta0[i], d1e[i]))
        .collect();
    let db = surface_slope(&bracket, h);
    let scal: Vec<f64> = (0..ns).map(|i| prm.g * (st.eta[i] + eps * st.deta_dt[i]) - prm.sigma1 * db[i]).collect();
    let f4 = surface_vector(lat, &rate.f4, &scal, &com, &rates.normal_t, &f.normal);
    let f5 = add(&rate.f5, &side_shear(lat, &com.tensor), 1.0);
    let m = &problem.model;
    let f7 = [0, ns - 1].map(|i| m.kappa * m.remainder_d1(st.deta_dt[i]) * st.d2eta_dt2[i]);
    let coarse = f.restrict(&problem.grid);
    let chain = dt_forcing_chain(&coarse, prm.k, now.theta, &rate.f8, &rate.f9)?;
    let _ = d1a;
    Ok(FlowForcing { order: 1, f1, f3, f4, f5, f7, f8: chain.f8_1, f9: chain.f9_1 })
}

/// rate + scal N_t - S N_t + (tensor) N at the surface nodes.
fn surface_vector(
    lat: &Lattice,
    rate: &VectorField,
    scal: &[f64],
    com: &Commutators,
    normal_t: &[[f64; 2]],
    normal: &[[f64; 2]],
) -> VectorField {
    let sn = tensor_on_normal(lat, &com.stress, normal_t);
    let tn = tensor_on_normal(lat, &com.tensor, normal);
    [0, 1].map(|c| {
        (0..lat.ni).map(|i| rate[c][i] + scal[i] * normal_t[i][c] - sn[c][i] + tn[c][i]).collect()
    })
}

fn order_two(problem: &FlowProblem, levels: &[ForcingLevel], eps: f64) -> Result<FlowForcing> {
    let n = levels.len();
    let f1n = order_one(problem, &levels[n - 2..], eps)?;
    let f1p = order_one(problem, &levels[n - 3..n - 1], eps)?;
    let (now, prev) = (&levels[n - 1], &levels[n - 2]);
    let dnow = level_data(problem, now)?;
    let dprev = level_data(problem, prev)?;
    let dt = dnow.time - dprev.time;
    let rate = FlowForcing::rate(&f1n, &f1p, dt);
    let prm = &problem.params;
    let f = now.fields;
    let rates = f.rates()?;
    let lat = &f.lattice;
    let st = now.state;
    let r = &dnow.r;
    let r_t = MatrixField {
        m11: add(&dnow.r.m11, &dprev.r.m11, -1.0).iter().map(|v| v / dt).collect(),
        m12: add(&dnow.r.m12, &dprev.r.m12, -1.0).iter().map(|v| v / dt).collect(),
        m21: add(&dnow.r.m21, &dprev.r.m21, -1.0).iter().map(|v| v / dt).collect(),
        m22: add(&dnow.r.m22, &dprev.r.m22, -1.0).iter().map(|v| v / dt).collect(),
    };
    let dtu = &dnow.dtu;
    // D_t^2 u = d_t (D_t u) - R D_t u
    let dtdtu: VectorField = [0, 1].map(|c| add(&dnow.dtu[c], &dprev.dtu[c], -1.0).iter().map(|v| v / dt).collect());
    let rdtu = apply_matrix(r, dtu);
    let dt2u = add_v(&dtdtu, &rdtu, -1.0);
    let p_t: Vec<f64> = add(&dnow.p_fine, &dprev.p_fine, -1.0).iter().map(|v| v / dt).collect();
    let com = commutators(problem, f, r, &p_t, dtu)?;
    let mut f1 = add_v(&rate.f1, &apply_matrix(&r_t, dtu), -1.0);
    f1 = add_v(&f1, &apply_matrix(r, &dt2u), -1.0);
    f1 = add_v(&f1, &apply_matrix(r, &rdtu), -1.0);
    f1 = add_v(&f1, &com.bulk, 1.0);

    let ns = lat.ni;
    let h = lat.h_xi;
    let d1e = surface_slope(&st.eta, h);
    let d1v = surface_slope(&st.deta_dt, h);
    let d1a = surface_slope(&st.d2eta_dt2, h);
    let f3: Vec<f64> = (0..ns)
        .map(|i| {
            let (rs, rss) = curvature_remainder_ds(lat.dzeta0[i], d1e[i]);
            prm.sigma1 * (rss * d1v[i] * d1v[i] + rs * d1a[i])
        })
        .collect();
    let bracket: Vec<f64> = (0..ns)
        .map(|i| {
            (d1v[i] + eps * d1a[i]) * linear_weight(lat.dzeta0[i])
                + curvature_remainder_ds(lat.dzeta0[i], d1e[i]).0 * d1v[i]
        })
        .collect();
    let db = surface_slope(&bracket, h);
    let scal: Vec<f64> =
        (0..ns).map(|i| prm.g * (st.deta_dt[i] + eps * st.d2eta_dt2[i]) - prm.sigma1 * db[i]).collect();
    let f4 = surface_vector(lat, &rate.f4, &scal, &com, &rates.normal_t, &f.normal);
    let f5 = add(&rate.f5, &side_shear(lat, &com.tensor), 1.0);
    // third surface derivative by differencing the stored second one
    let d3 = |i: usize| (now.state.d2eta_dt2[i] - prev.state.d2eta_dt2[i]) / dt;
    let m = &problem.model;
    let f7 = [0, ns - 1].map(|i| {
        let v = st.deta_dt[i];
        m.kappa * m.remainder_d1(v) * d3(i) + m.kappa * m.remainder_d2(v) * st.d2eta_dt2[i].powi(2)
    });
    let coarse = f.restrict(&problem.grid);
    let chain = dt_forcing_chain(&coarse, prm.k, now.dtheta_dt, &rate.f8, &rate.f9)?;
    Ok(FlowForcing { order: 2, f1, f3, f4, f5, f7, f8: chain.f8_1, f9: chain.f9_1 })
}

/// Interaction terms of order j in {0, 1, 2} at the newest of `levels`
/// (oldest first). Order j needs j + 1 levels; the time derivatives of the
/// lower-order terms are backward differences between levels.
pub fn assemble_flow_forcing(problem: &FlowProblem, levels: &[ForcingLevel], eps: f64, order: usize) -> Result<FlowForcing> {
    if order > 2 {
        return Err(Error::Unsupported(format!("forcing of order {order}")));
    }
    if levels.len() < order + 1 {
        return Err(Error::MissingRates(format!(
            "order {order} forcing needs {} stored levels, have {}",
            order + 1,
            levels.len()
        )));
    }
    for lv in levels {
        check_level(problem, lv)?;
    }
    match order {
        0 => order_zero(problem, &levels[levels.len() - 1], eps),
        1 => order_one(problem, levels, eps),
        _ => order_two(problem, levels, eps),
    }
}
