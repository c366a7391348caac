use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use thermocontact::equilibrium::{solve_equilibrium, EquilibriumSurface};
use thermocontact::geometry::{build_geometry, GeometryFields, Grid};
use thermocontact::heat::*;
use thermocontact::params::PhysicalParams;

const ELL: f64 = 0.5;
const DEPTH: f64 = 0.25;
const HEIGHT: f64 = 0.75;

fn flat(nx: usize, ny: usize) -> (EquilibriumSurface, Grid) {
    let p = PhysicalParams { ell: ELL, ..Default::default() };
    let s = EquilibriumSurface::flat(&p, HEIGHT, 64);
    let g = Grid::new(&s, DEPTH, nx, ny).unwrap();
    (s, g)
}

fn curved(nx: usize, ny: usize) -> (EquilibriumSurface, Grid) {
    let p = PhysicalParams { ell: ELL, gamma_jump: 0.1, ..Default::default() };
    let s = solve_equilibrium(&p, HEIGHT, 400, 1e-12).unwrap();
    let g = Grid::new(&s, DEPTH, nx, ny).unwrap();
    (s, g)
}

fn coef(k: f64) -> HeatCoefficients {
    HeatCoefficients { k, robin_weight: 1.0, dirichlet: true }
}

fn ops_for(s: &EquilibriumSurface, g: &Grid, eta: &[f64], k: f64) -> (GeometryFields, HeatOperators) {
    let f = build_geometry(s, eta, None, g, 0.1).unwrap();
    let o = HeatOperators::new(g, &f, coef(k)).unwrap();
    (f, o)
}

/// Roots of sin(mu H) + k mu cos(mu H) = 0, one in each ((n - 1/2) pi/H, n pi/H).
fn robin_roots(k: f64, h: f64, count: usize) -> Vec<f64> {
    let f = |mu: f64| (mu * h).sin() + k * mu * (mu * h).cos();
    (1..=count)
        .map(|n| {
            let (mut a, mut b) = ((n as f64 - 0.5) * PI / h, n as f64 * PI / h);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if f(a) * f(m) <= 0.0 {
                    b = m
                } else {
                    a = m
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

#[test]
fn eigenvalues_match_separated_variables() {
    let k = 1.0;
    let (s, g) = flat(32, 32);
    let (_, ops) = ops_for(&s, &g, &vec![0.0; g.fine.ni], k);
    let basis = build_basis(&ops, 8).unwrap();
    let h = HEIGHT + DEPTH;
    let mus = robin_roots(k, h, 4);
    let mut exact: Vec<f64> = Vec::new();
    for n in 1..=4 {
        for mu in &mus {
            let kx = n as f64 * PI / (2.0 * ELL);
            exact.push(k * (kx * kx + mu * mu));
        }
    }
    exact.sort_by(f64::total_cmp);
    for (num, ex) in basis.lambdas.iter().zip(&exact) {
        assert!((num - ex).abs() < 0.02 * ex, "{num} vs {ex}");
    }
}

#[test]
fn lowest_eigenvalue_minimises_rayleigh_quotient() {
    let (s, g) = curved(8, 24);
    let eta: Vec<f64> = g.fine.xi.iter().map(|x| 0.03 * (PI * x / ELL).cos()).collect();
    let (_, ops) = ops_for(&s, &g, &eta, 0.8);
    let basis = build_basis(&ops, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let mut v: Vec<f64> = vec![0.0; ops.len()];
        for &q in &ops.free {
            v[q] = rng.random_range(-1.0..1.0);
        }
        assert!(basis.lambdas[0] <= basis.rayleigh_quotient(&v));
    }
    assert!((basis.rayleigh_quotient(&basis.modes[0]) - basis.lambdas[0]).abs() < 1e-8 * basis.lambdas[0]);
}

#[test]
fn galerkin_full_basis_matches_nodal_path() {
    let (s, g) = flat(24, 24);
    let (_, ops) = ops_for(&s, &g, &vec![0.0; g.fine.ni], 1.0);
    let basis = build_basis(&ops, ops.free.len()).unwrap();
    let theta0 = ops.sample(|x, y| (PI * x / (2.0 * ELL)).cos() * (y + DEPTH) * (1.5 - y) + 0.1 * (3.0 * x).sin() * (y + DEPTH));
    let mut theta0 = theta0;
    for q in 0..ops.len() {
        if !ops.free.contains(&q) {
            theta0[q] = 0.0;
        }
    }
    let dt = 0.01;
    let cn = ops.crank_nicolson(dt).unwrap();
    let mut fd = HeatState::new(theta0.clone(), vec![0.0; ops.len()], 0.0);
    let d0 = basis.project(&theta0);
    let mut gs = GalerkinState { rate: vec![0.0; d0.len()], coeffs: d0, time: 0.0 };
    let forcing = HeatForcing { bulk: ops.sample(|x, _| x.cos()), surface: vec![0.2; ops.ni] };
    for _ in 0..20 {
        fd = step_fd(&ops, &cn, &fd, None, &forcing).unwrap().0;
        gs = step_galerkin(&basis, &ops, &gs, None, &forcing, dt).unwrap();
    }
    let th = basis.reconstruct(&gs.coeffs);
    let diff = fd.theta.iter().zip(&th).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-6, "{diff}");
}

#[test]
fn single_mode_decays_exponentially() {
    let (s, g) = flat(8, 24);
    let (_, ops) = ops_for(&s, &g, &vec![0.0; g.fine.ni], 1.0);
    let basis = build_basis(&ops, 3).unwrap();
    let lam = basis.lambdas[0];
    let t_end = 0.4;
    let err = |steps: usize| {
        let dt = t_end / steps as f64;
        let mut st = GalerkinState { coeffs: vec![1.0, 0.0, 0.0], rate: vec![0.0; 3], time: 0.0 };
        let mut energies = vec![];
        for _ in 0..steps {
            st = step_galerkin(&basis, &ops, &st, None, &HeatForcing::zero(&ops), dt).unwrap();
            energies.push(st.coeffs[0] * st.coeffs[0]);
        }
        assert!(energies.windows(2).all(|w| w[1] < w[0]));
        assert!(st.coeffs[1].abs() < 1e-12 && st.coeffs[2].abs() < 1e-12);
        (st.coeffs[0] - (-lam * t_end).exp()).abs()
    };
    let (e1, e2) = (err(20), err(40));
    assert!((e1 / e2).log2() > 1.9, "{e1} {e2}");
}

struct Manufactured {
    k: f64,
}

impl Manufactured {
    fn theta(&self, x: f64, y: f64, t: f64) -> f64 {
        (-t).exp() * (PI * x / (2.0 * ELL)).cos() * ((y + DEPTH) * (1.0 + 0.5 * y))
    }
    fn grad(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let e = (-t).exp();
        let cx = (PI * x / (2.0 * ELL)).cos();
        let sx = (PI * x / (2.0 * ELL)).sin();
        let yy = (y + DEPTH) * (1.0 + 0.5 * y);
        let dyy = (1.0 + 0.5 * y) + 0.5 * (y + DEPTH);
        [-e * PI / (2.0 * ELL) * sx * yy, e * cx * dyy]
    }
    fn lap(&self, x: f64, y: f64, t: f64) -> f64 {
        let e = (-t).exp();
        let cx = (PI * x / (2.0 * ELL)).cos();
        let yy = (y + DEPTH) * (1.0 + 0.5 * y);
        let kx = PI / (2.0 * ELL);
        e * cx * (-kx * kx * yy + 1.0)
    }
    fn bulk(&self, x: f64, y: f64, t: f64) -> f64 {
        -self.theta(x, y, t) - self.k * self.lap(x, y, t)
    }
    /// k grad theta . N + theta |N| at the surface nodes of `ops`.
    fn surface(&self, ops: &HeatOperators, f: &GeometryFields, grid: &Grid, t: f64) -> Vec<f64> {
        let normal: Vec<[f64; 2]> = f.normal.iter().step_by(2).copied().collect();
        let _ = grid;
        (0..ops.ni)
            .map(|i| {
                let p = ops.nodes[ops.top(i)];
                let gr = self.grad(p[0], p[1], t);
                let n = normal[i];
                self.k * (gr[0] * n[0] + gr[1] * n[1]) + self.theta(p[0], p[1], t) * n[0].hypot(n[1])
            })
            .collect()
    }
}

/// Nodal run with the exact solution's data; geometry may move with time.
/// Returns the final temperature, its exact nodal values and the final operators.
fn run_manufactured(nx: usize, ny: usize, steps: usize, t_end: f64, moving: bool) -> (Vec<f64>, Vec<f64>, HeatOperators) {
    let ms = Manufactured { k: 0.8 };
    let (s, g) = curved(nx, ny);
    let eta_at = |t: f64| -> (Vec<f64>, Vec<f64>) {
        let amp = if moving { 0.04 * (1.0 + t).sin() } else { 0.03 };
        let rate = if moving { 0.04 * (1.0 + t).cos() } else { 0.0 };
        let shape: Vec<f64> = g.fine.xi.iter().map(|x| (PI * x / ELL).cos() + 0.3 * (2.0 * PI * x / ELL).cos()).collect();
        (shape.iter().map(|v| amp * v).collect(), shape.iter().map(|v| rate * v).collect())
    };
    let build = |t: f64| {
        let (eta, deta) = eta_at(t);
        let f = build_geometry(&s, &eta, Some(&deta), &g, 0.1).unwrap();
        let o = HeatOperators::new(&g, &f, coef(ms.k)).unwrap();
        (f, o)
    };
    let dt = t_end / steps as f64;
    let (_, o0) = build(0.0);
    let mut st = HeatState::new(o0.sample(|x, y| ms.theta(x, y, 0.0)), o0.sample(|x, y| -ms.theta(x, y, 0.0)), 0.0);
    let frozen = if moving { None } else { Some(build(0.0)) };
    for n in 0..steps {
        let tm = (n as f64 + 0.5) * dt;
        let (f, o) = frozen.clone().unwrap_or_else(|| build(tm));
        let forcing = HeatForcing { bulk: o.sample(|x, y| ms.bulk(x, y, tm)), surface: ms.surface(&o, &f, &g, tm) };
        let rel: [Vec<f64>; 2] = [vec![0.0; g.fine.len()], f.rates().unwrap().mesh_velocity.iter().map(|w| -w).collect()];
        let cn = o.crank_nicolson(dt).unwrap();
        st = step_fd(&o, &cn, &st, if moving { Some(&rel) } else { None }, &forcing).unwrap().0;
    }
    let (_, o) = build(t_end);
    let exact = o.sample(|x, y| ms.theta(x, y, t_end));
    (st.theta, exact, o)
}

fn l2_diff(o: &HeatOperators, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    o.l2_norm(&d)
}

#[test]
fn manufactured_solution_converges_in_space() {
    let e: Vec<f64> = [(6, 24), (12, 48), (24, 96)]
        .iter()
        .map(|&(nx, ny)| {
            let (th, ex, o) = run_manufactured(nx, ny, 4 * ny, 0.5, false);
            l2_diff(&o, &th, &ex)
        })
        .collect();
    for w in e.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.9, "{e:?}");
    }
}

#[test]
fn manufactured_solution_converges_in_time_on_moving_geometry() {
    let t_end = 0.5;
    let run = |steps| run_manufactured(8, 32, steps, t_end, true);
    // the spatial error is common to all runs; measure against a fine-step reference
    let (fine, exact, o) = run(320);
    assert!(l2_diff(&o, &fine, &exact) < 1e-2);
    let e: Vec<f64> = [10, 20, 40].iter().map(|&n| l2_diff(&o, &run(n).0, &fine)).collect();
    for w in e.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.9, "{e:?}");
    }
}

#[test]
fn robin_solver_recovers_manufactured_field() {
    let ms = Manufactured { k: 1.3 };
    let e: Vec<f64> = [(6, 24), (12, 48), (24, 96)]
        .iter()
        .map(|&(nx, ny)| {
            let (s, g) = curved(nx, ny);
            let eta: Vec<f64> = g.fine.xi.iter().map(|x| 0.02 * (PI * x / ELL).cos()).collect();
            let f = build_geometry(&s, &eta, None, &g, 0.1).unwrap();
            let o = HeatOperators::new(&g, &f, coef(ms.k)).unwrap();
            let bulk = o.sample(|x, y| -ms.k * ms.lap(x, y, 0.0));
            let th = robin_elliptic_solve(&o, &bulk, &ms.surface(&o, &f, &g, 0.0)).unwrap();
            l2_diff(&o, &th, &o.sample(|x, y| ms.theta(x, y, 0.0)))
        })
        .collect();
    for w in e.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.9, "{e:?}");
    }
}

fn moving_setup(rate: f64) -> (HeatOperators, GeometryFields) {
    let (s, g) = curved(8, 24);
    let eta: Vec<f64> = g.fine.xi.iter().map(|x| 0.02 * (PI * x / ELL).cos()).collect();
    let deta: Vec<f64> = g.fine.xi.iter().map(|x| rate * (PI * x / ELL).cos() + 0.5 * rate * (2.0 * PI * x / ELL).sin()).collect();
    let f = build_geometry(&s, &eta, Some(&deta), &g, 0.1).unwrap();
    let o = HeatOperators::new(&g, &f, coef(0.9)).unwrap();
    (o, f.restrict(&g))
}

fn generic_input(o: &HeatOperators) -> InitialHeatInput {
    InitialHeatInput {
        d2theta0: o.sample(|x, y| (PI * x).cos() * (y + DEPTH)),
        f8: o.sample(|x, y| 1.0 + x * y),
        f8_t: o.sample(|x, y| (2.0 * x).sin() + y),
        f9: (0..o.ni).map(|i| 0.3 * (i as f64).cos()).collect(),
        f9_t: vec![0.1; o.ni],
    }
}

#[test]
fn static_geometry_has_no_commutator_forcing() {
    let (o, c) = moving_setup(0.0);
    let theta = o.sample(|x, y| (PI * x).cos() * (y + DEPTH) * y);
    let ch = dt_forcing_chain(&c, 0.9, &theta, &vec![0.0; o.len()], &vec![0.0; o.ni]).unwrap();
    assert!(ch.g8.iter().chain(&ch.g9).all(|&v| v == 0.0));
    let r = construct_heat_initial_data(&o, &c, &generic_input(&o), 1e-10, 20).unwrap();
    assert!(r.increments[1] <= 1e-14 * r.increments[0], "{:?}", r.increments);
}

#[test]
fn zero_data_gives_zero_initial_temperature() {
    let (o, c) = moving_setup(0.01);
    let r = construct_heat_initial_data(&o, &c, &InitialHeatInput::zero(&o), 1e-10, 20).unwrap();
    assert!(r.theta0.iter().chain(&r.dtheta0).all(|&v| v == 0.0));
}

#[test]
fn initial_iteration_contracts_for_small_motion() {
    let (o, c) = moving_setup(0.01);
    let r = construct_heat_initial_data(&o, &c, &generic_input(&o), 1e-10, 20).unwrap();
    assert!(r.sweeps <= 20);
    assert!(r.residual < 1e-8, "{}", r.residual);
    for w in r.increments.windows(2) {
        assert!(w[1] <= 0.5 * w[0], "{:?}", r.increments);
    }
}

#[test]
fn large_motion_is_reported() {
    let (o, c) = moving_setup(40.0);
    let r = construct_heat_initial_data(&o, &c, &generic_input(&o), 1e-10, 20);
    assert!(matches!(r, Err(thermocontact::Error::NonContraction(_)) | Err(thermocontact::Error::NonConvergence(_))), "{r:?}");
}
