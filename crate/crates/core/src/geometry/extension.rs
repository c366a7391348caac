//! Surface-to-bulk extension.
//!
//! Samples on [-ell, ell] are reflected evenly about both endpoints onto a
//! period-4 ell grid and multiplied by a C-infinity window equal to 1 on
//! [-ell, ell] and 0 at the far point 2 ell. The periodic trigonometric
//! interpolant of these samples is extended below the surface by damping mode
//! m with exp(kappa_m z), kappa_m = 2 pi m / (4 ell).

fn bump(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth transition from 1 at delta = 0 to 0 at delta = width.
pub fn smooth_window(delta: f64, width: f64) -> f64 {
    let t = (delta / width).clamp(0.0, 1.0);
    let a = bump(1.0 - t);
    let b = bump(t);
    a / (a + b)
}

/// Periodised samples at x_k = -ell + k h, k = 0..4n-1, built from the
/// 2n + 1 samples of eta at spacing h = ell / n.
pub fn extend_surface(eta: &[f64]) -> Vec<f64> {
    let m = eta.len() - 1;
    assert!(m >= 2 && m.is_multiple_of(2), "surface samples must number 2n + 1");
    let period = 2 * m;
    (0..period)
        .map(|k| {
            if k <= m {
                eta[k]
            } else {
                let delta = (k - m).min(period - k) as f64;
                eta[period - k] * smooth_window(delta, (m / 2) as f64)
            }
        })
        .collect()
}

/// Fourier coefficients of the periodised surface, phases measured from
/// x = -ell, together with the data needed to evaluate the bulk extension.
#[derive(Debug, Clone)]
pub struct SurfaceExtension {
    pub cos_coeffs: Vec<f64>,
    pub sin_coeffs: Vec<f64>,
    pub wavenumbers: Vec<f64>,
    pub ell: f64,
}

impl SurfaceExtension {
    pub fn new(eta: &[f64], ell: f64) -> Self {
        let ext = extend_surface(eta);
        let n = ext.len();
        let half = n / 2;
        let tau = 2.0 * std::f64::consts::PI;
        let table: Vec<(f64, f64)> = (0..n).map(|k| (tau * k as f64 / n as f64).sin_cos()).collect();
        let mut cos_coeffs = vec![0.0; half + 1];
        let mut sin_coeffs = vec![0.0; half + 1];
        for mode in 0..=half {
            let (mut c, mut s) = (0.0, 0.0);
            for (k, &f) in ext.iter().enumerate() {
                let (sn, cs) = table[(mode * k) % n];
                c += f * cs;
                s += f * sn;
            }
            let scale = if mode == 0 || mode == half { 1.0 } else { 2.0 };
            cos_coeffs[mode] = scale * c / n as f64;
            sin_coeffs[mode] = if mode == 0 || mode == half { 0.0 } else { scale * s / n as f64 };
        }
        let wavenumbers = (0..=half).map(|m| tau * m as f64 / (4.0 * ell)).collect();
        Self { cos_coeffs, sin_coeffs, wavenumbers, ell }
    }

    /// Value and (x1, z) derivatives of the extension at horizontal position x1
    /// and depth z <= 0 below the reference surface.
    pub fn eval(&self, x1: f64, z: f64) -> (f64, f64, f64) {
        let (mut f, mut fx, mut fz) = (0.0, 0.0, 0.0);
        for m in 0..self.wavenumbers.len() {
            let (a, b, kap) = (self.cos_coeffs[m], self.sin_coeffs[m], self.wavenumbers[m]);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            let damp = (kap * z).exp();
            let (s, c) = (kap * (x1 + self.ell)).sin_cos();
            let v = a * c + b * s;
            f += damp * v;
            fx += damp * kap * (b * c - a * s);
            fz += damp * kap * v;
        }
        (f, fx, fz)
    }
}

/// Lower Poisson extension of periodic samples taken at x_k = x0 + k P/N: each
/// discrete Fourier mode xi is multiplied by exp(2 pi |xi| x2). Returns values
/// at the sample abscissae for every requested depth, row by row.
pub fn poisson_extend(f: &[f64], period: f64, x2: &[f64]) -> Vec<Vec<f64>> {
    let n = f.len();
    let half = n / 2;
    let tau = 2.0 * std::f64::consts::PI;
    let mut re = vec![0.0; half + 1];
    let mut im = vec![0.0; half + 1];
    for m in 0..=half {
        for (k, &v) in f.iter().enumerate() {
            let ph = tau * ((m * k) % n) as f64 / n as f64;
            re[m] += v * ph.cos();
            im[m] -= v * ph.sin();
        }
    }
    x2.iter()
        .map(|&z| {
            (0..n)
                .map(|k| {
                    let mut acc = re[0] / n as f64;
                    for m in 1..=half {
                        let w = if 2 * m == n { 1.0 } else { 2.0 };
                        let damp = (tau * m as f64 / period * z).exp();
                        let ph = tau * ((m * k) % n) as f64 / n as f64;
                        let term = if 2 * m == n {
                            re[m] * ph.cos()
                        } else {
                            re[m] * ph.cos() - im[m] * ph.sin()
                        };
                        acc += w * damp * term / n as f64;
                    }
                    acc
                })
                .collect()
        })
        .collect()
}
