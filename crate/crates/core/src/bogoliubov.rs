//! Linear response of the uniform condensate: the damped dispersion from the
//! linearized metriplectic equations, its measurement from simulated
//! perturbations, and the full linearized spectrum around a stationary state.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::dynamics::{auto_time_step, check_time_step, DynamicsKind, Stepper};
use crate::error::{GpeError, Result};
use crate::grid::{ComplexField, Grid1D};
use crate::model::{
    observables, project_q_in_place, stationarity_residual, ModelParams,
};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// One branch of the fluctuation spectrum. Fluctuations go as
/// `u e^{i(kx − ωt)} + v* e^{−i(kx − ω* t)}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DispersionPoint {
    pub k: f64,
    /// `Re ω ≥ 0` oscillation, `Im ω ≤ 0` decay.
    pub omega: Complex64,
    /// Amplitude ratio `v/u` of the branch.
    pub amplitude_ratio: Complex64,
}

/// Undamped Bogoliubov frequency `√(ε(ε + 2Gn₀))`, `ε = ½k²`.
pub fn bogoliubov_frequency(k: f64, g_n0: f64) -> f64 {
    let e = 0.5 * k * k;
    (e * (e + 2.0 * g_n0)).sqrt()
}

/// Long-wavelength sound-wave approximation `c_s k − iλk²/2` with
/// `c_s = √(Gn₀)`, tabulated for comparison only.
pub fn sound_wave_approximation(k: f64, g_n0: f64, lambda: f64) -> Complex64 {
    Complex64::new(g_n0.sqrt() * k.abs(), -lambda * 0.5 * k * k)
}

/// Dispersion of the linearized metriplectic equation around the uniform
/// state of density `n0` (V = 0, μ = Gn₀).
///
/// For `k ≠ 0` the projection drops out and the mode amplitudes obey
/// `ω (u, v) = M (u, v)` with
/// `M = [[(1−iλ)A, (1−iλ)g], [−(1+iλ)g, −(1+iλ)A]]`, `g = Gn₀`, `A = ½k² + g`,
/// whose roots are `ω = −iλA ± √((1+λ²)ε(ε+2g) − λ²A²)`.
/// `k = 0` returns the gauge zero mode.
pub fn analytic_dispersion(k: f64, p: &ModelParams, n0: f64) -> DispersionPoint {
    if k == 0.0 {
        return DispersionPoint {
            k,
            omega: Complex64::new(0.0, 0.0),
            amplitude_ratio: Complex64::new(-1.0, 0.0),
        };
    }
    let lambda = p.lambda;
    let g = p.coupling * n0;
    let e = 0.5 * k * k;
    let a = e + g;
    let disc = (1.0 + lambda * lambda) * e * (e + 2.0 * g) - lambda * lambda * a * a;
    let root = Complex64::new(disc, 0.0).sqrt();
    let mut omega = -I * lambda * a + root;
    if disc < 0.0 {
        // Overdamped: both roots are on the imaginary axis; keep the slower.
        omega = Complex64::new(0.0, -(lambda * a - (-disc).sqrt()));
    }
    let damped = Complex64::new(1.0, -lambda);
    let amplitude_ratio = if g == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        -(damped * a - omega) / (damped * g)
    };
    DispersionPoint {
        k,
        omega,
        amplitude_ratio,
    }
}

/// Settings for [`measure_dispersion`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DispersionConfig {
    pub n_points: usize,
    pub length: f64,
    /// Relative amplitude of the `cos(kx)` seed.
    pub amplitude: f64,
    /// Time step; `None` picks 0.4 of the RK4 bound.
    pub dt: Option<f64>,
    /// Sampled window in units of the undamped period `2π/ω_B(k)`.
    pub periods: f64,
    /// Number of samples over the window.
    pub samples: usize,
}

impl Default for DispersionConfig {
    fn default() -> Self {
        Self {
            n_points: 2048,
            length: 1.0,
            amplitude: 1e-4,
            dt: None,
            periods: 0.5,
            samples: 400,
        }
    }
}

/// A fitted branch with fit diagnostics.
#[derive(Clone, Debug)]
pub struct DispersionMeasurement {
    pub point: DispersionPoint,
    pub mode: i64,
    /// `∥y − fit∥ / ∥y∥` over both series.
    pub relative_residual: f64,
    /// `(t, c_m/c_0, conj(c_{−m}/c_0))`.
    pub series: Vec<(f64, Complex64, Complex64)>,
}

/// Evolves `(1/√L)(1 + ε cos(k_m x))` under the metriplectic dynamics and fits
/// `a e^{−iωt} + b e^{i ω* t}` jointly to the `+m` and `−m` mode series.
pub fn measure_dispersion(
    m: i64,
    p: &ModelParams,
    cfg: &DispersionConfig,
) -> Result<DispersionMeasurement> {
    let grid = Grid1D::new(cfg.n_points, cfg.length)?;
    grid.mode_slot(m)?;
    if m == 0 {
        return Err(GpeError::InvalidParameter("mode 0 has no dispersion".into()));
    }
    if !(cfg.amplitude > 0.0 && cfg.amplitude < 0.1) {
        return Err(GpeError::InvalidParameter(format!(
            "perturbation amplitude must lie in (0, 0.1), got {}",
            cfg.amplitude
        )));
    }
    if cfg.samples < 16 {
        return Err(GpeError::InvalidParameter("need at least 16 samples".into()));
    }
    let n0 = 1.0 / cfg.length;
    let k = grid.wavenumber(m);
    let params = ModelParams {
        mu: p.coupling * n0,
        potential: None,
        ..p.clone()
    };
    let dt_nominal = cfg.dt.unwrap_or_else(|| auto_time_step(&grid));
    check_time_step(&grid, dt_nominal)?;

    let window = cfg.periods * 2.0 * std::f64::consts::PI / bogoliubov_frequency(k, p.coupling * n0);
    let sample_dt_nominal = window / (cfg.samples - 1) as f64;
    let stride = (sample_dt_nominal / dt_nominal).ceil().max(1.0) as u64;
    let dt = sample_dt_nominal / stride as f64;

    let amp = 1.0 / cfg.length.sqrt();
    let eps = cfg.amplitude;
    let psi0 = ComplexField::from_fn(&grid, |x| Complex64::new(amp * (1.0 + eps * (k * x).cos()), 0.0))?;
    let mut psi = psi0.into_values();
    let mut stepper = Stepper::new(&grid);

    let sample = |values: &[Complex64], t: f64| -> Result<(f64, Complex64, Complex64)> {
        let f = ComplexField::from_parts(grid.clone(), values.to_vec());
        let c0 = f.mode_amplitude(0)?;
        let cp = f.mode_amplitude(m)?;
        let cm = f.mode_amplitude(-m)?;
        Ok((t, cp / c0, (cm / c0).conj()))
    };

    let mut series = Vec::with_capacity(cfg.samples);
    series.push(sample(&psi, 0.0)?);
    let mut step = 0u64;
    for s in 1..cfg.samples {
        for _ in 0..stride {
            stepper.set_clock(step, step as f64 * dt);
            stepper.step(&mut psi, &params, DynamicsKind::Metriplectic, dt)?;
            step += 1;
        }
        series.push(sample(&psi, s as f64 * sample_dt_nominal)?);
    }

    let fit = fit_two_branch(&series)?;
    if !(fit.relative_residual <= 1e-3) {
        return Err(GpeError::FitFailure {
            relative_residual: fit.relative_residual,
            series,
        });
    }
    let amplitude_ratio = if fit.amplitudes[0].norm() > 0.0 {
        fit.amplitudes[2] / fit.amplitudes[0]
    } else {
        Complex64::new(0.0, 0.0)
    };
    Ok(DispersionMeasurement {
        point: DispersionPoint {
            k,
            omega: fit.omega,
            amplitude_ratio,
        },
        mode: m,
        relative_residual: fit.relative_residual,
        series,
    })
}

/// Joint two-branch fit of `(t, a(t), b(t))` samples.
#[derive(Clone, Debug)]
pub struct BranchFit {
    pub omega: Complex64,
    /// `[a₁, a₂, b₁, b₂]`: coefficients of `e^{−iωt}` and `e^{iω* t}` in each series.
    pub amplitudes: [Complex64; 4],
    pub relative_residual: f64,
}

/// Nonlinear least squares over ω with the four amplitudes eliminated
/// (variable projection), started from a linear-prediction estimate and
/// refined by Levenberg–Marquardt.
pub fn fit_two_branch(series: &[(f64, Complex64, Complex64)]) -> Result<BranchFit> {
    let initial = linear_prediction_guess(series)?;
    let norm_y: f64 = series
        .iter()
        .map(|(_, a, b)| a.norm_sqr() + b.norm_sqr())
        .sum::<f64>()
        .sqrt();
    if !(norm_y > 0.0) {
        return Err(GpeError::FitFailure {
            relative_residual: f64::INFINITY,
            series: series.to_vec(),
        });
    }
    let residual = |w: Complex64| -> (Vec<f64>, [Complex64; 4]) { projected_residual(series, w) };
    let cost = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();

    let mut omega = initial;
    let (mut r, mut amps) = residual(omega);
    let mut c = cost(&r);
    let mut damping = 1e-3;
    for _ in 0..100 {
        let scale = omega.norm().max(1.0);
        let h = 1e-7 * scale;
        let (rx, _) = residual(omega + h);
        let (ry, _) = residual(omega + I * h);
        let jx: Vec<f64> = rx.iter().zip(&r).map(|(a, b)| (a - b) / h).collect();
        let jy: Vec<f64> = ry.iter().zip(&r).map(|(a, b)| (a - b) / h).collect();
        let jtj = [
            [dot(&jx, &jx), dot(&jx, &jy)],
            [dot(&jy, &jx), dot(&jy, &jy)],
        ];
        let jtr = [dot(&jx, &r), dot(&jy, &r)];
        let mut improved = false;
        for _ in 0..20 {
            let a11 = jtj[0][0] * (1.0 + damping);
            let a22 = jtj[1][1] * (1.0 + damping);
            let det = a11 * a22 - jtj[0][1] * jtj[1][0];
            if det == 0.0 || !det.is_finite() {
                break;
            }
            let dx = -(a22 * jtr[0] - jtj[0][1] * jtr[1]) / det;
            let dy = -(a11 * jtr[1] - jtj[1][0] * jtr[0]) / det;
            let trial = omega + Complex64::new(dx, dy);
            let (rt, at) = residual(trial);
            let ct = cost(&rt);
            if ct < c {
                let rel_change = Complex64::new(dx, dy).norm() / scale;
                omega = trial;
                r = rt;
                amps = at;
                c = ct;
                damping = (damping * 0.3).max(1e-12);
                improved = rel_change > 1e-14;
                break;
            }
            damping *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Ok(BranchFit {
        omega,
        amplitudes: amps,
        relative_residual: c.sqrt() / norm_y,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Residual of the best amplitudes for a fixed ω, as stacked real parts.
fn projected_residual(
    series: &[(f64, Complex64, Complex64)],
    omega: Complex64,
) -> (Vec<f64>, [Complex64; 4]) {
    let basis: Vec<[Complex64; 2]> = series
        .iter()
        .map(|&(t, _, _)| [(-I * omega * t).exp(), (I * omega.conj() * t).exp()])
        .collect();
    // Normal equations for the 2×2 complex system shared by both series.
    let mut g = [[Complex64::new(0.0, 0.0); 2]; 2];
    let mut rhs_a = [Complex64::new(0.0, 0.0); 2];
    let mut rhs_b = [Complex64::new(0.0, 0.0); 2];
    for (phi, &(_, a, b)) in basis.iter().zip(series) {
        for i in 0..2 {
            for j in 0..2 {
                g[i][j] += phi[i].conj() * phi[j];
            }
            rhs_a[i] += phi[i].conj() * a;
            rhs_b[i] += phi[i].conj() * b;
        }
    }
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let solve = |r: [Complex64; 2]| -> [Complex64; 2] {
        [
            (g[1][1] * r[0] - g[0][1] * r[1]) / det,
            (g[0][0] * r[1] - g[1][0] * r[0]) / det,
        ]
    };
    let ca = solve(rhs_a);
    let cb = solve(rhs_b);
    let mut res = Vec::with_capacity(4 * series.len());
    for (phi, &(_, a, b)) in basis.iter().zip(series) {
        let ra = a - (ca[0] * phi[0] + ca[1] * phi[1]);
        let rb = b - (cb[0] * phi[0] + cb[1] * phi[1]);
        res.extend_from_slice(&[ra.re, ra.im, rb.re, rb.im]);
    }
    (res, [ca[0], ca[1], cb[0], cb[1]])
}

/// Prony-type estimate: fit `y_{j+2} = p₁y_{j+1} + p₀y_j` to both series and
/// convert the root with positive oscillation frequency.
fn linear_prediction_guess(series: &[(f64, Complex64, Complex64)]) -> Result<Complex64> {
    if series.len() < 4 {
        return Err(GpeError::InvalidParameter("series too short to fit".into()));
    }
    let step = series[1].0 - series[0].0;
    let mut g = [[Complex64::new(0.0, 0.0); 2]; 2];
    let mut r = [Complex64::new(0.0, 0.0); 2];
    for col in 0..2 {
        let y: Vec<Complex64> = series
            .iter()
            .map(|s| if col == 0 { s.1 } else { s.2 })
            .collect();
        for w in y.windows(3) {
            let row = [w[0], w[1]];
            for i in 0..2 {
                for j in 0..2 {
                    g[i][j] += row[i].conj() * row[j];
                }
                r[i] += row[i].conj() * w[2];
            }
        }
    }
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let p0 = (g[1][1] * r[0] - g[0][1] * r[1]) / det;
    let p1 = (g[0][0] * r[1] - g[1][0] * r[0]) / det;
    // z² − p₁z − p₀ = 0
    let disc = (p1 * p1 + 4.0 * p0).sqrt();
    let roots = [(p1 + disc) * 0.5, (p1 - disc) * 0.5];
    let omegas = roots.map(|z| I * z.ln() / step);
    let best = if omegas[0].re >= omegas[1].re {
        omegas[0]
    } else {
        omegas[1]
    };
    if !(best.re.is_finite() && best.im.is_finite()) {
        return Err(GpeError::FitFailure {
            relative_residual: f64::INFINITY,
            series: series.to_vec(),
        });
    }
    Ok(best)
}

/// Summary of the linearized spectrum around a stationary state.
#[derive(Clone, Debug)]
pub struct StabilityReport {
    /// Eigenvalues `s` of the linearized flow `∂ₜδ = Jδ` restricted to the
    /// constant-norm tangent space; `δ ∝ e^{st}`.
    pub eigenvalues: Vec<Complex64>,
    /// Largest real part among eigenvalues outside the near-zero cluster.
    pub max_growth_rate: f64,
    pub near_zero_modes: usize,
    /// Threshold used to count near-zero modes.
    pub zero_tolerance: f64,
    /// Every growth rate outside the near-zero cluster is at most `1e-8`.
    pub all_decay: bool,
}

pub const MAX_STABILITY_POINTS: usize = 512;
pub const GROWTH_TOLERANCE: f64 = 1e-8;

/// Dense real representation of the metriplectic flow linearized around `psi`
/// (μ set to `⟨μ⟩` of `psi`), over `δ = x + iy`, restricted to
/// `Re⟨ψ, δ⟩ = 0`.
pub fn linearized_operator(psi: &ComplexField, p: &ModelParams) -> Result<DMatrix<f64>> {
    let grid = psi.grid().clone();
    let n = grid.n_points();
    if n > MAX_STABILITY_POINTS {
        return Err(GpeError::InvalidParameter(format!(
            "dense linearization is limited to {MAX_STABILITY_POINTS} points, got {n}"
        )));
    }
    let residual = stationarity_residual(psi, p)?;
    if !(residual < 1e-6) {
        return Err(GpeError::NonStationary { residual });
    }
    let mu = p.mu + observables(psi, p, 0.0)?.mu_mean;
    let params = p.with_mu(mu);

    let background = psi.values();
    let norm_sq = psi.norm_sq();
    let g = params.coupling;
    let mut lap = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); grid.scratch_len()];
    let mut delta = vec![Complex64::new(0.0, 0.0); n];
    let mut d_eta = vec![Complex64::new(0.0, 0.0); n];
    let mut q = vec![Complex64::new(0.0, 0.0); n];

    let shift: Vec<f64> = (0..n)
        .map(|j| {
            let v = params.potential.as_ref().map_or(0.0, |v| v[j]);
            v - mu + 2.0 * g * background[j].norm_sqr()
        })
        .collect();

    let mut full = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for col in 0..2 * n {
        delta.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        delta[col % n] = if col < n {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 1.0)
        };
        grid.laplacian_into(&delta, &mut lap, &mut scratch);
        for j in 0..n {
            d_eta[j] = -0.5 * lap[j]
                + delta[j] * shift[j]
                + background[j] * background[j] * delta[j].conj() * g;
        }
        q.copy_from_slice(&d_eta);
        project_q_in_place(&grid, background, norm_sq, &mut q);
        for j in 0..n {
            let out = -I * d_eta[j] - q[j] * params.lambda;
            full[(j, col)] = out.re;
            full[(j + n, col)] = out.im;
        }
    }

    // Householder reflector mapping e₁ to the unit normal of the constant-norm surface.
    let mut w = DVector::<f64>::zeros(2 * n);
    for j in 0..n {
        w[j] = background[j].re;
        w[j + n] = background[j].im;
    }
    let w = w.normalize();
    let mut v = w.clone();
    let sign = if w[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += sign;
    let v = v.normalize();
    let h = DMatrix::<f64>::identity(2 * n, 2 * n) - 2.0 * &v * v.transpose();
    let restricted = h.transpose() * full * &h;
    Ok(restricted.view((1, 1), (2 * n - 1, 2 * n - 1)).into_owned())
}

/// Linear stability of a stationary state under the metriplectic flow.
pub fn linearized_stability_report(psi: &ComplexField, p: &ModelParams) -> Result<StabilityReport> {
    let op = linearized_operator(psi, p)?;
    let eigenvalues: Vec<Complex64> = op
        .complex_eigenvalues()
        .iter()
        .map(|z| Complex64::new(z.re, z.im))
        .collect();
    let radius = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let zero_tolerance = 1e-9 * radius.max(1.0);
    let max_growth_rate = eigenvalues
        .iter()
        .filter(|z| z.norm() >= zero_tolerance)
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(StabilityReport {
        near_zero_modes: eigenvalues.iter().filter(|z| z.norm() < zero_tolerance).count(),
        all_decay: max_growth_rate <= GROWTH_TOLERANCE,
        max_growth_rate,
        zero_tolerance,
        eigenvalues,
    })
}
