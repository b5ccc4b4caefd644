//! Initial conditions: plane waves, dark and gray solitons, and classical-field
//! thermal samples.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{GpeError, Result};
use crate::grid::{ComplexField, Grid1D};
use crate::model::{ModelParams, ObservableRecord};

/// Uniform unit-norm state `1/√L`.
pub fn uniform_state(grid: &Grid1D) -> ComplexField {
    let a = 1.0 / grid.length().sqrt();
    ComplexField::from_fn(grid, |_| Complex64::new(a, 0.0)).expect("finite constant")
}

/// Unit-norm plane wave `exp(i k_m x)/√L`.
pub fn plane_wave(grid: &Grid1D, m: i64) -> Result<ComplexField> {
    grid.mode_slot(m)?;
    let a = 1.0 / grid.length().sqrt();
    let k = grid.wavenumber(m);
    ComplexField::from_fn(grid, |x| Complex64::from_polar(a, k * x))
}

/// Center and velocity (as a fraction β of the sound speed) of one soliton.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolitonSpec {
    pub position: f64,
    pub speed_fraction: f64,
}

impl SolitonSpec {
    pub fn new(position: f64, speed_fraction: f64) -> Result<Self> {
        if !(speed_fraction.abs() < 1.0) {
            return Err(GpeError::InvalidParameter(format!(
                "soliton speed fraction must satisfy |β| < 1, got {speed_fraction}"
            )));
        }
        if !position.is_finite() {
            return Err(GpeError::InvalidParameter("soliton position must be finite".into()));
        }
        Ok(Self {
            position,
            speed_fraction,
        })
    }

    pub fn black(position: f64) -> Self {
        Self {
            position,
            speed_fraction: 0.0,
        }
    }

    /// Darkness `γ = √(1 − β²)`.
    pub fn darkness(&self) -> f64 {
        (1.0 - self.speed_fraction * self.speed_fraction).sqrt()
    }

    /// Normalized profile `iβ + γ tanh(γ(x − x₀)/ξ)`.
    fn factor(&self, x: f64, healing_length: f64) -> Complex64 {
        let g = self.darkness();
        Complex64::new(
            g * (g * (x - self.position) / healing_length).tanh(),
            self.speed_fraction,
        )
    }
}

/// A soliton field together with the background it was built on.
#[derive(Clone, Debug)]
pub struct SolitonState {
    pub field: ComplexField,
    /// Background density far from the cores.
    pub n0: f64,
    /// `1/√(G n₀)`.
    pub healing_length: f64,
    /// `|f(L) − f(0)|` of the unit-amplitude profile; zero for a periodic state.
    pub periodicity_defect: f64,
}

/// Healing length `1/√(G n₀)`.
pub fn healing_length(coupling: f64, n0: f64) -> f64 {
    1.0 / (coupling * n0).sqrt()
}

/// Product of soliton profiles, `ψ = √n₀ Π f_i(x)`, with n₀ solved so that
/// `∥ψ∥² = 1` and the healing length is evaluated at that n₀.
///
/// Profiles use `x − x₀` on `[0, L)` without wrapping, so each factor jumps
/// from `iβ − γ` to `iβ + γ` across the box edge. For an even number of black
/// solitons these jumps cancel.
pub fn soliton_train(
    grid: &Grid1D,
    p: &ModelParams,
    specs: &[SolitonSpec],
) -> Result<SolitonState> {
    if specs.is_empty() {
        return Err(GpeError::InvalidParameter("no solitons given".into()));
    }
    if !(p.coupling > 0.0) {
        return Err(GpeError::InvalidParameter(
            "solitons need a positive coupling (finite healing length)".into(),
        ));
    }
    for s in specs {
        SolitonSpec::new(s.position, s.speed_fraction)?;
    }
    let profile = |x: f64, xi: f64| -> Complex64 {
        specs.iter().map(|s| s.factor(x, xi)).product()
    };

    let mut n0 = 1.0 / grid.length();
    for _ in 0..100 {
        let xi = healing_length(p.coupling, n0);
        let values: Vec<Complex64> = grid.positions().into_iter().map(|x| profile(x, xi)).collect();
        let mass = grid.norm_sq_of(&values);
        let next = 1.0 / mass;
        let converged = ((next - n0) / n0).abs() < 1e-15;
        n0 = next;
        if converged {
            break;
        }
    }
    let xi = healing_length(p.coupling, n0);
    if grid.spacing() >= 0.25 * xi {
        return Err(GpeError::Resolution {
            healing_length: xi,
            spacing: grid.spacing(),
        });
    }
    let mut values: Vec<Complex64> =
        grid.positions().into_iter().map(|x| profile(x, xi)).collect();
    let scale = (1.0 / grid.norm_sq_of(&values)).sqrt();
    values.iter_mut().for_each(|z| *z *= scale);
    let periodicity_defect = (profile(grid.length(), xi) - profile(0.0, xi)).norm();
    Ok(SolitonState {
        field: ComplexField::new(grid.clone(), values)?,
        n0,
        healing_length: xi,
        periodicity_defect,
    })
}

/// Single dark (β = 0) or gray soliton.
pub fn gray_soliton(grid: &Grid1D, p: &ModelParams, spec: SolitonSpec) -> Result<SolitonState> {
    soliton_train(grid, p, &[spec])
}

/// Product ansatz of two solitons.
pub fn two_soliton_state(
    grid: &Grid1D,
    p: &ModelParams,
    a: SolitonSpec,
    b: SolitonSpec,
) -> Result<SolitonState> {
    if a.position == b.position {
        return Err(GpeError::InvalidParameter("soliton centers coincide".into()));
    }
    soliton_train(grid, p, &[a, b])
}

/// Rayleigh–Jeans classical-field ensemble parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermalSpec {
    pub temperature: f64,
    /// Modes `0 < |m| ≤ mode_cutoff` are populated.
    pub mode_cutoff: usize,
    pub seed: u64,
    /// Occupation `f₀` seeded into the m = 0 mode.
    pub condensate_fraction: f64,
}

impl ThermalSpec {
    pub const DEFAULT_CONDENSATE_FRACTION: f64 = 0.1;

    pub fn new(temperature: f64, mode_cutoff: usize, seed: u64) -> Self {
        Self {
            temperature,
            mode_cutoff,
            seed,
            condensate_fraction: Self::DEFAULT_CONDENSATE_FRACTION,
        }
    }

    fn validate(&self, grid: &Grid1D) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(GpeError::InvalidParameter(format!(
                "temperature must be positive and finite, got {}",
                self.temperature
            )));
        }
        if self.mode_cutoff == 0 || self.mode_cutoff >= grid.n_points() / 2 {
            return Err(GpeError::InvalidParameter(format!(
                "mode cutoff {} must lie in 1..{}",
                self.mode_cutoff,
                grid.n_points() / 2
            )));
        }
        if !(self.condensate_fraction.is_finite() && self.condensate_fraction >= 0.0) {
            return Err(GpeError::InvalidParameter(
                "condensate fraction must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Interaction-shifted single-mode energy `ε_m = ½k_m² + G n₀` with `n₀ = 1/L`.
pub fn thermal_mode_energy(grid: &Grid1D, p: &ModelParams, m: i64) -> f64 {
    let k = grid.wavenumber(m);
    0.5 * k * k + p.coupling / grid.length()
}

/// Mode amplitudes `(m, α_m)` of one thermal sample before rescaling.
///
/// `α_0 = √f₀`; each other populated mode is a complex Gaussian with
/// `E|α_m|² = T/ε_m`. Draws are made for m = 1, −1, 2, −2, ... from a ChaCha8
/// stream seeded with `spec.seed`.
pub fn thermal_amplitudes(
    grid: &Grid1D,
    p: &ModelParams,
    spec: &ThermalSpec,
) -> Result<Vec<(i64, Complex64)>> {
    spec.validate(grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = Vec::with_capacity(2 * spec.mode_cutoff + 1);
    out.push((0, Complex64::new(spec.condensate_fraction.sqrt(), 0.0)));
    for m in 1..=spec.mode_cutoff as i64 {
        for signed in [m, -m] {
            let variance = spec.temperature / thermal_mode_energy(grid, p, signed);
            let sigma = (0.5 * variance).sqrt();
            let re: f64 = unit.sample(&mut rng);
            let im: f64 = unit.sample(&mut rng);
            out.push((signed, Complex64::new(sigma * re, sigma * im)));
        }
    }
    Ok(out)
}

/// One unit-norm classical-field thermal sample.
pub fn thermal_sample(grid: &Grid1D, p: &ModelParams, spec: &ThermalSpec) -> Result<ComplexField> {
    let mut amps = vec![Complex64::new(0.0, 0.0); grid.n_points()];
    for (m, a) in thermal_amplitudes(grid, p, spec)? {
        amps[grid.mode_slot(m)?] = a;
    }
    ComplexField::from_mode_amplitudes(grid, &amps)?.normalized()
}

/// Ground-mode statistics of a λ = 0 trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermalizationReport {
    /// Mean of `ground_mode_occ` over the trailing half.
    pub mean: f64,
    /// Variance of `ground_mode_occ` over the trailing half.
    pub variance: f64,
    pub first_half_mean: f64,
    pub pooled_standard_error: f64,
    /// First- and second-half means agree within three pooled standard errors.
    pub stationary: bool,
}

pub const MIN_THERMALIZATION_RECORDS: usize = 100;

pub fn thermalization_check(records: &[ObservableRecord]) -> Result<ThermalizationReport> {
    if records.len() < MIN_THERMALIZATION_RECORDS {
        return Err(GpeError::TooFewRecords {
            needed: MIN_THERMALIZATION_RECORDS,
            got: records.len(),
        });
    }
    let occ: Vec<f64> = records.iter().map(|r| r.ground_mode_occ).collect();
    let (first, second) = occ.split_at(occ.len() / 2);
    let (m1, v1) = mean_var(first);
    let (m2, v2) = mean_var(second);
    let se = (v1 / first.len() as f64 + v2 / second.len() as f64).sqrt();
    let slack = 1e-12 * m1.abs().max(m2.abs());
    Ok(ThermalizationReport {
        mean: m2,
        variance: v2,
        first_half_mean: m1,
        pooled_standard_error: se,
        stationary: (m1 - m2).abs() <= 3.0 * se + slack,
    })
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}
