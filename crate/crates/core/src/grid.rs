//! Periodic grid, complex field storage and spectral primitives.
//!
//! Sample `j` of a [`Grid1D`] sits at `x_j = j * spacing` on `[0, L)`. The
//! wavenumbers are kept in the FFT-native (wrapped) order
//! `0, 1, ..., n/2 - 1, -n/2, ..., -1` times `2π/L`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{GpeError, Result};

/// Stability limit of classical RK4 along the imaginary axis (|z| < 2√2),
/// rounded down.
pub const RK4_IMAGINARY_AXIS_LIMIT: f64 = 2.8;

struct Spectral {
    wavenumbers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Uniform periodic 1D grid with cached FFT plans.
#[derive(Clone)]
pub struct Grid1D {
    n_points: usize,
    length: f64,
    spectral: Arc<Spectral>,
}

impl fmt::Debug for Grid1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid1D")
            .field("n_points", &self.n_points)
            .field("length", &self.length)
            .finish()
    }
}

impl PartialEq for Grid1D {
    fn eq(&self, other: &Self) -> bool {
        self.n_points == other.n_points && self.length == other.length
    }
}

impl Grid1D {
    pub fn new(n_points: usize, length: f64) -> Result<Self> {
        if n_points < 2 || !n_points.is_power_of_two() {
            return Err(GpeError::InvalidParameter(format!(
                "n_points must be a power of two >= 2, got {n_points}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(GpeError::InvalidParameter(format!(
                "length must be positive and finite, got {length}"
            )));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n_points);
        let inverse = planner.plan_fft_inverse(n_points);
        let wavenumbers = (0..n_points)
            .map(|j| 2.0 * PI * signed_mode(j, n_points) as f64 / length)
            .collect();
        Ok(Self {
            n_points,
            length,
            spectral: Arc::new(Spectral {
                wavenumbers,
                forward,
                inverse,
            }),
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n_points as f64
    }

    pub fn position(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.position(j)).collect()
    }

    /// Wavenumbers in transform-native order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.spectral.wavenumbers
    }

    /// Wavenumber of plane-wave mode `m`.
    pub fn wavenumber(&self, m: i64) -> f64 {
        2.0 * PI * m as f64 / self.length
    }

    /// Largest wavenumber magnitude on the grid (the Nyquist mode), `π n / L`.
    pub fn k_max(&self) -> f64 {
        PI * self.n_points as f64 / self.length
    }

    /// Largest stable RK4 step for the kinetic operator, `2.8 / (k_max² / 2)`.
    pub fn rk4_stability_bound(&self) -> f64 {
        RK4_IMAGINARY_AXIS_LIMIT / (0.5 * self.k_max() * self.k_max())
    }

    /// Native storage slot of mode `m`; fails unless `|m| < n/2`.
    pub fn mode_slot(&self, m: i64) -> Result<usize> {
        let half = (self.n_points / 2) as i64;
        if m.abs() >= half {
            return Err(GpeError::Index {
                index: m,
                n_points: self.n_points,
            });
        }
        Ok(m.rem_euclid(self.n_points as i64) as usize)
    }

    pub(crate) fn scratch_len(&self) -> usize {
        self.spectral
            .forward
            .get_inplace_scratch_len()
            .max(self.spectral.inverse.get_inplace_scratch_len())
    }

    /// Unnormalized forward DFT in place.
    pub(crate) fn forward(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.spectral.forward.process_with_scratch(buf, scratch);
    }

    /// Normalized inverse DFT in place (forward followed by inverse is the identity).
    pub(crate) fn inverse(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.spectral.inverse.process_with_scratch(buf, scratch);
        let norm = 1.0 / self.n_points as f64;
        for v in buf.iter_mut() {
            *v *= norm;
        }
    }

    /// `out = IFFT(multiplier(k) * FFT(input))`.
    pub(crate) fn apply_multiplier<F>(
        &self,
        input: &[Complex64],
        out: &mut [Complex64],
        scratch: &mut [Complex64],
        multiplier: F,
    ) where
        F: Fn(usize, f64) -> Complex64,
    {
        out.copy_from_slice(input);
        self.forward(out, scratch);
        for (j, (v, &k)) in out.iter_mut().zip(self.wavenumbers()).enumerate() {
            *v *= multiplier(j, k);
        }
        self.inverse(out, scratch);
    }

    pub(crate) fn laplacian_into(
        &self,
        input: &[Complex64],
        out: &mut [Complex64],
        scratch: &mut [Complex64],
    ) {
        self.apply_multiplier(input, out, scratch, |_, k| Complex64::new(-k * k, 0.0));
    }

    pub(crate) fn gradient_into(
        &self,
        input: &[Complex64],
        out: &mut [Complex64],
        scratch: &mut [Complex64],
    ) {
        let nyquist = self.n_points / 2;
        // The Nyquist mode has no odd-derivative partner; drop it.
        self.apply_multiplier(input, out, scratch, |j, k| {
            if j == nyquist {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, k)
            }
        });
    }

    /// `spacing * Σ conj(a_j) b_j`.
    pub(crate) fn dot(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        let sum: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
        sum * self.spacing()
    }

    pub(crate) fn norm_sq_of(&self, a: &[Complex64]) -> f64 {
        a.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.spacing()
    }
}

/// Signed mode number stored at native slot `j`.
pub fn signed_mode(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Condensate wave function sampled on a [`Grid1D`].
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: Grid1D,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: Grid1D, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(GpeError::Shape(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.n_points()
            )));
        }
        if let Some(j) = values.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(GpeError::InvalidParameter(format!(
                "non-finite field value at sample {j}"
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x_j)` on every grid point.
    pub fn from_fn<F: Fn(f64) -> Complex64>(grid: &Grid1D, f: F) -> Result<Self> {
        let values = grid.positions().into_iter().map(f).collect();
        Self::new(grid.clone(), values)
    }

    pub fn zeros(grid: &Grid1D) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![Complex64::new(0.0, 0.0); grid.n_points()],
        }
    }

    /// Builds a field without the finiteness scan; callers guarantee the invariant.
    pub(crate) fn from_parts(grid: Grid1D, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_points());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn check_grid(&self, other: &ComplexField) -> Result<()> {
        if self.grid != other.grid {
            return Err(GpeError::Shape(format!(
                "grid mismatch: {:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    /// Rectangle-rule `∫ conj(self) · other dx`.
    pub fn inner_product(&self, other: &ComplexField) -> Result<Complex64> {
        self.check_grid(other)?;
        Ok(self.grid.dot(&self.values, &other.values))
    }

    pub fn norm_sq(&self) -> f64 {
        self.grid.norm_sq_of(&self.values)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Spectral `∇²ψ`.
    pub fn laplacian(&self) -> ComplexField {
        let mut out = vec![Complex64::new(0.0, 0.0); self.len()];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.grid.scratch_len()];
        self.grid.laplacian_into(&self.values, &mut out, &mut scratch);
        Self::from_parts(self.grid.clone(), out)
    }

    /// Spectral `∇ψ` (Nyquist component dropped).
    pub fn gradient(&self) -> ComplexField {
        let mut out = vec![Complex64::new(0.0, 0.0); self.len()];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.grid.scratch_len()];
        self.grid.gradient_into(&self.values, &mut out, &mut scratch);
        Self::from_parts(self.grid.clone(), out)
    }

    /// Amplitudes `⟨e_m, ψ⟩` of the orthonormal plane waves `e_m = exp(i k_m x)/√L`
    /// for every mode, in native order.
    pub fn mode_amplitudes(&self) -> Vec<Complex64> {
        let mut buf = self.values.clone();
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.grid.scratch_len()];
        self.grid.forward(&mut buf, &mut scratch);
        let scale = self.grid.spacing() / self.grid.length().sqrt();
        buf.iter_mut().for_each(|z| *z *= scale);
        buf
    }

    /// Amplitude of plane-wave mode `m`, `|m| < n/2`.
    pub fn mode_amplitude(&self, m: i64) -> Result<Complex64> {
        self.grid.mode_slot(m)?;
        let l = self.grid.length();
        let h = self.grid.spacing();
        let k = self.grid.wavenumber(m);
        let sum: Complex64 = self
            .values
            .iter()
            .enumerate()
            .map(|(j, v)| Complex64::from_polar(1.0, -k * self.grid.position(j)) * v)
            .sum();
        Ok(sum * h / l.sqrt())
    }

    /// Builds a field from native-order plane-wave amplitudes (inverse of
    /// [`ComplexField::mode_amplitudes`]).
    pub fn from_mode_amplitudes(grid: &Grid1D, amplitudes: &[Complex64]) -> Result<Self> {
        if amplitudes.len() != grid.n_points() {
            return Err(GpeError::Shape(format!(
                "{} amplitudes for a grid of {} points",
                amplitudes.len(),
                grid.n_points()
            )));
        }
        let mut buf = amplitudes.to_vec();
        let mut scratch = vec![Complex64::new(0.0, 0.0); grid.scratch_len()];
        grid.inverse(&mut buf, &mut scratch);
        let scale = grid.length().sqrt() / grid.spacing();
        buf.iter_mut().for_each(|z| *z *= scale);
        Self::new(grid.clone(), buf)
    }

    pub fn scaled(&self, factor: Complex64) -> ComplexField {
        Self::from_parts(
            self.grid.clone(),
            self.values.iter().map(|z| z * factor).collect(),
        )
    }

    /// Rescales to unit norm; fails on a zero field.
    pub fn normalized(&self) -> Result<ComplexField> {
        let n = self.norm_sq();
        if !(n > 0.0) {
            return Err(GpeError::DegenerateState("cannot normalize a zero field".into()));
        }
        Ok(self.scaled(Complex64::new(1.0 / n.sqrt(), 0.0)))
    }

    pub fn sub(&self, other: &ComplexField) -> Result<ComplexField> {
        self.check_grid(other)?;
        Ok(Self::from_parts(
            self.grid.clone(),
            self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        ))
    }

    /// L2 distance `∥self − other∥`.
    pub fn distance(&self, other: &ComplexField) -> Result<f64> {
        Ok(self.sub(other)?.norm())
    }

    pub fn max_abs_diff(&self, other: &ComplexField) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}
