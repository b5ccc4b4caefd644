//! Independent oracles shared by the integration tests: quadrature rules,
//! analytic soliton profiles and random field generators. Nothing here calls
//! into the spectral machinery under test.

#![allow(dead_code)]

use metagpe::{Complex64, ComplexField, Grid1D};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Adaptive Simpson quadrature of a real function on `[a, b]`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
    }
    // Split first so that narrow features are not missed by the initial
    // coarse estimate.
    let pieces = 64;
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (flo, fhi) = (f(lo), f(hi));
            let (m, fm, whole) = simpson(f, lo, flo, hi, fhi);
            recurse(f, lo, flo, hi, fhi, m, fm, whole, tol / pieces as f64, 40)
        })
        .sum()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Composite Gauss–Legendre rule on `[a, b]` with `panels` equal panels.
pub fn gauss_integrate<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    order: usize,
    panels: usize,
) -> Complex64 {
    let rule = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for &(x, w) in &rule {
            total += f(lo + 0.5 * h * (x + 1.0)) * (0.5 * h * w);
        }
    }
    total
}

/// Trigonometric interpolant of grid samples using modes `−n/2..n/2−1`,
/// built from a direct DFT.
pub struct TrigInterpolant {
    coefficients: Vec<(f64, Complex64)>,
}

impl TrigInterpolant {
    pub fn new(values: &[Complex64], length: f64) -> Self {
        let n = values.len() as i64;
        let coefficients = (-n / 2..n / 2)
            .map(|m| {
                let k = 2.0 * PI * m as f64 / length;
                let c: Complex64 = values
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (m * j as i64) as f64 / n as f64))
                    .sum::<Complex64>()
                    / n as f64;
                (k, c)
            })
            .collect();
        Self { coefficients }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        self.coefficients
            .iter()
            .map(|(k, c)| c * Complex64::from_polar(1.0, k * x))
            .sum()
    }
}

/// Fourth-order centered finite differences on a periodic grid.
pub fn fd_first(values: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = values.len();
    (0..n)
        .map(|j| {
            let at = |d: isize| values[(j as isize + d).rem_euclid(n as isize) as usize];
            (at(-2) - at(-1) * 8.0 + at(1) * 8.0 - at(2)) / (12.0 * h)
        })
        .collect()
}

pub fn fd_second(values: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = values.len();
    (0..n)
        .map(|j| {
            let at = |d: isize| values[(j as isize + d).rem_euclid(n as isize) as usize];
            (-at(-2) + at(-1) * 16.0 - at(0) * 30.0 + at(1) * 16.0 - at(2)) / (12.0 * h * h)
        })
        .collect()
}

/// Analytic product of soliton factors `iβ + γ tanh(γ(x − x₀)/ξ)` and its
/// derivative, with `x − x₀` left unwrapped.
#[derive(Clone, Debug)]
pub struct AnalyticSolitons {
    pub amplitude: f64,
    pub healing_length: f64,
    pub solitons: Vec<(f64, f64)>,
}

impl AnalyticSolitons {
    fn factor(&self, x: f64, (x0, beta): (f64, f64)) -> (Complex64, Complex64) {
        let gamma = (1.0 - beta * beta).sqrt();
        let t = (gamma * (x - x0) / self.healing_length).tanh();
        let value = Complex64::new(gamma * t, beta);
        let slope = Complex64::new(gamma * gamma * (1.0 - t * t) / self.healing_length, 0.0);
        (value, slope)
    }

    pub fn value(&self, x: f64) -> Complex64 {
        self.solitons
            .iter()
            .map(|&s| self.factor(x, s).0)
            .product::<Complex64>()
            * self.amplitude
    }

    pub fn derivative(&self, x: f64) -> Complex64 {
        let parts: Vec<_> = self.solitons.iter().map(|&s| self.factor(x, s)).collect();
        let mut total = Complex64::new(0.0, 0.0);
        for i in 0..parts.len() {
            let mut term = parts[i].1;
            for (j, part) in parts.iter().enumerate() {
                if j != i {
                    term *= part.0;
                }
            }
            total += term;
        }
        total * self.amplitude
    }

    pub fn sample(&self, grid: &Grid1D) -> ComplexField {
        ComplexField::from_fn(grid, |x| self.value(x)).unwrap()
    }
}

/// Random field with modes `|m| ≤ max_mode` drawn from a seeded stream.
pub fn random_band_limited(grid: &Grid1D, max_mode: i64, seed: u64) -> ComplexField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coefficients: Vec<(f64, Complex64)> = (-max_mode..=max_mode)
        .map(|m| {
            let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                / (1.0 + (m * m) as f64).sqrt();
            (grid.wavenumber(m), c)
        })
        .collect();
    ComplexField::from_fn(grid, |x| {
        coefficients
            .iter()
            .map(|(k, c)| c * Complex64::from_polar(1.0, k * x))
            .sum()
    })
    .unwrap()
}

/// Unit-norm random band-limited field with a dominant uniform component, as
/// used for short dynamical runs.
pub fn perturbed_uniform(grid: &Grid1D, max_mode: i64, strength: f64, seed: u64) -> ComplexField {
    let noise = random_band_limited(grid, max_mode, seed);
    let base = 1.0 / grid.length().sqrt();
    let values = noise
        .values()
        .iter()
        .map(|z| Complex64::new(base, 0.0) + z * strength)
        .collect();
    ComplexField::new(grid.clone(), values).unwrap().normalized().unwrap()
}

/// Proptest strategy for arbitrary (not band-limited) complex samples.
pub fn field_values(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
        .prop_map(|v| v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect())
}

/// Proptest strategy for band-limited fields given by their low modes.
pub fn smooth_field(grid: Grid1D, max_mode: i64) -> impl Strategy<Value = ComplexField> {
    let count = (2 * max_mode + 1) as usize;
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), count).prop_map(move |c| {
        ComplexField::from_fn(&grid, |x| {
            c.iter()
                .enumerate()
                .map(|(i, &(re, im))| {
                    let m = i as i64 - max_mode;
                    Complex64::new(re, im) * Complex64::from_polar(1.0, grid.wavenumber(m) * x)
                        / (1.0 + (m * m) as f64)
                })
                .sum()
        })
        .unwrap()
    })
}

pub fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
