//! Soliton tracking on density snapshots: each dip is located by a parabola
//! through the lowest sample and its two neighbours.

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Dip {
    pub position: f64,
    pub min_density: f64,
}

/// Vertex `(offset, value)` of the parabola through `(−1, a)`, `(0, b)`, `(1, c)`.
pub fn parabolic_vertex(a: f64, b: f64, c: f64) -> (f64, f64) {
    let curvature = a - 2.0 * b + c;
    if !(curvature > 0.0) {
        return (0.0, b);
    }
    let offset = 0.5 * (a - c) / curvature;
    (offset, b - 0.25 * (a - c) * offset)
}

/// The `count` deepest periodic local minima of `rho` below
/// `depth_fraction × mean`, ordered by position. Fewer are returned if fewer exist.
pub fn find_dips(rho: &[f64], spacing: f64, count: usize, depth_fraction: f64) -> Vec<Dip> {
    let n = rho.len();
    let mean = rho.iter().sum::<f64>() / n as f64;
    let mut candidates: Vec<(usize, f64)> = (0..n)
        .filter(|&j| {
            let (l, r) = (rho[(j + n - 1) % n], rho[(j + 1) % n]);
            rho[j] < l && rho[j] <= r && rho[j] < depth_fraction * mean
        })
        .map(|j| (j, rho[j]))
        .collect();
    candidates.sort_by(|a, b| a.1.total_cmp(&b.1));
    candidates.truncate(count);
    let length = spacing * n as f64;
    let mut dips: Vec<Dip> = candidates
        .into_iter()
        .map(|(j, _)| {
            let (offset, value) = parabolic_vertex(rho[(j + n - 1) % n], rho[j], rho[(j + 1) % n]);
            Dip {
                position: ((j as f64 + offset) * spacing).rem_euclid(length),
                min_density: value.max(0.0),
            }
        })
        .collect();
    dips.sort_by(|a, b| a.position.total_cmp(&b.position));
    dips
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SolitonTracks {
    pub times: Vec<f64>,
    pub mean_density: Vec<f64>,
    /// Unwrapped positions, one series per soliton.
    pub positions: Vec<Vec<f64>>,
    pub min_density: Vec<Vec<f64>>,
    /// First frame index where fewer than `count` dips were found, if any.
    pub lost_at: Option<usize>,
}

impl SolitonTracks {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Centered-difference speeds at interior frames, `(t, v)` per soliton.
    pub fn speeds(&self) -> Vec<Vec<(f64, f64)>> {
        self.positions
            .iter()
            .map(|x| {
                (1..x.len().saturating_sub(1))
                    .map(|i| {
                        let dt = self.times[i + 1] - self.times[i - 1];
                        (self.times[i], (x[i + 1] - x[i - 1]) / dt)
                    })
                    .collect()
            })
            .collect()
    }

    /// Largest excursion from the starting position, in units of `spacing`.
    pub fn max_drift(&self, spacing: f64) -> f64 {
        self.positions
            .iter()
            .flat_map(|x| x.iter().map(move |p| (p - x[0]).abs() / spacing))
            .fold(0.0, f64::max)
    }

    /// Largest tracked minimum density relative to the mean density.
    pub fn max_relative_depth(&self) -> f64 {
        self.min_density
            .iter()
            .flat_map(|m| m.iter().zip(&self.mean_density).map(|(a, b)| a / b))
            .fold(0.0, f64::max)
    }
}

/// Follows `count` dips through `frames` of `(t, density)`, matching each
/// to the nearest dip of the previous frame. Tracking ends at the first
/// frame with fewer than `count` dips.
pub fn track_solitons(frames: &[(f64, Vec<f64>)], spacing: f64, count: usize, depth_fraction: f64) -> SolitonTracks {
    let mut tracks = SolitonTracks {
        positions: vec![Vec::new(); count],
        min_density: vec![Vec::new(); count],
        ..Default::default()
    };
    for (index, (t, rho)) in frames.iter().enumerate() {
        let length = spacing * rho.len() as f64;
        let dips = find_dips(rho, spacing, count, depth_fraction);
        if dips.len() < count {
            tracks.lost_at = Some(index);
            break;
        }
        let mut taken = vec![false; count];
        for s in 0..count {
            let chosen = match tracks.positions[s].last() {
                None => s,
                Some(&last) => (0..count)
                    .filter(|&d| !taken[d])
                    .min_by(|&a, &b| {
                        periodic_gap(dips[a].position - last, length)
                            .abs()
                            .total_cmp(&periodic_gap(dips[b].position - last, length).abs())
                    })
                    .expect("a free dip remains"),
            };
            taken[chosen] = true;
            let position = match tracks.positions[s].last() {
                None => dips[chosen].position,
                Some(&last) => last + periodic_gap(dips[chosen].position - last, length),
            };
            tracks.positions[s].push(position);
            tracks.min_density[s].push(dips[chosen].min_density);
        }
        tracks.times.push(*t);
        tracks.mean_density.push(rho.iter().sum::<f64>() / rho.len() as f64);
    }
    tracks
}

fn periodic_gap(d: f64, length: f64) -> f64 {
    d - length * (d / length).round()
}

/// Spearman rank correlation, with ties given their average rank.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let rank = 0.5 * (i + j) as f64 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertex_of_exact_parabola() {
        let f = |x: f64| 3.0 * (x - 0.3).powi(2) + 0.1;
        let (o, v) = parabolic_vertex(f(-1.0), f(0.0), f(1.0));
        assert!((o - 0.3).abs() < 1e-14);
        assert!((v - 0.1).abs() < 1e-14);
    }

    #[test]
    fn dips_of_two_wells_and_wraparound() {
        let n = 200;
        let h = 1.0 / n as f64;
        let rho: Vec<f64> = (0..n)
            .map(|j| {
                let x = j as f64 * h;
                let well = |c: f64| {
                    let d = x - c - (x - c).round();
                    1.0 - 0.9 * (-(d / 0.02).powi(2)).exp()
                };
                well(0.0013) * well(0.6021)
            })
            .collect();
        let dips = find_dips(&rho, h, 2, 0.5);
        assert_eq!(dips.len(), 2);
        assert!((dips[0].position - 0.0013).abs() < 1e-4, "{dips:?}");
        assert!((dips[1].position - 0.6021).abs() < 1e-4, "{dips:?}");
        assert!(find_dips(&rho, h, 2, 0.05).is_empty());
    }

    #[test]
    fn tracks_unwrap_across_the_boundary() {
        let n = 256;
        let h = 1.0 / n as f64;
        let frames: Vec<(f64, Vec<f64>)> = (0..20)
            .map(|i| {
                let c = (0.9 + 0.01 * i as f64).rem_euclid(1.0);
                let rho = (0..n)
                    .map(|j| {
                        let x = j as f64 * h;
                        let d = x - c - (x - c).round();
                        1.0 - 0.8 * (-(d / 0.03).powi(2)).exp()
                    })
                    .collect();
                (i as f64, rho)
            })
            .collect();
        let t = track_solitons(&frames, h, 1, 0.5);
        assert_eq!(t.len(), 20);
        assert!(t.lost_at.is_none());
        for v in &t.speeds()[0] {
            assert!((v.1 - 0.01).abs() < 1e-3, "{v:?}");
        }
    }

    #[test]
    fn spearman_extremes() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &[10.0, 20.0, 25.0, 100.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
    }
}
