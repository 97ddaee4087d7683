//! Ready-made networks used by tests, examples and the CLI presets.

use crate::geometry::DiscreteNetwork;
use crate::topology::GraphTopology;
use crate::vec2::Vec2;
use std::f64::consts::{PI, TAU};

fn closed_curve(n: usize, f: impl Fn(f64) -> Vec2) -> DiscreteNetwork {
    let mut pts: Vec<Vec2> = (0..n - 1).map(|k| f(TAU * k as f64 / (n - 1) as f64)).collect();
    pts.push(pts[0]);
    DiscreteNetwork::from_parts(GraphTopology::closed_loop(), vec![pts])
}

/// Counterclockwise circle of radius `r` about the origin, `n` samples
/// including the repeated base point.
pub fn circle(r: f64, n: usize) -> DiscreteNetwork {
    circle_at(Vec2::ZERO, r, n)
}

pub fn circle_at(center: Vec2, r: f64, n: usize) -> DiscreteNetwork {
    closed_curve(n, |t| center + Vec2::from_angle(t) * r)
}

/// Closed curve with polar radius `r + amplitude·cos(mode·θ)`.
pub fn perturbed_circle(r: f64, amplitude: f64, mode: u32, n: usize) -> DiscreteNetwork {
    closed_curve(n, |t| Vec2::from_angle(t) * (r + amplitude * (mode as f64 * t).cos()))
}

fn line(a: Vec2, b: Vec2, n: usize) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = (0..n).map(|k| a + (b - a) * (k as f64 / (n - 1) as f64)).collect();
    pts[n - 1] = b;
    pts
}

/// Straight edge from `a` to `b` pinned at both ends.
pub fn segment(a: Vec2, b: Vec2, n: usize) -> DiscreteNetwork {
    DiscreteNetwork::from_parts(GraphTopology::segment(), vec![line(a, b, n)])
}

/// Triod with straight arms of length `len` leaving the origin in the given
/// directions; arms end at pinned endpoints.
pub fn triod_with_angles(angles: [f64; 3], len: f64, n: usize) -> DiscreteNetwork {
    let edges = angles
        .iter()
        .map(|&a| line(Vec2::ZERO, Vec2::from_angle(a) * len, n))
        .collect();
    DiscreteNetwork::from_parts(GraphTopology::triod(), edges)
}

/// Symmetric Steiner triod: arms at angles `2πj/3`.
pub fn steiner_triod(len: f64, n: usize) -> DiscreteNetwork {
    triod_with_angles([0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0], len, n)
}

/// Theta network with junctions at `(∓a, 0)`: edge 0 is a circular arc
/// above the axis, edge 1 the straight middle segment, edge 2 the mirror
/// arc below. Arcs have radius `2a/√3` and meet the segment at 120°.
pub fn symmetric_theta_with_counts(a: f64, n_arc: usize, n_mid: usize) -> DiscreteNetwork {
    let r = 2.0 * a / 3f64.sqrt();
    let c = a / 3f64.sqrt();
    let sweep = 4.0 * PI / 3.0;
    let arc = |center: Vec2, start: f64, dir: f64| -> Vec<Vec2> {
        let mut pts: Vec<Vec2> = (0..n_arc)
            .map(|k| center + Vec2::from_angle(start + dir * sweep * k as f64 / (n_arc - 1) as f64) * r)
            .collect();
        pts[0] = Vec2::new(-a, 0.0);
        pts[n_arc - 1] = Vec2::new(a, 0.0);
        pts
    };
    let upper = arc(Vec2::new(0.0, c), 7.0 * PI / 6.0, -1.0);
    let lower = arc(Vec2::new(0.0, -c), 5.0 * PI / 6.0, 1.0);
    let middle = line(Vec2::new(-a, 0.0), Vec2::new(a, 0.0), n_mid);
    DiscreteNetwork::from_parts(GraphTopology::theta(), vec![upper, middle, lower])
}

/// [`symmetric_theta_with_counts`] with roughly uniform spacing across edges.
pub fn symmetric_theta(a: f64, n_arc: usize) -> DiscreteNetwork {
    let arc_len = 4.0 * PI / 3.0 * 2.0 / 3f64.sqrt();
    let n_mid = ((n_arc - 1) as f64 * 2.0 / arc_len).round() as usize + 1;
    symmetric_theta_with_counts(a, n_arc, n_mid.max(crate::geometry::MIN_SAMPLES))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for net in [
            circle(1.0, 32),
            perturbed_circle(1.0, 0.05, 2, 64),
            segment(Vec2::ZERO, Vec2::new(1.0, 0.0), 8),
            steiner_triod(1.0, 8),
            symmetric_theta(0.4, 40),
        ] {
            DiscreteNetwork::new(net.topology().clone(), net.edges().to_vec()).unwrap();
        }
    }

    #[test]
    fn theta_arc_lengths() {
        let a = 0.5;
        let net = symmetric_theta(a, 401);
        let lens = net.edge_lengths();
        let arc = 4.0 * PI / 3.0 * 2.0 * a / 3f64.sqrt();
        assert!((lens[0] - arc).abs() < 1e-4);
        assert!((lens[2] - arc).abs() < 1e-4);
        assert!((lens[1] - 2.0 * a).abs() < 1e-14);
    }
}
