//! Gaussian energy, shrinker residual and the weighted residual norm.
//!
//! All integrals use the trapezoid rule in `x` with the stencil speed
//! `|∂ₓγ|` as arclength weight.

use crate::error::Result;
use crate::geometry::{frames, polyline_length, trapezoid_weights, DiscreteNetwork, EdgeFrame};
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};

/// Gaussian weight `e^{−|p|²/2}`.
pub fn gaussian_weight(p: Vec2) -> f64 {
    (-0.5 * p.norm_sq()).exp()
}

/// Per-edge, per-sample `γ⊥ + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualField {
    pub values: Vec<Vec<Vec2>>,
}

impl ResidualField {
    pub fn max_norm(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }
}

pub fn gaussian_energy(net: &DiscreteNetwork) -> Result<f64> {
    let frames = frames(net)?;
    Ok(energy_with_frames(net, &frames))
}

pub(crate) fn energy_with_frames(net: &DiscreteNetwork, frames: &[EdgeFrame]) -> f64 {
    net.edges()
        .iter()
        .zip(frames)
        .map(|(pts, f)| {
            let w = trapezoid_weights(pts.len());
            pts.iter()
                .zip(&f.speed)
                .zip(&w)
                .map(|((&p, &s), &w)| w * s * gaussian_weight(p))
                .sum::<f64>()
        })
        .sum()
}

fn residual_with_frames(net: &DiscreteNetwork, frames: &[EdgeFrame]) -> ResidualField {
    let values = net
        .edges()
        .iter()
        .zip(frames)
        .map(|(pts, f)| {
            pts.iter()
                .enumerate()
                .map(|(k, &p)| {
                    let tau = f.tangent[k];
                    (p - tau * p.dot(tau)) + f.curvature[k]
                })
                .collect()
        })
        .collect();
    ResidualField { values }
}

/// `γ⊥ + k` at every sample; vanishes exactly on shrinkers.
pub fn shrinker_residual(net: &DiscreteNetwork) -> Result<ResidualField> {
    let frames = frames(net)?;
    Ok(residual_with_frames(net, &frames))
}

fn weighted_norm(net: &DiscreteNetwork, frames: &[EdgeFrame], res: &ResidualField) -> f64 {
    net.edges()
        .iter()
        .zip(frames)
        .zip(&res.values)
        .map(|((pts, f), r)| {
            let w = trapezoid_weights(pts.len());
            (0..pts.len())
                .map(|k| w[k] * f.speed[k] * gaussian_weight(pts[k]) * r[k].norm_sq())
                .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

/// `(Σᵢ ∫ |γ⊥ + k|² e^{−|γ|²/2} ds)^{1/2}`.
pub fn gradient_norm(net: &DiscreteNetwork) -> Result<f64> {
    let frames = frames(net)?;
    let res = residual_with_frames(net, &frames);
    Ok(weighted_norm(net, &frames, &res))
}

/// Sum of chord lengths over all edges.
pub fn total_length(net: &DiscreteNetwork) -> f64 {
    net.edges().iter().map(|p| polyline_length(p)).sum()
}

/// The variational summary of a network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub energy: f64,
    pub gradient_norm: f64,
    pub length: f64,
    pub max_residual: f64,
}

pub fn energy_report(net: &DiscreteNetwork) -> Result<EnergyReport> {
    let frames = frames(net)?;
    let res = residual_with_frames(net, &frames);
    Ok(EnergyReport {
        energy: energy_with_frames(net, &frames),
        gradient_norm: weighted_norm(net, &frames, &res),
        length: total_length(net),
        max_residual: res.max_norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::edge_frame;
    use crate::shapes;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn unit_circle_energy() {
        let e = gaussian_energy(&shapes::circle(1.0, 1024)).unwrap();
        assert!((e - TAU * (-0.5f64).exp()).abs() < 1e-4, "{e}");
    }

    #[test]
    fn segment_energy_matches_quadrature() {
        // Oracle: composite Simpson on ∫_{-1}^{1} e^{-s²/2} ds with 20000 panels.
        let m = 20000;
        let h = 2.0 / m as f64;
        let f = |s: f64| (-0.5 * s * s).exp();
        let mut simpson = f(-1.0) + f(1.0);
        for j in 1..m {
            simpson += if j % 2 == 1 { 4.0 } else { 2.0 } * f(-1.0 + j as f64 * h);
        }
        simpson *= h / 3.0;
        assert!((simpson - 1.71125).abs() < 1e-5);
        let net = shapes::segment(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0), 2001);
        let e = gaussian_energy(&net).unwrap();
        assert!((e - simpson).abs() < 1e-5, "{e} vs {simpson}");
    }

    #[test]
    fn far_away_energy_is_negligible() {
        let net = shapes::circle(1.0, 64).translated(Vec2::new(25.0, 0.0));
        let e = gaussian_energy(&net).unwrap();
        assert!(e <= 1e-80 * total_length(&net));
    }

    #[test]
    fn energy_is_rotation_invariant() {
        let net = shapes::perturbed_circle(1.0, 0.2, 3, 300).translated(Vec2::new(0.3, -0.1));
        let rot = net.map_points(|p| p.rotate(0.7));
        let (a, b) = (gaussian_energy(&net).unwrap(), gaussian_energy(&rot).unwrap());
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn circle_residuals() {
        let r = shrinker_residual(&shapes::circle(1.0, 256)).unwrap();
        assert!(r.max_norm() <= 5e-4);
        let r2 = shrinker_residual(&shapes::circle(2.0, 512)).unwrap();
        for v in r2.values.iter().flatten() {
            assert!((v.norm() - 1.5).abs() < 1e-3);
        }
    }

    #[test]
    fn residual_is_normal() {
        let net = shapes::perturbed_circle(1.0, 0.3, 2, 200);
        let r = shrinker_residual(&net).unwrap();
        let f = edge_frame(&net, 0).unwrap();
        for (v, t) in r.values[0].iter().zip(&f.tangent) {
            assert!(v.dot(*t).abs() < 1e-10);
        }
    }

    #[test]
    fn straight_triod_residual_vanishes_inside() {
        let net = shapes::steiner_triod(1.0, 21);
        let r = shrinker_residual(&net).unwrap();
        for edge in &r.values {
            for v in &edge[1..edge.len() - 1] {
                assert!(v.norm() < 1e-10);
            }
        }
    }

    #[test]
    fn gradient_norms_on_circles() {
        assert!(gradient_norm(&shapes::circle(1.0, 256)).unwrap() <= 1e-3);
        let g2 = gradient_norm(&shapes::circle(2.0, 512)).unwrap();
        let exact = (TAU * 2.0 * (-2.0f64).exp() * 2.25).sqrt();
        assert!((g2 - exact).abs() < 1e-3, "{g2} vs {exact}");
        let eps = 1e-3;
        let ge = gradient_norm(&shapes::circle(1.0 + eps, 1024)).unwrap();
        let lin = 2.0 * eps * (TAU * (-0.5f64).exp()).sqrt();
        assert!((ge - lin).abs() / lin < 0.05, "{ge} vs {lin}");
    }

    #[test]
    fn lengths() {
        let l = total_length(&shapes::circle(1.0, 1024));
        assert!((l - TAU).abs() < 1e-4);
        let s = shapes::segment(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0), 9);
        assert_eq!(total_length(&s), 2.0);
        let a = 0.5;
        let theta = shapes::symmetric_theta(a, 801);
        let exact = 2.0 * (4.0 * PI / 3.0) * (2.0 * a / 3f64.sqrt()) + 2.0 * a;
        assert!((total_length(&theta) - exact).abs() < 1e-4);
    }
}
