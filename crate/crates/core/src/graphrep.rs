//! Networks written as normal graphs over a reference network.
//!
//! A nearby network is `γⁱ = γⁱ* + Nⁱ νⁱ* + Tⁱ τⁱ*`, where the tangential
//! fields `T` are determined by the normal fields `N` through the junction
//! maps and the cut-off `χ`, so that the perturbed edges keep meeting at
//! triple junctions.
//!
//! At junction samples the chart uses an exactly symmetric frame: the three
//! measured inner tangents are replaced by the closest triple of unit
//! vectors at mutual 120°. This makes junction concurrency of
//! [`GraphChart::build_network`] exact up to rounding even when the
//! reference meets the angle condition only to discretization accuracy.

use crate::error::{Error, Result};
use crate::geometry::{edge_frame, field_norms_on, grid_step, inner_tangent, DiscreteNetwork, HermiteCurve};
use crate::topology::GraphTopology;
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Largest admissible V-constraint residual.
pub const CONSTRAINT_TOL: f64 = 1e-10;
/// Default ratio between the admissible perturbation size and the shortest
/// reference edge.
pub const DEFAULT_TUBE_FACTOR: f64 = 0.2;
const REPRESENT_TOL: f64 = 1e-10;
const REPRESENT_MAX_ITER: usize = 100;

const INV_SQRT3: f64 = 0.577_350_269_189_625_8;

/// Nonincreasing cut-off on `[0, 1/2]`: 1 on `[0, 1/8]`, 0 on `[3/8, 1/2]`,
/// quintic smoothstep in between.
pub fn cutoff_chi(x: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&x) {
        return Err(Error::DomainError(format!("cut-off argument {x} outside [0, 1/2]")));
    }
    Ok(chi(x))
}

fn chi(x: f64) -> f64 {
    let u = (4.0 * (x - 0.125)).clamp(0.0, 1.0);
    1.0 - u * u * u * (u * (6.0 * u - 15.0) + 10.0)
}

fn sign(e: u8) -> f64 {
    if e.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// The linear maps `(Lⁱ(a,b), Lʲ(a,b), Lᵏ(a,b))` of a junction with edges
/// `i < j < k` attached at parameter ends `signs = (e_i, e_j, e_k)`.
pub fn junction_tangential_maps(a: f64, b: f64, signs: [u8; 3]) -> [f64; 3] {
    let [ei, ej, ek] = signs;
    let sij = sign(ei + ej);
    let sik = sign(ei + ek);
    let sjk = sign(ej + ek);
    [
        -INV_SQRT3 * a - 2.0 * INV_SQRT3 * sij * b,
        2.0 * INV_SQRT3 * sij * a + INV_SQRT3 * b,
        -INV_SQRT3 * sik * a + INV_SQRT3 * sjk * b,
    ]
}

/// Signed sum `Σ (−1)^{e} N(e)` of normal values at junction `m`.
pub fn junction_constraint_residual(topology: &GraphTopology, n_fields: &[Vec<f64>], m: usize) -> f64 {
    topology.junctions()[m]
        .iter()
        .map(|&(e, end)| {
            let f = &n_fields[e];
            sign(end) * if end == 0 { f[0] } else { f[f.len() - 1] }
        })
        .sum()
}

/// Value of a uniformly sampled field at parameter `x ∈ [0,1]` by local
/// cubic Lagrange interpolation (exact at samples).
fn sample_field(f: &[f64], x: f64) -> f64 {
    let n = f.len();
    let h = grid_step(n);
    let s = x / h;
    let k = s.round();
    if (s - k).abs() < 1e-12 {
        return f[(k as usize).min(n - 1)];
    }
    let base = (s.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let mut acc = 0.0;
    for j in 0..4 {
        let mut w = 1.0;
        for m in 0..4 {
            if m != j {
                w *= (s - (base + m) as f64) / ((base + j) as f64 - (base + m) as f64);
            }
        }
        acc += w * f[base + j];
    }
    acc
}

/// `(graph parametrization)` the three arrays aligned with the reference grids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphRep {
    #[serde(skip)]
    pub reference: Option<DiscreteNetwork>,
    #[serde(rename = "N")]
    pub normal: Vec<Vec<f64>>,
    #[serde(rename = "T")]
    pub tangential: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RepNorms {
    pub n_l2: f64,
    pub n_h2: f64,
    pub phi_h2: f64,
}

/// Frames of a reference network prepared for graph parametrization.
#[derive(Clone, Debug)]
pub struct GraphChart {
    reference: DiscreteNetwork,
    tangents: Vec<Vec<Vec2>>,
    normals: Vec<Vec<Vec2>>,
    /// +1 when the sorted junction edges `i < j < k` turn counterclockwise.
    orientation: Vec<f64>,
    min_edge_length: f64,
    tube_factor: f64,
}

impl GraphChart {
    pub fn new(reference: &DiscreteNetwork) -> Result<Self> {
        let topo = reference.topology();
        let mut tangents = Vec::with_capacity(reference.n_edges());
        let mut normals = Vec::with_capacity(reference.n_edges());
        for i in 0..reference.n_edges() {
            let f = edge_frame(reference, i)?;
            tangents.push(f.tangent);
            normals.push(f.normal);
        }
        let mut orientation = Vec::with_capacity(topo.n_junctions());
        for m in 0..topo.n_junctions() {
            let inc = topo.junction_incidence(m)?;
            let t: Vec<Vec2> = inc
                .iter()
                .map(|&(e, end)| inner_tangent(reference, e, end))
                .collect::<Result<_>>()?;
            let s = if t[0].cross(t[1]) >= 0.0 { 1.0 } else { -1.0 };
            let third = 2.0 * PI / 3.0;
            let mean = t[0] + t[1].rotate(-s * third) + t[2].rotate(-2.0 * s * third);
            if !mean.norm().is_normal() {
                return Err(Error::InvalidNetwork(format!(
                    "junction {m} is too far from the angle condition to fit a frame"
                )));
            }
            let t0 = mean.normalized();
            for (slot, &(e, end)) in inc.iter().enumerate() {
                let tau = t0.rotate(s * third * slot as f64) * sign(end);
                let k = if end == 0 { 0 } else { tangents[e].len() - 1 };
                tangents[e][k] = tau;
                normals[e][k] = tau.perp();
            }
            orientation.push(s);
        }
        let min_edge_length = reference.edge_lengths().into_iter().fold(f64::INFINITY, f64::min);
        Ok(Self {
            reference: reference.clone(),
            tangents,
            normals,
            orientation,
            min_edge_length,
            tube_factor: DEFAULT_TUBE_FACTOR,
        })
    }

    pub fn with_tube_factor(mut self, factor: f64) -> Self {
        self.tube_factor = factor;
        self
    }

    pub fn reference(&self) -> &DiscreteNetwork {
        &self.reference
    }

    pub fn tangents(&self) -> &[Vec<Vec2>] {
        &self.tangents
    }

    pub fn normals(&self) -> &[Vec<Vec2>] {
        &self.normals
    }

    pub fn junction_orientation(&self, m: usize) -> f64 {
        self.orientation[m]
    }

    /// Size bound for perturbations and tube radius for candidates.
    pub fn tube_radius(&self) -> f64 {
        self.tube_factor * self.min_edge_length
    }

    fn check_shape(&self, fields: &[Vec<f64>]) -> Result<()> {
        let counts = self.reference.sample_counts();
        if fields.len() != counts.len() || fields.iter().zip(&counts).any(|(f, &n)| f.len() != n) {
            return Err(Error::GridMismatch("field does not match the reference grids".into()));
        }
        Ok(())
    }

    fn check_constraint(&self, n_fields: &[Vec<f64>]) -> Result<()> {
        let topo = self.reference.topology();
        for m in 0..topo.n_junctions() {
            let r = junction_constraint_residual(topo, n_fields, m);
            if r.abs() > CONSTRAINT_TOL {
                return Err(Error::ConstraintViolation { junction: m, residual: r });
            }
        }
        Ok(())
    }

    /// Tangential fields adapted to `n_fields`.
    pub fn adapted_tangential(&self, n_fields: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check_shape(n_fields)?;
        self.check_constraint(n_fields)?;
        Ok(self.tangential_unchecked(n_fields))
    }

    fn tangential_unchecked(&self, n_fields: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let topo = self.reference.topology();
        let mut out: Vec<Vec<f64>> = n_fields.iter().map(|f| vec![0.0; f.len()]).collect();
        for m in 0..topo.n_junctions() {
            let inc = topo.junction_incidence(m).expect("junction index in range");
            let signs = inc.map(|(_, e)| e);
            let s = self.orientation[m];
            let (fi, ei) = (&n_fields[inc[0].0], inc[0].1);
            let (fj, ej) = (&n_fields[inc[1].0], inc[1].1);
            for (slot, &(edge, end)) in inc.iter().enumerate() {
                let n = n_fields[edge].len();
                let h = grid_step(n);
                for k in 0..n {
                    let x = k as f64 * h;
                    // Samples belong to the nearer end; ties go to end 0.
                    let nearer_end = if x <= 0.5 { 0 } else { 1 };
                    if nearer_end != end {
                        continue;
                    }
                    let d = if end == 0 { x } else { 1.0 - x };
                    let c = chi(d.clamp(0.0, 0.5));
                    if c == 0.0 {
                        continue;
                    }
                    let a = sample_field(fi, (sign(ei) * d + ei as f64).abs());
                    let b = sample_field(fj, (sign(ej) * d + ej as f64).abs());
                    out[edge][k] = s * c * junction_tangential_maps(a, b, signs)[slot];
                }
            }
        }
        out
    }

    /// `γ* + Nν* + Tτ*` with `T` adapted to `N`.
    pub fn build_network(&self, n_fields: &[Vec<f64>]) -> Result<DiscreteNetwork> {
        self.check_shape(n_fields)?;
        self.check_constraint(n_fields)?;
        let closed = self.reference.is_closed();
        let c1 = field_norms_on(n_fields, &self.reference.sample_counts(), closed)?.c1;
        let bound = self.tube_radius();
        if c1 > bound {
            return Err(Error::PerturbationTooLarge { norm: c1, bound });
        }
        Ok(self.build_unchecked(n_fields))
    }

    pub(crate) fn build_unchecked(&self, n_fields: &[Vec<f64>]) -> DiscreteNetwork {
        let t_fields = self.tangential_unchecked(n_fields);
        self.assemble(n_fields, &t_fields)
    }

    fn assemble(&self, n_fields: &[Vec<f64>], t_fields: &[Vec<f64>]) -> DiscreteNetwork {
        let closed = self.reference.is_closed();
        let edges = self
            .reference
            .edges()
            .iter()
            .enumerate()
            .map(|(i, pts)| {
                let mut out: Vec<Vec2> = pts
                    .iter()
                    .enumerate()
                    .map(|(k, &p)| p + self.normals[i][k] * n_fields[i][k] + self.tangents[i][k] * t_fields[i][k])
                    .collect();
                if closed {
                    let last = out.len() - 1;
                    out[last] = out[0];
                }
                out
            })
            .collect();
        DiscreteNetwork::from_parts(self.reference.topology().clone(), edges)
    }

    /// Writes `candidate` as a graph over the reference: finds `N`, adapted
    /// `T` and increasing `φ` with `candidate∘φ = γ* + Nν* + Tτ*`.
    pub fn represent(&self, candidate: &DiscreteNetwork) -> Result<GraphRep> {
        let reference = &self.reference;
        if candidate.topology() != reference.topology() {
            return Err(Error::GridMismatch("candidate and reference topologies differ".into()));
        }
        let radius = self.tube_radius();
        for i in 0..reference.n_edges() {
            let d = hausdorff(candidate.edge(i), reference.edge(i));
            if d > radius {
                return Err(Error::TubeExit {
                    edge: i,
                    distance: d,
                    radius,
                });
            }
        }
        let closed = reference.is_closed();
        let curves: Vec<HermiteCurve> = candidate
            .edges()
            .iter()
            .map(|pts| {
                let h = grid_step(pts.len());
                HermiteCurve::new((0..pts.len()).map(|k| k as f64 * h).collect(), pts.clone())
            })
            .collect();
        let counts = reference.sample_counts();
        let max_step: Vec<f64> = candidate.sample_counts().iter().map(|&n| 4.0 * grid_step(n)).collect();
        let mut phi: Vec<Vec<f64>> = counts
            .iter()
            .map(|&n| (0..n).map(|k| k as f64 * grid_step(n)).collect())
            .collect();
        let mut normal: Vec<Vec<f64>> = counts.iter().map(|&n| vec![0.0; n]).collect();
        let mut tangential;
        let mut last_update = f64::INFINITY;
        for iter in 0..REPRESENT_MAX_ITER {
            tangential = self.tangential_unchecked(&normal);
            let mut update = 0.0_f64;
            for i in 0..reference.n_edges() {
                let pts = reference.edge(i);
                let n = pts.len();
                let curve = &curves[i];
                let last = if closed { n - 1 } else { n };
                for k in 0..last {
                    let (p, tau, nu) = (pts[k], self.tangents[i][k], self.normals[i][k]);
                    let pinned = !closed && (k == 0 || k == n - 1);
                    let y = if pinned {
                        phi[i][k]
                    } else {
                        solve_tangential(curve, closed, max_step[i], p, tau, tangential[i][k], phi[i][k])
                            .ok_or(Error::NoConvergence {
                                iterations: iter,
                                last_update,
                            })?
                    };
                    let c = eval_curve(curve, closed, y);
                    let new_n = (c - p).dot(nu);
                    update = update.max((new_n - normal[i][k]).abs()).max((y - phi[i][k]).abs());
                    normal[i][k] = new_n;
                    phi[i][k] = y;
                }
                if closed {
                    normal[i][n - 1] = normal[i][0];
                    phi[i][n - 1] = phi[i][0] + 1.0;
                }
            }
            last_update = update;
            if update < REPRESENT_TOL {
                tangential = self.tangential_unchecked(&normal);
                for (i, p) in phi.iter().enumerate() {
                    if p.windows(2).any(|w| w[1] <= w[0]) {
                        return Err(Error::TubeExit {
                            edge: i,
                            distance: f64::NAN,
                            radius,
                        });
                    }
                }
                return Ok(GraphRep {
                    reference: Some(reference.clone()),
                    normal,
                    tangential,
                    phi,
                });
            }
        }
        Err(Error::NoConvergence {
            iterations: REPRESENT_MAX_ITER,
            last_update,
        })
    }

    pub fn rep_norms(&self, rep: &GraphRep) -> Result<RepNorms> {
        rep_norms_on(rep, &self.reference)
    }
}

fn eval_curve(curve: &HermiteCurve, closed: bool, y: f64) -> Vec2 {
    eval_curve_d(curve, closed, y).0
}

fn eval_curve_d(curve: &HermiteCurve, closed: bool, y: f64) -> (Vec2, Vec2) {
    if closed {
        curve.eval_with_derivative(y.rem_euclid(1.0))
    } else {
        curve.eval_with_derivative(y.clamp(0.0, 1.0))
    }
}

/// Finds `y` near `guess` with `⟨c(y) − p, τ⟩ = target`.
fn solve_tangential(
    curve: &HermiteCurve,
    closed: bool,
    max_step: f64,
    p: Vec2,
    tau: Vec2,
    target: f64,
    guess: f64,
) -> Option<f64> {
    let g = |y: f64| (eval_curve(curve, closed, y) - p).dot(tau) - target;
    let (lo_lim, hi_lim) = if closed {
        (guess - 0.5, guess + 0.5)
    } else {
        curve.param_range()
    };
    let mut y = guess.clamp(lo_lim, hi_lim);
    // Newton from the previous value usually converges in a few steps.
    for _ in 0..30 {
        let (c, dc) = eval_curve_d(curve, closed, y);
        let val = (c - p).dot(tau) - target;
        let slope = dc.dot(tau);
        if val.abs() < 1e-15 {
            return Some(y);
        }
        if !(slope > 0.0) {
            break;
        }
        let step = val / slope;
        if step.abs() > max_step {
            break;
        }
        let next = y - step;
        if next < lo_lim || next > hi_lim {
            break;
        }
        y = next;
        if step.abs() < 1e-15 {
            return Some(y);
        }
    }
    // Fall back to bracketing and bisection.
    let mut step = 1e-3;
    let y0 = guess.clamp(lo_lim, hi_lim);
    let g0 = g(y0);
    let (mut lo, mut hi) = (y0, y0);
    let mut found = g0 == 0.0;
    if found {
        return Some(y0);
    }
    for _ in 0..40 {
        let cand = if g0 > 0.0 { (y0 - step).max(lo_lim) } else { (y0 + step).min(hi_lim) };
        if g(cand).signum() != g0.signum() {
            if g0 > 0.0 {
                lo = cand;
                hi = y0;
            } else {
                lo = y0;
                hi = cand;
            }
            found = true;
            break;
        }
        if cand == lo_lim || cand == hi_lim {
            break;
        }
        step *= 1.6;
    }
    if !found {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let d = b - a;
    let t = ((p - a).dot(d) / d.norm_sq()).clamp(0.0, 1.0);
    p.dist(a + d * t)
}

fn directed_distance(from: &[Vec2], to: &[Vec2]) -> f64 {
    from.iter()
        .map(|&p| {
            to.windows(2)
                .map(|w| point_segment_distance(p, w[0], w[1]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Hausdorff distance between two polylines.
pub fn hausdorff(a: &[Vec2], b: &[Vec2]) -> f64 {
    directed_distance(a, b).max(directed_distance(b, a))
}

/// Tangential fields adapted to `n_fields` over `reference`.
pub fn adapted_tangential(reference: &DiscreteNetwork, n_fields: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    GraphChart::new(reference)?.adapted_tangential(n_fields)
}

pub fn build_network(reference: &DiscreteNetwork, n_fields: &[Vec<f64>]) -> Result<DiscreteNetwork> {
    GraphChart::new(reference)?.build_network(n_fields)
}

pub fn represent(candidate: &DiscreteNetwork, reference: &DiscreteNetwork) -> Result<GraphRep> {
    GraphChart::new(reference)?.represent(candidate)
}

/// `‖N‖_{L²(dx)}`, `‖N‖_{H²(dx)}` and `‖φ − id‖_{H²(dx)}` on the reference grids.
pub fn rep_norms_on(rep: &GraphRep, reference: &DiscreteNetwork) -> Result<RepNorms> {
    let counts = reference.sample_counts();
    let closed = reference.is_closed();
    let n = field_norms_on(&rep.normal, &counts, closed)?;
    let dphi: Vec<Vec<f64>> = rep
        .phi
        .iter()
        .map(|p| {
            let h = grid_step(p.len());
            p.iter().enumerate().map(|(k, &v)| v - k as f64 * h).collect()
        })
        .collect();
    let phi = field_norms_on(&dphi, &counts, closed)?;
    Ok(RepNorms {
        n_l2: n.l2,
        n_h2: n.h2,
        phi_h2: phi.h2,
    })
}

pub fn rep_norms(rep: &GraphRep) -> Result<RepNorms> {
    match &rep.reference {
        Some(r) => rep_norms_on(rep, r),
        None => Err(Error::GridMismatch("representation carries no reference".into())),
    }
}

/// Adds to each junction's highest-index edge a cut-off bump so the normal
/// fields satisfy the junction constraint. Leaves `n_fields` unchanged where
/// the constraint already holds.
pub fn project_to_constraint(topology: &GraphTopology, n_fields: &mut [Vec<f64>]) {
    for m in 0..topology.n_junctions() {
        let r = junction_constraint_residual(topology, n_fields, m);
        let (edge, end) = topology.junction_incidence(m).expect("junction index in range")[2];
        let f = &mut n_fields[edge];
        let n = f.len();
        let h = grid_step(n);
        for (k, v) in f.iter_mut().enumerate() {
            let d = if end == 0 { k as f64 * h } else { 1.0 - k as f64 * h };
            if d <= 0.5 {
                *v -= sign(end) * r * chi(d);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use std::f64::consts::TAU;

    #[test]
    fn chi_values() {
        assert_eq!(cutoff_chi(0.1).unwrap(), 1.0);
        assert_eq!(cutoff_chi(0.4).unwrap(), 0.0);
        assert!((cutoff_chi(0.25).unwrap() - 0.5).abs() < 1e-15);
        assert!(cutoff_chi(0.6).is_err());
        assert!(cutoff_chi(-0.01).is_err());
        let mut prev = 1.0;
        for j in 0..=500 {
            let v = cutoff_chi(j as f64 / 1000.0).unwrap();
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn l_maps() {
        assert_eq!(junction_tangential_maps(0.0, 0.0, [1, 1, 1]), [0.0; 3]);
        let l = junction_tangential_maps(1.0, 0.0, [1, 1, 1]);
        let expect = [-INV_SQRT3, 2.0 * INV_SQRT3, -INV_SQRT3];
        for (a, b) in l.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let l = junction_tangential_maps(0.0, 1.0, [1, 1, 1]);
        let expect = [-2.0 * INV_SQRT3, INV_SQRT3, INV_SQRT3];
        for (a, b) in l.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_normal_gives_zero_tangential_and_identity() {
        let net = shapes::symmetric_theta(0.5, 40);
        let zero: Vec<Vec<f64>> = net.sample_counts().iter().map(|&n| vec![0.0; n]).collect();
        let t = adapted_tangential(&net, &zero).unwrap();
        assert!(t.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(build_network(&net, &zero).unwrap(), net);
    }

    #[test]
    fn theta_constant_fields_reproduce_l_values() {
        let net = shapes::symmetric_theta_with_counts(0.5, 41, 41);
        let chart = GraphChart::new(&net).unwrap();
        let n = vec![vec![1.0; 41], vec![0.0; 41], vec![-1.0; 41]];
        let t = chart.adapted_tangential(&n).unwrap();
        for m in 0..2 {
            let inc = net.topology().junction_incidence(m).unwrap();
            let l = junction_tangential_maps(1.0, 0.0, inc.map(|(_, e)| e));
            let s = chart.junction_orientation(m);
            for (slot, &(edge, end)) in inc.iter().enumerate() {
                for k in 0..=5 {
                    let idx = if end == 0 { k } else { 40 - k };
                    assert!((t[edge][idx] - s * l[slot]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn endpoint_halves_have_no_tangential_part() {
        let net = shapes::steiner_triod(1.0, 21);
        let mut n: Vec<Vec<f64>> = (0..3)
            .map(|e| (0..21).map(|k| 0.01 * ((k + e) as f64).sin()).collect())
            .collect();
        project_to_constraint(net.topology(), &mut n);
        let t = adapted_tangential(&net, &n).unwrap();
        for f in &t {
            for (k, v) in f.iter().enumerate() {
                if k as f64 / 20.0 >= 0.5 {
                    assert_eq!(*v, 0.0);
                }
            }
        }
    }

    #[test]
    fn constraint_violation_is_rejected() {
        let net = shapes::symmetric_theta(0.5, 30);
        let n: Vec<Vec<f64>> = net.sample_counts().iter().map(|&c| vec![0.01; c]).collect();
        assert!(matches!(
            build_network(&net, &n),
            Err(Error::ConstraintViolation { .. })
        ));
    }

    #[test]
    fn large_perturbation_is_rejected() {
        let net = shapes::circle(1.0, 64);
        let n = vec![vec![2.0; 64]];
        assert!(matches!(
            build_network(&net, &n),
            Err(Error::PerturbationTooLarge { .. })
        ));
    }

    #[test]
    fn circle_offset() {
        let net = shapes::circle(1.0, 128);
        let eps = 0.01;
        // Normals of a counterclockwise circle point inward.
        let out = build_network(&net, &[vec![-eps; 128]]).unwrap();
        for p in out.edge(0) {
            assert!((p.norm() - (1.0 + eps)).abs() < 1e-12);
        }
    }

    #[test]
    fn theta_build_is_concurrent() {
        let net = shapes::symmetric_theta(0.5, 50);
        let mut n: Vec<Vec<f64>> = net
            .sample_counts()
            .iter()
            .enumerate()
            .map(|(e, &c)| (0..c).map(|k| 0.004 * (3.0 * k as f64 / c as f64 + e as f64).cos()).collect())
            .collect();
        project_to_constraint(net.topology(), &mut n);
        let out = build_network(&net, &n).unwrap();
        for m in 0..2 {
            let p = out.junction_points(m);
            assert!(p[0].dist(p[1]) <= 1e-12 && p[1].dist(p[2]) <= 1e-12);
        }
    }

    #[test]
    fn represent_identity() {
        let net = shapes::symmetric_theta(0.5, 30);
        let rep = represent(&net, &net).unwrap();
        assert!(rep.normal.iter().flatten().all(|v| v.abs() < 1e-14));
        assert!(rep.tangential.iter().flatten().all(|v| v.abs() < 1e-14));
        let norms = rep_norms(&rep).unwrap();
        assert!(norms.n_l2 < 1e-14 && norms.phi_h2 < 1e-12);
    }

    #[test]
    fn represent_round_trip_on_loop() {
        let net = shapes::circle(1.0, 257);
        let n0: Vec<f64> = (0..257).map(|k| 0.01 * (TAU * k as f64 / 256.0).sin()).collect();
        let cand = build_network(&net, std::slice::from_ref(&n0)).unwrap();
        let rep = represent(&cand, &net).unwrap();
        for (a, b) in rep.normal[0].iter().zip(&n0) {
            assert!((a - b).abs() < 1e-8);
        }
        for (k, p) in rep.phi[0].iter().enumerate() {
            assert!((p - k as f64 / 256.0).abs() < 1e-8);
        }
        let norms = rep_norms(&rep).unwrap();
        assert!((norms.n_l2 - 0.01 / 2f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn represent_dilated_circle() {
        let net = shapes::circle(1.0, 200);
        let eps = 0.01;
        let rep = represent(&shapes::circle(1.0 + eps, 200), &net).unwrap();
        let norms = rep_norms(&rep).unwrap();
        assert!((norms.n_l2 - eps).abs() < 1e-8, "{}", norms.n_l2);
    }

    #[test]
    fn represent_pure_gauge() {
        let n = 512;
        let net = shapes::circle(1.0, n);
        let mut pts: Vec<Vec2> = (0..n - 1)
            .map(|k| {
                let x = k as f64 / (n - 1) as f64;
                Vec2::from_angle(TAU * x * x)
            })
            .collect();
        pts.push(pts[0]);
        let cand = DiscreteNetwork::new(net.topology().clone(), vec![pts]).unwrap();
        let rep = represent(&cand, &net).unwrap();
        let max_n = rep.normal[0].iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(max_n <= 1e-8, "{max_n}");
        for (k, p) in rep.phi[0].iter().enumerate() {
            let x = k as f64 / (n - 1) as f64;
            assert!((p - x.sqrt()).abs() < 1e-6, "k={k}: {p} vs {}", x.sqrt());
        }
    }

    #[test]
    fn tube_exit() {
        let net = shapes::circle(1.0, 64);
        let far = shapes::circle(3.0, 64);
        assert!(matches!(represent(&far, &net), Err(Error::TubeExit { .. })));
    }

    #[test]
    fn sample_field_is_exact_on_cubics() {
        let n = 11;
        let f: Vec<f64> = (0..n).map(|k| (k as f64 / 10.0).powi(3)).collect();
        for j in 0..=37 {
            let x = j as f64 / 37.0;
            assert!((sample_field(&f, x) - x.powi(3)).abs() < 1e-13);
        }
    }
}
