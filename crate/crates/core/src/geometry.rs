//! Discrete differential geometry of networks stored as uniform-parameter
//! polylines.
//!
//! Edge `i` holds samples `γⁱ(x_k)` at `x_k = k / (n − 1)`. Derivatives are
//! taken in `x` with second-order stencils (centered inside, one-sided at
//! the ends of open edges, periodic on a closed loop). A closed loop stores
//! its first sample again as the last one.

use crate::error::{Error, Result};
use crate::topology::{Attachment, GraphTopology, RawTopology};
use crate::vec2::{Sample, Vec2};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Junction endpoints must agree to this distance.
pub const CONCURRENCY_TOL: f64 = 1e-12;
/// Default angle tolerance (radians) used while flowing.
pub const FLOW_ANGLE_TOL: f64 = 1e-2;
pub const MIN_SAMPLES: usize = 4;

/// A network: topology plus one polyline per edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkFile", into = "NetworkFile")]
pub struct DiscreteNetwork {
    topology: GraphTopology,
    edges: Vec<Vec<Vec2>>,
}

/// On-disk shape of a network: `{"topology": {...}, "edges": [[[x,y],...],...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetworkFile {
    pub topology: RawTopology,
    pub edges: Vec<Vec<Vec2>>,
}

impl TryFrom<NetworkFile> for DiscreteNetwork {
    type Error = Error;
    fn try_from(f: NetworkFile) -> Result<Self> {
        let topology = crate::topology::validate_topology(&f.topology)?;
        DiscreteNetwork::new(topology, f.edges)
    }
}

impl From<DiscreteNetwork> for NetworkFile {
    fn from(n: DiscreteNetwork) -> Self {
        NetworkFile {
            topology: RawTopology::from(&n.topology),
            edges: n.edges,
        }
    }
}

impl DiscreteNetwork {
    /// Validates sample counts, distinct consecutive samples and junction
    /// concurrency. A loop's closing sample is set equal to its first.
    pub fn new(topology: GraphTopology, mut edges: Vec<Vec<Vec2>>) -> Result<Self> {
        if edges.len() != topology.n_edges() {
            return Err(Error::InvalidNetwork(format!(
                "topology has {} edges but {} polylines were given",
                topology.n_edges(),
                edges.len()
            )));
        }
        for (i, pts) in edges.iter_mut().enumerate() {
            if pts.len() < MIN_SAMPLES {
                return Err(Error::InvalidNetwork(format!(
                    "edge {i} has {} samples, at least {MIN_SAMPLES} are required",
                    pts.len()
                )));
            }
            if topology.is_loop() {
                let (first, last) = (pts[0], pts[pts.len() - 1]);
                if first.dist(last) > CONCURRENCY_TOL {
                    return Err(Error::InvalidNetwork(
                        "closed edge must repeat its first sample at the end".into(),
                    ));
                }
                let n = pts.len();
                pts[n - 1] = first;
            }
            for k in 0..pts.len() - 1 {
                if !(pts[k + 1] - pts[k]).norm().is_normal() {
                    return Err(Error::DegenerateEdge { edge: i, sample: k });
                }
            }
        }
        let net = Self { topology, edges };
        for m in 0..net.topology.n_junctions() {
            let pts = net.junction_points(m);
            let spread = pts[0]
                .dist(pts[1])
                .max(pts[1].dist(pts[2]))
                .max(pts[0].dist(pts[2]));
            if spread > CONCURRENCY_TOL {
                return Err(Error::InvalidNetwork(format!(
                    "junction {m} endpoints are {spread:e} apart"
                )));
            }
        }
        Ok(net)
    }

    /// Builds without checks. Callers guarantee the invariants.
    pub(crate) fn from_parts(topology: GraphTopology, edges: Vec<Vec<Vec2>>) -> Self {
        Self { topology, edges }
    }

    pub fn topology(&self) -> &GraphTopology {
        &self.topology
    }

    pub fn edges(&self) -> &[Vec<Vec2>] {
        &self.edges
    }

    pub fn edge(&self, i: usize) -> &[Vec2] {
        &self.edges[i]
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn sample_counts(&self) -> Vec<usize> {
        self.edges.iter().map(Vec::len).collect()
    }

    pub fn is_closed(&self) -> bool {
        self.topology.is_loop()
    }

    /// Position of `(edge, end)`.
    pub fn end_point(&self, edge: usize, end: u8) -> Vec2 {
        let pts = &self.edges[edge];
        if end == 0 {
            pts[0]
        } else {
            pts[pts.len() - 1]
        }
    }

    /// The three endpoint samples meeting at junction `m`, in incidence order.
    pub fn junction_points(&self, m: usize) -> [Vec2; 3] {
        let rec = self.topology.junctions()[m];
        rec.map(|(e, end)| self.end_point(e, end))
    }

    /// Applies `f` to every sample.
    pub fn map_points(&self, mut f: impl FnMut(Vec2) -> Vec2) -> DiscreteNetwork {
        let edges = self
            .edges
            .iter()
            .map(|pts| pts.iter().map(|&p| f(p)).collect())
            .collect();
        Self::from_parts(self.topology.clone(), edges)
    }

    pub fn translated(&self, v: Vec2) -> DiscreteNetwork {
        self.map_points(|p| p + v)
    }

    pub fn scaled(&self, s: f64) -> DiscreteNetwork {
        self.map_points(|p| p * s)
    }

    /// Chord-sum length of each edge.
    pub fn edge_lengths(&self) -> Vec<f64> {
        self.edges.iter().map(|p| polyline_length(p)).collect()
    }

    /// Smallest distance between consecutive samples over all edges.
    pub fn min_spacing(&self) -> f64 {
        self.edges
            .iter()
            .flat_map(|p| p.windows(2).map(|w| w[0].dist(w[1])))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest coordinate difference between two networks on the same grids.
    pub fn c0_distance(&self, other: &DiscreteNetwork) -> Result<f64> {
        if self.sample_counts() != other.sample_counts() {
            return Err(Error::GridMismatch("sample counts differ".into()));
        }
        Ok(self
            .edges
            .iter()
            .zip(&other.edges)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| p.dist(*q)))
            .fold(0.0, f64::max))
    }
}

pub fn polyline_length(pts: &[Vec2]) -> f64 {
    pts.windows(2).map(|w| w[0].dist(w[1])).sum()
}

/// Grid spacing in `x` for `n` samples.
pub fn grid_step(n: usize) -> f64 {
    1.0 / (n as f64 - 1.0)
}

/// Trapezoid weights on the uniform `x` grid.
pub fn trapezoid_weights(n: usize) -> Vec<f64> {
    let h = grid_step(n);
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

/// First and second `x`-derivatives with second-order stencils.
pub fn derivatives<T: Sample>(v: &[T], closed: bool) -> (Vec<T>, Vec<T>) {
    let n = v.len();
    assert!(n >= MIN_SAMPLES, "stencils need at least {MIN_SAMPLES} samples");
    let h = grid_step(n);
    let (inv2h, invh2) = (0.5 / h, 1.0 / (h * h));
    let mut d1 = vec![T::default(); n];
    let mut d2 = vec![T::default(); n];
    if closed {
        let m = n - 1;
        for k in 0..m {
            let prev = v[(k + m - 1) % m];
            let next = v[(k + 1) % m];
            d1[k] = (next - prev) * inv2h;
            d2[k] = (next - v[k] * 2.0 + prev) * invh2;
        }
        d1[m] = d1[0];
        d2[m] = d2[0];
        return (d1, d2);
    }
    for k in 1..n - 1 {
        d1[k] = (v[k + 1] - v[k - 1]) * inv2h;
        d2[k] = (v[k + 1] - v[k] * 2.0 + v[k - 1]) * invh2;
    }
    d1[0] = (v[1] * 4.0 - v[0] * 3.0 - v[2]) * inv2h;
    d1[n - 1] = (v[n - 1] * 3.0 - v[n - 2] * 4.0 + v[n - 3]) * inv2h;
    d2[0] = (v[0] * 2.0 - v[1] * 5.0 + v[2] * 4.0 - v[3]) * invh2;
    d2[n - 1] = (v[n - 1] * 2.0 - v[n - 2] * 5.0 + v[n - 3] * 4.0 - v[n - 4]) * invh2;
    (d1, d2)
}

/// Per-sample moving frame and curvature of one edge.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeFrame {
    pub tangent: Vec<Vec2>,
    /// Counterclockwise rotation of the tangent.
    pub normal: Vec<Vec2>,
    /// `|∂ₓγ|`.
    pub speed: Vec<f64>,
    /// Curvature vector `∂ₛ²γ`.
    pub curvature: Vec<Vec2>,
}

pub fn edge_frame(net: &DiscreteNetwork, i: usize) -> Result<EdgeFrame> {
    let pts = net.edges.get(i).ok_or(Error::IndexOutOfRange {
        index: i,
        len: net.n_edges(),
    })?;
    frame_of(pts, net.is_closed(), i)
}

pub(crate) fn frame_of(pts: &[Vec2], closed: bool, edge: usize) -> Result<EdgeFrame> {
    let (d1, d2) = derivatives(pts, closed);
    let n = pts.len();
    let mut frame = EdgeFrame {
        tangent: Vec::with_capacity(n),
        normal: Vec::with_capacity(n),
        speed: Vec::with_capacity(n),
        curvature: Vec::with_capacity(n),
    };
    for k in 0..n {
        let speed = d1[k].norm();
        if !speed.is_normal() {
            return Err(Error::DegenerateEdge { edge, sample: k });
        }
        let tau = d1[k] / speed;
        let nu = tau.perp();
        // Normal part of γ_xx over |γ_x|²; equal to the chain-rule expression.
        let kappa = d2[k].dot(nu) / (speed * speed);
        frame.tangent.push(tau);
        frame.normal.push(nu);
        frame.speed.push(speed);
        frame.curvature.push(nu * kappa);
    }
    Ok(frame)
}

pub fn frames(net: &DiscreteNetwork) -> Result<Vec<EdgeFrame>> {
    (0..net.n_edges()).map(|i| edge_frame(net, i)).collect()
}

/// Unnormalized inner tangent `(−1)^e ∂ₓγ(e)` from the one-sided 3-point
/// stencil (up to the positive factor `1/(2h)`).
pub fn inner_tangent_raw(pts: &[Vec2], end: u8) -> Vec2 {
    let n = pts.len();
    if end == 0 {
        pts[1] * 4.0 - pts[0] * 3.0 - pts[2]
    } else {
        pts[n - 2] * 4.0 - pts[n - 1] * 3.0 - pts[n - 3]
    }
}

pub fn inner_tangent(net: &DiscreteNetwork, edge: usize, end: u8) -> Result<Vec2> {
    let w = inner_tangent_raw(&net.edges[edge], end);
    let len = w.norm();
    if !len.is_normal() {
        let sample = if end == 0 { 0 } else { net.edges[edge].len() - 1 };
        return Err(Error::DegenerateEdge { edge, sample });
    }
    Ok(w / len)
}

fn angle_between(a: Vec2, b: Vec2) -> f64 {
    a.cross(b).abs().atan2(a.dot(b))
}

/// Angles between the inner tangents at junction `m`, ordered as
/// `(angle(i,j), angle(j,k), angle(k,i))` for edges `i < j < k`.
pub fn junction_angles(net: &DiscreteNetwork, m: usize) -> Result<[f64; 3]> {
    let [(i, ei), (j, ej), (k, ek)] = net.topology.junction_incidence(m)?;
    let ti = inner_tangent(net, i, ei)?;
    let tj = inner_tangent(net, j, ej)?;
    let tk = inner_tangent(net, k, ek)?;
    Ok([angle_between(ti, tj), angle_between(tj, tk), angle_between(tk, ti)])
}

/// Largest deviation of any junction angle from `2π/3`, with its junction.
pub fn worst_angle_deviation(net: &DiscreteNetwork) -> Result<Option<(usize, f64)>> {
    let mut worst: Option<(usize, f64)> = None;
    for m in 0..net.topology.n_junctions() {
        let dev = junction_angles(net, m)?
            .iter()
            .map(|a| (a - 2.0 * PI / 3.0).abs())
            .fold(0.0, f64::max);
        if worst.is_none_or(|(_, w)| dev > w) {
            worst = Some((m, dev));
        }
    }
    Ok(worst)
}

/// A transversal crossing between two polyline segments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Crossing {
    pub edge_a: usize,
    pub segment_a: usize,
    pub edge_b: usize,
    pub segment_b: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularityReport {
    pub regular: bool,
    /// `(junction, |angle − 2π/3|)` for the worst junction, if any.
    pub worst_angle: Option<(usize, f64)>,
    pub crossing: Option<Crossing>,
}

/// Angle condition within `tol` at every junction and no sampled crossings.
pub fn is_regular(net: &DiscreteNetwork, tol: f64) -> Result<RegularityReport> {
    let worst_angle = worst_angle_deviation(net)?;
    let crossing = find_crossing(net);
    let regular = worst_angle.is_none_or(|(_, d)| d <= tol) && crossing.is_none();
    Ok(RegularityReport {
        regular,
        worst_angle,
        crossing,
    })
}

fn segments_cross(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let (lo, hi) = (
        Vec2::new(p1.x.min(p2.x), p1.y.min(p2.y)),
        Vec2::new(p1.x.max(p2.x), p1.y.max(p2.y)),
    );
    if q1.x.max(q2.x) < lo.x || q1.x.min(q2.x) > hi.x || q1.y.max(q2.y) < lo.y || q1.y.min(q2.y) > hi.y {
        return false;
    }
    let d = p2 - p1;
    let e = q2 - q1;
    let o1 = d.cross(q1 - p1);
    let o2 = d.cross(q2 - p1);
    let o3 = e.cross(p1 - q1);
    let o4 = e.cross(p2 - q1);
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

/// Brute-force search for a crossing between non-adjacent segments.
pub fn find_crossing(net: &DiscreteNetwork) -> Option<Crossing> {
    let topo = &net.topology;
    let closed = net.is_closed();
    // Junction touched by segment `s` of edge `e`, if it is an end segment.
    let touches = |e: usize, s: usize| -> [Option<usize>; 2] {
        let last = net.edges[e].len() - 2;
        let at = |end: u8| match topo.attachment(e, end) {
            Attachment::Junction(m) => Some(m),
            _ => None,
        };
        [
            if s == 0 { at(0) } else { None },
            if s == last { at(1) } else { None },
        ]
    };
    for a in 0..net.n_edges() {
        let pa = &net.edges[a];
        for b in a..net.n_edges() {
            let pb = &net.edges[b];
            for sa in 0..pa.len() - 1 {
                let start_b = if a == b { sa + 2 } else { 0 };
                for sb in start_b..pb.len() - 1 {
                    if a == b && closed && sa == 0 && sb == pb.len() - 2 {
                        continue;
                    }
                    if a != b {
                        let ja = touches(a, sa);
                        let jb = touches(b, sb);
                        let shared = ja
                            .iter()
                            .flatten()
                            .any(|m| jb.iter().flatten().any(|n| n == m));
                        if shared {
                            continue;
                        }
                    }
                    if segments_cross(pa[sa], pa[sa + 1], pb[sb], pb[sb + 1]) {
                        return Some(Crossing {
                            edge_a: a,
                            segment_a: sa,
                            edge_b: b,
                            segment_b: sb,
                        });
                    }
                }
            }
        }
    }
    None
}

/// Piecewise cubic Hermite curve through samples at increasing parameters,
/// with node derivatives from five-point Lagrange stencils (fourth order,
/// shifted inward near the ends). Reproduces polynomials up to degree three.
#[derive(Clone, Debug)]
pub(crate) struct HermiteCurve {
    params: Vec<f64>,
    values: Vec<Vec2>,
    slopes: Vec<Vec2>,
}

impl HermiteCurve {
    pub(crate) fn new(params: Vec<f64>, values: Vec<Vec2>) -> Self {
        let n = params.len();
        debug_assert_eq!(n, values.len());
        let width = 5.min(n);
        let slopes = (0..n)
            .map(|i| {
                let start = i.saturating_sub(width / 2).min(n - width);
                lagrange_derivative(&params[start..start + width], &values[start..start + width], i - start)
            })
            .collect();
        Self {
            params,
            values,
            slopes,
        }
    }

    pub(crate) fn param_range(&self) -> (f64, f64) {
        (self.params[0], self.params[self.params.len() - 1])
    }

    fn interval(&self, u: f64) -> usize {
        let n = self.params.len();
        match self.params.partition_point(|&p| p <= u) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        }
    }

    pub(crate) fn eval(&self, u: f64) -> Vec2 {
        self.eval_with_derivative(u).0
    }

    pub(crate) fn eval_with_derivative(&self, u: f64) -> (Vec2, Vec2) {
        let k = self.interval(u);
        let (s0, s1) = (self.params[k], self.params[k + 1]);
        let h = s1 - s0;
        let t = (u - s0) / h;
        let (p0, p1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.slopes[k] * h, self.slopes[k + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let p = p0 * h00 + m0 * h10 + p1 * h01 + m1 * h11;
        let dh00 = 6.0 * t2 - 6.0 * t;
        let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
        let dh01 = -6.0 * t2 + 6.0 * t;
        let dh11 = 3.0 * t2 - 2.0 * t;
        let dp = (p0 * dh00 + m0 * dh10 + p1 * dh01 + m1 * dh11) / h;
        (p, dp)
    }
}

/// Derivative at `nodes[i]` of the polynomial interpolating `(nodes, values)`.
fn lagrange_derivative(nodes: &[f64], values: &[Vec2], i: usize) -> Vec2 {
    let xi = nodes[i];
    let mut acc = Vec2::ZERO;
    let mut self_weight = 0.0;
    for (j, &xj) in nodes.iter().enumerate() {
        if j == i {
            continue;
        }
        self_weight += 1.0 / (xi - xj);
        let mut w = 1.0 / (xj - xi);
        for (m, &xm) in nodes.iter().enumerate() {
            if m != i && m != j {
                w *= (xi - xm) / (xj - xm);
            }
        }
        acc += values[j] * w;
    }
    acc + values[i] * self_weight
}

/// Redistributes samples uniformly in arclength, `targets[i]` samples on
/// edge `i`. Ends (junctions, endpoints, a loop's base point) stay fixed.
pub fn resample_arclength(net: &DiscreteNetwork, targets: &[usize]) -> Result<DiscreteNetwork> {
    if targets.len() != net.n_edges() {
        return Err(Error::GridMismatch(format!(
            "{} target counts for {} edges",
            targets.len(),
            net.n_edges()
        )));
    }
    let mut edges = Vec::with_capacity(net.n_edges());
    for (i, (pts, &m)) in net.edges.iter().zip(targets).enumerate() {
        if m < MIN_SAMPLES {
            return Err(Error::DomainError(format!(
                "target count {m} below minimum {MIN_SAMPLES}"
            )));
        }
        let mut s = Vec::with_capacity(pts.len());
        let mut acc = 0.0;
        s.push(0.0);
        for (k, w) in pts.windows(2).enumerate() {
            let d = w[0].dist(w[1]);
            if !d.is_normal() {
                return Err(Error::DegenerateEdge { edge: i, sample: k });
            }
            acc += d;
            s.push(acc);
        }
        let total = acc;
        let curve = HermiteCurve::new(s, pts.clone());
        let mut out: Vec<Vec2> = (0..m)
            .map(|j| curve.eval(total * j as f64 / (m - 1) as f64))
            .collect();
        out[0] = pts[0];
        out[m - 1] = pts[pts.len() - 1];
        edges.push(out);
    }
    Ok(DiscreteNetwork::from_parts(net.topology.clone(), edges))
}

/// Discrete norms of a scalar field sampled on a network's grids.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldNorms {
    pub l2: f64,
    pub h2: f64,
    pub c0: f64,
    pub c1: f64,
}

/// `L²(dx)` and `H²(dx)` by the trapezoid rule, `C⁰` and `C¹` as maxima over
/// samples (summed over edges for the integrals, maximum over edges for the
/// sup norms).
pub fn discrete_norms(field: &[Vec<f64>], net: &DiscreteNetwork) -> Result<FieldNorms> {
    field_norms_on(field, &net.sample_counts(), net.is_closed())
}

pub(crate) fn field_norms_on(field: &[Vec<f64>], counts: &[usize], closed: bool) -> Result<FieldNorms> {
    if field.len() != counts.len() {
        return Err(Error::GridMismatch(format!(
            "{} field edges for {} network edges",
            field.len(),
            counts.len()
        )));
    }
    let (mut l2, mut h1, mut h2) = (0.0, 0.0, 0.0);
    let (mut c0, mut c1d) = (0.0_f64, 0.0_f64);
    for (i, (f, &n)) in field.iter().zip(counts).enumerate() {
        if f.len() != n {
            return Err(Error::GridMismatch(format!(
                "edge {i}: {} values on {n} samples",
                f.len()
            )));
        }
        let (d1, d2) = derivatives(f, closed);
        let w = trapezoid_weights(n);
        for k in 0..n {
            l2 += w[k] * f[k] * f[k];
            h1 += w[k] * d1[k] * d1[k];
            h2 += w[k] * d2[k] * d2[k];
            c0 = c0.max(f[k].abs());
            c1d = c1d.max(d1[k].abs());
        }
    }
    Ok(FieldNorms {
        l2: l2.sqrt(),
        h2: (l2 + h1 + h2).sqrt(),
        c0,
        c1: c0 + c1d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn circle_curvature_is_minus_position() {
        let net = shapes::circle(1.0, 256);
        let f = edge_frame(&net, 0).unwrap();
        for (k, p) in net.edge(0).iter().enumerate() {
            assert!((f.curvature[k] + *p).norm() <= 5e-4, "sample {k}");
        }
    }

    #[test]
    fn segment_frame_is_flat() {
        let net = shapes::segment(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), 16);
        let f = edge_frame(&net, 0).unwrap();
        for k in 1..15 {
            assert_eq!(f.curvature[k], Vec2::ZERO);
        }
        for k in 0..16 {
            assert!((f.tangent[k] - Vec2::new(1.0, 0.0)).norm() < 1e-14);
            assert!((f.normal[k] - Vec2::new(0.0, 1.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn circle_radius_two_curvature() {
        let net = shapes::circle(2.0, 512);
        let f = edge_frame(&net, 0).unwrap();
        for k in &f.curvature {
            assert!((k.norm() - 0.5).abs() < 1e-4);
        }
    }

    #[test]
    fn frame_is_orthonormal() {
        let net = shapes::perturbed_circle(1.0, 0.2, 3, 200);
        let f = edge_frame(&net, 0).unwrap();
        for k in 0..f.tangent.len() {
            assert!((f.tangent[k].norm() - 1.0).abs() < 1e-12);
            assert!((f.normal[k].norm() - 1.0).abs() < 1e-12);
            assert!(f.tangent[k].dot(f.normal[k]).abs() < 1e-12);
            assert_eq!(f.normal[k], f.tangent[k].perp());
        }
    }

    #[test]
    fn curvature_stencil_is_second_order() {
        let err = |n: usize| {
            let net = shapes::circle(1.0, n);
            let f = edge_frame(&net, 0).unwrap();
            f.curvature.iter().map(|k| (k.norm() - 1.0).abs()).fold(0.0, f64::max)
        };
        for n in [33, 65, 129] {
            let ratio = err(n) / err(2 * n - 1);
            assert!(ratio >= 3.5, "n={n}: ratio {ratio}");
        }
    }

    #[test]
    fn degenerate_edge_is_reported() {
        let topo = GraphTopology::segment();
        let pts = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(0.5, 0.0),
            Vec2::new(0.5, 0.0),
            Vec2::new(1.0, 0.0),
        ];
        assert!(matches!(
            DiscreteNetwork::new(topo, pts_vec(pts)),
            Err(Error::DegenerateEdge { edge: 0, sample: 1 })
        ));
    }

    fn pts_vec(p: Vec<Vec2>) -> Vec<Vec<Vec2>> {
        vec![p]
    }

    #[test]
    fn standard_triod_angles() {
        let net = shapes::steiner_triod(1.0, 16);
        let a = junction_angles(&net, 0).unwrap();
        for x in a {
            assert!((x - 2.0 * PI / 3.0).abs() < 1e-12);
        }
        assert!(is_regular(&net, 1e-6).unwrap().regular);
    }

    #[test]
    fn rotated_arm_angles() {
        let net = shapes::triod_with_angles([0.0, 2.0 * PI / 3.0 + 0.1, 4.0 * PI / 3.0], 1.0, 32);
        let a = junction_angles(&net, 0).unwrap();
        let third = 2.0 * PI / 3.0;
        assert!((a[0] - (third + 0.1)).abs() < 1e-3);
        assert!((a[1] - (third - 0.1)).abs() < 1e-3);
        assert!((a[2] - third).abs() < 1e-3);
        assert!((a.iter().sum::<f64>() - 2.0 * PI).abs() < 1e-9);
        let report = is_regular(&net, 1e-2).unwrap();
        assert!(!report.regular);
        assert!(report.crossing.is_none());
    }

    #[test]
    fn theta_arcs_meet_at_120() {
        let net = shapes::symmetric_theta(0.5, 64);
        for m in 0..2 {
            for a in junction_angles(&net, m).unwrap() {
                assert!((a - 2.0 * PI / 3.0).abs() < 1e-3, "{a}");
            }
        }
        assert!(is_regular(&net, 1e-2).unwrap().regular);
    }

    #[test]
    fn crossing_edges_are_detected() {
        // Two arms of a triod bent so that they cross.
        let topo = GraphTopology::triod();
        let o = Vec2::ZERO;
        let line = |a: Vec2, b: Vec2, n: usize| -> Vec<Vec2> {
            (0..n).map(|k| a + (b - a) * (k as f64 / (n - 1) as f64)).collect()
        };
        let e0 = line(o, Vec2::new(1.0, 1.0), 10);
        let mut e1 = line(o, Vec2::new(1.0, 0.0), 5);
        e1.extend(line(Vec2::new(1.0, 0.0), Vec2::new(0.2, 1.0), 6).into_iter().skip(1));
        let e2 = line(o, Vec2::new(-1.0, -0.2), 10);
        let net = DiscreteNetwork::new(topo, vec![e0, e1, e2]).unwrap();
        let report = is_regular(&net, 10.0).unwrap();
        assert!(!report.regular);
        assert!(report.crossing.is_some());
    }

    #[test]
    fn resample_fixed_point_on_uniform_segment() {
        let net = shapes::segment(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.5), 17);
        let out = resample_arclength(&net, &[17]).unwrap();
        assert!(out.c0_distance(&net).unwrap() < 1e-14);
    }

    #[test]
    fn resample_clustered_segment() {
        let n = 12;
        let mut pts: Vec<Vec2> = (0..n)
            .map(|k| Vec2::new((1.6_f64.powi(k) - 1.0) / (1.6_f64.powi(n - 1) - 1.0), 0.0))
            .collect();
        pts[n as usize - 1] = Vec2::new(1.0, 0.0);
        let net = DiscreteNetwork::new(GraphTopology::segment(), vec![pts]).unwrap();
        let out = resample_arclength(&net, &[11]).unwrap();
        for (k, p) in out.edge(0).iter().enumerate() {
            assert!((p.x - 0.1 * k as f64).abs() < 1e-10);
            assert_eq!(p.y, 0.0);
        }
    }

    #[test]
    fn resample_circle_keeps_length() {
        let net = shapes::circle(1.0, 64);
        let out = resample_arclength(&net, &[128]).unwrap();
        // Oracle: chord sum of an exactly uniform inscribed 127-gon.
        let oracle = 127.0 * 2.0 * (PI / 127.0).sin();
        let len = polyline_length(out.edge(0));
        assert!((len - oracle).abs() < 1e-6, "{len} vs {oracle}");
        assert_eq!(out.edge(0)[0], out.edge(0)[127]);
    }

    #[test]
    fn resample_keeps_junctions() {
        let net = shapes::symmetric_theta(0.5, 40);
        let out = resample_arclength(&net, &[50, 30, 50]).unwrap();
        for m in 0..2 {
            assert_eq!(out.junction_points(m), net.junction_points(m));
        }
        DiscreteNetwork::new(out.topology().clone(), out.edges().to_vec()).unwrap();
    }

    #[test]
    fn norms_of_simple_fields() {
        let net = shapes::segment(Vec2::ZERO, Vec2::new(1.0, 0.0), 11);
        let one = discrete_norms(&[vec![1.0; 11]], &net).unwrap();
        assert!((one.l2 - 1.0).abs() < 1e-14 && (one.h2 - 1.0).abs() < 1e-14);
        let zero = discrete_norms(&[vec![0.0; 11]], &net).unwrap();
        assert_eq!(zero, FieldNorms::default());
        let n = 1001;
        let net = shapes::segment(Vec2::ZERO, Vec2::new(1.0, 0.0), n);
        let f: Vec<f64> = (0..n).map(|k| (2.0 * PI * k as f64 / (n - 1) as f64).sin()).collect();
        let s = discrete_norms(&[f], &net).unwrap();
        assert!((s.l2 - 0.5_f64.sqrt()).abs() < 1e-5);
        assert!(matches!(discrete_norms(&[vec![1.0; 3]], &net), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let params: Vec<f64> = vec![0.0, 0.1, 0.35, 0.4, 0.7, 0.75, 1.0];
        let f = |u: f64| Vec2::new(u * u * u - u, 2.0 * u * u + 1.0);
        let curve = HermiteCurve::new(params.clone(), params.iter().map(|&u| f(u)).collect());
        for j in 0..=50 {
            let u = j as f64 / 50.0;
            assert!((curve.eval(u) - f(u)).norm() < 1e-12);
        }
    }
}
