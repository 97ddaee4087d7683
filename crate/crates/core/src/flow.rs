//! Time integration of `∂ₜγ = ∂ₓ²γ / |∂ₓγ|²` with triple junctions and
//! pinned endpoints, plus singularity detection.
//!
//! A step freezes the coefficients `1/|∂ₓγ|²` at the old time and solves one
//! tridiagonal system per edge. Junction positions are shared unknowns; the
//! 120° condition is closed by Newton iteration on the sum of the three inner
//! unit tangents, computed with the same one-sided stencil as
//! [`geometry::inner_tangent`](crate::geometry::inner_tangent).

use crate::energy::{gaussian_energy, total_length};
use crate::error::{Error, Result};
use crate::geometry::{
    frames, is_regular, resample_arclength, trapezoid_weights, worst_angle_deviation,
    DiscreteNetwork, FLOW_ANGLE_TOL,
};
use crate::linalg::{solve_cyclic, Tridiagonal};
use crate::topology::Attachment;
use crate::vec2::Vec2;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Newton tolerance on `|Σ inner unit tangents|∞`.
pub const JUNCTION_TOL: f64 = 1e-10;
pub const JUNCTION_MAX_ITER: usize = 50;

/// Network at time `t` together with the diagnostics of the step that
/// produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub net: DiscreteNetwork,
    pub t: f64,
    pub last_dt: f64,
    pub newton_iterations: usize,
}

impl FlowState {
    /// Starts a flow at time 0. Networks with junctions must be regular
    /// within [`FLOW_ANGLE_TOL`] and free of crossings.
    pub fn new(net: DiscreteNetwork) -> Result<Self> {
        Self::at_time(net, 0.0)
    }

    pub fn at_time(net: DiscreteNetwork, t: f64) -> Result<Self> {
        let report = is_regular(&net, FLOW_ANGLE_TOL)?;
        if !report.regular {
            return Err(Error::InvalidNetwork(format!(
                "initial network is not regular: worst angle {:?}, crossing {:?}",
                report.worst_angle, report.crossing
            )));
        }
        Ok(Self {
            net,
            t,
            last_dt: 0.0,
            newton_iterations: 0,
        })
    }
}

/// `Σᵢ ∫ |kⁱ|² ds`.
pub fn curvature_l2(net: &DiscreteNetwork) -> Result<f64> {
    let fr = frames(net)?;
    Ok(net
        .edges()
        .iter()
        .zip(&fr)
        .map(|(pts, f)| {
            let w = trapezoid_weights(pts.len());
            (0..pts.len())
                .map(|k| w[k] * f.speed[k] * f.curvature[k].norm_sq())
                .sum::<f64>()
        })
        .sum())
}

/// Interior samples of an open edge as `base + p·start + q·end`.
struct EdgeSolution {
    base: Vec<Vec2>,
    p: Vec<f64>,
    q: Vec<f64>,
}

impl EdgeSolution {
    fn interior(&self, b0: Vec2, b1: Vec2) -> impl Iterator<Item = Vec2> + '_ {
        (0..self.base.len()).map(move |k| self.base[k] + b0 * self.p[k] + b1 * self.q[k])
    }

    /// Affine form of the raw inner tangent at `end`:
    /// `w = c_self·B_end + c_other·B_other + offset`.
    fn tangent_form(&self, end: u8) -> (f64, f64, Vec2) {
        let m = self.base.len();
        if end == 0 {
            (
                -3.0 + 4.0 * self.p[0] - self.p[1],
                4.0 * self.q[0] - self.q[1],
                self.base[0] * 4.0 - self.base[1],
            )
        } else {
            (
                -3.0 + 4.0 * self.q[m - 1] - self.q[m - 2],
                4.0 * self.p[m - 1] - self.p[m - 2],
                self.base[m - 1] * 4.0 - self.base[m - 2],
            )
        }
    }
}

/// `dt·4/|p_{k+1} − p_{k−1}|²`, the frozen coefficient at interior sample `k`.
fn coefficient(prev: Vec2, next: Vec2, dt: f64, edge: usize, k: usize) -> Result<f64> {
    let d = (next - prev).norm_sq();
    if !d.is_normal() {
        return Err(Error::DegenerateEdge { edge, sample: k });
    }
    Ok(4.0 * dt / d)
}

fn solve_open_edge(pts: &[Vec2], dt: f64, edge: usize) -> Result<EdgeSolution> {
    let n = pts.len();
    let m = n - 2;
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    let mut rhs = pts[1..n - 1].to_vec();
    let mut rp = vec![0.0; m];
    let mut rq = vec![0.0; m];
    for j in 0..m {
        let k = j + 1;
        let a = coefficient(pts[k - 1], pts[k + 1], dt, edge, k)?;
        diag[j] = 1.0 + 2.0 * a;
        if j > 0 {
            lower[j] = -a;
        } else {
            rp[0] = a;
        }
        if j + 1 < m {
            upper[j] = -a;
        } else {
            rq[m - 1] = a;
        }
    }
    let fac = Tridiagonal::factor(&lower, &diag, &upper);
    rhs = fac.solve(&rhs);
    Ok(EdgeSolution {
        base: rhs,
        p: fac.solve(&rp),
        q: fac.solve(&rq),
    })
}

fn step_loop(pts: &[Vec2], dt: f64) -> Result<Vec<Vec2>> {
    let m = pts.len() - 1;
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    for k in 0..m {
        let prev = pts[(k + m - 1) % m];
        let next = pts[(k + 1) % m];
        let a = coefficient(prev, next, dt, 0, k)?;
        lower[k] = -a;
        upper[k] = -a;
        diag[k] = 1.0 + 2.0 * a;
    }
    let mut out = solve_cyclic(&lower, &diag, &upper, &pts[..m]);
    out.push(out[0]);
    Ok(out)
}

/// One semi-implicit step of size `dt`.
pub fn step(state: &FlowState, dt: f64) -> Result<FlowState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::DomainError(format!("time step must be positive, got {dt}")));
    }
    let net = &state.net;
    let topo = net.topology();
    if net.is_closed() {
        let edge = step_loop(net.edge(0), dt)?;
        return Ok(FlowState {
            net: DiscreteNetwork::from_parts(topo.clone(), vec![edge]),
            t: state.t + dt,
            last_dt: dt,
            newton_iterations: 0,
        });
    }
    let sols: Vec<EdgeSolution> = net
        .edges()
        .iter()
        .enumerate()
        .map(|(i, pts)| solve_open_edge(pts, dt, i))
        .collect::<Result<_>>()?;
    let n_junctions = topo.n_junctions();
    let mut junction: Vec<Vec2> = (0..n_junctions).map(|m| net.junction_points(m)[0]).collect();
    let boundary = |j: &[Vec2], e: usize, end: u8| match topo.attachment(e, end) {
        Attachment::Junction(m) => j[m],
        _ => net.end_point(e, end),
    };

    // Residual and Jacobian of F_m(J) = Σ_{(e,end) ∈ m} w/|w|.
    let residual = |j: &[Vec2], with_jacobian: bool| -> Result<(Vec<Vec2>, Option<DMatrix<f64>>)> {
        let mut f = vec![Vec2::ZERO; n_junctions];
        let mut jac = with_jacobian.then(|| DMatrix::zeros(2 * n_junctions, 2 * n_junctions));
        for (m, rec) in topo.junctions().iter().enumerate() {
            for &(e, end) in rec {
                let (c_self, c_other, offset) = sols[e].tangent_form(end);
                let other = 1 - end;
                let w = boundary(j, e, end) * c_self + boundary(j, e, other) * c_other + offset;
                let len = w.norm();
                if !len.is_normal() {
                    let sample = if end == 0 { 0 } else { net.edge(e).len() - 1 };
                    return Err(Error::DegenerateEdge { edge: e, sample });
                }
                let u = w / len;
                f[m] += u;
                if let Some(jac) = jac.as_mut() {
                    let proj = [
                        [(1.0 - u.x * u.x) / len, -u.x * u.y / len],
                        [-u.y * u.x / len, (1.0 - u.y * u.y) / len],
                    ];
                    let mut add = |col: usize, c: f64| {
                        for r in 0..2 {
                            for s in 0..2 {
                                jac[(2 * m + r, 2 * col + s)] += c * proj[r][s];
                            }
                        }
                    };
                    add(m, c_self);
                    if let Attachment::Junction(m2) = topo.attachment(e, other) {
                        add(m2, c_other);
                    }
                }
            }
        }
        Ok((f, jac))
    };
    let sup = |f: &[Vec2]| f.iter().map(|v| v.max_abs()).fold(0.0, f64::max);
    let l2 = |f: &[Vec2]| f.iter().map(|v| v.norm_sq()).sum::<f64>();

    let mut iterations = 0;
    let (mut f, _) = residual(&junction, false)?;
    while sup(&f) > JUNCTION_TOL {
        if iterations == JUNCTION_MAX_ITER {
            return Err(Error::NewtonDivergence {
                iterations,
                residual: sup(&f),
            });
        }
        iterations += 1;
        let (_, jac) = residual(&junction, true)?;
        let rhs = DVector::from_iterator(2 * n_junctions, f.iter().flat_map(|v| [-v.x, -v.y]));
        let delta = jac
            .expect("jacobian requested")
            .lu()
            .solve(&rhs)
            .ok_or(Error::NewtonDivergence {
                iterations,
                residual: sup(&f),
            })?;
        let mut lambda = 1.0;
        let base = l2(&f);
        loop {
            let trial: Vec<Vec2> = junction
                .iter()
                .enumerate()
                .map(|(m, &p)| p + Vec2::new(delta[2 * m], delta[2 * m + 1]) * lambda)
                .collect();
            if let Ok((ft, _)) = residual(&trial, false) {
                if l2(&ft) < base || lambda < 1e-3 {
                    junction = trial;
                    f = ft;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-3 {
                return Err(Error::NewtonDivergence {
                    iterations,
                    residual: sup(&f),
                });
            }
        }
    }

    let edges = net
        .edges()
        .iter()
        .enumerate()
        .map(|(e, old)| {
            let b0 = boundary(&junction, e, 0);
            let b1 = boundary(&junction, e, 1);
            let mut pts = Vec::with_capacity(old.len());
            pts.push(b0);
            pts.extend(sols[e].interior(b0, b1));
            pts.push(b1);
            pts
        })
        .collect();
    Ok(FlowState {
        net: DiscreteNetwork::from_parts(topo.clone(), edges),
        t: state.t + dt,
        last_dt: dt,
        newton_iterations: iterations,
    })
}

/// Thresholds for declaring a singularity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SingularityThresholds {
    /// Edge collapse when a length drops below this fraction of the initial
    /// minimum edge length.
    pub edge_collapse_rel: f64,
    /// Curvature blowup when `∫|k|² ds` exceeds this.
    pub curvature_max: f64,
}

impl Default for SingularityThresholds {
    fn default() -> Self {
        Self {
            edge_collapse_rel: 1e-3,
            curvature_max: 1e6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowControls {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Accuracy cap `dt ≤ cfl · (min sample spacing)²`.
    pub cfl: f64,
    pub angle_tol: f64,
    /// Arclength resampling period in accepted steps; 0 disables it.
    pub resample_every: usize,
    /// Store every `snapshot_stride`-th accepted step (and the last one).
    pub snapshot_stride: usize,
    /// Times that are hit exactly and always stored.
    pub output_times: Vec<f64>,
    pub max_steps: usize,
    pub thresholds: SingularityThresholds,
}

impl Default for FlowControls {
    fn default() -> Self {
        Self {
            dt_init: 1e-5,
            dt_min: 1e-16,
            dt_max: 1e-2,
            cfl: 0.5,
            angle_tol: FLOW_ANGLE_TOL,
            resample_every: 0,
            snapshot_stride: 10,
            output_times: Vec::new(),
            max_steps: 5_000_000,
            thresholds: SingularityThresholds::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SingularityCause {
    EdgeCollapse { edge: usize, length: f64 },
    CurvatureBlowup { curvature_l2: f64 },
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularityReport {
    pub detected: bool,
    /// Extrapolated singular time, or the final time when nothing was detected.
    pub t_est: f64,
    /// Spread between extrapolations over two fitting windows.
    pub t_uncertainty: f64,
    pub cause: SingularityCause,
    /// Last values of `∫|k|² ds`.
    pub curvature_tail: Vec<f64>,
}

/// One row of the trajectory CSV.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub t: f64,
    pub energy: f64,
    pub length: f64,
    pub curvature_l2: f64,
    pub min_edge_length: f64,
    /// Largest junction-angle deviation from 2π/3; 0 without junctions.
    pub worst_angle: f64,
}

pub const CSV_HEADER: &str = "t,energy,length,curvature_l2,min_edge_length,worst_angle";

fn diagnostics(net: &DiscreteNetwork, t: f64) -> Result<DiagnosticRow> {
    Ok(DiagnosticRow {
        t,
        energy: gaussian_energy(net)?,
        length: total_length(net),
        curvature_l2: curvature_l2(net)?,
        min_edge_length: net.edge_lengths().into_iter().fold(f64::INFINITY, f64::min),
        worst_angle: worst_angle_deviation(net)?.map_or(0.0, |(_, a)| a),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub net: DiscreteNetwork,
}

/// Stored snapshots (increasing `t`) and per-step diagnostics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub rows: Vec<DiagnosticRow>,
}

impl Trajectory {
    pub fn t_range(&self) -> Option<(f64, f64)> {
        Some((self.snapshots.first()?.t, self.snapshots.last()?.t))
    }

    /// Index of the snapshot stored at exactly `t`, if any.
    pub fn snapshot_at(&self, t: f64) -> Option<usize> {
        self.snapshots.iter().position(|s| s.t == t)
    }

    /// Network at time `t`: a stored snapshot when one matches exactly,
    /// otherwise pointwise linear interpolation between its neighbours.
    pub fn state_at(&self, t: f64) -> Result<DiscreteNetwork> {
        let (t0, t1) = self.t_range().ok_or(Error::TimeOutOfRange(t))?;
        if !(t >= t0 && t <= t1) {
            return Err(Error::TimeOutOfRange(t));
        }
        let hi = self.snapshots.partition_point(|s| s.t < t);
        let b = &self.snapshots[hi];
        if b.t == t {
            return Ok(b.net.clone());
        }
        let a = &self.snapshots[hi - 1];
        if a.net.sample_counts() != b.net.sample_counts() {
            return Err(Error::GridMismatch(format!(
                "snapshots at t={} and t={} have different sample counts",
                a.t, b.t
            )));
        }
        let s = (t - a.t) / (b.t - a.t);
        let edges = a
            .net
            .edges()
            .iter()
            .zip(b.net.edges())
            .map(|(pa, pb)| pa.iter().zip(pb).map(|(&p, &q)| p + (q - p) * s).collect())
            .collect();
        Ok(DiscreteNetwork::from_parts(a.net.topology().clone(), edges))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.t, r.energy, r.length, r.curvature_l2, r.min_edge_length, r.worst_angle
            )?;
        }
        Ok(())
    }
}

/// Output of [`evolve`].
#[derive(Clone, Debug)]
pub struct Evolution {
    pub trajectory: Trajectory,
    pub report: SingularityReport,
    pub final_state: FlowState,
}

/// Least-squares line `y = α + β t`; returns the zero `−α/β`.
fn extrapolate_zero(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let beta = sty / stt;
    if !(beta < 0.0) {
        return None;
    }
    Some(mt - my / beta)
}

/// Fits `q(t)² ≈ c·(T − t)` on the tail where `q` is at most `factor` times
/// its last value, for two windows; returns `(T, spread)`.
fn fit_singular_time(history: &[(f64, f64)]) -> Option<(f64, f64)> {
    let last = history.last()?.1;
    let window = |factor: f64| -> Vec<(f64, f64)> {
        let start = history
            .iter()
            .rposition(|&(_, q)| q > factor * last)
            .map_or(0, |i| i + 1);
        let start = start.min(history.len().saturating_sub(5));
        history[start..].iter().map(|&(t, q)| (t, q * q)).collect()
    };
    let near = extrapolate_zero(&window(4.0))?;
    let far = extrapolate_zero(&window(16.0)).unwrap_or(near);
    Some((near, (near - far).abs()))
}

fn curvature_scale(k: f64) -> f64 {
    1.0 / k.sqrt()
}

/// Adaptive integration up to `t_end` or the first singularity.
///
/// A step is retried with half the time step after a failed junction solve,
/// a degenerate stencil or an angle deviation above `angle_tol`. Failure at
/// `dt_min` ends the run with a singularity candidate, except on the very
/// first step where the error is returned.
pub fn evolve(initial: FlowState, t_end: f64, controls: &FlowControls) -> Result<Evolution> {
    if !(controls.dt_init > 0.0 && controls.dt_min > 0.0 && controls.cfl > 0.0) {
        return Err(Error::Config("time step controls must be positive".into()));
    }
    let stride = controls.snapshot_stride.max(1);
    let mut outputs: Vec<f64> = controls
        .output_times
        .iter()
        .copied()
        .filter(|&t| t > initial.t && t <= t_end)
        .collect();
    outputs.sort_by(f64::total_cmp);
    outputs.dedup();
    let mut next_output = 0;

    let initial_lengths = initial.net.edge_lengths();
    let eps_len = controls.thresholds.edge_collapse_rel
        * initial_lengths.iter().copied().fold(f64::INFINITY, f64::min);
    let counts = initial.net.sample_counts();

    let mut traj = Trajectory::default();
    traj.rows.push(diagnostics(&initial.net, initial.t)?);
    traj.snapshots.push(Snapshot {
        t: initial.t,
        net: initial.net.clone(),
    });
    let mut length_history: Vec<(f64, Vec<f64>)> = vec![(initial.t, initial_lengths)];

    let mut state = initial;
    let mut dt = controls.dt_init;
    let mut steps = 0usize;
    let mut cause = SingularityCause::None;
    let mut detected = false;

    while state.t < t_end && steps < controls.max_steps {
        let mut cap = controls.dt_max.min(controls.cfl * state.net.min_spacing().powi(2));
        let mut target = None;
        if let Some(&to) = outputs.get(next_output) {
            if state.t + cap.min(dt) >= to {
                cap = to - state.t;
                target = Some(to);
            }
        }
        if target.is_none() && state.t + cap.min(dt) >= t_end {
            cap = t_end - state.t;
            target = Some(t_end);
        }
        let dt_try = dt.min(cap);
        let attempt = step(&state, dt_try).and_then(|s| {
            let worst = worst_angle_deviation(&s.net)?.map_or(0.0, |(_, a)| a);
            if worst > controls.angle_tol {
                Err(Error::DomainError(format!("angle deviation {worst}")))
            } else {
                Ok(s)
            }
        });
        let mut next = match attempt {
            Ok(s) => s,
            Err(err @ (Error::NewtonDivergence { .. } | Error::DegenerateEdge { .. } | Error::DomainError(_))) => {
                dt = dt_try * 0.5;
                if dt < controls.dt_min {
                    if steps == 0 {
                        return Err(err);
                    }
                    detected = true;
                    break;
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        if let Some(to) = target {
            if dt_try == cap {
                next.t = to;
                if outputs.get(next_output) == Some(&to) {
                    next_output += 1;
                }
            }
        }
        steps += 1;
        if controls.resample_every > 0 && steps.is_multiple_of(controls.resample_every) {
            next.net = resample_arclength(&next.net, &counts)?;
        }
        state = next;
        let row = diagnostics(&state.net, state.t)?;
        traj.rows.push(row);
        let lengths = state.net.edge_lengths();
        let collapsed = lengths
            .iter()
            .enumerate()
            .filter(|(_, &l)| l < eps_len)
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(e, &l)| (e, l));
        length_history.push((state.t, lengths));
        let hit_output = target.is_some() && traj.rows.last().map(|r| r.t) == target;
        if let Some((edge, length)) = collapsed {
            cause = SingularityCause::EdgeCollapse { edge, length };
            detected = true;
        } else if row.curvature_l2 > controls.thresholds.curvature_max {
            cause = SingularityCause::CurvatureBlowup {
                curvature_l2: row.curvature_l2,
            };
            detected = true;
        }
        if detected || steps.is_multiple_of(stride) || hit_output || state.t >= t_end {
            traj.snapshots.push(Snapshot {
                t: state.t,
                net: state.net.clone(),
            });
        }
        if detected {
            break;
        }
        dt = (dt_try * 1.5).max(dt);
    }
    if traj.snapshots.last().map(|s| s.t) != Some(state.t) {
        traj.snapshots.push(Snapshot {
            t: state.t,
            net: state.net.clone(),
        });
    }

    if detected && cause == SingularityCause::None {
        // Stopped at dt_min: attribute to whichever threshold is closer.
        let last = traj.rows.last().expect("rows are never empty");
        let (edge, length) = length_history
            .last()
            .expect("history is never empty")
            .1
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("networks have edges");
        let len_ratio = (length / eps_len).ln();
        let curv_ratio = (controls.thresholds.curvature_max / last.curvature_l2).ln();
        cause = if len_ratio <= curv_ratio {
            SingularityCause::EdgeCollapse { edge, length }
        } else {
            SingularityCause::CurvatureBlowup {
                curvature_l2: last.curvature_l2,
            }
        };
    }

    let fit = match cause {
        SingularityCause::EdgeCollapse { edge, .. } => {
            let h: Vec<(f64, f64)> = length_history.iter().map(|(t, l)| (*t, l[edge])).collect();
            fit_singular_time(&h)
        }
        SingularityCause::CurvatureBlowup { .. } => {
            let h: Vec<(f64, f64)> = traj
                .rows
                .iter()
                .map(|r| (r.t, curvature_scale(r.curvature_l2)))
                .collect();
            fit_singular_time(&h)
        }
        SingularityCause::None => None,
    };
    let (t_est, t_uncertainty) = match fit {
        Some((t, u)) if t >= state.t => (t, u),
        Some((_, u)) => (state.t, u),
        None => (state.t, 0.0),
    };
    let tail_start = traj.rows.len().saturating_sub(20);
    let report = SingularityReport {
        detected,
        t_est,
        t_uncertainty,
        cause,
        curvature_tail: traj.rows[tail_start..].iter().map(|r| r.curvature_l2).collect(),
    };
    Ok(Evolution {
        trajectory: traj,
        report,
        final_state: state,
    })
}
