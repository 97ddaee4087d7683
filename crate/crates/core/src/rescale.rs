//! Huisken and parabolic rescalings of a flow, and the blowup uniqueness
//! experiment built on top of them.
//!
//! Rescaled states are obtained by transforming a stored trajectory:
//! `Γ̃(τ) = (Γ(t) − x₀)/√(2(T − t))` with `τ = −½ log(T − t)`, and
//! `Γ^μ_t = μ(Γ_{μ⁻²t + T} − x₀)`.

use crate::energy::{energy_report, gaussian_energy};
use crate::error::{Error, Result};
use crate::flow::{evolve, FlowControls, FlowState, SingularityThresholds, Trajectory};
use crate::geometry::{field_norms_on, frames, DiscreteNetwork};
use crate::graphrep::{GraphChart, DEFAULT_TUBE_FACTOR};
use crate::vec2::Vec2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest τ-gap between the snapshots bracketing a requested τ.
pub const MAX_TAU_GAP: f64 = 0.05;

/// A network in Huisken's rescaled coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaledState {
    pub net: DiscreteNetwork,
    pub tau: f64,
    pub center: Vec2,
    #[serde(rename = "T")]
    pub big_t: f64,
}

pub fn tau_of(t: f64, big_t: f64) -> f64 {
    -0.5 * (big_t - t).ln()
}

pub fn t_of(tau: f64, big_t: f64) -> f64 {
    big_t - (-2.0 * tau).exp()
}

fn rescale_net(net: &DiscreteNetwork, t: f64, x0: Vec2, big_t: f64) -> Result<RescaledState> {
    if !(t < big_t) {
        return Err(Error::TimeBeyondT { t, big_t });
    }
    let s = 1.0 / (2.0 * (big_t - t)).sqrt();
    Ok(RescaledState {
        net: net.map_points(|p| (p - x0) * s),
        tau: tau_of(t, big_t),
        center: x0,
        big_t,
    })
}

/// Huisken rescaling of a single state about `(x0, T)`.
pub fn to_rescaled(state: &FlowState, x0: Vec2, big_t: f64) -> Result<RescaledState> {
    rescale_net(&state.net, state.t, x0, big_t)
}

/// `Γ^μ` evaluated from an original state at time `s`: the returned state
/// carries the new time `μ²(s − T)`, which must lie in `[−μ²T, 0)`.
pub fn parabolic_rescale(state: &FlowState, mu: f64, x0: Vec2, big_t: f64) -> Result<FlowState> {
    if !(mu > 0.0) {
        return Err(Error::DomainError(format!("μ must be positive, got {mu}")));
    }
    let t_new = mu * mu * (state.t - big_t);
    if !(t_new < 0.0 && state.t >= 0.0) {
        return Err(Error::TimeOutOfRange(t_new));
    }
    Ok(FlowState {
        net: state.net.map_points(|p| (p - x0) * mu),
        t: t_new,
        last_dt: state.last_dt * mu * mu,
        newton_iterations: state.newton_iterations,
    })
}

/// `Γ^μ_t` read off a trajectory, which must cover the original time
/// `μ⁻²t + T`.
pub fn parabolic_rescale_at(traj: &Trajectory, t: f64, mu: f64, x0: Vec2, big_t: f64) -> Result<FlowState> {
    let s = t / (mu * mu) + big_t;
    let net = traj.state_at(s).map_err(|_| Error::TimeOutOfRange(t))?;
    parabolic_rescale(
        &FlowState {
            net,
            t: s,
            last_dt: 0.0,
            newton_iterations: 0,
        },
        mu,
        x0,
        big_t,
    )
}

/// Rescaled states at each `τ`, interpolating the trajectory linearly in `t`.
pub fn rescaled_trajectory(traj: &Trajectory, x0: Vec2, big_t: f64, taus: &[f64]) -> Result<Vec<RescaledState>> {
    taus.iter()
        .map(|&tau| {
            let t = t_of(tau, big_t);
            let snaps = &traj.snapshots;
            let hi = snaps.partition_point(|s| s.t < t);
            if hi == snaps.len() {
                return Err(Error::SparseTrajectory(tau));
            }
            if snaps[hi].t != t {
                if hi == 0 || snaps[hi].t >= big_t {
                    return Err(Error::SparseTrajectory(tau));
                }
                let gap = tau_of(snaps[hi].t, big_t) - tau_of(snaps[hi - 1].t, big_t);
                if !(gap <= MAX_TAU_GAP) {
                    return Err(Error::SparseTrajectory(tau));
                }
            }
            let net = traj.state_at(t)?;
            let mut r = rescale_net(&net, t, x0, big_t)?;
            r.tau = tau;
            Ok(r)
        })
        .collect()
}

/// Sample of largest curvature magnitude.
pub fn max_curvature_point(net: &DiscreteNetwork) -> Result<Vec2> {
    let fr = frames(net)?;
    let mut best = (f64::NEG_INFINITY, Vec2::ZERO);
    for (pts, f) in net.edges().iter().zip(&fr) {
        for (p, k) in pts.iter().zip(&f.curvature) {
            let v = k.norm();
            if v > best.0 {
                best = (v, *p);
            }
        }
    }
    Ok(best.1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlowupConfig {
    /// Blowup center; defaults to the point of largest curvature at the
    /// last stored snapshot.
    pub x0: Option<Vec2>,
    /// Singular time; defaults to the flow's extrapolated estimate.
    #[serde(rename = "T")]
    pub big_t: Option<f64>,
    /// First sequence `τ_n = tau_start + n·tau_step`, `n < count`; the
    /// start defaults to one unit after the τ of the initial time.
    pub tau_start: Option<f64>,
    pub tau_step: f64,
    pub count: usize,
    /// The second sequence is shifted by this offset.
    pub tau_offset: f64,
    /// Number of final states per sequence compared against each other.
    pub tail: usize,
    /// Threshold on the C⁰ tail discrepancy and on the limit residual.
    pub tolerance: f64,
    pub tube_factor: f64,
    pub t_end: f64,
    pub flow: FlowControls,
    /// Repeat the analysis with `T ± uncertainty`.
    pub sensitivity: bool,
}

impl Default for BlowupConfig {
    fn default() -> Self {
        Self {
            x0: None,
            big_t: None,
            tau_start: None,
            tau_step: 0.25,
            count: 11,
            tau_offset: 0.125,
            tail: 3,
            tolerance: 1e-3,
            tube_factor: DEFAULT_TUBE_FACTOR,
            t_end: 1e3,
            flow: FlowControls {
                snapshot_stride: 5,
                thresholds: SingularityThresholds {
                    edge_collapse_rel: 1e-6,
                    ..SingularityThresholds::default()
                },
                ..FlowControls::default()
            },
            sensitivity: true,
        }
    }
}

impl BlowupConfig {
    /// The two τ-sequences for a flow starting at `t0` with singular time `T`.
    pub fn sequences(&self, t0: f64, big_t: f64) -> (Vec<f64>, Vec<f64>) {
        let start = self.tau_start.unwrap_or_else(|| tau_of(t0, big_t) + 1.0);
        let a: Vec<f64> = (0..self.count)
            .map(|n| start + n as f64 * self.tau_step)
            .collect();
        let b = a.iter().map(|t| t + self.tau_offset).collect();
        (a, b)
    }
}

pub const VERDICT_UNIQUE: &str = "consistent with unique blowup";
pub const VERDICT_DIFFERENT: &str = "tails disagree";
pub const VERDICT_INCONCLUSIVE: &str = "inconclusive";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub sequence: u8,
    pub tau: f64,
    pub energy: f64,
    pub gradient_norm: f64,
}

/// Outcome of the analysis for one value of `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailAnalysis {
    #[serde(rename = "T")]
    pub big_t: f64,
    pub tail_discrepancy_c0: Option<f64>,
    pub tail_discrepancy_h2: Option<f64>,
    /// Largest `|γ⊥ + k|` at the last state of each sequence.
    pub final_residuals: [f64; 2],
    pub verdict: String,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    #[serde(rename = "T_est")]
    pub t_est: f64,
    #[serde(rename = "T_uncertainty")]
    pub t_uncertainty: f64,
    pub x0: Vec2,
    #[serde(rename = "tail_discrepancy_C0")]
    pub tail_discrepancy_c0: Option<f64>,
    #[serde(rename = "tail_discrepancy_H2")]
    pub tail_discrepancy_h2: Option<f64>,
    pub final_residuals: [f64; 2],
    pub verdict: String,
    pub failure: Option<String>,
    pub tau_sequences: [Vec<f64>; 2],
    pub energy_trace: Vec<EnergySample>,
    pub sensitivity: Vec<TailAnalysis>,
}

fn initial_t(traj: &Trajectory) -> f64 {
    traj.t_range().map_or(0.0, |r| r.0)
}

fn analyse_tails(
    traj: &Trajectory,
    x0: Vec2,
    big_t: f64,
    cfg: &BlowupConfig,
) -> Result<(TailAnalysis, Vec<EnergySample>)> {
    let (ta, tb) = cfg.sequences(initial_t(traj), big_t);
    let (sa, sb) = rayon::join(
        || rescaled_trajectory(traj, x0, big_t, &ta),
        || rescaled_trajectory(traj, x0, big_t, &tb),
    );
    let (sa, sb) = (sa?, sb?);
    let mut trace = Vec::with_capacity(sa.len() + sb.len());
    for (seq, states) in [(1u8, &sa), (2u8, &sb)] {
        for s in states.iter() {
            let r = energy_report(&s.net)?;
            trace.push(EnergySample {
                sequence: seq,
                tau: s.tau,
                energy: r.energy,
                gradient_norm: r.gradient_norm,
            });
        }
    }
    trace.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    let residual = |v: &[RescaledState]| -> Result<f64> {
        match v.last() {
            Some(s) => Ok(energy_report(&s.net)?.max_residual),
            None => Ok(f64::NAN),
        }
    };
    let final_residuals = [residual(&sa)?, residual(&sb)?];
    let mut analysis = TailAnalysis {
        big_t,
        tail_discrepancy_c0: None,
        tail_discrepancy_h2: None,
        final_residuals,
        verdict: VERDICT_INCONCLUSIVE.into(),
        failure: None,
    };
    let Some(reference) = sa.last() else {
        analysis.failure = Some("empty τ sequences".into());
        return Ok((analysis, trace));
    };
    let chart = match GraphChart::new(&reference.net) {
        Ok(c) => c.with_tube_factor(cfg.tube_factor),
        Err(e) => {
            analysis.failure = Some(format!("reference chart: {e}"));
            return Ok((analysis, trace));
        }
    };
    let tail = cfg.tail.clamp(1, sa.len());
    let pairs: Vec<(&RescaledState, &RescaledState)> =
        sa[sa.len() - tail..].iter().zip(&sb[sb.len() - tail..]).collect();
    let reps: Vec<Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)>> = pairs
        .par_iter()
        .map(|(a, b)| Ok((chart.represent(&a.net)?.normal, chart.represent(&b.net)?.normal)))
        .collect();
    let counts = chart.reference().sample_counts();
    let closed = chart.reference().is_closed();
    let (mut c0, mut h2) = (0.0f64, 0.0f64);
    for (rep, (a, _)) in reps.into_iter().zip(&pairs) {
        let (na, nb) = match rep {
            Ok(v) => v,
            Err(e) => {
                analysis.failure = Some(format!("representation near τ = {}: {e}", a.tau));
                return Ok((analysis, trace));
            }
        };
        let diff: Vec<Vec<f64>> = na
            .iter()
            .zip(&nb)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect())
            .collect();
        let norms = field_norms_on(&diff, &counts, closed)?;
        c0 = c0.max(norms.c0);
        h2 = h2.max(norms.h2);
    }
    analysis.tail_discrepancy_c0 = Some(c0);
    analysis.tail_discrepancy_h2 = Some(h2);
    let converged = final_residuals.iter().all(|&r| r < cfg.tolerance);
    analysis.verdict = if c0 < cfg.tolerance && converged {
        VERDICT_UNIQUE
    } else if c0 >= cfg.tolerance {
        VERDICT_DIFFERENT
    } else {
        analysis.failure = Some("rescaled states have not settled on a shrinker".into());
        VERDICT_INCONCLUSIVE
    }
    .into();
    Ok((analysis, trace))
}

/// Flows `initial` to its first singularity and compares the rescaled
/// states along two interleaved diverging τ-sequences.
pub fn blowup_uniqueness_experiment(initial: &DiscreteNetwork, cfg: &BlowupConfig) -> Result<UniquenessReport> {
    for w in [cfg.tau_step, cfg.tau_offset, cfg.tolerance, cfg.tube_factor] {
        if !(w > 0.0) {
            return Err(Error::Config("τ steps, offsets and tolerances must be positive".into()));
        }
    }
    let ev = evolve(FlowState::new(initial.clone())?, cfg.t_end, &cfg.flow)?;
    if !ev.report.detected {
        return Err(Error::NoSingularity);
    }
    let traj = &ev.trajectory;
    let big_t = cfg.big_t.unwrap_or(ev.report.t_est);
    let last = traj.snapshots.last().expect("trajectories are never empty");
    let x0 = match cfg.x0 {
        Some(x) => x,
        None => max_curvature_point(&last.net)?,
    };
    let (main, trace) = analyse_tails(traj, x0, big_t, cfg)?;
    let mut sensitivity = Vec::new();
    let u = ev.report.t_uncertainty;
    if cfg.sensitivity && u > 0.0 {
        for t in [big_t - u, big_t + u] {
            match analyse_tails(traj, x0, t, cfg) {
                Ok((a, _)) => sensitivity.push(a),
                Err(e) => sensitivity.push(TailAnalysis {
                    big_t: t,
                    tail_discrepancy_c0: None,
                    tail_discrepancy_h2: None,
                    final_residuals: [f64::NAN; 2],
                    verdict: VERDICT_INCONCLUSIVE.into(),
                    failure: Some(e.to_string()),
                }),
            }
        }
    }
    let (ta, tb) = cfg.sequences(initial_t(traj), big_t);
    Ok(UniquenessReport {
        t_est: big_t,
        t_uncertainty: u,
        x0,
        tail_discrepancy_c0: main.tail_discrepancy_c0,
        tail_discrepancy_h2: main.tail_discrepancy_h2,
        final_residuals: main.final_residuals,
        verdict: main.verdict,
        failure: main.failure,
        tau_sequences: [ta, tb],
        energy_trace: trace,
        sensitivity,
    })
}

/// Gaussian energies along a sequence of rescaled states.
pub fn energy_along(states: &[RescaledState]) -> Result<Vec<f64>> {
    states.iter().map(|s| gaussian_energy(&s.net)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use std::f64::consts::LN_2;

    fn circle_run(n: usize) -> crate::flow::Evolution {
        let controls = FlowControls {
            snapshot_stride: 5,
            ..FlowControls::default()
        };
        evolve(FlowState::new(shapes::circle(1.0, n)).unwrap(), 1.0, &controls).unwrap()
    }

    #[test]
    fn tau_at_quarter() {
        assert!((tau_of(0.25, 0.5) - LN_2).abs() < 1e-15);
        assert!((t_of(LN_2, 0.5) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn exact_circle_is_fixed() {
        for t in [0.0f64, 0.25, 0.45] {
            let r = (1.0 - 2.0 * t).sqrt();
            let state = FlowState::at_time(shapes::circle(r, 64), t).unwrap();
            let res = to_rescaled(&state, Vec2::ZERO, 0.5).unwrap();
            let unit = shapes::circle(1.0, 64);
            assert!(res.net.c0_distance(&unit).unwrap() < 1e-12);
        }
    }

    #[test]
    fn rescaling_rejects_late_times() {
        let state = FlowState::at_time(shapes::circle(1.0, 16), 0.6).unwrap();
        assert!(matches!(to_rescaled(&state, Vec2::ZERO, 0.5), Err(Error::TimeBeyondT { .. })));
    }

    #[test]
    fn centering_equivariance() {
        let net = shapes::perturbed_circle(1.0, 0.1, 3, 64);
        let v = Vec2::new(0.3, -1.2);
        let x0 = Vec2::new(0.1, 0.2);
        let a = to_rescaled(&FlowState::at_time(net.clone(), 0.1).unwrap(), x0, 0.4).unwrap();
        let b = to_rescaled(&FlowState::at_time(net.translated(v), 0.1).unwrap(), x0 + v, 0.4).unwrap();
        assert!(a.net.c0_distance(&b.net).unwrap() < 1e-14);
        assert_eq!(a.tau, b.tau);
    }

    #[test]
    fn parabolic_identity_on_single_state() {
        let x0 = Vec2::new(0.05, -0.02);
        let big_t = 0.5;
        for mu in [1.0, 2.0, 5.0, 10.0] {
            let s = big_t - 0.5 / (mu * mu);
            let state = FlowState::at_time(shapes::perturbed_circle(0.7, 0.05, 2, 64), s).unwrap();
            let par = parabolic_rescale(&state, mu, x0, big_t).unwrap();
            assert!((par.t + 0.5).abs() < 1e-12);
            let huisken = to_rescaled(&state, x0, big_t).unwrap();
            assert!((huisken.tau - (mu * 2f64.sqrt()).ln()).abs() < 1e-12);
            assert!(par.net.c0_distance(&huisken.net).unwrap() < 1e-12);
        }
        let state = FlowState::at_time(shapes::circle(1.0, 16), 0.2).unwrap();
        let id = parabolic_rescale(&state, 1.0, Vec2::ZERO, 0.5).unwrap();
        assert!((id.t - (0.2 - 0.5)).abs() < 1e-16);
        assert_eq!(id.net, state.net);
    }

    #[test]
    fn circle_trajectory_rescales_to_unit_circle() {
        let ev = circle_run(128);
        let big_t = ev.report.t_est;
        let taus: Vec<f64> = (0..12).map(|k| 0.4 + 0.5 * k as f64).collect();
        let states = rescaled_trajectory(&ev.trajectory, Vec2::ZERO, big_t, &taus).unwrap();
        for s in &states {
            let dev = s.net.edge(0).iter().map(|p| (p.norm() - 1.0).abs()).fold(0.0, f64::max);
            assert!(dev < 1e-3, "τ = {}: {dev}", s.tau);
        }
        assert!(rescaled_trajectory(&ev.trajectory, Vec2::ZERO, big_t, &[]).unwrap().is_empty());
        assert!(matches!(
            rescaled_trajectory(&ev.trajectory, Vec2::ZERO, big_t, &[40.0]),
            Err(Error::SparseTrajectory(_))
        ));
    }

    #[test]
    fn perturbed_circle_energy_decreases() {
        let net = shapes::perturbed_circle(1.0, 0.05, 2, 129);
        let ev = evolve(FlowState::new(net).unwrap(), 1.0, &BlowupConfig::default().flow).unwrap();
        let taus: Vec<f64> = (0..30).map(|k| 0.4 + 0.1 * k as f64).collect();
        let states = rescaled_trajectory(&ev.trajectory, Vec2::ZERO, ev.report.t_est, &taus).unwrap();
        let e = energy_along(&states).unwrap();
        for w in e.windows(2) {
            assert!(w[1] <= w[0] + 1e-6 * 0.1, "{w:?}");
        }
    }

    #[test]
    fn no_singularity_for_steiner_triod() {
        let cfg = BlowupConfig {
            t_end: 0.5,
            flow: FlowControls {
                cfl: 50.0,
                dt_max: 0.05,
                ..FlowControls::default()
            },
            ..BlowupConfig::default()
        };
        let r = blowup_uniqueness_experiment(&shapes::steiner_triod(1.0, 9), &cfg);
        assert!(matches!(r, Err(Error::NoSingularity)));
    }

    #[test]
    fn perturbed_circle_blowup_is_unique() {
        let net = shapes::perturbed_circle(1.0, 0.05, 2, 257);
        let r = blowup_uniqueness_experiment(&net, &BlowupConfig::default()).unwrap();
        assert_eq!(r.verdict, VERDICT_UNIQUE);
        assert!(r.tail_discrepancy_c0.unwrap() < 1e-3);
        assert!(r.final_residuals.iter().all(|&x| x < 1e-3));
        assert!((r.t_est - 0.5).abs() < 2e-3);
        let json = serde_json::to_value(&r).unwrap();
        for key in ["T_est", "x0", "tail_discrepancy_C0", "tail_discrepancy_H2", "verdict", "energy_trace"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn theta_blowup_is_inconclusive() {
        let mut cfg = BlowupConfig::default();
        cfg.flow.thresholds = SingularityThresholds::default();
        let r = blowup_uniqueness_experiment(&shapes::symmetric_theta(0.3, 81), &cfg).unwrap();
        assert_eq!(r.verdict, VERDICT_INCONCLUSIVE);
        assert!(r.failure.is_some());
    }
}
