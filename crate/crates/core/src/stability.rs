//! Second variation of the Gaussian energy at discrete shrinkers,
//! Łojasiewicz exponent fits and a shrinker search.
//!
//! Energies of perturbed networks are always evaluated through the graph
//! chart of [`graphrep`](crate::graphrep), so perturbations live in the
//! constrained space `V` of normal fields.

use crate::energy::{gaussian_energy, gaussian_weight, gradient_norm};
use crate::error::{Error, Result};
use crate::geometry::{frames, trapezoid_weights, DiscreteNetwork};
use crate::graphrep::{junction_constraint_residual, project_to_constraint, GraphChart};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Largest reference gradient norm accepted as a discrete shrinker.
pub const SHRINKER_TOL: f64 = 1e-3;
pub const HESSIAN_STEP: f64 = 1e-4;
/// Eigenvalues below this fraction of the largest magnitude count as zero.
pub const ZERO_MODE_REL: f64 = 1e-6;
/// Minimal `|Δ𝒢|` accepted in a Łojasiewicz sample.
pub const DELTA_ENERGY_FLOOR: f64 = 1e-14;
pub const LOJA_R2_THRESHOLD: f64 = 0.99;

/// A normal field per edge, sampled on the reference grids.
pub type Field = Vec<Vec<f64>>;

/// Orthonormal basis of the discrete space `V` at a reference network.
#[derive(Clone, Debug)]
pub struct VBasis {
    pub fields: Vec<Field>,
    /// Quadrature weights of `∫ · e^{−|γ*|²/2} ds*` per edge and sample.
    pub weights: Field,
}

impl VBasis {
    pub fn dim(&self) -> usize {
        self.fields.len()
    }

    /// Field with the given coefficients.
    pub fn combine(&self, coeffs: &[f64]) -> Field {
        let mut out: Field = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        for (f, &c) in self.fields.iter().zip(coeffs) {
            axpy(&mut out, c, f);
        }
        out
    }

    pub fn inner(&self, a: &Field, b: &Field) -> f64 {
        weighted_inner(&self.weights, a, b)
    }
}

fn axpy(y: &mut Field, a: f64, x: &Field) {
    for (ye, xe) in y.iter_mut().zip(x) {
        for (v, &u) in ye.iter_mut().zip(xe) {
            *v += a * u;
        }
    }
}

fn weighted_inner(w: &Field, a: &Field, b: &Field) -> f64 {
    w.iter()
        .zip(a.iter().zip(b))
        .map(|(we, (ae, be))| {
            we.iter()
                .zip(ae.iter().zip(be))
                .map(|(w, (x, y))| w * x * y)
                .sum::<f64>()
        })
        .sum()
}

/// Weights of the Gaussian-weighted `L²(ds)` product on `net`.
pub fn gaussian_weights(net: &DiscreteNetwork) -> Result<Field> {
    let fr = frames(net)?;
    Ok(net
        .edges()
        .iter()
        .zip(&fr)
        .map(|(pts, f)| {
            let w = trapezoid_weights(pts.len());
            (0..pts.len())
                .map(|k| w[k] * f.speed[k] * gaussian_weight(pts[k]))
                .collect()
        })
        .collect())
}

/// Mode `j` on an edge: `cos(jπx)` on open edges; on a loop `1`,
/// `cos 2πx`, `sin 2πx`, `cos 4πx`, ...
fn mode(j: usize, n: usize, closed: bool) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let x = k as f64 / (n - 1) as f64;
            if !closed {
                (j as f64 * PI * x).cos()
            } else if j == 0 {
                1.0
            } else {
                let f = j.div_ceil(2) as f64 * 2.0 * PI * x;
                if j % 2 == 1 {
                    f.cos()
                } else {
                    f.sin()
                }
            }
        })
        .collect()
}

/// `modes` modes per edge, restricted to the junction constraints and
/// orthonormalized in the Gaussian-weighted product.
pub fn v_space_basis(reference: &DiscreteNetwork, modes: usize) -> Result<VBasis> {
    if modes == 0 {
        return Err(Error::RankDeficiency("no modes requested".into()));
    }
    let counts = reference.sample_counts();
    let closed = reference.is_closed();
    let min_n = counts.iter().copied().min().unwrap_or(0);
    if 2 * modes > min_n {
        return Err(Error::RankDeficiency(format!(
            "{modes} modes are not resolved by {min_n} samples"
        )));
    }
    let weights = gaussian_weights(reference)?;
    let topo = reference.topology();
    let mut raw: Vec<Field> = Vec::new();
    for e in 0..counts.len() {
        for j in 0..modes {
            let mut f: Field = counts.iter().map(|&n| vec![0.0; n]).collect();
            f[e] = mode(j, counts[e], closed);
            raw.push(f);
        }
    }
    let d = raw.len();
    let nj = topo.n_junctions();
    let mut constraint = DMatrix::<f64>::zeros(nj.max(1), d);
    for (c, f) in raw.iter().enumerate() {
        for m in 0..nj {
            constraint[(m, c)] = junction_constraint_residual(topo, f, m);
        }
    }
    // Null-space projector of the constraint matrix via its row space.
    let rank;
    let mut coeff_basis: Vec<DVector<f64>> = (0..d)
        .map(|c| {
            let mut v = DVector::zeros(d);
            v[c] = 1.0;
            v
        })
        .collect();
    if nj > 0 {
        let svd = constraint.clone().svd(false, true);
        let vt = svd.v_t.expect("requested right singular vectors");
        let smax = svd.singular_values.max();
        let rows: Vec<DVector<f64>> = svd
            .singular_values
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > 1e-12 * smax.max(1.0))
            .map(|(i, _)| vt.row(i).transpose())
            .collect();
        rank = rows.len();
        for v in coeff_basis.iter_mut() {
            for r in &rows {
                let c = r.dot(v);
                *v -= r * c;
            }
        }
    } else {
        rank = 0;
    }
    let mut fields: Vec<Field> = Vec::new();
    for v in &coeff_basis {
        let mut f: Field = counts.iter().map(|&n| vec![0.0; n]).collect();
        for (c, &a) in v.iter().enumerate() {
            if a != 0.0 {
                axpy(&mut f, a, &raw[c]);
            }
        }
        let norm0 = weighted_inner(&weights, &f, &f).sqrt();
        if norm0 < 1e-10 {
            continue;
        }
        for _ in 0..2 {
            for g in &fields {
                let c = weighted_inner(&weights, &f, g);
                axpy(&mut f, -c, g);
            }
        }
        let norm = weighted_inner(&weights, &f, &f).sqrt();
        if norm > 1e-8 * norm0 {
            for e in f.iter_mut() {
                for v in e.iter_mut() {
                    *v /= norm;
                }
            }
            fields.push(f);
        }
    }
    if fields.len() != d - rank {
        return Err(Error::RankDeficiency(format!(
            "expected {} independent fields, found {}",
            d - rank,
            fields.len()
        )));
    }
    Ok(VBasis { fields, weights })
}

/// Numerical Hessian `H` of `𝒢∘build_network` and mass matrix `B` of a basis.
#[derive(Clone, Debug)]
pub struct Hessian {
    pub h: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

fn mixed_second_difference(chart: &GraphChart, fa: &Field, fb: &Field, h: f64) -> Result<f64> {
    let mut vals = [0.0; 4];
    for (slot, (s, u)) in [(h, h), (h, -h), (-h, h), (-h, -h)].into_iter().enumerate() {
        let mut f: Field = fa.iter().map(|e| e.iter().map(|v| v * s).collect()).collect();
        axpy(&mut f, u, fb);
        vals[slot] = gaussian_energy(&chart.build_network(&f)?)?;
    }
    Ok(((vals[0] - vals[1]) - (vals[2] - vals[3])) / (4.0 * h * h))
}

/// Assembles `H_ab` from central second differences with step `h`,
/// Richardson-refined with `h/2`, and `B_ab = ⟨N_a, N_b⟩`.
pub fn hessian_with_step(reference: &DiscreteNetwork, basis: &VBasis, h: f64) -> Result<Hessian> {
    let g = gradient_norm(reference)?;
    if !(g <= SHRINKER_TOL) {
        return Err(Error::NotAShrinker(g));
    }
    if !(h >= 1e-8) {
        return Err(Error::StepUnderflow);
    }
    let chart = GraphChart::new(reference)?;
    let d = basis.dim();
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|a| (a..d).map(move |b| (a, b))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let (fa, fb) = (&basis.fields[a], &basis.fields[b]);
            let coarse = mixed_second_difference(&chart, fa, fb, h)?;
            let fine = mixed_second_difference(&chart, fa, fb, 0.5 * h)?;
            Ok((4.0 * fine - coarse) / 3.0)
        })
        .collect::<Result<_>>()?;
    let mut hm = DMatrix::zeros(d, d);
    let mut bm = DMatrix::zeros(d, d);
    for (&(a, b), &v) in pairs.iter().zip(&values) {
        hm[(a, b)] = v;
        hm[(b, a)] = v;
        let m = basis.inner(&basis.fields[a], &basis.fields[b]);
        bm[(a, b)] = m;
        bm[(b, a)] = m;
    }
    Ok(Hessian { h: hm, b: bm })
}

pub fn hessian(reference: &DiscreteNetwork, basis: &VBasis) -> Result<Hessian> {
    hessian_with_step(reference, basis, HESSIAN_STEP)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Generalized eigenvalues of `(H, B)`, ascending.
    pub eigenvalues: Vec<f64>,
    pub negative: usize,
    pub zero: usize,
    pub basis_dim: usize,
    pub reference: String,
}

/// Ascending eigenvalues of `H v = λ B v` for symmetric `H` and positive
/// definite `B`.
pub fn spectrum(h: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<SpectrumReport> {
    let chol = b.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or(Error::NotPositiveDefinite)?;
    let c = &linv * h * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let scale = eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let zero_tol = ZERO_MODE_REL * scale;
    Ok(SpectrumReport {
        negative: eigenvalues.iter().filter(|&&v| v < -zero_tol).count(),
        zero: eigenvalues.iter().filter(|&&v| v.abs() <= zero_tol).count(),
        basis_dim: eigenvalues.len(),
        eigenvalues,
        reference: String::new(),
    })
}

/// Basis, Hessian and spectrum at a reference shrinker in one call.
pub fn shrinker_spectrum(reference: &DiscreteNetwork, modes: usize, id: &str) -> Result<SpectrumReport> {
    let basis = v_space_basis(reference, modes)?;
    let hs = hessian(reference, &basis)?;
    let mut report = spectrum(&hs.h, &hs.b)?;
    report.reference = id.to_string();
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LojaConfig {
    pub amplitude_min: f64,
    pub amplitude_max: f64,
    pub amplitude_count: usize,
    pub directions: usize,
    /// Modes per edge of the V-basis the directions are drawn from.
    pub modes: usize,
    pub seed: u64,
}

impl Default for LojaConfig {
    fn default() -> Self {
        Self {
            amplitude_min: 1e-4,
            amplitude_max: 1e-2,
            amplitude_count: 9,
            directions: 8,
            modes: 5,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LojaSample {
    pub direction: usize,
    pub amplitude: f64,
    pub delta_energy: f64,
    pub gradient_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LojaFit {
    pub samples: Vec<LojaSample>,
    /// Common slope of `log|Δ𝒢|` against `log gradient_norm`.
    pub slope: f64,
    pub slope_stderr: f64,
    /// `θ = 1 − 1/slope`.
    pub theta: f64,
    /// 95% interval for `θ`.
    pub theta_interval: [f64; 2],
    /// Smallest `C` with `|Δ𝒢|^{1−θ} ≤ C·gradient_norm` on the samples.
    pub constant: f64,
    /// Within-direction coefficient of determination.
    pub r_squared: f64,
    /// Set when the fit is unreliable or `θ` falls outside `(0, 1/2]`.
    pub flag: Option<String>,
    pub seed: u64,
}

fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|k| (a.ln() + (b.ln() - a.ln()) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Samples `build_network(Γ*, a·N)` for each direction and amplitude and
/// fits the Łojasiewicz exponent.
pub fn loja_fit_with_directions(
    reference: &DiscreteNetwork,
    directions: &[Field],
    amplitudes: &[f64],
    seed: u64,
) -> Result<LojaFit> {
    let g = gradient_norm(reference)?;
    if !(g <= SHRINKER_TOL) {
        return Err(Error::NotAShrinker(g));
    }
    let chart = GraphChart::new(reference)?;
    let e0 = gaussian_energy(reference)?;
    let jobs: Vec<(usize, f64)> = (0..directions.len())
        .flat_map(|d| amplitudes.iter().map(move |&a| (d, a)))
        .collect();
    let samples: Vec<LojaSample> = jobs
        .par_iter()
        .map(|&(d, a)| {
            let f: Field = directions[d].iter().map(|e| e.iter().map(|v| v * a).collect()).collect();
            let net = chart.build_network(&f)?;
            Ok(LojaSample {
                direction: d,
                amplitude: a,
                delta_energy: gaussian_energy(&net)? - e0,
                gradient_norm: gradient_norm(&net)?,
            })
        })
        .collect::<Result<_>>()?;
    for s in &samples {
        if !(s.delta_energy.abs() >= DELTA_ENERGY_FLOOR) || !(s.gradient_norm > 0.0) {
            return Err(Error::DegenerateSamples(format!(
                "|Δ𝒢| = {:e} at amplitude {:e} (direction {})",
                s.delta_energy.abs(),
                s.amplitude,
                s.direction
            )));
        }
    }
    // Fixed-effects regression: one intercept per direction, common slope.
    let nd = directions.len();
    let mut mean_x = vec![0.0; nd];
    let mut mean_y = vec![0.0; nd];
    let mut count = vec![0usize; nd];
    let xy: Vec<(usize, f64, f64)> = samples
        .iter()
        .map(|s| (s.direction, s.gradient_norm.ln(), s.delta_energy.abs().ln()))
        .collect();
    for &(d, x, y) in &xy {
        mean_x[d] += x;
        mean_y[d] += y;
        count[d] += 1;
    }
    for d in 0..nd {
        mean_x[d] /= count[d].max(1) as f64;
        mean_y[d] /= count[d].max(1) as f64;
    }
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(d, x, y) in &xy {
        let (dx, dy) = (x - mean_x[d], y - mean_y[d]);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if !(sxx > 0.0) {
        return Err(Error::DegenerateSamples("gradient norms do not vary".into()));
    }
    let slope = sxy / sxx;
    let ssr = (syy - slope * sxy).max(0.0);
    let dof = xy.len().saturating_sub(nd + 1).max(1) as f64;
    let slope_stderr = (ssr / dof / sxx).sqrt();
    let r_squared = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    let theta = 1.0 - 1.0 / slope;
    let half = 1.96 * slope_stderr / (slope * slope);
    let constant = samples
        .iter()
        .map(|s| s.delta_energy.abs().powf(1.0 - theta) / s.gradient_norm)
        .fold(0.0, f64::max);
    let flag = if r_squared < LOJA_R2_THRESHOLD {
        Some(format!("regression R² {r_squared:.4} below {LOJA_R2_THRESHOLD}"))
    } else if !(theta > 0.0 && theta - half <= 0.5) {
        Some(format!("θ = {theta:.4} outside (0, 1/2]"))
    } else {
        None
    };
    Ok(LojaFit {
        samples,
        slope,
        slope_stderr,
        theta,
        theta_interval: [theta - half, theta + half],
        constant,
        r_squared,
        flag,
        seed,
    })
}

/// [`loja_fit_with_directions`] with seeded random unit directions in `V`.
pub fn loja_fit(reference: &DiscreteNetwork, cfg: &LojaConfig) -> Result<LojaFit> {
    if !(cfg.amplitude_min >= 0.0 && cfg.amplitude_max >= cfg.amplitude_min) || cfg.directions == 0 {
        return Err(Error::Config("invalid amplitude range or direction count".into()));
    }
    let basis = v_space_basis(reference, cfg.modes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let directions: Vec<Field> = (0..cfg.directions)
        .map(|_| {
            let c: Vec<f64> = (0..basis.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            let c: Vec<f64> = c.iter().map(|v| v / norm).collect();
            basis.combine(&c)
        })
        .collect();
    let amps = logspace(cfg.amplitude_min, cfg.amplitude_max, cfg.amplitude_count.max(1));
    loja_fit_with_directions(reference, &directions, &amps, cfg.seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShrinkerControls {
    pub tol: f64,
    pub max_iter: usize,
    /// Consecutive rejected steps before giving up.
    pub max_backtracks: usize,
    pub initial_damping: f64,
    /// Finite-difference step of the residual Jacobian.
    pub fd_step: f64,
}

impl Default for ShrinkerControls {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 100,
            max_backtracks: 50,
            initial_damping: 1e-3,
            fd_step: 1e-7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrinkerSearch {
    pub net: DiscreteNetwork,
    /// Gradient norms of the accepted iterates, strictly decreasing.
    pub history: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// `√(w·e^{−|γ|²/2}|∂ₓγ|)·⟨γ⊥ + k, ν⟩` at every free sample, so that the
/// Euclidean norm equals [`gradient_norm`].
fn residual_vector(net: &DiscreteNetwork) -> Result<Vec<f64>> {
    let fr = frames(net)?;
    let mut out = Vec::new();
    for (pts, f) in net.edges().iter().zip(&fr) {
        let w = trapezoid_weights(pts.len());
        for k in 0..pts.len() {
            let p = pts[k];
            let tau = f.tangent[k];
            let r = (p - tau * p.dot(tau)) + f.curvature[k];
            let weight = w[k] * f.speed[k] * gaussian_weight(p);
            out.push(weight.sqrt() * r.dot(f.normal[k]));
        }
    }
    Ok(out)
}

/// Positions in the unknown vector of the normal values that may move:
/// every sample except pinned endpoints and a loop's repeated sample.
fn free_samples(net: &DiscreteNetwork) -> Vec<(usize, usize)> {
    let topo = net.topology();
    let mut out = Vec::new();
    for (e, pts) in net.edges().iter().enumerate() {
        let n = pts.len();
        for k in 0..n {
            if net.is_closed() && k == n - 1 {
                continue;
            }
            let pinned = topo
                .endpoints()
                .iter()
                .any(|&(pe, pend)| pe == e && ((pend == 0 && k == 0) || (pend == 1 && k == n - 1)));
            if !pinned {
                out.push((e, k));
            }
        }
    }
    out
}

fn field_from(net: &DiscreteNetwork, free: &[(usize, usize)], z: &[f64]) -> Field {
    let mut f: Field = net.edges().iter().map(|p| vec![0.0; p.len()]).collect();
    for (&(e, k), &v) in free.iter().zip(z) {
        f[e][k] = v;
    }
    if net.is_closed() {
        let n = f[0].len();
        f[0][n - 1] = f[0][0];
    }
    project_to_constraint(net.topology(), &mut f);
    f
}

/// Drives [`gradient_norm`] to zero by Levenberg–Marquardt steps on the
/// weighted residual `γ⊥ + k`, parametrized by normal graphs over the
/// current iterate.
///
/// Shrinkers are saddle points of the Gaussian energy, so following the
/// rescaled flow (or its reverse) does not converge to them in general;
/// minimizing the residual does.
pub fn find_shrinker(initial: &DiscreteNetwork, controls: &ShrinkerControls) -> Result<ShrinkerSearch> {
    let mut net = initial.clone();
    let mut g = gradient_norm(&net)?;
    let mut history = vec![g];
    let mut lambda = controls.initial_damping;
    let mut iterations = 0;
    while g >= controls.tol && iterations < controls.max_iter {
        iterations += 1;
        let chart = GraphChart::new(&net)?.with_tube_factor(0.5);
        let free = free_samples(&net);
        let r0 = residual_vector(&net)?;
        let eps = controls.fd_step;
        let columns: Vec<Vec<f64>> = (0..free.len())
            .into_par_iter()
            .map(|j| {
                let mut z = vec![0.0; free.len()];
                z[j] = eps;
                let trial = chart.build_network(&field_from(&net, &free, &z))?;
                let r = residual_vector(&trial)?;
                Ok(r.iter().zip(&r0).map(|(a, b)| (a - b) / eps).collect())
            })
            .collect::<Result<_>>()?;
        let jac = DMatrix::from_fn(r0.len(), free.len(), |i, j| columns[j][i]);
        let jtj = jac.transpose() * &jac;
        let rhs = -(jac.transpose() * DVector::from_column_slice(&r0));
        let scale = jtj.diagonal().max().max(1e-300);
        let mut rejected = 0;
        loop {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lambda * (jtj[(i, i)] + 1e-9 * scale);
            }
            let step = a.cholesky().map(|c| c.solve(&rhs));
            let trial = step.and_then(|z| chart.build_network(&field_from(&net, &free, z.as_slice())).ok());
            let tg = trial.as_ref().and_then(|t| gradient_norm(t).ok());
            match (trial, tg) {
                (Some(t), Some(tg)) if tg < g => {
                    net = t;
                    g = tg;
                    history.push(g);
                    lambda = (lambda / 3.0).max(1e-12);
                    break;
                }
                _ => {
                    lambda *= 4.0;
                    rejected += 1;
                    if rejected >= controls.max_backtracks {
                        return Err(Error::Stalled {
                            iterations,
                            gradient_norm: g,
                        });
                    }
                }
            }
        }
    }
    Ok(ShrinkerSearch {
        net,
        history,
        converged: g < controls.tol,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use crate::vec2::Vec2;

    #[test]
    fn circle_basis_is_orthonormal_fourier() {
        let net = shapes::circle(1.0, 257);
        let b = v_space_basis(&net, 5).unwrap();
        assert_eq!(b.dim(), 5);
        for i in 0..5 {
            for j in 0..5 {
                let v = b.inner(&b.fields[i], &b.fields[j]);
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
        // The circle is rotation symmetric, so Gram–Schmidt keeps pure modes.
        let theta = |k: usize| 2.0 * PI * k as f64 / 256.0;
        let f = &b.fields[2][0];
        for k in 0..257 {
            let expected = f[64] * theta(k).sin();
            assert!((f[k] - expected).abs() < 1e-8, "{k}");
        }
    }

    #[test]
    fn constraint_dimensions() {
        let triod = shapes::steiner_triod(1.0, 41);
        let b = v_space_basis(&triod, 4).unwrap();
        assert_eq!(b.dim(), 3 * 4 - 1);
        let theta = shapes::symmetric_theta(0.5, 61);
        let b = v_space_basis(&theta, 4).unwrap();
        assert_eq!(b.dim(), 3 * 4 - 2);
        for f in &b.fields {
            for m in 0..2 {
                assert!(junction_constraint_residual(theta.topology(), f, m).abs() < 1e-12);
            }
        }
        assert!(matches!(v_space_basis(&theta, 0), Err(Error::RankDeficiency(_))));
        assert!(matches!(v_space_basis(&shapes::circle(1.0, 16), 12), Err(Error::RankDeficiency(_))));
    }

    #[test]
    fn spectrum_of_simple_pencils() {
        let i3 = DMatrix::<f64>::identity(3, 3);
        let r = spectrum(&i3, &i3).unwrap();
        assert!(r.eigenvalues.iter().all(|v| (v - 1.0).abs() < 1e-14));
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -1.0]);
        let r = spectrum(&h, &DMatrix::identity(2, 2)).unwrap();
        assert_eq!(r.eigenvalues, vec![-1.0, 2.0]);
        assert_eq!((r.negative, r.zero), (1, 0));
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(spectrum(&h, &bad), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn circle_spectrum_matches_fourier() {
        let r = shrinker_spectrum(&shapes::circle(1.0, 513), 7, "circle").unwrap();
        let expected = [-2.0, -1.0, -1.0, 2.0, 2.0, 7.0, 7.0];
        for (v, e) in r.eigenvalues.iter().zip(expected) {
            assert!((v - e).abs() <= 0.02 * e.abs(), "{:?}", r.eigenvalues);
        }
        assert_eq!(r.negative, 3);
    }

    #[test]
    fn scaling_mode_rayleigh_quotient() {
        let net = shapes::circle(1.0, 513);
        let b = v_space_basis(&net, 1).unwrap();
        let hs = hessian(&net, &b).unwrap();
        assert!((hs.h[(0, 0)] / hs.b[(0, 0)] + 2.0).abs() < 0.04);
    }

    #[test]
    fn spectrum_is_invariant_under_reordering() {
        let net = shapes::circle(1.0, 257);
        let mut b = v_space_basis(&net, 5).unwrap();
        let a = spectrum(&hessian(&net, &b).unwrap().h, &hessian(&net, &b).unwrap().b).unwrap();
        b.fields.reverse();
        let hs = hessian(&net, &b).unwrap();
        let r = spectrum(&hs.h, &hs.b).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&r.eigenvalues) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn hessian_rejects_non_shrinker() {
        let net = shapes::circle(1.3, 129);
        let b = v_space_basis(&net, 3).unwrap();
        assert!(matches!(hessian(&net, &b), Err(Error::NotAShrinker(_))));
        let unit = shapes::circle(1.0, 257);
        let b = v_space_basis(&unit, 3).unwrap();
        assert!(matches!(hessian_with_step(&unit, &b, 0.0), Err(Error::StepUnderflow)));
    }

    #[test]
    fn energy_gradient_pairing() {
        // d/ds 𝒢(γ + sNν) = −∫⟨γ⊥ + k, Nν⟩ dμ at the non-critical circle of radius 1.2.
        let net = shapes::circle(1.2, 513);
        let chart = GraphChart::new(&net).unwrap();
        let one: Field = vec![vec![1.0; 513]];
        let h = 1e-6;
        let plus = gaussian_energy(&chart.build_network(&[vec![h; 513]]).unwrap()).unwrap();
        let minus = gaussian_energy(&chart.build_network(&[vec![-h; 513]]).unwrap()).unwrap();
        let fd = (plus - minus) / (2.0 * h);
        let fr = frames(&net).unwrap();
        let w = gaussian_weights(&net).unwrap();
        let res = crate::energy::shrinker_residual(&net).unwrap();
        let pairing: f64 = (0..513)
            .map(|k| -w[0][k] * one[0][k] * res.values[0][k].dot(fr[0].normal[k]))
            .sum();
        assert!((fd - pairing).abs() <= 0.05 * pairing.abs(), "{fd} vs {pairing}");
    }

    #[test]
    fn second_variation_leading_symbol() {
        let net = shapes::circle(1.0, 513);
        let chart = GraphChart::new(&net).unwrap();
        let w = gaussian_weights(&net).unwrap();
        let quotient = |n: f64| {
            let f: Field = vec![(0..513).map(|k| (n * 2.0 * PI * k as f64 / 512.0).cos()).collect()];
            let norm2 = weighted_inner(&w, &f, &f);
            mixed_second_difference(&chart, &f, &f, 1e-4).unwrap() / norm2
        };
        for n in [4.0, 8.0] {
            let ratio = (quotient(n) + 2.0) / (n * n);
            assert!((ratio - 1.0).abs() < 0.05, "mode {n}: {ratio}");
        }
    }

    #[test]
    fn loja_exponent_at_circle() {
        let net = shapes::circle(1.0, 2049);
        let fit = loja_fit(&net, &LojaConfig::default()).unwrap();
        assert!((0.45..=0.55).contains(&fit.theta), "{fit:?}");
        assert!(fit.r_squared >= 0.99);
        assert!(fit.flag.is_none());
    }

    #[test]
    fn loja_mode_two_slope() {
        let net = shapes::circle(1.0, 2049);
        let b = v_space_basis(&net, 5).unwrap();
        let fit = loja_fit_with_directions(&net, &[b.fields[3].clone()], &logspace(1e-4, 1e-2, 7), 0).unwrap();
        assert!((fit.slope - 2.0).abs() < 0.1, "{}", fit.slope);
        let zero = loja_fit_with_directions(&net, &[b.fields[3].clone()], &[0.0], 0);
        assert!(matches!(zero, Err(Error::DegenerateSamples(_))));
    }

    #[test]
    fn shrinker_from_large_circle() {
        let s = find_shrinker(&shapes::circle(1.3, 257), &ShrinkerControls::default()).unwrap();
        assert!(s.converged);
        assert!(*s.history.last().unwrap() < 1e-6);
        for w in s.history.windows(2) {
            assert!(w[1] < w[0]);
        }
        let pts = &s.net.edge(0)[..256];
        let center = pts.iter().fold(Vec2::ZERO, |a, &p| a + p) / 256.0;
        for p in pts {
            assert!(((*p - center).norm() - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn theta_has_no_regular_shrinker() {
        let controls = ShrinkerControls {
            max_iter: 15,
            ..ShrinkerControls::default()
        };
        if let Ok(s) = find_shrinker(&shapes::symmetric_theta(1.0, 41), &controls) { assert!(!s.converged) }
    }
}
