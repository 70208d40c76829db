//! n-point motions of an isotropic stochastic flow and their diffusive
//! rescaling.
//!
//! Points move by correlated Gaussian increments with covariance
//! `B(y_i - y_j)`. Euler steps can swap close points; every step is followed
//! by a sort and the swaps are counted, so the order of points is preserved
//! and the count measures the discretization error.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pathspace::{PathSet, Semipath, Window};
use crate::rng::{hash_words, replica_rng};
use crate::stats::EmpiricalDistribution;

/// Eigenvalues below this multiple of `B(0)` are raised to it.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Per-step order-violation rate above which the default step is halved.
pub const VIOLATION_THRESHOLD: f64 = 1e-3;

/// Default step as a fraction of the horizon.
pub const DEFAULT_STEP_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `b0 * exp(-x^2 / (2 sigma^2))`
    Gaussian,
    /// `b0 / (1 + (x / sigma)^2)`
    Cauchy,
}

impl std::str::FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Kernel::Gaussian),
            "cauchy" => Ok(Kernel::Cauchy),
            other => Err(Error::InvalidParameter(format!("unknown kernel `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub kernel: Kernel,
    pub sigma: f64,
    pub b0: f64,
}

impl Default for CovarianceSpec {
    fn default() -> Self {
        Self { kernel: Kernel::Gaussian, sigma: 1.0, b0: 1.0 }
    }
}

impl CovarianceSpec {
    pub fn new(kernel: Kernel, sigma: f64, b0: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) || !(b0 > 0.0 && b0.is_finite()) {
            return Err(Error::InvalidParameter(format!("kernel needs sigma > 0 and B(0) > 0, got {sigma}, {b0}")));
        }
        Ok(Self { kernel, sigma, b0 })
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let u = x / self.sigma;
        match self.kernel {
            Kernel::Gaussian => self.b0 * (-0.5 * u * u).exp(),
            Kernel::Cauchy => self.b0 / (1.0 + u * u),
        }
    }

    /// `B(0) - B(x)`, accurate for small `x`.
    #[inline]
    pub fn deficit(&self, x: f64) -> f64 {
        let u = x / self.sigma;
        match self.kernel {
            Kernel::Gaussian => -self.b0 * (-0.5 * u * u).exp_m1(),
            Kernel::Cauchy => self.b0 * u * u / (1.0 + u * u),
        }
    }

    /// Gap below which the clipped factorization no longer resolves the
    /// relative motion of two points. Reorderings of pairs closer than this
    /// are not counted as violations.
    pub fn resolution(&self) -> f64 {
        self.sigma * (2.0 * EIGEN_FLOOR).sqrt()
    }
}

fn check_finite(points: &[f64]) -> Result<()> {
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidParameter("non-finite position".into()));
    }
    Ok(())
}

/// `C_ij = B(y_i - y_j)`.
pub fn covariance_matrix(spec: &CovarianceSpec, points: &[f64]) -> Result<DMatrix<f64>> {
    check_finite(points)?;
    let n = points.len();
    Ok(DMatrix::from_fn(n, n, |i, j| spec.eval(points[i] - points[j])))
}

/// `L` with `L L^T = C` after eigenvalue clipping.
pub fn factor(spec: &CovarianceSpec, points: &[f64]) -> Result<DMatrix<f64>> {
    let c = covariance_matrix(spec, points)?;
    let floor = EIGEN_FLOOR * spec.b0;
    let eig = SymmetricEigen::try_new(c, f64::EPSILON, 0)
        .ok_or_else(|| Error::Factorization("eigen decomposition did not converge".into()))?;
    let roots = eig.eigenvalues.map(|l| l.max(floor).sqrt());
    let l = &eig.eigenvectors * DMatrix::from_diagonal(&roots);
    if l.iter().any(|v| !v.is_finite()) {
        return Err(Error::Factorization("non-finite factor".into()));
    }
    Ok(l)
}

/// Add one Euler increment to `points` (sorted) in place and sort again.
/// Returns whether an adjacent pair farther apart than
/// [`CovarianceSpec::resolution`] came out of order.
pub fn step_in_place<R: Rng + ?Sized>(points: &mut [f64], h: f64, spec: &CovarianceSpec, rng: &mut R) -> Result<bool> {
    let sh = h.sqrt();
    let floor = EIGEN_FLOOR * spec.b0;
    let res = spec.resolution();
    match points.len() {
        0 => Ok(false),
        1 => {
            let z: f64 = rng.sample(StandardNormal);
            points[0] += sh * spec.b0.sqrt() * z;
            Ok(false)
        }
        2 => {
            // Eigenvectors (1, 1) / sqrt 2 and (1, -1) / sqrt 2.
            let g = points[1] - points[0];
            let deficit = spec.deficit(g);
            let plus = ((2.0 * spec.b0 - deficit).max(floor) / 2.0).sqrt();
            let minus = (deficit.max(floor) / 2.0).sqrt();
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            let (u, v) = (plus * z1, minus * z2);
            points[0] += sh * (u + v);
            points[1] += sh * (u - v);
            if points[0] > points[1] {
                points.swap(0, 1);
                return Ok(g >= res);
            }
            Ok(false)
        }
        n => {
            let resolved: Vec<bool> = points.windows(2).map(|w| w[1] - w[0] >= res).collect();
            let l = factor(spec, points)?;
            let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let dy = l * z;
            for (p, d) in points.iter_mut().zip(dy.iter()) {
                *p += sh * d;
            }
            let mut violated = false;
            let mut unsorted = false;
            for (i, w) in points.windows(2).enumerate() {
                if w[0] > w[1] {
                    unsorted = true;
                    violated |= resolved[i];
                }
            }
            if unsorted {
                points.sort_by(|a, b| a.partial_cmp(b).unwrap());
            }
            Ok(violated)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub time: f64,
    pub points: Vec<f64>,
    pub violations: u64,
}

impl FlowState {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        check_finite(&points)?;
        if points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("initial points must be strictly increasing".into()));
        }
        Ok(Self { time: 0.0, points, violations: 0 })
    }
}

/// One Euler step of the n-point motion.
pub fn step<R: Rng + ?Sized>(state: &FlowState, h: f64, spec: &CovarianceSpec, rng: &mut R) -> Result<FlowState> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    let mut points = state.points.clone();
    let violated = step_in_place(&mut points, h, spec, rng)?;
    Ok(FlowState { time: state.time + h, points, violations: state.violations + violated as u64 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowConfig {
    pub spec: CovarianceSpec,
    pub h: f64,
    pub horizon: f64,
    pub seed: u64,
    pub delta: f64,
}

/// Trajectories of `replicas` independent n-point motions on a common
/// time grid. Positions are stored replica-major, then time, then point.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrajectorySet {
    pub times: Vec<f64>,
    pub n_points: usize,
    pub replicas: usize,
    pub positions: Vec<f64>,
    pub violations: u64,
    pub steps: usize,
    pub config: FlowConfig,
}

impl FlowTrajectorySet {
    #[inline]
    pub fn position(&self, replica: usize, time_index: usize, point: usize) -> f64 {
        self.positions[(replica * self.times.len() + time_index) * self.n_points + point]
    }

    pub fn final_points(&self, replica: usize) -> &[f64] {
        let k = self.times.len() - 1;
        let start = (replica * self.times.len() + k) * self.n_points;
        &self.positions[start..start + self.n_points]
    }

    /// Order violations per replica step.
    pub fn violation_rate(&self) -> f64 {
        self.violations as f64 / (self.replicas * self.steps).max(1) as f64
    }

    /// `replica,point_index,time,position` rows.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["replica", "point_index", "time", "position"]).expect("in-memory write");
        for r in 0..self.replicas {
            for i in 0..self.n_points {
                for (k, t) in self.times.iter().enumerate() {
                    let row = [r.to_string(), i.to_string(), t.to_string(), self.position(r, k, i).to_string()];
                    w.write_record(&row).expect("in-memory write");
                }
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii csv")
    }

    /// Each point's trajectory as a forward semipath.
    pub fn to_semipaths(&self) -> Result<PathSet<Semipath>> {
        let mut members = Vec::with_capacity(self.replicas * self.n_points);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for r in 0..self.replicas {
            for i in 0..self.n_points {
                let knots: Vec<[f64; 2]> =
                    self.times.iter().enumerate().map(|(k, &t)| [t, self.position(r, k, i)]).collect();
                for k in &knots {
                    lo = lo.min(k[1]);
                    hi = hi.max(k[1]);
                }
                members.push(Semipath::forward(knots)?);
            }
        }
        let t_hi = *self.times.last().unwrap();
        let window = Window::new(self.times[0], t_hi.max(self.times[0] + f64::EPSILON), lo, hi)?;
        Ok(PathSet::new(window, members))
    }
}

fn check_run(initial: &[f64], horizon: f64, h: f64, replicas: usize) -> Result<usize> {
    FlowState::new(initial.to_vec())?;
    if initial.is_empty() {
        return Err(Error::Empty("initial points"));
    }
    if !(horizon > 0.0 && h > 0.0) || h > horizon * (1.0 + 1e-12) || replicas == 0 {
        return Err(Error::InvalidParameter(format!(
            "need horizon > 0, 0 < h <= horizon and replicas > 0 (horizon {horizon}, h {h}, replicas {replicas})"
        )));
    }
    Ok(((horizon / h).round() as usize).max(1))
}

/// Simulate, keeping every `record_every`-th grid time plus the last one.
pub fn simulate_recorded(
    spec: &CovarianceSpec,
    initial: &[f64],
    horizon: f64,
    h: f64,
    seed: u64,
    replicas: usize,
    record_every: usize,
) -> Result<FlowTrajectorySet> {
    let steps = check_run(initial, horizon, h, replicas)?;
    let every = record_every.max(1);
    let recorded: Vec<usize> = (0..=steps).filter(|k| k % every == 0 || *k == steps).collect();
    let times: Vec<f64> = recorded.iter().map(|&k| k as f64 * h).collect();
    let n = initial.len();
    let per_replica = (0..replicas as u64)
        .into_par_iter()
        .map(|r| -> Result<(Vec<f64>, u64)> {
            let mut rng = replica_rng(seed, r);
            let mut y = initial.to_vec();
            let mut out = Vec::with_capacity(recorded.len() * n);
            out.extend_from_slice(&y);
            let mut violations = 0;
            for k in 1..=steps {
                violations += step_in_place(&mut y, h, spec, &mut rng)? as u64;
                if k % every == 0 || k == steps {
                    out.extend_from_slice(&y);
                }
            }
            Ok((out, violations))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut positions = Vec::with_capacity(replicas * times.len() * n);
    let mut violations = 0;
    for (p, v) in per_replica {
        positions.extend(p);
        violations += v;
    }
    Ok(FlowTrajectorySet {
        times,
        n_points: n,
        replicas,
        positions,
        violations,
        steps,
        config: FlowConfig { spec: *spec, h, horizon, seed, delta: 1.0 },
    })
}

/// Simulate on the full step grid; replica `r` draws from its own stream.
pub fn simulate(
    spec: &CovarianceSpec,
    initial: &[f64],
    horizon: f64,
    h: f64,
    seed: u64,
    replicas: usize,
) -> Result<FlowTrajectorySet> {
    simulate_recorded(spec, initial, horizon, h, seed, replicas, 1)
}

/// Diffusive rescaling of an unrescaled run: positions times `delta`,
/// times times `delta^2`.
pub fn rescale_flow(traj: &FlowTrajectorySet, delta: f64) -> Result<FlowTrajectorySet> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    if traj.config.delta != 1.0 {
        return Err(Error::InvalidParameter("trajectory set is already rescaled".into()));
    }
    let d2 = delta * delta;
    let mut out = traj.clone();
    out.times.iter_mut().for_each(|t| *t *= d2);
    out.positions.iter_mut().for_each(|x| *x *= delta);
    out.config.h *= d2;
    out.config.horizon *= d2;
    out.config.delta = delta;
    Ok(out)
}

/// Final positions only; returns them flattened with the violation count.
fn run_final(
    spec: &CovarianceSpec,
    initial: &[f64],
    horizon: f64,
    h: f64,
    seed: u64,
    replicas: usize,
) -> Result<(Vec<f64>, u64, usize)> {
    let steps = check_run(initial, horizon, h, replicas)?;
    let per_replica = (0..replicas as u64)
        .into_par_iter()
        .map(|r| -> Result<(Vec<f64>, u64)> {
            let mut rng: ChaCha8Rng = replica_rng(seed, r);
            let mut y = initial.to_vec();
            let mut v = 0;
            for _ in 0..steps {
                v += step_in_place(&mut y, h, spec, &mut rng)? as u64;
            }
            Ok((y, v))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut finals = Vec::with_capacity(replicas * initial.len());
    let mut violations = 0;
    for (y, v) in per_replica {
        finals.extend(y);
        violations += v;
    }
    Ok((finals, violations, steps))
}

/// Default step for a run: `DEFAULT_STEP_FRACTION * horizon`, halved while a
/// pilot run's violation rate exceeds [`VIOLATION_THRESHOLD`]. Returns the
/// step and the last pilot rate.
pub fn choose_step(spec: &CovarianceSpec, initial: &[f64], horizon: f64, seed: u64) -> Result<(f64, f64)> {
    let pilot_seed = hash_words(seed, &[0x5049_4C4F_5400_0005]);
    let pilot_replicas = 2000;
    let mut h = DEFAULT_STEP_FRACTION * horizon;
    let mut rate = 0.0;
    for _ in 0..24 {
        let (_, v, steps) = run_final(spec, initial, horizon, h, pilot_seed, pilot_replicas)?;
        rate = v as f64 / (pilot_replicas * steps) as f64;
        if rate <= VIOLATION_THRESHOLD {
            break;
        }
        h /= 2.0;
    }
    Ok((h, rate))
}

/// Rescaled two-point gap law with its run diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapSample {
    pub distribution: EmpiricalDistribution,
    /// Unrescaled step used.
    pub h: f64,
    pub violation_rate: f64,
    /// Gaps below this (one rescaled lattice unit) count as coalesced.
    pub atom_threshold: f64,
}

/// Law of `|xi_t(x1) - xi_t(x2)|` for the flow rescaled at `delta`, from
/// an unrescaled run started at `x / delta` over `t / delta^2`. With `h`
/// unset the step is chosen by [`choose_step`].
#[allow(clippy::too_many_arguments)]
pub fn two_point_gap_sample(
    spec: &CovarianceSpec,
    x1: f64,
    x2: f64,
    t: f64,
    delta: f64,
    h: Option<f64>,
    seed: u64,
    replicas: usize,
) -> Result<GapSample> {
    if spec.b0 != 1.0 {
        return Err(Error::InvalidParameter("the gap law is calibrated for B(0) = 1".into()));
    }
    if !(x1 <= x2) || !(t > 0.0) || !(delta > 0.0) || replicas == 0 {
        return Err(Error::InvalidParameter("need x1 <= x2, t > 0, delta > 0, replicas > 0".into()));
    }
    if x1 == x2 {
        return Ok(GapSample {
            distribution: EmpiricalDistribution::from_values(vec![0.0; replicas], delta),
            h: h.unwrap_or(0.0),
            violation_rate: 0.0,
            atom_threshold: delta,
        });
    }
    let initial = [x1 / delta, x2 / delta];
    let horizon = t / (delta * delta);
    let h = match h {
        Some(h) => h,
        None => choose_step(spec, &initial, horizon, seed)?.0,
    };
    let (finals, violations, steps) = run_final(spec, &initial, horizon, h, seed, replicas)?;
    let gaps = finals.chunks(2).map(|p| (p[1] - p[0]).abs() * delta).collect();
    Ok(GapSample {
        distribution: EmpiricalDistribution::from_values(gaps, delta),
        h,
        violation_rate: violations as f64 / (replicas * steps) as f64,
        atom_threshold: delta,
    })
}
