//! Coalescing Brownian motion laws, empirical distributions and the
//! experiments that compare samplers against them.
//!
//! All oracle formulas are for pairs of unit-diffusion Brownian motions; their
//! difference has diffusion coefficient 2.

use libm::{erf, erfc};
use rayon::prelude::*;
use serde::Serialize;

use crate::discreteweb::{sample_arrow_field, ArrowField, ArrowRule, DoubleWebSample, LatticeWindow};
use crate::error::{Error, Result};
use crate::fullweb::{grid_sites, verify_construction_equivalence, PointType};
use crate::rng::replica_seed;
use crate::stochflow::{two_point_gap_sample, CovarianceSpec};

/// Probability that coalescing Brownian motions started `d` apart have not
/// met by time `t`.
pub fn coalescing_survival(d: f64, t: f64) -> f64 {
    erf(d / (2.0 * t.sqrt()))
}

#[inline]
fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// CDF of the gap at time `t`: an atom of mass `1 - survival` at 0 plus the
/// method-of-images density on `(0, y]`.
pub fn coalescing_gap_cdf(d: f64, t: f64, y: f64) -> f64 {
    let atom = 1.0 - coalescing_survival(d, t);
    if y <= 0.0 {
        return atom;
    }
    let s = (2.0 * t).sqrt();
    let direct = std_normal_cdf((y - d) / s) - std_normal_cdf(-d / s);
    let image = std_normal_cdf((y + d) / s) - std_normal_cdf(d / s);
    (atom + direct - image).clamp(0.0, 1.0)
}

/// Density of the gap on `(0, inf)`.
pub fn coalescing_gap_density(d: f64, t: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let s = (2.0 * t).sqrt();
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (phi((y - d) / s) - phi((y + d) / s)) / s
}

/// Expected number of distinct paths per unit length at time `t` for the
/// web started from everywhere at time 0.
pub fn coalescing_density(t: f64) -> f64 {
    1.0 / (std::f64::consts::PI * t).sqrt()
}

/// Sorted nonzero samples plus a count of samples absorbed at zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDistribution {
    pub samples: Vec<f64>,
    pub atom_at_zero: usize,
    pub replica_count: usize,
}

impl EmpiricalDistribution {
    /// Values strictly below `atom_threshold` go to the atom.
    pub fn from_values(mut values: Vec<f64>, atom_threshold: f64) -> Self {
        let n = values.len();
        values.retain(|&v| v >= atom_threshold);
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Self { atom_at_zero: n - values.len(), samples: values, replica_count: n }
    }

    pub fn atom_fraction(&self) -> f64 {
        self.atom_at_zero as f64 / self.replica_count as f64
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.replica_count as f64
    }
}

/// Kolmogorov-Smirnov distance between the empirical law (atom included)
/// and a model CDF, taken over the atom and both one-sided limits at every
/// sample value.
pub fn ks_statistic<F: Fn(f64) -> f64>(emp: &EmpiricalDistribution, cdf: F) -> Result<f64> {
    let n = emp.replica_count;
    if n == 0 {
        return Err(Error::Empty("empirical distribution"));
    }
    let nf = n as f64;
    let mut below = emp.atom_at_zero;
    let mut d = if emp.atom_at_zero > 0 { (below as f64 / nf - cdf(0.0)).abs() } else { 0.0 };
    let s = &emp.samples;
    let mut i = 0;
    while i < s.len() {
        let v = s[i];
        let mut j = i;
        while j < s.len() && s[j] == v {
            j += 1;
        }
        let f = cdf(v);
        d = d.max((f - below as f64 / nf).abs());
        below += j - i;
        d = d.max((below as f64 / nf - f).abs());
        i = j;
    }
    Ok(d)
}

/// Asymptotic 99% KS quantile for `n` samples plus a discretization allowance.
pub fn ks_threshold(n: usize, bias: f64) -> f64 {
    1.63 / (n as f64).sqrt() + bias
}

/// Outcome of one statistical check; `pass` iff `statistic <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatReport {
    pub test_name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub replica_count: usize,
    pub seed: u64,
    pub config: serde_json::Value,
}

impl StatReport {
    pub fn new(
        test_name: &str,
        statistic: f64,
        threshold: f64,
        replica_count: usize,
        seed: u64,
        config: serde_json::Value,
    ) -> Self {
        Self {
            test_name: test_name.to_string(),
            statistic,
            threshold,
            pass: statistic <= threshold,
            replica_count,
            seed,
            config,
        }
    }
}

/// Share of points typed as generic (`m_out = 1`, `m_in <= 1`). The report's
/// statistic is the non-generic share, required to stay at or below 0.01.
pub fn type_frequency_report(samples: &[PointType], seed: u64) -> Result<StatReport> {
    if samples.is_empty() {
        return Err(Error::Empty("point type sample"));
    }
    let generic = samples.iter().filter(|p| p.m_out == 1 && p.m_in <= 1).count();
    let fraction = generic as f64 / samples.len() as f64;
    Ok(StatReport::new(
        "type_frequency",
        1.0 - fraction,
        0.01,
        samples.len(),
        seed,
        serde_json::json!({ "generic_fraction": fraction }),
    ))
}

/// Even lattice gap closest to `d / delta`, at least 2.
pub fn lattice_gap(d: f64, delta: f64) -> i64 {
    (2 * (d / (2.0 * delta)).round() as i64).max(2)
}

/// Rescaled gaps at time `t` of two coalescing walks started `d` apart, one
/// fresh field per replica. Coalesced pairs form the atom.
pub fn walk_gap_sample(d: f64, t: f64, delta: f64, replicas: usize, seed: u64) -> Result<EmpiricalDistribution> {
    if !(delta > 0.0 && d > 0.0 && t > 0.0) || replicas == 0 {
        return Err(Error::InvalidParameter("walk gap needs positive d, t, delta and replicas".into()));
    }
    let gap = lattice_gap(d, delta);
    let steps = (t / (delta * delta)).round().max(1.0) as i64;
    let window = LatticeWindow::new(-steps - 2, gap + steps + 2, 0, steps)?;
    let values = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let field = ArrowField { window, seed: replica_seed(seed, r), rule: ArrowRule::Random };
            let (mut a, mut b) = (0i64, gap);
            for s in 0..steps {
                if a == b {
                    break;
                }
                a += field.arrow(a, s) as i64;
                b += field.arrow(b, s) as i64;
            }
            (b - a) as f64 * delta
        })
        .collect();
    Ok(EmpiricalDistribution::from_values(values, 0.5 * delta))
}

/// Survival of a rescaled walk pair started `d` apart, at time `t`.
pub fn walk_survival(d: f64, t: f64, delta: f64, replicas: usize, seed: u64) -> Result<f64> {
    let emp = walk_gap_sample(d, t, delta, replicas, seed)?;
    Ok(1.0 - emp.atom_fraction())
}

/// Distinct-path density at rescaled time `t` of the walk web started from
/// every even site of `[-half_width, half_width]`, counted away from the
/// edges where paths from outside the interval would be missing.
pub fn density_estimate(t: f64, delta: f64, half_width: i64, seed: u64) -> Result<f64> {
    let steps = (t / (delta * delta)).round().max(1.0) as i64;
    let margin = steps + 2;
    if half_width <= margin {
        return Err(Error::InvalidParameter("interval too narrow for the time horizon".into()));
    }
    let window = LatticeWindow::new(-half_width - steps - 2, half_width + steps + 2, 0, steps)?;
    let field = sample_arrow_field(window, seed)?;
    let mut pos: Vec<i64> = window.even_row(0).filter(|x| x.abs() <= half_width).collect();
    for s in 0..steps {
        for x in pos.iter_mut() {
            *x += field.arrow(*x, s) as i64;
        }
        pos.dedup();
    }
    let inner = half_width - margin;
    let count = pos.iter().filter(|x| x.abs() <= inner).count();
    Ok(count as f64 / (2 * inner) as f64 / delta)
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub delta: f64,
    pub statistic: f64,
    pub threshold: f64,
    pub replicas: usize,
    pub seed: u64,
}

pub const EXPERIMENTS: [&str; 4] = ["walk_gap", "flow_gap", "equivalence", "density"];

/// Run the named experiment at each `delta` (decreasing) and tabulate its
/// statistic against its threshold.
///
/// * `walk_gap`, `flow_gap`: KS distance of the rescaled gap at `t = 1` from
///   gap 1 against the coalescing law; threshold `1.63 / sqrt(n) + delta`.
/// * `equivalence`: largest skeleton/splice Hausdorff distance over
///   `replicas` fields on a 16 x 64 box; threshold `2 delta`.
/// * `density`: relative error of the distinct-path density at `t = 0.25`;
///   threshold 0.03.
pub fn convergence_curve(deltas: &[f64], experiment: &str, replicas: usize, seed: u64) -> Result<Vec<CurveRow>> {
    if !EXPERIMENTS.contains(&experiment) {
        return Err(Error::UnknownExperiment(experiment.to_string()));
    }
    if deltas.is_empty() || deltas.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::InvalidParameter("deltas must be positive".into()));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("deltas must be decreasing".into()));
    }
    if replicas == 0 {
        return Err(Error::InvalidParameter("replicas must be positive".into()));
    }
    deltas
        .iter()
        .map(|&delta| {
            let (statistic, threshold) = match experiment {
                "walk_gap" => {
                    let emp = walk_gap_sample(1.0, 1.0, delta, replicas, seed)?;
                    (ks_statistic(&emp, |y| coalescing_gap_cdf(1.0, 1.0, y))?, ks_threshold(replicas, delta))
                }
                "flow_gap" => {
                    let s =
                        two_point_gap_sample(&CovarianceSpec::default(), 0.0, 1.0, 1.0, delta, None, seed, replicas)?;
                    (ks_statistic(&s.distribution, |y| coalescing_gap_cdf(1.0, 1.0, y))?, ks_threshold(replicas, delta))
                }
                "equivalence" => (equivalence_statistic(delta, replicas, seed)?, 2.0 * delta),
                "density" => {
                    let rho = density_estimate(0.25, delta, (4000.0 / delta) as i64, seed)?;
                    ((rho / coalescing_density(0.25) - 1.0).abs(), 0.03)
                }
                _ => unreachable!(),
            };
            Ok(CurveRow { delta, statistic, threshold, replicas, seed })
        })
        .collect()
}

/// Largest construction-equivalence distance over `instances` random fields
/// on a 16 x 64 lattice box with every even site in both point sets.
pub fn equivalence_statistic(delta: f64, instances: usize, seed: u64) -> Result<f64> {
    let window = LatticeWindow::new(-8, 7, 0, 63)?;
    let sites = grid_sites(&window, 1);
    let mut worst = 0.0f64;
    for r in 0..instances as u64 {
        let field = sample_arrow_field(window, replica_seed(seed, r))?;
        let dw = DoubleWebSample { field, forward_paths: Vec::new(), dual_paths: Vec::new() };
        worst = worst.max(verify_construction_equivalence(&dw, &sites, &sites, delta)?);
    }
    Ok(worst)
}
