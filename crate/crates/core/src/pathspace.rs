//! Compactified space-time, semipaths, full paths and the path metrics.
//!
//! Space-time points live in the extended plane and are compared through the
//! map `(x, t) -> (tanh(x) / (1 + |t|), tanh(t))`. Paths are piecewise linear
//! on a finite time window; beyond the last knot they continue with a constant
//! compactified coordinate, so the sup defining the path distance is attained
//! inside the window up to `1 / (1 + T)` where `T` is the window half-width.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default refinement factor applied between consecutive grid times when
/// evaluating path distances.
pub const DEFAULT_REFINE: usize = 4;

/// Number of evenly spaced anchor times inserted into every metric grid.
/// They double as probe times for the Hausdorff lower bounds.
const ANCHORS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub x: f64,
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new(x: f64, t: f64) -> Self {
        Self { x, t }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompactCoords {
    pub u: f64,
    pub v: f64,
}

/// Horizontal compactified coordinate. `tanh(±inf) = ±1` and an infinite
/// time sends the value to 0.
#[inline]
pub fn phi(x: f64, t: f64) -> f64 {
    let denom = 1.0 + t.abs();
    if denom.is_infinite() {
        0.0
    } else {
        x.tanh() / denom
    }
}

#[inline]
pub fn psi(t: f64) -> f64 {
    t.tanh()
}

/// Inverse of `phi` in `x` at fixed finite `t`; saturates to ±inf.
fn phi_inverse(u: f64, t: f64) -> f64 {
    let y = u * (1.0 + t.abs());
    if y >= 1.0 {
        f64::INFINITY
    } else if y <= -1.0 {
        f64::NEG_INFINITY
    } else {
        y.atanh()
    }
}

pub fn compactify(p: SpaceTimePoint) -> CompactCoords {
    CompactCoords { u: phi(p.x, p.t), v: psi(p.t) }
}

/// Metric on the compactified plane.
pub fn rho(p1: SpaceTimePoint, p2: SpaceTimePoint) -> f64 {
    let a = compactify(p1);
    let b = compactify(p2);
    (a.u - b.u).abs().max((a.v - b.v).abs())
}

/// Finite space-time window carried by every path set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub t_lo: f64,
    pub t_hi: f64,
    pub x_lo: f64,
    pub x_hi: f64,
}

impl Window {
    pub fn new(t_lo: f64, t_hi: f64, x_lo: f64, x_hi: f64) -> Result<Self> {
        if !(t_lo < t_hi) || !(x_lo <= x_hi) {
            return Err(Error::InvalidParameter(format!("window [{t_lo}, {t_hi}] x [{x_lo}, {x_hi}] is empty")));
        }
        Ok(Self { t_lo, t_hi, x_lo, x_hi })
    }

    /// Bound on how much of the sup in the path distance can sit outside the
    /// window: `phi` is at most `1 / (1 + |t|)` in magnitude there.
    pub fn truncation_bound(&self) -> f64 {
        if self.t_lo <= 0.0 && self.t_hi >= 0.0 {
            2.0 / (1.0 + self.t_lo.abs().min(self.t_hi.abs()))
        } else {
            2.0
        }
    }

    pub fn contains_time(&self, t: f64) -> bool {
        t >= self.t_lo && t <= self.t_hi
    }

    fn anchors(&self) -> impl Iterator<Item = f64> + '_ {
        let span = self.t_hi - self.t_lo;
        (0..=ANCHORS).map(move |k| self.t_lo + span * k as f64 / ANCHORS as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

/// A piecewise-linear semipath. Knots are `[t, x]` with strictly increasing
/// times; a forward semipath starts at its first knot, a backward one at its
/// last.
#[derive(Debug, Clone, PartialEq)]
pub struct Semipath {
    direction: Direction,
    knots: Vec<[f64; 2]>,
}

fn check_knots(knots: &[[f64; 2]]) -> Result<()> {
    if knots.is_empty() {
        return Err(Error::InvalidKnots("no knots".into()));
    }
    for k in knots {
        if k[0].is_nan() || k[1].is_nan() || k[0].is_infinite() {
            return Err(Error::InvalidKnots(format!("bad knot {k:?}")));
        }
    }
    if knots.windows(2).any(|w| !(w[0][0] < w[1][0])) {
        return Err(Error::InvalidKnots("knot times not strictly increasing".into()));
    }
    Ok(())
}

#[inline]
fn lerp(a: [f64; 2], b: [f64; 2], t: f64) -> f64 {
    if a[1] == b[1] {
        return a[1];
    }
    let s = (t - a[0]) / (b[0] - a[0]);
    a[1] + s * (b[1] - a[1])
}

impl Semipath {
    pub fn new(direction: Direction, knots: Vec<[f64; 2]>) -> Result<Self> {
        check_knots(&knots)?;
        Ok(Self { direction, knots })
    }

    pub fn forward(knots: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(Direction::Forward, knots)
    }

    pub fn backward(knots: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(Direction::Backward, knots)
    }

    /// Constant path at `x` with a knot at each of `times` (increasing).
    pub fn constant(direction: Direction, x: f64, times: &[f64]) -> Result<Self> {
        Self::new(direction, times.iter().map(|&t| [t, x]).collect())
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn knots(&self) -> &[[f64; 2]] {
        &self.knots
    }

    pub fn t_min(&self) -> f64 {
        self.knots[0][0]
    }

    pub fn t_max(&self) -> f64 {
        self.knots[self.knots.len() - 1][0]
    }

    /// Start time: first knot going forward, last knot going backward.
    pub fn start_time(&self) -> f64 {
        match self.direction {
            Direction::Forward => self.t_min(),
            Direction::Backward => self.t_max(),
        }
    }

    pub fn start_value(&self) -> f64 {
        match self.direction {
            Direction::Forward => self.knots[0][1],
            Direction::Backward => self.knots[self.knots.len() - 1][1],
        }
    }

    fn interp(&self, t: f64) -> f64 {
        let k = &self.knots;
        let i = k.partition_point(|p| p[0] <= t);
        if i == 0 {
            k[0][1]
        } else if i == k.len() {
            k[k.len() - 1][1]
        } else {
            lerp(k[i - 1], k[i], t)
        }
    }

    /// Compactified horizontal coordinate at time `t`.
    ///
    /// Inside the knot range this is `phi` of the interpolant. On the far
    /// side (after the end of a forward path, before the end of a backward
    /// one) the compactified value is frozen; on the near side the start
    /// value is held, as for semipaths evaluated before their start time.
    pub fn compact_at(&self, t: f64) -> f64 {
        let (lo, hi) = (self.t_min(), self.t_max());
        if t >= lo && t <= hi {
            return phi(self.interp(t), t);
        }
        let first = self.knots[0];
        let last = self.knots[self.knots.len() - 1];
        match (self.direction, t < lo) {
            (Direction::Forward, true) => phi(first[1], t),
            (Direction::Forward, false) => phi(last[1], last[0]),
            (Direction::Backward, true) => phi(first[1], first[0]),
            (Direction::Backward, false) => phi(last[1], t),
        }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        if t >= self.t_min() && t <= self.t_max() {
            self.interp(t)
        } else {
            let u = self.compact_at(t);
            let end = if t < self.t_min() { self.knots[0] } else { self.knots[self.knots.len() - 1] };
            if end[1].is_infinite() {
                end[1]
            } else {
                phi_inverse(u, t)
            }
        }
    }

    /// Forward semipath obtained by cutting at `t` and keeping the part at or
    /// after `t`. `None` if `t` is outside the knot range.
    pub fn forward_from(&self, t: f64) -> Option<Semipath> {
        if t < self.t_min() || t > self.t_max() {
            return None;
        }
        let i = self.knots.partition_point(|p| p[0] < t);
        let mut knots = Vec::with_capacity(self.knots.len() - i + 1);
        if self.knots[i][0] != t {
            knots.push([t, self.interp(t)]);
        }
        knots.extend_from_slice(&self.knots[i..]);
        Some(Semipath { direction: Direction::Forward, knots })
    }

    fn key_into(&self, out: &mut Vec<u64>) {
        out.push(self.direction as u64);
        out.push(self.knots.len() as u64);
        for k in &self.knots {
            out.push(k[0].to_bits());
            out.push(k[1].to_bits());
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trivial {
    None,
    Plus,
    Minus,
}

/// Bi-infinite path: a backward semipath up to `splice_t`, a forward one
/// after it.
#[derive(Debug, Clone, PartialEq)]
pub struct FullPath {
    forward: Semipath,
    backward: Semipath,
    splice_t: f64,
    trivial: Trivial,
    window: Window,
}

/// Join a backward semipath and a forward semipath at their common start.
/// Start times and start values must agree exactly.
pub fn splice(f: &Semipath, g: &Semipath, t_star: f64, window: Window) -> Result<FullPath> {
    if f.direction() != Direction::Forward || g.direction() != Direction::Backward {
        return Err(Error::SpliceMismatch("expected a forward and a backward semipath".into()));
    }
    if f.start_time() != t_star || g.start_time() != t_star {
        return Err(Error::SpliceMismatch(format!(
            "start times {} / {} differ from splice time {t_star}",
            f.start_time(),
            g.start_time()
        )));
    }
    if f.start_value() != g.start_value() {
        return Err(Error::SpliceMismatch(format!(
            "values {} / {} differ at the splice time",
            f.start_value(),
            g.start_value()
        )));
    }
    Ok(FullPath { forward: f.clone(), backward: g.clone(), splice_t: t_star, trivial: Trivial::None, window })
}

impl FullPath {
    /// The identically `+inf` (`sign > 0`) or `-inf` path. Its nominal splice
    /// time is 0 clamped into the window.
    pub fn trivial(sign: i8, window: Window) -> Self {
        let v = if sign > 0 { f64::INFINITY } else { f64::NEG_INFINITY };
        let s = 0f64.clamp(window.t_lo, window.t_hi);
        let fwd = if s < window.t_hi { vec![[s, v], [window.t_hi, v]] } else { vec![[s, v]] };
        let bwd = if s > window.t_lo { vec![[window.t_lo, v], [s, v]] } else { vec![[s, v]] };
        FullPath {
            forward: Semipath { direction: Direction::Forward, knots: fwd },
            backward: Semipath { direction: Direction::Backward, knots: bwd },
            splice_t: s,
            trivial: if sign > 0 { Trivial::Plus } else { Trivial::Minus },
            window,
        }
    }

    pub fn forward(&self) -> &Semipath {
        &self.forward
    }

    pub fn backward(&self) -> &Semipath {
        &self.backward
    }

    pub fn splice_t(&self) -> f64 {
        self.splice_t
    }

    pub fn splice_x(&self) -> f64 {
        self.forward.start_value()
    }

    pub fn trivial_flag(&self) -> Trivial {
        self.trivial
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn with_window(mut self, window: Window) -> Self {
        self.window = window;
        self
    }

    pub fn compact_at(&self, t: f64) -> f64 {
        match self.trivial {
            Trivial::Plus => phi(f64::INFINITY, t),
            Trivial::Minus => phi(f64::NEG_INFINITY, t),
            Trivial::None => {
                if t >= self.splice_t {
                    self.forward.compact_at(t)
                } else {
                    self.backward.compact_at(t)
                }
            }
        }
    }

    /// Forward semipath starting at `(self(t), t)`.
    pub fn cut(&self, t: f64) -> Option<Semipath> {
        if self.trivial != Trivial::None {
            return None;
        }
        if t >= self.splice_t {
            self.forward.forward_from(t)
        } else {
            if t < self.backward.t_min() {
                return None;
            }
            let i = self.backward.knots.partition_point(|p| p[0] < t);
            let mut knots = Vec::new();
            if self.backward.knots[i][0] != t {
                knots.push([t, self.backward.interp(t)]);
            }
            knots.extend_from_slice(&self.backward.knots[i..]);
            knots.extend_from_slice(&self.forward.knots[1..]);
            Some(Semipath { direction: Direction::Forward, knots })
        }
    }

    fn key_into(&self, out: &mut Vec<u64>) {
        out.push(self.trivial as u64);
        out.push(self.splice_t.to_bits());
        self.forward.key_into(out);
        self.backward.key_into(out);
    }
}

/// Piecewise-linear evaluation of a full path; beyond the knots the
/// compactified continuation is inverted.
pub fn eval_path(p: &FullPath, t: f64) -> f64 {
    p.value_at(t)
}

/// Anything with a time domain, knot times and values: the input of the
/// crossing test.
pub trait PathLike {
    fn domain(&self) -> (f64, f64);
    fn push_knot_times(&self, out: &mut Vec<f64>);
    fn value_at(&self, t: f64) -> f64;
}

impl PathLike for Semipath {
    fn domain(&self) -> (f64, f64) {
        (self.t_min(), self.t_max())
    }

    fn push_knot_times(&self, out: &mut Vec<f64>) {
        out.extend(self.knots.iter().map(|k| k[0]));
    }

    fn value_at(&self, t: f64) -> f64 {
        Semipath::value_at(self, t)
    }
}

impl PathLike for FullPath {
    fn domain(&self) -> (f64, f64) {
        (self.backward.t_min(), self.forward.t_max())
    }

    fn push_knot_times(&self, out: &mut Vec<f64>) {
        self.backward.push_knot_times(out);
        self.forward.push_knot_times(out);
    }

    fn value_at(&self, t: f64) -> f64 {
        match self.trivial {
            Trivial::Plus => f64::INFINITY,
            Trivial::Minus => f64::NEG_INFINITY,
            Trivial::None => {
                if t >= self.splice_t {
                    self.forward.value_at(t)
                } else {
                    self.backward.value_at(t)
                }
            }
        }
    }
}

/// True iff the paths take strictly opposite orders at two times of their
/// common domain. Touching never counts. Exact for piecewise-linear inputs
/// since the difference is linear between consecutive union knots.
pub fn crossing_detect<A: PathLike + ?Sized, B: PathLike + ?Sized>(a: &A, b: &B) -> Result<bool> {
    let (a_lo, a_hi) = a.domain();
    let (b_lo, b_hi) = b.domain();
    let lo = a_lo.max(b_lo);
    let hi = a_hi.min(b_hi);
    if lo > hi {
        return Err(Error::DisjointDomains);
    }
    let mut times = Vec::new();
    a.push_knot_times(&mut times);
    b.push_knot_times(&mut times);
    times.push(lo);
    times.push(hi);
    let mut less = false;
    let mut greater = false;
    for &t in times.iter().filter(|&&t| t >= lo && t <= hi) {
        match a.value_at(t).partial_cmp(&b.value_at(t)) {
            Some(std::cmp::Ordering::Less) => less = true,
            Some(std::cmp::Ordering::Greater) => greater = true,
            _ => {}
        }
        if less && greater {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Metric grid: union of knot times inside the window, the window anchors
/// and `t = 0` when inside, refined `refine`-fold between neighbours.
fn metric_grid(mut times: Vec<f64>, window: &Window, refine: usize) -> Vec<f64> {
    times.retain(|&t| window.contains_time(t));
    times.extend(window.anchors());
    if window.contains_time(0.0) {
        times.push(0.0);
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();
    let refine = refine.max(1);
    if refine == 1 || times.len() < 2 {
        return times;
    }
    let mut out = Vec::with_capacity(times.len() * refine);
    for w in times.windows(2) {
        for k in 0..refine {
            out.push(w[0] + (w[1] - w[0]) * k as f64 / refine as f64);
        }
    }
    out.push(times[times.len() - 1]);
    out
}

/// Sup of `gap` over the window, seeded by the metric grid.
///
/// Grid-only sups drift by up to ~1e-3 from pair to pair and break the
/// triangle inequality, so cells that may hide a larger value are searched.
/// Inside a cell both paths are smooth in compact coordinates and `gap` is
/// `lipschitz(a, b)`-Lipschitz on the cell `[a, b]`, which bounds what the
/// cell can contain. The result never falls below the grid value.
fn grid_sup<F, L>(grid: &[f64], gap: F, lipschitz: L, floor: f64, bound: f64) -> f64
where
    F: Fn(f64) -> f64,
    L: Fn(f64, f64) -> f64,
{
    let mut sup = floor;
    let mut values = Vec::with_capacity(grid.len());
    for &t in grid {
        let v = gap(t);
        sup = sup.max(v);
        if sup > bound {
            return sup;
        }
        values.push(v);
    }
    let mut cells: Vec<(f64, f64, usize)> = (0..values.len().saturating_sub(1))
        .map(|k| {
            let (a, b) = (grid[k], grid[k + 1]);
            let l = lipschitz(a, b);
            (0.5 * (values[k] + values[k + 1] + l * (b - a)), l, k)
        })
        .filter(|&(ub, _, _)| ub > sup)
        .collect();
    cells.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    for (ub, l, k) in cells {
        if ub <= sup {
            break;
        }
        let (mut a, mut b) = (grid[k], grid[k + 1]);
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let (mut fc, mut fd) = (gap(c), gap(d));
        sup = sup.max(fc).max(fd);
        while b - a > 1e-14 * (1.0 + a.abs().max(b.abs())) && fc.max(fd) + l * (b - a) > sup {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = gap(c);
                sup = sup.max(fc);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = gap(d);
                sup = sup.max(fd);
            }
            if sup > bound {
                return sup;
            }
        }
    }
    sup
}

/// Bound on `|d/dt phi(x(t), t)|` over `[a, b]` for a path linear there, or
/// whose compactified value is held or frozen there.
fn compact_lipschitz<P: PathLike + ?Sized>(p: &P, a: f64, b: f64) -> f64 {
    let (x0, x1) = (p.value_at(a), p.value_at(b));
    let t_near = if a < 0.0 && b > 0.0 { 0.0 } else { a.abs().min(b.abs()) };
    let damp = 1.0 / (1.0 + t_near);
    let slope = if x0 == x1 || !x0.is_finite() || !x1.is_finite() {
        0.0
    } else {
        let x_near = if (x0 < 0.0) != (x1 < 0.0) { 0.0 } else { x0.abs().min(x1.abs()) };
        let sech = 1.0 / x_near.cosh();
        (x1 - x0).abs() / (b - a) * sech * sech * damp
    };
    slope + damp * damp
}

/// Shared behaviour of the path types that populate a [`PathSet`].
pub trait PathMetric: Clone + Send + Sync {
    /// Sup distance on the metric grid. Once the running sup exceeds
    /// `bound` evaluation may stop and return the partial value.
    fn distance_bounded(&self, other: &Self, window: &Window, refine: usize, bound: f64) -> f64;

    fn distance(&self, other: &Self, window: &Window, refine: usize) -> f64 {
        self.distance_bounded(other, window, refine, f64::INFINITY)
    }

    /// Compactified value at an anchor time; anchors are part of every grid
    /// so differences of probes bound the distance from below.
    fn probe(&self, t: f64) -> f64;

    /// Extra lower-bound term not captured by the probes.
    fn offset(&self) -> f64 {
        0.0
    }

    /// Exact identity, bit for bit.
    fn key(&self) -> Vec<u64>;
}

impl PathMetric for FullPath {
    fn distance_bounded(&self, other: &Self, window: &Window, refine: usize, bound: f64) -> f64 {
        let mut times = Vec::new();
        self.push_knot_times(&mut times);
        other.push_knot_times(&mut times);
        let grid = metric_grid(times, window, refine);
        let lipschitz = |a, b| compact_lipschitz(self, a, b) + compact_lipschitz(other, a, b);
        grid_sup(&grid, |t| (self.compact_at(t) - other.compact_at(t)).abs(), lipschitz, 0.0, bound)
    }

    fn probe(&self, t: f64) -> f64 {
        self.compact_at(t)
    }

    fn key(&self) -> Vec<u64> {
        let mut k = Vec::new();
        self.key_into(&mut k);
        k
    }
}

impl PathMetric for Semipath {
    fn distance_bounded(&self, other: &Self, window: &Window, refine: usize, bound: f64) -> f64 {
        let sup = (psi(self.start_time()) - psi(other.start_time())).abs();
        if sup > bound {
            return sup;
        }
        let mut times = Vec::new();
        self.push_knot_times(&mut times);
        other.push_knot_times(&mut times);
        let grid = metric_grid(times, window, refine);
        let lipschitz = |a, b| compact_lipschitz(self, a, b) + compact_lipschitz(other, a, b);
        grid_sup(&grid, |t| (self.compact_at(t) - other.compact_at(t)).abs(), lipschitz, sup, bound)
    }

    fn probe(&self, t: f64) -> f64 {
        self.compact_at(t)
    }

    fn offset(&self) -> f64 {
        psi(self.start_time())
    }

    fn key(&self) -> Vec<u64> {
        let mut k = Vec::new();
        self.key_into(&mut k);
        k
    }
}

/// Distance between full paths on a common window.
pub fn d_f(a: &FullPath, b: &FullPath) -> Result<f64> {
    d_f_refined(a, b, DEFAULT_REFINE)
}

pub fn d_f_refined(a: &FullPath, b: &FullPath, refine: usize) -> Result<f64> {
    if a.window != b.window {
        return Err(Error::WindowMismatch);
    }
    Ok(a.distance(b, &a.window, refine))
}

/// Finite set of paths sharing one window.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet<P> {
    pub window: Window,
    pub members: Vec<P>,
}

impl<P: PathMetric> PathSet<P> {
    pub fn new(window: Window, members: Vec<P>) -> Self {
        Self { window, members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Remove exact duplicates, keeping first occurrences.
    pub fn dedup(&mut self) {
        let mut seen = HashSet::new();
        self.members.retain(|p| seen.insert(p.key()));
    }

    pub fn contains_exact(&self, p: &P) -> bool {
        let k = p.key();
        self.members.iter().any(|q| q.key() == k)
    }
}

/// `sup_{a in A} inf_{b in B} d(a, b)`.
///
/// Exact members short-circuit to 0. Otherwise candidates are visited in
/// order of a probe-based lower bound and the scan stops once the bound
/// reaches the best distance found.
pub fn directed_hausdorff<P: PathMetric>(a: &PathSet<P>, b: &PathSet<P>, refine: usize) -> Result<f64> {
    if a.window != b.window {
        return Err(Error::WindowMismatch);
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("path set"));
    }
    let window = a.window;
    let anchors: Vec<f64> = window.anchors().collect();
    let probes = |p: &P| -> Vec<f64> {
        let mut v: Vec<f64> = anchors.iter().map(|&t| p.probe(t)).collect();
        v.push(p.offset());
        v
    };
    let b_keys: HashSet<Vec<u64>> = b.members.iter().map(|p| p.key()).collect();
    let b_probes: Vec<Vec<f64>> = b.members.par_iter().map(probes).collect();

    let worst = a
        .members
        .par_iter()
        .map(|p| {
            if b_keys.contains(&p.key()) {
                return 0.0;
            }
            let pp = probes(p);
            let mut order: Vec<(f64, usize)> = b_probes
                .iter()
                .enumerate()
                .map(|(j, q)| {
                    let lb = pp.iter().zip(q).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
                    (lb, j)
                })
                .collect();
            order.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
            let mut best = f64::INFINITY;
            for (lb, j) in order {
                if lb >= best {
                    break;
                }
                let d = p.distance_bounded(&b.members[j], &window, refine, best);
                if d < best {
                    best = d;
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// Hausdorff distance induced by the path metric.
pub fn hausdorff<P: PathMetric>(a: &PathSet<P>, b: &PathSet<P>) -> Result<f64> {
    hausdorff_refined(a, b, DEFAULT_REFINE)
}

pub fn hausdorff_refined<P: PathMetric>(a: &PathSet<P>, b: &PathSet<P>, refine: usize) -> Result<f64> {
    let ab = directed_hausdorff(a, b, refine)?;
    let ba = directed_hausdorff(b, a, refine)?;
    Ok(ab.max(ba))
}

// ---------------------------------------------------------------------------
// JSON

/// Extended real that encodes ±inf as the strings `"inf"` / `"-inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtF64(pub f64);

impl Serialize for ExtF64 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else if self.0 == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for ExtF64 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(ExtF64(v)),
            Raw::Str(s) => match s.as_str() {
                "inf" | "+inf" => Ok(ExtF64(f64::INFINITY)),
                "-inf" => Ok(ExtF64(f64::NEG_INFINITY)),
                other => Err(serde::de::Error::custom(format!("bad extended real `{other}`"))),
            },
        }
    }
}

fn ext_knots(k: &[[f64; 2]]) -> Vec<[ExtF64; 2]> {
    k.iter().map(|p| [ExtF64(p[0]), ExtF64(p[1])]).collect()
}

fn raw_knots(k: &[[ExtF64; 2]]) -> Vec<[f64; 2]> {
    k.iter().map(|p| [p[0].0, p[1].0]).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FullPathDoc {
    pub splice_t: ExtF64,
    pub knots_fwd: Vec<[ExtF64; 2]>,
    pub knots_bwd: Vec<[ExtF64; 2]>,
    pub trivial: Trivial,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemipathDoc {
    pub direction: Direction,
    pub t0: ExtF64,
    pub knots: Vec<[ExtF64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathSetDoc<T> {
    pub window: [ExtF64; 4],
    pub paths: Vec<T>,
}

impl Window {
    pub fn to_doc(&self) -> [ExtF64; 4] {
        [ExtF64(self.t_lo), ExtF64(self.t_hi), ExtF64(self.x_lo), ExtF64(self.x_hi)]
    }

    pub fn from_doc(d: &[ExtF64; 4]) -> Result<Self> {
        Window::new(d[0].0, d[1].0, d[2].0, d[3].0)
    }
}

impl FullPath {
    pub fn to_doc(&self) -> FullPathDoc {
        FullPathDoc {
            splice_t: ExtF64(self.splice_t),
            knots_fwd: ext_knots(&self.forward.knots),
            knots_bwd: ext_knots(&self.backward.knots),
            trivial: self.trivial,
        }
    }

    pub fn from_doc(doc: &FullPathDoc, window: Window) -> Result<Self> {
        match doc.trivial {
            Trivial::Plus => Ok(FullPath::trivial(1, window)),
            Trivial::Minus => Ok(FullPath::trivial(-1, window)),
            Trivial::None => {
                let f = Semipath::forward(raw_knots(&doc.knots_fwd))?;
                let g = Semipath::backward(raw_knots(&doc.knots_bwd))?;
                splice(&f, &g, doc.splice_t.0, window)
            }
        }
    }
}

impl Semipath {
    pub fn to_doc(&self) -> SemipathDoc {
        SemipathDoc { direction: self.direction, t0: ExtF64(self.start_time()), knots: ext_knots(&self.knots) }
    }

    pub fn from_doc(doc: &SemipathDoc) -> Result<Self> {
        let p = Semipath::new(doc.direction, raw_knots(&doc.knots))?;
        if p.start_time() != doc.t0.0 {
            return Err(Error::InvalidKnots("t0 does not match the knots".into()));
        }
        Ok(p)
    }
}

impl PathSet<FullPath> {
    pub fn to_doc(&self) -> PathSetDoc<FullPathDoc> {
        PathSetDoc { window: self.window.to_doc(), paths: self.members.iter().map(FullPath::to_doc).collect() }
    }

    pub fn from_doc(doc: &PathSetDoc<FullPathDoc>) -> Result<Self> {
        let window = Window::from_doc(&doc.window)?;
        let members = doc.paths.iter().map(|p| FullPath::from_doc(p, window)).collect::<Result<Vec<_>>>()?;
        Ok(PathSet::new(window, members))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_doc())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: PathSetDoc<FullPathDoc> = serde_json::from_str(s)?;
        Self::from_doc(&doc)
    }
}

impl PathSet<Semipath> {
    pub fn to_doc(&self) -> PathSetDoc<SemipathDoc> {
        PathSetDoc { window: self.window.to_doc(), paths: self.members.iter().map(Semipath::to_doc).collect() }
    }

    pub fn from_doc(doc: &PathSetDoc<SemipathDoc>) -> Result<Self> {
        let window = Window::from_doc(&doc.window)?;
        let members = doc.paths.iter().map(Semipath::from_doc).collect::<Result<Vec<_>>>()?;
        Ok(PathSet::new(window, members))
    }
}
