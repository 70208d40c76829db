//! Full webs built from a lattice double web.
//!
//! Two constructions are provided. The skeleton one joins, at each chosen
//! even site, the forward path from the site with the dual path from the odd
//! site directly below it. The splice one enumerates at each site every
//! backward continuation compatible with the local picture: straight down,
//! or along an incoming arrow to the dual site beside it. Both produce
//! lattice full paths, kept in integer form for exact crossing scans and
//! rescaled into [`FullPath`]s for metric comparisons.

use std::collections::{BTreeSet, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discreteweb::{backward_path, forward_path, is_even, rescale, ArrowField, DoubleWebSample, LatticeWindow};
use crate::error::{Error, Result};
use crate::pathspace::{
    crossing_detect, hausdorff, splice, ExtF64, FullPath, FullPathDoc, PathMetric, PathSet, Semipath, SpaceTimePoint,
    Window,
};

/// Numbers of incoming and outgoing forward paths at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PointType {
    pub m_in: u32,
    pub m_out: u32,
}

const VALID_TYPES: [(u32, u32); 6] = [(0, 1), (1, 1), (0, 2), (1, 2), (2, 1), (0, 3)];

impl PointType {
    pub fn new(m_in: u32, m_out: u32) -> Result<Self> {
        if VALID_TYPES.contains(&(m_in, m_out)) {
            Ok(Self { m_in, m_out })
        } else {
            Err(Error::InvalidPointType { m_in, m_out })
        }
    }

    pub fn all() -> impl Iterator<Item = PointType> {
        VALID_TYPES.iter().map(|&(m_in, m_out)| PointType { m_in, m_out })
    }

    fn checked(self) -> Result<Self> {
        Self::new(self.m_in, self.m_out)
    }

    fn is_one_two(self) -> bool {
        self.m_in == 1 && self.m_out == 2
    }
}

/// Number of full paths with their splice at a point of the given type.
pub fn splice_count(ptype: PointType) -> Result<usize> {
    let p = ptype.checked()?;
    if p.is_one_two() {
        Ok(3)
    } else {
        Ok((p.m_in as usize + 1) * p.m_out as usize)
    }
}

/// Local count of ways a full path arriving at a point can continue.
pub fn continuation_count(ptype: PointType, passing_through: bool) -> Result<usize> {
    let p = ptype.checked()?;
    if passing_through {
        Ok(2 * p.m_out as usize - 1)
    } else if p.m_out == 1 || p.is_one_two() {
        Ok(1)
    } else {
        Err(Error::InvalidParameter(format!(
            "a path not passing through a ({}, {}) point has no unique continuation",
            p.m_in, p.m_out
        )))
    }
}

/// Local candidates at a splice point.
///
/// `incoming` holds the backward-direction pieces of the forward paths that
/// enter the point, and `continuation[k]` the index of the forward candidate
/// that incoming strand `k` continues along.
#[derive(Debug, Clone)]
pub struct SpliceConfig {
    pub point: SpaceTimePoint,
    pub ptype: PointType,
    pub forward_candidates: Vec<Semipath>,
    pub backward_candidates: Vec<Semipath>,
    pub incoming: Vec<Semipath>,
    pub continuation: Vec<usize>,
    pub window: Window,
}

impl SpliceConfig {
    /// Straight-line fan through `point`: forward candidates spread over
    /// slopes `2i - (m_out - 1)`, backward candidates over offsets
    /// `2j - m_in` and incoming strands between consecutive backward ones.
    /// Every incoming strand continues along the rightmost forward path.
    pub fn fan(ptype: PointType, point: SpaceTimePoint, window: Window) -> Result<Self> {
        let p = ptype.checked()?;
        let (x, t) = (point.x, point.t);
        let fwd = |slope: f64| Semipath::forward(vec![[t, x], [t + 1.0, x + slope]]);
        let bwd = |offset: f64| Semipath::backward(vec![[t - 1.0, x + offset], [t, x]]);
        let forward_candidates =
            (0..p.m_out).map(|i| fwd(2.0 * i as f64 - (p.m_out as f64 - 1.0))).collect::<Result<Vec<_>>>()?;
        let backward_candidates =
            (0..=p.m_in).map(|j| bwd(2.0 * j as f64 - p.m_in as f64)).collect::<Result<Vec<_>>>()?;
        let incoming = (0..p.m_in).map(|k| bwd(2.0 * k as f64 - p.m_in as f64 + 1.0)).collect::<Result<Vec<_>>>()?;
        let continuation = vec![p.m_out as usize - 1; p.m_in as usize];
        Ok(Self { point, ptype: p, forward_candidates, backward_candidates, incoming, continuation, window })
    }

    fn validate(&self) -> Result<()> {
        let p = self.ptype.checked()?;
        if self.forward_candidates.len() != p.m_out as usize {
            return Err(Error::CandidateMismatch(format!(
                "{} forward candidates for m_out = {}",
                self.forward_candidates.len(),
                p.m_out
            )));
        }
        if self.backward_candidates.len() != p.m_in as usize + 1 {
            return Err(Error::CandidateMismatch(format!(
                "{} backward candidates for m_in = {}",
                self.backward_candidates.len(),
                p.m_in
            )));
        }
        for group in [&self.forward_candidates, &self.backward_candidates] {
            for i in 0..group.len() {
                for j in i + 1..group.len() {
                    if crossing_detect(&group[i], &group[j])? {
                        return Err(Error::CandidatesCross);
                    }
                }
            }
        }
        if p.is_one_two() {
            if self.incoming.len() != 1 || self.continuation.len() != 1 {
                return Err(Error::CandidateMismatch(
                    "a (1, 2) point needs one incoming strand and its continuation".into(),
                ));
            }
            if self.continuation[0] >= self.forward_candidates.len() {
                return Err(Error::CandidateMismatch("continuation index out of range".into()));
            }
        }
        Ok(())
    }

    /// The forward path through a (1, 2) point: the incoming strand joined
    /// to the outgoing candidate it continues along.
    pub fn passing_path(&self) -> Result<FullPath> {
        let f = &self.forward_candidates[self.continuation[0]];
        splice(f, &self.incoming[0], self.point.t, self.window)
    }
}

/// All splicings of forward and backward candidates at the point, leaving
/// out at a (1, 2) point the single pair that crosses the passing path.
pub fn enumerate_splices(cfg: &SpliceConfig) -> Result<Vec<FullPath>> {
    cfg.validate()?;
    let t = cfg.point.t;
    let mut out = Vec::with_capacity(cfg.forward_candidates.len() * cfg.backward_candidates.len());
    for f in &cfg.forward_candidates {
        for g in &cfg.backward_candidates {
            out.push(splice(f, g, t, cfg.window)?);
        }
    }
    if cfg.ptype.is_one_two() {
        let passing = cfg.passing_path()?;
        let mut flagged = Vec::new();
        for (k, p) in out.iter().enumerate() {
            if crossing_detect(p, &passing)? {
                flagged.push(k);
            }
        }
        if flagged.len() != 1 {
            return Err(Error::CandidateMismatch(format!(
                "{} splicings cross the passing path, expected exactly one",
                flagged.len()
            )));
        }
        out.remove(flagged[0]);
    }
    Ok(out)
}

/// Lattice full path: integer positions at consecutive times from `t_lo`,
/// with a designated even splice site.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LatticeFullPath {
    pub splice: (i64, i64),
    pub t_lo: i64,
    pub positions: Vec<i64>,
}

impl LatticeFullPath {
    pub fn t_hi(&self) -> i64 {
        self.t_lo + self.positions.len() as i64 - 1
    }

    pub fn position_at(&self, t: i64) -> Option<i64> {
        if t < self.t_lo || t > self.t_hi() {
            None
        } else {
            Some(self.positions[(t - self.t_lo) as usize])
        }
    }

    /// Exact crossing test; positions are linear between integer times.
    pub fn crosses(&self, other: &LatticeFullPath) -> bool {
        let lo = self.t_lo.max(other.t_lo);
        let hi = self.t_hi().min(other.t_hi());
        let (mut less, mut greater) = (false, false);
        for t in lo..=hi {
            let d = self.positions[(t - self.t_lo) as usize] - other.positions[(t - other.t_lo) as usize];
            less |= d < 0;
            greater |= d > 0;
        }
        less && greater
    }

    fn from_parts(splice: (i64, i64), below: &[(i64, i64)], forward: &[i64]) -> Self {
        // `below` is the backward part in walking order, ending just under the splice row.
        let t_lo = below.last().map_or(splice.1, |s| s.1);
        let mut positions: Vec<i64> = below.iter().rev().map(|s| s.0).collect();
        positions.extend_from_slice(forward);
        Self { splice, t_lo, positions }
    }

    /// Diffusively rescaled [`FullPath`]; knot values match
    /// [`crate::discreteweb::rescale`] bit for bit.
    pub fn rescale(&self, delta: f64, window: Window) -> Result<FullPath> {
        let d2 = delta * delta;
        let knot = |t: i64| [t as f64 * d2, self.positions[(t - self.t_lo) as usize] as f64 * delta];
        let ts = self.splice.1;
        let g = Semipath::backward((self.t_lo..=ts).map(knot).collect())?;
        let f = Semipath::forward((ts..=self.t_hi()).map(knot).collect())?;
        splice(&f, &g, ts as f64 * d2, window)
    }
}

/// Continuum window matching a lattice window at scale `delta`, including
/// the dual columns.
pub fn continuum_window(w: &LatticeWindow, delta: f64) -> Window {
    let d2 = delta * delta;
    Window {
        t_lo: w.t_lo as f64 * d2,
        t_hi: w.t_hi as f64 * d2,
        x_lo: (w.x_lo - 1) as f64 * delta,
        x_hi: (w.x_hi + 1) as f64 * delta,
    }
}

/// Nearest even lattice site to a point given in lattice units. Time
/// rounds first, then space; ties go toward `-inf`.
pub fn snap_site(p: SpaceTimePoint) -> (i64, i64) {
    let round_down_ties = |v: f64| (v - 0.5).ceil() as i64;
    let t = round_down_ties(p.t);
    let x = if is_even(0, t) { 2 * round_down_ties(p.x / 2.0) } else { 2 * round_down_ties((p.x - 1.0) / 2.0) + 1 };
    (x, t)
}

/// Even sites of the window on a grid of lattice pitch `pitch`, snapped.
pub fn grid_sites(w: &LatticeWindow, pitch: i64) -> Vec<(i64, i64)> {
    let pitch = pitch.max(1);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for t in (w.t_lo..=w.t_hi).step_by(pitch as usize) {
        for x in (w.x_lo..=w.x_hi).step_by(pitch as usize) {
            let s = snap_site(SpaceTimePoint::new(x as f64, t as f64));
            let s = if s.0 < w.x_lo { (s.0 + 2, s.1) } else { s };
            if w.contains(s.0, s.1) && seen.insert(s) {
                out.push(s);
            }
        }
    }
    out
}

fn check_site(field: &ArrowField, (x, t): (i64, i64)) -> Result<()> {
    if !field.window.contains(x, t) {
        return Err(Error::OutsideWindow { x, t });
    }
    if !is_even(x, t) {
        return Err(Error::Parity { x, t, what: "splice site" });
    }
    Ok(())
}

/// Skeleton path at an even site: the dual from the site below, then the
/// forward path from the site.
pub fn skeleton_path(field: &ArrowField, site: (i64, i64)) -> Result<LatticeFullPath> {
    check_site(field, site)?;
    let (x, t) = site;
    let fwd = forward_path(field, site)?.positions_by_time();
    let below = if t > field.window.t_lo { backward_path(field, (x, t - 1))?.sites() } else { Vec::new() };
    Ok(LatticeFullPath::from_parts(site, &below, &fwd))
}

/// Dual sites one row below `site` that a full path may pass through
/// before splicing there: straight below, plus the far side of each
/// incoming arrow from inside the window. Returns `(sites, m_in)`.
pub fn backward_junctions(field: &ArrowField, site: (i64, i64)) -> (Vec<i64>, u32) {
    let (x, t) = site;
    let w = field.window;
    if t <= w.t_lo {
        return (Vec::new(), 0);
    }
    let mut sites = Vec::with_capacity(3);
    let mut m_in = 0;
    if x > w.x_lo && field.arrow(x - 1, t - 1) == 1 {
        sites.push(x - 2);
        m_in += 1;
    }
    sites.push(x);
    if x < w.x_hi && field.arrow(x + 1, t - 1) == -1 {
        sites.push(x + 2);
        m_in += 1;
    }
    (sites, m_in)
}

/// Splice candidates at an even site as lattice paths, and the local type.
pub fn splice_paths(field: &ArrowField, site: (i64, i64)) -> Result<(Vec<LatticeFullPath>, PointType)> {
    check_site(field, site)?;
    let t = site.1;
    let fwd = forward_path(field, site)?.positions_by_time();
    let (junctions, m_in) = backward_junctions(field, site);
    let ptype = PointType::new(m_in, 1)?;
    if junctions.is_empty() {
        return Ok((vec![LatticeFullPath::from_parts(site, &[], &fwd)], ptype));
    }
    let paths = junctions
        .iter()
        .map(|&j| Ok(LatticeFullPath::from_parts(site, &backward_path(field, (j, t - 1))?.sites(), &fwd)))
        .collect::<Result<Vec<_>>>()?;
    Ok((paths, ptype))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    Skeleton,
    SpliceEnum,
}

impl std::str::FromStr for Construction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "skeleton" => Ok(Construction::Skeleton),
            "splice" | "splice_enum" => Ok(Construction::SpliceEnum),
            other => Err(Error::InvalidParameter(format!("unknown construction `{other}`"))),
        }
    }
}

/// Splice site with its local type, in rescaled coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplicePoint {
    pub x: f64,
    pub t: f64,
    pub ptype: PointType,
}

#[derive(Debug, Clone)]
pub struct FullWebSample {
    pub construction: Construction,
    pub field: ArrowField,
    pub delta: f64,
    pub grid_pitch: f64,
    pub d_points: Vec<(i64, i64)>,
    pub lattice_paths: Vec<LatticeFullPath>,
    pub paths: PathSet<FullPath>,
    pub splice_points: Vec<SplicePoint>,
}

fn dedup_lattice(paths: Vec<LatticeFullPath>) -> Vec<LatticeFullPath> {
    let mut seen = HashSet::new();
    paths.into_iter().filter(|p| seen.insert(p.clone())).collect()
}

/// Skeleton full web on explicit even sites.
pub fn build_skeleton_sites(field: &ArrowField, sites: &[(i64, i64)], delta: f64) -> Result<FullWebSample> {
    if sites.is_empty() {
        return Err(Error::Empty("skeleton point set"));
    }
    let window = continuum_window(&field.window, delta);
    let lattice = sites.par_iter().map(|&s| skeleton_path(field, s)).collect::<Result<Vec<_>>>()?;
    let lattice = dedup_lattice(lattice);
    let members = lattice.iter().map(|p| p.rescale(delta, window)).collect::<Result<Vec<_>>>()?;
    let d2 = delta * delta;
    let splice_points = lattice
        .iter()
        .map(|p| SplicePoint {
            x: p.splice.0 as f64 * delta,
            t: p.splice.1 as f64 * d2,
            ptype: PointType { m_in: backward_junctions(field, p.splice).1, m_out: 1 },
        })
        .collect();
    Ok(FullWebSample {
        construction: Construction::Skeleton,
        field: *field,
        delta,
        grid_pitch: delta,
        d_points: sites.to_vec(),
        lattice_paths: lattice,
        paths: PathSet::new(window, members),
        splice_points,
    })
}

/// Skeleton full web on points given in rescaled coordinates; each point
/// snaps to its nearest even lattice site.
pub fn build_skeleton(dw: &DoubleWebSample, d: &[SpaceTimePoint], delta: f64) -> Result<FullWebSample> {
    if d.is_empty() {
        return Err(Error::Empty("skeleton point set"));
    }
    let d2 = delta * delta;
    let sites: Vec<(i64, i64)> = d.iter().map(|p| snap_site(SpaceTimePoint::new(p.x / delta, p.t / d2))).collect();
    build_skeleton_sites(&dw.field, &sites, delta)
}

/// Splice-enumerated full web on a mesh of even sites. The rescaled paths
/// come from [`enumerate_splices`] on the rescaled local candidates.
pub fn build_splice_enum(field: &ArrowField, mesh: &[(i64, i64)], delta: f64) -> Result<FullWebSample> {
    if mesh.is_empty() {
        return Err(Error::Empty("splice mesh"));
    }
    let window = continuum_window(&field.window, delta);
    let d2 = delta * delta;
    let per_site = mesh
        .par_iter()
        .map(|&site| -> Result<(Vec<LatticeFullPath>, Vec<FullPath>, SplicePoint)> {
            let (lattice, ptype) = splice_paths(field, site)?;
            let f = rescale(&forward_path(field, site)?, delta)?;
            let backward_candidates =
                lattice.iter().map(|p| Ok(p.rescale(delta, window)?.backward().clone())).collect::<Result<Vec<_>>>()?;
            let point = SpaceTimePoint::new(site.0 as f64 * delta, site.1 as f64 * d2);
            let cfg = SpliceConfig {
                point,
                ptype,
                forward_candidates: vec![f],
                backward_candidates,
                incoming: Vec::new(),
                continuation: Vec::new(),
                window,
            };
            let full = enumerate_splices(&cfg)?;
            debug_assert_eq!(full.len(), lattice.len());
            Ok((lattice, full, SplicePoint { x: point.x, t: point.t, ptype }))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut lattice_all = Vec::new();
    let mut members = Vec::new();
    let mut splice_points = Vec::new();
    let mut seen = HashSet::new();
    for (lattice, full, sp) in per_site {
        for (l, f) in lattice.into_iter().zip(full) {
            if seen.insert(l.clone()) {
                lattice_all.push(l);
                members.push(f);
            }
        }
        splice_points.push(sp);
    }
    Ok(FullWebSample {
        construction: Construction::SpliceEnum,
        field: *field,
        delta,
        grid_pitch: delta,
        d_points: mesh.to_vec(),
        lattice_paths: lattice_all,
        paths: PathSet::new(window, members),
        splice_points,
    })
}

impl FullWebSample {
    pub fn with_grid_pitch(mut self, pitch: f64) -> Self {
        self.grid_pitch = pitch;
        self
    }

    /// Number of crossing pairs among the lattice paths.
    pub fn crossing_count(&self) -> usize {
        crossing_count(&self.lattice_paths)
    }

    pub fn to_doc(&self) -> FullWebDoc {
        let doc = self.paths.to_doc();
        FullWebDoc {
            window: doc.window,
            paths: doc.paths,
            construction: self.construction,
            grid_pitch: self.grid_pitch,
            splice_points: self
                .splice_points
                .iter()
                .map(|s| [s.x, s.t, s.ptype.m_in as f64, s.ptype.m_out as f64])
                .collect(),
        }
    }
}

/// Crossing pairs among a family of lattice full paths.
pub fn crossing_count(paths: &[LatticeFullPath]) -> usize {
    (0..paths.len())
        .into_par_iter()
        .map(|i| (i + 1..paths.len()).filter(|&j| paths[i].crosses(&paths[j])).count())
        .sum()
}

/// JSON form of a [`FullWebSample`]: the path-set document plus the
/// construction, grid pitch and typed splice points `[x, t, m_in, m_out]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FullWebDoc {
    pub window: [ExtF64; 4],
    pub paths: Vec<FullPathDoc>,
    pub construction: Construction,
    pub grid_pitch: f64,
    pub splice_points: Vec<[f64; 4]>,
}

/// Hausdorff distance between the skeleton web on `d` and the splice web on
/// `mesh`, both rescaled at `delta`.
pub fn verify_construction_equivalence(
    dw: &DoubleWebSample,
    d: &[(i64, i64)],
    mesh: &[(i64, i64)],
    delta: f64,
) -> Result<f64> {
    let skeleton = build_skeleton_sites(&dw.field, d, delta)?;
    let spliced = build_splice_enum(&dw.field, mesh, delta)?;
    hausdorff(&skeleton.paths, &spliced.paths)
}

/// Forward semipaths obtained by cutting every path at every cut time inside
/// its domain, without duplicates.
pub fn forward_full(fw: &FullWebSample, cut_times: &[f64]) -> PathSet<Semipath> {
    let mut members = Vec::new();
    let mut seen = HashSet::new();
    for p in &fw.paths.members {
        for &t in cut_times {
            if let Some(s) = p.cut(t) {
                if seen.insert(s.key()) {
                    members.push(s);
                }
            }
        }
    }
    PathSet::new(fw.paths.window, members)
}

/// Rescaled lattice times of the window, usable as cut times.
pub fn lattice_cut_times(w: &LatticeWindow, delta: f64) -> Vec<f64> {
    let d2 = delta * delta;
    (w.t_lo..=w.t_hi).map(|t| t as f64 * d2).collect()
}

/// Odd sites `(y, s)` whose two neighbouring arrows point away from each
/// other, opening a wedge above `(y, s)` that only a full path cut below
/// its splice can enter. Requires a row above and both neighbours inside.
pub fn dual_wedge_sites(field: &ArrowField) -> Vec<(i64, i64)> {
    let w = field.window;
    let mut out = Vec::new();
    for s in w.t_lo..w.t_hi {
        for y in w.odd_row(s) {
            if y > w.x_lo && y < w.x_hi && field.arrow(y - 1, s) == -1 && field.arrow(y + 1, s) == 1 {
                out.push((y, s));
            }
        }
    }
    out
}

/// Estimate the type of the point `p` (lattice units) from the forward
/// paths around it at scale `eps`, with `e2 = round(eps^2)` rows:
///
/// * `m_out` counts clusters, separated by more than 2 units at `t + e2`,
///   of the forward paths from even sites within distance 1 of `p`;
/// * `m_in` counts the distinct sites at `t - 1` through which paths
///   launched from every even site of `[x - 2 e2, x + 2 e2]` at `t - 2 e2`
///   enter `p`.
pub fn classify_point(dw: &DoubleWebSample, p: SpaceTimePoint, eps: f64) -> Result<PointType> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let field = &dw.field;
    let w = field.window;
    let (x, t) = snap_site(p);
    let e2 = ((eps * eps).round() as i64).max(1);
    let reach = 2 * e2;
    if t - reach < w.t_lo || t + e2 > w.t_hi || x - reach - e2 < w.x_lo || x + reach + e2 > w.x_hi {
        return Err(Error::OutsideWindow { x, t });
    }

    let evolve = |set: BTreeSet<i64>, from: i64, to: i64| -> BTreeSet<i64> {
        let mut cur = set;
        for r in from..to {
            cur = cur.iter().map(|&y| y + field.arrow(y, r) as i64).collect();
        }
        cur
    };

    let launch: BTreeSet<i64> = w.even_row(t - reach).filter(|&y| (y - x).abs() <= reach).collect();
    let before = evolve(launch, t - reach, t - 1);
    let m_in = before.iter().filter(|&&y| y + field.arrow(y, t - 1) as i64 == x).count() as u32;

    let near: BTreeSet<i64> = w.even_row(t).filter(|&y| (y - x).abs() <= 1).collect();
    let after: Vec<i64> = evolve(near, t, t + e2).into_iter().collect();
    let m_out = if after.is_empty() { 0 } else { 1 + after.windows(2).filter(|q| q[1] - q[0] > 2).count() as u32 };

    PointType::new(m_in, m_out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discreteweb::sample_arrow_field;
    use crate::pathspace::{directed_hausdorff, DEFAULT_REFINE};

    fn cwin() -> Window {
        Window::new(-10.0, 10.0, -10.0, 10.0).unwrap()
    }

    #[test]
    fn counts() {
        let expect = [((0, 1), 1), ((1, 1), 2), ((0, 2), 2), ((1, 2), 3), ((2, 1), 3), ((0, 3), 3)];
        for ((a, b), n) in expect {
            assert_eq!(splice_count(PointType::new(a, b).unwrap()).unwrap(), n);
        }
        assert!(PointType::new(2, 2).is_err());
        assert!(splice_count(PointType { m_in: 3, m_out: 1 }).is_err());
    }

    #[test]
    fn continuations() {
        let c = |a, b, pass| continuation_count(PointType::new(a, b).unwrap(), pass);
        assert_eq!(c(0, 3, true).unwrap(), 5);
        assert_eq!(c(0, 1, true).unwrap(), 1);
        assert_eq!(c(1, 2, false).unwrap(), 1);
        assert_eq!(c(1, 1, false).unwrap(), 1);
        assert!(c(0, 2, false).is_err());
        assert!(c(0, 3, false).is_err());
    }

    #[test]
    fn fan_enumeration_matches_count() {
        for pt in PointType::all() {
            let cfg = SpliceConfig::fan(pt, SpaceTimePoint::new(0.0, 0.0), cwin()).unwrap();
            let paths = enumerate_splices(&cfg).unwrap();
            assert_eq!(paths.len(), splice_count(pt).unwrap(), "{pt:?}");
        }
    }

    #[test]
    fn one_two_excludes_the_crossing_pair() {
        let pt = PointType::new(1, 2).unwrap();
        let cfg = SpliceConfig::fan(pt, SpaceTimePoint::new(0.0, 0.0), cwin()).unwrap();
        let passing = cfg.passing_path().unwrap();
        let kept = enumerate_splices(&cfg).unwrap();
        for p in &kept {
            assert!(!crossing_detect(p, &passing).unwrap());
        }
        // The left outgoing path spliced to the right backward one is the crossing pair.
        let excluded = splice(&cfg.forward_candidates[0], &cfg.backward_candidates[1], 0.0, cwin()).unwrap();
        assert!(crossing_detect(&excluded, &passing).unwrap());
        assert!(!kept.contains(&excluded));
    }

    #[test]
    fn candidate_mismatch_and_crossing_rejected() {
        let pt = PointType::new(0, 2).unwrap();
        let mut cfg = SpliceConfig::fan(pt, SpaceTimePoint::new(0.0, 0.0), cwin()).unwrap();
        cfg.forward_candidates.pop();
        assert!(matches!(enumerate_splices(&cfg), Err(Error::CandidateMismatch(_))));

        let mut cfg = SpliceConfig::fan(pt, SpaceTimePoint::new(0.0, 0.0), cwin()).unwrap();
        cfg.forward_candidates[0] = Semipath::forward(vec![[0.0, 0.0], [1.0, -1.0], [2.0, 5.0]]).unwrap();
        cfg.forward_candidates[1] = Semipath::forward(vec![[0.0, 0.0], [1.0, 1.0], [2.0, 1.0]]).unwrap();
        assert!(matches!(enumerate_splices(&cfg), Err(Error::CandidatesCross)));
    }

    #[test]
    fn skeleton_on_all_plus_field() {
        let w = LatticeWindow::new(-8, 8, 0, 8).unwrap();
        let f = ArrowField::constant(w, 1);
        let p = skeleton_path(&f, (0, 4)).unwrap();
        // Slope +1 above the site, a vertical step into the dual below it,
        // and the dual drifting left going down: slope +1 throughout below.
        assert_eq!(p.positions, vec![-3, -2, -1, 0, 0, 1, 2, 3, 4]);
        assert_eq!(p.t_lo, 0);
    }

    #[test]
    fn skeleton_set_semantics() {
        let w = LatticeWindow::new(-8, 8, 0, 8).unwrap();
        let dw = DoubleWebSample::full(sample_arrow_field(w, 3).unwrap());
        let a = build_skeleton_sites(&dw.field, &[(0, 4), (0, 4)], 0.1).unwrap();
        assert_eq!(a.paths.len(), 1);
        let sites = grid_sites(&w, 2);
        let b = build_skeleton_sites(&dw.field, &sites, 0.1).unwrap();
        assert!(b.paths.len() <= sites.len());
        for &(x, t) in &sites {
            assert!(b.lattice_paths.iter().any(|p| p.position_at(t) == Some(x)));
        }
    }

    #[test]
    fn snapping() {
        assert_eq!(snap_site(SpaceTimePoint::new(0.0, 0.0)), (0, 0));
        assert_eq!(snap_site(SpaceTimePoint::new(1.0, 0.0)), (0, 0));
        assert_eq!(snap_site(SpaceTimePoint::new(0.0, 0.5)), (0, 0));
        assert_eq!(snap_site(SpaceTimePoint::new(2.2, 1.0)), (3, 1));
        assert_eq!(snap_site(SpaceTimePoint::new(2.0, 1.0)), (1, 1));
        assert_eq!(snap_site(SpaceTimePoint::new(0.3, 0.5)), (0, 0));
    }

    #[test]
    fn all_plus_equivalence() {
        let w = LatticeWindow::new(-6, 6, 0, 10).unwrap();
        let dw = DoubleWebSample { field: ArrowField::constant(w, 1), forward_paths: vec![], dual_paths: vec![] };
        let sites = grid_sites(&w, 1);
        // Every interior site has a left incoming arrow whose side junction
        // follows no skeleton path, but stays within one lattice unit of one.
        let d = verify_construction_equivalence(&dw, &sites, &sites, 0.1).unwrap();
        assert!(d > 0.0 && d <= 0.1, "{d}");
        // Single sites without an incoming arrow give the same single splice.
        for site in [(-6, 4), (0, 0)] {
            assert_eq!(verify_construction_equivalence(&dw, &[site], &[site], 0.1).unwrap(), 0.0);
        }
    }

    #[test]
    fn funnel_has_two_incoming() {
        let w = LatticeWindow::new(-200, 200, 0, 400).unwrap();
        let dw = DoubleWebSample { field: ArrowField::funnel(w), forward_paths: vec![], dual_paths: vec![] };
        let pt = classify_point(&dw, SpaceTimePoint::new(0.0, 300.0), 8.0).unwrap();
        assert_eq!(pt, PointType::new(2, 1).unwrap());
    }

    #[test]
    fn all_plus_classification() {
        let w = LatticeWindow::new(-300, 300, 0, 400).unwrap();
        let dw = DoubleWebSample { field: ArrowField::constant(w, 1), forward_paths: vec![], dual_paths: vec![] };
        for x in [-10i64, 0, 10] {
            let pt = classify_point(&dw, SpaceTimePoint::new(x as f64, 200.0), 8.0).unwrap();
            assert_eq!(pt, PointType::new(1, 1).unwrap());
        }
    }

    #[test]
    fn random_points_are_generic() {
        let w = LatticeWindow::new(-2000, 2000, 0, 2000).unwrap();
        let dw =
            DoubleWebSample { field: sample_arrow_field(w, 17).unwrap(), forward_paths: vec![], dual_paths: vec![] };
        let n = 2000;
        let generic = (0..n)
            .into_par_iter()
            .filter(|&k| {
                let mut rng = crate::rng::replica_rng(5, k as u64);
                use rand::Rng;
                let x = rng.random_range(-1500..1500) as f64;
                let t = rng.random_range(200..1800) as f64;
                let pt = classify_point(&dw, SpaceTimePoint::new(x, t), 8.0).unwrap();
                pt.m_out == 1 && pt.m_in <= 1
            })
            .count();
        assert!(generic as f64 / n as f64 >= 0.99, "{generic}/{n}");
    }

    #[test]
    fn full_webs_do_not_cross() {
        for seed in 0..50 {
            let w = LatticeWindow::new(-8, 8, 0, 16).unwrap();
            let f = sample_arrow_field(w, seed).unwrap();
            let sites = grid_sites(&w, 1);
            let sk = build_skeleton_sites(&f, &sites, 0.1).unwrap();
            let sp = build_splice_enum(&f, &sites, 0.1).unwrap();
            assert_eq!(sk.crossing_count(), 0);
            assert_eq!(sp.crossing_count(), 0);
            let mut union = sk.lattice_paths.clone();
            union.extend(sp.lattice_paths.iter().cloned());
            assert_eq!(crossing_count(&union), 0);
        }
    }

    #[test]
    fn skeleton_grows_monotonically() {
        let w = LatticeWindow::new(-8, 8, 0, 16).unwrap();
        let f = sample_arrow_field(w, 9).unwrap();
        let small = build_skeleton_sites(&f, &grid_sites(&w, 4), 0.1).unwrap();
        let big = build_skeleton_sites(&f, &grid_sites(&w, 1), 0.1).unwrap();
        assert_eq!(directed_hausdorff(&small.paths, &big.paths, DEFAULT_REFINE).unwrap(), 0.0);
    }

    #[test]
    fn forward_full_basics() {
        let w = LatticeWindow::new(-8, 8, 0, 16).unwrap();
        let f = sample_arrow_field(w, 2).unwrap();
        let sk = build_skeleton_sites(&f, &[(0, 6)], 0.1).unwrap();
        let ts = sk.paths.members[0].splice_t();
        let one = forward_full(&sk, &[ts]);
        assert_eq!(one.members, vec![sk.paths.members[0].forward().clone()]);
        let cuts = lattice_cut_times(&w, 0.1);
        let many = forward_full(&sk, &cuts[2..6]);
        assert_eq!(many.len(), 4);
        for pair in many.members.windows(2) {
            let later = &pair[1];
            assert_eq!(pair[0].forward_from(later.start_time()).unwrap(), *later);
        }
    }

    #[test]
    fn doc_roundtrip_shape() {
        let w = LatticeWindow::new(-4, 4, 0, 6).unwrap();
        let f = sample_arrow_field(w, 1).unwrap();
        let sp = build_splice_enum(&f, &grid_sites(&w, 1), 0.5).unwrap();
        let json = serde_json::to_value(sp.to_doc()).unwrap();
        assert_eq!(json["construction"], "splice_enum");
        assert_eq!(json["splice_points"].as_array().unwrap().len(), grid_sites(&w, 1).len());
        let back: PathSet<FullPath> = PathSet::from_json(&serde_json::to_string(&sp.paths.to_doc()).unwrap()).unwrap();
        assert_eq!(back, sp.paths);
    }
}
