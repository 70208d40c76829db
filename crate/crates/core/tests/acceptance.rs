//! Acceptance suite. Runs every criterion at its stated scale and tolerance,
//! prints one PASS/FAIL line each and exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use webflow::discreteweb::{
    backward_path, forward_path, reconstruct_dual_via_envelope, rescale, sample_arrow_field, DoubleWebSample,
    LatticeWindow,
};
use webflow::fullweb::{
    build_skeleton_sites, build_splice_enum, continuum_window, crossing_count, dual_wedge_sites, enumerate_splices,
    forward_full, grid_sites, lattice_cut_times, splice_count, PointType, SpliceConfig,
};
use webflow::pathspace::{
    crossing_detect, d_f, directed_hausdorff, hausdorff, rho, splice, FullPath, PathSet, Semipath, SpaceTimePoint,
    Window, DEFAULT_REFINE,
};
use webflow::rng::replica_rng;
use webflow::stats::{
    coalescing_density, coalescing_gap_cdf, coalescing_survival, density_estimate, equivalence_statistic, ks_statistic,
    walk_survival,
};
use webflow::stochflow::{two_point_gap_sample, CovarianceSpec};

/// Outcome of one criterion: pass flag and a one-line summary.
type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn p1() -> Outcome {
    let oracle = coalescing_survival(1.0, 1.0);
    let p = walk_survival(1.0, 1.0, 0.05, 100_000, 1).unwrap();
    let err = (p - oracle).abs();
    (err <= 0.01, format!("walk survival {p:.6} vs {oracle:.6}, |err| {err:.4} <= 0.01"))
}

fn p2() -> Outcome {
    let oracle = coalescing_density(0.25);
    let rho = density_estimate(0.25, 0.05, 80_000, 1).unwrap();
    let rel = (rho / oracle - 1.0).abs();
    (rel <= 0.03, format!("density {rho:.5} vs {oracle:.6}, relative error {rel:.4} <= 0.03"))
}

fn p3() -> Outcome {
    let window = Window::new(-10.0, 10.0, -10.0, 10.0).unwrap();
    let point = SpaceTimePoint::new(0.0, 0.0);
    let mut ok = true;
    let mut counts = Vec::new();
    for pt in PointType::all() {
        let cfg = SpliceConfig::fan(pt, point, window).unwrap();
        let got = enumerate_splices(&cfg).unwrap();
        let want = splice_count(pt).unwrap();
        ok &= got.len() == want;
        counts.push(format!("({},{})->{}", pt.m_in, pt.m_out, got.len()));
        let mut all = Vec::new();
        for f in &cfg.forward_candidates {
            for g in &cfg.backward_candidates {
                all.push(splice(f, g, point.t, window).unwrap());
            }
        }
        if pt == PointType::new(1, 2).unwrap() {
            ok &= want == 3;
            let passing = cfg.passing_path().unwrap();
            let missing: Vec<&FullPath> = all.iter().filter(|p| !got.contains(p)).collect();
            let crossing: Vec<&FullPath> = all.iter().filter(|p| crossing_detect(*p, &passing).unwrap()).collect();
            ok &= missing.len() == 1 && crossing.len() == 1 && missing[0] == crossing[0];
        } else {
            ok &= want == (pt.m_in as usize + 1) * pt.m_out as usize && got == all;
        }
    }
    (ok, format!("splice counts {}; (1,2) excludes exactly the crossing pair", counts.join(" ")))
}

fn p4() -> Outcome {
    let delta = 0.05;
    let d = equivalence_statistic(delta, 100, 1).unwrap();
    (d <= 2.0 * delta, format!("max skeleton/splice Hausdorff over 100 webs {d:.5} <= {}", 2.0 * delta))
}

fn p5() -> Outcome {
    let bad = (0..1000u64)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = replica_rng(5, i);
            let half = rng.random_range(4..24i64);
            let height = rng.random_range(4..48i64);
            let w = LatticeWindow::new(-half, half, 0, height).unwrap();
            let field = sample_arrow_field(w, i).unwrap();
            let s = rng.random_range(1..=height);
            let row: Vec<i64> = w.odd_row(s).collect();
            let y = row[rng.random_range(0..row.len())];
            reconstruct_dual_via_envelope(&field, (y, s)).unwrap() != backward_path(&field, (y, s)).unwrap()
        })
        .count();
    (bad == 0, format!("envelope reconstruction differs from the dual path on {bad} of 1000 instances"))
}

fn p6() -> Outcome {
    let spec = CovarianceSpec::default();
    let deltas = [0.2, 0.1, 0.05];
    let ks: Vec<f64> = deltas
        .iter()
        .map(|&delta| {
            let s = two_point_gap_sample(&spec, 0.0, 1.0, 1.0, delta, None, 7, 100_000).unwrap();
            ks_statistic(&s.distribution, |y| coalescing_gap_cdf(1.0, 1.0, y)).unwrap()
        })
        .collect();
    let monotone = ks.windows(2).all(|w| w[1] <= w[0]);
    let last = ks[2];
    (
        monotone && last <= 0.05,
        format!(
            "flow gap KS {:.4} / {:.4} / {:.4} at delta 0.2 / 0.1 / 0.05, non-increasing {monotone}, final <= 0.05",
            ks[0], ks[1], ks[2]
        ),
    )
}

fn p7() -> Outcome {
    let crossings: usize = (0..1000u64)
        .into_par_iter()
        .map(|i| {
            let w = LatticeWindow::new(-6, 6, 0, 12).unwrap();
            let field = sample_arrow_field(w, 10_000 + i).unwrap();
            let dw = DoubleWebSample::full(field);
            let sites = grid_sites(&w, 1);
            let sk = build_skeleton_sites(&field, &sites, 0.1).unwrap();
            let sp = build_splice_enum(&field, &sites, 0.1).unwrap();
            let mut union = sk.lattice_paths.clone();
            union.extend(sp.lattice_paths.iter().cloned());
            dw.crossing_count() + crossing_count(&union)
        })
        .sum();
    (crossings == 0, format!("{crossings} crossings over 1000 double webs and their skeleton + splice full webs"))
}

fn random_semipath(rng: &mut impl Rng, forward: bool, t0: f64, x0: f64) -> Semipath {
    let n = rng.random_range(1..5);
    let mut knots = vec![[t0, x0]];
    let (mut t, mut x) = (t0, x0);
    for _ in 0..n {
        let dt = rng.random_range(0.05..1.5);
        t = if forward { t + dt } else { t - dt };
        x += rng.random_range(-2.0..2.0);
        knots.push([t, x]);
    }
    if forward {
        Semipath::forward(knots).unwrap()
    } else {
        knots.reverse();
        Semipath::backward(knots).unwrap()
    }
}

fn random_full(rng: &mut impl Rng, window: Window) -> FullPath {
    let t0 = rng.random_range(-3.0..3.0);
    let x0 = rng.random_range(-3.0..3.0);
    let f = random_semipath(rng, true, t0, x0);
    let g = random_semipath(rng, false, t0, x0);
    splice(&f, &g, t0, window).unwrap()
}

fn p8() -> Outcome {
    let window = Window::new(-10.0, 10.0, -10.0, 10.0).unwrap();
    let tol = 1e-12;
    let failures: usize = (0..10_000u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_rng(8, i);
            let mut fail = 0;
            let pts: Vec<SpaceTimePoint> = (0..3)
                .map(|_| SpaceTimePoint::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)))
                .collect();
            let (a, b, c) = (pts[0], pts[1], pts[2]);
            fail += (rho(a, a) != 0.0 || rho(a, b) != rho(b, a) || rho(a, c) > rho(a, b) + rho(b, c) + tol) as usize;
            let paths: Vec<FullPath> = (0..3).map(|_| random_full(&mut rng, window)).collect();
            let (p, q, r) = (&paths[0], &paths[1], &paths[2]);
            let (pq, qp, qr, pr) = (d_f(p, q).unwrap(), d_f(q, p).unwrap(), d_f(q, r).unwrap(), d_f(p, r).unwrap());
            fail += (d_f(p, p).unwrap() != 0.0 || pq != qp || pr > pq + qr + tol || (p != q && pq <= 0.0)) as usize;
            let sets: Vec<PathSet<FullPath>> = (0..3)
                .map(|_| {
                    PathSet::new(window, (0..rng.random_range(1..4)).map(|_| random_full(&mut rng, window)).collect())
                })
                .collect();
            let (x, y, z) = (&sets[0], &sets[1], &sets[2]);
            let (xy, yx, yz, xz) = (
                hausdorff(x, y).unwrap(),
                hausdorff(y, x).unwrap(),
                hausdorff(y, z).unwrap(),
                hausdorff(x, z).unwrap(),
            );
            fail += (hausdorff(x, x).unwrap() != 0.0 || xy != yx || xz > xy + yz + tol) as usize;
            fail
        })
        .sum();

    // Splicing continuity: perturbing both pieces by at most eps moves the
    // spliced path by at most eps, and by a comparable amount.
    let mut rng = replica_rng(8, u64::MAX);
    let mut worst_ratio: f64 = 0.0;
    let mut least_ratio = f64::INFINITY;
    for _ in 0..200 {
        let t0 = rng.random_range(-2.0..2.0);
        let x0 = rng.random_range(-2.0..2.0);
        let f = random_semipath(&mut rng, true, t0, x0);
        let g = random_semipath(&mut rng, false, t0, x0);
        let base = splice(&f, &g, t0, window).unwrap();
        for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
            let shift = eps * rng.random_range(0.5..1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let moved = |s: &Semipath| {
                let knots = s.knots().iter().map(|k| [k[0], k[1] + shift]).collect();
                Semipath::new(s.direction(), knots).unwrap()
            };
            let p = splice(&moved(&f), &moved(&g), t0, window).unwrap();
            let ratio = d_f(&base, &p).unwrap() / eps;
            worst_ratio = worst_ratio.max(ratio);
            least_ratio = least_ratio.min(ratio);
        }
    }
    let continuity = worst_ratio <= 1.0 + 1e-9 && least_ratio > 0.0;
    (
        failures == 0 && continuity,
        format!(
            "{failures} axiom failures on 10^4 triples (rho, d_F, Hausdorff; tol 1e-12); splice perturbation ratio d/eps in [{least_ratio:.3e}, {worst_ratio:.3}]"
        ),
    )
}

fn p9() -> Outcome {
    let delta = 0.1;
    let results: Vec<(bool, bool)> = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let w = LatticeWindow::new(-12, 12, 0, 24).unwrap();
            let field = sample_arrow_field(w, 90_000 + i).unwrap();
            let sites = grid_sites(&w, 1);
            let sk = build_skeleton_sites(&field, &sites, delta).unwrap();
            let full = forward_full(&sk, &lattice_cut_times(&w, delta));
            let window = continuum_window(&w, delta);
            let web = PathSet::new(
                window,
                sites.iter().map(|&s| rescale(&forward_path(&field, s).unwrap(), delta).unwrap()).collect(),
            );
            let contained = directed_hausdorff(&web, &full, DEFAULT_REFINE).unwrap() == 0.0;
            let extra = dual_wedge_sites(&field).iter().any(|&(y, s)| {
                full.members.iter().any(|p| {
                    p.start_time() == s as f64 * delta * delta
                        && p.start_value() == y as f64 * delta
                        && !web.contains_exact(p)
                        && directed_hausdorff(&PathSet::new(window, vec![p.clone()]), &web, DEFAULT_REFINE).unwrap()
                            > 0.0
                })
            });
            (contained, extra)
        })
        .collect();
    let contained = results.iter().filter(|r| r.0).count();
    let extra = results.iter().filter(|r| r.1).count();
    (
        contained == 100 && extra == 100,
        format!("forward web inside forward_full on {contained}/100, extra semipath at a dual wedge on {extra}/100"),
    )
}

fn main() {
    let criteria: [Criterion; 9] =
        [("P1", p1), ("P2", p2), ("P3", p3), ("P4", p4), ("P5", p5), ("P6", p6), ("P7", p7), ("P8", p8), ("P9", p9)];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with('P')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !only.is_empty() && !only.iter().any(|o| o == name) {
            continue;
        }
        let start = Instant::now();
        let (pass, msg) = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let why = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {why}"))
        });
        failed += !pass as usize;
        println!("{name} {} {msg} [{:.1}s]", if pass { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
