//! Figure generation: cost-vs-bound curves and 2-D projections of the
//! reachable and contract sets.

use nalgebra::DMatrix;

use agc_core::linalg;
use agc_core::policy::ContractPolicy;
use agc_core::problem::PreparedProblem;
use agc_core::sampling::{sample_rng, EllipsoidSampler};
use agc_core::sdp::SdpSolution;
use agc_core::Error;

use crate::svg::{convex_hull, ticks, Canvas};
use crate::sweep::SweepRecord;

/// Cost curves over the sweep parameter, one polyline per graph;
/// infeasible points are simply absent from their curve.
pub fn cost_curves_svg(records: &[SweepRecord]) -> String {
    let mut graphs: Vec<String> = records.iter().map(|r| r.graph.clone()).collect();
    graphs.sort();
    graphs.dedup();

    let feasible: Vec<&SweepRecord> = records.iter().filter(|r| r.objective.is_some()).collect();
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (y_lo, mut y_hi) = (0.0f64, f64::NEG_INFINITY);
    for r in records {
        x_lo = x_lo.min(r.x_max);
        x_hi = x_hi.max(r.x_max);
    }
    for r in &feasible {
        y_hi = y_hi.max(r.objective.unwrap());
    }
    if !y_hi.is_finite() {
        y_hi = 1.0;
    }
    y_hi *= 1.05;
    let mut canvas = Canvas::new(640.0, 420.0, (x_lo, x_hi), (y_lo, y_hi));
    canvas.axes(
        "state bound x_max",
        "optimal cost",
        &ticks(x_lo, x_hi, 7),
        &ticks(y_lo, y_hi, 6),
    );
    let palette = ["#1f77b4", "#2ca02c", "#d62728", "#9467bd"];
    for (k, name) in graphs.iter().enumerate() {
        let pts: Vec<(f64, f64)> = feasible
            .iter()
            .filter(|r| &r.graph == name)
            .map(|r| (r.x_max, r.objective.unwrap()))
            .collect();
        let color = palette[k % palette.len()];
        canvas.polyline(&pts, color, 2.0, false);
        for &(x, y) in &pts {
            canvas.circle_marker(x, y, 2.0, color);
        }
        canvas.legend(k, name, color, false);
    }
    canvas.finish("Optimal cost vs state bound")
}

/// 2-D projection data of a solved instance onto two trajectory
/// coordinates.
pub struct ProjectedSets {
    pub center: (f64, f64),
    /// Outer ellipse of the reachable set (Minkowski-sum bound at the
    /// solver's β/λ split), as boundary points.
    pub reachable_outer: Vec<(f64, f64)>,
    /// Convex hull of sampled surrogate states.
    pub sampled_hull: Vec<(f64, f64)>,
    /// Projected contract ellipse when both coordinates are coupling
    /// states.
    pub contract: Option<Vec<(f64, f64)>>,
}

fn ellipse_boundary(center: (f64, f64), shape: &DMatrix<f64>, n: usize) -> Vec<(f64, f64)> {
    let half = linalg::symmetric_sqrt(shape, 0.0);
    (0..=n)
        .map(|k| {
            let th = std::f64::consts::TAU * k as f64 / n as f64;
            let u = nalgebra::dvector![th.cos(), th.sin()];
            let p = &half * u;
            (center.0 + p[0], center.1 + p[1])
        })
        .collect()
}

/// Compute the projected reachable/contract sets for coordinates
/// `(a, b)` of the state trajectory.
pub fn projected_sets(
    prep: &PreparedProblem,
    sol: &SdpSolution,
    policy: &ContractPolicy,
    coords: (usize, usize),
    hull_samples: usize,
    seed: u64,
) -> Result<ProjectedSets, Error> {
    let n_x = prep.model().traj_state_dim();
    for c in [coords.0, coords.1] {
        if c >= n_x {
            return Err(Error::CoordOutOfRange(c, n_x));
        }
    }
    let sigma = prep.sigma();
    let sel = |m: &DMatrix<f64>| -> DMatrix<f64> {
        DMatrix::from_fn(2, n_x, |r, c| {
            let src = if r == 0 { coords.0 } else { coords.1 };
            m[(src, c)]
        })
    };
    let p_w2 = sel(&sol.p_w);
    let p_xi2 = sel(&sol.p_xi);
    let s1 = &p_w2 * sigma * p_w2.transpose();
    let s2 = &p_xi2 * sigma * p_xi2.transpose();
    let center = (sol.x_bar[coords.0], sol.x_bar[coords.1]);

    // Outer ellipse from the two-ellipsoid sum bound at α = β/λ; with a
    // vanishing ξ-part this degenerates to the w-ellipse itself.
    let alpha = if sol.lambda > 0.0 { sol.beta / sol.lambda } else { 0.0 };
    let outer_shape = if s2.amax() == 0.0 {
        s1.clone()
    } else if s1.amax() == 0.0 {
        s2.clone()
    } else {
        let a = alpha.clamp(1e-9, 1.0 - 1e-9);
        s1 / a + s2 / (1.0 - a)
    };
    let reachable_outer = ellipse_boundary(center, &outer_shape, 128);

    // Sampled surrogate states for the hull overlay.
    let sampler = EllipsoidSampler::from_sqrt(prep.sqrt_sigma.clone());
    let mut pts = Vec::with_capacity(hull_samples);
    for i in 0..hull_samples {
        let mut rng = sample_rng(seed, i as u64);
        let w = sampler.mixed(&mut rng, i);
        let xi = sampler.mixed(&mut rng, i + 1);
        let x0 = center.0 + (p_w2.row(0) * &w)[0] + (p_xi2.row(0) * &xi)[0];
        let x1 = center.1 + (p_w2.row(1) * &w)[0] + (p_xi2.row(1) * &xi)[0];
        pts.push((x0, x1));
    }
    let sampled_hull = convex_hull(&pts);

    // Contract ellipse if both coordinates are coupling coordinates.
    let pi = &prep.pi_c;
    let find_row = |c: usize| (0..pi.nrows()).find(|&r| pi.selected(r) == c);
    let contract = match (find_row(coords.0), find_row(coords.1)) {
        (Some(ra), Some(rb)) if policy.contract.dim() > 0 => {
            let s = policy.contract.shape();
            let sub = nalgebra::dmatrix![
                s[(ra, ra)], s[(ra, rb)];
                s[(rb, ra)], s[(rb, rb)];
            ];
            let c = policy.contract.center();
            Some(ellipse_boundary((c[ra], c[rb]), &sub, 128))
        }
        _ => None,
    };

    Ok(ProjectedSets {
        center,
        reachable_outer,
        sampled_hull,
        contract,
    })
}

/// Render the projected sets (plus the state box when given) in the
/// style of a support-set figure: solid reachable boundaries, dashed
/// contract boundary, black box.
pub fn projected_sets_svg(
    sets: &ProjectedSets,
    coords: (usize, usize),
    box_bound: Option<f64>,
) -> String {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut scan = |pts: &[(f64, f64)]| {
        for &(x, y) in pts {
            lo = lo.min(x.min(y));
            hi = hi.max(x.max(y));
        }
    };
    scan(&sets.reachable_outer);
    scan(&sets.sampled_hull);
    if let Some(c) = &sets.contract {
        scan(c);
    }
    if let Some(b) = box_bound {
        lo = lo.min(-b);
        hi = hi.max(b);
    }
    let pad = 0.08 * (hi - lo).max(1e-6);
    let range = (lo - pad, hi + pad);
    let mut canvas = Canvas::new(520.0, 520.0, range, range);
    canvas.axes(
        &format!("trajectory coordinate {}", coords.0),
        &format!("trajectory coordinate {}", coords.1),
        &ticks(range.0, range.1, 6),
        &ticks(range.0, range.1, 6),
    );
    if let Some(b) = box_bound {
        canvas.polyline(
            &[(-b, -b), (b, -b), (b, b), (-b, b), (-b, -b)],
            "black",
            1.5,
            false,
        );
        canvas.legend(2, "state box", "black", false);
    }
    canvas.polygon(&sets.sampled_hull, "#aec7e8", "#1f77b4", 0.45);
    canvas.polyline(&sets.reachable_outer, "#1f77b4", 2.0, false);
    canvas.legend(0, "reachable set (outer ellipse + sampled hull)", "#1f77b4", false);
    if let Some(c) = &sets.contract {
        canvas.polyline(c, "#d62728", 2.0, true);
        canvas.legend(1, "contract set", "#d62728", true);
    }
    canvas.circle_marker(sets.center.0, sets.center.1, 2.5, "#1f77b4");
    canvas.finish("State-support and contract set projection")
}
