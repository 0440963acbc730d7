//! Orbits, periodic points and their multipliers, postcritical sets.

use crate::error::{Error, Result};
use crate::map::{HomJet, RationalMap};
use crate::par;
use crate::poly;
use crate::sphere::{spherical_distance, Chart, Rotation, SpherePoint, C64, ONE};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;

/// `| |m| - 1 |` below this makes a cycle parabolic-suspect.
pub const PARABOLIC_TOL: f64 = 1e-6;
/// Multipliers below this modulus count as superattracting.
pub const SUPERATTRACTING_TOL: f64 = 1e-8;
/// Snapping tolerance for detecting that a critical orbit has cycled.
pub const SNAP_TOL: f64 = 1e-10;
/// Certification threshold `σ(f^n(z), z)` for periodic points.
pub const PERIODIC_RESIDUAL: f64 = 1e-10;
/// Periodic points closer than this are one point.
pub const DEDUP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CycleClass {
    Superattracting,
    Attracting,
    Repelling,
    ParabolicSuspect,
}

impl CycleClass {
    pub fn of(multiplier: C64) -> Self {
        let m = multiplier.norm();
        if (m - 1.0).abs() < PARABOLIC_TOL {
            CycleClass::ParabolicSuspect
        } else if m < SUPERATTRACTING_TOL {
            CycleClass::Superattracting
        } else if m < 1.0 {
            CycleClass::Attracting
        } else {
            CycleClass::Repelling
        }
    }

    pub fn is_attracting(&self) -> bool {
        matches!(self, CycleClass::Superattracting | CycleClass::Attracting)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            CycleClass::Superattracting => "superattracting",
            CycleClass::Attracting => "attracting",
            CycleClass::Repelling => "repelling",
            CycleClass::ParabolicSuspect => "parabolic-suspect",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPoint {
    pub point: SpherePoint,
    /// Minimal period.
    pub period: usize,
    pub multiplier: C64,
    pub class: CycleClass,
}

impl PeriodicPoint {
    /// Certify `z` as periodic with minimal period dividing `n` and attach its multiplier.
    pub fn certify(map: &RationalMap, z: SpherePoint, n: usize) -> Result<Self> {
        let gap = spherical_distance(map.iterate(z, n), z);
        if gap >= PERIODIC_RESIDUAL {
            return Err(Error::Residual { residual: gap, tol: PERIODIC_RESIDUAL });
        }
        let period = minimal_period(map, z, n, 1e-8);
        let cycle = orbit(map, z, period - 1);
        let multiplier = multiplier(map, &cycle)?;
        Ok(PeriodicPoint { point: z, period, multiplier, class: CycleClass::of(multiplier) })
    }

    /// Points of the cycle, starting here.
    pub fn cycle(&self, map: &RationalMap) -> Vec<SpherePoint> {
        orbit(map, self.point, self.period - 1)
    }
}

/// `[z, f(z), ..., f^n(z)]`.
pub fn orbit(map: &RationalMap, z: SpherePoint, n: usize) -> Vec<SpherePoint> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(z);
    let mut w = z;
    for _ in 0..n {
        w = map.eval(w);
        out.push(w);
    }
    out
}

/// Smallest divisor `d` of `n` with `σ(f^d(z), z) < tol` (`n` if none).
pub fn minimal_period(map: &RationalMap, z: SpherePoint, n: usize, tol: f64) -> usize {
    (1..=n)
        .filter(|d| n % d == 0)
        .find(|&d| spherical_distance(map.iterate(z, d), z) < tol)
        .unwrap_or(n)
}

/// Product of the derivatives along a closed cycle, each step read in the
/// preferred charts of its endpoints.
pub fn multiplier(map: &RationalMap, cycle: &[SpherePoint]) -> Result<C64> {
    if cycle.is_empty() {
        return Err(Error::Invalid("empty cycle".into()));
    }
    let k = cycle.len();
    let mut prod = ONE;
    for i in 0..k {
        let next = cycle[(i + 1) % k];
        let gap = spherical_distance(map.eval(cycle[i]), next);
        if gap > 1e-8 {
            return Err(Error::CycleNotClosed(gap));
        }
        let (chart_in, u) = cycle[i].chart();
        let (chart_out, _) = next.chart();
        let (_, d) = map
            .chart_map(u, chart_in, chart_out)
            .ok_or(Error::CycleNotClosed(gap))?;
        prod *= d;
    }
    Ok(prod)
}

/// Newton's method for `f^period(z) = z`, run in the preferred chart of the
/// current iterate. Returns the refined point and its residual `σ(f^L(z), z)`.
pub fn newton_periodic(map: &RationalMap, seed: SpherePoint, period: usize, max_iter: usize) -> (SpherePoint, f64) {
    let mut z = seed;
    for _ in 0..max_iter {
        let (chart, u) = z.chart();
        let jet = map.iterate_jet(HomJet::from_chart(chart, u), period);
        let Some((v, dv)) = jet.in_chart(chart) else { break };
        let g = v - u;
        let dg = dv - ONE;
        if g == C64::new(0.0, 0.0) || dg == C64::new(0.0, 0.0) {
            break;
        }
        let step = g / dg;
        if !(step.re.is_finite() && step.im.is_finite()) {
            break;
        }
        z = SpherePoint::from_chart(chart, u - step);
        if step.norm() <= 1e-15 * u.norm().max(1e-3) {
            break;
        }
    }
    let residual = spherical_distance(map.iterate(z, period), z);
    (z, residual)
}

/// Outcome of [`periodic_points`].
#[derive(Clone, Debug)]
pub struct PeriodicSet {
    pub n: usize,
    /// Distinct points with minimal period dividing `n`, sorted by (re, im), infinity last.
    pub points: Vec<PeriodicPoint>,
    /// Root multiplicity of each point in the fixed-point equation of `f^n`.
    pub multiplicities: Vec<usize>,
    /// `D^n + 1`: fixed points of `f^n` counted with multiplicity.
    pub expected: usize,
    /// False when the seed-grid fallback was used; the set may then be partial.
    pub complete: bool,
    /// Roots whose residual `σ(f^n(z), z)` stays above the certification
    /// threshold after polishing, with that residual.
    pub uncertified: Vec<(SpherePoint, f64)>,
}

#[derive(Clone, Copy, Debug)]
pub struct PeriodicOptions {
    pub n_max: usize,
    /// Largest `D^n` enumerated exactly.
    pub exact_cap: usize,
    /// Seeds per side and per chart in the fallback.
    pub seed_grid: usize,
}

impl Default for PeriodicOptions {
    fn default() -> Self {
        PeriodicOptions { n_max: 8, exact_cap: 6561, seed_grid: 160 }
    }
}

/// All points of period dividing `n`.
///
/// For `D^n <= 6561` the `D^n + 1` roots of the fixed-point equation of `f^n`
/// are found by Aberth iteration on that polynomial, evaluated implicitly
/// through the homogeneous iterate (never expanded into coefficients) after a
/// rotation of the sphere that moves every root into the finite plane. Larger
/// cases, and roots Aberth leaves unconverged, fall back to Newton from a seed
/// grid over both charts; `complete` then records whether the distinct roots
/// still account for all `D^n + 1`.
pub fn periodic_points(map: &RationalMap, n: usize) -> Result<PeriodicSet> {
    periodic_points_with(map, n, PeriodicOptions::default())
}

pub fn periodic_points_with(map: &RationalMap, n: usize, opts: PeriodicOptions) -> Result<PeriodicSet> {
    let d = map.degree();
    if n == 0 || n > opts.n_max {
        return Err(Error::Invalid(format!("period {n} outside 1..={}", opts.n_max)));
    }
    let dn = (d as f64).powi(n as i32);
    if dn + 1.0 > 1e5 {
        return Err(Error::Invalid(format!("degree^n + 1 = {} exceeds 1e5", dn + 1.0)));
    }
    let dn = d.pow(n as u32);
    let expected = dn + 1;
    let (raw, mut complete, seeded) = if dn <= opts.exact_cap {
        let (roots, converged) = exact_fixed_points(map, n, expected)?;
        let extra = if converged { Vec::new() } else { seeded_fixed_points(map, n, opts.seed_grid) };
        (roots, converged, extra)
    } else {
        (Vec::new(), false, seeded_fixed_points(map, n, opts.seed_grid))
    };

    let polished: Vec<SpherePoint> = par::map(&raw, |&z| {
        let (r, res) = newton_periodic(map, z, n, 8);
        let r = if res <= spherical_distance(map.iterate(z, n), z) { r } else { z };
        // snap onto 0 or infinity when that is at least as good
        let (chart, u) = r.chart();
        if u != C64::new(0.0, 0.0) && u.norm() < 1e-14 {
            let o = SpherePoint::from_chart(chart, C64::new(0.0, 0.0));
            if spherical_distance(map.iterate(o, n), o) <= spherical_distance(map.iterate(r, n), r) {
                return o;
            }
        }
        r
    });

    // merge to distinct points; seeded points carry no multiplicity
    let mut groups: Vec<(SpherePoint, usize)> = Vec::new();
    let mut index: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let key = |z: SpherePoint| z.to_r3().map(|c| (c / DEDUP_TOL).floor() as i64);
    for (z, m) in polished.into_iter().map(|z| (z, 1)).chain(seeded.into_iter().map(|z| (z, 0))) {
        let k = key(z);
        let mut hit = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(v) = index.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        if let Some(&g) = v.iter().find(|&&g| spherical_distance(groups[g].0, z) < DEDUP_TOL) {
                            hit = Some(g);
                            break 'search;
                        }
                    }
                }
            }
        }
        match hit {
            Some(g) => groups[g].1 += m,
            None => {
                index.entry(k).or_default().push(groups.len());
                groups.push((z, m.max(1)));
            }
        }
    }
    if !complete && groups.iter().map(|g| g.1).sum::<usize>() == expected {
        complete = true;
    }
    let certified: Vec<Result<(PeriodicPoint, usize)>> =
        par::map(&groups, |&(z, m)| PeriodicPoint::certify(map, z, n).map(|p| (p, m)));
    let mut pairs = Vec::new();
    let mut uncertified = Vec::new();
    for (r, &(z, _)) in certified.into_iter().zip(&groups) {
        match r {
            Ok(pair) => pairs.push(pair),
            Err(Error::Residual { residual, .. }) => uncertified.push((z, residual)),
            Err(e) => return Err(e),
        }
    }
    pairs.sort_by(|a, b| point_order(a.0.point, b.0.point));
    uncertified.sort_by(|a, b| point_order(a.0, b.0));
    let (points, multiplicities) = pairs.into_iter().unzip();
    Ok(PeriodicSet { n, points, multiplicities, expected, complete, uncertified })
}

/// Deterministic ordering: by real part, then imaginary part, infinity last.
pub fn point_order(a: SpherePoint, b: SpherePoint) -> Ordering {
    match (a, b) {
        (SpherePoint::Infinity, SpherePoint::Infinity) => Ordering::Equal,
        (SpherePoint::Infinity, _) => Ordering::Greater,
        (_, SpherePoint::Infinity) => Ordering::Less,
        (SpherePoint::Finite(x), SpherePoint::Finite(y)) => x
            .re
            .partial_cmp(&y.re)
            .unwrap_or(Ordering::Equal)
            .then(x.im.partial_cmp(&y.im).unwrap_or(Ordering::Equal)),
    }
}

fn exact_fixed_points(map: &RationalMap, n: usize, expected: usize) -> Result<(Vec<SpherePoint>, bool)> {
    // Send a non-fixed point to infinity so that all D^n + 1 roots are finite.
    // Prefer a point deep in the Fatou set, where `f^n` contracts, so that
    // the dense periodic points near the Julia set are not magnified.
    let rot = (0..64)
        .map(|k| {
            let y = 1.0 - (2 * k + 1) as f64 / 64.0;
            let r = (1.0 - y * y).sqrt();
            let phi = 2.399_963_229_728_653 * k as f64 + 0.37;
            SpherePoint::from_r3([r * phi.cos(), r * phi.sin(), y])
        })
        .filter(|&c| spherical_distance(map.iterate(c, n), c) > 1e-2)
        .map(|c| (map.spherical_derivative_iterate(c, n), c))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| Rotation::to_infinity(c))
        .ok_or_else(|| Error::Invalid("no rotation avoids the fixed points".into()))?;
    let inv = rot.inverse();

    let ratio = |z: C64| {
        let (x, y) = inv.apply_homogeneous(z, ONE);
        let (dx, dy) = inv.apply_homogeneous(ONE, C64::new(0.0, 0.0));
        let j = map.iterate_jet(HomJet { x, y, dx, dy }, n);
        let (bx, by) = rot.apply_homogeneous(j.x, j.y);
        let (dbx, dby) = rot.apply_homogeneous(j.dx, j.dy);
        let h = bx - z * by;
        let dh = dbx - by - z * dby;
        let r = if dh == C64::new(0.0, 0.0) { h } else { h / dh };
        (r, r.norm() <= 1e-13 * z.norm().max(1.0))
    };
    // Depth-n preimages of a generic point equidistribute like the periodic
    // points of period n, so they make a good starting configuration.
    let mut tree = vec![SpherePoint::new(C64::new(0.613, 0.291))];
    for _ in 0..n {
        let mut next = Vec::with_capacity(tree.len() * map.degree());
        for &z in &tree {
            next.extend(map.preimages(z)?);
        }
        tree = next;
    }
    let mut init: Vec<C64> = Vec::with_capacity(expected);
    let mut taken = DistinctPoints::new(1e-12);
    for (k, z) in tree.into_iter().enumerate() {
        let mut w = rot.apply(z).finite().unwrap_or(C64::new(1e6, 0.0));
        while !taken.insert(SpherePoint::new(w)) {
            w += C64::from_polar(1e-9 * w.norm().max(1.0), 0.7 * k as f64);
        }
        init.push(w);
    }
    let mut extra = C64::new(0.5, 0.25);
    while init.len() < expected {
        while !taken.insert(SpherePoint::new(extra)) {
            extra *= C64::new(1.1, 0.3);
        }
        init.push(extra);
    }
    let (roots, _, converged) = poly::aberth(init, 1000, ratio);
    // stragglers are dropped; the caller fills the gap from seeds
    let kept: Vec<SpherePoint> = roots
        .into_iter()
        .filter(|&z| converged || ratio(z).0.norm() <= 1e-8 * z.norm().max(1.0))
        .map(|z| inv.apply(SpherePoint::new(z)))
        .collect();
    Ok((kept, converged))
}

fn seeded_fixed_points(map: &RationalMap, n: usize, grid: usize) -> Vec<SpherePoint> {
    let mut seeds = Vec::with_capacity(2 * grid * grid);
    for chart in [Chart::Affine, Chart::Inverse] {
        for i in 0..grid {
            for j in 0..grid {
                let u = C64::new(
                    -1.0 + 2.0 * (i as f64 + 0.5) / grid as f64,
                    -1.0 + 2.0 * (j as f64 + 0.5) / grid as f64,
                );
                if u.norm_sqr() <= 1.0 {
                    seeds.push(SpherePoint::from_chart(chart, u));
                }
            }
        }
    }
    let found: Vec<Option<SpherePoint>> = par::map(&seeds, |&s| {
        let (z, res) = newton_periodic(map, s, n, 60);
        (res < PERIODIC_RESIDUAL).then_some(z)
    });
    let mut out: Vec<SpherePoint> = Vec::new();
    for z in found.into_iter().flatten() {
        if !out.iter().any(|&p| spherical_distance(p, z) < DEDUP_TOL) {
            out.push(z);
        }
    }
    out
}

impl PeriodicSet {
    /// CSV rows `period,re,im,abs_multiplier,class`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("period,re,im,abs_multiplier,class\n");
        for p in &self.points {
            let (re, im) = coords(p.point);
            let _ = writeln!(s, "{},{},{},{},{}", p.period, re, im, p.multiplier.norm(), p.class.as_str());
        }
        s
    }
}

/// `(re, im)` strings, `inf` at infinity.
pub fn coords(p: SpherePoint) -> (String, String) {
    match p {
        SpherePoint::Finite(z) => (number(z.re), number(z.im)),
        SpherePoint::Infinity => ("inf".into(), "inf".into()),
    }
}

/// Shortest round-trip decimal, in exponent form outside `[1e-5, 1e16)`.
pub fn number(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Forward orbit of one critical point.
#[derive(Clone, Debug)]
pub struct CriticalOrbit {
    pub critical: SpherePoint,
    pub multiplicity: usize,
    /// `f(c), f^2(c), ...` up to the depth or until the orbit repeats.
    pub orbit: Vec<SpherePoint>,
    /// `(preperiod, period)` of the critical value sequence when it cycled.
    pub cycle: Option<(usize, usize)>,
}

/// Postcritical set to finite depth, with backward levels `f^{-m}(O_C)`.
#[derive(Clone, Debug)]
pub struct PostcriticalSet {
    pub depth: usize,
    pub forward: Vec<CriticalOrbit>,
    pub backward_depth: usize,
    /// `backward[m]` holds the distinct points of `f^{-m}(O_C)`; `backward[0] = O_C`.
    pub backward: Vec<Vec<SpherePoint>>,
    pub finite: bool,
}

pub const PREIMAGE_CAP: usize = 100_000;

impl PostcriticalSet {
    /// Distinct points of `O_C` (the forward orbits, critical points excluded
    /// unless they recur).
    pub fn points(&self) -> &[SpherePoint] {
        &self.backward[0]
    }

    /// `f^{-m}(O_C)` for `m <= backward_depth`.
    pub fn level(&self, m: usize) -> &[SpherePoint] {
        &self.backward[m]
    }
}

pub fn postcritical(map: &RationalMap, depth: usize, backward_depth: usize) -> Result<PostcriticalSet> {
    if depth == 0 {
        return Err(Error::Invalid("depth must be >= 1".into()));
    }
    let crit = map.critical_points()?;
    let mut distinct: Vec<(SpherePoint, usize)> = Vec::new();
    for c in crit {
        match distinct.iter_mut().find(|(p, _)| spherical_distance(*p, c) < 1e-6) {
            Some(e) => e.1 += 1,
            None => distinct.push((c, 1)),
        }
    }
    let mut forward = Vec::new();
    for (c, m) in distinct {
        let mut orbit = Vec::new();
        let mut cycle = None;
        let mut z = c;
        for _ in 0..depth {
            z = map.eval(z);
            // index 0 of `seen` is c itself, index k is f^k(c)
            let hit = std::iter::once(&c)
                .chain(orbit.iter())
                .position(|&p| spherical_distance(p, z) < SNAP_TOL);
            if let Some(k) = hit {
                let len = orbit.len() + 1;
                cycle = Some((k, len - k));
                break;
            }
            orbit.push(z);
        }
        forward.push(CriticalOrbit { critical: c, multiplicity: m, orbit, cycle });
    }
    let finite = forward.iter().all(|o| o.cycle.is_some());

    let mut level0: Vec<SpherePoint> = Vec::new();
    for o in &forward {
        // a critical point belongs to O_C only when its orbit comes back to it
        let pts = o.orbit.iter().copied().chain(match o.cycle {
            Some((0, _)) => Some(o.critical),
            _ => None,
        });
        for p in pts {
            push_distinct(&mut level0, p, SNAP_TOL);
        }
    }
    let mut backward = vec![level0];
    let mut total = backward[0].len();
    for _ in 0..backward_depth {
        let prev = backward.last().unwrap();
        let pre: Vec<Result<Vec<SpherePoint>>> = par::map(prev, |&t| map.preimages(t));
        let mut next = DistinctPoints::new(SNAP_TOL);
        for p in pre {
            for z in p? {
                next.insert(z);
            }
        }
        let next = next.points;
        total += next.len();
        if total > PREIMAGE_CAP {
            return Err(Error::PreimageCap(PREIMAGE_CAP));
        }
        backward.push(next);
    }
    Ok(PostcriticalSet { depth, forward, backward_depth, backward, finite })
}

fn push_distinct(v: &mut Vec<SpherePoint>, z: SpherePoint, tol: f64) {
    if !v.iter().any(|&p| spherical_distance(p, z) < tol) {
        v.push(z);
    }
}

/// Points deduplicated at a fixed chordal tolerance via a hash grid on the
/// unit-sphere embedding.
pub(crate) struct DistinctPoints {
    tol: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
    pub points: Vec<SpherePoint>,
}

impl DistinctPoints {
    pub fn new(tol: f64) -> Self {
        DistinctPoints { tol, cells: HashMap::new(), points: Vec::new() }
    }

    fn key(&self, x: [f64; 3]) -> [i64; 3] {
        x.map(|c| (c / self.tol).floor() as i64)
    }

    /// Insert unless a stored point is within `tol`; returns whether inserted.
    pub fn insert(&mut self, z: SpherePoint) -> bool {
        let x = z.to_r3();
        let k = self.key(x);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        if ids.iter().any(|&i| spherical_distance(self.points[i], z) < self.tol) {
                            return false;
                        }
                    }
                }
            }
        }
        self.cells.entry(k).or_default().push(self.points.len());
        self.points.push(z);
        true
    }
}

/// Smallest `(preperiod, period)` in lexicographic order with
/// `σ(f^{l+q}(z), f^l(z)) < tol`, confirmed by Newton-refining `f^l(z)` onto a
/// genuine point of period `q` no further than `10 tol` away.
pub fn eventually_periodic_test(
    map: &RationalMap,
    z: SpherePoint,
    preperiod_max: usize,
    period_max: usize,
    tol: f64,
) -> Option<(usize, usize)> {
    let orb = orbit(map, z, preperiod_max + period_max);
    for l in 0..=preperiod_max {
        for q in 1..=period_max {
            if spherical_distance(orb[l + q], orb[l]) < tol {
                let (r, res) = newton_periodic(map, orb[l], q, 50);
                if res < PERIODIC_RESIDUAL && spherical_distance(r, orb[l]) < 10.0 * tol {
                    return Some((l, q));
                }
            }
        }
    }
    None
}
