//! Chords joining two basin centres through a common landing point: isotopy
//! tests relative to marked points, lifts, the periodic pullback and a
//! catalog of periodic junctions.

use crate::angle::{periodic_angles, Angle};
use crate::boettcher::BoettcherChart;
use crate::dynamics::{newton_periodic, PeriodicPoint, PERIODIC_RESIDUAL};
use crate::error::{Error, Result};
use crate::map::RationalMap;
use crate::rays::{trace_rays, Ray, RayOptions};
use crate::sphere::{r3_dist, spherical_distance, spherical_midpoint, SpherePoint};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

/// Near-return threshold used to pick the push-forward time of a pullback.
pub const NEAR_RETURN_TOL: f64 = 1e-4;
/// Orbit horizon for the near-return search.
pub const NEAR_RETURN_HORIZON: usize = 200;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Chord {
    pub ray1: Ray,
    pub ray2: Ray,
    pub junction: SpherePoint,
    /// The two basin centres `a1`, `a2`.
    pub ends: [SpherePoint; 2],
}

impl Chord {
    /// Join two landed rays whose landing points agree within `tol`.
    pub fn join(ray1: Ray, ray2: Ray, ends: [SpherePoint; 2], tol: f64) -> Result<Chord> {
        let (Some(x1), Some(x2)) = (ray1.landing_point, ray2.landing_point) else {
            return Err(Error::Invalid("both rays of a chord must land".into()));
        };
        let gap = spherical_distance(x1, x2);
        if gap >= tol {
            return Err(Error::Invalid(format!("landing points {gap:.3e} apart")));
        }
        let junction = match (ray1.refined, ray2.refined) {
            (true, _) => x1,
            (false, true) => x2,
            _ => spherical_midpoint(x1, x2),
        };
        Ok(Chord { ray1, ray2, junction, ends })
    }

    pub fn angles(&self) -> (&Angle, &Angle) {
        (&self.ray1.angle, &self.ray2.angle)
    }

    /// `a1`, the first ray outward, the junction, the second ray inward, `a2`.
    pub fn polyline(&self) -> Vec<SpherePoint> {
        let mut out = Vec::with_capacity(self.ray1.polyline.len() + self.ray2.polyline.len() + 3);
        out.push(self.ends[0]);
        out.extend(&self.ray1.polyline);
        out.push(self.junction);
        out.extend(self.ray2.polyline.iter().rev());
        out.push(self.ends[1]);
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("chord serializes")
    }
}

// ---------------------------------------------------------------------------
// Hausdorff distance

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn lerp(a: [f64; 3], b: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1]), a[2] + s * (b[2] - a[2])]
}

fn point_segment(p: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let s = if len2 > 0.0 { (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    r3_dist(p, lerp(a, b, s))
}

/// Distances from `p` to each segment of `poly`.
fn segment_distances(p: [f64; 3], poly: &[[f64; 3]]) -> Vec<f64> {
    if poly.len() == 1 {
        return vec![r3_dist(p, poly[0])];
    }
    poly.windows(2).map(|w| point_segment(p, w[0], w[1])).collect()
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// min over `b` of `max(d0[b], d1[b])`: an upper bound for the distance to
/// `B` on the whole segment, since distance to a segment is convex.
fn upper(d0: &[f64], d1: &[f64]) -> f64 {
    d0.iter().zip(d1).map(|(x, y)| x.max(*y)).fold(f64::INFINITY, f64::min)
}

struct Interval {
    ub: f64,
    seg: usize,
    s0: f64,
    s1: f64,
}

impl PartialEq for Interval {
    fn eq(&self, o: &Self) -> bool {
        self.ub == o.ub
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Interval {
    fn cmp(&self, o: &Self) -> Ordering {
        self.ub.total_cmp(&o.ub)
    }
}

/// `sup_{a in A} dist(a, B)` for polygonal chains in R^3, to within `eps`.
fn directed_hausdorff(a: &[[f64; 3]], b: &[[f64; 3]], eps: f64) -> f64 {
    let vd: Vec<Vec<f64>> = a.iter().map(|&p| segment_distances(p, b)).collect();
    let mut best = vd.iter().map(|d| min(d)).fold(0.0, f64::max);
    let mut heap = BinaryHeap::new();
    for k in 0..a.len().saturating_sub(1) {
        let ub = upper(&vd[k], &vd[k + 1]);
        if ub > best + eps {
            heap.push(Interval { ub, seg: k, s0: 0.0, s1: 1.0 });
        }
    }
    while let Some(iv) = heap.pop() {
        if iv.ub <= best + eps {
            break;
        }
        let (p, q) = (a[iv.seg], a[iv.seg + 1]);
        let d0 = segment_distances(lerp(p, q, iv.s0), b);
        let d1 = segment_distances(lerp(p, q, iv.s1), b);
        let sm = 0.5 * (iv.s0 + iv.s1);
        let dm = segment_distances(lerp(p, q, sm), b);
        best = best.max(min(&dm));
        if sm <= iv.s0 || sm >= iv.s1 {
            continue;
        }
        for (s0, s1, ub) in [(iv.s0, sm, upper(&d0, &dm)), (sm, iv.s1, upper(&dm, &d1))] {
            if ub > best + eps {
                heap.push(Interval { ub, seg: iv.seg, s0, s1 });
            }
        }
    }
    best
}

/// Hausdorff distance between two point chains on the sphere, each read as
/// straight segments between consecutive points of the unit-sphere embedding
/// (so the chordal metric on vertices is the Euclidean one).
pub fn hausdorff_polylines(a: &[SpherePoint], b: &[SpherePoint]) -> f64 {
    let a: Vec<[f64; 3]> = a.iter().map(|p| p.to_r3()).collect();
    let b: Vec<[f64; 3]> = b.iter().map(|p| p.to_r3()).collect();
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    directed_hausdorff(&a, &b, 1e-14).max(directed_hausdorff(&b, &a, 1e-14))
}

pub fn hausdorff_distance(a: &Chord, b: &Chord) -> f64 {
    hausdorff_polylines(&a.polyline(), &b.polyline())
}

// ---------------------------------------------------------------------------
// Isotopy classes via crossing parity

/// Great-circle arcs of a closed loop, split so none exceeds a quarter turn.
fn loop_arcs(points: &[SpherePoint]) -> Vec<([f64; 3], [f64; 3])> {
    let mut pts: Vec<[f64; 3]> = Vec::with_capacity(points.len());
    for p in points {
        let x = p.to_r3();
        if pts.last().map_or(true, |&l| r3_dist(l, x) > 1e-15) {
            pts.push(x);
        }
    }
    let mut arcs = Vec::with_capacity(pts.len());
    let n = pts.len();
    for i in 0..n {
        let (u, v) = (pts[i], pts[(i + 1) % n]);
        push_arc(&mut arcs, u, v, 0);
    }
    arcs
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = dot(v, v).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn push_arc(arcs: &mut Vec<([f64; 3], [f64; 3])>, u: [f64; 3], v: [f64; 3], depth: usize) {
    if r3_dist(u, v) < 1e-15 {
        return;
    }
    if r3_dist(u, v) > 1.0 && depth < 8 {
        let m = [u[0] + v[0], u[1] + v[1], u[2] + v[2]];
        let m = if dot(m, m) < 1e-20 {
            // antipodal: any perpendicular direction
            let t = if u[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
            normalize(cross(u, t))
        } else {
            normalize(m)
        };
        push_arc(arcs, u, m, depth + 1);
        push_arc(arcs, m, v, depth + 1);
    } else {
        arcs.push((u, v));
    }
}

/// Chordal distance from `p` to a minor great-circle arc.
fn point_arc(p: [f64; 3], u: [f64; 3], v: [f64; 3]) -> f64 {
    let n = cross(u, v);
    let nn = dot(n, n);
    let ends = r3_dist(p, u).min(r3_dist(p, v));
    if nn < 1e-30 {
        return ends;
    }
    let k = dot(p, n) / nn;
    let proj = [p[0] - k * n[0], p[1] - k * n[1], p[2] - k * n[2]];
    if dot(proj, proj) < 1e-30 {
        return ends;
    }
    let q = normalize(proj);
    if dot(cross(u, q), n) >= 0.0 && dot(cross(q, v), n) >= 0.0 {
        r3_dist(p, q)
    } else {
        ends
    }
}

fn on_arc(x: [f64; 3], u: [f64; 3], v: [f64; 3], n: [f64; 3]) -> bool {
    dot(cross(u, x), n) >= 0.0 && dot(cross(x, v), n) >= 0.0
}

/// Whether two minor great-circle arcs cross.
fn arcs_cross(a: ([f64; 3], [f64; 3]), b: ([f64; 3], [f64; 3])) -> bool {
    let n1 = cross(a.0, a.1);
    let n2 = cross(b.0, b.1);
    let l = cross(n1, n2);
    if dot(l, l) < 1e-30 {
        return false;
    }
    let x = normalize(l);
    let y = [-x[0], -x[1], -x[2]];
    [x, y].into_iter().any(|c| on_arc(c, a.0, a.1, n1) && on_arc(c, b.0, b.1, n2))
}

fn curve_distance(p: [f64; 3], arcs: &[([f64; 3], [f64; 3])]) -> f64 {
    arcs.iter().map(|&(u, v)| point_arc(p, u, v)).fold(f64::INFINITY, f64::min)
}

/// Fibonacci-sphere candidate, farthest from the loop: the common reference
/// point for crossing parities.
fn reference_point(arcs: &[([f64; 3], [f64; 3])]) -> [f64; 3] {
    let n = 512;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .map(|c| (curve_distance(c, arcs), c))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap()
        .1
}

/// Parity of crossings of a path from `p` to `reference` with the loop.
fn crossing_parity(p: [f64; 3], reference: [f64; 3], arcs: &[([f64; 3], [f64; 3])]) -> bool {
    let mut path = Vec::new();
    push_arc(&mut path, p, reference, 0);
    let mut parity = false;
    for &leg in &path {
        for &arc in arcs {
            if arcs_cross(leg, arc) {
                parity = !parity;
            }
        }
    }
    parity
}

/// Whether one component of the complement of `A ∪ B` contains every marked
/// point other than the two basin centres.
///
/// Each marked point is classified by the parity of crossings of a path to a
/// common reference point. When the chords share their junction the union is
/// two loops (one through each centre), and the class is the pair of parities.
pub fn same_isotopy_class(a: &Chord, b: &Chord, marked: &[SpherePoint], tol: f64) -> Result<bool> {
    for k in 0..2 {
        if spherical_distance(a.ends[k], b.ends[k]) > tol {
            return Err(Error::Invalid("chords join different centres".into()));
        }
    }
    let marked: Vec<[f64; 3]> = marked
        .iter()
        .filter(|&&p| a.ends.iter().all(|&e| spherical_distance(p, e) >= tol))
        .map(|p| p.to_r3())
        .collect();

    let shared = spherical_distance(a.junction, b.junction) < tol;
    let loops: Vec<Vec<SpherePoint>> = if shared {
        let half = |c: &Chord, first: bool| -> Vec<SpherePoint> {
            let mut v = vec![c.ends[if first { 0 } else { 1 }]];
            v.extend(if first { &c.ray1.polyline } else { &c.ray2.polyline });
            v.push(c.junction);
            v
        };
        (0..2)
            .map(|k| {
                let mut l = half(a, k == 0);
                let mut back = half(b, k == 0);
                back.reverse();
                l.extend(back);
                l
            })
            .collect()
    } else {
        let mut l = a.polyline();
        l.extend(b.polyline().into_iter().rev());
        vec![l]
    };

    let mut classes: Vec<Vec<bool>> = vec![Vec::new(); marked.len()];
    for l in &loops {
        let arcs = loop_arcs(l);
        if arcs.is_empty() {
            continue;
        }
        for &p in &marked {
            if curve_distance(p, &arcs) < tol {
                return Err(Error::MarkedOnCurve(tol));
            }
        }
        let reference = reference_point(&arcs);
        for (i, &p) in marked.iter().enumerate() {
            classes[i].push(crossing_parity(p, reference, &arcs));
        }
    }
    Ok(classes.windows(2).all(|w| w[0] == w[1]))
}

// ---------------------------------------------------------------------------
// Chords between two basins

/// A pair of charted basins with their fixed centres, and the tracing options.
#[derive(Clone, Debug)]
pub struct ChordSpace {
    pub map: RationalMap,
    pub charts: [BoettcherChart; 2],
    /// Basin ids recorded on traced rays.
    pub basins: [usize; 2],
    pub rays: RayOptions,
    pub junction_tol: f64,
}

/// A matched chord and its certified junction.
#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub chord: Chord,
    pub periodic: PeriodicPoint,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PullbackReport {
    /// Push-forward time `M`: the first with `σ(f^M x, f^(M+Q) x)` below the
    /// near-return threshold, `x` the starting junction.
    pub push_forward: usize,
    pub near_return_distance: f64,
    /// Angle pairs of the stages, starting with the pushed-forward chord.
    pub stages: Vec<(Angle, Angle)>,
    /// `d_H(stage k+1, stage k)`.
    pub gaps: Vec<f64>,
    pub junction: SpherePoint,
    /// `σ(f^Q(junction), junction)` after refinement.
    pub junction_residual: f64,
    pub periodic: Option<PeriodicPoint>,
}

impl ChordSpace {
    pub fn new(map: RationalMap, charts: [BoettcherChart; 2], basins: [usize; 2]) -> Self {
        ChordSpace { map, charts, basins, rays: RayOptions::default(), junction_tol: 1e-6 }
    }

    fn degree(&self, k: usize) -> u64 {
        self.charts[k].local_degree as u64
    }

    /// Rays of basin `k` (0 or 1) at `angles`; failures are dropped.
    pub fn trace(&self, k: usize, angles: &[Angle]) -> Result<Vec<Ray>> {
        let out = trace_rays(&self.map, &self.charts[k], self.basins[k], angles, &self.rays)?;
        Ok(out.into_iter().filter_map(|r| r.ok()).filter(|r| r.landed).collect())
    }

    fn trace_one(&self, k: usize, t: &Angle) -> Result<Ray> {
        let mut r = trace_rays(&self.map, &self.charts[k], self.basins[k], std::slice::from_ref(t), &self.rays)?;
        let ray = r.pop().unwrap()?;
        if !ray.landed {
            return Err(Error::NoLanding(t.to_string(), self.rays.max_steps));
        }
        Ok(ray)
    }

    fn ends(&self) -> [SpherePoint; 2] {
        [self.charts[0].attractor, self.charts[1].attractor]
    }

    /// The chord of angles `(t1, t2)`, if both rays land together.
    pub fn chord(&self, t1: &Angle, t2: &Angle) -> Result<Chord> {
        let r1 = self.trace_one(0, t1)?;
        let r2 = self.trace_one(1, t2)?;
        Chord::join(r1, r2, self.ends(), self.junction_tol)
    }

    /// All chords between the two angle sets: landing points are matched
    /// greedily by distance, then sorted by angle pair.
    pub fn detect_chords(&self, angles1: &[Angle], angles2: &[Angle]) -> Result<Vec<Chord>> {
        let r1 = self.trace(0, angles1)?;
        let r2 = self.trace(1, angles2)?;
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (i, a) in r1.iter().enumerate() {
            for (j, b) in r2.iter().enumerate() {
                let d = spherical_distance(a.landing_point.unwrap(), b.landing_point.unwrap());
                if d < self.junction_tol {
                    pairs.push((d, i, j));
                }
            }
        }
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let (mut used1, mut used2) = (vec![false; r1.len()], vec![false; r2.len()]);
        let mut out = Vec::new();
        for (_, i, j) in pairs {
            if used1[i] || used2[j] {
                continue;
            }
            used1[i] = true;
            used2[j] = true;
            out.push(Chord::join(r1[i].clone(), r2[j].clone(), self.ends(), self.junction_tol)?);
        }
        out.sort_by(|a, b| a.angles().cmp(&b.angles()));
        Ok(out)
    }

    /// The lift of `chord` through `target`, a preimage of its junction.
    ///
    /// Candidate angles are `(t + j)/d1` and `(t' + k)/d2`; exactly one pair
    /// must land within `tol` of `target`.
    pub fn lift_chord(&self, chord: &Chord, target: SpherePoint, tol: f64) -> Result<Chord> {
        let image_gap = spherical_distance(self.map.eval(target), chord.junction);
        if image_gap >= tol {
            return Err(Error::Invalid(format!("target is not a preimage of the junction ({image_gap:.3e})")));
        }
        let (t1, t2) = chord.angles();
        let near = |k: usize, t: &Angle| -> Result<Vec<Ray>> {
            Ok(self
                .trace(k, &t.preimages(self.degree(k)))?
                .into_iter()
                .filter(|r| spherical_distance(r.landing_point.unwrap(), target) < tol)
                .collect())
        };
        let c1 = near(0, t1)?;
        let c2 = near(1, t2)?;
        if c1.len() != 1 || c2.len() != 1 {
            return Err(Error::LiftMismatch { count: c1.len() * c2.len() });
        }
        let lifted = Chord::join(c1[0].clone(), c2[0].clone(), self.ends(), tol)?;
        debug_assert_eq!(&lifted.ray1.angle.step(self.degree(0)), t1);
        debug_assert_eq!(&lifted.ray2.angle.step(self.degree(1)), t2);
        Ok(lifted)
    }

    /// The chord pushed forward `n` times: angles `(d1^n t, d2^n t')`.
    pub fn push_forward(&self, chord: &Chord, n: usize) -> Result<Chord> {
        let (t1, t2) = chord.angles();
        self.chord(&t1.step_n(self.degree(0), n as u32), &t2.step_n(self.degree(1), n as u32))
    }

    /// Pull a chord back towards a periodic chord.
    ///
    /// The chord is first pushed forward to the first near-return time `M` of
    /// its junction at lag `Q`. Each stage then lifts the current chord `Q`
    /// times along the chain of preimages ending at the point of
    /// `f^-Q(junction)` closest to the junction. Stops once consecutive stages
    /// are within `conv_tol` in Hausdorff distance, and Newton-refines the
    /// final junction to a point of period dividing `Q`.
    pub fn pullback_periodic(
        &self,
        chord: &Chord,
        q: usize,
        max_stages: usize,
        conv_tol: f64,
    ) -> Result<(Chord, PullbackReport)> {
        if q == 0 {
            return Err(Error::Invalid("Q must be >= 1".into()));
        }
        let orbit = crate::dynamics::orbit(&self.map, chord.junction, NEAR_RETURN_HORIZON + q);
        let (m, dist) = (0..=NEAR_RETURN_HORIZON)
            .map(|m| (m, spherical_distance(orbit[m], orbit[m + q])))
            .find(|&(_, d)| d < NEAR_RETURN_TOL)
            .ok_or_else(|| Error::Pullback(format!("no near-return at lag {q} within {NEAR_RETURN_HORIZON} iterates")))?;

        let mut current = self.push_forward(chord, m)?;
        let mut stages = vec![(current.ray1.angle.clone(), current.ray2.angle.clone())];
        let mut gaps: Vec<f64> = Vec::new();
        let mut converged = false;
        for _ in 0..max_stages {
            let chain = self.preimage_chain(current.junction, q)?;
            let mut next = current.clone();
            for &target in &chain {
                next = self.lift_chord(&next, target, self.junction_tol)?;
            }
            let gap = hausdorff_distance(&next, &current);
            gaps.push(gap);
            stages.push((next.ray1.angle.clone(), next.ray2.angle.clone()));
            current = next;
            if gap < conv_tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Pullback(format!("Hausdorff gaps {gaps:?} did not fall below {conv_tol:e}")));
        }

        let (junction, residual) = newton_periodic(&self.map, current.junction, q, 60);
        if residual < PERIODIC_RESIDUAL && spherical_distance(junction, current.junction) < self.junction_tol {
            current.junction = junction;
        }
        let junction_residual = spherical_distance(self.map.iterate(current.junction, q), current.junction);
        let periodic = PeriodicPoint::certify(&self.map, current.junction, q).ok();
        let report = PullbackReport {
            push_forward: m,
            near_return_distance: dist,
            stages,
            gaps,
            junction: current.junction,
            junction_residual,
            periodic,
        };
        Ok((current, report))
    }

    /// `[f^(q-1)(y), ..., f(y), y]` for the point `y` of `f^-q(x)` closest to `x`,
    /// built from exact preimages.
    fn preimage_chain(&self, x: SpherePoint, q: usize) -> Result<Vec<SpherePoint>> {
        let mut levels: Vec<Vec<(SpherePoint, usize)>> = vec![vec![(x, 0)]];
        for k in 0..q {
            let mut next = Vec::new();
            for (i, &(p, _)) in levels[k].iter().enumerate() {
                for z in self.map.preimages(p)? {
                    next.push((z, i));
                }
            }
            levels.push(next);
        }
        let last = &levels[q];
        let mut idx = (0..last.len())
            .min_by(|&a, &b| spherical_distance(last[a].0, x).total_cmp(&spherical_distance(last[b].0, x)))
            .unwrap();
        let mut chain = Vec::with_capacity(q);
        for k in (1..=q).rev() {
            chain.push(levels[k][idx].0);
            idx = levels[k][idx].1;
        }
        chain.reverse();
        Ok(chain)
    }

    /// Chords between periodic angles `k/(d^p - 1)`, `p <= bound`, with their
    /// junctions certified as periodic points. Sorted by angle pair.
    pub fn boundary_periodic_catalog(&self, bound: u32) -> Result<Vec<CatalogEntry>> {
        let a1 = periodic_angles(self.degree(0), bound);
        let a2 = periodic_angles(self.degree(1), bound);
        let chords = self.detect_chords(&a1, &a2)?;
        let mut out = Vec::new();
        for chord in chords {
            let (_, p) = chord.ray1.angle.eventual_period(self.degree(0));
            if let Ok(periodic) = PeriodicPoint::certify(&self.map, chord.junction, p) {
                out.push(CatalogEntry { chord, periodic });
            }
        }
        Ok(out)
    }
}

/// CSV: `angle1,angle2,junction_re,junction_im,period,abs_multiplier`.
pub fn catalog_csv(entries: &[CatalogEntry]) -> String {
    let mut s = String::from("angle1,angle2,junction_re,junction_im,period,abs_multiplier\n");
    for e in entries {
        let (re, im) = crate::dynamics::coords(e.chord.junction);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            e.chord.ray1.angle,
            e.chord.ray2.angle,
            re,
            im,
            e.periodic.period,
            e.periodic.multiplier.norm()
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boettcher::build_chart;
    use crate::builtins;
    use crate::rays::functional_equation_residual;
    use crate::sphere::C64;

    fn a(p: u64, q: u64) -> Angle {
        Angle::from_u64(p, q).unwrap()
    }

    pub(crate) fn z2_space() -> ChordSpace {
        let f = builtins::z_squared();
        let c0 = build_chart(&f, SpherePoint::real(0.0), 2).unwrap();
        let c1 = build_chart(&f, SpherePoint::Infinity, 2).unwrap();
        ChordSpace::new(f, [c0, c1], [0, 1])
    }

    fn basilica_space() -> ChordSpace {
        let f = builtins::basilica2();
        let c0 = build_chart(&f, SpherePoint::real(0.0), 2).unwrap();
        let c1 = build_chart(&f, SpherePoint::real(-1.0), 2).unwrap();
        ChordSpace::new(f, [c0, c1], [0, 1])
    }

    fn newton_space() -> ChordSpace {
        let f = builtins::newton_cubic();
        let c0 = build_chart(&f, SpherePoint::real(1.0), 2).unwrap();
        let c1 = build_chart(&f, SpherePoint::from_polar(1.0, 1.0 / 3.0), 2).unwrap();
        ChordSpace::new(f, [c0, c1], [0, 1])
    }

    fn alpha() -> SpherePoint {
        SpherePoint::real((1.0 - 5f64.sqrt()) / 2.0)
    }

    #[test]
    fn z2_chords_at_sevenths() {
        let s = z2_space();
        let angles: Vec<Angle> = (0..7).map(|k| a(k, 7)).collect();
        let chords = s.detect_chords(&angles, &angles).unwrap();
        assert_eq!(chords.len(), 7);
        for c in &chords {
            let (t1, t2) = c.angles();
            assert_eq!(t2, &t1.neg());
            let w = SpherePoint::from_polar(1.0, t1.to_f64());
            assert!(spherical_distance(c.junction, w) < 1e-13);
        }
    }

    #[test]
    fn basilica_and_newton_fixed_chords() {
        let s = basilica_space();
        let c = s.detect_chords(&[Angle::zero()], &[Angle::zero()]).unwrap();
        assert_eq!(c.len(), 1);
        assert!(spherical_distance(c[0].junction, alpha()) < 1e-12);
        let s = newton_space();
        let c = s.detect_chords(&[Angle::zero()], &[Angle::zero()]).unwrap();
        assert_eq!(c.len(), 1);
        assert!(spherical_distance(c[0].junction, SpherePoint::Infinity) < 1e-12);
    }

    #[test]
    fn hausdorff_examples() {
        let s = z2_space();
        let c0 = s.chord(&a(0, 1), &a(0, 1)).unwrap();
        let c1 = s.chord(&a(1, 2), &a(1, 2)).unwrap();
        assert_eq!(hausdorff_distance(&c0, &c0), 0.0);
        let d = hausdorff_distance(&c0, &c1);
        assert!((d - 2f64.sqrt()).abs() < 1e-3, "{d}");
        assert_eq!(d, hausdorff_distance(&c1, &c0));
        // half-density resampling
        let p = c0.polyline();
        let half: Vec<SpherePoint> = p.iter().step_by(2).chain(p.last()).copied().collect();
        let spacing = p.windows(2).map(|w| spherical_distance(w[0], w[1])).fold(0.0, f64::max);
        assert!(hausdorff_polylines(&p, &half) < 2.0 * spacing);
    }

    #[test]
    fn hausdorff_matches_dense_sampling() {
        let pts = |v: &[(f64, f64)]| -> Vec<SpherePoint> {
            v.iter().map(|&(x, y)| SpherePoint::new(C64::new(x, y))).collect()
        };
        let a = pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)]);
        let b = pts(&[(0.0, 0.5), (0.8, 0.3)]);
        let ra: Vec<[f64; 3]> = a.iter().map(|p| p.to_r3()).collect();
        let rb: Vec<[f64; 3]> = b.iter().map(|p| p.to_r3()).collect();
        let sample = |x: &[[f64; 3]], y: &[[f64; 3]]| {
            let mut best: f64 = 0.0;
            for w in x.windows(2) {
                for k in 0..=20000 {
                    let p = lerp(w[0], w[1], k as f64 / 20000.0);
                    best = best.max(min(&segment_distances(p, y)));
                }
            }
            best
        };
        let brute = sample(&ra, &rb).max(sample(&rb, &ra));
        let exact = hausdorff_polylines(&a, &b);
        assert!(exact >= brute - 1e-12 && exact - brute < 1e-4, "{exact} {brute}");
    }

    #[test]
    fn isotopy_examples() {
        let s = z2_space();
        let i = SpherePoint::new(C64::new(0.0, 1.0));
        let mi = SpherePoint::new(C64::new(0.0, -1.0));
        let c0 = s.chord(&a(0, 1), &a(0, 1)).unwrap();
        let c1 = s.chord(&a(1, 2), &a(1, 2)).unwrap();
        assert!(same_isotopy_class(&c0, &c0, &[i, mi], 1e-6).unwrap());
        assert!(!same_isotopy_class(&c0, &c1, &[i, mi], 1e-6).unwrap());
        let c7 = s.chord(&a(1, 7), &a(6, 7)).unwrap();
        let c27 = s.chord(&a(2, 7), &a(5, 7)).unwrap();
        assert!(same_isotopy_class(&c7, &c27, &[SpherePoint::real(-1.0)], 1e-6).unwrap());
        assert!(!same_isotopy_class(&c7, &c27, &[SpherePoint::real(-1.0), SpherePoint::from_polar(0.5, 1.5 / 7.0)], 1e-6).unwrap());
        assert!(matches!(
            same_isotopy_class(&c0, &c1, &[SpherePoint::real(0.5)], 1e-6),
            Err(Error::MarkedOnCurve(_))
        ));
    }

    #[test]
    fn lift_examples() {
        let s = z2_space();
        let c0 = s.chord(&a(0, 1), &a(0, 1)).unwrap();
        let l = s.lift_chord(&c0, SpherePoint::real(-1.0), 1e-6).unwrap();
        assert_eq!(l.angles(), (&a(1, 2), &a(1, 2)));
        assert!(spherical_distance(l.junction, SpherePoint::real(-1.0)) < 1e-14);

        let c3 = s.chord(&a(1, 3), &a(2, 3)).unwrap();
        let target = SpherePoint::from_polar(1.0, 2.0 / 3.0);
        let l = s.lift_chord(&c3, target, 1e-6).unwrap();
        assert_eq!(l.angles(), (&a(2, 3), &a(1, 3)));
        let target = SpherePoint::from_polar(1.0, 1.0 / 6.0);
        let l = s.lift_chord(&c3, target, 1e-6).unwrap();
        assert_eq!(l.angles(), (&a(1, 6), &a(5, 6)));
        // the lifted rays map vertex by vertex onto the original ones
        let sub = s.rays.substeps;
        assert!(functional_equation_residual(&s.map, &l.ray1, &c3.ray1, sub) < 1e-12);
        assert!(functional_equation_residual(&s.map, &l.ray2, &c3.ray2, sub) < 1e-12);
        assert!(s.lift_chord(&c3, SpherePoint::real(0.3), 1e-6).is_err());

        let b = basilica_space();
        let c = b.chord(&Angle::zero(), &Angle::zero()).unwrap();
        let l = b.lift_chord(&c, alpha(), 1e-6).unwrap();
        assert_eq!(l.angles(), (&Angle::zero(), &Angle::zero()));
        assert_eq!(hausdorff_distance(&l, &c), 0.0);
    }

    #[test]
    fn pullback_of_periodic_chord_is_stationary() {
        let s = z2_space();
        let c = s.chord(&a(1, 3), &a(2, 3)).unwrap();
        let (limit, rep) = s.pullback_periodic(&c, 2, 5, 1e-9).unwrap();
        assert_eq!(rep.push_forward, 0);
        assert_eq!(rep.gaps, vec![0.0]);
        assert_eq!(limit.angles(), (&a(1, 3), &a(2, 3)));
        assert!(rep.junction_residual < 1e-12);

        let b = basilica_space();
        let c = b.chord(&Angle::zero(), &Angle::zero()).unwrap();
        let (_, rep) = b.pullback_periodic(&c, 1, 3, 1e-8).unwrap();
        assert!(rep.gaps[0] < 1e-8);
    }

    #[test]
    fn pullback_converges_to_periodic_chord() {
        let s = z2_space();
        let t = Angle::new(num_bigint::BigUint::from((1u64 << 20) + 3), num_bigint::BigUint::from(3u64 << 20)).unwrap();
        let c = s.chord(&t, &t.neg()).unwrap();
        let (limit, rep) = s.pullback_periodic(&c, 2, 20, 1e-9).unwrap();
        assert_eq!(rep.push_forward, 0);
        assert!(rep.gaps.len() >= 3);
        assert!(rep.gaps.windows(2).all(|w| w[1] < w[0]), "{:?}", rep.gaps);
        assert!(rep.junction_residual < 1e-9);
        let target = SpherePoint::from_polar(1.0, 1.0 / 3.0);
        assert!(spherical_distance(limit.junction, target) < 1e-12);
    }

    #[test]
    fn newton_pullback_reaches_chord_through_infinity() {
        let s = newton_space();
        let c = s.chord(&a(1, 2), &a(1, 2)).unwrap();
        assert!(spherical_distance(c.junction, SpherePoint::real(0.0)) < 1e-9);
        let (limit, rep) = s.pullback_periodic(&c, 1, 5, 1e-6).unwrap();
        assert_eq!(rep.push_forward, 1);
        assert!(spherical_distance(limit.junction, SpherePoint::Infinity) < 1e-12);
        let m = rep.periodic.unwrap().multiplier;
        assert!((m - C64::new(1.5, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn catalogs() {
        let s = z2_space();
        let cat = s.boundary_periodic_catalog(3).unwrap();
        assert_eq!(cat.len(), 9);
        for e in &cat {
            let expect = 2f64.powi(e.periodic.period as i32);
            assert!((e.periodic.multiplier.norm() - expect).abs() < 1e-9);
        }
        let csv = catalog_csv(&cat);
        assert_eq!(csv.lines().count(), 10);
        let b = basilica_space().boundary_periodic_catalog(1).unwrap();
        assert_eq!(b.len(), 1);
        assert!(spherical_distance(b[0].chord.junction, alpha()) < 1e-12);
        let n = newton_space().boundary_periodic_catalog(1).unwrap();
        assert_eq!(n.len(), 1);
        assert!(spherical_distance(n[0].chord.junction, SpherePoint::Infinity) < 1e-12);
    }

    #[test]
    fn chord_json_round_trip() {
        let s = z2_space();
        let c = s.chord(&a(1, 3), &a(2, 3)).unwrap();
        let back: Chord = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back.angles(), c.angles());
        assert_eq!(back.polyline().len(), c.polyline().len());
    }
}
