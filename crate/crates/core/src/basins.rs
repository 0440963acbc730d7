//! Grid classification of attracting basins over two charts, immediate basin
//! components, and sampling of the common boundary of two immediate basins.

use crate::dynamics::{periodic_points, DistinctPoints, PeriodicPoint};
use crate::error::{Error, Result};
use crate::map::RationalMap;
use crate::par;
use crate::sphere::{spherical_distance, spherical_midpoint, Chart, Rotation, SpherePoint, C64};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt::Write as _;
use std::str::FromStr;

/// Label of a cell whose centre did not reach any attractor.
pub const UNRESOLVED: u16 = u16::MAX;
/// Half-width of the square window of the inverse chart `w = 1/z`.
pub const INVERSE_HALF_WIDTH: f64 = 1.05;
/// Bisection steps per boundary sample.
pub const BISECTION_STEPS: usize = 60;
/// Largest period of the pinch-point candidates.
pub const PINCH_PERIOD: usize = 3;
/// Backward depth of the pinch-point candidates.
pub const PINCH_DEPTH: usize = 3;

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Window {
    pub fn square(half: f64) -> Self {
        Window { x0: -half, x1: half, y0: -half, y1: half }
    }
}

impl FromStr for Window {
    type Err = Error;

    /// `x0,x1,y0,y1`.
    fn from_str(s: &str) -> Result<Self> {
        let v: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Invalid(format!("bad window {s:?}")))?;
        match v[..] {
            [x0, x1, y0, y1] if x0 < x1 && y0 < y1 && v.iter().all(|x| x.is_finite()) => {
                Ok(Window { x0, x1, y0, y1 })
            }
            _ => Err(Error::Invalid(format!("bad window {s:?}, expected x0,x1,y0,y1 with x0<x1, y0<y1"))),
        }
    }
}

/// A square grid of cells over a window of one chart. Cell `(i, j)` has
/// index `j * res + i`; `j` grows with the imaginary part.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub chart: Chart,
    pub window: Window,
    pub res: usize,
}

impl Grid {
    fn step(&self) -> (f64, f64) {
        let w = self.window;
        ((w.x1 - w.x0) / self.res as f64, (w.y1 - w.y0) / self.res as f64)
    }

    pub fn centre(&self, i: usize, j: usize) -> C64 {
        let (dx, dy) = self.step();
        C64::new(self.window.x0 + (i as f64 + 0.5) * dx, self.window.y0 + (j as f64 + 0.5) * dy)
    }

    pub fn point(&self, idx: usize) -> SpherePoint {
        SpherePoint::from_chart(self.chart, self.centre(idx % self.res, idx / self.res))
    }

    /// Cell containing chart coordinate `u`.
    pub fn cell_of(&self, u: C64) -> Option<usize> {
        let (dx, dy) = self.step();
        let fi = ((u.re - self.window.x0) / dx).floor();
        let fj = ((u.im - self.window.y0) / dy).floor();
        let n = self.res as f64;
        if fi >= 0.0 && fj >= 0.0 && fi < n && fj < n {
            Some(fj as usize * self.res + fi as usize)
        } else {
            None
        }
    }

    pub fn len(&self) -> usize {
        self.res * self.res
    }

    pub fn is_empty(&self) -> bool {
        self.res == 0
    }
}

/// Boolean cell set over both grids of an atlas.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    pub cells: [Vec<bool>; 2],
}

impl Mask {
    pub fn count(&self) -> usize {
        self.cells.iter().map(|c| c.iter().filter(|&&b| b).count()).sum()
    }
}

#[derive(Clone, Debug)]
pub struct BasinAtlas {
    /// Affine grid and inverse-chart grid.
    pub grids: [Grid; 2],
    pub labels: [Vec<u16>; 2],
    pub attractors: Vec<PeriodicPoint>,
    /// Chordal radius around each cycle point inside which `f^p` contracts.
    pub capture_radius: Vec<f64>,
    pub cycles: Vec<Vec<SpherePoint>>,
    pub max_iter: usize,
    pub immediate_masks: Vec<Option<Mask>>,
}

/// Point at chordal distance `r` from `c` in direction `turns`.
fn offset(c: SpherePoint, r: f64, turns: f64) -> SpherePoint {
    let back = Rotation::to_origin(c).inverse();
    let rho = r / (4.0 - r * r).max(1e-300).sqrt();
    back.apply(SpherePoint::from_polar(rho, turns))
}

/// Largest `0.5 * 2^-k` with `||(f^p)'|| < 0.9` on sampled rings around every
/// point of the cycle.
fn capture_radius(map: &RationalMap, cycle: &[SpherePoint]) -> f64 {
    let p = cycle.len();
    let mut r = 0.5;
    for _ in 0..40 {
        let ok = cycle.iter().all(|&c| {
            [0.25, 0.5, 0.75, 1.0].iter().all(|&s| {
                (0..32).all(|k| {
                    let z = offset(c, r * s, k as f64 / 32.0);
                    map.spherical_derivative_iterate(z, p) < 0.9
                })
            }) && map.spherical_derivative_iterate(c, p) < 0.9
        });
        if ok {
            return r;
        }
        r *= 0.5;
    }
    r
}

/// Iterate until the orbit enters a capture ball; `UNRESOLVED` after `max_iter`.
pub fn label_point(
    map: &RationalMap,
    z: SpherePoint,
    cycles: &[Vec<SpherePoint>],
    capture: &[f64],
    max_iter: usize,
) -> u16 {
    let mut w = z;
    for _ in 0..=max_iter {
        for (a, cyc) in cycles.iter().enumerate() {
            if cyc.iter().any(|&c| spherical_distance(w, c) < capture[a]) {
                return a as u16;
            }
        }
        w = map.eval(w);
    }
    UNRESOLVED
}

/// Label every cell of an affine window and of the inverse-chart window
/// `[-1.05, 1.05]^2` by the attractor its centre converges to.
pub fn classify(
    map: &RationalMap,
    attractors: &[PeriodicPoint],
    window: Window,
    resolution: usize,
    max_iter: usize,
) -> Result<BasinAtlas> {
    if attractors.is_empty() || attractors.len() >= UNRESOLVED as usize {
        return Err(Error::NoAttractor);
    }
    if let Some(a) = attractors.iter().find(|a| !a.class.is_attracting()) {
        return Err(Error::Invalid(format!("{} is not attracting ({})", a.point, a.class.as_str())));
    }
    if resolution == 0 {
        return Err(Error::Invalid("resolution must be positive".into()));
    }
    let cycles: Vec<Vec<SpherePoint>> = attractors.iter().map(|a| a.cycle(map)).collect();
    let capture: Vec<f64> = cycles.iter().map(|c| capture_radius(map, c)).collect();
    let grids = [
        Grid { chart: Chart::Affine, window, res: resolution },
        Grid { chart: Chart::Inverse, window: Window::square(INVERSE_HALF_WIDTH), res: resolution },
    ];
    let labels = grids.map(|g| {
        let rows: Vec<Vec<u16>> = par::map_range(g.res, |j| {
            (0..g.res)
                .map(|i| label_point(map, g.point(j * g.res + i), &cycles, &capture, max_iter))
                .collect()
        });
        rows.concat()
    });
    let mut atlas = BasinAtlas {
        grids,
        labels,
        attractors: attractors.to_vec(),
        capture_radius: capture,
        cycles,
        max_iter,
        immediate_masks: Vec::new(),
    };
    atlas.immediate_masks = (0..attractors.len()).map(|a| immediate_component(&atlas, a).ok()).collect();
    Ok(atlas)
}

impl BasinAtlas {
    /// Cell containing `p`, preferring the affine grid.
    pub fn locate(&self, p: SpherePoint) -> Option<(usize, usize)> {
        for (g, grid) in self.grids.iter().enumerate() {
            if let Some(u) = p.coord_in(grid.chart) {
                if let Some(c) = grid.cell_of(u) {
                    return Some((g, c));
                }
            }
        }
        None
    }

    /// Cells of the other grid overlapping cell `c` of grid `g` (by centre).
    fn cross_link(&self, g: usize, c: usize) -> Option<usize> {
        let other = &self.grids[1 - g];
        self.grids[g].point(c).coord_in(other.chart).and_then(|u| other.cell_of(u))
    }

    /// Fraction of resolved cells (both grids).
    pub fn resolved_fraction(&self) -> f64 {
        let total: usize = self.labels.iter().map(|l| l.len()).sum();
        let resolved: usize = self.labels.iter().map(|l| l.iter().filter(|&&x| x != UNRESOLVED).count()).sum();
        resolved as f64 / total as f64
    }

    pub fn mask(&self, a: usize) -> Result<&Mask> {
        self.immediate_masks
            .get(a)
            .and_then(|m| m.as_ref())
            .ok_or(Error::UnresolvedAttractor(a))
    }

    /// Binary PPM (P6) of one grid: one colour per attractor, black for
    /// unresolved cells, immediate basins drawn brighter. Top row is `y1`.
    pub fn to_ppm(&self, g: usize) -> Vec<u8> {
        let grid = &self.grids[g];
        let n = grid.res;
        let mut out = format!("P6\n{n} {n}\n255\n").into_bytes();
        for j in (0..n).rev() {
            for i in 0..n {
                let c = j * n + i;
                let l = self.labels[g][c];
                let rgb = if l == UNRESOLVED {
                    [0, 0, 0]
                } else {
                    let immediate = self.immediate_masks[l as usize].as_ref().is_some_and(|m| m.cells[g][c]);
                    colour(l as usize, immediate)
                };
                out.extend_from_slice(&rgb);
            }
        }
        out
    }

    /// CSV summary: one row per attractor.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("id,re,im,period,abs_multiplier,class,capture_radius,cells,immediate_cells\n");
        for (a, p) in self.attractors.iter().enumerate() {
            let (re, im) = crate::dynamics::coords(p.point);
            let cells: usize = self.labels.iter().map(|l| l.iter().filter(|&&x| x == a as u16).count()).sum();
            let imm = self.immediate_masks[a].as_ref().map_or(0, |m| m.count());
            let _ = writeln!(
                s,
                "{a},{re},{im},{},{},{},{},{cells},{imm}",
                p.period,
                p.multiplier.norm(),
                p.class.as_str(),
                self.capture_radius[a]
            );
        }
        let unresolved: usize = self.labels.iter().map(|l| l.iter().filter(|&&x| x == UNRESOLVED).count()).sum();
        let _ = writeln!(s, "unresolved,,,,,,,{unresolved},");
        s
    }

    /// Critical points other than the attractor whose cell lies in the
    /// immediate basin of attractor `a`.
    pub fn extra_critical_points(&self, map: &RationalMap, a: usize) -> Result<Vec<SpherePoint>> {
        let mask = self.mask(a)?;
        let centre = self.attractors[a].point;
        let mut out = Vec::new();
        for c in map.critical_points()? {
            if spherical_distance(c, centre) < 1e-6 {
                continue;
            }
            if let Some((g, cell)) = self.locate(c) {
                if mask.cells[g][cell] {
                    out.push(c);
                }
            }
        }
        Ok(out)
    }
}

/// Fixed palette, extended by a golden-angle hue walk.
pub fn colour(label: usize, bright: bool) -> [u8; 3] {
    const BASE: [[u8; 3]; 6] =
        [[230, 80, 60], [60, 120, 230], [70, 190, 90], [230, 190, 50], [170, 80, 200], [60, 200, 200]];
    let c = if label < BASE.len() {
        BASE[label]
    } else {
        let h = (label as f64 * 0.618_033_988_75).fract() * 6.0;
        let x = (255.0 * (1.0 - (h % 2.0 - 1.0).abs())) as u8;
        match h as u32 {
            0 => [255, x, 0],
            1 => [x, 255, 0],
            2 => [0, 255, x],
            3 => [0, x, 255],
            4 => [x, 0, 255],
            _ => [255, 0, x],
        }
    };
    if bright {
        c
    } else {
        c.map(|v| (v as u16 * 3 / 5) as u8)
    }
}

/// Flood fill (4-connectivity within each grid, plus links between cells of
/// the two grids covering the same point) from the cell of the attractor.
pub fn immediate_component(atlas: &BasinAtlas, a: usize) -> Result<Mask> {
    let label = a as u16;
    let (g0, c0) = atlas.locate(atlas.attractors[a].point).ok_or(Error::UnresolvedAttractor(a))?;
    if atlas.labels[g0][c0] != label {
        return Err(Error::UnresolvedAttractor(a));
    }
    let mut cells = [vec![false; atlas.grids[0].len()], vec![false; atlas.grids[1].len()]];
    let mut queue = VecDeque::from([(g0, c0)]);
    cells[g0][c0] = true;
    while let Some((g, c)) = queue.pop_front() {
        let n = atlas.grids[g].res;
        let (i, j) = (c % n, c / n);
        let mut next = Vec::with_capacity(5);
        if i > 0 {
            next.push((g, c - 1));
        }
        if i + 1 < n {
            next.push((g, c + 1));
        }
        if j > 0 {
            next.push((g, c - n));
        }
        if j + 1 < n {
            next.push((g, c + n));
        }
        if let Some(o) = atlas.cross_link(g, c) {
            next.push((1 - g, o));
        }
        for (h, d) in next {
            if !cells[h][d] && atlas.labels[h][d] == label {
                cells[h][d] = true;
                queue.push_back((h, d));
            }
        }
    }
    // links are found from each side's centres; close the relation
    loop {
        let mut grew = false;
        for g in 0..2 {
            for c in 0..atlas.grids[g].len() {
                if cells[g][c] || atlas.labels[g][c] != label {
                    continue;
                }
                if atlas.cross_link(g, c).is_some_and(|o| cells[1 - g][o]) {
                    cells[g][c] = true;
                    grew = true;
                    let mut queue = VecDeque::from([(g, c)]);
                    while let Some((h, d)) = queue.pop_front() {
                        let n = atlas.grids[h].res;
                        let (i, j) = (d % n, d / n);
                        let mut nb = Vec::with_capacity(4);
                        if i > 0 {
                            nb.push(d - 1);
                        }
                        if i + 1 < n {
                            nb.push(d + 1);
                        }
                        if j > 0 {
                            nb.push(d - n);
                        }
                        if j + 1 < n {
                            nb.push(d + n);
                        }
                        for e in nb {
                            if !cells[h][e] && atlas.labels[h][e] == label {
                                cells[h][e] = true;
                                queue.push_back((h, e));
                            }
                        }
                    }
                }
            }
        }
        if !grew {
            break;
        }
    }
    Ok(Mask { cells })
}

/// Points within `tol` of both immediate basins, each with its two witnesses.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundarySampleSet {
    pub pair: (usize, usize),
    pub points: Vec<SpherePoint>,
    /// `(in basin i, in basin j)` for each point.
    pub witnesses: Vec<(SpherePoint, SpherePoint)>,
    pub tol: f64,
}

impl BoundarySampleSet {
    /// CSV: `re,im,witness_i_re,witness_i_im,witness_j_re,witness_j_im`.
    pub fn to_csv(&self) -> String {
        use crate::dynamics::coords;
        let mut s = String::from("re,im,witness_i_re,witness_i_im,witness_j_re,witness_j_im\n");
        for (p, (wi, wj)) in self.points.iter().zip(&self.witnesses) {
            let (a, b) = coords(*p);
            let (c, d) = coords(*wi);
            let (e, f) = coords(*wj);
            let _ = writeln!(s, "{a},{b},{c},{d},{e},{f}");
        }
        s
    }
}

/// Sample `∂B_i ∩ ∂B_j` for two immediate basins.
///
/// Every cell of the `i` mask with a `j`-mask cell within Chebyshev distance 2
/// in the same grid seeds a bisection, by label, between the two cell centres
/// (60 steps, `10 * max_iter` iterations per label); a third label abandons
/// the seed. Each witness is checked against 16 points on its way back to its
/// seed cell.
///
/// Immediate basins that only touch at isolated points leave no clean
/// interface, so seeds abandoned on a third label mark regions searched for
/// pinch points: periodic points of period up to 3 and their preimages to
/// depth 3, kept when points at distance `tol/4` reach both masks along
/// doubling radii inside one basin. Samples are deduplicated at spacing `tol`.
pub fn boundary_intersection(
    map: &RationalMap,
    atlas: &BasinAtlas,
    i: usize,
    j: usize,
    tol: f64,
) -> Result<BoundarySampleSet> {
    let (mi, mj) = (atlas.mask(i)?, atlas.mask(j)?);
    let mut seeds: Vec<(usize, usize, usize)> = Vec::new();
    for g in 0..2 {
        let n = atlas.grids[g].res as isize;
        for c in 0..atlas.grids[g].len() {
            if !mi.cells[g][c] {
                continue;
            }
            let (ci, cj) = ((c as isize) % n, (c as isize) / n);
            let mut best: Option<(isize, usize)> = None;
            for dj in -2..=2isize {
                for di in -2..=2isize {
                    let (x, y) = (ci + di, cj + dj);
                    if x < 0 || y < 0 || x >= n || y >= n {
                        continue;
                    }
                    let d = (y * n + x) as usize;
                    let dist = di * di + dj * dj;
                    if mj.cells[g][d] && best.map_or(true, |(b, _)| dist < b) {
                        best = Some((dist, d));
                    }
                }
            }
            if let Some((_, d)) = best {
                seeds.push((g, c, d));
            }
        }
    }

    let li = i as u16;
    let lj = j as u16;
    let iters = atlas.max_iter * 10;
    let label = |p: SpherePoint| label_point(map, p, &atlas.cycles, &atlas.capture_radius, iters);
    let found: Vec<std::result::Result<(SpherePoint, SpherePoint, SpherePoint), bool>> = par::map(&seeds, |&(g, c, d)| {
        let grid = &atlas.grids[g];
        let n = grid.res;
        let u0 = grid.centre(c % n, c / n);
        let u1 = grid.centre(d % n, d / n);
        let at = |s: f64| SpherePoint::from_chart(grid.chart, u0 + (u1 - u0) * s);
        let (mut a, mut b) = (0.0f64, 1.0f64);
        for _ in 0..BISECTION_STEPS {
            if spherical_distance(at(a), at(b)) < tol {
                break;
            }
            let m = 0.5 * (a + b);
            match label(at(m)) {
                l if l == li => a = m,
                l if l == lj => b = m,
                _ => return Err(true),
            }
        }
        let (pa, pb) = (at(a), at(b));
        if spherical_distance(pa, pb) >= tol {
            return Err(false);
        }
        let back_i = (1..=16).all(|k| label(at(a * k as f64 / 16.0)) == li);
        let back_j = (1..=16).all(|k| label(at(b + (1.0 - b) * k as f64 / 16.0)) == lj);
        if back_i && back_j {
            Ok((spherical_midpoint(pa, pb), pa, pb))
        } else {
            Err(false)
        }
    });

    let mut near = [vec![false; atlas.grids[0].len()], vec![false; atlas.grids[1].len()]];
    for (&(g, c, d), r) in seeds.iter().zip(&found) {
        if matches!(r, Err(true)) {
            let n = atlas.grids[g].res as isize;
            for e in [c, d] {
                let (ei, ej) = ((e as isize) % n, (e as isize) / n);
                for y in (ej - 3).max(0)..=(ej + 3).min(n - 1) {
                    for x in (ei - 3).max(0)..=(ei + 3).min(n - 1) {
                        near[g][(y * n + x) as usize] = true;
                    }
                }
            }
        }
    }
    let mut pinches = Vec::new();
    if near.iter().any(|m| m.iter().any(|&b| b)) {
        let cands: Vec<SpherePoint> = pinch_candidates(map)?
            .into_iter()
            .filter(|&p| atlas.locate(p).is_some_and(|(g, c)| near[g][c]))
            .collect();
        let checked = par::map(&cands, |&p| {
            let wi = pinch_witness(atlas, p, i, tol, &label)?;
            let wj = pinch_witness(atlas, p, j, tol, &label)?;
            Some((p, wi, wj))
        });
        pinches.extend(checked.into_iter().flatten());
    }

    let mut distinct = DistinctPoints::new(tol);
    let mut witnesses = Vec::new();
    for (p, wi, wj) in found.into_iter().flatten().chain(pinches) {
        if distinct.insert(p) {
            witnesses.push((wi, wj));
        }
    }
    if distinct.points.is_empty() {
        return Err(Error::EmptyBoundary(i, j));
    }
    Ok(BoundarySampleSet { pair: (i, j), points: distinct.points, witnesses, tol })
}

/// Non-attracting periodic points of small period and their iterated preimages.
fn pinch_candidates(map: &RationalMap) -> Result<Vec<SpherePoint>> {
    let mut set = DistinctPoints::new(1e-9);
    let d = map.degree();
    let mut frontier = Vec::new();
    for n in 1..=PINCH_PERIOD {
        if d.checked_pow(n as u32).map_or(true, |m| m > 4096) {
            break;
        }
        for p in periodic_points(map, n)?.points {
            if !p.class.is_attracting() && set.insert(p.point) {
                frontier.push(p.point);
            }
        }
    }
    for _ in 0..PINCH_DEPTH {
        let mut next = Vec::new();
        for &p in &frontier {
            for q in map.preimages(p)? {
                if set.insert(q) {
                    next.push(q);
                }
            }
        }
        frontier = next;
    }
    Ok(set.points)
}

/// A point at distance about `tol/4` from `p` joined to a cell of the
/// immediate mask of `a` by points of label `a` at doubling radii.
fn pinch_witness(
    atlas: &BasinAtlas,
    p: SpherePoint,
    a: usize,
    tol: f64,
    label: &(impl Fn(SpherePoint) -> u16 + Sync),
) -> Option<SpherePoint> {
    let mask = atlas.mask(a).ok()?;
    let (chart, u0) = p.chart();
    let la = a as u16;
    (0..64).find_map(|k| {
        let dir = C64::from_polar(1.0, std::f64::consts::TAU * k as f64 / 64.0);
        let w = SpherePoint::from_chart(chart, u0 + dir * (tol / 4.0));
        if label(w) != la {
            return None;
        }
        let mut r = tol / 4.0;
        while r < 0.5 {
            r *= 2.0;
            let q = SpherePoint::from_chart(chart, u0 + dir * r);
            if label(q) != la {
                return None;
            }
            if atlas.locate(q).is_some_and(|(g, c)| mask.cells[g][c]) {
                return Some(w);
            }
        }
        None
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;

    fn fixed(map: &RationalMap, z: SpherePoint) -> PeriodicPoint {
        PeriodicPoint::certify(map, z, 1).unwrap()
    }

    fn z2_atlas(res: usize) -> (RationalMap, BasinAtlas) {
        let f = builtins::z_squared();
        let att = [fixed(&f, SpherePoint::real(0.0)), fixed(&f, SpherePoint::Infinity)];
        let atlas = classify(&f, &att, Window::square(2.0), res, 200).unwrap();
        (f, atlas)
    }

    fn basilica_atlas(res: usize) -> (RationalMap, BasinAtlas) {
        let f = builtins::basilica2();
        let att = [
            fixed(&f, SpherePoint::real(0.0)),
            fixed(&f, SpherePoint::real(-1.0)),
            fixed(&f, SpherePoint::Infinity),
        ];
        let atlas = classify(&f, &att, Window::square(2.0), res, 300).unwrap();
        (f, atlas)
    }

    fn newton_atlas(res: usize) -> (RationalMap, BasinAtlas) {
        let f = builtins::newton_cubic();
        let att: Vec<PeriodicPoint> =
            (0..3).map(|k| fixed(&f, SpherePoint::from_polar(1.0, k as f64 / 3.0))).collect();
        let atlas = classify(&f, &att, Window::square(2.0), res, 300).unwrap();
        (f, atlas)
    }

    #[test]
    fn window_parsing() {
        assert_eq!("-1,1,-2,2".parse::<Window>().unwrap(), Window { x0: -1.0, x1: 1.0, y0: -2.0, y1: 2.0 });
        assert!("1,0,0,1".parse::<Window>().is_err());
        assert!("1,2,3".parse::<Window>().is_err());
    }

    #[test]
    fn z2_labels_split_at_unit_circle() {
        let (_, atlas) = z2_atlas(101);
        let g = &atlas.grids[0];
        for c in 0..g.len() {
            let z = g.point(c).finite().unwrap();
            let l = atlas.labels[0][c];
            if z.norm() < 0.97 {
                assert_eq!(l, 0);
            } else if z.norm() > 1.03 {
                assert_eq!(l, 1);
            }
        }
        assert!(atlas.resolved_fraction() > 0.95);
        let m0 = atlas.mask(0).unwrap();
        assert_eq!(m0.cells[0].iter().filter(|&&b| b).count(), atlas.labels[0].iter().filter(|&&l| l == 0).count());
        assert!(atlas.mask(1).unwrap().cells[1].iter().any(|&b| b));
    }

    #[test]
    fn newton_labels_rotate_with_the_map() {
        let (f, atlas) = newton_atlas(121);
        let g = &atlas.grids[0];
        let w = C64::from_polar(1.0, std::f64::consts::TAU / 3.0);
        for c in 0..g.len() {
            let l = atlas.labels[0][c];
            if l == UNRESOLVED {
                continue;
            }
            let z = g.point(c).finite().unwrap();
            let m = label_point(&f, SpherePoint::new(z * w), &atlas.cycles, &atlas.capture_radius, 300);
            assert!(m == (l + 1) % 3 || m == UNRESOLVED, "{z}");
        }
        // the basin of 1 reaches the right edge along the real axis
        let m = atlas.mask(0).unwrap();
        assert!(m.cells[0][60 * 121 + 120]);
    }

    #[test]
    fn basilica_immediate_components() {
        let (_, atlas) = basilica_atlas(161);
        let g = &atlas.grids[0];
        let m0 = atlas.mask(0).unwrap();
        assert!(m0.cells[0][g.cell_of(C64::new(0.3, 0.0)).unwrap()]);
        // the preimage component around sqrt 2 carries label 0 but is not immediate
        let c1 = g.cell_of(C64::new(2f64.sqrt(), 0.0)).unwrap();
        assert_eq!(atlas.labels[0][c1], 0);
        assert!(!m0.cells[0][c1]);
        assert!(atlas.extra_critical_points(&builtins::basilica2(), 0).unwrap().is_empty());
    }

    #[test]
    fn label_stability_under_refinement() {
        let (_, a) = z2_atlas(81);
        let (_, b) = z2_atlas(161);
        let (mut same, mut total) = (0, 0);
        for g in 0..2 {
            for c in 0..a.grids[g].len() {
                let l = a.labels[g][c];
                if l == UNRESOLVED {
                    continue;
                }
                let u = a.grids[g].point(c).coord_in(a.grids[g].chart).unwrap();
                let d = b.grids[g].cell_of(u).unwrap();
                total += 1;
                same += (b.labels[g][d] == l) as usize;
            }
        }
        assert!(same as f64 >= 0.99 * total as f64);
    }

    #[test]
    fn z2_boundary_is_the_unit_circle() {
        let (f, atlas) = z2_atlas(101);
        let s = boundary_intersection(&f, &atlas, 0, 1, 1e-8).unwrap();
        assert!(s.points.len() > 100);
        for (p, (wi, wj)) in s.points.iter().zip(&s.witnesses) {
            let r = p.finite().unwrap().norm();
            assert!((r - 1.0).abs() < 1e-8);
            assert!(spherical_distance(*wi, *wj) < 1e-8);
            assert_eq!(label_point(&f, *wi, &atlas.cycles, &atlas.capture_radius, 5000), 0);
            assert_eq!(label_point(&f, *wj, &atlas.cycles, &atlas.capture_radius, 5000), 1);
        }
        assert_eq!(s.to_csv().lines().count(), s.points.len() + 1);
    }

    #[test]
    fn basilica_boundary_clusters_at_alpha() {
        let (f, atlas) = basilica_atlas(201);
        let s = boundary_intersection(&f, &atlas, 0, 1, 1e-8).unwrap();
        let alpha = C64::new((1.0 - 5f64.sqrt()) / 2.0, 0.0);
        let dists: Vec<f64> = s.points.iter().map(|p| (p.finite().unwrap() - alpha).norm()).collect();
        assert!(dists.iter().cloned().fold(f64::INFINITY, f64::min) < 1e-8);
        assert!(dists.iter().all(|&d| d < 0.1), "{dists:?}");
    }

    #[test]
    fn newton_boundary_accumulates_at_zero() {
        let (f, atlas) = newton_atlas(121);
        let s = boundary_intersection(&f, &atlas, 0, 1, 1e-8).unwrap();
        let h = 4.0 / 121.0;
        let _ = h;
        let near0 = s.points.iter().map(|p| spherical_distance(*p, SpherePoint::real(0.0))).fold(f64::INFINITY, f64::min);
        assert!(near0 < 2e-8, "{near0}");
        let far = s.points.iter().map(|p| spherical_distance(*p, SpherePoint::Infinity)).fold(f64::INFINITY, f64::min);
        assert!(far < 2e-8, "{far}");
    }

    #[test]
    fn ppm_and_csv_exports() {
        let (_, atlas) = z2_atlas(21);
        let ppm = atlas.to_ppm(0);
        assert!(ppm.starts_with(b"P6\n21 21\n255\n"));
        assert_eq!(ppm.len(), b"P6\n21 21\n255\n".len() + 21 * 21 * 3);
        assert_eq!(atlas.summary_csv().lines().count(), 4);
        assert_ne!(colour(0, true), colour(1, true));
    }

    #[test]
    fn rejects_bad_attractors() {
        let f = builtins::z_squared();
        assert!(matches!(classify(&f, &[], Window::square(2.0), 11, 10), Err(Error::NoAttractor)));
        let rep = fixed(&f, SpherePoint::real(1.0));
        assert!(classify(&f, &[rep], Window::square(2.0), 11, 10).is_err());
    }
}
