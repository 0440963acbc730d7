//! Internal rays traced by pulling back the Böttcher parametrization.
//!
//! Ray points are indexed by `n`, at Böttcher radius `r0^(d^(-n/S))` where `S`
//! is the number of substeps per level. Points with `n < 0` come straight
//! from the chart series; for `n >= 0` the point of angle `t` is the preimage
//! of the point with index `n - S` and angle `d t` closest to the linear
//! extrapolation of the two previous points. Every angle of the forward orbit
//! of `t` is traced alongside it.

use crate::angle::Angle;
use crate::boettcher::BoettcherChart;
use crate::dynamics::{newton_periodic, PERIODIC_RESIDUAL};
use crate::error::{Error, Result};
use crate::map::RationalMap;
use crate::par;
use crate::sphere::{r3_dist, spherical_distance, SpherePoint};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Most angles traced together in one forward-orbit closure.
pub const MAX_ORBIT: usize = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayOptions {
    pub substeps: usize,
    pub max_steps: usize,
    /// Landing is declared after three consecutive steps shorter than this.
    pub step_tol: f64,
}

impl Default for RayOptions {
    fn default() -> Self {
        RayOptions { substeps: 4, max_steps: 4000, step_tol: 1e-10 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Ray {
    pub basin: usize,
    pub angle: Angle,
    /// From near the attractor outward.
    pub polyline: Vec<SpherePoint>,
    pub landed: bool,
    #[serde(rename = "landing")]
    pub landing_point: Option<SpherePoint>,
    /// Whether the landing point was Newton-refined onto a periodic or
    /// preperiodic point.
    #[serde(default)]
    pub refined: bool,
}

impl Ray {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("ray serializes")
    }
}

#[derive(Clone, Debug)]
enum Failure {
    Ambiguity { step: usize, near: f64, next: f64 },
    Roots(String),
    Critical,
}

impl Failure {
    fn into_error(self, angle: &Angle, steps: usize) -> Error {
        match self {
            Failure::Ambiguity { step, near, next } => Error::BranchAmbiguity { step, near, next },
            Failure::Roots(msg) => Error::NoLanding(format!("{angle} ({msg})"), steps),
            Failure::Critical => Error::NoLanding(format!("{angle} (critical)"), steps),
        }
    }
}

/// Forward orbit closure of `angles` under `t -> d t`, sorted, with the index
/// of each element's image.
fn orbit_closure(angles: &[Angle], d: u64) -> Result<(Vec<Angle>, Vec<usize>)> {
    let mut set: BTreeMap<Angle, usize> = BTreeMap::new();
    let mut stack: Vec<Angle> = angles.to_vec();
    while let Some(t) = stack.pop() {
        if set.contains_key(&t) {
            continue;
        }
        let next = t.step(d);
        set.insert(t, 0);
        if set.len() > MAX_ORBIT {
            return Err(Error::Invalid(format!("angle orbits exceed {MAX_ORBIT} elements")));
        }
        stack.push(next);
    }
    for (i, v) in set.values_mut().enumerate() {
        *v = i;
    }
    let list: Vec<Angle> = set.keys().cloned().collect();
    let image = list.iter().map(|t| set[&t.step(d)]).collect();
    Ok((list, image))
}

/// Trace the rays of `angles` in the basin charted by `chart`.
///
/// Each entry is the ray (possibly `landed = false` after `max_steps`) or the
/// branch-selection failure that stopped it.
pub fn trace_rays(
    map: &RationalMap,
    chart: &BoettcherChart,
    basin: usize,
    angles: &[Angle],
    opts: &RayOptions,
) -> Result<Vec<Result<Ray>>> {
    let d = chart.local_degree as u64;
    let s = opts.substeps.max(2);
    let (list, image) = orbit_closure(angles, d)?;
    let m = list.len();
    let r0 = chart.reference_radius;

    let mut paths: Vec<Vec<SpherePoint>> = list
        .iter()
        .map(|t| {
            let tf = t.to_f64();
            (0..s)
                .map(|k| {
                    let e = (d as f64).powf((s - k) as f64 / s as f64);
                    chart.point(r0.powf(e), tf)
                })
                .collect()
        })
        .collect();
    let mut failed: Vec<Option<Failure>> = vec![None; m];
    let mut short_steps = vec![0usize; m];
    let mut landed_at: Vec<Option<usize>> = vec![None; m];
    let mut frozen = vec![false; m];

    for n in 0..opts.max_steps {
        let active: Vec<usize> = (0..m).filter(|&i| failed[i].is_none()).collect();
        if active.iter().all(|&i| landed_at[i].is_some()) {
            break;
        }
        let step: Vec<(usize, std::result::Result<SpherePoint, Failure>)> = par::map(&active, |&i| {
            if frozen[i] {
                return (i, Ok(*paths[i].last().unwrap()));
            }
            let j = image[i];
            let Some(&target) = paths[j].get(n) else {
                return (i, Err(failed[j].clone().unwrap_or(Failure::Roots("dependency".into()))));
            };
            let path = &paths[i];
            let (a, b) = (path[path.len() - 1].to_r3(), path[path.len() - 2].to_r3());
            let pred = [2.0 * a[0] - b[0], 2.0 * a[1] - b[1], 2.0 * a[2] - b[2]];
            let pre = match map.preimages(target) {
                Ok(p) => p,
                Err(e) => return (i, Err(Failure::Roots(e.to_string()))),
            };
            let mut dist: Vec<(f64, SpherePoint)> =
                pre.into_iter().map(|z| (r3_dist(z.to_r3(), pred), z)).collect();
            dist.sort_by(|x, y| x.0.total_cmp(&y.0));
            if dist.len() > 1 && dist[1].0 < 2.0 * dist[0].0 {
                if landed_at[j].is_some() {
                    // the image ray has landed and two branches merge here:
                    // this ray lands at a critical point
                    return (i, Err(Failure::Critical));
                }
                return (i, Err(Failure::Ambiguity { step: n, near: dist[0].0, next: dist[1].0 }));
            }
            (i, Ok(dist[0].1))
        });
        for (i, r) in step {
            match r {
                Ok(z) => {
                    let prev = *paths[i].last().unwrap();
                    paths[i].push(z);
                    if spherical_distance(z, prev) < opts.step_tol {
                        short_steps[i] += 1;
                    } else {
                        short_steps[i] = 0;
                    }
                    if landed_at[i].is_none() && short_steps[i] >= 3 {
                        landed_at[i] = Some(paths[i].len());
                    }
                }
                Err(Failure::Critical) => {
                    frozen[i] = true;
                    landed_at[i].get_or_insert(paths[i].len());
                    let last = *paths[i].last().unwrap();
                    paths[i].push(last);
                }
                Err(f) => failed[i] = Some(f),
            }
        }
    }

    let raw_landing = |i: usize| landed_at[i].map(|len| paths[i][len - 1]);
    let index: BTreeMap<&Angle, usize> = list.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let out = angles
        .iter()
        .map(|t| {
            let i = index[t];
            if let Some(f) = failed[i].clone() {
                return Err(f.into_error(t, opts.max_steps));
            }
            let Some(len) = landed_at[i] else {
                return Ok(Ray {
                    basin,
                    angle: t.clone(),
                    polyline: paths[i].clone(),
                    landed: false,
                    landing_point: None,
                    refined: false,
                });
            };
            let raw = paths[i][len - 1];
            let (point, refined) = refine_landing(map, t, d, raw, opts.step_tol, |u| {
                index.get(u).and_then(|&k| raw_landing(k))
            });
            Ok(Ray {
                basin,
                angle: t.clone(),
                polyline: paths[i][..len].to_vec(),
                landed: true,
                landing_point: Some(point),
                refined,
            })
        })
        .collect();
    Ok(out)
}

/// Newton-refine the landing point of the periodic angle `d^l t` onto a
/// point of period `q`, then pull it back `l` times along the raw landing
/// points of the intermediate angles.
fn refine_landing(
    map: &RationalMap,
    t: &Angle,
    d: u64,
    raw: SpherePoint,
    step_tol: f64,
    landing_of: impl Fn(&Angle) -> Option<SpherePoint>,
) -> (SpherePoint, bool) {
    let (l, q) = t.eventual_period(d);
    let radius = (1e4 * step_tol).max(1e-6);
    let periodic = t.step_n(d, l as u32);
    let Some(y) = landing_of(&periodic) else { return (raw, false) };
    let (mut z, res) = newton_periodic(map, y, q, 60);
    if res >= PERIODIC_RESIDUAL || spherical_distance(z, y) > radius {
        return (raw, false);
    }
    for k in (0..l).rev() {
        let Some(x) = landing_of(&t.step_n(d, k as u32)) else { return (raw, false) };
        let Ok(pre) = map.preimages(z) else { return (raw, false) };
        let best = pre
            .into_iter()
            .min_by(|a, b| spherical_distance(*a, x).total_cmp(&spherical_distance(*b, x)))
            .unwrap();
        if spherical_distance(best, x) > radius.max(1e-4) {
            return (raw, false);
        }
        z = best;
    }
    (z, true)
}

/// Trace one ray; fails with [`Error::NoLanding`] if it does not land.
pub fn trace_ray(
    map: &RationalMap,
    chart: &BoettcherChart,
    basin: usize,
    t: &Angle,
    opts: &RayOptions,
) -> Result<Ray> {
    let ray = trace_rays(map, chart, basin, std::slice::from_ref(t), opts)?.pop().unwrap()?;
    if !ray.landed {
        return Err(Error::NoLanding(t.to_string(), opts.max_steps));
    }
    Ok(ray)
}

/// Angles of `grid` whose rays land within `tol` of `point`.
pub fn multi_access(
    map: &RationalMap,
    chart: &BoettcherChart,
    point: SpherePoint,
    grid: &[Angle],
    tol: f64,
    opts: &RayOptions,
) -> Result<Vec<Angle>> {
    let mut grid = grid.to_vec();
    grid.sort();
    grid.dedup();
    let rays = trace_rays(map, chart, 0, &grid, opts)?;
    Ok(rays
        .into_iter()
        .filter_map(|r| r.ok())
        .filter(|r| r.landing_point.is_some_and(|p| spherical_distance(p, point) < tol))
        .map(|r| r.angle)
        .collect())
}

/// `max_k σ(f(z_k), z_{k-S})` along a ray; the base layer is compared with
/// the chart directly.
pub fn functional_equation_residual(
    map: &RationalMap,
    ray: &Ray,
    image: &Ray,
    substeps: usize,
) -> f64 {
    ray.polyline
        .iter()
        .enumerate()
        .skip(substeps)
        .filter_map(|(k, &z)| image.polyline.get(k - substeps).map(|&w| spherical_distance(map.eval(z), w)))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle::uniform_angles;
    use crate::boettcher::build_chart;
    use crate::builtins;

    fn a(p: u64, q: u64) -> Angle {
        Angle::from_u64(p, q).unwrap()
    }

    #[test]
    fn radial_rays_of_z_squared() {
        let f = builtins::z_squared();
        let ch = build_chart(&f, SpherePoint::real(0.0), 2).unwrap();
        let opts = RayOptions::default();
        let r = trace_ray(&f, &ch, 0, &a(0, 1), &opts).unwrap();
        assert!(r.refined);
        assert!(spherical_distance(r.landing_point.unwrap(), SpherePoint::real(1.0)) < 1e-14);
        assert!(r.polyline.iter().all(|z| z.finite().unwrap().im.abs() < 1e-14));
        let r = trace_ray(&f, &ch, 0, &a(1, 3), &opts).unwrap();
        let w = SpherePoint::from_polar(1.0, 1.0 / 3.0);
        assert!(spherical_distance(r.landing_point.unwrap(), w) < 1e-14);
    }

    #[test]
    fn rays_in_basin_of_infinity_point_backwards() {
        let f = builtins::z_squared();
        let ch = build_chart(&f, SpherePoint::Infinity, 2).unwrap();
        let r = trace_ray(&f, &ch, 1, &a(1, 7), &RayOptions::default()).unwrap();
        let w = SpherePoint::from_polar(1.0, -1.0 / 7.0);
        assert!(spherical_distance(r.landing_point.unwrap(), w) < 1e-14);
    }

    #[test]
    fn preperiodic_ray_lands_on_preimage() {
        let f = builtins::z_squared();
        let ch = build_chart(&f, SpherePoint::real(0.0), 2).unwrap();
        let r = trace_ray(&f, &ch, 0, &a(1, 6), &RayOptions::default()).unwrap();
        assert!(r.refined);
        let w = SpherePoint::from_polar(1.0, 1.0 / 6.0);
        assert!(spherical_distance(r.landing_point.unwrap(), w) < 1e-14);
        let r = trace_ray(&f, &ch, 0, &a(3, 8), &RayOptions::default()).unwrap();
        let w = SpherePoint::from_polar(1.0, 3.0 / 8.0);
        assert!(spherical_distance(r.landing_point.unwrap(), w) < 1e-13);
    }

    #[test]
    fn basilica_fixed_ray_lands_at_alpha() {
        let f = builtins::basilica2();
        let alpha = SpherePoint::real((1.0 - 5f64.sqrt()) / 2.0);
        for centre in [0.0, -1.0] {
            let ch = build_chart(&f, SpherePoint::real(centre), 2).unwrap();
            let r = trace_ray(&f, &ch, 0, &Angle::zero(), &RayOptions::default()).unwrap();
            assert!(spherical_distance(r.landing_point.unwrap(), alpha) < 1e-12, "{centre}");
        }
    }

    #[test]
    fn newton_invariant_rays_land_at_infinity() {
        let f = builtins::newton_cubic();
        for k in 0..3 {
            let ch = build_chart(&f, SpherePoint::from_polar(1.0, k as f64 / 3.0), 2).unwrap();
            let r = trace_ray(&f, &ch, k, &Angle::zero(), &RayOptions::default()).unwrap();
            assert!(r.landing_point.unwrap().is_infinite() || spherical_distance(r.landing_point.unwrap(), SpherePoint::Infinity) < 1e-12);
        }
    }

    #[test]
    fn functional_equation_along_rays() {
        let f = builtins::newton_cubic();
        let ch = build_chart(&f, SpherePoint::real(1.0), 2).unwrap();
        let opts = RayOptions::default();
        let angles = [a(1, 3), a(2, 3), a(1, 6)];
        let rays: Vec<Ray> = trace_rays(&f, &ch, 0, &angles, &opts)
            .unwrap()
            .into_iter()
            .map(|r| r.unwrap())
            .collect();
        let res = functional_equation_residual(&f, &rays[2], &rays[0], opts.substeps);
        assert!(res < 1e-12, "{res}");
        let res = functional_equation_residual(&f, &rays[0], &rays[1], opts.substeps);
        assert!(res < 1e-12, "{res}");
    }

    #[test]
    fn angle_dynamics_commutes_with_landing() {
        let f = builtins::basilica2();
        let ch = build_chart(&f, SpherePoint::real(0.0), 2).unwrap();
        let grid = uniform_angles(12);
        let rays = trace_rays(&f, &ch, 0, &grid, &RayOptions::default()).unwrap();
        for r in rays.iter().flatten() {
            let image = rays.iter().flatten().find(|s| s.angle == r.angle.step(2)).unwrap();
            let (x, y) = (r.landing_point.unwrap(), image.landing_point.unwrap());
            assert!(spherical_distance(f.eval(x), y) < 1e-9, "{}", r.angle);
        }
    }

    #[test]
    fn multi_access_examples() {
        let f = builtins::z_squared();
        let ch = build_chart(&f, SpherePoint::real(0.0), 2).unwrap();
        let opts = RayOptions::default();
        let found = multi_access(&f, &ch, SpherePoint::real(1.0), &uniform_angles(64), 1e-8, &opts).unwrap();
        assert_eq!(found, vec![Angle::zero()]);
        let mut grid = uniform_angles(3);
        grid.extend(uniform_angles(64));
        let w = SpherePoint::from_polar(1.0, 1.0 / 3.0);
        assert_eq!(multi_access(&f, &ch, w, &grid, 1e-8, &opts).unwrap(), vec![a(1, 3)]);
        let g = builtins::basilica2();
        let ch = build_chart(&g, SpherePoint::real(0.0), 2).unwrap();
        let alpha = SpherePoint::real((1.0 - 5f64.sqrt()) / 2.0);
        assert_eq!(multi_access(&g, &ch, alpha, &uniform_angles(16), 1e-8, &opts).unwrap(), vec![Angle::zero()]);
    }

    #[test]
    fn ray_json_shape() {
        let f = builtins::z_squared();
        let ch = build_chart(&f, SpherePoint::real(0.0), 2).unwrap();
        let r = trace_ray(&f, &ch, 0, &a(1, 2), &RayOptions::default()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["basin"], 0);
        assert_eq!(v["angle"], "1/2");
        assert_eq!(v["landed"], true);
        let l = &v["landing"];
        assert!((l[0].as_f64().unwrap() + 1.0).abs() < 1e-14);
        assert!(v["polyline"].as_array().unwrap().len() > 10);
    }
}
