//! The family `F(z) = rho z^2 (z - 3) / (1 - 3z)`: restriction to the unit
//! circle, rotation numbers, solving for `rho`, and the search for periodic
//! points on the circle.

use crate::builtins;
use crate::dynamics::{periodic_points, PeriodicPoint};
use crate::error::{Error, Result};
use crate::map::RationalMap;
use crate::sphere::{SpherePoint, C64};
use serde::Serialize;
use std::f64::consts::{PI, TAU};

/// Longest cycle recognised as mode-locking.
pub const PLATEAU_MAX_PERIOD: usize = 64;
/// Samples used to validate a lift.
pub const LIFT_SAMPLES: usize = 10_000;

pub fn make_f_theta(rho: C64) -> Result<RationalMap> {
    builtins::f_theta(rho)
}

/// Real lift of `F` restricted to the circle, `s -> s + a + arg(3 - e^{2πis}) / π`
/// with `a = arg(rho) / 2π`.
#[derive(Clone, Copy, Debug)]
pub struct CircleMapLift {
    pub rho: C64,
    /// `arg(rho) / 2π` in `[0, 1)`.
    pub shift: f64,
}

impl CircleMapLift {
    /// Checks `|F| = 1` and agreement with `arg F` on 10^4 samples, and that
    /// adjacent samples never jump by more than 1/2.
    pub fn new(rho: C64) -> Result<Self> {
        let map = make_f_theta(rho)?;
        let lift = Self::unchecked(rho);
        let mut prev = lift.eval(0.0);
        for k in 0..=LIFT_SAMPLES {
            let s = k as f64 / LIFT_SAMPLES as f64;
            let v = lift.eval(s);
            if (v - prev).abs() > 0.5 {
                return Err(Error::LiftDiscontinuity(v - prev));
            }
            prev = v;
            let z = map.eval(SpherePoint::from_polar(1.0, s)).finite().ok_or(Error::LiftDiscontinuity(f64::NAN))?;
            if (z.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::Invalid(format!("|F| = {} on the circle", z.norm())));
            }
            let turns = z.arg() / TAU - v;
            if (turns - turns.round()).abs() > 1e-10 {
                return Err(Error::LiftDiscontinuity(turns - turns.round()));
            }
        }
        Ok(lift)
    }

    fn unchecked(rho: C64) -> Self {
        CircleMapLift { rho, shift: (rho.arg() / TAU).rem_euclid(1.0) }
    }

    fn from_shift(shift: f64) -> Self {
        CircleMapLift { rho: C64::from_polar(1.0, TAU * shift), shift }
    }

    /// Displacement `lift(s) - s`, which has period 1.
    pub fn displacement(&self, s: f64) -> f64 {
        let w = C64::new(3.0, 0.0) - C64::from_polar(1.0, TAU * s);
        self.shift + w.arg() / PI
    }

    pub fn eval(&self, s: f64) -> f64 {
        s + self.displacement(s.rem_euclid(1.0))
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RotationEstimate {
    /// Rotation number in `[0, 1)`.
    pub theta_hat: f64,
    /// Mean displacement of the lift, in `[0, 1]` for this family.
    pub tau: f64,
    pub iterations: usize,
    /// Spread of the running averages over the second half of the orbit.
    pub error_bound: f64,
}

/// Orbit of `n` lift steps from `s0`; returns the running displacement and
/// the final fractional position.
fn run(lift: &CircleMapLift, n: usize, s0: f64, mut on_step: impl FnMut(usize, f64)) -> (f64, f64) {
    let mut frac = s0.rem_euclid(1.0);
    let mut total = 0.0;
    for k in 1..=n {
        let d = lift.displacement(frac);
        total += d;
        frac = (frac + d).rem_euclid(1.0);
        on_step(k, total);
    }
    (total, frac)
}

fn estimate(lift: &CircleMapLift, n: usize, s0: f64) -> RotationEstimate {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (total, _) = run(lift, n, s0, |k, t| {
        if 2 * k >= n {
            let e = t / k as f64;
            lo = lo.min(e);
            hi = hi.max(e);
        }
    });
    let tau = total / n as f64;
    RotationEstimate { theta_hat: tau.rem_euclid(1.0), tau, iterations: n, error_bound: hi - lo }
}

/// Birkhoff average of the lift displacement over `n >= 1000` steps.
pub fn rotation_number(rho: C64, n: usize, s0: f64) -> Result<RotationEstimate> {
    if n < 1000 {
        return Err(Error::Invalid(format!("need at least 1000 iterations, got {n}")));
    }
    Ok(estimate(&CircleMapLift::new(rho)?, n, s0))
}

/// `(p, q)` when the orbit has settled on a cycle of rotation `p/q`, `q <= 64`.
fn mode_locking(lift: &CircleMapLift, n: usize) -> Option<(i64, usize)> {
    let (_, frac) = run(lift, n, 0.0, |_, _| {});
    let mut x = frac;
    let mut total = 0.0;
    for q in 1..=PLATEAU_MAX_PERIOD {
        let d = lift.displacement(x.rem_euclid(1.0));
        total += d;
        x += d;
        let p = total.round();
        if (x - frac - p).abs() < 1e-9 {
            return Some((p as i64, q));
        }
    }
    None
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Plateau {
    pub p: i64,
    pub q: usize,
    /// Arc of `arg(rho) / 2π` on which the rotation number is `p/q`.
    pub left: f64,
    pub right: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RhoSolution {
    pub rho: C64,
    pub estimate: RotationEstimate,
    /// Final bisection bracket of `arg(rho) / 2π`.
    pub bracket: (f64, f64),
    /// Set when `rho` lies on a mode-locked interval; `rho` is then its left end.
    pub plateau: Option<Plateau>,
}

/// Iterations per probe at tolerance `tol`.
pub fn probe_iterations(tol: f64) -> usize {
    ((4.0 / tol).ceil() as usize).max(10_000)
}

/// Bisection on `arg(rho) / 2π` in `[0, 1)` until the rotation number is
/// within `tol` of `theta_target`. Mode-locked hits are widened to their
/// plateau and the left end is returned.
pub fn solve_rho(theta_target: f64, tol: f64) -> Result<RhoSolution> {
    if !(0.0..1.0).contains(&theta_target) {
        return Err(Error::Invalid(format!("target {theta_target} outside [0, 1)")));
    }
    if !(tol >= 1e-7) {
        return Err(Error::Invalid(format!("tolerance {tol} below 1e-7")));
    }
    let n = probe_iterations(tol);
    let tau = |a: f64| estimate(&CircleMapLift::from_shift(a), n, 0.0);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let e = tau(mid);
        if (e.tau - theta_target).abs() < tol {
            let lift = CircleMapLift::from_shift(mid);
            let plateau = mode_locking(&lift, n).map(|(p, q)| {
                let locked = |a: f64| mode_locking(&CircleMapLift::from_shift(a), n) == Some((p, q));
                let edge = |mut inside: f64, mut outside: f64| {
                    if locked(outside) {
                        return outside;
                    }
                    for _ in 0..40 {
                        let m = 0.5 * (inside + outside);
                        if locked(m) {
                            inside = m;
                        } else {
                            outside = m;
                        }
                    }
                    inside
                };
                Plateau { p, q, left: edge(mid, lo), right: edge(mid, hi) }
            });
            let a = plateau.map_or(mid, |p| p.left);
            let lift = CircleMapLift::from_shift(a);
            return Ok(RhoSolution {
                rho: lift.rho,
                estimate: estimate(&lift, n, 0.0),
                bracket: (lo, hi),
                plateau,
            });
        }
        if e.tau < theta_target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Err(Error::Bracketing(format!(
        "arc [{lo}, {hi}] of arg(rho)/2π did not reach rotation number {theta_target} within {tol}"
    )))
}

#[derive(Clone, Debug, Serialize)]
pub struct CircleReport {
    pub rho: C64,
    pub period_max: usize,
    pub tol: f64,
    /// Periodic points with `||z| - 1| < tol`, by minimal period.
    pub findings: Vec<PeriodicPoint>,
    /// Fixed points of `F` (all of them, on or off the circle).
    pub fixed_points: Vec<PeriodicPoint>,
    /// Roots within `tol` of the circle that did not certify, with residual.
    pub uncertified: Vec<(SpherePoint, f64)>,
}

/// Periodic points of minimal period `<= period_max` within `tol` of the circle.
pub fn verify_no_circle_periodics(rho: C64, period_max: usize, tol: f64) -> Result<CircleReport> {
    let map = make_f_theta(rho)?;
    let mut findings = Vec::new();
    let mut fixed_points = Vec::new();
    let mut uncertified = Vec::new();
    let near = |z: SpherePoint| z.finite().is_some_and(|z| (z.norm() - 1.0).abs() < tol);
    for n in 1..=period_max {
        let set = periodic_points(&map, n)?;
        if n == 1 {
            fixed_points = set.points.clone();
        }
        findings.extend(set.points.into_iter().filter(|p| p.period == n && near(p.point)));
        uncertified.extend(set.uncertified.into_iter().filter(|u| near(u.0)));
    }
    Ok(CircleReport { rho, period_max, tol, findings, fixed_points, uncertified })
}

#[derive(Serialize)]
struct ReportJson {
    rho: [f64; 2],
    theta_hat: f64,
    error_bound: f64,
    iterations: usize,
    bracket: (f64, f64),
    plateau: Option<Plateau>,
    period_max: usize,
    tol: f64,
    periodic_findings: Vec<Finding>,
    uncertified_near_circle: Vec<(SpherePoint, f64)>,
}

#[derive(Serialize)]
struct Finding {
    point: SpherePoint,
    period: usize,
    abs_multiplier: f64,
}

/// JSON `{rho, theta_hat, error_bound, periodic_findings, ...}`.
pub fn report_json(sol: &RhoSolution, report: &CircleReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ReportJson {
        rho: [sol.rho.re, sol.rho.im],
        theta_hat: sol.estimate.theta_hat,
        error_bound: sol.estimate.error_bound,
        iterations: sol.estimate.iterations,
        bracket: sol.bracket,
        plateau: sol.plateau,
        period_max: report.period_max,
        tol: report.tol,
        periodic_findings: report
            .findings
            .iter()
            .map(|p| Finding { point: p.point, period: p.period, abs_multiplier: p.multiplier.norm() })
            .collect(),
        uncertified_near_circle: report.uncertified.clone(),
    })?)
}
