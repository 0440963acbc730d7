//! Local Böttcher coordinates at superattracting fixed points.

use crate::error::{Error, Result};
use crate::map::RationalMap;
use crate::poly;
use crate::sphere::{spherical_distance, SpherePoint, C64, ONE, ZERO};
use std::f64::consts::TAU;

/// Number of inverse-series coefficients solved for.
pub const SERIES_ORDER: usize = 8;
/// Functional-equation tolerance the reference radius must meet.
pub const CHART_TOL: f64 = 1e-9;

/// Inverse Böttcher map `ψ` near an attractor `a`, with `f(ψ(w)) = ψ(w^d)`.
///
/// `ψ` is a truncated power series in the local coordinate of `a` (`z - a`,
/// or `1/z` when `a` is infinity), valid for `|w| <= reference_radius`.
#[derive(Clone, Debug)]
pub struct BoettcherChart {
    pub attractor: SpherePoint,
    pub local_degree: usize,
    /// `λ` with `λ^(d-1) = c`, principal branch; the chart is `β(u) = λu + ...`.
    pub normalization: C64,
    pub reference_radius: f64,
    /// Coefficients of `ψ`, index = power (`series[0] = 0`).
    pub series: Vec<C64>,
}

impl BoettcherChart {
    /// Point of the basin with Böttcher coordinate `w`.
    pub fn inverse(&self, w: C64) -> SpherePoint {
        let u = poly::eval(&self.series, w);
        match self.attractor {
            SpherePoint::Finite(a) => SpherePoint::new(a + u),
            SpherePoint::Infinity => {
                if u == ZERO {
                    SpherePoint::Infinity
                } else {
                    SpherePoint::new(u.inv())
                }
            }
        }
    }

    /// `ψ(r e^{2πit})`.
    pub fn point(&self, r: f64, turns: f64) -> SpherePoint {
        self.inverse(C64::from_polar(r, TAU * turns))
    }

    /// Max over `samples` angles of `σ(f(ψ(r e^{2πit})), ψ(r^d e^{2πidt}))`.
    pub fn functional_equation_error(&self, map: &RationalMap, r: f64, samples: usize) -> f64 {
        let d = self.local_degree as f64;
        (0..samples)
            .map(|k| {
                let t = k as f64 / samples as f64;
                let lhs = map.eval(self.point(r, t));
                let rhs = self.point(r.powf(d), d * t);
                spherical_distance(lhs, rhs)
            })
            .fold(0.0, f64::max)
    }
}

/// Build the chart at a superattracting fixed point of local degree `d`.
///
/// Fails with [`Error::Hypothesis`] when `attractor` is not fixed, not of
/// local degree exactly `d`, or when no radius in `0.5 * 2^-k` passes the
/// functional-equation check.
pub fn build_chart(map: &RationalMap, attractor: SpherePoint, d: usize) -> Result<BoettcherChart> {
    if d < 2 {
        return Err(Error::Invalid("local degree must be >= 2".into()));
    }
    if spherical_distance(map.eval(attractor), attractor) > 1e-12 {
        return Err(Error::Hypothesis(format!("{attractor} is not a fixed point")));
    }
    let len = d + SERIES_ORDER;
    let g = map.local_series(attractor, len);
    let scale = g.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
    if g[1..d].iter().any(|c| c.norm() > 1e-10 * scale) {
        return Err(Error::Hypothesis(format!(
            "{attractor} is not superattracting of local degree {d}"
        )));
    }
    let c = g[d];
    if c.norm() <= 1e-12 * scale {
        return Err(Error::Hypothesis(format!("local degree at {attractor} exceeds {d}")));
    }
    let lambda = if d == 2 { c } else { c.powf(1.0 / (d - 1) as f64) };

    let mut e = vec![ZERO; SERIES_ORDER + 1];
    e[1] = lambda.inv();
    for m in 2..=SERIES_ORDER {
        let r = functional_residual(&g, &e, d, len)[d + m - 1];
        e[m] = -r / d as f64;
    }

    let mut chart = BoettcherChart {
        attractor,
        local_degree: d,
        normalization: lambda,
        reference_radius: 0.5,
        series: e,
    };
    for _ in 0..40 {
        if chart.functional_equation_error(map, chart.reference_radius, 64) < CHART_TOL {
            return Ok(chart);
        }
        chart.reference_radius *= 0.5;
    }
    Err(Error::Hypothesis(format!("no chart radius at {attractor} passes the functional equation")))
}

/// Coefficients of `g(ψ(w)) - ψ(w^d)` modulo `w^len`.
fn functional_residual(g: &[C64], e: &[C64], d: usize, len: usize) -> Vec<C64> {
    let mut out = vec![ZERO; len];
    let mut pow = vec![ONE];
    for &gk in g.iter().take(len) {
        for (o, p) in out.iter_mut().zip(&pow) {
            *o += gk * p;
        }
        pow = poly::series_mul(&pow, e, len);
    }
    for (j, &ej) in e.iter().enumerate() {
        if j * d < len {
            out[j * d] -= ej;
        }
    }
    out
}
