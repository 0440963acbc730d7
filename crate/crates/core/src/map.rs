//! Rational maps of the Riemann sphere.
//!
//! A map of degree `D` is stored as the homogeneous pair
//! `P(x, y) = sum p_k x^k y^(D-k)`, `Q(x, y) = sum q_k x^k y^(D-k)`, so the
//! affine chart (`y = 1`) and the chart at infinity (`x = 1`) are handled by
//! the same code. Every evaluation normalizes its input to
//! `max(|x|, |y|) = 1`, which keeps all powers bounded.

use crate::error::{Error, Result};
use crate::poly::{self, PolyRoots};
use crate::sphere::{Chart, SpherePoint, C64, ONE, ZERO};
use serde::{Deserialize, Serialize};

/// Minimum relative resultant accepted at construction.
pub const COPRIME_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct RationalMap {
    numer: Vec<C64>,
    denom: Vec<C64>,
    degree: usize,
    // homogeneous coefficients padded to D+1, in both orientations, with derivatives
    hp: Vec<C64>,
    hq: Vec<C64>,
    hp_rev: Vec<C64>,
    hq_rev: Vec<C64>,
}

/// Homogeneous values and first partials of `(P, Q)` at a point.
#[derive(Clone, Copy, Debug)]
pub struct Hom {
    pub p: C64,
    pub q: C64,
    pub px: C64,
    pub py: C64,
    pub qx: C64,
    pub qy: C64,
}

/// Iterate of the map in homogeneous coordinates with its tangent, up to a
/// common scalar factor.
#[derive(Clone, Copy, Debug)]
pub struct HomJet {
    pub x: C64,
    pub y: C64,
    pub dx: C64,
    pub dy: C64,
}

impl HomJet {
    /// The point and tangent of a chart coordinate `u` (tangent is `d/du`).
    pub fn from_chart(chart: Chart, u: C64) -> Self {
        match chart {
            Chart::Affine => HomJet { x: u, y: ONE, dx: ONE, dy: ZERO },
            Chart::Inverse => HomJet { x: ONE, y: u, dx: ZERO, dy: ONE },
        }
    }

    pub fn point(&self) -> SpherePoint {
        SpherePoint::from_homogeneous(self.x, self.y)
    }

    /// Coordinate of the jet's point in `chart` and its derivative, or `None`
    /// at the chart's pole.
    pub fn in_chart(&self, chart: Chart) -> Option<(C64, C64)> {
        let (num, den, dnum, dden) = match chart {
            Chart::Affine => (self.x, self.y, self.dx, self.dy),
            Chart::Inverse => (self.y, self.x, self.dy, self.dx),
        };
        if den == ZERO {
            return None;
        }
        Some((num / den, (dnum * den - num * dden) / (den * den)))
    }

    /// Spherical derivative `|x'y - xy'| (1+|u|^2) / (|x|^2+|y|^2)` relative to
    /// a start coordinate `u` in either chart.
    pub fn spherical_derivative(&self, u: C64) -> f64 {
        let w = (self.dx * self.y - self.x * self.dy).norm();
        w * (1.0 + u.norm_sqr()) / (self.x.norm_sqr() + self.y.norm_sqr())
    }

    fn renormalize(&mut self) {
        let s = self.x.norm().max(self.y.norm());
        if s > 0.0 && s.is_finite() {
            let inv = 1.0 / s;
            self.x *= inv;
            self.y *= inv;
            self.dx *= inv;
            self.dy *= inv;
        }
    }
}

/// Serialized form of a map: ascending coefficient lists of `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub numerator: Vec<[f64; 2]>,
    pub denominator: Vec<[f64; 2]>,
}

impl RationalMap {
    /// Validated constructor: degree >= 2 and numerator/denominator coprime.
    pub fn new(numer: Vec<C64>, denom: Vec<C64>) -> Result<Self> {
        let map = Self::unchecked(numer, denom)?;
        let rel = map.relative_resultant();
        if !(rel > COPRIME_TOL) {
            return Err(Error::NotCoprime(rel));
        }
        Ok(map)
    }

    /// Constructor for maps that are coprime by construction (composites of
    /// valid maps), skipping the resultant test, which loses meaning at high degree.
    pub fn unchecked(numer: Vec<C64>, denom: Vec<C64>) -> Result<Self> {
        if numer.iter().chain(&denom).any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidMap("non-finite coefficient".into()));
        }
        let numer = poly::trim(numer);
        let denom = poly::trim(denom);
        let dq = poly::degree(&denom)
            .ok_or_else(|| Error::InvalidMap("zero denominator".into()))?;
        let dp = poly::degree(&numer)
            .ok_or_else(|| Error::InvalidMap("zero numerator (constant map)".into()))?;
        let degree = dp.max(dq);
        if degree < 2 {
            return Err(Error::InvalidMap(format!("degree {degree} < 2")));
        }
        let lead = denom[dq];
        let numer: Vec<C64> = numer.iter().map(|&c| c / lead).collect();
        let denom: Vec<C64> = denom.iter().map(|&c| c / lead).collect();

        let pad = |v: &[C64]| {
            let mut h = v.to_vec();
            h.resize(degree + 1, ZERO);
            h
        };
        let hp = pad(&numer);
        let hq = pad(&denom);
        let hp_rev = hp.iter().rev().copied().collect();
        let hq_rev = hq.iter().rev().copied().collect();
        Ok(RationalMap { numer, denom, degree, hp, hq, hp_rev, hq_rev })
    }

    pub fn from_real(numer: &[f64], denom: &[f64]) -> Result<Self> {
        let c = |v: &[f64]| v.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::new(c(numer), c(denom))
    }

    pub fn from_spec(spec: &MapSpec) -> Result<Self> {
        let c = |v: &[[f64; 2]]| v.iter().map(|&[re, im]| C64::new(re, im)).collect();
        Self::new(c(&spec.numerator), c(&spec.denominator))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: MapSpec = serde_json::from_str(text)?;
        Self::from_spec(&spec)
    }

    pub fn spec(&self) -> MapSpec {
        let c = |v: &[C64]| v.iter().map(|z| [z.re, z.im]).collect();
        MapSpec { numerator: c(&self.numer), denominator: c(&self.denom) }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn numerator(&self) -> &[C64] {
        &self.numer
    }

    pub fn denominator(&self) -> &[C64] {
        &self.denom
    }

    /// Homogeneous coefficient lists `(p_0..p_D, q_0..q_D)`.
    pub fn homogeneous_coefficients(&self) -> (&[C64], &[C64]) {
        (&self.hp, &self.hq)
    }

    /// `|Res(numer, denom)| / (|numer|^deg(denom) |denom|^deg(numer))`, in `[0, 1]`.
    pub fn relative_resultant(&self) -> f64 {
        let m = poly::degree(&self.numer).unwrap_or(0);
        let n = poly::degree(&self.denom).unwrap_or(0);
        let norm = |v: &[C64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let res = resultant(&self.numer[..=m], &self.denom[..=n]);
        res.norm() / (norm(&self.numer).powi(n as i32) * norm(&self.denom).powi(m as i32))
    }

    pub fn hom(&self, x: C64, y: C64) -> Hom {
        let d = self.degree as f64;
        if x.norm_sqr() <= y.norm_sqr() {
            let t = x / y;
            let (p, dp) = poly::eval_with_derivative(&self.hp, t);
            let (q, dq) = poly::eval_with_derivative(&self.hq, t);
            let yd1 = y.powu(self.degree as u32 - 1);
            let (p, px) = (p * yd1 * y, dp * yd1);
            let (q, qx) = (q * yd1 * y, dq * yd1);
            // Euler: x P_x + y P_y = D P
            Hom { p, q, px, qx, py: (p * d - x * px) / y, qy: (q * d - x * qx) / y }
        } else {
            let s = y / x;
            let (p, dp) = poly::eval_with_derivative(&self.hp_rev, s);
            let (q, dq) = poly::eval_with_derivative(&self.hq_rev, s);
            let xd1 = x.powu(self.degree as u32 - 1);
            let (p, py) = (p * xd1 * x, dp * xd1);
            let (q, qy) = (q * xd1 * x, dq * xd1);
            Hom { p, q, py, qy, px: (p * d - y * py) / x, qx: (q * d - y * qy) / x }
        }
    }

    /// One step of the map on a jet.
    pub fn step_jet(&self, j: &HomJet) -> HomJet {
        let h = self.hom(j.x, j.y);
        let mut out = HomJet {
            x: h.p,
            y: h.q,
            dx: h.px * j.dx + h.py * j.dy,
            dy: h.qx * j.dx + h.qy * j.dy,
        };
        out.renormalize();
        out
    }

    /// `n`-fold iterate of a jet (renormalized each step; ratios are exact).
    pub fn iterate_jet(&self, mut j: HomJet, n: usize) -> HomJet {
        j.renormalize();
        for _ in 0..n {
            j = self.step_jet(&j);
        }
        j
    }

    pub fn eval(&self, z: SpherePoint) -> SpherePoint {
        let (x, y) = z.homogeneous();
        let h = self.hom(x, y);
        SpherePoint::from_homogeneous(h.p, h.q)
    }

    pub fn eval_c(&self, z: C64) -> SpherePoint {
        self.eval(SpherePoint::new(z))
    }

    pub fn iterate(&self, z: SpherePoint, n: usize) -> SpherePoint {
        (0..n).fold(z, |acc, _| self.eval(acc))
    }

    /// `||f'(z)|| = |f'(z)| (1+|z|^2) / (1+|f(z)|^2)`, chart independent.
    pub fn spherical_derivative(&self, z: SpherePoint) -> f64 {
        let (chart, u) = z.chart();
        let j = self.step_jet(&HomJet::from_chart(chart, u));
        j.spherical_derivative(u)
    }

    /// Spherical derivative of `f^n` at `z` as the product along the orbit.
    pub fn spherical_derivative_iterate(&self, z: SpherePoint, n: usize) -> f64 {
        let mut prod = 1.0;
        let mut w = z;
        for _ in 0..n {
            prod *= self.spherical_derivative(w);
            w = self.eval(w);
        }
        prod
    }

    /// The map read in coordinates `chart_in -> chart_out`: value and derivative
    /// at `u`. `None` when the image sits at the pole of `chart_out`.
    pub fn chart_map(&self, u: C64, chart_in: Chart, chart_out: Chart) -> Option<(C64, C64)> {
        let j = self.step_jet(&HomJet::from_chart(chart_in, u));
        j.in_chart(chart_out)
    }

    /// Wronskian `p'q - pq'`, whose roots are the finite critical points.
    pub fn wronskian(&self) -> Vec<C64> {
        let dp = poly::derivative(&self.numer);
        let dq = poly::derivative(&self.denom);
        let a = poly::mul(&dp, &self.denom);
        let b = poly::mul(&self.numer, &dq);
        poly::add(&a, &poly::scale(&b, C64::new(-1.0, 0.0)))
    }

    /// All `2D - 2` critical points, repeated by multiplicity. Infinity is
    /// critical with multiplicity `2D - 2 - deg W`.
    pub fn critical_points(&self) -> Result<Vec<SpherePoint>> {
        let w = poly::trim_relative(&self.wronskian(), 1e-13);
        let total = 2 * self.degree - 2;
        let deg = poly::degree(&w).unwrap_or(0);
        let mut out = Vec::with_capacity(total);
        if deg >= 1 {
            let roots = poly::find_roots(&w)?;
            out.extend(roots.with_multiplicity().into_iter().map(SpherePoint::new));
        }
        out.extend(std::iter::repeat(SpherePoint::Infinity).take(total - deg));
        Ok(out)
    }

    /// All `D` preimages of `target`, repeated by multiplicity.
    pub fn preimages(&self, target: SpherePoint) -> Result<Vec<SpherePoint>> {
        Ok(self.preimage_roots(target)?.1)
    }

    /// Preimages together with the raw root-finder output (for residual checks).
    pub fn preimage_roots(&self, target: SpherePoint) -> Result<(Option<PolyRoots>, Vec<SpherePoint>)> {
        let h: Vec<C64> = match target {
            SpherePoint::Finite(c) if c.norm_sqr() <= 1.0 => {
                self.hp.iter().zip(&self.hq).map(|(&p, &q)| p - c * q).collect()
            }
            _ => {
                let w = target.coord_in(Chart::Inverse).unwrap_or(ZERO);
                self.hq.iter().zip(&self.hp).map(|(&q, &p)| q - w * p).collect()
            }
        };
        let h = poly::trim_relative(&h, 1e-14);
        let deg = poly::degree(&h).unwrap_or(0);
        let mut out = Vec::with_capacity(self.degree);
        let mut roots = None;
        if deg >= 1 {
            let r = poly::find_roots(&h)?;
            out.extend(r.with_multiplicity().into_iter().map(SpherePoint::new));
            roots = Some(r);
        }
        out.extend(std::iter::repeat(SpherePoint::Infinity).take(self.degree - deg));
        Ok((roots, out))
    }

    /// Symbolic composite `self ∘ other`.
    pub fn compose(&self, other: &RationalMap) -> Result<RationalMap> {
        let d = self.degree;
        let gp = &other.numer;
        let gq = &other.denom;
        let mut pow_p = vec![vec![ONE]];
        let mut pow_q = vec![vec![ONE]];
        for k in 1..=d {
            pow_p.push(poly::mul(&pow_p[k - 1], gp));
            pow_q.push(poly::mul(&pow_q[k - 1], gq));
        }
        let mut num = Vec::new();
        let mut den = Vec::new();
        for k in 0..=d {
            let term = poly::mul(&pow_p[k], &pow_q[d - k]);
            num = poly::add(&num, &poly::scale(&term, self.hp[k]));
            den = poly::add(&den, &poly::scale(&term, self.hq[k]));
        }
        RationalMap::unchecked(num, den)
    }

    /// Symbolic `n`-th iterate, `n >= 1`.
    pub fn iterate_map(&self, n: usize) -> Result<RationalMap> {
        let mut g = self.clone();
        for _ in 1..n {
            g = self.compose(&g)?;
        }
        Ok(g)
    }

    /// Taylor coefficients `g_0..g_{len-1}` of the map read in the local
    /// coordinate of a fixed point `a`: `u = z - a` for finite `a`, `u = 1/z`
    /// at infinity. `g_0` is the displacement of `a` (zero when `a` is fixed).
    pub fn local_series(&self, a: SpherePoint, len: usize) -> Vec<C64> {
        match a {
            SpherePoint::Finite(a) => {
                let p = poly::taylor_shift(&self.hp, a);
                let q = poly::taylor_shift(&self.hq, a);
                let mut g = poly::series_div(&p, &q, len);
                g[0] -= a;
                g
            }
            SpherePoint::Infinity => poly::series_div(&self.hq_rev, &self.hp_rev, len),
        }
    }
}

/// Resultant of two polynomials (ascending, nonzero leading coefficients)
/// via the Sylvester determinant.
pub fn resultant(p: &[C64], q: &[C64]) -> C64 {
    let m = p.len() - 1;
    let n = q.len() - 1;
    if n == 0 {
        return q[0].powu(m as u32);
    }
    if m == 0 {
        return p[0].powu(n as u32);
    }
    let size = m + n;
    let mut a = vec![vec![ZERO; size]; size];
    for i in 0..n {
        for (k, &c) in p.iter().rev().enumerate() {
            a[i][i + k] = c;
        }
    }
    for i in 0..m {
        for (k, &c) in q.iter().rev().enumerate() {
            a[n + i][i + k] = c;
        }
    }
    determinant(a)
}

fn determinant(mut a: Vec<Vec<C64>>) -> C64 {
    let n = a.len();
    let mut det = ONE;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].norm().partial_cmp(&a[j][col].norm()).unwrap())
            .unwrap();
        if a[piv][col] == ZERO {
            return ZERO;
        }
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        let pv = a[col][col];
        det *= pv;
        for row in col + 1..n {
            let f = a[row][col] / pv;
            if f == ZERO {
                continue;
            }
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
        }
    }
    det
}
