//! Dense complex polynomials (ascending coefficients), truncated power series
//! and Aberth–Ehrlich simultaneous root finding.

use crate::error::{Error, Result};
use crate::sphere::{C64, ONE, ZERO};
use std::f64::consts::TAU;

/// Iteration cap for the simultaneous root finder.
pub const MAX_ABERTH_ITERATIONS: usize = 1000;

pub fn eval(coeffs: &[C64], z: C64) -> C64 {
    coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
}

/// Value and first derivative by Horner.
pub fn eval_with_derivative(coeffs: &[C64], z: C64) -> (C64, C64) {
    let mut p = ZERO;
    let mut dp = ZERO;
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

pub fn derivative(coeffs: &[C64]) -> Vec<C64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| c * k as f64)
        .collect()
}

pub fn mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![ZERO; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == ZERO {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn add(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; a.len().max(b.len())];
    for (i, &x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, &y) in b.iter().enumerate() {
        out[i] += y;
    }
    out
}

pub fn scale(a: &[C64], s: C64) -> Vec<C64> {
    a.iter().map(|&x| x * s).collect()
}

/// Drop exactly-zero leading coefficients.
pub fn trim(mut a: Vec<C64>) -> Vec<C64> {
    while a.last() == Some(&ZERO) {
        a.pop();
    }
    a
}

/// Degree after trimming; `None` for the zero polynomial.
pub fn degree(a: &[C64]) -> Option<usize> {
    a.iter().rposition(|&c| c != ZERO)
}

/// Drop leading coefficients whose modulus is below `rel` times the largest one.
pub fn trim_relative(a: &[C64], rel: f64) -> Vec<C64> {
    let scale = a.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut out = a.to_vec();
    while let Some(c) = out.last() {
        if c.norm() <= rel * scale {
            out.pop();
        } else {
            break;
        }
    }
    out
}

/// Coefficients of `p(a + u)` as a polynomial in `u`.
pub fn taylor_shift(coeffs: &[C64], a: C64) -> Vec<C64> {
    let mut out = coeffs.to_vec();
    let n = out.len();
    for i in 0..n {
        for j in (i..n.saturating_sub(1)).rev() {
            let next = out[j + 1];
            out[j] += a * next;
        }
    }
    out
}

/// `(a * b) mod u^len`.
pub fn series_mul(a: &[C64], b: &[C64], len: usize) -> Vec<C64> {
    let mut out = vec![ZERO; len];
    for (i, &x) in a.iter().enumerate().take(len) {
        if x == ZERO {
            continue;
        }
        for (j, &y) in b.iter().enumerate().take(len - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// `(a / b) mod u^len`; requires `b[0] != 0`.
pub fn series_div(a: &[C64], b: &[C64], len: usize) -> Vec<C64> {
    let b0 = b[0];
    let mut out = vec![ZERO; len];
    for k in 0..len {
        let mut s = a.get(k).copied().unwrap_or(ZERO);
        for j in 1..=k.min(b.len().saturating_sub(1)) {
            s -= b[j] * out[k - j];
        }
        out[k] = s / b0;
    }
    out
}

/// A root together with the number of raw roots clustered onto it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root {
    pub value: C64,
    pub multiplicity: usize,
}

/// Output of [`find_roots`].
#[derive(Clone, Debug)]
pub struct PolyRoots {
    pub roots: Vec<Root>,
    /// Max of `|p(root)|` over the raw (unclustered) roots.
    pub residual: f64,
    pub iterations: usize,
}

impl PolyRoots {
    /// Roots repeated according to multiplicity.
    pub fn with_multiplicity(&self) -> Vec<C64> {
        self.roots
            .iter()
            .flat_map(|r| std::iter::repeat(r.value).take(r.multiplicity))
            .collect()
    }

    pub fn count(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }
}

/// All roots of a polynomial given by ascending coefficients.
///
/// Aberth–Ehrlich iteration started from a slightly rotated circle around the
/// root centroid whose radius comes from Fujiwara's bounds; deterministic for
/// given coefficients. Roots closer than `1e-6` (relative) are reported as one
/// root with multiplicity.
pub fn find_roots(coeffs: &[C64]) -> Result<PolyRoots> {
    let coeffs = trim(coeffs.to_vec());
    let n = match degree(&coeffs) {
        Some(0) | None => {
            return Err(Error::Invalid("find_roots needs degree >= 1".into()));
        }
        Some(n) => n,
    };
    if n == 1 {
        let z = -coeffs[0] / coeffs[1];
        return Ok(PolyRoots {
            roots: vec![Root { value: z, multiplicity: 1 }],
            residual: eval(&coeffs, z).norm(),
            iterations: 0,
        });
    }
    let lead = coeffs[n];
    let monic: Vec<C64> = coeffs.iter().map(|&c| c / lead).collect();
    let abs: Vec<f64> = monic.iter().map(|c| c.norm()).collect();

    let centroid = -monic[n - 1] / n as f64;
    let upper = fujiwara(&abs);
    let lower = if abs[0] > 0.0 {
        let rev: Vec<f64> = abs.iter().rev().map(|&c| c / abs[0]).collect();
        1.0 / fujiwara(&rev)
    } else {
        0.0
    };
    let radius = if lower > 0.0 { (upper * lower).sqrt() } else { 0.5 * upper }.max(1e-3);
    let init: Vec<C64> = (0..n)
        .map(|k| centroid + C64::from_polar(radius, TAU * k as f64 / n as f64 + 0.4))
        .collect();

    let deriv = derivative(&monic);
    let (raw, iterations, converged) = aberth(init, MAX_ABERTH_ITERATIONS, |z| {
        let p = eval(&monic, z);
        let dp = eval(&deriv, z);
        // backward error test: |p(z)| at rounding level of sum |a_k||z|^k
        let bound = abs.iter().rev().fold(0.0, |acc, &c| acc * z.norm() + c);
        let done = p.norm() <= 4.0 * f64::EPSILON * bound;
        (if dp == ZERO { ZERO } else { p / dp }, done)
    });
    if !converged {
        return Err(Error::RootFinding { degree: n, iterations });
    }

    let residual = raw.iter().map(|&z| eval(&coeffs, z).norm()).fold(0.0, f64::max);
    Ok(PolyRoots { roots: cluster(&raw, 1e-6), residual, iterations })
}

fn fujiwara(monic_abs: &[f64]) -> f64 {
    let n = monic_abs.len() - 1;
    let mut m: f64 = 0.0;
    for k in 1..=n {
        let c = monic_abs[n - k];
        let c = if k == n { c / 2.0 } else { c };
        m = m.max(c.powf(1.0 / k as f64));
    }
    2.0 * m.max(1e-12)
}

/// Group roots lying within `rel * max(1, |z|)` of each other.
pub fn cluster(raw: &[C64], rel: f64) -> Vec<Root> {
    let mut out: Vec<(C64, usize)> = Vec::new();
    for &z in raw {
        let tol = rel * z.norm().max(1.0);
        match out.iter_mut().find(|(c, m)| ((*c / *m as f64) - z).norm() <= tol) {
            Some(entry) => {
                entry.0 += z;
                entry.1 += 1;
            }
            None => out.push((z, 1)),
        }
    }
    out.into_iter()
        .map(|(s, m)| Root { value: s / m as f64, multiplicity: m })
        .collect()
}

/// Aberth–Ehrlich iteration driven by a Newton-ratio oracle.
///
/// `ratio(z)` returns `p(z)/p'(z)` and whether `z` is already accurate. The
/// polynomial must have exactly `init.len()` roots. Returns the roots, the
/// iteration count and whether every root met its stopping test before the cap.
pub fn aberth(
    mut z: Vec<C64>,
    max_iter: usize,
    ratio: impl Fn(C64) -> (C64, bool),
) -> (Vec<C64>, usize, bool) {
    let n = z.len();
    let mut done = vec![false; n];
    for iter in 1..=max_iter {
        let mut all = true;
        for k in 0..n {
            if done[k] {
                continue;
            }
            let (r, ok) = ratio(z[k]);
            if ok || r == ZERO {
                done[k] = true;
                continue;
            }
            let zk = z[k];
            let mut s = ZERO;
            for (j, &zj) in z.iter().enumerate() {
                if j != k {
                    s += ONE / (zk - zj);
                }
            }
            let w = r / (ONE - r * s);
            let w = if w.re.is_finite() && w.im.is_finite() { w } else { r };
            z[k] = zk - w;
            if w.norm() <= 2.0 * f64::EPSILON * zk.norm().max(1e-300) {
                done[k] = true;
            } else {
                all = false;
            }
        }
        if all {
            return (z, iter, true);
        }
    }
    (z, max_iter, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sorted(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        v
    }

    #[test]
    fn quadratic_examples() {
        let r = sorted(find_roots(&[c(-1.0, 0.0), ZERO, ONE]).unwrap().with_multiplicity());
        assert!((r[0] - c(-1.0, 0.0)).norm() < 1e-14 && (r[1] - ONE).norm() < 1e-14);

        let r = sorted(find_roots(&[c(-1.0, 0.0), c(-1.0, 0.0), ONE]).unwrap().with_multiplicity());
        let s5 = 5f64.sqrt();
        assert!((r[0].re - (1.0 - s5) / 2.0).abs() < 1e-14);
        assert!((r[1].re - (1.0 + s5) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn cube_roots_of_unity() {
        let r = find_roots(&[c(-1.0, 0.0), ZERO, ZERO, ONE]).unwrap();
        assert_eq!(r.count(), 3);
        for k in 0..3 {
            let w = C64::from_polar(1.0, TAU * k as f64 / 3.0);
            assert!(r.roots.iter().any(|x| (x.value - w).norm() < 1e-14));
        }
        assert!(r.residual < 1e-14);
    }

    #[test]
    fn double_root_is_clustered() {
        // (z-1)^2 (z+2)
        let p = mul(&mul(&[c(-1.0, 0.0), ONE], &[c(-1.0, 0.0), ONE]), &[c(2.0, 0.0), ONE]);
        let r = find_roots(&p).unwrap();
        assert_eq!(r.roots.len(), 2);
        let one = r.roots.iter().find(|x| (x.value - ONE).norm() < 1e-6).unwrap();
        assert_eq!(one.multiplicity, 2);
    }

    #[test]
    fn zero_root_and_degenerate_input() {
        let r = find_roots(&[ZERO, ZERO, ONE]).unwrap();
        assert_eq!(r.count(), 2);
        assert!(r.roots.iter().all(|x| x.value.norm() < 1e-6));
        assert!(find_roots(&[ONE]).is_err());
        assert!(find_roots(&[]).is_err());
    }

    #[test]
    fn taylor_shift_matches_evaluation() {
        let p = [c(1.0, 2.0), c(-3.0, 0.5), c(0.25, 0.0), c(2.0, -1.0)];
        let a = c(0.7, -0.3);
        let s = taylor_shift(&p, a);
        for u in [c(0.1, 0.2), c(-1.0, 0.4)] {
            assert!((eval(&s, u) - eval(&p, a + u)).norm() < 1e-12);
        }
    }

    #[test]
    fn series_division_inverts_multiplication() {
        let a = [c(1.0, 0.0), c(2.0, 1.0), c(-1.0, 0.5)];
        let b = [c(2.0, 0.0), c(0.3, 0.0), c(0.0, 1.0), c(1.0, 1.0)];
        let q = series_div(&a, &b, 8);
        let back = series_mul(&q, &b, 8);
        for k in 0..8 {
            let want = a.get(k).copied().unwrap_or(ZERO);
            assert!((back[k] - want).norm() < 1e-13);
        }
    }
}
