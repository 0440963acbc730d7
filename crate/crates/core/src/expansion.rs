//! Expansion along boundary samples, the distance-expanding property, and
//! closing of near-returns into certified periodic points.

use crate::basins::BoundarySampleSet;
use crate::dynamics::{coords, newton_periodic, periodic_points, CycleClass, PeriodicPoint, PERIODIC_RESIDUAL};
use crate::error::{Error, Result};
use crate::map::RationalMap;
use crate::par;
use crate::sphere::{spherical_distance, SpherePoint};
use serde::Serialize;
use std::fmt::Write as _;

/// Samples closer than this to a critical point or parabolic cycle fail screening.
pub const SCREEN_TOL: f64 = 1e-6;
/// Largest period searched for parabolic-suspect cycles during screening.
pub const SCREEN_PERIOD: usize = 4;
/// Default near-return threshold.
pub const CLOSING_ALPHA: f64 = 1e-2;

#[derive(Clone, Debug)]
pub struct ExpansionReport {
    pub samples: BoundarySampleSet,
    /// `(n, min over samples of ||(f^n)'||)` for `n = 1..=n_max`.
    pub per_n: Vec<(usize, f64)>,
    pub certified_n: Option<usize>,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    per_n: &'a [(usize, f64)],
    #[serde(rename = "certified_N")]
    certified_n: Option<usize>,
    samples: usize,
}

impl ExpansionReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ReportJson {
            per_n: &self.per_n,
            certified_n: self.certified_n,
            samples: self.samples.points.len(),
        })?)
    }

    /// Least-squares slope of `log min ||(f^n)'||` over `n >= from`.
    pub fn log_slope(&self, from: usize) -> Option<f64> {
        let pts: Vec<(f64, f64)> =
            self.per_n.iter().filter(|(n, m)| *n >= from && *m > 0.0).map(|&(n, m)| (n as f64, m.ln())).collect();
        if pts.len() < 2 {
            return None;
        }
        let k = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (mx, my) = (sx / k, sy / k);
        let num: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
        Some(num / den)
    }
}

/// Reject samples near a critical point or a parabolic-suspect cycle.
pub fn screen_hypotheses(map: &RationalMap, samples: &[SpherePoint]) -> Result<()> {
    let mut bad: Vec<(SpherePoint, &str)> =
        map.critical_points()?.into_iter().map(|c| (c, "critical point")).collect();
    let d = map.degree();
    for n in 1..=SCREEN_PERIOD {
        if d.checked_pow(n as u32).map_or(true, |m| m > 4096) {
            break;
        }
        for p in periodic_points(map, n)?.points {
            if p.class == CycleClass::ParabolicSuspect {
                bad.push((p.point, "parabolic-suspect cycle"));
            }
        }
    }
    for (k, &s) in samples.iter().enumerate() {
        if let Some((c, what)) = bad.iter().find(|(c, _)| spherical_distance(s, *c) < SCREEN_TOL) {
            return Err(Error::Hypothesis(format!("sample {k} at {s} lies within {SCREEN_TOL:e} of {what} {c}")));
        }
    }
    Ok(())
}

/// `[||f'(z)||, ||(f^2)'(z)||, ..., ||(f^n)'(z)||]` as running chain-rule products.
pub fn derivative_products(map: &RationalMap, z: SpherePoint, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut w = z;
    let mut prod = 1.0;
    for _ in 0..n {
        prod *= map.spherical_derivative(w);
        out.push(prod);
        w = map.eval(w);
    }
    out
}

/// Minimum over the samples of `||(f^n)'||` for each `n <= n_max`, after
/// hypothesis screening. `certified_n` is the least `N` with the minimum
/// above 1 for every `n` in `N..=n_max`.
pub fn mane_check(map: &RationalMap, samples: &BoundarySampleSet, n_max: usize) -> Result<ExpansionReport> {
    if samples.points.is_empty() {
        return Err(Error::Invalid("no samples".into()));
    }
    if n_max == 0 {
        return Err(Error::Invalid("n_max must be positive".into()));
    }
    screen_hypotheses(map, &samples.points)?;
    let rows = par::map(&samples.points, |&z| derivative_products(map, z, n_max));
    let per_n: Vec<(usize, f64)> = (0..n_max)
        .map(|k| (k + 1, rows.iter().map(|r| r[k]).fold(f64::INFINITY, f64::min)))
        .collect();
    let mut certified_n = None;
    for &(n, m) in per_n.iter().rev() {
        if m > 1.0 {
            certified_n = Some(n);
        } else {
            break;
        }
    }
    Ok(ExpansionReport { samples: samples.clone(), per_n, certified_n })
}

#[derive(Clone, Debug, Serialize)]
pub struct DistanceExpansionReport {
    pub pass: bool,
    pub pairs_checked: usize,
    /// `(i, j, σ(x, y), σ(f^N x, f^N y) / σ(x, y))` with the smallest ratio.
    pub worst: Option<(usize, usize, f64, f64)>,
}

/// Check `σ(f^N x, f^N y) >= λ σ(x, y)` on sample pairs with `0 < σ(x, y) <= η`,
/// nearest pairs first, at most `pair_budget` of them.
pub fn distance_expanding_check(
    map: &RationalMap,
    samples: &[SpherePoint],
    lambda: f64,
    eta: f64,
    n: usize,
    pair_budget: usize,
) -> Result<DistanceExpansionReport> {
    if !(lambda > 1.0 && eta > 0.0) {
        return Err(Error::Invalid(format!("need lambda > 1 and eta > 0, got {lambda}, {eta}")));
    }
    let mut pairs = Vec::new();
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let d = spherical_distance(samples[i], samples[j]);
            if d > 0.0 && d <= eta {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    pairs.truncate(pair_budget);
    let images: Vec<SpherePoint> = par::map(samples, |&z| map.iterate(z, n));
    let mut worst: Option<(usize, usize, f64, f64)> = None;
    for &(d, i, j) in &pairs {
        let ratio = spherical_distance(images[i], images[j]) / d;
        if worst.map_or(true, |w| ratio < w.3) {
            worst = Some((i, j, d, ratio));
        }
    }
    Ok(DistanceExpansionReport {
        pass: worst.map_or(true, |w| w.3 >= lambda),
        pairs_checked: pairs.len(),
        worst,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NearReturn {
    pub q: usize,
    pub p: usize,
    pub distance: f64,
}

/// Pairs `Q < P <= horizon` with `σ(f^Q z, f^P z) <= alpha`, nearest first.
pub fn near_returns(map: &RationalMap, z: SpherePoint, horizon: usize, alpha: f64) -> Result<Vec<NearReturn>> {
    if horizon < 2 {
        return Err(Error::Invalid("horizon must be at least 2".into()));
    }
    let orbit = crate::dynamics::orbit(map, z, horizon);
    let mut out = Vec::new();
    for q in 0..horizon {
        for p in q + 1..=horizon {
            let distance = spherical_distance(orbit[q], orbit[p]);
            if distance <= alpha {
                out.push(NearReturn { q, p, distance });
            }
        }
    }
    out.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.q.cmp(&b.q)).then(a.p.cmp(&b.p)));
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosingResult {
    pub seed: SpherePoint,
    pub l: usize,
    pub refined: PeriodicPoint,
    pub residual: f64,
    pub seed_distance: f64,
}

/// Newton on `f^L(z) = z` from `seed`, certified at residual `< 1e-10`.
pub fn closing_refine(map: &RationalMap, seed: SpherePoint, l: usize) -> Result<ClosingResult> {
    if l == 0 {
        return Err(Error::Invalid("L must be positive".into()));
    }
    let (z, residual) = newton_periodic(map, seed, l, 100);
    if !(residual < PERIODIC_RESIDUAL) {
        return Err(Error::NewtonDivergence(residual));
    }
    let refined = PeriodicPoint::certify(map, z, l)?;
    Ok(ClosingResult { seed, l, refined, residual, seed_distance: spherical_distance(seed, z) })
}

/// Close the nearest near-return of each sample's orbit. Samples without a
/// near-return are skipped; failures to refine are kept.
pub fn closing_sweep(
    map: &RationalMap,
    samples: &[SpherePoint],
    horizon: usize,
    alpha: f64,
) -> Result<Vec<(usize, NearReturn, Result<ClosingResult>)>> {
    let found = par::map(samples, |&z| -> Result<Option<(NearReturn, Result<ClosingResult>)>> {
        let Some(&nr) = near_returns(map, z, horizon, alpha)?.first() else { return Ok(None) };
        let seed = map.iterate(z, nr.q);
        Ok(Some((nr, closing_refine(map, seed, nr.p - nr.q))))
    });
    let mut out = Vec::new();
    for (k, r) in found.into_iter().enumerate() {
        if let Some((nr, c)) = r? {
            out.push((k, nr, c));
        }
    }
    Ok(out)
}

/// CSV: one row per closing result.
pub fn closing_csv(results: &[ClosingResult]) -> String {
    let mut s = String::from("seed_re,seed_im,L,re,im,period,abs_multiplier,class,residual,seed_distance\n");
    for r in results {
        let (a, b) = coords(r.seed);
        let (c, d) = coords(r.refined.point);
        let _ = writeln!(
            s,
            "{a},{b},{},{c},{d},{},{},{},{:e},{:e}",
            r.l,
            r.refined.period,
            r.refined.multiplier.norm(),
            r.refined.class.as_str(),
            r.residual,
            r.seed_distance
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;
    use crate::sphere::C64;

    fn circle_samples(n: usize) -> BoundarySampleSet {
        let points: Vec<SpherePoint> =
            (0..n).map(|k| SpherePoint::from_polar(1.0, (k as f64 + 0.37) / n as f64)).collect();
        let witnesses = points.iter().map(|&p| (p, p)).collect();
        BoundarySampleSet { pair: (0, 1), points, witnesses, tol: 1e-8 }
    }

    #[test]
    fn doubling_on_the_circle() {
        let f = builtins::z_squared();
        let r = mane_check(&f, &circle_samples(50), 10).unwrap();
        assert_eq!(r.certified_n, Some(1));
        for &(n, m) in &r.per_n {
            assert!((m / 2f64.powi(n as i32) - 1.0).abs() < 1e-12, "{n} {m}");
        }
        assert!((r.log_slope(1).unwrap() - 2f64.ln()).abs() < 1e-12);
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(v["certified_N"], 1);
        assert_eq!(v["per_n"][0][0], 1);
    }

    #[test]
    fn basilica_alpha_sample() {
        let f = builtins::basilica2();
        let alpha = (1.0 - 5f64.sqrt()) / 2.0;
        let s = BoundarySampleSet {
            pair: (0, 1),
            points: vec![SpherePoint::real(alpha)],
            witnesses: vec![(SpherePoint::real(alpha), SpherePoint::real(alpha))],
            tol: 1e-8,
        };
        let r = mane_check(&f, &s, 6).unwrap();
        assert_eq!(r.certified_n, Some(1));
        // spherical factor at a real fixed point cancels
        assert!((r.per_n[0].1 - (6.0 - 2.0 * 5f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn screening_rejects_critical_samples() {
        let f = builtins::newton_cubic();
        let s = BoundarySampleSet {
            pair: (0, 1),
            points: vec![SpherePoint::Infinity, SpherePoint::real(1e-9)],
            witnesses: vec![(SpherePoint::Infinity, SpherePoint::Infinity); 2],
            tol: 1e-8,
        };
        match mane_check(&f, &s, 5) {
            Err(Error::Hypothesis(m)) => assert!(m.contains("sample 1"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn chain_rule_matches_iterated_map() {
        for f in [builtins::z_squared(), builtins::newton_cubic()] {
            for n in 1..=3 {
                let g = f.iterate_map(n).unwrap();
                for z in [C64::new(0.3, 0.7), C64::new(-1.2, 0.4), C64::new(2.5, -3.0)] {
                    let z = SpherePoint::new(z);
                    let a = derivative_products(&f, z, n)[n - 1];
                    let b = g.spherical_derivative(z);
                    assert!((a / b - 1.0).abs() < 1e-8, "{n} {z} {a} {b}");
                }
            }
        }
    }

    #[test]
    fn distance_expanding_examples() {
        let f = builtins::z_squared();
        let pts = circle_samples(200).points;
        let r = distance_expanding_check(&f, &pts, 1.9, 0.1, 1, 10_000).unwrap();
        assert!(r.pass && r.pairs_checked > 0);
        let r = distance_expanding_check(&f, &pts, 2.1, 0.1, 1, 10_000).unwrap();
        assert!(!r.pass);
        assert!(r.worst.unwrap().3 < 2.0);
        let r = distance_expanding_check(&f, &pts, 1.01, 0.1, 0, 10).unwrap();
        assert!(!r.pass);
        assert!((r.worst.unwrap().3 - 1.0).abs() < 1e-15);
        assert!(distance_expanding_check(&f, &pts, 1.0, 0.1, 1, 10).is_err());
    }

    #[test]
    fn near_return_examples() {
        let f = builtins::z_squared();
        let r = near_returns(&f, SpherePoint::real(1.0), 5, 1e-2).unwrap();
        assert_eq!((r[0].q, r[0].p, r[0].distance), (0, 1, 0.0));
        let r = near_returns(&f, SpherePoint::from_polar(1.0, 0.2), 8, 1e-9).unwrap();
        assert!(r.iter().any(|x| (x.q, x.p) == (0, 4)));
        assert!(near_returns(&f, SpherePoint::real(1.0), 1, 1e-2).is_err());
        // orbit leaves the neighbourhood of the repelling point
        let g = builtins::basilica2();
        let alpha = (1.0 - 5f64.sqrt()) / 2.0;
        let r = near_returns(&g, SpherePoint::real(alpha + 1e-6), 40, 1e-3).unwrap();
        assert!(r.iter().all(|x| x.q < 40));
    }

    #[test]
    fn closing_examples() {
        let f = builtins::z_squared();
        let r = closing_refine(&f, SpherePoint::real(0.99), 1).unwrap();
        assert!(spherical_distance(r.refined.point, SpherePoint::real(1.0)) < 1e-12);
        assert_eq!(r.refined.period, 1);
        assert!((r.refined.multiplier.norm() - 2.0).abs() < 1e-12);
        assert!((r.seed_distance - spherical_distance(SpherePoint::real(0.99), r.refined.point)).abs() < 1e-15);

        let g = builtins::basilica2();
        let alpha = (1.0 - 5f64.sqrt()) / 2.0;
        let r = closing_refine(&g, SpherePoint::real(alpha + 1e-3), 1).unwrap();
        assert!((r.refined.point.finite().unwrap() - C64::new(alpha, 0.0)).norm() < 1e-12);
        assert!((r.refined.multiplier - C64::new(6.0 - 2.0 * 5f64.sqrt(), 0.0)).norm() < 1e-6);

        let n = builtins::newton_cubic();
        let r = closing_refine(&n, SpherePoint::real(10.0), 1).unwrap();
        assert_eq!(r.refined.point, SpherePoint::Infinity);
        assert!((r.refined.multiplier.norm() - 1.5).abs() < 1e-6);
        assert!(r.residual < 1e-10);

        assert!(matches!(closing_refine(&f, SpherePoint::real(0.5), 0), Err(Error::Invalid(_))));
        let csv = closing_csv(&[r]);
        assert!(csv.lines().nth(1).unwrap().starts_with("10,0,1,inf,inf,1,"));
    }

    #[test]
    fn every_near_return_on_the_circle_closes() {
        let f = builtins::z_squared();
        // residual floor is about |multiplier| * 1e-16, so keep L <= 16
        let pts = circle_samples(1024).points;
        let sweep = closing_sweep(&f, &pts, 16, CLOSING_ALPHA).unwrap();
        assert!(sweep.len() > 10);
        for (k, nr, c) in &sweep {
            let c = c.as_ref().unwrap_or_else(|e| panic!("sample {k} {nr:?}: {e}"));
            assert!(c.residual < 1e-10);
            assert_eq!(c.refined.point.finite().map(|z| (z.norm() - 1.0).abs() < 1e-9), Some(true));
        }
    }
}
