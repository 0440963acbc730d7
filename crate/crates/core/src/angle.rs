//! Exact rational angles in `[0, 1)` and their dynamics under `t ↦ d t mod 1`.

use crate::error::{Error, Result};
use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

/// A reduced fraction `num/den` with `0 <= num < den`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Angle {
    num: BigUint,
    den: BigUint,
}

impl Angle {
    pub fn zero() -> Self {
        Angle { num: BigUint::zero(), den: BigUint::one() }
    }

    /// `p/q mod 1`, reduced.
    pub fn new(p: impl Into<BigUint>, q: impl Into<BigUint>) -> Result<Self> {
        let (p, q) = (p.into(), q.into());
        if q.is_zero() {
            return Err(Error::Invalid("angle denominator is zero".into()));
        }
        Ok(Self::reduced(p % &q, q))
    }

    pub fn from_u64(p: u64, q: u64) -> Result<Self> {
        Self::new(p, q)
    }

    fn reduced(p: BigUint, q: BigUint) -> Self {
        let g = p.gcd(&q);
        if g.is_one() || g.is_zero() {
            let den = if p.is_zero() { BigUint::one() } else { q };
            Angle { num: p, den }
        } else {
            Angle { num: p / &g, den: q / g }
        }
    }

    pub fn numer(&self) -> &BigUint {
        &self.num
    }

    pub fn denom(&self) -> &BigUint {
        &self.den
    }

    pub fn to_f64(&self) -> f64 {
        match (self.num.to_f64(), self.den.to_f64()) {
            (Some(n), Some(d)) if d.is_finite() => n / d,
            _ => {
                // scale both down to keep 64 significant bits
                let shift = self.den.bits().saturating_sub(64);
                let n = (&self.num >> shift).to_f64().unwrap_or(0.0);
                let d = (&self.den >> shift).to_f64().unwrap_or(1.0);
                n / d
            }
        }
    }

    /// `d t mod 1`.
    pub fn step(&self, d: u64) -> Angle {
        Self::reduced((&self.num * d) % &self.den, self.den.clone())
    }

    /// `d^n t mod 1`.
    pub fn step_n(&self, d: u64, n: u32) -> Angle {
        let dn = BigUint::from(d).pow(n);
        Self::reduced((&self.num * dn) % &self.den, self.den.clone())
    }

    /// `-t mod 1`.
    pub fn neg(&self) -> Angle {
        if self.num.is_zero() {
            self.clone()
        } else {
            Angle { num: &self.den - &self.num, den: self.den.clone() }
        }
    }

    /// `(t + j) / d` for `j = 0..d`, in increasing order.
    pub fn preimages(&self, d: u64) -> Vec<Angle> {
        let den = &self.den * d;
        (0..d).map(|j| Self::reduced(&self.num + &self.den * j, den.clone())).collect()
    }

    /// Minimal `(preperiod, period)` with `d^(l+q) t = d^l t mod 1`.
    pub fn eventual_period(&self, d: u64) -> (usize, usize) {
        let mut seen: HashMap<Angle, usize> = HashMap::new();
        let mut t = self.clone();
        let mut k = 0;
        loop {
            if let Some(&first) = seen.get(&t) {
                return (first, k - first);
            }
            seen.insert(t.clone(), k);
            t = t.step(d);
            k += 1;
        }
    }

    /// True when `t` is periodic (preperiod zero) under multiplication by `d`.
    pub fn is_periodic(&self, d: u64) -> bool {
        self.eventual_period(d).0 == 0
    }
}

impl Ord for Angle {
    fn cmp(&self, other: &Self) -> Ordering {
        (&self.num * &other.den).cmp(&(&other.num * &self.den))
    }
}

impl PartialOrd for Angle {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Angle {
    type Err = Error;

    /// Accepts `p/q` or a bare integer (taken mod 1).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("bad angle {s:?}, expected p/q"));
        let s = s.trim();
        let (p, q) = match s.split_once('/') {
            Some((p, q)) => (p.trim(), q.trim()),
            None => (s, "1"),
        };
        let p = BigUint::from_str(p).map_err(|_| bad())?;
        let q = BigUint::from_str(q).map_err(|_| bad())?;
        Angle::new(p, q)
    }
}

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All angles `k/(d^q - 1)` for `q = 1..=q_max`, deduplicated and sorted.
pub fn periodic_angles(d: u64, q_max: u32) -> Vec<Angle> {
    let mut out: Vec<Angle> = Vec::new();
    for q in 1..=q_max {
        let den = BigUint::from(d).pow(q) - 1u32;
        let n = den.to_u64().expect("periodic angle grid too large to enumerate");
        for k in 0..n {
            out.push(Angle::reduced(BigUint::from(k), den.clone()));
        }
    }
    out.sort();
    out.dedup();
    out
}

/// The grid `k/n`, `k = 0..n`.
pub fn uniform_angles(n: u64) -> Vec<Angle> {
    (0..n).map(|k| Angle::reduced(BigUint::from(k), BigUint::from(n))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn a(p: u64, q: u64) -> Angle {
        Angle::from_u64(p, q).unwrap()
    }

    fn multiplicative_order(d: u64, q: u64) -> usize {
        let mut x = d % q;
        let mut k = 1;
        while x != 1 % q {
            x = x * d % q;
            k += 1;
        }
        k
    }

    #[test]
    fn eventual_period_examples() {
        assert_eq!(a(0, 1).eventual_period(2), (0, 1));
        assert_eq!(a(1, 3).eventual_period(2), (0, 2));
        assert_eq!(a(1, 6).eventual_period(2), (1, 2));
        assert_eq!(a(1, 5).eventual_period(2), (0, 4));
        assert_eq!(a(1, 4).eventual_period(2), (2, 1));
    }

    #[test]
    fn reduction_and_parsing() {
        assert_eq!(a(2, 4), a(1, 2));
        assert_eq!(a(5, 4), a(1, 4));
        assert_eq!(a(0, 7), Angle::zero());
        assert_eq!("3/6".parse::<Angle>().unwrap(), a(1, 2));
        assert_eq!("0".parse::<Angle>().unwrap().to_string(), "0/1");
        assert!("1/0".parse::<Angle>().is_err());
        assert!("x/3".parse::<Angle>().is_err());
        let big: Angle = "1/340282366920938463463374607431768211455".parse().unwrap();
        assert!((big.to_f64() - 1.0 / 340282366920938463463374607431768211455.0).abs() < 1e-50);
        assert_eq!(serde_json::to_string(&a(2, 7)).unwrap(), "\"2/7\"");
        assert_eq!(serde_json::from_str::<Angle>("\"4/14\"").unwrap(), a(2, 7));
    }

    #[test]
    fn step_neg_preimages() {
        assert_eq!(a(1, 3).step(2), a(2, 3));
        assert_eq!(a(2, 3).step(2), a(1, 3));
        assert_eq!(a(1, 7).step_n(2, 3), a(1, 7));
        assert_eq!(a(1, 3).neg(), a(2, 3));
        assert_eq!(Angle::zero().neg(), Angle::zero());
        assert_eq!(a(1, 3).preimages(2), vec![a(1, 6), a(2, 3)]);
        assert_eq!(Angle::zero().preimages(3), vec![a(0, 1), a(1, 3), a(2, 3)]);
    }

    #[test]
    fn periodic_grid_for_doubling() {
        let g = periodic_angles(2, 3);
        // {0} ∪ {1/3, 2/3} ∪ {k/7}
        assert_eq!(g.len(), 9);
        assert!(g.iter().all(|t| t.is_periodic(2)));
        assert_eq!(uniform_angles(4)[2], a(1, 2));
    }

    #[test]
    fn order_oracle_on_odd_denominators() {
        for q in (3..=63u64).step_by(2) {
            for p in 1..q {
                if num_integer::gcd(p, q) != 1 {
                    continue;
                }
                assert_eq!(a(p, q).eventual_period(2), (0, multiplicative_order(2, q)), "{p}/{q}");
            }
        }
    }

    proptest! {
        #[test]
        fn every_preimage_steps_back(p in 0u64..1000, q in 1u64..1000, d in 2u64..6) {
            let t = a(p, q);
            for s in t.preimages(d) {
                prop_assert_eq!(s.step(d), t.clone());
            }
        }

        #[test]
        fn float_approximation_is_close(p in 0u64..100000, q in 1u64..100000) {
            let t = a(p, q);
            prop_assert!((t.to_f64() - (p % q) as f64 / q as f64).abs() < 1e-15);
        }
    }
}
