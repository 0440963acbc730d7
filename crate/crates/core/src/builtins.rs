//! Named test maps with exact coefficients.

use crate::error::{Error, Result};
use crate::map::RationalMap;
use crate::sphere::{SpherePoint, C64};

/// `z^2`.
pub fn z_squared() -> RationalMap {
    RationalMap::from_real(&[0.0, 0.0, 1.0], &[1.0]).expect("z^2 is valid")
}

/// `z^d`.
pub fn power(d: usize) -> RationalMap {
    let mut num = vec![0.0; d + 1];
    num[d] = 1.0;
    RationalMap::from_real(&num, &[1.0]).expect("z^d is valid for d >= 2")
}

/// `z^2 - 1`.
pub fn basilica() -> RationalMap {
    RationalMap::from_real(&[-1.0, 0.0, 1.0], &[1.0]).expect("z^2-1 is valid")
}

/// `(z^2 - 1)∘(z^2 - 1) = z^4 - 2z^2`, which fixes `0` and `-1`.
pub fn basilica2() -> RationalMap {
    RationalMap::from_real(&[0.0, 0.0, -2.0, 0.0, 1.0], &[1.0]).expect("basilica square is valid")
}

/// Newton's method for `z^3 - 1`: `(2z^3 + 1) / (3z^2)`.
pub fn newton_cubic() -> RationalMap {
    RationalMap::from_real(&[1.0, 0.0, 0.0, 2.0], &[0.0, 0.0, 3.0]).expect("newton map is valid")
}

/// `rho z^2 (z - 3) / (1 - 3z)` with `|rho| = 1`.
pub fn f_theta(rho: C64) -> Result<RationalMap> {
    if (rho.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::NotUnitModulus(rho.norm()));
    }
    let z = C64::new(0.0, 0.0);
    RationalMap::new(vec![z, z, -3.0 * rho, rho], vec![C64::new(1.0, 0.0), C64::new(-3.0, 0.0)])
}

/// A superattracting fixed point used as a basin centre.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasinCentre {
    pub point: SpherePoint,
    pub local_degree: usize,
}

/// Named map with its two distinguished basin centres and any extra
/// attractors needed to resolve a full atlas.
#[derive(Clone, Debug)]
pub struct Builtin {
    pub name: String,
    pub map: RationalMap,
    pub centres: Vec<BasinCentre>,
}

pub const NAMES: [&str; 4] = ["z2", "basilica2", "newton-cubic", "ftheta:<theta>"];

/// Resolve a builtin by name. `ftheta:<theta>` needs `rho`, supplied by the
/// caller after solving for the rotation number.
pub fn by_name(name: &str) -> Option<Builtin> {
    let centre = |p: SpherePoint, d: usize| BasinCentre { point: p, local_degree: d };
    let (map, centres) = match name {
        "z2" => (z_squared(), vec![centre(SpherePoint::real(0.0), 2), centre(SpherePoint::Infinity, 2)]),
        "basilica2" => (
            basilica2(),
            vec![
                centre(SpherePoint::real(0.0), 2),
                centre(SpherePoint::real(-1.0), 2),
                centre(SpherePoint::Infinity, 4),
            ],
        ),
        "newton-cubic" => (
            newton_cubic(),
            (0..3).map(|k| centre(SpherePoint::from_polar(1.0, k as f64 / 3.0), 2)).collect(),
        ),
        _ => return None,
    };
    Some(Builtin { name: name.to_string(), map, centres })
}

/// `ftheta` builtin for a given `rho`.
pub fn f_theta_builtin(rho: C64) -> Result<Builtin> {
    Ok(Builtin {
        name: "ftheta".into(),
        map: f_theta(rho)?,
        centres: vec![
            BasinCentre { point: SpherePoint::real(0.0), local_degree: 2 },
            BasinCentre { point: SpherePoint::Infinity, local_degree: 2 },
        ],
    })
}
