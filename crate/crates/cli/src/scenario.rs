//! Resolving command-line flags into a map, its basin centres and tolerances.

use std::path::PathBuf;

use serde::Serialize;
use touchpoint::basins::Window;
use touchpoint::builtins::{self, BasinCentre};
use touchpoint::circle_family::solve_rho;
use touchpoint::dynamics::{periodic_points, PeriodicPoint};
use touchpoint::{Error, MapSpec, RationalMap, Result};

/// Rotation-number tolerance used when a `ftheta:<theta>` builtin is resolved.
pub const FTHETA_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct Tolerances {
    pub step_tol: f64,
    pub junction_tol: f64,
    pub boundary_tol: f64,
    pub closing_alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MapSource {
    Builtin(String),
    File(PathBuf),
}

#[derive(Clone, Debug, Serialize)]
pub struct Scenario {
    pub command: String,
    pub map: Option<MapSource>,
    pub window: [f64; 4],
    pub resolution: usize,
    pub max_iter: usize,
    pub basins: [usize; 2],
    pub tolerances: Tolerances,
    pub out: PathBuf,
    pub threads: Option<usize>,
    /// Subcommand parameters.
    pub params: serde_json::Value,
}

/// A map together with its superattracting centres, listed first, and any
/// further attracting cycles needed for a full basin atlas.
pub struct Resolved {
    pub map: RationalMap,
    pub centres: Vec<BasinCentre>,
    pub attractors: Vec<PeriodicPoint>,
}

pub fn parse_theta(s: &str) -> Result<f64> {
    let t = match s {
        "golden" => (5f64.sqrt() - 1.0) / 2.0,
        _ => s.parse().map_err(|_| Error::Invalid(format!("bad theta {s:?}")))?,
    };
    if !(0.0..1.0).contains(&t) {
        return Err(Error::Invalid(format!("theta {t} outside [0, 1)")));
    }
    Ok(t)
}

/// Check a builtin name without building anything.
pub fn validate_builtin(name: &str) -> Result<()> {
    if let Some(theta) = name.strip_prefix("ftheta:") {
        parse_theta(theta).map(|_| ())
    } else if builtins::by_name(name).is_some() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("unknown builtin {name:?}; known: {}", builtins::NAMES.join(", "))))
    }
}

impl Scenario {
    pub fn window(&self) -> Window {
        let [x0, x1, y0, y1] = self.window;
        Window { x0, x1, y0, y1 }
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        for (name, v) in [
            ("step_tol", t.step_tol),
            ("junction_tol", t.junction_tol),
            ("boundary_tol", t.boundary_tol),
            ("closing_alpha", t.closing_alpha),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.resolution < 3 {
            return Err(Error::Invalid("resolution must be at least 3".into()));
        }
        if self.basins[0] == self.basins[1] {
            return Err(Error::Invalid("the two basins must differ".into()));
        }
        match &self.map {
            Some(MapSource::Builtin(name)) => validate_builtin(name),
            Some(MapSource::File(path)) => read_map_file(path).map(|_| ()),
            None => Ok(()),
        }
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let r = match &self.map {
            None => return Err(Error::Invalid("this subcommand needs --builtin or --map".into())),
            Some(MapSource::Builtin(name)) => {
                if let Some(theta) = name.strip_prefix("ftheta:") {
                    let sol = solve_rho(parse_theta(theta)?, FTHETA_TOL)?;
                    let b = builtins::f_theta_builtin(sol.rho)?;
                    with_attractors(b.map, b.centres)?
                } else {
                    let b = builtins::by_name(name).ok_or_else(|| Error::Invalid(format!("unknown builtin {name:?}")))?;
                    with_attractors(b.map, b.centres)?
                }
            }
            Some(MapSource::File(path)) => {
                let map = read_map_file(path)?;
                let centres = superattracting_fixed_points(&map)?;
                with_attractors(map, centres)?
            }
        };
        for &b in &self.basins {
            if b >= r.centres.len() {
                return Err(Error::Invalid(format!("basin {b} out of range: the map has {} centres", r.centres.len())));
            }
        }
        Ok(r)
    }
}

pub fn read_map_file(path: &PathBuf) -> Result<RationalMap> {
    let text = std::fs::read_to_string(path)?;
    let spec: MapSpec = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidMap(format!("{}: {e}", path.display())))?;
    RationalMap::from_spec(&spec)
}

/// Fixed points with vanishing multiplier, with their local degree.
fn superattracting_fixed_points(map: &RationalMap) -> Result<Vec<BasinCentre>> {
    let mut out = Vec::new();
    for p in periodic_points(map, 1)?.points {
        if p.multiplier.norm() > 1e-9 {
            continue;
        }
        let g = map.local_series(p.point, map.degree() + 2);
        let scale = g.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
        if let Some(d) = (2..g.len()).find(|&k| g[k].norm() > 1e-10 * scale) {
            out.push(BasinCentre { point: p.point, local_degree: d });
        }
    }
    if out.len() < 2 {
        return Err(Error::Hypothesis(format!("the map has {} superattracting fixed points; two are needed", out.len())));
    }
    Ok(out)
}

/// Centres first, then the remaining attracting cycles of period at most 2.
fn with_attractors(map: RationalMap, centres: Vec<BasinCentre>) -> Result<Resolved> {
    let mut attractors: Vec<PeriodicPoint> =
        centres.iter().map(|c| PeriodicPoint::certify(&map, c.point, 1)).collect::<Result<_>>()?;
    for n in 1..=2 {
        for p in periodic_points(&map, n)?.points {
            if p.period != n || !p.class.is_attracting() {
                continue;
            }
            let known = attractors.iter().any(|a| {
                a.cycle(&map).iter().any(|&q| touchpoint::spherical_distance(q, p.point) < 1e-8)
            });
            if !known {
                attractors.push(p);
            }
        }
    }
    Ok(Resolved { map, centres, attractors })
}
