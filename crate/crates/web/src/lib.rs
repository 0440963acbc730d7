//! WebAssembly bindings for the browser demo in `www/`.

use wasm_bindgen::prelude::*;

use touchpoint::angle::Angle;
use touchpoint::basins::{classify, colour, Window, UNRESOLVED};
use touchpoint::boettcher::build_chart;
use touchpoint::builtins::{self, Builtin};
use touchpoint::circle_family::rotation_number;
use touchpoint::dynamics::PeriodicPoint;
use touchpoint::rays::{trace_rays, RayOptions};
use touchpoint::{Error, Result, C64};

fn builtin(name: &str) -> Result<Builtin> {
    match name.strip_prefix("ftheta:") {
        Some(a) => {
            let a: f64 = a.parse().map_err(|_| Error::Invalid(format!("bad rho argument {a:?}")))?;
            builtins::f_theta_builtin(C64::from_polar(1.0, std::f64::consts::TAU * a))
        }
        None => builtins::by_name(name).ok_or_else(|| Error::Invalid(format!("unknown map {name:?}"))),
    }
}

fn js(e: Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// RGBA pixels of the basin picture over `[x0,x1] x [y0,y1]`, top row first.
/// Immediate basins are drawn brighter; unresolved points are black.
pub fn basin_pixels(name: &str, res: usize, window: [f64; 4], max_iter: usize) -> Result<Vec<u8>> {
    let b = builtin(name)?;
    let attractors: Vec<PeriodicPoint> =
        b.centres.iter().map(|c| PeriodicPoint::certify(&b.map, c.point, 1)).collect::<Result<_>>()?;
    let [x0, x1, y0, y1] = window;
    let atlas = classify(&b.map, &attractors, Window { x0, x1, y0, y1 }, res, max_iter)?;
    let mut px = Vec::with_capacity(res * res * 4);
    for row in (0..res).rev() {
        for i in 0..res {
            let idx = row * res + i;
            let l = atlas.labels[0][idx];
            if l == UNRESOLVED {
                px.extend([0, 0, 0, 255]);
                continue;
            }
            let immediate = atlas.immediate_masks[l as usize].as_ref().is_some_and(|m| m.cells[0][idx]);
            let [r, g, bl] = colour(l as usize, immediate);
            px.extend([r, g, bl, 255]);
        }
    }
    Ok(px)
}

/// Rays `k/q` of basin `basin`, flattened as `x, y` pairs with `NaN, NaN`
/// between rays and at points beyond `|z| = 1e3`.
pub fn ray_coordinates(name: &str, basin: usize, q: u64) -> Result<Vec<f64>> {
    let b = builtin(name)?;
    let c = b.centres.get(basin).ok_or_else(|| Error::Invalid(format!("no basin {basin}")))?;
    let chart = build_chart(&b.map, c.point, c.local_degree)?;
    let angles: Vec<Angle> = (0..q.max(1)).map(|k| Angle::from_u64(k, q.max(1))).collect::<Result<_>>()?;
    let rays = trace_rays(&b.map, &chart, basin, &angles, &RayOptions::default())?;
    let mut out = Vec::new();
    for ray in rays.into_iter().flatten() {
        let pts = std::iter::once(c.point).chain(ray.polyline).chain(ray.landing_point);
        for p in pts {
            match p.finite().filter(|z| z.norm() < 1e3) {
                Some(z) => out.extend([z.re, z.im]),
                None => out.extend([f64::NAN, f64::NAN]),
            }
        }
        out.extend([f64::NAN, f64::NAN]);
    }
    Ok(out)
}

/// Rotation numbers of the circle family at `samples` equally spaced values
/// of `arg(rho) / 2π`, each from an orbit of `n` steps.
pub fn staircase(samples: usize, n: usize) -> Result<Vec<f64>> {
    (0..samples)
        .map(|k| {
            let a = k as f64 / samples as f64;
            Ok(rotation_number(C64::from_polar(1.0, std::f64::consts::TAU * a), n, 0.0)?.theta_hat)
        })
        .collect()
}

#[wasm_bindgen]
pub fn basin_image(name: &str, res: usize, x0: f64, x1: f64, y0: f64, y1: f64, max_iter: usize) -> std::result::Result<Vec<u8>, JsValue> {
    basin_pixels(name, res, [x0, x1, y0, y1], max_iter).map_err(js)
}

#[wasm_bindgen]
pub fn rays(name: &str, basin: usize, q: u32) -> std::result::Result<Vec<f64>, JsValue> {
    ray_coordinates(name, basin, q as u64).map_err(js)
}

#[wasm_bindgen]
pub fn rotation_staircase(samples: usize, n: usize) -> std::result::Result<Vec<f64>, JsValue> {
    staircase(samples, n).map_err(js)
}
