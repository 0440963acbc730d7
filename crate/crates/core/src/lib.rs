//! Rational-map dynamics on the Riemann sphere: attracting basins, internal
//! rays and chords joining two basins, and the search for eventually periodic
//! points on the common boundary of two immediate basins.

pub mod angle;
pub mod boettcher;
pub mod basins;
pub mod builtins;
pub mod chords;
pub mod circle_family;
pub mod dynamics;
pub mod error;
pub mod expansion;
pub mod map;
pub mod par;
pub mod rays;
pub mod poly;
pub mod sphere;

pub use error::{Error, Result};
pub use map::{MapSpec, RationalMap};
pub use sphere::{spherical_distance, Chart, Rotation, SpherePoint, C64};
