//! Flat `key=value` text format shared by `--config` files and the scene
//! payload of network jobs. One entry per line, `#` starts a comment.

use std::collections::BTreeMap;
use std::str::FromStr;

use thiserror::Error;

use crate::camera::{Camera, SampleSpec};
use crate::environment::ImageBuffer;
use crate::geodesic::{BlackHole, TraceConfig};
use crate::render::{SceneConfig, SceneError};
use crate::vec3::Vec3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected key=value")]
    Syntax { line: usize },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("invalid value for {key}: '{value}' ({reason})")]
    InvalidValue { key: String, value: String, reason: String },
}

/// Parse `key=value` lines into a map. Later duplicates win.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1 });
        }
        map.insert(key.replace('-', "_"), value.trim().to_string());
    }
    Ok(map)
}

pub fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

pub fn parse_vec3(key: &str, value: &str) -> Result<Vec3, ConfigError> {
    let parts: Vec<&str> = value.split(',').collect();
    if parts.len() != 3 {
        return Err(ConfigError::InvalidValue {
            key: key.to_string(),
            value: value.to_string(),
            reason: "expected x,y,z".into(),
        });
    }
    Ok(Vec3::new(
        parse_value(key, parts[0])?,
        parse_value(key, parts[1])?,
        parse_value(key, parts[2])?,
    ))
}

/// Plain scene parameters before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneParams {
    pub mass: f64,
    pub center: Vec3,
    pub camera: Vec3,
    pub look_at: Vec3,
    /// Vertical field of view in radians.
    pub fov: f64,
    pub width: u32,
    pub height: u32,
    pub spp: u32,
    pub seed: u64,
    pub epsilon: f64,
    /// `None` selects `max(1e4·M, 2·|camera − center|)`.
    pub escape_radius: Option<f64>,
    pub max_windings: u32,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        let trace = TraceConfig::default();
        Self {
            mass: 1.0,
            center: Vec3::ZERO,
            camera: Vec3::new(0.0, 0.0, 30.0),
            look_at: Vec3::ZERO,
            fov: 60f64.to_radians(),
            width: 256,
            height: 256,
            spp: 1,
            seed: 0,
            epsilon: trace.epsilon,
            escape_radius: None,
            max_windings: trace.max_windings,
            rel_tol: trace.rel_tol,
            abs_tol: trace.abs_tol,
        }
    }
}

/// Keys understood by [`SceneParams::apply`].
pub const SCENE_KEYS: &[&str] = &[
    "mass",
    "center",
    "camera",
    "look_at",
    "fov",
    "fov_rad",
    "width",
    "height",
    "spp",
    "seed",
    "epsilon",
    "escape_radius",
    "max_windings",
    "rel_tol",
    "abs_tol",
];

impl SceneParams {
    /// Overlay one `key=value` pair. `fov` is in degrees, `fov_rad` in radians.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "mass" => self.mass = parse_value(key, value)?,
            "center" => self.center = parse_vec3(key, value)?,
            "camera" => self.camera = parse_vec3(key, value)?,
            "look_at" => self.look_at = parse_vec3(key, value)?,
            "fov" => self.fov = parse_value::<f64>(key, value)?.to_radians(),
            "fov_rad" => self.fov = parse_value(key, value)?,
            "width" => self.width = parse_value(key, value)?,
            "height" => self.height = parse_value(key, value)?,
            "spp" => self.spp = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "epsilon" => self.epsilon = parse_value(key, value)?,
            "escape_radius" => {
                self.escape_radius = if value.trim() == "auto" {
                    None
                } else {
                    Some(parse_value(key, value)?)
                }
            }
            "max_windings" => self.max_windings = parse_value(key, value)?,
            "rel_tol" => self.rel_tol = parse_value(key, value)?,
            "abs_tol" => self.abs_tol = parse_value(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Parse scene text on top of the defaults.
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut params = Self::default();
        for (k, v) in parse_kv(text)? {
            params.apply(&k, &v)?;
        }
        Ok(params)
    }

    /// Serialize with every value written so that parsing reproduces it bit for bit.
    pub fn to_text(&self) -> String {
        let escape = match self.escape_radius {
            Some(r) => r.to_string(),
            None => "auto".to_string(),
        };
        format!(
            "mass={}\ncenter={}\ncamera={}\nlook_at={}\nfov_rad={}\nwidth={}\nheight={}\nspp={}\nseed={}\n\
             epsilon={}\nescape_radius={}\nmax_windings={}\nrel_tol={}\nabs_tol={}\n",
            self.mass,
            self.center,
            self.camera,
            self.look_at,
            self.fov,
            self.width,
            self.height,
            self.spp,
            self.seed,
            self.epsilon,
            escape,
            self.max_windings,
            self.rel_tol,
            self.abs_tol,
        )
    }

    pub fn build(&self, background: std::sync::Arc<ImageBuffer>) -> Result<SceneConfig, SceneError> {
        let hole = BlackHole::new(self.mass, self.center)?;
        let camera = Camera::new(self.camera, self.look_at, self.fov, self.width, self.height)?;
        let samples = SampleSpec::new(self.spp, self.seed)?;
        let escape_radius = self
            .escape_radius
            .unwrap_or_else(|| TraceConfig::default_escape_radius(self.mass, (self.camera - self.center).norm()));
        let trace = TraceConfig {
            epsilon: self.epsilon,
            escape_radius,
            max_windings: self.max_windings,
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
        };
        SceneConfig::new(hole, camera, samples, trace, background)
    }
}

impl From<&SceneConfig> for SceneParams {
    fn from(scene: &SceneConfig) -> Self {
        Self {
            mass: scene.hole.mass,
            center: scene.hole.center,
            camera: scene.camera.position(),
            look_at: scene.camera.look_at(),
            fov: scene.camera.vertical_fov(),
            width: scene.camera.width(),
            height: scene.camera.height(),
            spp: scene.samples.spp,
            seed: scene.samples.seed,
            epsilon: scene.trace.epsilon,
            escape_radius: Some(scene.trace.escape_radius),
            max_windings: scene.trace.max_windings,
            rel_tol: scene.trace.rel_tol,
            abs_tol: scene.trace.abs_tol,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn comments_blank_lines_and_whitespace() {
        let map = parse_kv("# header\n\nmass = 2 # inline\n  width=64\n").unwrap();
        assert_eq!(map["mass"], "2");
        assert_eq!(map["width"], "64");
        assert_eq!(parse_kv("mass\n"), Err(ConfigError::Syntax { line: 1 }));
        assert_eq!(parse_kv("=3\n"), Err(ConfigError::Syntax { line: 1 }));
    }

    #[test]
    fn dashes_normalise_to_underscores() {
        let p = SceneParams::from_text("escape-radius=500\nlook-at=1,2,3").unwrap();
        assert_eq!(p.escape_radius, Some(500.0));
        assert_eq!(p.look_at, Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn fov_degrees_and_radians() {
        assert_eq!(SceneParams::from_text("fov=90").unwrap().fov, 90f64.to_radians());
        assert_eq!(SceneParams::from_text("fov_rad=0.5").unwrap().fov, 0.5);
    }

    #[test]
    fn bad_entries_name_the_key() {
        let err = SceneParams::from_text("mass=abc").unwrap_err();
        assert!(err.to_string().contains("mass"), "{err}");
        assert!(matches!(SceneParams::from_text("camera=1,2"), Err(ConfigError::InvalidValue { .. })));
        assert_eq!(SceneParams::from_text("colour=red"), Err(ConfigError::UnknownKey("colour".into())));
    }

    proptest! {
        #[test]
        fn text_round_trip(
            mass in 0.0f64..10.0, cx in -5.0f64..5.0, fov in 0.01f64..3.0,
            eps in 1e-4f64..10.0, esc in proptest::option::of(1.0f64..1e7),
            w in 1u32..5000, h in 1u32..5000, spp in 1u32..64, seed: u64,
            rel in 1e-14f64..1e-3, abs in 1e-16f64..1e-3, wind in 1u32..100,
        ) {
            let p = SceneParams {
                mass, center: Vec3::new(cx, -cx / 3.0, 0.1), camera: Vec3::new(1.0 / 3.0, 2.0, 40.0),
                look_at: Vec3::new(cx, 0.0, 0.0), fov, width: w, height: h, spp, seed, epsilon: eps,
                escape_radius: esc, max_windings: wind, rel_tol: rel, abs_tol: abs,
            };
            prop_assert_eq!(SceneParams::from_text(&p.to_text()).unwrap(), p);
        }
    }
}
