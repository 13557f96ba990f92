//! Null geodesics of the Schwarzschild metric.
//!
//! A camera ray is reduced to the plane spanned by the hole center, the ray
//! origin and the ray direction. In that plane the photon orbit obeys the
//! Binet form `u'' + u = 3·M·u²` with `u = 1/r` as a function of the azimuth
//! `φ`. The orbit is integrated window by window, each window advancing `φ`
//! by an amount chosen so that consecutive polyline points sit roughly
//! `epsilon` apart, and every window end is mapped back to world space.

mod integrator;

use std::f64::consts::PI;

use thiserror::Error;

use crate::vec3::Vec3;

pub use integrator::{Integrator, MIN_STEP};

/// Below this perpendicular component a ray is treated as radial.
const RADIAL_THRESHOLD: f64 = 1e-12;

const DPHI_MIN: f64 = 1e-6;
const DPHI_MAX: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeodesicError {
    #[error("invalid black hole: {0}")]
    InvalidHole(&'static str),
    #[error("invalid trace configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("ray has no angular momentum about the hole (impact parameter {impact_parameter:e})")]
    RadialRay { impact_parameter: f64 },
    #[error("adaptive step fell below {MIN_STEP:e} at phi={}, u={}", state.phi, state.u)]
    StepSizeUnderflow { state: GeodesicState },
    #[error("integration produced a non-finite state at phi={phi}")]
    NonFinite { phi: f64 },
    #[error("ray was not deflected to infinity: {0:?}")]
    NotEscaped(TraceOutcome),
}

/// Non-rotating, uncharged black hole in geometric units (G = c = 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlackHole {
    pub mass: f64,
    pub center: Vec3,
}

impl BlackHole {
    pub fn new(mass: f64, center: Vec3) -> Result<Self, GeodesicError> {
        if !(mass >= 0.0) || !mass.is_finite() {
            return Err(GeodesicError::InvalidHole("mass must be finite and >= 0"));
        }
        if !center.is_finite() {
            return Err(GeodesicError::InvalidHole("center must be finite"));
        }
        Ok(Self { mass, center })
    }

    pub fn schwarzschild_radius(&self) -> f64 {
        2.0 * self.mass
    }
}

/// Orthonormal basis of a ray's orbital plane, centred on the hole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitalPlaneBasis {
    /// Unit vector from the hole center towards the ray origin (φ = 0).
    pub e1: Vec3,
    /// Unit vector orthogonal to `e1`, oriented along the initial angular motion.
    pub e2: Vec3,
    pub origin: Vec3,
}

impl OrbitalPlaneBasis {
    /// World position at polar coordinates `(r, φ)`.
    pub fn point(&self, r: f64, phi: f64) -> Vec3 {
        let (s, c) = phi.sin_cos();
        self.origin + r * (c * self.e1 + s * self.e2)
    }

    /// Unit tangent of the orbit at the given state, pointing along the motion.
    pub fn tangent(&self, state: &GeodesicState) -> Vec3 {
        // dx/dφ ∝ (dr/dφ)·e_r + r·e_φ and dr/dφ = -u'/u², so up to a positive
        // factor 1/u² the tangent is -u'·e_r + u·e_φ.
        let (s, c) = state.phi.sin_cos();
        let radial = c * self.e1 + s * self.e2;
        let azimuthal = c * self.e2 - s * self.e1;
        (-state.du_dphi * radial + state.u * azimuthal).normalized()
    }
}

/// Integration state in the orbital plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicState {
    pub phi: f64,
    /// Inverse radius `1/r`.
    pub u: f64,
    pub du_dphi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceConfig {
    /// Target spacing between consecutive polyline points.
    pub epsilon: f64,
    /// Radius beyond which an outbound ray counts as escaped.
    pub escape_radius: f64,
    /// Number of full turns after which a ray is declared stalled.
    pub max_windings: u32,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            escape_radius: 1e4,
            max_windings: 10,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
        }
    }
}

impl TraceConfig {
    pub fn validate(&self) -> Result<(), GeodesicError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.epsilon) {
            return Err(GeodesicError::InvalidConfig("epsilon must be > 0"));
        }
        if !positive(self.escape_radius) {
            return Err(GeodesicError::InvalidConfig("escape_radius must be > 0"));
        }
        if self.max_windings < 1 {
            return Err(GeodesicError::InvalidConfig("max_windings must be >= 1"));
        }
        if !positive(self.rel_tol) {
            return Err(GeodesicError::InvalidConfig("rel_tol must be > 0"));
        }
        if !positive(self.abs_tol) {
            return Err(GeodesicError::InvalidConfig("abs_tol must be > 0"));
        }
        Ok(())
    }

    /// Escape radius used when none is configured explicitly.
    pub fn default_escape_radius(mass: f64, camera_distance: f64) -> f64 {
        (1e4 * mass).max(2.0 * camera_distance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceOutcome {
    /// Crossed the event horizon `r <= 2M`.
    Captured,
    /// Left through the escape radius; `direction` is the unit asymptotic direction.
    Escaped { direction: Vec3 },
    /// Wound around the hole more than `max_windings` times.
    Stalled,
}

impl TraceOutcome {
    pub fn is_escaped(&self) -> bool {
        matches!(self, TraceOutcome::Escaped { .. })
    }
}

/// Piecewise-linear approximation of a light ray.
#[derive(Debug, Clone, PartialEq)]
pub struct RayPolyline {
    pub points: Vec<Vec3>,
    pub outcome: TraceOutcome,
}

/// Everything a trace knows at termination besides its points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSummary {
    pub outcome: TraceOutcome,
    /// Initial and final orbital state; `None` for radial rays, which are
    /// classified without integration.
    pub initial: Option<GeodesicState>,
    pub last: Option<GeodesicState>,
    pub basis: Option<OrbitalPlaneBasis>,
    pub windows: usize,
}

/// Right-hand side of `u'' = 3·M·u² − u` as `(u', u'')`.
#[inline(always)]
pub fn ode_rhs(state: GeodesicState, mass: f64) -> (f64, f64) {
    let u = state.u;
    (state.du_dphi, 3.0 * mass * u * u - u)
}

/// First integral of the orbit equation, `u'² + u² − 2·M·u³`.
pub fn conserved_energy(state: GeodesicState, mass: f64) -> f64 {
    let u = state.u;
    state.du_dphi * state.du_dphi + u * u - 2.0 * mass * u * u * u
}

/// Orbital-plane basis for a ray, or `None` when the ray is radial.
pub fn plane_basis(ray_origin: Vec3, ray_dir: Vec3, hole: &BlackHole) -> Option<OrbitalPlaneBasis> {
    let e1 = (ray_origin - hole.center).normalized();
    let perp = ray_dir - ray_dir.dot(e1) * e1;
    let len = perp.norm();
    if !(len >= RADIAL_THRESHOLD) {
        return None;
    }
    Some(OrbitalPlaneBasis {
        e1,
        e2: perp / len,
        origin: hole.center,
    })
}

/// Initial `(u, du/dφ)` of the straight line through `ray_origin` along `ray_dir`.
pub fn initial_conditions(
    ray_origin: Vec3,
    ray_dir: Vec3,
    hole: &BlackHole,
) -> Result<GeodesicState, GeodesicError> {
    let v = ray_origin - hole.center;
    let r0 = v.norm();
    let b = v.cross(ray_dir).norm();
    if !(b >= RADIAL_THRESHOLD) {
        return Err(GeodesicError::RadialRay { impact_parameter: b });
    }
    Ok(GeodesicState {
        phi: 0.0,
        u: 1.0 / r0,
        du_dphi: -v.dot(ray_dir) / (r0 * b),
    })
}

/// Azimuthal advance for the next polyline segment, `clamp(ε·u, 1e-6, 0.1)`.
pub fn step_dphi(state: &GeodesicState, cfg: &TraceConfig) -> f64 {
    (cfg.epsilon * state.u).clamp(DPHI_MIN, DPHI_MAX)
}

/// Advance `state` by exactly `dphi` with a fresh adaptive integrator.
pub fn integrate_window(
    state: GeodesicState,
    dphi: f64,
    mass: f64,
    cfg: &TraceConfig,
) -> Result<GeodesicState, GeodesicError> {
    Integrator::new(state, mass, cfg.rel_tol, cfg.abs_tol).advance(dphi)
}

/// Trace a ray and collect its polyline.
pub fn trace(
    ray_origin: Vec3,
    ray_dir: Vec3,
    hole: &BlackHole,
    cfg: &TraceConfig,
) -> Result<RayPolyline, GeodesicError> {
    let mut points = Vec::new();
    let summary = trace_with(ray_origin, ray_dir, hole, cfg, |p, _| points.push(p))?;
    Ok(RayPolyline {
        points,
        outcome: summary.outcome,
    })
}

/// Trace a ray without keeping its points.
pub fn classify(
    ray_origin: Vec3,
    ray_dir: Vec3,
    hole: &BlackHole,
    cfg: &TraceConfig,
) -> Result<TraceOutcome, GeodesicError> {
    trace_with(ray_origin, ray_dir, hole, cfg, |_, _| {}).map(|s| s.outcome)
}

/// Trace a ray, handing every polyline point (and, for integrated rays, the
/// orbital state it came from) to `visit`.
pub fn trace_with<F>(
    ray_origin: Vec3,
    ray_dir: Vec3,
    hole: &BlackHole,
    cfg: &TraceConfig,
    mut visit: F,
) -> Result<TraceSummary, GeodesicError>
where
    F: FnMut(Vec3, Option<&GeodesicState>),
{
    let mass = hole.mass;
    let horizon_u = if mass > 0.0 { 1.0 / (2.0 * mass) } else { f64::INFINITY };
    let escape_u = 1.0 / cfg.escape_radius;

    let Some(basis) = plane_basis(ray_origin, ray_dir, hole) else {
        return Ok(radial_trace(ray_origin, ray_dir, hole, cfg, &mut visit));
    };
    let initial = initial_conditions(ray_origin, ray_dir, hole)?;

    visit(ray_origin, Some(&initial));
    if initial.u >= horizon_u {
        return Ok(TraceSummary {
            outcome: TraceOutcome::Captured,
            initial: Some(initial),
            last: Some(initial),
            basis: Some(basis),
            windows: 0,
        });
    }

    let max_phi = 2.0 * PI * f64::from(cfg.max_windings);
    let mut integ = Integrator::new(initial, mass, cfg.rel_tol, cfg.abs_tol);
    let mut state = initial;
    let mut windows = 0usize;

    let outcome = loop {
        let dphi = step_dphi(&state, cfg);
        state = match integ.advance(dphi) {
            Ok(s) => s,
            Err(GeodesicError::StepSizeUnderflow { state: s }) if mass > 0.0 && s.u >= horizon_u => {
                state = s;
                break TraceOutcome::Captured;
            }
            Err(e) => return Err(e),
        };
        windows += 1;

        if !(state.u.is_finite() && state.du_dphi.is_finite()) {
            if mass > 0.0 {
                break TraceOutcome::Captured;
            }
            return Err(GeodesicError::NonFinite { phi: state.phi });
        }
        if state.u > 0.0 {
            visit(basis.point(1.0 / state.u, state.phi), Some(&state));
        }
        if state.u >= horizon_u {
            break TraceOutcome::Captured;
        }
        if state.u <= escape_u && state.du_dphi < 0.0 {
            break TraceOutcome::Escaped {
                direction: basis.tangent(&state),
            };
        }
        if state.phi > max_phi {
            break TraceOutcome::Stalled;
        }
    };

    Ok(TraceSummary {
        outcome,
        initial: Some(initial),
        last: Some(state),
        basis: Some(basis),
        windows,
    })
}

fn radial_trace<F>(
    ray_origin: Vec3,
    ray_dir: Vec3,
    hole: &BlackHole,
    cfg: &TraceConfig,
    visit: &mut F,
) -> TraceSummary
where
    F: FnMut(Vec3, Option<&GeodesicState>),
{
    let v = ray_origin - hole.center;
    let r0 = v.norm();
    let along = v.dot(ray_dir);
    let inward = along < 0.0;

    visit(ray_origin, None);
    let outcome = if inward && hole.mass > 0.0 {
        let travel = (r0 - hole.schwarzschild_radius()).max(0.0);
        if travel > 0.0 {
            visit(ray_origin + travel * ray_dir, None);
        }
        TraceOutcome::Captured
    } else {
        // Distance along the ray to the escape sphere (through the center for an
        // inbound ray in flat space).
        let radius = cfg.escape_radius;
        let disc = (along * along - r0 * r0 + radius * radius).max(0.0);
        let travel = (-along + disc.sqrt()).max(cfg.epsilon);
        visit(ray_origin + travel * ray_dir, None);
        TraceOutcome::Escaped { direction: ray_dir }
    };
    TraceSummary {
        outcome,
        initial: None,
        last: None,
        basis: None,
        windows: 0,
    }
}

/// Bending angle of a ray with impact parameter `b`, launched inbound from
/// radius `cfg.escape_radius` and followed until it escapes again.
///
/// The angle is measured in the orbital plane and is not wrapped, so rays that
/// loop around the hole report angles above `2π`.
pub fn deflection_angle(b: f64, hole: &BlackHole, cfg: &TraceConfig) -> Result<f64, GeodesicError> {
    let r0 = cfg.escape_radius;
    if !(b > 0.0 && b < r0) {
        return Err(GeodesicError::InvalidConfig(
            "impact parameter must lie in (0, escape_radius)",
        ));
    }
    let sin_a = b / r0;
    let origin = hole.center + Vec3::new(r0, 0.0, 0.0);
    let dir = Vec3::new(-(1.0 - sin_a * sin_a).sqrt(), sin_a, 0.0);
    let summary = trace_with(origin, dir, hole, cfg, |_, _| {})?;
    match (summary.outcome, summary.initial, summary.last) {
        (TraceOutcome::Escaped { .. }, Some(first), Some(last)) => {
            Ok(heading(&last) - heading(&first))
        }
        (outcome, ..) => Err(GeodesicError::NotEscaped(outcome)),
    }
}

/// Direction angle of the orbit tangent measured from `e1`, unwrapped through φ.
fn heading(state: &GeodesicState) -> f64 {
    state.phi + state.u.atan2(-state.du_dphi)
}
