//! Schwarzschild black-hole ray tracer.
//!
//! Camera rays are bent by integrating the photon orbit equation in each
//! ray's orbital plane ([`geodesic`]), escaped rays look up an equirectangular
//! sky ([`environment`]), and images are rendered by scanline bands either on
//! a thread pool ([`render`]) or across worker processes ([`netrender`]).

pub mod bench;
pub mod camera;
pub mod cli;
pub mod config;
pub mod environment;
pub mod geodesic;
pub mod netrender;
pub mod render;
pub mod vec3;

pub use vec3::Vec3;
