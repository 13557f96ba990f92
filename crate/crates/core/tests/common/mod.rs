//! Reference computations shared by the integration tests. Nothing here calls
//! into the integrator under test.
#![allow(dead_code)]

use std::f64::consts::PI;

use bhrt::environment::ImageBuffer;
use bhrt::Vec3;

/// Inbound ray from `(r0, 0, 0)` whose straight-line extension passes the
/// origin at distance `b`.
pub fn inbound_ray(b: f64, r0: f64) -> (Vec3, Vec3) {
    let s = b / r0;
    (Vec3::new(r0, 0.0, 0.0), Vec3::new(-(1.0 - s * s).sqrt(), s, 0.0))
}

/// Classical fixed-step RK4 for `u'' = 3·M·u² − u` from `phi0` to `phi1`.
pub fn rk4_reference(u: f64, du: f64, mass: f64, span: f64, steps: usize) -> (f64, f64) {
    let f = |y: [f64; 2]| [y[1], 3.0 * mass * y[0] * y[0] - y[0]];
    let h = span / steps as f64;
    let mut y = [u, du];
    for _ in 0..steps {
        let k1 = f(y);
        let k2 = f([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = f([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1]]);
        for i in 0..2 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    (y[0], y[1])
}

/// Exact bending angle from infinity to infinity,
/// `2·∫₀^{u_p} du / sqrt(1/b² − u² + 2·M·u³) − π`, by composite Simpson after
/// the substitution `u = u_p·(1 − t²)` that removes the turning-point
/// singularity.
pub fn deflection_quadrature(b: f64, mass: f64) -> f64 {
    let g = |u: f64| 1.0 / (b * b) - u * u + 2.0 * mass * u * u * u;
    let dg = |u: f64| -2.0 * u + 6.0 * mass * u * u;

    // Periapsis: the smallest positive root of g.
    let (mut lo, mut hi) = (0.0, if mass > 0.0 { 1.0 / (3.0 * mass) } else { 2.0 / b });
    assert!(g(hi) < 0.0, "ray is captured");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let up = 0.5 * (lo + hi);

    let integrand = |t: f64| {
        if t == 0.0 {
            2.0 * up / (-dg(up) * up).sqrt()
        } else {
            let u = up * (1.0 - t * t);
            2.0 * up * t / g(u).max(0.0).sqrt()
        }
    };
    let n = 200_000;
    let h = 1.0 / n as f64;
    let mut sum = integrand(0.0) + integrand(1.0);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * integrand(i as f64 * h);
    }
    2.0 * sum * h / 3.0 - PI
}

/// Rodrigues rotation of `v` about unit `axis` by `angle`.
pub fn rotate(v: Vec3, axis: Vec3, angle: f64) -> Vec3 {
    let (s, c) = angle.sin_cos();
    v * c + axis.cross(v) * s + axis * (axis.dot(v) * (1.0 - c))
}

/// Smooth sky where every channel varies with direction and no pixel is
/// black, so captured pixels stand out.
pub fn gradient_sky(w: u32, h: u32) -> ImageBuffer {
    ImageBuffer::from_fn(w, h, |x, y| {
        let s = (x as f64 + 0.5) / w as f64;
        let t = (y as f64 + 0.5) / h as f64;
        [
            (40.0 + 200.0 * (0.5 + 0.5 * (2.0 * PI * s).sin())) as u8,
            (40.0 + 200.0 * t) as u8,
            (40.0 + 200.0 * (0.5 + 0.5 * (2.0 * PI * s).cos() * (PI * t).sin())) as u8,
        ]
    })
}

/// Equirectangular sky whose color depends only on the angle between the
/// pixel direction and `axis`.
pub fn axial_sky(w: u32, h: u32, axis: Vec3) -> ImageBuffer {
    ImageBuffer::from_fn(w, h, |x, y| {
        let lon = 2.0 * PI * (x as f64 + 0.5) / w as f64 - PI;
        let lat = PI / 2.0 - PI * (y as f64 + 0.5) / h as f64;
        let dir = Vec3::new(lat.cos() * lon.cos(), lat.sin(), lat.cos() * lon.sin());
        let theta = dir.dot(axis).clamp(-1.0, 1.0).acos();
        [
            (30.0 + 100.0 * (1.0 + (3.0 * theta).cos())).round() as u8,
            (30.0 + 200.0 * theta / PI).round() as u8,
            (30.0 + 100.0 * (1.0 + (5.0 * theta).sin())).round() as u8,
        ]
    })
}

/// Pinhole ray through the center of pixel `(px, py)` with world up `+y`.
pub fn pinhole_dir(eye: Vec3, target: Vec3, vfov: f64, w: u32, h: u32, px: u32, py: u32) -> Vec3 {
    let f = (target - eye).normalized();
    let r = f.cross(Vec3::new(0.0, 1.0, 0.0)).normalized();
    let u = r.cross(f);
    let ty = (vfov / 2.0).tan();
    let tx = ty * w as f64 / h as f64;
    let sx = (2.0 * (px as f64 + 0.5) / w as f64 - 1.0) * tx;
    let sy = (1.0 - 2.0 * (py as f64 + 0.5) / h as f64) * ty;
    (f + r * sx + u * sy).normalized()
}

/// Bilinear equirectangular lookup: longitude `atan2(z, x)` across, polar
/// angle from `+y` down; texel centers at half-integers.
pub fn bilinear(img: &ImageBuffer, dir: Vec3) -> [f64; 3] {
    let (w, h) = (img.width() as f64, img.height() as f64);
    let x = (dir.z.atan2(dir.x) + PI) / (2.0 * PI) * w - 0.5;
    let y = dir.y.clamp(-1.0, 1.0).acos() / PI * h - 0.5;
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let col = |i: f64| (i.rem_euclid(w)) as u32;
    let row = |j: f64| j.clamp(0.0, h - 1.0) as u32;
    let mut out = [0.0; 3];
    for (dx, dy, wgt) in [(0.0, 0.0, (1.0 - fx) * (1.0 - fy)), (1.0, 0.0, fx * (1.0 - fy)), (0.0, 1.0, (1.0 - fx) * fy), (1.0, 1.0, fx * fy)] {
        let p = img.pixel(col(x0 + dx), row(y0 + dy));
        for c in 0..3 {
            out[c] += wgt * p[c] as f64 / 255.0;
        }
    }
    out
}

/// Largest per-channel difference between two equally sized byte buffers.
pub fn max_channel_diff(a: &[u8], b: &[u8]) -> u8 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).max().unwrap_or(0)
}
