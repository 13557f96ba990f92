//! RGB image buffers, binary PPM (P6) codec and equirectangular sky lookup.

use std::f64::consts::PI;

use thiserror::Error;

use crate::vec3::Vec3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PpmError {
    #[error("malformed PPM header: {0}")]
    MalformedHeader(String),
    #[error("unsupported PPM maxval {0} (only 255 is supported)")]
    UnsupportedMaxval(u32),
    #[error("truncated PPM pixel data: expected {expected} bytes, found {found}")]
    TruncatedPixelData { expected: usize, found: usize },
}

/// Row-major 8-bit RGB image; row 0 is the top.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for ImageBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImageBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl ImageBuffer {
    /// Black image.
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0; width as usize * height as usize * 3],
        }
    }

    /// Wrap raw RGB bytes. Returns `None` unless `data.len() == width·height·3`.
    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Option<Self> {
        (data.len() == width as usize * height as usize * 3).then_some(Self { width, height, data })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn as_bytes_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.data
    }

    pub fn row_bytes(&self) -> usize {
        self.width as usize * 3
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

/// Serialize as binary PPM: `P6\n{w} {h}\n255\n` followed by the raw pixels.
pub fn save_ppm(img: &ImageBuffer) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", img.width, img.height);
    let mut out = Vec::with_capacity(header.len() + img.data.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&img.data);
    out
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&c) = self.bytes.get(self.pos) {
            if c == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, PpmError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PpmError::MalformedHeader(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PpmError::MalformedHeader(format!("{what} out of range")))
    }
}

/// Parse a binary PPM (P6, maxval 255). Header comments are allowed.
pub fn load_ppm(bytes: &[u8]) -> Result<ImageBuffer, PpmError> {
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(PpmError::MalformedHeader("missing P6 magic".into()));
    }
    let mut rd = HeaderReader { bytes, pos: 2 };
    if !rd.bytes.get(rd.pos).is_some_and(|c| c.is_ascii_whitespace() || *c == b'#') {
        return Err(PpmError::MalformedHeader("missing P6 magic".into()));
    }
    let width = rd.number("width")?;
    let height = rd.number("height")?;
    let maxval = rd.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PpmError::MalformedHeader(format!("empty image {width}x{height}")));
    }
    if maxval != 255 {
        return Err(PpmError::UnsupportedMaxval(maxval));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(rd.pos) {
        Some(c) if c.is_ascii_whitespace() => rd.pos += 1,
        _ => return Err(PpmError::MalformedHeader("missing whitespace after maxval".into())),
    }
    let expected = (width as usize)
        .checked_mul(height as usize)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| PpmError::MalformedHeader("dimensions overflow".into()))?;
    let raster = &bytes[rd.pos..];
    if raster.len() < expected {
        return Err(PpmError::TruncatedPixelData {
            expected,
            found: raster.len(),
        });
    }
    Ok(ImageBuffer {
        width,
        height,
        data: raster[..expected].to_vec(),
    })
}

/// Equirectangular texture coordinates `(u, v)` in `[0, 1]` for a unit direction.
pub fn direction_to_uv(dir: Vec3) -> (f64, f64) {
    let u = (dir.z.atan2(dir.x) + PI) / (2.0 * PI);
    let v = (PI / 2.0 - dir.y.clamp(-1.0, 1.0).asin()) / PI;
    (u, v)
}

/// Unit direction at the center of texture coordinates `(u, v)`; inverse of
/// [`direction_to_uv`].
pub fn uv_to_direction(u: f64, v: f64) -> Vec3 {
    let lon = 2.0 * PI * u - PI;
    let lat = PI / 2.0 - PI * v;
    Vec3::new(lat.cos() * lon.cos(), lat.sin(), lat.cos() * lon.sin())
}

/// Bilinear background lookup along `dir`, channels linear in `[0, 1]`.
/// Longitude wraps, latitude clamps at the poles.
pub fn sample_direction(img: &ImageBuffer, dir: Vec3) -> [f64; 3] {
    let (u, v) = direction_to_uv(dir);
    let w = img.width as i64;
    let h = img.height as i64;
    let x = u * w as f64 - 0.5;
    let y = v * h as f64 - 0.5;
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let xa = (x0 as i64).rem_euclid(w) as u32;
    let xb = (x0 as i64 + 1).rem_euclid(w) as u32;
    let ya = (y0 as i64).clamp(0, h - 1) as u32;
    let yb = (y0 as i64 + 1).clamp(0, h - 1) as u32;

    let (p00, p10, p01, p11) = (img.pixel(xa, ya), img.pixel(xb, ya), img.pixel(xa, yb), img.pixel(xb, yb));
    let mut out = [0.0; 3];
    for c in 0..3 {
        let top = f64::from(p00[c]) * (1.0 - fx) + f64::from(p10[c]) * fx;
        let bottom = f64::from(p01[c]) * (1.0 - fx) + f64::from(p11[c]) * fx;
        out[c] = ((top * (1.0 - fy) + bottom * fy) / 255.0).clamp(0.0, 1.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_file() {
        let mut bytes = b"P6\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 0, 0, 0, 255]);
        let img = load_ppm(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (2, 1));
        assert_eq!(img.pixel(0, 0), [255, 0, 0]);
        assert_eq!(img.pixel(1, 0), [0, 0, 255]);

        let mut commented = b"P6\n# comment\n2 1\n255\n".to_vec();
        commented.extend_from_slice(&[255, 0, 0, 0, 0, 255]);
        assert_eq!(load_ppm(&commented).unwrap(), img);
    }

    #[test]
    fn comments_between_every_token() {
        let mut bytes = b"P6 #a\n 2#b\n\t1 # c\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
        let img = load_ppm(&bytes).unwrap();
        assert_eq!(img.as_bytes(), &[1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn rejects_variants_and_damage() {
        assert!(matches!(load_ppm(b"P3\n1 1\n255\n0 0 0\n"), Err(PpmError::MalformedHeader(_))));
        assert!(matches!(load_ppm(b"P6\n1 1\n65535\n\0\0\0\0\0\0"), Err(PpmError::UnsupportedMaxval(65535))));
        assert!(matches!(load_ppm(b"P6\n1 1\n255\n\0\0"), Err(PpmError::TruncatedPixelData { expected: 3, found: 2 })));
        assert!(matches!(load_ppm(b"P6\nx 1\n255\n"), Err(PpmError::MalformedHeader(_))));
        assert!(matches!(load_ppm(b"P6\n0 1\n255\n"), Err(PpmError::MalformedHeader(_))));
        assert!(matches!(load_ppm(b"P6\n1 1\n255"), Err(PpmError::MalformedHeader(_))));
        assert!(matches!(load_ppm(b""), Err(PpmError::MalformedHeader(_))));
        assert!(matches!(load_ppm(b"P61 1 255 "), Err(PpmError::MalformedHeader(_))));
    }

    #[test]
    fn save_examples() {
        assert_eq!(save_ppm(&ImageBuffer::new(1, 1)), b"P6\n1 1\n255\n\0\0\0");
        let bytes = save_ppm(&ImageBuffer::new(2, 2));
        assert_eq!(bytes.len(), 11 + 12);
        assert_eq!(&bytes[..11], b"P6\n2 2\n255\n");
    }

    #[test]
    fn uniform_image_samples_exactly() {
        let img = ImageBuffer::from_fn(7, 5, |_, _| [10, 200, 77]);
        let c = sample_direction(&img, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(c, [10.0 / 255.0, 200.0 / 255.0, 77.0 / 255.0]);
    }

    #[test]
    fn pole_reads_top_row() {
        let img = ImageBuffer::from_fn(4, 4, |_, y| if y == 0 { [255, 255, 255] } else { [0, 0, 0] });
        assert_eq!(sample_direction(&img, Vec3::new(0.0, 1.0, 0.0)), [1.0; 3]);
        assert_eq!(sample_direction(&img, Vec3::new(0.0, -1.0, 0.0)), [0.0; 3]);
    }

    #[test]
    fn longitude_sweep_wraps_at_pi() {
        let mut prev = None;
        let n = 1000;
        for i in 0..n {
            let theta = -PI + 2.0 * PI * (i as f64 + 0.5) / n as f64;
            let (u, _) = direction_to_uv(Vec3::new(theta.cos(), 0.0, theta.sin()));
            if let Some(p) = prev {
                assert!(u > p);
            }
            prev = Some(u);
        }
        let (just_below, _) = direction_to_uv(Vec3::new(-1.0, 0.0, -1e-9));
        let (just_above, _) = direction_to_uv(Vec3::new(-1.0, 0.0, 1e-9));
        assert!(just_below < 1e-9 && just_above > 1.0 - 1e-9);
    }

    #[test]
    fn seam_is_continuous() {
        let img = ImageBuffer::from_fn(16, 8, |x, y| [(x * 15) as u8, (y * 30) as u8, 128]);
        let max_step = 15.0 / 255.0;
        for lat in [-0.7, 0.0, 0.4] {
            let d = |lon: f64| Vec3::new(f64::cos(lat) * lon.cos(), f64::sin(lat), f64::cos(lat) * lon.sin());
            let a = sample_direction(&img, d(PI - 1e-6));
            let b = sample_direction(&img, d(-PI + 1e-6));
            for c in 0..3 {
                assert!((a[c] - b[c]).abs() <= max_step);
                assert!((a[c] - b[c]).abs() <= 1e-4, "seam jump {a:?} {b:?}");
            }
        }
    }

    proptest! {
        #[test]
        fn ppm_round_trip(w in 1u32..20, h in 1u32..20, seed: u64) {
            let mut s = seed;
            let img = ImageBuffer::from_fn(w, h, |_, _| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let b = s.to_le_bytes();
                [b[5], b[6], b[7]]
            });
            prop_assert_eq!(load_ppm(&save_ppm(&img)).unwrap(), img);
        }

        #[test]
        fn samples_stay_in_unit_range(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
            let d = Vec3::new(x, y, z);
            prop_assume!(d.norm() > 1e-6);
            let img = ImageBuffer::from_fn(9, 5, |x, y| [(x * 28) as u8, 255, (y * 60) as u8]);
            for c in sample_direction(&img, d.normalized()) {
                prop_assert!((0.0..=1.0).contains(&c));
            }
        }

        #[test]
        fn uv_inverts(u in 0.001f64..0.999, v in 0.001f64..0.999) {
            let (u2, v2) = direction_to_uv(uv_to_direction(u, v));
            prop_assert!((u - u2).abs() < 1e-9 && (v - v2).abs() < 1e-9);
        }
    }
}
