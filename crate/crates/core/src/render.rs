//! Per-pixel shading and scanline-parallel image assembly.
//!
//! Every pixel is a pure function of the scene, so rows can be handed out to
//! any number of workers in any order without changing a single output byte.

use std::ops::Range;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::camera::{Camera, CameraError, SampleSpec};
use crate::environment::{sample_direction, ImageBuffer};
use crate::geodesic::{self, BlackHole, GeodesicError, TraceConfig, TraceOutcome};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error(transparent)]
    Hole(#[from] GeodesicError),
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error("camera at distance {distance} is inside the horizon r = {horizon}")]
    CameraInsideHorizon { distance: f64, horizon: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error("trace failed at pixel ({px}, {py}): {source}")]
    Trace {
        px: u32,
        py: u32,
        #[source]
        source: GeodesicError,
    },
    #[error("rows {start}..{end} are outside the {height}-row image")]
    RowsOutOfRange { start: u32, end: u32, height: u32 },
    #[error("thread count must be >= 1")]
    NoThreads,
}

/// Everything needed to render one image.
#[derive(Debug, Clone)]
pub struct SceneConfig {
    pub hole: BlackHole,
    pub camera: Camera,
    pub samples: SampleSpec,
    pub trace: TraceConfig,
    pub background: Arc<ImageBuffer>,
}

impl SceneConfig {
    pub fn new(
        hole: BlackHole,
        camera: Camera,
        samples: SampleSpec,
        trace: TraceConfig,
        background: Arc<ImageBuffer>,
    ) -> Result<Self, SceneError> {
        trace.validate()?;
        let distance = (camera.position() - hole.center).norm();
        if distance <= hole.schwarzschild_radius() {
            return Err(SceneError::CameraInsideHorizon {
                distance,
                horizon: hole.schwarzschild_radius(),
            });
        }
        Ok(Self {
            hole,
            camera,
            samples,
            trace,
            background,
        })
    }

    pub fn width(&self) -> u32 {
        self.camera.width()
    }

    pub fn height(&self) -> u32 {
        self.camera.height()
    }
}

/// Contiguous scanline range `[row_start, row_end)` owned by one worker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandAssignment {
    pub worker_id: u32,
    pub row_start: u32,
    pub row_end: u32,
}

impl BandAssignment {
    pub fn rows(&self) -> Range<u32> {
        self.row_start..self.row_end
    }

    pub fn len(&self) -> u32 {
        self.row_end - self.row_start
    }

    pub fn is_empty(&self) -> bool {
        self.row_end == self.row_start
    }
}

/// Split `height` rows into at most `workers` contiguous bands; the first
/// `height % workers` bands get one extra row.
pub fn make_bands(height: u32, workers: u32) -> Vec<BandAssignment> {
    let workers = workers.max(1);
    let count = workers.min(height);
    if count == 0 {
        return Vec::new();
    }
    let base = height / count;
    let extra = height % count;
    let mut start = 0;
    (0..count)
        .map(|id| {
            let len = base + u32::from(id < extra);
            let band = BandAssignment {
                worker_id: id,
                row_start: start,
                row_end: start + len,
            };
            start += len;
            band
        })
        .collect()
}

/// Quantize a linear `[0, 1]` channel to 8 bits, rounding half away from zero.
pub fn to_u8(value: f64) -> u8 {
    (value * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Average the traced samples of one pixel.
pub fn shade_pixel(scene: &SceneConfig, px: u32, py: u32) -> Result<[u8; 3], RenderError> {
    let spp = scene.samples.spp;
    let mut sum = [0.0f64; 3];
    for sample in 0..spp {
        let (origin, dir) = scene.camera.generate_ray(px, py, sample, &scene.samples);
        let outcome = geodesic::classify(origin, dir, &scene.hole, &scene.trace)
            .map_err(|source| RenderError::Trace { px, py, source })?;
        if let TraceOutcome::Escaped { direction } = outcome {
            let c = sample_direction(&scene.background, direction);
            for i in 0..3 {
                sum[i] += c[i];
            }
        }
    }
    let n = f64::from(spp);
    Ok([to_u8(sum[0] / n), to_u8(sum[1] / n), to_u8(sum[2] / n)])
}

fn render_row(scene: &SceneConfig, py: u32, out: &mut [u8]) -> Result<(), RenderError> {
    for (px, rgb) in (0..scene.width()).zip(out.chunks_exact_mut(3)) {
        rgb.copy_from_slice(&shade_pixel(scene, px, py)?);
    }
    Ok(())
}

/// Render rows `rows` with a pool of `threads` workers pulling rows from a
/// shared queue. Returns `rows.len() · width · 3` bytes.
pub fn render_rows(scene: &SceneConfig, rows: Range<u32>, threads: usize) -> Result<Vec<u8>, RenderError> {
    if threads == 0 {
        return Err(RenderError::NoThreads);
    }
    if rows.start > rows.end || rows.end > scene.height() {
        return Err(RenderError::RowsOutOfRange {
            start: rows.start,
            end: rows.end,
            height: scene.height(),
        });
    }
    let row_bytes = scene.width() as usize * 3;
    let mut out = vec![0u8; rows.len() * row_bytes];
    if rows.is_empty() {
        return Ok(out);
    }

    let threads = threads.min(rows.len());
    if threads == 1 {
        for (py, chunk) in rows.zip(out.chunks_exact_mut(row_bytes)) {
            render_row(scene, py, chunk)?;
        }
        return Ok(out);
    }

    let queue = Mutex::new(rows.zip(out.chunks_exact_mut(row_bytes)));
    let abort = AtomicBool::new(false);
    let first_error: Mutex<Option<(u32, RenderError)>> = Mutex::new(None);

    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| {
                while !abort.load(Ordering::Relaxed) {
                    let next = queue.lock().unwrap_or_else(|e| e.into_inner()).next();
                    let Some((py, chunk)) = next else { break };
                    if let Err(e) = render_row(scene, py, chunk) {
                        abort.store(true, Ordering::Relaxed);
                        let mut slot = first_error.lock().unwrap_or_else(|e| e.into_inner());
                        if slot.as_ref().map_or(true, |(row, _)| py < *row) {
                            *slot = Some((py, e));
                        }
                    }
                }
            });
        }
    });

    match first_error.into_inner().unwrap_or_else(|e| e.into_inner()) {
        Some((_, e)) => Err(e),
        None => Ok(out),
    }
}

/// Render one band on the calling thread.
pub fn render_band(scene: &SceneConfig, band: &BandAssignment) -> Result<Vec<u8>, RenderError> {
    render_rows(scene, band.rows(), 1)
}

/// Render the full image on `threads` workers. The result does not depend on
/// the thread count.
pub fn render_image(scene: &SceneConfig, threads: usize) -> Result<ImageBuffer, RenderError> {
    let bytes = render_rows(scene, 0..scene.height(), threads)?;
    Ok(ImageBuffer::from_raw(scene.width(), scene.height(), bytes).expect("row count matches image"))
}
