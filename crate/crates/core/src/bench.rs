//! Strong- and weak-scaling sweeps with CSV output.
//!
//! Each measurement times only the render call itself on a monotonic clock;
//! the background is decoded once up front and worker processes are started
//! and greeted before their clock starts.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::config::SceneParams;
use crate::netrender::{run_coordinator, LocalWorkers, NetError};
use crate::render::{render_image, RenderError, SceneConfig, SceneError};

pub const CSV_HEADER: &str = "mode,workers,threads_per_worker,width,height,spp,epsilon,run,wall_seconds";

/// Default number of identical runs per configuration.
pub const DEFAULT_REPEATS: u32 = 5;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("invalid sweep: {0}")]
    InvalidSweep(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Threads,
    Multiprocess,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Threads => "threads",
            Mode::Multiprocess => "multiprocess",
        }
    }
}

/// How a sweep point with `n` workers is executed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Executor {
    /// In-process pool of `n` threads.
    Threads,
    /// `n` worker processes of `worker_exe`, each with its own thread pool.
    Multiprocess { worker_exe: PathBuf, threads_per_worker: usize },
}

impl Executor {
    fn mode(&self) -> Mode {
        match self {
            Executor::Threads => Mode::Threads,
            Executor::Multiprocess { .. } => Mode::Multiprocess,
        }
    }

    fn threads_per_worker(&self) -> u32 {
        match self {
            Executor::Threads => 1,
            Executor::Multiprocess { threads_per_worker, .. } => *threads_per_worker as u32,
        }
    }

    /// Seconds spent rendering `scene` once with `workers` workers.
    fn time_render(&self, scene: &SceneConfig, workers: usize) -> Result<f64, BenchError> {
        match self {
            Executor::Threads => {
                let start = Instant::now();
                render_image(scene, workers)?;
                Ok(start.elapsed().as_secs_f64())
            }
            Executor::Multiprocess {
                worker_exe,
                threads_per_worker,
            } => {
                let (procs, links) = LocalWorkers::spawn(worker_exe, workers, *threads_per_worker)?;
                let start = Instant::now();
                run_coordinator(scene, links)?;
                let elapsed = start.elapsed().as_secs_f64();
                procs.wait()?;
                Ok(elapsed)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRecord {
    pub mode: Mode,
    pub workers: u32,
    pub threads_per_worker: u32,
    pub width: u32,
    pub height: u32,
    pub spp: u32,
    pub epsilon: f64,
    pub run_index: u32,
    pub wall_seconds: f64,
}

impl TimingRecord {
    fn config_key(&self) -> (Mode, u32, u32, u32, u32, u32, u64) {
        (
            self.mode,
            self.workers,
            self.threads_per_worker,
            self.width,
            self.height,
            self.spp,
            self.epsilon.to_bits(),
        )
    }
}

fn measure(
    scene: &SceneConfig,
    workers: usize,
    repeats: u32,
    exec: &Executor,
    out: &mut Vec<TimingRecord>,
) -> Result<(), BenchError> {
    if workers == 0 {
        return Err(BenchError::InvalidSweep("worker counts must be >= 1"));
    }
    for run in 0..repeats {
        let seconds = exec.time_render(scene, workers)?;
        out.push(TimingRecord {
            mode: exec.mode(),
            workers: workers as u32,
            threads_per_worker: exec.threads_per_worker(),
            width: scene.width(),
            height: scene.height(),
            spp: scene.samples.spp,
            epsilon: scene.trace.epsilon,
            run_index: run,
            wall_seconds: seconds.max(f64::MIN_POSITIVE),
        });
    }
    Ok(())
}

/// Fixed workload, varying worker count: one record per `(count, run)`.
pub fn run_strong_scaling(
    scene: &SceneConfig,
    worker_counts: &[usize],
    repeats: u32,
    exec: &Executor,
) -> Result<Vec<TimingRecord>, BenchError> {
    if repeats == 0 {
        return Err(BenchError::InvalidSweep("repeats must be >= 1"));
    }
    let mut records = Vec::with_capacity(worker_counts.len() * repeats as usize);
    for &n in worker_counts {
        measure(scene, n, repeats, exec, &mut records)?;
    }
    Ok(records)
}

/// Width grows with the worker count per `pairs`; height stays fixed.
pub fn run_weak_scaling(
    template: &SceneConfig,
    pairs: &[(usize, u32)],
    repeats: u32,
    exec: &Executor,
) -> Result<Vec<TimingRecord>, BenchError> {
    if pairs.is_empty() {
        return Err(BenchError::InvalidSweep("weak-scaling pairs must be nonempty"));
    }
    if repeats == 0 {
        return Err(BenchError::InvalidSweep("repeats must be >= 1"));
    }
    let mut records = Vec::with_capacity(pairs.len() * repeats as usize);
    for &(workers, width) in pairs {
        let mut params = SceneParams::from(template);
        params.width = width;
        let scene = params.build(Arc::clone(&template.background))?;
        measure(&scene, workers, repeats, exec, &mut records)?;
    }
    Ok(records)
}

/// Mean wall time per configuration, in first-seen order.
pub fn config_means(records: &[TimingRecord]) -> Vec<(TimingRecord, f64)> {
    let mut groups: Vec<(TimingRecord, f64, u32)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(g, _, _)| g.config_key() == r.config_key()) {
            Some((_, sum, n)) => {
                *sum += r.wall_seconds;
                *n += 1;
            }
            None => groups.push((r.clone(), r.wall_seconds, 1)),
        }
    }
    groups
        .into_iter()
        .map(|(g, sum, n)| (g, sum / f64::from(n)))
        .collect()
}

/// `mean T(first) / mean T(n)` for each configuration, relative to the first.
pub fn speedup_curve(records: &[TimingRecord]) -> Vec<(u32, f64)> {
    let means = config_means(records);
    let Some((_, base)) = means.first() else {
        return Vec::new();
    };
    let base = *base;
    means.iter().map(|(g, m)| (g.workers, base / m)).collect()
}

/// CSV with one row per record, followed by one mean row (`run = -1`) per
/// configuration.
pub fn emit_csv(records: &[TimingRecord]) -> Vec<u8> {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let mut row = |r: &TimingRecord, run: i64, seconds: f64| {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.mode.as_str(),
            r.workers,
            r.threads_per_worker,
            r.width,
            r.height,
            r.spp,
            r.epsilon,
            run,
            seconds
        );
    };
    for r in records {
        row(r, i64::from(r.run_index), r.wall_seconds);
    }
    for (g, mean) in config_means(records) {
        row(&g, -1, mean);
    }
    out.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(workers: u32, run: u32, secs: f64) -> TimingRecord {
        TimingRecord {
            mode: Mode::Threads,
            workers,
            threads_per_worker: 1,
            width: 64,
            height: 32,
            spp: 2,
            epsilon: 0.1,
            run_index: run,
            wall_seconds: secs,
        }
    }

    #[test]
    fn empty_csv_is_header_only() {
        assert_eq!(emit_csv(&[]), format!("{CSV_HEADER}\n").into_bytes());
    }

    #[test]
    fn one_record_gets_a_mean_row() {
        let text = String::from_utf8(emit_csv(&[rec(1, 0, 0.25)])).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "threads,1,1,64,32,2,0.1,0,0.25");
        assert_eq!(lines[2], "threads,1,1,64,32,2,0.1,-1,0.25");
    }

    #[test]
    fn means_and_speedups() {
        let records = [rec(1, 0, 4.0), rec(1, 1, 6.0), rec(4, 0, 2.0), rec(4, 1, 3.0)];
        let means = config_means(&records);
        assert_eq!(means.len(), 2);
        assert_eq!(means[0].1, 5.0);
        assert_eq!(means[1].1, 2.5);
        assert_eq!(speedup_curve(&records), vec![(1, 1.0), (4, 2.0)]);
        let text = String::from_utf8(emit_csv(&records)).unwrap();
        assert!(text.lines().all(|l| l.split(',').count() == 9));
    }

    #[test]
    fn zero_repeats_rejected() {
        let bg = Arc::new(crate::environment::ImageBuffer::new(2, 1));
        let scene = SceneParams { width: 2, height: 2, ..SceneParams::default() }.build(bg).unwrap();
        assert!(matches!(
            run_strong_scaling(&scene, &[1], 0, &Executor::Threads),
            Err(BenchError::InvalidSweep(_))
        ));
        assert!(matches!(
            run_weak_scaling(&scene, &[], 1, &Executor::Threads),
            Err(BenchError::InvalidSweep(_))
        ));
        assert!(matches!(
            run_strong_scaling(&scene, &[0], 1, &Executor::Threads),
            Err(BenchError::InvalidSweep(_))
        ));
    }
}
