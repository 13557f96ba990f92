//! Command-line front end: `render`, `coordinator`, `worker` and `bench`.
//!
//! Scene flags may also come from a `--config` file in the same `key=value`
//! format that network jobs use; flags given on the command line win.
//! Exit codes: 0 success, 1 usage, 2 file I/O, 3 numerical failure,
//! 4 protocol failure.

use std::ffi::OsString;
use std::io::{self, BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::bench::{self, Executor};
use crate::config::{parse_kv, parse_value, SceneParams, SCENE_KEYS};
use crate::environment::{load_ppm, save_ppm, ImageBuffer};
use crate::netrender::{self, LocalWorkers, NetError, WorkerLink, WorkerOptions};
use crate::render::{self, SceneConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_PROTOCOL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    /// `--help` / `--version` output; not a failure.
    #[error("{0}")]
    Info(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Protocol(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Info(_) => EXIT_OK,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Protocol(_) => EXIT_PROTOCOL,
        }
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Protocol(e.to_string())
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "bhrt", version, about = "Schwarzschild black-hole ray tracer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render one image to a PPM file
    Render(RenderArgs),
    /// Render with worker processes, one scanline band each
    Coordinator(CoordinatorArgs),
    /// Serve one coordinator over stdin/stdout or a TCP socket
    Worker(WorkerArgs),
    /// Time renders over worker counts or image widths and write CSV
    Bench(BenchArgs),
}

#[derive(Args, Debug, Default)]
struct SceneArgs {
    /// key=value config file; command-line flags override its entries
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Black-hole mass in length units (G = c = 1) [default: 1]
    #[arg(long, value_name = "M", allow_hyphen_values = true)]
    mass: Option<String>,
    /// Black-hole position x,y,z [default: 0,0,0]
    #[arg(long, value_name = "X,Y,Z", allow_hyphen_values = true)]
    center: Option<String>,
    /// Camera position x,y,z [default: 0,0,30]
    #[arg(long, value_name = "X,Y,Z", allow_hyphen_values = true)]
    camera: Option<String>,
    /// Point the camera looks at x,y,z [default: 0,0,0]
    #[arg(long, value_name = "X,Y,Z", allow_hyphen_values = true)]
    look_at: Option<String>,
    /// Vertical field of view in degrees [default: 60]
    #[arg(long, value_name = "DEG", allow_hyphen_values = true)]
    fov: Option<String>,
    /// Image width in pixels [default: 256]
    #[arg(long, allow_hyphen_values = true)]
    width: Option<String>,
    /// Image height in pixels [default: 256]
    #[arg(long, allow_hyphen_values = true)]
    height: Option<String>,
    /// Antialiasing samples per pixel [default: 1]
    #[arg(long, allow_hyphen_values = true)]
    spp: Option<String>,
    /// Seed for sub-pixel sample positions [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    seed: Option<String>,
    /// Target spacing between computed ray points [default: 0.1]
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<String>,
    /// Radius at which outbound rays count as escaped, or "auto" for
    /// max(1e4*M, 2*camera distance) [default: auto]
    #[arg(long, allow_hyphen_values = true)]
    escape_radius: Option<String>,
    /// Turns around the hole before a ray is declared stalled [default: 10]
    #[arg(long, allow_hyphen_values = true)]
    max_windings: Option<String>,
    /// Relative tolerance of the adaptive integrator [default: 1e-10]
    #[arg(long, allow_hyphen_values = true)]
    rel_tol: Option<String>,
    /// Absolute tolerance of the adaptive integrator [default: 1e-12]
    #[arg(long, allow_hyphen_values = true)]
    abs_tol: Option<String>,
    /// Equirectangular background image (binary PPM) [required]
    #[arg(long, value_name = "FILE")]
    background: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Output PPM path [required]
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
    /// Render threads [default: available cores]
    #[arg(long, allow_hyphen_values = true)]
    threads: Option<String>,
}

#[derive(Args, Debug)]
struct CoordinatorArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Output PPM path [required]
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
    /// Start N local worker processes connected over pipes
    #[arg(long, value_name = "N", conflicts_with = "workers")]
    spawn: Option<String>,
    /// Comma-separated host:port list of listening workers
    #[arg(long, value_name = "ADDRS", value_delimiter = ',')]
    workers: Vec<String>,
    /// Threads inside each spawned worker [default: 1]
    #[arg(long, allow_hyphen_values = true)]
    threads_per_worker: Option<String>,
}

#[derive(Args, Debug)]
struct WorkerArgs {
    /// Render threads [default: available cores]
    #[arg(long, allow_hyphen_values = true)]
    threads: Option<String>,
    /// Accept one coordinator connection on this address instead of using
    /// stdin/stdout; the bound address is printed as "listening on ADDR"
    #[arg(long, value_name = "ADDR")]
    listen: Option<String>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Strong,
    Weak,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum BenchModeArg {
    Threads,
    Multiprocess,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// CSV output path [required]
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    /// Scaling experiment [default: strong]
    #[arg(long, value_enum)]
    sweep: Option<SweepKind>,
    /// Parallel execution mode [default: threads]
    #[arg(long, value_enum)]
    mode: Option<BenchModeArg>,
    /// Worker counts for a strong sweep [default: 1,2,4]
    #[arg(long, value_name = "LIST", value_delimiter = ',', allow_hyphen_values = true)]
    workers: Vec<String>,
    /// workers:width pairs for a weak sweep [default: 1:128,2:256,4:512]
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pairs: Vec<String>,
    /// Runs per configuration [default: 5]
    #[arg(long, allow_hyphen_values = true)]
    repeats: Option<String>,
    /// Threads inside each worker process in multiprocess mode [default: 1]
    #[arg(long, allow_hyphen_values = true)]
    threads_per_worker: Option<String>,
}

/// Fully resolved scene inputs shared by the rendering subcommands.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneInputs {
    pub params: SceneParams,
    pub background: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoordinatorTransport {
    Spawn { count: usize, threads_per_worker: usize },
    Connect(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliConfig {
    Render {
        scene: SceneInputs,
        output: PathBuf,
        threads: usize,
    },
    Coordinator {
        scene: SceneInputs,
        output: PathBuf,
        transport: CoordinatorTransport,
    },
    Worker {
        threads: usize,
        listen: Option<String>,
    },
    Bench {
        scene: SceneInputs,
        csv: PathBuf,
        sweep: SweepKind,
        mode: BenchModeArg,
        worker_counts: Vec<usize>,
        pairs: Vec<(usize, u32)>,
        repeats: u32,
        threads_per_worker: usize,
    },
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn invalid(flag: &str, value: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("invalid value '{value}' for --{flag}: {reason}"))
}

fn positive<T>(flag: &str, raw: Option<&str>, default: T) -> Result<T, CliError>
where
    T: std::str::FromStr + PartialOrd + Default + Copy,
    T::Err: std::fmt::Display,
{
    let Some(raw) = raw else { return Ok(default) };
    let v: T = parse_value(flag, raw).map_err(|e| invalid(flag, raw, e))?;
    if v <= T::default() {
        return Err(invalid(flag, raw, "must be >= 1"));
    }
    Ok(v)
}

impl SceneArgs {
    /// Defaults, then the config file, then explicit flags.
    fn resolve(&self, extra_file_keys: &[&str]) -> Result<(SceneParams, Option<PathBuf>, Vec<(String, String)>), CliError> {
        let mut params = SceneParams::default();
        let mut background = None;
        let mut extras = Vec::new();

        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
            let entries = parse_kv(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            for (key, value) in entries {
                if key == "background" {
                    background = Some(PathBuf::from(value));
                } else if SCENE_KEYS.contains(&key.as_str()) {
                    params
                        .apply(&key, &value)
                        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                } else if extra_file_keys.contains(&key.as_str()) {
                    extras.push((key, value));
                } else {
                    return Err(CliError::Usage(format!("{}: unknown key '{key}'", path.display())));
                }
            }
        }

        let flags: [(&str, &Option<String>); 14] = [
            ("mass", &self.mass),
            ("center", &self.center),
            ("camera", &self.camera),
            ("look_at", &self.look_at),
            ("fov", &self.fov),
            ("width", &self.width),
            ("height", &self.height),
            ("spp", &self.spp),
            ("seed", &self.seed),
            ("epsilon", &self.epsilon),
            ("escape_radius", &self.escape_radius),
            ("max_windings", &self.max_windings),
            ("rel_tol", &self.rel_tol),
            ("abs_tol", &self.abs_tol),
        ];
        for (key, value) in flags {
            if let Some(value) = value {
                params
                    .apply(key, value)
                    .map_err(|e| invalid(&key.replace('_', "-"), value, e))?;
            }
        }
        if let Some(bg) = &self.background {
            background = Some(bg.clone());
        }
        validate_scene(&params)?;
        Ok((params, background, extras))
    }
}

/// Check every numeric constraint of the scene without loading the background.
fn validate_scene(params: &SceneParams) -> Result<(), CliError> {
    if let Some(r) = params.escape_radius {
        if !(r > 0.0) {
            return Err(CliError::Usage(format!("invalid value '{r}' for --escape-radius: must be > 0")));
        }
    }
    params
        .build(Arc::new(ImageBuffer::new(1, 1)))
        .map(|_| ())
        .map_err(|e| CliError::Usage(format!("invalid scene: {e}")))
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("missing required flag --{flag}")))
}

fn extra<'a>(extras: &'a [(String, String)], key: &str) -> Option<&'a str> {
    extras.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

/// Parse a full argument vector (including the program name).
pub fn parse_args<I, T>(argv: I) -> Result<CliConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => CliError::Info(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    })?;

    match cli.command {
        Command::Render(args) => {
            let (params, background, extras) = args.scene.resolve(&["output", "threads"])?;
            let output = args.output.or_else(|| extra(&extras, "output").map(PathBuf::from));
            let threads_raw = args.threads.as_deref().or(extra(&extras, "threads"));
            Ok(CliConfig::Render {
                scene: SceneInputs {
                    params,
                    background: require(background, "background")?,
                },
                output: require(output, "output")?,
                threads: positive("threads", threads_raw, default_threads())?,
            })
        }
        Command::Coordinator(args) => {
            let (params, background, extras) = args.scene.resolve(&["output"])?;
            let output = args.output.or_else(|| extra(&extras, "output").map(PathBuf::from));
            let transport = if !args.workers.is_empty() {
                CoordinatorTransport::Connect(args.workers)
            } else if let Some(n) = args.spawn.as_deref() {
                CoordinatorTransport::Spawn {
                    count: positive("spawn", Some(n), 1)?,
                    threads_per_worker: positive("threads-per-worker", args.threads_per_worker.as_deref(), 1)?,
                }
            } else {
                return Err(CliError::Usage("coordinator needs --spawn N or --workers ADDRS".into()));
            };
            Ok(CliConfig::Coordinator {
                scene: SceneInputs {
                    params,
                    background: require(background, "background")?,
                },
                output: require(output, "output")?,
                transport,
            })
        }
        Command::Worker(args) => Ok(CliConfig::Worker {
            threads: positive("threads", args.threads.as_deref(), default_threads())?,
            listen: args.listen,
        }),
        Command::Bench(args) => {
            let (params, background, extras) = args.scene.resolve(&["csv", "repeats"])?;
            let csv = args.csv.or_else(|| extra(&extras, "csv").map(PathBuf::from));
            let worker_counts = if args.workers.is_empty() {
                vec![1, 2, 4]
            } else {
                args.workers
                    .iter()
                    .map(|w| positive("workers", Some(w.as_str()), 1))
                    .collect::<Result<_, _>>()?
            };
            let pairs = if args.pairs.is_empty() {
                vec![(1, 128), (2, 256), (4, 512)]
            } else {
                args.pairs
                    .iter()
                    .map(|p| {
                        let (w, width) = p.split_once(':').ok_or_else(|| invalid("pairs", p, "expected workers:width"))?;
                        Ok((positive("pairs", Some(w), 1)?, positive("pairs", Some(width), 1)?))
                    })
                    .collect::<Result<_, CliError>>()?
            };
            let repeats_raw = args.repeats.as_deref().or(extra(&extras, "repeats"));
            Ok(CliConfig::Bench {
                scene: SceneInputs {
                    params,
                    background: require(background, "background")?,
                },
                csv: require(csv, "csv")?,
                sweep: args.sweep.unwrap_or(SweepKind::Strong),
                mode: args.mode.unwrap_or(BenchModeArg::Threads),
                worker_counts,
                pairs,
                repeats: positive("repeats", repeats_raw, bench::DEFAULT_REPEATS)?,
                threads_per_worker: positive("threads-per-worker", args.threads_per_worker.as_deref(), 1)?,
            })
        }
    }
}

fn load_background(path: &Path) -> Result<Arc<ImageBuffer>, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("cannot read background {}: {e}", path.display())))?;
    let img = load_ppm(&bytes).map_err(|e| CliError::Io(format!("cannot decode background {}: {e}", path.display())))?;
    Ok(Arc::new(img))
}

fn build_scene(inputs: &SceneInputs) -> Result<SceneConfig, CliError> {
    let background = load_background(&inputs.background)?;
    inputs
        .params
        .build(background)
        .map_err(|e| CliError::Usage(format!("invalid scene: {e}")))
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn current_exe() -> Result<PathBuf, CliError> {
    std::env::current_exe().map_err(|e| CliError::Io(format!("cannot locate own executable: {e}")))
}

/// Execute a parsed configuration.
pub fn run(config: CliConfig) -> Result<(), CliError> {
    match config {
        CliConfig::Render { scene, output, threads } => {
            let scene = build_scene(&scene)?;
            let image = render::render_image(&scene, threads).map_err(|e| CliError::Numerical(e.to_string()))?;
            write_output(&output, &save_ppm(&image))
        }
        CliConfig::Coordinator { scene, output, transport } => {
            let scene = build_scene(&scene)?;
            let image = match transport {
                CoordinatorTransport::Spawn {
                    count,
                    threads_per_worker,
                } => {
                    let (procs, links) = LocalWorkers::spawn(&current_exe()?, count, threads_per_worker)?;
                    let image = netrender::run_coordinator(&scene, links)?;
                    procs.wait()?;
                    image
                }
                CoordinatorTransport::Connect(addrs) => {
                    let links = addrs
                        .iter()
                        .map(|addr| {
                            let stream = TcpStream::connect(addr)
                                .map_err(|e| CliError::Protocol(format!("cannot connect to worker {addr}: {e}")))?;
                            Ok(WorkerLink::tcp(stream)?)
                        })
                        .collect::<Result<Vec<_>, CliError>>()?;
                    netrender::run_coordinator(&scene, links)?
                }
            };
            write_output(&output, &save_ppm(&image))
        }
        CliConfig::Worker { threads, listen } => {
            let opts = WorkerOptions {
                threads,
                ..WorkerOptions::default()
            };
            match listen {
                Some(addr) => {
                    let listener = TcpListener::bind(&addr)
                        .map_err(|e| CliError::Protocol(format!("cannot listen on {addr}: {e}")))?;
                    let local = listener.local_addr().map_err(|e| CliError::Protocol(e.to_string()))?;
                    let mut stdout = io::stdout();
                    let _ = writeln!(stdout, "listening on {local}");
                    let _ = stdout.flush();
                    let (stream, _) = listener.accept().map_err(|e| CliError::Protocol(e.to_string()))?;
                    stream.set_nodelay(true).map_err(|e| CliError::Protocol(e.to_string()))?;
                    let reader = stream.try_clone().map_err(|e| CliError::Protocol(e.to_string()))?;
                    netrender::run_worker(reader, stream, opts)?;
                }
                None => {
                    let stdin = io::stdin().lock();
                    let stdout = io::stdout().lock();
                    netrender::run_worker(BufReader::new(stdin), BufWriter::new(stdout), opts)?;
                }
            }
            Ok(())
        }
        CliConfig::Bench {
            scene,
            csv,
            sweep,
            mode,
            worker_counts,
            pairs,
            repeats,
            threads_per_worker,
        } => {
            let scene = build_scene(&scene)?;
            let exec = match mode {
                BenchModeArg::Threads => Executor::Threads,
                BenchModeArg::Multiprocess => Executor::Multiprocess {
                    worker_exe: current_exe()?,
                    threads_per_worker,
                },
            };
            let records = match sweep {
                SweepKind::Strong => bench::run_strong_scaling(&scene, &worker_counts, repeats, &exec),
                SweepKind::Weak => bench::run_weak_scaling(&scene, &pairs, repeats, &exec),
            }
            .map_err(|e| match e {
                bench::BenchError::Render(e) => CliError::Numerical(e.to_string()),
                bench::BenchError::Net(e) => e.into(),
                other => CliError::Usage(other.to_string()),
            })?;
            write_output(&csv, &bench::emit_csv(&records))
        }
    }
}

/// Parse and run; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let result = parse_args(argv).and_then(run);
    match result {
        Ok(()) => EXIT_OK,
        Err(CliError::Info(text)) => {
            print!("{text}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("bhrt: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        std::iter::once("bhrt".to_string())
            .chain(s.split_whitespace().map(String::from))
            .collect()
    }

    #[test]
    fn render_with_defaults() {
        let cfg = parse_args(argv("render --mass 1 --width 64 --height 64 --background bg.ppm --output out.ppm")).unwrap();
        let CliConfig::Render { scene, output, threads } = cfg else { panic!() };
        assert_eq!(scene.params.mass, 1.0);
        assert_eq!((scene.params.width, scene.params.height), (64, 64));
        assert_eq!(scene.params.epsilon, SceneParams::default().epsilon);
        assert_eq!(scene.background, PathBuf::from("bg.ppm"));
        assert_eq!(output, PathBuf::from("out.ppm"));
        assert!(threads >= 1);
    }

    #[test]
    fn negative_epsilon_names_the_flag() {
        let err = parse_args(argv("render --epsilon -1 --background b --output o")).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_USAGE);
        assert!(err.to_string().contains("epsilon"), "{err}");
    }

    #[test]
    fn bad_numbers_name_the_flag() {
        for (flag, value) in [("mass", "abc"), ("width", "0"), ("fov", "200"), ("spp", "0"), ("threads", "0"), ("mass", "-2")] {
            let err = parse_args(argv(&format!("render --{flag} {value} --background b --output o"))).unwrap_err();
            assert_eq!(err.exit_code(), EXIT_USAGE, "{flag}");
            let text = err.to_string();
            assert!(text.contains(flag) || (flag == "width" && text.contains("dimensions")) , "{flag}: {text}");
        }
    }

    #[test]
    fn missing_required_flags() {
        let err = parse_args(argv("render --output o")).unwrap_err();
        assert!(err.to_string().contains("--background"));
        let err = parse_args(argv("render --background b")).unwrap_err();
        assert!(err.to_string().contains("--output"));
        assert_eq!(err.exit_code(), EXIT_USAGE);
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let err = parse_args(argv("render --colour red")).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_USAGE);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.conf");
        std::fs::write(&path, "# scene\nmass=1\nwidth=32\nbackground=sky.ppm\noutput=file.ppm\n").unwrap();
        let cfg = parse_args(argv(&format!("render --config {} --mass 2", path.display()))).unwrap();
        let CliConfig::Render { scene, output, .. } = cfg else { panic!() };
        assert_eq!(scene.params.mass, 2.0);
        assert_eq!(scene.params.width, 32);
        assert_eq!(scene.background, PathBuf::from("sky.ppm"));
        assert_eq!(output, PathBuf::from("file.ppm"));

        std::fs::write(&path, "mass=1\nbogus=3\n").unwrap();
        let err = parse_args(argv(&format!("render --config {} --background b --output o", path.display()))).unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn help_lists_every_flag_with_default() {
        let Err(CliError::Info(help)) = parse_args(argv("render --help")) else { panic!() };
        for flag in [
            "--mass", "--center", "--camera", "--look-at", "--fov", "--width", "--height", "--spp", "--seed",
            "--epsilon", "--escape-radius", "--max-windings", "--rel-tol", "--abs-tol", "--background",
            "--output", "--threads", "--config",
        ] {
            assert!(help.contains(flag), "{flag} missing from help");
        }
        assert_eq!(help.matches("[default:").count(), 15, "{help}");
    }

    #[test]
    fn bench_lists() {
        let cfg = parse_args(argv("bench --background b --csv c.csv --workers 1,3 --pairs 1:64,2:128 --repeats 2")).unwrap();
        let CliConfig::Bench { worker_counts, pairs, repeats, sweep, mode, .. } = cfg else { panic!() };
        assert_eq!(worker_counts, vec![1, 3]);
        assert_eq!(pairs, vec![(1, 64), (2, 128)]);
        assert_eq!(repeats, 2);
        assert_eq!(sweep, SweepKind::Strong);
        assert_eq!(mode, BenchModeArg::Threads);
        assert!(parse_args(argv("bench --background b --csv c --pairs 1-64")).is_err());
    }

    #[test]
    fn coordinator_transport() {
        let cfg = parse_args(argv("coordinator --background b --output o --spawn 3")).unwrap();
        assert!(matches!(
            cfg,
            CliConfig::Coordinator { transport: CoordinatorTransport::Spawn { count: 3, threads_per_worker: 1 }, .. }
        ));
        let cfg = parse_args(argv("coordinator --background b --output o --workers a:1,b:2")).unwrap();
        assert!(matches!(cfg, CliConfig::Coordinator { transport: CoordinatorTransport::Connect(ref v), .. } if v.len() == 2));
        assert!(parse_args(argv("coordinator --background b --output o")).is_err());
    }
}
