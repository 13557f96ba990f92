//! Multi-process rendering over the `BHRT` framed byte-stream protocol.
//!
//! A frame is `"BHRT" | version:u8 | type:u8 | payload_len:u32be | payload`.
//! The coordinator greets each worker with HELLO, expects HELLO back, sends
//! one JOB per worker carrying the scene text, the background as PPM and a
//! static scanline band, then collects ROWS chunks until every worker says
//! DONE. Workers that get DONE instead of a JOB have nothing to render.

use std::io::{self, BufReader, BufWriter, ErrorKind, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::{mpsc, Arc};

use thiserror::Error;

use crate::config::{ConfigError, SceneParams};
use crate::environment::{load_ppm, save_ppm, ImageBuffer, PpmError};
use crate::render::{make_bands, render_rows, BandAssignment, RenderError, SceneConfig, SceneError};

pub const MAGIC: [u8; 4] = *b"BHRT";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 10;
/// Largest payload a reader accepts before treating the length as corrupt.
pub const MAX_PAYLOAD: u32 = 1 << 30;
/// Upper bound on rows per ROWS frame sent by a worker.
pub const MAX_ROWS_PER_CHUNK: u32 = 64;

const TYPE_HELLO: u8 = 1;
const TYPE_JOB: u8 = 2;
const TYPE_ROWS: u8 = 3;
const TYPE_DONE: u8 = 4;
const TYPE_ERROR: u8 = 5;

/// Codes carried by ERROR frames.
pub mod error_code {
    pub const PROTOCOL: u16 = 1;
    pub const BAD_JOB: u16 = 2;
    pub const RENDER: u16 = 3;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Hello {
        version: u8,
    },
    Job {
        scene: String,
        background_ppm: Vec<u8>,
        band: BandAssignment,
    },
    Rows {
        row_start: u32,
        row_count: u32,
        pixels: Vec<u8>,
    },
    Done,
    Error {
        code: u16,
        text: String,
    },
}

impl Message {
    fn type_byte(&self) -> u8 {
        match self {
            Message::Hello { .. } => TYPE_HELLO,
            Message::Job { .. } => TYPE_JOB,
            Message::Rows { .. } => TYPE_ROWS,
            Message::Done => TYPE_DONE,
            Message::Error { .. } => TYPE_ERROR,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "HELLO",
            Message::Job { .. } => "JOB",
            Message::Rows { .. } => "ROWS",
            Message::Done => "DONE",
            Message::Error { .. } => "ERROR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("bad frame magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported protocol version {0}")]
    BadVersion(u8),
    #[error("unknown message type {0}")]
    UnknownMsgType(u8),
    #[error("frame length mismatch: header says {declared} payload bytes, found {actual}")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("malformed payload: {0}")]
    MalformedPayload(&'static str),
}

#[derive(Debug, Error)]
pub enum NetError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("worker {worker} reported error {code}: {text}")]
    WorkerFailed { worker: u32, code: u16, text: String },
    #[error("worker {worker} disconnected before finishing its band")]
    WorkerDisconnected { worker: u32 },
    #[error("worker {worker}: {source}")]
    WorkerStream {
        worker: u32,
        #[source]
        source: Box<NetError>,
    },
    #[error("invalid job: {0}")]
    BadJob(String),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("no workers")]
    NoWorkers,
}

impl NetError {
    /// Whether the failure came from a trace rather than from the protocol.
    pub fn is_numerical(&self) -> bool {
        match self {
            NetError::Render(_) => true,
            NetError::WorkerFailed { code, .. } => *code == error_code::RENDER,
            _ => false,
        }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, NetError::Io(_))
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_be_bytes());
}

/// Serialize a message as one frame.
pub fn encode_frame(msg: &Message) -> Vec<u8> {
    let mut payload = Vec::new();
    match msg {
        Message::Hello { version } => payload.push(*version),
        Message::Job {
            scene,
            background_ppm,
            band,
        } => {
            put_u32(&mut payload, scene.len() as u32);
            payload.extend_from_slice(scene.as_bytes());
            put_u32(&mut payload, background_ppm.len() as u32);
            payload.extend_from_slice(background_ppm);
            put_u32(&mut payload, band.worker_id);
            put_u32(&mut payload, band.row_start);
            put_u32(&mut payload, band.row_end);
        }
        Message::Rows {
            row_start,
            row_count,
            pixels,
        } => {
            put_u32(&mut payload, *row_start);
            put_u32(&mut payload, *row_count);
            payload.extend_from_slice(pixels);
        }
        Message::Done => {}
        Message::Error { code, text } => {
            payload.extend_from_slice(&code.to_be_bytes());
            payload.extend_from_slice(text.as_bytes());
        }
    }
    let mut frame = Vec::with_capacity(HEADER_LEN + payload.len());
    frame.extend_from_slice(&MAGIC);
    frame.push(VERSION);
    frame.push(msg.type_byte());
    put_u32(&mut frame, payload.len() as u32);
    frame.extend_from_slice(&payload);
    frame
}

/// Checks the fixed header and returns `(type, payload_len)`.
fn parse_header(header: &[u8; HEADER_LEN]) -> Result<(u8, usize), FrameError> {
    let magic = [header[0], header[1], header[2], header[3]];
    if magic != MAGIC {
        return Err(FrameError::BadMagic(magic));
    }
    if header[4] != VERSION {
        return Err(FrameError::BadVersion(header[4]));
    }
    let kind = header[5];
    if !(TYPE_HELLO..=TYPE_ERROR).contains(&kind) {
        return Err(FrameError::UnknownMsgType(kind));
    }
    let len = u32::from_be_bytes([header[6], header[7], header[8], header[9]]);
    Ok((kind, len as usize))
}

struct Cursor<'a> {
    buf: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FrameError> {
        if self.buf.len() < n {
            return Err(FrameError::MalformedPayload("payload shorter than its fields"));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32, FrameError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn finish(self) -> Result<(), FrameError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(FrameError::MalformedPayload("trailing bytes after payload fields"))
        }
    }
}

fn decode_payload(kind: u8, payload: &[u8]) -> Result<Message, FrameError> {
    let mut c = Cursor { buf: payload };
    let msg = match kind {
        TYPE_HELLO => Message::Hello { version: c.take(1)?[0] },
        TYPE_JOB => {
            let n = c.u32()? as usize;
            let scene = std::str::from_utf8(c.take(n)?)
                .map_err(|_| FrameError::MalformedPayload("scene text is not UTF-8"))?
                .to_string();
            let n = c.u32()? as usize;
            let background_ppm = c.take(n)?.to_vec();
            let band = BandAssignment {
                worker_id: c.u32()?,
                row_start: c.u32()?,
                row_end: c.u32()?,
            };
            if band.row_end < band.row_start {
                return Err(FrameError::MalformedPayload("band ends before it starts"));
            }
            Message::Job {
                scene,
                background_ppm,
                band,
            }
        }
        TYPE_ROWS => {
            let row_start = c.u32()?;
            let row_count = c.u32()?;
            let pixels = c.take(c.buf.len())?.to_vec();
            Message::Rows {
                row_start,
                row_count,
                pixels,
            }
        }
        TYPE_DONE => Message::Done,
        TYPE_ERROR => {
            let code = c.take(2)?;
            let code = u16::from_be_bytes([code[0], code[1]]);
            let text = String::from_utf8_lossy(c.take(c.buf.len())?).into_owned();
            Message::Error { code, text }
        }
        other => return Err(FrameError::UnknownMsgType(other)),
    };
    c.finish()?;
    Ok(msg)
}

/// Decode exactly one frame occupying all of `bytes`.
pub fn decode_frame(bytes: &[u8]) -> Result<Message, FrameError> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(FrameError::BadMagic([bytes[0], bytes[1], bytes[2], bytes[3]]));
        }
        return Err(FrameError::LengthMismatch {
            declared: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let header: [u8; HEADER_LEN] = bytes[..HEADER_LEN].try_into().expect("header length");
    let (kind, len) = parse_header(&header)?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != len {
        return Err(FrameError::LengthMismatch {
            declared: len,
            actual: payload.len(),
        });
    }
    decode_payload(kind, payload)
}

/// Fill `buf` as far as the stream allows; returns the number of bytes read.
fn read_full(reader: &mut impl Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Read the next frame. `Ok(None)` means the stream ended cleanly between frames.
pub fn read_frame(reader: &mut impl Read) -> Result<Option<Message>, NetError> {
    let mut header = [0u8; HEADER_LEN];
    let got = read_full(reader, &mut header)?;
    if got == 0 {
        return Ok(None);
    }
    if got >= 4 && header[..4] != MAGIC {
        return Err(FrameError::BadMagic([header[0], header[1], header[2], header[3]]).into());
    }
    if got < HEADER_LEN {
        return Err(FrameError::LengthMismatch {
            declared: HEADER_LEN,
            actual: got,
        }
        .into());
    }
    let (kind, len) = parse_header(&header)?;
    if len > MAX_PAYLOAD as usize {
        return Err(FrameError::LengthMismatch {
            declared: len,
            actual: 0,
        }
        .into());
    }
    let mut payload = vec![0u8; len];
    let got = read_full(reader, &mut payload)?;
    if got != len {
        return Err(FrameError::LengthMismatch {
            declared: len,
            actual: got,
        }
        .into());
    }
    Ok(Some(decode_payload(kind, &payload)?))
}

pub fn write_frame(writer: &mut impl Write, msg: &Message) -> io::Result<()> {
    writer.write_all(&encode_frame(msg))?;
    writer.flush()
}

/// One handshaken connection to a worker.
pub struct WorkerLink {
    reader: Box<dyn Read + Send>,
    writer: Box<dyn Write + Send>,
}

impl WorkerLink {
    /// Greet the worker and wait for its HELLO.
    pub fn handshake(reader: Box<dyn Read + Send>, writer: Box<dyn Write + Send>) -> Result<Self, NetError> {
        let mut link = Self { reader, writer };
        write_frame(&mut link.writer, &Message::Hello { version: VERSION })?;
        match read_frame(&mut link.reader)? {
            Some(Message::Hello { version: VERSION }) => Ok(link),
            Some(Message::Hello { version }) => Err(FrameError::BadVersion(version).into()),
            Some(other) => Err(NetError::Protocol(format!("expected HELLO, got {}", other.name()))),
            None => Err(NetError::Protocol("worker closed the stream during handshake".into())),
        }
    }

    pub fn tcp(stream: TcpStream) -> Result<Self, NetError> {
        stream.set_nodelay(true)?;
        let reader = BufReader::new(stream.try_clone()?);
        Self::handshake(Box::new(reader), Box::new(BufWriter::new(stream)))
    }
}

/// Distribute `scene` over `workers` with one static band each and assemble
/// the returned rows.
pub fn run_coordinator(scene: &SceneConfig, workers: Vec<WorkerLink>) -> Result<ImageBuffer, NetError> {
    if workers.is_empty() {
        return Err(NetError::NoWorkers);
    }
    let width = scene.width();
    let height = scene.height();
    let bands = make_bands(height, workers.len() as u32);
    let scene_text = SceneParams::from(scene).to_text();
    let background_ppm = save_ppm(&scene.background);

    let mut writers = Vec::with_capacity(workers.len());
    let (tx, rx) = mpsc::channel::<(u32, Result<Option<Message>, NetError>)>();
    for (id, link) in workers.into_iter().enumerate() {
        let WorkerLink { mut reader, mut writer } = link;
        let job = match bands.get(id) {
            Some(band) => Message::Job {
                scene: scene_text.clone(),
                background_ppm: background_ppm.clone(),
                band: *band,
            },
            None => Message::Done,
        };
        write_frame(&mut writer, &job).map_err(|e| NetError::WorkerStream {
            worker: id as u32,
            source: Box::new(e.into()),
        })?;
        writers.push(writer);
        if id >= bands.len() {
            continue;
        }
        let tx = tx.clone();
        std::thread::spawn(move || loop {
            let frame = read_frame(&mut reader);
            let stop = !matches!(frame, Ok(Some(Message::Rows { .. })));
            if tx.send((id as u32, frame)).is_err() || stop {
                break;
            }
        });
    }
    drop(tx);

    let row_bytes = width as usize * 3;
    let mut image = ImageBuffer::new(width, height);
    let mut received = vec![false; height as usize];
    let mut remaining = bands.len();

    while remaining > 0 {
        let (worker, frame) = rx
            .recv()
            .map_err(|_| NetError::Protocol("all worker streams closed early".into()))?;
        let band = bands[worker as usize];
        let msg = match frame {
            Ok(Some(msg)) => msg,
            Ok(None) => return Err(NetError::WorkerDisconnected { worker }),
            Err(e) => {
                return Err(NetError::WorkerStream {
                    worker,
                    source: Box::new(e),
                })
            }
        };
        match msg {
            Message::Rows {
                row_start,
                row_count,
                pixels,
            } => {
                let end = row_start.checked_add(row_count).filter(|&e| e <= band.row_end);
                let Some(end) = end.filter(|_| row_start >= band.row_start && row_count > 0) else {
                    return Err(NetError::Protocol(format!(
                        "worker {worker} sent rows {row_start}+{row_count} outside its band {}..{}",
                        band.row_start, band.row_end
                    )));
                };
                if pixels.len() != row_count as usize * row_bytes {
                    return Err(NetError::Protocol(format!(
                        "worker {worker} sent {} pixel bytes for {row_count} rows of width {width}",
                        pixels.len()
                    )));
                }
                for row in row_start..end {
                    if std::mem::replace(&mut received[row as usize], true) {
                        return Err(NetError::Protocol(format!("worker {worker} sent row {row} twice")));
                    }
                }
                let offset = row_start as usize * row_bytes;
                image.as_bytes_mut()[offset..offset + pixels.len()].copy_from_slice(&pixels);
            }
            Message::Done => {
                if band.rows().any(|r| !received[r as usize]) {
                    return Err(NetError::Protocol(format!("worker {worker} finished with rows missing")));
                }
                remaining -= 1;
            }
            Message::Error { code, text } => return Err(NetError::WorkerFailed { worker, code, text }),
            other => {
                return Err(NetError::Protocol(format!(
                    "worker {worker} sent unexpected {}",
                    other.name()
                )))
            }
        }
    }
    Ok(image)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkerOptions {
    pub threads: usize,
    /// Rows per ROWS frame, clamped to `1..=MAX_ROWS_PER_CHUNK`.
    pub chunk_rows: u32,
}

impl Default for WorkerOptions {
    fn default() -> Self {
        Self {
            threads: 1,
            chunk_rows: MAX_ROWS_PER_CHUNK,
        }
    }
}

fn reply_error(writer: &mut impl Write, code: u16, err: NetError) -> NetError {
    // The peer may already be gone; the original error is what matters.
    let _ = write_frame(
        writer,
        &Message::Error {
            code,
            text: err.to_string(),
        },
    );
    err
}

/// Serve one coordinator: handshake, render the assigned band, stream ROWS,
/// then DONE. Malformed input is answered with an ERROR frame.
pub fn run_worker(reader: impl Read, writer: impl Write, opts: WorkerOptions) -> Result<(), NetError> {
    let mut reader = BufReader::new(reader);
    let mut writer = BufWriter::new(writer);

    match read_frame(&mut reader) {
        Ok(Some(Message::Hello { version: VERSION })) => {}
        Ok(Some(Message::Hello { version })) => {
            return Err(reply_error(&mut writer, error_code::PROTOCOL, FrameError::BadVersion(version).into()))
        }
        Ok(Some(other)) => {
            let e = NetError::Protocol(format!("expected HELLO, got {}", other.name()));
            return Err(reply_error(&mut writer, error_code::PROTOCOL, e));
        }
        Ok(None) => return Err(NetError::Protocol("stream closed before HELLO".into())),
        Err(e) if e.is_io() => return Err(e),
        Err(e) => return Err(reply_error(&mut writer, error_code::PROTOCOL, e)),
    }
    write_frame(&mut writer, &Message::Hello { version: VERSION })?;

    let (scene_text, background_ppm, band) = match read_frame(&mut reader) {
        Ok(Some(Message::Job {
            scene,
            background_ppm,
            band,
        })) => (scene, background_ppm, band),
        Ok(Some(Message::Done)) => return Ok(()),
        Ok(Some(other)) => {
            let e = NetError::Protocol(format!("expected JOB, got {}", other.name()));
            return Err(reply_error(&mut writer, error_code::PROTOCOL, e));
        }
        Ok(None) => return Err(NetError::Protocol("stream closed before JOB".into())),
        Err(e) if e.is_io() => return Err(e),
        Err(e) => return Err(reply_error(&mut writer, error_code::PROTOCOL, e)),
    };

    let scene = match build_job_scene(&scene_text, &background_ppm) {
        Ok(scene) => scene,
        Err(e) => return Err(reply_error(&mut writer, error_code::BAD_JOB, e)),
    };
    if band.row_end > scene.height() {
        let e = NetError::BadJob(format!("band ends at row {} of {}", band.row_end, scene.height()));
        return Err(reply_error(&mut writer, error_code::BAD_JOB, e));
    }

    let chunk = opts.chunk_rows.clamp(1, MAX_ROWS_PER_CHUNK);
    let mut start = band.row_start;
    while start < band.row_end {
        let end = (start + chunk).min(band.row_end);
        let pixels = match render_rows(&scene, start..end, opts.threads.max(1)) {
            Ok(p) => p,
            Err(e) => return Err(reply_error(&mut writer, error_code::RENDER, e.into())),
        };
        write_frame(
            &mut writer,
            &Message::Rows {
                row_start: start,
                row_count: end - start,
                pixels,
            },
        )?;
        start = end;
    }
    write_frame(&mut writer, &Message::Done)?;
    Ok(())
}

fn build_job_scene(text: &str, background_ppm: &[u8]) -> Result<SceneConfig, NetError> {
    let params = SceneParams::from_text(text).map_err(|e: ConfigError| NetError::BadJob(e.to_string()))?;
    let background = load_ppm(background_ppm).map_err(|e: PpmError| NetError::BadJob(e.to_string()))?;
    params
        .build(Arc::new(background))
        .map_err(|e: SceneError| NetError::BadJob(e.to_string()))
}

/// Worker processes started from a local executable and connected over
/// their stdin/stdout. Children are killed on drop if still running.
pub struct LocalWorkers {
    children: Vec<Child>,
}

impl LocalWorkers {
    /// Start `count` copies of `exe worker --threads <threads>` and handshake
    /// with each.
    pub fn spawn(exe: &Path, count: usize, threads: usize) -> Result<(Self, Vec<WorkerLink>), NetError> {
        let mut workers = LocalWorkers { children: Vec::new() };
        let mut links = Vec::with_capacity(count);
        for _ in 0..count {
            let mut child = Command::new(exe)
                .args(["worker", "--threads", &threads.to_string()])
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .stderr(Stdio::inherit())
                .spawn()?;
            let stdin = child.stdin.take().expect("piped stdin");
            let stdout = child.stdout.take().expect("piped stdout");
            workers.children.push(child);
            links.push(WorkerLink::handshake(
                Box::new(BufReader::new(stdout)),
                Box::new(BufWriter::new(stdin)),
            )?);
        }
        Ok((workers, links))
    }

    /// Wait for every worker to exit and report the first nonzero status.
    pub fn wait(mut self) -> Result<(), NetError> {
        let mut result = Ok(());
        for (id, mut child) in self.children.drain(..).enumerate() {
            let status = child.wait()?;
            if !status.success() && result.is_ok() {
                result = Err(NetError::Protocol(format!("worker {id} exited with {status}")));
            }
        }
        result
    }
}

impl Drop for LocalWorkers {
    fn drop(&mut self) {
        for child in &mut self.children {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}
