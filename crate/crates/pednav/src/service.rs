//! The streaming service the operator console attaches to.
//!
//! One client at a time. Each connection gets a fresh [`Session`]; frames
//! come from a recorded sequence (replay) or from the synthetic generator
//! driven by the console's steering (live-synth). The processing loop runs
//! on the connection's thread and hands messages to an I/O thread through
//! an [`OutQueue`].

use std::collections::VecDeque;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender, TryRecvError};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use anyhow::Context as _;
use base64::Engine as _;
use pednav::calib::CalibrationModel;
use pednav::frame::Frame;
use pednav::geom::Point;
use pednav::matcher::GeometricModel;
use pednav::navigate::{Clock, FrozenClock, NavState, Session, SessionParams, WallClock};
use pednav::plangeo::{alignment_residual, finalize_registration, SurgicalPlan};
use pednav::synth::{truth_csv, DrillPose, MarkerSpec, Scenario};
use tungstenite::{Message, WebSocket};

use crate::wire::{
    parse_command, AlertPayload, Body, Command, CommandAck, RegistrationPayload, StatePayload, SteerOffset,
    TruthRecord, WireMessage,
};

pub const QUEUE_CAPACITY: usize = 8;

/// How long a new connection may take to reveal a WebSocket handshake.
const SNIFF_TIMEOUT: Duration = Duration::from_millis(250);
const POLL: Duration = Duration::from_millis(5);

pub enum Pop {
    Message(WireMessage),
    Empty,
    Closed,
}

#[derive(Debug, Default)]
struct QueueState {
    items: VecDeque<WireMessage>,
    next_seq: u64,
    dropped: u64,
    closed: bool,
}

/// Bounded outgoing queue. When full, the oldest queued STATE message makes
/// room; other messages are never dropped and may overfill the queue.
/// Sequence numbers are assigned on entry, so drops leave gaps.
#[derive(Debug)]
pub struct OutQueue {
    state: Mutex<QueueState>,
    ready: Condvar,
    capacity: usize,
}

impl OutQueue {
    pub fn new(capacity: usize) -> Self {
        Self {
            state: Mutex::new(QueueState {
                next_seq: 1,
                ..QueueState::default()
            }),
            ready: Condvar::new(),
            capacity: capacity.max(1),
        }
    }

    /// Enqueues `body` and returns its seq.
    pub fn push(&self, body: Body) -> u64 {
        let mut s = self.state.lock().expect("queue lock");
        let seq = s.next_seq;
        s.next_seq += 1;
        if s.items.len() >= self.capacity {
            if let Some(i) = s.items.iter().position(|m| m.body.droppable()) {
                s.items.remove(i);
                s.dropped += 1;
            }
        }
        s.items.push_back(WireMessage { seq, body });
        self.ready.notify_all();
        seq
    }

    /// Waits up to `timeout` for a message. `Closed` only once drained.
    pub fn pop(&self, timeout: Duration) -> Pop {
        let s = self.state.lock().expect("queue lock");
        let (mut s, _) = self
            .ready
            .wait_timeout_while(s, timeout, |s| s.items.is_empty() && !s.closed)
            .expect("queue lock");
        match s.items.pop_front() {
            Some(m) => Pop::Message(m),
            None if s.closed => Pop::Closed,
            None => Pop::Empty,
        }
    }

    pub fn close(&self) {
        self.state.lock().expect("queue lock").closed = true;
        self.ready.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.state.lock().expect("queue lock").closed
    }

    pub fn len(&self) -> usize {
        self.state.lock().expect("queue lock").items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dropped(&self) -> u64 {
        self.state.lock().expect("queue lock").dropped
    }
}

pub enum Source {
    Replay(Vec<Frame>),
    /// The scenario's script is played with the console's steering added.
    /// After the script ends the last pose is held.
    LiveSynth(Box<Scenario>),
}

pub struct ServiceSetup {
    pub calibration: CalibrationModel,
    pub model: GeometricModel,
    pub plan: SurgicalPlan,
    pub params: SessionParams,
    /// Pre-marked needles; registration is finalized at connect if they pass.
    pub needles: Option<[Point; 3]>,
    pub registration_tolerance_cm: f64,
    pub source: Source,
    /// 0 means as fast as frames can be processed.
    pub max_fps: f64,
    pub frozen_clock: bool,
    pub stream_frames: bool,
    pub truth_log: Option<PathBuf>,
    pub queue_capacity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConnectionSummary {
    pub frames: usize,
    pub dropped: u64,
    pub websocket: bool,
}

pub struct Service {
    listener: TcpListener,
    setup: ServiceSetup,
}

impl Service {
    pub fn bind(addr: impl ToSocketAddrs, setup: ServiceSetup) -> anyhow::Result<Self> {
        let listener = TcpListener::bind(addr).context("cannot bind the service port")?;
        Ok(Self { listener, setup })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves connections one after another, forever.
    pub fn run(&self) -> anyhow::Result<()> {
        loop {
            match self.serve_one() {
                Ok(s) => eprintln!("connection closed: {} frames, {} dropped", s.frames, s.dropped),
                Err(e) => eprintln!("connection failed: {e:#}"),
            }
        }
    }

    /// Accepts one client and serves it until it leaves or the input ends.
    pub fn serve_one(&self) -> anyhow::Result<ConnectionSummary> {
        let (stream, peer) = self.listener.accept()?;
        eprintln!("client {peer} connected");
        stream.set_nodelay(true)?;
        let websocket = sniff_websocket(&stream)?;
        let queue = Arc::new(OutQueue::new(self.setup.queue_capacity));
        let (tx, rx) = mpsc::channel();
        let io = if websocket {
            let ws = tungstenite::accept(stream).map_err(|e| anyhow::anyhow!("websocket handshake: {e}"))?;
            let q = Arc::clone(&queue);
            thread::spawn(move || websocket_io(ws, q, tx))
        } else {
            let reader = stream.try_clone()?;
            thread::spawn(move || line_reader(reader, tx));
            let q = Arc::clone(&queue);
            thread::spawn(move || line_writer(stream, q))
        };
        let result = process(&self.setup, &queue, &rx);
        queue.close();
        let _ = io.join();
        let frames = result?;
        Ok(ConnectionSummary {
            frames,
            dropped: queue.dropped(),
            websocket,
        })
    }
}

/// A WebSocket client opens with an HTTP GET; a line client may stay silent.
fn sniff_websocket(stream: &TcpStream) -> io::Result<bool> {
    stream.set_read_timeout(Some(SNIFF_TIMEOUT))?;
    let start = Instant::now();
    let mut buf = [0u8; 4];
    let mut found = false;
    while start.elapsed() < SNIFF_TIMEOUT {
        match stream.peek(&mut buf) {
            Ok(0) => break,
            Ok(n) if n >= 4 => {
                found = &buf == b"GET ";
                break;
            }
            Ok(n) => {
                if !b"GET ".starts_with(&buf[..n]) {
                    break;
                }
                thread::sleep(POLL);
            }
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => break,
            Err(e) => return Err(e),
        }
    }
    stream.set_read_timeout(None)?;
    Ok(found)
}

enum Inbound {
    Line(String),
    Closed,
}

fn line_reader(stream: TcpStream, tx: Sender<Inbound>) {
    for line in BufReader::new(stream).lines() {
        match line {
            Ok(l) if l.trim().is_empty() => {}
            Ok(l) => {
                if tx.send(Inbound::Line(l)).is_err() {
                    return;
                }
            }
            Err(_) => break,
        }
    }
    let _ = tx.send(Inbound::Closed);
}

fn line_writer(stream: TcpStream, queue: Arc<OutQueue>) {
    let mut out = BufWriter::new(&stream);
    loop {
        match queue.pop(Duration::from_millis(100)) {
            Pop::Message(m) => {
                let ok = writeln!(out, "{}", m.to_json()).and_then(|_| {
                    // batch whatever is already waiting
                    if queue.is_empty() {
                        out.flush()
                    } else {
                        Ok(())
                    }
                });
                if ok.is_err() {
                    queue.close();
                    break;
                }
            }
            Pop::Empty => {}
            Pop::Closed => {
                let _ = out.flush();
                break;
            }
        }
    }
    drop(out);
    let _ = stream.shutdown(Shutdown::Both);
}

fn websocket_io(mut ws: WebSocket<TcpStream>, queue: Arc<OutQueue>, tx: Sender<Inbound>) {
    if ws.get_mut().set_read_timeout(Some(POLL)).is_err() {
        queue.close();
        return;
    }
    loop {
        match queue.pop(Duration::ZERO) {
            Pop::Message(m) => {
                if ws.send(Message::text(m.to_json())).is_err() {
                    queue.close();
                    break;
                }
                continue;
            }
            Pop::Closed => {
                let _ = ws.close(None);
                let _ = ws.flush();
                break;
            }
            Pop::Empty => {}
        }
        match ws.read() {
            Ok(Message::Text(t)) => {
                let _ = tx.send(Inbound::Line(t.as_str().to_owned()));
            }
            Ok(Message::Close(_)) => {
                let _ = tx.send(Inbound::Closed);
                queue.close();
                break;
            }
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(_) => {
                let _ = tx.send(Inbound::Closed);
                queue.close();
                break;
            }
        }
    }
    let _ = tx.send(Inbound::Closed);
    let _ = ws.get_mut().shutdown(Shutdown::Both);
}

/// Per-connection control state.
struct Control {
    needles: [Option<Point>; 3],
    paused: bool,
    steer: SteerOffset,
    client_gone: bool,
}

/// Runs the frame loop; returns the number of frames processed.
fn process(setup: &ServiceSetup, queue: &OutQueue, rx: &Receiver<Inbound>) -> anyhow::Result<usize> {
    let clock: Box<dyn Clock> = if setup.frozen_clock {
        Box::new(FrozenClock)
    } else {
        Box::new(WallClock::default())
    };
    let mut session =
        Session::new(setup.calibration.clone(), setup.model.clone(), setup.plan, setup.params)?.with_clock(clock);
    let mut ctl = Control {
        needles: [None; 3],
        paused: false,
        steer: SteerOffset::default(),
        client_gone: false,
    };
    if let Some(n) = setup.needles {
        ctl.needles = n.map(Some);
        let reg = finalize_registration(
            n,
            alignment_residual(&n, &setup.plan, &setup.calibration),
            setup.registration_tolerance_cm,
        );
        if reg.finalized {
            session.set_registration(reg);
        }
    }
    let mut truth_log = match &setup.truth_log {
        Some(p) => {
            let mut f = BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?);
            f.write_all(truth_csv(&[]).as_bytes())?;
            Some(f)
        }
        None => None,
    };
    let spec = MarkerSpec::canonical();
    let interval = (setup.max_fps > 0.0).then(|| Duration::from_secs_f64(1.0 / setup.max_fps));
    let mut next_due = Instant::now();
    let mut k = 0usize;
    loop {
        // commands first; while paused, wait for them
        loop {
            let inbound = if ctl.paused {
                match rx.recv_timeout(Duration::from_millis(50)) {
                    Ok(m) => Some(m),
                    Err(RecvTimeoutError::Timeout) => None,
                    Err(RecvTimeoutError::Disconnected) => Some(Inbound::Closed),
                }
            } else {
                match rx.try_recv() {
                    Ok(m) => Some(m),
                    Err(TryRecvError::Empty) => None,
                    Err(TryRecvError::Disconnected) => Some(Inbound::Closed),
                }
            };
            let idle = inbound.is_none();
            match inbound {
                Some(Inbound::Line(l)) => handle_command(&l, setup, &mut session, &mut ctl, queue, &spec, k),
                Some(Inbound::Closed) => ctl.client_gone = true,
                None => {}
            }
            if ctl.client_gone || queue.is_closed() {
                return Ok(k);
            }
            if idle && !ctl.paused {
                break;
            }
        }

        let (frame, truth) = match &setup.source {
            Source::Replay(frames) => match frames.get(k) {
                Some(f) => (f.clone(), None),
                None => break,
            },
            Source::LiveSynth(script) => {
                let pose = live_pose(script, k, ctl.steer);
                let frame = script.render_pose(&spec, pose, k)?;
                (frame, Some(script.truth_for(k, pose)))
            }
        };
        if let Some(iv) = interval {
            let now = Instant::now();
            if next_due > now {
                thread::sleep(next_due - now);
            }
            next_due = next_due.max(now) + iv;
        }
        let state = if session.is_registered() {
            session.step(&frame)?
        } else {
            session.preview(&frame)
        };
        if let (Some(log), Some(t)) = (truth_log.as_mut(), truth.as_ref()) {
            let row = truth_csv(std::slice::from_ref(t));
            log.write_all(row.split_once('\n').map_or("", |(_, rows)| rows).as_bytes())?;
            log.flush()?;
        }
        let alert = alert_body(&state);
        queue.push(Body::State(StatePayload {
            source_frame: k,
            width: frame.width(),
            height: frame.height(),
            state,
            truth: truth.as_ref().map(TruthRecord::from),
            image: setup
                .stream_frames
                .then(|| base64::engine::general_purpose::STANDARD.encode(frame.to_pgm())),
        }));
        if let Some(a) = alert {
            queue.push(a);
        }
        k += 1;
    }
    Ok(k)
}

/// Script pose `k` (held after the script ends) plus the steering offset.
pub fn live_pose(script: &Scenario, k: usize, steer: SteerOffset) -> DrillPose {
    let base = script.poses[k.min(script.poses.len() - 1)];
    DrillPose {
        centroid: base.centroid + Point::new(steer.dx, steer.dy),
        axis_deg: base.axis_deg + steer.dtheta,
    }
}

fn alert_body(state: &NavState) -> Option<Body> {
    state.alert.map(|edge| {
        Body::Alert(AlertPayload {
            frame_index: state.frame_index,
            edge,
            depth: state.depth,
            radial_clearance: state.radial_clearance,
        })
    })
}

fn registration_body(session: &Session, ctl: &Control, setup: &ServiceSetup) -> Body {
    let residual = match ctl.needles {
        [Some(a), Some(b), Some(c)] => Some(alignment_residual(&[a, b, c], &setup.plan, &setup.calibration)),
        _ => None,
    };
    Body::Registration(RegistrationPayload {
        needles: ctl.needles,
        residual,
        tolerance: setup.registration_tolerance_cm,
        finalized: session.is_registered(),
    })
}

fn handle_command(
    line: &str,
    setup: &ServiceSetup,
    session: &mut Session,
    ctl: &mut Control,
    queue: &OutQueue,
    spec: &MarkerSpec,
    next_frame: usize,
) {
    let mut ack = CommandAck {
        ok: true,
        command: None,
        client_seq: None,
        error: None,
        steer_total: None,
        paused: ctl.paused,
    };
    let (seq, cmd) = match parse_command(line) {
        Ok(v) => v,
        Err((seq, e)) => {
            ack.ok = false;
            ack.client_seq = seq;
            ack.error = Some(format!("malformed command: {e}"));
            queue.push(Body::CommandAck(ack));
            return;
        }
    };
    ack.client_seq = seq;
    ack.command = Some(cmd);
    let mut registration_changed = false;
    let outcome: Result<(), String> = match cmd {
        Command::Steer { dx, dy, dtheta } => match &setup.source {
            Source::LiveSynth(script) => {
                let next = SteerOffset {
                    dx: ctl.steer.dx + dx,
                    dy: ctl.steer.dy + dy,
                    dtheta: ctl.steer.dtheta + dtheta,
                };
                if ![dx, dy, dtheta].iter().all(|v| v.is_finite()) {
                    Err("steer values must be finite".into())
                } else if script
                    .render_pose(spec, live_pose(script, next_frame, next), next_frame)
                    .is_err()
                {
                    Err("steering would move the marker out of the frame".into())
                } else {
                    ctl.steer = next;
                    Ok(())
                }
            }
            Source::Replay(_) => Err("steering needs live-synth mode".into()),
        },
        Command::MarkNeedle { index, x, y } => {
            if index > 2 {
                Err(format!("needle index {index} is not 0, 1 or 2"))
            } else if !(x.is_finite() && y.is_finite()) {
                Err("needle position must be finite".into())
            } else {
                ctl.needles[index] = Some(Point::new(x, y));
                registration_changed = true;
                Ok(())
            }
        }
        Command::FinalizeRegistration => match ctl.needles {
            [Some(a), Some(b), Some(c)] => {
                let n = [a, b, c];
                let residual = alignment_residual(&n, &setup.plan, &setup.calibration);
                let reg = finalize_registration(n, residual, setup.registration_tolerance_cm);
                registration_changed = true;
                if reg.finalized {
                    session.set_registration(reg);
                    Ok(())
                } else {
                    Err(format!(
                        "residual {residual:.4} cm exceeds the {} cm tolerance",
                        setup.registration_tolerance_cm
                    ))
                }
            }
            _ => Err("mark all three needles first".into()),
        },
        Command::Pause => {
            ctl.paused = true;
            Ok(())
        }
        Command::Resume => {
            ctl.paused = false;
            Ok(())
        }
    };
    if let Err(e) = outcome {
        ack.ok = false;
        ack.error = Some(e);
    }
    ack.paused = ctl.paused;
    if matches!(cmd, Command::Steer { .. }) {
        ack.steer_total = Some(ctl.steer);
    }
    queue.push(Body::CommandAck(ack));
    if registration_changed {
        queue.push(registration_body(session, ctl, setup));
    }
}
