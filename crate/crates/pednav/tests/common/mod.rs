#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::Duration;

use pednav_app::wire::{Body, StatePayload, WireMessage};

pub fn pednav() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pednav"));
    c.env_remove("PEDNAV_CONFIG");
    c
}

pub fn run(args: &[&str]) -> Output {
    pednav().args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Renders a scenario into `dir` and returns the config path.
pub fn simulate(dir: &Path, extra: &[&str]) -> PathBuf {
    let out = dir.to_str().unwrap();
    let mut args = vec!["simulate", "--out", out];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert!(o.status.success(), "simulate failed: {}", stderr(&o));
    dir.join("pednav.conf")
}

/// A `serve --once` child on an ephemeral port.
pub struct Server {
    child: Child,
    pub addr: SocketAddr,
}

impl Server {
    pub fn start(args: &[&str]) -> Self {
        let mut child = pednav()
            .arg("serve")
            .args(["--once", "--port", "0"])
            .args(args)
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("serve starts");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap())
            .read_line(&mut line)
            .unwrap();
        let addr = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected banner {line:?}"))
            .parse()
            .unwrap();
        Self { child, addr }
    }

    /// Waits for the process to exit on its own.
    pub fn wait(mut self) -> bool {
        let ok = self.child.wait().map(|s| s.success()).unwrap_or(false);
        std::mem::forget(self);
        ok
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct LineClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl LineClient {
    pub fn connect(addr: SocketAddr) -> Self {
        let s = TcpStream::connect(addr).unwrap();
        s.set_read_timeout(Some(Duration::from_secs(60))).unwrap();
        Self {
            writer: s.try_clone().unwrap(),
            reader: BufReader::new(s),
        }
    }

    /// Next message, or None once the server closes the connection.
    pub fn next(&mut self) -> Option<WireMessage> {
        let mut line = String::new();
        match self.reader.read_line(&mut line) {
            Ok(0) | Err(_) => None,
            Ok(_) => Some(WireMessage::from_json(line.trim_end()).unwrap_or_else(|e| panic!("{e}: {line}"))),
        }
    }

    pub fn send(&mut self, line: &str) {
        self.writer.write_all(line.as_bytes()).unwrap();
        self.writer.write_all(b"\n").unwrap();
    }

    pub fn all(&mut self) -> Vec<WireMessage> {
        std::iter::from_fn(|| self.next()).collect()
    }
}

pub fn state(m: &WireMessage) -> Option<&StatePayload> {
    match &m.body {
        Body::State(s) => Some(s),
        _ => None,
    }
}
