use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use crate::error::Result;
use crate::transport::frame::{read_frame, Frame, MessageType};

/// How long a loopback endpoint waits for its peer before giving up.
pub const LOOPBACK_TIMEOUT: Duration = Duration::from_secs(60);

/// A bidirectional, ordered, framed message pipe.
pub trait Channel {
    fn send(&mut self, frame: &Frame) -> Result<()>;
    fn recv(&mut self) -> Result<Frame>;
}

/// Passive observer that copies raw `KEYBLOCK` frames, in wire order, to a sink.
///
/// A failing sink disables the tap and keeps the error; the session itself
/// never sees it.
pub struct Tap {
    sink: Option<Box<dyn Write + Send>>,
    error: Option<io::Error>,
    frames: usize,
}

impl Tap {
    pub fn new(sink: Box<dyn Write + Send>) -> Self {
        Self {
            sink: Some(sink),
            error: None,
            frames: 0,
        }
    }

    pub fn to_file(path: impl AsRef<Path>) -> io::Result<Self> {
        Ok(Self::new(Box::new(BufWriter::new(File::create(path)?))))
    }

    /// Frames written so far.
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn error(&self) -> Option<&io::Error> {
        self.error.as_ref()
    }

    fn observe(&mut self, msg_type: MessageType, raw: &[u8]) {
        if msg_type != MessageType::KeyBlock {
            return;
        }
        if let Some(sink) = self.sink.as_mut() {
            match sink.write_all(raw) {
                Ok(()) => self.frames += 1,
                Err(e) => {
                    log::warn!("transcript tap disabled: {e}");
                    self.error = Some(e);
                    self.sink = None;
                }
            }
        }
    }

    /// Flushes the sink; returns the first storage error seen, if any.
    pub fn finish(mut self) -> io::Result<usize> {
        if let Some(mut sink) = self.sink.take() {
            if let Err(e) = sink.flush() {
                self.error.get_or_insert(e);
            }
        }
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.frames),
        }
    }
}

/// In-memory sink that can be read back after a session.
#[derive(Debug, Clone, Default)]
pub struct SharedBuffer(Arc<Mutex<Vec<u8>>>);

impl SharedBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contents(&self) -> Vec<u8> {
        self.0.lock().expect("tap buffer poisoned").clone()
    }
}

impl Write for SharedBuffer {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.lock().expect("tap buffer poisoned").extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// Frames over any byte stream (TCP socket, loopback pipe).
pub struct StreamChannel<S> {
    stream: S,
    tap: Option<Tap>,
}

impl<S: Read + Write> StreamChannel<S> {
    pub fn new(stream: S) -> Self {
        Self { stream, tap: None }
    }

    pub fn with_tap(mut self, tap: Tap) -> Self {
        self.tap = Some(tap);
        self
    }

    pub fn take_tap(&mut self) -> Option<Tap> {
        self.tap.take()
    }

    pub fn get_ref(&self) -> &S {
        &self.stream
    }
}

impl<S: Read + Write> Channel for StreamChannel<S> {
    fn send(&mut self, frame: &Frame) -> Result<()> {
        let raw = frame.encode()?;
        self.stream.write_all(&raw)?;
        self.stream.flush()?;
        if let Some(tap) = self.tap.as_mut() {
            tap.observe(frame.msg_type, &raw);
        }
        Ok(())
    }

    fn recv(&mut self) -> Result<Frame> {
        let (frame, raw) = read_frame(&mut self.stream)?;
        if let Some(tap) = self.tap.as_mut() {
            tap.observe(frame.msg_type, &raw);
        }
        Ok(frame)
    }
}

pub type TcpChannel = StreamChannel<TcpStream>;

/// One end of an in-process byte pipe.
pub struct PipeEnd {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    pending: Vec<u8>,
    pos: usize,
}

impl Read for PipeEnd {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        if self.pos == self.pending.len() {
            match self.rx.recv_timeout(LOOPBACK_TIMEOUT) {
                Ok(chunk) => {
                    self.pending = chunk;
                    self.pos = 0;
                }
                Err(RecvTimeoutError::Disconnected) => return Ok(0),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(io::Error::new(io::ErrorKind::TimedOut, "loopback peer went quiet"))
                }
            }
        }
        let n = buf.len().min(self.pending.len() - self.pos);
        buf[..n].copy_from_slice(&self.pending[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

impl Write for PipeEnd {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.tx
            .send(buf.to_vec())
            .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "loopback peer hung up"))?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// Two connected in-process endpoints.
pub fn loopback_pair() -> (StreamChannel<PipeEnd>, StreamChannel<PipeEnd>) {
    let (tx_a, rx_b) = mpsc::channel();
    let (tx_b, rx_a) = mpsc::channel();
    let end = |tx, rx| PipeEnd {
        tx,
        rx,
        pending: Vec::new(),
        pos: 0,
    };
    (
        StreamChannel::new(end(tx_a, rx_a)),
        StreamChannel::new(end(tx_b, rx_b)),
    )
}

/// Splits a transcript file's bytes back into frames.
pub fn parse_frames(mut bytes: &[u8]) -> Result<Vec<Frame>> {
    let mut out = Vec::new();
    while !bytes.is_empty() {
        let (frame, used) = Frame::decode_prefix(bytes)?;
        out.push(frame);
        bytes = &bytes[used..];
    }
    Ok(out)
}
