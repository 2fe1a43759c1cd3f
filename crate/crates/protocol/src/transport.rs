//! Line transports: an in-process loopback and newline-delimited streams.

use std::collections::HashSet;
use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::time::Duration;

use thiserror::Error;

use crate::codec::{decode, encode, DecodeError};
use crate::message::Message;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("peer disconnected")]
    Closed,
}

/// One end of an in-process byte-line channel. Messages go through the
/// codec, so loopback tests exercise the same bytes as a socket.
pub struct LoopbackEnd {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

/// A connected pair of loopback ends.
pub fn loopback() -> (LoopbackEnd, LoopbackEnd) {
    let (atx, brx) = mpsc::channel();
    let (btx, arx) = mpsc::channel();
    (
        LoopbackEnd { tx: atx, rx: arx },
        LoopbackEnd { tx: btx, rx: brx },
    )
}

impl LoopbackEnd {
    pub fn send(&self, m: &Message) -> Result<(), TransportError> {
        self.tx.send(encode(m)).map_err(|_| TransportError::Closed)
    }

    /// Returns the next message, `None` if nothing is queued.
    pub fn try_recv(&self) -> Result<Option<Message>, TransportError> {
        match self.rx.try_recv() {
            Ok(bytes) => Ok(Some(decode(&bytes)?)),
            Err(mpsc::TryRecvError::Empty) => Ok(None),
            Err(mpsc::TryRecvError::Disconnected) => Err(TransportError::Closed),
        }
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Result<Option<Message>, TransportError> {
        match self.rx.recv_timeout(timeout) {
            Ok(bytes) => Ok(Some(decode(&bytes)?)),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(TransportError::Closed),
        }
    }

    /// Drains everything currently queued.
    pub fn drain(&self) -> Result<Vec<Message>, TransportError> {
        let mut out = Vec::new();
        while let Some(m) = self.try_recv()? {
            out.push(m);
        }
        Ok(out)
    }
}

/// Reads newline-delimited messages from a byte stream.
pub struct LineReader<R> {
    inner: BufReader<R>,
    buf: Vec<u8>,
}

impl<R: io::Read> LineReader<R> {
    pub fn new(inner: R) -> Self {
        LineReader {
            inner: BufReader::new(inner),
            buf: Vec::new(),
        }
    }

    /// The next message; `None` at a clean end of stream.
    pub fn read(&mut self) -> Result<Option<Message>, TransportError> {
        loop {
            self.buf.clear();
            let n = self.inner.read_until(b'\n', &mut self.buf)?;
            if n == 0 {
                return Ok(None);
            }
            if self.buf.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            return Ok(Some(decode(&self.buf)?));
        }
    }
}

/// Writes messages as newline-delimited lines, flushing after each.
pub struct LineWriter<W> {
    inner: W,
}

impl<W: Write> LineWriter<W> {
    pub fn new(inner: W) -> Self {
        LineWriter { inner }
    }

    pub fn write(&mut self, m: &Message) -> Result<(), TransportError> {
        self.inner.write_all(&encode(m))?;
        self.inner.flush()?;
        Ok(())
    }
}

/// A TCP connection split into its reading and writing halves.
pub fn connect(addr: impl ToSocketAddrs) -> io::Result<(LineReader<TcpStream>, LineWriter<TcpStream>)> {
    split(TcpStream::connect(addr)?)
}

pub fn split(stream: TcpStream) -> io::Result<(LineReader<TcpStream>, LineWriter<TcpStream>)> {
    let writer = stream.try_clone()?;
    Ok((LineReader::new(stream), LineWriter::new(writer)))
}

/// Drops re-delivered messages by `(sender, id)`.
#[derive(Debug, Default)]
pub struct Deduplicator {
    seen: HashSet<(String, u64)>,
}

impl Deduplicator {
    /// True the first time a `(sender, id)` pair is seen.
    pub fn first_delivery(&mut self, m: &Message) -> bool {
        self.seen.insert((m.sender.clone(), m.id))
    }
}
