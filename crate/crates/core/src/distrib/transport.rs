//! Ordered, reliable line channels.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{channel, Receiver, Sender};

use crate::error::{Error, Result};

pub trait Transport: Send {
    /// Sends one line; `line` must not contain a newline.
    fn send_line(&mut self, line: &str) -> Result<()>;
    /// Next line, or `None` once the peer has closed the channel.
    fn recv_line(&mut self) -> Result<Option<String>>;
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn send_line(&mut self, line: &str) -> Result<()> {
        (**self).send_line(line)
    }

    fn recv_line(&mut self) -> Result<Option<String>> {
        (**self).recv_line()
    }
}

/// In-process channel end.
#[derive(Debug)]
pub struct Loopback {
    tx: Sender<String>,
    rx: Receiver<String>,
}

/// Two connected ends.
pub fn loopback_pair() -> (Loopback, Loopback) {
    let (tx_a, rx_a) = channel();
    let (tx_b, rx_b) = channel();
    (
        Loopback { tx: tx_a, rx: rx_b },
        Loopback { tx: tx_b, rx: rx_a },
    )
}

impl Transport for Loopback {
    fn send_line(&mut self, line: &str) -> Result<()> {
        self.tx.send(line.to_owned()).map_err(|_| {
            Error::Io(std::io::Error::new(
                std::io::ErrorKind::BrokenPipe,
                "loopback peer closed",
            ))
        })
    }

    fn recv_line(&mut self) -> Result<Option<String>> {
        Ok(self.rx.recv().ok())
    }
}

#[derive(Debug)]
pub struct TcpTransport {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl TcpTransport {
    pub fn new(stream: TcpStream) -> Result<TcpTransport> {
        stream.set_nodelay(true)?;
        Ok(TcpTransport {
            reader: BufReader::new(stream.try_clone()?),
            writer: stream,
        })
    }

    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<TcpTransport> {
        TcpTransport::new(TcpStream::connect(addr)?)
    }

    /// Accepts a single connection.
    pub fn accept(listener: &TcpListener) -> Result<TcpTransport> {
        let (stream, _) = listener.accept()?;
        TcpTransport::new(stream)
    }
}

impl Transport for TcpTransport {
    fn send_line(&mut self, line: &str) -> Result<()> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        Ok(())
    }

    fn recv_line(&mut self) -> Result<Option<String>> {
        let mut line = String::new();
        match self.reader.read_line(&mut line) {
            Ok(0) => Ok(None),
            Ok(_) => {
                while line.ends_with('\n') || line.ends_with('\r') {
                    line.pop();
                }
                Ok(Some(line))
            }
            Err(e) if e.kind() == std::io::ErrorKind::ConnectionReset => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}

/// Plays back recorded inbound lines and checks every outbound line against
/// the recording.
#[derive(Debug, Default)]
pub struct ReplayTransport {
    outbound: VecDeque<String>,
    inbound: VecDeque<String>,
}

impl ReplayTransport {
    pub fn new(outbound: Vec<String>, inbound: Vec<String>) -> ReplayTransport {
        ReplayTransport {
            outbound: outbound.into(),
            inbound: inbound.into(),
        }
    }

    /// Recorded outbound lines not yet reproduced.
    pub fn remaining(&self) -> usize {
        self.outbound.len() + self.inbound.len()
    }
}

impl Transport for ReplayTransport {
    fn send_line(&mut self, line: &str) -> Result<()> {
        match self.outbound.pop_front() {
            Some(expected) if expected == line => Ok(()),
            Some(expected) => Err(Error::Consistency(format!(
                "replay diverged: sent {line}, transcript has {expected}"
            ))),
            None => Err(Error::Consistency(format!(
                "replay diverged: unexpected extra message {line}"
            ))),
        }
    }

    fn recv_line(&mut self) -> Result<Option<String>> {
        Ok(self.inbound.pop_front())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loopback_delivers_in_order() {
        let (mut a, mut b) = loopback_pair();
        a.send_line("one").unwrap();
        a.send_line("two").unwrap();
        assert_eq!(b.recv_line().unwrap().as_deref(), Some("one"));
        assert_eq!(b.recv_line().unwrap().as_deref(), Some("two"));
        drop(a);
        assert_eq!(b.recv_line().unwrap(), None);
        assert!(b.send_line("x").is_err());
    }

    #[test]
    fn tcp_roundtrip() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            let mut t = TcpTransport::accept(&listener).unwrap();
            let line = t.recv_line().unwrap().unwrap();
            t.send_line(&format!("echo {line}")).unwrap();
        });
        let mut c = TcpTransport::connect(addr).unwrap();
        c.send_line("hi").unwrap();
        assert_eq!(c.recv_line().unwrap().as_deref(), Some("echo hi"));
        server.join().unwrap();
        assert_eq!(c.recv_line().unwrap(), None);
    }

    #[test]
    fn replay_checks_outbound() {
        let mut r = ReplayTransport::new(vec!["a".into()], vec!["b".into()]);
        assert!(r.send_line("a").is_ok());
        assert_eq!(r.recv_line().unwrap().as_deref(), Some("b"));
        assert!(r.send_line("c").is_err());
        assert_eq!(r.remaining(), 0);
    }
}
