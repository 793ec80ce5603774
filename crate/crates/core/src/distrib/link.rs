//! Sequenced message channel on top of a [`Transport`].

use std::cell::RefCell;
use std::rc::Rc;
use std::time::Instant;

use super::message::{Envelope, Message};
use super::transcript::{Direction, TranscriptEntry};
use super::transport::Transport;
use crate::circuit::Party;
use crate::error::{Error, Result};

/// Shared coordinator-side log.
#[derive(Clone, Debug)]
pub(crate) struct Log {
    start: Instant,
    entries: Rc<RefCell<Vec<TranscriptEntry>>>,
}

impl Log {
    pub(crate) fn new() -> Log {
        Log {
            start: Instant::now(),
            entries: Rc::new(RefCell::new(Vec::new())),
        }
    }

    fn push(&self, direction: Direction, peer: Party, line: &str) {
        self.entries.borrow_mut().push(TranscriptEntry {
            direction,
            peer,
            elapsed_us: self.start.elapsed().as_micros() as u64,
            bytes: line.len() + 1,
            line: line.to_owned(),
        });
    }

    pub(crate) fn snapshot(&self) -> Vec<TranscriptEntry> {
        self.entries.borrow().clone()
    }
}

pub struct Link<T: Transport> {
    transport: T,
    session_id: Option<String>,
    next_send: u64,
    next_recv: u64,
    log: Option<(Log, Party)>,
}

impl<T: Transport> Link<T> {
    /// `session_id` is `None` on a worker until the first message arrives.
    pub fn new(transport: T, session_id: Option<String>) -> Link<T> {
        Link {
            transport,
            session_id,
            next_send: 0,
            next_recv: 0,
            log: None,
        }
    }

    pub(crate) fn with_log(mut self, log: Log, peer: Party) -> Link<T> {
        self.log = Some((log, peer));
        self
    }

    pub fn session_id(&self) -> Option<&str> {
        self.session_id.as_deref()
    }

    pub fn send(&mut self, message: Message) -> Result<()> {
        let session_id = self
            .session_id
            .clone()
            .ok_or_else(|| Error::Protocol("no session established".into()))?;
        let line = Envelope {
            session_id,
            seq_no: self.next_send,
            message,
        }
        .encode();
        self.next_send += 1;
        if let Some((log, peer)) = &self.log {
            log.push(Direction::Send, *peer, &line);
        }
        self.transport.send_line(&line)
    }

    /// Next message; `None` when the peer closed the channel. Sequence gaps
    /// and foreign session ids are protocol violations.
    pub fn recv(&mut self) -> Result<Option<Message>> {
        let Some(line) = self.transport.recv_line()? else {
            return Ok(None);
        };
        if let Some((log, peer)) = &self.log {
            log.push(Direction::Recv, *peer, &line);
        }
        let env = Envelope::decode(&line)?;
        match &self.session_id {
            None => self.session_id = Some(env.session_id.clone()),
            Some(id) if *id != env.session_id => {
                return Err(Error::Protocol(format!(
                    "session {} does not match {id}",
                    env.session_id
                )))
            }
            Some(_) => {}
        }
        if env.seq_no != self.next_recv {
            return Err(Error::Protocol(format!(
                "sequence gap: expected {}, got {}",
                self.next_recv, env.seq_no
            )));
        }
        self.next_recv += 1;
        Ok(Some(env.message))
    }

    /// Like [`recv`](Self::recv) but a closed channel is an error.
    pub fn expect(&mut self) -> Result<Message> {
        self.recv()?
            .ok_or_else(|| Error::Aborted("peer closed the channel".into()))
    }
}

/// Object-safe view of a [`Link`], so links over different transports can be
/// handled uniformly.
pub trait Channel {
    fn send(&mut self, message: Message) -> Result<()>;
    fn expect(&mut self) -> Result<Message>;
}

impl<T: Transport> Channel for Link<T> {
    fn send(&mut self, message: Message) -> Result<()> {
        Link::send(self, message)
    }

    fn expect(&mut self) -> Result<Message> {
        Link::expect(self)
    }
}
