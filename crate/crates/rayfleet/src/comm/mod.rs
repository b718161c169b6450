//! Rank-to-rank transports and the collectives built on them.
//!
//! A [`Transport`] only moves tagged messages between ranks in FIFO order.
//! [`CommGroup`] layers the blocking collectives on top, so both transports
//! share one implementation of every collective.

mod inproc;
mod tcp;

pub use inproc::{inproc_group, InprocTransport};
pub use tcp::{TcpConfig, TcpTransport, ENV_NRANKS, ENV_RANK, ENV_ROOT_ADDR};

use std::collections::VecDeque;

pub use rayfleet_core::collective::{Collective, CommError};
use rayfleet_core::collective::{check_outbox, check_root};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub tag: u32,
    pub payload: Vec<u8>,
}

/// Point-to-point delivery, FIFO per ordered pair of ranks.
pub trait Transport: Send {
    fn rank(&self) -> usize;
    fn size(&self) -> usize;
    fn send(&mut self, dest: usize, msg: Message) -> Result<(), CommError>;
    /// Next message from `src`, whatever its tag.
    fn recv(&mut self, src: usize) -> Result<Message, CommError>;
    /// Closes every link. Later calls fail with `TransportDown`.
    fn shutdown(&mut self);
}

/// A collective endpoint that can be handed to a device.
pub trait Endpoint: Collective + Send {
    fn shutdown(&mut self);
}

impl Endpoint for rayfleet_core::Solo {
    fn shutdown(&mut self) {}
}

const TAG_BARRIER: u32 = 1;
const TAG_BROADCAST: u32 = 2;
const TAG_ALL_GATHER: u32 = 3;
const TAG_RING: u32 = 4;
const TAG_SPANS: u32 = 5;
const TAG_GATHER: u32 = 6;
/// Tags at or above this are free for application point-to-point use.
pub const TAG_USER: u32 = 1 << 16;

pub struct CommGroup<T> {
    transport: T,
    /// Messages received from each source ahead of the tag being waited for.
    pending: Vec<VecDeque<Message>>,
}

impl<T: Transport> CommGroup<T> {
    pub fn new(transport: T) -> Self {
        let n = transport.size();
        CommGroup { transport, pending: vec![VecDeque::new(); n] }
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    pub fn send(&mut self, dest: usize, tag: u32, payload: Vec<u8>) -> Result<(), CommError> {
        self.check_peer(dest)?;
        if dest == self.rank() {
            self.pending[dest].push_back(Message { tag, payload });
            return Ok(());
        }
        self.transport.send(dest, Message { tag, payload })
    }

    /// Next message from `src` carrying `tag`; others from `src` are kept
    /// for later in arrival order.
    pub fn recv(&mut self, src: usize, tag: u32) -> Result<Vec<u8>, CommError> {
        self.check_peer(src)?;
        let queue = &mut self.pending[src];
        if let Some(i) = queue.iter().position(|m| m.tag == tag) {
            return Ok(queue.remove(i).expect("index from position").payload);
        }
        if src == self.rank() {
            return Err(CommError::Usage(format!("receive from self with tag {tag} but nothing was sent")));
        }
        loop {
            let m = self.transport.recv(src)?;
            if m.tag == tag {
                return Ok(m.payload);
            }
            self.pending[src].push_back(m);
        }
    }

    fn check_peer(&self, peer: usize) -> Result<(), CommError> {
        if peer < self.size() {
            Ok(())
        } else {
            Err(CommError::Usage(format!("rank {peer} outside group of {}", self.size())))
        }
    }

    /// Sends one payload to every rank (self included), then collects one
    /// from every rank.
    fn all_to_all(&mut self, tag: u32, bytes: Vec<u8>) -> Result<Vec<Vec<u8>>, CommError> {
        let n = self.size();
        for d in 0..n {
            self.send(d, tag, bytes.clone())?;
        }
        (0..n).map(|s| self.recv(s, tag)).collect()
    }
}

impl<T: Transport> Collective for CommGroup<T> {
    fn rank(&self) -> usize {
        self.transport.rank()
    }

    fn size(&self) -> usize {
        self.transport.size()
    }

    // All-to-all rather than gather-release: a vanished rank surfaces as an
    // error on every survivor instead of only on the coordinator.
    fn barrier(&mut self) -> Result<(), CommError> {
        self.all_to_all(TAG_BARRIER, Vec::new()).map(|_| ())
    }

    fn broadcast(&mut self, root: usize, bytes: Vec<u8>) -> Result<Vec<u8>, CommError> {
        check_root(root, self.size())?;
        if self.rank() == root {
            for d in (0..self.size()).filter(|&d| d != root) {
                self.send(d, TAG_BROADCAST, bytes.clone())?;
            }
            Ok(bytes)
        } else {
            self.recv(root, TAG_BROADCAST)
        }
    }

    fn all_gather(&mut self, bytes: Vec<u8>) -> Result<Vec<Vec<u8>>, CommError> {
        self.all_to_all(TAG_ALL_GATHER, bytes)
    }

    fn ring_forward(&mut self, payload: Vec<u8>) -> Result<Vec<u8>, CommError> {
        let n = self.size();
        let r = self.rank();
        self.send((r + 1) % n, TAG_RING, payload)?;
        self.recv((r + n - 1) % n, TAG_RING)
    }

    fn exchange_spans(&mut self, outbox: Vec<Vec<u8>>) -> Result<Vec<Vec<u8>>, CommError> {
        check_outbox(&outbox, self.size())?;
        for (d, bytes) in outbox.into_iter().enumerate() {
            self.send(d, TAG_SPANS, bytes)?;
        }
        (0..self.size()).map(|s| self.recv(s, TAG_SPANS)).collect()
    }

    fn gather_to(&mut self, root: usize, bytes: Vec<u8>) -> Result<Option<Vec<Vec<u8>>>, CommError> {
        check_root(root, self.size())?;
        self.send(root, TAG_GATHER, bytes)?;
        if self.rank() != root {
            return Ok(None);
        }
        (0..self.size()).map(|s| self.recv(s, TAG_GATHER)).collect::<Result<_, _>>().map(Some)
    }
}

impl<T: Transport> Endpoint for CommGroup<T> {
    fn shutdown(&mut self) {
        self.transport.shutdown();
    }
}

pub(crate) fn down(peer: Option<usize>, reason: impl Into<String>) -> CommError {
    CommError::TransportDown { peer, reason: reason.into() }
}
