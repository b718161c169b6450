//! The rank-to-rank operations the renderers need.
//!
//! Every method is collective: all ranks of the group call it in the same
//! order. Implementations live outside this crate (threads, sockets);
//! [`Solo`] is the single-rank group that never communicates.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CommError {
    /// A peer vanished or the link failed. Fatal for the group.
    TransportDown { peer: Option<usize>, reason: String },
    /// Arguments that cannot be valid on this group (wrong outbox length, bad root).
    Usage(String),
}

impl core::fmt::Display for CommError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CommError::TransportDown { peer: Some(p), reason } => write!(f, "transport down (peer {p}): {reason}"),
            CommError::TransportDown { peer: None, reason } => write!(f, "transport down: {reason}"),
            CommError::Usage(msg) => write!(f, "invalid collective call: {msg}"),
        }
    }
}

pub trait Collective {
    fn rank(&self) -> usize;
    fn size(&self) -> usize;

    /// No rank returns before every rank has entered.
    fn barrier(&mut self) -> Result<(), CommError>;

    /// Every rank returns `root`'s bytes; other ranks' `bytes` are ignored.
    fn broadcast(&mut self, root: usize, bytes: Vec<u8>) -> Result<Vec<u8>, CommError>;

    /// Element `i` is rank `i`'s contribution, identical on all ranks.
    fn all_gather(&mut self, bytes: Vec<u8>) -> Result<Vec<Vec<u8>>, CommError>;

    /// Sends to `(rank + 1) mod N`, returns what `(rank - 1) mod N` sent.
    fn ring_forward(&mut self, payload: Vec<u8>) -> Result<Vec<u8>, CommError>;

    /// `outbox[d]` goes to rank `d`; `inbox[s]` is what rank `s` addressed to us.
    fn exchange_spans(&mut self, outbox: Vec<Vec<u8>>) -> Result<Vec<Vec<u8>>, CommError>;

    /// `Some(contributions by rank)` at `root`, `None` elsewhere.
    fn gather_to(&mut self, root: usize, bytes: Vec<u8>) -> Result<Option<Vec<Vec<u8>>>, CommError>;
}

impl<C: Collective + ?Sized> Collective for &mut C {
    fn rank(&self) -> usize {
        (**self).rank()
    }
    fn size(&self) -> usize {
        (**self).size()
    }
    fn barrier(&mut self) -> Result<(), CommError> {
        (**self).barrier()
    }
    fn broadcast(&mut self, root: usize, bytes: Vec<u8>) -> Result<Vec<u8>, CommError> {
        (**self).broadcast(root, bytes)
    }
    fn all_gather(&mut self, bytes: Vec<u8>) -> Result<Vec<Vec<u8>>, CommError> {
        (**self).all_gather(bytes)
    }
    fn ring_forward(&mut self, payload: Vec<u8>) -> Result<Vec<u8>, CommError> {
        (**self).ring_forward(payload)
    }
    fn exchange_spans(&mut self, outbox: Vec<Vec<u8>>) -> Result<Vec<Vec<u8>>, CommError> {
        (**self).exchange_spans(outbox)
    }
    fn gather_to(&mut self, root: usize, bytes: Vec<u8>) -> Result<Option<Vec<Vec<u8>>>, CommError> {
        (**self).gather_to(root, bytes)
    }
}

/// The group of one.
#[derive(Clone, Copy, Debug, Default)]
pub struct Solo;

impl Collective for Solo {
    fn rank(&self) -> usize {
        0
    }
    fn size(&self) -> usize {
        1
    }
    fn barrier(&mut self) -> Result<(), CommError> {
        Ok(())
    }
    fn broadcast(&mut self, root: usize, bytes: Vec<u8>) -> Result<Vec<u8>, CommError> {
        check_root(root, 1)?;
        Ok(bytes)
    }
    fn all_gather(&mut self, bytes: Vec<u8>) -> Result<Vec<Vec<u8>>, CommError> {
        Ok(vec![bytes])
    }
    fn ring_forward(&mut self, payload: Vec<u8>) -> Result<Vec<u8>, CommError> {
        Ok(payload)
    }
    fn exchange_spans(&mut self, outbox: Vec<Vec<u8>>) -> Result<Vec<Vec<u8>>, CommError> {
        check_outbox(&outbox, 1)?;
        Ok(outbox)
    }
    fn gather_to(&mut self, root: usize, bytes: Vec<u8>) -> Result<Option<Vec<Vec<u8>>>, CommError> {
        check_root(root, 1)?;
        Ok(Some(vec![bytes]))
    }
}

pub fn check_root(root: usize, size: usize) -> Result<(), CommError> {
    if root < size {
        Ok(())
    } else {
        Err(CommError::Usage(alloc::format!("root {root} outside group of {size}")))
    }
}

pub fn check_outbox(outbox: &[Vec<u8>], size: usize) -> Result<(), CommError> {
    if outbox.len() == size {
        Ok(())
    } else {
        Err(CommError::Usage(alloc::format!("outbox has {} entries for {size} ranks", outbox.len())))
    }
}

/// Sum of one `u64` per rank; a thin convenience over [`Collective::all_gather`].
pub fn all_reduce_sum<C: Collective + ?Sized>(comm: &mut C, value: u64) -> Result<u64, CommError> {
    let parts = comm.all_gather(value.to_le_bytes().to_vec())?;
    let mut sum = 0u64;
    for p in parts {
        let bytes: [u8; 8] = p
            .as_slice()
            .try_into()
            .map_err(|_| CommError::Usage(String::from("all_reduce_sum: malformed contribution")))?;
        sum += u64::from_le_bytes(bytes);
    }
    Ok(sum)
}
