//! Ranks as threads of one process, linked by bounded channels.

use std::sync::mpsc::{sync_channel, Receiver, SyncSender};

use super::{down, CommError, CommGroup, Message, Transport};

/// Messages that may queue on one ordered link before the sender blocks.
pub const LINK_BOUND: usize = 1024;

pub struct InprocTransport {
    rank: usize,
    size: usize,
    to: Vec<Option<SyncSender<Message>>>,
    from: Vec<Option<Receiver<Message>>>,
}

/// One endpoint per rank; move each into its own thread.
pub fn inproc_group(n: usize) -> Vec<CommGroup<InprocTransport>> {
    assert!(n >= 1, "a group needs at least one rank");
    let mut to: Vec<Vec<Option<SyncSender<Message>>>> = (0..n).map(|_| (0..n).map(|_| None).collect()).collect();
    let mut from: Vec<Vec<Option<Receiver<Message>>>> = (0..n).map(|_| (0..n).map(|_| None).collect()).collect();
    for s in 0..n {
        for d in (0..n).filter(|&d| d != s) {
            let (tx, rx) = sync_channel(LINK_BOUND);
            to[s][d] = Some(tx);
            from[d][s] = Some(rx);
        }
    }
    to.into_iter()
        .zip(from)
        .enumerate()
        .map(|(rank, (to, from))| CommGroup::new(InprocTransport { rank, size: n, to, from }))
        .collect()
}

impl Transport for InprocTransport {
    fn rank(&self) -> usize {
        self.rank
    }

    fn size(&self) -> usize {
        self.size
    }

    fn send(&mut self, dest: usize, msg: Message) -> Result<(), CommError> {
        let tx = self.to[dest].as_ref().ok_or_else(|| down(Some(dest), "link closed"))?;
        tx.send(msg).map_err(|_| down(Some(dest), "peer hung up"))
    }

    fn recv(&mut self, src: usize) -> Result<Message, CommError> {
        let rx = self.from[src].as_ref().ok_or_else(|| down(Some(src), "link closed"))?;
        rx.recv().map_err(|_| down(Some(src), "peer hung up"))
    }

    fn shutdown(&mut self) {
        self.to.iter_mut().for_each(|t| *t = None);
        self.from.iter_mut().for_each(|f| *f = None);
    }
}
