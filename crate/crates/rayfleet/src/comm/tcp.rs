//! One process per rank over a full TCP mesh.
//!
//! Rank 0 listens on the published root address. Every other rank opens its
//! own listener, announces `(rank, listen address)` to rank 0 over what
//! becomes their data link, and receives the address table back. Then each
//! rank connects to every lower-numbered non-root rank and accepts from every
//! higher one. Frames are `[len u32 LE][tag u32 LE][payload]`; one reader
//! thread per link drains the socket so a sender never waits on a receiver
//! that is itself busy sending.

use std::io::{self, BufReader, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{channel, Receiver};
use std::thread;
use std::time::{Duration, Instant};

use super::{down, CommError, CommGroup, Message, Transport};

pub const ENV_RANK: &str = "RAYFLEET_RANK";
pub const ENV_NRANKS: &str = "RAYFLEET_NRANKS";
pub const ENV_ROOT_ADDR: &str = "RAYFLEET_ROOT_ADDR";

#[derive(Clone, Debug)]
pub struct TcpConfig {
    pub rank: usize,
    pub size: usize,
    pub root_addr: SocketAddr,
    /// How long non-root ranks keep retrying the root before giving up.
    pub connect_timeout: Duration,
}

impl TcpConfig {
    pub fn from_env() -> Result<TcpConfig, CommError> {
        let var = |k: &str| std::env::var(k).map_err(|_| CommError::Usage(format!("{k} is not set")));
        let num = |k: &str| -> Result<usize, CommError> {
            var(k)?.parse().map_err(|_| CommError::Usage(format!("{k} is not a non-negative integer")))
        };
        let rank = num(ENV_RANK)?;
        let size = num(ENV_NRANKS)?;
        let addr = var(ENV_ROOT_ADDR)?;
        let root_addr = addr
            .to_socket_addrs()
            .ok()
            .and_then(|mut a| a.next())
            .ok_or_else(|| CommError::Usage(format!("{ENV_ROOT_ADDR}={addr} is not an address")))?;
        if size == 0 || rank >= size {
            return Err(CommError::Usage(format!("rank {rank} outside group of {size}")));
        }
        Ok(TcpConfig { rank, size, root_addr, connect_timeout: Duration::from_secs(30) })
    }
}

type Inbound = Result<Message, String>;

pub struct TcpTransport {
    rank: usize,
    size: usize,
    writers: Vec<Option<TcpStream>>,
    readers: Vec<Option<Receiver<Inbound>>>,
}

fn io_down(peer: Option<usize>, e: io::Error) -> CommError {
    down(peer, e.to_string())
}

fn write_frame(w: &mut impl Write, tag: u32, payload: &[u8]) -> io::Result<()> {
    let len = u32::try_from(payload.len()).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "frame over 4 GiB"))?;
    let mut head = [0u8; 8];
    head[..4].copy_from_slice(&len.to_le_bytes());
    head[4..].copy_from_slice(&tag.to_le_bytes());
    w.write_all(&head)?;
    w.write_all(payload)
}

fn read_frame(r: &mut impl Read) -> io::Result<Message> {
    let mut head = [0u8; 8];
    r.read_exact(&mut head)?;
    let len = u32::from_le_bytes(head[..4].try_into().unwrap()) as usize;
    let tag = u32::from_le_bytes(head[4..].try_into().unwrap());
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    Ok(Message { tag, payload })
}

const TAG_HELLO: u32 = 0xFFFF_0001;
const TAG_TABLE: u32 = 0xFFFF_0002;

fn connect_retry(addr: SocketAddr, deadline: Instant) -> io::Result<TcpStream> {
    loop {
        match TcpStream::connect(addr) {
            Ok(s) => return Ok(s),
            Err(e) if Instant::now() >= deadline => return Err(e),
            Err(_) => thread::sleep(Duration::from_millis(20)),
        }
    }
}

fn encode_rank_addr(rank: usize, addr: &SocketAddr) -> Vec<u8> {
    let mut out = (rank as u32).to_le_bytes().to_vec();
    out.extend_from_slice(addr.to_string().as_bytes());
    out
}

fn decode_rank_addr(bytes: &[u8]) -> io::Result<(usize, SocketAddr)> {
    let bad = || io::Error::new(io::ErrorKind::InvalidData, "malformed hello");
    let rank = u32::from_le_bytes(bytes.get(..4).ok_or_else(bad)?.try_into().unwrap()) as usize;
    let addr = std::str::from_utf8(&bytes[4..]).map_err(|_| bad())?.parse().map_err(|_| bad())?;
    Ok((rank, addr))
}

impl TcpTransport {
    pub fn connect(cfg: &TcpConfig) -> Result<CommGroup<TcpTransport>, CommError> {
        let n = cfg.size;
        let mut links: Vec<Option<TcpStream>> = (0..n).map(|_| None).collect();
        let deadline = Instant::now() + cfg.connect_timeout;
        if n > 1 {
            if cfg.rank == 0 {
                let listener = TcpListener::bind(cfg.root_addr).map_err(|e| io_down(None, e))?;
                let mut table = vec![String::new(); n];
                for _ in 1..n {
                    let (mut s, _) = listener.accept().map_err(|e| io_down(None, e))?;
                    let hello = read_frame(&mut s).map_err(|e| io_down(None, e))?;
                    let (rank, addr) = decode_rank_addr(&hello.payload).map_err(|e| io_down(None, e))?;
                    if hello.tag != TAG_HELLO || rank == 0 || rank >= n || links[rank].is_some() {
                        return Err(down(Some(rank), "unexpected hello"));
                    }
                    table[rank] = addr.to_string();
                    links[rank] = Some(s);
                }
                let table = table.join("\n").into_bytes();
                for (peer, s) in links.iter_mut().enumerate().skip(1) {
                    let s = s.as_mut().expect("filled above");
                    write_frame(s, TAG_TABLE, &table).map_err(|e| io_down(Some(peer), e))?;
                }
            } else {
                let ip = cfg.root_addr.ip();
                let listener = TcpListener::bind((ip, 0)).map_err(|e| io_down(None, e))?;
                let mine = listener.local_addr().map_err(|e| io_down(None, e))?;
                let mut root = connect_retry(cfg.root_addr, deadline).map_err(|e| io_down(Some(0), e))?;
                write_frame(&mut root, TAG_HELLO, &encode_rank_addr(cfg.rank, &mine)).map_err(|e| io_down(Some(0), e))?;
                let table = read_frame(&mut root).map_err(|e| io_down(Some(0), e))?;
                let table = String::from_utf8(table.payload).map_err(|_| down(Some(0), "malformed address table"))?;
                let addrs: Vec<&str> = table.split('\n').collect();
                links[0] = Some(root);
                for peer in 1..cfg.rank {
                    let addr: SocketAddr =
                        addrs.get(peer).and_then(|a| a.parse().ok()).ok_or_else(|| down(Some(peer), "bad address"))?;
                    let mut s = connect_retry(addr, deadline).map_err(|e| io_down(Some(peer), e))?;
                    write_frame(&mut s, TAG_HELLO, &encode_rank_addr(cfg.rank, &mine)).map_err(|e| io_down(Some(peer), e))?;
                    links[peer] = Some(s);
                }
                for _ in cfg.rank + 1..n {
                    let (mut s, _) = listener.accept().map_err(|e| io_down(None, e))?;
                    let hello = read_frame(&mut s).map_err(|e| io_down(None, e))?;
                    let (peer, _) = decode_rank_addr(&hello.payload).map_err(|e| io_down(None, e))?;
                    if hello.tag != TAG_HELLO || peer <= cfg.rank || peer >= n || links[peer].is_some() {
                        return Err(down(Some(peer), "unexpected hello"));
                    }
                    links[peer] = Some(s);
                }
            }
        }
        let mut writers = Vec::with_capacity(n);
        let mut readers = Vec::with_capacity(n);
        for (peer, link) in links.into_iter().enumerate() {
            let Some(stream) = link else {
                writers.push(None);
                readers.push(None);
                continue;
            };
            stream.set_nodelay(true).map_err(|e| io_down(Some(peer), e))?;
            let read_half = stream.try_clone().map_err(|e| io_down(Some(peer), e))?;
            let (tx, rx) = channel();
            thread::Builder::new()
                .name(format!("rayfleet-link-{peer}"))
                .spawn(move || {
                    let mut r = BufReader::with_capacity(1 << 16, read_half);
                    loop {
                        match read_frame(&mut r) {
                            Ok(m) => {
                                if tx.send(Ok(m)).is_err() {
                                    break;
                                }
                            }
                            Err(e) => {
                                let _ = tx.send(Err(e.to_string()));
                                break;
                            }
                        }
                    }
                })
                .map_err(|e| io_down(Some(peer), e))?;
            writers.push(Some(stream));
            readers.push(Some(rx));
        }
        Ok(CommGroup::new(TcpTransport { rank: cfg.rank, size: n, writers, readers }))
    }
}

impl Transport for TcpTransport {
    fn rank(&self) -> usize {
        self.rank
    }

    fn size(&self) -> usize {
        self.size
    }

    fn send(&mut self, dest: usize, msg: Message) -> Result<(), CommError> {
        let w = self.writers[dest].as_mut().ok_or_else(|| down(Some(dest), "link closed"))?;
        write_frame(w, msg.tag, &msg.payload).map_err(|e| io_down(Some(dest), e))
    }

    fn recv(&mut self, src: usize) -> Result<Message, CommError> {
        let rx = self.readers[src].as_ref().ok_or_else(|| down(Some(src), "link closed"))?;
        match rx.recv() {
            Ok(Ok(m)) => Ok(m),
            Ok(Err(reason)) => Err(down(Some(src), reason)),
            Err(_) => Err(down(Some(src), "link reader stopped")),
        }
    }

    fn shutdown(&mut self) {
        for w in self.writers.iter_mut() {
            if let Some(s) = w.take() {
                let _ = s.shutdown(Shutdown::Both);
            }
        }
        self.readers.iter_mut().for_each(|r| *r = None);
    }
}

impl Drop for TcpTransport {
    fn drop(&mut self) {
        self.shutdown();
    }
}
