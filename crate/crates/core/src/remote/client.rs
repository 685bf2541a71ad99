use std::collections::HashMap;
use std::fmt;
use std::io::{self, BufReader, BufWriter, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Duration;

use super::protocol::{
    read_frame, read_magic, write_frame, Decoder, Encoder, Opcode, Status, MAGIC,
};
use crate::error::{Error, Result};

const CONNECT_TIMEOUT: Duration = Duration::from_secs(5);
const IO_TIMEOUT: Duration = Duration::from_secs(30);
const BLOCK: usize = 4096;
const PIPELINE: usize = 1024;

struct Conn {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

/// A connection to a corpus server. Reconnects on the next request after an
/// I/O failure.
pub struct Client {
    addr: String,
    token: String,
    conn: Option<Conn>,
}

impl fmt::Debug for Client {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Client").field("addr", &self.addr).finish()
    }
}

impl Client {
    pub fn connect(addr: &str, token: &str) -> Result<Self> {
        let mut client = Client {
            addr: addr.to_owned(),
            token: token.to_owned(),
            conn: None,
        };
        client.conn()?;
        Ok(client)
    }

    pub fn addr(&self) -> &str {
        &self.addr
    }

    fn unreachable(&self, e: impl fmt::Display) -> Error {
        Error::RemoteUnreachable {
            addr: self.addr.clone(),
            reason: e.to_string(),
        }
    }

    fn protocol(&self, message: impl Into<String>) -> Error {
        Error::Remote {
            addr: self.addr.clone(),
            message: message.into(),
        }
    }

    fn open(&self) -> Result<Conn> {
        let sockaddr = self
            .addr
            .to_socket_addrs()
            .map_err(|e| self.unreachable(e))?
            .next()
            .ok_or_else(|| self.unreachable("address resolves to nothing"))?;
        let stream =
            TcpStream::connect_timeout(&sockaddr, CONNECT_TIMEOUT).map_err(|e| self.unreachable(e))?;
        let setup = |stream: &TcpStream| -> io::Result<Conn> {
            stream.set_nodelay(true)?;
            stream.set_read_timeout(Some(IO_TIMEOUT))?;
            stream.set_write_timeout(Some(IO_TIMEOUT))?;
            Ok(Conn {
                reader: BufReader::new(stream.try_clone()?),
                writer: BufWriter::new(stream.try_clone()?),
            })
        };
        let mut conn = setup(&stream).map_err(|e| self.unreachable(e))?;
        let handshake = |conn: &mut Conn| -> io::Result<u8> {
            conn.writer.write_all(MAGIC)?;
            write_frame(&mut conn.writer, Opcode::Hello as u8, self.token.as_bytes())?;
            conn.writer.flush()?;
            read_magic(&mut conn.reader)?;
            Ok(read_frame(&mut conn.reader)?.0)
        };
        match handshake(&mut conn).map(Status::from_u8) {
            Ok(Some(Status::Ok)) => Ok(conn),
            Ok(Some(Status::AuthFail)) => Err(Error::AuthFailed(self.addr.clone())),
            Ok(_) => Err(self.protocol("unexpected handshake reply")),
            Err(e) => Err(self.protocol(format!("handshake failed: {e}"))),
        }
    }

    fn conn(&mut self) -> Result<&mut Conn> {
        if self.conn.is_none() {
            self.conn = Some(self.open()?);
        }
        Ok(self.conn.as_mut().expect("connection just opened"))
    }

    /// Sends requests back to back, then reads all responses in order.
    pub fn pipeline(&mut self, requests: &[(Opcode, Vec<u8>)]) -> Result<Vec<(Status, Vec<u8>)>> {
        let run = |conn: &mut Conn| -> io::Result<Vec<(u8, Vec<u8>)>> {
            for (op, payload) in requests {
                write_frame(&mut conn.writer, *op as u8, payload)?;
            }
            conn.writer.flush()?;
            requests.iter().map(|_| read_frame(&mut conn.reader)).collect()
        };
        let result = run(self.conn()?);
        let frames = match result {
            Ok(frames) => frames,
            Err(e) => {
                self.conn = None;
                return Err(self.protocol(e.to_string()));
            }
        };
        let mut out = Vec::with_capacity(frames.len());
        for (tag, body) in frames {
            match Status::from_u8(tag) {
                Some(s) => out.push((s, body)),
                None => {
                    self.conn = None;
                    return Err(self.protocol(format!("unknown status {tag}")));
                }
            }
        }
        Ok(out)
    }

    pub fn request(&mut self, op: Opcode, payload: Vec<u8>) -> Result<(Status, Vec<u8>)> {
        Ok(self.pipeline(&[(op, payload)])?.remove(0))
    }

    fn ok(&mut self, (status, body): (Status, Vec<u8>), what: &str) -> Result<Vec<u8>> {
        match status {
            Status::Ok => Ok(body),
            Status::AuthFail => Err(Error::AuthFailed(self.addr.clone())),
            Status::NotFound => Err(self.protocol(format!("{what}: not found"))),
            Status::Malformed => {
                self.conn = None;
                Err(self.protocol(format!("{what}: server rejected request as malformed")))
            }
        }
    }

    fn call(&mut self, op: Opcode, payload: Vec<u8>, what: &str) -> Result<Vec<u8>> {
        let reply = self.request(op, payload)?;
        self.ok(reply, what)
    }

    fn malformed(&self, what: &str) -> Error {
        self.protocol(format!("{what}: malformed response"))
    }

    /// (corpus size, lexicon length) of an attribute, or (corpus size,
    /// region count) of a structure.
    pub fn meta(&mut self, corpus: &str, name: &str) -> Result<(u32, u32)> {
        let what = format!("meta {corpus}.{name}");
        let body = self.call(Opcode::GetMeta, Encoder::new().str(corpus).str(name).finish(), &what)?;
        let mut d = Decoder::new(&body);
        let pair = (|| Ok((d.u32()?, d.u32()?, d.end()?)))()
            .map_err(|_: super::protocol::Truncated| self.malformed(&what))?;
        Ok((pair.0, pair.1))
    }

    pub fn ids(&mut self, corpus: &str, attr: &str, start: u32, count: u32) -> Result<Vec<u32>> {
        let what = format!("ids {corpus}.{attr}[{start}+{count}]");
        let payload = Encoder::new().str(corpus).str(attr).u32(start).u32(count).finish();
        let body = self.call(Opcode::GetIds, payload, &what)?;
        let ids = decode_list(&body).ok_or_else(|| self.malformed(&what))?;
        if ids.len() != count as usize {
            return Err(self.malformed(&what));
        }
        Ok(ids)
    }

    pub fn positions(&mut self, corpus: &str, attr: &str, id: u32) -> Result<Vec<u32>> {
        let what = format!("positions {corpus}.{attr}#{id}");
        let payload = Encoder::new().str(corpus).str(attr).u32(id).finish();
        let body = self.call(Opcode::GetPositions, payload, &what)?;
        decode_list(&body).ok_or_else(|| self.malformed(&what))
    }

    /// Strings for `ids`, requested in pipelined batches.
    pub fn strings(&mut self, corpus: &str, attr: &str, ids: &[u32]) -> Result<Vec<String>> {
        let what = format!("strings {corpus}.{attr}");
        let mut out = Vec::with_capacity(ids.len());
        for chunk in ids.chunks(PIPELINE) {
            let requests: Vec<_> = chunk
                .iter()
                .map(|&id| {
                    (Opcode::GetStr, Encoder::new().str(corpus).str(attr).u32(id).finish())
                })
                .collect();
            for reply in self.pipeline(&requests)? {
                let body = self.ok(reply, &what)?;
                let mut d = Decoder::new(&body);
                let s = d
                    .str()
                    .ok()
                    .filter(|_| d.end().is_ok())
                    .ok_or_else(|| self.malformed(&what))?;
                out.push(s.to_owned());
            }
        }
        Ok(out)
    }

    pub fn regions(&mut self, corpus: &str, structure: &str, from: u32, count: u32) -> Result<Vec<(u32, u32)>> {
        let what = format!("regions {corpus}.{structure}");
        let payload = Encoder::new().str(corpus).str(structure).u32(from).u32(count).finish();
        let body = self.call(Opcode::GetRegions, payload, &what)?;
        let flat = decode_list(&body)
            .filter(|v| v.len() % 2 == 0)
            .ok_or_else(|| self.malformed(&what))?;
        Ok(flat.chunks_exact(2).map(|p| (p[0], p[1])).collect())
    }
}

fn decode_list(body: &[u8]) -> Option<Vec<u32>> {
    let mut d = Decoder::new(body);
    let v = d.u32s().ok()?;
    d.end().ok()?;
    Some(v)
}

/// All regions of a structure held by a server.
pub fn fetch_regions(addr: &str, token: &str, corpus: &str, structure: &str) -> Result<Vec<(u32, u32)>> {
    let mut client = Client::connect(addr, token)?;
    let (_, count) = client.meta(corpus, structure)?;
    let mut out = Vec::with_capacity(count as usize);
    while out.len() < count as usize {
        let batch = client.regions(corpus, structure, out.len() as u32, (count - out.len() as u32).min(1 << 16))?;
        if batch.is_empty() {
            return Err(client.malformed("regions"));
        }
        out.extend(batch);
    }
    Ok(out)
}

struct Lexicon {
    strings: Vec<String>,
    lookup: HashMap<String, u32>,
}

/// Client side of a positional attribute held by a server. The lexicon,
/// fetched stream blocks and position lists are cached.
pub struct RemoteAttribute {
    corpus: String,
    attr: String,
    size: usize,
    lexicon_len: usize,
    client: Mutex<Client>,
    lexicon: OnceLock<Lexicon>,
    blocks: Mutex<HashMap<usize, Arc<Vec<u32>>>>,
    positions: Mutex<HashMap<u32, Arc<Vec<u32>>>>,
}

impl fmt::Debug for RemoteAttribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteAttribute")
            .field("corpus", &self.corpus)
            .field("attr", &self.attr)
            .field("size", &self.size)
            .finish()
    }
}

impl RemoteAttribute {
    pub fn connect(addr: &str, token: &str, corpus: &str, attr: &str) -> Result<Self> {
        let mut client = Client::connect(addr, token)?;
        let (size, lexicon_len) = client.meta(corpus, attr)?;
        Ok(RemoteAttribute {
            corpus: corpus.to_owned(),
            attr: attr.to_owned(),
            size: size as usize,
            lexicon_len: lexicon_len as usize,
            client: Mutex::new(client),
            lexicon: OnceLock::new(),
            blocks: Mutex::new(HashMap::new()),
            positions: Mutex::new(HashMap::new()),
        })
    }

    fn client(&self) -> std::sync::MutexGuard<'_, Client> {
        self.client.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn lexicon_len(&self) -> usize {
        self.lexicon_len
    }

    fn block(&self, index: usize) -> Result<Arc<Vec<u32>>> {
        if let Some(b) = self.blocks.lock().unwrap_or_else(|e| e.into_inner()).get(&index) {
            return Ok(b.clone());
        }
        let start = index * BLOCK;
        let count = BLOCK.min(self.size - start);
        let ids = Arc::new(self.client().ids(&self.corpus, &self.attr, start as u32, count as u32)?);
        self.blocks
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(index, ids.clone());
        Ok(ids)
    }

    pub fn id_at(&self, pos: usize) -> Result<u32> {
        Ok(self.block(pos / BLOCK)?[pos % BLOCK])
    }

    pub fn ids(&self, start: usize, count: usize) -> Result<Vec<u32>> {
        let mut out = Vec::with_capacity(count);
        let mut pos = start;
        while pos < start + count {
            let block = self.block(pos / BLOCK)?;
            let from = pos % BLOCK;
            let take = (BLOCK - from).min(start + count - pos);
            out.extend_from_slice(&block[from..from + take]);
            pos += take;
        }
        Ok(out)
    }

    fn lexicon_cache(&self) -> Result<&Lexicon> {
        if let Some(l) = self.lexicon.get() {
            return Ok(l);
        }
        let ids: Vec<u32> = (0..self.lexicon_len as u32).collect();
        let strings = self.client().strings(&self.corpus, &self.attr, &ids)?;
        let lookup = strings
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        Ok(self.lexicon.get_or_init(|| Lexicon { strings, lookup }))
    }

    pub fn id_to_str(&self, id: u32) -> Result<String> {
        Ok(self.lexicon_cache()?.strings[id as usize].clone())
    }

    pub fn str_to_id(&self, value: &str) -> Result<Option<u32>> {
        Ok(self.lexicon_cache()?.lookup.get(value).copied())
    }

    pub fn lexicon(&self) -> Result<Vec<String>> {
        Ok(self.lexicon_cache()?.strings.clone())
    }

    pub fn positions(&self, id: u32) -> Result<Vec<u32>> {
        if let Some(p) = self.positions.lock().unwrap_or_else(|e| e.into_inner()).get(&id) {
            return Ok(p.to_vec());
        }
        let list = Arc::new(self.client().positions(&self.corpus, &self.attr, id)?);
        self.positions
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id, list.clone());
        Ok(list.to_vec())
    }
}
