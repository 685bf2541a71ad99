use std::collections::HashMap;
use std::io::{self, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use super::protocol::{
    read_frame, read_magic, write_frame, Decoder, Encoder, Opcode, Status, Truncated, MAGIC,
    MAX_COUNT,
};
use crate::error::{Error, Result};
use crate::physical::Corpus;

type Corpora = Arc<HashMap<String, Corpus>>;

/// A running server; stops when `stop` is called or the handle is dropped.
#[derive(Debug)]
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    /// Blocks until the server stops.
    pub fn wait(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    fn shutdown(&mut self) {
        if let Some(t) = self.thread.take() {
            self.stop.store(true, Ordering::SeqCst);
            // wake the accept loop
            let _ = TcpStream::connect(self.addr);
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Serves attribute data of `corpora` on `addr`. An empty `token` accepts
/// any HELLO.
pub fn serve(corpora: Vec<Corpus>, addr: &str, token: &str) -> Result<ServerHandle> {
    let listener = TcpListener::bind(addr).map_err(|e| Error::io(format!("binding {addr}"), e))?;
    let local = listener
        .local_addr()
        .map_err(|e| Error::io(format!("binding {addr}"), e))?;
    let corpora: Corpora = Arc::new(
        corpora
            .into_iter()
            .map(|c| (c.id().to_owned(), c))
            .collect(),
    );
    let token: Arc<str> = token.into();
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let thread = thread::spawn(move || {
        for stream in listener.incoming() {
            if flag.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = stream else { continue };
            let (corpora, token) = (corpora.clone(), token.clone());
            thread::spawn(move || {
                let _ = handle_connection(stream, &corpora, &token);
            });
        }
    });
    Ok(ServerHandle {
        addr: local,
        stop,
        thread: Some(thread),
    })
}

fn handle_connection(stream: TcpStream, corpora: &Corpora, token: &str) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    writer.write_all(MAGIC)?;
    writer.flush()?;
    read_magic(&mut reader)?;

    let (op, payload) = read_frame(&mut reader)?;
    let authorized = op == Opcode::Hello as u8
        && std::str::from_utf8(&payload).is_ok_and(|t| token.is_empty() || t == token);
    if !authorized {
        write_frame(&mut writer, Status::AuthFail as u8, &[])?;
        return writer.flush();
    }
    write_frame(&mut writer, Status::Ok as u8, &[])?;
    writer.flush()?;

    loop {
        let (op, payload) = match read_frame(&mut reader) {
            Ok(frame) => frame,
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(()),
            Err(e) => {
                write_frame(&mut writer, Status::Malformed as u8, &[])?;
                writer.flush()?;
                return Err(e);
            }
        };
        let Some(op) = Opcode::from_u8(op) else {
            write_frame(&mut writer, Status::Malformed as u8, &[])?;
            return writer.flush();
        };
        let (status, body) = match answer(corpora, op, &payload) {
            Ok(Ok(body)) => (Status::Ok, body),
            Ok(Err(NotFound)) => (Status::NotFound, Vec::new()),
            Err(Truncated) => (Status::Malformed, Vec::new()),
        };
        write_frame(&mut writer, status as u8, &body)?;
        // flush only when no further pipelined request is buffered
        if reader.buffer().is_empty() {
            writer.flush()?;
        }
    }
}

struct NotFound;

fn answer(
    corpora: &Corpora,
    op: Opcode,
    payload: &[u8],
) -> std::result::Result<std::result::Result<Vec<u8>, NotFound>, Truncated> {
    let mut d = Decoder::new(payload);
    if op == Opcode::Hello {
        return Ok(Ok(Vec::new()));
    }
    let corpus_id = d.str()?;
    let name = d.str()?;
    let args = match op {
        Opcode::GetMeta => Vec::new(),
        Opcode::GetStr | Opcode::GetPositions => vec![d.u32()?],
        Opcode::GetIds | Opcode::GetRegions => vec![d.u32()?, d.u32()?],
        Opcode::Hello => unreachable!(),
    };
    d.end()?;
    if matches!(op, Opcode::GetIds | Opcode::GetRegions) && args[1] > MAX_COUNT {
        return Err(Truncated);
    }
    let Some(corpus) = corpora.get(corpus_id) else {
        return Ok(Err(NotFound));
    };
    Ok(lookup(corpus, op, name, &args).ok_or(NotFound))
}

fn lookup(corpus: &Corpus, op: Opcode, name: &str, args: &[u32]) -> Option<Vec<u8>> {
    if op == Opcode::GetRegions || (op == Opcode::GetMeta && corpus.attribute(name).is_err()) {
        let s = corpus.structure(name).ok()?;
        if op == Opcode::GetMeta {
            let e = Encoder::new().u32(corpus.size() as u32).u32(s.len() as u32);
            return Some(e.finish());
        }
        let (from, count) = (args[0] as usize, args[1] as usize);
        let regions = s.regions().get(from..from.checked_add(count)?.min(s.len()))?;
        let flat: Vec<u32> = regions.iter().flat_map(|&(a, b)| [a, b]).collect();
        return Some(Encoder::new().u32s(&flat).finish());
    }
    let attr = corpus.attribute(name).ok()?;
    let out = match op {
        Opcode::GetMeta => Encoder::new()
            .u32(attr.size() as u32)
            .u32(attr.lexicon_len().ok()? as u32),
        Opcode::GetIds => {
            let ids = attr.ids(args[0] as usize, args[1] as usize).ok()?;
            Encoder::new().u32s(&ids)
        }
        Opcode::GetStr => Encoder::new().str(&attr.id_to_str(args[0]).ok()?),
        Opcode::GetPositions => Encoder::new().u32s(&attr.positions(args[0]).ok()?),
        Opcode::Hello | Opcode::GetRegions => unreachable!(),
    };
    Some(out.finish())
}
