//! TCP exchange of corpus data: a server for local attributes and a client
//! attribute that behaves like local storage.

mod client;
pub mod protocol;
mod server;

pub use client::{fetch_regions, Client, RemoteAttribute};
pub use protocol::{Opcode, Status};
pub use server::{serve, ServerHandle};

#[cfg(test)]
mod tests {
    use std::io::{Read, Write};
    use std::net::TcpStream;

    use super::protocol::{read_frame, write_frame, Encoder, MAGIC};
    use super::*;
    use crate::encoder::VerticalDocument;
    use crate::error::Error;
    use crate::physical::Corpus;

    fn tiny() -> Corpus {
        VerticalDocument::parse(
            "<s>\nthe\tDT\ncat\tNN\nsat\tVBD\n</s>\n<s>\nthe\tDT\ndogs\tNNS\nsat\tVBD\n</s>\n",
            &["word", "pos"],
            &["s"],
        )
        .unwrap()
        .to_corpus("tiny")
        .unwrap()
    }

    fn raw(addr: std::net::SocketAddr, token: &str) -> TcpStream {
        let mut s = TcpStream::connect(addr).unwrap();
        s.write_all(MAGIC).unwrap();
        write_frame(&mut s, Opcode::Hello as u8, token.as_bytes()).unwrap();
        let mut m = [0u8; 4];
        s.read_exact(&mut m).unwrap();
        assert_eq!(&m, MAGIC);
        s
    }

    #[test]
    fn meta_ids_and_strings() {
        let server = serve(vec![tiny()], "127.0.0.1:0", "secret").unwrap();
        let addr = server.local_addr().to_string();
        let mut c = Client::connect(&addr, "secret").unwrap();
        assert_eq!(c.meta("tiny", "word").unwrap(), (6, 4));
        assert_eq!(c.meta("tiny", "s").unwrap(), (6, 2));
        assert_eq!(c.ids("tiny", "word", 0, 6).unwrap(), [0, 1, 2, 0, 3, 2]);
        assert_eq!(c.strings("tiny", "word", &[3, 1]).unwrap(), ["dogs", "cat"]);
        assert_eq!(c.positions("tiny", "word", 0).unwrap(), [0, 3]);
        assert_eq!(c.regions("tiny", "s", 0, 10).unwrap(), [(0, 2), (3, 5)]);
        assert_eq!(fetch_regions(&addr, "secret", "tiny", "s").unwrap(), [(0, 2), (3, 5)]);
        assert!(c.ids("tiny", "word", 4, 3).is_err());
        assert!(c.meta("nope", "word").is_err());
        // the connection survives a not-found reply
        assert_eq!(c.meta("tiny", "pos").unwrap(), (6, 4));
        server.stop();
    }

    #[test]
    fn wrong_token_is_refused() {
        let server = serve(vec![tiny()], "127.0.0.1:0", "secret").unwrap();
        let mut s = raw(server.local_addr(), "guess");
        let (status, _) = read_frame(&mut s).unwrap();
        assert_eq!(status, Status::AuthFail as u8);
        let mut rest = Vec::new();
        assert_eq!(s.read_to_end(&mut rest).unwrap(), 0);
        let err = Client::connect(&server.local_addr().to_string(), "guess").unwrap_err();
        assert!(matches!(err, Error::AuthFailed(_)));
    }

    #[test]
    fn first_frame_must_be_hello() {
        let server = serve(vec![tiny()], "127.0.0.1:0", "").unwrap();
        let mut s = TcpStream::connect(server.local_addr()).unwrap();
        s.write_all(MAGIC).unwrap();
        let payload = Encoder::new().str("tiny").str("word").finish();
        write_frame(&mut s, Opcode::GetMeta as u8, &payload).unwrap();
        let mut m = [0u8; 4];
        s.read_exact(&mut m).unwrap();
        assert_eq!(read_frame(&mut s).unwrap().0, Status::AuthFail as u8);
    }

    #[test]
    fn unknown_opcode_and_oversized_frames() {
        let server = serve(vec![tiny()], "127.0.0.1:0", "").unwrap();
        let mut s = raw(server.local_addr(), "");
        assert_eq!(read_frame(&mut s).unwrap().0, Status::Ok as u8);
        write_frame(&mut s, 0x7f, b"").unwrap();
        assert_eq!(read_frame(&mut s).unwrap().0, Status::Malformed as u8);

        let mut s = raw(server.local_addr(), "");
        read_frame(&mut s).unwrap();
        s.write_all(&[0x02, 0xff, 0xff, 0xff, 0x7f]).unwrap();
        assert_eq!(read_frame(&mut s).unwrap().0, Status::Malformed as u8);

        // server still answers new connections
        let mut c = Client::connect(&server.local_addr().to_string(), "").unwrap();
        assert_eq!(c.meta("tiny", "word").unwrap(), (6, 4));
    }

    #[test]
    fn unreachable_server() {
        let addr = {
            let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
            l.local_addr().unwrap().to_string()
        };
        let err = RemoteAttribute::connect(&addr, "", "tiny", "word").unwrap_err();
        assert!(matches!(err, Error::RemoteUnreachable { addr: a, .. } if a == addr));
    }

    #[test]
    fn remote_attribute_matches_local() {
        let local = tiny();
        let server = serve(vec![tiny()], "127.0.0.1:0", "").unwrap();
        let addr = server.local_addr().to_string();
        for name in ["word", "pos"] {
            let r = RemoteAttribute::connect(&addr, "", "tiny", name).unwrap();
            let l = local.attribute(name).unwrap();
            assert_eq!(r.size(), l.size());
            assert_eq!(r.lexicon().unwrap(), l.lexicon().unwrap().to_vec());
            assert_eq!(r.ids(1, 5).unwrap(), l.ids(1, 5).unwrap().to_vec());
            for id in 0..l.lexicon_len().unwrap() as u32 {
                assert_eq!(r.positions(id).unwrap(), l.positions(id).unwrap().to_vec());
                let s = l.id_to_str(id).unwrap();
                assert_eq!(r.str_to_id(&s).unwrap(), Some(id));
            }
        }
    }
}
