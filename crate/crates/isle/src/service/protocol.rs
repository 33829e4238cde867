//! Request/response framing.
//!
//! Request:  magic "ISLE" | version u8 | opcode u8 | asset_id_len u16 BE |
//!           asset_id bytes | d i8   (d = -1 means the full stream; it is
//!           carried but ignored for LIST)
//! Response: magic "ISLE" | version u8 | status u8 | payload_len u64 BE |
//!           payload

use std::io::{Read, Write};

use super::ServiceError;

pub const WIRE_MAGIC: [u8; 4] = *b"ISLE";
pub const WIRE_VERSION: u8 = 1;
/// Fixed response framing cost: magic + version + status + payload_len.
pub const RESPONSE_FRAME_OVERHEAD: u64 = 14;
/// Upper bound a client will accept for one response payload.
pub const MAX_RESPONSE_PAYLOAD: u64 = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Opcode {
    List = 0x01,
    Head = 0x02,
    Fetch = 0x03,
}

impl TryFrom<u8> for Opcode {
    type Error = ServiceError;
    fn try_from(b: u8) -> Result<Self, ServiceError> {
        match b {
            0x01 => Ok(Opcode::List),
            0x02 => Ok(Opcode::Head),
            0x03 => Ok(Opcode::Fetch),
            other => Err(ServiceError::BadOpcode(other)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Status {
    Ok = 0,
    NotFound = 1,
    BadRequest = 2,
    /// Requested decomposition exceeds the stream's level count.
    Range = 3,
}

impl TryFrom<u8> for Status {
    type Error = ServiceError;
    fn try_from(b: u8) -> Result<Self, ServiceError> {
        match b {
            0 => Ok(Status::Ok),
            1 => Ok(Status::NotFound),
            2 => Ok(Status::BadRequest),
            3 => Ok(Status::Range),
            other => Err(ServiceError::BadStatus(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub opcode: Opcode,
    pub asset_id: String,
    /// Requested decomposition; -1 selects the full stream.
    pub d: i8,
}

impl Request {
    pub fn list() -> Self {
        Self { opcode: Opcode::List, asset_id: String::new(), d: -1 }
    }

    pub fn head(asset_id: &str) -> Self {
        Self { opcode: Opcode::Head, asset_id: asset_id.to_owned(), d: -1 }
    }

    pub fn fetch(asset_id: &str, d: i8) -> Self {
        Self { opcode: Opcode::Fetch, asset_id: asset_id.to_owned(), d }
    }

    pub fn encode(&self) -> Vec<u8> {
        let id = self.asset_id.as_bytes();
        debug_assert!(id.len() <= u16::MAX as usize);
        let mut out = Vec::with_capacity(9 + id.len());
        out.extend_from_slice(&WIRE_MAGIC);
        out.push(WIRE_VERSION);
        out.push(self.opcode as u8);
        out.extend_from_slice(&(id.len() as u16).to_be_bytes());
        out.extend_from_slice(id);
        out.push(self.d as u8);
        out
    }

    /// Parse a complete request frame; the buffer must hold exactly one.
    pub fn decode(bytes: &[u8]) -> Result<Self, ServiceError> {
        if bytes.len() < 8 {
            return Err(ServiceError::FrameLength { expected: 8, actual: bytes.len() });
        }
        if bytes[..4] != WIRE_MAGIC {
            return Err(ServiceError::BadMagic);
        }
        if bytes[4] != WIRE_VERSION {
            return Err(ServiceError::BadVersion(bytes[4]));
        }
        let opcode = Opcode::try_from(bytes[5])?;
        let id_len = u16::from_be_bytes([bytes[6], bytes[7]]) as usize;
        let expected = 9 + id_len;
        if bytes.len() != expected {
            return Err(ServiceError::FrameLength { expected, actual: bytes.len() });
        }
        let asset_id = std::str::from_utf8(&bytes[8..8 + id_len])
            .map_err(|_| ServiceError::BadUtf8)?
            .to_owned();
        let d = bytes[8 + id_len] as i8;
        Self::validate(opcode, asset_id, d)
    }

    fn validate(opcode: Opcode, asset_id: String, d: i8) -> Result<Self, ServiceError> {
        if d < -1 {
            return Err(ServiceError::BadD(d));
        }
        if asset_id.is_empty() && opcode != Opcode::List {
            return Err(ServiceError::EmptyAssetId);
        }
        Ok(Self { opcode, asset_id, d })
    }

    /// Read one frame off a stream. `Ok(None)` on clean end-of-stream.
    pub fn read_from(r: &mut impl Read) -> Result<Option<Self>, ServiceError> {
        let mut fixed = [0u8; 8];
        match read_exact_or_eof(r, &mut fixed)? {
            ReadOutcome::Eof => return Ok(None),
            ReadOutcome::Full => {}
        }
        if fixed[..4] != WIRE_MAGIC {
            return Err(ServiceError::BadMagic);
        }
        if fixed[4] != WIRE_VERSION {
            return Err(ServiceError::BadVersion(fixed[4]));
        }
        let opcode = Opcode::try_from(fixed[5])?;
        let id_len = u16::from_be_bytes([fixed[6], fixed[7]]) as usize;
        let mut rest = vec![0u8; id_len + 1];
        r.read_exact(&mut rest)?;
        let asset_id =
            std::str::from_utf8(&rest[..id_len]).map_err(|_| ServiceError::BadUtf8)?.to_owned();
        let d = rest[id_len] as i8;
        Self::validate(opcode, asset_id, d).map(Some)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: Status,
    pub payload: Vec<u8>,
}

impl Response {
    pub fn new(status: Status, payload: Vec<u8>) -> Self {
        Self { status, payload }
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<(), ServiceError> {
        w.write_all(&WIRE_MAGIC)?;
        w.write_all(&[WIRE_VERSION, self.status as u8])?;
        w.write_all(&(self.payload.len() as u64).to_be_bytes())?;
        w.write_all(&self.payload)?;
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(RESPONSE_FRAME_OVERHEAD as usize + self.payload.len());
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    /// Parse a complete response frame; the buffer must hold exactly one.
    pub fn decode(bytes: &[u8]) -> Result<Self, ServiceError> {
        if bytes.len() < RESPONSE_FRAME_OVERHEAD as usize {
            return Err(ServiceError::FrameLength {
                expected: RESPONSE_FRAME_OVERHEAD as usize,
                actual: bytes.len(),
            });
        }
        if bytes[..4] != WIRE_MAGIC {
            return Err(ServiceError::BadMagic);
        }
        if bytes[4] != WIRE_VERSION {
            return Err(ServiceError::BadVersion(bytes[4]));
        }
        let status = Status::try_from(bytes[5])?;
        let len = u64::from_be_bytes(bytes[6..14].try_into().unwrap());
        if len > MAX_RESPONSE_PAYLOAD {
            return Err(ServiceError::PayloadTooLarge(len));
        }
        let expected = RESPONSE_FRAME_OVERHEAD as usize + len as usize;
        if bytes.len() != expected {
            return Err(ServiceError::FrameLength { expected, actual: bytes.len() });
        }
        Ok(Self { status, payload: bytes[14..].to_vec() })
    }

    /// Read one frame off a stream.
    pub fn read_from(r: &mut impl Read) -> Result<Self, ServiceError> {
        let mut fixed = [0u8; 14];
        r.read_exact(&mut fixed)?;
        if fixed[..4] != WIRE_MAGIC {
            return Err(ServiceError::BadMagic);
        }
        if fixed[4] != WIRE_VERSION {
            return Err(ServiceError::BadVersion(fixed[4]));
        }
        let status = Status::try_from(fixed[5])?;
        let len = u64::from_be_bytes(fixed[6..14].try_into().unwrap());
        if len > MAX_RESPONSE_PAYLOAD {
            return Err(ServiceError::PayloadTooLarge(len));
        }
        let mut payload = vec![0u8; len as usize];
        r.read_exact(&mut payload)?;
        Ok(Self { status, payload })
    }

    /// Total bytes this frame occupies on the wire.
    pub fn wire_len(&self) -> u64 {
        RESPONSE_FRAME_OVERHEAD + self.payload.len() as u64
    }
}

enum ReadOutcome {
    Full,
    Eof,
}

/// read_exact, except a clean EOF before the first byte is not an error.
fn read_exact_or_eof(r: &mut impl Read, buf: &mut [u8]) -> Result<ReadOutcome, ServiceError> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => {
                if filled == 0 {
                    return Ok(ReadOutcome::Eof);
                }
                return Err(ServiceError::Io(std::io::Error::new(
                    std::io::ErrorKind::UnexpectedEof,
                    "connection closed mid-frame",
                )));
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(ServiceError::Io(e)),
        }
    }
    Ok(ReadOutcome::Full)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_roundtrip() {
        for req in [
            Request::list(),
            Request::head("chest-001"),
            Request::fetch("chest-001", 3),
            Request::fetch("x", -1),
        ] {
            let bytes = req.encode();
            assert_eq!(Request::decode(&bytes).unwrap(), req);
            let mut cursor = std::io::Cursor::new(bytes);
            assert_eq!(Request::read_from(&mut cursor).unwrap(), Some(req));
        }
    }

    #[test]
    fn request_rejections() {
        assert!(matches!(Request::decode(b"NOPE\x01\x01\x00\x00\xff"), Err(ServiceError::BadMagic)));
        let mut bad_version = Request::list().encode();
        bad_version[4] = 2;
        assert!(matches!(Request::decode(&bad_version), Err(ServiceError::BadVersion(2))));
        let mut bad_opcode = Request::list().encode();
        bad_opcode[5] = 9;
        assert!(matches!(Request::decode(&bad_opcode), Err(ServiceError::BadOpcode(9))));
        // HEAD needs an asset id
        let empty_head = Request { opcode: Opcode::Head, asset_id: String::new(), d: -1 }.encode();
        assert!(matches!(Request::decode(&empty_head), Err(ServiceError::EmptyAssetId)));
        // d below -1
        let bad_d = Request { opcode: Opcode::Fetch, asset_id: "x".into(), d: -2 }.encode();
        assert!(matches!(Request::decode(&bad_d), Err(ServiceError::BadD(-2))));
        // length mismatch
        let mut short = Request::fetch("abc", 0).encode();
        short.pop();
        assert!(matches!(Request::decode(&short), Err(ServiceError::FrameLength { .. })));
    }

    #[test]
    fn response_roundtrip_and_overhead() {
        let resp = Response::new(Status::Ok, vec![1, 2, 3]);
        let bytes = resp.encode();
        assert_eq!(bytes.len() as u64, resp.wire_len());
        assert_eq!(bytes.len(), 14 + 3);
        assert_eq!(Response::decode(&bytes).unwrap(), resp);
        let mut cursor = std::io::Cursor::new(bytes);
        assert_eq!(Response::read_from(&mut cursor).unwrap(), resp);
    }

    #[test]
    fn clean_eof_is_none() {
        let mut empty = std::io::Cursor::new(Vec::<u8>::new());
        assert!(Request::read_from(&mut empty).unwrap().is_none());
    }
}
