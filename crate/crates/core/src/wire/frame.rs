//! Byte layout of the two messages exchanged over the insecure channel.
//!
//! ```text
//! frame    = msg_type:u8 | version:u8 | payload_len:u32be | payload
//! login    = cid[32] | n_i[32] | c_i[32] | t:u64be          (msg_type 0x01)
//! response = status:u8 | recovered_hpw[32]                   (msg_type 0x02)
//! ```

use thiserror::Error;

use crate::bits::{Bits, Timestamp, K_BYTES};
use crate::protocol::{AuthDecision, AuthReason, LoginRequest};

pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 6;
pub const MAX_PAYLOAD: usize = 4096;
pub const LOGIN_PAYLOAD_LEN: usize = 3 * K_BYTES + 8;
pub const RESPONSE_PAYLOAD_LEN: usize = 1 + K_BYTES;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum MsgType {
    LoginRequest = 0x01,
    AuthResponse = 0x02,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("unexpected message type 0x{0:02x}")]
    BadType(u8),
}

impl WireError {
    pub fn code(&self) -> &'static str {
        match self {
            WireError::MalformedFrame(_) => "MALFORMED_FRAME",
            WireError::BadType(_) => "BAD_TYPE",
        }
    }
}

fn malformed(msg: impl Into<String>) -> WireError {
    WireError::MalformedFrame(msg.into())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: u8,
    pub version: u8,
    pub payload: Vec<u8>,
}

/// Header fields once checked: message type and declared payload length.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Header {
    pub msg_type: u8,
    pub payload_len: usize,
}

impl Header {
    pub fn parse(bytes: &[u8; HEADER_LEN]) -> Result<Header, WireError> {
        if bytes[1] != VERSION {
            return Err(malformed(format!("version 0x{:02x}", bytes[1])));
        }
        let len = u32::from_be_bytes([bytes[2], bytes[3], bytes[4], bytes[5]]) as usize;
        if len > MAX_PAYLOAD {
            return Err(malformed(format!(
                "payload length {len} exceeds {MAX_PAYLOAD}"
            )));
        }
        Ok(Header {
            msg_type: bytes[0],
            payload_len: len,
        })
    }
}

impl Frame {
    pub fn new(msg_type: MsgType, payload: Vec<u8>) -> Frame {
        Frame {
            msg_type: msg_type as u8,
            version: VERSION,
            payload,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        assert!(self.payload.len() <= MAX_PAYLOAD);
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.push(self.msg_type);
        out.push(self.version);
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Parses exactly one frame occupying all of `bytes`.
    pub fn decode(bytes: &[u8]) -> Result<Frame, WireError> {
        let header: &[u8; HEADER_LEN] = bytes
            .get(..HEADER_LEN)
            .and_then(|h| h.try_into().ok())
            .ok_or_else(|| malformed(format!("{} bytes is shorter than a header", bytes.len())))?;
        let header = Header::parse(header)?;
        let body = &bytes[HEADER_LEN..];
        if body.len() != header.payload_len {
            return Err(malformed(format!(
                "declared payload {} bytes, got {}",
                header.payload_len,
                body.len()
            )));
        }
        Ok(Frame {
            msg_type: header.msg_type,
            version: VERSION,
            payload: body.to_vec(),
        })
    }

    fn expect_type(&self, want: MsgType) -> Result<(), WireError> {
        if self.msg_type == want as u8 {
            Ok(())
        } else {
            Err(WireError::BadType(self.msg_type))
        }
    }
}

pub fn encode_login_request(req: &LoginRequest) -> Vec<u8> {
    let mut payload = Vec::with_capacity(LOGIN_PAYLOAD_LEN);
    payload.extend_from_slice(req.cid.as_bytes());
    payload.extend_from_slice(req.n_i.as_bytes());
    payload.extend_from_slice(req.c_i.as_bytes());
    payload.extend_from_slice(&req.t.secs().to_be_bytes());
    Frame::new(MsgType::LoginRequest, payload).encode()
}

pub fn decode_login_request(bytes: &[u8]) -> Result<LoginRequest, WireError> {
    let frame = Frame::decode(bytes)?;
    frame.expect_type(MsgType::LoginRequest)?;
    let p = &frame.payload;
    if p.len() != LOGIN_PAYLOAD_LEN {
        return Err(malformed(format!(
            "login payload must be {LOGIN_PAYLOAD_LEN} bytes, got {}",
            p.len()
        )));
    }
    let field =
        |i: usize| Bits::from_slice(&p[i * K_BYTES..(i + 1) * K_BYTES]).expect("sliced to width");
    let t = u64::from_be_bytes(p[3 * K_BYTES..].try_into().expect("8 bytes"));
    Ok(LoginRequest {
        cid: field(0),
        n_i: field(1),
        c_i: field(2),
        t: Timestamp::from_secs(t),
    })
}

pub const fn status_byte(reason: AuthReason) -> u8 {
    match reason {
        AuthReason::Ok => 0x00,
        AuthReason::StaleTimestamp => 0x01,
        AuthReason::FutureTimestamp => 0x02,
        AuthReason::CheckFailed => 0x03,
    }
}

pub fn encode_auth_response(decision: &AuthDecision) -> Vec<u8> {
    let mut payload = Vec::with_capacity(RESPONSE_PAYLOAD_LEN);
    payload.push(status_byte(decision.reason));
    payload.extend_from_slice(decision.recovered_hpw.unwrap_or(Bits::ZERO).as_bytes());
    Frame::new(MsgType::AuthResponse, payload).encode()
}

pub fn decode_auth_response(bytes: &[u8]) -> Result<AuthDecision, WireError> {
    let frame = Frame::decode(bytes)?;
    frame.expect_type(MsgType::AuthResponse)?;
    let p = &frame.payload;
    if p.len() != RESPONSE_PAYLOAD_LEN {
        return Err(malformed(format!(
            "response payload must be {RESPONSE_PAYLOAD_LEN} bytes, got {}",
            p.len()
        )));
    }
    let hpw = Bits::from_slice(&p[1..]).expect("sliced to width");
    let (reason, recovered_hpw) = match p[0] {
        0x00 => (AuthReason::Ok, Some(hpw)),
        0x03 => (AuthReason::CheckFailed, Some(hpw)),
        s @ (0x01 | 0x02) => {
            if hpw != Bits::ZERO {
                return Err(malformed("stale/future response must carry a zero hash"));
            }
            let reason = if s == 0x01 {
                AuthReason::StaleTimestamp
            } else {
                AuthReason::FutureTimestamp
            };
            (reason, None)
        }
        s => return Err(malformed(format!("unknown status 0x{s:02x}"))),
    };
    Ok(AuthDecision {
        reason,
        recovered_hpw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::hash;
    use proptest::prelude::*;

    fn sample() -> LoginRequest {
        LoginRequest {
            cid: hash(b"cid"),
            n_i: hash(b"n"),
            c_i: hash(b"c"),
            t: Timestamp::from_secs(0x0102_0304_0506_0708),
        }
    }

    #[test]
    fn login_layout() {
        let bytes = encode_login_request(&sample());
        assert_eq!(LOGIN_PAYLOAD_LEN, 104);
        assert_eq!(bytes.len(), HEADER_LEN + 104);
        assert_eq!(&bytes[..6], &[0x01, 0x01, 0x00, 0x00, 0x00, 0x68]);
        assert_eq!(&bytes[6..38], hash(b"cid").as_bytes());
        assert_eq!(&bytes[102..], &[1, 2, 3, 4, 5, 6, 7, 8]);
        assert_eq!(decode_login_request(&bytes).unwrap(), sample());
    }

    #[test]
    fn truncated_and_trailing_rejected() {
        let bytes = encode_login_request(&sample());
        for cut in [0, 3, 6, 50, bytes.len() - 1] {
            assert!(matches!(
                decode_login_request(&bytes[..cut]),
                Err(WireError::MalformedFrame(_))
            ));
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(
            decode_login_request(&long),
            Err(WireError::MalformedFrame(_))
        ));
    }

    #[test]
    fn bad_version_rejected() {
        let mut bytes = encode_login_request(&sample());
        bytes[1] = 0x02;
        assert!(matches!(
            decode_login_request(&bytes),
            Err(WireError::MalformedFrame(_))
        ));
    }

    #[test]
    fn bad_type_rejected() {
        let mut bytes = encode_login_request(&sample());
        bytes[0] = 0x02;
        assert_eq!(decode_login_request(&bytes), Err(WireError::BadType(0x02)));
        bytes[0] = 0x7f;
        assert_eq!(decode_login_request(&bytes), Err(WireError::BadType(0x7f)));
    }

    #[test]
    fn oversized_length_rejected() {
        let mut bytes = vec![0x01, 0x01];
        bytes.extend_from_slice(&4097u32.to_be_bytes());
        bytes.resize(HEADER_LEN + 4097, 0);
        assert!(matches!(
            decode_login_request(&bytes),
            Err(WireError::MalformedFrame(_))
        ));
    }

    #[test]
    fn wrong_payload_length_for_login() {
        let bytes = Frame::new(MsgType::LoginRequest, vec![0; 103]).encode();
        assert!(matches!(
            decode_login_request(&bytes),
            Err(WireError::MalformedFrame(_))
        ));
    }

    #[test]
    fn response_round_trip() {
        let cases = [
            AuthDecision {
                reason: AuthReason::Ok,
                recovered_hpw: Some(hash(b"pw")),
            },
            AuthDecision {
                reason: AuthReason::CheckFailed,
                recovered_hpw: Some(hash(b"pw")),
            },
            AuthDecision {
                reason: AuthReason::StaleTimestamp,
                recovered_hpw: None,
            },
            AuthDecision {
                reason: AuthReason::FutureTimestamp,
                recovered_hpw: None,
            },
        ];
        for d in cases {
            let bytes = encode_auth_response(&d);
            assert_eq!(bytes.len(), HEADER_LEN + 33);
            assert_eq!(bytes[6], status_byte(d.reason));
            assert_eq!(decode_auth_response(&bytes).unwrap(), d);
        }
    }

    #[test]
    fn response_rejects_unknown_status() {
        let mut payload = vec![0x04];
        payload.extend_from_slice(&[0; 32]);
        let bytes = Frame::new(MsgType::AuthResponse, payload).encode();
        assert!(decode_auth_response(&bytes).is_err());
        let login = encode_login_request(&sample());
        assert_eq!(decode_auth_response(&login), Err(WireError::BadType(0x01)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn login_round_trip(cid in any::<[u8; 32]>(), n in any::<[u8; 32]>(), c in any::<[u8; 32]>(), t in any::<u64>()) {
            let req = LoginRequest {
                cid: Bits::from_bytes(cid),
                n_i: Bits::from_bytes(n),
                c_i: Bits::from_bytes(c),
                t: Timestamp::from_secs(t),
            };
            prop_assert_eq!(decode_login_request(&encode_login_request(&req)), Ok(req));
        }

        #[test]
        fn header_mutations_rejected(pos in 1usize..HEADER_LEN, delta in 1u8..=255) {
            let mut bytes = encode_login_request(&sample());
            bytes[pos] = bytes[pos].wrapping_add(delta);
            prop_assert!(decode_login_request(&bytes).is_err());
        }
    }
}
