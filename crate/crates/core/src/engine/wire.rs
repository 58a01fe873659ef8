//! Canonical byte encoding of protocol payloads.
//!
//! ```text
//! value  = 0x01 | lp(session) | value:u8 | sig
//! relay  = 0x02 | lp(session) | value:u8 | path_len:u16 | id:u16 * path_len | sig(origin) | sig * path_len
//! sig    = issuer:u16 | lp(session) | token[32]
//! lp(x)  = len:u32 | bytes
//! ```
//! All integers are big-endian. Decoding rejects trailing bytes.

use serde::{Deserialize, Serialize};

use crate::auth::{PlayerId, SessionId, Signature};
use crate::eig::{SignedRelay, Value};
use crate::error::{Error, Result};

const TAG_VALUE: u8 = 0x01;
const TAG_RELAY: u8 = 0x02;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Payload {
    /// The General's round-0 message.
    Value {
        session: SessionId,
        value: Value,
        sig: Signature,
    },
    Relay(SignedRelay),
}

impl Payload {
    pub fn session(&self) -> &SessionId {
        match self {
            Payload::Value { session, .. } => session,
            Payload::Relay(r) => &r.session,
        }
    }

    /// All signature tokens carried, in encoding order.
    pub fn signatures(&self) -> Vec<&Signature> {
        match self {
            Payload::Value { sig, .. } => vec![sig],
            Payload::Relay(r) => std::iter::once(&r.origin).chain(&r.sigs).collect(),
        }
    }
}

fn put_lp(out: &mut Vec<u8>, b: &[u8]) -> Result<()> {
    let len = u32::try_from(b.len()).map_err(|_| Error::Malformed("field too long".into()))?;
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(b);
    Ok(())
}

fn put_sig(out: &mut Vec<u8>, s: &Signature) -> Result<()> {
    out.extend_from_slice(&s.issuer.0.to_be_bytes());
    put_lp(out, s.session.as_str().as_bytes())?;
    out.extend_from_slice(&s.token);
    Ok(())
}

/// Canonical serialization. Fails on payloads that violate the relay shape.
pub fn encode(p: &Payload) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    match p {
        Payload::Value {
            session,
            value,
            sig,
        } => {
            out.push(TAG_VALUE);
            put_lp(&mut out, session.as_str().as_bytes())?;
            out.push(value.as_u8());
            put_sig(&mut out, sig)?;
        }
        Payload::Relay(r) => {
            if r.sigs.len() != r.path.len() {
                return Err(Error::Malformed(format!(
                    "{} signatures for a path of {}",
                    r.sigs.len(),
                    r.path.len()
                )));
            }
            let len = u16::try_from(r.path.len())
                .map_err(|_| Error::Malformed("path too long".into()))?;
            out.push(TAG_RELAY);
            put_lp(&mut out, r.session.as_str().as_bytes())?;
            out.push(r.value.as_u8());
            out.extend_from_slice(&len.to_be_bytes());
            for id in &r.path {
                out.extend_from_slice(&id.0.to_be_bytes());
            }
            put_sig(&mut out, &r.origin)?;
            for s in &r.sigs {
                put_sig(&mut out, s)?;
            }
        }
    }
    Ok(out)
}

pub fn canonical_serialize(p: &Payload) -> Result<Vec<u8>> {
    encode(p)
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.buf.len() < k {
            return Err(Error::Malformed("truncated".into()));
        }
        let (head, tail) = self.buf.split_at(k);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn session(&mut self) -> Result<SessionId> {
        let len = self.u32()? as usize;
        let b = self.take(len)?;
        let s =
            std::str::from_utf8(b).map_err(|_| Error::Malformed("session is not utf-8".into()))?;
        Ok(SessionId::new(s))
    }

    fn value(&mut self) -> Result<Value> {
        let b = self.u8()?;
        Value::from_u8(b).ok_or_else(|| Error::Malformed(format!("value byte {b}")))
    }

    fn sig(&mut self) -> Result<Signature> {
        let issuer = PlayerId(self.u16()?);
        let session = self.session()?;
        let token: [u8; 32] = self.take(32)?.try_into().expect("32 bytes");
        Ok(Signature {
            issuer,
            session,
            token,
        })
    }
}

pub fn decode(bytes: &[u8]) -> Result<Payload> {
    let mut r = Reader { buf: bytes };
    let p = match r.u8()? {
        TAG_VALUE => {
            let session = r.session()?;
            let value = r.value()?;
            let sig = r.sig()?;
            Payload::Value {
                session,
                value,
                sig,
            }
        }
        TAG_RELAY => {
            let session = r.session()?;
            let value = r.value()?;
            let len = r.u16()? as usize;
            let path = (0..len)
                .map(|_| r.u16().map(PlayerId))
                .collect::<Result<Vec<_>>>()?;
            let origin = r.sig()?;
            let sigs = (0..len).map(|_| r.sig()).collect::<Result<Vec<_>>>()?;
            Payload::Relay(SignedRelay {
                session,
                value,
                path,
                origin,
                sigs,
            })
        }
        tag => return Err(Error::Malformed(format!("unknown tag {tag:#04x}"))),
    };
    if !r.buf.is_empty() {
        return Err(Error::Malformed(format!("{} trailing bytes", r.buf.len())));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_sig() -> impl Strategy<Value = Signature> {
        (0u16..6, "[A-Z][0-9]{0,2}", any::<[u8; 32]>()).prop_map(|(i, s, token)| Signature {
            issuer: PlayerId(i),
            session: SessionId::new(s),
            token,
        })
    }

    fn arb_value() -> impl Strategy<Value = Value> {
        any::<bool>().prop_map(|b| if b { Value::One } else { Value::Zero })
    }

    fn arb_payload() -> impl Strategy<Value = Payload> {
        let value = ("[A-Z][0-9]{0,2}", arb_value(), arb_sig()).prop_map(|(s, value, sig)| {
            Payload::Value {
                session: SessionId::new(s),
                value,
                sig,
            }
        });
        let relay = (
            "[A-Z][0-9]{0,2}",
            arb_value(),
            proptest::collection::vec((0u16..6, arb_sig()), 0..4),
            arb_sig(),
        )
            .prop_map(|(s, value, chain, origin)| {
                let (path, sigs) = chain.into_iter().map(|(p, s)| (PlayerId(p), s)).unzip();
                Payload::Relay(SignedRelay {
                    session: SessionId::new(s),
                    value,
                    path,
                    origin,
                    sigs,
                })
            });
        prop_oneof![value, relay]
    }

    proptest! {
        #[test]
        fn round_trip(p in arb_payload()) {
            let b = encode(&p).unwrap();
            prop_assert_eq!(decode(&b).unwrap(), p);
        }

        #[test]
        fn injective(a in arb_payload(), b in arb_payload()) {
            if a != b {
                prop_assert_ne!(encode(&a).unwrap(), encode(&b).unwrap());
            }
        }

        #[test]
        fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            if let Ok(p) = decode(&bytes) {
                prop_assert_eq!(encode(&p).unwrap(), bytes);
            }
        }
    }

    #[test]
    fn shape_errors() {
        let sig = Signature {
            issuer: PlayerId(0),
            session: SessionId::new("E1"),
            token: [7; 32],
        };
        let bad = Payload::Relay(SignedRelay {
            session: SessionId::new("E1"),
            value: Value::One,
            path: vec![PlayerId(1)],
            origin: sig.clone(),
            sigs: vec![],
        });
        assert!(matches!(encode(&bad), Err(Error::Malformed(_))));
        let ok = encode(&Payload::Value {
            session: SessionId::new("E1"),
            value: Value::Zero,
            sig,
        })
        .unwrap();
        let mut trailing = ok.clone();
        trailing.push(0);
        assert!(decode(&trailing).is_err());
        let mut badval = ok.clone();
        badval[7] = 2;
        assert!(decode(&badval).is_err());
        assert!(decode(&[]).is_err());
    }
}
