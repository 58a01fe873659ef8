//! Session-prefixed signatures, key leakage and the restricted oracle.

use abg_core::auth::{KeyRegistry, PlayerId, PrefixedMessage, RestrictedOracle, SessionId, Signer};

fn main() -> abg_core::Result<()> {
    let mut reg = KeyRegistry::gen_keys(3)?;
    let (e1, e2) = (SessionId::new("E1"), SessionId::new("E2"));

    let sig = reg.sign(PlayerId(0), &e1, b"attack")?;
    println!("p0 signs 'attack' in E1: {}", sig.token_hex());
    println!(
        "  verifies in E1: {}",
        reg.verify(PlayerId(0), &e1, b"attack", &sig)
    );
    println!(
        "  verifies in E2: {}",
        reg.verify(PlayerId(0), &e2, b"attack", &sig)
    );

    // nothing leaked yet
    println!(
        "forge p1 before leak: {:?}",
        reg.forger().sign(PlayerId(1), &e2, b"retreat").err()
    );
    reg.leak_key(PlayerId(1))?;
    let forged = reg.forger().sign(PlayerId(1), &e2, b"retreat")?;
    println!(
        "forge p1 after leak verifies: {}",
        reg.verify(PlayerId(1), &e2, b"retreat", &forged)
    );

    // signs for anyone, in any session but E1
    let m = PrefixedMessage::new(e2.clone(), b"retreat".to_vec());
    println!(
        "oracle on E2: {}",
        reg.oracle_sign_not_id(PlayerId(2), &e1, &m)?.is_some()
    );
    let oracle = RestrictedOracle::new(&reg, e1.clone());
    println!(
        "oracle on E1: {:?}",
        oracle.sign(PlayerId(2), &e1, b"attack").err()
    );
    println!(
        "queries {}, refusals {}",
        oracle.queries(),
        oracle.refusals()
    );
    Ok(())
}
