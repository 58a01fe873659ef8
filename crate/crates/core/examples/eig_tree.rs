//! Filling an EIG tree by hand, then Prune and the majority decision.

use abg_core::auth::{KeyRegistry, PlayerId, SessionId};
use abg_core::eig::{general_body, relay_body, EigTree, SignedRelay, TreeContext, Value};

fn relay(reg: &KeyRegistry, sid: &SessionId, value: Value, path: &[u16]) -> SignedRelay {
    let path: Vec<PlayerId> = path.iter().map(|p| PlayerId(*p)).collect();
    SignedRelay {
        session: sid.clone(),
        value,
        origin: reg.sign(PlayerId(0), sid, &general_body(value)).unwrap(),
        sigs: (0..path.len())
            .map(|k| {
                reg.sign(path[k], sid, &relay_body(value, &path[..=k]))
                    .unwrap()
            })
            .collect(),
        path,
    }
}

fn main() -> abg_core::Result<()> {
    let sid = SessionId::new("E1");
    let reg = KeyRegistry::gen_keys(4)?;
    let ctx = TreeContext {
        session: sid.clone(),
        general: PlayerId(0),
        me: Some(PlayerId(3)),
    };
    let mut tree = EigTree::new(4, 2)?;

    // round 1: three relays of the General's value
    for (p, v) in [(0, Value::One), (1, Value::One), (2, Value::Zero)] {
        let r = relay(&reg, &sid, v, &[p]);
        println!(
            "[{p}] -> {:?}",
            tree.absorb_one(1, PlayerId(p), &r, &reg, &ctx)
        );
    }
    // round 2: a second value lands in subtree 2
    let r = relay(&reg, &sid, Value::One, &[2, 1]);
    println!(
        "[2,1] -> {:?}",
        tree.absorb_one(2, PlayerId(1), &r, &reg, &ctx)
    );
    // wrong length for the round
    println!(
        "[1] in round 2 -> {:?}",
        tree.absorb_one(
            2,
            PlayerId(1),
            &relay(&reg, &sid, Value::One, &[1]),
            &reg,
            &ctx
        )
    );

    println!("before prune: {:?}", tree.render());
    tree.prune();
    println!(
        "after prune:  {:?}  pruned {:?}",
        tree.render(),
        tree.pruned()
    );
    println!(
        "votes {:?}, decision {:?}",
        tree.votes(),
        tree.decide(Value::Zero)
    );
    Ok(())
}
