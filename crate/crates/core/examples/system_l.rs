//! The six-node system L and its view pairings with the scripted runs.

use abg_core::analysis::{check_pairing, l_topology, run_l, run_n, LNode, VIEW_PAIRINGS};

fn main() -> abg_core::Result<()> {
    let top = l_topology();
    for node in LNode::ALL {
        let ins: Vec<String> = top
            .in_neighbours(node.index())
            .iter()
            .map(|i| LNode::ALL[*i].to_string())
            .collect();
        println!("{node:>2} hears from {}", ins.join(", "));
    }
    let l = run_l(2)?;
    for node in LNode::ALL {
        println!("{node:>2} outputs {:?}", l.output(node));
    }
    for (node, a, p) in VIEW_PAIRINGS {
        let n = run_n(a, 2)?;
        println!(
            "{node:>2} vs {} {p}: {:?}",
            a.name(),
            check_pairing(&l, node, &n, p).map_or("equal".into(), |d| format!("{d:?}"))
        );
    }
    Ok(())
}
