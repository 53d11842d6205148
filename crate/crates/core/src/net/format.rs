use std::fmt::Write;

use super::{Bag, PetriNet};
use crate::rational::format_rational;

/// Writes `net` in the net-file syntax. Every transition carries its id and
/// the place order is spelled out, so parsing the result gives back `net`.
pub fn serialize_net(net: &PetriNet) -> String {
    let mut out = String::new();
    writeln!(out, "places: {}", net.places().join(" ")).unwrap();
    writeln!(out, "kinetics: {}", net.kinetics()).unwrap();
    let init: Vec<String> = net
        .initial_marking()
        .as_slice()
        .iter()
        .zip(net.places())
        .filter(|(&m, _)| m > 0)
        .map(|(m, p)| format!("{p}={m}"))
        .collect();
    if !init.is_empty() {
        writeln!(out, "init: {}", init.join(" ")).unwrap();
    }
    for t in net.transitions() {
        writeln!(
            out,
            "{}: {} -> {} @ {}",
            t.id,
            term(net, &t.input),
            term(net, &t.output),
            format_rational(&t.rate)
        )
        .unwrap();
    }
    out
}

fn term(net: &PetriNet, bag: &Bag) -> String {
    if bag.is_empty() {
        return "0".into();
    }
    bag.support()
        .map(|p| match bag.get(p) {
            1 => net.places()[p].clone(),
            w => format!("{w}*{}", net.places()[p]),
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::parse_net;

    #[test]
    fn empty_bag_prints_as_zero() {
        let net = parse_net("0 -> p @ 2/3\n").unwrap().net;
        assert!(serialize_net(&net).contains("t1: 0 -> p @ 2/3"));
    }

    #[test]
    fn round_trip_is_identity() {
        let src = "kinetics: mass-action\ninit: p=2\n\
                   t1: 2p -> p + q + r @ 1\nt2: 2q -> 2p @ 0.5\nt3: p + q + r -> 2q @ 7/3\n";
        let net = parse_net(src).unwrap().net;
        let again = parse_net(&serialize_net(&net)).unwrap();
        assert_eq!(again.net, net);
        assert!(again.warnings.is_empty());
    }
}
