//! Network-topology model: per-service protocol assignment, end-to-end rate
//! composition and survivability analysis under node compromise.
//!
//! Two MDI-capable links meeting at a relay form one *virtual* key edge
//! between the outer nodes: the relay only performs the joint measurement
//! and never holds key material, so its compromise does not poison the edge.
//! Plain links chain hop-by-hop through trusted key holders instead.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NodeRole {
    /// Key consumer at the network edge.
    User,
    /// Intermediate node: a trusted relay chains keys hop-by-hop, an
    /// untrusted relay can only host joint measurements.
    Relay,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Node {
    pub name: String,
    pub role: NodeRole,
    pub trusted: bool,
}

impl Node {
    /// Whether the node may hold key material.
    pub fn holds_keys(&self) -> bool {
        self.role == NodeRole::User || self.trusted
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinkCapabilities {
    pub bb84: bool,
    pub mdi: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Link {
    pub a: usize,
    pub b: usize,
    pub length_km: f64,
    pub loss_db_per_km: f64,
    pub capabilities: LinkCapabilities,
}

impl Link {
    pub fn loss_db(&self) -> f64 {
        self.length_km * self.loss_db_per_km
    }
}

/// Traffic class of a service.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Demand {
    /// High security, low bandwidth: routed over measurement-relay paths
    /// only.
    Control,
    /// High bandwidth: routed over the highest-rate available path.
    Data,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Service {
    pub source: String,
    pub destination: String,
    pub demand: Demand,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Topology {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    pub services: Vec<Service>,
}

impl Topology {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, name: &str, role: NodeRole, trusted: bool) -> usize {
        self.nodes.push(Node { name: name.into(), role, trusted });
        self.nodes.len() - 1
    }

    pub fn add_link(
        &mut self,
        a: usize,
        b: usize,
        length_km: f64,
        loss_db_per_km: f64,
        capabilities: LinkCapabilities,
    ) -> usize {
        self.links.push(Link { a, b, length_km, loss_db_per_km, capabilities });
        self.links.len() - 1
    }

    pub fn add_service(&mut self, source: &str, destination: &str, demand: Demand) {
        self.services.push(Service {
            source: source.into(),
            destination: destination.into(),
            demand,
        });
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let mut seen = BTreeMap::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if node.name.is_empty() {
                return Err(Error::Domain("empty node name".into()));
            }
            if seen.insert(node.name.clone(), i).is_some() {
                return Err(Error::Domain(format!("duplicate node name {}", node.name)));
            }
        }
        for link in &self.links {
            if link.a >= self.nodes.len() || link.b >= self.nodes.len() {
                return Err(Error::Domain("link references a missing node".into()));
            }
            if link.a == link.b {
                return Err(Error::Domain(format!(
                    "self-loop on node {}",
                    self.nodes[link.a].name
                )));
            }
            if !(link.length_km > 0.0) {
                return Err(Error::Domain(format!(
                    "link {}-{} needs a positive length",
                    self.nodes[link.a].name, self.nodes[link.b].name
                )));
            }
            if !(link.loss_db_per_km >= 0.0) {
                return Err(Error::Domain(format!(
                    "link {}-{} has negative loss",
                    self.nodes[link.a].name, self.nodes[link.b].name
                )));
            }
            if link.capabilities.mdi
                && self.nodes[link.a].role != NodeRole::Relay
                && self.nodes[link.b].role != NodeRole::Relay
            {
                return Err(Error::Domain(format!(
                    "MDI-capable link {}-{} must terminate at a relay",
                    self.nodes[link.a].name, self.nodes[link.b].name
                )));
            }
        }
        for service in &self.services {
            for name in [&service.source, &service.destination] {
                let idx = self
                    .index_of(name)
                    .ok_or_else(|| Error::Domain(format!("service references unknown node {name}")))?;
                if !self.nodes[idx].holds_keys() {
                    return Err(Error::Domain(format!(
                        "service endpoint {name} cannot hold keys"
                    )));
                }
            }
            if service.source == service.destination {
                return Err(Error::Domain(format!(
                    "service from {} to itself",
                    service.source
                )));
            }
        }
        Ok(())
    }

    fn neighbors_physical(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.links.iter().filter_map(move |l| {
            if l.a == node {
                Some(l.b)
            } else if l.b == node {
                Some(l.a)
            } else {
                None
            }
        })
    }

    /// Graphviz DOT rendering for external tooling.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph topology {\n");
        for node in &self.nodes {
            let shape = match (node.role, node.trusted) {
                (NodeRole::User, _) => "ellipse",
                (NodeRole::Relay, true) => "box",
                (NodeRole::Relay, false) => "diamond",
            };
            out += &format!("  \"{}\" [shape={shape}];\n", node.name);
        }
        for link in &self.links {
            let mut caps = Vec::new();
            if link.capabilities.bb84 {
                caps.push("bb84");
            }
            if link.capabilities.mdi {
                caps.push("mdi");
            }
            out += &format!(
                "  \"{}\" -- \"{}\" [label=\"{} km {}\"];\n",
                self.nodes[link.a].name,
                self.nodes[link.b].name,
                link.length_km,
                caps.join("+"),
            );
        }
        out += "}\n";
        out
    }
}

/// Supplies the key rate of every usable key edge.
pub trait RateProvider {
    /// Rate of a direct (prepare-and-measure) link between two key holders.
    /// `None` marks the link unusable for direct key generation.
    fn direct_rate(&self, topo: &Topology, link: usize) -> Option<f64>;
    /// Rate of the virtual edge formed by two links meeting at a
    /// measurement relay.
    fn virtual_rate(&self, topo: &Topology, link_1: usize, link_2: usize) -> Option<f64>;
}

/// Rates attached explicitly per link and per relay link pairing.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnnotatedRates {
    /// `direct[link]`, same order as `Topology::links`.
    pub direct: Vec<Option<f64>>,
    /// Keyed by the (smaller, larger) link-index pair through a relay.
    pub virtual_pairs: BTreeMap<(usize, usize), f64>,
}

impl RateProvider for AnnotatedRates {
    fn direct_rate(&self, _topo: &Topology, link: usize) -> Option<f64> {
        self.direct.get(link).copied().flatten()
    }

    fn virtual_rate(&self, _topo: &Topology, link_1: usize, link_2: usize) -> Option<f64> {
        let key = (link_1.min(link_2), link_1.max(link_2));
        self.virtual_pairs.get(&key).copied()
    }
}

/// One hop of a planned path, between two key holders.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "protocol"))]
pub enum HopProtocol {
    Bb84 { link: usize },
    Mdi { relay: usize, link_1: usize, link_2: usize },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
struct KeyEdge {
    u: usize,
    v: usize,
    rate: f64,
    protocol: HopProtocol,
}

fn key_edges<P: RateProvider>(topo: &Topology, rates: &P) -> Vec<KeyEdge> {
    let mut edges = Vec::new();
    for (li, link) in topo.links.iter().enumerate() {
        if !link.capabilities.bb84 {
            continue;
        }
        if !(topo.nodes[link.a].holds_keys() && topo.nodes[link.b].holds_keys()) {
            continue;
        }
        if let Some(rate) = rates.direct_rate(topo, li) {
            if rate > 0.0 {
                edges.push(KeyEdge {
                    u: link.a,
                    v: link.b,
                    rate,
                    protocol: HopProtocol::Bb84 { link: li },
                });
            }
        }
    }
    for (relay, node) in topo.nodes.iter().enumerate() {
        if node.role != NodeRole::Relay {
            continue;
        }
        let feeds: Vec<(usize, usize)> = topo
            .links
            .iter()
            .enumerate()
            .filter_map(|(li, l)| {
                if !l.capabilities.mdi {
                    return None;
                }
                if l.a == relay {
                    Some((li, l.b))
                } else if l.b == relay {
                    Some((li, l.a))
                } else {
                    None
                }
            })
            .collect();
        for i in 0..feeds.len() {
            for j in i + 1..feeds.len() {
                let (l1, u) = feeds[i];
                let (l2, v) = feeds[j];
                if u == v || !topo.nodes[u].holds_keys() || !topo.nodes[v].holds_keys() {
                    continue;
                }
                if let Some(rate) = rates.virtual_rate(topo, l1, l2) {
                    if rate > 0.0 {
                        edges.push(KeyEdge {
                            u,
                            v,
                            rate,
                            protocol: HopProtocol::Mdi { relay, link_1: l1, link_2: l2 },
                        });
                    }
                }
            }
        }
    }
    edges
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Hop {
    pub from: String,
    pub to: String,
    pub rate: f64,
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub protocol: HopProtocol,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Route {
    pub hops: Vec<Hop>,
    /// End-to-end rate: the minimum over the hop rates.
    pub rate: f64,
}

impl Route {
    pub fn path(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.hops.iter().map(|h| h.from.as_str()).collect();
        if let Some(last) = self.hops.last() {
            out.push(last.to.as_str());
        }
        out
    }
}

struct Candidate {
    rate: f64,
    nodes: Vec<usize>,
    hops: Vec<(usize, HopProtocol, f64)>,
}

fn better(topo: &Topology, a: &Candidate, b: &Candidate) -> bool {
    if a.rate != b.rate {
        return a.rate > b.rate;
    }
    if a.nodes.len() != b.nodes.len() {
        return a.nodes.len() < b.nodes.len();
    }
    let names = |c: &Candidate| -> Vec<&str> {
        c.nodes.iter().map(|&i| topo.nodes[i].name.as_str()).collect()
    };
    names(a) < names(b)
}

/// Widest (maximum-bottleneck) path over the key graph; ties break toward
/// fewer hops, then the lexicographically smallest node sequence.
fn widest_path(
    topo: &Topology,
    edges: &[KeyEdge],
    from: usize,
    to: usize,
    excluded: &[usize],
) -> Option<Route> {
    let n = topo.nodes.len();
    let usable = |node: usize| node == from || node == to || !excluded.contains(&node);
    let mut best: Vec<Option<Candidate>> = (0..n).map(|_| None).collect();
    let mut done = vec![false; n];
    best[from] = Some(Candidate { rate: f64::INFINITY, nodes: vec![from], hops: Vec::new() });

    loop {
        let mut pick: Option<usize> = None;
        for i in 0..n {
            if done[i] || best[i].is_none() {
                continue;
            }
            match pick {
                None => pick = Some(i),
                Some(p) => {
                    if better(topo, best[i].as_ref().unwrap(), best[p].as_ref().unwrap()) {
                        pick = Some(i);
                    }
                }
            }
        }
        let Some(u) = pick else { break };
        done[u] = true;
        if u == to {
            break;
        }
        for edge in edges {
            let v = if edge.u == u {
                edge.v
            } else if edge.v == u {
                edge.u
            } else {
                continue;
            };
            if done[v] || !usable(v) {
                continue;
            }
            let cur = best[u].as_ref().unwrap();
            let mut nodes = cur.nodes.clone();
            nodes.push(v);
            let mut hops = cur.hops.clone();
            hops.push((v, edge.protocol.clone(), edge.rate));
            let cand = Candidate { rate: cur.rate.min(edge.rate), nodes, hops };
            let replace = match &best[v] {
                None => true,
                Some(existing) => better(topo, &cand, existing),
            };
            if replace {
                best[v] = Some(cand);
            }
        }
    }

    best[to].take().map(|c| {
        let mut hops = Vec::with_capacity(c.hops.len());
        let mut prev = from;
        for (node, protocol, rate) in c.hops {
            hops.push(Hop {
                from: topo.nodes[prev].name.clone(),
                to: topo.nodes[node].name.clone(),
                rate,
                protocol,
            });
            prev = node;
        }
        Route { hops, rate: c.rate }
    })
}

fn edges_for_demand(edges: &[KeyEdge], demand: Demand) -> Vec<KeyEdge> {
    match demand {
        // Control traffic must not depend on intermediate measurements being
        // trusted, so it only rides virtual edges.
        Demand::Control => edges
            .iter()
            .filter(|e| matches!(e.protocol, HopProtocol::Mdi { .. }))
            .cloned()
            .collect(),
        Demand::Data => edges.to_vec(),
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "status"))]
pub enum PlanOutcome {
    Routed { route: Route },
    Infeasible { reason: String },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ServicePlan {
    pub service: Service,
    pub outcome: PlanOutcome,
}

/// Route every service of the topology under its demand class.
pub fn assign_protocols<P: RateProvider>(
    topo: &Topology,
    rates: &P,
) -> Result<Vec<ServicePlan>, Error> {
    topo.validate()?;
    let edges = key_edges(topo, rates);
    let mut plans = Vec::with_capacity(topo.services.len());
    for service in &topo.services {
        let from = topo.index_of(&service.source).unwrap();
        let to = topo.index_of(&service.destination).unwrap();
        let pool = edges_for_demand(&edges, service.demand);
        let outcome = match widest_path(topo, &pool, from, to, &[]) {
            Some(route) => PlanOutcome::Routed { route },
            None => PlanOutcome::Infeasible {
                reason: match service.demand {
                    Demand::Control => "no measurement-relay path".into(),
                    Demand::Data => "no key path".into(),
                },
            },
        };
        plans.push(ServicePlan { service: service.clone(), outcome });
    }
    Ok(plans)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "verdict"))]
pub enum Verdict {
    /// A key path avoiding every compromised key holder exists.
    Secure { route: Route },
    /// Connectivity survives only through compromised key holders, or an
    /// endpoint itself is compromised.
    Insecure { reason: String },
    /// No physical path between the endpoints at all.
    Disconnected,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ServiceVerdict {
    pub service: Service,
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SurvivabilityReport {
    pub compromised: Vec<String>,
    pub services: Vec<ServiceVerdict>,
    /// Fraction of services still judged secure.
    pub surviving_fraction: f64,
}

/// Judge every service against a set of compromised nodes.
///
/// A compromised relay that only hosts measurements does not poison the
/// virtual edges through it; a compromised key holder removes every path
/// through it.
pub fn survivability<P: RateProvider>(
    topo: &Topology,
    rates: &P,
    compromised: &[&str],
) -> Result<SurvivabilityReport, Error> {
    topo.validate()?;
    let mut comp_idx = Vec::new();
    for name in compromised {
        let idx = topo
            .index_of(name)
            .ok_or_else(|| Error::Domain(format!("unknown node {name}")))?;
        comp_idx.push(idx);
    }
    // Only compromised key holders block routing.
    let blocking: Vec<usize> = comp_idx
        .iter()
        .copied()
        .filter(|&i| topo.nodes[i].holds_keys())
        .collect();
    let edges = key_edges(topo, rates);

    let mut services = Vec::with_capacity(topo.services.len());
    let mut secure = 0usize;
    for service in &topo.services {
        let from = topo.index_of(&service.source).unwrap();
        let to = topo.index_of(&service.destination).unwrap();
        let verdict = if comp_idx.contains(&from) || comp_idx.contains(&to) {
            Verdict::Insecure { reason: "endpoint compromised".into() }
        } else {
            let pool = edges_for_demand(&edges, service.demand);
            match widest_path(topo, &pool, from, to, &blocking) {
                Some(route) => {
                    secure += 1;
                    Verdict::Secure { route }
                }
                None => {
                    if physically_connected(topo, from, to) {
                        Verdict::Insecure {
                            reason: "connectivity requires a compromised key holder".into(),
                        }
                    } else {
                        Verdict::Disconnected
                    }
                }
            }
        };
        services.push(ServiceVerdict { service: service.clone(), verdict });
    }
    let surviving_fraction = if topo.services.is_empty() {
        1.0
    } else {
        secure as f64 / topo.services.len() as f64
    };
    Ok(SurvivabilityReport {
        compromised: compromised.iter().map(|s| String::from(*s)).collect(),
        services,
        surviving_fraction,
    })
}

fn physically_connected(topo: &Topology, from: usize, to: usize) -> bool {
    let mut visited = vec![false; topo.nodes.len()];
    let mut stack = vec![from];
    visited[from] = true;
    while let Some(u) = stack.pop() {
        if u == to {
            return true;
        }
        for v in topo.neighbors_physical(u) {
            if !visited[v] {
                visited[v] = true;
                stack.push(v);
            }
        }
    }
    false
}

/// Guard threshold for exhaustive scenario enumeration.
pub const MAX_SCENARIOS: u64 = 1_000_000;

/// Judge every compromise set of up to `k` nodes, worst surviving fraction
/// first. Refuses more than [`MAX_SCENARIOS`] subsets unless `force` is set.
pub fn enumerate_compromise_scenarios<P: RateProvider>(
    topo: &Topology,
    rates: &P,
    k: usize,
    force: bool,
) -> Result<Vec<SurvivabilityReport>, Error> {
    topo.validate()?;
    let n = topo.nodes.len();
    if k > n {
        return Err(Error::Domain(format!("k={k} exceeds the {n} nodes")));
    }
    let mut count: u64 = 1;
    let mut choose: u64 = 1;
    for i in 1..=k as u64 {
        choose = choose.saturating_mul(n as u64 - i + 1) / i;
        count = count.saturating_add(choose);
        if count > MAX_SCENARIOS && !force {
            return Err(Error::ResourceGuard(format!(
                "more than {MAX_SCENARIOS} compromise scenarios for k={k}; pass force to override"
            )));
        }
    }

    let mut reports = Vec::new();
    let mut subset: Vec<usize> = Vec::with_capacity(k);
    enumerate_subsets(topo, rates, 0, k, &mut subset, &mut reports)?;
    reports.sort_by(|a, b| {
        a.surviving_fraction
            .partial_cmp(&b.surviving_fraction)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then_with(|| a.compromised.cmp(&b.compromised))
    });
    Ok(reports)
}

fn enumerate_subsets<P: RateProvider>(
    topo: &Topology,
    rates: &P,
    start: usize,
    remaining: usize,
    subset: &mut Vec<usize>,
    out: &mut Vec<SurvivabilityReport>,
) -> Result<(), Error> {
    let names: Vec<&str> = subset.iter().map(|&i| topo.nodes[i].name.as_str()).collect();
    out.push(survivability(topo, rates, &names)?);
    if remaining == 0 {
        return Ok(());
    }
    for i in start..topo.nodes.len() {
        subset.push(i);
        enumerate_subsets(topo, rates, i + 1, remaining - 1, subset, out)?;
        subset.pop();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BOTH: LinkCapabilities = LinkCapabilities { bb84: true, mdi: true };
    const BB84_ONLY: LinkCapabilities = LinkCapabilities { bb84: true, mdi: false };

    /// The three-node system: alice and bob are users, charlie is a trusted
    /// relay that also hosts the joint measurement.
    fn three_node() -> (Topology, AnnotatedRates) {
        let mut t = Topology::new();
        let a = t.add_node("alice", NodeRole::User, false);
        let c = t.add_node("charlie", NodeRole::Relay, true);
        let b = t.add_node("bob", NodeRole::User, false);
        t.add_link(a, c, 10.0, 0.196, BOTH);
        t.add_link(c, b, 10.0, 0.196, BOTH);
        t.add_service("alice", "bob", Demand::Control);
        t.add_service("alice", "charlie", Demand::Data);
        t.add_service("alice", "bob", Demand::Data);
        let mut rates = AnnotatedRates {
            direct: vec![Some(6.289e-3), Some(6.155e-3)],
            virtual_pairs: BTreeMap::new(),
        };
        rates.virtual_pairs.insert((0, 1), 1.025e-5);
        (t, rates)
    }

    #[test]
    fn three_node_plan_assigns_protocols_by_demand() {
        let (t, rates) = three_node();
        let plans = assign_protocols(&t, &rates).unwrap();
        // Control alice→bob rides the virtual edge through charlie.
        match &plans[0].outcome {
            PlanOutcome::Routed { route } => {
                assert_eq!(route.rate, 1.025e-5);
                assert!(matches!(route.hops[0].protocol, HopProtocol::Mdi { relay: 1, .. }));
                assert_eq!(route.path(), ["alice", "bob"]);
            }
            other => panic!("unexpected {other:?}"),
        }
        // Data alice→charlie is a direct hop.
        match &plans[1].outcome {
            PlanOutcome::Routed { route } => {
                assert_eq!(route.rate, 6.289e-3);
                assert!(matches!(route.hops[0].protocol, HopProtocol::Bb84 { link: 0 }));
            }
            other => panic!("unexpected {other:?}"),
        }
        // Data alice→bob chains through the trusted relay; min-rate rule.
        match &plans[2].outcome {
            PlanOutcome::Routed { route } => {
                assert_eq!(route.rate, 6.155e-3);
                assert_eq!(route.hops.len(), 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn compromising_the_measurement_relay() {
        let (t, rates) = three_node();
        let report = survivability(&t, &rates, &["charlie"]).unwrap();
        // Control alice→bob stays secure: charlie only measures there.
        assert!(matches!(report.services[0].verdict, Verdict::Secure { .. }));
        // Data alice→charlie: endpoint compromised.
        assert!(matches!(report.services[1].verdict, Verdict::Insecure { .. }));
        // Data alice→bob can replan onto the virtual edge.
        match &report.services[2].verdict {
            Verdict::Secure { route } => assert_eq!(route.rate, 1.025e-5),
            other => panic!("unexpected {other:?}"),
        }
        assert!((report.surviving_fraction - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_compromise_set_keeps_everything_secure() {
        let (t, rates) = three_node();
        let report = survivability(&t, &rates, &[]).unwrap();
        assert_eq!(report.surviving_fraction, 1.0);
    }

    #[test]
    fn bb84_line_breaks_on_relay_compromise() {
        let mut t = Topology::new();
        let a = t.add_node("a", NodeRole::User, false);
        let r1 = t.add_node("r1", NodeRole::Relay, true);
        let r2 = t.add_node("r2", NodeRole::Relay, true);
        let b = t.add_node("b", NodeRole::User, false);
        t.add_link(a, r1, 10.0, 0.2, BB84_ONLY);
        t.add_link(r1, r2, 10.0, 0.2, BB84_ONLY);
        t.add_link(r2, b, 10.0, 0.2, BB84_ONLY);
        t.add_service("a", "b", Demand::Data);
        let rates = AnnotatedRates {
            direct: vec![Some(1.0); 3],
            virtual_pairs: BTreeMap::new(),
        };
        let report = survivability(&t, &rates, &["r1"]).unwrap();
        assert!(matches!(report.services[0].verdict, Verdict::Insecure { .. }));
        // Physically cutting the line changes the verdict.
        let mut cut = t.clone();
        cut.links.clear();
        let report = survivability(&cut, &rates, &["r1"]).unwrap();
        assert!(matches!(report.services[0].verdict, Verdict::Disconnected));
    }

    fn star(n_users: usize, center_caps: LinkCapabilities) -> (Topology, AnnotatedRates) {
        let mut t = Topology::new();
        let center = t.add_node("hub", NodeRole::Relay, true);
        for i in 0..n_users {
            let u = t.add_node(&format!("u{i}"), NodeRole::User, false);
            t.add_link(center, u, 10.0, 0.2, center_caps);
        }
        for i in 0..n_users {
            for j in i + 1..n_users {
                t.add_service(&format!("u{i}"), &format!("u{j}"), Demand::Control);
            }
        }
        let mut rates = AnnotatedRates {
            direct: vec![Some(1.0e-3); t.links.len()],
            virtual_pairs: BTreeMap::new(),
        };
        for i in 0..t.links.len() {
            for j in i + 1..t.links.len() {
                rates.virtual_pairs.insert((i, j), 1.0e-5);
            }
        }
        (t, rates)
    }

    #[test]
    fn star_center_compromise() {
        // BB84-only star: compromising the hub kills every inter-user
        // service.
        let (t, rates) = star(4, BB84_ONLY);
        let report = survivability(&t, &rates, &["hub"]).unwrap();
        assert_eq!(report.surviving_fraction, 0.0);
        // With joint measurements at the hub, control services survive.
        let (t, rates) = star(4, BOTH);
        let report = survivability(&t, &rates, &["hub"]).unwrap();
        assert_eq!(report.surviving_fraction, 1.0);
    }

    #[test]
    fn control_demand_without_mdi_is_infeasible() {
        let (t, rates) = star(3, BB84_ONLY);
        let plans = assign_protocols(&t, &rates).unwrap();
        assert!(plans
            .iter()
            .all(|p| matches!(p.outcome, PlanOutcome::Infeasible { .. })));
    }

    #[test]
    fn tie_breaks_are_deterministic() {
        let mut t = Topology::new();
        let a = t.add_node("a", NodeRole::User, false);
        let p = t.add_node("p", NodeRole::Relay, true);
        let q = t.add_node("q", NodeRole::Relay, true);
        let b = t.add_node("b", NodeRole::User, false);
        t.add_link(a, p, 10.0, 0.2, BB84_ONLY);
        t.add_link(p, b, 10.0, 0.2, BB84_ONLY);
        t.add_link(a, q, 10.0, 0.2, BB84_ONLY);
        t.add_link(q, b, 10.0, 0.2, BB84_ONLY);
        t.add_service("a", "b", Demand::Data);
        let rates = AnnotatedRates {
            direct: vec![Some(2.0); 4],
            virtual_pairs: BTreeMap::new(),
        };
        let plans = assign_protocols(&t, &rates).unwrap();
        match &plans[0].outcome {
            PlanOutcome::Routed { route } => assert_eq!(route.path(), ["a", "p", "b"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn enumeration_ranks_worst_first_and_guards_size() {
        let (t, rates) = three_node();
        let reports = enumerate_compromise_scenarios(&t, &rates, 1, false).unwrap();
        assert_eq!(reports.len(), 4); // empty set + 3 singletons
        for w in reports.windows(2) {
            assert!(w[0].surviving_fraction <= w[1].surviving_fraction);
        }
        // Monotonicity: growing the compromise set never helps.
        let single = survivability(&t, &rates, &["charlie"]).unwrap();
        let double = survivability(&t, &rates, &["charlie", "alice"]).unwrap();
        assert!(double.surviving_fraction <= single.surviving_fraction);

        let mut big = Topology::new();
        for i in 0..60 {
            big.add_node(&format!("n{i}"), NodeRole::Relay, true);
        }
        let rates = AnnotatedRates::default();
        assert!(matches!(
            enumerate_compromise_scenarios(&big, &rates, 5, false),
            Err(Error::ResourceGuard(_))
        ));
    }

    #[test]
    fn validation_rejects_bad_topologies() {
        let mut t = Topology::new();
        let a = t.add_node("a", NodeRole::User, false);
        let b = t.add_node("b", NodeRole::User, false);
        // MDI capability without a relay endpoint.
        t.add_link(a, b, 10.0, 0.2, BOTH);
        assert!(t.validate().is_err());
        t.links[0].capabilities.mdi = false;
        assert!(t.validate().is_ok());
        t.links[0].length_km = 0.0;
        assert!(t.validate().is_err());
        t.links[0].length_km = 10.0;
        // Untrusted relay cannot be a service endpoint.
        let r = t.add_node("r", NodeRole::Relay, false);
        t.add_link(a, r, 5.0, 0.2, BOTH);
        t.add_service("a", "r", Demand::Data);
        assert!(t.validate().is_err());
    }

    #[test]
    fn dot_output_names_every_node() {
        let (t, _) = three_node();
        let dot = t.to_dot();
        for node in &t.nodes {
            assert!(dot.contains(&node.name));
        }
        assert!(dot.starts_with("graph"));
    }
}
