//! Topology interchange format (JSON) with name-based references, mapped
//! onto the core graph model.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use nsaqkd_core::network::{AnnotatedRates, Demand, LinkCapabilities, NodeRole, Topology};

use crate::TOPOLOGY_FORMAT;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub name: String,
    pub role: NodeRole,
    #[serde(default)]
    pub trusted: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkEntry {
    pub a: String,
    pub b: String,
    pub length_km: f64,
    #[serde(default = "default_loss_per_km")]
    pub loss_db_per_km: f64,
    /// Subset of {"bb84", "mdi"}.
    pub capabilities: Vec<String>,
    /// Direct key rate of the link, secret bits per pulse.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
}

fn default_loss_per_km() -> f64 {
    0.196
}

/// Rate of the virtual edge joining `a` and `b` through the measurement
/// node `via`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VirtualRateEntry {
    pub via: String,
    pub a: String,
    pub b: String,
    pub rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceEntry {
    pub source: String,
    pub destination: String,
    pub demand: Demand,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyFile {
    pub format: String,
    pub nodes: Vec<NodeEntry>,
    pub links: Vec<LinkEntry>,
    #[serde(default)]
    pub virtual_rates: Vec<VirtualRateEntry>,
    pub services: Vec<ServiceEntry>,
}

impl TopologyFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: TopologyFile =
            serde_json::from_str(text).context("topology does not match the schema")?;
        if file.format != TOPOLOGY_FORMAT {
            bail!("unsupported topology format {:?}, expected {TOPOLOGY_FORMAT:?}", file.format);
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let resolved = crate::resolve_path(path);
        let text = std::fs::read_to_string(&resolved)
            .with_context(|| format!("reading {}", resolved.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", resolved.display()))
    }

    /// Resolve names to indices and split the file into the core graph plus
    /// its rate annotations.
    pub fn to_core(&self) -> Result<(Topology, AnnotatedRates)> {
        let mut topo = Topology::new();
        for node in &self.nodes {
            topo.add_node(&node.name, node.role, node.trusted);
        }
        let names: Vec<String> = self.nodes.iter().map(|n| n.name.clone()).collect();
        let index = move |name: &str| -> Result<usize> {
            names
                .iter()
                .position(|n| n == name)
                .with_context(|| format!("unknown node {name:?}"))
        };
        let mut rates = AnnotatedRates::default();
        // Index of the link joining a node pair, for virtual-rate lookups.
        let mut by_pair: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for link in &self.links {
            let mut caps = LinkCapabilities::default();
            for cap in &link.capabilities {
                match cap.as_str() {
                    "bb84" => caps.bb84 = true,
                    "mdi" => caps.mdi = true,
                    other => bail!("unknown capability {other:?}"),
                }
            }
            let (a, b) = (index(&link.a)?, index(&link.b)?);
            let li = topo.add_link(a, b, link.length_km, link.loss_db_per_km, caps);
            by_pair.insert((a.min(b), a.max(b)), li);
            rates.direct.push(link.rate);
        }
        for entry in &self.virtual_rates {
            let (via, a, b) = (index(&entry.via)?, index(&entry.a)?, index(&entry.b)?);
            let find = |u: usize, v: usize| -> Result<usize> {
                by_pair.get(&(u.min(v), u.max(v))).copied().with_context(|| {
                    format!(
                        "virtual rate {}–{} via {} references a missing link",
                        entry.a, entry.b, entry.via
                    )
                })
            };
            let (l1, l2) = (find(a, via)?, find(b, via)?);
            rates.virtual_pairs.insert((l1.min(l2), l1.max(l2)), entry.rate);
        }
        for service in &self.services {
            topo.add_service(&service.source, &service.destination, service.demand);
        }
        topo.validate().map_err(anyhow::Error::msg)?;
        Ok((topo, rates))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_format_and_bad_names() {
        assert!(TopologyFile::from_json("{}").is_err());
        let text = format!(
            r#"{{"format":"{TOPOLOGY_FORMAT}","nodes":[{{"name":"a","role":"user"}}],
                "links":[{{"a":"a","b":"ghost","length_km":1.0,"capabilities":["bb84"]}}],
                "services":[]}}"#
        );
        let file = TopologyFile::from_json(&text).unwrap();
        assert!(file.to_core().is_err());
    }
}
