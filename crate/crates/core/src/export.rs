//! Graph interchange formats.
//!
//! The JSON adjacency document is the canonical form and re-imports to a
//! graph whose export is byte-identical. Nodes additionally carry `origin`
//! and edges `length_px`; edge pixel paths are not exported.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skelgraph::{BeaconNode, Compass, ConnectivityGraph, DirCounts, Edge, NodeKind, Origin};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportFormat {
    JsonAdjacency,
    CsvEdgeList,
    Graphml,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::JsonAdjacency => "json",
            ExportFormat::CsvEdgeList => "csv",
            ExportFormat::Graphml => "graphml",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            ExportFormat::JsonAdjacency => "application/json",
            ExportFormat::CsvEdgeList => "text/csv",
            ExportFormat::Graphml => "application/xml",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" | "json-adjacency" => Ok(ExportFormat::JsonAdjacency),
            "csv" | "csv-edge-list" => Ok(ExportFormat::CsvEdgeList),
            "graphml" => Ok(ExportFormat::Graphml),
            other => Err(Error::Invalid(format!("unknown export format {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportMeta {
    pub dpi: Option<f64>,
    pub scale: f64,
    pub map_orientation: Compass,
    pub units: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportNode {
    pub id: u32,
    pub x: u32,
    pub y: u32,
    pub kind: NodeKind,
    pub block_class: Option<String>,
    pub label: String,
    #[serde(default)]
    pub origin: Origin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportEdge {
    pub a: u32,
    pub b: u32,
    pub length_ft: f64,
    pub code: u8,
    pub dir_counts: DirCounts,
    pub zone_level: u32,
    #[serde(default)]
    pub length_px: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub meta: ExportMeta,
    pub nodes: Vec<ExportNode>,
    pub edges: Vec<ExportEdge>,
}

impl GraphDocument {
    pub fn from_graph(g: &ConnectivityGraph) -> Self {
        let mut nodes: Vec<ExportNode> = g
            .nodes
            .iter()
            .map(|n| ExportNode {
                id: n.id,
                x: n.x,
                y: n.y,
                kind: n.kind,
                block_class: n.block_class.clone(),
                label: n.label.clone(),
                origin: n.origin,
            })
            .collect();
        nodes.sort_by_key(|n| n.id);
        let mut edges: Vec<ExportEdge> = g
            .edges
            .iter()
            .map(|e| ExportEdge {
                a: e.a,
                b: e.b,
                length_ft: e.physical_length,
                code: e.code,
                dir_counts: e.dir_counts,
                zone_level: e.max_zone_level,
                length_px: e.pixel_length,
            })
            .collect();
        edges.sort_by_key(|e| (e.a, e.b));
        GraphDocument {
            meta: ExportMeta { dpi: g.dpi, scale: g.scale, map_orientation: g.map_orientation, units: "feet".into() },
            nodes,
            edges,
        }
    }

    /// Graph without edge pixel paths.
    pub fn to_graph(&self) -> Result<ConnectivityGraph> {
        let mut g = ConnectivityGraph::new(self.meta.map_orientation, self.meta.scale, self.meta.dpi);
        let mut seen = std::collections::HashSet::new();
        for n in &self.nodes {
            if !seen.insert(n.id) {
                return Err(Error::Invalid(format!("duplicate node id {}", n.id)));
            }
            g.nodes.push(BeaconNode {
                id: n.id,
                x: n.x,
                y: n.y,
                kind: n.kind,
                block_class: n.block_class.clone(),
                label: n.label.clone(),
                origin: n.origin,
            });
        }
        for e in &self.edges {
            for id in [e.a, e.b] {
                if !seen.contains(&id) {
                    return Err(Error::UnknownNode(id));
                }
            }
            g.edges.push(Edge {
                a: e.a,
                b: e.b,
                path: Vec::new(),
                pixel_length: e.length_px,
                physical_length: e.length_ft,
                dir_counts: e.dir_counts,
                code: e.code,
                max_zone_level: e.zone_level,
            });
        }
        Ok(g)
    }
}

pub fn export_graph(g: &ConnectivityGraph, format: ExportFormat) -> Result<String> {
    match format {
        ExportFormat::JsonAdjacency => to_json(g),
        ExportFormat::CsvEdgeList => to_csv(g),
        ExportFormat::Graphml => Ok(to_graphml(g)),
    }
}

pub fn to_json(g: &ConnectivityGraph) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&GraphDocument::from_graph(g))?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(s: &str) -> Result<ConnectivityGraph> {
    serde_json::from_str::<GraphDocument>(s)?.to_graph()
}

pub fn to_csv(g: &ConnectivityGraph) -> Result<String> {
    let doc = GraphDocument::from_graph(g);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["a", "b", "length_ft", "code", "zone_level"])?;
    for e in &doc.edges {
        w.write_record([
            e.a.to_string(),
            e.b.to_string(),
            e.length_ft.to_string(),
            e.code.to_string(),
            e.zone_level.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// GraphML with the JSON attribute names; `dir_counts` is a compact JSON
/// object string.
pub fn to_graphml(g: &ConnectivityGraph) -> String {
    let doc = GraphDocument::from_graph(g);
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    for (id, dom, ty) in [
        ("x", "node", "int"),
        ("y", "node", "int"),
        ("kind", "node", "string"),
        ("block_class", "node", "string"),
        ("label", "node", "string"),
        ("length_ft", "edge", "double"),
        ("code", "edge", "int"),
        ("dir_counts", "edge", "string"),
        ("zone_level", "edge", "int"),
    ] {
        let _ = writeln!(s, "  <key id=\"{id}\" for=\"{dom}\" attr.name=\"{id}\" attr.type=\"{ty}\"/>");
    }
    let _ = writeln!(
        s,
        "  <graph id=\"beacons\" edgedefault=\"undirected\" dpi=\"{}\" scale=\"{}\" map_orientation=\"{}\" units=\"feet\">",
        doc.meta.dpi.map(|d| d.to_string()).unwrap_or_default(),
        doc.meta.scale,
        doc.meta.map_orientation
    );
    for n in &doc.nodes {
        let kind = serde_json::to_value(n.kind).unwrap();
        let _ = writeln!(s, "    <node id=\"n{}\">", n.id);
        let _ = writeln!(s, "      <data key=\"x\">{}</data>", n.x);
        let _ = writeln!(s, "      <data key=\"y\">{}</data>", n.y);
        let _ = writeln!(s, "      <data key=\"kind\">{}</data>", kind.as_str().unwrap());
        if let Some(c) = &n.block_class {
            let _ = writeln!(s, "      <data key=\"block_class\">{}</data>", xml_escape(c));
        }
        let _ = writeln!(s, "      <data key=\"label\">{}</data>", xml_escape(&n.label));
        s.push_str("    </node>\n");
    }
    for e in &doc.edges {
        let counts = serde_json::to_string(&e.dir_counts).unwrap();
        let _ = writeln!(s, "    <edge source=\"n{}\" target=\"n{}\">", e.a, e.b);
        let _ = writeln!(s, "      <data key=\"length_ft\">{}</data>", e.length_ft);
        let _ = writeln!(s, "      <data key=\"code\">{}</data>", e.code);
        let _ = writeln!(s, "      <data key=\"dir_counts\">{}</data>", xml_escape(&counts));
        let _ = writeln!(s, "      <data key=\"zone_level\">{}</data>", e.zone_level);
        s.push_str("    </edge>\n");
    }
    s.push_str("  </graph>\n</graphml>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathfind::ZoneLevels;
    use crate::skelgraph::Dir;

    fn two_nodes(level: u32) -> ConnectivityGraph {
        let mut g = ConnectivityGraph::new(Compass::E, 1.0 / 16.0, Some(200.0));
        let mut a = BeaconNode::new(0, 0, 0, NodeKind::Poi);
        a.label = "Door <1> & \"x\"".into();
        a.block_class = Some("door".into());
        g.nodes.push(a);
        g.nodes.push(BeaconNode::new(1, 25, 0, NodeKind::Intersection));
        let levels = if level == 0 {
            ZoneLevels::empty(30, 1)
        } else {
            ZoneLevels::new(30, 1, &[crate::pathfind::Zone::rect(10.0, 0.0, 12.0, 1.0, level)], 5)
        };
        let path: Vec<[u32; 2]> = (0..=25).map(|x| [x, 0]).collect();
        g.edges.push(Edge::from_path(0, 1, path, Compass::E, &levels).unwrap());
        g.apply_physical().unwrap();
        g
    }

    #[test]
    fn one_edge_row_in_feet() {
        let g = two_nodes(0);
        let doc: serde_json::Value = serde_json::from_str(&to_json(&g).unwrap()).unwrap();
        assert_eq!(doc["meta"]["units"], "feet");
        assert_eq!(doc["meta"]["map_orientation"], "E");
        assert_eq!(doc["edges"].as_array().unwrap().len(), 1);
        assert_eq!(doc["edges"][0]["length_ft"], 2.0);
        assert_eq!(doc["edges"][0]["dir_counts"]["E"], 25);
        assert_eq!(doc["nodes"][1]["kind"], "intersection");
        let csv = to_csv(&g).unwrap();
        assert_eq!(csv.lines().collect::<Vec<_>>(), vec!["a,b,length_ft,code,zone_level", &format!("0,1,2,{},0", g.edges[0].code)]);
    }

    #[test]
    fn zone_level_is_exported() {
        let g = two_nodes(1);
        assert_eq!(g.edges[0].max_zone_level, 1);
        let doc = GraphDocument::from_graph(&g);
        assert_eq!(doc.edges[0].zone_level, 1);
        assert!(to_csv(&g).unwrap().ends_with(",1\n"));
    }

    #[test]
    fn json_reimport_is_exact() {
        let g = two_nodes(1);
        let s = to_json(&g).unwrap();
        let back = from_json(&s).unwrap();
        assert_eq!(to_json(&back).unwrap(), s);
        assert_eq!(back.edges[0].dir_counts.get(Dir::E), 25);
        assert_eq!(back.nodes, g.nodes);
    }

    #[test]
    fn import_rejects_dangling_edges() {
        let mut doc = GraphDocument::from_graph(&two_nodes(0));
        doc.edges[0].b = 9;
        assert!(matches!(doc.to_graph(), Err(Error::UnknownNode(9))));
    }

    #[test]
    fn graphml_escapes_and_lists_everything() {
        let s = to_graphml(&two_nodes(0));
        assert!(s.contains("Door &lt;1&gt; &amp; &quot;x&quot;"));
        assert_eq!(s.matches("<node ").count(), 2);
        assert_eq!(s.matches("<edge ").count(), 1);
        assert!(s.contains("<data key=\"length_ft\">2</data>"));
    }

    #[test]
    fn format_names() {
        assert_eq!("json".parse::<ExportFormat>().unwrap(), ExportFormat::JsonAdjacency);
        assert_eq!("csv-edge-list".parse::<ExportFormat>().unwrap(), ExportFormat::CsvEdgeList);
        assert!("xml".parse::<ExportFormat>().is_err());
    }
}
