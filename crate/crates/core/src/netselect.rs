//! Gene networks read off a precision matrix, network-based variable
//! selection, hub scoring, and gene-set comparisons.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::{GliomaType, Scheme};
use crate::error::{Error, Result};
use crate::glasso::PrecisionMatrix;
use crate::stats;

/// Default hub threshold on the percentile scale.
pub const DEFAULT_HUB_THRESHOLD: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CohortTag {
    pub scheme: Scheme,
    pub glioma_type: GliomaType,
}

/// Undirected weighted graph over genes; edges carry `θ_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneNetwork {
    gene_ids: Vec<String>,
    edges: Vec<Edge>,
    pub cohort: Option<CohortTag>,
}

impl GeneNetwork {
    /// Edges are normalized to `i < j`. Self-loops, duplicates, zero weights
    /// and out-of-range indices are rejected.
    pub fn new(gene_ids: Vec<String>, edges: Vec<Edge>) -> Result<Self> {
        let p = gene_ids.len();
        let mut seen = BTreeSet::new();
        let mut normalized = Vec::with_capacity(edges.len());
        for e in edges {
            let (i, j) = (e.i.min(e.j), e.i.max(e.j));
            if i == j {
                return Err(Error::invalid(format!("self-loop on gene index {i}")));
            }
            if j >= p {
                return Err(Error::invalid(format!("edge ({i}, {j}) out of range for {p} genes")));
            }
            if e.weight == 0.0 || !e.weight.is_finite() {
                return Err(Error::invalid(format!("edge ({i}, {j}) has weight {}", e.weight)));
            }
            if !seen.insert((i, j)) {
                return Err(Error::invalid(format!("duplicate edge ({i}, {j})")));
            }
            normalized.push(Edge { i, j, weight: e.weight });
        }
        normalized.sort_by_key(|e| (e.i, e.j));
        Ok(GeneNetwork {
            gene_ids,
            edges: normalized,
            cohort: None,
        })
    }

    pub fn with_cohort(mut self, tag: CohortTag) -> Self {
        self.cohort = Some(tag);
        self
    }

    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.gene_ids.len()];
        for e in &self.edges {
            d[e.i] += 1;
            d[e.j] += 1;
        }
        d
    }

    fn index(&self) -> HashMap<&str, usize> {
        self.gene_ids.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect()
    }
}

/// The off-diagonal entries with `|θ_ij| ≥ zero_epsilon`, each once.
pub fn extract_network(prec: &PrecisionMatrix, zero_epsilon: f64) -> GeneNetwork {
    let p = prec.dim();
    let mut edges = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            let w = prec.theta[[i, j]];
            if w.abs() >= zero_epsilon {
                edges.push(Edge { i, j, weight: w });
            }
        }
    }
    GeneNetwork {
        gene_ids: prec.gene_ids.clone(),
        edges,
        cohort: None,
    }
}

/// Genes with at least one edge.
pub fn select_variables(net: &GeneNetwork) -> BTreeSet<String> {
    net.degrees()
        .into_iter()
        .zip(&net.gene_ids)
        .filter(|(d, _)| *d > 0)
        .map(|(_, g)| g.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HubEntry {
    pub gene: String,
    /// `Σ_j |θ_ij|`
    pub weight: f64,
    /// Number of incident edges.
    pub count: usize,
    pub pct_weight: f64,
    pub pct_count: f64,
    pub hub_weight: bool,
    pub hub_count: bool,
}

impl HubEntry {
    pub fn is_hub(&self) -> bool {
        self.hub_weight || self.hub_count
    }

    pub fn is_connected(&self) -> bool {
        self.count > 0
    }

    pub fn average_percentile(&self) -> f64 {
        (self.pct_weight + self.pct_count) / 2.0
    }
}

/// Weight and count measures for every gene of a network.
///
/// Percentiles are `100 · rank / N` over the `N` connected genes, ties
/// sharing their average rank. Isolated genes keep percentile 0 and are
/// never hubs.
#[derive(Debug, Clone, PartialEq)]
pub struct HubRanking {
    pub threshold: f64,
    pub entries: Vec<HubEntry>,
}

impl HubRanking {
    pub fn hubs(&self) -> BTreeSet<String> {
        self.entries.iter().filter(|e| e.is_hub()).map(|e| e.gene.clone()).collect()
    }

    pub fn weight_hubs(&self) -> BTreeSet<String> {
        self.entries.iter().filter(|e| e.hub_weight).map(|e| e.gene.clone()).collect()
    }

    pub fn count_hubs(&self) -> BTreeSet<String> {
        self.entries.iter().filter(|e| e.hub_count).map(|e| e.gene.clone()).collect()
    }

    pub fn get(&self, gene: &str) -> Option<&HubEntry> {
        self.entries.iter().find(|e| e.gene == gene)
    }
}

fn percentiles(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    stats::average_ranks(values).into_iter().map(|r| 100.0 * r / n).collect()
}

pub fn hub_ranking(net: &GeneNetwork, threshold: f64) -> Result<HubRanking> {
    if !(threshold > 0.0 && threshold < 100.0) {
        return Err(Error::invalid(format!("hub threshold must lie in (0, 100), got {threshold}")));
    }
    let p = net.n_genes();
    let mut weight = vec![0.0; p];
    let mut count = vec![0usize; p];
    for e in &net.edges {
        let w = e.weight.abs();
        weight[e.i] += w;
        weight[e.j] += w;
        count[e.i] += 1;
        count[e.j] += 1;
    }
    let connected: Vec<usize> = (0..p).filter(|&i| count[i] > 0).collect();
    if connected.is_empty() {
        return Err(Error::NoConnectedVariables);
    }
    let pct_w = percentiles(&connected.iter().map(|&i| weight[i]).collect::<Vec<_>>());
    let pct_c = percentiles(&connected.iter().map(|&i| count[i] as f64).collect::<Vec<_>>());
    let mut pw = vec![0.0; p];
    let mut pc = vec![0.0; p];
    for (k, &i) in connected.iter().enumerate() {
        pw[i] = pct_w[k];
        pc[i] = pct_c[k];
    }
    let entries = (0..p)
        .map(|i| HubEntry {
            gene: net.gene_ids[i].clone(),
            weight: weight[i],
            count: count[i],
            pct_weight: pw[i],
            pct_count: pc[i],
            hub_weight: count[i] > 0 && pw[i] > threshold,
            hub_count: count[i] > 0 && pc[i] > threshold,
        })
        .collect();
    Ok(HubRanking { threshold, entries })
}

/// Venn-style comparison of two or three named gene sets.
#[derive(Debug, Clone, PartialEq)]
pub struct SetComparison {
    pub names: Vec<String>,
    pub sizes: Vec<usize>,
    /// Members of each non-empty subset of names that belong to exactly
    /// those sets, keyed by a bitmask over `names`.
    pub regions: BTreeMap<u8, BTreeSet<String>>,
}

impl SetComparison {
    fn mask_of(&self, names: &[&str]) -> Result<u8> {
        names.iter().try_fold(0u8, |m, n| {
            let k = self
                .names
                .iter()
                .position(|x| x == n)
                .ok_or_else(|| Error::invalid(format!("no set named \"{n}\"")))?;
            Ok(m | (1 << k))
        })
    }

    /// `|∩ names|`, regardless of membership in the other sets.
    pub fn intersection(&self, names: &[&str]) -> Result<usize> {
        let mask = self.mask_of(names)?;
        Ok(self
            .regions
            .iter()
            .filter(|(m, _)| *m & mask == mask)
            .map(|(_, s)| s.len())
            .sum())
    }

    /// Members in exactly the named sets and no other.
    pub fn region(&self, names: &[&str]) -> Result<&BTreeSet<String>> {
        static EMPTY: BTreeSet<String> = BTreeSet::new();
        let mask = self.mask_of(names)?;
        Ok(self.regions.get(&mask).unwrap_or(&EMPTY))
    }

    pub fn exclusive(&self, name: &str) -> Result<&BTreeSet<String>> {
        self.region(&[name])
    }

    /// Exclusive members as a percentage of the set's size (0 for an empty set).
    pub fn exclusive_pct(&self, name: &str) -> Result<f64> {
        let k = self
            .names
            .iter()
            .position(|x| x == name)
            .ok_or_else(|| Error::invalid(format!("no set named \"{name}\"")))?;
        let excl = self.exclusive(name)?.len();
        Ok(if self.sizes[k] == 0 {
            0.0
        } else {
            100.0 * excl as f64 / self.sizes[k] as f64
        })
    }

    /// Union of the exclusive members of every set.
    pub fn all_exclusive(&self) -> BTreeSet<String> {
        self.regions
            .iter()
            .filter(|(m, _)| m.count_ones() == 1)
            .flat_map(|(_, s)| s.iter().cloned())
            .collect()
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "region\tcount\tpct_of_first")?;
        for (k, name) in self.names.iter().enumerate() {
            writeln!(w, "size:{name}\t{}\t", self.sizes[k])?;
        }
        let n = self.names.len();
        for mask in 1u8..(1 << n) {
            let members: Vec<&str> = (0..n).filter(|k| mask & (1 << k) != 0).map(|k| self.names[k].as_str()).collect();
            let label = members.join("&");
            let only = self.regions.get(&mask).map_or(0, BTreeSet::len);
            let first = mask.trailing_zeros() as usize;
            let pct = if self.sizes[first] == 0 {
                0.0
            } else {
                100.0 * only as f64 / self.sizes[first] as f64
            };
            writeln!(w, "only:{label}\t{only}\t{pct}")?;
            if members.len() > 1 {
                let all: usize = self.regions.iter().filter(|(m, _)| *m & mask == mask).map(|(_, s)| s.len()).sum();
                writeln!(w, "all:{label}\t{all}\t")?;
            }
        }
        Ok(())
    }
}

pub fn compare_sets(sets: &BTreeMap<String, BTreeSet<String>>) -> Result<SetComparison> {
    if !(2..=3).contains(&sets.len()) {
        return Err(Error::invalid(format!("compare_sets takes 2 or 3 sets, got {}", sets.len())));
    }
    let names: Vec<String> = sets.keys().cloned().collect();
    let sizes = sets.values().map(BTreeSet::len).collect();
    let mut regions: BTreeMap<u8, BTreeSet<String>> = BTreeMap::new();
    let universe: BTreeSet<&String> = sets.values().flatten().collect();
    for gene in universe {
        let mask = sets
            .values()
            .enumerate()
            .filter(|(_, s)| s.contains(gene))
            .fold(0u8, |m, (k, _)| m | (1 << k));
        regions.entry(mask).or_default().insert(gene.clone());
    }
    Ok(SetComparison { names, sizes, regions })
}

#[derive(Debug, Clone, PartialEq)]
pub enum CrossRankStatus {
    Ranked {
        pct_weight: f64,
        pct_count: f64,
        average: f64,
    },
    NotSelected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossRank {
    pub gene: String,
    pub status: CrossRankStatus,
}

/// Where each gene of `genes` sits in `ranking`. Genes absent from the
/// ranking, or isolated in its network, are reported as not selected.
pub fn cross_rank_lookup(ranking: &HubRanking, genes: &BTreeSet<String>) -> Vec<CrossRank> {
    let by_gene: HashMap<&str, &HubEntry> = ranking.entries.iter().map(|e| (e.gene.as_str(), e)).collect();
    genes
        .iter()
        .map(|g| {
            let status = match by_gene.get(g.as_str()) {
                Some(e) if e.is_connected() => CrossRankStatus::Ranked {
                    pct_weight: e.pct_weight,
                    pct_count: e.pct_count,
                    average: e.average_percentile(),
                },
                _ => CrossRankStatus::NotSelected,
            };
            CrossRank { gene: g.clone(), status }
        })
        .collect()
}

/// Induced subgraph on the seed genes and their direct neighbors.
pub fn neighborhood_subgraph<S: AsRef<str>>(net: &GeneNetwork, seed: &[S]) -> Result<GeneNetwork> {
    let index = net.index();
    let mut keep = vec![false; net.n_genes()];
    for g in seed {
        let &i = index
            .get(g.as_ref())
            .ok_or_else(|| Error::UnknownGene(g.as_ref().to_string()))?;
        keep[i] = true;
    }
    let seeds = keep.clone();
    for e in &net.edges {
        if seeds[e.i] {
            keep[e.j] = true;
        }
        if seeds[e.j] {
            keep[e.i] = true;
        }
    }
    induced(net, &keep)
}

/// Subgraph on the genes flagged in `keep`, original order preserved.
pub fn induced_subgraph(net: &GeneNetwork, genes: &BTreeSet<String>) -> GeneNetwork {
    let keep: Vec<bool> = net.gene_ids.iter().map(|g| genes.contains(g)).collect();
    induced(net, &keep).expect("indices come from the network")
}

fn induced(net: &GeneNetwork, keep: &[bool]) -> Result<GeneNetwork> {
    let mut new_index = vec![usize::MAX; net.n_genes()];
    let mut ids = Vec::new();
    for (i, g) in net.gene_ids.iter().enumerate() {
        if keep[i] {
            new_index[i] = ids.len();
            ids.push(g.clone());
        }
    }
    let edges = net
        .edges
        .iter()
        .filter(|e| keep[e.i] && keep[e.j])
        .map(|e| Edge {
            i: new_index[e.i],
            j: new_index[e.j],
            weight: e.weight,
        })
        .collect();
    Ok(GeneNetwork {
        gene_ids: ids,
        edges,
        cohort: net.cohort,
    })
}

/// Boolean node attributes carried into graph exports.
#[derive(Debug, Clone, Default)]
pub struct NodeAnnotations {
    pub exclusive: BTreeSet<String>,
    pub hubs: BTreeSet<String>,
    pub prognostic: BTreeSet<String>,
}

fn dot_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn write_dot<W: Write>(mut w: W, net: &GeneNetwork, notes: &NodeAnnotations) -> std::io::Result<()> {
    let name = net
        .cohort
        .map(|c| format!("{}_{}", c.scheme, c.glioma_type))
        .unwrap_or_else(|| "network".into());
    writeln!(w, "graph {} {{", dot_quote(&name))?;
    for g in &net.gene_ids {
        writeln!(
            w,
            "  {} [exclusive={}, hub={}, prognostic={}];",
            dot_quote(g),
            notes.exclusive.contains(g),
            notes.hubs.contains(g),
            notes.prognostic.contains(g)
        )?;
    }
    for e in &net.edges {
        writeln!(
            w,
            "  {} -- {} [weight={}];",
            dot_quote(&net.gene_ids[e.i]),
            dot_quote(&net.gene_ids[e.j]),
            e.weight
        )?;
    }
    writeln!(w, "}}")
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

pub fn write_graphml<W: Write>(mut w: W, net: &GeneNetwork, notes: &NodeAnnotations) -> std::io::Result<()> {
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(w, r#"<graphml xmlns="http://graphml.graphdrawing.org/xmlns">"#)?;
    for key in ["exclusive", "hub", "prognostic"] {
        writeln!(w, r#"  <key id="{key}" for="node" attr.name="{key}" attr.type="boolean"/>"#)?;
    }
    writeln!(w, r#"  <key id="weight" for="edge" attr.name="weight" attr.type="double"/>"#)?;
    writeln!(w, r#"  <graph id="G" edgedefault="undirected">"#)?;
    for g in &net.gene_ids {
        writeln!(w, r#"    <node id="{}">"#, xml_escape(g))?;
        writeln!(w, r#"      <data key="exclusive">{}</data>"#, notes.exclusive.contains(g))?;
        writeln!(w, r#"      <data key="hub">{}</data>"#, notes.hubs.contains(g))?;
        writeln!(w, r#"      <data key="prognostic">{}</data>"#, notes.prognostic.contains(g))?;
        writeln!(w, "    </node>")?;
    }
    for e in &net.edges {
        writeln!(
            w,
            r#"    <edge source="{}" target="{}"><data key="weight">{}</data></edge>"#,
            xml_escape(&net.gene_ids[e.i]),
            xml_escape(&net.gene_ids[e.j]),
            e.weight
        )?;
    }
    writeln!(w, "  </graph>")?;
    writeln!(w, "</graphml>")
}

pub fn write_hub_ranking(path: impl AsRef<Path>, ranking: &HubRanking) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(w, "gene\tm_w\tm_c\tpct_w\tpct_c\thub")?;
        for e in &ranking.entries {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}",
                e.gene,
                e.weight,
                e.count,
                e.pct_weight,
                e.pct_count,
                u8::from(e.is_hub())
            )?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Reads a ranking written by [`write_hub_ranking`]; per-measure hub flags
/// are recomputed from the percentiles at `threshold`.
pub fn read_hub_ranking(path: impl AsRef<Path>, threshold: f64) -> Result<HubRanking> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate().skip(1) {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let bad = || Error::Parse {
            path: path.to_path_buf(),
            line: k + 1,
            column: 0,
            message: format!("malformed ranking row \"{line}\""),
        };
        if f.len() != 6 {
            return Err(bad());
        }
        let weight: f64 = f[1].parse().map_err(|_| bad())?;
        let count: usize = f[2].parse().map_err(|_| bad())?;
        let pct_weight: f64 = f[3].parse().map_err(|_| bad())?;
        let pct_count: f64 = f[4].parse().map_err(|_| bad())?;
        entries.push(HubEntry {
            gene: f[0].to_string(),
            weight,
            count,
            pct_weight,
            pct_count,
            hub_weight: count > 0 && pct_weight > threshold,
            hub_count: count > 0 && pct_count > threshold,
        });
    }
    Ok(HubRanking { threshold, entries })
}

pub fn write_gene_list<'a>(path: impl AsRef<Path>, genes: impl IntoIterator<Item = &'a String>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = || -> std::io::Result<()> {
        for g in genes {
            writeln!(w, "{g}")?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

pub fn read_gene_list(path: impl AsRef<Path>) -> Result<BTreeSet<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glasso::PrecisionMatrix;
    use ndarray::array;

    fn ids(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn star() -> GeneNetwork {
        let edges = (1..=5).map(|j| Edge { i: 0, j, weight: 1.0 }).collect();
        GeneNetwork::new(ids(&["c", "l1", "l2", "l3", "l4", "l5"]), edges).unwrap()
    }

    fn path3() -> GeneNetwork {
        GeneNetwork::new(
            ids(&["a", "b", "c"]),
            vec![Edge { i: 0, j: 1, weight: 1.0 }, Edge { i: 1, j: 2, weight: 1.0 }],
        )
        .unwrap()
    }

    fn precision(theta: ndarray::Array2<f64>, names: &[&str]) -> PrecisionMatrix {
        PrecisionMatrix {
            gene_ids: ids(names),
            theta,
            rho_used: 0.1,
            penalize_diagonal: true,
            converged: true,
            iterations: 1,
            objective_value: 0.0,
            kkt_residual: 0.0,
        }
    }

    #[test]
    fn network_from_precision() {
        let diag = precision(ndarray::Array2::eye(3), &["a", "b", "c"]);
        assert!(extract_network(&diag, 1e-8).edges().is_empty());

        let theta = array![[1.0, -0.3, 0.0], [-0.3, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let net = extract_network(&precision(theta, &["a", "b", "c"]), 1e-8);
        assert_eq!(net.edges(), &[Edge { i: 0, j: 1, weight: -0.3 }]);
    }

    #[test]
    fn network_rejects_bad_edges() {
        let g = ids(&["a", "b"]);
        assert!(GeneNetwork::new(g.clone(), vec![Edge { i: 1, j: 1, weight: 1.0 }]).is_err());
        assert!(GeneNetwork::new(
            g.clone(),
            vec![Edge { i: 0, j: 1, weight: 1.0 }, Edge { i: 1, j: 0, weight: 2.0 }]
        )
        .is_err());
        assert!(GeneNetwork::new(g, vec![Edge { i: 0, j: 1, weight: 0.0 }]).is_err());
    }

    #[test]
    fn selection_is_connected_genes() {
        let empty = GeneNetwork::new(ids(&["a", "b"]), vec![]).unwrap();
        assert!(select_variables(&empty).is_empty());
        let one = GeneNetwork::new(ids(&["a", "b", "c", "d", "e"]), vec![Edge { i: 0, j: 3, weight: 0.5 }]).unwrap();
        assert_eq!(select_variables(&one), set(&["a", "d"]));
    }

    #[test]
    fn star_center_is_only_hub() {
        let r = hub_ranking(&star(), 60.0).unwrap();
        let c = r.get("c").unwrap();
        assert_eq!((c.count, c.weight), (5, 5.0));
        assert_eq!((c.pct_weight, c.pct_count), (100.0, 100.0));
        for leaf in ["l1", "l2", "l3", "l4", "l5"] {
            let e = r.get(leaf).unwrap();
            assert_eq!((e.count, e.weight), (1, 1.0));
            assert_eq!(e.pct_count, 50.0);
        }
        assert_eq!(r.hubs(), set(&["c"]));
        assert_eq!(r.weight_hubs(), set(&["c"]));
        assert_eq!(r.count_hubs(), set(&["c"]));
    }

    #[test]
    fn path_degree_order_and_ties() {
        let r = hub_ranking(&path3(), 60.0).unwrap();
        let counts: Vec<usize> = r.entries.iter().map(|e| e.count).collect();
        assert_eq!(counts, vec![1, 2, 1]);
        let (a, b, c) = (r.get("a").unwrap(), r.get("b").unwrap(), r.get("c").unwrap());
        assert!(b.pct_count > a.pct_count);
        assert_eq!((a.pct_weight, a.pct_count), (c.pct_weight, c.pct_count));
    }

    #[test]
    fn isolated_genes_do_not_rank() {
        let net = GeneNetwork::new(ids(&["a", "b", "z"]), vec![Edge { i: 0, j: 1, weight: 0.4 }]).unwrap();
        let r = hub_ranking(&net, 60.0).unwrap();
        let z = r.get("z").unwrap();
        assert_eq!((z.pct_weight, z.is_hub()), (0.0, false));
        let lonely = GeneNetwork::new(ids(&["a", "b"]), vec![]).unwrap();
        assert!(matches!(hub_ranking(&lonely, 60.0), Err(Error::NoConnectedVariables)));
    }

    #[test]
    fn two_set_comparison() {
        let mut sets = BTreeMap::new();
        sets.insert("A".to_string(), set(&["x", "y"]));
        sets.insert("B".to_string(), set(&["y", "z"]));
        let c = compare_sets(&sets).unwrap();
        assert_eq!(c.intersection(&["A", "B"]).unwrap(), 1);
        assert_eq!(c.exclusive("A").unwrap(), &set(&["x"]));
        assert_eq!(c.exclusive_pct("A").unwrap(), 50.0);
    }

    #[test]
    fn identical_sets_have_no_exclusives() {
        let s = set(&["a", "b", "c", "d"]);
        let sets: BTreeMap<String, BTreeSet<String>> =
            ["x", "y", "z"].iter().map(|n| (n.to_string(), s.clone())).collect();
        let c = compare_sets(&sets).unwrap();
        for n in ["x", "y", "z"] {
            assert!(c.exclusive(n).unwrap().is_empty());
        }
        assert_eq!(c.intersection(&["x", "y", "z"]).unwrap(), 4);
        let one: BTreeMap<String, BTreeSet<String>> = [("x".to_string(), s)].into_iter().collect();
        assert!(compare_sets(&one).is_err());
    }

    #[test]
    fn cross_rank_flags_absent_genes() {
        let r = hub_ranking(&star(), 60.0).unwrap();
        let out = cross_rank_lookup(&r, &set(&["c", "nope"]));
        assert_eq!(
            out[0].status,
            CrossRankStatus::Ranked {
                pct_weight: 100.0,
                pct_count: 100.0,
                average: 100.0
            }
        );
        assert_eq!(out[1].status, CrossRankStatus::NotSelected);
    }

    #[test]
    fn one_hop_neighborhood() {
        let net = path3();
        let sub = neighborhood_subgraph(&net, &["a"]).unwrap();
        assert_eq!(sub.gene_ids(), &["a", "b"]);
        assert_eq!(sub.edges(), &[Edge { i: 0, j: 1, weight: 1.0 }]);
        assert_eq!(neighborhood_subgraph(&net, &["a", "b", "c"]).unwrap(), net);
        assert_eq!(neighborhood_subgraph::<&str>(&net, &[]).unwrap().n_genes(), 0);
        assert!(neighborhood_subgraph(&net, &["q"]).is_err());
    }

    #[test]
    fn exports_mention_every_node_and_edge() {
        let net = path3();
        let notes = NodeAnnotations {
            hubs: set(&["b"]),
            ..Default::default()
        };
        let mut dot = Vec::new();
        write_dot(&mut dot, &net, &notes).unwrap();
        let dot = String::from_utf8(dot).unwrap();
        assert!(dot.contains("\"b\" [exclusive=false, hub=true, prognostic=false];"));
        assert!(dot.contains("\"a\" -- \"b\" [weight=1];"));

        let mut gml = Vec::new();
        write_graphml(&mut gml, &net, &notes).unwrap();
        let gml = String::from_utf8(gml).unwrap();
        assert_eq!(gml.matches("<node ").count(), 3);
        assert_eq!(gml.matches("<edge ").count(), 2);
    }

    #[test]
    fn ranking_file_round_trip() {
        let r = hub_ranking(&star(), 60.0).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_hub_ranking(f.path(), &r).unwrap();
        assert_eq!(read_hub_ranking(f.path(), 60.0).unwrap(), r);
    }
}
