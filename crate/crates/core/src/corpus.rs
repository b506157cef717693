//! Triple ingestion, the tripartite user/item/tag graph, iterative degree
//! filtering and the per-user temporal train/test split.

use std::collections::{HashMap, HashSet, VecDeque};
use std::io::{BufRead, Write};

use indexmap::IndexSet;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::{ItemIx, TagIx, UserIx};

/// One user-item-tag annotation with its timestamp (seconds since epoch).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interaction {
    pub user: String,
    pub item: String,
    pub tag: String,
    pub timestamp: u64,
}

impl Interaction {
    pub fn new(
        user: impl Into<String>,
        item: impl Into<String>,
        tag: impl Into<String>,
        timestamp: u64,
    ) -> Self {
        Interaction {
            user: user.into(),
            item: item.into(),
            tag: tag.into(),
            timestamp,
        }
    }
}

/// Reads tab-separated `user item tag timestamp` records.
///
/// Blank lines and lines starting with `#` are skipped. Any other line must
/// have exactly four non-empty fields and an unsigned integer timestamp.
pub fn parse_triples<R: BufRead>(reader: R) -> Result<Vec<Interaction>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => Error::Parse {
                line: line_no,
                message: "invalid UTF-8".into(),
            },
            _ => Error::Stream(e),
        })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 4 tab-separated fields, found {}", fields.len()),
            });
        }
        if let Some(pos) = fields[..3].iter().position(|f| f.is_empty()) {
            let name = ["user", "item", "tag"][pos];
            return Err(Error::Parse {
                line: line_no,
                message: format!("empty {name} id"),
            });
        }
        let timestamp = fields[3].trim().parse::<u64>().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("timestamp `{}` is not a non-negative integer", fields[3]),
        })?;
        out.push(Interaction::new(fields[0], fields[1], fields[2], timestamp));
    }
    Ok(out)
}

/// Writes records in the same format [`parse_triples`] reads.
pub fn write_triples<'a, W, I>(mut writer: W, interactions: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a Interaction>,
{
    for it in interactions {
        writeln!(
            writer,
            "{}\t{}\t{}\t{}",
            it.user, it.item, it.tag, it.timestamp
        )?;
    }
    writer.flush()
}

/// An interned triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub user: UserIx,
    pub item: ItemIx,
    pub tag: TagIx,
    pub timestamp: u64,
}

/// Node and triple counts, in the layout of a corpus statistics table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct GraphStats {
    pub users: usize,
    pub items: usize,
    pub tags: usize,
    pub triples: usize,
}

/// Users, items and tags with their annotation triples.
///
/// Ids are interned densely in order of first appearance. Every interned id
/// is referenced by at least one triple, and `user_items` / `user_tags` hold
/// the user-side bipartite projections as sorted, distinct index lists.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TripartiteGraph {
    users: IndexSet<String>,
    items: IndexSet<String>,
    tags: IndexSet<String>,
    triples: Vec<Triple>,
    user_items: Vec<Vec<ItemIx>>,
    user_tags: Vec<Vec<TagIx>>,
}

impl TripartiteGraph {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_tags(&self) -> usize {
        self.tags.len()
    }

    pub fn n_triples(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn user_id(&self, user: UserIx) -> &str {
        &self.users[user as usize]
    }

    pub fn item_id(&self, item: ItemIx) -> &str {
        &self.items[item as usize]
    }

    pub fn tag_id(&self, tag: TagIx) -> &str {
        &self.tags[tag as usize]
    }

    pub fn user_index(&self, id: &str) -> Option<UserIx> {
        self.users.get_index_of(id).map(|i| i as UserIx)
    }

    pub fn item_index(&self, id: &str) -> Option<ItemIx> {
        self.items.get_index_of(id).map(|i| i as ItemIx)
    }

    pub fn tag_index(&self, id: &str) -> Option<TagIx> {
        self.tags.get_index_of(id).map(|i| i as TagIx)
    }

    pub fn user_items(&self, user: UserIx) -> &[ItemIx] {
        &self.user_items[user as usize]
    }

    pub fn user_tags(&self, user: UserIx) -> &[TagIx] {
        &self.user_tags[user as usize]
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats {
            users: self.n_users(),
            items: self.n_items(),
            tags: self.n_tags(),
            triples: self.n_triples(),
        }
    }

    pub fn interaction(&self, triple: &Triple) -> Interaction {
        Interaction::new(
            self.user_id(triple.user),
            self.item_id(triple.item),
            self.tag_id(triple.tag),
            triple.timestamp,
        )
    }

    /// Triples translated back to external ids, in storage order.
    pub fn interactions(&self) -> impl Iterator<Item = Interaction> + '_ {
        self.triples.iter().map(|t| self.interaction(t))
    }

    fn insert(&mut self, user: &str, item: &str, tag: &str, timestamp: u64) -> Triple {
        let user = intern(&mut self.users, user);
        let item = intern(&mut self.items, item);
        let tag = intern(&mut self.tags, tag);
        Triple {
            user,
            item,
            tag,
            timestamp,
        }
    }

    fn rebuild_projections(&mut self) {
        let mut user_items = vec![Vec::new(); self.users.len()];
        let mut user_tags = vec![Vec::new(); self.users.len()];
        for t in &self.triples {
            user_items[t.user as usize].push(t.item);
            user_tags[t.user as usize].push(t.tag);
        }
        for list in user_items.iter_mut().chain(user_tags.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        self.user_items = user_items;
        self.user_tags = user_tags;
    }

    /// A new graph holding the selected triples (in storage order), with ids
    /// re-interned compactly.
    fn subgraph<'a>(&self, keep: impl IntoIterator<Item = &'a Triple>) -> TripartiteGraph {
        let mut g = TripartiteGraph::default();
        for t in keep {
            let triple = g.insert(
                self.user_id(t.user),
                self.item_id(t.item),
                self.tag_id(t.tag),
                t.timestamp,
            );
            g.triples.push(triple);
        }
        g.rebuild_projections();
        g
    }
}

fn intern(table: &mut IndexSet<String>, id: &str) -> u32 {
    match table.get_index_of(id) {
        Some(i) => i as u32,
        None => table.insert_full(id.to_owned()).0 as u32,
    }
}

/// Interns ids in first-appearance order and collapses exact duplicates.
pub fn build_graph(interactions: &[Interaction]) -> TripartiteGraph {
    let mut g = TripartiteGraph::default();
    let mut seen = HashSet::with_capacity(interactions.len());
    for it in interactions {
        let triple = g.insert(&it.user, &it.item, &it.tag, it.timestamp);
        if seen.insert(triple) {
            g.triples.push(triple);
        }
    }
    g.rebuild_projections();
    g
}

/// How the degree of a node is measured when filtering.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeMode {
    /// Number of remaining triples containing the node.
    #[default]
    Triples,
    /// Number of distinct adjacent nodes of the other two kinds.
    DistinctNeighbors,
}

impl std::str::FromStr for DegreeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triples" => Ok(DegreeMode::Triples),
            "neighbors" | "distinct_neighbors" => Ok(DegreeMode::DistinctNeighbors),
            other => Err(Error::config(format!("unknown degree mode `{other}`"))),
        }
    }
}

/// Iteratively removes every node whose degree is below `threshold`, along
/// with all of its triples, until every remaining node meets the threshold.
pub fn filter_by_degree(graph: &TripartiteGraph, threshold: usize) -> TripartiteGraph {
    filter_by_degree_with(graph, threshold, DegreeMode::Triples)
}

pub fn filter_by_degree_with(
    graph: &TripartiteGraph,
    threshold: usize,
    mode: DegreeMode,
) -> TripartiteGraph {
    let nu = graph.n_users();
    let ni = graph.n_items();
    let n_nodes = nu + ni + graph.n_tags();
    // Nodes share one index space: users, then items, then tags.
    let nodes_of = |t: &Triple| {
        [
            t.user as usize,
            nu + t.item as usize,
            nu + ni + t.tag as usize,
        ]
    };

    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    for (i, t) in graph.triples.iter().enumerate() {
        for n in nodes_of(t) {
            incident[n].push(i);
        }
    }

    let mut pair_counts: HashMap<(usize, usize), u32> = HashMap::new();
    let mut degree: Vec<usize> = match mode {
        DegreeMode::Triples => incident.iter().map(Vec::len).collect(),
        DegreeMode::DistinctNeighbors => {
            let mut degree = vec![0; n_nodes];
            for t in &graph.triples {
                let [u, i, g] = nodes_of(t);
                for pair in [(u, i), (u, g), (i, g)] {
                    let c = pair_counts.entry(pair).or_insert(0);
                    if *c == 0 {
                        degree[pair.0] += 1;
                        degree[pair.1] += 1;
                    }
                    *c += 1;
                }
            }
            degree
        }
    };

    let mut removed = vec![false; n_nodes];
    let mut alive = vec![true; graph.triples.len()];
    let mut queue: VecDeque<usize> = (0..n_nodes).filter(|&n| degree[n] < threshold).collect();
    let mut any_removed = false;

    while let Some(node) = queue.pop_front() {
        if removed[node] {
            continue;
        }
        removed[node] = true;
        any_removed = true;
        for &ti in &incident[node] {
            if !alive[ti] {
                continue;
            }
            alive[ti] = false;
            let [u, i, g] = nodes_of(&graph.triples[ti]);
            let mut lowered = |n: usize, degree: &mut Vec<usize>| {
                degree[n] -= 1;
                if !removed[n] && degree[n] < threshold {
                    queue.push_back(n);
                }
            };
            match mode {
                DegreeMode::Triples => {
                    for n in [u, i, g] {
                        lowered(n, &mut degree);
                    }
                }
                DegreeMode::DistinctNeighbors => {
                    for pair in [(u, i), (u, g), (i, g)] {
                        let c = pair_counts.get_mut(&pair).expect("pair counted");
                        *c -= 1;
                        if *c == 0 {
                            lowered(pair.0, &mut degree);
                            lowered(pair.1, &mut degree);
                        }
                    }
                }
            }
        }
    }

    if !any_removed {
        return graph.clone();
    }
    graph.subgraph(
        graph
            .triples
            .iter()
            .zip(&alive)
            .filter(|(_, &a)| a)
            .map(|(t, _)| t),
    )
}

/// A user's held-out items, indexed in the split's shared item space.
///
/// Indices below the training item count are training items; larger ones
/// refer to [`SplitCorpus::unseen_items`] and can never be recommended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestSet {
    pub items: Vec<ItemIx>,
}

impl TestSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, item: ItemIx) -> bool {
        self.items.binary_search(&item).is_ok()
    }
}

#[derive(Debug, Clone)]
pub struct SplitCorpus {
    pub train: TripartiteGraph,
    /// Indexed by training user index; every training user has an entry.
    pub test: Vec<TestSet>,
    /// Items that only occur in the test period, indexed from
    /// `train.n_items()` upwards.
    pub unseen_items: IndexSet<String>,
    pub test_triples: Vec<Interaction>,
    pub split_ratio: f64,
    /// Realized fraction of triples that went to training.
    pub train_fraction: f64,
}

impl SplitCorpus {
    pub fn is_reachable(&self, item: ItemIx) -> bool {
        (item as usize) < self.train.n_items()
    }

    pub fn test_item_id(&self, item: ItemIx) -> &str {
        let n = self.train.n_items();
        if (item as usize) < n {
            self.train.item_id(item)
        } else {
            &self.unseen_items[item as usize - n]
        }
    }

    pub fn test_stats(&self) -> GraphStats {
        let mut users = HashSet::new();
        let mut items = HashSet::new();
        let mut tags = HashSet::new();
        for t in &self.test_triples {
            users.insert(t.user.as_str());
            items.insert(t.item.as_str());
            tags.insert(t.tag.as_str());
        }
        GraphStats {
            users: users.len(),
            items: items.len(),
            tags: tags.len(),
            triples: self.test_triples.len(),
        }
    }

    /// Train, test and combined counts. `total` is the graph the split was
    /// taken from.
    pub fn summary(&self, total: &TripartiteGraph) -> SplitSummary {
        SplitSummary {
            train: self.train.stats(),
            test: self.test_stats(),
            total: total.stats(),
            split_ratio: self.split_ratio,
            train_fraction: self.train_fraction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitSummary {
    pub train: GraphStats,
    pub test: GraphStats,
    pub total: GraphStats,
    pub split_ratio: f64,
    pub train_fraction: f64,
}

impl SplitSummary {
    /// `key=value` lines, one per count.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (name, s) in [("train", self.train), ("test", self.test), ("total", self.total)] {
            writeln!(w, "{name}.users={}", s.users)?;
            writeln!(w, "{name}.items={}", s.items)?;
            writeln!(w, "{name}.tags={}", s.tags)?;
            writeln!(w, "{name}.triples={}", s.triples)?;
        }
        writeln!(w, "split_ratio={}", self.split_ratio)?;
        writeln!(w, "train_fraction={:.5}", self.train_fraction)?;
        w.flush()
    }
}

/// Number of a user's `n` triples that go to the test side.
fn test_count(n: usize, ratio: f64) -> usize {
    // Guard against 0.2 * 5 landing a hair above 1.0.
    let raw = ((1.0 - ratio) * n as f64 - 1e-9).ceil().max(0.0) as usize;
    raw.clamp(1, n - 1)
}

/// Splits each user's triples chronologically: the latest
/// `ceil((1 - ratio) * n_u)` go to test (at least one, at most `n_u - 1`),
/// the rest to train. Ties in time are ordered by item then tag index.
pub fn temporal_split(graph: &TripartiteGraph, ratio: f64) -> Result<SplitCorpus> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::config(format!("split ratio {ratio} not in (0, 1)")));
    }
    if graph.is_empty() {
        return Err(Error::EmptyGraph);
    }

    let mut per_user: Vec<Vec<usize>> = vec![Vec::new(); graph.n_users()];
    for (i, t) in graph.triples.iter().enumerate() {
        per_user[t.user as usize].push(i);
    }

    let mut is_test = vec![false; graph.n_triples()];
    for (user, idxs) in per_user.iter_mut().enumerate() {
        if idxs.len() < 2 {
            return Err(Error::UserTooSmall(graph.user_id(user as UserIx).to_owned()));
        }
        idxs.sort_by_key(|&i| {
            let t = &graph.triples[i];
            (t.timestamp, t.item, t.tag)
        });
        let n_test = test_count(idxs.len(), ratio);
        for &i in &idxs[idxs.len() - n_test..] {
            is_test[i] = true;
        }
    }

    let train = graph.subgraph(
        graph
            .triples
            .iter()
            .zip(&is_test)
            .filter(|(_, &test)| !test)
            .map(|(t, _)| t),
    );

    let n_train_items = train.n_items();
    let mut unseen_items = IndexSet::new();
    let mut raw_test: Vec<Vec<ItemIx>> = vec![Vec::new(); train.n_users()];
    let mut test_triples = Vec::new();
    for (t, _) in graph.triples.iter().zip(&is_test).filter(|(_, &test)| test) {
        let it = graph.interaction(t);
        let user = train
            .user_index(&it.user)
            .expect("every user keeps at least one training triple");
        let item = match train.item_index(&it.item) {
            Some(ix) => ix,
            None => (n_train_items + unseen_items.insert_full(it.item.clone()).0) as ItemIx,
        };
        raw_test[user as usize].push(item);
        test_triples.push(it);
    }

    let test = raw_test
        .into_iter()
        .enumerate()
        .map(|(user, mut items)| {
            items.sort_unstable();
            items.dedup();
            let trained = train.user_items(user as UserIx);
            let fresh: Vec<ItemIx> = items
                .iter()
                .copied()
                .filter(|i| trained.binary_search(i).is_err())
                .collect();
            TestSet {
                items: if fresh.is_empty() { items } else { fresh },
            }
        })
        .collect();

    let train_fraction = train.n_triples() as f64 / graph.n_triples() as f64;
    Ok(SplitCorpus {
        train,
        test,
        unseen_items,
        test_triples,
        split_ratio: ratio,
        train_fraction,
    })
}
