use std::collections::HashMap;
use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{Graph, NodeLabels};
use crate::error::{Error, Result};

/// Dense re-indexing of external node ids, in order of first appearance.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdMap {
    ids: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl IdMap {
    /// Identity map `"0" .. "n-1"`.
    pub fn identity(n: usize) -> Self {
        let mut map = Self::default();
        for i in 0..n {
            map.intern(&i.to_string());
        }
        map
    }

    pub fn from_ids(ids: Vec<String>) -> Self {
        let index = ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Self { ids, index }
    }

    fn intern(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len();
        self.ids.push(id.to_owned());
        self.index.insert(id.to_owned(), i);
        i
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn external(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Reads a whitespace-separated `src dst` edge list. `#` lines are comments.
///
/// Node ids are re-indexed densely in order of first appearance. Self-loops
/// are dropped (their endpoint still counts as a node) and duplicates merged.
pub fn load_edge_list(path: impl AsRef<Path>, directed: bool) -> Result<(Graph, IdMap)> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut ids = IdMap::default();
    let mut dyads = Vec::new();
    let mut self_loops = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let (Some(src), Some(dst)) = (fields.next(), fields.next()) else {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: lineno + 1,
                message: format!("expected two node ids, got {line:?}"),
            });
        };
        if fields.next().is_some() {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: lineno + 1,
                message: format!("expected two node ids, got {line:?}"),
            });
        }
        let i = ids.intern(src);
        let j = ids.intern(dst);
        if i == j {
            self_loops += 1;
        } else {
            dyads.push((i, j));
        }
    }
    if self_loops > 0 {
        warn!("{}: dropped {self_loops} self-loop(s)", path.display());
    }
    let graph = Graph::new(ids.len(), directed, dyads)?;
    Ok((graph, ids))
}

/// Reads `node_id label` lines. Labels may be arbitrary tokens; classes are
/// numbered in order of first appearance. Every node must be labelled.
pub fn load_labels(path: impl AsRef<Path>, ids: &IdMap) -> Result<(NodeLabels, Vec<String>)> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut labels = vec![None; ids.len()];
    let mut classes: Vec<String> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_owned(),
            line: lineno + 1,
            message,
        };
        let mut fields = line.split_whitespace();
        let (Some(node), Some(class)) = (fields.next(), fields.next()) else {
            return Err(parse_err(format!("expected `node_id label`, got {line:?}")));
        };
        let Some(idx) = ids.get(node) else {
            return Err(parse_err(format!("node id {node:?} not present in the graph")));
        };
        let class_idx = match classes.iter().position(|c| c == class) {
            Some(c) => c,
            None => {
                classes.push(class.to_owned());
                classes.len() - 1
            }
        };
        labels[idx] = Some(class_idx);
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            l.ok_or_else(|| {
                Error::InvalidArgument(format!("node {:?} has no label", ids.external(i)))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((NodeLabels(labels), classes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_simple_directed_list() {
        let f = file("0 1\n1 2\n");
        let (g, ids) = load_edge_list(f.path(), true).unwrap();
        assert_eq!(g.n_nodes(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(ids.external(2), "2");
    }

    #[test]
    fn self_loop_is_dropped_but_node_counted() {
        let f = file("0 1\n1 2\n3 3\n");
        let (g, _) = load_edge_list(f.path(), true).unwrap();
        assert_eq!(g.n_nodes(), 4);
        assert_eq!(g.n_edges(), 2);
    }

    #[test]
    fn string_ids_reindexed_by_first_appearance() {
        let f = file("# comment\nalice bob\ncarol alice\nbob alice\n");
        let (g, ids) = load_edge_list(f.path(), true).unwrap();
        assert_eq!(ids.ids(), &["alice", "bob", "carol"]);
        assert!(g.has_edge(0, 1) && g.has_edge(2, 0) && g.has_edge(1, 0));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let f = file("0 1\n2\n");
        match load_edge_list(f.path(), true) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_edge_list("/nonexistent/edges.txt", true),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn labels_follow_id_map() {
        let edges = file("a b\nb c\n");
        let (_, ids) = load_edge_list(edges.path(), false).unwrap();
        let labels = file("c x\na y\nb x\n");
        let (l, classes) = load_labels(labels.path(), &ids).unwrap();
        assert_eq!(l.0, vec![1, 0, 0]);
        assert_eq!(classes, vec!["x", "y"]);

        let partial = file("a x\n");
        assert!(load_labels(partial.path(), &ids).is_err());
    }
}
