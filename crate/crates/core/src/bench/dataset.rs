use std::fs;
use std::path::Path;

use log::warn;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::config::{DatasetSpec, SyntheticFeatures};
use crate::error::{Error, Result};
use crate::eval::EvalData;
use crate::features::{load_features, FeatureKind, FeatureMatrix};
use crate::graph::{average_degree, edge_homophily, load_edge_list, load_labels, Graph, IdMap, NodeLabels};
use crate::synth::{generate, gt_scalar_feature, GroundTruth, SynthConfig};

/// A loaded or generated network with whatever node data came with it.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub ids: IdMap,
    /// Class labels (synthetic: argmax of the planted memberships).
    pub labels: Option<NodeLabels>,
    pub features: Option<FeatureMatrix>,
    /// Categorical attribute for MTCOV's attribute policy.
    pub scalar_attribute: Option<NodeLabels>,
    pub ground_truth: Option<GroundTruth>,
    /// Seed the network was generated from (synthetic only).
    pub data_seed: Option<u64>,
}

impl Dataset {
    pub fn synthetic(cfg: &SynthConfig, features: SyntheticFeatures) -> Result<Self> {
        let (graph, gt) = generate(cfg)?;
        let labels = gt_scalar_feature(&gt);
        let features = match features {
            SyntheticFeatures::Membership => Some(FeatureMatrix::new(gt.u.clone(), FeatureKind::Attribute)),
            SyntheticFeatures::None => None,
        };
        Ok(Self {
            name: format!("synthetic-{}-n{}-k{}", cfg.structure, cfg.n_nodes, cfg.target_avg_degree),
            ids: IdMap::identity(graph.n_nodes()),
            graph,
            scalar_attribute: Some(labels.clone()),
            labels: Some(labels),
            features,
            ground_truth: Some(gt),
            data_seed: Some(cfg.seed),
        })
    }

    pub fn from_files(
        name: Option<&str>,
        edges: &Path,
        directed: bool,
        labels: Option<&Path>,
        features: Option<&Path>,
        attribute: Option<&Path>,
    ) -> Result<Self> {
        let (graph, ids) = load_edge_list(edges, directed)?;
        let labels = labels.map(|p| load_labels(p, &ids).map(|(l, _)| l)).transpose()?;
        let features = features.map(|p| load_features(p, &ids)).transpose()?;
        let scalar_attribute = attribute.map(|p| load_labels(p, &ids).map(|(l, _)| l)).transpose()?;
        let name = name.map(str::to_owned).unwrap_or_else(|| {
            edges.file_stem().map_or("dataset".into(), |s| s.to_string_lossy().into_owned())
        });
        Ok(Self { name, graph, ids, labels, features, scalar_attribute, ground_truth: None, data_seed: None })
    }

    /// Planetoid citation layout: `<name>.content` holds `id f_1 … f_F label`
    /// per paper, `<name>.cites` holds `cited citing` pairs. The graph is
    /// undirected; citations to papers without a content row are dropped.
    pub fn planetoid(dir: &Path, name: &str) -> Result<Self> {
        let content_path = dir.join(format!("{name}.content"));
        let text = fs::read_to_string(&content_path).map_err(|e| Error::io(&content_path, e))?;
        let mut ids = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut class_names: Vec<String> = Vec::new();
        let mut labels = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if fields.len() < 3 {
                return Err(Error::Parse {
                    path: content_path.clone(),
                    line: lineno + 1,
                    message: "expected id, features and label".into(),
                });
            }
            ids.push(fields[0].to_owned());
            let values = fields[1..fields.len() - 1]
                .iter()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse { path: content_path.clone(), line: lineno + 1, message: e.to_string() })?;
            if rows.first().is_some_and(|r| r.len() != values.len()) {
                return Err(Error::Parse {
                    path: content_path.clone(),
                    line: lineno + 1,
                    message: "inconsistent feature count".into(),
                });
            }
            rows.push(values);
            let class = fields[fields.len() - 1];
            let index = class_names.iter().position(|c| c == class).unwrap_or_else(|| {
                class_names.push(class.to_owned());
                class_names.len() - 1
            });
            labels.push(index);
        }
        let ids = IdMap::from_ids(ids);
        let n = ids.len();
        let f = rows.first().map_or(0, Vec::len);
        let features = Array2::from_shape_fn((n, f), |(i, j)| rows[i][j]);

        let cites_path = dir.join(format!("{name}.cites"));
        let text = fs::read_to_string(&cites_path).map_err(|e| Error::io(&cites_path, e))?;
        let mut dyads = Vec::new();
        let mut dropped = 0usize;
        for line in text.lines() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                continue;
            }
            match (ids.get(fields[0]), ids.get(fields[1])) {
                (Some(a), Some(b)) if a != b => dyads.push((a, b)),
                _ => dropped += 1,
            }
        }
        if dropped > 0 {
            warn!("{}: dropped {dropped} citation(s) with unknown endpoints or self-loops", cites_path.display());
        }
        Ok(Self {
            name: name.to_owned(),
            graph: Graph::new(n, false, dyads)?,
            ids,
            labels: Some(NodeLabels(labels)),
            features: Some(FeatureMatrix::new(features, FeatureKind::Attribute)),
            scalar_attribute: None,
            ground_truth: None,
            data_seed: None,
        })
    }

    /// Loads `spec`; synthetic specs are generated with `synth_seed`.
    pub fn load(spec: &DatasetSpec, synth_seed: u64, features: SyntheticFeatures) -> Result<Self> {
        match spec {
            DatasetSpec::Synthetic(cfg) => Self::synthetic(&SynthConfig { seed: synth_seed, ..cfg.clone() }, features),
            DatasetSpec::Files { name, edges, directed, labels, features, attribute } => Self::from_files(
                name.as_deref(),
                edges,
                *directed,
                labels.as_deref(),
                features.as_deref(),
                attribute.as_deref(),
            ),
            DatasetSpec::Planetoid { dir, name } => Self::planetoid(dir, name),
        }
    }

    /// Clusters used by the clustered policy: the override, else the number
    /// of label classes, else 5.
    pub fn n_clusters(&self, override_k: Option<usize>) -> usize {
        override_k
            .or_else(|| self.labels.as_ref().map(NodeLabels::n_distinct))
            .unwrap_or(5)
            .max(1)
    }

    pub fn eval_data(&self, override_k: Option<usize>) -> EvalData<'_> {
        EvalData {
            graph: &self.graph,
            features: self.features.as_ref(),
            scalar_attribute: self.scalar_attribute.as_ref(),
            n_clusters: self.n_clusters(override_k),
        }
    }

    pub fn homophily(&self) -> Option<f64> {
        self.labels.as_ref().and_then(|l| edge_homophily(&self.graph, l).ok())
    }

    pub fn stats(&self) -> DatasetStats {
        DatasetStats {
            dataset: self.name.clone(),
            directed: self.graph.is_directed(),
            n_nodes: self.graph.n_nodes(),
            n_edges: self.graph.canonical_edges().len(),
            avg_degree: average_degree(&self.graph),
            homophily: self.homophily(),
            n_features: self.features.as_ref().map(FeatureMatrix::n_features),
        }
    }
}

/// One row of the dataset statistics table. Missing columns print as `-`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub dataset: String,
    pub directed: bool,
    pub n_nodes: usize,
    /// Edges as listed: ordered pairs if directed, unordered otherwise.
    pub n_edges: usize,
    pub avg_degree: f64,
    pub homophily: Option<f64>,
    pub n_features: Option<usize>,
}

impl DatasetStats {
    pub const HEADER: [&'static str; 7] = ["dataset", "directed", "N", "edges", "avg_degree", "h", "F"];

    pub fn cells(&self) -> [String; 7] {
        [
            self.dataset.clone(),
            self.directed.to_string(),
            self.n_nodes.to_string(),
            self.n_edges.to_string(),
            format!("{:.4}", self.avg_degree),
            self.homophily.map_or("-".into(), |h| format!("{h:.4}")),
            self.n_features.map_or("-".into(), |f| f.to_string()),
        ]
    }
}
