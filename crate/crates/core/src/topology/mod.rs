//! Coupling graphs, the modified Laplacian, its consensus / disagreement
//! split, and the gain conditions for tracking and synchronization.

mod basis;
mod conditions;
mod gains;
mod graph;
mod laplacian;

use serde::{Deserialize, Serialize};

pub use basis::SyncBasis;
pub use conditions::{check_conditions, ring_tracking_margin, ConditionReport};
pub use gains::{DiagonalSpec, GainSpec, Gains, MatrixSpec};
pub use graph::{CouplingGraph, GraphKind, GraphOptions, Link};
pub use laplacian::ModifiedLaplacian;

use crate::error::{Error, Result};

/// Graph description file. Member indices are one-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub kind: GraphKind,
    pub p: usize,
    #[serde(default)]
    pub edges: Option<Vec<[usize; 2]>>,
    #[serde(default)]
    pub partial_mask: Option<Vec<f64>>,
    #[serde(default)]
    pub inhibitory_link: Option<[usize; 2]>,
}

impl GraphSpec {
    pub fn new(kind: GraphKind, p: usize) -> Self {
        Self {
            kind,
            p,
            edges: None,
            partial_mask: None,
            inhibitory_link: None,
        }
    }

    pub fn build(&self) -> Result<CouplingGraph> {
        let to_zero = |i: usize| {
            i.checked_sub(1)
                .ok_or_else(|| Error::Graph("member indices are one-based".into()))
        };
        let edges = match &self.edges {
            Some(list) => Some(
                list.iter()
                    .map(|&[a, b]| Ok((to_zero(a)?, to_zero(b)?)))
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        let inhibitory_link = match self.inhibitory_link {
            Some([a, b]) => Some((to_zero(a)?, to_zero(b)?)),
            None => None,
        };
        CouplingGraph::build(
            self.kind,
            self.p,
            &GraphOptions {
                edges,
                partial_mask: self.partial_mask.clone(),
                inhibitory_link,
            },
        )
    }
}

/// Piecewise-constant switching topology: segment `k` is active from its
/// start time until the next segment starts.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSchedule {
    segments: Vec<(f64, CouplingGraph)>,
}

impl GraphSchedule {
    pub fn constant(graph: CouplingGraph) -> Self {
        Self {
            segments: vec![(0.0, graph)],
        }
    }

    pub fn new(mut segments: Vec<(f64, CouplingGraph)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Graph("a graph schedule needs at least one segment".into()));
        }
        segments.sort_by(|a, b| a.0.total_cmp(&b.0));
        let p = segments[0].1.size();
        if segments.iter().any(|(_, g)| g.size() != p) {
            return Err(Error::Graph("every scheduled graph must have the same p".into()));
        }
        if segments[0].0 > 0.0 {
            return Err(Error::Graph("the first graph segment must start at t = 0".into()));
        }
        Ok(Self { segments })
    }

    /// Index of the segment active at time `t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.segments
            .iter()
            .rposition(|(start, _)| *start <= t)
            .unwrap_or(0)
    }

    pub fn graph(&self, index: usize) -> &CouplingGraph {
        &self.segments[index].1
    }

    pub fn at(&self, t: f64) -> &CouplingGraph {
        self.graph(self.index_at(t))
    }

    pub fn initial(&self) -> &CouplingGraph {
        &self.segments[0].1
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn size(&self) -> usize {
        self.segments[0].1.size()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_file_uses_one_based_indices() {
        let spec: GraphSpec = toml::from_str(
            r#"
            kind = "ring"
            p = 4
            inhibitory_link = [1, 3]
            "#,
        )
        .unwrap();
        let g = spec.build().unwrap();
        assert_eq!(g.inhibitory_link(), Some((0, 2)));

        let bad = GraphSpec {
            inhibitory_link: Some([0, 2]),
            ..GraphSpec::new(GraphKind::Ring, 4)
        };
        assert!(bad.build().is_err());
    }

    #[test]
    fn schedule_picks_active_segment() {
        let s = GraphSchedule::new(vec![
            (5.0, CouplingGraph::inline(4).unwrap()),
            (0.0, CouplingGraph::ring(4).unwrap()),
        ])
        .unwrap();
        assert_eq!(s.at(0.0).kind(), GraphKind::Ring);
        assert_eq!(s.at(4.999).kind(), GraphKind::Ring);
        assert_eq!(s.at(5.0).kind(), GraphKind::Inline);
    }
}
