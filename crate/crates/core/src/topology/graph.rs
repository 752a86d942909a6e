use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphKind {
    /// Two-way ring, `N_i = {i-1, i+1}` cyclically.
    Ring,
    /// Open chain whose endpoints couple their spare `K2` back to themselves.
    Inline,
    /// Regular digraph; defaults to the one-way ring `N_i = {i-1}`.
    RegularDigraph,
    /// Explicit undirected edge list that must be regular.
    CustomRegular,
}

/// One inbound coupling: member `from` sends its composite variable with the
/// multiplier `weight` on `K2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub from: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GraphOptions {
    /// Zero-based `(from, to)` pairs. Directed for `RegularDigraph`, undirected
    /// for `CustomRegular`.
    pub edges: Option<Vec<(usize, usize)>>,
    /// Diagonal of the 0/1 selector `P` applied to neighbor signals.
    pub partial_mask: Option<Vec<f64>>,
    /// Zero-based pair `(a, b)` joined by a single inhibitory link.
    pub inhibitory_link: Option<(usize, usize)>,
}

/// A regular coupling graph over `p` members. Members are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingGraph {
    kind: GraphKind,
    p: usize,
    inbound: Vec<Vec<Link>>,
    directed: bool,
    partial: Option<DVector<f64>>,
    inhibitory: Option<(usize, usize)>,
}

impl CouplingGraph {
    pub fn build(kind: GraphKind, p: usize, options: &GraphOptions) -> Result<Self> {
        if p < 2 {
            return Err(Error::Graph(format!("a coupled network needs p >= 2, got {p}")));
        }
        let inbound = match kind {
            GraphKind::Ring => {
                reject_edges(kind, options)?;
                ring(p)
            }
            GraphKind::Inline => {
                reject_edges(kind, options)?;
                inline(p)
            }
            GraphKind::RegularDigraph => {
                let edges = options
                    .edges
                    .clone()
                    .unwrap_or_else(|| (0..p).map(|i| ((i + p - 1) % p, i)).collect());
                weighted(p, &edges)?
            }
            GraphKind::CustomRegular => {
                let edges = options.edges.as_ref().ok_or_else(|| {
                    Error::Graph("custom-regular graphs need an explicit edge list".into())
                })?;
                let both: Vec<_> = edges.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
                weighted(p, &both)?
            }
        };

        let degree = inbound[0].len();
        if let Some((i, links)) = inbound.iter().enumerate().find(|(_, l)| l.len() != degree) {
            return Err(Error::Graph(format!(
                "graph is not regular: member {} has {} neighbors while member 1 has {degree}; \
                 non-regular structures must be built as a concurrent hierarchy of regular groups",
                i + 1,
                links.len()
            )));
        }

        let directed = inbound.iter().enumerate().any(|(i, links)| {
            links
                .iter()
                .filter(|l| l.from != i)
                .any(|l| !inbound[l.from].iter().any(|back| back.from == i))
        });

        let partial = options.partial_mask.as_deref().map(selector_from).transpose()?;

        if let Some((a, b)) = options.inhibitory_link {
            if a >= p || b >= p || a == b {
                return Err(Error::Graph(format!(
                    "inhibitory link ({}, {}) must join two distinct members of 1..={p}",
                    a + 1,
                    b + 1
                )));
            }
        }

        Ok(Self {
            kind,
            p,
            inbound,
            directed,
            partial,
            inhibitory: options.inhibitory_link,
        })
    }

    pub fn ring(p: usize) -> Result<Self> {
        Self::build(GraphKind::Ring, p, &GraphOptions::default())
    }

    pub fn inline(p: usize) -> Result<Self> {
        Self::build(GraphKind::Inline, p, &GraphOptions::default())
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.p
    }

    /// Inbound neighbor count `m`, identical for every member.
    pub fn degree(&self) -> usize {
        self.inbound[0].len()
    }

    pub fn neighbors(&self, i: usize) -> &[Link] {
        &self.inbound[i]
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn partial_mask(&self) -> Option<&DVector<f64>> {
        self.partial.as_ref()
    }

    pub fn inhibitory_link(&self) -> Option<(usize, usize)> {
        self.inhibitory
    }

    /// True for inline endpoints, which couple to themselves once.
    pub fn is_endpoint(&self, i: usize) -> bool {
        self.inbound[i].iter().any(|l| l.from == i)
    }

    /// `P` as a dense diagonal, identity when no partial mask is set.
    pub fn selector(&self, n: usize) -> Result<DVector<f64>> {
        match &self.partial {
            Some(mask) => {
                check_len("partial mask", n, mask.len())?;
                Ok(mask.clone())
            }
            None => Ok(DVector::from_element(n, 1.0)),
        }
    }

    pub fn with_partial_mask(mut self, mask: Vec<f64>) -> Result<Self> {
        self.partial = Some(selector_from(&mask)?);
        Ok(self)
    }

    pub fn with_inhibitory_link(mut self, a: usize, b: usize) -> Result<Self> {
        if a >= self.p || b >= self.p || a == b {
            return Err(Error::Graph(format!(
                "inhibitory link ({}, {}) must join two distinct members of 1..={}",
                a + 1,
                b + 1,
                self.p
            )));
        }
        self.inhibitory = Some((a, b));
        Ok(self)
    }
}

fn selector_from(mask: &[f64]) -> Result<DVector<f64>> {
    if mask.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Graph(format!(
            "partial selector entries must be 0 or 1, got {mask:?}"
        )));
    }
    Ok(DVector::from_column_slice(mask))
}

fn reject_edges(kind: GraphKind, options: &GraphOptions) -> Result<()> {
    if options.edges.is_some() {
        return Err(Error::Graph(format!(
            "{kind:?} graphs are fully determined by p; explicit edges need custom-regular or regular-digraph"
        )));
    }
    Ok(())
}

fn ring(p: usize) -> Vec<Vec<Link>> {
    if p == 2 {
        // Single coupling with the other member, weight K2.
        return vec![
            vec![Link { from: 1, weight: 1.0 }],
            vec![Link { from: 0, weight: 1.0 }],
        ];
    }
    (0..p)
        .map(|i| {
            vec![
                Link {
                    from: (i + p - 1) % p,
                    weight: 1.0,
                },
                Link {
                    from: (i + 1) % p,
                    weight: 1.0,
                },
            ]
        })
        .collect()
}

fn inline(p: usize) -> Vec<Vec<Link>> {
    (0..p)
        .map(|i| {
            let prev = if i == 0 { 0 } else { i - 1 };
            let next = if i + 1 == p { i } else { i + 1 };
            vec![
                Link {
                    from: prev,
                    weight: 1.0,
                },
                Link {
                    from: next,
                    weight: 1.0,
                },
            ]
        })
        .collect()
}

/// Inbound lists from directed `(from, to)` pairs with the `2/m` weighting.
fn weighted(p: usize, edges: &[(usize, usize)]) -> Result<Vec<Vec<Link>>> {
    let mut inbound: Vec<Vec<usize>> = vec![Vec::new(); p];
    for &(from, to) in edges {
        if from >= p || to >= p {
            return Err(Error::Graph(format!(
                "edge ({}, {}) references a member outside 1..={p}",
                from + 1,
                to + 1
            )));
        }
        if from == to {
            return Err(Error::Graph(format!("self-loop on member {}", from + 1)));
        }
        if inbound[to].contains(&from) {
            return Err(Error::Graph(format!(
                "duplicate edge ({}, {})",
                from + 1,
                to + 1
            )));
        }
        inbound[to].push(from);
    }
    Ok(inbound
        .into_iter()
        .map(|froms| {
            let m = froms.len().max(1) as f64;
            froms
                .into_iter()
                .map(|from| Link {
                    from,
                    weight: 2.0 / m,
                })
                .collect()
        })
        .collect())
}
