//! Combinatorial graphs: edges `[0, 1]` glued at order-three junctions,
//! optionally with pinned endpoints.
//!
//! An incidence is a pair `(edge, end)` with `end ∈ {0, 1}` naming which
//! parameter end of the edge is attached. Every incidence belongs to exactly
//! one junction or endpoint record.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// `(edge index, parameter end)`.
pub type Incidence = (usize, u8);

/// Unvalidated topology as read from a network file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RawTopology {
    pub edges: usize,
    #[serde(default)]
    pub junctions: Vec<Vec<Incidence>>,
    #[serde(default)]
    pub endpoints: Vec<Incidence>,
    #[serde(default, rename = "loop")]
    pub is_loop: bool,
}

/// A validated graph.
///
/// The loop variant (one edge whose ends are identified) hosts closed
/// curves. It is not a regular graph and [`GraphTopology::is_regular_graph`]
/// reports `false` for it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTopology", into = "RawTopology")]
pub struct GraphTopology {
    n_edges: usize,
    junctions: Vec<[Incidence; 3]>,
    endpoints: Vec<Incidence>,
    is_loop: bool,
}

impl GraphTopology {
    /// Single closed edge.
    pub fn closed_loop() -> Self {
        Self {
            n_edges: 1,
            junctions: Vec::new(),
            endpoints: Vec::new(),
            is_loop: true,
        }
    }

    /// Two junctions joined by three edges; every edge runs from junction 0
    /// (end 0) to junction 1 (end 1).
    pub fn theta() -> Self {
        validate_topology(&RawTopology {
            edges: 3,
            junctions: vec![vec![(0, 0), (1, 0), (2, 0)], vec![(0, 1), (1, 1), (2, 1)]],
            endpoints: Vec::new(),
            is_loop: false,
        })
        .expect("theta graph is valid")
    }

    /// One junction at end 0 of three edges, endpoints at end 1.
    pub fn triod() -> Self {
        validate_topology(&RawTopology {
            edges: 3,
            junctions: vec![vec![(0, 0), (1, 0), (2, 0)]],
            endpoints: vec![(0, 1), (1, 1), (2, 1)],
            is_loop: false,
        })
        .expect("triod graph is valid")
    }

    /// Single edge with both ends pinned (not a regular graph).
    pub fn segment() -> Self {
        Self {
            n_edges: 1,
            junctions: Vec::new(),
            endpoints: vec![(0, 0), (0, 1)],
            is_loop: false,
        }
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn n_junctions(&self) -> usize {
        self.junctions.len()
    }

    pub fn junctions(&self) -> &[[Incidence; 3]] {
        &self.junctions
    }

    pub fn endpoints(&self) -> &[Incidence] {
        &self.endpoints
    }

    pub fn is_loop(&self) -> bool {
        self.is_loop
    }

    /// True for graphs whose every vertex is an order-three junction or an
    /// endpoint. The loop extension and the pinned segment are not regular.
    pub fn is_regular_graph(&self) -> bool {
        !self.is_loop && !self.junctions.is_empty()
    }

    /// Three incident `(edge, end)` pairs of junction `m`, sorted by edge.
    pub fn junction_incidence(&self, m: usize) -> Result<[Incidence; 3]> {
        let mut rec = *self.junctions.get(m).ok_or(Error::IndexOutOfRange {
            index: m,
            len: self.junctions.len(),
        })?;
        rec.sort_unstable();
        Ok(rec)
    }

    /// What is attached to `(edge, end)`.
    pub fn attachment(&self, edge: usize, end: u8) -> Attachment {
        if self.is_loop {
            return Attachment::Closed;
        }
        for (m, rec) in self.junctions.iter().enumerate() {
            if rec.contains(&(edge, end)) {
                return Attachment::Junction(m);
            }
        }
        Attachment::Endpoint
    }
}

/// Vertex type at one end of an edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Attachment {
    Junction(usize),
    Endpoint,
    /// The other end of the same closed edge.
    Closed,
}

impl TryFrom<RawTopology> for GraphTopology {
    type Error = Error;
    fn try_from(raw: RawTopology) -> Result<Self> {
        validate_topology(&raw)
    }
}

impl From<GraphTopology> for RawTopology {
    fn from(g: GraphTopology) -> Self {
        RawTopology {
            edges: g.n_edges,
            junctions: g.junctions.iter().map(|r| r.to_vec()).collect(),
            endpoints: g.endpoints,
            is_loop: g.is_loop,
        }
    }
}

impl From<&GraphTopology> for RawTopology {
    fn from(g: &GraphTopology) -> Self {
        g.clone().into()
    }
}

/// Checks the raw records and builds a [`GraphTopology`].
pub fn validate_topology(raw: &RawTopology) -> Result<GraphTopology> {
    if raw.is_loop {
        if raw.edges != 1 || !raw.junctions.is_empty() || !raw.endpoints.is_empty() {
            return Err(Error::InvalidLoop(
                "a loop has exactly one edge and no junction or endpoint records".into(),
            ));
        }
        return Ok(GraphTopology::closed_loop());
    }
    let n = raw.edges;
    if n == 0 {
        return Err(Error::Disconnected);
    }
    let check_edge = |edge: usize| {
        if edge >= n {
            Err(Error::EdgeOutOfRange { edge, n_edges: n })
        } else {
            Ok(())
        }
    };
    for rec in &raw.junctions {
        for &(e, end) in rec {
            check_edge(e)?;
            if end > 1 {
                return Err(Error::DomainError(format!("parameter end {end} is not 0 or 1")));
            }
        }
    }
    for &(e, end) in &raw.endpoints {
        check_edge(e)?;
        if end > 1 {
            return Err(Error::DomainError(format!("parameter end {end} is not 0 or 1")));
        }
    }

    let mut junctions = Vec::with_capacity(raw.junctions.len());
    for (m, rec) in raw.junctions.iter().enumerate() {
        if rec.len() != 3 {
            return Err(Error::JunctionOrder { junction: m });
        }
        let (a, b, c) = (rec[0].0, rec[1].0, rec[2].0);
        if a == b || b == c || a == c {
            return Err(Error::JunctionOrder { junction: m });
        }
        junctions.push([rec[0], rec[1], rec[2]]);
    }

    let mut used = vec![[false; 2]; n];
    let mut mark = |(e, end): Incidence| -> Result<()> {
        let slot = &mut used[e][end as usize];
        if *slot {
            return Err(Error::DuplicateIncidence { edge: e, end });
        }
        *slot = true;
        Ok(())
    };
    for rec in &junctions {
        for &inc in rec {
            mark(inc)?;
        }
    }
    for &inc in &raw.endpoints {
        mark(inc)?;
    }
    // A lone edge pinned at both ends cannot follow the end-1 convention.
    let pinned_segment = n == 1 && junctions.is_empty() && raw.endpoints.len() == 2;
    for &(e, end) in &raw.endpoints {
        if end == 0 && !pinned_segment {
            return Err(Error::EndpointConvention { edge: e });
        }
    }
    for (e, ends) in used.iter().enumerate() {
        for end in 0..2u8 {
            if !ends[end as usize] {
                return Err(Error::UnattachedEnd { edge: e, end });
            }
        }
    }

    // Connectivity over edges: edges sharing a junction are adjacent.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for rec in &junctions {
        let r0 = find(&mut parent, rec[0].0);
        for &(e, _) in &rec[1..] {
            let r = find(&mut parent, e);
            parent[r] = r0;
        }
    }
    let root = find(&mut parent, 0);
    if (1..n).any(|e| find(&mut parent, e) != root) {
        return Err(Error::Disconnected);
    }

    let mut endpoints = raw.endpoints.clone();
    endpoints.sort_unstable();
    Ok(GraphTopology {
        n_edges: n,
        junctions,
        endpoints,
        is_loop: false,
    })
}
