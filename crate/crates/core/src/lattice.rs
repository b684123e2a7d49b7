//! Interaction hypergraphs: sites, edges, per-edge Hamiltonian terms, and the
//! graph-geometric quantities (distances, boundary/shell/far edge sets, growth
//! constants) consumed by the locality bounds.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::operators::{hermiticity_residual, pauli, spectral_norm};

pub type SiteId = usize;

/// Default cap on the total Hilbert-space dimension.
pub const DEFAULT_DIM_CAP: usize = 1 << 14;

/// Tolerance on the max-entry residual of `M - M†` for term matrices.
pub const HERMITICITY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("unknown site identifier {0}")]
    UnknownSite(SiteId),
    #[error("edge {0} is empty")]
    EmptyEdge(usize),
    #[error("duplicate edge support at indices {0} and {1}")]
    DuplicateEdge(usize, usize),
    #[error("term {edge}: dimension {got} does not match edge support dimension {expected}")]
    TermDimension { edge: usize, expected: usize, got: usize },
    #[error("term {edge} is not Hermitian (residual {residual:.3e})")]
    NonHermitianTerm { edge: usize, residual: f64 },
    #[error("total Hilbert dimension {dim} exceeds cap {cap}")]
    DimCapExceeded { dim: usize, cap: usize },
    #[error("term count {terms} does not match edge count {edges}")]
    TermCount { terms: usize, edges: usize },
    #[error("empty site set")]
    EmptySiteSet,
    #[error("empty edge set")]
    EmptyEdgeSet,
    #[error("model spec: {0}")]
    BadSpec(String),
    #[error("chain needs at least 2 sites, got {0}")]
    ChainTooShort(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// An edge: a nonempty set of sites, stored as a sorted list.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge(Vec<SiteId>);

impl Edge {
    pub fn new(sites: impl IntoIterator<Item = SiteId>) -> Self {
        let mut v: Vec<SiteId> = sites.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Edge(v)
    }

    pub fn sites(&self) -> &[SiteId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, site: SiteId) -> bool {
        self.0.binary_search(&site).is_ok()
    }

    pub fn intersects(&self, sites: &[SiteId]) -> bool {
        self.0.iter().any(|s| sites.contains(s))
    }

    pub fn is_subset_of(&self, sites: &[SiteId]) -> bool {
        self.0.iter().all(|s| sites.contains(s))
    }
}

/// Graph constants entering the bound formulas: interaction strength `J`,
/// maximum edge cardinality `N`, maximum boundary-edge count `N∂`, and the
/// quadratic surface-growth constant `M` certified on this finite lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryConstants {
    pub j: f64,
    pub n_max: usize,
    pub n_boundary: usize,
    pub m_growth: f64,
}

/// A locally interacting lattice model: one Hermitian term per edge.
#[derive(Debug, Clone)]
pub struct LatticeModel {
    dims: Vec<usize>,
    edges: Vec<Edge>,
    terms: Vec<DMatrix<Complex64>>,
    site_edges: Vec<Vec<usize>>,
    site_adj: Vec<Vec<SiteId>>,
}

impl LatticeModel {
    pub fn new(
        dims: Vec<usize>,
        edges: Vec<Edge>,
        terms: Vec<DMatrix<Complex64>>,
    ) -> Result<Self, LatticeError> {
        Self::with_cap(dims, edges, terms, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(
        dims: Vec<usize>,
        edges: Vec<Edge>,
        terms: Vec<DMatrix<Complex64>>,
        cap: usize,
    ) -> Result<Self, LatticeError> {
        let n = dims.len();
        let mut total: usize = 1;
        for &d in &dims {
            total = total.saturating_mul(d);
        }
        if total > cap {
            return Err(LatticeError::DimCapExceeded { dim: total, cap });
        }
        if terms.len() != edges.len() {
            return Err(LatticeError::TermCount { terms: terms.len(), edges: edges.len() });
        }
        for (i, e) in edges.iter().enumerate() {
            if e.is_empty() {
                return Err(LatticeError::EmptyEdge(i));
            }
            if let Some(&s) = e.sites().iter().find(|&&s| s >= n) {
                return Err(LatticeError::UnknownSite(s));
            }
            for (j, f) in edges.iter().enumerate().take(i) {
                if e == f {
                    return Err(LatticeError::DuplicateEdge(j, i));
                }
            }
            let d: usize = e.sites().iter().map(|&s| dims[s]).product();
            if terms[i].nrows() != d || terms[i].ncols() != d {
                return Err(LatticeError::TermDimension { edge: i, expected: d, got: terms[i].nrows() });
            }
            let res = hermiticity_residual(&terms[i]);
            if res >= HERMITICITY_TOL {
                return Err(LatticeError::NonHermitianTerm { edge: i, residual: res });
            }
        }
        let mut site_edges = vec![Vec::new(); n];
        let mut site_adj: Vec<Vec<SiteId>> = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            for &s in e.sites() {
                site_edges[s].push(i);
                for &t in e.sites() {
                    if t != s && !site_adj[s].contains(&t) {
                        site_adj[s].push(t);
                    }
                }
            }
        }
        for a in &mut site_adj {
            a.sort_unstable();
        }
        Ok(LatticeModel { dims, edges, terms, site_edges, site_adj })
    }

    pub fn n_sites(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn term(&self, edge: usize) -> &DMatrix<Complex64> {
        &self.terms[edge]
    }

    pub fn all_edge_indices(&self) -> Vec<usize> {
        (0..self.edges.len()).collect()
    }

    pub fn all_sites(&self) -> Vec<SiteId> {
        (0..self.n_sites()).collect()
    }

    /// Edge indices incident to `site`.
    pub fn incident_edges(&self, site: SiteId) -> &[usize] {
        &self.site_edges[site]
    }

    fn check_site(&self, s: SiteId) -> Result<(), LatticeError> {
        if s >= self.n_sites() {
            return Err(LatticeError::UnknownSite(s));
        }
        Ok(())
    }

    /// Site distances from the set `sources` to every site, by breadth-first
    /// search on the share-an-edge adjacency graph. `None` marks sites that no
    /// chain of edges reaches.
    pub fn distances_from_set(&self, sources: &[SiteId]) -> Result<Vec<Option<usize>>, LatticeError> {
        if sources.is_empty() {
            return Err(LatticeError::EmptySiteSet);
        }
        let mut dist = vec![None; self.n_sites()];
        let mut frontier = Vec::new();
        for &s in sources {
            self.check_site(s)?;
            if dist[s].is_none() {
                dist[s] = Some(0);
                frontier.push(s);
            }
        }
        let mut depth = 0usize;
        while !frontier.is_empty() {
            depth += 1;
            let mut next = Vec::new();
            for &s in &frontier {
                for &t in &self.site_adj[s] {
                    if dist[t].is_none() {
                        dist[t] = Some(depth);
                        next.push(t);
                    }
                }
            }
            frontier = next;
        }
        Ok(dist)
    }

    /// The chain-of-edges distance between two sites; `None` if unreachable.
    pub fn site_distance(&self, x: SiteId, y: SiteId) -> Result<Option<usize>, LatticeError> {
        self.check_site(x)?;
        self.check_site(y)?;
        Ok(self.distances_from_set(&[x])?[y])
    }

    /// min over x∈X, y∈Y of the site distance; 0 when the sets intersect.
    pub fn set_distance(&self, xs: &[SiteId], ys: &[SiteId]) -> Result<Option<usize>, LatticeError> {
        if xs.is_empty() || ys.is_empty() {
            return Err(LatticeError::EmptySiteSet);
        }
        for &y in ys {
            self.check_site(y)?;
        }
        let dist = self.distances_from_set(xs)?;
        Ok(ys.iter().filter_map(|&y| dist[y]).min())
    }

    /// Boundary edge set A∂: edges overlapping both `a` and its complement.
    pub fn boundary_edges(&self, a: &[SiteId]) -> Vec<usize> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.intersects(a) && !e.is_subset_of(a))
            .map(|(i, _)| i)
            .collect()
    }

    /// Interior edge set 𝓐: edges fully contained in `a`.
    pub fn interior_edges(&self, a: &[SiteId]) -> Vec<usize> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_subset_of(a))
            .map(|(i, _)| i)
            .collect()
    }

    /// Distance of each edge from the site set `a`: the minimum over the
    /// edge's sites of the site distance. `None` for unreachable edges.
    pub fn edge_distances(&self, a: &[SiteId]) -> Result<Vec<Option<usize>>, LatticeError> {
        let dist = self.distances_from_set(a)?;
        Ok(self
            .edges
            .iter()
            .map(|e| e.sites().iter().filter_map(|&s| dist[s]).min())
            .collect())
    }

    /// Shell set C_R: edges not contained in `a`, at distance < R from it.
    pub fn shell_edges(&self, a: &[SiteId], r: usize) -> Result<Vec<usize>, LatticeError> {
        assert!(r >= 1, "shell radius must be >= 1");
        let ed = self.edge_distances(a)?;
        Ok((0..self.edges.len())
            .filter(|&i| !self.edges[i].is_subset_of(a) && matches!(ed[i], Some(d) if d < r))
            .collect())
    }

    /// Far set F_R: everything outside 𝓐 ∪ C_R, so 𝓔 = 𝓐 ∪ C_R ∪ F_R exactly.
    pub fn far_edges(&self, a: &[SiteId], r: usize) -> Result<Vec<usize>, LatticeError> {
        assert!(r >= 1, "shell radius must be >= 1");
        let ed = self.edge_distances(a)?;
        Ok((0..self.edges.len())
            .filter(|&i| {
                !self.edges[i].is_subset_of(a) && !matches!(ed[i], Some(d) if d < r)
            })
            .collect())
    }

    /// Largest finite site distance on the lattice (0 for a single site).
    pub fn diameter(&self) -> usize {
        let mut diam = 0usize;
        for x in 0..self.n_sites() {
            if let Ok(dist) = self.distances_from_set(&[x]) {
                for d in dist.into_iter().flatten() {
                    diam = diam.max(d);
                }
            }
        }
        diam
    }

    /// J, N, N∂ and the growth constant M, extracted from this lattice.
    ///
    /// M is the exact finite-lattice maximum of
    /// |{Y : d(x,Y) = n}| / (n+1)² over all sites x and all n, so the
    /// quadratic growth inequality holds on this lattice by construction.
    pub fn geometry_constants(&self) -> Result<GeometryConstants, LatticeError> {
        if self.edges.is_empty() {
            return Err(LatticeError::EmptyEdgeSet);
        }
        let j = self
            .terms
            .iter()
            .map(spectral_norm)
            .fold(0.0f64, f64::max);
        let n_max = self.edges.iter().map(Edge::len).max().unwrap_or(0);
        let n_boundary = self
            .edges
            .iter()
            .map(|e| self.boundary_edges(e.sites()).len())
            .max()
            .unwrap_or(0);
        let mut m_growth = 0.0f64;
        for x in 0..self.n_sites() {
            let ed = self.edge_distances(&[x])?;
            let mut counts: Vec<usize> = Vec::new();
            for d in ed.into_iter().flatten() {
                if counts.len() <= d {
                    counts.resize(d + 1, 0);
                }
                counts[d] += 1;
            }
            for (n, &c) in counts.iter().enumerate() {
                m_growth = m_growth.max(c as f64 / ((n + 1) * (n + 1)) as f64);
            }
        }
        Ok(GeometryConstants { j, n_max, n_boundary, m_growth })
    }

    /// Direct certificate that |{Y : d(x,Y) = n}| ≤ m (n+1)² for every site
    /// and every distance realized on this lattice.
    pub fn growth_certificate(&self, m: f64) -> Result<bool, LatticeError> {
        for x in 0..self.n_sites() {
            let ed = self.edge_distances(&[x])?;
            let mut counts: Vec<usize> = Vec::new();
            for d in ed.into_iter().flatten() {
                if counts.len() <= d {
                    counts.resize(d + 1, 0);
                }
                counts[d] += 1;
            }
            for (n, &c) in counts.iter().enumerate() {
                if c as f64 > m * ((n + 1) * (n + 1)) as f64 + 1e-12 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// A site subset with its derived edge sets, with edge distances cached.
#[derive(Debug, Clone)]
pub struct Subsystem {
    sites: Vec<SiteId>,
    complement: Vec<SiteId>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    edge_dist: Vec<Option<usize>>,
    interior_flag: Vec<bool>,
}

impl Subsystem {
    pub fn new(model: &LatticeModel, sites: impl IntoIterator<Item = SiteId>) -> Result<Self, LatticeError> {
        let mut sites: Vec<SiteId> = sites.into_iter().collect();
        sites.sort_unstable();
        sites.dedup();
        if sites.is_empty() {
            return Err(LatticeError::EmptySiteSet);
        }
        for &s in &sites {
            if s >= model.n_sites() {
                return Err(LatticeError::UnknownSite(s));
            }
        }
        let complement: Vec<SiteId> =
            (0..model.n_sites()).filter(|s| !sites.contains(s)).collect();
        let interior = model.interior_edges(&sites);
        let boundary = model.boundary_edges(&sites);
        let edge_dist = model.edge_distances(&sites)?;
        let mut interior_flag = vec![false; model.n_edges()];
        for &i in &interior {
            interior_flag[i] = true;
        }
        Ok(Subsystem { sites, complement, interior, boundary, edge_dist, interior_flag })
    }

    pub fn sites(&self) -> &[SiteId] {
        &self.sites
    }

    pub fn complement(&self) -> &[SiteId] {
        &self.complement
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    /// 𝓐, the edges contained in A.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// A∂, the edges crossing the boundary of A.
    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    /// C_R for this subsystem.
    pub fn shell(&self, r: usize) -> Vec<usize> {
        assert!(r >= 1, "shell radius must be >= 1");
        (0..self.edge_dist.len())
            .filter(|&i| !self.interior_flag[i] && matches!(self.edge_dist[i], Some(d) if d < r))
            .collect()
    }

    /// F_R for this subsystem.
    pub fn far(&self, r: usize) -> Vec<usize> {
        assert!(r >= 1, "shell radius must be >= 1");
        (0..self.edge_dist.len())
            .filter(|&i| !self.interior_flag[i] && !matches!(self.edge_dist[i], Some(d) if d < r))
            .collect()
    }

    pub fn edge_distance(&self, edge: usize) -> Option<usize> {
        self.edge_dist[edge]
    }

    pub fn is_full(&self, model: &LatticeModel) -> bool {
        self.sites.len() == model.n_sites()
    }
}

fn ising_edge_term(h: f64, field_positions: &[usize]) -> DMatrix<Complex64> {
    let sx = pauli::sx();
    let sz = pauli::sz();
    let id = pauli::id2();
    let mut term = sx.kronecker(&sx);
    for &pos in field_positions {
        let f = if pos == 0 { sz.kronecker(&id) } else { id.kronecker(&sz) };
        term += f * Complex64::new(h, 0.0);
    }
    term
}

/// Nearest-neighbour Ising chain: per-edge term σˣ⊗σˣ plus the field of the
/// edge's first site, h σᶻ⊗𝕀. On open chains the last site's field is folded
/// into the last edge; on rings the wrap edge carries the last site's field.
pub fn build_chain(n: usize, h: f64, periodic: bool) -> Result<LatticeModel, LatticeError> {
    if n < 2 {
        return Err(LatticeError::ChainTooShort(n));
    }
    let mut edges = Vec::new();
    let mut terms = Vec::new();
    for i in 0..n - 1 {
        edges.push(Edge::new([i, i + 1]));
        let mut fields = vec![0usize];
        if !periodic && i == n - 2 {
            fields.push(1);
        }
        terms.push(ising_edge_term(h, &fields));
    }
    if periodic && n > 2 {
        // sorted support is [0, n-1]; site n-1 sits at tensor position 1
        edges.push(Edge::new([0, n - 1]));
        terms.push(ising_edge_term(h, &[1]));
    }
    LatticeModel::new(vec![2; n], edges, terms)
}

/// 2D square lattice of w × h sites with two-site nearest-neighbour Ising
/// couplings. Each site's field lands on the first edge where it is the
/// smallest site, falling back to its last incident edge (the far corner).
pub fn build_square(w: usize, h_dim: usize, h_field: f64) -> Result<LatticeModel, LatticeError> {
    if w < 1 || h_dim < 1 || w * h_dim < 2 {
        return Err(LatticeError::ChainTooShort(w * h_dim));
    }
    let site = |r: usize, c: usize| r * w + c;
    let mut edges = Vec::new();
    for r in 0..h_dim {
        for c in 0..w {
            if c + 1 < w {
                edges.push(Edge::new([site(r, c), site(r, c + 1)]));
            }
            if r + 1 < h_dim {
                edges.push(Edge::new([site(r, c), site(r + 1, c)]));
            }
        }
    }
    let terms = ising_terms_for_edges(w * h_dim, &edges, h_field)?;
    LatticeModel::new(vec![2; w * h_dim], edges, terms)
}

/// Assign each site's field term to an incident two-site edge: the first edge
/// in which the site is the smallest member, else the site's last incident
/// edge. Returns one term per edge.
fn ising_terms_for_edges(
    n_sites: usize,
    edges: &[Edge],
    h: f64,
) -> Result<Vec<DMatrix<Complex64>>, LatticeError> {
    for (i, e) in edges.iter().enumerate() {
        if e.len() != 2 {
            return Err(LatticeError::BadSpec(format!(
                "ising terms require two-site edges; edge {i} has {} sites",
                e.len()
            )));
        }
    }
    let mut fields: Vec<Vec<usize>> = vec![Vec::new(); edges.len()];
    for s in 0..n_sites {
        let incident: Vec<usize> = edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.contains(s))
            .map(|(i, _)| i)
            .collect();
        if incident.is_empty() {
            return Err(LatticeError::BadSpec(format!("site {s} has no incident edge to carry its field")));
        }
        let chosen = incident
            .iter()
            .copied()
            .find(|&i| edges[i].sites()[0] == s)
            .unwrap_or(*incident.last().unwrap());
        let pos = edges[chosen].sites().iter().position(|&t| t == s).unwrap();
        fields[chosen].push(pos);
    }
    Ok(edges
        .iter()
        .enumerate()
        .map(|(i, _)| ising_edge_term(h, &fields[i]))
        .collect())
}

/// On-disk model description (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub schema_version: u32,
    pub sites: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    pub edges: Vec<Vec<SiteId>>,
    pub terms: TermSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermSpec {
    /// σˣσˣ couplings on every (two-site) edge, transverse field h per site.
    Ising { h: f64 },
    /// One explicit matrix per edge, rows of [re, im] pairs.
    Explicit(Vec<Vec<Vec<[f64; 2]>>>),
}

pub const MODEL_SCHEMA_VERSION: u32 = 1;

impl ModelSpec {
    pub fn to_model(&self) -> Result<LatticeModel, LatticeError> {
        if self.schema_version != MODEL_SCHEMA_VERSION {
            return Err(LatticeError::BadSpec(format!(
                "unsupported schema_version {} (expected {MODEL_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let dims = match &self.dims {
            Some(d) => {
                if d.len() != self.sites {
                    return Err(LatticeError::BadSpec("dims length must equal sites".into()));
                }
                d.clone()
            }
            None => vec![2; self.sites],
        };
        let edges: Vec<Edge> = self.edges.iter().map(|e| Edge::new(e.iter().copied())).collect();
        let terms = match &self.terms {
            TermSpec::Ising { h } => ising_terms_for_edges(self.sites, &edges, *h)?,
            TermSpec::Explicit(mats) => {
                if mats.len() != edges.len() {
                    return Err(LatticeError::BadSpec("one explicit matrix per edge required".into()));
                }
                mats.iter()
                    .map(|rows| {
                        let n = rows.len();
                        let mut m = DMatrix::<Complex64>::zeros(n, n);
                        for (i, row) in rows.iter().enumerate() {
                            if row.len() != n {
                                return Err(LatticeError::BadSpec("explicit matrix is not square".into()));
                            }
                            for (j, &[re, im]) in row.iter().enumerate() {
                                m[(i, j)] = Complex64::new(re, im);
                            }
                        }
                        Ok(m)
                    })
                    .collect::<Result<Vec<_>, _>>()?
            }
        };
        LatticeModel::new(dims, edges, terms)
    }

    /// Spec for an n-site transverse-field Ising chain.
    pub fn ising_chain(n: usize, h: f64, periodic: bool) -> Self {
        let mut edges: Vec<Vec<SiteId>> = (0..n.saturating_sub(1)).map(|i| vec![i, i + 1]).collect();
        if periodic && n > 2 {
            edges.push(vec![0, n - 1]);
        }
        ModelSpec {
            schema_version: MODEL_SCHEMA_VERSION,
            sites: n,
            dims: None,
            edges,
            terms: TermSpec::Ising { h },
        }
    }

    /// Spec carrying explicit per-edge matrices.
    pub fn explicit(dims: Vec<usize>, edges: Vec<Edge>, terms: Vec<DMatrix<Complex64>>) -> Self {
        let mats = terms
            .iter()
            .map(|m| {
                (0..m.nrows())
                    .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                    .collect()
            })
            .collect();
        ModelSpec {
            schema_version: MODEL_SCHEMA_VERSION,
            sites: dims.len(),
            dims: Some(dims),
            edges: edges.iter().map(|e| e.sites().to_vec()).collect(),
            terms: TermSpec::Explicit(mats),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, LatticeError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self, LatticeError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl LatticeModel {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self, LatticeError> {
        spec.to_model()
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self, LatticeError> {
        ModelSpec::from_path(path)?.to_model()
    }
}
