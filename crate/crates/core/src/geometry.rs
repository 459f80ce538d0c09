//! Uniform grids on the unit square, node classification for full, cavity and
//! partial-boundary configurations, and ordered boundary traces with normals
//! and quadrature weights.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub const MIN_CELLS: usize = 8;
pub const MAX_CELLS: usize = 1024;

/// Minimum separation, in cells, between an inclusion and the part of the
/// outer boundary it must not touch.
pub const CLEARANCE_CELLS: f64 = 4.0;

/// Uniform `(n+1) x (n+1)` node grid on `[0,1]²`. Node `(i, j)` has index
/// `j * (n + 1) + i` and coordinates `(i/n, j/n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    h: f64,
}

pub fn build_grid(n_cells_per_side: usize) -> Result<Grid> {
    Grid::new(n_cells_per_side)
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if !(MIN_CELLS..=MAX_CELLS).contains(&n) {
            return Err(LabError::Config(format!(
                "n_cells_per_side = {n} outside [{MIN_CELLS}, {MAX_CELLS}]"
            )));
        }
        Ok(Grid {
            n,
            h: 1.0 / n as f64,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Nodes per side, `n + 1`.
    #[inline]
    pub fn side(&self) -> usize {
        self.n + 1
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.side() * self.side()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.side() + i
    }

    #[inline]
    pub fn ij(&self, node: usize) -> (usize, usize) {
        (node % self.side(), node / self.side())
    }

    /// Coordinate of grid line `i`, computed as `i / n` so the last line is
    /// exactly `1.0`.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    #[inline]
    pub fn position(&self, node: usize) -> [f64; 2] {
        let (i, j) = self.ij(node);
        [self.coord(i), self.coord(j)]
    }

    #[inline]
    pub fn on_square_edge(&self, node: usize) -> bool {
        let (i, j) = self.ij(node);
        i == 0 || j == 0 || i == self.n || j == self.n
    }

    /// 4-neighbours (west, east, south, north) that exist on the grid.
    pub fn neighbors(&self, node: usize) -> [Option<usize>; 4] {
        let (i, j) = self.ij(node);
        let side = self.side();
        [
            (i > 0).then(|| node - 1),
            (i + 1 < side).then(|| node + 1),
            (j > 0).then(|| node - side),
            (j + 1 < side).then(|| node + side),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NodeKind {
    Interior,
    OuterBoundary,
    CavityBoundary,
    Excluded,
}

/// An interior inclusion `D` on which the solution vanishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Cavity {
    Disk { center: [f64; 2], radius: f64 },
    Rectangle { min: [f64; 2], max: [f64; 2] },
}

impl Cavity {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            Cavity::Disk { center, radius } => {
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                dx * dx + dy * dy <= radius * radius
            }
            Cavity::Rectangle { min, max } => {
                p[0] >= min[0] && p[0] <= max[0] && p[1] >= min[1] && p[1] <= max[1]
            }
        }
    }

    /// Smallest distance between the inclusion and the unit-square boundary.
    fn clearance(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        lo[0].min(lo[1]).min(1.0 - hi[0]).min(1.0 - hi[1])
    }

    fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        match *self {
            Cavity::Disk { center, radius } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
            Cavity::Rectangle { min, max } => (min, max),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Cavity::Disk { center, radius } => {
                radius > 0.0 && center.iter().chain([radius].iter()).all(|v| v.is_finite())
            }
            Cavity::Rectangle { min, max } => {
                min[0] < max[0] && min[1] < max[1] && min.iter().chain(&max).all(|v| v.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(LabError::Geometry(format!("degenerate cavity {self:?}")))
        }
    }

    pub fn perimeter(&self) -> f64 {
        match *self {
            Cavity::Disk { radius, .. } => 2.0 * PI * radius,
            Cavity::Rectangle { min, max } => 2.0 * ((max[0] - min[0]) + (max[1] - min[1])),
        }
    }

    /// Arc-length position of the projection of `p` onto the cavity boundary,
    /// in `[0, perimeter)`, counter-clockwise.
    fn arc_parameter(&self, p: [f64; 2]) -> f64 {
        match *self {
            Cavity::Disk { center, radius } => {
                let theta = (p[1] - center[1]).atan2(p[0] - center[0]);
                radius * theta.rem_euclid(2.0 * PI)
            }
            Cavity::Rectangle { min, max } => {
                let (w, hgt) = (max[0] - min[0], max[1] - min[1]);
                let x = p[0].clamp(min[0], max[0]);
                let y = p[1].clamp(min[1], max[1]);
                match rect_side(min, max, p) {
                    0 => x - min[0],
                    1 => w + (y - min[1]),
                    2 => w + hgt + (max[0] - x),
                    _ => 2.0 * w + hgt + (max[1] - y),
                }
            }
        }
    }

    /// Outward normal of the region `Ω \ D` at a cavity boundary point, i.e.
    /// pointing into the cavity.
    fn domain_normal(&self, p: [f64; 2]) -> [f64; 2] {
        match *self {
            Cavity::Disk { center, .. } => {
                let d = [center[0] - p[0], center[1] - p[1]];
                let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
                if len == 0.0 {
                    [1.0, 0.0]
                } else {
                    [d[0] / len, d[1] / len]
                }
            }
            Cavity::Rectangle { min, max } => match rect_side(min, max, p) {
                0 => [0.0, 1.0],
                1 => [-1.0, 0.0],
                2 => [0.0, -1.0],
                _ => [1.0, 0.0],
            },
        }
    }
}

/// Nearest rectangle side: 0 bottom, 1 right, 2 top, 3 left.
fn rect_side(min: [f64; 2], max: [f64; 2], p: [f64; 2]) -> usize {
    let d = [
        (p[1] - min[1]).abs(),
        (max[0] - p[0]).abs(),
        (max[1] - p[1]).abs(),
        (p[0] - min[0]).abs(),
    ];
    let mut best = 0;
    for k in 1..4 {
        if d[k] < d[best] {
            best = k;
        }
    }
    best
}

/// Sides of the unit square, in counter-clockwise order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Bottom,
    Right,
    Top,
    Left,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Bottom, Edge::Right, Edge::Top, Edge::Left];

    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            Edge::Bottom => [0.0, -1.0],
            Edge::Right => [1.0, 0.0],
            Edge::Top => [0.0, 1.0],
            Edge::Left => [-1.0, 0.0],
        }
    }

    pub fn contains(self, grid: &Grid, node: usize) -> bool {
        let (i, j) = grid.ij(node);
        match self {
            Edge::Bottom => j == 0,
            Edge::Right => i == grid.n(),
            Edge::Top => j == grid.n(),
            Edge::Left => i == 0,
        }
    }

    /// Edge nodes ordered counter-clockwise around the square.
    fn nodes_ccw(self, grid: &Grid) -> Vec<usize> {
        let n = grid.n();
        match self {
            Edge::Bottom => (0..=n).map(|i| grid.index(i, 0)).collect(),
            Edge::Right => (0..=n).map(|j| grid.index(n, j)).collect(),
            Edge::Top => (0..=n).rev().map(|i| grid.index(i, n)).collect(),
            Edge::Left => (0..=n).rev().map(|j| grid.index(0, j)).collect(),
        }
    }
}

/// The accessible part of the outer boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GammaRepr", into = "GammaRepr")]
pub enum Gamma {
    All,
    Edges(Vec<Edge>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum GammaRepr {
    Word(String),
    List(Vec<Edge>),
}

impl TryFrom<GammaRepr> for Gamma {
    type Error = String;

    fn try_from(r: GammaRepr) -> std::result::Result<Self, String> {
        match r {
            GammaRepr::Word(w) if w == "all" => Ok(Gamma::All),
            GammaRepr::Word(w) => Err(format!(
                "gamma must be \"all\" or a list of edges, got {w:?}"
            )),
            GammaRepr::List(v) => Ok(Gamma::Edges(v)),
        }
    }
}

impl From<Gamma> for GammaRepr {
    fn from(g: Gamma) -> Self {
        match g {
            Gamma::All => GammaRepr::Word("all".into()),
            Gamma::Edges(v) => GammaRepr::List(v),
        }
    }
}

impl Gamma {
    pub fn is_all(&self) -> bool {
        match self {
            Gamma::All => true,
            Gamma::Edges(v) => Edge::ALL.iter().all(|e| v.contains(e)),
        }
    }

    pub fn contains_edge(&self, e: Edge) -> bool {
        match self {
            Gamma::All => true,
            Gamma::Edges(v) => v.contains(&e),
        }
    }

    /// Edges in counter-clockwise traversal order, starting right after a
    /// non-accessible edge (or at the bottom edge for the whole boundary).
    fn ordered_edges(&self) -> Result<Vec<Edge>> {
        let member: Vec<bool> = Edge::ALL.iter().map(|&e| self.contains_edge(e)).collect();
        let count = member.iter().filter(|&&m| m).count();
        if count == 0 {
            return Err(LabError::Geometry("accessible boundary Γ is empty".into()));
        }
        if count == 4 {
            return Ok(Edge::ALL.to_vec());
        }
        let starts: Vec<usize> = (0..4)
            .filter(|&k| member[k] && !member[(k + 3) % 4])
            .collect();
        if starts.len() != 1 {
            return Err(LabError::Geometry(
                "accessible boundary Γ is not connected along ∂Ω".into(),
            ));
        }
        Ok((0..count).map(|t| Edge::ALL[(starts[0] + t) % 4]).collect())
    }
}

/// Rectangular notch cut into the square from one edge; its boundary becomes
/// part of the (hidden) outer boundary. `start..end` runs along the edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Notch {
    pub edge: Edge,
    pub depth: f64,
    pub start: f64,
    pub end: f64,
}

impl Notch {
    fn region(&self) -> ([f64; 2], [f64; 2]) {
        match self.edge {
            Edge::Left => ([0.0, self.start], [self.depth, self.end]),
            Edge::Right => ([1.0 - self.depth, self.start], [1.0, self.end]),
            Edge::Bottom => ([self.start, 0.0], [self.end, self.depth]),
            Edge::Top => ([self.start, 1.0 - self.depth], [self.end, 1.0]),
        }
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        let (lo, hi) = self.region();
        p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1]
    }

    fn validate(&self, grid: &Grid, gamma: &Gamma) -> Result<()> {
        let margin = CLEARANCE_CELLS * grid.h();
        if !(self.depth > 0.0 && self.depth < 1.0 - margin)
            || !(0.0 <= self.start && self.start < self.end && self.end <= 1.0)
        {
            return Err(LabError::Geometry(format!("malformed notch {self:?}")));
        }
        if gamma.contains_edge(self.edge) {
            return Err(LabError::Geometry(format!(
                "notch on edge {:?} touches Γ",
                self.edge
            )));
        }
        let (lo, hi) = self.region();
        let dist = |e: Edge| match e {
            Edge::Bottom => lo[1],
            Edge::Right => 1.0 - hi[0],
            Edge::Top => 1.0 - hi[1],
            Edge::Left => lo[0],
        };
        for e in Edge::ALL {
            if gamma.contains_edge(e) && dist(e) < margin {
                return Err(LabError::Geometry(format!(
                    "notch within {margin} of accessible edge {e:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Node classification for one geometric configuration.
#[derive(Debug, Clone)]
pub struct DomainMask {
    grid: Grid,
    kinds: Vec<NodeKind>,
    cavity: Option<Cavity>,
    gamma: Gamma,
    notch: Option<Notch>,
    unknowns: Vec<usize>,
    unknown_of: Vec<usize>,
    accessible: Vec<bool>,
}

pub const NO_UNKNOWN: usize = usize::MAX;

pub fn build_mask(grid: Grid, cavity: Option<Cavity>, gamma: Gamma) -> Result<DomainMask> {
    DomainMask::new(grid, cavity, gamma, None)
}

impl DomainMask {
    pub fn new(
        grid: Grid,
        cavity: Option<Cavity>,
        gamma: Gamma,
        notch: Option<Notch>,
    ) -> Result<Self> {
        gamma.ordered_edges()?;
        let margin = CLEARANCE_CELLS * grid.h();
        if let Some(c) = &cavity {
            c.validate()?;
            if c.clearance() < margin {
                return Err(LabError::Geometry(format!(
                    "cavity {c:?} closer than {margin} to ∂Ω"
                )));
            }
        }
        if let Some(nt) = &notch {
            nt.validate(&grid, &gamma)?;
        }

        let count = grid.node_count();
        // 0 = free, 1 = inside cavity, 2 = inside notch
        let mut solid = vec![0u8; count];
        for (node, s) in solid.iter_mut().enumerate() {
            let p = grid.position(node);
            if cavity.as_ref().is_some_and(|c| c.contains(p)) {
                *s = 1;
            } else if notch.as_ref().is_some_and(|nt| nt.contains(p)) {
                *s = 2;
            }
        }
        let mut kinds: Vec<NodeKind> = (0..count)
            .map(|node| {
                if solid[node] != 0 {
                    NodeKind::Excluded
                } else if grid.on_square_edge(node) {
                    NodeKind::OuterBoundary
                } else {
                    NodeKind::Interior
                }
            })
            .collect();
        for node in 0..count {
            if solid[node] == 0 {
                continue;
            }
            let touches = grid
                .neighbors(node)
                .iter()
                .flatten()
                .any(|&nb| kinds[nb] == NodeKind::Interior);
            if touches {
                kinds[node] = if solid[node] == 1 {
                    NodeKind::CavityBoundary
                } else {
                    NodeKind::OuterBoundary
                };
            }
        }

        let unknowns: Vec<usize> = (0..count)
            .filter(|&k| kinds[k] == NodeKind::Interior)
            .collect();
        if unknowns.is_empty() {
            return Err(LabError::Geometry("no interior nodes".into()));
        }
        let mut unknown_of = vec![NO_UNKNOWN; count];
        for (u, &node) in unknowns.iter().enumerate() {
            unknown_of[node] = u;
        }
        let accessible = (0..count)
            .map(|node| {
                kinds[node] == NodeKind::OuterBoundary
                    && solid[node] == 0
                    && Edge::ALL
                        .iter()
                        .any(|&e| gamma.contains_edge(e) && e.contains(&grid, node))
            })
            .collect();

        let mask = DomainMask {
            grid,
            kinds,
            cavity,
            gamma,
            notch,
            unknowns,
            unknown_of,
            accessible,
        };
        if !mask.interior_connected() {
            return Err(LabError::Geometry("interior nodes are disconnected".into()));
        }
        Ok(mask)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        self.kinds[node]
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn cavity(&self) -> Option<&Cavity> {
        self.cavity.as_ref()
    }

    pub fn gamma(&self) -> &Gamma {
        &self.gamma
    }

    pub fn notch(&self) -> Option<&Notch> {
        self.notch.as_ref()
    }

    /// Interior nodes in row-major order; position = unknown index.
    pub fn unknowns(&self) -> &[usize] {
        &self.unknowns
    }

    /// Unknown index of a node, or [`NO_UNKNOWN`].
    #[inline]
    pub fn unknown_of(&self, node: usize) -> usize {
        self.unknown_of[node]
    }

    /// True for outer-boundary nodes on which Dirichlet data may be prescribed.
    #[inline]
    pub fn is_accessible(&self, node: usize) -> bool {
        self.accessible[node]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        matches!(
            self.kinds[node],
            NodeKind::OuterBoundary | NodeKind::CavityBoundary
        )
    }

    /// True when data is prescribed and measured on all of ∂Ω.
    pub fn full_boundary(&self) -> bool {
        self.gamma.is_all() && self.notch.is_none()
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.kinds.iter().filter(|&&k| k == kind).count()
    }

    /// The trace on which Dirichlet data is prescribed.
    pub fn data_trace_kind(&self) -> TraceKind {
        if self.full_boundary() {
            TraceKind::Outer
        } else {
            TraceKind::Gamma
        }
    }

    fn interior_connected(&self) -> bool {
        let mut seen = vec![false; self.kinds.len()];
        let mut queue = VecDeque::from([self.unknowns[0]]);
        seen[self.unknowns[0]] = true;
        let mut reached = 1;
        while let Some(node) = queue.pop_front() {
            for &nb in self.grid.neighbors(node).iter().flatten() {
                if !seen[nb] && self.kinds[nb] == NodeKind::Interior {
                    seen[nb] = true;
                    reached += 1;
                    queue.push_back(nb);
                }
            }
        }
        reached == self.unknowns.len()
    }

    /// Trapezoidal area weight of a node for integrals over the computational
    /// domain: `h²` inside, halved on square edges, quartered at corners.
    /// Excluded nodes carry no weight.
    pub fn area_weight(&self, node: usize) -> f64 {
        if self.kinds[node] == NodeKind::Excluded {
            return 0.0;
        }
        let h2 = self.grid.h() * self.grid.h();
        let (i, j) = self.grid.ij(node);
        let n = self.grid.n();
        let fx = if i == 0 || i == n { 0.5 } else { 1.0 };
        let fy = if j == 0 || j == n { 0.5 } else { 1.0 };
        h2 * fx * fy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    Outer,
    Cavity,
    Gamma,
}

/// Ordered boundary nodes with outward unit normals and length weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub kind: TraceKind,
    pub nodes: Vec<usize>,
    pub normals: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    /// Square corners; their normals are ambiguous and they get zero
    /// quadrature weight in integrals of Neumann data.
    pub corner: Vec<bool>,
    /// Arc-length parameter along the traced curve.
    pub arc: Vec<f64>,
    pub length: f64,
}

pub fn boundary_trace(mask: &DomainMask, which: TraceKind) -> Result<BoundaryTrace> {
    match which {
        TraceKind::Outer => {
            if mask.notch.is_some() {
                return Err(LabError::Geometry(
                    "outer trace is undefined on a notched domain".into(),
                ));
            }
            edge_trace(mask, &Edge::ALL, TraceKind::Outer)
        }
        TraceKind::Gamma => {
            let edges = mask.gamma.ordered_edges()?;
            edge_trace(mask, &edges, TraceKind::Gamma)
        }
        TraceKind::Cavity => cavity_trace(mask),
    }
}

fn is_square_corner(grid: &Grid, node: usize) -> bool {
    let (i, j) = grid.ij(node);
    (i == 0 || i == grid.n()) && (j == 0 || j == grid.n())
}

fn corner_normal(grid: &Grid, node: usize) -> [f64; 2] {
    let (i, j) = grid.ij(node);
    let sx = if i == 0 { -1.0 } else { 1.0 };
    let sy = if j == 0 { -1.0 } else { 1.0 };
    let r = std::f64::consts::FRAC_1_SQRT_2;
    [sx * r, sy * r]
}

fn edge_trace(mask: &DomainMask, edges: &[Edge], kind: TraceKind) -> Result<BoundaryTrace> {
    let grid = &mask.grid;
    let h = grid.h();
    let closed = edges.len() == 4;
    let mut nodes: Vec<usize> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for &e in edges {
        let list = e.nodes_ccw(grid);
        let last = list.len() - 1;
        for (k, &node) in list.iter().enumerate() {
            let w = if k == 0 || k == last { 0.5 * h } else { h };
            if k == 0 && nodes.last() == Some(&node) {
                *weights.last_mut().unwrap() += w;
                continue;
            }
            nodes.push(node);
            weights.push(w);
        }
    }
    if closed {
        // the loop returns to its first node
        let first = nodes[0];
        if nodes.last() == Some(&first) {
            nodes.pop();
            let w = weights.pop().unwrap();
            weights[0] += w;
        }
    }
    let normals: Vec<[f64; 2]> = nodes
        .iter()
        .map(|&node| {
            if is_square_corner(grid, node) {
                corner_normal(grid, node)
            } else {
                let e = Edge::ALL
                    .into_iter()
                    .find(|e| e.contains(grid, node))
                    .expect("edge node");
                e.outward_normal()
            }
        })
        .collect();
    let corner = nodes.iter().map(|&n| is_square_corner(grid, n)).collect();
    let mut arc = Vec::with_capacity(nodes.len());
    let mut t = 0.0;
    for (k, &node) in nodes.iter().enumerate() {
        if k > 0 {
            let (a, b) = (grid.position(nodes[k - 1]), grid.position(node));
            t += ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        }
        arc.push(t);
    }
    for &node in &nodes {
        if !mask.is_boundary(node) {
            return Err(LabError::Geometry(format!(
                "trace node {node} is not a boundary node"
            )));
        }
    }
    Ok(BoundaryTrace {
        kind,
        nodes,
        normals,
        weights,
        corner,
        arc,
        length: edges.len() as f64,
    })
}

fn cavity_trace(mask: &DomainMask) -> Result<BoundaryTrace> {
    let cavity = mask
        .cavity
        .as_ref()
        .ok_or_else(|| LabError::Geometry("cavity trace requested without a cavity".into()))?;
    let grid = &mask.grid;
    let mut items: Vec<(f64, usize)> = (0..grid.node_count())
        .filter(|&k| mask.kinds[k] == NodeKind::CavityBoundary)
        .map(|k| (cavity.arc_parameter(grid.position(k)), k))
        .collect();
    if items.is_empty() {
        return Err(LabError::Geometry("cavity has no boundary nodes".into()));
    }
    items.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let perimeter = cavity.perimeter();
    let m = items.len();
    let weights = (0..m)
        .map(|k| {
            if m == 1 {
                return perimeter;
            }
            let prev = if k == 0 {
                items[m - 1].0 - perimeter
            } else {
                items[k - 1].0
            };
            let next = if k == m - 1 {
                items[0].0 + perimeter
            } else {
                items[k + 1].0
            };
            0.5 * (next - prev)
        })
        .collect();
    let nodes: Vec<usize> = items.iter().map(|&(_, k)| k).collect();
    let normals = nodes
        .iter()
        .map(|&k| cavity.domain_normal(grid.position(k)))
        .collect();
    Ok(BoundaryTrace {
        kind: TraceKind::Cavity,
        corner: vec![false; m],
        arc: items.iter().map(|&(t, _)| t).collect(),
        nodes,
        normals,
        weights,
        length: perimeter,
    })
}

impl BoundaryTrace {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Weights used for integrals of Neumann data: corners are dropped.
    pub fn quadrature_weight(&self, k: usize) -> f64 {
        if self.corner[k] {
            0.0
        } else {
            self.weights[k]
        }
    }

    /// `Σ_k w_k v_k` with corner nodes excluded.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .enumerate()
            .map(|(k, v)| self.quadrature_weight(k) * v)
            .sum()
    }

    pub fn same_nodes(&self, other: &BoundaryTrace) -> bool {
        self.nodes == other.nodes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full(n: usize) -> DomainMask {
        build_mask(build_grid(n).unwrap(), None, Gamma::All).unwrap()
    }

    #[test]
    fn grid_sizes() {
        let g = build_grid(8).unwrap();
        assert_eq!(g.h(), 0.125);
        assert_eq!(g.node_count(), 81);
        let g = build_grid(64).unwrap();
        assert_eq!(g.h(), 1.0 / 64.0);
        assert_eq!(g.node_count(), 4225);
        assert_eq!(g.h() * g.n() as f64, 1.0);
        assert_eq!(g.coord(64), 1.0);
        assert!(matches!(build_grid(4), Err(LabError::Config(_))));
        assert!(build_grid(2048).is_err());
    }

    #[test]
    fn full_square_classification() {
        let m = full(64);
        assert_eq!(m.count(NodeKind::OuterBoundary), 4 * 64);
        assert_eq!(m.count(NodeKind::CavityBoundary), 0);
        assert_eq!(m.count(NodeKind::Interior), 63 * 63);
        assert!(m.full_boundary());
    }

    #[test]
    fn disk_cavity_boundary_near_circle() {
        let g = build_grid(64).unwrap();
        let c = Cavity::Disk {
            center: [0.5, 0.5],
            radius: 0.2,
        };
        let m = build_mask(g, Some(c), Gamma::All).unwrap();
        let nb = m.count(NodeKind::CavityBoundary);
        assert!(nb > 0);
        for node in 0..g.node_count() {
            if m.kind(node) != NodeKind::CavityBoundary {
                continue;
            }
            let p = g.position(node);
            let dist = ((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2)).sqrt();
            assert!((dist - 0.2).abs() <= g.h() * 2f64.sqrt());
            let adj = g
                .neighbors(node)
                .iter()
                .flatten()
                .any(|&k| m.kind(k) == NodeKind::Interior);
            assert!(adj);
        }
    }

    #[test]
    fn cavity_clearance_enforced() {
        let g = build_grid(64).unwrap();
        let c = Cavity::Disk {
            center: [0.5, 0.97],
            radius: 0.2,
        };
        assert!(matches!(
            build_mask(g, Some(c), Gamma::All),
            Err(LabError::Geometry(_))
        ));
    }

    #[test]
    fn outer_trace_weights_and_normals() {
        let m = full(64);
        let t = boundary_trace(&m, TraceKind::Outer).unwrap();
        assert_eq!(t.len(), 256);
        let total: f64 = t.weights.iter().sum();
        assert!((total - 4.0).abs() <= 4e-12);
        let g = m.grid();
        let k = t.nodes.iter().position(|&n| n == g.index(64, 10)).unwrap();
        assert_eq!(t.normals[k], [1.0, 0.0]);
        for nu in &t.normals {
            assert!(((nu[0] * nu[0] + nu[1] * nu[1]).sqrt() - 1.0).abs() < 1e-15);
        }
        assert_eq!(t.corner.iter().filter(|&&c| c).count(), 4);
    }

    #[test]
    fn gamma_right_edge_length() {
        let g = build_grid(64).unwrap();
        let m = build_mask(g, None, Gamma::Edges(vec![Edge::Right])).unwrap();
        let t = boundary_trace(&m, TraceKind::Gamma).unwrap();
        assert_eq!(t.len(), 65);
        let total: f64 = t.weights.iter().sum();
        assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn gamma_two_edges_connected() {
        let g = build_grid(16).unwrap();
        let m = build_mask(g, None, Gamma::Edges(vec![Edge::Top, Edge::Right])).unwrap();
        let t = boundary_trace(&m, TraceKind::Gamma).unwrap();
        assert_eq!(t.len(), 33);
        assert!((t.weights.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert!(build_mask(g, None, Gamma::Edges(vec![Edge::Left, Edge::Right])).is_err());
        assert!(build_mask(g, None, Gamma::Edges(vec![])).is_err());
    }

    #[test]
    fn cavity_trace_perimeter() {
        let g = build_grid(64).unwrap();
        let c = Cavity::Disk {
            center: [0.5, 0.5],
            radius: 0.2,
        };
        let m = build_mask(g, Some(c), Gamma::All).unwrap();
        let t = boundary_trace(&m, TraceKind::Cavity).unwrap();
        let p = 2.0 * PI * 0.2;
        assert!((t.weights.iter().sum::<f64>() - p).abs() <= 1e-12 * p);
        assert!(matches!(
            boundary_trace(&full(16), TraceKind::Cavity),
            Err(LabError::Geometry(_))
        ));
    }

    #[test]
    fn rectangle_cavity() {
        let g = build_grid(32).unwrap();
        let c = Cavity::Rectangle {
            min: [0.3, 0.4],
            max: [0.6, 0.7],
        };
        let m = build_mask(g, Some(c.clone()), Gamma::All).unwrap();
        let t = boundary_trace(&m, TraceKind::Cavity).unwrap();
        assert!((t.weights.iter().sum::<f64>() - c.perimeter()).abs() < 1e-12);
    }

    #[test]
    fn notch_classification() {
        let g = build_grid(32).unwrap();
        let notch = Notch {
            edge: Edge::Left,
            depth: 0.2,
            start: 0.3,
            end: 0.7,
        };
        let gamma = Gamma::Edges(vec![Edge::Right]);
        let m = DomainMask::new(g, None, gamma.clone(), Some(notch.clone())).unwrap();
        assert!(m.count(NodeKind::Excluded) > 0);
        assert!(boundary_trace(&m, TraceKind::Outer).is_err());
        assert!(boundary_trace(&m, TraceKind::Gamma).is_ok());
        let bad = Notch {
            edge: Edge::Right,
            ..notch
        };
        assert!(DomainMask::new(g, None, gamma, Some(bad)).is_err());
    }

    #[test]
    fn gamma_serde_forms() {
        let all: Gamma = serde_json::from_str("\"all\"").unwrap();
        assert_eq!(all, Gamma::All);
        let e: Gamma = serde_json::from_str("[\"right\",\"top\"]").unwrap();
        assert_eq!(e, Gamma::Edges(vec![Edge::Right, Edge::Top]));
        assert!(serde_json::from_str::<Gamma>("\"some\"").is_err());
    }

    #[test]
    fn refinement_moves_cavity_boundary_little() {
        let c = Cavity::Disk {
            center: [0.5, 0.5],
            radius: 0.2,
        };
        let hausdorff = |n: usize| {
            let g = build_grid(n).unwrap();
            let m = build_mask(g, Some(c.clone()), Gamma::All).unwrap();
            (0..g.node_count())
                .filter(|&k| m.kind(k) == NodeKind::CavityBoundary)
                .map(|k| {
                    let p = g.position(k);
                    (((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2)).sqrt() - 0.2).abs()
                })
                .fold(0.0, f64::max)
        };
        let (d32, d64) = (hausdorff(32), hausdorff(64));
        assert!((d32 - d64).abs() <= 2.0 / 32.0);
    }
}
