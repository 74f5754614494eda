//! The tree `T'`: a normalized formula tree with a tail path hanging off its
//! root, and the weighted adjacency operator `H` on its vertices.
//!
//! Vertex numbering: index 0 is the root of the formula tree (also tail
//! position 0), indices `1..=t` are the tail vertices in order, and the
//! remaining formula vertices follow in breadth-first order.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::formula::{Assignment, FormulaTree, Node, NodeId};

/// Default cap on `|T'|`.
pub const DEFAULT_MAX_DIM: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Balanced,
    General,
}

impl Mode {
    /// Balanced for complete trees, general otherwise.
    pub fn detect(normalized: &FormulaTree) -> Mode {
        if normalized.is_complete() {
            Mode::Balanced
        } else {
            Mode::General
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "balanced" => Ok(Mode::Balanced),
            "general" => Ok(Mode::General),
            other => Err(format!("unknown mode '{other}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexKind {
    Tree { node: NodeId },
    /// Tail position `1..=t`.
    Tail { position: usize },
}

#[derive(Clone, Debug)]
pub struct Vertex {
    pub kind: VertexKind,
    pub parent: Option<usize>,
    /// Formula-tree children (empty for leaves and tail vertices).
    pub children: Vec<usize>,
    /// Distance from the root; for tail vertices this is the tail position.
    pub level: usize,
    /// `m_v`; zero on the tail.
    pub leaves: usize,
    /// `d_v` (vertex count of the longest downward path); zero on the tail.
    pub depth: usize,
    /// Variable index and negation flag for leaves.
    pub leaf: Option<(usize, bool)>,
}

impl Vertex {
    pub fn is_tree(&self) -> bool {
        matches!(self.kind, VertexKind::Tree { .. })
    }

    pub fn is_leaf(&self) -> bool {
        self.leaf.is_some()
    }

    pub fn is_odd(&self) -> bool {
        self.level % 2 == 1
    }
}

#[derive(Clone, Debug)]
pub struct AugmentedTree {
    base: FormulaTree,
    mode: Mode,
    tail_length: usize,
    vertices: Vec<Vertex>,
    node_vertex: Vec<usize>,
}

fn ceil_sqrt(x: usize) -> usize {
    let mut r = (x as f64).sqrt() as usize;
    while r * r < x {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= x {
        r -= 1;
    }
    r
}

/// Tail length `2⌈√N⌉` (balanced) or `2⌈√(Nd)⌉` (general).
pub fn default_tail_length(mode: Mode, leaves: usize, depth: usize) -> usize {
    match mode {
        Mode::Balanced => 2 * ceil_sqrt(leaves),
        Mode::General => 2 * ceil_sqrt(leaves * depth),
    }
}

pub fn attach_tail(tree: &FormulaTree, mode: Mode, tail_override: Option<usize>) -> Result<AugmentedTree> {
    attach_tail_capped(tree, mode, tail_override, DEFAULT_MAX_DIM)
}

pub fn attach_tail_capped(
    tree: &FormulaTree,
    mode: Mode,
    tail_override: Option<usize>,
    max_dim: usize,
) -> Result<AugmentedTree> {
    tree.check_normalized()?;
    if mode == Mode::Balanced && !tree.is_complete() {
        return Err(Error::NotBalanced);
    }
    let stats = tree.stats();
    let root_stats = stats[tree.root()];
    let (n, d) = (root_stats.leaves, root_stats.depth);
    // t must exceed √N (resp. √(Nd)) for the overlap bound of the T=0 witness.
    let floor = match mode {
        Mode::Balanced => n,
        Mode::General => n * d,
    };
    let t = match tail_override {
        None => default_tail_length(mode, n, d),
        Some(t) if t == 0 || t % 2 == 1 => {
            return Err(Error::Tail {
                t,
                reason: "tail length must be even and positive".into(),
            })
        }
        Some(t) if t * t <= floor => {
            return Err(Error::Tail {
                t,
                reason: format!("tail length must exceed sqrt({floor})"),
            })
        }
        Some(t) => t,
    };
    let dim = tree.len() + t;
    if dim > max_dim {
        return Err(Error::SizeCap {
            what: "dimension",
            value: dim,
            cap: max_dim,
        });
    }

    let levels = tree.levels();
    let bfs = tree.bfs_order();
    let mut node_vertex = vec![usize::MAX; tree.len()];
    node_vertex[tree.root()] = 0;
    for (k, &node) in bfs.iter().skip(1).enumerate() {
        node_vertex[node] = t + 1 + k;
    }

    let mut vertices: Vec<Option<Vertex>> = vec![None; dim];
    for &node in &bfs {
        let children: Vec<usize> = tree
            .children(node)
            .map(|c| c.iter().map(|&c| node_vertex[c]).collect())
            .unwrap_or_default();
        let leaf = match tree.node(node) {
            Node::Leaf { var, negated } => Some((var, negated)),
            Node::Gate { .. } => None,
        };
        vertices[node_vertex[node]] = Some(Vertex {
            kind: VertexKind::Tree { node },
            parent: None,
            children,
            level: levels[node],
            leaves: stats[node].leaves,
            depth: stats[node].depth,
            leaf,
        });
    }
    for (position, slot) in vertices.iter_mut().enumerate().take(t + 1).skip(1) {
        *slot = Some(Vertex {
            kind: VertexKind::Tail { position },
            parent: Some(position - 1),
            children: Vec::new(),
            level: position,
            leaves: 0,
            depth: 0,
            leaf: None,
        });
    }
    let mut vertices: Vec<Vertex> = vertices.into_iter().map(|v| v.expect("every index assigned")).collect();
    for p in 0..dim {
        for c in vertices[p].children.clone() {
            vertices[c].parent = Some(p);
        }
    }

    Ok(AugmentedTree {
        base: tree.clone(),
        mode,
        tail_length: t,
        vertices,
        node_vertex,
    })
}

impl AugmentedTree {
    pub fn base(&self) -> &FormulaTree {
        &self.base
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn tail_length(&self) -> usize {
        self.tail_length
    }

    pub fn dim(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex(&self, v: usize) -> &Vertex {
        &self.vertices[v]
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn root(&self) -> usize {
        0
    }

    /// Index of the vertex at tail position `i` (position 0 is the root).
    pub fn tail_vertex(&self, position: usize) -> usize {
        assert!(position <= self.tail_length);
        position
    }

    pub fn vertex_of_node(&self, node: NodeId) -> usize {
        self.node_vertex[node]
    }

    /// `N`: leaves of the (normalized) formula tree.
    pub fn leaf_count(&self) -> usize {
        self.vertices[0].leaves
    }

    /// `d`: vertex count of the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        self.vertices[0].depth
    }

    /// Height of the formula tree in edges.
    pub fn height(&self) -> usize {
        self.depth() - 1
    }

    pub fn is_tree_vertex(&self, v: usize) -> bool {
        self.vertices[v].is_tree()
    }

    pub fn tree_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim()).filter(|&v| self.is_tree_vertex(v))
    }

    pub fn leaf_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim()).filter(|&v| self.vertices[v].is_leaf())
    }

    /// Vertices of `T_v` in depth-first preorder, `v` first.
    pub fn subtree(&self, v: usize) -> Result<Vec<usize>> {
        if !self.is_tree_vertex(v) {
            return Err(Error::NotTreeVertex(v));
        }
        let mut out = Vec::new();
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            out.push(u);
            stack.extend(self.vertices[u].children.iter().rev());
        }
        Ok(out)
    }

    /// Value of `T_v` for every formula vertex; `None` on the tail.
    pub fn evaluate(&self, a: &Assignment) -> Result<Vec<Option<bool>>> {
        let values = self.base.evaluate_nodes(a)?;
        Ok(self
            .vertices
            .iter()
            .map(|v| match v.kind {
                VertexKind::Tree { node } => Some(values[node]),
                VertexKind::Tail { .. } => None,
            })
            .collect())
    }

    /// Leaves whose effective input (`x_i XOR negated`) is 1: the support of `S_{x,1}`.
    pub fn one_leaves(&self, a: &Assignment) -> Result<Vec<usize>> {
        a.check_len(self.base.num_vars())?;
        Ok(self
            .leaf_vertices()
            .filter(|&v| {
                let (var, negated) = self.vertices[v].leaf.expect("leaf");
                a.bit(var) ^ negated
            })
            .collect())
    }

    pub fn vertex_table(&self) -> Vec<VertexLabel> {
        self.vertices
            .iter()
            .enumerate()
            .map(|(index, v)| VertexLabel {
                index,
                label: match (v.kind, v.leaf) {
                    (VertexKind::Tail { position }, _) => format!("tail{position}"),
                    (_, Some((var, true))) => format!("~x{var}"),
                    (_, Some((var, false))) => format!("x{var}"),
                    (VertexKind::Tree { node }, None) => format!("gate{node}"),
                },
                level: v.level,
                leaves: v.leaves,
                depth: v.depth,
                parent: v.parent,
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VertexLabel {
    pub index: usize,
    pub label: String,
    pub level: usize,
    pub leaves: usize,
    pub depth: usize,
    pub parent: Option<usize>,
}

/// Weight of the edge between a parent at `parent_level` (root = 0) and its
/// child: `⁴√(m_p / 2m_c)` below even-level parents and `⁴√(2m_c / m_p)`
/// below odd-level parents. Both are exactly 1 on complete trees.
pub fn edge_weight(parent_level: usize, parent_leaves: usize, child_leaves: usize) -> f64 {
    let (mp, mc) = (parent_leaves as f64, child_leaves as f64);
    if parent_level.is_multiple_of(2) {
        (mp / (2.0 * mc)).powf(0.25)
    } else {
        (2.0 * mc / mp).powf(0.25)
    }
}

/// Dense real symmetric matrix indexed by vertices of `T'`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricOperator {
    matrix: DMatrix<f64>,
}

#[derive(Serialize)]
struct MatrixJson {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SymmetricOperator {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Dimension(format!(
                "operator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !is_exactly_symmetric(&matrix) {
            return Err(Error::Dimension("operator is not symmetric".into()));
        }
        Ok(SymmetricOperator { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_symmetric(&self) -> bool {
        is_exactly_symmetric(&self.matrix)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for r in 0..self.dim() {
            let row: Vec<String> = (0..self.dim()).map(|c| format!("{}", self.matrix[(r, c)])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// `{dim, entries: [[u, v, w], ...]}` listing every nonzero entry.
    pub fn to_json(&self) -> String {
        let n = self.dim();
        let mut entries = Vec::new();
        for u in 0..n {
            for v in 0..n {
                let w = self.matrix[(u, v)];
                if w != 0.0 {
                    entries.push((u, v, w));
                }
            }
        }
        serde_json::to_string(&MatrixJson { dim: n, entries }).expect("serializable")
    }
}

fn is_exactly_symmetric(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..i).all(|j| m[(i, j)].to_bits() == m[(j, i)].to_bits()))
}

/// The operator `H`: weighted tree edges, unit tail edges, zero elsewhere.
pub fn build_hamiltonian(at: &AugmentedTree) -> SymmetricOperator {
    let n = at.dim();
    let mut h = DMatrix::zeros(n, n);
    for (p, vertex) in at.vertices().iter().enumerate() {
        for &c in &vertex.children {
            let w = edge_weight(vertex.level, vertex.leaves, at.vertex(c).leaves);
            h[(p, c)] = w;
            h[(c, p)] = w;
        }
    }
    for pos in 0..at.tail_length() {
        let (u, v) = (at.tail_vertex(pos), at.tail_vertex(pos + 1));
        h[(u, v)] = 1.0;
        h[(v, u)] = 1.0;
    }
    SymmetricOperator { matrix: h }
}

/// `H_v`: the principal submatrix on the vertices of `T_v`.
#[derive(Clone, Debug)]
pub struct SubtreeOperator {
    /// Vertex indices of `T_v` (preorder); row `i` of `op` is `vertices[i]`.
    pub vertices: Vec<usize>,
    pub op: SymmetricOperator,
}

impl SubtreeOperator {
    /// Embeds a vector on `T_v` back into the full vertex space.
    pub fn embed(&self, local: &nalgebra::DVector<f64>, dim: usize) -> nalgebra::DVector<f64> {
        let mut full = nalgebra::DVector::zeros(dim);
        for (i, &v) in self.vertices.iter().enumerate() {
            full[v] = local[i];
        }
        full
    }
}

pub fn restrict_to_subtree(h: &SymmetricOperator, at: &AugmentedTree, v: usize) -> Result<SubtreeOperator> {
    let vertices = at.subtree(v)?;
    let k = vertices.len();
    let m = DMatrix::from_fn(k, k, |i, j| h.matrix[(vertices[i], vertices[j])]);
    Ok(SubtreeOperator {
        vertices,
        op: SymmetricOperator { matrix: m },
    })
}
