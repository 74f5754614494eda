//! Read-once binary NAND formulas: parsing, printing, classical evaluation
//! and the even-depth normalization used by the walk construction.
//!
//! Concrete syntax:
//!
//! ```text
//! F := "x" DIGITS | "~x" DIGITS | "N(" F "," F ")"
//! ```
//!
//! Whitespace between tokens is ignored. The `~` prefix marks a negated leaf;
//! it only shows up when printing normalized trees, where an odd-depth leaf
//! `x_i` has been replaced by a gate over two copies of `NOT x_i`.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Default cap on the number of leaves a generated tree may have.
pub const DEFAULT_MAX_LEAVES: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Node {
    Leaf { var: usize, negated: bool },
    Gate { children: [NodeId; 2] },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SubtreeStats {
    /// Number of leaves below (and including) the node.
    pub leaves: usize,
    /// Number of vertices on the longest downward path; a leaf has depth 1.
    pub depth: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormulaTree {
    nodes: Vec<Node>,
    root: NodeId,
    num_vars: usize,
}

impl FormulaTree {
    pub fn parse(text: &str) -> Result<Self> {
        let mut parser = Parser {
            src: text.as_bytes(),
            pos: 0,
            nodes: Vec::new(),
        };
        let root = parser.formula()?;
        parser.skip_ws();
        if parser.pos != parser.src.len() {
            return Err(parser.error("trailing input"));
        }
        let tree = FormulaTree {
            nodes: parser.nodes,
            root,
            num_vars: 0,
        };
        tree.validated()
    }

    /// Checks read-once and contiguity, and fixes `num_vars`.
    fn validated(mut self) -> Result<Self> {
        let mut seen = Vec::new();
        for node in &self.nodes {
            if let Node::Leaf { var, .. } = *node {
                if var == 0 {
                    return Err(Error::Syntax {
                        pos: 0,
                        msg: "variable indices start at 1".into(),
                    });
                }
                if seen.len() < var {
                    seen.resize(var, false);
                }
                if seen[var - 1] {
                    return Err(Error::ReadOnce(var));
                }
                seen[var - 1] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::NonContiguous {
                expected: seen.len(),
                missing: missing + 1,
            });
        }
        self.num_vars = seen.len();
        Ok(self)
    }

    /// Complete binary tree with `2^k` leaves labelled `x1..x_{2^k}` left to right.
    pub fn balanced(k: u32, max_leaves: usize) -> Result<Self> {
        let leaves = 1usize
            .checked_shl(k)
            .filter(|&n| n <= max_leaves)
            .ok_or(Error::SizeCap {
                what: "leaves",
                value: 1usize.checked_shl(k).unwrap_or(usize::MAX),
                cap: max_leaves,
            })?;
        let mut nodes = Vec::with_capacity(2 * leaves - 1);
        let mut next_var = 1;
        fn build(k: u32, nodes: &mut Vec<Node>, next_var: &mut usize) -> NodeId {
            if k == 0 {
                nodes.push(Node::Leaf {
                    var: *next_var,
                    negated: false,
                });
                *next_var += 1;
            } else {
                let l = build(k - 1, nodes, next_var);
                let r = build(k - 1, nodes, next_var);
                nodes.push(Node::Gate { children: [l, r] });
            }
            nodes.len() - 1
        }
        let root = build(k, &mut nodes, &mut next_var);
        Ok(FormulaTree {
            nodes,
            root,
            num_vars: leaves,
        })
    }

    /// Builds a tree from an explicit node list. Used by generators that
    /// assemble shapes directly; the result is validated like parsed input.
    pub fn from_nodes(nodes: Vec<Node>, root: NodeId) -> Result<Self> {
        let tree = FormulaTree {
            nodes,
            root,
            num_vars: 0,
        };
        tree.validated()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> Node {
        self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of variables of the original formula (the oracle width).
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn children(&self, id: NodeId) -> Option<[NodeId; 2]> {
        match self.nodes[id] {
            Node::Gate { children } => Some(children),
            Node::Leaf { .. } => None,
        }
    }

    /// Nodes in breadth-first order from the root, children left to right.
    pub fn bfs_order(&self) -> Vec<NodeId> {
        let mut order = Vec::with_capacity(self.nodes.len());
        order.push(self.root);
        let mut head = 0;
        while head < order.len() {
            if let Some([l, r]) = self.children(order[head]) {
                order.push(l);
                order.push(r);
            }
            head += 1;
        }
        order
    }

    /// Distance of each node from the root.
    pub fn levels(&self) -> Vec<usize> {
        let mut level = vec![0; self.nodes.len()];
        for id in self.bfs_order() {
            if let Some([l, r]) = self.children(id) {
                level[l] = level[id] + 1;
                level[r] = level[id] + 1;
            }
        }
        level
    }

    /// Leaf count and vertex-count depth of every subtree.
    pub fn stats(&self) -> Vec<SubtreeStats> {
        let mut stats = vec![
            SubtreeStats {
                leaves: 0,
                depth: 0
            };
            self.nodes.len()
        ];
        for &id in self.bfs_order().iter().rev() {
            stats[id] = match self.children(id) {
                None => SubtreeStats {
                    leaves: 1,
                    depth: 1,
                },
                Some([l, r]) => SubtreeStats {
                    leaves: stats[l].leaves + stats[r].leaves,
                    depth: 1 + stats[l].depth.max(stats[r].depth),
                },
            };
        }
        stats
    }

    pub fn is_normalized(&self) -> bool {
        self.first_odd_leaf().is_none()
    }

    fn first_odd_leaf(&self) -> Option<usize> {
        let levels = self.levels();
        self.nodes
            .iter()
            .enumerate()
            .find(|(id, n)| matches!(n, Node::Leaf { .. }) && levels[*id] % 2 == 1)
            .map(|(id, _)| levels[id])
    }

    pub(crate) fn check_normalized(&self) -> Result<()> {
        match self.first_odd_leaf() {
            Some(level) => Err(Error::NotNormalized(level)),
            None => Ok(()),
        }
    }

    /// True when every leaf sits at the same depth.
    pub fn is_complete(&self) -> bool {
        let levels = self.levels();
        let mut leaf_levels = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n, Node::Leaf { .. }))
            .map(|(id, _)| levels[id]);
        let first = leaf_levels.next();
        leaf_levels.all(|l| Some(l) == first)
    }

    /// Classical value of the formula.
    pub fn evaluate(&self, a: &Assignment) -> Result<bool> {
        Ok(self.evaluate_nodes(a)?[self.root])
    }

    /// Value of every subformula `T_v` under `a`, indexed by node id.
    pub fn evaluate_nodes(&self, a: &Assignment) -> Result<Vec<bool>> {
        a.check_len(self.num_vars)?;
        let mut value = vec![false; self.nodes.len()];
        for &id in self.bfs_order().iter().rev() {
            value[id] = match self.nodes[id] {
                Node::Leaf { var, negated } => a.bit(var) ^ negated,
                Node::Gate { children: [l, r] } => !(value[l] && value[r]),
            };
        }
        Ok(value)
    }

    /// Pushes every odd-depth leaf one level down: the leaf `x_i` becomes a
    /// gate over two leaves reading `NOT x_i`, which leaves the value of the
    /// formula unchanged. Variable indices are reused, so the oracle is the
    /// same as for the original formula.
    pub fn normalize_even_depth(&self) -> FormulaTree {
        let mut nodes = Vec::with_capacity(self.nodes.len() * 2);
        fn copy(
            src: &FormulaTree,
            id: NodeId,
            level: usize,
            nodes: &mut Vec<Node>,
        ) -> NodeId {
            match src.nodes[id] {
                Node::Leaf { var, negated } if level % 2 == 1 => {
                    let flipped = Node::Leaf {
                        var,
                        negated: !negated,
                    };
                    nodes.push(flipped);
                    nodes.push(flipped);
                    let n = nodes.len();
                    nodes.push(Node::Gate {
                        children: [n - 2, n - 1],
                    });
                }
                leaf @ Node::Leaf { .. } => nodes.push(leaf),
                Node::Gate { children: [l, r] } => {
                    let l = copy(src, l, level + 1, nodes);
                    let r = copy(src, r, level + 1, nodes);
                    nodes.push(Node::Gate { children: [l, r] });
                }
            }
            nodes.len() - 1
        }
        let root = copy(self, self.root, 0, &mut nodes);
        FormulaTree {
            nodes,
            root,
            num_vars: self.num_vars,
        }
    }

    fn write_node(&self, id: NodeId, out: &mut impl fmt::Write) -> fmt::Result {
        match self.nodes[id] {
            Node::Leaf { var, negated } => {
                if negated {
                    out.write_char('~')?;
                }
                write!(out, "x{var}")
            }
            Node::Gate { children: [l, r] } => {
                out.write_str("N(")?;
                self.write_node(l, out)?;
                out.write_char(',')?;
                self.write_node(r, out)?;
                out.write_char(')')
            }
        }
    }
}

impl fmt::Display for FormulaTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_node(self.root, f)
    }
}

impl std::str::FromStr for FormulaTree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FormulaTree::parse(s)
    }
}

pub fn parse_formula(text: &str) -> Result<FormulaTree> {
    FormulaTree::parse(text)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    nodes: Vec<Node>,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Syntax {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self
            .src
            .get(self.pos)
            .is_some_and(|b| b.is_ascii_whitespace())
        {
            self.pos += 1;
        }
    }

    fn expect(&mut self, byte: u8) -> Result<()> {
        self.skip_ws();
        if self.src.get(self.pos) == Some(&byte) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{}'", byte as char)))
        }
    }

    fn formula(&mut self) -> Result<NodeId> {
        self.skip_ws();
        match self.src.get(self.pos) {
            Some(b'N') => {
                self.pos += 1;
                self.expect(b'(')?;
                let l = self.formula()?;
                self.expect(b',')?;
                let r = self.formula()?;
                self.expect(b')')?;
                self.nodes.push(Node::Gate { children: [l, r] });
                Ok(self.nodes.len() - 1)
            }
            Some(b'x') | Some(b'~') => {
                let negated = self.src[self.pos] == b'~';
                if negated {
                    self.pos += 1;
                    self.expect(b'x')?;
                } else {
                    self.pos += 1;
                }
                self.skip_ws();
                let start = self.pos;
                while self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                    self.pos += 1;
                }
                if start == self.pos {
                    return Err(self.error("expected variable index"));
                }
                let digits = std::str::from_utf8(&self.src[start..self.pos])
                    .expect("ascii digits");
                let var = digits.parse::<usize>().map_err(|_| Error::Syntax {
                    pos: start,
                    msg: "variable index out of range".into(),
                })?;
                if var == 0 {
                    return Err(Error::Syntax {
                        pos: start,
                        msg: "variable indices start at 1".into(),
                    });
                }
                self.nodes.push(Node::Leaf { var, negated });
                Ok(self.nodes.len() - 1)
            }
            Some(_) => Err(self.error("expected 'N(' or a variable")),
            None => Err(self.error("unexpected end of input")),
        }
    }
}

/// Input bits `x_1..x_N`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Assignment {
    bits: Vec<bool>,
}

impl Assignment {
    pub fn new(bits: Vec<bool>) -> Self {
        Assignment { bits }
    }

    pub fn zeros(n: usize) -> Self {
        Assignment {
            bits: vec![false; n],
        }
    }

    /// Parses a bitstring whose first character is `x_1`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.is_empty() {
            return Err(Error::BadBitstring("empty".into()));
        }
        text.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::BadBitstring(format!("unexpected '{other}'"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Assignment::new)
    }

    /// The `index`-th assignment of `n` bits in lexicographic order, `x_1` most significant.
    pub fn from_index(n: usize, index: u64) -> Self {
        Assignment {
            bits: (0..n).map(|i| (index >> (n - 1 - i)) & 1 == 1).collect(),
        }
    }

    /// All `2^n` assignments in lexicographic order.
    pub fn all(n: usize) -> impl Iterator<Item = Assignment> {
        (0..1u64 << n).map(move |i| Assignment::from_index(n, i))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Value of `x_var` (1-based).
    pub fn bit(&self, var: usize) -> bool {
        self.bits[var - 1]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub(crate) fn check_len(&self, expected: usize) -> Result<()> {
        if self.bits.len() == expected {
            Ok(())
        } else {
            Err(Error::AssignmentLength {
                expected,
                got: self.bits.len(),
            })
        }
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}
