//! Topology-only Newick reading and writing.
//!
//! Accepted grammar:
//!
//! ```text
//! tree    := subtree ';'
//! subtree := label [':' number]
//!          | '(' subtree (',' subtree)+ ')' [label] [':' number]
//! ```
//!
//! Branch lengths and internal labels are accepted and dropped. Whitespace
//! may appear between tokens. Both directions are iterative, so very deep
//! trees (caterpillars with tens of thousands of leaves) are fine.

use crate::error::{Result, TreeError};
use crate::tree::{is_label_byte, NodeId, TaxonLabel, Tree, TreeBuilder};

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn malformed(&self, message: impl Into<String>) -> TreeError {
        TreeError::MalformedInput {
            position: self.pos,
            message: message.into(),
        }
    }

    fn read_label(&mut self) -> &str {
        let start = self.pos;
        while self.pos < self.bytes.len() && is_label_byte(self.bytes[self.pos]) {
            self.pos += 1;
        }
        // Only ASCII bytes were consumed.
        std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii label")
    }

    fn skip_branch_length(&mut self) -> Result<()> {
        if self.peek() != Some(b':') {
            return Ok(());
        }
        self.pos += 1;
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && matches!(self.bytes[self.pos], b'0'..=b'9' | b'.' | b'-' | b'+' | b'e' | b'E')
        {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii number");
        if text.parse::<f64>().is_err() {
            return Err(TreeError::MalformedInput {
                position: start,
                message: format!("invalid branch length `{text}`"),
            });
        }
        Ok(())
    }
}

/// Parses a single tree terminated by `;`.
pub fn parse_newick(text: &str) -> Result<Tree> {
    let mut cur = Cursor {
        bytes: text.as_bytes(),
        pos: 0,
    };
    match cur.peek() {
        None | Some(b';') => return Err(TreeError::EmptyTree),
        _ => {}
    }

    let mut builder = TreeBuilder::new();
    let mut open: Vec<Vec<NodeId>> = Vec::new();
    loop {
        let mut done = match cur.peek() {
            Some(b'(') => {
                cur.pos += 1;
                open.push(Vec::new());
                continue;
            }
            Some(b) if is_label_byte(b) => {
                let start = cur.pos;
                let label = TaxonLabel::new(cur.read_label()).map_err(|_| TreeError::MalformedInput {
                    position: start,
                    message: "invalid leaf label".into(),
                })?;
                let leaf = builder.add_leaf(label)?;
                cur.skip_branch_length()?;
                leaf
            }
            Some(b',' | b')' | b':') => return Err(TreeError::UnlabeledLeaf { position: cur.pos }),
            Some(b';') => return Err(TreeError::UnlabeledLeaf { position: cur.pos }),
            Some(b) => return Err(cur.malformed(format!("unexpected character `{}`", b as char))),
            None => return Err(cur.malformed("unexpected end of input")),
        };

        // `done` is a finished subtree; consume closers until the next one starts.
        loop {
            match cur.peek() {
                Some(b',') => {
                    let frame = open
                        .last_mut()
                        .ok_or_else(|| cur.malformed("`,` outside parentheses"))?;
                    frame.push(done);
                    cur.pos += 1;
                    break;
                }
                Some(b')') => {
                    let mut kids = open.pop().ok_or_else(|| cur.malformed("unbalanced `)`"))?;
                    kids.push(done);
                    if kids.len() < 2 {
                        return Err(cur.malformed("a group needs at least two subtrees"));
                    }
                    cur.pos += 1;
                    done = builder.add_internal(&kids)?;
                    if cur.peek().is_some_and(is_label_byte) {
                        cur.read_label();
                    }
                    cur.skip_branch_length()?;
                }
                Some(b';') => {
                    if !open.is_empty() {
                        return Err(cur.malformed("unbalanced `(`"));
                    }
                    cur.pos += 1;
                    if cur.peek().is_some() {
                        return Err(cur.malformed("trailing text after `;`"));
                    }
                    return builder.finish(done);
                }
                Some(b) => {
                    return Err(cur.malformed(format!("unexpected character `{}`", b as char)))
                }
                None => return Err(cur.malformed("missing `;`")),
            }
        }
    }
}

/// Parses one tree per non-blank line.
pub fn parse_newick_lines(text: &str) -> Result<Vec<Tree>> {
    text.lines()
        .filter(|line| !line.trim().is_empty())
        .map(parse_newick)
        .collect()
}

/// Writes the tree with children in stored order and no branch lengths.
pub fn serialize_newick(tree: &Tree) -> String {
    enum Step {
        Enter(NodeId, bool),
        Close,
    }
    let mut out = String::with_capacity(tree.leaf_count() * 6);
    let mut stack = vec![Step::Enter(tree.root(), false)];
    let mut kids = Vec::new();
    while let Some(step) = stack.pop() {
        match step {
            Step::Close => out.push(')'),
            Step::Enter(v, comma) => {
                if comma {
                    out.push(',');
                }
                if let Some(label) = tree.label(v) {
                    out.push_str(label.as_str());
                    continue;
                }
                out.push('(');
                stack.push(Step::Close);
                kids.clear();
                kids.extend(tree.children(v));
                for (i, &c) in kids.iter().enumerate().rev() {
                    stack.push(Step::Enter(c, i > 0));
                }
            }
        }
    }
    out.push(';');
    out
}

/// Sorts every child list by the smallest leaf label below each child.
pub fn canonicalize(tree: &mut Tree) {
    let order = tree.post_order();
    let mut min_label: Vec<Option<TaxonLabel>> = vec![None; tree.node_count()];
    for &v in &order {
        min_label[v.index()] = match tree.label(v) {
            Some(l) => Some(l.clone()),
            None => tree
                .children(v)
                .filter_map(|c| min_label[c.index()].clone())
                .min(),
        };
    }
    for &v in &order {
        if tree.is_leaf(v) {
            continue;
        }
        let mut kids: Vec<NodeId> = tree.children(v).collect();
        if kids.windows(2).all(|w| min_label[w[0].index()] <= min_label[w[1].index()]) {
            continue;
        }
        kids.sort_by(|a, b| min_label[a.index()].cmp(&min_label[b.index()]));
        tree.reorder_children(v, &kids);
    }
}

/// Serialization after [`canonicalize`], leaving the input untouched.
pub fn serialize_newick_canonical(tree: &Tree) -> String {
    let mut copy = tree.clone();
    canonicalize(&mut copy);
    serialize_newick(&copy)
}
