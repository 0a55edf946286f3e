//! Word formats of the path trees and a host-side view of them.
//!
//! A node word carries a 2-bit kind in its top bits. Branches hold a depth
//! and a handle for each child; a handle of `1 << a` names the empty tree.
//! Paths are read msb first and bit 0 goes left.

use crate::psam::isa::mask;
use crate::psam::Machine;

pub const KIND_LEAF: u64 = 1;
pub const KIND_BRANCH: u64 = 2;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct FormatError(pub String);

/// Sizes shared by the generated code and the host decoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimFormat {
    /// PSAM word width.
    pub w: u32,
    /// PSAM address bits.
    pub a: u32,
    /// Bits of a branch depth field.
    pub db: u32,
    /// PRAM word width.
    pub wp: u32,
    /// PRAM registers.
    pub kp: usize,
    /// PRAM address bits.
    pub mem_bits: u32,
    /// Processor id bits.
    pub pid_bits: u32,
}

fn bits_for(v: u64) -> u32 {
    (64 - v.leading_zeros()).max(1)
}

impl SimFormat {
    pub fn new(wp: u32, kp: usize, mem_bits: u32, pid_bits: u32, a: u32) -> Result<Self, FormatError> {
        if mem_bits == 0 || pid_bits == 0 || mem_bits > wp {
            return Err(FormatError(format!(
                "need 1 <= address bits ({mem_bits}) <= word bits ({wp}) and at least one pid bit"
            )));
        }
        let l = (mem_bits + pid_bits) as u64;
        let db = bits_for(l);
        let h = a + 1;
        let need = [
            2 + 2 * db + 2 * h,
            2 + pid_bits + kp as u32 * wp,
            2 + wp + 1,
            2 * h + 2,
            l as u32,
        ];
        let w = need.into_iter().max().unwrap();
        if w > 64 {
            return Err(FormatError(format!(
                "simulation needs {w}-bit PSAM words (at most 64): {kp} registers of {wp} bits, {pid_bits} pid bits, {a} address bits"
            )));
        }
        Ok(SimFormat {
            w,
            a,
            db,
            wp,
            kp,
            mem_bits,
            pid_bits,
        })
    }

    /// Processor path length: address then pid.
    pub fn depth(&self) -> u32 {
        self.mem_bits + self.pid_bits
    }

    /// Handle width.
    pub fn h(&self) -> u32 {
        self.a + 1
    }

    pub fn empty(&self) -> u64 {
        1 << self.a
    }

    /// Stack sentinel marking a call made by the driver.
    pub fn driver_mark(&self) -> u64 {
        self.empty() + 1
    }

    pub fn leaf_word(&self, payload: u64) -> u64 {
        (KIND_LEAF << (self.w - 2)) | (payload & mask(self.w - 2))
    }

    pub fn branch_word(&self, dl: u64, hl: u64, dr: u64, hr: u64) -> u64 {
        let (h, db) = (self.h(), self.db);
        (KIND_BRANCH << (self.w - 2))
            | (dl & mask(db)) << (2 * h + db)
            | (hl & mask(h)) << (h + db)
            | (dr & mask(db)) << h
            | (hr & mask(h))
    }

    pub fn mem_payload(&self, written: bool, word: u64) -> u64 {
        (written as u64) << self.wp | (word & mask(self.wp))
    }

    pub fn proc_payload(&self, pid: u64, regs: &[u64]) -> u64 {
        let mut v = pid & mask(self.pid_bits);
        for r in (0..self.kp).rev() {
            v = v << self.wp | (regs[r] & mask(self.wp));
        }
        v
    }

    pub fn unpack_proc(&self, payload: u64) -> (u64, Vec<u64>) {
        let regs = (0..self.kp).map(|r| (payload >> (r as u32 * self.wp)) & mask(self.wp)).collect();
        let pid = (payload >> (self.kp as u32 * self.wp)) & mask(self.pid_bits);
        (pid, regs)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TreeNode {
    Empty,
    Leaf(u64),
    Branch {
        dl: u64,
        left: Box<TreeNode>,
        dr: u64,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn branch(dl: u64, left: TreeNode, dr: u64, right: TreeNode) -> TreeNode {
        TreeNode::Branch {
            dl,
            left: Box::new(left),
            dr,
            right: Box::new(right),
        }
    }

    /// Canonical tree holding `entries` at `len`-bit paths. Later entries
    /// win on duplicate paths.
    pub fn from_paths(entries: &[(u64, u64)], len: u32) -> TreeNode {
        let mut sorted: Vec<(u64, u64)> = Vec::new();
        for &(p, v) in entries {
            match sorted.iter_mut().find(|e| e.0 == p) {
                Some(e) => e.1 = v,
                None => sorted.push((p, v)),
            }
        }
        sorted.sort();
        build(&sorted, len, len)
    }

    /// `(path, payload)` pairs in path order. Fails unless every leaf sits
    /// at depth `len`, every depth field matches, and no branch is empty.
    pub fn leaves(&self, len: u32) -> Result<Vec<(u64, u64)>, String> {
        let mut out = Vec::new();
        collect(self, len, 0, 0, &mut out)?;
        Ok(out)
    }
}

fn build(entries: &[(u64, u64)], len: u32, rem: u32) -> TreeNode {
    if entries.is_empty() {
        return TreeNode::Empty;
    }
    if rem == 0 {
        return TreeNode::Leaf(entries[0].1);
    }
    let bit = rem - 1;
    let split = entries.partition_point(|e| (e.0 >> bit) & 1 == 0);
    let (l, r) = entries.split_at(split);
    let d = |xs: &[(u64, u64)]| if xs.is_empty() { 0 } else { (rem - 1) as u64 };
    TreeNode::branch(d(l), build(l, len, rem - 1), d(r), build(r, len, rem - 1))
}

fn collect(t: &TreeNode, len: u32, level: u32, path: u64, out: &mut Vec<(u64, u64)>) -> Result<(), String> {
    match t {
        TreeNode::Empty => Ok(()),
        TreeNode::Leaf(v) => {
            if level != len {
                return Err(format!("leaf at depth {level}, expected {len}"));
            }
            out.push((path, *v));
            Ok(())
        }
        TreeNode::Branch { dl, left, dr, right } => {
            if level >= len {
                return Err(format!("branch below depth {len}"));
            }
            if **left == TreeNode::Empty && **right == TreeNode::Empty {
                return Err(format!("branch with two empty children at depth {level}"));
            }
            let want = (len - level - 1) as u64;
            for (d, c) in [(dl, left), (dr, right)] {
                let ok = if **c == TreeNode::Empty { *d == 0 } else { *d == want };
                if !ok {
                    return Err(format!("depth field {d} at depth {level}, expected {want}"));
                }
            }
            collect(left, len, level + 1, path << 1, out)?;
            collect(right, len, level + 1, path << 1 | 1, out)
        }
    }
}

/// Memory image built bottom-up, for preloading a machine.
#[derive(Clone, Debug, Default)]
pub struct TreeImage {
    pub cells: Vec<u64>,
}

impl TreeImage {
    /// Appends the cells of `t`; returns its handle. Addresses are
    /// sequential from 0, matching `Machine::preload`.
    pub fn push(&mut self, f: &SimFormat, t: &TreeNode) -> u64 {
        match t {
            TreeNode::Empty => f.empty(),
            TreeNode::Leaf(v) => self.emit(f.leaf_word(*v)),
            TreeNode::Branch { dl, left, dr, right } => {
                let hl = self.push(f, left);
                let hr = self.push(f, right);
                self.emit(f.branch_word(*dl, hl, *dr, hr))
            }
        }
    }

    fn emit(&mut self, word: u64) -> u64 {
        self.cells.push(word);
        self.cells.len() as u64 - 1
    }
}

/// Reads the tree at `handle` without consuming it. Every node must be
/// written, unread and fully settled.
pub fn decode_tree(m: &Machine, f: &SimFormat, handle: u64) -> Result<TreeNode, String> {
    if handle == f.empty() {
        return Ok(TreeNode::Empty);
    }
    let word = m
        .peek(handle)
        .ok_or_else(|| format!("node {handle} is unwritten, consumed or unsettled"))?;
    let (h, db) = (f.h(), f.db);
    match word >> (f.w - 2) {
        KIND_LEAF => Ok(TreeNode::Leaf(word & mask(f.w - 2))),
        KIND_BRANCH => {
            let field = |lo: u32, width: u32| (word >> lo) & mask(width);
            Ok(TreeNode::branch(
                field(2 * h + db, db),
                decode_tree(m, f, field(h + db, h))?,
                field(h, db),
                decode_tree(m, f, field(0, h))?,
            ))
        }
        kind => Err(format!("node {handle} has kind {kind}")),
    }
}
