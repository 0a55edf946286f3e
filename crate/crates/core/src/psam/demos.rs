//! Demo PSAM programs: a parallel tree fold (sum or max) and small programs
//! that crash or leave memory dirty on purpose.

use rand::Rng;

use super::asm::{Asm, Layout};
use super::isa::*;

const DEPTH_BITS: u8 = 6;

pub const KIND_END: u64 = 0;
pub const KIND_LEAF: u64 = 1;
pub const KIND_BRANCH: u64 = 2;
pub const KIND_EMPTY: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FoldOp {
    Sum,
    Max,
}

impl FoldOp {
    pub fn apply(self, a: u64, b: u64) -> u64 {
        match self {
            FoldOp::Sum => a + b,
            FoldOp::Max => a.max(b),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FoldOp::Sum => "sum",
            FoldOp::Max => "max",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tree {
    Empty,
    Leaf(u64),
    Branch(Box<Tree>, Box<Tree>),
}

impl Tree {
    pub fn branch(l: Tree, r: Tree) -> Tree {
        Tree::Branch(Box::new(l), Box::new(r))
    }

    /// Balanced tree over the leaves, left half first.
    pub fn balanced(leaves: &[u64]) -> Tree {
        match leaves {
            [] => Tree::Empty,
            [v] => Tree::Leaf(*v),
            _ => {
                let (l, r) = leaves.split_at(leaves.len().div_ceil(2));
                Tree::branch(Tree::balanced(l), Tree::balanced(r))
            }
        }
    }

    /// Random shape with `leaves` leaves and occasional empty subtrees.
    pub fn random<R: Rng>(rng: &mut R, leaves: usize, max_value: u64) -> Tree {
        match leaves {
            0 => Tree::Empty,
            1 => {
                if rng.gen_bool(0.15) {
                    let leaf = Tree::Leaf(rng.gen_range(0..=max_value));
                    if rng.gen_bool(0.5) {
                        Tree::branch(leaf, Tree::Empty)
                    } else {
                        Tree::branch(Tree::Empty, leaf)
                    }
                } else {
                    Tree::Leaf(rng.gen_range(0..=max_value))
                }
            }
            n => {
                let l = rng.gen_range(1..n);
                Tree::branch(Tree::random(rng, l, max_value), Tree::random(rng, n - l, max_value))
            }
        }
    }

    pub fn depth(&self) -> u32 {
        match self {
            Tree::Empty | Tree::Leaf(_) => 0,
            Tree::Branch(l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    pub fn fold(&self, op: FoldOp) -> u64 {
        match self {
            Tree::Empty => 0,
            Tree::Leaf(v) => *v,
            Tree::Branch(l, r) => op.apply(l.fold(op), r.fold(op)),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            Tree::Empty => 0,
            Tree::Leaf(_) => 1,
            Tree::Branch(l, r) => l.leaf_count() + r.leaf_count(),
        }
    }
}

/// Sizing of the fold program's words.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FoldConfig {
    pub addr_bits: u32,
}

impl FoldConfig {
    pub fn handle_bits(&self) -> u8 {
        self.addr_bits as u8 + 1
    }

    pub fn word_bits(&self) -> u32 {
        2 + 2 * (DEPTH_BITS as u32 + self.handle_bits() as u32)
    }

    /// Bits available to a partial result carried in a stack frame.
    pub fn value_bits(&self) -> u32 {
        self.word_bits() - 2 - self.handle_bits() as u32
    }

    fn branch(&self) -> Layout {
        let h = self.handle_bits();
        Layout::new(&[("kind", 2), ("dl", DEPTH_BITS), ("hl", h), ("dr", DEPTH_BITS), ("hr", h)])
    }

    fn token(&self) -> Layout {
        Layout::new(&[("kind", 2), ("val", self.word_bits() as u8 - 2)])
    }

    fn parse_frame(&self) -> Layout {
        let h = self.handle_bits();
        Layout::new(&[("handle", h), ("depth", DEPTH_BITS), ("prev", h)])
    }

    fn fold_frame(&self) -> Layout {
        Layout::new(&[("kind", 2), ("prev", self.handle_bits()), ("tok", self.value_bits() as u8)])
    }

    /// Post-order tape: leaves and empties push, branches pop two, then END.
    pub fn tape(&self, tree: &Tree) -> Vec<u64> {
        fn walk(t: &Tree, tok: &Layout, out: &mut Vec<u64>) {
            match t {
                Tree::Empty => out.push(tok.encode(&[KIND_EMPTY, 0])),
                Tree::Leaf(v) => out.push(tok.encode(&[KIND_LEAF, *v])),
                Tree::Branch(l, r) => {
                    walk(l, tok, out);
                    walk(r, tok, out);
                    out.push(tok.encode(&[KIND_BRANCH, 0]));
                }
            }
        }
        let mut out = Vec::new();
        walk(tree, &self.token(), &mut out);
        out.push(KIND_END);
        out
    }
}

// Registers of the fold program.
const T: Reg = 1;
const RES: Reg = 2;
const SP: Reg = 3;
const A: Reg = 4;
const B: Reg = 5;

/// Parses a tree from the tape into memory, folds it in parallel, outputs
/// the result and halts.
pub fn fold_program(cfg: FoldConfig, op: FoldOp) -> Program {
    let w = cfg.word_bits();
    let empty = 1u64 << cfg.addr_bits;
    let br = cfg.branch();
    let pf = cfg.parse_frame();
    let ff = cfg.fold_frame();
    let kind = |e: Expr| field(e, w as u8 - 2, 2);
    let is_kind = |e: Expr, v: u64| eq(kind(e), k(v));
    let mut a = Asm::new(6, w, cfg.addr_bits);

    // Parse: the stack holds (handle, depth, prev) frames.
    a.update(vec![(SP, k(empty))]);
    a.label("parse");
    a.input(A);
    a.switch(
        vec![
            (is_kind(reg(A), KIND_LEAF), "p_leaf"),
            (is_kind(reg(A), KIND_BRANCH), "p_branch"),
            (is_kind(reg(A), KIND_EMPTY), "p_empty"),
        ],
        "p_end",
    );

    a.label("p_leaf");
    a.write(A, T);
    a.update(vec![(B, pf.pack(vec![reg(T), k(0), reg(SP)]))]);
    a.write(B, SP);
    a.jump("parse");

    a.label("p_empty");
    a.update(vec![(B, pf.pack(vec![k(empty), k(0), reg(SP)]))]);
    a.write(B, SP);
    a.jump("parse");

    a.label("p_branch");
    a.read(SP, B);
    a.update(vec![(SP, pf.get(reg(B), "prev"))]);
    a.read(SP, A);
    {
        let dl = pf.get(reg(A), "depth");
        let dr = pf.get(reg(B), "depth");
        a.update(vec![
            (
                A,
                br.pack(vec![k(KIND_BRANCH), dl.clone(), pf.get(reg(A), "handle"), dr.clone(), pf.get(reg(B), "handle")]),
            ),
            (RES, add(k(1), mux(leq(dl.clone(), dr.clone()), dr, dl))),
            (SP, pf.get(reg(A), "prev")),
        ]);
    }
    a.write(A, T);
    a.update(vec![(B, pf.pack(vec![reg(T), reg(RES), reg(SP)]))]);
    a.write(B, SP);
    a.jump("parse");

    a.label("p_end");
    a.branch(eq(reg(SP), k(empty)), "p_none");
    a.read(SP, B);
    a.update(vec![(T, pf.get(reg(B), "handle")), (SP, k(empty))]);
    a.jump("p_start");
    a.label("p_none");
    a.update(vec![(T, k(empty))]);
    a.label("p_start");
    // Bottom frame marks the root's own stack.
    a.update(vec![(B, ff.pack(vec![k(0), k(empty), k(0)]))]);
    a.write(B, SP);
    a.update(vec![(RES, k(0))]);

    // fold(T): result in RES, then continue at `ret`.
    a.label("fold");
    a.branch(eq(reg(T), k(empty)), "f_empty");
    a.read(T, A);
    a.branch(is_kind(reg(A), KIND_LEAF), "f_leaf");
    a.jump("f_branch");
    // Empty and leaf take the same number of steps from `fold` to `ret`.
    a.label("f_empty");
    a.nops(2);
    a.goto(vec![(RES, k(0))], "ret");
    a.label("f_leaf");
    a.goto(vec![(RES, field(reg(A), 0, w as u8 - 2))], "ret");

    a.label("f_branch");
    {
        let dl = br.get(reg(A), "dl");
        let dr = br.get(reg(A), "dr");
        let hl = br.get(reg(A), "hl");
        let hr = br.get(reg(A), "hr");
        let left_shallow = leq(dl, dr);
        a.update(vec![
            (T, mux(left_shallow.clone(), hl.clone(), hr.clone())),
            (B, mux(left_shallow, hr, hl)),
        ]);
    }
    a.fork(vec![(SP, k(empty))], "fold", A);
    a.update(vec![
        (A, ff.pack(vec![k(1), reg(SP), field(reg(A), 0, cfg.value_bits() as u8)])),
        (T, reg(B)),
    ]);
    a.write(A, SP);
    a.jump("fold");

    a.label("ret");
    a.branch(eq(reg(SP), k(empty)), "r_child");
    a.read(SP, A);
    a.branch(eq(ff.get(reg(A), "kind"), k(0)), "r_root");
    let tok = ff.get(reg(A), "tok");
    let combined = match op {
        FoldOp::Sum => add(reg(RES), tok),
        FoldOp::Max => {
            let t2 = ff.get(reg(A), "tok");
            mux(leq(reg(RES), tok), t2, reg(RES))
        }
    };
    a.goto(vec![(RES, combined), (SP, ff.get(reg(A), "prev"))], "ret");
    a.label("r_child");
    a.ret(RES);
    a.label("r_root");
    a.output(RES);
    a.ret(RES);
    a.finish().expect("fold program is well formed")
}

/// Writes a word, then reads its address twice.
pub fn double_read_program() -> Program {
    let mut a = Asm::new(3, 16, 8);
    a.update(vec![(1, k(42))]);
    a.write(1, 2);
    a.read(2, 1);
    a.read(2, 1);
    a.output(1);
    a.ret(1);
    a.finish().expect("well formed")
}

/// Forks a slow child and uses its result on the very next step.
pub fn premature_token_program() -> Program {
    let mut a = Asm::new(3, 16, 8);
    a.fork(vec![(1, k(5))], "child", 2);
    a.update(vec![(1, add(reg(2), k(1)))]);
    a.output(1);
    a.ret(1);
    a.label("child");
    a.nops(3);
    a.ret(1);
    a.finish().expect("well formed")
}

/// Like `premature_token_program`, but waits long enough.
pub fn joined_token_program() -> Program {
    let mut a = Asm::new(3, 16, 8);
    a.fork(vec![(1, k(5))], "child", 2);
    a.nops(5);
    a.update(vec![(1, add(reg(2), k(1)))]);
    a.output(1);
    a.ret(1);
    a.label("child");
    a.nops(3);
    a.ret(1);
    a.finish().expect("well formed")
}

/// Writes a word it never reads: runs fine but is not clean.
pub fn unclean_program() -> Program {
    let mut a = Asm::new(3, 16, 8);
    a.input(1);
    a.write(1, 2);
    a.output(1);
    a.ret(1);
    a.finish().expect("well formed")
}

/// Clean counterpart of `unclean_program`.
pub fn echo_program() -> Program {
    let mut a = Asm::new(3, 16, 8);
    a.input(1);
    a.write(1, 2);
    a.read(2, 1);
    a.output(1);
    a.ret(1);
    a.finish().expect("well formed")
}

/// Forks a binomial tree of `2^depth` processes; each writes one word and
/// reads it back. The root outputs `depth` after the tree has finished.
/// Work grows as `2^depth`, which makes it a scaling workload.
pub fn spread_program(depth: u32, w: u32) -> Program {
    const D: Reg = 1;
    const X: Reg = 2;
    const F: Reg = 3;
    let mut a = Asm::new(4, w, w - 1);
    a.update(vec![(D, k(depth as u64))]);
    a.label("node");
    a.branch(eq(reg(D), k(0)), "leaf");
    a.fork(vec![(D, sub(reg(D), k(1))), (F, k(1))], "node", X);
    a.update(vec![(D, sub(reg(D), k(1)))]);
    a.jump("node");
    a.label("leaf");
    a.write(D, X);
    a.read(X, D);
    a.branch(eq(reg(F), k(0)), "wait");
    a.ret(D);
    a.label("wait");
    a.update(vec![(X, k(depth as u64 + 3))]);
    a.label("spin");
    a.update(vec![(X, sub(reg(X), k(1)))]);
    a.branch(eq(reg(X), k(0)), "done");
    a.jump("spin");
    a.label("done");
    a.update(vec![(D, k(depth as u64))]);
    a.output(D);
    a.ret(D);
    a.finish().expect("spread program is well formed")
}
