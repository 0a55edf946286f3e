use cyclic_core::pram::compile::harness;
use cyclic_core::pram::demos::*;
use cyclic_core::pram::*;
use cyclic_core::psam::isa::*;
use cyclic_core::psam::{check_clean, psam_run, Crash, Limits, Machine, Outcome, Program};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn limits() -> Limits {
    Limits {
        max_lineage: 1024,
        ..Limits::default()
    }
}

fn opts(pid_bits: u32) -> CompileOptions {
    CompileOptions {
        pid_bits,
        psam_addr_bits: 20,
    }
}

fn fmt() -> SimFormat {
    SimFormat::new(8, 3, 3, 2, 12).unwrap()
}

/// Runs a harness to completion over a preloaded image; returns the
/// finished machine and its outputs.
fn run_harness<'p>(p: &'p Program, image: &TreeImage, input: &[u64]) -> (Machine<'p>, Vec<u64>) {
    let mut m = Machine::new(p, input, limits()).unwrap();
    m.preload(&image.cells).unwrap();
    while !m.is_done() {
        m.step().unwrap();
    }
    assert_eq!(m.crash(), None);
    let out = m.outputs().into_iter().map(|o| o.unwrap()).collect();
    (m, out)
}

fn reference(p: &PramProgram, input: &[u64], star: StarOp) -> PramRun {
    pram_run(p, input, star, PramLimits::default()).unwrap()
}

fn compiled_output(p: &PramProgram, input: &[u64], star: StarOp) -> (Vec<u64>, PramRun) {
    let r = reference(p, input, star);
    let c = compile_pram_to_psam(p, star, opts(r.stats.pid_bits)).unwrap();
    let run = psam_run(&c.program, input, limits()).unwrap();
    assert!(check_clean(&run.trace), "compiled program left cells unread");
    (run.output().expect("compiled run crashed").to_vec(), r)
}

// Reference interpreter.

#[test]
fn pram_write_then_read() {
    assert_eq!(reference(&write_read(), &[], StarOp::Add).output, vec![7]);
}

#[test]
fn pram_conflict_max() {
    let r = reference(&conflict(), &[2, 5], StarOp::Max);
    assert_eq!(r.output, vec![5]);
    assert_eq!(reference(&conflict(), &[2, 5], StarOp::Add).output, vec![7]);
    assert_eq!(reference(&conflict(), &[2, 5], StarOp::First).output, vec![2]);
    assert_eq!(reference(&conflict(), &[2, 5], StarOp::Last).output, vec![5]);
}

#[test]
fn pram_simultaneous_input_goes_to_older() {
    let mut a = PramAsm::new(3, 8, 1);
    a.fork(vec![(2, k(1))], "in");
    a.label("in");
    a.input(1);
    a.update(vec![(1, add(reg(1), mux(reg(2), k(100), k(0))))]);
    a.output(1);
    a.die();
    let p = a.finish().unwrap();
    let r = reference(&p, &[10, 20], StarOp::Add);
    assert_eq!(r.output, vec![10, 120]);
    assert_eq!(r.stats.max_procs, 2);
}

#[test]
fn pram_counts_work_and_time() {
    let r = reference(&parallel_increment(8), &[0; 8], StarOp::Add);
    assert_eq!(r.stats.work, r.stats.active.iter().map(|&a| a as u64).sum::<u64>());
    assert_eq!(r.stats.time, r.stats.active.len() as u64);
    assert_eq!(r.stats.max_procs, 8);
    assert_eq!(r.stats.pid_bits, 4);
}

#[test]
fn pram_errors() {
    let mut a = PramAsm::new(2, 8, 2);
    a.update(vec![(1, k(9))]);
    a.read(1, 1);
    let p = a.finish().unwrap();
    assert!(matches!(
        pram_run(&p, &[], StarOp::Add, PramLimits::default()),
        Err(PramError::AddressBound { addr: 9, .. })
    ));
    let mut a = PramAsm::new(2, 8, 2);
    a.label("spin");
    a.goto(vec![], "spin");
    let p = a.finish().unwrap();
    let lim = PramLimits {
        max_time: 50,
        ..PramLimits::default()
    };
    assert_eq!(pram_run(&p, &[], StarOp::Add, lim), Err(PramError::TimeLimit(50)));
    let mut a = PramAsm::new(2, 8, 2);
    a.update(vec![]);
    let p = a.finish().unwrap();
    assert!(matches!(
        pram_run(&p, &[], StarOp::Add, PramLimits::default()),
        Err(PramError::InvalidPc { pc: 1, .. })
    ));
}

#[test]
fn fork_without_pc_is_rejected() {
    let p = PramProgram {
        instrs: vec![PramInstr::Fork(Transform::new(vec![(1, k(1))]))],
        k: 2,
        w: 8,
        addr_bits: 2,
    };
    assert!(p.validate().is_err());
}

// Conflict operators.

#[test]
fn star_laws() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let w = 12;
    for op in StarOp::ALL {
        for _ in 0..1000 {
            let (a, b, c) = (rng.gen_range(0..1 << w), rng.gen_range(0..1 << w), rng.gen_range(0..1 << w));
            assert_eq!(op.apply(op.apply(a, b, w), c, w), op.apply(a, op.apply(b, c, w), w), "{op:?}");
            if op.is_commutative() {
                assert_eq!(op.apply(a, b, w), op.apply(b, a, w));
            }
            let e = op.expr(reg(1), reg(2), w);
            assert_eq!(e.eval(&[0, a, b], 32), op.apply(a, b, w), "{op:?} expression");
            // Writes beat readbacks; two readbacks keep the first.
            assert_eq!(op.lifted((true, a), (false, b), w), (true, a));
            assert_eq!(op.lifted((false, a), (true, b), w), (true, b));
            assert_eq!(op.lifted((false, a), (false, b), w), (false, a));
            assert_eq!(op.lifted((true, a), (true, b), w), (true, op.apply(a, b, w)));
            let x = [(true, a), (false, b), (true, c)];
            let l = |p, q| op.lifted(p, q, w);
            assert_eq!(l(l(x[0], x[1]), x[2]), l(x[0], l(x[1], x[2])));
        }
    }
}

#[test]
fn star_parses() {
    assert_eq!("+".parse::<StarOp>(), Ok(StarOp::Add));
    assert_eq!("max".parse::<StarOp>(), Ok(StarOp::Max));
    assert!("avg".parse::<StarOp>().is_err());
}

// Tree formats.

#[test]
fn tree_from_paths_round_trips() {
    let t = TreeNode::from_paths(&[(0b101, 7), (0b001, 3)], 3);
    assert_eq!(t.leaves(3).unwrap(), vec![(0b001, 3), (0b101, 7)]);
    assert!(t.leaves(4).is_err());
    let bad = TreeNode::branch(0, TreeNode::Empty, 0, TreeNode::Empty);
    assert!(bad.leaves(1).is_err());
    let wrong_depth = TreeNode::branch(1, TreeNode::Leaf(1), 0, TreeNode::Empty);
    assert!(wrong_depth.leaves(1).is_err());
}

#[test]
fn format_rejects_oversized_words() {
    assert!(SimFormat::new(16, 4, 8, 16, 24).is_err());
    assert!(SimFormat::new(8, 2, 0, 4, 12).is_err());
}

// Split.

#[test]
fn split_empty() {
    let f = fmt();
    let p = harness::split(f).unwrap();
    let (m, out) = run_harness(&p, &TreeImage::default(), &[f.empty()]);
    assert_eq!(out, vec![f.empty(), f.empty()]);
    assert_eq!(m.cell_count(), 0);
}

#[test]
fn split_leaf_copies() {
    let f = fmt();
    let p = harness::split(f).unwrap();
    let mut img = TreeImage::default();
    let h = img.push(&f, &TreeNode::Leaf(f.mem_payload(false, 9)));
    let (m, out) = run_harness(&p, &img, &[h]);
    assert_ne!(out[0], out[1]);
    assert!(out.iter().all(|&a| a >= img.cells.len() as u64));
    for &a in &out {
        assert_eq!(decode_tree(&m, &f, a).unwrap(), TreeNode::Leaf(9));
    }
    // The write flag does not survive the copy.
    let mut img = TreeImage::default();
    let h = img.push(&f, &TreeNode::Leaf(f.mem_payload(true, 9)));
    let (m, out) = run_harness(&p, &img, &[h]);
    assert_eq!(decode_tree(&m, &f, out[0]).unwrap(), TreeNode::Leaf(9));
}

#[test]
fn split_branch_hands_back_children() {
    let f = fmt();
    let p = harness::split(f).unwrap();
    let mut img = TreeImage::default();
    let t = TreeNode::from_paths(&[(0b010, 1), (0b110, 2)], 3);
    let h = img.push(&f, &t);
    let (m, out) = run_harness(&p, &img, &[h]);
    assert_eq!(m.cell_count(), img.cells.len());
    let TreeNode::Branch { left, right, .. } = t else { panic!() };
    assert_eq!(decode_tree(&m, &f, out[0]).unwrap(), *left);
    assert_eq!(decode_tree(&m, &f, out[1]).unwrap(), *right);
}

// Merge.

fn merge_trees(star: StarOp, a: &TreeNode, b: &TreeNode) -> (TreeNode, u64) {
    let f = fmt();
    let p = harness::merge(f, star).unwrap();
    let mut img = TreeImage::default();
    let ha = img.push(&f, a);
    let hb = img.push(&f, b);
    let (m, out) = run_harness(&p, &img, &[ha, hb]);
    (decode_tree(&m, &f, out[0]).unwrap(), m.trace().work)
}

#[test]
fn merge_with_empty() {
    let t = TreeNode::from_paths(&[(3, 4)], 5);
    assert_eq!(merge_trees(StarOp::Add, &TreeNode::Empty, &t).0, t);
    assert_eq!(merge_trees(StarOp::Add, &t, &TreeNode::Empty).0, t);
}

#[test]
fn merge_two_leaves() {
    let f = fmt();
    let (x, y) = (TreeNode::Leaf(f.mem_payload(true, 3)), TreeNode::Leaf(f.mem_payload(true, 5)));
    assert_eq!(merge_trees(StarOp::Max, &x, &y).0, TreeNode::Leaf(f.mem_payload(true, 5)));
    assert_eq!(merge_trees(StarOp::Add, &x, &y).0, TreeNode::Leaf(f.mem_payload(true, 8)));
    let rb = TreeNode::Leaf(f.mem_payload(false, 9));
    assert_eq!(merge_trees(StarOp::Add, &rb, &y).0, y);
}

#[test]
fn merge_work_follows_shared_prefix() {
    let len = 5;
    let mut works = Vec::new();
    for shared in 0..len {
        let p0 = 0u64;
        let p1 = 1 << (len - 1 - shared);
        let a = TreeNode::from_paths(&[(p0, 1)], len);
        let b = TreeNode::from_paths(&[(p1, 2)], len);
        let (t, work) = merge_trees(StarOp::Add, &a, &b);
        assert_eq!(t.leaves(len).unwrap(), vec![(p0, 1), (p1, 2)]);
        works.push(work);
    }
    assert!(works.windows(2).all(|w| w[1] > w[0]), "{works:?}");
    for (s, &w) in works.iter().enumerate() {
        assert!(w <= 40 * (s as u64 + 1), "shared prefix {s}: work {w}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn merge_matches_union(
        xs in proptest::collection::vec((0u64..32, any::<bool>(), 0u64..256), 0..6),
        ys in proptest::collection::vec((0u64..32, any::<bool>(), 0u64..256), 0..6),
        max in any::<bool>(),
    ) {
        let f = fmt();
        let star = if max { StarOp::Max } else { StarOp::Add };
        let a: Vec<(u64, u64)> = xs.iter().map(|&(p, fl, v)| (p, f.mem_payload(fl, v))).collect();
        let b: Vec<(u64, u64)> = ys.iter().map(|&(p, fl, v)| (p, f.mem_payload(fl, v))).collect();
        let ta = TreeNode::from_paths(&a, 5);
        let tb = TreeNode::from_paths(&b, 5);
        let (got, _) = merge_trees(star, &ta, &tb);
        let mut want: Vec<(u64, u64)> = ta.leaves(5).unwrap();
        for (p, v) in tb.leaves(5).unwrap() {
            match want.iter_mut().find(|e| e.0 == p) {
                Some(e) => {
                    let split = |x: u64| (x >> 8 == 1, x & 0xff);
                    let (fl, word) = star.lifted(split(e.1), split(v), 8);
                    e.1 = f.mem_payload(fl, word);
                }
                None => want.push((p, v)),
            }
        }
        want.sort();
        prop_assert_eq!(got.leaves(5).unwrap(), want);
    }

    #[test]
    fn encode_builds_one_path(len in 0u32..=5, path in 0u64..32, x in 0u64..256) {
        let f = fmt();
        let path = path & ((1 << len) - 1);
        let p = harness::encode(f).unwrap();
        let aligned = if len == 0 { 0 } else { path << (f.w - len) };
        let (m, out) = run_harness(&p, &TreeImage::default(), &[aligned, len as u64, x]);
        let t = decode_tree(&m, &f, out[0]).unwrap();
        prop_assert_eq!(t.leaves(len).unwrap(), vec![(path, x)]);
        prop_assert_eq!(m.cell_count(), len as usize + 1);
    }
}

// Encode-path.

fn encode(bits: &[u64], x: u64) -> TreeNode {
    let f = fmt();
    let p = harness::encode(f).unwrap();
    let path = bits.iter().fold(0, |acc, b| acc << 1 | b);
    let aligned = if bits.is_empty() { 0 } else { path << (f.w - bits.len() as u32) };
    let (m, out) = run_harness(&p, &TreeImage::default(), &[aligned, bits.len() as u64, x]);
    decode_tree(&m, &f, out[0]).unwrap()
}

#[test]
fn encode_examples() {
    use TreeNode::*;
    assert_eq!(encode(&[], 6), Leaf(6));
    assert_eq!(encode(&[0], 6), TreeNode::branch(0, Leaf(6), 0, Empty));
    assert_eq!(
        encode(&[1, 0], 6),
        TreeNode::branch(0, Empty, 1, TreeNode::branch(0, Leaf(6), 0, Empty))
    );
}

// One step.

fn one_step(p: &PramProgram, mem: &TreeNode, procs: &TreeNode, pid_bits: u32) -> (TreeNode, TreeNode, u64, SimFormat) {
    let (prog, f) = harness::step(p, StarOp::Add, opts(pid_bits)).unwrap();
    let mut img = TreeImage::default();
    let hm = img.push(&f, mem);
    let hp = img.push(&f, procs);
    let mut m = Machine::new(&prog, &[hm, hp], limits()).unwrap();
    m.preload(&img.cells).unwrap();
    // An Output instruction shares the tape; the handles come last.
    let mut seen = Vec::new();
    while !m.is_done() {
        m.step().unwrap();
        while seen.len() < m.outputs().len() {
            seen.push(m.now());
        }
    }
    assert_eq!(m.crash(), None);
    let out: Vec<u64> = m.outputs().into_iter().map(|o| o.unwrap()).collect();
    let n = out.len();
    (
        decode_tree(&m, &f, out[n - 2]).unwrap(),
        decode_tree(&m, &f, out[n - 1]).unwrap(),
        seen[n - 2],
        f,
    )
}

fn root_tree(p: &PramProgram, f: &SimFormat, regs: &[u64], pid: u64) -> TreeNode {
    let addr = p.next_address(regs);
    TreeNode::from_paths(&[(addr << f.pid_bits | pid, f.proc_payload(pid, regs))], f.depth())
}

#[test]
fn step_without_processors_passes_memory() {
    let p = trivial(1);
    let f = SimFormat::new(p.w, p.k, p.addr_bits, 2, 20).unwrap();
    let mem = TreeNode::from_paths(&[(1, f.mem_payload(true, 5))], 1);
    let (m2, p2, _, _) = one_step(&p, &mem, &TreeNode::Empty, 2);
    assert_eq!(m2, mem);
    assert_eq!(p2, TreeNode::Empty);
}

#[test]
fn step_die_leaves_no_successor() {
    let mut a = PramAsm::new(2, 8, 2);
    a.die();
    let p = a.finish().unwrap();
    let f = SimFormat::new(8, 2, 2, 2, 20).unwrap();
    let procs = root_tree(&p, &f, &[0, 0], 1);
    let (m2, p2, _, _) = one_step(&p, &TreeNode::Empty, &procs, 2);
    assert_eq!(p2, TreeNode::Empty);
    // The scratch cell gets a readback of zero.
    assert_eq!(m2.leaves(2).unwrap(), vec![(0, f.mem_payload(false, 0))]);
}

#[test]
fn step_fork_yields_two_states() {
    let mut a = PramAsm::new(3, 8, 2);
    a.fork(vec![(2, k(9))], "child");
    a.die();
    a.label("child");
    a.die();
    let p = a.finish().unwrap();
    let f = SimFormat::new(8, 3, 2, 3, 20).unwrap();
    let procs = root_tree(&p, &f, &[0, 0, 0], 1);
    let (_, p2, _, _) = one_step(&p, &TreeNode::Empty, &procs, 3);
    let mut states: Vec<(u64, Vec<u64>)> = p2.leaves(f.depth()).unwrap().into_iter().map(|(_, v)| f.unpack_proc(v)).collect();
    states.sort();
    assert_eq!(states, vec![(2, vec![1, 0, 0]), (3, vec![2, 0, 9])]);
}

#[test]
fn step_reads_zero_from_unwritten_address() {
    let p = read_fresh();
    let (out, r) = compiled_output(&p, &[], StarOp::Add);
    assert_eq!(out, vec![1]);
    assert_eq!(r.output, vec![1]);
}

#[test]
fn step_merges_conflicting_writes() {
    for (star, want) in [(StarOp::Max, 5), (StarOp::Add, 7), (StarOp::Min, 2)] {
        let (out, r) = compiled_output(&conflict(), &[2, 5], star);
        assert_eq!(out, vec![want]);
        assert_eq!(r.output, vec![want]);
    }
}

#[test]
fn handler_takes_fixed_time() {
    // Every instruction kind finishes its step at the same PSAM time.
    let mut times = Vec::new();
    for ins in [
        PramInstr::Update(Transform::new(vec![(1, k(3))])),
        PramInstr::Read { x: 1, y: 2 },
        PramInstr::Write { x: 1, y: 2 },
        PramInstr::Input { x: 1 },
        PramInstr::Output { x: 1 },
        PramInstr::Fork(Transform::new(vec![(0, k(1))])),
        PramInstr::Die,
    ] {
        let p = PramProgram {
            instrs: vec![ins, PramInstr::Die],
            k: 3,
            w: 8,
            addr_bits: 2,
        };
        let f = SimFormat::new(8, 3, 2, 2, 20).unwrap();
        let procs = root_tree(&p, &f, &[0, 0, 0], 1);
        times.push(one_step(&p, &TreeNode::Empty, &procs, 2).2);
    }
    assert!(times.windows(2).all(|w| w[0] == w[1]), "{times:?}");
}

#[test]
fn read_then_update_across_steps() {
    let mut a = PramAsm::new(3, 8, 2);
    a.update(vec![(1, k(2)), (2, k(11))]);
    a.write(1, 2);
    a.read(1, 2);
    a.update(vec![(2, add(reg(2), reg(2)))]);
    a.output(2);
    a.die();
    let p = a.finish().unwrap();
    let (out, r) = compiled_output(&p, &[], StarOp::Add);
    assert_eq!(out, vec![22]);
    assert_eq!(r.output, out);
}

// Whole programs.

#[test]
fn trivial_program_matches() {
    let (out, r) = compiled_output(&trivial(42), &[], StarOp::Add);
    assert_eq!(out, vec![42]);
    assert_eq!(r.output, out);
}

#[test]
fn demos_keep_the_invariant() {
    for (name, input, star) in [
        ("trivial", vec![], StarOp::Add),
        ("write-read", vec![], StarOp::Add),
        ("read-fresh", vec![], StarOp::Xor),
        ("conflict", vec![2, 5], StarOp::Max),
        ("conflict", vec![2, 5], StarOp::Or),
    ] {
        let p = by_name(name, 0).unwrap();
        let r = reference(&p, &input, star);
        let c = compile_pram_to_psam(&p, star, opts(r.stats.pid_bits)).unwrap();
        let rep = check_compiled(&c, &p, &input, None, limits()).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(rep.steps.len() as u64, r.stats.time, "{name}");
        assert_eq!(rep.tape_reorders, 0);
    }
}

#[test]
fn parallel_increment_three_ways_short_of_circuits() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [8u64, 16] {
        for star in [StarOp::Add, StarOp::Max] {
            let input: Vec<u64> = (0..n).map(|_| rng.gen_range(0..200)).collect();
            let p = parallel_increment(n);
            let (out, r) = compiled_output(&p, &input, star);
            assert_eq!(r.output, parallel_increment_expected(&input, n, star));
            assert_eq!(out, r.output, "n={n} {star:?}");
        }
    }
}

#[test]
fn parallel_increment_invariant_every_step() {
    let n = 16;
    let input: Vec<u64> = (0..n).map(|i| (i * 37 + 5) % 97).collect();
    let p = parallel_increment(n);
    let r = reference(&p, &input, StarOp::Add);
    let c = compile_pram_to_psam(&p, StarOp::Add, opts(r.stats.pid_bits)).unwrap();
    let rep = check_compiled(&c, &p, &input, None, limits()).unwrap();
    assert_eq!(rep.steps.len() as u64, r.stats.time);
    // All processors read their word in one step.
    assert!(rep.tape_reorders <= 1);
}

#[test]
fn step_costs_scale_with_processors_and_depth() {
    // Work per simulated step is O(p log n) and time O(log n).
    let mut work_ratios = Vec::new();
    let mut time_ratios = Vec::new();
    for n in [8u64, 32, 128] {
        let input: Vec<u64> = (0..n).collect();
        let p = parallel_increment(n);
        let r = reference(&p, &input, StarOp::Add);
        let c = compile_pram_to_psam(&p, StarOp::Add, opts(r.stats.pid_bits)).unwrap();
        let rep = check_compiled(&c, &p, &input, None, limits()).unwrap();
        let depth = c.format.depth() as f64;
        let w = rep.steps.iter().map(|s| s.psam_work as f64 / (s.procs as f64 * depth)).fold(0.0, f64::max);
        let t = rep.steps.iter().map(|s| s.psam_time as f64 / depth).fold(0.0, f64::max);
        work_ratios.push(w);
        time_ratios.push(t);
    }
    for rs in [&work_ratios, &time_ratios] {
        let (lo, hi) = rs.iter().fold((f64::MAX, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        assert!(hi < 150.0 && hi / lo < 1.5, "{rs:?}");
    }
}

#[test]
fn non_commutative_star_is_rejected() {
    assert_eq!(
        compile_pram_to_psam(&trivial(1), StarOp::First, opts(2)).unwrap_err(),
        CompileError::NonCommutative(StarOp::First)
    );
}

#[test]
fn pid_overflow_crashes() {
    let mut a = PramAsm::new(2, 8, 1);
    a.fork(vec![], "end");
    a.fork(vec![], "end");
    a.label("end");
    a.die();
    let p = a.finish().unwrap();
    assert_eq!(reference(&p, &[], StarOp::Add).stats.pid_bits, 3);
    let c = compile_pram_to_psam(&p, StarOp::Add, opts(2)).unwrap();
    let run = psam_run(&c.program, &[], limits()).unwrap();
    assert!(matches!(run.outcome, Outcome::Crashed(Crash::InvalidPc { .. })));
    let c = compile_pram_to_psam(&p, StarOp::Add, opts(3)).unwrap();
    assert_eq!(psam_run(&c.program, &[], limits()).unwrap().output(), Some(&[][..]));
}

/// Straight-line root code with forked workers that share memory but never
/// touch the tapes, so tape order is not an issue.
fn random_program(rng: &mut ChaCha8Rng) -> PramProgram {
    let mut a = PramAsm::new(4, 8, 3);
    let pick = |rng: &mut ChaCha8Rng| rng.gen_range(1..4u8);
    let value = |rng: &mut ChaCha8Rng| -> Expr {
        match rng.gen_range(0..4) {
            0 => k(rng.gen_range(0..256)),
            1 => add(reg(rng.gen_range(1..4)), k(rng.gen_range(0..9))),
            2 => xor(reg(rng.gen_range(1..4)), reg(rng.gen_range(1..4))),
            _ => mux(reg(rng.gen_range(1..4)), k(rng.gen_range(0..9)), reg(rng.gen_range(1..4))),
        }
    };
    let body = |a: &mut PramAsm, rng: &mut ChaCha8Rng, len: usize, io: bool, workers: usize| {
        for _ in 0..len {
            match rng.gen_range(0..7) {
                0 | 1 => {
                    let r = pick(rng);
                    let e = value(rng);
                    a.update(vec![(r, e)]);
                }
                2 => {
                    let (x, y) = (pick(rng), pick(rng));
                    a.update(vec![(x, and(reg(x), k(7)))]);
                    a.read(x, y);
                }
                3 => {
                    let (x, y) = (pick(rng), pick(rng));
                    a.update(vec![(x, and(reg(x), k(7)))]);
                    a.write(x, y);
                }
                4 if io => a.output(pick(rng)),
                5 if io => a.input(pick(rng)),
                6 if workers > 0 => {
                    let r = pick(rng);
                    let w = rng.gen_range(0..workers);
                    a.fork(vec![(r, k(rng.gen_range(0..8)))], &format!("w{w}"));
                }
                _ => a.update(vec![]),
            }
        }
        a.die();
    };
    let workers = 2;
    body(&mut a, rng, 14, true, workers);
    for w in 0..workers {
        a.label(&format!("w{w}"));
        body(&mut a, rng, 6, false, 0);
    }
    a.finish().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn random_programs_agree(seed in any::<u64>(), max in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_program(&mut rng);
        let star = if max { StarOp::Max } else { StarOp::Add };
        let input: Vec<u64> = (0..8).map(|_| rng.gen_range(0..256)).collect();
        let r = reference(&p, &input, star);
        let c = compile_pram_to_psam(&p, star, opts(r.stats.pid_bits)).unwrap();
        let rep = check_compiled(&c, &p, &input, None, limits());
        prop_assert!(rep.is_ok(), "{:?}", rep.err());
        let run = psam_run(&c.program, &input, limits()).unwrap();
        prop_assert_eq!(run.output(), Some(&r.output[..]));
        prop_assert!(check_clean(&run.trace));
    }
}
