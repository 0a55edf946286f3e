use cyclic_core::psam::asm::Asm;
use cyclic_core::psam::demos::*;
use cyclic_core::psam::isa::*;
use cyclic_core::psam::vm::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cfg() -> FoldConfig {
    FoldConfig { addr_bits: 10 }
}

fn run_fold(tree: &Tree, op: FoldOp) -> Run {
    let c = cfg();
    psam_run(&fold_program(c, op), &c.tape(tree), Limits::default()).unwrap()
}

#[test]
fn sum_two_leaves() {
    let run = run_fold(&Tree::balanced(&[3, 5]), FoldOp::Sum);
    assert_eq!(run.output(), Some(&[8][..]));
    assert!(check_clean(&run.trace));
}

#[test]
fn sum_empty_tree() {
    let run = run_fold(&Tree::Empty, FoldOp::Sum);
    assert_eq!(run.output(), Some(&[0][..]));
    assert!(check_clean(&run.trace));
}

#[test]
fn sum_balanced_sizes() {
    for n in [1usize, 2, 4, 8, 13] {
        let leaves: Vec<u64> = (1..=n as u64).map(|v| v * 7 % 23).collect();
        let tree = Tree::balanced(&leaves);
        let run = run_fold(&tree, FoldOp::Sum);
        assert_eq!(run.output(), Some(&[leaves.iter().sum::<u64>()][..]), "n = {n}");
        assert!(check_clean(&run.trace));
        assert_eq!(run.trace.tape_divergences, 0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]
    #[test]
    fn fold_matches_oracle(seed in any::<u64>(), leaves in 0usize..24, max in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = Tree::random(&mut rng, leaves, 1000);
        let op = if max { FoldOp::Max } else { FoldOp::Sum };
        let run = run_fold(&tree, op);
        prop_assert_eq!(run.output(), Some(&[tree.fold(op)][..]));
        prop_assert!(check_clean(&run.trace));
        let work: u64 = run.trace.active.iter().map(|&a| a as u64).sum();
        prop_assert_eq!(work, run.trace.work);
        prop_assert_eq!(run.trace.active.len() as u64, run.trace.time);
    }
}

#[test]
fn fold_runs_in_parallel() {
    let leaves: Vec<u64> = (0..16).collect();
    let run = run_fold(&Tree::balanced(&leaves), FoldOp::Sum);
    assert!(run.trace.active.iter().any(|&a| a >= 8));
}

#[test]
fn double_read_crashes() {
    let run = psam_run(&double_read_program(), &[], Limits::default()).unwrap();
    assert!(matches!(run.outcome, Outcome::Crashed(Crash::DoubleRead { addr: 0, .. })));
}

#[test]
fn premature_token_crashes() {
    let run = psam_run(&premature_token_program(), &[], Limits::default()).unwrap();
    assert!(matches!(run.outcome, Outcome::Crashed(Crash::PrematureDeref { .. })));
    let run = psam_run(&joined_token_program(), &[], Limits::default()).unwrap();
    assert_eq!(run.output(), Some(&[6][..]));
}

#[test]
fn read_of_fresh_address_crashes() {
    let mut a = Asm::new(3, 16, 8);
    a.update(vec![(1, k(3))]);
    a.read(1, 2);
    a.ret(2);
    let p = a.finish().unwrap();
    let run = psam_run(&p, &[], Limits::default()).unwrap();
    assert!(matches!(run.outcome, Outcome::Crashed(Crash::ReadFresh { addr: 3, .. })));
}

#[test]
fn invalid_pc_crashes() {
    let mut a = Asm::new(2, 8, 4);
    a.update(vec![(PC, k(9))]);
    let p = a.finish().unwrap();
    let run = psam_run(&p, &[], Limits::default()).unwrap();
    assert_eq!(run.outcome, Outcome::Crashed(Crash::InvalidPc { pc: 9, step: 1 }));
}

#[test]
fn limits_are_reported() {
    let mut a = Asm::new(2, 8, 4);
    a.label("spin");
    a.jump("spin");
    let p = a.finish().unwrap();
    let limits = Limits {
        max_time: 100,
        ..Limits::default()
    };
    assert_eq!(psam_run(&p, &[], limits), Err(PsamError::TimeLimit(100)));
}

#[test]
fn clean_audit() {
    let run = psam_run(&unclean_program(), &[9], Limits::default()).unwrap();
    assert_eq!(run.output(), Some(&[9][..]));
    assert!(!check_clean(&run.trace));
    let run = psam_run(&echo_program(), &[9], Limits::default()).unwrap();
    assert!(check_clean(&run.trace));
    let mut a = Asm::new(2, 8, 4);
    a.output(1);
    a.ret(1);
    let run = psam_run(&a.finish().unwrap(), &[], Limits::default()).unwrap();
    assert!(check_clean(&run.trace));
}

#[test]
fn older_process_pops_tape_first() {
    let mut a = Asm::new(3, 16, 8);
    a.fork(vec![], "child", 2);
    a.input(1);
    a.output(1);
    a.nops(2);
    a.update(vec![(1, reg(2))]);
    a.output(1);
    a.ret(1);
    a.label("child");
    a.input(1);
    a.ret(1);
    let p = a.finish().unwrap();
    let run = psam_run(&p, &[10, 20], Limits::default()).unwrap();
    assert_eq!(run.output(), Some(&[10, 20][..]));
}

#[test]
fn fork_step_and_ret_visibility() {
    let mut a = Asm::new(3, 16, 8);
    a.fork(vec![(1, k(7))], "child", 2);
    a.nop();
    a.update(vec![(1, reg(2))]);
    a.output(1);
    a.ret(1);
    a.label("child");
    a.ret(1);
    let p = a.finish().unwrap();
    let mut m = Machine::new(&p, &[], Limits::default()).unwrap();
    m.step().unwrap();
    assert_eq!(m.processes().len(), 2);
    assert_eq!(m.processes()[1].regs[1].value(), Some(7));
    assert_eq!(m.processes()[0].regs[2].value(), None);
    // Child returns at step 1; the parent forces at step 2.
    let run = m.run().unwrap();
    assert_eq!(run.output(), Some(&[7][..]));
}

#[test]
fn ret_value_not_visible_same_step() {
    let mut a = Asm::new(3, 16, 8);
    a.fork(vec![(1, k(7))], "child", 2);
    a.update(vec![(1, add(reg(2), k(0)))]);
    a.ret(1);
    a.label("child");
    a.ret(1);
    let run = psam_run(&a.finish().unwrap(), &[], Limits::default()).unwrap();
    assert!(matches!(run.outcome, Outcome::Crashed(Crash::PrematureDeref { step: 1, .. })));
}

#[test]
fn register_copy_keeps_token_lazy() {
    let mut a = Asm::new(3, 16, 8);
    a.fork(vec![(1, k(7))], "child", 2);
    a.update(vec![(1, reg(2))]);
    a.ret(1);
    a.label("child");
    a.ret(1);
    let run = psam_run(&a.finish().unwrap(), &[], Limits::default()).unwrap();
    assert_eq!(run.output(), Some(&[][..]));
}

#[test]
fn tokens_survive_packing_and_memory() {
    // Store a pending token in memory, read it back later, then use it.
    let mut a = Asm::new(4, 16, 8);
    a.fork(vec![(1, k(0x2a))], "child", 2);
    a.update(vec![(3, concat(vec![(k(1), 4), (field(reg(2), 0, 8), 8)]))]);
    a.write(3, 1);
    a.read(1, 3);
    a.update(vec![(3, add(reg(3), k(1)))]);
    a.output(3);
    a.ret(3);
    a.label("child");
    a.ret(1);
    let run = psam_run(&a.finish().unwrap(), &[], Limits::default()).unwrap();
    assert_eq!(run.output(), Some(&[0x12b][..]));
}

fn proc(age: u32, lineage: Vec<u32>) -> Process {
    Process {
        regs: Vec::new(),
        age,
        lineage,
        ret_to: None,
    }
}

#[test]
fn priority_order() {
    use std::cmp::Ordering::*;
    assert_eq!(priority_compare(&proc(5, vec![]), &proc(1, vec![3])), Less);
    assert_eq!(priority_compare(&proc(2, vec![7]), &proc(2, vec![3])), Less);
    assert_eq!(priority_compare(&proc(2, vec![3, 1]), &proc(2, vec![3, 4])), Greater);
    let p = proc(4, vec![2, 9]);
    assert_eq!(priority_compare(&p, &p), Equal);
}

#[test]
fn runs_are_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let tree = Tree::random(&mut rng, 12, 50);
    let a = run_fold(&tree, FoldOp::Max);
    let b = run_fold(&tree, FoldOp::Max);
    assert_eq!(a, b);
    assert_eq!(a.trace.render(), b.trace.render());
}

#[test]
fn trace_render_format() {
    let run = psam_run(&echo_program(), &[4], Limits::default()).unwrap();
    let text = run.trace.render();
    assert!(text.starts_with("step=0 active=1 work_total=1\n"));
    assert!(text.contains("addr=0 written_at=1 read_at=2"));
}
