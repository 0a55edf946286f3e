//! The `cyclic` command line. Everything prints to a caller-supplied writer
//! so runs can be compared byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bench::{self, env_seed, PramRow, PsamRow, RoutingRow};
use crate::circuit::{
    enumerate_assignments, evaluate, format_bits, parse_bits, parse_netlist, read_outputs, write_netlist, Circuit,
    CircuitBuilder, ENUMERATION_LIMIT,
};
use crate::gadgets::Bus;
use crate::pram::{check_compiled, compile_pram_to_psam, demos as pram_demos, pram_run, CompileOptions, PramLimits, StarOp};
use crate::psam::demos::{self as psam_demos, FoldConfig, FoldOp, Tree};
use crate::psam::synth::{required_capacity, synthesize, SynthOptions};
use crate::psam::{check_clean, psam_run, Limits, Outcome, Program, Run};
use crate::routing::{build_bifilter, build_bipermute, build_filter, build_partition, build_permute};

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct CliError(String);

fn fail<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError(msg.into()))
}

trait Context<T> {
    fn ctx(self, what: &str) -> Result<T, CliError>;
}

impl<T, E: std::fmt::Display> Context<T> for Result<T, E> {
    fn ctx(self, what: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError(format!("{what}: {e}")))
    }
}

#[derive(Parser, Debug)]
#[command(name = "cyclic", about = "Cyclic circuits, routing networks, PSAM and PRAM simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Net {
    Partition,
    Permute,
    Filter,
    Bipermute,
    Bifilter,
    Psam,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Suite {
    Routing,
    Psam,
    Pram,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a netlist.
    Build {
        #[arg(long, value_enum)]
        net: Net,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        w: usize,
        /// PSAM program, for `--net psam`.
        #[arg(long)]
        demo: Option<String>,
        /// Compute units, for `--net psam`.
        #[arg(long, default_value_t = 64)]
        capacity: usize,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a netlist on one input bit string.
    Eval {
        #[arg(long)]
        netlist: PathBuf,
        #[arg(long, default_value = "")]
        input: String,
        /// Also print the largest output delay.
        #[arg(long)]
        delay: bool,
    },
    /// Gate and wire counts.
    Stats {
        #[arg(long)]
        netlist: PathBuf,
    },
    /// Resolution over many inputs, plus brute-force legality when small.
    Check {
        #[arg(long)]
        netlist: PathBuf,
        /// Every input instead of a seeded sample.
        #[arg(long)]
        exhaustive: bool,
        #[arg(long, default_value_t = 64)]
        samples: usize,
    },
    /// Run a PSAM demo on the interpreter.
    RunPsam {
        #[arg(long)]
        demo: String,
        /// `key:value` lines, as a file path or inline (`;` separates).
        #[arg(long)]
        input: Option<String>,
        /// Tree depth for `spread`.
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Also synthesize and evaluate the circuit.
        #[arg(long)]
        circuit: bool,
    },
    /// Run a PRAM demo on the reference machine.
    RunPram {
        #[arg(long)]
        demo: String,
        #[arg(long)]
        input: Option<String>,
        #[arg(long, default_value_t = 8)]
        n: u64,
        #[arg(long, default_value = "add")]
        star: StarOp,
        /// Also compile to PSAM and compare.
        #[arg(long)]
        compiled: bool,
    },
    /// Run a demo end to end on every layer that fits.
    Demo {
        #[arg(long)]
        name: String,
        #[arg(long, default_value_t = 8)]
        n: u64,
        #[arg(long, default_value = "add")]
        star: StarOp,
        /// Largest circuit to synthesize, in compute units.
        #[arg(long, default_value_t = 256)]
        max_capacity: usize,
    },
    /// Scaling tables as CSV.
    Bench {
        #[arg(long, value_enum)]
        suite: Suite,
        /// Largest size: n for routing and pram, capacity for psam.
        #[arg(long)]
        max: Option<usize>,
        #[arg(long, default_value = "add")]
        star: StarOp,
    },
}

/// Parses `args` (without the program name) and runs the command.
pub fn run_args<W: Write>(args: &[&str], out: &mut W) -> Result<(), CliError> {
    let cli = Cli::try_parse_from(std::iter::once("cyclic").chain(args.iter().copied())).ctx("usage")?;
    run(cli, out)
}

pub fn run<W: Write>(cli: Cli, out: &mut W) -> Result<(), CliError> {
    let text = match cli.command {
        Command::Build {
            net,
            n,
            w,
            demo,
            capacity,
            out: path,
        } => {
            let c = build(net, n, w, demo.as_deref(), capacity)?;
            match path {
                Some(p) => {
                    let f = std::fs::File::create(&p).ctx(&p.display().to_string())?;
                    write_netlist(&c, std::io::BufWriter::new(f)).ctx("write")?;
                    format!("wrote {} ({} wires)\n", p.display(), c.len())
                }
                None => crate::circuit::netlist_string(&c),
            }
        }
        Command::Eval { netlist, input, delay } => eval(&load(&netlist)?, &input, delay)?,
        Command::Stats { netlist } => stats(&load(&netlist)?),
        Command::Check {
            netlist,
            exhaustive,
            samples,
        } => check(&load(&netlist)?, exhaustive, samples)?,
        Command::RunPsam { demo, input, n, circuit } => {
            let kv = parse_kv(input.as_deref().unwrap_or(""))?;
            run_psam(&demo, &kv, n, circuit)?
        }
        Command::RunPram {
            demo,
            input,
            n,
            star,
            compiled,
        } => {
            let kv = parse_kv(input.as_deref().unwrap_or(""))?;
            run_pram(&demo, &kv, n, star, compiled)?
        }
        Command::Demo {
            name,
            n,
            star,
            max_capacity,
        } => demo(&name, n, star, max_capacity)?,
        Command::Bench { suite, max, star } => bench_csv(suite, max, star),
    };
    out.write_all(text.as_bytes()).ctx("write")
}

fn load(path: &Path) -> Result<Circuit, CliError> {
    let f = std::fs::File::open(path).ctx(&path.display().to_string())?;
    parse_netlist(std::io::BufReader::new(f)).ctx(&path.display().to_string())
}

fn words(b: &mut CircuitBuilder, n: usize, w: usize) -> Vec<Bus> {
    (0..n).map(|_| (0..w).map(|_| b.input()).collect()).collect()
}

fn build(net: Net, n: usize, w: usize, demo: Option<&str>, capacity: usize) -> Result<Circuit, CliError> {
    if !matches!(net, Net::Psam) && (n < 2 || !n.is_power_of_two()) {
        return fail(format!("--n must be a power of two >= 2, got {n}"));
    }
    let log = n.trailing_zeros() as usize;
    let mut b = CircuitBuilder::new();
    let outs: Vec<Bus> = match net {
        Net::Partition => {
            let x = words(&mut b, n, w + 1);
            let (l, r) = build_partition(&mut b, &x, w + 1);
            l.into_iter().chain(r).collect()
        }
        Net::Permute => {
            let x = words(&mut b, n, log + w);
            build_permute(&mut b, &x, w)
        }
        Net::Filter => {
            let x = words(&mut b, n, 1 + w);
            build_filter(&mut b, &x, w)
        }
        Net::Bipermute => {
            let addr = words(&mut b, n, log);
            let tgt = words(&mut b, n, w);
            build_bipermute(&mut b, &addr, &tgt, w)
        }
        Net::Bifilter => {
            let src = words(&mut b, n, 1 + w);
            let tgt = words(&mut b, n / 2, w);
            let (s, t) = build_bifilter(&mut b, &src, &tgt, w, w);
            s.into_iter().chain(t).collect()
        }
        Net::Psam => {
            let Some(name) = demo else {
                return fail("--net psam needs --demo");
            };
            let p = psam_program(name, n)?;
            return Ok(synthesize(&p, &SynthOptions::new(capacity)).ctx("synthesize")?.circuit);
        }
    };
    for bus in outs {
        for wire in bus {
            b.output(wire);
        }
    }
    b.finalize().ctx("finalize")
}

fn eval(c: &Circuit, input: &str, delay: bool) -> Result<String, CliError> {
    let bits = parse_bits(input).ctx("input")?;
    let e = evaluate(c, &bits).ctx("evaluate")?;
    let mut s = match read_outputs(&e, c) {
        Ok(bits) => format!("{}\n", format_bits(&bits)),
        Err(u) => {
            let ids: Vec<String> = u.wires.iter().map(|w| w.0.to_string()).collect();
            format!("unresolved {}\n", ids.join(" "))
        }
    };
    if delay {
        match e.max_delay(c.outputs()) {
            Some(d) => writeln!(s, "delay={d}").unwrap(),
            None => writeln!(s, "delay=unresolved").unwrap(),
        }
    }
    Ok(s)
}

fn stats(c: &Circuit) -> String {
    format!(
        "gates={}\nwires={}\ninputs={}\noutputs={}\n",
        c.logic_gate_count(),
        c.len(),
        c.input_arity(),
        c.outputs().len()
    )
}

fn check(c: &Circuit, exhaustive: bool, samples: usize) -> Result<String, CliError> {
    let k = c.input_arity();
    let inputs: Vec<Vec<bool>> = if exhaustive {
        if k > 20 {
            return fail(format!("{k} inputs is too many for --exhaustive"));
        }
        (0u64..1 << k).map(|v| (0..k).map(|i| (v >> (k - 1 - i)) & 1 == 1).collect()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(env_seed(0));
        (0..samples).map(|_| (0..k).map(|_| rng.gen()).collect()).collect()
    };
    let brute = exhaustive && c.len() - k <= ENUMERATION_LIMIT;
    let (mut resolved, mut stuck, mut max_delay) = (0, 0, 0);
    let (mut legal, mut agree) = (true, true);
    for x in &inputs {
        let e = evaluate(c, x).ctx("evaluate")?;
        if e.is_complete() {
            resolved += 1;
            max_delay = max_delay.max(e.max_delay(c.outputs()).unwrap_or(0));
        } else {
            stuck += 1;
        }
        if brute {
            let all = enumerate_assignments(c, x, true).ctx("enumerate")?;
            legal &= all.count == 1;
            if e.is_complete() {
                let got: Vec<bool> = (0..c.len() as u32).map(|w| e.bit(crate::circuit::WireId(w)).unwrap()).collect();
                agree &= all.count == 1 && all.assignments[0] == got;
            }
        }
    }
    let mut s = format!(
        "inputs={}\nresolved={resolved}\nunresolved={stuck}\nmax_delay={max_delay}\n",
        inputs.len()
    );
    if brute {
        writeln!(s, "legal={legal}\nconstructive_agrees={agree}").unwrap();
    } else if exhaustive {
        writeln!(s, "legal=skipped ({} non-input wires)", c.len() - k).unwrap();
    }
    Ok(s)
}

/// `key:value` pairs, one per line or separated by `;`. A string naming an
/// existing file is read first.
pub fn parse_kv(spec: &str) -> Result<BTreeMap<String, Vec<u64>>, CliError> {
    let text = if !spec.is_empty() && Path::new(spec).is_file() {
        std::fs::read_to_string(spec).ctx(spec)?
    } else {
        spec.to_string()
    };
    let mut out = BTreeMap::new();
    for item in text.split(['\n', ';']).map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let Some((key, vals)) = item.split_once(':') else {
            return fail(format!("expected key:value, got {item:?}"));
        };
        let vals = vals
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(|v| v.parse::<u64>().ctx(&format!("{key} value {v:?}")))
            .collect::<Result<Vec<_>, _>>()?;
        out.insert(key.trim().to_string(), vals);
    }
    Ok(out)
}

pub const PSAM_DEMOS: [&str; 8] = [
    "sum",
    "max",
    "echo",
    "spread",
    "unclean",
    "double-read",
    "premature-token",
    "joined-token",
];

const FOLD: FoldConfig = FoldConfig { addr_bits: 10 };

fn psam_program(name: &str, n: usize) -> Result<Program, CliError> {
    Ok(match name {
        "sum" => psam_demos::fold_program(FOLD, FoldOp::Sum),
        "max" => psam_demos::fold_program(FOLD, FoldOp::Max),
        "echo" => psam_demos::echo_program(),
        "spread" => psam_demos::spread_program(n as u32, bench::SPREAD_W),
        "unclean" => psam_demos::unclean_program(),
        "double-read" => psam_demos::double_read_program(),
        "premature-token" => psam_demos::premature_token_program(),
        "joined-token" => psam_demos::joined_token_program(),
        _ => return fail(format!("unknown PSAM demo {name:?} (one of {})", PSAM_DEMOS.join(", "))),
    })
}

fn psam_tape(name: &str, kv: &BTreeMap<String, Vec<u64>>) -> Vec<u64> {
    if let Some(t) = kv.get("tape") {
        return t.clone();
    }
    match (name, kv.get("leaves")) {
        ("sum" | "max", Some(leaves)) => FOLD.tape(&Tree::balanced(leaves)),
        ("sum" | "max", None) => FOLD.tape(&Tree::Empty),
        _ => Vec::new(),
    }
}

fn join(v: &[u64]) -> String {
    v.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
}

fn describe_psam(run: &Run, s: &mut String) {
    match &run.outcome {
        Outcome::Halted(o) => writeln!(s, "{}", join(o)).unwrap(),
        Outcome::Crashed(c) => writeln!(s, "crash: {c}").unwrap(),
    }
    writeln!(s, "work={}\ntime={}", run.trace.work, run.trace.time).unwrap();
    if run.output().is_some() {
        writeln!(s, "clean={}", check_clean(&run.trace)).unwrap();
    }
}

fn circuit_leg(p: &Program, run: &Run, tape: &[u64], max_capacity: usize, s: &mut String) -> Result<(), CliError> {
    let cap = required_capacity(run, tape.len());
    if cap > max_capacity {
        writeln!(s, "circuit: skipped (needs capacity {cap} > {max_capacity})").unwrap();
        return Ok(());
    }
    let pc = synthesize(p, &SynthOptions::new(cap)).ctx("synthesize")?;
    let r = pc.run(tape).ctx("circuit")?;
    writeln!(s, "circuit_capacity={cap}\ncircuit_gates={}", pc.circuit.logic_gate_count()).unwrap();
    match &r.output {
        Some(o) => {
            let want = run.output().unwrap_or(&[]);
            let n = want.len().min(o.len());
            writeln!(s, "circuit_output={}", join(&o[..n])).unwrap();
        }
        None => writeln!(s, "circuit_output=unresolved").unwrap(),
    }
    writeln!(
        s,
        "circuit_delay={}\nstuck_wires={}",
        r.delay.map_or("unresolved".into(), |d| d.to_string()),
        r.report.total()
    )
    .unwrap();
    Ok(())
}

fn run_psam(name: &str, kv: &BTreeMap<String, Vec<u64>>, n: usize, circuit: bool) -> Result<String, CliError> {
    let p = psam_program(name, n)?;
    let tape = psam_tape(name, kv);
    let run = psam_run(&p, &tape, Limits::default()).ctx("run")?;
    let mut s = String::new();
    describe_psam(&run, &mut s);
    if circuit {
        circuit_leg(&p, &run, &tape, 1 << 12, &mut s)?;
    }
    Ok(s)
}

fn pram_program(name: &str, n: u64) -> Result<crate::pram::PramProgram, CliError> {
    if name == "parallel-increment" && (n < 1 || !n.is_power_of_two()) {
        return fail(format!("--n must be a power of two, got {n}"));
    }
    pram_demos::by_name(name, n)
        .map_or_else(|| fail(format!("unknown PRAM demo {name:?} (one of {})", pram_demos::NAMES.join(", "))), Ok)
}

fn pram_tape(name: &str, kv: &BTreeMap<String, Vec<u64>>, n: u64) -> Vec<u64> {
    match kv.get("tape") {
        Some(t) => t.clone(),
        None if name == "parallel-increment" => {
            bench::increment_input(n, &mut ChaCha8Rng::seed_from_u64(env_seed(0)))
        }
        None => Vec::new(),
    }
}

fn run_pram(
    name: &str,
    kv: &BTreeMap<String, Vec<u64>>,
    n: u64,
    star: StarOp,
    compiled: bool,
) -> Result<String, CliError> {
    let p = pram_program(name, n)?;
    let tape = pram_tape(name, kv, n);
    let r = pram_run(&p, &tape, star, PramLimits::default()).ctx("run")?;
    let mut s = format!(
        "{}\nW={}\nT={}\nmax_procs={}\npid_bits={}\n",
        join(&r.output),
        r.stats.work,
        r.stats.time,
        r.stats.max_procs,
        r.stats.pid_bits
    );
    if compiled {
        let c = compile(&p, star, r.stats.pid_bits)?;
        let run = psam_run(&c.program, &tape, bench::wide_limits()).ctx("compiled run")?;
        describe_psam(&run, &mut s);
        writeln!(s, "match={}", run.output() == Some(&r.output[..])).unwrap();
    }
    Ok(s)
}

fn compile(p: &crate::pram::PramProgram, star: StarOp, pid_bits: u32) -> Result<crate::pram::CompiledPram, CliError> {
    let opts = CompileOptions {
        pid_bits: pid_bits.max(1),
        psam_addr_bits: 24,
    };
    compile_pram_to_psam(p, star, opts).ctx("compile")
}

fn demo(name: &str, n: u64, star: StarOp, max_capacity: usize) -> Result<String, CliError> {
    if PSAM_DEMOS.contains(&name) {
        let p = psam_program(name, n as usize)?;
        let tape = match name {
            "sum" | "max" => {
                let mut rng = ChaCha8Rng::seed_from_u64(env_seed(0));
                FOLD.tape(&Tree::random(&mut rng, n as usize, 1000))
            }
            "echo" => vec![7],
            _ => Vec::new(),
        };
        let run = psam_run(&p, &tape, Limits::default()).ctx("run")?;
        let mut s = format!("demo={name}\ntape={}\n", join(&tape));
        describe_psam(&run, &mut s);
        circuit_leg(&p, &run, &tape, max_capacity, &mut s)?;
        return Ok(s);
    }
    let p = pram_program(name, n)?;
    let tape = pram_tape(name, &BTreeMap::new(), n);
    let r = pram_run(&p, &tape, star, PramLimits::default()).ctx("reference run")?;
    let mut s = format!(
        "demo={name}\nstar={}\ntape={}\npram_output={}\nW={}\nT={}\n",
        star.name(),
        join(&tape),
        join(&r.output),
        r.stats.work,
        r.stats.time
    );
    let c = compile(&p, star, r.stats.pid_bits)?;
    let run = psam_run(&c.program, &tape, bench::wide_limits()).ctx("compiled run")?;
    writeln!(
        s,
        "psam_output={}\npsam_work={}\npsam_time={}\npsam_instrs={}",
        run.output().map_or("crash".into(), join),
        run.trace.work,
        run.trace.time,
        c.program.instrs.len()
    )
    .unwrap();
    let report = check_compiled(&c, &p, &tape, None, bench::wide_limits()).ctx("invariant check")?;
    writeln!(
        s,
        "invariant_steps={}\ntape_reorders={}",
        report.steps.len(),
        report.tape_reorders
    )
    .unwrap();
    circuit_leg(&c.program, &run, &tape, max_capacity, &mut s)?;
    Ok(s)
}

fn doublings(lo: usize, hi: usize) -> Vec<usize> {
    std::iter::successors(Some(lo), |&n| Some(n * 2)).take_while(|&n| n <= hi).collect()
}

fn bench_csv(suite: Suite, max: Option<usize>, star: StarOp) -> String {
    let seed = env_seed(0);
    let mut s = String::new();
    match suite {
        Suite::Routing => {
            s.push_str(RoutingRow::HEADER);
            s.push('\n');
            for r in bench::routing_suite(&doublings(8, max.unwrap_or(1024)), 8, seed) {
                writeln!(s, "{}", r.csv()).unwrap();
            }
        }
        Suite::Psam => {
            s.push_str(PsamRow::HEADER);
            s.push('\n');
            for cap in doublings(64, max.unwrap_or(2048)) {
                writeln!(s, "{}", bench::psam_row(cap).csv()).unwrap();
            }
        }
        Suite::Pram => {
            s.push_str(PramRow::HEADER);
            s.push('\n');
            let ns: Vec<u64> = doublings(16, max.unwrap_or(256)).into_iter().map(|n| n as u64).collect();
            for r in bench::pram_suite(&ns, star, seed) {
                writeln!(s, "{}", r.csv()).unwrap();
            }
        }
    }
    s
}
