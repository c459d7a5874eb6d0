//! `rankopt`: PageRank optimization under switchable links, as a batch tool.
//!
//! Every subcommand prints one JSON report on stdout (diagnostics go to
//! stderr) and is deterministic for fixed inputs and seed, timing fields
//! aside. Exit codes: 0 success, 1 usage, 2 input validation, 3 numeric
//! failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use rankopt::chain::{
    google_matrix, pagerank_direct, pagerank_power, transition_matrix, Personalization,
};
use rankopt::graph::{Configuration, DanglingRule, DiGraph};
use rankopt::hardness::{gadget_from_3sat, verify_separation, Cnf3};
use rankopt::lp::{build_damped_lp, build_generic_ssp_lp, build_max_pagerank_lp, emit_lp};
use rankopt::oracle::{brute_force, brute_force_constrained, BruteForceOpts, ConstraintSet};
use rankopt::pri::{min_pagerank_iteration, pagerank_iteration, PriResult};
use rankopt::reduction::reduce_max_pagerank;
use rankopt::ssp::{build_refined_ssp, policy_iteration, value_iteration, SspModel};
use rankopt::Error;

#[derive(Parser)]
#[command(
    name = "rankopt",
    version,
    about = "Exact max/min PageRank of a node under switchable (fragile) links"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DanglingArg {
    /// Give dangling nodes a fixed self-loop.
    SelfLoop,
    /// Link dangling nodes to every node.
    Uniform,
    /// Treat dangling nodes as an input error.
    Error,
}

impl From<DanglingArg> for DanglingRule {
    fn from(arg: DanglingArg) -> Self {
        match arg {
            DanglingArg::SelfLoop => DanglingRule::SelfLoop,
            DanglingArg::Uniform => DanglingRule::UniformToAll,
            DanglingArg::Error => DanglingRule::Reject,
        }
    }
}

#[derive(Args)]
struct GraphArgs {
    /// Edge-list file: `<n>` header, then `<src> <dst> <fixed|fragile> [mult]`.
    #[arg(long)]
    graph: PathBuf,
    /// Damping constant; omit for the undamped problem where supported.
    #[arg(long)]
    damping: Option<f64>,
    /// Personalization: `uniform` or a file with one positive weight per
    /// line (normalized). Only meaningful together with damping.
    #[arg(long, default_value = "uniform")]
    personalization: String,
    /// Dangling-node repair rule.
    #[arg(long, value_enum, default_value_t = DanglingArg::Error)]
    dangling: DanglingArg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LpVariant {
    Generic,
    Undamped,
    Damped,
}

#[derive(Subcommand)]
enum Command {
    /// PageRank vector of the graph with all stored edges present.
    Pagerank {
        #[command(flatten)]
        graph: GraphArgs,
        /// Also report this node's value.
        #[arg(long)]
        node: Option<usize>,
        /// Use the power method instead of the direct solve.
        #[arg(long)]
        power: bool,
    },
    /// Maximum PageRank of a node over all fragile-link configurations.
    Maximize {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        node: usize,
        /// Dump the per-iteration trace as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Solve via the generic refined-SSP path even when the greedy
        /// iteration applies.
        #[arg(long)]
        force_ssp: bool,
    },
    /// Minimum PageRank of a node over all fragile-link configurations.
    Minimize {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        node: usize,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        force_ssp: bool,
    },
    /// Exhaustive evaluation of every configuration.
    BruteForce {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        node: usize,
        /// Exclusion constraints file: one pair of fragile ids per line.
        #[arg(long)]
        constraints: Option<PathBuf>,
        /// Worker threads (deterministic merge).
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Refuse more fragile links than this.
        #[arg(long, default_value_t = 20)]
        cap: usize,
        /// Write the full `config_bits,pagerank` table as CSV.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Reduce the refined model to one state per fragile link plus target.
    Reduce {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        node: usize,
        /// Write the reduced model as JSON.
        #[arg(long)]
        emit_ssp: Option<PathBuf>,
    },
    /// Dump the refined SSP model as JSON.
    EmitSsp {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        node: usize,
        /// Write the model here instead of embedding it in the report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit a linear program in LP text format.
    EmitLp {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        node: usize,
        #[arg(long, value_enum)]
        variant: LpVariant,
        /// Write the program here instead of embedding it in the report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded random-walk estimate of a node's PageRank.
    Simulate {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        node: usize,
        #[arg(long, default_value_t = 1_000_000)]
        steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build the 3SAT hardness gadget and optionally verify the 77/99
    /// return-time separation.
    Gadget {
        /// DIMACS CNF file with three literals per clause.
        #[arg(long)]
        cnf: PathBuf,
        /// Write the gadget graph as an edge list.
        #[arg(long)]
        emit_graph: Option<PathBuf>,
        /// Write the exclusion constraints, one pair per line.
        #[arg(long)]
        emit_constraints: Option<PathBuf>,
        /// Run the constrained brute force and classify the optimum.
        #[arg(long)]
        verify: bool,
        #[arg(long, default_value_t = 24)]
        cap: usize,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

#[derive(Serialize)]
struct RunReport {
    command: String,
    input_digest: String,
    parameters: Value,
    result: Value,
    version: &'static str,
    wall_time_ms: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not usage errors.
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let started = Instant::now();
    match run(cli.command, started) {
        Ok(report) => {
            println!("{}", serde_json::to_string_pretty(&report).expect("report is plain data"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numeric(_) | Error::NonConvergence { .. } | Error::ImproperStructure(_) => 3,
        _ => 2,
    }
}

fn read_file(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, content: &str) -> Result<(), Error> {
    std::fs::write(path, content)
        .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display())))
}

fn digest(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let mut out = String::with_capacity(64);
    for byte in hasher.finalize() {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

struct Instance {
    graph: DiGraph,
    rule: DanglingRule,
    pers: Option<Personalization>,
    digest: String,
    parameters: Value,
}

fn load_instance(args: &GraphArgs) -> Result<Instance, Error> {
    let text = read_file(&args.graph)?;
    let graph = DiGraph::load(&text)?;
    let pers = match args.damping {
        Some(c) => Some(personalization(
            &args.personalization,
            graph.node_count(),
            c,
        )?),
        None => None,
    };
    let parameters = json!({
        "damping": args.damping,
        "personalization": if args.damping.is_some() { Some(args.personalization.as_str()) } else { None },
        "dangling": match args.dangling {
            DanglingArg::SelfLoop => "self-loop",
            DanglingArg::Uniform => "uniform",
            DanglingArg::Error => "error",
        },
    });
    Ok(Instance {
        graph,
        rule: args.dangling.into(),
        pers,
        digest: digest(&text),
        parameters,
    })
}

fn personalization(spec: &str, n: usize, c: f64) -> Result<Personalization, Error> {
    if spec == "uniform" {
        return Personalization::uniform(n, c);
    }
    let text = read_file(Path::new(spec))?;
    let mut weights = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let w: f64 = line.parse().map_err(|_| Error::Parse {
            line: idx + 1,
            msg: format!("invalid personalization weight {line:?}"),
        })?;
        weights.push(w);
    }
    if weights.len() != n {
        return Err(Error::BadPersonalization(format!(
            "{} weights for a {n}-node graph",
            weights.len()
        )));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::BadPersonalization("weights must sum positive".into()));
    }
    Personalization::new(weights.into_iter().map(|w| w / total).collect(), c)
}

/// Solve the refined model by policy iteration from the all-on policy,
/// falling back to value iteration when that policy is improper.
fn solve_refined(model: &SspModel) -> Result<rankopt::ssp::Solution, Error> {
    let full = model.policy_for_configuration(&Configuration::full(model.fragile_count()))?;
    match policy_iteration(model, &full) {
        Ok(sol) => Ok(sol),
        Err(Error::ImproperPolicy { .. }) => value_iteration(model, 1e-12),
        Err(e) => Err(e),
    }
}

fn write_trace(path: &Path, res: &PriResult) -> Result<(), Error> {
    let mut out = String::new();
    for it in &res.trace.iterations {
        let _ = writeln!(
            out,
            "{}",
            serde_json::to_string(it).expect("trace rows are plain data")
        );
    }
    write_file(path, &out)
}

fn optimum_report(
    pagerank: f64,
    cfg: &Configuration,
    iterations: usize,
    method: &str,
) -> Value {
    json!({
        "pagerank": pagerank,
        "configuration": cfg.active_ids(),
        "iterations": iterations,
        "method": method,
        "return_time": if pagerank > 0.0 { Some(1.0 / pagerank) } else { None },
    })
}

fn run(cmd: Command, started: Instant) -> Result<RunReport, Error> {
    let (name, input_digest, parameters, result) = match cmd {
        Command::Pagerank { graph, node, power } => {
            let inst = load_instance(&graph)?;
            let g = inst.graph.handle_dangling(inst.rule)?;
            let pers = match inst.pers {
                Some(p) => p,
                None => Personalization::uniform(g.node_count(), 0.15)?,
            };
            let p = transition_matrix(&g)?;
            let (values, iterations, method) = if power {
                let gm = google_matrix(&p, &pers)?;
                let pr = pagerank_power(&gm, 1e-12, 1_000_000)?;
                (pr.values().to_vec(), pr.iterations, "power")
            } else {
                let pr = pagerank_direct(&p, &pers)?;
                (pr.values().to_vec(), 0, "direct")
            };
            if let Some(v) = node {
                if v >= g.node_count() {
                    return Err(Error::NodeOutOfRange {
                        node: v,
                        n: g.node_count(),
                    });
                }
            }
            let result = json!({
                "pagerank": values,
                "node": node,
                "node_pagerank": node.map(|v| values[v]),
                "iterations": iterations,
                "method": method,
                "damping": pers.damping(),
            });
            ("pagerank", inst.digest, inst.parameters, result)
        }
        Command::Maximize {
            graph,
            node,
            trace,
            force_ssp,
        } => {
            let inst = load_instance(&graph)?;
            let repaired = inst.graph.handle_dangling(inst.rule)?;
            let result = match &inst.pers {
                None if !force_ssp && repaired.fragile_nodes().is_empty() => {
                    let res = pagerank_iteration(&inst.graph, node, inst.rule)?;
                    if let Some(path) = &trace {
                        write_trace(path, &res)?;
                    }
                    optimum_report(
                        res.pagerank,
                        &res.configuration,
                        res.trace.iterations.len(),
                        "pagerank-iteration",
                    )
                }
                pers => {
                    let model = build_refined_ssp(&inst.graph, node, inst.rule, pers.as_ref())?;
                    let sol = solve_refined(&model)?;
                    let cfg = model.configuration_for_policy(&sol.policy)?;
                    optimum_report(
                        model.pagerank_value(&sol.values)?,
                        &cfg,
                        sol.iterations,
                        if pers.is_some() {
                            "policy-iteration-damped"
                        } else {
                            "policy-iteration-refined"
                        },
                    )
                }
            };
            ("maximize", inst.digest, inst.parameters, result)
        }
        Command::Minimize {
            graph,
            node,
            trace,
            force_ssp,
        } => {
            let inst = load_instance(&graph)?;
            let repaired = inst.graph.handle_dangling(inst.rule)?;
            let result = match &inst.pers {
                None => {
                    if force_ssp || !repaired.fragile_nodes().is_empty() {
                        return Err(Error::InvalidInput(
                            "undamped minimization runs through the greedy iteration only; \
                             instances with fragile nodes need --damping"
                                .into(),
                        ));
                    }
                    let res = min_pagerank_iteration(&inst.graph, node, inst.rule)?;
                    if let Some(path) = &trace {
                        write_trace(path, &res)?;
                    }
                    optimum_report(
                        res.pagerank,
                        &res.configuration,
                        res.trace.iterations.len(),
                        "min-pagerank-iteration",
                    )
                }
                Some(_) => {
                    let model =
                        build_refined_ssp(&inst.graph, node, inst.rule, inst.pers.as_ref())?;
                    let negated = model.negate_costs();
                    let sol = solve_refined(&negated)?;
                    let cfg = negated.configuration_for_policy(&sol.policy)?;
                    optimum_report(
                        negated.pagerank_value(&sol.values)?,
                        &cfg,
                        sol.iterations,
                        "policy-iteration-damped-negated",
                    )
                }
            };
            ("minimize", inst.digest, inst.parameters, result)
        }
        Command::BruteForce {
            graph,
            node,
            constraints,
            jobs,
            cap,
            table,
        } => {
            let inst = load_instance(&graph)?;
            let opts = BruteForceOpts { cap, jobs };
            let result = match constraints {
                Some(path) => {
                    let cs = ConstraintSet::from_text(
                        &read_file(&path)?,
                        inst.graph.fragile_count(),
                    )?;
                    let res = brute_force_constrained(
                        &inst.graph,
                        node,
                        &cs,
                        inst.pers.as_ref(),
                        inst.rule,
                        &opts,
                    )?;
                    json!({
                        "pagerank": res.best_pagerank,
                        "configuration": res.best.active_ids(),
                        "feasible": res.feasible,
                        "constraints": cs.len(),
                        "method": "brute-force-constrained",
                    })
                }
                None => {
                    let res =
                        brute_force(&inst.graph, node, inst.pers.as_ref(), inst.rule, &opts)?;
                    if let Some(path) = &table {
                        let mut csv = String::from("config_bits,pagerank\n");
                        for e in &res.table {
                            let _ = writeln!(csv, "{},{}", e.mask, e.pagerank);
                        }
                        write_file(path, &csv)?;
                    }
                    json!({
                        "pagerank": res.best_pagerank,
                        "configuration": res.best.active_ids(),
                        "evaluated": res.table.len(),
                        "method": "brute-force",
                    })
                }
            };
            ("brute-force", inst.digest, inst.parameters, result)
        }
        Command::Reduce {
            graph,
            node,
            emit_ssp,
        } => {
            let inst = load_instance(&graph)?;
            let red = reduce_max_pagerank(&inst.graph, node, inst.rule, inst.pers.as_ref())?;
            if let Some(path) = &emit_ssp {
                write_file(
                    path,
                    &serde_json::to_string_pretty(&red.model).expect("model is plain data"),
                )?;
            }
            let (rt, cfg, sol) = red.solve_optimal()?;
            let result = json!({
                "states": red.model.n_states(),
                "eliminated": red.non_decision_states.len(),
                "pagerank": 1.0 / rt,
                "return_time": rt,
                "configuration": cfg.active_ids(),
                "iterations": sol.iterations,
                "emitted": emit_ssp.as_ref().map(|p| p.display().to_string()),
            });
            ("reduce", inst.digest, inst.parameters, result)
        }
        Command::EmitSsp { graph, node, out } => {
            let inst = load_instance(&graph)?;
            let model = build_refined_ssp(&inst.graph, node, inst.rule, inst.pers.as_ref())?;
            let rendered = serde_json::to_value(&model).expect("model is plain data");
            let result = match &out {
                Some(path) => {
                    write_file(
                        path,
                        &serde_json::to_string_pretty(&model).expect("model is plain data"),
                    )?;
                    json!({
                        "states": model.n_states(),
                        "max_actions": model.max_actions(),
                        "written": path.display().to_string(),
                    })
                }
                None => json!({
                    "states": model.n_states(),
                    "max_actions": model.max_actions(),
                    "model": rendered,
                }),
            };
            ("emit-ssp", inst.digest, inst.parameters, result)
        }
        Command::EmitLp {
            graph,
            node,
            variant,
            out,
        } => {
            let inst = load_instance(&graph)?;
            let (lp, variant_name) = match variant {
                LpVariant::Generic => {
                    let model =
                        build_refined_ssp(&inst.graph, node, inst.rule, inst.pers.as_ref())?;
                    (build_generic_ssp_lp(&model), "generic")
                }
                LpVariant::Undamped => {
                    let g = inst.graph.handle_dangling(inst.rule)?;
                    (build_max_pagerank_lp(&g, node)?, "undamped")
                }
                LpVariant::Damped => {
                    let pers = inst.pers.clone().ok_or_else(|| {
                        Error::InvalidInput("the damped LP needs --damping".into())
                    })?;
                    let g = inst.graph.handle_dangling(inst.rule)?;
                    (build_damped_lp(&g, node, &pers)?, "damped")
                }
            };
            let text = emit_lp(&lp);
            let result = match &out {
                Some(path) => {
                    write_file(path, &text)?;
                    json!({
                        "variant": variant_name,
                        "variables": lp.free_count(),
                        "constraints": lp.constraints.len(),
                        "written": path.display().to_string(),
                    })
                }
                None => json!({
                    "variant": variant_name,
                    "variables": lp.free_count(),
                    "constraints": lp.constraints.len(),
                    "text": text,
                }),
            };
            ("emit-lp", inst.digest, inst.parameters, result)
        }
        Command::Simulate {
            graph,
            node,
            steps,
            seed,
        } => {
            let inst = load_instance(&graph)?;
            let full = inst
                .graph
                .apply_configuration(&Configuration::full(inst.graph.fragile_count()))?
                .handle_dangling(inst.rule)?;
            let est = rankopt::oracle::simulate_walk(&full, node, inst.pers.as_ref(), steps, seed)?;
            let result = serde_json::to_value(&est).expect("estimate is plain data");
            ("simulate", inst.digest, inst.parameters, result)
        }
        Command::Gadget {
            cnf,
            emit_graph,
            emit_constraints,
            verify,
            cap,
            jobs,
        } => {
            let text = read_file(&cnf)?;
            let formula = Cnf3::parse_dimacs(&text)?;
            let inst = gadget_from_3sat(&formula)?;
            if let Some(path) = &emit_graph {
                write_file(path, &inst.graph.emit())?;
            }
            if let Some(path) = &emit_constraints {
                let mut out = String::new();
                for (a, b) in inst.constraints.pairs() {
                    let _ = writeln!(out, "{a} {b}");
                }
                write_file(path, &out)?;
            }
            let verification = if verify {
                let report = verify_separation(&inst, &BruteForceOpts { cap, jobs })?;
                let sat = formula.satisfying_assignment()?;
                Some(json!({
                    "best_return_time": report.best_return_time,
                    "best_pagerank": report.best_pagerank,
                    "verdict": report.verdict,
                    "feasible": report.feasible,
                    "witness": report.satisfiable_witness.as_ref().map(Configuration::active_ids),
                    "truth_table_satisfiable": sat.is_some(),
                }))
            } else {
                None
            };
            let parameters = json!({
                "clauses": formula.clause_count(),
                "variables": formula.num_vars(),
                "damping": inst.personalization.damping(),
                "threshold": inst.threshold,
            });
            let result = json!({
                "nodes": inst.graph.node_count(),
                "fragile": inst.graph.fragile_count(),
                "constraints": inst.constraints.len(),
                "target": inst.target,
                "emitted_graph": emit_graph.as_ref().map(|p| p.display().to_string()),
                "emitted_constraints": emit_constraints.as_ref().map(|p| p.display().to_string()),
                "verification": verification,
            });
            ("gadget", digest(&text), parameters, result)
        }
    };
    Ok(RunReport {
        command: name.to_string(),
        input_digest,
        parameters,
        result,
        version: env!("CARGO_PKG_VERSION"),
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}
