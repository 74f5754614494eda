use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use nandwalk::certificates::{self, norm_bound_balanced, norm_bound_general};
use nandwalk::qpe::{self, log_log_slope};
use nandwalk::tree::{attach_tail_capped, restrict_to_subtree, DEFAULT_MAX_DIM};
use nandwalk::verify::{self, SuiteOptions};
use nandwalk::{
    build_hamiltonian, build_reflections, eigendecompose, product_spectrum, Assignment, AugmentedTree,
    FormulaTree, Mode, QpeConfig,
};

#[derive(Parser)]
#[command(name = "nandwalk", version, about = "Quantum-walk NAND formula evaluation by exact simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide the formula value with simulated phase estimation
    Eval(InstanceArgs),
    /// List eigenphases of U2 U1 with their overlaps on the start state
    Spectrum(InstanceArgs),
    /// Enumerate root certificates and their witness states
    Certify(InstanceArgs),
    /// Run the lemma and spectral check suites
    Verify(VerifyArgs),
    /// Mean query counts on balanced trees of growing size
    Scaling(ScalingArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Auto,
    Balanced,
    General,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Args)]
struct InstanceArgs {
    /// Formula such as "N(N(x1,x2),x3)", or @path to read it from a file
    formula: String,
    /// Bitstring, x1 first
    assignment: String,
    #[arg(long, value_enum, default_value = "auto")]
    mode: ModeArg,
    /// Phase-estimation repetitions
    #[arg(long, default_value_t = qpe::DEFAULT_REPETITIONS)]
    reps: usize,
    /// Register size (defaults to the precision requirement plus two)
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Override the tail length (even, with t^2 above N or Nd)
    #[arg(long)]
    tail: Option<usize>,
    /// Largest operator dimension to build (certify: also the certificate cap)
    #[arg(long)]
    cap: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Comma-separated checks, or "all"
    #[arg(long, default_value = "all")]
    select: String,
    /// Largest balanced height in the exhaustive grid
    #[arg(long, default_value_t = 3)]
    max_k: u32,
    /// Random shapes added to the curated general corpus
    #[arg(long, default_value_t = 12)]
    general: usize,
    /// Seeded decisions per instance for the oracle check
    #[arg(long, default_value_t = 50)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    /// Certificate enumeration cap
    #[arg(long, default_value_t = certificates::DEFAULT_CERTIFICATE_CAP)]
    cap: usize,
}

#[derive(Args)]
struct ScalingArgs {
    /// Balanced heights to run
    #[arg(long, value_delimiter = ',', default_value = "2,4,6")]
    ks: Vec<u32>,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

enum Failure {
    Usage(String),
    Check,
}

impl From<nandwalk::Error> for Failure {
    fn from(e: nandwalk::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Eval(args) => eval(&args),
        Command::Spectrum(args) => spectrum(&args),
        Command::Certify(args) => certify(&args),
        Command::Verify(args) => run_verify(&args),
        Command::Scaling(args) => scaling(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
}

struct Instance {
    tree: FormulaTree,
    at: AugmentedTree,
    assignment: Assignment,
}

fn load(args: &InstanceArgs) -> Result<Instance, Failure> {
    let text = match args.formula.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{path}: {e}")))?,
        None => args.formula.clone(),
    };
    let tree = FormulaTree::parse(&text)?;
    let assignment = Assignment::parse(&args.assignment)?;
    tree.evaluate(&assignment)?;
    let normalized = tree.normalize_even_depth();
    let mode = match args.mode {
        ModeArg::Auto => Mode::detect(&normalized),
        ModeArg::Balanced => Mode::Balanced,
        ModeArg::General => Mode::General,
    };
    let at = attach_tail_capped(&normalized, mode, args.tail, args.cap.unwrap_or(DEFAULT_MAX_DIM))?;
    Ok(Instance { tree, at, assignment })
}

fn config(args: &InstanceArgs, at: &AugmentedTree) -> Result<QpeConfig, Failure> {
    let mut cfg = QpeConfig::for_tree(at, args.seed).with_repetitions(args.reps);
    if let Some(b) = args.bits {
        cfg = cfg.with_bits(b);
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct EvalReport {
    formula: String,
    assignment: String,
    mode: Mode,
    leaves: usize,
    depth: usize,
    tail: usize,
    decision: u8,
    classical: u8,
    agree: bool,
    queries: u64,
    theta_min: f64,
    fraction_below: f64,
    threshold: f64,
    register_bits: u32,
    repetitions: usize,
}

fn eval(args: &InstanceArgs) -> Outcome {
    let inst = load(args)?;
    let cfg = config(args, &inst.at)?;
    let d = nandwalk::decide(&inst.at, &inst.assignment, &cfg)?;
    let classical = inst.tree.evaluate(&inst.assignment)?;
    let report = EvalReport {
        formula: inst.tree.to_string(),
        assignment: inst.assignment.to_string(),
        mode: inst.at.mode(),
        leaves: inst.at.leaf_count(),
        depth: inst.at.depth(),
        tail: inst.at.tail_length(),
        decision: d.decision as u8,
        classical: classical as u8,
        agree: d.decision == classical,
        queries: d.queries,
        theta_min: d.theta_min,
        fraction_below: d.fraction_below,
        threshold: d.threshold,
        register_bits: d.register_bits,
        repetitions: d.repetitions,
    };
    match args.format {
        Format::Json => print_json(&report),
        Format::Csv => {
            println!("decision,classical,agree,queries,theta_min,fraction_below");
            println!(
                "{},{},{},{},{},{}",
                report.decision, report.classical, report.agree, report.queries, report.theta_min, report.fraction_below
            );
        }
        Format::Table => {
            println!("formula        {}", report.formula);
            println!("assignment     {}", report.assignment);
            println!("decision       {}", report.decision);
            println!("classical      {}", report.classical);
            println!("agree          {}", report.agree);
            println!("queries        {}", report.queries);
            println!("theta_min      {:.6}", report.theta_min);
            println!("fraction_below {:.4} (threshold {:.4})", report.fraction_below, report.threshold);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SpectrumReport {
    formula: String,
    assignment: String,
    value: u8,
    theta_min: f64,
    phase_zero_overlap: f64,
    rows: Vec<nandwalk::spectral::SpectrumRow>,
}

fn spectrum(args: &InstanceArgs) -> Outcome {
    let inst = load(args)?;
    let ed = eigendecompose(&build_hamiltonian(&inst.at))?;
    let rp = build_reflections(&ed, &inst.at, &inst.assignment)?;
    let ps = product_spectrum(&rp)?;
    let report = SpectrumReport {
        formula: inst.tree.to_string(),
        assignment: inst.assignment.to_string(),
        value: inst.tree.evaluate(&inst.assignment)? as u8,
        theta_min: qpe::theta_min(inst.at.mode(), inst.at.leaf_count(), inst.at.depth()),
        phase_zero_overlap: ps.phase_zero_overlap(verify::PHASE_ZERO_TOLERANCE),
        rows: ps.rows_by_abs_phase(),
    };
    match args.format {
        Format::Json => print_json(&report),
        Format::Csv => {
            println!("theta,overlap2");
            for r in &report.rows {
                println!("{},{}", r.theta, r.overlap2);
            }
        }
        Format::Table => {
            println!("value {}  theta_min {:.6}", report.value, report.theta_min);
            println!("{:>14} {:>14}", "theta", "overlap2");
            for r in &report.rows {
                println!("{:>14.6e} {:>14.6e}", r.theta, r.overlap2);
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct CertificateRow {
    #[serde(flatten)]
    export: certificates::CertificateExport,
    norm_bound: f64,
    kernel_residual: f64,
    psi0_residual: f64,
    psi0_overlap: f64,
}

#[derive(Serialize)]
struct CertifyReport {
    formula: String,
    assignment: String,
    count: usize,
    overlap_bound: f64,
    certificates: Vec<CertificateRow>,
}

fn certify(args: &InstanceArgs) -> Outcome {
    let inst = load(args)?;
    let at = &inst.at;
    let cap = args.cap.unwrap_or(certificates::DEFAULT_CERTIFICATE_CAP);
    let certs = certificates::enumerate_certificates_capped(at, &inst.assignment, at.root(), cap)?;
    let h = build_hamiltonian(at);
    let ed = eigendecompose(&h)?;
    let rp = build_reflections(&ed, at, &inst.assignment)?;
    let rows_t = restrict_to_subtree(&h, at, at.root())?.vertices;
    let root = at.vertex(at.root());
    let norm_bound = match at.mode() {
        Mode::Balanced => norm_bound_balanced(root.leaves),
        Mode::General => norm_bound_general(root.leaves, root.depth),
    };
    let mut rows = Vec::with_capacity(certs.len());
    for c in &certs {
        let psi_c = certificates::build_psi_c(c, at);
        let psi_0 = certificates::build_psi_0(c, at)?;
        let x = &psi_0.amplitudes;
        rows.push(CertificateRow {
            export: certificates::CertificateExport::new(c, &psi_c),
            norm_bound,
            kernel_residual: psi_c.residual(&h, Some(&rows_t)),
            psi0_residual: psi_0.residual(&h, None),
            psi0_overlap: x.dot(rp.psi_start_normalized()) / x.norm(),
        });
    }
    let report = CertifyReport {
        formula: inst.tree.to_string(),
        assignment: inst.assignment.to_string(),
        count: rows.len(),
        overlap_bound: 1.0 / 5f64.sqrt(),
        certificates: rows,
    };
    match args.format {
        Format::Json => print_json(&report),
        Format::Csv | Format::Table => {
            let sep = if args.format == Format::Csv { "," } else { "  " };
            println!("{}", ["vertices", "norm2", "bound", "residual", "overlap"].join(sep));
            for r in &report.certificates {
                let verts: Vec<String> = r.export.vertices.iter().map(|v| v.to_string()).collect();
                println!(
                    "{}",
                    [
                        verts.join(" "),
                        format!("{:.6}", r.export.norm_squared),
                        format!("{:.6}", r.norm_bound),
                        format!("{:.2e}", r.kernel_residual),
                        format!("{:.6}", r.psi0_overlap),
                    ]
                    .join(sep)
                );
            }
        }
    }
    Ok(())
}

fn run_verify(args: &VerifyArgs) -> Outcome {
    let checks = verify::parse_selection(&args.select)?;
    let mut cases = verify::balanced_grid(args.max_k)?;
    cases.extend(verify::general_corpus(args.general, args.seed)?);
    let options = SuiteOptions {
        seed: args.seed,
        oracle_repetitions: args.reps,
        certificate_cap: args.cap,
        ..SuiteOptions::default()
    };
    let report = verify::run_suite(&cases, &checks, &options);
    match args.format {
        Format::Json => println!("{}", report.to_json()),
        Format::Csv => {
            println!("check,instance,status,value,relation,threshold");
            for r in &report.results {
                let rel = serde_json::to_value(r.relation).expect("relation serializes");
                let status = serde_json::to_value(r.status).expect("status serializes");
                println!(
                    "{},{},{},{},{},{}",
                    r.check,
                    r.instance,
                    status.as_str().unwrap_or_default(),
                    r.value,
                    rel.as_str().unwrap_or_default(),
                    r.threshold
                );
            }
        }
        Format::Table => print!("{}", report.to_table()),
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

#[derive(Serialize)]
struct ScalingReport {
    rows: Vec<qpe::ScalingRow>,
    slope: Option<f64>,
}

fn scaling(args: &ScalingArgs) -> Outcome {
    let rows = qpe::scaling_run(&args.ks, args.trials, args.seed)?;
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.leaves as f64, r.mean_queries)).collect();
    let slope = (points.len() >= 2 && args.trials > 0).then(|| log_log_slope(&points));
    let report = ScalingReport { rows, slope };
    match args.format {
        Format::Json => print_json(&report),
        Format::Csv | Format::Table => {
            let sep = if args.format == Format::Csv { "," } else { "  " };
            println!("{}", ["k", "leaves", "bits", "trials", "mean_queries", "agreement"].join(sep));
            for r in &report.rows {
                println!(
                    "{}",
                    [
                        r.k.to_string(),
                        r.leaves.to_string(),
                        r.register_bits.to_string(),
                        r.trials.to_string(),
                        r.mean_queries.to_string(),
                        r.agreement.to_string(),
                    ]
                    .join(sep)
                );
            }
            if args.format == Format::Table {
                if let Some(s) = report.slope {
                    println!("log-log slope {s:.4}");
                }
            }
        }
    }
    Ok(())
}

