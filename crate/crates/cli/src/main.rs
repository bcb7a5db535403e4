//! `nonlocal` command-line tool.
//!
//! Every report is a JSON envelope carrying the tool version, seed, tolerance
//! policy and the SHA-256 of the input file, so identical runs produce
//! identical bytes.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use nonlocal::activation::{activate, verify_certificate, ActivationConfig, ActivationReport};
use nonlocal::belldiag::{run_suite, SuiteConfig};
use nonlocal::chsh::{behavior_from_state, chsh_value, horodecki, optimal_measurements};
use nonlocal::filtering::{search_c_membership, SearchConfig};
use nonlocal::qcore::{DensityOperator, HermitianOperator, PartyDims};
use nonlocal::states::{self, StateFile};
use nonlocal::Tolerances;

const MAX_PARTY_DIM: usize = 16;
const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("unsupported dimension: {0}")]
    Dimension(String),
    #[error(transparent)]
    Core(#[from] nonlocal::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Dimension(_) => 3,
            _ => 2,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "nonlocal", version, about = "CHSH violation of bipartite states under local filtering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args, Clone, Debug)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Eigenvalue floor for PSD and PPT checks.
    #[arg(long)]
    tol_psd: Option<f64>,
    /// Tolerance for equality between computed quantities.
    #[arg(long)]
    tol_eq: Option<f64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

impl Common {
    fn tolerances(&self) -> Tolerances {
        let mut t = Tolerances::default();
        if let Some(v) = self.tol_psd {
            t.psd = v;
        }
        if let Some(v) = self.tol_eq {
            t.eq = v;
        }
        t
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validity, PPT and (for two qubits) CHSH analysis of a state file.
    Analyze {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Randomized search for filters that make the state violate CHSH.
    FilterSearch {
        file: PathBuf,
        #[arg(long, default_value_t = 64)]
        restarts: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Searches for an ancilla that activates CHSH violation of the state.
    Activate {
        file: PathBuf,
        /// Filter-search restarts per fallback candidate.
        #[arg(long, default_value_t = 16)]
        restarts: usize,
        #[arg(long, default_value_t = 24)]
        candidates: usize,
        #[arg(long, default_value_t = 20_000)]
        max_iter: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Re-checks the certificate stored in an activation report.
    VerifyCertificate {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Runs the Bell-diagonal reduction checks.
    Lemma2Verify {
        #[arg(long, default_value_t = 10_000)]
        grid: usize,
        #[arg(long, hide = true, default_value_t = 0.0)]
        inject_fault: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Writes a state file.
    MakeState {
        #[command(subcommand)]
        kind: StateKind,
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Clone, Debug)]
enum StateKind {
    /// `p Φ₁ + (1−p) I/4`.
    Werner {
        #[arg(long)]
        p: f64,
    },
    /// Bell projector with 0-based index.
    Bell {
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// `|00⟩` on `dim_a ⊗ dim_b`.
    Zero {
        #[arg(long, num_args = 2, default_values_t = [2, 2])]
        dims: Vec<usize>,
    },
    /// Random mixed state.
    Random {
        #[arg(long, num_args = 2, default_values_t = [2, 2])]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Random mixture of product states.
    Separable {
        #[arg(long, num_args = 2, default_values_t = [2, 2])]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 6)]
        terms: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Serialize)]
struct InputInfo {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct Envelope<T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    tolerances: Tolerances,
    input: Option<InputInfo>,
    config: Value,
    passed: Option<bool>,
    result: T,
}

struct Loaded {
    info: InputInfo,
    state: StateFile,
}

fn read_input(path: &Path) -> CliResult<(InputInfo, String)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let info = InputInfo {
        file: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    };
    let text = String::from_utf8(bytes).map_err(|_| CliError::Input(format!("{}: not UTF-8", path.display())))?;
    Ok((info, text))
}

fn load_state(path: &Path) -> CliResult<Loaded> {
    let (info, text) = read_input(path)?;
    let state = StateFile::from_json(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let dims = state.dims()?;
    let (da, db) = (dims.dim_a(), dims.dim_b());
    if da > MAX_PARTY_DIM || db > MAX_PARTY_DIM {
        return Err(CliError::Dimension(format!(
            "party dimensions {da}x{db} exceed the cap of {MAX_PARTY_DIM}"
        )));
    }
    Ok(Loaded { info, state })
}

fn density(loaded: &Loaded, tol: &Tolerances) -> CliResult<DensityOperator> {
    Ok(loaded.state.to_density(tol)?)
}

fn emit<T: Serialize>(env: &Envelope<T>, common: &Common) -> CliResult<()> {
    let value = serde_json::to_value(env).map_err(nonlocal::Error::from)?;
    let text = match common.format {
        Format::Json => serde_json::to_string_pretty(&value).map_err(nonlocal::Error::from)?,
        Format::Text => render_text(&value),
    };
    write_output(common.out.as_deref(), &text)
}

fn write_output(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, format!("{text}\n"))
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
        None => {
            use std::io::Write;
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Input(format!("stdout: {e}"))),
                _ => Ok(()),
            }
        }
    }
}

fn render_text(v: &Value) -> String {
    let mut lines = Vec::new();
    flatten("", v, &mut lines);
    lines.join("\n")
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<String>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                flatten(&join(k), x, out);
            }
        }
        Value::Array(items) if items.len() > 8 => out.push(format!("{prefix}: [{} items]", items.len())),
        Value::Array(items) if items.iter().all(|x| !x.is_object() && !x.is_array()) => {
            let parts: Vec<String> = items.iter().map(|x| x.to_string()).collect();
            out.push(format!("{prefix}: [{}]", parts.join(", ")));
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flatten(&join(&i.to_string()), x, out);
            }
        }
        Value::Null => {}
        other => out.push(format!("{prefix}: {other}")),
    }
}

fn anti_hermitian_norm(state: &StateFile) -> f64 {
    let m = &state.matrix;
    let mut worst: f64 = 0.0;
    for (r, row) in m.iter().enumerate() {
        for (c, z) in row.iter().enumerate() {
            let w = m[c][r];
            worst = worst.max(0.5 * ((z[0] - w[0]).hypot(z[1] + w[1])));
        }
    }
    worst
}

fn two_qubit_analysis(rho: &HermitianOperator) -> CliResult<Value> {
    let q = rho.with_dims(PartyDims::qubits())?;
    let q = q.scaled(1.0 / q.trace());
    let h = horodecki(&q)?;
    let m = optimal_measurements(&q)?;
    let behavior = behavior_from_state(&q, &m)?;
    let value = chsh_value(&behavior);
    Ok(json!({
        "horodecki": h,
        "measurements": m,
        "behavior": behavior,
        "chsh_value": value,
    }))
}

fn cmd_analyze(file: &Path, common: &Common) -> CliResult<u8> {
    let tol = common.tolerances();
    let loaded = load_state(file)?;
    let herm = anti_hermitian_norm(&loaded.state);
    let rho = density(&loaded, &tol)?;
    let dims = rho.dims().clone();
    let min_eig = rho.min_eigenvalue()?;
    let ppt_min = rho.ppt_min_eigenvalue()?;
    let ppt = ppt_min >= -tol.psd;
    let entanglement = match (ppt, dims.total() <= 6) {
        (false, _) => "ENTANGLED_NPT",
        (true, true) => "SEPARABLE",
        (true, false) => "PPT_UNDETERMINED",
    };
    let two_qubit = if dims.dim_a() == 2 && dims.dim_b() == 2 {
        Some(two_qubit_analysis(rho.operator())?)
    } else {
        None
    };
    let result = json!({
        "label": loaded.state.label,
        "party_dims": loaded.state.party_dims,
        "dim": dims.total(),
        "trace": rho.trace(),
        "hermitian": { "anti_hermitian_norm": herm, "passed": herm <= tol.herm },
        "psd": { "min_eigenvalue": min_eig, "passed": min_eig >= -tol.psd },
        "ppt": { "min_eigenvalue": ppt_min, "passed": ppt },
        "entanglement": entanglement,
        "two_qubit": two_qubit,
    });
    emit(
        &Envelope {
            tool: "nonlocal",
            version: VERSION,
            command: "analyze",
            seed: common.seed,
            tolerances: tol,
            input: Some(loaded.info),
            config: json!({}),
            passed: None,
            result,
        },
        common,
    )?;
    Ok(0)
}

fn cmd_filter_search(file: &Path, restarts: usize, common: &Common) -> CliResult<u8> {
    let tol = common.tolerances();
    let loaded = load_state(file)?;
    let rho = density(&loaded, &tol)?;
    let cfg = SearchConfig {
        restarts,
        seed: common.seed,
        ..SearchConfig::default()
    };
    let report = search_c_membership(rho.operator(), &cfg)?;
    emit(
        &Envelope {
            tool: "nonlocal",
            version: VERSION,
            command: "filter-search",
            seed: common.seed,
            tolerances: tol,
            input: Some(loaded.info),
            config: serde_json::to_value(cfg).map_err(nonlocal::Error::from)?,
            passed: None,
            result: report,
        },
        common,
    )?;
    Ok(0)
}

fn cmd_activate(file: &Path, restarts: usize, candidates: usize, max_iter: usize, common: &Common) -> CliResult<u8> {
    let tol = common.tolerances();
    let loaded = load_state(file)?;
    let sigma = density(&loaded, &tol)?;
    let mut cfg = ActivationConfig {
        seed: common.seed,
        fallback_restarts: restarts,
        fallback_candidates: candidates,
        tolerances: tol,
        ..ActivationConfig::default()
    };
    cfg.solver.max_iter = max_iter;
    let report = activate(&sigma, &cfg)?;
    emit(
        &Envelope {
            tool: "nonlocal",
            version: VERSION,
            command: "activate",
            seed: common.seed,
            tolerances: tol,
            input: Some(loaded.info),
            config: serde_json::to_value(cfg).map_err(nonlocal::Error::from)?,
            passed: None,
            result: report,
        },
        common,
    )?;
    Ok(0)
}

fn cmd_verify_certificate(file: &Path, common: &Common) -> CliResult<u8> {
    let tol = common.tolerances();
    let (info, text) = read_input(file)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", file.display())))?;
    let body = value.get("result").cloned().unwrap_or(value);
    let report: ActivationReport =
        serde_json::from_value(body).map_err(|e| CliError::Input(format!("{}: {e}", file.display())))?;
    let check = match &report.certificate {
        Some(cert) => Some(verify_certificate(cert, &tol)?),
        None => None,
    };
    let passed = check.as_ref().is_some_and(|c| c.passed);
    emit(
        &Envelope {
            tool: "nonlocal",
            version: VERSION,
            command: "verify-certificate",
            seed: common.seed,
            tolerances: tol,
            input: Some(info),
            config: json!({}),
            passed: Some(passed),
            result: json!({ "status": report.status, "check": check }),
        },
        common,
    )?;
    Ok(if passed { 0 } else { 1 })
}

fn cmd_lemma2_verify(grid: usize, fault: f64, common: &Common) -> CliResult<u8> {
    let cfg = SuiteConfig {
        grid,
        seed: common.seed,
        n_fault: fault,
    };
    let report = run_suite(&cfg)?;
    let passed = report.passed;
    emit(
        &Envelope {
            tool: "nonlocal",
            version: VERSION,
            command: "lemma2-verify",
            seed: common.seed,
            tolerances: common.tolerances(),
            input: None,
            config: json!({ "grid": grid }),
            passed: Some(passed),
            result: report,
        },
        common,
    )?;
    Ok(if passed { 0 } else { 1 })
}

fn dims_pair(dims: &[usize]) -> CliResult<(usize, usize)> {
    match dims {
        [a, b] if *a <= MAX_PARTY_DIM && *b <= MAX_PARTY_DIM => Ok((*a, *b)),
        [a, b] => Err(CliError::Dimension(format!("party dimensions {a}x{b} exceed the cap of {MAX_PARTY_DIM}"))),
        _ => Err(CliError::Input("expected two dimensions".into())),
    }
}

fn cmd_make_state(kind: &StateKind, out: Option<&Path>) -> CliResult<u8> {
    let (rho, label) = match kind {
        StateKind::Werner { p } => (states::werner(*p)?, format!("werner({p})")),
        StateKind::Bell { index } => {
            let projectors = states::bell_projectors();
            let proj = projectors
                .get(*index)
                .ok_or_else(|| CliError::Input(format!("Bell index {index} is not in 0..4")))?;
            let rho = DensityOperator::new(proj.operator.clone(), &Tolerances::default())?;
            (rho, format!("bell({index})"))
        }
        StateKind::Zero { dims } => {
            let (a, b) = dims_pair(dims)?;
            (states::zero_product(a, b)?, format!("zero({a}x{b})"))
        }
        StateKind::Random { dims, seed } => {
            let (a, b) = dims_pair(dims)?;
            (states::random_density(&PartyDims::simple(a, b)?, *seed), format!("random({a}x{b}, seed {seed})"))
        }
        StateKind::Separable { dims, terms, seed } => {
            let (a, b) = dims_pair(dims)?;
            (
                states::random_separable(a, b, *terms, *seed)?,
                format!("separable({a}x{b}, {terms} terms, seed {seed})"),
            )
        }
    };
    write_output(out, &StateFile::from_density(&rho, label).to_json()?)?;
    Ok(0)
}

fn run(cli: &Cli) -> CliResult<u8> {
    match &cli.command {
        Command::Analyze { file, common } => cmd_analyze(file, common),
        Command::FilterSearch { file, restarts, common } => cmd_filter_search(file, *restarts, common),
        Command::Activate {
            file,
            restarts,
            candidates,
            max_iter,
            common,
        } => cmd_activate(file, *restarts, *candidates, *max_iter, common),
        Command::VerifyCertificate { file, common } => cmd_verify_certificate(file, common),
        Command::Lemma2Verify {
            grid,
            inject_fault,
            common,
        } => cmd_lemma2_verify(*grid, *inject_fault, common),
        Command::MakeState { kind, out } => cmd_make_state(kind, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
