mod record;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use eprsdp::generators::{gen_nonsignalling, gen_random_quantum, gen_transpose_twist, QuantumDims};
use eprsdp::io::{
    AssemblageFile, Certificate, CertificateFile, DualFile, DualMode, FunctionalFile, InstrumentalFile,
};
use eprsdp::moment::certificate_constraints;
use eprsdp::sdp::{self, SolveOptions, SolveOutcome, SolverSettings};
use eprsdp::{Assemblage, InstrumentalAssemblage, ScenarioSpec, ValidationReport};

use record::VerdictRecord;

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_UNKNOWN: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "eprsdp", version, about = "Semidefinite certificates for assemblages in EPR scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Test membership of an assemblage at a level of the hierarchy.
    Check(SolveArgs),
    /// Upper-bound a steering functional over a level of the hierarchy.
    Bound(SolveArgs),
    /// Test whether an instrumental assemblage is a post-selection of a
    /// level-n Bob-with-Input assemblage.
    InstrumentalCheck(SolveArgs),
    /// Random quantum assemblage.
    GenQuantum(GenArgs),
    /// Random non-signalling assemblage (one Alice, one Bob input).
    GenNs(GenArgs),
    /// Qubit assemblage whose second Bob input sees the transposed states.
    GenTwist(GenArgs),
    /// Revalidate a certificate or dual certificate against its input.
    ValidateCert(ValidateArgs),
}

#[derive(Args, Debug)]
struct SolverFlags {
    /// Revalidation tolerance.
    #[arg(long, default_value_t = sdp::VERDICT_TOL)]
    tol: f64,
    /// Relative duality-gap target of the solver.
    #[arg(long)]
    solver_gap: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    /// JSON file with solver settings.
    #[arg(long, env = sdp::SETTINGS_ENV)]
    solver_config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    level: usize,
    #[arg(long)]
    input: PathBuf,
    /// Directory for the verdict record and certificates.
    #[arg(long, default_value = ".")]
    output: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    seed: u64,
    /// Scenario as inline JSON, e.g. '{"nAlices":1,"nOutcomes":2,"nInputs":2,"nBobInputs":2,"bobDim":2}'.
    #[arg(long)]
    scenario: Option<String>,
    /// Auxiliary dimension for gen-quantum.
    #[arg(long)]
    aux_dim: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Certificate or dual certificate file.
    cert: PathBuf,
    /// Assemblage (or instrumental assemblage for instrumental duals).
    #[arg(long)]
    against: PathBuf,
    #[arg(long, default_value_t = sdp::VERDICT_TOL)]
    tol: f64,
    /// Directory for the verdict record.
    #[arg(long, default_value = ".")]
    output: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Check(a) => check(&a),
        Command::Bound(a) => bound(&a),
        Command::InstrumentalCheck(a) => instrumental(&a),
        Command::GenQuantum(a) => generate(&a, "gen-quantum"),
        Command::GenNs(a) => generate(&a, "gen-ns"),
        Command::GenTwist(a) => generate(&a, "gen-twist"),
        Command::ValidateCert(a) => validate(&a),
    }
}

fn read_input<T: DeserializeOwned>(path: &Path) -> Result<(T, Vec<u8>)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let value = serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    Ok((value, bytes))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    eprsdp::io::write_json(path, value).with_context(|| format!("writing {}", path.display()))
}

fn options(flags: &SolverFlags) -> Result<SolveOptions> {
    let mut settings = match &flags.solver_config {
        Some(p) if !p.as_os_str().is_empty() => {
            SolverSettings::load(p).with_context(|| format!("loading solver settings {}", p.display()))?
        }
        _ => SolverSettings::default(),
    };
    if let Some(g) = flags.solver_gap {
        settings.gap_rel = g;
    }
    if let Some(t) = flags.threads {
        if t == 0 {
            bail!("--threads must be at least 1");
        }
        settings.threads = t;
    }
    settings.check()?;
    if !(flags.tol.is_finite() && flags.tol > 0.0) {
        bail!("--tol must be positive");
    }
    Ok(SolveOptions { settings, tol: flags.tol, margin: sdp::VERDICT_TOL })
}

fn check_level(level: usize, s: &ScenarioSpec) -> Result<()> {
    if level == 0 {
        bail!("--level must be at least 1");
    }
    if level < s.n_alices + 1 {
        log::warn!(
            "level {level} is below the recommended level {} for {} Alice(s); some data constraints are not imposed",
            s.n_alices + 1,
            s.n_alices
        );
    }
    Ok(())
}

fn prepare_output(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Fill the record from a membership outcome, write artifacts, and return
/// the exit code.
fn finish_outcome(
    out: &SolveOutcome,
    rec: &mut VerdictRecord,
    dir: &Path,
    mode: DualMode,
    level: usize,
) -> Result<u8> {
    rec.verdict = out.verdict().to_string();
    rec.solver = out.solver().cloned();
    let code = match out {
        SolveOutcome::Feasible { certificate, report, t, witness, .. } => {
            rec.add_report(report);
            rec.margins.t = Some(*t);
            let path = dir.join("certificate.json");
            write_json(&path, &CertificateFile::bob_with_input(certificate))?;
            rec.add_artifact("certificate", &path);
            if let Some(w) = witness {
                let path = dir.join("witness.json");
                write_json(&path, &AssemblageFile::new(w))?;
                rec.add_artifact("witness", &path);
            }
            EXIT_OK
        }
        SolveOutcome::Infeasible { dual, check, .. } => {
            rec.margins.dual = Some(check.clone());
            let path = dir.join("dual.json");
            write_json(&path, &DualFile::new(mode, rec.scenario, level, dual, check))?;
            rec.add_artifact("dual", &path);
            EXIT_INFEASIBLE
        }
        SolveOutcome::Unknown { reason, report, check, .. } => {
            if let Some(r) = report {
                rec.add_report(r);
            }
            rec.margins.dual = check.clone();
            rec.reason = Some(reason.clone());
            EXIT_UNKNOWN
        }
    };
    Ok(code)
}

/// Backend failures are a verdict (Unknown), not an input error.
fn no_claim_on_solver_error(r: eprsdp::Result<SolveOutcome>) -> Result<SolveOutcome> {
    match r {
        Err(eprsdp::Error::Solver(msg)) => {
            Ok(SolveOutcome::Unknown { reason: format!("solver failure: {msg}"), report: None, check: None, solver: None })
        }
        r => Ok(r?),
    }
}

fn write_record(rec: &mut VerdictRecord, dir: &Path, start: Instant) -> Result<()> {
    rec.wall_time = start.elapsed().as_secs_f64();
    write_json(&dir.join("verdict.json"), rec)?;
    println!("{}", rec.verdict);
    Ok(())
}

fn check(a: &SolveArgs) -> Result<u8> {
    let start = Instant::now();
    let opts = options(&a.solver)?;
    let (file, bytes): (AssemblageFile, _) = read_input(&a.input)?;
    let asm = file.into_assemblage().with_context(|| format!("in {}", a.input.display()))?;
    check_level(a.level, &asm.scenario)?;
    let input = asm.validate(opts.tol);
    if !input.pass() {
        bail!("{} is not a valid assemblage:\n{input}", a.input.display());
    }
    prepare_output(&a.output)?;
    let mut rec = VerdictRecord::new("check", asm.scenario, Some(a.level), opts.tol, &bytes);
    let out = no_claim_on_solver_error(sdp::membership(&asm, a.level, &opts))?;
    let code = finish_outcome(&out, &mut rec, &a.output, DualMode::Membership, a.level)?;
    write_record(&mut rec, &a.output, start)?;
    Ok(code)
}

fn instrumental(a: &SolveArgs) -> Result<u8> {
    let start = Instant::now();
    let opts = options(&a.solver)?;
    let (file, bytes): (InstrumentalFile, _) = read_input(&a.input)?;
    let ia = file.into_instrumental().with_context(|| format!("in {}", a.input.display()))?;
    check_level(a.level, &ia.scenario)?;
    let input = ia.validate(opts.tol);
    if !input.pass() {
        bail!("{} is not a valid instrumental assemblage:\n{input}", a.input.display());
    }
    prepare_output(&a.output)?;
    let mut rec = VerdictRecord::new("instrumental-check", ia.scenario, Some(a.level), opts.tol, &bytes);
    let out = no_claim_on_solver_error(sdp::instrumental_membership(&ia, a.level, &opts))?;
    let code = finish_outcome(&out, &mut rec, &a.output, DualMode::Instrumental, a.level)?;
    write_record(&mut rec, &a.output, start)?;
    Ok(code)
}

fn bound(a: &SolveArgs) -> Result<u8> {
    let start = Instant::now();
    let opts = options(&a.solver)?;
    let (file, bytes): (FunctionalFile, _) = read_input(&a.input)?;
    let f = file.into_functional().with_context(|| format!("in {}", a.input.display()))?;
    check_level(a.level, &f.scenario)?;
    prepare_output(&a.output)?;
    let mut rec = VerdictRecord::new("bound", f.scenario, Some(a.level), opts.tol, &bytes);
    let out = sdp::bound(&f, a.level, &opts)?;
    rec.add_report(&out.report);
    rec.solver = Some(out.solver.clone());
    rec.upper_bound = out.upper_bound;
    rec.primal_value = Some(out.primal_value);
    if let Some(w) = &out.optimizer {
        let path = a.output.join("optimizer.json");
        write_json(&path, &AssemblageFile::new(w))?;
        rec.add_artifact("optimizer", &path);
    }
    if let Some(c) = &out.certificate {
        let path = a.output.join("certificate.json");
        write_json(&path, &CertificateFile::bob_with_input(c))?;
        rec.add_artifact("certificate", &path);
    }
    let code = if let Some(ub) = out.upper_bound {
        rec.verdict = "bounded".into();
        println!("upper bound {ub:.10}");
        EXIT_OK
    } else {
        rec.verdict = "unknown".into();
        rec.reason = Some(format!("dual bound recheck failed (solver status {})", out.solver.status));
        EXIT_UNKNOWN
    };
    write_record(&mut rec, &a.output, start)?;
    Ok(code)
}

fn parse_scenario(text: Option<&str>, default: Option<ScenarioSpec>) -> Result<ScenarioSpec> {
    match (text, default) {
        (Some(t), _) => {
            let s: ScenarioSpec = serde_json::from_str(t).context("parsing --scenario")?;
            s.check()?;
            Ok(s)
        }
        (None, Some(s)) => Ok(s),
        (None, None) => bail!("--scenario is required"),
    }
}

fn generate(a: &GenArgs, which: &str) -> Result<u8> {
    let asm: Assemblage = match which {
        "gen-quantum" => {
            let s = parse_scenario(a.scenario.as_deref(), None)?;
            let mut dims = QuantumDims::default_for(&s);
            if let Some(k) = a.aux_dim {
                dims.aux_dim = k;
            }
            gen_random_quantum(a.seed, &s, &dims)?.assemblage()?
        }
        "gen-ns" => gen_nonsignalling(a.seed, &parse_scenario(a.scenario.as_deref(), None)?)?,
        _ => {
            let default = ScenarioSpec::new(1, 2, 3, 2, 2)?;
            gen_transpose_twist(a.seed, &parse_scenario(a.scenario.as_deref(), Some(default))?)?
        }
    };
    let file = AssemblageFile::new(&asm);
    match &a.output {
        Some(p) => write_json(p, &file)?,
        None => println!("{}", serde_json::to_string_pretty(&file)?),
    }
    Ok(EXIT_OK)
}

fn validate(a: &ValidateArgs) -> Result<u8> {
    let start = Instant::now();
    if !(a.tol.is_finite() && a.tol > 0.0) {
        bail!("--tol must be positive");
    }
    let (value, bytes): (serde_json::Value, _) = read_input(&a.cert)?;
    let ctx = || format!("in {}", a.cert.display());
    let is_dual = value.get("cones").is_some();
    prepare_output(&a.output)?;
    let (mut rec, report, pass) = if is_dual {
        let dual: DualFile = serde_json::from_value(value).with_context(ctx)?;
        let z = dual.matrices().with_context(ctx)?;
        let check = match dual.mode {
            DualMode::Membership => {
                let asm = read_assemblage(&a.against)?;
                same_scenario(&asm.scenario, &dual.scenario)?;
                sdp::recheck_membership_dual(&asm, dual.level, &z)?
            }
            DualMode::Instrumental => {
                let ia = read_instrumental(&a.against)?;
                same_scenario(&ia.scenario, &dual.scenario)?;
                sdp::recheck_instrumental_dual(&ia, dual.level, &z)?
            }
        };
        let pass = check.passes(sdp::VERDICT_TOL, a.tol);
        let mut rep = ValidationReport::new(a.tol);
        rep.record("dual_residual", check.dual_residual);
        let mut rec = VerdictRecord::new("validate-cert", dual.scenario, Some(dual.level), a.tol, &bytes);
        println!("dual margin {:.6e}, dual residual {:.3e}", check.margin, check.dual_residual);
        rec.margins.dual = Some(check);
        (rec, rep, pass)
    } else {
        let file: CertificateFile = serde_json::from_value(value).with_context(ctx)?;
        let scenario = file.scenario;
        let level = file.level;
        let asm = read_assemblage(&a.against)?;
        same_scenario(&asm.scenario, &scenario)?;
        let rep = match file.into_certificate().with_context(ctx)? {
            Certificate::BobWithInput(g) => g.validate(&certificate_constraints(&g.index, &asm)?, a.tol),
            Certificate::Jmrw(d) => d.validate(&asm, a.tol)?,
            Certificate::Npa(m) => {
                let mut rep = m.validate(a.tol)?;
                for (name, r) in npa_data_residuals(&m, &asm) {
                    rep.record(name, r);
                }
                rep
            }
        };
        let rec = VerdictRecord::new("validate-cert", scenario, Some(level), a.tol, &bytes);
        let pass = rep.pass();
        (rec, rep, pass)
    };
    print!("{report}");
    rec.add_report(&report);
    rec.verdict = if pass { "valid" } else { "invalid" }.into();
    write_record(&mut rec, &a.output, start)?;
    Ok(if pass { EXIT_OK } else { EXIT_UNKNOWN })
}

/// `Γ̃(∅, a_Ω|x_Ω)` against the correlations of `asm` at Bob input 0.
fn npa_data_residuals(m: &eprsdp::reductions::NpaMatrix, asm: &Assemblage) -> Vec<(&'static str, f64)> {
    let s = asm.scenario;
    let mut out = vec![("data_scalar", 0.0)];
    for mask in 1usize..(1 << s.n_alices) {
        let omega: Vec<usize> = (0..s.n_alices).filter(|k| mask & (1 << k) != 0).collect();
        for x in ScenarioSpec::tuples(s.n_inputs, omega.len()) {
            for a0 in ScenarioSpec::tuples(s.n_outcomes - 1, omega.len()) {
                let a: Vec<usize> = a0.iter().map(|v| v + 1).collect();
                if let Some(v) = m.marginal(&omega, &a, &x) {
                    let p = asm.marginal(&omega, &a, &x, 0).trace().re;
                    out.push(("data_scalar", (v - p).abs()));
                }
            }
        }
    }
    out
}

fn read_assemblage(path: &Path) -> Result<Assemblage> {
    let (file, _): (AssemblageFile, _) = read_input(path)?;
    file.into_assemblage().with_context(|| format!("in {}", path.display()))
}

fn read_instrumental(path: &Path) -> Result<InstrumentalAssemblage> {
    let (file, _): (InstrumentalFile, _) = read_input(path)?;
    file.into_instrumental().with_context(|| format!("in {}", path.display()))
}

fn same_scenario(a: &ScenarioSpec, b: &ScenarioSpec) -> Result<()> {
    if a != b {
        bail!("scenario mismatch between certificate and --against input");
    }
    Ok(())
}
