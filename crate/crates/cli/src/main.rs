//! `orbitstrata`: verify the built-in O(3) example, print P-matrices and
//! stratum parametrizations, classify points and scan potentials.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use orbitstrata::example::{load_bundle, load_bundle_dir, verify_bundle, ExampleBundle, VerifyOptions, VERIFY_GROUPS};
use orbitstrata::pmatrix::{build_pmatrix, classify_point, StratumVerdict, Tolerances};
use orbitstrata::phase::{parse_grid, phase_scan, MinimizeOptions, Potential};
use orbitstrata::strata::{sample_delta, verify_factorization, StratumParam};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use output::{fmt_sig, fmt_vec, J};

const TEXT_DIGITS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Records,
}

#[derive(Debug, Parser)]
#[command(name = "orbitstrata", version, about = "Orbit space strata of O(3) acting on R^8")]
struct Cli {
    /// Bundle directory (defaults to the built-in data).
    #[arg(long, global = true)]
    bundle: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Relative eigenvalue tolerance for rank decisions.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Check every identity of the bundle; exit 1 on any failure.
    Verify {
        /// Run only this check group (repeatable).
        #[arg(long)]
        only: Vec<String>,
        /// Δ samples per stratum.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Recompute and print the P-matrix in the basis variables.
    Pmatrix {
        /// Use SO(3) and the six-element basis.
        #[arg(long)]
        so3: bool,
    },
    /// Print Λ̂, φ, Δ and the factorization check per stratum.
    Strata {
        #[arg(long)]
        stratum: Option<String>,
    },
    /// Classify a point of R^5 (O(3)) or R^6 (SO(3)) in basis coordinates.
    Classify {
        #[arg(required = true, allow_hyphen_values = true, num_args = 1..)]
        point: Vec<f64>,
    },
    /// Minimize a potential on every stratum over a parameter grid.
    Minimize {
        /// Polynomial in p1..p5 with parameters a1, a2, …
        #[arg(long)]
        potential: String,
        /// Parameter grid, `a1=lo:hi:count` or `a1=v1,v2,…` (one per parameter).
        #[arg(long)]
        grid: Vec<String>,
        #[arg(long)]
        stratum: Option<String>,
        #[arg(long, default_value_t = 32)]
        starts: usize,
        /// Restrict to p1 <= R^2.
        #[arg(long, default_value_t = 10.0)]
        bound: f64,
    },
    /// Draw points of Δ for a stratum and print λ with φ(λ).
    Sample {
        #[arg(long)]
        stratum: String,
        #[arg(long, default_value_t = 10)]
        samples: usize,
        /// Half-width of the sampling box.
        #[arg(long = "box", default_value_t = 2.0)]
        box_half: f64,
    },
}

/// Failures that map to exit status 2.
#[derive(Debug)]
struct UsageError(String);

impl<E: std::fmt::Display> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(UsageError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn tolerances(cli: &Cli) -> Tolerances {
    cli.tol.map(Tolerances::from_rank_tol).unwrap_or_default()
}

fn run(cli: &Cli) -> Result<bool, UsageError> {
    let bundle = match &cli.bundle {
        Some(dir) => load_bundle_dir(dir)?,
        None => load_bundle()?,
    };
    match &cli.cmd {
        Cmd::Verify { only, samples } => cmd_verify(cli, &bundle, only, *samples),
        Cmd::Pmatrix { so3 } => cmd_pmatrix(cli, &bundle, *so3),
        Cmd::Strata { stratum } => cmd_strata(cli, &bundle, stratum.as_deref()),
        Cmd::Classify { point } => cmd_classify(cli, &bundle, point),
        Cmd::Minimize { potential, grid, stratum, starts, bound } => {
            cmd_minimize(cli, &bundle, potential, grid, stratum.as_deref(), *starts, *bound)
        }
        Cmd::Sample { stratum, samples, box_half } => cmd_sample(cli, &bundle, stratum, *samples, *box_half),
    }
}

fn cmd_verify(cli: &Cli, b: &ExampleBundle, only: &[String], samples: usize) -> Result<bool, UsageError> {
    for o in only {
        if !VERIFY_GROUPS.contains(&o.as_str()) {
            return Err(UsageError(format!("unknown check group `{o}`; known: {}", VERIFY_GROUPS.join(", "))));
        }
    }
    let opts = VerifyOptions { only: only.to_vec(), seed: cli.seed, samples, tol: tolerances(cli), ..Default::default() };
    let report = verify_bundle(b, &opts);
    for item in &report.items {
        match cli.format {
            Format::Text => println!(
                "{} [{}] {}: {}",
                if item.passed { "PASS" } else { "FAIL" },
                item.anchor,
                item.name,
                item.detail.replace('\n', " ")
            ),
            Format::Records => println!(
                "{}",
                J::Obj(vec![
                    ("group", J::s(&item.group)),
                    ("name", J::s(&item.name)),
                    ("anchor", J::s(&item.anchor)),
                    ("passed", J::Bool(item.passed)),
                    ("detail", J::s(&item.detail)),
                ])
                .line()
            ),
        }
    }
    if cli.format == Format::Text {
        println!("{} checks, {} failures", report.items.len(), report.failures());
    }
    Ok(report.passed())
}

fn cmd_pmatrix(cli: &Cli, b: &ExampleBundle, so3: bool) -> Result<bool, UsageError> {
    let pm = if so3 { build_pmatrix(&b.so3_rep, b.so3_basis.clone())? } else { build_pmatrix(&b.rep, b.basis.clone())? };
    let names = pm.vars().names().to_vec();
    if cli.format == Format::Text {
        println!("basis: {} (degrees {:?})", names.join(", "), pm.degrees());
    }
    for i in 0..pm.size() {
        for j in i..pm.size() {
            let e = pm.hat.get(i, j);
            match cli.format {
                Format::Text => println!("P{}{} = {e}", i + 1, j + 1),
                Format::Records => println!(
                    "{}",
                    J::Obj(vec![("row", J::Int(i as i64 + 1)), ("col", J::Int(j as i64 + 1)), ("entry", J::s(e.to_string()))]).line()
                ),
            }
        }
    }
    Ok(true)
}

fn find_param<'a>(b: &'a ExampleBundle, label: &str) -> Result<&'a StratumParam, UsageError> {
    match b.param(label) {
        Some(Ok(p)) => Ok(p),
        Some(Err(e)) => Err(UsageError(format!("stratum {label}: {e}"))),
        None => Err(UsageError(format!(
            "unknown stratum `{label}`; known: {}",
            b.strata.iter().map(|s| s.label.as_str()).collect::<Vec<_>>().join(", ")
        ))),
    }
}

fn cmd_strata(cli: &Cli, b: &ExampleBundle, only: Option<&str>) -> Result<bool, UsageError> {
    let pm = b.stored_pmatrix();
    let mut all_ok = true;
    let labels: Vec<String> = match only {
        Some(l) => vec![l.to_string()],
        None => b.strata.iter().map(|s| s.label.clone()).collect(),
    };
    for label in labels {
        let param = find_param(b, &label)?;
        let active = (param.l() < pm.size()).then_some(&b.active);
        let f = verify_factorization(param, &pm, active)?;
        all_ok &= f.passed();
        let rows: Vec<String> = (0..param.lambda_hat.nrows())
            .map(|i| (0..param.lambda_hat.ncols()).map(|j| param.lambda_hat.get(i, j).to_string()).collect::<Vec<_>>().join(", "))
            .collect();
        let phi: Vec<String> = param.phi.iter().map(|p| p.to_string()).collect();
        let delta: Vec<String> = param.delta_ineqs.iter().map(|p| format!("{p} > 0")).collect();
        match cli.format {
            Format::Text => {
                let title = b.stratum(&label).map(|s| s.title.as_str()).unwrap_or("");
                println!("{label}: {title}");
                println!("  lambda: {}", param.lambda_vars().names().join(", "));
                println!("  Lambda-hat: [{}]", rows.join("; "));
                println!("  phi: ({})", phi.join(", "));
                println!("  Delta: {}", if delta.is_empty() { "all lambda".to_string() } else { delta.join(", ") });
                println!("  factorization: {}", if f.passed() { "holds" } else { "FAILS" });
            }
            Format::Records => println!(
                "{}",
                J::Obj(vec![
                    ("stratum", J::s(&label)),
                    ("lambda", J::Arr(param.lambda_vars().names().iter().map(J::s).collect())),
                    ("lambda_hat", J::Arr(rows.into_iter().map(J::s).collect())),
                    ("phi", J::Arr(phi.into_iter().map(J::s).collect())),
                    ("delta", J::Arr(delta.into_iter().map(J::s).collect())),
                    ("factorization", J::Bool(f.passed())),
                ])
                .line()
            ),
        }
    }
    Ok(all_ok)
}

fn print_verdict(cli: &Cli, v: &StratumVerdict) {
    let outside = !v.psd;
    match cli.format {
        Format::Text => {
            println!("point: {}", fmt_vec(&v.point, TEXT_DIGITS));
            if outside {
                println!("outside orbit space (P-hat not positive semidefinite)");
            } else if !v.on_z {
                println!("outside orbit space (basis relations violated)");
            } else {
                println!("stratum: {}", v.stratum_label.as_deref().unwrap_or("none matched"));
            }
            println!("rank: {}", v.rank);
            println!("eigenvalues: {}", fmt_vec(&v.eigenvalues, TEXT_DIGITS));
            for s in &v.satisfied {
                println!("  {s}");
            }
        }
        Format::Records => println!(
            "{}",
            J::Obj(vec![
                ("point", J::nums(&v.point)),
                ("psd", J::Bool(v.psd)),
                ("on_relations", J::Bool(v.on_z)),
                ("inside", J::Bool(v.inside_orbit_space())),
                ("stratum", J::opt_s(v.stratum_label.as_deref())),
                ("rank", J::Int(v.rank as i64)),
                ("eigenvalues", J::nums(&v.eigenvalues)),
                ("satisfied", J::Arr(v.satisfied.iter().map(J::s).collect())),
            ])
            .line()
        ),
    }
}

fn cmd_classify(cli: &Cli, b: &ExampleBundle, point: &[f64]) -> Result<bool, UsageError> {
    let q = b.basis.len();
    let tol = tolerances(cli);
    let v = if point.len() == q {
        classify_point(&b.stored_pmatrix(), point, &b.relations_ideal(), &b.relations, tol)?
    } else if point.len() == q + 1 {
        let pm = build_pmatrix(&b.so3_rep, b.so3_basis.clone())?;
        classify_point(&pm, point, std::slice::from_ref(&b.so3_relation), &b.so3_table()?, tol)?
    } else {
        return Err(UsageError(format!("expected {q} (O(3)) or {} (SO(3)) coordinates, got {}", q + 1, point.len())));
    };
    print_verdict(cli, &v);
    Ok(true)
}

fn cmd_minimize(
    cli: &Cli,
    b: &ExampleBundle,
    potential: &str,
    grid: &[String],
    stratum: Option<&str>,
    starts: usize,
    bound: f64,
) -> Result<bool, UsageError> {
    let pot = Potential::parse(potential, b.basis.target_vars())?.with_bound(bound);
    let grid = parse_grid(grid, &pot.params)?;
    let params: Vec<&StratumParam> = match stratum {
        Some(l) => vec![find_param(b, l)?],
        None => b.strata.iter().map(|s| find_param(b, &s.label)).collect::<Result<_, _>>()?,
    };
    let opts = MinimizeOptions { starts, seed: cli.seed, ..Default::default() };
    let results = phase_scan(&pot, &params, &b.stored_pmatrix(), &b.relations, &grid, &opts)?;
    for r in &results {
        match cli.format {
            Format::Text => {
                let winner = r.winner.as_deref().unwrap_or("none");
                let tie = if r.tie.is_empty() { String::new() } else { format!(" (tie: {})", r.tie.join(" ")) };
                let names = pot.params.iter().zip(&r.params).map(|(n, v)| format!("{n}={}", fmt_sig(*v, TEXT_DIGITS)));
                println!("{} winner {winner}{tie}", names.collect::<Vec<_>>().join(" "));
                for o in &r.per_stratum {
                    match &o.result {
                        Ok(m) => println!(
                            "  {:<4} {:>12}{} at lambda {}",
                            o.label,
                            fmt_sig(m.value, TEXT_DIGITS),
                            if m.boundary { format!(" boundary -> {}", m.bordering.as_deref().unwrap_or("?")) } else { String::new() },
                            fmt_vec(&m.lambda, TEXT_DIGITS)
                        ),
                        Err(e) => println!("  {:<4} {e}", o.label),
                    }
                }
            }
            Format::Records => {
                let strata = r
                    .per_stratum
                    .iter()
                    .map(|o| match &o.result {
                        Ok(m) => J::Obj(vec![
                            ("stratum", J::s(&o.label)),
                            ("value", J::Num(m.value)),
                            ("lambda", J::nums(&m.lambda)),
                            ("p", J::nums(&m.p)),
                            ("boundary", J::Bool(m.boundary)),
                            ("bordering", J::opt_s(m.bordering.as_deref())),
                        ]),
                        Err(e) => J::Obj(vec![("stratum", J::s(&o.label)), ("error", J::s(e))]),
                    })
                    .collect();
                println!(
                    "{}",
                    J::Obj(vec![
                        ("params", J::Obj(pot.params.iter().zip(&r.params).map(|(n, v)| (leak(n), J::Num(*v))).collect())),
                        ("winner", J::opt_s(r.winner.as_deref())),
                        ("tie", J::Arr(r.tie.iter().map(J::s).collect())),
                        ("margin", r.margin.map_or(J::Null, J::Num)),
                        ("strata", J::Arr(strata)),
                    ])
                    .line()
                );
            }
        }
    }
    Ok(true)
}

/// Parameter names as object keys; the set is small and lives for the run.
fn leak(s: &str) -> &'static str {
    Box::leak(s.to_string().into_boxed_str())
}

fn cmd_sample(cli: &Cli, b: &ExampleBundle, stratum: &str, samples: usize, box_half: f64) -> Result<bool, UsageError> {
    let param = find_param(b, stratum)?;
    if param.l() == 0 {
        return Err(UsageError(format!("stratum {stratum} is a point; nothing to sample")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let s = sample_delta(param, samples, -box_half, box_half, &mut rng)?;
    for lam in &s.accepted {
        let p = param.phi_f64(lam);
        match cli.format {
            Format::Text => println!("lambda {} -> p {}", fmt_vec(lam, TEXT_DIGITS), fmt_vec(&p, TEXT_DIGITS)),
            Format::Records => println!("{}", J::Obj(vec![("lambda", J::nums(lam)), ("p", J::nums(&p))]).line()),
        }
    }
    if cli.format == Format::Text {
        println!("{} accepted of {} draws", s.accepted.len(), s.tried);
    }
    Ok(true)
}
