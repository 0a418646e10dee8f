use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{Map, Number, Value};

use gammacop::copulas::{AssembledDistribution, CopulaModel};
use gammacop::densities::model_logpdf;
use gammacop::dependence::{
    kendall_tau_monte_carlo, kendall_tau_of, kendall_tau_quadrature, spearman_rho_monte_carlo, spearman_rho_of,
    spearman_rho_quadrature, DependenceResult,
};
use gammacop::divisibility::{check_infinite_divisibility, DEFAULT_TOL};
use gammacop::polynomial::AffineModel;
use gammacop::quadrature::QuadControl;
use gammacop::sampling::{draw, RngSpec, SampleSpace};
use gammacop::specialfn::{horn_phi3_sum, lauricella_fi_sum, lauricella_fii_sum, pfq_sum, SeriesControl, SeriesSum};
use gammacop::validation::{emit_grid, run_full_validation, ValidationOptions};
use gammacop::{Error, Result};

/// Exit code for a validation run that completed with failing checks.
pub const VALIDATION_FAILED: i32 = 5;

#[derive(Parser, Debug)]
#[command(name = "gammacop", version, about = "Multivariate gamma distributions and their Laplace copulas")]
pub struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Output format for scalar results.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Relative tolerance of the series engine.
    #[arg(long, global = true)]
    rel_tol: Option<f64>,
    /// Term budget of the series engine (overrides GAMMACOP_MAX_TERMS).
    #[arg(long, global = true)]
    max_terms: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Plain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Closed,
    Quad,
    Mc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Space {
    Copula,
    Gamma,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Function {
    Phi3,
    Fi,
    Fii,
    Pfq,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Infinite-divisibility verdict with the b̃ coefficients.
    Check {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Density of the model at a point, or at every row of a CSV file.
    Pdf {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated point.
        #[arg(long, allow_hyphen_values = true, conflicts_with = "batch", required_unless_present = "batch")]
        x: Option<String>,
        /// CSV file with one point per row.
        #[arg(long)]
        batch: Option<PathBuf>,
        /// Report only the log density.
        #[arg(long)]
        log: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Laplace copula cdf, density and conditional cdf.
    Copula {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        v: String,
        #[arg(long)]
        pdf: bool,
        /// `C(v₂ | v₁)` (n = 2 only).
        #[arg(long)]
        conditional: bool,
        /// Skip the divisibility gate and check rectangle masses instead.
        #[arg(long)]
        force: bool,
    },
    /// The model's copula joined with user-given gamma marginals.
    Assembled {
        #[arg(long)]
        model: PathBuf,
        /// Gamma marginals as `scale:shape` pairs, comma-separated.
        #[arg(long)]
        marginals: String,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
    },
    /// Kendall's tau of the bivariate copula.
    Tau(DependenceArgs),
    /// Spearman's rho of the bivariate copula.
    Rho(DependenceArgs),
    /// Draws from the model or its copula as CSV.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        #[arg(long, value_enum, default_value_t = Space::Gamma)]
        space: Space,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs every applicable check; exit code 5 when one fails.
    Validate {
        #[arg(long)]
        model: PathBuf,
        /// Adds the 3-D density quadratures and Monte-Carlo checks.
        #[arg(long)]
        full: bool,
        /// Also writes the report to this file.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Writes copula and density grids as CSV.
        #[arg(long)]
        emit_grid: Option<PathBuf>,
        #[arg(long, default_value_t = 21)]
        grid_size: usize,
        #[arg(long, default_value_t = 20_240_601)]
        seed: u64,
    },
    /// Evaluates one of the hypergeometric series.
    Fn {
        #[arg(value_enum)]
        function: Function,
        /// phi3: `a,b,x,y`; fi: `a,b,c,z1,z2,z3`; fii: `l1,l2,z1,z2,z3,z4`;
        /// pfq: `a1,..;b1,..;z`.
        #[arg(long, allow_hyphen_values = true)]
        args: String,
    },
    /// Re-emits a model in canonical form.
    Normalize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct DependenceArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Closed)]
    method: MethodArg,
    #[arg(long, default_value_t = 1_000_000)]
    n_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    force: bool,
}

/// Seventeen significant digits; non-finite values become `null`.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    Number::from_str(&format!("{x:.16e}")).map(Value::Number).unwrap_or(Value::Null)
}

fn csv_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_list(raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>().map_err(|_| Error::Argument(format!("\"{t}\" is not a number")))
        })
        .collect()
}

pub fn parse_model(path: &Path) -> Result<AffineModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    AffineModel::from_json_str(&text)
}

fn copula_of(model: &AffineModel, force: bool) -> Result<CopulaModel> {
    if force {
        CopulaModel::build_forced(model)
    } else {
        CopulaModel::build(model)
    }
}

fn emit(obj: Map<String, Value>, format: Format) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match format {
        Format::Json => writeln!(out, "{}", Value::Object(obj))?,
        Format::Plain => {
            for (k, v) in obj {
                match v {
                    Value::String(s) => writeln!(out, "{k} {s}")?,
                    other => writeln!(out, "{k} {other}")?,
                }
            }
        }
    }
    Ok(())
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            Box::new(BufWriter::new(fs::File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?))
        }
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn series_object(s: &SeriesSum) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("value".into(), num(s.value()));
    m.insert("ln_abs".into(), num(s.ln_abs));
    m.insert("sign".into(), num(s.sign));
    m.insert("est_error".into(), num(s.est_error));
    m.insert("terms".into(), Value::from(s.terms));
    m
}

fn dependence_object(key: &str, r: &DependenceResult) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert(key.into(), num(r.value));
    m.insert("method".into(), Value::from(r.method.as_str()));
    m.insert("est_error".into(), num(r.est_error));
    if let Some(d) = r.discrepancy {
        m.insert("discrepancy".into(), num(d));
    }
    m
}

/// Runs the parsed command and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    let mut series = SeriesControl::from_env()?;
    if let Some(t) = cli.global.rel_tol {
        series = series.with_rel_tol(t);
    }
    if let Some(m) = cli.global.max_terms {
        series = series.with_max_terms(m);
    }
    series.validate()?;
    let format = cli.global.format;
    match cli.command {
        Command::Check { model, tol } => {
            let model = parse_model(&model)?;
            let r = check_infinite_divisibility(model.poly(), tol)?;
            let mut m = Map::new();
            m.insert("divisible".into(), Value::from(r.divisible));
            m.insert("singleton_ok".into(), Value::from(r.singleton_ok));
            m.insert("btilde_ok".into(), Value::from(r.btilde_ok));
            m.insert("tol".into(), num(r.tol));
            let dual: Map<String, Value> = r.dual.iter().map(|(s, v)| (s.to_string(), num(v))).collect();
            m.insert("dual".into(), Value::Object(dual));
            let bt: Map<String, Value> = r.btilde.iter().map(|(s, v)| (s.to_string(), num(*v))).collect();
            m.insert("btilde".into(), Value::Object(bt));
            m.insert("violations".into(), r.violations.iter().map(|s| Value::from(s.to_string())).collect());
            emit(m, format)?;
        }
        Command::Pdf { model, x, batch, log, out } => {
            let model = parse_model(&model)?;
            if let Some(x) = x {
                let x = parse_list(&x)?;
                let lp = model_logpdf(&model, &x, &series)?;
                let mut m = Map::new();
                m.insert("x".into(), x.iter().map(|&v| num(v)).collect());
                m.insert("logpdf".into(), num(lp));
                if !log {
                    m.insert("pdf".into(), num(lp.exp()));
                }
                emit(m, format)?;
            } else if let Some(path) = batch {
                let text = fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                let mut w = sink(out.as_deref())?;
                let n = model.dim();
                let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
                header.push("logpdf".into());
                if !log {
                    header.push("pdf".into());
                }
                writeln!(w, "{}", header.join(","))?;
                for (lineno, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') || (lineno == 0 && line.starts_with('x')) {
                        continue;
                    }
                    let x = parse_list(line).map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
                    let lp = model_logpdf(&model, &x, &series)?;
                    let mut row: Vec<String> = x.iter().map(|&v| csv_num(v)).collect();
                    row.push(csv_num(lp));
                    if !log {
                        row.push(csv_num(lp.exp()));
                    }
                    writeln!(w, "{}", row.join(","))?;
                }
                w.flush()?;
            }
        }
        Command::Copula { model, v, pdf, conditional, force } => {
            let model = parse_model(&model)?;
            let c = copula_of(&model, force)?;
            let v = parse_list(&v)?;
            let mut m = Map::new();
            m.insert("cdf".into(), num(c.cdf(&v)?));
            if pdf {
                m.insert("pdf".into(), num(c.pdf(&v)?));
            }
            if conditional {
                if c.dim() != 2 || v.len() != 2 {
                    return Err(Error::Argument("--conditional needs a bivariate model".into()));
                }
                m.insert("conditional".into(), num(c.conditional_cdf(v[0], v[1])?));
            }
            m.insert("forced".into(), Value::from(c.is_forced()));
            emit(m, format)?;
        }
        Command::Assembled { model, marginals, x } => {
            let model = parse_model(&model)?;
            let marg = marginals
                .split(',')
                .map(|pair| {
                    let (p, a) = pair
                        .split_once(':')
                        .ok_or_else(|| Error::Argument(format!("marginal \"{pair}\" is not scale:shape")))?;
                    let p: f64 = p.trim().parse().map_err(|_| Error::Argument(format!("bad scale in \"{pair}\"")))?;
                    let a: f64 = a.trim().parse().map_err(|_| Error::Argument(format!("bad shape in \"{pair}\"")))?;
                    Ok((p, a))
                })
                .collect::<Result<Vec<_>>>()?;
            let d = AssembledDistribution::new(CopulaModel::build(&model)?, marg)?;
            let x = parse_list(&x)?;
            let lp = d.logpdf(&x)?;
            let mut m = Map::new();
            m.insert("cdf".into(), num(d.cdf(&x)?));
            m.insert("logpdf".into(), num(lp));
            m.insert("pdf".into(), num(lp.exp()));
            emit(m, format)?;
        }
        Command::Tau(a) => {
            let c = copula_of(&parse_model(&a.model)?, a.force)?;
            let r = match a.method {
                MethodArg::Closed => kendall_tau_of(&c, &series)?,
                MethodArg::Quad => kendall_tau_quadrature(&c, &QuadControl::with_rel_tol(1e-11))?,
                MethodArg::Mc => kendall_tau_monte_carlo(&c, a.n_samples, RngSpec::new(a.seed))?,
            };
            emit(dependence_object("tau", &r), format)?;
        }
        Command::Rho(a) => {
            let c = copula_of(&parse_model(&a.model)?, a.force)?;
            let r = match a.method {
                MethodArg::Closed => spearman_rho_of(&c, &series)?,
                MethodArg::Quad => spearman_rho_quadrature(&c, &QuadControl::with_rel_tol(1e-11))?,
                MethodArg::Mc => spearman_rho_monte_carlo(&c, a.n_samples, RngSpec::new(a.seed))?,
            };
            emit(dependence_object("rho", &r), format)?;
        }
        Command::Sample { model, n, seed, stream, space, out } => {
            let model = parse_model(&model)?;
            let sp = if space == Space::Copula { SampleSpace::Copula } else { SampleSpace::Gamma };
            let data = draw(&model, sp, n, RngSpec::with_stream(seed, stream))?;
            let d = model.dim();
            let mut w = sink(out.as_deref())?;
            let prefix = if space == Space::Copula { "v" } else { "x" };
            let header: Vec<String> = (1..=d).map(|i| format!("{prefix}{i}")).collect();
            writeln!(w, "{}", header.join(","))?;
            for row in data.chunks(d) {
                let cells: Vec<String> = row.iter().map(|&v| csv_num(v)).collect();
                writeln!(w, "{}", cells.join(","))?;
            }
            w.flush()?;
        }
        Command::Validate { model, full, json, emit_grid: grid, grid_size, seed } => {
            let model = parse_model(&model)?;
            let report = run_full_validation(&model, &ValidationOptions { series, full, seed });
            let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Numeric(e.to_string()))?;
            if let Some(p) = json {
                fs::write(&p, &text).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            }
            if let Some(p) = grid {
                let mut w = sink(Some(&p))?;
                emit_grid(&model, grid_size, &series, &mut w)?;
                w.flush()?;
            }
            match format {
                Format::Json => println!("{text}"),
                Format::Plain => {
                    for c in &report.checks {
                        println!("{:?} {} {:e} {:e} {:e}", c.status, c.name, c.target, c.computed, c.tolerance);
                    }
                    println!("overall {}", if report.overall { "pass" } else { "fail" });
                }
            }
            if !report.overall {
                return Ok(VALIDATION_FAILED);
            }
        }
        Command::Fn { function, args } => {
            let s = match function {
                Function::Pfq => {
                    let parts: Vec<&str> = args.split(';').collect();
                    if parts.len() != 3 {
                        return Err(Error::Argument("pfq arguments are `a1,..;b1,..;z`".into()));
                    }
                    let list = |t: &str| if t.trim().is_empty() { Ok(Vec::new()) } else { parse_list(t) };
                    let z = parse_list(parts[2])?;
                    if z.len() != 1 {
                        return Err(Error::Argument("pfq takes one argument z".into()));
                    }
                    pfq_sum(&list(parts[0])?, &list(parts[1])?, z[0], &series)?
                }
                other => {
                    let v = parse_list(&args)?;
                    let want = match other {
                        Function::Phi3 => 4,
                        _ => 6,
                    };
                    if v.len() != want {
                        return Err(Error::Argument(format!("expected {want} arguments, got {}", v.len())));
                    }
                    match other {
                        Function::Phi3 => horn_phi3_sum(v[0], v[1], v[2], v[3], &series)?,
                        Function::Fi => lauricella_fi_sum(v[0], v[1], v[2], v[3], v[4], v[5], &series)?,
                        _ => lauricella_fii_sum(v[0], v[1], v[2], v[3], v[4], v[5], &series)?,
                    }
                }
            };
            emit(series_object(&s), format)?;
        }
        Command::Normalize { model, out } => {
            let model = parse_model(&model)?;
            let text =
                serde_json::to_string_pretty(&model.to_json_value()).map_err(|e| Error::Numeric(e.to_string()))?;
            let mut w = sink(out.as_deref())?;
            writeln!(w, "{text}")?;
            w.flush()?;
        }
    }
    Ok(0)
}
