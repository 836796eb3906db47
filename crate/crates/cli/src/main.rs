use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use copulab::copula::{parse_copula_spec, validate};
use copulab::dependence::{coefficients, perturbation_identities, Coefficient};
use copulab::mixing::{decay_table, fmt_value};
use copulab::noise::{
    c5_general, c6_general, c7_general, compare_c6_table, parse_noise_kind, ClosedNoise, MarginalModel,
    NoiseKind,
};
use copulab::perturbations::{PerturbationKind, PerturbationParams};
use copulab::simulator::{empirical_beta, rank_spearman, reachability_map, sample_chain_from};
use copulab::{CopulaModel, Error};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "copulab", version, about = "Copula-based Markov chain laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check boundary conditions and 2-increasingness on a grid.
    Validate(ValidateArgs),
    /// Dependence coefficients (ρ_S, τ, β, γ, λ_L, λ_U).
    Coeffs(ModelArgs),
    /// β/φ/ψ decay table of a (perturbed) chain.
    Mixing(MixingArgs),
    /// Coefficients of a perturbation against their predicted values.
    PerturbEval(PerturbEvalArgs),
    /// CDF of a noise-induced copula on a grid of nodes.
    NoiseEval(NoiseArgs),
    /// Sample a chain and dump it as a single column.
    Simulate(SimulateArgs),
    /// 0/1 map of cells reachable in one or two steps.
    Regions(RegionArgs),
}

#[derive(Args)]
struct Output {
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    /// Copula spec: inline JSON or a path to a JSON file.
    #[arg(long)]
    copula: String,
    /// Perturbation applied first, e.g. `tilde:0.3`, `hat:0.5`, `dolati`.
    #[arg(long)]
    perturb: Option<String>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 64)]
    grid: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args)]
struct MixingArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 4)]
    n_max: usize,
    #[arg(long, default_value_t = 128)]
    grid: usize,
}

#[derive(Args)]
struct PerturbEvalArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Largest accepted discrepancy between computed and predicted values.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

#[derive(Args)]
struct NoiseArgs {
    /// `c5`, `c6`, `c7`, or a closed form: `c5-m-uniform`, `c6-indep-uniform`.
    #[arg(long)]
    noise: String,
    /// Copula of `(X, Y)` for the general forms (independence by default).
    #[arg(long)]
    copula: Option<String>,
    /// `F1,F2,F3` for c5/c6, `F1,F2,G1,G2` for c7; e.g. `uniform:0,1,normal:0,1,...`.
    #[arg(long)]
    marginals: Option<String>,
    #[arg(long, default_value_t = 16)]
    grid: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 100_000)]
    len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fixed initial state instead of a uniform draw.
    #[arg(long)]
    start: Option<f64>,
}

#[derive(Args)]
struct RegionArgs {
    /// Closed noise copula (`c5-m-uniform`, `c6-indep-uniform`).
    #[arg(long, conflicts_with = "copula")]
    noise: Option<String>,
    #[arg(long)]
    copula: Option<String>,
    #[arg(long, default_value_t = 128)]
    resolution: usize,
    /// Emit the two-step map instead of the one-step map.
    #[arg(long)]
    two_step: bool,
    /// Also write a gnuplot script rendering the map.
    #[arg(long)]
    plot: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

/// Outcome classes mapped to exit codes.
#[derive(Debug)]
enum Failure {
    /// Malformed input (1).
    Input(String),
    /// A validity or identity check failed (2).
    Check(String),
    /// A numeric procedure did not converge (3).
    NonConvergent(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Check(_) => 2,
            Failure::NonConvergent(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Check(m) | Failure::NonConvergent(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::NotACopula(_)
            | Error::NotADensity { .. }
            | Error::MarginalMismatch(_)
            | Error::NonCommuting { .. } => Failure::Check(msg),
            Error::NoDensity(_) => Failure::NonConvergent(msg),
            _ => Failure::Input(msg),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(format!("io: {e}"))
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Validate(a) => cmd_validate(a),
        Command::Coeffs(a) => cmd_coeffs(a),
        Command::Mixing(a) => cmd_mixing(a),
        Command::PerturbEval(a) => cmd_perturb_eval(a),
        Command::NoiseEval(a) => cmd_noise_eval(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Regions(a) => cmd_regions(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn load_copula(spec: &str) -> Result<CopulaModel, Failure> {
    let text = if spec.trim_start().starts_with('{') {
        spec.to_string()
    } else {
        fs::read_to_string(spec)
            .map_err(|e| Failure::Input(format!("malformed spec field `copula`: cannot read `{spec}`: {e}")))?
    };
    Ok(parse_copula_spec(&text)?)
}

fn parse_perturb(p: &str) -> Result<PerturbationParams, Failure> {
    Ok(p.parse::<PerturbationParams>()?)
}

fn load_model(args: &ModelArgs) -> Result<CopulaModel, Failure> {
    let base = load_copula(&args.copula)?;
    match &args.perturb {
        Some(p) => Ok(parse_perturb(p)?.apply(&base)?),
        None => Ok(base),
    }
}

fn check_grid(grid: usize) -> Outcome {
    if !(16..=1024).contains(&grid) {
        return Err(Failure::Input(format!(
            "malformed spec field `grid`: {grid} outside [16, 1024]"
        )));
    }
    Ok(())
}

/// Collects CSV text and writes it in one go, so failures leave no partial
/// output behind.
struct Csv {
    text: String,
}

impl Csv {
    fn new(command: &str, meta: &[(&str, String)]) -> Self {
        let mut text = format!("# copulab {VERSION} {command}\n");
        for (k, v) in meta {
            text.push_str(&format!("# {k}: {v}\n"));
        }
        Csv { text }
    }

    fn line(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    fn write(self, out: &Output) -> Outcome {
        emit(&self.text, out.out.as_ref())
    }
}

fn emit(text: &str, path: Option<&PathBuf>) -> Outcome {
    match path {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_validate(a: ValidateArgs) -> Outcome {
    check_grid(a.grid)?;
    let model = load_model(&a.model)?;
    let r = validate(&model, a.grid, a.tol);
    let mut csv = Csv::new(
        "validate",
        &[("model", model.label()), ("grid", a.grid.to_string()), ("tol", format!("{:e}", a.tol))],
    );
    csv.line(&["check,value,u,v,passed".into()]);
    let boundary_ok = r.max_boundary_violation <= a.tol;
    let rect_ok = r.min_rectangle_mass >= -a.tol;
    csv.line(&[
        "boundary".into(),
        fmt_value(r.max_boundary_violation),
        fmt_value(r.boundary_at.0),
        fmt_value(r.boundary_at.1),
        boundary_ok.to_string(),
    ]);
    csv.line(&[
        "rectangle".into(),
        fmt_value(r.min_rectangle_mass),
        fmt_value(r.rectangle_at.0),
        fmt_value(r.rectangle_at.1),
        rect_ok.to_string(),
    ]);
    csv.write(&a.model.output)?;
    eprintln!(
        "validate {}: boundary {:.3e}, min rectangle mass {:.3e} -> {}",
        model.label(),
        r.max_boundary_violation,
        r.min_rectangle_mass,
        if r.passed { "ok" } else { "FAILED" }
    );
    if r.passed {
        Ok(())
    } else {
        Err(Failure::Check(format!("{} is not a copula on a {}-grid", model.label(), a.grid)))
    }
}

fn cmd_coeffs(a: ModelArgs) -> Outcome {
    let model = load_model(&a)?;
    let reports = coefficients(&model);
    let mut csv = Csv::new("coeffs", &[("model", model.label())]);
    csv.line(&["coefficient,value,method,grid,tol".into()]);
    let mut unconverged = Vec::new();
    for r in &reports {
        csv.line(&[
            r.name.name().into(),
            fmt_value(r.value),
            r.method.name().into(),
            r.grid.to_string(),
            fmt_value(r.tol),
        ]);
        if !r.converged {
            unconverged.push(r.name.name());
        }
    }
    csv.write(&a.output)?;
    for r in &reports {
        eprintln!("{} = {:.6} ({})", r.name.name(), r.value, r.method.name());
    }
    if unconverged.is_empty() {
        Ok(())
    } else {
        Err(Failure::NonConvergent(format!(
            "extrapolation did not settle for {}",
            unconverged.join(", ")
        )))
    }
}

fn cmd_mixing(a: MixingArgs) -> Outcome {
    check_grid(a.grid)?;
    if a.n_max == 0 || a.n_max > 8 {
        return Err(Failure::Input(format!(
            "malformed spec field `n-max`: {} outside [1, 8]",
            a.n_max
        )));
    }
    let base = load_copula(&a.model.copula)?;
    let pert = a.model.perturb.as_deref().map(parse_perturb).transpose()?;
    let table = decay_table(&base, pert, a.n_max, a.grid)?;
    let mut csv = Csv::new(
        "mixing",
        &[
            ("model", base.label()),
            ("perturbation", pert.map_or("none".into(), |p| p.to_string())),
            ("grid", a.grid.to_string()),
            ("tol", format!("{:e}", copulab::mixing::FLOOR)),
        ],
    );
    let mut body = Vec::new();
    table.write_csv(&mut body)?;
    csv.text.push_str(&String::from_utf8_lossy(&body));
    csv.write(&a.model.output)?;
    match table.fitted_rate {
        Some(f) => eprintln!("beta rate {:.6} (R^2 {:.6})", f.rate, f.r_squared),
        None => eprintln!("beta rate: fewer than 3 positive terms"),
    }
    Ok(())
}

fn cmd_perturb_eval(a: PerturbEvalArgs) -> Outcome {
    let Some(p) = a.model.perturb.as_deref() else {
        return Err(Failure::Input("malformed spec field `perturb`: required".into()));
    };
    let pert = parse_perturb(p)?;
    let base = load_copula(&a.model.copula)?;
    let mut csv = Csv::new(
        "perturb-eval",
        &[("model", base.label()), ("perturbation", pert.to_string()), ("tol", format!("{:e}", a.tol))],
    );
    csv.line(&["coefficient,perturbation,computed,predicted,discrepancy".into()]);
    match pert.kind {
        PerturbationKind::TildePi | PerturbationKind::HatM => {
            let ids = perturbation_identities(&base, pert.theta)?;
            for c in ids.checks.iter().filter(|c| c.perturbation == pert.kind.name()) {
                csv.line(&[
                    c.coefficient.name().into(),
                    c.perturbation.into(),
                    fmt_value(c.computed),
                    fmt_value(c.predicted),
                    fmt_value(c.discrepancy()),
                ]);
            }
            let worst = ids
                .checks
                .iter()
                .filter(|c| c.perturbation == pert.kind.name())
                .map(|c| c.discrepancy())
                .fold(0.0, f64::max);
            csv.write(&a.model.output)?;
            eprintln!("{pert}: largest discrepancy {worst:.3e}");
            if worst > a.tol {
                return Err(Failure::Check(format!("discrepancy {worst:.3e} exceeds {}", a.tol)));
            }
        }
        PerturbationKind::Mesiar | PerturbationKind::Dolati => {
            let model = pert.apply(&base)?;
            for r in coefficients(&model) {
                if r.name == Coefficient::KendallTau {
                    continue;
                }
                csv.line(&[
                    r.name.name().into(),
                    pert.kind.name().into(),
                    fmt_value(r.value),
                    "nan".into(),
                    "nan".into(),
                ]);
            }
            csv.write(&a.model.output)?;
            eprintln!("{pert}: {} is a valid copula", model.label());
        }
    }
    Ok(())
}

/// Split `uniform:0,1,normal:0,2` into `["uniform:0,1", "normal:0,2"]`:
/// a token containing `:` starts a new marginal.
fn split_marginals(s: &str) -> Result<Vec<MarginalModel>, Failure> {
    let mut groups: Vec<String> = Vec::new();
    for tok in s.split(',') {
        let tok = tok.trim();
        if tok.contains(':') || groups.is_empty() {
            groups.push(tok.to_string());
        } else {
            let last = groups.last_mut().expect("non-empty");
            last.push(',');
            last.push_str(tok);
        }
    }
    groups
        .iter()
        .map(|g| g.parse::<MarginalModel>().map_err(Failure::from))
        .collect()
}

enum NoiseChoice {
    Closed(ClosedNoise),
    General(NoiseKind),
}

fn parse_noise(s: &str) -> Result<NoiseChoice, Failure> {
    match s.trim().to_ascii_lowercase().as_str() {
        "c5-m-uniform" => Ok(NoiseChoice::Closed(ClosedNoise::C5MUniform)),
        "c6-indep-uniform" => Ok(NoiseChoice::Closed(ClosedNoise::C6IndepUniform)),
        other => Ok(NoiseChoice::General(parse_noise_kind(other)?)),
    }
}

fn noise_model(a: &NoiseArgs) -> Result<CopulaModel, Failure> {
    match parse_noise(&a.noise)? {
        NoiseChoice::Closed(c) => Ok(c.model()),
        NoiseChoice::General(kind) => {
            let base = match &a.copula {
                Some(c) => load_copula(c)?,
                None => CopulaModel::Pi,
            };
            let want = if kind == NoiseKind::C7 { 4 } else { 3 };
            let ms = match &a.marginals {
                Some(m) => split_marginals(m)?,
                None => vec![MarginalModel::unit_uniform(); want],
            };
            if ms.len() != want {
                return Err(Failure::Input(format!(
                    "malformed spec field `marginals`: {} needs {want} marginals, got {}",
                    a.noise,
                    ms.len()
                )));
            }
            let nc = match kind {
                NoiseKind::C5 => c5_general(&base, &ms[0], &ms[1], &ms[2])?,
                NoiseKind::C6 => c6_general(&base, &ms[0], &ms[1], &ms[2])?,
                NoiseKind::C7 => c7_general(&base, &ms[0], &ms[1], &ms[2], &ms[3])?,
            };
            Ok(nc.into_model())
        }
    }
}

fn cmd_noise_eval(a: NoiseArgs) -> Outcome {
    if a.grid == 0 || a.grid > 1024 {
        return Err(Failure::Input(format!("malformed spec field `grid`: {} outside [1, 1024]", a.grid)));
    }
    let model = noise_model(&a)?;
    let n = a.grid;
    let h = 1.0 / n as f64;
    let rows = copulab::par::map_range(n + 1, |i| {
        (0..=n)
            .map(|j| {
                let (u, v) = (i as f64 * h, j as f64 * h);
                format!("{},{},{}", fmt_value(u), fmt_value(v), fmt_value(model.cdf(u, v)))
            })
            .collect::<Vec<_>>()
    });
    let mut csv = Csv::new("noise-eval", &[("model", model.label()), ("grid", n.to_string())]);
    csv.line(&["u,v,cdf".into()]);
    for line in rows.into_iter().flatten() {
        csv.line(&[line]);
    }
    csv.write(&a.output)?;
    if matches!(parse_noise(&a.noise)?, NoiseChoice::Closed(ClosedNoise::C6IndepUniform)) {
        let cmp = compare_c6_table(n.max(16));
        eprintln!(
            "closed form vs published table: max |diff| {:.3e} at ({:.4}, {:.4})",
            cmp.max_abs_diff, cmp.at.0, cmp.at.1
        );
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Outcome {
    if a.len < 2 {
        return Err(Failure::Input(format!("malformed spec field `len`: {} is below 2", a.len)));
    }
    if let Some(s) = a.start {
        if !(0.0..=1.0).contains(&s) {
            return Err(Failure::Input(format!("malformed spec field `start`: {s} outside [0, 1]")));
        }
    }
    let model = load_model(&a.model)?;
    let chain = sample_chain_from(&model, a.len, a.seed, 0, a.start)?;
    let mut buf = Vec::new();
    chain.write_csv(&mut buf)?;
    emit(&String::from_utf8_lossy(&buf), a.model.output.out.as_ref())?;
    let rho = rank_spearman(&chain.lagged_pairs(1));
    let bins = ((a.len as f64 / 10.0).sqrt() as usize).clamp(2, 32);
    match empirical_beta(&chain, 1, bins) {
        Ok(b) => eprintln!(
            "lag-1 spearman {rho:.4}; beta_hat {:.4} (raw {:.4}, floor {:.4}, {bins} bins)",
            b.calibrated, b.raw, b.noise_floor
        ),
        Err(_) => eprintln!("lag-1 spearman {rho:.4}"),
    }
    Ok(())
}

fn cmd_regions(a: RegionArgs) -> Outcome {
    check_grid(a.resolution)?;
    let model = match (&a.noise, &a.copula) {
        (Some(n), _) => match parse_noise(n)? {
            NoiseChoice::Closed(c) => c.model(),
            NoiseChoice::General(_) => {
                return Err(Failure::Input(
                    "malformed spec field `noise`: regions need a closed form (c5-m-uniform, c6-indep-uniform)".into(),
                ))
            }
        },
        (None, Some(c)) => load_copula(c)?,
        (None, None) => return Err(Failure::Input("malformed spec field `copula`: give --noise or --copula".into())),
    };
    let map = reachability_map(&model, a.resolution)?;
    let mut csv = Csv::new(
        "regions",
        &[
            ("model", model.label()),
            ("grid", a.resolution.to_string()),
            ("tol", format!("{:e}", copulab::simulator::REACH_THRESHOLD)),
            ("steps", if a.two_step { "2" } else { "1" }.into()),
            ("rows", "current state u (top = 0)".into()),
        ],
    );
    let mut body = Vec::new();
    map.write_csv(a.two_step, &mut body)?;
    csv.text.push_str(&String::from_utf8_lossy(&body));
    csv.write(&a.output)?;
    if let Some(script) = &a.plot {
        let data = a
            .output
            .out
            .as_ref()
            .map_or("regions.csv".to_string(), |p| p.display().to_string());
        emit(&gnuplot_script(&data, a.resolution), Some(script))?;
    }
    eprintln!(
        "reachable cells: one step {:.4}, two steps {:.4}",
        map.one_step_fraction(),
        map.two_step_fraction()
    );
    Ok(())
}

fn gnuplot_script(data: &str, n: usize) -> String {
    format!(
        "set datafile separator ','\n\
         set datafile commentschars '#'\n\
         set size square\n\
         set xrange [0:1]\nset yrange [0:1]\n\
         set xlabel 'u'\nset ylabel 'v'\n\
         set palette defined (0 'white', 1 'gray40')\n\
         unset colorbox\n\
         plot '{data}' matrix using (($2 + 0.5) / {n}.0):(($1 + 0.5) / {n}.0):3 with image notitle\n"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marginals_regroup_on_colons() {
        let ms = split_marginals("uniform:0,1,normal:0,2,exponential:3").unwrap();
        assert_eq!(ms.len(), 3);
        assert_eq!(ms[1], MarginalModel::normal(0.0, 2.0).unwrap());
        assert!(split_marginals("uniform:0").is_err());
    }
}
