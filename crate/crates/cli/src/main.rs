//! Command-line front end for the fraclap toolkit.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use fraclap::bounds::{
    proposition_rayleigh_check, run_suite, two_ball_experiment, verify_theorem2, write_summary_csv,
    BoundReport, SuiteConfig,
};
use fraclap::constants::{ball_exit_time_exact, BoundConstants, StableParams, Variant};
use fraclap::geometry::{rasterize, Domain, Shape};
use fraclap::montecarlo::{estimate_exit, StableSamplerConfig};
use fraclap::operator::assemble;
use fraclap::spectra::{
    eigenpairs, level_set_report, orthogonality_identity_check, spectral_gap, variational_energy,
    write_eigen_csv,
};
use fraclap::Error;

/// Stable indices outside this range run with a warning.
const TRUSTED_ALPHA: (f64, f64) = (0.3, 1.7);

#[derive(Parser)]
#[command(name = "fraclap", version, about = "Dirichlet fractional Laplacian: spectra, bounds, exit times")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand)]
enum Command {
    /// Print the closed-form constants as JSON.
    Constants,
    /// Eigenpairs, bound report and level-set report for one domain.
    Solve,
    /// Expected exit time field of one domain.
    ExitTime,
    /// Verification suite over the standard domains plus the two-ball fit.
    Suite,
    /// Gap decay for two unit balls at growing separation.
    TwoBall {
        /// Separations r > 2.
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
        seps: Vec<f64>,
    },
    /// Monte Carlo exit time and survival curve.
    Mc {
        #[arg(long)]
        paths: Option<usize>,
        /// Walk time step.
        #[arg(long)]
        dt: Option<f64>,
        /// Start point, comma separated; defaults to the domain's inscribed centre.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x0: Option<Vec<f64>>,
        /// Also solve on the grid and report differences.
        #[arg(long)]
        compare: bool,
    },
}

/// Options shared by all subcommands; any of them may also come from `--config`.
#[derive(Args, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Opts {
    #[arg(long, global = true, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// interval:a,b[;c,d…] | box:… | ball:c…,r | balls:…;… | mask:path
    #[arg(long, global = true)]
    domain: Option<String>,
    #[arg(long, global = true)]
    h: Option<f64>,
    /// Target number of inside nodes (sets h when --h is absent).
    #[arg(long, global = true)]
    nodes: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    variant: Option<Variant>,
    /// Output directory for CSV/JSON files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// JSON file with any of the options above; flags take precedence.
    #[arg(long, global = true)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Suite configuration (suite subcommand only).
    #[arg(skip)]
    suite: Option<SuiteConfig>,
}

impl Opts {
    fn merged(self) -> Result<Self, Error> {
        let Some(path) = &self.config else { return Ok(self) };
        let file: Opts = serde_json::from_str(&fs::read_to_string(path)?)?;
        Ok(Opts {
            alpha: self.alpha.or(file.alpha),
            dim: self.dim.or(file.dim),
            domain: self.domain.or(file.domain),
            h: self.h.or(file.h),
            nodes: self.nodes.or(file.nodes),
            seed: self.seed.or(file.seed),
            variant: self.variant.or(file.variant),
            out: self.out.or(file.out),
            workers: self.workers.or(file.workers),
            config: self.config,
            suite: file.suite,
        })
    }

    fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(1.0)
    }

    fn domain(&self) -> Result<Domain, Error> {
        let domain = match &self.domain {
            Some(spec) => Domain::parse_spec(spec)?,
            None => match self.dim.unwrap_or(1) {
                1 => Domain::interval(-1.0, 1.0)?,
                d => Domain::cube(vec![-1.0; d], vec![1.0; d])?,
            },
        };
        if let Some(d) = self.dim {
            if d != domain.dim() {
                return Err(Error::InvalidParams(format!("--dim {d} does not match a {}-dimensional domain", domain.dim())));
            }
        }
        Ok(domain)
    }

    fn params(&self, d: usize) -> Result<StableParams, Error> {
        let p = StableParams::new(self.alpha(), d)?;
        if !(1..=2).contains(&d) {
            return Err(Error::InvalidParams(format!("dimension must be 1 or 2, got {d}")));
        }
        warn_alpha(p.alpha);
        Ok(p)
    }

    /// Grid spacing: `--h`, else from `--nodes`, else diam/1000 (1D) or diam/50 (2D).
    fn spacing(&self, domain: &Domain) -> f64 {
        if let Some(h) = self.h {
            return h;
        }
        if let Some(n) = self.nodes {
            return (domain.volume() / n.max(1) as f64).powf(1.0 / domain.dim() as f64);
        }
        match domain.dim() {
            1 => domain.diameter() / 1000.0,
            _ => domain.diameter() / 50.0,
        }
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<(), Error> {
        if let Some(dir) = &self.out {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }
}

fn warn_alpha(alpha: f64) {
    if alpha < TRUSTED_ALPHA.0 || alpha > TRUSTED_ALPHA.1 {
        eprintln!(
            "warning: alpha = {alpha} lies outside [{}, {}]; discretization error grows near the ends of (0, 2)",
            TRUSTED_ALPHA.0, TRUSTED_ALPHA.1
        );
    }
}

enum Outcome {
    Pass,
    VerdictFailed,
}

fn print_json<T: Serialize>(value: &T) -> Result<Vec<u8>, Error> {
    let text = serde_json::to_string_pretty(value)?;
    println!("{text}");
    Ok(text.into_bytes())
}

fn asserted(report: &BoundReport) -> bool {
    let v = report.verdicts;
    v.thm1 && v.thm2_derived && v.prop
}

fn cmd_constants(opts: &Opts) -> Result<Outcome, Error> {
    let p = opts.params(opts.dim.unwrap_or(1))?;
    let bytes = print_json(&BoundConstants::new(p))?;
    opts.write("constants.json", &bytes)?;
    Ok(Outcome::Pass)
}

fn cmd_solve(opts: &Opts) -> Result<Outcome, Error> {
    let domain = opts.domain()?;
    let p = opts.params(domain.dim())?;
    let h = opts.spacing(&domain);
    let op = assemble(&rasterize(&domain, h)?, p.alpha)?;
    let sol = eigenpairs(&op, 2)?;
    let report = verify_theorem2(&sol, &domain, p);
    let level_set = level_set_report(&sol, &op)?;
    let f: Vec<f64> = sol.phi2().iter().zip(sol.phi1()).map(|(a, b)| a / b).collect();
    let energy = variational_energy(&op, &f, sol.phi1())?;
    let (rayleigh, _) = proposition_rayleigh_check(&op, &domain, p)?;
    let variant = opts.variant.unwrap_or(Variant::Derived);
    let (gap_rhs, gap_ok) = match variant {
        Variant::Stated => (report.thm2_rhs_stated, report.verdicts.thm2_stated),
        Variant::Derived => (report.thm2_rhs_derived, report.verdicts.thm2_derived),
    };
    let summary = json!({
        "nodes": op.n,
        "report": report,
        "level_set": {
            "m": level_set.m,
            "measure_u": level_set.measure_u,
            "nodes_u": level_set.u.len(),
            "sup_s_u": level_set.sup_s_u,
            "sandwich": level_set.sandwich,
            "m_bound_holds": level_set.m_bound_holds,
            "measure_lower_holds": level_set.measure_lower_holds,
        },
        "variational_energy": energy,
        "orthogonality_check": orthogonality_identity_check(&sol),
        "ball_rayleigh_quotient": rayleigh,
        "variant": variant,
        "gap_rhs": gap_rhs,
        "gap_verdict": gap_ok,
    });
    print_json(&summary)?;
    opts.write("bound_report.json", serde_json::to_string_pretty(&report)?.as_bytes())?;
    opts.write("level_set.json", serde_json::to_string_pretty(&level_set)?.as_bytes())?;
    let mut csv = Vec::new();
    write_eigen_csv(&sol, &op, &mut csv)?;
    opts.write("eigen.csv", &csv)?;
    Ok(if asserted(&report) { Outcome::Pass } else { Outcome::VerdictFailed })
}

fn cmd_exit_time(opts: &Opts) -> Result<Outcome, Error> {
    let domain = opts.domain()?;
    let p = opts.params(domain.dim())?;
    let h = opts.spacing(&domain);
    let op = assemble(&rasterize(&domain, h)?, p.alpha)?;
    let field = op.exit_time()?;
    let at = field.argmax();
    let exact = match domain.shape() {
        Shape::Ball(b) => Some(ball_exit_time_exact(p, b.radius, &vec![0.0; p.d])?),
        Shape::Intervals { intervals } if intervals.len() == 1 => {
            Some(ball_exit_time_exact(p, 0.5 * (intervals[0].1 - intervals[0].0), &[0.0])?)
        }
        _ => None,
    };
    print_json(&json!({
        "nodes": op.n,
        "h": h,
        "sup_exit_time": field.max(),
        "argmax": &op.coords()[at][..p.d],
        "ball_centre_exact": exact,
    }))?;
    let mut csv = String::from(if p.d == 1 { "node,x,s\n" } else { "node,x,y,s\n" });
    for (i, (c, s)) in op.coords().iter().zip(&field.values).enumerate() {
        let coords: Vec<String> = c[..p.d].iter().map(|v| v.to_string()).collect();
        csv.push_str(&format!("{i},{},{s:.12e}\n", coords.join(",")));
    }
    opts.write("exit_time.csv", csv.as_bytes())?;
    Ok(Outcome::Pass)
}

fn cmd_suite(opts: &Opts) -> Result<Outcome, Error> {
    let mut config = opts.suite.clone().unwrap_or_default();
    if let Some(a) = opts.alpha {
        config.alphas = vec![a];
    }
    config.alphas.iter().for_each(|&a| warn_alpha(a));
    let results = run_suite(&config)?;
    let mut pass = true;
    let mut lines = Vec::new();
    for r in &results {
        pass &= r.all_pass();
        lines.push(serde_json::to_string(r)?);
    }
    let fit = two_ball_experiment(&[4.0, 8.0, 16.0, 32.0], StableParams::new(1.0, 1)?, 0.01)?;
    let slope_ok = (-2.3..=-1.7).contains(&fit.slope);
    pass &= slope_ok;
    let reports: Vec<BoundReport> = results.iter().map(|r| r.report.clone()).collect();
    let mut csv = Vec::new();
    write_summary_csv(&reports, &mut csv)?;
    csv.extend_from_slice(format!("# two_ball_slope,{:.6},{}\n", fit.slope, if slope_ok { "pass" } else { "fail" }).as_bytes());
    print!("{}", String::from_utf8_lossy(&csv));
    opts.write("summary.csv", &csv)?;
    opts.write("reports.jsonl", (lines.join("\n") + "\n").as_bytes())?;
    opts.write("two_ball.json", serde_json::to_string_pretty(&fit)?.as_bytes())?;
    Ok(if pass { Outcome::Pass } else { Outcome::VerdictFailed })
}

fn cmd_two_ball(opts: &Opts, seps: &[f64]) -> Result<Outcome, Error> {
    let p = opts.params(opts.dim.unwrap_or(1))?;
    let h = opts.h.unwrap_or(if p.d == 1 { 0.01 } else { 0.1 });
    let fit = two_ball_experiment(seps, p, h)?;
    let bytes = print_json(&fit)?;
    opts.write("two_ball.json", &bytes)?;
    let bracketed = fit.points.iter().all(|q| q.lower <= q.gap && q.gap <= q.upper_energy * (1.0 + 1e-10));
    Ok(if bracketed { Outcome::Pass } else { Outcome::VerdictFailed })
}

fn cmd_mc(opts: &Opts, paths: Option<usize>, dt: Option<f64>, x0: Option<Vec<f64>>, compare: bool) -> Result<Outcome, Error> {
    let domain = opts.domain()?;
    let p = opts.params(domain.dim())?;
    let x0 = x0.unwrap_or_else(|| domain.inscribed_radius().1);
    let cfg = StableSamplerConfig::new(p.alpha, p.d, dt.unwrap_or(1e-3), opts.seed.unwrap_or(0), paths.unwrap_or(100_000))?;
    let est = estimate_exit(&cfg, &domain, &x0)?;
    let mut out = json!({ "config": cfg, "estimate": est });
    if compare {
        let h = opts.spacing(&domain);
        let op = assemble(&rasterize(&domain, h)?, p.alpha)?;
        let grid_exit = op.exit_time()?.values[op.nearest_node(&x0)];
        let sol = eigenpairs(&op, 2)?;
        let t0 = est.mean_exit_time;
        let slope = est.survival_log_slope(t0, 3.0 * t0, 9).ok();
        out["grid"] = json!({
            "h": h,
            "exit_time": grid_exit,
            "exit_time_delta": est.mean_exit_time - grid_exit,
            "lambda1": sol.lambda1(),
            "gap": spectral_gap(&sol),
            "survival_log_slope": slope,
            "decay_rate_delta": slope.map(|s| -s - sol.lambda1()),
        });
    }
    let bytes = print_json(&out)?;
    opts.write("mc.json", &bytes)?;
    let mut csv = Vec::new();
    est.write_survival_csv(&mut csv)?;
    opts.write("survival.csv", &csv)?;
    Ok(Outcome::Pass)
}

fn run(cli: Cli) -> Result<Outcome, Error> {
    let opts = cli.opts.merged()?;
    if let Some(w) = opts.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build_global()
            .map_err(|e| Error::InvalidParams(e.to_string()))?;
    }
    match cli.command {
        Command::Constants => cmd_constants(&opts),
        Command::Solve => cmd_solve(&opts),
        Command::ExitTime => cmd_exit_time(&opts),
        Command::Suite => cmd_suite(&opts),
        Command::TwoBall { seps } => cmd_two_ball(&opts, &seps),
        Command::Mc { paths, dt, x0, compare } => cmd_mc(&opts, paths, dt, x0, compare),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::VerdictFailed) => {
            eprintln!("verdict failure");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
