mod artifacts;
mod config;

use std::error::Error;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde_json::json;

use dimer_nesting::cle_reference::{growth_constants_fit, IncrementLaw};
use dimer_nesting::determinants::{halfplane_cut, laplace_transform_n, log_laplace_derivative_scan, scan_to_csv, Centering, HalfPlane, InverseKernel};
use dimer_nesting::kernels::checks::{annulus_sample, gamma_factor_check, laplacian_check, near_diagonal_scan, parametrix_error, puncture_box};
use dimer_nesting::kernels::reference::OnePuncture;
use dimer_nesting::kernels::{solve_kernel_column, BoundaryData};
use dimer_nesting::lattice::{LatticeDomain, Site};
use dimer_nesting::linalg::fit::linear_fit;
use dimer_nesting::observables::{collect_point_statistics, halfplane_scan, HalfPlaneScan, Welford};
use dimer_nesting::oracle::{bundled_tiny_domains, verify_identities, IDENTITY_TOLERANCE};
use dimer_nesting::sampler::sample_double;

use artifacts::Artifacts;
use config::{apply_config_text, parse_list, parse_real, DomainKind, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(name = "dimer-nesting", version, about = "Double-dimer nesting experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// INI-style config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// worker threads; results do not depend on it
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// comma-separated mesh sizes, fractions allowed (1/64,1/128)
    #[arg(long, global = true)]
    deltas: Option<String>,
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long = "s-grid", global = true)]
    s_grid: Option<String>,
    #[arg(long = "lambda-grid", global = true)]
    lambda_grid: Option<String>,
    #[arg(long = "depths", global = true)]
    depths: Option<String>,
    #[arg(long, global = true)]
    law: Option<String>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// exact identity suite on the bundled enumerable domains
    VerifyExact,
    /// draw double-dimer samples and write loops and heights
    Sample,
    /// Monte-Carlo point statistics at the configured points
    Mc,
    /// determinant formulas on the half-plane: Laplace transform and log-Laplace scan
    Det,
    /// kernel asymptotics and two-puncture parametrix checks
    KernelCheck,
    /// nesting mean/variance scaling, CLT and two-point slopes over a δ scan
    Theorem1,
    /// renewal comparator growth constants
    CleCompare,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::VerifyExact => "verify-exact",
            Command::Sample => "sample",
            Command::Mc => "mc",
            Command::Det => "det",
            Command::KernelCheck => "kernel-check",
            Command::Theorem1 => "theorem1",
            Command::CleCompare => "cle-compare",
        }
    }
}

enum Failure {
    Config(String),
    Runtime(Box<dyn Error>),
    Assertions(Vec<String>),
}

impl<E: Error + 'static> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(Box::new(e))
    }
}

type Outcome = Result<Vec<String>, Failure>;

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig { command: cli.command.name().into(), ..Default::default() };
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        apply_config_text(&mut cfg, &text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    }
    let flag = |name: &str, r: Result<Vec<f64>, String>| r.map_err(|e| Failure::Config(format!("--{name}: {e}")));
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.n {
        cfg.n_samples = n;
    }
    if let Some(v) = &cli.deltas {
        cfg.deltas = flag("deltas", parse_list(v, parse_real))?;
    }
    if let Some(v) = &cli.s_grid {
        cfg.s_grid = flag("s-grid", parse_list(v, parse_real))?;
    }
    if let Some(v) = &cli.lambda_grid {
        cfg.lambda_grid = flag("lambda-grid", parse_list(v, parse_real))?;
    }
    if let Some(v) = &cli.depths {
        cfg.depths = flag("depths", parse_list(v, parse_real))?;
    }
    if let Some(l) = &cli.law {
        cfg.law = l.clone();
    }
    validate(&cfg).map_err(Failure::Config)?;
    Ok(cfg)
}

fn validate(c: &ExperimentConfig) -> Result<(), String> {
    if c.deltas.iter().any(|d| !(*d > 0.0 && *d <= 0.5)) {
        return Err("deltas must lie in (0, 1/2]".into());
    }
    if c.points.is_empty() || c.points.iter().any(|p| !(p[1] > 0.0)) || !(c.det_height > 0.0) {
        return Err("points must lie in the upper half-plane".into());
    }
    match c.command.as_str() {
        "det" if c.s_grid.iter().any(|s| !(0.0..=0.25).contains(s)) => Err("det needs s in [0, 1/4]".into()),
        "det" if c.lambda_grid.iter().any(|l| !(*l > 0.0 && *l <= 3.0)) => Err("lambda grid must lie in (0, 3]".into()),
        "kernel-check" if c.s_grid.iter().any(|s| !(*s > 0.0 && *s < 0.5)) => Err("kernel-check needs s in (0, 1/2)".into()),
        "theorem1" if c.deltas.len() < 2 || c.n_samples < 4 => Err("theorem1 needs at least two deltas and four samples".into()),
        "cle-compare" if IncrementLaw::by_name(&c.law).is_err() => Err(format!("unknown law {:?}", c.law)),
        "cle-compare" if c.depths.len() < 2 || c.depths.windows(2).any(|p| p[1] <= p[0]) || c.depths[0] <= 0.0 => Err("depths must be positive and increasing".into()),
        "sample" | "mc" if c.n_samples == 0 => Err("n must be positive".into()),
        _ => Ok(()),
    }
}

fn build_domain(c: &ExperimentConfig) -> Result<Arc<LatticeDomain>, Failure> {
    let d = &c.domain;
    let cells = |x: f64| (x / d.delta).round() as i32;
    let dom = match d.kind {
        DomainKind::Halfplane => LatticeDomain::build_halfplane_box(d.delta, cells(d.half_width), cells(d.height))?,
        DomainKind::Block => LatticeDomain::block(d.delta, cells(d.width), cells(d.height), Site::new(0, 0))?,
        DomainKind::Temperleyan => {
            let l = 2 * ((cells(d.width) + 1) / 2).max(1);
            let square = [Site::new(0, 0), Site::new(l, 0), Site::new(l, l), Site::new(0, l)];
            LatticeDomain::build_temperleyan(d.delta, &square, Site::new(0, 0))?
        }
    };
    Ok(Arc::new(dom))
}

fn check(failed: &mut Vec<String>, ok: bool, what: String) {
    if !ok {
        failed.push(what);
    }
}

fn cmd_verify_exact(_: &ExperimentConfig, out: &Artifacts) -> Outcome {
    let mut domains = Vec::new();
    let mut failed = Vec::new();
    let mut csv = String::from("domain,check,max_dev,tolerance,pass\n");
    for (name, dom, points) in bundled_tiny_domains() {
        let rep = verify_identities(&dom, &points)?;
        for c in &rep.checks {
            csv.push_str(&format!("{name},{},{:e},{:e},{}\n", c.name, c.max_dev, IDENTITY_TOLERANCE, c.pass));
            check(&mut failed, c.pass, format!("{name}: {}", c.name));
        }
        domains.push(json!({ "name": name, "vertices": dom.vertex_count(), "report": rep.to_json(), "all_pass": rep.all_pass() }));
    }
    out.write_json("verify_exact.json", json!({ "domains": domains, "all_pass": failed.is_empty() }))?;
    out.write_csv("verify_exact.csv", &csv)?;
    finish(failed)
}

fn cmd_sample(c: &ExperimentConfig, out: &Artifacts) -> Outcome {
    let dom = build_domain(c)?;
    let mut summary = Vec::new();
    for i in 0..c.n_samples as u64 {
        let s = sample_double(&dom, c.seed, i)?;
        out.write_json(&format!("sample_{i}.json"), json!({ "index": i, "config": s.to_json() }))?;
        out.write_csv(&format!("height_{i}.csv"), &s.height().to_csv())?;
        summary.push(json!({ "index": i, "loops": s.loops.len() }));
    }
    out.write_json("samples.json", json!({ "domain": dom.to_json(), "samples": summary }))?;
    Ok(Vec::new())
}

fn cmd_mc(c: &ExperimentConfig, out: &Artifacts) -> Outcome {
    let dom = build_domain(c)?;
    let faces: Vec<Site> = c.points.iter().map(|p| dom.face_at(Complex64::new(p[0], p[1]))).collect();
    let pairs: Vec<(Site, Site)> = faces.windows(2).map(|w| (w[0], w[1])).collect();
    let stats = collect_point_statistics(&dom, &faces, &pairs, None, c.n_samples, c.seed)?;
    let mut reports = Vec::new();
    let mut csv = String::from("statistic,x,y,n,mean,stderr\n");
    let mut push = |name: &str, at: serde_json::Value, w: Welford| {
        let r = w.report(name).with_seed(c.seed).with_params(at.clone());
        csv.push_str(&format!("{name},{},{},{},{:.10},{:.10}\n", at["x"], at.get("y").unwrap_or(&json!("")), r.n, r.mean, r.stderr));
        reports.push(r.to_json());
    };
    for (j, f) in faces.iter().enumerate() {
        let at = json!({ "x": format!("{},{}", f.x, f.y) });
        push("nesting", at.clone(), stats.iter().map(|s| s.nesting[j] as f64).collect());
        push("nesting_sq", at.clone(), stats.iter().map(|s| (s.nesting[j] as f64).powi(2)).collect());
        push("height_sq", at.clone(), stats.iter().map(|s| (s.height[j] as f64).powi(2)).collect());
        for &t in &c.t_grid {
            push(&format!("cos_2pi_t_height[t={t}]"), at.clone(), stats.iter().map(|s| (2.0 * PI * t * s.height[j] as f64).cos()).collect());
        }
    }
    for (j, (a, b)) in pairs.iter().enumerate() {
        let at = json!({ "x": format!("{},{}", a.x, a.y), "y": format!("{},{}", b.x, b.y) });
        push("pair_nesting", at.clone(), stats.iter().map(|s| s.pair_nesting[j] as f64).collect());
        push("height_product", at, stats.iter().map(|s| s.pair_height[j] as f64).collect());
    }
    out.write_json("mc.json", json!({ "vertices": dom.vertex_count(), "statistics": reports }))?;
    out.write_csv("mc.csv", &csv)?;
    Ok(Vec::new())
}

fn cmd_det(c: &ExperimentConfig, out: &Artifacts) -> Outcome {
    let v_height = c.det_height;
    let mut deltas = c.deltas.clone();
    deltas.sort_by(|a, b| b.total_cmp(a));
    let mut family = Vec::new();
    let mut lap = String::from("delta,s,value,imag_residue\n");
    for &d in &deltas {
        let face = Site::new(0, ((v_height / d).round() as i32).max(1));
        let cut = halfplane_cut(face)?;
        for &s in &c.s_grid {
            let l = laplace_transform_n(&HalfPlane, &cut, s)?;
            lap.push_str(&format!("{d},{s},{:.12},{:e}\n", l.value, l.imag_residue));
        }
        family.push((d, &HalfPlane as &dyn InverseKernel, cut));
    }
    let rows = log_laplace_derivative_scan(&family, &c.lambda_grid, &Centering::Exact)?;
    let mut failed = Vec::new();
    let finest = *deltas.last().expect("non-empty");
    for r in rows.iter().filter(|r| r.delta == finest) {
        check(&mut failed, r.deviation.abs() <= 0.3, format!("delta={} lambda={}: |value - lambda| = {:.3} > 0.3", r.delta, r.lambda, r.deviation.abs()));
    }
    for &l in &c.lambda_grid {
        let devs: Vec<f64> = rows.iter().filter(|r| r.lambda == l).map(|r| r.deviation.abs()).collect();
        check(&mut failed, devs.windows(2).all(|p| p[1] <= p[0] + 1e-9), format!("lambda={l}: deviation not non-increasing as delta decreases: {devs:?}"));
    }
    out.write_csv("det_laplace.csv", &lap)?;
    out.write_csv("det_scan.csv", &scan_to_csv(&rows))?;
    out.write_json("det_scan.json", json!({ "centering": "exact", "rows": rows, "failed": failed }))?;
    finish(failed)
}

fn cmd_kernel_check(c: &ExperimentConfig, out: &Artifacts) -> Outcome {
    let face = Site::new(-1, -1);
    let mut failed = Vec::new();
    let p = OnePuncture::new(face, c.s_grid[0])?;
    let bs = annulus_sample(&p, 20.0, 50.0, 4);
    let mut gamma = Vec::new();
    for &s in &c.s_grid {
        let rep = gamma_factor_check(s, face, &bs)?;
        check(&mut failed, rep.max_deviation < 0.02, format!("gamma ratio s={s}: {:.4} >= 0.02", rep.max_deviation));
        gamma.push(rep);
    }
    let near = near_diagonal_scan(c.s_grid[0], face, &[20.0, 40.0, 80.0])?;
    check(&mut failed, near.exponent >= 1.0, format!("near-diagonal decay exponent {:.3} < 1", near.exponent));
    let s = c.s_grid[0];
    let w = Site::new(12, 5);
    let (k, cuts) = puncture_box(31, face, s)?;
    let bv = |b: Site| p.kinv_s(b, w);
    let col = solve_kernel_column(&k, w, Some(&BoundaryData { values: &bv, cuts: &cuts }))?;
    let lap = laplacian_check(&col, &p, &cuts).ok_or_else(|| Failure::Config("Laplacian stencil incomplete".into()))?;
    check(&mut failed, lap.puncture_defect < 1e-8, format!("Laplacian defect at the puncture {:e}", lap.puncture_defect));
    let mut para = Vec::new();
    for k in [25, 50, 100] {
        para.push(parametrix_error(0.05, Site::new(-1, 2 * k - 1))?);
    }
    let sups: Vec<f64> = para.iter().map(|r| r.sup_error).collect();
    check(&mut failed, sups.windows(2).all(|p| p[1] < p[0]), format!("parametrix sup error not decreasing in Im v: {sups:?}"));
    let (slope, _, _) = linear_fit(&para.iter().map(|r| r.im_v.ln()).collect::<Vec<_>>(), &sups.iter().map(|e| e.ln()).collect::<Vec<_>>());
    let mut csv = String::from("im_v,sup_error\n");
    for r in &para {
        csv.push_str(&format!("{},{:e}\n", r.im_v, r.sup_error));
    }
    out.write_csv("parametrix.csv", &csv)?;
    out.write_json("kernel_check.json", json!({ "gamma": gamma, "near_diagonal": near, "laplacian": lap, "parametrix": para, "parametrix_log_slope": slope, "failed": failed }))?;
    finish(failed)
}

fn cmd_theorem1(c: &ExperimentConfig, out: &Artifacts) -> Outcome {
    let spec = HalfPlaneScan { deltas: c.deltas.clone(), n: c.n_samples, seed: c.seed, v_height: c.points[0][1], separations: c.separations.clone() };
    let rep = halfplane_scan(&spec)?;
    let (m, v) = (1.0 / (PI * PI), 2.0 / (3.0 * PI * PI));
    let mut failed = Vec::new();
    check(&mut failed, (rep.mean_slope / m - 1.0).abs() <= 0.15, format!("mean slope {:.5} outside 15% of {m:.6}", rep.mean_slope));
    check(&mut failed, (rep.var_slope / v - 1.0).abs() <= 0.20, format!("variance slope {:.5} outside 20% of {v:.6}", rep.var_slope));
    check(&mut failed, rep.ks_nesting < 0.08, format!("KS nesting {:.4} >= 0.08", rep.ks_nesting));
    check(&mut failed, rep.ks_single_height < 0.10, format!("KS single-dimer height {:.4} >= 0.10", rep.ks_single_height));
    if let Some(tp) = &rep.two_point {
        check(&mut failed, (tp.slope_h / m - 1.0).abs() <= 0.15, format!("two-point h slope {:.5} outside 15% of {m:.6}", tp.slope_h));
        check(&mut failed, (tp.slope_n / tp.slope_h - 1.0).abs() <= 0.03, format!("N-fit slope {:.5} differs from h-fit {:.5} by more than 3%", tp.slope_n, tp.slope_h));
    }
    let mut csv = String::from("delta,vertices,n,mean,mean_se,variance,variance_se\n");
    for r in &rep.rows {
        csv.push_str(&format!("{},{},{},{:.8},{:.8},{:.8},{:.8}\n", r.delta, r.vertices, r.mean.n, r.mean.mean, r.mean.stderr, r.variance, r.variance_se));
    }
    out.write_csv("theorem1.csv", &csv)?;
    out.write_json("theorem1.json", json!({ "spec": spec, "report": rep, "targets": { "mean_slope": m, "var_slope": v }, "failed": failed }))?;
    finish(failed)
}

fn cmd_cle_compare(c: &ExperimentConfig, out: &Artifacts) -> Outcome {
    let law = IncrementLaw::by_name(&c.law)?;
    let fit = growth_constants_fit(&law, &c.depths, c.n_samples, c.seed)?;
    let (pm, pv) = fit.predicted;
    let mut failed = Vec::new();
    check(&mut failed, (fit.mean_slope / pm - 1.0).abs() <= 0.05, format!("mean slope {:.5} outside 5% of {pm:.5}", fit.mean_slope));
    check(&mut failed, (fit.var_slope / pv - 1.0).abs() <= 0.05, format!("variance slope {:.5} outside 5% of {pv:.5}", fit.var_slope));
    check(&mut failed, fit.ks < 0.05, format!("KS to normal {:.4} >= 0.05", fit.ks));
    let mut csv = String::from("t,mean,variance\n");
    for r in &fit.rows {
        csv.push_str(&format!("{},{:.8},{:.8}\n", r.t, r.mean, r.variance));
    }
    out.write_csv("cle_compare.csv", &csv)?;
    out.write_json("cle_compare.json", json!({ "fit": fit, "failed": failed }))?;
    finish(failed)
}

fn finish(failed: Vec<String>) -> Outcome {
    if failed.is_empty() {
        Ok(Vec::new())
    } else {
        Err(Failure::Assertions(failed))
    }
}

fn run(cli: &Cli) -> Outcome {
    let cfg = load_config(cli)?;
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().map_err(|e| Failure::Runtime(Box::new(e)))?;
    }
    let out = Artifacts::new(&cli.out, cfg.hash(), cfg.seed)?;
    out.write_json("config.json", json!({ "config": cfg }))?;
    match cli.command {
        Command::VerifyExact => cmd_verify_exact(&cfg, &out),
        Command::Sample => cmd_sample(&cfg, &out),
        Command::Mc => cmd_mc(&cfg, &out),
        Command::Det => cmd_det(&cfg, &out),
        Command::KernelCheck => cmd_kernel_check(&cfg, &out),
        Command::Theorem1 => cmd_theorem1(&cfg, &out),
        Command::CleCompare => cmd_cle_compare(&cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(_) => {
            println!("{}: ok", cli.command.name());
            ExitCode::SUCCESS
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Assertions(items)) => {
            for i in &items {
                eprintln!("FAIL {i}");
            }
            eprintln!("{}: {} assertion(s) failed", cli.command.name(), items.len());
            ExitCode::from(1)
        }
    }
}
