//! `splatprune`: render, quantify, prune, evaluate and audit 3D Gaussian Splatting scenes.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use manifest::{manifest_path_for, ManifestBuilder};
use splatprune::camera::{load_views, save_views};
use splatprune::metrics::eval_views;
use splatprune::model::{load_ply, save_ply};
use splatprune::oracle::{audit, OracleReport, DEFAULT_MAX_GAUSSIANS};
use splatprune::prune::{iterative_prune, prune_ratio, PruneReport};
use splatprune::quant::{histogram, quantify_scene_timed, write_histogram, write_scores, DEFAULT_EPSILON};
use splatprune::raster::{render, write_png, write_raw, RenderOptions, DEFAULT_N_MAX};
use splatprune::synth::{generate, Layering, SynthSpec};
use splatprune::{ErrorBuffer, Execution, GaussianScene, QuantConstants, ViewSet};

#[derive(Parser)]
#[command(name = "splatprune", version, about = "Analytic removal-error pruning for 3D Gaussian Splatting scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render every view of a scene.
    Render(RenderArgs),
    /// Accumulate per-Gaussian removal error over all views.
    Quantify(QuantifyArgs),
    /// Prune by ratio or by (iterative) error budget.
    Prune(PruneArgs),
    /// Compare renders of two scenes.
    Eval(EvalArgs),
    /// Check analytic errors against leave-one-out re-renders.
    Audit(AuditArgs),
    /// Generate a seeded synthetic scene and camera orbit.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Png,
    Raw,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Precision {
    F32,
    F64,
}

impl Precision {
    fn name(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}

fn parse_rgb(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts.as_slice() {
        [v] => Ok([*v; 3]),
        [r, g, b] => Ok([*r, *g, *b]),
        _ => Err("expected `v` or `r,g,b`".into()),
    }
}

#[derive(Args)]
struct SceneInput {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    views: PathBuf,
}

#[derive(Args, Clone)]
struct RenderSettings {
    /// Background color, `v` or `r,g,b`.
    #[arg(long, default_value = "0,0,0", value_parser = parse_rgb)]
    background: [f64; 3],
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(0..=3))]
    sh_degree: u8,
    /// Worker threads; 1 is the deterministic reference, 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args, Clone)]
struct QuantSettings {
    #[command(flatten)]
    render: RenderSettings,
    #[arg(long, default_value_t = DEFAULT_N_MAX)]
    n_max: usize,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, value_enum, default_value = "f32")]
    precision: Precision,
}

impl QuantSettings {
    fn constants(&self) -> QuantConstants {
        QuantConstants {
            epsilon: self.epsilon,
            n_max: self.n_max,
            background: self.render.background,
            sh_degree: self.render.sh_degree as usize,
        }
    }

    fn json(&self) -> serde_json::Value {
        json!({
            "epsilon": self.epsilon,
            "n_max": self.n_max,
            "background": self.render.background,
            "sh_degree": self.render.sh_degree,
            "threads": self.render.threads,
            "precision": self.precision.name(),
        })
    }
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    input: SceneInput,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "png")]
    format: Format,
    #[command(flatten)]
    settings: RenderSettings,
}

#[derive(Args)]
struct QuantifyArgs {
    #[command(flatten)]
    input: SceneInput,
    /// Scores CSV.
    #[arg(long)]
    out: PathBuf,
    /// Optional log-scale histogram CSV.
    #[arg(long)]
    histogram: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    bins: usize,
    #[command(flatten)]
    quant: QuantSettings,
}

#[derive(Args)]
struct PruneArgs {
    #[command(flatten)]
    input: SceneInput,
    /// Pruned PLY.
    #[arg(long)]
    out: PathBuf,
    /// Fraction of Gaussians to remove.
    #[arg(long, conflicts_with = "budget", required_unless_present = "budget")]
    ratio: Option<f64>,
    /// Total error budget.
    #[arg(long)]
    budget: Option<f64>,
    /// Re-quantification cycles sharing the budget.
    #[arg(long, default_value_t = 1, requires = "budget")]
    cycles: usize,
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    quant: QuantSettings,
}

#[derive(Args)]
struct EvalArgs {
    /// Reference scene.
    #[arg(long)]
    scene_a: PathBuf,
    #[arg(long)]
    scene_b: PathBuf,
    #[arg(long)]
    views: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    settings: RenderSettings,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    input: SceneInput,
    /// Per-Gaussian CSV; a JSON summary is written next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MAX_GAUSSIANS)]
    max_gaussians: usize,
    #[command(flatten)]
    quant: QuantSettings,
}

#[derive(Args)]
struct SynthArgs {
    /// JSON synth spec; explicit flags override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, value_parser = |s: &str| s.parse::<Layering>())]
    mode: Option<Layering>,
    #[arg(long)]
    num_views: Option<usize>,
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
    #[arg(long)]
    out_scene: PathBuf,
    #[arg(long)]
    out_views: PathBuf,
}

/// Input problems exit with 2, everything else with 1.
enum Failure {
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Internal(e)
    }
}

type CmdResult = Result<(), Failure>;

fn input<T>(r: Result<T, splatprune::Error>, what: &str, path: &Path) -> Result<T, Failure> {
    r.map_err(|e| {
        // I/O errors already carry the path.
        let context = match e {
            splatprune::Error::Io { .. } => format!("reading {what}"),
            _ => format!("reading {what} {}", path.display()),
        };
        Failure::Input(anyhow::Error::new(e).context(context))
    })
}

fn read_scene(path: &Path) -> Result<GaussianScene, Failure> {
    input(load_ply(path), "scene", path)
}

fn read_views(path: &Path) -> Result<ViewSet, Failure> {
    input(load_views(path), "views", path)
}

fn bad_input(msg: String) -> Failure {
    Failure::Input(anyhow::anyhow!(msg))
}

/// Runs `f` on a pool of `threads` workers; `threads == 1` also selects sequential reduction.
fn with_threads<R: Send>(threads: usize, f: impl FnOnce(Execution) -> R + Send) -> anyhow::Result<R> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if threads > 0 {
        builder = builder.num_threads(threads);
    }
    let pool = builder.build().context("building thread pool")?;
    let execution = if threads == 1 { Execution::Sequential } else { Execution::Parallel };
    Ok(pool.install(|| f(execution)))
}

fn ensure_dir(path: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn file_stem_safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

fn cmd_render(args: RenderArgs) -> CmdResult {
    let manifest = ManifestBuilder::start("render", &[&args.input.scene, &args.input.views]);
    let scene = read_scene(&args.input.scene)?;
    let views = read_views(&args.input.views)?;
    ensure_dir(&args.out_dir)?;
    let opts = RenderOptions {
        background: args.settings.background,
        sh_degree: args.settings.sh_degree as usize,
        ..Default::default()
    };
    let mut outputs = Vec::new();
    for view in views.views() {
        let out = with_threads(args.settings.threads, |_| render::<f32>(&scene, view, &opts))?;
        let stem = file_stem_safe(&view.name);
        let path = match args.format {
            Format::Png => {
                let p = args.out_dir.join(format!("{stem}.png"));
                write_png(&p, out.width, out.height, &out.image).context("writing image")?;
                p
            }
            Format::Raw => {
                let p = args.out_dir.join(format!("{stem}.raw"));
                write_raw(&p, &out.image).context("writing image")?;
                p
            }
        };
        outputs.push(path);
    }
    let params = json!({
        "background": args.settings.background,
        "sh_degree": args.settings.sh_degree,
        "threads": args.settings.threads,
        "format": match args.format { Format::Png => "png", Format::Raw => "raw" },
    });
    println!("rendered {} views to {}", outputs.len(), args.out_dir.display());
    manifest.finish(params, outputs, json!({}), &args.out_dir.join("manifest.json"))?;
    Ok(())
}

fn quantify(scene: &GaussianScene, views: &ViewSet, q: &QuantSettings) -> anyhow::Result<(ErrorBuffer, f64)> {
    let consts = q.constants();
    with_threads(q.render.threads, |exec| match q.precision {
        Precision::F32 => quantify_scene_timed::<f32>(scene, views, &consts, exec),
        Precision::F64 => quantify_scene_timed::<f64>(scene, views, &consts, exec),
    })
}

fn check_quant(q: &QuantSettings) -> Result<(), Failure> {
    if q.n_max == 0 {
        return Err(bad_input("--n-max must be at least 1".into()));
    }
    if !(q.epsilon >= 0.0 && q.epsilon.is_finite()) {
        return Err(bad_input(format!("--epsilon must be finite and non-negative, got {}", q.epsilon)));
    }
    Ok(())
}

fn cmd_quantify(args: QuantifyArgs) -> CmdResult {
    check_quant(&args.quant)?;
    let manifest = ManifestBuilder::start("quantify", &[&args.input.scene, &args.input.views]);
    let scene = read_scene(&args.input.scene)?;
    let views = read_views(&args.input.views)?;
    let (buffer, seconds) = quantify(&scene, &views, &args.quant)?;
    let consts = args.quant.constants();
    write_scores(&buffer, &consts, args.quant.precision.name(), &args.out).context("writing scores")?;
    let mut outputs = vec![args.out.clone()];
    if let Some(path) = &args.histogram {
        let rows = histogram(&buffer, args.bins).map_err(|e| bad_input(e.to_string()))?;
        write_histogram(&rows, path).context("writing histogram")?;
        outputs.push(path.clone());
    }
    let zero = buffer.delta_se.iter().filter(|&&d| d == 0.0).count();
    println!(
        "quantified {} gaussians over {} views in {seconds:.3}s: total {:.6e}, {zero} untouched, {} capped / {} terminated pixels",
        scene.len(),
        views.len(),
        buffer.total(),
        buffer.capped_pixels,
        buffer.terminated_pixels
    );
    let mut params = args.quant.json();
    params["bins"] = json!(args.bins);
    params["views"] = json!(views.len());
    manifest.finish(params, outputs, json!({ "quantify_seconds": seconds }), &manifest_path_for(&args.out))?;
    Ok(())
}

fn cmd_prune(args: PruneArgs) -> CmdResult {
    check_quant(&args.quant)?;
    let manifest = ManifestBuilder::start("prune", &[&args.input.scene, &args.input.views]);
    let scene = read_scene(&args.input.scene)?;
    let views = read_views(&args.input.views)?;
    let consts = args.quant.constants();
    let prune_input = |e: splatprune::Error| match e {
        splatprune::Error::Prune(_) => Failure::Input(e.into()),
        other => Failure::Internal(other.into()),
    };
    let (pruned, report): (GaussianScene, PruneReport) = match (args.ratio, args.budget) {
        (Some(ratio), None) => {
            let (buffer, seconds) = quantify(&scene, &views, &args.quant)?;
            let (pruned, mut report) = prune_ratio(&scene, &buffer, ratio).map_err(prune_input)?;
            report.cycles[0].quant_seconds = Some(seconds);
            (pruned, report)
        }
        (None, Some(budget)) => {
            let cycles = args.cycles;
            with_threads(args.quant.render.threads, |exec| match args.quant.precision {
                Precision::F32 => iterative_prune::<f32>(&scene, &views, budget, cycles, &consts, exec),
                Precision::F64 => iterative_prune::<f64>(&scene, &views, budget, cycles, &consts, exec),
            })?
            .map_err(prune_input)?
        }
        _ => return Err(bad_input("exactly one of --ratio or --budget is required".into())),
    };
    save_ply(&pruned, &args.out).context("writing pruned scene")?;
    let mut outputs = vec![args.out.clone()];
    if let Some(path) = &args.report {
        std::fs::write(path, report.to_json()).with_context(|| format!("writing {}", path.display()))?;
        outputs.push(path.clone());
    }
    println!(
        "pruned {} -> {} gaussians in {} cycle(s)",
        report.initial_count,
        report.final_count,
        report.cycles.len()
    );
    let mut params = args.quant.json();
    params["ratio"] = json!(args.ratio);
    params["budget"] = json!(args.budget);
    params["cycles"] = json!(args.cycles);
    let timings: Vec<_> = report.cycles.iter().map(|c| c.quant_seconds).collect();
    manifest.finish(params, outputs, json!({ "quantify_seconds": timings }), &manifest_path_for(&args.out))?;
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> CmdResult {
    let manifest = ManifestBuilder::start("eval", &[&args.scene_a, &args.scene_b, &args.views]);
    let a = read_scene(&args.scene_a)?;
    let b = read_scene(&args.scene_b)?;
    let views = read_views(&args.views)?;
    let s = &args.settings;
    let report = with_threads(s.threads, |_| eval_views(&a, &b, &views, s.background, s.sh_degree as usize))?
        .map_err(|e| bad_input(e.to_string()))?;
    std::fs::write(&args.out, report.to_json()).with_context(|| format!("writing {}", args.out.display()))?;
    print!("{}", report.to_table());
    let params = json!({ "background": s.background, "sh_degree": s.sh_degree, "threads": s.threads });
    manifest.finish(params, vec![args.out.clone()], json!({}), &manifest_path_for(&args.out))?;
    Ok(())
}

fn cmd_audit(args: AuditArgs) -> CmdResult {
    check_quant(&args.quant)?;
    let manifest = ManifestBuilder::start("audit", &[&args.input.scene, &args.input.views]);
    let scene = read_scene(&args.input.scene)?;
    let views = read_views(&args.input.views)?;
    if scene.len() > args.max_gaussians {
        return Err(bad_input(format!(
            "scene has {} gaussians; audit is limited to --max-gaussians {}",
            scene.len(),
            args.max_gaussians
        )));
    }
    let consts = args.quant.constants();
    let report: OracleReport = with_threads(args.quant.render.threads, |_| match args.quant.precision {
        Precision::F32 => audit::<f32>(&scene, &views, &consts, args.max_gaussians),
        Precision::F64 => audit::<f64>(&scene, &views, &consts, args.max_gaussians),
    })?
    .context("audit")?;
    let summary = args.out.with_extension("json");
    report.write(&args.out, &summary).context("writing audit report")?;
    println!(
        "audit ({}): max rel discrepancy {:.3e} (exact pixels {:.3e}), mean {:.3e}, {} flagged pixels, {} affected gaussians",
        report.precision,
        report.max_rel_discrepancy,
        report.max_rel_discrepancy_exact,
        report.mean_rel_discrepancy,
        report.flagged_pixels,
        report.affected_gaussians
    );
    let mut params = args.quant.json();
    params["max_gaussians"] = json!(args.max_gaussians);
    manifest.finish(params, vec![args.out.clone(), summary], json!({}), &manifest_path_for(&args.out))?;
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> CmdResult {
    let mut inputs: Vec<&Path> = Vec::new();
    let mut spec = match &args.spec {
        Some(path) => {
            inputs.push(path);
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::Input)?;
            serde_json::from_str::<SynthSpec>(&text)
                .with_context(|| format!("parsing {}", path.display()))
                .map_err(Failure::Input)?
        }
        None => SynthSpec::default(),
    };
    let manifest = ManifestBuilder::start("synth", &inputs);
    if let Some(v) = args.seed {
        spec.seed = v;
    }
    if let Some(v) = args.count {
        spec.count = v;
    }
    if let Some(v) = args.mode {
        spec.layering = v;
    }
    if let Some(v) = args.num_views {
        spec.views = v;
    }
    if let Some(v) = args.width {
        spec.width = v;
    }
    if let Some(v) = args.height {
        spec.height = v;
    }
    if spec.count == 0 || spec.views == 0 || spec.width == 0 || spec.height == 0 {
        return Err(bad_input("count, views, width and height must be positive".into()));
    }
    let (scene, views) = generate(&spec);
    save_ply(&scene, &args.out_scene).context("writing scene")?;
    save_views(&views, &args.out_views).context("writing views")?;
    println!("generated {} gaussians and {} views", scene.len(), views.len());
    manifest.finish(
        serde_json::to_value(&spec).context("spec")?,
        vec![args.out_scene.clone(), args.out_views.clone()],
        json!({}),
        &manifest_path_for(&args.out_scene),
    )?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Render(a) => cmd_render(a),
        Command::Quantify(a) => cmd_quantify(a),
        Command::Prune(a) => cmd_prune(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rgb_parsing() {
        assert_eq!(parse_rgb("1"), Ok([1.0; 3]));
        assert_eq!(parse_rgb("0.1, 0.2,0.3"), Ok([0.1, 0.2, 0.3]));
        assert!(parse_rgb("1,2").is_err());
        assert!(parse_rgb("x").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn ratio_and_budget_conflict() {
        let r = Cli::try_parse_from([
            "splatprune", "prune", "--scene", "a", "--views", "b", "--out", "c", "--ratio", "0.5", "--budget", "1",
        ]);
        assert!(r.is_err());
        let r = Cli::try_parse_from(["splatprune", "prune", "--scene", "a", "--views", "b", "--out", "c"]);
        assert!(r.is_err());
    }
}
