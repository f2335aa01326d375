//! Command-line front end. [`cli_main`] parses arguments, runs one
//! subcommand and maps the outcome to an exit status: 0 success, 1 usage
//! error, 2 data error, 3 numerical abort.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use log::info;
use serde::Serialize;

use crate::asset_io::{load_config, load_mesh, save_mask, save_mesh, save_texture, RunConfig, TextureImage};
use crate::error::{Error, Result};
use crate::metrics::{bbox_diagonal, chamfer_l1, chamfer_l2, f_score, part_distance, sample_surface, symmetry_distance};
use crate::part_field::ellipsoids_to_json;
use crate::pipeline::{
    check_part_alphabets, ledger_to_json, load_asset, part_ellipsoids, stylize_joint, transfer_geometry,
    transfer_texture, Asset, RunManifest,
};
use crate::render::{camera_ring, rasterize};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "MESHSTYLE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "meshstyle", version, about = "Part-aware geometry and texture style transfer between textured meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit and refine one ellipsoid per labeled part of the source mesh.
    FitEllipsoids(Common),
    /// Warp the source mesh toward the target shape.
    TransferGeometry(Common),
    /// Recolor the source texture toward the target's color statistics.
    TransferTexture(Common),
    /// Joint geometry and texture stylization.
    Stylize(Common),
    /// Render the source mesh from a ring of cameras.
    Render(Common),
    /// Compare a predicted mesh against a ground-truth mesh.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Source mesh (OBJ; texture via its material library).
    #[arg(long)]
    source: PathBuf,
    /// Target mesh.
    #[arg(long)]
    target: Option<PathBuf>,
    /// Part labels of the source faces (JSON). Without it every face is one part.
    #[arg(long)]
    source_labels: Option<PathBuf>,
    #[arg(long)]
    target_labels: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Run configuration (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory receiving all outputs.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    views: Option<usize>,
    #[arg(long)]
    resolution: Option<usize>,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    /// Predicted mesh.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth mesh.
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    pred_labels: Option<PathBuf>,
    #[arg(long)]
    gt_labels: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

/// Runs the command line `argv` (program name first) and returns the exit status.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Command::TransferGeometry(a) | Command::TransferTexture(a) | Command::Stylize(a) = &cli.command {
        if a.target.is_none() {
            let _ = Cli::command()
                .error(ErrorKind::MissingRequiredArgument, "this subcommand needs --target <TARGET>")
                .print();
            return 1;
        }
    }
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 1;
        }
    };
    match pool.install(|| run(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn thread_pool() -> std::result::Result<rayon::ThreadPool, String> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got '{v}'"))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| e.to_string())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::FitEllipsoids(a) => fit_ellipsoids_cmd(&a),
        Command::TransferGeometry(a) => transfer_geometry_cmd(&a),
        Command::TransferTexture(a) => transfer_texture_cmd(&a),
        Command::Stylize(a) => stylize_cmd(&a),
        Command::Render(a) => render_cmd(&a),
        Command::Metrics(a) => metrics_cmd(&a),
    }
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => load_config(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.random_seed = s;
        }
        if let Some(v) = self.views {
            cfg.views = v;
        }
        if let Some(r) = self.resolution {
            cfg.image_resolution = r;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.out_dir).map_err(|e| Error::io(&self.out_dir, e))?;
        Ok(&self.out_dir)
    }
}

/// Run bookkeeping shared by the subcommands.
struct Session {
    manifest: RunManifest,
    clock: Instant,
}

impl Session {
    fn new(command: &str, run: &RunArgs, cfg: &RunConfig) -> Result<Self> {
        let mut manifest = RunManifest::new(command, cfg);
        if let Some(p) = &run.config {
            manifest.add_input(p)?;
        }
        Ok(Self {
            manifest,
            clock: Instant::now(),
        })
    }

    fn inputs(&mut self, asset: &Asset) -> Result<()> {
        for f in &asset.files {
            self.manifest.add_input(f)?;
        }
        Ok(())
    }

    fn lap(&mut self, phase: &str) {
        self.manifest.add_timing(phase, self.clock.elapsed().as_secs_f64());
        self.clock = Instant::now();
    }

    fn save(&self, dir: &Path) -> Result<()> {
        self.manifest.save(&dir.join("manifest.json"))
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load_pair(a: &Common, session: &mut Session) -> Result<(Asset, Asset)> {
    let source = load_asset(&a.source, a.source_labels.as_deref())?;
    let target = load_asset(a.target.as_deref().expect("checked in cli_main"), a.target_labels.as_deref())?;
    session.inputs(&source)?;
    session.inputs(&target)?;
    check_part_alphabets(&source, &target)?;
    session.lap("load");
    Ok((source, target))
}

/// Saves a texture next to the mesh and points the mesh's material at it.
fn save_textured(mesh: &crate::asset_io::TexturedMesh, texture: Option<&TextureImage>, dir: &Path) -> Result<()> {
    let mut mesh = mesh.clone();
    mesh.texture = None;
    if let Some(tex) = texture {
        let tex_path = dir.join("texture.png");
        save_texture(tex, &tex_path)?;
        mesh.texture = Some(tex_path);
    }
    save_mesh(&mesh, dir.join("mesh.obj"))
}

fn fit_ellipsoids_cmd(a: &Common) -> Result<()> {
    let cfg = a.run.config()?;
    let dir = a.run.out_dir()?;
    let mut session = Session::new("fit-ellipsoids", &a.run, &cfg)?;
    let source = load_asset(&a.source, a.source_labels.as_deref())?;
    session.inputs(&source)?;
    session.lap("load");
    let p = sample_surface(&source.mesh, &source.labels, cfg.sample_count, cfg.random_seed)?;
    let ells = part_ellipsoids(&source, &p, &cfg)?;
    session.lap("fit");
    write(&dir.join("ellipsoids.json"), &ellipsoids_to_json(&ells, &source.labels.part_names))?;
    session.save(dir)
}

fn transfer_geometry_cmd(a: &Common) -> Result<()> {
    let cfg = a.run.config()?;
    let dir = a.run.out_dir()?;
    let mut session = Session::new("transfer-geometry", &a.run, &cfg)?;
    let (source, target) = load_pair(a, &mut session)?;
    let geo = transfer_geometry(&source, &target, &cfg)?;
    session.lap("geometry");
    info!("geometric loss {:.6e}", geo.trace.best_total);
    let names = &source.labels.part_names;
    save_textured(&geo.mesh, source.texture.as_ref(), dir)?;
    write(&dir.join("transforms.json"), &geo.transforms.to_json(names))?;
    write(&dir.join("ellipsoids.json"), &ellipsoids_to_json(&geo.ellipsoids, names))?;
    write(&dir.join("trace.json"), &geo.trace.to_json())?;
    session.save(dir)
}

fn transfer_texture_cmd(a: &Common) -> Result<()> {
    let cfg = a.run.config()?;
    let dir = a.run.out_dir()?;
    let mut session = Session::new("transfer-texture", &a.run, &cfg)?;
    let (source, target) = load_pair(a, &mut session)?;
    let tex = transfer_texture(&source, &target)?;
    session.lap("texture");
    save_texture(&tex.texture, dir.join("texture.png"))?;
    write(&dir.join("color_transform.json"), &tex.transform.to_json())?;
    session.save(dir)
}

fn stylize_cmd(a: &Common) -> Result<()> {
    let cfg = a.run.config()?;
    let dir = a.run.out_dir()?;
    let mut session = Session::new("stylize", &a.run, &cfg)?;
    let (source, target) = load_pair(a, &mut session)?;
    let result = match stylize_joint(&source, &target, &cfg) {
        Ok(r) => r,
        Err(e) => {
            if let Error::JointAbort { ledger_json, .. } = &e {
                write(&dir.join("ledger.json"), ledger_json)?;
            }
            return Err(e);
        }
    };
    for (phase, secs) in &result.timings {
        session.manifest.add_timing(phase, *secs);
    }
    session.clock = Instant::now();
    let names = &source.labels.part_names;
    save_textured(&result.mesh, Some(&result.texture), dir)?;
    write(&dir.join("transforms.json"), &result.transforms.to_json(names))?;
    write(&dir.join("color_transform.json"), &result.color_transform.to_json())?;
    write(&dir.join("ellipsoids.json"), &ellipsoids_to_json(&result.ellipsoids, names))?;
    write(&dir.join("ledger.json"), &ledger_to_json(&result.ledger, result.best_step))?;
    session.lap("write");
    session.save(dir)
}

fn render_cmd(a: &Common) -> Result<()> {
    let cfg = a.run.config()?;
    let dir = a.run.out_dir()?;
    let mut session = Session::new("render", &a.run, &cfg)?;
    let source = load_asset(&a.source, a.source_labels.as_deref())?;
    session.inputs(&source)?;
    session.lap("load");
    let cams = camera_ring(&source.mesh, cfg.views, cfg.elevation_deg, cfg.image_resolution)?;
    for (i, cam) in cams.iter().enumerate() {
        let out = rasterize(&source.mesh, source.texture.as_ref(), cam)?;
        save_texture(&out.rgb, dir.join(format!("view_{i:03}.png")))?;
        save_mask(&out.mask, dir.join(format!("mask_{i:03}.png")))?;
    }
    session.lap("render");
    session.save(dir)
}

#[derive(Debug, Serialize)]
struct MetricsReport {
    chamfer_l1: f64,
    chamfer_l2: f64,
    fscore_tau: f64,
    precision: f64,
    recall: f64,
    f_score: f64,
    /// Present when both sides carry matching part labels.
    part_distance: Option<f64>,
    /// Of the prediction, about the configured plane.
    symmetry_distance: Option<f64>,
}

fn metrics_cmd(a: &MetricsArgs) -> Result<()> {
    let cfg = a.run.config()?;
    let dir = a.run.out_dir()?;
    let mut session = Session::new("metrics", &a.run, &cfg)?;
    let labeled = a.pred_labels.is_some() && a.gt_labels.is_some();
    let (pred, gt) = if labeled {
        (
            load_asset(&a.pred, a.pred_labels.as_deref())?,
            load_asset(&a.gt, a.gt_labels.as_deref())?,
        )
    } else {
        // texture-free comparison: only the geometry is read
        let bare = |p: &Path| -> Result<Asset> {
            let mesh = load_mesh(p)?;
            Ok(Asset {
                labels: crate::asset_io::PartLabeling::uniform(crate::pipeline::DEFAULT_PART, mesh.faces.len()),
                mesh,
                texture: None,
                files: vec![p.to_path_buf()],
            })
        };
        (bare(&a.pred)?, bare(&a.gt)?)
    };
    session.inputs(&pred)?;
    session.inputs(&gt)?;
    session.lap("load");
    // the same seed on both sides: identical meshes give identical samples
    let p = sample_surface(&pred.mesh, &pred.labels, cfg.sample_count, cfg.random_seed)?;
    let q = sample_surface(&gt.mesh, &gt.labels, cfg.sample_count, cfg.random_seed)?;
    let tau = cfg.fscore_tau_fraction * bbox_diagonal(&q.points);
    let fs = f_score(&p.points, &q.points, tau)?;
    let part = if labeled {
        check_part_alphabets(&pred, &gt)?;
        Some(part_distance(&p, &q)?)
    } else {
        None
    };
    let sym = match cfg.symmetry()? {
        Some(plane) => Some(symmetry_distance(&p.points, &plane)?),
        None => None,
    };
    let report = MetricsReport {
        chamfer_l1: chamfer_l1(&p.points, &q.points)?,
        chamfer_l2: chamfer_l2(&p.points, &q.points)?,
        fscore_tau: tau,
        precision: fs.precision,
        recall: fs.recall,
        f_score: fs.f_score,
        part_distance: part,
        symmetry_distance: sym,
    };
    session.lap("metrics");
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    // a closed stdout (e.g. piped into `head`) is not an error
    let _ = writeln!(std::io::stdout(), "{text}");
    write(&dir.join("metrics.json"), &text)?;
    session.save(dir)
}
