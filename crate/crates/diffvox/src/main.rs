//! Command-line interface for phantom generation, rendering,
//! reconstruction, and evaluation.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
//! divergence.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use diffvox::error::DiffVoxError;
use diffvox::geometry::ScanGeometry;
use diffvox::grid::VoxelGrid;
use diffvox::io::{self, Dtype};
use diffvox::metrics;
use diffvox::optim::{reconstruct, Progress, ProjectionSet, ReconConfig};
use diffvox::phantoms::{make_phantom, PhantomKind};
use diffvox::renderer::RendererKind;

#[derive(Parser)]
#[command(name = "diffvox", version, about = "Sparse-view CBCT reconstruction via differentiable X-ray rendering")]
struct Cli {
    /// Worker threads (default: all cores). Results are bitwise-stable
    /// for a fixed value.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic phantom volume.
    Phantom(PhantomArgs),
    /// Render projections of a volume on a circular orbit.
    Render(RenderArgs),
    /// Reconstruct a volume from projections.
    Reconstruct(ReconstructArgs),
    /// Compare a test volume against a reference and print metrics.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct PhantomArgs {
    /// uniform | spheres | shells | smooth_noise | shell_filaments
    #[arg(long)]
    kind: PhantomKind,
    /// Voxel counts, e.g. 64,64,64
    #[arg(long, value_parser = parse_usize3)]
    dims: [usize; 3],
    /// Voxel spacing in mm, e.g. 0.5,0.5,0.5
    #[arg(long, value_parser = parse_f64_3)]
    spacing: [f64; 3],
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output base path (writes <out>.volhdr.json and <out>.vol.raw)
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "f32")]
    dtype: Dtype,
}

#[derive(Args)]
struct RenderArgs {
    /// Input volume base path
    #[arg(long)]
    volume: PathBuf,
    /// Scan geometry JSON file
    #[arg(long)]
    geometry: PathBuf,
    /// Override the geometry's view angles with N uniform orbit views
    #[arg(long)]
    views: Option<usize>,
    #[arg(long, default_value = "siddon")]
    renderer: RendererKind,
    /// Samples per ray for the trilinear renderer
    #[arg(long, default_value_t = 500)]
    m_samples: usize,
    /// Output base path (writes <out>.projhdr.json and <out>.proj.raw)
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "f64")]
    dtype: Dtype,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Input projections base path
    #[arg(long)]
    projections: PathBuf,
    /// Reconstruction grid voxel counts, e.g. 64,64,64
    #[arg(long, value_parser = parse_usize3)]
    dims: [usize; 3],
    /// Reconstruction grid spacing in mm
    #[arg(long, value_parser = parse_f64_3)]
    spacing: [f64; 3],
    /// Optional ReconConfig JSON; CLI flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    renderer: Option<RendererKind>,
    #[arg(long)]
    lambda_tv: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_rays: Option<usize>,
    #[arg(long)]
    m_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output volume base path
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "f32")]
    dtype: Dtype,
    /// Per-batch loss log: epoch,batch,loss
    #[arg(long)]
    progress_csv: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Test volume base path
    #[arg(long)]
    test: PathBuf,
    /// Reference volume base path (peak and dynamic range come from it)
    #[arg(long)]
    reference: PathBuf,
    /// Override the SSIM dynamic range
    #[arg(long)]
    dynamic_range: Option<f64>,
    /// Export one slice of the test volume as 8-bit grayscale PNG
    #[arg(long, requires = "png")]
    slice: Option<usize>,
    /// Slice axis: 0, 1, or 2
    #[arg(long, default_value_t = 2)]
    axis: usize,
    #[arg(long)]
    png: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version are not usage errors.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };

    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: failed to configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }

    let result = match cli.command {
        Command::Phantom(args) => run_phantom(args),
        Command::Render(args) => run_render(args),
        Command::Reconstruct(args) => run_reconstruct(args),
        Command::Evaluate(args) => run_evaluate(args),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &DiffVoxError) -> u8 {
    match e {
        DiffVoxError::Divergence { .. } => 3,
        DiffVoxError::InvalidArgument(_) => 1,
        _ => 2,
    }
}

fn parse_usize3(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated values, got '{s}'"));
    }
    let mut out = [0usize; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|e| format!("bad value '{p}': {e}"))?;
    }
    Ok(out)
}

fn parse_f64_3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated values, got '{s}'"));
    }
    let mut out = [0f64; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|e| format!("bad value '{p}': {e}"))?;
    }
    Ok(out)
}

fn run_phantom(args: PhantomArgs) -> Result<(), DiffVoxError> {
    let grid = make_phantom(args.kind, args.dims, args.spacing, args.seed)?;
    io::write_volume(&args.out, &grid, args.dtype)?;
    Ok(())
}

fn run_render(args: RenderArgs) -> Result<(), DiffVoxError> {
    let (volume, _) = io::read_volume(&args.volume)?;
    let text = fs::read_to_string(&args.geometry)?;
    let mut geometry: ScanGeometry = serde_json::from_str(&text)
        .map_err(|e| DiffVoxError::MalformedHeader(format!("{}: {e}", args.geometry.display())))?;
    if let Some(n_views) = args.views {
        geometry = ScanGeometry::circular_orbit(
            n_views,
            geometry.source_to_isocenter,
            geometry.source_to_detector,
            geometry.detector_rows,
            geometry.detector_cols,
            geometry.pixel_pitch_u,
            geometry.pixel_pitch_v,
        )?;
    }
    geometry.validate()?;
    let rays: Vec<_> = geometry.enumerate_rays().map(|(_, _, _, r)| r).collect();
    let rendered = args.renderer.forward(&volume, &rays, args.m_samples)?;
    let set = ProjectionSet::new(geometry, rendered.intensities)?;
    io::write_projections(&args.out, &set, args.dtype)?;
    Ok(())
}

fn run_reconstruct(args: ReconstructArgs) -> Result<(), DiffVoxError> {
    let (projections, _) = io::read_projections(&args.projections)?;

    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str::<ReconConfig>(&text)
                .map_err(|e| DiffVoxError::MalformedHeader(format!("{}: {e}", path.display())))?
        }
        None => ReconConfig::default_for(args.renderer.unwrap_or(RendererKind::Siddon)),
    };
    if let Some(renderer) = args.renderer {
        if args.config.is_none() && args.lambda_tv.is_none() {
            // Keep the per-renderer default weight in sync.
            config = ReconConfig { seed: config.seed, ..ReconConfig::default_for(renderer) };
        }
        config.renderer = renderer;
    }
    if let Some(v) = args.lambda_tv {
        config.lambda_tv = v;
    }
    if let Some(v) = args.iterations {
        config.iterations = v;
    }
    if let Some(v) = args.lr {
        config.lr_initial = v;
    }
    if let Some(v) = args.batch_rays {
        config.batch_rays = v;
    }
    if let Some(v) = args.m_samples {
        config.m_samples = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }

    let template = VoxelGrid::centered(args.dims, args.spacing)?;

    let mut csv = match &args.progress_csv {
        Some(path) => {
            let mut f = fs::File::create(path)?;
            writeln!(f, "epoch,batch,loss")?;
            Some(f)
        }
        None => None,
    };
    let mut csv_err = None;
    let volume = reconstruct(&projections, &template, &config, |p: Progress| {
        if let Some(f) = csv.as_mut() {
            if let Err(e) = writeln!(f, "{},{},{}", p.epoch, p.batch, p.loss) {
                csv_err.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = csv_err {
        return Err(e.into());
    }
    io::write_volume(&args.out, &volume, args.dtype)?;
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> Result<(), DiffVoxError> {
    let (test, _) = io::read_volume(&args.test)?;
    let (reference, _) = io::read_volume(&args.reference)?;
    if test.dims != reference.dims {
        return Err(DiffVoxError::SizeMismatch(format!(
            "test dims {:?} != reference dims {:?}",
            test.dims, reference.dims
        )));
    }
    let report = metrics::report(
        &reference.values,
        &test.values,
        &reference.dims,
        args.dynamic_range,
    )?;
    println!("{}", serde_json::to_string_pretty(&report)?);

    if let (Some(slice), Some(png)) = (args.slice, &args.png) {
        export_slice_png(&test, args.axis, slice, png)?;
    }
    Ok(())
}

/// Min-max normalized 8-bit grayscale export of one slice.
fn export_slice_png(grid: &VoxelGrid, axis: usize, slice: usize, path: &PathBuf) -> Result<(), DiffVoxError> {
    if axis > 2 {
        return Err(DiffVoxError::InvalidArgument(format!("axis must be 0, 1, or 2, got {axis}")));
    }
    if slice >= grid.dims[axis] {
        return Err(DiffVoxError::InvalidArgument(format!(
            "slice {slice} out of range (axis {axis} has {} voxels)",
            grid.dims[axis]
        )));
    }
    let other = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let (w, h) = (grid.dims[other.0], grid.dims[other.1]);
    let mut values = Vec::with_capacity(w * h);
    for b in 0..h {
        for a in 0..w {
            let mut idx = [0usize; 3];
            idx[axis] = slice;
            idx[other.0] = a;
            idx[other.1] = b;
            values.push(grid.at(idx[0], idx[1], idx[2]));
        }
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = if hi > lo { 255.0 / (hi - lo) } else { 0.0 };
    let pixels: Vec<u8> = values.iter().map(|&v| ((v - lo) * scale).round() as u8).collect();
    let img = image::GrayImage::from_raw(w as u32, h as u32, pixels)
        .expect("buffer size matches dimensions");
    img.save(path)
        .map_err(|e| DiffVoxError::InvalidArgument(format!("failed to write {}: {e}", path.display())))?;
    Ok(())
}
