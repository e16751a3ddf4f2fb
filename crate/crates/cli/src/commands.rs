use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dirhdr_core::bandwidth::{select, Pilot, Selection, SelectorConfig, SelectorId};
use dirhdr_core::hdr::{count_components, extract_boundary, hdr_region, region_probability, Region, ThresholdMode};
use dirhdr_core::metrics::{hausdorff, min_set_distance};
use dirhdr_core::sim::{run_experiment, summarize, violin_export, ExperimentPlan, SelectorSettings};
use dirhdr_core::{make_grid, Dim, KdeEstimate, UnitVector};

use crate::export;
use crate::ingest::{export_points, ingest, Dataset, InputFormat};
use crate::CliError;

/// HDR estimation for circular and spherical data.
#[derive(Debug, Parser)]
#[command(name = "dirhdr", version, about)]
pub struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Evaluation grid resolution (circle nodes, or sphere longitudes).
    #[arg(long, global = true)]
    pub grid_resolution: Option<usize>,
    /// Input data format.
    #[arg(long, global = true, value_enum)]
    pub format: Option<InputFormat>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a data file and report accepted and skipped rows.
    IngestCheck {
        input: PathBuf,
        /// Also write the normalized points to points.csv.
        #[arg(long)]
        export: bool,
    },
    /// Select a bandwidth and write its objective trace.
    Select {
        input: PathBuf,
        #[command(flatten)]
        selector: SelectorArgs,
        /// HDR level used by h1.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Estimate HDRs at one or more levels.
    Hdr {
        input: PathBuf,
        #[command(flatten)]
        selector: SelectorArgs,
        /// Comma-separated HDR levels in (0, 1).
        #[arg(long, value_delimiter = ',', required = true)]
        tau: Vec<f64>,
        /// Use this bandwidth instead of running a selector.
        #[arg(long)]
        bandwidth: Option<f64>,
        #[arg(long, value_enum, default_value_t = ThresholdArg::Sample)]
        threshold: ThresholdArg,
    },
    /// Hausdorff and minimum distances between boundary files.
    Distance {
        #[arg(required = true, num_args = 2..)]
        files: Vec<PathBuf>,
        /// Pairwise matrices over all files instead of one pair.
        #[arg(long)]
        matrix: bool,
    },
    /// Run a simulation plan.
    Simulate { plan: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ThresholdArg {
    /// Order statistic of f_n at the sample points.
    Sample,
    /// Order statistic over max(10n, 10⁴) smoothed-bootstrap draws.
    Pseudo,
}

#[derive(Debug, Clone, Args)]
pub struct SelectorArgs {
    /// Selector id, h1..h7.
    #[arg(long, default_value = "h7")]
    pub selector: String,
    /// Selector settings file (bootstrap, pilot, search, search_grid, grid_resolution, refine_tol).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub bootstrap: Option<usize>,
    /// Pilot selector id or a fixed bandwidth.
    #[arg(long)]
    pub pilot: Option<String>,
    /// Search interval as lo,hi.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub search: Option<Vec<f64>>,
    #[arg(long)]
    pub search_grid: Option<usize>,
    /// Grid resolution for the HDRs inside h1.
    #[arg(long)]
    pub h1_grid: Option<usize>,
    #[arg(long)]
    pub refine_tol: Option<f64>,
}

impl SelectorArgs {
    fn id(&self) -> Result<SelectorId, CliError> {
        Ok(self.selector.parse()?)
    }

    fn config(&self, tau: Option<f64>, seed: u64) -> Result<SelectorConfig, CliError> {
        let base = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", p.display())))?;
                SelectorSettings::from_toml(&text)?
            }
            None => SelectorSettings::default(),
        };
        let mut cfg = base.to_config(tau, seed);
        if let Some(b) = self.bootstrap {
            cfg.bootstrap = Some(b);
        }
        if let Some(p) = &self.pilot {
            cfg.pilot = match p.parse::<f64>() {
                Ok(h) => Pilot::Fixed(h),
                Err(_) => Pilot::Selector(p.parse()?),
            };
        }
        if let Some(s) = &self.search {
            cfg.search = Some((s[0], s[1]));
        }
        cfg.search_grid = self.search_grid.or(cfg.search_grid);
        cfg.grid_resolution = self.h1_grid.or(cfg.grid_resolution);
        cfg.refine_tol = self.refine_tol.or(cfg.refine_tol);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs one command, writing human-readable output to `out`.
pub fn run(cli: &Cli, out: &mut String) -> Result<(), CliError> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::IngestCheck { input, export } => ingest_check(cli, input, *export, out),
        Command::Select { input, selector, tau } => cmd_select(cli, input, selector, *tau, seed, out),
        Command::Hdr { input, selector, tau, bandwidth, threshold } => {
            cmd_hdr(cli, input, selector, tau, *bandwidth, *threshold, seed, out)
        }
        Command::Distance { files, matrix } => cmd_distance(cli, files, *matrix, out),
        Command::Simulate { plan } => cmd_simulate(cli, plan, out),
    }
}

fn load(cli: &Cli, input: &Path) -> Result<Dataset, CliError> {
    let format = cli.format.ok_or_else(|| CliError::Validation("--format is required to read data".into()))?;
    ingest(input, format)
}

fn ingest_check(cli: &Cli, input: &Path, write: bool, out: &mut String) -> Result<(), CliError> {
    let d = load(cli, input)?;
    let _ = writeln!(out, "file: {}", d.source.path.display());
    let _ = writeln!(out, "format: {}", d.source.format);
    let _ = writeln!(out, "space: {}", d.dim);
    let _ = writeln!(out, "header: {}", d.source.header);
    let _ = writeln!(out, "rows: {}", d.source.rows);
    let _ = writeln!(out, "points: {}", d.points.len());
    let _ = writeln!(out, "skipped: {}", d.source.skipped.len());
    for issue in &d.source.skipped {
        let _ = writeln!(out, "  line {}: {}", issue.line, issue.reason);
    }
    if write {
        export::write(&cli.out_dir, "points.csv", &export_points(&d.points, d.source.format))?;
    }
    Ok(())
}

fn write_selection(out: &mut String, s: &Selection, seed: u64) {
    let _ = writeln!(out, "selector: {}", s.selector);
    let _ = writeln!(out, "h: {}", s.h);
    if let Some(v) = s.objective {
        let _ = writeln!(out, "objective: {v}");
    }
    if let Some(p) = s.pilot_h {
        let _ = writeln!(out, "pilot_h: {p}");
    }
    if let Some((lo, hi)) = s.search {
        let _ = writeln!(out, "search: [{lo}, {hi}]");
    }
    let _ = writeln!(out, "seed: {seed}");
    for w in &s.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
}

fn cmd_select(
    cli: &Cli,
    input: &Path,
    args: &SelectorArgs,
    tau: Option<f64>,
    seed: u64,
    out: &mut String,
) -> Result<(), CliError> {
    let id = args.id()?;
    let cfg = args.config(tau, seed)?;
    let d = load(cli, input)?;
    let s = select(id, &d.points, &cfg)?;
    write_selection(out, &s, seed);
    export::write(&cli.out_dir, &format!("trace_{id}.csv"), &export::trace_csv(&s.trace))?;
    Ok(())
}

pub const MIN_HDR_SAMPLE: usize = 10;

struct LevelResult {
    tau: f64,
    h: f64,
    threshold: f64,
    components: usize,
    probability: f64,
    degenerate: bool,
}

#[allow(clippy::too_many_arguments)]
fn cmd_hdr(
    cli: &Cli,
    input: &Path,
    args: &SelectorArgs,
    taus: &[f64],
    bandwidth: Option<f64>,
    threshold: ThresholdArg,
    seed: u64,
    out: &mut String,
) -> Result<(), CliError> {
    let id = args.id()?;
    for &t in taus {
        dirhdr_core::hdr::validate_tau(t)?;
    }
    let cfg = args.config(None, seed)?;
    let d = load(cli, input)?;
    if d.points.len() < MIN_HDR_SAMPLE {
        return Err(dirhdr_core::Error::SampleTooSmall { needed: MIN_HDR_SAMPLE, got: d.points.len() }.into());
    }
    let grid = Arc::new(make_grid(d.dim, cli.grid_resolution.unwrap_or(d.dim.default_resolution()))?);
    let mode = match threshold {
        ThresholdArg::Sample => ThresholdMode::SampleValues,
        ThresholdArg::Pseudo => ThresholdMode::pseudo_default(d.points.len(), seed),
    };
    let base = KdeEstimate::new(d.points.clone(), 1.0)?;
    let mut shared: Option<Selection> = None;
    let mut results = Vec::new();
    for &tau in taus {
        let h = match (bandwidth, id, &shared) {
            (Some(h), _, _) => h,
            (None, SelectorId::H1, _) => {
                let s = select(id, &d.points, &SelectorConfig { tau: Some(tau), ..cfg.clone() })?;
                write_selection(out, &s, seed);
                s.h
            }
            (None, _, Some(s)) => s.h,
            (None, _, None) => {
                let s = select(id, &d.points, &cfg)?;
                write_selection(out, &s, seed);
                let h = s.h;
                shared = Some(s);
                h
            }
        };
        let est = base.with_bandwidth(h)?;
        let hdr = hdr_region(&est, tau, &grid, mode)?;
        let tag = format!("tau{tau}");
        let boundary = extract_boundary(&hdr.region).ok();
        let points: &[UnitVector] = boundary.as_ref().map_or(&[], |b| b.points());
        export::write(&cli.out_dir, &format!("{tag}_boundary.csv"), &export::boundary_csv(d.dim, points))?;
        match &hdr.region {
            Region::Circle(_) => {
                export::write(&cli.out_dir, &format!("{tag}_arcs.csv"), &export::arcs_csv(&hdr.region))?
            }
            Region::Sphere(g) => {
                export::write(&cli.out_dir, &format!("{tag}_mask.csv"), &export::mask_csv(g))?;
                let geo = export::contours_geojson(&g.polylines(), tau, hdr.threshold.value);
                export::write(&cli.out_dir, &format!("{tag}_contours.geojson"), &geo)?;
            }
        }
        results.push(LevelResult {
            tau,
            h,
            threshold: hdr.threshold.value,
            components: count_components(&hdr.region),
            probability: region_probability(&hdr.region, &est)?,
            degenerate: boundary.is_none(),
        });
    }
    let mut summary = String::from("tau,selector,h,threshold,components,probability,degenerate,seed\n");
    for r in &results {
        let sel = if bandwidth.is_some() { "fixed".to_string() } else { id.to_string() };
        let _ = writeln!(
            summary,
            "{},{sel},{},{},{},{},{},{seed}",
            r.tau,
            r.h,
            r.threshold,
            r.components,
            r.probability,
            u8::from(r.degenerate)
        );
    }
    export::write(&cli.out_dir, "summary.csv", &summary)?;
    out.push_str(&summary);
    let degenerate: Vec<String> = results.iter().filter(|r| r.degenerate).map(|r| r.tau.to_string()).collect();
    if !degenerate.is_empty() {
        return Err(CliError::Degenerate(format!("HDR has no boundary at tau = {}", degenerate.join(", "))));
    }
    Ok(())
}

fn file_label(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |f| f.to_string_lossy().into_owned())
}

fn cmd_distance(cli: &Cli, files: &[PathBuf], matrix: bool, out: &mut String) -> Result<(), CliError> {
    let sets = files.iter().map(|f| export::read_boundary(f)).collect::<Result<Vec<_>, _>>()?;
    let dim: Dim = sets[0].0;
    if let Some((i, _)) = sets.iter().enumerate().find(|(_, s)| s.0 != dim) {
        return Err(CliError::Validation(format!(
            "{} is on the {}, {} on the {}",
            files[0].display(),
            dim,
            files[i].display(),
            sets[i].0
        )));
    }
    if !matrix {
        if files.len() != 2 {
            return Err(CliError::Validation("distance takes two files, or --matrix for more".into()));
        }
        let h = hausdorff(&sets[0].1, &sets[1].1)?;
        let m = min_set_distance(&sets[0].1, &sets[1].1)?;
        let csv = format!(
            "file_a,file_b,hausdorff,min_euclidean\n{},{},{h},{m}\n",
            file_label(&files[0]),
            file_label(&files[1])
        );
        export::write(&cli.out_dir, "distance.csv", &csv)?;
        out.push_str(&csv);
        return Ok(());
    }
    let k = sets.len();
    let mut hd = vec![vec![0.0; k]; k];
    let mut md = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            hd[i][j] = hausdorff(&sets[i].1, &sets[j].1)?;
            md[i][j] = min_set_distance(&sets[i].1, &sets[j].1)?;
            hd[j][i] = hd[i][j];
            md[j][i] = md[i][j];
        }
    }
    let names: Vec<String> = files.iter().map(|f| file_label(f)).collect();
    export::write(&cli.out_dir, "hausdorff_matrix.csv", &export::matrix_csv(&names, &hd))?;
    export::write(&cli.out_dir, "min_euclidean_matrix.csv", &export::matrix_csv(&names, &md))?;
    let _ = writeln!(out, "wrote {k}x{k} matrices to {}", cli.out_dir.display());
    Ok(())
}

fn cmd_simulate(cli: &Cli, plan_path: &Path, out: &mut String) -> Result<(), CliError> {
    let text = std::fs::read_to_string(plan_path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", plan_path.display())))?;
    let mut plan = ExperimentPlan::from_toml(&text)?;
    if let Some(s) = cli.seed {
        plan.seed = s;
    }
    if let Some(r) = cli.grid_resolution {
        plan.grid_resolution = Some(r);
    }
    plan.validate()?;
    let table = run_experiment(&plan)?;
    let summary = summarize(&table);
    export::write(&cli.out_dir, "summary.csv", &summary)?;
    export::write(&cli.out_dir, "errors_raw.csv", &violin_export(&table))?;
    let _ = writeln!(out, "seed: {}", table.seed);
    out.push_str(&summary);
    let flagged = table.over_degenerate_limit();
    if !flagged.is_empty() {
        let cells: Vec<String> =
            flagged.iter().map(|k| format!("{}/{}/n={}/tau={}", k.model, k.selector, k.n, k.tau())).collect();
        return Err(CliError::Degenerate(format!("over 20% degenerate replicates in {}", cells.join(", "))));
    }
    Ok(())
}
