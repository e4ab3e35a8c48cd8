use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use april_cli::format;
use april_cli::ingest::{self, Ingested};
use april_cli::report::{Report, ReportFormat};
use april_core::april::{Backend, JoinOrder};
use april_core::geom::Mbr;
use april_core::par::Execution;
use april_core::pipeline::{
    build_stores, run_join_with, run_selection_with, ApproxStore, FilterKind, JoinConfig, Predicate,
};
use april_core::ri::Side;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "april", version, about = "Raster-interval approximations and spatial joins")]
struct Cli {
    /// Worker threads for the parallel paths (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build approximation files for one or more WKT datasets on a shared tiling.
    Build(BuildArgs),
    /// Join two WKT datasets.
    Join(JoinArgs),
    /// Objects of a dataset intersecting a query polygon.
    Select(SelectArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ApproxKind {
    April,
    Ri,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    R,
    S,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FilterArg {
    None,
    Ri,
    April,
    #[value(name = "april-c")]
    AprilC,
}

impl From<FilterArg> for FilterKind {
    fn from(f: FilterArg) -> Self {
        match f {
            FilterArg::None => FilterKind::None,
            FilterArg::Ri => FilterKind::Ri,
            FilterArg::April => FilterKind::April,
            FilterArg::AprilC => FilterKind::AprilCompressed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PredicateArg {
    Intersects,
    Within,
    Polyline,
}

impl From<PredicateArg> for Predicate {
    fn from(p: PredicateArg) -> Self {
        match p {
            PredicateArg::Intersects => Predicate::Intersects,
            PredicateArg::Within => Predicate::Within,
            PredicateArg::Polyline => Predicate::PolyLine,
        }
    }
}

fn filter_name(f: FilterKind) -> &'static str {
    match f {
        FilterKind::None => "none",
        FilterKind::Ri => "ri",
        FilterKind::April => "april",
        FilterKind::AprilCompressed => "april-c",
    }
}

fn parse_extent(s: &str) -> Result<Mbr, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let [a, b, c, d] = v[..] else {
        return Err("expected xmin,ymin,xmax,ymax".into());
    };
    Mbr::new(a, b, c, d).map_err(|e| e.to_string())
}

/// Raster settings shared by all subcommands.
#[derive(Args, Clone)]
struct RasterArgs {
    /// Grid order N (2^N x 2^N cells per tile); defaults to 16 or the approximation file's order.
    #[arg(long)]
    order: Option<u8>,

    #[arg(long, default_value = "onestep", value_parser = |s: &str| s.parse::<Backend>().map_err(|e| e.to_string()))]
    backend: Backend,

    /// Partitions per dimension; defaults to 1 or the approximation file's value.
    #[arg(long)]
    partitions: Option<u32>,

    /// Map extent as xmin,ymin,xmax,ymax (default: union of the inputs).
    #[arg(long, value_parser = parse_extent)]
    extent: Option<Mbr>,

    /// Run on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

impl RasterArgs {
    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

#[derive(Args)]
struct BuildArgs {
    /// WKT input, one geometry per line; repeat for datasets sharing a tiling.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,

    /// Output file for each input, in the same order.
    #[arg(long = "out", required = true)]
    outs: Vec<PathBuf>,

    #[arg(long, value_enum, default_value = "april")]
    approx: ApproxKind,

    /// RI encoding side.
    #[arg(long, value_enum, default_value = "r")]
    side: SideArg,

    /// VByte-compress APRIL lists.
    #[arg(long)]
    compress: bool,

    #[command(flatten)]
    raster: RasterArgs,
}

#[derive(Args)]
struct JoinArgs {
    #[arg(long)]
    left: PathBuf,

    #[arg(long)]
    right: PathBuf,

    /// Prebuilt approximations of the left dataset.
    #[arg(long)]
    left_approx: Option<PathBuf>,

    /// Prebuilt approximations of the right dataset.
    #[arg(long)]
    right_approx: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "intersects")]
    predicate: PredicateArg,

    /// Intermediate filter; defaults to april or the approximation files' kind.
    #[arg(long, value_enum)]
    filter: Option<FilterArg>,

    /// Order of the right dataset's approximations, if different.
    #[arg(long)]
    right_order: Option<u8>,

    /// APRIL phase order, e.g. AA,AF,FA.
    #[arg(long, default_value = "AA,AF,FA", value_parser = |s: &str| s.parse::<JoinOrder>().map_err(|e| e.to_string()))]
    join_order: JoinOrder,

    #[arg(long, value_enum, default_value = "json")]
    report: ReportFormat,

    /// Write the result pairs as CSV.
    #[arg(long)]
    out: Option<PathBuf>,

    #[command(flatten)]
    raster: RasterArgs,
}

#[derive(Args)]
struct SelectArgs {
    /// Query polygon as WKT.
    #[arg(long, conflicts_with = "query_file", required_unless_present = "query_file")]
    query: Option<String>,

    /// File holding the query polygon as WKT.
    #[arg(long)]
    query_file: Option<PathBuf>,

    #[arg(long)]
    data: PathBuf,

    /// Prebuilt approximations of the data (one partition).
    #[arg(long)]
    approx: Option<PathBuf>,

    #[arg(long, value_enum)]
    filter: Option<FilterArg>,

    #[arg(long, value_enum, default_value = "json")]
    report: ReportFormat,

    /// Write the matching ids, one per line.
    #[arg(long)]
    out: Option<PathBuf>,

    #[command(flatten)]
    raster: RasterArgs,
}

fn load(path: &Path) -> Result<Ingested> {
    let got = ingest::read_wkt_file(path).with_context(|| format!("loading {}", path.display()))?;
    log::info!(
        "{}: {} objects, {} unsupported, {} degenerate",
        path.display(),
        got.dataset.len(),
        got.skipped_unsupported,
        got.skipped_degenerate
    );
    Ok(got)
}

fn load_store(path: &Option<PathBuf>) -> Result<Option<ApproxStore>> {
    path.as_ref()
        .map(|p| format::read_file(p).with_context(|| format!("reading {}", p.display())))
        .transpose()
}

fn cmd_build(a: BuildArgs) -> Result<()> {
    if a.inputs.len() != a.outs.len() {
        bail!("{} inputs but {} outputs", a.inputs.len(), a.outs.len());
    }
    let filter = match (a.approx, a.compress) {
        (ApproxKind::Ri, true) => bail!("RI approximations cannot be compressed"),
        (ApproxKind::Ri, false) => FilterKind::Ri,
        (ApproxKind::April, true) => FilterKind::AprilCompressed,
        (ApproxKind::April, false) => FilterKind::April,
    };
    let side = match a.side {
        SideArg::R => Side::R,
        SideArg::S => Side::S,
    };
    let cfg = JoinConfig {
        order: a.raster.order.unwrap_or(16),
        backend: a.raster.backend,
        filter,
        partitions: a.raster.partitions.unwrap_or(1),
        execution: a.raster.execution(),
        extent: a.raster.extent,
        ..Default::default()
    };
    let loaded: Vec<Ingested> = a.inputs.iter().map(|p| load(p)).collect::<Result<_>>()?;
    let datasets: Vec<_> = loaded.iter().map(|l| &l.dataset).collect();
    let t = Instant::now();
    let stores = build_stores(&datasets, &cfg, side)?;
    let seconds = t.elapsed().as_secs_f64();
    let mut summary = Vec::new();
    for ((store, out), (input, got)) in stores.iter().zip(&a.outs).zip(a.inputs.iter().zip(&loaded)) {
        let bytes = format::write_file(out, store).with_context(|| format!("writing {}", out.display()))?;
        summary.push(serde_json::json!({
            "input": input.display().to_string(),
            "output": out.display().to_string(),
            "objects": got.dataset.len(),
            "records": store.len(),
            "skipped_unsupported": got.skipped_unsupported,
            "skipped_degenerate": got.skipped_degenerate,
            "bytes": bytes,
        }));
    }
    let doc = serde_json::json!({
        "order": cfg.order,
        "partitions": cfg.partitions,
        "filter": filter_name(filter),
        "build_seconds": seconds,
        "files": summary,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}

fn cmd_join(a: JoinArgs) -> Result<()> {
    let left_store = load_store(&a.left_approx)?;
    let right_store = load_store(&a.right_approx)?;
    let any_store = left_store.as_ref().or(right_store.as_ref());
    let filter = a
        .filter
        .map(FilterKind::from)
        .or(any_store.map(|s| s.filter))
        .unwrap_or(FilterKind::April);
    let order = a.raster.order.or(left_store.as_ref().map(|s| s.order)).unwrap_or(16);
    let right_order = a.right_order.or(right_store.as_ref().map(|s| s.order)).filter(|&o| o != order);
    let cfg = JoinConfig {
        order,
        right_order,
        backend: a.raster.backend,
        filter,
        partitions: a.raster.partitions.or(any_store.map(|s| s.partitions)).unwrap_or(1),
        join_order: a.join_order,
        execution: a.raster.execution(),
        extent: a.raster.extent,
    };
    // Without a filter there is nothing to take from the files.
    let (ls, rs) = if filter == FilterKind::None {
        (None, None)
    } else {
        (left_store.as_ref(), right_store.as_ref())
    };
    let left = load(&a.left)?;
    let right = load(&a.right)?;
    let predicate = Predicate::from(a.predicate);
    let (pairs, stats) = run_join_with(&left.dataset, &right.dataset, predicate, &cfg, ls, rs)?;
    if let Some(out) = &a.out {
        let mut w = csv::Writer::from_path(out).with_context(|| format!("writing {}", out.display()))?;
        w.write_record(["left", "right"])?;
        for (l, r) in &pairs {
            w.serialize((l, r))?;
        }
        w.flush()?;
    }
    let name = format!("{:?}", predicate).to_lowercase();
    let report = Report::new(&name, filter_name(filter), cfg.order, cfg.partitions, &stats);
    std::io::stdout().write_all(report.render(a.report)?.as_bytes())?;
    Ok(())
}

fn cmd_select(a: SelectArgs) -> Result<()> {
    let text = match (&a.query, &a.query_file) {
        (Some(q), _) => q.clone(),
        (None, Some(p)) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        (None, None) => bail!("no query polygon"),
    };
    let query = ingest::parse_polygon(&text).context("parsing the query")?;
    let store = load_store(&a.approx)?;
    let filter = a.filter.map(FilterKind::from).or(store.as_ref().map(|s| s.filter)).unwrap_or(FilterKind::April);
    let cfg = JoinConfig {
        order: a.raster.order.or(store.as_ref().map(|s| s.order)).unwrap_or(16),
        backend: a.raster.backend,
        filter,
        partitions: 1,
        execution: a.raster.execution(),
        extent: a.raster.extent,
        ..Default::default()
    };
    if a.raster.partitions.is_some_and(|p| p != 1) {
        bail!("selection runs on a single partition");
    }
    let data = load(&a.data)?;
    let st = if filter == FilterKind::None { None } else { store.as_ref() };
    let (ids, stats) = run_selection_with(&query, &data.dataset, &cfg, st)?;
    if let Some(out) = &a.out {
        let mut text = String::new();
        for id in &ids {
            text.push_str(&format!("{id}\n"));
        }
        std::fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
    }
    let report = Report::new("select", filter_name(filter), cfg.order, 1, &stats);
    std::io::stdout().write_all(report.render(a.report)?.as_bytes())?;
    Ok(())
}

fn configure_threads(threads: Option<usize>) -> Result<()> {
    let Some(n) = threads else {
        return Ok(());
    };
    if n == 0 {
        bail!("--threads must be at least 1");
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    #[cfg(not(feature = "parallel"))]
    log::warn!("built without the parallel feature; --threads {n} ignored");
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Join(a) => cmd_join(a),
        Command::Select(a) => cmd_select(a),
    }
}
