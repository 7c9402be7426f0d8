//! `etforge` command-line front end.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info, warn};
use rayon::prelude::*;

use etforge::coulomb::{coulomb_energy_direct, coulomb_energy_treecode, EnergyUnits, TreecodeParams};
use etforge::featurize::{featurize, manifest_for, FeatureParams};
use etforge::gb::{gb_terms, GbContext};
use etforge::pipeline::{
    export_dataset, format_float, import_dataset, ingest_labels, iqr_fences, kfold_assignments, metrics,
    train_test_split, DatasetMatrix, DatasetScalers, IqrRecord, LabelKey, ScalerParams, SplitRecord, SPLITS_FILE,
};
use etforge::rips::{barcode_for_selection, Barcode, RipsParams, DEFAULT_MAX_SIMPLICES};
use etforge::structure::{read_pqr, AtomSelector, ProteinStructure};
use etforge::topo::TopoParams;
use etforge::Error;

#[derive(Parser)]
#[command(name = "etforge", version, about = "Electrostatic and topological featurization of protein structures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Electrostatic + topological features for every structure, as CSV plus manifest.
    Featurize(FeaturizeArgs),
    /// Coulomb energy per structure by treecode.
    Coulomb(CoulombArgs),
    /// Persistence barcodes per structure as JSON.
    Barcode(BarcodeArgs),
    /// Generalized Born solvation energy from a PQR and a Born-radii file.
    Gb(GbArgs),
    /// Join labels, drop IQR outliers, fit scalers and assign splits.
    Dataset(DatasetArgs),
    /// MSE, MAPE and R² from a `y,yhat` CSV.
    Metrics(MetricsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Units {
    Internal,
    KcalPerMol,
}

impl From<Units> for EnergyUnits {
    fn from(u: Units) -> Self {
        match u {
            Units::Internal => EnergyUnits::Internal,
            Units::KcalPerMol => EnergyUnits::KcalPerMol,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Selector {
    AllCarbon,
    AllHeavy,
    All,
}

impl From<Selector> for AtomSelector {
    fn from(s: Selector) -> Self {
        match s {
            Selector::AllCarbon => AtomSelector::AllCarbon,
            Selector::AllHeavy => AtomSelector::AllHeavy,
            Selector::All => AtomSelector::All,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum IqrKey {
    ECoul,
    ESolv,
    None,
}

#[derive(Args)]
struct TopoArgs {
    /// Binning interval [0, l_scale] in Å.
    #[arg(long, default_value_t = 50.0)]
    l_scale: f64,
    #[arg(long, default_value_t = 100)]
    n_bins: usize,
    #[arg(long, default_value_t = 3)]
    max_dim: usize,
    /// Rips cutoff in Å; defaults to l_scale.
    #[arg(long)]
    filtration_scale: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MAX_SIMPLICES)]
    max_simplices: usize,
}

impl TopoArgs {
    fn params(&self) -> TopoParams {
        TopoParams {
            scale: self.l_scale,
            n_bins: self.n_bins,
            max_dim: self.max_dim,
            filtration_scale: self.filtration_scale.unwrap_or(self.l_scale),
            max_simplices: self.max_simplices,
        }
    }
}

#[derive(Args)]
struct FeaturizeArgs {
    /// A PQR file or a directory of `.pqr` files.
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    order: usize,
    #[arg(long, default_value_t = 1)]
    levels: usize,
    #[command(flatten)]
    topo: TopoArgs,
    /// Recorded in the manifest for downstream Coulomb labels.
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    #[arg(long, default_value_t = 1.0)]
    eps1: f64,
    #[arg(long, value_enum, default_value = "internal")]
    units: Units,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CoulombArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 4)]
    order: usize,
    #[arg(long, default_value_t = 4)]
    levels: usize,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    #[arg(long, default_value_t = 1.0)]
    eps1: f64,
    #[arg(long, value_enum, default_value = "internal")]
    units: Units,
    /// Add direct-sum energy and relative error columns.
    #[arg(long)]
    check: bool,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BarcodeArgs {
    input: PathBuf,
    #[arg(long, value_enum, default_value = "all-heavy")]
    selector: Selector,
    #[arg(long, alias = "filtration-scale", default_value_t = 50.0)]
    max_scale: f64,
    #[arg(long, default_value_t = 3)]
    max_dim: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_SIMPLICES)]
    max_simplices: usize,
    /// Write `<id>.json` files here instead of JSON lines on stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write `<id>.segments.csv` bar segments for plotting (needs --out).
    #[arg(long, requires = "out")]
    segments: bool,
}

#[derive(Args)]
struct GbArgs {
    #[arg(long)]
    pqr: PathBuf,
    /// One Born radius per line, in atom order.
    #[arg(long)]
    radii: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    eps1: f64,
    #[arg(long, default_value_t = 80.0)]
    eps2: f64,
    #[arg(long, value_enum, default_value = "internal")]
    units: Units,
}

#[derive(Args)]
struct DatasetArgs {
    /// Directory written by `featurize`.
    input: PathBuf,
    /// CSV with header `id,E_coul,E_solv`; either energy column may be omitted.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "e-coul")]
    iqr_key: IqrKey,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct MetricsArgs {
    /// CSV with header `y,yhat`.
    input: PathBuf,
}

enum Failure {
    Usage(String),
    Core(Error),
    Partial { failed: usize, total: usize },
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Core(Error::InvalidParameter(_)) => 1,
            Failure::Core(Error::Capacity { .. }) => 3,
            Failure::Core(_) => 2,
            Failure::Partial { .. } => 4,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) => m.clone(),
            Failure::Core(e) => e.to_string(),
            Failure::Partial { failed, total } => format!("{failed} of {total} structures failed"),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = configure_threads().and_then(|_| match cli.command {
        Command::Featurize(a) => cmd_featurize(a),
        Command::Coulomb(a) => cmd_coulomb(a),
        Command::Barcode(a) => cmd_barcode(a),
        Command::Gb(a) => cmd_gb(a),
        Command::Dataset(a) => cmd_dataset(a),
        Command::Metrics(a) => cmd_metrics(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("etforge: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn configure_threads() -> Outcome {
    let Ok(value) = std::env::var("FORGE_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("FORGE_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))
}

/// A single file, or the `.pqr` files of a directory in name order.
fn collect_inputs(input: &Path) -> Result<Vec<PathBuf>, Failure> {
    if !input.is_dir() {
        if !input.exists() {
            return Err(Failure::Usage(format!("{}: no such file or directory", input.display())));
        }
        return Ok(vec![input.to_path_buf()]);
    }
    let entries = fs::read_dir(input).map_err(|e| Error::Io { path: input.into(), source: e })?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::Io { path: input.into(), source: e })?.path();
        if path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pqr")) {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Failure::Usage(format!("{}: no .pqr files found", input.display())));
    }
    Ok(files)
}

/// Runs `work` on every input in parallel and keeps results in input order. Failures are
/// logged; when nothing succeeds the first error is returned as is.
fn run_all<T: Send>(
    files: &[PathBuf],
    work: impl Fn(&ProteinStructure) -> etforge::Result<T> + Sync,
) -> Result<(Vec<(ProteinStructure, T)>, usize), Failure> {
    let results: Vec<_> = files
        .par_iter()
        .map(|path| {
            let s = read_pqr(path)?;
            let value = work(&s)?;
            Ok::<_, Error>((s, value))
        })
        .collect();
    let mut done = Vec::new();
    let mut first_error = None;
    let mut failed = 0;
    for (path, result) in files.iter().zip(results) {
        match result {
            Ok(v) => done.push(v),
            Err(e) => {
                error!("{}: {e}", path.display());
                failed += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    match first_error {
        Some(e) if done.is_empty() => Err(Failure::Core(e)),
        _ => Ok((done, failed)),
    }
}

fn partial(failed: usize, total: usize) -> Outcome {
    if failed > 0 {
        Err(Failure::Partial { failed, total })
    } else {
        Ok(())
    }
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Failure::Core(Error::Io { path: path.into(), source: e })
}

fn cmd_featurize(a: FeaturizeArgs) -> Outcome {
    let params = FeatureParams {
        order: a.order,
        levels: a.levels,
        topo: a.topo.params(),
    };
    params.validate()?;
    let manifest = manifest_for(&params, a.theta, a.eps1, a.units.into(), a.seed)?;
    let files = collect_inputs(&a.input)?;
    let (done, failed) = run_all(&files, |s| featurize(s, &params))?;
    let mut seen = HashSet::new();
    let mut records = Vec::with_capacity(done.len());
    for (s, features) in done {
        if !seen.insert(s.id.clone()) {
            return Err(Error::DuplicateId(s.id).into());
        }
        records.push(features.into_record(&s.id));
    }
    info!("featurized {} structures", records.len());
    export_dataset(&DatasetMatrix { records, manifest }, &a.out)?;
    partial(failed, files.len())
}

fn cmd_coulomb(a: CoulombArgs) -> Outcome {
    let units: EnergyUnits = a.units.into();
    let params = TreecodeParams {
        eps1: a.eps1,
        order: a.order,
        levels: a.levels,
        theta: a.theta,
        unit_constant: units.constant(),
    };
    params.validate()?;
    let files = collect_inputs(&a.input)?;
    let (done, failed) = run_all(&files, |s| {
        let e = coulomb_energy_treecode(s.atoms(), &params)?;
        let direct = if a.check {
            Some(coulomb_energy_direct(s.atoms(), params.eps1, params.unit_constant)?)
        } else {
            None
        };
        Ok((e, direct))
    })?;
    let mut table = String::from(if a.check { "id,E_coul,direct,rel_err\n" } else { "id,E_coul\n" });
    for (s, (e, direct)) in done {
        table.push_str(&format!("{},{}", s.id, format_float(e)));
        if let Some(d) = direct {
            let rel = if d == 0.0 { (e - d).abs() } else { ((e - d) / d).abs() };
            table.push_str(&format!(",{},{}", format_float(d), format_float(rel)));
        }
        table.push('\n');
    }
    emit(&table, a.out.as_deref())?;
    partial(failed, files.len())
}

fn emit(text: &str, out: Option<&Path>) -> Outcome {
    match out {
        Some(path) => fs::write(path, text).map_err(io_error(path)),
        None => io::stdout().write_all(text.as_bytes()).map_err(io_error(Path::new("<stdout>"))),
    }
}

/// `dim,index,birth,death,essential` rows; essential bars are drawn up to the cutoff.
fn segments_csv(barcodes: &[Barcode], max_scale: f64) -> String {
    let mut out = String::from("dim,index,birth,death,essential\n");
    for b in barcodes {
        for (i, &(birth, death)) in b.bars.iter().enumerate() {
            let essential = death.is_infinite();
            let end = if essential { max_scale } else { death };
            out.push_str(&format!("{},{i},{},{},{}\n", b.dim, format_float(birth), format_float(end), u8::from(essential)));
        }
    }
    out
}

fn cmd_barcode(a: BarcodeArgs) -> Outcome {
    let params = RipsParams {
        max_scale: a.max_scale,
        max_dim: a.max_dim,
        max_simplices: a.max_simplices,
    };
    let selector: AtomSelector = a.selector.into();
    let files = collect_inputs(&a.input)?;
    let (done, failed) = run_all(&files, |s| barcode_for_selection(s, selector, &params))?;
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).map_err(io_error(dir))?;
    }
    let mut lines = String::new();
    for (s, barcodes) in done {
        let doc = serde_json::json!({
            "id": s.id,
            "selector": selector,
            "max_scale": a.max_scale,
            "barcodes": barcodes,
        });
        match &a.out {
            Some(dir) => {
                let path = dir.join(format!("{}.json", s.id));
                let text = serde_json::to_string_pretty(&doc).map_err(Error::from)? + "\n";
                fs::write(&path, text).map_err(io_error(&path))?;
                if a.segments {
                    let path = dir.join(format!("{}.segments.csv", s.id));
                    fs::write(&path, segments_csv(&barcodes, a.max_scale)).map_err(io_error(&path))?;
                }
            }
            None => {
                lines.push_str(&serde_json::to_string(&doc).map_err(Error::from)?);
                lines.push('\n');
            }
        }
    }
    emit(&lines, None)?;
    partial(failed, files.len())
}

fn read_radii(path: &Path) -> Result<Vec<f64>, Failure> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<f64>().map_err(|_| {
                Failure::Core(Error::Parse {
                    line: i + 1,
                    message: format!("invalid Born radius {:?} in {}", l.trim(), path.display()),
                })
            })
        })
        .collect()
}

fn cmd_gb(a: GbArgs) -> Outcome {
    let structure = read_pqr(&a.pqr)?;
    let radii = read_radii(&a.radii)?;
    let units: EnergyUnits = a.units.into();
    let ctx = GbContext::new(a.eps1, a.eps2, radii, units.constant())?;
    let terms = gb_terms(structure.atoms(), &ctx)?;
    let born: Vec<_> = structure
        .atoms()
        .iter()
        .zip(&terms.self_terms)
        .map(|(atom, &e)| serde_json::json!({ "serial": atom.serial, "name": atom.name, "born": e }))
        .collect();
    let doc = serde_json::json!({
        "id": structure.id,
        "units": units,
        "total": terms.total,
        "born_terms": born,
    });
    emit(&(serde_json::to_string_pretty(&doc).map_err(Error::from)? + "\n"), None)
}

fn cmd_dataset(a: DatasetArgs) -> Outcome {
    let mut dataset = import_dataset(&a.input)?;
    let file = fs::File::open(&a.labels).map_err(io_error(&a.labels))?;
    let labels = ingest_labels(io::BufReader::new(file))?;

    let known: HashSet<&str> = dataset.records.iter().map(|r| r.id.as_str()).collect();
    for id in labels.keys().filter(|id| !known.contains(id.as_str())) {
        warn!("label for {id} has no feature row");
    }
    dataset.records.retain_mut(|r| match labels.get(&r.id) {
        Some(l) if l.e_coul.is_some() || l.e_solv.is_some() => {
            r.labels = *l;
            true
        }
        _ => {
            warn!("{}: no labels, dropped", r.id);
            false
        }
    });

    let key = match a.iqr_key {
        IqrKey::ECoul => Some(LabelKey::Coulomb),
        IqrKey::ESolv => Some(LabelKey::Solvation),
        IqrKey::None => None,
    };
    let iqr = match key {
        Some(key) => {
            let (with_key, without): (Vec<_>, Vec<_>) =
                dataset.records.drain(..).partition(|r| key.get(&r.labels).is_some());
            let mut removed: Vec<String> = without.into_iter().map(|r| r.id).collect();
            let values: Vec<f64> = with_key.iter().map(|r| key.get(&r.labels).unwrap()).collect();
            let fences = iqr_fences(&values)?;
            for (r, v) in with_key.into_iter().zip(values) {
                if v >= fences.lower && v <= fences.upper {
                    dataset.records.push(r);
                } else {
                    removed.push(r.id);
                }
            }
            info!("IQR on {} removed {} records", key.name(), removed.len());
            Some(IqrRecord { key, fences, removed })
        }
        None => None,
    };
    if dataset.records.is_empty() {
        return Err(Failure::Usage("no labeled records left after filtering".into()));
    }

    let rows: Vec<Vec<f64>> = dataset
        .records
        .iter()
        .map(|r| r.electro.iter().copied().chain(r.topo.iter().map(|&c| f64::from(c))).collect())
        .collect();
    let mut label_scalers = BTreeMap::new();
    for key in [LabelKey::Coulomb, LabelKey::Solvation] {
        let values: Option<Vec<f64>> = dataset.records.iter().map(|r| key.get(&r.labels)).collect();
        if let Some(values) = values {
            label_scalers.insert(key.name().to_string(), ScalerParams::fit_column(&values)?);
        }
    }

    let n = dataset.records.len();
    let (train, test) = train_test_split(n, a.test_fraction, a.seed)?;
    let folds = kfold_assignments(train.len(), a.folds, a.seed)?;
    let mut splits = String::from("id,split,fold\n");
    let mut fold_of = vec![None; n];
    for (&i, &f) in train.iter().zip(&folds) {
        fold_of[i] = Some(f);
    }
    for (i, r) in dataset.records.iter().enumerate() {
        match fold_of[i] {
            Some(f) => splits.push_str(&format!("{},train,{f}\n", r.id)),
            None => splits.push_str(&format!("{},test,\n", r.id)),
        }
    }
    debug_assert_eq!(test.len() + train.len(), n);

    dataset.manifest.seed = a.seed;
    dataset.manifest.scalers = Some(DatasetScalers {
        features: ScalerParams::fit(&rows)?,
        labels: label_scalers,
    });
    dataset.manifest.iqr = iqr;
    dataset.manifest.split = Some(SplitRecord {
        seed: a.seed,
        test_fraction: a.test_fraction,
        folds: a.folds,
    });
    export_dataset(&dataset, &a.out)?;
    let path = a.out.join(SPLITS_FILE);
    fs::write(&path, splits).map_err(io_error(&path))
}

fn cmd_metrics(a: MetricsArgs) -> Outcome {
    let mut reader = csv::Reader::from_path(&a.input).map_err(Error::from)?;
    let headers = reader.headers().map_err(Error::from)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["y", "yhat"] {
        return Err(Error::Schema("metrics input header must be y,yhat".into()).into());
    }
    let (mut y, mut yhat) = (Vec::new(), Vec::new());
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(Error::from)?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse { line: row + 2, message: format!("invalid number {s:?}") })
        };
        y.push(parse(&record[0])?);
        yhat.push(parse(&record[1])?);
    }
    let m = metrics(&y, &yhat)?;
    emit(&(serde_json::to_string_pretty(&m).map_err(Error::from)? + "\n"), None)
}
