//! Command-line front end for `simplex-core`.
//!
//! [`run`] parses arguments, executes one subcommand and returns the process
//! exit code: 0 on success, 1 for usage errors, 2 for data errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use simplex_core::io::{fmt_f64, from_json_str, to_json_string, TensorRecord};
use simplex_core::model::PeDims;
use simplex_core::pooling::ClusteringConfig;
use simplex_core::{
    build_complex, cluster_nodes, downsample, eigensystem, filter_poly, forward, hodge_laplacian,
    load_params, project_chain, Ablation, FilterBank, GraphData, ModelConfig, ModelParams,
    SimplicialComplex,
};

/// Largest simplex dimension the command line builds.
pub const MAX_DIM_CAP: usize = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] simplex_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Parser)]
#[command(
    name = "simplex",
    version,
    about = "Hodge-Laplacian filtering and pooling on clique complexes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct Common {
    /// Graph JSON file.
    #[arg(long)]
    input: PathBuf,
    /// Directory for output files; nothing is written without it.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Simplex dimension to operate on.
    #[arg(long, default_value_t = 0)]
    k: usize,
    #[arg(long = "max-dim", default_value_t = MAX_DIM_CAP)]
    max_dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the clique complex: simplex lists and boundary matrices.
    Complex {
        #[command(flatten)]
        common: Common,
    },
    /// Eigenvalues (and optionally eigenvectors) of the k-th Hodge Laplacian.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Number of lowest eigenpairs; all by default.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        vectors: bool,
    },
    /// Laguerre polynomial filter on k-simplex signals.
    #[command(group(ArgGroup::new("bank").required(true).args(["filter", "theta"])))]
    Filter {
        #[command(flatten)]
        common: Common,
        /// FilterBank JSON file.
        #[arg(long)]
        filter: Option<PathBuf>,
        /// Scalar coefficients applied channel-wise, e.g. `1,0.5,-0.2`.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        theta: Option<Vec<f64>>,
        /// Filter a unit impulse on this simplex instead of the input signals.
        #[arg(long)]
        delta: Option<usize>,
    },
    /// Projection between two simplex dimensions.
    Project {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        from: usize,
        #[arg(long)]
        to: usize,
        /// Also project a unit impulse on this simplex.
        #[arg(long)]
        delta: Option<usize>,
    },
    /// Cluster nodes and coarsen the complex.
    Coarsen {
        #[command(flatten)]
        common: Common,
        /// Matching passes.
        #[arg(long, default_value_t = 1)]
        levels: usize,
    },
    /// Forward inference with a configuration and a parameter file.
    Forward {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        params: PathBuf,
    },
    /// Full model forward pass with random parameters drawn from --seed.
    Demo {
        #[command(flatten)]
        common: Common,
        /// Model configuration; a small built-in one otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Complex { common }
            | Command::Spectrum { common, .. }
            | Command::Filter { common, .. }
            | Command::Project { common, .. }
            | Command::Coarsen { common, .. }
            | Command::Forward { common, .. }
            | Command::Demo { common, .. } => common,
        }
    }
}

/// Files to write plus text for stdout.
#[derive(Default)]
struct Outcome {
    files: Vec<(String, String)>,
    stdout: String,
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Applies `SIMPLEX_THREADS` to the global rayon pool.
pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("SIMPLEX_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            CliError::Usage(format!(
                "SIMPLEX_THREADS must be a positive integer, got {value:?}"
            ))
        })?;
    // A second initialization in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn execute(cmd: &Command) -> Result<()> {
    configure_threads()?;
    let common = cmd.common();
    if common.max_dim > MAX_DIM_CAP {
        return Err(CliError::Usage(format!(
            "--max-dim {} exceeds the supported maximum {MAX_DIM_CAP}",
            common.max_dim
        )));
    }
    let data = read_graph(&common.input)?;
    let complex = build_complex(&data.graph, common.max_dim);
    log::info!("complex counts {:?}", complex.counts());
    let outcome = match cmd {
        Command::Complex { common } => complex_cmd(&complex, common)?,
        Command::Spectrum {
            common,
            count,
            vectors,
        } => spectrum_cmd(&complex, common, *count, *vectors)?,
        Command::Filter {
            common,
            filter,
            theta,
            delta,
        } => filter_cmd(
            &complex,
            &data,
            common,
            filter.as_deref(),
            theta.as_deref(),
            *delta,
        )?,
        Command::Project {
            common,
            from,
            to,
            delta,
        } => project_cmd(&complex, common, *from, *to, *delta)?,
        Command::Coarsen { common, levels } => coarsen_cmd(&complex, common, *levels)?,
        Command::Forward {
            common,
            config,
            params,
        } => {
            let cfg: ModelConfig = from_json_str(&read_text(config)?)
                .map_err(|e| e.at(config.display().to_string()))?;
            let params = load_params(params).map_err(|e| e.at(params.display().to_string()))?;
            forward_cmd(&complex, &data, common, &cfg, &params)?
        }
        Command::Demo { common, config } => {
            let cfg = match config {
                Some(path) => from_json_str(&read_text(path)?)
                    .map_err(|e| e.at(path.display().to_string()))?,
                None => demo_config(),
            };
            demo_cmd(&complex, &data, common, &cfg)?
        }
    };
    if let Some(dir) = &common.output {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.clone(),
            source,
        })?;
        for (name, contents) in &outcome.files {
            let path = dir.join(name);
            fs::write(&path, contents).map_err(|source| CliError::Io { path, source })?;
        }
    }
    print!("{}", outcome.stdout);
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_graph(path: &Path) -> Result<GraphData> {
    Ok(GraphData::from_json(&read_text(path)?).map_err(|e| e.at(path.display().to_string()))?)
}

fn check_k(c: &SimplicialComplex, k: usize) -> Result<()> {
    if k > c.max_dim() {
        return Err(simplex_core::Error::DimensionOutOfRange {
            k,
            min: 0,
            max: c.max_dim(),
        }
        .into());
    }
    Ok(())
}

fn csv_text(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// `index,c0,c1,...` rows of a signal matrix.
fn matrix_csv(m: &DMatrix<f64>) -> Result<String> {
    let mut header = vec!["index".to_string()];
    header.extend((0..m.ncols()).map(|j| format!("c{j}")));
    csv_text(
        &header,
        (0..m.nrows()).map(|i| {
            let mut row = vec![i.to_string()];
            row.extend(m.row(i).iter().map(|&v| fmt_f64(v)));
            row
        }),
    )
}

fn matrix_file(stem: &str, m: &DMatrix<f64>, format: Format) -> Result<(String, String)> {
    Ok(match format {
        Format::Csv => (format!("{stem}.csv"), matrix_csv(m)?),
        Format::Json => (
            format!("{stem}.json"),
            to_json_string(&TensorRecord::from_matrix(m))?,
        ),
    })
}

fn simplices_csv(simplices: &[Vec<usize>]) -> Result<String> {
    let width = simplices.first().map_or(1, Vec::len);
    let mut header = vec!["index".to_string()];
    header.extend((0..width).map(|j| format!("v{j}")));
    csv_text(
        &header,
        simplices.iter().enumerate().map(|(i, s)| {
            let mut row = vec![i.to_string()];
            row.extend(s.iter().map(usize::to_string));
            row
        }),
    )
}

#[derive(serde::Serialize)]
struct ComplexFile<'a> {
    max_dim: usize,
    counts: Vec<usize>,
    simplices: Vec<&'a [Vec<usize>]>,
}

/// Simplex lists in the requested format and one COO file per boundary matrix.
fn complex_files(
    c: &SimplicialComplex,
    prefix: &str,
    format: Format,
) -> Result<Vec<(String, String)>> {
    let mut files = Vec::new();
    match format {
        Format::Csv => {
            for k in 0..=c.max_dim() {
                files.push((
                    format!("{prefix}simplices_{k}.csv"),
                    simplices_csv(c.simplices(k)?)?,
                ));
            }
        }
        Format::Json => {
            let file = ComplexFile {
                max_dim: c.max_dim(),
                counts: c.counts(),
                simplices: (0..=c.max_dim())
                    .map(|k| c.simplices(k))
                    .collect::<Result<_, _>>()?,
            };
            files.push((format!("{prefix}complex.json"), to_json_string(&file)?));
        }
    }
    for k in 1..=c.max_dim() {
        files.push((
            format!("{prefix}boundary_{k}.coo"),
            c.boundary_operator(k)?.to_coo_text(),
        ));
    }
    Ok(files)
}

fn counts_line(c: &SimplicialComplex) -> String {
    let counts: Vec<String> = c.counts().iter().map(usize::to_string).collect();
    format!("counts: {}\n", counts.join(" "))
}

fn complex_cmd(c: &SimplicialComplex, common: &Common) -> Result<Outcome> {
    Ok(Outcome {
        files: complex_files(c, "", common.format)?,
        stdout: counts_line(c),
    })
}

fn spectrum_cmd(
    c: &SimplicialComplex,
    common: &Common,
    count: Option<usize>,
    vectors: bool,
) -> Result<Outcome> {
    let k = common.k;
    check_k(c, k)?;
    let es = eigensystem(&hodge_laplacian(c, k)?, count)?;
    let (name, table) = match common.format {
        Format::Csv => (
            format!("spectrum_{k}.csv"),
            csv_text(
                &["index".into(), "eigenvalue".into()],
                es.eigenvalues
                    .iter()
                    .enumerate()
                    .map(|(i, v)| vec![i.to_string(), fmt_f64(*v)]),
            )?,
        ),
        Format::Json => {
            #[derive(serde::Serialize)]
            struct SpectrumFile<'a> {
                k: usize,
                eigenvalues: &'a [f64],
            }
            (
                format!("spectrum_{k}.json"),
                to_json_string(&SpectrumFile {
                    k,
                    eigenvalues: es.eigenvalues.as_slice(),
                })?,
            )
        }
    };
    let mut files = vec![(name, table.clone())];
    if vectors {
        files.push(matrix_file(
            &format!("eigenvectors_{k}"),
            &es.eigenvectors,
            common.format,
        )?);
    }
    Ok(Outcome {
        files,
        stdout: table,
    })
}

/// Input signal for dimension `k`: an impulse, the file's signals, or ones.
fn signal(
    c: &SimplicialComplex,
    data: &GraphData,
    k: usize,
    delta: Option<usize>,
) -> Result<DMatrix<f64>> {
    let n = c.count(k);
    if let Some(i) = delta {
        if i >= n {
            return Err(CliError::Usage(format!(
                "--delta {i} out of range for {n} {k}-simplices"
            )));
        }
        let mut x = DMatrix::zeros(n, 1);
        x[(i, 0)] = 1.0;
        return Ok(x);
    }
    let given = match k {
        0 => data.node_signals.clone(),
        1 => data.edge_signals.clone(),
        _ => None,
    };
    Ok(given.unwrap_or_else(|| DMatrix::from_element(n, 1, 1.0)))
}

fn filter_cmd(
    c: &SimplicialComplex,
    data: &GraphData,
    common: &Common,
    filter: Option<&Path>,
    theta: Option<&[f64]>,
    delta: Option<usize>,
) -> Result<Outcome> {
    let k = common.k;
    check_k(c, k)?;
    let x = signal(c, data, k, delta)?;
    let bank = match (filter, theta) {
        (Some(path), _) => {
            let fb: FilterBank =
                from_json_str(&read_text(path)?).map_err(|e| e.at(path.display().to_string()))?;
            if fb.k() != k {
                return Err(CliError::Usage(format!(
                    "filter file is for k = {}, --k is {k}",
                    fb.k()
                )));
            }
            fb
        }
        (None, Some(coeffs)) => {
            let d = x.ncols();
            FilterBank::new(
                k,
                coeffs
                    .iter()
                    .map(|&t| DMatrix::identity(d, d) * t)
                    .collect(),
            )?
        }
        (None, None) => unreachable!("clap requires --filter or --theta"),
    };
    let y = filter_poly(&hodge_laplacian(c, k)?, &bank, &x)?;
    let file = matrix_file(&format!("filtered_{k}"), &y, common.format)?;
    let stdout = format!(
        "filtered {} {k}-simplices x {} channels\n",
        y.nrows(),
        y.ncols()
    );
    Ok(Outcome {
        files: vec![file],
        stdout,
    })
}

fn project_cmd(
    c: &SimplicialComplex,
    common: &Common,
    from: usize,
    to: usize,
    delta: Option<usize>,
) -> Result<Outcome> {
    if from == to {
        return Err(CliError::Usage("--from and --to must differ".into()));
    }
    check_k(c, from)?;
    check_k(c, to)?;
    let op = project_chain(c, from, to)?;
    let mut files = vec![(
        format!("projection_{from}_{to}.coo"),
        op.matrix.to_coo_text(),
    )];
    if let Some(i) = delta {
        let n = c.count(from);
        if i >= n {
            return Err(CliError::Usage(format!(
                "--delta {i} out of range for {n} {from}-simplices"
            )));
        }
        let mut x = DMatrix::zeros(n, 1);
        x[(i, 0)] = 1.0;
        files.push(matrix_file(
            &format!("projected_{from}_{to}"),
            &op.apply(&x)?,
            common.format,
        )?);
    }
    let (rows, cols) = op.matrix.shape();
    Ok(Outcome {
        files,
        stdout: format!(
            "projection {from} -> {to}: {rows}x{cols}, {} nonzeros\n",
            op.matrix.nnz()
        ),
    })
}

fn coarsen_cmd(c: &SimplicialComplex, common: &Common, levels: usize) -> Result<Outcome> {
    if levels == 0 {
        return Err(CliError::Usage("--levels must be at least 1".into()));
    }
    let nc = cluster_nodes(c, ClusteringConfig { levels });
    let res = downsample(c, &nc)?;
    let mut files = Vec::new();
    let clusters: String = nc
        .cluster_of()
        .iter()
        .enumerate()
        .map(|(v, q)| format!("{v} {q}\n"))
        .collect();
    files.push(("clusters.txt".to_string(), clusters));
    for (k, s) in res.assignments.iter().enumerate() {
        files.push((format!("assignment_{k}.coo"), s.to_coo_text()));
    }
    files.extend(complex_files(
        &res.coarse_complex,
        "coarse_",
        common.format,
    )?);
    let stdout = format!(
        "before {}after {}",
        counts_line(c).trim_start_matches("counts: "),
        counts_line(&res.coarse_complex).trim_start_matches("counts: ")
    );
    Ok(Outcome { files, stdout })
}

fn model_inputs(c: &SimplicialComplex, data: &GraphData) -> (DMatrix<f64>, DMatrix<f64>) {
    let x0 = data
        .node_signals
        .clone()
        .unwrap_or_else(|| DMatrix::from_element(c.count(0), 1, 1.0));
    let x1 = data
        .edge_signals
        .clone()
        .unwrap_or_else(|| DMatrix::from_element(c.count(1), 1, 1.0));
    (x0, x1)
}

fn prediction_file(y: &[f64], format: Format) -> Result<(String, String)> {
    Ok(match format {
        Format::Csv => (
            "prediction.csv".into(),
            csv_text(
                &["output".into(), "value".into()],
                y.iter()
                    .enumerate()
                    .map(|(i, v)| vec![i.to_string(), fmt_f64(*v)]),
            )?,
        ),
        Format::Json => ("prediction.json".into(), to_json_string(&y)?),
    })
}

fn prediction_stdout(y: &[f64]) -> String {
    let values: Vec<String> = y.iter().map(|&v| fmt_f64(v)).collect();
    format!("prediction: {}\n", values.join(" "))
}

fn check_model_dim(c: &SimplicialComplex, cfg: &ModelConfig) -> Result<()> {
    if cfg.max_dim > MAX_DIM_CAP {
        return Err(CliError::Usage(format!(
            "config max_dim {} exceeds the supported maximum {MAX_DIM_CAP}",
            cfg.max_dim
        )));
    }
    if cfg.edge_path && c.max_dim() < 1 {
        return Err(CliError::Usage(
            "the model's edge path needs --max-dim of at least 1".into(),
        ));
    }
    Ok(())
}

fn forward_cmd(
    c: &SimplicialComplex,
    data: &GraphData,
    common: &Common,
    cfg: &ModelConfig,
    params: &ModelParams,
) -> Result<Outcome> {
    check_model_dim(c, cfg)?;
    let (x0, x1) = model_inputs(c, data);
    let y = forward(c, &x0, &x1, params, cfg)?;
    Ok(Outcome {
        files: vec![prediction_file(&y, common.format)?],
        stdout: prediction_stdout(&y),
    })
}

/// Two blocks of the full model (pooling, interaction, edge path) at small widths.
pub fn demo_config() -> ModelConfig {
    let base = ModelConfig {
        filters_per_layer: vec![8, 8],
        qk_dim: 4,
        fc_layers: vec![8, 1],
        pe_dims: PeDims { node: 4, edge: 4 },
        ..ModelConfig::default()
    };
    Ablation::M4.apply(&base)
}

fn demo_cmd(
    c: &SimplicialComplex,
    data: &GraphData,
    common: &Common,
    cfg: &ModelConfig,
) -> Result<Outcome> {
    check_model_dim(c, cfg)?;
    let (x0, x1) = model_inputs(c, data);
    let node_in = x0.ncols() + cfg.pe_dims.node;
    let edge_in = if cfg.edge_path {
        x1.ncols() + cfg.pe_dims.edge
    } else {
        0
    };
    let params = ModelParams::random(cfg, node_in, edge_in, common.seed)?;
    let y = forward(c, &x0, &x1, &params, cfg)?;
    Ok(Outcome {
        files: vec![
            prediction_file(&y, common.format)?,
            ("params.json".into(), params.to_json()?),
            ("config.json".into(), to_json_string(cfg)?),
        ],
        stdout: prediction_stdout(&y),
    })
}
