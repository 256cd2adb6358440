//! Command-line front end: `simulate`, `fit`, and `plot` subcommands.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical
//! degeneracy. Every command writes a manifest with enough of its invocation
//! to replay it exactly (the output directory is the only free parameter).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;

use crate::diagnostics::{
    block_summary, fit_with_projection, sum_ratio, BlockSummary, FitResult,
};
use crate::error::{Error, Result};
use crate::estimators::{pca1_fit, pca2_fit, pca3_fit, project_from_pi, project_from_q,
    project_pca_null};
use crate::io;
use crate::model::{
    CorrelationReport, EigenDecomposition, GenotypeMatrix, MissingPolicy, PopulationLabels,
    ProjectionMatrix, ProjectionMethod,
};
use crate::plot;
use crate::simulate::{simulate, FreqPrior, ScenarioParams, ScenarioSpec};

#[derive(Parser, Debug)]
#[command(name = "admixfit", version, about = "Model-fit diagnostics for PCA and admixture analyses of genotype data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate genotype data for one of the five built-in scenarios.
    Simulate(SimulateArgs),
    /// Fit a projection and compute the residual-correlation diagnostic.
    Fit(FitArgs),
    /// Render SVG figures from a fit output directory.
    Plot {
        #[command(subcommand)]
        kind: PlotCommand,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
pub enum GenoFormat {
    Tsv,
    Bed,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Scenario id (1 unadmixed, 2 admixed, 3 spatial chain, 4 ghost tree,
    /// 5 backcross pedigree).
    #[arg(long)]
    pub scenario: u8,
    /// Number of SNPs before any MAF filtering.
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub seed: u64,
    /// Per-population sample counts (scenarios 1 and 2).
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Minor-allele-frequency threshold override.
    #[arg(long)]
    pub maf: Option<f64>,
    #[arg(long, default_value = "sim_out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = GenoFormat::Tsv)]
    pub format: GenoFormat,
    /// Scenario 3: number of populations in the chain.
    #[arg(long)]
    pub chain_len: Option<usize>,
    /// Scenario 3: per-step drift Fst.
    #[arg(long)]
    pub step_fst: Option<f64>,
    /// Uniform frequency prior lower bound (scenarios 1, 2, 3, 5).
    #[arg(long)]
    pub freq_lo: Option<f64>,
    /// Uniform frequency prior upper bound (scenarios 1, 2, 3, 5).
    #[arg(long)]
    pub freq_hi: Option<f64>,
    /// Scenario 4: Beta shape of the ancestral frequency prior.
    #[arg(long)]
    pub beta_shape: Option<f64>,
    /// Scenario 4: ghost ancestry fraction of the admixed population.
    #[arg(long)]
    pub ghost_weight: Option<f64>,
    /// Scenario 5: parental population Fst.
    #[arg(long)]
    pub parental_fst: Option<f64>,
    /// Scenario 5: number of backcross generations.
    #[arg(long)]
    pub backcross_depth: Option<usize>,
    /// Scenario 5: individuals per hybrid class.
    #[arg(long)]
    pub per_class: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
pub enum MethodArg {
    Pca1,
    Pca2,
    Pca3,
    PcaNull,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
pub enum MissingArg {
    Reject,
    DropSnp,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["method", "q", "pi"])))]
#[command(group(ArgGroup::new("genosrc").required(true).args(["geno", "bed"])))]
pub struct FitArgs {
    /// Genotypes as TSV (one SNP per row).
    #[arg(long)]
    pub geno: Option<PathBuf>,
    /// PLINK fileset prefix (expects .bed/.bim/.fam).
    #[arg(long)]
    pub bed: Option<PathBuf>,
    /// PCA-based projection estimator.
    #[arg(long, value_enum, requires = "k")]
    pub method: Option<MethodArg>,
    /// Target dimension k'.
    #[arg(long)]
    pub k: Option<usize>,
    /// Admixture proportions file (n rows of k' values).
    #[arg(long)]
    pub q: Option<PathBuf>,
    /// Individual allele frequency matrix (SNP rows, one column per
    /// individual); requires --k.
    #[arg(long, requires = "k")]
    pub pi: Option<PathBuf>,
    /// Population labels, one per line.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value = "fit_out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = MissingArg::DropSnp)]
    pub missing: MissingArg,
}

#[derive(Subcommand, Debug)]
pub enum PlotCommand {
    /// Correlation heatmap: b-hat above the diagonal, difference below.
    Heatmap(PlotArgs),
    /// Scatter plot of individual PC coordinates.
    Scatter(PlotScatterArgs),
    /// Eigenvalue scree plot.
    Scree(PlotArgs),
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// Fit output directory.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PlotScatterArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// 1-based component for the x axis (default depends on the method).
    #[arg(long)]
    pub comp_x: Option<usize>,
    /// 1-based component for the y axis.
    #[arg(long)]
    pub comp_y: Option<usize>,
}

/// Map an error onto the documented exit codes.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Usage(_) | Error::KPrimeOutOfRange { .. } => 2,
        Error::Degenerate(_)
        | Error::RankDeficient { .. }
        | Error::AsymmetricInput { .. }
        | Error::InvariantViolation { .. } => 4,
        _ => 3,
    }
}

/// `argv` is the raw invocation (without the program name), used to build
/// replayable manifests; the `--out DIR` pair is stripped before storage.
pub fn run(cli: Cli, argv: &[String]) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(&args, argv),
        Command::Fit(args) => cmd_fit(&args, argv),
        Command::Plot { kind } => cmd_plot(&kind, argv),
    }
}

fn strip_out_flag(argv: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--out" {
            let _ = it.next();
        } else {
            out.push(a.clone());
        }
    }
    out
}

fn manifest_entries(command: &str, argv: &[String]) -> Vec<(String, String)> {
    vec![
        ("command".to_string(), command.to_string()),
        ("args".to_string(), strip_out_flag(argv).join(" ")),
    ]
}

fn build_spec(args: &SimulateArgs) -> Result<ScenarioSpec> {
    let usage = |msg: String| Error::Usage(msg);
    if let Some(sizes) = &args.sizes {
        match args.scenario {
            1 if sizes.len() < 2 => {
                return Err(usage("--sizes: scenario 1 needs at least two populations".into()))
            }
            2 if sizes.len() != 3 => {
                return Err(usage(
                    "--sizes: scenario 2 needs exactly three blocks (pop1, admixed, pop2)".into(),
                ))
            }
            _ => {}
        }
    }
    let mut spec = ScenarioSpec::preset(args.scenario, args.m, args.sizes.clone(), args.seed)
        .map_err(|e| usage(format!("--scenario: {}", e)))?;
    if let Some(maf) = args.maf {
        spec.maf_threshold = maf;
    }
    let set_uniform = |prior: &mut FreqPrior, lo: Option<f64>, hi: Option<f64>| {
        if let FreqPrior::Uniform { lo: plo, hi: phi } = prior {
            if let Some(v) = lo {
                *plo = v;
            }
            if let Some(v) = hi {
                *phi = v;
            }
        }
    };
    match &mut spec.params {
        ScenarioParams::Unadmixed { prior, .. } | ScenarioParams::Admixed { prior, .. } => {
            set_uniform(prior, args.freq_lo, args.freq_hi);
        }
        ScenarioParams::SpatialChain {
            chain_len,
            step_fst,
            prior,
            ..
        } => {
            if let Some(v) = args.chain_len {
                *chain_len = v;
            }
            if let Some(v) = args.step_fst {
                *step_fst = v;
            }
            set_uniform(prior, args.freq_lo, args.freq_hi);
        }
        ScenarioParams::TreeGhost {
            beta_shape,
            ghost_weight,
            ..
        } => {
            if let Some(v) = args.beta_shape {
                *beta_shape = v;
            }
            if let Some(v) = args.ghost_weight {
                *ghost_weight = v;
            }
        }
        ScenarioParams::Backcross {
            fst,
            depth,
            per_class,
            prior,
            ..
        } => {
            if let Some(v) = args.parental_fst {
                *fst = v;
            }
            if let Some(v) = args.backcross_depth {
                *depth = v;
            }
            if let Some(v) = args.per_class {
                *per_class = v;
            }
            set_uniform(prior, args.freq_lo, args.freq_hi);
        }
    }
    spec.validate().map_err(|e| usage(e.to_string()))?;
    Ok(spec)
}

fn cmd_simulate(args: &SimulateArgs, argv: &[String]) -> Result<()> {
    let spec = build_spec(args)?;
    let ds = simulate(&spec)?;
    fs::create_dir_all(&args.out)?;
    match args.format {
        GenoFormat::Tsv => {
            io::write_tsv_genotypes(&ds.genotypes, &args.out.join("genotypes.tsv"))?
        }
        GenoFormat::Bed => io::write_bed(
            &ds.genotypes,
            &args.out.join("genotypes.bed"),
            &args.out.join("genotypes.bim"),
            &args.out.join("genotypes.fam"),
        )?,
    }
    io::write_labels(ds.labels.assignment(), &args.out.join("labels.txt"))?;
    if let Some(truth) = &ds.truth {
        let k = truth.k();
        let headers: Vec<String> = (1..=k).map(|i| format!("anc{}", i)).collect();
        io::write_matrix_tsv(
            truth.q().t(),
            &headers,
            &args.out.join("truth_Q.tsv"),
        )?;
        io::write_matrix_tsv(truth.f(), &headers, &args.out.join("truth_F.tsv"))?;
    }
    let kept: Vec<String> = ds.kept_snp_indices.iter().map(|i| i.to_string()).collect();
    io::write_labels(&kept, &args.out.join("kept_snps.txt"))?;
    io::write_manifest(&manifest_entries("simulate", argv), &args.out.join("manifest.txt"))?;
    Ok(())
}

fn load_genotypes(args: &FitArgs) -> Result<GenotypeMatrix> {
    let policy = match args.missing {
        MissingArg::Reject => MissingPolicy::Reject,
        MissingArg::DropSnp => MissingPolicy::DropSnp,
    };
    let report = if let Some(path) = &args.geno {
        io::read_tsv_genotypes(path, policy)?
    } else {
        let prefix = args.bed.as_ref().expect("clap group enforces a source");
        io::read_bed(
            &prefix.with_extension("bed"),
            &prefix.with_extension("bim"),
            &prefix.with_extension("fam"),
            policy,
        )?
    };
    if report.dropped_snps > 0 {
        log::warn!("dropped {} SNPs with missing genotypes", report.dropped_snps);
    }
    Ok(report.genotypes)
}

fn fit_projection(
    args: &FitArgs,
    g: &GenotypeMatrix,
) -> Result<(ProjectionMatrix, Option<EigenDecomposition>)> {
    if let Some(method) = args.method {
        let k = args.k.expect("clap requires --k with --method");
        return match method {
            MethodArg::Pca1 => pca1_fit(g, k).map(|(p, e)| (p, Some(e))),
            MethodArg::Pca2 => pca2_fit(g, k).map(|(p, e)| (p, Some(e))),
            MethodArg::Pca3 => pca3_fit(g, k).map(|(p, e, _)| (p, Some(e))),
            MethodArg::PcaNull => {
                if k != 1 {
                    return Err(Error::Usage(format!(
                        "--method pca-null fixes k' = 1, got --k {}",
                        k
                    )));
                }
                project_pca_null(g.n()).map(|p| (p, None))
            }
        };
    }
    if let Some(qpath) = &args.q {
        let q = io::read_q(qpath)?;
        if q.ncols() != g.n() {
            return Err(Error::DimensionMismatch(format!(
                "Q file covers {} individuals, genotypes have {}",
                q.ncols(),
                g.n()
            )));
        }
        if let Some(k) = args.k {
            if k != q.nrows() {
                return Err(Error::Usage(format!(
                    "--k {} conflicts with the {} columns of the Q file",
                    k,
                    q.nrows()
                )));
            }
        }
        return project_from_q(q.view()).map(|p| (p, None));
    }
    let pipath = args.pi.as_ref().expect("clap group enforces a source");
    let pi = io::read_p(pipath)?;
    if pi.ncols() != g.n() {
        return Err(Error::DimensionMismatch(format!(
            "Pi file covers {} individuals, genotypes have {}",
            pi.ncols(),
            g.n()
        )));
    }
    let k = args.k.expect("clap requires --k with --pi");
    project_from_pi(pi.view(), k).map(|p| (p, None))
}

fn sample_headers(g: &GenotypeMatrix) -> Vec<String> {
    g.sample_ids()
        .map(|ids| ids.to_vec())
        .unwrap_or_else(|| (0..g.n()).map(|i| format!("ind{}", i)).collect())
}

fn write_mask_tsv(mask: &Array2<bool>, headers: &[String], path: &Path) -> Result<()> {
    let as_f64 = mask.mapv(|b| if b { 1.0 } else { 0.0 });
    io::write_matrix_tsv(as_f64.view(), headers, path)
}

fn write_block_summary_tsv(summary: &BlockSummary, path: &Path) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(
        w,
        "block_a\tblock_b\tcount\tb_mean\tb_sd\tdiff_mean\tdiff_sd\treference"
    )?;
    for row in &summary.rows {
        let (count, bm, bs, dm, dsd) = match &row.stats {
            Some(s) => (
                s.count.to_string(),
                format!("{:.17e}", s.b_mean),
                format!("{:.17e}", s.b_sd),
                format!("{:.17e}", s.diff_mean),
                format!("{:.17e}", s.diff_sd),
            ),
            None => (
                "0".into(),
                "NA".into(),
                "NA".into(),
                "NA".into(),
                "NA".into(),
            ),
        };
        let reference = row
            .reference
            .map(|r| format!("{:.17e}", r))
            .unwrap_or_else(|| "NA".into());
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            row.block_a, row.block_b, count, bm, bs, dm, dsd, reference
        )?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_fit(args: &FitArgs, argv: &[String]) -> Result<()> {
    let g = load_genotypes(args)?;
    let labels = match &args.labels {
        Some(path) => {
            let raw = io::read_labels(path)?;
            if raw.len() != g.n() {
                return Err(Error::DimensionMismatch(format!(
                    "{} labels for {} individuals",
                    raw.len(),
                    g.n()
                )));
            }
            Some(PopulationLabels::new(raw)?)
        }
        None => None,
    };
    let (p, eig) = fit_projection(args, &g)?;
    let fit: FitResult = fit_with_projection(&g, &p, labels)?;
    fs::create_dir_all(&args.out)?;
    let headers = sample_headers(&g);
    io::write_matrix_tsv(fit.report.b_hat.view(), &headers, &args.out.join("b_hat.tsv"))?;
    io::write_matrix_tsv(fit.report.c_hat.view(), &headers, &args.out.join("c_hat.tsv"))?;
    io::write_matrix_tsv(fit.report.diff.view(), &headers, &args.out.join("diff.tsv"))?;
    write_mask_tsv(&fit.report.undefined_mask, &headers, &args.out.join("mask.tsv"))?;
    if fit.report.labels.is_some() {
        let summary = block_summary(&fit.report)?;
        write_block_summary_tsv(&summary, &args.out.join("block_summary.tsv"))?;
        io::write_labels(
            fit.report.labels.as_ref().unwrap().assignment(),
            &args.out.join("labels.txt"),
        )?;
    }
    if let Some(eig) = &eig {
        let ev = eig
            .eigenvalues()
            .to_owned()
            .into_shape_with_order((eig.n(), 1))
            .expect("column reshape");
        io::write_matrix_tsv(
            ev.view(),
            &["eigenvalue".to_string()],
            &args.out.join("eigenvalues.tsv"),
        )?;
        let k = p.k_prime().min(eig.n());
        let mut pcs = Array2::<f64>::zeros((eig.n(), k));
        for c in 0..k {
            let scale = eig.eigenvalues()[c].max(0.0).sqrt();
            for i in 0..eig.n() {
                pcs[(i, c)] = eig.eigenvectors()[(i, c)] * scale;
            }
        }
        let pc_headers: Vec<String> = (1..=k).map(|c| format!("PC{}", c)).collect();
        io::write_matrix_tsv(pcs.view(), &pc_headers, &args.out.join("pcs.tsv"))?;
    }
    let ratio = sum_ratio(fit.b_cov.view());
    let stats = ndarray::array![[
        g.m() as f64,
        g.n() as f64,
        p.k_prime() as f64,
        ratio.unwrap_or(f64::NAN),
    ]];
    io::write_matrix_tsv(
        stats.view(),
        &[
            "m".to_string(),
            "n".to_string(),
            "k_prime".to_string(),
            "sum_ratio".to_string(),
        ],
        &args.out.join("fit_stats.tsv"),
    )?;
    let mut entries = manifest_entries("fit", argv);
    entries.push(("method".to_string(), p.method().as_str().to_string()));
    entries.push(("k_prime".to_string(), p.k_prime().to_string()));
    io::write_manifest(&entries, &args.out.join("manifest.txt"))?;
    Ok(())
}

fn read_report_dir(dir: &Path) -> Result<CorrelationReport> {
    let (_, b) = io::read_matrix_tsv(&dir.join("b_hat.tsv"))?;
    let (_, c) = io::read_matrix_tsv(&dir.join("c_hat.tsv"))?;
    let (_, mask_f) = io::read_matrix_tsv(&dir.join("mask.tsv"))?;
    let mask = mask_f.mapv(|v| v != 0.0);
    let labels = if dir.join("labels.txt").exists() {
        Some(PopulationLabels::new(io::read_labels(&dir.join("labels.txt"))?)?)
    } else {
        None
    };
    CorrelationReport::new(b, c, labels, mask)
}

fn manifest_value(dir: &Path, key: &str) -> Result<Option<String>> {
    let entries = io::read_manifest(&dir.join("manifest.txt"))?;
    Ok(entries.into_iter().find(|(k, _)| k == key).map(|(_, v)| v))
}

fn cmd_plot(kind: &PlotCommand, argv: &[String]) -> Result<()> {
    match kind {
        PlotCommand::Heatmap(args) => {
            let report = read_report_dir(&args.input)?;
            let svg = plot::heatmap_svg(&report);
            fs::write(&args.out, svg)?;
            write_plot_manifest(&args.out, argv)
        }
        PlotCommand::Scree(args) => {
            let (_, ev) = io::read_matrix_tsv(&args.input.join("eigenvalues.tsv"))?;
            let method = manifest_value(&args.input, "method")?.unwrap_or_default();
            let vals: Vec<f64> = ev.column(0).to_vec();
            let svg = plot::scree_svg(&vals, method == "pca1")?;
            fs::write(&args.out, svg)?;
            write_plot_manifest(&args.out, argv)
        }
        PlotCommand::Scatter(args) => {
            let pcs_path = args.input.join("pcs.tsv");
            if !pcs_path.exists() {
                return Err(Error::Ingestion(
                    "no pcs.tsv in fit directory: scatter needs a PCA-based fit".into(),
                ));
            }
            let (_, pcs) = io::read_matrix_tsv(&pcs_path)?;
            let method = manifest_value(&args.input, "method")?.unwrap_or_default();
            let k_prime: usize = manifest_value(&args.input, "k_prime")?
                .and_then(|v| v.parse().ok())
                .unwrap_or(pcs.ncols());
            let pm = match method.as_str() {
                "pca1" => ProjectionMethod::Pca1,
                "pca2" => ProjectionMethod::Pca2,
                "pca3" => ProjectionMethod::Pca3,
                _ => ProjectionMethod::Exact,
            };
            let (dx, dy) = plot::default_scatter_components(pm, k_prime);
            let cx = args.comp_x.map(|c| c - 1).unwrap_or(dx);
            let cy = args.comp_y.map(|c| c - 1).unwrap_or(dy);
            if cx >= pcs.ncols() || cy >= pcs.ncols() {
                return Err(Error::Usage(format!(
                    "components ({}, {}) out of range: pcs.tsv has {} columns",
                    cx + 1,
                    cy + 1,
                    pcs.ncols()
                )));
            }
            let coords: Vec<(f64, f64)> =
                (0..pcs.nrows()).map(|i| (pcs[(i, cx)], pcs[(i, cy)])).collect();
            let labels = if args.input.join("labels.txt").exists() {
                Some(PopulationLabels::new(io::read_labels(
                    &args.input.join("labels.txt"),
                )?)?)
            } else {
                None
            };
            let svg = plot::scatter_svg(
                &coords,
                labels.as_ref(),
                &format!("PC {}", cx + 1),
                &format!("PC {}", cy + 1),
            )?;
            fs::write(&args.out, svg)?;
            write_plot_manifest(&args.out, argv)
        }
    }
}

fn write_plot_manifest(out: &Path, argv: &[String]) -> Result<()> {
    let manifest = out.with_extension("manifest.txt");
    io::write_manifest(&manifest_entries("plot", argv), &manifest)
}
