use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use clap::Parser;
use rayon::prelude::*;
use serde_json::json;

use phnmf::eval::{
    accuracy_experiment, alignment_csv, regression_replicate, replicate_seed, summarize,
    ExperimentConfig,
};
use phnmf::hierarchy::{
    hnmf_topdown, phnmf, sorted_row_order, to_dot, write_pgm, Alpha, HnmfConfig, RankPolicy,
    TreeExport,
};
use phnmf::ingest::{encode_survey, load_csv, SurveySchema};
use phnmf::linalg::{io, Matrix};
use phnmf::model_select::select_rank_with_report;
use phnmf::nmf::NmfConfig;
use phnmf::synthgen::{generate, SyntheticSpec};
use phnmf::Scalar;

use crate::manifest::{artifacts, phnmf_io, RunManifest, MANIFEST_NAME};
use crate::{
    AccuracyArgs, Cli, Command, HnmfArgs, IngestArgs, PhnmfArgs, Precision, RankArgs,
    RegressionArgs, ReplayArgs, SynthArgs, TreeArgs,
};

pub fn run(cli: Cli, argv: &[String]) -> Result<ExitCode> {
    match cli.command {
        Command::Synth(a) => synth(&a, argv),
        Command::Phnmf(a) => phnmf_cmd(&a, argv),
        Command::Hnmf(a) => hnmf_cmd(&a, argv),
        Command::Rank(a) => rank(&a, argv),
        Command::Accuracy(a) => accuracy(&a, argv),
        Command::Regression(a) => regression(&a, argv),
        Command::Ingest(a) => ingest(&a, argv),
        Command::Replay(a) => replay(&a),
    }
}

/// Collects written files, then hashes them into the manifest.
struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
    start: Instant,
}

impl Outputs {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| phnmf_io(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            start: Instant::now(),
        })
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| phnmf_io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    fn matrix<T: Scalar>(&mut self, name: &str, m: &Matrix<T>) -> Result<()> {
        let path = self.dir.join(name);
        io::save_csv(m, &path)?;
        self.written.push(path);
        Ok(())
    }

    fn finish(
        self,
        argv: &[String],
        command: &str,
        config: serde_json::Value,
        seed: Option<u64>,
    ) -> Result<ExitCode> {
        let arts = artifacts(&self.dir, &self.written)?;
        RunManifest::new(argv, command, config, seed, arts, self.start.elapsed()).write(&self.dir)?;
        Ok(ExitCode::SUCCESS)
    }
}

fn validation(msg: String) -> anyhow::Error {
    phnmf::Error::Validation(msg).into()
}

fn synth(a: &SynthArgs, argv: &[String]) -> Result<ExitCode> {
    let mut out = Outputs::create(&a.out_dir)?;
    let spec = SyntheticSpec {
        n_per_group: a.rows_per_group,
        ..SyntheticSpec::for_kind(a.kind.into(), a.seed)
    };
    let ds = generate(a.kind.into(), &spec)?;
    out.written = ds.export(&a.out_dir)?;
    println!("wrote {}x{} {:?} dataset to {}", ds.x.n_rows(), ds.x.n_cols(), ds.kind, a.out_dir.display());
    out.finish(argv, "synth", serde_json::to_value(&spec)?, Some(a.seed))
}

fn tree_config(t: &TreeArgs, base: HnmfConfig) -> HnmfConfig {
    let alpha = match t.alpha {
        Some(v) => Alpha::Absolute(v),
        None => Alpha::Relative(t.relative_alpha),
    };
    let policy = match t.rank {
        Some(k) => RankPolicy::Fixed { k },
        None => RankPolicy::Auto {
            k_min: t.k_min,
            k_max: t.k_max,
        },
    };
    base.with_alpha(alpha)
        .with_rank_policy(policy)
        .with_max_depth(t.max_depth)
        .with_seed(t.seed)
}

fn feature_names(path: Option<&Path>, n_cols: usize) -> Result<Option<Vec<String>>> {
    let Some(path) = path else {
        return Ok(None);
    };
    let text = fs::read_to_string(path).map_err(|e| phnmf_io(path, e))?;
    let names: Vec<String> = text.lines().map(str::to_string).collect();
    if names.len() != n_cols {
        return Err(validation(format!(
            "{} lists {} feature names for {n_cols} columns",
            path.display(),
            names.len()
        )));
    }
    Ok(Some(names))
}

fn phnmf_cmd(a: &PhnmfArgs, argv: &[String]) -> Result<ExitCode> {
    let mut cfg = tree_config(&a.tree, HnmfConfig::phnmf(a.beta));
    cfg.n_seeds = a.seeds;
    let mut out = Outputs::create(&a.out_dir)?;
    match a.tree.precision {
        Precision::F64 => phnmf_outputs::<f64>(a, &cfg, &mut out)?,
        Precision::F32 => phnmf_outputs::<f32>(a, &cfg, &mut out)?,
    }
    out.finish(argv, "phnmf", serde_json::to_value(&cfg)?, Some(a.tree.seed))
}

fn phnmf_outputs<T: Scalar>(a: &PhnmfArgs, cfg: &HnmfConfig, out: &mut Outputs) -> Result<()> {
    let x: Matrix<T> = io::load_matrix(&a.input)?;
    let names = feature_names(a.feature_names.as_deref(), x.n_cols())?;
    let tree = phnmf(&x, cfg)?;
    out.write("tree.json", TreeExport::from_node(&tree.root, names.as_deref()).to_json() + "\n")?;
    out.write("tree.dot", to_dot(&tree.root))?;

    let mut leaf_of = vec![String::new(); x.n_rows()];
    for (id, members) in tree.leaves() {
        for i in members {
            leaf_of[i] = id.clone();
        }
    }
    for (id, members) in tree.residuals() {
        for i in members {
            leaf_of[i] = format!("residual:{id}");
        }
    }
    let mut assignments = String::from("row,leaf\n");
    for (i, l) in leaf_of.iter().enumerate() {
        assignments.push_str(&format!("{i},{l}\n"));
    }
    out.write("assignments.csv", assignments)?;

    let order = sorted_row_order(&tree.root);
    let sorted = x.select_rows(&order);
    out.matrix("X_sorted.csv", &sorted)?;
    let order_text: String = order.iter().map(|i| format!("{i}\n")).collect();
    out.write("row_order.txt", order_text)?;
    let mut pgm = Vec::new();
    write_pgm(&sorted, &mut pgm)?;
    out.write("heatmap.pgm", pgm)?;

    println!(
        "{} leaves, {} residual rows",
        tree.leaves().len(),
        tree.all_residuals().len()
    );
    Ok(())
}

fn hnmf_cmd(a: &HnmfArgs, argv: &[String]) -> Result<ExitCode> {
    let mut cfg = tree_config(&a.tree, HnmfConfig::topdown(a.min_docs));
    cfg.n_seeds = a.seeds;
    let mut out = Outputs::create(&a.out_dir)?;
    match a.tree.precision {
        Precision::F64 => hnmf_outputs::<f64>(a, &cfg, &mut out)?,
        Precision::F32 => hnmf_outputs::<f32>(a, &cfg, &mut out)?,
    }
    out.finish(argv, "hnmf", serde_json::to_value(&cfg)?, Some(a.tree.seed))
}

fn hnmf_outputs<T: Scalar>(a: &HnmfArgs, cfg: &HnmfConfig, out: &mut Outputs) -> Result<()> {
    let x: Matrix<T> = io::load_matrix(&a.input)?;
    let names = feature_names(a.feature_names.as_deref(), x.n_cols())?;
    let tree = hnmf_topdown(&x, cfg)?;
    out.write("tree.json", TreeExport::from_node(&tree.root, names.as_deref()).to_json() + "\n")?;
    out.write("tree.dot", to_dot(&tree.root))?;
    let mut members = String::from("leaf,row\n");
    for (id, rows) in tree.leaves() {
        for i in rows {
            members.push_str(&format!("{id},{i}\n"));
        }
    }
    out.write("leaf_members.csv", members)?;
    println!("{} topic leaves", tree.leaves().len());
    Ok(())
}

fn rank(a: &RankArgs, argv: &[String]) -> Result<ExitCode> {
    let cfg = NmfConfig::default().with_seed(a.seed);
    let mut out = Outputs::create(&a.out_dir)?;
    let (selection, report) = match a.precision {
        Precision::F64 => {
            let x: Matrix<f64> = io::load_matrix(&a.input)?;
            let (s, r) = select_rank_with_report(&x, a.k_min, a.k_max, a.seeds, &cfg)?;
            (serde_json::to_value(&s)?, serde_json::to_value(&r)?)
        }
        Precision::F32 => {
            let x: Matrix<f32> = io::load_matrix(&a.input)?;
            let (s, r) = select_rank_with_report(&x, a.k_min, a.k_max, a.seeds, &cfg)?;
            (serde_json::to_value(&s)?, serde_json::to_value(&r)?)
        }
    };
    println!("chosen rank {}", selection["chosen_k"]);
    out.write("rank.json", serde_json::to_string_pretty(&selection)? + "\n")?;
    out.write("similarity.json", serde_json::to_string_pretty(&report)? + "\n")?;
    let config = json!({"k_min": a.k_min, "k_max": a.k_max, "n_seeds": a.seeds, "nmf": cfg});
    out.finish(argv, "rank", config, Some(a.seed))
}

fn experiment_config(kind: crate::Kind, beta: f64, seeds: usize, auto_rank: bool) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind.into(), auto_rank);
    cfg.tree.termination = phnmf::hierarchy::Termination::Similarity { beta };
    cfg.tree.n_seeds = seeds;
    cfg
}

fn accuracy(a: &AccuracyArgs, argv: &[String]) -> Result<ExitCode> {
    let cfg = experiment_config(a.kind, a.beta, a.seeds, a.auto_rank);
    let mut out = Outputs::create(&a.out_dir)?;
    let rows = accuracy_experiment(&cfg, a.replicates, a.seed)?;
    let mut csv = String::from("replicate,seed,accuracy_assigned,accuracy_total,n_leaves,n_residual\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.replicate, r.seed, r.accuracy_assigned, r.accuracy_total, r.n_leaves, r.n_residual
        ));
    }
    let assigned = summarize(&rows.iter().map(|r| r.accuracy_assigned).collect::<Vec<_>>());
    let total = summarize(&rows.iter().map(|r| r.accuracy_total).collect::<Vec<_>>());
    csv.push_str(&format!("mean,,{},{},,\n", assigned.mean, total.mean));
    csv.push_str(&format!("std_error,,{},{},,\n", assigned.std_error, total.std_error));
    out.write("accuracy.csv", csv)?;
    let summary = json!({"accuracy_assigned": assigned, "accuracy_total": total});
    out.write("summary.json", serde_json::to_string_pretty(&summary)? + "\n")?;
    println!(
        "accuracy (assigned rows): mean {:.4}, s.e. {:.4} over {} replicates",
        assigned.mean, assigned.std_error, assigned.n
    );
    let config = json!({"experiment": cfg, "replicates": a.replicates});
    out.finish(argv, "accuracy", config, Some(a.seed))
}

fn regression(a: &RegressionArgs, argv: &[String]) -> Result<ExitCode> {
    if a.replicates == 0 {
        return Err(validation("replicates must be at least 1".into()));
    }
    let cfg = experiment_config(a.kind, a.beta, a.seeds, a.auto_rank);
    let mut out = Outputs::create(&a.out_dir)?;
    let results = (0..a.replicates)
        .into_par_iter()
        .map(|r| regression_replicate(&cfg, replicate_seed(a.seed, r)))
        .collect::<phnmf::Result<Vec<_>>>()?;
    let mut csv = String::new();
    for (r, res) in results.iter().enumerate() {
        let table = alignment_csv(&res.rows);
        let mut lines = table.lines();
        let header = lines.next().unwrap_or_default();
        if r == 0 {
            csv.push_str(&format!("replicate,seed,{header}\n"));
        }
        for line in lines {
            csv.push_str(&format!("{r},{},{line}\n", res.seed));
        }
        println!(
            "replicate {r}: subgroup fit closer to truth in {} of 8 groups{}",
            res.n_subgroup_wins(),
            if res.missing_groups.is_empty() {
                String::new()
            } else {
                format!(" (not recovered: {})", res.missing_groups.join(" "))
            }
        );
    }
    out.write("coefficients.csv", csv)?;
    out.write("regression.json", serde_json::to_string_pretty(&results)? + "\n")?;
    let config = json!({"experiment": cfg, "replicates": a.replicates});
    out.finish(argv, "regression", config, Some(a.seed))
}

fn ingest(a: &IngestArgs, argv: &[String]) -> Result<ExitCode> {
    let schema = SurveySchema::load(&a.schema)?;
    let table = load_csv(&a.csv, &schema)?;
    let mut out = Outputs::create(&a.out_dir)?;
    let nmf_cfg = NmfConfig::default().with_seed(a.seed);
    let survey = encode_survey(&table, &schema, &nmf_cfg)?;
    for w in &survey.warnings {
        log::warn!("{w}");
    }
    out.written = survey.export(&a.out_dir)?;
    println!("encoded {} rows into {} features", survey.x.n_rows(), survey.x.n_cols());
    let config = json!({"schema": schema, "nmf": nmf_cfg});
    out.finish(argv, "ingest", config, Some(a.seed))
}

/// `argv` with the value of `--out-dir` replaced.
fn with_out_dir(argv: &[String], dir: &Path) -> Vec<String> {
    let dir = dir.to_string_lossy().into_owned();
    let mut out = Vec::with_capacity(argv.len());
    let mut replace_next = false;
    for arg in argv {
        if replace_next {
            out.push(dir.clone());
            replace_next = false;
        } else if arg == "--out-dir" {
            out.push(arg.clone());
            replace_next = true;
        } else if arg.starts_with("--out-dir=") {
            out.push(format!("--out-dir={dir}"));
        } else {
            out.push(arg.clone());
        }
    }
    out
}

fn absolute(p: &Path) -> Result<PathBuf> {
    Ok(if p.is_absolute() {
        p.to_path_buf()
    } else {
        std::env::current_dir().map_err(|e| phnmf_io(Path::new("."), e))?.join(p)
    })
}

fn replay(a: &ReplayArgs) -> Result<ExitCode> {
    let manifest_path = absolute(&a.manifest)?;
    let recorded = RunManifest::load(&manifest_path)?;
    let out_dir = match &a.out_dir {
        Some(d) => absolute(d)?,
        None => manifest_path
            .parent()
            .unwrap_or(Path::new("."))
            .join("replay"),
    };
    let argv = with_out_dir(&recorded.argv, &out_dir);
    let cli = Cli::try_parse_from(&argv)
        .map_err(|e| validation(format!("manifest argv does not parse: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(validation("a replay manifest cannot be replayed".into()));
    }
    if recorded.cwd.is_dir() {
        std::env::set_current_dir(&recorded.cwd).map_err(|e| phnmf_io(&recorded.cwd, e))?;
    }
    run(cli, &argv)?;
    let fresh = RunManifest::load(&out_dir.join(MANIFEST_NAME))?;

    let mut mismatches = Vec::new();
    for art in &recorded.artifacts {
        match fresh.artifacts.iter().find(|f| f.path == art.path) {
            Some(f) if f.sha256 == art.sha256 => {}
            Some(_) => mismatches.push(format!("{}: content differs", art.path)),
            None => mismatches.push(format!("{}: not produced", art.path)),
        }
    }
    for f in &fresh.artifacts {
        if !recorded.artifacts.iter().any(|a| a.path == f.path) {
            mismatches.push(format!("{}: not in the recorded manifest", f.path));
        }
    }
    if mismatches.is_empty() {
        println!("replay ok: {} artifacts match ({})", recorded.artifacts.len(), out_dir.display());
        Ok(ExitCode::SUCCESS)
    } else {
        for m in &mismatches {
            eprintln!("mismatch: {m}");
        }
        Ok(ExitCode::from(1))
    }
}
