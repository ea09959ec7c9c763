//! Wiring of data, network and algorithm; output files; trace merging.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{concatenate, s, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::config::{AlgorithmKind, DataSpec, ExperimentConfig, GraphSpec, SeedPlan};
use super::data::{
    add_noise, extract_patches, partition_data, reconstruct_from_patches, synth_instance, synthetic_image,
};
use super::pgm::{read_pgm, write_pgm};
use super::trace::{read_trace, row_cells, CsvTraceWriter, TRACE_COLUMNS};
use crate::baselines::{AtcState, ProxPdaState};
use crate::engine::{check_state, drive, init_network, RunConfig, RunSummary, StateReport, TraceRow, TraceSink};
use crate::error::{Error, Result};
use crate::graphnet::{
    complete_digraph, directed_ring, generate_strongly_connected_clustered, partition_by_source,
    read_graph_sequence, ClusterSpec, GraphSequence,
};
use crate::linalg::max_abs_diff;
use crate::metrics::{image_quality, mean_dictionary, ImageQuality};
use crate::problems::{read_matrix, write_matrix, ProblemInstance};

/// Image bookkeeping for denoising runs.
#[derive(Debug, Clone)]
pub struct ImageContext {
    pub clean: Array2<f64>,
    pub noisy: Array2<f64>,
    pub patch: usize,
    /// Per-patch means removed before learning, if any.
    pub means: Option<Vec<f64>>,
    /// Number of real (unpadded) patches.
    pub columns: usize,
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone)]
pub struct Built {
    pub run: RunConfig,
    pub image: Option<ImageContext>,
    /// Seed the graph generator actually accepted.
    pub graph_seed: Option<u64>,
}

/// The data matrix plus optional image context.
pub fn build_data(cfg: &ExperimentConfig) -> Result<(Array2<f64>, Option<ImageContext>)> {
    let seeds = SeedPlan::from_seed(cfg.seed);
    let from_image = |clean: Array2<f64>, patch: usize, sigma: f64, remove_mean: bool| -> Result<_> {
        let noisy = add_noise(&clean, sigma, seeds.noise);
        let mut data = extract_patches(&noisy, patch)?;
        let means = remove_mean.then(|| {
            let means: Vec<f64> = data.columns().into_iter().map(|c| c.mean().unwrap_or(0.0)).collect();
            for (mut col, m) in data.columns_mut().into_iter().zip(&means) {
                col -= *m;
            }
            means
        });
        let columns = data.ncols();
        Ok((
            data,
            Some(ImageContext {
                clean,
                noisy,
                patch,
                means,
                columns,
            }),
        ))
    };
    match &cfg.problem.data {
        DataSpec::Synthetic {
            dim,
            atoms_true,
            columns,
            sparsity,
            noise_sigma,
        } => Ok((synth_instance(*dim, *atoms_true, *columns, *sparsity, *noise_sigma, seeds.data)?.data, None)),
        DataSpec::Matrix { path } => Ok((read_matrix(path)?, None)),
        DataSpec::Image {
            path,
            patch,
            noise_sigma,
            remove_mean,
        } => from_image(read_pgm(path)?, *patch, *noise_sigma, *remove_mean),
        DataSpec::SyntheticImage {
            height,
            width,
            patch,
            noise_sigma,
            remove_mean,
        } => from_image(synthetic_image(*height, *width, seeds.data)?, *patch, *noise_sigma, *remove_mean),
    }
}

pub fn build_graph(cfg: &ExperimentConfig) -> Result<(GraphSequence, Option<u64>)> {
    let n = cfg.problem.agents;
    let seeds = SeedPlan::from_seed(cfg.seed);
    match &cfg.graph {
        GraphSpec::Clustered {
            clusters,
            p_intra,
            p_inter,
            undirected,
            slots,
        } => {
            let spec = ClusterSpec::new(n, *clusters, *p_intra, *p_inter);
            let (g, used) = generate_strongly_connected_clustered(&spec, seeds.graph, *undirected)?;
            let seq = if *slots > 1 {
                partition_by_source(&g, *slots)?
            } else {
                GraphSequence::single(g)
            };
            Ok((seq, Some(used)))
        }
        GraphSpec::Complete => Ok((GraphSequence::single(complete_digraph(n)?), None)),
        GraphSpec::Ring => Ok((GraphSequence::single(directed_ring(n)?), None)),
        GraphSpec::File { path } => Ok((read_graph_sequence(path)?, None)),
    }
}

pub fn build(cfg: &ExperimentConfig) -> Result<Built> {
    let (data, image) = build_data(cfg)?;
    let shards = partition_data(&data, cfg.problem.agents)?;
    let problem = ProblemInstance::new(cfg.problem.family, shards, cfg.problem.atoms, cfg.problem.params)?;
    let (graphs, graph_seed) = build_graph(cfg)?;
    if cfg.algorithm == AlgorithmKind::ProxPdaIp && !graphs.is_symmetric() {
        return Err(Error::Config("prox-pda-ip needs an undirected graph".into()));
    }
    let run = RunConfig {
        problem,
        graphs,
        weights: cfg.weights,
        surrogates: cfg.surrogates,
        tau_d: cfg.tau_d,
        tau_x: cfg.tau_x,
        step: cfg.step,
        inner: cfg.inner,
        control: cfg.control,
        seed: SeedPlan::from_seed(cfg.seed).init,
    };
    run.validate()?;
    Ok(Built { run, image, graph_seed })
}

/// Final state of any of the algorithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", content = "state", rename_all = "kebab-case")]
pub enum SavedState {
    D4l(crate::engine::NetworkState),
    Atc(AtcState),
    ProxPdaIp(ProxPdaState),
}

impl SavedState {
    pub fn dictionaries(&self) -> Vec<&Array2<f64>> {
        match self {
            SavedState::D4l(s) => s.dictionaries(),
            SavedState::Atc(s) => s.agents.iter().map(|a| &a.d).collect(),
            SavedState::ProxPdaIp(s) => s.d.iter().collect(),
        }
    }

    pub fn codes(&self) -> Vec<&Array2<f64>> {
        match self {
            SavedState::D4l(s) => s.codes(),
            SavedState::Atc(s) => s.agents.iter().map(|a| &a.x).collect(),
            SavedState::ProxPdaIp(s) => s.x.iter().collect(),
        }
    }
}

pub fn execute(kind: AlgorithmKind, run: &RunConfig, sink: &mut dyn TraceSink) -> Result<(SavedState, RunSummary)> {
    match kind {
        AlgorithmKind::D4l => {
            let mut s = init_network(run)?;
            let summary = drive(&mut s, run, sink)?;
            Ok((SavedState::D4l(s), summary))
        }
        AlgorithmKind::Atc => {
            let mut s = AtcState::init(run)?;
            let summary = drive(&mut s, run, sink)?;
            Ok((SavedState::Atc(s), summary))
        }
        AlgorithmKind::ProxPdaIp => {
            let mut s = ProxPdaState::init(run)?;
            let summary = drive(&mut s, run, sink)?;
            Ok((SavedState::ProxPdaIp(s), summary))
        }
    }
}

/// Denoised image from the mean dictionary and the local codes.
pub fn denoise(state: &SavedState, image: &ImageContext) -> Result<Array2<f64>> {
    let dbar = mean_dictionary(&state.dictionaries());
    let codes: Vec<_> = state.codes().iter().map(|x| x.view()).collect();
    let x = concatenate(Axis(1), &codes).map_err(|e| Error::Shape(e.to_string()))?;
    let mut patches = dbar.dot(&x.slice(s![.., ..image.columns]));
    if let Some(means) = &image.means {
        for (mut col, m) in patches.columns_mut().into_iter().zip(means) {
            col += *m;
        }
    }
    let (h, w) = image.clean.dim();
    reconstruct_from_patches(&patches, h, w, image.patch)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseReport {
    pub input: ImageQuality,
    pub output: ImageQuality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub label: String,
    pub run: RunSummary,
    pub init_fallback_agents: Vec<usize>,
    pub graph_seed: Option<u64>,
    pub denoise: Option<DenoiseReport>,
}

fn trace_path(out: &Path) -> PathBuf {
    out.join("trace.csv")
}

/// Runs `cfg`, writing `config.json` (fully resolved), `trace.csv`,
/// `summary.json` and `state.json` (plus
/// `noisy.pgm`/`denoised.pgm` for image data) into `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    let built = build(cfg)?;
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let cfg_path = cfg.out.join("config.json");
    fs::write(&cfg_path, cfg.to_json()?).map_err(|e| Error::io(&cfg_path, e))?;
    let mut sink = CsvTraceWriter::create(&trace_path(&cfg.out))?;
    let (state, run) = execute(cfg.algorithm, &built.run, &mut sink)?;
    let denoise_report = match &built.image {
        Some(img) => {
            let out = denoise(&state, img)?;
            write_pgm(&cfg.out.join("noisy.pgm"), &img.noisy)?;
            write_pgm(&cfg.out.join("denoised.pgm"), &out)?;
            Some(DenoiseReport {
                input: image_quality(&img.clean, &img.noisy, None)?,
                output: image_quality(&img.clean, &out, None)?,
            })
        }
        None => None,
    };
    let summary = ExperimentSummary {
        label: cfg.label(),
        init_fallback_agents: match &state {
            SavedState::D4l(s) => s.init_fallback.clone(),
            _ => Vec::new(),
        },
        run,
        graph_seed: built.graph_seed,
        denoise: denoise_report,
    };
    write_json(&cfg.out.join("summary.json"), &summary)?;
    write_json(&cfg.out.join("state.json"), &state)?;
    Ok(summary)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Merges traces on the union of their exchange counts, carrying each
/// algorithm's latest row forward. Columns: `msg_exchanges`, then
/// `{label}_{column}` for every other trace column of every input.
pub fn merge_traces(inputs: &[(String, Vec<TraceRow>)]) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let metric_cols: Vec<(usize, &str)> = TRACE_COLUMNS
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != "msg_exchanges")
        .map(|(k, c)| (k, *c))
        .collect();
    let mut header = vec!["msg_exchanges".to_string()];
    for (label, rows) in inputs {
        if rows.is_empty() {
            return Err(Error::Config(format!("trace {label:?} is empty")));
        }
        header.extend(metric_cols.iter().map(|(_, c)| format!("{label}_{c}")));
    }
    let grid: BTreeSet<u64> = inputs
        .iter()
        .flat_map(|(_, rows)| rows.iter().map(|r| r.msg_exchanges))
        .collect();
    let mut cursors = vec![0usize; inputs.len()];
    let mut out = Vec::with_capacity(grid.len());
    for &m in &grid {
        let mut line = vec![m.to_string()];
        for (k, (_, rows)) in inputs.iter().enumerate() {
            while cursors[k] + 1 < rows.len() && rows[cursors[k] + 1].msg_exchanges <= m {
                cursors[k] += 1;
            }
            let cells = row_cells(&rows[cursors[k]]);
            line.extend(metric_cols.iter().map(|(idx, _)| cells[*idx].clone()));
        }
        out.push(line);
    }
    Ok((header, out))
}

/// Runs every config (they must share problem, graph and seed) and writes
/// `compare.csv` into `out`, next to one subdirectory per label.
pub fn compare(cfgs: &[ExperimentConfig], out: &Path) -> Result<PathBuf> {
    let first = cfgs
        .first()
        .ok_or_else(|| Error::Config("compare needs at least one config".into()))?;
    for c in &cfgs[1..] {
        if c.problem != first.problem || c.graph != first.graph || c.seed != first.seed {
            return Err(Error::Config(format!(
                "{} does not share problem, graph and seed with {}",
                c.label(),
                first.label()
            )));
        }
    }
    let mut labels = BTreeSet::new();
    let mut inputs = Vec::new();
    for c in cfgs {
        let label = c.label();
        if !labels.insert(label.clone()) {
            return Err(Error::Config(format!("duplicate label {label:?}; set distinct labels")));
        }
        let mut c = c.clone();
        c.out = out.join(&label);
        run_experiment(&c)?;
        inputs.push((label, read_trace(&trace_path(&c.out))?));
    }
    let (header, rows) = merge_traces(&inputs)?;
    let mut text = header.join(",");
    text.push('\n');
    for r in rows {
        text.push_str(&r.join(","));
        text.push('\n');
    }
    let path = out.join("compare.csv");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub algorithm: String,
    pub agents: usize,
    pub max_infeasibility: f64,
    /// Full state-level report for the tracked method.
    pub state: Option<StateReport>,
}

/// Verifies a saved final state against the problem rebuilt from `cfg`.
pub fn check_saved_state(cfg: &ExperimentConfig, state_path: &Path) -> Result<CheckReport> {
    let text = fs::read_to_string(state_path).map_err(|e| Error::io(state_path, e))?;
    let state: SavedState = serde_json::from_str(&text)?;
    let built = build(cfg)?;
    let p = &built.run.problem;
    let dicts = state.dictionaries();
    if dicts.len() != p.agents() {
        return Err(Error::Shape(format!(
            "state has {} agents, config {}",
            dicts.len(),
            p.agents()
        )));
    }
    let set = p.dict_set();
    let mut worst: f64 = 0.0;
    for d in &dicts {
        p.check_dictionary(d)?;
        worst = worst.max(max_abs_diff(d, &set.projected(d)));
    }
    let (algorithm, report) = match &state {
        SavedState::D4l(s) => ("d4l", Some(check_state(p, s)?)),
        SavedState::Atc(s) => {
            let mass: f64 = s.agents.iter().map(|a| a.phi).sum();
            let n = p.agents() as f64;
            if (mass - n).abs() > 1e-12 * n {
                return Err(Error::Invariant(format!("Σφ = {mass}, expected {n}")));
            }
            ("atc", None)
        }
        SavedState::ProxPdaIp(_) => ("prox-pda-ip", None),
    };
    Ok(CheckReport {
        algorithm: algorithm.into(),
        agents: p.agents(),
        max_infeasibility: worst,
        state: report,
    })
}

/// Writes the graph sequence of `cfg` to `path`.
pub fn gen_graph(cfg: &ExperimentConfig, path: &Path) -> Result<GraphSequence> {
    let (seq, _) = build_graph(cfg)?;
    crate::graphnet::write_graph_sequence(path, &seq)?;
    Ok(seq)
}

/// Writes the data matrix of `cfg` to `out/data.txt`; synthetic factor
/// models also write `dictionary.txt` and `codes.txt`, image sources write
/// `clean.pgm` and `noisy.pgm`.
pub fn gen_data(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, m: &Array2<f64>| -> Result<()> {
        let p = out.join(name);
        write_matrix(&p, m)?;
        written.push(p);
        Ok(())
    };
    if let DataSpec::Synthetic {
        dim,
        atoms_true,
        columns,
        sparsity,
        noise_sigma,
    } = &cfg.problem.data
    {
        let inst = synth_instance(*dim, *atoms_true, *columns, *sparsity, *noise_sigma, SeedPlan::from_seed(cfg.seed).data)?;
        put("data.txt", &inst.data)?;
        put("dictionary.txt", &inst.dictionary)?;
        put("codes.txt", &inst.codes)?;
        return Ok(written);
    }
    let (data, image) = build_data(cfg)?;
    put("data.txt", &data)?;
    if let Some(img) = image {
        for (name, m) in [("clean.pgm", &img.clean), ("noisy.pgm", &img.noisy)] {
            let p = out.join(name);
            write_pgm(&p, m)?;
            written.push(p);
        }
    }
    Ok(written)
}
