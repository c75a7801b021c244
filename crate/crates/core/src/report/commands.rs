//! The `prepare`, `explore`, `search`, `validate` and `report` stages.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::manifest::{RunManifest, StageRecord};
use super::svg::{self, Coloring, Series};
use crate::cluster::{write_labels_csv, ClusterMethod, Clusterer};
use crate::config::RunConfig;
use crate::dataset::{self, Dataset};
use crate::diag;
use crate::embed::{self, Embedding, TsneOptions};
use crate::error::{Error, Result};
use crate::forest::ForestParams;
use crate::preprocess::{self, PipelineSpec};
use crate::seed;
use crate::validate::{self, ConsensusOptions, StabilityParams, SweepRow};

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Drop timestamps from plots and timings from the manifest.
    pub reproducible: bool,
}

struct Stage<'a> {
    cfg: &'a RunConfig,
    opts: RunOptions,
    name: &'static str,
    dir: PathBuf,
    outputs: Vec<String>,
    start: Instant,
}

impl<'a> Stage<'a> {
    fn begin(cfg: &'a RunConfig, opts: RunOptions, name: &'static str) -> Result<Self> {
        let dir = cfg.out.join(name);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        diag::take_warnings();
        log::info!("stage {name}: writing to {}", dir.display());
        Ok(Stage {
            cfg,
            opts,
            name,
            dir,
            outputs: Vec::new(),
            start: Instant::now(),
        })
    }

    /// Path for an output file, recorded in the manifest.
    fn output(&mut self, file: &str) -> PathBuf {
        self.outputs.push(format!("{}/{file}", self.name));
        self.dir.join(file)
    }

    fn write_text(&mut self, file: &str, text: &str) -> Result<()> {
        let path = self.output(file);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    fn write_json<T: Serialize>(&mut self, file: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(file, &text)
    }

    fn stamp(&self) -> Option<String> {
        if self.opts.reproducible {
            return None;
        }
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Some(format!("{} {} unix-time {secs}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")))
    }

    fn finish(self) -> Result<()> {
        let out = &self.cfg.out;
        let mut manifest = RunManifest::load(out)?.unwrap_or_else(|| RunManifest::new(self.cfg));
        let rec = StageRecord {
            outputs: self.outputs,
            warnings: diag::take_warnings(),
            seconds: (!self.opts.reproducible).then(|| self.start.elapsed().as_secs_f64()),
        };
        manifest.record(self.cfg, self.name, rec);
        manifest.write(out)?;
        log::info!("stage {} done", self.name);
        Ok(())
    }
}

fn require(out: &Path, files: &[&str]) -> Result<()> {
    let missing: Vec<String> = files.iter().filter(|f| !out.join(f).is_file()).map(|f| f.to_string()).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingArtifacts {
            dir: out.to_path_buf(),
            missing,
        })
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn file_safe(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

struct Prepared {
    filtered: Dataset,
    train: Dataset,
    test: Dataset,
}

fn load_prepared(cfg: &RunConfig) -> Result<Prepared> {
    let files = ["prepare/filtered.csv", "prepare/train.csv", "prepare/test.csv"];
    require(&cfg.out, &files)?;
    let load = |f: &str| dataset::load_catalog(&cfg.out.join(f), &cfg.schema);
    Ok(Prepared {
        filtered: load(files[0])?,
        train: load(files[1])?,
        test: load(files[2])?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareSummary {
    pub raw_rows: usize,
    pub filtered_rows: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    /// `random` or `released`.
    pub split: String,
    pub fraction: f64,
    pub missing_cells: usize,
}

/// Quality-filter the catalog and split it into train and test sets.
pub fn cmd_prepare(cfg: &RunConfig, opts: RunOptions) -> Result<PrepareSummary> {
    let mut st = Stage::begin(cfg, opts, "prepare")?;
    let raw = dataset::load_catalog(&cfg.data, &cfg.schema)?;
    let filtered = preprocess::apply_quality_filters(&raw, &cfg.filter)?;
    let (split, source) = match (&cfg.split.train_ids, &cfg.split.test_ids) {
        (Some(tr), Some(te)) => {
            let tr = dataset::load_id_list(tr, &cfg.schema.id)?;
            let te = dataset::load_id_list(te, &cfg.schema.id)?;
            let s = dataset::split_by_ids(&filtered, &tr, &te)?;
            let dropped = filtered.len() - s.train.len() - s.test.len();
            if dropped > 0 {
                diag::warn(format!("{dropped} filtered rows appear in neither released split list"));
            }
            (s, "released")
        }
        _ => (dataset::train_test_split(&filtered, cfg.split.fraction, cfg.seed)?, "random"),
    };
    dataset::write_catalog(&filtered, &st.output("filtered.csv"), &cfg.schema)?;
    dataset::write_catalog(&split.train, &st.output("train.csv"), &cfg.schema)?;
    dataset::write_catalog(&split.test, &st.output("test.csv"), &cfg.schema)?;
    let summary = PrepareSummary {
        raw_rows: raw.len(),
        filtered_rows: filtered.len(),
        train_rows: split.train.len(),
        test_rows: split.test.len(),
        split: source.to_string(),
        fraction: split.fraction,
        missing_cells: filtered.missing_count(),
    };
    st.write_json("summary.json", &summary)?;
    st.finish()?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub method: String,
    pub file: String,
    pub ks: Vec<usize>,
    pub retention: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploreSummary {
    pub rows: usize,
    pub pipeline: String,
    pub embeddings: Vec<EmbeddingRecord>,
    /// Embedding file used for the scatter plots.
    pub plot_embedding: Option<String>,
}

/// Embed the visualization pipeline with PCA and t-SNE, compare
/// neighborhood retention, and draw scatter plots.
pub fn cmd_explore(cfg: &RunConfig, opts: RunOptions) -> Result<ExploreSummary> {
    let data = load_prepared(cfg)?.filtered;
    let mut st = Stage::begin(cfg, opts, "explore")?;
    let spec = PipelineSpec::new(cfg.filter, cfg.explore.plot_features.resolve()?, cfg.explore.plot_imputer, None);
    let m = preprocess::materialize_stages(&spec, &data, preprocess::pipeline_seed(cfg.seed, &spec))?;
    let (high, ids) = (&m.features.values, &m.features.ids);
    let n = ids.len();

    let mut embeddings: Vec<Embedding> = Vec::new();
    if cfg.explore.identity_self_test {
        embeddings.push(Embedding::new(high.clone(), ids.clone(), "identity")?);
    } else {
        if cfg.explore.pca {
            embeddings.push(embed::pca(high, ids, Some(2.min(high.cols())))?);
        }
        let valid: Vec<f64> = cfg
            .explore
            .perplexities
            .iter()
            .copied()
            .filter(|&p| {
                let ok = p >= 2.0 && 3.0 * p < n as f64;
                if !ok {
                    diag::warn(format!("perplexity {p} skipped: needs 2 <= perplexity < n/3 with n = {n}"));
                }
                ok
            })
            .collect();
        use rayon::prelude::*;
        let runs = valid
            .par_iter()
            .map(|&p| embed::tsne(high, ids, p, seed::derive(cfg.seed, "explore-tsne", &[p.to_bits()]), &TsneOptions::default()))
            .collect::<Result<Vec<_>>>()?;
        embeddings.extend(runs);
        for path in &cfg.explore.external {
            let mut e = embed::import_embedding(path, ids)?;
            e.method = path.file_stem().map_or_else(|| "external".into(), |s| s.to_string_lossy().into_owned());
            embeddings.push(e);
        }
    }

    let ks: Vec<usize> = cfg.explore.retention_ks.iter().copied().filter(|&k| k >= 1 && k < n).collect();
    if ks.len() < cfg.explore.retention_ks.len() {
        diag::warn(format!("retention ks not below n = {n} dropped"));
    }
    let mut records = Vec::new();
    let mut series = Vec::new();
    let mut curves = Vec::new();
    for e in &embeddings {
        let file = format!("embedding_{}.csv", file_safe(&e.method));
        embed::export_embedding(e, &st.output(&file))?;
        let curve = embed::retention_curve(high, ids, e, &ks)?;
        series.push(Series {
            name: e.method.clone(),
            points: ks.iter().map(|&k| k as f64).zip(curve.retention.iter().copied()).collect(),
        });
        records.push(EmbeddingRecord {
            method: e.method.clone(),
            file: format!("explore/{file}"),
            ks: ks.clone(),
            retention: curve.retention.clone(),
        });
        curves.push(curve);
    }
    embed::write_retention_csv(&curves, &st.output("retention.csv"))?;
    let stamp = st.stamp();
    let chart = svg::line_chart("Neighborhood retention", "k", "retention", &series, Some((0.0, 1.0)), stamp.as_deref());
    st.write_text("retention.svg", &chart)?;

    let wanted = format!("tsne-{}", cfg.explore.plot_perplexity);
    let plot = embeddings
        .iter()
        .position(|e| e.method == wanted)
        .or_else(|| embeddings.iter().position(|e| e.coords.cols() >= 2));
    if let Some(p) = plot {
        let e = &embeddings[p];
        let (x, y) = (e.coords.column(0), e.coords.column(1));
        let title = format!("{} ({})", e.method, spec.label);
        st.write_text("scatter_gc.svg", &svg::scatter(&title, &x, &y, Coloring::Categories(data.gc_tags()), stamp.as_deref()))?;
        for (j, col) in m.features.columns.iter().enumerate() {
            let vals = m.features.values.column(j);
            let chart = svg::scatter(&format!("{title}: {col}"), &x, &y, Coloring::Values(&vals), stamp.as_deref());
            st.write_text(&format!("scatter_{}.svg", file_safe(col)), &chart)?;
        }
    } else {
        diag::warn("no two-dimensional embedding to plot");
    }
    let summary = ExploreSummary {
        rows: n,
        pipeline: spec.label.clone(),
        plot_embedding: plot.map(|p| records[p].file.clone()),
        embeddings: records,
    };
    st.write_json("summary.json", &summary)?;
    st.finish()?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub method: String,
    pub k: usize,
    pub mean: f64,
    pub overridden: bool,
    pub rank: usize,
    /// `<method>:<k>`.
    pub spec: String,
}

fn methods(cfg: &RunConfig) -> Vec<&dyn Clusterer> {
    cfg.clusterers.iter().map(|m| m as &dyn Clusterer).collect()
}

/// Stability search over pipelines × methods × ks on the training split.
pub fn cmd_search(cfg: &RunConfig, opts: RunOptions) -> Result<SelectionRecord> {
    let train = load_prepared(cfg)?.train;
    let mut st = Stage::begin(cfg, opts, "search")?;
    let specs = preprocess::enumerate_pipelines(cfg)?;
    let params = StabilityParams {
        b: cfg.b,
        pi: cfg.pi,
        seed: cfg.seed,
    };
    let table = validate::stability_search(&train, &specs, &methods(cfg), &cfg.ks, &params, cfg.stability_refit)?;
    let manual = cfg.selection.as_ref().map(|s| (s.method.to_string(), s.k));
    let sel = validate::select_model(&table, manual.as_ref().map(|(m, k)| (m.as_str(), *k)))?;
    validate::write_stability_csv(&table, &st.output("stability.csv"))?;
    validate::write_iterates_csv(&table, &st.output("iterates.csv"))?;
    let record = SelectionRecord {
        spec: format!("{}:{}", sel.method, sel.k),
        method: sel.method,
        k: sel.k,
        mean: sel.mean,
        overridden: sel.overridden,
        rank: sel.rank,
    };
    st.write_json("selection.json", &record)?;
    let series: Vec<Series> = table
        .methods
        .iter()
        .map(|m| Series {
            name: m.clone(),
            points: table.cells.iter().filter(|c| &c.method == m).map(|c| (c.k as f64, c.mean)).collect(),
        })
        .collect();
    let stamp = st.stamp();
    let chart = svg::line_chart("Mean stability", "k", "mean ARI", &series, None, stamp.as_deref());
    st.write_text("stability.svg", &chart)?;
    st.finish()?;
    Ok(record)
}

fn resolve_selection(cfg: &RunConfig) -> Result<(ClusterMethod, usize, bool)> {
    if let Some(s) = &cfg.selection {
        return Ok((s.method, s.k, true));
    }
    require(&cfg.out, &["search/selection.json"])?;
    let rec: SelectionRecord = read_json(&cfg.out.join("search/selection.json"))?;
    Ok((rec.method.parse()?, rec.k, rec.overridden))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineScore {
    pub pipeline: String,
    pub overall_ari: f64,
    pub precisions: Vec<f64>,
    pub flagged: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcSummary {
    pub gc: String,
    pub size: usize,
    pub main_cluster: usize,
    pub containment: f64,
    pub cluster_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateSummary {
    pub method: String,
    pub k: usize,
    pub overridden: bool,
    pub train_rows: usize,
    pub test_rows: usize,
    pub filtered_rows: usize,
    pub consensus_sizes: Vec<usize>,
    /// Mean local stability per consensus cluster, `(label, mean)`.
    pub local_stability: Vec<(usize, f64)>,
    pub self_check: bool,
    pub generalizability_mean_ari: f64,
    pub generalizability: Vec<PipelineScore>,
    pub reference_precision: Vec<validate::ReferenceClusterScore>,
    pub final_sizes: Vec<usize>,
    pub composition: Vec<GcSummary>,
    pub sweep: Vec<SweepRow>,
}

/// Consensus and local stability on the training split, generalizability
/// on the test split, the final refit on all filtered rows, QC threshold
/// sweeps and tag composition.
pub fn cmd_validate(cfg: &RunConfig, opts: RunOptions) -> Result<ValidateSummary> {
    let (method, k, overridden) = resolve_selection(cfg)?;
    let data = load_prepared(cfg)?;
    let mut st = Stage::begin(cfg, opts, "validate")?;
    let stamp = st.stamp();
    let specs = preprocess::enumerate_pipelines(cfg)?;
    let copts = ConsensusOptions {
        subsample: cfg.consensus.subsample,
        reps: cfg.consensus.reps.unwrap_or(1),
    };

    let (cm, labels) = validate::consensus_partition(&data.train, &specs, &method, k, cfg.seed, &copts)?;
    let ls = validate::local_stability(&cm, &labels.labels)?;
    let mut order: Vec<usize> = (0..cm.len()).collect();
    order.sort_by(|&a, &b| ls.labels[a].cmp(&ls.labels[b]).then(ls.scores[b].total_cmp(&ls.scores[a])).then(a.cmp(&b)));
    if cm.len() <= cfg.plot_cap {
        validate::write_consensus_csv(&cm, &st.output("consensus.csv"))?;
    } else {
        let rows: Vec<usize> = (0..cfg.plot_cap).map(|i| order[i * order.len() / cfg.plot_cap]).collect();
        diag::warn(format!("consensus matrix has {} rows; writing {} evenly spaced rows", cm.len(), rows.len()));
        validate::write_consensus_csv(&cm.select(&rows), &st.output("consensus_sampled.csv"))?;
    }
    write_labels_csv(&labels, &st.output("consensus_labels.csv"))?;
    validate::write_local_stability_csv(&ls, &st.output("local_stability.csv"))?;
    let title = format!("Consensus matrix, {method} k = {k}");
    st.write_text("consensus.svg", &svg::heatmap(&title, &order, |i, j| cm.get(i, j), cfg.plot_cap, stamp.as_deref()))?;
    let means = ls.cluster_means();
    let bars: Vec<(String, f64)> = means.iter().map(|(l, v)| (l.to_string(), *v)).collect();
    st.write_text("local_stability.svg", &svg::bar_chart("Mean local stability", "local stability", &bars, (0.0, 1.0), stamp.as_deref()))?;

    let (_, final_labels) = validate::consensus_partition(&data.filtered, &specs, &method, k, cfg.seed, &copts)?;
    write_labels_csv(&final_labels, &st.output("final_labels.csv"))?;
    let comp = validate::gc_composition(&final_labels.labels, data.filtered.gc_tags())?;
    validate::write_composition_csv(&comp, &st.output("composition.csv"))?;

    let (test, rf) = if cfg.self_check {
        let d = specs.iter().map(|s| s.features.columns.len()).max().unwrap_or(1);
        (&data.train, validate::memorizing_forest(d))
    } else {
        let mut rf = ForestParams::classify();
        rf.n_trees = cfg.classifier_trees;
        (&data.test, rf)
    };
    let g = validate::generalizability_grid(
        &data.train,
        test,
        &specs,
        &method,
        k,
        cfg.seed,
        &rf,
        Some((&final_labels.ids, &final_labels.labels)),
    )?;
    st.write_json("generalizability.json", &g)?;
    let bars: Vec<(String, f64)> = g.per_reference_cluster.iter().map(|c| (c.label.to_string(), c.mean_precision)).collect();
    st.write_text("generalizability.svg", &svg::bar_chart("Test precision per cluster", "precision", &bars, (0.0, 1.0), stamp.as_deref()))?;

    let explore_summary = cfg.out.join("explore/summary.json");
    if explore_summary.is_file() {
        let ex: ExploreSummary = read_json(&explore_summary)?;
        if let Some(file) = ex.plot_embedding {
            let e = embed::import_embedding(&cfg.out.join(&file), data.filtered.ids())?;
            if e.coords.cols() >= 2 {
                let cats: Vec<Option<String>> = final_labels.labels.iter().map(|l| Some(format!("{l:02}"))).collect();
                let chart = svg::scatter(
                    &format!("Final clusters on {}", e.method),
                    &e.coords.column(0),
                    &e.coords.column(1),
                    Coloring::Categories(&cats),
                    stamp.as_deref(),
                );
                st.write_text("final_clusters.svg", &chart)?;
            }
        }
    }

    let raw = dataset::load_catalog(&cfg.data, &cfg.schema)?;
    let settings = validate::sweep_settings(&cfg.filter, &cfg.sweep);
    let sweep = validate::sensitivity_sweep(&raw, &settings, &final_labels, &specs, &method, k, cfg.seed);
    for row in sweep.iter().filter(|r| r.error.is_some()) {
        diag::warn(format!("sweep {} = {} failed: {}", row.parameter, row.value, row.error.as_deref().unwrap_or("")));
    }
    validate::write_sweep_csv(&sweep, &st.output("sweep.csv"))?;
    let mut params: Vec<&str> = sweep.iter().map(|r| r.parameter.as_str()).collect();
    params.dedup();
    for p in params {
        let series = [Series {
            name: p.to_string(),
            points: sweep.iter().filter(|r| r.parameter == p).map(|r| (r.value, r.ari.unwrap_or(f64::NAN))).collect(),
        }];
        let chart = svg::line_chart(&format!("Sensitivity to {p}"), p, "ARI vs baseline", &series, Some((0.0, 1.0)), stamp.as_deref());
        st.write_text(&format!("sweep_{}.svg", file_safe(p)), &chart)?;
    }

    let composition = comp
        .gc_sizes
        .iter()
        .filter_map(|(gc, &size)| {
            comp.main_cluster_of(gc).map(|e| GcSummary {
                gc: gc.clone(),
                size,
                main_cluster: e.cluster,
                containment: e.containment,
                cluster_fraction: e.cluster_fraction,
            })
        })
        .collect();
    let summary = ValidateSummary {
        method: method.to_string(),
        k,
        overridden,
        train_rows: data.train.len(),
        test_rows: test.len(),
        filtered_rows: data.filtered.len(),
        consensus_sizes: labels.sizes(),
        local_stability: means,
        self_check: cfg.self_check,
        generalizability_mean_ari: g.mean_ari,
        generalizability: g
            .per_pipeline
            .iter()
            .map(|r| PipelineScore {
                pipeline: r.pipeline.clone(),
                overall_ari: r.overall_ari,
                precisions: r.clusters.iter().map(|c| c.precision).collect(),
                flagged: r.clusters.iter().filter(|c| c.flagged).map(|c| c.test_cluster).collect(),
            })
            .collect(),
        reference_precision: g.per_reference_cluster.clone(),
        final_sizes: final_labels.sizes(),
        composition,
        sweep,
    };
    st.write_json("summary.json", &summary)?;
    st.finish()?;
    Ok(summary)
}

const REPORT_INPUTS: [&str; 5] = [
    "manifest.json",
    "prepare/summary.json",
    "search/selection.json",
    "search/stability.csv",
    "validate/summary.json",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub method: String,
    pub k: usize,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub seed: u64,
    pub prepare: PrepareSummary,
    pub selection: SelectionRecord,
    pub top_stability: Vec<StabilityRow>,
    pub explore: Option<ExploreSummary>,
    pub validate: ValidateSummary,
    pub warnings: Vec<String>,
    pub artifacts: Vec<String>,
}

fn read_stability(path: &Path) -> Result<Vec<StabilityRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("").to_string();
        let num = |i: usize| -> Result<f64> {
            field(i).parse().map_err(|_| Error::Data(format!("{}: bad number `{}`", path.display(), field(i))))
        };
        rows.push(StabilityRow {
            method: field(0),
            k: num(1)? as usize,
            mean: num(2)?,
            sd: num(3)?,
        });
    }
    // stable sort keeps table order among ties
    rows.sort_by(|a, b| b.mean.total_cmp(&a.mean).then(a.k.cmp(&b.k)));
    Ok(rows)
}

fn render_text(r: &ReportSummary) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let p = &r.prepare;
    let _ = writeln!(s, "stabflow run summary");
    let _ = writeln!(s, "seed {}", r.seed);
    let _ = writeln!(
        s,
        "rows: {} raw, {} after quality filters, {} train / {} test ({} split)",
        p.raw_rows, p.filtered_rows, p.train_rows, p.test_rows, p.split
    );
    let _ = writeln!(s, "\nstability ranking");
    let _ = writeln!(s, "{:<6}{:<16}{:>4}{:>10}{:>10}", "rank", "method", "k", "mean", "sd");
    for (i, row) in r.top_stability.iter().enumerate() {
        let _ = writeln!(s, "{:<6}{:<16}{:>4}{:>10.4}{:>10.4}", i + 1, row.method, row.k, row.mean, row.sd);
    }
    let sel = &r.selection;
    let _ = writeln!(
        s,
        "\nselected {} (mean stability {:.4}, rank {}{})",
        sel.spec,
        sel.mean,
        sel.rank,
        if sel.overridden { ", manual override" } else { "" }
    );
    if let Some(ex) = &r.explore {
        let _ = writeln!(s, "\nneighborhood retention ({} rows, {})", ex.rows, ex.pipeline);
        for e in &ex.embeddings {
            let vals: Vec<String> = e.ks.iter().zip(&e.retention).map(|(k, v)| format!("k={k}:{v:.3}")).collect();
            let _ = writeln!(s, "  {:<14}{}", e.method, vals.join(" "));
        }
    }
    let v = &r.validate;
    let _ = writeln!(s, "\nconsensus clusters (train)");
    let _ = writeln!(s, "{:<8}{:>8}{:>18}", "label", "size", "local stability");
    for ((l, m), size) in v.local_stability.iter().zip(&v.consensus_sizes) {
        let _ = writeln!(s, "{l:<8}{size:>8}{m:>18.4}");
    }
    let _ = writeln!(
        s,
        "\ngeneralizability{}: mean ARI {:.4}",
        if v.self_check { " (self-check)" } else { "" },
        v.generalizability_mean_ari
    );
    for g in &v.generalizability {
        let _ = writeln!(s, "  {:<28}ARI {:.4}  flagged {:?}", g.pipeline, g.overall_ari, g.flagged);
    }
    let _ = writeln!(s, "{:<8}{:>16}{:>16}", "cluster", "mean precision", "min precision");
    for c in &v.reference_precision {
        let _ = writeln!(s, "{:<8}{:>16.4}{:>16.4}", c.label, c.mean_precision, c.min_precision);
    }
    let _ = writeln!(s, "\nfinal clusters (all filtered rows): sizes {:?}", v.final_sizes);
    if !v.composition.is_empty() {
        let _ = writeln!(s, "{:<16}{:>6}{:>8}{:>14}{:>12}", "tag", "size", "cluster", "containment", "fraction");
        for c in &v.composition {
            let _ = writeln!(
                s,
                "{:<16}{:>6}{:>8}{:>14.4}{:>12.4}",
                c.gc, c.size, c.main_cluster, c.containment, c.cluster_fraction
            );
        }
    }
    let _ = writeln!(s, "\nthreshold sweep");
    let _ = writeln!(s, "{:<10}{:>8}{:>8}{:>8}{:>10}", "parameter", "value", "rows", "shared", "ARI");
    for w in &v.sweep {
        let ari = w.ari.map_or_else(|| "failed".to_string(), |a| format!("{a:.4}"));
        let _ = writeln!(s, "{:<10}{:>8}{:>8}{:>8}{:>10}", w.parameter, w.value, w.rows, w.shared, ari);
    }
    if !r.warnings.is_empty() {
        let _ = writeln!(s, "\nwarnings");
        for w in &r.warnings {
            let _ = writeln!(s, "  {w}");
        }
    }
    let _ = writeln!(s, "\nartifacts");
    for a in &r.artifacts {
        let _ = writeln!(s, "  {a}");
    }
    s
}

/// Collect stage outputs of a run directory into `report/summary.txt` and
/// `report/summary.json`.
pub fn cmd_report(cfg: &RunConfig, opts: RunOptions) -> Result<ReportSummary> {
    let out = &cfg.out;
    require(out, &REPORT_INPUTS)?;
    let manifest = RunManifest::load(out)?.expect("checked");
    let explore_path = out.join("explore/summary.json");
    let mut top = read_stability(&out.join("search/stability.csv"))?;
    top.truncate(10);
    let summary = ReportSummary {
        seed: manifest.seed,
        prepare: read_json(&out.join("prepare/summary.json"))?,
        selection: read_json(&out.join("search/selection.json"))?,
        top_stability: top,
        explore: if explore_path.is_file() { Some(read_json(&explore_path)?) } else { None },
        validate: read_json(&out.join("validate/summary.json"))?,
        warnings: manifest
            .stages
            .iter()
            .filter(|(name, _)| name.as_str() != "report")
            .flat_map(|(_, s)| s.warnings.iter().cloned())
            .collect(),
        artifacts: manifest.artifacts.iter().filter(|a| !a.starts_with("report/")).cloned().collect(),
    };
    let missing: Vec<String> = summary.artifacts.iter().filter(|a| !out.join(a).is_file()).cloned().collect();
    if !missing.is_empty() {
        return Err(Error::MissingArtifacts {
            dir: out.to_path_buf(),
            missing,
        });
    }
    let mut st = Stage::begin(cfg, opts, "report")?;
    st.write_text("summary.txt", &render_text(&summary))?;
    st.write_json("summary.json", &summary)?;
    st.finish()?;
    Ok(summary)
}

/// All stages in order.
pub fn cmd_run(cfg: &RunConfig, opts: RunOptions) -> Result<ReportSummary> {
    cmd_prepare(cfg, opts)?;
    cmd_explore(cfg, opts)?;
    cmd_search(cfg, opts)?;
    cmd_validate(cfg, opts)?;
    cmd_report(cfg, opts)
}
