use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;

use adcnn::augment::{augment_roi, enumerate_plan, zscore_standardize, ZSCORE_EPSILON};
use adcnn::dataset::synth::{synth_exam, synth_generate, ExamSpec};
use adcnn::dataset::{stratified_split, DatasetManifest, Label, ManifestEntry, Split, SplitItem};
use adcnn::eval::{accuracy_at_threshold, auc_trapezoid, roc_curve, write_roc_csv};
use adcnn::gradcheck::{gradient_check_with, GradCheckOptions, GradCheckReport};
use adcnn::model::{build_network, load_checkpoint, predict_score, save_checkpoint, train, TrainingHistory};
use adcnn::pgm::{read_pgm, write_pgm, PgmDepth};
use adcnn::scanner::{scan_exam, AdMark, ExamImage, SUMMARY_HEADER};
use adcnn::{Example, Network, ScanResult, ScoredSample};

use crate::config::RunConfig;

/// A working directory plus the resolved configuration of one run.
#[derive(Clone, Debug)]
pub struct Workspace {
    pub root: PathBuf,
    pub config: RunConfig,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>, config: RunConfig) -> Self {
        Self { root: root.into(), config }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn dir(&self, rel: &str) -> Result<PathBuf> {
        let p = self.path(rel);
        fs::create_dir_all(&p).with_context(|| format!("creating {}", p.display()))?;
        Ok(p)
    }

    fn read_manifest(&self, rel: &str) -> Result<DatasetManifest> {
        DatasetManifest::read(self.path(rel)).with_context(|| format!("reading manifest {rel}"))
    }

    fn write_manifest(&self, manifest: &DatasetManifest, rel: &str) -> Result<()> {
        manifest.write(self.path(rel)).with_context(|| format!("writing manifest {rel}"))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

/// Writes `count / 2` synthetic ROIs per class and the unsplit manifest.
pub fn synth(ws: &Workspace) -> Result<DatasetManifest> {
    let c = &ws.config;
    let depth = c.pgm_depth()?;
    ws.dir(&c.paths.rois_dir)?;
    let mut entries = Vec::with_capacity(c.synth.count);
    for label in [Label::Ad, Label::Normal] {
        let images = synth_generate(c.synth.count / 2, label, c.synth.image_size, c.seed)?;
        for (i, img) in images.iter().enumerate() {
            let rel = format!("{}/{label}_{i:04}.pgm", c.paths.rois_dir);
            write_pgm(img, ws.path(&rel), depth)?;
            entries.push(ManifestEntry { path: rel, label, split: None, roi_id: entries.len() as u64, plan_index: None });
        }
    }
    let manifest = DatasetManifest::new(entries);
    ws.write_manifest(&manifest, &c.paths.manifest)?;
    info!("wrote {} ROIs to {}", manifest.len(), c.paths.rois_dir);
    Ok(manifest)
}

/// Expands every original ROI into its 36 plan variants.
pub fn augment(ws: &Workspace) -> Result<DatasetManifest> {
    let c = &ws.config;
    let depth = c.pgm_depth()?;
    let source = ws.read_manifest(&c.paths.manifest)?;
    if let Some(e) = source.entries.iter().find(|e| e.plan_index.is_some()) {
        bail!("{} already holds augmented sample {}", c.paths.manifest, e.path);
    }
    ws.dir(&c.paths.augmented_dir)?;
    let plan = enumerate_plan();
    let mut entries = Vec::with_capacity(source.len() * plan.len());
    for e in &source.entries {
        let roi = read_pgm(ws.path(&e.path)).with_context(|| format!("reading {}", e.path))?;
        let stem = Path::new(&e.path).file_stem().and_then(|s| s.to_str()).unwrap_or("roi");
        for (j, v) in augment_roi(&roi, &plan, c.seed, e.roi_id)?.iter().enumerate() {
            let rel = format!("{}/{stem}_{j:02}.pgm", c.paths.augmented_dir);
            write_pgm(v, ws.path(&rel), depth)?;
            entries.push(ManifestEntry { path: rel, split: None, plan_index: Some(j), ..e.clone() });
        }
    }
    let manifest = DatasetManifest::new(entries);
    ws.write_manifest(&manifest, &c.paths.augmented_manifest)?;
    info!(
        "augmented {} ROIs into {} samples ({} ad, {} normal)",
        source.len(),
        manifest.len(),
        manifest.count(None, Label::Ad),
        manifest.count(None, Label::Normal)
    );
    Ok(manifest)
}

pub fn split(ws: &Workspace) -> Result<DatasetManifest> {
    let c = &ws.config;
    let mut manifest = ws.read_manifest(&c.paths.augmented_manifest)?;
    let items: Vec<SplitItem> = manifest.entries.iter().map(|e| SplitItem { roi_id: e.roi_id, label: e.label }).collect();
    let splits = stratified_split(&items, &c.split_ratios(), c.seed, c.split_mode()?)?;
    for (e, s) in manifest.entries.iter_mut().zip(splits) {
        e.split = Some(s);
    }
    manifest.check_balanced_splits()?;
    ws.write_manifest(&manifest, &c.paths.split_manifest)?;
    for s in [Split::Train, Split::Val, Split::Test] {
        info!(
            "{}: {} samples ({} ad, {} normal)",
            s.as_str(),
            manifest.in_split(s).count(),
            manifest.count(Some(s), Label::Ad),
            manifest.count(Some(s), Label::Normal)
        );
    }
    Ok(manifest)
}

fn load_examples<'m>(
    ws: &Workspace,
    manifest: &'m DatasetManifest,
    split: Split,
    size: usize,
) -> Result<(Vec<&'m ManifestEntry>, Vec<Example>)> {
    let rows: Vec<&ManifestEntry> = manifest.in_split(split).collect();
    let mut examples = Vec::with_capacity(rows.len());
    for e in &rows {
        let img = read_pgm(ws.path(&e.path)).with_context(|| format!("reading {}", e.path))?;
        if img.width() != size || img.height() != size {
            bail!(crate::config::ConfigError(format!(
                "network input size {size} does not match {}x{} sample {}",
                img.height(),
                img.width(),
                e.path
            )));
        }
        examples.push(Example { input: zscore_standardize(&img, ZSCORE_EPSILON), class: e.label.class_index() });
    }
    Ok((rows, examples))
}

pub fn train_model(ws: &Workspace) -> Result<(Network, TrainingHistory)> {
    let c = &ws.config;
    let manifest = ws.read_manifest(&c.paths.split_manifest)?;
    let (_, train_set) = load_examples(ws, &manifest, Split::Train, c.network.input_size)?;
    let (_, val_set) = load_examples(ws, &manifest, Split::Val, c.network.input_size)?;
    info!("training on {} samples, validating on {}", train_set.len(), val_set.len());
    let network = build_network(&c.network_config(), c.seed)?;
    let (network, history) = train(network, &train_set, &val_set, &c.training_config())?;
    save_checkpoint(&network, ws.path(&c.paths.checkpoint))?;
    history.write_csv(create(&ws.path(&c.paths.history))?)?;
    info!(
        "kept epoch {} (val_cost {:?}); wrote {} and {}",
        network.meta.epoch, network.meta.val_cost, c.paths.checkpoint, c.paths.history
    );
    Ok((network, history))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub split: Split,
    pub scores: Vec<ScoredSample>,
    pub auc: f64,
    pub accuracy: f64,
}

/// Scores one split; writes `roc_<split>.csv` and `scores_<split>.csv`.
pub fn eval(ws: &Workspace) -> Result<EvalReport> {
    let c = &ws.config;
    let split = c.eval_split()?;
    let network: Network = load_checkpoint(ws.path(&c.paths.checkpoint)).context("loading checkpoint")?;
    let manifest = ws.read_manifest(&c.paths.split_manifest)?;
    let (rows, examples) = load_examples(ws, &manifest, split, network.config().input_size)?;
    if examples.is_empty() {
        bail!("split {} is empty", split.as_str());
    }
    let mut scores = Vec::with_capacity(examples.len());
    for ex in &examples {
        scores.push(ScoredSample::new(predict_score(&network, &ex.input)?, ex.class == 1));
    }
    let roc = roc_curve(&scores)?;
    let auc = auc_trapezoid(&roc);
    let accuracy = accuracy_at_threshold(&scores, c.eval.threshold)?;

    let dir = ws.dir(&c.paths.eval_dir)?;
    let name = split.as_str();
    write_roc_csv(&roc, create(&dir.join(format!("roc_{name}.csv")))?)?;
    let mut w = create(&dir.join(format!("scores_{name}.csv")))?;
    writeln!(w, "path,label,score")?;
    for (e, s) in rows.iter().zip(&scores) {
        writeln!(w, "{},{},{}", e.path, e.label, s.score)?;
    }
    w.flush()?;
    info!("{name}: {} samples, auc {auc:.6}, accuracy {accuracy:.6}", scores.len());
    Ok(EvalReport { split, scores, auc, accuracy })
}

/// Writes `<id>.pgm` and `<id>.marks.csv` into the exams directory.
pub fn make_exam(ws: &Workspace) -> Result<PathBuf> {
    let c = &ws.config;
    let e = &c.exam;
    let spec = ExamSpec {
        height: e.height,
        width: e.width,
        scale: e.scale,
        implant_radius: e.implant_radius,
        marks: e.marks.iter().map(|m| (m[0], m[1])).collect(),
    };
    let exam = synth_exam(&spec, c.seed)?;
    let dir = ws.dir(&c.paths.exams_dir)?;
    let path = dir.join(format!("{}.pgm", e.id));
    write_pgm(&exam.image, &path, PgmDepth::Sixteen)?;
    let mut w = create(&marks_path(&path))?;
    writeln!(w, "row,col")?;
    for (r, col) in &exam.marks {
        writeln!(w, "{r},{col}")?;
    }
    w.flush()?;
    info!("wrote {}x{} exam {} with {} marks", e.height, e.width, path.display(), exam.marks.len());
    Ok(path)
}

pub fn marks_path(exam: &Path) -> PathBuf {
    exam.with_extension("marks.csv")
}

pub fn read_marks(path: &Path) -> Result<Vec<AdMark>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading marks {}", path.display()))?;
    let mut marks = Vec::new();
    for row in reader.deserialize() {
        let (row, col): (usize, usize) = row.with_context(|| format!("parsing marks {}", path.display()))?;
        marks.push(AdMark { row, col });
    }
    Ok(marks)
}

/// Exams given explicitly, or every `.pgm` in the exams directory.
pub fn exam_paths(ws: &Workspace, explicit: &[PathBuf]) -> Result<Vec<PathBuf>> {
    if !explicit.is_empty() {
        return Ok(explicit.iter().map(|p| ws.root.join(p)).collect());
    }
    let dir = ws.path(&ws.config.paths.exams_dir);
    let mut out: Vec<PathBuf> = fs::read_dir(&dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "pgm"))
        .collect();
    out.sort();
    if out.is_empty() {
        bail!("no .pgm exams in {}", dir.display());
    }
    Ok(out)
}

/// Scans each exam; per exam writes the ROI table, the heatmap and, when
/// the exam has both classes, its ROC; then one summary table.
pub fn scan(ws: &Workspace, explicit: &[PathBuf]) -> Result<Vec<ScanResult>> {
    let c = &ws.config;
    let network: Network = load_checkpoint(ws.path(&c.paths.checkpoint)).context("loading checkpoint")?;
    let grid = c.scan_grid();
    let dir = ws.dir(&c.paths.scan_dir)?;
    let mut results = Vec::new();
    for path in exam_paths(ws, explicit)? {
        let id = path.file_stem().and_then(|s| s.to_str()).context("exam file name is not UTF-8")?.to_string();
        let image = read_pgm(&path).with_context(|| format!("reading {}", path.display()))?;
        let mp = marks_path(&path);
        let marks = if mp.exists() { read_marks(&mp)? } else { Vec::new() };
        let exam = ExamImage::new(id.clone(), image, marks)?;
        let result = scan_exam(&network, &exam, &grid)?;
        result.write_rois_csv(create(&dir.join(format!("{id}_rois.csv")))?)?;
        write_pgm(&result.heatmap, dir.join(format!("{id}_heatmap.pgm")), PgmDepth::Sixteen)?;
        if let Some(roc) = &result.roc {
            write_roc_csv(roc, create(&dir.join(format!("{id}_roc.csv")))?)?;
        }
        info!("{}", result.summary_line());
        results.push(result);
    }
    let mut w = create(&dir.join("summary.csv"))?;
    writeln!(w, "{SUMMARY_HEADER}")?;
    for r in &results {
        writeln!(w, "{}", r.summary_line())?;
    }
    w.flush()?;
    Ok(results)
}

/// Gradient check of a freshly initialised network on synthetic inputs of
/// both classes.
pub fn gradcheck(ws: &Workspace) -> Result<GradCheckReport> {
    let c = &ws.config;
    let g = &c.gradcheck;
    let net_cfg = c.gradcheck_network();
    let network: Network = build_network(&net_cfg, c.seed)?;
    let per = g.batch_size.div_ceil(2);
    let ad = synth_generate(per, Label::Ad, net_cfg.input_size, c.seed)?;
    let normal = synth_generate(per, Label::Normal, net_cfg.input_size, c.seed)?;
    let batch: Vec<Example> = ad
        .iter()
        .zip(&normal)
        .flat_map(|(a, n)| [(a, Label::Ad), (n, Label::Normal)])
        .take(g.batch_size)
        .map(|(img, l)| Example { input: zscore_standardize(img, ZSCORE_EPSILON), class: l.class_index() })
        .collect();
    let opts = GradCheckOptions { epsilon: g.epsilon, max_coordinates: g.max_coordinates, seed: c.seed };
    let report = gradient_check_with(network.body(), &batch, &opts)?;
    info!(
        "{}x{} network: max relative error {:e} over {} coordinates ({} skipped at kinks)",
        net_cfg.input_size, net_cfg.input_size, report.max_relative_error, report.checked, report.skipped_kinks
    );
    Ok(report)
}
