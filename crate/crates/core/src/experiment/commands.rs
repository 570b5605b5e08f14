//! The `learn`, `reconstruct`, `analyze` and `sweep` commands.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array2, ArrayView2};

use crate::analysis::{analyze_sparsity, difference_image, remove_peak, QualityReport, SparsityReport};
use crate::artifact::{load_codes, load_dictionary, save_codes, save_dictionary, write_dictionary_csv};
use crate::error::{ensure_dim, Error, Result};
use crate::learn::{learn_dictionary, LearnConfig, LearnOutcome};
use crate::pipeline::{
    extract_patches, load_image_file, overcomplete_dct_dictionary, reconstruct_image, save_pgm, scale_image,
    synthesize, PatchGrid, ReconstructConfig, GREY_RANGE,
};
use crate::types::{Dictionary, GrayImage, Patch, SolverId};

use super::spec::{mu_tag, Command, ExperimentSpec, MANIFEST_NAME};

/// Scale applied to the difference images.
pub const DIFFERENCE_SCALE: f64 = 50.0;

/// What a command produced, relative to its output directory.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub outputs: Vec<String>,
    /// Sweep cells that failed; their rows carry the error text.
    pub failed_cells: usize,
}

struct Outputs<'a> {
    dir: &'a Path,
    names: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(Error::at_path(dir))?;
        Ok(Self { dir, names: Vec::new() })
    }

    fn path(&mut self, name: impl Into<String>) -> PathBuf {
        let name = name.into();
        let p = self.dir.join(&name);
        self.names.push(name);
        p
    }

    fn csv(&mut self, name: impl Into<String>) -> Result<csv::Writer<BufWriter<File>>> {
        let p = self.path(name);
        let f = File::create(&p).map_err(Error::at_path(&p))?;
        Ok(csv::Writer::from_writer(BufWriter::new(f)))
    }

    fn finish(mut self, spec: &ExperimentSpec, failed_cells: usize) -> Result<RunSummary> {
        let manifest = self.dir.join(MANIFEST_NAME);
        self.names.push(MANIFEST_NAME.to_string());
        fs::write(&manifest, spec.manifest(&self.names)).map_err(Error::at_path(&manifest))?;
        Ok(RunSummary {
            outputs: self.names,
            failed_cells,
        })
    }
}

/// Validates `spec` and runs its command.
pub fn run(spec: &ExperimentSpec) -> Result<RunSummary> {
    spec.validate()?;
    match spec.command {
        Command::Learn => cmd_learn(spec),
        Command::Reconstruct => cmd_reconstruct(spec),
        Command::Analyze => cmd_analyze(spec),
        Command::Sweep => cmd_sweep(spec),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "image".to_string(), |s| s.to_string_lossy().into_owned())
}

fn load_images(paths: &[PathBuf]) -> Result<Vec<GrayImage>> {
    paths
        .iter()
        .map(|p| {
            if !p.exists() {
                return Err(Error::MissingPath(p.clone()));
            }
            load_image_file(p)
        })
        .collect()
}

/// Patch side implied by the dictionary, checked against an explicit
/// `--patch` when one was given.
fn patch_side_for(dict: &Dictionary, spec: &ExperimentSpec) -> Result<usize> {
    let m = dict.atom_dim();
    let side = (m as f64).sqrt().round() as usize;
    if side * side != m {
        return Err(Error::invalid(format!("atom dimension {m} is not a square patch")));
    }
    if let Some(p) = spec.patches.as_deref() {
        match p {
            [s] => ensure_dim("dictionary atom dimension vs patch side", s * s, m)?,
            _ => return Err(Error::Usage("a single --patch is expected here".into())),
        }
    }
    Ok(side)
}

/// Every grid patch of every image, mapped into the working domain.
pub fn training_pool(images: &[GrayImage], side: usize, stride: usize, tonal_range: f64) -> Result<Vec<Patch>> {
    let mut pool = Vec::new();
    for img in images {
        let working = scale_image(img, tonal_range / GREY_RANGE)?;
        pool.extend(extract_patches(&working, side, stride)?.0);
    }
    Ok(pool)
}

/// Online learning from a DCT (or given) starting dictionary over the pooled
/// patches of `images`.
pub fn learn_on_images(
    images: &[GrayImage],
    d0: &Dictionary,
    stride: usize,
    tonal_range: f64,
    cfg: &LearnConfig,
) -> Result<LearnOutcome> {
    let side = (d0.atom_dim() as f64).sqrt().round() as usize;
    let pool = training_pool(images, side, stride, tonal_range)?;
    learn_dictionary(d0, &pool, cfg)
}

pub fn cmd_learn(spec: &ExperimentSpec) -> Result<RunSummary> {
    spec.validate()?;
    let images = load_images(&spec.images)?;
    let side = spec.patch_sides()[0];
    let d0 = match &spec.dict {
        Some(p) => {
            let d = load_dictionary(p)?;
            ensure_dim("initial dictionary atom dimension", side * side, d.atom_dim())?;
            d
        }
        None => overcomplete_dct_dictionary(side, spec.atoms)?,
    };
    let cfg = spec.learn_config(spec.solver(), spec.mus[0]);
    let outcome = learn_on_images(&images, &d0, spec.stride, spec.tonal_range, &cfg)?;

    let mut out = Outputs::new(&spec.out)?;
    save_dictionary(out.path("dictionary.sdd"), &outcome.dictionary)?;
    let p = out.path("dictionary.csv");
    write_dictionary_csv(&outcome.dictionary, BufWriter::new(File::create(&p).map_err(Error::at_path(&p))?))?;
    let p = out.path("learn_log.csv");
    outcome.log.write_csv(BufWriter::new(File::create(&p).map_err(Error::at_path(&p))?))?;
    out.finish(spec, 0)
}

const QUALITY_HEADER: [&str; 10] = [
    "image",
    "solver",
    "mu",
    "rel_err",
    "dev",
    "ssim",
    "image_tolerance_met",
    "mean_iterations",
    "max_iterations",
    "zero_fraction",
];

pub fn cmd_reconstruct(spec: &ExperimentSpec) -> Result<RunSummary> {
    spec.validate()?;
    let dict = load_dictionary(spec.dict.as_ref().expect("validated"))?;
    let side = patch_side_for(&dict, spec)?;
    let images = load_images(&spec.images)?;

    let mut out = Outputs::new(&spec.out)?;
    let mut table = out.csv("quality.csv")?;
    table.write_record(QUALITY_HEADER)?;
    for (path, img) in spec.images.iter().zip(&images) {
        for &mu in &spec.mus {
            let mut cfg = ReconstructConfig::new(spec.reconstruct_settings(spec.solver(), mu), side, spec.stride);
            cfg.tonal_range = spec.tonal_range;
            let rec = reconstruct_image(img, &dict, &cfg)?;
            let tag = format!("{}_{}", stem(path), mu_tag(mu));
            save_pgm(out.path(format!("rec_{tag}.pgm")), &rec.image)?;
            save_codes(out.path(format!("codes_{tag}.sdc")), rec.codes.view())?;
            let q = QualityReport::measure(img, &rec.image)?;
            let iters = &rec.solver_iterations;
            let zeros = rec.codes.iter().filter(|&&v| v == 0.0).count() as f64 / rec.codes.len() as f64;
            let [rel, dev, ssim] = q.csv_fields();
            table.write_record([
                stem(path),
                spec.solver().to_string(),
                mu.to_string(),
                rel,
                dev,
                ssim,
                rec.meets_image_tolerance.to_string(),
                (iters.iter().sum::<usize>() as f64 / iters.len() as f64).to_string(),
                iters.iter().max().copied().unwrap_or(0).to_string(),
                zeros.to_string(),
            ])?;
        }
    }
    table.flush()?;
    drop(table);
    out.finish(spec, 0)
}

/// Sparsity report of a code matrix plus, when the original image and
/// dictionary are known, the quality of the plain and peak-removed
/// reconstructions.
#[derive(Debug, Clone)]
pub struct CodeAnalysis {
    pub report: SparsityReport,
    pub removed: usize,
    pub quality: Option<QualityReport>,
    pub peak_removed_quality: Option<QualityReport>,
    pub peak_removed_image: Option<GrayImage>,
}

/// Context needed to turn codes back into an image.
pub struct Resynthesis<'a> {
    pub dict: &'a Dictionary,
    pub grid: PatchGrid,
    pub original: &'a GrayImage,
    pub tonal_range: f64,
}

pub fn analyze_codes(
    codes: ArrayView2<'_, f64>,
    bins: usize,
    kappa: f64,
    resynth: Option<&Resynthesis<'_>>,
) -> Result<CodeAnalysis> {
    let report = analyze_sparsity(codes, bins, kappa)?;
    let (stripped, removed) = remove_peak(codes, &report.peak);
    let mut analysis = CodeAnalysis {
        report,
        removed,
        quality: None,
        peak_removed_quality: None,
        peak_removed_image: None,
    };
    if let Some(r) = resynth {
        ensure_dim("code columns vs patch grid", r.grid.len(), codes.ncols())?;
        let (plain, _) = synthesize(r.dict, codes, &r.grid, r.original, r.tonal_range)?;
        let (cut, _) = synthesize(r.dict, stripped.view(), &r.grid, r.original, r.tonal_range)?;
        analysis.quality = Some(QualityReport::measure(r.original, &plain)?);
        analysis.peak_removed_quality = Some(QualityReport::measure(r.original, &cut)?);
        analysis.peak_removed_image = Some(cut);
    }
    Ok(analysis)
}

const SPARSITY_EXTRA: [&str; 9] = [
    "peak_fraction",
    "removed",
    "rel_err",
    "dev",
    "ssim",
    "rel_err_peak_removed",
    "dev_peak_removed",
    "ssim_peak_removed",
    "tag",
];

pub fn cmd_analyze(spec: &ExperimentSpec) -> Result<RunSummary> {
    spec.validate()?;
    let dict = spec.dict.as_ref().map(load_dictionary).transpose()?;
    let images = load_images(&spec.images)?;

    // (tag, codes, original image) for each coefficient set to analyze
    let mut sets: Vec<(String, Array2<f64>, Option<&GrayImage>)> = Vec::new();
    if spec.codes.is_empty() {
        let dict = dict.as_ref().expect("validated");
        let side = patch_side_for(dict, spec)?;
        for (path, img) in spec.images.iter().zip(&images) {
            for &mu in &spec.mus {
                let mut cfg = ReconstructConfig::new(spec.reconstruct_settings(spec.solver(), mu), side, spec.stride);
                cfg.tonal_range = spec.tonal_range;
                let rec = reconstruct_image(img, dict, &cfg)?;
                sets.push((format!("{}_{}", stem(path), mu_tag(mu)), rec.codes, Some(img)));
            }
        }
    } else {
        for path in &spec.codes {
            sets.push((stem(path), load_codes(path)?, images.first()));
        }
    }

    let mut out = Outputs::new(&spec.out)?;
    let mut table = out.csv("sparsity.csv")?;
    let header: Vec<&str> = SparsityReport::CSV_HEADER.iter().chain(&SPARSITY_EXTRA).copied().collect();
    table.write_record(&header)?;
    for (tag, codes, original) in &sets {
        let resynth = match (&dict, original) {
            (Some(d), Some(img)) => Some(Resynthesis {
                dict: d,
                grid: PatchGrid::for_image(img, patch_side_for(d, spec)?, spec.stride)?,
                original: img,
                tonal_range: spec.tonal_range,
            }),
            _ => None,
        };
        let a = analyze_codes(codes.view(), spec.bins, spec.kappa, resynth.as_ref())?;
        let h = &a.report.histogram;
        let p = out.path(format!("histogram_{tag}.csv"));
        h.write_csv(a.report.fit.as_ref(), BufWriter::new(File::create(&p).map_err(Error::at_path(&p))?))?;

        if let (Some(r), Some(cut)) = (&resynth, &a.peak_removed_image) {
            let (plain, _) = synthesize(r.dict, codes.view(), &r.grid, r.original, r.tonal_range)?;
            save_pgm(out.path(format!("diff_{tag}.pgm")), &difference_image(r.original, &plain, DIFFERENCE_SCALE, true)?)?;
            save_pgm(out.path(format!("rec_{tag}_peak_removed.pgm")), cut)?;
            save_pgm(
                out.path(format!("diff_{tag}_peak_removed.pgm")),
                &difference_image(r.original, cut, DIFFERENCE_SCALE, true)?,
            )?;
        }
        let q = |q: Option<QualityReport>| q.map_or_else(|| vec![String::new(); 3], |q| q.csv_fields().to_vec());
        let mut row = a.report.csv_fields();
        row.push(a.report.peak_fraction.to_string());
        row.push(a.removed.to_string());
        row.extend(q(a.quality));
        row.extend(q(a.peak_removed_quality));
        row.push(tag.clone());
        table.write_record(&row)?;
    }
    table.flush()?;
    drop(table);
    out.finish(spec, 0)
}

/// One (solver, mu, patch side, test image) cell of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub solver: SolverId,
    pub mu: f64,
    pub patch: usize,
    pub image: String,
    pub quality: Option<QualityReport>,
    pub mean: Option<f64>,
    pub sigma: Option<f64>,
    pub peak_count: Option<u64>,
    pub sparsity_fraction: Option<f64>,
    pub seconds: f64,
    pub error: Option<String>,
}

impl SweepRow {
    pub const CSV_HEADER: [&'static str; 13] = [
        "solver",
        "mu",
        "patch",
        "image",
        "rel_err",
        "dev",
        "ssim",
        "m",
        "sigma",
        "peak_count",
        "sparsity_fraction",
        "seconds",
        "error",
    ];

    fn csv_fields(&self) -> Vec<String> {
        fn opt<T: ToString>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        vec![
            self.solver.to_string(),
            self.mu.to_string(),
            self.patch.to_string(),
            self.image.clone(),
            opt(self.quality.map(|q| q.rel_err)),
            opt(self.quality.map(|q| q.dev)),
            opt(self.quality.map(|q| q.ssim)),
            opt(self.mean),
            opt(self.sigma),
            opt(self.peak_count),
            opt(self.sparsity_fraction),
            self.seconds.to_string(),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

/// Data rows of a CSV written by [`cmd_sweep`], in [`SweepRow::CSV_HEADER`]
/// column order.
pub fn read_sweep_csv(path: impl AsRef<Path>) -> Result<Vec<csv::StringRecord>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.records().collect::<std::result::Result<_, _>>()?)
}

pub fn cmd_sweep(spec: &ExperimentSpec) -> Result<RunSummary> {
    spec.validate()?;
    let train = load_images(&spec.images)?;
    let tests = load_images(&spec.test_images)?;
    let mut out = Outputs::new(&spec.out)?;
    let mut rows = Vec::new();

    for &solver in &spec.solvers {
        for &mu in &spec.mus {
            for side in spec.patch_sides() {
                let started = Instant::now();
                let dict = sweep_dictionary(spec, &train, solver, mu, side);
                for (path, img) in spec.test_images.iter().zip(&tests) {
                    let mut row = SweepRow {
                        solver,
                        mu,
                        patch: side,
                        image: stem(path),
                        quality: None,
                        mean: None,
                        sigma: None,
                        peak_count: None,
                        sparsity_fraction: None,
                        seconds: 0.0,
                        error: None,
                    };
                    let cell = dict.as_ref().map_err(|e| e.to_string()).and_then(|d| {
                        sweep_cell(spec, d, img, solver, mu, side).map_err(|e| e.to_string())
                    });
                    match cell {
                        Ok((q, report)) => {
                            row.quality = Some(q);
                            row.mean = report.fit.map(|f| f.mean);
                            row.sigma = report.fit.map(|f| f.sigma);
                            row.peak_count = Some(report.peak.count);
                            row.sparsity_fraction = Some(report.sparsity_fraction);
                            let p = out.path(format!("histogram_{solver}_{}_s{side}_{}.csv", mu_tag(mu), row.image));
                            let f = File::create(&p).map_err(Error::at_path(&p))?;
                            report.histogram.write_csv(report.fit.as_ref(), BufWriter::new(f))?;
                        }
                        Err(e) => row.error = Some(e),
                    }
                    row.seconds = started.elapsed().as_secs_f64();
                    rows.push(row);
                }
            }
        }
    }

    let mut table = out.csv("sweep.csv")?;
    table.write_record(SweepRow::CSV_HEADER)?;
    for row in &rows {
        table.write_record(row.csv_fields())?;
    }
    table.flush()?;
    drop(table);
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    out.finish(spec, failed)
}

/// DCT start, refined by online learning unless `n_patches` is zero.
fn sweep_dictionary(spec: &ExperimentSpec, train: &[GrayImage], solver: SolverId, mu: f64, side: usize) -> Result<Dictionary> {
    let d0 = overcomplete_dct_dictionary(side, spec.atoms)?;
    if spec.n_patches == 0 {
        return Ok(d0);
    }
    let cfg = spec.learn_config(solver, mu);
    Ok(learn_on_images(train, &d0, spec.stride, spec.tonal_range, &cfg)?.dictionary)
}

fn sweep_cell(
    spec: &ExperimentSpec,
    dict: &Dictionary,
    img: &GrayImage,
    solver: SolverId,
    mu: f64,
    side: usize,
) -> Result<(QualityReport, SparsityReport)> {
    let mut cfg = ReconstructConfig::new(spec.reconstruct_settings(solver, mu), side, spec.stride);
    cfg.tonal_range = spec.tonal_range;
    let rec = reconstruct_image(img, dict, &cfg)?;
    let q = QualityReport::measure(img, &rec.image)?;
    let report = analyze_sparsity(rec.codes.view(), spec.bins, spec.kappa)?;
    Ok((q, report))
}
