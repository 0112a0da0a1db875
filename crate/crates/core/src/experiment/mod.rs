//! Poisson deblurring experiments: degradation, restoration, scoring and
//! batch benchmarks.
//!
//! Clean images live on `[0, 1]`. Degradation scales them to `[0, peak]`,
//! blurs, and draws Poisson counts; PSNR is measured on the `[0, peak]` scale
//! with `peak` as the peak value.

pub mod phantom;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::denoiser::{Denoise, Denoiser};
use crate::error::{Error, Result};
use crate::fidelity::Fidelity;
use crate::geometry::{ReferenceFunction, ReferenceKind, RegularizerKind};
use crate::signal::io::load_normalized;
use crate::signal::{psnr, ConvolutionOperator, Image, Kernel, KernelSpec, LinearOperator};
use crate::solver::{self, Algorithm, Init, RunReport, SolverConfig};

pub const DEFAULT_PHANTOM_SIZE: usize = 64;

/// Relative standard deviation of the initial-point perturbation.
pub const INIT_NOISE: f64 = 1e-3;

/// Blurs `x_clean · peak` and draws independent Poisson counts.
pub fn degrade(x_clean: &Image, kernel: &Kernel, peak: f64, seed: u64) -> Result<Image> {
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "peak must be positive, got {peak}"
        )));
    }
    if x_clean.min() < 0.0 || x_clean.max() > 1.0 {
        return Err(Error::InvalidParameter(
            "clean image must lie in [0, 1]".into(),
        ));
    }
    let op = ConvolutionOperator::new(kernel.clone(), x_clean.shape())?;
    let means = op.forward(&x_clean.scale(peak))?;
    assert!(
        means.is_nonnegative(),
        "blurred intensities must be nonnegative"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = Vec::with_capacity(means.len());
    for &m in means.data() {
        let c = if m > 0.0 {
            Poisson::new(m)
                .map_err(|e| Error::InvalidParameter(format!("poisson mean {m}: {e}")))?
                .sample(&mut rng)
        } else {
            0.0
        };
        counts.push(c);
    }
    Image::new(means.width(), means.height(), counts)
}

/// PSNR between two `[0, 1]` images measured on the `[0, peak]` scale.
pub fn evaluate(gt: &Image, test: &Image, peak: f64) -> Result<f64> {
    psnr(&gt.scale(peak), &test.scale(peak), peak)
}

/// PSNR of raw counts against the clean image scaled to `[0, peak]`.
pub fn corrupted_psnr(gt: &Image, counts: &Image, peak: f64) -> Result<f64> {
    psnr(&gt.scale(peak), counts, peak)
}

/// One restoration method: an algorithm and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodSpec {
    /// Column label in benchmark tables; derived from the other fields when
    /// absent.
    pub label: Option<String>,
    pub algo: Algorithm,
    /// Reference function for the Bregman algorithms (Burg when absent).
    pub href: Option<ReferenceKind>,
    /// Denoiser, e.g. `smooth:0.5`, `contract:0.9`, `median:3`.
    pub denoiser: Option<String>,
    pub reg: RegularizerKind,
    pub gamma: f64,
    pub tau: f64,
    pub iters: usize,
    pub tol: f64,
    pub safeguard: bool,
}

impl Default for MethodSpec {
    fn default() -> Self {
        MethodSpec {
            label: None,
            algo: Algorithm::PnpBpgm,
            href: None,
            denoiser: None,
            reg: RegularizerKind::Zero,
            gamma: solver::DEFAULT_GAMMA,
            tau: solver::DEFAULT_TAU,
            iters: solver::DEFAULT_ITERS,
            tol: solver::DEFAULT_TOL,
            safeguard: true,
        }
    }
}

const DEFAULT_DENOISER: &str = "smooth:0.5";

impl MethodSpec {
    pub fn new(algo: Algorithm) -> Self {
        MethodSpec {
            algo,
            ..MethodSpec::default()
        }
    }

    pub fn label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        if self.algo.needs_denoiser() {
            format!(
                "{}[{}]",
                self.algo,
                self.denoiser.as_deref().unwrap_or(DEFAULT_DENOISER)
            )
        } else {
            format!("{}[{}]", self.algo, self.reg)
        }
    }

    pub fn build_denoiser(&self) -> Result<Option<Arc<dyn Denoise>>> {
        if !self.algo.needs_denoiser() {
            return Ok(None);
        }
        let d: Denoiser = self.denoiser.as_deref().unwrap_or(DEFAULT_DENOISER).parse()?;
        Ok(Some(Arc::new(d)))
    }

    fn reference(&self, peak: f64) -> Result<ReferenceFunction> {
        let kind = if self.algo.is_bregman() {
            self.href.unwrap_or(ReferenceKind::Burg)
        } else {
            ReferenceKind::Quadratic
        };
        ReferenceFunction::with_default_box(kind, peak)
    }

    /// Solver configuration for a Poisson deblurring instance.
    pub fn config(
        &self,
        y: &Image,
        kernel: &Kernel,
        peak: f64,
        seed: u64,
        ground_truth: Option<&Image>,
    ) -> Result<SolverConfig> {
        let op: Arc<dyn LinearOperator> = Arc::new(ConvolutionOperator::new(kernel.clone(), y.shape())?);
        let fid = Fidelity::poisson(y.clone(), op)?;
        let mut cfg = SolverConfig::new(self.algo, fid)
            .with_reference(self.reference(peak)?)
            .with_regularizer(self.reg)
            .with_gamma(self.gamma)
            .with_tau(self.tau)
            .with_iters(self.iters)
            .with_tol(self.tol)
            .with_init(Init::Measurements {
                noise_std: INIT_NOISE * peak,
                seed,
            });
        cfg.safeguard = self.safeguard;
        if let Some(d) = self.build_denoiser()? {
            cfg = cfg.with_denoiser(d);
        }
        if let Some(gt) = ground_truth {
            cfg = cfg.with_ground_truth(gt.scale(peak), peak);
        }
        Ok(cfg)
    }
}

/// Restores a count image. The result is on the `[0, peak]` scale; divide by
/// `peak` for file output.
pub fn restore(
    y: &Image,
    kernel: &Kernel,
    peak: f64,
    method: &MethodSpec,
    seed: u64,
    ground_truth: Option<&Image>,
) -> Result<(Image, RunReport)> {
    let cfg = method.config(y, kernel, peak, seed, ground_truth)?;
    let report = solver::solve(&cfg)?;
    Ok((report.final_image.clone(), report))
}

/// Batch of images and methods scored into one table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Image paths, or `phantom:NAME[:SIZE]` for the built-in phantoms.
    pub images: Vec<String>,
    pub kernel: KernelSpec,
    pub peak: f64,
    pub seed: u64,
    pub methods: Vec<MethodSpec>,
    /// Directory receiving one JSON run report per (image, method) cell.
    #[serde(default)]
    pub report_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.images.is_empty() {
            return Err(Error::InvalidParameter("no images in experiment".into()));
        }
        if !(self.peak > 0.0 && self.peak.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "peak must be positive, got {}",
                self.peak
            )));
        }
        Ok(())
    }
}

/// Loads a named image source on `[0, 1]`.
pub fn load_source(source: &str) -> Result<Image> {
    if let Some(rest) = source.strip_prefix("phantom:") {
        let (name, size) = match rest.split_once(':') {
            Some((n, s)) => (
                n,
                s.parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad phantom size {s:?}")))?,
            ),
            None => (rest, DEFAULT_PHANTOM_SIZE),
        };
        return phantom::by_name(name, size);
    }
    load_normalized(source)
}

/// Short name for table headers and report files.
pub fn source_name(source: &str) -> String {
    if let Some(rest) = source.strip_prefix("phantom:") {
        return rest.replace(':', "-");
    }
    Path::new(source)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| source.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub method: String,
    /// PSNR per image, `None` where the run failed.
    pub cells: Vec<Option<f64>>,
}

impl BenchRow {
    /// Mean over the successful cells.
    pub fn average(&self) -> Option<f64> {
        let ok: Vec<f64> = self.cells.iter().flatten().copied().collect();
        if ok.is_empty() {
            None
        } else {
            Some(ok.iter().sum::<f64>() / ok.len() as f64)
        }
    }
}

/// PSNR table: one row per method (the first is always `Corrupted`), one
/// column per image, and a trailing average.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchTable {
    pub images: Vec<String>,
    pub rows: Vec<BenchRow>,
}

pub const CORRUPTED: &str = "Corrupted";

impl BenchTable {
    pub fn row(&self, method: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_csv(&self) -> Result<String> {
        let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| format!("{v:.2}"));
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["method".to_string()];
        header.extend(self.images.iter().cloned());
        header.push("Average".into());
        w.write_record(&header).map_err(csv_error)?;
        for row in &self.rows {
            let mut rec = vec![row.method.clone()];
            rec.extend(row.cells.iter().map(|&c| fmt(c)));
            rec.push(fmt(row.average()));
            w.write_record(&rec).map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

struct Instance {
    name: String,
    gt: Image,
    y: Image,
    seed: u64,
}

/// Runs every (image, method) cell of an experiment. Cells are computed in
/// parallel; failed cells are recorded as missing values.
pub fn bench(spec: &ExperimentSpec) -> Result<BenchTable> {
    spec.validate()?;
    let kernel = spec.kernel.build()?;
    let instances = spec
        .images
        .iter()
        .enumerate()
        .map(|(i, src)| {
            let gt = load_source(src)?;
            let seed = spec.seed.wrapping_add(i as u64);
            let y = degrade(&gt, &kernel, spec.peak, seed)?;
            Ok(Instance {
                name: source_name(src),
                gt,
                y,
                seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(dir) = &spec.report_dir {
        std::fs::create_dir_all(dir)?;
    }

    let mut rows = vec![BenchRow {
        method: CORRUPTED.into(),
        cells: instances
            .iter()
            .map(|inst| corrupted_psnr(&inst.gt, &inst.y, spec.peak).ok())
            .collect(),
    }];

    let jobs: Vec<(usize, usize)> = (0..spec.methods.len())
        .flat_map(|m| (0..instances.len()).map(move |i| (m, i)))
        .collect();
    let results: Vec<Option<f64>> = jobs
        .par_iter()
        .map(|&(m, i)| {
            let method = &spec.methods[m];
            let inst = &instances[i];
            let (x, report) =
                restore(&inst.y, &kernel, spec.peak, method, inst.seed, Some(&inst.gt)).ok()?;
            if let Some(dir) = &spec.report_dir {
                let file = dir.join(format!("{}__{}.json", inst.name, file_safe(&method.label())));
                std::fs::write(file, report.to_json().ok()?).ok()?;
            }
            psnr(&inst.gt.scale(spec.peak), &x, spec.peak).ok()
        })
        .collect();
    for (m, method) in spec.methods.iter().enumerate() {
        let n = instances.len();
        rows.push(BenchRow {
            method: method.label(),
            cells: results[m * n..(m + 1) * n].to_vec(),
        });
    }
    Ok(BenchTable {
        images: instances.into_iter().map(|i| i.name).collect(),
        rows,
    })
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Shape;

    #[test]
    fn zero_image_gives_zero_counts() {
        let x = Image::zeros(Shape::new(16, 16));
        let y = degrade(&x, &Kernel::uniform(9).unwrap(), 8.0, 1).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn counts_are_integers_and_seeded() {
        let x = phantom::blocks(32);
        let k = Kernel::gaussian(9, 1.6).unwrap();
        let a = degrade(&x, &k, 8.0, 42).unwrap();
        let b = degrade(&x, &k, 8.0, 42).unwrap();
        let c = degrade(&x, &k, 8.0, 43).unwrap();
        assert!(a.data().iter().all(|v| v.fract() == 0.0 && *v >= 0.0));
        assert!(a.data().iter().zip(b.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
        assert_ne!(a, c);
    }

    #[test]
    fn large_peak_matches_blurred_mean() {
        let x = phantom::bump(32);
        let k = Kernel::uniform(9).unwrap();
        let peak = 1e6;
        let y = degrade(&x, &k, peak, 7).unwrap();
        let blurred = crate::signal::conv2d_forward(&x, &k).unwrap();
        let rel = (y.scale(1.0 / peak).sum() - blurred.sum()).abs() / blurred.sum();
        assert!(rel < 1e-2, "{rel}");
    }

    #[test]
    fn degrade_rejects_bad_input() {
        let k = Kernel::identity();
        let x = Image::filled(Shape::new(2, 2), 0.5);
        assert!(degrade(&x, &k, 0.0, 1).is_err());
        assert!(degrade(&x.scale(3.0), &k, 1.0, 1).is_err());
    }

    #[test]
    fn evaluate_delegates_to_psnr() {
        let gt = Image::filled(Shape::new(4, 4), 0.5);
        let test = gt.map(|v| v + 0.1);
        assert!((evaluate(&gt, &test, 1.0).unwrap() - 20.0).abs() < 1e-9);
        assert!((evaluate(&gt, &test, 8.0).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn source_names() {
        assert_eq!(source_name("phantom:blocks"), "blocks");
        assert_eq!(source_name("phantom:bump:32"), "bump-32");
        assert_eq!(source_name("/data/set12/house.png"), "house");
        assert_eq!(load_source("phantom:bump:32").unwrap().width(), 32);
    }

    #[test]
    fn method_labels() {
        assert_eq!(MethodSpec::new(Algorithm::PnpBpgm).label(), "pnp-bpgm[smooth:0.5]");
        assert_eq!(MethodSpec::new(Algorithm::Bpgm).label(), "bpgm[zero]");
        let m = MethodSpec {
            label: Some("ours".into()),
            ..MethodSpec::default()
        };
        assert_eq!(m.label(), "ours");
    }

    #[test]
    fn method_spec_json_uses_defaults() {
        let m: MethodSpec = serde_json::from_str(r#"{"algo": "red-bsd", "denoiser": "median:3"}"#).unwrap();
        assert_eq!(m.algo, Algorithm::RedBsd);
        assert_eq!(m.gamma, 0.5);
        assert_eq!(m.tau, 1e-3);
        assert_eq!(m.iters, 100);
        assert!(serde_json::from_str::<MethodSpec>(r#"{"algo": "admm"}"#).is_err());
    }

    #[test]
    fn single_cell_table() {
        let table = BenchTable {
            images: vec!["a".into()],
            rows: vec![BenchRow {
                method: "m".into(),
                cells: vec![Some(21.456)],
            }],
        };
        assert_eq!(table.rows[0].average(), Some(21.456));
        assert_eq!(table.to_csv().unwrap(), "method,a,Average\nm,21.46,21.46\n");
    }

    #[test]
    fn missing_cells_print_na_and_skip_average() {
        let row = BenchRow {
            method: "m".into(),
            cells: vec![Some(10.0), None, Some(12.0)],
        };
        assert_eq!(row.average(), Some(11.0));
        let table = BenchTable {
            images: vec!["a".into(), "b".into(), "c".into()],
            rows: vec![row],
        };
        assert!(table.to_csv().unwrap().contains("m,10.00,NA,12.00,11.00"));
    }
}
