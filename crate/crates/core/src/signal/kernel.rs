use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-12;

/// Normalized blur kernel with odd dimensions, stored row-major.
///
/// The center tap sits at `(rows / 2, cols / 2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    rows: usize,
    cols: usize,
    taps: Vec<f64>,
}

impl Kernel {
    /// Builds a kernel from taps that already sum to one.
    pub fn new(rows: usize, cols: usize, taps: Vec<f64>) -> Result<Self> {
        if rows.is_multiple_of(2) || cols.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "kernel dimensions must be odd, got {rows}x{cols}"
            )));
        }
        if taps.len() != rows * cols {
            return Err(Error::dims(rows * cols, taps.len()));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("non-finite kernel tap".into()));
        }
        let sum: f64 = taps.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "kernel taps must sum to 1, got {sum}"
            )));
        }
        Ok(Kernel { rows, cols, taps })
    }

    /// Divides the taps by their sum before validating.
    pub fn normalized(rows: usize, cols: usize, taps: Vec<f64>) -> Result<Self> {
        let sum: f64 = taps.iter().sum();
        if !(sum.is_finite() && sum > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kernel taps must have a positive sum, got {sum}"
            )));
        }
        let taps = taps.into_iter().map(|t| t / sum).collect();
        Kernel::new(rows, cols, taps)
    }

    pub fn identity() -> Self {
        Kernel {
            rows: 1,
            cols: 1,
            taps: vec![1.0],
        }
    }

    pub fn uniform(size: usize) -> Result<Self> {
        Kernel::normalized(size, size, vec![1.0; size * size])
    }

    /// Sampled isotropic Gaussian on a `size`x`size` grid, renormalized to sum 1.
    pub fn gaussian(size: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gaussian sigma must be positive, got {sigma}"
            )));
        }
        let c = (size / 2) as f64;
        let mut taps = Vec::with_capacity(size * size);
        for r in 0..size {
            for q in 0..size {
                let (dr, dq) = (r as f64 - c, q as f64 - c);
                taps.push((-(dr * dr + dq * dq) / (2.0 * sigma * sigma)).exp());
            }
        }
        Kernel::normalized(size, size, taps)
    }

    /// Reads whitespace-separated taps, one kernel row per line. Taps are
    /// renormalized to sum to one.
    pub fn from_text_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut rows = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| Error::Format(format!("kernel tap {s:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if n_rows == 0 || rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::Format("kernel file must be a non-empty rectangular grid".into()));
        }
        Kernel::normalized(n_rows, n_cols, rows.into_iter().flatten().collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn tap(&self, r: usize, c: usize) -> f64 {
        self.taps[r * self.cols + c]
    }

    /// Kernel rotated by 180 degrees.
    pub fn flipped(&self) -> Kernel {
        Kernel {
            rows: self.rows,
            cols: self.cols,
            taps: self.taps.iter().rev().copied().collect(),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.taps
            .iter()
            .zip(self.taps.iter().rev())
            .all(|(a, b)| (a - b).abs() <= 1e-15)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.taps.iter().all(|&t| t >= 0.0)
    }
}

/// The blur kernels used by the deblurring experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum KernelSpec {
    Identity,
    /// 9x9 box blur.
    Uniform9,
    /// 9x9 sampled Gaussian with the given standard deviation.
    Gaussian9(f64),
    File(String),
}

impl KernelSpec {
    pub fn build(&self) -> Result<Kernel> {
        match self {
            KernelSpec::Identity => Ok(Kernel::identity()),
            KernelSpec::Uniform9 => make_kernel_uniform9(),
            KernelSpec::Gaussian9(sigma) => Kernel::gaussian(9, *sigma),
            KernelSpec::File(path) => Kernel::from_text_file(path),
        }
    }
}

pub fn make_kernel_uniform9() -> Result<Kernel> {
    Kernel::uniform(9)
}

/// Builds a kernel from its spec; alias for [`KernelSpec::build`].
pub fn make_kernel(spec: &KernelSpec) -> Result<Kernel> {
    spec.build()
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Identity => write!(f, "identity"),
            KernelSpec::Uniform9 => write!(f, "uniform9"),
            KernelSpec::Gaussian9(s) => write!(f, "gauss9={s}"),
            KernelSpec::File(p) => write!(f, "file:{p}"),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(KernelSpec::File(path.to_string()));
        }
        if let Some(sigma) = s.strip_prefix("gauss9=") {
            let sigma: f64 = sigma
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad gaussian sigma {sigma:?}")))?;
            if !(sigma > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "gaussian sigma must be positive, got {sigma}"
                )));
            }
            return Ok(KernelSpec::Gaussian9(sigma));
        }
        match s {
            "uniform9" => Ok(KernelSpec::Uniform9),
            "identity" => Ok(KernelSpec::Identity),
            _ => Err(Error::InvalidParameter(format!(
                "unknown kernel {s:?} (expected uniform9, gauss9=SIGMA, identity or file:PATH)"
            ))),
        }
    }
}

impl TryFrom<String> for KernelSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<KernelSpec> for String {
    fn from(k: KernelSpec) -> String {
        k.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform9_taps() {
        let k = make_kernel_uniform9().unwrap();
        assert_eq!((k.rows(), k.cols()), (9, 9));
        for &t in k.taps() {
            assert!((t - 1.0 / 81.0).abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian9_is_normalized_and_isotropic() {
        let k = Kernel::gaussian(9, 1.6).unwrap();
        let sum: f64 = k.taps().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let center = k.tap(4, 4);
        assert!(k.taps().iter().all(|&t| t <= center));
        // rotation by 90 degrees: (r, c) -> (c, 8 - r)
        for r in 0..9 {
            for c in 0..9 {
                assert!((k.tap(r, c) - k.tap(c, 8 - r)).abs() < 1e-15);
            }
        }
        assert!(k.is_symmetric());
    }

    #[test]
    fn gaussian_rejects_nonpositive_sigma() {
        assert!(Kernel::gaussian(9, 0.0).is_err());
        assert!(Kernel::gaussian(9, -1.0).is_err());
        assert!("gauss9=0".parse::<KernelSpec>().is_err());
    }

    #[test]
    fn even_dimensions_rejected() {
        assert!(Kernel::normalized(2, 3, vec![1.0; 6]).is_err());
    }

    #[test]
    fn unnormalized_rejected() {
        assert!(Kernel::new(1, 3, vec![1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("uniform9".parse::<KernelSpec>().unwrap(), KernelSpec::Uniform9);
        assert_eq!(
            "gauss9=1.6".parse::<KernelSpec>().unwrap(),
            KernelSpec::Gaussian9(1.6)
        );
        assert_eq!(
            "file:k.txt".parse::<KernelSpec>().unwrap(),
            KernelSpec::File("k.txt".into())
        );
        assert!("box".parse::<KernelSpec>().is_err());
    }

    #[test]
    fn kernel_file_is_renormalized() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.txt");
        std::fs::write(&path, "0 1 0\n1 4 1\n0 1 0\n").unwrap();
        let k = Kernel::from_text_file(&path).unwrap();
        assert!((k.tap(1, 1) - 0.5).abs() < 1e-15);
    }
}
