use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::expr::{parse, Expression, MAX_COMPLEX_DIM};
use crate::rng::{self, Purpose};
use crate::{Error, Result};

/// Metric used for `ω`-dependent quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    #[default]
    Euclidean,
    /// Fubini–Study metric of `CP^n` in the affine chart `C^n`.
    FubiniStudyChart,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleCounts {
    pub boundary: usize,
    pub collar: usize,
    pub volume: usize,
    /// Draws for thin-shell surface quadrature.
    pub shell: usize,
}

impl Default for SampleCounts {
    fn default() -> Self {
        SampleCounts {
            boundary: 500,
            collar: 2000,
            volume: 200_000,
            shell: 4_000_000,
        }
    }
}

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_RANK_TOL: f64 = 1e-6;
pub const DEFAULT_SEED: u64 = 20120401;

/// On-disk JSON form of a [`DomainSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpecFile {
    pub n: usize,
    pub rho: String,
    #[serde(rename = "box")]
    pub bbox: Vec<[f64; 2]>,
    #[serde(default)]
    pub metric: MetricKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collar_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_tol: Option<f64>,
    #[serde(default)]
    pub samples: SampleCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// A bounded domain `Ω = {ρ < 0}` inside an axis-aligned box of `R^{2n}`,
/// together with the numerical settings used by every analysis.
#[derive(Debug, Clone)]
pub struct DomainSpec {
    pub n: usize,
    pub rho: Expression,
    /// Coordinate ranges in the order `x1, y1, x2, y2, …`.
    pub bbox: Vec<[f64; 2]>,
    pub metric: MetricKind,
    /// Width of the collar `{-collar_width ≤ ρ < 0}` in units of `ρ`.
    pub collar_width: f64,
    pub tol: f64,
    pub rank_tol: f64,
    pub samples: SampleCounts,
    pub seed: u64,
    rho_scale: f64,
}

impl DomainSpec {
    /// Builds and validates a spec with default settings.
    pub fn new(n: usize, rho: &str, bbox: Vec<[f64; 2]>) -> Result<Self> {
        let spec = Self::new_unchecked(n, rho, bbox)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Parses the expression and box but skips the nondegeneracy probe.
    pub fn new_unchecked(n: usize, rho: &str, bbox: Vec<[f64; 2]>) -> Result<Self> {
        if n == 0 || n > MAX_COMPLEX_DIM {
            return Err(Error::Spec(format!("n must be in 1..={MAX_COMPLEX_DIM}, got {n}")));
        }
        if bbox.len() != 2 * n {
            return Err(Error::Spec(format!(
                "box has {} ranges, expected 2n = {}",
                bbox.len(),
                2 * n
            )));
        }
        for (k, [lo, hi]) in bbox.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Spec(format!("box range {k} is empty or not finite: [{lo}, {hi}]")));
            }
        }
        let rho = parse(rho, n)?;
        let mut spec = DomainSpec {
            n,
            rho,
            bbox,
            metric: MetricKind::Euclidean,
            collar_width: 0.0,
            tol: DEFAULT_TOL,
            rank_tol: DEFAULT_RANK_TOL,
            samples: SampleCounts::default(),
            seed: DEFAULT_SEED,
            rho_scale: 1.0,
        };
        spec.collar_width = 0.05 * spec.diameter();
        spec.rho_scale = spec.probe_scale();
        Ok(spec)
    }

    pub fn from_file_struct(file: DomainSpecFile) -> Result<Self> {
        let mut spec = Self::new_unchecked(file.n, &file.rho, file.bbox)?;
        spec.metric = file.metric;
        if let Some(w) = file.collar_width {
            spec.collar_width = w;
        }
        if let Some(t) = file.tol {
            spec.tol = t;
        }
        if let Some(t) = file.rank_tol {
            spec.rank_tol = t;
        }
        spec.samples = file.samples;
        if let Some(s) = file.seed {
            spec.seed = s;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DomainSpecFile = serde_json::from_str(text)
            .map_err(|e| Error::Spec(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        Self::from_file_struct(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Spec(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Spec(msg) => Error::Spec(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Effective configuration with all defaults resolved.
    pub fn to_file_struct(&self) -> DomainSpecFile {
        DomainSpecFile {
            n: self.n,
            rho: self.rho.to_string(),
            bbox: self.bbox.clone(),
            metric: self.metric,
            collar_width: Some(self.collar_width),
            tol: Some(self.tol),
            rank_tol: Some(self.rank_tol),
            samples: self.samples,
            seed: Some(self.seed),
        }
    }

    pub fn with_metric(mut self, metric: MetricKind) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_collar_width(mut self, w: f64) -> Self {
        self.collar_width = w;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_samples(mut self, samples: SampleCounts) -> Self {
        self.samples = samples;
        self
    }

    /// Replaces the defining function, keeping every other setting.
    pub fn with_rho(mut self, rho: Expression) -> Self {
        self.rho = rho;
        self.rho_scale = self.probe_scale();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.collar_width > 0.0 && self.collar_width.is_finite()) {
            return Err(Error::Spec(format!("collar_width must be positive, got {}", self.collar_width)));
        }
        if !(self.tol > 0.0) || !(self.rank_tol > 0.0) {
            return Err(Error::Spec("tol and rank_tol must be positive".into()));
        }
        let s = &self.samples;
        if s.boundary == 0 || s.collar == 0 || s.volume == 0 || s.shell == 0 {
            return Err(Error::Spec("sample counts must be positive".into()));
        }
        let (mut neg, mut pos) = (false, false);
        for p in self.probe_points() {
            if let Ok(v) = self.rho.value(&p) {
                neg |= v < 0.0;
                pos |= v > 0.0;
            }
            if neg && pos {
                return Ok(());
            }
        }
        Err(Error::Spec(
            "defining function must take both signs inside the box (no boundary found)".into(),
        ))
    }

    fn probe_points(&self) -> Vec<Vec<f64>> {
        let center: Vec<f64> = self.bbox.iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect();
        let mut pts = vec![center];
        pts.extend(rng::latin_hypercube(self.seed, Purpose::Probe, 0, &self.bbox, 4096));
        pts
    }

    fn probe_scale(&self) -> f64 {
        self.probe_points()
            .iter()
            .filter_map(|p| self.rho.value(p).ok())
            .filter(|v| v.is_finite())
            .fold(1.0, |m: f64, v| m.max(v.abs()))
    }

    pub fn real_dim(&self) -> usize {
        2 * self.n
    }

    pub fn diameter(&self) -> f64 {
        self.bbox.iter().map(|[lo, hi]| (hi - lo).powi(2)).sum::<f64>().sqrt()
    }

    pub fn box_volume(&self) -> f64 {
        self.bbox.iter().map(|[lo, hi]| hi - lo).product()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().zip(&self.bbox).all(|(x, [lo, hi])| *lo <= *x && *x <= *hi)
    }

    /// Typical magnitude of `ρ` over the box (at least 1); level-set
    /// tolerances are relative to it.
    pub fn rho_scale(&self) -> f64 {
        self.rho_scale
    }

    /// Convergence threshold for boundary projection.
    pub fn level_tol(&self) -> f64 {
        1e-12 * self.rho_scale
    }

    /// Default collar `(t_min, t_max) = (collar_width/10, collar_width)`.
    pub fn default_collar(&self) -> (f64, f64) {
        (0.1 * self.collar_width, self.collar_width)
    }
}
