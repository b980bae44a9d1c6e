//! Run configuration: a single TOML file describing the domain, the datum,
//! and per-subcommand parameter blocks. Validation collects every problem
//! before reporting, so a bad file is fixed in one round trip, and all
//! defaults are filled in before the config is echoed into the manifest.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::eigenbasis::EigenBasis;
use crate::error::{Error, Issue, Result, Warning};
use crate::field::{Domain, Field};
use crate::grid::{XGrid, YGrid};
use crate::potential::Potential;

fn default_output_every() -> usize {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Total dimension: one confined axis plus d-1 periodic ones.
    pub d: usize,
    /// Nonlinearity power in |u|^(2 sigma) u.
    pub sigma: f64,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub linear_only: bool,
    /// Retained eigenmodes; defaults to n_x / 2.
    #[serde(default)]
    pub n_modes: Option<usize>,
    /// Steps between time-series rows.
    #[serde(default = "default_output_every")]
    pub output_every: usize,
    /// Seed recorded for ensemble-style reproducibility; the flow itself is
    /// deterministic with or without it.
    #[serde(default)]
    pub seed: u64,
    pub xgrid: XGridConfig,
    pub ygrid: YGridConfig,
    pub potential: PotentialConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub snapshots: Option<SnapshotConfig>,
    #[serde(default)]
    pub eigen: Option<EigenConfig>,
    #[serde(default)]
    pub vectorfields: Option<VectorFieldsConfig>,
    #[serde(default)]
    pub scatter: Option<ScatterConfig>,
    #[serde(default)]
    pub waveop: Option<WaveOpConfig>,
    #[serde(default)]
    pub morawetz: Option<MorawetzConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XGridConfig {
    pub l_x: f64,
    pub n_x: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YGridConfig {
    pub l_y: f64,
    pub n_y: usize,
}

/// Potential selection. Mirrors the runtime enum except that tabulated
/// samples come from a file (one real per line, matching the x grid).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Zero,
    Harmonic { omega: f64 },
    PowerLaw { exponent: u32, scale: f64 },
    Exponential { rate: f64 },
    BoundedWell { depth: f64, width: f64 },
    Tabulated { file: PathBuf },
}

impl PotentialConfig {
    /// Resolve to a runtime potential; relative tabulated paths are taken
    /// against `base_dir` (the config file's directory).
    pub fn resolve(&self, base_dir: &Path) -> Result<Potential> {
        Ok(match self {
            PotentialConfig::Zero => Potential::Zero,
            PotentialConfig::Harmonic { omega } => Potential::Harmonic { omega: *omega },
            PotentialConfig::PowerLaw { exponent, scale } => Potential::PowerLaw {
                exponent: *exponent,
                scale: *scale,
            },
            PotentialConfig::Exponential { rate } => Potential::Exponential { rate: *rate },
            PotentialConfig::BoundedWell { depth, width } => Potential::BoundedWell {
                depth: *depth,
                width: *width,
            },
            PotentialConfig::Tabulated { file } => {
                let path = if file.is_absolute() {
                    file.clone()
                } else {
                    base_dir.join(file)
                };
                Potential::from_file(&path)?
            }
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    /// amplitude * exp(-(x^2 + |y - center|^2) / (2 width^2)) * exp(i velocity . y),
    /// optionally rescaled to unit mass before the amplitude is applied.
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center_y: Vec<f64>,
        #[serde(default)]
        velocity_y: Vec<f64>,
        #[serde(default)]
        normalize: bool,
    },
    /// amplitude * phi_n(x) * plane wave with the given lattice wavenumbers.
    Eigenmode {
        n: usize,
        wavenumber_index: Vec<usize>,
        amplitude: f64,
    },
    /// A saved state snapshot (.bin with its .toml sidecar).
    File { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotConfig {
    /// Steps between state dumps; must be a multiple of output_every.
    pub every: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EigenConfig {
    /// Write the basis to this binary cache file (relative to the out dir).
    #[serde(default)]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorFieldsConfig {
    /// Highest commuting family index to check (0..=3).
    pub j_max: usize,
    /// Evolution times t at which defects are measured.
    pub times: Vec<f64>,
    /// Commutation lags tau.
    pub taus: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterConfig {
    pub checkpoints: Vec<f64>,
    pub tol: f64,
    #[serde(default)]
    pub metric: MetricConfig,
    #[serde(default)]
    pub strict_horizon: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum MetricConfig {
    #[default]
    Z,
    ZTilde,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveOpConfig {
    pub t_far: f64,
    pub t_near: f64,
    /// Slab step; independent of the top-level dt.
    pub dt: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_picard_tol")]
    pub tol: f64,
    #[serde(default)]
    pub strict_horizon: bool,
}

fn default_max_iter() -> usize {
    25
}

fn default_picard_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorawetzConfig {
    /// Directory of state snapshots written by a previous simulate run.
    pub trajectory: PathBuf,
    /// Cube half-width for the localized-mass diagnostic.
    pub mu: f64,
    /// Transverse Lebesgue exponent for the decay fit.
    #[serde(default = "default_decay_r")]
    pub decay_r: f64,
}

fn default_decay_r() -> f64 {
    4.0
}

impl RunConfig {
    /// Parse a TOML config file. Syntax errors are validation failures.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::invalid("config", format!("config not found: {} ({e})", path.display()))
        })?;
        toml::from_str(&text)
            .map_err(|e| Error::invalid("config", format!("parse error: {e}")))
    }

    /// Upper end of the admissible sigma range, 2/(d-2)+ (infinite for d = 2).
    pub fn sigma_max(&self) -> f64 {
        if self.d <= 2 {
            f64::INFINITY
        } else {
            2.0 / (self.d as f64 - 2.0)
        }
    }

    /// Structural checks that need no numerics. Returns every problem found.
    pub fn validate(&self) -> Result<()> {
        let mut issues = Vec::new();
        if self.d != 2 && self.d != 3 {
            issues.push(Issue {
                field: "d".into(),
                message: format!("dimension must be 2 or 3; got {}", self.d),
            });
        }
        if self.d == 2 || self.d == 3 {
            let hi = self.sigma_max();
            if !(self.sigma > 0.0) || !(self.sigma < hi) {
                issues.push(Issue {
                    field: "sigma".into(),
                    message: format!(
                        "sigma must lie in (0, {hi}) for d = {}; got {}",
                        self.d, self.sigma
                    ),
                });
            }
        }
        if !(self.dt > 0.0) {
            issues.push(Issue {
                field: "dt".into(),
                message: format!("dt must be positive; got {}", self.dt),
            });
        }
        if !(self.t_end > 0.0) {
            issues.push(Issue {
                field: "t_end".into(),
                message: format!("t_end must be positive; got {}", self.t_end),
            });
        }
        if self.output_every == 0 {
            issues.push(Issue {
                field: "output_every".into(),
                message: "output_every must be at least 1".into(),
            });
        }
        if !(self.xgrid.l_x > 0.0) {
            issues.push(Issue {
                field: "xgrid.l_x".into(),
                message: "half-width must be positive".into(),
            });
        }
        if self.xgrid.n_x < 4 {
            issues.push(Issue {
                field: "xgrid.n_x".into(),
                message: "need at least 4 interior points".into(),
            });
        }
        if !(self.ygrid.l_y > 0.0) {
            issues.push(Issue {
                field: "ygrid.l_y".into(),
                message: "half-width must be positive".into(),
            });
        }
        if self.ygrid.n_y < 4 || !self.ygrid.n_y.is_power_of_two() {
            issues.push(Issue {
                field: "ygrid.n_y".into(),
                message: format!(
                    "need a power of two of at least 4; got {}",
                    self.ygrid.n_y
                ),
            });
        }
        if let Some(m) = self.n_modes {
            if m == 0 || m > self.xgrid.n_x {
                issues.push(Issue {
                    field: "n_modes".into(),
                    message: format!("must lie in 1..={}; got {m}", self.xgrid.n_x),
                });
            }
        }
        let axes = self.d.saturating_sub(1);
        match &self.initial {
            InitialConfig::Gaussian {
                amplitude,
                width,
                center_y,
                velocity_y,
                ..
            } => {
                if *amplitude == 0.0 {
                    issues.push(Issue {
                        field: "initial.amplitude".into(),
                        message: "zero datum evolves trivially; use a nonzero amplitude".into(),
                    });
                }
                if !(*width > 0.0) {
                    issues.push(Issue {
                        field: "initial.width".into(),
                        message: "width must be positive".into(),
                    });
                }
                for (name, v) in [("center_y", center_y), ("velocity_y", velocity_y)] {
                    if !v.is_empty() && v.len() != axes {
                        issues.push(Issue {
                            field: format!("initial.{name}"),
                            message: format!("expected {axes} components, got {}", v.len()),
                        });
                    }
                }
            }
            InitialConfig::Eigenmode {
                n,
                wavenumber_index,
                amplitude,
            } => {
                if *amplitude == 0.0 {
                    issues.push(Issue {
                        field: "initial.amplitude".into(),
                        message: "zero datum evolves trivially; use a nonzero amplitude".into(),
                    });
                }
                let m = self.n_modes.unwrap_or(self.xgrid.n_x / 2);
                if *n >= m {
                    issues.push(Issue {
                        field: "initial.n".into(),
                        message: format!("mode {n} not retained (n_modes = {m})"),
                    });
                }
                if wavenumber_index.len() != axes {
                    issues.push(Issue {
                        field: "initial.wavenumber_index".into(),
                        message: format!(
                            "expected {axes} components, got {}",
                            wavenumber_index.len()
                        ),
                    });
                }
                for k in wavenumber_index {
                    if *k >= self.ygrid.n_y {
                        issues.push(Issue {
                            field: "initial.wavenumber_index".into(),
                            message: format!("index {k} outside 0..{}", self.ygrid.n_y),
                        });
                    }
                }
            }
            InitialConfig::File { .. } => {}
        }
        if let Some(s) = &self.snapshots {
            if s.every == 0 || s.every % self.output_every.max(1) != 0 {
                issues.push(Issue {
                    field: "snapshots.every".into(),
                    message: format!(
                        "must be a positive multiple of output_every ({})",
                        self.output_every
                    ),
                });
            }
        }
        if let Some(v) = &self.vectorfields {
            if v.j_max > 3 {
                issues.push(Issue {
                    field: "vectorfields.j_max".into(),
                    message: "the commuting family has indices 0..=3".into(),
                });
            }
            if v.times.is_empty() || v.taus.is_empty() {
                issues.push(Issue {
                    field: "vectorfields".into(),
                    message: "need at least one time and one tau".into(),
                });
            }
        }
        if let Some(s) = &self.scatter {
            if s.checkpoints.len() < 2 {
                issues.push(Issue {
                    field: "scatter.checkpoints".into(),
                    message: "need at least two checkpoints".into(),
                });
            }
            if !(s.tol > 0.0) {
                issues.push(Issue {
                    field: "scatter.tol".into(),
                    message: "tolerance must be positive".into(),
                });
            }
        }
        if let Some(w) = &self.waveop {
            for (name, v) in [("t_far", w.t_far), ("t_near", w.t_near), ("dt", w.dt)] {
                if !(v > 0.0) {
                    issues.push(Issue {
                        field: format!("waveop.{name}"),
                        message: "must be positive".into(),
                    });
                }
            }
        }
        if let Some(m) = &self.morawetz {
            if !(m.mu > 0.0) {
                issues.push(Issue {
                    field: "morawetz.mu".into(),
                    message: "cube half-width must be positive".into(),
                });
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(issues))
        }
    }

    pub fn n_modes_or_default(&self) -> usize {
        self.n_modes.unwrap_or(self.xgrid.n_x / 2)
    }

    /// Fill every defaultable field so the echoed config is self-describing.
    pub fn with_defaults(mut self) -> RunConfig {
        self.n_modes = Some(self.n_modes_or_default());
        self
    }
}

/// A validated config turned into live objects, plus the advisories the
/// numbers triggered.
pub struct ResolvedRun {
    pub config: RunConfig,
    pub domain: Arc<Domain>,
    pub warnings: Vec<Warning>,
}

/// Validate, build the eigenbasis, and collect numeric advisories
/// (confinement leak, phase aliasing, wraparound horizon, sigma regime).
pub fn resolve(config: &RunConfig, base_dir: &Path) -> Result<ResolvedRun> {
    config.validate()?;
    let potential = config.potential.resolve(base_dir)?;
    let xg = XGrid::new(config.xgrid.l_x, config.xgrid.n_x)?;
    let yg = YGrid::new(config.d, config.ygrid.l_y, config.ygrid.n_y)?;
    let n_modes = config.n_modes_or_default();
    let basis = EigenBasis::build(&xg, &potential, n_modes)?;
    let mut warnings = Vec::new();

    // Mass of the top retained mode near the Dirichlet walls: confinement
    // this weak means the truncation, not V, is doing the confining.
    let top = basis.mode(n_modes - 1);
    let edge = (xg.n_x() as f64 * 0.05).ceil() as usize;
    let outer: f64 = top.iter().take(edge).map(|v| v * v).sum::<f64>()
        + top.iter().rev().take(edge).map(|v| v * v).sum::<f64>();
    let total: f64 = top.iter().map(|v| v * v).sum();
    if outer / total > 1e-6 {
        warnings.push(Warning::new(
            "confinement-leak",
            format!(
                "top retained mode carries {:.2e} of its mass in the outer 5% of the x grid; \
                 widen l_x or lower n_modes",
                outer / total
            ),
        ));
    }

    let domain = Domain::new(basis, yg);

    let eta_max = domain.ygrid().nyquist_velocity();
    let max_phase = (domain.basis().eigenvalue(n_modes - 1) - domain.basis().c0())
        + 0.5 * eta_max * eta_max * domain.ygrid().axes() as f64;
    if config.dt * max_phase >= std::f64::consts::PI {
        warnings.push(Warning::new(
            "phase-aliasing",
            format!(
                "dt * max linear phase = {:.3} exceeds pi; the fastest retained modes \
                 alias within one step",
                config.dt * max_phase
            ),
        ));
    }

    let horizon = domain.ygrid().wraparound_horizon();
    if config.t_end > horizon {
        warnings.push(Warning::new(
            "wraparound-horizon",
            format!(
                "t_end = {} exceeds the periodic wraparound horizon {horizon:.3}; \
                 late-time transverse data may be self-contaminated",
                config.t_end
            ),
        ));
    }

    let sigma_scatter = 2.0 / (config.d as f64 - 1.0);
    if !config.linear_only && config.sigma <= sigma_scatter {
        warnings.push(Warning::new(
            "sigma-regime",
            format!(
                "sigma = {} is at or below the short-range threshold {sigma_scatter}; \
                 scattering-style diagnostics have no convergence guarantee here",
                config.sigma
            ),
        ));
    }

    Ok(ResolvedRun {
        config: config.clone().with_defaults(),
        domain,
        warnings,
    })
}

/// Build the configured datum on a resolved domain. `base_dir` anchors
/// relative snapshot paths.
pub fn build_initial(
    config: &RunConfig,
    domain: &Arc<Domain>,
    base_dir: &Path,
) -> Result<Field> {
    let axes = domain.ygrid().axes();
    match &config.initial {
        InitialConfig::Gaussian {
            amplitude,
            width,
            center_y,
            velocity_y,
            normalize,
        } => {
            let mut center = center_y.clone();
            let mut velocity = velocity_y.clone();
            center.resize(axes, 0.0);
            velocity.resize(axes, 0.0);
            let mut f = Field::gaussian(domain, 1.0, *width, &center, &velocity);
            let scale = if *normalize {
                amplitude / f.mass().sqrt()
            } else {
                *amplitude
            };
            f.scale(num_complex::Complex64::new(scale, 0.0));
            Ok(f)
        }
        InitialConfig::Eigenmode {
            n,
            wavenumber_index,
            amplitude,
        } => Ok(Field::eigenmode(domain, *n, wavenumber_index, *amplitude)),
        InitialConfig::File { path } => {
            let full = if path.is_absolute() {
                path.clone()
            } else {
                base_dir.join(path)
            };
            crate::output::load_snapshot(&full, domain)
        }
    }
}
