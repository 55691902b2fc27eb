//! Scenario files: `key = value` lines with dotted section names.
//!
//! `#` starts a comment. Unknown and repeated keys are errors, and every
//! error names the offending key. Omitted keys take the defaults listed in
//! [`KEYS`]; [`Scenario::render`] writes the fully resolved form back out.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::controller::{ControlLaw, Denominator, DEFAULT_FLOOR_FRACTION};
use crate::desired::{Bump, GaussianMixture};
use crate::error::{Error, Result};
use crate::field::{ingest_image, Domain, IngestOptions, ScalarField, DEFAULT_FLOOR};
use crate::kde::BoundaryCorrection;
use crate::kernels::{BandwidthPolicy, Kernel, DEFAULT_C_NU, SWARM_GAUSSIAN_CUTOFF};
use crate::oracle::FluxScheme;
use crate::simulator::{Boundary, InitialDistribution, SimConfig, DEFAULT_METRICS_RESOLUTION};
use crate::Vec2;

/// Every accepted key, in the order [`Scenario::render`] writes them.
pub const KEYS: &[&str] = &[
    "name",
    "domain.x0",
    "domain.y0",
    "domain.lx",
    "domain.ly",
    "desired.kind",
    "desired.image",
    "desired.floor",
    "desired.invert",
    "desired.resolution",
    "desired.components",
    "kernel.name",
    "kernel.cutoff",
    "bandwidth.mode",
    "bandwidth.h",
    "bandwidth.c_nu",
    "control.D",
    "control.f_floor",
    "control.v_max",
    "control.denominator",
    "kde.boundary",
    "sim.N",
    "sim.dt",
    "sim.T",
    "sim.seed",
    "sim.init",
    "sim.init_mean",
    "sim.init_std",
    "sim.init_file",
    "sim.boundary",
    "metrics.every",
    "metrics.grid",
    "output.snapshot_every",
    "output.trajectory_every",
    "oracle.n",
    "oracle.D",
    "oracle.t",
    "oracle.scheme",
];

/// Steps taken when `sim.T` is omitted.
pub const DEFAULT_STEPS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub enum DesiredSpec {
    Uniform,
    Mixture {
        mixture: GaussianMixture,
        resolution: usize,
        floor: f64,
    },
    Image {
        path: PathBuf,
        floor: f64,
        invert: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum BandwidthSpec {
    Fixed(f64),
    /// `sigma_hat` comes from the initial swarm.
    RuleOfThumb {
        c_nu: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Uniform,
    Gaussian { mean: Vec2, std: f64 },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub domain: Domain,
    pub desired: DesiredSpec,
    pub kernel_name: String,
    /// `None`: untruncated (Gaussian only).
    pub kernel_cutoff: Option<f64>,
    pub bandwidth: BandwidthSpec,
    pub diffusion: f64,
    /// `None`: `DEFAULT_FLOOR_FRACTION` of the uniform level.
    pub f_floor: Option<f64>,
    pub v_max: f64,
    pub denominator: Denominator,
    pub kde_boundary: BoundaryCorrection,
    pub n: usize,
    /// `None`: `0.1 h^2 / D`.
    pub dt: Option<f64>,
    /// `None`: `DEFAULT_STEPS` steps.
    pub t_final: Option<f64>,
    pub seed: u64,
    pub init: InitSpec,
    pub metrics_every: usize,
    pub metrics_grid: usize,
    pub snapshot_every: usize,
    pub trajectory_every: usize,
    pub oracle_n: usize,
    /// `None`: same as `control.D`.
    pub oracle_diffusion: Option<f64>,
    /// `None`: one e-folding time of the slowest mode.
    pub oracle_t: Option<f64>,
    pub oracle_scheme: FluxScheme,
}

struct Entries {
    values: HashMap<String, String>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut values = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(
                    format!("line {}", lineno + 1),
                    format!("expected `key = value`, found `{line}`"),
                ));
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(Error::config(key, "unknown key"));
            }
            if value.is_empty() {
                return Err(Error::config(key, "missing value"));
            }
            if values.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::config(key, "given more than once"));
            }
        }
        Ok(Entries { values })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::config(key, format!("cannot parse `{v}` as {}", type_label::<T>()))),
        }
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.raw(key)
            .ok_or_else(|| Error::config(key, "required key is missing"))
    }

    /// Real number where `none`/`inf` mean "absent".
    fn optional_real(&self, key: &str) -> Result<Option<Option<f64>>> {
        match self.raw(key) {
            None => Ok(None),
            Some("none") | Some("inf") => Ok(Some(None)),
            Some(_) => Ok(Some(self.get::<f64>(key)?)),
        }
    }

    fn pair(&self, key: &str) -> Result<Option<Vec2>> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        let parts: Vec<&str> = v.split_whitespace().collect();
        let nums: Option<Vec<f64>> = parts.iter().map(|p| p.parse().ok()).collect();
        match nums.as_deref() {
            Some([x, y]) => Ok(Some(Vec2::new(*x, *y))),
            _ => Err(Error::config(key, format!("expected two numbers, found `{v}`"))),
        }
    }
}

fn type_label<T>() -> &'static str {
    let full = std::any::type_name::<T>();
    match full {
        "f64" => "a real number",
        "usize" | "u64" => "a non-negative integer",
        "bool" => "`true` or `false`",
        _ => full,
    }
}

/// Rewraps a module-level validation error under `key`.
fn at_key(key: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::InvalidParameter { reason, .. } => Error::config(key, reason),
        Error::Config { .. } => e,
        other => Error::config(key, other.to_string()),
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(key, format!("must be positive and finite, got {v}")))
    }
}

fn at_least_one(key: &str, v: usize) -> Result<usize> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(Error::config(key, "must be at least 1"))
    }
}

fn resolve_path(base: Option<&Path>, value: &str) -> PathBuf {
    let p = PathBuf::from(value);
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p,
    }
}

fn parse_components(key: &str, text: &str) -> Result<GaussianMixture> {
    let mut bumps = Vec::new();
    for part in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let nums: Option<Vec<f64>> = part.split_whitespace().map(|t| t.parse().ok()).collect();
        let Some([x, y, std, weight]) = nums.as_deref() else {
            return Err(Error::config(
                key,
                format!("component `{part}` must be `mean_x mean_y std weight`"),
            ));
        };
        bumps.push(Bump {
            mean: Vec2::new(*x, *y),
            std: *std,
            weight: *weight,
        });
    }
    GaussianMixture::new(bumps).map_err(at_key(key))
}

impl Scenario {
    /// Reads and validates a scenario file; relative paths inside it are
    /// taken relative to the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Scenario {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::parse(&text, path.parent()).map_err(|e| Error::Scenario {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let e = Entries::parse(text)?;
        let name = e.required("name")?.to_string();

        let lower = Vec2::new(e.or("domain.x0", 0.0)?, e.or("domain.y0", 0.0)?);
        let size = Vec2::new(
            positive("domain.lx", e.or("domain.lx", 1.0)?)?,
            positive("domain.ly", e.or("domain.ly", 1.0)?)?,
        );
        let domain = Domain::new(lower, size).map_err(at_key("domain"))?;
        let side = size.x.min(size.y);

        let floor: f64 = e.or("desired.floor", DEFAULT_FLOOR)?;
        if !(floor >= 0.0 && floor.is_finite()) {
            return Err(Error::config("desired.floor", "must be non-negative and finite"));
        }
        let kind = e.required("desired.kind")?;
        let only_for = |key: &str, kinds: &str| -> Result<()> {
            if e.raw(key).is_some() {
                return Err(Error::config(key, format!("only valid with desired.kind = {kinds}")));
            }
            Ok(())
        };
        let desired = match kind {
            "uniform" => {
                for k in [
                    "desired.image",
                    "desired.invert",
                    "desired.components",
                    "desired.resolution",
                    "desired.floor",
                ] {
                    only_for(k, "image or mixture")?;
                }
                DesiredSpec::Uniform
            }
            "mixture" => {
                only_for("desired.image", "image")?;
                only_for("desired.invert", "image")?;
                let mixture = parse_components("desired.components", e.required("desired.components")?)?;
                let resolution = at_least_one("desired.resolution", e.or("desired.resolution", 128)?)?;
                DesiredSpec::Mixture {
                    mixture,
                    resolution,
                    floor,
                }
            }
            "image" => {
                only_for("desired.components", "mixture")?;
                only_for("desired.resolution", "mixture")?;
                let path = resolve_path(base, e.required("desired.image")?);
                if !path.is_file() {
                    return Err(Error::config(
                        "desired.image",
                        format!("no such file: {}", path.display()),
                    ));
                }
                DesiredSpec::Image {
                    path,
                    floor,
                    invert: e.or("desired.invert", false)?,
                }
            }
            other => {
                return Err(Error::config(
                    "desired.kind",
                    format!("expected uniform, mixture or image, found `{other}`"),
                ))
            }
        };

        let kernel_name = e.or("kernel.name", "gaussian".to_string())?;
        let default_cutoff = match kernel_name.as_str() {
            "epanechnikov" => Some(1.0),
            _ => Some(SWARM_GAUSSIAN_CUTOFF),
        };
        let kernel_cutoff = e.optional_real("kernel.cutoff")?.unwrap_or(default_cutoff);
        build_kernel(&kernel_name, kernel_cutoff).map_err(|err| match err {
            Error::InvalidParameter { name, reason } if name.contains("cutoff") => {
                Error::config("kernel.cutoff", reason)
            }
            other => at_key("kernel.name")(other),
        })?;

        let bandwidth = match e.or("bandwidth.mode", "fixed".to_string())?.as_str() {
            "fixed" => {
                if e.raw("bandwidth.c_nu").is_some() {
                    return Err(Error::config(
                        "bandwidth.c_nu",
                        "only valid with bandwidth.mode = rule_of_thumb",
                    ));
                }
                BandwidthSpec::Fixed(positive("bandwidth.h", e.or("bandwidth.h", side / 20.0)?)?)
            }
            "rule_of_thumb" => {
                if e.raw("bandwidth.h").is_some() {
                    return Err(Error::config("bandwidth.h", "only valid with bandwidth.mode = fixed"));
                }
                BandwidthSpec::RuleOfThumb {
                    c_nu: positive("bandwidth.c_nu", e.or("bandwidth.c_nu", DEFAULT_C_NU)?)?,
                }
            }
            other => {
                return Err(Error::config(
                    "bandwidth.mode",
                    format!("expected fixed or rule_of_thumb, found `{other}`"),
                ))
            }
        };

        let diffusion = positive("control.D", e.or("control.D", 5.0)?)?;
        let f_floor = e
            .get::<f64>("control.f_floor")?
            .map(|v| positive("control.f_floor", v))
            .transpose()?;
        let v_max = match e.optional_real("control.v_max")? {
            None | Some(None) => f64::INFINITY,
            Some(Some(v)) => positive("control.v_max", v)?,
        };
        let denominator = match e.or("control.denominator", "estimate".to_string())?.as_str() {
            "estimate" => Denominator::Estimate,
            "desired" => Denominator::Desired,
            other => {
                return Err(Error::config(
                    "control.denominator",
                    format!("expected estimate or desired, found `{other}`"),
                ))
            }
        };
        let kde_boundary = match e.or("kde.boundary", "reflect".to_string())?.as_str() {
            "reflect" => BoundaryCorrection::Reflection,
            "none" => BoundaryCorrection::None,
            other => {
                return Err(Error::config(
                    "kde.boundary",
                    format!("expected reflect or none, found `{other}`"),
                ))
            }
        };

        let n = at_least_one("sim.N", e.or("sim.N", 1000)?)?;
        let dt = e.get::<f64>("sim.dt")?.map(|v| positive("sim.dt", v)).transpose()?;
        let t_final: Option<f64> = e.get("sim.T")?;
        if let Some(t) = t_final {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::config("sim.T", "must be non-negative and finite"));
            }
            if let Some(dt) = dt {
                if t > 0.0 && t < dt {
                    return Err(Error::config(
                        "sim.T",
                        format!("must be zero or at least sim.dt = {dt}"),
                    ));
                }
            }
        }
        let seed = e.or("sim.seed", 0u64)?;
        let init = match e.or("sim.init", "uniform".to_string())?.as_str() {
            "uniform" => {
                for k in ["sim.init_mean", "sim.init_std", "sim.init_file"] {
                    if e.raw(k).is_some() {
                        return Err(Error::config(k, "not used with sim.init = uniform"));
                    }
                }
                InitSpec::Uniform
            }
            "gaussian" => {
                if e.raw("sim.init_file").is_some() {
                    return Err(Error::config("sim.init_file", "only valid with sim.init = file"));
                }
                let mean = e.pair("sim.init_mean")?.unwrap_or(lower + size * 0.5);
                if !domain.contains(mean) {
                    return Err(Error::config("sim.init_mean", "must lie inside the domain"));
                }
                let std = positive("sim.init_std", e.or("sim.init_std", 0.1 * side)?)?;
                InitSpec::Gaussian { mean, std }
            }
            "file" => {
                for k in ["sim.init_mean", "sim.init_std"] {
                    if e.raw(k).is_some() {
                        return Err(Error::config(k, "only valid with sim.init = gaussian"));
                    }
                }
                let path = resolve_path(base, e.required("sim.init_file")?);
                if !path.is_file() {
                    return Err(Error::config(
                        "sim.init_file",
                        format!("no such file: {}", path.display()),
                    ));
                }
                InitSpec::File(path)
            }
            other => {
                return Err(Error::config(
                    "sim.init",
                    format!("expected uniform, gaussian or file, found `{other}`"),
                ))
            }
        };
        match e.or("sim.boundary", "reflect".to_string())?.as_str() {
            "reflect" => {}
            other => {
                return Err(Error::config(
                    "sim.boundary",
                    format!("only `reflect` is supported, found `{other}`"),
                ))
            }
        }

        let metrics_every = at_least_one("metrics.every", e.or("metrics.every", 10)?)?;
        let metrics_grid = at_least_one("metrics.grid", e.or("metrics.grid", DEFAULT_METRICS_RESOLUTION)?)?;
        let snapshot_every = e.or("output.snapshot_every", 0)?;
        let trajectory_every = e.or("output.trajectory_every", 10)?;

        let oracle_n = at_least_one("oracle.n", e.or("oracle.n", 128)?)?;
        let oracle_diffusion = e.get::<f64>("oracle.D")?.map(|v| positive("oracle.D", v)).transpose()?;
        let oracle_t = e.get::<f64>("oracle.t")?.map(|v| positive("oracle.t", v)).transpose()?;
        let oracle_scheme = match e.or("oracle.scheme", "upwind".to_string())?.as_str() {
            "upwind" => FluxScheme::Upwind,
            "central" => FluxScheme::Central,
            other => {
                return Err(Error::config(
                    "oracle.scheme",
                    format!("expected upwind or central, found `{other}`"),
                ))
            }
        };

        Ok(Scenario {
            name,
            domain,
            desired,
            kernel_name,
            kernel_cutoff,
            bandwidth,
            diffusion,
            f_floor,
            v_max,
            denominator,
            kde_boundary,
            n,
            dt,
            t_final,
            seed,
            init,
            metrics_every,
            metrics_grid,
            snapshot_every,
            trajectory_every,
            oracle_n,
            oracle_diffusion,
            oracle_t,
            oracle_scheme,
        })
    }

    pub fn kernel(&self) -> Result<Kernel> {
        build_kernel(&self.kernel_name, self.kernel_cutoff)
    }

    pub fn desired_field(&self) -> Result<ScalarField> {
        match &self.desired {
            DesiredSpec::Uniform => ScalarField::uniform(self.domain, 1, 1),
            DesiredSpec::Mixture {
                mixture,
                resolution,
                floor,
            } => mixture.rasterize(self.domain, *resolution, *floor),
            DesiredSpec::Image { path, floor, invert } => ingest_image(
                path,
                self.domain,
                IngestOptions {
                    floor: *floor,
                    invert: *invert,
                },
            ),
        }
    }

    pub fn control_law(&self) -> Result<ControlLaw> {
        let floor = self
            .f_floor
            .unwrap_or(DEFAULT_FLOOR_FRACTION * self.domain.uniform_level());
        let mut law = ControlLaw::new(self.diffusion, floor)?.with_denominator(self.denominator);
        if self.v_max.is_finite() {
            law = law.with_v_max(self.v_max)?;
        }
        Ok(law)
    }

    pub fn bandwidth_policy(&self, initial: &[Vec2]) -> BandwidthPolicy {
        match self.bandwidth {
            BandwidthSpec::Fixed(h) => BandwidthPolicy::Fixed(h),
            BandwidthSpec::RuleOfThumb { c_nu } => BandwidthPolicy::RuleOfThumb {
                sigma_hat: crate::kernels::sample_std(initial),
                c_nu,
            },
        }
    }

    pub fn initial_distribution(&self) -> Result<InitialDistribution> {
        Ok(match &self.init {
            InitSpec::Uniform => InitialDistribution::Uniform,
            InitSpec::Gaussian { mean, std } => InitialDistribution::Gaussian { mean: *mean, std: *std },
            InitSpec::File(path) => InitialDistribution::Positions(read_positions(path)?),
        })
    }

    /// Simulation settings once `h` is known (it fixes the default `dt`).
    pub fn sim_config(&self, h: f64) -> Result<SimConfig> {
        let dt = self
            .dt
            .unwrap_or_else(|| crate::simulator::default_time_step(h, self.diffusion));
        let t_final = self.t_final.unwrap_or(DEFAULT_STEPS as f64 * dt);
        let mut cfg = SimConfig::new(self.n, dt, t_final, self.seed);
        cfg.boundary = Boundary::Reflect;
        cfg.init = self.initial_distribution()?;
        cfg.metrics_every = self.metrics_every;
        cfg.metrics_resolution = self.metrics_grid;
        cfg.snapshot_every = self.snapshot_every;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Resolved scenario text: every key in canonical order with its
    /// effective value, absolute file paths and their SHA-256 digests.
    pub fn render(&self) -> Result<String> {
        let mut out = String::new();
        let mut put = |key: &str, value: String| {
            let _ = writeln!(out, "{key} = {value}");
        };
        let real = |v: f64| format!("{v:?}");
        put("name", self.name.clone());
        put("domain.x0", real(self.domain.lower().x));
        put("domain.y0", real(self.domain.lower().y));
        put("domain.lx", real(self.domain.size().x));
        put("domain.ly", real(self.domain.size().y));
        let mut digests = Vec::new();
        match &self.desired {
            DesiredSpec::Uniform => put("desired.kind", "uniform".into()),
            DesiredSpec::Mixture {
                mixture,
                resolution,
                floor,
            } => {
                put("desired.kind", "mixture".into());
                put("desired.floor", real(*floor));
                put("desired.resolution", resolution.to_string());
                let comps: Vec<String> = mixture
                    .bumps()
                    .iter()
                    .map(|b| format!("{:?} {:?} {:?} {:?}", b.mean.x, b.mean.y, b.std, b.weight))
                    .collect();
                put("desired.components", comps.join("; "));
            }
            DesiredSpec::Image { path, floor, invert } => {
                let abs = std::fs::canonicalize(path)?;
                digests.push(("desired.image", file_digest(&abs)?));
                put("desired.kind", "image".into());
                put("desired.image", abs.display().to_string());
                put("desired.floor", real(*floor));
                put("desired.invert", invert.to_string());
            }
        }
        put("kernel.name", self.kernel_name.clone());
        put("kernel.cutoff", self.kernel_cutoff.map_or("none".into(), real));
        match self.bandwidth {
            BandwidthSpec::Fixed(h) => {
                put("bandwidth.mode", "fixed".into());
                put("bandwidth.h", real(h));
            }
            BandwidthSpec::RuleOfThumb { c_nu } => {
                put("bandwidth.mode", "rule_of_thumb".into());
                put("bandwidth.c_nu", real(c_nu));
            }
        }
        let law = self.control_law()?;
        put("control.D", real(self.diffusion));
        put("control.f_floor", real(law.f_floor()));
        put(
            "control.v_max",
            if self.v_max.is_finite() {
                real(self.v_max)
            } else {
                "inf".into()
            },
        );
        put("control.denominator", self.denominator.name().into());
        put("kde.boundary", self.kde_boundary.name().into());
        put("sim.N", self.n.to_string());
        if let Some(dt) = self.dt {
            put("sim.dt", real(dt));
        }
        if let Some(t) = self.t_final {
            put("sim.T", real(t));
        }
        put("sim.seed", self.seed.to_string());
        match &self.init {
            InitSpec::Uniform => put("sim.init", "uniform".into()),
            InitSpec::Gaussian { mean, std } => {
                put("sim.init", "gaussian".into());
                put("sim.init_mean", format!("{:?} {:?}", mean.x, mean.y));
                put("sim.init_std", real(*std));
            }
            InitSpec::File(path) => {
                let abs = std::fs::canonicalize(path)?;
                digests.push(("sim.init_file", file_digest(&abs)?));
                put("sim.init", "file".into());
                put("sim.init_file", abs.display().to_string());
            }
        }
        put("sim.boundary", "reflect".into());
        put("metrics.every", self.metrics_every.to_string());
        put("metrics.grid", self.metrics_grid.to_string());
        put("output.snapshot_every", self.snapshot_every.to_string());
        put("output.trajectory_every", self.trajectory_every.to_string());
        put("oracle.n", self.oracle_n.to_string());
        if let Some(d) = self.oracle_diffusion {
            put("oracle.D", real(d));
        }
        if let Some(t) = self.oracle_t {
            put("oracle.t", real(t));
        }
        put(
            "oracle.scheme",
            match self.oracle_scheme {
                FluxScheme::Upwind => "upwind",
                FluxScheme::Central => "central",
            }
            .into(),
        );
        let mut header = format!("# swarm-density {}\n", env!("CARGO_PKG_VERSION"));
        for (key, digest) in digests {
            let _ = writeln!(header, "# sha256 {key} {digest}");
        }
        Ok(header + &out)
    }
}

/// Like [`Kernel::by_name`], but `None` really means untruncated.
fn build_kernel(name: &str, cutoff: Option<f64>) -> Result<Kernel> {
    let kernel = Kernel::by_name(name, 2, cutoff)?;
    if cutoff.is_none() && kernel.name() == "gaussian" {
        return kernel.with_cutoff(None);
    }
    Ok(kernel)
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Agent positions from a text file: one `x,y` (or `x y`) per line; `#`
/// comments and a non-numeric header line are skipped.
pub fn read_positions(path: &Path) -> Result<Vec<Vec2>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let nums: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let parsed: Option<Vec<f64>> = nums.iter().map(|t| t.parse().ok()).collect();
        match parsed.as_deref() {
            Some([x, y]) => out.push(Vec2::new(*x, *y)),
            None if out.is_empty() && lineno == 0 => continue,
            _ => {
                return Err(Error::config(
                    "sim.init_file",
                    format!("{}:{}: expected `x,y`", path.display(), lineno + 1),
                ))
            }
        }
    }
    Ok(out)
}
