//! TOML run configuration: presets, strict schema validation, and dotted-path
//! overrides.
//!
//! A configuration starts from a named preset, is refined by an optional TOML
//! file, and finally by `key=value` overrides (e.g. `wall.k_e=1500`). Unknown
//! keys are rejected: file errors carry the exact line/column, override
//! errors name the offending key.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::Vector6;
use serde::Deserialize;

use crate::error::{Result, VdcError};
use crate::experiments::ZWidthSpec;
use crate::interaction::DissipativeElement;
use crate::model::RobotDescription;
use crate::sim::{HumanArmSpec, Scenario, TrajectorySpec};

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

/// Named scenario presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Slow square against a 1000 N/m wall: segment time 5 s, k_e = 1000,
    /// gated virtual mass m_d = 0.14 kg.
    Fig5,
    /// Fast square: segment time 2 s, k_e = 1000, m_d = 0.14.
    Fig6,
    /// Slow square against a stiffer wall: segment time 5 s, k_e = 1500,
    /// m_d = 0.14.
    Fig7,
    /// Free motion: no wall, no human arm, hold the start pose for 10 s.
    Free,
}

impl Preset {
    fn base_scenario(&self) -> Scenario {
        let tracking = |t_f: f64, k_e: f64| {
            let mut s = Scenario::contact(t_f, k_e, DissipativeElement::VaryingMass { m_d: 0.14 });
            // The tracking presets report the trapezoidal energy balance of
            // the rendered wall (the sweep keeps the raw held-force port
            // work as its activity detector).
            if let Some(w) = s.wall.as_mut() {
                w.trapezoidal = true;
            }
            s
        };
        match self {
            Preset::Fig5 => tracking(5.0, 1000.0),
            Preset::Fig6 => tracking(2.0, 1000.0),
            Preset::Fig7 => tracking(5.0, 1500.0),
            Preset::Free => Scenario::free_motion(10.0),
        }
    }
}

/// Root of the TOML schema. Every field is optional; absent fields keep the
/// preset's value.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    /// Base preset: "fig5" (default), "fig6", "fig7", or "free".
    pub preset: Option<Preset>,
    pub robot: RobotSection,
    pub run: RunSection,
    pub trajectory: TrajectorySection,
    pub wall: WallSection,
    pub human: HumanSection,
    pub impedance: ImpedanceSection,
    pub adaptation: AdaptationSection,
    pub zwidth: ZWidthSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotSection {
    /// Path to a robot description TOML; the embedded 7-DoF arm otherwise.
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Phase-2 duration in seconds.
    pub duration: Option<f64>,
    /// Control/integration tick (s).
    pub dt: Option<f64>,
    /// Plant substeps per control tick.
    pub substeps: Option<usize>,
    /// RNG seed (initial-state draw and force noise).
    pub seed: Option<u64>,
    /// Force-sensor noise standard deviation (N).
    pub force_noise_sigma: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectorySection {
    /// Square segment time (s); ignored by the free preset.
    pub segment_time: Option<f64>,
    /// Square side length (m).
    pub side: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WallSection {
    /// Disables the wall entirely when false.
    pub enabled: Option<bool>,
    /// Wall stiffness k_e (N/m).
    pub k_e: Option<f64>,
    /// Dissipative element: "none", "damping", or "varying_mass".
    pub element: Option<String>,
    /// Damper value b_e (N*s/m) when element = "damping".
    pub b_e: Option<f64>,
    /// Virtual mass m_d (kg) when element = "varying_mass".
    pub m_d: Option<f64>,
    /// Wall plane offset above the start pose (m).
    pub offset_from_start: Option<f64>,
    /// Trapezoidal (true) vs held-force rectangle (false) energy monitor.
    pub trapezoidal: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HumanSection {
    /// Disables the human arm when false.
    pub enabled: Option<bool>,
    /// Per-axis arm mass diagonal (kg / kg*m^2).
    pub mass: Option<[f64; 6]>,
    /// Per-axis arm damping diagonal.
    pub damping: Option<[f64; 6]>,
    /// Per-axis arm stiffness diagonal.
    pub stiffness: Option<[f64; 6]>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImpedanceSection {
    /// Desired stiffness diagonal K_d.
    pub stiffness: Option<[f64; 6]>,
    /// Desired damping diagonal B_d.
    pub damping: Option<[f64; 6]>,
    /// Desired contact force (N / N*m).
    pub desired_force: Option<[f64; 6]>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptationSection {
    /// Adaptation gain gamma.
    pub gain: Option<f64>,
    /// Fractional initial parameter error of the estimates.
    pub parameter_error: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZWidthSection {
    /// Damper grid (N*s/m), strictly ascending.
    pub damping_grid: Option<Vec<f64>>,
    /// Virtual-mass grid (kg), strictly ascending.
    pub mass_grid: Option<Vec<f64>>,
    /// Upper end of the stiffness search (N/m).
    pub k_max: Option<f64>,
    /// Stiffness search resolution (N/m).
    pub resolution: Option<f64>,
    /// Segment time of the sweep's contact template (s).
    pub segment_time: Option<f64>,
    /// Force-sensor noise of the sweep template (N).
    pub force_noise_sigma: Option<f64>,
    /// Sweep seed.
    pub seed: Option<u64>,
    /// Worker pool width; 0 uses the number of logical cores.
    pub workers: Option<usize>,
}

// ---------------------------------------------------------------------------
// Parsing and overrides
// ---------------------------------------------------------------------------

impl ConfigFile {
    /// Parses a TOML document; unknown keys or bad types are reported with
    /// their exact line and column.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| VdcError::Config(e.to_string()))
    }

    /// Reads and parses a TOML file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| VdcError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| VdcError::Config(format!("{}: {e}", path.display())))
    }

    /// Builds a configuration from an optional file plus `key=value`
    /// overrides. The file is validated first (so its errors carry line
    /// numbers); overrides are then merged and the result re-validated (so
    /// their errors name the key).
    pub fn from_sources(text: Option<&str>, overrides: &[String]) -> Result<Self> {
        if let Some(t) = text {
            Self::parse(t)?;
        }
        let mut table: toml::Table = match text {
            Some(t) => toml::from_str(t).map_err(|e| VdcError::Config(e.to_string()))?,
            None => toml::Table::new(),
        };
        for ov in overrides {
            apply_override(&mut table, ov)?;
        }
        Self::deserialize(table.clone()).map_err(|e| {
            VdcError::Config(format!(
                "after applying overrides {:?}: {e}",
                overrides
            ))
        })
    }
}

/// Applies one `dotted.path=value` override to a TOML table. The value is
/// parsed as TOML (numbers, booleans, arrays); anything unparsable is taken
/// as a bare string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| VdcError::Config(format!("override '{spec}' is not key=value")))?;
    let path = path.trim();
    let raw = raw.trim();
    if path.is_empty() {
        return Err(VdcError::Config(format!("override '{spec}' has an empty key")));
    }
    let value: toml::Value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed assignment has v"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut current = table;
    let segments: Vec<&str> = path.split('.').collect();
    for seg in &segments[..segments.len() - 1] {
        current = current
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| {
                VdcError::Config(format!("override '{path}': '{seg}' is not a table"))
            })?;
    }
    current.insert(segments[segments.len() - 1].to_string(), value);
    Ok(())
}

// ---------------------------------------------------------------------------
// Building runtime objects
// ---------------------------------------------------------------------------

fn vec6(a: [f64; 6]) -> Vector6<f64> {
    Vector6::from_row_slice(&a)
}

impl ConfigFile {
    pub fn preset(&self) -> Preset {
        self.preset.unwrap_or(Preset::Fig5)
    }

    /// Resolves the robot model: the file named in `[robot] path`, or the
    /// embedded default arm.
    pub fn build_model(&self) -> Result<Arc<crate::model::RobotModel>> {
        match &self.robot.path {
            None => Ok(Arc::new(crate::model::RobotModel::default_seven_dof())),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    VdcError::Config(format!("cannot read robot file {}: {e}", path.display()))
                })?;
                let desc = RobotDescription::from_toml_str(&text)
                    .map_err(|e| VdcError::Config(format!("{}: {e}", path.display())))?;
                Ok(Arc::new(desc.build()?))
            }
        }
    }

    /// Builds the simulate scenario: preset base refined by every present
    /// field.
    pub fn build_scenario(&self) -> Result<Scenario> {
        let mut s = self.preset().base_scenario();
        s.model = self.build_model()?;

        if let Some(d) = self.run.duration {
            s.duration = d;
        }
        if let Some(dt) = self.run.dt {
            s.dt = dt;
        }
        if let Some(n) = self.run.substeps {
            s.substeps = n;
        }
        if let Some(seed) = self.run.seed {
            s.seed = seed;
        }
        if let Some(sigma) = self.run.force_noise_sigma {
            s.force_noise_sigma = sigma;
        }

        if self.trajectory.segment_time.is_some() || self.trajectory.side.is_some() {
            let (mut t_f, mut side) = match s.trajectory {
                TrajectorySpec::Square { segment_time, side } => (segment_time, side),
                TrajectorySpec::Hold => (5.0, 0.10),
            };
            if let Some(t) = self.trajectory.segment_time {
                t_f = t;
            }
            if let Some(v) = self.trajectory.side {
                side = v;
            }
            s.trajectory = TrajectorySpec::Square {
                segment_time: t_f,
                side,
            };
            if self.run.duration.is_none() {
                s.duration = 4.0 * t_f + 1.0;
            }
        }

        self.apply_wall(&mut s)?;
        self.apply_human(&mut s)?;

        if let Some(k) = self.impedance.stiffness {
            s.impedance.stiffness = vec6(k);
        }
        if let Some(b) = self.impedance.damping {
            s.impedance.damping = vec6(b);
        }
        if let Some(f) = self.impedance.desired_force {
            s.impedance.desired_force = vec6(f);
        }
        if let Some(g) = self.adaptation.gain {
            s.adaptation_gain = g;
        }
        if let Some(p) = self.adaptation.parameter_error {
            s.parameter_error = p;
        }
        s.validate()?;
        Ok(s)
    }

    fn apply_wall(&self, s: &mut Scenario) -> Result<()> {
        let w = &self.wall;
        if w.enabled == Some(false) {
            if w.k_e.is_some() || w.element.is_some() {
                return Err(VdcError::Config(
                    "wall.enabled = false conflicts with other wall settings".into(),
                ));
            }
            s.wall = None;
            return Ok(());
        }
        let touched = w.enabled == Some(true)
            || w.k_e.is_some()
            || w.element.is_some()
            || w.b_e.is_some()
            || w.m_d.is_some()
            || w.offset_from_start.is_some()
            || w.trapezoidal.is_some();
        if !touched {
            return Ok(());
        }
        if s.wall.is_none() {
            // Enabling a wall on the free preset: use the contact template's
            // wall as the base.
            s.wall = Scenario::contact(5.0, 1000.0, DissipativeElement::VaryingMass { m_d: 0.14 }).wall;
            s.human.get_or_insert_with(HumanArmSpec::default);
            s.mode = crate::interaction::InteractionMode::Contact;
        }
        let wall = s.wall.as_mut().expect("wall just ensured");
        if let Some(k) = w.k_e {
            wall.stiffness = k;
        }
        if let Some(off) = w.offset_from_start {
            wall.offset_from_start = off;
        }
        if let Some(t) = w.trapezoidal {
            wall.trapezoidal = t;
        }
        match w.element.as_deref() {
            None => {
                // Element kind unchanged; b_e / m_d retune it if compatible.
                match (&mut wall.element, w.b_e, w.m_d) {
                    (_, Some(_), Some(_)) => {
                        return Err(VdcError::Config(
                            "set wall.element to choose between b_e and m_d".into(),
                        ))
                    }
                    (DissipativeElement::Damping { b_e }, Some(v), None) => *b_e = v,
                    (DissipativeElement::VaryingMass { m_d }, None, Some(v)) => *m_d = v,
                    (_, None, None) => {}
                    _ => {
                        return Err(VdcError::Config(
                            "wall.b_e / wall.m_d do not match the current wall.element".into(),
                        ))
                    }
                }
            }
            Some("none") => wall.element = DissipativeElement::None,
            Some("damping") => {
                wall.element = DissipativeElement::Damping {
                    b_e: w.b_e.unwrap_or(5.0),
                }
            }
            Some("varying_mass") => {
                wall.element = DissipativeElement::VaryingMass {
                    m_d: w.m_d.unwrap_or(0.14),
                }
            }
            Some(other) => {
                return Err(VdcError::Config(format!(
                    "wall.element '{other}' is not one of none, damping, varying_mass"
                )))
            }
        }
        Ok(())
    }

    fn apply_human(&self, s: &mut Scenario) -> Result<()> {
        let h = &self.human;
        if h.enabled == Some(false) {
            s.human = None;
            return Ok(());
        }
        if h.enabled == Some(true) || h.mass.is_some() || h.damping.is_some() || h.stiffness.is_some()
        {
            let arm = s.human.get_or_insert_with(HumanArmSpec::default);
            if let Some(m) = h.mass {
                arm.mass = vec6(m);
            }
            if let Some(b) = h.damping {
                arm.damping = vec6(b);
            }
            if let Some(k) = h.stiffness {
                arm.stiffness = vec6(k);
            }
        }
        Ok(())
    }

    /// Builds the Z-width sweep spec (defaults refined by `[zwidth]`). The
    /// robot file, if any, is validated here too so a bad path fails before
    /// any work starts.
    pub fn build_zwidth(&self) -> Result<ZWidthSpec> {
        self.build_model()?;
        let mut spec = ZWidthSpec::default();
        let z = &self.zwidth;
        if let Some(g) = &z.damping_grid {
            spec.damping_grid = g.clone();
        }
        if let Some(g) = &z.mass_grid {
            spec.mass_grid = g.clone();
        }
        if let Some(k) = z.k_max {
            spec.k_max = k;
        }
        if let Some(r) = z.resolution {
            spec.resolution = r;
        }
        if let Some(t) = z.segment_time {
            spec.segment_time = t;
        }
        if let Some(sigma) = z.force_noise_sigma {
            spec.force_noise_sigma = sigma;
        }
        if let Some(seed) = z.seed {
            spec.seed = seed;
        }
        if let Some(w) = z.workers {
            spec.workers = w;
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Human-readable description of the configuration schema, presets, and
/// output formats.
pub fn describe() -> String {
    let base = Preset::Fig5.base_scenario();
    format!(
        r#"Configuration schema (TOML). Every key is optional; absent keys keep
the preset's value. Unknown keys are rejected with their location.

preset = "fig5"            fig5 | fig6 | fig7 | free (default fig5)
    fig5: square path, segment time 5 s, wall k_e = 1000 N/m, m_d = 0.14 kg
    fig6: segment time 2 s, k_e = 1000 N/m, m_d = 0.14 kg
    fig7: segment time 5 s, k_e = 1500 N/m, m_d = 0.14 kg
    free: free motion, hold the start pose for 10 s (no wall, no human arm)

[robot]
path                       robot description TOML (default: embedded 7-DoF arm)

[run]
duration                   tracking-phase length, s (default {duration})
dt                         control tick, s (default {dt})
substeps                   plant substeps per tick (default {substeps})
seed                       RNG seed (default {seed})
force_noise_sigma          force-sensor noise std dev, N (default {sigma})

[trajectory]
segment_time               square segment time, s
side                       square side, m (default 0.10)

[wall]
enabled                    false removes the wall
k_e                        wall stiffness, N/m
element                    none | damping | varying_mass
b_e                        damper value, N*s/m (element = "damping")
m_d                        virtual mass, kg (element = "varying_mass")
offset_from_start          wall plane above the start pose, m (default 0.09)
trapezoidal                trapezoidal energy monitor (presets: true)

[human]
enabled                    false removes the human arm
mass, damping, stiffness   per-axis diagonals, arrays of 6
                           (defaults 1.5/15/150 translational, 0.05/0.5/5 rotational)

[impedance]
stiffness, damping         desired impedance diagonals K_d, B_d
desired_force              desired contact wrench, array of 6

[adaptation]
gain                       adaptation gain (default {gain})
parameter_error            initial fractional parameter error (default {perr})

[zwidth]
damping_grid               damper grid, N*s/m (default 0..60 step 5)
mass_grid                  virtual-mass grid, kg (default 0..1.68 step 0.14)
k_max                      stiffness search cap, N/m (default 20000)
resolution                 stiffness search resolution, N/m (default 10)
segment_time               sweep template segment time, s (default 2)
force_noise_sigma          sweep template sensor noise, N (default 0.1)
seed                       sweep seed (default 1)
workers                    worker pool width, 0 = all cores (default 0)

Overrides: repeat --override key=value with the dotted TOML path,
e.g. --override wall.k_e=1500 --override run.seed=7.

Outputs:
  run CSV     first row "schema,vdc-runlog-1", then the column header
  curve CSV   first row "schema,vdc-zwidth-1", then element_value,k_e_max,min_Ec
  sweep JSON  "vdc-zwidth-summary-1": spec, human-arm parameters, both curves
"#,
        duration = base.duration,
        dt = base.dt,
        substeps = base.substeps,
        seed = base.seed,
        sigma = base.force_noise_sigma,
        gain = base.adaptation_gain,
        perr = base.parameter_error,
    )
}
