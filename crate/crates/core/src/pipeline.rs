//! Frame-by-frame replay driver: register, mesh, and periodically publish.
//!
//! Config files are flat `key = value` lines (`#` starts a comment). Keys:
//! `preset`, `xi`, `region_size`, `voxel_size`, `dilation_radius`,
//! `downsample_leaf`, `workers`, `export_every`, `out_mesh`, `mesh_format`,
//! `report`, `seed`, `check_integrity`. A `preset` line resets the map
//! parameters, so it should come before individual overrides.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::broadcast::{write_mesh, Broadcaster, MeshFormat, MeshSnapshot};
use crate::error::{Error, Result};
use crate::frame::ScanFrame;
use crate::map::{MapConfig, MeshMap};
use crate::mesher::{MeshPassReport, Mesher};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Mechanical,
    SolidState,
    Custom,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "mechanical" => Ok(Preset::Mechanical),
            "solid_state" => Ok(Preset::SolidState),
            "custom" => Ok(Preset::Custom),
            _ => Err(Error::InvalidConfig(format!("unknown preset `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    pub map: MapConfig,
    pub workers: usize,
    /// Export the mesh every this many frames; 0 exports only at the end.
    pub export_every: usize,
    pub out_mesh: Option<PathBuf>,
    pub mesh_format: Option<MeshFormat>,
    pub report: Option<PathBuf>,
    pub seed: u64,
    /// Run the full integrity sweep after every frame.
    pub check_integrity: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::with_preset(Preset::Mechanical)
    }
}

impl RunConfig {
    pub fn with_preset(preset: Preset) -> Self {
        Self {
            preset,
            map: match preset {
                Preset::SolidState => MapConfig::solid_state(),
                _ => MapConfig::mechanical(),
            },
            workers: 1,
            export_every: 0,
            out_mesh: None,
            mesh_format: None,
            report: None,
            seed: 0,
            check_integrity: false,
        }
    }

    pub fn set_preset(&mut self, preset: Preset) {
        let keep = std::mem::replace(self, Self::with_preset(preset));
        self.workers = keep.workers;
        self.export_every = keep.export_every;
        self.out_mesh = keep.out_mesh;
        self.mesh_format = keep.mesh_format;
        self.report = keep.report;
        self.seed = keep.seed;
        self.check_integrity = keep.check_integrity;
        if preset == Preset::Custom {
            self.map = keep.map;
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = || {
            value
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("`{key}` expects a number, got `{value}`")))
        };
        let int = || {
            value
                .parse::<u64>()
                .map_err(|_| Error::InvalidConfig(format!("`{key}` expects an integer, got `{value}`")))
        };
        let mut custom = |f: &mut dyn FnMut(&mut MapConfig)| {
            f(&mut self.map);
            self.preset = Preset::Custom;
        };
        match key {
            "preset" => self.set_preset(value.parse()?),
            "xi" => {
                let v = num()?;
                custom(&mut |m| m.xi = v);
            }
            "region_size" => {
                let v = num()?;
                custom(&mut |m| m.region_size = v);
            }
            "voxel_size" => {
                let v = num()?;
                custom(&mut |m| m.voxel_size = v);
            }
            "dilation_radius" => {
                let v = num()?;
                custom(&mut |m| m.dilation_radius = v);
            }
            "downsample_leaf" => {
                let v = num()?;
                custom(&mut |m| m.downsample_leaf = v);
            }
            "workers" => self.workers = int()? as usize,
            "export_every" => self.export_every = int()? as usize,
            "seed" => self.seed = int()?,
            "out_mesh" => self.out_mesh = Some(PathBuf::from(value)),
            "report" => self.report = Some(PathBuf::from(value)),
            "mesh_format" => self.mesh_format = Some(value.parse()?),
            "check_integrity" => {
                self.check_integrity = value
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("`{key}` expects true or false, got `{value}`")))?
            }
            _ => return Err(Error::InvalidConfig(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, n + 1, "expected `key = value`"))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| Error::parse(path, n + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        self.map.validate()?;
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn mesh_format(&self) -> MeshFormat {
        match (self.mesh_format, &self.out_mesh) {
            (Some(f), _) => f,
            (None, Some(p)) => MeshFormat::from_path(p),
            (None, None) => MeshFormat::PlyBinary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameStats {
    pub index: usize,
    pub timestamp: f64,
    pub input_points: usize,
    pub appended_vertices: usize,
    pub activated_voxels: usize,
    pub facets_added: usize,
    pub facets_erased: usize,
    pub registration_ms: f64,
    pub meshing_ms: f64,
    pub vertex_count: usize,
    pub facet_count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub frames: Vec<FrameStats>,
    pub vertex_count: usize,
    pub facet_count: usize,
}

fn mean_std(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = v.clone().sum::<f64>() / n as f64;
    let var = v.map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

impl RunReport {
    /// Mean and standard deviation of per-frame meshing time, ms.
    pub fn meshing_ms(&self) -> (f64, f64) {
        mean_std(self.frames.iter().map(|f| f.meshing_ms))
    }

    pub fn registration_ms(&self) -> (f64, f64) {
        mean_std(self.frames.iter().map(|f| f.registration_ms))
    }

    pub fn to_key_values(&self) -> String {
        let (mm, ms) = self.meshing_ms();
        let (rm, rs) = self.registration_ms();
        format!(
            "frames={}\nvertex_count={}\nfacet_count={}\nmeshing_mean_ms={mm}\nmeshing_std_ms={ms}\nregistration_mean_ms={rm}\nregistration_std_ms={rs}\n",
            self.frames.len(),
            self.vertex_count,
            self.facet_count
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Stateful driver over a growing map.
pub struct Pipeline {
    config: RunConfig,
    map: MeshMap,
    mesher: Mesher,
    broadcaster: Broadcaster,
    report: RunReport,
    last_timestamp: Option<f64>,
    last_pass: MeshPassReport,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            map: MeshMap::new(config.map)?,
            mesher: Mesher::new(config.workers)?,
            broadcaster: Broadcaster::new(),
            report: RunReport::default(),
            last_timestamp: None,
            last_pass: MeshPassReport::default(),
            config,
        })
    }

    /// Keep per-voxel outcomes of each pass, see [`Pipeline::last_pass`].
    pub fn with_trace(mut self, trace: bool) -> Self {
        self.mesher = self.mesher.with_trace(trace);
        self
    }

    pub fn map(&self) -> &MeshMap {
        &self.map
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn report(&self) -> &RunReport {
        &self.report
    }

    pub fn last_pass(&self) -> &MeshPassReport {
        &self.last_pass
    }

    /// Registers and meshes one frame.
    pub fn process(&mut self, frame: &ScanFrame) -> Result<FrameStats> {
        let index = self.report.frames.len();
        let frame_err = |reason: String| Error::Frame { index, reason };
        if !frame.timestamp.is_finite() {
            return Err(frame_err("non-finite timestamp".into()));
        }
        if let Some(prev) = self.last_timestamp {
            if frame.timestamp <= prev {
                return Err(frame_err(format!("timestamp {} does not follow {prev}", frame.timestamp)));
            }
        }
        let t0 = Instant::now();
        let reg = self.map.register_scan(frame).map_err(|e| frame_err(e.to_string()))?;
        let registration_ms = t0.elapsed().as_secs_f64() * 1e3;
        if reg.rejected_count > 0 {
            log::warn!("frame {index}: {} non-finite points rejected", reg.rejected_count);
        }
        let t1 = Instant::now();
        self.last_pass = self
            .mesher
            .update(&mut self.map, &reg.activated_voxel_keys, &frame.sensor_position())?;
        let meshing_ms = t1.elapsed().as_secs_f64() * 1e3;
        self.last_timestamp = Some(frame.timestamp);
        if self.config.check_integrity {
            self.map.check_integrity()?;
        }
        let stats = FrameStats {
            index,
            timestamp: frame.timestamp,
            input_points: frame.points.len(),
            appended_vertices: reg.appended_vertex_ids.len(),
            activated_voxels: reg.activated_voxel_keys.len(),
            facets_added: self.last_pass.added,
            facets_erased: self.last_pass.erased,
            registration_ms,
            meshing_ms,
            vertex_count: self.map.vertex_count(),
            facet_count: self.map.facet_count(),
        };
        self.report.frames.push(stats);
        self.report.vertex_count = self.map.vertex_count();
        self.report.facet_count = self.map.facet_count();
        if self.config.export_every > 0 && (index + 1) % self.config.export_every == 0 {
            self.export()?;
        }
        Ok(stats)
    }

    /// Syncs changed regions into the published snapshot.
    pub fn snapshot(&mut self) -> MeshSnapshot {
        self.broadcaster.sync_snapshot(&mut self.map)
    }

    fn export(&mut self) -> Result<MeshSnapshot> {
        let snap = self.snapshot();
        if let Some(path) = &self.config.out_mesh {
            write_mesh(&snap.mesh, &snap.vertex_ids, path, self.config.mesh_format())?;
            log::info!("exported {} facets to {}", snap.facet_count(), path.display());
        }
        Ok(snap)
    }

    /// Final sync and export; writes the run report if configured.
    pub fn finish(mut self) -> Result<RunOutput> {
        let snapshot = self.export()?;
        if let Some(path) = &self.config.report {
            std::fs::write(path, self.report.to_json()).map_err(|e| Error::io(path, e))?;
        }
        Ok(RunOutput {
            map: self.map,
            snapshot,
            report: self.report,
        })
    }
}

pub struct RunOutput {
    pub map: MeshMap,
    pub snapshot: MeshSnapshot,
    pub report: RunReport,
}

/// Runs every frame through a fresh [`Pipeline`].
pub fn run_pipeline<I>(config: RunConfig, frames: I) -> Result<RunOutput>
where
    I: IntoIterator<Item = Result<ScanFrame>>,
{
    let mut p = Pipeline::new(config)?;
    for frame in frames {
        p.process(&frame?)?;
    }
    p.finish()
}
