use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use voxmesh_core::broadcast::{rasterize_depth, read_depth, read_id_map, read_mesh, reinforce_points, write_depth, write_mesh};
use voxmesh_core::eval::{evaluate_mesh, EvalConfig};
use voxmesh_core::frame::{read_points, read_sequence, write_points, write_sequence};
use voxmesh_core::{CameraModel, MeshFormat, Point3, Pose, RunConfig, ScanScript, Scene, Vec3};

use crate::{CameraArgs, EvaluateArgs, ExportArgs, RasterizeArgs, ReinforceArgs, RunArgs, SynthArgs};

fn run_config(a: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &a.config {
        cfg.apply_file(path)?;
    }
    let flags: [(&str, Option<String>); 7] = [
        ("preset", a.preset.clone()),
        ("workers", a.workers.map(|v| v.to_string())),
        ("export_every", a.export_every.map(|v| v.to_string())),
        ("seed", a.seed.map(|v| v.to_string())),
        ("out_mesh", a.out_mesh.as_ref().map(|p| p.display().to_string())),
        ("mesh_format", a.mesh_format.clone()),
        ("report", a.report.as_ref().map(|p| p.display().to_string())),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, &v).with_context(|| format!("--{}", key.replace('_', "-")))?;
        }
    }
    if a.check_integrity {
        cfg.check_integrity = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(a: RunArgs) -> Result<()> {
    let cfg = run_config(&a)?;
    let frames = read_sequence(&a.frames_dir, &a.trajectory)?;
    log::info!("{} frames, preset {:?}, {} workers", frames.len(), cfg.preset, cfg.workers);
    let out = voxmesh_core::run_pipeline(cfg, frames.into_iter().map(Ok))?;
    print!("{}", out.report.to_key_values());
    Ok(())
}

fn load_scene(name: &str) -> Result<Scene> {
    Ok(match name {
        "box-town" => Scene::box_town(),
        "plane-only" => Scene::plane_only(),
        "street" => Scene::street(120.0, 0),
        path => Scene::load(Path::new(path))?,
    })
}

fn load_script(a: &SynthArgs) -> Result<ScanScript> {
    let (w, h) = (a.width, a.height);
    let mut script = match a.script.as_str() {
        "box-town" => ScanScript::box_town(w, h),
        "plane-only" => ScanScript::plane_only(w, h),
        "orbit" => ScanScript::box_town_orbit(a.frames, w, h),
        "street" => ScanScript::street_drive(a.frames, w, h),
        path => ScanScript::load(Path::new(path))?,
    };
    if let Some(s) = a.sigma {
        if s.is_nan() || s < 0.0 {
            bail!("--sigma must be non-negative");
        }
        script.sigma = s;
    }
    if let Some(s) = a.seed {
        script.seed = s;
    }
    Ok(script)
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let scene = load_scene(&a.scene)?;
    let script = load_script(&a)?;
    let frames = script.render(&scene);
    std::fs::create_dir_all(&a.out).with_context(|| a.out.display().to_string())?;
    write_sequence(&a.out.join("frames"), &a.out.join("trajectory.txt"), &frames)?;
    let write = |name: &str, text: String| -> Result<()> {
        let p = a.out.join(name);
        std::fs::write(&p, text).with_context(|| p.display().to_string())
    };
    write("scene.txt", scene.to_text())?;
    write("script.txt", script.to_text())?;
    if let Some(path) = &a.gt_mesh {
        let mesh = scene.to_mesh();
        let ids: Vec<u32> = (0..mesh.vertices.len() as u32).collect();
        write_mesh(&mesh, &ids, path, MeshFormat::from_path(path))?;
    }
    let points: usize = frames.iter().map(|f| f.points.len()).sum();
    println!("frames={}\npoints={points}", frames.len());
    Ok(())
}

fn ground_truth(source: &str, resolution: f64) -> Result<Vec<Point3>> {
    let path = Path::new(source);
    if path.extension().is_some_and(|e| e == "bin") {
        return Ok(read_points(path)?);
    }
    Ok(load_scene(source)?.ground_truth_points(resolution))
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    if [a.resolution, a.threshold].iter().any(|v| v.is_nan() || *v <= 0.0) {
        bail!("--resolution and --threshold must be positive");
    }
    let mesh = read_mesh(&a.mesh)?;
    let gt = ground_truth(&a.gt, a.resolution)?;
    let config = EvalConfig {
        threshold: a.threshold,
        sample_resolution: a.resolution,
        seed: a.seed,
        angle_rule: a.angle_rule.parse()?,
    };
    let report = evaluate_mesh(&mesh, &gt, &config)?;
    print!("{}", report.to_key_values());
    if let Some(path) = &a.report {
        std::fs::write(path, report.to_json()).with_context(|| path.display().to_string())?;
    }
    Ok(())
}

fn camera(a: &CameraArgs) -> Result<CameraModel> {
    let pose = match (&a.pose, &a.lookat) {
        (Some(p), _) => Pose::from_translation_quaternion([p[0], p[1], p[2]], [p[3], p[4], p[5], p[6]])?,
        (None, Some(l)) => Pose::look_at(Point3::new(l[0], l[1], l[2]), Point3::new(l[3], l[4], l[5]), -Vec3::z())?,
        (None, None) => Pose::identity(),
    };
    let mut cam = CameraModel::new(a.width, a.height, a.hfov, a.vfov, pose)?;
    if a.near.is_some() || a.far.is_some() {
        cam = cam.with_range(a.near.unwrap_or(cam.near), a.far.unwrap_or(cam.far))?;
    }
    Ok(cam)
}

pub fn rasterize(a: RasterizeArgs) -> Result<()> {
    let mesh = read_mesh(&a.mesh)?;
    let img = rasterize_depth(&mesh, &camera(&a.camera)?);
    write_depth(&a.out, &img)?;
    println!("hits={}", img.hit_count());
    Ok(())
}

pub fn reinforce(a: ReinforceArgs) -> Result<()> {
    let img = read_depth(&a.depth)?;
    let points = reinforce_points(&img);
    write_points(&a.out, &points)?;
    println!("points={}", points.len());
    Ok(())
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".ids");
    PathBuf::from(s)
}

pub fn export(a: ExportArgs) -> Result<()> {
    let mesh = read_mesh(&a.mesh)?;
    let ids = if sidecar(&a.mesh).exists() {
        let ids = read_id_map(&a.mesh)?;
        if ids.len() != mesh.vertices.len() {
            bail!("{}: {} ids for {} vertices", sidecar(&a.mesh).display(), ids.len(), mesh.vertices.len());
        }
        ids
    } else {
        (0..mesh.vertices.len() as u32).collect()
    };
    let format = match &a.format {
        Some(f) => f.parse()?,
        None => MeshFormat::from_path(&a.out),
    };
    write_mesh(&mesh, &ids, &a.out, format)?;
    println!("vertices={}\nfacets={}", mesh.vertices.len(), mesh.faces.len());
    Ok(())
}
