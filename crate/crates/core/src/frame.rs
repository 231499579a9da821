//! Input frames and their on-disk formats.
//!
//! A frame file is little-endian binary: a `u64` point count followed by that
//! many `f64` `x y z` triples in the sensor frame. Points are expected to be
//! motion-compensated already.
//!
//! A trajectory file holds one pose per line,
//! `timestamp tx ty tz qx qy qz qw`; blank lines and lines starting with `#`
//! are ignored.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geom::{Point3, Pose};

/// One timestamped point cloud with its sensor-to-world pose.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanFrame {
    pub timestamp: f64,
    pub points: Vec<Point3>,
    pub pose: Pose,
}

impl ScanFrame {
    pub fn new(timestamp: f64, points: Vec<Point3>, pose: Pose) -> Self {
        Self {
            timestamp,
            points,
            pose,
        }
    }

    pub fn sensor_position(&self) -> Point3 {
        self.pose.position()
    }
}

/// Timestamped pose as read from a trajectory file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StampedPose {
    pub timestamp: f64,
    pub pose: Pose,
}

pub fn write_points(path: &Path, points: &[Point3]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut buf = Vec::with_capacity(8 + points.len() * 24);
    buf.extend_from_slice(&(points.len() as u64).to_le_bytes());
    for p in points {
        for v in [p.x, p.y, p.z] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_points(path: &Path) -> Result<Vec<Point3>> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 8 {
        return Err(Error::parse(path, 0, "truncated header"));
    }
    let count = u64::from_le_bytes(bytes[..8].try_into().unwrap());
    let body = &bytes[8..];
    if count.checked_mul(24) != Some(body.len() as u64) {
        return Err(Error::parse(
            path,
            0,
            format!("header declares {count} points but payload holds {} bytes", body.len()),
        ));
    }
    Ok(body
        .chunks_exact(24)
        .map(|c| {
            let f = |i: usize| f64::from_le_bytes(c[i * 8..i * 8 + 8].try_into().unwrap());
            Point3::new(f(0), f(1), f(2))
        })
        .collect())
}

pub fn write_trajectory(path: &Path, poses: &[StampedPose]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res: std::io::Result<()> = (|| {
        writeln!(w, "# timestamp tx ty tz qx qy qz qw")?;
        for sp in poses {
            let t = sp.pose.translation();
            let q = sp.pose.quaternion();
            writeln!(
                w,
                "{:?} {:?} {:?} {:?} {:?} {:?} {:?} {:?}",
                sp.timestamp, t.x, t.y, t.z, q.i, q.j, q.k, q.w
            )?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

/// Parses a trajectory and checks that timestamps strictly increase.
pub fn read_trajectory(path: &Path) -> Result<Vec<StampedPose>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out: Vec<StampedPose> = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(path, n + 1, e.to_string()))?;
        if vals.len() != 8 {
            return Err(Error::parse(path, n + 1, format!("expected 8 fields, found {}", vals.len())));
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(path, n + 1, "non-finite value"));
        }
        let pose = Pose::from_translation_quaternion([vals[1], vals[2], vals[3]], [vals[4], vals[5], vals[6], vals[7]])
            .map_err(|e| Error::parse(path, n + 1, e.to_string()))?;
        if let Some(prev) = out.last() {
            if vals[0] <= prev.timestamp {
                return Err(Error::parse(path, n + 1, "timestamps must be strictly increasing"));
            }
        }
        out.push(StampedPose {
            timestamp: vals[0],
            pose,
        });
    }
    Ok(out)
}

/// Frame files in a directory, sorted by file name.
pub fn list_frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "bin"))
        .collect();
    files.sort();
    Ok(files)
}

/// Frame file name used by [`write_sequence`]: `frame_000042.bin`.
pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.bin")
}

/// Writes frames as `frames_dir/frame_NNNNNN.bin` plus a trajectory file.
pub fn write_sequence(frames_dir: &Path, trajectory: &Path, frames: &[ScanFrame]) -> Result<()> {
    std::fs::create_dir_all(frames_dir).map_err(|e| Error::io(frames_dir, e))?;
    for (i, f) in frames.iter().enumerate() {
        write_points(&frames_dir.join(frame_file_name(i)), &f.points)?;
    }
    let poses: Vec<StampedPose> = frames
        .iter()
        .map(|f| StampedPose {
            timestamp: f.timestamp,
            pose: f.pose,
        })
        .collect();
    write_trajectory(trajectory, &poses)
}

/// Pairs sorted frame files with trajectory lines one-to-one.
pub fn read_sequence(frames_dir: &Path, trajectory: &Path) -> Result<Vec<ScanFrame>> {
    let files = list_frame_files(frames_dir)?;
    let poses = read_trajectory(trajectory)?;
    if files.len() != poses.len() {
        return Err(Error::InvalidConfig(format!(
            "{} frame files but {} trajectory entries",
            files.len(),
            poses.len()
        )));
    }
    files
        .iter()
        .zip(poses)
        .map(|(f, sp)| Ok(ScanFrame::new(sp.timestamp, read_points(f)?, sp.pose)))
        .collect()
}
