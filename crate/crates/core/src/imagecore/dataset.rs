use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::frame::{Frame, VideoSequence};
use super::io::{frame_file_name, load_frame, save_frame, FrameFormat};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Frame-aligned low-quality / high-quality clip pair.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetPair {
    pub lq: VideoSequence,
    pub hq: VideoSequence,
    pub split: Split,
}

impl DatasetPair {
    pub fn new(lq: VideoSequence, hq: VideoSequence, split: Split) -> Result<Self> {
        if lq.len() != hq.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} low-quality frames vs {} high-quality frames",
                lq.len(),
                hq.len()
            )));
        }
        if let (Some(a), Some(b)) = (lq.dims(), hq.dims()) {
            if a != b {
                return Err(Error::dims(b, a));
            }
        }
        Ok(DatasetPair { lq, hq, split })
    }

    pub fn len(&self) -> usize {
        self.hq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hq.is_empty()
    }
}

/// Turns a clean frame into its low-quality counterpart. `seed` drives any
/// noise; the same `(frame, seed)` must give the same output.
pub trait Degrader {
    fn degrade(&self, frame: &Frame, seed: u64) -> Result<Frame>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityDegrader;

impl Degrader for IdentityDegrader {
    fn degrade(&self, frame: &Frame, _seed: u64) -> Result<Frame> {
        Ok(frame.clone())
    }
}

/// Pairs every clean frame with `degrader(frame)` and splits the clip
/// contiguously: the first `round(len * split_ratio)` frames train, the rest
/// test. Empty splits are omitted from the returned lists.
pub fn make_synthetic_dataset(
    clean: &VideoSequence,
    degrader: &dyn Degrader,
    seed: u64,
    split_ratio: f64,
) -> Result<(Vec<DatasetPair>, Vec<DatasetPair>)> {
    if clean.is_empty() {
        return Err(Error::InvalidArgument("clean clip has no frames".into()));
    }
    if !(split_ratio > 0.0 && split_ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split ratio must lie in (0, 1), got {split_ratio}"
        )));
    }
    let mut lq = Vec::with_capacity(clean.len());
    for (i, hq) in clean.frames().iter().enumerate() {
        let out = degrader.degrade(hq, rng::mix(seed, i as u64))?;
        if out.dims() != hq.dims() {
            return Err(Error::dims(hq.dims(), out.dims()));
        }
        lq.push(out);
    }
    let n = clean.len();
    let n_train = ((n as f64 * split_ratio).round() as usize).min(n);
    let hq = clean.frames();
    let fps = clean.fps();
    let mut train = Vec::new();
    let mut test = Vec::new();
    if n_train > 0 {
        train.push(DatasetPair::new(
            VideoSequence::new(lq[..n_train].to_vec(), fps)?,
            VideoSequence::new(hq[..n_train].to_vec(), fps)?,
            Split::Train,
        )?);
    }
    if n_train < n {
        test.push(DatasetPair::new(
            VideoSequence::new(lq[n_train..].to_vec(), fps)?,
            VideoSequence::new(hq[n_train..].to_vec(), fps)?,
            Split::Test,
        )?);
    }
    Ok((train, test))
}

/// On-disk description of a generated dataset. Frame paths are relative to
/// the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub split_ratio: f64,
    pub fps: f64,
    pub clips: Vec<ClipEntry>,
    /// Free-form description of the degradation (PSF parameters, noise).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degradation: Option<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipEntry {
    pub name: String,
    pub split: Split,
    pub lq_frames: Vec<PathBuf>,
    pub hq_frames: Vec<PathBuf>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes `root/<split>/<clip>/{lq,hq}/frame_*.png` plus `root/manifest.json`.
pub fn save_dataset(
    root: &Path,
    clips: &[(String, DatasetPair)],
    seed: u64,
    split_ratio: f64,
    degradation: Option<serde_json::Value>,
) -> Result<DatasetManifest> {
    let mut entries = Vec::with_capacity(clips.len());
    let mut fps = crate::imagecore::VideoSequence::DEFAULT_FPS;
    for (name, pair) in clips {
        fps = pair.hq.fps();
        let base = PathBuf::from(pair.split.as_str()).join(name);
        let write = |seq: &VideoSequence, role: &str| -> Result<Vec<PathBuf>> {
            seq.frames()
                .iter()
                .enumerate()
                .map(|(i, f)| {
                    let rel = base.join(role).join(frame_file_name(i, FrameFormat::Png));
                    save_frame(f, &root.join(&rel)).map(|_| rel)
                })
                .collect()
        };
        let lq_frames = write(&pair.lq, "lq")?;
        let hq_frames = write(&pair.hq, "hq")?;
        entries.push(ClipEntry {
            name: name.clone(),
            split: pair.split,
            lq_frames,
            hq_frames,
        });
    }
    let manifest = DatasetManifest {
        seed,
        split_ratio,
        fps,
        clips: entries,
        degradation,
    };
    let path = root.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Reads a manifest (or a directory containing `manifest.json`) and loads
/// every clip it lists.
pub fn load_manifest(path: &Path) -> Result<(DatasetManifest, Vec<(String, DatasetPair)>)> {
    let file = if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    };
    let root = file.parent().unwrap_or(Path::new("."));
    let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)?;
    let mut clips = Vec::with_capacity(manifest.clips.len());
    for clip in &manifest.clips {
        let load = |paths: &[PathBuf]| -> Result<VideoSequence> {
            let frames = paths
                .iter()
                .map(|p| load_frame(&root.join(p)))
                .collect::<Result<Vec<_>>>()?;
            VideoSequence::new(frames, manifest.fps)
        };
        let pair = DatasetPair::new(load(&clip.lq_frames)?, load(&clip.hq_frames)?, clip.split)?;
        clips.push((clip.name.clone(), pair));
    }
    Ok((manifest, clips))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::ValueRange;

    struct Offset;

    impl Degrader for Offset {
        fn degrade(&self, frame: &Frame, seed: u64) -> Result<Frame> {
            let bump = (seed % 7) as f64;
            Frame::new(
                frame.height(),
                frame.width(),
                frame.pixels().iter().map(|v| (v + bump).min(255.0)).collect(),
                frame.range(),
            )
        }
    }

    struct Shrink;

    impl Degrader for Shrink {
        fn degrade(&self, frame: &Frame, _seed: u64) -> Result<Frame> {
            Frame::filled(frame.height() / 2, frame.width(), 0.0, frame.range())
        }
    }

    fn clip(n: usize) -> VideoSequence {
        let frames = (0..n)
            .map(|i| Frame::filled(8, 8, (i * 10) as f64, ValueRange::Raw8Bit).unwrap())
            .collect();
        VideoSequence::new(frames, 24.0).unwrap()
    }

    #[test]
    fn nine_to_one_split() {
        let (train, test) = make_synthetic_dataset(&clip(10), &IdentityDegrader, 0, 0.9).unwrap();
        assert_eq!(train.iter().map(DatasetPair::len).sum::<usize>(), 9);
        assert_eq!(test.iter().map(DatasetPair::len).sum::<usize>(), 1);
        assert_eq!(test[0].hq.frames()[0], clip(10).frames()[9]);
    }

    #[test]
    fn identity_degrader_pairs_equal_frames() {
        let (train, test) = make_synthetic_dataset(&clip(10), &IdentityDegrader, 3, 0.9).unwrap();
        for p in train.iter().chain(&test) {
            assert_eq!(p.lq, p.hq);
        }
    }

    #[test]
    fn same_seed_same_dataset() {
        let a = make_synthetic_dataset(&clip(10), &Offset, 42, 0.9).unwrap();
        let b = make_synthetic_dataset(&clip(10), &Offset, 42, 0.9).unwrap();
        assert_eq!(a, b);
        let c = make_synthetic_dataset(&clip(10), &Offset, 43, 0.9).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn degrader_dimension_mismatch_is_reported() {
        assert!(matches!(
            make_synthetic_dataset(&clip(3), &Shrink, 0, 0.9),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn invalid_ratio_and_empty_clip() {
        assert!(make_synthetic_dataset(&clip(3), &IdentityDegrader, 0, 1.0).is_err());
        assert!(make_synthetic_dataset(&clip(0), &IdentityDegrader, 0, 0.9).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (train, test) = make_synthetic_dataset(&clip(10), &Offset, 5, 0.9).unwrap();
        let clips: Vec<_> = train
            .into_iter()
            .chain(test)
            .map(|p| ("clip_000".to_string(), p))
            .collect();
        let written = save_dataset(dir.path(), &clips, 5, 0.9, None).unwrap();
        let (manifest, loaded) = load_manifest(dir.path()).unwrap();
        assert_eq!(manifest, written);
        assert_eq!(loaded.len(), 2);
        for ((_, a), (_, b)) in clips.iter().zip(&loaded) {
            assert_eq!(a, b);
        }
    }
}
