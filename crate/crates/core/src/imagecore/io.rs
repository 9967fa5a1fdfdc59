use std::fs;
use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageReader};

use super::frame::{Frame, VideoSequence};
use crate::error::{Error, Result};

/// Which files in a frame directory count as frames.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FrameLayout {
    /// Both `.png` and `.pgm`.
    #[default]
    Auto,
    Png,
    Pgm,
}

impl FrameLayout {
    fn accepts(self, path: &Path) -> bool {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        match (self, ext.as_deref()) {
            (FrameLayout::Auto, Some("png" | "pgm")) => true,
            (FrameLayout::Png, Some("png")) => true,
            (FrameLayout::Pgm, Some("pgm")) => true,
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FrameFormat {
    #[default]
    Png,
    Pgm,
}

impl FrameFormat {
    pub fn extension(self) -> &'static str {
        match self {
            FrameFormat::Png => "png",
            FrameFormat::Pgm => "pgm",
        }
    }

    fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("png") => Ok(FrameFormat::Png),
            Some("pgm") => Ok(FrameFormat::Pgm),
            _ => Err(Error::InvalidArgument(format!(
                "{}: frame files must be .png or .pgm",
                path.display()
            ))),
        }
    }
}

/// `frame_000001.png` style name for the zero-based frame `index`.
pub fn frame_file_name(index: usize, format: FrameFormat) -> String {
    format!("frame_{:06}.{}", index + 1, format.extension())
}

/// Reads one 8-bit grayscale PNG or binary/ASCII PGM.
pub fn load_frame(path: &Path) -> Result<Frame> {
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let img = reader.decode().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    match img {
        DynamicImage::ImageLuma8(buf) => {
            let (w, h) = buf.dimensions();
            Frame::from_u8(h as usize, w as usize, buf.as_raw())
        }
        other => Err(Error::NotGrayscale {
            path: path.to_path_buf(),
            found: format!("{:?}", other.color()),
        }),
    }
}

pub fn save_frame(frame: &Frame, path: &Path) -> Result<()> {
    let data = frame.to_u8();
    let (h, w) = (frame.height() as u32, frame.width() as u32);
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let out = std::io::BufWriter::new(file);
    let encoded = match FrameFormat::from_path(path)? {
        FrameFormat::Png => image::codecs::png::PngEncoder::new(out).write_image(
            &data,
            w,
            h,
            ExtendedColorType::L8,
        ),
        FrameFormat::Pgm => PnmEncoder::new(out)
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
            .write_image(&data, w, h, ExtendedColorType::L8),
    };
    encoded.map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Frame files of `dir` accepted by `layout`, sorted by file name.
pub fn frame_paths(dir: &Path, layout: FrameLayout) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_file() && layout.accepts(&path) {
            paths.push(path);
        }
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(paths)
}

/// Loads a directory of frames in lexicographic file-name order.
pub fn load_video(dir: &Path, layout: FrameLayout) -> Result<VideoSequence> {
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "frame directory not found"),
        ));
    }
    let paths = frame_paths(dir, layout)?;
    if paths.is_empty() {
        return Err(Error::NoFrames(dir.to_path_buf()));
    }
    let frames = paths
        .iter()
        .map(|p| load_frame(p))
        .collect::<Result<Vec<_>>>()?;
    VideoSequence::new(frames, VideoSequence::DEFAULT_FPS)
}

/// Writes `frame_000001.<ext>`, ... into `dir`, returning the written paths.
pub fn save_video(video: &VideoSequence, dir: &Path, format: FrameFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    video
        .frames()
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let path = dir.join(frame_file_name(i, format));
            save_frame(f, &path).map(|_| path)
        })
        .collect()
}
