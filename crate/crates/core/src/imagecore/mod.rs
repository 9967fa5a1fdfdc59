//! Frames, frame-directory videos, preprocessing and paired dataset synthesis.

mod dataset;
mod frame;
mod io;
mod preprocess;

pub use dataset::{
    load_manifest, make_synthetic_dataset, save_dataset, ClipEntry, DatasetManifest, DatasetPair,
    Degrader, IdentityDegrader, Split,
};
pub use frame::{Frame, ValueRange, VideoSequence};
pub use io::{frame_file_name, frame_paths, load_frame, load_video, save_frame, save_video, FrameFormat, FrameLayout};
pub use preprocess::{preprocess, resize_bilinear, Rotation, TRAINING_SIZE};
