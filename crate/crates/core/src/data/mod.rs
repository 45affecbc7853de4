//! Synthetic blurred/sharp pairs and netpbm image files.

mod dataset;
mod kernel;
mod pnm;
mod procedural;

pub use dataset::{
    dataset_from_images, generate_dataset, load_sharp_directory, split_indices, Dataset, Manifest, ManifestEntry,
    PairSample, Split, SynthConfig, MANIFEST_FILE, MANIFEST_FORMAT, MANIFEST_VERSION,
};
pub use kernel::{blur, make_motion_kernel, KernelDescriptor, MotionKernel};
pub use pnm::{decode_pnm, encode_pnm, quantize, quantized, read_image, write_image};
pub use procedural::procedural_image;
