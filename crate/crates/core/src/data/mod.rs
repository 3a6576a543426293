//! Point-cloud files and the synthetic benchmark protocol.

mod io;
mod synth;

pub use io::{format_g17, load_cloud, parse_csv, parse_ply, save_cloud, CloudFormat};
pub use synth::{generate_instance, normalize_to_cube, random_rotation, GeneratedInstance, InstanceSpec, Source};
