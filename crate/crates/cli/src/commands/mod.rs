//! Subcommand implementations.

pub mod coherence;
pub mod dereverb;
pub mod evaluate;
pub mod simulate;
pub mod sweep;

use std::path::Path;

use cdr_core::simulator::ReverberantMixture;

use crate::common::relative_to;
use crate::error::{input_format, Result};
use crate::scenario::MixtureSidecar;
use crate::wav;

/// Two-channel signals described by a mixture sidecar: the mixture and its
/// desired and undesired components.
pub fn load_mixture(sidecar_path: &Path) -> Result<(MixtureSidecar, ReverberantMixture)> {
    let sidecar = MixtureSidecar::load(sidecar_path)?;
    let rate = sidecar.sample_rate.round() as u32;
    let load = |name: &Path| -> Result<[Vec<f64>; 2]> {
        let path = relative_to(sidecar_path, name);
        let audio = wav::read(&path)?;
        audio.expect_layout(&path, 2, rate)?;
        let [a, b]: [Vec<f64>; 2] = audio.channels.try_into().expect("two channels checked above");
        Ok([a, b])
    };
    let x = load(&sidecar.mixture)?;
    let early = load(&sidecar.desired)?;
    let late = load(&sidecar.undesired)?;
    let len = x[0].len();
    if early[0].len() != len || late[0].len() != len {
        return input_format(format!(
            "{}: mixture and component files differ in length",
            sidecar_path.display()
        ));
    }
    Ok((sidecar, ReverberantMixture { x, early, late }))
}
