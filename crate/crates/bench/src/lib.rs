//! Fixtures shared by the benchmarks.

use entk_core::data::{molecule_sphere_input, random_images, synth_molecules};
use entk_core::so3::{S2Grid, SphereTransform};
use entk_core::{Image, Input, SphereQuadrature};

/// Two random single-channel `h×h` images.
pub fn image_pair(h: usize) -> (Input, Input) {
    let mut v = random_images(2, h, 1).expect("images");
    let b: Image = v.pop().expect("two");
    (Input::Image(v.pop().expect("two")), Input::Image(b))
}

/// Two synthetic molecules (at most `max_atoms` atoms) as spherical inputs.
pub fn molecule_pair(max_atoms: usize, grid_band: usize) -> (Input, Input) {
    let tr = SphereTransform::new(grid_band, S2Grid::new(grid_band, SphereQuadrature::GaussLegendre).expect("grid")).expect("transform");
    let ms = synth_molecules(2, max_atoms, 3).expect("molecules");
    (molecule_sphere_input(&ms[0], &tr).expect("input"), molecule_sphere_input(&ms[1], &tr).expect("input"))
}
