//! Tensor files, XYZ molecules, molecule-to-sphere featurization and the
//! synthetic desk-scale datasets.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{EntkError, Result};
use crate::kernel::Input;
use crate::planar::Image;
use crate::so3::{mat_vec, Rotation, S2Grid, SphereSignal, SphereTransform};

const MAGIC: &[u8; 5] = b"ENTK1";

/// Dense row-major tensor of doubles.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dims.len() > u8::MAX as usize {
            return Err(EntkError::Shape(format!("rank {} too large", dims.len())));
        }
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(EntkError::Shape(format!("dims {dims:?} need {n} values, got {}", data.len())));
        }
        Ok(Tensor { dims, data })
    }

    /// `ENTK1`, rank as `u8`, dims as little-endian `u64`, then the payload as
    /// little-endian `f64`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(6 + 8 * (self.dims.len() + self.data.len()));
        out.extend_from_slice(MAGIC);
        out.push(self.dims.len() as u8);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| EntkError::Parse { line: 0, msg: m.to_string() };
        if bytes.len() < 6 || &bytes[..5] != MAGIC {
            return Err(bad("missing ENTK1 magic"));
        }
        let rank = bytes[5] as usize;
        let head = 6 + 8 * rank;
        if bytes.len() < head {
            return Err(bad("truncated header"));
        }
        let word = |i: usize| -> [u8; 8] { bytes[i..i + 8].try_into().expect("8 bytes") };
        let dims: Vec<usize> = (0..rank).map(|k| u64::from_le_bytes(word(6 + 8 * k)) as usize).collect();
        let n = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| bad("dimension overflow"))?;
        if n.checked_mul(8).and_then(|b| b.checked_add(head)) != Some(bytes.len()) {
            return Err(bad(&format!("payload of {} bytes does not match dims {dims:?}", bytes.len() - head)));
        }
        let data = (0..n).map(|k| f64::from_le_bytes(word(head + 8 * k))).collect();
        Ok(Tensor { dims, data })
    }

    /// Rows of a rank-1 or rank-2 tensor as comma-separated values.
    pub fn to_csv(&self) -> Result<String> {
        let (rows, cols) = match self.dims[..] {
            [n] => (n, 1),
            [r, c] => (r, c),
            _ => return Err(EntkError::Shape(format!("CSV needs rank <= 2, got {}", self.dims.len()))),
        };
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        for r in 0..rows {
            w.write_record(self.data[r * cols..(r + 1) * cols].iter().map(|v| format!("{v:e}")))
                .map_err(|e| EntkError::Io(e.to_string()))?;
        }
        String::from_utf8(w.into_inner().map_err(|e| EntkError::Io(e.to_string()))?).map_err(|e| EntkError::Io(e.to_string()))
    }

    /// Parse a headerless numeric CSV into a rank-2 tensor.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut data = Vec::new();
        let (mut rows, mut cols) = (0, None);
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| EntkError::Parse { line: i + 1, msg: e.to_string() })?;
            if *cols.get_or_insert(rec.len()) != rec.len() {
                return Err(EntkError::Parse { line: i + 1, msg: "ragged row".into() });
            }
            for field in rec.iter() {
                data.push(field.parse::<f64>().map_err(|e| EntkError::Parse { line: i + 1, msg: format!("{field:?}: {e}") })?);
            }
            rows += 1;
        }
        Tensor::new(vec![rows, cols.unwrap_or(0)], data)
    }

    /// Read `.csv` as CSV and anything else as ENTK1.
    pub fn load(path: &Path) -> Result<Self> {
        if path.extension().is_some_and(|e| e == "csv") {
            Tensor::from_csv(&fs::read_to_string(path)?)
        } else {
            let mut bytes = Vec::new();
            fs::File::open(path)?.read_to_end(&mut bytes)?;
            Tensor::from_bytes(&bytes)
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if path.extension().is_some_and(|e| e == "csv") {
            fs::write(path, self.to_csv()?)?;
        } else {
            fs::File::create(path)?.write_all(&self.to_bytes())?;
        }
        Ok(())
    }

    /// Split a `[n, c, h, w]` (or `[n, h, w]`) tensor into images.
    pub fn to_images(&self) -> Result<Vec<Image>> {
        let (n, c, h, w) = match self.dims[..] {
            [n, h, w] => (n, 1, h, w),
            [n, c, h, w] => (n, c, h, w),
            _ => return Err(EntkError::Shape(format!("images need rank 3 or 4, got {:?}", self.dims))),
        };
        let per = c * h * w;
        (0..n).map(|i| Image::new(c, h, w, self.data[i * per..(i + 1) * per].to_vec())).collect()
    }

    pub fn from_images(images: &[Image]) -> Result<Self> {
        let first = images.first().ok_or_else(|| EntkError::Argument("no images".into()))?;
        let mut data = Vec::with_capacity(images.len() * first.data.len());
        for im in images {
            if (im.channels, im.h, im.w) != (first.channels, first.h, first.w) {
                return Err(EntkError::Shape("images differ in shape".into()));
            }
            data.extend_from_slice(&im.data);
        }
        Tensor::new(vec![images.len(), first.channels, first.h, first.w], data)
    }
}

/// Elements handled by the featurization, in ascending atomic number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    H,
    C,
    N,
    O,
    F,
}

pub const ELEMENTS: [Element; 5] = [Element::H, Element::C, Element::N, Element::O, Element::F];
pub const POWERS: [i32; 2] = [2, 6];
pub const MAX_ATOMS: usize = 29;
/// Channels per atom: elements times powers.
pub const CHANNELS: usize = ELEMENTS.len() * POWERS.len();

impl Element {
    pub fn z(self) -> f64 {
        match self {
            Element::H => 1.0,
            Element::C => 6.0,
            Element::N => 7.0,
            Element::O => 8.0,
            Element::F => 9.0,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn parse(s: &str) -> Option<Element> {
        Some(match s {
            "H" => Element::H,
            "C" => Element::C,
            "N" => Element::N,
            "O" => Element::O,
            "F" => Element::F,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    /// Position in Å.
    pub pos: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Molecule {
    pub atoms: Vec<Atom>,
    pub energy: f64,
}

impl Molecule {
    pub fn rotated(&self, r: &Rotation) -> Molecule {
        Molecule { atoms: self.atoms.iter().map(|a| Atom { element: a.element, pos: mat_vec(r, &a.pos) }).collect(), energy: self.energy }
    }
}

/// Parse concatenated XYZ blocks: atom count, a comment line whose first
/// token is the energy, then `element x y z` rows.
pub fn parse_xyz(text: &str) -> Result<Vec<Molecule>> {
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |line: usize, msg: String| EntkError::Parse { line: line + 1, msg };
    while i < lines.len() {
        if lines[i].trim().is_empty() {
            i += 1;
            continue;
        }
        let n: usize = lines[i].trim().parse().map_err(|_| err(i, format!("bad atom count {:?}", lines[i].trim())))?;
        if n > MAX_ATOMS {
            return Err(err(i, format!("{n} atoms, at most {MAX_ATOMS} supported")));
        }
        let c = i + 1;
        let comment = lines.get(c).ok_or_else(|| err(c, "missing comment line".into()))?;
        let energy = match comment.split_whitespace().next() {
            Some(tok) => tok.parse::<f64>().map_err(|_| err(c, format!("bad energy {tok:?}")))?,
            None => return Err(err(c, "comment line carries no energy".into())),
        };
        let mut atoms = Vec::with_capacity(n);
        for k in 0..n {
            let li = c + 1 + k;
            let line = lines.get(li).ok_or_else(|| err(li, "missing atom row".into()))?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() < 4 {
                return Err(err(li, format!("atom row {line:?} needs element and three coordinates")));
            }
            let element = Element::parse(toks[0]).ok_or_else(|| err(li, format!("unknown element {:?}", toks[0])))?;
            let mut pos = [0.0; 3];
            for (d, t) in pos.iter_mut().zip(&toks[1..4]) {
                *d = t.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| err(li, format!("bad coordinate {t:?}")))?;
            }
            atoms.push(Atom { element, pos });
        }
        out.push(Molecule { atoms, energy });
        i = c + 1 + n;
    }
    Ok(out)
}

pub fn load_xyz(path: &Path) -> Result<Vec<Molecule>> {
    parse_xyz(&fs::read_to_string(path)?)
}

pub fn write_xyz(molecules: &[Molecule]) -> String {
    let mut s = String::new();
    for m in molecules {
        s.push_str(&format!("{}\n{:.17e}\n", m.atoms.len(), m.energy));
        for a in &m.atoms {
            s.push_str(&format!("{:?} {:.17e} {:.17e} {:.17e}\n", a.element, a.pos[0], a.pos[1], a.pos[2]));
        }
    }
    s
}

/// Smearing width `β = (cos(π/4) − 1)² / ln 20`: the smearing factor drops
/// to 0.05 at an angle of π/4 from the bond direction.
pub fn beta_constant() -> f64 {
    ((std::f64::consts::FRAC_PI_4).cos() - 1.0).powi(2) / 20f64.ln()
}

/// Per-atom samples on `grid`: `[atom][channel][point]`, channel
/// `element·2 + power`. For atom `i`, element `z` and power `p` the value at
/// `x` is `Σ_j z_i z / r_ijᵖ · exp(−((r̂_ij·x − 1)²)/β)` over the other atoms `j`
/// of element `z`.
pub fn featurize_molecule(m: &Molecule, grid: &S2Grid) -> Result<Vec<Vec<Vec<f64>>>> {
    if m.atoms.is_empty() {
        return Err(EntkError::Argument("molecule without atoms".into()));
    }
    let beta = beta_constant();
    let pts: Vec<[f64; 3]> = (0..grid.len()).map(|i| grid.unit_vector(i)).collect();
    let mut out = Vec::with_capacity(m.atoms.len());
    for (i, ai) in m.atoms.iter().enumerate() {
        let mut chans = vec![vec![0.0; pts.len()]; CHANNELS];
        for (j, aj) in m.atoms.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = [aj.pos[0] - ai.pos[0], aj.pos[1] - ai.pos[1], aj.pos[2] - ai.pos[2]];
            let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if r < 1e-8 {
                return Err(EntkError::DegenerateGeometry(format!("atoms {i} and {j} coincide")));
            }
            let u = [d[0] / r, d[1] / r, d[2] / r];
            let zz = ai.element.z() * aj.element.z();
            for (pi, &p) in POWERS.iter().enumerate() {
                let amp = zz / r.powi(p);
                let ch = &mut chans[aj.element.index() * POWERS.len() + pi];
                for (v, x) in ch.iter_mut().zip(&pts) {
                    let c = u[0] * x[0] + u[1] * x[1] + u[2] * x[2] - 1.0;
                    *v += amp * (-c * c / beta).exp();
                }
            }
        }
        out.push(chans);
    }
    Ok(out)
}

/// Molecule as one spherical signal per atom, for the SO(3) kernel.
pub fn molecule_sphere_input(m: &Molecule, tr: &SphereTransform) -> Result<Input> {
    let feats = featurize_molecule(m, &tr.grid)?;
    let branches = feats.iter().map(|chans| SphereSignal::from_samples(chans, tr).map(Input::Sphere)).collect::<Result<Vec<_>>>()?;
    Ok(Input::Branches(branches))
}

/// Molecule as one flat vector of grid samples per atom, for the MLP kernel.
pub fn molecule_vector_input(m: &Molecule, grid: &S2Grid) -> Result<Input> {
    let feats = featurize_molecule(m, grid)?;
    Ok(Input::Branches(feats.into_iter().map(|chans| Input::Vector(chans.concat())).collect()))
}

/// Standardized targets with the mean and standard deviation used.
pub fn standardize(values: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
    if values.len() < 2 {
        return Err(EntkError::Argument("need at least two values to standardize".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if sd == 0.0 {
        return Err(EntkError::Argument("constant targets".into()));
    }
    Ok((values.iter().map(|v| (v - mean) / sd).collect(), mean, sd))
}

/// Energy minus per-element reference energies (indexed like [`ELEMENTS`]).
pub fn subtract_reference(m: &Molecule, reference: &[f64; 5]) -> f64 {
    m.energy - m.atoms.iter().map(|a| reference[a.element.index()]).sum::<f64>()
}

/// Smooth rotation-invariant toy energy with no per-element part: pair
/// terms `0.1 z_i z_j e^{−r}`.
pub fn toy_energy(atoms: &[Atom]) -> f64 {
    let mut e = 0.0;
    for i in 0..atoms.len() {
        for j in i + 1..atoms.len() {
            let d: f64 = (0..3).map(|k| (atoms[i].pos[k] - atoms[j].pos[k]).powi(2)).sum::<f64>().sqrt();
            e += 0.1 * atoms[i].element.z() * atoms[j].element.z() * (-d).exp();
        }
    }
    e
}

/// Uniformly random rotation matrix (Haar measure, via a random unit quaternion).
pub fn random_rotation<R: Rng>(rng: &mut R) -> Rotation {
    let q: Vec<f64> = (0..4).map(|_| StandardNormal.sample(rng)).collect();
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

/// Sort atoms heavy first, ties by distance from the centroid. The order is
/// invariant under rotations, so per-atom branches line up across poses.
pub fn canonical_order(m: &mut Molecule) {
    let n = m.atoms.len() as f64;
    let c: Vec<f64> = (0..3).map(|k| m.atoms.iter().map(|a| a.pos[k]).sum::<f64>() / n).collect();
    let dist = |a: &Atom| (0..3).map(|k| (a.pos[k] - c[k]).powi(2)).sum::<f64>();
    m.atoms.sort_by(|a, b| b.element.cmp(&a.element).then(dist(a).total_cmp(&dist(b))));
}

/// Random small molecules (3 to `max_atoms` atoms, pairwise distance at least
/// 1 Å) with [`toy_energy`] labels, each in a uniformly random orientation
/// and in [`canonical_order`].
pub fn synth_molecules(n: usize, max_atoms: usize, seed: u64) -> Result<Vec<Molecule>> {
    if !(3..=MAX_ATOMS).contains(&max_atoms) {
        return Err(EntkError::Argument(format!("max_atoms must lie in 3..={MAX_ATOMS}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let heavy = [Element::C, Element::N, Element::O, Element::F];
    let step = Normal::new(0.0, 0.9).expect("valid normal");
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let k = rng.gen_range(3..=max_atoms);
        let mut atoms: Vec<Atom> = Vec::with_capacity(k);
        let mut tries = 0;
        while atoms.len() < k && tries < 1000 {
            tries += 1;
            let element = if rng.gen_bool(0.4) { Element::H } else { *heavy.choose(&mut rng).expect("nonempty") };
            let base = atoms.choose(&mut rng).map(|a| a.pos).unwrap_or([0.0; 3]);
            let pos = [base[0] + step.sample(&mut rng), base[1] + step.sample(&mut rng), base[2] + step.sample(&mut rng)];
            let ok = atoms.iter().all(|a| {
                let d: f64 = (0..3).map(|i| (a.pos[i] - pos[i]).powi(2)).sum::<f64>().sqrt();
                (1.0..=2.5).contains(&d) || (d > 2.5 && !atoms.is_empty())
            });
            if ok {
                atoms.push(Atom { element, pos });
            }
        }
        if atoms.len() < 3 {
            continue;
        }
        let energy = toy_energy(&atoms);
        let rot = random_rotation(&mut rng);
        let mut m = Molecule { atoms, energy }.rotated(&rot);
        canonical_order(&mut m);
        out.push(m);
    }
    Ok(out)
}

/// Class-dependent textures in a random quarter-turn pose and circular
/// shift, with pixel noise. Returns `n_per_class · classes` images in
/// shuffled order.
pub fn synth_rotclass_dataset(n_per_class: usize, classes: usize, h: usize, seed: u64) -> Result<(Vec<Image>, Vec<usize>)> {
    if classes == 0 || h < 3 {
        return Err(EntkError::Argument("need at least one class and a 3x3 grid".into()));
    }
    // Prototypes depend only on the class and grid size, not on the seed.
    let protos: Vec<Vec<f64>> = (0..classes)
        .map(|c| {
            let mut prng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + c as u64);
            let blobs = 2 + c % 3;
            let mut img = vec![0.0; h * h];
            for _ in 0..blobs {
                let (ci, cj) = (prng.gen_range(0.0..h as f64), prng.gen_range(0.0..h as f64));
                let amp = if prng.gen_bool(0.5) { 1.0 } else { -1.0 } * prng.gen_range(0.6..1.2);
                let width = prng.gen_range(0.6..1.4);
                for i in 0..h {
                    for j in 0..h {
                        let di = wrap(i as f64 - ci, h as f64);
                        let dj = wrap(j as f64 - cj, h as f64);
                        img[i * h + j] += amp * (-(di * di + dj * dj) / (2.0 * width * width)).exp();
                    }
                }
            }
            img
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.25).expect("valid normal");
    let mut items = Vec::with_capacity(n_per_class * classes);
    for (c, proto) in protos.iter().enumerate() {
        for _ in 0..n_per_class {
            let base = Image::new(1, h, h, proto.clone())?;
            let q = rng.gen_range(0..4);
            let (d1, d2) = (rng.gen_range(0..h) as i64, rng.gen_range(0..h) as i64);
            let mut im = base.rotated(q)?.shifted(d1, d2);
            for v in im.data.iter_mut() {
                *v += noise.sample(&mut rng);
            }
            items.push((im, c));
        }
    }
    items.shuffle(&mut rng);
    Ok(items.into_iter().unzip())
}

/// `n` single-channel `h×h` images with i.i.d. standard normal pixels.
pub fn random_images(n: usize, h: usize, seed: u64) -> Result<Vec<Image>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Image::new(1, h, h, (0..h * h).map(|_| StandardNormal.sample(&mut rng)).collect())).collect()
}

fn wrap(d: f64, n: f64) -> f64 {
    let d = d.rem_euclid(n);
    if d > n / 2.0 {
        d - n
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::{euler_to_matrix, SphereQuadrature};

    #[test]
    fn tensor_round_trips() {
        let t = Tensor::new(vec![2, 3], vec![1.0, -0.0, f64::MIN_POSITIVE, 1e300, std::f64::consts::PI, -7.5]).unwrap();
        let back = Tensor::from_bytes(&t.to_bytes()).unwrap();
        assert_eq!(back.dims, t.dims);
        assert!(back.data.iter().zip(&t.data).all(|(a, b)| a.to_bits() == b.to_bits()));
        let csv = Tensor::from_csv(&t.to_csv().unwrap()).unwrap();
        assert_eq!(csv, t);
        let mut bytes = t.to_bytes();
        bytes.pop();
        assert!(Tensor::from_bytes(&bytes).is_err());
        bytes[0] = b'X';
        assert!(Tensor::from_bytes(&bytes).is_err());
        assert!(Tensor::from_csv("1,2\n3\n").is_err());
    }

    #[test]
    fn xyz_parsing() {
        let h2 = "2\n-1.17 H2\nH 0 0 0\nH 0 0 0.74\n";
        let ms = parse_xyz(h2).unwrap();
        assert_eq!(ms.len(), 1);
        assert_eq!(ms[0].atoms.len(), 2);
        assert_eq!(ms[0].energy, -1.17);
        assert!(parse_xyz("").unwrap().is_empty());
        match parse_xyz("1\n0\nH 0 x 0\n") {
            Err(EntkError::Parse { line, .. }) => assert_eq!(line, 3),
            e => panic!("{e:?}"),
        }
        assert!(matches!(parse_xyz("1\n0\nXe 0 0 0\n"), Err(EntkError::Parse { line: 3, .. })));
        assert_eq!(parse_xyz(&write_xyz(&ms)).unwrap(), ms);
    }

    #[test]
    fn beta_value() {
        let b = beta_constant();
        assert!((b - 0.028_636_216_388_3).abs() < 1e-14);
        let c = std::f64::consts::FRAC_PI_4.cos() - 1.0;
        assert!(((-c * c / b).exp() - 0.05).abs() < 1e-12);
    }

    fn h2() -> Molecule {
        let a = |z: f64| Atom { element: Element::H, pos: [0.0, 0.0, z] };
        Molecule { atoms: vec![a(0.0), a(1.0)], energy: 0.0 }
    }

    #[test]
    fn diatomic_values() {
        let grid = S2Grid::new(4, SphereQuadrature::GaussLegendre).unwrap();
        let feats = featurize_molecule(&h2(), &grid).unwrap();
        // channel (H, p = 2) of atom 0, evaluated directly at +z and on the equator
        let beta = beta_constant();
        for i in 0..grid.len() {
            let x = grid.unit_vector(i);
            let want = (-(x[2] - 1.0).powi(2) / beta).exp();
            assert!((feats[0][0][i] - want).abs() < 1e-15);
        }
        let single = Molecule { atoms: vec![h2().atoms[0]], energy: 0.0 };
        assert!(featurize_molecule(&single, &grid).unwrap()[0].iter().flatten().all(|&v| v == 0.0));
        let dup = Molecule { atoms: vec![h2().atoms[0], h2().atoms[0]], energy: 0.0 };
        assert!(matches!(featurize_molecule(&dup, &grid), Err(EntkError::DegenerateGeometry(_))));
        assert!((-1.0 / beta).exp() < 1e-15);
    }

    #[test]
    fn featurization_is_equivariant() {
        let m = &synth_molecules(1, 5, 3).unwrap()[0];
        let rot = euler_to_matrix(0.4, 1.1, -0.7);
        let grid = S2Grid::new(3, SphereQuadrature::GaussLegendre).unwrap();
        let a = featurize_molecule(m, &grid).unwrap();
        let rm = m.rotated(&rot);
        let beta = beta_constant();
        // evaluate the rotated molecule's signal at R·x directly
        for (i, ai) in rm.atoms.iter().enumerate() {
            for p in 0..grid.len() {
                let x = mat_vec(&rot, &grid.unit_vector(p));
                let mut vals = [0.0; CHANNELS];
                for (j, aj) in rm.atoms.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let d: Vec<f64> = (0..3).map(|k| aj.pos[k] - ai.pos[k]).collect();
                    let r = d.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let c = (d[0] * x[0] + d[1] * x[1] + d[2] * x[2]) / r - 1.0;
                    for (pi, &pw) in POWERS.iter().enumerate() {
                        vals[aj.element.index() * 2 + pi] += ai.element.z() * aj.element.z() / r.powi(pw) * (-c * c / beta).exp();
                    }
                }
                for ch in 0..CHANNELS {
                    assert!((vals[ch] - a[i][ch][p]).abs() < 1e-10 * (1.0 + vals[ch].abs()));
                }
            }
        }
    }

    #[test]
    fn integrated_channels_match_pair_loop() {
        let m = &synth_molecules(1, 4, 8).unwrap()[0];
        let grid = S2Grid::new(40, SphereQuadrature::GaussLegendre).unwrap();
        let feats = featurize_molecule(m, &grid).unwrap();
        let beta = beta_constant();
        // ∫ exp(−(u·x − 1)²/β) dx = 2π ∫_{−1}^{1} exp(−(t − 1)²/β) dt
        let smear = 2.0 * std::f64::consts::PI * (std::f64::consts::PI * beta).sqrt() / 2.0 * erf(2.0 / beta.sqrt());
        let mut quad = 0.0;
        for atom in &feats {
            for ch in atom {
                quad += ch.iter().enumerate().map(|(i, v)| v * grid.weight(i)).sum::<f64>();
            }
        }
        let mut direct = 0.0;
        for (i, a) in m.atoms.iter().enumerate() {
            for (j, b) in m.atoms.iter().enumerate() {
                if i != j {
                    let r: f64 = (0..3).map(|k| (a.pos[k] - b.pos[k]).powi(2)).sum::<f64>().sqrt();
                    direct += POWERS.iter().map(|&p| a.element.z() * b.element.z() / r.powi(p)).sum::<f64>() * smear;
                }
            }
        }
        assert!((quad - direct).abs() < 1e-8 * direct, "{quad} vs {direct}");
    }

    fn erf(x: f64) -> f64 {
        crate::kernel::erf(x)
    }

    #[test]
    fn synthetic_images_are_reproducible_and_balanced() {
        let (a, la) = synth_rotclass_dataset(6, 9, 6, 1).unwrap();
        let (b, lb) = synth_rotclass_dataset(6, 9, 6, 1).unwrap();
        assert_eq!((a.clone(), la.clone()), (b, lb));
        for c in 0..9 {
            assert_eq!(la.iter().filter(|&&l| l == c).count(), 6);
        }
        // rotation-invariant energy statistic separates classes 0 and 1
        let (imgs, labels) = synth_rotclass_dataset(40, 2, 6, 2).unwrap();
        let stat = |c: usize| -> Vec<f64> {
            imgs.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(im, _)| im.data.iter().map(|v| v * v).sum()).collect()
        };
        let (s0, s1) = (stat(0), stat(1));
        let mv = |s: &[f64]| {
            let m = s.iter().sum::<f64>() / s.len() as f64;
            (m, s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (s.len() - 1) as f64)
        };
        let ((m0, v0), (m1, v1)) = (mv(&s0), mv(&s1));
        let t = (m0 - m1).abs() / (v0 / s0.len() as f64 + v1 / s1.len() as f64).sqrt();
        assert!(t > 5.0, "Welch t = {t}");
    }

    #[test]
    fn molecules_are_valid() {
        let ms = synth_molecules(20, 6, 4).unwrap();
        for m in &ms {
            assert!((3..=6).contains(&m.atoms.len()));
            assert!((m.energy - toy_energy(&m.atoms)).abs() < 1e-9 * (1.0 + m.energy.abs()));
        }
        let (z, mean, sd) = standardize(&ms.iter().map(|m| m.energy).collect::<Vec<_>>()).unwrap();
        assert!(z.iter().sum::<f64>().abs() < 1e-12 && sd > 0.0 && mean.is_finite());
    }
}
