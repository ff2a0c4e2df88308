use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use entk_core::data::{featurize_molecule, load_xyz, random_images, Molecule, Tensor, CHANNELS};
use entk_core::equivalence::{default_thm4, verify_thm5, verify_thm6, Thm4Report, VerificationReport};
use entk_core::experiment::{
    image_rotation_invariance, image_sweep, molecule_rotation_invariance, molecule_split, molecule_sweep, rotclass_split, ImageSplit,
    MoleculeKernel, MoleculeSetup, MoleculeSplit,
};
use entk_core::finite_net::{mc_convergence, mc_csv};
use entk_core::selftest::{run_all, Check};
use entk_core::so3::{S2Grid, SphereQuadrature};
use entk_core::{EntkError, GridGeom, GroupParams, Image, Input, Pipeline, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ArchSource, Dataset, RunConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Where results go, and the provenance stamped on each of them.
pub struct Ctx {
    pub cfg: RunConfig,
    pub hash: String,
    pub out: PathBuf,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn header(&self, command: &str) -> Value {
        json!({ "command": command, "version": VERSION, "config_hash": self.hash, "seed": self.cfg.seed })
    }

    fn write_json(&self, name: &str, command: &str, body: Value) -> Result<()> {
        let mut doc = self.header(command);
        if let (Value::Object(d), Value::Object(b)) = (&mut doc, body) {
            d.extend(b);
        }
        let path = self.path(name);
        fs::write(&path, serde_json::to_string_pretty(&doc).expect("json") + "\n")?;
        Ok(())
    }
}

fn tensor_name(stem: &str, format: &str) -> String {
    format!("{stem}.{format}")
}

enum Loaded {
    Images(Vec<Image>),
    Molecules(Vec<Molecule>),
}

fn load_inputs(path: &Path) -> Result<Loaded> {
    load_inputs_inner(path).map_err(|e| match e {
        EntkError::Io(m) => EntkError::Io(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn load_inputs_inner(path: &Path) -> Result<Loaded> {
    if path.extension().is_some_and(|e| e == "xyz") {
        return Ok(Loaded::Molecules(load_xyz(path)?));
    }
    let t = Tensor::load(path)?;
    if let [n, cols] = t.dims[..] {
        let h = (cols as f64).sqrt().round() as usize;
        if h * h != cols {
            return Err(EntkError::Shape(format!("CSV rows of {cols} values are not square images")));
        }
        return Tensor::new(vec![n, h, h], t.data)?.to_images().map(Loaded::Images);
    }
    t.to_images().map(Loaded::Images)
}

/// Inputs and resolved architecture for the Gram command.
fn gram_inputs(cfg: &RunConfig) -> Result<(Vec<Input>, entk_core::ArchitectureSpec)> {
    let g = &cfg.gram;
    let path = g.inputs.as_ref().ok_or_else(|| EntkError::Argument("gram needs inputs (config gram.inputs or --inputs)".into()))?;
    match load_inputs(path)? {
        Loaded::Images(images) => {
            let arch = g.arch.resolve(1, g.bandlimit)?;
            Ok((images.into_iter().map(Input::Image).collect(), arch))
        }
        Loaded::Molecules(ms) => {
            let branches = ms.iter().map(|m| m.atoms.len()).max().unwrap_or(1);
            let arch = g.arch.resolve(branches, g.bandlimit)?;
            let setup = MoleculeSetup::new(g.grid_band, g.bandlimit)?;
            let kind = if matches!(arch.group, GroupParams::So3 { .. }) { MoleculeKernel::So3 } else { MoleculeKernel::Mlp };
            let inputs = ms.iter().map(|m| setup.input(kind, m)).collect::<Result<_>>()?;
            Ok((inputs, arch))
        }
    }
}

const CHECKPOINT_MAGIC: &str = "entk-gram-checkpoint";

/// Upper-triangle rows `(nngp[i..n], ntk[i..n])` in order.
type Rows = Vec<(Vec<f64>, Vec<f64>)>;

fn read_checkpoint(path: &Path, hash: &str, n: usize) -> std::result::Result<Rows, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    let head = lines.next().ok_or("empty file")?;
    if head != format!("{CHECKPOINT_MAGIC} {hash} {n}") {
        return Err("header does not match this configuration".into());
    }
    let mut rows = Rows::new();
    for (k, line) in lines.enumerate() {
        let mut tok = line.split(' ');
        if tok.next() != Some(&k.to_string()) {
            return Err(format!("row {k} out of sequence"));
        }
        let vals = tok
            .map(|t| u64::from_str_radix(t, 16).map(f64::from_bits).map_err(|e| format!("row {k}: {e}")))
            .collect::<std::result::Result<Vec<f64>, String>>()?;
        let m = n.checked_sub(k).ok_or(format!("row {k} beyond {n}"))?;
        if vals.len() != 2 * m {
            return Err(format!("row {k} has {} values, expected {}", vals.len(), 2 * m));
        }
        rows.push((vals[..m].to_vec(), vals[m..].to_vec()));
    }
    Ok(rows)
}

fn checkpoint_line(k: usize, nngp: &[f64], ntk: &[f64]) -> String {
    let mut s = k.to_string();
    for v in nngp.iter().chain(ntk) {
        s.push(' ');
        s.push_str(&format!("{:016x}", v.to_bits()));
    }
    s.push('\n');
    s
}

/// Gram matrices, computed row by row with a checkpoint after each row.
/// `max_rows` stops early (leaving the checkpoint) after that many new rows.
pub fn cmd_gram(ctx: &Ctx, max_rows: Option<usize>) -> Result<bool> {
    use rayon::prelude::*;
    let (inputs, arch) = gram_inputs(&ctx.cfg)?;
    let n = inputs.len();
    let pipe = Pipeline::new(&arch)?;
    let selfs = pipe.all_self_values(&inputs)?;
    let ckpt = ctx.path("gram.ckpt");
    let mut rows = if ckpt.exists() {
        match read_checkpoint(&ckpt, &ctx.hash, n) {
            Ok(r) => r,
            Err(why) => {
                eprintln!("warning: discarding checkpoint {} ({why}); starting over", ckpt.display());
                Rows::new()
            }
        }
    } else {
        Rows::new()
    };
    let mut file = fs::File::create(&ckpt)?;
    file.write_all(format!("{CHECKPOINT_MAGIC} {} {n}\n", ctx.hash).as_bytes())?;
    for (k, (a, b)) in rows.iter().enumerate() {
        file.write_all(checkpoint_line(k, a, b).as_bytes())?;
    }
    file.sync_data()?;
    let mut fresh = 0;
    while rows.len() < n {
        if max_rows.is_some_and(|m| fresh >= m) {
            eprintln!("stopped after {fresh} rows; {} of {n} rows checkpointed", rows.len());
            return Ok(true);
        }
        let i = rows.len();
        let sv = |k: usize| selfs.as_ref().map(|s| &s[k]);
        let vals: Vec<(f64, f64)> = (i..n)
            .into_par_iter()
            .map(|j| {
                let s = pipe.pair(&inputs[i], &inputs[j], sv(i), sv(j))?;
                let (k, t) = (s.nngp()?, s.ntk()?);
                if !(k.is_finite() && t.is_finite()) {
                    return Err(EntkError::NonFinite(i, j));
                }
                Ok((k, t))
            })
            .collect::<Result<_>>()?;
        let (a, b): (Vec<f64>, Vec<f64>) = vals.into_iter().unzip();
        file.write_all(checkpoint_line(i, &a, &b).as_bytes())?;
        file.sync_data()?;
        rows.push((a, b));
        fresh += 1;
    }
    let mut nngp = vec![0.0; n * n];
    let mut ntk = vec![0.0; n * n];
    for (i, (a, b)) in rows.iter().enumerate() {
        for (o, j) in (i..n).enumerate() {
            nngp[i * n + j] = a[o];
            nngp[j * n + i] = a[o];
            ntk[i * n + j] = b[o];
            ntk[j * n + i] = b[o];
        }
    }
    let fmt = &ctx.cfg.gram.format;
    let files = [("nngp", nngp), ("ntk", ntk)].map(|(name, data)| {
        let file = tensor_name(&format!("gram_{name}"), fmt);
        (file, data)
    });
    for (file, data) in &files {
        Tensor::new(vec![n, n], data.clone())?.save(&ctx.path(file))?;
    }
    ctx.write_json(
        "gram.json",
        "gram",
        json!({ "n": n, "arch": arch, "inputs": ctx.cfg.gram.inputs, "nngp": files[0].0, "ntk": files[1].0 }),
    )?;
    fs::remove_file(&ckpt)?;
    println!("gram: {n}x{n} NNGP and NTK in {} and {}, metadata in gram.json", files[0].0, files[1].0);
    Ok(true)
}

fn image_split(ctx: &Ctx) -> Result<ImageSplit> {
    let p = &ctx.cfg.predict;
    if p.dataset == Dataset::Rotclass {
        return rotclass_split(p.h, ctx.cfg.seed);
    }
    let need = |o: &Option<PathBuf>, what: &str| o.clone().ok_or_else(|| EntkError::Argument(format!("predict needs {what}")));
    let Loaded::Images(images) = load_inputs(&need(&p.images, "images")?)? else {
        return Err(EntkError::Argument("predict.images must be an image tensor".into()));
    };
    let lt = Tensor::load(&need(&p.labels, "labels")?)?;
    let labels: Vec<usize> = lt
        .data
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(EntkError::Argument(format!("label {v} is not a class index")))
            }
        })
        .collect::<Result<_>>()?;
    let n_classes = p.n_classes.unwrap_or_else(|| labels.iter().max().map_or(1, |m| m + 1));
    let n_train = p.n_train.ok_or_else(|| EntkError::Argument("predict needs n_train for image files".into()))?;
    ImageSplit::new(images, labels, n_train, n_classes)
}

fn molecule_split_from(ctx: &Ctx) -> Result<MoleculeSplit> {
    let p = &ctx.cfg.predict;
    if p.dataset == Dataset::Molecules {
        return molecule_split(ctx.cfg.seed);
    }
    let path = p.xyz.clone().ok_or_else(|| EntkError::Argument("predict needs xyz".into()))?;
    let mut train = load_xyz(&path)?;
    let n_train = p.n_train.ok_or_else(|| EntkError::Argument("predict needs n_train for xyz files".into()))?;
    if n_train == 0 || n_train >= train.len() {
        return Err(EntkError::Argument(format!("n_train {n_train} must lie in 1..{}", train.len())));
    }
    let test = train.split_off(n_train);
    Ok(MoleculeSplit { train, test })
}

/// Metric table per train size for both kernel families.
pub fn cmd_predict(ctx: &Ctx) -> Result<bool> {
    let p = &ctx.cfg.predict;
    let (reports, invariance) = match p.dataset {
        Dataset::Rotclass | Dataset::Images => {
            let split = image_split(ctx)?;
            let kernels: Vec<(String, entk_core::ArchitectureSpec)> = if p.kernels.is_empty() {
                vec![
                    ("gcnn".into(), ArchSource::Preset("classifier_gcnn".into()).resolve(1, 1)?),
                    ("cnn".into(), ArchSource::Preset("classifier_cnn".into()).resolve(1, 1)?),
                ]
            } else {
                p.kernels.iter().map(|k| Ok((k.name.clone(), k.arch.resolve(1, p.bandlimit)?))).collect::<Result<_>>()?
            };
            let reports = image_sweep(&split, &kernels, &p.train_sizes, p.ridge)?;
            let inv = if p.invariance {
                let mut m = serde_json::Map::new();
                for (name, arch) in &kernels {
                    m.insert(name.clone(), serde_json::to_value(image_rotation_invariance(&split, arch, 1)?).expect("json"));
                }
                Some(Value::Object(m))
            } else {
                None
            };
            (reports, inv)
        }
        Dataset::Molecules | Dataset::Xyz => {
            let split = molecule_split_from(ctx)?;
            let setup = MoleculeSetup::new(p.grid_band, p.bandlimit)?;
            let reports = molecule_sweep(&split, &setup, &[MoleculeKernel::So3, MoleculeKernel::Mlp], &p.train_sizes, p.ridge)?;
            let inv = if p.invariance { Some(json!({ "so3": molecule_rotation_invariance(&split, &setup, 1)? })) } else { None };
            (reports, inv)
        }
    };
    for r in &reports {
        println!("{:>6} {:<8} {} = {:.6}", r.train_size, r.kernel, r.metric, r.value);
    }
    ctx.write_json("predict.json", "predict", json!({ "dataset": p.dataset, "results": reports, "invariance": invariance }))?;
    Ok(true)
}

/// Finite-width convergence table.
pub fn cmd_mc(ctx: &Ctx) -> Result<bool> {
    let m = &ctx.cfg.mc;
    let arch = m.arch.resolve(1, 1)?;
    let inputs = random_images(m.n_inputs, m.h, ctx.cfg.seed)?;
    let rows = mc_convergence(&arch, &m.widths, m.samples, &inputs, ctx.cfg.seed)?;
    fs::write(ctx.path("mc.csv"), mc_csv(&rows))?;
    ctx.write_json("mc.json", "mc", json!({ "arch": arch, "table": "mc.csv", "rows": rows }))?;
    print!("{}", mc_csv(&rows));
    Ok(true)
}

#[derive(Serialize)]
struct VerifySummary {
    thm6: Vec<VerificationReport>,
    thm5: VerificationReport,
    thm4: Thm4Report,
}

/// The three equivalence checks; fails if any of them fails.
pub fn cmd_verify(ctx: &Ctx) -> Result<bool> {
    let v = &ctx.cfg.verify;
    let seed = ctx.cfg.seed;
    let mut thm6 = Vec::new();
    for &h in &v.grids {
        for &depth in &v.depths {
            for &nl in &v.nonlins {
                let geom = GridGeom::new(h, h, v.padding, 4)?;
                thm6.push(verify_thm6(geom, depth, v.support.clone(), nl, v.trials, seed)?);
            }
        }
    }
    let g5 = GridGeom::square(v.thm5_grid, 4)?;
    let thm5 = verify_thm5(g5, v.thm5_depth, entk_core::Support::Global, v.nonlins[0], v.trials, seed)?;
    let thm4 = default_thm4(v.thm4_h, v.thm4_depth, v.nonlins[0], v.thm4_train, v.thm4_noise, seed)?;
    let pass = thm6.iter().all(|r| r.pass) && thm5.pass && thm4.pass;
    let worst6 = thm6.iter().map(|r| r.max_deviation).fold(0.0, f64::max);
    let conforming6 = thm6.iter().all(|r| r.conforming);
    println!("thm6: {} configurations, max relative deviation {worst6:.3e}, conforming {conforming6}", thm6.len());
    println!("thm5: max relative deviation {:.3e}, pass {}", thm5.max_deviation, thm5.pass);
    println!("thm4: max prediction gap {:.3e}, pass {}", thm4.max_gap, thm4.pass);
    let summary = VerifySummary { thm6, thm5, thm4 };
    let mut body = serde_json::to_value(&summary).expect("json");
    body["pass"] = json!(pass);
    ctx.write_json("verify.json", "verify", body)?;
    println!("verify: {}", if pass { "PASS" } else { "FAIL" });
    Ok(pass)
}

/// Per-atom grid samples of each molecule, zero-padded to the largest
/// molecule: `[molecule, atom, channel, point]`, plus the energies.
pub fn cmd_featurize(ctx: &Ctx) -> Result<bool> {
    use rayon::prelude::*;
    let f = &ctx.cfg.featurize;
    let path = f.xyz.as_ref().ok_or_else(|| EntkError::Argument("featurize needs xyz (config or --xyz)".into()))?;
    let ms = load_xyz(path)?;
    let grid = S2Grid::new(f.grid_band, SphereQuadrature::GaussLegendre)?;
    let feats: Vec<Vec<Vec<Vec<f64>>>> = ms.par_iter().map(|m| featurize_molecule(m, &grid)).collect::<Result<_>>()?;
    let atoms = ms.iter().map(|m| m.atoms.len()).max().unwrap_or(0);
    let pts = grid.len();
    let mut data = vec![0.0; ms.len() * atoms * CHANNELS * pts];
    for (i, per_atom) in feats.iter().enumerate() {
        for (a, chans) in per_atom.iter().enumerate() {
            for (c, vals) in chans.iter().enumerate() {
                let o = ((i * atoms + a) * CHANNELS + c) * pts;
                data[o..o + pts].copy_from_slice(vals);
            }
        }
    }
    let feat_file = tensor_name("features", "entk");
    Tensor::new(vec![ms.len(), atoms, CHANNELS, pts], data)?.save(&ctx.path(&feat_file))?;
    let energy_file = tensor_name("energies", &f.format);
    Tensor::new(vec![ms.len()], ms.iter().map(|m| m.energy).collect())?.save(&ctx.path(&energy_file))?;
    ctx.write_json(
        "featurize.json",
        "featurize",
        json!({ "molecules": ms.len(), "max_atoms": atoms, "channels": CHANNELS, "grid_points": pts,
                "features": feat_file, "energies": energy_file }),
    )?;
    println!("featurize: {} molecules, {atoms} atoms x {CHANNELS} channels x {pts} points", ms.len());
    Ok(true)
}

/// Built-in consistency checks.
pub fn cmd_selftest(ctx: &Ctx) -> Result<bool> {
    let checks: Vec<Check> = run_all()?;
    for c in &checks {
        println!("{} {:<50} {:.3e} (< {:.0e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.max_deviation, c.tolerance);
    }
    let pass = checks.iter().all(|c| c.pass);
    ctx.write_json("selftest.json", "selftest", json!({ "checks": checks, "pass": pass }))?;
    Ok(pass)
}
