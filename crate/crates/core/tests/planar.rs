use entk_core::kernel::{apply_nonlinearity, KernelState, NonlinKind};
use entk_core::planar::{
    brute_force_gpool, brute_force_lifting_state, brute_force_state_layer, gconv_planar, gpool_planar, input_kernel_planar, lifting_planar,
    rotate_offset, FiniteGroup,
};
use entk_core::{run_pipeline, ArchitectureSpec, GridGeom, Image, Input, Padding, Support};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(channels: usize, h: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::new(channels, h, h, (0..channels * h * h).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn assert_states_close(a: &KernelState, b: &KernelState, tol: f64) {
    assert_eq!(a.domain, b.domain);
    assert!(max_abs_diff(&a.k_xy, &b.k_xy) < tol, "k_xy {}", max_abs_diff(&a.k_xy, &b.k_xy));
    assert!(max_abs_diff(&a.theta, &b.theta) < tol, "theta {}", max_abs_diff(&a.theta, &b.theta));
    assert!(max_abs_diff(&a.k_xx, &b.k_xx) < tol);
    assert!(max_abs_diff(&a.k_yy, &b.k_yy) < tol);
}

#[test]
fn optimized_layers_match_brute_force_group_sums() {
    for n in [1, 2, 4] {
        for h in [3, 4] {
            let geom = GridGeom::square(h, n).unwrap();
            let group = FiniteGroup::new(geom).unwrap();
            let support = Support::Square(3);
            let offsets = geom.offsets(&support).unwrap();
            let pix: Vec<usize> =
                offsets.iter().map(|&(a, b)| (a.rem_euclid(h as i64) as usize) * h + b.rem_euclid(h as i64) as usize).collect();
            let elems = group.support_elements(&offsets);
            let (f, g) = (random_image(2, h, 1 + n as u64), random_image(2, h, 10 + h as u64));
            let s0 = input_kernel_planar(&f, &g, &geom).unwrap();

            let fast = lifting_planar(&s0, &support, &geom).unwrap();
            let slow = brute_force_lifting_state(&group, &s0, &pix).unwrap();
            assert_states_close(&fast, &slow, 1e-12);

            let mut fast = apply_nonlinearity(&fast, NonlinKind::Relu).unwrap();
            let mut slow = apply_nonlinearity(&slow, NonlinKind::Relu).unwrap();
            for _ in 0..2 {
                fast = gconv_planar(&fast, &support, &geom, true).unwrap();
                slow = brute_force_state_layer(&group, &slow, &elems).unwrap();
                assert_states_close(&fast, &slow, 1e-12);
                fast = apply_nonlinearity(&fast, NonlinKind::Erf).unwrap();
                slow = apply_nonlinearity(&slow, NonlinKind::Erf).unwrap();
            }
            let pooled = gpool_planar(&fast).unwrap();
            assert!((pooled.k_xy[0] - brute_force_gpool(&group, &slow.k_xy)).abs() < 1e-12);
            assert!((pooled.theta[0] - brute_force_gpool(&group, &slow.theta)).abs() < 1e-12);
        }
    }
}

#[test]
fn brute_force_group_acts_like_image_transforms() {
    let geom = GridGeom::square(4, 4).unwrap();
    let group = FiniteGroup::new(geom).unwrap();
    let f = random_image(1, 4, 3);
    // pure rotation (t = 0, r = 1) about the origin pixel
    let rotated = group.act_image(group.element(0, 1), &f);
    for i in 0..4i64 {
        for j in 0..4i64 {
            let (a, b) = rotate_offset((i, j), 1);
            let dst = (a.rem_euclid(4) * 4 + b.rem_euclid(4)) as usize;
            assert_eq!(rotated.data[dst], f.data[(i * 4 + j) as usize]);
        }
    }
    let shifted = group.act_image(group.element(4 + 2, 0), &f);
    assert_eq!(shifted, f.shifted(1, 2));
}

fn direct_lifting(k0: &[f64], geom: &GridGeom, offsets: &[(i64, i64)]) -> Vec<f64> {
    let (n, p) = (geom.n_rot, geom.pixels());
    let big = n * p;
    let pos = |t: usize, o: (i64, i64)| -> Option<usize> {
        let (i, j) = ((t / geom.w) as i64 + o.0, (t % geom.w) as i64 + o.1);
        match geom.padding {
            Padding::Circular => Some((i.rem_euclid(geom.h as i64) as usize) * geom.w + j.rem_euclid(geom.w as i64) as usize),
            Padding::Zero => ((0..geom.h as i64).contains(&i) && (0..geom.w as i64).contains(&j)).then(|| i as usize * geom.w + j as usize),
        }
    };
    let mut out = vec![0.0; big * big];
    for r in 0..n {
        for rp in 0..n {
            for t in 0..p {
                for tp in 0..p {
                    let mut s = 0.0;
                    for &o in offsets {
                        let a = pos(t, rotate_offset(o, geom.quarter_turns(r)));
                        let b = pos(tp, rotate_offset(o, geom.quarter_turns(rp)));
                        if let (Some(a), Some(b)) = (a, b) {
                            s += k0[a * p + b];
                        }
                    }
                    out[(r * p + t) * big + rp * p + tp] = s / offsets.len() as f64;
                }
            }
        }
    }
    out
}

#[test]
fn zero_padding_matches_direct_sums() {
    for h in [4, 5] {
        let geom = GridGeom::new(h, h, Padding::Zero, 4).unwrap();
        let support = Support::Square(3);
        let offsets = geom.offsets(&support).unwrap();
        let (f, g) = (random_image(1, h, 20), random_image(1, h, 21));
        let s0 = input_kernel_planar(&f, &g, &geom).unwrap();
        let lifted = lifting_planar(&s0, &support, &geom).unwrap();
        let want = direct_lifting(&s0.k_xy, &geom, &offsets);
        assert!(max_abs_diff(&lifted.k_xy, &want) < 1e-13);

        // group convolution: average over rotation shifts, then the same sum
        let n = 4;
        let p = geom.pixels();
        let big = n * p;
        let gc = gconv_planar(&lifted, &support, &geom, true).unwrap();
        let mut direct = vec![0.0; big * big];
        for rt in 0..n {
            for r in 0..n {
                for rp in 0..n {
                    let mut block = vec![0.0; p * p];
                    for t in 0..p {
                        for tp in 0..p {
                            block[t * p + tp] = lifted.k_xy[(((r + rt) % n) * p + t) * big + ((rp + rt) % n) * p + tp];
                        }
                    }
                    // lift the block with the rotation pair (r, r')
                    let g1 = GridGeom::new(h, h, Padding::Zero, 4).unwrap();
                    let full = direct_lifting(&block, &g1, &offsets);
                    for t in 0..p {
                        for tp in 0..p {
                            direct[(r * p + t) * big + rp * p + tp] += full[(r * p + t) * big + rp * p + tp] / n as f64;
                        }
                    }
                }
            }
        }
        assert!(max_abs_diff(&gc.k_xy, &direct) < 1e-13);
    }
}

#[test]
fn single_rotation_gcnn_equals_cnn() {
    for nonlin in [NonlinKind::Relu, NonlinKind::Erf] {
        let (f, g) = (random_image(2, 5, 30), random_image(2, 5, 31));
        let a = run_pipeline(
            &ArchitectureSpec::gcnn(3, Support::Square(3), nonlin, 1, Padding::Circular),
            &Input::Image(f.clone()),
            &Input::Image(g.clone()),
        )
        .unwrap();
        let b = run_pipeline(&ArchitectureSpec::cnn(3, Support::Square(3), nonlin, Padding::Circular), &Input::Image(f), &Input::Image(g))
            .unwrap();
        assert!((a.k_xy[0] - b.k_xy[0]).abs() < 1e-14);
        assert!((a.theta[0] - b.theta[0]).abs() < 1e-14);
    }
}

#[test]
fn pooled_gcnn_kernel_is_invariant() {
    let spec = ArchitectureSpec::gcnn(3, Support::Square(3), NonlinKind::Relu, 4, Padding::Circular);
    let (f, g) = (random_image(2, 5, 40), random_image(2, 5, 41));
    let base = run_pipeline(&spec, &Input::Image(f.clone()), &Input::Image(g.clone())).unwrap();
    for q in 1..4 {
        let fr = f.rotated(q).unwrap().shifted(1, -2);
        let gr = g.shifted(2, 0).rotated(3).unwrap();
        let s = run_pipeline(&spec, &Input::Image(fr), &Input::Image(gr)).unwrap();
        assert!((s.k_xy[0] - base.k_xy[0]).abs() < 1e-12);
        assert!((s.theta[0] - base.theta[0]).abs() < 1e-12);
    }
    // a CNN is only translation invariant
    let cnn = ArchitectureSpec::cnn(3, Support::Square(3), NonlinKind::Relu, Padding::Circular);
    let c0 = run_pipeline(&cnn, &Input::Image(f.clone()), &Input::Image(g.clone())).unwrap();
    let c1 = run_pipeline(&cnn, &Input::Image(f.shifted(1, 1)), &Input::Image(g.clone())).unwrap();
    assert!((c0.k_xy[0] - c1.k_xy[0]).abs() < 1e-12);
}

#[test]
fn pooled_self_values_are_exact() {
    // a nonlinearity after pooling must see exact pooled self-kernels
    let spec = ArchitectureSpec::classifier_gcnn(4);
    let f = random_image(1, 4, 50);
    let s = run_pipeline(&spec, &Input::Image(f.clone()), &Input::Image(f.clone())).unwrap();
    assert!((s.k_xx[0] - s.k_xy[0]).abs() < 1e-12);
    assert!((s.k_yy[0] - s.k_xy[0]).abs() < 1e-12);
    // Cauchy–Schwarz on a pair
    let g = random_image(1, 4, 51);
    let p = run_pipeline(&spec, &Input::Image(f), &Input::Image(g)).unwrap();
    assert!(p.k_xy[0].abs() <= (p.k_xx[0] * p.k_yy[0]).sqrt() + 1e-12);
}

#[test]
fn rejects_bad_geometry() {
    let geom = GridGeom::square(4, 4).unwrap();
    let f = random_image(1, 4, 1);
    let s0 = input_kernel_planar(&f, &f, &geom).unwrap();
    let lifted = lifting_planar(&s0, &Support::Square(3), &geom).unwrap();
    assert!(gconv_planar(&lifted, &Support::Offsets(vec![[0, 0], [0, 1]]), &geom, true).is_err());
    assert!(gconv_planar(&lifted, &Support::Offsets(vec![[0, 0], [0, 1]]), &geom, false).is_ok());
    assert!(lifting_planar(&lifted, &Support::Square(3), &geom).is_err());
    assert!(FiniteGroup::new(GridGeom::new(4, 4, Padding::Zero, 4).unwrap()).is_err());
}
