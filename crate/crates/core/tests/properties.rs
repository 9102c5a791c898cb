use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use proptest::prelude::*;

use thw::dynamics::{evolve, EvolveOptions, FieldState};
use thw::grid::{rearrange_decreasing, Grid, Sector};
use thw::linop::{LinearizedOperators, Which};
use thw::solver::{solve_weinstein, WeinsteinOptions};
use thw::model;
use thw::{ModelParams, WaveProfile};

fn grid() -> Arc<Grid> {
    Grid::periodic(1, 64, 8.0).unwrap()
}

fn params() -> ModelParams {
    ModelParams::new(1, 0.5, 9.0, 3.0).unwrap()
}

/// Sum of Gaussian bumps with complex amplitudes.
fn bumps(g: &Grid, b: &[(f64, f64, f64, f64)]) -> Vec<Complex64> {
    g.coordinates(0)
        .iter()
        .map(|&x| {
            b.iter()
                .map(|&(c, w, re, im)| Complex64::new(re, im) * (-((x - c) / w).powi(2)).exp())
                .sum()
        })
        .collect()
}

fn bump() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (-3.0..3.0f64, 0.5..2.0f64, -1.0..1.0f64, -1.0..1.0f64)
}

fn field() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    prop::collection::vec(bump(), 1..4)
}

fn radial_wave() -> &'static WaveProfile {
    static W: OnceLock<WaveProfile> = OnceLock::new();
    W.get_or_init(|| {
        let p = ModelParams::new(2, 0.5, 100.0, 3.0).unwrap();
        solve_weinstein(Grid::radial_spectral(2, 64, 12.0).unwrap(), &p, &WeinsteinOptions::default())
            .unwrap()
            .rescale_to_physical(&p)
            .unwrap()
    })
}

fn radial_bumps(g: &Grid, b: &[(f64, f64, f64, f64)]) -> Vec<f64> {
    g.radii().iter().map(|&r| b.iter().map(|&(c, w, a, _)| a * (-((r - c.abs()) / w).powi(2)).exp()).sum()).collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

fn cyclic_dirichlet(f: &[f64]) -> f64 {
    (0..f.len()).map(|i| (f[(i + 1) % f.len()] - f[i]).powi(2)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn functionals_are_gauge_invariant(a in field(), b in field(), theta in -3.2..3.2f64) {
        let g = grid();
        let (u, v) = (bumps(&g, &a), bumps(&g, &b));
        let s = FieldState::new(g.clone(), u, v, params()).unwrap();
        let r = s.gauge(theta);
        let (l0, l1) = (s.ledger().unwrap(), r.ledger().unwrap());
        prop_assert!(close(l0.mass, l1.mass, 1e-12));
        prop_assert!(close(l0.potential, l1.potential, 1e-12));
        prop_assert!(close(l0.energy, l1.energy, 1e-11));
        prop_assert!(close(l0.kinetic, l1.kinetic, 1e-12));
    }

    #[test]
    fn functionals_are_homogeneous(a in field(), b in field(), lambda in 0.1..3.0f64) {
        let g = grid();
        let (u, v) = (bumps(&g, &a), bumps(&g, &b));
        let (su, sv): (Vec<_>, Vec<_>) = (u.iter().map(|z| z * lambda).collect(), v.iter().map(|z| z * lambda).collect());
        let p = params();
        let l2 = lambda * lambda;
        prop_assert!(close(model::mass(&g, &su, &sv, &p).unwrap(), l2 * model::mass(&g, &u, &v, &p).unwrap(), 1e-12));
        prop_assert!(close(model::kinetic(&g, &su, &sv).unwrap(), l2 * model::kinetic(&g, &u, &v).unwrap(), 1e-12));
        prop_assert!(close(model::potential(&g, &su, &sv).unwrap(), l2 * l2 * model::potential(&g, &u, &v).unwrap(), 1e-12));
    }

    #[test]
    fn rearrangement_is_equimeasurable(a in field()) {
        let g = grid();
        let f: Vec<f64> = bumps(&g, &a).iter().map(|z| z.re).collect();
        let r = rearrange_decreasing(&g, &f);
        let mut x: Vec<f64> = f.iter().map(|v| v.abs()).collect();
        let mut y = r.clone();
        x.sort_by(f64::total_cmp);
        y.sort_by(f64::total_cmp);
        prop_assert_eq!(x, y);
        let radii = g.radii();
        for i in 0..r.len() {
            for j in 0..r.len() {
                if radii[i] < radii[j] {
                    prop_assert!(r[i] >= r[j]);
                }
            }
        }
    }

    #[test]
    fn rearrangement_lowers_the_dirichlet_sum(a in field()) {
        let g = grid();
        let f: Vec<f64> = bumps(&g, &a).iter().map(|z| z.norm()).collect();
        let r = rearrange_decreasing(&g, &f);
        prop_assert!(cyclic_dirichlet(&r) <= cyclic_dirichlet(&f) * (1.0 + 1e-12));
    }

    #[test]
    fn rearrangement_raises_the_quartic_term(a in field(), b in field()) {
        let g = grid();
        let f: Vec<f64> = bumps(&g, &a).iter().map(|z| z.norm()).collect();
        let h: Vec<f64> = bumps(&g, &b).iter().map(|z| z.norm()).collect();
        let (fr, hr) = (rearrange_decreasing(&g, &f), rearrange_decreasing(&g, &h));
        let before = model::potential(&g, &f, &h).unwrap();
        let after = model::potential(&g, &fr, &hr).unwrap();
        prop_assert!(after >= before * (1.0 - 1e-12));
    }

    #[test]
    fn flow_commutes_with_the_gauge(a in field(), b in field(), theta in -3.2..3.2f64) {
        let g = grid();
        let s = FieldState::new(g.clone(), bumps(&g, &a), bumps(&g, &b), params()).unwrap();
        let opts = EvolveOptions { t_end: 0.05, dt: 1e-3, sample_every: 0.05, ..EvolveOptions::default() };
        let mut x = s.gauge(theta);
        evolve(&mut x, &opts).unwrap();
        let mut y = s.clone();
        evolve(&mut y, &opts).unwrap();
        let y = y.gauge(theta);
        let scale = y.u.iter().chain(&y.v).map(|z| z.norm()).fold(0.0, f64::max);
        let d = x.u.iter().zip(&y.u).chain(x.v.iter().zip(&y.v)).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        prop_assert!(d <= 1e-9 * scale, "{d} vs {scale}");
    }

    #[test]
    fn linearized_operators_are_symmetric(a in field(), b in field(), c in field(), d in field(), plus in any::<bool>()) {
        let w = radial_wave();
        let g = w.grid();
        let ops = LinearizedOperators::new(w);
        let which = if plus { Which::Plus } else { Which::Minus };
        let (h1, h2, k1, k2) = (radial_bumps(g, &a), radial_bumps(g, &b), radial_bumps(g, &c), radial_bumps(g, &d));
        let (lh1, lh2) = ops.apply(which, Sector::Angular(0), &h1, &h2).unwrap();
        let (lk1, lk2) = ops.apply(which, Sector::Angular(0), &k1, &k2).unwrap();
        let x = ops.inner((&lh1, &lh2), (&k1, &k2));
        let y = ops.inner((&h1, &h2), (&lk1, &lk2));
        let scale = ops.inner((&lh1, &lh2), (&lh1, &lh2)).sqrt() * ops.inner((&k1, &k2), (&k1, &k2)).sqrt();
        prop_assert!((x - y).abs() <= 1e-10 * scale.max(1e-300), "{x} vs {y}");
    }
}
