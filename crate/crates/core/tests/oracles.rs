//! Frozen values from closed forms and from an independent finite-difference
//! computation.

use thw::grid::{Grid, Sector};
use thw::linop::{LinearizedOperators, Which};
use thw::solver::{semi_trivial_wave, solve_weinstein, WeinsteinOptions};
use thw::stability::{self, Tolerances};
use thw::ModelParams;

// Semi-trivial 1D wave at omega = 0.5, mu = 4, sigma = 1:
// alpha = 1.5, beta = 5.5, Q = sqrt(2 beta) / 3 sech(sqrt(beta) x).
const MASS: f64 = 3.126943839882286; // (4 sigma / 3) sqrt(beta)
const KINETIC: f64 = 1.9109101243725082; // 4 beta^{3/2} / 27
const WITNESS: f64 = -137.58552895482057; // -162 int Q^4 = -(32/3) beta^{3/2}
const U_BLOCK_GROUND: f64 = 0.8888888888888888; // alpha - beta / 9
const Q_BLOCK_GROUND: f64 = -16.5; // -3 beta

// Growth rate of the 3D scalar cubic ground state at unit frequency, from a
// Petviashvili solve and dense eigenproblem on uniform grids (h = 0.01 and
// 0.00667), Richardson-extrapolated.
const SCALAR_3D_GROWTH: f64 = 5.49907;

fn semi_trivial() -> thw::WaveProfile {
    let params = ModelParams::new(1, 0.5, 4.0, 1.0).unwrap();
    semi_trivial_wave(Grid::radial_spectral(1, 128, 24.0).unwrap(), &params).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn semi_trivial_mass_and_kinetic() {
    let w = semi_trivial();
    assert!(rel(w.mass, MASS) < 1e-10, "{}", w.mass);
    let kinetic = thw::model::kinetic(w.grid(), w.p.values(), w.q.values()).unwrap();
    assert!(rel(kinetic, KINETIC) < 1e-10, "{kinetic}");
}

#[test]
fn witness_matches_quartic_integral() {
    let w = semi_trivial();
    let ops = LinearizedOperators::new(&w);
    let wit = stability::negative_witness(&ops).unwrap();
    assert!(rel(wit.form, WITNESS) < 1e-9, "{}", wit.form);
    assert!(rel(wit.closed_form, WITNESS) < 1e-9, "{}", wit.closed_form);
}

#[test]
fn h_form_in_one_dimension_is_plus_kinetic() {
    let w = semi_trivial();
    let c = stability::h_certificate(&LinearizedOperators::new(&w)).unwrap();
    assert!(rel(c.form, KINETIC) < 1e-9, "{}", c.form);
    assert!(rel(c.expected, KINETIC) < 1e-10);
}

#[test]
fn l_plus_bound_states_of_the_semi_trivial_wave() {
    let w = semi_trivial();
    let ops = LinearizedOperators::new(&w);
    let ktol = Tolerances::default().kernel * ops.potential_scale();
    let even = ops.spectrum(Which::Plus, Sector::Angular(0), 2, Some(ktol)).unwrap();
    assert!(rel(even.eigenvalues[0], Q_BLOCK_GROUND) < 1e-9, "{:?}", even.eigenvalues);
    assert!(rel(even.eigenvalues[1], U_BLOCK_GROUND) < 1e-9, "{:?}", even.eigenvalues);
    assert_eq!(even.neg_count, 1);
    let odd = ops.spectrum(Which::Plus, Sector::Angular(1), 1, Some(ktol)).unwrap();
    assert_eq!(odd.kernel_dim, 1);
    assert!(odd.eigenvalues[0].abs() < 1e-8, "{:?}", odd.eigenvalues);
}

#[test]
fn three_dimensional_growth_rate() {
    let params = ModelParams::new(3, 0.5, 9.0, 3.0).unwrap();
    let w = solve_weinstein(Grid::radial_spectral(3, 192, 20.0).unwrap(), &params, &WeinsteinOptions::default())
        .unwrap()
        .rescale_to_physical(&params)
        .unwrap();
    let ops = LinearizedOperators::new(&w);
    let g = stability::symmetrized_growth_rate(&ops, Sector::Angular(0), &Tolerances::default()).unwrap();
    let scaled = g.rate / (params.beta() / params.sigma);
    assert!((scaled - SCALAR_3D_GROWTH).abs() < 2e-4, "{scaled}");
}
