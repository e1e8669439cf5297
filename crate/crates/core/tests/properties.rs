use arnold_stab_core::field::p_apply;
use arnold_stab_core::functionals::{stream_energy_casimir, young_gap};
use arnold_stab_core::gfunc::{legendre, GFunc};
use arnold_stab_core::grid::{neg_laplacian, stiffness};
use arnold_stab_core::harmonic::solve_basis;
use arnold_stab_core::rearrange::{hl_assign, histogram_distance, random_swaps, swaps_within};
use arnold_stab_core::steady::steady_picard;
use arnold_stab_core::{CirculationVector, GridDomain, ScalarField};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sorted(f: &ScalarField) -> Vec<u64> {
    let mut v: Vec<u64> = f.interior_values().iter().map(|x| x.to_bits()).collect();
    v.sort_unstable();
    v
}

fn sample_field(d: &std::sync::Arc<GridDomain>) -> ScalarField {
    ScalarField::from_fn(d, |x, y| (3.0 * x).sin() + 0.5 * y * y - 0.2 * x * y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn samples_are_exact_rearrangements(seed in any::<u64>(), k in 0usize..60) {
        let d = GridDomain::annulus(1.0, 2.0, 8).unwrap();
        let w0 = sample_field(&d);
        let s = random_swaps(&w0, k, seed, 2.0);
        prop_assert_eq!(sorted(&s.w), sorted(&w0));
        prop_assert_eq!(histogram_distance(&s.w, &w0, 32).unwrap(), 0.0);
        let b = swaps_within(&w0, 0.05, 30, seed, 2.0);
        prop_assert_eq!(sorted(&b.w), sorted(&w0));
        prop_assert!(b.distance_lp < 0.05);
    }

    #[test]
    fn coupling_ignores_labels_of_tied_cells(vals in prop::collection::vec(-3i32..3, 1..9), ties in prop::collection::vec(0i32..3, 1..9)) {
        let n = vals.len().min(ties.len());
        let v: Vec<f64> = vals[..n].iter().map(|x| *x as f64).collect();
        let w: Vec<f64> = ties[..n].iter().map(|x| *x as f64).collect();
        let out = hl_assign(&v, &w).unwrap();
        // Values within one tie class may be permuted, but the class multiset
        // and the coupling sum are fixed.
        let mut rev: Vec<usize> = (0..n).collect();
        rev.reverse();
        let w_rev: Vec<f64> = rev.iter().map(|&i| w[i]).collect();
        let out_rev = hl_assign(&v, &w_rev).unwrap();
        let sum: f64 = out.iter().zip(&w).map(|(a, b)| a * b).sum();
        let sum_rev: f64 = out_rev.iter().zip(&w_rev).map(|(a, b)| a * b).sum();
        prop_assert_eq!(sum, sum_rev);
        for level in 0..3 {
            let mut a: Vec<f64> = (0..n).filter(|&i| w[i] == level as f64).map(|i| out[i]).collect();
            let mut b: Vec<f64> = (0..n).filter(|&i| w_rev[i] == level as f64).map(|i| out_rev[i]).collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn young_gap_is_nonnegative(s in -6.0f64..6.0, tau in -6.0f64..6.0) {
        let g = GFunc::tabulated(vec![-1.0, 0.0, 1.0, 2.0], vec![-0.5, 0.0, 1.0, 1.5]).unwrap();
        let g = arnold_stab_core::gfunc::extend_g(&g, -1.0, 2.0).unwrap();
        let lp = legendre(&g).unwrap();
        prop_assert!(young_gap(&lp, s, tau).unwrap() >= -1e-9);
    }
}

/// Every permutation of `v`, by Heap's algorithm.
fn for_each_permutation(v: &mut [f64], f: &mut impl FnMut(&[f64])) {
    let n = v.len();
    let mut c = vec![0usize; n];
    f(v);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                v.swap(0, i);
            } else {
                v.swap(c[i], i);
            }
            f(v);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

fn multisets(alphabet: &[f64], n: usize) -> Vec<Vec<f64>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = vec![];
    for (i, a) in alphabet.iter().enumerate() {
        for mut rest in multisets(&alphabet[i..], n - 1) {
            rest.insert(0, *a);
            out.push(rest);
        }
    }
    out
}

#[test]
fn coupling_matches_permutation_maximum() {
    // Small integers keep every sum exact, so equality is bitwise.
    let alphabet = [-2.0, 0.0, 1.0, 3.0];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for n in 1..=8 {
        let targets: Vec<Vec<f64>> = (0..2).map(|_| (0..n).map(|_| rng.gen_range(-2..4) as f64).collect()).collect();
        for w in &targets {
            for ms in multisets(&alphabet, n) {
                let hl = hl_assign(&ms, w).unwrap();
                let hl_sum: f64 = hl.iter().zip(w).map(|(a, b)| a * b).sum();
                let mut best = f64::NEG_INFINITY;
                let mut perm = ms.clone();
                for_each_permutation(&mut perm, &mut |p| {
                    let s: f64 = p.iter().zip(w).map(|(a, b)| a * b).sum();
                    best = best.max(s);
                });
                assert_eq!(hl_sum, best, "multiset {ms:?}, target {w:?}");
            }
        }
    }
}

#[test]
fn stream_functional_is_sandwiched_by_curvature_bounds() {
    let d = GridDomain::annulus(1.0, 2.0, 12).unwrap();
    let basis = solve_basis(&d, 1e-12).unwrap();
    let g = GFunc::tabulated(vec![-1.0, 0.0, 1.0, 2.0], vec![-0.5, 0.0, 1.0, 1.5]).unwrap();
    let a = CirculationVector::new(vec![0.5]);
    let state = steady_picard(&basis, &g, &a, None, 400, 1e-12, 0.7).unwrap();
    assert!(state.certified);
    let lp = legendre(&state.g).unwrap();
    let (gmin, gmax) = state.g.slope_bounds();
    let h0 = stream_energy_casimir(&ScalarField::zeros(&d), &lp, &state).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for scale in [1e-2, 1e-1, 1.0] {
        let noise = ScalarField::from_interior(&d, &(0..d.n_interior()).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
        // P maps into the zero-flux space, so the first variation vanishes.
        let phi = p_apply(&basis, &noise).scale(scale);
        let lap = neg_laplacian(&phi);
        let l2: f64 = d.interior_slots().iter().map(|&s| lap.get(s as usize).powi(2)).sum::<f64>() * d.h() * d.h();
        let q = 0.5 * stiffness(&phi, &phi);
        let dh = stream_energy_casimir(&phi, &lp, &state).unwrap() - h0;
        let slack = 1e-9 * (q.abs() + l2 / gmin);
        assert!(dh <= q - 0.5 * l2 / gmax + slack, "upper bound, scale {scale}");
        assert!(dh >= q - 0.5 * l2 / gmin - slack, "lower bound, scale {scale}");
    }
}
