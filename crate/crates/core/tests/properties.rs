use approx::assert_relative_eq;
use proptest::prelude::*;
use ssf_core::eigencount::{count_leq, dense_spectrum, relative_count, spectrum_count};
use ssf_core::laplace_convergence::{uniformity_profile, IndexedFamily};
use ssf_core::lattice::{assemble_operator, build_grid, shift_potential, DirichletOperator, PotentialField};
use ssf_core::ssf::{delta_average, ssf_curve, uniform_probe, Probe, SsfCurve};

const CAP: usize = 4096;

#[derive(Clone, Debug)]
struct Setup {
    dim: usize,
    half_cells: usize,
    mesh: f64,
    scale: f64,
    amplitude: f64,
    ell: f64,
}

fn setup() -> impl Strategy<Value = Setup> {
    (1usize..=2, 0usize..3, -1.0f64..1.0, -3.0f64..3.0, 1usize..4).prop_flat_map(
        |(dim, mesh_k, scale, amplitude, ell)| {
            let mesh = if dim == 1 { [1.0, 0.5, 0.25][mesh_k] } else { [1.0, 0.5, 0.5][mesh_k] };
            let min_half = (ell as f64 / mesh / 2.0).ceil() as usize + 1;
            let max_half = if dim == 1 { 24 } else { min_half + 3 };
            (min_half..=max_half.max(min_half)).prop_map(move |half_cells| Setup {
                dim,
                half_cells,
                mesh,
                scale,
                amplitude,
                ell: ell as f64,
            })
        },
    )
}

impl Setup {
    fn edge(&self) -> f64 {
        2.0 * self.half_cells as f64 * self.mesh
    }

    fn background(&self) -> PotentialField {
        PotentialField::cosine_series(self.scale, vec![1.0, 1.0], vec![1.0; self.dim])
    }

    fn perturbation(&self) -> PotentialField {
        PotentialField::box_indicator(self.dim, self.amplitude, self.ell)
    }

    fn pair_at(&self, edge: f64) -> (DirichletOperator, DirichletOperator) {
        let grid = build_grid(self.dim, edge, self.mesh).unwrap();
        let u = self.background();
        let v = self.perturbation();
        let h0 = assemble_operator(&grid, Some(&u), None).unwrap();
        let h1 = assemble_operator(&grid, Some(&u), Some(&v)).unwrap();
        (h1, h0)
    }

    fn pair(&self) -> (DirichletOperator, DirichletOperator) {
        self.pair_at(self.edge())
    }
}

fn near_any(spectrum: &[f64], e: f64, gap: f64) -> bool {
    spectrum.iter().any(|l| (l - e).abs() < gap)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn operator_is_symmetric_and_spectrum_inside_gershgorin(s in setup()) {
        let (h1, h0) = s.pair();
        for op in [&h0, &h1] {
            prop_assert!(op.matrix.is_symmetric());
            let (lo, hi) = op.matrix.gershgorin();
            let spec = dense_spectrum(op, CAP).unwrap();
            let slack = 1e-9 * (1.0 + hi.abs());
            prop_assert!(spec[0] >= lo - slack && *spec.last().unwrap() <= hi + slack);
        }
    }

    #[test]
    fn sylvester_count_agrees_with_dense(s in setup(), frac in 0.0f64..1.0) {
        let (h1, _) = s.pair();
        let spec = dense_spectrum(&h1, CAP).unwrap();
        let (lo, hi) = h1.matrix.gershgorin();
        let e = lo - 0.5 + frac * (hi - lo + 1.0);
        prop_assume!(!near_any(&spec, e, 1e-7 * (1.0 + hi.abs())));
        let c = count_leq(&h1, e).unwrap();
        prop_assert_eq!(c.count, spectrum_count(&spec, e));
        prop_assert!(!c.coincident);
    }

    #[test]
    fn count_is_monotone_in_energy(s in setup(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (h1, _) = s.pair();
        let (lo, hi) = h1.matrix.gershgorin();
        let (e1, e2) = (lo + a.min(b) * (hi - lo), lo + a.max(b) * (hi - lo));
        prop_assert!(count_leq(&h1, e1).unwrap().count <= count_leq(&h1, e2).unwrap().count);
    }

    #[test]
    fn dirichlet_monotonicity_in_box_size(s in setup(), extra in 1usize..3, frac in 0.0f64..1.0) {
        // both grids contain x = 0 and nest, so the small operator is a
        // principal submatrix of the large one
        let small = s.pair().1;
        let large = s.pair_at(s.edge() + 2.0 * extra as f64 * s.mesh).1;
        let spec_s = dense_spectrum(&small, CAP).unwrap();
        let spec_l = dense_spectrum(&large, CAP).unwrap();
        for (k, l) in spec_s.iter().enumerate() {
            prop_assert!(spec_l[k] <= l + 1e-9 * (1.0 + l.abs()));
        }
        let (lo, hi) = small.matrix.gershgorin();
        let e = lo + frac * (hi - lo);
        prop_assert!(spectrum_count(&spec_l, e) >= spectrum_count(&spec_s, e));
    }

    #[test]
    fn sign_and_rank_bound_of_the_shift(s in setup(), frac in 0.0f64..1.0) {
        let (h1, h0) = s.pair();
        let (lo, hi) = h1.matrix.gershgorin();
        let e = lo + frac * (hi - lo);
        let spec0 = dense_spectrum(&h0, CAP).unwrap();
        let spec1 = dense_spectrum(&h1, CAP).unwrap();
        let xi = spectrum_count(&spec0, e) as i64 - spectrum_count(&spec1, e) as i64;
        let rank = h1.matrix.diagonal().iter().zip(h0.matrix.diagonal()).filter(|(a, b)| *a != b).count() as i64;
        prop_assert!(xi.abs() <= rank);
        if s.amplitude >= 0.0 {
            prop_assert!(xi >= 0);
        } else {
            prop_assert!(xi <= 0);
        }
        if !near_any(&spec0, e, 1e-7 * (1.0 + hi.abs())) && !near_any(&spec1, e, 1e-7 * (1.0 + hi.abs())) {
            prop_assert_eq!(relative_count(&h1, &h0, e).unwrap().value, xi);
        }
    }

    #[test]
    fn mirrored_shifts_have_equal_spectra(s in setup(), k in 1i64..=2) {
        // even background on a symmetric grid: V(· − y) and V(· + y) are mirror images
        let grid = build_grid(s.dim, s.edge() + 2.0 * k as f64 + 2.0 * s.mesh, s.mesh).unwrap();
        let u = s.background();
        let y = vec![k as f64; s.dim];
        let minus: Vec<f64> = y.iter().map(|c| -c).collect();
        let a = assemble_operator(&grid, Some(&u), Some(&shift_potential(&s.perturbation(), &y).unwrap())).unwrap();
        let b = assemble_operator(&grid, Some(&u), Some(&shift_potential(&s.perturbation(), &minus).unwrap())).unwrap();
        let sa = dense_spectrum(&a, CAP).unwrap();
        let sb = dense_spectrum(&b, CAP).unwrap();
        for (x, y) in sa.iter().zip(&sb) {
            assert_relative_eq!(*x, *y, epsilon = 1e-9, max_relative = 1e-12);
        }
    }

    #[test]
    fn background_is_periodic(s in setup(), x in prop::collection::vec(-10.0f64..10.0, 2), k in -3i64..=3) {
        let u = s.background();
        let x = &x[..s.dim];
        let moved: Vec<f64> = x.iter().map(|c| c + k as f64).collect();
        assert_relative_eq!(u.value(x), u.value(&moved), epsilon = 1e-12);
    }

    #[test]
    fn delta_average_is_between_extremes(s in setup(), frac in 0.0f64..1.0, delta in 0.01f64..2.0) {
        let (h1, h0) = s.pair();
        let SsfCurve::Exact(curve) = ssf_curve(&h1, &h0, &Probe::Exact, CAP).unwrap() else { unreachable!() };
        let (lo, hi) = h1.matrix.gershgorin();
        let e = lo + frac * (hi - lo);
        let avg = delta_average(&SsfCurve::Exact(curve.clone()), e, delta).unwrap();
        let (min, max) = curve.min_max_on(e, e + delta);
        prop_assert!(avg >= min as f64 - 1e-9 && avg <= max as f64 + 1e-9);
    }

    #[test]
    fn exact_and_sampled_curves_agree_off_eigenvalues(s in setup()) {
        let (h1, h0) = s.pair();
        let (lo, hi) = h1.matrix.gershgorin();
        let energies = uniform_probe(lo - 0.1, hi + 0.1, 37);
        let exact = ssf_curve(&h1, &h0, &Probe::Exact, CAP).unwrap();
        let SsfCurve::Sampled(sampled) = ssf_curve(&h1, &h0, &Probe::Grid(energies.clone()), CAP).unwrap() else { unreachable!() };
        let spec0 = dense_spectrum(&h0, CAP).unwrap();
        let spec1 = dense_spectrum(&h1, CAP).unwrap();
        for (i, e) in energies.iter().enumerate() {
            let gap = 1e-7 * (1.0 + hi.abs());
            if near_any(&spec0, *e, gap) || near_any(&spec1, *e, gap) {
                continue;
            }
            prop_assert!(!sampled.coincident[i]);
            prop_assert_eq!(Some(sampled.values[i]), exact.value_at(*e));
        }
    }

    #[test]
    fn uniformity_profile_ignores_choice_order(
        rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 1..6), 1..5),
        reference in -1.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let ns: Vec<f64> = (0..rows.len()).map(|i| (i + 1) as f64).collect();
        let f = IndexedFamily::new(ns.clone(), rows.clone()).unwrap();
        let permuted: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let mut r = r.clone();
                let k = (seed as usize) % r.len();
                r.rotate_left(k);
                r.reverse();
                r
            })
            .collect();
        let g = IndexedFamily::new(ns, permuted).unwrap();
        prop_assert_eq!(uniformity_profile(&f, reference), uniformity_profile(&g, reference));
    }

    #[test]
    fn uniformity_profile_grows_with_more_choices(
        rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 1..6), 1..5),
        extra in -5.0f64..5.0,
        reference in -1.0f64..1.0,
    ) {
        let ns: Vec<f64> = (0..rows.len()).map(|i| (i + 1) as f64).collect();
        let f = IndexedFamily::new(ns.clone(), rows.clone()).unwrap();
        let more: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().copied().chain([extra]).collect()).collect();
        let g = IndexedFamily::new(ns, more).unwrap();
        for (a, b) in uniformity_profile(&f, reference).iter().zip(uniformity_profile(&g, reference)) {
            prop_assert!(b.1 >= a.1);
        }
    }
}
