use proptest::prelude::*;
use wavelab_core::flow::{evolve, functional_fc, step_explicit, EvolutionParams};
use wavelab_core::forcing::{sample, Forcing, Mode};
use wavelab_core::grid::*;
use wavelab_core::variational::eval_gc;

fn grid_strategy() -> impl Strategy<Value = PeriodicGrid> {
    (
        1usize..=2,
        prop_oneof![Just(4usize), Just(8), Just(16), Just(32)],
    )
        .prop_map(|(d, n)| make_grid(d, n).unwrap())
}

fn field(grid: PeriodicGrid, lo: f64, hi: f64) -> impl Strategy<Value = ScalarField<f64>> {
    proptest::collection::vec(lo..hi, grid.node_count())
        .prop_map(move |v| ScalarField::new(grid, v).unwrap())
}

fn grid_and_fields() -> impl Strategy<Value = (ScalarField<f64>, VectorField<f64>)> {
    grid_strategy().prop_flat_map(|grid| {
        let comps = proptest::collection::vec(
            proptest::collection::vec(-1.0..1.0f64, grid.node_count()),
            grid.dimension(),
        );
        (
            field(grid, -1.0, 1.0),
            comps.prop_map(move |c| VectorField::new(grid, c).unwrap()),
        )
    })
}

fn forcing_for(dim: usize) -> impl Strategy<Value = Forcing<f64>> {
    (0.2..2.0f64, -1.0..1.0f64, -1.0..1.0f64, 1i64..3).prop_map(move |(a0, a, b, k)| {
        let kv = if dim == 1 { [k, 0] } else { [k, 1] };
        Forcing::new(
            dim,
            a0,
            vec![Mode {
                k: kv,
                cos: a,
                sin: b,
            }],
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_and_divergence_are_adjoint((f, v) in grid_and_fields()) {
        let lhs = dot(divergence(&v).values(), f.values());
        let grad = gradient(&f).unwrap();
        let rhs: f64 = (0..f.grid().dimension()).map(|k| dot(v.component(k), grad.component(k))).sum();
        let scale = f.values().iter().map(|x| x.abs()).sum::<f64>() * f.grid().resolution() as f64 + 1.0;
        prop_assert!((lhs + rhs).abs() <= 1e-12 * scale);
    }

    #[test]
    fn operators_commute_with_shifts((f, v) in grid_and_fields(), a in 0usize..64, b in 0usize..64) {
        let off = [a, b];
        let g1 = gradient(&f.cyclic_shift(off)).unwrap();
        let g2 = gradient(&f).unwrap().cyclic_shift(off);
        prop_assert_eq!(g1.components(), g2.components());
        let d1 = divergence(&v.cyclic_shift(off));
        let d2 = divergence(&v).cyclic_shift(off);
        prop_assert_eq!(d1.values(), d2.values());
    }

    #[test]
    fn perimeter_is_shift_invariant(
        (grid, bits) in grid_strategy().prop_flat_map(|g| (Just(g), proptest::collection::vec(any::<bool>(), g.node_count()))),
        a in 0usize..64,
        b in 0usize..64,
    ) {
        let m = SupportMask::new(grid, bits).unwrap();
        let p: f64 = perimeter_indicator(&m);
        prop_assert_eq!(p, perimeter_indicator::<f64>(&m.cyclic_shift([a, b])));
    }

    #[test]
    fn gc_is_positively_one_homogeneous(
        (psi, g) in grid_strategy().prop_flat_map(|grid| (field(grid, 0.0, 2.0), field(grid, -1.0, 2.0))),
        c in 0.1..3.0f64,
    ) {
        let base = eval_gc(&psi, &g, c).unwrap();
        for k in [0.0, 0.5, 2.0, 10.0] {
            let scaled = eval_gc(&psi.map(|v| k * v).unwrap(), &g, c).unwrap();
            prop_assert!((scaled - k * base).abs() <= 1e-12 * (1.0 + k * base.abs()));
        }
    }

    #[test]
    fn fc_is_gc_after_change_of_variables(
        (w, g) in grid_strategy().prop_flat_map(|grid| (field(grid, -2.0, 2.0), field(grid, -1.0, 2.0))),
        c in 0.1..3.0f64,
    ) {
        let f = functional_fc(&w, &g, c).unwrap();
        let big = w.map(|v| (c * v).exp() / c).unwrap();
        let gc = eval_gc(&big, &g, c).unwrap();
        prop_assert!((f - gc).abs() <= 1e-10 * (1.0 + gc.abs()));
    }

    #[test]
    fn evolution_commutes_with_vertical_shifts(
        (u0, g) in grid_strategy().prop_flat_map(|grid| (field(grid, -0.5, 0.5), forcing_for(grid.dimension()))),
        k in -10.0..10.0f64,
        c in 0.0..2.0f64,
    ) {
        let mut params = EvolutionParams::new(c, 0.05);
        params.snapshot_stride = 50;
        let a = evolve(&u0, &g, &params).unwrap();
        let b = evolve(&u0.map(|v| v + k).unwrap(), &g, &params).unwrap();
        for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
            for (p, q) in x.values().iter().zip(y.values()) {
                prop_assert!((q - p - k).abs() <= 1e-12 * (1.0 + k.abs()) * 64.0);
            }
        }
        let gs = sample(&g, u0.grid()).unwrap();
        let s1 = step_explicit(&u0, &gs, c, 1e-5).unwrap();
        let s2 = step_explicit(&u0.map(|v| v + k).unwrap(), &gs, c, 1e-5).unwrap();
        for (p, q) in s1.values().iter().zip(s2.values()) {
            prop_assert!((q - p - k).abs() <= 1e-12 * (1.0 + k.abs()) * 64.0);
        }
    }
}
