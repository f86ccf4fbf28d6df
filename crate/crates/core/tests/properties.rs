use biharm_dual::{project_nodal, project_ray, BoundaryCondition, DualContext, Field, Grid2D, Nonlinearity, Term};
use proptest::prelude::*;

fn bc_strategy() -> impl Strategy<Value = BoundaryCondition> {
    prop_oneof![Just(BoundaryCondition::Navier), Just(BoundaryCondition::Dirichlet)]
}

fn nl_strategy() -> impl Strategy<Value = Nonlinearity> {
    prop::collection::vec((0.1..3.0_f64, 2.2..7.0_f64), 1..4)
        .prop_map(|ts| Nonlinearity::new(ts.into_iter().map(|(a, p)| Term { a, p }).collect()).unwrap())
}

/// Exponents near 2 push the Nehari scale past the bracket cap (the scaling
/// exponent is p/(p − 2)), so projection properties use moderate ones.
fn moderate_nl() -> impl Strategy<Value = Nonlinearity> {
    prop::collection::vec((0.5..3.0_f64, 3.5..7.0_f64), 1..4)
        .prop_map(|ts| Nonlinearity::new(ts.into_iter().map(|(a, p)| Term { a, p }).collect()).unwrap())
}

fn ctx(n: usize, bc: BoundaryCondition, nl: Nonlinearity) -> DualContext {
    DualContext::new(Grid2D::unit_square(n, bc).unwrap(), nl).unwrap()
}

fn field(g: Grid2D, vals: &[f64]) -> Field {
    Field::new(g, vals[..g.len()].to_vec()).unwrap()
}

fn values(lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, 49)
}

/// Mirror `x ↦ L − x` on node values.
fn mirror(w: &Field) -> Field {
    let g = *w.grid();
    let mut out = vec![0.0; g.len()];
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            out[g.index(g.nx() - 1 - i, j)] = w.values()[g.index(i, j)];
        }
    }
    Field::new(g, out).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn psi_is_even(bc in bc_strategy(), nl in nl_strategy(), v in values(-200.0, 200.0)) {
        let c = ctx(7, bc, nl);
        let w = field(*c.grid(), &v);
        prop_assert_eq!(c.psi(&w).unwrap(), c.psi(&w.scale(-1.0)).unwrap());
    }

    #[test]
    fn t_is_symmetric_and_positive(bc in bc_strategy(), a in values(-1.0, 1.0), b in values(-1.0, 1.0)) {
        let c = ctx(7, bc, Nonlinearity::pure_power(4.0).unwrap());
        let (a, b) = (field(*c.grid(), &a), field(*c.grid(), &b));
        let ab = c.bilinear_t(&a, &b).unwrap();
        let ba = c.bilinear_t(&b, &a).unwrap();
        let (aa, bb) = (c.bilinear_t(&a, &a).unwrap(), c.bilinear_t(&b, &b).unwrap());
        prop_assert!((ab - ba).abs() <= 1e-12 * (aa * bb).sqrt());
        prop_assert!(aa > 0.0 && bb > 0.0);
    }

    #[test]
    fn hinged_t_preserves_positivity(v in values(0.0, 1.0), k in 0usize..49) {
        let c = ctx(7, BoundaryCondition::Navier, Nonlinearity::pure_power(4.0).unwrap());
        let mut v = v;
        v[k] += 0.5;
        let tw = c.apply_t(&field(*c.grid(), &v)).unwrap();
        prop_assert!(tw.values().iter().all(|&x| x > 0.0));
    }

    #[test]
    fn t_commutes_with_mirror(bc in bc_strategy(), v in values(-1.0, 1.0)) {
        let c = ctx(7, bc, Nonlinearity::pure_power(4.0).unwrap());
        let w = field(*c.grid(), &v);
        let lhs = c.apply_t(&mirror(&w)).unwrap();
        let rhs = mirror(&c.apply_t(&w).unwrap());
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() <= 1e-12 * rhs.max_abs());
        prop_assert!(close(c.psi(&mirror(&w)).unwrap(), c.psi(&w).unwrap(), 1e-12));
    }

    #[test]
    fn ray_projection_scales_inversely(bc in bc_strategy(), nl in moderate_nl(), v in values(-10.0, 10.0), c0 in 0.1..10.0_f64) {
        let c = ctx(7, bc, nl);
        let w = field(*c.grid(), &v);
        prop_assume!(w.max_abs() > 0.1);
        let t = project_ray(&c, &w).unwrap();
        let tc = project_ray(&c, &w.scale(c0)).unwrap();
        prop_assert!(close(tc, t / c0, 1e-9), "{} vs {}", tc, t / c0);
    }

    #[test]
    fn nodal_projection_scales_each_part(
        nl in moderate_nl(),
        v in values(-10.0, 10.0),
        cp in 0.1..10.0_f64,
        cm in 0.1..10.0_f64,
    ) {
        let c = ctx(7, BoundaryCondition::Navier, nl);
        let w = field(*c.grid(), &v);
        let (p, m) = w.split();
        prop_assume!(!p.is_zero() && !m.is_zero());
        let base = project_nodal(&c, &w, 1e-12).unwrap();
        let scaled = project_nodal(&c, &p.lin_comb(cp, &m, cm).unwrap(), 1e-12).unwrap();
        prop_assert!(close(scaled.t, base.t / cp, 1e-7), "t {} vs {}", scaled.t, base.t / cp);
        prop_assert!(close(scaled.s, base.s / cm, 1e-7), "s {} vs {}", scaled.s, base.s / cm);
    }

    #[test]
    fn split_recomposes(v in values(-5.0, 5.0)) {
        let w = field(Grid2D::unit_square(7, BoundaryCondition::Navier).unwrap(), &v);
        let (p, m) = w.split();
        prop_assert_eq!(p.add(&m).unwrap(), w);
        prop_assert!(p.values().iter().all(|&x| x >= 0.0));
        prop_assert!(m.values().iter().all(|&x| x <= 0.0));
        prop_assert!(p.values().iter().zip(m.values()).all(|(a, b)| *a == 0.0 || *b == 0.0));
    }

    #[test]
    fn h_is_increasing_and_odd(nl in nl_strategy(), a in -1e4..1e4_f64, b in -1e4..1e4_f64) {
        prop_assume!(a != b);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(nl.h(lo).unwrap() < nl.h(hi).unwrap());
        prop_assert_eq!(nl.h(-a).unwrap(), -nl.h(a).unwrap());
    }
}
