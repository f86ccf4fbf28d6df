//! The dual functional `Ψ(w) = ∫H(w) − ½∫w·Tw`, its gradient, and the primal
//! energy `I(u) = ½∫|Δu|² − ∫F(u)` used to cross-check critical points.
//!
//! Critical points of `Ψ` satisfy `Tw = h(w)`, so `u = Tw` solves
//! `Δ²u = f(u)` and `Ψ(w) = I(u)`. Convergence is measured on the
//! equivalent residual `w − f(Tw)`, which avoids evaluating `h` near its
//! infinite slope at 0.

use serde::Serialize;

use crate::biharmonic::BiharmonicInverse;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid2D};
use crate::nonlinearity::Nonlinearity;

/// The triple `(Ω_h, T, f)` that defines `Ψ`.
#[derive(Clone, Debug)]
pub struct DualContext {
    grid: Grid2D,
    op: BiharmonicInverse,
    nl: Nonlinearity,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    pub psi: f64,
    pub primal: f64,
    /// `|Ψ(w) − I(Tw)|`.
    pub gap: f64,
    /// `‖w − f(Tw)‖ / ‖w‖` in the dual `L^{p/(p−1)}` norm.
    pub residual: f64,
    /// Set for `w = 0`, where the residual is reported unnormalized.
    pub trivial: bool,
}

impl EnergyReport {
    pub fn relative_gap(&self) -> f64 {
        self.gap / (1.0 + self.psi.abs())
    }
}

impl DualContext {
    /// Build the operator for `grid` and check the nonlinearity hypotheses.
    pub fn new(grid: Grid2D, nl: Nonlinearity) -> Result<Self> {
        let diag = nl.validate();
        if !diag.all_passed() {
            let failed: Vec<_> = diag.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
            return Err(Error::InvalidNonlinearity(format!(
                "hypothesis checks failed: {}",
                failed.join(", ")
            )));
        }
        let op = BiharmonicInverse::build(&grid)?;
        Ok(Self { grid, op, nl })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn op(&self) -> &BiharmonicInverse {
        &self.op
    }

    pub fn nl(&self) -> &Nonlinearity {
        &self.nl
    }

    pub fn apply_t(&self, w: &Field) -> Result<Field> {
        self.op.apply(w)
    }

    pub fn bilinear_t(&self, w1: &Field, w2: &Field) -> Result<f64> {
        self.op.bilinear(w1, w2)
    }

    /// `∫ H(w) dx`.
    pub fn integral_h_primitive(&self, w: &Field) -> Result<f64> {
        let mut s = 0.0;
        for &v in w.values() {
            s += self.nl.h_primitive(v)?;
        }
        Ok(self.grid.cell_area() * s)
    }

    pub fn psi(&self, w: &Field) -> Result<f64> {
        let tw = self.apply_t(w)?;
        self.psi_with(w, &tw)
    }

    /// `Ψ(w)` given a precomputed `Tw`.
    pub fn psi_with(&self, w: &Field, tw: &Field) -> Result<f64> {
        Ok(self.integral_h_primitive(w)? - 0.5 * w.inner(tw)?)
    }

    /// Nodal gradient `h(w) − Tw`, so that `Ψ′(w)η = ⟨grad, η⟩`.
    pub fn grad_psi(&self, w: &Field) -> Result<Field> {
        let tw = self.apply_t(w)?;
        self.grad_psi_with(w, &tw)
    }

    pub fn grad_psi_with(&self, w: &Field, tw: &Field) -> Result<Field> {
        w.try_map(|v| self.nl.h(v))?.sub(tw)
    }

    /// `I(u) = ½∫|Δu|² − ∫F(u)`.
    pub fn primal_energy(&self, u: &Field) -> Result<f64> {
        let quad = self.op.dirichlet_energy(u)?;
        Ok(quad - u.map(|v| self.nl.f_primitive(v)).integrate())
    }

    /// `I(Tw)` using `∫|ΔTw|² = ∫w·Tw`.
    pub fn primal_energy_of_tw(&self, w: &Field, tw: &Field) -> Result<f64> {
        Ok(0.5 * w.inner(tw)? - tw.map(|v| self.nl.f_primitive(v)).integrate())
    }

    /// `w − f(Tw)`.
    pub fn dual_defect(&self, w: &Field, tw: &Field) -> Result<Field> {
        w.sub(&tw.map(|v| self.nl.f(v)))
    }

    /// `‖w − f(Tw)‖ / ‖w‖` in the `L^{p/(p−1)}` norm; the numerator alone when `w = 0`.
    pub fn dual_residual(&self, w: &Field, tw: &Field) -> Result<f64> {
        let r = self.nl.dual_exponent();
        let num = self.dual_defect(w, tw)?.lp_norm(r)?;
        let den = w.lp_norm(r)?;
        Ok(if den > 0.0 { num / den } else { num })
    }

    pub fn energy_report(&self, w: &Field) -> Result<EnergyReport> {
        let tw = self.apply_t(w)?;
        self.energy_report_with(w, &tw)
    }

    pub fn energy_report_with(&self, w: &Field, tw: &Field) -> Result<EnergyReport> {
        let psi = self.psi_with(w, tw)?;
        let primal = self.primal_energy_of_tw(w, tw)?;
        Ok(EnergyReport {
            psi,
            primal,
            gap: (psi - primal).abs(),
            residual: self.dual_residual(w, tw)?,
            trivial: w.is_zero(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biharmonic::{discrete_sine_eigenvalue, sine_mode};
    use crate::grid::BoundaryCondition;
    use crate::nonlinearity::Term;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ctx(n: usize, bc: BoundaryCondition) -> DualContext {
        DualContext::new(
            Grid2D::unit_square(n, bc).unwrap(),
            Nonlinearity::pure_power(4.0).unwrap(),
        )
        .unwrap()
    }

    fn random_field(g: Grid2D, rng: &mut ChaCha8Rng, scale: f64) -> Field {
        Field::new(g, (0..g.len()).map(|_| scale * rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn zero_state() {
        let c = ctx(5, BoundaryCondition::Navier);
        let z = Field::zeros(*c.grid());
        assert_eq!(c.psi(&z).unwrap(), 0.0);
        assert!(c.grad_psi(&z).unwrap().is_zero());
        assert_eq!(c.primal_energy(&z).unwrap(), 0.0);
        let r = c.energy_report(&z).unwrap();
        assert_eq!((r.psi, r.primal, r.gap, r.residual), (0.0, 0.0, 0.0, 0.0));
        assert!(r.trivial);
    }

    #[test]
    fn psi_is_even() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for bc in [BoundaryCondition::Navier, BoundaryCondition::Dirichlet] {
            let c = ctx(9, bc);
            let w = random_field(*c.grid(), &mut rng, 50.0);
            let a = c.psi(&w).unwrap();
            let b = c.psi(&w.scale(-1.0)).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs());
        }
    }

    #[test]
    fn psi_decreases_along_long_rays() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = ctx(9, BoundaryCondition::Navier);
        let w = random_field(*c.grid(), &mut rng, 1.0);
        // ∫wTw is tiny for rough fields, so the ray turns over late
        let p10 = c.psi(&w.scale(1e7)).unwrap();
        let p100 = c.psi(&w.scale(1e8)).unwrap();
        let p1000 = c.psi(&w.scale(1e9)).unwrap();
        assert!(p1000 < p100 && p100 < p10, "{p10} {p100} {p1000}");
        assert!(p1000 < 0.0);
    }

    #[test]
    fn directional_derivative_matches_central_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let nl = Nonlinearity::new(vec![Term { a: 1.0, p: 4.0 }, Term { a: 0.5, p: 6.0 }]).unwrap();
        let c = DualContext::new(Grid2D::unit_square(7, BoundaryCondition::Dirichlet).unwrap(), nl).unwrap();
        for _ in 0..5 {
            // keep |w| away from 0 where h is not smooth
            let w = random_field(*c.grid(), &mut rng, 1.0).map(|v| v.signum() * (0.5 + 1.5 * v.abs()) * 200.0);
            let eta = random_field(*c.grid(), &mut rng, 1.0);
            let e = 1e-5;
            let fd = (c.psi(&w.lin_comb(1.0, &eta, e).unwrap()).unwrap()
                - c.psi(&w.lin_comb(1.0, &eta, -e).unwrap()).unwrap())
                / (2.0 * e);
            let an = c.grad_psi(&w).unwrap().inner(&eta).unwrap();
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-12), "{fd} vs {an}");
        }
    }

    #[test]
    fn primal_energy_of_sine_mode() {
        let g = Grid2D::unit_square(15, BoundaryCondition::Navier).unwrap();
        let c = DualContext::new(g, Nonlinearity::pure_power(4.0).unwrap()).unwrap();
        let u = sine_mode(&g);
        let lam = discrete_sine_eigenvalue(&g);
        let expected = 0.5 * lam * lam * u.values().iter().map(|v| v * v).sum::<f64>() * g.cell_area();
        let quad = c.op().dirichlet_energy(&u).unwrap();
        assert!((quad - expected).abs() <= 1e-12 * expected);
        let f_part = u.map(|v| v.powi(4) / 4.0).integrate();
        assert!((c.primal_energy(&u).unwrap() - (expected - f_part)).abs() <= 1e-10 * expected);
    }

    #[test]
    fn primal_routes_agree_for_tw() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for bc in [BoundaryCondition::Navier, BoundaryCondition::Dirichlet] {
            let c = ctx(8, bc);
            let w = random_field(*c.grid(), &mut rng, 100.0);
            let tw = c.apply_t(&w).unwrap();
            let a = c.primal_energy(&tw).unwrap();
            let b = c.primal_energy_of_tw(&w, &tw).unwrap();
            assert!((a - b).abs() <= 1e-9 * (a.abs() + b.abs()));
            let half = 0.5 * w.inner(&tw).unwrap();
            let bil = 0.5 * c.bilinear_t(&w, &w).unwrap();
            assert!((half - bil).abs() <= 1e-12 * half.abs());
        }
    }

    #[test]
    fn integrated_dual_identity() {
        // ∫H(w) = ∫w·h(w) − ∫F(h(w)); at a critical point h(w) = Tw and Ψ = I
        let g = Grid2D::unit_square(9, BoundaryCondition::Navier).unwrap();
        let c = ctx(9, BoundaryCondition::Navier);
        let w = sine_mode(&g).scale(30.0);
        let hw = w.try_map(|v| c.nl().h(v)).unwrap();
        let lhs = c.integral_h_primitive(&w).unwrap();
        let rhs = w.inner(&hw).unwrap() - hw.map(|v| c.nl().f_primitive(v)).integrate();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs());
    }

    #[test]
    fn invalid_nonlinearity_is_rejected_by_context() {
        let g = Grid2D::unit_square(5, BoundaryCondition::Navier).unwrap();
        assert!(Nonlinearity::pure_power(2.0).is_err());
        assert!(DualContext::new(g, Nonlinearity::pure_power(3.0).unwrap()).is_ok());
    }
}
