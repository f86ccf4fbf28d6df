//! Rectangular-domain discretization and nodal fields.
//!
//! Only interior nodes are stored. Both supported boundary conditions impose
//! `u = 0` on the boundary, so boundary values are implicitly zero. Nodes are
//! ordered row-major with `x` fastest: node `(i, j)` has index `j * nx + i`
//! and sits at `((i + 1) hx, (j + 1) hy)`.
//!
//! Integrals are plain scaled nodal sums taken in index order. Keeping one
//! fixed summation order means `inner(a, b)` and `inner(b, a)` are bitwise
//! identical.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    /// Hinged plate: `u = Δu = 0`.
    Navier,
    /// Clamped plate: `u = ∂u/∂ν = 0`.
    Dirichlet,
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryCondition::Navier => f.write_str("navier"),
            BoundaryCondition::Dirichlet => f.write_str("dirichlet"),
        }
    }
}

impl std::str::FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "navier" => Ok(BoundaryCondition::Navier),
            "dirichlet" | "clamped" => Ok(BoundaryCondition::Dirichlet),
            other => Err(Error::InvalidGrid(format!(
                "unknown boundary condition {other:?} (expected navier or dirichlet)"
            ))),
        }
    }
}

/// Uniform grid on `[0, lx] × [0, ly]` with `nx × ny` interior nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    hx: f64,
    hy: f64,
    bc: BoundaryCondition,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, bc: BoundaryCondition) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 interior nodes per axis, got {nx}x{ny}"
            )));
        }
        if !(lx.is_finite() && lx > 0.0 && ly.is_finite() && ly > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "side lengths must be positive and finite, got {lx} x {ly}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            hx: lx / (nx + 1) as f64,
            hy: ly / (ny + 1) as f64,
            bc,
        })
    }

    /// Unit square with `n × n` interior nodes.
    pub fn unit_square(n: usize, bc: BoundaryCondition) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0, bc)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of a single node.
    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn coords(&self, k: usize) -> (f64, f64) {
        let (i, j) = (k % self.nx, k / self.nx);
        ((i + 1) as f64 * self.hx, (j + 1) as f64 * self.hy)
    }

    pub(crate) fn check_same(&self, other: &Grid2D) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::IncompatibleGrids)
        }
    }
}

impl fmt::Display for Grid2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{} {} grid on [0,{}]x[0,{}]",
            self.nx, self.ny, self.bc, self.lx, self.ly
        )
    }
}

/// Real values on the interior nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid2D,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::FieldLength {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self { grid, values })
    }

    /// Build without validation; callers guarantee length and finiteness.
    pub(crate) fn from_raw(grid: Grid2D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self::from_raw(grid, vec![0.0; grid.len()])
    }

    pub fn constant(grid: Grid2D, c: f64) -> Self {
        Self::from_raw(grid, vec![c; grid.len()])
    }

    /// Sample `g(x, y)` at every interior node.
    pub fn from_fn(grid: Grid2D, mut g: impl FnMut(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let (x, y) = grid.coords(k);
                g(x, y)
            })
            .collect();
        Self::from_raw(grid, values)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, mut g: impl FnMut(f64) -> f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|&v| g(v)).collect())
    }

    pub fn try_map<E>(&self, mut g: impl FnMut(f64) -> std::result::Result<f64, E>) -> std::result::Result<Field, E> {
        let values = self.values.iter().map(|&v| g(v)).collect::<std::result::Result<_, _>>()?;
        Ok(Field::from_raw(self.grid, values))
    }

    pub fn scale(&self, t: f64) -> Field {
        self.map(|v| t * v)
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        self.grid.check_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Field::from_raw(self.grid, values))
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.lin_comb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.lin_comb(1.0, other, -1.0)
    }

    /// `hx·hy·Σ values`, summed in index order.
    pub fn integrate(&self) -> f64 {
        self.grid.cell_area() * self.values.iter().sum::<f64>()
    }

    /// Discrete `∫ self·other dx`.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self.inner_unchecked(other))
    }

    pub(crate) fn inner_unchecked(&self, other: &Field) -> f64 {
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        self.grid.cell_area() * s
    }

    /// Pointwise `(max(w, 0), min(w, 0))`.
    pub fn split(&self) -> (Field, Field) {
        let plus = self.map(|v| if v > 0.0 { v } else { 0.0 });
        let minus = self.map(|v| if v < 0.0 { v } else { 0.0 });
        (plus, minus)
    }

    /// `(hx·hy·Σ|w|^r)^(1/r)`.
    pub fn lp_norm(&self, r: f64) -> Result<f64> {
        if !(r >= 1.0) {
            return Err(Error::InvalidExponent(r));
        }
        let s: f64 = if r == 2.0 {
            self.values.iter().map(|v| v * v).sum()
        } else {
            self.values.iter().map(|v| v.abs().powf(r)).sum()
        };
        Ok((self.grid.cell_area() * s).powf(1.0 / r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g3() -> Grid2D {
        Grid2D::unit_square(3, BoundaryCondition::Navier).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid2D::unit_square(2, BoundaryCondition::Navier).is_err());
        assert!(Grid2D::new(3, 3, 0.0, 1.0, BoundaryCondition::Navier).is_err());
        assert!(Grid2D::new(3, 3, 1.0, f64::NAN, BoundaryCondition::Navier).is_err());
        let g = Grid2D::new(4, 7, 2.0, 3.0, BoundaryCondition::Dirichlet).unwrap();
        assert_eq!(g.hx(), 2.0 / 5.0);
        assert_eq!(g.hy(), 3.0 / 8.0);
        assert_eq!(g.coords(g.index(3, 6)), (4.0 * g.hx(), 7.0 * g.hy()));
    }

    #[test]
    fn field_rejects_bad_input() {
        let g = g3();
        assert!(matches!(Field::new(g, vec![0.0; 8]), Err(Error::FieldLength { .. })));
        let mut v = vec![0.0; 9];
        v[4] = f64::INFINITY;
        assert!(matches!(Field::new(g, v), Err(Error::NonFinite { index: 4, .. })));
    }

    #[test]
    fn integrate_constant_on_unit_square() {
        assert_eq!(Field::zeros(g3()).integrate(), 0.0);
        assert_eq!(Field::constant(g3(), 1.0).integrate(), 0.5625);
    }

    #[test]
    fn inner_requires_same_grid() {
        let other = Grid2D::unit_square(3, BoundaryCondition::Dirichlet).unwrap();
        let a = Field::constant(g3(), 1.0);
        let b = Field::constant(other, 1.0);
        let err = a.inner(&b).unwrap_err();
        assert_eq!(err.to_string(), "incompatible grids");
    }

    #[test]
    fn split_small_example() {
        let g = g3();
        let w = Field::new(g, vec![1.0, -2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let (p, m) = w.split();
        assert_eq!(&p.values()[..3], &[1.0, 0.0, 0.0]);
        assert_eq!(&m.values()[..3], &[0.0, -2.0, 0.0]);
        let pos = Field::constant(g, 0.5);
        assert_eq!(pos.split(), (pos.clone(), Field::zeros(g)));
    }

    #[test]
    fn lp_norm_rejects_small_exponent() {
        assert!(matches!(Field::zeros(g3()).lp_norm(0.5), Err(Error::InvalidExponent(_))));
        assert_eq!(Field::zeros(g3()).lp_norm(4.0 / 3.0).unwrap(), 0.0);
    }

    fn field_strategy() -> impl Strategy<Value = Field> {
        prop::collection::vec(-10.0f64..10.0, 20).prop_map(|v| {
            let g = Grid2D::new(5, 4, 1.3, 0.7, BoundaryCondition::Navier).unwrap();
            Field::new(g, v).unwrap()
        })
    }

    proptest! {
        #[test]
        fn split_invariants(w in field_strategy()) {
            let (p, m) = w.split();
            let rebuilt = p.add(&m).unwrap();
            prop_assert_eq!(rebuilt.values(), w.values());
            for (a, b) in p.values().iter().zip(m.values()) {
                prop_assert_eq!(a * b, 0.0);
            }
            let (pp, pm) = p.split();
            prop_assert_eq!(&pp, &p);
            prop_assert!(pm.is_zero());
            prop_assert!((w.integrate() - (p.integrate() + m.integrate())).abs() <= 1e-12 * (1.0 + w.max_abs()));
        }

        #[test]
        fn inner_symmetric_and_positive(a in field_strategy(), b in field_strategy()) {
            prop_assert_eq!(a.inner(&b).unwrap().to_bits(), b.inner(&a).unwrap().to_bits());
            prop_assert_eq!(a.inner(&Field::zeros(*a.grid())).unwrap(), 0.0);
            let aa = a.inner(&a).unwrap();
            prop_assert!(aa >= 0.0);
            prop_assert_eq!(aa == 0.0, a.is_zero());
            let neg = a.scale(-1.0);
            prop_assert_eq!(neg.integrate(), -a.integrate());
        }

        #[test]
        fn lp_norm_properties(w in field_strategy(), t in -5.0f64..5.0, r in 1.0f64..6.0) {
            let l2 = w.lp_norm(2.0).unwrap();
            prop_assert!((l2 - w.inner(&w).unwrap().sqrt()).abs() <= 1e-12 * (1.0 + l2));
            let n = w.lp_norm(r).unwrap();
            let scaled = w.scale(t).lp_norm(r).unwrap();
            prop_assert!((scaled - t.abs() * n).abs() <= 1e-12 * (1.0 + scaled));
        }
    }
}
