//! The solution operator `T: w ↦ u` of `Δ²u = w` with `u = Bu = 0` on the
//! boundary, discretized by finite differences and factorized once.
//!
//! * Navier (`u = Δu = 0`): `Δ²` is realized as `A·A` with `A` the 5-point
//!   `−Δ` matrix under homogeneous Dirichlet conditions. `T` is two nested
//!   Poisson solves. `A` is an irreducible M-matrix, so `A⁻¹` and `T` are
//!   entrywise positive.
//! * Dirichlet (`u = ∂u/∂ν = 0`): the 13-point stencil of `Δ_h∘Δ_h`, with the
//!   ghost value beyond each boundary node reflected (`u_ghost = u_interior`).
//!   The reflection only adds `1/h⁴` to the diagonal of the first interior
//!   row or column on each side, so the matrix stays symmetric positive
//!   definite. No positivity of `T` is claimed for this case.

use crate::banded::{BandCholesky, BandMatrix};
use crate::error::{Error, Result};
use crate::grid::{BoundaryCondition, Field, Grid2D};

/// Relative residual every linear solve aims for.
pub const SOLVE_TARGET: f64 = 1e-12;
/// Relative residual above which a solve is reported as failed.
pub const SOLVE_FAILURE: f64 = 1e-8;
const MAX_REFINEMENTS: usize = 2;

#[derive(Clone, Debug)]
struct Factored {
    matrix: BandMatrix,
    chol: BandCholesky,
}

impl Factored {
    fn new(matrix: BandMatrix, grid: &Grid2D) -> Result<Self> {
        let chol = matrix.cholesky().map_err(|e| match e {
            Error::Factorization { pivot, value, .. } => Error::Factorization {
                grid: grid.to_string(),
                pivot,
                value,
            },
            other => other,
        })?;
        Ok(Self { matrix, chol })
    }

    /// Solve `M x = b`, refining while the relative residual exceeds the
    /// target. Returns the achieved relative residual.
    fn solve(&self, b: &[f64]) -> (Vec<f64>, f64) {
        let bnorm = norm2(b);
        let mut x = b.to_vec();
        self.chol.solve_in_place(&mut x);
        if bnorm == 0.0 {
            return (x, 0.0);
        }
        let mut r = vec![0.0; b.len()];
        let mut rel = self.residual(b, &x, &mut r) / bnorm;
        for _ in 0..MAX_REFINEMENTS {
            if rel <= SOLVE_TARGET {
                break;
            }
            self.chol.solve_in_place(&mut r);
            let candidate: Vec<f64> = x.iter().zip(&r).map(|(a, d)| a + d).collect();
            let mut r2 = vec![0.0; b.len()];
            let rel2 = self.residual(b, &candidate, &mut r2) / bnorm;
            if rel2 >= rel {
                break;
            }
            x = candidate;
            r = r2;
            rel = rel2;
        }
        (x, rel)
    }

    fn residual(&self, b: &[f64], x: &[f64], r: &mut [f64]) -> f64 {
        self.matrix.mul_vec(x, r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        norm2(r)
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Clone, Debug)]
enum Kind {
    /// `T = A⁻¹ A⁻¹`.
    Navier(Factored),
    /// `T = B⁻¹` with `B` the clamped 13-point matrix.
    Dirichlet(Factored),
}

/// Factorized discrete realization of `T` for one grid.
#[derive(Clone, Debug)]
pub struct BiharmonicInverse {
    grid: Grid2D,
    kind: Kind,
}

/// Assemble the 5-point `−Δ_h` with homogeneous Dirichlet conditions.
pub fn assemble_neg_laplacian(grid: &Grid2D) -> BandMatrix {
    let (nx, ny) = (grid.nx(), grid.ny());
    let cx = 1.0 / (grid.hx() * grid.hx());
    let cy = 1.0 / (grid.hy() * grid.hy());
    let mut a = BandMatrix::zeros(grid.len(), nx);
    for j in 0..ny {
        for i in 0..nx {
            let k = grid.index(i, j);
            a.add(k, k, 2.0 * cx + 2.0 * cy);
            if i > 0 {
                a.add(k, k - 1, -cx);
            }
            if j > 0 {
                a.add(k, k - nx, -cy);
            }
        }
    }
    a
}

/// Assemble the clamped-plate 13-point matrix of `Δ_h∘Δ_h`.
pub fn assemble_clamped_biharmonic(grid: &Grid2D) -> BandMatrix {
    let (nx, ny) = (grid.nx(), grid.ny());
    let ax = 1.0 / grid.hx().powi(4);
    let ay = 1.0 / grid.hy().powi(4);
    let axy = 1.0 / (grid.hx() * grid.hx() * grid.hy() * grid.hy());
    let mut b = BandMatrix::zeros(grid.len(), 2 * nx);
    for j in 0..ny {
        for i in 0..nx {
            let k = grid.index(i, j);
            let mut diag = 6.0 * ax + 6.0 * ay + 8.0 * axy;
            // ghost reflection across each adjacent boundary
            if i == 0 {
                diag += ax;
            }
            if i == nx - 1 {
                diag += ax;
            }
            if j == 0 {
                diag += ay;
            }
            if j == ny - 1 {
                diag += ay;
            }
            b.add(k, k, diag);
            // lower-triangle couplings only; `add` mirrors them
            if i >= 1 {
                b.add(k, k - 1, -4.0 * ax - 4.0 * axy);
            }
            if i >= 2 {
                b.add(k, k - 2, ax);
            }
            if j >= 1 {
                b.add(k, k - nx, -4.0 * ay - 4.0 * axy);
                if i >= 1 {
                    b.add(k, k - nx - 1, 2.0 * axy);
                }
                if i + 1 < nx {
                    b.add(k, k - nx + 1, 2.0 * axy);
                }
            }
            if j >= 2 {
                b.add(k, k - 2 * nx, ay);
            }
        }
    }
    b
}

impl BiharmonicInverse {
    pub fn build(grid: &Grid2D) -> Result<Self> {
        let kind = match grid.bc() {
            BoundaryCondition::Navier => Kind::Navier(Factored::new(assemble_neg_laplacian(grid), grid)?),
            BoundaryCondition::Dirichlet => {
                Kind::Dirichlet(Factored::new(assemble_clamped_biharmonic(grid), grid)?)
            }
        };
        Ok(Self { grid: *grid, kind })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// `u = Tw`, together with the worst relative residual of the linear
    /// solves involved.
    pub fn apply_with_residual(&self, w: &Field) -> Result<(Field, f64)> {
        self.grid.check_same(w.grid())?;
        let (u, res) = match &self.kind {
            Kind::Navier(a) => {
                let (y, r1) = a.solve(w.values());
                let (u, r2) = a.solve(&y);
                (u, r1.max(r2))
            }
            Kind::Dirichlet(b) => b.solve(w.values()),
        };
        if !(res <= SOLVE_FAILURE) {
            return Err(Error::LinearSolve { residual: res });
        }
        Ok((Field::from_raw(self.grid, u), res))
    }

    pub fn apply(&self, w: &Field) -> Result<Field> {
        self.apply_with_residual(w).map(|(u, _)| u)
    }

    /// `∫ w1 · T w2 dx`.
    pub fn bilinear(&self, w1: &Field, w2: &Field) -> Result<f64> {
        self.grid.check_same(w1.grid())?;
        let u = self.apply(w2)?;
        Ok(w1.inner_unchecked(&u))
    }

    /// Apply the discrete `Δ²` (the matrix that `T` inverts).
    pub fn apply_biharmonic(&self, u: &Field) -> Result<Field> {
        self.grid.check_same(u.grid())?;
        let n = self.grid.len();
        let out = match &self.kind {
            Kind::Navier(a) => {
                let mut y = vec![0.0; n];
                let mut z = vec![0.0; n];
                a.matrix.mul_vec(u.values(), &mut y);
                a.matrix.mul_vec(&y, &mut z);
                z
            }
            Kind::Dirichlet(b) => {
                let mut z = vec![0.0; n];
                b.matrix.mul_vec(u.values(), &mut z);
                z
            }
        };
        Ok(Field::from_raw(self.grid, out))
    }

    /// Discrete `−Δ_h u` with zero boundary values (5-point).
    pub fn apply_neg_laplacian(&self, u: &Field) -> Result<Field> {
        self.grid.check_same(u.grid())?;
        let mut y = vec![0.0; self.grid.len()];
        match &self.kind {
            Kind::Navier(a) => a.matrix.mul_vec(u.values(), &mut y),
            Kind::Dirichlet(_) => assemble_neg_laplacian(&self.grid).mul_vec(u.values(), &mut y),
        }
        Ok(Field::from_raw(self.grid, y))
    }

    /// Discrete `½∫|Δu|² dx`.
    ///
    /// Navier uses the 5-point Laplacian directly. For the clamped plate the
    /// quadratic form `½⟨u, Δ²_h u⟩` is used, which includes the ghost-node
    /// boundary contributions and coincides with `½⟨w, Tw⟩` when `u = Tw`.
    pub fn dirichlet_energy(&self, u: &Field) -> Result<f64> {
        match self.grid.bc() {
            BoundaryCondition::Navier => {
                let lu = self.apply_neg_laplacian(u)?;
                Ok(0.5 * lu.inner_unchecked(&lu))
            }
            BoundaryCondition::Dirichlet => {
                let bu = self.apply_biharmonic(u)?;
                Ok(0.5 * u.inner_unchecked(&bu))
            }
        }
    }
}

/// Smallest eigenvalue of the 5-point `−Δ_h` on the grid, attained by the
/// discrete mode `sin(πx/lx)·sin(πy/ly)`.
pub fn discrete_sine_eigenvalue(grid: &Grid2D) -> f64 {
    let sx = (std::f64::consts::PI * grid.hx() / (2.0 * grid.lx())).sin();
    let sy = (std::f64::consts::PI * grid.hy() / (2.0 * grid.ly())).sin();
    4.0 / (grid.hx() * grid.hx()) * sx * sx + 4.0 / (grid.hy() * grid.hy()) * sy * sy
}

/// The discrete sine mode `sin(πx/lx)·sin(πy/ly)` sampled on the grid.
pub fn sine_mode(grid: &Grid2D) -> Field {
    let (lx, ly) = (grid.lx(), grid.ly());
    Field::from_fn(*grid, |x, y| {
        (std::f64::consts::PI * x / lx).sin() * (std::f64::consts::PI * y / ly).sin()
    })
}
