//! Brute-force reference implementations for testing `biharm-dual`.
//!
//! Nothing here is fast or clever on purpose. The dense operator is built
//! from Kronecker products of 1D difference matrices and inverted with a
//! dense factorization, so it shares no code with the banded production
//! path.

use biharm_dual::{BoundaryCondition, DualContext, Field, Grid2D, Nonlinearity};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Largest number of interior nodes a dense operator is built for.
pub const MAX_DENSE_NODES: usize = 289;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("grid has {nodes} nodes, dense oracle is capped at {MAX_DENSE_NODES}")]
    GridTooLarge { nodes: usize },
    #[error("dense biharmonic matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Core(#[from] biharm_dual::Error),
}

pub type Result<T> = std::result::Result<T, OracleError>;

/// `T = (Δ²_h)⁻¹` as an explicit matrix.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    grid: Grid2D,
    matrix: DMatrix<f64>,
}

/// 1D `−d²/dx²` with homogeneous Dirichlet ends on `n` interior nodes.
fn second_difference(n: usize, h: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => 2.0 / (h * h),
        1 => -1.0 / (h * h),
        _ => 0.0,
    })
}

/// 1D clamped `d⁴/dx⁴`: the square of the second difference plus the even
/// ghost reflection `u₋₁ = u₁` at each end, which adds `2/h⁴` to the first
/// and last diagonal entries.
fn clamped_fourth_difference(n: usize, h: f64) -> DMatrix<f64> {
    let l = second_difference(n, h);
    let mut m = &l * &l;
    let h4 = h.powi(4);
    m[(0, 0)] += 2.0 / h4;
    m[(n - 1, n - 1)] += 2.0 / h4;
    m
}

/// Dense `Δ²_h` for either boundary condition, node index `j·nx + i`.
pub fn dense_biharmonic(grid: &Grid2D) -> DMatrix<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let ix = DMatrix::<f64>::identity(nx, nx);
    let iy = DMatrix::<f64>::identity(ny, ny);
    let lx = second_difference(nx, grid.hx());
    let ly = second_difference(ny, grid.hy());
    match grid.bc() {
        BoundaryCondition::Navier => {
            let a = iy.kronecker(&lx) + ly.kronecker(&ix);
            &a * &a
        }
        BoundaryCondition::Dirichlet => {
            let dx4 = clamped_fourth_difference(nx, grid.hx());
            let dy4 = clamped_fourth_difference(ny, grid.hy());
            iy.kronecker(&dx4) + ly.kronecker(&lx) * 2.0 + dy4.kronecker(&ix)
        }
    }
}

/// Invert the dense `Δ²_h` column by column.
#[allow(non_snake_case)]
pub fn dense_T(grid: &Grid2D) -> Result<DenseOperator> {
    let n = grid.len();
    if n > MAX_DENSE_NODES {
        return Err(OracleError::GridTooLarge { nodes: n });
    }
    let b = dense_biharmonic(grid);
    let chol = b.cholesky().ok_or(OracleError::NotPositiveDefinite)?;
    Ok(DenseOperator {
        grid: *grid,
        matrix: chol.inverse(),
    })
}

impl DenseOperator {
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, w: &Field) -> Result<Field> {
        if w.grid() != &self.grid {
            return Err(OracleError::InvalidArgument("field lives on another grid".into()));
        }
        let v = &self.matrix * DVector::from_column_slice(w.values());
        Ok(Field::new(self.grid, v.as_slice().to_vec())?)
    }

    /// `max |M − Mᵀ|` over entries.
    pub fn symmetry_defect(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    pub fn min_entry(&self) -> f64 {
        self.matrix.min()
    }

    pub fn max_entry(&self) -> f64 {
        self.matrix.max()
    }

    /// `Ψ(w)` with the quadratic part taken from the dense matrix and `H`
    /// from Simpson quadrature.
    pub fn psi(&self, nl: &Nonlinearity, w: &Field) -> Result<f64> {
        let tw = self.apply(w)?;
        let area = self.grid.cell_area();
        let mut h_int = 0.0;
        let mut quad = 0.0;
        for (&x, &y) in w.values().iter().zip(tw.values()) {
            h_int += quad_H(nl, x, 256)?;
            quad += x * y;
        }
        Ok(area * (h_int - 0.5 * quad))
    }
}

/// `H(t) = ∫₀ᵗ h(s) ds` by composite Simpson in the variable `s = |t|x³`.
///
/// The substitution turns the `s^{1/(p−1)}` cusp of `h` at 0 into a smooth
/// integrand `3|t|x²h(|t|x³)` on `[0, 1]`.
#[allow(non_snake_case)]
pub fn quad_H(nl: &Nonlinearity, t: f64, n_panels: usize) -> Result<f64> {
    if n_panels < 64 {
        return Err(OracleError::InvalidArgument(format!("n_panels must be at least 64, got {n_panels}")));
    }
    let n = n_panels + n_panels % 2;
    let a = t.abs();
    if a == 0.0 {
        return Ok(0.0);
    }
    let g = |x: f64| -> Result<f64> { Ok(3.0 * a * x * x * nl.h(a * x * x * x)?) };
    let dx = 1.0 / n as f64;
    let mut sum = g(0.0)? + g(1.0)?;
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * g(k as f64 * dx)?;
    }
    Ok(sum * dx / 3.0)
}

/// Central differences of `Ψ` node by node, divided by the cell area so the
/// result is comparable with the nodal gradient `h(w) − Tw`.
///
/// The step at node `k` is `ε·max(1, |w_k|)`.
pub fn fd_gradient(ctx: &DualContext, w: &Field, eps: f64) -> Result<Field> {
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(OracleError::InvalidArgument(format!("eps must lie in [1e-7, 1e-3], got {eps}")));
    }
    let grid = *ctx.grid();
    let mut out = vec![0.0; grid.len()];
    let mut vals = w.values().to_vec();
    for k in 0..vals.len() {
        let orig = vals[k];
        let step = eps * orig.abs().max(1.0);
        vals[k] = orig + step;
        let up = ctx.psi(&Field::new(grid, vals.clone())?)?;
        vals[k] = orig - step;
        let down = ctx.psi(&Field::new(grid, vals.clone())?)?;
        vals[k] = orig;
        out[k] = (up - down) / (2.0 * step) / grid.cell_area();
    }
    Ok(Field::new(grid, out)?)
}

/// Grid-scan maximizer of the fibering map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberingScan {
    pub t: f64,
    pub s: f64,
    pub value: f64,
    /// Spacing of the scan grid along `t` and `s`.
    pub cell_t: f64,
    pub cell_s: f64,
    /// Whether the maximizer sits on the boundary of the box.
    pub on_boundary: bool,
}

impl FiberingScan {
    /// Distance from `(t, s)` to the scan maximizer, in cells, taking the
    /// larger of the two axes.
    pub fn cells_from(&self, t: f64, s: f64) -> f64 {
        ((self.t - t).abs() / self.cell_t).max((self.s - s).abs() / self.cell_s)
    }
}

/// Evaluate `Ψ(tv⁺ + sv⁻)` on a `resolution × resolution` grid over
/// `t_range × s_range` and return the largest sample. Ties go to the first
/// sample in `(t, s)` lexicographic order.
pub fn scan_fibering(
    ctx: &DualContext,
    v: &Field,
    t_range: (f64, f64),
    s_range: (f64, f64),
    resolution: usize,
) -> Result<FiberingScan> {
    if resolution < 50 {
        return Err(OracleError::InvalidArgument(format!("resolution must be at least 50, got {resolution}")));
    }
    for (lo, hi) in [t_range, s_range] {
        if !(lo >= 0.0 && hi > lo) {
            return Err(OracleError::InvalidArgument(format!("bad range [{lo}, {hi}]")));
        }
    }
    let nl = ctx.nl();
    let grid = *ctx.grid();
    let plus = v.map(|x| x.max(0.0));
    let minus = v.map(|x| x.min(0.0));
    let t_plus = ctx.apply_t(&plus)?;
    let t_minus = ctx.apply_t(&minus)?;
    let cell_t = (t_range.1 - t_range.0) / (resolution - 1) as f64;
    let cell_s = (s_range.1 - s_range.0) / (resolution - 1) as f64;
    let mut best = FiberingScan {
        t: t_range.0,
        s: s_range.0,
        value: f64::NEG_INFINITY,
        cell_t,
        cell_s,
        on_boundary: true,
    };
    for a in 0..resolution {
        let t = t_range.0 + a as f64 * cell_t;
        for b in 0..resolution {
            let s = s_range.0 + b as f64 * cell_s;
            let mut acc = 0.0;
            for k in 0..grid.len() {
                let w = t * plus.values()[k] + s * minus.values()[k];
                let tw = t * t_plus.values()[k] + s * t_minus.values()[k];
                acc += nl.h_primitive(w)? - 0.5 * w * tw;
            }
            let value = grid.cell_area() * acc;
            if value > best.value {
                let edge = |i: usize| i == 0 || i == resolution - 1;
                best = FiberingScan {
                    t,
                    s,
                    value,
                    cell_t,
                    cell_s,
                    on_boundary: edge(a) || edge(b),
                };
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_large_grids_and_bad_arguments() {
        let g = Grid2D::unit_square(18, BoundaryCondition::Navier).unwrap();
        assert!(matches!(dense_T(&g), Err(OracleError::GridTooLarge { nodes: 324 })));
        let nl = Nonlinearity::pure_power(4.0).unwrap();
        assert!(quad_H(&nl, 1.0, 32).is_err());
        let ctx = DualContext::new(Grid2D::unit_square(3, BoundaryCondition::Navier).unwrap(), nl).unwrap();
        let w = Field::constant(*ctx.grid(), 1.0);
        assert!(fd_gradient(&ctx, &w, 1e-2).is_err());
        assert!(scan_fibering(&ctx, &w, (0.1, 2.0), (0.1, 2.0), 10).is_err());
        assert!(scan_fibering(&ctx, &w, (0.1, 2.0), (2.0, 1.0), 60).is_err());
    }

    #[test]
    fn clamped_1d_stencil() {
        let m = clamped_fourth_difference(5, 1.0);
        assert_eq!(m[(0, 0)], 7.0);
        assert_eq!(m[(2, 2)], 6.0);
        assert_eq!(m[(0, 1)], -4.0);
        assert_eq!(m[(0, 2)], 1.0);
    }
}
