//! Projections onto the Nehari set `𝒩 = {w ≠ 0 : Ψ′(w)w = 0}` and the nodal
//! set `ℳ = {w : w^± ≠ 0, Ψ′(w)w⁺ = Ψ′(w)w⁻ = 0}`, and diagnostics of the
//! fibering map `h^v(t, s) = Ψ(tv⁺ + sv⁻)`.
//!
//! Because `v⁺` and `v⁻` have disjoint supports, `h(tv⁺ + sv⁻) = h(tv⁺) +
//! h(sv⁻)` pointwise. Writing `A = ∫v⁺Tv⁺`, `B = ∫v⁺Tv⁻`, `C = ∫v⁻Tv⁻` and
//! `φ±(τ) = ∫h(τv^±)v^±`, the two nodal defects become
//!
//! ```text
//! e₁(t, s) = Ψ′(tv⁺ + sv⁻)v⁺ = φ₊(t) − tA − sB
//! e₂(t, s) = Ψ′(tv⁺ + sv⁻)v⁻ = φ₋(s) − sC − tB
//! ```
//!
//! so after two applications of `T` the whole 2D problem is scalar work.
//! `e₁` is affine in `s` and `e₂` is affine in `t`, which means the sign
//! conditions of Miranda's theorem on the edges of a rectangle in `(t, s)` only
//! need checking at the corners.

use serde::Serialize;

use crate::dual::DualContext;
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::roots::brent;

const BOX_MIN: f64 = 1e-8;
const BOX_MAX: f64 = 1e8;
const ROOT_XTOL: f64 = 1e-13;
const ROOT_MAX_ITER: usize = 200;
const NEWTON_MAX_ITER: usize = 60;

/// Unique `t* > 0` with `Ψ′(t*w)(t*w) = 0`.
pub fn project_ray(ctx: &DualContext, w: &Field) -> Result<f64> {
    let tw = ctx.apply_t(w)?;
    project_ray_with(ctx, w, &tw)
}

/// [`project_ray`] with a precomputed `Tw`.
///
/// Solves `k(t) = ∫h(tw)w/t − ∫wTw = 0`; `k` is strictly decreasing because
/// `h(τ)/τ` is, so the bracket found by halving/doubling holds one root.
pub fn project_ray_with(ctx: &DualContext, w: &Field, tw: &Field) -> Result<f64> {
    let quad = w.inner(tw)?;
    if w.is_zero() || !(quad > 0.0) {
        return Err(Error::RayMissesNehari);
    }
    let nl = ctx.nl();
    let area = ctx.grid().cell_area();
    let nz: Vec<f64> = w.values().iter().copied().filter(|&v| v != 0.0).collect();
    let k = |t: f64| -> Result<f64> {
        let mut s = 0.0;
        for &v in &nz {
            s += nl.h(t * v)? * v;
        }
        Ok(area * s / t - quad)
    };
    match bracketed_root(k) {
        Err(Error::BracketNotFound { .. }) => Err(Error::RayMissesNehari),
        other => other,
    }
}

/// Scale parameters `(t, s)` putting `tv⁺ + sv⁻` on `ℳ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NodalProjection {
    pub t: f64,
    pub s: f64,
    /// Largest relative defect `|Ψ′(w)w^±| / ∫h(w^±)w^±` at `w = tv⁺ + sv⁻`.
    pub residual: f64,
    /// Envelope `[r, R]` of the Miranda box; `r ≤ t, s ≤ R`.
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    /// The Miranda box itself, `t_box × s_box`.
    pub t_box: (f64, f64),
    pub s_box: (f64, f64),
    /// Whether the Newton iteration alone reached the tolerance.
    pub newton_only: bool,
}

/// The positive and negative parts of a sign-changing `v` together with
/// the three coupling integrals. Everything the nodal projection and the
/// fibering map need.
#[derive(Clone, Debug)]
pub struct NodalParts<'a> {
    ctx: &'a DualContext,
    pub plus: Field,
    pub minus: Field,
    pub t_plus: Field,
    pub t_minus: Field,
    /// `∫v⁺Tv⁺`.
    pub a: f64,
    /// `∫v⁺Tv⁻`.
    pub b: f64,
    /// `∫v⁻Tv⁻`.
    pub c: f64,
    nz_plus: Vec<f64>,
    nz_minus: Vec<f64>,
}

impl<'a> NodalParts<'a> {
    pub fn new(ctx: &'a DualContext, v: &Field) -> Result<Self> {
        let (plus, minus) = v.split();
        if plus.is_zero() || minus.is_zero() {
            return Err(Error::NotSignChanging);
        }
        let t_plus = ctx.apply_t(&plus)?;
        let t_minus = ctx.apply_t(&minus)?;
        let a = plus.inner(&t_plus)?;
        let c = minus.inner(&t_minus)?;
        let b = 0.5 * (plus.inner(&t_minus)? + minus.inner(&t_plus)?);
        if !(a > 0.0 && c > 0.0) {
            return Err(Error::NotSignChanging);
        }
        let nz_plus = plus.values().iter().copied().filter(|&x| x != 0.0).collect();
        let nz_minus = minus.values().iter().copied().filter(|&x| x != 0.0).collect();
        Ok(Self {
            ctx,
            plus,
            minus,
            t_plus,
            t_minus,
            a,
            b,
            c,
            nz_plus,
            nz_minus,
        })
    }

    fn phi(&self, vals: &[f64], tau: f64) -> Result<f64> {
        let nl = self.ctx.nl();
        let mut s = 0.0;
        for &v in vals {
            s += nl.h(tau * v)? * v;
        }
        Ok(self.ctx.grid().cell_area() * s)
    }

    /// `(φ(τ), φ′(τ))` with `φ′(τ) = ∫h′(τv)v²`.
    fn phi_and_slope(&self, vals: &[f64], tau: f64) -> Result<(f64, f64)> {
        let nl = self.ctx.nl();
        let (mut s, mut ds) = (0.0, 0.0);
        for &v in vals {
            let y = nl.h(tau * v)?;
            s += y * v;
            ds += v * v / nl.f_prime(y);
        }
        let area = self.ctx.grid().cell_area();
        Ok((area * s, area * ds))
    }

    /// `φ₊(t) = ∫h(tv⁺)v⁺`.
    pub fn phi_plus(&self, t: f64) -> Result<f64> {
        self.phi(&self.nz_plus, t)
    }

    /// `φ₋(s) = ∫h(sv⁻)v⁻`.
    pub fn phi_minus(&self, s: f64) -> Result<f64> {
        self.phi(&self.nz_minus, s)
    }

    /// `(Ψ′(tv⁺+sv⁻)v⁺, Ψ′(tv⁺+sv⁻)v⁻)`.
    pub fn defects(&self, t: f64, s: f64) -> Result<(f64, f64)> {
        Ok((
            self.phi_plus(t)? - t * self.a - s * self.b,
            self.phi_minus(s)? - s * self.c - t * self.b,
        ))
    }

    /// Defects divided by `φ₊(t)` and `φ₋(s)` respectively.
    pub fn relative_defects(&self, t: f64, s: f64) -> Result<(f64, f64)> {
        let (pp, pm) = (self.phi_plus(t)?, self.phi_minus(s)?);
        Ok((
            (pp - t * self.a - s * self.b) / pp,
            (pm - s * self.c - t * self.b) / pm,
        ))
    }

    /// `h^v(t, s) = Ψ(tv⁺ + sv⁻)`.
    pub fn fibering_value(&self, t: f64, s: f64) -> Result<f64> {
        let nl = self.ctx.nl();
        let mut acc = 0.0;
        for &v in &self.nz_plus {
            acc += nl.h_primitive(t * v)?;
        }
        for &v in &self.nz_minus {
            acc += nl.h_primitive(s * v)?;
        }
        let quad = t * t * self.a + 2.0 * t * s * self.b + s * s * self.c;
        Ok(self.ctx.grid().cell_area() * acc - 0.5 * quad)
    }

    /// `tv⁺ + sv⁻` and its image under `T`, without another solve.
    pub fn combine(&self, t: f64, s: f64) -> (Field, Field) {
        let w = self.plus.lin_comb(t, &self.minus, s).expect("same grid");
        let tw = self.t_plus.lin_comb(t, &self.t_minus, s).expect("same grid");
        (w, tw)
    }

    fn merit(&self, t: f64, s: f64) -> Result<f64> {
        let (r1, r2) = self.relative_defects(t, s)?;
        Ok(r1.abs().max(r2.abs()))
    }

    /// Smallest `λ = 2^k` such that the rectangle
    /// `[t/λ, tλ] × [s/λ, sλ]` satisfies Miranda's sign conditions:
    /// `e₁ > 0` at `t/λ` and `< 0` at `tλ` for every `s` in range, and the
    /// same for `e₂` in `s`. Both defects are affine in the other variable,
    /// so the four corners decide.
    pub fn miranda_box(&self, t: f64, s: f64) -> Result<MirandaBox> {
        let mut lambda = 2.0_f64;
        let mut log = String::new();
        while lambda <= BOX_MAX {
            let (tl, th, sl, sh) = (t / lambda, t * lambda, s / lambda, s * lambda);
            let (a1, a2) = self.defects(tl, sl)?;
            let (b1, b2) = self.defects(tl, sh)?;
            let (c1, c2) = self.defects(th, sl)?;
            let (d1, d2) = self.defects(th, sh)?;
            let e1_ok = a1 > 0.0 && b1 > 0.0 && c1 < 0.0 && d1 < 0.0;
            let e2_ok = a2 > 0.0 && c2 > 0.0 && b2 < 0.0 && d2 < 0.0;
            if e1_ok && e2_ok {
                return Ok(MirandaBox {
                    t: (tl, th),
                    s: (sl, sh),
                });
            }
            log = format!(
                "λ={lambda:e} around ({t}, {s}), B={:e}: e₁ corners [{a1:e},{b1:e},{c1:e},{d1:e}], e₂ corners [{a2:e},{b2:e},{c2:e},{d2:e}]",
                self.b
            );
            lambda *= 2.0;
        }
        Err(Error::BracketNotFound { log })
    }

    /// Damped Newton on `(e₁, e₂)` from `(t, s)`, keeping both positive.
    /// Returns the final point and its merit.
    fn newton(&self, mut t: f64, mut s: f64, tol: f64) -> Result<(f64, f64, f64)> {
        let mut m = self.merit(t, s)?;
        for _ in 0..NEWTON_MAX_ITER {
            if m <= tol {
                break;
            }
            let (pp, dpp) = self.phi_and_slope(&self.nz_plus, t)?;
            let (pm, dpm) = self.phi_and_slope(&self.nz_minus, s)?;
            let e1 = pp - t * self.a - s * self.b;
            let e2 = pm - s * self.c - t * self.b;
            let (j11, j12, j21, j22) = (dpp - self.a, -self.b, -self.b, dpm - self.c);
            let det = j11 * j22 - j12 * j21;
            if !(det.is_finite() && det != 0.0) {
                break;
            }
            let dt = -(j22 * e1 - j12 * e2) / det;
            let ds = -(j11 * e2 - j21 * e1) / det;
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let (nt, ns) = (t + step * dt, s + step * ds);
                if nt > 0.0 && ns > 0.0 {
                    let nm = self.merit(nt, ns)?;
                    if nm < m {
                        t = nt;
                        s = ns;
                        m = nm;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Ok((t, s, m))
    }

    /// Nested bracketed solves: for each `t` the `s`-defect is solved in
    /// `s`, then the `t`-defect is solved along the curve `s(t)`. Both
    /// scalar maps are positive near 0 and negative far out when `B ≤ 0`.
    pub fn nested_solve(&self) -> Result<(f64, f64)> {
        let s_of = |t: f64| -> Result<f64> {
            bracketed_root(|s: f64| Ok(self.phi_minus(s)? - s * self.c - t * self.b))
        };
        let t = bracketed_root(|t: f64| Ok(self.phi_plus(t)? - t * self.a - s_of(t)? * self.b))?;
        Ok((t, s_of(t)?))
    }

    /// Root of the defect map by Newton from `(1, 1)`, falling back to the
    /// nested bracketed solve plus a Newton polish, then certified by a
    /// Miranda box around it.
    pub fn project(&self, tol: f64) -> Result<NodalProjection> {
        let (mut t, mut s, mut m) = self.newton(1.0, 1.0, tol)?;
        let newton_only = m <= tol;
        if !newton_only {
            let (tb, sb) = self.nested_solve()?;
            (t, s, m) = self.newton(tb, sb, tol)?;
        }
        if !(m <= tol) {
            return Err(Error::BracketNotFound {
                log: format!("nodal defect {m:e} above tolerance {tol:e} at (t, s) = ({t}, {s})"),
            });
        }
        let bx = self.miranda_box(t, s)?;
        Ok(NodalProjection {
            t,
            s,
            residual: m,
            r: bx.t.0.min(bx.s.0),
            big_r: bx.t.1.max(bx.s.1),
            t_box: bx.t,
            s_box: bx.s,
            newton_only,
        })
    }
}

/// A rectangle on whose edges the nodal defects have Miranda's sign
/// pattern.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MirandaBox {
    pub t: (f64, f64),
    pub s: (f64, f64),
}

/// Root of a function that is positive near 0 and negative for large
/// arguments, bracketed by halving and doubling from 1.
fn bracketed_root(mut g: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let (mut lo, mut hi) = (1.0, 1.0);
    let (mut glo, mut ghi) = (g(lo)?, g(hi)?);
    while glo <= 0.0 {
        if glo == 0.0 {
            return Ok(lo);
        }
        lo *= 0.5;
        if lo < BOX_MIN * BOX_MIN {
            return Err(Error::BracketNotFound {
                log: format!("no positive value down to {lo:e}"),
            });
        }
        glo = g(lo)?;
    }
    while ghi >= 0.0 {
        if ghi == 0.0 {
            return Ok(hi);
        }
        hi *= 2.0;
        if hi > BOX_MAX * BOX_MAX {
            return Err(Error::BracketNotFound {
                log: format!("no negative value up to {hi:e}"),
            });
        }
        ghi = g(hi)?;
    }
    brent(g, lo, hi, glo, ghi, ROOT_XTOL, ROOT_MAX_ITER)
}

/// Find `(t, s)` with `tv⁺ + sv⁻ ∈ ℳ` to relative defect `tol`.
pub fn project_nodal(ctx: &DualContext, v: &Field, tol: f64) -> Result<NodalProjection> {
    NodalParts::new(ctx, v)?.project(tol)
}

/// `h^v(t, s) = Ψ(tv⁺ + sv⁻)`.
pub fn fibering_value(ctx: &DualContext, v: &Field, t: f64, s: f64) -> Result<f64> {
    let (plus, minus) = v.split();
    let w = plus.lin_comb(t, &minus, s)?;
    ctx.psi(&w)
}

/// Derivative at `(1, 1)` of the defect field
/// `V(s, t) = (Ψ′(tw⁺ + sw⁻)tw⁺, Ψ′(tw⁺ + sw⁻)sw⁻)` for `w ∈ ℳ`.
///
/// With `G(v) = ∫h′(v)v² − ∫vTv` and `B = ∫w⁺Tw⁻`,
/// `∂V₁/∂t = G(w⁺)`, `∂V₂/∂s = G(w⁻)` and both mixed partials are `−B`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FiberingJacobian {
    pub g_plus: f64,
    pub g_minus: f64,
    pub cross: f64,
    /// Jacobian of `V` with columns ordered `(∂/∂s, ∂/∂t)`, the argument
    /// order of `V(s, t)`: `[[−B, G(w⁺)], [G(w⁻), −B]]`.
    pub matrix: [[f64; 2]; 2],
    /// `det matrix = B² − G(w⁺)G(w⁻)`.
    pub det: f64,
    /// Determinant with columns ordered `(∂/∂t, ∂/∂s)`, i.e. of
    /// `[[G(w⁺), −B], [−B, G(w⁻)]]`; equals `−det`. Positive at a strict
    /// local maximum of the fibering map.
    pub det_ts: f64,
}

/// Defect tolerance for accepting `w` as a point of `ℳ`.
pub const ON_NODAL_SET_TOL: f64 = 1e-8;

pub fn fibering_jacobian(ctx: &DualContext, w: &Field) -> Result<FiberingJacobian> {
    let parts = NodalParts::new(ctx, w)?;
    let (d1, d2) = parts.relative_defects(1.0, 1.0)?;
    if !(d1.abs() <= ON_NODAL_SET_TOL && d2.abs() <= ON_NODAL_SET_TOL) {
        return Err(Error::NotOnNodalSet { plus: d1, minus: d2 });
    }
    let (_, dpp) = parts.phi_and_slope(&parts.nz_plus, 1.0)?;
    let (_, dpm) = parts.phi_and_slope(&parts.nz_minus, 1.0)?;
    let g_plus = dpp - parts.a;
    let g_minus = dpm - parts.c;
    let b = parts.b;
    let det = b * b - g_plus * g_minus;
    Ok(FiberingJacobian {
        g_plus,
        g_minus,
        cross: b,
        matrix: [[-b, g_plus], [g_minus, -b]],
        det,
        det_ts: g_plus * g_minus - b * b,
    })
}

/// `((∫w⁺Tw⁻)², ∫w⁺Tw⁺ · ∫w⁻Tw⁻)`; the first is strictly smaller whenever
/// `T` is positive definite.
pub fn cross_term_inequality(ctx: &DualContext, w: &Field) -> Result<(f64, f64)> {
    let parts = NodalParts::new(ctx, w)?;
    Ok((parts.b * parts.b, parts.a * parts.c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BoundaryCondition, Grid2D};
    use crate::nonlinearity::{Nonlinearity, Term};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ctx(n: usize, nl: Nonlinearity) -> DualContext {
        DualContext::new(Grid2D::unit_square(n, BoundaryCondition::Navier).unwrap(), nl).unwrap()
    }

    fn cubic_ctx(n: usize) -> DualContext {
        ctx(n, Nonlinearity::pure_power(4.0).unwrap())
    }

    fn dipole(ctx: &DualContext, rng: &mut ChaCha8Rng, amp: f64) -> Field {
        let g = *ctx.grid();
        Field::from_fn(g, |x, y| {
            let bump = (std::f64::consts::PI * y).sin();
            if x < 0.5 {
                amp * bump * (std::f64::consts::PI * 2.0 * x).sin() * rng.gen_range(0.5..1.5)
            } else {
                0.7 * amp * bump * (std::f64::consts::PI * 2.0 * x).sin() * rng.gen_range(0.5..1.5)
            }
        })
    }

    #[test]
    fn ray_projection_closed_form() {
        let c = cubic_ctx(9);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let w = Field::new(*c.grid(), (0..81).map(|_| rng.gen_range(-100.0..300.0)).collect()).unwrap();
            let tw = c.apply_t(&w).unwrap();
            let hw = w.try_map(|v| c.nl().h(v)).unwrap();
            let expected = (hw.inner(&w).unwrap() / w.inner(&tw).unwrap()).powf(3.0 / 2.0);
            let t = project_ray(&c, &w).unwrap();
            assert!((t - expected).abs() <= 1e-10 * expected, "{t} vs {expected}");
            // idempotent
            let t1 = project_ray(&c, &w.scale(t)).unwrap();
            assert!((t1 - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn ray_projection_rejects_zero() {
        let c = cubic_ctx(5);
        assert!(matches!(project_ray(&c, &Field::zeros(*c.grid())), Err(Error::RayMissesNehari)));
        assert_eq!(
            project_ray(&c, &Field::zeros(*c.grid())).unwrap_err().to_string(),
            "ray does not cross 𝒩"
        );
    }

    #[test]
    fn ray_projection_maximizes_along_ray() {
        let nl = Nonlinearity::new(vec![Term { a: 1.0, p: 4.0 }, Term { a: 0.5, p: 6.0 }]).unwrap();
        let c = ctx(7, nl);
        let w = crate::biharmonic::sine_mode(c.grid()).scale(20.0);
        let t = project_ray(&c, &w).unwrap();
        let step = t / 1000.0;
        let (best, _) = (1..3000)
            .map(|i| i as f64 * step)
            .map(|s| (s, c.psi(&w.scale(s)).unwrap()))
            .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        assert!((best - t).abs() <= step);
    }

    #[test]
    fn nodal_projection_requires_sign_change() {
        let c = cubic_ctx(7);
        let w = Field::constant(*c.grid(), 1.0);
        assert!(matches!(project_nodal(&c, &w, 1e-12), Err(Error::NotSignChanging)));
        assert_eq!(
            project_nodal(&c, &w.scale(-1.0), 1e-12).unwrap_err().to_string(),
            "not sign-changing"
        );
    }

    #[test]
    fn nodal_projection_solves_defects() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for nl in [
            Nonlinearity::pure_power(4.0).unwrap(),
            Nonlinearity::new(vec![Term { a: 1.0, p: 4.0 }, Term { a: 0.5, p: 6.0 }]).unwrap(),
        ] {
            let c = ctx(11, nl);
            for amp in [1.0, 50.0, 5000.0] {
                let v = dipole(&c, &mut rng, amp);
                let proj = project_nodal(&c, &v, 1e-12).unwrap();
                assert!(proj.r <= proj.t.min(proj.s) && proj.t.max(proj.s) <= proj.big_r);
                let (plus, minus) = v.split();
                let w = plus.lin_comb(proj.t, &minus, proj.s).unwrap();
                let g = c.grad_psi(&w).unwrap();
                let (wp, wm) = w.split();
                let d1 = g.inner(&wp).unwrap() / wp.inner(&wp.try_map(|x| c.nl().h(x)).unwrap()).unwrap();
                let d2 = g.inner(&wm).unwrap() / wm.inner(&wm.try_map(|x| c.nl().h(x)).unwrap()).unwrap();
                assert!(d1.abs() <= 1e-10 && d2.abs() <= 1e-10, "{d1} {d2}");
                // already on ℳ: (1, 1)
                let again = project_nodal(&c, &w, 1e-12).unwrap();
                assert!((again.t - 1.0).abs() <= 1e-10 && (again.s - 1.0).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn nested_solve_agrees_with_newton() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = cubic_ctx(9);
        let v = dipole(&c, &mut rng, 30.0);
        let parts = NodalParts::new(&c, &v).unwrap();
        let (tb, sb) = parts.nested_solve().unwrap();
        let proj = parts.project(1e-12).unwrap();
        assert!((tb - proj.t).abs() <= 1e-9 * proj.t);
        assert!((sb - proj.s).abs() <= 1e-9 * proj.s);
    }

    #[test]
    fn fibering_value_matches_psi() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = cubic_ctx(9);
        let v = dipole(&c, &mut rng, 10.0);
        let parts = NodalParts::new(&c, &v).unwrap();
        for (t, s) in [(0.0, 0.0), (1.0, 0.0), (0.3, 2.0), (1.7, 0.9)] {
            let a = fibering_value(&c, &v, t, s).unwrap();
            let b = parts.fibering_value(t, s).unwrap();
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
        assert_eq!(fibering_value(&c, &v, 0.0, 0.0).unwrap(), 0.0);
        let (plus, _) = v.split();
        let a = fibering_value(&c, &v, 1.3, 0.0).unwrap();
        assert!((a - c.psi(&plus.scale(1.3)).unwrap()).abs() <= 1e-14 * a.abs());
        // relabeling through -v swaps the roles of t and s
        let mirrored = fibering_value(&c, &v.scale(-1.0), 0.4, 1.6).unwrap();
        let direct = fibering_value(&c, &v, 1.6, 0.4).unwrap();
        assert!((mirrored - direct).abs() <= 1e-12 * direct.abs());
    }

    #[test]
    fn jacobian_requires_point_on_nodal_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = cubic_ctx(9);
        let v = dipole(&c, &mut rng, 10.0);
        assert!(matches!(fibering_jacobian(&c, &v), Err(Error::NotOnNodalSet { .. })));
        let proj = project_nodal(&c, &v, 1e-13).unwrap();
        let (p, m) = v.split();
        let w = p.lin_comb(proj.t, &m, proj.s).unwrap();
        let jac = fibering_jacobian(&c, &w).unwrap();
        assert!(jac.g_plus < jac.cross && jac.g_minus < jac.cross && jac.cross < 0.0);
        assert!(jac.det < 0.0 && jac.det_ts > 0.0);
        assert_eq!(jac.det, -jac.det_ts);
    }

    #[test]
    fn jacobian_matches_finite_differences_of_defect_field() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let nl = Nonlinearity::new(vec![Term { a: 1.0, p: 4.0 }, Term { a: 0.5, p: 6.0 }]).unwrap();
        let c = ctx(9, nl);
        let v = dipole(&c, &mut rng, 40.0);
        let proj = project_nodal(&c, &v, 1e-13).unwrap();
        let (p, m) = v.split();
        let w = p.lin_comb(proj.t, &m, proj.s).unwrap();
        let jac = fibering_jacobian(&c, &w).unwrap();
        let parts = NodalParts::new(&c, &w).unwrap();
        let field = |s: f64, t: f64| {
            let (e1, e2) = parts.defects(t, s).unwrap();
            (t * e1, s * e2)
        };
        let e = 1e-6;
        let (a, b) = (field(1.0 + e, 1.0), field(1.0 - e, 1.0));
        let d_ds = ((a.0 - b.0) / (2.0 * e), (a.1 - b.1) / (2.0 * e));
        let (a, b) = (field(1.0, 1.0 + e), field(1.0, 1.0 - e));
        let d_dt = ((a.0 - b.0) / (2.0 * e), (a.1 - b.1) / (2.0 * e));
        let fd = [[d_ds.0, d_dt.0], [d_ds.1, d_dt.1]];
        for i in 0..2 {
            for j in 0..2 {
                let (x, y) = (jac.matrix[i][j], fd[i][j]);
                assert!((x - y).abs() <= 1e-5 * x.abs(), "entry ({i},{j}): {x} vs {y}");
            }
        }
    }

    #[test]
    fn cross_term_strictly_below_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c = cubic_ctx(15);
        for _ in 0..10 {
            let w = Field::new(*c.grid(), (0..225).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let (lhs, rhs) = cross_term_inequality(&c, &w).unwrap();
            assert!(lhs < rhs);
        }
        let sep = Field::from_fn(*c.grid(), |x, _| {
            if x < 0.15 {
                1.0
            } else if x > 0.85 {
                -1.0
            } else {
                0.0
            }
        });
        let (lhs, rhs) = cross_term_inequality(&c, &sep).unwrap();
        assert!(lhs < 0.1 * rhs);
        // vanishing negative part: both sides shrink, order is kept
        let tiny = sep.map(|v| if v < 0.0 { 1e-6 * v } else { v });
        let (lhs, rhs) = cross_term_inequality(&c, &tiny).unwrap();
        assert!(lhs <= rhs && rhs < 1e-5);
    }
}
