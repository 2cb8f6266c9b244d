//! Dense BFGS minimizer for the five-dimensional log-parameter vector.
//!
//! Deterministic: no randomness, fixed evaluation order, allocation-free inner
//! loop. The objective must return its value and gradient together.

pub(crate) const DIM: usize = 5;

type Vec5 = [f64; DIM];
type Mat5 = [[f64; DIM]; DIM];

#[derive(Debug, Clone, Copy)]
pub(crate) struct BfgsSettings {
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BfgsRun {
    pub x: Vec5,
    pub value: f64,
    pub converged: bool,
}

fn dot(a: &Vec5, b: &Vec5) -> f64 {
    let mut s = 0.0;
    for i in 0..DIM {
        s += a[i] * b[i];
    }
    s
}

fn norm(a: &Vec5) -> f64 {
    dot(a, a).sqrt()
}

fn identity() -> Mat5 {
    let mut m = [[0.0; DIM]; DIM];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

fn mat_vec(m: &Mat5, v: &Vec5) -> Vec5 {
    let mut out = [0.0; DIM];
    for i in 0..DIM {
        let mut s = 0.0;
        for j in 0..DIM {
            s += m[i][j] * v[j];
        }
        out[i] = s;
    }
    out
}

/// Inverse-Hessian BFGS update:
/// `H <- (I - rho*s*y') H (I - rho*y*s') + rho*s*s'` with `rho = 1/(y's)`.
fn bfgs_update(h: &mut Mat5, s: &Vec5, y: &Vec5, sy: f64) {
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    // Expanded form: H + (1 + y'Hy*rho)*rho*s*s' - rho*(s*(Hy)' + Hy*s')
    let coef = (1.0 + rho * yhy) * rho;
    for i in 0..DIM {
        for j in 0..DIM {
            h[i][j] += coef * s[i] * s[j] - rho * (s[i] * hy[j] + hy[i] * s[j]);
        }
    }
}

/// Minimizes `f` from `x0`. Returns `None` when the starting point evaluates
/// to a non-finite value.
pub(crate) fn minimize<F>(f: F, x0: Vec5, settings: &BfgsSettings) -> Option<BfgsRun>
where
    F: Fn(&Vec5) -> (f64, Vec5),
{
    let (mut value, mut grad) = f(&x0);
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return None;
    }
    let mut x = x0;
    let mut h = identity();
    // Unit-length first step: keeps tiny-gradient plateaus and huge-gradient
    // cliffs equally tractable before curvature information exists.
    {
        let g0 = norm(&grad);
        if g0 > 0.0 {
            for (i, row) in h.iter_mut().enumerate() {
                row[i] = 1.0 / g0;
            }
        }
    }
    let mut first_update = true;

    for _ in 0..settings.max_iterations {
        let gnorm = norm(&grad);
        if gnorm <= settings.gradient_tolerance {
            return Some(BfgsRun { x, value, converged: true });
        }

        let mut dir = mat_vec(&h, &grad);
        for d in dir.iter_mut() {
            *d = -*d;
        }
        let mut slope = dot(&grad, &dir);
        if !slope.is_finite() || slope >= 0.0 {
            // Curvature information went bad; restart from steepest descent.
            h = identity();
            first_update = true;
            for (d, g) in dir.iter_mut().zip(&grad) {
                *d = -g;
            }
            slope = -dot(&grad, &grad);
        }

        let eval_at = |step: f64| {
            let mut xt = x;
            for i in 0..DIM {
                xt[i] += step * dir[i];
            }
            let (vt, gt) = f(&xt);
            (xt, vt, gt)
        };

        // Backtracking Armijo line search, with doubling while the objective
        // keeps strictly improving (plateaus need long steps).
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let (xt, vt, gt) = eval_at(step);
            if vt.is_finite() && vt <= value + 1e-4 * step * slope {
                accepted = Some((xt, vt, gt));
                break;
            }
            step *= 0.5;
        }
        if step == 1.0 {
            if let Some(best) = accepted.as_mut() {
                let mut grow = 2.0;
                for _ in 0..24 {
                    let (xt, vt, gt) = eval_at(grow);
                    if vt.is_finite() && vt < best.1 {
                        *best = (xt, vt, gt);
                        grow *= 2.0;
                    } else {
                        break;
                    }
                }
            }
        }
        let Some((x_new, v_new, g_new)) = accepted else {
            // No decrease along a descent direction: we are at numerical
            // resolution; report where we stand.
            return Some(BfgsRun { x, value, converged: gnorm <= settings.gradient_tolerance });
        };
        if g_new.iter().any(|g| !g.is_finite()) {
            return Some(BfgsRun { x, value, converged: false });
        }

        let mut s = [0.0; DIM];
        let mut y = [0.0; DIM];
        for i in 0..DIM {
            s[i] = x_new[i] - x[i];
            y[i] = g_new[i] - grad[i];
        }
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if first_update {
                // Scale the initial inverse Hessian to the problem's curvature.
                let yy = dot(&y, &y);
                if yy > 0.0 {
                    let scale = sy / yy;
                    h = identity();
                    for (i, row) in h.iter_mut().enumerate() {
                        row[i] = scale;
                    }
                }
                first_update = false;
            }
            bfgs_update(&mut h, &s, &y, sy);
        }

        x = x_new;
        value = v_new;
        grad = g_new;
    }

    let gnorm = norm(&grad);
    Some(BfgsRun { x, value, converged: gnorm <= settings.gradient_tolerance })
}
