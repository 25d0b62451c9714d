//! One-dimensional safeguarded Newton minimization.
//!
//! Newton steps on the derivative are taken while they stay inside a
//! sign-change bracket; otherwise the step falls back to bisection. The
//! returned point never has a larger objective than the starting point.

/// Value, first and second derivative of a scalar function at a point.
#[derive(Debug, Clone, Copy)]
pub struct Eval {
    pub value: f64,
    pub grad: f64,
    pub hess: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    /// Stop once `|f'(x)| <= grad_tol`.
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-12,
            max_iter: 200,
        }
    }
}

/// Minimizes `f` over `[lo, hi]` starting from `x0`.
pub fn minimize<F>(f: F, x0: f64, lo: f64, hi: f64, opts: NewtonOptions) -> f64
where
    F: Fn(f64) -> Eval,
{
    debug_assert!(lo < hi);
    let x0 = x0.clamp(lo, hi);
    let start = f(x0);
    if !start.grad.is_finite() || start.grad.abs() <= opts.grad_tol {
        return x0;
    }

    // The minimizer lies downhill of x0; close the bracket on that side.
    let (mut a, mut b) = if start.grad > 0.0 { (lo, x0) } else { (x0, hi) };
    let candidate = if start.grad > 0.0 {
        if f(lo).grad >= 0.0 {
            Some(lo)
        } else {
            None
        }
    } else if f(hi).grad <= 0.0 {
        Some(hi)
    } else {
        None
    };

    let x_star = match candidate {
        Some(edge) => edge,
        None => {
            // Invariant: f'(a) < 0 < f'(b).
            let mut x = x0;
            let mut e = start;
            let mut dx_old = b - a;
            let mut dx = dx_old;
            for _ in 0..opts.max_iter {
                let newton_ok = e.hess > 0.0 && e.hess.is_finite();
                let proposal = if newton_ok { x - e.grad / e.hess } else { f64::NAN };
                let inside = proposal > a && proposal < b;
                if inside && (2.0 * (e.grad / e.hess)).abs() <= dx_old.abs() {
                    dx_old = dx;
                    dx = proposal - x;
                    x = proposal;
                } else {
                    dx_old = dx;
                    dx = 0.5 * (b - a);
                    x = a + dx;
                }
                e = f(x);
                if !e.grad.is_finite() {
                    break;
                }
                if e.grad.abs() <= opts.grad_tol {
                    break;
                }
                if e.grad < 0.0 {
                    a = x;
                } else {
                    b = x;
                }
                if b - a <= 4.0 * f64::EPSILON * (1.0 + x.abs()) {
                    break;
                }
            }
            x
        }
    };

    // Near the optimum the value change falls below rounding noise, so allow
    // a few ulps of slack when the gradient has clearly improved.
    let end = f(x_star);
    let slack = 16.0 * f64::EPSILON * start.value.abs().max(1.0);
    let improved = end.value <= start.value || (end.value <= start.value + slack && end.grad.abs() < start.grad.abs());
    if end.value.is_finite() && improved {
        x_star
    } else {
        x0
    }
}
