//! Newton-Raphson on a simulated residual, with bisection fallback.
//!
//! The residual is a full day replay, so there is no analytic derivative and
//! it is piecewise constant wherever the window set does not change. The
//! derivative comes from central differences; when it vanishes, or a Newton
//! step leaves `[lower, upper]`, the solver bisects a sign-change bracket
//! instead.

use crate::scalar::Scalar;

/// Derivative magnitude below which a Newton step is not attempted.
const FLAT_DERIVATIVE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig<T> {
    /// Accept once `|residual| <= tol`.
    pub tol: T,
    pub max_iter: usize,
    pub lower: T,
    pub upper: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Newton,
    Bisection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome<T> {
    /// Best iterate seen (smallest |residual|).
    pub x: T,
    pub residual: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub steps: Vec<StepKind>,
}

/// Finite-difference step used around `x`.
pub fn fd_step<T: Scalar>(x: T) -> T {
    T::lit(1e-4).max(T::lit(1e-3) * x.abs())
}

struct Bracket<T> {
    neg: T,
    pos: T,
}

/// Solves `f(x) = 0` from `initial`.
///
/// Returns the best iterate flagged `converged = false` when neither Newton
/// nor a sign-change bracket reaches the tolerance.
pub fn newton_raphson<T, E, F>(mut f: F, initial: T, cfg: &NewtonConfig<T>) -> Result<NewtonOutcome<T>, E>
where
    T: Scalar,
    F: FnMut(T) -> Result<T, E>,
{
    let mut evaluations = 0usize;
    let mut eval = |x: T, evaluations: &mut usize| {
        *evaluations += 1;
        f(x)
    };

    let mut x = initial;
    let mut fx = eval(x, &mut evaluations)?;
    let mut best = (x, fx);
    let mut steps = Vec::new();
    if fx.abs() <= cfg.tol {
        return Ok(NewtonOutcome {
            x,
            residual: fx,
            iterations: 0,
            evaluations,
            converged: true,
            steps,
        });
    }

    let mut bracket: Option<Bracket<T>> = None;
    let mut ends_checked = false;

    for iter in 1..=cfg.max_iter {
        let h = fd_step(x);
        let slope = (eval(x + h, &mut evaluations)? - eval(x - h, &mut evaluations)?) / (h + h);

        let newton_x = if slope.abs() >= T::lit(FLAT_DERIVATIVE) {
            Some(x - fx / slope).filter(|nx| nx.is_finite() && *nx >= cfg.lower && *nx <= cfg.upper)
        } else {
            None
        };

        let next = match newton_x {
            Some(nx) => {
                steps.push(StepKind::Newton);
                nx
            }
            None => {
                if bracket.is_none() && !ends_checked {
                    ends_checked = true;
                    let f_lo = eval(cfg.lower, &mut evaluations)?;
                    let f_hi = eval(cfg.upper, &mut evaluations)?;
                    for (px, pf) in [(cfg.lower, f_lo), (cfg.upper, f_hi)] {
                        if pf.abs() < best.1.abs() {
                            best = (px, pf);
                        }
                    }
                    bracket = seed_bracket(&[(x, fx), (cfg.lower, f_lo), (cfg.upper, f_hi)]);
                }
                let Some(b) = &bracket else {
                    break;
                };
                steps.push(StepKind::Bisection);
                (b.neg + b.pos) * T::half()
            }
        };

        x = next;
        fx = eval(x, &mut evaluations)?;
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
        if let Some(b) = &mut bracket {
            if fx < T::zero() {
                b.neg = x;
            } else {
                b.pos = x;
            }
        }
        if fx.abs() <= cfg.tol {
            return Ok(NewtonOutcome {
                x,
                residual: fx,
                iterations: iter,
                evaluations,
                converged: true,
                steps,
            });
        }
    }

    Ok(NewtonOutcome {
        x: best.0,
        residual: best.1,
        iterations: steps.len(),
        evaluations,
        converged: false,
        steps,
    })
}

fn seed_bracket<T: Scalar>(points: &[(T, T)]) -> Option<Bracket<T>> {
    let neg = points.iter().find(|(_, f)| *f < T::zero())?;
    let pos = points.iter().find(|(_, f)| *f >= T::zero())?;
    Some(Bracket { neg: neg.0, pos: pos.0 })
}
