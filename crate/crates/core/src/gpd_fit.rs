//! Maximum-likelihood estimation of GPD parameters from excesses.
//!
//! The two-parameter likelihood is reduced to a one-dimensional profile in
//! `theta = xi / sigma`. For fixed `theta` the likelihood equations give
//!
//! ```text
//! xi(theta)    = mean(ln(1 + theta * y))
//! sigma(theta) = xi(theta) / theta = mean(y * ln(1 + theta*y) / (theta*y))
//! -l(theta)/k  = ln sigma(theta) + xi(theta) + 1
//! ```
//!
//! The search runs in `s = ln(1 + theta * max(y))`, which maps the feasible
//! half-line `theta > -1/max(y)` onto the real line and is invariant under
//! rescaling of the data. Shapes are restricted to `[XI_MIN, XI_MAX]`;
//! below `xi = -1` the likelihood is unbounded.

use serde::{Deserialize, Serialize};

use crate::distributions::GpdParams;
use crate::error::{domain, Error, Result};
use crate::optimize::{brent_root, ln_1p};
use crate::statistics::{gof_with_log_survival, GofStatistics};

pub const XI_MIN: f64 = -0.99;
pub const XI_MAX: f64 = 5.0;
/// `theta >= -(1 - 1e-8) / max(y)`.
const S_MIN: f64 = -18.420_680_743_952_367; // ln(1e-8)
const S_MAX: f64 = 40.0;
const GRAD_TOL: f64 = 1e-9;
const S_TOL: f64 = 1e-11;
const MAX_EXPANSIONS: usize = 80;
/// Below this `|s|` the profile is evaluated by series expansion.
const SERIES_S: f64 = 1e-2;
const NEWTON_STEPS: usize = 8;
const NEWTON_MAX_STEP: f64 = 1.0;
/// Newton steps this short are completed by Taylor extrapolation; the
/// neglected terms are of order `TAYLOR_STEP^2` in the gradient.
const TAYLOR_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Mle,
    MomentFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: GpdParams,
    pub log_likelihood: f64,
    /// True when the profile search bracketed an interior stationary point.
    pub converged: bool,
    pub method: FitMethod,
    /// Number of likelihood passes over the data.
    pub iterations: usize,
}

/// `-sum(ln f(y_i))`; `+inf` when an excess lies outside the support.
pub fn neg_log_likelihood(params: &GpdParams, excesses: &[f64]) -> Result<f64> {
    if excesses.is_empty() {
        return Err(domain("likelihood of an empty sample"));
    }
    check_excesses(excesses)?;
    let mut total = 0.0;
    for &y in excesses {
        let lp = params.ln_pdf(y);
        if lp == f64::NEG_INFINITY {
            return Ok(f64::INFINITY);
        }
        total -= lp;
    }
    Ok(total)
}

fn check_excesses(excesses: &[f64]) -> Result<()> {
    match excesses.iter().find(|y| !(**y >= 0.0 && y.is_finite())) {
        Some(y) => Err(domain(format!("excesses must be finite and >= 0, got {y}"))),
        None => Ok(()),
    }
}

/// Fits a GPD to nonnegative excesses by maximum likelihood.
pub fn fit_mle(excesses: &[f64]) -> Result<FitResult> {
    if excesses.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: excesses.len() });
    }
    check_excesses(excesses)?;
    let mut sorted = excesses.to_vec();
    sorted.sort_by(f64::total_cmp);
    fit_sorted(&sorted, None)
}

/// Probability-weighted-moment estimate `(xi, sigma)` from ascending data.
/// `None` when the moments do not define a valid GPD.
pub fn pwm_estimate(sorted: &[f64]) -> Option<(f64, f64)> {
    let k = sorted.len();
    if k < 2 {
        return None;
    }
    let kf = k as f64;
    let mut a0 = 0.0;
    let mut a1 = 0.0;
    for (i, &y) in sorted.iter().enumerate() {
        a0 += y;
        a1 += y * (k - 1 - i) as f64;
    }
    a0 /= kf;
    a1 /= kf * (kf - 1.0);
    let den = a0 - 2.0 * a1;
    if !(den > 0.0) {
        return None;
    }
    let xi = 2.0 - a0 / den;
    let sigma = 2.0 * a0 * a1 / den;
    (sigma > 0.0 && xi.is_finite() && sigma.is_finite()).then_some((xi, sigma))
}

/// Fit on ascending excesses. `hint` warm-starts the profile search; when the
/// profile has several local maxima the one nearest the hint is returned.
pub(crate) fn fit_sorted(sorted: &[f64], hint: Option<GpdParams>) -> Result<FitResult> {
    let k = sorted.len();
    if k < 2 {
        return Err(Error::InsufficientData { needed: 2, got: k });
    }
    let ymax = sorted[k - 1];
    if !(ymax > 0.0) {
        return Err(Error::DegenerateData("all excesses are zero".into()));
    }
    let mut profile = Profile { y: sorted, ymax, evals: 0 };
    let pwm = pwm_estimate(sorted);
    let s_pwm = pwm.map(|(xi, sigma)| profile.s_of(xi / sigma)).unwrap_or(0.0);

    let best = match hint {
        // An interior optimum near the hint is accepted as is; the global
        // search only runs when the warm start ends on the boundary.
        Some(h) => match profile.local_search(profile.s_of(h.xi / h.sigma), 0.02) {
            Some(o) if o.interior => Some(o),
            out => better(out, profile.global_search(s_pwm)),
        },
        None => profile.global_search(s_pwm),
    };

    let result = match best {
        Some(o) if o.point.f.is_finite() => FitResult {
            params: GpdParams { xi: o.point.xi, sigma: o.point.sigma },
            log_likelihood: -(k as f64) * o.point.f,
            converged: o.interior,
            method: FitMethod::Mle,
            iterations: profile.evals,
        },
        _ => moment_fallback(sorted, pwm, profile.evals)?,
    };
    Ok(result)
}

/// `W²`, `A²` and `AU²` of ascending excesses under fitted parameters.
/// `probs` and `log_surv` are scratch buffers.
pub(crate) fn fitted_gof(
    params: &GpdParams,
    sorted: &[f64],
    probs: &mut Vec<f64>,
    log_surv: &mut Vec<f64>,
) -> GofStatistics {
    log_surv.clear();
    log_surv.extend(sorted.iter().map(|&y| params.log_survival(y)));
    probs.clear();
    probs.extend(log_surv.iter().map(|ls| -ls.exp_m1()));
    gof_with_log_survival(probs, log_surv)
}

fn better(a: Option<Outcome>, b: Option<Outcome>) -> Option<Outcome> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y.point.f < x.point.f { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

fn moment_fallback(sorted: &[f64], pwm: Option<(f64, f64)>, evals: usize) -> Result<FitResult> {
    let ymax = sorted[sorted.len() - 1];
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    let (xi, mut sigma) = pwm
        .map(|(xi, s)| (xi.clamp(XI_MIN, XI_MAX), s))
        .unwrap_or((0.0, mean));
    if xi < 0.0 && ymax >= -sigma / xi {
        sigma = -xi * ymax * (1.0 + 1e-9);
    }
    let params = GpdParams::new(xi, sigma)?;
    let nll = neg_log_likelihood(&params, sorted)?;
    Ok(FitResult {
        params,
        log_likelihood: -nll,
        converged: false,
        method: FitMethod::MomentFallback,
        iterations: evals,
    })
}

#[derive(Debug, Clone, Copy)]
struct ProfilePoint {
    s: f64,
    xi: f64,
    sigma: f64,
    /// Negative profile log-likelihood per observation.
    f: f64,
    /// `df/ds`.
    grad: f64,
    /// `d2f/ds2`.
    curv: f64,
    /// `dxi/ds`.
    xi_slope: f64,
    /// `d2xi/ds2`.
    xi_curv: f64,
}

impl ProfilePoint {
    fn feasible(&self) -> bool {
        (XI_MIN..=XI_MAX).contains(&self.xi) && self.s >= S_MIN && self.f.is_finite()
    }
}

/// Profile quantities and their `theta` derivatives.
struct ThetaTerms {
    xi: f64,
    sigma: f64,
    df: f64,
    d2f: f64,
    dxi: f64,
    d2xi: f64,
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    point: ProfilePoint,
    /// Stationary point strictly inside the feasible interval.
    interior: bool,
}

struct Profile<'a> {
    y: &'a [f64],
    ymax: f64,
    evals: usize,
}

impl Profile<'_> {
    fn s_of(&self, theta: f64) -> f64 {
        let z = theta * self.ymax;
        if !z.is_finite() {
            return 0.0;
        }
        if z <= -1.0 {
            S_MIN
        } else {
            z.ln_1p().clamp(S_MIN, S_MAX)
        }
    }

    fn eval(&mut self, s: f64) -> ProfilePoint {
        self.evals += 1;
        let theta = s.exp_m1() / self.ymax;
        let d = if s.abs() < SERIES_S { self.terms_near_zero(theta) } else { self.terms(theta) };
        // Chain rule with dtheta/ds = d2theta/ds2 = e^s / ymax.
        let ts = s.exp() / self.ymax;
        ProfilePoint {
            s,
            xi: d.xi,
            sigma: d.sigma,
            f: d.sigma.ln() + d.xi + 1.0,
            grad: d.df * ts,
            curv: d.d2f * ts * ts + d.df * ts,
            xi_slope: d.dxi * ts,
            xi_curv: d.d2xi * ts * ts + d.dxi * ts,
        }
    }

    /// Profile terms via `sigma = xi / theta`. With `g = xi'` and
    /// `q = -xi''`, `f' = g/xi - 1/theta + g` and
    /// `f'' = -q/xi - (g/xi)^2 + 1/theta^2 - q`.
    fn terms(&self, theta: f64) -> ThetaTerms {
        let mut sum_l = 0.0;
        let mut sum_g = 0.0;
        let mut sum_q = 0.0;
        for &y in self.y {
            let z = theta * y;
            sum_l += ln_1p(z);
            let w = y / (1.0 + z);
            sum_g += w;
            sum_q += w * w;
        }
        let k = self.y.len() as f64;
        let (xi, g, q) = (sum_l / k, sum_g / k, sum_q / k);
        let ratio = g / xi;
        ThetaTerms {
            xi,
            sigma: xi / theta,
            df: ratio - 1.0 / theta + g,
            d2f: -q / xi - ratio * ratio + 1.0 / (theta * theta) - q,
            dxi: g,
            d2xi: -q,
        }
    }

    /// Profile terms by series expansion, free of cancellation as
    /// `theta -> 0`. Here `sigma = h(theta) = mean(y ln(1+z)/z)` and
    /// `f = ln h + xi + 1`.
    fn terms_near_zero(&self, theta: f64) -> ThetaTerms {
        let mut sum_l = 0.0;
        let mut sum_h = 0.0;
        let mut sum_dh = 0.0;
        let mut sum_d2h = 0.0;
        let mut sum_g = 0.0;
        let mut sum_q = 0.0;
        for &y in self.y {
            let z = theta * y;
            let l = z.ln_1p();
            let lz = if z.abs() > 1e-8 { l / z } else { 1.0 - 0.5 * z };
            // phi = (z/(1+z) - ln(1+z)) / z^2 and its derivative.
            let phi = if z.abs() > 1e-3 {
                (z / (1.0 + z) - l) / (z * z)
            } else {
                -0.5 + z * (2.0 / 3.0 + z * (-0.75 + z * (0.8 - z * (5.0 / 6.0))))
            };
            let dphi = 2.0 / 3.0
                + z * (-1.5 + z * (2.4 + z * (-10.0 / 3.0 + z * (30.0 / 7.0 - z * 5.25))));
            let w = y / (1.0 + z);
            sum_l += l;
            sum_h += y * lz;
            sum_dh += y * y * phi;
            sum_d2h += y * y * y * dphi;
            sum_g += w;
            sum_q += w * w;
        }
        let k = self.y.len() as f64;
        let (g, q) = (sum_g / k, sum_q / k);
        let ratio = sum_dh / sum_h;
        ThetaTerms {
            xi: sum_l / k,
            sigma: sum_h / k,
            df: ratio + g,
            d2f: sum_d2h / sum_h - ratio * ratio - q,
            dxi: g,
            d2xi: -q,
        }
    }

    /// Second-order extrapolation of `p` by a short step, used to finish a
    /// Newton iteration without another pass over the data.
    fn extrapolate(&self, p: ProfilePoint, step: f64) -> ProfilePoint {
        let xi = p.xi + step * (p.xi_slope + 0.5 * step * p.xi_curv);
        let f = p.f + step * (p.grad + 0.5 * step * p.curv);
        ProfilePoint {
            s: p.s + step,
            xi,
            sigma: (f - xi - 1.0).exp(),
            f,
            grad: p.grad + step * p.curv,
            curv: p.curv,
            xi_slope: p.xi_slope + step * p.xi_curv,
            xi_curv: p.xi_curv,
        }
    }

    /// Safeguarded Newton iteration on the gradient. Returns the converged
    /// point, or the best point reached when a step is rejected.
    fn newton(&mut self, mut p: ProfilePoint) -> (ProfilePoint, bool) {
        for _ in 0..NEWTON_STEPS {
            if p.grad.abs() <= GRAD_TOL {
                return (p, true);
            }
            if !(p.curv > 0.0 && p.curv.is_finite()) {
                break;
            }
            let step = -p.grad / p.curv;
            if step.abs() > NEWTON_MAX_STEP {
                break;
            }
            if step.abs() <= TAYLOR_STEP {
                let q = self.extrapolate(p, step);
                if q.feasible() {
                    return (q, true);
                }
                break;
            }
            let q = self.eval(p.s + step);
            if !q.feasible() || q.f > p.f + 1e-14 * p.f.abs().max(1.0) {
                break;
            }
            p = q;
        }
        (p, false)
    }

    /// Locates the feasibility boundary between a feasible `inside` and an
    /// infeasible `outside` point.
    fn boundary(&mut self, inside: ProfilePoint, outside_s: f64) -> ProfilePoint {
        if outside_s < S_MIN {
            let at_min = self.eval(S_MIN);
            if at_min.xi >= XI_MIN {
                return at_min;
            }
            return self.shape_boundary(inside, at_min);
        }
        let out = self.eval(outside_s);
        self.shape_boundary(inside, out)
    }

    fn shape_boundary(&mut self, inside: ProfilePoint, out: ProfilePoint) -> ProfilePoint {
        let bound = if out.xi < XI_MIN { XI_MIN } else { XI_MAX };
        let mut last = inside;
        let root = brent_root(
            |s| {
                let p = self.eval(s);
                last = p;
                p.xi - bound
            },
            inside.s,
            out.s,
            inside.xi - bound,
            out.xi - bound,
            S_TOL,
            0.0,
            100,
        );
        let p = if last.s == root.x { last } else { self.eval(root.x) };
        if p.feasible() {
            return p;
        }
        // Step back inside by the smallest amount that restores feasibility.
        let step = (inside.s - root.x).signum() * S_TOL;
        let mut q = self.eval(root.x + step);
        if !q.feasible() {
            q = inside;
        }
        q
    }

    /// Descends from `start` until the gradient changes sign or the
    /// feasibility boundary is reached, then polishes the stationary point.
    fn local_search(&mut self, start: f64, step0: f64) -> Option<Outcome> {
        let mut p0 = self.eval(start.clamp(S_MIN, S_MAX));
        if !p0.f.is_finite() {
            return None;
        }
        let mut on_edge = false;
        if !p0.feasible() {
            p0 = self.repair(p0)?;
            on_edge = true;
        } else {
            let (p, converged) = self.newton(p0);
            if converged {
                return Some(Outcome { point: p, interior: true });
            }
            p0 = p;
        }
        let mut step = step0;
        for _ in 0..MAX_EXPANSIONS {
            if p0.grad == 0.0 {
                return Some(Outcome { point: p0, interior: !on_edge });
            }
            let dir = -p0.grad.signum();
            if on_edge && self.leaves_feasible(p0, dir) {
                return Some(Outcome { point: p0, interior: false });
            }
            on_edge = false;
            let s1 = p0.s + dir * step;
            let mut p1 = if s1 < S_MIN { None } else { Some(self.eval(s1)) };
            let mut hit_edge = false;
            if !p1.is_some_and(|p| p.feasible()) {
                p1 = Some(self.boundary(p0, s1));
                hit_edge = true;
            }
            let p1 = p1.expect("set above");
            if !p1.f.is_finite() {
                return None;
            }
            if p1.grad * dir > 0.0 {
                return Some(self.polish(p0, p1));
            }
            if hit_edge {
                if p1.s == p0.s {
                    return Some(Outcome { point: p0, interior: false });
                }
                p0 = p1;
                on_edge = true;
                continue;
            }
            p0 = p1;
            step *= 2.0;
        }
        None
    }

    fn leaves_feasible(&self, p: ProfilePoint, dir: f64) -> bool {
        let at_lower = p.s <= S_MIN || p.xi <= XI_MIN + 1e-9;
        let at_upper = p.xi >= XI_MAX - 1e-9 || p.s >= S_MAX;
        (dir < 0.0 && at_lower) || (dir > 0.0 && at_upper)
    }

    /// Moves an infeasible starting point onto the nearest feasible boundary.
    fn repair(&mut self, p: ProfilePoint) -> Option<ProfilePoint> {
        let dir = if p.xi < XI_MIN { 1.0 } else { -1.0 };
        let mut step = 0.5;
        let mut outside = p;
        for _ in 0..MAX_EXPANSIONS {
            let s = (outside.s + dir * step).clamp(S_MIN, S_MAX);
            let q = self.eval(s);
            if q.feasible() {
                return Some(self.shape_boundary(q, outside));
            }
            if s == S_MIN || s == S_MAX {
                return None;
            }
            outside = q;
            step *= 2.0;
        }
        None
    }

    fn polish(&mut self, a: ProfilePoint, b: ProfilePoint) -> Outcome {
        let mut seen = [a, b];
        let mut last = a;
        let root = brent_root(
            |s| {
                let p = self.eval(s);
                last = p;
                p.grad
            },
            a.s,
            b.s,
            a.grad,
            b.grad,
            S_TOL,
            GRAD_TOL * 1e-3,
            200,
        );
        let p = if last.s == root.x {
            last
        } else if a.s == root.x {
            a
        } else if b.s == root.x {
            b
        } else {
            self.eval(root.x)
        };
        seen.sort_by(|x, y| x.f.total_cmp(&y.f));
        if p.feasible() && p.f <= seen[0].f + 1e-14 {
            let interior = root.converged || p.grad.abs() <= GRAD_TOL;
            Outcome { point: p, interior }
        } else {
            Outcome { point: seen[0], interior: false }
        }
    }

    /// Local search from the moment estimate, backed by a coarse grid when
    /// that search ends on the boundary.
    fn global_search(&mut self, s_start: f64) -> Option<Outcome> {
        let mut best = self.local_search(s_start, 0.25);
        if best.is_some_and(|o| o.interior) {
            return best;
        }
        const GRID: [f64; 20] = [
            -18.0, -8.0, -6.0, -4.0, -3.0, -2.0, -1.5, -1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0,
            1.5, 2.0, 3.0, 4.0, 6.0, 8.0,
        ];
        let pts: Vec<ProfilePoint> = GRID
            .iter()
            .map(|&s| self.eval(s))
            .filter(|p| p.feasible())
            .collect();
        for (i, p) in pts.iter().enumerate() {
            let left_ok = i == 0 || pts[i - 1].f >= p.f;
            let right_ok = i + 1 == pts.len() || pts[i + 1].f >= p.f;
            let improves = best.map_or(true, |b| p.f < b.point.f - 1e-12);
            if left_ok && right_ok && improves {
                best = better(best, self.local_search(p.s, 0.25));
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::ParentDistribution;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exp_grid(sigma: f64, n: usize) -> Vec<f64> {
        let e = ParentDistribution::exponential(sigma).unwrap();
        (1..=n)
            .map(|i| e.quantile((i as f64 - 0.5) / n as f64).unwrap())
            .collect()
    }

    /// Central differences of the negative log-likelihood, scaled to be
    /// dimensionless and per observation.
    fn scaled_gradient(params: GpdParams, y: &[f64]) -> f64 {
        let nll = |xi: f64, sigma: f64| {
            neg_log_likelihood(&GpdParams::new(xi, sigma).unwrap(), y).unwrap()
        };
        let hx = 1e-6;
        let hs = 1e-6 * params.sigma;
        let gx = (nll(params.xi + hx, params.sigma) - nll(params.xi - hx, params.sigma)) / (2.0 * hx);
        let gs = (nll(params.xi, params.sigma + hs) - nll(params.xi, params.sigma - hs)) / (2.0 * hs);
        let k = y.len() as f64;
        (gx * params.xi.abs().max(1.0)).hypot(gs * params.sigma) / k
    }

    #[test]
    fn nll_examples() {
        let p = |xi, s| GpdParams::new(xi, s).unwrap();
        assert!((neg_log_likelihood(&p(0.0, 1.0), &[1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(neg_log_likelihood(&p(-0.5, 1.0), &[3.0]).unwrap(), f64::INFINITY);
        let v = neg_log_likelihood(&p(0.5, 1.0), &[2.0]).unwrap();
        assert!((v + 0.125f64.ln()).abs() < 1e-14);
        assert!(neg_log_likelihood(&p(0.5, 1.0), &[]).is_err());
        assert!(neg_log_likelihood(&p(0.5, 1.0), &[-1.0]).is_err());
    }

    #[test]
    fn fit_exponential_grid() {
        let y = exp_grid(2.0, 1000);
        let fit = fit_mle(&y).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.method, FitMethod::Mle);
        assert!(fit.params.xi.abs() <= 0.03, "{:?}", fit);
        assert!((1.9..=2.1).contains(&fit.params.sigma), "{:?}", fit);
        assert!(scaled_gradient(fit.params, &y) < 1e-4);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert_eq!(fit_mle(&[1.0]), Err(Error::InsufficientData { needed: 2, got: 1 }));
        assert!(matches!(fit_mle(&[0.0, 0.0, 0.0]), Err(Error::DegenerateData(_))));
        assert!(matches!(fit_mle(&[1.0, -2.0]), Err(Error::Domain(_))));
        assert!(matches!(fit_mle(&[1.0, f64::NAN]), Err(Error::Domain(_))));
    }

    #[test]
    fn fit_smallest_legal_input() {
        let fit = fit_mle(&[0.0, 1.0]).unwrap();
        assert!(fit.params.in_support(1.0));
        assert!(1.0 < fit.params.upper_endpoint());
        assert!(fit.log_likelihood.is_finite());
        assert!(fit.params.xi >= XI_MIN - 1e-9);
    }

    #[test]
    fn log_likelihood_matches_nll() {
        let y = exp_grid(1.0, 200);
        let fit = fit_mle(&y).unwrap();
        let nll = neg_log_likelihood(&fit.params, &y).unwrap();
        assert!((fit.log_likelihood + nll).abs() < 1e-8 * nll.abs());
    }

    #[test]
    fn fit_bounded_and_heavy_samples() {
        for (xi, seed) in [(-0.4, 1u64), (-0.2, 2), (0.1, 3), (0.5, 4), (0.9, 5)] {
            let g = GpdParams::new(xi, 1.5).unwrap();
            let y = g.sample(&mut ChaCha8Rng::seed_from_u64(seed), 5000);
            let fit = fit_mle(&y).unwrap();
            assert!(fit.converged, "xi={xi}: {fit:?}");
            assert!((fit.params.xi - xi).abs() < 0.08, "xi={xi}: {fit:?}");
            let ymax = y.iter().cloned().fold(0.0, f64::max);
            if fit.params.xi < 0.0 {
                assert!(ymax < fit.params.upper_endpoint());
            }
            assert!(scaled_gradient(fit.params, &y) < 1e-4, "xi={xi}");
        }
    }

    #[test]
    fn fit_never_worse_than_moment_start() {
        for seed in 0..20u64 {
            let g = GpdParams::new(0.2 - 0.05 * (seed % 8) as f64, 1.0).unwrap();
            let mut y = g.sample(&mut ChaCha8Rng::seed_from_u64(seed), 40);
            y.sort_by(f64::total_cmp);
            let fit = fit_mle(&y).unwrap();
            if let Some((xi, sigma)) = pwm_estimate(&y) {
                let start = -neg_log_likelihood(&GpdParams::new(xi, sigma).unwrap(), &y).unwrap();
                assert!(fit.log_likelihood >= start - 1e-9, "seed {seed}");
            }
        }
    }

    #[test]
    fn warm_start_agrees_with_cold_start() {
        let g = GpdParams::new(0.3, 2.0).unwrap();
        let mut y = g.sample(&mut ChaCha8Rng::seed_from_u64(77), 500);
        y.sort_by(f64::total_cmp);
        let cold = fit_sorted(&y, None).unwrap();
        let hint = GpdParams::new(0.25, 1.8).unwrap();
        let warm = fit_sorted(&y, Some(hint)).unwrap();
        assert!((cold.params.xi - warm.params.xi).abs() < 1e-8);
        assert!((cold.params.sigma - warm.params.sigma).abs() < 1e-8);
    }

    #[test]
    fn profile_derivatives_match_differences() {
        let g = GpdParams::new(0.3, 2.0).unwrap();
        let mut y = g.sample(&mut ChaCha8Rng::seed_from_u64(9), 300);
        y.sort_by(f64::total_cmp);
        let mut prof = Profile { y: &y, ymax: y[299], evals: 0 };
        // Both the series and the closed-form regimes.
        for s in [-2.0, -0.3, -0.004, 0.0005, 0.008, 0.5, 3.0] {
            let h = 1e-5;
            let (lo, mid, hi) = (prof.eval(s - h), prof.eval(s), prof.eval(s + h));
            let fd_grad = (hi.f - lo.f) / (2.0 * h);
            let fd_curv = (hi.grad - lo.grad) / (2.0 * h);
            let fd_xi = (hi.xi - lo.xi) / (2.0 * h);
            let fd_xi_curv = (hi.xi_slope - lo.xi_slope) / (2.0 * h);
            let scale = |v: f64| 1e-6 * v.abs().max(1e-3);
            assert!((mid.grad - fd_grad).abs() < scale(fd_grad), "grad at {s}");
            assert!((mid.curv - fd_curv).abs() < scale(fd_curv), "curv at {s}");
            assert!((mid.xi_slope - fd_xi).abs() < scale(fd_xi), "xi' at {s}");
            assert!((mid.xi_curv - fd_xi_curv).abs() < scale(fd_xi_curv), "xi'' at {s}");
        }
    }

    #[test]
    fn series_and_closed_form_regimes_agree() {
        let y = exp_grid(1.0, 500);
        let mut prof = Profile { y: &y, ymax: y[499], evals: 0 };
        let inside = prof.eval(SERIES_S * 0.999);
        let outside = prof.eval(SERIES_S * 1.001);
        assert!((inside.f - outside.f).abs() < 1e-5);
        assert!((inside.grad - outside.grad).abs() < 1e-4 * inside.grad.abs().max(1.0));
        assert!((inside.curv - outside.curv).abs() < 1e-3 * inside.curv.abs().max(1.0));
    }

    #[test]
    fn pwm_recovers_exponential_grid() {
        let y = exp_grid(3.0, 2000);
        let (xi, sigma) = pwm_estimate(&y).unwrap();
        assert!(xi.abs() < 0.02);
        assert!((sigma - 3.0).abs() < 0.1);
    }
}
