//! Box-constrained COBYLA.
//!
//! Powell's method keeps `m + 1` interpolation points, fits the linear model
//! through them and moves inside a trust region. Two radii are tracked as in
//! his later trust-region codes: the resolution `rho` only ever shrinks, from
//! `rhobeg` to `rhoend`, while the step radius `delta >= rho` grows after
//! steps that the model predicted well and shrinks after poor ones. With only
//! bound constraints every iterate is kept feasible, so the merit function of
//! the general algorithm reduces to the objective itself and the trust-region
//! subproblem (minimize a linear function over ball ∩ box) is solved exactly.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CobylaError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("objective returned {value} at evaluation {eval}, x = {x:?}")]
    NonFinite { value: f64, eval: usize, x: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CobylaResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    /// Final resolution radius.
    pub rho: f64,
}

/// Vertices farther than `DELTA * delta` from the best point are replaced.
const DELTA: f64 = 1.1;
/// Vertices closer than `ALPHA * delta` to their opposite face are replaced.
const ALPHA: f64 = 0.25;
/// Geometry-repair steps have length `GAMMA * delta`.
const GAMMA: f64 = 0.5;

struct Run<'a, F> {
    f: F,
    lo: &'a [f64],
    hi: &'a [f64],
    maxfun: usize,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Run<'_, F> {
    fn eval(&mut self, x: &[f64]) -> Result<f64, CobylaError> {
        self.evals += 1;
        let v = (self.f)(x);
        if !v.is_finite() {
            return Err(CobylaError::NonFinite {
                value: v,
                eval: self.evals,
                x: x.to_vec(),
            });
        }
        Ok(v)
    }

    fn exhausted(&self) -> bool {
        self.evals >= self.maxfun
    }

    fn clip(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lo[i], self.hi[i]);
        }
    }
}

/// Minimizes `f` over the box `bounds` starting from `x0` (clipped into the
/// box). Pass infinite bounds for an unconstrained coordinate. The objective
/// is called at most `maxfun` times.
pub fn cobyla_minimize<F>(
    f: F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    rhobeg: f64,
    rhoend: f64,
    maxfun: usize,
) -> Result<CobylaResult, CobylaError>
where
    F: FnMut(&[f64]) -> f64,
{
    let m = x0.len();
    if m == 0 || bounds.len() != m {
        return Err(CobylaError::InvalidArgument(format!(
            "{} coordinates with {} bounds",
            m,
            bounds.len()
        )));
    }
    if !(rhobeg > rhoend && rhoend > 0.0) {
        return Err(CobylaError::InvalidArgument(format!(
            "need rhobeg > rhoend > 0, got {rhobeg} and {rhoend}"
        )));
    }
    if bounds.iter().any(|&(l, h)| !(l < h)) {
        return Err(CobylaError::InvalidArgument("empty bound interval".into()));
    }
    if maxfun == 0 {
        return Err(CobylaError::InvalidArgument("maxfun is 0".into()));
    }
    let lo: Vec<f64> = bounds.iter().map(|b| b.0).collect();
    let hi: Vec<f64> = bounds.iter().map(|b| b.1).collect();
    let mut run = Run {
        f,
        lo: &lo,
        hi: &hi,
        maxfun,
        evals: 0,
    };

    let mut start = x0.to_vec();
    run.clip(&mut start);
    let mut pts = vec![start.clone()];
    let mut fs = vec![run.eval(&start)?];
    for i in 0..m {
        if run.exhausted() {
            break;
        }
        let mut x = start.clone();
        // step inward when the forward vertex would leave the box
        x[i] += if start[i] + rhobeg <= hi[i] { rhobeg } else { -rhobeg };
        run.clip(&mut x);
        fs.push(run.eval(&x)?);
        pts.push(x);
    }

    let mut rho = rhobeg;
    let mut delta = rhobeg;
    if pts.len() < m + 1 {
        return Ok(finish(&pts, &fs, run.evals, rho));
    }

    let mut repaired = false;
    'outer: while !run.exhausted() {
        let best = argmin(&fs);
        let base = DVector::from_column_slice(&pts[best]);
        let others: Vec<usize> = (0..=m).filter(|&j| j != best).collect();
        let d = DMatrix::from_fn(m, m, |r, c| pts[others[c]][r] - base[r]);
        let Some(inv) = d.clone().try_inverse() else {
            // collapse: rebuild a coordinate simplex around the best point
            for (c, &j) in others.iter().enumerate() {
                if run.exhausted() {
                    break 'outer;
                }
                let mut x = pts[best].clone();
                x[c] += if x[c] + delta <= hi[c] { delta } else { -delta };
                run.clip(&mut x);
                fs[j] = run.eval(&x)?;
                pts[j] = x;
            }
            continue;
        };
        let df = DVector::from_iterator(m, others.iter().map(|&j| fs[j] - fs[best]));
        let g = inv.transpose() * &df;

        // geometry: distance of each vertex from the best point and from
        // the face spanned by the remaining vertices
        let eta: Vec<f64> = (0..m).map(|c| d.column(c).norm()).collect();
        let sig: Vec<f64> = (0..m).map(|c| 1.0 / inv.row(c).norm()).collect();
        let far = argmax(&eta);
        let flat = argmin(&sig);
        let acceptable = eta[far] <= DELTA * delta && sig[flat] >= ALPHA * delta;

        let step = box_ball_step(&g, delta, &pts[best], &lo, &hi);
        let snorm = step.norm();
        let mut good = false;
        if snorm >= 0.5 * rho {
            let x: Vec<f64> = (0..m).map(|i| (base[i] + step[i]).clamp(lo[i], hi[i])).collect();
            let fx = run.eval(&x)?;
            let predicted = -g.dot(&step);
            let actual = fs[best] - fx;
            let ratio = if predicted > 0.0 { actual / predicted } else { -1.0 };
            delta = if ratio <= 0.1 {
                0.5 * snorm
            } else if ratio <= 0.7 {
                (0.5 * delta).max(snorm)
            } else {
                (0.5 * delta).max(2.0 * snorm)
            };
            if delta <= 1.5 * rho {
                delta = rho;
            }
            if let Some(c) = vertex_to_drop(&inv, &step, &sig, &eta, &pts, &others, &x, actual > 0.0, rho) {
                let j = others[c];
                pts[j] = x;
                fs[j] = fx;
                good = actual > 0.0 && ratio > 0.1;
            }
        } else {
            delta = (0.5 * delta).max(rho);
        }
        if good {
            repaired = false;
            continue;
        }

        if !acceptable && !repaired && !run.exhausted() {
            // replace the worst-placed vertex by a step along the normal of
            // its opposite face
            let c = if eta[far] > DELTA * delta { far } else { flat };
            let normal = inv.row(c).transpose() / inv.row(c).norm();
            let len = GAMMA * delta;
            let downhill = if g.dot(&normal) <= 0.0 { 1.0 } else { -1.0 };
            let fits = |s: f64| (0..m).all(|i| (lo[i]..=hi[i]).contains(&(base[i] + s * len * normal[i])));
            let sign = if fits(downhill) || !fits(-downhill) { downhill } else { -downhill };
            let x = candidate(&base, &(normal * (sign * len)), &lo, &hi);
            let j = others[c];
            fs[j] = run.eval(&x)?;
            pts[j] = x;
            repaired = true;
            continue;
        }
        repaired = false;
        if delta <= rho {
            if !shrink(&mut rho, rhoend) {
                break;
            }
            delta = rho;
        }
    }
    Ok(finish(&pts, &fs, run.evals, rho))
}

/// Picks the vertex the trial point replaces, Powell's rule: keep the simplex
/// well conditioned, and after a successful step prefer dropping a vertex that
/// has fallen far behind.
#[allow(clippy::too_many_arguments)]
fn vertex_to_drop(
    inv: &DMatrix<f64>,
    step: &DVector<f64>,
    sig: &[f64],
    eta: &[f64],
    pts: &[Vec<f64>],
    others: &[usize],
    x: &[f64],
    improved: bool,
    rho: f64,
) -> Option<usize> {
    let m = step.len();
    let weights = inv * step;
    let mut drop = None;
    let mut score = if improved { 0.0 } else { 1.0 };
    for c in 0..m {
        let w = weights[c].abs();
        if w > score {
            score = w;
            drop = Some(c);
        }
    }
    let mut edge = DELTA * rho;
    let mut far_drop = None;
    for c in 0..m {
        let sigbar = weights[c].abs() * sig[c];
        if sigbar >= ALPHA * rho || sigbar >= sig[c] {
            let dist = if improved {
                let v = &pts[others[c]];
                v.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
            } else {
                eta[c]
            };
            if dist > edge {
                edge = dist;
                far_drop = Some(c);
            }
        }
    }
    far_drop.or(drop)
}

/// Halves the radius; snaps to `rhoend` when close. Returns false once the
/// radius is already at its floor.
fn shrink(rho: &mut f64, rhoend: f64) -> bool {
    if *rho <= rhoend {
        return false;
    }
    *rho *= 0.5;
    if *rho <= 1.5 * rhoend {
        *rho = rhoend;
    }
    true
}

fn candidate(base: &DVector<f64>, step: &DVector<f64>, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    (0..base.len())
        .map(|i| (base[i] + step[i]).clamp(lo[i], hi[i]))
        .collect()
}

/// Exact minimizer of `g · d` subject to `|d| ≤ rho` and `lo ≤ x + d ≤ hi`.
///
/// The free coordinates move along `-g` scaled to use up the remaining
/// radius; coordinates that would overshoot are pinned to their bound. Pinning
/// only ever increases the scale of the free part, so pinned coordinates stay
/// pinned and the loop terminates after at most `m` rounds.
pub(crate) fn box_ball_step(g: &DVector<f64>, rho: f64, x: &[f64], lo: &[f64], hi: &[f64]) -> DVector<f64> {
    let m = g.len();
    let mut d = DVector::zeros(m);
    let mut pinned = vec![false; m];
    for (i, p) in pinned.iter_mut().enumerate() {
        // already on the bound the gradient pushes towards
        if g[i] == 0.0 || (g[i] > 0.0 && x[i] <= lo[i]) || (g[i] < 0.0 && x[i] >= hi[i]) {
            *p = true;
        }
    }
    loop {
        let used: f64 = (0..m).filter(|&i| pinned[i]).map(|i| d[i] * d[i]).sum();
        let gnorm: f64 = (0..m).filter(|&i| !pinned[i]).map(|i| g[i] * g[i]).sum::<f64>().sqrt();
        if gnorm == 0.0 {
            return d;
        }
        let t = (rho * rho - used).max(0.0).sqrt() / gnorm;
        let mut changed = false;
        for i in 0..m {
            if pinned[i] {
                continue;
            }
            let v = -t * g[i];
            let (l, h) = (lo[i] - x[i], hi[i] - x[i]);
            if v < l || v > h {
                d[i] = v.clamp(l, h);
                pinned[i] = true;
                changed = true;
            } else {
                d[i] = v;
            }
        }
        if !changed {
            return d;
        }
    }
}

fn finish(pts: &[Vec<f64>], fs: &[f64], evals: usize, rho: f64) -> CobylaResult {
    let b = argmin(fs);
    CobylaResult {
        x: pts[b].clone(),
        f: fs[b],
        evals,
        rho,
    }
}

fn argmin(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |b, i| if v[i] < v[b] { i } else { b })
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b })
}
