//! Fractional Gagliardo seminorms on boundary surfaces, trace families, and
//! scaling-exponent fits.
//!
//! The seminorm is the vertex-lumped double sum
//!   sum_{i != j} |phi(x_i) - phi(x_j)|^p / |x_i - x_j|^(2 + s p) * w_i w_j
//! with Euclidean chord distance in the kernel and per-vertex area weights.
//! At s = 1 the Gagliardo integral diverges and the tangential-gradient L^p
//! norm of the piecewise-linear interpolant takes its place.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::domain::DomainGrid;
use crate::error::{Error, Result};
use crate::field::BoundaryTrace;
use crate::vec3::{self, Vec3};

/// Smoothness and integrability orders of the trace seminorm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeminormParams {
    pub s: f64,
    pub p: f64,
}

impl SeminormParams {
    pub fn new(s: f64, p: f64) -> Result<SeminormParams> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::InvalidParam(format!("s = {s} must lie in (0, 1]")));
        }
        if !(p >= 2.0) {
            return Err(Error::InvalidParam(format!("p = {p} must be at least 2")));
        }
        Ok(SeminormParams { s, p })
    }

    /// Kernel exponent 2 + s p over the two-dimensional boundary.
    pub fn kernel_exponent(&self) -> f64 {
        2.0 + self.s * self.p
    }

    pub fn sp(&self) -> f64 {
        self.s * self.p
    }

    /// At s = 1 the seminorm is the classical gradient norm.
    pub fn is_gradient_endpoint(&self) -> bool {
        (self.s - 1.0).abs() < 1e-12
    }
}

/// The p-th power of the Gagliardo seminorm of a trace.
///
/// s = 1 is routed to [`grad_trace_norm`]; coincident vertices are rejected
/// since the kernel degenerates.
pub fn gagliardo_seminorm_p(trace: &BoundaryTrace, params: &SeminormParams) -> Result<f64> {
    if params.is_gradient_endpoint() {
        return grad_trace_norm(trace, params.p);
    }
    let surface = trace.surface();
    let kernel = params.kernel_exponent();
    let positions = &surface.positions;
    let weights = &surface.weights;
    let values = &trace.values;
    let m = positions.len();

    // row partials in index order keep the reduction deterministic under rayon
    let rows: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| {
            let xi = positions[i];
            let vi = values[i];
            let wi = weights[i];
            let mut acc = 0.0;
            for j in 0..m {
                if j == i {
                    continue;
                }
                let d2 = vec3::norm_sq(vec3::sub(xi, positions[j]));
                if d2 < 1e-24 {
                    return Err(Error::CoincidentVertices(i, j));
                }
                let diff2 = vec3::norm_sq(vec3::sub(vi, values[j]));
                let num = if (params.p - 2.0).abs() < 1e-12 {
                    diff2
                } else {
                    diff2.powf(params.p / 2.0)
                };
                acc += num / d2.powf(kernel / 2.0) * wi * weights[j];
            }
            Ok(acc)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(rows.iter().sum())
}

/// Integral of |grad_T phi|^p over the surface, from the per-triangle
/// constant gradient of the piecewise-linear interpolant.
pub fn grad_trace_norm(trace: &BoundaryTrace, p: f64) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(Error::InvalidParam(format!("p = {p} must be at least 2")));
    }
    let surface = trace.surface();
    let mut total = 0.0;
    for tri in &surface.triangles {
        let area = crate::domain::triangle_area(
            surface.positions[tri[0]],
            surface.positions[tri[1]],
            surface.positions[tri[2]],
        );
        if area < 1e-18 {
            continue;
        }
        let g2 = triangle_gradient_norm_sq(
            surface.positions[tri[0]],
            surface.positions[tri[1]],
            surface.positions[tri[2]],
            trace.values[tri[0]],
            trace.values[tri[1]],
            trace.values[tri[2]],
        );
        let integrand = if (p - 2.0).abs() < 1e-12 {
            g2
        } else {
            g2.powf(p / 2.0)
        };
        total += area * integrand;
    }
    Ok(total)
}

/// Squared Frobenius norm of the constant surface gradient of the linear
/// interpolant on one triangle.
fn triangle_gradient_norm_sq(a: Vec3, b: Vec3, c: Vec3, va: Vec3, vb: Vec3, vc: Vec3) -> f64 {
    let e1 = vec3::sub(b, a);
    let e2 = vec3::sub(c, a);
    let g11 = vec3::dot(e1, e1);
    let g12 = vec3::dot(e1, e2);
    let g22 = vec3::dot(e2, e2);
    let det = g11 * g22 - g12 * g12;
    if det.abs() < 1e-24 {
        return 0.0;
    }
    // gradient of the P1 interpolant: for each value component with edge
    // differences (d1, d2), grad = alpha e1 + beta e2 solving the Gram system
    let mut total = 0.0;
    for comp in 0..3 {
        let d1 = vb[comp] - va[comp];
        let d2 = vc[comp] - va[comp];
        let alpha = (d1 * g22 - d2 * g12) / det;
        let beta = (d2 * g11 - d1 * g12) / det;
        total += alpha * alpha * g11 + 2.0 * alpha * beta * g12 + beta * beta * g22;
    }
    total
}

/// Localized seminorm over a ball plus its scale-invariant score.
#[derive(Debug, Clone, Copy)]
pub struct LocalizedSeminorm {
    /// Pair sum restricted to vertices inside the ball.
    pub value: f64,
    /// rho^(sp-2) * value, the quantity that is scale invariant at sp = 2.
    pub scaled: f64,
    pub vertex_count: usize,
}

/// Pair sum restricted to vertices within `rho` of `center`.
pub fn localized_seminorm_p(
    trace: &BoundaryTrace,
    center: Vec3,
    rho: f64,
    params: &SeminormParams,
) -> Result<LocalizedSeminorm> {
    let surface = trace.surface();
    let spacing = surface.mean_spacing();
    if rho < 2.0 * spacing {
        return Err(Error::InvalidParam(format!(
            "rho = {rho} is below twice the mean vertex spacing ({spacing})"
        )));
    }
    let selected: Vec<usize> = (0..surface.len())
        .filter(|&v| vec3::dist(surface.positions[v], center) <= rho)
        .collect();
    if selected.is_empty() {
        return Err(Error::EmptyRegion(format!(
            "no surface vertices within {rho} of {center:?}"
        )));
    }
    let value = if params.is_gradient_endpoint() {
        // triangles fully inside the ball
        let mut inside = vec![false; surface.len()];
        for &v in &selected {
            inside[v] = true;
        }
        let mut total = 0.0;
        for tri in &surface.triangles {
            if !(inside[tri[0]] && inside[tri[1]] && inside[tri[2]]) {
                continue;
            }
            let area = crate::domain::triangle_area(
                surface.positions[tri[0]],
                surface.positions[tri[1]],
                surface.positions[tri[2]],
            );
            let g2 = triangle_gradient_norm_sq(
                surface.positions[tri[0]],
                surface.positions[tri[1]],
                surface.positions[tri[2]],
                trace.values[tri[0]],
                trace.values[tri[1]],
                trace.values[tri[2]],
            );
            let integrand = if (params.p - 2.0).abs() < 1e-12 {
                g2
            } else {
                g2.powf(params.p / 2.0)
            };
            total += area * integrand;
        }
        total
    } else {
        let kernel = params.kernel_exponent();
        let mut total = 0.0;
        for (ii, &i) in selected.iter().enumerate() {
            let xi = surface.positions[i];
            let vi = trace.values[i];
            let wi = surface.weights[i];
            for (jj, &j) in selected.iter().enumerate() {
                if ii == jj {
                    continue;
                }
                let d2 = vec3::norm_sq(vec3::sub(xi, surface.positions[j]));
                if d2 < 1e-24 {
                    return Err(Error::CoincidentVertices(i, j));
                }
                let diff2 = vec3::norm_sq(vec3::sub(vi, trace.values[j]));
                let num = if (params.p - 2.0).abs() < 1e-12 {
                    diff2
                } else {
                    diff2.powf(params.p / 2.0)
                };
                total += num / d2.powf(kernel / 2.0) * wi * surface.weights[j];
            }
        }
        total
    };
    Ok(LocalizedSeminorm {
        value,
        scaled: rho.powf(params.sp() - 2.0) * value,
        vertex_count: selected.len(),
    })
}

// ---------------------------------------------------------------------------
// Trace families
// ---------------------------------------------------------------------------

/// Boundary data families used throughout the experiments.
#[derive(Debug, Clone)]
pub enum TraceFamily {
    /// The radial projection x/|x|; on the sphere this is the identity map.
    Identity,
    /// Stereographic dilation about a pole, degree one, concentrating as
    /// lambda shrinks.
    Bubble { lambda: f64, pole: Vec3 },
    /// Disjoint compact bubbles with prescribed signs on a constant
    /// background.
    KBubbles {
        lambda: f64,
        poles: Vec<Vec3>,
        signs: Vec<i8>,
    },
    /// A base family composed with a rotation of magnitude delta localized in
    /// a cap around a fixed off-pole point.
    Perturbed {
        base: Box<TraceFamily>,
        delta: f64,
        cap_center: Vec3,
        cap_radius: f64,
    },
}

/// North pole of the target sphere, the constant background of bubble data.
pub const BACKGROUND: Vec3 = [0.0, 0.0, 1.0];

const SOUTH: Vec3 = [0.0, 0.0, -1.0];

/// Well-separated default poles for k-bubble data.
pub fn default_poles(k: usize) -> Vec<Vec3> {
    let sq32 = 3.0_f64.sqrt() / 2.0;
    match k {
        0 => vec![],
        1 => vec![[0.0, 0.0, -1.0]],
        2 => vec![[0.0, 0.0, -1.0], [0.0, 0.0, 1.0]],
        3 => vec![[1.0, 0.0, 0.0], [-0.5, sq32, 0.0], [-0.5, -sq32, 0.0]],
        _ => {
            // Fibonacci spiral, adequate separation for small k
            let mut poles = Vec::with_capacity(k);
            let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
            for i in 0..k {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / k as f64;
                let r = (1.0 - z * z).sqrt();
                let th = golden * i as f64;
                poles.push([r * th.cos(), r * th.sin(), z]);
            }
            poles
        }
    }
}

fn stereographic(q: Vec3) -> Option<[f64; 2]> {
    let denom = 1.0 - q[2];
    if denom.abs() < 1e-12 {
        return None;
    }
    Some([q[0] / denom, q[1] / denom])
}

fn inverse_stereographic(w: [f64; 2]) -> Vec3 {
    let r2 = w[0] * w[0] + w[1] * w[1];
    let denom = 1.0 + r2;
    [2.0 * w[0] / denom, 2.0 * w[1] / denom, (r2 - 1.0) / denom]
}

/// The dilation profile: stereographic coordinates about the north pole are
/// divided by lambda, so values escape to the north pole away from the south.
fn bubble_profile(q: Vec3, lambda: f64) -> Vec3 {
    match stereographic(q) {
        None => BACKGROUND,
        Some(w) => inverse_stereographic([w[0] / lambda, w[1] / lambda]),
    }
}

/// Truncation band of concentrated bubbles in chart radius tan(theta/2),
/// in units of lambda. The pure dilation has a slow far-field tail; blending
/// it onto the constant background across a band that scales with lambda
/// makes the lambda < 1 members exactly self-similar in the stereographic
/// chart, and the blend is a homotopy so the degree is unchanged.
const BUBBLE_BAND_INNER: f64 = 2.0;
const BUBBLE_BAND_OUTER: f64 = 6.0;

/// Bubble value at polar angle `theta` from the pole, truncated to its
/// concentration cap for lambda < 1. `q` is the point already rotated so the
/// pole sits at the south pole of the domain chart.
fn truncated_bubble(q: Vec3, theta: f64, lambda: f64) -> Vec3 {
    if lambda >= 1.0 {
        return bubble_profile(q, lambda);
    }
    let t = (theta / 2.0).tan();
    let t0 = BUBBLE_BAND_INNER * lambda;
    let t1 = BUBBLE_BAND_OUTER * lambda;
    if t >= t1 {
        return BACKGROUND;
    }
    let v = bubble_profile(q, lambda);
    if t <= t0 {
        v
    } else {
        slerp(v, BACKGROUND, smoothstep((t - t0) / (t1 - t0)))
    }
}

fn slerp(a: Vec3, b: Vec3, t: f64) -> Vec3 {
    let cos_om = vec3::dot(a, b).clamp(-1.0, 1.0);
    let om = cos_om.acos();
    if om < 1e-9 {
        return a;
    }
    let so = om.sin();
    if so < 1e-12 {
        return a;
    }
    let fa = ((1.0 - t) * om).sin() / so;
    let fb = (t * om).sin() / so;
    vec3::normalize([
        fa * a[0] + fb * b[0],
        fa * a[1] + fb * b[1],
        fa * a[2] + fb * b[2],
    ])
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn eval_family(family: &TraceFamily, x: Vec3) -> Vec3 {
    let xhat = vec3::normalize(x);
    match family {
        TraceFamily::Identity => xhat,
        TraceFamily::Bubble { lambda, pole } => {
            let pole = vec3::normalize(*pole);
            let rot = vec3::rotation_between(pole, SOUTH);
            let theta = vec3::dot(xhat, pole).clamp(-1.0, 1.0).acos();
            truncated_bubble(vec3::mat_apply(&rot, xhat), theta, *lambda)
        }
        TraceFamily::KBubbles {
            lambda,
            poles,
            signs,
        } => {
            if poles.is_empty() {
                return BACKGROUND;
            }
            // nearest pole owns the point
            let (i, &pole) = poles
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| {
                    vec3::dot(xhat, vec3::normalize(**a))
                        .partial_cmp(&vec3::dot(xhat, vec3::normalize(**b)))
                        .unwrap()
                })
                .unwrap();
            let pole = vec3::normalize(pole);
            let theta = vec3::dot(xhat, pole).clamp(-1.0, 1.0).acos();
            // band scaled with lambda but clamped so neighboring caps stay
            // disjoint
            let sep_limit = (0.245 * min_separation(poles)).tan();
            let t1 = (BUBBLE_BAND_OUTER * lambda).min(sep_limit);
            let t0 = (BUBBLE_BAND_INNER * lambda).min(0.6 * t1);
            let t = (theta / 2.0).tan();
            if t >= t1 {
                return BACKGROUND;
            }
            let rot = vec3::rotation_between(pole, SOUTH);
            let mut q = vec3::mat_apply(&rot, xhat);
            if signs.get(i).copied().unwrap_or(1) < 0 {
                q[1] = -q[1]; // domain reflection flips the degree
            }
            let v = bubble_profile(q, *lambda);
            if t <= t0 {
                v
            } else {
                // blend to the background; this is homotopic to the unblended
                // map, so the degree of the cap is unchanged
                slerp(v, BACKGROUND, smoothstep((t - t0) / (t1 - t0)))
            }
        }
        TraceFamily::Perturbed {
            base,
            delta,
            cap_center,
            cap_radius,
        } => {
            let v = eval_family(base, x);
            let center = vec3::normalize(*cap_center);
            let ang = vec3::dot(xhat, center).clamp(-1.0, 1.0).acos();
            let r1 = *cap_radius;
            let r0 = 0.5 * r1;
            let amp = if ang <= r0 {
                1.0
            } else if ang >= r1 {
                0.0
            } else {
                1.0 - smoothstep((ang - r0) / (r1 - r0))
            };
            if amp == 0.0 || *delta == 0.0 {
                v
            } else {
                vec3::rotate_about(center, delta * amp, v)
            }
        }
    }
}

fn min_separation(poles: &[Vec3]) -> f64 {
    let mut min_sep = std::f64::consts::PI;
    for i in 0..poles.len() {
        for j in (i + 1)..poles.len() {
            let a = vec3::normalize(poles[i]);
            let b = vec3::normalize(poles[j]);
            min_sep = min_sep.min(vec3::dot(a, b).clamp(-1.0, 1.0).acos());
        }
    }
    min_sep
}

/// Materialize a trace family on the boundary surface of a grid.
pub fn make_trace(family: &TraceFamily, grid: Arc<DomainGrid>) -> Result<BoundaryTrace> {
    validate_family(family)?;
    let values = grid
        .surface
        .positions
        .iter()
        .map(|&p| eval_family(family, p))
        .collect();
    Ok(BoundaryTrace { grid, values })
}

fn validate_family(family: &TraceFamily) -> Result<()> {
    match family {
        TraceFamily::Identity => Ok(()),
        TraceFamily::Bubble { lambda, .. } => {
            if !(*lambda > 0.0 && *lambda <= 1.0) {
                return Err(Error::InvalidParam(format!(
                    "bubble lambda = {lambda} must lie in (0, 1]"
                )));
            }
            Ok(())
        }
        TraceFamily::KBubbles {
            lambda,
            poles,
            signs,
        } => {
            if !(*lambda > 0.0 && *lambda <= 1.0) {
                return Err(Error::InvalidParam(format!(
                    "bubble lambda = {lambda} must lie in (0, 1]"
                )));
            }
            if signs.len() != poles.len() {
                return Err(Error::InvalidParam(
                    "signs and poles must have equal length".into(),
                ));
            }
            for i in 0..poles.len() {
                for j in (i + 1)..poles.len() {
                    let chord = vec3::dist(vec3::normalize(poles[i]), vec3::normalize(poles[j]));
                    if chord < 4.0 * lambda {
                        return Err(Error::OverlappingBubbles(i, j));
                    }
                }
            }
            Ok(())
        }
        TraceFamily::Perturbed {
            base, cap_radius, ..
        } => {
            if !(*cap_radius > 0.0 && *cap_radius < std::f64::consts::PI) {
                return Err(Error::InvalidParam(format!(
                    "cap radius {cap_radius} out of range"
                )));
            }
            validate_family(base)
        }
    }
}

// ---------------------------------------------------------------------------
// Scaling fits
// ---------------------------------------------------------------------------

/// Least-squares fit of log seminorm^p against log lambda for the bubble
/// family. The expected slope is 2 - sp for the p-th power quantity.
#[derive(Debug, Clone)]
pub struct ScalingFit {
    pub slope: f64,
    pub samples: Vec<(f64, f64)>,
}

pub fn fit_scaling_exponent(
    grid: Arc<DomainGrid>,
    lambdas: &[f64],
    params: &SeminormParams,
    pole: Vec3,
) -> Result<ScalingFit> {
    if lambdas.len() < 3 {
        return Err(Error::InvalidParam("need at least three lambdas".into()));
    }
    let max = lambdas.iter().cloned().fold(f64::MIN, f64::max);
    let min = lambdas.iter().cloned().fold(f64::MAX, f64::min);
    if !(min > 0.0) || max / min < 4.0 {
        return Err(Error::InvalidParam(
            "lambdas must span at least a factor of four".into(),
        ));
    }
    let mut samples = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let trace = make_trace(&TraceFamily::Bubble { lambda, pole }, grid.clone())?;
        let value = gagliardo_seminorm_p(&trace, params)?;
        samples.push((lambda, value));
    }
    let xs: Vec<f64> = samples.iter().map(|&(l, _)| l.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|&(_, v)| v.ln()).collect();
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Ok(ScalingFit { slope, samples })
}

/// A smooth random unit trace: a trigonometric polynomial with a dominant
/// constant part, normalized to the sphere. Used as generic test data.
pub fn random_smooth_trace(grid: Arc<DomainGrid>, seed: u64) -> BoundaryTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir: Vec3 = {
        let v: Vec3 = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        if vec3::norm(v) < 1e-6 {
            vec3::E3
        } else {
            vec3::normalize(v)
        }
    };
    let c0 = vec3::scale(dir, 2.0);
    let mut waves = Vec::new();
    for _ in 0..3 {
        let amp: Vec3 = [
            rng.random_range(-0.4..0.4),
            rng.random_range(-0.4..0.4),
            rng.random_range(-0.4..0.4),
        ];
        let k: Vec3 = [
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        ];
        let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        waves.push((amp, k, phase));
    }
    let values = grid
        .surface
        .positions
        .iter()
        .map(|&p| {
            let mut v = c0;
            for (amp, k, phase) in &waves {
                let s = (vec3::dot(*k, p) + phase).sin();
                v = vec3::add(v, vec3::scale(*amp, s));
            }
            vec3::normalize(v)
        })
        .collect();
    BoundaryTrace { grid, values }
}
