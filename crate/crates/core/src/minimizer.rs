//! Approximate minimizing harmonic maps: componentwise harmonic extension,
//! the sphere-valued projection construction with its 192 energy bound, and
//! sphere-constrained projected heat flow.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::domain::DomainGrid;
use crate::energy::dirichlet_energy_of_values;
use crate::error::{Error, Result};
use crate::field::{pin_shell_values, BoundaryTrace, SphereField, VectorField};
use crate::vec3::{self, Vec3};

/// Parameters of the projected heat flow.
#[derive(Debug, Clone, Copy)]
pub struct SolverParams {
    /// Descent step; must lie in (0, h^2/6].
    pub tau: f64,
    pub max_iters: usize,
    /// Relative energy decrease over a 100-iteration window that counts as
    /// converged.
    pub rel_tol: f64,
    /// Number of runs: the first starts from the projected harmonic
    /// extension, the rest from seeded random unit fields.
    pub restarts: usize,
    pub seed: u64,
}

impl SolverParams {
    pub fn default_for(h: f64) -> SolverParams {
        SolverParams {
            tau: h * h / 8.0,
            max_iters: 20_000,
            rel_tol: 1e-7,
            restarts: 1,
            seed: 12345,
        }
    }

    pub fn validate(&self, h: f64) -> Result<()> {
        let tau_max = h * h / 6.0;
        if !(self.tau > 0.0 && self.tau <= tau_max + 1e-18) {
            return Err(Error::InvalidParam(format!(
                "tau = {} must lie in (0, h^2/6 = {tau_max}]",
                self.tau
            )));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidParam("rel_tol must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParam("need at least one run".into()));
        }
        Ok(())
    }
}

const STOP_WINDOW: usize = 100;

/// Componentwise discrete Laplace solve with the boundary shell pinned to the
/// interpolated trace (Jacobi-style simultaneous sweeps).
pub fn harmonic_extension(trace: &BoundaryTrace) -> Result<VectorField> {
    let grid = trace.grid.clone();
    let pins = pin_shell_values(&grid, trace, false);
    let trace_sup = trace
        .values
        .iter()
        .map(|v| vec3::norm(*v))
        .fold(0.0, f64::max);
    let tol = 1e-8 * trace_sup.max(1e-30);

    let mut values = vec![[0.0; 3]; grid.num_nodes()];
    // start from the mean boundary value in the interior
    let mean = {
        let mut m = [0.0; 3];
        for v in &trace.values {
            m = vec3::add(m, *v);
        }
        vec3::scale(m, 1.0 / trace.values.len().max(1) as f64)
    };
    for idx in 0..grid.num_nodes() {
        if grid.inside[idx] {
            values[idx] = mean;
        }
    }
    for &(idx, v) in &pins {
        values[idx] = v;
    }

    let max_sweeps = 400_000usize;
    let mut fresh = values.clone();
    for _ in 0..max_sweeps {
        let max_update = jacobi_sweep(&grid, &values, &mut fresh);
        std::mem::swap(&mut values, &mut fresh);
        if max_update <= tol {
            let vertex_values = trace.values.clone();
            mark_outside(&grid, &mut values);
            return Ok(VectorField {
                grid,
                node_values: values,
                vertex_values,
            });
        }
    }
    Err(Error::NoConvergence {
        sweeps: max_sweeps,
        residual: tol,
    })
}

fn mark_outside(grid: &DomainGrid, values: &mut [Vec3]) {
    for (idx, &inside) in grid.inside.iter().enumerate() {
        if !inside {
            values[idx] = [f64::NAN; 3];
        }
    }
}

/// One simultaneous sweep over z-slabs; returns the largest nodal update.
fn jacobi_sweep(grid: &DomainGrid, values: &[Vec3], fresh: &mut [Vec3]) -> f64 {
    let n = grid.n;
    let slab = n * n;
    fresh
        .par_chunks_mut(slab)
        .enumerate()
        .map(|(iz, out)| {
            let mut worst = 0.0f64;
            for iy in 0..n {
                for ix in 0..n {
                    let idx = (iz * n + iy) * n + ix;
                    let local = iy * n + ix;
                    if !grid.interior[idx] {
                        out[local] = values[idx];
                        continue;
                    }
                    let avg = vec3::scale(
                        [
                            values[idx - 1][0]
                                + values[idx + 1][0]
                                + values[idx - n][0]
                                + values[idx + n][0]
                                + values[idx - slab][0]
                                + values[idx + slab][0],
                            values[idx - 1][1]
                                + values[idx + 1][1]
                                + values[idx - n][1]
                                + values[idx + n][1]
                                + values[idx - slab][1]
                                + values[idx + slab][1],
                            values[idx - 1][2]
                                + values[idx + 1][2]
                                + values[idx - n][2]
                                + values[idx + n][2]
                                + values[idx - slab][2]
                                + values[idx + slab][2],
                        ],
                        1.0 / 6.0,
                    );
                    worst = worst.max(vec3::dist(avg, values[idx]));
                    out[local] = avg;
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// Result of the sphere-valued projection construction.
#[derive(Debug, Clone)]
pub struct ExtensionResult {
    pub field: SphereField,
    /// Chosen projection center in the open half ball.
    pub a_star: Vec3,
    /// Energy of the sphere-valued extension over the energy of the input.
    pub energy_ratio: f64,
}

/// Candidate centers: an 11^3 lattice on [-0.45, 0.45]^3 restricted to
/// |a| < 1/2, ordered center-out so ties resolve to the smallest |a|.
pub fn candidate_centers() -> Vec<Vec3> {
    let mut centers = Vec::new();
    for kx in 0..11 {
        for ky in 0..11 {
            for kz in 0..11 {
                let a = [
                    -0.45 + 0.09 * kx as f64,
                    -0.45 + 0.09 * ky as f64,
                    -0.45 + 0.09 * kz as f64,
                ];
                if vec3::norm(a) < 0.5 {
                    centers.push(a);
                }
            }
        }
    }
    centers.sort_by(|a, b| {
        vec3::norm_sq(*a)
            .partial_cmp(&vec3::norm_sq(*b))
            .unwrap()
            .then_with(|| a.partial_cmp(b).unwrap())
    });
    centers
}

/// Radial projection of v from the best center a, then the inverse of the
/// chordal homeomorphism, yielding a sphere-valued field with the same
/// boundary values.
pub fn project_extension(vfield: &VectorField) -> Result<ExtensionResult> {
    let grid = &vfield.grid;
    for idx in 0..grid.num_nodes() {
        if grid.inside[idx] && !grid.interior[idx] {
            let n = vec3::norm(vfield.node_values[idx]);
            if (n - 1.0).abs() > 0.2 {
                return Err(Error::InvalidParam(format!(
                    "boundary shell value has norm {n}; the input must be unit on the boundary"
                )));
            }
        }
    }
    let input_energy = dirichlet_energy_of_values(grid, &vfield.node_values);
    let centers = candidate_centers();

    let evaluated: Vec<Option<f64>> = centers
        .par_iter()
        .map(|&a| {
            let mut values = vec![[f64::NAN; 3]; grid.num_nodes()];
            for idx in 0..grid.num_nodes() {
                if !grid.inside[idx] {
                    continue;
                }
                let d = vec3::sub(vfield.node_values[idx], a);
                let n = vec3::norm(d);
                if n < 1e-12 {
                    return None; // candidate disqualified
                }
                values[idx] = vec3::scale(d, 1.0 / n);
            }
            Some(dirichlet_energy_of_values(grid, &values))
        })
        .collect();

    let mut best: Option<(f64, usize)> = None;
    for (i, e) in evaluated.iter().enumerate() {
        if let Some(e) = e {
            if best.map_or(true, |(be, _)| *e < be) {
                best = Some((*e, i));
            }
        }
    }
    let (_, best_idx) = best.ok_or(Error::AllCandidatesDisqualified)?;
    let a = centers[best_idx];

    let node_values: Vec<Vec3> = (0..grid.num_nodes())
        .map(|idx| {
            if !grid.inside[idx] {
                return [f64::NAN; 3];
            }
            let d = vec3::sub(vfield.node_values[idx], a);
            let u = vec3::scale(d, 1.0 / vec3::norm(d));
            chordal_inverse(a, u)
        })
        .collect();
    let vertex_values: Vec<Vec3> = vfield
        .vertex_values
        .iter()
        .map(|&v| vec3::normalize(v))
        .collect();
    let field = SphereField {
        grid: grid.clone(),
        node_values,
        vertex_values,
    };
    let out_energy = dirichlet_energy_of_values(grid, &field.node_values);
    let energy_ratio = if input_energy > 0.0 {
        out_energy / input_energy
    } else {
        1.0
    };
    Ok(ExtensionResult {
        field,
        a_star: a,
        energy_ratio,
    })
}

/// Inverse of xi -> (xi - a)/|xi - a| on the unit sphere: the point a + t xi
/// with t > 0 chosen so the result is unit.
fn chordal_inverse(a: Vec3, xi: Vec3) -> Vec3 {
    let ad = vec3::dot(a, xi);
    let t = -ad + (ad * ad + 1.0 - vec3::norm_sq(a)).sqrt();
    vec3::add(a, vec3::scale(xi, t))
}

/// One run of the projected heat flow.
#[derive(Debug, Clone)]
pub struct MinimizeRun {
    pub run_index: usize,
    /// (iteration, edge energy, largest nodal move).
    pub energy_history: Vec<(usize, f64, f64)>,
    pub final_energy: f64,
    pub iterations: usize,
    /// The relative-decrease stopping rule fired (rather than max_iters).
    pub converged: bool,
    pub diverged: bool,
}

impl MinimizeRun {
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iter,energy,max_node_move\n");
        for &(it, e, mv) in &self.energy_history {
            out.push_str(&format!("{it},{e:.17e},{mv:.17e}\n"));
        }
        out
    }
}

/// Outcome of minimize: the lowest-energy field plus all run records.
#[derive(Debug)]
pub struct MinimizeOutcome {
    pub field: SphereField,
    pub best_run: usize,
    pub runs: Vec<MinimizeRun>,
}

/// Edge-based Dirichlet form h * sum over axis edges of |u_i - u_j|^2; this
/// is the quantity the heat step descends, so its history is monotone.
pub fn edge_energy(grid: &DomainGrid, values: &[Vec3]) -> f64 {
    let n = grid.n;
    let partials: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|iz| {
            let mut acc = 0.0;
            for iy in 0..n {
                for ix in 0..n {
                    let idx = grid.idx(ix, iy, iz);
                    if !grid.inside[idx] {
                        continue;
                    }
                    let u = values[idx];
                    if ix + 1 < n {
                        let j = grid.idx(ix + 1, iy, iz);
                        if grid.inside[j] {
                            acc += vec3::norm_sq(vec3::sub(values[j], u));
                        }
                    }
                    if iy + 1 < n {
                        let j = grid.idx(ix, iy + 1, iz);
                        if grid.inside[j] {
                            acc += vec3::norm_sq(vec3::sub(values[j], u));
                        }
                    }
                    if iz + 1 < n {
                        let j = grid.idx(ix, iy, iz + 1);
                        if grid.inside[j] {
                            acc += vec3::norm_sq(vec3::sub(values[j], u));
                        }
                    }
                }
            }
            acc
        })
        .collect();
    grid.h * partials.iter().sum::<f64>()
}

/// Sphere-constrained energy descent for the given trace.
///
/// The first run starts from the projected harmonic extension, further runs
/// from seeded random unit fields; every run keeps the shell pinned to the
/// interpolated trace and the lowest-energy run wins.
pub fn minimize(
    grid: Arc<DomainGrid>,
    trace: &BoundaryTrace,
    params: &SolverParams,
) -> Result<MinimizeOutcome> {
    params.validate(grid.h)?;
    let pins = pin_shell_values(&grid, trace, true);

    let extension_init = {
        let hext = harmonic_extension(trace)?;
        let proj = project_extension(&hext)?;
        proj.field.node_values
    };

    let mut runs = Vec::with_capacity(params.restarts);
    let mut best: Option<(f64, usize, Vec<Vec3>)> = None;
    for run_index in 0..params.restarts {
        let mut values = if run_index == 0 {
            extension_init.clone()
        } else {
            random_unit_values(&grid, params.seed.wrapping_add(run_index as u64))
        };
        for &(idx, v) in &pins {
            values[idx] = v;
        }
        let run = heat_flow_run(&grid, &mut values, params, run_index);
        if !run.diverged {
            let better = best
                .as_ref()
                .map_or(true, |(be, _, _)| run.final_energy < *be);
            if better {
                best = Some((run.final_energy, run_index, values.clone()));
            }
        }
        runs.push(run);
    }
    let (_, best_run, node_values) = best.ok_or(Error::Divergence {
        iter: 0,
        increase: f64::NAN,
    })?;

    let vertex_values = trace.values.clone();
    Ok(MinimizeOutcome {
        field: SphereField {
            grid,
            node_values,
            vertex_values,
        },
        best_run,
        runs,
    })
}

/// One heat-flow run continued from a given field, with the shell re-pinned
/// to the trace. Used for continuation studies where the comparison must not
/// depend on the initialization lottery.
pub fn minimize_with_init(
    grid: Arc<DomainGrid>,
    trace: &BoundaryTrace,
    params: &SolverParams,
    init: &SphereField,
) -> Result<MinimizeOutcome> {
    params.validate(grid.h)?;
    if !grid.same_layout(&init.grid) {
        return Err(Error::GridMismatch("init field grid differs".into()));
    }
    let pins = pin_shell_values(&grid, trace, true);
    let mut values = init.node_values.clone();
    for &(idx, v) in &pins {
        values[idx] = v;
    }
    let run = heat_flow_run(&grid, &mut values, params, 0);
    if run.diverged {
        return Err(Error::Divergence {
            iter: run.iterations,
            increase: f64::NAN,
        });
    }
    let vertex_values = trace.values.clone();
    Ok(MinimizeOutcome {
        field: SphereField {
            grid,
            node_values: values,
            vertex_values,
        },
        best_run: 0,
        runs: vec![run],
    })
}

fn random_unit_values(grid: &DomainGrid, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![[f64::NAN; 3]; grid.num_nodes()];
    for idx in 0..grid.num_nodes() {
        if grid.inside[idx] {
            let z: f64 = rng.random_range(-1.0..1.0);
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let r = (1.0 - z * z).sqrt();
            values[idx] = [r * phi.cos(), r * phi.sin(), z];
        }
    }
    values
}

fn heat_flow_run(
    grid: &DomainGrid,
    values: &mut Vec<Vec3>,
    params: &SolverParams,
    run_index: usize,
) -> MinimizeRun {
    let weight = params.tau / (grid.h * grid.h);
    let mut energy = edge_energy(grid, values);
    let mut history = vec![(0usize, energy, 0.0f64)];
    let mut fresh = values.clone();
    let mut converged = energy == 0.0;
    let mut diverged = false;
    let mut iterations = 0usize;

    if !converged {
        for iter in 1..=params.max_iters {
            let max_move = projected_heat_step(grid, values, &mut fresh, weight);
            std::mem::swap(values, &mut fresh);
            let new_energy = edge_energy(grid, values);
            history.push((iter, new_energy, max_move));
            iterations = iter;
            if new_energy > energy * (1.0 + 1e-12) {
                diverged = true;
                break;
            }
            energy = new_energy;
            if energy == 0.0 {
                converged = true;
                break;
            }
            if iter >= STOP_WINDOW {
                let prev = history[iter - STOP_WINDOW].1;
                if prev - energy <= params.rel_tol * energy.max(1e-300) {
                    converged = true;
                    break;
                }
            }
        }
    }

    MinimizeRun {
        run_index,
        final_energy: energy,
        energy_history: history,
        iterations,
        converged,
        diverged,
    }
}

/// Heat step plus nodewise renormalization over z-slabs; returns the largest
/// nodal move.
fn projected_heat_step(grid: &DomainGrid, values: &[Vec3], fresh: &mut [Vec3], weight: f64) -> f64 {
    let n = grid.n;
    let slab = n * n;
    fresh
        .par_chunks_mut(slab)
        .enumerate()
        .map(|(iz, out)| {
            let mut worst = 0.0f64;
            for iy in 0..n {
                for ix in 0..n {
                    let idx = (iz * n + iy) * n + ix;
                    let local = iy * n + ix;
                    if !grid.interior[idx] {
                        out[local] = values[idx];
                        continue;
                    }
                    let u = values[idx];
                    let mut w = u;
                    for j in [idx - 1, idx + 1, idx - n, idx + n, idx - slab, idx + slab] {
                        w = vec3::add(w, vec3::scale(vec3::sub(values[j], u), weight));
                    }
                    let norm = vec3::norm(w);
                    let newv = if norm > 1e-30 {
                        vec3::scale(w, 1.0 / norm)
                    } else {
                        u
                    };
                    worst = worst.max(vec3::dist(newv, u));
                    out[local] = newv;
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// W^{1,2} distance: L^2 of the difference plus L^2 of the gradient
/// difference, by node quadrature over the common grid.
pub fn w12_distance(a: &SphereField, b: &SphereField) -> Result<f64> {
    if !a.grid.same_layout(&b.grid) {
        return Err(Error::GridMismatch(format!(
            "{:?} n={} vs {:?} n={}",
            a.grid.kind, a.grid.n, b.grid.kind, b.grid.n
        )));
    }
    let grid = &a.grid;
    let diff: Vec<Vec3> = a
        .node_values
        .iter()
        .zip(&b.node_values)
        .zip(&grid.inside)
        .map(|((&x, &y), &ins)| if ins { vec3::sub(x, y) } else { [f64::NAN; 3] })
        .collect();
    let grads = crate::energy::node_gradients(grid, &diff);
    let h3 = grid.h * grid.h * grid.h;
    let mut total = 0.0;
    for idx in 0..grid.num_nodes() {
        if grid.inside[idx] {
            total += (vec3::norm_sq(diff[idx]) + crate::energy::jacobian_norm_sq(&grads[idx])) * h3;
        }
    }
    Ok(total.sqrt())
}
