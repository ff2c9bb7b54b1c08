//! Discrete Dirichlet energy, localized and normalized energies, monotonicity
//! profiles, the Euler-Lagrange residual, and blow-up rescaling.
//!
//! Gradients are central differences at nodes with both axis neighbors in the
//! domain and second-order one-sided differences at the shell. Energies are
//! assembled per grid cell as the corner average of |grad u|^2 times h^3,
//! counting cells whose center lies in the analytic domain. Sums run in a
//! fixed order so results are reproducible regardless of thread count.

use std::sync::Arc;

use rayon::prelude::*;

use crate::domain::{build_domain, DomainGrid, DomainKind};
use crate::error::{Error, Result};
use crate::field::{trilinear_sample, SphereField};
use crate::vec3::{self, Vec3};

/// Per-node spatial Jacobian; `[axis]` holds the derivative of all three
/// components in that axis direction.
pub type Jacobian = [Vec3; 3];

/// Total energy together with the per-cell decomposition that sums to it.
#[derive(Debug, Clone)]
pub struct EnergyBreakdown {
    pub total: f64,
    /// One entry per grid cell in index order; zero outside the domain and on
    /// excluded cells.
    pub per_cell: Vec<f64>,
}

/// Normalized local energies around one center, with the radial annulus terms
/// of the monotonicity identity.
#[derive(Debug, Clone)]
pub struct MonotonicityProfile {
    pub center: Vec3,
    pub radii: Vec<f64>,
    /// r^-1 * energy over B_r(center), one per radius.
    pub normalized_energy: Vec<f64>,
    /// 2 * integral over the annulus (r_i, r_{i+1}) of |x-y|^-1 |du/dnu|^2,
    /// one per consecutive radius pair.
    pub radial_term: Vec<f64>,
}

impl MonotonicityProfile {
    /// Monotonicity defects per consecutive radius pair: the normalized energy
    /// difference minus the radial annulus term; zero for exact minimizers.
    pub fn defects(&self) -> Vec<f64> {
        (0..self.radial_term.len())
            .map(|i| (self.normalized_energy[i + 1] - self.normalized_energy[i]) - self.radial_term[i])
            .collect()
    }

    /// CSV rows: radius, normalized_energy, radial_term, defect.
    /// The pair quantities are attached to the larger radius of each pair.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("radius,normalized_energy,radial_term,defect\n");
        let defects = self.defects();
        for (i, &r) in self.radii.iter().enumerate() {
            if i == 0 {
                out.push_str(&format!("{:.17e},{:.17e},,\n", r, self.normalized_energy[i]));
            } else {
                out.push_str(&format!(
                    "{:.17e},{:.17e},{:.17e},{:.17e}\n",
                    r,
                    self.normalized_energy[i],
                    self.radial_term[i - 1],
                    defects[i - 1]
                ));
            }
        }
        out
    }
}

/// Euler-Lagrange residual field with its summary statistic.
#[derive(Debug, Clone)]
pub struct ElResidual {
    /// Residual vector per node; NaN where the residual is not evaluated.
    pub residual: Vec<Vec3>,
    /// Median of |residual| over the evaluated nodes.
    pub median_magnitude: f64,
}

const PAR_CHUNK: usize = 8192;

/// Spatial Jacobian of the node values at every in-domain node.
///
/// Central differences where both axis neighbors are in the domain, one-sided
/// second order where two nodes on one side are available, first order with a
/// single neighbor, zero in degenerate slivers.
pub fn node_gradients(grid: &DomainGrid, values: &[Vec3]) -> Vec<Jacobian> {
    let h = grid.h;
    let zero: Jacobian = [[0.0; 3]; 3];
    let mut out = vec![zero; grid.num_nodes()];
    out.par_chunks_mut(PAR_CHUNK)
        .enumerate()
        .for_each(|(chunk_idx, chunk)| {
            let base = chunk_idx * PAR_CHUNK;
            for (off, jac) in chunk.iter_mut().enumerate() {
                let idx = base + off;
                if !grid.inside[idx] {
                    continue;
                }
                let (ix, iy, iz) = grid.coords_of(idx);
                let pos = [ix, iy, iz];
                for axis in 0..3 {
                    let minus1 = neighbor(grid, pos, axis, -1);
                    let plus1 = neighbor(grid, pos, axis, 1);
                    let here = values[idx];
                    let d: Vec3 = match (minus1, plus1) {
                        (Some(m), Some(p)) => {
                            vec3::scale(vec3::sub(values[p], values[m]), 0.5 / h)
                        }
                        (None, Some(p)) => {
                            if let Some(p2) = neighbor(grid, pos, axis, 2) {
                                // (-3 f0 + 4 f1 - f2) / (2h)
                                let mut d = [0.0; 3];
                                for c in 0..3 {
                                    d[c] = (-3.0 * here[c] + 4.0 * values[p][c]
                                        - values[p2][c])
                                        / (2.0 * h);
                                }
                                d
                            } else {
                                vec3::scale(vec3::sub(values[p], here), 1.0 / h)
                            }
                        }
                        (Some(m), None) => {
                            if let Some(m2) = neighbor(grid, pos, axis, -2) {
                                let mut d = [0.0; 3];
                                for c in 0..3 {
                                    d[c] = (3.0 * here[c] - 4.0 * values[m][c]
                                        + values[m2][c])
                                        / (2.0 * h);
                                }
                                d
                            } else {
                                vec3::scale(vec3::sub(here, values[m]), 1.0 / h)
                            }
                        }
                        (None, None) => [0.0; 3],
                    };
                    jac[axis] = d;
                }
            }
        });
    out
}

#[inline]
fn neighbor(grid: &DomainGrid, pos: [usize; 3], axis: usize, step: isize) -> Option<usize> {
    let mut p = [pos[0] as isize, pos[1] as isize, pos[2] as isize];
    p[axis] += step;
    if p[axis] < 0 || p[axis] >= grid.n as isize {
        return None;
    }
    let idx = grid.idx(p[0] as usize, p[1] as usize, p[2] as usize);
    if grid.inside[idx] {
        Some(idx)
    } else {
        None
    }
}

#[inline]
pub fn jacobian_norm_sq(j: &Jacobian) -> f64 {
    vec3::norm_sq(j[0]) + vec3::norm_sq(j[1]) + vec3::norm_sq(j[2])
}

#[inline]
fn jacobian_dir_deriv_sq(j: &Jacobian, nu: Vec3) -> f64 {
    // |J . nu|^2 where J rows are d/dx, d/dy, d/dz of the three components
    let mut s = 0.0;
    for c in 0..3 {
        let d = j[0][c] * nu[0] + j[1][c] * nu[1] + j[2][c] * nu[2];
        s += d * d;
    }
    s
}

/// Per-cell energies of a field, reusable across many localized queries.
pub struct CellEnergyField {
    pub grid: Arc<DomainGrid>,
    pub gradients: Vec<Jacobian>,
    /// h^3 times the corner-averaged |grad u|^2, per cell with center in the
    /// domain; zero elsewhere. Excised defect cores carry the analytic mass.
    pub per_cell: Vec<f64>,
    /// Defect locations whose cores were excised.
    pub singular: Vec<Vec3>,
}

impl CellEnergyField {
    /// Raw per-cell energies with no defect-core compensation.
    pub fn new(field: &SphereField) -> CellEnergyField {
        Self::from_values(field.grid.clone(), &field.node_values, &[])
    }

    /// Per-cell energies with the cells around the given singular points
    /// replaced by their analytic tangent-map mass.
    pub fn with_singularities(field: &SphereField, singular: &[Vec3]) -> CellEnergyField {
        Self::from_values(field.grid.clone(), &field.node_values, singular)
    }

    pub fn from_values(grid: Arc<DomainGrid>, values: &[Vec3], singular: &[Vec3]) -> CellEnergyField {
        let gradients = node_gradients(&grid, values);
        let per_cell = cell_energies(&grid, &gradients, singular);
        CellEnergyField {
            grid,
            gradients,
            per_cell,
            singular: singular.to_vec(),
        }
    }

    /// A cell counts as excised when one of its corner nodes sits within 2h
    /// of a singular point; its gradient samples are not used.
    fn is_excised(&self, cx: usize, cy: usize, cz: usize) -> bool {
        if self.singular.is_empty() {
            return false;
        }
        let excl_r = 2.0 * self.grid.h;
        for dz in 0..2 {
            for dy in 0..2 {
                for dx in 0..2 {
                    let p = self.grid.node_pos(cx + dx, cy + dy, cz + dz);
                    if self.singular.iter().any(|&e| vec3::dist(p, e) <= excl_r) {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// r^-1 times the energy over cells with center in B_r(y). No validation.
    pub fn normalized_ball_energy(&self, y: Vec3, r: f64) -> f64 {
        self.ball_energy(y, r) / r
    }

    /// Energy over cells with center in B_r(y), in fixed index order.
    pub fn ball_energy(&self, y: Vec3, r: f64) -> f64 {
        let grid = &self.grid;
        let m = grid.num_cells_per_axis();
        let (lo, hi) = cell_range(grid, y, r);
        let mut total = 0.0;
        for cz in lo[2]..=hi[2] {
            for cy in lo[1]..=hi[1] {
                for cx in lo[0]..=hi[0] {
                    let center = grid.cell_center(cx, cy, cz);
                    if vec3::dist(center, y) <= r {
                        total += self.per_cell[(cz * m + cy) * m + cx];
                    }
                }
            }
        }
        total
    }

    /// 2 * sum over annulus cells of |x-y|^-1 |du/dnu|^2 h^3, corner-averaged.
    pub fn annulus_radial_energy(&self, y: Vec3, r_inner: f64, r_outer: f64) -> f64 {
        let grid = &self.grid;
        let (lo, hi) = cell_range(grid, y, r_outer);
        let mut total = 0.0;
        let h3 = grid.h * grid.h * grid.h;
        for cz in lo[2]..=hi[2] {
            for cy in lo[1]..=hi[1] {
                for cx in lo[0]..=hi[0] {
                    let center = grid.cell_center(cx, cy, cz);
                    let d = vec3::dist(center, y);
                    if d <= r_inner || d > r_outer || d < 1e-12 {
                        continue;
                    }
                    // excised cores carry zero radial derivative (tangent maps
                    // are 0-homogeneous), so they contribute nothing here
                    if self.is_excised(cx, cy, cz) {
                        continue;
                    }
                    let nu = vec3::scale(vec3::sub(center, y), 1.0 / d);
                    let mut acc = 0.0;
                    let mut cnt = 0u32;
                    for dz in 0..2 {
                        for dy in 0..2 {
                            for dx in 0..2 {
                                let idx = grid.idx(cx + dx, cy + dy, cz + dz);
                                if grid.inside[idx] {
                                    acc += jacobian_dir_deriv_sq(&self.gradients[idx], nu);
                                    cnt += 1;
                                }
                            }
                        }
                    }
                    if cnt > 0 {
                        total += 2.0 * (acc / cnt as f64) * h3 / d;
                    }
                }
            }
        }
        total
    }

    /// Share of the energy carried by the radial derivative about `center`.
    pub fn radial_energy_share(&self, center: Vec3) -> f64 {
        let grid = &self.grid;
        let m = grid.num_cells_per_axis();
        let h3 = grid.h * grid.h * grid.h;
        let mut radial = 0.0;
        let mut total = 0.0;
        for cz in 0..m {
            for cy in 0..m {
                for cx in 0..m {
                    let cell = (cz * m + cy) * m + cx;
                    let e = self.per_cell[cell];
                    if e == 0.0 {
                        continue;
                    }
                    total += e;
                    let c = grid.cell_center(cx, cy, cz);
                    let d = vec3::dist(c, center);
                    if d < 1e-12 || self.is_excised(cx, cy, cz) {
                        continue;
                    }
                    let nu = vec3::scale(vec3::sub(c, center), 1.0 / d);
                    let mut acc = 0.0;
                    let mut cnt = 0u32;
                    for dz in 0..2 {
                        for dy in 0..2 {
                            for dx in 0..2 {
                                let idx = grid.idx(cx + dx, cy + dy, cz + dz);
                                if grid.inside[idx] {
                                    acc += jacobian_dir_deriv_sq(&self.gradients[idx], nu);
                                    cnt += 1;
                                }
                            }
                        }
                    }
                    if cnt > 0 {
                        radial += (acc / cnt as f64) * h3;
                    }
                }
            }
        }
        if total > 0.0 {
            radial / total
        } else {
            0.0
        }
    }
}

fn cell_range(grid: &DomainGrid, y: Vec3, r: f64) -> ([usize; 3], [usize; 3]) {
    let m = grid.num_cells_per_axis() as isize;
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for a in 0..3 {
        let l = (((y[a] - r + 1.0) / grid.h).floor() as isize - 1).clamp(0, m - 1);
        let u = (((y[a] + r + 1.0) / grid.h).ceil() as isize + 1).clamp(0, m - 1);
        lo[a] = l as usize;
        hi[a] = u as usize;
    }
    (lo, hi)
}

/// Exact integral of |u|^-2 over the centered unit cube.
const UNIT_CUBE_INV_SQ: f64 = 7.674127;

/// Analytic tangent-map mass of one cell around a defect at `y`:
/// the integral of 2/|x-y|^2 over the cell, by midpoint subsampling with the
/// singular subcell replaced by its exact box integral.
fn tangent_core_mass(grid: &DomainGrid, cx: usize, cy: usize, cz: usize, y: Vec3) -> f64 {
    const SUB: usize = 8;
    let s = grid.h / SUB as f64;
    let sv = s * s * s;
    // midpoint distance below which the sample would overshoot the exact
    // subcell mass 2 s * UNIT_CUBE_INV_SQ
    let rho_min_sq = s * s / UNIT_CUBE_INV_SQ;
    let x0 = grid.coord(cx);
    let y0 = grid.coord(cy);
    let z0 = grid.coord(cz);
    let mut mass = 0.0;
    for kz in 0..SUB {
        let pz = z0 + (kz as f64 + 0.5) * s;
        for ky in 0..SUB {
            let py = y0 + (ky as f64 + 0.5) * s;
            for kx in 0..SUB {
                let px = x0 + (kx as f64 + 0.5) * s;
                let d = [px - y[0], py - y[1], pz - y[2]];
                let rho_sq = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).max(rho_min_sq);
                mass += 2.0 / rho_sq * sv;
            }
        }
    }
    mass
}

/// Per-cell energies. Cells with any corner node within 2h of a singular
/// point are excised from the gradient-sampled sum and carry the analytic
/// tangent-map mass of the nearest defect instead; the discrete samples
/// there are meaningless while the local density is pinned by the degree-one
/// classification.
fn cell_energies(grid: &DomainGrid, gradients: &[Jacobian], singular: &[Vec3]) -> Vec<f64> {
    let m = grid.num_cells_per_axis();
    let h3 = grid.h * grid.h * grid.h;
    let excl_r = 2.0 * grid.h;
    let mut per_cell = vec![0.0; grid.num_cells()];
    per_cell
        .par_chunks_mut(PAR_CHUNK)
        .enumerate()
        .for_each(|(chunk_idx, chunk)| {
            let base = chunk_idx * PAR_CHUNK;
            for (off, out) in chunk.iter_mut().enumerate() {
                let cell = base + off;
                let cx = cell % m;
                let cy = (cell / m) % m;
                let cz = cell / (m * m);
                let center = grid.cell_center(cx, cy, cz);
                if !grid.kind.contains(center) {
                    continue;
                }
                let mut acc = 0.0;
                let mut cnt = 0u32;
                let mut excised = false;
                'corners: for dz in 0..2 {
                    for dy in 0..2 {
                        for dx in 0..2 {
                            let idx = grid.idx(cx + dx, cy + dy, cz + dz);
                            if !grid.inside[idx] {
                                continue;
                            }
                            let p = grid.node_pos(cx + dx, cy + dy, cz + dz);
                            for &e in singular {
                                if vec3::dist(p, e) <= excl_r {
                                    excised = true;
                                    break 'corners;
                                }
                            }
                            acc += jacobian_norm_sq(&gradients[idx]);
                            cnt += 1;
                        }
                    }
                }
                if excised {
                    let nearest = singular
                        .iter()
                        .copied()
                        .min_by(|a, b| {
                            vec3::dist(center, *a)
                                .partial_cmp(&vec3::dist(center, *b))
                                .unwrap()
                        })
                        .unwrap();
                    *out = tangent_core_mass(grid, cx, cy, cz, nearest);
                } else if cnt > 0 {
                    *out = (acc / cnt as f64) * h3;
                }
            }
        });
    per_cell
}

/// Discrete Dirichlet energy with per-cell breakdown.
///
/// `singular` lists detected singular points; the cells around them are
/// excised and carry the tangent-map core mass. Pass an empty slice for the
/// raw quadrature.
pub fn dirichlet_energy(field: &SphereField, singular: &[Vec3]) -> EnergyBreakdown {
    let gradients = node_gradients(&field.grid, &field.node_values);
    let per_cell = cell_energies(&field.grid, &gradients, singular);
    let total = per_cell.iter().sum();
    EnergyBreakdown { total, per_cell }
}

/// Same quadrature for an unconstrained vector field's values.
pub fn dirichlet_energy_of_values(grid: &DomainGrid, values: &[Vec3]) -> f64 {
    let gradients = node_gradients(grid, values);
    cell_energies(grid, &gradients, &[]).iter().sum()
}

fn check_local_ball(grid: &DomainGrid, y: Vec3, r: f64) -> Result<()> {
    if r < 3.0 * grid.h {
        return Err(Error::InvalidParam(format!(
            "radius {r} is below the 3h stencil floor ({})",
            3.0 * grid.h
        )));
    }
    let half_ball_flat_center = grid.kind == DomainKind::HalfBall && y[2].abs() <= grid.h / 2.0;
    if half_ball_flat_center {
        if vec3::norm(y) + r > 1.0 + 1e-9 {
            return Err(Error::InvalidParam(format!(
                "half ball B_{r}({y:?}) leaves the domain"
            )));
        }
    } else if grid.kind.boundary_distance(y) + 1e-9 < r {
        return Err(Error::InvalidParam(format!(
            "B_{r}({y:?}) is not contained in the domain"
        )));
    }
    Ok(())
}

/// Normalized local energy r^-1 * energy(B_r(y)).
///
/// `singular` carries the known defect locations so their cores enter with
/// the analytic mass rather than meaningless discrete samples.
pub fn normalized_local_energy(
    field: &SphereField,
    y: Vec3,
    r: f64,
    singular: &[Vec3],
) -> Result<f64> {
    check_local_ball(&field.grid, y, r)?;
    let cells = CellEnergyField::with_singularities(field, singular);
    Ok(cells.normalized_ball_energy(y, r))
}

/// Normalized local energies and radial annulus terms over a radius ladder.
pub fn monotonicity_profile(
    field: &SphereField,
    y: Vec3,
    radii: &[f64],
    singular: &[Vec3],
) -> Result<MonotonicityProfile> {
    if radii.len() < 2 {
        return Err(Error::InvalidParam("need at least two radii".into()));
    }
    for w in radii.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidParam("radii must be strictly increasing".into()));
        }
    }
    for &r in radii {
        check_local_ball(&field.grid, y, r)?;
    }
    let cells = CellEnergyField::with_singularities(field, singular);
    let normalized_energy: Vec<f64> = radii
        .iter()
        .map(|&r| cells.normalized_ball_energy(y, r))
        .collect();
    let radial_term: Vec<f64> = radii
        .windows(2)
        .map(|w| cells.annulus_radial_energy(y, w[0], w[1]))
        .collect();
    Ok(MonotonicityProfile {
        center: y,
        radii: radii.to_vec(),
        normalized_energy,
        radial_term,
    })
}

/// Euler-Lagrange residual laplacian(u) + |grad u|^2 u at interior nodes
/// farther than 4h from every point in `exclude`.
pub fn el_residual(field: &SphereField, exclude: &[Vec3]) -> ElResidual {
    let grid = &field.grid;
    let values = &field.node_values;
    let gradients = node_gradients(grid, values);
    let h2 = grid.h * grid.h;
    let guard = 4.0 * grid.h;
    let nan = [f64::NAN; 3];
    let mut residual = vec![nan; grid.num_nodes()];
    let mut magnitudes: Vec<f64> = Vec::new();
    for idx in 0..grid.num_nodes() {
        if !grid.interior[idx] {
            continue;
        }
        let (ix, iy, iz) = grid.coords_of(idx);
        let p = grid.node_pos(ix, iy, iz);
        if exclude.iter().any(|&e| vec3::dist(p, e) <= guard) {
            continue;
        }
        let u = values[idx];
        let mut lap = [0.0; 3];
        for axis in 0..3 {
            let m = neighbor(grid, [ix, iy, iz], axis, -1).expect("interior node");
            let pl = neighbor(grid, [ix, iy, iz], axis, 1).expect("interior node");
            for c in 0..3 {
                lap[c] += (values[pl][c] - 2.0 * u[c] + values[m][c]) / h2;
            }
        }
        let g2 = jacobian_norm_sq(&gradients[idx]);
        let res = [
            lap[0] + g2 * u[0],
            lap[1] + g2 * u[1],
            lap[2] + g2 * u[2],
        ];
        residual[idx] = res;
        magnitudes.push(vec3::norm(res));
    }
    let median_magnitude = median(&mut magnitudes);
    ElResidual {
        residual,
        median_magnitude,
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Rescaled map u(y + lambda x) resampled onto a unit-ball grid of the same
/// resolution, with nodewise renormalization.
pub fn rescale_blowup(field: &SphereField, y: Vec3, lambda: f64) -> Result<SphereField> {
    let grid = &field.grid;
    if lambda < 8.0 * grid.h {
        return Err(Error::InvalidParam(format!(
            "lambda {lambda} is below the 8h resampling floor ({})",
            8.0 * grid.h
        )));
    }
    if grid.kind.boundary_distance(y) + 1e-9 < lambda {
        return Err(Error::InvalidParam(format!(
            "B_{lambda}({y:?}) is not contained in the domain"
        )));
    }
    let target = Arc::new(build_domain(DomainKind::Ball, grid.n)?);
    let mut node_values = vec![[f64::NAN; 3]; target.num_nodes()];
    for iz in 0..target.n {
        for iy in 0..target.n {
            for ix in 0..target.n {
                let idx = target.idx(ix, iy, iz);
                if !target.inside[idx] {
                    continue;
                }
                let x = target.node_pos(ix, iy, iz);
                let src = vec3::add(y, vec3::scale(x, lambda));
                let v = trilinear_sample(grid, &field.node_values, src)
                    .unwrap_or(vec3::E3);
                let n = vec3::norm(v);
                node_values[idx] = if n > 1e-9 { vec3::scale(v, 1.0 / n) } else { vec3::E3 };
            }
        }
    }
    let vertex_values = target
        .surface
        .positions
        .iter()
        .map(|&p| {
            let src = vec3::add(y, vec3::scale(p, lambda));
            let v = trilinear_sample(grid, &field.node_values, src).unwrap_or(vec3::E3);
            let n = vec3::norm(v);
            if n > 1e-9 {
                vec3::scale(v, 1.0 / n)
            } else {
                vec3::E3
            }
        })
        .collect();
    Ok(SphereField {
        grid: target,
        node_values,
        vertex_values,
    })
}
