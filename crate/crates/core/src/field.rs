//! Sphere-valued and unconstrained vector fields on masked grids, boundary
//! traces, and the interpolation that moves data between grid and surface.

use std::sync::Arc;

use crate::domain::{BoundarySurface, DomainGrid, SurfaceIndex};
use crate::error::{Error, Result};
use crate::vec3::{self, Vec3};

/// Unit 3-vector per in-domain node and per boundary vertex.
#[derive(Debug, Clone)]
pub struct SphereField {
    pub grid: Arc<DomainGrid>,
    /// One value per grid node; nodes outside the domain hold NaN.
    pub node_values: Vec<Vec3>,
    /// One value per boundary-surface vertex.
    pub vertex_values: Vec<Vec3>,
}

/// Unconstrained 3-vector field with the same layout as [`SphereField`].
#[derive(Debug, Clone)]
pub struct VectorField {
    pub grid: Arc<DomainGrid>,
    pub node_values: Vec<Vec3>,
    pub vertex_values: Vec<Vec3>,
}

/// Unit 3-vector per boundary-surface vertex.
#[derive(Debug, Clone)]
pub struct BoundaryTrace {
    pub grid: Arc<DomainGrid>,
    pub values: Vec<Vec3>,
}

const OUTSIDE: Vec3 = [f64::NAN, f64::NAN, f64::NAN];

impl SphereField {
    pub fn constant(grid: Arc<DomainGrid>, value: Vec3) -> SphereField {
        let v = vec3::normalize(value);
        let node_values = grid
            .inside
            .iter()
            .map(|&m| if m { v } else { OUTSIDE })
            .collect();
        let vertex_values = vec![v; grid.surface.len()];
        SphereField {
            grid,
            node_values,
            vertex_values,
        }
    }

    /// Check the unit-norm invariant on every stored value.
    pub fn max_norm_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for (idx, &m) in self.grid.inside.iter().enumerate() {
            if m {
                worst = worst.max((vec3::norm(self.node_values[idx]) - 1.0).abs());
            }
        }
        for &v in &self.vertex_values {
            worst = worst.max((vec3::norm(v) - 1.0).abs());
        }
        worst
    }

    /// Apply a fixed rotation to all values (target rotation).
    pub fn rotate_values(&self, m: &[[f64; 3]; 3]) -> SphereField {
        let node_values = self
            .node_values
            .iter()
            .zip(&self.grid.inside)
            .map(|(&v, &ins)| if ins { vec3::mat_apply(m, v) } else { OUTSIDE })
            .collect();
        let vertex_values = self
            .vertex_values
            .iter()
            .map(|&v| vec3::mat_apply(m, v))
            .collect();
        SphereField {
            grid: self.grid.clone(),
            node_values,
            vertex_values,
        }
    }

    /// Pointwise antipode -u, which reverses the degree of every defect.
    pub fn negate(&self) -> SphereField {
        SphereField {
            grid: self.grid.clone(),
            node_values: self
                .node_values
                .iter()
                .map(|&v| [-v[0], -v[1], -v[2]])
                .collect(),
            vertex_values: self
                .vertex_values
                .iter()
                .map(|&v| [-v[0], -v[1], -v[2]])
                .collect(),
        }
    }
}

impl BoundaryTrace {
    pub fn surface(&self) -> &BoundarySurface {
        &self.grid.surface
    }

    pub fn constant(grid: Arc<DomainGrid>, value: Vec3) -> BoundaryTrace {
        let v = vec3::normalize(value);
        let values = vec![v; grid.surface.len()];
        BoundaryTrace { grid, values }
    }

    /// Apply a fixed rotation to all trace values.
    pub fn rotate_values(&self, m: &[[f64; 3]; 3]) -> BoundaryTrace {
        BoundaryTrace {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| vec3::mat_apply(m, v)).collect(),
        }
    }

    pub fn max_norm_deviation(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| (vec3::norm(v) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// The hedgehog map x -> (x - center)/|x - center|.
///
/// A node coinciding with the center receives e3; the defect itself carries
/// no meaningful direction and its quadrature weight is handled downstream.
pub fn hedgehog(grid: Arc<DomainGrid>, center: Vec3) -> Result<SphereField> {
    if !grid.kind.contains(center) {
        return Err(Error::InvalidParam(format!(
            "hedgehog center {center:?} lies outside the domain"
        )));
    }
    let eval = |x: Vec3| -> Vec3 {
        let d = vec3::sub(x, center);
        let n = vec3::norm(d);
        if n < 1e-14 {
            vec3::E3
        } else {
            vec3::scale(d, 1.0 / n)
        }
    };
    let n = grid.n;
    let mut node_values = vec![OUTSIDE; grid.num_nodes()];
    for iz in 0..n {
        for iy in 0..n {
            for ix in 0..n {
                let idx = grid.idx(ix, iy, iz);
                if grid.inside[idx] {
                    node_values[idx] = eval(grid.node_pos(ix, iy, iz));
                }
            }
        }
    }
    let vertex_values = grid.surface.positions.iter().map(|&p| eval(p)).collect();
    Ok(SphereField {
        grid,
        node_values,
        vertex_values,
    })
}

/// NaN-aware trilinear sample of node values at an arbitrary position.
///
/// Corners outside the domain are dropped and the remaining trilinear weights
/// renormalized; returns None when the whole stencil is outside.
pub fn trilinear_sample(grid: &DomainGrid, node_values: &[Vec3], pos: Vec3) -> Option<Vec3> {
    let n = grid.n;
    let h = grid.h;
    let mut base = [0usize; 3];
    let mut frac = [0f64; 3];
    for a in 0..3 {
        let f = (pos[a] + 1.0) / h;
        let i = f.floor().clamp(0.0, (n - 2) as f64);
        base[a] = i as usize;
        frac[a] = (f - i).clamp(0.0, 1.0);
    }
    let mut acc = [0.0; 3];
    let mut wsum = 0.0;
    for dz in 0..2 {
        for dy in 0..2 {
            for dx in 0..2 {
                let idx = grid.idx(base[0] + dx, base[1] + dy, base[2] + dz);
                if !grid.inside[idx] {
                    continue;
                }
                let wx = if dx == 1 { frac[0] } else { 1.0 - frac[0] };
                let wy = if dy == 1 { frac[1] } else { 1.0 - frac[1] };
                let wz = if dz == 1 { frac[2] } else { 1.0 - frac[2] };
                let w = wx * wy * wz;
                if w == 0.0 {
                    continue;
                }
                let v = node_values[idx];
                acc[0] += w * v[0];
                acc[1] += w * v[1];
                acc[2] += w * v[2];
                wsum += w;
            }
        }
    }
    if wsum < 1e-12 {
        return None;
    }
    Some(vec3::scale(acc, 1.0 / wsum))
}

/// Restrict a field to its boundary trace: interpolate node values at the
/// surface vertices and renormalize to unit length.
pub fn restrict_trace(field: &SphereField) -> Result<BoundaryTrace> {
    let grid = &field.grid;
    let mut values = Vec::with_capacity(grid.surface.len());
    for &p in &grid.surface.positions {
        let v = trilinear_sample(grid, &field.node_values, p)
            .ok_or(Error::StencilOutsideDomain(p))?;
        let n = vec3::norm(v);
        if n < 1e-12 {
            return Err(Error::StencilOutsideDomain(p));
        }
        values.push(vec3::scale(v, 1.0 / n));
    }
    Ok(BoundaryTrace {
        grid: field.grid.clone(),
        values,
    })
}

/// Closest point of a triangle to `q`, returned as barycentric coordinates.
fn closest_barycentric(q: Vec3, a: Vec3, b: Vec3, c: Vec3) -> (f64, f64, f64) {
    // Ericson, Real-Time Collision Detection, 5.1.5
    let ab = vec3::sub(b, a);
    let ac = vec3::sub(c, a);
    let ap = vec3::sub(q, a);
    let d1 = vec3::dot(ab, ap);
    let d2 = vec3::dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (1.0, 0.0, 0.0);
    }
    let bp = vec3::sub(q, b);
    let d3 = vec3::dot(ab, bp);
    let d4 = vec3::dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (0.0, 1.0, 0.0);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (1.0 - v, v, 0.0);
    }
    let cp = vec3::sub(q, c);
    let d5 = vec3::dot(ab, cp);
    let d6 = vec3::dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (0.0, 0.0, 1.0);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (1.0 - w, 0.0, w);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (0.0, 1.0 - w, w);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (1.0 - v - w, v, w)
}

/// Interpolate trace values at an arbitrary point by nearest-vertex
/// barycentric lookup on the boundary triangulation.
pub fn sample_trace(
    trace: &BoundaryTrace,
    index: &SurfaceIndex,
    q: Vec3,
    renormalize: bool,
) -> Vec3 {
    let surface = trace.surface();
    let nearest = index.nearest(surface, q);
    let mut best = trace.values[nearest];
    let mut best_d = f64::INFINITY;
    for &t in &surface.vertex_triangles[nearest] {
        let [ia, ib, ic] = surface.triangles[t];
        let (a, b, c) = (
            surface.positions[ia],
            surface.positions[ib],
            surface.positions[ic],
        );
        let (wa, wb, wc) = closest_barycentric(q, a, b, c);
        let point = [
            wa * a[0] + wb * b[0] + wc * c[0],
            wa * a[1] + wb * b[1] + wc * c[1],
            wa * a[2] + wb * b[2] + wc * c[2],
        ];
        let d = vec3::dist(point, q);
        if d < best_d {
            best_d = d;
            let (va, vb, vc) = (trace.values[ia], trace.values[ib], trace.values[ic]);
            best = [
                wa * va[0] + wb * vb[0] + wc * vc[0],
                wa * va[1] + wb * vb[1] + wc * vc[1],
                wa * va[2] + wb * vb[2] + wc * vc[2],
            ];
        }
    }
    if renormalize {
        let n = vec3::norm(best);
        if n > 1e-12 {
            return vec3::scale(best, 1.0 / n);
        }
    }
    best
}

/// Indices of shell nodes (inside but not interior) in a fixed order.
pub fn shell_nodes(grid: &DomainGrid) -> Vec<usize> {
    (0..grid.num_nodes())
        .filter(|&i| grid.inside[i] && !grid.interior[i])
        .collect()
}

/// Pin trace values onto the shell nodes of a field-sized value buffer.
///
/// Shell values come from nearest-surface-vertex barycentric interpolation so
/// the interior solvers only ever see grid-local data.
pub fn pin_shell_values(
    grid: &DomainGrid,
    trace: &BoundaryTrace,
    renormalize: bool,
) -> Vec<(usize, Vec3)> {
    let index = SurfaceIndex::build(&grid.surface);
    shell_nodes(grid)
        .into_iter()
        .map(|idx| {
            let (ix, iy, iz) = grid.coords_of(idx);
            let q = grid.node_pos(ix, iy, iz);
            (idx, sample_trace(trace, &index, q, renormalize))
        })
        .collect()
}
