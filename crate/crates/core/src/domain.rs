//! Masked uniform grids on [-1,1]^3 and triangulated boundary surfaces.
//!
//! A node is *inside* when it lies in the closed analytic domain; it is
//! *interior* when all six axis neighbors are inside as well, so the interior
//! mask is shrunk by one grid spacing from the analytic boundary. The nodes
//! that are inside but not interior form the shell on which boundary data is
//! pinned. The boundary surface is a separate triangulation with per-vertex
//! area weights: an icosphere for the sphere, a subdivided octant sphere plus
//! a polar disc for the half ball, and grid-aligned quads split into triangles
//! for the cube.

use crate::error::{Error, Result};
use crate::vec3::{self, Vec3};

pub const TAG_CURVED: u8 = 0;
pub const TAG_FLAT: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Cube,
    Ball,
    HalfBall,
}

impl DomainKind {
    pub fn code(self) -> u8 {
        match self {
            DomainKind::Cube => 0,
            DomainKind::Ball => 1,
            DomainKind::HalfBall => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(DomainKind::Cube),
            1 => Ok(DomainKind::Ball),
            2 => Ok(DomainKind::HalfBall),
            other => Err(Error::Format(format!("unknown domain kind code {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Cube => "cube",
            DomainKind::Ball => "ball",
            DomainKind::HalfBall => "half_ball",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cube" => Ok(DomainKind::Cube),
            "ball" => Ok(DomainKind::Ball),
            "half_ball" | "half-ball" => Ok(DomainKind::HalfBall),
            other => Err(Error::InvalidParam(format!("unknown domain kind `{other}`"))),
        }
    }

    /// Membership in the closed analytic domain, with a roundoff guard.
    pub fn contains(self, x: Vec3) -> bool {
        const EPS: f64 = 1e-9;
        match self {
            DomainKind::Cube => x.iter().all(|c| c.abs() <= 1.0 + EPS),
            DomainKind::Ball => vec3::norm_sq(x) <= (1.0 + EPS) * (1.0 + EPS),
            DomainKind::HalfBall => {
                vec3::norm_sq(x) <= (1.0 + EPS) * (1.0 + EPS) && x[2] >= -EPS
            }
        }
    }

    /// Distance from an interior point to the analytic boundary.
    pub fn boundary_distance(self, x: Vec3) -> f64 {
        match self {
            DomainKind::Cube => x
                .iter()
                .map(|c| 1.0 - c.abs())
                .fold(f64::INFINITY, f64::min),
            DomainKind::Ball => 1.0 - vec3::norm(x),
            DomainKind::HalfBall => (1.0 - vec3::norm(x)).min(x[2]),
        }
    }

    pub fn analytic_surface_area(self) -> f64 {
        use std::f64::consts::PI;
        match self {
            DomainKind::Cube => 24.0,
            DomainKind::Ball => 4.0 * PI,
            DomainKind::HalfBall => 3.0 * PI, // hemisphere 2*pi + disc pi
        }
    }

    pub fn analytic_volume(self) -> f64 {
        use std::f64::consts::PI;
        match self {
            DomainKind::Cube => 8.0,
            DomainKind::Ball => 4.0 * PI / 3.0,
            DomainKind::HalfBall => 2.0 * PI / 3.0,
        }
    }
}

/// Triangulated boundary surface with vertex-lumped area weights.
#[derive(Debug, Clone)]
pub struct BoundarySurface {
    pub positions: Vec<Vec3>,
    /// One third of incident triangle area, per vertex.
    pub weights: Vec<f64>,
    /// TAG_CURVED or TAG_FLAT per vertex.
    pub tags: Vec<u8>,
    /// Outward-oriented triangles as vertex index triples.
    pub triangles: Vec<[usize; 3]>,
    /// Triangle indices incident to each vertex.
    pub vertex_triangles: Vec<Vec<usize>>,
}

impl BoundarySurface {
    fn from_triangles(positions: Vec<Vec3>, tags: Vec<u8>, triangles: Vec<[usize; 3]>) -> Self {
        let mut weights = vec![0.0; positions.len()];
        let mut vertex_triangles = vec![Vec::new(); positions.len()];
        for (t, tri) in triangles.iter().enumerate() {
            let (a, b, c) = (positions[tri[0]], positions[tri[1]], positions[tri[2]]);
            // spherical triangles get their geodesic area so curved surfaces
            // integrate to the exact analytic value
            let area = if tri.iter().all(|&v| tags[v] == TAG_CURVED) && on_unit_sphere(a, b, c) {
                spherical_triangle_area(a, b, c)
            } else {
                triangle_area(a, b, c)
            };
            for &v in tri {
                weights[v] += area / 3.0;
                vertex_triangles[v].push(t);
            }
        }
        BoundarySurface {
            positions,
            weights,
            tags,
            triangles,
            vertex_triangles,
        }
    }

    /// Rebuild triangle adjacency and weights after loading positions from a file.
    pub fn rebuild_adjacency(&mut self) {
        let mut vertex_triangles = vec![Vec::new(); self.positions.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                vertex_triangles[v].push(t);
            }
        }
        self.vertex_triangles = vertex_triangles;
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Mean nearest-neighbor style spacing, estimated from the mean triangle edge.
    pub fn mean_spacing(&self) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for tri in &self.triangles {
            sum += vec3::dist(self.positions[tri[0]], self.positions[tri[1]]);
            sum += vec3::dist(self.positions[tri[1]], self.positions[tri[2]]);
            sum += vec3::dist(self.positions[tri[2]], self.positions[tri[0]]);
            count += 3;
        }
        sum / count.max(1) as f64
    }
}

pub fn triangle_area(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    0.5 * vec3::norm(vec3::cross(vec3::sub(b, a), vec3::sub(c, a)))
}

fn on_unit_sphere(a: Vec3, b: Vec3, c: Vec3) -> bool {
    [a, b, c]
        .iter()
        .all(|&v| (vec3::norm(v) - 1.0).abs() < 1e-9)
}

/// Unsigned geodesic area of a triangle with unit-vector corners
/// (the solid angle it subtends, via the half-angle tangent formula).
pub fn spherical_triangle_area(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    let num = vec3::dot(a, vec3::cross(b, c));
    let den = 1.0 + vec3::dot(a, b) + vec3::dot(b, c) + vec3::dot(c, a);
    2.0 * num.atan2(den).abs()
}

/// Masked uniform grid plus boundary surface describing one domain.
#[derive(Debug, Clone)]
pub struct DomainGrid {
    pub kind: DomainKind,
    pub n: usize,
    pub h: f64,
    /// Node lies in the closed analytic domain (carries a field value).
    pub inside: Vec<bool>,
    /// All six axis neighbors are inside; these nodes are updated by solvers.
    pub interior: Vec<bool>,
    pub surface: BoundarySurface,
}

impl DomainGrid {
    #[inline]
    pub fn idx(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (iz * self.n + iy) * self.n + ix
    }

    #[inline]
    pub fn coords_of(&self, idx: usize) -> (usize, usize, usize) {
        let ix = idx % self.n;
        let iy = (idx / self.n) % self.n;
        let iz = idx / (self.n * self.n);
        (ix, iy, iz)
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -1.0 + i as f64 * self.h
    }

    #[inline]
    pub fn node_pos(&self, ix: usize, iy: usize, iz: usize) -> Vec3 {
        [self.coord(ix), self.coord(iy), self.coord(iz)]
    }

    pub fn num_nodes(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn num_cells_per_axis(&self) -> usize {
        self.n - 1
    }

    /// Cell center for cell (cx, cy, cz) with corners at (cx..cx+1, ...).
    #[inline]
    pub fn cell_center(&self, cx: usize, cy: usize, cz: usize) -> Vec3 {
        [
            self.coord(cx) + 0.5 * self.h,
            self.coord(cy) + 0.5 * self.h,
            self.coord(cz) + 0.5 * self.h,
        ]
    }

    #[inline]
    pub fn cell_idx(&self, cx: usize, cy: usize, cz: usize) -> usize {
        let m = self.n - 1;
        (cz * m + cy) * m + cx
    }

    pub fn num_cells(&self) -> usize {
        let m = self.n - 1;
        m * m * m
    }

    /// Nodes in the closed domain.
    pub fn count_inside(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    /// Volume estimate from the interior mask; first-order accurate in h.
    pub fn mask_volume(&self) -> f64 {
        let count = self.interior.iter().filter(|&&b| b).count();
        count as f64 * self.h * self.h * self.h
    }

    pub fn same_layout(&self, other: &DomainGrid) -> bool {
        self.kind == other.kind && self.n == other.n
    }

    /// Grid index of the node nearest to `x` (clamped to the grid).
    pub fn nearest_node(&self, x: Vec3) -> (usize, usize, usize) {
        let f = |c: f64| -> usize {
            (((c + 1.0) / self.h).round().max(0.0) as usize).min(self.n - 1)
        };
        (f(x[0]), f(x[1]), f(x[2]))
    }
}

/// Build the masked grid and boundary surface for one of the three domains.
///
/// `n` must be odd and at least 9 so the origin is a node.
pub fn build_domain(kind: DomainKind, n: usize) -> Result<DomainGrid> {
    if n < 9 {
        return Err(Error::InvalidParam(format!("n = {n} is too small (need n >= 9)")));
    }
    if n % 2 == 0 {
        return Err(Error::InvalidParam(format!("n = {n} must be odd so the origin is a node")));
    }
    let h = 2.0 / (n - 1) as f64;
    let total = n * n * n;
    let mut inside = vec![false; total];
    let mut interior = vec![false; total];

    let coord = |i: isize| -> f64 { -1.0 + i as f64 * h };
    for iz in 0..n as isize {
        for iy in 0..n as isize {
            for ix in 0..n as isize {
                let idx = ((iz as usize * n) + iy as usize) * n + ix as usize;
                let x = [coord(ix), coord(iy), coord(iz)];
                if !kind.contains(x) {
                    continue;
                }
                inside[idx] = true;
                let neighbors = [
                    [coord(ix - 1), x[1], x[2]],
                    [coord(ix + 1), x[1], x[2]],
                    [x[0], coord(iy - 1), x[2]],
                    [x[0], coord(iy + 1), x[2]],
                    [x[0], x[1], coord(iz - 1)],
                    [x[0], x[1], coord(iz + 1)],
                ];
                interior[idx] = neighbors.iter().all(|&p| kind.contains(p));
            }
        }
    }

    let surface = match kind {
        DomainKind::Ball => icosphere(subdivision_level(n)),
        DomainKind::HalfBall => half_ball_surface(subdivision_level(n)),
        DomainKind::Cube => cube_surface(n),
    };

    Ok(DomainGrid {
        kind,
        n,
        h,
        inside,
        interior,
        surface,
    })
}

/// Subdivision level chosen so the surface edge length tracks the grid spacing.
fn subdivision_level(n: usize) -> u32 {
    let l = ((n - 1) as f64).log2().round() as i64 - 1;
    l.clamp(1, 7) as u32
}

// ---------------------------------------------------------------------------
// Icosphere (ball boundary)
// ---------------------------------------------------------------------------

fn icosahedron() -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let verts_raw: [Vec3; 12] = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let verts: Vec<Vec3> = verts_raw.iter().map(|&v| vec3::normalize(v)).collect();
    // counter-clockwise from outside
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (verts, faces)
}

fn subdivide_on_sphere(
    verts: &mut Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    unit_project: bool,
) -> Vec<[usize; 3]> {
    use std::collections::HashMap;
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut new_faces = Vec::with_capacity(faces.len() * 4);
    let mut mid = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
        let key = (a.min(b), a.max(b));
        if let Some(&m) = midpoint.get(&key) {
            return m;
        }
        let mut p = vec3::scale(vec3::add(verts[a], verts[b]), 0.5);
        if unit_project {
            p = vec3::normalize(p);
        }
        verts.push(p);
        let m = verts.len() - 1;
        midpoint.insert(key, m);
        m
    };
    for [a, b, c] in faces {
        let ab = mid(a, b, verts);
        let bc = mid(b, c, verts);
        let ca = mid(c, a, verts);
        new_faces.push([a, ab, ca]);
        new_faces.push([b, bc, ab]);
        new_faces.push([c, ca, bc]);
        new_faces.push([ab, bc, ca]);
    }
    new_faces
}

/// Unit sphere triangulation by icosahedron subdivision.
pub fn icosphere(level: u32) -> BoundarySurface {
    let (mut verts, mut faces) = icosahedron();
    for _ in 0..level {
        faces = subdivide_on_sphere(&mut verts, faces, true);
    }
    let tags = vec![TAG_CURVED; verts.len()];
    BoundarySurface::from_triangles(verts, tags, faces)
}

// ---------------------------------------------------------------------------
// Half-ball boundary: upper octant-sphere hemisphere plus polar disc
// ---------------------------------------------------------------------------

fn hemisphere(level: u32) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    // Upper half of an octahedron keeps its equator on x3 = 0 under
    // midpoint subdivision followed by radial projection.
    let mut verts: Vec<Vec3> = vec![
        [0.0, 0.0, 1.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
    ];
    let mut faces = vec![[1, 2, 0], [2, 3, 0], [3, 4, 0], [4, 1, 0]];
    for _ in 0..level {
        faces = subdivide_on_sphere(&mut verts, faces, true);
    }
    // clamp equator roundoff so flat/curved classification stays clean
    for v in verts.iter_mut() {
        if v[2].abs() < 1e-15 {
            v[2] = 0.0;
        }
    }
    (verts, faces)
}

fn unit_disc(rings: usize, sectors: usize, angle_offset: f64) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let mut verts: Vec<Vec3> = vec![[0.0, 0.0, 0.0]];
    for j in 1..=rings {
        let r = j as f64 / rings as f64;
        for k in 0..sectors {
            let th = angle_offset + 2.0 * std::f64::consts::PI * k as f64 / sectors as f64;
            verts.push([r * th.cos(), r * th.sin(), 0.0]);
        }
    }
    let ring_start = |j: usize| 1 + (j - 1) * sectors;
    let mut faces = Vec::new();
    // center fan (oriented so the outward normal points down, out of the half ball)
    for k in 0..sectors {
        let a = ring_start(1) + k;
        let b = ring_start(1) + (k + 1) % sectors;
        faces.push([0, b, a]);
    }
    for j in 1..rings {
        for k in 0..sectors {
            let a = ring_start(j) + k;
            let b = ring_start(j) + (k + 1) % sectors;
            let c = ring_start(j + 1) + k;
            let d = ring_start(j + 1) + (k + 1) % sectors;
            faces.push([a, b, c]);
            faces.push([b, d, c]);
        }
    }
    (verts, faces)
}

fn half_ball_surface(level: u32) -> BoundarySurface {
    let (hemi_verts, hemi_faces) = hemisphere(level);
    let sectors = 4 * (1usize << level);
    let rings = ((sectors as f64) / (2.0 * std::f64::consts::PI)).ceil() as usize;
    // offset by half a sector so disc rim vertices avoid the hemisphere equator
    let (disc_verts, disc_faces) = unit_disc(rings.max(2), sectors, std::f64::consts::PI / sectors as f64);

    let mut positions = hemi_verts;
    let mut tags = vec![TAG_CURVED; positions.len()];
    let offset = positions.len();
    positions.extend_from_slice(&disc_verts);
    tags.extend(std::iter::repeat(TAG_FLAT).take(disc_verts.len()));
    let mut triangles = hemi_faces;
    triangles.extend(disc_faces.iter().map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]));
    BoundarySurface::from_triangles(positions, tags, triangles)
}

// ---------------------------------------------------------------------------
// Cube boundary: grid-aligned quads split into triangles, vertices deduped
// ---------------------------------------------------------------------------

fn cube_surface(n: usize) -> BoundarySurface {
    use std::collections::HashMap;
    let h = 2.0 / (n - 1) as f64;
    let coord = |i: usize| -1.0 + i as f64 * h;
    let mut positions: Vec<Vec3> = Vec::new();
    let mut index: HashMap<(usize, usize, usize), usize> = HashMap::new();
    let mut vertex_id = |key: (usize, usize, usize), positions: &mut Vec<Vec3>| -> usize {
        if let Some(&id) = index.get(&key) {
            return id;
        }
        positions.push([coord(key.0), coord(key.1), coord(key.2)]);
        let id = positions.len() - 1;
        index.insert(key, id);
        id
    };

    let last = n - 1;
    let mut triangles = Vec::new();
    // face(axis, side): axis is the fixed coordinate, side 0 or last
    for axis in 0..3usize {
        for &side in &[0usize, last] {
            for a in 0..last {
                for b in 0..last {
                    let node = |a: usize, b: usize| -> (usize, usize, usize) {
                        match axis {
                            0 => (side, a, b),
                            1 => (a, side, b),
                            _ => (a, b, side),
                        }
                    };
                    let v00 = vertex_id(node(a, b), &mut positions);
                    let v10 = vertex_id(node(a + 1, b), &mut positions);
                    let v01 = vertex_id(node(a, b + 1), &mut positions);
                    let v11 = vertex_id(node(a + 1, b + 1), &mut positions);
                    // orient outward: flip winding on the negative side as needed
                    let outward_flip = match axis {
                        0 => side == 0,
                        1 => side == last,
                        _ => side == 0,
                    };
                    if outward_flip {
                        triangles.push([v00, v01, v10]);
                        triangles.push([v10, v01, v11]);
                    } else {
                        triangles.push([v00, v10, v01]);
                        triangles.push([v10, v11, v01]);
                    }
                }
            }
        }
    }
    let tags = vec![TAG_FLAT; positions.len()];
    BoundarySurface::from_triangles(positions, tags, triangles)
}

// ---------------------------------------------------------------------------
// Nearest-vertex spatial index (used for pinning traces onto the shell)
// ---------------------------------------------------------------------------

/// Uniform-bin index over [-1,1]^3 for nearest-surface-vertex queries.
pub struct SurfaceIndex {
    bins: Vec<Vec<usize>>,
    per_axis: usize,
}

impl SurfaceIndex {
    pub fn build(surface: &BoundarySurface) -> Self {
        let per_axis = ((surface.len() as f64).cbrt().ceil() as usize).clamp(4, 32);
        let mut bins = vec![Vec::new(); per_axis * per_axis * per_axis];
        for (v, &p) in surface.positions.iter().enumerate() {
            let b = Self::bin_of(p, per_axis);
            bins[b].push(v);
        }
        SurfaceIndex { bins, per_axis }
    }

    fn bin_coord(c: f64, per_axis: usize) -> usize {
        let t = ((c + 1.0) / 2.0 * per_axis as f64).floor();
        (t.max(0.0) as usize).min(per_axis - 1)
    }

    fn bin_of(p: Vec3, per_axis: usize) -> usize {
        let bx = Self::bin_coord(p[0], per_axis);
        let by = Self::bin_coord(p[1], per_axis);
        let bz = Self::bin_coord(p[2], per_axis);
        (bz * per_axis + by) * per_axis + bx
    }

    /// Index of the surface vertex nearest to `q`, growing the search ring as needed.
    pub fn nearest(&self, surface: &BoundarySurface, q: Vec3) -> usize {
        let m = self.per_axis;
        let bx = Self::bin_coord(q[0], m) as isize;
        let by = Self::bin_coord(q[1], m) as isize;
        let bz = Self::bin_coord(q[2], m) as isize;
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for ring in 0..m as isize {
            for dz in -ring..=ring {
                for dy in -ring..=ring {
                    for dx in -ring..=ring {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                            continue;
                        }
                        let (x, y, z) = (bx + dx, by + dy, bz + dz);
                        if x < 0 || y < 0 || z < 0 || x >= m as isize || y >= m as isize || z >= m as isize {
                            continue;
                        }
                        let bin = ((z as usize * m) + y as usize) * m + x as usize;
                        for &v in &self.bins[bin] {
                            let d = vec3::dist(surface.positions[v], q);
                            if d < best_d {
                                best_d = d;
                                best = v;
                            }
                        }
                    }
                }
            }
            // one extra ring after the first hit guards against bin-boundary misses
            if best != usize::MAX && (ring as f64 - 1.0) * (2.0 / m as f64) > best_d {
                break;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_even_and_small_n() {
        assert!(build_domain(DomainKind::Ball, 8).is_err());
        assert!(build_domain(DomainKind::Ball, 32).is_err());
        assert!(build_domain(DomainKind::Ball, 9).is_ok());
    }

    #[test]
    fn cube_partition_at_n9() {
        let g = build_domain(DomainKind::Cube, 9).unwrap();
        assert_eq!(g.count_inside(), 9 * 9 * 9);
        let interior = g.interior.iter().filter(|&&b| b).count();
        assert_eq!(interior, 7 * 7 * 7);
        // surface: 6 faces, deduped shared edges and corners
        assert_eq!(g.surface.len(), 6 * 81 - 12 * 9 + 8);
        assert!((g.surface.total_area() - 24.0).abs() < 1e-10);
    }

    #[test]
    fn ball_surface_area_within_one_percent() {
        let g = build_domain(DomainKind::Ball, 33).unwrap();
        let area = g.surface.total_area();
        assert!(
            (area - 4.0 * PI).abs() / (4.0 * PI) < 0.01,
            "area {area} vs {}",
            4.0 * PI
        );
    }

    #[test]
    fn half_ball_tagged_areas() {
        let g = build_domain(DomainKind::HalfBall, 33).unwrap();
        let flat: f64 = g
            .surface
            .weights
            .iter()
            .zip(&g.surface.tags)
            .filter(|(_, &t)| t == TAG_FLAT)
            .map(|(w, _)| w)
            .sum();
        let curved: f64 = g
            .surface
            .weights
            .iter()
            .zip(&g.surface.tags)
            .filter(|(_, &t)| t == TAG_CURVED)
            .map(|(w, _)| w)
            .sum();
        assert!((flat - PI).abs() / PI < 0.01, "flat {flat}");
        assert!((curved - 2.0 * PI).abs() / (2.0 * PI) < 0.01, "curved {curved}");
    }

    #[test]
    fn interior_mask_is_h_shrunk() {
        let g = build_domain(DomainKind::Ball, 17).unwrap();
        for iz in 0..g.n {
            for iy in 0..g.n {
                for ix in 0..g.n {
                    let idx = g.idx(ix, iy, iz);
                    if !g.interior[idx] {
                        continue;
                    }
                    let x = g.node_pos(ix, iy, iz);
                    for axis in 0..3 {
                        for s in [-1.0, 1.0] {
                            let mut y = x;
                            y[axis] += s * g.h;
                            assert!(g.kind.contains(y), "interior node {x:?} has outside neighbor");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn surface_vertices_on_analytic_boundary() {
        for kind in [DomainKind::Ball, DomainKind::HalfBall, DomainKind::Cube] {
            let g = build_domain(kind, 17).unwrap();
            for &p in &g.surface.positions {
                let on = match kind {
                    DomainKind::Ball => (vec3::norm(p) - 1.0).abs(),
                    DomainKind::Cube => {
                        (p.iter().map(|c| c.abs()).fold(0.0, f64::max) - 1.0).abs()
                    }
                    DomainKind::HalfBall => {
                        let r = (vec3::norm(p) - 1.0).abs();
                        let f = p[2].abs();
                        r.min(f)
                    }
                };
                assert!(on < g.h / 2.0, "vertex {p:?} is {on} from the boundary");
            }
        }
    }

    #[test]
    fn no_coincident_vertices() {
        for kind in [DomainKind::Ball, DomainKind::HalfBall, DomainKind::Cube] {
            let g = build_domain(kind, 17).unwrap();
            let s = &g.surface;
            for i in 0..s.len() {
                for j in (i + 1)..s.len() {
                    assert!(
                        vec3::dist(s.positions[i], s.positions[j]) > 1e-9,
                        "{kind:?}: vertices {i} and {j} coincide"
                    );
                }
            }
        }
    }

    #[test]
    fn outward_orientation() {
        // triangles of the ball surface must be wound counter-clockwise from outside
        let g = build_domain(DomainKind::Ball, 17).unwrap();
        for tri in &g.surface.triangles {
            let [a, b, c] = [
                g.surface.positions[tri[0]],
                g.surface.positions[tri[1]],
                g.surface.positions[tri[2]],
            ];
            let nrm = vec3::cross(vec3::sub(b, a), vec3::sub(c, a));
            let centroid = vec3::scale(vec3::add(vec3::add(a, b), c), 1.0 / 3.0);
            assert!(vec3::dot(nrm, centroid) > 0.0);
        }
    }

    #[test]
    fn area_and_volume_first_order_convergence() {
        for kind in [DomainKind::Ball, DomainKind::HalfBall, DomainKind::Cube] {
            let mut area_err = Vec::new();
            let mut vol_err = Vec::new();
            for n in [17usize, 33, 65] {
                let g = build_domain(kind, n).unwrap();
                area_err.push((g.surface.total_area() - kind.analytic_surface_area()).abs());
                vol_err.push((g.mask_volume() - kind.analytic_volume()).abs());
            }
            for k in 0..2 {
                // exactly-represented quantities (cube area) count as converged
                if area_err[k] > 1e-9 {
                    assert!(
                        area_err[k] / area_err[k + 1] >= 1.7,
                        "{kind:?} area errors {area_err:?}"
                    );
                }
                if vol_err[k] > 1e-9 {
                    assert!(
                        vol_err[k] / vol_err[k + 1] >= 1.7,
                        "{kind:?} volume errors {vol_err:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn nearest_vertex_index_agrees_with_brute_force() {
        let g = build_domain(DomainKind::Ball, 17).unwrap();
        let index = SurfaceIndex::build(&g.surface);
        let queries = [
            [0.9, 0.1, -0.2],
            [-0.3, 0.8, 0.4],
            [0.0, 0.0, 0.99],
            [-0.5, -0.5, -0.5],
        ];
        for q in queries {
            let got = index.nearest(&g.surface, q);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (v, &p) in g.surface.positions.iter().enumerate() {
                let d = vec3::dist(p, q);
                if d < best_d {
                    best_d = d;
                    best = v;
                }
            }
            assert!(
                (vec3::dist(g.surface.positions[got], q) - best_d).abs() < 1e-12,
                "query {q:?}: got {got}, best {best}"
            );
        }
    }
}
