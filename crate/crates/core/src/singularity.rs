//! Detection, classification, and audits of point defects.
//!
//! The detector is the contrapositive of epsilon-regularity: nodes whose
//! normalized local energy exceeds the threshold are clustered, each cluster
//! gets a two-radius extrapolated density and a topological degree from
//! signed spherical areas over a probe sphere.

use rayon::prelude::*;

use crate::domain::icosphere;
use crate::energy::CellEnergyField;
use crate::error::{Error, Result};
use crate::field::{trilinear_sample, SphereField};
use crate::vec3::{self, Vec3};

/// Detector thresholds; defaults scale with the grid spacing.
#[derive(Debug, Clone, Copy)]
pub struct DetectorParams {
    /// Probe radius of the local energy test.
    pub r_detect: f64,
    /// Density floor for a candidate node; half the defect density.
    pub density_threshold: f64,
    /// Candidates within this distance merge into one cluster.
    pub merge_radius: f64,
    /// Radius of the degree probe sphere.
    pub degree_radius: f64,
}

impl DetectorParams {
    pub fn default_for(h: f64) -> DetectorParams {
        DetectorParams {
            r_detect: 4.0 * h,
            density_threshold: 4.0 * std::f64::consts::PI,
            merge_radius: 8.0 * h,
            degree_radius: 6.0 * h,
        }
    }

    pub fn validate(&self, h: f64) -> Result<()> {
        if self.r_detect < 3.0 * h {
            return Err(Error::InvalidParam(format!(
                "r_detect = {} must be at least 3h = {}",
                self.r_detect,
                3.0 * h
            )));
        }
        if !(self.density_threshold > 0.0) {
            return Err(Error::InvalidParam("density threshold must be positive".into()));
        }
        if !(self.merge_radius > 0.0 && self.degree_radius > 0.0) {
            return Err(Error::InvalidParam("radii must be positive".into()));
        }
        Ok(())
    }
}

/// Diagnostic flags attached to detected points.
pub const FLAG_DEGREE_VIOLATION: &str = "degree_violation";
pub const FLAG_DEGREE_PROBE_SHRUNK: &str = "degree_probe_shrunk";
pub const FLAG_DEGREE_UNPROBED: &str = "degree_unprobed";
pub const FLAG_DENSITY_SINGLE_RADIUS: &str = "density_single_radius";

/// A located defect.
#[derive(Debug, Clone)]
pub struct SingularPoint {
    pub location: Vec3,
    /// Two-radius extrapolated energy density estimate.
    pub density: f64,
    pub degree: i32,
    /// Distance of the pre-rounding degree from the nearest integer.
    pub degree_error: f64,
    pub boundary_distance: f64,
    pub flags: Vec<&'static str>,
}

impl SingularPoint {
    pub fn classification_ok(&self) -> bool {
        self.degree == 1 || self.degree == -1
    }
}

pub fn singularities_csv(points: &[SingularPoint]) -> String {
    let mut out = String::from("x,y,z,density,degree,boundary_distance,flags\n");
    for p in points {
        out.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{},{:.17e},{}\n",
            p.location[0],
            p.location[1],
            p.location[2],
            p.density,
            p.degree,
            p.boundary_distance,
            p.flags.join(";")
        ));
    }
    out
}

/// Pairwise distances between defects and the empirical separation constant.
#[derive(Debug, Clone)]
pub struct SeparationReport {
    /// (i, j, |x_i - x_j|, min(D_i, D_j)) per unordered pair.
    pub pairs: Vec<(usize, usize, f64, f64)>,
    /// min over pairs of distance / min boundary distance; absent with
    /// fewer than two points.
    pub c_emp: Option<f64>,
}

/// Locate defects of a field.
///
/// Candidate nodes exceed the density threshold at the probe radius, merge
/// within the merge radius, and the representative is the density-weighted
/// centroid. Clusters whose degree is not +-1 are flagged, not dropped.
pub fn detect_singularities(field: &SphereField, params: &DetectorParams) -> Vec<SingularPoint> {
    let grid = &field.grid;
    params
        .validate(grid.h)
        .expect("detector parameters out of range");
    let cells = CellEnergyField::new(field);

    // candidate pass over interior nodes far enough from the boundary; the
    // probe ball may clip the domain slightly, which only lowers the local
    // energy and so cannot create spurious candidates
    let min_depth = (0.75 * params.r_detect).max(3.0 * grid.h);
    let candidates: Vec<(usize, f64)> = (0..grid.num_nodes())
        .into_par_iter()
        .filter_map(|idx| {
            if !grid.interior[idx] {
                return None;
            }
            let (ix, iy, iz) = grid.coords_of(idx);
            let p = grid.node_pos(ix, iy, iz);
            if grid.kind.boundary_distance(p) < min_depth {
                return None;
            }
            let rho = cells.normalized_ball_energy(p, params.r_detect);
            if rho > params.density_threshold {
                Some((idx, rho))
            } else {
                None
            }
        })
        .collect();

    // greedy clustering from the strongest candidate down
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        candidates[b]
            .1
            .partial_cmp(&candidates[a].1)
            .unwrap()
            .then_with(|| candidates[a].0.cmp(&candidates[b].0))
    });
    let positions: Vec<Vec3> = candidates
        .iter()
        .map(|&(idx, _)| {
            let (ix, iy, iz) = grid.coords_of(idx);
            grid.node_pos(ix, iy, iz)
        })
        .collect();
    let mut claimed = vec![false; candidates.len()];
    let mut centroids: Vec<Vec3> = Vec::new();
    for &o in &order {
        if claimed[o] {
            continue;
        }
        let seed = positions[o];
        let mut weighted = [0.0; 3];
        let mut weight = 0.0;
        for i in 0..candidates.len() {
            if claimed[i] || vec3::dist(positions[i], seed) > params.merge_radius {
                continue;
            }
            claimed[i] = true;
            let w = candidates[i].1;
            weighted = vec3::add(weighted, vec3::scale(positions[i], w));
            weight += w;
        }
        centroids.push(vec3::scale(weighted, 1.0 / weight));
    }

    // densities from the compensated quadrature at the detected centers
    let compensated = CellEnergyField::with_singularities(field, &centroids);
    let mut points = Vec::with_capacity(centroids.len());
    for &y in &centroids {
        let bd = grid.kind.boundary_distance(y);
        let mut flags = Vec::new();
        let r1 = params.r_detect;
        let r2 = 2.0 * params.r_detect;
        let density = if bd >= r2 + grid.h {
            let d1 = compensated.normalized_ball_energy(y, r1);
            let d2 = compensated.normalized_ball_energy(y, r2);
            2.0 * d1 - d2
        } else {
            flags.push(FLAG_DENSITY_SINGLE_RADIUS);
            compensated.normalized_ball_energy(y, r1)
        };
        if density < params.density_threshold {
            continue; // an energy blob, not a defect core
        }
        let (degree, degree_error) = match probe_degree(field, y, params, &mut flags) {
            Some(pair) => pair,
            None => (0, 1.0),
        };
        if degree.abs() != 1 {
            flags.push(FLAG_DEGREE_VIOLATION);
        }
        points.push(SingularPoint {
            location: y,
            density,
            degree,
            degree_error,
            boundary_distance: bd,
            flags,
        });
    }
    points.sort_by(|a, b| {
        b.density
            .partial_cmp(&a.density)
            .unwrap()
            .then_with(|| a.location.partial_cmp(&b.location).unwrap())
    });
    points
}

fn probe_degree(
    field: &SphereField,
    y: Vec3,
    params: &DetectorParams,
    flags: &mut Vec<&'static str>,
) -> Option<(i32, f64)> {
    let grid = &field.grid;
    let bd = grid.kind.boundary_distance(y);
    let mut r = params.degree_radius;
    if bd < r + grid.h {
        let shrunk = bd - grid.h;
        if shrunk < 4.0 * grid.h {
            flags.push(FLAG_DEGREE_UNPROBED);
            return None;
        }
        flags.push(FLAG_DEGREE_PROBE_SHRUNK);
        r = shrunk;
    }
    degree_on_sphere(field, y, r).ok()
}

/// Topological degree of the field restricted to the sphere of radius r
/// around `center`: the signed spherical areas of the value triangles over
/// an icosphere probe, divided by 4 pi and rounded.
///
/// Returns the rounded degree and the pre-rounding distance to it.
pub fn degree_on_sphere(field: &SphereField, center: Vec3, r: f64) -> Result<(i32, f64)> {
    let grid = &field.grid;
    if r < 4.0 * grid.h {
        return Err(Error::InvalidParam(format!(
            "degree probe radius {r} is below 4h = {}",
            4.0 * grid.h
        )));
    }
    if grid.kind.boundary_distance(center) < r {
        return Err(Error::ProbeOutsideDomain { center, radius: r });
    }
    let probe = icosphere(3);
    let values: Vec<Vec3> = probe
        .positions
        .iter()
        .map(|&p| {
            let q = vec3::add(center, vec3::scale(p, r));
            let v = trilinear_sample(grid, &field.node_values, q).unwrap_or(vec3::E3);
            let n = vec3::norm(v);
            if n > 1e-12 {
                vec3::scale(v, 1.0 / n)
            } else {
                vec3::E3
            }
        })
        .collect();
    let mut total = 0.0;
    for tri in &probe.triangles {
        total += signed_spherical_area(values[tri[0]], values[tri[1]], values[tri[2]]);
    }
    let raw = total / (4.0 * std::f64::consts::PI);
    let rounded = raw.round();
    Ok((rounded as i32, (raw - rounded).abs()))
}

/// Signed solid angle of the spherical triangle (a, b, c).
fn signed_spherical_area(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    let num = vec3::dot(a, vec3::cross(b, c));
    let den = 1.0 + vec3::dot(a, b) + vec3::dot(b, c) + vec3::dot(c, a);
    2.0 * num.atan2(den)
}

/// All pairwise defect distances and the empirical separation constant.
pub fn separation_audit(points: &[SingularPoint]) -> SeparationReport {
    let mut pairs = Vec::new();
    let mut c_emp: Option<f64> = None;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let dist = vec3::dist(points[i].location, points[j].location);
            let min_bd = points[i].boundary_distance.min(points[j].boundary_distance);
            pairs.push((i, j, dist, min_bd));
            if min_bd > 0.0 {
                let ratio = dist / min_bd;
                c_emp = Some(c_emp.map_or(ratio, |c: f64| c.min(ratio)));
            }
        }
    }
    SeparationReport { pairs, c_emp }
}

/// Counts of defects within `depth` of the boundary and deeper inside.
pub fn boundary_layer_census(points: &[SingularPoint], depth: f64) -> (usize, usize) {
    let near = points.iter().filter(|p| p.boundary_distance <= depth).count();
    (near, points.len() - near)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_domain, DomainKind};
    use crate::field::hedgehog;
    use crate::DEFECT_DENSITY;
    use std::sync::Arc;

    fn ball(n: usize) -> Arc<crate::domain::DomainGrid> {
        Arc::new(build_domain(DomainKind::Ball, n).unwrap())
    }

    #[test]
    fn constant_field_has_no_detections() {
        let g = ball(33);
        let f = SphereField::constant(g.clone(), [0.0, 0.0, 1.0]);
        let params = DetectorParams::default_for(g.h);
        assert!(detect_singularities(&f, &params).is_empty());
    }

    #[test]
    fn slowly_varying_field_has_no_detections() {
        // |grad u| of order one stays far below the threshold
        let g = ball(33);
        let mut f = SphereField::constant(g.clone(), [0.0, 0.0, 1.0]);
        for iz in 0..g.n {
            for iy in 0..g.n {
                for ix in 0..g.n {
                    let idx = g.idx(ix, iy, iz);
                    if g.inside[idx] {
                        let p = g.node_pos(ix, iy, iz);
                        f.node_values[idx] = vec3::normalize([
                            0.3 * (p[0] + 0.5 * p[2]).sin(),
                            0.3 * (p[1] - 0.3 * p[0]).cos(),
                            1.2 + 0.2 * p[2],
                        ]);
                    }
                }
            }
        }
        let params = DetectorParams::default_for(g.h);
        assert!(detect_singularities(&f, &params).is_empty());
    }

    #[test]
    fn hedgehog_detection_and_classification() {
        let g = ball(33);
        let f = hedgehog(g.clone(), [0.0, 0.0, 0.0]).unwrap();
        let params = DetectorParams::default_for(g.h);
        let points = detect_singularities(&f, &params);
        assert_eq!(points.len(), 1, "points: {points:?}");
        let p = &points[0];
        assert!(vec3::norm(p.location) < 2.0 * g.h, "location {:?}", p.location);
        assert!(
            (p.density - DEFECT_DENSITY).abs() / DEFECT_DENSITY < 0.10,
            "density {}",
            p.density
        );
        assert_eq!(p.degree, 1);
        assert!(p.classification_ok());
    }

    #[test]
    fn antipodal_hedgehog_has_degree_minus_one() {
        let g = ball(33);
        let f = hedgehog(g.clone(), [0.0, 0.0, 0.0]).unwrap().negate();
        let params = DetectorParams::default_for(g.h);
        let points = detect_singularities(&f, &params);
        assert_eq!(points.len(), 1);
        assert_eq!(points[0].degree, -1);
    }

    #[test]
    fn rotated_hedgehog_keeps_degree_plus_one() {
        let g = ball(33);
        let rot = vec3::rotation_between(
            vec3::normalize([1.0, 1.0, 0.2]),
            vec3::normalize([0.0, 0.3, 1.0]),
        );
        let f = hedgehog(g.clone(), [0.0, 0.0, 0.0]).unwrap().rotate_values(&rot);
        let (deg, err) = degree_on_sphere(&f, [0.0, 0.0, 0.0], 0.3).unwrap();
        assert_eq!(deg, 1);
        assert!(err < 0.05, "rounding error {err}");
    }

    #[test]
    fn degree_of_hedgehog_is_stable_in_probe_radius() {
        let g = ball(33);
        let f = hedgehog(g.clone(), [0.0, 0.0, 0.0]).unwrap();
        for r in [4.0 * g.h, 5.0 * g.h, 6.0 * g.h, 8.0 * g.h] {
            let (deg, err) = degree_on_sphere(&f, [0.0, 0.0, 0.0], r).unwrap();
            assert_eq!(deg, 1, "r = {r}");
            assert!(err < 0.05, "r = {r}: error {err}");
        }
    }

    #[test]
    fn constant_field_has_degree_zero() {
        let g = ball(33);
        let f = SphereField::constant(g.clone(), [0.0, 1.0, 0.0]);
        let (deg, err) = degree_on_sphere(&f, [0.0, 0.0, 0.0], 0.3).unwrap();
        assert_eq!(deg, 0);
        assert!(err < 1e-9);
    }

    #[test]
    fn probe_outside_domain_rejected() {
        let g = ball(33);
        let f = hedgehog(g.clone(), [0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            degree_on_sphere(&f, [0.8, 0.0, 0.0], 0.4),
            Err(Error::ProbeOutsideDomain { .. })
        ));
        assert!(matches!(
            degree_on_sphere(&f, [0.0, 0.0, 0.0], 3.0 * g.h),
            Err(Error::InvalidParam(_))
        ));
    }

    #[test]
    fn detection_is_translation_equivariant() {
        let g = ball(33);
        let params = DetectorParams::default_for(g.h);
        for center in [[0.3, 0.0, 0.0], [0.0, -0.25, 0.15], [0.2, 0.2, -0.2]] {
            let f = hedgehog(g.clone(), center).unwrap();
            let points = detect_singularities(&f, &params);
            assert_eq!(points.len(), 1, "center {center:?}");
            assert!(
                vec3::dist(points[0].location, center) < 2.0 * g.h,
                "center {center:?}, found {:?}",
                points[0].location
            );
        }
    }

    #[test]
    fn constructed_pair_gives_constructed_separation_ratio() {
        // the audit on a constructed two-defect configuration is definitional:
        // distance 1.0 over min boundary distance 0.5
        let mk = |loc: Vec3, bd: f64| SingularPoint {
            location: loc,
            density: DEFECT_DENSITY,
            degree: 1,
            degree_error: 0.0,
            boundary_distance: bd,
            flags: vec![],
        };
        let points = vec![mk([-0.5, 0.0, 0.0], 0.5), mk([0.5, 0.0, 0.0], 0.5)];
        let report = separation_audit(&points);
        assert_eq!(report.pairs.len(), 1);
        let (_, _, dist, min_bd) = report.pairs[0];
        assert!((dist - 1.0).abs() < 1e-15);
        assert!((min_bd - 0.5).abs() < 1e-15);
        assert!((report.c_emp.unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn blended_hedgehog_pair_is_detected_with_its_companion() {
        // blending two degree +1 cores into one continuous field forces a
        // compensating defect between them (the boundary data has degree one),
        // so the detector must report the two constructed cores plus one
        // companion of opposite degree
        let g = ball(33);
        let c1 = [-0.5, 0.0, 0.0];
        let c2 = [0.5, 0.0, 0.0];
        let mut f = SphereField::constant(g.clone(), [0.0, 0.0, 1.0]);
        for iz in 0..g.n {
            for iy in 0..g.n {
                for ix in 0..g.n {
                    let idx = g.idx(ix, iy, iz);
                    if !g.inside[idx] {
                        continue;
                    }
                    let p = g.node_pos(ix, iy, iz);
                    let w = smooth_ramp(p[0] / 0.2);
                    let a = hedgehog_value(p, c1);
                    let b = hedgehog_value(p, c2);
                    let mix = [
                        (1.0 - w) * a[0] + w * b[0],
                        (1.0 - w) * a[1] + w * b[1],
                        (1.0 - w) * a[2] + w * b[2],
                    ];
                    let n = vec3::norm(mix);
                    f.node_values[idx] = if n > 1e-9 {
                        vec3::scale(mix, 1.0 / n)
                    } else {
                        [0.0, 0.0, 1.0]
                    };
                }
            }
        }
        let params = DetectorParams::default_for(g.h);
        let points = detect_singularities(&f, &params);
        assert_eq!(points.len(), 3, "points {points:?}");
        let mut found = [false; 2];
        for p in &points {
            if vec3::dist(p.location, c1) < 2.5 * g.h {
                found[0] = true;
                assert_eq!(p.degree, 1);
            }
            if vec3::dist(p.location, c2) < 2.5 * g.h {
                found[1] = true;
                assert_eq!(p.degree, 1);
            }
        }
        assert!(found[0] && found[1], "constructed cores missing: {points:?}");
        let total: i32 = points.iter().map(|p| p.degree).sum();
        assert_eq!(total, 1, "degrees must sum to the boundary degree");
    }

    fn hedgehog_value(p: Vec3, c: Vec3) -> Vec3 {
        let d = vec3::sub(p, c);
        let n = vec3::norm(d);
        if n < 1e-12 {
            [0.0, 0.0, 1.0]
        } else {
            vec3::scale(d, 1.0 / n)
        }
    }

    fn smooth_ramp(t: f64) -> f64 {
        let t = ((t + 1.0) / 2.0).clamp(0.0, 1.0);
        t * t * (3.0 - 2.0 * t)
    }

    #[test]
    fn separation_audit_with_single_point_has_no_constant() {
        let g = ball(33);
        let f = hedgehog(g.clone(), [0.0, 0.0, 0.0]).unwrap();
        let params = DetectorParams::default_for(g.h);
        let points = detect_singularities(&f, &params);
        let report = separation_audit(&points);
        assert!(report.c_emp.is_none());
        assert!(report.pairs.is_empty());
    }

    #[test]
    fn census_partitions_by_depth() {
        assert_eq!(boundary_layer_census(&[], 0.5), (0, 0));
        let g = ball(33);
        let params = DetectorParams::default_for(g.h);
        let f = hedgehog(g.clone(), [0.0, 0.0, 0.0]).unwrap();
        let center = detect_singularities(&f, &params);
        assert_eq!(boundary_layer_census(&center, 0.5), (0, 1));
        let f = hedgehog(g.clone(), [0.0, 0.0, 0.8]).unwrap();
        let shallow = detect_singularities(&f, &params);
        assert_eq!(shallow.len(), 1);
        assert_eq!(boundary_layer_census(&shallow, 0.3), (1, 0));
    }
}
