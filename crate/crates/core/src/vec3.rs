//! Small fixed-size 3-vector helpers used throughout the crate.

pub type Vec3 = [f64; 3];

pub const E3: Vec3 = [0.0, 0.0, 1.0];

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm_sq(a: Vec3) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    norm_sq(a).sqrt()
}

#[inline]
pub fn dist(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

/// Normalize to unit length. Panics on the zero vector; callers guard that case.
#[inline]
pub fn normalize(a: Vec3) -> Vec3 {
    let n = norm(a);
    assert!(n > 0.0, "cannot normalize a zero vector");
    scale(a, 1.0 / n)
}

#[inline]
pub fn is_finite(a: Vec3) -> bool {
    a[0].is_finite() && a[1].is_finite() && a[2].is_finite()
}

/// Rotation by `angle` about the unit axis `axis` (Rodrigues formula).
pub fn rotate_about(axis: Vec3, angle: f64, v: Vec3) -> Vec3 {
    let (s, c) = angle.sin_cos();
    let k = axis;
    let kxv = cross(k, v);
    let kdv = dot(k, v);
    [
        v[0] * c + kxv[0] * s + k[0] * kdv * (1.0 - c),
        v[1] * c + kxv[1] * s + k[1] * kdv * (1.0 - c),
        v[2] * c + kxv[2] * s + k[2] * kdv * (1.0 - c),
    ]
}

/// Rotation matrix (row-major) taking unit vector `from` to unit vector `to`.
///
/// The antipodal case picks an arbitrary perpendicular axis and rotates by pi.
pub fn rotation_between(from: Vec3, to: Vec3) -> [[f64; 3]; 3] {
    let c = dot(from, to).clamp(-1.0, 1.0);
    if c > 1.0 - 1e-14 {
        return [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    }
    let axis = if c < -1.0 + 1e-14 {
        // any unit vector perpendicular to `from`
        let pick = if from[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        normalize(cross(from, pick))
    } else {
        normalize(cross(from, to))
    };
    let angle = c.acos();
    let cols = [
        rotate_about(axis, angle, [1.0, 0.0, 0.0]),
        rotate_about(axis, angle, [0.0, 1.0, 0.0]),
        rotate_about(axis, angle, [0.0, 0.0, 1.0]),
    ];
    // columns -> row-major matrix
    let mut m = [[0.0; 3]; 3];
    for r in 0..3 {
        for (c_idx, col) in cols.iter().enumerate() {
            m[r][c_idx] = col[r];
        }
    }
    m
}

#[inline]
pub fn mat_apply(m: &[[f64; 3]; 3], v: Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_between_maps_from_to_to() {
        let a = normalize([0.3, -0.5, 0.9]);
        let b = normalize([-0.7, 0.1, 0.2]);
        let m = rotation_between(a, b);
        let img = mat_apply(&m, a);
        assert!(dist(img, b) < 1e-12);
        // orthogonality: |Mx| = |x|
        let x = [0.2, 0.5, -0.3];
        assert!((norm(mat_apply(&m, x)) - norm(x)).abs() < 1e-12);
    }

    #[test]
    fn rodrigues_quarter_turn() {
        let v = rotate_about([0.0, 0.0, 1.0], std::f64::consts::FRAC_PI_2, [1.0, 0.0, 0.0]);
        assert!(dist(v, [0.0, 1.0, 0.0]) < 1e-15);
    }
}
