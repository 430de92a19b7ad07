//! Small 3D helpers shared by the acoustic and visual stages.

use nalgebra::Vector3;

pub type Vec3 = Vector3<f64>;

pub fn vec3(p: [f64; 3]) -> Vec3 {
    Vec3::new(p[0], p[1], p[2])
}

pub fn to_array(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

pub fn is_finite(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// True when every point lies within `tol_m` of a single line. Fewer than
/// three distinct points are trivially collinear.
pub fn all_collinear(points: &[Vec3], tol_m: f64) -> bool {
    let Some(first) = points.first() else {
        return true;
    };
    let Some(far) = points
        .iter()
        .max_by(|a, b| (*a - first).norm().total_cmp(&(*b - first).norm()))
    else {
        return true;
    };
    let axis = far - first;
    if axis.norm() <= tol_m {
        return true;
    }
    let dir = axis.normalize();
    points.iter().all(|p| {
        let d = p - first;
        (d - dir * d.dot(&dir)).norm() <= tol_m
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinearity() {
        let line = [vec3([0.0, 0.0, 0.0]), vec3([1.0, 1.0, 0.0]), vec3([3.0, 3.0, 0.0])];
        assert!(all_collinear(&line, 1e-9));
        let tri = [vec3([0.0, 0.0, 0.0]), vec3([1.0, 0.0, 0.0]), vec3([0.0, 1.0, 0.0])];
        assert!(!all_collinear(&tri, 1e-9));
        assert!(all_collinear(&[], 1e-9));
    }
}
