use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::molio::Complex;

/// Radius of the ball translations are drawn from, Å.
pub const TRANSLATION_RADIUS: f64 = 10.0;

/// `p ↦ R·p + t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
    pub seed: u64,
}

/// Uniform unit quaternion `(w, x, y, z)` (Shoemake's subgroup algorithm).
pub fn uniform_quaternion(rng: &mut impl Rng) -> [f64; 4] {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    let u3: f64 = rng.gen();
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    let tau = std::f64::consts::TAU;
    [b * (tau * u3).cos(), a * (tau * u2).sin(), a * (tau * u2).cos(), b * (tau * u3).sin()]
}

/// Uniform point in the ball of radius `r` by rejection from the cube.
pub fn uniform_in_ball(rng: &mut impl Rng, r: f64) -> [f64; 3] {
    loop {
        let p: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        if p.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
            return [p[0] * r, p[1] * r, p[2] * r];
        }
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self::from_quaternion([1.0, 0.0, 0.0, 0.0], [0.0; 3], 0)
    }

    /// Rotation of a (not necessarily normalised) quaternion `(w, x, y, z)`.
    pub fn from_quaternion(q: [f64; 4], translation: [f64; 3], seed: u64) -> Self {
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        let [w, x, y, z] = q.map(|v| v / n);
        let rotation = [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ];
        RigidTransform { rotation, translation, seed }
    }

    /// Uniform rotation and a translation uniform in the 10 Å ball, fully
    /// determined by `seed`.
    pub fn sample(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = uniform_quaternion(&mut rng);
        let t = uniform_in_ball(&mut rng, TRANSLATION_RADIUS);
        Self::from_quaternion(q, t, seed)
    }

    pub fn apply_point(&self, p: &[f64; 3]) -> [f64; 3] {
        let r = &self.rotation;
        let mut o = self.translation;
        for i in 0..3 {
            o[i] += r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2];
        }
        o
    }

    pub fn apply(&self, pts: &[[f64; 3]]) -> Vec<[f64; 3]> {
        pts.iter().map(|p| self.apply_point(p)).collect()
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        let r = &self.rotation;
        ((r[0][0] + r[1][1] + r[2][2] - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }

    pub fn determinant(&self) -> f64 {
        let r = &self.rotation;
        r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
    }

    /// Largest entry of `|RᵀR − I|`.
    pub fn orthogonality_error(&self) -> f64 {
        let r = &self.rotation;
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| r[k][i] * r[k][j]).sum();
                let id = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - id).abs());
            }
        }
        worst
    }
}

/// Moves the compound by a random rigid transform; the protein is the fixed frame.
pub fn perturb_compound(c: &Complex, rng: &mut impl Rng) -> (Complex, RigidTransform) {
    let t = RigidTransform::sample(rng.gen());
    let mut out = c.clone();
    out.compound.coords = t.apply(&c.compound.coords);
    (out, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn identity_leaves_points() {
        let p = [[1.0, -2.0, 3.5], [0.0, 0.0, 0.0]];
        assert_eq!(RigidTransform::identity().apply(&p), p.to_vec());
    }

    #[test]
    fn samples_are_proper_rotations() {
        for seed in 0..200 {
            let t = RigidTransform::sample(seed);
            assert!(t.orthogonality_error() < 1e-10);
            assert!((t.determinant() - 1.0).abs() < 1e-10);
            let r = t.translation.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(r <= TRANSLATION_RADIUS);
        }
        assert_eq!(RigidTransform::sample(7), RigidTransform::sample(7));
    }

    #[test]
    fn rotation_angle_follows_the_haar_density() {
        // Angle CDF under Haar measure on SO(3): (θ − sin θ)/π.
        let bins = 20;
        let draws = 10_000;
        let mut counts = vec![0usize; bins];
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..draws {
            let t = RigidTransform::sample(rng.gen());
            let th = t.angle();
            let u = (th - th.sin()) / std::f64::consts::PI;
            counts[((u * bins as f64) as usize).min(bins - 1)] += 1;
        }
        let expected = draws as f64 / bins as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
        assert!(p > 0.01, "chi2 = {chi2}, p = {p}, counts = {counts:?}");
    }

    #[test]
    fn translations_fill_the_ball() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 20_000;
        let inner = (0..n)
            .filter(|_| {
                let p = uniform_in_ball(&mut rng, TRANSLATION_RADIUS);
                p.iter().map(|v| v * v).sum::<f64>().sqrt() < TRANSLATION_RADIUS / 2.0
            })
            .count();
        // Volume fraction of the half-radius ball is 1/8.
        assert!((inner as f64 / n as f64 - 0.125).abs() < 0.01);
    }
}
