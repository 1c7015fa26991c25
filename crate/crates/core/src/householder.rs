//! Rotation `U(w)` that maps a weight vector onto the positive last axis,
//! `U·w = (0, …, 0, ‖w‖)`.
//!
//! `U` is a single Householder reflector `H = I − 2vvᵀ/(vᵀv)`, optionally
//! followed by a sign flip `S` of the last coordinate. The reflector vector
//! is always chosen as `v = w + sign(w_L)‖w‖e_L` so that no cancellation
//! occurs when forming it:
//!
//! * `w_L ≥ 0`: `H·w = −‖w‖e_L`, hence `U = S·H`.
//! * `w_L < 0`: `H·w = +‖w‖e_L`, hence `U = H`.
//!
//! Both variants are exactly orthogonal up to rounding and apply in `O(L)`.

use crate::error::{check_dim, Error, Result};
use crate::types::{dot, norm};

#[derive(Debug, Clone)]
pub struct OrthogonalMap {
    v: Vec<f64>,
    two_over_vtv: f64,
    flip_last: bool,
}

/// Builds the rotation `U(w)`. Fails on the zero vector.
pub fn householder_rotation(w: &[f64]) -> Result<OrthogonalMap> {
    let n = norm(w);
    if w.is_empty() || n == 0.0 || !n.is_finite() {
        return Err(Error::Singular("rotation of a zero or non-finite vector".into()));
    }
    let last = w.len() - 1;
    let mut v = w.to_vec();
    let flip_last = w[last] >= 0.0;
    if flip_last {
        v[last] += n;
    } else {
        v[last] -= n;
    }
    let vtv = dot(&v, &v);
    Ok(OrthogonalMap { v, two_over_vtv: 2.0 / vtv, flip_last })
}

impl OrthogonalMap {
    pub fn dim(&self) -> usize {
        self.v.len()
    }

    fn reflect(&self, x: &mut [f64]) {
        let k = self.two_over_vtv * dot(&self.v, x);
        for (xi, vi) in x.iter_mut().zip(&self.v) {
            *xi -= k * vi;
        }
    }

    /// `U·x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut y = x.to_vec();
        self.reflect(&mut y);
        if self.flip_last {
            let l = y.len() - 1;
            y[l] = -y[l];
        }
        Ok(y)
    }

    /// `Uᵀ·x`.
    pub fn apply_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut y = x.to_vec();
        if self.flip_last {
            let l = y.len() - 1;
            y[l] = -y[l];
        }
        self.reflect(&mut y);
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Dense matrix of U built column by column, then UᵀU checked against I.
    fn dense(u: &OrthogonalMap) -> Vec<Vec<f64>> {
        let n = u.dim();
        (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                u.apply(&e).unwrap()
            })
            .collect()
    }

    #[test]
    fn aligned_vector_is_fixed() {
        let u = householder_rotation(&[0.0, 0.0, 0.0, 3.0]).unwrap();
        assert_eq!(u.apply(&[0.0, 0.0, 0.0, 3.0]).unwrap(), vec![0.0, 0.0, 0.0, 3.0]);
    }

    #[test]
    fn pythagorean_pair() {
        let u = householder_rotation(&[3.0, 4.0]).unwrap();
        let y = u.apply(&[3.0, 4.0]).unwrap();
        assert!(y[0].abs() < 1e-15 && (y[1] - 5.0).abs() < 1e-15, "{y:?}");
    }

    #[test]
    fn zero_vector_is_singular() {
        assert!(matches!(householder_rotation(&[0.0, 0.0]), Err(Error::Singular(_))));
    }

    #[test]
    fn orthogonal_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let w: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            let u = householder_rotation(&w).unwrap();
            let cols = dense(&u);
            for i in 0..5 {
                for j in 0..5 {
                    let g = dot(&cols[i], &cols[j]);
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((g - want).abs() < 1e-14);
                }
            }
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let ux = u.apply(&x).unwrap();
            assert!((norm(&ux) - norm(&x)).abs() < 1e-12);
            let back = u.apply_transpose(&ux).unwrap();
            for (a, b) in back.iter().zip(&x) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    proptest! {
        #[test]
        fn maps_onto_positive_last_axis(w in prop::collection::vec(-10.0f64..10.0, 1..8)) {
            let n = norm(&w);
            prop_assume!(n > 1e-6);
            let y = householder_rotation(&w).unwrap().apply(&w).unwrap();
            let l = y.len() - 1;
            for yi in &y[..l] {
                prop_assert!(yi.abs() <= 1e-12 * n);
            }
            prop_assert!((y[l] - n).abs() <= 1e-12 * n);
        }
    }
}
