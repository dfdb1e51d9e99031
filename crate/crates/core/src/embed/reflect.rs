use super::{EmbedError, Result};
use crate::matrix::{dot, norm, Matrix};

const UNIT_TOLERANCE: f64 = 1e-6;

/// Householder reflection `x - 2 (h·x) h`, i.e. `(I - 2 h hᵀ) x` without
/// forming the matrix. `h` must be unit length.
pub fn reflect(h_r: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if h_r.len() != x.len() {
        return Err(EmbedError::Dimension {
            expected: h_r.len(),
            found: x.len(),
        });
    }
    let n = norm(h_r);
    if (n - 1.0).abs() > UNIT_TOLERANCE {
        return Err(EmbedError::NotUnit { norm: n });
    }
    let mut out = vec![0.0; x.len()];
    reflect_unchecked(h_r, x, &mut out);
    Ok(out)
}

/// Same formula with no norm check. The training forward pass uses this so
/// perturbed relation vectors stay differentiable.
#[inline]
pub fn reflect_unchecked(h_r: &[f64], x: &[f64], out: &mut [f64]) {
    let c = 2.0 * dot(h_r, x);
    for ((o, xi), hi) in out.iter_mut().zip(x).zip(h_r) {
        *o = xi - c * hi;
    }
}

/// Dense `I - 2 h hᵀ`, for tests and diagnostics.
pub fn materialize_reflection(h_r: &[f64]) -> Matrix {
    let d = h_r.len();
    let mut m = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let id = if i == j { 1.0 } else { 0.0 };
            m.set(i, j, id - 2.0 * h_r[i] * h_r[j]);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(v: Vec<f64>) -> Vec<f64> {
        let n = norm(&v);
        v.into_iter().map(|x| x / n).collect()
    }

    #[test]
    fn axis_is_flipped() {
        assert_eq!(reflect(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), vec![-1.0, 0.0]);
    }

    #[test]
    fn orthogonal_component_is_fixed() {
        assert_eq!(reflect(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn rejects_non_unit_and_mismatched() {
        assert!(matches!(
            reflect(&[2.0, 0.0], &[1.0, 0.0]),
            Err(EmbedError::NotUnit { .. })
        ));
        assert!(matches!(
            reflect(&[1.0, 0.0], &[1.0]),
            Err(EmbedError::Dimension { .. })
        ));
    }

    proptest! {
        #[test]
        fn involution_and_isometry(
            h in prop::collection::vec(-1.0f64..1.0, 6),
            x in prop::collection::vec(-10.0f64..10.0, 6),
        ) {
            prop_assume!(norm(&h) > 1e-3);
            let h = unit(h);
            let once = reflect(&h, &x).unwrap();
            let twice = reflect(&h, &once).unwrap();
            let nx = norm(&x);
            prop_assert!((norm(&once) - nx).abs() <= 1e-9 * nx.max(1.0));
            for (a, b) in twice.iter().zip(&x) {
                prop_assert!((a - b).abs() <= 1e-9 * nx.max(1.0));
            }
        }
    }
}
