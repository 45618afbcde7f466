//! Eigenvalue and matrix-function helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix, DVector};

/// Eigenvalues of a general real square matrix, sorted by (real, imag).
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut ev: Vec<Complex<f64>> = a.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    ev
}

/// Largest eigenvalue of the symmetric matrix `a`.
pub fn max_symmetric_eigenvalue(a: &DMatrix<f64>) -> f64 {
    a.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest real part among the eigenvalues.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    eigenvalues(a).iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

pub fn is_hurwitz(a: &DMatrix<f64>) -> bool {
    spectral_abscissa(a) < 0.0
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    eigenvalues(a).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Groups `eigs` by nearest root and compares each group against the root.
///
/// Eigenvalues of a repeated root of a defective matrix scatter by roughly
/// `eps^(1/m)`, while the mean of the cluster stays accurate to working
/// precision. Returns the largest deviation between a cluster mean and its root,
/// or `None` when the group sizes do not equal `multiplicity` times the number
/// of times each root is listed.
pub fn cluster_mean_deviation(
    eigs: &[Complex<f64>],
    roots: &[Complex<f64>],
    multiplicity: usize,
) -> Option<f64> {
    // Collapse repeated roots (exact duplicates from analytic formulas).
    let mut distinct: Vec<(Complex<f64>, usize)> = Vec::new();
    for r in roots {
        match distinct.iter_mut().find(|(d, _)| (*d - *r).norm() < 1e-12 * (1.0 + r.norm())) {
            Some(entry) => entry.1 += 1,
            None => distinct.push((*r, 1)),
        }
    }
    let mut sums = vec![Complex::new(0.0, 0.0); distinct.len()];
    let mut counts = vec![0usize; distinct.len()];
    for e in eigs {
        let (idx, _) = distinct
            .iter()
            .enumerate()
            .map(|(i, (r, _))| (i, (*e - *r).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))?;
        sums[idx] += *e;
        counts[idx] += 1;
    }
    let mut worst: f64 = 0.0;
    for (i, (root, mult)) in distinct.iter().enumerate() {
        if counts[i] != mult * multiplicity {
            return None;
        }
        let mean = sums[i] / counts[i] as f64;
        worst = worst.max((mean - *root).norm());
    }
    Some(worst)
}

/// Matrix exponential `exp(a·t)`.
pub fn expm(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    (a * t).exp()
}

/// Spectral condition number via SVD.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv: DVector<f64> = a.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eigenvalues_of_rotation_generator() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]);
        let ev = eigenvalues(&a);
        assert_relative_eq!(ev[0].im, -2.0, epsilon = 1e-12);
        assert_relative_eq!(ev[1].im, 2.0, epsilon = 1e-12);
        assert!(!is_hurwitz(&a));
    }

    #[test]
    fn cluster_means_of_jordan_block() {
        // (s+1)^4 companion: eigenvalues scatter, their mean does not.
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, -1.0, -4.0, -6.0, -4.0],
        );
        let ev = eigenvalues(&a);
        let root = Complex::new(-1.0, 0.0);
        let dev = cluster_mean_deviation(&ev, &[root; 4], 1).unwrap();
        assert!(dev < 1e-9, "{dev}");
        assert!(cluster_mean_deviation(&ev, &[root; 2], 1).is_none());
    }

    #[test]
    fn expm_scalar() {
        let a = DMatrix::from_element(1, 1, -0.5);
        assert_relative_eq!(expm(&a, 2.0)[(0, 0)], (-1.0f64).exp(), epsilon = 1e-14);
    }
}
