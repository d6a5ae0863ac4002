//! SVD-based least squares shared by the linear estimators.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value threshold used for every rank decision.
pub const RANK_TOLERANCE: f64 = 1e-8;

/// Singular spectrum of a stacked system, padded so that there is one
/// singular value (and one right singular vector) per unknown.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Descending.
    pub singular_values: Vec<f64>,
    /// Right singular vectors, one per column, ordered like `singular_values`.
    pub right_vectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn of(a: &DMatrix<f64>) -> Self {
        let cols = a.ncols();
        // pad with zero rows so the thin SVD yields a full V
        let padded;
        let m = if a.nrows() < cols {
            padded = {
                let mut p = DMatrix::zeros(cols, cols);
                p.view_mut((0, 0), (a.nrows(), cols)).copy_from(a);
                p
            };
            &padded
        } else {
            a
        };
        let svd = m.clone().svd(false, true);
        let v_t = svd.v_t.expect("svd requested with v_t");
        let mut order: Vec<usize> = (0..cols).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let singular_values = order.iter().map(|&i| svd.singular_values[i]).collect();
        let mut right_vectors = DMatrix::zeros(cols, cols);
        for (k, &i) in order.iter().enumerate() {
            right_vectors.set_column(k, &v_t.row(i).transpose());
        }
        Spectrum {
            singular_values,
            right_vectors,
        }
    }

    pub fn max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }

    fn threshold(&self) -> f64 {
        RANK_TOLERANCE * self.max()
    }

    /// Number of singular values above the relative tolerance.
    pub fn rank(&self) -> usize {
        if self.max() <= 0.0 {
            return 0;
        }
        let tol = self.threshold();
        self.singular_values.iter().filter(|&&s| s > tol).count()
    }

    /// `sigma_max / sigma_min`, infinite when singular.
    pub fn condition_number(&self) -> f64 {
        let min = self.min();
        if min > 0.0 {
            self.max() / min
        } else {
            f64::INFINITY
        }
    }

    /// Unit vectors spanning the numerical null space.
    pub fn null_space(&self) -> Vec<DVector<f64>> {
        let rank = self.rank();
        (rank..self.singular_values.len())
            .map(|k| self.right_vectors.column(k).into_owned())
            .collect()
    }
}

/// Minimum-norm least-squares solution of `a x = b` together with the spectrum
/// of `a`.
pub fn solve_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, Spectrum) {
    let spectrum = Spectrum::of(a);
    let svd = a.clone().svd(true, true);
    let tol = spectrum.threshold().max(f64::MIN_POSITIVE);
    let x = svd.solve(b, tol).expect("svd computed with u and v_t");
    (x, spectrum)
}
