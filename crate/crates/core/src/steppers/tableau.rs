//! Butcher tableaus for the segment integrators.

/// Coefficients `(z, a, w)` of an `s`-stage Runge–Kutta method.
///
/// `z` are the stage nodes, `a` the stage matrix (row `i` holds `a[i][j]`),
/// `w` the quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    pub z: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub w: Vec<f64>,
}

impl ButcherTableau {
    pub fn new(z: Vec<f64>, a: Vec<Vec<f64>>, w: Vec<f64>) -> Self {
        let s = z.len();
        assert!(s >= 1, "a tableau needs at least one stage");
        assert_eq!(w.len(), s, "weight count must equal stage count");
        assert_eq!(a.len(), s, "stage matrix must have s rows");
        assert!(a.iter().all(|row| row.len() == s), "stage matrix must be s x s");
        Self { z, a, w }
    }

    /// Explicit Euler as a one-stage tableau.
    pub fn euler() -> Self {
        Self::new(vec![0.0], vec![vec![0.0]], vec![1.0])
    }

    /// Classical fourth-order Runge–Kutta.
    ///
    /// ```text
    ///  0  |
    /// 1/2 | 1/2
    /// 1/2 |  0   1/2
    ///  1  |  0    0    1
    /// ----+--------------------
    ///     | 1/6  2/6  2/6  1/6
    /// ```
    pub fn rk4() -> Self {
        Self::new(
            vec![0.0, 0.5, 0.5, 1.0],
            vec![
                vec![0.0, 0.0, 0.0, 0.0],
                vec![0.5, 0.0, 0.0, 0.0],
                vec![0.0, 0.5, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0],
            ],
            vec![1.0 / 6.0, 2.0 / 6.0, 2.0 / 6.0, 1.0 / 6.0],
        )
    }

    /// Two-stage Gauss–Legendre (order 4, A-stable, implicit).
    ///
    /// ```text
    /// 1/2 - √3/6 | 1/4          1/4 - √3/6
    /// 1/2 + √3/6 | 1/4 + √3/6   1/4
    /// -----------+-------------------------
    ///            | 1/2          1/2
    /// ```
    pub fn gauss_legendre2() -> Self {
        let r = 3f64.sqrt() / 6.0;
        Self::new(
            vec![0.5 - r, 0.5 + r],
            vec![vec![0.25, 0.25 - r], vec![0.25 + r, 0.25]],
            vec![0.5, 0.5],
        )
    }

    pub fn stages(&self) -> usize {
        self.z.len()
    }

    /// True when `a[i][j] == 0` for all `j >= i`, so stages can be evaluated in order.
    pub fn is_explicit(&self) -> bool {
        self.a
            .iter()
            .enumerate()
            .all(|(i, row)| row[i..].iter().all(|&x| x == 0.0))
    }

    pub fn weight_sum(&self) -> f64 {
        self.w.iter().sum()
    }
}
