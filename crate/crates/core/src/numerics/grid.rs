use super::NumericsError;

/// A strictly increasing one-dimensional grid with an attached weight
/// exponent for weighted-norm accounting (size grids carry `kappa0`, age
/// grids carry `mu0`).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    nodes: Vec<f64>,
    pub weight_exponent: f64,
}

impl Grid1D {
    pub fn new(nodes: Vec<f64>, weight_exponent: f64) -> Result<Self, NumericsError> {
        if nodes.len() < 2 {
            return Err(NumericsError::InvalidGrid(nodes.len()));
        }
        for i in 1..nodes.len() {
            if !(nodes[i] > nodes[i - 1]) || !nodes[i].is_finite() {
                return Err(NumericsError::InvalidGrid(i));
            }
        }
        if !nodes[0].is_finite() {
            return Err(NumericsError::InvalidGrid(0));
        }
        Ok(Self { nodes, weight_exponent })
    }

    /// Uniform grid with `n_nodes` nodes on `[a, b]`.
    pub fn uniform(a: f64, b: f64, n_nodes: usize, weight_exponent: f64) -> Result<Self, NumericsError> {
        if n_nodes < 2 || !(b > a) {
            return Err(NumericsError::InvalidGrid(n_nodes));
        }
        let h = (b - a) / (n_nodes - 1) as f64;
        let mut nodes: Vec<f64> = (0..n_nodes).map(|i| a + h * i as f64).collect();
        *nodes.last_mut().unwrap() = b;
        Self::new(nodes, weight_exponent)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Same nodes with a different weight exponent.
    pub fn with_weight(&self, weight_exponent: f64) -> Self {
        Self { nodes: self.nodes.clone(), weight_exponent }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> f64 {
        self.nodes[0]
    }

    pub fn last(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn span(&self) -> (f64, f64) {
        (self.first(), self.last())
    }

    /// Composite trapezoid weights for this grid.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let n = self.nodes.len();
        let mut w = vec![0.0; n];
        for i in 0..n - 1 {
            let h = self.nodes[i + 1] - self.nodes[i];
            w[i] += 0.5 * h;
            w[i + 1] += 0.5 * h;
        }
        w
    }

    /// Index of the last node <= x (clamped to `[0, len-2]` so that
    /// `nodes[i]..nodes[i+1]` is always a valid bracket).
    pub fn locate(&self, x: f64) -> usize {
        match self
            .nodes
            .binary_search_by(|v| v.partial_cmp(&x).expect("grid nodes are finite"))
        {
            Ok(i) => i.min(self.nodes.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.nodes.len() - 2),
        }
    }

    /// Piecewise-linear interpolation of nodal `values`, clamped at the ends.
    pub fn interp(&self, values: &[f64], x: f64) -> f64 {
        debug_assert_eq!(values.len(), self.nodes.len());
        if x <= self.first() {
            return values[0];
        }
        if x >= self.last() {
            return *values.last().unwrap();
        }
        let i = self.locate(x);
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let t = (x - x0) / (x1 - x0);
        values[i] * (1.0 - t) + values[i + 1] * t
    }

    /// Four-point Lagrange interpolation (exact at nodes, O(h^4) between
    /// them for smooth data). Falls back to linear in the first and last
    /// cell.
    pub fn interp_cubic(&self, values: &[f64], x: f64) -> f64 {
        debug_assert_eq!(values.len(), self.nodes.len());
        if x <= self.first() {
            return values[0];
        }
        if x >= self.last() {
            return *values.last().unwrap();
        }
        let n = self.nodes.len();
        if n < 4 {
            return self.interp(values, x);
        }
        // centered stencil, shifted one-sided in the first and last cell
        let i = self.locate(x).clamp(1, n - 3);
        let xs = [self.nodes[i - 1], self.nodes[i], self.nodes[i + 1], self.nodes[i + 2]];
        let ys = [values[i - 1], values[i], values[i + 1], values[i + 2]];
        let mut acc = 0.0;
        for a in 0..4 {
            let mut l = ys[a];
            for b in 0..4 {
                if a != b {
                    l *= (x - xs[b]) / (xs[a] - xs[b]);
                }
            }
            acc += l;
        }
        acc
    }

    /// Trapezoid value of `values` against weight `e^{s*x}` (pass `s = 0` for
    /// the plain integral).
    pub fn weighted_trapezoid(&self, values: &[f64], s: f64) -> f64 {
        debug_assert_eq!(values.len(), self.nodes.len());
        let mut acc = 0.0;
        for i in 0..self.nodes.len() - 1 {
            let h = self.nodes[i + 1] - self.nodes[i];
            let a = values[i] * (s * self.nodes[i]).exp();
            let b = values[i + 1] * (s * self.nodes[i + 1]).exp();
            acc += 0.5 * h * (a + b);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_short_and_nonmonotone() {
        assert!(Grid1D::new(vec![1.0], 0.0).is_err());
        assert!(Grid1D::new(vec![0.0, 0.0, 1.0], 0.0).is_err());
        assert!(Grid1D::new(vec![0.0, 2.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn uniform_ends_exact() {
        let g = Grid1D::uniform(0.0, 1.0, 11, 0.0).unwrap();
        assert_eq!(g.first(), 0.0);
        assert_eq!(g.last(), 1.0);
        assert_eq!(g.len(), 11);
    }

    #[test]
    fn interp_linear_exact() {
        let g = Grid1D::uniform(0.0, 2.0, 21, 0.0).unwrap();
        let vals: Vec<f64> = g.nodes().iter().map(|&x| 3.0 * x - 1.0).collect();
        for &x in &[0.0, 0.37, 1.5, 2.0] {
            assert!((g.interp(&vals, x) - (3.0 * x - 1.0)).abs() < 1e-14);
        }
        // clamped outside
        assert_eq!(g.interp(&vals, -1.0), -1.0);
        assert_eq!(g.interp(&vals, 3.0), 5.0);
    }

    #[test]
    fn trapezoid_weights_sum_to_span() {
        let g = Grid1D::new(vec![0.0, 0.5, 2.0, 3.0], 0.0).unwrap();
        let w: f64 = g.trapezoid_weights().iter().sum();
        assert!((w - 3.0).abs() < 1e-14);
    }
}
