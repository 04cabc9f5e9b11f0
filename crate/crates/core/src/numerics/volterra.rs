use super::{Grid1D, NumericsError};

/// Time-marching solver for the Volterra equation of the second kind
///
/// ```text
/// b(t) = integral_{t_0}^{t} kernel(t, s) b(s) ds + forcing(t)
/// ```
///
/// on the nodes of `t_grid`, with composite trapezoid quadrature for the
/// memory integral. At each node the implicit diagonal term is linear in
/// `b(t_k)` and is solved exactly.
pub fn volterra2_solve(
    kernel: impl Fn(f64, f64) -> f64,
    forcing: &[f64],
    t_grid: &Grid1D,
) -> Result<Vec<f64>, NumericsError> {
    let ts = t_grid.nodes();
    assert_eq!(
        forcing.len(),
        ts.len(),
        "forcing must be sampled on the time grid"
    );
    let n = ts.len();
    let mut b = vec![0.0; n];
    b[0] = forcing[0];
    for k in 1..n {
        let tk = ts[k];
        // trapezoid weights on [t_0, t_k]
        let mut acc = forcing[k];
        for j in 0..k {
            let w = if j == 0 {
                0.5 * (ts[1] - ts[0])
            } else {
                0.5 * (ts[j + 1] - ts[j - 1])
            };
            let kv = kernel(tk, ts[j]);
            if !kv.is_finite() {
                return Err(NumericsError::NonFinite { context: "volterra kernel", t: ts[j] });
            }
            acc += w * kv * b[j];
        }
        let wk = 0.5 * (ts[k] - ts[k - 1]);
        let diag = 1.0 - wk * kernel(tk, tk);
        if diag <= 0.0 {
            return Err(NumericsError::GridTooCoarse { index: k, diag });
        }
        b[k] = acc / diag;
        if !b[k].is_finite() {
            return Err(NumericsError::NonFinite { context: "volterra solution", t: tk });
        }
    }
    Ok(b)
}
