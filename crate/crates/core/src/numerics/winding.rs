use num_complex::Complex64;

use super::NumericsError;

/// Axis-aligned rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexRect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl ComplexRect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        assert!(re_min < re_max && im_min < im_max, "empty rectangle");
        Self { re_min, re_max, im_min, im_max }
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))
    }

    pub fn diameter(&self) -> f64 {
        let w = self.re_max - self.re_min;
        let h = self.im_max - self.im_min;
        (w * w + h * h).sqrt()
    }

    pub fn contains(&self, z: Complex64, slack: f64) -> bool {
        z.re >= self.re_min - slack
            && z.re <= self.re_max + slack
            && z.im >= self.im_min - slack
            && z.im <= self.im_max + slack
    }

    /// Split along the longer side at the given fraction.
    fn split(&self, frac: f64) -> (Self, Self) {
        let w = self.re_max - self.re_min;
        let h = self.im_max - self.im_min;
        if w >= h {
            let m = self.re_min + frac * w;
            (
                Self { re_max: m, ..*self },
                Self { re_min: m, ..*self },
            )
        } else {
            let m = self.im_min + frac * h;
            (
                Self { im_max: m, ..*self },
                Self { im_min: m, ..*self },
            )
        }
    }

    /// Counterclockwise corner list starting at the bottom-left.
    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }
}

/// A root located inside the scan rectangle.
#[derive(Debug, Clone, Copy)]
pub struct LocatedRoot {
    pub z: Complex64,
    pub multiplicity: usize,
    pub residual: f64,
}

const INITIAL_EDGE_SAMPLES: usize = 32;
const EDGE_REFINE_DEPTH: usize = 40;
/// Levels of unconditional bisection per segment. Keeps any single segment's
/// true phase change below 3 pi / 2 for features as close to the contour as
/// the smallest admissible margin, which is what rules out 2 pi aliasing.
const FORCED_BISECTIONS: usize = 2;
const TINY: f64 = 1e-290;

/// Number of zeros (with multiplicity) of an analytic `f` inside `rect`,
/// computed as the winding number of `f` along the boundary. The phase is
/// marched adaptively; a phase step that cannot be resolved, or a total far
/// from an integer, signals a root on (or very near) the boundary.
pub fn winding_number(
    f: &impl Fn(Complex64) -> Complex64,
    rect: &ComplexRect,
) -> Result<i64, NumericsError> {
    let corners = rect.corners();
    let mut total = 0.0;
    for e in 0..4 {
        let z0 = corners[e];
        let z1 = corners[(e + 1) % 4];
        let mut prev_z = z0;
        let mut prev_f = eval_checked(f, z0)?;
        for k in 1..=INITIAL_EDGE_SAMPLES {
            let t = k as f64 / INITIAL_EDGE_SAMPLES as f64;
            let z = z0 + (z1 - z0) * t;
            let fz = eval_checked(f, z)?;
            total += segment_phase(f, prev_z, z, prev_f, fz, EDGE_REFINE_DEPTH, FORCED_BISECTIONS)?;
            prev_z = z;
            prev_f = fz;
        }
    }
    let w = total / std::f64::consts::TAU;
    let rounded = w.round();
    if (w - rounded).abs() > 0.25 {
        return Err(NumericsError::BoundaryRootSuspected(w));
    }
    Ok(rounded as i64)
}

fn eval_checked(
    f: &impl Fn(Complex64) -> Complex64,
    z: Complex64,
) -> Result<Complex64, NumericsError> {
    let v = f(z);
    if !v.re.is_finite() || !v.im.is_finite() {
        return Err(NumericsError::NonFinite { context: "winding contour", t: z.re });
    }
    if v.norm() < TINY {
        return Err(NumericsError::RootOnBoundary { z: (z.re, z.im), value: v.norm() });
    }
    Ok(v)
}

/// Phase change of `f` along the segment `z0 -> z1`, bisecting until each
/// step turns by less than pi/2 (the first `force` levels bisect
/// unconditionally to guard against phase aliasing).
fn segment_phase(
    f: &impl Fn(Complex64) -> Complex64,
    z0: Complex64,
    z1: Complex64,
    f0: Complex64,
    f1: Complex64,
    depth: usize,
    force: usize,
) -> Result<f64, NumericsError> {
    if force == 0 {
        let d = (f1 / f0).arg();
        if d.abs() <= std::f64::consts::FRAC_PI_2 {
            return Ok(d);
        }
        if depth == 0 {
            return Err(NumericsError::RootOnBoundary {
                z: (0.5 * (z0.re + z1.re), 0.5 * (z0.im + z1.im)),
                value: f0.norm().min(f1.norm()),
            });
        }
    }
    let zm = 0.5 * (z0 + z1);
    let fm = eval_checked(f, zm)?;
    Ok(segment_phase(f, z0, zm, f0, fm, depth - 1, force.saturating_sub(1))?
        + segment_phase(f, zm, z1, fm, f1, depth - 1, force.saturating_sub(1))?)
}

/// Locate all zeros of an analytic `f` inside `rect` by recursive
/// subdivision on the winding number; isolated zeros are polished by complex
/// Newton with a finite-difference derivative. `refine` caps the subdivision
/// depth. Each returned root satisfies `|f(root)| < tol * (1 + scale)` where
/// `scale` is the largest boundary magnitude of `f`, except for unresolved
/// clusters, which are reported at the cluster center with their summed
/// multiplicity and actual residual.
pub fn complex_roots_in_rectangle(
    f: impl Fn(Complex64) -> Complex64,
    rect: ComplexRect,
    refine: usize,
    tol: f64,
) -> Result<Vec<LocatedRoot>, NumericsError> {
    let scale = boundary_scale(&f, &rect);
    let w = winding_number(&f, &rect)?;
    if w < 0 {
        return Err(NumericsError::BoundaryRootSuspected(w as f64));
    }
    let mut roots = Vec::new();
    subdivide(&f, rect, w, refine, tol, scale, &mut roots)?;
    merge_duplicates(&mut roots, tol);
    Ok(roots)
}

fn boundary_scale(f: &impl Fn(Complex64) -> Complex64, rect: &ComplexRect) -> f64 {
    let corners = rect.corners();
    let mut scale: f64 = 0.0;
    for e in 0..4 {
        let z0 = corners[e];
        let z1 = corners[(e + 1) % 4];
        for k in 0..INITIAL_EDGE_SAMPLES {
            let t = k as f64 / INITIAL_EDGE_SAMPLES as f64;
            let v = f(z0 + (z1 - z0) * t).norm();
            if v.is_finite() {
                scale = scale.max(v);
            }
        }
    }
    scale
}

fn subdivide(
    f: &impl Fn(Complex64) -> Complex64,
    rect: ComplexRect,
    w: i64,
    depth: usize,
    tol: f64,
    scale: f64,
    out: &mut Vec<LocatedRoot>,
) -> Result<(), NumericsError> {
    if w == 0 {
        return Ok(());
    }
    let center = rect.center();
    let diam = rect.diameter();
    let accept_thr = tol * (1.0 + scale);
    // isolated root, or a cluster squeezed into a small box: try Newton
    if w == 1 || diam <= 1e-2 * (1.0 + center.norm()) {
        if let Some((z, residual)) = newton_polish(f, center, tol, scale) {
            if rect.contains(z, 1e-9 * (1.0 + z.norm()) + 0.05 * diam) {
                out.push(LocatedRoot { z, multiplicity: w as usize, residual });
                return Ok(());
            }
        }
    }
    if depth == 0 || diam <= 100.0 * tol * (1.0 + center.norm()) {
        // unresolved cluster: report the center honestly
        out.push(LocatedRoot {
            z: center,
            multiplicity: w as usize,
            residual: f(center).norm().max(accept_thr),
        });
        return Ok(());
    }
    // split, nudging the cut if it lands on a root
    for &frac in &[0.5, 0.53, 0.47, 0.51, 0.49] {
        let (r1, r2) = rect.split(frac);
        let w1 = match winding_number(f, &r1) {
            Ok(v) => v,
            Err(_) => continue,
        };
        let w2 = match winding_number(f, &r2) {
            Ok(v) => v,
            Err(_) => continue,
        };
        if w1 + w2 != w || w1 < 0 || w2 < 0 {
            continue;
        }
        subdivide(f, r1, w1, depth - 1, tol, scale, out)?;
        subdivide(f, r2, w2, depth - 1, tol, scale, out)?;
        return Ok(());
    }
    Err(NumericsError::BoundaryRootSuspected(w as f64))
}

fn newton_polish(
    f: &impl Fn(Complex64) -> Complex64,
    z0: Complex64,
    tol: f64,
    scale: f64,
) -> Option<(Complex64, f64)> {
    let mut z = z0;
    for _ in 0..80 {
        let fz = f(z);
        if !fz.re.is_finite() || !fz.im.is_finite() {
            return None;
        }
        let h = 1e-6 * (1.0 + z.norm());
        let fp = (f(z + Complex64::new(h, 0.0)) - f(z - Complex64::new(h, 0.0)))
            / Complex64::new(2.0 * h, 0.0);
        if fp.norm() < TINY {
            break;
        }
        let step = fz / fp;
        z -= step;
        if step.norm() <= 1e-14 * (1.0 + z.norm()) {
            break;
        }
    }
    let residual = f(z).norm();
    if residual < tol * (1.0 + scale) {
        Some((z, residual))
    } else {
        None
    }
}

fn merge_duplicates(roots: &mut Vec<LocatedRoot>, tol: f64) {
    let mut merged: Vec<LocatedRoot> = Vec::new();
    for r in roots.drain(..) {
        if let Some(m) = merged
            .iter_mut()
            .find(|m| (m.z - r.z).norm() <= 100.0 * tol * (1.0 + r.z.norm()))
        {
            m.multiplicity += r.multiplicity;
            if r.residual < m.residual {
                m.z = r.z;
                m.residual = r.residual;
            }
        } else {
            merged.push(r);
        }
    }
    *roots = merged;
}
