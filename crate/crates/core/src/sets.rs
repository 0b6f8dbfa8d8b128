//! Constraint sets with Euclidean projections.
//!
//! Every family exposes [`ConstraintSet::project`] (in place) and the derived
//! [`ConstraintSet::distance`] / [`ConstraintSet::squared_distance`]. Sets can
//! be stacked with [`ConstraintSet::cartesian_product`]; segment boundaries are
//! given as exclusive end indices into the ambient vector.
//!
//! Only [`ConstraintSet::FiniteSet`] is nonconvex. It is allowed as the set `U`
//! of the inner problem, where projections need not be unique; ties are broken
//! towards the lowest index.

use crate::error::{check_len, Error, Result};

/// Bound used by [`default_y_set`] for the multiplier box.
pub const DEFAULT_Y_BOUND: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintSet {
    /// `{x : ‖x − center‖₂ ≤ radius}`; no center means the origin.
    Ball2 {
        center: Option<Vec<f64>>,
        radius: f64,
    },
    /// `{x : ‖x − center‖∞ ≤ radius}`; no center means the origin.
    BallInf {
        center: Option<Vec<f64>>,
        radius: f64,
    },
    /// `{x : lower ≤ x ≤ upper}`, entries may be infinite.
    Rectangle { lower: Vec<f64>, upper: Vec<f64> },
    /// The singleton `{0}` in any dimension.
    Zero,
    FiniteSet { points: Vec<Vec<f64>> },
    /// `{(z, t) : ‖z‖ ≤ alpha·t}`, with `t` the last coordinate.
    SecondOrderCone { alpha: f64 },
    /// Segments `(end, set)`; segment `i` covers `[end_{i-1}, end_i)`.
    CartesianProduct {
        segments: Vec<(usize, ConstraintSet)>,
    },
    WholeSpace,
}

impl ConstraintSet {
    pub fn ball2(center: Option<Vec<f64>>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidSet(format!("ball radius must be positive, got {radius}")));
        }
        if let Some(c) = &center {
            finite_vector("ball center", c)?;
        }
        Ok(ConstraintSet::Ball2 { center, radius })
    }

    pub fn ball_inf(center: Option<Vec<f64>>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidSet(format!("ball radius must be positive, got {radius}")));
        }
        if let Some(c) = &center {
            finite_vector("ball center", c)?;
        }
        Ok(ConstraintSet::BallInf { center, radius })
    }

    /// A box. A box with no finite bound at all is returned as [`ConstraintSet::WholeSpace`].
    pub fn rectangle(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_len("rectangle bounds", lower.len(), upper.len())?;
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || *lo == f64::INFINITY || *hi == f64::NEG_INFINITY || lo > hi {
                return Err(Error::InvalidSet(format!(
                    "rectangle coordinate {i}: [{lo}, {hi}] is empty or malformed"
                )));
            }
        }
        if lower.iter().chain(&upper).all(|b| b.is_infinite()) {
            return Ok(ConstraintSet::WholeSpace);
        }
        Ok(ConstraintSet::Rectangle { lower, upper })
    }

    pub fn finite_set(points: Vec<Vec<f64>>) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidSet("finite set needs at least one point".into()))?;
        let dim = first.len();
        for (i, p) in points.iter().enumerate() {
            check_len("finite set point", dim, p.len())?;
            finite_vector("finite set point", p)?;
            if points[..i].iter().any(|q| q == p) {
                return Err(Error::InvalidSet(format!("finite set point {i} is a duplicate")));
            }
        }
        Ok(ConstraintSet::FiniteSet { points })
    }

    pub fn second_order_cone(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidSet(format!("cone slope must be positive, got {alpha}")));
        }
        Ok(ConstraintSet::SecondOrderCone { alpha })
    }

    /// Segments are `(end_index, set)` pairs with strictly increasing end indices.
    pub fn cartesian_product(segments: Vec<(usize, ConstraintSet)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidSet("cartesian product needs at least one segment".into()));
        }
        let mut start = 0;
        for (end, set) in &segments {
            if *end <= start {
                return Err(Error::InvalidSet(format!(
                    "cartesian product end indices must be strictly increasing (got {end} after {start})"
                )));
            }
            if let Some(d) = set.fixed_dimension() {
                check_len("cartesian product segment", end - start, d)?;
            }
            start = *end;
        }
        Ok(ConstraintSet::CartesianProduct { segments })
    }

    /// Dimension implied by the set's own data, if any.
    pub fn fixed_dimension(&self) -> Option<usize> {
        match self {
            ConstraintSet::Ball2 { center, .. } | ConstraintSet::BallInf { center, .. } => {
                center.as_ref().map(Vec::len)
            }
            ConstraintSet::Rectangle { lower, .. } => Some(lower.len()),
            ConstraintSet::FiniteSet { points } => points.first().map(Vec::len),
            ConstraintSet::CartesianProduct { segments } => segments.last().map(|(end, _)| *end),
            ConstraintSet::Zero | ConstraintSet::SecondOrderCone { .. } | ConstraintSet::WholeSpace => {
                None
            }
        }
    }

    /// Checks that the set can act on vectors of length `dim`.
    pub fn check_dimension(&self, dim: usize) -> Result<()> {
        match self {
            ConstraintSet::SecondOrderCone { .. } if dim < 1 => Err(Error::InvalidSet(
                "second-order cone needs at least one coordinate".into(),
            )),
            ConstraintSet::CartesianProduct { segments } => {
                check_len("cartesian product", dim, segments.last().map_or(0, |s| s.0))?;
                let mut start = 0;
                for (end, set) in segments {
                    set.check_dimension(end - start)?;
                    start = *end;
                }
                Ok(())
            }
            _ => match self.fixed_dimension() {
                Some(d) => check_len("set dimension", d, dim),
                None => Ok(()),
            },
        }
    }

    /// Whether the set is convex (everything except finite sets with more than one point).
    pub fn is_convex(&self) -> bool {
        match self {
            ConstraintSet::FiniteSet { points } => points.len() == 1,
            ConstraintSet::CartesianProduct { segments } => segments.iter().all(|(_, s)| s.is_convex()),
            _ => true,
        }
    }

    /// Replaces `x` by its projection onto the set.
    pub fn project(&self, x: &mut [f64]) -> Result<()> {
        self.check_dimension(x.len())?;
        self.project_unchecked(x);
        Ok(())
    }

    /// Projection returning a new vector.
    pub fn projection(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = x.to_vec();
        self.project(&mut out)?;
        Ok(out)
    }

    pub(crate) fn project_unchecked(&self, x: &mut [f64]) {
        match self {
            ConstraintSet::Ball2 { center, radius } => project_ball2(center.as_deref(), *radius, x),
            ConstraintSet::BallInf { center, radius } => match center {
                Some(c) => x
                    .iter_mut()
                    .zip(c)
                    .for_each(|(xi, ci)| *xi = clamp(*xi, ci - radius, ci + radius)),
                None => x.iter_mut().for_each(|xi| *xi = clamp(*xi, -radius, *radius)),
            },
            ConstraintSet::Rectangle { lower, upper } => x
                .iter_mut()
                .zip(lower.iter().zip(upper))
                .for_each(|(xi, (lo, hi))| *xi = clamp(*xi, *lo, *hi)),
            ConstraintSet::Zero => x.iter_mut().for_each(|xi| *xi = 0.0),
            ConstraintSet::FiniteSet { points } => {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (i, p) in points.iter().enumerate() {
                    let d: f64 = p.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                    if d < best_d {
                        best_d = d;
                        best = i;
                    }
                }
                x.copy_from_slice(&points[best]);
            }
            ConstraintSet::SecondOrderCone { alpha } => project_soc(*alpha, x),
            ConstraintSet::CartesianProduct { segments } => {
                let mut start = 0;
                for (end, set) in segments {
                    set.project_unchecked(&mut x[start..*end]);
                    start = *end;
                }
            }
            ConstraintSet::WholeSpace => {}
        }
    }

    /// Squared Euclidean distance from `x` to the set.
    pub fn squared_distance(&self, x: &[f64]) -> Result<f64> {
        self.check_dimension(x.len())?;
        Ok(self.squared_distance_unchecked(x))
    }

    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        self.squared_distance(x).map(f64::sqrt)
    }

    pub(crate) fn squared_distance_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            ConstraintSet::Zero => x.iter().map(|v| v * v).sum(),
            ConstraintSet::WholeSpace => 0.0,
            ConstraintSet::Rectangle { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(xi, (lo, hi))| {
                    let d = xi - clamp(*xi, *lo, *hi);
                    d * d
                })
                .sum(),
            ConstraintSet::CartesianProduct { segments } => {
                let mut start = 0;
                let mut acc = 0.0;
                for (end, set) in segments {
                    acc += set.squared_distance_unchecked(&x[start..*end]);
                    start = *end;
                }
                acc
            }
            _ => {
                let mut p = x.to_vec();
                self.project_unchecked(&mut p);
                p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum()
            }
        }
    }
}

/// Compact multiplier box `Y` matching the recession structure of `C`.
///
/// Per coordinate of a rectangle: both bounds finite gives `[-M, M]`, only the
/// lower bound finite gives `[-M, 0]`, only the upper bound finite gives
/// `[0, M]`, and a free coordinate gives `{0}`. `{0}` and balls give `[-M, M]`.
pub fn default_y_set(set_c: &ConstraintSet, n1: usize) -> Result<ConstraintSet> {
    set_c.check_dimension(n1)?;
    let mut lower = vec![0.0; n1];
    let mut upper = vec![0.0; n1];
    fill_y_bounds(set_c, &mut lower, &mut upper)?;
    Ok(ConstraintSet::Rectangle { lower, upper })
}

fn fill_y_bounds(set_c: &ConstraintSet, lower: &mut [f64], upper: &mut [f64]) -> Result<()> {
    let m = DEFAULT_Y_BOUND;
    match set_c {
        ConstraintSet::Zero | ConstraintSet::Ball2 { .. } | ConstraintSet::BallInf { .. } => {
            lower.iter_mut().for_each(|l| *l = -m);
            upper.iter_mut().for_each(|u| *u = m);
        }
        ConstraintSet::Rectangle { lower: cl, upper: cu } => {
            for i in 0..lower.len() {
                let (lo, hi) = match (cl[i].is_finite(), cu[i].is_finite()) {
                    (true, true) => (-m, m),
                    (true, false) => (-m, 0.0),
                    (false, true) => (0.0, m),
                    (false, false) => (0.0, 0.0),
                };
                lower[i] = lo;
                upper[i] = hi;
            }
        }
        ConstraintSet::CartesianProduct { segments } => {
            let mut start = 0;
            for (end, set) in segments {
                fill_y_bounds(set, &mut lower[start..*end], &mut upper[start..*end])?;
                start = *end;
            }
        }
        _ => return Err(Error::UnsupportedSetForDefaultY),
    }
    Ok(())
}

#[inline]
fn clamp(x: f64, lo: f64, hi: f64) -> f64 {
    x.max(lo).min(hi)
}

fn finite_vector(what: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidSet(format!("{what} has non-finite entries")))
    }
}

fn project_ball2(center: Option<&[f64]>, radius: f64, x: &mut [f64]) {
    match center {
        None => {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > radius {
                let s = radius / norm;
                x.iter_mut().for_each(|v| *v *= s);
            }
        }
        Some(c) => {
            let norm = x
                .iter()
                .zip(c)
                .map(|(v, ci)| (v - ci) * (v - ci))
                .sum::<f64>()
                .sqrt();
            if norm > radius {
                let s = radius / norm;
                x.iter_mut().zip(c).for_each(|(v, ci)| *v = ci + s * (*v - ci));
            }
        }
    }
}

fn project_soc(alpha: f64, x: &mut [f64]) {
    let (z, t) = x.split_at_mut(x.len() - 1);
    let t = &mut t[0];
    let norm_z = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_z <= alpha * *t {
        return;
    }
    if alpha * norm_z <= -*t {
        z.iter_mut().for_each(|v| *v = 0.0);
        *t = 0.0;
        return;
    }
    let beta = (alpha * norm_z + *t) / (alpha * alpha + 1.0);
    let s = alpha * beta / norm_z;
    z.iter_mut().for_each(|v| *v *= s);
    *t = beta;
}
