use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::expr::ExpressionField;

/// Piecewise polynomial in global time: on `[breaks[p], breaks[p+1])` the
/// value is `Σ_k coeffs[p][k] t^k`.  The last piece extends to +∞.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeFactor {
    breaks: Vec<f64>,
    coeffs: Vec<Vec<f64>>,
}

impl TimeFactor {
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        Self {
            breaks: vec![0.0],
            coeffs: vec![coeffs],
        }
    }

    /// Pieces as `(start, coefficients)`; starts must increase and the first is 0.
    pub fn piecewise(pieces: Vec<(f64, Vec<f64>)>) -> Result<Self, String> {
        if pieces.is_empty() {
            return Err("time factor needs at least one piece".into());
        }
        if pieces[0].0 != 0.0 {
            return Err("first piece must start at t = 0".into());
        }
        if pieces.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err("piece start times must increase".into());
        }
        if pieces.iter().any(|(s, c)| c.is_empty() || !s.is_finite() || c.iter().any(|v| !v.is_finite())) {
            return Err("pieces need finite coefficients".into());
        }
        let (breaks, coeffs) = pieces.into_iter().unzip();
        Ok(Self { breaks, coeffs })
    }

    pub fn pieces(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.breaks.iter().copied().zip(self.coeffs.iter().map(|c| c.as_slice()))
    }

    pub fn eval(&self, t: f64) -> f64 {
        let p = self.breaks.partition_point(|&b| b <= t).max(1) - 1;
        self.coeffs[p].iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0].iter().skip(1).all(|&c| c == 0.0)
    }

    /// Sampled bound on max |g| over [0, T], including all breakpoints.
    pub fn sup_abs(&self, t_final: f64) -> f64 {
        let mut ts: Vec<f64> = (0..=2000).map(|k| t_final * k as f64 / 2000.0).collect();
        for &b in &self.breaks {
            if b <= t_final {
                ts.push(b);
                ts.push((b - 1e-12).max(0.0));
            }
        }
        ts.into_iter().map(|t| self.eval(t).abs()).fold(0.0, f64::max)
    }
}

/// `"c0 c1 ..."` for one polynomial, or `"0: c0 c1; 0.5: d0 d1"` for pieces.
impl std::str::FromStr for TimeFactor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let nums = |text: &str| -> Result<Vec<f64>, String> {
            text.split_whitespace()
                .map(|w| w.parse::<f64>().map_err(|_| format!("`{w}` is not a number")))
                .collect()
        };
        if !s.contains(':') {
            let cs = nums(s)?;
            return TimeFactor::piecewise(vec![(0.0, cs)]);
        }
        let pieces = s
            .split(';')
            .map(|piece| {
                let (start, cs) = piece.split_once(':').ok_or_else(|| format!("piece `{}` lacks `start:`", piece.trim()))?;
                let start = start.trim().parse::<f64>().map_err(|_| format!("`{}` is not a start time", start.trim()))?;
                Ok((start, nums(cs)?))
            })
            .collect::<Result<Vec<_>, String>>()?;
        TimeFactor::piecewise(pieces)
    }
}

impl fmt::Display for TimeFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (p, (start, cs)) in self.pieces().enumerate() {
            if p > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{start}:")?;
            for c in cs {
                write!(f, " {c}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Scalar,
    Vector,
}

pub type FieldFn = Arc<dyn Fn(f64, f64, f64) -> [f64; 2] + Send + Sync>;

/// Spatial part of a [`SampledField`].
#[derive(Clone)]
pub enum Spatial {
    Zero(Shape),
    Expression(ExpressionField),
    /// Closed-form function of (x, y, t); `time_dependent` tells the solvers
    /// whether to re-project every step.
    Closure {
        shape: Shape,
        time_dependent: bool,
        f: FieldFn,
    },
    /// Finite sine expansion in the velocity basis with truncation `n_u`.
    VelocityModes { n_u: usize, values: Vec<f64> },
    /// Finite cosine expansion in the pressure basis with truncation `n_p`.
    PressureModes { n_p: usize, values: Vec<f64> },
}

impl fmt::Debug for Spatial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Spatial::Zero(s) => write!(f, "Zero({s:?})"),
            Spatial::Expression(e) => write!(f, "Expression({:?})", e.source),
            Spatial::Closure { shape, .. } => write!(f, "Closure({shape:?})"),
            Spatial::VelocityModes { n_u, .. } => write!(f, "VelocityModes(N_u={n_u})"),
            Spatial::PressureModes { n_p, .. } => write!(f, "PressureModes(N_p={n_p})"),
        }
    }
}

/// A function on the unit square, scalar or 2-vector, with an optional
/// separable time factor.
#[derive(Debug, Clone)]
pub struct SampledField {
    pub spatial: Spatial,
    pub time: Option<TimeFactor>,
}

pub(crate) fn velocity_norm_const(i: usize, j: usize) -> f64 {
    2.0 / (PI * ((i * i + j * j) as f64).sqrt())
}

pub(crate) fn pressure_norm_const(k: usize, l: usize) -> f64 {
    match (k == 0, l == 0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 2f64.sqrt(),
        (false, false) => 2.0,
    }
}

impl SampledField {
    pub fn zero_scalar() -> Self {
        Self {
            spatial: Spatial::Zero(Shape::Scalar),
            time: None,
        }
    }

    pub fn zero_vector() -> Self {
        Self {
            spatial: Spatial::Zero(Shape::Vector),
            time: None,
        }
    }

    pub fn expression(e: ExpressionField) -> Self {
        Self {
            spatial: Spatial::Expression(e),
            time: None,
        }
    }

    pub fn scalar_fn(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            spatial: Spatial::Closure {
                shape: Shape::Scalar,
                time_dependent: false,
                f: Arc::new(move |x, y, _| [f(x, y), 0.0]),
            },
            time: None,
        }
    }

    pub fn vector_fn(f: impl Fn(f64, f64) -> [f64; 2] + Send + Sync + 'static) -> Self {
        Self {
            spatial: Spatial::Closure {
                shape: Shape::Vector,
                time_dependent: false,
                f: Arc::new(move |x, y, _| f(x, y)),
            },
            time: None,
        }
    }

    pub fn velocity_modes(n_u: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), 2 * n_u * n_u, "velocity mode vector length");
        Self {
            spatial: Spatial::VelocityModes { n_u, values },
            time: None,
        }
    }

    pub fn pressure_modes(n_p: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), (n_p + 1) * (n_p + 1), "pressure mode vector length");
        Self {
            spatial: Spatial::PressureModes { n_p, values },
            time: None,
        }
    }

    pub fn with_time(mut self, g: TimeFactor) -> Self {
        self.time = Some(g);
        self
    }

    pub fn shape(&self) -> Shape {
        match &self.spatial {
            Spatial::Zero(s) => *s,
            Spatial::Expression(e) => {
                if e.is_vector() {
                    Shape::Vector
                } else {
                    Shape::Scalar
                }
            }
            Spatial::Closure { shape, .. } => *shape,
            Spatial::VelocityModes { .. } => Shape::Vector,
            Spatial::PressureModes { .. } => Shape::Scalar,
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.spatial {
            Spatial::Zero(_) => true,
            Spatial::Expression(e) => e.is_zero(),
            Spatial::VelocityModes { values, .. } | Spatial::PressureModes { values, .. } => {
                values.iter().all(|&v| v == 0.0)
            }
            Spatial::Closure { .. } => false,
        }
    }

    /// Spatial part depends on t (beyond the separable factor).
    pub fn spatial_depends_on_time(&self) -> bool {
        match &self.spatial {
            Spatial::Expression(e) => e.depends_on_time(),
            Spatial::Closure { time_dependent, .. } => *time_dependent,
            _ => false,
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        !self.is_zero()
            && (self.spatial_depends_on_time() || self.time.as_ref().is_some_and(|g| !g.is_constant()))
    }

    pub fn time_factor(&self, t: f64) -> f64 {
        self.time.as_ref().map_or(1.0, |g| g.eval(t))
    }

    /// Spatial part only (time factor not applied); scalars return `[v, 0]`.
    pub fn eval_spatial(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        match &self.spatial {
            Spatial::Zero(_) => [0.0, 0.0],
            Spatial::Expression(e) => e.eval(x, y, t),
            Spatial::Closure { f, .. } => f(x, y, t),
            Spatial::VelocityModes { n_u, values } => {
                let n = *n_u;
                let mut out = [0.0; 2];
                for (comp, o) in out.iter_mut().enumerate() {
                    for i in 1..=n {
                        let si = (i as f64 * PI * x).sin();
                        for j in 1..=n {
                            let v = values[comp * n * n + (i - 1) * n + (j - 1)];
                            if v != 0.0 {
                                *o += v * velocity_norm_const(i, j) * si * (j as f64 * PI * y).sin();
                            }
                        }
                    }
                }
                out
            }
            Spatial::PressureModes { n_p, values } => {
                let w = n_p + 1;
                let mut s = 0.0;
                for k in 0..w {
                    let ck = (k as f64 * PI * x).cos();
                    for l in 0..w {
                        let v = values[k * w + l];
                        if v != 0.0 {
                            s += v * pressure_norm_const(k, l) * ck * (l as f64 * PI * y).cos();
                        }
                    }
                }
                [s, 0.0]
            }
        }
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let g = self.time_factor(t);
        let [a, b] = self.eval_spatial(x, y, t);
        [g * a, g * b]
    }

    /// Sampled bound on sup |f(x,y,t)| (Euclidean for vectors) over the unit
    /// square and [0, T].
    pub fn sup_norm(&self, t_final: f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let n = 64;
        let times: Vec<f64> = if self.spatial_depends_on_time() {
            (0..=32).map(|k| t_final * k as f64 / 32.0).collect()
        } else {
            vec![0.0]
        };
        let gmax = match &self.time {
            Some(g) if !self.spatial_depends_on_time() => g.sup_abs(t_final),
            _ => 1.0,
        };
        let mut best = 0.0f64;
        for &t in &times {
            for a in 0..=n {
                for b in 0..=n {
                    let (x, y) = (a as f64 / n as f64, b as f64 / n as f64);
                    let v = if self.spatial_depends_on_time() {
                        self.eval(x, y, t)
                    } else {
                        self.eval_spatial(x, y, t)
                    };
                    best = best.max(v[0].hypot(v[1]));
                }
            }
        }
        best * gmax
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;

    #[test]
    fn piecewise_time_factor() {
        let g = TimeFactor::piecewise(vec![(0.0, vec![1.0, 1.0]), (0.5, vec![0.0, 0.0, 4.0])]).unwrap();
        assert_eq!(g.eval(0.25), 1.25);
        assert_eq!(g.eval(0.5), 1.0);
        assert_eq!(g.eval(1.0), 4.0);
        assert!((g.sup_abs(1.0) - 4.0).abs() < 1e-12);
        assert!(TimeFactor::piecewise(vec![(0.1, vec![1.0])]).is_err());
        assert!(TimeFactor::polynomial(vec![3.0]).is_constant());
        assert_eq!(g.to_string().parse::<TimeFactor>().unwrap(), g);
        assert_eq!("1 2".parse::<TimeFactor>().unwrap(), TimeFactor::polynomial(vec![1.0, 2.0]));
        assert!("0: 1; x: 2".parse::<TimeFactor>().is_err());
    }

    #[test]
    fn time_dependence_classification() {
        let f = SampledField::expression(parse_expression("(x*t, 0)").unwrap());
        assert!(f.is_time_dependent());
        let g = SampledField::expression(parse_expression("(x, 0)").unwrap())
            .with_time(TimeFactor::polynomial(vec![1.0, 2.0]));
        assert!(g.is_time_dependent());
        assert!(!g.spatial_depends_on_time());
        assert_eq!(g.eval(0.5, 0.0, 0.5), [1.0, 0.0]);
        assert!(!SampledField::zero_vector().with_time(TimeFactor::polynomial(vec![0.0, 1.0])).is_time_dependent());
    }

    #[test]
    fn sup_norm_of_bump() {
        let f = SampledField::expression(parse_expression("(sin(pi*x)*sin(pi*y), 0)").unwrap());
        assert!((f.sup_norm(1.0) - 1.0).abs() < 1e-12);
    }
}
