//! Reference grid with a probability measure, sample point sets, and the
//! norms measured on them.
//!
//! The continuous domain is the torus `[0,1)^d` represented by a uniform
//! tensor grid. Every "continuous" `L_p(μ)` norm is the quadrature sum over
//! that grid; sample norms use the normalized counting measure `μ_m` or an
//! explicit positive weight vector.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Exponent `p ∈ [1, ∞]` of an `L_p` norm. `p = ∞` is its own case and is
/// never approximated by a large finite exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_infinite() && p > 0.0 {
            Ok(Exponent::Infinite)
        } else if p.is_finite() && p >= 1.0 {
            Ok(Exponent::Finite(p))
        } else {
            Err(Error::Domain(format!("exponent p = {p} must lie in [1, ∞]")))
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Exponent::Finite(p) => Some(p),
            Exponent::Infinite => None,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinite => f64::INFINITY,
        }
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => s.serialize_f64(*p),
            Exponent::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        let p = match Repr::deserialize(d)? {
            Repr::Num(p) => p,
            Repr::Text(t) => match t.as_str() {
                "inf" | "infinity" | "∞" => f64::INFINITY,
                other => other.parse().map_err(serde::de::Error::custom)?,
            },
        };
        Exponent::new(p).map_err(serde::de::Error::custom)
    }
}

/// `(Σ w_i |v_i|^p)^{1/p}`, or `max |v_i|` over positive-weight entries for `p = ∞`.
pub(crate) fn weighted_norm(values: &[C64], weights: &[f64], p: Exponent) -> f64 {
    debug_assert_eq!(values.len(), weights.len());
    match p {
        Exponent::Infinite => values
            .iter()
            .zip(weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(v, _)| v.norm())
            .fold(0.0, f64::max),
        Exponent::Finite(p) => {
            let sum = powered_sum(values, weights, p);
            if p == 2.0 {
                sum.sqrt()
            } else {
                sum.powf(1.0 / p)
            }
        }
    }
}

/// `Σ w_i |v_i|^p` for finite `p`.
pub(crate) fn powered_sum(values: &[C64], weights: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        values.iter().zip(weights).map(|(v, w)| w * v.norm_sqr()).sum()
    } else {
        values.iter().zip(weights).map(|(v, w)| w * v.norm().powf(p)).sum()
    }
}

/// Uniform weights `1/n`.
pub(crate) fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Finite point set standing in for `Ω`, carrying quadrature weights that
/// define the probability measure `μ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct GridDomain {
    grid_size: usize,
    dim: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    uniform: bool,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    grid_size: usize,
    dim: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TryFrom<GridRepr> for GridDomain {
    type Error = Error;

    fn try_from(r: GridRepr) -> Result<Self> {
        let mut dom = GridDomain::from_parts(r.dim, r.points, r.weights)?;
        dom.grid_size = r.grid_size;
        dom.uniform = dom.matches_uniform_layout();
        Ok(dom)
    }
}

impl From<GridDomain> for GridRepr {
    fn from(d: GridDomain) -> Self {
        GridRepr {
            grid_size: d.grid_size,
            dim: d.dim,
            points: d.points,
            weights: d.weights,
        }
    }
}

impl GridDomain {
    pub const DEFAULT_GRID_SIZE: usize = 4096;

    /// Uniform tensor grid with `grid_size` points per axis on `[0,1)^dim`
    /// and equal weights.
    pub fn uniform_torus(grid_size: usize, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        let total = grid_size
            .checked_pow(dim as u32)
            .ok_or_else(|| Error::Domain("grid too large".into()))?;
        if total < 2 {
            return Err(Error::Domain("a grid needs at least 2 points".into()));
        }
        let mut points = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rest = flat;
            let mut x = vec![0.0; dim];
            for coord in x.iter_mut().rev() {
                *coord = (rest % grid_size) as f64 / grid_size as f64;
                rest /= grid_size;
            }
            points.push(x);
        }
        Ok(GridDomain {
            grid_size,
            dim,
            points,
            weights: uniform_weights(total),
            uniform: true,
        })
    }

    pub fn from_parts(dim: usize, points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Domain("a grid needs at least 2 points".into()));
        }
        if weights.len() != points.len() {
            return Err(Error::Dimension {
                expected: points.len(),
                found: weights.len(),
            });
        }
        if let Some(bad) = points.iter().find(|x| x.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                found: bad.len(),
            });
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::Domain("quadrature weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("weights sum to {total}, not 1")));
        }
        let mut sorted: Vec<&Vec<f64>> = points.iter().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain("grid points must be distinct".into()));
        }
        let grid_size = points.len();
        Ok(GridDomain {
            grid_size,
            dim,
            points,
            weights,
            uniform: false,
        })
    }

    fn matches_uniform_layout(&self) -> bool {
        let Ok(reference) = GridDomain::uniform_torus(self.grid_size, self.dim) else {
            return false;
        };
        reference.points == self.points && reference.weights == self.weights
    }

    /// Points per axis.
    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Index of the grid point equal to `x` (up to rounding), if any.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.dim {
            return None;
        }
        if self.uniform {
            let g = self.grid_size as f64;
            let mut flat = 0usize;
            for &c in x {
                let scaled = c * g;
                let k = scaled.round();
                if (scaled - k).abs() > 1e-9 || k < 0.0 || k >= g {
                    return None;
                }
                flat = flat * self.grid_size + k as usize;
            }
            Some(flat)
        } else {
            self.points
                .iter()
                .position(|p| p.iter().zip(x).all(|(a, b)| (a - b).abs() <= 1e-12))
        }
    }

    fn check_len(&self, f: &[C64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                found: f.len(),
            });
        }
        Ok(())
    }
}

/// Sample points `ξ = (ξ^1, …, ξ^m)`, optionally tied to grid indices, with
/// optional positive weights `w`. Duplicates are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SampleRepr", into = "SampleRepr")]
pub struct SampleSet {
    grid_size: Option<usize>,
    dim: usize,
    coords: Vec<Vec<f64>>,
    indices: Option<Vec<usize>>,
    weights: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct SampleRepr {
    grid_size: Option<usize>,
    dim: usize,
    points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    indices: Option<Vec<usize>>,
    #[serde(default)]
    weights: Option<Vec<f64>>,
}

impl TryFrom<SampleRepr> for SampleSet {
    type Error = Error;

    fn try_from(r: SampleRepr) -> Result<Self> {
        let mut set = SampleSet::raw(r.dim, r.points)?;
        set.grid_size = r.grid_size;
        if let Some(idx) = r.indices {
            if idx.len() != set.coords.len() {
                return Err(Error::Dimension {
                    expected: set.coords.len(),
                    found: idx.len(),
                });
            }
            set.indices = Some(idx);
        }
        match r.weights {
            Some(w) => set.with_weights(w),
            None => Ok(set),
        }
    }
}

impl From<SampleSet> for SampleRepr {
    fn from(s: SampleSet) -> Self {
        SampleRepr {
            grid_size: s.grid_size,
            dim: s.dim,
            points: s.coords,
            indices: s.indices,
            weights: s.weights,
        }
    }
}

impl SampleSet {
    /// Samples at the given grid indices.
    pub fn on_grid(dom: &GridDomain, indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Empty("sample set"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= dom.len()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: dom.len(),
            });
        }
        let coords = indices.iter().map(|&i| dom.point(i).to_vec()).collect();
        Ok(SampleSet {
            grid_size: Some(dom.grid_size()),
            dim: dom.dim(),
            coords,
            indices: Some(indices),
            weights: None,
        })
    }

    /// Samples at arbitrary coordinates in `[0,1)^dim`.
    pub fn raw(dim: usize, coords: Vec<Vec<f64>>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Empty("sample set"));
        }
        for x in &coords {
            if x.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: x.len(),
                });
            }
            if let Some(&c) = x.iter().find(|c| !(0.0..1.0).contains(*c)) {
                return Err(Error::PointOutsideDomain(c));
            }
        }
        Ok(SampleSet {
            grid_size: None,
            dim,
            coords,
            indices: None,
            weights: None,
        })
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::Domain("sample weights must be positive".into()));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    /// Number of points `m`.
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[Vec<f64>] {
        &self.coords
    }

    pub fn grid_indices(&self) -> Option<&[usize]> {
        self.indices.as_deref()
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// Explicit weights, or `1/m` each when none were given.
    pub fn effective_weights(&self) -> Vec<f64> {
        self.weights.clone().unwrap_or_else(|| uniform_weights(self.len()))
    }

    /// Concatenation with the points of `other` (duplicates kept). Weights are dropped.
    pub fn union(&self, other: &SampleSet) -> Result<SampleSet> {
        if self.dim != other.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut coords = self.coords.clone();
        coords.extend(other.coords.iter().cloned());
        let indices = match (&self.indices, &other.indices) {
            (Some(a), Some(b)) if self.grid_size == other.grid_size => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        Ok(SampleSet {
            grid_size: if indices.is_some() { self.grid_size } else { None },
            dim: self.dim,
            coords,
            indices,
            weights: None,
        })
    }

    /// Grid index of every point, resolving raw coordinates against `dom`.
    pub fn resolve(&self, dom: &GridDomain) -> Result<Vec<usize>> {
        if let (Some(idx), Some(g)) = (&self.indices, self.grid_size) {
            if g == dom.grid_size() && self.dim == dom.dim() {
                return Ok(idx.clone());
            }
        }
        self.coords
            .iter()
            .map(|x| dom.locate(x).ok_or(Error::PointOutsideDomain(x[0])))
            .collect()
    }
}

/// `‖f‖_{L_p(μ)}` for grid values of `f`.
pub fn lp_norm_continuous(f: &[C64], dom: &GridDomain, p: Exponent) -> Result<f64> {
    dom.check_len(f)?;
    Ok(weighted_norm(f, dom.weights(), p))
}

/// Normalized counting norm `(m⁻¹ Σ |s_ν|^p)^{1/p}`; `max |s_ν|` for `p = ∞`.
pub fn lp_norm_sample(s: &[C64], p: Exponent) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::Dimension { expected: 1, found: 0 });
    }
    Ok(weighted_norm(s, &uniform_weights(s.len()), p))
}

/// `(Σ w_ν |s_ν|^p)^{1/p}` for a positive weight vector.
pub fn weighted_sample_norm(s: &[C64], w: &[f64], p: f64) -> Result<f64> {
    if s.len() != w.len() {
        return Err(Error::Dimension {
            expected: s.len(),
            found: w.len(),
        });
    }
    if w.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Domain("weights must be positive".into()));
    }
    let p = match Exponent::new(p)? {
        Exponent::Finite(p) => p,
        Exponent::Infinite => return Err(Error::Domain("weighted norm needs finite p".into())),
    };
    Ok(weighted_norm(s, w, Exponent::Finite(p)))
}

/// Norm with respect to `μ_ξ = (μ + μ_m)/2`.
pub fn mixed_measure_norm(f_grid: &[C64], f_samples: &[C64], dom: &GridDomain, p: f64) -> Result<f64> {
    dom.check_len(f_grid)?;
    if f_samples.is_empty() {
        return Err(Error::Dimension { expected: 1, found: 0 });
    }
    let p = Exponent::new(p)?
        .finite()
        .ok_or_else(|| Error::Domain("mixed norm needs finite p".into()))?;
    let grid = powered_sum(f_grid, dom.weights(), p);
    let samples = powered_sum(f_samples, &uniform_weights(f_samples.len()), p);
    Ok((0.5 * grid + 0.5 * samples).powf(1.0 / p))
}

/// Point weights realizing `μ_ξ` on the concatenation `[grid; samples]`.
pub fn mixed_measure_weights(dom: &GridDomain, m: usize) -> Vec<f64> {
    let mut w: Vec<f64> = dom.weights().iter().map(|x| 0.5 * x).collect();
    w.extend(std::iter::repeat_n(0.5 / m as f64, m));
    w
}

/// Point weights realizing `μ_{w,ξ} = μ/2 + Σ w_ν δ_{ξ^ν} / (2‖w‖_1)` on `[grid; samples]`.
pub fn weighted_mixed_measure_weights(dom: &GridDomain, sample_weights: &[f64]) -> Vec<f64> {
    let total: f64 = sample_weights.iter().sum();
    let mut w: Vec<f64> = dom.weights().iter().map(|x| 0.5 * x).collect();
    w.extend(sample_weights.iter().map(|x| 0.5 * x / total));
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn constant_has_unit_norm() {
        let dom = GridDomain::uniform_torus(17, 1).unwrap();
        let f = vec![c(1.0); 17];
        let n = lp_norm_continuous(&f, &dom, Exponent::Finite(3.0)).unwrap();
        assert!((n - 1.0).abs() < 1e-14);
    }

    #[test]
    fn indicator_of_one_point() {
        let dom = GridDomain::uniform_torus(4, 1).unwrap();
        let f = vec![c(1.0), c(0.0), c(0.0), c(0.0)];
        let n = lp_norm_continuous(&f, &dom, Exponent::Finite(2.0)).unwrap();
        assert!((n - 0.5).abs() < 1e-15);
        assert_eq!(lp_norm_continuous(&f, &dom, Exponent::Infinite).unwrap(), 1.0);
    }

    #[test]
    fn linear_ramp_l2_matches_integral() {
        let g = 1000;
        let dom = GridDomain::uniform_torus(g, 1).unwrap();
        let f: Vec<C64> = (0..g).map(|i| c(i as f64 / g as f64)).collect();
        let n = lp_norm_continuous(&f, &dom, Exponent::Finite(2.0)).unwrap();
        // ∫₀¹ x² dx = 1/3
        assert!((n - (1.0f64 / 3.0).sqrt()).abs() < 2e-3);
    }

    #[test]
    fn sample_norm_examples() {
        let ones = vec![c(1.0); 4];
        assert!((lp_norm_sample(&ones, Exponent::Finite(7.0)).unwrap() - 1.0).abs() < 1e-15);
        let e1 = vec![c(1.0), c(0.0), c(0.0), c(0.0)];
        assert!((lp_norm_sample(&e1, Exponent::Finite(2.0)).unwrap() - 0.5).abs() < 1e-15);
        let s = vec![c(1.0), c(2.0), c(2.0), c(4.0)];
        // (1 + 8 + 8 + 64)/4 = 81/4
        let expected = (81.0f64 / 4.0).cbrt();
        assert!((lp_norm_sample(&s, Exponent::Finite(3.0)).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 2.72568).abs() < 1e-5);
        assert!(matches!(
            lp_norm_sample(&[], Exponent::Finite(2.0)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn weighted_norm_examples() {
        let n = weighted_sample_norm(&[c(1.0), c(1.0)], &[0.5, 0.5], 2.0).unwrap();
        assert!((n - 1.0).abs() < 1e-15);
        let n = weighted_sample_norm(&[c(3.0), c(0.0)], &[1.0, 1.0], 1.0).unwrap();
        assert!((n - 3.0).abs() < 1e-15);
        let n = weighted_sample_norm(&[c(1.0), c(2.0)], &[0.25, 0.75], 2.0).unwrap();
        assert!((n - 3.25f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            weighted_sample_norm(&[c(1.0)], &[0.0], 2.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn mixed_norm_examples() {
        let dom = GridDomain::uniform_torus(8, 1).unwrap();
        let n = mixed_measure_norm(&[c(1.0); 8], &[c(1.0); 3], &dom, 5.0).unwrap();
        assert!((n - 1.0).abs() < 1e-15);
        let n = mixed_measure_norm(&[c(0.0); 8], &[c(1.0)], &dom, 2.0).unwrap();
        assert!((n - 0.5f64.sqrt()).abs() < 1e-15);

        let g = 1000;
        let dom = GridDomain::uniform_torus(g, 1).unwrap();
        let ramp: Vec<C64> = (0..g).map(|i| c(i as f64 / g as f64)).collect();
        let n = mixed_measure_norm(&ramp, &[c(0.0), c(0.5)], &dom, 2.0).unwrap();
        // ½·(grid mean of x²) + ½·(0 + 0.25)/2
        let grid_mean: f64 = (0..g).map(|i| (i as f64 / g as f64).powi(2)).sum::<f64>() / g as f64;
        let expected = (0.5 * grid_mean + 0.5 * 0.125).sqrt();
        assert!((n - expected).abs() < 1e-12);
        assert!((n - 0.4787).abs() < 1e-3);
    }

    #[test]
    fn exponent_parsing() {
        assert_eq!(Exponent::new(f64::INFINITY).unwrap(), Exponent::Infinite);
        assert!(Exponent::new(0.5).is_err());
        let json = serde_json_roundtrip(Exponent::Infinite);
        assert_eq!(json, Exponent::Infinite);
    }

    fn serde_json_roundtrip(p: Exponent) -> Exponent {
        let s = serde_json::to_string(&p).unwrap();
        serde_json::from_str(&s).unwrap()
    }

    #[test]
    fn grid_rejects_bad_weights() {
        let pts = vec![vec![0.0], vec![0.5]];
        assert!(GridDomain::from_parts(1, pts.clone(), vec![0.5, 0.4]).is_err());
        assert!(GridDomain::from_parts(1, vec![vec![0.0], vec![0.0]], vec![0.5, 0.5]).is_err());
        assert!(GridDomain::from_parts(1, pts, vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn locate_and_resolve() {
        let dom = GridDomain::uniform_torus(8, 1).unwrap();
        assert_eq!(dom.locate(&[0.25]), Some(2));
        assert_eq!(dom.locate(&[0.3]), None);
        let xi = SampleSet::raw(1, vec![vec![0.5], vec![0.125]]).unwrap();
        assert_eq!(xi.resolve(&dom).unwrap(), vec![4, 1]);
        assert!(SampleSet::raw(1, vec![vec![1.5]]).is_err());
    }

    #[test]
    fn sample_set_json_shape() {
        let dom = GridDomain::uniform_torus(4, 1).unwrap();
        let xi = SampleSet::on_grid(&dom, vec![0, 2]).unwrap();
        let v: serde_json::Value = serde_json::to_value(&xi).unwrap();
        assert_eq!(v["grid_size"], 4);
        assert_eq!(v["dim"], 1);
        assert_eq!(v["points"][1][0], 0.5);
        let back: SampleSet = serde_json::from_value(v).unwrap();
        assert_eq!(back, xi);
    }
}
