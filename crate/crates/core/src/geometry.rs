//! Open arcs, the four catalog cracks, normals and sampling.
//!
//! Every arc is parameterized over the internal parameter t ∈ [−1, 1]; native
//! parameter ranges are mapped onto it affinely.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::Vec2;

#[derive(Clone, Debug, PartialEq)]
pub enum ArcShape {
    /// Straight segment from `a` (t = −1) to `b` (t = 1).
    Segment { a: Vec2, b: Vec2 },
    /// Γ₂: graph of ½cos(πs/2) + ⅕sin(πs/2) − ⅒cos(3πs/2), s ∈ [−1, 1].
    Wave,
    /// Γ₃: (2 sin(s/2), sin s), s ∈ [π/4, 7π/4].
    Loop,
    /// Γ₄⁽¹⁾: (s − 0.2, −½s² + 0.6), s ∈ [−½, ½].
    Parabola,
    /// Γ₄⁽²⁾: (s + 0.2, s³ + s² − 0.6), s ∈ [−½, ½].
    Cubic,
    /// Graph (s, Σ aⱼTⱼ(s)), s ∈ [−1, 1].
    ChebyshevGraph(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParametricArc {
    pub shape: ArcShape,
}

/// Point, tangent dz/dt and unit normal at one parameter value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArcPoint {
    pub point: Vec2,
    pub tangent: Vec2,
    pub normal: Vec2,
}

/// Σ aⱼTⱼ(s) and its s-derivative.
pub fn chebyshev_with_derivative(coeffs: &[f64], s: f64) -> (f64, f64) {
    let (mut t_prev, mut t_cur) = (1.0, s);
    let (mut d_prev, mut d_cur) = (0.0, 1.0);
    let mut val = 0.0;
    let mut der = 0.0;
    for (j, a) in coeffs.iter().enumerate() {
        match j {
            0 => val += a,
            1 => {
                val += a * s;
                der += a;
            }
            _ => {
                let t_next = 2.0 * s * t_cur - t_prev;
                let d_next = 2.0 * t_cur + 2.0 * s * d_cur - d_prev;
                t_prev = t_cur;
                t_cur = t_next;
                d_prev = d_cur;
                d_cur = d_next;
                val += a * t_cur;
                der += a * d_cur;
            }
        }
    }
    (val, der)
}

impl ParametricArc {
    pub fn new(shape: ArcShape) -> Self {
        ParametricArc { shape }
    }

    pub fn segment(a: Vec2, b: Vec2) -> Self {
        Self::new(ArcShape::Segment { a, b })
    }

    pub fn chebyshev(coeffs: Vec<f64>) -> Self {
        Self::new(ArcShape::ChebyshevGraph(coeffs))
    }

    /// z(t) without range checks; callers inside the crate stay on [−1, 1].
    pub fn position(&self, t: f64) -> Vec2 {
        match &self.shape {
            ArcShape::Segment { a, b } => a + (b - a) * (0.5 * (t + 1.0)),
            ArcShape::Wave => {
                let s = t;
                let y = 0.5 * (0.5 * PI * s).cos() + 0.2 * (0.5 * PI * s).sin()
                    - 0.1 * (1.5 * PI * s).cos();
                Vec2::new(s, y)
            }
            ArcShape::Loop => {
                let s = PI + 0.75 * PI * t;
                Vec2::new(2.0 * (0.5 * s).sin(), s.sin())
            }
            ArcShape::Parabola => {
                let s = 0.5 * t;
                Vec2::new(s - 0.2, -0.5 * s * s + 0.6)
            }
            ArcShape::Cubic => {
                let s = 0.5 * t;
                Vec2::new(s + 0.2, s * s * s + s * s - 0.6)
            }
            ArcShape::ChebyshevGraph(c) => Vec2::new(t, chebyshev_with_derivative(c, t).0),
        }
    }

    /// dz/dt.
    pub fn derivative(&self, t: f64) -> Vec2 {
        match &self.shape {
            ArcShape::Segment { a, b } => (b - a) * 0.5,
            ArcShape::Wave => {
                let s = t;
                let h = 0.5 * PI;
                let dy = -0.5 * h * (h * s).sin() + 0.2 * h * (h * s).cos()
                    + 0.1 * 1.5 * PI * (1.5 * PI * s).sin();
                Vec2::new(1.0, dy)
            }
            ArcShape::Loop => {
                let s = PI + 0.75 * PI * t;
                Vec2::new((0.5 * s).cos(), s.cos()) * (0.75 * PI)
            }
            ArcShape::Parabola => {
                let s = 0.5 * t;
                Vec2::new(0.5, -0.5 * s)
            }
            ArcShape::Cubic => {
                let s = 0.5 * t;
                Vec2::new(0.5, 0.5 * (3.0 * s * s + 2.0 * s))
            }
            ArcShape::ChebyshevGraph(c) => Vec2::new(1.0, chebyshev_with_derivative(c, t).1),
        }
    }

    /// Unit normal: the unit tangent rotated by +90°.
    pub fn normal(&self, t: f64) -> Vec2 {
        let d = self.derivative(t);
        let n = d.norm();
        Vec2::new(-d.y / n, d.x / n)
    }

    pub fn evaluate(&self, t: f64) -> Result<ArcPoint> {
        if !(-1.0..=1.0).contains(&t) {
            return Err(Error::domain(format!("arc parameter {t} outside [-1, 1]")));
        }
        Ok(ArcPoint {
            point: self.position(t),
            tangent: self.derivative(t),
            normal: self.normal(t),
        })
    }

    pub fn endpoints(&self) -> (Vec2, Vec2) {
        (self.position(-1.0), self.position(1.0))
    }

    /// Arc length by composite Gauss–Legendre on 64 panels.
    pub fn length(&self) -> f64 {
        let panels = 64;
        let g = 1.0 / 3f64.sqrt();
        (0..panels)
            .map(|p| {
                let a = -1.0 + 2.0 * p as f64 / panels as f64;
                let h = 1.0 / panels as f64;
                let c = a + h;
                h * (self.derivative(c - g * h).norm() + self.derivative(c + g * h).norm())
            })
            .sum()
    }

    /// No pairwise coincidence among `n` samples (adjacent pairs excluded).
    pub fn is_injective(&self, n: usize) -> bool {
        let pts: Vec<Vec2> = (0..n).map(|i| self.position(param(i, n))).collect();
        let step = self.length() / (n - 1) as f64;
        for i in 0..n {
            for j in i + 2..n {
                if (pts[i] - pts[j]).norm() < 0.5 * step {
                    return false;
                }
            }
        }
        true
    }

    pub fn has_no_cusp(&self, n: usize) -> bool {
        (0..n).all(|i| self.derivative(param(i, n)).norm() > 1e-12)
    }

    /// Distance from `p` to the arc (dense sampling plus golden-section polish).
    pub fn distance_to(&self, p: Vec2) -> f64 {
        let n = 1025;
        let mut best = (f64::INFINITY, 0usize);
        for i in 0..n {
            let d = (self.position(param(i, n)) - p).norm();
            if d < best.0 {
                best = (d, i);
            }
        }
        let mut a = param(best.1.saturating_sub(1), n);
        let mut b = param((best.1 + 1).min(n - 1), n);
        let f = |t: f64| (self.position(t) - p).norm();
        let r = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        best.0.min(f(0.5 * (a + b)))
    }
}

fn param(i: usize, n: usize) -> f64 {
    if n == 1 {
        0.0
    } else {
        -1.0 + 2.0 * i as f64 / (n - 1) as f64
    }
}

/// One or more disjoint open arcs.
#[derive(Clone, Debug, PartialEq)]
pub struct Crack {
    pub components: Vec<ParametricArc>,
}

/// Sample point with its unit normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitNormal {
    pub point: Vec2,
    pub normal: Vec2,
}

impl Crack {
    pub fn new(components: Vec<ParametricArc>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::config("a crack needs at least one component"));
        }
        Ok(Crack { components })
    }

    pub fn single(arc: ParametricArc) -> Self {
        Crack { components: vec![arc] }
    }

    /// Straight crack of the given length centered at `center`, tilted by `angle`.
    pub fn micro_segment(center: Vec2, length: f64, angle: f64) -> Self {
        let half = Vec2::new(angle.cos(), angle.sin()) * (0.5 * length);
        Self::single(ParametricArc::segment(center - half, center + half))
    }

    /// `m` equispaced internal parameters per component.
    pub fn sample_points(&self, m: usize) -> Vec<UnitNormal> {
        self.components
            .iter()
            .flat_map(|arc| {
                (0..m).map(move |i| {
                    let t = param(i, m);
                    UnitNormal { point: arc.position(t), normal: arc.normal(t) }
                })
            })
            .collect()
    }

    pub fn distance_to(&self, p: Vec2) -> f64 {
        self.components
            .iter()
            .map(|a| a.distance_to(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest distance between samples of different components.
    pub fn min_component_gap(&self, n: usize) -> f64 {
        let mut gap = f64::INFINITY;
        for (i, a) in self.components.iter().enumerate() {
            for b in &self.components[i + 1..] {
                for p in 0..n {
                    let pa = a.position(param(p, n));
                    for q in 0..n {
                        gap = gap.min((pa - b.position(param(q, n))).norm());
                    }
                }
            }
        }
        gap
    }

    /// Axis-aligned bounding box `(min, max)` from 256 samples per arc.
    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::repeat(f64::INFINITY);
        let mut hi = Vec2::repeat(f64::NEG_INFINITY);
        for arc in &self.components {
            for i in 0..256 {
                let p = arc.position(param(i, 256));
                lo = lo.inf(&p);
                hi = hi.sup(&p);
            }
        }
        (lo, hi)
    }
}

/// Canonical catalog name ("Γ1".."Γ4") for accepted spellings.
pub fn canonical_name(name: &str) -> Result<&'static str> {
    let t = name.trim();
    let digit = t
        .strip_prefix("Γ")
        .or_else(|| t.strip_prefix('G'))
        .or_else(|| t.strip_prefix('g'))
        .or_else(|| t.strip_prefix("gamma"))
        .or_else(|| t.strip_prefix("Gamma"));
    match digit {
        Some("1") => Ok("Γ1"),
        Some("2") => Ok("Γ2"),
        Some("3") => Ok("Γ3"),
        Some("4") => Ok("Γ4"),
        _ => Err(Error::Lookup(format!("no catalog crack named {name:?}"))),
    }
}

pub fn catalog(name: &str) -> Result<Crack> {
    let arcs = match canonical_name(name)? {
        "Γ1" => vec![ParametricArc::segment(Vec2::new(-0.5, 0.3), Vec2::new(0.5, 0.3))],
        "Γ2" => vec![ParametricArc::new(ArcShape::Wave)],
        "Γ3" => vec![ParametricArc::new(ArcShape::Loop)],
        _ => vec![
            ParametricArc::new(ArcShape::Parabola),
            ParametricArc::new(ArcShape::Cubic),
        ],
    };
    Crack::new(arcs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Vec2, b: Vec2, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn catalog_points() {
        let g1 = catalog("Γ1").unwrap();
        assert!(close(g1.components[0].position(0.0), Vec2::new(0.0, 0.3), 1e-15));
        let (a, b) = g1.components[0].endpoints();
        assert!(close(a, Vec2::new(-0.5, 0.3), 1e-15));
        assert!(close(b, Vec2::new(0.5, 0.3), 1e-15));

        let g2 = catalog("G2").unwrap();
        assert!(close(g2.components[0].position(0.0), Vec2::new(0.0, 0.4), 1e-15));

        let g3 = catalog("Γ3").unwrap();
        let want = Vec2::new(2.0 * (PI / 8.0).sin(), (PI / 4.0).sin());
        assert!(close(g3.components[0].position(-1.0), want, 1e-14));

        assert_eq!(catalog("Γ4").unwrap().components.len(), 2);
        assert!(matches!(catalog("Γ5"), Err(Error::Lookup(_))));
    }

    #[test]
    fn evaluate_checks_range() {
        let g = catalog("Γ2").unwrap();
        assert!(g.components[0].evaluate(1.0 + 1e-9).is_err());
        assert!(g.components[0].evaluate(-1.0).is_ok());
    }

    #[test]
    fn sampling() {
        let g1 = catalog("Γ1").unwrap();
        let s = g1.sample_points(3);
        let want = [(-0.5, 0.3), (0.0, 0.3), (0.5, 0.3)];
        for (p, w) in s.iter().zip(want) {
            assert!(close(p.point, Vec2::new(w.0, w.1), 1e-15));
        }
        for p in g1.sample_points(17) {
            assert!((p.normal.y.abs() - 1.0).abs() < 1e-15 && p.normal.x.abs() < 1e-15);
        }
        assert_eq!(catalog("Γ4").unwrap().sample_points(2).len(), 4);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for name in ["Γ1", "Γ2", "Γ3", "Γ4"] {
            for arc in catalog(name).unwrap().components {
                for i in 1..=128 {
                    let t = -1.0 + 2.0 * i as f64 / 129.0;
                    let h = 1e-5;
                    let fd = (arc.position(t + h) - arc.position(t - h)) / (2.0 * h);
                    let d = arc.derivative(t);
                    assert!((fd - d).norm() <= 1e-6 * d.norm(), "{name} t={t}");
                }
            }
        }
        let arc = ParametricArc::chebyshev(vec![0.26, 0.23, -0.22, -0.03, -0.06, 0.01]);
        for i in 1..=128 {
            let t = -1.0 + 2.0 * i as f64 / 129.0;
            let h = 1e-5;
            let fd = (arc.position(t + h) - arc.position(t - h)) / (2.0 * h);
            assert!((fd - arc.derivative(t)).norm() <= 1e-6 * arc.derivative(t).norm());
        }
    }

    #[test]
    fn catalog_is_simple() {
        for name in ["Γ1", "Γ2", "Γ3", "Γ4"] {
            let c = catalog(name).unwrap();
            for arc in &c.components {
                assert!(arc.is_injective(512), "{name}");
                assert!(arc.has_no_cusp(512), "{name}");
            }
            if c.components.len() > 1 {
                assert!(c.min_component_gap(256) > 0.0);
            }
        }
    }

    #[test]
    fn reparameterization_invariance() {
        // Γ₁ in its native parameter s ∈ [−0.5, 0.5].
        let arc = &catalog("Γ1").unwrap().components[0];
        for i in 0..=20 {
            let s = -0.5 + i as f64 / 20.0;
            let native = Vec2::new(s, 0.3);
            assert!(close(arc.position(2.0 * s), native, 1e-15));
        }
    }

    #[test]
    fn distance() {
        let g1 = catalog("Γ1").unwrap();
        assert!((g1.distance_to(Vec2::new(0.1, 0.0)) - 0.3).abs() < 1e-12);
        assert!((g1.distance_to(Vec2::new(1.5, 0.3)) - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn normal_is_unit_and_orthogonal(t in -1.0f64..=1.0, which in 0usize..5) {
            let arc = match which {
                0..=3 => catalog(["Γ1", "Γ2", "Γ3", "Γ4"][which]).unwrap().components[0].clone(),
                _ => catalog("Γ4").unwrap().components[1].clone(),
            };
            let p = arc.evaluate(t).unwrap();
            prop_assert!((p.normal.norm() - 1.0).abs() < 1e-12);
            prop_assert!(p.normal.dot(&p.tangent).abs() < 1e-10 * p.tangent.norm());
        }

        #[test]
        fn chebyshev_matches_cosine_form(theta in 0.0f64..PI, j in 0usize..12) {
            let mut c = vec![0.0; j + 1];
            c[j] = 1.0;
            let (v, _) = chebyshev_with_derivative(&c, theta.cos());
            prop_assert!((v - (j as f64 * theta).cos()).abs() < 1e-12);
        }
    }
}
