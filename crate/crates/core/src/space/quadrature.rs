//! Symmetric triangle rules and Gauss–Legendre rules on `[0, 1]`.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Quadrature on the reference triangle `{xi, eta >= 0, xi + eta <= 1}`.
///
/// Points are stored as barycentric triples `(1 - xi - eta, xi, eta)`;
/// weights sum to the reference area `1/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Reference coordinates `(xi, eta)` of point `q`.
    pub fn reference_point(&self, q: usize) -> [f64; 2] {
        [self.points[q][1], self.points[q][2]]
    }

    /// Iterates over `(barycentric point, weight)`.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

/// Orbit of a barycentric point under the symmetries of the triangle.
enum Orbit {
    Centroid(f64),
    /// `(a, a, 1 - 2a)` and permutations.
    Three(f64, f64),
    /// `(a, b, 1 - a - b)` and permutations.
    Six(f64, f64, f64),
}

fn build(exactness: usize, orbits: &[Orbit]) -> QuadratureRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for orbit in orbits {
        match *orbit {
            Orbit::Centroid(w) => {
                points.push([1.0 / 3.0; 3]);
                weights.push(w);
            }
            Orbit::Three(a, w) => {
                let c = 1.0 - 2.0 * a;
                for p in [[a, a, c], [a, c, a], [c, a, a]] {
                    points.push(p);
                    weights.push(w);
                }
            }
            Orbit::Six(a, b, w) => {
                let c = 1.0 - a - b;
                for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                    points.push(p);
                    weights.push(w);
                }
            }
        }
    }
    // tabulated weights are normalised to unit area
    let weights = weights.into_iter().map(|w| 0.5 * w).collect();
    QuadratureRule {
        points,
        weights,
        exactness,
    }
}

fn rule_table() -> &'static [QuadratureRule; 6] {
    static RULES: OnceLock<[QuadratureRule; 6]> = OnceLock::new();
    RULES.get_or_init(|| {
        let s15 = 15f64.sqrt();
        [
            build(1, &[Orbit::Centroid(1.0)]),
            build(2, &[Orbit::Three(1.0 / 6.0, 1.0 / 3.0)]),
            build(
                4,
                &[
                    Orbit::Three(0.445_948_490_915_965, 0.223_381_589_678_011),
                    Orbit::Three(0.091_576_213_509_771, 0.109_951_743_655_322),
                ],
            ),
            build(
                5,
                &[
                    Orbit::Centroid(9.0 / 40.0),
                    Orbit::Three((6.0 - s15) / 21.0, (155.0 - s15) / 1200.0),
                    Orbit::Three((6.0 + s15) / 21.0, (155.0 + s15) / 1200.0),
                ],
            ),
            build(
                6,
                &[
                    Orbit::Three(0.249_286_745_170_910, 0.116_786_275_726_379),
                    Orbit::Three(0.063_089_014_491_502, 0.050_844_906_370_207),
                    Orbit::Six(0.053_145_049_844_817, 0.310_352_451_033_784, 0.082_851_075_618_374),
                ],
            ),
            build(
                8,
                &[
                    Orbit::Centroid(0.144_315_607_677_787),
                    Orbit::Three(0.459_292_588_292_723, 0.095_091_634_267_285),
                    Orbit::Three(0.170_569_307_751_760, 0.103_217_370_534_718),
                    Orbit::Three(0.050_547_228_317_031, 0.032_458_497_623_198),
                    Orbit::Six(0.008_394_777_409_958, 0.263_112_829_634_638, 0.027_230_314_174_435),
                ],
            ),
        ]
    })
}

/// Cheapest shipped rule integrating polynomials of total degree `exactness`
/// exactly. Rules exist up to degree 8.
pub fn quadrature(exactness: usize) -> Result<&'static QuadratureRule> {
    let table = rule_table();
    table
        .iter()
        .find(|r| r.exactness >= exactness)
        .ok_or(Error::UnsupportedQuadrature(exactness))
}

/// Gauss–Legendre rule on `[0, 1]`: points and weights (summing to 1).
#[derive(Debug, Clone, PartialEq)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LineRule {
    pub fn gauss_legendre(n: usize) -> LineRule {
        assert!(n >= 1, "a Gauss rule needs at least one point");
        let mut points = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            points[i] = 0.5 * (1.0 - x);
            points[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        LineRule { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Seven-point rule used on all facets (exact to degree 13).
pub fn facet_rule() -> &'static LineRule {
    static RULE: OnceLock<LineRule> = OnceLock::new();
    RULE.get_or_init(|| LineRule::gauss_legendre(7))
}
