//! Separable convex subproblems over the normalized power box `(0, 1]^n`
//! with one coupling transfer-time constraint, solved by bisection on its
//! multiplier.

use std::f64::consts::LN_2;

use crate::link::LinkRate;

/// One power coordinate, normalized so that `z = power / limit`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Coordinate {
    pub link: LinkRate,
    pub limit: f64,
    pub bits: f64,
}

impl Coordinate {
    pub fn power(&self, z: f64) -> f64 {
        self.limit * z
    }

    /// Transfer time of this coordinate's bits at normalized power `z`.
    pub fn time(&self, z: f64) -> f64 {
        self.link.transfer_time(self.bits, self.power(z))
    }
}

/// `weight * time(z) + linear * z + prox * (z - center)^2`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Term {
    pub weight: f64,
    pub linear: f64,
    pub prox: f64,
    pub center: f64,
}

/// Minimizer of a [`Term`] over `[0, 1]`. The term is strictly convex when
/// `weight > 0` or `prox > 0`.
pub(crate) fn minimize_term(coord: &Coordinate, term: &Term) -> f64 {
    // time(z) = k / ln(1 + a*limit*z) with k = bits*ln2/W
    let k = term.weight * coord.bits * LN_2 / coord.link.bandwidth;
    let a = coord.link.snr_per_watt * coord.limit;
    let slope = |z: f64| {
        let mut d = term.linear + 2.0 * term.prox * (z - term.center);
        if k > 0.0 {
            let s = (a * z).ln_1p();
            d -= k * a / ((1.0 + a * z) * s * s);
        }
        d
    };
    let curvature = |z: f64| {
        let mut c = 2.0 * term.prox;
        if k > 0.0 {
            let s = (a * z).ln_1p();
            let w = 1.0 + a * z;
            c += k * a * a * (s + 2.0) / (w * w * s * s * s);
        }
        c
    };

    if k <= 0.0 {
        if term.prox <= 0.0 {
            return if term.linear < 0.0 { 1.0 } else { 0.0 };
        }
        return (term.center - term.linear / (2.0 * term.prox)).clamp(0.0, 1.0);
    }
    if slope(1.0) <= 0.0 {
        return 1.0;
    }

    // The slope rises from -inf at 0+ and is concave, so a Newton step
    // always lands at or left of the root; from there it climbs monotonically.
    let mut z = 1.0;
    loop {
        let d = slope(z);
        if d <= 0.0 {
            break;
        }
        let next = z - d / curvature(z);
        z = if next > 0.0 { next } else { z * 1e-3 };
        if z < 1e-300 {
            return f64::MIN_POSITIVE;
        }
    }
    for _ in 0..200 {
        let d = slope(z);
        if d >= 0.0 {
            break;
        }
        let next = (z - d / curvature(z)).min(1.0);
        if next - z <= 4.0 * f64::EPSILON * z {
            return next;
        }
        z = next;
    }
    z
}

/// Minimizes `sum_i term_i(z_i)` subject to `sum_i time_i(z_i) <= limit`.
///
/// `terms(mu)` returns the per-coordinate terms with the multiplier folded
/// into their weights. Returns the point on the feasible side of the
/// multiplier bracket, or `None` when even `z = 1` is infeasible.
pub(crate) fn solve_coupled<F>(coords: &[Coordinate], limit: f64, terms: F) -> Option<Vec<f64>>
where
    F: Fn(f64) -> Vec<Term>,
{
    let total_time = |z: &[f64]| -> f64 { coords.iter().zip(z).map(|(c, &z)| c.time(z)).sum() };
    let solve = |mu: f64| -> Vec<f64> {
        coords
            .iter()
            .zip(terms(mu))
            .map(|(c, t)| minimize_term(c, &t))
            .collect()
    };

    let z0 = solve(0.0);
    if total_time(&z0) <= limit {
        return Some(z0);
    }
    if total_time(&vec![1.0; coords.len()]) > limit {
        return None;
    }

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut z_hi = solve(hi);
    while total_time(&z_hi) > limit {
        lo = hi;
        hi *= 16.0;
        if !hi.is_finite() {
            return None;
        }
        z_hi = solve(hi);
    }
    for _ in 0..400 {
        let mid = if lo > 0.0 && hi > 4.0 * lo {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if mid <= lo || mid >= hi {
            break;
        }
        let z = solve(mid);
        let t = total_time(&z);
        if t > limit {
            lo = mid;
        } else {
            hi = mid;
            z_hi = z;
            if t >= limit * (1.0 - 1e-14) {
                break;
            }
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Some(z_hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coord(a: f64, bits: f64) -> Coordinate {
        Coordinate {
            link: LinkRate {
                bandwidth: 2e9,
                snr_per_watt: a,
            },
            limit: 1.0,
            bits,
        }
    }

    fn brute_force(c: &Coordinate, t: &Term) -> f64 {
        // the constant prox * center^2 is dropped so it cannot swamp the comparison
        let f = |z: f64| t.weight * c.time(z) + t.linear * z + t.prox * z * (z - 2.0 * t.center);
        // golden-section on a log grid, then refine
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=4000 {
            let z = 10f64.powf(-12.0 + 12.0 * i as f64 / 4000.0);
            let v = f(z);
            if v < best.0 {
                best = (v, z);
            }
        }
        let (mut lo, mut hi) = (best.1 / 1.01, (best.1 * 1.01).min(1.0));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let x1 = hi - g * (hi - lo);
            let x2 = lo + g * (hi - lo);
            if f(x1) < f(x2) {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn term_minimizer_matches_brute_force() {
        let cases = [
            (coord(29.0, 5e7), Term { weight: 1.0, linear: 0.3, prox: 1e-3, center: 0.5 }),
            (coord(3000.0, 5e5), Term { weight: 10.0, linear: 1e-4, prox: 1e-3, center: 0.9 }),
            (coord(1.0, 1e7), Term { weight: 1e-3, linear: 2.0, prox: 0.0, center: 0.0 }),
            (coord(29.0, 5e7), Term { weight: 1e-9, linear: 1.0, prox: 1.0, center: 0.2 }),
        ];
        for (c, t) in cases {
            let z = minimize_term(&c, &t);
            let oracle = brute_force(&c, &t);
            assert!((z - oracle).abs() <= 1e-7 * oracle.max(1e-9), "{z} vs {oracle}");
        }
    }

    #[test]
    fn term_minimizer_clamps_at_the_box() {
        let c = coord(29.0, 5e7);
        let t = Term { weight: 1e6, linear: 0.0, prox: 0.0, center: 0.0 };
        assert_eq!(minimize_term(&c, &t), 1.0);
        let t = Term { weight: 0.0, linear: 1.0, prox: 0.5, center: 0.2 };
        assert_eq!(minimize_term(&c, &t), 0.0);
    }

    #[test]
    fn coupled_solution_meets_the_limit() {
        let coords = [coord(29.0, 5e7), coord(3000.0, 5e5)];
        let limit = 0.4;
        let z = solve_coupled(&coords, limit, |mu| {
            vec![
                Term { weight: mu, linear: 1.0, prox: 0.0, center: 0.0 },
                Term { weight: mu, linear: 1.0, prox: 0.0, center: 0.0 },
            ]
        })
        .unwrap();
        let t: f64 = coords.iter().zip(&z).map(|(c, &z)| c.time(z)).sum();
        assert!(t <= limit && t > limit * (1.0 - 1e-9), "{t}");
    }

    #[test]
    fn coupled_reports_infeasible() {
        let coords = [coord(29.0, 5e9)];
        let r = solve_coupled(&coords, 0.1, |mu| {
            vec![Term { weight: mu, linear: 1.0, prox: 0.0, center: 0.0 }]
        });
        assert!(r.is_none());
    }
}
