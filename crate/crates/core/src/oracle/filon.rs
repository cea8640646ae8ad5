//! Filon-type panel rule for `∫ w(x) e^{iφ(x)} dx`.
//!
//! On each panel the phase is split into its chord (linear part through
//! the panel endpoints) and a remainder. The remainder is folded into the
//! amplitude, which is expanded in Legendre polynomials from Gauss–Legendre
//! samples; the linear part is integrated exactly against each Legendre
//! polynomial through the moments `∫ P_k(y) e^{iβy} dy = 2 i^k j_k(β)`.
//! Panels may therefore span many periods of the linear part.

use std::sync::OnceLock;

use crate::error::Result;
use crate::series::C64;

use super::PanelEval;

/// Number of Gauss–Legendre nodes (and Legendre modes) per panel.
pub(crate) const NODES: usize = 20;

struct Rule {
    nodes: [f64; NODES],
    weights: [f64; NODES],
    /// `legendre[k][j] = P_k(nodes[j])`
    legendre: [[f64; NODES]; NODES],
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 1..n {
        let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = NODES;
        let mut nodes = [0.0; NODES];
        let mut weights = [0.0; NODES];
        for i in 0..n {
            let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        let mut legendre = [[0.0; NODES]; NODES];
        for (j, &x) in nodes.iter().enumerate() {
            let (mut p0, mut p1) = (1.0, x);
            legendre[0][j] = 1.0;
            legendre[1][j] = x;
            for k in 1..n - 1 {
                let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
                legendre[k + 1][j] = p2;
                p0 = p1;
                p1 = p2;
            }
        }
        Rule {
            nodes,
            weights,
            legendre,
        }
    })
}

/// Spherical Bessel functions `j_0(x), ..., j_{n-1}(x)`.
pub(crate) fn spherical_bessel(n: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    let ax = x.abs();
    if ax == 0.0 {
        out[0] = 1.0;
        return out;
    }
    if ax < 1.0 {
        // power series: j_k(x) = x^k/(2k+1)!! Σ_m (-x²/2)^m / (m! Π_{i≤m}(2k+2i+1))
        let mut lead = 1.0;
        for (k, o) in out.iter_mut().enumerate() {
            if k > 0 {
                lead *= ax / (2 * k + 1) as f64;
            }
            let mut term = 1.0;
            let mut sum = 1.0;
            for m in 1..30 {
                term *= -0.5 * ax * ax / (m as f64 * (2 * k + 2 * m + 1) as f64);
                sum += term;
                if term.abs() < 1e-17 * sum.abs() {
                    break;
                }
            }
            *o = lead * sum;
        }
    } else if ax >= n as f64 {
        // upward recurrence is stable for k < x
        let (s, c) = ax.sin_cos();
        out[0] = s / ax;
        if n > 1 {
            out[1] = s / (ax * ax) - c / ax;
        }
        for k in 1..n - 1 {
            out[k + 1] = (2 * k + 1) as f64 / ax * out[k] - out[k - 1];
        }
    } else {
        // Miller's downward recurrence, normalised against j_0 or j_1
        let start = n + 30 + ax.ceil() as usize;
        let mut hi = 0.0;
        let mut cur = 1e-300;
        for k in (1..=start).rev() {
            let lo = (2 * k + 1) as f64 / ax * cur - hi;
            hi = cur;
            cur = lo;
            // now cur ≈ j_{k-1}, hi ≈ j_k
            if k - 1 < n {
                out[k - 1] = cur;
                if k < n {
                    out[k] = hi;
                }
            }
            if cur.abs() > 1e250 {
                let s = 1e-250;
                cur *= s;
                hi *= s;
                for o in out.iter_mut() {
                    *o *= s;
                }
            }
        }
        let (s, c) = ax.sin_cos();
        let j0 = s / ax;
        let j1 = s / (ax * ax) - c / ax;
        let scale = if j0.abs() >= j1.abs() || n == 1 {
            j0 / out[0]
        } else {
            j1 / out[1]
        };
        for o in out.iter_mut() {
            *o *= scale;
        }
    }
    if x < 0.0 {
        for (k, o) in out.iter_mut().enumerate() {
            if k % 2 == 1 {
                *o = -*o;
            }
        }
    }
    out
}

/// One Filon panel on `[a, b]`. `f(x)` returns `(φ(x), w(x))`.
pub(crate) fn filon_panel(f: &impl Fn(f64) -> Result<(f64, C64)>, a: f64, b: f64) -> Result<PanelEval> {
    let r = rule();
    let m = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let (pa, _) = f(a)?;
    let (pb, _) = f(b)?;
    let mid_phase = 0.5 * (pa + pb);
    let beta = 0.5 * (pb - pa);
    let mut g = [C64::new(0.0, 0.0); NODES];
    let mut abs = 0.0;
    for j in 0..NODES {
        let y = r.nodes[j];
        let (phi, w) = f(m + h * y)?;
        g[j] = w * C64::from_polar(1.0, phi - mid_phase - beta * y);
        abs += r.weights[j] * w.norm();
    }
    let bessel = spherical_bessel(NODES, beta);
    let mut sum = C64::new(0.0, 0.0);
    let mut tail = 0.0;
    let mut peak = 0.0f64;
    let mut ik = C64::new(1.0, 0.0);
    for k in 0..NODES {
        let mut ak = C64::new(0.0, 0.0);
        for j in 0..NODES {
            ak += g[j] * (r.weights[j] * r.legendre[k][j]);
        }
        ak *= (2 * k + 1) as f64 / 2.0;
        sum += ak * ik * (2.0 * bessel[k]);
        if k + 2 >= NODES {
            tail += ak.norm();
        }
        peak = peak.max(ak.norm());
        ik *= C64::new(0.0, 1.0);
    }
    let value = sum * C64::from_polar(h, mid_phase);
    let abs = abs * h;
    // The neglected modes k >= NODES enter through moments no larger than
    // those of the last two kept modes; aliasing of the kept coefficients
    // is of relative size tail/peak.
    let moment = bessel[NODES - 1].abs().max(bessel[NODES - 2].abs());
    let alias = if peak > 0.0 { tail / peak } else { 0.0 };
    let err = (2.0 * h * tail * moment.max(alias)).max(10.0 * f64::EPSILON * abs);
    Ok(PanelEval {
        value,
        err,
        abs,
        noise: 0.0,
    })
}
