//! Gauss–Legendre rules and adaptive composite quadrature.

use std::sync::OnceLock;

use crate::C64;

const PANEL_ORDER: usize = 20;
const MAX_SPLITS: usize = 20_000;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess followed by Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_ORDER))
}

fn panel<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64) -> C64 {
    let (x, w) = panel_rule();
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut s = C64::new(0.0, 0.0);
    for (xi, wi) in x.iter().zip(w) {
        s += f(c + h * xi) * *wi;
    }
    s * h
}

/// A panel with its refined value and the refinement discrepancy.
struct Panel {
    err: f64,
    a: f64,
    b: f64,
    halves: [C64; 2],
}

impl Panel {
    fn new<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64, whole: C64) -> Panel {
        let m = 0.5 * (a + b);
        let halves = [panel(f, a, m), panel(f, m, b)];
        Panel {
            err: (halves[0] + halves[1] - whole).norm(),
            a,
            b,
            halves,
        }
    }

    fn value(&self) -> C64 {
        self.halves[0] + self.halves[1]
    }
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Adaptive composite 20-point Gauss–Legendre integral of a complex integrand
/// to absolute tolerance `tol`.
///
/// Panels are bisected worst-first until the summed error estimate meets
/// `tol`, the split budget runs out, or panels reach floating-point width.
pub fn integrate_complex<F: Fn(f64) -> C64>(f: F, a: f64, b: f64, tol: f64) -> C64 {
    if a == b {
        return C64::new(0.0, 0.0);
    }
    // Seed with a uniform split so narrow features are not missed by the first panel.
    let seeds = 16;
    let h = (b - a) / seeds as f64;
    let mut heap = std::collections::BinaryHeap::new();
    let mut err = 0.0;
    for i in 0..seeds {
        let (lo, hi) = (a + h * i as f64, a + h * (i + 1) as f64);
        let p = Panel::new(&f, lo, hi, panel(&f, lo, hi));
        err += p.err;
        heap.push(p);
    }
    let mut frozen = C64::new(0.0, 0.0);
    let mut splits = 0;
    while err > tol && splits < MAX_SPLITS {
        let Some(p) = heap.pop() else { break };
        err -= p.err;
        let m = 0.5 * (p.a + p.b);
        let (lm, mr) = (0.5 * (p.a + m), 0.5 * (m + p.b));
        if !(p.a < lm && lm < m && m < mr && mr < p.b) {
            frozen += p.value();
            continue;
        }
        for q in [
            Panel::new(&f, p.a, m, p.halves[0]),
            Panel::new(&f, m, p.b, p.halves[1]),
        ] {
            err += q.err;
            heap.push(q);
        }
        splits += 1;
        if splits % 256 == 0 {
            // Guard against drift in the running sum.
            err = heap.iter().map(|p| p.err).sum();
        }
    }
    frozen + heap.iter().map(|p| p.value()).sum::<C64>()
}

/// Real-valued counterpart of [`integrate_complex`].
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    integrate_complex(|x| C64::new(f(x), 0.0), a, b, tol).re
}
