/// Maximum number of Simpson panels before refinement stops.
pub const MAX_PANELS: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub est_error: f64,
    pub panels: usize,
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Quadrature {
    if a == b {
        return Quadrature { value: 0.0, est_error: 0.0, panels: 0 };
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let mut stack = vec![Panel { a, b, fa, fm, fb, whole: simpson(a, b, fa, fm, fb), tol, depth: 0 }];
    let mut value = 0.0;
    let mut err = 0.0;
    let mut panels = 1usize;
    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let lm = 0.5 * (p.a + m);
        let rm = 0.5 * (m + p.b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(p.a, m, p.fa, flm, p.fm);
        let right = simpson(m, p.b, p.fm, frm, p.fb);
        let diff = left + right - p.whole;
        if diff.abs() <= 15.0 * p.tol || panels >= MAX_PANELS || p.depth >= 60 {
            value += left + right + diff / 15.0;
            err += diff.abs() / 15.0;
        } else {
            panels += 1;
            let half = 0.5 * p.tol;
            stack.push(Panel { a: m, b: p.b, fa: p.fm, fm: frm, fb: p.fb, whole: right, tol: half, depth: p.depth + 1 });
            stack.push(Panel { a: p.a, b: m, fa: p.fa, fm: flm, fb: p.fm, whole: left, tol: half, depth: p.depth + 1 });
        }
    }
    Quadrature { value, est_error: err, panels }
}
