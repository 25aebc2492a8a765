//! Bounded 1D/2D maximization: uniform grid scan followed by golden-section
//! refinement inside the winning cell.
//!
//! Grid ties resolve toward the smaller parameter value (first index wins).

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// `n` evenly spaced points over `[lo, hi]`; a single point when `lo == hi`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 || lo == hi {
        return vec![lo; n.max(1)];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + i as f64 * step })
        .collect()
}

/// Index of the largest value; the first one wins ties. NaN never wins.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] || values[best].is_nan() {
            best = i;
        }
    }
    best
}

/// Golden-section search for a maximum of a unimodal `f` on `[lo, hi]`.
pub fn golden_section_max(
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    f: impl Fn(f64) -> f64,
) -> (f64, f64) {
    if hi - lo <= tol {
        let mid = 0.5 * (lo + hi);
        return (mid, f(mid));
    }
    let mut a = hi - INV_PHI * (hi - lo);
    let mut b = lo + INV_PHI * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    while hi - lo > tol {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - INV_PHI * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + INV_PHI * (hi - lo);
            fb = f(b);
        }
    }
    if fa >= fb {
        (a, fa)
    } else {
        (b, fb)
    }
}

/// Neighbouring cell `[grid[i-1], grid[i+1]]` clamped to the grid ends.
pub fn cell_around(grid: &[f64], i: usize) -> (f64, f64) {
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    (lo, hi)
}

/// Grid scan plus one golden-section pass. The refined point replaces the
/// grid winner only if it is strictly better.
pub fn maximize_1d(
    lo: f64,
    hi: f64,
    points: usize,
    tol: f64,
    f: impl Fn(f64) -> f64,
) -> (f64, f64) {
    let grid = linspace(lo, hi, points);
    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let i = argmax(&values);
    let (best_x, best_v) = (grid[i], values[i]);
    if grid.len() < 2 || lo == hi {
        return (best_x, best_v);
    }
    let (clo, chi) = cell_around(&grid, i);
    let (rx, rv) = golden_section_max(clo, chi, tol, &f);
    if rv > best_v {
        (rx, rv)
    } else {
        (best_x, best_v)
    }
}
