//! Breakpoint enumeration for floor maps of the channel coefficient.
//!
//! For nonnegative integer symbols `x`, the map `g -> floor(g * x)` over a
//! positive support is piecewise constant with jumps exactly at the
//! rationals `k / x`. Enumerating these breakpoints for every symbol of
//! interest splits the support into cells on which the whole integer output
//! map is constant, so probabilities and conditional entropies can be
//! integrated exactly instead of sampled.

/// A maximal open interval of the support on which all floors are constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub lo: f64,
    pub hi: f64,
}

impl Cell {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// All jump points of `g -> floor(g * x)` for `x` in `symbols`, strictly
/// inside `(lo, hi)`, sorted and deduplicated. Requires `lo >= 0`.
pub fn floor_breakpoints(symbols: &[i64], support: (f64, f64)) -> Vec<f64> {
    let (lo, hi) = support;
    debug_assert!(lo >= 0.0 && lo < hi);
    let mut points = Vec::new();
    for &x in symbols {
        if x <= 0 {
            // x = 0 gives a constant map; negative symbols do not occur.
            continue;
        }
        let xf = x as f64;
        let k_lo = (lo * xf).floor() as i64 + 1;
        let k_hi = (hi * xf).ceil() as i64 - 1;
        for k in k_lo..=k_hi {
            let b = k as f64 / xf;
            if b > lo && b < hi {
                points.push(b);
            }
        }
    }
    points.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    points.dedup();
    points
}

/// Splits the support into cells bounded by the floor breakpoints of
/// `symbols`. The union of the cells is the support (up to the
/// measure-zero breakpoint set).
pub fn decompose(symbols: &[i64], support: (f64, f64)) -> Vec<Cell> {
    let (lo, hi) = support;
    let mut cells = Vec::new();
    let mut prev = lo;
    for b in floor_breakpoints(symbols, support) {
        if b > prev {
            cells.push(Cell { lo: prev, hi: b });
        }
        prev = b;
    }
    if hi > prev {
        cells.push(Cell { lo: prev, hi });
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deterministic::floored_product;

    #[test]
    fn breakpoints_of_small_symbols() {
        // x = 2 jumps at 1/2, 1, 3/2 inside (0.4, 1.6); x = 3 at 1/3 is
        // outside, then 2/3, 1, 4/3 inside.
        let bp = floor_breakpoints(&[2, 3], (0.4, 1.6));
        let expected = [0.5, 2.0 / 3.0, 1.0, 4.0 / 3.0, 1.5];
        assert_eq!(bp.len(), expected.len());
        for (a, b) in bp.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn cells_cover_support() {
        let cells = decompose(&[5, 7], (0.5, 1.5));
        assert!((cells.first().unwrap().lo - 0.5).abs() < 1e-15);
        assert!((cells.last().unwrap().hi - 1.5).abs() < 1e-15);
        let total: f64 = cells.iter().map(Cell::width).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for w in cells.windows(2) {
            assert_eq!(w[0].hi, w[1].lo);
        }
    }

    #[test]
    fn floors_constant_on_cells() {
        let symbols = [3, 4, 9];
        for cell in decompose(&symbols, (0.3, 2.1)) {
            for &x in &symbols {
                let at_mid = floored_product(cell.midpoint(), x);
                // Probe near both edges; floors must not change inside.
                let eps = cell.width() * 1e-3;
                assert_eq!(floored_product(cell.lo + eps, x), at_mid);
                assert_eq!(floored_product(cell.hi - eps, x), at_mid);
            }
        }
    }

    #[test]
    fn zero_symbol_contributes_nothing() {
        assert!(floor_breakpoints(&[0], (0.5, 1.5)).is_empty());
        assert_eq!(decompose(&[0], (0.5, 1.5)).len(), 1);
    }
}
