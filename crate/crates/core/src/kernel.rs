//! Scaled soft-edit-distance recurrence.
//!
//! Each DP cell holds the pair `(alpha, beta)` as significands sharing one
//! power-of-two exponent: `alpha = a * 2^e`, `beta = b * 2^e`. A cell is
//! computed in the frame of its largest-exponent predecessor and renormalized
//! when `b` leaves `[2^-512, 2^512]`.

use crate::alphabet::SequenceEncoding;

// 2^-512 and 2^512
pub(crate) const RENORM_LO: f64 = 7.458340731200207e-155;
pub(crate) const RENORM_HI: f64 = 1.3407807929942597e154;

/// Exact `2^k`, flushing to zero below the normal range and saturating above it.
#[inline]
pub(crate) fn pow2(k: i64) -> f64 {
    if k < -1022 {
        0.0
    } else if k > 1023 {
        f64::INFINITY
    } else {
        f64::from_bits(((k + 1023) as u64) << 52)
    }
}

/// Binary exponent of a positive finite normal value: `x = m * 2^k`, `m in [1, 2)`.
#[inline]
fn exponent_of(x: f64) -> i64 {
    debug_assert!(x.is_normal() && x > 0.0);
    ((x.to_bits() >> 52) & 0x7ff) as i64 - 1023
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Cell {
    pub a: f64,
    pub b: f64,
    pub e: i64,
}

impl Cell {
    pub(crate) const ORIGIN: Cell = Cell { a: 0.0, b: 1.0, e: 0 };

    /// `alpha / beta`; the shared exponent cancels.
    #[inline]
    pub(crate) fn ratio(&self) -> f64 {
        self.a / self.b
    }

    /// Boundary cell `(n, 0)` or `(0, n)`: `beta = e^{tau n}`, `alpha = n * beta`.
    pub(crate) fn boundary(n: usize, tau: f64) -> Cell {
        let x = tau * n as f64;
        let (b, e) = if x > -700.0 {
            (x.exp(), 0)
        } else {
            let log2 = x * std::f64::consts::LOG2_E;
            let e = log2.floor();
            ((log2 - e).exp2(), e as i64)
        };
        Cell { a: n as f64 * b, b, e }
    }

    #[inline]
    fn normalized(mut self) -> Cell {
        if !(RENORM_LO..=RENORM_HI).contains(&self.b) {
            let k = exponent_of(self.b);
            let s = pow2(-k);
            self.a *= s;
            self.b *= s;
            self.e += k;
        }
        self
    }
}

/// Per-temperature constants shared by every cell.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Temperature {
    pub tau: f64,
    pub e1: f64,
    pub e2: f64,
}

impl Temperature {
    pub(crate) fn new(tau: f64) -> Self {
        Self {
            tau,
            e1: tau.exp(),
            e2: (2.0 * tau).exp(),
        }
    }

    /// `e^{tau d} - e^{2 tau}` without cancellation.
    #[inline]
    pub(crate) fn diag_weight(&self, delta: f64) -> f64 {
        self.e2 * (self.tau * (delta - 2.0)).exp_m1()
    }
}

/// Half the L1 distance between two rows.
#[inline]
pub(crate) fn row_mismatch(r1: &[f64], r2: &[f64]) -> f64 {
    0.5 * r1
        .iter()
        .zip(r2)
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
}

/// Advances the recurrence by one interior cell.
///
/// Written so that swapping `up` and `left` gives a bit-identical result.
#[inline]
pub(crate) fn step(up: Cell, left: Cell, diag: Cell, delta: f64, t: &Temperature) -> Cell {
    let e = up.e.max(left.e).max(diag.e);
    let su = pow2(up.e - e);
    let sl = pow2(left.e - e);
    let sd = pow2(diag.e - e);
    let w = t.diag_weight(delta);

    let a_side = ((up.a + up.b) * su + (left.a + left.b) * sl) * t.e1;
    let a_diag = (diag.a * w + diag.b * (delta * w - (2.0 - delta) * t.e2)) * sd;
    let b_side = (up.b * su + left.b * sl) * t.e1;
    let b_diag = diag.b * w * sd;

    Cell {
        a: a_side + a_diag,
        b: b_side + b_diag,
        e,
    }
    .normalized()
}

/// Full DP state for one pair, kept for the reverse sweep.
#[derive(Clone, Debug)]
pub(crate) struct Grid {
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<Cell>,
    pub delta: Vec<f64>,
}

impl Grid {
    #[inline]
    pub(crate) fn at(&self, i: usize, j: usize) -> Cell {
        self.cells[i * (self.cols + 1) + j]
    }

    pub(crate) fn last(&self) -> Cell {
        self.at(self.rows, self.cols)
    }
}

pub(crate) fn fill_grid(x1: &SequenceEncoding, x2: &SequenceEncoding, t: &Temperature) -> Grid {
    let (n1, n2) = (x1.len(), x2.len());
    let width = n2 + 1;
    let mut cells = vec![Cell::ORIGIN; (n1 + 1) * width];
    let mut delta = vec![0.0; n1 * n2];
    for j in 1..=n2 {
        cells[j] = Cell::boundary(j, t.tau);
    }
    for i in 1..=n1 {
        cells[i * width] = Cell::boundary(i, t.tau);
        let r1 = x1.row(i - 1);
        for j in 1..=n2 {
            let d = row_mismatch(r1, x2.row(j - 1));
            delta[(i - 1) * n2 + (j - 1)] = d;
            cells[i * width + j] = step(
                cells[(i - 1) * width + j],
                cells[i * width + j - 1],
                cells[(i - 1) * width + j - 1],
                d,
                t,
            );
        }
    }
    Grid {
        rows: n1,
        cols: n2,
        cells,
        delta,
    }
}

/// Value-only pass keeping two live rows.
pub(crate) fn final_cell(x1: &SequenceEncoding, x2: &SequenceEncoding, t: &Temperature) -> Cell {
    let (n1, n2) = (x1.len(), x2.len());
    let mut prev: Vec<Cell> = (0..=n2).map(|j| Cell::boundary(j, t.tau)).collect();
    prev[0] = Cell::ORIGIN;
    let mut cur = prev.clone();
    for i in 1..=n1 {
        cur[0] = Cell::boundary(i, t.tau);
        let r1 = x1.row(i - 1);
        for j in 1..=n2 {
            let d = row_mismatch(r1, x2.row(j - 1));
            cur[j] = step(prev[j], cur[j - 1], prev[j - 1], d, t);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[n2]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renorm_bounds() {
        assert_eq!(RENORM_LO, 2f64.powi(-512));
        assert_eq!(RENORM_HI, 2f64.powi(512));
        assert_eq!(pow2(0), 1.0);
        assert_eq!(pow2(-3), 0.125);
        assert_eq!(pow2(-2000), 0.0);
    }

    #[test]
    fn boundary_matches_exp() {
        let c = Cell::boundary(3, -2.0);
        assert_eq!(c.e, 0);
        assert!((c.b - (-6.0f64).exp()).abs() < 1e-18);
        assert!((c.ratio() - 3.0).abs() < 1e-15);

        // split representation far below the f64 range
        let c = Cell::boundary(1000, -4.0);
        let log_beta = c.b.ln() + c.e as f64 * std::f64::consts::LN_2;
        assert!((log_beta + 4000.0).abs() < 1e-9);
        assert!((c.ratio() - 1000.0).abs() < 1e-12);
    }

    #[test]
    fn normalization_preserves_ratio() {
        let c = Cell { a: 3.0e-200, b: 1.0e-200, e: 5 }.normalized();
        assert!(c.b >= 1.0 && c.b < 2.0);
        assert!((c.ratio() - 3.0).abs() < 1e-15);
        let log2_beta = c.b.log2() + c.e as f64;
        assert!((log2_beta - (1.0e-200f64.log2() + 5.0)).abs() < 1e-9);
    }
}
