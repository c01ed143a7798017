//! Reverse-mode gradients of SED and SED⁰ with respect to both encodings.
//!
//! The forward pass retains the full scaled grid. Adjoints are kept in the
//! reciprocal scale of their cell (`alpha_bar = abar * 2^-e`), so products of
//! a forward significand with an adjoint significand need no rescaling.

use crate::alphabet::SequenceEncoding;
use crate::error::{Error, Result};
use crate::kernel::{self, pow2, Temperature};
use crate::metric::SedParams;

#[derive(Clone, Debug, PartialEq)]
pub struct SedGradient {
    /// `L1 x |G|`, row-major.
    pub d_x1: Vec<f64>,
    /// `L2 x |G|`, row-major.
    pub d_x2: Vec<f64>,
    pub value: f64,
}

struct PairGrad {
    value: f64,
    g1: Vec<f64>,
    g2: Vec<f64>,
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn pair_grad(x1: &SequenceEncoding, x2: &SequenceEncoding, t: &Temperature) -> PairGrad {
    let grid = kernel::fill_grid(x1, x2, t);
    let (n1, n2) = (grid.rows, grid.cols);
    let g = x1.alphabet_size();
    let mut g1 = vec![0.0; n1 * g];
    let mut g2 = vec![0.0; n2 * g];
    let last = grid.last();
    let value = last.ratio();
    if n1 == 0 || n2 == 0 {
        return PairGrad { value, g1, g2 };
    }

    let width = n2 + 1;
    let mut abar = vec![0.0; grid.cells.len()];
    let mut bbar = vec![0.0; grid.cells.len()];
    // d(a/b)/da = 1/b, d(a/b)/db = -a/b^2
    abar[n1 * width + n2] = 1.0 / last.b;
    bbar[n1 * width + n2] = -last.a / (last.b * last.b);

    for i in (1..=n1).rev() {
        let r1 = x1.row(i - 1);
        for j in (1..=n2).rev() {
            let here = i * width + j;
            let (ac, bc) = (abar[here], bbar[here]);
            let c = grid.cells[here];
            let iu = here - width;
            let il = here - 1;
            let id = iu - 1;
            let (up, left, diag) = (grid.cells[iu], grid.cells[il], grid.cells[id]);
            let ru = pow2(up.e - c.e);
            let rl = pow2(left.e - c.e);
            let rd = pow2(diag.e - c.e);

            let delta = grid.delta[(i - 1) * n2 + (j - 1)];
            let w = t.diag_weight(delta);
            let e_delta = (t.tau * delta).exp();

            let side = (ac + bc) * t.e1;
            abar[iu] += ac * t.e1 * ru;
            bbar[iu] += side * ru;
            abar[il] += ac * t.e1 * rl;
            bbar[il] += side * rl;
            abar[id] += ac * w * rd;
            bbar[id] += (ac * (delta * w - (2.0 - delta) * t.e2) + bc * w) * rd;

            let d_delta = rd
                * e_delta
                * (ac * (diag.b * (1.0 + t.tau * delta) + t.tau * diag.a) + bc * diag.b * t.tau);
            if d_delta == 0.0 {
                continue;
            }
            let half = 0.5 * d_delta;
            let r2 = x2.row(j - 1);
            let o1 = (i - 1) * g;
            let o2 = (j - 1) * g;
            for k in 0..g {
                let s = sign(r1[k] - r2[k]) * half;
                g1[o1 + k] += s;
                g2[o2 + k] -= s;
            }
        }
    }
    PairGrad { value, g1, g2 }
}

/// Gradient of `SED(x, x)` as a function of `x` (both argument slots move).
pub(crate) fn self_grad(x: &SequenceEncoding, t: &Temperature) -> (f64, Vec<f64>) {
    let pg = pair_grad(x, x, t);
    let g = pg.g1.iter().zip(&pg.g2).map(|(a, b)| a + b).collect();
    (pg.value, g)
}

/// Gradient of `SED(x1, x2)` with respect to `x2` only, plus the value.
pub(crate) fn second_arg_grad(
    x1: &SequenceEncoding,
    x2: &SequenceEncoding,
    t: &Temperature,
) -> (f64, Vec<f64>) {
    let pg = pair_grad(x1, x2, t);
    (pg.value, pg.g2)
}

/// Value and gradient of SED, or of SED⁰ when `unbiased` is set.
///
/// Gradients are those of the unconstrained matrix function; a kink of the
/// absolute value (equal entries) contributes zero.
pub fn sed_value_grad(
    x1: &SequenceEncoding,
    x2: &SequenceEncoding,
    p: SedParams,
    unbiased: bool,
) -> Result<SedGradient> {
    if x1.alphabet_size() != x2.alphabet_size() {
        return Err(Error::AlphabetMismatch {
            left: x1.alphabet_size(),
            right: x2.alphabet_size(),
        });
    }
    let t = Temperature::new(p.tau());
    let cross = pair_grad(x1, x2, &t);
    if !unbiased {
        return Ok(SedGradient {
            d_x1: cross.g1,
            d_x2: cross.g2,
            value: cross.value,
        });
    }
    let (v1, s1) = self_grad(x1, &t);
    let (v2, s2) = self_grad(x2, &t);
    let d_x1 = cross.g1.iter().zip(&s1).map(|(c, s)| c - 0.5 * s).collect();
    let d_x2 = cross.g2.iter().zip(&s2).map(|(c, s)| c - 0.5 * s).collect();
    Ok(SedGradient {
        d_x1,
        d_x2,
        value: cross.value - 0.5 * (v1 + v2),
    })
}

fn objective(x1: &SequenceEncoding, x2: &SequenceEncoding, p: SedParams, unbiased: bool) -> f64 {
    let cross = crate::metric::sed_unchecked(x1, x2, p);
    if unbiased {
        let s1 = crate::metric::sed_unchecked(x1, x1, p);
        let s2 = crate::metric::sed_unchecked(x2, x2, p);
        cross - 0.5 * (s1 + s2)
    } else {
        cross
    }
}

/// Central differences `(f(x + h e) - f(x - h e)) / 2h` for every entry.
///
/// Perturbed rows are not renormalized.
pub fn finite_diff_grad(
    x1: &SequenceEncoding,
    x2: &SequenceEncoding,
    p: SedParams,
    unbiased: bool,
    h: f64,
) -> Result<SedGradient> {
    if x1.alphabet_size() != x2.alphabet_size() {
        return Err(Error::AlphabetMismatch {
            left: x1.alphabet_size(),
            right: x2.alphabet_size(),
        });
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    let central = |which: usize, idx: usize| {
        let mut plus = if which == 0 { x1.clone() } else { x2.clone() };
        let mut minus = plus.clone();
        plus.as_mut_slice()[idx] += h;
        minus.as_mut_slice()[idx] -= h;
        let (fp, fm) = if which == 0 {
            (objective(&plus, x2, p, unbiased), objective(&minus, x2, p, unbiased))
        } else {
            (objective(x1, &plus, p, unbiased), objective(x1, &minus, p, unbiased))
        };
        (fp - fm) / (2.0 * h)
    };
    Ok(SedGradient {
        d_x1: (0..x1.as_slice().len()).map(|i| central(0, i)).collect(),
        d_x2: (0..x2.as_slice().len()).map(|i| central(1, i)).collect(),
        value: objective(x1, x2, p, unbiased),
    })
}

/// Marks entries sitting on a kink of some `|X[i,k] - Y[j,k]|` term within `tol`.
///
/// With `unbiased`, the self-distance terms add row pairs within each input.
pub fn tie_mask(
    x1: &SequenceEncoding,
    x2: &SequenceEncoding,
    unbiased: bool,
    tol: f64,
) -> (Vec<bool>, Vec<bool>) {
    let g = x1.alphabet_size();
    let near = |a: f64, b: f64| (a - b).abs() <= tol;
    let mut m1 = vec![false; x1.as_slice().len()];
    let mut m2 = vec![false; x2.as_slice().len()];
    for (i, r1) in x1.rows().enumerate() {
        for (j, r2) in x2.rows().enumerate() {
            for k in 0..g {
                if near(r1[k], r2[k]) {
                    m1[i * g + k] = true;
                    m2[j * g + k] = true;
                }
            }
        }
    }
    if unbiased {
        for (x, m) in [(x1, &mut m1), (x2, &mut m2)] {
            for (i, ri) in x.rows().enumerate() {
                for (j, rj) in x.rows().enumerate() {
                    if i == j {
                        continue;
                    }
                    for k in 0..g {
                        if near(ri[k], rj[k]) {
                            m[i * g + k] = true;
                        }
                    }
                }
            }
        }
    }
    (m1, m2)
}

/// Outcome of comparing analytic and finite-difference gradients.
#[derive(Clone, Debug)]
pub struct GradientCheck {
    /// Largest `|analytic - numeric| / max(|numeric|, floor)` over non-tie entries.
    pub max_rel_error: f64,
    pub checked: usize,
    pub ties_excluded: usize,
}

/// Validates [`sed_value_grad`] against [`finite_diff_grad`], skipping tie entries.
///
/// Ties are detected with tolerance `2h` since a perturbation of size `h`
/// can cross a kink that close.
pub fn gradient_check(
    x1: &SequenceEncoding,
    x2: &SequenceEncoding,
    p: SedParams,
    unbiased: bool,
    h: f64,
    floor: f64,
) -> Result<GradientCheck> {
    let analytic = sed_value_grad(x1, x2, p, unbiased)?;
    let numeric = finite_diff_grad(x1, x2, p, unbiased, h)?;
    let (t1, t2) = tie_mask(x1, x2, unbiased, 2.0 * h);
    let mut report = GradientCheck {
        max_rel_error: 0.0,
        checked: 0,
        ties_excluded: 0,
    };
    let pairs = analytic
        .d_x1
        .iter()
        .zip(&numeric.d_x1)
        .zip(&t1)
        .chain(analytic.d_x2.iter().zip(&numeric.d_x2).zip(&t2));
    for ((a, n), tie) in pairs {
        if *tie {
            report.ties_excluded += 1;
            continue;
        }
        report.checked += 1;
        let rel = (a - n).abs() / n.abs().max(floor);
        report.max_rel_error = report.max_rel_error.max(rel);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::{encode_one_hot, Alphabet};
    use crate::metric::{sed, sed_unbiased};

    fn oh(s: &str) -> SequenceEncoding {
        encode_one_hot(s, &Alphabet::dna()).unwrap()
    }

    fn p(t: f64) -> SedParams {
        SedParams::new(t).unwrap()
    }

    fn soft(rows: &[[f64; 4]]) -> SequenceEncoding {
        SequenceEncoding::from_rows(rows.iter().flatten().copied().collect(), 4).unwrap()
    }

    #[test]
    fn value_matches_metric() {
        let x1 = soft(&[[0.1, 0.2, 0.3, 0.4], [0.7, 0.1, 0.1, 0.1], [0.25, 0.25, 0.4, 0.1]]);
        let x2 = soft(&[[0.6, 0.2, 0.1, 0.1], [0.05, 0.05, 0.05, 0.85]]);
        let g = sed_value_grad(&x1, &x2, p(-2.0), false).unwrap();
        assert_eq!(g.value, sed(&x1, &x2, p(-2.0)).unwrap());
        assert_eq!(g.d_x1.len(), 12);
        assert_eq!(g.d_x2.len(), 8);
        let u = sed_value_grad(&x1, &x2, p(-2.0), true).unwrap();
        assert!((u.value - sed_unbiased(&x1, &x2, p(-2.0)).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn one_hot_pair_matches_finite_differences() {
        let check = gradient_check(&oh("A"), &oh("C"), p(-1.0), false, 1e-5, 1e-3).unwrap();
        assert_eq!(check.ties_excluded, 4);
        assert_eq!(check.checked, 4);
        assert!(check.max_rel_error < 1e-6, "{check:?}");
    }

    #[test]
    fn unbiased_stationary_at_coincidence() {
        let x = soft(&[[0.1, 0.2, 0.3, 0.4], [0.7, 0.1, 0.1, 0.1]]);
        let g = sed_value_grad(&x, &x, p(-3.0), true).unwrap();
        assert!(g.value.abs() <= 1e-12);
        for (a, b) in g.d_x1.iter().zip(&g.d_x2) {
            assert!((a + b).abs() <= 1e-9);
        }
    }

    #[test]
    fn empty_inputs_have_empty_or_zero_gradients() {
        let g = sed_value_grad(&oh(""), &oh("ACG"), p(-2.0), false).unwrap();
        assert!(g.d_x1.is_empty());
        assert_eq!(g.d_x2, vec![0.0; 12]);
        assert!((g.value - 3.0).abs() < 1e-15);
    }

    #[test]
    fn central_difference_is_second_order() {
        let x1 = soft(&[[0.1, 0.2, 0.3, 0.4], [0.6, 0.15, 0.15, 0.1]]);
        let x2 = soft(&[[0.55, 0.25, 0.12, 0.08]]);
        let exact = sed_value_grad(&x1, &x2, p(-1.5), false).unwrap();
        let e1 = finite_diff_grad(&x1, &x2, p(-1.5), false, 1e-3).unwrap();
        let e2 = finite_diff_grad(&x1, &x2, p(-1.5), false, 2e-3).unwrap();
        for ((a, f1), f2) in exact.d_x1.iter().zip(&e1.d_x1).zip(&e2.d_x1) {
            let err1 = (a - f1).abs();
            let err2 = (a - f2).abs();
            // quartering of the error, with slack for roundoff
            assert!(err2 <= 4.5 * err1 + 1e-10, "{err1} {err2}");
            assert!(err1 < 1e-5);
        }
    }

    #[test]
    fn rejects_bad_step() {
        assert!(finite_diff_grad(&oh("A"), &oh("A"), p(-1.0), false, 0.0).is_err());
    }
}
