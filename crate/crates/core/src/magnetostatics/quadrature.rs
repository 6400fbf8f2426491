//! Adaptive Gauss–Kronrod (7/15) quadrature for vector-valued integrands.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances and refinement limit for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub max_depth: u32,
}

/// Integrates `f` over `[a, b]`, bisecting until every panel's Kronrod–Gauss
/// difference is below its share of `abs_tol`.
pub fn integrate<const N: usize, F>(mut f: F, a: f64, b: f64, opts: QuadratureOptions) -> Result<[f64; N]>
where
    F: FnMut(f64) -> Result<[f64; N]>,
{
    let mut total = [0.0; N];
    panel(&mut f, a, b, opts.abs_tol, opts.max_depth, &mut total)?;
    Ok(total)
}

fn panel<const N: usize, F>(f: &mut F, a: f64, b: f64, tol: f64, depth: u32, acc: &mut [f64; N]) -> Result<()>
where
    F: FnMut(f64) -> Result<[f64; N]>,
{
    let (kronrod, gauss) = gk15(f, a, b)?;
    if kronrod.iter().any(|v| !v.is_finite()) {
        return Err(Error::Oracle(format!("non-finite integrand on [{a:.6e}, {b:.6e}]")));
    }
    let err = kronrod
        .iter()
        .zip(gauss.iter())
        .map(|(k, g)| (k - g).abs())
        .fold(0.0, f64::max);
    if err <= tol || (b - a).abs() < 1e-15 {
        for (slot, v) in acc.iter_mut().zip(kronrod.iter()) {
            *slot += v;
        }
        return Ok(());
    }
    if depth == 0 {
        return Err(Error::Oracle(format!(
            "no convergence on [{a:.6e}, {b:.6e}]: error estimate {err:.3e} > {tol:.3e}"
        )));
    }
    let mid = 0.5 * (a + b);
    panel(f, a, mid, 0.5 * tol, depth - 1, acc)?;
    panel(f, mid, b, 0.5 * tol, depth - 1, acc)
}

fn gk15<const N: usize, F>(f: &mut F, a: f64, b: f64) -> Result<([f64; N], [f64; N])>
where
    F: FnMut(f64) -> Result<[f64; N]>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kronrod = [0.0; N];
    let mut gauss = [0.0; N];

    let fc = f(center)?;
    for c in 0..N {
        kronrod[c] = WGK[7] * fc[c];
        gauss[c] = WG[3] * fc[c];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        for c in 0..N {
            let s = f1[c] + f2[c];
            kronrod[c] += WGK[j] * s;
            // Gauss nodes are the odd-indexed Kronrod nodes.
            if j % 2 == 1 {
                gauss[c] += WG[j / 2] * s;
            }
        }
    }
    for c in 0..N {
        kronrod[c] *= half;
        gauss[c] *= half;
    }
    Ok((kronrod, gauss))
}

#[cfg(test)]
mod tests {
    use super::*;

    const OPTS: QuadratureOptions = QuadratureOptions {
        abs_tol: 1e-13,
        max_depth: 30,
    };

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| Ok([x.powi(5) - 2.0 * x, 1.0]), 0.0, 2.0, OPTS).unwrap();
        assert!((r[0] - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
        assert!((r[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn peaked_integrand_refines() {
        // ∫ 1/(x² + ε²) over [-1, 1] = 2 atan(1/ε)/ε
        let eps = 1e-3;
        let r = integrate(|x| Ok([1.0 / (x * x + eps * eps)]), -1.0, 1.0, QuadratureOptions { abs_tol: 1e-8, max_depth: 40 }).unwrap();
        let exact = 2.0 * (1.0 / eps).atan() / eps;
        assert!((r[0] - exact).abs() / exact < 1e-10);
    }

    #[test]
    fn depth_exhaustion_is_an_error() {
        let r = integrate(|x: f64| Ok([1.0 / x.abs().sqrt()]), -1.0, 1.0, QuadratureOptions { abs_tol: 1e-14, max_depth: 3 });
        assert!(matches!(r, Err(Error::Oracle(_))));
    }
}
