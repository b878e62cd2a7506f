//! Globally adaptive Gauss–Kronrod (7/15) integration over user panels,
//! plus mapped semi-infinite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

#[derive(Clone, Copy, Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn gk15<F: FnMut(f64) -> Result<f64>>(f: &mut F, a: f64, b: f64) -> Result<Panel> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs = kronrod.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = kronrod * 0.5;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kronrod * half;
    let asc = asc * half.abs();
    let abs = abs * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    let round = 50.0 * f64::EPSILON * abs;
    if round > error {
        error = round;
    }
    Ok(Panel { a, b, value, error })
}

/// Integrates `f` over `[breaks[0], breaks[last]]`, starting from the
/// panels between consecutive breakpoints and bisecting the panel with the
/// largest error estimate until `error ≤ max(abs_tol, rel_tol·|value|)`.
pub fn integrate<F>(mut f: F, breaks: &[f64], rel_tol: f64, abs_tol: f64, max_panels: usize) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    if breaks.len() < 2 {
        return Err(Error::EmptyInput("integration breakpoints"));
    }
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            heap.push(gk15(&mut f, w[0], w[1])?);
        }
    }
    let totals = |heap: &BinaryHeap<Panel>| {
        let mut panels: Vec<&Panel> = heap.iter().collect();
        panels.sort_by(|x, y| x.a.total_cmp(&y.a));
        panels
            .iter()
            .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error))
    };
    let (mut value, mut error) = totals(&heap);
    while error > abs_tol.max(rel_tol * value.abs()) {
        if heap.len() >= max_panels {
            return Err(Error::QuadratureNotConverged {
                estimate: value,
                error,
                panels: heap.len(),
            });
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // panel cannot be split further in floating point
            return Err(Error::QuadratureNotConverged {
                estimate: value,
                error,
                panels: heap.len() + 1,
            });
        }
        let left = gk15(&mut f, worst.a, mid)?;
        let right = gk15(&mut f, mid, worst.b)?;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if heap.len() % 64 == 0 {
            (value, error) = totals(&heap);
        }
    }
    let (value, error) = totals(&heap);
    Ok(Estimate {
        value,
        error,
        panels: heap.len(),
    })
}

/// Integrates over `[start, ∞)` (`direction = 1.0`) or `(-∞, start]`
/// (`direction = -1.0`) through `x = start ± scale·t/(1-t)`.
pub fn integrate_tail<F>(
    mut f: F,
    start: f64,
    direction: f64,
    scale: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_panels: usize,
) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mapped = |t: f64| {
        let u = 1.0 - t;
        f(start + direction * scale * t / u).map(|y| y * scale / (u * u))
    };
    integrate(mapped, &[0.0, 1.0], rel_tol, abs_tol, max_panels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let est = integrate(|x| Ok(x.powi(5) - 2.0 * x), &[0.0, 2.0], 1e-12, 0.0, 10).unwrap();
        assert!((est.value - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn narrow_lorentzian() {
        let w = 1e-4;
        let f = |x: f64| Ok(w / (x * x + w * w));
        let est = integrate(f, &[-1.0, 0.0, 1.0], 1e-10, 0.0, 10_000).unwrap();
        let exact = 2.0 * (1.0 / w).atan();
        assert!((est.value - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn semi_infinite_tail() {
        // ∫_1^∞ dx/x⁴ = 1/3
        let est = integrate_tail(|x| Ok(x.powi(-4)), 1.0, 1.0, 1.0, 1e-12, 0.0, 1000).unwrap();
        assert!((est.value - 1.0 / 3.0).abs() < 1e-12);
        // ∫_{-∞}^0 dx/(1+x²) = π/2
        let est = integrate_tail(|x| Ok(1.0 / (1.0 + x * x)), 0.0, -1.0, 1.0, 1e-12, 0.0, 1000).unwrap();
        assert!((est.value - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn budget_exhaustion_reports_partial_estimate() {
        let f = |x: f64| Ok(if x > 0.3 { 1.0 } else { 0.0 });
        match integrate(f, &[0.0, 1.0], 1e-15, 0.0, 4) {
            Err(Error::QuadratureNotConverged { estimate, panels, .. }) => {
                assert!(estimate > 0.5 && estimate < 0.9);
                assert_eq!(panels, 4);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
