//! 15-point Gauss–Kronrod panel rule with the embedded 7-point Gauss rule
//! as error estimator.

use crate::error::Result;
use crate::series::C64;

use super::PanelEval;

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
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];

// weights of the Gauss points XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// `f` returns the integrand value and an absolute error bound on it (zero
/// for exact evaluations); the bounds are integrated into `noise`.
pub(crate) fn gk15(f: &impl Fn(f64) -> Result<(C64, f64)>, a: f64, b: f64) -> Result<PanelEval> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut vals = [C64::new(0.0, 0.0); 15];
    let mut errs = [0.0; 15];
    (vals[7], errs[7]) = f(c)?;
    for i in 0..7 {
        (vals[i], errs[i]) = f(c - h * XGK[i])?;
        (vals[14 - i], errs[14 - i]) = f(c + h * XGK[i])?;
    }
    let mut noise = errs[7] * WGK[7];
    for i in 0..7 {
        noise += (errs[i] + errs[14 - i]) * WGK[i];
    }
    let mut kron = vals[7] * WGK[7];
    let mut gauss = vals[7] * WG[3];
    let mut abs = vals[7].norm() * WGK[7];
    for i in 0..7 {
        let pair = vals[i] + vals[14 - i];
        kron += pair * WGK[i];
        abs += (vals[i].norm() + vals[14 - i].norm()) * WGK[i];
        if i % 2 == 1 {
            gauss += pair * WG[i / 2];
        }
    }
    let mean = kron * 0.5;
    let mut asc = (vals[7] - mean).norm() * WGK[7];
    for i in 0..7 {
        asc += ((vals[i] - mean).norm() + (vals[14 - i] - mean).norm()) * WGK[i];
    }
    let asc = asc * h;
    let mut err = ((kron - gauss) * h).norm();
    if asc != 0.0 && err != 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    let abs = abs * h;
    // roundoff floor
    err = err.max(10.0 * f64::EPSILON * abs);
    Ok(PanelEval {
        value: kron * h,
        err,
        abs,
        noise: noise * h,
    })
}
