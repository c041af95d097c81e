//! Matrix exponential of small dense matrices by scaling and squaring
//! with a degree-13 Padé approximant.

use nalgebra::Matrix3;

const THETA_13: f64 = 5.371_920_351_148_152;

const B: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

fn one_norm(a: &Matrix3<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// `exp(a)` for a real 3x3 matrix.
pub fn expm3(a: &Matrix3<f64>) -> Matrix3<f64> {
    let norm = one_norm(a);
    if norm == 0.0 {
        return Matrix3::identity();
    }
    let s = if norm > THETA_13 { (norm / THETA_13).log2().ceil().max(0.0) as i32 } else { 0 };
    let a = a * 2f64.powi(-s);

    let id = Matrix3::identity();
    let a2 = a * a;
    let a4 = a2 * a2;
    let a6 = a2 * a4;
    let u = a * (a6 * (a6 * B[13] + a4 * B[11] + a2 * B[9]) + a6 * B[7] + a4 * B[5] + a2 * B[3] + id * B[1]);
    let v = a6 * (a6 * B[12] + a4 * B[10] + a2 * B[8]) + a6 * B[6] + a4 * B[4] + a2 * B[2] + id * B[0];

    let mut r = (v - u).lu().solve(&(v + u)).expect("Padé denominator is nonsingular for scaled input");
    for _ in 0..s {
        r = r * r;
    }
    r
}
