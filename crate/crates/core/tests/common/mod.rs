//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Digits kept by the rational oracle after every Newton step.
const DIGITS: u32 = 60;

fn round_to_digits(x: &BigRational) -> BigRational {
    let scale = BigInt::from(10u32).pow(DIGITS);
    let scaled = x * BigRational::from_integer(scale.clone());
    BigRational::new(scaled.round().to_integer(), scale)
}

/// `√x` to about 60 significant digits by Newton iteration in exact
/// rationals, rounded after each step.
pub fn big_sqrt(x: &BigRational) -> BigRational {
    assert!(!x.is_negative());
    if x.is_zero() {
        return BigRational::zero();
    }
    let start = x.to_f64().unwrap().sqrt();
    let mut y = BigRational::from_float(start).unwrap();
    let two = BigRational::from_integer(BigInt::from(2));
    for _ in 0..8 {
        y = round_to_digits(&((&y + x / &y) / &two));
    }
    y
}

pub fn big(v: f64) -> BigRational {
    BigRational::from_float(v).unwrap()
}

/// `g(x) = (2/x)(√(h²+1) − h)`, `h = a1/(2x) + a2 x/2`, evaluated literally in
/// extended precision.
pub fn g_naive_extended(x: f64, a1: f64, a2: f64) -> f64 {
    let (x, a1, a2) = (big(x), big(a1), big(a2));
    let two = BigRational::from_integer(BigInt::from(2));
    let h = &a1 / (&two * &x) + &a2 * &x / &two;
    let root = big_sqrt(&(&h * &h + BigRational::one()));
    let g = (&two / &x) * (root - h);
    g.to_f64().unwrap()
}

/// Roots of `λ² − tλ + d = 0` as complex magnitudes; the spectral radius of
/// a 2×2 matrix with trace `t` and determinant `d`.
pub fn radius_2x2(t: f64, d: f64) -> f64 {
    let disc = t * t - 4.0 * d;
    if disc >= 0.0 {
        let s = disc.sqrt();
        ((t + s) / 2.0).abs().max(((t - s) / 2.0).abs())
    } else {
        d.abs().sqrt()
    }
}

/// Modal amplification radius from the characteristic polynomial of
/// `[[2 − 2ξ√μΔt − Δt²μ, 2ξ√μΔt − 1], [1, 0]]`.
pub fn modal_radius(mu: f64, xi: f64, dt: f64) -> f64 {
    let a = 2.0 * xi * mu.sqrt() * dt;
    radius_2x2(2.0 - a - dt * dt * mu, 1.0 - a)
}

/// Collocation scheme written out line by line with dense matrices.
pub struct DenseCollocation {
    pub p: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl DenseCollocation {
    /// Returns `(x̃, ṽ, v_P)` after `steps` steps from `(x̃0, ṽ0)`, zero load.
    pub fn run(
        &self,
        x0: &DVector<f64>,
        v0: &DVector<f64>,
        dt: f64,
        steps: usize,
    ) -> (DVector<f64>, DVector<f64>) {
        let pt = self.p.transpose();
        let pv = &pt * &self.v;
        let mp = &pt * &self.m * &self.p;
        let svd = pv.clone().svd(true, true);
        let ls = |b: &DVector<f64>| svd.solve(b, 1e-14).unwrap();
        let mut x = x0.clone();
        let mut v = v0.clone();
        let mut vp = &pv * v0;
        for _ in 0..steps {
            let f = -(&pt * &self.c * &self.v * &v) - &pt * &self.k * &self.v * &x;
            let mut a = f.clone();
            for i in 0..a.len() {
                a[i] /= mp[(i, i)];
            }
            vp += a * dt;
            let xn = ls(&(&pv * &x + &vp * dt));
            v = (&xn - &x) / dt;
            x = xn;
        }
        (x, v)
    }
}
