//! Dormand–Prince 5(4) stepper with PI step control and the standard
//! fourth-order continuous extension.
//!
//! The stepper only performs single adaptive steps; callers own the loop so
//! they can stop at events, switch right-hand sides, or renormalize the state
//! between steps.

use crate::error::{Error, Result};
use crate::scalar::Real;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Tolerances and limits for [`Dopri5`].
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions<T> {
    pub rtol: T,
    pub atol: T,
    pub h_max: T,
    pub h_min: T,
    /// Consecutive rejections allowed inside a single [`Dopri5::step`] call.
    pub max_rejects: usize,
}

impl<T: Real> OdeOptions<T> {
    pub fn new(tol: T) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            h_max: T::infinity(),
            h_min: T::lit(1e-14),
            max_rejects: 60,
        }
    }

    pub fn with_h_max(mut self, h_max: T) -> Self {
        self.h_max = h_max;
        self
    }
}

/// An accepted step together with the data needed for dense output.
#[derive(Debug, Clone)]
pub struct StepData<T, const N: usize> {
    pub t0: T,
    pub h: T,
    pub y0: [T; N],
    pub y1: [T; N],
    rcont: [[T; N]; 5],
}

impl<T: Real, const N: usize> StepData<T, N> {
    pub fn t1(&self) -> T {
        self.t0 + self.h
    }

    /// Continuous extension at `t ∈ [t0, t0 + h]`.
    pub fn dense(&self, t: T) -> [T; N] {
        let theta = (t - self.t0) / self.h;
        let theta1 = T::one() - theta;
        let r = &self.rcont;
        let mut out = [T::zero(); N];
        for i in 0..N {
            out[i] = r[0][i]
                + theta * (r[1][i] + theta1 * (r[2][i] + theta * (r[3][i] + theta1 * r[4][i])));
        }
        out
    }
}

/// Adaptive Dormand–Prince 5(4) stepper.
#[derive(Debug, Clone)]
pub struct Dopri5<T, const N: usize> {
    pub opts: OdeOptions<T>,
    err_prev: T,
    /// Right-hand side evaluations performed so far.
    pub evaluations: usize,
}

fn axpy<T: Real, const N: usize>(y: &[T; N], h: T, terms: &[(f64, &[T; N])]) -> [T; N] {
    let mut out = *y;
    for i in 0..N {
        let mut s = T::zero();
        for &(c, k) in terms {
            s = s + T::lit(c) * k[i];
        }
        out[i] = out[i] + h * s;
    }
    out
}

impl<T: Real, const N: usize> Dopri5<T, N> {
    pub fn new(opts: OdeOptions<T>) -> Self {
        Self {
            opts,
            err_prev: T::lit(1e-4),
            evaluations: 0,
        }
    }

    /// Initial step size heuristic (Hairer–Wanner, order 5).
    pub fn initial_step<F>(&mut self, f: &mut F, t: T, y: &[T; N], direction: T) -> T
    where
        F: FnMut(T, &[T; N]) -> [T; N],
    {
        let f0 = f(t, y);
        self.evaluations += 1;
        let (mut d0, mut d1) = (T::zero(), T::zero());
        for i in 0..N {
            let sc = self.opts.atol + self.opts.rtol * y[i].abs();
            d0 = d0 + (y[i] / sc).powi(2);
            d1 = d1 + (f0[i] / sc).powi(2);
        }
        let n = T::from_usize_lossy(N);
        d0 = (d0 / n).sqrt();
        d1 = (d1 / n).sqrt();
        let h0 = if d0 < T::lit(1e-5) || d1 < T::lit(1e-5) {
            T::lit(1e-6)
        } else {
            T::lit(0.01) * d0 / d1
        };
        let h0 = h0.min(self.opts.h_max);
        let y1 = axpy(y, h0 * direction, &[(1.0, &f0)]);
        let f1 = f(t + h0 * direction, &y1);
        self.evaluations += 1;
        let mut d2 = T::zero();
        for i in 0..N {
            let sc = self.opts.atol + self.opts.rtol * y[i].abs();
            d2 = d2 + ((f1[i] - f0[i]) / sc).powi(2);
        }
        d2 = (d2 / n).sqrt() / h0;
        let h1 = if d1.max(d2) <= T::lit(1e-15) {
            (h0 * T::lit(1e-3)).max(T::lit(1e-6))
        } else {
            (T::lit(0.01) / d1.max(d2)).powf(T::lit(0.2))
        };
        (T::lit(100.0) * h0).min(h1).min(self.opts.h_max)
    }

    /// Attempts steps from `(t, y)` with signed trial size `h` until one is
    /// accepted. Returns the accepted step and the suggested next signed size.
    pub fn step<F>(&mut self, f: &mut F, t: T, y: &[T; N], h: T) -> Result<(StepData<T, N>, T)>
    where
        F: FnMut(T, &[T; N]) -> [T; N],
    {
        let beta = T::lit(0.04);
        let expo1 = T::lit(0.2) - beta * T::lit(0.75);
        let safety = T::lit(0.9);
        let fac_min = T::lit(0.2);
        let fac_max = T::lit(10.0);

        let sign = if h < T::zero() { -T::one() } else { T::one() };
        let mut h = sign * h.abs().min(self.opts.h_max);
        for _ in 0..=self.opts.max_rejects {
            if h.abs() < self.opts.h_min {
                return Err(Error::StepFailure {
                    t: t.as_f64(),
                    h: h.as_f64(),
                });
            }
            let k1 = f(t, y);
            let k2 = f(t + T::lit(C2) * h, &axpy(y, h, &[(A21, &k1)]));
            let k3 = f(t + T::lit(C3) * h, &axpy(y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(
                t + T::lit(C4) * h,
                &axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            );
            let k5 = f(
                t + T::lit(C5) * h,
                &axpy(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = f(
                t + h,
                &axpy(
                    y,
                    h,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                ),
            );
            let y1 = axpy(
                y,
                h,
                &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            );
            let k7 = f(t + h, &y1);
            self.evaluations += 7;

            let mut err = T::zero();
            let mut finite = true;
            for i in 0..N {
                let e = h
                    * (T::lit(E1) * k1[i]
                        + T::lit(E3) * k3[i]
                        + T::lit(E4) * k4[i]
                        + T::lit(E5) * k5[i]
                        + T::lit(E6) * k6[i]
                        + T::lit(E7) * k7[i]);
                let sc = self.opts.atol + self.opts.rtol * y[i].abs().max(y1[i].abs());
                err = err + (e / sc).powi(2);
                finite &= y1[i].is_finite();
            }
            let err = (err / T::from_usize_lossy(N)).sqrt();

            if finite && err <= T::one() {
                let err_c = err.max(T::lit(1e-10));
                let fac = (err_c.powf(expo1) / self.err_prev.powf(beta) / safety)
                    .max(T::one() / fac_max)
                    .min(T::one() / fac_min);
                self.err_prev = err_c.max(T::lit(1e-4));
                let h_next = sign * (h.abs() / fac).min(self.opts.h_max);

                let mut rcont = [[T::zero(); N]; 5];
                for i in 0..N {
                    let ydiff = y1[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    rcont[0][i] = y[i];
                    rcont[1][i] = ydiff;
                    rcont[2][i] = bspl;
                    rcont[3][i] = ydiff - h * k7[i] - bspl;
                    rcont[4][i] = h
                        * (T::lit(D1) * k1[i]
                            + T::lit(D3) * k3[i]
                            + T::lit(D4) * k4[i]
                            + T::lit(D5) * k5[i]
                            + T::lit(D6) * k6[i]
                            + T::lit(D7) * k7[i]);
                }
                return Ok((
                    StepData {
                        t0: t,
                        h,
                        y0: *y,
                        y1,
                        rcont,
                    },
                    h_next,
                ));
            }
            let shrink = if finite {
                (err.powf(expo1) / safety).min(T::one() / fac_min)
            } else {
                T::lit(10.0)
            };
            h = h / shrink.max(T::one());
        }
        Err(Error::StepFailure {
            t: t.as_f64(),
            h: h.as_f64(),
        })
    }

    /// Integrates from `t0` to `t1` exactly (last step truncated to land on `t1`).
    pub fn integrate_to<F>(
        &mut self,
        f: &mut F,
        t0: T,
        y0: [T; N],
        t1: T,
        h_guess: Option<T>,
    ) -> Result<([T; N], T)>
    where
        F: FnMut(T, &[T; N]) -> [T; N],
    {
        let dir = if t1 >= t0 { T::one() } else { -T::one() };
        let mut t = t0;
        let mut y = y0;
        let mut h = match h_guess {
            Some(h) => dir * h.abs(),
            None => dir * self.initial_step(f, t0, &y0, dir),
        };
        let span = (t1 - t0).abs();
        let snap = T::lit(16.0) * T::epsilon() * (T::one() + t1.abs());
        while (t1 - t) * dir > snap {
            let remaining = t1 - t;
            let trial = if h.abs() >= remaining.abs() {
                remaining
            } else {
                h
            };
            let (step, h_next) = self.step(f, t, &y, trial)?;
            t = step.t1();
            y = step.y1;
            if (t1 - t).abs() <= snap {
                t = t1;
            }
            h = h_next;
            if span == T::zero() {
                break;
            }
        }
        Ok((y, h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth_accuracy() {
        let mut s = Dopri5::<f64, 1>::new(OdeOptions::new(1e-11));
        let mut f = |_t: f64, y: &[f64; 1]| [y[0]];
        let (y, _) = s.integrate_to(&mut f, 0.0, [1.0], 2.0, None).unwrap();
        assert!((y[0] - 2f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn dense_output_matches_exact_solution() {
        let mut s = Dopri5::<f64, 2>::new(OdeOptions::new(1e-10));
        let mut f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let mut t = 0.0;
        let mut y = [0.0, 1.0];
        let mut h = 0.1;
        let mut worst: f64 = 0.0;
        while t < 6.0 {
            let (step, hn) = s.step(&mut f, t, &y, h).unwrap();
            for j in 1..10 {
                let tt = step.t0 + step.h * (j as f64) / 10.0;
                let d = step.dense(tt);
                worst = worst
                    .max((d[0] - tt.sin()).abs())
                    .max((d[1] - tt.cos()).abs());
            }
            t = step.t1();
            y = step.y1;
            h = hn;
        }
        assert!(worst < 1e-8, "dense output error {worst}");
    }

    #[test]
    fn backward_integration() {
        let mut s = Dopri5::<f64, 1>::new(OdeOptions::new(1e-11));
        let mut f = |t: f64, _y: &[f64; 1]| [2.0 * t];
        let (y, _) = s.integrate_to(&mut f, 3.0, [9.0], 1.0, None).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-10);
    }
}
