//! Dormand–Prince 5(4) with local extrapolation and FSAL.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::C64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Hard cap on accepted + rejected steps per call.
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 50_000_000,
        }
    }
}


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

/// Integrator state for an autonomous linear-in-time-segment system.
pub(crate) struct Dopri5 {
    ctl: StepControl,
    k: [Vec<C64>; 7],
    stage: Vec<C64>,
    y_new: Vec<C64>,
    fsal: bool,
    /// Step size proposed for the next step.
    pub h: f64,
    pub accepted: usize,
    pub rejected: usize,
}

impl Dopri5 {
    pub(crate) fn new(n: usize, ctl: StepControl) -> Self {
        let z = || vec![C64::new(0.0, 0.0); n];
        Dopri5 {
            ctl,
            k: [z(), z(), z(), z(), z(), z(), z()],
            stage: z(),
            y_new: z(),
            fsal: false,
            h: 0.0,
            accepted: 0,
            rejected: 0,
        }
    }

    /// The right-hand side changed (new segment); drop the cached derivative.
    pub(crate) fn reset_rhs(&mut self) {
        self.fsal = false;
    }

    /// Advances `y` from `*t` to exactly `t_end`. `post` runs after every
    /// accepted step and may modify the state in place.
    pub(crate) fn advance<F, P>(
        &mut self,
        f: &F,
        t: &mut f64,
        t_end: f64,
        y: &mut Vec<C64>,
        post: &mut P,
    ) -> Result<()>
    where
        F: Fn(&[C64], &mut [C64]),
        P: FnMut(f64, &mut [C64]) -> Result<()>,
    {
        if !self.fsal {
            f(y, &mut self.k[0]);
            self.fsal = true;
        }
        if self.h <= 0.0 {
            self.h = self.initial_step(y, t_end - *t);
        }
        let n = y.len();
        while *t < t_end {
            if self.accepted + self.rejected >= self.ctl.max_steps {
                return Err(Error::IntegrationFailure {
                    time: *t,
                    reason: "step budget exhausted".into(),
                });
            }
            let remaining = t_end - *t;
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h };
            if h <= f64::EPSILON * 16.0 * t.abs().max(t_end.abs()) && !last {
                return Err(Error::IntegrationFailure {
                    time: *t,
                    reason: format!("step size underflow (h = {h:e})"),
                });
            }

            let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
            let stage = &mut self.stage;
            for i in 0..n {
                stage[i] = y[i] + k1[i] * (h * A21);
            }
            f(stage, k2);
            for i in 0..n {
                stage[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * h;
            }
            f(stage, k3);
            for i in 0..n {
                stage[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * h;
            }
            f(stage, k4);
            for i in 0..n {
                stage[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * h;
            }
            f(stage, k5);
            for i in 0..n {
                stage[i] = y[i]
                    + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * h;
            }
            f(stage, k6);
            let y_new = &mut self.y_new;
            for i in 0..n {
                y_new[i] = y[i]
                    + (k1[i] * A71 + k3[i] * A73 + k4[i] * A74 + k5[i] * A75 + k6[i] * A76) * h;
            }
            f(y_new, k7);

            // max norm: every entry meets its own tolerance
            let mut err: f64 = 0.0;
            for i in 0..n {
                let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7)
                    * h;
                let sc = self.ctl.atol + self.ctl.rtol * y[i].norm().max(y_new[i].norm());
                err = err.max(e.norm() / sc);
            }

            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                *t = if last { t_end } else { *t + h };
                std::mem::swap(y, &mut self.y_new);
                post(*t, y)?;
                self.k.swap(0, 6);
                self.accepted += 1;
                // A clipped final step says nothing about the natural size.
                if !last {
                    self.h = h * factor;
                }
            } else {
                self.rejected += 1;
                self.h = h * factor.min(1.0);
            }
        }
        Ok(())
    }

    fn initial_step(&self, y: &[C64], span: f64) -> f64 {
        let scale = |i: usize| self.ctl.atol + self.ctl.rtol * y[i].norm();
        let n = y.len().max(1) as f64;
        let d0 = (y.iter().enumerate().map(|(i, v)| (v.norm() / scale(i)).powi(2)).sum::<f64>() / n).sqrt();
        let d1 = (self.k[0]
            .iter()
            .enumerate()
            .map(|(i, v)| (v.norm() / scale(i)).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        let h = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6 * span
        } else {
            0.01 * d0 / d1
        };
        h.min(span).max(f64::MIN_POSITIVE)
    }
}
