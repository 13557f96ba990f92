//! Embedded Dormand–Prince 5(4) pair with PI step-size control, specialised to
//! the two-component light-bending system `y = (u, du/dφ)`.

use super::{ode_rhs, GeodesicError, GeodesicState};

/// Smallest step the controller may shrink to before giving up.
pub const MIN_STEP: f64 = 1e-14;

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

// Difference between the 5th-order weights (row 7 of A) and the embedded 4th-order ones.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - BETA * 0.75;

type Y = [f64; 2];

#[inline(always)]
fn f(y: Y, mass: f64) -> Y {
    let (a, b) = ode_rhs(
        GeodesicState {
            phi: 0.0,
            u: y[0],
            du_dphi: y[1],
        },
        mass,
    );
    [a, b]
}

#[inline(always)]
fn comb(y: Y, h: f64, terms: &[(f64, Y)]) -> Y {
    let mut out = y;
    for &(c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// Integrator that carries its step-size proposal and first-same-as-last
/// derivative from one window to the next.
#[derive(Debug, Clone)]
pub struct Integrator {
    state: GeodesicState,
    mass: f64,
    rel_tol: f64,
    abs_tol: f64,
    h: f64,
    err_prev: f64,
    k1: Y,
    accepted: u64,
    rejected: u64,
}

impl Integrator {
    pub fn new(state: GeodesicState, mass: f64, rel_tol: f64, abs_tol: f64) -> Self {
        let y = [state.u, state.du_dphi];
        Self {
            state,
            mass,
            rel_tol,
            abs_tol,
            h: f64::INFINITY,
            err_prev: 1e-4,
            k1: f(y, mass),
            accepted: 0,
            rejected: 0,
        }
    }

    pub fn state(&self) -> GeodesicState {
        self.state
    }

    pub fn accepted_steps(&self) -> u64 {
        self.accepted
    }

    pub fn rejected_steps(&self) -> u64 {
        self.rejected
    }

    /// Advance exactly `dphi` in φ. The last step of the window is shortened to
    /// land on the boundary.
    pub fn advance(&mut self, dphi: f64) -> Result<GeodesicState, GeodesicError> {
        let start = self.state.phi;
        let target = start + dphi;
        let mut phi = start;
        let mut y = [self.state.u, self.state.du_dphi];
        let mut k1 = self.k1;
        let mut h = self.h.min(dphi);

        loop {
            let remaining = target - phi;
            if remaining <= 0.0 {
                break;
            }
            let last = h >= remaining;
            let step = if last { remaining } else { h };

            let k2 = f(comb(y, step, &[(A21, k1)]), self.mass);
            let k3 = f(comb(y, step, &[(A31, k1), (A32, k2)]), self.mass);
            let k4 = f(comb(y, step, &[(A41, k1), (A42, k2), (A43, k3)]), self.mass);
            let k5 = f(
                comb(y, step, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]),
                self.mass,
            );
            let k6 = f(
                comb(
                    y,
                    step,
                    &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)],
                ),
                self.mass,
            );
            let y_new = comb(
                y,
                step,
                &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)],
            );
            let k7 = f(y_new, self.mass);

            let mut err = 0.0f64;
            for i in 0..2 {
                let e = step
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let scale = self.abs_tol + self.rel_tol * y[i].abs().max(y_new[i].abs());
                let ratio = e.abs() / scale;
                // Keep NaN so a poisoned step is rejected rather than ignored.
                if !(ratio <= err) {
                    err = ratio;
                }
            }

            if err.is_finite() && err <= 1.0 {
                let fac11 = err.powf(EXPO);
                let fac = (fac11 / self.err_prev.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let proposal = step / fac;
                self.err_prev = err.max(1e-4);
                self.accepted += 1;
                y = y_new;
                k1 = k7;
                if last {
                    phi = target;
                    // A truncated final step says little about the natural step size.
                    h = h.max(proposal);
                } else {
                    phi += step;
                    h = proposal;
                }
            } else {
                self.rejected += 1;
                let shrink = if err.is_finite() {
                    (err.powf(EXPO) / SAFETY).min(1.0 / FAC_MIN)
                } else {
                    1.0 / FAC_MIN
                };
                h = step / shrink;
                if h < MIN_STEP {
                    self.state = GeodesicState {
                        phi,
                        u: y[0],
                        du_dphi: y[1],
                    };
                    self.k1 = k1;
                    return Err(GeodesicError::StepSizeUnderflow { state: self.state });
                }
            }
        }

        self.state = GeodesicState {
            phi,
            u: y[0],
            du_dphi: y[1],
        };
        self.k1 = k1;
        self.h = h;
        Ok(self.state)
    }
}
