//! Dormand–Prince 5(4) integrator with dense output and domain-exit events.

use crate::error::Result;

// Butcher tableau; the system is autonomous so the nodes are not needed.
const A21: f64 = 0.2;
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

// Difference between the 5th and 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Dense output.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;
/// Width in `t` to which domain exits are bracketed.
pub const EVENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    Completed,
    /// Left the domain; `t` is the last time bracketed inside.
    Escaped { t: f64 },
    StepFailure { t: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub termination: Termination,
    pub t: f64,
    pub y: Vec<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

/// Where `observe` is called from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Point {
    Sample,
    StepEnd,
}

struct Dense {
    t0: f64,
    h: f64,
    cont: [Vec<f64>; 5],
}

impl Dense {
    fn at(&self, t: f64, out: &mut [f64]) {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let [c0, c1, c2, c3, c4] = &self.cont;
        for i in 0..out.len() {
            out[i] = c0[i] + theta * (c1[i] + theta1 * (c2[i] + theta * (c3[i] + theta1 * c4[i])));
        }
    }
}

fn error_norm(y: &[f64], y_new: &[f64], err: &[f64], ctrl: &StepControl) -> f64 {
    let n = y.len() as f64;
    let sum: f64 = y
        .iter()
        .zip(y_new)
        .zip(err)
        .map(|((a, b), e)| {
            let sk = ctrl.abs_tol + ctrl.rel_tol * a.abs().max(b.abs());
            (e / sk).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

/// Integrates `y' = f(y)` from `t = 0` to `t_end`.
///
/// `observe` sees every requested sample time (by dense interpolation, or the
/// exact step endpoint when they coincide) and every accepted step end.
/// When an accepted step ends outside `inside`, the exit is bracketed on the
/// dense interpolant and integration stops there.
pub fn integrate<F, I, O>(
    mut rhs: F,
    y0: &[f64],
    t_end: f64,
    ctrl: &StepControl,
    inside: I,
    sample_times: &[f64],
    mut observe: O,
) -> Outcome
where
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
    I: Fn(&[f64]) -> bool,
    O: FnMut(f64, &[f64], Point),
{
    let dim = y0.len();
    let mut t = 0.0;
    let mut y = y0.to_vec();
    let mut next_sample = 0;
    let emit_samples_upto = |upto: f64, inclusive_end: Option<(&[f64], f64)>, dense: Option<&Dense>, next: &mut usize, observe: &mut O| {
        let mut buf = vec![0.0; dim];
        while *next < sample_times.len() && sample_times[*next] <= upto {
            let ts = sample_times[*next];
            match (inclusive_end, dense) {
                (Some((y_end, t_e)), _) if ts == t_e => observe(ts, y_end, Point::Sample),
                (_, Some(d)) => {
                    d.at(ts, &mut buf);
                    observe(ts, &buf, Point::Sample);
                }
                _ => observe(ts, y0, Point::Sample),
            }
            *next += 1;
        }
    };
    emit_samples_upto(0.0, Some((y0, 0.0)), None, &mut next_sample, &mut observe);

    let finish = |termination, t, y, accepted, rejected| Outcome {
        termination,
        t,
        y,
        accepted_steps: accepted,
        rejected_steps: rejected,
    };

    let mut k1 = vec![0.0; dim];
    if rhs(&y, &mut k1).is_err() {
        return finish(Termination::StepFailure { t: 0.0 }, 0.0, y, 0, 0);
    }
    if t_end <= 0.0 {
        return finish(Termination::Completed, 0.0, y, 0, 0);
    }
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut k5 = vec![0.0; dim];
    let mut k6 = vec![0.0; dim];
    let mut k7 = vec![0.0; dim];
    let mut stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut err = vec![0.0; dim];

    let mut h = initial_step(&mut rhs, &y, &k1, t_end, ctrl, &mut stage, &mut k2);
    let mut fac_old: f64 = 1e-4;
    let mut rejected_last = false;
    let mut accepted = 0usize;
    let mut rejected = 0usize;

    loop {
        if accepted + rejected >= ctrl.max_steps {
            return finish(Termination::StepFailure { t }, t, y, accepted, rejected);
        }
        let h_min = 16.0 * f64::EPSILON * t.abs().max(t_end.abs() * 1e-6).max(f64::MIN_POSITIVE);
        if h < h_min {
            return finish(Termination::StepFailure { t }, t, y, accepted, rejected);
        }
        let mut last = false;
        if t + 1.01 * h >= t_end {
            h = t_end - t;
            last = true;
        }

        let stages_ok = (|| -> Result<()> {
            for i in 0..dim {
                stage[i] = y[i] + h * A21 * k1[i];
            }
            rhs(&stage, &mut k2)?;
            for i in 0..dim {
                stage[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            rhs(&stage, &mut k3)?;
            for i in 0..dim {
                stage[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            rhs(&stage, &mut k4)?;
            for i in 0..dim {
                stage[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            rhs(&stage, &mut k5)?;
            for i in 0..dim {
                stage[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            rhs(&stage, &mut k6)?;
            for i in 0..dim {
                y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            rhs(&y_new, &mut k7)?;
            Ok(())
        })()
        .is_ok();

        if !stages_ok {
            rejected += 1;
            rejected_last = true;
            h *= 0.25;
            continue;
        }

        for i in 0..dim {
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let e = error_norm(&y, &y_new, &err, ctrl);
        if !e.is_finite() {
            rejected += 1;
            rejected_last = true;
            h *= 0.25;
            continue;
        }

        // PI step-size controller.
        let fac11 = e.powf(0.2 - BETA * 0.75);
        let fac = (fac11 / fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
        let mut h_new = h / fac;

        if e > 1.0 {
            rejected += 1;
            rejected_last = true;
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            continue;
        }

        accepted += 1;
        fac_old = e.max(1e-4);
        let dense = Dense {
            t0: t,
            h,
            cont: {
                let mut c0 = vec![0.0; dim];
                let mut c1 = vec![0.0; dim];
                let mut c2 = vec![0.0; dim];
                let mut c3 = vec![0.0; dim];
                let mut c4 = vec![0.0; dim];
                for i in 0..dim {
                    let ydiff = y_new[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    c0[i] = y[i];
                    c1[i] = ydiff;
                    c2[i] = bspl;
                    c3[i] = ydiff - h * k7[i] - bspl;
                    c4[i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                [c0, c1, c2, c3, c4]
            },
        };
        let t_new = if last { t_end } else { t + h };

        if !inside(&y_new) {
            // Bracket the exit on the interpolant.
            let mut lo = t;
            let mut hi = t_new;
            let mut probe = vec![0.0; dim];
            while hi - lo > EVENT_TOL {
                let mid = 0.5 * (lo + hi);
                dense.at(mid, &mut probe);
                if inside(&probe) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let mut y_exit = vec![0.0; dim];
            if lo == t {
                y_exit.copy_from_slice(&y);
            } else {
                dense.at(lo, &mut y_exit);
            }
            emit_samples_upto(lo, None, Some(&dense), &mut next_sample, &mut observe);
            observe(lo, &y_exit, Point::StepEnd);
            return finish(Termination::Escaped { t: lo }, lo, y_exit, accepted, rejected);
        }

        emit_samples_upto(t_new, Some((&y_new, t_new)), Some(&dense), &mut next_sample, &mut observe);
        observe(t_new, &y_new, Point::StepEnd);
        t = t_new;
        std::mem::swap(&mut y, &mut y_new);
        std::mem::swap(&mut k1, &mut k7);
        if last {
            return finish(Termination::Completed, t, y, accepted, rejected);
        }
        if rejected_last {
            h_new = h_new.min(h);
            rejected_last = false;
        }
        h = h_new;
    }
}

/// Starting step from the scaled norms of `y` and `f(y)` (Hairer–Wanner).
fn initial_step<F>(rhs: &mut F, y: &[f64], f0: &[f64], t_end: f64, ctrl: &StepControl, y1: &mut [f64], f1: &mut [f64]) -> f64
where
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    let dim = y.len() as f64;
    let scale = |i: usize| ctrl.abs_tol + ctrl.rel_tol * y[i].abs();
    let d0 = (y.iter().enumerate().map(|(i, v)| (v / scale(i)).powi(2)).sum::<f64>() / dim).sqrt();
    let d1 = (f0.iter().enumerate().map(|(i, v)| (v / scale(i)).powi(2)).sum::<f64>() / dim).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(t_end);
    for i in 0..y.len() {
        y1[i] = y[i] + h0 * f0[i];
    }
    if rhs(y1, f1).is_err() {
        return h0 * 1e-3;
    }
    let d2 = (f1
        .iter()
        .zip(f0)
        .enumerate()
        .map(|(i, (a, b))| ((a - b) / scale(i)).powi(2))
        .sum::<f64>()
        / dim)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(t_end)
}
