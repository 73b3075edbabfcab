//! Numerical checks of the two convergence results: the single-pair capture
//! conditions with a closed-form and an ODE oracle for the max-turn
//! maneuver, and the reduced formation-distance ODE with its Lyapunov
//! function.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{acot_pos, Position};

/// Parameters of a single-pair engagement started inside the alert distance
/// with both agents heading along +y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Inputs {
    pub v_p: f64,
    pub v_e: f64,
    pub w_p_max: f64,
    pub w_e_max: f64,
    pub r_p: f64,
    pub r_e: f64,
    pub a_p: f64,
    pub a_e: f64,
    pub c_p: f64,
    pub c_e: f64,
    pub k_p: f64,
    pub k_e: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub d0: f64,
    /// Initial pursuer heading offset from +y.
    #[serde(default)]
    pub gamma_angle: f64,
}

impl Theorem1Inputs {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("v_p", self.v_p),
            ("v_e", self.v_e),
            ("w_p_max", self.w_p_max),
            ("w_e_max", self.w_e_max),
            ("r_p", self.r_p),
            ("r_e", self.r_e),
            ("k_p", self.k_p),
            ("k_e", self.k_e),
            ("eps1", self.eps1),
            ("eps2", self.eps2),
            ("d0", self.d0),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        for (name, v) in [("a_p", self.a_p), ("a_e", self.a_e)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        for (name, v) in [("c_p", self.c_p), ("c_e", self.c_e)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must satisfy 0 <= c < 1, got {v}")));
            }
        }
        if !self.gamma_angle.is_finite() {
            return Err(Error::Config("gamma_angle must be finite".into()));
        }
        if self.d0 > self.eps1 {
            return Err(Error::Config(format!(
                "d0 must not exceed eps1, got d0={} eps1={}",
                self.d0, self.eps1
            )));
        }
        Ok(())
    }

    /// End of the maneuver window, a quarter turn of the pursuer.
    pub fn t_bound(&self) -> f64 {
        FRAC_PI_2 / self.w_p_max
    }

    pub fn rho1(&self) -> f64 {
        let (wp, we) = (self.w_p_max, self.w_e_max);
        self.v_p - self.v_e - 2.0 * self.a_e / (we * we) - self.a_e * std::f64::consts::PI / (2.0 * wp * we)
            + (1.0 - FRAC_PI_2) * self.a_p / (wp * wp)
    }

    pub fn rho2(&self) -> f64 {
        let (wp, we) = (self.w_p_max, self.w_e_max);
        2.0 * self.v_e / we - self.v_p / wp + self.a_p / (wp * wp) - self.a_e / (we * we)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    /// `v_p > v_e` and `w_e_max > w_p_max`.
    pub assumptions: bool,
    pub cond_i: bool,
    pub cond_ii: bool,
    pub cond_iii: bool,
    pub cond_iv: bool,
    pub cond_v: bool,
    pub rho1: f64,
    pub rho2: f64,
    /// `None` when `eps2^2 < rho2^2`.
    pub eps1_bound: Option<f64>,
    pub t_bound: f64,
    pub closed_form_final_distance: f64,
    /// Every assumption and condition holds.
    pub capture_guaranteed: bool,
    /// Closed-form distance at `t_bound` is below `eps2`.
    pub closed_form_captures: bool,
}

/// Evaluates the five capture conditions as stated, with the turn-rate
/// condition taken at the initial speeds.
pub fn theorem1_check(inp: &Theorem1Inputs) -> Result<Theorem1Report> {
    inp.validate()?;
    let (wp, we) = (inp.w_p_max, inp.w_e_max);
    let t_bound = inp.t_bound();
    let assumptions = inp.v_p > inp.v_e && we > wp;
    let cond_i = inp.r_p >= inp.v_p * wp && inp.r_e >= inp.v_e * we;
    let cond_ii = acot_pos(inp.k_p * inp.eps1) / inp.v_p >= wp && acot_pos(inp.k_e * inp.eps1) / inp.v_e >= we;
    // the evader's inequality uses the pursuer's turn rate, as stated
    let cond_iii = inp.v_p - inp.a_p * t_bound >= inp.c_p * inp.v_p && inp.v_e - inp.a_e * t_bound >= inp.c_e * inp.v_e;
    let cond_iv = wp < we && we <= 3.0 * wp;
    let (rho1, rho2) = (inp.rho1(), inp.rho2());
    let slack = inp.eps2 * inp.eps2 - rho2 * rho2;
    let eps1_bound = (slack >= 0.0).then(|| rho1 + slack.sqrt());
    let cond_v = eps1_bound.is_some_and(|b| inp.eps1 < b);
    let final_distance = closed_form_theorem1(t_bound, inp)?.distance;
    Ok(Theorem1Report {
        assumptions,
        cond_i,
        cond_ii,
        cond_iii,
        cond_iv,
        cond_v,
        rho1,
        rho2,
        eps1_bound,
        t_bound,
        closed_form_final_distance: final_distance,
        capture_guaranteed: assumptions && cond_i && cond_ii && cond_iii && cond_iv && cond_v,
        closed_form_captures: final_distance < inp.eps2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairPositions {
    pub t: f64,
    pub pursuer: Position,
    pub evader: Position,
    pub distance: f64,
}

/// Displacement after turning at constant rate `w` from +y while the speed
/// ramps down as `v - a t`.
fn max_turn_offset(v: f64, a: f64, w: f64, t: f64) -> (f64, f64) {
    let (s, c) = (w * t).sin_cos();
    let x = v / w * (c - 1.0) - a / w * t * c + a / (w * w) * s;
    let y = v / w * s - a / w * t * s + a / (w * w) * (1.0 - c);
    (x, y)
}

/// Positions during the max-turn maneuver with the pursuer starting at the
/// origin and the evader at `(0, d0)`, both heading along +y.
pub fn closed_form_theorem1(t: f64, inp: &Theorem1Inputs) -> Result<PairPositions> {
    let t_bound = inp.t_bound();
    if !(0.0..=t_bound).contains(&t) {
        return Err(Error::Domain(format!("t must lie in [0, {t_bound}], got {t}")));
    }
    let (xp, yp) = max_turn_offset(inp.v_p, inp.a_p, inp.w_p_max, t);
    let (xe, ye) = max_turn_offset(inp.v_e, inp.a_e, inp.w_e_max, t);
    let pursuer = Position::new(xp, yp);
    let evader = Position::new(xe, inp.d0 + ye);
    Ok(PairPositions {
        t,
        pursuer,
        evader,
        distance: pursuer.distance(evader),
    })
}

/// Forward-Euler integration of the open-loop max-turn maneuver over
/// `[0, t_bound]`, starting the pursuer at heading `pi/2 - gamma_angle`.
/// The last step is shortened to land exactly on `t_bound`.
pub fn integrate_mdd(inp: &Theorem1Inputs, dt: f64) -> Result<Vec<PairPositions>> {
    inp.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("dt must be > 0, got {dt}")));
    }
    let t_end = inp.t_bound();
    let th_p0 = FRAC_PI_2 - inp.gamma_angle;
    let rate = |t: f64| {
        let (vp, ve) = (inp.v_p - inp.a_p * t, inp.v_e - inp.a_e * t);
        let (sp, cp) = (th_p0 + inp.w_p_max * t).sin_cos();
        let (se, ce) = (FRAC_PI_2 + inp.w_e_max * t).sin_cos();
        (vp * cp, vp * sp, ve * ce, ve * se)
    };
    let mut p = Position::new(0.0, 0.0);
    let mut e = Position::new(0.0, inp.d0);
    let mut t = 0.0;
    let mut out = vec![PairPositions {
        t,
        pursuer: p,
        evader: e,
        distance: p.distance(e),
    }];
    let n = (t_end / dt).ceil() as usize;
    for k in 0..n {
        let h = if k + 1 == n { t_end - t } else { dt };
        let (dxp, dyp, dxe, dye) = rate(t);
        p = Position::new(p.x + h * dxp, p.y + h * dyp);
        e = Position::new(e.x + h * dxe, e.y + h * dye);
        t = if k + 1 == n { t_end } else { (k + 1) as f64 * dt };
        out.push(PairPositions {
            t,
            pursuer: p,
            evader: e,
            distance: p.distance(e),
        });
    }
    Ok(out)
}

/// Largest position error of an integrated trajectory against the closed form.
pub fn max_position_error(traj: &[PairPositions], inp: &Theorem1Inputs) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for s in traj {
        let exact = closed_form_theorem1(s.t.min(inp.t_bound()), inp)?;
        worst = worst
            .max(s.pursuer.distance(exact.pursuer))
            .max(s.evader.distance(exact.evader));
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Trajectory {
    pub dt: f64,
    pub q: Vec<[f64; 2]>,
    /// `J = q . q` at every sample.
    pub lyapunov: Vec<f64>,
    pub final_norm: f64,
    /// `J` moved towards `d_des^2` (or stayed put) at every step.
    pub monotone: bool,
}

fn reduced_rate(q: [f64; 2], d_des: f64) -> [f64; 2] {
    let n2 = q[0] * q[0] + q[1] * q[1];
    let sigma = 2.0 / (1.0 + (n2 - d_des * d_des).exp());
    [-q[0] * (1.0 - sigma), -q[1] * (1.0 - sigma)]
}

/// RK4 integration of the reduced formation-distance dynamics.
pub fn theorem2_reduced_ode(q0: [f64; 2], d_des: f64, t_end: f64, dt: f64) -> Result<Theorem2Trajectory> {
    if !(d_des > 0.0 && d_des.is_finite()) {
        return Err(Error::Domain(format!("d_des must be > 0, got {d_des}")));
    }
    if !(dt > 0.0 && t_end >= 0.0 && q0.iter().all(|v| v.is_finite())) {
        return Err(Error::Domain(
            "theorem2_reduced_ode needs dt > 0, t_end >= 0 and finite q0".into(),
        ));
    }
    let n = (t_end / dt).round() as usize;
    let j = |q: [f64; 2]| q[0] * q[0] + q[1] * q[1];
    let target = d_des * d_des;
    let mut q = q0;
    let mut qs = vec![q];
    let mut lyapunov = vec![j(q)];
    let mut monotone = true;
    let add = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
    for _ in 0..n {
        let k1 = reduced_rate(q, d_des);
        let k2 = reduced_rate(add(q, k1, dt / 2.0), d_des);
        let k3 = reduced_rate(add(q, k2, dt / 2.0), d_des);
        let k4 = reduced_rate(add(q, k3, dt), d_des);
        for i in 0..2 {
            q[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let (prev, next) = (*lyapunov.last().expect("nonempty"), j(q));
        let ok = match prev.partial_cmp(&target) {
            Some(std::cmp::Ordering::Greater) => next <= prev,
            Some(std::cmp::Ordering::Less) => next >= prev,
            _ => true,
        };
        monotone &= ok;
        qs.push(q);
        lyapunov.push(next);
    }
    Ok(Theorem2Trajectory {
        dt,
        final_norm: j(q).sqrt(),
        q: qs,
        lyapunov,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    pub(crate) fn remark1() -> Theorem1Inputs {
        Theorem1Inputs {
            v_p: 2.0,
            v_e: 1.6,
            w_p_max: 1.0,
            w_e_max: 2.0,
            r_p: 3.0,
            r_e: 4.0,
            a_p: 0.0,
            a_e: 0.0,
            c_p: 0.0,
            c_e: 0.0,
            k_p: 0.01,
            k_e: 0.01,
            eps1: 1.31,
            eps2: 1.0,
            d0: 1.31,
            gamma_angle: 0.0,
        }
    }

    #[test]
    fn remark1_conditions() {
        let r = theorem1_check(&remark1()).unwrap();
        assert!(r.assumptions && r.cond_i && r.cond_iii && r.cond_iv && r.cond_v);
        assert!(!r.cond_ii);
        assert!(!r.capture_guaranteed);
        assert!(r.closed_form_captures);
        assert_abs_diff_eq!(r.rho1, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(r.rho2, -0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(r.eps1_bound.unwrap(), 1.316515139, epsilon = 1e-9);
        assert_abs_diff_eq!(r.t_bound, FRAC_PI_2, epsilon = 1e-15);
    }

    #[test]
    fn condition_boundaries() {
        let mut inp = remark1();
        inp.w_e_max = 4.0;
        assert!(!theorem1_check(&inp).unwrap().cond_iv);
        let mut inp = remark1();
        inp.r_p = inp.v_p * inp.w_p_max;
        assert!(theorem1_check(&inp).unwrap().cond_i);
        let mut inp = remark1();
        inp.eps2 = 0.3;
        let r = theorem1_check(&inp).unwrap();
        assert_eq!(r.eps1_bound, None);
        assert!(!r.cond_v);
    }

    #[test]
    fn d0_beyond_alert_distance_rejected() {
        let mut inp = remark1();
        inp.d0 = 2.0;
        assert!(theorem1_check(&inp).is_err());
    }

    #[test]
    fn closed_form_examples() {
        let inp = remark1();
        let end = closed_form_theorem1(FRAC_PI_2, &inp).unwrap();
        assert_abs_diff_eq!(end.pursuer.x, -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(end.pursuer.y, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(end.evader.x, -1.6, epsilon = 1e-12);
        assert_abs_diff_eq!(end.evader.y, 1.31, epsilon = 1e-12);
        assert_abs_diff_eq!(end.distance, 0.797559, epsilon = 1e-6);
        let start = closed_form_theorem1(0.0, &inp).unwrap();
        assert_eq!(start.pursuer, Position::new(0.0, 0.0));
        assert_eq!(start.evader, Position::new(0.0, 1.31));
        assert_eq!(start.distance, 1.31);
        assert!(closed_form_theorem1(2.0, &inp).is_err());
        assert!(closed_form_theorem1(-0.1, &inp).is_err());
    }

    #[test]
    fn closed_form_solves_the_ode() {
        // finite-difference derivative matches the ramped max-turn dynamics
        let mut inp = remark1();
        inp.a_p = 0.3;
        inp.a_e = 0.2;
        let (t, h) = (0.7, 1e-6);
        let a = closed_form_theorem1(t - h, &inp).unwrap();
        let b = closed_form_theorem1(t + h, &inp).unwrap();
        let vp = inp.v_p - inp.a_p * t;
        let th = FRAC_PI_2 + inp.w_p_max * t;
        assert_abs_diff_eq!((b.pursuer.x - a.pursuer.x) / (2.0 * h), vp * th.cos(), epsilon = 1e-7);
        assert_abs_diff_eq!((b.pursuer.y - a.pursuer.y) / (2.0 * h), vp * th.sin(), epsilon = 1e-7);
        let ve = inp.v_e - inp.a_e * t;
        let th = FRAC_PI_2 + inp.w_e_max * t;
        assert_abs_diff_eq!((b.evader.x - a.evader.x) / (2.0 * h), ve * th.cos(), epsilon = 1e-7);
        assert_abs_diff_eq!((b.evader.y - a.evader.y) / (2.0 * h), ve * th.sin(), epsilon = 1e-7);
    }

    #[test]
    fn mdd_speeds_constant_without_ramps() {
        let traj = integrate_mdd(&remark1(), 1e-3).unwrap();
        for w in traj.windows(2) {
            let h = w[1].t - w[0].t;
            if h > 1e-9 {
                assert_abs_diff_eq!(w[0].pursuer.distance(w[1].pursuer) / h, 2.0, epsilon = 1e-9);
                assert_abs_diff_eq!(w[0].evader.distance(w[1].evader) / h, 1.6, epsilon = 1e-9);
            }
        }
        assert_eq!(traj.last().unwrap().t, FRAC_PI_2);
    }

    #[test]
    fn mdd_converges_to_closed_form() {
        let inp = remark1();
        let e1 = max_position_error(&integrate_mdd(&inp, 1e-3).unwrap(), &inp).unwrap();
        let e2 = max_position_error(&integrate_mdd(&inp, 5e-4).unwrap(), &inp).unwrap();
        assert!(e1 < 1e-2);
        assert!((e1 / e2 - 2.0).abs() < 0.3, "ratio {}", e1 / e2);
    }

    #[test]
    fn reduced_ode_fixed_points() {
        let on = theorem2_reduced_ode([0.6, 0.8], 1.0, 10.0, 0.01).unwrap();
        for q in &on.q {
            assert_abs_diff_eq!((q[0] * q[0] + q[1] * q[1]).sqrt(), 1.0, epsilon = 1e-12);
        }
        let zero = theorem2_reduced_ode([0.0, 0.0], 1.0, 10.0, 0.01).unwrap();
        assert!(zero.q.iter().all(|q| *q == [0.0, 0.0]));
        assert!(theorem2_reduced_ode([1.0, 0.0], 0.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn reduced_ode_converges() {
        let r = theorem2_reduced_ode([2.0, 0.0], 1.0, 50.0, 0.01).unwrap();
        assert!((r.final_norm - 1.0).abs() < 1e-3);
        assert!(r.monotone);
    }
}
