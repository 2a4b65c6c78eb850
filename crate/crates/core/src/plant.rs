//! Partitioned plant with delayed measurement of its second state block.
//!
//! The state is split as `x = (x₁, x₂)` with `x₁ ∈ ℝ^{n−p}` measured and
//! actuated and `x₂ ∈ ℝ^p` seen only through `y(t) = x₂(t − τ(t))`.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::matnum::{self, norm, Matrix};

/// Block matrices of the plant
/// `ẋ₁ = A₁₁x₁ + A₁₂x₂ + B₁(u + d) + D₁δ`, `ẋ₂ = A₂₁x₁ + A₂₂x₂ + D₂δ`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantModel {
    pub a11: Matrix,
    pub a12: Matrix,
    pub a21: Matrix,
    pub a22: Matrix,
    pub b1: Matrix,
    pub d1: Matrix,
    pub d2: Matrix,
}

impl PlantModel {
    /// Builds a model and checks that every block agrees on `n`, `p`, `m`, `h`.
    pub fn new(
        a11: Matrix,
        a12: Matrix,
        a21: Matrix,
        a22: Matrix,
        b1: Matrix,
        d1: Matrix,
        d2: Matrix,
    ) -> Result<Self> {
        let model = PlantModel {
            a11,
            a12,
            a21,
            a22,
            b1,
            d1,
            d2,
        };
        model.check_dimensions()?;
        Ok(model)
    }

    /// Model without an uncertainty channel; `D` is `n×n` zeros.
    pub fn nominal(a11: Matrix, a12: Matrix, a21: Matrix, a22: Matrix, b1: Matrix) -> Result<Self> {
        let (q, p) = (a11.rows(), a22.rows());
        let n = q + p;
        Self::new(a11, a12, a21, a22, b1, Matrix::zeros(q, n), Matrix::zeros(p, n))
    }

    /// Dimension of the measured block `x₁` (`n − p`).
    pub fn n1(&self) -> usize {
        self.a11.rows()
    }

    /// Dimension of the delayed block `x₂` (`p`).
    pub fn p(&self) -> usize {
        self.a22.rows()
    }

    pub fn n(&self) -> usize {
        self.n1() + self.p()
    }

    /// Number of control inputs.
    pub fn m(&self) -> usize {
        self.b1.cols()
    }

    /// Number of uncertainty channels.
    pub fn h(&self) -> usize {
        self.d1.cols()
    }

    fn check_dimensions(&self) -> Result<()> {
        let (q, p, m, h) = (self.n1(), self.p(), self.m(), self.h());
        let want = [
            ("A11", &self.a11, (q, q)),
            ("A12", &self.a12, (q, p)),
            ("A21", &self.a21, (p, q)),
            ("A22", &self.a22, (p, p)),
            ("B1", &self.b1, (q, m)),
            ("D1", &self.d1, (q, h)),
            ("D2", &self.d2, (p, h)),
        ];
        for (name, mat, shape) in want {
            if mat.shape() != shape {
                return Err(Error::Dimension(format!(
                    "{name} is {}x{}, expected {}x{}",
                    mat.rows(),
                    mat.cols(),
                    shape.0,
                    shape.1
                )));
            }
            if !mat.is_finite() {
                return Err(Error::NonFinite("plant matrix"));
            }
        }
        if q == 0 || p == 0 || m == 0 {
            return Err(Error::Dimension("x1, x2 and u must be non-empty".into()));
        }
        Ok(())
    }

    pub fn a(&self) -> Matrix {
        Matrix::block2(&self.a11, &self.a12, &self.a21, &self.a22).expect("checked blocks")
    }

    pub fn b(&self) -> Matrix {
        self.b1
            .vstack(&Matrix::zeros(self.p(), self.m()))
            .expect("checked blocks")
    }

    pub fn d(&self) -> Matrix {
        self.d1.vstack(&self.d2).expect("checked blocks")
    }

    /// Rank of `[B, AB, …, A^{n−1}B]`.
    pub fn controllability_rank(&self) -> usize {
        let a = self.a();
        let mut block = self.b();
        let mut ctrb = block.clone();
        for _ in 1..self.n() {
            block = &a * &block;
            ctrb = ctrb.hstack(&block).expect("same rows");
        }
        matnum::rank(&ctrb)
    }

    /// Full-rank `B` and controllable `(A, B)`.
    pub fn check_structure(&self) -> Result<()> {
        if matnum::rank(&self.b1) < self.m() {
            return Err(Error::Singular("B1 lacks full column rank".into()));
        }
        let r = self.controllability_rank();
        if r < self.n() {
            return Err(Error::Uncontrollable(format!(
                "(A, B) controllability matrix has rank {r} < {}",
                self.n()
            )));
        }
        Ok(())
    }

    pub fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        x.split_at(self.n1())
    }
}

/// Stacked state derivative of the partitioned plant.
pub fn plant_derivative(
    model: &PlantModel,
    x: &[f64],
    u: &[f64],
    d: &[f64],
    delta: &[f64],
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; model.n()];
    derivative_into(model, x, u, d, delta, &mut out)?;
    Ok(out)
}

fn derivative_into(
    model: &PlantModel,
    x: &[f64],
    u: &[f64],
    d: &[f64],
    delta: &[f64],
    out: &mut [f64],
) -> Result<()> {
    if x.len() != model.n() || u.len() != model.m() || d.len() != model.m() {
        return Err(Error::Dimension(format!(
            "state/control/fault lengths {}/{}/{} for n = {}, m = {}",
            x.len(),
            u.len(),
            d.len(),
            model.n(),
            model.m()
        )));
    }
    if delta.len() != model.h() {
        return Err(Error::Dimension(format!(
            "uncertainty has {} channels, model expects {}",
            delta.len(),
            model.h()
        )));
    }
    let (x1, x2) = model.split(x);
    let q = model.n1();
    let (o1, o2) = out.split_at_mut(q);
    o1.fill(0.0);
    o2.fill(0.0);
    let ud: Vec<f64> = u.iter().zip(d).map(|(a, b)| a + b).collect();
    model.a11.mul_vec_acc(x1, 1.0, o1)?;
    model.a12.mul_vec_acc(x2, 1.0, o1)?;
    model.b1.mul_vec_acc(&ud, 1.0, o1)?;
    model.d1.mul_vec_acc(delta, 1.0, o1)?;
    model.a21.mul_vec_acc(x1, 1.0, o2)?;
    model.a22.mul_vec_acc(x2, 1.0, o2)?;
    model.d2.mul_vec_acc(delta, 1.0, o2)?;
    Ok(())
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;
type StateFn = Arc<dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync>;

/// Known time-varying measurement delay `τ(t)` with its rate `τ̇(t)`.
#[derive(Clone)]
pub struct DelayProfile {
    tau: ScalarFn,
    tau_dot: ScalarFn,
    pub tau_max: f64,
    pub r_bar: f64,
}

impl DelayProfile {
    pub fn new(
        tau: impl Fn(f64) -> f64 + Send + Sync + 'static,
        tau_dot: impl Fn(f64) -> f64 + Send + Sync + 'static,
        tau_max: f64,
        r_bar: f64,
    ) -> Result<Self> {
        if !(tau_max >= 0.0 && tau_max.is_finite()) {
            return Err(Error::Domain(format!("tau_max = {tau_max} must be finite and >= 0")));
        }
        if !(0.0..1.0).contains(&r_bar) {
            return Err(Error::Domain(format!("r_bar = {r_bar} must lie in [0, 1)")));
        }
        Ok(DelayProfile {
            tau: Arc::new(tau),
            tau_dot: Arc::new(tau_dot),
            tau_max,
            r_bar,
        })
    }

    pub fn constant(tau: f64) -> Result<Self> {
        Self::new(move |_| tau, |_| 0.0, tau, 0.0)
    }

    /// `τ(t) = a + b·sin(c·t)`; `tau_max` and `r_bar` are the declared bounds.
    pub fn sinusoidal(a: f64, b: f64, c: f64, tau_max: f64, r_bar: f64) -> Result<Self> {
        Self::new(
            move |t| a + b * (c * t).sin(),
            move |t| b * c * (c * t).cos(),
            tau_max,
            r_bar,
        )
    }

    pub fn tau(&self, t: f64) -> f64 {
        (self.tau)(t)
    }

    pub fn tau_dot(&self, t: f64) -> f64 {
        (self.tau_dot)(t)
    }

    /// Checks `0 ≤ τ(t) ≤ tau_max` and `|τ̇(t)| ≤ r̄` at one instant.
    pub fn check_at(&self, t: f64) -> Result<()> {
        let tau = self.tau(t);
        if !(tau >= 0.0) {
            return Err(Error::AssumptionViolated {
                t,
                what: "-tau",
                value: -tau,
                bound: 0.0,
            });
        }
        if tau > self.tau_max * (1.0 + 1e-12) {
            return Err(Error::AssumptionViolated {
                t,
                what: "tau",
                value: tau,
                bound: self.tau_max,
            });
        }
        let rate = self.tau_dot(t).abs();
        if rate > self.r_bar * (1.0 + 1e-12) {
            return Err(Error::AssumptionViolated {
                t,
                what: "|tau_dot|",
                value: rate,
                bound: self.r_bar,
            });
        }
        Ok(())
    }
}

impl fmt::Debug for DelayProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DelayProfile")
            .field("tau_max", &self.tau_max)
            .field("r_bar", &self.r_bar)
            .finish_non_exhaustive()
    }
}

/// Actuator fault `d(t)` with its uniform bound `α`.
#[derive(Clone)]
pub struct FaultSignal {
    d: VectorFn,
    pub alpha: f64,
}

impl FaultSignal {
    pub fn new(d: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static, alpha: f64) -> Self {
        FaultSignal {
            d: Arc::new(d),
            alpha,
        }
    }

    pub fn zero(m: usize) -> Self {
        Self::new(move |_| vec![0.0; m], 0.0)
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        (self.d)(t)
    }

    pub fn check(&self, t: f64, d: &[f64]) -> Result<()> {
        let nd = norm(d);
        if nd > self.alpha * (1.0 + 1e-12) + 1e-15 {
            return Err(Error::AssumptionViolated {
                t,
                what: "|d|",
                value: nd,
                bound: self.alpha,
            });
        }
        Ok(())
    }
}

impl fmt::Debug for FaultSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FaultSignal")
            .field("alpha", &self.alpha)
            .finish_non_exhaustive()
    }
}

/// Parametric uncertainty `δ(x, t)` with `‖δ(x,t)‖ ≤ δ̄‖x‖`.
#[derive(Clone)]
pub struct UncertaintyModel {
    delta: StateFn,
    pub delta_bar: f64,
}

impl UncertaintyModel {
    pub fn new(delta: impl Fn(&[f64], f64) -> Vec<f64> + Send + Sync + 'static, delta_bar: f64) -> Self {
        UncertaintyModel {
            delta: Arc::new(delta),
            delta_bar,
        }
    }

    pub fn zero(h: usize) -> Self {
        Self::new(move |_, _| vec![0.0; h], 0.0)
    }

    /// `δ(x, t) = G x`.
    pub fn linear(g: Matrix, delta_bar: f64) -> Self {
        Self::new(move |x, _| g.mul_vec(x).expect("G columns match the state"), delta_bar)
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Vec<f64> {
        (self.delta)(x, t)
    }

    pub fn check(&self, t: f64, x: &[f64], delta: &[f64]) -> Result<()> {
        let (nd, bound) = (norm(delta), self.delta_bar * norm(x));
        if nd > bound * (1.0 + 1e-9) + 1e-300 {
            return Err(Error::AssumptionViolated {
                t,
                what: "|delta(x,t)|",
                value: nd,
                bound,
            });
        }
        Ok(())
    }
}

impl fmt::Debug for UncertaintyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UncertaintyModel")
            .field("delta_bar", &self.delta_bar)
            .finish_non_exhaustive()
    }
}

/// One classical RK4 step with `u` held over the step; `d` and `δ` are
/// evaluated at each stage.
pub fn plant_step(
    model: &PlantModel,
    x: &[f64],
    t: f64,
    h: f64,
    u: &[f64],
    fault: &FaultSignal,
    unc: &UncertaintyModel,
) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("step h = {h} must be positive")));
    }
    let n = model.n();
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut stage = x.to_vec();
    let offsets = [0.0, 0.5, 0.5, 1.0];
    for (s, &c) in offsets.iter().enumerate() {
        let (prev, rest) = k.split_at_mut(s);
        if let Some(last) = prev.last() {
            for i in 0..n {
                stage[i] = x[i] + c * h * last[i];
            }
        }
        let ts = t + c * h;
        let d = fault.eval(ts);
        let delta = unc.eval(&stage, ts);
        derivative_into(model, &stage, u, &d, &delta, &mut rest[0])?;
    }
    let next: Vec<f64> = (0..n)
        .map(|i| x[i] + h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]))
        .collect();
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            t: t + h,
            what: "plant state is not finite".into(),
        });
    }
    Ok(next)
}

/// Uniformly spaced state samples on the grid `t = k·step`.
#[derive(Clone, Debug)]
pub struct HistoryBuffer {
    step: f64,
    /// Grid index of the front sample.
    first: i64,
    capacity: usize,
    samples: VecDeque<Vec<f64>>,
}

impl HistoryBuffer {
    /// Buffer holding `x(θ) = x0` for every grid point of
    /// `[t0 − span, t0]`; keeps at least `span` of look-back afterwards.
    pub fn with_constant_prehistory(x0: &[f64], t0: f64, step: f64, span: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::Domain(format!("history step {step} must be positive")));
        }
        let last = (t0 / step).round() as i64;
        if ((last as f64) * step - t0).abs() > 1e-9 * step.max(t0.abs()) {
            return Err(Error::Domain(format!("t0 = {t0} is not on the {step} grid")));
        }
        let back = (span / step).ceil() as usize + 2;
        let samples: VecDeque<Vec<f64>> = std::iter::repeat_n(x0.to_vec(), back + 1).collect();
        Ok(HistoryBuffer {
            step,
            first: last - back as i64,
            capacity: back + 1,
            samples,
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.first as f64 * self.step
    }

    pub fn end_time(&self) -> f64 {
        (self.first + self.samples.len() as i64 - 1) as f64 * self.step
    }

    pub fn latest(&self) -> &[f64] {
        self.samples.back().expect("buffer never empty")
    }

    /// Appends the sample for the next grid time, dropping the oldest one
    /// once the look-back span is covered.
    pub fn push(&mut self, x: Vec<f64>) {
        self.samples.push_back(x);
        if self.samples.len() > self.capacity {
            self.samples.pop_front();
            self.first += 1;
        }
    }

    /// Grid index `k` such that `k·step` is the latest sample at or before `t`.
    pub fn grid_floor(&self, t: f64) -> i64 {
        let r = t / self.step;
        let k = r.round();
        if (r - k).abs() <= 1e-9 {
            k as i64
        } else {
            r.floor() as i64
        }
    }

    pub fn time_of(&self, k: i64) -> f64 {
        k as f64 * self.step
    }

    fn sample_at_index(&self, k: i64) -> &[f64] {
        &self.samples[(k - self.first) as usize]
    }

    /// Linear interpolation between the bracketing samples.
    pub fn sample(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.latest().len()];
        self.sample_into(t, &mut out)?;
        Ok(out)
    }

    pub fn sample_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let (start, end) = (self.start_time(), self.end_time());
        let tol = 1e-9 * self.step;
        if !(t >= start - tol && t <= end + tol) {
            return Err(Error::HistoryUnderflow { t, start, end });
        }
        let k = self.grid_floor(t).clamp(self.first, self.first + self.samples.len() as i64 - 1);
        let lo = self.sample_at_index(k);
        let frac = (t - self.time_of(k)) / self.step;
        if frac.abs() <= 1e-9 || k == self.first + self.samples.len() as i64 - 1 {
            out.copy_from_slice(lo);
            return Ok(());
        }
        let hi = self.sample_at_index(k + 1);
        for ((o, a), b) in out.iter_mut().zip(lo).zip(hi) {
            *o = a + frac * (b - a);
        }
        Ok(())
    }
}

/// Free-function form of [`HistoryBuffer::sample`].
pub fn sample_history(buf: &HistoryBuffer, t_query: f64) -> Result<Vec<f64>> {
    buf.sample(t_query)
}

/// `y(t) = x₂(t − τ(t))` read from the history.
pub fn measure_output(
    buf: &HistoryBuffer,
    t: f64,
    delay: &DelayProfile,
    model: &PlantModel,
) -> Result<Vec<f64>> {
    let x = buf.sample(t - delay.tau(t))?;
    Ok(x[model.n1()..].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    pub(crate) fn example_model() -> PlantModel {
        let m = |v: f64| Matrix::from_rows(&[vec![v]]).unwrap();
        PlantModel::nominal(m(-1.0), m(1.0), m(-3.0), m(1.0), m(1.0)).unwrap()
    }

    #[test]
    fn derivative_examples() {
        let model = example_model();
        let z = [0.0];
        let delta = [0.0, 0.0];
        assert_eq!(
            plant_derivative(&model, &[0.0, 0.0], &z, &z, &delta).unwrap(),
            vec![0.0, 0.0]
        );
        assert_eq!(
            plant_derivative(&model, &[1.0, 0.0], &z, &z, &delta).unwrap(),
            vec![-1.0, -3.0]
        );
        assert_eq!(
            plant_derivative(&model, &[0.0, 0.0], &[1.0], &z, &delta).unwrap(),
            vec![1.0, 0.0]
        );
        assert!(matches!(
            plant_derivative(&model, &[0.0], &z, &z, &delta),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn example_is_controllable() {
        let model = example_model();
        assert_eq!(model.controllability_rank(), 2);
        model.check_structure().unwrap();
    }

    #[test]
    fn uncontrollable_detected() {
        let m = |v: f64| Matrix::from_rows(&[vec![v]]).unwrap();
        let model = PlantModel::nominal(m(-1.0), m(0.0), m(0.0), m(1.0), m(1.0)).unwrap();
        assert!(matches!(model.check_structure(), Err(Error::Uncontrollable(_))));
    }

    #[test]
    fn rk4_step_examples() {
        let m = |v: f64| Matrix::from_rows(&[vec![v]]).unwrap();
        let probe = PlantModel::nominal(m(-1.0), m(0.0), m(0.0), m(0.0), m(0.0)).unwrap();
        let fault = FaultSignal::zero(1);
        let unc = UncertaintyModel::zero(2);
        let x = plant_step(&probe, &[1.0, 0.0], 0.0, 1e-3, &[0.0], &fault, &unc).unwrap();
        assert_abs_diff_eq!(x[0], (-1e-3f64).exp(), epsilon = 1e-13);
        assert_abs_diff_eq!(x[0], 0.9990004998333750, epsilon = 1e-13);

        let model = example_model();
        let x = plant_step(&model, &[0.0, 0.0], 0.0, 1e-3, &[0.0], &fault, &unc).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
        assert!(plant_step(&model, &[0.0, 0.0], 0.0, 0.0, &[0.0], &fault, &unc).is_err());
    }

    #[test]
    fn rk4_first_step_matches_taylor() {
        let model = example_model();
        let fault = FaultSignal::new(|t| vec![0.1 * (2.0 * t).sin() + 0.2 * (3.0 * t).cos()], 0.3);
        let unc = UncertaintyModel::zero(2);
        let (x0, h, u) = ([1.0, 1.0], 1e-3, [-10.0]);
        let next = plant_step(&model, &x0, 0.0, h, &u, &fault, &unc).unwrap();
        let f0 = plant_derivative(&model, &x0, &u, &fault.eval(0.0), &[0.0, 0.0]).unwrap();
        for i in 0..2 {
            assert!((next[i] - (x0[i] + h * f0[i])).abs() <= 20.0 * h * h);
        }
    }

    #[test]
    fn rk4_fourth_order() {
        // ẋ₁ = -x₁ + x₂, ẋ₂ = -3x₁ + x₂ under a smooth input u = sin t
        let model = example_model();
        let fault = FaultSignal::zero(1);
        let unc = UncertaintyModel::zero(2);
        let run = |h: f64| {
            let mut x = vec![1.0, 1.0];
            let steps = (1.0 / h).round() as usize;
            for k in 0..steps {
                let t = k as f64 * h;
                x = plant_step(&model, &x, t, h, &[0.0], &fault, &unc).unwrap();
            }
            x
        };
        let reference = run(1e-4);
        let e1 = norm(&matnum_sub(&run(0.1), &reference));
        let e2 = norm(&matnum_sub(&run(0.05), &reference));
        assert!(e1 / e2 >= 14.0, "ratio {}", e1 / e2);
    }

    fn matnum_sub(a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }

    #[test]
    fn history_interpolation() {
        let mut buf = HistoryBuffer::with_constant_prehistory(&[0.0, 0.0], 0.0, 0.1, 0.2).unwrap();
        for k in 1..=5 {
            let t = k as f64 * 0.1;
            buf.push(vec![t, 2.0 * t]);
        }
        let x = buf.sample(0.3).unwrap();
        assert_eq!(x, vec![0.30000000000000004, 0.6000000000000001]);
        let x = buf.sample(0.45).unwrap();
        assert_abs_diff_eq!(x[0], 0.45, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 0.90, epsilon = 1e-15);
        assert!(matches!(buf.sample(-1.0), Err(Error::HistoryUnderflow { .. })));
        assert!(matches!(buf.sample(0.6), Err(Error::HistoryUnderflow { .. })));
    }

    #[test]
    fn history_affine_exact_from_zero() {
        let h = 0.1;
        let mut buf = HistoryBuffer::with_constant_prehistory(&[0.0, 0.0], 0.0, h, 1.0).unwrap();
        for k in 1..=3 {
            let t = k as f64 * h;
            buf.push(vec![t, 2.0 * t]);
        }
        let x = buf.sample(0.05).unwrap();
        assert_abs_diff_eq!(x[0], 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 0.10, epsilon = 1e-15);
    }

    #[test]
    fn history_interpolation_error_on_sine() {
        let h = 1e-3;
        let mut buf = HistoryBuffer::with_constant_prehistory(&[0.0], 0.0, h, 2.0).unwrap();
        for k in 1..=2000 {
            buf.push(vec![(k as f64 * h).sin()]);
        }
        let mut worst: f64 = 0.0;
        for k in 0..1999 {
            let t = (k as f64 + 0.5) * h;
            worst = worst.max((buf.sample(t).unwrap()[0] - t.sin()).abs());
        }
        assert!(worst <= 2.5e-7, "{worst}");
    }

    #[test]
    fn measurement_examples() {
        let model = example_model();
        let mut buf = HistoryBuffer::with_constant_prehistory(&[1.0, 2.0], 0.0, 0.01, 1.0).unwrap();
        let no_delay = DelayProfile::constant(0.0).unwrap();
        assert_eq!(measure_output(&buf, 0.0, &no_delay, &model).unwrap(), vec![2.0]);
        let delay = DelayProfile::sinusoidal(0.4, 0.1, 1.0, 0.5, 0.1).unwrap();
        assert_eq!(measure_output(&buf, 0.0, &delay, &model).unwrap(), vec![2.0]);
        for _ in 0..10 {
            buf.push(vec![1.0, 2.0]);
        }
        assert_eq!(measure_output(&buf, 0.1, &delay, &model).unwrap(), vec![2.0]);
        buf.push(vec![5.0, 7.0]);
        assert_eq!(measure_output(&buf, 0.11, &no_delay, &model).unwrap(), vec![7.0]);
    }

    #[test]
    fn assumption_checks() {
        let delay = DelayProfile::sinusoidal(0.4, 0.1, 1.0, 0.5, 0.1).unwrap();
        for k in 0..100 {
            delay.check_at(k as f64 * 0.2).unwrap();
        }
        let fast = DelayProfile::sinusoidal(0.4, 0.1, 5.0, 0.5, 0.1).unwrap();
        assert!(matches!(fast.check_at(0.0), Err(Error::AssumptionViolated { .. })));
        assert!(DelayProfile::sinusoidal(0.4, 0.1, 1.0, 0.5, 1.0).is_err());

        let fault = FaultSignal::new(|_| vec![1.0], 0.5);
        assert!(fault.check(0.0, &fault.eval(0.0)).is_err());

        let unc = UncertaintyModel::linear(Matrix::identity(2).scale(2.0), 1.0);
        let x = [1.0, 0.0];
        assert!(unc.check(0.0, &x, &unc.eval(&x, 0.0)).is_err());
        let unc = UncertaintyModel::linear(Matrix::identity(2), 1.0);
        unc.check(0.0, &x, &unc.eval(&x, 0.0)).unwrap();
    }
}
