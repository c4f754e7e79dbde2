use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::history::HistorySegment;
use super::system::DdeSystem;
use crate::error::{Error, Result};

/// Relative tolerance for "a divides b" checks on step sizes.
const DIVISIBILITY_TOL: f64 = 1e-9;

fn divides(small: f64, big: f64) -> Option<usize> {
    let q = big / small;
    let r = q.round();
    if r >= 1.0 && (q - r).abs() <= DIVISIBILITY_TOL * r {
        Some(r as usize)
    } else {
        None
    }
}

/// Dense solution record: initial history for t ≤ 0 plus cubic Hermite data
/// at every integrator node for t ≥ 0.
///
/// The node at t = 0 carries the right-limit derivative f(x(0), η(−τ_d)), not
/// the history's slope; constant initial histories introduce a derivative
/// jump at t = 0 and forward dense output must use the right limit.
#[derive(Debug, Clone)]
struct DenseRecord {
    history: HistorySegment,
    times: Vec<f64>,
    values: Vec<DVector<f64>>,
    derivatives: Vec<DVector<f64>>,
}

impl DenseRecord {
    fn eval(&self, t: f64) -> DVector<f64> {
        if t < 0.0 {
            return self.history.eval(t);
        }
        let last = *self.times.last().unwrap();
        let t = t.min(last);
        let i = match self.times.binary_search_by(|probe| probe.partial_cmp(&t).unwrap()) {
            Ok(exact) => return self.values[exact].clone(),
            Err(ins) => ins.saturating_sub(1).min(self.times.len().saturating_sub(2)),
        };
        if self.times.len() == 1 {
            return self.values[0].clone();
        }
        let h = self.times[i + 1] - self.times[i];
        let s = (t - self.times[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        &self.values[i]
            + (&self.values[i + 1] - &self.values[i]) * h01
            + &self.derivatives[i] * (h10 * h)
            + &self.derivatives[i + 1] * (h11 * h)
    }

    fn eval_derivative(&self, t: f64) -> DVector<f64> {
        if t < 0.0 {
            return self.history.eval_derivative(t);
        }
        let last = *self.times.last().unwrap();
        let t = t.min(last);
        let i = match self.times.binary_search_by(|probe| probe.partial_cmp(&t).unwrap()) {
            Ok(exact) => return self.derivatives[exact].clone(),
            Err(ins) => ins.saturating_sub(1).min(self.times.len().saturating_sub(2)),
        };
        let h = self.times[i + 1] - self.times[i];
        let s = (t - self.times[i]) / h;
        let s2 = s * s;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = (-6.0 * s2 + 6.0 * s) / h;
        let d11 = 3.0 * s2 - 2.0 * s;
        (&self.values[i + 1] - &self.values[i]) * d01
            + &self.derivatives[i] * d10
            + &self.derivatives[i + 1] * d11
    }
}

/// A simulated trajectory: the dense integrator output over [0, horizon]
/// together with the sampling interval Δ used to read off the history states
/// φ_k at t_k = kΔ.
#[derive(Debug, Clone)]
pub struct Trajectory {
    system_name: String,
    delay: f64,
    delta: f64,
    step: f64,
    record: DenseRecord,
    segment_count: usize,
}

impl Trajectory {
    pub fn system_name(&self) -> &str {
        &self.system_name
    }

    pub fn state_dim(&self) -> usize {
        self.record.values[0].len()
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn initial_history(&self) -> &HistorySegment {
        &self.record.history
    }

    /// Number of sampled history states φ_0 … φ_{N_t} (= N_t + 1).
    pub fn segment_count(&self) -> usize {
        self.segment_count
    }

    /// N_t: number of sampling intervals.
    pub fn n_steps(&self) -> usize {
        self.segment_count - 1
    }

    /// Sampling time t_k = kΔ.
    pub fn sample_time(&self, k: usize) -> f64 {
        k as f64 * self.delta
    }

    /// Dense-output evaluation of x(t) for t ∈ [−τ_d, horizon].
    pub fn dense_eval(&self, t: f64) -> DVector<f64> {
        self.record.eval(t)
    }

    /// The sampled history state φ_k = x_{t_k} as a history segment on the
    /// integrator's grid (spacing = step), materialized on demand.
    pub fn segment(&self, k: usize) -> HistorySegment {
        assert!(k < self.segment_count, "segment index out of range");
        let t_k = self.sample_time(k);
        let nodes = (self.delay / self.step).round() as usize;
        let nodes = nodes.max(1) + 1;
        let mut values = Vec::with_capacity(nodes);
        let mut derivatives = Vec::with_capacity(nodes);
        for j in 0..nodes {
            let theta = super::history::uniform_node(-self.delay, 0.0, nodes, j);
            values.push(self.record.eval(t_k + theta));
            derivatives.push(self.record.eval_derivative(t_k + theta));
        }
        HistorySegment::hermite(self.delay, values, derivatives).expect("valid segment")
    }

    /// Integrator node times in [0, horizon] (one CSV row per node).
    pub fn node_times(&self) -> &[f64] {
        &self.record.times
    }

    pub fn node_value(&self, i: usize) -> &DVector<f64> {
        &self.record.values[i]
    }
}

/// Integrates a DDE by the method of steps with fixed-step classical RK4.
/// Delayed values are read from the stored dense history via cubic Hermite
/// interpolation.
///
/// Preconditions: `step` divides `delta`, `delta` divides `horizon`,
/// `step ≤ τ_d`, and `initial_history` covers [−τ_d, 0].
pub fn integrate(
    system: &DdeSystem,
    initial_history: &HistorySegment,
    horizon: f64,
    delta: f64,
    step: f64,
) -> Result<Trajectory> {
    let tau = system.delay();
    if !(step > 0.0 && delta > 0.0 && horizon > 0.0) {
        return Err(Error::PreconditionViolation(
            "step, delta and horizon must be positive".into(),
        ));
    }
    let per_delta = divides(step, delta).ok_or_else(|| {
        Error::PreconditionViolation(format!("step {step} does not divide delta {delta}"))
    })?;
    let n_delta = divides(delta, horizon).ok_or_else(|| {
        Error::PreconditionViolation(format!("delta {delta} does not divide horizon {horizon}"))
    })?;
    if step > tau * (1.0 + DIVISIBILITY_TOL) {
        return Err(Error::PreconditionViolation(format!(
            "step {step} exceeds delay {tau}: method of steps requires step <= delay"
        )));
    }
    if (initial_history.delay() - tau).abs() > DIVISIBILITY_TOL * tau {
        return Err(Error::PreconditionViolation(format!(
            "initial history covers [-{}, 0] but the system delay is {tau}",
            initial_history.delay()
        )));
    }
    if initial_history.state_dim() != system.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: system.state_dim(),
            got: initial_history.state_dim(),
        });
    }
    if divides(step, tau).is_none() {
        // A derivative jump from the initial history propagates at multiples
        // of τ_d; keeping nodes on those breaking points preserves RK4 order.
        log::warn!(
            "step {step} does not divide the delay {tau}; integration order may degrade at delay multiples"
        );
    }

    let total_steps = per_delta * n_delta;
    let x0 = initial_history.eval(0.0);
    let d0 = system.rhs(&x0, &initial_history.eval(-tau));
    let mut record = DenseRecord {
        history: initial_history.clone(),
        times: Vec::with_capacity(total_steps + 1),
        values: Vec::with_capacity(total_steps + 1),
        derivatives: Vec::with_capacity(total_steps + 1),
    };
    record.times.push(0.0);
    record.values.push(x0);
    record.derivatives.push(d0);

    let h = step;
    for k in 0..total_steps {
        let t = k as f64 * h;
        let x = record.values[k].clone();
        let k1 = system.rhs(&x, &record.eval(t - tau));
        let xd_mid = record.eval(t + 0.5 * h - tau);
        let k2 = system.rhs(&(&x + &k1 * (0.5 * h)), &xd_mid);
        let k3 = system.rhs(&(&x + &k2 * (0.5 * h)), &xd_mid);
        let k4 = system.rhs(&(&x + &k3 * h), &record.eval(t + h - tau));
        let x_next = &x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        let t_next = (k + 1) as f64 * h;
        if !x_next.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteState { t: t_next });
        }
        let d_next = system.rhs(&x_next, &record.eval(t_next - tau));
        if !d_next.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteState { t: t_next });
        }
        record.times.push(t_next);
        record.values.push(x_next);
        record.derivatives.push(d_next);
    }

    Ok(Trajectory {
        system_name: system.name().to_string(),
        delay: tau,
        delta,
        step,
        record,
        segment_count: n_delta + 1,
    })
}

/// Draws `count` constant initial histories η(θ) ≡ c with c uniform over the
/// per-component `bounds`. Deterministic given `seed`.
pub fn sample_initial_histories(
    system: &DdeSystem,
    count: usize,
    bounds: &[(f64, f64)],
    seed: u64,
) -> Result<Vec<HistorySegment>> {
    if count == 0 {
        return Err(Error::PreconditionViolation("count must be >= 1".into()));
    }
    if bounds.len() != system.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: system.state_dim(),
            got: bounds.len(),
        });
    }
    for &(lo, hi) in bounds {
        if !(lo <= hi) {
            return Err(Error::PreconditionViolation(format!(
                "empty bounds interval [{lo}, {hi}]"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let c = DVector::from_iterator(
            bounds.len(),
            bounds.iter().map(|&(lo, hi)| {
                let u: f64 = rng.gen();
                lo + u * (hi - lo)
            }),
        );
        out.push(HistorySegment::constant(system.delay(), c));
    }
    Ok(out)
}
