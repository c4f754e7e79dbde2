use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

type Rhs = Arc<dyn Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync>;

/// A retarded autonomous DDE with a single discrete delay,
/// ẋ(t) = f(x(t), x(t − τ_d)).
///
/// The right-hand side must be deterministic: identical inputs produce
/// identical outputs. Systems are immutable and cheap to clone.
#[derive(Clone)]
pub struct DdeSystem {
    name: String,
    state_dim: usize,
    delay: f64,
    rhs: Rhs,
}

impl DdeSystem {
    pub fn new(
        name: impl Into<String>,
        state_dim: usize,
        delay: f64,
        rhs: impl Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        assert!(state_dim > 0, "state dimension must be positive");
        assert!(delay > 0.0, "delay must be positive");
        Self {
            name: name.into(),
            state_dim,
            delay,
            rhs: Arc::new(rhs),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    /// Evaluates ẋ = f(x, x_delayed).
    pub fn rhs(&self, x: &DVector<f64>, x_delayed: &DVector<f64>) -> DVector<f64> {
        (self.rhs)(x, x_delayed)
    }
}

impl fmt::Debug for DdeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DdeSystem")
            .field("name", &self.name)
            .field("state_dim", &self.state_dim)
            .field("delay", &self.delay)
            .finish()
    }
}

/// Scalar DDE with Hill-type nonlinearity,
/// ẋ(t) = 1 / (1 + x(t−τ_d)²) − x(t), with the default delay τ_d = 1.
pub fn hill_system() -> DdeSystem {
    hill_system_with_delay(1.0)
}

pub fn hill_system_with_delay(delay: f64) -> DdeSystem {
    DdeSystem::new("hill", 1, delay, |x, xd| {
        DVector::from_element(1, 1.0 / (1.0 + xd[0] * xd[0]) - x[0])
    })
}

/// Planar tumor–immune interaction model with delayed coupling, default
/// delay τ_d = 1.64.
pub fn tumor_system() -> DdeSystem {
    tumor_system_with_delay(1.64)
}

pub fn tumor_system_with_delay(delay: f64) -> DdeSystem {
    DdeSystem::new("tumor", 2, delay, |x, xd| {
        let f1 = 0.04411 + 0.6913 * xd[0] * xd[1] / (1.0 + xd[1]) - 0.0383 * xd[0] * xd[1]
            - 0.2288 * x[0];
        let f2 = x[1] * (1.0 - 0.04038 * x[1]) - x[0] * x[1];
        DVector::from_vec(vec![f1, f2])
    })
}
