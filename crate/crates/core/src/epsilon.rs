//! ε constraint handling: a comparator that treats violations up to a
//! shrinking level ε as feasible, with ε decaying over the generations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_LAMBDA: f64 = 10.0;
pub const DEFAULT_GC_FRACTION: f64 = 0.2;

/// Degree of violation of a single `g <= 0` constraint.
#[inline]
pub fn violation_degree(g: f64) -> f64 {
    g.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    eps0: f64,
    gc: usize,
    gmax: usize,
    lambda: f64,
    cp: f64,
}

impl EpsilonSchedule {
    /// `eps0` is the largest violation in the initial population.
    ///
    /// When `eps0 <= e^-λ` the exponent would be non-positive; it is clamped to
    /// zero so ε stays at `eps0` until the cutoff.
    pub fn new(eps0: f64, gc: usize, gmax: usize, lambda: f64) -> Result<Self> {
        if !(eps0 >= 0.0 && eps0.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps0 must be finite and nonnegative, got {eps0}")));
        }
        if gc == 0 || gc >= gmax {
            return Err(Error::InvalidParameter(format!("need 0 < gc < gmax, got gc={gc}, gmax={gmax}")));
        }
        let cp = if eps0 > 0.0 {
            let raw = -(eps0.ln() + lambda) / (1.0 - gc as f64 / gmax as f64).ln();
            raw.max(0.0)
        } else {
            0.0
        };
        Ok(Self { eps0, gc, gmax, lambda, cp })
    }

    /// Cutoff at `⌊fraction · gmax⌋`, kept inside `(0, gmax)`.
    pub fn with_fraction(eps0: f64, gc_fraction: f64, gmax: usize, lambda: f64) -> Result<Self> {
        if !(gc_fraction > 0.0 && gc_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!("gc fraction must lie in (0,1), got {gc_fraction}")));
        }
        if gmax < 2 {
            return Err(Error::InvalidParameter(format!("gmax must be >= 2, got {gmax}")));
        }
        let gc = ((gc_fraction * gmax as f64).floor() as usize).clamp(1, gmax - 1);
        Self::new(eps0, gc, gmax, lambda)
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn gc(&self) -> usize {
        self.gc
    }

    pub fn gmax(&self) -> usize {
        self.gmax
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn cp(&self) -> f64 {
        self.cp
    }

    pub fn epsilon_at(&self, generation: usize) -> f64 {
        if self.eps0 == 0.0 || generation > self.gc {
            return 0.0;
        }
        self.eps0 * (1.0 - generation as f64 / self.gmax as f64).powf(self.cp)
    }
}

/// Anything carrying an objective value and a violation degree.
pub trait Scored {
    fn objective(&self) -> f64;
    fn violation(&self) -> f64;
}

impl Scored for (f64, f64) {
    fn objective(&self) -> f64 {
        self.0
    }

    fn violation(&self) -> f64 {
        self.1
    }
}

impl Scored for crate::dynamics::Evaluation {
    fn objective(&self) -> f64 {
        self.f
    }

    fn violation(&self) -> f64 {
        self.violation
    }
}

/// ε-level comparison: is `a` strictly better than `b`?
pub fn better_than<A: Scored, B: Scored>(a: &A, b: &B, eps: f64) -> bool {
    let (fa, ga) = (a.objective(), a.violation());
    let (fb, gb) = (b.objective(), b.violation());
    if (ga <= eps && gb <= eps) || ga == gb {
        fa < fb
    } else {
        ga < gb
    }
}

/// Index of the ε-best member. Ties keep the earliest index.
pub fn best_index<S: Scored>(items: &[S], eps: f64) -> Option<usize> {
    let mut it = items.iter().enumerate();
    let (mut best, mut best_item) = it.next()?;
    for (i, item) in it {
        if better_than(item, best_item, eps) {
            best = i;
            best_item = item;
        }
    }
    Some(best)
}
