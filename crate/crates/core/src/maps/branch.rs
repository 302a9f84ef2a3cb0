use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric::Dd;

/// Tolerance for branch images that overshoot `[0, 1]` through rounding.
const IMAGE_TOL: f64 = 1e-12;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A C² monotone branch given by evaluators and certified class bounds.
#[derive(Clone)]
pub struct SmoothBranch {
    pub value: RealFn,
    pub derivative: RealFn,
    pub second_derivative: RealFn,
    /// Certified lower bound on `|T'|` over the branch domain.
    pub min_expansion: f64,
    /// Certified upper bound on `|T''|` over the branch domain.
    pub max_curvature: f64,
}

#[derive(Clone)]
pub enum BranchKind {
    /// `x ↦ slope·x + intercept`.
    Affine { slope: f64, intercept: f64 },
    Smooth(SmoothBranch),
}

/// One monotone expanding piece of an interval map, acting on the
/// half-open domain `[start, end)`.
#[derive(Clone)]
pub struct Branch {
    start: f64,
    end: f64,
    kind: BranchKind,
}

impl fmt::Debug for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            BranchKind::Affine { slope, intercept } => write!(
                f,
                "Branch[{}, {}) affine slope={} intercept={}",
                self.start, self.end, slope, intercept
            ),
            BranchKind::Smooth(s) => write!(
                f,
                "Branch[{}, {}) smooth λ={} M={}",
                self.start, self.end, s.min_expansion, s.max_curvature
            ),
        }
    }
}

impl Branch {
    pub fn affine(start: f64, end: f64, slope: f64, intercept: f64) -> Result<Self> {
        if !(slope.abs() > 1.0) || !slope.is_finite() || !intercept.is_finite() {
            return Err(Error::Argument(format!(
                "affine branch slope must satisfy |slope| > 1, got {slope}"
            )));
        }
        let branch = Branch {
            start,
            end,
            kind: BranchKind::Affine { slope, intercept },
        };
        branch.check_domain_and_image()?;
        Ok(branch)
    }

    /// Builds a smooth branch. Monotonicity and the expansion bound are
    /// spot-checked on a fixed grid; the bounds themselves are trusted.
    pub fn smooth(start: f64, end: f64, spec: SmoothBranch) -> Result<Self> {
        if !(spec.min_expansion > 1.0) {
            return Err(Error::Argument(format!(
                "smooth branch needs certified inf|T'| > 1, got {}",
                spec.min_expansion
            )));
        }
        if !(spec.max_curvature >= 0.0) {
            return Err(Error::Argument(
                "smooth branch curvature bound must be nonnegative".into(),
            ));
        }
        let branch = Branch {
            start,
            end,
            kind: BranchKind::Smooth(spec),
        };
        branch.check_domain_and_image()?;
        let sign = branch.derivative(0.5 * (start + end)).signum();
        for i in 0..=32 {
            let x = start + (end - start) * (i as f64) / 32.0;
            let d = branch.derivative(x);
            if d.signum() != sign || d.abs() < branch.min_expansion() * (1.0 - 1e-9) {
                return Err(Error::Argument(format!(
                    "smooth branch on [{start}, {end}) violates monotonicity or its expansion bound at {x}"
                )));
            }
        }
        Ok(branch)
    }

    fn check_domain_and_image(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.start) || !(self.end > self.start) || self.end > 1.0 {
            return Err(Error::Argument(format!(
                "branch domain [{}, {}) is not a nonempty subinterval of [0, 1)",
                self.start, self.end
            )));
        }
        let (lo, hi) = self.raw_image();
        if lo < -IMAGE_TOL || hi > 1.0 + IMAGE_TOL {
            return Err(Error::Argument(format!(
                "branch on [{}, {}) has image [{lo}, {hi}] outside [0, 1]",
                self.start, self.end
            )));
        }
        Ok(())
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn width(&self) -> f64 {
        self.end - self.start
    }

    pub fn kind(&self) -> &BranchKind {
        &self.kind
    }

    pub fn is_affine(&self) -> bool {
        matches!(self.kind, BranchKind::Affine { .. })
    }

    /// Slope and intercept when the branch is affine.
    pub fn affine_coefficients(&self) -> Option<(f64, f64)> {
        match self.kind {
            BranchKind::Affine { slope, intercept } => Some((slope, intercept)),
            BranchKind::Smooth(_) => None,
        }
    }

    /// Evaluates the branch formula. Valid on the closed domain, so
    /// `apply(end)` is the left limit at the right endpoint.
    pub fn apply(&self, x: f64) -> f64 {
        match &self.kind {
            BranchKind::Affine { slope, intercept } => slope.mul_add(x, *intercept),
            BranchKind::Smooth(s) => (s.value)(x),
        }
    }

    pub(crate) fn apply_dd(&self, x: Dd) -> Dd {
        match &self.kind {
            BranchKind::Affine { slope, intercept } => x.mul_f64(*slope).add_f64(*intercept),
            BranchKind::Smooth(s) => {
                let base = (s.value)(x.hi);
                Dd::from_sum(base, (s.derivative)(x.hi) * x.lo)
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match &self.kind {
            BranchKind::Affine { slope, .. } => *slope,
            BranchKind::Smooth(s) => (s.derivative)(x),
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match &self.kind {
            BranchKind::Affine { .. } => 0.0,
            BranchKind::Smooth(s) => (s.second_derivative)(x),
        }
    }

    /// Lower bound on `|T'|` over the domain (exact for affine branches).
    pub fn min_expansion(&self) -> f64 {
        match &self.kind {
            BranchKind::Affine { slope, .. } => slope.abs(),
            BranchKind::Smooth(s) => s.min_expansion,
        }
    }

    /// Upper bound on `|T''|` over the domain.
    pub fn max_curvature(&self) -> f64 {
        match &self.kind {
            BranchKind::Affine { .. } => 0.0,
            BranchKind::Smooth(s) => s.max_curvature,
        }
    }

    pub fn is_increasing(&self) -> bool {
        self.derivative(0.5 * (self.start + self.end)) > 0.0
    }

    fn raw_image(&self) -> (f64, f64) {
        let a = self.apply(self.start);
        let b = self.apply(self.end);
        (a.min(b), a.max(b))
    }

    /// Closed hull `[lo, hi]` of the branch image, clamped to `[0, 1]`.
    pub fn image(&self) -> (f64, f64) {
        let (lo, hi) = self.raw_image();
        (lo.max(0.0), hi.min(1.0))
    }

    /// Whether `y` is attained by the branch on its half-open domain.
    pub fn image_contains(&self, y: f64) -> bool {
        let (lo, hi) = self.image();
        if self.is_increasing() {
            lo <= y && y < hi
        } else {
            lo < y && y <= hi
        }
    }

    /// Inverse of the branch on its image; `y` is clamped to the image.
    pub fn inverse(&self, y: f64) -> f64 {
        match &self.kind {
            BranchKind::Affine { slope, intercept } => {
                ((y - intercept) / slope).clamp(self.start, self.end)
            }
            BranchKind::Smooth(s) => {
                let increasing = self.is_increasing();
                let (mut lo, mut hi) = (self.start, self.end);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    let v = (s.value)(mid);
                    if (v < y) == increasing {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }
}
