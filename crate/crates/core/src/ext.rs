use std::cmp::Ordering;
use std::fmt;

/// A real number or `+inf`.
///
/// Barrier values are genuinely extended-real valued, so `+inf` is carried as
/// its own variant instead of an `f64::INFINITY` sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInf => None,
        }
    }

    /// Panics on `+inf`. Use only where finiteness is an invariant.
    pub fn unwrap(self) -> f64 {
        self.finite().expect("ExtReal::unwrap on +inf")
    }

    /// Lossy conversion for output formatting.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::Finite(v) => v,
            ExtReal::PosInf => f64::INFINITY,
        }
    }
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> Self {
        ExtReal::Finite(v)
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.partial_cmp(b),
            (ExtReal::Finite(_), ExtReal::PosInf) => Some(Ordering::Less),
            (ExtReal::PosInf, ExtReal::Finite(_)) => Some(Ordering::Greater),
            (ExtReal::PosInf, ExtReal::PosInf) => Some(Ordering::Equal),
        }
    }
}

impl std::ops::Add for ExtReal {
    type Output = ExtReal;

    fn add(self, rhs: ExtReal) -> ExtReal {
        match (self, rhs) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a + b),
            _ => ExtReal::PosInf,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInf => write!(f, "+inf"),
        }
    }
}
