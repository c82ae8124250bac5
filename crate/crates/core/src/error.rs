use nalgebra::Complex;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

fn list(eigs: &[Complex<f64>]) -> String {
    eigs.iter()
        .map(|z| format!("{:.12e}{:+.12e}i", z.re, z.im))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Spectrum on (or numerically on) the imaginary axis.
    #[error("operator is not dichotomous; eigenvalues on the imaginary axis: [{}]", list(.eigenvalues))]
    NotDichotomous { eigenvalues: Vec<Complex<f64>> },

    #[error("resolvent requested at a spectral point λ = {}", list(std::slice::from_ref(.lambda)))]
    Singular { lambda: Complex<f64> },

    #[error("operator is not quasi-sectorial on the sampled sector; violating eigenvalues: [{}]", list(.eigenvalues))]
    NotSectorial { eigenvalues: Vec<Complex<f64>> },

    #[error(
        "{context}: accuracy target {target:e} not reached (achieved {achieved:e} after {evaluations} evaluations)"
    )]
    Accuracy {
        context: &'static str,
        achieved: f64,
        target: f64,
        evaluations: usize,
    },

    #[error("{context}: consistency defect {defect:e} exceeds tolerance {tolerance:e}")]
    Consistency {
        context: &'static str,
        defect: f64,
        tolerance: f64,
    },

    #[error("invariant subspace has dimension {found}, expected {expected} (dichotomy imbalance)")]
    DichotomyImbalance { expected: usize, found: usize },

    #[error("subspace is not a graph: top block smallest singular value {margin:e}")]
    NotAGraph { margin: f64 },

    #[error("closed-loop spectrum does not match the stable Hamiltonian spectrum (distance {distance:e}, tolerance {tolerance:e})")]
    Similarity { distance: f64, tolerance: f64 },

    #[error("numerical factorization failed: {0}")]
    Factorization(&'static str),

    #[error("problem generation failed: {0}")]
    Generation(String),
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::Dimension {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
