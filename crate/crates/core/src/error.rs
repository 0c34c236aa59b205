use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The Gaussian damping factor `exp(sigma^2 / (2 h^2))` would overflow.
    #[error("damping exponent sigma^2/(2h^2) = {exponent:.3} exceeds the cap {cap}; increase the bandwidth")]
    ExponentOverflow { exponent: f64, cap: f64 },

    /// The frequency grid does not reach the end of the kernel support `1/h`.
    #[error("frequency grid covers [0, {covered:.6}] but the integrand needs [0, {required:.6}]")]
    Coverage { covered: f64, required: f64 },

    #[error("adaptive quadrature on [{a}, {b}] did not converge within depth {depth}")]
    MaxDepthExceeded { a: f64, b: f64, depth: u32 },

    #[error("moment of order {order} does not exist for kernel `{kernel}` (tail decays like |x|^-{decay})")]
    NonIntegrableMoment { kernel: String, order: u32, decay: f64 },

    #[error("FFT output has a non-negligible imaginary part ({max_imag:e} vs max real {max_real:e})")]
    NonRealResult { max_imag: f64, max_real: f64 },

    #[error("model has zero variance for Y = BV")]
    DegenerateModel,

    #[error("input is empty")]
    EmptyInput,

    /// A parameter violates its documented domain; the string names the field.
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
}

impl Error {
    pub fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { field, reason: reason.into() }
    }

    /// True for numerical-domain failures as opposed to input validation.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ExponentOverflow { .. }
                | Error::Coverage { .. }
                | Error::MaxDepthExceeded { .. }
                | Error::NonIntegrableMoment { .. }
                | Error::NonRealResult { .. }
                | Error::DegenerateModel
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
