use thiserror::Error;

pub type Result<T> = core::result::Result<T, CpmError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CpmError {
    /// A real-valued argument is outside its admissible range.
    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    /// A Fock index does not fit into the truncated space.
    #[error("photon number {n} exceeds truncation n_max = {n_max}")]
    Truncation { n: usize, n_max: usize },
    /// The quantity is a 0/0 or x/0 form for this input.
    #[error("{0} is undefined for this input")]
    Undefined(&'static str),
}

pub(crate) fn check_non_negative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(CpmError::Domain {
            name,
            value,
            expected: "finite and >= 0",
        })
    }
}

pub(crate) fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(CpmError::Domain {
            name,
            value,
            expected: "within [0, 1]",
        })
    }
}
