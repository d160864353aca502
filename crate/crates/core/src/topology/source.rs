use super::TopologyError;
use crate::nh::{EigenSystem, HamiltonianParams};

/// Supplies the eigensystem used at each sample point. Points arrive in path
/// order, so a stateful source may warm-start from the previous one.
pub trait EigenSource {
    fn eigensystem(&mut self, params: &HamiltonianParams) -> Result<EigenSystem, TopologyError>;
}

/// Diagonalizes the model Hamiltonian directly.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactSource;

impl EigenSource for ExactSource {
    fn eigensystem(&mut self, params: &HamiltonianParams) -> Result<EigenSystem, TopologyError> {
        params.validate()?;
        Ok(params.eigensystem())
    }
}

pub(crate) fn eigensystems(
    points: &[HamiltonianParams],
    source: &mut dyn EigenSource,
) -> Result<Vec<EigenSystem>, TopologyError> {
    points.iter().map(|p| source.eigensystem(p)).collect()
}
