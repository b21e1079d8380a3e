//! The restricted "classical" party of the semi-quantum protocols.
//!
//! A classical party can only let a qubit through untouched or measure it in
//! the computational basis and resend the result. No other capability is
//! exposed, so a diagonal measurement cannot be expressed:
//!
//! ```compile_fail
//! use quantum_lottery::classical::ClassicalParty;
//! use quantum_lottery::qsim::{prepare_bb84, Basis};
//! use quantum_lottery::RandomStream;
//!
//! let party = ClassicalParty;
//! let q = prepare_bb84(0, Basis::Diagonal).unwrap();
//! party.measure(q, Basis::Diagonal, &mut RandomStream::new(0, "x"));
//! ```

use serde::{Deserialize, Serialize};

use crate::qsim::{measure, Basis, PureState, QsimError};
use crate::rng::RandomStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassicalAction {
    /// Reflect / forward the qubit untouched.
    Pass,
    /// Measure in Z and resend the resulting basis state.
    MeasureZ,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ClassicalParty;

impl ClassicalParty {
    pub fn reflect(&self, qubit: PureState) -> PureState {
        qubit
    }

    /// Measures in Z; the returned state is the freshly prepared `|outcome⟩`.
    pub fn measure_z(
        &self,
        qubit: PureState,
        randomness: &mut RandomStream,
    ) -> Result<(u8, PureState), QsimError> {
        let out = measure(&qubit, 0, Basis::Rectilinear, randomness)?;
        Ok((out.value, out.post_state))
    }

    /// Applies `action`, returning the outcome when the qubit was measured.
    pub fn act(
        &self,
        action: ClassicalAction,
        qubit: PureState,
        randomness: &mut RandomStream,
    ) -> Result<(Option<u8>, PureState), QsimError> {
        match action {
            ClassicalAction::Pass => Ok((None, self.reflect(qubit))),
            ClassicalAction::MeasureZ => {
                let (v, q) = self.measure_z(qubit, randomness)?;
                Ok((Some(v), q))
            }
        }
    }
}
