//! Numerical laboratory for average-case channel distances and channel
//! certification: Choi-form superoperators, the ACID and ρ norms alongside
//! diamond-norm estimators, Haar-measure concentration experiments, exact
//! acceptance-probability oracles for non-adaptive channel testers, the
//! certification algorithms built on them, and desk-scale channel tomography
//! with CPTP projection.
//!
//! The mdBook under `book/` walks through the concepts; its code snippets are
//! compiled and run as doc-tests (see the `book` module below).

pub mod channels;
pub mod cli;
pub mod haar;
pub mod matcore;
pub mod norms;
pub mod quantum;
pub mod testers;
pub mod tomography;

pub use channels::{Channel, KrausSet, Superop};
pub use haar::SeededStream;
pub use matcore::CMatrix;
pub use quantum::{DensityMatrix, Povm, PureState};

/// Doc-tests for the guide chapters, kept in sync with `book/src`.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }

    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(
        states_and_channels,
        "../../../book/src/states-and-channels.md"
    );
    chapter!(distances, "../../../book/src/distances.md");
    chapter!(
        haar_concentration,
        "../../../book/src/haar-concentration.md"
    );
    chapter!(certification, "../../../book/src/certification.md");
    chapter!(tomography, "../../../book/src/tomography.md");
    chapter!(cli_guide, "../../../book/src/cli.md");
}
