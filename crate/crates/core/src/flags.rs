//! Quality flags raised along the estimation pipeline.
//!
//! Entry-level flags (`NullSample`, `SignIndeterminate`, `WeakAmplitude`)
//! mark individual grid entries that are excluded from subspace fits but do
//! not invalidate a trial. Report-level flags mark estimates that downstream
//! consumers must treat as missing.

/// A single pipeline condition. See [`FlagSet`] for aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum Flag {
    /// Received sample magnitude below 1e-300; the entry carries no phase.
    NullSample = 1 << 0,
    /// Bessel-product magnitude at the sign reference angle below 1e-12;
    /// the compensation sign is unreliable.
    SignIndeterminate = 1 << 1,
    /// Mean received amplitude below the configured fraction of the median;
    /// the entry is excluded from subspace fits as noise-dominated.
    WeakAmplitude = 1 << 2,
    /// Power iteration hit its iteration cap before the Rayleigh quotient
    /// settled; the best iterate was used.
    NoConvergence = 1 << 3,
    /// Top two covariance eigenvalues are within tolerance of each other;
    /// the principal direction is not identifiable.
    DegenerateSpectrum = 1 << 4,
    /// Leading subvector of the eigenvector has (near-)zero norm; the
    /// invariance phase is undefined.
    ZeroSubvector = 1 << 5,
    /// No carrier-axis vector (a grid row, or the reference vector for the
    /// range-offset fit) had two or more usable entries.
    NoUsableRows = 1 << 6,
    /// No grid column had two or more usable entries.
    NoUsableColumns = 1 << 7,
    /// |cos(gamma)| below 1e-12; elevation reported as pi/2.
    GammaDegenerate = 1 << 8,
    /// Unclamped inversion radicand exceeded 1 + 1e-6; intermediates are
    /// mutually inconsistent beyond noise rounding.
    RadicandOverflow = 1 << 9,
    /// |xi - r| difference exceeded the receive radius beyond tolerance.
    InconsistentIntermediates = 1 << 10,
}

impl Flag {
    /// Stable lower-case name used in reports and CSV output.
    pub fn name(self) -> &'static str {
        match self {
            Flag::NullSample => "null_sample",
            Flag::SignIndeterminate => "sign_indeterminate",
            Flag::WeakAmplitude => "weak_amplitude",
            Flag::NoConvergence => "no_convergence",
            Flag::DegenerateSpectrum => "degenerate_spectrum",
            Flag::ZeroSubvector => "zero_subvector",
            Flag::NoUsableRows => "no_usable_rows",
            Flag::NoUsableColumns => "no_usable_columns",
            Flag::GammaDegenerate => "gamma_degenerate",
            Flag::RadicandOverflow => "radicand_overflow",
            Flag::InconsistentIntermediates => "inconsistent_intermediates",
        }
    }

    const ALL: [Flag; 11] = [
        Flag::NullSample,
        Flag::SignIndeterminate,
        Flag::WeakAmplitude,
        Flag::NoConvergence,
        Flag::DegenerateSpectrum,
        Flag::ZeroSubvector,
        Flag::NoUsableRows,
        Flag::NoUsableColumns,
        Flag::GammaDegenerate,
        Flag::RadicandOverflow,
        Flag::InconsistentIntermediates,
    ];
}

/// Set of [`Flag`]s packed into one word.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlagSet(u16);

impl FlagSet {
    /// The empty set.
    pub const EMPTY: FlagSet = FlagSet(0);

    /// Inserts one flag.
    pub fn insert(&mut self, f: Flag) {
        self.0 |= f as u16;
    }

    /// Merges another set into this one.
    pub fn merge(&mut self, other: FlagSet) {
        self.0 |= other.0;
    }

    /// Returns true when the flag is present.
    pub fn contains(self, f: Flag) -> bool {
        self.0 & (f as u16) != 0
    }

    /// Returns true when no flag is present.
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Builds a set from raw bits; bits outside the defined flags are kept
    /// but never iterated.
    pub const fn from_bits(bits: u16) -> FlagSet {
        FlagSet(bits)
    }

    /// Returns true when the two sets share at least one flag.
    pub const fn intersects(self, other: FlagSet) -> bool {
        self.0 & other.0 != 0
    }

    /// Iterates the flags present, in declaration order.
    pub fn iter(self) -> impl Iterator<Item = Flag> {
        Flag::ALL.into_iter().filter(move |f| self.contains(*f))
    }
}

impl core::fmt::Display for FlagSet {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        if self.is_empty() {
            return write!(f, "-");
        }
        let mut first = true;
        for flag in self.iter() {
            if !first {
                write!(f, ";")?;
            }
            write!(f, "{}", flag.name())?;
            first = false;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_roundtrip() {
        let mut s = FlagSet::EMPTY;
        assert!(s.is_empty());
        s.insert(Flag::NullSample);
        s.insert(Flag::GammaDegenerate);
        assert!(s.contains(Flag::NullSample));
        assert!(s.contains(Flag::GammaDegenerate));
        assert!(!s.contains(Flag::NoConvergence));
        let names: alloc::vec::Vec<_> = s.iter().map(|f| f.name()).collect();
        assert_eq!(names, ["null_sample", "gamma_degenerate"]);
    }

    #[test]
    fn display_joins_names() {
        let mut s = FlagSet::EMPTY;
        assert_eq!(alloc::format!("{s}"), "-");
        s.insert(Flag::RadicandOverflow);
        s.insert(Flag::NoUsableRows);
        assert_eq!(alloc::format!("{s}"), "no_usable_rows;radicand_overflow");
    }
}
