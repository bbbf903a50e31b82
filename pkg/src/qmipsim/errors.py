"""Exception taxonomy shared across the package.

The CLI maps these onto process exit codes: file/parse problems exit 2,
validation problems exit 3, faults raised while running exit 4.
"""
from __future__ import annotations


class QmipError(Exception):
    """Base class for all package-specific errors."""


class SpecFileError(QmipError):
    """A protocol file could not be parsed."""


class ValidationError(QmipError):
    """A machine description violates a structural requirement."""


class InvalidInput(ValidationError):
    """An input string uses symbols outside the declared alphabet."""


class NotFairCoin(ValidationError):
    """A classical row is not in fair-coin normal form (1 or 2 outcomes, weights 1 or 1/2)."""


class NotReversible(ValidationError):
    """A classical prover table is not injective, so it has no permutation form."""


class NotRestrictive(ValidationError):
    """A verifier row superposes more than two branches."""


class NotOrthonormal(ValidationError):
    """Existing table columns fail the pairwise orthonormality check."""


class AlphabetMismatch(ValidationError):
    """Prover communication alphabets differ where a transform needs them equal."""


class NoEraser(ValidationError):
    """The transform requires the last prover to be the builtin eraser."""


class RunFault(QmipError):
    """Base class for faults raised while a protocol is running."""


class MissingTransition(RunFault):
    """A populated configuration has no transition rule; the machine spec is incomplete."""


class SpaceExceeded(RunFault):
    """A prover strategy ran out of private tape cells."""


class FamilyTooLarge(RunFault):
    """A strategy family product exceeds the enumeration guard."""


class Unbounded(RunFault):
    """Derandomization could not bound its enumeration."""
