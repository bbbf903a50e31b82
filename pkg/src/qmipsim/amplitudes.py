"""Sparse state vectors over hashable configurations.

A state vector is a plain dict mapping a configuration id to a complex
amplitude. Entries below PRUNE_TOL in magnitude are dropped; the squared
norm never exceeds 1 (up to rounding) because measurement only removes
mass. Residuals after a measurement stay unnormalized on purpose: their
squared norm is the probability that the machine has not halted yet, so
cumulative halting probabilities can be read off directly.
"""
from __future__ import annotations

from typing import Any, Callable, Hashable, Iterable

from .errors import MissingTransition

StateVector = dict[Hashable, complex]

PRUNE_TOL = 1e-15
NORM_TOL = 1e-9
CONSERVATION_TOL = 1e-12


def norm_sq(state: StateVector) -> float:
    """Squared 2-norm, i.e. the total probability mass the state carries."""
    return sum((a * a.conjugate()).real for a in state.values())


def prune(state: StateVector) -> StateVector:
    """Drop entries with magnitude below PRUNE_TOL."""
    return {c: a for c, a in state.items() if abs(a) >= PRUNE_TOL}


def inner_product(a: StateVector, b: StateVector) -> complex:
    """<a|b>, conjugate-linear in the first argument."""
    if len(b) < len(a):
        return complex(sum(a[c].conjugate() * amp for c, amp in b.items() if c in a))
    return complex(sum(amp.conjugate() * b[c] for c, amp in a.items() if c in b))


SparseOperator = Callable[[Hashable], Iterable[tuple[Hashable, complex]]]


def apply_sparse_operator(op: SparseOperator | dict[Any, Any], state: StateVector) -> StateVector:
    """Apply a sparse linear operator given column-wise.

    `op` maps a source configuration to its target list [(config, amplitude), ...],
    either as a dict or as a callable. Every populated configuration must have a
    column; otherwise MissingTransition carries the offending configuration.
    Amplitudes interfere additively and near-zero results are pruned.
    """
    lookup = op.__getitem__ if isinstance(op, dict) else op
    out: StateVector = {}
    for config, amp in state.items():
        try:
            column = lookup(config)
        except KeyError:
            raise MissingTransition(config) from None
        if column is None:
            raise MissingTransition(config)
        for target, weight in column:
            value = out.get(target, 0j) + amp * weight
            out[target] = value
    return prune(out)


def measure_halting(
    state: StateVector,
    accepting: Callable[[Hashable], bool],
    rejecting: Callable[[Hashable], bool],
) -> tuple[float, float, StateVector]:
    """Project onto accept / reject / non-halting subspaces.

    Returns (p_acc, p_rej, residual). The predicates must be disjoint. The
    residual keeps the non-halting amplitudes unchanged (not renormalized),
    so p_acc + p_rej + norm_sq(residual) equals the incoming mass.
    """
    p_acc = 0.0
    p_rej = 0.0
    residual: StateVector = {}
    for config, amp in state.items():
        mass = (amp * amp.conjugate()).real
        if accepting(config):
            p_acc += mass
        elif rejecting(config):
            p_rej += mass
        else:
            residual[config] = amp
    return p_acc, p_rej, residual
