"""Fold assignment for cross-fitting."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import InvalidConfigError, SingleClassError, TooFewUnitsError


@dataclass(frozen=True)
class FoldPlan:
    n: int
    n_folds: int
    assignment: tuple
    seed: int
    stratified: bool

    def indices(self, fold: int):
        """``(train, test)`` index arrays for ``fold``."""
        a = np.asarray(self.assignment)
        return np.flatnonzero(a != fold), np.flatnonzero(a == fold)

    def sizes(self) -> list:
        return np.bincount(np.asarray(self.assignment), minlength=self.n_folds).tolist()


def make_folds(n: int, n_folds: int = 5, seed: int = 0, treatments=None, stratified: bool = True) -> FoldPlan:
    """Shuffle units and deal them round-robin into ``n_folds`` folds.

    With ``stratified=True`` treated units are dealt first and controls
    continue the same rotation, so per-fold treated counts and total sizes
    both differ by at most one.
    """
    if n_folds < 2:
        raise InvalidConfigError("need at least 2 folds")
    if n < n_folds:
        raise TooFewUnitsError(f"{n} units cannot fill {n_folds} folds")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed)]))
    if stratified:
        if treatments is None:
            raise InvalidConfigError("stratified folds need treatments")
        t = np.asarray(treatments)
        if t.shape[0] != n:
            raise InvalidConfigError("treatments length differs from n")
        treated = np.flatnonzero(t == 1)
        control = np.flatnonzero(t == 0)
        if treated.size == 0 or control.size == 0:
            raise SingleClassError("stratified folds need treated and control units")
        order = np.concatenate([rng.permutation(treated), rng.permutation(control)])
    else:
        order = rng.permutation(n)
    assignment = np.empty(n, dtype=int)
    assignment[order] = np.arange(n) % n_folds
    return FoldPlan(n, n_folds, tuple(assignment.tolist()), int(seed), bool(stratified))
