"""Shared fixtures: cached solver results and toy games.

The minimax and frontier solves are deterministic but not free, so one
session-scoped cache hands the same results to every test that needs
them.  Tests that time a criterion report their own body's wall time.
"""

from __future__ import annotations

import warnings

import pytest

from polyreward.aqp import solve_aqp
from polyreward.minimax import solve_minimax
from polyreward.presets import euclid_toy, kl_toy


class _MinimaxCache:
    def __init__(self):
        self._results = {}

    def __call__(self, K: int):
        if K not in self._results:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                self._results[K] = solve_minimax(K)
        return self._results[K]


@pytest.fixture(scope="session")
def minimax_cache():
    return _MinimaxCache()


class _AqpCache:
    def __init__(self, minimax_cache):
        self._minimax = minimax_cache
        self._points = {}

    def __call__(self, K: int, multiple: float):
        key = (K, multiple)
        if key not in self._points:
            ref = self._minimax(K)
            self._points[key] = solve_aqp(
                K, epsilon=multiple * ref.epsilon, reference=ref
            )
        return self._points[key]


@pytest.fixture(scope="session")
def aqp_cache(minimax_cache):
    return _AqpCache(minimax_cache)


@pytest.fixture(scope="session")
def euclid_game():
    return euclid_toy()


@pytest.fixture(scope="session")
def kl_game():
    return kl_toy()
