import math
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from config import load_config
from Experiments.experiments import counterexample_problem
from Models.copson_grid import GridSpec
from Models.copson_problem import Parameters, Problem
from Models.copson_weights import constant, exponential

# Fenêtre de test: grossière pour garder la suite rapide
TEST_GRID = GridSpec(1e-3, 1e3, 8)


def make_problem(p, q, m, u=None, v=None, w=None, grid=TEST_GRID, anchor=1.0):
    """Problème avec u = w = 1 et v = e^t par défaut"""
    return Problem(
        Parameters(p, q, m),
        constant(1.0) if u is None else u,
        exponential(1.0) if v is None else v,
        constant(1.0) if w is None else w,
        grid,
        anchor,
    )


@pytest.fixture
def testing_config():
    return load_config('testing')


@pytest.fixture
def grid():
    return TEST_GRID


@pytest.fixture
def exp_problem():
    """u = w = 1, v = e^t, p = q = m = 2: A1 = sqrt(2)/e"""
    return make_problem(2, 2, 2)


@pytest.fixture
def unit_problem():
    """u = v = w = 1: sigma est infinie"""
    return make_problem(2, 2, 2, v=constant(1.0))


@pytest.fixture
def a1_value():
    return math.sqrt(2) / math.e


@pytest.fixture
def counterexample():
    """p = 2, q = 1/2, m = 3/4, w = indicatrice de (0, 1]"""
    return counterexample_problem(2.0, 0.5, 0.75, 1)
