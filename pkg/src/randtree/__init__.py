"""Simulator and analytic toolkit for birth-death random trees.

A rooted tree evolves by Poisson edge adjunction (rate lambda per vertex)
and leaf deletion (rate mu per leaf); the phase transition sits at
rho = lambda / mu = 1/e.  The package pairs an exact event-driven
simulator with the closed-form machinery: regime classification, the
Volterra lifetime system, stationary laws (Borel volume, geometric
height tails), transient growth rates and the multiclass extension.
"""

from .model_core import (
    Classification,
    INV_E,
    ModelParams,
    Regime,
    classify,
    ell_bounds,
    solve_r,
    solve_x,
)
from .multiclass import RateMatrices, classify_multiclass
from .tree_sim import SimConfig, Trajectory, TreeState, new_tree, simulate, step

__all__ = [
    "Classification",
    "INV_E",
    "ModelParams",
    "RateMatrices",
    "Regime",
    "SimConfig",
    "Trajectory",
    "TreeState",
    "classify",
    "classify_multiclass",
    "ell_bounds",
    "new_tree",
    "simulate",
    "solve_r",
    "solve_x",
    "step",
]

__version__ = "0.1.0"
