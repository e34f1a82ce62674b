"""Reproducible random preimages and the named builtin potentials."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .fiber import forward_miura
from .grid import Grid, GridFn
from .potential import (
    Potential,
    make_constant,
    make_delta,
    make_square_well,
    make_w_eps,
    make_well_perturbation,
)

BUILTINS = ("square_well", "delta", "w_eps", "well_perturbation", "zero", "constant")


def bump(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1
    return np.where(inside, np.exp(-1 / np.where(inside, 1 - s * s, 1.0)), 0.0)


def random_compact_r(rng: np.random.Generator, grid: Grid, radius: float = 4.0, terms: int = 4) -> GridFn:
    """Sum of bumps with random centres, widths and signed heights, supported in ``[-radius, radius]``."""
    x = grid.x
    out = np.zeros_like(x)
    for _ in range(terms):
        w = rng.uniform(1.0, radius / 2)
        c = rng.uniform(-radius + w, radius - w)
        out += rng.uniform(-2.0, 2.0) * np.e * bump((x - c) / w)
    return GridFn(grid, out)


def random_r(rng: np.random.Generator, grid: Grid, allow_jump: bool = True) -> tuple[GridFn, list]:
    """Gaussian sums with heavy or light amplitudes, optionally one jump at a node."""
    x = grid.x
    out = np.zeros_like(x)
    for _ in range(rng.integers(1, 6)):
        out += rng.uniform(-3, 3) * np.exp(-(((x - rng.uniform(-5, 5)) / rng.uniform(0.3, 2.5)) ** 2))
    jumps = []
    if allow_jump and rng.random() < 0.5:
        k = grid.nearest_index(float(rng.uniform(-5, 5)))
        J = float(rng.uniform(-2, 2))
        # nodes hold left limits, so the node itself keeps the smooth value
        out += np.where(x > x[k], J * np.exp(-((x - x[k]) ** 2)), 0.0)
        jumps.append((float(x[k]), J))
    return GridFn(grid, out), jumps


def random_image(rng: np.random.Generator, grid: Grid, compact: bool = True) -> tuple[Potential, GridFn, list]:
    if compact:
        r = random_compact_r(rng, grid)
        return forward_miura(r), r, []
    r, jumps = random_r(rng, grid)
    return forward_miura(r, jumps), r, jumps


def default_grid(name: str, eps: Optional[float] = None) -> Grid:
    if name in ("square_well", "delta", "zero"):
        return Grid(-20.0, 20.0, 4000)
    if name == "constant":
        return Grid(-10.0, 10.0, 400)
    if name == "w_eps":
        e = 0.1 if eps is None else eps
        return Grid(-4 / e, 4 / e, int(round(400 / e)))
    if name == "well_perturbation":
        e = 0.01 if eps is None else eps
        b = 2.0 + 3 / e + 8.0
        return Grid(-8.0, b, int(round((b + 8.0) / 0.02)))
    raise ValueError(f"unknown builtin {name!r}; choose from {', '.join(BUILTINS)}")


def builtin(name: str, grid: Optional[Grid] = None, lam: Optional[float] = None,
            eps: Optional[float] = None) -> Potential:
    """Named potential. ``lam`` is the delta weight, the square-well mass or the constant value."""
    grid = grid or default_grid(name, eps)
    if name == "zero":
        return Potential.from_parts(grid, label={"kind": "zero"})
    if name == "square_well":
        b = 1.0 if lam is None else float(np.sqrt(lam / 2))
        return make_square_well(1.0, b, grid)
    if name == "delta":
        return make_delta(1.0 if lam is None else lam, 0.0, grid)
    if name == "constant":
        return make_constant(1.0 if lam is None else lam, grid)
    if name == "w_eps":
        q = make_w_eps(0.1 if eps is None else eps, grid)
        return Potential(q.grid, q.f, q.g, q.atoms, {"kind": "w_eps", "eps": 0.1 if eps is None else eps})
    if name == "well_perturbation":
        base = make_square_well(1.0, 1.0 if lam is None else float(np.sqrt(lam / 2)), grid)
        q = make_well_perturbation(base, 0.01 if eps is None else eps)
        return Potential(q.grid, q.f, q.g, q.atoms, {"kind": "well_perturbation", "eps": 0.01 if eps is None else eps})
    raise ValueError(f"unknown builtin {name!r}; choose from {', '.join(BUILTINS)}")
