"""Synthetic instance generation."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .core import Facility, Instance, Point, to_fraction

__all__ = ["random_instance", "random_metric", "proportional_bounds"]


def random_metric(size: int, rng: np.random.Generator, *, integer: bool = False) -> np.ndarray:
    """Shortest-path closure of random edge weights on a complete graph."""
    w = rng.integers(1, 10, size=(size, size)).astype(float) if integer else rng.uniform(0.5, 10.0, (size, size))
    d = np.triu(w, 1)
    d = d + d.T
    for m in range(size):
        d = np.minimum(d, d[:, m, None] + d[None, m, :])
    np.fill_diagonal(d, 0.0)
    return d


def proportional_bounds(sizes, slack) -> tuple[tuple[Fraction, ...], tuple[Fraction, ...]]:
    """``alpha``/``beta`` at each group's overall share plus/minus ``slack``.

    Any instance with these bounds admits a fair assignment: put every point
    in one cluster.
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) == 1:
        return (Fraction(1),), (Fraction(0),)
    n = sum(sizes)
    slack = to_fraction(slack)
    alpha = tuple(min(Fraction(1), Fraction(s, n) + slack) for s in sizes)
    beta = tuple(max(Fraction(0), Fraction(s, n) - slack) for s in sizes)
    return alpha, beta


def random_instance(n: int, n_facilities: int, k: int, ell: int = 1, *, dim: int = 2, seed=None,
                    slack=Fraction(1, 4), grid: int | None = None) -> Instance:
    """Random instance with every group nonempty (when ``n >= ell``).

    Parameters
    ----------
    dim : int
        Coordinate dimension; ``0`` draws an explicit random metric instead.
    grid : int, optional
        Draw integer coordinates (or integer edge weights) in ``[0, grid)``,
        which produces ties and zero distances.
    slack : rational
        Distance of the fairness bounds from each group's share.
    """
    rng = np.random.default_rng(seed)
    groups = np.arange(n) % ell
    rng.shuffle(groups)
    sizes = np.bincount(groups, minlength=ell)
    alpha, beta = proportional_bounds(sizes, slack)
    if dim > 0:
        if grid:
            pc = rng.integers(0, grid, (n, dim)).astype(float)
            fc = rng.integers(0, grid, (n_facilities, dim)).astype(float)
        else:
            pc = rng.uniform(0.0, 10.0, (n, dim))
            fc = rng.uniform(0.0, 10.0, (n_facilities, dim))
        points = tuple(Point(f"p{j}", int(groups[j]), tuple(map(float, pc[j]))) for j in range(n))
        facs = tuple(Facility(f"f{i}", tuple(map(float, fc[i]))) for i in range(n_facilities))
        return Instance(points, facs, k, alpha, beta).validate()
    matrix = random_metric(n + n_facilities, rng, integer=bool(grid))
    points = tuple(Point(f"p{j}", int(groups[j])) for j in range(n))
    facs = tuple(Facility(f"f{i}") for i in range(n_facilities))
    return Instance(points, facs, k, alpha, beta, matrix).validate()
