"""Cone taxonomy: the parameter subspaces the statistic directs power toward.

A cone is a set closed under positive scalar multiplication. A *scone* is
additionally closed under multiplication by any positive-definite diagonal
matrix (a union of sub-orthants); sparsity and sign hypotheses live there.
Membership tolerances: sign and sparsity tests are exact, norm inequalities
get 1e-12 absolute slack.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import ConeSpecError, UnsupportedConeOperation

_NORM_SLACK = 1e-12


def _check_vec(v, p) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (p,):
        raise ValueError(f"expected vector of length {p}, got shape {v.shape}")
    return v


class Cone:
    """Base class; concrete kinds implement membership and polar membership."""

    p: int

    def contains(self, v, cov=None) -> bool:
        raise NotImplementedError

    def polar_contains(self, v) -> bool:
        raise NotImplementedError

    def is_scone(self) -> bool:
        raise NotImplementedError


@dataclass(frozen=True)
class FullSpace(Cone):
    """All of R^p. The conic statistic over it is the Wald statistic."""

    p: int

    def contains(self, v, cov=None):
        _check_vec(v, self.p)
        return True

    def polar_contains(self, v):
        v = _check_vec(v, self.p)
        return bool(np.all(v == 0.0))

    def is_scone(self):
        return True


@dataclass(frozen=True)
class NonNegOrthant(Cone):
    """{v : v >= 0}; polar is the nonpositive orthant (one-sided hypotheses)."""

    p: int

    def contains(self, v, cov=None):
        v = _check_vec(v, self.p)
        return bool(np.all(v >= 0.0))

    def polar_contains(self, v):
        v = _check_vec(v, self.p)
        return bool(np.all(v <= 0.0))

    def is_scone(self):
        return True


@dataclass(frozen=True)
class Coordinate(Cone):
    """The j-th coordinate axis (both signs); yields a single t-statistic."""

    index: int
    p: int

    def __post_init__(self):
        if not 0 <= self.index < self.p:
            raise ValueError(f"coordinate index {self.index} out of range for p={self.p}")

    def contains(self, v, cov=None):
        v = _check_vec(v, self.p)
        others = np.delete(v, self.index)
        return bool(np.all(others == 0.0))

    def polar_contains(self, v):
        v = _check_vec(v, self.p)
        return bool(v[self.index] == 0.0)

    def is_scone(self):
        return True


@dataclass(frozen=True)
class KSparse(Cone):
    """{v : at most k nonzero entries}; sign-symmetric sparse alternatives."""

    k: int
    p: int

    def __post_init__(self):
        if not 1 <= self.k <= self.p:
            raise ValueError(f"sparsity k={self.k} must satisfy 1 <= k <= p={self.p}")

    def contains(self, v, cov=None):
        v = _check_vec(v, self.p)
        return bool(np.count_nonzero(v) <= self.k)

    def polar_contains(self, v):
        # every axis direction (both signs) is in the cone, so the polar is {0}
        v = _check_vec(v, self.p)
        return bool(np.all(v == 0.0))

    def is_scone(self):
        return True


@dataclass(frozen=True)
class LassoCone(Cone):
    """Cone over the ellipsoid points with l1 norm at most t: near-sparse vectors.

    Membership is relative to the sample ellipsoid, so a covariance estimate is
    required: v != 0 belongs iff ||v||_1 <= t * sqrt(v'Sv).
    """

    t: float
    p: int

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError(f"lasso radius t={self.t} must be positive")

    def contains(self, v, cov=None):
        v = _check_vec(v, self.p)
        if not np.any(v):
            return True
        if cov is None:
            raise TypeError("LassoCone membership requires a covariance estimate")
        mat = cov.matrix if hasattr(cov, "matrix") else np.asarray(cov, dtype=float)
        quad = float(v @ mat @ v)
        if quad <= 0.0:
            return False
        return bool(np.sum(np.abs(v)) <= self.t * np.sqrt(quad) + _NORM_SLACK)

    def polar_contains(self, v):
        raise UnsupportedConeOperation("polar membership is not defined for the lasso cone")

    def is_scone(self):
        return False


@dataclass(frozen=True, eq=False)
class FiniteDirections(Cone):
    """Union of the rays spanned by a finite list of nonzero direction vectors."""

    directions: np.ndarray

    def __post_init__(self):
        d = np.atleast_2d(np.asarray(self.directions, dtype=float))
        if d.ndim != 2 or d.shape[0] < 1:
            raise ValueError("need at least one direction vector")
        norms = np.linalg.norm(d, axis=1)
        if np.any(norms == 0.0):
            raise ValueError("direction vectors must be nonzero")
        object.__setattr__(self, "directions", d)

    @property
    def p(self) -> int:
        return self.directions.shape[1]

    def contains(self, v, cov=None):
        v = _check_vec(v, self.p)
        if not np.any(v):
            return True
        vn = np.linalg.norm(v)
        for d in self.directions:
            gamma = float(v @ d) / float(d @ d)
            if gamma > 0.0 and np.linalg.norm(v - gamma * d) <= _NORM_SLACK * max(vn, 1.0):
                return True
        return False

    def polar_contains(self, v):
        v = _check_vec(v, self.p)
        scale = max(np.linalg.norm(v), 1.0)
        return bool(
            all(float(v @ d) <= _NORM_SLACK * scale * np.linalg.norm(d) for d in self.directions)
        )

    def is_scone(self):
        # closure under positive diagonal scaling forces each ray onto an axis
        return bool(all(np.count_nonzero(d) == 1 for d in self.directions))


@dataclass(frozen=True, eq=False)
class Intersection(Cone):
    """Intersection of cones; membership is the conjunction of member tests."""

    members: tuple

    def __post_init__(self):
        members = tuple(self.members)
        if len(members) < 1:
            raise ValueError("intersection needs at least one member cone")
        ps = {c.p for c in members}
        if len(ps) != 1:
            raise ValueError(f"member cones disagree on dimension: {sorted(ps)}")
        object.__setattr__(self, "members", members)

    @property
    def p(self) -> int:
        return self.members[0].p

    def contains(self, v, cov=None):
        return all(c.contains(v, cov) for c in self.members)

    def polar_contains(self, v):
        kinds = sorted(type(c).__name__ for c in self.members)
        if kinds == ["Coordinate", "NonNegOrthant"]:
            j = next(c.index for c in self.members if isinstance(c, Coordinate))
            v = _check_vec(v, self.p)
            return bool(v[j] <= 0.0)
        if kinds == ["KSparse", "NonNegOrthant"]:
            # each nonnegative axis ray is in the cone, so the polar is v <= 0
            v = _check_vec(v, self.p)
            return bool(np.all(v <= 0.0))
        raise UnsupportedConeOperation(
            f"polar membership not implemented for intersection of {kinds}"
        )

    def is_scone(self):
        return all(c.is_scone() for c in self.members)


def contains(cone: Cone, v, cov=None) -> bool:
    return cone.contains(v, cov)


def polar_contains(cone: Cone, v) -> bool:
    return cone.polar_contains(v)


def is_scone(cone: Cone) -> bool:
    return cone.is_scone()


def parse_cone(spec: str, p: int, base_dir: str | None = None) -> Cone:
    """Parse the CLI cone mini-language.

    Grammar: ``full`` | ``nonneg`` | ``coord:J`` (1-based) | ``ksparse:K`` |
    ``ksparse+:K`` (nonnegative k-sparse) | ``lasso:T`` | ``dirs:FILE``
    (CSV, one direction vector per row).
    """
    text = spec.strip()
    head, _, arg = text.partition(":")
    head = head.lower()
    try:
        if head == "full":
            _no_arg(text, arg)
            return FullSpace(p)
        if head == "nonneg":
            _no_arg(text, arg)
            return NonNegOrthant(p)
        if head == "coord":
            j = _parse_int(text, arg)
            if not 1 <= j <= p:
                raise ConeSpecError(f"cone spec {text!r}: coordinate {j} out of range 1..{p}")
            return Coordinate(j - 1, p)
        if head == "ksparse":
            return KSparse(_parse_int(text, arg), p)
        if head == "ksparse+":
            return Intersection((KSparse(_parse_int(text, arg), p), NonNegOrthant(p)))
        if head == "lasso":
            try:
                t = float(arg)
            except ValueError:
                raise ConeSpecError(f"cone spec {text!r}: expected a number, got {arg!r}") from None
            return LassoCone(t, p)
        if head == "dirs":
            if not arg:
                raise ConeSpecError(f"cone spec {text!r}: missing file path")
            path = arg if base_dir is None else os.path.join(base_dir, arg)
            dirs = np.loadtxt(path, delimiter=",", ndmin=2)
            if dirs.shape[1] != p:
                raise ConeSpecError(
                    f"cone spec {text!r}: directions have {dirs.shape[1]} columns, data has p={p}"
                )
            return FiniteDirections(dirs)
    except ValueError as exc:
        raise ConeSpecError(f"cone spec {text!r}: {exc}") from None
    raise ConeSpecError(f"unknown cone kind {head!r} in spec {text!r}")


def _no_arg(text, arg):
    if arg:
        raise ConeSpecError(f"cone spec {text!r} takes no argument")


def _parse_int(text, arg):
    try:
        return int(arg)
    except ValueError:
        raise ConeSpecError(f"cone spec {text!r}: expected an integer, got {arg!r}") from None
