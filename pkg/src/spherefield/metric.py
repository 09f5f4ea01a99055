"""Finite pointed unit-sphere metric spaces and their exact membership certificates.

A space is stored as the exact rational matrix of squared pairwise
distances between points on the unit sphere; the base point at the origin
is implicit (every point is at distance exactly 1 from it, which is never
stored). Membership in the hereditary class of such spaces in general
position is equivalent to the polarized Gram matrix being positive
definite, which is decided exactly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import MalformedSpaceError, NotMemberError, PrecisionError
from .exact import (
    FracMatrix,
    as_fraction,
    frac_to_pair,
    freeze_matrix,
    leading_minors,
    pivots_from_minors,
)

FOUR = Fraction(4)


@dataclass(frozen=True)
class SpaceDistances:
    """Candidate member of the class: labels plus exact squared distances.

    Off-diagonal entries must be positive rationals. Certified members
    always satisfy 0 < d^2 < 4 (distance in (0, 2), no antipodal pairs);
    the boundary and beyond are representable so that certification can
    reject them with an explicit witness.
    """

    labels: tuple[str, ...]
    sq_dist: FracMatrix

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))
        object.__setattr__(self, "sq_dist", freeze_matrix(self.sq_dist))
        n = len(self.labels)
        if len(self.sq_dist) != n or any(len(row) != n for row in self.sq_dist):
            raise MalformedSpaceError(f"sq_dist must be a full {n}x{n} matrix")
        if len(set(self.labels)) != n:
            raise MalformedSpaceError("labels must be unique")
        for i in range(n):
            if self.sq_dist[i][i] != 0:
                raise MalformedSpaceError(f"diagonal entry at {i} must be exactly 0")
            for j in range(i + 1, n):
                v = self.sq_dist[i][j]
                if v != self.sq_dist[j][i]:
                    raise MalformedSpaceError(f"sq_dist not symmetric at ({i},{j})")
                if v <= 0:
                    raise MalformedSpaceError(
                        f"off-diagonal sq_dist[{i}][{j}] = {v} must be positive"
                    )

    @property
    def n(self) -> int:
        return len(self.labels)

    def restrict(self, indices: Sequence[int]) -> "SpaceDistances":
        """Principal sub-space on the given point indices (order preserved)."""
        idx = list(indices)
        return SpaceDistances(
            labels=tuple(self.labels[i] for i in idx),
            sq_dist=tuple(tuple(self.sq_dist[i][j] for j in idx) for i in idx),
        )


@dataclass(frozen=True)
class GramMatrix:
    """Exact inner-product matrix of a space; unit diagonal, |off-diagonal| < 1.

    When `pd_certificate` is set it holds the exact LDL^T pivots, all
    strictly positive; rerunning the factorization reproduces them and
    L diag(d) L^T reproduces the matrix exactly.
    """

    g: FracMatrix
    pd_certificate: tuple[Fraction, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "g", freeze_matrix(self.g))
        n = len(self.g)
        for i in range(n):
            if self.g[i][i] != 1:
                raise MalformedSpaceError("Gram diagonal must be exactly 1")
            for j in range(i + 1, n):
                if self.g[i][j] != self.g[j][i]:
                    raise MalformedSpaceError("Gram matrix not symmetric")
                if abs(self.g[i][j]) >= 1:
                    raise MalformedSpaceError(
                        "off-diagonal Gram entries must have absolute value < 1"
                    )
        if self.pd_certificate is not None:
            object.__setattr__(
                self, "pd_certificate", tuple(as_fraction(p) for p in self.pd_certificate)
            )

    @property
    def n(self) -> int:
        return len(self.g)

    def to_float(self) -> np.ndarray:
        n = self.n
        return np.array([[float(v) for v in row] for row in self.g], dtype=float).reshape(n, n)


@dataclass(frozen=True)
class Rejection:
    """Witness that a candidate is not a member: first non-positive LDL^T pivot.

    `leading_minor` is the exact determinant of the (pivot_index+1)-point
    leading principal block, which is <= 0.
    """

    pivot_index: int
    leading_minor: Fraction


@dataclass(frozen=True)
class EmbeddedSpace:
    """Floating-point unit-sphere coordinates realizing a certified space."""

    coords: np.ndarray
    tol: float

    def __post_init__(self):
        c = np.array(self.coords, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    def sq_distances(self) -> np.ndarray:
        d = self.coords[:, None, :] - self.coords[None, :, :]
        return np.einsum("ijk,ijk->ij", d, d)


@dataclass(frozen=True)
class PartialIsometry:
    """Index correspondence between two spaces that preserves sq_dist exactly."""

    domain_indices: tuple[int, ...]
    codomain_indices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "domain_indices", tuple(int(i) for i in self.domain_indices))
        object.__setattr__(self, "codomain_indices", tuple(int(i) for i in self.codomain_indices))
        if len(self.domain_indices) != len(self.codomain_indices):
            raise ValueError("index lists must have equal length")


def polarize(sq: Fraction) -> Fraction:
    """Inner product of two unit vectors from their squared distance: 1 - d^2/2."""
    return 1 - sq / 2


def gram_entries(space: SpaceDistances) -> FracMatrix:
    """Polarized entries 1 - d^2/2 with no range restriction (internal use)."""
    n = space.n
    return tuple(
        tuple(Fraction(1) if i == j else polarize(space.sq_dist[i][j]) for j in range(n))
        for i in range(n)
    )


def gram_from_distances(space: SpaceDistances) -> GramMatrix:
    """Exact Gram matrix of a well-formed space via polarization.

    Rejects any off-diagonal squared distance outside (0, 4): such a value
    cannot arise between distinct, non-antipodal unit vectors.
    """
    n = space.n
    for i in range(n):
        for j in range(i + 1, n):
            v = space.sq_dist[i][j]
            if not (0 < v < FOUR):
                raise MalformedSpaceError(
                    f"sq_dist[{i}][{j}] = {v} outside (0, 4); not realizable on the unit sphere"
                )
    return GramMatrix(g=gram_entries(space))


def certify_membership(space: SpaceDistances) -> GramMatrix | Rejection:
    """Decide membership exactly: PD certificate or a rejection witness.

    Returns the Gram matrix carrying its exact LDL^T pivots (all > 0) on
    acceptance; on rejection returns the index of the first non-positive
    pivot together with the exact leading principal minor. Rejection is a
    valid result, not an error.
    """
    entries = gram_entries(space)
    minors, stop = leading_minors(entries)
    if stop is not None:
        return Rejection(pivot_index=stop, leading_minor=minors[stop])
    return GramMatrix(g=entries, pd_certificate=pivots_from_minors(minors))


def is_member(space: SpaceDistances) -> bool:
    return isinstance(certify_membership(space), GramMatrix)


def embed(space: SpaceDistances, tol: float = 1e-9) -> EmbeddedSpace:
    """Unit-sphere coordinates (n rows in n dimensions) realizing the space.

    The exact Gram matrix is converted to floats only here, then factored
    (Cholesky); the rows of the factor are the coordinates. Raises
    NotMemberError when certification fails and PrecisionError when the
    exactly-PD matrix is degenerate at double precision or the round-trip
    error exceeds tol.
    """
    cert = certify_membership(space)
    if isinstance(cert, Rejection):
        raise NotMemberError(f"space is not a member: {cert}", rejection=cert)
    if space.n == 0:
        return EmbeddedSpace(coords=np.zeros((0, 0)), tol=tol)
    gf = cert.to_float()
    try:
        coords = np.linalg.cholesky(gf)
    except np.linalg.LinAlgError as exc:
        raise PrecisionError(
            "exact matrix is positive definite but float factorization failed; "
            "the space is too ill-conditioned for double precision"
        ) from exc
    emb = EmbeddedSpace(coords=coords, tol=tol)
    _check_embedding(space, emb)
    return emb


def _check_embedding(space: SpaceDistances, emb: EmbeddedSpace) -> None:
    norms = np.linalg.norm(emb.coords, axis=1)
    if emb.n and np.max(np.abs(norms - 1.0)) > emb.tol:
        raise PrecisionError("embedded row norms deviate from 1 beyond tol")
    if emb.n:
        exact = np.array(
            [[float(v) for v in row] for row in space.sq_dist], dtype=float
        )
        err = np.max(np.abs(emb.sq_distances() - exact))
        if err > emb.tol:
            raise PrecisionError(f"embedding round-trip error {err:.3e} exceeds tol")


def verify_isometry(a: SpaceDistances, b: SpaceDistances, mapping: PartialIsometry) -> bool:
    """True iff corresponding squared distances agree exactly as rationals."""
    dom, cod = mapping.domain_indices, mapping.codomain_indices
    for i in dom:
        if not 0 <= i < a.n:
            raise IndexError(f"domain index {i} out of range")
    for j in cod:
        if not 0 <= j < b.n:
            raise IndexError(f"codomain index {j} out of range")
    k = len(dom)
    return all(
        a.sq_dist[dom[p]][dom[q]] == b.sq_dist[cod[p]][cod[q]]
        for p in range(k)
        for q in range(k)
    )


# ---------------------------------------------------------------------------
# file format: {"labels": [...], "sq_dist": [[[num, den], ...], ...]}
# ---------------------------------------------------------------------------

def space_to_json(space: SpaceDistances) -> dict:
    return {
        "labels": list(space.labels),
        "sq_dist": [[frac_to_pair(v) for v in row] for row in space.sq_dist],
    }


def space_from_json(obj: dict) -> SpaceDistances:
    try:
        labels = obj["labels"]
        rows = obj["sq_dist"]
    except (KeyError, TypeError) as exc:
        raise MalformedSpaceError("space file must contain 'labels' and 'sq_dist'") from exc
    try:
        sq = tuple(tuple(as_fraction(v) for v in row) for row in rows)
    except (TypeError, ZeroDivisionError) as exc:
        raise MalformedSpaceError(f"bad rational entry: {exc}") from exc
    return SpaceDistances(labels=tuple(labels), sq_dist=sq)


def save_space(space: SpaceDistances, path) -> None:
    with open(path, "w") as fh:
        json.dump(space_to_json(space), fh, sort_keys=True)
        fh.write("\n")


def load_space(path) -> SpaceDistances:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MalformedSpaceError(f"invalid JSON: {exc}") from exc
    return space_from_json(obj)


def space_hash(space: SpaceDistances) -> str:
    blob = json.dumps(space_to_json(space), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def space_from_sq(sq, labels=None) -> SpaceDistances:
    """Convenience constructor; auto-labels points p0, p1, ..."""
    rows = freeze_matrix(sq)
    if labels is None:
        labels = tuple(f"p{i}" for i in range(len(rows)))
    return SpaceDistances(labels=tuple(labels), sq_dist=rows)


def empty_space() -> SpaceDistances:
    return SpaceDistances(labels=(), sq_dist=())


def certificate_to_json(cert: GramMatrix | Rejection, space: SpaceDistances) -> dict:
    """Serialized certificate or rejection witness in the rational pair encoding."""
    out: dict = {"space_hash": space_hash(space), "n": space.n}
    if isinstance(cert, GramMatrix):
        out["member"] = True
        out["pivots"] = [frac_to_pair(p) for p in cert.pd_certificate]
    else:
        out["member"] = False
        out["pivot_index"] = cert.pivot_index
        out["leading_minor"] = frac_to_pair(cert.leading_minor)
    return out
