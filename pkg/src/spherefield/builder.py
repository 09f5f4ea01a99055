"""Strong amalgamation of certified spaces and generic chain growth.

Amalgamation is free: the two sides are glued exactly along the common
part and the residual components are placed in mutually orthogonal
complements of its span, so every cross inner product equals the inner
product of the projections onto that span. Those projections are solved
over the rationals, which makes the amalgam exact with no rounding and
never identifies points outside the common part.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import NotMemberError, SnapError, UnrealizableTypeError
from .exact import as_fraction, snap_sq_dist, solve_posdef
from .metric import (
    GramMatrix,
    PartialIsometry,
    Rejection,
    SpaceDistances,
    certify_membership,
    embed,
    gram_entries,
    load_space,
    save_space,
    space_hash,
    verify_isometry,
)
from .sampling import random_unit_vectors


def _require_member(space: SpaceDistances, what: str) -> GramMatrix:
    cert = certify_membership(space)
    if isinstance(cert, Rejection):
        raise NotMemberError(f"{what} is not a certified member: {cert}", cert)
    return cert


@dataclass(frozen=True)
class AmalgamProblem:
    """Two certified spaces with an exactly isometric common subspace."""

    left: SpaceDistances
    right: SpaceDistances
    common_left: tuple[int, ...]
    common_right: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "common_left", tuple(int(i) for i in self.common_left))
        object.__setattr__(self, "common_right", tuple(int(i) for i in self.common_right))
        if len(self.common_left) != len(self.common_right):
            raise ValueError("common index lists must have equal length")
        if len(set(self.common_left)) != len(self.common_left):
            raise ValueError("common_left indices must be distinct")
        if len(set(self.common_right)) != len(self.common_right):
            raise ValueError("common_right indices must be distinct")
        iso = PartialIsometry(self.common_left, self.common_right)
        if not verify_isometry(self.left, self.right, iso):
            raise ValueError("identified subspaces are not exactly isometric")
        _require_member(self.left, "left")
        _require_member(self.right, "right")


def amalgamate(problem: AmalgamProblem) -> SpaceDistances:
    """Free amalgam over the common part; exact, strong, and certified.

    Output points: all of `left` in order, then the right-only points in
    order. Cross squared distances are 2 - 2 <proj(x), proj(y)> with the
    projections onto span(common) computed exactly, so no identification
    between left-only and right-only points can occur.
    """
    left, right = problem.left, problem.right
    cl, cr = problem.common_left, problem.common_right
    k = len(cl)
    right_only = [j for j in range(right.n) if j not in set(cr)]

    gl = gram_entries(left)
    gr = gram_entries(right)
    g_common = [[gl[cl[i]][cl[j]] for j in range(k)] for i in range(k)]

    # projection weights of each right-only point onto span(common)
    weights = {}
    for j in right_only:
        rhs = [gr[j][cr[i]] for i in range(k)]
        weights[j] = solve_posdef(g_common, rhs) if k else []

    n_total = left.n + len(right_only)
    sq = [[Fraction(0)] * n_total for _ in range(n_total)]
    for i in range(left.n):
        for j in range(left.n):
            sq[i][j] = left.sq_dist[i][j]
    pos_of_right = {cr[i]: cl[i] for i in range(k)}
    for bi, j in enumerate(right_only):
        pos_of_right[j] = left.n + bi
    for a in range(right.n):
        for b in range(right.n):
            if a in pos_of_right and b in pos_of_right and (a in right_only or b in right_only):
                sq[pos_of_right[a]][pos_of_right[b]] = right.sq_dist[a][b]
    cl_set = set(cl)
    for i in range(left.n):
        if i in cl_set:
            continue  # common points: cross entries already copied from right
        r_i = [gl[i][cl[t]] for t in range(k)]
        for bi, j in enumerate(right_only):
            inner = sum(r_i[t] * weights[j][t] for t in range(k)) if k else Fraction(0)
            d_sq = 2 - 2 * inner
            sq[i][left.n + bi] = d_sq
            sq[left.n + bi][i] = d_sq

    labels = list(left.labels)
    used = set(labels)
    for j in right_only:
        name = right.labels[j]
        while name in used:
            name += "'"
        used.add(name)
        labels.append(name)
    out = SpaceDistances(labels=tuple(labels), sq_dist=tuple(tuple(r) for r in sq))
    cert = certify_membership(out)
    if isinstance(cert, Rejection):  # cannot happen: orthogonal residuals stay independent
        raise AssertionError(f"free amalgam failed certification: {cert}")
    return out


def random_extension(
    space: SpaceDistances,
    k: int,
    rng: np.random.Generator,
    denom_bits: int = 32,
    max_retries: int = 3,
    max_resamples: int = 5,
) -> SpaceDistances:
    """Adjoin k points sampled uniformly on the unit sphere of an (n+k)-dim
    embedding; new distances are snapped to the dyadic grid and the result
    is re-certified (retrying with a finer grid, then fresh draws).
    """
    if k == 0:
        return space
    if k < 0:
        raise ValueError("k must be nonnegative")
    _require_member(space, "space")
    n = space.n
    base = embed(space).coords if n else np.zeros((0, 0))
    padded = np.zeros((n, n + k))
    if n:
        padded[:, :n] = base

    for _ in range(max_resamples):
        fresh = random_unit_vectors(rng, k, n + k)
        allpts = np.vstack([padded, fresh])
        bits = denom_bits
        for _ in range(max_retries + 1):
            sq = [list(row) for row in space.sq_dist]
            for row in sq:
                row.extend([Fraction(0)] * k)
            for _ in range(k):
                sq.append([Fraction(0)] * (n + k))
            for i in range(n + k):
                for j in range(max(i + 1, n), n + k):
                    d = float(np.sum((allpts[i] - allpts[j]) ** 2))
                    v = snap_sq_dist(d, bits)
                    sq[i][j] = v
                    sq[j][i] = v
            labels = list(space.labels)
            used = set(labels)
            for t in range(k):
                name = f"g{n + t}"
                while name in used:
                    name += "'"
                used.add(name)
                labels.append(name)
            candidate = SpaceDistances(labels=tuple(labels), sq_dist=tuple(tuple(r) for r in sq))
            cert = certify_membership(candidate)
            if isinstance(cert, GramMatrix):
                return candidate
            bits *= 2
    raise SnapError(
        f"random extension failed certification after {max_resamples} resamples"
    )


def one_point_extension_witness(space: SpaceDistances, target_dists) -> SpaceDistances:
    """Certified extension by one point at exactly the prescribed squared
    distances; the new point is last. Raises UnrealizableTypeError with the
    pivot witness when the prescription is not positive definite.
    """
    dists = tuple(as_fraction(d) for d in target_dists)
    if len(dists) != space.n:
        raise ValueError(f"expected {space.n} prescribed distances, got {len(dists)}")
    cert = _require_member(space, "space")
    from .typegeom import extension_minors

    minors, stop = extension_minors(cert, dists)
    if stop is not None:
        raise UnrealizableTypeError(
            f"prescription not realizable: non-positive pivot at index {stop}",
            Rejection(pivot_index=stop, leading_minor=minors[stop]),
        )
    n = space.n
    labels = list(space.labels)
    name = f"w{n}"
    while name in labels:
        name += "'"
    labels.append(name)
    sq = [list(row) + [dists[i]] for i, row in enumerate(space.sq_dist)]
    sq.append(list(dists) + [Fraction(0)])
    return SpaceDistances(labels=tuple(labels), sq_dist=tuple(tuple(r) for r in sq))


def check_transitivity_witness(
    a_idx: int, b_idx: int, space: SpaceDistances
) -> PartialIsometry:
    """The one-point map a -> b; always a partial isometry here because every
    point sits at distance exactly 1 from the implicit base point."""
    for i in (a_idx, b_idx):
        if not 0 <= i < space.n:
            raise IndexError(f"index {i} out of range")
    iso = PartialIsometry(domain_indices=(a_idx,), codomain_indices=(b_idx,))
    assert verify_isometry(space, space, iso)
    return iso


@dataclass(frozen=True)
class NoAlgebraicityWitnesses:
    """m distinct one-point extensions sharing x's exact profile over `fixed`.

    `combined` holds the original space plus all m new points at once, so
    distinctness is itself certified: every new point is at exact squared
    distance 2 rho^2 > 0 from x and from each other new point.
    """

    combined: SpaceDistances
    new_indices: tuple[int, ...]
    extensions: tuple[SpaceDistances, ...]
    sq_to_x: Fraction


def no_algebraicity_witnesses(
    space: SpaceDistances, fixed, x_idx: int, m: int
) -> NoAlgebraicityWitnesses:
    """Produce m points with exactly x's distances to `fixed` but distinct
    from x (and from one another), each giving a certified extension.

    Each witness carries the residual of x's profile in a fresh orthogonal
    direction: distances to `fixed` are exactly x's, distances to every
    other point are the exact free-amalgam values, and all pairwise
    witness distances equal 2 rho^2 where rho^2 > 0 is the exact residual
    norm (strict positive definiteness of the space).
    """
    fixed = tuple(int(i) for i in fixed)
    if m < 1:
        raise ValueError("m must be at least 1")
    if x_idx in fixed:
        raise ValueError("x_idx must not belong to the fixed set")
    if not 0 <= x_idx < space.n:
        raise IndexError(f"x_idx {x_idx} out of range")
    if len(set(fixed)) != len(fixed):
        raise ValueError("fixed indices must be distinct")
    _require_member(space, "space")

    g = gram_entries(space)
    kf = len(fixed)
    g_fixed = [[g[fixed[i]][fixed[j]] for j in range(kf)] for i in range(kf)]
    rhs = [g[x_idx][f] for f in fixed]
    w = solve_posdef(g_fixed, rhs) if kf else []
    rho_sq = 1 - sum(rhs[i] * w[i] for i in range(kf))  # exact Schur residual of x over fixed
    assert rho_sq > 0
    sq_between = 2 * rho_sq

    n = space.n
    cross_to_old = []
    for p in range(n):
        inner = sum(w[i] * g[fixed[i]][p] for i in range(kf)) if kf else Fraction(0)
        cross_to_old.append(2 - 2 * inner)

    total = n + m
    sq = [[Fraction(0)] * total for _ in range(total)]
    for i in range(n):
        for j in range(n):
            sq[i][j] = space.sq_dist[i][j]
    for t in range(m):
        for p in range(n):
            sq[n + t][p] = cross_to_old[p]
            sq[p][n + t] = cross_to_old[p]
        for s in range(m):
            if s != t:
                sq[n + t][n + s] = sq_between
    labels = list(space.labels)
    used = set(labels)
    for t in range(m):
        name = f"orbit{t}"
        while name in used:
            name += "'"
        used.add(name)
        labels.append(name)
    combined = SpaceDistances(labels=tuple(labels), sq_dist=tuple(tuple(r) for r in sq))
    cert = certify_membership(combined)
    if isinstance(cert, Rejection):  # cannot happen: fresh orthogonal residuals
        raise AssertionError(f"witness family failed certification: {cert}")
    new_indices = tuple(range(n, n + m))
    extensions = tuple(combined.restrict(list(range(n)) + [n + t]) for t in range(m))
    return NoAlgebraicityWitnesses(
        combined=combined,
        new_indices=new_indices,
        extensions=extensions,
        sq_to_x=sq_between,
    )


@dataclass(frozen=True)
class GenericChain:
    """Nested certified stages approximating the generic countable structure."""

    stages: tuple[SpaceDistances, ...]
    seed: int
    denom_bits: int
    log: tuple[dict, ...] = field(default_factory=tuple)


def grow_chain(
    seed: int,
    n_stages: int,
    points_per_stage: int = 1,
    denom_bits: int = 32,
    start: SpaceDistances | None = None,
) -> GenericChain:
    """Grow a chain of certified spaces, one random extension per stage.

    Stage i is an exact principal submatrix of stage i+1 (identity on
    indices). New distances come from uniform sphere sampling, which is a
    modeling choice recorded in the log, not a canonical measure.
    """
    rng = np.random.default_rng(seed)
    current = start if start is not None else SpaceDistances(labels=(), sq_dist=())
    stages = [current]
    log = []
    for stage in range(n_stages):
        current = random_extension(current, points_per_stage, rng, denom_bits=denom_bits)
        stages.append(current)
        log.append(
            {
                "stage": stage + 1,
                "added": points_per_stage,
                "n": current.n,
                "denom_bits": denom_bits,
                "extension_measure": "uniform-sphere (modeling choice)",
            }
        )
    return GenericChain(
        stages=tuple(stages), seed=seed, denom_bits=denom_bits, log=tuple(log)
    )


def save_chain(chain: GenericChain, directory) -> None:
    os.makedirs(directory, exist_ok=True)
    hashes = []
    for i, stage in enumerate(chain.stages):
        path = os.path.join(directory, f"stage_{i:03d}.json")
        save_space(stage, path)
        hashes.append(space_hash(stage))
    manifest = {
        "seed": chain.seed,
        "denom_bits": chain.denom_bits,
        "n_stages": len(chain.stages),
        "stage_hashes": hashes,
        "log": list(chain.log),
    }
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_chain(directory) -> GenericChain:
    with open(os.path.join(directory, "manifest.json")) as fh:
        manifest = json.load(fh)
    stages = []
    for i in range(manifest["n_stages"]):
        stage = load_space(os.path.join(directory, f"stage_{i:03d}.json"))
        if space_hash(stage) != manifest["stage_hashes"][i]:
            raise ValueError(f"stage {i} hash mismatch: file corrupted or edited")
        stages.append(stage)
    return GenericChain(
        stages=tuple(stages),
        seed=manifest["seed"],
        denom_bits=manifest["denom_bits"],
        log=tuple(manifest["log"]),
    )
