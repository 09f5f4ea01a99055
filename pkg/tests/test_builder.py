"""Amalgamation, extension witnesses, and generic chain growth."""

import hashlib
import json
from fractions import Fraction as F

import numpy as np
import pytest

from spherefield import (
    AmalgamProblem,
    NotMemberError,
    PartialIsometry,
    UnrealizableTypeError,
    amalgamate,
    check_transitivity_witness,
    empty_space,
    grow_chain,
    load_chain,
    no_algebraicity_witnesses,
    one_point_extension_witness,
    random_extension,
    save_chain,
    space_from_sq,
    verify_isometry,
)
from spherefield.exact import solve_posdef
from spherefield.metric import GramMatrix, certify_membership, gram_entries


# --- amalgamation ---------------------------------------------------------------

def test_amalgam_of_space_with_itself_is_identity(equilateral):
    p = AmalgamProblem(
        left=equilateral,
        right=equilateral,
        common_left=(0, 1, 2),
        common_right=(0, 1, 2),
    )
    out = amalgamate(p)
    assert out.n == 3
    assert out.sq_dist == equilateral.sq_dist


def test_amalgam_over_empty_common_is_orthogonal():
    left = space_from_sq([[0]], labels=("x",))
    right = space_from_sq([[0]], labels=("y",))
    out = amalgamate(AmalgamProblem(left=left, right=right, common_left=(), common_right=()))
    assert out.n == 2
    assert out.sq_dist[0][1] == 2  # free amalgam of unit vectors is orthogonal


def test_amalgam_projection_arithmetic():
    # A = {c}; x and y both at d^2 = 1 from c: <proj x, proj y> = 1/4, d^2(x,y) = 3/2
    left = space_from_sq([[0, 1], [1, 0]], labels=("c", "x"))
    right = space_from_sq([[0, 1], [1, 0]], labels=("c", "y"))
    out = amalgamate(AmalgamProblem(left=left, right=right, common_left=(0,), common_right=(0,)))
    assert out.n == 3
    assert out.sq_dist[1][2] == F(3, 2)


def test_amalgam_restrictions_and_strongness_random():
    rng = np.random.default_rng(19)
    for _ in range(40):
        a_size = int(rng.integers(0, 3))
        base = random_extension(empty_space(), a_size, rng)
        left = random_extension(base, int(rng.integers(1, 4)), rng)
        right = random_extension(base, int(rng.integers(1, 4)), rng)
        common = tuple(range(a_size))
        out = amalgamate(
            AmalgamProblem(left=left, right=right, common_left=common, common_right=common)
        )
        # left block reproduced exactly, entry for entry
        assert out.restrict(range(left.n)).sq_dist == left.sq_dist
        # right reproduced exactly through its identification
        right_pos = list(common) + list(range(left.n, out.n))
        assert out.restrict(right_pos).sq_dist == right.sq_dist
        # strong: no left-only point collapses onto a right-only point
        for i in range(a_size, left.n):
            for j in range(left.n, out.n):
                assert out.sq_dist[i][j] > 0
        assert isinstance(certify_membership(out), GramMatrix)


def test_amalgam_rejects_non_isometric_identification():
    left = space_from_sq([[0, 1], [1, 0]])
    right = space_from_sq([[0, 2], [2, 0]])
    with pytest.raises(ValueError, match="isometric"):
        AmalgamProblem(left=left, right=right, common_left=(0, 1), common_right=(0, 1))


def test_amalgam_requires_member_inputs():
    anti = space_from_sq([[0, 4], [4, 0]])
    good = space_from_sq([[0, 1], [1, 0]])
    with pytest.raises(NotMemberError):
        AmalgamProblem(left=anti, right=good, common_left=(), common_right=())


def test_amalgam_label_collision_resolved(equilateral):
    out = amalgamate(
        AmalgamProblem(
            left=equilateral, right=equilateral, common_left=(0,), common_right=(0,)
        )
    )
    assert len(set(out.labels)) == out.n == 5


# --- random extension -----------------------------------------------------------

def test_random_extension_zero_points_is_identity(equilateral):
    rng = np.random.default_rng(0)
    assert random_extension(equilateral, 0, rng) is equilateral


def test_random_extension_from_empty():
    rng = np.random.default_rng(1)
    one = random_extension(empty_space(), 1, rng)
    assert one.n == 1
    assert isinstance(certify_membership(one), GramMatrix)


def test_random_extension_determinism():
    a = random_extension(empty_space(), 2, np.random.default_rng(123))
    b = random_extension(empty_space(), 2, np.random.default_rng(123))
    assert a == b


def test_random_extension_preserves_base(equilateral):
    rng = np.random.default_rng(2)
    out = random_extension(equilateral, 3, rng)
    assert out.restrict(range(3)).sq_dist == equilateral.sq_dist
    assert isinstance(certify_membership(out), GramMatrix)


# --- one-point extension witness ------------------------------------------------

def test_orthogonal_prescription_always_realizable(equilateral):
    ext = one_point_extension_witness(equilateral, [F(2), F(2), F(2)])
    assert ext.n == 4
    cert = certify_membership(ext)
    assert isinstance(cert, GramMatrix)
    # block-diagonal Gram: the last pivot is exactly 1
    assert cert.pd_certificate[-1] == 1


def test_duplicate_point_prescription_rejected(equilateral):
    dup = list(equilateral.sq_dist[0])
    dup[0] = F(0)  # distance 0 to the duplicated point
    with pytest.raises(UnrealizableTypeError) as err:
        one_point_extension_witness(equilateral, dup)
    assert err.value.rejection.leading_minor == 0


def test_extension_over_orthogonal_pair_exact_pivots(orthogonal_pair):
    # prescribe d^2 = 1 to both: bordered Gram [[1,0,1/2],[0,1,1/2],[1/2,1/2,1]]
    ext = one_point_extension_witness(orthogonal_pair, [F(1), F(1)])
    cert = certify_membership(ext)
    assert cert.pd_certificate == (F(1), F(1), F(1, 2))


# --- transitivity ---------------------------------------------------------------

def test_transitivity_witness_everywhere(scalene):
    for a in range(3):
        for b in range(3):
            iso = check_transitivity_witness(a, b, scalene)
            assert verify_isometry(scalene, scalene, iso)


def test_transitivity_witness_bad_index(scalene):
    with pytest.raises(IndexError):
        check_transitivity_witness(0, 9, scalene)


def test_one_point_maps_between_different_spaces(equilateral, scalene):
    # every point is at distance 1 from the base point, so all singletons
    # are isometric, even across structurally different spaces
    assert verify_isometry(equilateral, scalene, PartialIsometry((2,), (0,)))


# --- no algebraicity ------------------------------------------------------------

def test_witnesses_single(equilateral):
    wit = no_algebraicity_witnesses(equilateral, fixed=(1, 2), x_idx=0, m=1)
    assert wit.sq_to_x > 0
    ext = wit.extensions[0]
    assert ext.n == 4
    assert isinstance(certify_membership(ext), GramMatrix)
    # profile over the fixed set matches x exactly
    assert ext.sq_dist[3][1] == equilateral.sq_dist[0][1]
    assert ext.sq_dist[3][2] == equilateral.sq_dist[0][2]


def test_witnesses_three_over_empty_fixed(equilateral):
    wit = no_algebraicity_witnesses(equilateral, fixed=(), x_idx=0, m=3)
    assert wit.combined.n == 6
    assert isinstance(certify_membership(wit.combined), GramMatrix)
    # pairwise distinct: all pairwise distances positive (they equal 2 rho^2 = 2)
    for i in wit.new_indices:
        for j in wit.new_indices:
            if i != j:
                assert wit.combined.sq_dist[i][j] == 2
        assert wit.combined.sq_dist[i][0] > 0


def test_witnesses_over_all_other_points():
    rng = np.random.default_rng(29)
    space = random_extension(empty_space(), 5, rng)
    fixed = (0, 1, 2, 3)
    wit = no_algebraicity_witnesses(space, fixed=fixed, x_idx=4, m=2)
    # oracle: rho^2 is the Schur residual of x over the fixed block
    g = gram_entries(space)
    gf = [[g[i][j] for j in fixed] for i in fixed]
    rhs = [g[4][j] for j in fixed]
    w = solve_posdef(gf, rhs)
    rho_sq = 1 - sum(rhs[i] * w[i] for i in range(4))
    assert rho_sq > 0
    assert wit.sq_to_x == 2 * rho_sq
    for ext in wit.extensions:
        assert isinstance(certify_membership(ext), GramMatrix)
        for t, f in enumerate(fixed):
            assert ext.sq_dist[5][f] == space.sq_dist[4][f]


def test_witnesses_reject_fixed_containing_x(equilateral):
    with pytest.raises(ValueError):
        no_algebraicity_witnesses(equilateral, fixed=(0, 1), x_idx=0, m=1)


# --- chains ---------------------------------------------------------------------

def test_chain_growth_coherence():
    chain = grow_chain(seed=4, n_stages=5)
    assert len(chain.stages) == 6
    for a, b in zip(chain.stages, chain.stages[1:]):
        assert b.restrict(range(a.n)).sq_dist == a.sq_dist
        assert isinstance(certify_membership(b), GramMatrix)


def test_chain_determinism_byte_for_byte(tmp_path):
    d1, d2 = tmp_path / "a", tmp_path / "b"
    save_chain(grow_chain(seed=77, n_stages=4), d1)
    save_chain(grow_chain(seed=77, n_stages=4), d2)
    for name in sorted(p.name for p in d1.iterdir()):
        b1 = (d1 / name).read_bytes()
        b2 = (d2 / name).read_bytes()
        assert hashlib.sha256(b1).hexdigest() == hashlib.sha256(b2).hexdigest()


def test_chain_save_load_round_trip(tmp_path):
    chain = grow_chain(seed=5, n_stages=3, start=space_from_sq([[0, 1], [1, 0]]))
    save_chain(chain, tmp_path / "chain")
    loaded = load_chain(tmp_path / "chain")
    assert loaded.stages == chain.stages
    assert loaded.seed == chain.seed


def test_chain_load_detects_corruption(tmp_path):
    chain = grow_chain(seed=6, n_stages=2)
    save_chain(chain, tmp_path / "chain")
    target = tmp_path / "chain" / "stage_001.json"
    obj = json.loads(target.read_text())
    obj["labels"] = ["zzz"]
    target.write_text(json.dumps(obj))
    with pytest.raises(ValueError, match="hash"):
        load_chain(tmp_path / "chain")


def test_chain_log_records_measure_choice():
    chain = grow_chain(seed=8, n_stages=2)
    assert all("uniform-sphere" in entry["extension_measure"] for entry in chain.log)
