import numpy as np
import pytest

from wavelnd.field import FieldError, FieldSpec, SpacetimePoint as P, covariance_matrix
from wavelnd.numerics import factor_psd
from wavelnd.sampler import (
    BudgetError,
    GridSpec,
    assemble_covariance_matrix,
    build_grid,
    sample_field,
    standard_normals,
    substream_seed,
)

SIX = [P(1.0, (0.0,)), P(1.0, (0.1,)), P(1.2, (0.0,)), P(1.5, (-0.5,)), P(2.0, (0.9,)), P(1.7, (0.2,))]


def test_grid_shape_and_order(box):
    pts = build_grid(GridSpec(box, 3, 4), 1)
    assert len(pts) == 12
    assert pts[0] == P(1.0, (-1.0,)) and pts[-1] == P(2.0, (1.0,))
    assert [p.t for p in pts[:4]] == [1.0] * 4
    assert len(build_grid(GridSpec(box, 2, 3), 2)) == 18


def test_grid_budget(box):
    with pytest.raises(BudgetError):
        build_grid(GridSpec(box, 60, 60), 1)
    assert len(build_grid(GridSpec(box, 60, 60), 1, budget=3600)) == 3600


def test_assembly_rejects_zero_time():
    with pytest.raises(FieldError):
        assemble_covariance_matrix(FieldSpec(1, 1.0), [P(0.0, (0.0,)), P(1.0, (0.0,))])


def test_substreams_are_distinct_and_stable():
    assert substream_seed(42, 0) != substream_seed(42, 1)
    assert substream_seed(42, 0) != substream_seed(43, 0)
    # frozen value guards the counter-mode derivation against accidental change
    assert substream_seed(0, 0) == int.from_bytes(
        __import__("hashlib").sha256(bytes(16)).digest()[:8], "little")
    z = standard_normals(42, 3, 1000)
    assert np.array_equal(z, standard_normals(42, 3, 1000))
    assert abs(z.mean()) < 0.15 and 0.85 < z.std() < 1.15


def test_determinism_across_threads():
    sp = FieldSpec(1, 0.5)
    a = sample_field(sp, SIX, 600, seed=42, threads=1)
    b = sample_field(sp, SIX, 600, seed=42, threads=4)
    assert np.array_equal(a.values, b.values)
    c = sample_field(sp, SIX, 600, seed=43)
    assert not np.array_equal(a.values, c.values)


def test_prefix_stability():
    # realization i depends only on (seed, i)
    sp = FieldSpec(1, 1.0)
    a = sample_field(sp, SIX, 10, seed=5)
    b = sample_field(sp, SIX, 300, seed=5)
    assert np.array_equal(a.values, b.values[:10])


def test_repeated_points_share_values():
    sp = FieldSpec(1, 1.0)
    pts = [SIX[0], SIX[1], SIX[0]]
    s = sample_field(sp, pts, 50, seed=1)
    assert np.array_equal(s.values[:, 0], s.values[:, 2])
    assert s.applied_jitter == 0.0


def test_factor_mismatch():
    sp = FieldSpec(1, 1.0)
    fac = factor_psd(covariance_matrix(sp, SIX[:2]))
    with pytest.raises(ValueError):
        sample_field(sp, SIX, 5, seed=0, factor=fac)


def test_empirical_covariance_k2():
    sp = FieldSpec(2, 1.0)
    pts = [P(1.0, (0.0, 0.0)), P(1.3, (0.2, -0.1)), P(1.8, (-0.5, 0.4))]
    s = sample_field(sp, pts, 20000, seed=9)
    C = covariance_matrix(sp, pts)
    X = s.values
    E = X.T @ X / len(X)
    # Var of x_i x_j is C_ii C_jj + C_ij^2 for centred Gaussians
    se = np.sqrt((np.outer(np.diag(C), np.diag(C)) + C ** 2) / len(X))
    assert np.all(np.abs(E - C) < 5 * se)
