import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hashgrid.encoding import (
    CLAMP_EPS,
    FeatureTables,
    GridLevelSpec,
    HashEncodingConfig,
    encode_backward,
    encode_forward,
    frequency_encode,
    grid_vertex_index,
    interpolation_weights,
    level_resolutions,
    parameter_count,
    smoothstep,
    smoothstep_derivative,
    spatial_hash,
)
from oracles import central_fd, encode_ref, hash_ref, resolutions_ref


def _tables(cfg, seed=0, scale=1.0, dtype=np.float64):
    t = FeatureTables.for_config(cfg, None, dtype)
    t.params[:] = np.random.default_rng(seed).uniform(-scale, scale, t.params.shape)
    return t


# --- configuration and levels ---------------------------------------------------------------

def test_growth_factor_default_levels():
    cfg = HashEncodingConfig(n_levels=16, n_min=16, n_max=512)
    assert cfg.growth_factor == pytest.approx(1.2599, abs=1e-4)
    assert 1.26 - 1e-3 <= cfg.growth_factor <= 2.0


def test_two_levels_double_resolution():
    cfg = HashEncodingConfig(n_levels=2, n_min=16, n_max=32)
    assert cfg.growth_factor == pytest.approx(2.0)
    assert [s.resolution for s in level_resolutions(cfg)] == [16, 32]


@pytest.mark.parametrize("L", [1, 2, 7, 16])
def test_equal_min_max_is_flat(L):
    cfg = HashEncodingConfig(n_levels=L, n_min=16, n_max=16)
    assert cfg.growth_factor == 1.0
    assert all(s.resolution == 16 for s in level_resolutions(cfg))


def test_single_level_uses_n_min():
    cfg = HashEncodingConfig(n_levels=1, n_min=24, n_max=512)
    assert cfg.growth_factor == 1.0
    assert [s.resolution for s in level_resolutions(cfg)] == [24]


@pytest.mark.parametrize("kw", [dict(n_levels=0), dict(table_size=1000), dict(n_features=0),
                                dict(n_min=32, n_max=16), dict(n_min=0.5), dict(dim=4),
                                dict(interpolation="cubic")])
def test_invalid_configs_rejected(kw):
    with pytest.raises(ValueError):
        HashEncodingConfig(**kw)


@given(L=st.integers(1, 24), n_min=st.integers(1, 64), ratio=st.floats(1.0, 256.0),
       logT=st.integers(4, 22), F=st.integers(1, 8), d=st.integers(2, 3))
def test_level_invariants(L, n_min, ratio, logT, F, d):
    n_max = n_min * ratio
    cfg = HashEncodingConfig(n_levels=L, table_size=2**logT, n_features=F, n_min=n_min,
                             n_max=n_max, dim=d)
    specs = level_resolutions(cfg)
    res = [s.resolution for s in specs]
    assert len(specs) == L and res[0] == n_min
    assert res == resolutions_ref(L, n_min, n_max)
    assert all(a <= b for a, b in zip(res, res[1:]))
    if L >= 2:
        assert cfg.growth_factor >= 1.0
        assert res[-1] == math.floor(n_max + 1e-9)
    for s in specs:
        assert s.dense == ((s.resolution + 1) ** d <= cfg.table_size)
        assert s.table_len == ((s.resolution + 1) ** d if s.dense else cfg.table_size)
    count = parameter_count(cfg)
    assert count == sum(min((r + 1) ** d, cfg.table_size) for r in res) * F
    assert count <= cfg.table_size * L * F
    assert FeatureTables.for_config(cfg).size == count


# --- hashing and indexing -----------------------------------------------------------------------

def test_hash_of_origin_is_zero():
    for T in (1, 2**4, 2**14, 2**22):
        assert spatial_hash(np.zeros((1, 3), dtype=np.int64), T)[0] == 0


@given(x=st.integers(0, 2**31 - 1), logT=st.integers(0, 24))
def test_hash_1d_is_modulo(x, logT):
    T = 2**logT
    assert spatial_hash(np.array([[x]]), T)[0] == x % T


def test_hash_2d_unit_example():
    # oracle first, literal frozen from it
    T = 2**14
    assert hash_ref((1, 1), T) == (1 ^ 2654435761) % T == 14768
    assert spatial_hash(np.array([[1, 1]]), T)[0] == 14768


@given(c=st.lists(st.integers(0, 2**20), min_size=1, max_size=3), logT=st.integers(0, 24))
def test_hash_matches_integer_oracle_and_range(c, logT):
    T = 2**logT
    h = spatial_hash(np.array([c]), T)[0]
    assert h == hash_ref(c, T)
    assert 0 <= h < T


def test_dense_index_row_major_example():
    spec = GridLevelSpec(0, 16, 17**2, True, 17)
    assert grid_vertex_index(spec, np.array([[2, 3]]), 2**14)[0] == 3 * 17 + 2 == 53
    assert grid_vertex_index(spec, np.array([[0, 0]]), 2**14)[0] == 0


def test_hashed_index_delegates():
    spec = GridLevelSpec(0, 300, 2**10, False, 301)
    c = np.random.default_rng(1).integers(0, 301, (50, 3))
    np.testing.assert_array_equal(grid_vertex_index(spec, c, 2**10), spatial_hash(c, 2**10))


@pytest.mark.parametrize("d", [1, 2, 3])
def test_dense_index_is_bijective_exhaustive(d):
    for N in range(1, 33):
        side = N + 1
        spec = GridLevelSpec(0, N, side**d, True, side)
        grids = np.meshgrid(*[np.arange(side)] * d, indexing="ij")
        coords = np.stack([g.reshape(-1) for g in grids], axis=1)
        idx = grid_vertex_index(spec, coords, side**d)
        assert np.array_equal(np.sort(idx), np.arange(side**d))


# --- interpolation weights ------------------------------------------------------------------

def test_zero_fraction_selects_low_corner():
    w = interpolation_weights(np.zeros((1, 2)), "linear")[0]
    np.testing.assert_array_equal(w, [1, 0, 0, 0])


def test_smoothstep_values():
    assert smoothstep(0.5) == 0.5
    assert smoothstep_derivative(0.0) == 0.0 and smoothstep_derivative(1.0) == 0.0
    assert smoothstep(0.25) == 0.15625


@given(frac=st.lists(st.floats(0, 1), min_size=3, max_size=3),
       mode=st.sampled_from(["linear", "smoothstep"]), d=st.integers(1, 3))
def test_partition_of_unity(frac, mode, d):
    w = interpolation_weights(np.array([frac[:d]]), mode)[0]
    assert np.all(w >= 0)
    assert abs(w.sum() - 1.0) <= 4 * np.finfo(np.float64).eps


# --- forward ----------------------------------------------------------------------------------

def test_point_on_vertex_returns_stored_feature():
    cfg = HashEncodingConfig(n_levels=3, table_size=2**8, n_min=4, n_max=16, dim=2)
    t = _tables(cfg)
    x = np.array([[0.25, 0.5]])  # a vertex on every level (N = 4, 8, 16)
    Y, _ = encode_forward(cfg, t, x)
    for l, s in enumerate(level_resolutions(cfg)):
        row = grid_vertex_index(s, np.round(x * s.resolution).astype(np.int64), cfg.table_size)[0]
        np.testing.assert_allclose(Y[0, 2 * l:2 * l + 2], t.level(l)[row], rtol=0, atol=1e-15)


def test_zero_tables_encode_to_zero():
    cfg = HashEncodingConfig(dim=3, table_size=2**10)
    t = FeatureTables.for_config(cfg)
    Y, _ = encode_forward(cfg, t, np.random.default_rng(0).random((64, 3)))
    assert not Y.any()


def test_one_dimensional_hand_example():
    cfg = HashEncodingConfig(n_levels=1, table_size=4, n_features=2, n_min=1, n_max=1, dim=1)
    t = FeatureTables.for_config(cfg, None, np.float64)
    f0, f1 = np.array([1.0, -2.0]), np.array([3.0, 5.0])
    t.level(0)[0], t.level(0)[1] = f0, f1
    Y, _ = encode_forward(cfg, t, np.array([[0.25]]))
    np.testing.assert_allclose(Y[0], 0.75 * f0 + 0.25 * f1, rtol=0, atol=1e-15)


@pytest.mark.parametrize("interp", ["linear", "smoothstep"])
@pytest.mark.parametrize("d,logT", [(1, 6), (2, 6), (2, 12), (3, 8), (3, 14)])
def test_forward_matches_reference(d, logT, interp):
    cfg = HashEncodingConfig(n_levels=4, table_size=2**logT, n_features=3, n_min=3, n_max=40,
                             dim=d, interpolation=interp)
    t = _tables(cfg, seed=d)
    X = np.random.default_rng(logT).random((40, d))
    X[0] = 0.0
    X[1] = 1.0
    specs = level_resolutions(cfg)
    ref = encode_ref(X, [t.level(l) for l in range(cfg.n_levels)],
                     [s.resolution for s in specs], cfg.table_size, interp == "smoothstep")
    Y, _ = encode_forward(cfg, t, X)
    np.testing.assert_allclose(Y, ref, rtol=1e-12, atol=1e-12)


def test_cache_weights_are_a_partition_of_unity():
    cfg = HashEncodingConfig(dim=3, table_size=2**12, n_levels=6)
    _, cache = encode_forward(cfg, _tables(cfg), np.random.default_rng(3).random((100, 3)))
    assert np.all(cache.weights >= 0)
    np.testing.assert_allclose(cache.weights.sum(axis=2), 1.0, atol=1e-12)
    fr = cache.fractions(2)
    assert np.all((fr >= 0) & (fr < 1))


@pytest.mark.parametrize("bad", [np.nan, np.inf, -0.1, 1.5])
def test_rejects_bad_inputs(bad):
    cfg = HashEncodingConfig()
    X = np.full((3, 2), 0.5)
    X[1, 0] = bad
    with pytest.raises(ValueError):
        encode_forward(cfg, _tables(cfg), X)


def test_table_mismatch_rejected():
    cfg = HashEncodingConfig()
    other = FeatureTables.for_config(HashEncodingConfig(table_size=2**10))
    with pytest.raises(ValueError):
        encode_forward(cfg, other, np.full((1, 2), 0.5))


def test_forward_is_deterministic():
    cfg = HashEncodingConfig(dim=3)
    t = FeatureTables.for_config(cfg, np.random.default_rng(5))
    X = np.random.default_rng(6).random((500, 3))
    a, _ = encode_forward(cfg, t, X)
    b, _ = encode_forward(cfg, t, X)
    assert a.tobytes() == b.tobytes()


def test_initialization_range():
    cfg = HashEncodingConfig(dim=3)
    t = FeatureTables.for_config(cfg, np.random.default_rng(0))
    assert np.all(np.abs(t.params) <= 1e-4) and np.all(np.isfinite(t.params))
    assert t.params.dtype == np.float32
    assert t.params.std() > 1e-5


# --- continuity -----------------------------------------------------------------------------

def _path_values(cfg, t, start, direction, h, n):
    s = np.arange(-n, n + 1) * h
    X = np.clip(start[None] + s[:, None] * direction[None], 0, 1)
    return encode_forward(cfg, t, X)[0]


def test_linear_mode_is_continuous_across_voxel_faces():
    cfg = HashEncodingConfig(n_levels=4, table_size=2**10, n_min=4, n_max=32, dim=2)
    t = _tables(cfg, scale=1.0)
    start = np.array([0.25, 0.4])  # on a face of every level
    direction = np.array([1.0, 0.3]) / np.linalg.norm([1.0, 0.3])
    bound = np.abs(t.params).max() * sum(s.resolution for s in level_resolutions(cfg)) * 2
    jumps = []
    for h in (1e-3, 1e-4, 1e-5):
        Y = _path_values(cfg, t, start, direction, h, 5)
        jump = np.abs(np.diff(Y, axis=0)).max()
        assert jump <= bound * h
        jumps.append(jump)
    assert jumps[2] < jumps[0] / 50


def one_sided_derivatives(cfg, t, x0, y, h):
    """Second-order one-sided x-derivatives at (x0, y) from the left and from the right."""
    xs = x0 + np.array([-2, -1, 0, 1, 2]) * h
    Y = encode_forward(cfg, t, np.stack([xs, np.full(5, y)], axis=1))[0]
    left = (3 * Y[2] - 4 * Y[1] + Y[0]) / (2 * h)
    right = (-3 * Y[2] + 4 * Y[3] - Y[4]) / (2 * h)
    return left, right


def _faces(cfg):
    """x positions of voxel faces of every level (half-voxel shifted in smoothstep mode)."""
    out = []
    for s in level_resolutions(cfg):
        out += [((k - s.shift) / s.resolution, s.level) for k in range(1, s.resolution)]
    return out


def test_smoothstep_first_derivative_is_continuous_across_faces():
    cfg = HashEncodingConfig(n_levels=3, table_size=2**12, n_min=4, n_max=16, dim=2,
                             interpolation="smoothstep")
    t = _tables(cfg, scale=1.0)
    rng = np.random.default_rng(0)
    for x0, _ in _faces(cfg):
        left, right = one_sided_derivatives(cfg, t, x0, rng.uniform(0.05, 0.95), 1e-5)
        assert np.abs(left - right).max() < 1e-3


def test_linear_mode_derivative_does_jump():
    # the reason smoothstep exists: linear mode has kinks at faces
    cfg = HashEncodingConfig(n_levels=3, table_size=2**12, n_min=4, n_max=16, dim=2)
    t = _tables(cfg, scale=1.0)
    jumps = [np.abs(np.subtract(*one_sided_derivatives(cfg, t, x0, 0.37, 1e-5))).max()
             for x0, _ in _faces(cfg)]
    assert np.median(jumps) > 1e-2


# --- backward ---------------------------------------------------------------------------

def _cfg_small(d=2, interp="linear", seed=0):
    return HashEncodingConfig(n_levels=4, table_size=2**10, n_features=2, n_min=2, n_max=64,
                              dim=d, interpolation=interp)


def test_zero_upstream_gives_zero_gradient():
    cfg = _cfg_small()
    t = _tables(cfg)
    Y, cache = encode_forward(cfg, t, np.random.default_rng(0).random((30, 2)))
    encode_backward(cfg, t, cache, np.zeros_like(Y))
    assert not t.grads.any()


def test_vertex_point_touches_one_row_per_level():
    cfg = HashEncodingConfig(n_levels=3, table_size=2**8, n_min=4, n_max=16, dim=2)
    t = _tables(cfg)
    x = np.array([[0.25, 0.5]])
    Y, cache = encode_forward(cfg, t, x)
    g = np.arange(1, Y.shape[1] + 1, dtype=np.float64)[None]
    encode_backward(cfg, t, cache, g)
    for l in range(cfg.n_levels):
        G = t.level_grad(l)
        nz = np.nonzero(np.any(G != 0, axis=1))[0]
        assert len(nz) == 1
        np.testing.assert_array_equal(G[nz[0]], g[0, 2 * l:2 * l + 2])


def test_aliased_rows_sum_contributions():
    # T = 2 with all-hashed levels forces many aliased rows
    cfg = HashEncodingConfig(n_levels=1, table_size=2, n_features=1, n_min=8, n_max=8, dim=2)
    t = _tables(cfg)
    X = np.array([[0.1, 0.7], [0.8, 0.3]])
    Y, cache = encode_forward(cfg, t, X)
    w = np.array([[1.5], [-0.5]])
    encode_backward(cfg, t, cache, w)
    loss = lambda: float((encode_forward(cfg, t, X)[0] * w).sum())
    for r in range(t.size):
        assert t.grads[r] == pytest.approx(central_fd(loss, t.params, r), rel=1e-7, abs=1e-10)


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("interp", ["linear", "smoothstep"])
def test_backward_matches_finite_differences(seed, interp):
    cfg = _cfg_small(interp=interp)
    t = _tables(cfg, seed, scale=0.5)
    rng = np.random.default_rng(seed + 10)
    X = rng.random((20, 2))
    R = rng.normal(size=(20, cfg.output_width))
    loss = lambda: float(np.sum(np.sin(encode_forward(cfg, t, X)[0]) * R))
    Y, cache = encode_forward(cfg, t, X)
    encode_backward(cfg, t, cache, np.cos(Y) * R)
    touched = np.unique(np.nonzero(t.grads)[0])
    for r in rng.choice(touched, size=min(60, len(touched)), replace=False):
        fd = central_fd(loss, t.params, r)
        assert abs(t.grads[r] - fd) <= 1e-4 * max(abs(fd), 1e-3)


def test_backward_shape_mismatch_rejected():
    cfg = _cfg_small()
    t = _tables(cfg)
    Y, cache = encode_forward(cfg, t, np.random.default_rng(0).random((5, 2)))
    with pytest.raises(ValueError):
        encode_backward(cfg, t, cache, np.zeros((4, Y.shape[1])))
    with pytest.raises(ValueError):
        encode_backward(cfg, t, None, Y)


# --- frequency encoding -------------------------------------------------------------------

def test_frequency_encoding_at_zero():
    out = frequency_encode(np.zeros((2, 3)), 4).reshape(2, 3, 8)
    assert np.all(out[:, :, :4] == 0) and np.all(out[:, :, 4:] == 1)


def test_frequency_encoding_width_and_layout():
    X = np.random.default_rng(0).random((7, 3))
    out = frequency_encode(X, 10)
    assert out.shape == (7, 60)
    k = 3
    np.testing.assert_allclose(out[:, 1 * 20 + k], np.sin(2.0**k * X[:, 1]))
    np.testing.assert_allclose(out[:, 1 * 20 + 10 + k], np.cos(2.0**k * X[:, 1]))


@given(x=st.floats(0, 1), n=st.integers(1, 12))
def test_frequency_pythagorean_identity(x, n):
    out = frequency_encode(np.array([[x]]), n)[0]
    np.testing.assert_allclose(out[:n] ** 2 + out[n:] ** 2, 1.0, atol=1e-12)


def test_frequency_rejects_zero_frequencies():
    with pytest.raises(ValueError):
        frequency_encode(np.zeros((1, 2)), 0)


def test_clamp_keeps_upper_corner_in_range():
    cfg = HashEncodingConfig(n_levels=2, table_size=2**16, n_min=8, n_max=16, dim=2)
    t = _tables(cfg)
    _, cache = encode_forward(cfg, t, np.ones((1, 2)))
    for l, s in enumerate(level_resolutions(cfg)):
        assert cache.indices[l].max() < s.table_len
    assert 1.0 - CLAMP_EPS < 1.0
