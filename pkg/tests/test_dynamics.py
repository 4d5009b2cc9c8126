"""Master equation, disorder sampling, and ensemble averaging.

Two independent oracles pin the Lindblad integrator: a dense matrix
exponential of the vectorized generator (built with explicit jump
operators), and closed-form pure-decay populations from an initial
configuration the Hamiltonian cannot move.
"""

import numpy as np
import pytest

from spingraph.chain import ChainGeometry, IdealModel, RydbergModel, assemble_system, build_control_hz
from spingraph.dynamics import (
    DEFAULT_JUMPS,
    EnsembleResult,
    JumpChannels,
    NoiseSpec,
    closed_system_trace,
    ensemble_average,
    evolve_master,
    sample_field_noise,
    sample_geometry_noise,
)
from spingraph.grape import ControlSchedule
from spingraph.operators import (
    EMISSION_BASIS,
    basis_state,
    embed_spin_state,
)
from spingraph.targets import complete_graph_state, plus_product_state

TWO_PI = 2.0 * np.pi


def dense_expm(mat: np.ndarray) -> np.ndarray:
    """Scaling-and-squaring Taylor exponential (oracle helper)."""
    norm = np.linalg.norm(mat, ord=np.inf)
    squarings = max(0, int(np.ceil(np.log2(max(norm, 1e-30)))) + 1)
    scaled = mat / (2.0**squarings)
    out = np.eye(mat.shape[0], dtype=complex)
    term = np.eye(mat.shape[0], dtype=complex)
    for k in range(1, 40):
        term = term @ scaled / k
        out += term
    for _ in range(squarings):
        out = out @ out
    return out


def vectorized_lindbladian(h: np.ndarray, cs: list[np.ndarray]) -> np.ndarray:
    """Row-major vec: L(rho) -> M @ vec(rho) with vec(A X B) = (A kron B^T) vec(X)."""
    dim = h.shape[0]
    eye = np.eye(dim)
    m = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for c in cs:
        cdc = c.conj().T @ c
        m += np.kron(c, c.conj())
        m -= 0.5 * (np.kron(cdc, eye) + np.kron(eye, cdc.T))
    return m


def site_jump(dst: int, src: int, site: int, n_sites: int, d: int) -> np.ndarray:
    local = np.zeros((d, d))
    local[dst, src] = 1.0
    op = np.eye(1)
    for s in range(n_sites):
        op = np.kron(op, local if s == site else np.eye(d))
    return op


def test_jump_channels_validation():
    with pytest.raises(ValueError):
        JumpChannels(channels=(("up", "g", -1.0),))
    jumps = JumpChannels(channels=(("up", "g", 0.1),))
    from spingraph.operators import SPIN_BASIS

    with pytest.raises(ValueError):
        jumps.validate(SPIN_BASIS)
    jumps.validate(EMISSION_BASIS)


def test_default_jump_rates():
    assert DEFAULT_JUMPS.channels == (
        ("up", "g", 1.0 / 569.0),
        ("down", "g", 1.0 / 1100.0),
    )


def test_master_matches_dense_expm_oracle():
    # one slice, constant field: the result is exactly expm(L t) rho0
    model = IdealModel(2)
    b = 0.8
    t = 0.02
    schedule = ControlSchedule(t_total=t, amplitudes=np.array([b]))
    jumps = JumpChannels(channels=(("up", "g", 0.9), ("down", "g", 0.4)))
    psi0 = embed_spin_state(plus_product_state(2), 2, EMISSION_BASIS)
    rho0 = np.outer(psi0, psi0.conj())
    result = evolve_master(model, schedule, jumps, rho0)

    h = assemble_system(model, EMISSION_BASIS) + b * build_control_hz(2, EMISSION_BASIS)
    cs = []
    for site in range(2):
        cs.append(np.sqrt(0.9) * site_jump(2, 0, site, 2, 3))  # up -> g
        cs.append(np.sqrt(0.4) * site_jump(2, 1, site, 2, 3))  # down -> g
    propagator = dense_expm(vectorized_lindbladian(h, cs) * t)
    rho_expected = (propagator @ rho0.reshape(-1)).reshape(9, 9)
    assert np.max(np.abs(result.rho_final - rho_expected)) < 1e-10


def test_master_pure_decay_populations():
    # |up, up> is dark for the exchange and the field, so populations
    # follow the two-level decay formulas exactly
    gamma = 0.35
    t = 1.2
    model = IdealModel(2)
    schedule = ControlSchedule(t_total=t, amplitudes=np.array([1.5, -0.5, 2.0]))
    jumps = JumpChannels(channels=(("up", "g", gamma),))
    uu = basis_state(["up", "up"], EMISSION_BASIS)
    rho0 = np.outer(uu, uu.conj())
    result = evolve_master(model, schedule, jumps, rho0, target=uu)
    p = np.exp(-gamma * t)
    diag = np.real(np.diag(result.rho_final))
    assert abs(result.populations[-1] - p * p) < 1e-9
    assert abs(diag[EMISSION_BASIS.index("g") * 3 + 0] - (1 - p) * p) < 1e-9
    assert abs(diag[0 * 3 + EMISSION_BASIS.index("g")] - p * (1 - p)) < 1e-9
    assert abs(diag[8] - (1 - p) ** 2) < 1e-9


def test_master_zero_rate_matches_unitary():
    model = RydbergModel(ChainGeometry.regular(2))
    rng = np.random.default_rng(9)
    schedule = ControlSchedule(t_total=0.1, amplitudes=rng.uniform(-5, 5, 4))
    jumps = JumpChannels(channels=(("up", "g", 0.0), ("down", "g", 0.0)))
    psi0_spin = plus_product_state(2)
    target_spin = complete_graph_state(2)
    psi0 = embed_spin_state(psi0_spin, 2, EMISSION_BASIS)
    rho0 = np.outer(psi0, psi0.conj())
    target = embed_spin_state(target_spin, 2, EMISSION_BASIS)
    open_run = evolve_master(model, schedule, jumps, rho0, target=target)
    closed = closed_system_trace(model, schedule, psi0_spin, target_spin)
    assert np.max(np.abs(open_run.populations - closed)) < 1e-8


def test_master_state_checks_and_verify_step():
    model = IdealModel(2)
    schedule = ControlSchedule(t_total=0.05, amplitudes=np.array([1.0]))
    psi0 = embed_spin_state(plus_product_state(2), 2, EMISSION_BASIS)
    rho0 = np.outer(psi0, psi0.conj())
    target = embed_spin_state(complete_graph_state(2), 2, EMISSION_BASIS)
    result = evolve_master(
        model, schedule, DEFAULT_JUMPS, rho0, target=target, verify_step=True
    )
    rho = result.rho_final
    assert abs(np.trace(rho).real - 1.0) < 1e-10
    assert np.max(np.abs(rho - rho.conj().T)) < 1e-12
    assert np.min(np.linalg.eigvalsh(rho)) > -1e-10
    assert np.all(result.populations >= 0.0) and np.all(result.populations <= 1.0)

    with pytest.raises(ValueError):
        evolve_master(model, schedule, DEFAULT_JUMPS, 2.0 * rho0, target=target)
    bad = rho0.copy()
    bad[0, 1] += 1.0
    with pytest.raises(ValueError):
        evolve_master(model, schedule, DEFAULT_JUMPS, bad, target=target)
    with pytest.raises(ValueError):
        evolve_master(model, schedule, DEFAULT_JUMPS, rho0[:3, :3], target=target)


def test_closed_system_trace_boundaries():
    model = IdealModel(3)
    schedule = ControlSchedule(t_total=2.3, amplitudes=np.zeros(10))
    psi0 = plus_product_state(3)
    target = complete_graph_state(3)
    pops = closed_system_trace(model, schedule, psi0, target)
    assert pops.shape == (11,)
    assert pops[0] == pytest.approx(abs(np.vdot(target, psi0)) ** 2)


def test_sample_geometry_noise_zero_sigma_is_identity():
    geo = ChainGeometry.regular(3)
    spec = NoiseSpec(position_sigma=(0.0, 0.0, 0.0))
    assert sample_geometry_noise(geo, spec, 0) is geo


def test_sample_geometry_noise_deterministic_and_seeded():
    geo = ChainGeometry.regular(3)
    spec = NoiseSpec(position_sigma=(193.5, 193.5, 1242.9), base_seed=7)
    a = sample_geometry_noise(geo, spec, 2)
    b = sample_geometry_noise(geo, spec, 2)
    c = sample_geometry_noise(geo, spec, 3)
    assert np.array_equal(a.positions, b.positions)
    assert not np.array_equal(a.positions, c.positions)
    # displacement scale is sub-um for nm sigmas
    assert np.max(np.abs(a.positions - geo.positions)) < 5.0


def test_sample_geometry_noise_frame_axes():
    # chain along z: the first sigma component displaces along z only
    geo = ChainGeometry.regular(3)
    along = sample_geometry_noise(geo, NoiseSpec(position_sigma=(500.0, 0.0, 0.0)), 1)
    delta = along.positions - geo.positions
    assert np.max(np.abs(delta[:, :2])) == 0.0
    assert np.max(np.abs(delta[:, 2])) > 0.0
    # the remaining two components displace transversally only
    across = sample_geometry_noise(geo, NoiseSpec(position_sigma=(0.0, 500.0, 500.0)), 1)
    delta = across.positions - geo.positions
    assert np.max(np.abs(delta[:, 2])) < 1e-12
    assert np.max(np.abs(delta[:, :2])) > 0.0


def test_sample_geometry_noise_delta_r():
    geo = ChainGeometry.regular(3)
    spec = NoiseSpec(delta_r=100.0)  # nm
    shifted = sample_geometry_noise(geo, spec, 0)
    assert shifted.delta_r == pytest.approx(0.1)
    assert np.array_equal(shifted.positions, geo.positions)


def test_sample_field_noise():
    schedule = ControlSchedule(t_total=1.0, amplitudes=np.zeros(2000))
    assert sample_field_noise(schedule, 0.0, 3) is schedule
    noisy = sample_field_noise(schedule, TWO_PI * 0.5, 3)
    again = sample_field_noise(schedule, TWO_PI * 0.5, 3)
    assert np.array_equal(noisy.amplitudes, again.amplitudes)
    assert abs(np.std(noisy.amplitudes) - TWO_PI * 0.5) / (TWO_PI * 0.5) < 0.05
    assert abs(np.mean(noisy.amplitudes)) < 0.2
    with pytest.raises(ValueError):
        sample_field_noise(schedule, -1.0, 3)


def test_ensemble_geometry_noise_requires_rydberg():
    schedule = ControlSchedule(t_total=1.0, amplitudes=np.zeros(4))
    spec = NoiseSpec(position_sigma=(100.0, 0.0, 0.0), samples=2)
    with pytest.raises(ValueError):
        ensemble_average(
            IdealModel(2), schedule, spec, plus_product_state(2), complete_graph_state(2)
        )


def test_ensemble_statistics_and_determinism():
    model = RydbergModel(ChainGeometry.regular(2))
    rng = np.random.default_rng(4)
    schedule = ControlSchedule(t_total=0.1, amplitudes=rng.uniform(-3, 3, 5))
    spec = NoiseSpec(position_sigma=(193.5, 193.5, 1242.9), samples=8, base_seed=0)
    psi0, target = plus_product_state(2), complete_graph_state(2)
    a = ensemble_average(model, schedule, spec, psi0, target)
    b = ensemble_average(model, schedule, spec, psi0, target)
    assert isinstance(a, EnsembleResult)
    assert np.array_equal(a.mean_trace, b.mean_trace)
    assert np.array_equal(a.sample_finals, b.sample_finals)
    assert a.sample_finals.shape == (8,)
    assert np.all(a.min_trace <= a.mean_trace + 1e-15)
    assert np.all(a.mean_trace <= a.max_trace + 1e-15)
    assert a.mean_final == pytest.approx(np.mean(a.sample_finals))
    assert a.std_final == pytest.approx(np.std(a.sample_finals))
    # different base seed draws a different ensemble
    c = ensemble_average(
        model, schedule, replace_spec(spec, base_seed=99), psi0, target
    )
    assert not np.array_equal(a.sample_finals, c.sample_finals)


def replace_spec(spec: NoiseSpec, **kw) -> NoiseSpec:
    from dataclasses import replace

    return replace(spec, **kw)


def test_ensemble_parallel_matches_sequential(monkeypatch):
    model = RydbergModel(ChainGeometry.regular(2))
    schedule = ControlSchedule(t_total=0.1, amplitudes=np.linspace(-2, 2, 5))
    spec = NoiseSpec(position_sigma=(193.5, 193.5, 1242.9), samples=4, base_seed=1)
    psi0, target = plus_product_state(2), complete_graph_state(2)
    seq = ensemble_average(model, schedule, spec, psi0, target)
    monkeypatch.setenv("SPINGRAPH_WORKERS", "2")
    par = ensemble_average(model, schedule, spec, psi0, target)
    assert np.array_equal(seq.mean_trace, par.mean_trace)
    assert np.array_equal(seq.sample_finals, par.sample_finals)


def test_field_noise_only_ensemble_mean_degrades_gently():
    # zero-mean field noise perturbs the population quadratically, so the
    # ensemble mean sits close to (and below) the noiseless value
    model = RydbergModel(ChainGeometry.regular(2))
    schedule = ControlSchedule(t_total=0.141, amplitudes=np.full(100, 2.0))
    psi0, target = plus_product_state(2), complete_graph_state(2)
    noiseless = closed_system_trace(model, schedule, psi0, target)[-1]
    spec = NoiseSpec(field_sigma=TWO_PI * 0.5, samples=20, base_seed=0)
    res = ensemble_average(model, schedule, spec, psi0, target)
    assert abs(res.mean_final - noiseless) < 0.05


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(position_sigma=(-1.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        NoiseSpec(field_sigma=-0.1)
    with pytest.raises(ValueError):
        NoiseSpec(samples=0)
