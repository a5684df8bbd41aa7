import math

import numpy as np
import pytest

from bayespec.models import Flat, ModelSpec, Normal, Polynomial, Spectrum
from bayespec.remc import (
    PairAccumulator,
    RemcConfig,
    RemcState,
    check_ladder,
    free_energy_remc,
    geometric_ladder,
    remc_run,
    swap_alpha,
    swap_step,
)
from bayespec.report import RunReport
from conftest import conjugate_problem


def test_geometric_ladder():
    b = geometric_ladder(44)
    assert len(b) == 45 and b[0] == 0.0 and b[1] == pytest.approx(1e-5) and b[-1] == 1.0
    r = b[2:] / b[1:-1]
    np.testing.assert_allclose(r, r[0], rtol=1e-10)
    assert geometric_ladder(1).tolist() == [0.0, 1.0]


@pytest.mark.parametrize("bad", [[0.0], [0.1, 1.0], [0.0, 0.5], [0.0, 0.5, 0.5, 1.0]])
def test_check_ladder_rejects(bad):
    with pytest.raises(ValueError):
        check_ladder(bad)


def test_config_validation():
    with pytest.raises(ValueError):
        RemcConfig(burn_in_fraction=1.0)
    with pytest.raises(ValueError):
        RemcConfig(swap_period=0)
    cfg = RemcConfig(ladder=(0.0, 0.3, 1.0), total_sweeps=10)
    assert cfg.L == 2 and cfg.burn_in == 5


def test_free_energy_from_pair_means():
    assert free_energy_remc(PairAccumulator.from_means([1.0, 1.0, 1.0])) == 0.0
    f = free_energy_remc(PairAccumulator.from_means([math.exp(-2), math.exp(-3)]))
    assert f == pytest.approx(5.0, rel=1e-15)
    assert math.isnan(free_energy_remc(PairAccumulator.from_means([0.5, 0.0])))
    with pytest.raises(ValueError):
        free_energy_remc(PairAccumulator.zeros(3))


def test_accumulator_running_mean():
    acc = PairAccumulator.zeros(2)
    vals = np.array([[0.2, 1.0], [0.4, 3.0], [0.9, 2.0]])
    for v in vals:
        acc.add(np.log(v))
    np.testing.assert_allclose(np.exp(acc.log_means()), vals.mean(axis=0), rtol=1e-14)


def test_swap_alpha_examples():
    assert swap_alpha(0.1, 0.0) == 1.0
    assert swap_alpha(0.1, -3.0) == pytest.approx(math.exp(-0.3), rel=1e-15)
    assert swap_alpha(0.1, 3.0) == 1.0
    assert swap_alpha(0.1, np.nan) == 0.0
    assert swap_alpha(0.1, -np.inf) == 0.0


def make_state(energies, betas):
    r = len(betas)
    theta = np.arange(r, dtype=float)[:, None]
    return RemcState(np.asarray(betas, float), theta.copy(), np.asarray(energies, float),
                     -np.arange(r, dtype=float), np.ones((r, 1)), n_data=10)


def test_swap_step_moves_states_not_steps():
    st = make_state([1.0, 2.0, 3.0, 4.0], [0.0, 0.2, 0.5, 1.0])
    st.step[:, 0] = [1, 2, 3, 4]
    # higher beta has higher energy: downhill for the pair, always accepted
    swap_step(st, 0, np.full(4, 0.999))
    assert st.theta[:, 0].tolist() == [1, 0, 3, 2]
    assert st.energy.tolist() == [2.0, 1.0, 4.0, 3.0]
    assert st.logprior.tolist() == [-1.0, 0.0, -3.0, -2.0]
    assert st.step[:, 0].tolist() == [1, 2, 3, 4]
    assert st.swap_attempts.tolist() == [1, 0, 1]
    assert st.swap_accepts.tolist() == [1, 0, 1]


def test_swap_step_rejects_and_preserves_multiset():
    st = make_state([4.0, 1.0, 3.0], [0.0, 0.5, 1.0])
    # pair (1, 2): dbeta 0.5, dE* = 10 * (3 - 1) > 0 -> accept; pair (0, 1): parity 0
    # dE* = 10 * (1 - 4) = -30, alpha = e^-15
    swap_step(st, 0, np.array([1e-3, 0.0, 0.0]))
    assert st.energy.tolist() == [4.0, 1.0, 3.0]
    swap_step(st, 1, np.array([0.0, 0.5, 0.0]))
    assert st.energy.tolist() == [4.0, 3.0, 1.0]
    assert sorted(st.energy.tolist()) == [1.0, 3.0, 4.0]
    assert (st.swap_accepts <= st.swap_attempts).all()


def test_flat_likelihood_gives_zero(backend):
    spec = ModelSpec(Polynomial(0), (Normal(0, 1),), Flat())
    data = Spectrum([0.0, 1.0], [0.0, 0.0])
    rep = remc_run(spec, data, RemcConfig(L=5, total_sweeps=20, seed=1))
    assert rep.free_energy == 0.0


def test_without_swaps_top_replica_samples_posterior(backend):
    spec, data, _ = conjugate_problem(n=30, seed=1)
    sweeps = 40_000 if backend == "cython" else 10_000
    cfg = RemcConfig(ladder=(0.0, 1.0), total_sweeps=sweeps, seed=2, swaps=False)
    rep = remc_run(spec, data, cfg)
    assert rep.swap_rates == [0.0]
    x = rep.samples[:, 0]
    mean, sd = data.ys.sum() / 31, math.sqrt(1 / 31)
    # a tuned 1-d random walk has an integrated autocorrelation time of a few sweeps
    assert abs(x.mean() - mean) < 3 * sd * math.sqrt(10 / len(x))
    assert x.std() == pytest.approx(sd, rel=0.08)


def test_conjugate_free_energy(backend):
    spec, data, log_z = conjugate_problem(n=50, seed=3)
    rep = remc_run(spec, data, RemcConfig(L=20, total_sweeps=4000, seed=4))
    assert rep.ok
    assert abs(rep.free_energy + log_z) < 0.3
    assert len(rep.swap_rates) == 20 and all(0 < r <= 1 for r in rep.swap_rates)


def test_deterministic_across_workers(conjugate):
    spec, data, _ = conjugate
    a = remc_run(spec, data, RemcConfig(L=6, total_sweeps=200, seed=5, workers=1))
    b = remc_run(spec, data, RemcConfig(L=6, total_sweeps=200, seed=5, workers=4))
    assert a.free_energy == b.free_energy
    np.testing.assert_array_equal(a.samples, b.samples)


def test_report_roundtrip(tmp_path, conjugate):
    spec, data, _ = conjugate
    rep = remc_run(spec, data, RemcConfig(L=3, total_sweeps=50, seed=6))
    rep.save(tmp_path / "r.json")
    back = RunReport.load(tmp_path / "r.json")
    assert back.free_energy == rep.free_energy
    np.testing.assert_array_equal(back.samples, rep.samples)
    assert back.ladder == rep.ladder
