import math

import numpy as np
import pytest

from src.optimization import param_opt
from src.optimization.param_opt import SearchSpec, _rank, evaluate_point, log_grid, optimize_intensities
from src.physics.channel_model import ChannelParams
from src.security.eve_bound import InfeasibleStatisticsError
from src.security.key_rate import RatePoint

COARSE = dict(mu_range=(1e-3, 1.0), nu_range=(1e-3, 1.0), grid_size=6)


def _point(rate, unclamped, mu, nu):
    return RatePoint(loss_db=0.0, m=4, mu=mu, nu=nu, q_mu=0.1, e_mu=0.0, i_ae=0.0, rate=rate, plob=1.0, rate_unclamped=unclamped)


def test_log_grid():
    grid = log_grid(1e-4, 1.0, 5)
    np.testing.assert_allclose(grid, [1e-4, 1e-3, 1e-2, 1e-1, 1.0], rtol=1e-12)
    assert list(log_grid(0.3, 0.3, 10)) == [0.3]


@pytest.mark.parametrize(
    "kwargs",
    [
        {"mu_range": (0.0, 1.0)},
        {"mu_range": (0.5, 0.1)},
        {"nu_range": (1e-3, math.inf)},
        {"mu_range": (1e-3, 0.1), "nu_range": (0.1, 0.5)},
        {"grid_size": 3},
        {"refine_rounds": -1},
        {"shrink": 1.0},
    ],
)
def test_search_spec_validation(kwargs):
    with pytest.raises(ValueError):
        SearchSpec(**kwargs)


def test_rank_prefers_rate_then_small_intensities():
    points = [
        _point(0.0, -1e-3, 0.5, 0.1),
        _point(1e-4, 1e-4, 0.4, 0.1),
        _point(1e-4, 1e-4, 0.3, 0.2),
        _point(1e-4, 1e-4, 0.3, 0.1),
        _point(0.0, float("nan"), 0.01, 0.001),
    ]
    assert min(points, key=_rank) is points[3]
    assert min([points[0], points[4]], key=_rank) is points[0]


def test_singleton_grid(make_protocol, typical_channel):
    spec = SearchSpec(mu_range=(0.1, 0.1), nu_range=(0.02, 0.02), grid_size=4, refine_rounds=2)
    mu, nu, point = optimize_intensities(10.0, make_protocol(), typical_channel, spec)
    assert (mu, nu) == (0.1, 0.02)
    assert point.rate == evaluate_point(0.1, 0.02, 10.0, make_protocol(), typical_channel).rate


def test_refinement_never_loses_rate(make_protocol, typical_channel):
    p = make_protocol(num_phases=4)
    rates = [
        optimize_intensities(20.0, p, typical_channel, SearchSpec(**COARSE, refine_rounds=rounds))[2].rate for rounds in (0, 1, 3)
    ]
    assert rates[0] <= rates[1] <= rates[2]


def test_optimum_at_zero_loss(make_protocol, typical_channel):
    mu, nu, point = optimize_intensities(0.0, make_protocol(num_phases=8), typical_channel, SearchSpec(**COARSE, refine_rounds=2))
    assert 1e-3 < mu < 1.0
    assert nu < mu
    assert point.rate > 0.0
    assert point.loss_db == 0.0 and point.m == 8


def test_high_loss_stays_below_plob(make_protocol, typical_channel):
    _, _, point = optimize_intensities(40.0, make_protocol(num_phases=4), typical_channel, SearchSpec(**COARSE, refine_rounds=1))
    assert point.rate < point.plob


def test_zero_gain_everywhere(make_protocol):
    dead = ChannelParams(loss_db=0.0, det_eff=0.0, dark=0.0)
    mu, nu, point = optimize_intensities(5.0, make_protocol(), dead, SearchSpec(**COARSE, refine_rounds=1))
    assert point.rate == 0.0
    assert point.status == "zero gain"
    assert math.isnan(point.i_ae)
    assert mu > nu


def test_infeasible_point_is_reported(monkeypatch, make_protocol, typical_channel):
    def refuse(stats, params):
        raise InfeasibleStatisticsError("no yields")

    monkeypatch.setattr(param_opt, "max_holevo", refuse)
    point = evaluate_point(0.2, 0.05, 10.0, make_protocol(), typical_channel)
    assert point.status == "infeasible"
    assert point.rate == 0.0


def test_parallel_grid_matches_serial(make_protocol, typical_channel):
    spec = SearchSpec(mu_range=(1e-2, 1.0), nu_range=(1e-3, 0.5), grid_size=4, refine_rounds=1)
    serial = optimize_intensities(15.0, make_protocol(num_phases=6), typical_channel, spec)
    parallel = optimize_intensities(15.0, make_protocol(num_phases=6), typical_channel, spec, n_jobs=2)
    assert serial == parallel


@pytest.mark.slow
@pytest.mark.parametrize("loss_db", [5.0, 20.0, 35.0])
def test_refined_search_close_to_dense_grid(make_protocol, typical_channel, loss_db):
    p = make_protocol(num_phases=8)
    mus = log_grid(1e-4, 1.0, 200)
    dense = max(evaluate_point(mu, nu, loss_db, p, typical_channel).rate for mu in mus for nu in mus if mu > nu)
    _, _, point = optimize_intensities(loss_db, p, typical_channel, SearchSpec(), n_jobs=-1)
    assert point.rate >= 0.98 * dense


def test_point_where_solver_stops_just_outside_box(make_protocol, typical_channel):
    point = evaluate_point(0.046415888336127774, 1e-4, 0.0, make_protocol(num_phases=10), typical_channel)
    assert point.status == "optimal"
    assert 0.0 <= point.i_ae <= 1.0


@pytest.mark.parametrize("num_phases, loss_db", [(8, 0.0), (8, 12.0), (10, 4.0), (12, 0.0)])
def test_default_coarse_grid_evaluates(make_protocol, typical_channel, num_phases, loss_db):
    spec = SearchSpec()
    p = make_protocol(num_phases=num_phases)
    mus, nus = log_grid(*spec.mu_range, spec.grid_size), log_grid(*spec.nu_range, spec.grid_size)
    points = [evaluate_point(mu, nu, loss_db, p, typical_channel) for mu in mus for nu in nus if mu > nu]
    assert len(points) == 45
    assert all(point.status == "optimal" for point in points)
