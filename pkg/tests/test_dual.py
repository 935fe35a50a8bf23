import numpy as np
import pytest

from fedtoken import losses
from fedtoken.data import ClientPartition, Dataset, synth_gaussian
from fedtoken.dual import (DualState, GlobalModel, Hyperparams,
                           _coordinate_derivative, _coordinate_value, commit,
                           dual_objective, duality_gap, load_model, local_gain,
                           local_solve, phi_of_alpha, primal_objective, save_model,
                           stitch_alpha, upload_size)
from fedtoken.rng import RngStream


def _full_partition(ds):
    return ClientPartition(0, tuple(range(len(ds))))


def _ridge_solution(ds, lam):
    X, y = ds.features, ds.labels
    D = len(ds)
    return np.linalg.solve(X.T @ X / D + lam * np.eye(ds.d), X.T @ y / D)


def _random_feasible_state(ds, loss, seed):
    gen = np.random.Generator(np.random.PCG64(seed))
    alpha = {}
    for i in range(len(ds)):
        lo, hi = losses.feasible_interval(loss, float(ds.labels[i]))
        if loss == losses.SQUARED:
            alpha[i] = float(gen.normal(scale=0.5))
        else:
            alpha[i] = float(lo + (hi - lo) * gen.random())
    return DualState(0, alpha)


def test_dual_objective_is_zero_at_origin(gaussian_60x4):
    zero = [DualState(0, {})]
    for loss in losses.LOSS_KINDS:
        assert dual_objective(zero, gaussian_60x4, loss, 0.1) == 0.0


def test_dual_objective_single_sample_closed_form():
    # one sample, squared loss, alpha = y: value is y^2/2 - |x|^2 y^2 / (2 lam)
    ds = Dataset(np.array([[0.5]]), np.array([1.0]))
    lam = 0.5
    got = dual_objective([DualState(0, {0: 1.0})], ds, losses.SQUARED, lam)
    expected = 0.5 - 0.25 / (2.0 * lam)
    assert got == pytest.approx(expected, abs=1e-12)
    assert expected == 0.25


def test_regularizer_term_is_quadratic_in_alpha(gaussian_60x4):
    state = _random_feasible_state(gaussian_60x4, losses.SQUARED, 3)
    doubled = DualState(0, {i: 2 * a for i, a in state.alpha.items()})
    lam = 0.2
    phi1 = phi_of_alpha([state], gaussian_60x4, lam)
    phi2 = phi_of_alpha([doubled], gaussian_60x4, lam)
    assert np.allclose(phi2, 2 * phi1)
    g1 = lam * 0.5 * phi1 @ phi1
    g2 = lam * 0.5 * phi2 @ phi2
    assert g2 == pytest.approx(4 * g1)


def test_primal_objective_at_zero_model(gaussian_60x4):
    w = np.zeros(gaussian_60x4.d)
    assert primal_objective(w, gaussian_60x4, losses.SQUARED, 0.3) == pytest.approx(0.5)
    assert primal_objective(w, gaussian_60x4, losses.LOGISTIC, 0.3) == pytest.approx(np.log(2))


def test_gap_at_zero_alpha_squared_loss(gaussian_60x4):
    gap = duality_gap([DualState(0, {})], gaussian_60x4, losses.SQUARED, 0.7)
    assert gap == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("loss", losses.LOSS_KINDS)
def test_weak_duality_for_random_feasible_states(gaussian_60x4, loss):
    for seed in range(12):
        state = _random_feasible_state(gaussian_60x4, loss, seed)
        gap = duality_gap([state], gaussian_60x4, loss, 0.05)
        assert gap >= -1e-9


def test_logistic_scalar_derivative_matches_finite_difference():
    gen = np.random.Generator(np.random.PCG64(123))
    h = 1e-6
    checked = 0
    while checked < 100:
        y = 1.0 if gen.random() < 0.5 else -1.0
        alpha = float(gen.uniform(0.05, 0.95)) * y
        lo, hi = losses.feasible_interval(losses.LOGISTIC, y)
        r = float(gen.uniform(lo - alpha + h * 4, hi - alpha - h * 4))
        base = float(gen.normal())
        qcoef = float(gen.uniform(0.0, 5.0))
        deriv = _coordinate_derivative(losses.LOGISTIC, alpha, y, r, base, qcoef)
        up = _coordinate_value(losses.LOGISTIC, alpha, y, r + h, base, qcoef)
        down = _coordinate_value(losses.LOGISTIC, alpha, y, r - h, base, qcoef)
        fd = (up - down) / (2 * h)
        assert deriv == pytest.approx(fd, rel=1e-4, abs=1e-7)
        checked += 1


@pytest.mark.parametrize("loss", losses.LOSS_KINDS)
def test_local_solve_never_decreases_the_local_objective(gaussian_60x4, loss):
    part = _full_partition(gaussian_60x4)
    model = GlobalModel(np.linspace(-0.5, 0.5, gaussian_60x4.d), 0)
    hyper = Hyperparams(lam=0.1, local_passes=1)
    for seed in range(5):
        alpha = _random_feasible_state(gaussian_60x4, loss, 40 + seed)
        # keep phi consistent not required for the gain inequality itself
        upd = local_solve(part, gaussian_60x4, alpha, model, loss, hyper,
                          RngStream(seed, purpose="local-solve"))
        gain = local_gain(part, gaussian_60x4, alpha, model, loss, 0.1, upd.rho)
        assert gain >= -1e-12


def test_single_client_squared_reaches_ridge_solution():
    ds = synth_gaussian(50, 5, 3.0, RngStream(100, purpose="synth-data"))
    lam = 0.1
    part = _full_partition(ds)
    alpha = DualState(0, {})
    model = GlobalModel(np.zeros(ds.d), 0)
    hyper = Hyperparams(lam=lam, local_passes=1)
    for t in range(200):
        upd = local_solve(part, ds, alpha, model, losses.SQUARED, hyper,
                          RngStream(1, round=t, purpose="local-solve"))
        alpha = commit(alpha, upd.rho, 1.0)
        model = GlobalModel(model.phi + upd.delta_phi, t + 1)
    w_star = _ridge_solution(ds, lam)
    assert np.max(np.abs(model.phi - w_star)) < 1e-6
    assert duality_gap([alpha], ds, losses.SQUARED, lam) < 1e-6


def test_local_solve_is_stationary_at_the_optimum():
    ds = synth_gaussian(40, 3, 3.0, RngStream(8, purpose="synth-data"))
    lam = 0.2
    part = _full_partition(ds)
    alpha = DualState(0, {})
    model = GlobalModel(np.zeros(ds.d), 0)
    solve_hyper = Hyperparams(lam=lam, local_passes=400)
    upd = local_solve(part, ds, alpha, model, losses.SQUARED, solve_hyper,
                      RngStream(2, purpose="local-solve"))
    alpha = commit(alpha, upd.rho, 1.0)
    model = GlobalModel(model.phi + upd.delta_phi, 1)
    again = local_solve(part, ds, alpha, model, losses.SQUARED,
                        Hyperparams(lam=lam, local_passes=1),
                        RngStream(3, purpose="local-solve"))
    assert np.linalg.norm(again.delta_phi) <= 1e-8


def test_delta_phi_matches_rho_exactly(gaussian_60x4):
    part = ClientPartition(0, tuple(range(0, 30)))
    hyper = Hyperparams(lam=0.05, local_passes=2)
    upd = local_solve(part, gaussian_60x4, DualState(0, {}),
                      GlobalModel(np.zeros(gaussian_60x4.d), 0), losses.LOGISTIC,
                      hyper, RngStream(5, purpose="local-solve"))
    rho_vec = np.zeros(len(gaussian_60x4))
    for i, r in upd.rho.items():
        rho_vec[i] = r
    expected = gaussian_60x4.features.T @ rho_vec / (0.05 * len(gaussian_60x4))
    scale = max(np.linalg.norm(expected), 1e-30)
    assert np.linalg.norm(upd.delta_phi - expected) / scale < 1e-12


def test_logistic_commits_stay_feasible(gaussian_60x4):
    part = _full_partition(gaussian_60x4)
    alpha = DualState(0, {})
    model = GlobalModel(np.zeros(gaussian_60x4.d), 0)
    hyper = Hyperparams(lam=0.05, local_passes=1)
    for t in range(20):
        upd = local_solve(part, gaussian_60x4, alpha, model, losses.LOGISTIC,
                          hyper, RngStream(6, round=t, purpose="local-solve"))
        alpha = commit(alpha, upd.rho, 0.8)
        model = GlobalModel(model.phi + 0.8 * upd.delta_phi, t + 1)
    for i, a in alpha.alpha.items():
        assert losses.is_feasible(losses.LOGISTIC, a, float(gaussian_60x4.labels[i]))


def test_zero_feature_rows_take_the_separable_optimum():
    ds = Dataset(np.zeros((4, 2)), np.array([1.0, -1.0, 1.0, -1.0]))
    part = _full_partition(ds)
    model = GlobalModel(np.zeros(2), 0)
    hyper = Hyperparams(lam=1.0, local_passes=1)
    upd_sq = local_solve(part, ds, DualState(0, {}), model, losses.SQUARED, hyper,
                         RngStream(1, purpose="local-solve"))
    assert upd_sq.rho == {0: 1.0, 1: -1.0, 2: 1.0, 3: -1.0}
    upd_lg = local_solve(part, ds, DualState(0, {}), model, losses.LOGISTIC, hyper,
                         RngStream(1, purpose="local-solve"))
    assert upd_lg.rho == {0: 0.5, 1: -0.5, 2: 0.5, 3: -0.5}


def test_commit_arithmetic():
    st = DualState(3, {10: 0.2})
    assert commit(st, {10: 0.4}, 0.0).alpha[10] == pytest.approx(0.2)
    assert commit(st, {10: 0.4}, 0.5).alpha[10] == pytest.approx(0.4)
    assert commit(st, {10: 0.4}, 1.0).alpha[10] == pytest.approx(0.6)


def test_upload_size():
    assert upload_size(5) == 8 * 5 + 64


def test_model_snapshot_round_trip(tmp_path):
    phi = np.array([1.5, -2.25, 0.0, 1e-12])
    path = tmp_path / "model.bin"
    save_model(path, phi)
    blob = path.read_bytes()
    assert blob[:4] == b"FTMD" and len(blob) == 16 + 8 * 4
    assert np.array_equal(load_model(path), phi)


def test_stitch_alpha_combines_disjoint_clients(gaussian_60x4):
    a = DualState(0, {0: 1.0, 2: -0.5})
    b = DualState(1, {5: 0.25})
    vec = stitch_alpha([a, b], len(gaussian_60x4))
    assert vec[0] == 1.0 and vec[2] == -0.5 and vec[5] == 0.25
    assert np.count_nonzero(vec) == 3
