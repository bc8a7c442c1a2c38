import math

import numpy as np
import pytest

from dpa.networks import Architecture, init_params
from dpa.objective import LatentSchedule
from dpa.training import AdamState, TrainConfig, adam_init, adam_step, train


def cfg_for(schedule, **kw):
    base = dict(epochs=1, schedule=schedule, batch_size=64, learning_rate=1e-3)
    base.update(kw)
    return TrainConfig(**base)


def test_config_validation():
    s = LatentSchedule.uniform([0])
    with pytest.raises(ValueError):
        TrainConfig(epochs=-1, schedule=s)
    with pytest.raises(ValueError):
        TrainConfig(epochs=1, schedule=s, batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(epochs=1, schedule=s, learning_rate=0.0)


# ---------------------------------------------------------------------------
# adam
# ---------------------------------------------------------------------------


def test_adam_first_step_matches_hand_value():
    cfg = cfg_for(LatentSchedule.uniform([0]), learning_rate=0.1)
    theta = [np.array([[0.0]])]
    state = adam_init(theta)
    adam_step(theta, [np.array([[1.0]])], state, cfg)
    # bias correction makes mhat = vhat = 1 at t=1, so the step is the full lr
    assert abs(theta[0][0, 0] - (-0.1)) < 1e-6
    assert state.step == 1


def test_adam_zero_gradient_keeps_params_and_decays_moments():
    cfg = cfg_for(LatentSchedule.uniform([0]), learning_rate=0.1)
    theta = [np.array([[1.0]])]
    state = adam_init(theta)
    adam_step(theta, [np.array([[2.0]])], state, cfg)
    m_before = state.m1[0][0, 0]
    p_before = theta[0][0, 0]
    adam_step(theta, [np.array([[0.0]])], state, cfg)
    assert abs(state.m1[0][0, 0] - 0.9 * m_before) < 1e-15
    # mhat is still nonzero, so the parameter moves a little, but barely
    assert abs(theta[0][0, 0] - p_before) < cfg.learning_rate * 1.01


def test_adam_matches_scalar_reference_recurrence():
    # independent float-arithmetic replay of the update on f(theta) = theta^2
    cfg = cfg_for(LatentSchedule.uniform([0]), learning_rate=0.05)
    theta = [np.array([[1.0]])]
    state = adam_init(theta)

    rt, rm, rv = 1.0, 0.0, 0.0
    b1, b2, eps = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
    traj = []
    for t in range(1, 101):
        g = 2.0 * theta[0][0, 0]
        adam_step(theta, [np.array([[g]])], state, cfg)

        rg = 2.0 * rt
        rm = rm * b1 + (1.0 - b1) * rg
        rv = rv * b2 + (1.0 - b2) * (rg * rg)
        mhat = rm / (1.0 - b1 ** t)
        vhat = rv / (1.0 - b2 ** t)
        rt = rt - cfg.learning_rate * mhat / (math.sqrt(vhat) + eps)
        traj.append(abs(rt))
        assert abs(theta[0][0, 0] - rt) < 1e-12
    assert abs(theta[0][0, 0]) < 0.5
    assert traj[-1] < traj[0]


def test_adam_shape_mismatch_raises():
    cfg = cfg_for(LatentSchedule.uniform([0]))
    theta = [np.zeros((2, 2))]
    with pytest.raises(ValueError):
        adam_step(theta, [np.zeros((2, 3))], adam_init(theta), cfg)
    with pytest.raises(ValueError):
        adam_step(theta, [], adam_init(theta), cfg)


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def small_setup(n=96, p=3, seed=0, **arch_kw):
    base = dict(input_dim=p, latent_dim=2, depth=2, width=6, noise_per_layer=2)
    base.update(arch_kw)
    arch = Architecture(**base)
    X = np.random.default_rng(seed).normal(size=(n, p))
    return X, arch


def test_zero_epochs_returns_initial_model_and_empty_history():
    X, arch = small_setup()
    cfg = cfg_for(LatentSchedule.uniform([0, 2]), epochs=0, seed=5)
    model, hist = train(X, arch, cfg)
    enc0, dec0 = init_params(arch, 5)
    for a, b in zip(model.enc.flat_arrays() + model.dec.flat_arrays(),
                    enc0.flat_arrays() + dec0.flat_arrays()):
        assert np.array_equal(a, b)
    assert hist.total == []
    assert all(v == [] for v in hist.per_k.values())


def test_training_is_deterministic_in_the_seed():
    X, arch = small_setup()
    cfg = cfg_for(LatentSchedule.uniform([0, 1, 2]), epochs=3, seed=11)
    m1, h1 = train(X, arch, cfg)
    m2, h2 = train(X, arch, cfg)
    assert h1.total == h2.total
    assert h1.per_k == h2.per_k
    for a, b in zip(m1.enc.flat_arrays() + m1.dec.flat_arrays(),
                    m2.enc.flat_arrays() + m2.dec.flat_arrays()):
        assert np.array_equal(a, b)
    m3, h3 = train(X, arch, cfg_for(LatentSchedule.uniform([0, 1, 2]),
                                    epochs=3, seed=12))
    assert h3.total != h1.total


def test_train_validates_inputs():
    X, arch = small_setup()
    cfg = cfg_for(LatentSchedule.uniform([0]))
    with pytest.raises(ValueError, match="non-empty"):
        train(np.zeros((0, 3)), arch, cfg)
    with pytest.raises(ValueError, match="columns"):
        train(np.zeros((4, 5)), arch, cfg)
    with pytest.raises(ValueError, match="kind"):
        train(X, arch, cfg, kind="vae")
    with pytest.raises(ValueError, match="noise_per_layer=0"):
        train(X, arch, cfg, kind="ae")


def test_nan_data_aborts_naming_epoch_and_batch():
    X, arch = small_setup()
    X[3, 1] = np.nan
    cfg = cfg_for(LatentSchedule.uniform([1]), epochs=1, batch_size=200)
    with pytest.raises(RuntimeError, match="epoch 0, batch 0"):
        train(X, arch, cfg)


def test_divergence_guard_trips_on_huge_learning_rate():
    X, arch = small_setup(n=64)
    cfg = cfg_for(LatentSchedule.uniform([1, 2]), epochs=30, batch_size=64,
                  learning_rate=80.0)
    with pytest.raises(RuntimeError, match="diverged"):
        train(X, arch, cfg)


def test_history_lengths_and_csv(tmp_path):
    X, arch = small_setup()
    cfg = cfg_for(LatentSchedule.uniform([0, 2]), epochs=4, seed=2)
    _, hist = train(X, arch, cfg)
    assert len(hist.total) == 4
    assert len(hist.seconds) == 4
    assert [len(v) for v in hist.per_k.values()] == [4, 4]
    path = tmp_path / "history.csv"
    hist.write_csv(path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "epoch,total,k0,k2"
    assert len(lines) == 5
    row = lines[1].split(",")
    assert int(row[0]) == 0
    assert float(row[1]) == hist.total[0]
    assert float(row[3]) == hist.per_k[2][0]


def test_loss_decreases_on_easy_data():
    X, arch = small_setup(n=256, seed=3)
    cfg = cfg_for(LatentSchedule.uniform([0, 1, 2]), epochs=30, seed=7,
                  batch_size=256, learning_rate=3e-3)
    _, hist = train(X, arch, cfg)
    assert np.mean(hist.total[-10:]) < np.mean(hist.total[:10])


def test_ordered_ae_mode_trains_with_squared_error():
    X, arch = small_setup(noise_per_layer=0)
    cfg = cfg_for(LatentSchedule.uniform([0, 2]), epochs=20, batch_size=96,
                  learning_rate=3e-3, seed=4)
    model, hist = train(X, arch, cfg, kind="ae")
    assert model.kind == "ae"
    assert hist.total[-1] < hist.total[0]
    # k=0 squared-error floor is the total variance around the best constant
    floor = float(np.sum(X.var(axis=0)))
    assert hist.per_k[0][-1] > 0.5 * floor


def gaussian_pair_distance(sigma):
    """E|X - X'| for X, X' iid N(0, sigma^2), by numeric double integration."""
    from scipy import integrate

    lim = 8.0 * sigma
    pdf = lambda t: math.exp(-t * t / (2 * sigma * sigma)) / (sigma * math.sqrt(2 * math.pi))
    val, err = integrate.dblquad(lambda y, x: abs(x - y) * pdf(x) * pdf(y),
                                 -lim, lim, -lim, lim)
    assert err < 1e-6
    return val


def test_pure_generation_reaches_energy_floor():
    # k=0 on 1-D Gaussian data: the loss floor is half the expected pair
    # distance, which numeric integration puts at sigma/sqrt(pi)
    rng = np.random.default_rng(42)
    sigma = 1.5
    X = rng.normal(0.0, sigma, size=(512, 1))
    sigma_hat = float(X.std())
    floor = 0.5 * gaussian_pair_distance(sigma_hat)
    assert abs(floor - sigma_hat / math.sqrt(math.pi)) < 1e-6

    arch = Architecture(input_dim=1, latent_dim=1, depth=2, width=8,
                        noise_per_layer=4)
    cfg = cfg_for(LatentSchedule.uniform([0]), epochs=200, batch_size=512,
                  learning_rate=5e-3, seed=1)
    _, hist = train(X, arch, cfg)
    final = float(np.mean(hist.per_k[0][-10:]))
    assert abs(final - floor) < 0.10 * floor
