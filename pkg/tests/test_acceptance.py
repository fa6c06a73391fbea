"""Acceptance suite: one test per criterion, each at its stated tolerance.

Run on its own with ``pytest tests/test_acceptance.py`` (or ``python
tests/test_acceptance.py``); the terminal summary ends with one PASS/FAIL
line per criterion and the measured numbers behind it.
"""

import math
import time
import warnings

import numpy as np
import pytest
from scipy import integrate

from fingertip.collision import (
    CollisionParams,
    collision_end_time,
    displacement,
    impulse_ratio,
    sweep_eta,
    total_impulse,
    write_sweep_csv,
)
from fingertip.estimator import MlpModel, forward, loss_and_gradient, train
from fingertip.kinematics import (
    PHI_RANGE,
    R_SENSOR,
    THETA_RANGE,
    ContactAngles,
    ContactForce,
    angles_from_point,
    contact_normal,
    contact_transform,
)
from fingertip.latency import (
    AmbiguousPeakWarning,
    TimeSeries,
    approach_press_profile,
    detect_transition,
    estimate_latency,
    zero_phase_moving_average,
)
from fingertip.mapping import Box, FingertipPose, map_scene, project_contact, sweep_poses, tap_pose, three_wall_room
from fingertip.reactive import approach_scene, collision_scene
from fingertip.sensor import ContactState, generate_dataset
from oracles import band_limited, naive_mlp, rk4_collision

NOMINAL = CollisionParams()


def _collision_draws(n, seed):
    rng = np.random.default_rng(seed)
    draws = []
    while len(draws) < n:
        p = CollisionParams(
            m_f=float(rng.uniform(0.0, 0.02)),
            m_r=float(rng.uniform(0.05, 0.2)),
            k=float(10 ** rng.uniform(3, 5)),
            v0=float(rng.uniform(0.01, 1.0)),
            t_l=0.0,
            F_in=float(rng.uniform(0.0, 20.0)),
        )
        draws.append(p.with_(t_l=float(rng.uniform(0.0, 1.0)) * p.half_period))
    return draws


@pytest.mark.criterion(1, "analytic displacement vs RK4, 1000 draws")
def test_criterion_1_rk4_equivalence(criterion):
    start = time.perf_counter()
    draws = _collision_draws(1000, seed=1)
    t_end = [collision_end_time(p) for p in draws]
    ts, xs = rk4_collision(
        [p.m_r for p in draws], [p.k for p in draws], [p.v0 for p in draws], [p.t_l for p in draws],
        [p.control_force for p in draws], t_end=t_end, max_step=1e-6,
    )
    cols = np.linspace(0, ts.shape[1] - 1, 100).round().astype(int)
    worst = 0.0
    for p, t, x in zip(draws, ts, xs):
        analytic = displacement(p, t[cols])
        worst = max(worst, np.max(np.abs(analytic - x[cols])) / np.max(np.abs(x)))
    elapsed = time.perf_counter() - start
    step = float(np.max(np.diff(ts, axis=1)))
    criterion["detail"] = f"max error {worst:.2e} of peak |x|, largest step {step * 1e6:.3f} us, {elapsed:.1f} s"
    assert step <= 1e-6 * (1 + 1e-9)
    assert worst <= 1e-6
    assert elapsed < 30


@pytest.mark.criterion(2, "eta = 1 without input or with input after release, 100 draws")
def test_criterion_2_unit_ratio(criterion):
    draws = _collision_draws(100, seed=2)
    no_input = max(abs(impulse_ratio(p.with_(F_in=0.0)) - 1.0) for p in draws)
    late = max(abs(impulse_ratio(p.with_(t_l=p.half_period * f)) - 1.0) for p, f in zip(draws, np.linspace(1, 3, 100)))
    criterion["detail"] = f"max |eta - 1|: {no_input:.1e} with F_in = 0, {late:.1e} with t_l >= pi/omega0"
    assert no_input <= 1e-12
    assert late <= 1e-12


@pytest.mark.criterion(3, "impulse-ratio surfaces: monotone in latency and stiffness")
def test_criterion_3_surfaces(criterion, tmp_path):
    start = time.perf_counter()
    tl = np.linspace(0.0, 0.025, 101)
    ks = np.logspace(2, 5, 61)
    along_tl = [r.eta for r in sweep_eta([NOMINAL.k], tl, [NOMINAL.v0], NOMINAL)]
    along_k = [r.eta for r in sweep_eta(ks, [0.007], [NOMINAL.v0], NOMINAL)]
    surf_k = sweep_eta(np.logspace(2, 5, 31), np.linspace(0.0, 0.025, 26), [NOMINAL.v0], NOMINAL)
    surf_v = sweep_eta([NOMINAL.k], np.linspace(0.0, 0.025, 26), np.linspace(0.01, 1.0, 34), NOMINAL)
    write_sweep_csv(surf_k, tmp_path / "eta_stiffness_latency.csv")
    write_sweep_csv(surf_v, tmp_path / "eta_velocity_latency.csv")
    elapsed = time.perf_counter() - start
    d_tl, d_k = np.diff(along_tl), np.diff(along_k)
    criterion["detail"] = (
        f"eta {along_tl[0]:.4f} -> {along_tl[-1]:.4f} over t_l, {along_k[0]:.4f} -> {along_k[-1]:.4f} over k, "
        f"at 7 ms {impulse_ratio(NOMINAL):.4f}, {elapsed:.1f} s"
    )
    assert np.all(d_tl >= 0) and np.all(d_k >= 0)
    assert all(r.status == "ok" for r in surf_k + surf_v)
    assert (tmp_path / "eta_stiffness_latency.csv").stat().st_size > 0
    assert elapsed < 60


@pytest.mark.criterion(4, "closed-form impulse vs quadrature")
def test_criterion_4_impulse_quadrature(criterion):
    worst, found = 0.0, 0
    for p in _collision_draws(300, seed=4):
        t_f = collision_end_time(p)
        found += 1
        pts = [p.t_l] if 0 < p.t_l < t_f else None
        spring, _ = integrate.quad(lambda t: p.k * displacement(p, t), 0.0, t_f, points=pts, epsabs=0, epsrel=1e-10, limit=200)
        oracle = p.m_f * p.v0 + spring
        worst = max(worst, abs(total_impulse(p, t_f) - oracle) / abs(oracle))
    criterion["detail"] = f"{found} draws, max relative error {worst:.1e}"
    assert worst <= 1e-4


@pytest.mark.criterion(5, "contact kinematics: radius, normal, inverse")
def test_criterion_5_kinematics(criterion):
    rng = np.random.default_rng(5)
    radius = normal = inverse = 0.0
    for th, ph in zip(rng.uniform(*THETA_RANGE, 10_000), rng.uniform(*PHI_RANGE, 10_000)):
        a = ContactAngles(th, ph)
        tr = contact_transform(a).translation
        r = np.linalg.norm(tr)
        radius = max(radius, abs(r - R_SENSOR) / R_SENSOR)
        normal = max(normal, np.max(np.abs(contact_normal(a) - tr / r)))
        back = angles_from_point(tr)
        inverse = max(inverse, abs(back.theta - th), abs(back.phi - ph))
    criterion["detail"] = f"radius {radius:.1e}, normal {normal:.1e}, round trip {inverse:.1e} rad"
    assert radius <= 1e-12 and normal <= 1e-12 and inverse <= 1e-9


def _relu_pattern(model, x):
    z = (x - model.input_mean) / model.input_std
    pattern = []
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        z = z @ w + b
        pattern.append(z > 0)
        z = np.maximum(z, 0.0)
    return np.concatenate([p.ravel() for p in pattern])


@pytest.mark.criterion(6, "estimator gradient vs central differences, forward vs naive oracle")
def test_criterion_6_gradient(criterion):
    rng = np.random.default_rng(6)
    worst_grad = worst_fwd = 0.0
    kinks = 0
    h = 1e-5
    for _ in range(20):
        model = MlpModel.initialize(seed=int(rng.integers(1 << 30)))
        model.params[...] += rng.normal(0, 0.05, model.n_params)
        model.set_normalization(rng.normal(size=(50, 8)), rng.normal(size=(50, 5)) * [5, 5, 10, 0.3, 0.6])
        x, y = rng.normal(size=(4, 8)), rng.normal(size=(4, 5))
        centre, grad = loss_and_gradient(model, x, y)
        here = _relu_pattern(model, x)
        num = np.empty_like(grad)
        for i in range(model.n_params):
            old = model.params[i]
            model.params[i] = old + h
            up, _ = loss_and_gradient(model, x, y)
            up_same = np.array_equal(_relu_pattern(model, x), here)
            model.params[i] = old - h
            down, _ = loss_and_gradient(model, x, y)
            down_same = np.array_equal(_relu_pattern(model, x), here)
            model.params[i] = old
            if up_same and down_same:
                num[i] = (up - down) / (2 * h)
            else:
                # a ReLU switches inside the stencil: difference on the side that stays smooth
                kinks += 1
                num[i] = (up - centre) / h if up_same else (centre - down) / h
        worst_grad = max(worst_grad, np.max(np.abs(grad - num)) / np.max(np.abs(num)))
        for s in x:
            z = (s - model.input_mean) / model.input_std
            ref = naive_mlp(model.weights, model.biases, z) * model.output_std + model.output_mean
            worst_fwd = max(worst_fwd, np.max(np.abs(forward(model, s) - ref)))
    criterion["detail"] = (
        f"gradient {worst_grad:.1e} relative ({kinks} one-sided at ReLU kinks), forward {worst_fwd:.1e} absolute"
    )
    assert worst_grad < 1e-4
    assert worst_fwd <= 1e-12


@pytest.mark.criterion(7, "pipeline regression quality on the desk-scale dataset")
def test_criterion_7_regression(criterion):
    start = time.perf_counter()
    noisy = generate_dataset()
    clean = generate_dataset(noise_std=0.0)
    _, _, rep_noisy = train(noisy, seed=0)
    _, _, rep_clean = train(clean, seed=0)
    elapsed = time.perf_counter() - start
    criterion["detail"] = (
        f"{len(noisy)} records, noise {noisy.metadata['noise_std']}: test {rep_noisy.force_rmse:.3f} N / "
        f"{rep_noisy.angle_rmse:.4f} rad; noiseless {rep_clean.force_rmse:.3f} N / {rep_clean.angle_rmse:.4f} rad; "
        f"{elapsed:.0f} s"
    )
    assert 30_000 <= len(noisy) <= 40_000
    assert rep_noisy.force_rmse <= 3.0
    assert rep_noisy.angle_rmse <= 0.2
    assert rep_clean.force_rmse <= 0.5 * rep_noisy.force_rmse
    assert rep_clean.angle_rmse <= 0.5 * rep_noisy.angle_rmse
    assert elapsed < 300


@pytest.mark.criterion(8, "latency recovery: 7 ms at 1 kHz, 4 ms at 2 kHz")
def test_criterion_8_latency(criterion):
    rng = np.random.default_rng(8)
    parts = []
    for rate, delay in ((1000.0, 0.007), (2000.0, 0.004)):
        d = int(round(delay * rate))
        errors = []
        for _ in range(100):
            x = band_limited(rng, 4000 + d, rate, cutoff=float(rng.uniform(5, 50)))
            truth, measured = TimeSeries(rate, x[d:]), TimeSeries(rate, x[:-d])
            errors.append(abs(estimate_latency(truth, measured, max_lag=0.1) - delay) * rate)
        parts.append(f"{delay * 1e3:.0f} ms @ {rate / 1e3:.0f} kHz: max error {max(errors):.2f} samples")
        assert max(errors) <= 1.0
    criterion["detail"] = "; ".join(parts)


@pytest.mark.criterion(9, "transition detection and zero-lag smoothing")
def test_criterion_9_transition(criterion):
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(50):
        contact = float(rng.uniform(0.5, 1.5))
        prox, force = approach_press_profile(contact_time=contact, force_noise=0.04, prox_noise=1.0, rng=rng)
        ev = detect_transition(prox, force)
        worst = max(worst, abs(ev.contact_time - contact) * prox.rate)
    lags = []
    for window in (7, 15):
        for _ in range(20):
            x = TimeSeries(200.0, band_limited(rng, 2000, 200.0, cutoff=5.0))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", AmbiguousPeakWarning)
                lags.append(estimate_latency(x, zero_phase_moving_average(x, window), max_lag=0.2))
    criterion["detail"] = f"contact error {worst:.2f} samples, smoothing lag max {max(map(abs, lags)):.3g} s"
    assert worst <= 1.0
    assert all(lag == 0.0 for lag in lags)


@pytest.mark.criterion(10, "mapping: removed-object diffs, outward tap normals")
def test_criterion_10_mapping(criterion):
    walls, objects = three_wall_room()
    poses = sweep_poses()
    full, _ = map_scene(poses, walls + objects)
    margin = 0.011
    for removed in objects:
        partial, _ = map_scene(poses, walls + [o for o in objects if o is not removed])
        gone = full.occupied() - partial.occupied()
        zone = Box(np.subtract(removed.lower, margin), np.add(removed.upper, margin))
        assert gone and all(zone.contains(full.center(i)) for i in gone)
    box = Box((-0.05, 0.1, 0.0), (0.05, 0.2, 0.08))
    faces = [((0.0, 0.1, 0.04), (0, -1, 0)), ((0.05, 0.15, 0.04), (1, 0, 0)),
             ((-0.05, 0.15, 0.04), (-1, 0, 0)), ((0.0, 0.15, 0.08), (0, 0, 1))]
    rng = np.random.default_rng(10)
    worst, offset = 1.0, 0.0
    for point, n in faces:
        for _ in range(25):
            a = ContactAngles(rng.uniform(*THETA_RANGE), rng.uniform(*PHI_RANGE))
            tf = tap_pose(point, n, a, spin=rng.uniform(-math.pi, math.pi))
            mp = project_contact(FingertipPose(tf), ContactState(a, ContactForce(0.0, 0.0, -5.0)))
            worst = min(worst, float(mp.surface_normal @ np.asarray(n, dtype=float)))
            offset = max(offset, float(np.linalg.norm(mp.position - point)))
            assert box.contains(mp.position, margin=1e-9)
    criterion["detail"] = f"{len(full.occupied())} cells in full scene, worst normal dot {worst:.6f}"
    assert worst > 0.99
    assert offset < 1e-9


@pytest.mark.criterion(11, "reactive simulation vs analytic eta, potential-field clearance")
def test_criterion_11_reactive(criterion):
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(10):
        p = CollisionParams(
            k=float(rng.uniform(800, 5000)), v0=float(rng.uniform(0.05, 0.5)),
            t_l=float(rng.uniform(0.0, 0.015)), F_in=float(rng.uniform(2, 15)),
        )
        eta_sim, _ = collision_scene(p)
        worst = max(worst, abs(eta_sim - impulse_ratio(p)) / impulse_ratio(p))
    with_field = approach_scene(field_on=True).clearance.min()
    without = approach_scene(field_on=False).clearance.min()
    criterion["detail"] = (
        f"max eta deviation {worst * 100:.2f}%, min clearance {with_field * 1e3:.1f} mm with field vs "
        f"{without * 1e3:.1f} mm without"
    )
    assert worst <= 0.05
    assert with_field > without


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
