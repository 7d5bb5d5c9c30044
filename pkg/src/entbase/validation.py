"""Invariant suite behind the ``validate`` subcommand.

Every check runs at reduced grid density (the pytest suite carries the
full-density versions) and raises AssertionError with a detail string on
failure. The closed-form/projector-oracle agreement check is the canary
for sign mistakes in the coincidence formulas: flipping the fringe sign
in either route makes it fail immediately.
"""

from __future__ import annotations

import math

import numpy as np

from . import channels, imaging, protocol, qcore

__all__ = ["CHECKS", "random_density", "random_xstate", "run_all"]


def random_xstate(rng: np.random.Generator, with_outer: bool = True) -> qcore.XState:
    """Random valid X-form state (positive by construction)."""
    a, g, f, h = rng.dirichlet(np.ones(4))
    w_a = rng.uniform(0.0, 1.0) * math.sqrt(g * f)
    z_a = rng.uniform(0.0, 1.0) * math.sqrt(a * h) if with_outer else 0.0
    return qcore.XState(a=a, g=g, f=f, h=h,
                        w_a=w_a, w_p=rng.uniform(-math.pi, math.pi),
                        z_a=z_a, z_p=rng.uniform(-math.pi, math.pi))


def random_density(rng: np.random.Generator) -> qcore.DensityMatrix4:
    """Random full-rank two-qubit density matrix."""
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = m @ m.conj().T
    return qcore.DensityMatrix4(rho / rho.trace())


_KRAUS = {
    "amplitude_damping": qcore.kraus_amplitude_damping,
    "dephasing": qcore.kraus_dephasing,
    "depolarizing": qcore.kraus_depolarizing,
}

_CLOSED = {
    "amplitude_damping": channels.xstate_amplitude_damping,
    "dephasing": channels.xstate_dephasing,
    "depolarizing": channels.xstate_depolarizing,
}


def check_kraus_completeness():
    for name, make in _KRAUS.items():
        for p in np.linspace(0.0, 1.0, 21):
            ch = make(p)
            acc = sum(k.conj().T @ k for k in ch.operators)
            defect = np.max(np.abs(acc - np.eye(2)))
            assert defect <= 1e-12, f"{name}({p}): completeness defect {defect:.3e}"


def check_channel_closed_forms():
    import warnings
    bell = qcore.make_bell_psi(0.0)
    grid = np.linspace(0.0, 1.0, 11)
    for name in _KRAUS:
        for p_l in grid:
            for p_r in grid:
                via_kraus = qcore.apply_independent_channels(
                    bell, _KRAUS[name](p_l), _KRAUS[name](p_r))
                with warnings.catch_warnings():
                    # asymmetric-arm depolarization past x = 1/4 flips the coherence sign
                    warnings.simplefilter("ignore", channels.DegenerateCoherenceWarning)
                    closed = _CLOSED[name](p_l, p_r).to_density()
                diff = np.max(np.abs(via_kraus.entries - closed.entries))
                assert diff <= 1e-12, f"{name}({p_l}, {p_r}): entrywise gap {diff:.3e}"


def check_xform_closure():
    bell = qcore.make_bell_psi(0.0)
    grid = np.linspace(0.05, 0.95, 4)
    for left_name, left in _KRAUS.items():
        for right_name, right in _KRAUS.items():
            for p_l in grid:
                for p_r in grid:
                    out = qcore.apply_independent_channels(bell, left(p_l), right(p_r))
                    qcore.extract_xstate(out, tol=1e-12)  # raises if not X form
                    tr = abs(out.entries.trace() - 1.0)
                    assert tr <= 1e-12, f"{left_name}x{right_name}: trace defect {tr:.3e}"


def check_channel_map_properties():
    rng = np.random.default_rng(2024)
    makers = list(_KRAUS.values())
    for _ in range(40):
        rho = random_density(rng)
        left = makers[rng.integers(3)](rng.uniform())
        right = makers[rng.integers(3)](rng.uniform())
        out = qcore.apply_independent_channels(rho, left, right).entries
        assert abs(out.trace() - 1.0) <= 1e-12
        assert np.max(np.abs(out - out.conj().T)) <= 1e-12
        assert np.linalg.eigvalsh(out)[0] >= -1e-10


def check_concurrence_monotone():
    import warnings
    lam = [qcore.extract_xstate(qcore.apply_independent_channels(
        qcore.make_bell_psi(0.0), qcore.kraus_amplitude_damping(p),
        qcore.kraus_amplitude_damping(p))) for p in np.linspace(0.0, 0.95, 12)]
    mu = [channels.xstate_dephasing(p, p) for p in np.linspace(0.0, 1.0, 12)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        # beyond kappa = 3/4 the Pauli map passes its fixed point and re-coheres
        kap = [channels.xstate_depolarizing(p, p) for p in np.linspace(0.0, 0.75, 12)]
    for family, states in (("lambda", lam), ("mu", mu), ("kappa", kap)):
        concs = [qcore.concurrence_subspace(x) for x in states]
        for c1, c2 in zip(concs, concs[1:]):
            assert c2 <= c1 + 1e-12, f"concurrence not monotone in {family}"


def check_ideal_limit_fringe():
    for v_a in np.linspace(0.0, 1.0, 10):
        for v_p in np.linspace(-3.0, 3.0, 10):
            for delta in np.linspace(-3.0, 3.0, 10):
                x = qcore.extract_xstate(qcore.make_bell_psi(delta))
                q_c, q_ac = protocol.raw_probabilities(qcore.AstroVisibility(v_a, v_p), x)
                p_c, _ = protocol.postselect(q_c, q_ac)
                expected = 0.5 * (1.0 - v_a * math.cos(v_p - delta))
                assert abs(p_c - expected) <= 1e-12, \
                    f"fringe mismatch at (V_a={v_a}, V_p={v_p}, delta={delta})"


def check_projector_oracle():
    rng = np.random.default_rng(11)
    for _ in range(100):
        v = qcore.AstroVisibility(rng.uniform(), rng.uniform(-math.pi, math.pi))
        x = random_xstate(rng)
        closed = protocol.raw_probabilities(v, x)
        oracle = protocol.raw_probabilities_oracle(qcore.make_astro_state(v), x.to_density())
        gap = max(abs(closed[0] - oracle[0]), abs(closed[1] - oracle[1]))
        assert gap <= 1e-12, f"oracle disagrees by {gap:.3e}"


def check_postselection_normalization():
    rng = np.random.default_rng(12)
    for _ in range(50):
        v = qcore.AstroVisibility(rng.uniform(), rng.uniform(-math.pi, math.pi))
        x = random_xstate(rng)
        q_c, q_ac = protocol.raw_probabilities(v, x)
        assert abs(q_c + q_ac - 0.5 * (x.g + x.f)) <= 1e-12
        if q_c + q_ac > 0.0:
            p_c, p_ac = protocol.postselect(q_c, q_ac)
            assert p_c + p_ac == 1.0


def check_estimator_round_trip():
    rng = np.random.default_rng(13)
    ph = protocol.PhaseSettings(0.0, 0.5 * math.pi)
    for _ in range(50):
        v_a = rng.uniform(0.05, 1.0)
        v_p = rng.uniform(-math.pi, math.pi)
        conc = rng.uniform(0.1, 1.0)
        dp1 = v_a * conc * math.cos(v_p - ph.w1)
        dp2 = v_a * conc * math.cos(v_p - ph.w2)
        va_hat, vp_hat = protocol.solve_visibility(dp1, dp2, ph, conc)
        assert abs(va_hat - v_a) <= 1e-12 and abs(qcore.wrap_phase(vp_hat - v_p)) <= 1e-12


def check_error_derivatives_fd():
    ph = protocol.PhaseSettings(0.1, 0.1 + 0.5 * math.pi)
    for alpha in (0.4, 1.3, -0.7):
        step = 1e-6 * max(1.0, abs(alpha))
        fd = (protocol.phase_from_ratio(alpha + step, ph)
              - protocol.phase_from_ratio(alpha - step, ph)) / (2 * step)
        an = protocol.phase_ratio_derivative(alpha, ph)
        assert abs(fd - an) <= 1e-6 * max(1.0, abs(an)), f"dVp/dalpha FD gap at {alpha}"
    for dp, v_p, conc, w in ((0.3, 0.4, 0.8, 0.1), (-0.2, 1.2, 0.5, 1.67)):
        d_dp, d_vp = protocol.amplitude_partials(dp, v_p, conc, w)
        h = 1e-6
        fd_dp = (protocol.amplitude_from_delta(dp + h, v_p, conc, w)
                 - protocol.amplitude_from_delta(dp - h, v_p, conc, w)) / (2 * h)
        fd_vp = (protocol.amplitude_from_delta(dp, v_p + h, conc, w)
                 - protocol.amplitude_from_delta(dp, v_p - h, conc, w)) / (2 * h)
        assert abs(fd_dp - d_dp) <= 1e-6 * max(1.0, abs(d_dp))
        assert abs(fd_vp - d_vp) <= 1e-6 * max(1.0, abs(d_vp))


def check_memory_swap_composition():
    tau = 1.7
    for t1 in np.linspace(0.0, 3.0, 7):
        for t2 in np.linspace(0.0, 3.0, 7):
            for sign in (+1, -1):
                via_swap = channels.swap_memories(t1, t2, tau, sign).to_density().entries
                direct = channels.memory_xstate(t1 + t2, tau, sign).to_density().entries
                assert np.max(np.abs(via_swap - direct)) <= 1e-12
    for t in np.linspace(0.0, 4.0, 9):
        for sign, delta in ((+1, 0.0), (-1, math.pi)):
            gamma = channels.memory_dephasing_channel(t, tau)
            stored = qcore.apply_independent_channels(qcore.make_bell_psi(delta), gamma, gamma)
            expected = channels.memory_xstate(t, tau, sign).to_density().entries
            assert np.max(np.abs(stored.entries - expected)) <= 1e-12


def check_depol_x_bound():
    for k_l in np.linspace(0.0, 1.0, 11):
        for k_r in np.linspace(0.0, 1.0, 11):
            x = channels.depol_x_param(k_l, k_r)
            assert -1e-15 <= x <= 1.0 / 3.0 + 1e-15, f"x={x} at ({k_l}, {k_r})"


def check_rate_monotonicity():
    import warnings
    rates = channels.RateModel(1.0, 1.0)
    grids = {
        "lambda": [channels.xstate_amplitude_damping(p, p) for p in np.linspace(0, 1, 12)],
        "mu": [channels.xstate_dephasing(p, p) for p in np.linspace(0, 1, 12)],
    }
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        grids["kappa"] = [channels.xstate_depolarizing(p, p)
                          for p in np.linspace(0, 0.75, 12)]
    for family, states in grids.items():
        rs = [channels.measurement_rate(qcore.subspace_weight(x), rates) for x in states]
        for r1, r2 in zip(rs, rs[1:]):
            assert r2 <= r1 + 1e-15, f"rate not monotone in {family}"


def check_fiber_rate_line():
    rates = channels.RateModel(0.8, 1e6)
    l0 = 10.0
    bs = np.linspace(0.0, 6 * l0, 25)
    logs = []
    for b in bs:
        lam = channels.fiber_loss_prob(b / 2.0, l0)
        xi = qcore.subspace_weight(channels.xstate_amplitude_damping(lam, lam))
        direct = math.log(channels.measurement_rate(xi, rates))
        shortcut = channels.log_rate_fiber(b, l0, rates)
        assert abs(direct - shortcut) <= 1e-12
        logs.append(direct)
    slope = np.polyfit(bs, logs, 1)[0]
    assert abs(slope + 1.0 / (2.0 * l0)) <= 1e-9, f"slope {slope}"


def check_depol_rate_asymptote():
    rates = channels.RateModel(1.0, 1.0)
    beta = 1.0
    for bl in np.linspace(5.0, 40.0, 15):
        kappa = channels.depol_prob(bl, beta)
        xi = qcore.subspace_weight(channels.xstate_depolarizing(kappa, kappa))
        exact = math.log(channels.measurement_rate(xi, rates))
        approx = channels.log_rate_depol_approx(bl, beta, rates)
        assert approx.in_regime
        assert abs(approx.value - exact) <= 0.01, f"approx off by {approx.value - exact:.4f}"
    kappa = channels.depol_prob(40.0, beta)
    xi = qcore.subspace_weight(channels.xstate_depolarizing(kappa, kappa))
    assert abs(0.5 * xi - 5.0 / 18.0) <= 1e-6
    assert not channels.log_rate_depol_approx(0.0, beta, rates).in_regime


def check_forward_visibility():
    rng = np.random.default_rng(21)
    for _ in range(30):
        n = rng.integers(1, 6)
        sky = imaging.SkyModel(tuple((rng.uniform(-0.05, 0.05), rng.uniform(0.1, 2.0))
                                     for _ in range(n)), wavelength=1.0)
        for b in rng.uniform(0.0, 500.0, size=5):
            assert abs(imaging.true_visibility(sky, b)) <= 1.0 + 1e-12
    sky2 = imaging.SkyModel(((-0.01, 1.0), (0.01, 1.0)), wavelength=1.0)
    null_b = 1.0 / (2 * 0.02)
    assert abs(imaging.true_visibility(sky2, null_b)) <= 1e-12


def check_reconstruction_hermitian():
    sky = imaging.SkyModel(((-0.01, 1.0), (0.012, 0.7)), wavelength=1.0)
    plan = imaging.BaselinePlan.linear(60.0, 32)
    samples = [imaging.VisibilitySample(b, imaging.true_visibility(sky, b))
               for b in plan.baselines]
    grid = imaging.default_theta_grid(sky, plan.B_m)
    raw = imaging._dirty_image_complex(samples, grid, 1.0)
    assert np.max(np.abs(raw.imag)) <= 1e-12 * max(1.0, np.max(np.abs(raw.real)))


def check_resolvability():
    sep = 0.02
    sky = imaging.SkyModel(((-sep / 2, 1.0), (sep / 2, 1.0)), wavelength=1.0)
    threshold = 1.0 / (2 * sep)
    grid = np.linspace(-1.5 * sep, 1.5 * sep, 121)
    for factor, expected in ((0.5, 1), (2.0, 2)):
        plan = imaging.BaselinePlan.linear(factor * threshold, 48)
        samples = [imaging.VisibilitySample(b, imaging.true_visibility(sky, b))
                   for b in plan.baselines]
        rec = imaging.reconstruct_intensity(samples, grid, 1.0)
        n_peaks = len(imaging.find_peaks(rec))
        assert n_peaks == expected, f"{factor}x threshold: {n_peaks} peaks"


def check_estimator_slope_mc():
    ph = protocol.PhaseSettings(0.0, 0.5 * math.pi)
    x = channels.ideal_bell_xstate()
    v = qcore.AstroVisibility(0.7, 0.9)
    ns = [1000, 10000]
    log_rmse = []
    for n in ns:
        errs = [protocol.run_observation(v, x, ph, n, protocol.derive_seed(5, n, k)).V_a_hat - 0.7
                for k in range(60)]
        log_rmse.append(math.log10(math.sqrt(np.mean(np.square(errs)))))
    slope = (log_rmse[1] - log_rmse[0]) / (math.log10(ns[1]) - math.log10(ns[0]))
    assert abs(slope + 0.5) <= 0.15, f"slope {slope:.3f}"


def check_error_bar_coverage_mc():
    ph = protocol.PhaseSettings(0.0, 0.5 * math.pi)
    x = channels.ideal_bell_xstate()
    v = qcore.AstroVisibility(0.7, 0.9)
    hits = 0
    for k in range(40):
        est = protocol.run_observation(v, x, ph, 100_000, protocol.derive_seed(6, k))
        if abs(est.V_a_hat - 0.7) <= 5.0 * est.dV_a:
            hits += 1
    assert hits >= 38, f"coverage {hits}/40"


def check_fringe_bound_mc():
    rng = np.random.default_rng(31)
    ph = protocol.PhaseSettings(0.0, 0.5 * math.pi)
    for _ in range(25):
        x = random_xstate(rng, with_outer=False)
        if x.g + x.f <= 1e-3 or x.w_a <= 1e-6:
            continue
        v = qcore.AstroVisibility(rng.uniform(), rng.uniform(-math.pi, math.pi))
        conc = qcore.concurrence_subspace(x)
        n = 5000
        for index, offset in ((1, ph.w1), (2, ph.w2)):
            q_c, q_ac = protocol.raw_probabilities(v, x.with_phase_offset(offset))
            p_c, _ = protocol.postselect(q_c, q_ac)
            counts = protocol.sample_counts(p_c, n, protocol.derive_seed(7, index))
            dp = protocol.delta_p(counts)
            assert abs(dp) <= v.V_a * conc + 5.0 / math.sqrt(n)


CHECKS = (
    ("kraus-completeness", check_kraus_completeness, False),
    ("channel-closed-forms", check_channel_closed_forms, False),
    ("x-form-closure", check_xform_closure, False),
    ("channel-map-properties", check_channel_map_properties, False),
    ("concurrence-monotone", check_concurrence_monotone, False),
    ("ideal-limit-fringe", check_ideal_limit_fringe, False),
    ("projector-oracle", check_projector_oracle, False),
    ("postselection-normalization", check_postselection_normalization, False),
    ("estimator-round-trip", check_estimator_round_trip, False),
    ("error-derivatives-fd", check_error_derivatives_fd, False),
    ("memory-swap-composition", check_memory_swap_composition, False),
    ("depol-x-bound", check_depol_x_bound, False),
    ("rate-monotonicity", check_rate_monotonicity, False),
    ("fiber-rate-line", check_fiber_rate_line, False),
    ("depol-rate-asymptote", check_depol_rate_asymptote, False),
    ("forward-visibility", check_forward_visibility, False),
    ("reconstruction-hermitian", check_reconstruction_hermitian, False),
    ("two-source-resolvability", check_resolvability, False),
    ("estimator-slope[mc]", check_estimator_slope_mc, True),
    ("error-bar-coverage[mc]", check_error_bar_coverage_mc, True),
    ("fringe-bound[mc]", check_fringe_bound_mc, True),
)


def run_all(fast: bool = False, out=print) -> bool:
    """Run every check (``fast`` skips the Monte Carlo ones); True iff all pass."""
    all_ok = True
    for name, fn, is_mc in CHECKS:
        if fast and is_mc:
            out(f"SKIP {name}")
            continue
        try:
            fn()
        except AssertionError as exc:
            out(f"FAIL {name}: {exc}")
            all_ok = False
        except Exception as exc:  # config/runtime errors are failures too
            out(f"FAIL {name}: {type(exc).__name__}: {exc}")
            all_ok = False
        else:
            out(f"PASS {name}")
    return all_ok
