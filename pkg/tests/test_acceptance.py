"""Acceptance criteria, one test each.

Every test records a single ``[criterion k] PASS|FAIL ...`` line, printed in
the "acceptance criteria" section of the terminal summary, and then asserts the
criterion at its stated tolerance. ``python3 tests/test_acceptance.py`` runs
just this module.
"""

import math

import numpy as np
import pytest

from multiscale_pi import (
    LEDGER_PRESETS,
    PRESETS,
    DivergenceError,
    MultiscaleSystem,
    Scheme,
    SchemeConfig,
    State,
    ToySystemParams,
    approx_manifold,
    check_assumptions,
    hmm_endpoint_weights,
    integrate_multiscale,
    integrate_reduced,
    integrate_reference,
    lemma1_bound,
    lemma5_dn_bound,
    loglog_slope,
    measure_errors,
    micro_burst,
    micro_step,
    pi_macro_step,
    pi_macro_step_weighted,
    pi_weights,
    run_experiment,
    theorem1_total_bound,
    theorem4_discretization_bound,
    toy_system,
    vector_norm,
)

from conftest import ACCEPTANCE_LINES


def report(k: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[k] = f"[criterion {k}] {'PASS' if ok else 'FAIL'} {detail}"


def _slopes(preset):
    return [run_experiment(spec) for spec in PRESETS[preset]]


# 1-3: the three scaling experiments


def test_criterion_1_dt_macro_scaling():
    lo_hi = [(0.90, 1.15), (0.95, 1.20)]
    results = _slopes("fig2")
    parts, ok = [], True
    for res, (lo, hi) in zip(results, lo_hi):
        good = lo <= res.slope <= hi
        ok &= good
        parts.append(f"{res.spec.name}: slope={res.slope:.4f} in [{lo}, {hi}]")
    report(1, ok, "; ".join(parts))
    assert ok


def test_criterion_2_eps_scaling():
    (res,) = _slopes("fig3")
    ok = 0.85 <= res.slope <= 1.05
    report(2, ok, f"fig3: slope={res.slope:.4f} in [0.85, 1.05]")
    assert ok


def test_criterion_3_dn_scaling():
    lo_hi = [(0.90, 1.10), (0.93, 1.13)]
    results = _slopes("fig4")
    parts, ok = [], True
    for res, (lo, hi) in zip(results, lo_hi):
        good = lo <= res.slope <= hi
        ok &= good
        parts.append(f"{res.spec.name}: slope={res.slope:.4f} in [{lo}, {hi}]")
    report(3, ok, "; ".join(parts))
    assert ok


# 4: the two PI formulations


def _random_system(rng):
    n = int(rng.integers(1, 4))
    m = int(rng.integers(1, 4))
    lam = np.concatenate([[1.0], rng.uniform(1.0, 3.0, m - 1)])
    rng.shuffle(lam)
    A = rng.normal(size=(m, n))
    B = rng.normal(size=(n, m))
    C = rng.normal(size=(n, n))
    eps = 10 ** rng.uniform(-5, -1)
    return MultiscaleSystem(
        n, m, eps, lam, lambda y: np.sin(A @ y), lambda x, y: B @ x - 0.5 * C @ (y * y)
    )


_TOYS = [ToySystemParams(1.0, 0.1), ToySystemParams(0.1, 1.0), ToySystemParams(1.0, 1.0)]


def test_criterion_4_pi_equivalence():
    rng = np.random.default_rng(20240404)
    worst_scaled = worst_plain = 0.0
    plain_misses = instances = skipped = 0
    while instances < 1000:
        if rng.random() < 0.3:
            sys_ = toy_system(_TOYS[int(rng.integers(3))], 10 ** rng.uniform(-5, -2))
        else:
            sys_ = _random_system(rng)
        eps, lam = sys_.epsilon, sys_.lambda_max
        cfg = SchemeConfig(
            rng.uniform(0.01, 1.99) * eps / lam, rng.uniform(0.1, 30.0) * eps, int(rng.integers(0, 60))
        )
        s = State.of(sys_, rng.normal(size=sys_.fast_dim), rng.normal(size=sys_.slow_dim))
        try:
            a = pi_macro_step(sys_, s, cfg)
            b = pi_macro_step_weighted(sys_, s, cfg)
        except DivergenceError:
            skipped += 1
            continue
        instances += 1
        burst = micro_burst(sys_, s, cfg)
        for u, v, hist in ((a.x, b.x, burst.xs), (a.y, b.y, burst.ys)):
            gap = np.abs(u - v)
            # relative to the largest magnitude the update passed through
            scale = np.maximum(np.maximum(np.abs(u), np.abs(v)), np.abs(hist).max(axis=0))
            worst_scaled = max(worst_scaled, float(np.max(gap / scale)))
            plain = gap / np.maximum(np.abs(u), np.finfo(float).tiny)
            worst_plain = max(worst_plain, float(np.max(plain)))
            plain_misses += int(np.any(plain > 1e-12))
        assert a.t == pytest.approx(b.t, rel=1e-15)
    ok = worst_scaled <= 1e-12
    report(
        4,
        ok,
        f"{instances} instances: max gap / magnitude = {worst_scaled:.2e} <= 1e-12"
        f" (gap / |output|: max {worst_plain:.2e}, {plain_misses} components above 1e-12"
        f" where the output cancels to near zero; {skipped} diverging draws skipped)",
    )
    assert ok


# 5: weight normalization


def test_criterion_5_weight_normalization():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(2000):
        M = int(rng.integers(0, 500))
        cfg = SchemeConfig(10 ** rng.uniform(-8, 0), 10 ** rng.uniform(-6, 1), M)
        worst = max(worst, abs(math.fsum(pi_weights(cfg).w) - 1.0))
        worst = max(worst, abs(math.fsum(hmm_endpoint_weights(M).w) - 1.0))
    ok = worst <= 1e-15
    report(5, ok, f"2000 random configs: max |sum w - 1| = {worst:.2e} <= 1e-15")
    assert ok


# 6: bound domination


def _domination_draw(rng):
    """Draw a fig2-system run that satisfies A6-A8 with the fig2 ledger."""
    c = LEDGER_PRESETS["fig2"]
    while True:
        eps = 10 ** rng.uniform(-4, -3)
        dt = rng.uniform(0.02, 1.98) * eps
        M = int(rng.integers(1, 101))
        DT = rng.uniform(2.05, 20.0) * eps
        cfg = SchemeConfig(dt, DT, M)
        if check_assumptions(c, cfg, eps).a6_ok and check_assumptions(c, cfg, eps).a7_ok:
            rep = check_assumptions(c, cfg, eps)
            if rep.a8_ok and rep.branch_valid:
                break
    y0 = rng.uniform(0.5, 0.95)
    d0 = rng.uniform(-0.05, 0.05)
    n = int(rng.integers(1, 11))
    return c, eps, cfg, y0, d0, n


def test_criterion_6_bound_domination():
    rng = np.random.default_rng(6)
    params = ToySystemParams(1.0, 0.1)
    violations = {"lemma1": 0, "lemma5": 0, "theorem4": 0, "theorem1": 0}
    checks = dict.fromkeys(violations, 0)
    margins = dict.fromkeys(violations, math.inf)
    for _ in range(100):
        c, eps, cfg, y0, d0, n = _domination_draw(rng)
        sys_ = toy_system(params, eps)
        y = np.array([y0])
        s0 = State.of(sys_, approx_manifold(sys_, y) + d0, y)
        led = c.with_offsets(c0x=abs(d0))
        traj = integrate_multiscale(sys_, s0, cfg, Scheme.PI, n_steps=n, keep_micro=True)
        assert not traj.diverged
        T = float(traj.times[-1])
        full = integrate_reference(sys_, s0, None, T, t_eval=traj.times[1:])
        red = integrate_reduced(sys_, y, min(cfg.dt_macro, eps) / 20, T, t_eval=traj.times[1:])
        errs = measure_errors(traj, sys_, full, red)

        def record(name, measured, bound):
            checks[name] += 1
            margins[name] = min(margins[name], bound / max(measured, 1e-300))
            violations[name] += int(not measured <= bound)

        for burst in traj.bursts:
            d_start = vector_norm(burst.xs[0] - approx_manifold(sys_, burst.ys[0]))
            for m in range(len(burst)):
                d = vector_norm(burst.xs[m] - approx_manifold(sys_, burst.ys[m]))
                record("lemma1", d, lemma1_bound(led, eps, cfg.dt_micro, m, d_start))
        dn5 = lemma5_dn_bound(led, cfg, eps, abs(d0))
        for k in range(1, n + 1):
            dn = float(errs["d_n"].values[k - 1])
            record("lemma5", dn, dn5)
            record("theorem4", float(errs["E_d"].values[k]), theorem4_discretization_bound(led, cfg, eps, k, dn))
            record("theorem1", float(errs["E_total"].values[k]), theorem1_total_bound(led, cfg, eps, k, dn))
    ok = sum(violations.values()) == 0
    detail = ", ".join(
        f"{k}: {violations[k]}/{checks[k]} violations (min bound/measured {margins[k]:.3g})" for k in violations
    )
    report(6, ok, f"100 runs: {detail}")
    assert ok


# 7: reduction error scaling


def test_criterion_7_reduction_error_scaling():
    params = ToySystemParams(0.1, 1.0)
    T = 0.01
    eps_values = np.geomspace(1e-6, 1e-4, 6)
    y = np.array([5.0])
    reduced = integrate_reduced(toy_system(params, 1e-4), y, 1e-6 / 20, T)
    Y_T = reduced.ys[-1, 0]
    errors = []
    for eps in eps_values:
        sys_ = toy_system(params, eps)
        s0 = State.of(sys_, approx_manifold(sys_, y), y)
        full = integrate_reference(sys_, s0, None, T)
        errors.append(abs(full.ys[-1, 0] - Y_T))
    slope, _, _ = loglog_slope(eps_values, errors)
    ok = 0.9 <= slope <= 1.1
    report(7, ok, f"6 eps in [1e-6, 1e-4], T=0.01: slope={slope:.4f} in [0.9, 1.1]")
    assert ok


# 8: microstep with dt = eps lands on the manifold


def test_criterion_8_special_step():
    rng = np.random.default_rng(8)
    worst = 0.0
    systems = [toy_system(p, 10 ** rng.uniform(-6, -1)) for p in _TOYS]
    systems.append(
        MultiscaleSystem(2, 1, 3e-3, [1.0], lambda y: np.array([np.exp(-y[0] ** 2) + y[1]]), lambda x, y: -x * y)
    )
    for _ in range(2000):
        sys_ = systems[int(rng.integers(len(systems)))]
        y = rng.uniform(-5, 5, sys_.slow_dim)
        x = rng.uniform(-10, 10, 1)
        out = micro_step(sys_, State.of(sys_, x, y), sys_.epsilon)
        target = sys_.f(y)
        ulp = np.spacing(max(abs(x[0]), abs(float(target[0]))))
        worst = max(worst, abs(out.x[0] - target[0]) / ulp)
    ok = worst <= 8
    report(8, ok, f"2000 steps: max |x' - f(y)| = {worst:.1f} ulp <= 8")
    assert ok


# 9: oracle self-checks on every preset


def _preset_oracle_cases():
    cases = {}
    for name, specs in PRESETS.items():
        for spec in specs:
            eps_list = spec.sweep if spec.swept_field == "eps" else (spec.eps,)
            offsets = spec.sweep if spec.swept_field == "x0_offset" else (spec.x0_offset,)
            if spec.T_final is not None:
                T = spec.T_final
                DT = min(spec.sweep)
            else:
                DT = spec.dt_macro
                T = spec.n_steps * (DT + spec.num_micro * spec.dt_micro)
            for eps in (min(eps_list), max(eps_list)):
                h = min(DT, eps) / 20
                for off in (min(offsets), max(offsets)):
                    cases[(name, spec.toy, eps, spec.y0, off, round(T, 15), h)] = None
    return list(cases)


def test_criterion_9_oracle_self_validation():
    worst_full = worst_red = 0.0
    cases = _preset_oracle_cases()
    for _, toy, eps, y0, off, T, h in cases:
        sys_ = toy_system(toy, eps)
        y = np.array([y0])
        s0 = State.of(sys_, approx_manifold(sys_, y) + off, y)
        full = integrate_reference(sys_, s0, None, T)
        red = integrate_reduced(sys_, y, h, T)
        worst_full = max(worst_full, full.check_residual)
        worst_red = max(worst_red, red.check_residual)
    ok = worst_full <= 1e-9 and worst_red <= 1e-10
    report(
        9,
        ok,
        f"{len(cases)} preset cases: full halving gap {worst_full:.2e} <= 1e-9,"
        f" reduced halving gap {worst_red:.2e} <= 1e-10",
    )
    assert ok


# 10: microstep recursion for the manifold distance


def test_criterion_10_microstep_recursion():
    rng = np.random.default_rng(10)
    worst = 0.0
    steps = 0
    for _ in range(200):
        if rng.random() < 0.5:
            sys_ = toy_system(_TOYS[int(rng.integers(3))], 10 ** rng.uniform(-5, -2))
        else:
            sys_ = _random_system(rng)
        eps, lam = sys_.epsilon, sys_.lambda_diag
        cfg = SchemeConfig(rng.uniform(0.01, 1.99) * eps / lam.max(), 10 * eps, int(rng.integers(1, 50)))
        s = State.of(sys_, rng.normal(size=sys_.fast_dim), rng.normal(size=sys_.slow_dim))
        burst = micro_burst(sys_, s, cfg)
        fbar = np.array([approx_manifold(sys_, y) for y in burst.ys])
        d = burst.xs - fbar
        contraction = 1 - (cfg.dt_micro / eps) * lam
        for m in range(1, len(burst)):
            predicted = contraction * d[m - 1] - (fbar[m] - fbar[m - 1])
            scale = np.max(np.abs([burst.xs[m], burst.xs[m - 1], fbar[m], fbar[m - 1]]), axis=0)
            worst = max(worst, float(np.max(np.abs(d[m] - predicted) / np.spacing(scale))))
            steps += 1
    ok = worst <= 16
    report(10, ok, f"{steps} microsteps: max recursion residual = {worst:.1f} ulp <= 16")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
