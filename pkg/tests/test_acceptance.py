"""Acceptance suite: the shipped behavioral guarantees at stated tolerances.

One test per criterion; each prints a single [PASS]/[FAIL] line (visible
with ``pytest -s`` or on failure).  The five shipped presets are executed
once per module at their configured dt = 1e-3 (files included, timed), and
once more at dt = 5e-4 for the convergence-order comparison.
"""
import dataclasses
import time

import numpy as np
import pytest

from phcbf import (ClassK, audit, constraint_margin_mech, constraint_margin_split,
                   detect_limit_cycle, energy_bound_barrier, gradient_rel_error,
                   kinetic_energy, safety_filter, sample_states, solve_filter_qp,
                   to_ph, validate_mechanical, validate_structure)
from phcbf.mechanics import barrier_from_spec
from phcbf.scenarios import preset_config, run_scenario, scenario_trajectories

from conftest import (kinetic_energy_barrier, kinetic_energy_spec,
                      total_energy_barrier, total_energy_spec)

PRESETS = ("fig1-left", "fig1-right", "fig2-left", "fig2-right", "fig3")


def report(criterion: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
    assert ok, f"criterion {criterion}: {detail}"


@pytest.fixture(scope="module")
def shipped(tmp_path_factory):
    """All five presets run at their shipped settings, with wall times."""
    out = {}
    for name in PRESETS:
        cfg = preset_config(name)
        t0 = time.monotonic()
        res = run_scenario(cfg, out_dir=tmp_path_factory.mktemp(name.replace("-", "_")))
        out[name] = (res, time.monotonic() - t0)
    return out


@pytest.fixture(scope="module")
def halved_audits():
    """Audits of every preset re-simulated at dt = 5e-4 (no files)."""
    out = {}
    for name in PRESETS:
        cfg = preset_config(name)
        cfg = dataclasses.replace(cfg, sim=dataclasses.replace(cfg.sim, dt=5e-4))
        out[name] = {g: audit(tr) for g, tr in scenario_trajectories(cfg).items()}
    return out


def test_criterion_1_filter_qp_equivalence(ms_sys, mass_spring):
    """Closed-form u_safe matches the QP oracle on 1000 randomized cases."""
    rng = np.random.default_rng(101)
    t0 = time.monotonic()
    worst = 0.0
    for _ in range(1000):
        x = rng.uniform([-8.0, -8.0], [8.0, 8.0])
        gamma = float(rng.uniform(0.2, 5.0))
        kind = rng.integers(3)
        if kind == 0:
            bar = total_energy_barrier(mass_spring, "upper", float(rng.uniform(2, 20)), gamma)
        elif kind == 1:
            bar = total_energy_barrier(mass_spring, "lower", float(rng.uniform(2, 20)), gamma)
        else:
            bar = kinetic_energy_barrier(mass_spring, "upper", float(rng.uniform(5, 30)), gamma)
        u_cf = safety_filter(x, ms_sys, bar).u_safe
        u_qp = solve_filter_qp(x, ms_sys, bar, np.zeros(1))
        worst = max(worst, float(np.abs(u_cf - u_qp).max()))
    elapsed = time.monotonic() - t0
    ok = worst < 1e-9 and elapsed < 5.0
    report("1", ok, f"max |u_closed_form - u_qp| = {worst:.2e} (tol 1e-9), "
                    f"runtime {elapsed:.2f}s (< 5s)")


def test_criterion_2_energy_upper_bound(shipped):
    """H decays monotonically to c = 10 along the first-order law, faster
    for larger gamma; law error measured relative to the decaying envelope
    while it exceeds 1% of the initial gap."""
    result, elapsed = shipped["fig1-left"]
    gammas = sorted(result.trajectories)
    mono_worst = -np.inf
    law_worst = 0.0
    curves = {}
    for g in gammas:
        tr = result.trajectories[g]
        dH = np.diff(tr.H)
        above = tr.H[:-1] > 10.0 + 1e-9
        if above.any():
            mono_worst = max(mono_worst, float(dH[above].max()))
        envelope = 6.0 * np.exp(-g * tr.t)
        mask = envelope >= 0.06
        law_worst = max(law_worst, float((np.abs(tr.H - 10.0 - envelope) / envelope)[mask].max()))
        curves[g] = tr.H
    ordered = all(np.all(curves[hi] <= curves[lo] + 1e-8)
                  for lo, hi in zip(gammas, gammas[1:]))
    ok = mono_worst <= 1e-6 and law_worst < 0.01 and ordered and elapsed < 10.0
    report("2", ok, f"max upstep while H>10: {mono_worst:.2e} (tol 1e-6); "
                    f"max law error {law_worst:.2e} of envelope (tol 1e-2); "
                    f"gamma ordering {'ok' if ordered else 'BROKEN'}; "
                    f"runtime {elapsed:.1f}s (< 10s)")


def test_criterion_3_energy_lower_bound(shipped):
    """H rises monotonically to within 1% of c = 10 by t = 10/gamma and the
    steady state is a sustained oscillation inside [9.9, 10.1]."""
    result, _ = shipped["fig1-right"]
    ok = True
    details = []
    for g, tr in sorted(result.trajectories.items()):
        dH = np.diff(tr.H)
        below = tr.H[:-1] < 10.0 - 1e-9
        mono = float(dH[below].min()) if below.any() else 0.0
        tail = tr.t >= 10.0 / g
        band_lo, band_hi = float(tr.H[tail].min()), float(tr.H[tail].max())
        moving = float(np.nanmax(tr.Ke[tail]))
        g_ok = mono >= -1e-9 and band_lo >= 9.9 and band_hi <= 10.1 and moving > 1.0
        ok = ok and g_ok
        details.append(f"gamma={g:g}: min dH={mono:.1e}, tail H in "
                       f"[{band_lo:.3f},{band_hi:.3f}], max tail Ke={moving:.1f}")
    report("3", ok, "; ".join(details))


def test_criterion_4_kinetic_energy_bound(shipped):
    """Kinetic cap c = 20: forward invariance from inside, convergence and
    containment from outside, damping-only power, H never increases."""
    left, _ = shipped["fig2-left"]
    right, _ = shipped["fig2-right"]
    min_h_inside = min(float(tr.h.min()) for tr in left.trajectories.values())
    entry_ok = True
    min_h_after = np.inf
    for tr in right.trajectories.values():
        reached = np.argmax(tr.h >= 0.0) if (tr.h >= 0.0).any() else None
        if reached is None:
            entry_ok = False
        else:
            min_h_after = min(min_h_after, float(tr.h[reached:].min()))
    max_pinj = max(float(tr.p_inj.max())
                   for res in (left, right) for tr in res.trajectories.values())
    max_dH = max(float(np.diff(tr.H).max())
                 for res in (left, right) for tr in res.trajectories.values())
    ok = (min_h_inside >= -1e-6 and entry_ok and min_h_after >= -1e-6
          and max_pinj <= 1e-12 and max_dH <= 1e-9)
    report("4", ok, f"min h from inside {min_h_inside:.2e} (>= -1e-6); outside start "
                    f"reaches C and keeps h >= {min_h_after:.2e}; max p_inj "
                    f"{max_pinj:.2e} (<= 1e-12); max dH {max_dH:.2e} (<= 1e-9)")


def test_criterion_5_double_pendulum_limit_cycle(shipped):
    """Energy oscillator: silent filter and pure dissipation before t_on,
    containment in [c-1, c+1] after, a detected limit cycle, and injected
    power balancing dissipation over the final window."""
    result, elapsed = shipped["fig3"]
    (g, tr), = result.trajectories.items()
    c = -40.0
    pre_pairs = tr.t[1:] < 10.0
    pre = tr.t < 10.0
    silent = bool(np.all(tr.u[pre] == 0.0))
    dissipating = float(np.diff(tr.H)[pre_pairs].max()) <= 1e-12
    post = tr.t >= 10.0
    in_band = np.abs(tr.H - c) <= 1.0
    entered = int(np.argmax(post & in_band))
    stays = bool(np.all(in_band[entered:])) if (post & in_band).any() else False
    t_enter = float(tr.t[entered])
    lc = detect_limit_cycle(tr, window=10.0, band=1.0)
    tail = tr.t >= tr.t[-1] - 10.0
    inj, diss = float(tr.p_inj[tail].mean()), float(tr.p_diss[tail].mean())
    balance = abs(inj - diss) / diss
    ok = (silent and dissipating and stays and lc.found and balance <= 0.05
          and elapsed < 60.0)
    report("5", ok, f"pre-activation silent={silent}, dissipating={dissipating}; "
                    f"H enters [{c - 1},{c + 1}] at t={t_enter:.2f}s and stays={stays}; "
                    f"limit cycle found={lc.found} period~{lc.period:.2f}s; "
                    f"<p_inj>={inj:.4f} vs <p_diss>={diss:.4f} W ({100 * balance:.2f}%, "
                    f"tol 5%); runtime {elapsed:.1f}s (< 60s)")


def test_criterion_6_margin_identity(mass_spring, double_pendulum):
    """The bracket route and the rate-decomposition route to the constraint
    margin agree to 1e-10 on 1000 random states, both plants, both signs."""
    rng = np.random.default_rng(106)
    worst = 0.0
    for ms, label in ((mass_spring, "mass-spring"), (double_pendulum, "pendulum")):
        for sign in (+1, -1):
            bound = "lower" if sign > 0 else "upper"
            spec = total_energy_spec(ms, bound, float(rng.uniform(-40, 15)),
                                     float(rng.uniform(0.3, 4.0)))
            for _ in range(1000):
                q = rng.uniform(-2.5, 2.5, size=ms.dof)
                p = rng.uniform(-6.0, 6.0, size=ms.dof)
                a = constraint_margin_mech(q, p, ms, spec)
                b = constraint_margin_split(q, p, ms, spec)
                worst = max(worst, abs(a - b))
    ok = worst < 1e-10
    report("6", ok, f"max |bracket route - rate route| = {worst:.2e} (tol 1e-10)")


def test_criterion_7_power_balance_order(shipped, halved_audits):
    """Balance residual scales at second order between dt = 1e-3 and 5e-4
    (ratio >= 3 unless already at the noise floor) and the refined residual
    stays below 1e-4 W at dt = 1e-3.  The refined 5-point figure is used
    for the absolute bound because the 3-point stencil's own truncation
    floor (|H'''| dt^2/6, about 1.25e-4 W for gamma = 5) exceeds it even
    for exact integration; both numbers are printed."""
    ok = True
    details = []
    for name in PRESETS:
        result, _ = shipped[name]
        coarse2 = max(rep.max_balance_residual for rep in result.audits.values())
        coarse4 = max(rep.max_balance_residual_refined for rep in result.audits.values())
        fine2 = max(rep.max_balance_residual for rep in halved_audits[name].values())
        ratio = coarse2 / max(fine2, 1e-300)
        ratio_ok = coarse2 <= 1e-8 or ratio >= 3.0
        abs_ok = coarse4 < 1e-4
        ok = ok and ratio_ok and abs_ok
        details.append(f"{name}: resid2 {coarse2:.2e}->{fine2:.2e} (ratio {ratio:.1f}), "
                       f"resid4 {coarse4:.2e}")
    report("7", ok, "; ".join(details))


def test_criterion_8_structure_and_gradients(mass_spring, double_pendulum):
    """Structural invariants and every analytic derivative against central
    finite differences, on at least 100 random states per plant."""
    ms_sys = to_ph(mass_spring)
    dp_sys = to_ph(double_pendulum)
    rep_s1 = validate_structure(ms_sys, sample_states(2, 100, (-6, 6), seed=108))
    rep_s2 = validate_structure(dp_sys, sample_states(4, 100, (-2.5, 2.5), seed=109))
    rep_m1 = validate_mechanical(mass_spring, sample_states(1, 100, (-5, 5), seed=110))
    rep_m2 = validate_mechanical(double_pendulum, sample_states(2, 100, (-3, 3), seed=111))
    barrier_err = 0.0
    for sys_, ms, n in ((ms_sys, mass_spring, 2), (dp_sys, double_pendulum, 4)):
        bars = [total_energy_barrier(ms, "upper", 10.0, 1.0),
                total_energy_barrier(ms, "lower", -40.0, 2.0),
                kinetic_energy_barrier(ms, "upper", 20.0, 1.0)]
        for x in sample_states(n, 100, (-2.5, 2.5), seed=112):
            for bar in bars:
                barrier_err = max(barrier_err, gradient_rel_error(bar.h, bar.gradh, x))
    ok = all(r.passed for r in (rep_s1, rep_s2, rep_m1, rep_m2)) and barrier_err < 1e-5
    report("8", ok, f"structure reports pass; max gradH err "
                    f"{max(rep_s1.max_grad_error, rep_s2.max_grad_error):.2e}, "
                    f"max dM/dV err {max(rep_m2.max_dmass_error, rep_m2.max_potential_grad_error):.2e}, "
                    f"max grad h err {barrier_err:.2e} (all < 1e-5)")


def test_criterion_9_worked_hand_values(ms_sys, mass_spring):
    """Frozen hand-derived filter triples (u, P, psi), exact to 1e-12."""
    checks = []

    r = safety_filter(np.array([0.0, 8.0]), ms_sys,
                      energy_bound_barrier(ms_sys, -1, 10.0, ClassK(1.0)))
    checks.append(abs(r.u_safe[0] + 1.5) < 1e-12 and abs(r.p_inj + 6.0) < 1e-12
                  and abs(r.psi + 6.0) < 1e-12)

    r = safety_filter(np.array([0.0, 2.0]), ms_sys,
                      energy_bound_barrier(ms_sys, +1, 10.0, ClassK(1.0)))
    checks.append(abs(r.u_safe[0] - 9.0) < 1e-12 and abs(r.p_inj - 9.0) < 1e-12
                  and abs(r.psi + 9.0) < 1e-12)

    kin = kinetic_energy_barrier(mass_spring, "upper", 20.0, 1.0)
    r = safety_filter(np.array([3.0, 10.0]), ms_sys, kin)
    checks.append((not r.active) and abs(r.psi - 2.5) < 1e-12)

    r = safety_filter(np.array([-3.0, 10.0]), ms_sys, kin)
    checks.append(abs(r.u_safe[0] + 2.5) < 1e-12 and abs(r.p_inj + 12.5) < 1e-12
                  and abs(r.psi + 12.5) < 1e-12)

    ok = all(checks)
    report("9", ok, f"worked triples (-1.5,-6,-6), (9,9,-9), inactive psi=2.5, "
                    f"(-2.5,-12.5,-12.5): {checks}")
