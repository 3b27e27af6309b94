import math

import numpy as np
import pytest

import ptc_lab as pl
from ptc_lab.controller import GainRow, GainTerm

# Frozen gain scalars for the fourth-order example design (auto-selected
# alpha at tau = 10); derived once from the exact rational structure.
Q_EX3 = (
    -1.2523331898053923e19,
    -842052090620114.8,
    -21232278127.82094,
    -237946.33123640344,
)
ALPHA_EX3 = 1.681008956380443e-05
U0_EX2 = -310.8176259935366
BOUND_EX2 = 0.021446609406726245


def test_fourth_order_gain_structure_exact():
    # The per-state integer structure behind the standard 4th-order gain
    # table, compared with zero tolerance.
    rows = pl.structural_rows(4)
    assert rows[0] == GainRow(
        state=1, power=4, c_terms=(GainTerm(1, 1, 4),), constant=0
    )
    assert rows[1] == GainRow(
        state=2,
        power=3,
        c_terms=(GainTerm(2, 1, 3), GainTerm(3, -1, 2), GainTerm(4, 1, 1)),
        constant=1,
    )
    assert rows[2] == GainRow(
        state=3,
        power=2,
        c_terms=(GainTerm(3, 1, 2), GainTerm(4, -3, 1)),
        constant=-7,
    )
    assert rows[3] == GainRow(
        state=4, power=1, c_terms=(GainTerm(4, 1, 1),), constant=6
    )


def test_symbolic_rows_exact_strings():
    assert pl.symbolic_rows(4) == (
        "p1 = c1/(alpha^4*(tau - t)^4)",
        "p2 = (c2/alpha^3 - c3/alpha^2 + c4/alpha + 1)/(tau - t)^3",
        "p3 = (c3/alpha^2 - 3*c4/alpha - 7)/(tau - t)^2",
        "p4 = (c4/alpha + 6)/(tau - t)",
    )
    assert pl.symbolic_rows(1) == ("p1 = c1/(alpha*(tau - t))",)
    assert pl.symbolic_rows(2) == (
        "p1 = c1/(alpha^2*(tau - t)^2)",
        "p2 = (c2/alpha + 1)/(tau - t)",
    )


def test_numeric_gains_example3_frozen():
    rows = pl.numeric_rows((-1.0, -4.0, -6.0, -4.0), ALPHA_EX3)
    assert tuple(p for _, p in rows) == (4, 3, 2, 1)
    for (q, _), expected in zip(rows, Q_EX3):
        assert q == pytest.approx(expected, rel=1e-12)


def test_schedule_matches_double_sum():
    # 50 random draws per order; the collapsed per-state form and the
    # literal double sum must agree to near machine precision.
    rng = np.random.Generator(np.random.PCG64(11))
    for n in range(1, 7):
        rows = pl.structural_rows(n)
        for _ in range(50):
            c = tuple(rng.uniform(-3.0, 3.0, n))
            alpha = float(rng.uniform(0.01, 0.5))
            tau = float(rng.uniform(1.0, 20.0))
            t = float(rng.uniform(0.0, 0.9 * tau))
            x = rng.normal(size=n)
            coeffs = tuple(q for q, _ in pl.numeric_rows(c, alpha))
            schedule = pl.GainSchedule(n=n, rows=rows, coefficients=coeffs)
            via_schedule = schedule.evaluate(x, t, tau)
            direct = pl.pi_double_sum(c, alpha, tau, x, t)
            assert abs(via_schedule - direct) <= 1e-12 * (1.0 + abs(direct))


def test_control_input_example2_frozen():
    design = pl.design_controller(
        (-1.0, -2.0), 10.0, alpha=0.0214, phi=math.e, phi0=50.0
    )
    schedule = pl.build_gain_schedule(design)
    u0 = pl.control_input(design, schedule, (10.0, 10.0), 0.0, 1.0)
    assert u0 == pytest.approx(U0_EX2, rel=1e-13)
    direct = pl.pi_double_sum(design.c, design.alpha, 10.0, (10.0, 10.0), 0.0)
    assert u0 == pytest.approx(direct / (design.gamma_min * 1.0), rel=1e-12)


def test_control_input_linearity_and_zero():
    design = pl.design_controller((-1.0, -2.0), 10.0, alpha=0.02, phi0=1.0)
    schedule = pl.build_gain_schedule(design)
    assert pl.control_input(design, schedule, (0.0, 0.0), 3.0, 1.0) == 0.0
    u1 = pl.control_input(design, schedule, (2.0, -1.0), 3.0, 1.0)
    u2 = pl.control_input(design, schedule, (4.0, -2.0), 3.0, 1.0)
    assert u2 == pytest.approx(2.0 * u1, rel=1e-12)


def test_control_input_guard_band():
    design = pl.design_controller((-1.0, -2.0), 10.0, alpha=0.02, phi0=1.0)
    schedule = pl.build_gain_schedule(design)
    # eps_guard = 1e-3*tau = 0.01; the band edge itself is evaluable.
    edge = 10.0 - design.eps_guard
    assert math.isfinite(pl.control_input(design, schedule, (1.0, 1.0), edge, 1.0))
    with pytest.raises(pl.SingularityError):
        pl.control_input(design, schedule, (1.0, 1.0), 10.0 - 0.5 * design.eps_guard, 1.0)
    with pytest.raises(pl.SingularityError):
        pl.control_input(design, schedule, (1.0, 1.0), 11.0, 1.0)


def test_control_input_zero_gain_rejected():
    design = pl.design_controller((-1.0, -2.0), 10.0, alpha=0.02, phi0=1.0)
    schedule = pl.build_gain_schedule(design)
    with pytest.raises(pl.AssumptionViolationError):
        pl.control_input(design, schedule, (1.0, 1.0), 0.0, 0.0)


def test_gain_times_power_is_constant_in_time():
    # p_i(t) * (tau - t)^(n-i+1) must not depend on t: evaluate the full
    # controller on unit vectors at several times.
    design = pl.design_controller((-1.0, -4.0, -6.0, -4.0), 10.0, phi=1e-3)
    schedule = pl.build_gain_schedule(design)
    n, tau = design.n, design.tau
    for i in range(n):
        unit = [0.0] * n
        unit[i] = 1.0
        values = []
        for t in (0.0, 2.5, 5.0, 9.0):
            pi_val = schedule.evaluate(unit, t, tau)
            values.append(pi_val * (tau - t) ** (n - i))
        for v in values[1:]:
            assert v == pytest.approx(values[0], rel=1e-12)
        assert values[0] == pytest.approx(schedule.coefficients[i], rel=1e-12)


def test_initial_input_magnitude_decreases_with_deadline():
    # For x0 = (1, 0, ..., 0) the initial input scales like 1/tau^n, so a
    # longer deadline always starts gentler at fixed alpha.
    for n, c in [(2, (-1.0, -2.0)), (3, (-1.0, -3.0, -3.0)), (4, (-1.0, -4.0, -6.0, -4.0))]:
        coeffs = tuple(q for q, _ in pl.numeric_rows(c, 0.01))
        rows = pl.structural_rows(n)
        schedule = pl.GainSchedule(n=n, rows=rows, coefficients=coeffs)
        x0 = [1.0] + [0.0] * (n - 1)
        magnitudes = [abs(schedule.evaluate(x0, 0.0, tau)) for tau in (5.0, 10.0, 15.0, 20.0)]
        assert all(a > b for a, b in zip(magnitudes, magnitudes[1:]))


def test_select_alpha_example2():
    lyap = pl.solve_lyapunov((-1.0, -2.0))
    sel = pl.select_alpha(lyap, 2, 10.0, phi=math.e, phi0=50.0)
    assert sel.mode == "attractive"
    assert sel.bound_stable is None
    assert sel.bound_attractive == pytest.approx(BOUND_EX2, rel=1e-15)
    # The closed form of the bound for this P is (3 - 2*sqrt(2))/8.
    assert sel.bound_attractive == pytest.approx((3.0 - 2.0 * math.sqrt(2.0)) / 8.0, rel=1e-14)
    assert sel.alpha < sel.bound_attractive
    assert sel.alpha == pytest.approx(sel.bound_attractive, rel=1e-8)


def test_select_alpha_example3():
    lyap = pl.solve_lyapunov((-1.0, -4.0, -6.0, -4.0))
    sel = pl.select_alpha(lyap, 4, 10.0, phi=1e-3, phi0=0.0)
    assert sel.mode == "stable"
    assert sel.alpha == pytest.approx(ALPHA_EX3, rel=1e-12)
    assert sel.bound_stable is not None
    assert sel.alpha <= sel.bound_stable
    assert sel.alpha < sel.bound_attractive


def test_select_alpha_always_below_one_over_tau():
    lyap = pl.solve_lyapunov((-0.5,))
    # For c = (-0.5): P = 2, formula bound = 2/(4 + 4) = 0.25.
    sel_short = pl.select_alpha(lyap, 1, 2.0, phi0=1.0)
    assert sel_short.bound_attractive == pytest.approx(0.25)
    sel_long = pl.select_alpha(lyap, 1, 40.0, phi0=1.0)
    assert sel_long.bound_attractive == pytest.approx(1.0 / 40.0)
    for sel, tau in ((sel_short, 2.0), (sel_long, 40.0)):
        assert sel.alpha < sel.bound_attractive
        assert sel.alpha < 1.0 / tau


def test_first_order_bound_is_one_half():
    lyap = pl.solve_lyapunov((-1.0,))
    sel = pl.select_alpha(lyap, 1, 1.0, phi0=1.0)
    assert sel.bound_attractive == pytest.approx(0.5, rel=1e-15)


def test_explicit_alpha_validation():
    with pytest.raises(pl.InfeasibleDesignError):
        pl.design_controller((-1.0, -2.0), 10.0, alpha=0.05, phi0=50.0)
    with pytest.raises(pl.InfeasibleDesignError):
        pl.design_controller((-1.0, -2.0), 10.0, alpha=-0.01, phi0=50.0)
    design = pl.design_controller((-1.0, -2.0), 10.0, alpha=0.0214, phi0=50.0)
    assert design.mode == "attractive"


def test_explicit_alpha_stable_mode_classification():
    # With phi0 = 0 an explicit alpha at or below the stability bound
    # lands in stable mode; one above it only certifies attractivity.
    # A nonzero state-dependent disturbance gain pushes the stability
    # bound well below the attractivity bound, so both branches exist.
    lyap = pl.solve_lyapunov((-1.0, -2.0))
    sel = pl.select_alpha(lyap, 2, 10.0, phi=math.e, phi0=0.0)
    assert sel.bound_stable < sel.bound_attractive
    below = pl.design_controller(
        (-1.0, -2.0), 10.0, alpha=sel.bound_stable * 0.9, phi=math.e
    )
    assert below.mode == "stable"
    above = pl.design_controller(
        (-1.0, -2.0),
        10.0,
        alpha=(sel.bound_stable + sel.bound_attractive) / 2.0,
        phi=math.e,
    )
    assert above.mode == "attractive"


def test_design_controller_validation():
    with pytest.raises(ValueError):
        pl.design_controller((-1.0,), -1.0)
    with pytest.raises(ValueError):
        pl.design_controller((-1.0,), 10.0, eps_guard_fraction=2.0)
    with pytest.raises(pl.InfeasibleDesignError):
        pl.design_controller((1.0, 1.0), 10.0)


def test_schedule_pairs_shape():
    design = pl.design_controller((-1.0, -2.0), 10.0, alpha=0.02, phi0=1.0)
    schedule = pl.build_gain_schedule(design)
    pairs = schedule.pairs()
    assert len(pairs) == 2
    assert pairs[0] == ((schedule.coefficients[0], 2),)
    assert pairs[1] == ((schedule.coefficients[1], 1),)
