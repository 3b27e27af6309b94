"""Closed-loop integration of a plant under the prescribed-time controller.

The loop runs classical fixed-stage RK4 from t = 0 to t = tau*(1 - eps)
with a step that shrinks geometrically near the deadline. Three caps act
on every step:

    h = min(dt_base, (tau - t)/shrink_divisor,
            stiffness_safety * alpha * (tau - t), t_end - t)

The first two follow the gain growth of the controller; the third keeps
RK4 inside its stability region, because the closed-loop poles scale like
-1/(alpha*(tau - t)) and for small alpha the plain (tau - t)/shrink cap
leaves h*|pole| far above the RK4 stability limit. The disturbance
envelope declared by the plant is audited at every step start.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np
from numpy.typing import NDArray

from .controller import ControllerDesign, build_gain_schedule, design_controller
from .errors import DivergenceError
from .plant import PlantSpec, check_assumption

__all__ = ["SimConfig", "SimTrace", "run", "sweep"]

FloatArray = NDArray[np.float64]


def _readonly(a: np.ndarray) -> FloatArray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SimConfig:
    """Integration settings for one run.

    ``divergence_threshold`` bounds any recorded |x_i| or |u|; crossing it
    aborts with the partial trace. Near-singularity gains are enormous by
    design (the input scales like (tau - t)**-n), so the default admits
    the large but finite transients of healthy runs and still catches
    genuine blow-up.
    """

    x0: tuple[float, ...]
    dt_base: float = 0.01
    epsilon_fraction: float = 1e-3
    shrink_divisor: float = 50.0
    stiffness_safety: float = 1.0
    record_stride: int = 1
    divergence_threshold: float = 1e18

    def __post_init__(self) -> None:
        if len(self.x0) < 1:
            raise ValueError("x0 must be non-empty")
        if self.dt_base <= 0:
            raise ValueError(f"dt_base must be positive, got {self.dt_base}")
        if not 0.0 < self.epsilon_fraction < 1.0:
            raise ValueError(
                f"epsilon_fraction must lie in (0, 1), got {self.epsilon_fraction}"
            )
        if self.shrink_divisor <= 0:
            raise ValueError(
                f"shrink_divisor must be positive, got {self.shrink_divisor}"
            )
        if self.stiffness_safety <= 0:
            raise ValueError(
                f"stiffness_safety must be positive, got {self.stiffness_safety}"
            )
        if self.record_stride < 1:
            raise ValueError(
                f"record_stride must be >= 1, got {self.record_stride}"
            )
        if self.divergence_threshold <= 0:
            raise ValueError(
                f"divergence_threshold must be positive, got "
                f"{self.divergence_threshold}"
            )


@dataclass(frozen=True)
class SimTrace:
    """Recorded samples of one closed-loop run.

    ``norms`` and ``lambda_values`` are the certification inputs
    ``||x(t_k)||`` and ``max(1 - t_k/tau, 0)`` per recorded sample.
    ``metadata`` freezes the design, plant, and config fingerprints the
    analysis and CLI layers need; it never contains wall-clock times.
    """

    times: FloatArray
    states: FloatArray
    inputs: FloatArray
    norms: FloatArray
    lambda_values: FloatArray
    metadata: Mapping[str, object]

    def __post_init__(self) -> None:
        m = self.times.shape[0]
        if self.states.shape[0] != m or self.inputs.shape[0] != m:
            raise ValueError("trace arrays must have equal length")
        if self.norms.shape[0] != m or self.lambda_values.shape[0] != m:
            raise ValueError("trace arrays must have equal length")
        if m == 0:
            raise ValueError("trace must contain at least one sample")
        if m > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("trace times must be strictly increasing")
        if not np.all(np.isfinite(self.inputs)):
            raise ValueError("recorded inputs must be finite")


def _build_trace(
    times: list[float],
    states: list[tuple[float, ...]],
    inputs: list[float],
    tau: float,
    metadata: dict[str, object],
) -> SimTrace:
    t_arr = np.asarray(times, dtype=np.float64)
    x_arr = np.asarray(states, dtype=np.float64)
    u_arr = np.asarray(inputs, dtype=np.float64)
    norms = np.sqrt(np.sum(x_arr * x_arr, axis=1))
    lam = np.maximum(1.0 - t_arr / tau, 0.0)
    return SimTrace(
        times=_readonly(t_arr),
        states=_readonly(x_arr),
        inputs=_readonly(u_arr),
        norms=_readonly(norms),
        lambda_values=_readonly(lam),
        metadata=MappingProxyType(metadata),
    )


def run(plant: PlantSpec, design: ControllerDesign, cfg: SimConfig) -> SimTrace:
    """Integrate the closed loop and return the recorded trace.

    Raises
    ------
    DivergenceError
        If any state component or the input leaves the finite box
        ``|v| <= divergence_threshold``; the partial trace recorded so far
        is attached to the exception.
    AssumptionViolationError
        If the plant's declared disturbance envelope fails along the
        trajectory.
    ValueError
        On dimension mismatches or a design whose guard band extends past
        the halt time ``tau * (1 - epsilon_fraction)``.
    """
    n = plant.n
    if design.n != n:
        raise ValueError(f"plant order {n} != design order {design.n}")
    if len(cfg.x0) != n:
        raise ValueError(f"x0 has length {len(cfg.x0)}, expected {n}")
    tau = design.tau
    t_end = tau * (1.0 - cfg.epsilon_fraction)
    if design.eps_guard > cfg.epsilon_fraction * tau * (1.0 + 1e-9):
        raise ValueError(
            "design guard band is wider than the simulation's terminal gap; "
            f"eps_guard={design.eps_guard}, halt gap={cfg.epsilon_fraction * tau}"
        )

    schedule = build_gain_schedule(design)
    q = list(schedule.coefficients)
    gamma_min = design.gamma_min
    gamma = plant.gamma
    g = plant.g
    f = plant.f
    threshold = cfg.divergence_threshold
    stride = cfg.record_stride

    def stage(x: list[float], t: float) -> tuple[list[float], float, float]:
        d = tau - t
        acc = 0.0
        pw = d
        for i in range(n - 1, -1, -1):
            acc += q[i] * x[i] / pw
            pw *= d
        gt = g(t)
        u = acc / (gamma_min * gt)
        fx = f(x, u, t)
        return x[1:] + [fx + gamma * gt * u], u, fx

    times: list[float] = []
    states: list[tuple[float, ...]] = []
    inputs: list[float] = []
    metadata: dict[str, object] = {
        "plant": plant.describe(),
        "plant_seed": plant.seed,
        "phi": plant.phi,
        "phi0": plant.phi0,
        "gamma_min": gamma_min,
        "c": design.c,
        "alpha": design.alpha,
        "tau": tau,
        "mode": design.mode,
        "eps_guard": design.eps_guard,
        "x0": tuple(float(v) for v in cfg.x0),
        "x0_norm": math.sqrt(math.fsum(float(v) ** 2 for v in cfg.x0)),
        "dt_base": cfg.dt_base,
        "epsilon_fraction": cfg.epsilon_fraction,
        "shrink_divisor": cfg.shrink_divisor,
        "stiffness_safety": cfg.stiffness_safety,
        "record_stride": stride,
        "divergence_threshold": threshold,
    }

    def partial() -> SimTrace | None:
        if not times:
            return None
        return _build_trace(times, states, inputs, tau, metadata)

    x = [float(v) for v in cfg.x0]
    t = 0.0
    step_index = 0
    u_max = 0.0
    x_max = 0.0
    stiff_cap = cfg.stiffness_safety * design.alpha

    while t < t_end - 1e-12 * tau:
        k1, u1, f1 = stage(x, t)
        amp = max(abs(v) for v in x)
        # "not <=" also catches NaN, which fails every comparison.
        if not (amp <= threshold) or not (abs(u1) <= threshold):
            raise DivergenceError(
                f"state or input left |v| <= {threshold:.3g} at t={t:.6g} "
                f"(|x|max={amp:.3g}, |u|={abs(u1):.3g})",
                trace=partial(),
            )
        check_assumption(plant, x, u1, t, f_value=f1)
        if amp > x_max:
            x_max = amp
        if abs(u1) > u_max:
            u_max = abs(u1)
        if step_index % stride == 0:
            times.append(t)
            states.append(tuple(x))
            inputs.append(u1)

        d = tau - t
        h = min(cfg.dt_base, d / cfg.shrink_divisor, stiff_cap * d)
        clamped = h >= t_end - t
        if clamped:
            h = t_end - t
        half = 0.5 * h
        k2, _, _ = stage([xi + half * ki for xi, ki in zip(x, k1)], t + half)
        k3, _, _ = stage([xi + half * ki for xi, ki in zip(x, k2)], t + half)
        k4, _, _ = stage([xi + h * ki for xi, ki in zip(x, k3)], t + h)
        sixth = h / 6.0
        x = [
            xi + sixth * (a + 2.0 * (b + c) + e)
            for xi, a, b, c, e in zip(x, k1, k2, k3, k4)
        ]
        t = t_end if clamped else t + h
        step_index += 1

    _, u_final, f_final = stage(x, t_end)
    amp = max(abs(v) for v in x)
    if not (amp <= threshold) or not (abs(u_final) <= threshold):
        raise DivergenceError(
            f"state or input left |v| <= {threshold:.3g} at t={t_end:.6g} "
            f"(|x|max={amp:.3g}, |u|={abs(u_final):.3g})",
            trace=partial(),
        )
    check_assumption(plant, x, u_final, t_end, f_value=f_final)
    if amp > x_max:
        x_max = amp
    if abs(u_final) > u_max:
        u_max = abs(u_final)
    times.append(t_end)
    states.append(tuple(x))
    inputs.append(u_final)

    metadata["steps_total"] = step_index
    metadata["u_max"] = u_max
    metadata["x_max"] = x_max
    return _build_trace(times, states, inputs, tau, metadata)


def _sweep_workers() -> int:
    raw = os.environ.get("PTC_LAB_THREADS", "")
    if raw.strip() == "":
        return 1
    workers = int(raw)
    if workers < 1:
        raise ValueError(f"PTC_LAB_THREADS must be >= 1, got {raw!r}")
    return workers


def sweep(
    plant: PlantSpec,
    c: Sequence[float],
    taus: Sequence[float],
    cfg: SimConfig,
    *,
    alpha: float | None = None,
) -> list[SimTrace]:
    """Run one simulation per deadline with a shared design template.

    Every run uses the same coefficients, initial state, and plant
    (including its frozen random draws); only ``tau`` varies. Runs are
    independent, so when the ``PTC_LAB_THREADS`` environment variable is
    set above 1 they execute in a thread pool; results keep the input
    order either way.
    """
    deadlines = [float(v) for v in taus]
    if not deadlines:
        return []
    designs = [
        design_controller(
            c,
            tau,
            alpha=alpha,
            phi=plant.phi,
            phi0=plant.phi0,
            gamma_min=plant.gamma_min,
            eps_guard_fraction=cfg.epsilon_fraction,
        )
        for tau in deadlines
    ]
    workers = _sweep_workers()
    if workers == 1 or len(designs) == 1:
        return [run(plant, d, cfg) for d in designs]
    with ThreadPoolExecutor(max_workers=min(workers, len(designs))) as pool:
        return list(pool.map(lambda d: run(plant, d, cfg), designs))
