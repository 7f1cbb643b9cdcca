"""Self-contained verification suites run by the `verify` CLI subcommand.

Every suite checks an implementation path against an independent oracle:
exhaustive option enumeration with inline formulas for the insertion search,
a fixed-grid trapezoid cumulative sum for the upload-delay integral, central
finite differences for backprop, a full schedule recompute for queue deltas,
pooled-count moments for the arrival process, and an invariant-checking soak
of the event engine. Oracles deliberately re-derive all formulas rather than
calling the code under test.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .channel import ChannelParams, transmission_delay
from .mobility import Plane, advance
from .model import CostParams, RobotState, Task
from .queueing import InService, QueueEntry, ServerQueue
from .scheduler import DecisionKind, Env, greedy_decide
from .sim import SimConfig, generate_arrivals, run
from .metrics import build_policy
from .drl.network import AdamState, Network, adam_step, backward, init_network


@dataclass
class SuiteResult:
    name: str
    passed: bool
    tolerance: str
    measured: str
    detail: str
    seconds: float


# ---------------------------------------------------------------------------
# Random decision instances shared by the scheduler and queue suites
# ---------------------------------------------------------------------------


def _random_queue_state(
    rng: np.random.Generator, now: float, m: int = 10, max_len: Optional[int] = None
) -> ServerQueue:
    top = m if max_len is None else max_len
    length = int(rng.integers(0, top + 1))
    waiting = []
    for i in range(length):
        t_com = float(rng.uniform(0.05, 0.2))
        arrival = now + float(rng.uniform(-1.0, 0.5))
        task = Task(
            id=10_000 + i,
            robot_id=int(rng.integers(0, 10)),
            n=float(rng.uniform(1e5, 3e5)),
            d=float(rng.uniform(0.5, 2.0)),
            t_gen=max(0.0, arrival - 0.1),
        )
        waiting.append(
            QueueEntry(task=task, arrival_complete_at=arrival, t_com=t_com, enqueued_at=task.t_gen)
        )
    in_service = None
    if rng.random() < 0.85:
        t_com = float(rng.uniform(0.05, 0.2))
        if rng.random() < 0.8:  # partway through service
            started = now - float(rng.uniform(0.0, t_com * 0.95))
        else:  # committed but still waiting for the upload
            started = now + float(rng.uniform(0.0, 0.3))
        task = Task(id=9_999, robot_id=0, n=2e5, d=1.0, t_gen=max(0.0, started - 0.2))
        entry = QueueEntry(
            task=task, arrival_complete_at=started, t_com=t_com, enqueued_at=task.t_gen
        )
        in_service = InService(entry=entry, started_at=started)
    return ServerQueue(capacity_M=m, in_service=in_service, waiting=tuple(waiting))


def _oracle_replay(
    waiting: Sequence[QueueEntry], free0: float
) -> List[Tuple[float, float]]:
    out = []
    free = free0
    for e in waiting:
        start = max(free, e.arrival_complete_at)
        free = start + e.t_com
        out.append((start, free))
    return out


def _oracle_free0(q: ServerQueue, now: float) -> float:
    if q.in_service is None:
        return now
    return max(now, q.in_service.started_at + q.in_service.entry.t_com)


def _oracle_enumerate(
    q: ServerQueue, task: Task, t_tra: float, p: CostParams
) -> Tuple[str, Optional[int], float]:
    """Best of the L+2 options by explicit per-option recomputation."""
    t_loc = task.n * p.c / p.f_loc
    e_loc = p.gamma * task.n * p.c * p.f_loc**2
    best_kind, best_pos = "local", None
    best_value = p.alpha * e_loc + p.beta * (t_loc - task.d) / task.d
    if len(q.waiting) >= q.capacity_M:
        return best_kind, best_pos, best_value
    now = task.t_gen
    t_com = task.n * p.c / p.f_edg
    cand = QueueEntry(
        task=task, arrival_complete_at=now + t_tra, t_com=t_com, enqueued_at=now
    )
    free0 = _oracle_free0(q, now)
    before = _oracle_replay(q.waiting, free0)
    for pos in range(1, len(q.waiting) + 2):
        hyp = list(q.waiting)
        hyp.insert(pos - 1, cand)
        after = _oracle_replay(hyp, free0)
        # ready time at pos: server-free instant after the pos-1 prefix
        t_rea = (before[pos - 2][1] if pos > 1 else free0) - now
        wait = max(t_rea, t_tra)
        T_i = wait + t_com
        E_i = t_tra * p.p_tra + (wait - t_tra) * p.p_idl
        l_s = 0.0
        del after[pos - 1]
        for entry, old, new in zip(q.waiting, before, after):
            l_s += (new[1] - old[1]) / entry.task.d
        value = p.alpha * E_i + p.beta * ((T_i - task.d) / task.d + l_s)
        if value < best_value:
            best_kind, best_pos, best_value = "insert", pos, value
    return best_kind, best_pos, best_value


def suite_scheduler_enumeration(
    instances: int = 1000, seed: int = 42, cost: Optional[CostParams] = None
) -> SuiteResult:
    """greedy_decide must equal explicit enumeration of all L+2 options."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    plane = Plane(edge=30.0)
    env = Env(plane=plane, channel=ChannelParams(), cost=cost or CostParams())
    mismatches = 0
    for k in range(instances):
        now = float(rng.uniform(5.0, 100.0))
        q = _random_queue_state(rng, now)
        task = Task(
            id=k,
            robot_id=0,
            n=float(rng.uniform(1.2e5, 3e5)),
            d=float(rng.uniform(0.5, 2.0)),
            t_gen=now,
        )
        # stationary robot: the uplink rate is constant and the closed-form
        # upload time below is exact, keeping the oracle self-contained
        robot = RobotState(
            robot_id=0,
            l=(float(rng.uniform(0.0, 30.0)), float(rng.uniform(0.0, 30.0))),
            v=(1.0, 0.0),
            speed=0.0,
        )
        dist = math.hypot(robot.l[0] - 15.0, robot.l[1] - 15.0)
        gain = env.channel.gain_ref_g0 / max(dist, env.channel.min_distance) ** 2
        rate = env.channel.bandwidth_B * math.log2(
            1.0 + env.cost.p_tra * gain / env.channel.noise_power_sigma2
        )
        t_tra = task.n / rate
        decision = greedy_decide(q, task, robot, env)
        kind, pos, _ = _oracle_enumerate(q, task, t_tra, env.cost)
        got = (
            "insert" if decision.kind is DecisionKind.INSERT else "local",
            decision.position,
        )
        if q.is_full and decision.kind is not DecisionKind.REJECT:
            mismatches += 1
        elif not q.is_full and got != (kind, pos):
            mismatches += 1
    dt = time.perf_counter() - t0
    return SuiteResult(
        name="scheduler_enumeration",
        passed=mismatches == 0,
        tolerance="exact match",
        measured=f"{mismatches} mismatches",
        detail=f"{instances} random decision instances",
        seconds=dt,
    )


# ---------------------------------------------------------------------------
# Upload-delay integral vs fixed-grid trapezoid oracle
# ---------------------------------------------------------------------------


def trapezoid_delay_oracle(
    task_n: float,
    robot: RobotState,
    plane: Plane,
    p_tra: float,
    cp: ChannelParams,
    dt: float = 1e-5,
) -> float:
    """Cumulative-sum solve of the bit balance on a uniform grid."""
    sx, sy = plane.server_pos

    def rate_at(t: float) -> float:
        x, y = advance(robot, t, plane).l
        dist = max(math.hypot(x - sx, y - sy), cp.min_distance)
        snr = p_tra * cp.gain_ref_g0 / (dist * dist) / cp.noise_power_sigma2
        return cp.bandwidth_B * math.log2(1.0 + snr)

    acc = 0.0
    r_prev = rate_at(0.0)
    t = 0.0
    while True:
        r_next = rate_at(t + dt)
        inc = 0.5 * (r_prev + r_next) * dt
        if acc + inc >= task_n:
            # linear interpolation inside the final cell
            frac = (task_n - acc) / inc
            return t + frac * dt
        acc += inc
        t += dt
        r_prev = r_next


def suite_delay_integral(instances: int = 100, seed: int = 7) -> SuiteResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    plane = Plane(edge=30.0)
    cp = ChannelParams()
    p_tra = 0.05
    worst_stationary = 0.0
    worst_moving = 0.0
    for _ in range(instances):
        x, y = rng.uniform(0.0, 30.0, size=2)
        theta = rng.uniform(0.0, 2.0 * math.pi)
        n = float(rng.uniform(1.2e5, 3e5))
        still = RobotState(robot_id=0, l=(x, y), v=(math.cos(theta), math.sin(theta)), speed=0.0)
        got = transmission_delay(n, still, plane, p_tra, cp)
        dist = max(math.hypot(x - 15.0, y - 15.0), cp.min_distance)
        rate = cp.bandwidth_B * math.log2(
            1.0 + p_tra * cp.gain_ref_g0 / (dist * dist) / cp.noise_power_sigma2
        )
        closed = n / rate
        worst_stationary = max(worst_stationary, abs(got - closed) / closed)

        moving = replace(still, speed=float(rng.uniform(0.5, 4.0)))
        got_m = transmission_delay(n, moving, plane, p_tra, cp)
        oracle = trapezoid_delay_oracle(n, moving, plane, p_tra, cp)
        worst_moving = max(worst_moving, abs(got_m - oracle) / oracle)
    dt = time.perf_counter() - t0
    passed = worst_stationary < 1e-12 and worst_moving < 1e-6
    return SuiteResult(
        name="delay_integral",
        passed=passed,
        tolerance="stationary 1e-12 rel, moving 1e-6 rel",
        measured=f"stationary {worst_stationary:.2e}, moving {worst_moving:.2e}",
        detail=f"{instances} stationary + {instances} moving instances",
        seconds=dt,
    )


# ---------------------------------------------------------------------------
# Backprop vs central finite differences
# ---------------------------------------------------------------------------


def _oracle_forward_scalar(net: Network, s: np.ndarray) -> np.ndarray:
    """Scalar-by-scalar forward pass, independent of the vectorized one."""
    a = [float(v) for v in s]
    n_layers = len(net.weights)
    for li in range(n_layers):
        w, b = net.weights[li], net.biases[li]
        out = []
        for j in range(w.shape[1]):
            z = b[j]
            for i in range(w.shape[0]):
                z += a[i] * w[i, j]
            if li == n_layers - 1:
                out.append(math.tanh(z))
            else:
                out.append(z if z > 0 else 0.01 * z)
        a = out
    return np.array(a)


def _oracle_loss(net: Network, states, actions, targets) -> float:
    total = 0.0
    for s, a, t in zip(states, actions, targets):
        total += (_oracle_forward_scalar(net, s)[a] - t) ** 2
    return total / len(states)


def gradient_check(
    dims: Sequence[int], batch: int, rng: np.random.Generator, step: float = 1e-5
) -> float:
    """Max analytic-vs-FD gradient discrepancy, relative to the FD sup norm."""
    net = init_network(dims, rng)
    states = rng.normal(size=(batch, dims[0]))
    actions = rng.integers(0, dims[-1], size=batch)
    targets = rng.uniform(-0.9, 0.9, size=batch)
    grads, _ = backward(net, states, actions, targets)
    worst_abs = 0.0
    fd_scale = 0.0
    for p, g in zip(net.params, grads):
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + step
            up = _oracle_loss(net, states, actions, targets)
            flat_p[i] = orig - step
            down = _oracle_loss(net, states, actions, targets)
            flat_p[i] = orig
            fd = (up - down) / (2.0 * step)
            worst_abs = max(worst_abs, abs(fd - flat_g[i]))
            fd_scale = max(fd_scale, abs(fd))
    return worst_abs / max(fd_scale, 1e-12)


def suite_gradient_check(n_networks: int = 20, seed: int = 11) -> SuiteResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_networks):
        dims = [int(rng.integers(3, 8)), int(rng.integers(4, 9)), int(rng.integers(4, 9)),
                int(rng.integers(4, 9)), int(rng.integers(2, 6))]
        batch = int(rng.integers(1, 8))
        worst = max(worst, gradient_check(dims, batch, rng))
    dt = time.perf_counter() - t0
    return SuiteResult(
        name="gradient_check",
        passed=worst < 1e-4,
        tolerance="relative error < 1e-4",
        measured=f"{worst:.2e}",
        detail=f"{n_networks} random networks, central differences h=1e-5",
        seconds=dt,
    )


def suite_adam_quadratic() -> SuiteResult:
    """Adam must drive (x-3)^2 to |x-3| < 1e-3 within 5000 steps at lr 0.05."""
    t0 = time.perf_counter()
    x = np.array([0.0])
    state = AdamState.for_params([x])
    for _ in range(5000):
        g = 2.0 * (x - 3.0)
        adam_step([x], [g], state, lr=0.05)
        if abs(x[0] - 3.0) < 1e-3:
            break
    err = abs(float(x[0]) - 3.0)
    return SuiteResult(
        name="adam_quadratic",
        passed=err < 1e-3,
        tolerance="|x - 3| < 1e-3 within 5000 steps",
        measured=f"{err:.2e} after {state.t} steps",
        detail="1-D quadratic, lr=0.05",
        seconds=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# delta_delays vs full schedule recompute
# ---------------------------------------------------------------------------


def suite_queue_replay(instances: int = 1000, seed: int = 23) -> SuiteResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    violations = 0
    for k in range(instances):
        now = float(rng.uniform(5.0, 50.0))
        q = _random_queue_state(rng, now, m=10, max_len=9)
        task = Task(id=k, robot_id=0, n=2e5, d=1.0, t_gen=now)
        entry = QueueEntry(
            task=task,
            arrival_complete_at=now + float(rng.uniform(0.0, 0.3)),
            t_com=float(rng.uniform(0.05, 0.2)),
            enqueued_at=now,
        )
        pos = int(rng.integers(1, q.length + 2))
        deltas = q.delta_delays(entry, pos, now)
        free0 = _oracle_free0(q, now)
        before = _oracle_replay(q.waiting, free0)
        hyp = list(q.waiting)
        hyp.insert(pos - 1, entry)
        after = _oracle_replay(hyp, free0)
        del after[pos - 1]
        for (tid, t_add), e, old, new in zip(deltas, q.waiting, before, after):
            if tid != e.task.id or t_add < 0:
                violations += 1
            worst = max(worst, abs(t_add - (new[1] - old[1])))
        # ready_time must be non-decreasing in position
        rts = [q.ready_time(p, now) for p in range(1, q.length + 2)]
        if any(b < a - 1e-12 for a, b in zip(rts, rts[1:])):
            violations += 1
    dt = time.perf_counter() - t0
    passed = violations == 0 and worst < 1e-9
    return SuiteResult(
        name="queue_replay",
        passed=passed,
        tolerance="delta == recompute (1e-9 abs), all >= 0, ready_time monotone",
        measured=f"max diff {worst:.2e}, {violations} violations",
        detail=f"{instances} random queue states",
        seconds=dt,
    )


# ---------------------------------------------------------------------------
# Poisson arrival moments
# ---------------------------------------------------------------------------


def suite_poisson_moments(
    windows: int = 100_000, lam: float = 10.0, window_t: float = 0.1, seed: int = 5
) -> SuiteResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    duration = windows * window_t
    arrivals = generate_arrivals(lam, duration, n_rb=10, rng=rng)
    pooled = np.concatenate([np.asarray(a) for a in arrivals]) if arrivals else np.array([])
    counts, _ = np.histogram(pooled, bins=windows, range=(0.0, duration))
    mean = counts.mean()
    var = counts.var()
    expect = lam * window_t
    se_mean = math.sqrt(expect / windows)
    # standard error of the sample variance from the sample's fourth moment
    m4 = np.mean((counts - mean) ** 4)
    se_var = math.sqrt(max(m4 - var**2, 1e-12) / windows)
    dev_mean = abs(mean - expect) / se_mean
    dev_var = abs(var - expect) / se_var
    passed = dev_mean <= 3.0 and dev_var <= 3.0
    return SuiteResult(
        name="poisson_moments",
        passed=passed,
        tolerance="mean and variance within 3 standard errors of lambda*t",
        measured=f"mean {dev_mean:.2f} SE, variance {dev_var:.2f} SE",
        detail=f"{windows} windows of {window_t}s at lambda={lam}",
        seconds=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# Engine soak: queue/service invariants over >= 1e6 events
# ---------------------------------------------------------------------------


def check_run_invariants(result, config: SimConfig) -> List[str]:
    """Invariant violations of one completed (drained) run."""
    problems = []
    if config.drain and len(result.outcomes) != result.generated:
        problems.append(
            f"task conservation: {result.generated} generated, {len(result.outcomes)} outcomes"
        )
    if result.max_waiting > config.capacity_m:
        problems.append(f"waiting line reached {result.max_waiting} > M={config.capacity_m}")
    intervals = sorted(result.service_intervals, key=lambda iv: iv[1])
    prev_end = -math.inf
    for _, start, end in intervals:
        if end < start:
            problems.append("service interval ends before it starts")
        if start < prev_end - 1e-9:
            problems.append("overlapping service intervals")
        prev_end = end
    for o in result.outcomes:
        if o.T_i < 0 or o.E_i < 0:
            problems.append(f"task {o.task_id}: negative delay or energy")
    seen = [o.task_id for o in result.outcomes]
    if len(seen) != len(set(seen)):
        problems.append("duplicate outcomes for one task")
    return problems


def suite_queue_soak(target_events: int = 1_000_000, seed: int = 99) -> SuiteResult:
    t0 = time.perf_counter()
    events = 0
    violations: List[str] = []
    runs = 0
    k = 0
    while events < target_events:
        policy_name = ("random", "fifo", "greedy", "periodic")[k % 4]
        m = (2, 10, 4, 10)[k % 4]
        lam = (15.0, 25.0, 12.0, 18.0)[k % 4]
        cfg = SimConfig(
            lambda_intensity=lam, capacity_m=m, duration=400.0, seed=seed + k, drain=True
        )
        policy = build_policy(policy_name, cfg)
        result = run(cfg, policy)
        events += result.n_events
        runs += 1
        k += 1
        violations.extend(check_run_invariants(result, cfg))
    dt = time.perf_counter() - t0
    return SuiteResult(
        name="queue_soak",
        passed=not violations and events >= target_events,
        tolerance="zero invariant violations",
        measured=f"{len(violations)} violations over {events} events",
        detail=f"{runs} randomized runs (mixed policies, M, lambda); first: "
        + (violations[0] if violations else "none"),
        seconds=dt,
    )


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def run_suites(scale: str = "full") -> List[SuiteResult]:
    if scale == "quick":
        return [
            suite_scheduler_enumeration(instances=200),
            suite_delay_integral(instances=10),
            suite_gradient_check(n_networks=5),
            suite_adam_quadratic(),
            suite_queue_replay(instances=200),
            suite_poisson_moments(windows=20_000),
            suite_queue_soak(target_events=50_000),
        ]
    if scale == "full":
        return [
            suite_scheduler_enumeration(instances=1000),
            suite_delay_integral(instances=100),
            suite_gradient_check(n_networks=20),
            suite_adam_quadratic(),
            suite_queue_replay(instances=1000),
            suite_poisson_moments(windows=100_000),
            suite_queue_soak(target_events=1_000_000),
        ]
    raise ValueError(f"unknown verification scale {scale!r}")
