"""Exact solution of the channel-hopping schedule problem on desk-scale instances.

Two independent routes are provided: a depth-first branch-and-bound search
(`solve_exact`) and an exhaustive enumeration oracle (`enumerate_oracle`) used
as ground truth in tests.  Both restrict each node to at most one (gateway,
frequency) channel per slot; symbol counts are then a pure feasibility
question (they do not enter the objective), settled by a small max-flow in the
solver and by direct enumeration in the oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import core


class Infeasible(Exception):
    def __init__(self, family, detail=""):
        self.family = family
        super().__init__(f"infeasible instance (binding constraint: {family}) {detail}".strip())


class BudgetExhausted(Exception):
    """Search budget ran out before any feasible schedule was found."""


class EnumerationCapExceeded(Exception):
    def __init__(self, states, cap):
        self.states = states
        super().__init__(f"state space too large to enumerate: {states} > cap {cap}")


@dataclass
class SolveResult:
    schedule: core.Schedule
    objective_value: float
    nodes_explored: int
    proven_optimal: bool


def _node_slot_bounds(scenario):
    """Per node, the feasible range of active-slot counts, or None if none exists."""
    bmin = scenario.min_symbols
    bmax = max(scenario.freq_capacity)
    ranges = []
    for d in scenario.demand:
        if d == 0:
            ranges.append((0, 0))
            continue
        ks = [k for k in range(1, scenario.horizon + 1) if k * bmin <= d <= k * bmax]
        if not ks:
            return None
        ranges.append((min(ks), max(ks)))
    return ranges


def _max_flow(capacity, source, sink):
    """Edmonds-Karp on a dense capacity matrix; returns (value, flow matrix)."""
    n = len(capacity)
    flow = [[0] * n for _ in range(n)]
    total = 0
    while True:
        parent = [-1] * n
        parent[source] = source
        queue = [source]
        while queue and parent[sink] == -1:
            u = queue.pop(0)
            for v in range(n):
                if parent[v] == -1 and capacity[u][v] - flow[u][v] > 0:
                    parent[v] = u
                    queue.append(v)
        if parent[sink] == -1:
            return total, flow
        # bottleneck along the path
        push = float("inf")
        v = sink
        while v != source:
            u = parent[v]
            push = min(push, capacity[u][v] - flow[u][v])
            v = u
        v = sink
        while v != source:
            u = parent[v]
            flow[u][v] += push
            flow[v][u] -= push
            v = u
        total += push


def _symbols_by_flow(scenario, choices):
    """Assign symbol counts for a complete channel assignment, or None.

    Every active channel must carry at least B_min symbols; the slack above the
    minima is routed from nodes (supply = demand - k*B_min) to channel-slots
    (residual capacity B_f - users*B_min) through a max-flow.
    """
    n_nodes, horizon = scenario.num_nodes, scenario.horizon
    f_n = scenario.num_freqs
    bmin = scenario.min_symbols

    active = [(i, t, choices[t * n_nodes + i])
              for t in range(horizon) for i in range(n_nodes)
              if choices[t * n_nodes + i] >= 0]
    counts = {}
    for i, t, c in active:
        counts[(t, c)] = counts.get((t, c), 0) + 1

    supply = []
    for i in range(n_nodes):
        k = sum(1 for a in active if a[0] == i)
        extra = scenario.demand[i] - k * bmin
        if extra < 0:
            return None
        supply.append(extra)
    cs_keys = sorted(counts)
    cs_residual = {}
    for t, c in cs_keys:
        cap = scenario.freq_capacity[c % f_n] - counts[(t, c)] * bmin
        if cap < 0:
            return None
        cs_residual[(t, c)] = cap

    # graph: 0 source, 1..N nodes, then channel-slots, then sink
    cs_index = {key: 1 + n_nodes + j for j, key in enumerate(cs_keys)}
    size = 2 + n_nodes + len(cs_keys)
    sink = size - 1
    cap_m = [[0] * size for _ in range(size)]
    for i in range(n_nodes):
        cap_m[0][1 + i] = supply[i]
    for key, idx in cs_index.items():
        cap_m[idx][sink] = cs_residual[key]
    for i, t, c in active:
        cap_m[1 + i][cs_index[(t, c)]] = scenario.freq_capacity[c % f_n] - bmin
    value, flow = _max_flow(cap_m, 0, sink)
    if value != sum(supply):
        return None

    s = np.zeros((n_nodes, scenario.num_gateways, f_n, horizon), dtype=np.int64)
    for i, t, c in active:
        g, f = divmod(c, f_n)
        s[i, g, f, t] = bmin + flow[1 + i][cs_index[(t, c)]]
    return s


def _schedule_from_choices(scenario, choices, s):
    n_nodes, f_n = scenario.num_nodes, scenario.num_freqs
    x = np.zeros((n_nodes, scenario.num_gateways, f_n, scenario.horizon), dtype=bool)
    for t in range(scenario.horizon):
        for i in range(n_nodes):
            c = choices[t * n_nodes + i]
            if c >= 0:
                g, f = divmod(c, f_n)
                x[i, g, f, t] = True
    return core.schedule_from_x(scenario, x, s)


def solve_exact(scenario, alpha=1.0, beta=0.1, budget=2_000_000):
    """Depth-first branch and bound over per-node per-slot channel choices.

    The lower bound of a partial schedule is the cost already committed
    (collisions of filled channel-slots plus hop flags), so pruning uses
    bound > incumbent; ties are resolved toward the lexicographically
    smallest x tensor.
    """
    if alpha < 0 or beta < 0:
        raise ValueError("weights must be nonnegative")
    n_nodes, n_gw, f_n = scenario.num_nodes, scenario.num_gateways, scenario.num_freqs
    horizon = scenario.horizon
    n_ch = n_gw * f_n
    bmin = scenario.min_symbols
    bmax = max(scenario.freq_capacity)

    slot_bounds = _node_slot_bounds(scenario)
    if slot_bounds is None:
        raise Infeasible(core.ConstraintFamily.DEMAND.value,
                         "demand not expressible within the horizon and symbol bounds")

    choices = [-1] * (n_nodes * horizon)
    occ = np.zeros((horizon, n_ch), dtype=np.int64)     # users per channel-slot
    gw_load = np.zeros((horizon, n_gw), dtype=np.int64)
    active_cnt = [0] * n_nodes
    prune_counts = {}
    state = {"explored": 0, "aborted": False,
             "best_obj": None, "best_key": None, "best": None}

    def note_prune(family):
        prune_counts[family] = prune_counts.get(family, 0) + 1

    def finish_leaf(cost):
        s = _symbols_by_flow(scenario, choices)
        if s is None:
            note_prune(core.ConstraintFamily.FREQ_CAPACITY.value)
            return
        sched = _schedule_from_choices(scenario, choices, s)
        key = sched.x.tobytes()
        if (state["best_obj"] is None or cost < state["best_obj"]
                or (cost == state["best_obj"] and key < state["best_key"])):
            state["best_obj"] = cost
            state["best_key"] = key
            state["best"] = sched

    def descend(pos, cost):
        if state["aborted"]:
            return
        if pos == n_nodes * horizon:
            finish_leaf(cost)
            return
        t, i = divmod(pos, n_nodes)
        k_lo, k_hi = slot_bounds[i]
        remaining_slots = horizon - t - 1
        prev = choices[(t - 1) * n_nodes + i] if t > 0 else None

        for c in [-1] + list(range(n_ch)):
            if state["explored"] >= budget:
                state["aborted"] = True
                return
            state["explored"] += 1
            if c == -1:
                # staying idle must leave enough future slots to reach k_lo
                if active_cnt[i] + remaining_slots < k_lo:
                    note_prune(core.ConstraintFamily.DEMAND.value)
                    continue
                new_cost = cost + (beta if (prev is not None and prev != -1) else 0.0)
            else:
                if active_cnt[i] + 1 > k_hi:
                    note_prune(core.ConstraintFamily.DEMAND.value)
                    continue
                g = c // f_n
                if gw_load[t, g] + 1 > scenario.gateway_capacity[g]:
                    note_prune(core.ConstraintFamily.GATEWAY_CAPACITY.value)
                    continue
                if (occ[t, c] + 1) * bmin > scenario.freq_capacity[c % f_n]:
                    note_prune(core.ConstraintFamily.FREQ_CAPACITY.value)
                    continue
                if t > 0 and occ[t - 1, c] >= 2 and occ[t, c] + 1 > 1:
                    note_prune(core.ConstraintFamily.COLLISION_EVICTION.value)
                    continue
                new_cost = cost + alpha * 2 * occ[t, c] \
                    + (beta if (prev is not None and prev != c) else 0.0)
            if state["best_obj"] is not None and new_cost > state["best_obj"]:
                continue

            choices[pos] = c
            if c >= 0:
                occ[t, c] += 1
                gw_load[t, c // f_n] += 1
                active_cnt[i] += 1
            ok = True
            if i == n_nodes - 1 and t > 0:
                # every channel collided in the previous slot must keep one node
                for ch in range(n_ch):
                    if occ[t - 1, ch] >= 2 and occ[t, ch] != 1:
                        note_prune(core.ConstraintFamily.COLLISION_EVICTION.value)
                        ok = False
                        break
            if ok:
                descend(pos + 1, new_cost)
            choices[pos] = -1
            if c >= 0:
                occ[t, c] -= 1
                gw_load[t, c // f_n] -= 1
                active_cnt[i] -= 1
            if state["aborted"]:
                return

    descend(0, 0.0)

    if state["best"] is None:
        if state["aborted"]:
            raise BudgetExhausted(f"no feasible schedule within {budget} expansions")
        family = max(prune_counts, key=prune_counts.get) if prune_counts \
            else core.ConstraintFamily.DEMAND.value
        raise Infeasible(family)
    return SolveResult(
        schedule=state["best"],
        objective_value=float(state["best_obj"]),
        nodes_explored=state["explored"],
        proven_optimal=not state["aborted"],
    )


def _decode_choices(indices, positions, base):
    """Choice matrix for global state indices; value 0 = idle, v>0 = channel v-1."""
    out = np.empty((len(indices), positions), dtype=np.int64)
    rest = np.asarray(indices, dtype=np.int64).copy()
    for p in range(positions - 1, -1, -1):
        out[:, p] = rest % base
        rest //= base
    return out


def _symbols_by_enumeration(scenario, choices):
    """Direct recursive search over symbol counts (oracle route, no flow)."""
    n_nodes, f_n = scenario.num_nodes, scenario.num_freqs
    bmin = scenario.min_symbols
    active = [(i, t, c) for t in range(scenario.horizon) for i in range(n_nodes)
              if (c := choices[t * n_nodes + i]) >= 0]
    rem = list(scenario.demand)
    for i in range(n_nodes):
        if rem[i] > 0 and not any(a[0] == i for a in active):
            return None
    cs_cap = {}
    for i, t, c in active:
        cs_cap[(t, c)] = scenario.freq_capacity[c % f_n]
    # per node, suffix counts/capacity to window the residual demand
    suffix_cnt = [[0] * n_nodes for _ in range(len(active) + 1)]
    suffix_cap = [[0] * n_nodes for _ in range(len(active) + 1)]
    for pos in range(len(active) - 1, -1, -1):
        i, t, c = active[pos]
        for j in range(n_nodes):
            suffix_cnt[pos][j] = suffix_cnt[pos + 1][j] + (1 if j == i else 0)
            suffix_cap[pos][j] = suffix_cap[pos + 1][j] + \
                (scenario.freq_capacity[c % f_n] - bmin if j == i else 0)
    assigned = {}

    def recurse(pos):
        if pos == len(active):
            return all(r == 0 for r in rem)
        i, t, c = active[pos]
        cap_here = min(scenario.freq_capacity[c % f_n], cs_cap[(t, c)])
        future_cnt = suffix_cnt[pos + 1][i]
        future_cap = suffix_cap[pos + 1][i]
        hi = min(cap_here, rem[i] - future_cnt * bmin)
        lo = max(bmin, rem[i] - future_cnt * bmin - future_cap)
        for s_val in range(hi, lo - 1, -1):
            rem[i] -= s_val
            cs_cap[(t, c)] -= s_val
            if recurse(pos + 1):
                assigned[(i, t, c)] = s_val
                rem[i] += s_val
                cs_cap[(t, c)] += s_val
                return True
            rem[i] += s_val
            cs_cap[(t, c)] += s_val
        return False

    if not recurse(0):
        return None
    s = np.zeros((n_nodes, scenario.num_gateways, f_n, scenario.horizon), dtype=np.int64)
    for (i, t, c), v in assigned.items():
        g, f = divmod(c, f_n)
        s[i, g, f, t] = v
    return s


def enumerate_oracle(scenario, alpha=1.0, beta=0.1, cap=10_000_000, chunk=200_000):
    """Exhaustive enumeration of all channel assignments; exact optimum.

    Intended for tests only: refuses instances whose state count exceeds `cap`.
    """
    if alpha < 0 or beta < 0:
        raise ValueError("weights must be nonnegative")
    n_nodes, n_gw, f_n = scenario.num_nodes, scenario.num_gateways, scenario.num_freqs
    horizon = scenario.horizon
    n_ch = n_gw * f_n
    base = n_ch + 1
    positions = n_nodes * horizon
    states = base ** positions
    if states > cap:
        raise EnumerationCapExceeded(states, cap)

    bmin = scenario.min_symbols
    bmax = max(scenario.freq_capacity)
    demand = np.asarray(scenario.demand)
    feasible_idx = []
    feasible_obj = []

    for start in range(0, states, chunk):
        idx = np.arange(start, min(start + chunk, states), dtype=np.int64)
        ch = _decode_choices(idx, positions, base).reshape(len(idx), horizon, n_nodes)
        ok = np.ones(len(idx), dtype=bool)
        collisions = np.zeros(len(idx), dtype=np.int64)
        for k in range(n_ch):
            occ_k = (ch == k + 1).sum(axis=2)
            collisions += (occ_k * (occ_k - 1)).sum(axis=1)
            ok &= (occ_k * bmin <= scenario.freq_capacity[k % f_n]).all(axis=1)
            if horizon > 1:
                ok &= ~((occ_k[:, :-1] >= 2) & (occ_k[:, 1:] != 1)).any(axis=1)
        for g in range(n_gw):
            load = np.zeros((len(idx), horizon), dtype=np.int64)
            for f in range(f_n):
                load += (ch == g * f_n + f + 1).sum(axis=2)
            ok &= (load <= scenario.gateway_capacity[g]).all(axis=1)
        active_per_node = (ch != 0).sum(axis=1)
        ok &= (active_per_node * bmin <= demand).all(axis=1)
        ok &= (demand <= active_per_node * bmax).all(axis=1)
        hops = np.zeros(len(idx), dtype=np.int64)
        if horizon > 1:
            hops = (ch[:, 1:, :] != ch[:, :-1, :]).sum(axis=(1, 2))
        obj = alpha * collisions + beta * hops
        feasible_idx.append(idx[ok])
        feasible_obj.append(obj[ok])

    idx_all = np.concatenate(feasible_idx)
    obj_all = np.concatenate(feasible_obj)
    order = np.argsort(obj_all, kind="stable")
    for rank in order:
        choices = _decode_choices([idx_all[rank]], positions, base)[0] - 1
        s = _symbols_by_enumeration(scenario, list(choices))
        if s is not None:
            sched = _schedule_from_choices(scenario, list(choices), s)
            return SolveResult(
                schedule=sched,
                objective_value=float(obj_all[rank]),
                nodes_explored=int(states),
                proven_optimal=True,
            )
    raise Infeasible(core.ConstraintFamily.DEMAND.value, "exhaustive enumeration found no schedule")
