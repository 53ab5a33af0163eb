"""Shared builders and checkers for the test suite."""

import numpy as np

from graphseg import graph as gr
from graphseg import pwq
from graphseg.solver import Signal, solve_domain
from grid_oracle import GridFunc


def random_composition(rng, domain=(-6.0, 6.0), n_ops=None, max_losses=8):
    """Apply a random operation sequence to both representations in lockstep.

    Returns (PiecewiseQuad, GridFunc, trace of op names).  Envelope gaps are
    whole numbers of fine-grid cells so the oracle's index shifts are exact.
    """
    y0 = float(rng.uniform(-4, 4))
    f = pwq.PiecewiseQuad.point_loss(y0, domain)
    o = GridFunc(domain).add_point_loss(y0)
    if n_ops is None:
        n_ops = int(rng.integers(2, 8))
    losses = 1
    ops = [f"loss({y0:.3f})"]
    for _ in range(n_ops):
        op = rng.choice(["loss", "min", "leq", "geq", "const"])
        if op == "loss" and losses >= max_losses:
            op = "const"
        if op == "loss":
            y = float(rng.uniform(-4, 4))
            f = pwq.add_point_loss(f, y)
            o = o.add_point_loss(y)
            losses += 1
            ops.append(f"loss({y:.3f})")
        elif op == "const":
            k = float(rng.uniform(-3, 3))
            f = pwq.add_constant(f, k)
            o = o.add_constant(k)
            ops.append(f"const({k:.3f})")
        elif op == "min":
            y = float(rng.uniform(-4, 4))
            k = float(rng.uniform(0, 4))
            g = pwq.add_constant(pwq.PiecewiseQuad.point_loss(y, domain), k)
            og = GridFunc(domain).add_point_loss(y).add_constant(k)
            f = pwq.pointwise_min(f, g)
            o = o.pointwise_min(og)
            ops.append(f"min(loss({y:.3f})+{k:.3f})")
        else:
            cells = int(rng.integers(0, 200_001))
            gap = o.gap_of(cells)
            if op == "leq":
                f = pwq.min_leq_envelope(f, gap)
                o = o.min_leq_envelope(cells)
            else:
                f = pwq.min_geq_envelope(f, gap)
                o = o.min_geq_envelope(cells)
            ops.append(f"{op}({gap:.4f})")
        if f.is_empty:
            break
    return f, o, ops


def random_signal(rng, n=None, n_levels=None):
    """Nonnegative piecewise-constant-ish signal with noise, values in [0, 10]."""
    if n is None:
        n = int(rng.integers(8, 61))
    if n_levels is None:
        n_levels = int(rng.integers(1, 5))
    cuts = sorted(rng.choice(np.arange(1, n), size=min(n_levels - 1, n - 1),
                             replace=False).tolist()) if n_levels > 1 else []
    levels = rng.uniform(1.0, 9.0, n_levels)
    y = np.empty(n)
    prev = 0
    for k, c in enumerate(cuts + [n]):
        y[prev:c] = levels[k]
        prev = c
    y += rng.normal(0.0, 0.5, n)
    return np.clip(y, 0.0, 10.0)


def random_graph(rng, signal, n_states=None, n_grid=801, max_gap_cells=20):
    """Random strongly-connected graph whose gaps are exact grid multiples."""
    if n_states is None:
        n_states = int(rng.integers(2, 5))
    dlo, dhi = solve_domain(Signal(signal, 360.0))
    delta = (dhi - dlo) / (n_grid - 1)
    names = ["B", "R"] + [f"V{i}" for i in range(2, n_states)]
    states = tuple(gr.StateId(i, names[i]) for i in range(n_states))
    edges = []
    for i in range(n_states):
        j = (i + 1) % n_states
        direction = gr.UP if rng.random() < 0.5 else gr.DOWN
        gap = int(rng.integers(0, max_gap_cells + 1)) * delta
        pen = float(rng.uniform(0.2, 4.0))
        edges.append(gr.Edge(i, j, direction, gap, pen))
    for _ in range(int(rng.integers(0, 3))):
        s = int(rng.integers(0, n_states))
        t = int(rng.integers(0, n_states))
        if s == t:
            continue
        direction = gr.UP if rng.random() < 0.5 else gr.DOWN
        gap = int(rng.integers(0, max_gap_cells + 1)) * delta
        pen = float(rng.uniform(0.2, 4.0))
        e = gr.Edge(s, t, direction, gap, pen)
        if any(x == e for x in edges):
            continue
        edges.append(e)
    g = gr.ConstraintGraph(states=states, edges=tuple(edges),
                           baseline_state=0, rpeak_state=1)
    assert gr.validate(g) == []
    return g


def recompute_cost(y, g, seg):
    """Total cost from (boundaries, means, edges_taken), independent of the DP."""
    cuts = [0] + list(seg.boundaries) + [len(y)]
    cost = 0.0
    for k, m in enumerate(seg.means):
        cost += float(np.sum((y[cuts[k]:cuts[k + 1]] - m) ** 2))
    for ei in seg.edges_taken:
        cost += g.edges[ei].penalty
    return cost


def assert_valid_segmentation(y, g, seg, slack=1e-9):
    """Check every structural invariant of a Segmentation."""
    n = len(y)
    assert len(seg.means) == len(seg.states) == len(seg.boundaries) + 1
    assert all(1 <= b <= n - 1 for b in seg.boundaries)
    assert all(b1 < b2 for b1, b2 in zip(seg.boundaries, seg.boundaries[1:]))
    assert len(seg.edges_taken) == len(seg.boundaries)
    for k, ei in enumerate(seg.edges_taken):
        e = g.edges[ei]
        assert (seg.states[k], seg.states[k + 1]) == (e.source, e.target)
        if e.direction == gr.UP:
            assert seg.means[k + 1] >= seg.means[k] + e.gap - slack
        else:
            assert seg.means[k + 1] <= seg.means[k] - e.gap + slack
    recomputed = recompute_cost(y, g, seg)
    denom = max(1.0, abs(recomputed))
    assert abs(recomputed - seg.total_cost) / denom < 1e-6, (
        f"cost mismatch: reported {seg.total_cost}, recomputed {recomputed}"
    )
