"""The generic feedback loop: an ensemble of stochastic users, an
aggregator, a filter, and a pluggable policy that produces the signal.

Each user carries affine state-transition maps and output maps into a
finite demand set; which map fires at a step is drawn from signal-indexed
probability tables. The policy sees only the filtered aggregate (one-step
delayed), never individual users.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .markov import AffineMap
from .numerics import SeededRng, categorical


@dataclass(frozen=True)
class UserSpec:
    """One user's stochastic dynamics.

    transition_probs and output_probs map each signal in the alphabet to a
    probability vector over transition_maps / output_maps respectively.
    Output maps take the pre-transition state and must land in demand_set.
    """

    transition_maps: tuple[AffineMap, ...]
    output_maps: tuple  # callables state -> demand value
    transition_probs: dict  # signal -> tuple of probabilities
    output_probs: dict
    demand_set: frozenset

    def validate(self):
        if set(self.transition_probs) != set(self.output_probs):
            raise DomainError("transition and output tables must share the signal alphabet")
        for table, maps, name in (
            (self.transition_probs, self.transition_maps, "transition"),
            (self.output_probs, self.output_maps, "output"),
        ):
            for sig, probs in table.items():
                if len(probs) != len(maps):
                    raise DomainError(f"{name} table for signal {sig!r} has wrong arity")
                if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
                    raise DomainError(
                        f"{name} probabilities for signal {sig!r} must be nonnegative "
                        f"and sum to 1, got {probs}"
                    )

    @property
    def signals(self):
        return set(self.transition_probs)


@dataclass(frozen=True)
class FilterSpec:
    """identity | cumulative-mean | ema (exponential moving average)."""

    kind: str = "identity"
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in ("identity", "cumulative-mean", "ema"):
            raise DomainError(f"unknown filter kind {self.kind!r}")
        if self.kind == "ema" and not (0.0 < self.alpha <= 1.0):
            raise DomainError(f"ema alpha must be in (0,1], got {self.alpha}")


@dataclass
class LoopTrace:
    """Recorded history of one closed-loop run."""

    signals: list  # per step: broadcast signal, or list of per-user signals
    states: list[list[np.ndarray]]  # per step, per user
    actions: list[list[float]]  # per step, per user
    aggregates: list[float]
    filtered: list[float]
    per_user_signals: bool = False

    def user_actions(self, i: int) -> list[float]:
        return [step[i] for step in self.actions]

    def signal_for(self, k: int, i: int):
        return self.signals[k][i] if self.per_user_signals else self.signals[k]


def step_user(user: UserSpec, x, signal, rng: SeededRng):
    """One user step: draw a transition map and an output map (independent
    draws), apply the output map to the pre-transition state."""
    if signal not in user.transition_probs:
        raise DomainError(f"signal {signal!r} not in user's alphabet")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    j = categorical(user.transition_probs[signal], rng)
    ell = categorical(user.output_probs[signal], rng)
    y = user.output_maps[ell](x)
    if y not in user.demand_set:
        raise DomainError(f"output map produced {y!r} outside the demand set")
    x_next = user.transition_maps[j](x)
    return x_next, y


def aggregate(actions) -> float:
    """Sum of scalar actions."""
    return float(sum(float(a) for a in actions))


def apply_filter(spec: FilterSpec, history) -> float:
    """Apply the filter to the aggregate history up to the current step."""
    if len(history) == 0:
        raise DomainError("filter requires nonempty history")
    if spec.kind == "identity":
        return float(history[-1])
    if spec.kind == "cumulative-mean":
        return float(np.mean(history))
    out = float(history[0])
    for v in history[1:]:
        out = spec.alpha * float(v) + (1.0 - spec.alpha) * out
    return out


def run_loop(users, policy, filter_spec: FilterSpec, x0, steps: int,
             rng: SeededRng, per_user_policy: bool = False) -> LoopTrace:
    """Execute the closed loop for `steps` steps.

    `policy` maps the previous step's filtered value (None before any
    observation, a one-step delay) to a signal; with `per_user_policy`
    it is called as policy(filtered, user_index). Each user draws from its
    own derived sub-stream, so permuting users permutes the trace.
    """
    for u in users:
        u.validate()
    n = len(users)
    states = [np.atleast_1d(np.asarray(x, dtype=float)) for x in x0]
    if len(states) != n:
        raise DomainError("x0 must supply one state per user")
    user_rngs = [rng.substream(i) for i in range(n)]

    # cumulative tables per (user, signal); draws below replicate
    # step_user's categorical draws exactly (same cumsum, same search)
    def cum(probs):
        c = np.cumsum(probs)
        c[-1] = 1.0
        return c.tolist()

    tables = [
        {sig: (cum(u.transition_probs[sig]), cum(u.output_probs[sig]))
         for sig in u.transition_probs}
        for u in users
    ]

    trace = LoopTrace(signals=[], states=[], actions=[], aggregates=[],
                      filtered=[], per_user_signals=per_user_policy)
    filtered_prev = None
    for _ in range(steps):
        if per_user_policy:
            sigs = [policy(filtered_prev, i) for i in range(n)]
        else:
            sig = policy(filtered_prev)
            sigs = [sig] * n
        trace.states.append(list(states))
        actions = []
        for i in range(n):
            user = users[i]
            if sigs[i] not in tables[i]:
                raise DomainError(f"signal {sigs[i]!r} not in user's alphabet")
            cum_trans, cum_out = tables[i][sigs[i]]
            r = user_rngs[i]
            j = bisect_right(cum_trans, r.uniform())
            ell = bisect_right(cum_out, r.uniform())
            x = states[i]
            y = user.output_maps[ell](x)
            if y not in user.demand_set:
                raise DomainError(f"output map produced {y!r} outside the demand set")
            states[i] = user.transition_maps[j](x)
            actions.append(float(y))
        agg = aggregate(actions)
        trace.signals.append(sigs if per_user_policy else sigs[0])
        trace.actions.append(actions)
        trace.aggregates.append(agg)
        filtered_prev = apply_filter(filter_spec, trace.aggregates)
        trace.filtered.append(filtered_prev)
    return trace
