"""Equal-treatment and equal-impact diagnostics.

Treatment concerns one pass through the loop (same signal, same action
distribution within a class of non-protected attributes); impact concerns
the long-run running averages of actions (they must exist, coincide across
users, and not depend on initial conditions). Default-rate metrics and the
dispersion/density summaries used by the credit case study live here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .numerics import std_normal_cdf


@dataclass(frozen=True)
class ClassPartition:
    """Per-user class label (non-protected attributes) and group label
    (protected attributes)."""

    class_of: dict
    group_of: dict

    def classes(self):
        return sorted(set(self.class_of.values()), key=str)

    def members(self, cls):
        return sorted(u for u, c in self.class_of.items() if c == cls)


@dataclass
class TreatmentReport:
    signal_violations: list  # (step, class, distinct signals seen)
    literal_constant: dict  # class -> bool: all recorded actions equal one value
    distribution_pvalues: dict  # class -> min pairwise two-proportion p-value (None if <2 users)
    alpha: float

    @property
    def uniform_signals(self) -> bool:
        return not self.signal_violations

    def distribution_ok(self, cls) -> bool:
        p = self.distribution_pvalues.get(cls)
        return p is None or p >= self.alpha


@dataclass
class ImpactReport:
    user_means: list[dict]  # per trace: user -> final Cesàro mean
    group_means: list[dict]  # per trace: group -> pooled final value
    coincidence_spread: float  # max within-trace pairwise |r_i - r_j|
    group_spread: float
    initial_condition_spread: float  # max per-user difference across traces
    epsilon: float

    @property
    def converged(self) -> bool:
        return (self.coincidence_spread <= self.epsilon
                and self.initial_condition_spread <= self.epsilon)


def cesaro(series) -> list[float]:
    """Running means out[k] = mean(series[0..k])."""
    vals = [float(v) for v in series]
    if not vals:
        raise DomainError("cesaro requires a nonempty sequence")
    sums = np.cumsum(vals)
    return [s / (k + 1) for k, s in enumerate(sums)]


def two_proportion_pvalue(successes_a, n_a, successes_b, n_b) -> float:
    """Two-sided pooled z-test for equality of two Bernoulli proportions."""
    if min(n_a, n_b) == 0:
        raise DomainError("proportion test requires nonempty samples")
    p_pool = (successes_a + successes_b) / (n_a + n_b)
    se = math.sqrt(p_pool * (1 - p_pool) * (1 / n_a + 1 / n_b))
    if se == 0:
        return 1.0
    z = (successes_a / n_a - successes_b / n_b) / se
    return 2.0 * (1.0 - std_normal_cdf(abs(z)))


def check_equal_treatment(trace, partition: ClassPartition, alpha: float = 0.01) -> TreatmentReport:
    """Flag signal non-uniformity per class and compare realized action
    distributions.

    The literal requirement (all actions equal one constant) and the
    statistical one (equal Bernoulli action distributions at level alpha)
    are reported separately; actions must be binary for the latter.
    """
    users = sorted(partition.class_of)
    steps = len(trace.actions)
    for u in users:
        if u >= len(trace.actions[0]):
            raise DomainError(f"partition references unknown user {u}")

    violations = []
    for k in range(steps):
        for cls in partition.classes():
            seen = {trace.signal_for(k, u) for u in partition.members(cls)}
            if len(seen) > 1:
                violations.append((k, cls, sorted(seen, key=str)))

    literal = {}
    pvalues = {}
    for cls in partition.classes():
        members = partition.members(cls)
        actions = {u: trace.user_actions(u) for u in members}
        flat = {a for acts in actions.values() for a in acts}
        literal[cls] = len(flat) <= 1
        if len(members) < 2:
            pvalues[cls] = None
            continue
        if not flat <= {0.0, 1.0}:
            pvalues[cls] = None
            continue
        min_p = 1.0
        for i, u in enumerate(members):
            for v in members[i + 1:]:
                p = two_proportion_pvalue(sum(actions[u]), steps, sum(actions[v]), steps)
                min_p = min(min_p, p)
        pvalues[cls] = min_p
    return TreatmentReport(violations, literal, pvalues, alpha)


def _spread(values) -> float:
    vals = [float(v) for v in values]
    return max(vals) - min(vals) if vals else 0.0


def check_equal_impact(traces, partition: ClassPartition, epsilon: float = 0.02) -> ImpactReport:
    """Long-run coincidence diagnostics over runs from distinct initial
    conditions.

    Each trace must have the same horizon; user Cesàro means are compared
    within each trace (coincidence) and per user across traces
    (initial-condition independence).
    """
    if len(traces) < 2:
        raise DomainError("equal-impact check requires at least two traces")
    horizons = {len(t.actions) for t in traces}
    if len(horizons) != 1:
        raise DomainError(f"traces have mismatched horizons: {sorted(horizons)}")

    users = sorted(partition.class_of)
    groups = sorted(set(partition.group_of.values()), key=str)
    user_means, group_means = [], []
    for t in traces:
        um = {u: cesaro(t.user_actions(u))[-1] for u in users}
        gm = {}
        for g in groups:
            members = [u for u in users if partition.group_of[u] == g]
            gm[g] = float(np.mean([um[u] for u in members]))
        user_means.append(um)
        group_means.append(gm)

    coincidence = max(_spread(um.values()) for um in user_means)
    group_spread = max(_spread(gm.values()) for gm in group_means)
    cross = max(_spread([um[u] for um in user_means]) for u in users)
    return ImpactReport(user_means, group_means, coincidence, group_spread, cross, epsilon)


def adr_user(decisions, repayments) -> list[float]:
    """Running default rate: 1 - cumulative repayments / cumulative approvals.

    Before the first approval the rate is 0 by convention.
    """
    dec = [int(d) for d in decisions]
    rep = [int(r) for r in repayments]
    if len(dec) != len(rep):
        raise DomainError("decisions and repayments must have equal length")
    out = []
    approvals = repaid = 0
    for d, r in zip(dec, rep):
        if r == 1 and d == 0:
            raise DomainError("repayment recorded without an approval")
        approvals += d
        repaid += r
        out.append(1.0 - repaid / approvals if approvals > 0 else 0.0)
    return out


def adr_group(decisions_by_user: dict, repayments_by_user: dict, members) -> list[float]:
    """Pooled group default rate: 1 - total repayments / total approvals."""
    members = list(members)
    if not members:
        raise DomainError("adr_group requires a nonempty group")
    lengths = {len(decisions_by_user[u]) for u in members}
    if len(lengths) != 1:
        raise DomainError("all members must share the horizon")
    steps = lengths.pop()
    out = []
    approvals = repaid = 0
    for k in range(steps):
        for u in members:
            d = int(decisions_by_user[u][k])
            r = int(repayments_by_user[u][k])
            if r == 1 and d == 0:
                raise DomainError(f"user {u}: repayment without approval at step {k}")
            approvals += d
            repaid += r
        out.append(1.0 - repaid / approvals if approvals > 0 else 0.0)
    return out


def dispersion(series_collection):
    """Per-step sample mean and (n-1) standard deviation across series."""
    arr = np.asarray([[float(v) for v in s] for s in series_collection], dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise DomainError("dispersion requires >= 1 equal-length series")
    mean = arr.mean(axis=0)
    std = arr.std(axis=0, ddof=1) if arr.shape[0] > 1 else np.zeros(arr.shape[1])
    return mean, std


def density_bins(series_collection, bin_width: float):
    """Per-step histogram of values over [0, 1] with fixed bin width.

    Returns (edges, counts) with counts shaped (steps, bins); values equal
    to 1 fall in the last bin.
    """
    if not (0.0 < bin_width <= 1.0):
        raise DomainError(f"bin width must be in (0,1], got {bin_width}")
    arr = np.asarray([[float(v) for v in s] for s in series_collection], dtype=float)
    if arr.ndim != 2:
        raise DomainError("density_bins requires equal-length series")
    n_bins = int(math.ceil(1.0 / bin_width - 1e-12))
    edges = np.minimum(np.arange(n_bins + 1) * bin_width, 1.0)
    counts = np.zeros((arr.shape[1], n_bins), dtype=int)
    for k in range(arr.shape[1]):
        counts[k], _ = np.histogram(arr[:, k], bins=edges)
    return edges, counts
