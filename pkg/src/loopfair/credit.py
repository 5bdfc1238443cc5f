"""Credit-scoring case study: census-style income sampling, a latent
repayment model, a yearly retrained logistic scorecard with a cut-off, and
the multi-trial experiment protocol.

All money is in thousands of dollars. Each simulated year, every household
draws an income from its (year, race) bin distribution; the latent state is
the income fraction left after living cost and mortgage interest, and
repayment of an approved mortgage is Bernoulli in the normal CDF of that
state. From year 2 on, a scorecard fitted to the previous year's approved
outcomes decides approvals by comparing the linear score to a cut-off.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DomainError
from .metrics import ImpactReport, adr_group, density_bins, dispersion
from .numerics import LogitModel, SeededRng, categorical_many, fit_logit, logit_score, std_normal_cdf

RACES = ("BLACK ALONE", "WHITE ALONE", "ASIAN ALONE")
RACE_DISTRIBUTION = (0.1235, 0.8406, 0.0359)


@dataclass(frozen=True)
class SimConfig:
    users: int = 1000
    start_year: int = 2002
    end_year: int = 2020
    races: tuple[str, ...] = RACES
    race_distribution: tuple[float, ...] = RACE_DISTRIBUTION
    mortgage_multiple: float = 3.5
    annual_rate: float = 0.0216
    living_cost: float = 10.0
    income_code_threshold: float = 15.0
    bernoulli_slope: float = 5.0
    cutoff: float = 0.4
    free_approval_steps: int = 2
    trials: int = 5
    l2_lambda: float = 1e-4
    top_bin_cap: float = 300.0
    include_denied_as_default: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.users < 1 or self.trials < 1:
            raise DomainError("users and trials must be >= 1")
        if self.end_year < self.start_year:
            raise DomainError("end_year must be >= start_year")
        if len(self.races) != len(self.race_distribution):
            raise DomainError("race labels and distribution lengths differ")
        if abs(sum(self.race_distribution) - 1.0) > 1e-9:
            raise DomainError("race distribution must sum to 1")
        if not (0.0 <= self.annual_rate <= 1.0) or self.living_cost < 0:
            raise DomainError("rates and costs out of range")
        if self.l2_lambda < 0 or self.free_approval_steps < 0:
            raise DomainError("l2_lambda and free_approval_steps must be nonnegative")

    @property
    def years(self) -> list[int]:
        return list(range(self.start_year, self.end_year + 1))


@dataclass(frozen=True)
class IncomeTable:
    """Binned income shares keyed by (year, race). Open-top bins carry
    upper = nan and are sampled uniformly up to the configured cap."""

    bins: dict  # (year, race) -> (lowers, uppers, shares) float arrays

    def ensure_coverage(self, years, races):
        missing = [(y, r) for y in years for r in races if (y, r) not in self.bins]
        if missing:
            raise DataError(f"income table missing (year, race) entries: {missing[:5]}"
                            + ("..." if len(missing) > 5 else ""))


def load_income_table(path, years=None, races=None) -> IncomeTable:
    """Load and validate the income CSV (header: year,race,bin_lower,
    bin_upper,share; empty bin_upper marks an open-top bin)."""
    rows = []
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            expected = ["year", "race", "bin_lower", "bin_upper", "share"]
            if reader.fieldnames != expected:
                raise DataError(f"{path}: expected header {expected}, got {reader.fieldnames}")
            for lineno, row in enumerate(reader, start=2):
                try:
                    year = int(row["year"])
                    race = row["race"]
                    lower = float(row["bin_lower"])
                    upper = float(row["bin_upper"]) if row["bin_upper"].strip() else math.nan
                    share = float(row["share"])
                except (TypeError, ValueError) as exc:
                    raise DataError(f"{path}:{lineno}: {exc}") from exc
                if share < 0:
                    raise DataError(f"{path}:{lineno}: negative share {share}")
                if not math.isnan(upper) and upper <= lower:
                    raise DataError(f"{path}:{lineno}: bin upper {upper} <= lower {lower}")
                rows.append((year, race, lower, upper, share))
    except OSError as exc:
        raise DataError(f"cannot read income table {path}: {exc}") from exc

    table: dict = {}
    for year, race, lower, upper, share in rows:
        table.setdefault((year, race), []).append((lower, upper, share))
    bins = {}
    for key, entries in table.items():
        entries.sort(key=lambda t: t[0])
        lowers = np.array([e[0] for e in entries])
        uppers = np.array([e[1] for e in entries])
        shares = np.array([e[2] for e in entries])
        if abs(float(shares.sum()) - 1.0) > 1e-6:
            raise DataError(f"{path}: shares for {key} sum to {shares.sum()}, not 1")
        for i in range(len(entries) - 1):
            hi = uppers[i]
            if math.isnan(hi):
                raise DataError(f"{path}: open-top bin not last for {key}")
            if hi > lowers[i + 1] + 1e-12:
                raise DataError(f"{path}: overlapping bins for {key}")
        bins[key] = (lowers, uppers, shares)
    result = IncomeTable(bins=bins)
    if years is not None and races is not None:
        result.ensure_coverage(years, races)
    return result


def sample_income(table: IncomeTable, year: int, race: str, rng: SeededRng,
                  top_bin_cap: float = 300.0) -> float:
    return float(sample_incomes(table, year, race, 1, rng, top_bin_cap)[0])


def sample_incomes(table: IncomeTable, year: int, race: str, n: int,
                   rng: SeededRng, top_bin_cap: float = 300.0) -> np.ndarray:
    """Draw n incomes: bin by share, then uniform within the bin (open-top
    bins are uniform on [lower, cap])."""
    key = (year, race)
    if key not in table.bins:
        raise DomainError(f"income table has no entry for {key}")
    lowers, uppers, shares = table.bins[key]
    idx = categorical_many(shares, n, rng)
    lo = lowers[idx]
    hi = np.where(np.isnan(uppers[idx]), top_bin_cap, uppers[idx])
    u = np.asarray(rng.uniform(n))
    return lo + u * (hi - lo)


def latent_state(z: float, config: SimConfig) -> float:
    """Income fraction left after living cost and mortgage interest."""
    if not z > 0:
        raise DomainError(f"income must be positive, got {z}")
    return (z - config.living_cost
            - config.mortgage_multiple * config.annual_rate * z) / z


def latent_states(z: np.ndarray, config: SimConfig) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise DomainError("incomes must be positive")
    return (z - config.living_cost
            - config.mortgage_multiple * config.annual_rate * z) / z


def repayment(x: float, decision: int, config: SimConfig, rng: SeededRng) -> int:
    """0 if denied or below break-even, else Bernoulli(F(slope * x))."""
    return int(repayments(np.array([x]), np.array([decision]), config, rng)[0])


def repayments(x: np.ndarray, decisions: np.ndarray, config: SimConfig,
               rng: SeededRng) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    decisions = np.asarray(decisions, dtype=int)
    p = np.array([std_normal_cdf(config.bernoulli_slope * xi) for xi in x])
    u = np.asarray(rng.uniform(x.size))
    return ((decisions == 1) & (x > 0) & (u < p)).astype(int)


@dataclass(frozen=True)
class ScorecardModel:
    """Logistic scorecard over (previous default rate, income code) with a
    decision cut-off on the raw linear score; approve_all marks the
    fallback used when training labels are degenerate."""

    model: LogitModel
    cutoff: float
    approve_all: bool = False


def income_code(z, threshold: float = 15.0):
    """Indicator of income strictly above the threshold (Table-style code)."""
    return (np.asarray(z, dtype=float) > threshold).astype(int)


def train_scorecard(prev_adr, codes, repaid, config: SimConfig) -> ScorecardModel:
    """Fit the yearly scorecard on (previous ADR, income code) -> repaid.

    With empty history or single-valued labels the logistic MLE is
    undefined, so the fallback approves everyone for that year.
    """
    y = np.asarray(repaid, dtype=int)
    if y.size == 0 or len(set(y.tolist())) < 2:
        return ScorecardModel(model=LogitModel(weights=np.zeros(2)),
                              cutoff=config.cutoff, approve_all=True)
    X = np.column_stack([np.asarray(prev_adr, dtype=float),
                         np.asarray(codes, dtype=float)])
    model = fit_logit(X, y, l2_lambda=config.l2_lambda)
    return ScorecardModel(model=model, cutoff=config.cutoff)


def decide(scorecard: ScorecardModel, z: float, prev_adr: float,
           config: SimConfig) -> tuple[int, float]:
    """Approve iff the linear score strictly exceeds the cut-off."""
    code = float(income_code(z, config.income_code_threshold))
    score = logit_score(scorecard.model, np.array([prev_adr, code]))
    if scorecard.approve_all:
        return 1, score
    return int(score > scorecard.cutoff), score


@dataclass
class TrialResult:
    years: list[int]
    races: list[str]  # per user
    incomes: np.ndarray  # (steps, users)
    decisions: np.ndarray  # (steps, users) int
    repaid: np.ndarray  # (steps, users) int
    scores: np.ndarray  # (steps, users), nan during free-approval years
    adr_users: np.ndarray  # (steps, users) running default rate
    group_adr: dict  # race -> list of per-step pooled default rates


def run_trial(config: SimConfig, table: IncomeTable, rng: SeededRng) -> TrialResult:
    """One trial: a fresh batch of users pushed through the yearly loop."""
    years = config.years
    steps = len(years)
    n = config.users
    table.ensure_coverage(years, config.races)

    race_idx = categorical_many(config.race_distribution, n, rng.substream(0))
    races = [config.races[i] for i in race_idx]

    incomes = np.zeros((steps, n))
    decisions = np.zeros((steps, n), dtype=int)
    repaid = np.zeros((steps, n), dtype=int)
    scores = np.full((steps, n), np.nan)
    adr_users = np.zeros((steps, n))

    approvals = np.zeros(n, dtype=int)
    repayments_cum = np.zeros(n, dtype=int)

    for k, year in enumerate(years):
        # incomes for this year, drawn per race group in fixed race order
        z = np.zeros(n)
        for ri, race in enumerate(config.races):
            members = np.flatnonzero(race_idx == ri)
            if members.size:
                z[members] = sample_incomes(table, year, race, members.size,
                                            rng.substream(1, k, ri), config.top_bin_cap)
        incomes[k] = z

        prev_adr = adr_users[k - 1] if k > 0 else np.zeros(n)
        if k < config.free_approval_steps or k == 0:
            # no observable history at k=0 even without free approvals
            decisions[k] = 1
        else:
            # scorecard trained on last year's observable outcomes:
            # features (ADR(k-2), code z(k-1)), labels y(k-1)
            feat_adr = adr_users[k - 2] if k >= 2 else np.zeros(n)
            feat_code = income_code(incomes[k - 1], config.income_code_threshold)
            if config.include_denied_as_default:
                mask = np.ones(n, dtype=bool)
            else:
                mask = decisions[k - 1] == 1
            scorecard = train_scorecard(feat_adr[mask], feat_code[mask],
                                        repaid[k - 1][mask], config)
            for i in range(n):
                decisions[k, i], scores[k, i] = decide(
                    scorecard, float(z[i]), float(prev_adr[i]), config)

        x = latent_states(z, config)
        repaid[k] = repayments(x, decisions[k], config, rng.substream(2, k))

        approvals += decisions[k]
        repayments_cum += repaid[k]
        with np.errstate(divide="ignore", invalid="ignore"):
            adr = np.where(approvals > 0, 1.0 - repayments_cum / np.maximum(approvals, 1), 0.0)
        adr_users[k] = adr

    group_adr = {}
    for ri, race in enumerate(config.races):
        members = np.flatnonzero(race_idx == ri).tolist()
        if not members:
            group_adr[race] = [0.0] * steps
            continue
        dec = {u: decisions[:, u].tolist() for u in members}
        rep = {u: repaid[:, u].tolist() for u in members}
        group_adr[race] = adr_group(dec, rep, members)

    return TrialResult(years=years, races=races, incomes=incomes,
                       decisions=decisions, repaid=repaid, scores=scores,
                       adr_users=adr_users, group_adr=group_adr)


@dataclass
class ExperimentResult:
    trials: list[TrialResult]
    group_mean: dict  # race -> per-step mean across trials
    group_std: dict  # race -> per-step (n-1) std across trials
    density_edges: np.ndarray
    density_counts: np.ndarray  # (steps, bins) over all users and trials
    impact: ImpactReport


def run_experiment(config: SimConfig, table: IncomeTable,
                   bin_width: float = 0.05, epsilon: float = 0.02) -> ExperimentResult:
    """Run the configured number of independent trials and aggregate the
    race-level dispersion, the user-level density, and the impact report."""
    rng = SeededRng(config.seed)
    trials = [run_trial(config, table, rng.substream(t)) for t in range(config.trials)]

    group_mean, group_std = {}, {}
    for race in config.races:
        series = [t.group_adr[race] for t in trials]
        mean, std = dispersion(series)
        group_mean[race] = mean
        group_std[race] = std

    all_user_series = [t.adr_users[:, u] for t in trials for u in range(config.users)]
    edges, counts = density_bins(all_user_series, bin_width)

    per_trial_group = [{race: t.group_adr[race][-1] for race in config.races}
                       for t in trials]
    coincidence = max(max(g.values()) - min(g.values()) for g in per_trial_group)
    cross = max(
        max(g[race] for g in per_trial_group) - min(g[race] for g in per_trial_group)
        for race in config.races
    )
    impact = ImpactReport(
        user_means=per_trial_group, group_means=per_trial_group,
        coincidence_spread=coincidence, group_spread=coincidence,
        initial_condition_spread=cross, epsilon=epsilon,
    )
    return ExperimentResult(trials=trials, group_mean=group_mean, group_std=group_std,
                            density_edges=edges, density_counts=counts, impact=impact)
