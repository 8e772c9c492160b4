"""Coin-flipping Bayesian experts paid by a scoring rule.

An expert with a uniform prior on the coin's bias p sees k heads in n flips,
holds the posterior mean q = (k+1)/(n+2), and pays c per flip.  The locally
adaptive expert flips while the one-flip gain Delta >= c; the globally
adaptive one follows the optimal stopping table from backward induction.

Randomness is counter based: draw j of trial i is a hash of (seed, i, j), so
results do not depend on batching or worker count.  Draw 0 is the bias p and
draw j >= 1 decides flip j (heads iff r_j <= p).
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .calculus import normalize_rule
from .errors import HorizonError, ParameterError, RunawayError, StateError
from .index import NormalizationWarning, incentivization_index, load_rule
from .rules import Rule

RUNAWAY_FLIPS = 10**9
HORIZON_DOUBLINGS = 8
CSV_COLUMNS = ("cost", "rule", "avg_error", "predicted_avg_error", "ratio",
               "avg_flips", "max_flips")

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


# ---------------------------------------------------------------------------
# Counter-based uniforms
# ---------------------------------------------------------------------------

def _mix(z):
    """splitmix64 finalizer on uint64 arrays (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _mix_int(z: int) -> int:
    return int(_mix(np.uint64(z & _MASK)))


def stream_keys(seed: int, trials, salt: int = 0) -> np.ndarray:
    """Per-trial 64-bit keys for (seed, trial index, salt)."""
    base = _mix_int((seed & _MASK) ^ _mix_int(salt))
    t = np.asarray(trials, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix(np.uint64(base) + (t + np.uint64(1)) * np.uint64(_GAMMA))


def uniforms(keys: np.ndarray, j) -> np.ndarray:
    """Draw j of each stream, uniform on (0, 1)."""
    j = np.asarray(j, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = _mix(keys ^ _mix(j * np.uint64(_GAMMA) + np.uint64(0x632BE59BD9B4E019)))
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


class CoinStream:
    """The uniforms r_0, r_1, ... of one trial; r_0 is used for the bias."""

    def __init__(self, seed: int, trial: int = 0, salt: int = 0):
        self.key = stream_keys(seed, [trial], salt)
        self.position = 1

    def draw(self, j: int) -> float:
        return float(uniforms(self.key, j)[0])

    def bias(self) -> float:
        return self.draw(0)

    def next(self) -> float:
        r = self.draw(self.position)
        self.position += 1
        return r


# ---------------------------------------------------------------------------
# States and gains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExpertState:
    n: int
    k: int

    def __post_init__(self):
        _check_state(self.n, self.k)

    @property
    def q(self) -> Fraction:
        return Fraction(self.k + 1, self.n + 2)


def _check_state(n, k):
    if not (isinstance(n, (int, np.integer)) and isinstance(k, (int, np.integer))):
        raise StateError(f"state must be integers, got ({n!r}, {k!r})")
    if n < 0 or k < 0 or k > n:
        raise StateError(f"need 0 <= k <= n, got (n, k) = ({n}, {k})")


def posterior_mean(n: int, k: int) -> Fraction:
    """(k+1)/(n+2), exactly."""
    _check_state(n, k)
    return Fraction(k + 1, n + 2)


class RewardRows:
    """Memoized rows R((k+1)/(m+2)) for k = 0..m.

    Local and global experts read the same cached values, which makes their
    decisions comparable bitwise.
    """

    def __init__(self, rule: Rule):
        self.rule = rule
        self._rows: dict[int, np.ndarray] = {}

    def row(self, m: int) -> np.ndarray:
        r = self._rows.get(m)
        if r is None:
            q = np.arange(1, m + 2, dtype=float) / (m + 2)
            r = np.atleast_1d(np.asarray(self.rule.R(q), dtype=float))
            self._rows[m] = r
        return r

    def forget_below(self, m: int):
        for key in [key for key in self._rows if key < m]:
            del self._rows[key]

    def gains(self, n: int) -> np.ndarray:
        """Delta_{n+1} at states (n, k), k = 0..n."""
        q = np.arange(1, n + 2, dtype=float) / (n + 2)
        nxt = self.row(n + 1)
        return q * nxt[1:] + (1 - q) * nxt[:-1] - self.row(n)


def marginal_gain(rule: Rule, n: int, k: int) -> float:
    """Expected reward increase from one more flip at state (n, k).

    q R((k+2)/(n+3)) + (1-q) R((k+1)/(n+3)) - R(q) with q = (k+1)/(n+2).
    """
    _check_state(n, k)
    return float(RewardRows(rule).gains(n)[k])


# ---------------------------------------------------------------------------
# Policies and single trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    p_true: float
    flips: int
    heads: int
    q_final: float
    error: float
    cost_paid: float
    reward_expected: float


def _finish(rule, c, p, n, k) -> Trajectory:
    q = (k + 1) / (n + 2)
    return Trajectory(p, n, k, q, abs(p - q), c * n, float(rule.R(q)))


def _check_cost(c):
    if not (c > 0 and math.isfinite(c)):
        raise ParameterError(f"cost must be positive and finite, got {c}")


def run_local_trajectory(rule: Rule, c: float, p: float, stream: CoinStream,
                         rows: RewardRows | None = None) -> Trajectory:
    """Flip while Delta_{n+1} >= c; heads iff the next stream draw is <= p."""
    _check_cost(c)
    if not 0 < p < 1:
        raise ParameterError(f"p must lie in (0, 1), got {p}")
    rows = rows or RewardRows(rule)
    n = k = 0
    while rows.gains(n)[k] >= c:
        if n >= RUNAWAY_FLIPS:
            raise RunawayError(f"more than {RUNAWAY_FLIPS} flips at cost {c}")
        k += stream.draw(n + 1) <= p
        n += 1
    return _finish(rule, c, p, n, int(k))


def _sup_curvature(rule: Rule) -> float:
    """sup x(1-x)R''(x), sampled; may be large when the sup is infinite."""
    x = np.concatenate([np.geomspace(1e-9, 0.5, 400), np.linspace(0.0, 0.5, 401)[1:]])
    val = x * (1 - x) * np.asarray(rule.R_second(x))
    return float(np.max(val[np.isfinite(val)]))


@dataclass
class StoppingPolicy:
    """Optimal stopping table for states (n, k), 0 <= k <= n <= horizon.

    ``stop[n][k]`` is a boolean row; ``value[n][k]`` the optimal expected
    payoff (reward minus future flip costs) from that state.
    """
    rule: Rule
    cost: float
    horizon: int
    stop: list
    value: list
    rows: RewardRows = field(repr=False)

    @property
    def rule_id(self) -> str:
        return self.rule.label

    def stop_table(self) -> np.ndarray:
        table = np.ones((self.horizon + 1, self.horizon + 1), dtype=bool)
        for n, s in enumerate(self.stop):
            table[n, :n + 1] = s
        return table


def build_global_policy(rule: Rule, c: float, horizon: int | None = None) -> StoppingPolicy:
    """Backward induction from a horizon where no single flip pays.

    The horizon starts at ceil(2 sqrt(D/(2c))) + 16 with D = sup x(1-x)R'',
    and doubles (at most 8 times) until Delta_{N+1}(N, k) < c for every k.
    A state continues only if continuing is strictly better than stopping.
    """
    _check_cost(c)
    rows = RewardRows(rule)
    if horizon is None:
        d = _sup_curvature(rule)
        horizon = int(math.ceil(2 * math.sqrt(d / (2 * c)))) + 16
        for _ in range(HORIZON_DOUBLINGS + 1):
            g = rows.gains(horizon)
            if np.all(g < c):
                break
            horizon *= 2
        else:
            k = int(np.argmax(g))
            raise HorizonError(
                f"one-flip gain still >= c at horizon {horizon} (state ({horizon}, {k}))",
                (horizon, k))
    if horizon > 50_000:
        raise RunawayError(f"horizon {horizon} is too large; cost {c} is effectively zero")
    value = [None] * (horizon + 1)
    stop = [None] * (horizon + 1)
    value[horizon] = rows.row(horizon).copy()
    stop[horizon] = np.ones(horizon + 1, dtype=bool)
    for n in range(horizon - 1, -1, -1):
        q = np.arange(1, n + 2, dtype=float) / (n + 2)
        nxt = value[n + 1]
        r = rows.row(n)
        gain = q * nxt[1:] + (1 - q) * nxt[:-1] - r
        cont = gain > c
        stop[n] = ~cont
        value[n] = r + np.where(cont, gain - c, 0.0)
    return StoppingPolicy(rule, float(c), horizon, stop, value, rows)


def run_global_trajectory(policy: StoppingPolicy, p: float, stream: CoinStream) -> Trajectory:
    """Follow the stop table from (0, 0) with the same coin semantics."""
    if not 0 < p < 1:
        raise ParameterError(f"p must lie in (0, 1), got {p}")
    n = k = 0
    while not policy.stop[n][k]:
        k += stream.draw(n + 1) <= p
        n += 1
    return _finish(policy.rule, policy.cost, p, n, int(k))


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    rule: str
    cost: float
    trials: int
    seed: int
    mode: str = "local"
    ells: tuple = (1.0,)
    p_mode: str | float = "uniform"
    coupling: bool = False
    workers: int = 1

    def __post_init__(self):
        _check_cost(self.cost)
        if not (isinstance(self.trials, (int, np.integer)) and self.trials >= 1):
            raise ParameterError(f"trials must be an integer >= 1, got {self.trials!r}")
        if self.mode not in ("local", "global"):
            raise ParameterError(f"mode must be 'local' or 'global', got {self.mode!r}")
        if not self.ells or any(not ell >= 1 for ell in self.ells):
            raise ParameterError(f"ells must be a nonempty list of reals >= 1, got {self.ells!r}")
        if self.p_mode != "uniform" and not (isinstance(self.p_mode, (int, float))
                                             and 0 < self.p_mode < 1):
            raise ParameterError(f"p_mode must be 'uniform' or a bias in (0, 1), got {self.p_mode!r}")
        if not (isinstance(self.workers, int) and self.workers >= 1):
            raise ParameterError(f"workers must be a positive integer, got {self.workers!r}")
        if not isinstance(self.seed, (int, np.integer)):
            raise ParameterError(f"seed must be an integer, got {self.seed!r}")
        object.__setattr__(self, "ells", tuple(float(e) for e in self.ells))

    def salt(self) -> int:
        """0 for common random numbers; otherwise depends on rule and mode."""
        if self.coupling:
            return 0
        return zlib.crc32(f"{self.rule}|{self.mode}".encode())


@dataclass(frozen=True)
class ErrorStat:
    ell: float
    mean_error: float
    std_error: float
    predicted: float
    ratio: float


@dataclass(frozen=True)
class SimReport:
    rule: str
    cost: float
    trials: int
    seed: int
    mode: str
    coupling: bool
    errors: tuple
    avg_flips: float
    max_flips: int
    min_flips: int

    def stat(self, ell: float = 1.0) -> ErrorStat:
        for s in self.errors:
            if s.ell == ell:
                return s
        raise KeyError(ell)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["errors"] = [asdict(s) for s in self.errors]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def csv_row(self, ell: float = 1.0) -> list:
        s = self.stat(ell)
        return [repr(self.cost), self.rule, repr(s.mean_error), repr(s.predicted),
                repr(s.ratio), repr(self.avg_flips), str(self.max_flips)]

    def to_csv(self, ell: float = 1.0, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(CSV_COLUMNS)
        w.writerow(self.csv_row(ell))
        return buf.getvalue()


def _prepare_rule(rule) -> Rule:
    if isinstance(rule, str):
        return load_rule(rule)
    if not rule.normalized:
        warnings.warn(f"rule {rule.label} is not normalized; normalizing before use",
                      NormalizationWarning, stacklevel=3)
        rule = normalize_rule(rule)[0]
    return rule


def _simulate_block(trials: np.ndarray, keys: np.ndarray, p: np.ndarray, decide) -> tuple:
    """Lockstep simulation of a block of trials; returns (flips, heads)."""
    flips = np.zeros(len(trials), dtype=np.int64)
    heads = np.zeros(len(trials), dtype=np.int64)
    active = np.arange(len(trials))
    n = 0
    while len(active):
        go = decide(n, heads[active])
        active = active[go]
        if not len(active):
            break
        if n >= RUNAWAY_FLIPS:
            raise RunawayError(f"trajectory exceeded {RUNAWAY_FLIPS} flips")
        r = uniforms(keys[active], n + 1)
        heads[active] += r <= p[active]
        flips[active] += 1
        n += 1
    return flips, heads


class _LocalDecider:
    """Flip decisions Delta >= c, computed one row per step."""

    def __init__(self, rows: RewardRows, c: float):
        self.rows, self.c = rows, c
        self._cache: dict[int, np.ndarray] = {}

    def __call__(self, n, k):
        go = self._cache.get(n)
        if go is None:
            go = self.rows.gains(n) >= self.c
            self._cache[n] = go
        return go[k]


def monte_carlo(config: SimConfig, rule: Rule | None = None) -> SimReport:
    """Estimate E|p - q|^l for each l, with flip statistics and predictions.

    Trials run in ``config.workers`` contiguous blocks; per-trial results are
    independent of the blocking and are reduced in trial order, so the report
    is bitwise reproducible.
    """
    rule = _prepare_rule(rule if rule is not None else config.rule)
    c = config.cost
    rows = RewardRows(rule)
    if config.mode == "global":
        policy = build_global_policy(rule, c)
        table = policy.stop_table()
        decide = lambda n, k: ~table[n, k]  # noqa: E731
    else:
        decider = _LocalDecider(rows, c)
        for n in range(0, 1 << 16):  # warm rows so workers only read
            if not np.any(decider(n, np.arange(n + 1))):
                break
        decide = decider

    idx = np.arange(config.trials, dtype=np.int64)
    keys = stream_keys(config.seed, idx, config.salt())
    if config.p_mode == "uniform":
        p = uniforms(keys, 0)
    else:
        p = np.full(config.trials, float(config.p_mode))

    blocks = np.array_split(idx, config.workers)
    work = lambda b: _simulate_block(b, keys[b], p[b], decide)  # noqa: E731
    if config.workers == 1:
        results = [work(blocks[0])]
    else:
        with ThreadPoolExecutor(config.workers) as pool:
            results = list(pool.map(work, blocks))
    flips = np.concatenate([r[0] for r in results])
    heads = np.concatenate([r[1] for r in results])

    q = (heads + 1) / (flips + 2)
    err = np.abs(p - q)
    stats = []
    for ell in config.ells:
        e = err ** ell
        mean = float(np.mean(e))
        se = float(np.std(e, ddof=1) / math.sqrt(len(e))) if len(e) > 1 else 0.0
        rep = incentivization_index(rule, ell)
        pred = rep.predicted_error_coeff * c ** (ell / 4)
        stats.append(ErrorStat(ell, mean, se, pred, mean / pred))
    return SimReport(str(config.rule) if isinstance(config.rule, str) else rule.label,
                     float(c), int(config.trials), int(config.seed), config.mode,
                     bool(config.coupling), tuple(stats), float(np.mean(flips)),
                     int(np.max(flips)), int(np.min(flips)))


def simulate_trials(rule: Rule, c: float, trials: int, seed: int, mode: str = "local",
                    salt: int = 0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(p, flips, heads) arrays for coupled comparisons between experts."""
    rule = _prepare_rule(rule)
    idx = np.arange(trials, dtype=np.int64)
    keys = stream_keys(seed, idx, salt)
    p = uniforms(keys, 0)
    if mode == "global":
        table = build_global_policy(rule, c).stop_table()
        decide = lambda n, k: ~table[n, k]  # noqa: E731
    else:
        decide = _LocalDecider(RewardRows(rule), c)
    flips, heads = _simulate_block(idx, keys, p, decide)
    return p, flips, heads
