"""Exact stochastic simulation oracles for the analytic solvers.

Each replicate draws from its own Philox stream keyed by ``(seed, oracle, replicate)``,
so results are bit-reproducible for a fixed seed and replicate count and do not
depend on the order in which replicates are run.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from numba import njit

from .errors import InvalidParameter, NoConvergence, WindowTooShort
from .finite import moran_rates, moran_stationary
from .params import FiniteParams

N_BATCHES = 32

# stream tags, one per oracle
_MORAN, _LINES, _KILLED, _IPS = 1, 2, 3, 4


@dataclass(frozen=True)
class SimConfig:
    """Run control shared by all oracles.

    Exactly one of ``events`` (jump count) or ``horizon`` (model time) is
    used, depending on the oracle; ``burn_in`` is the discarded leading
    fraction (for the ancestral tracer it is trimmed at both ends).
    """

    seed: int = 0
    events: int | None = None
    horizon: float | None = None
    burn_in: float = 0.1
    replicates: int = 1
    batches: int = N_BATCHES

    def validate(self) -> "SimConfig":
        if self.replicates < 1:
            raise InvalidParameter(f"replicates must be >= 1, got {self.replicates}")
        if not 0.0 <= self.burn_in <= 0.9:
            raise InvalidParameter(f"burn_in must lie in [0, 0.9], got {self.burn_in}")
        if self.batches < 2:
            raise InvalidParameter(f"need at least 2 batches, got {self.batches}")
        if self.events is not None and self.events < 1:
            raise InvalidParameter(f"events must be positive, got {self.events}")
        if self.horizon is not None and not self.horizon > 0:
            raise InvalidParameter(f"horizon must be positive, got {self.horizon}")
        return self


@dataclass(frozen=True)
class SimEstimate:
    """Monte Carlo point estimate; ``value`` and ``stderr`` may be arrays."""

    value: float | np.ndarray
    stderr: float | np.ndarray
    n: int
    estimator: str = ""
    batch_values: np.ndarray | None = field(default=None, repr=False, compare=False)

    def derived(self, weights) -> "SimEstimate":
        """Estimate of ``value @ weights`` with stderr from the same batches."""
        if self.batch_values is None:
            raise ValueError("no batch values recorded")
        x = self.batch_values @ np.asarray(weights, dtype=float)
        return SimEstimate(float(x.mean()), float(batch_mean_se(x)), self.n, self.estimator, x)

    def z(self, exact) -> float | np.ndarray:
        """Standardised deviation from ``exact``; infinite where the stderr is zero but values differ."""
        diff = np.asarray(self.value, dtype=float) - np.asarray(exact, dtype=float)
        se = np.asarray(self.stderr, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(se > 0, diff / np.where(se > 0, se, 1.0), np.where(diff == 0, 0.0, np.inf))
        return out if out.ndim else float(out)


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for the substream ``(seed, *keys)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


def batch_mean_se(values: np.ndarray) -> float | np.ndarray:
    """Standard error of the mean of independent(ish) batch values along axis 0."""
    values = np.asarray(values, dtype=float)
    B = values.shape[0]
    return values.std(axis=0, ddof=1) / math.sqrt(B)


def ratio_se(num: np.ndarray, den: np.ndarray) -> float:
    """Delta-method standard error of ``sum(num) / sum(den)`` from batch totals."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    B = len(num)
    tot = den.sum()
    if tot <= 0:
        return float("nan")
    r = num.sum() / tot
    resid = num - r * den
    return float(math.sqrt(B / (B - 1) * np.sum(resid**2)) / tot)


# --- Moran birth-death chain -------------------------------------------------


_CHUNK = 1 << 20


@njit(cache=True)
def _moran_kernel(up, down, k, unif, expo, offset, burn, span, occ):
    nb = occ.shape[0]
    for i in range(unif.shape[0]):
        rate = up[k] + down[k]
        g = offset + i
        if g >= burn:
            occ[(g - burn) * nb // span, k] += expo[i] / rate
        if unif[i] * rate < up[k]:
            k += 1
        else:
            k -= 1
    return k


def _chunks(n_ev: int):
    for off in range(0, n_ev, _CHUNK):
        yield off, min(_CHUNK, n_ev - off)


def simulate_moran(p: FiniteParams, cfg: SimConfig) -> SimEstimate:
    """Time-weighted occupation frequencies of the type-1 count after burn-in.

    ``cfg.events`` counts post-burn-in jumps per replicate; ``value[k]``
    estimates ``pi[k]`` with batch-means stderr.
    """
    p.validate()
    cfg.validate()
    kept = cfg.events or 10**6
    burn = int(round(kept * cfg.burn_in / (1.0 - cfg.burn_in)))
    n_ev = kept + burn
    up, down = moran_rates(p)
    batch_frac = []
    for r in range(cfg.replicates):
        g = stream(cfg.seed, _MORAN, r)
        occ = np.zeros((cfg.batches, p.N + 1))
        k = p.N // 2
        for off, m in _chunks(n_ev):
            k = _moran_kernel(up, down, k, g.random(m), g.standard_exponential(m), off, burn, kept, occ)
        batch_frac.append(occ / occ.sum(axis=1, keepdims=True))
    fr = np.concatenate(batch_frac)
    return SimEstimate(
        value=fr.mean(axis=0),
        stderr=batch_mean_se(fr),
        n=kept * cfg.replicates,
        estimator="time-weighted occupation of Y after burn-in, batch means",
        batch_values=fr,
    )


def total_variation(p_hat, p_exact) -> float:
    return 0.5 * float(np.abs(np.asarray(p_hat) - np.asarray(p_exact)).sum())


# --- line-counting chain of the pruned lookdown ASG -------------------------


def line_counting_rates(p: FiniteParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(up, down, jump)`` for ``n = 0..N``; ``jump`` is the per-target rate to each ``j <= n-2``."""
    N = p.N
    n = np.arange(N + 1, dtype=float)
    up = p.s * n * (N - n) / N
    down = n * (n - 1) / N + p.u * p.nu1 * np.maximum(n - 1, 0) + p.u * p.nu0 * (n > 1)
    jump = np.full(N + 1, p.u * p.nu0)
    up[0] = down[0] = jump[0] = 0.0
    return up, down, jump


@njit(cache=True)
def _lines_kernel(up, down, jump, n, unif, expo, offset, burn, span, occ, counts):
    """Advance the line count over one chunk; returns the new state, or -1 once absorbed."""
    nb = occ.shape[0]
    for i in range(unif.shape[0]):
        n_jump = n - 2 if n > 2 else 0
        rate = up[n] + down[n] + jump[n] * n_jump
        if rate == 0.0:
            # absorbing: every batch sees only this state
            for b in range(nb):
                occ[b, n] += 1.0
            return -1
        g = offset + i
        if g >= burn:
            occ[(g - burn) * nb // span, n] += expo[i] / rate
        x = unif[i] * rate
        if x < up[n]:
            counts[n, 0] += 1
            n += 1
        elif x < up[n] + down[n]:
            counts[n, 1] += 1
            n -= 1
        else:
            counts[n, 2] += 1
            j = 1 + int((x - up[n] - down[n]) / jump[n])
            if j > n - 2:
                j = n - 2
            n = j
    return n


@dataclass(frozen=True)
class LineCountingResult:
    w: SimEstimate
    a: SimEstimate
    transition_counts: np.ndarray  # [n, class]: up, down-by-one, jump to j <= n-2


def simulate_line_counting(p: FiniteParams, cfg: SimConfig) -> LineCountingResult:
    """Empirical stationary law of the line count (started from a single line)."""
    p.validate()
    cfg.validate()
    kept = cfg.events or 10**6
    burn = int(round(kept * cfg.burn_in / (1.0 - cfg.burn_in)))
    n_ev = kept + burn
    up, down, jump = line_counting_rates(p)
    fracs, counts = [], np.zeros((p.N + 1, 3), dtype=np.int64)
    for r in range(cfg.replicates):
        g = stream(cfg.seed, _LINES, r)
        occ = np.zeros((cfg.batches, p.N + 1))
        n = 1
        for off, m in _chunks(n_ev):
            n = _lines_kernel(up, down, jump, n, g.random(m), g.standard_exponential(m), off, burn, kept, occ, counts)
            if n < 0:
                break
        fracs.append(occ / occ.sum(axis=1, keepdims=True))
    fr = np.concatenate(fracs)
    # tails a[n] = P(L > n)
    tails = fr[:, ::-1].cumsum(axis=1)[:, ::-1]
    tails = np.concatenate([tails[:, 1:], np.zeros((fr.shape[0], 1))], axis=1)
    n_used = kept * cfg.replicates
    est = "time-weighted occupation of L after burn-in, batch means"
    return LineCountingResult(
        w=SimEstimate(fr.mean(axis=0), batch_mean_se(fr), n_used, est, fr),
        a=SimEstimate(tails.mean(axis=0), batch_mean_se(tails), n_used, est, tails),
        transition_counts=counts,
    )


# --- killed ASG ---------------------------------------------------------------

_BLOCK = 4096


def _killed_block(p: FiniteParams, n0: int, size: int, g: np.random.Generator, max_steps: int) -> int:
    """Number of ``size`` killed-ASG chains from ``n0`` that absorb in 0 (jump chain only)."""
    N = p.N
    n = np.full(size, n0, dtype=np.int64)
    hits = 0
    for _ in range(max_steps):
        if n.size == 0:
            return hits
        nf = n.astype(float)
        up = p.s * nf * (N - nf) / N
        down = nf * (nf - 1) / N + p.u * p.nu1 * nf
        kill = p.u * p.nu0 * nf
        x = g.random(n.size) * (up + down + kill)
        n = np.where(x < up, n + 1, np.where(x < up + down, n - 1, -1))
        hits += int(np.count_nonzero(n == 0))
        n = n[n > 0]
    raise NoConvergence(f"{n.size} killed-ASG chains unabsorbed after {max_steps} steps")


def simulate_killed_asg(p: FiniteParams, n0: int, cfg: SimConfig, max_steps: int = 10**6) -> SimEstimate:
    """Fraction of killed-ASG line-counting chains from ``n0`` lines absorbed at 0.

    ``cfg.replicates`` is the number of independent chains; they are run in
    blocks of 4096, block ``i`` drawing from substream ``(seed, i)``.
    """
    p.validate()
    cfg.validate()
    if not 1 <= n0 <= p.N:
        raise InvalidParameter(f"need 1 <= n0 <= N, got {n0}")
    total, hits = cfg.replicates, 0
    for blk, start in enumerate(range(0, total, _BLOCK)):
        size = min(_BLOCK, total - start)
        hits += _killed_block(p, n0, size, stream(cfg.seed, _KILLED, blk), max_steps)
    phat = hits / total
    return SimEstimate(
        value=phat,
        stderr=math.sqrt(max(phat * (1 - phat), 0.0) / total),
        n=total,
        estimator="absorption frequency at 0, binomial stderr",
    )


# --- typed interacting particle system and ancestral tracing ---------------

NEUTRAL, SELECTIVE, BENEFICIAL, DELETERIOUS = 0, 1, 2, 3
KIND_NAMES = ("neutral", "selective", "beneficial", "deleterious")


@njit(cache=True)
def _propagate_types(types, kind, src, tgt, aux):
    """Run types forward; fill ``aux`` with the used-flag (arrows) or prior type (marks)."""
    for i in range(kind.shape[0]):
        k = kind[i]
        a = src[i]
        if k == 0:
            aux[i] = 1
            types[tgt[i]] = types[a]
        elif k == 1:
            if types[a] == 0:
                aux[i] = 1
                types[tgt[i]] = 0
            else:
                aux[i] = 0
        elif k == 2:
            aux[i] = types[a]
            types[a] = 0
        else:
            aux[i] = types[a]
            types[a] = 1
    return types


@njit(cache=True)
def _trace_back(times, kind, src, tgt, aux, start, start_type, t0, t1, nb):
    """Follow one lineage backward; tally ancestral type changes and type-1 time per batch.

    Returns ``(n10, n01, time1, mismatches)``; ``mismatches`` counts marks
    whose recorded type disagrees with the traced type (a replay error).
    """
    n10 = np.zeros(nb)
    n01 = np.zeros(nb)
    time1 = np.zeros(nb)
    width = (t1 - t0) / nb
    pos = start
    cur = start_type
    seg_end = times[-1] if times.shape[0] > 0 else t1
    if seg_end < t1:
        seg_end = t1
    mismatches = 0
    for i in range(times.shape[0] - 1, -1, -1):
        k = kind[i]
        if k <= 1:
            if aux[i] == 1 and tgt[i] == pos:
                pos = src[i]
            continue
        if src[i] != pos:
            continue
        new = 1 if k == 3 else 0
        if new != cur:
            mismatches += 1
        prior = aux[i]
        if prior == new:
            continue
        t = times[i]
        if cur == 1:
            _add_interval(time1, t, seg_end, t0, width, nb)
        if t0 <= t < t1:
            b = int((t - t0) / width)
            if b >= nb:
                b = nb - 1
            if prior == 1:
                n10[b] += 1
            else:
                n01[b] += 1
        seg_end = t
        cur = prior
    if cur == 1:
        _add_interval(time1, 0.0, seg_end, t0, width, nb)
    return n10, n01, time1, mismatches


@njit(cache=True)
def _add_interval(acc, lo, hi, t0, width, nb):
    for b in range(nb):
        blo = t0 + b * width
        bhi = blo + width
        x = (hi if hi < bhi else bhi) - (lo if lo > blo else blo)
        if x > 0:
            acc[b] += x


@dataclass
class EventLog:
    """Untyped IPS realisation on ``[0, horizon]`` plus its forward typing.

    Lines are 0-based in memory and 1-based in the text dump. ``aux`` holds
    the used-flag for arrows (1 iff the source was fit) and the prior type
    of the line for mutation marks.
    """

    N: int
    horizon: float
    times: np.ndarray
    kind: np.ndarray
    src: np.ndarray
    tgt: np.ndarray
    initial_types: np.ndarray
    aux: np.ndarray = field(default=None)
    final_types: np.ndarray = field(default=None)

    def __len__(self) -> int:
        return len(self.times)

    def dump(self, fh=None) -> str | None:
        """Write one event per line: ``time kind source target flag``; marks have target ``-``."""
        out = io.StringIO() if fh is None else fh
        out.write(f"# N={self.N} horizon={float(self.horizon)!r}\n")
        out.write("# initial " + "".join(str(int(x)) for x in self.initial_types) + "\n")
        for t, k, a, b, f in zip(self.times, self.kind, self.src, self.tgt, self.aux):
            target = str(int(b) + 1) if k <= SELECTIVE else "-"
            out.write(f"{float(t)!r} {KIND_NAMES[k]} {int(a) + 1} {target} {int(f)}\n")
        return out.getvalue() if fh is None else None

    @classmethod
    def load(cls, lines: Iterable[str]) -> "EventLog":
        rows = []
        N = horizon = init = None
        for line in lines:
            line = line.strip()
            if not line:
                continue
            if line.startswith("# N="):
                head = dict(tok.split("=") for tok in line[2:].split())
                N, horizon = int(head["N"]), float(head["horizon"])
                continue
            if line.startswith("# initial "):
                init = np.array([int(c) for c in line.split()[2]], dtype=np.int8)
                continue
            t, k, a, b, f = line.split()
            rows.append((float(t), KIND_NAMES.index(k), int(a) - 1, -1 if b == "-" else int(b) - 1, int(f)))
        arr = list(zip(*rows)) if rows else [[], [], [], [], []]
        log = cls(
            N=N,
            horizon=horizon,
            times=np.array(arr[0], dtype=float),
            kind=np.array(arr[1], dtype=np.int8),
            src=np.array(arr[2], dtype=np.int32),
            tgt=np.array([max(x, 0) for x in arr[3]], dtype=np.int32),
            initial_types=init,
            aux=np.array(arr[4], dtype=np.int8),
        )
        return log

    def replay(self) -> int:
        """Re-propagate types from the initial configuration; return the number of flag mismatches."""
        aux = np.empty_like(self.kind)
        _propagate_types(self.initial_types.copy(), self.kind, self.src, self.tgt, aux)
        return int(np.count_nonzero(aux != self.aux))


def simulate_ips(p: FiniteParams, horizon: float, g: np.random.Generator) -> EventLog:
    """Untyped Moran IPS on ``[0, horizon]`` with stationary initial types, then typed forward."""
    N = p.N
    rates = np.array([N * 1.0, N * p.s, N * p.u * p.nu0, N * p.u * p.nu1])
    total = rates.sum()
    n_ev = int(g.poisson(total * horizon))
    times = np.sort(g.random(n_ev)) * horizon
    kind = g.choice(4, size=n_ev, p=rates / total).astype(np.int8)
    src = g.integers(0, N, size=n_ev, dtype=np.int32)
    tgt = g.integers(0, N, size=n_ev, dtype=np.int32)
    # self-arrows are kept as events; they change nothing
    pi = moran_stationary(p)
    y0 = int(g.choice(N + 1, p=pi))
    init = np.zeros(N, dtype=np.int8)
    init[g.permutation(N)[:y0]] = 1
    aux = np.empty(n_ev, dtype=np.int8)
    final = _propagate_types(init.copy(), kind, src, tgt, aux)
    return EventLog(N, horizon, times, kind, src, tgt, init, aux, final)


@dataclass(frozen=True)
class AncestralTrace:
    n10: np.ndarray
    n01: np.ndarray
    time1: np.ndarray
    window: tuple[float, float]
    mismatches: int


def trace_ancestral_line(log: EventLog, individual: int, burn_in: float, batches: int = N_BATCHES) -> AncestralTrace:
    """Trace ``individual`` (0-based, alive at the horizon) back through effective reproduction events."""
    T = log.horizon
    t0, t1 = T * burn_in, T * (1.0 - burn_in)
    n10, n01, time1, mism = _trace_back(
        log.times, log.kind, log.src, log.tgt, log.aux, individual, int(log.final_types[individual]), t0, t1, batches
    )
    return AncestralTrace(n10, n01, time1, (t0, t1), int(mism))


@dataclass(frozen=True)
class AncestralLineEstimates:
    p1: SimEstimate
    f10: SimEstimate
    f01: SimEstimate
    q10: SimEstimate
    q01: SimEstimate
    events: int
    mismatches: int


def simulate_ancestral_line(
    p: FiniteParams, cfg: SimConfig, min_events: int = 10
) -> AncestralLineEstimates:
    """Estimate type-1 probability, fluxes and rates on the ancestral line from the typed IPS.

    Per replicate: simulate ``[0, horizon]``, sample a uniform individual at
    the horizon, trace it back, and observe the central window
    ``[horizon * burn_in, horizon * (1 - burn_in)]`` split into
    ``cfg.batches`` batches. Batches from all replicates are pooled.
    """
    p.validate()
    cfg.validate()
    T = cfg.horizon or 2.0e4
    n10, n01, time1, widths = [], [], [], []
    mism = 0
    for r in range(cfg.replicates):
        g = stream(cfg.seed, _IPS, r)
        log = simulate_ips(p, T, g)
        who = int(g.integers(0, p.N))
        tr = trace_ancestral_line(log, who, cfg.burn_in, cfg.batches)
        n10.append(tr.n10)
        n01.append(tr.n01)
        time1.append(tr.time1)
        widths.append(np.full(cfg.batches, (tr.window[1] - tr.window[0]) / cfg.batches))
        mism += tr.mismatches
    n10, n01, time1, widths = map(np.concatenate, (n10, n01, time1, widths))
    events = int(n10.sum() + n01.sum())
    if events < min_events:
        raise WindowTooShort(f"only {events} ancestral mutations observed (need {min_events})")
    time0 = widths - time1
    B = len(widths)
    est = "ancestral line of a uniform individual, central window, pooled batch means"

    def per_time(x):
        return SimEstimate(x.sum() / widths.sum(), ratio_se(x, widths), B, est)

    return AncestralLineEstimates(
        p1=per_time(time1),
        f10=per_time(n10),
        f01=per_time(n01),
        q10=SimEstimate(n10.sum() / time1.sum(), ratio_se(n10, time1), B, est),
        q01=SimEstimate(n01.sum() / time0.sum(), ratio_se(n01, time0), B, est),
        events=events,
        mismatches=mism,
    )
