"""Adaptive Hamiltonian-style MCMC over the flat coordinate vector.

No-U-turn trajectory doubling with slice sampling, dual-averaging step-size
adaptation toward a target acceptance rate, and windowed diagonal mass
(metric) estimation during warmup. Deterministic per (seed, chain):
results do not depend on how many chains run in parallel.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata

from .compare import ModelKind
from .data import TrialSet
from .hier import PriorConfig

DELTA_MAX = 1000.0  # energy error beyond which a trajectory is divergent


@dataclass(frozen=True)
class SamplerConfig:
    n_chains: int = 2
    n_iter: int = 2000
    n_warmup: int = 1000
    seed: int = 0
    target_accept: float = 0.8
    max_depth: int = 10

    def __post_init__(self):
        if self.n_chains < 1:
            raise ValueError("n_chains must be >= 1")
        if not 0 < self.n_warmup < self.n_iter:
            raise ValueError("need 0 < n_warmup < n_iter")
        if not 0 < self.target_accept < 1:
            raise ValueError("target_accept must be in (0, 1)")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")

    @property
    def n_kept(self) -> int:
        return self.n_iter - self.n_warmup


class SamplerError(RuntimeError):
    pass


@dataclass
class PosteriorDraws:
    """Retained draws, (kept iterations x chains x parameters)."""

    draws: np.ndarray
    names: list[str]
    divergent: np.ndarray
    step_size: np.ndarray
    accept_stat: np.ndarray
    tree_depth: np.ndarray
    energy: np.ndarray
    config: SamplerConfig | None = None

    def __post_init__(self):
        n_kept, n_chains, n_params = self.draws.shape
        if len(self.names) != n_params:
            raise ValueError("names do not match the parameter dimension")
        if len(set(self.names)) != n_params:
            raise ValueError("parameter names must be unique")
        if not np.all(np.isfinite(self.draws)):
            raise ValueError("non-finite draws")

    @property
    def n_kept(self) -> int:
        return self.draws.shape[0]

    @property
    def n_chains(self) -> int:
        return self.draws.shape[1]

    @property
    def n_params(self) -> int:
        return self.draws.shape[2]

    @property
    def divergence_count(self) -> int:
        return int(np.sum(self.divergent))

    def param(self, name: str) -> np.ndarray:
        """(chains, kept) draws of one parameter."""
        return self.draws[:, :, self.names.index(name)].T

    def flat(self, name: str) -> np.ndarray:
        return self.param(name).reshape(-1)

    def flat_draws(self) -> np.ndarray:
        """(kept*chains, params), rows ordered by (chain, iteration)."""
        return self.draws.transpose(1, 0, 2).reshape(-1, self.n_params)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["chain", "iter"] + self.names)
            for c in range(self.n_chains):
                for i in range(self.n_kept):
                    row = [c, i] + [format(v, ".17g") for v in self.draws[i, c]]
                    writer.writerow(row)

    @classmethod
    def from_csv(cls, path) -> "PosteriorDraws":
        with open(path, encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[:2] != ["chain", "iter"]:
                raise ValueError("draws CSV must start with chain,iter columns")
            names = header[2:]
            rows = [(int(r[0]), int(r[1]), [float(v) for v in r[2:]]) for r in reader if r]
        chains = sorted({r[0] for r in rows})
        iters = sorted({r[1] for r in rows})
        draws = np.empty((len(iters), len(chains), len(names)))
        for c, i, vals in rows:
            draws[iters.index(i), chains.index(c)] = vals
        zeros = np.zeros((len(iters), len(chains)))
        return cls(draws=draws, names=names, divergent=zeros.astype(bool),
                   step_size=np.zeros(len(chains)), accept_stat=zeros.copy(),
                   tree_depth=zeros.copy(), energy=zeros.copy())


# ---------------------------------------------------------------------------
# NUTS kernel

@dataclass
class _Tree:
    pos_minus: np.ndarray
    mom_minus: np.ndarray
    grad_minus: np.ndarray
    pos_plus: np.ndarray
    mom_plus: np.ndarray
    grad_plus: np.ndarray
    pos_prop: np.ndarray
    lp_prop: float
    grad_prop: np.ndarray
    n: int
    cont: bool
    alpha: float
    n_alpha: int
    divergent: bool


def _leapfrog(target, pos, mom, grad, eps, inv_mass):
    mom = mom + 0.5 * eps * grad
    pos = pos + eps * inv_mass * mom
    lp, grad = target(pos)
    mom = mom + 0.5 * eps * grad
    return pos, mom, grad, lp


def _hamiltonian(lp, mom, inv_mass) -> float:
    return lp - 0.5 * float(np.dot(mom * mom, inv_mass))


def _no_uturn(pos_minus, pos_plus, mom_minus, mom_plus, inv_mass) -> bool:
    d = pos_plus - pos_minus
    return (np.dot(d, inv_mass * mom_minus) >= 0.0) and (np.dot(d, inv_mass * mom_plus) >= 0.0)


def _build_tree(target, pos, mom, grad, log_u, direction, depth, eps, inv_mass, h0, rng):
    if depth == 0:
        pos1, mom1, grad1, lp1 = _leapfrog(target, pos, mom, grad, direction * eps, inv_mass)
        h1 = _hamiltonian(lp1, mom1, inv_mass)
        n = int(log_u <= h1)
        divergent = (log_u - DELTA_MAX) > h1 or not math.isfinite(h1)
        alpha = min(1.0, math.exp(min(h1 - h0, 0.0))) if math.isfinite(h1) else 0.0
        return _Tree(pos1, mom1, grad1, pos1, mom1, grad1, pos1, lp1, grad1,
                     n, not divergent, alpha, 1, divergent)
    tree = _build_tree(target, pos, mom, grad, log_u, direction, depth - 1,
                       eps, inv_mass, h0, rng)
    if tree.cont:
        if direction == -1:
            sub = _build_tree(target, tree.pos_minus, tree.mom_minus, tree.grad_minus,
                              log_u, direction, depth - 1, eps, inv_mass, h0, rng)
            tree.pos_minus, tree.mom_minus, tree.grad_minus = \
                sub.pos_minus, sub.mom_minus, sub.grad_minus
        else:
            sub = _build_tree(target, tree.pos_plus, tree.mom_plus, tree.grad_plus,
                              log_u, direction, depth - 1, eps, inv_mass, h0, rng)
            tree.pos_plus, tree.mom_plus, tree.grad_plus = \
                sub.pos_plus, sub.mom_plus, sub.grad_plus
        if sub.n > 0 and rng.uniform() < sub.n / max(tree.n + sub.n, 1):
            tree.pos_prop, tree.lp_prop, tree.grad_prop = sub.pos_prop, sub.lp_prop, sub.grad_prop
        tree.n += sub.n
        tree.alpha += sub.alpha
        tree.n_alpha += sub.n_alpha
        tree.divergent = tree.divergent or sub.divergent
        tree.cont = (sub.cont and not sub.divergent
                     and _no_uturn(tree.pos_minus, tree.pos_plus,
                                   tree.mom_minus, tree.mom_plus, inv_mass))
    return tree


def _find_reasonable_epsilon(target, pos, lp, grad, inv_mass, rng) -> float:
    eps = 1.0
    mom = rng.standard_normal(len(pos)) / np.sqrt(inv_mass)
    h0 = _hamiltonian(lp, mom, inv_mass)
    _, mom1, _, lp1 = _leapfrog(target, pos, mom, grad, eps, inv_mass)
    h1 = _hamiltonian(lp1, mom1, inv_mass)
    ratio = h1 - h0 if math.isfinite(h1) else -math.inf
    direction = 1.0 if ratio > math.log(0.5) else -1.0
    for _ in range(100):
        if direction * ratio <= direction * math.log(0.5) or not (1e-10 < eps < 1e7):
            break
        eps *= 2.0 ** direction
        _, mom1, _, lp1 = _leapfrog(target, pos, mom, grad, eps, inv_mass)
        h1 = _hamiltonian(lp1, mom1, inv_mass)
        ratio = h1 - h0 if math.isfinite(h1) else -math.inf
    return min(max(eps, 1e-10), 1e7)


def _adaptation_windows(n_warmup: int) -> tuple[int, int, list[int]]:
    """Stan-style schedule: fast start, doubling slow windows, fast tail.

    Returns (init_buffer, term_start, window_ends)."""
    init_buffer, term_buffer, base = 75, 50, 25
    if n_warmup < init_buffer + term_buffer + base:
        init_buffer = max(1, int(0.15 * n_warmup))
        term_buffer = max(1, int(0.10 * n_warmup))
        base = max(1, n_warmup - init_buffer - term_buffer)
    term_start = n_warmup - term_buffer
    ends, w, pos = [], base, init_buffer
    while pos + w < term_start:
        if pos + w + 2 * w >= term_start:
            ends.append(term_start)
            pos = term_start
        else:
            ends.append(pos + w)
            pos += w
            w *= 2
    if not ends or ends[-1] < term_start:
        ends.append(term_start)
    return init_buffer, term_start, ends


class _Welford:
    def __init__(self, dim):
        self.n = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def add(self, x):
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def variance(self):
        return self.m2 / max(self.n - 1, 1)


def _run_chain(program, cfg: SamplerConfig, chain_id: int, seed_seq) -> dict:
    rng = np.random.default_rng(seed_seq)
    target = program.logpost_and_grad
    dim = program.n_params

    pos = None
    for attempt in range(100):
        cand = program.init_position(rng)
        lp, grad = target(cand)
        if math.isfinite(lp):
            pos = cand
            break
    if pos is None:
        prior_ok = math.isfinite(program.log_prior(cand)) if hasattr(program, "log_prior") else None
        reason = ("likelihood is -inf (an observed RT at or below the assembled shift, "
                  "or a zero-probability observed category)") if prior_ok else \
                 "log-prior is -inf (constraint violation in the transform)"
        raise SamplerError(f"chain {chain_id}: no finite log posterior in 100 init attempts; {reason}")

    inv_mass = np.ones(dim)
    eps = _find_reasonable_epsilon(target, pos, lp, grad, inv_mass, rng)
    mu = math.log(10.0 * eps)
    log_eps_bar, h_bar = 0.0, 0.0
    gamma, t0, kappa = 0.05, 10.0, 0.75
    da_count = 0

    init_buffer, term_start, window_ends = _adaptation_windows(cfg.n_warmup)
    window_iter = iter(window_ends)
    next_end = next(window_iter, None)
    welford = _Welford(dim)

    kept = np.empty((cfg.n_kept, dim))
    divergent = np.zeros(cfg.n_kept, dtype=bool)
    accept_stat = np.zeros(cfg.n_kept)
    tree_depth = np.zeros(cfg.n_kept)
    energy = np.zeros(cfg.n_kept)

    for m in range(1, cfg.n_iter + 1):
        mom0 = rng.standard_normal(dim) / np.sqrt(inv_mass)
        h0 = _hamiltonian(lp, mom0, inv_mass)
        log_u = h0 - rng.exponential()

        pos_minus = pos_plus = pos
        mom_minus = mom_plus = mom0
        grad_minus = grad_plus = grad
        depth, n_total, cont = 0, 1, True
        alpha_sum, n_alpha_sum = 0.0, 0
        diverged = False
        while cont and depth < cfg.max_depth:
            direction = 1 if rng.uniform() < 0.5 else -1
            if direction == -1:
                tree = _build_tree(target, pos_minus, mom_minus, grad_minus, log_u,
                                   direction, depth, eps, inv_mass, h0, rng)
                pos_minus, mom_minus, grad_minus = tree.pos_minus, tree.mom_minus, tree.grad_minus
            else:
                tree = _build_tree(target, pos_plus, mom_plus, grad_plus, log_u,
                                   direction, depth, eps, inv_mass, h0, rng)
                pos_plus, mom_plus, grad_plus = tree.pos_plus, tree.mom_plus, tree.grad_plus
            if tree.cont and tree.n > 0 and rng.uniform() < min(1.0, tree.n / n_total):
                pos, lp, grad = tree.pos_prop, tree.lp_prop, tree.grad_prop
            n_total += tree.n
            alpha_sum += tree.alpha
            n_alpha_sum += tree.n_alpha
            diverged = diverged or tree.divergent
            cont = (tree.cont and not tree.divergent
                    and _no_uturn(pos_minus, pos_plus, mom_minus, mom_plus, inv_mass))
            depth += 1

        accept = alpha_sum / max(n_alpha_sum, 1)
        if m <= cfg.n_warmup:
            da_count += 1
            frac = 1.0 / (da_count + t0)
            h_bar = (1 - frac) * h_bar + frac * (cfg.target_accept - accept)
            log_eps = mu - math.sqrt(da_count) / gamma * h_bar
            eta = da_count ** (-kappa)
            log_eps_bar = (1 - eta) * log_eps_bar + eta * log_eps
            eps = math.exp(log_eps)

            if init_buffer < m <= term_start:
                welford.add(pos)
            if next_end is not None and m == next_end:
                if welford.n >= 10:
                    var = welford.variance()
                    w = welford.n
                    inv_mass = (w / (w + 5.0)) * var + 1e-3 * (5.0 / (w + 5.0))
                    inv_mass = np.maximum(inv_mass, 1e-10)
                welford = _Welford(dim)
                eps = _find_reasonable_epsilon(target, pos, lp, grad, inv_mass, rng)
                mu = math.log(10.0 * eps)
                log_eps_bar, h_bar, da_count = 0.0, 0.0, 0
                next_end = next(window_iter, None)
            if m == cfg.n_warmup:
                eps = math.exp(log_eps_bar)
        else:
            k = m - cfg.n_warmup - 1
            kept[k] = pos
            divergent[k] = diverged
            accept_stat[k] = accept
            tree_depth[k] = depth
            energy[k] = -h0

    return {
        "draws": kept, "divergent": divergent, "accept_stat": accept_stat,
        "tree_depth": tree_depth, "energy": energy, "step_size": eps,
    }


def sample_program(cfg: SamplerConfig, program, threads: int = 1) -> PosteriorDraws:
    """Run NUTS chains over any target exposing the program protocol
    (n_params, names, logpost_and_grad, init_position)."""
    seqs = np.random.SeedSequence(cfg.seed).spawn(cfg.n_chains)
    if threads > 1 and cfg.n_chains > 1:
        with ThreadPoolExecutor(max_workers=min(threads, cfg.n_chains)) as pool:
            results = list(pool.map(
                lambda ci: _run_chain(program, cfg, ci, seqs[ci]), range(cfg.n_chains)))
    else:
        results = [_run_chain(program, cfg, ci, seqs[ci]) for ci in range(cfg.n_chains)]
    return PosteriorDraws(
        draws=np.stack([r["draws"] for r in results], axis=1),
        names=list(program.names),
        divergent=np.stack([r["divergent"] for r in results], axis=1),
        step_size=np.array([r["step_size"] for r in results]),
        accept_stat=np.stack([r["accept_stat"] for r in results], axis=1),
        tree_depth=np.stack([r["tree_depth"] for r in results], axis=1),
        energy=np.stack([r["energy"] for r in results], axis=1),
        config=cfg,
    )


def log_posterior(pv: np.ndarray, ts: TrialSet, model: ModelKind,
                  priors: PriorConfig | None = None) -> tuple[float, np.ndarray]:
    """Log posterior density and gradient at one coordinate vector.

    -inf regions come back as a rejection signal with a zero gradient.
    """
    from .engine import build_program

    return build_program(model, ts, priors).logpost_and_grad(np.asarray(pv, dtype=float))


def run_chains(cfg: SamplerConfig, ts: TrialSet, model: ModelKind,
               priors: PriorConfig | None = None, threads: int = 1) -> PosteriorDraws:
    """Fit one of the four models to a dataset."""
    from .engine import build_program

    if len(ts) == 0:
        raise ValueError("empty TrialSet")
    return sample_program(cfg, build_program(model, ts, priors), threads=threads)


# ---------------------------------------------------------------------------
# Convergence diagnostics

def _split_chains(x: np.ndarray) -> np.ndarray:
    n_chains, n_draws = x.shape
    half = n_draws // 2
    return np.vstack([x[:, :half], x[:, n_draws - half:]])


def _z_scale(x: np.ndarray) -> np.ndarray:
    # Blom rank backtransform: (r - c) / (n - 2c + 1) with c = 3/8
    r = rankdata(x, method="average").reshape(x.shape)
    return ndtri((r - 0.375) / (x.size + 0.25))


def _rhat_core(x: np.ndarray) -> float:
    n_chains, n_draws = x.shape
    chain_means = x.mean(axis=1)
    chain_vars = x.var(axis=1, ddof=1)
    between = n_draws * np.var(chain_means, ddof=1)
    within = np.mean(chain_vars)
    if within == 0:
        return math.nan
    return math.sqrt((between / within + n_draws - 1) / n_draws)


def _autocov(x: np.ndarray) -> np.ndarray:
    n = x.shape[1]
    size = 2 ** math.ceil(math.log2(2 * n))
    centered = x - x.mean(axis=1, keepdims=True)
    f = np.fft.rfft(centered, size, axis=1)
    acov = np.fft.irfft(f * np.conjugate(f), size, axis=1)[:, :n].real
    return acov / n


def _ess_core(x: np.ndarray) -> float:
    """Geyer initial-sequence ESS on split chains (arXiv:1903.08008 recipe)."""
    n_chains, n_draws = x.shape
    if np.ptp(x) == 0:
        return float(x.size)
    acov = _autocov(x)
    chain_means = x.mean(axis=1)
    mean_var = float(np.mean(acov[:, 0])) * n_draws / (n_draws - 1.0)
    var_plus = mean_var * (n_draws - 1.0) / n_draws
    if n_chains > 1:
        var_plus += float(np.var(chain_means, ddof=1))
    rho = np.zeros(n_draws)
    rho[0] = 1.0
    rho_even, rho_odd = 1.0, 1.0 - (mean_var - float(np.mean(acov[:, 1]))) / var_plus
    rho[1] = rho_odd
    t = 1
    while t < n_draws - 3 and (rho_even + rho_odd) > 0.0:
        rho_even = 1.0 - (mean_var - float(np.mean(acov[:, t + 1]))) / var_plus
        rho_odd = 1.0 - (mean_var - float(np.mean(acov[:, t + 2]))) / var_plus
        if rho_even + rho_odd >= 0:
            rho[t + 1] = rho_even
            rho[t + 2] = rho_odd
        t += 2
    max_t = t - 2
    if rho_even > 0:
        rho[max_t + 1] = rho_even
    t = 1
    while t <= max_t - 2:
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]:
            rho[t + 1] = (rho[t - 1] + rho[t]) / 2.0
            rho[t + 2] = rho[t + 1]
        t += 2
    total = n_chains * n_draws
    tau = -1.0 + 2.0 * float(np.sum(rho[:max_t + 2]))
    tau = max(tau, 1.0 / math.log10(total))
    return total / tau


def _ess_bulk(x: np.ndarray) -> float:
    return _ess_core(_z_scale(_split_chains(x)))


def _ess_tail(x: np.ndarray) -> float:
    out = []
    for prob in (0.05, 0.95):
        q = np.quantile(x, prob)
        out.append(_ess_core(_split_chains((x <= q).astype(float))))
    return min(out)


def split_rhat(x: np.ndarray) -> float:
    """Split R-hat over a (chains, draws) array.

    Floored at 1.0: sampling noise can push the raw statistic slightly
    below 1, which carries no diagnostic information.
    """
    if x.shape[1] < 4 or np.ptp(x) == 0:
        return math.nan
    return max(_rhat_core(_split_chains(x)), 1.0)


@dataclass(frozen=True)
class Diagnostics:
    names: list[str]
    rhat: np.ndarray
    ess_bulk: np.ndarray
    ess_tail: np.ndarray
    divergences: int
    degenerate: list[str]

    @property
    def max_rhat(self) -> float:
        ok = ~np.isnan(self.rhat)
        return float(np.max(self.rhat[ok])) if np.any(ok) else math.nan

    @property
    def min_ess_bulk(self) -> float:
        ok = ~np.isnan(self.ess_bulk)
        return float(np.min(self.ess_bulk[ok])) if np.any(ok) else math.nan

    def to_dict(self) -> dict:
        return {
            "max_rhat": None if math.isnan(self.max_rhat) else self.max_rhat,
            "min_ess_bulk": None if math.isnan(self.min_ess_bulk) else self.min_ess_bulk,
            "divergences": self.divergences,
            "degenerate": self.degenerate,
            "parameters": {
                name: {
                    "rhat": None if np.isnan(self.rhat[i]) else float(self.rhat[i]),
                    "ess_bulk": None if np.isnan(self.ess_bulk[i]) else float(self.ess_bulk[i]),
                    "ess_tail": None if np.isnan(self.ess_tail[i]) else float(self.ess_tail[i]),
                }
                for i, name in enumerate(self.names)
            },
        }


def diagnostics(pd: PosteriorDraws) -> Diagnostics:
    """Split R-hat and rank-normalized bulk/tail ESS for every parameter."""
    if pd.n_chains < 2:
        raise ValueError("R-hat needs at least 2 chains")
    if pd.n_kept < 100:
        raise ValueError("R-hat needs at least 100 retained draws per chain")
    cap = 1.5 * pd.n_kept * pd.n_chains
    rhat = np.empty(pd.n_params)
    ebulk = np.empty(pd.n_params)
    etail = np.empty(pd.n_params)
    degenerate = []
    for k, name in enumerate(pd.names):
        x = pd.draws[:, :, k].T
        if np.ptp(x) == 0:
            rhat[k] = ebulk[k] = etail[k] = math.nan
            degenerate.append(name)
            continue
        rhat[k] = split_rhat(x)
        ebulk[k] = min(_ess_bulk(x), cap)
        etail[k] = min(_ess_tail(x), cap)
    return Diagnostics(
        names=list(pd.names), rhat=rhat, ess_bulk=ebulk, ess_tail=etail,
        divergences=pd.divergence_count, degenerate=degenerate,
    )


def mcse_mean(x: np.ndarray) -> float:
    """Monte Carlo SE of the posterior mean for one (chains, draws) array."""
    ess = _ess_core(_split_chains(x))
    return float(np.std(x, ddof=1) / math.sqrt(ess))


# ---------------------------------------------------------------------------
# Conjugate toy target (tests and smoke checks)

class GaussianToyProgram:
    """Normal likelihood with known scale, normal prior on the mean.

    Closed-form posterior makes this the reference target for sampler
    correctness checks.
    """

    def __init__(self, y: np.ndarray, sigma: float, mu0: float = 0.0, tau0: float = 10.0):
        self.y = np.asarray(y, dtype=float)
        self.sigma = sigma
        self.mu0 = mu0
        self.tau0 = tau0
        self.names = ["theta"]
        self.n_params = 1

    def posterior(self) -> tuple[float, float]:
        n = len(self.y)
        prec = 1.0 / self.tau0 ** 2 + n / self.sigma ** 2
        mean = (self.mu0 / self.tau0 ** 2 + self.y.sum() / self.sigma ** 2) / prec
        return mean, math.sqrt(1.0 / prec)

    def logpost_and_grad(self, pv):
        theta = pv[0]
        n = len(self.y)
        lp = (-0.5 * ((theta - self.mu0) / self.tau0) ** 2
              - 0.5 * float(np.sum((self.y - theta) ** 2)) / self.sigma ** 2)
        grad = (-(theta - self.mu0) / self.tau0 ** 2
                + float(np.sum(self.y - theta)) / self.sigma ** 2)
        return lp, np.array([grad])

    def log_prior(self, pv):
        return -0.5 * ((pv[0] - self.mu0) / self.tau0) ** 2

    def init_position(self, rng):
        return rng.uniform(-2.0, 2.0, 1)
