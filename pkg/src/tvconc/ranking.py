"""Discrete-time neural survival model trained with a likelihood term plus a
pairwise ranking term.

The network maps covariates through one ``tanh`` hidden layer to ``K + 1``
logits; a softmax turns them into a PMF over bins ``1..K`` plus a tail bin
(survival past ``K``). Gradients are derived by hand and checked against
central finite differences.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import expit

from .concordance import concordance
from .dataset import DISCRETE, SurvivalDataset
from .hazard import LOWER
from .risk import RiskScore, SurvivalModel, antolini_score, hazard_score

log = logging.getLogger(__name__)

EPS_LOG = 1e-12
EPS_HAZARD = 1e-8
VARIANTS = ("td", "alpha", "none")


class TrainingDiverged(RuntimeError):
    pass


class DiscreteHazardModel(SurvivalModel):
    """Feed-forward network producing a PMF over ``K`` time bins plus a tail."""

    discrete = True

    def __init__(self, W1, b1, W2, b2):
        self.W1, self.b1, self.W2, self.b2 = (np.array(a, dtype=float) for a in (W1, b1, W2, b2))
        self.horizon = self.W2.shape[1] - 1
        self.window = self.horizon

    @classmethod
    def initialize(cls, n_inputs: int, horizon: int, hidden: int = 32, rng=None) -> "DiscreteHazardModel":
        rng = np.random.default_rng(rng)
        W1 = rng.normal(0.0, 1.0 / math.sqrt(max(n_inputs, 1)), (n_inputs, hidden))
        W2 = rng.normal(0.0, 1.0 / math.sqrt(hidden), (hidden, horizon + 1))
        return cls(W1, np.zeros(hidden), W2, np.zeros(horizon + 1))

    @property
    def params(self) -> list[np.ndarray]:
        return [self.W1, self.b1, self.W2, self.b2]

    def copy(self) -> "DiscreteHazardModel":
        return DiscreteHazardModel(*(p.copy() for p in self.params))

    def to_dict(self) -> dict:
        return {"horizon": self.horizon, "W1": self.W1.tolist(), "b1": self.b1.tolist(),
                "W2": self.W2.tolist(), "b2": self.b2.tolist()}

    @classmethod
    def from_dict(cls, d) -> "DiscreteHazardModel":
        return cls(np.array(d["W1"], dtype=float).reshape(len(d["W1"]), -1), d["b1"], d["W2"], d["b2"])

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "DiscreteHazardModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    # forward pass -------------------------------------------------------

    def _forward(self, Z):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        if Z.shape[1] != self.W1.shape[0]:
            raise ValueError(f"expected {self.W1.shape[0]} covariates, got {Z.shape[1]}")
        h = np.tanh(Z @ self.W1 + self.b1)
        logits = h @ self.W2 + self.b2
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        return h, e / e.sum(axis=1, keepdims=True)

    def pmf(self, Z) -> np.ndarray:
        """``(n, K + 1)``: mass in bins ``1..K`` then the tail."""
        return self._forward(Z)[1]

    def cdf(self, Z) -> np.ndarray:
        """``F(t|z)`` for ``t = 1..K``."""
        return np.cumsum(self.pmf(Z)[:, :-1], axis=1)

    def hazard_matrix(self, Z) -> np.ndarray:
        """Discrete hazard ``f(t) / (1 - F(t-1))``; 1 where the remaining mass is exhausted."""
        return _hazard(self.pmf(Z))[0]

    def hazard_defined(self, Z) -> np.ndarray:
        return _hazard(self.pmf(Z))[1]

    # SurvivalModel interface -------------------------------------------

    def _bins(self, t, lo):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if (t != np.round(t)).any() or (t < lo).any() or (t > self.horizon).any():
            raise ValueError(f"discrete time must be an integer in [{lo}, {self.horizon}]")
        return t.astype(int)

    def survival_table(self, t, Z):
        k = self._bins(t, 0)
        surv = np.concatenate([np.ones((len(np.atleast_2d(Z)), 1)), _tail_sums(self.pmf(Z))[:, 1:]], axis=1)
        return surv[:, k].T

    def hazard_table(self, t, Z):
        k = self._bins(t, 1)
        return self.hazard_matrix(Z)[:, k - 1].T

    def quantile_table(self, s, Z, convention=LOWER):
        surv = np.concatenate([np.ones((len(np.atleast_2d(Z)), 1)), _tail_sums(self.pmf(Z))[:, 1:]], axis=1)
        out = np.empty(surv.shape[0])
        for r, row in enumerate(surv):
            hit = np.nonzero(row <= s)[0] if convention == LOWER else np.nonzero(row >= s)[0]
            if hit.size == 0:
                raise ValueError(f"survival level {s} not reached within the horizon")
            out[r] = hit[0] if convention == LOWER else hit[-1]
        return out


def _tail_sums(f):
    """``out[:, k] = sum_{s >= k} f[:, s]``: probability of surviving bins ``1..k``."""
    return np.cumsum(f[:, ::-1], axis=1)[:, ::-1]


def _hazard(f):
    at_risk = _tail_sums(f)[:, :-1]
    defined = at_risk > EPS_HAZARD
    with np.errstate(divide="ignore", invalid="ignore"):
        haz = np.where(defined, f[:, :-1] / at_risk, 1.0)
    return haz, defined, at_risk


def _batch(data):
    if isinstance(data, SurvivalDataset):
        return data.time.astype(int), data.event, data.covariates
    time, event, Z = data
    return np.asarray(time, dtype=int), np.asarray(event, dtype=bool), np.atleast_2d(np.asarray(Z, dtype=float))


def eta(x, y, sigma: float):
    """Smooth pair loss ``logistic(-(x - y) / sigma)``: 1/2 at a tie, 0 when ``x >> y``."""
    return expit(-(np.asarray(x) - np.asarray(y)) / sigma)


def _pair_terms(model, f, time, event, variant, sigma):
    """Pair matrix, own/other score matrix and the per-time score matrix."""
    if variant == "td":
        M = np.cumsum(f[:, :-1], axis=1)
    elif variant == "alpha":
        M = _hazard(f)[0]
    else:
        raise ValueError(f"unknown ranking variant {variant!r}")
    k = time - 1
    other = M[:, k].T  # other[i, j] = M[j, T_i]
    own = M[np.arange(time.size), k]
    A = event[:, None] & (time[:, None] < time[None, :])
    e = eta(own[:, None], other, sigma)
    return A, e, M


def log_likelihood_loss(model: DiscreteHazardModel, batch) -> float:
    """Negative log-likelihood summed over the batch, with probabilities floored at 1e-12."""
    time, event, Z = _batch(batch)
    f = model.pmf(Z)
    return float(_nll_terms(f, time, event).sum())


def _nll_terms(f, time, event):
    rows = np.arange(time.size)
    p_event = f[rows, time - 1]
    p_surv = _tail_sums(f)[rows, time]
    return -np.log(np.maximum(np.where(event, p_event, p_surv), EPS_LOG))


def ranking_loss(model: DiscreteHazardModel, batch, variant: str = "alpha", sigma: float = 0.1) -> float:
    """Sum of ``eta`` over ordered pairs with ``D_i = 1`` and ``T_i < T_j``.

    ``variant='td'`` compares predicted CDFs at ``T_i``; ``'alpha'`` compares
    predicted hazards at ``T_i``.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    time, event, Z = _batch(batch)
    A, e, _ = _pair_terms(model, model.pmf(Z), time, event, variant, sigma)
    return float((A * e).sum())


@dataclass(frozen=True)
class LossBreakdown:
    """Batch losses divided by the batch size: ``l0`` is the negative
    log-likelihood and ``l_rank`` the summed pair loss, each per record;
    ``total = l0 + weight * l_rank``."""

    l0: float
    l_rank: float
    total: float


def loss_and_gradient(model: DiscreteHazardModel, batch, variant: str = "none", sigma: float = 0.1,
                      weight: float = 1.0) -> tuple[LossBreakdown, list[np.ndarray]]:
    """Training objective and its gradient with respect to ``model.params``."""
    time, event, Z = _batch(batch)
    B = time.size
    h, f = model._forward(Z)
    rows = np.arange(B)

    # likelihood term
    nll = _nll_terms(f, time, event)
    l0 = float(nll.mean())
    df = np.zeros_like(f)
    p_event = f[rows, time - 1]
    ev_ok = event & (p_event > EPS_LOG)
    df[rows[ev_ok], time[ev_ok] - 1] -= 1.0 / (B * p_event[ev_ok])
    tails = _tail_sums(f)
    p_surv = tails[rows, time]
    cens_ok = ~event & (p_surv > EPS_LOG)
    beyond = np.arange(f.shape[1])[None, :] >= time[:, None]
    df -= np.where(cens_ok[:, None] & beyond, 1.0 / (B * np.where(cens_ok, p_surv, 1.0))[:, None], 0.0)

    # ranking term
    l_rank = 0.0
    if variant != "none" and weight != 0:
        A, e, M = _pair_terms(model, f, time, event, variant, sigma)
        if A.any():
            l_rank = float((A * e).sum() / B)
            G = A * e * (1.0 - e) * (weight / (sigma * B))
            onehot = np.zeros((B, M.shape[1]))
            onehot[rows, time - 1] = 1.0
            dM = G.T @ onehot
            dM[rows, time - 1] -= G.sum(axis=1)
            K = M.shape[1]
            if variant == "td":
                df[:, :K] += np.cumsum(dM[:, ::-1], axis=1)[:, ::-1]
            else:
                _, defined, at_risk = _hazard(f)
                dM = np.where(defined, dM, 0.0)
                safe = np.where(defined, at_risk, 1.0)
                df[:, :K] += dM / safe
                cross = np.cumsum(dM * f[:, :K] / safe ** 2, axis=1)
                df[:, :K] -= cross
                df[:, K] -= cross[:, -1]
    total = l0 + weight * l_rank if variant != "none" else l0

    dlogits = f * (df - (f * df).sum(axis=1, keepdims=True))
    dW2 = h.T @ dlogits
    db2 = dlogits.sum(axis=0)
    da1 = (dlogits @ model.W2.T) * (1.0 - h * h)
    dW1 = Z.T @ da1
    db1 = da1.sum(axis=0)
    return LossBreakdown(l0, l_rank, total), [dW1, db1, dW2, db2]


def objective(model, batch, variant="none", sigma=0.1, weight=1.0) -> float:
    return loss_and_gradient(model, batch, variant, sigma, weight)[0].total


def gradient_check(model: DiscreteHazardModel, batch, variant: str = "none", sigma: float = 0.1,
                   weight: float = 1.0, step: float = 1e-5) -> float:
    """Largest relative error between analytic and central-difference gradients.

    The relative error of a component is ``|g - n| / max(|g|, |n|, 1e-8)``.
    """
    _, grads = loss_and_gradient(model, batch, variant, sigma, weight)
    probe = model.copy()
    worst = 0.0
    for p, g in zip(probe.params, grads):
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            up = objective(probe, batch, variant, sigma, weight)
            flat[k] = orig - step
            down = objective(probe, batch, variant, sigma, weight)
            flat[k] = orig
            num = (up - down) / (2 * step)
            err = abs(gflat[k] - num) / max(abs(gflat[k]), abs(num), 1e-8)
            worst = max(worst, err)
    return worst


@dataclass(frozen=True)
class TrainConfig:
    ranking_variant: str = "alpha"
    sigma: float = 0.1
    ranking_weight: float = 1.0
    learning_rate: float = 0.05
    batch_size: int = 256
    max_epochs: int = 200
    patience: int = 5
    seed: int = 0
    hidden: int = 32
    fractions: tuple[float, float, float] = (0.8, 0.04, 0.16)

    def __post_init__(self):
        if self.ranking_variant not in VARIANTS:
            raise ValueError(f"ranking_variant must be one of {VARIANTS}")
        if abs(sum(self.fractions) - 1.0) > 1e-9 or min(self.fractions) <= 0:
            raise ValueError("split fractions must be positive and sum to 1")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if self.sigma <= 0 or self.ranking_weight < 0 or self.learning_rate <= 0:
            raise ValueError("sigma and learning_rate must be positive, ranking_weight non-negative")


@dataclass
class EpochLog:
    epoch: int
    l0: float
    l_rank: float
    total: float
    val_index: float
    val_nll: float


@dataclass
class TrainResult:
    model: DiscreteHazardModel
    log: list[EpochLog]
    best_epoch: int
    split: dict = field(repr=False)

    def log_rows(self) -> list[dict]:
        return [asdict(e) for e in self.log]


def split_indices(n: int, fractions, seed: int) -> dict:
    """Seeded random train/validation/test partition of ``range(n)``."""
    perm = np.random.default_rng([seed, 1]).permutation(n)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    return {"train": np.sort(perm[:n_train]), "val": np.sort(perm[n_train:n_train + n_val]),
            "test": np.sort(perm[n_train + n_val:])}


def validation_score(model: DiscreteHazardModel, variant: str) -> RiskScore:
    """Score matched to the training target: survival (td) or hazard (alpha / none)."""
    return antolini_score(model) if variant == "td" else hazard_score(model)


def train(data: SurvivalDataset, cfg: TrainConfig = TrainConfig(), horizon: int | None = None) -> TrainResult:
    """Mini-batch gradient descent with early stopping.

    The validation criterion is concordance for the ranking variants and the
    mean negative log-likelihood for the likelihood-only variant (whose
    concordance saturates after an epoch or two). Keeps the parameters of the
    best validation epoch and stops after ``cfg.patience`` epochs without
    improvement.
    """
    if data.mode != DISCRETE:
        raise ValueError("training needs discrete-time data")
    horizon = horizon or int(data.time.max())
    if data.time.max() > horizon:
        raise ValueError("times exceed the model horizon")
    split = split_indices(len(data), cfg.fractions, cfg.seed)
    train_set, val_set = data.subset(split["train"]), data.subset(split["val"])
    rng = np.random.default_rng([cfg.seed, 2])
    model = DiscreteHazardModel.initialize(data.n_covariates, horizon, cfg.hidden, rng)
    time, event, Z = _batch(train_set)
    val_batch = _batch(val_set)
    best, best_score, best_epoch, stale = model.copy(), -np.inf, 0, 0
    history = []
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(time.size)
        sums = np.zeros(3)
        n_batches = 0
        for lo in range(0, order.size, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            loss, grads = loss_and_gradient(model, (time[idx], event[idx], Z[idx]),
                                            cfg.ranking_variant, cfg.sigma, cfg.ranking_weight)
            if not math.isfinite(loss.total) or not all(np.isfinite(g).all() for g in grads):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}: {loss}")
            for p, g in zip(model.params, grads):
                p -= cfg.learning_rate * g
            sums += (loss.l0, loss.l_rank, loss.total)
            n_batches += 1
        val = concordance(val_set, validation_score(model, cfg.ranking_variant)).index
        val_nll = log_likelihood_loss(model, val_batch) / len(val_set)
        l0, lr_, tot = sums / n_batches
        history.append(EpochLog(epoch, float(l0), float(lr_), float(tot), float(val), float(val_nll)))
        log.debug("epoch %d loss %.5f val %.4f", epoch, tot, val)
        criterion = -val_nll if cfg.ranking_variant == "none" else val
        if criterion > best_score:
            best, best_score, best_epoch, stale = model.copy(), criterion, epoch, 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    return TrainResult(best, history, best_epoch, split)


class CumulativeHazard(NamedTuple):
    value: float
    capped: bool


def predicted_cumulative_hazard(model: SurvivalModel, z, t: int) -> CumulativeHazard:
    """``sum_{s <= t} alpha(s|z)``; ``capped`` flags bins where the hazard was
    undefined (remaining mass below 1e-8) and counted as 1."""
    if not (float(t).is_integer() and 1 <= t <= model.window):
        raise ValueError(f"t must be an integer in [1, {model.window}]")
    t = int(t)
    haz = model.hazard_table(np.arange(1, t + 1), np.atleast_2d(z))[:, 0]
    capped = False
    if isinstance(model, DiscreteHazardModel):
        capped = bool((~model.hazard_defined(np.atleast_2d(z))[0, :t]).any())
    return CumulativeHazard(float(haz.sum()), capped)


def cumulative_hazard_curves(model: SurvivalModel, Z) -> np.ndarray:
    """``(n, K)`` matrix of predicted cumulative hazards at ``t = 1..K``."""
    K = int(model.window)
    return np.cumsum(model.hazard_table(np.arange(1, K + 1), Z).T, axis=1)


def group_mean_curves(model: SurvivalModel, data: SurvivalDataset, group_col: int = 0) -> dict:
    """Mean predicted cumulative hazard per value of ``z[group_col]``."""
    curves = cumulative_hazard_curves(model, data.covariates)
    labels = data.covariates[:, group_col]
    return {int(g): curves[labels == g].mean(axis=0) for g in np.unique(labels)}
