"""Learning movement nuances from operator demonstrations.

The operator records short labeled demonstrations (each feature row of a
demonstration inherits its label); a ridge-regularized linear regression on
standardized features maps feature vectors to a 3-dimensional nuance target
(tension, abruptness, relaxation), and predicted nuances are mapped to
oscillator-network control actions.

NuanceRegressor follows the scikit-learn estimator convention (fit /
predict / get_params / set_params, fitted attributes with trailing
underscore) so it composes with that ecosystem; the solve itself is a plain
closed-form least squares.
"""
from __future__ import annotations

import json
import logging
import time as _time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .features import FeatureVector
from .oscnet import NUM_OSCILLATORS, ControlAction
from .util import clip01, require

log = logging.getLogger(__name__)

NUANCE_DIM = 3  # (tension, abruptness, relaxation)
FALLBACK_LAMBDA = 1e-3


def feature_row(fv: FeatureVector) -> np.ndarray:
    """Flatten a FeatureVector into a regression row.

    Channels are ordered by (kind, channel_id); absent centroid/damping
    values contribute 0. Layout per channel: envelope, change_rate,
    spectral_centroid, damping_ratio.
    """
    row: list[float] = []
    for ch in sorted(fv.channels, key=lambda c: (c.kind.value, c.channel_id)):
        row.extend([
            ch.envelope,
            ch.change_rate,
            ch.spectral_centroid if ch.spectral_centroid is not None else 0.0,
            ch.damping_ratio if ch.damping_ratio is not None else 0.0,
        ])
    return np.asarray(row, dtype=float)


@dataclass
class Demonstration:
    """One labeled example: a run of feature rows plus a nuance target."""

    id: str
    feature_rows: list[FeatureVector]
    label: np.ndarray
    created_at: float = field(default_factory=_time.time)

    def __post_init__(self):
        self.label = np.asarray(self.label, dtype=float)
        require(len(self.feature_rows) > 0, "feature_rows must be non-empty")
        require(self.label.shape == (NUANCE_DIM,),
                f"label must have {NUANCE_DIM} entries")
        if np.any(self.label < 0) or np.any(self.label > 1):
            raise ValueError("label entries must lie in [0, 1]")

    def content_equal(self, other: "Demonstration") -> bool:
        if not np.array_equal(self.label, other.label):
            return False
        if len(self.feature_rows) != len(other.feature_rows):
            return False
        return all(a.to_json() == b.to_json()
                   for a, b in zip(self.feature_rows, other.feature_rows))


class DuplicateDemonstrationError(ValueError):
    pass


class DemoStore:
    """Directory-backed demonstration store.

    Each demonstration is a feature JSON Lines file plus a metadata JSON.
    Adding an identical demonstration twice is a no-op; the same id with
    different content is rejected.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _meta_path(self, demo_id: str) -> Path:
        return self.root / f"{demo_id}.meta.json"

    def _rows_path(self, demo_id: str) -> Path:
        return self.root / f"{demo_id}.features.jsonl"

    def add(self, demo: Demonstration) -> None:
        if self._meta_path(demo.id).exists():
            existing = self.get(demo.id)
            if existing.content_equal(demo):
                return
            raise DuplicateDemonstrationError(
                f"demonstration {demo.id!r} already stored with different content")
        with open(self._rows_path(demo.id), "w", encoding="utf-8") as fh:
            for row in demo.feature_rows:
                fh.write(json.dumps(row.to_json()) + "\n")
        with open(self._meta_path(demo.id), "w", encoding="utf-8") as fh:
            json.dump({
                "id": demo.id,
                "label": demo.label.tolist(),
                "created_at": demo.created_at,
                "n_rows": len(demo.feature_rows),
            }, fh, indent=2)

    def get(self, demo_id: str) -> Demonstration:
        with open(self._meta_path(demo_id), "r", encoding="utf-8") as fh:
            meta = json.load(fh)
        rows = []
        with open(self._rows_path(demo_id), "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rows.append(FeatureVector.from_json(json.loads(line)))
        return Demonstration(id=meta["id"], feature_rows=rows,
                             label=np.asarray(meta["label"]),
                             created_at=meta["created_at"])

    def ids(self) -> list[str]:
        return sorted(p.name[:-len(".meta.json")]
                      for p in self.root.glob("*.meta.json"))

    def __contains__(self, demo_id: str) -> bool:
        return self._meta_path(demo_id).exists()

    def __len__(self) -> int:
        return len(self.ids())


class NuanceRegressor:
    """Ridge regression on standardized features, sklearn-style.

    With ridge_lambda=0 and full-rank data this is exact least squares; on
    rank-deficient data it falls back to a small ridge penalty with a
    warning instead of failing, so tiny demonstration sets stay usable.
    """

    def __init__(self, ridge_lambda: float = 0.0,
                 fallback_lambda: float = FALLBACK_LAMBDA):
        self.ridge_lambda = ridge_lambda
        self.fallback_lambda = fallback_lambda

    # -- sklearn parameter plumbing -----------------------------------------

    def get_params(self, deep: bool = True) -> dict:
        return {"ridge_lambda": self.ridge_lambda,
                "fallback_lambda": self.fallback_lambda}

    def set_params(self, **params) -> "NuanceRegressor":
        for key, value in params.items():
            if not hasattr(self, key):
                raise ValueError(f"unknown parameter {key!r}")
            setattr(self, key, value)
        return self

    # -- fitting -------------------------------------------------------------

    def fit(self, X, y) -> "NuanceRegressor":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        require(X.ndim == 2 and X.shape[0] >= 1, "X must be (n, d) with n >= 1")
        if y.ndim == 1:
            y = y[:, None]
        require(y.shape[0] == X.shape[0], "X and y row counts differ")

        means = X.mean(axis=0)
        raw_scales = X.std(axis=0)
        informative = raw_scales > 0
        if not np.any(informative):
            raise ValueError(
                "degenerate training data: all feature rows identical; "
                "provide more varied demonstrations")
        scales = np.where(informative, raw_scales, 1.0)
        z = (X - means) / scales
        zi = z[:, informative]
        n_inf = int(informative.sum())

        lam = self.ridge_lambda
        if lam <= 0 and (X.shape[0] < n_inf
                         or np.linalg.matrix_rank(zi) < n_inf):
            lam = self.fallback_lambda
            log.warning("rank-deficient demonstrations; falling back to "
                        "ridge lambda=%g", lam)
        y_mean = y.mean(axis=0)
        gram = zi.T @ zi + lam * np.eye(n_inf)
        w_std = np.zeros((X.shape[1], y.shape[1]))
        w_std[informative] = np.linalg.solve(gram, zi.T @ (y - y_mean))

        self.effective_lambda_ = float(lam)
        self.means_ = means
        self.scales_ = scales
        # contiguous copy so serialized-and-reloaded weights take the same
        # BLAS path and predictions stay bit-identical after a round trip
        self.weights_ = np.ascontiguousarray((w_std / scales[:, None]).T)
        self.intercept_ = y_mean - self.weights_ @ means
        return self

    def predict_raw(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        if X.shape[1] != self.weights_.shape[1]:
            raise ValueError(
                f"feature dimension mismatch: model expects "
                f"{self.weights_.shape[1]}, got {X.shape[1]}")
        out = X @ self.weights_.T + self.intercept_
        return out[0] if single else out

    def predict(self, X) -> np.ndarray:
        raw = self.predict_raw(X)
        if np.any(raw < 0) or np.any(raw > 1):
            log.debug("prediction clipped; raw values %s", raw)
        return clip01(raw)


@dataclass
class NuanceModel:
    """Serializable trained model with provenance."""

    weights: np.ndarray        # (NUANCE_DIM, d)
    intercept: np.ndarray      # (NUANCE_DIM,)
    feature_means: np.ndarray
    feature_scales: np.ndarray
    trained_on: list[str]
    ridge_lambda: float

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=float)
        self.intercept = np.ascontiguousarray(self.intercept, dtype=float)
        self.feature_means = np.ascontiguousarray(self.feature_means, dtype=float)
        self.feature_scales = np.ascontiguousarray(self.feature_scales, dtype=float)
        require(self.weights.shape[0] == self.intercept.shape[0],
                "weights/intercept dimension mismatch")
        require(self.weights.shape[1] == self.feature_means.shape[0]
                == self.feature_scales.shape[0], "feature dimension mismatch")
        require(bool(np.all(self.feature_scales > 0)), "scales must be positive")
        require(self.ridge_lambda >= 0, "ridge_lambda must be >= 0")

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]

    def predict_raw(self, row: np.ndarray) -> np.ndarray:
        row = np.asarray(row, dtype=float)
        if row.shape != (self.feature_dim,):
            raise ValueError(
                f"feature dimension mismatch: model expects {self.feature_dim}, "
                f"got {row.shape}")
        return self.weights @ row + self.intercept

    def predict(self, row: np.ndarray) -> np.ndarray:
        raw = self.predict_raw(row)
        if np.any(raw < 0) or np.any(raw > 1):
            log.debug("nuance prediction clipped; raw %s", raw)
        return clip01(raw)

    def to_json(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "intercept": self.intercept.tolist(),
            "feature_means": self.feature_means.tolist(),
            "feature_scales": self.feature_scales.tolist(),
            "trained_on": list(self.trained_on),
            "ridge_lambda": self.ridge_lambda,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "NuanceModel":
        return cls(
            weights=np.asarray(obj["weights"]),
            intercept=np.asarray(obj["intercept"]),
            feature_means=np.asarray(obj["feature_means"]),
            feature_scales=np.asarray(obj["feature_scales"]),
            trained_on=list(obj["trained_on"]),
            ridge_lambda=float(obj["ridge_lambda"]),
        )

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path: str | Path) -> "NuanceModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def train(store: DemoStore, ridge_lambda: float = 0.0) -> NuanceModel:
    """Fit a NuanceModel on every row of every stored demonstration."""
    ids = store.ids()
    require(len(ids) >= 1, "need at least one demonstration")
    rows, labels = [], []
    for demo_id in ids:
        demo = store.get(demo_id)
        for fv in demo.feature_rows:
            rows.append(feature_row(fv))
            labels.append(demo.label)
    x = np.vstack(rows)
    y = np.vstack(labels)
    reg = NuanceRegressor(ridge_lambda=ridge_lambda).fit(x, y)
    return NuanceModel(
        weights=reg.weights_,
        intercept=reg.intercept_,
        feature_means=reg.means_,
        feature_scales=reg.scales_,
        trained_on=ids,
        ridge_lambda=reg.effective_lambda_,
    )


@dataclass
class ActionMapConfig:
    volume_ceiling: float = 1.0
    max_gliss_rate: float = 20.0     # Hz/s at abruptness 1
    max_gliss_semitones: float = 1.0
    max_phase_scatter: float = np.pi
    feedback_relief: float = 0.6     # relaxation 1 scales feedback by 1-relief


def map_to_actions(nuance: Sequence[float], rng_seed: int,
                   config: ActionMapConfig | None = None) -> ControlAction:
    """Translate a predicted nuance vector into a ControlAction.

    tension sets how many of the 20 oscillators play (round(tension*20)) and
    their volume; abruptness scales glissando rate and phase scatter;
    relaxation lowers the global feedback multiplier. Which oscillators
    toggle is seeded-random and reproducible.
    """
    cfg = config or ActionMapConfig()
    tension, abruptness, relaxation = (float(v) for v in nuance)
    for name, v in (("tension", tension), ("abruptness", abruptness),
                    ("relaxation", relaxation)):
        require(0.0 <= v <= 1.0, f"{name} must be in [0, 1]")
    rng = np.random.default_rng(rng_seed)
    n_active = int(round(tension * NUM_OSCILLATORS))
    order = rng.permutation(NUM_OSCILLATORS)
    active = set(int(i) for i in order[:n_active])
    muted = set(range(NUM_OSCILLATORS)) - active

    volume_targets = {i: cfg.volume_ceiling * tension for i in sorted(active)}
    glissandi: dict[int, tuple[float, float]] = {}
    phase_offsets: dict[int, float] = {}
    if abruptness > 0:
        for i in sorted(active):
            semis = float(rng.uniform(-1, 1)) * abruptness * cfg.max_gliss_semitones
            rate = abruptness * cfg.max_gliss_rate
            glissandi[i] = (semis, rate)
            phase_offsets[i] = float(rng.uniform(-1, 1)) * abruptness * cfg.max_phase_scatter

    return ControlAction(
        activate=active,
        mute=muted,
        volume_targets=volume_targets,
        phase_offsets=phase_offsets,
        gliss_semitones=glissandi,
        feedback_scale=1.0 - cfg.feedback_relief * relaxation,
    )
