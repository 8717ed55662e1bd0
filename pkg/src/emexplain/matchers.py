"""Black-box matcher contract, trainable similarity baseline, and external clients.

The explainer only ever consumes ``threshold`` and ``predict_batch``; everything
else here is implementation detail of the built-in matcher or transport plumbing
for external ones.
"""

from __future__ import annotations

import json
import subprocess
import uuid
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional, Protocol, Sequence, Union, runtime_checkable

import numpy as np

from .data import Dataset, Record, RecordPair, Value, tokens_of

PROTOCOL_NAME = "em-matcher/1"


class ConfigurationError(Exception):
    pass


class MatcherTransportError(Exception):
    """External matcher failure; carries the request id so callers can retry."""

    def __init__(self, message: str, request_id: Optional[str] = None, retryable: bool = True):
        super().__init__(message)
        self.request_id = request_id
        self.retryable = retryable


@runtime_checkable
class Matcher(Protocol):
    threshold: float

    def predict_batch(self, pairs: Sequence[RecordPair]) -> list[float]: ...


@dataclass
class MatcherConfig:
    threshold: float = 0.5
    batch_size: int = 64

    def __post_init__(self):
        if not (0.0 < self.threshold < 1.0):
            raise ConfigurationError("threshold must be in (0, 1)")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be positive")


@lru_cache(maxsize=1 << 18)
def _token_set(value: Value) -> frozenset[str]:
    return frozenset(tokens_of(value))


def _levenshtein(s1: str, s2: str) -> int:
    if s1 == s2:
        return 0
    if not s1:
        return len(s2)
    if not s2:
        return len(s1)
    if len(s1) < len(s2):
        s1, s2 = s2, s1
    prev = list(range(len(s2) + 1))
    for i, c1 in enumerate(s1):
        cur = [i + 1]
        append = cur.append
        for j, c2 in enumerate(s2):
            append(min(prev[j + 1] + 1, cur[j] + 1, prev[j] + (c1 != c2)))
        prev = cur
    return prev[-1]


def _jaccard(x: frozenset, y: frozenset) -> float:
    if not x and not y:
        return 1.0
    union = len(x | y)
    return len(x & y) / union if union else 1.0


@lru_cache(maxsize=1 << 17)
def _attribute_features(va: Value, vb: Value) -> tuple[float, float, float, float]:
    """(token jaccard, normalized levenshtein sim, scaled numeric diff, missing flag)."""
    if va is None and vb is None:
        return (0.0, 0.0, 0.0, 1.0)
    if va is None or vb is None:
        return (0.0, 0.0, 0.0, 1.0)
    jac = _jaccard(_token_set(va), _token_set(vb))
    sa = " ".join(tokens_of(va))
    sb = " ".join(tokens_of(vb))
    longest = max(len(sa), len(sb))
    lev = 1.0 - _levenshtein(sa, sb) / longest if longest else 1.0
    diff = 0.0
    if isinstance(va, (int, float)) and isinstance(vb, (int, float)):
        scale = max(abs(va), abs(vb))
        diff = abs(va - vb) / scale if scale > 0 else 0.0
    return (jac, lev, diff, 0.0)


def _record_token_set(record: Record) -> frozenset[str]:
    out: set[str] = set()
    for _, v in record.attributes:
        out |= _token_set(v)
    return frozenset(out)


def shared_attribute_names(pair: RecordPair) -> tuple[str, ...]:
    b_names = set(pair.b.names)
    return tuple(n for n in pair.a.names if n in b_names)


def similarity_features(pair: RecordPair, attribute_names: Optional[Sequence[str]] = None) -> np.ndarray:
    """Per shared attribute: jaccard, levenshtein sim, numeric diff, missing flag;
    plus whole-record token jaccard."""
    if attribute_names is None:
        attribute_names = shared_attribute_names(pair)
    feats: list[float] = []
    for name in attribute_names:
        va = pair.a.value_of(name)
        vb = pair.b.value_of(name)
        feats.extend(_attribute_features(va, vb))
    feats.append(_jaccard(_record_token_set(pair.a), _record_token_set(pair.b)))
    return np.asarray(feats, dtype=np.float64)


def feature_names(attribute_names: Sequence[str]) -> list[str]:
    names = []
    for a in attribute_names:
        names.extend([f"{a}.jaccard", f"{a}.levenshtein", f"{a}.numdiff", f"{a}.missing"])
    names.append("record.jaccard")
    return names


@dataclass
class BaselineMatcherModel:
    attribute_names: tuple[str, ...]
    weights: np.ndarray
    bias: float
    feature_mean: np.ndarray
    feature_std: np.ndarray
    threshold: float = 0.5
    epochs: int = 0
    seed: int = 0
    validation_f1: float = float("nan")

    def to_json(self) -> dict:
        return {
            "format": "emexplain-baseline-matcher/1",
            "attribute_names": list(self.attribute_names),
            "weights": [float(w) for w in self.weights],
            "bias": float(self.bias),
            "feature_mean": [float(v) for v in self.feature_mean],
            "feature_std": [float(v) for v in self.feature_std],
            "threshold": self.threshold,
            "epochs": self.epochs,
            "seed": self.seed,
            "validation_f1": self.validation_f1,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BaselineMatcherModel":
        return cls(
            attribute_names=tuple(obj["attribute_names"]),
            weights=np.asarray(obj["weights"], dtype=np.float64),
            bias=float(obj["bias"]),
            feature_mean=np.asarray(obj["feature_mean"], dtype=np.float64),
            feature_std=np.asarray(obj["feature_std"], dtype=np.float64),
            threshold=float(obj["threshold"]),
            epochs=int(obj["epochs"]),
            seed=int(obj["seed"]),
            validation_f1=float(obj["validation_f1"]),
        )

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "BaselineMatcherModel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


class BaselineMatcher:
    """Logistic regression over handcrafted similarity features.

    Interpretable by construction, but the explainer treats it strictly as a
    black box behind ``predict_batch``.
    """

    def __init__(self, model: Optional[BaselineMatcherModel] = None, batch_size: int = 64):
        self.model = model
        self.batch_size = batch_size

    @property
    def threshold(self) -> float:
        return self.model.threshold if self.model else 0.5

    def get_params(self, deep: bool = True) -> dict:
        return {"model": self.model, "batch_size": self.batch_size}

    def set_params(self, **params) -> "BaselineMatcher":
        for k, v in params.items():
            setattr(self, k, v)
        return self

    def fit(
        self,
        pairs: Sequence[RecordPair],
        labels: Sequence[int],
        valid_pairs: Optional[Sequence[RecordPair]] = None,
        valid_labels: Optional[Sequence[int]] = None,
        epochs: int = 100,
        learning_rate: float = 0.5,
        l2: float = 1e-3,
        threshold: float = 0.5,
        seed: int = 0,
    ) -> "BaselineMatcher":
        if not pairs:
            raise ConfigurationError("training data is empty")
        y = np.asarray(labels, dtype=np.float64)
        if len(set(labels)) < 2:
            raise ConfigurationError("training data must contain both labels")
        attribute_names = shared_attribute_names(pairs[0])
        X = np.stack([similarity_features(p, attribute_names) for p in pairs])
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std[std == 0] = 1.0
        Xs = (X - mean) / std
        # class-balanced sample weights so sparse matches still move the loss
        n_pos = max(y.sum(), 1.0)
        n_neg = max(len(y) - y.sum(), 1.0)
        sw = np.where(y == 1, len(y) / (2 * n_pos), len(y) / (2 * n_neg))
        w = np.zeros(Xs.shape[1])
        b = 0.0
        n = len(y)
        for _ in range(epochs):
            z = Xs @ w + b
            p = 1.0 / (1.0 + np.exp(-z))
            g = sw * (p - y)
            grad_w = Xs.T @ g / n + l2 * w
            grad_b = g.sum() / n
            w -= learning_rate * grad_w
            b -= learning_rate * grad_b
        self.model = BaselineMatcherModel(
            attribute_names=attribute_names,
            weights=w,
            bias=b,
            feature_mean=mean,
            feature_std=std,
            threshold=threshold,
            epochs=epochs,
            seed=seed,
        )
        if valid_pairs:
            scores = self.predict_batch(list(valid_pairs))
            self.model.validation_f1 = f1_score(
                [int(s > threshold) for s in scores], list(valid_labels)
            )
        return self

    def predict_batch(self, pairs: Sequence[RecordPair]) -> list[float]:
        if not pairs:
            raise ValueError("predict_batch requires a non-empty batch")
        if self.model is None:
            raise ConfigurationError("matcher is not trained")
        m = self.model
        X = np.stack([similarity_features(p, m.attribute_names) for p in pairs])
        Xs = (X - m.feature_mean) / m.feature_std
        z = np.clip(Xs @ m.weights + m.bias, -500, 500)
        scores = 1.0 / (1.0 + np.exp(-z))
        return [float(s) for s in scores]

    def predict_proba(self, pairs: Sequence[RecordPair]) -> np.ndarray:
        s = np.asarray(self.predict_batch(pairs))
        return np.column_stack([1 - s, s])

    def predict(self, pairs: Sequence[RecordPair]) -> list[int]:
        return [int(s > self.threshold) for s in self.predict_batch(pairs)]


def f1_score(predicted: Sequence[int], actual: Sequence[int]) -> float:
    tp = sum(1 for p, a in zip(predicted, actual) if p == 1 and a == 1)
    fp = sum(1 for p, a in zip(predicted, actual) if p == 1 and a == 0)
    fn = sum(1 for p, a in zip(predicted, actual) if p == 0 and a == 1)
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def train_baseline_matcher(dataset: Dataset, config: Optional[MatcherConfig] = None, seed: int = 0, epochs: int = 100) -> BaselineMatcherModel:
    """Train the built-in matcher on a dataset's train split; validation F1 stored on the model."""
    config = config or MatcherConfig()
    train = dataset.pairs("train")
    if not train:
        raise ConfigurationError("train split is empty")
    valid = dataset.pairs("valid")
    matcher = BaselineMatcher(batch_size=config.batch_size)
    matcher.fit(
        [p for p, _ in train],
        [l for _, l in train],
        valid_pairs=[p for p, _ in valid] or None,
        valid_labels=[l for _, l in valid] or None,
        threshold=config.threshold,
        seed=seed,
        epochs=epochs,
    )
    return matcher.model


def predict_batch(matcher: Matcher, pairs: Sequence[RecordPair]) -> list[float]:
    """Score pairs with any matcher honoring the black-box contract."""
    return matcher.predict_batch(pairs)


class BatchingMatcher:
    """Wraps a matcher so arbitrarily large batches are chunked to its batch size."""

    def __init__(self, matcher: Matcher, batch_size: int = 64):
        self.matcher = matcher
        self.batch_size = getattr(matcher, "batch_size", None) or batch_size
        self.threshold = matcher.threshold
        self.calls = 0

    def predict_batch(self, pairs: Sequence[RecordPair]) -> list[float]:
        out: list[float] = []
        for i in range(0, len(pairs), self.batch_size):
            chunk = pairs[i : i + self.batch_size]
            self.calls += 1
            out.extend(self.matcher.predict_batch(chunk))
        return out


class HttpMatcherClient:
    """Client for the em-matcher/1 protocol over HTTP (POST /predict, GET /meta)."""

    def __init__(self, url: str, batch_size: int = 64, timeout: float = 60.0):
        import requests

        self._requests = requests
        self.url = url.rstrip("/")
        self.batch_size = batch_size
        self.timeout = timeout
        try:
            meta = requests.get(f"{self.url}/meta", timeout=timeout).json()
        except Exception as e:
            raise MatcherTransportError(f"handshake with {url} failed: {e}") from e
        if meta.get("protocol") != PROTOCOL_NAME:
            raise MatcherTransportError(f"unexpected protocol: {meta.get('protocol')!r}")
        self.threshold = float(meta.get("threshold", 0.5))
        self.threshold_declared = "threshold" in meta

    def predict_batch(self, pairs: Sequence[RecordPair]) -> list[float]:
        out: list[float] = []
        for i in range(0, len(pairs), self.batch_size):
            chunk = pairs[i : i + self.batch_size]
            request_id = str(uuid.uuid4())
            payload = {"id": request_id, "pairs": [p.to_json() for p in chunk]}
            try:
                resp = self._requests.post(f"{self.url}/predict", json=payload, timeout=self.timeout).json()
            except Exception as e:
                raise MatcherTransportError(str(e), request_id=request_id) from e
            if resp.get("error"):
                raise MatcherTransportError(resp["error"], request_id=resp.get("id", request_id))
            if resp.get("id") != request_id or len(resp.get("scores", [])) != len(chunk):
                raise MatcherTransportError("malformed response", request_id=request_id)
            out.extend(float(s) for s in resp["scores"])
        return out


class StdioMatcherClient:
    """Client for the em-matcher/1 protocol over a child process stdio channel."""

    def __init__(self, command: Sequence[str], batch_size: int = 64):
        self.batch_size = batch_size
        try:
            self.proc = subprocess.Popen(
                list(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
            line = self.proc.stdout.readline()
            meta = json.loads(line)
        except Exception as e:
            raise MatcherTransportError(f"handshake with {command!r} failed: {e}") from e
        if meta.get("protocol") != PROTOCOL_NAME:
            raise MatcherTransportError(f"unexpected protocol: {meta.get('protocol')!r}")
        self.threshold = float(meta.get("threshold", 0.5))
        self.threshold_declared = "threshold" in meta

    def predict_batch(self, pairs: Sequence[RecordPair]) -> list[float]:
        out: list[float] = []
        for i in range(0, len(pairs), self.batch_size):
            chunk = pairs[i : i + self.batch_size]
            request_id = str(uuid.uuid4())
            payload = {"id": request_id, "pairs": [p.to_json() for p in chunk]}
            try:
                self.proc.stdin.write(json.dumps(payload, ensure_ascii=False) + "\n")
                self.proc.stdin.flush()
                resp = json.loads(self.proc.stdout.readline())
            except Exception as e:
                raise MatcherTransportError(str(e), request_id=request_id) from e
            if resp.get("error"):
                raise MatcherTransportError(resp["error"], request_id=resp.get("id", request_id))
            if resp.get("id") != request_id or len(resp.get("scores", [])) != len(chunk):
                raise MatcherTransportError("malformed response", request_id=request_id)
            out.extend(float(s) for s in resp["scores"])
        return out

    def close(self) -> None:
        if self.proc.poll() is None:
            self.proc.stdin.close()
            self.proc.wait(timeout=10)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
