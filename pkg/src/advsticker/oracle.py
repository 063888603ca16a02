"""Black-box score oracles.

Every oracle answers "how does the model score this face?" and nothing else.
The base class owns query counting (with an optional hard budget) and result
caching; concrete oracles supply the scoring itself.  `SyntheticOracle` reads
a closed-form landscape so searches can run without any model in the loop;
`RemoteOracle` speaks the HTTP protocol of a real scoring service.
"""

import hashlib
import math
import threading
import time
from dataclasses import dataclass

import numpy as np
import requests

from .io import encode_image_b64, to_uint8


class BudgetExhausted(RuntimeError):
    """A query would exceed the configured budget."""


class RemoteError(RuntimeError):
    """The remote scoring service misbehaved past the retry limit."""


class QueryResult:
    """Identity probabilities from one oracle query, ordered best first.

    Ties order alphabetically so top1/top2 are deterministic.
    """

    __slots__ = ("_probs", "_order")

    def __init__(self, probs):
        if not probs:
            raise ValueError("empty score table")
        clean = {}
        for label, p in probs.items():
            p = float(p)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability out of range for {label!r}: {p}")
            clean[str(label)] = p
        self._probs = clean
        self._order = sorted(clean, key=lambda lab: (-clean[lab], lab))

    @property
    def top1(self):
        return self._order[0]

    @property
    def top2(self):
        return self._order[1] if len(self._order) > 1 else None

    def prob(self, label, default=0.0):
        return self._probs.get(label, default)

    def items(self):
        return [(lab, self._probs[lab]) for lab in self._order]

    def labels(self):
        return list(self._order)

    def as_scores(self):
        """Wire shape: list of {"label", "prob"} rows, descending."""
        return [{"label": lab, "prob": self._probs[lab]} for lab in self._order]

    def __eq__(self, other):
        if not isinstance(other, QueryResult):
            return NotImplemented
        return self._probs == other._probs

    def __repr__(self):
        top = self._order[0]
        return f"QueryResult(top1={top!r}:{self._probs[top]:.4f}, n={len(self._order)})"


class QueryCounter:
    """Thread-safe query tally with an optional hard cap."""

    def __init__(self, budget=None):
        if budget is not None and budget < 0:
            raise ValueError("budget must be nonnegative")
        self.budget = budget
        self._count = 0
        self._lock = threading.Lock()

    @property
    def count(self):
        return self._count

    def charge(self, n=1):
        with self._lock:
            if self.budget is not None and self._count + n > self.budget:
                raise BudgetExhausted(f"query budget {self.budget} exhausted")
            self._count += n


class Oracle:
    """Counting, caching front-end over a scoring backend.

    Subclasses implement `_evaluate(image, params)` and `_cache_key`.  A cache
    hit returns the stored result without charging the counter unless
    `count_cache_hits` is set; `cache_enabled=False` turns the cache off.
    `needs_image` tells callers whether queries must carry a rendered image or
    whether search parameters alone suffice.
    """

    needs_image = True

    def __init__(self, budget=None, cache_enabled=True, count_cache_hits=False):
        self.counter = QueryCounter(budget)
        self.cache_enabled = cache_enabled
        self.count_cache_hits = count_cache_hits
        self._cache = {}
        self._cache_lock = threading.Lock()

    def query(self, image=None, params=None):
        key = self._cache_key(image, params) if self.cache_enabled else None
        if key is not None:
            with self._cache_lock:
                hit = self._cache.get(key)
            if hit is not None:
                if self.count_cache_hits:
                    self.counter.charge()
                return hit
        self.counter.charge()
        result = self._evaluate(image, params)
        if key is not None:
            with self._cache_lock:
                self._cache[key] = result
        return result

    def labels(self):
        raise NotImplementedError

    def _cache_key(self, image, params):
        raise NotImplementedError

    def _evaluate(self, image, params):
        raise NotImplementedError


@dataclass(frozen=True)
class Bump:
    """One localized score boost for a single wrong identity.

    Strongest at `center` and at sticker angle `phase_deg`; falls off with a
    Gaussian of width `sigma` in position and a raised cosine in angle
    (period 360 degrees, zero at phase + 180).
    """

    center: tuple
    sigma: float
    amplitude: float
    phase_deg: float
    target: str


def _softmax(scores):
    m = max(scores.values())
    exps = {lab: math.exp(v - m) for lab, v in scores.items()}
    z = sum(exps.values())
    return {lab: e / z for lab, e in exps.items()}


class SyntheticLandscape:
    """Closed-form score field standing in for a face model.

    The true identity (labels[0]) holds a constant base score; each bump adds
    score to one wrong identity.  Softmax turns scores into probabilities, so
    with no bump in range the true identity wins comfortably and near a strong
    bump at the right angle it can be overtaken.  Bump placement, widths,
    amplitudes, phases, and targets are drawn deterministically from `seed`;
    pass `bumps` explicitly to bypass the draw.
    """

    def __init__(self, seed=0, index=None, gallery_size=5, n_bumps=3,
                 sigma_range=(4.0, 12.0), amplitude_range=(3.0, 4.5),
                 phase_range=(-60.0, 60.0), base_margin=2.0,
                 labels=None, bumps=None):
        if index is None or len(index) == 0:
            raise ValueError("a nonempty valid-position index is required")
        self.index = index
        if labels is None:
            labels = [f"id_{k:02d}" for k in range(gallery_size)]
        if len(labels) < 2:
            raise ValueError("need the true identity plus at least one other")
        self.labels = [str(lab) for lab in labels]
        self.ground_truth = self.labels[0]
        self.base_margin = float(base_margin)
        self.seed = seed
        if bumps is None:
            rng = np.random.default_rng(seed)
            bumps = self._draw_bumps(rng, n_bumps, sigma_range,
                                     amplitude_range, phase_range)
        self.bumps = tuple(bumps)

    def _draw_bumps(self, rng, n_bumps, sigma_range, amplitude_range, phase_range):
        wrong = self.labels[1:]
        replace = n_bumps > len(wrong)
        targets = [str(t) for t in rng.choice(wrong, size=n_bumps, replace=replace)]
        bumps = []
        for k in range(n_bumps):
            sigma = float(rng.uniform(*sigma_range))
            amplitude = float(rng.uniform(*amplitude_range))
            phase = float(rng.uniform(*phase_range))
            center = self._draw_center(rng, bumps, sigma)
            bumps.append(Bump(center=center, sigma=sigma, amplitude=amplitude,
                              phase_deg=phase, target=targets[k]))
        return bumps

    def _draw_center(self, rng, placed, sigma):
        # rejection-sample so bumps come out as visually distinct regions;
        # give up on separation after enough tries (tiny masks)
        pos = None
        for _ in range(100):
            pos = self.index[int(rng.integers(0, len(self.index)))]
            if all(math.dist(pos, b.center) >= 1.5 * (sigma + b.sigma) for b in placed):
                return pos
        return pos

    def score_at(self, row, col, angle):
        scores = {lab: 0.0 for lab in self.labels}
        scores[self.ground_truth] = self.base_margin
        for b in self.bumps:
            d2 = (row - b.center[0]) ** 2 + (col - b.center[1]) ** 2
            radial = math.exp(-d2 / (2.0 * b.sigma ** 2))
            angular = 0.5 * (1.0 + math.cos(math.radians(angle - b.phase_deg)))
            scores[b.target] += b.amplitude * radial * angular
        return QueryResult(_softmax(scores))

    def no_attack(self):
        """Scores for the clean face: base margin only, no bump anywhere."""
        scores = {lab: 0.0 for lab in self.labels}
        scores[self.ground_truth] = self.base_margin
        return QueryResult(_softmax(scores))


def synthetic_score(landscape, theta):
    """Landscape score at a search point (position index + angle)."""
    row, col = landscape.index[theta.position_index]
    return landscape.score_at(row, col, theta.angle)


class SyntheticOracle(Oracle):
    """Oracle answering from a synthetic landscape.

    Scores depend only on the search parameters, so no image needs to be
    rendered; `query(params=None)` returns the clean-face scores.
    """

    needs_image = False

    def __init__(self, landscape, **kwargs):
        super().__init__(**kwargs)
        self.landscape = landscape

    def labels(self):
        return list(self.landscape.labels)

    def _cache_key(self, image, params):
        if params is None:
            return ("no_attack",)
        return (params.position_index, params.angle)

    def _evaluate(self, image, params):
        if params is None:
            return self.landscape.no_attack()
        return synthetic_score(self.landscape, params)


class RemoteOracle(Oracle):
    """Client for an HTTP scoring service.

    POST /score with {"image": "<base64 PNG>", "top_k": K} expecting
    {"scores": [{"label", "prob"}, ...]}; GET /labels for the gallery.
    Transient failures (connection errors, non-200, non-JSON) are retried
    with exponential backoff; a well-formed reply that violates the score
    schema raises `RemoteError` immediately.  Results are cached on the
    8-bit image content actually sent.
    """

    needs_image = True

    def __init__(self, url, top_k=None, retries=3, backoff=0.5, timeout=10.0,
                 session=None, sleep=time.sleep, **kwargs):
        super().__init__(**kwargs)
        self.url = url.rstrip("/")
        self.top_k = top_k
        self.retries = int(retries)
        self.backoff = float(backoff)
        self.timeout = timeout
        self._session = session if session is not None else requests.Session()
        self._sleep = sleep

    def labels(self):
        payload = self._request("GET", "/labels")
        labels = payload.get("labels") if isinstance(payload, dict) else None
        if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
            raise RemoteError(f"malformed label listing: {payload!r}")
        return labels

    def _cache_key(self, image, params):
        if image is None:
            raise ValueError("remote scoring requires an image")
        u8 = to_uint8(image)
        return (u8.shape, hashlib.sha256(u8.tobytes()).hexdigest())

    def _evaluate(self, image, params):
        if image is None:
            raise ValueError("remote scoring requires an image")
        body = {"image": encode_image_b64(image)}
        if self.top_k is not None:
            body["top_k"] = self.top_k
        return self._parse_scores(self._request("POST", "/score", body))

    def _parse_scores(self, payload):
        scores = payload.get("scores") if isinstance(payload, dict) else None
        if not isinstance(scores, list) or not scores:
            raise RemoteError(f"malformed score payload: {payload!r}")
        probs = {}
        for row in scores:
            try:
                label, p = row["label"], float(row["prob"])
            except (TypeError, KeyError, ValueError):
                raise RemoteError(f"malformed score row: {row!r}") from None
            if label in probs:
                raise RemoteError(f"duplicate label in scores: {label!r}")
            probs[label] = p
        try:
            return QueryResult(probs)
        except ValueError as exc:
            raise RemoteError(str(exc)) from None

    def _request(self, method, path, body=None):
        url = self.url + path
        last = None
        for attempt in range(self.retries + 1):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            try:
                if method == "GET":
                    resp = self._session.get(url, timeout=self.timeout)
                else:
                    resp = self._session.post(url, json=body, timeout=self.timeout)
            except requests.RequestException as exc:
                last = f"{type(exc).__name__}: {exc}"
                continue
            if resp.status_code != 200:
                last = f"HTTP {resp.status_code}"
                continue
            try:
                return resp.json()
            except ValueError:
                last = "response body is not JSON"
                continue
        raise RemoteError(f"{method} {url} failed after {self.retries + 1} attempts ({last})")
