"""Device profile registry with threshold identification.

Brute-force nearest-neighbour search is the reference; ``LshIndex`` is a
random-hyperplane accelerator whose answers are re-ranked by exact
similarity.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .features import FeatureVector

MATCHED = "matched"
NEW_DEVICE = "new_device"
INCONCLUSIVE = "inconclusive"


class EmptyRegistryError(LookupError):
    pass


@dataclass
class DeviceProfile:
    device_id: str
    enrolled: list = field(default_factory=list)
    created_at: str | None = None

    @property
    def spec_id(self):
        return self.enrolled[0].spec_id if self.enrolled else None


@dataclass
class MatchDecision:
    """Outcome of one identification.

    For ``matched`` and ``new_device`` the outcome is matched exactly when
    ``best_similarity >= threshold``. An empty registry yields ``new_device``
    with ``best_similarity = -inf``.
    """

    outcome: str
    device_id: str | None
    best_similarity: float
    threshold: float
    runner_up_similarity: float | None = None
    samples: int = 1

    @property
    def matched(self) -> bool:
        return self.outcome == MATCHED

    def to_dict(self) -> dict:
        def num(x):
            if x is None or np.isfinite(x):
                return x
            return "-inf" if x < 0 else "inf"

        return {
            "outcome": self.outcome,
            "device_id": self.device_id,
            "best_similarity": num(self.best_similarity),
            "threshold": self.threshold,
            "runner_up_similarity": num(self.runner_up_similarity),
            "samples": self.samples,
        }


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _check_alpha(alpha):
    if not -1.0 < alpha < 1.0:
        raise ValueError(f"threshold must lie in (-1, 1), got {alpha}")


class Registry:
    """In-memory profile store, optionally journalled to a JSON-lines file.

    ``match_target="feature"`` compares against every enrolled feature;
    ``"centroid"`` compares against each profile's normalized mean.
    Reads may run concurrently; enrollments are serialized by a lock and the
    search matrix is swapped in atomically.
    """

    def __init__(self, path=None, match_target: str = "feature"):
        if match_target not in ("feature", "centroid"):
            raise ValueError(f"unknown match target {match_target!r}")
        self.path = Path(path) if path is not None else None
        self.match_target = match_target
        self.profiles: dict[str, DeviceProfile] = {}
        self._lock = threading.Lock()
        self._matrix = (np.zeros((0, 0)), np.array([], dtype=object))

    def __len__(self):
        return len(self.profiles)

    @property
    def spec_id(self):
        for p in self.profiles.values():
            return p.spec_id
        return None

    @property
    def dimension(self):
        for p in self.profiles.values():
            return len(p.enrolled[0])
        return None

    def feature_count(self) -> int:
        return sum(len(p.enrolled) for p in self.profiles.values())

    @classmethod
    def load(cls, path, match_target: str = "feature") -> "Registry":
        reg = cls(None, match_target)
        path = Path(path)
        if path.exists():
            for lineno, line in enumerate(path.read_text().splitlines(), 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    feat = FeatureVector.from_dict(rec)
                    reg._add(feat, rec["device_id"], rec.get("enrolled_at"))
                except (KeyError, json.JSONDecodeError) as exc:
                    raise ValueError(f"{path}:{lineno}: bad enrollment record ({exc})") from exc
            reg._rebuild()
        reg.path = path
        return reg

    def _add(self, feature: FeatureVector, device_id: str, stamp=None):
        if self.profiles:
            if feature.spec_id != self.spec_id:
                raise ValueError(f"spec mismatch: registry holds {self.spec_id!r}, got {feature.spec_id!r}")
            if len(feature) != self.dimension:
                raise ValueError(f"dimension mismatch: registry holds {self.dimension}, got {len(feature)}")
        profile = self.profiles.get(device_id)
        if profile is None:
            profile = self.profiles[device_id] = DeviceProfile(device_id, [], stamp)
        profile.enrolled.append(feature)

    def enroll(self, feature: FeatureVector, device_id: str) -> None:
        with self._lock:
            stamp = _now()
            self._add(feature, str(device_id), stamp)
            if self.path is not None:
                rec = {"device_id": str(device_id), **feature.to_dict(), "enrolled_at": stamp}
                with open(self.path, "a") as fh:
                    fh.write(json.dumps(rec) + "\n")
            self._rebuild()

    def enroll_many(self, features, device_id: str) -> None:
        for f in features:
            self.enroll(f, device_id)

    def _rebuild(self):
        rows, ids = [], []
        for pid in sorted(self.profiles):
            vals = np.array([f.values for f in self.profiles[pid].enrolled])
            if self.match_target == "centroid":
                c = vals.mean(axis=0)
                vals = (c / np.linalg.norm(c))[None, :]
            rows.append(vals)
            ids.extend([pid] * len(vals))
        matrix = np.vstack(rows) if rows else np.zeros((0, 0))
        self._matrix = (matrix, np.array(ids, dtype=object))

    def vectors(self):
        """(matrix, ids) snapshot of the vectors searched by ``identify``."""
        return self._matrix

    def _check_query(self, q: FeatureVector):
        if self.profiles and (q.spec_id != self.spec_id or len(q) != self.dimension):
            raise ValueError(f"query ({q.spec_id!r}, {len(q)}) does not match registry "
                             f"({self.spec_id!r}, {self.dimension})")

    def _ranked(self, q: FeatureVector):
        return _rank(*self._matrix, q)

    def nearest_bruteforce(self, q: FeatureVector) -> tuple[str, float]:
        if not self.profiles:
            raise EmptyRegistryError("registry is empty")
        self._check_query(q)
        pid, sim = self._ranked(q)[0]
        return pid, float(sim)

    def _decide(self, order, alpha) -> MatchDecision:
        if not order:
            return MatchDecision(NEW_DEVICE, None, -np.inf, alpha)
        pid, best = order[0]
        runner = float(order[1][1]) if len(order) > 1 else None
        if best >= alpha:
            return MatchDecision(MATCHED, pid, float(best), alpha, runner)
        return MatchDecision(NEW_DEVICE, None, float(best), alpha, runner)

    def identify(self, q: FeatureVector, alpha: float = 0.7) -> MatchDecision:
        """Threshold decision against the most similar enrolled vector. Never mutates."""
        _check_alpha(alpha)
        if not self.profiles:
            return MatchDecision(NEW_DEVICE, None, -np.inf, alpha)
        self._check_query(q)
        return self._decide(self._ranked(q), alpha)

    def identify_multisample(self, qs, alpha: float = 0.7) -> MatchDecision:
        return combine_decisions([self.identify(q, alpha) for q in _as_list(qs)], alpha)


def _rank(matrix, ids, q: FeatureVector):
    """Per-device best similarity, highest first, ties by lexicographic id."""
    sims = 1.0 - np.linalg.norm(matrix - q.values, axis=1)
    best = {}
    for pid, s in zip(ids, sims):
        if s > best.get(pid, -np.inf):
            best[pid] = s
    return sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))


def _as_list(qs):
    qs = list(qs)
    if not qs:
        raise ValueError("need at least one query sample")
    if len({q.spec_id for q in qs}) != 1:
        raise ValueError("query samples must share a spec_id")
    return qs


def combine_decisions(decisions, alpha) -> MatchDecision:
    """Unanimity rule over independent samples.

    Matched only if every sample matches the same device, new device only if
    every sample fails to match, inconclusive otherwise. The reported
    similarity is the weakest per-sample best similarity, except for a new
    device where it is the strongest.
    """
    k = len(decisions)
    sims = [d.best_similarity for d in decisions]
    ids = {d.device_id for d in decisions}
    if all(d.matched for d in decisions) and len(ids) == 1:
        return MatchDecision(MATCHED, ids.pop(), min(sims), alpha, samples=k)
    if not any(d.matched for d in decisions):
        return MatchDecision(NEW_DEVICE, None, max(sims), alpha, samples=k)
    return MatchDecision(INCONCLUSIVE, None, min(sims), alpha, samples=k)


class LshIndex:
    """Random-hyperplane LSH over a registry snapshot.

    Vectors are centred on the registry mean before hashing; fingerprints
    of one device model all point in nearly the same direction, so
    uncentred hyperplanes would split them poorly. With ``planes=0`` every
    vector shares one bucket and queries reduce to brute force.
    """

    def __init__(self, registry: Registry, planes: int = 12, tables: int = 8, seed=0):
        matrix, ids = registry.vectors()
        if len(ids) == 0:
            raise EmptyRegistryError("cannot index an empty registry")
        if planes < 0 or tables < 1:
            raise ValueError("need planes >= 0 and tables >= 1")
        self.registry = registry
        self.planes, self.tables = planes, tables
        self.spec_id = registry.spec_id
        self._matrix, self._ids = matrix, ids
        self.center = matrix.mean(axis=0)
        rng = np.random.default_rng(seed)
        self.hyperplanes = rng.standard_normal((tables, planes, matrix.shape[1]))
        self.buckets = []
        keys = self._keys(matrix)
        for t in range(tables):
            table: dict[bytes, list[int]] = {}
            for row, key in enumerate(keys[t]):
                table.setdefault(key, []).append(row)
            self.buckets.append(table)

    def _keys(self, vectors):
        vectors = np.atleast_2d(vectors) - self.center
        bits = np.einsum("tpd,nd->tnp", self.hyperplanes, vectors) >= 0
        return [[np.packbits(b).tobytes() for b in table] for table in bits]

    def candidates(self, q: FeatureVector) -> np.ndarray:
        keys = self._keys(q.values)
        rows = set()
        for t in range(self.tables):
            rows.update(self.buckets[t].get(keys[t][0], ()))
        return np.array(sorted(rows), dtype=int)

    def query(self, q: FeatureVector, alpha: float = 0.7) -> MatchDecision:
        _check_alpha(alpha)
        self.registry._check_query(q)
        rows = self.candidates(q)
        if rows.size == 0:
            return MatchDecision(NEW_DEVICE, None, -np.inf, alpha)
        order = _rank(self._matrix[rows], self._ids[rows], q)
        return self.registry._decide(order, alpha)


def lsh_build(registry: Registry, planes: int = 12, tables: int = 8, seed=0) -> LshIndex:
    return LshIndex(registry, planes, tables, seed)


def lsh_query(index: LshIndex, q: FeatureVector, alpha: float = 0.7) -> MatchDecision:
    return index.query(q, alpha)
