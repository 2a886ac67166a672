"""Hashed bag-of-ngrams text embeddings, cosine similarity and embedding providers."""
from __future__ import annotations

import json
import re
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = (1 << 64) - 1

DEFAULT_DIM = 256

_TOKEN = re.compile(r"[a-z]+")


class EmbeddingError(RuntimeError):
    pass


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & MASK64
    return h


def ngram_keys(tokens: list[str], prefix: str = "", bigrams: bool = True) -> list[str]:
    keys = [prefix + t for t in tokens]
    if bigrams:
        keys += [f"{prefix}{a}|{b}" for a, b in zip(tokens, tokens[1:])]
    return keys


def hash_keys(keys: Iterable[str], dim: int) -> np.ndarray:
    """Signed feature hashing of ``keys`` into an L2-normalised vector."""
    if dim < 2:
        raise ValueError("embedding dimension must be at least 2")
    v = np.zeros(dim)
    for k in keys:
        h = fnv1a_64(k.encode("utf-8"))
        v[h % dim] += -1.0 if h >> 63 else 1.0
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


def embed_hashed(tokens: list[str], dim: int = DEFAULT_DIM, bigrams: bool = True) -> np.ndarray:
    return hash_keys(ngram_keys(tokens, bigrams=bigrams), dim)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


class HashedProvider:
    def __init__(self, dim: int = DEFAULT_DIM):
        self.dim = dim

    def __call__(self, name: str, text: str) -> np.ndarray:
        return embed_hashed(tokenize(text), self.dim)


class FileProvider:
    """Vectors precomputed elsewhere, one ``<name> <v1> ... <vD>`` record per line."""

    def __init__(self, path):
        self.path = Path(path)
        self.table = {}
        for lineno, line in enumerate(self.path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            name, *vals = line.split()
            try:
                self.table[name] = np.array([float(v) for v in vals])
            except ValueError:
                raise EmbeddingError(f"{self.path}:{lineno}: non-numeric vector entry") from None

    def __call__(self, name: str, text: str) -> np.ndarray:
        try:
            return self.table[name]
        except KeyError:
            raise EmbeddingError(f"embedding file {self.path} has no vector for activity {name!r}") from None


class HttpProvider:
    """POSTs ``{"text": ...}`` to ``<url>/embed`` and reads ``{"vector": [...]}``."""

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url.rstrip("/")
        if not self.url.endswith("/embed"):
            self.url += "/embed"
        self.timeout = timeout

    def __call__(self, name: str, text: str) -> np.ndarray:
        req = urllib.request.Request(
            self.url,
            data=json.dumps({"text": text}).encode("utf-8"),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                body = json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as e:
            raise EmbeddingError(f"embedding service returned {e.code} for activity {name!r}") from None
        except (urllib.error.URLError, OSError, json.JSONDecodeError) as e:
            raise EmbeddingError(f"embedding service failed for activity {name!r}: {e}") from None
        if "vector" not in body:
            raise EmbeddingError(f"embedding service response for {name!r} has no 'vector'")
        return np.array(body["vector"], dtype=float)


def make_provider(spec: str | None, dim: int = DEFAULT_DIM):
    """Parse ``hashed``, ``file:<path>`` or ``http:<url>``."""
    if spec in (None, "", "hashed"):
        return HashedProvider(dim)
    if spec.startswith("file:"):
        return FileProvider(spec[len("file:"):])
    if spec.startswith("http:") or spec.startswith("https:"):
        url = spec[len("http:"):] if spec.startswith("http:") and not spec.startswith("http://") else spec
        return HttpProvider(url)
    raise ValueError(f"unknown embedding provider {spec!r}")


@dataclass
class SimilarityMatrix:
    labels: list
    values: np.ndarray

    def __getitem__(self, pair):
        i, j = (self.labels.index(p) for p in pair)
        return self.values[i, j]

    def submatrix(self, rows, cols) -> np.ndarray:
        ri = [self.labels.index(r) for r in rows]
        ci = [self.labels.index(c) for c in cols]
        return self.values[np.ix_(ri, ci)]


def similarity_matrix(descriptions: dict, provider=None) -> SimilarityMatrix:
    if len(descriptions) < 2:
        raise ValueError("need at least two activities")
    provider = provider or HashedProvider()
    labels = list(descriptions)
    vecs = {name: np.asarray(provider(name, descriptions[name]), dtype=float) for name in labels}
    n = len(labels)
    values = np.zeros((n, n))
    for i, a in enumerate(labels):
        values[i, i] = 1.0 if np.linalg.norm(vecs[a]) > 0 else 0.0
        for j in range(i + 1, n):
            b = labels[j]
            # canonical pair order keeps values independent of label order
            x, y = sorted((a, b))
            values[i, j] = values[j, i] = cosine(vecs[x], vecs[y])
    return SimilarityMatrix(labels, values)
