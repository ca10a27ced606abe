"""Dense-vector contract: deterministic reference embedder and remote client.

The reference embedder is a hashed bag-of-tokens: each token lands on one
coordinate with a sign, both derived from a 64-bit FNV-1a hash, so the same
(text, seed, dimension) yields the same unit vector on every platform. The
remote client is the slot for a real sentence encoder behind a small HTTP
protocol.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import httpx
import numpy as np

from .analysis import STANDARD, analyze
from .errors import BadResponse, DimensionMismatch, DocfunnelError, EmbeddingTimeout

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes, seed: int = 0) -> int:
    h = (_FNV_OFFSET ^ (seed & _MASK64)) & _MASK64
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class EmbeddingVector:
    values: np.ndarray
    is_zero: bool = False

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class EmbedderConfig:
    kind: str = "reference"  # reference | remote
    dimension: int = 256
    seed: int = 0
    endpoint: str = ""
    timeout: float = 10.0
    max_parallel: int = 4
    batch_size: int = 32

    def __post_init__(self):
        if self.kind not in ("reference", "remote"):
            raise DocfunnelError(f"unknown embedder kind: {self.kind!r}")
        if self.dimension < 8:
            raise DocfunnelError("embedding dimension must be >= 8")
        if self.kind == "remote" and not self.endpoint:
            raise DocfunnelError("remote embedder requires an endpoint")

    def key(self) -> str:
        if self.kind == "reference":
            return f"reference:d{self.dimension}:s{self.seed}"
        return f"remote:{self.endpoint}:d{self.dimension}"


def _normalize(values: np.ndarray) -> EmbeddingVector:
    norm = float(np.linalg.norm(values))
    if norm == 0.0:
        return EmbeddingVector(values=values, is_zero=True)
    return EmbeddingVector(values=values / norm)


def embed_text(text: str, config: EmbedderConfig = EmbedderConfig()) -> EmbeddingVector:
    """Reference embedding of one text; empty text maps to a flagged zero vector."""
    if config.kind != "reference":
        raise DocfunnelError("embed_text is the reference embedder; use remote_embed")
    d = config.dimension
    values = np.zeros(d, dtype=np.float64)
    for token in analyze(text, STANDARD):
        h = fnv1a64(token.encode("utf-8"), seed=config.seed)
        coordinate = h % d
        sign = 1.0 if (h // d) % 2 == 0 else -1.0
        values[coordinate] += sign
    return _normalize(values)


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine of two vectors; 0 when either is the zero vector."""
    if a.dimension != b.dimension:
        raise DimensionMismatch(f"{a.dimension} != {b.dimension}")
    if a.is_zero or b.is_zero:
        return 0.0
    na = float(np.linalg.norm(a.values))
    nb = float(np.linalg.norm(b.values))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a.values, b.values) / (na * nb))


def remote_embed(texts: list[str], config: EmbedderConfig) -> list[EmbeddingVector]:
    """Embed a batch through the remote protocol, preserving input order.

    Batches beyond `batch_size` are split and sent with at most
    `max_parallel` requests in flight; vectors are re-normalized locally.
    """
    if config.kind != "remote":
        raise DocfunnelError("remote_embed requires a remote embedder config")
    if not texts:
        return []

    batches = [texts[i : i + config.batch_size] for i in range(0, len(texts), config.batch_size)]

    def post(batch: list[str]) -> list[EmbeddingVector]:
        try:
            response = httpx.post(
                config.endpoint, json={"texts": batch}, timeout=config.timeout
            )
        except httpx.TimeoutException as exc:
            raise EmbeddingTimeout(f"embedding request timed out: {exc}") from exc
        except httpx.HTTPError as exc:
            raise BadResponse(f"embedding request failed: {exc}") from exc
        if response.status_code != 200:
            raise BadResponse(f"embedding endpoint returned {response.status_code}")
        try:
            vectors = response.json()["vectors"]
        except (KeyError, ValueError) as exc:
            raise BadResponse(f"malformed embedding response: {exc}") from exc
        if len(vectors) != len(batch):
            raise BadResponse(f"expected {len(batch)} vectors, got {len(vectors)}")
        out = []
        for vec in vectors:
            if len(vec) != config.dimension:
                raise BadResponse(
                    f"expected dimension {config.dimension}, got {len(vec)}"
                )
            out.append(_normalize(np.asarray(vec, dtype=np.float64)))
        return out

    if len(batches) == 1:
        return post(batches[0])
    with ThreadPoolExecutor(max_workers=max(1, config.max_parallel)) as pool:
        results = list(pool.map(post, batches))
    return [v for batch in results for v in batch]


@dataclass
class Embedder:
    """Uniform entry point dispatching on the configured provider."""

    config: EmbedderConfig = field(default_factory=EmbedderConfig)

    def embed_batch(self, texts: list[str]) -> list[EmbeddingVector]:
        if self.config.kind == "reference":
            return [embed_text(t, self.config) for t in texts]
        return remote_embed(texts, self.config)

    def embed(self, text: str) -> EmbeddingVector:
        return self.embed_batch([text])[0]
