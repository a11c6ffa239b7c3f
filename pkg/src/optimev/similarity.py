"""Bytecode similarity from opcode n-gram frequency vectors."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np
from scipy import sparse

from .ingest import ContractBytecode
from .opcodes import disassemble

NGRAM = 5


@dataclass(frozen=True)
class OpcodeVector:
    counts: Counter = field(default_factory=Counter)
    total_chunks: int = 0
    code_hash: bytes | None = None

    @property
    def is_empty(self) -> bool:
        return self.total_chunks == 0

    def sq_norm(self) -> int:
        return sum(c * c for c in self.counts.values())


def ngram_vector(seq: Sequence[str], n: int = NGRAM, code_hash: bytes | None = None) -> OpcodeVector:
    if n < 1:
        raise ValueError("window size must be at least 1")
    seq = tuple(seq)
    counts = Counter(seq[i : i + n] for i in range(len(seq) - n + 1))
    return OpcodeVector(counts, max(0, len(seq) - n + 1), code_hash)


def code_vector(code: bytes, n: int = NGRAM) -> OpcodeVector:
    return ngram_vector(disassemble(code), n, hashlib.sha256(code).digest())


def _exact_cosine(dot: int, sq1: int, sq2: int) -> float:
    prod = sq1 * sq2
    if dot * dot == prod:
        return 1.0
    return min(1.0, max(0.0, dot / math.sqrt(prod)))


def cosine(v1: OpcodeVector, v2: OpcodeVector) -> float:
    """Cosine of two count vectors.

    If either vector is empty the result is 1.0 for byte-identical source code
    and 0.0 otherwise. Byte-identical code always scores exactly 1.0.
    """
    same_code = v1.code_hash is not None and v1.code_hash == v2.code_hash
    if v1.is_empty or v2.is_empty:
        return 1.0 if same_code else 0.0
    if same_code:
        return 1.0
    small, big = (v1.counts, v2.counts) if len(v1.counts) <= len(v2.counts) else (v2.counts, v1.counts)
    dot = sum(c * big[k] for k, c in small.items() if k in big)
    return _exact_cosine(dot, v1.sq_norm(), v2.sq_norm())


def similarity(code1: bytes, code2: bytes, n: int = NGRAM) -> float:
    return cosine(code_vector(code1, n), code_vector(code2, n))


def _vectorize(args):
    code, n = args
    return code_vector(code, n)


def vectorize_all(codes: Sequence[ContractBytecode], n: int = NGRAM, workers: int = 1) -> list[OpcodeVector]:
    jobs = [(c.code, n) for c in codes]
    if workers > 1 and len(jobs) > 32:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_vectorize, jobs, chunksize=8))
    return [_vectorize(j) for j in jobs]


def similarity_matrix(codes: Sequence[ContractBytecode], n: int = NGRAM, workers: int = 1) -> np.ndarray:
    """Symmetric matrix of pairwise cosine scores in input order."""
    if not codes:
        raise ValueError("need at least one contract")
    vecs = vectorize_all(codes, n, workers)
    vocab: dict[tuple, int] = {}
    rows, cols, vals = [], [], []
    for i, v in enumerate(vecs):
        for chunk, c in v.counts.items():
            rows.append(i)
            cols.append(vocab.setdefault(chunk, len(vocab)))
            vals.append(c)
    m = sparse.csr_matrix(
        (np.asarray(vals, dtype=np.int64), (rows, cols)), shape=(len(vecs), max(1, len(vocab)))
    )
    gram = (m @ m.T).toarray()  # exact integer dot products
    k = len(vecs)
    out = np.empty((k, k), dtype=float)
    for i in range(k):
        out[i, i] = 1.0
        for j in range(i + 1, k):
            vi, vj = vecs[i], vecs[j]
            if vi.is_empty or vj.is_empty or vi.code_hash == vj.code_hash:
                s = cosine(vi, vj)
            else:
                s = _exact_cosine(int(gram[i, j]), int(gram[i, i]), int(gram[j, j]))
            out[i, j] = out[j, i] = s
    return out


def clone_clusters(codes: Sequence[ContractBytecode]) -> list[list[str]]:
    """Groups (size >= 2) of addresses with byte-identical code, largest first."""
    groups: dict[bytes, list[str]] = defaultdict(list)
    for c in codes:
        groups[c.code].append(c.address)
    clusters = [sorted(addrs) for addrs in groups.values() if len(addrs) > 1]
    clusters.sort(key=lambda g: (-len(g), g[0]))
    return clusters


def write_matrix(addresses: Sequence[str], matrix: np.ndarray, fh: IO[str]):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["address", *addresses])
    for a, row in zip(addresses, matrix):
        w.writerow([a, *(f"{x:.6f}" for x in row)])


def write_clusters(clusters: list[list[str]], fh: IO[str]):
    json.dump(
        [{"size": len(g), "addresses": g} for g in clusters],
        fh,
        indent=2,
    )
    fh.write("\n")
