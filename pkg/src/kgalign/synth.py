"""Seeded synthetic KG pairs with a planted gold alignment.

A random graph is generated once and duplicated; the copy gets fresh ids,
optional edge rewiring, and character-level noise on entity names, so the
pair behaves like a small benchmark where every feature carries partial
signal. The gold alignment is the identity mapping between the two copies.
"""

from __future__ import annotations

import string
from pathlib import Path

import numpy as np

from .kg import KnowledgeGraph, save_alignment, save_kg

_LETTERS = string.ascii_lowercase


def _random_word(rng: np.random.Generator) -> str:
    length = int(rng.integers(4, 9))
    return "".join(_LETTERS[i] for i in rng.integers(len(_LETTERS), size=length))


def _noisy(name: str, noise: float, rng: np.random.Generator) -> str:
    if noise <= 0:
        return name
    out = []
    for ch in name:
        op = rng.random()
        if op < noise / 3:
            continue  # delete
        if op < 2 * noise / 3:
            out.append(_LETTERS[int(rng.integers(len(_LETTERS)))])  # substitute
        elif op < noise:
            out.append(ch)
            out.append(_LETTERS[int(rng.integers(len(_LETTERS)))])  # insert after
        else:
            out.append(ch)
    return "".join(out) or name


def gen_synthetic(
    n: int,
    edge_prob: float,
    name_noise: float,
    rng_seed: int,
    edge_noise: float = 0.0,
) -> tuple[KnowledgeGraph, KnowledgeGraph, list[tuple[str, str]]]:
    """Build a KG pair of ``n`` entities each plus the identity gold mapping.

    ``edge_prob`` controls graph density; ``name_noise`` is the per-character
    corruption rate applied to the copy's names; ``edge_noise`` rewires that
    fraction of the copy's triples to a random tail.
    """
    if n < 4:
        raise ValueError(f"need n >= 4, got {n}")
    rng = np.random.default_rng(rng_seed)
    n_relations = max(2, n // 20)
    vocab = [_random_word(rng) for _ in range(max(20, n // 2))]

    names: list[str] = []
    seen: set[str] = set()
    for _ in range(n):
        while True:
            words = [vocab[int(i)] for i in rng.integers(len(vocab), size=3)]
            name = " ".join(words)
            if name not in seen:
                seen.add(name)
                names.append(name)
                break

    triples: list[tuple[int, int, int]] = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < edge_prob:
                rel = int(rng.integers(n_relations))
                if rng.random() < 0.5:
                    triples.append((i, rel, j))
                else:
                    triples.append((j, rel, i))

    kg1 = KnowledgeGraph(
        entity_ids=tuple(f"s{i}" for i in range(n)),
        relation_ids=tuple(f"r{k}" for k in range(n_relations)),
        triples=np.array(triples, dtype=np.int64).reshape(-1, 3),
        entity_names=tuple(names),
    )

    copy_triples = []
    for h, r, t in triples:
        if rng.random() < edge_noise:
            t = int(rng.integers(n))
            while t == h:
                t = int(rng.integers(n))
        copy_triples.append((h, r, t))
    kg2 = KnowledgeGraph(
        entity_ids=tuple(f"t{i}" for i in range(n)),
        relation_ids=tuple(f"q{k}" for k in range(n_relations)),
        triples=np.array(copy_triples, dtype=np.int64).reshape(-1, 3),
        entity_names=tuple(_noisy(name, name_noise, rng) for name in names),
    )

    gold = [(f"s{i}", f"t{i}") for i in range(n)]
    return kg1, kg2, gold


def synth_word_vectors(
    kg1: KnowledgeGraph,
    kg2: KnowledgeGraph,
    dim: int,
    rng_seed: int,
) -> dict[str, np.ndarray]:
    """One random unit vector per token appearing in either KG's names."""
    from .names import tokenize

    tokens = sorted(
        {t for name in kg1.entity_names + kg2.entity_names for t in tokenize(name)}
    )
    rng = np.random.default_rng(rng_seed)
    out = {}
    for token in tokens:
        vec = rng.normal(size=dim)
        out[token] = vec / np.linalg.norm(vec)
    return out


def write_synthetic(
    out_dir,
    n: int,
    edge_prob: float,
    name_noise: float,
    rng_seed: int,
    edge_noise: float = 0.0,
    vec_dim: int = 16,
) -> dict[str, Path]:
    """Generate a pair and write it in the benchmark file layout.

    Produces triples/names TSVs for both KGs, the gold alignment, and a
    word-vector file covering every name token.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    kg1, kg2, gold = gen_synthetic(n, edge_prob, name_noise, rng_seed, edge_noise)
    paths = {
        "triples1": out_dir / "triples1.tsv",
        "names1": out_dir / "names1.tsv",
        "triples2": out_dir / "triples2.tsv",
        "names2": out_dir / "names2.tsv",
        "gold": out_dir / "gold.tsv",
        "vectors": out_dir / "vectors.vec",
    }
    save_kg(kg1, paths["triples1"], paths["names1"])
    save_kg(kg2, paths["triples2"], paths["names2"])
    save_alignment(gold, paths["gold"])
    vectors = synth_word_vectors(kg1, kg2, vec_dim, rng_seed)
    with open(paths["vectors"], "w", encoding="utf-8") as fh:
        fh.write(f"{len(vectors)} {vec_dim}\n")
        for token, vec in vectors.items():
            fh.write(token + " " + " ".join(repr(float(x)) for x in vec) + "\n")
    return paths
