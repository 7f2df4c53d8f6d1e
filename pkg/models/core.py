import math
from typing import Dict, Optional, Tuple, FrozenSet

import numpy as np
from pydantic import Field, model_validator

from models.base_model import DomainModel, MAX_ALPHABET, PROBABILITY_TOLERANCE


class Alphabet(DomainModel):
    size: int = Field(..., ge=1, le=MAX_ALPHABET)

    @property
    def symbols(self) -> range:
        return range(self.size)


class Word(DomainModel):
    symbols: Tuple[int, ...] = Field(..., min_length=1)
    alphabet_size: int = Field(2, ge=1, le=MAX_ALPHABET)

    @model_validator(mode="after")
    def check_symbols(self):
        if min(self.symbols) < 0 or max(self.symbols) >= self.alphabet_size:
            raise ValueError(f"word symbols must lie in 0..{self.alphabet_size - 1}")
        return self

    @property
    def length(self) -> int:
        return len(self.symbols)

    def __len__(self):
        return len(self.symbols)

    def __str__(self):
        return " ".join(str(s) for s in self.symbols)


class Partition(DomainModel):
    cell_of: Tuple[int, ...] = Field(..., min_length=1)
    cell_count: int = Field(..., ge=1)

    @model_validator(mode="after")
    def check_cells(self):
        used = set(self.cell_of)
        if min(used) < 0 or max(used) >= self.cell_count:
            raise ValueError(f"cell labels must lie in 0..{self.cell_count - 1}")
        if len(used) != self.cell_count:
            raise ValueError("partition has an empty cell")
        return self

    @property
    def state_count(self) -> int:
        return len(self.cell_of)

    @property
    def labels(self) -> np.ndarray:
        return np.asarray(self.cell_of, dtype=np.int64)

    def cells(self) -> list:
        members = [[] for _ in range(self.cell_count)]
        for state, cell in enumerate(self.cell_of):
            members[cell].append(state)
        return [frozenset(m) for m in members]

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        """Builds a partition from arbitrary labels, compacted in increasing label order."""
        _, compact = np.unique(np.asarray(labels), return_inverse=True)
        compact = compact.reshape(-1)
        return cls(cell_of=tuple(int(c) for c in compact), cell_count=int(compact.max()) + 1)

    @classmethod
    def trivial(cls, state_count: int) -> "Partition":
        return cls(cell_of=(0,) * state_count, cell_count=1)

    @classmethod
    def discrete(cls, state_count: int) -> "Partition":
        return cls(cell_of=tuple(range(state_count)), cell_count=state_count)


class FiniteAlgebra(DomainModel):
    state_count: int = Field(..., ge=1)
    atoms: Tuple[FrozenSet[int], ...] = Field(..., min_length=1)

    @model_validator(mode="after")
    def check_atoms(self):
        seen = set()
        for atom in self.atoms:
            if seen & atom:
                raise ValueError("algebra atoms must be pairwise disjoint")
            seen |= atom
        if seen != set(range(self.state_count)):
            raise ValueError("algebra atoms must cover the state space")
        return self


class WordDistribution(DomainModel):
    length: int = Field(..., ge=1)
    weights: Dict[Tuple[int, ...], float]
    counts: Optional[Dict[Tuple[int, ...], int]] = None

    @model_validator(mode="after")
    def check_weights(self):
        if not self.weights:
            raise ValueError("distribution has empty support")
        if any(len(word) != self.length for word in self.weights):
            raise ValueError(f"all words must have length {self.length}")
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("weights must be nonnegative")
        total = math.fsum(self.weights.values())
        if abs(total - 1.0) > PROBABILITY_TOLERANCE:
            raise ValueError(f"weights sum to {total!r}, not 1")
        return self

    @property
    def support_size(self) -> int:
        return len(self.weights)

    def words(self) -> np.ndarray:
        """Support words as a (support × length) array in lexicographic order."""
        return np.array(sorted(self.weights), dtype=np.int64).reshape(-1, self.length)

    def probabilities(self) -> np.ndarray:
        return np.array([self.weights[w] for w in sorted(self.weights)], dtype=float)

    @classmethod
    def point_mass(cls, word) -> "WordDistribution":
        word = tuple(int(s) for s in word)
        return cls(length=len(word), weights={word: 1.0})

    @classmethod
    def uniform(cls, words) -> "WordDistribution":
        words = [tuple(int(s) for s in w) for w in words]
        return cls(length=len(words[0]), weights={w: 1.0 / len(words) for w in words})

    @classmethod
    def from_arrays(cls, vocabulary: np.ndarray, weights: np.ndarray, counts=None) -> "WordDistribution":
        words = [tuple(int(s) for s in row) for row in vocabulary]
        return cls(
            length=vocabulary.shape[1],
            weights={w: float(p) for w, p in zip(words, weights) if p > 0},
            counts=None if counts is None else {w: int(c) for w, c in zip(words, counts) if c > 0},
        )
