"""Tanimoto k-nearest-neighbor property classifier.

`predict` gives the hard majority label used by the active-ratio metric;
`score` the similarity-weighted class-1 vote share used as a ranking
score for ROC-AUC.
"""

from __future__ import annotations

from .chem import MolGraph, fingerprint, parse, tanimoto


class ClassifierFailure(RuntimeError):
    pass


class KnnTanimotoClassifier:
    def __init__(self, k: int = 5, radius: int = 2, width: int = 2048):
        self.k = k
        self.radius = radius
        self.width = width
        self._fps: list = []
        self._labels: list[int] = []

    def fit(self, smiles: list[str], labels: list[int]) -> "KnnTanimotoClassifier":
        """Exact duplicates (same fingerprint and label) are stored once, so
        replicating training molecules never moves predictions or scores."""
        if len(smiles) != len(labels):
            raise ValueError("smiles and labels differ in length")
        if not smiles:
            raise ValueError("cannot fit on an empty training set")
        seen: set[tuple[int, int]] = set()
        self._fps = []
        self._labels = []
        for s, y in zip(smiles, labels):
            fp = fingerprint(parse(s), self.radius, self.width)
            key = (fp.bits, int(y))
            if key in seen:
                continue
            seen.add(key)
            self._fps.append(fp)
            self._labels.append(int(y))
        return self

    def _neighbors(self, graph: MolGraph) -> list[tuple[float, int]]:
        if not self._fps:
            raise ClassifierFailure("classifier is not fitted")
        fp = fingerprint(graph, self.radius, self.width)
        sims = sorted(
            ((tanimoto(fp, ref), label) for ref, label in zip(self._fps, self._labels)),
            key=lambda pair: -pair[0],
        )
        return sims[: self.k]

    def predict(self, graph: MolGraph) -> int:
        """Majority vote over the k most similar training molecules."""
        votes = [label for _, label in self._neighbors(graph)]
        return int(sum(votes) * 2 > len(votes))

    def score(self, graph: MolGraph) -> float:
        """Similarity-weighted class-1 share in [0, 1]; 0.5 when every
        neighbor similarity is zero."""
        neighbors = self._neighbors(graph)
        total = sum(sim for sim, _ in neighbors)
        if total == 0.0:
            return 0.5
        return sum(sim for sim, label in neighbors if label == 1) / total

    def __call__(self, graph: MolGraph) -> int:
        return self.predict(graph)
