"""Planted multi-agent embedding networks with known ground truth.

The generator plants a shared orthonormal dictionary D*, a family
structure over agents, per-family row supports, class-structured sparse
codes, and a per-agent orthogonal misalignment Q_v, then emits

    X_v = Q_v (D* S*_v) + noise_sigma * G_v.

Because every ingredient is known, downstream claims (support recovery,
edge-loss separation, topology reconstruction, accuracy trends) can be
checked against the construction instead of against themselves.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .core import AgentEmbeddings, haar_orthogonal
from .errors import BadSpec

__all__ = [
    "SyntheticSpec",
    "SyntheticNetwork",
    "evenly_split_families",
    "generate",
]


def evenly_split_families(num_agents: int, num_families: int) -> Tuple[Tuple[int, ...], ...]:
    """Partition agents 0..V-1 into contiguous, near-equal families."""
    if num_families < 1 or num_families > num_agents:
        raise BadSpec(
            f"cannot split {num_agents} agents into {num_families} families"
        )
    parts = np.array_split(np.arange(num_agents), num_families)
    return tuple(tuple(int(a) for a in part) for part in parts)


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the planted network model.

    ``families`` partitions the agent indices; ``support_size`` is the
    per-family row-support budget k*. ``between_family_divergence`` in
    [0, 1] controls how much of the support is replaced across families
    (0 = identical supports, 1 = disjoint). ``within_family_noise`` is
    the spread of codes around their class mean, ``noise_sigma`` the
    additive embedding noise. ``class_mean_scale`` scales the Gaussian
    class means; values well below ``noise_sigma * sqrt(d)`` put the
    instance in the noise-dominated regime where denoising matters.
    ``apply_misalignment=False`` plants Q_v = I, leaving all agents in
    the dictionary's own basis.
    """

    num_agents: int
    families: Tuple[Tuple[int, ...], ...]
    d: int
    n: int
    num_classes: int
    support_size: int
    within_family_noise: float = 0.0
    between_family_divergence: float = 1.0
    noise_sigma: float = 0.0
    seed: int = 0
    class_mean_scale: float = 1.0
    apply_misalignment: bool = True

    def __post_init__(self):
        object.__setattr__(
            self,
            "families",
            tuple(tuple(int(a) for a in fam) for fam in self.families),
        )
        if self.num_agents < 1 or self.d < 1 or self.n < 1:
            raise BadSpec("num_agents, d, and n must be positive")
        flat = [a for fam in self.families for a in fam]
        if sorted(flat) != list(range(self.num_agents)):
            raise BadSpec("families must partition the agent indices exactly once")
        if any(len(fam) == 0 for fam in self.families):
            raise BadSpec("families must be nonempty")
        if not 1 <= self.num_classes <= self.n:
            raise BadSpec(f"num_classes must lie in [1, n={self.n}]")
        if not 1 <= self.support_size <= self.d:
            raise BadSpec(f"support_size must lie in [1, d={self.d}]")
        if self.within_family_noise < 0 or self.noise_sigma < 0:
            raise BadSpec("noise levels must be nonnegative")
        if self.class_mean_scale < 0:
            raise BadSpec("class_mean_scale must be nonnegative")
        if not 0.0 <= self.between_family_divergence <= 1.0:
            raise BadSpec("between_family_divergence must lie in [0, 1]")
        core, extra = self._support_split()
        need = core + len(self.families) * extra
        if need > self.d:
            raise BadSpec(
                f"support construction needs {need} rows "
                f"(core {core} + {len(self.families)} x {extra}) but d={self.d}"
            )

    def _support_split(self) -> Tuple[int, int]:
        """(shared core size, per-family disjoint remainder size)."""
        core = int(round((1.0 - self.between_family_divergence) * self.support_size))
        return core, self.support_size - core

    @property
    def num_families(self) -> int:
        return len(self.families)

    def family_of(self) -> np.ndarray:
        fam = np.empty(self.num_agents, dtype=np.int64)
        for f, members in enumerate(self.families):
            fam[list(members)] = f
        return fam

    def to_json_dict(self) -> dict:
        return {
            "num_agents": self.num_agents,
            "families": [list(fam) for fam in self.families],
            "d": self.d,
            "n": self.n,
            "num_classes": self.num_classes,
            "support_size": self.support_size,
            "within_family_noise": self.within_family_noise,
            "between_family_divergence": self.between_family_divergence,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "class_mean_scale": self.class_mean_scale,
            "apply_misalignment": self.apply_misalignment,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "SyntheticSpec":
        obj = dict(obj)
        # num_families is accepted as shorthand for an even partition.
        if "families" not in obj and "num_families" in obj:
            obj["families"] = evenly_split_families(
                int(obj["num_agents"]), int(obj.pop("num_families"))
            )
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise BadSpec(f"unknown spec keys: {sorted(unknown)}")
        return cls(**obj)


@dataclass(frozen=True)
class SyntheticNetwork:
    """A generated instance together with everything that was planted."""

    embeddings: Tuple[AgentEmbeddings, ...]
    labels: np.ndarray
    true_maps: Tuple[np.ndarray, ...]
    true_families: np.ndarray
    true_dictionary: np.ndarray
    true_supports: Tuple[Tuple[int, ...], ...]
    spec: SyntheticSpec = field(repr=False)

    @property
    def num_agents(self) -> int:
        return len(self.embeddings)

    def matrices(self):
        return [emb.matrix for emb in self.embeddings]


def generate(spec: SyntheticSpec) -> SyntheticNetwork:
    """Draw a planted network, deterministic in ``spec.seed``.

    Global structure (dictionary, supports, class means, labels) comes
    from one child stream of the seed; each agent then has its own
    spawned stream for Q_v, code spread, and embedding noise, so the
    construction is reproducible agent by agent.
    """
    d, n, k = spec.d, spec.n, spec.support_size
    children = np.random.SeedSequence(spec.seed).spawn(spec.num_agents + 1)
    g_rng = np.random.default_rng(children[0])

    D_star = haar_orthogonal(g_rng, d)

    core, extra = spec._support_split()
    row_pool = g_rng.permutation(d)
    core_rows = row_pool[:core]
    supports = []
    for f in range(spec.num_families):
        own = row_pool[core + f * extra : core + (f + 1) * extra]
        supports.append(tuple(sorted(int(r) for r in np.concatenate([core_rows, own]))))

    class_means = spec.class_mean_scale * g_rng.standard_normal(
        (spec.num_classes, d)
    )
    labels = g_rng.permutation(np.arange(n, dtype=np.int64) % spec.num_classes)

    family_of = spec.family_of()
    embeddings = []
    maps = []
    for v in range(spec.num_agents):
        rng_v = np.random.default_rng(children[v + 1])
        rows = np.array(supports[family_of[v]], dtype=np.int64)
        S_v = np.zeros((d, n))
        S_v[rows, :] = class_means[labels][:, rows].T
        if spec.within_family_noise > 0:
            S_v[rows, :] += spec.within_family_noise * rng_v.standard_normal((k, n))
        Q_v = haar_orthogonal(rng_v, d) if spec.apply_misalignment else np.eye(d)
        X_v = Q_v @ (D_star @ S_v)
        if spec.noise_sigma > 0:
            X_v += spec.noise_sigma * rng_v.standard_normal((d, n))
        embeddings.append(AgentEmbeddings(agent_id=v, matrix=X_v))
        maps.append(Q_v)

    labels = labels.copy()
    labels.setflags(write=False)
    family_of.setflags(write=False)
    return SyntheticNetwork(
        embeddings=tuple(embeddings),
        labels=labels,
        true_maps=tuple(maps),
        true_families=family_of,
        true_dictionary=D_star,
        true_supports=tuple(supports),
        spec=spec,
    )
