"""Random planted instances: supports, hidden vectors, ensembles, sensing matrices.

Randomness is counter-based and splittable: every consumer derives an
independent Philox stream from (master_seed, label, index), so adding draws to
one sampler never shifts another, and any single trial of a sweep can be
replayed from its coordinates alone.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from .model import (
    BlockSensingMatrix,
    GuessEnsemble,
    RelaxedInstance,
    SupportPattern,
)

__all__ = [
    "GenConfig",
    "substream",
    "derive_seed",
    "sample_support",
    "sample_planted_vector",
    "sample_guess_column",
    "sample_guess_ensemble",
    "sample_sensing_matrix",
    "build_instance",
    "SENSING_KINDS",
    "SUPPORT_MODES",
    "GUESS_LAWS",
]

SENSING_KINDS = ("orthonormal-blocks", "repeated-unitary", "gaussian")
SUPPORT_MODES = ("equidistributed", "uniform")
GUESS_LAWS = ("ternary", "alphabet")

_MASK64 = (1 << 64) - 1


def _label_key(label: str) -> int:
    # stable across runs and platforms, unlike hash()
    return int.from_bytes(hashlib.sha256(label.encode()).digest()[:8], "little")


def substream(master_seed: int, label: str, index: int = 0) -> np.random.Generator:
    """Independent generator for (seed, label, index)."""
    ss = np.random.SeedSequence(
        entropy=(int(master_seed) & _MASK64, _label_key(label), int(index) & _MASK64)
    )
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(master_seed: int, label: str, index: int = 0) -> int:
    """Collapse (seed, label, index) to a fresh 64-bit seed for nested use."""
    ss = np.random.SeedSequence(
        entropy=(int(master_seed) & _MASK64, _label_key(label), int(index) & _MASK64)
    )
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class GenConfig:
    """Parameters of the planted ensemble.

    ``guess_density`` is the probability nu that a non-planted guess entry is
    nonzero.  ``guess_law`` picks the nonzero value: 'ternary' draws +-1 (so
    the entry second moment p_X equals nu), 'alphabet' draws uniformly from
    ``planted_alphabet`` (making a random column able to match a hidden block,
    which the comparison experiments need).
    """

    m: int
    n: int
    theta: int
    r: int
    s: int
    sensing_kind: str = "orthonormal-blocks"
    planted_alphabet: tuple[float, ...] = (-1.0, -0.5, 0.5, 1.0)
    guess_density: float = 0.25
    support_mode: str = "equidistributed"
    guess_law: str = "ternary"
    master_seed: int = 0

    def __post_init__(self):
        if min(self.m, self.n, self.theta, self.r) < 1:
            raise ValueError("m, n, theta, r must be positive")
        if not 0 < self.s <= self.n:
            raise ValueError(f"need 0 < s <= n, got s={self.s}, n={self.n}")
        if self.sensing_kind not in SENSING_KINDS:
            raise ValueError(f"unknown sensing_kind {self.sensing_kind!r}")
        if self.support_mode not in SUPPORT_MODES:
            raise ValueError(f"unknown support_mode {self.support_mode!r}")
        if self.guess_law not in GUESS_LAWS:
            raise ValueError(f"unknown guess_law {self.guess_law!r}")
        if not 0.0 < self.guess_density <= 1.0:
            raise ValueError("guess_density must lie in (0, 1]")
        alph = tuple(float(a) for a in self.planted_alphabet)
        if not alph:
            raise ValueError("alphabet must be nonempty")
        if any(a == 0.0 or abs(a) > 1.0 for a in alph):
            raise ValueError("alphabet values must be nonzero and lie in [-1, 1]")
        if sorted(alph) != sorted(-a for a in alph):
            raise ValueError("alphabet must be symmetric about zero")
        if self.sensing_kind in ("orthonormal-blocks", "repeated-unitary") and self.m < self.n:
            raise ValueError(f"{self.sensing_kind} needs m >= n")
        object.__setattr__(self, "planted_alphabet", alph)

    @property
    def nu(self) -> float:
        return self.guess_density

    @property
    def p_x(self) -> float:
        """Second moment of a planted entry on the support."""
        a = np.asarray(self.planted_alphabet)
        return float(np.mean(a * a))

    @property
    def p_X(self) -> float:
        """Second moment of a non-planted guess entry."""
        if self.guess_law == "ternary":
            return self.nu
        return self.nu * self.p_x

    def with_seed(self, master_seed: int) -> "GenConfig":
        return replace(self, master_seed=master_seed)


def sample_support(cfg: GenConfig, rng: np.random.Generator) -> SupportPattern:
    """Draw the hidden support.

    'equidistributed' places exactly s indices in every block; 'uniform'
    scatters s*theta indices over all n*theta slots, so per-block counts are
    hypergeometric and may leave a block empty.
    """
    n, theta, s = cfg.n, cfg.theta, cfg.s
    if cfg.support_mode == "equidistributed":
        idx = []
        for l in range(theta):
            local = rng.choice(n, size=s, replace=False)
            idx.extend(l * n + int(i) for i in local)
    else:
        idx = [int(i) for i in rng.choice(n * theta, size=s * theta, replace=False)]
    return SupportPattern(indices=tuple(sorted(idx)), n=n, theta=theta)


def sample_planted_vector(
    support: SupportPattern, cfg: GenConfig, rng: np.random.Generator
) -> np.ndarray:
    """Hidden vector: i.i.d. uniform alphabet draws on the support, zero off it."""
    x = np.zeros(support.n * support.theta)
    alph = np.asarray(cfg.planted_alphabet)
    pos = list(support.indices)
    x[pos] = alph[rng.integers(0, len(alph), size=len(pos))]
    return x


def _draw_column(cfg: GenConfig, rng: np.random.Generator, size: int) -> np.ndarray:
    mask = rng.random(size) < cfg.guess_density
    if cfg.guess_law == "ternary":
        vals = rng.integers(0, 2, size=size) * 2.0 - 1.0
    else:
        alph = np.asarray(cfg.planted_alphabet)
        vals = alph[rng.integers(0, len(alph), size=size)]
    return mask * vals


def sample_guess_column(
    cfg: GenConfig, rng: np.random.Generator, reject_zero: bool = True
) -> np.ndarray:
    """One random guess column of length n.

    With ``reject_zero`` the draw is conditioned on not being all-zero
    (resampled), matching what instance construction requires.
    """
    for _ in range(10000):
        col = _draw_column(cfg, rng, cfg.n)
        if not reject_zero or col.any():
            return col
    raise RuntimeError("could not draw a nonzero guess column; guess_density too small")


def sample_guess_ensemble(
    x: np.ndarray,
    support: SupportPattern,
    cfg: GenConfig,
    rng: np.random.Generator,
    planted_cols=None,
    reject_zero_columns: bool = True,
) -> GuessEnsemble:
    """Guess ensemble with the hidden blocks planted.

    Non-planted columns are i.i.d. ``guess_law`` draws; with
    ``reject_zero_columns`` each all-zero draw is redrawn (conditioning the
    column law on being nonzero) so every column carries positive weight.
    Planted positions default to uniform draws but can be pinned, which the
    concentration checks use to keep a study's coordinates fixed.
    """
    n, r, theta = cfg.n, cfg.r, cfg.theta
    x = np.asarray(x, dtype=float)
    if planted_cols is None:
        planted = [int(k) for k in rng.integers(0, r, size=theta)]
    else:
        planted = [int(k) for k in planted_cols]
        if len(planted) != theta:
            raise ValueError("need one planted column per block")
    blocks = []
    for l in range(theta):
        xl = x[l * n : (l + 1) * n]
        if not xl.any():
            raise ValueError(
                f"block {l} has empty support, so its planted column would be all-zero; "
                "increase s or use equidistributed supports"
            )
        b = np.empty((n, r))
        for k in range(r):
            if reject_zero_columns:
                b[:, k] = sample_guess_column(cfg, rng)
            else:
                b[:, k] = _draw_column(cfg, rng, n)
        b[:, planted[l]] = xl
        blocks.append(b)
    return GuessEnsemble(blocks=tuple(blocks), planted_cols=tuple(planted))


def _haar_orthonormal(rng: np.random.Generator, m: int, n: int) -> np.ndarray:
    g = rng.standard_normal((m, n))
    q, rr = np.linalg.qr(g)
    # fix the QR sign ambiguity so the draw is uniform over the Stiefel manifold
    d = np.sign(np.diag(rr))
    d[d == 0] = 1.0
    return q * d


def sample_sensing_matrix(cfg: GenConfig, rng: np.random.Generator) -> BlockSensingMatrix:
    """Draw the sensing blocks for the configured kind."""
    m, n, theta = cfg.m, cfg.n, cfg.theta
    if cfg.sensing_kind == "orthonormal-blocks":
        blocks = tuple(_haar_orthonormal(rng, m, n) for _ in range(theta))
    elif cfg.sensing_kind == "repeated-unitary":
        u = _haar_orthonormal(rng, m, n)
        blocks = tuple(u.copy() for _ in range(theta))
    else:
        blocks = tuple(
            rng.standard_normal((m, n)) / np.sqrt(m) for _ in range(theta)
        )
    return BlockSensingMatrix(blocks=blocks)


def build_instance(cfg: GenConfig) -> RelaxedInstance:
    """Assemble a planted instance from four independent streams.

    Streams are labelled 'support', 'planted', 'guess', 'sensing', so e.g.
    switching the sensing kind leaves the hidden vector untouched.
    """
    seed = cfg.master_seed
    support = sample_support(cfg, substream(seed, "support"))
    x = sample_planted_vector(support, cfg, substream(seed, "planted"))
    X = sample_guess_ensemble(x, support, cfg, substream(seed, "guess"))
    A = sample_sensing_matrix(cfg, substream(seed, "sensing"))
    y = A.matvec(x)
    return RelaxedInstance(
        A=A,
        X=X,
        x=x,
        support=support,
        y=y,
        dist_params=(cfg.p_x, cfg.p_X, cfg.nu),
        master_seed=seed,
        meta={"config": cfg},
    )
