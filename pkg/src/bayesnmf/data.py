"""Rating-file ingestion, cleaning, splitting, noise injection and synthetic data."""

import enum
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .model import ObservedMatrix


class RatingsFormat(str, enum.Enum):
    UDATA = "u.data"          # user \t item \t rating \t timestamp
    RATINGS_DAT = "ratings.dat"  # user::item::rating::timestamp
    SYNTHETIC = "synthetic"   # row \t col \t value (1-based ids)

    @classmethod
    def parse(cls, name):
        try:
            return cls(name)
        except ValueError:
            raise ValueError(f"unknown ratings format {name!r}; expected one of "
                             f"{[f.value for f in cls]}") from None


class ParseError(ValueError):
    def __init__(self, path, lineno, line, reason):
        self.path, self.lineno = path, lineno
        super().__init__(f"{path}:{lineno}: {reason}: {line!r}")


@dataclass(frozen=True)
class RatingsFile:
    path: Path
    format: RatingsFormat = RatingsFormat.UDATA

    def __post_init__(self):
        object.__setattr__(self, "path", Path(self.path))
        object.__setattr__(self, "format", RatingsFormat.parse(self.format))


_LAYOUT = {
    RatingsFormat.UDATA: ("\t", 4),
    RatingsFormat.RATINGS_DAT: ("::", 4),
    RatingsFormat.SYNTHETIC: ("\t", 3),
}


def load_ratings(file, fmt=None):
    """Read a ratings file into a dense masked matrix.

    User and item ids are remapped to dense 0-based indices in sorted id order.
    A repeated (user, item) pair keeps its last value.
    """
    if not isinstance(file, RatingsFile):
        file = RatingsFile(file, fmt or RatingsFormat.UDATA)
    sep, nfields = _LAYOUT[file.format]
    users, items, values = [], [], []
    with open(file.path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(sep)
            if len(parts) != nfields:
                raise ParseError(file.path, lineno, line,
                                 f"expected {nfields} fields, got {len(parts)}")
            try:
                u, i, v = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise ParseError(file.path, lineno, line, "non-numeric field") from None
            if u < 1 or i < 1:
                raise ParseError(file.path, lineno, line, "ids must be positive")
            if file.format is not RatingsFormat.SYNTHETIC and not 1.0 <= v <= 5.0:
                raise ParseError(file.path, lineno, line, "rating outside [1, 5]")
            if not math.isfinite(v):
                raise ParseError(file.path, lineno, line, "non-finite value")
            users.append(u)
            items.append(i)
            values.append(v)
    if not users:
        raise ValueError(f"{file.path}: no ratings found")
    uid, rows = np.unique(np.asarray(users), return_inverse=True)
    iid, cols = np.unique(np.asarray(items), return_inverse=True)
    vals = np.zeros((uid.size, iid.size))
    mask = np.zeros((uid.size, iid.size), dtype=bool)
    vals[rows, cols] = values  # later assignments win for duplicate pairs
    mask[rows, cols] = True
    return ObservedMatrix(vals, mask)


def bundled_fixture():
    """Path of the packaged 50x40 synthetic triples file (rank 5, noise sd 0.1)."""
    return Path(str(resources.files("bayesnmf") / "fixtures" / "synthetic_50x40.tsv"))


def write_triples(path, data):
    """Write observed cells as ``row \\t col \\t value`` with 1-based ids."""
    rows, cols = np.nonzero(data.mask)
    with open(path, "w", encoding="utf-8") as fh:
        for r, c in zip(rows, cols):
            fh.write(f"{r + 1}\t{c + 1}\t{float(data.values[r, c])!r}\n")


def clean_min_observed(data, min_count=3):
    """Drop rows and columns with fewer than ``min_count`` observed entries,
    repeating until every remaining row and column qualifies."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    rows = np.arange(data.n_rows)
    cols = np.arange(data.n_cols)
    mask = data.mask
    while True:
        sub = mask[np.ix_(rows, cols)]
        keep_r = sub.sum(axis=1) >= min_count
        rows = rows[keep_r]
        sub = sub[keep_r]
        keep_c = sub.sum(axis=0) >= min_count
        cols = cols[keep_c]
        if keep_r.all() and keep_c.all():
            break
        if rows.size == 0 or cols.size == 0:
            break
    if rows.size == 0 or cols.size == 0:
        raise ValueError("cleaning removed every row or column")
    ix = np.ix_(rows, cols)
    return ObservedMatrix(data.values[ix], data.mask[ix])


@dataclass(frozen=True)
class SplitSpec:
    """``fraction_unobserved`` is a fraction of the full grid, so the smallest
    meaningful value is the data's own unobserved fraction."""

    fraction_unobserved: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.fraction_unobserved < 1.0:
            raise ValueError("fraction_unobserved must lie in (0, 1)")


# tolerance for requesting a fraction a little below the intrinsic sparsity
# (published sparsities are rounded to three decimals)
SPARSITY_SLACK = 1e-3


def train_size(data, fraction_unobserved):
    """Number of training cells for a target grid-level unobserved fraction."""
    intrinsic = 1.0 - data.observed_fraction
    if fraction_unobserved < intrinsic - SPARSITY_SLACK:
        raise ValueError(
            f"fraction_unobserved {fraction_unobserved} is below the data's own "
            f"unobserved fraction {intrinsic:.4f}")
    n = int(round((1.0 - fraction_unobserved) * data.mask.size))
    return min(n, data.observed_count)


def split_train_test(data, spec):
    """Uniformly random partition of the observed cells into train and test.

    Both returned matrices share ``data.values``; only their masks differ.
    """
    n_train = train_size(data, spec.fraction_unobserved)
    rows, cols = np.nonzero(data.mask)
    rng = np.random.default_rng(spec.seed)
    perm = rng.permutation(rows.size)
    tr, te = perm[:n_train], perm[n_train:]
    train_mask = np.zeros_like(data.mask)
    test_mask = np.zeros_like(data.mask)
    train_mask[rows[tr], cols[tr]] = True
    test_mask[rows[te], cols[te]] = True
    return ObservedMatrix(data.values, train_mask), ObservedMatrix(data.values, test_mask)


def holdout_split(data, test_fraction, seed):
    """Hold out ``test_fraction`` of the observed cells."""
    if not 0.0 <= test_fraction < 1.0:
        raise ValueError("test_fraction must lie in [0, 1)")
    n_train = data.observed_count - int(round(test_fraction * data.observed_count))
    grid_fraction = 1.0 - n_train / data.mask.size
    return split_train_test(data, SplitSpec(min(grid_fraction, 1 - 1e-12), seed))


def add_noise(data, noise_to_signal, seed):
    """Add Gaussian noise whose variance is ``noise_to_signal`` times the
    variance of the observed values. Unobserved cells are left untouched and
    nothing is clipped."""
    if not (math.isfinite(noise_to_signal) and noise_to_signal >= 0):
        raise ValueError("noise_to_signal must be a nonnegative number")
    if noise_to_signal == 0:
        return data.copy()
    obs = data.values[data.mask]
    sd = math.sqrt(noise_to_signal * float(np.var(obs)))
    rng = np.random.default_rng(seed)
    values = data.values.copy()
    values[data.mask] = obs + sd * rng.standard_normal(obs.size)
    return ObservedMatrix(values, data.mask.copy())


def synthetic_generate(M, N, K_true, noise_sd, seed):
    """Fully observed ``W Z + noise`` with unit-rate exponential factors.

    Returns ``(data, W, Z)``.
    """
    if min(M, N, K_true) < 1:
        raise ValueError("dimensions must be >= 1")
    if noise_sd < 0:
        raise ValueError("noise_sd must be >= 0")
    rng = np.random.default_rng(seed)
    W = rng.exponential(1.0, size=(M, K_true))
    Z = rng.exponential(1.0, size=(K_true, N))
    A = W @ Z
    if noise_sd > 0:
        A = A + noise_sd * rng.standard_normal((M, N))
    return ObservedMatrix(A, np.ones((M, N), dtype=bool)), W, Z
