"""Corpus ingestion and synthetic data generation.

On-disk corpus layout: one folder per bag named Person_Trial_Iteration
(e.g. P01_T02_I05) containing `embeddings.csv`, plus a `labels.csv` at the
root pairing folder names with raw arousal/valence/comfort values in [0, 2]
that are halved into [0, 1] on load. An optional `exclusions.csv` lists
frame indices to drop per folder.

Loading may parallelize across bag folders; assembled corpora are immutable
and order-deterministic (sorted by folder name).

The synthetic generator plants, per bag, one key frame whose signal
coordinates determine the labels through a fixed random linear functional;
all other frames are pure noise. It is the end-to-end training oracle used
when no real corpus is available.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import (DuplicateEntryError, EmptyBagError, FormatError,
                     InsufficientDataError, ParseError, RangeError,
                     ShapeError, UnknownPersonError)

EMBEDDINGS_FILENAME = "embeddings.csv"
LABELS_FILENAME = "labels.csv"
EXCLUSIONS_FILENAME = "exclusions.csv"

LABELS_HEADER = ("folder name", "arousal", "valence", "comfort")
EXCLUSIONS_HEADER = ("folder name", "frame_index")

_PERSON_RE = re.compile(r"^P\d{2}$")
_TRIAL_RE = re.compile(r"^T\d{2}$")
_ITERATION_RE = re.compile(r"^I\d{2}$")


@dataclass(frozen=True)
class BagId:
    person: str     # P01..P99
    trial: str      # T00..T99 (T00 is the warm-up session)
    iteration: str  # I00..I99

    @property
    def folder(self) -> str:
        return f"{self.person}_{self.trial}_{self.iteration}"


def parse_bag_id(folder_name: str) -> BagId:
    """Split a Person_Trial_Iteration folder name into a validated BagId."""
    parts = folder_name.split("_")
    if len(parts) != 3:
        raise ParseError(f"folder name {folder_name!r} does not have 3 underscore-separated parts")
    person, trial, iteration = parts
    if not _PERSON_RE.match(person) or person == "P00":
        raise ParseError(f"bad person ID {person!r} in folder {folder_name!r}")
    if not _TRIAL_RE.match(trial):
        raise ParseError(f"bad trial ID {trial!r} in folder {folder_name!r}")
    if not _ITERATION_RE.match(iteration):
        raise ParseError(f"bad iteration ID {iteration!r} in folder {folder_name!r}")
    return BagId(person, trial, iteration)


@dataclass(frozen=True)
class LabelPair:
    """Self-reported labels rescaled into [0, 1]; comfort is carried along
    but never trained on."""
    valence: float
    arousal: float
    comfort: float = 0.5

    def __post_init__(self):
        for name in ("valence", "arousal", "comfort"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise RangeError(f"{name} {v} outside [0, 1]")

    @property
    def targets(self) -> np.ndarray:
        """The two trained targets, (valence, arousal)."""
        return np.array([self.valence, self.arousal])


@dataclass
class Bag:
    """One iteration's frames plus its single bag-level label."""
    bag_id: BagId
    frames: np.ndarray  # (J, embed_dim) float64
    label: LabelPair

    def __post_init__(self):
        self.frames = np.ascontiguousarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise ShapeError(f"bag {self.bag_id.folder}: frames shape {self.frames.shape}")
        if not np.all(np.isfinite(self.frames)):
            raise ShapeError(f"bag {self.bag_id.folder}: non-finite frame values")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]


class RawLabels(tuple):
    """Unrescaled (arousal, valence, comfort) triple straight from labels.csv."""
    __slots__ = ()

    def __new__(cls, arousal, valence, comfort):
        return super().__new__(cls, (arousal, valence, comfort))

    arousal = property(lambda self: self[0])
    valence = property(lambda self: self[1])
    comfort = property(lambda self: self[2])


@dataclass(frozen=True)
class CorpusFilter:
    """What to drop while assembling a corpus.

    The head-pose pre-filter is represented only through frame_exclusions
    (folder name -> frame indices), supplied externally.
    """
    excluded_persons: frozenset[str] = frozenset({"P03", "P05", "P10", "P11"})
    exclude_warmup_trial: bool = False  # drop T00 when set
    max_frames_per_bag: int | None = 32
    frame_exclusions: Mapping[str, frozenset[int]] | None = None

    def __post_init__(self):
        if self.max_frames_per_bag is not None and self.max_frames_per_bag < 1:
            raise ValueError(f"max_frames_per_bag must be >= 1, got {self.max_frames_per_bag}")


def rescale_label(raw: float) -> float:
    """Map a raw label in [0, 2] onto [0, 1] by exact halving."""
    if not (0.0 <= raw <= 2.0):
        raise RangeError(f"raw label {raw} outside [0, 2]")
    return raw / 2.0


def load_reference(path) -> dict[str, RawLabels]:
    """Parse labels.csv into folder name -> raw label triple.

    The header must be exactly `folder name,arousal,valence,comfort` — note
    arousal comes before valence — so a reordered file cannot silently swap
    labels.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty labels file")
    header = tuple(c.strip() for c in rows[0])
    if header != LABELS_HEADER:
        raise FormatError(f"{path}: header {header} != {LABELS_HEADER}")
    out: dict[str, RawLabels] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        cells = [c.strip() for c in row]
        if len(cells) != 4:
            raise FormatError(f"{path}:{lineno}: expected 4 columns, got {len(cells)}")
        folder = cells[0]
        parse_bag_id(folder)
        try:
            arousal, valence, comfort = (float(c) for c in cells[1:])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: non-numeric label value") from None
        for name, v in (("arousal", arousal), ("valence", valence), ("comfort", comfort)):
            if not (0.0 <= v <= 2.0):
                raise RangeError(f"{path}:{lineno}: {name} {v} outside [0, 2]")
        if folder in out:
            raise DuplicateEntryError(f"{path}:{lineno}: duplicate folder name {folder!r}")
        out[folder] = RawLabels(arousal, valence, comfort)
    return out


def load_embeddings(path) -> np.ndarray:
    """Read one bag's embeddings.csv: a `dim=<d>` header line, then one
    comma-separated row of d floats per frame, in temporal order."""
    path = Path(path)
    with path.open() as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("dim="):
        raise FormatError(f"{path}: missing dim=<d> header line")
    try:
        dim = int(lines[0][4:])
    except ValueError:
        raise FormatError(f"{path}: bad dim header {lines[0]!r}") from None
    if dim < 1:
        raise FormatError(f"{path}: dim must be >= 1, got {dim}")
    if len(lines) == 1:
        raise EmptyBagError(f"{path}: no frame rows")
    frames = np.empty((len(lines) - 1, dim))
    for i, line in enumerate(lines[1:]):
        cells = line.split(",")
        if len(cells) != dim:
            raise FormatError(f"{path}: row {i} has {len(cells)} values, expected {dim}")
        try:
            frames[i] = [float(c) for c in cells]
        except ValueError:
            raise FormatError(f"{path}: row {i} has a non-numeric value") from None
    return frames


def load_exclusions(path) -> dict[str, frozenset[int]]:
    """Read exclusions.csv (header `folder name,frame_index`) into a map of
    folder name -> frame indices to drop."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty exclusions file")
    header = tuple(c.strip() for c in rows[0])
    if header != EXCLUSIONS_HEADER:
        raise FormatError(f"{path}: header {header} != {EXCLUSIONS_HEADER}")
    out: dict[str, set[int]] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        cells = [c.strip() for c in row]
        if len(cells) != 2:
            raise FormatError(f"{path}:{lineno}: expected 2 columns, got {len(cells)}")
        try:
            idx = int(cells[1])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: frame index {cells[1]!r} is not an integer") from None
        if idx < 0:
            raise RangeError(f"{path}:{lineno}: negative frame index {idx}")
        out.setdefault(cells[0], set()).add(idx)
    return {k: frozenset(v) for k, v in out.items()}


@dataclass
class CorpusStats:
    """Bookkeeping from assemble_corpus."""
    skipped_missing_reference: list[str] = field(default_factory=list)
    dropped_empty: list[str] = field(default_factory=list)

    @property
    def skip_count(self) -> int:
        return len(self.skipped_missing_reference)


def subsample_frames(bag: Bag, max_j: int, seed: int = 0) -> Bag:
    """Cap a bag at max_j frames by uniform temporal stride.

    Keeps frames 0, s, 2s, ... with s = floor(J / max_j); bags already at or
    under the cap pass through unchanged. The policy is deterministic; seed
    is accepted for interface stability but currently unused.
    """
    if max_j < 1:
        raise ValueError(f"max_j must be >= 1, got {max_j}")
    j = bag.num_frames
    if j <= max_j:
        return bag
    stride = j // max_j
    idx = np.arange(max_j) * stride
    return Bag(bag.bag_id, bag.frames[idx], bag.label)


def assemble_corpus(root, reference: Mapping[str, RawLabels],
                    filt: CorpusFilter = CorpusFilter()) -> tuple[list[Bag], CorpusStats]:
    """Walk a corpus tree and build the filtered bag list.

    Folders are visited in sorted order, so two runs over the same tree give
    identical bag sequences. Folders with embeddings but no reference row are
    skipped and counted; bags whose frames are all excluded are dropped and
    counted.
    """
    root = Path(root)
    if not root.is_dir():
        raise OSError(f"corpus root {root} is not a readable directory")
    stats = CorpusStats()
    bags: list[Bag] = []
    for folder in sorted(p for p in root.iterdir() if p.is_dir()):
        emb_path = folder / EMBEDDINGS_FILENAME
        if not emb_path.is_file():
            continue
        bag_id = parse_bag_id(folder.name)
        if bag_id.person in filt.excluded_persons:
            continue
        if filt.exclude_warmup_trial and bag_id.trial == "T00":
            continue
        if folder.name not in reference:
            stats.skipped_missing_reference.append(folder.name)
            continue
        raw = reference[folder.name]
        frames = load_embeddings(emb_path)
        if filt.frame_exclusions and folder.name in filt.frame_exclusions:
            drop = filt.frame_exclusions[folder.name]
            bad = [i for i in drop if i >= frames.shape[0]]
            if bad:
                raise RangeError(
                    f"{folder.name}: excluded frame index {max(bad)} out of range "
                    f"for {frames.shape[0]} frames")
            keep = [i for i in range(frames.shape[0]) if i not in drop]
            if not keep:
                stats.dropped_empty.append(folder.name)
                continue
            frames = frames[keep]
        label = LabelPair(valence=rescale_label(raw.valence),
                          arousal=rescale_label(raw.arousal),
                          comfort=rescale_label(raw.comfort))
        bag = Bag(bag_id, frames, label)
        if filt.max_frames_per_bag is not None:
            bag = subsample_frames(bag, filt.max_frames_per_bag)
        bags.append(bag)
    return bags, stats


def load_corpus(root, filt: CorpusFilter = CorpusFilter()) -> tuple[list[Bag], CorpusStats]:
    """assemble_corpus with the reference read from <root>/labels.csv."""
    reference = load_reference(Path(root) / LABELS_FILENAME)
    return assemble_corpus(root, reference, filt)


def save_corpus(bags: Sequence[Bag], root) -> None:
    """Write bags back out in the on-disk corpus layout (raw labels doubled)."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    with (root / LABELS_FILENAME).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LABELS_HEADER)
        for bag in bags:
            writer.writerow([bag.bag_id.folder,
                             repr(bag.label.arousal * 2.0),
                             repr(bag.label.valence * 2.0),
                             repr(bag.label.comfort * 2.0)])
    for bag in bags:
        folder = root / bag.bag_id.folder
        folder.mkdir(exist_ok=True)
        with (folder / EMBEDDINGS_FILENAME).open("w") as fh:
            fh.write(f"dim={bag.frames.shape[1]}\n")
            for row in bag.frames:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


# --- synthetic corpus -------------------------------------------------------

@dataclass(frozen=True)
class SynthConfig:
    participants: int = 8
    bags_per_participant: int = 24
    frames_per_bag: int = 16
    embed_dim: int = 32
    key_frame_signal_dim: int = 4
    noise_std: float = 0.1
    valence_mean: float = 0.253
    valence_std: float = 0.200
    arousal_mean: float = 0.622
    arousal_std: float = 0.171
    seed: int = 0

    def __post_init__(self):
        for name in ("participants", "bags_per_participant", "frames_per_bag", "embed_dim",
                     "key_frame_signal_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.key_frame_signal_dim > self.embed_dim:
            raise ValueError("key_frame_signal_dim cannot exceed embed_dim")
        if self.noise_std < 0.0:
            raise ValueError("noise_std must be >= 0")
        if self.participants > 99:
            raise ValueError("at most 99 participants (P01..P99)")


@dataclass
class SynthTruth:
    """What the generator planted: per-bag key-frame index and the linear
    functional (rows: valence, arousal) that produced the labels."""
    key_frames: dict[str, int]
    functional: np.ndarray  # (2, key_frame_signal_dim), unit rows
    config: SynthConfig


@lru_cache(maxsize=1)
def _sigmoid_of_normal_std() -> float:
    """Std of sigmoid(Z), Z ~ N(0,1); mean is exactly 0.5 by symmetry."""
    def integrand(z):
        s = 1.0 / (1.0 + math.exp(-z))
        return s * s * math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    second_moment, _ = quad(integrand, -12.0, 12.0)
    return math.sqrt(second_moment - 0.25)


def _squash(raw: float, mean: float, std: float) -> float:
    """Map a unit normal through a sigmoid, standardize, rescale, clamp."""
    unit = (1.0 / (1.0 + math.exp(-raw)) - 0.5) / _sigmoid_of_normal_std()
    return float(np.clip(mean + std * unit, 0.0, 1.0))


def synth_generate(cfg: SynthConfig = SynthConfig()) -> tuple[list[Bag], SynthTruth]:
    """Generate a corpus with one planted key frame per bag.

    The key frame holds a standard-normal signal in its first
    key_frame_signal_dim coordinates (zeros elsewhere); every other frame is
    pure noise with std noise_std. Labels are sigmoids of a fixed random
    linear functional of the key-frame signal, rescaled to the configured
    mean/std and clamped to [0, 1]. Deterministic per seed.
    """
    rng = np.random.default_rng(cfg.seed)
    k = cfg.key_frame_signal_dim
    functional = rng.standard_normal((2, k))
    functional /= np.linalg.norm(functional, axis=1, keepdims=True)

    bags: list[Bag] = []
    key_frames: dict[str, int] = {}
    for p in range(cfg.participants):
        person = f"P{p + 1:02d}"
        for b in range(cfg.bags_per_participant):
            bag_id = BagId(person, f"T{1 + b // 24:02d}", f"I{1 + b % 24:02d}")
            key_idx = int(rng.integers(cfg.frames_per_bag))
            signal = rng.standard_normal(k)
            frames = rng.standard_normal((cfg.frames_per_bag, cfg.embed_dim)) * cfg.noise_std
            frames[key_idx] = 0.0
            frames[key_idx, :k] = signal
            raw_v, raw_a = functional @ signal
            label = LabelPair(
                valence=_squash(raw_v, cfg.valence_mean, cfg.valence_std),
                arousal=_squash(raw_a, cfg.arousal_mean, cfg.arousal_std),
                comfort=0.5)
            bags.append(Bag(bag_id, frames, label))
            key_frames[bag_id.folder] = key_idx
    return bags, SynthTruth(key_frames, functional, cfg)


# --- splits -----------------------------------------------------------------

def persons(bags: Iterable[Bag]) -> list[str]:
    return sorted({bag.bag_id.person for bag in bags})


def bags_by_person(bags: Iterable[Bag]) -> dict[str, list[Bag]]:
    out: dict[str, list[Bag]] = {}
    for bag in bags:
        out.setdefault(bag.bag_id.person, []).append(bag)
    return {k: out[k] for k in sorted(out)}


def split_individual(bags: Sequence[Bag], fraction: float) -> tuple[list[Bag], list[Bag]]:
    """Chronological train/test split of one person's bags.

    Bags are ordered by (trial, iteration); the first ceil(fraction * n) go
    to train. Chronological rather than random to avoid temporal leakage
    between adjacent frames of one session.
    """
    if not (0.0 < fraction < 1.0):
        raise ValueError(f"fraction must lie strictly in (0, 1), got {fraction}")
    if len(bags) < 3:
        raise InsufficientDataError(f"need at least 3 bags to split, got {len(bags)}")
    if len({bag.bag_id.person for bag in bags}) != 1:
        raise ValueError("split_individual expects bags of exactly one person")
    ordered = sorted(bags, key=lambda bag: (bag.bag_id.trial, bag.bag_id.iteration))
    n_train = math.ceil(fraction * len(ordered))
    return ordered[:n_train], ordered[n_train:]


def folds_universal(bags: Sequence[Bag],
                    held_out_persons: Sequence[Iterable[str]]) -> list[tuple[list[Bag], list[Bag]]]:
    """Person-level cross-validation folds.

    Per fold: test = bags of the held-out persons, train = everything else;
    a person never straddles both sides of one fold.
    """
    known = set(persons(bags))
    folds = []
    for fold_idx, held in enumerate(held_out_persons):
        held = set(held)
        if not held:
            raise ValueError(f"fold {fold_idx}: empty held-out person set")
        unknown = held - known
        if unknown:
            raise UnknownPersonError(f"fold {fold_idx}: unknown persons {sorted(unknown)}")
        test = [bag for bag in bags if bag.bag_id.person in held]
        train = [bag for bag in bags if bag.bag_id.person not in held]
        if not train:
            raise InsufficientDataError(f"fold {fold_idx}: holding out {sorted(held)} leaves no training data")
        folds.append((train, test))
    return folds
