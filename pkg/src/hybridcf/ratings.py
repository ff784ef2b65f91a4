"""Rating matrix data model and questionnaire ingestion.

Ratings live in a float grid where ``NaN`` marks a missing cell ("never
tried", "I don't know", or simply unanswered).  Present cells are integer
scores 0..5.
"""

from __future__ import annotations

import csv
import enum
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptyResultError, IngestError

MIN_RATING = 0
MAX_RATING = 5


class ItemKind(str, enum.Enum):
    TOOL = "Tool"
    STRATEGY = "Strategy"
    # questionnaire difficulty items: parsed, never recommended
    DIFFICULTY = "Difficulty"


@dataclass(frozen=True)
class CatalogEntry:
    item_id: str
    kind: ItemKind
    label: str


@dataclass(frozen=True)
class ItemCatalog:
    entries: tuple[CatalogEntry, ...]

    def __post_init__(self):
        ids = [e.item_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise IngestError("catalog item_ids must be unique")

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, item_id: str) -> bool:
        return any(e.item_id == item_id for e in self.entries)

    @property
    def item_ids(self) -> tuple[str, ...]:
        return tuple(e.item_id for e in self.entries)

    def get(self, item_id: str) -> CatalogEntry:
        for e in self.entries:
            if e.item_id == item_id:
                return e
        raise KeyError(item_id)

    def label(self, item_id: str) -> str:
        return self.get(item_id).label

    def recommendable(self) -> "ItemCatalog":
        return ItemCatalog(tuple(e for e in self.entries if e.kind is not ItemKind.DIFFICULTY))

    def subset(self, item_ids: Iterable[str]) -> "ItemCatalog":
        """Catalog restricted to ``item_ids``, in that order."""
        return ItemCatalog(tuple(self.get(i) for i in item_ids))

    @classmethod
    def from_csv(cls, path: str | Path) -> "ItemCatalog":
        """Read a catalog file with header ``item_id,kind,label``."""
        path = Path(path)
        if not path.exists():
            raise IngestError(f"catalog not found: {path}")
        entries = []
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = {"item_id", "kind", "label"} - set(reader.fieldnames or ())
            if missing:
                raise IngestError(f"{path}: catalog header lacks {sorted(missing)}")
            for lineno, row in enumerate(reader, start=2):
                try:
                    kind = ItemKind(row["kind"].strip())
                except ValueError:
                    raise IngestError(f"{path}:{lineno}: unknown item kind {row['kind']!r}") from None
                entries.append(CatalogEntry(row["item_id"].strip(), kind, row["label"].strip()))
        return cls(tuple(entries))

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["item_id", "kind", "label"])
            for e in self.entries:
                w.writerow([e.item_id, e.kind.value, e.label])


_DIFFICULTIES = (
    "Reading", "Writing", "Understanding difficult words", "Understanding the lessons",
    "Concentration", "Paying attention during presential lessons",
    "Paying attention during online lessons", "Memorising recently studied concepts",
    "Remembering concepts studied during the exam", "Study time management", "Taking notes",
    "Limited time available to prepare a task/question/exam",
)
_TOOLS = (
    "Human voice audio book", "Robotic voice audio book", "Different colour words",
    "Using the EasyReading font", "Using a smart pen or tablet to take notes and record voice",
    "Clearer layout of the study material", "Having the key words of the text highlighted",
    "Prepared concept maps", "Prepared schemes", "Prepared summaries", "E-Books",
    "Digital tutor", "Images to help understand the meaning of difficult words",
    "Images that help to memorise a concept", "Audio recording of lessons", "Video lessons",
    "Supplementing study material with internet research",
)
_STRATEGIES = (
    "A person reading for him/her", "A map made by himself/herself",
    "A scheme made by himself/herself", "A summary made by himself/herself",
    "Repeat the studied material", "Marking keywords", "Underlining with different colours",
    "Having a study group", "Having a tutor", "Dyslexic student group to exchange resources",
    "Presential lessons", "Online lessons available", "Taking breaks during lessons",
    "Lesson slides available", "Recording the lesson", "Taking notes",
    "Having the lesson plan in advance", "Dividing an examination/task/question into several parts",
    "Only written tests", "Only oral tests",
    "Conducting the exams in the presence of the professor alone",
    "Having an online database with notes made by other students",
)


def questionnaire_catalog() -> ItemCatalog:
    """The 12 difficulties (P), 17 support tools (T) and 22 strategies (S) of the questionnaire."""
    entries = [CatalogEntry(f"P{i}", ItemKind.DIFFICULTY, s) for i, s in enumerate(_DIFFICULTIES, 1)]
    entries += [CatalogEntry(f"T{i}", ItemKind.TOOL, s) for i, s in enumerate(_TOOLS, 1)]
    entries += [CatalogEntry(f"S{i}", ItemKind.STRATEGY, s) for i, s in enumerate(_STRATEGIES, 1)]
    return ItemCatalog(tuple(entries))


def _norm_label(label: str) -> str:
    return " ".join(label.replace("’", "'").strip().casefold().split())


@dataclass(frozen=True)
class LabelMapping:
    """Questionnaire answer label -> score; sentinel labels map to missing."""

    scores: tuple[tuple[str, int], ...] = (
        ("not at all", 0),
        ("very little", 1),
        ("little", 2),
        ("medium", 3),
        ("much", 4),
        ("very much", 5),
    )
    sentinels: tuple[str, ...] = ("never tried", "I don't know")

    def __post_init__(self):
        values = sorted(v for _, v in self.scores)
        if values != list(range(MIN_RATING, MAX_RATING + 1)):
            raise ValueError("label scores must be distinct and cover 0..5")
        keys = [_norm_label(k) for k, _ in self.scores] + [_norm_label(s) for s in self.sentinels]
        if len(set(keys)) != len(keys):
            raise ValueError("labels must be distinct")

    def lookup(self, label: str) -> float:
        """Score for ``label`` (``nan`` for a sentinel); ``KeyError`` if unknown."""
        key = _norm_label(label)
        for name, value in self.scores:
            if _norm_label(name) == key:
                return float(value)
        if any(_norm_label(s) == key for s in self.sentinels):
            return np.nan
        raise KeyError(label)

    def label_for(self, score: int) -> str:
        for name, value in self.scores:
            if value == score:
                return name
        raise KeyError(score)

    def parse_cell(self, raw: str) -> float:
        """Parse one CSV cell: empty, an integer 0-5, or a label."""
        text = raw.strip()
        if not text:
            return np.nan
        try:
            num = float(text)
        except ValueError:
            return self.lookup(text)
        if num != int(num) or not MIN_RATING <= num <= MAX_RATING:
            raise KeyError(raw)
        return num


DEFAULT_MAPPING = LabelMapping()


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64) + 0.0  # -0.0 -> 0.0 so equal grids hash equal
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RatingsMatrix:
    """Users x items grid of optional ratings (``nan`` = missing).

    ``difficulties`` optionally holds the questionnaire difficulty answers for the
    same users; they are carried along but never used for recommendation.
    """

    users: tuple[str, ...]
    items: tuple[str, ...]
    values: np.ndarray
    difficulties: "RatingsMatrix | None" = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "values", _frozen(self.values))
        v = self.values
        if v.ndim != 2 or v.shape != (len(self.users), len(self.items)):
            raise ValueError(f"grid shape {v.shape} != ({len(self.users)}, {len(self.items)})")
        if len(set(self.users)) != len(self.users):
            raise ValueError("user ids must be unique")
        if len(set(self.items)) != len(self.items):
            raise ValueError("item ids must be unique")
        present = v[~np.isnan(v)]
        if present.size and (
            present.min() < MIN_RATING or present.max() > MAX_RATING or np.any(present != np.round(present))
        ):
            raise ValueError("present ratings must be integers in 0..5")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def present(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def user_index(self, user_id: str) -> int:
        return self.users.index(user_id)

    def item_index(self, item_id: str) -> int:
        return self.items.index(item_id)

    def empty_users(self) -> tuple[str, ...]:
        """Users without a single rating; predictors serve them from the fallback means."""
        rows = ~self.present.any(axis=1)
        return tuple(u for u, empty in zip(self.users, rows) if empty)

    def row(self, user_id: str) -> np.ndarray:
        return self.values[self.user_index(user_id)]

    def take_users(self, idx: Sequence[int]) -> "RatingsMatrix":
        idx = list(idx)
        diff = self.difficulties.take_users(idx) if self.difficulties is not None else None
        return RatingsMatrix(tuple(self.users[i] for i in idx), self.items, self.values[idx], diff)

    def take_items(self, idx: Sequence[int]) -> "RatingsMatrix":
        idx = list(idx)
        return RatingsMatrix(
            self.users, tuple(self.items[j] for j in idx), self.values[:, idx], self.difficulties
        )

    def global_mean(self) -> float:
        v = self.values[self.present]
        if v.size == 0:
            raise EmptyResultError("matrix has no present ratings")
        return float(v.mean())

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update("\x1f".join(self.users).encode())
        h.update(b"\x1e")
        h.update("\x1f".join(self.items).encode())
        h.update(b"\x1e")
        h.update(np.ascontiguousarray(self.values).tobytes())
        return h.hexdigest()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RatingsMatrix):
            return NotImplemented
        return (
            self.users == other.users
            and self.items == other.items
            and np.array_equal(self.values, other.values, equal_nan=True)
            and self.difficulties == other.difficulties
        )

    def __hash__(self):
        return hash(self.fingerprint())

    def to_csv(self, path: str | Path) -> None:
        """Write ``user_id`` + item columns; missing cells are written empty."""
        cols = list(self.items)
        grid = self.values
        if self.difficulties is not None:
            cols += list(self.difficulties.items)
            grid = np.hstack([grid, self.difficulties.values])
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["user_id", *cols])
            for uid, row in zip(self.users, grid):
                w.writerow([uid, *("" if np.isnan(x) else str(int(x)) for x in row)])


def ingest_csv(
    path: str | Path,
    mapping: LabelMapping = DEFAULT_MAPPING,
    catalog: ItemCatalog | None = None,
) -> RatingsMatrix:
    """Load a questionnaire export into a :class:`RatingsMatrix`.

    The first column must be ``user_id``; every other header must be a catalog
    item.  Difficulty columns go to ``RatingsMatrix.difficulties``.  Without a
    catalog every column is treated as a recommendable item.
    """
    path = Path(path)
    if not path.exists():
        raise IngestError(f"dataset not found: {path}")
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        if not header or header[0] != "user_id":
            raise IngestError(f"{path}: first column must be 'user_id'")
        columns = header[1:]
        if len(set(columns)) != len(columns):
            raise IngestError(f"{path}: duplicate item columns")
        if catalog is not None:
            unknown = [c for c in columns if c not in catalog]
            if unknown:
                raise IngestError(f"{path}: unknown item column(s) {unknown}")
        users: list[str] = []
        seen: set[str] = set()
        rows: list[list[float]] = []
        for lineno, rec in enumerate(reader, start=2):
            if not any(cell.strip() for cell in rec):
                continue
            if len(rec) != len(header):
                raise IngestError(f"{path}:{lineno}: expected {len(header)} cells, got {len(rec)}")
            uid = rec[0].strip()
            if uid in seen:
                raise IngestError(f"{path}:{lineno}: duplicate user_id {uid!r}")
            seen.add(uid)
            row = []
            for col, cell in zip(columns, rec[1:]):
                try:
                    row.append(mapping.parse_cell(cell))
                except KeyError:
                    raise IngestError(
                        f"{path}:{lineno}: unknown label {cell!r} for user {uid!r}, column {col!r}"
                    ) from None
            users.append(uid)
            rows.append(row)

    grid = np.array(rows, dtype=np.float64).reshape(len(users), len(columns))
    if catalog is None:
        return RatingsMatrix(tuple(users), tuple(columns), grid)
    is_diff = [catalog.get(c).kind is ItemKind.DIFFICULTY for c in columns]
    rec_idx = [j for j, d in enumerate(is_diff) if not d]
    diff_idx = [j for j, d in enumerate(is_diff) if d]
    difficulties = None
    if diff_idx:
        difficulties = RatingsMatrix(
            tuple(users), tuple(columns[j] for j in diff_idx), grid[:, diff_idx]
        )
    return RatingsMatrix(
        tuple(users), tuple(columns[j] for j in rec_idx), grid[:, rec_idx], difficulties
    )


def missing_fractions(m: RatingsMatrix) -> np.ndarray:
    if m.shape[0] == 0:
        return np.zeros(m.shape[1])
    return np.isnan(m.values).mean(axis=0)


def filter_items(m: RatingsMatrix, max_missing_fraction: float = 0.48) -> tuple[RatingsMatrix, list[str]]:
    """Drop items whose missing fraction strictly exceeds ``max_missing_fraction``."""
    if not 0.0 <= max_missing_fraction <= 1.0:
        raise ValueError("max_missing_fraction must be in [0, 1]")
    frac = missing_fractions(m)
    keep = [j for j, f in enumerate(frac) if f <= max_missing_fraction]
    removed = [m.items[j] for j, f in enumerate(frac) if f > max_missing_fraction]
    if not keep:
        raise EmptyResultError("every item exceeds the missing-value threshold; nothing to recommend")
    return m.take_items(keep), removed


class Axis(str, enum.Enum):
    BY_USER = "by_user"
    BY_ITEM = "by_item"


def impute_rows(values: np.ndarray) -> np.ndarray:
    """Fill ``nan`` cells with their row mean; all-missing rows get the global mean."""
    values = np.asarray(values, dtype=np.float64)
    present = ~np.isnan(values)
    total = present.sum()
    if total == 0:
        raise EmptyResultError("cannot impute a matrix with no present ratings")
    filled = np.where(present, values, 0.0)
    counts = present.sum(axis=1)
    sums = filled.sum(axis=1)
    global_mean = sums.sum() / total
    means = np.divide(sums, counts, out=np.full(sums.shape, global_mean), where=counts > 0)
    return np.where(present, values, means[:, None])


def impute(m: RatingsMatrix | np.ndarray, axis: Axis = Axis.BY_USER) -> np.ndarray:
    """Dense copy of ``m`` with missing cells replaced by row (BY_USER) or column (BY_ITEM) means."""
    values = m.values if isinstance(m, RatingsMatrix) else np.asarray(m, dtype=np.float64)
    if values.size == 0:
        raise EmptyResultError("cannot impute an empty matrix")
    if Axis(axis) is Axis.BY_USER:
        return impute_rows(values)
    return impute_rows(values.T).T


def read_profile(path: str | Path) -> dict[str, str]:
    """Read a cold-start answer sheet: CSV ``item_id,response`` or a JSON object."""
    path = Path(path)
    if not path.exists():
        raise IngestError(f"profile not found: {path}")
    if path.suffix.lower() == ".json":
        import json

        data = json.loads(path.read_text(encoding="utf-8"))
        if not isinstance(data, Mapping):
            raise IngestError(f"{path}: expected a JSON object of item_id -> response")
        return {str(k): str(v) for k, v in data.items()}
    out: dict[str, str] = {}
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        if set(reader.fieldnames or ()) < {"item_id", "response"}:
            raise IngestError(f"{path}: profile header must be 'item_id,response'")
        for row in reader:
            out[row["item_id"].strip()] = row["response"] or ""
    return out
