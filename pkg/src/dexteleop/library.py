"""Manipulation type library: data model, file format, validation, queries.

A manipulation type is a named pair of hand postures (stretch / contract)
plus attribute annotations used for retrieval, placed in a two-level
taxonomy.  Libraries are immutable after load; teach-mode additions build
a new Library value.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import (
    DuplicateTypeIdError,
    EmptyQueryError,
    LibraryFormatError,
    LibraryValidationError,
    TypeNotFoundError,
)
from .hand import HandKinematicModel

SCHEMA_VERSION = "1"

TAXONOMY_TOPS = ("single-hand", "bimanual")
TAXONOMY_SUBS = ("robot-exclusive-grasp", "general-grasp", "non-grasp", "symmetric", "asymmetric")
_SUBS_BY_TOP = {
    "single-hand": ("robot-exclusive-grasp", "general-grasp", "non-grasp"),
    "bimanual": ("symmetric", "asymmetric"),
}
HANDEDNESS = ("left", "right", "either", "bimanual-role")

ATTRIBUTE_FIELDS = (
    "hand_posture",
    "object_categories",
    "contact_parts",
    "part_geometry",
    "grasp_direction",
    "purpose",
)

# Attribute weights for deterministic retrieval; object identity and purpose
# dominate because task commands name objects and goals, not finger shapes.
QUERY_WEIGHTS = {
    "object_categories": 3.0,
    "part_geometry": 2.0,
    "purpose": 2.0,
    "contact_parts": 1.0,
    "grasp_direction": 1.0,
    "hand_posture": 1.0,
}

_STOPWORDS = frozenset(
    "a an the and or of to for from with into onto in on at by is are be as it its "
    "i we you want need please then them their this that these those up down out off".split()
)


def tokenize(text: str) -> frozenset[str]:
    """Case-folded word tokens minus stop words."""
    return frozenset(tok for tok in re.findall(r"[a-z0-9]+", text.lower()) if tok not in _STOPWORDS)


@dataclass(frozen=True)
class TaxonomyPath:
    top: str
    sub: str

    def __post_init__(self):
        if self.top not in TAXONOMY_TOPS:
            raise LibraryValidationError(f"unknown taxonomy top {self.top!r}", field="category.top")
        if self.sub not in TAXONOMY_SUBS:
            raise LibraryValidationError(f"unknown taxonomy sub {self.sub!r}", field="category.sub")
        if self.sub not in _SUBS_BY_TOP[self.top]:
            raise LibraryValidationError(
                f"sub-category {self.sub!r} is not valid under {self.top!r}", field="category"
            )


@dataclass(frozen=True)
class TypeAttributes:
    hand_posture: str
    object_categories: tuple[str, ...]
    contact_parts: tuple[str, ...]
    part_geometry: tuple[str, ...]
    grasp_direction: str
    purpose: str

    def __post_init__(self):
        for name in ATTRIBUTE_FIELDS:
            value = getattr(self, name)
            if isinstance(value, (list, tuple)):
                value = tuple(str(v) for v in value)
                object.__setattr__(self, name, value)
                empty = not value or any(not v.strip() for v in value)
            else:
                empty = not str(value).strip()
            if empty:
                raise LibraryValidationError(f"attribute {name!r} must be non-empty", field=name)

    def field_text(self, name: str) -> str:
        value = getattr(self, name)
        return " ".join(value) if isinstance(value, tuple) else value


@dataclass(frozen=True)
class ManipulationType:
    id: str
    name: str
    category: TaxonomyPath
    stretch_posture: tuple[float, ...]
    contract_posture: tuple[float, ...]
    attributes: TypeAttributes
    handedness: str = "either"

    def __post_init__(self):
        if not self.id or not str(self.id).strip():
            raise LibraryValidationError("type id must be non-empty", field="id")
        object.__setattr__(self, "stretch_posture", tuple(float(v) for v in self.stretch_posture))
        object.__setattr__(self, "contract_posture", tuple(float(v) for v in self.contract_posture))
        if self.handedness not in HANDEDNESS:
            raise LibraryValidationError(
                f"unknown handedness {self.handedness!r}", type_id=self.id, field="handedness"
            )


@dataclass(frozen=True)
class Library:
    types: tuple[ManipulationType, ...]
    hand_model_id: str
    schema_version: str = SCHEMA_VERSION
    _by_id: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {t.id: t for t in self.types})

    def __len__(self) -> int:
        return len(self.types)

    def __contains__(self, type_id: str) -> bool:
        return type_id in self._by_id

    def get_type(self, type_id: str) -> ManipulationType:
        try:
            return self._by_id[type_id]
        except KeyError:
            raise TypeNotFoundError(type_id) from None

    def by_name(self, name: str) -> ManipulationType | None:
        """Case-insensitive display-name lookup (lowest id wins on ties)."""
        wanted = name.strip().lower()
        matches = sorted((t.id for t in self.types if t.name.lower() == wanted))
        return self._by_id[matches[0]] if matches else None

    def sub_categories(self) -> tuple[str, ...]:
        return tuple(sorted({t.category.sub for t in self.types}))


def get_type(library: Library, type_id: str) -> ManipulationType:
    return library.get_type(type_id)


# ---------------------------------------------------------------------------
# Validation and file round trip
# ---------------------------------------------------------------------------


def _validate_posture(t: ManipulationType, name: str, hand_model: HandKinematicModel) -> None:
    posture = getattr(t, name)
    if len(posture) != hand_model.dof:
        raise LibraryValidationError(
            f"type {t.id!r}: {name} has {len(posture)} joints, hand model "
            f"{hand_model.id!r} has {hand_model.dof}",
            type_id=t.id,
            field=name,
        )
    for j, value in enumerate(posture):
        lo, hi = hand_model.lower[j], hand_model.upper[j]
        if not lo <= value <= hi:
            raise LibraryValidationError(
                f"type {t.id!r}: {name}[{j}] = {value} outside joint limits [{lo}, {hi}]",
                type_id=t.id,
                field=name,
            )


def validate_type(t: ManipulationType, hand_model: HandKinematicModel) -> None:
    _validate_posture(t, "stretch_posture", hand_model)
    _validate_posture(t, "contract_posture", hand_model)
    if t.stretch_posture == t.contract_posture:
        raise LibraryValidationError(
            f"type {t.id!r}: stretch and contract postures are identical",
            type_id=t.id,
            field="contract_posture",
        )


def validate_library(library: Library, hand_model: HandKinematicModel) -> None:
    if not library.types:
        raise LibraryValidationError("library contains no types")
    seen: set[str] = set()
    for t in library.types:
        if t.id in seen:
            raise DuplicateTypeIdError(t.id)
        seen.add(t.id)
        validate_type(t, hand_model)


def _type_from_doc(doc: dict) -> ManipulationType:
    type_id = str(doc.get("id", "")).strip()
    try:
        category = TaxonomyPath(top=doc["category"]["top"], sub=doc["category"]["sub"])
        attrs = doc["attributes"]
        attributes = TypeAttributes(
            hand_posture=attrs["hand_posture"],
            object_categories=tuple(attrs["object_categories"]),
            contact_parts=tuple(attrs["contact_parts"]),
            part_geometry=tuple(attrs["part_geometry"]),
            grasp_direction=attrs["grasp_direction"],
            purpose=attrs["purpose"],
        )
        return ManipulationType(
            id=type_id,
            name=str(doc["name"]),
            category=category,
            stretch_posture=tuple(doc["stretch_posture"]),
            contract_posture=tuple(doc["contract_posture"]),
            attributes=attributes,
            handedness=str(doc.get("handedness", "either")),
        )
    except LibraryValidationError as exc:
        if not exc.type_id:
            exc.type_id = type_id
        raise LibraryValidationError(
            f"type {type_id!r}: {exc}", type_id=type_id, field=exc.field
        ) from exc
    except (KeyError, TypeError) as exc:
        missing = exc.args[0] if isinstance(exc, KeyError) else exc
        raise LibraryValidationError(
            f"type {type_id!r}: missing or malformed field {missing!r}",
            type_id=type_id,
            field=str(missing),
        ) from exc


def parse_library(text: str, hand_model: HandKinematicModel) -> Library:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise LibraryFormatError(f"cannot parse library file: {exc}") from exc
    if not isinstance(doc, dict) or "types" not in doc:
        raise LibraryFormatError("library file must be a mapping with a 'types' list")
    if not isinstance(doc["types"], list):
        raise LibraryFormatError("'types' must be a list")
    types = tuple(_type_from_doc(td) for td in doc["types"])
    library = Library(
        types=types,
        hand_model_id=str(doc.get("hand_model_id", hand_model.id)),
        schema_version=str(doc.get("schema_version", SCHEMA_VERSION)),
    )
    validate_library(library, hand_model)
    return library


def load_library(path: str | Path, hand_model: HandKinematicModel) -> Library:
    """Load and validate a library file against a hand model."""
    return parse_library(Path(path).read_text(), hand_model)


def _type_to_doc(t: ManipulationType) -> dict:
    return {
        "id": t.id,
        "name": t.name,
        "category": {"top": t.category.top, "sub": t.category.sub},
        "handedness": t.handedness,
        "stretch_posture": [float(v) for v in t.stretch_posture],
        "contract_posture": [float(v) for v in t.contract_posture],
        "attributes": {
            "hand_posture": t.attributes.hand_posture,
            "object_categories": list(t.attributes.object_categories),
            "contact_parts": list(t.attributes.contact_parts),
            "part_geometry": list(t.attributes.part_geometry),
            "grasp_direction": t.attributes.grasp_direction,
            "purpose": t.attributes.purpose,
        },
    }


def serialize_library(library: Library) -> str:
    doc = {
        "schema_version": library.schema_version,
        "hand_model_id": library.hand_model_id,
        "types": [_type_to_doc(t) for t in library.types],
    }
    return yaml.safe_dump(doc, sort_keys=False, allow_unicode=True)


def save_library(library: Library, path: str | Path) -> None:
    Path(path).write_text(serialize_library(library))


def add_type(library: Library, new_type: ManipulationType, hand_model: HandKinematicModel) -> Library:
    """Return a new Library with ``new_type`` appended (input untouched)."""
    if new_type.id in library:
        raise DuplicateTypeIdError(new_type.id)
    validate_type(new_type, hand_model)
    return Library(
        types=library.types + (new_type,),
        hand_model_id=library.hand_model_id,
        schema_version=library.schema_version,
    )


def merge_libraries(base: Library, extra: Library) -> Library:
    """Bundled library plus user additions; ids must stay unique."""
    for t in extra.types:
        if t.id in base:
            raise DuplicateTypeIdError(t.id)
    return Library(
        types=base.types + extra.types,
        hand_model_id=base.hand_model_id,
        schema_version=base.schema_version,
    )


# ---------------------------------------------------------------------------
# Attribute queries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttributeQuery:
    hand_posture: str = ""
    object_categories: str = ""
    contact_parts: str = ""
    part_geometry: str = ""
    grasp_direction: str = ""
    purpose: str = ""

    @classmethod
    def from_text(cls, text: str) -> "AttributeQuery":
        """Free-text query: the same tokens are matched against every field."""
        return cls(**{name: text for name in ATTRIBUTE_FIELDS})

    def is_empty(self) -> bool:
        return all(not tokenize(getattr(self, name)) for name in ATTRIBUTE_FIELDS)


def score_type(t: ManipulationType, query: AttributeQuery) -> float:
    score = 0.0
    for name in ATTRIBUTE_FIELDS:
        query_tokens = tokenize(getattr(query, name))
        if not query_tokens:
            continue
        score += QUERY_WEIGHTS[name] * len(query_tokens & tokenize(t.attributes.field_text(name)))
    return score


def query_by_attributes(library: Library, query: AttributeQuery) -> list[tuple[ManipulationType, float]]:
    """Rank types by weighted token overlap, ties broken by lexicographic id."""
    if query.is_empty():
        raise EmptyQueryError("attribute query has no usable tokens")
    scored = [(t, score_type(t, query)) for t in library.types]
    scored.sort(key=lambda pair: (-pair[1], pair[0].id))
    return scored
