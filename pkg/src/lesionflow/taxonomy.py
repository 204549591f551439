"""Diagnostic label space: four major classes, each with named subtypes."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError, UnknownClass

MAJOR_CLASSES = ("Healthy", "Benign", "OPMD", "OralCancer")

DEFAULT_SUBTYPES_PER_MAJOR = 4


@dataclass(frozen=True)
class ClassTaxonomy:
    """Ordered label space for predictions.

    ``majors`` is always the four canonical major classes. ``subtypes`` is the
    ordered prediction label space; ``parent`` maps each subtype to its major.
    """

    majors: tuple[str, ...]
    subtypes: tuple[str, ...]
    parent: dict[str, str] = field(hash=False)

    def __post_init__(self) -> None:
        if tuple(self.majors) != MAJOR_CLASSES:
            raise ConfigError(
                f"majors must be exactly {list(MAJOR_CLASSES)} in order, got {list(self.majors)}"
            )
        if len(set(self.subtypes)) != len(self.subtypes):
            raise ConfigError("subtype labels must be unique")
        if not self.subtypes:
            raise ConfigError("taxonomy needs at least one subtype")
        for label in self.subtypes:
            if not label:
                raise ConfigError("subtype labels must be non-empty")
            if self.parent.get(label) not in self.majors:
                raise ConfigError(f"subtype {label!r} maps to unknown major {self.parent.get(label)!r}")
        covered = {self.parent[s] for s in self.subtypes}
        missing = [m for m in self.majors if m not in covered]
        if missing:
            raise ConfigError(f"every major needs at least one subtype; missing {missing}")

    def __len__(self) -> int:
        return len(self.subtypes)

    def subtype_index(self, label: str) -> int:
        try:
            return self.subtypes.index(label)
        except ValueError:
            raise UnknownClass(f"unknown subtype {label!r}") from None

    def major_of(self, label: str) -> str:
        if label not in self.parent:
            raise UnknownClass(f"unknown subtype {label!r}")
        return self.parent[label]

    def subtypes_of(self, major: str) -> tuple[str, ...]:
        return tuple(s for s in self.subtypes if self.parent[s] == major)


def default_taxonomy() -> ClassTaxonomy:
    """Placeholder subtype labels, four per major class (16 total)."""
    subtypes: list[str] = []
    parent: dict[str, str] = {}
    for major in MAJOR_CLASSES:
        for i in range(1, DEFAULT_SUBTYPES_PER_MAJOR + 1):
            label = f"{major.lower()}_{i}"
            subtypes.append(label)
            parent[label] = major
    return ClassTaxonomy(majors=MAJOR_CLASSES, subtypes=tuple(subtypes), parent=parent)


def taxonomy_from_mapping(majors: list[str], subtypes_by_major: dict[str, list[str]]) -> ClassTaxonomy:
    """Build a taxonomy from the config-file representation."""
    subtypes: list[str] = []
    parent: dict[str, str] = {}
    for major in majors:
        for label in subtypes_by_major.get(major, []):
            subtypes.append(label)
            parent[label] = major
    extra = set(subtypes_by_major) - set(majors)
    if extra:
        raise ConfigError(f"subtypes listed for unknown majors: {sorted(extra)}")
    return ClassTaxonomy(majors=tuple(majors), subtypes=tuple(subtypes), parent=parent)
