"""Persona pool loading and a small synthetic pool for offline runs."""

from __future__ import annotations

import json
import random
from pathlib import Path

from ..errors import StorageError, ValidationError

_FIRST = ("Maya", "Daniel", "Priya", "Lucas", "Amara", "Jonas", "Elena", "Kenji", "Sofia", "Omar",
          "Grace", "Mateo", "Hana", "Felix", "Leila", "Noah", "Ines", "Tariq", "Clara", "Ravi")
_LAST = ("Okafor", "Lindqvist", "Sharma", "Moreau", "Castillo", "Nakamura", "Brennan", "Haddad",
         "Kowalski", "Achebe", "Fischer", "Romero", "Patel", "Silva", "Novak", "Tanaka")
_OCCUPATIONS = ("nurse", "civil engineer", "high school teacher", "graphic designer", "accountant",
                "software developer", "pharmacist", "logistics coordinator", "chef", "social worker",
                "electrician", "marketing analyst")
_CITIES = ("Portland", "Austin", "Columbus", "Raleigh", "Denver", "Madison", "Tucson", "Richmond",
           "Boise", "Pittsburgh")
_TRAITS = ("enjoys weekend hikes", "volunteers at a local library", "is learning to bake bread",
           "keeps a small herb garden", "follows regional football closely", "likes board game nights",
           "is saving for a long trip", "sings in a community choir", "restores old bicycles",
           "reads history books before bed")


def synthetic_pool(n: int, seed: int = 0) -> list[dict]:
    """``n`` deterministic persona records in pool format."""
    rng = random.Random(f"persona-pool:{seed}")
    pool = []
    for i in range(n):
        name = f"{rng.choice(_FIRST)} {rng.choice(_LAST)}"
        traits = rng.sample(_TRAITS, 2)
        pool.append({
            "source_id": f"synthetic-{seed}-{i:04d}",
            "basic": {
                "name": name,
                "age": rng.randint(24, 61),
                "occupation": rng.choice(_OCCUPATIONS),
                "city": rng.choice(_CITIES),
            },
            "complementary": f"{name.split()[0]} {traits[0]} and {traits[1]}.",
        })
    return pool


def normalize_record(raw: dict, fallback_id: str) -> dict:
    """Accept ``{basic, complementary}`` records or flat field dicts."""
    if not isinstance(raw, dict):
        raise ValidationError(f"persona record {fallback_id} is not an object")
    if "basic" in raw:
        basic = dict(raw["basic"])
        complementary = str(raw.get("complementary", ""))
    else:
        complementary_keys = [k for k in raw if k.endswith("persona") or k in ("complementary", "background")]
        complementary = "\n".join(str(raw[k]) for k in complementary_keys)
        basic = {k: v for k, v in raw.items() if k not in complementary_keys and k not in ("source_id", "uuid")}
    if not basic and not complementary.strip():
        raise ValidationError(f"persona record {fallback_id} has no usable fields")
    source_id = str(raw.get("source_id") or raw.get("uuid") or fallback_id)
    return {"source_id": source_id, "basic": basic, "complementary": complementary}


def load_pool(path: str | Path) -> list[dict]:
    """Read a newline-delimited JSON persona pool."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise StorageError(f"cannot read persona pool {path}: {exc}") from exc
    records = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
        records.append(normalize_record(raw, f"pool-{lineno:06d}"))
    return records
