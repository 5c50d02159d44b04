"""Locations of bundled data files (hand models, library, benchmark, tracks)."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def data_dir() -> Path:
    return Path(resources.files("dexteleop") / "data")


def bundled_hand_model_path(model_id: str = "leap16") -> Path:
    return data_dir() / "hands" / f"{model_id}.tt"


def bundled_library_path() -> Path:
    return data_dir() / "library" / "core30.tt"


def bundled_benchmark_path() -> Path:
    return data_dir() / "bench" / "bench50.tt"


def bundled_track_path(name: str = "pour") -> Path:
    return data_dir() / "tracks" / f"{name}.track"


def resolve_hand_model_path(hand_model_id: str, near: Path | None = None) -> Path:
    """Find a hand model file by id: next to a library file first, then bundled."""
    if near is not None:
        candidate = Path(near).parent / f"{hand_model_id}.tt"
        if candidate.exists():
            return candidate
    bundled = bundled_hand_model_path(hand_model_id)
    if bundled.exists():
        return bundled
    raise FileNotFoundError(f"no hand model file for id {hand_model_id!r}")
