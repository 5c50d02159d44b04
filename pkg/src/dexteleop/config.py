"""Config file loading: a `controller` section plus session options.

Every field is optional; CLI flags override file values which override the
defaults baked into the dataclasses.
"""

from __future__ import annotations

from pathlib import Path

import yaml

from .arm import ControllerConfig, KalmanConfig
from .errors import LibraryFormatError
from .session import SessionConfig
from .teach import AdmittanceParams, ForceGains


def load_config_file(path: str | Path) -> dict:
    try:
        doc = yaml.safe_load(Path(path).read_text()) or {}
    except yaml.YAMLError as exc:
        raise LibraryFormatError(f"cannot parse config file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise LibraryFormatError(f"config file {path} must be a mapping")
    return doc


def build_session_config(doc: dict | None = None, **controller_overrides) -> SessionConfig:
    doc = doc or {}
    controller_doc = dict(doc.get("controller", {}))
    kalman_doc = controller_doc.pop("kalman", {})
    controller_doc.update({k: v for k, v in controller_overrides.items() if v is not None})
    controller = ControllerConfig(kalman=KalmanConfig(**kalman_doc), **controller_doc)

    session_doc = dict(doc.get("session", {}))
    admittance = AdmittanceParams(dt=controller.dt, **session_doc.pop("admittance", {}))
    gains = ForceGains(**session_doc.pop("force_gains", {}))
    return SessionConfig(
        controller=controller, admittance=admittance, force_gains=gains, **session_doc
    )
