"""Structured study events written as JSON lines to the ``biharm.events`` logger."""

from __future__ import annotations

import logging
import os
from typing import Any, Dict, Optional

import orjson

LOGGER = logging.getLogger(__name__)

EVENT_LOGGER_NAME = "biharm.events"
DEFAULT_SOURCE_APP = "biharm"


def _is_truthy(value: Optional[str]) -> bool:
    if value is None:
        return False
    return value.strip().lower() not in {"0", "false", "no", "off", ""}


def _default(obj: Any) -> Any:
    if hasattr(obj, "value"):
        return obj.value
    if hasattr(obj, "tolist"):
        return obj.tolist()
    raise TypeError(f"Cannot serialize {type(obj).__name__}")


class StudyEventLog:
    """Emits one JSON object per event on ``biharm.events`` at INFO."""

    def __init__(
        self,
        *,
        source_app: Optional[str] = None,
        enabled: Optional[bool] = None,
        default_study_id: Optional[str] = None,
        logger: Optional[logging.Logger] = None,
    ) -> None:
        env_enabled = os.getenv("BIHARM_EVENTS_ENABLED")
        self._source_app = source_app or DEFAULT_SOURCE_APP
        self._default_study_id = default_study_id
        self._logger = logger or logging.getLogger(EVENT_LOGGER_NAME)
        if enabled is None:
            enabled = _is_truthy(env_enabled) if env_enabled is not None else True
        self._enabled = bool(enabled)

    @property
    def enabled(self) -> bool:
        return self._enabled

    # --------------------------------------------------------------------- #
    # Core emission helper
    # --------------------------------------------------------------------- #
    def send_event(
        self,
        event_type: str,
        payload: Dict[str, Any],
        *,
        study_id: Optional[str] = None,
    ) -> None:
        if not self._enabled:
            LOGGER.debug("Event log disabled, skipping event: %s", event_type)
            return
        event = {
            "source_app": self._source_app,
            "study_id": study_id or self._default_study_id,
            "event_type": event_type,
            "payload": payload,
        }
        try:
            line = orjson.dumps(event, default=_default, option=orjson.OPT_SORT_KEYS)
        except TypeError as exc:
            LOGGER.warning("Failed to serialize event %s: %s", event_type, exc)
            return
        self._logger.info(line.decode("utf-8"))

    # --------------------------------------------------------------------- #
    # Event helpers
    # --------------------------------------------------------------------- #
    def study_start(self, kind: str, **payload: Any) -> None:
        self.send_event("StudyStart", {"kind": kind, **payload})

    def study_end(self, kind: str, *, success: bool, **payload: Any) -> None:
        self.send_event("StudyEnd" if success else "StudyFailed", {"kind": kind, "success": success, **payload})

    def solve_complete(self, n: int, m: int, iterations: int, residual: float, **payload: Any) -> None:
        self.send_event(
            "SolveComplete",
            {"n": n, "m": m, "iterations": iterations, "residual": residual, **payload},
        )

    def ladder_entry(self, m: int, error: Optional[float], **payload: Any) -> None:
        self.send_event("LadderEntry", {"m": m, "error": error, **payload})

    def probe_result(self, probe: str, value: float, *, passed: bool, **payload: Any) -> None:
        self.send_event("ProbeResult", {"probe": probe, "value": value, "passed": passed, **payload})

    # --------------------------------------------------------------------- #
    # Configuration helpers
    # --------------------------------------------------------------------- #
    def with_study(self, study_id: str) -> "StudyEventLog":
        """Return a copy bound to a particular study ID."""
        return StudyEventLog(
            source_app=self._source_app,
            enabled=self._enabled,
            default_study_id=study_id,
            logger=self._logger,
        )


__all__ = ["EVENT_LOGGER_NAME", "StudyEventLog"]
