"""Parsing of MISP-style event JSON into immutable domain objects.

One JSON file holds one event. The feed an event belongs to is the name of
its creating organisation (``Event.Orgc.name``).
"""

from __future__ import annotations

import enum
import json
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Optional

from .errors import (
    BadTimestamp,
    DuplicateEventId,
    EmptyTag,
    IoFailure,
    MalformedEvent,
    MalformedTag,
)

logger = logging.getLogger(__name__)


class Label(enum.Enum):
    EXPLOITATION = "exploitation"
    NON_EXPLOITATION = "non-exploitation"

    @classmethod
    def parse(cls, text: str) -> "Label":
        key = text.strip().lower().replace("_", "-")
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown label {text!r}")

    def as_int(self) -> int:
        return 1 if self is Label.EXPLOITATION else 0


class LabelSource(enum.Enum):
    MANUAL = "manual"
    RULE_MINED = "rule-mined"
    UNLABELED = "unlabeled"


@dataclass(frozen=True)
class Tag:
    raw: str
    namespace: str
    predicate: str
    value: Optional[str] = None

    def canonical(self) -> str:
        return self.raw.strip().lower()


@dataclass(frozen=True)
class IoC:
    attr_id: str
    category: str
    attr_type: str
    value: str
    timestamp: int
    comment: Optional[str] = None

    def __post_init__(self):
        if self.timestamp < 0:
            raise BadTimestamp(f"attribute {self.attr_id}: negative timestamp")
        if not self.value:
            raise MalformedEvent(f"attribute {self.attr_id}: empty value")


@dataclass(frozen=True)
class TiEvent:
    event_id: str
    feed_id: str
    info: str
    created_ts: int
    modified_ts: int
    threat_level: Optional[int] = None
    tags: tuple[Tag, ...] = ()
    attributes: tuple[IoC, ...] = ()
    label: Optional[Label] = None
    label_source: LabelSource = LabelSource.UNLABELED

    def __post_init__(self):
        if self.modified_ts < self.created_ts:
            raise MalformedEvent(f"event {self.event_id}: modified before created")
        if (self.label is None) != (self.label_source is LabelSource.UNLABELED):
            raise ValueError(f"event {self.event_id}: label/label_source disagree")


@dataclass(frozen=True)
class ParseFailure:
    path: str
    message: str


@dataclass(frozen=True)
class Corpus:
    """Events sorted by ``(created_ts, event_id)``.

    Build through :meth:`from_events`, which sorts and checks id uniqueness.
    """

    events: tuple[TiEvent, ...]
    feeds: frozenset[str]
    failures: tuple[ParseFailure, ...] = ()
    warnings: tuple[str, ...] = ()

    @classmethod
    def from_events(cls, events: Iterable[TiEvent], failures=(), warnings=()) -> "Corpus":
        events = sorted(events, key=lambda e: (e.created_ts, e.event_id))
        seen = set()
        for ev in events:
            if ev.event_id in seen:
                raise DuplicateEventId(f"duplicate event id {ev.event_id!r}")
            seen.add(ev.event_id)
        return cls(
            events=tuple(events),
            feeds=frozenset(e.feed_id for e in events),
            failures=tuple(failures),
            warnings=tuple(warnings),
        )

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def by_id(self) -> dict[str, TiEvent]:
        return {e.event_id: e for e in self.events}

    def categories(self) -> set[str]:
        return {a.category for e in self.events for a in e.attributes}

    def to_json(self) -> str:
        """Stable serialization (used for ordering/round-trip checks)."""
        return json.dumps([event_to_misp(e) for e in self.events], sort_keys=True)


def parse_tag(raw: str) -> Tag:
    """Split ``namespace:predicate=value``.

    >>> parse_tag("misp-galaxy:threat-actor=Sofacy")
    Tag(raw='misp-galaxy:threat-actor=Sofacy', namespace='misp-galaxy', predicate='threat-actor', value='Sofacy')
    >>> parse_tag("tlp:white").value is None
    True
    """
    if raw is None or not raw.strip():
        raise EmptyTag("tag is empty")
    if ":" in raw:
        namespace, rest = raw.split(":", 1)
        if not namespace:
            raise MalformedTag(f"tag {raw!r} has an empty namespace before ':'")
    else:
        namespace, rest = "", raw
    if "=" in rest:
        predicate, value = rest.split("=", 1)
    else:
        predicate, value = rest, None
    if not predicate:
        raise MalformedTag(f"tag {raw!r} has an empty predicate")
    return Tag(raw=raw, namespace=namespace, predicate=predicate, value=value)


def _to_ts(value: Any, what: str) -> int:
    if isinstance(value, bool):
        raise BadTimestamp(f"{what}: not an integer timestamp: {value!r}")
    if isinstance(value, int):
        ts = value
    elif isinstance(value, str) and value.strip().lstrip("-").isdigit():
        ts = int(value.strip())
    else:
        raise BadTimestamp(f"{what}: not an integer timestamp: {value!r}")
    if ts < 0:
        raise BadTimestamp(f"{what}: negative timestamp {ts}")
    return ts


def _date_to_ts(value: Any) -> int:
    try:
        day = datetime.strptime(str(value), "%Y-%m-%d").replace(tzinfo=timezone.utc)
    except ValueError as exc:
        raise BadTimestamp(f"Event.date: bad date {value!r}") from exc
    return int(day.timestamp())


def _require(obj: dict, key: str, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise MalformedEvent(f"missing required field {where}{key}")
    return obj[key]


def parse_event(doc, warnings: Optional[list] = None) -> TiEvent:
    """Parse one MISP event (JSON text, bytes or an already-decoded dict).

    Zero-tag events are accepted; a message is appended to ``warnings`` when
    a list is supplied, and logged either way.
    """
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise MalformedEvent(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedEvent("event document must be a JSON object")
    ev = doc.get("Event", doc)
    if not isinstance(ev, dict):
        raise MalformedEvent("Event must be a JSON object")

    event_id = _require(ev, "uuid", "Event.")
    orgc = _require(ev, "Orgc", "Event.")
    feed_id = _require(orgc, "name", "Event.Orgc.")
    info = _require(ev, "info", "Event.")
    if not isinstance(event_id, str) or not event_id:
        raise MalformedEvent("Event.uuid must be a nonempty string")
    if not isinstance(feed_id, str) or not isinstance(info, str):
        raise MalformedEvent("Event.Orgc.name and Event.info must be strings")

    if "timestamp" in ev:
        created = _to_ts(ev["timestamp"], "Event.timestamp")
    elif "date" in ev:
        created = _date_to_ts(ev["date"])
    else:
        raise MalformedEvent("missing required field Event.timestamp")

    threat_level = ev.get("threat_level_id")
    if threat_level is not None:
        try:
            threat_level = int(threat_level)
        except (TypeError, ValueError) as exc:
            raise MalformedEvent(f"bad threat_level_id {threat_level!r}") from exc
        if not 1 <= threat_level <= 4:
            raise MalformedEvent(f"threat_level_id out of range: {threat_level}")

    raw_tags = ev.get("Tag") or []
    if not isinstance(raw_tags, list):
        raise MalformedEvent("Event.Tag must be a list")
    tags = []
    for t in raw_tags:
        name = _require(t, "name", "Event.Tag[].")
        if not isinstance(name, str):
            raise MalformedEvent("Event.Tag[].name must be a string")
        try:
            tags.append(parse_tag(name))
        except (EmptyTag, MalformedTag) as exc:
            raise MalformedEvent(str(exc)) from exc

    raw_attrs = ev.get("Attribute") or []
    if not isinstance(raw_attrs, list):
        raise MalformedEvent("Event.Attribute must be a list")
    attrs = []
    for i, a in enumerate(raw_attrs):
        where = "Event.Attribute[]."
        value = _require(a, "value", where)
        if not isinstance(value, str) or not value:
            raise MalformedEvent(f"attribute {i}: value must be a nonempty string")
        comment = a.get("comment")
        if comment is not None and not isinstance(comment, str):
            raise MalformedEvent(f"attribute {i}: comment must be a string")
        attrs.append(
            IoC(
                attr_id=str(a.get("uuid", a.get("id", i))),
                category=str(_require(a, "category", where)),
                attr_type=str(_require(a, "type", where)),
                value=value,
                timestamp=_to_ts(_require(a, "timestamp", where), f"attribute {i}"),
                comment=comment or None,
            )
        )

    if not tags:
        msg = f"event {event_id}: no tags"
        logger.warning(msg)
        if warnings is not None:
            warnings.append(msg)

    modified = max([created] + [a.timestamp for a in attrs])
    return TiEvent(
        event_id=event_id,
        feed_id=feed_id,
        info=info,
        created_ts=created,
        modified_ts=modified,
        threat_level=threat_level,
        tags=tuple(tags),
        attributes=tuple(attrs),
    )


def event_to_misp(event: TiEvent) -> dict:
    """Inverse of :func:`parse_event` for the fields this package reads."""
    out = {
        "uuid": event.event_id,
        "Orgc": {"name": event.feed_id},
        "info": event.info,
        "timestamp": str(event.created_ts),
        "Tag": [{"name": t.raw} for t in event.tags],
        "Attribute": [
            {
                "uuid": a.attr_id,
                "category": a.category,
                "type": a.attr_type,
                "value": a.value,
                "timestamp": str(a.timestamp),
                "comment": a.comment or "",
            }
            for a in event.attributes
        ],
    }
    if event.threat_level is not None:
        out["threat_level_id"] = str(event.threat_level)
    return {"Event": out}


def write_corpus(events: Iterable[TiEvent], path) -> None:
    """Write one ``<event_id>.json`` per event into directory ``path``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for ev in events:
        with open(path / f"{ev.event_id}.json", "w", encoding="utf-8") as fh:
            json.dump(event_to_misp(ev), fh, sort_keys=True)


def load_corpus(path, feed_allowlist: Optional[set] = None, strict: bool = False) -> Corpus:
    """Load every ``*.json`` file under directory ``path``.

    Malformed files are collected into ``Corpus.failures`` unless ``strict``,
    in which case the first failure is raised.
    """
    path = Path(path)
    if not path.is_dir():
        raise IoFailure(f"not a directory: {path}")
    try:
        files = sorted(p for p in path.rglob("*.json") if p.is_file())
    except OSError as exc:
        raise IoFailure(str(exc)) from exc

    events, failures, warnings = [], [], []
    for f in files:
        try:
            text = f.read_bytes()
        except OSError as exc:
            raise IoFailure(f"{f}: {exc}") from exc
        try:
            ev = parse_event(text, warnings)
        except MalformedEvent as exc:
            if strict:
                raise MalformedEvent(f"{f}: {exc}") from exc
            failures.append(ParseFailure(os.fspath(f), str(exc)))
            logger.warning("skipping %s: %s", f, exc)
            continue
        if feed_allowlist is not None and ev.feed_id not in feed_allowlist:
            continue
        events.append(ev)
    return Corpus.from_events(events, failures=failures, warnings=warnings)
