"""Simulated world state and scripted external events.

The world is a set of named places on a 2D plane; travel time is
straight-line distance at a fixed speed. External happenings (wake words,
spoken replies, people appearing or leaving) come from an event script
with virtual timestamps, which is what makes every run deterministic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..dsl import WorldCatalog

WORLD_VERSION = "world/v1"
EVENTS_VERSION = "events/v1"


class WorldError(ValueError):
    pass


class UnknownPlaceError(KeyError):
    def __init__(self, place: str):
        self.place = place
        super().__init__(f"unknown place {place!r}")


@dataclass
class Place:
    name: str
    x: float
    y: float
    person: bool = False


IN_TRANSIT = "in-transit"


@dataclass
class WorldModel:
    places: dict[str, Place]
    speed: float = 1.0  # meters per virtual second
    robot_position: str = ""

    def __post_init__(self) -> None:
        if self.speed <= 0:
            raise WorldError("speed must be positive")
        coords = {}
        for place in self.places.values():
            key = (place.x, place.y)
            if key in coords:
                raise WorldError(
                    f"places {coords[key]!r} and {place.name!r} share coordinates; "
                    "travel time between distinct places must be positive"
                )
            coords[key] = place.name
        if self.robot_position and self.robot_position != IN_TRANSIT:
            self.resolve(self.robot_position)

    @classmethod
    def from_dict(cls, doc: dict) -> "WorldModel":
        if doc.get("version") != WORLD_VERSION:
            raise WorldError(f"unsupported world version {doc.get('version')!r}")
        places = {
            p["name"]: Place(
                name=p["name"], x=float(p["x"]), y=float(p["y"]),
                person=bool(p.get("person", False)),
            )
            for p in doc["places"]
        }
        if not places:
            raise WorldError("world has no places")
        start = doc.get("start") or next(iter(places))
        return cls(places=places, speed=float(doc.get("speed", 1.0)), robot_position=start)

    @classmethod
    def from_file(cls, path: str | Path) -> "WorldModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def resolve(self, name: str) -> Place:
        folded = name.casefold().strip()
        for place in self.places.values():
            if place.name.casefold() == folded:
                return place
        raise UnknownPlaceError(name)

    def catalog(self) -> WorldCatalog:
        return WorldCatalog.of(self.places.keys())

    def travel_time(self, origin: str, destination: str) -> float:
        a, b = self.resolve(origin), self.resolve(destination)
        return math.dist((a.x, a.y), (b.x, b.y)) / self.speed

    def persons_present(self, place: str) -> bool:
        return self.resolve(place).person

    def set_person(self, place: str, present: bool) -> None:
        self.resolve(place).person = present

    def copy(self) -> "WorldModel":
        places = {n: Place(p.name, p.x, p.y, p.person) for n, p in self.places.items()}
        return WorldModel(places=places, speed=self.speed, robot_position=self.robot_position)


WAKE_WORD = "wakeWord"
SPOKEN_REPLY = "spokenReply"
PERSON_CHANGE = "personChange"


@dataclass
class ScriptEvent:
    t: float
    kind: str  # wakeWord | spokenReply | personChange
    word: str = ""
    text: str = ""
    place: str = ""
    present: bool = False
    consumed: bool = field(default=False, compare=False)


@dataclass
class EventScript:
    events: list[ScriptEvent] = field(default_factory=list)

    def __post_init__(self) -> None:
        last = -math.inf
        for event in self.events:
            if event.t < last:
                raise WorldError("event timestamps must be non-decreasing")
            last = event.t

    @classmethod
    def from_dict(cls, doc: dict) -> "EventScript":
        if doc.get("version") != EVENTS_VERSION:
            raise WorldError(f"unsupported events version {doc.get('version')!r}")
        events = []
        for raw in doc.get("events", []):
            kind = raw["kind"]
            if kind not in (WAKE_WORD, SPOKEN_REPLY, PERSON_CHANGE):
                raise WorldError(f"unknown event kind {kind!r}")
            events.append(
                ScriptEvent(
                    t=float(raw["t"]),
                    kind=kind,
                    word=raw.get("word", ""),
                    text=raw.get("text", ""),
                    place=raw.get("place", ""),
                    present=bool(raw.get("present", False)),
                )
            )
        return cls(events=events)

    @classmethod
    def from_file(cls, path: str | Path) -> "EventScript":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    @classmethod
    def empty(cls) -> "EventScript":
        return cls(events=[])

    def copy(self) -> "EventScript":
        return EventScript(
            events=[
                ScriptEvent(e.t, e.kind, e.word, e.text, e.place, e.present)
                for e in self.events
            ]
        )
