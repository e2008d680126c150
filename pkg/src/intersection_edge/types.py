"""Small value types shared by several modules."""

from __future__ import annotations

import enum


class ObjClass(enum.IntEnum):
    """Object class; the integer values are the radar wire codes."""

    PEDESTRIAN = 0
    VEHICLE = 1
    BICYCLE = 2
    OTHER = 3

    @classmethod
    def parse(cls, value) -> "ObjClass":
        if isinstance(value, ObjClass):
            return value
        if isinstance(value, str):
            if value.isdigit():
                return cls(int(value))
            return cls[value.upper()]
        return cls(int(value))

    @property
    def label(self) -> str:
        return self.name.lower()


TRACKED_CLASSES = (ObjClass.PEDESTRIAN, ObjClass.VEHICLE, ObjClass.BICYCLE)
