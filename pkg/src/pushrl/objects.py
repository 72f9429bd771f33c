"""Object library: named slider shapes with friction parameters.

The shipped library lives in ``data/objects.json``; external files with the
same schema can be loaded for custom objects. Schema per object name::

    {"vertices": [[x, y], ...], "mu_contact": float, "c_ls": float,
     "cof_offset": [x, y]}

Vertices are meters in the body frame, CCW, centroid at the origin.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from .geometry import ConvexShape
from .physics import SliderParams


@dataclass(frozen=True)
class ObjectSpec:
    shape: ConvexShape
    slider: SliderParams

    def with_cof_offset(self, offset: tuple[float, float]) -> "ObjectSpec":
        slider = replace(self.slider, cof_offset=(float(offset[0]), float(offset[1])))
        slider.validate_for_shape(self.shape)
        return ObjectSpec(self.shape, slider)


def load_object_library(path: str | Path | None = None) -> dict[str, ObjectSpec]:
    """Load an object library; the shipped one when no path is given."""
    if path is None:
        text = resources.files("pushrl.data").joinpath("objects.json").read_text()
        source = "builtin library"
    else:
        text = Path(path).read_text()
        source = str(path)
    raw = json.loads(text)
    library: dict[str, ObjectSpec] = {}
    for name, entry in raw.items():
        try:
            shape = ConvexShape(entry["vertices"], name=name)
            slider = SliderParams(
                mu_contact=entry["mu_contact"],
                c_ls=entry["c_ls"],
                cof_offset=tuple(entry.get("cof_offset", (0.0, 0.0))),
            )
            slider.validate_for_shape(shape)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{source}: invalid object {name!r}: {exc}") from exc
        library[name] = ObjectSpec(shape=shape, slider=slider)
    return library


def get_object(name: str, library: dict[str, ObjectSpec] | None = None) -> ObjectSpec:
    if library is None:
        library = load_object_library()
    if name not in library:
        known = ", ".join(sorted(library))
        raise KeyError(f"unknown object {name!r}; known objects: {known}")
    return library[name]
