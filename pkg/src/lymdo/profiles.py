"""Layer-level DNN profiles: MACs, parameter memory and feature-map sizes.

A profile holds ``L + 1`` layers. Layer 0 is a virtual input layer whose only
non-zero field is ``out_feature_bytes`` (the raw input tensor). A cut index
``l`` in ``0..L`` means layers ``0..l`` run on the UE and ``l+1..L`` on the
edge server after ``layers[l].out_feature_bytes`` are uploaded.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


class ProfileError(ValueError):
    """Malformed or invalid profile data; ``layer`` is the offending index if known."""

    def __init__(self, message: str, layer: int | None = None):
        if layer is not None:
            message = f"layer {layer}: {message}"
        super().__init__(message)
        self.layer = layer


@dataclass(frozen=True)
class LayerProfile:
    macs: int
    param_bytes: int
    out_feature_bytes: int


@dataclass(frozen=True)
class DnnProfile:
    name: str
    layers: tuple[LayerProfile, ...] = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if len(self.layers) < 2:
            raise ProfileError("profile needs the input layer plus at least one layer")
        for i, layer in enumerate(self.layers):
            for fname in ("macs", "param_bytes", "out_feature_bytes"):
                value = getattr(layer, fname)
                if value < 0:
                    raise ProfileError(f"{fname} must be >= 0, got {value}", i)
            if i > 0 and layer.macs == 0:
                raise ProfileError("only the virtual input layer may have zero MACs", i)
        first = self.layers[0]
        if first.macs != 0 or first.param_bytes != 0:
            raise ProfileError("layer 0 must be the virtual input layer (macs = param_bytes = 0)", 0)

    @property
    def layer_count(self) -> int:
        """``L``: number of real layers (cut indices run over ``0..L``)."""
        return len(self.layers) - 1

    @cached_property
    def _cum_macs(self) -> np.ndarray:
        return np.cumsum([layer.macs for layer in self.layers], dtype=np.int64)

    @cached_property
    def _cum_params(self) -> np.ndarray:
        return np.cumsum([layer.param_bytes for layer in self.layers], dtype=np.int64)

    @cached_property
    def _features(self) -> np.ndarray:
        return np.array([layer.out_feature_bytes for layer in self.layers], dtype=np.int64)

    @property
    def total_macs(self) -> int:
        return int(self._cum_macs[-1])

    @property
    def total_param_bytes(self) -> int:
        return int(self._cum_params[-1])

    def check_cut(self, cut: int) -> int:
        if not 0 <= cut <= self.layer_count:
            raise ValueError(f"cut {cut} outside 0..{self.layer_count} for {self.name}")
        return int(cut)

    def local_params(self, cut: int) -> int:
        return int(self._cum_params[self.check_cut(cut)])

    def edge_params(self, cut: int) -> int:
        return self.total_param_bytes - self.local_params(cut)

    def payload(self, cut: int) -> int:
        """Bytes uploaded for ``cut``; zero when the whole model runs locally."""
        if self.check_cut(cut) == self.layer_count:
            return 0
        return int(self._features[cut])

    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "name": self.name,
            "layers": [
                {"macs": l.macs, "param_bytes": l.param_bytes, "out_feature_bytes": l.out_feature_bytes}
                for l in self.layers
            ],
        }


def local_macs(p: DnnProfile, cut: int) -> int:
    """MACs of layers ``0..cut``."""
    return int(p._cum_macs[p.check_cut(cut)])


def edge_macs(p: DnnProfile, cut: int) -> int:
    return p.total_macs - local_macs(p, cut)


def peak_activation(p: DnnProfile, start: int, stop: int) -> int:
    """Largest output feature map over layers ``start..stop`` inclusive.

    ``start == stop + 1`` is the empty range and yields 0.
    """
    if start == stop + 1 and 0 <= stop <= p.layer_count:
        return 0
    if not 0 <= start <= stop <= p.layer_count:
        raise ValueError(f"invalid layer range {start}..{stop} for {p.name}")
    return int(p._features[start : stop + 1].max())


def profile_from_dict(data: dict) -> DnnProfile:
    if not isinstance(data, dict):
        raise ProfileError("profile must be a JSON object")
    version = data.get("version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ProfileError(f"unsupported profile version {version!r}")
    name = data.get("name")
    if not isinstance(name, str) or not name:
        raise ProfileError("missing profile name")
    raw = data.get("layers")
    if not isinstance(raw, list) or not raw:
        raise ProfileError("missing layer list (layer 0 absent)", 0)
    layers = []
    for i, entry in enumerate(raw):
        try:
            values = [entry[k] for k in ("macs", "param_bytes", "out_feature_bytes")]
        except (KeyError, TypeError) as exc:
            raise ProfileError(f"missing field {exc}", i) from None
        for v in values:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or v != int(v):
                raise ProfileError(f"expected integer values, got {v!r}", i)
        layers.append(LayerProfile(*(int(v) for v in values)))
    return DnnProfile(name, tuple(layers))


def load_profile(path: str | Path) -> DnnProfile:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ProfileError(f"{path}: invalid JSON ({exc})") from exc
    return profile_from_dict(data)


def save_profile(p: DnnProfile, path: str | Path) -> None:
    Path(path).write_text(json.dumps(p.to_dict(), indent=2) + "\n")


def bundled_profile(name: str) -> DnnProfile:
    """One of the profiles shipped in ``lymdo/data`` (``alexnet``, ``resnet18``)."""
    ref = resources.files("lymdo") / "data" / f"{name}.json"
    if not ref.is_file():
        raise ProfileError(f"no bundled profile named {name!r}")
    return profile_from_dict(json.loads(ref.read_text()))
