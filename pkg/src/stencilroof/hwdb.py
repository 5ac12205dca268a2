"""Hardware profiles: bandwidth plus per-datatype peak throughputs.

Profiles load from a small TOML schema (see ``EXAMPLE_PROFILE_TOML``) and
are validated strictly: unknown keys are rejected by name so typos cannot
silently zero out a peak.  Rates are stored in base units (bytes/sec,
flops/sec); human-edited files may use suffixed forms such as
"19.5 TFLOPS" or "1935 GB/s" with decimal multipliers.
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .roofline import DTYPES

SCHEMA_VERSION = 1

EXAMPLE_PROFILE_TOML = """\
schema_version = 1

[[profiles]]
name = "example-gpu"
bandwidth = "1000 GB/s"

[profiles.dtypes.double]
cuda = "10 TFLOPS"
tc_dense = "20 TFLOPS"

[profiles.dtypes.float]
cuda = "20 TFLOPS"
tc_dense = "160 TFLOPS"
tc_sparse = "320 TFLOPS"
"""


class ProfileError(ValueError):
    """Schema violation or parse failure in a profile file."""


@dataclass(frozen=True)
class UnitPeaks:
    """Peak flops/sec of each execution unit for one datatype."""

    cuda: float
    tc_dense: float
    tc_sparse: Optional[float] = None


@dataclass(frozen=True)
class HardwareProfile:
    name: str
    bandwidth: float  # bytes/sec
    dtypes: dict = field(repr=False)  # dtype name -> UnitPeaks


@dataclass
class ProfileFile:
    schema_version: int
    profiles: dict  # name -> HardwareProfile


@dataclass(frozen=True)
class RidgePoints:
    cuda: float
    tc_dense: float
    tc_sparse: Optional[float] = None

    def rounded(self) -> dict:
        out = {"cuda": round(self.cuda), "tc_dense": round(self.tc_dense)}
        if self.tc_sparse is not None:
            out["tc_sparse"] = round(self.tc_sparse)
        return out


_RATE_RE = re.compile(
    r"^\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*([kKmMgGtTpP]?)\s*(FLOPS|B/s)\s*$"
)
_MULTIPLIERS = {"": 1.0, "k": 1e3, "m": 1e6, "g": 1e9, "t": 1e12, "p": 1e15}


def parse_rate(value) -> float:
    """Parse "19.5 TFLOPS" / "1935 GB/s" / plain numbers into base units."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, str):
        raise ProfileError(f"rate must be a number or suffixed string, got {value!r}")
    m = _RATE_RE.match(value)
    if not m:
        raise ProfileError(
            f"cannot parse rate {value!r}; expected forms like '19.5 TFLOPS' or '1935 GB/s'"
        )
    number, prefix, _unit = m.groups()
    return float(number) * _MULTIPLIERS[prefix.lower()]


def _reject_unknown(mapping: dict, allowed: set, context: str) -> None:
    for key in mapping:
        if key not in allowed:
            raise ProfileError(f"unknown key {key!r} in {context} (allowed: {sorted(allowed)})")


def _build_profile(raw: dict, index: int) -> HardwareProfile:
    context = f"profile #{index + 1}"
    _reject_unknown(raw, {"name", "bandwidth", "dtypes"}, context)
    name = raw.get("name")
    if not name or not isinstance(name, str):
        raise ProfileError(f"{context}: missing or invalid 'name'")
    context = f"profile {name!r}"
    if "bandwidth" not in raw:
        raise ProfileError(f"{context}: missing 'bandwidth'")
    bandwidth = parse_rate(raw["bandwidth"])
    if bandwidth <= 0:
        raise ProfileError(f"{context}: bandwidth must be positive, got {bandwidth}")
    dtypes = {}
    for dtype_name, peaks_raw in raw.get("dtypes", {}).items():
        dcontext = f"{context}, dtype {dtype_name!r}"
        if dtype_name not in DTYPES:
            raise ProfileError(f"{dcontext}: unknown datatype (allowed: {sorted(DTYPES)})")
        _reject_unknown(peaks_raw, {"cuda", "tc_dense", "tc_sparse"}, dcontext)
        for required in ("cuda", "tc_dense"):
            if required not in peaks_raw:
                raise ProfileError(f"{dcontext}: missing required peak {required!r}")
        cuda = parse_rate(peaks_raw["cuda"])
        tc_dense = parse_rate(peaks_raw["tc_dense"])
        tc_sparse = parse_rate(peaks_raw["tc_sparse"]) if "tc_sparse" in peaks_raw else None
        for label, rate in (("cuda", cuda), ("tc_dense", tc_dense), ("tc_sparse", tc_sparse)):
            if rate is not None and rate <= 0:
                raise ProfileError(f"{dcontext}: {label} peak must be positive, got {rate}")
        if tc_sparse is not None and tc_sparse < tc_dense:
            raise ProfileError(
                f"{dcontext}: tc_sparse ({tc_sparse}) must be >= tc_dense ({tc_dense})"
            )
        dtypes[dtype_name] = UnitPeaks(cuda=cuda, tc_dense=tc_dense, tc_sparse=tc_sparse)
    return HardwareProfile(name=name, bandwidth=bandwidth, dtypes=dtypes)


def load_profiles(path) -> ProfileFile:
    """Load and validate a profile file.

    Raises ProfileError with the offending key or position on any schema
    violation, parse failure, or duplicate profile name.
    """
    with open(path, "rb") as fh:
        try:
            raw = _toml.load(fh)
        except _toml.TOMLDecodeError as exc:
            raise ProfileError(f"{path}: {exc}") from exc
    _reject_unknown(raw, {"schema_version", "profiles"}, f"{path}")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ProfileError(
            f"{path}: schema_version must be {SCHEMA_VERSION}, got {version!r}"
        )
    profiles = {}
    for i, entry in enumerate(raw.get("profiles", [])):
        profile = _build_profile(entry, i)
        if profile.name in profiles:
            raise ProfileError(f"{path}: duplicate profile name {profile.name!r}")
        profiles[profile.name] = profile
    return ProfileFile(schema_version=version, profiles=profiles)


def serialize_profiles(pf: ProfileFile) -> str:
    """Emit the canonical TOML form; load(serialize(x)) == x semantically."""
    lines = [f"schema_version = {pf.schema_version}", ""]
    for profile in pf.profiles.values():
        lines.append("[[profiles]]")
        lines.append(f'name = "{profile.name}"')
        lines.append(f"bandwidth = {profile.bandwidth!r}")
        for dtype_name, peaks in profile.dtypes.items():
            lines.append("")
            lines.append(f"[profiles.dtypes.{dtype_name}]")
            lines.append(f"cuda = {peaks.cuda!r}")
            lines.append(f"tc_dense = {peaks.tc_dense!r}")
            if peaks.tc_sparse is not None:
                lines.append(f"tc_sparse = {peaks.tc_sparse!r}")
        lines.append("")
    return "\n".join(lines)


# Built-in A100-80GB-PCIe profile.  The fp64 CUDA peak (9.7 TFLOPS) and fp64
# matrix-unit peak (19.5 TFLOPS) are vendor specifications; fp32 dense/sparse
# matrix-unit peaks are the TF32-path 156/312 TFLOPS.  The fp32 CUDA peak is
# the FMA-rated 19.5 TFLOPS implied by this device's published ridge point of
# 10 flops/byte.  The bandwidth 1.935e12 B/s is back-solved so that
# peak/bandwidth reproduces all four published integer ridge points
# (5, 10, 81, 161); override it in a profile file if your part differs.
A100_NAME = "a100-80gb-pcie"

_BUILTIN = {
    A100_NAME: HardwareProfile(
        name=A100_NAME,
        bandwidth=1.935e12,
        dtypes={
            "double": UnitPeaks(cuda=9.7e12, tc_dense=19.5e12),
            "float": UnitPeaks(cuda=19.5e12, tc_dense=156e12, tc_sparse=312e12),
        },
    )
}


def builtin_profiles() -> ProfileFile:
    return ProfileFile(schema_version=SCHEMA_VERSION, profiles=dict(_BUILTIN))


def get_profile(name: str, profiles_file=None) -> HardwareProfile:
    """Look up a profile by name, file entries shadowing built-ins."""
    registry = dict(_BUILTIN)
    if profiles_file is not None:
        registry.update(load_profiles(profiles_file).profiles)
    if name not in registry:
        raise ProfileError(
            f"unknown hardware profile {name!r} (available: {sorted(registry)})"
        )
    return registry[name]


def ridge_points(profile: HardwareProfile, dtype_name: str) -> RidgePoints:
    """Ridge point peak/bandwidth for each unit of one datatype."""
    if dtype_name not in profile.dtypes:
        raise ProfileError(
            f"profile {profile.name!r} has no datatype {dtype_name!r} "
            f"(available: {sorted(profile.dtypes)})"
        )
    peaks = profile.dtypes[dtype_name]
    return RidgePoints(
        cuda=peaks.cuda / profile.bandwidth,
        tc_dense=peaks.tc_dense / profile.bandwidth,
        tc_sparse=None if peaks.tc_sparse is None else peaks.tc_sparse / profile.bandwidth,
    )
