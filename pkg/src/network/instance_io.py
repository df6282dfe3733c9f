"""
Instance file format.

Line-oriented text: a header with N_d, N_b, seed and the physical parameters, one line
per entity (kind, id, x, y), then the channel-gain rows. Floats are written with repr()
so reading a file back reproduces the instance bit-exactly.
"""

from pathlib import Path
from typing import Dict, List, Union

import numpy as np

from .system_model import NetworkInstance, SystemParams

FORMAT_HEADER = "# relay-instance v1"


class InstanceFormatError(ValueError):
    """Raised when an instance file cannot be parsed."""


def _fmt(value: float) -> str:
    return repr(float(value))


def dumps_instance(instance: NetworkInstance) -> str:
    """Serialize an instance to text."""
    lines = [FORMAT_HEADER]
    seed = "none" if instance.seed is None else str(instance.seed)
    lines.append(f"header {instance.n_devices} {instance.n_beacons} {seed}")
    params = " ".join(f"{k}={_fmt(v)}" for k, v in instance.params.to_dict().items())
    lines.append(f"params {params}")

    lines.append(f"sink 0 {_fmt(instance.sink_position[0])} {_fmt(instance.sink_position[1])}")
    for i, (x, y) in enumerate(instance.device_positions):
        lines.append(f"device {i} {_fmt(x)} {_fmt(y)}")
    for i, (x, y) in enumerate(instance.beacon_positions):
        lines.append(f"beacon {i} {_fmt(x)} {_fmt(y)}")

    for i, row in enumerate(instance.link_fading):
        lines.append(f"link {i} " + " ".join(_fmt(v) for v in row))
    for i, row in enumerate(instance.beacon_fading):
        lines.append(f"harvest {i} " + " ".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def loads_instance(text: str) -> NetworkInstance:
    """Parse text produced by dumps_instance."""
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines or lines[0] != FORMAT_HEADER:
        raise InstanceFormatError("Missing instance format header")

    records: Dict[str, List[List[str]]] = {}
    for line in lines[1:]:
        kind, *rest = line.split()
        records.setdefault(kind, []).append(rest)

    try:
        (n_devices, n_beacons, seed), = records['header']
        n_devices, n_beacons = int(n_devices), int(n_beacons)
        seed = None if seed == "none" else int(seed)

        params = dict(item.split("=", 1) for item in records['params'][0])
        params = SystemParams.from_dict({k: float(v) for k, v in params.items()})

        def rows(kind: str, width: int, count: int) -> np.ndarray:
            entries = sorted(records.get(kind, []), key=lambda r: int(r[0]))
            if len(entries) != count or any(len(r) != width + 1 for r in entries):
                raise InstanceFormatError(f"Expected {count} '{kind}' lines of width {width}")
            return np.array([[float(v) for v in r[1:]] for r in entries]).reshape(count, width)

        sink = rows('sink', 2, 1)[0]
        devices = rows('device', 2, n_devices)
        beacons = rows('beacon', 2, n_beacons)
        link_fading = rows('link', n_devices + 1, n_devices)
        beacon_fading = rows('harvest', n_devices, n_beacons)
    except (KeyError, ValueError, IndexError) as e:
        if isinstance(e, InstanceFormatError):
            raise
        raise InstanceFormatError(f"Malformed instance file: {e}") from e

    return NetworkInstance(
        n_devices=n_devices,
        n_beacons=n_beacons,
        device_positions=devices,
        beacon_positions=beacons,
        link_fading=link_fading,
        beacon_fading=beacon_fading,
        params=params,
        seed=seed,
        sink_position=sink,
    )


def write_instance(instance: NetworkInstance, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_instance(instance))
    return path


def read_instance(path: Union[str, Path]) -> NetworkInstance:
    return loads_instance(Path(path).read_text())
