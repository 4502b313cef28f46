import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field

import numpy as np

import config

logger = logging.getLogger(__name__)


@dataclass
class RunManifest:
    """
    Everything that determines a CLI invocation's outputs.

    Args:
        command (str): Subcommand name.
        scenarios (list): Scenario file paths.
        out_dir (str): Output directory; recorded but left out of the hash.
        options (dict): Remaining subcommand options.
        seeds (list): RNG seeds of every run.
    """
    command: str
    scenarios: list
    out_dir: str
    options: dict = field(default_factory=dict)
    seeds: list = field(default_factory=list)
    tool_version: str = config.TOOL_VERSION

    def digest(self) -> str:
        hashed = asdict(self)
        hashed.pop("out_dir")
        return sha256_text(json.dumps(hashed, sort_keys=True, default=str))


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path: str) -> str:
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


def write_table_csv(path: str, columns, rows, manifest_hash: str | None = None) -> str:
    """Writes a numeric table with a one-line column header, preceded by the manifest hash."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    header = ",".join(columns)
    if manifest_hash is not None:
        header = f"# manifest {manifest_hash}\n{header}"
    data = np.asarray(rows, dtype=float).reshape(-1, len(columns))
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.10g")
    logger.info(f"[Output] ✅ Wrote {data.shape[0]} rows to {path}")
    return path


def write_trace_csv(trace, path: str, manifest_hash: str | None = None) -> str:
    return write_table_csv(path, trace.columns, trace.data, manifest_hash)


def write_text_csv(path: str, rows, manifest_hash: str | None = None) -> str:
    """Writes mixed text/number rows, used for the comparison tables."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        if manifest_hash is not None:
            f.write(f"# manifest {manifest_hash}\n")
        for row in rows:
            f.write(",".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row) + "\n")
    return path


def write_json(path: str, payload: dict, manifest_hash: str | None = None) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    body = dict(payload)
    if manifest_hash is not None:
        body["manifest_hash"] = manifest_hash
    body.setdefault("schema_version", config.SUMMARY_SCHEMA_VERSION)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(body, f, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")
    logger.info(f"[Output] ✅ Wrote {path}")
    return path


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"cannot serialise {type(value).__name__}")
