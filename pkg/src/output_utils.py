# Standard library imports
import hashlib
import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

# Third-party imports
import numpy as np
import pandas as pd

# Local imports
from src.look_and_feel import success
from src.principles import SingularField
from src.report import VerificationReport, jsonable
from src.spectral import PseudospectraField

TOOL_VERSION = "1.0.0"


def atomic_write(path: str, writer: Callable[[Any], None]):
    """Write through a temporary file in the target directory and rename it into place on success."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".svfield-", suffix=".tmp")
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as f:
            writer(f)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    logging.info(success(f"Wrote {path}"))


def write_frame(df: pd.DataFrame, path: str):
    # empty field for NaN; floats in shortest round-trip form
    atomic_write(path, lambda f: df.to_csv(f, index=False, na_rep='', lineterminator='\n'))


def dumps_json(payload: Any) -> str:
    return json.dumps(jsonable(payload), indent=2) + "\n"


def write_json(payload: Any, path: str):
    text = dumps_json(payload)
    atomic_write(path, lambda f: f.write(text))


def _coordinates(points: np.ndarray) -> Dict[str, np.ndarray]:
    return {"re": points.real.astype(float), "im": points.imag.astype(float)}


def field_frame(field: SingularField, ks: Optional[List[int]] = None) -> pd.DataFrame:
    """re, im, s1..sn (or the selected s_k), flag in canonical grid order."""
    ks = ks or list(range(1, field.n + 1))
    columns = _coordinates(field.points)
    for k in ks:
        columns[f"s{k}"] = field.column(k)
    columns["flag"] = field.flags.astype(int)
    return pd.DataFrame(columns)


def explore_frame(field: SingularField) -> pd.DataFrame:
    """The full field plus Frobenius norm, |det| as the product of singular values, and s1/s_n."""
    df = field_frame(field).drop(columns="flag")
    df["frobenius"] = field.frobenius()
    df["abs_det"] = np.prod(field.values, axis=1)
    with np.errstate(divide='ignore', invalid='ignore'):
        df["condition"] = field.values[:, 0] / field.values[:, -1]
    df["flag"] = field.flags.astype(int)
    return df


def pseudospectra_frame(pseudo: PseudospectraField) -> pd.DataFrame:
    columns = _coordinates(pseudo.points)
    columns["smin"] = pseudo.values
    columns["resolvent_norm"] = pseudo.resolvent_norm
    columns["flag"] = pseudo.flags.astype(int)
    return pd.DataFrame(columns)


def scenario_hash(text: str) -> str:
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


@dataclass
class RunManifest:
    """Everything needed to reproduce a run byte for byte."""
    scenario_sha256: str
    command: str
    flags: Dict[str, Any]
    seed: int
    tool_version: str = TOOL_VERSION
    checks: List[Dict[str, Any]] = field(default_factory=list)

    def add_report(self, report: VerificationReport):
        self.checks.append({"check": report.check, "verdict": report.verdict,
                            "residuals": report.residuals})

    def to_dict(self) -> Dict[str, Any]:
        return jsonable({
            "scenario_sha256": self.scenario_sha256,
            "command": self.command,
            "flags": self.flags,
            "tool_version": self.tool_version,
            "seed": self.seed,
            "checks": self.checks,
        })

    def write(self, path: str):
        write_json(self.to_dict(), path)
