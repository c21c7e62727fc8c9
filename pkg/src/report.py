# Standard library imports
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List

# Third-party imports
import numpy as np

# Local imports
from src.look_and_feel import highlight, verdict_colour

CERTIFIED = "certified"
REFUTED = "refuted"
INCONCLUSIVE = "inconclusive"

VERDICTS = (CERTIFIED, REFUTED, INCONCLUSIVE)


def jsonable(value: Any) -> Any:
    """Convert numpy scalars, arrays and complex numbers into plain JSON values."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": jsonable(float(value.real)), "im": jsonable(float(value.imag))}
    if isinstance(value, (float, np.floating)):
        value = float(value)
        # JSON has no NaN or infinity
        return value if math.isfinite(value) else None
    return value


@dataclass
class VerificationReport:
    """Outcome of one executable check: verdict, residuals against their tolerances, and witnesses."""
    check: str
    verdict: str
    residuals: Dict[str, float] = field(default_factory=dict)
    tolerances: Dict[str, float] = field(default_factory=dict)
    witnesses: Dict[str, Any] = field(default_factory=dict)
    parameters: Dict[str, Any] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"Unknown verdict: {self.verdict}")

    @property
    def certified(self) -> bool:
        return self.verdict == CERTIFIED

    def within_tolerance(self) -> bool:
        return all(self.residuals.get(name, math.inf) <= tol for name, tol in self.tolerances.items())

    def to_dict(self) -> Dict[str, Any]:
        return jsonable({
            "check": self.check,
            "verdict": self.verdict,
            "residuals": self.residuals,
            "tolerances": self.tolerances,
            "witnesses": self.witnesses,
            "parameters": self.parameters,
            "notes": self.notes,
        })

    def log_summary(self):
        logging.info(f"{highlight(self.check)}: {verdict_colour(self.verdict)}")
        for note in self.notes:
            logging.info(f"  {note}")
