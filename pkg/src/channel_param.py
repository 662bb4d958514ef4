"""
Channel families and degrading-map parameterization for pdpolar.
Reduces a channel description to the three base fidelity parameters
(amplitude; phase against E; phase against E') that seed polarization.
"""

import os
import sys
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from logger import get_logger

log = get_logger("channel_param")

CLONING_TABLE_PATH = os.getenv(
    "PDPOLAR_CLONING_TABLE",
    os.path.join(os.path.dirname(os.path.abspath(__file__)), "cloning_table.json"),
)

PAULI_SUM_TOLERANCE = 1e-12


class DegradingMapSpec(BaseModel):
    """The map D^{E->E'}: either a complex conjugation or a one-parameter contraction."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["conjugation", "parametric"] = "conjugation"
    delta: float = Field(0.0, ge=0.0, le=1.0)


class ChannelModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    family: Literal["erasure", "pauli", "cloning"]
    epsilon: Optional[float] = None
    pauli: Optional[tuple[float, float, float, float]] = None  # (p_I, p_X, p_Y, p_Z)
    clones: Optional[int] = None
    table: Optional[str] = None
    degrading: DegradingMapSpec = Field(default_factory=DegradingMapSpec)

    @model_validator(mode="after")
    def _check_family_params(self):
        if self.family == "erasure":
            if self.epsilon is None or not 0.0 <= self.epsilon <= 1.0:
                raise ValueError("invalid channel parameters: erasure needs epsilon in [0, 1]")
        elif self.family == "pauli":
            if self.pauli is None:
                raise ValueError("invalid channel parameters: pauli needs (p_I, p_X, p_Y, p_Z)")
            if any(p < 0.0 for p in self.pauli) or abs(sum(self.pauli) - 1.0) > PAULI_SUM_TOLERANCE:
                raise ValueError("invalid channel parameters: pauli probabilities must be nonnegative and sum to 1")
        elif self.family == "cloning":
            if self.clones is None or self.clones < 1:
                raise ValueError("invalid channel parameters: cloning needs clones >= 1")
        return self


@dataclass(frozen=True)
class BasePairs:
    z_amp: float
    z_phase_e: float
    z_phase_eprime: float


def bhattacharyya_bsc(p):
    """Bhattacharyya parameter 2*sqrt(p(1-p)) of a binary symmetric channel."""
    return min(1.0, 2.0 * math.sqrt(p * (1.0 - p)))


def apply_degrading(z_phase_e, spec: DegradingMapSpec):
    """Phase parameter seen against E' = D(E). Conjugation is the identity."""
    if spec.kind == "conjugation":
        return z_phase_e
    return min(1.0, max(0.0, z_phase_e * (1.0 - spec.delta)))


@lru_cache(maxsize=8)
def load_cloning_table(path=CLONING_TABLE_PATH):
    """
    Load a cloning parameter table: {"N": {"z_amp", "z_phase_E", "delta"}}.
    Returns a dict keyed by integer N.
    """
    with open(path, "r") as f:
        raw = json.load(f)

    table = {}
    try:
        for key, entry in raw.items():
            n_clones = int(key)
            if n_clones < 1:
                raise ValueError(f"N={n_clones}")
            values = (float(entry["z_amp"]), float(entry["z_phase_E"]), float(entry["delta"]))
            if not all(0.0 <= v <= 1.0 for v in values):
                raise ValueError(f"N={n_clones} has a value outside [0, 1]")
            table[n_clones] = values
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise ValueError(f"invalid cloning table {path}: {e}") from e

    log.debug(f"Loaded cloning table {path} ({len(table)} entries)")
    return table


def _cloning_entry(model: ChannelModel):
    table = load_cloning_table(model.table or CLONING_TABLE_PATH)
    if model.clones not in table:
        raise ValueError(f"unknown cloning parameter: N={model.clones}")
    return table[model.clones]


def effective_degrading(model: ChannelModel) -> DegradingMapSpec:
    """The degrading map actually applied; a parametric cloner uses its table delta."""
    if model.family == "cloning" and model.degrading.kind == "parametric":
        return DegradingMapSpec(kind="parametric", delta=_cloning_entry(model)[2])
    return model.degrading


def base_params(model: ChannelModel) -> BasePairs:
    """Reduce a channel model to its base amplitude/phase parameters."""
    if model.family == "erasure":
        z_amp = z_phase_e = float(model.epsilon)

    elif model.family == "pauli":
        p_i, p_x, p_y, p_z = model.pauli
        z_amp = bhattacharyya_bsc(p_x + p_y)
        z_phase_e = bhattacharyya_bsc(p_z + p_y)

    else:
        z_amp, z_phase_e, _ = _cloning_entry(model)

    spec = effective_degrading(model)

    return BasePairs(
        z_amp=z_amp,
        z_phase_e=z_phase_e,
        z_phase_eprime=apply_degrading(z_phase_e, spec),
    )


def sub_channel_view(model: ChannelModel):
    """Density-evolution kernel matching the family's sub-channels."""
    return "bsc" if model.family == "pauli" else "erasure"


if __name__ == "__main__":
    if len(sys.argv) < 2:
        print("Usage: python channel_param.py '<channel json>'")
        sys.exit(1)

    pairs = base_params(ChannelModel.model_validate_json(sys.argv[1]))
    print(json.dumps(pairs.__dict__, indent=2))
