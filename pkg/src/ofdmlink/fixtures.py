"""JSON fixture layout for regression tests and golden files.

Complex arrays are stored as nested lists whose innermost element is the
``[re, im]`` pair; bit payloads are hex strings (most significant bit
first, zero-padded to a whole number of bytes).
"""

from __future__ import annotations

import json

import numpy as np

from .channel import ChannelRealization
from .equalization import CpeUpdate
from .estimation import EstimatorState
from .framing import FrameGroundTruth
from .impairments import IqParams, PhaseNoiseTrace

__all__ = [
    "complex_to_json",
    "complex_from_json",
    "bits_to_hex",
    "bits_from_hex",
    "channel_to_dict",
    "channel_from_dict",
    "iq_to_dict",
    "iq_from_dict",
    "trace_to_dict",
    "trace_from_dict",
    "state_to_dict",
    "state_from_dict",
    "cpe_to_dict",
    "cpe_from_dict",
    "truth_to_dict",
    "truth_from_dict",
    "grid_to_dict",
    "grid_from_dict",
    "save",
    "load",
]


def complex_to_json(a: np.ndarray):
    """Nested lists with ``[re, im]`` leaves."""
    a = np.asarray(a, dtype=np.complex128)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def complex_from_json(obj) -> np.ndarray:
    a = np.asarray(obj, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def bits_to_hex(bits: np.ndarray) -> str:
    flat = np.asarray(bits, dtype=np.int64).reshape(-1)
    pad = (-flat.size) % 8
    padded = np.concatenate([flat, np.zeros(pad, dtype=np.int64)])
    return bytes(np.packbits(padded.astype(np.uint8))).hex()


def bits_from_hex(text: str, n_bits: int) -> np.ndarray:
    raw = np.unpackbits(np.frombuffer(bytes.fromhex(text), dtype=np.uint8))
    return raw[:n_bits].astype(np.int64)


def channel_to_dict(ch: ChannelRealization) -> dict:
    return {
        "kind": "channel",
        "n_fft": ch.n_fft,
        "pdp": ch.pdp.tolist(),
        "taps": complex_to_json(ch.taps),
    }


def channel_from_dict(d: dict) -> ChannelRealization:
    return ChannelRealization(
        taps=complex_from_json(d["taps"]),
        pdp=np.asarray(d["pdp"], dtype=float),
        n_fft=int(d["n_fft"]),
    )


def iq_to_dict(iq: IqParams) -> dict:
    return {"kind": "iq", "eps": iq.eps.tolist(), "theta": iq.theta.tolist()}


def iq_from_dict(d: dict) -> IqParams:
    return IqParams(eps=np.asarray(d["eps"]), theta=np.asarray(d["theta"]))


def trace_to_dict(tr: PhaseNoiseTrace) -> dict:
    return {"kind": "trace", "beta_hz": tr.beta, "ts": tr.ts, "phi": tr.phi.tolist()}


def trace_from_dict(d: dict) -> PhaseNoiseTrace:
    return PhaseNoiseTrace(
        phi=np.asarray(d["phi"], dtype=float), beta=float(d["beta_hz"]), ts=float(d["ts"])
    )


def state_to_dict(state: EstimatorState) -> dict:
    d = {
        "kind": "state",
        "h_pre": complex_to_json(state.h_pre),
        "k1": complex_to_json(state.k1),
        "psi": complex_to_json(state.psi),
    }
    if state.eps_hat is not None:
        d["eps_hat"] = state.eps_hat.tolist()
        d["theta_hat"] = state.theta_hat.tolist()
    return d


def state_from_dict(d: dict) -> EstimatorState:
    return EstimatorState(
        h_pre=complex_from_json(d["h_pre"]),
        k1=complex_from_json(d["k1"]),
        psi=complex_from_json(d["psi"]),
        eps_hat=np.asarray(d["eps_hat"]) if "eps_hat" in d else None,
        theta_hat=np.asarray(d["theta_hat"]) if "theta_hat" in d else None,
    )


def cpe_to_dict(cpe: CpeUpdate) -> dict:
    return {"kind": "cpe", "upsilon": complex_to_json(cpe.upsilon), "flagged": cpe.flagged}


def cpe_from_dict(d: dict) -> CpeUpdate:
    return CpeUpdate(upsilon=complex_from_json(d["upsilon"]), flagged=bool(d["flagged"]))


def truth_to_dict(truth: FrameGroundTruth) -> dict:
    return {
        "kind": "frame-truth",
        "bits_hex": bits_to_hex(truth.bits),
        "bits_shape": list(truth.bits.shape),
        "data_symbols": complex_to_json(truth.data_symbols),
        "pilots": complex_to_json(truth.pilots),
        "grids": None if truth.grids is None else complex_to_json(truth.grids),
    }


def truth_from_dict(d: dict) -> FrameGroundTruth:
    shape = tuple(d["bits_shape"])
    n_bits = int(np.prod(shape))
    return FrameGroundTruth(
        bits=bits_from_hex(d["bits_hex"], n_bits).reshape(shape),
        data_symbols=complex_from_json(d["data_symbols"]),
        pilots=complex_from_json(d["pilots"]),
        grids=None if d.get("grids") is None else complex_from_json(d["grids"]),
    )


def grid_to_dict(grid: np.ndarray) -> dict:
    """Received or transmitted frequency grids of any shape."""
    return {"kind": "grid", "data": complex_to_json(grid)}


def grid_from_dict(d: dict) -> np.ndarray:
    return complex_from_json(d["data"])


def save(obj: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)


def load(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
