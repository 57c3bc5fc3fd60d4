"""Per-symbol common-phase tracking and joint mirror-pair data detection.

Tracking: the common phase of each receive branch drifts from symbol to
symbol, so every data symbol updates a per-branch complex factor (the
ratio of the current common phase to the preamble-time one) from the
pilot bins.  Writing that factor as ``a + jb`` turns the pilot
observation stacked with its mirror conjugate into a linear model with a
2x2 complex matrix per pilot; the normal equations are regularized by the
measured noise-plus-interference power and the per-pilot solutions are
averaged.

Detection: each pair of mirror bins ``{k, -k}`` is detected jointly.
Stacking the received vector with its mirror conjugate gives
``x_stack = W(k) s_stack`` where ``W`` has the 2x2 block structure of the
IQ mixing applied to the tracked channel, solved by ZF or MMSE.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .estimation import EstimatorState
from .framing import SubcarrierMap, qam16_demap
from .numerics import (
    CONDITION_LIMIT,
    ConfigurationError,
    SingularMatrixError,
    condition_number,
    logical_to_bin,
    solve_regularized,
)

__all__ = [
    "CpeUpdate",
    "EqualizerOptions",
    "SymbolDecision",
    "FrameDecisions",
    "track_cpe",
    "build_w",
    "detect",
    "mmse_r_matrix",
    "equalize_symbol",
    "equalize_frame",
]

UPSILON_CEILING = 4.0


@dataclass(frozen=True)
class CpeUpdate:
    """Diagonal common-phase update for one data symbol."""

    upsilon: np.ndarray  # (m_r,) complex
    flagged: bool = False

    @classmethod
    def identity(cls, m_r: int) -> "CpeUpdate":
        return cls(upsilon=np.ones(m_r, dtype=np.complex128))


@dataclass(frozen=True)
class EqualizerOptions:
    detector: str = "zf"            # "zf" | "mmse"
    track: bool = True
    tracking_variant: str = "re-derived"  # "re-derived" | "as-printed"
    mmse_r: str = "sigma"           # "sigma" | "kron"
    upsilon_ceiling: float = UPSILON_CEILING

    def __post_init__(self):
        if self.detector not in ("zf", "mmse"):
            raise ConfigurationError(f"unknown detector {self.detector!r}")
        if self.tracking_variant not in ("re-derived", "as-printed"):
            raise ConfigurationError(f"unknown tracking variant {self.tracking_variant!r}")
        if self.mmse_r not in ("sigma", "kron"):
            raise ConfigurationError(f"unknown MMSE regularization {self.mmse_r!r}")


@dataclass(frozen=True)
class _FrameContext:
    """Index tables and constants shared by every symbol of one frame."""

    b_k: np.ndarray       # storage bins of positive data bins (one per pair)
    b_mk: np.ndarray      # storage bins of their mirrors
    i_k: np.ndarray       # positions of the positive bins in the data ordering
    i_mk: np.ndarray      # positions of the mirror bins
    p_bins: np.ndarray    # storage bins of the pilot set, ascending logical
    p_mirror: np.ndarray  # permutation mapping pilot l to the index of -l
    r_matrix: np.ndarray | None  # MMSE regularization, None for ZF


def _frame_context(
    smap: SubcarrierMap, state: EstimatorState, options: EqualizerOptions
) -> _FrameContext:
    n = smap.n
    data = smap.data_bins
    pos = {k: i for i, k in enumerate(data)}
    kpos = np.array([k for k in data if k > 0])
    pilots = smap.pilot_bins
    p_index = {k: i for i, k in enumerate(pilots)}
    r = None
    if options.detector == "mmse":
        r = mmse_r_matrix(state, state.m_t, options.mmse_r)
    return _FrameContext(
        b_k=logical_to_bin(kpos, n),
        b_mk=logical_to_bin(-kpos, n),
        i_k=np.array([pos[k] for k in kpos]),
        i_mk=np.array([pos[-k] for k in kpos]),
        p_bins=logical_to_bin(pilots, n),
        p_mirror=np.array([p_index[-k] for k in pilots]),
        r_matrix=r,
    )


def _pilot_terms(
    x_sym: np.ndarray,
    state: EstimatorState,
    pilots: np.ndarray,
    p_bins: np.ndarray,
    p_mirror: np.ndarray,
):
    """Observation pairs and predicted pilot responses, all pilot bins at once."""
    y = np.einsum("lqp,pl->lq", state.h_pre[p_bins], pilots)            # (r, m_r)
    y_mk = np.einsum("lqp,pl->lq", state.h_pre[p_bins[p_mirror]], pilots[:, p_mirror])
    ym = np.conj(y_mk)
    z = np.stack([x_sym[p_bins], np.conj(x_sym[p_bins[p_mirror]])], axis=1)  # (r, 2, m_r)
    return z, y, ym


def _tracking_matrices(
    y: np.ndarray, ym: np.ndarray, k1: np.ndarray, k2: np.ndarray, variant: str
) -> np.ndarray:
    """Stacked (m_r, r, 2, 2) linear models mapping [Re, Im] of the update to z."""
    m_r, r = y.shape[1], y.shape[0]
    c = np.empty((m_r, r, 2, 2), dtype=np.complex128)
    yt, ymt = y.T, ym.T  # (m_r, r)
    if variant == "re-derived":
        # x(l)  = k1 y Ups + k2 ym conj(Ups); x#(l) = conj(k2) y Ups + conj(k1) ym conj(Ups)
        c[:, :, 0, 0] = k1[:, None] * yt + k2[:, None] * ymt
        c[:, :, 0, 1] = 1j * (k1[:, None] * yt - k2[:, None] * ymt)
        c[:, :, 1, 0] = np.conj(k1)[:, None] * ymt + np.conj(k2)[:, None] * yt
        c[:, :, 1, 1] = 1j * (np.conj(k2)[:, None] * yt - np.conj(k1)[:, None] * ymt)
    else:
        # Literal published construction: C = y X1 + y# X2.  Expanding the
        # stacked pilot model shows the second column needs the factor j
        # and the image coefficient; kept for comparison, known not to
        # recover the update even noiselessly.
        c[:, :, 0, 0] = k1[:, None] * (yt + ymt)
        c[:, :, 0, 1] = k1[:, None] * (yt - ymt)
        c[:, :, 1, 0] = np.conj(k2)[:, None] * (yt + ymt)
        c[:, :, 1, 1] = np.conj(k2)[:, None] * (yt - ymt)
    return c


def track_cpe(
    x_sym: np.ndarray,
    state: EstimatorState,
    smap: SubcarrierMap,
    pilots: np.ndarray,
    variant: str = "re-derived",
    ceiling: float = UPSILON_CEILING,
    prev: CpeUpdate | None = None,
) -> CpeUpdate:
    """Estimate the per-branch common-phase update of one data symbol.

    Solves the regularized pilot model per branch, averages over the
    pilot bins, and falls back to the previous update (flagged) when the
    system is rejected by the condition guard or the magnitude exceeds
    ``ceiling``.
    """
    n = smap.n
    p_index = {k: i for i, k in enumerate(smap.pilot_bins)}
    p_mirror = np.array([p_index[-k] for k in smap.pilot_bins])
    return _track_cpe(
        x_sym, state, pilots, logical_to_bin(smap.pilot_bins, n), p_mirror,
        variant, ceiling, prev,
    )


def _track_cpe(
    x_sym, state, pilots, p_bins, p_mirror, variant, ceiling, prev
) -> CpeUpdate:
    m_r = state.m_r
    z, y, ym = _pilot_terms(x_sym, state, pilots, p_bins, p_mirror)
    c = _tracking_matrices(y, ym, state.k1, state.k2, variant)  # (m_r, r, 2, 2)
    z_t = np.moveaxis(z, 2, 0)                                  # (m_r, r, 2)
    gram = np.einsum("qrij,qrik->qrjk", c.conj(), c)
    rhs = np.einsum("qrij,qri->qrj", c.conj(), z_t)
    upsilon = np.ones(m_r, dtype=np.complex128)
    fallback = prev.upsilon if prev is not None else np.ones(m_r, dtype=np.complex128)
    flagged = False
    for q in range(m_r):
        lam = max(float(state.psi[q, q].real), 0.0)
        try:
            phi = solve_regularized(
                gram[q], lam, rhs[q][..., None], context="track_cpe", hermitian=True
            )[..., 0]
        except SingularMatrixError:
            upsilon[q] = fallback[q]
            flagged = True
            continue
        mean = phi.mean(axis=0)
        est = mean[0].real + 1j * mean[1].real
        if not np.isfinite(est) or abs(est) > ceiling:
            upsilon[q] = fallback[q]
            flagged = True
        else:
            upsilon[q] = est
    return CpeUpdate(upsilon=upsilon, flagged=flagged)


def build_w(k: int, state: EstimatorState, upsilon: np.ndarray) -> np.ndarray:
    """Stacked mirror-pair mixing matrix for logical bin ``k`` (2m_r x 2m_t)."""
    n = state.h_pre.shape[0]
    h_k = upsilon[:, None] * state.h_pre[logical_to_bin(k, n)]
    h_mk = np.conj(upsilon)[:, None] * np.conj(state.h_pre[logical_to_bin(-k, n)])
    k1 = state.k1[:, None]
    k2 = state.k2[:, None]
    top = np.concatenate([k1 * h_k, k2 * h_mk], axis=1)
    bot = np.concatenate([np.conj(k2) * h_k, np.conj(k1) * h_mk], axis=1)
    return np.concatenate([top, bot], axis=0)


def mmse_r_matrix(state: EstimatorState, m_t: int, kind: str = "sigma") -> np.ndarray:
    """Regularization for the MMSE detector.

    ``sigma`` uses the average per-branch noise power from the measured
    correlation matrix; ``kron`` uses its Kronecker product with
    the identity, which is only dimensionally consistent when
    ``m_r**2 == 2 m_t``.
    """
    m_r = state.m_r
    if kind == "sigma":
        sigma2 = max(float(np.trace(state.psi).real) / m_r, 0.0)
        return sigma2 * np.eye(2 * m_t, dtype=np.complex128)
    if kind == "kron":
        r = np.kron(state.psi, np.eye(m_r, dtype=np.complex128))
        if r.shape != (2 * m_t, 2 * m_t):
            raise ConfigurationError(
                f"kron-form regularizer is {r.shape} but the detector needs {(2 * m_t, 2 * m_t)}"
            )
        return r
    raise ConfigurationError(f"unknown MMSE regularization {kind!r}")


def detect(
    x_stack: np.ndarray, w: np.ndarray, mode: str = "zf", r: np.ndarray | None = None
) -> np.ndarray:
    """Linear detection of one stacked mirror pair.

    Returns the ``2 m_t`` soft estimate ``[s(k); s#(k)]``.  ZF solves the
    plain normal equations; MMSE adds ``r``.  Raises
    :class:`SingularMatrixError` on rank deficiency.
    """
    gram = w.conj().T @ w
    if mode == "mmse":
        if r is None:
            raise ConfigurationError("MMSE detection needs a regularization matrix")
        gram = gram + r
    elif mode != "zf":
        raise ConfigurationError(f"unknown detector {mode!r}")
    return solve_regularized(gram, 0.0, w.conj().T @ x_stack, context="detect", hermitian=True)


@dataclass(frozen=True)
class SymbolDecision:
    bits: np.ndarray      # (n_data, m_t, 4)
    soft: np.ndarray      # (n_data, m_t)
    cpe: CpeUpdate
    erased: np.ndarray    # (n_data,) bool, bins whose pair was rank-deficient


@dataclass(frozen=True)
class FrameDecisions:
    bits: np.ndarray      # (n_data_syms, n_data, m_t, 4)
    soft: np.ndarray      # (n_data_syms, n_data, m_t)
    erased: np.ndarray    # (n_data_syms, n_data) bool
    flagged_symbols: int
    cpe_history: np.ndarray = field(repr=False, default=None)  # (n_data_syms, m_r)


def _detect_pairs(x_sym, state, ctx: _FrameContext, upsilon, n_data, m_t):
    """Detect every mirror pair of one symbol; returns (soft, erased)."""
    h_k = upsilon[None, :, None] * state.h_pre[ctx.b_k]                  # (P, m_r, m_t)
    h_mk = np.conj(upsilon)[None, :, None] * np.conj(state.h_pre[ctx.b_mk])
    k1 = state.k1[None, :, None]
    k2 = state.k2[None, :, None]
    top = np.concatenate([k1 * h_k, k2 * h_mk], axis=2)
    bot = np.concatenate([np.conj(k2) * h_k, np.conj(k1) * h_mk], axis=2)
    w = np.concatenate([top, bot], axis=1)                               # (P, 2m_r, 2m_t)

    x_stack = np.concatenate([x_sym[ctx.b_k], np.conj(x_sym[ctx.b_mk])], axis=1)
    gram = np.einsum("pij,pik->pjk", w.conj(), w)
    if ctx.r_matrix is not None:
        gram = gram + ctx.r_matrix[None]
    rhs = np.einsum("pij,pi->pj", w.conj(), x_stack)

    cond = condition_number(gram, hermitian=True)
    good = np.isfinite(cond) & (cond <= CONDITION_LIMIT)
    s_stack = np.zeros((ctx.b_k.size, 2 * m_t), dtype=np.complex128)
    if good.any():
        s_stack[good] = np.linalg.solve(gram[good], rhs[good][..., None])[..., 0]

    soft = np.zeros((n_data, m_t), dtype=np.complex128)
    soft[ctx.i_k] = s_stack[:, :m_t]
    soft[ctx.i_mk] = np.conj(s_stack[:, m_t:])
    erased = np.zeros(n_data, dtype=bool)
    erased[ctx.i_k[~good]] = True
    erased[ctx.i_mk[~good]] = True
    return soft, erased


def equalize_symbol(
    x_sym: np.ndarray,
    state: EstimatorState,
    smap: SubcarrierMap,
    pilots: np.ndarray,
    options: EqualizerOptions = EqualizerOptions(),
    prev: CpeUpdate | None = None,
    cpe_override: np.ndarray | None = None,
    _ctx: _FrameContext | None = None,
) -> SymbolDecision:
    """Track the common phase (unless overridden) and detect every data bin."""
    ctx = _ctx if _ctx is not None else _frame_context(smap, state, options)
    if cpe_override is not None:
        cpe = CpeUpdate(upsilon=np.asarray(cpe_override, dtype=np.complex128))
    elif options.track:
        cpe = _track_cpe(
            x_sym, state, pilots, ctx.p_bins, ctx.p_mirror,
            options.tracking_variant, options.upsilon_ceiling, prev,
        )
    else:
        cpe = CpeUpdate.identity(state.m_r)

    soft, erased = _detect_pairs(x_sym, state, ctx, cpe.upsilon, smap.n_data, state.m_t)
    bits = qam16_demap(soft).reshape(smap.n_data, state.m_t, 4)
    return SymbolDecision(bits=bits, soft=soft, cpe=cpe, erased=erased)


def equalize_frame(
    rx_grids: np.ndarray,
    state: EstimatorState,
    smap: SubcarrierMap,
    pilots: np.ndarray,
    n_train: int,
    options: EqualizerOptions = EqualizerOptions(),
    cpe_override: np.ndarray | None = None,
) -> FrameDecisions:
    """Equalize every data symbol of a demodulated frame in order.

    ``rx_grids`` is the ``(symbols, n, m_r)`` stack including training
    symbols; the first ``n_train`` are skipped.  ``cpe_override`` may
    supply genie per-symbol updates of shape ``(n_data_syms, m_r)``.
    """
    ctx = _frame_context(smap, state, options)
    n_syms = rx_grids.shape[0] - n_train
    m_t = state.m_t
    bits = np.zeros((n_syms, smap.n_data, m_t, 4), dtype=np.int64)
    soft = np.zeros((n_syms, smap.n_data, m_t), dtype=np.complex128)
    erased = np.zeros((n_syms, smap.n_data), dtype=bool)
    history = np.zeros((n_syms, state.m_r), dtype=np.complex128)
    flagged = 0
    prev: CpeUpdate | None = None
    for j in range(n_syms):
        override = cpe_override[j] if cpe_override is not None else None
        dec = equalize_symbol(
            rx_grids[n_train + j], state, smap, pilots, options, prev=prev,
            cpe_override=override, _ctx=ctx,
        )
        bits[j] = dec.bits
        soft[j] = dec.soft
        erased[j] = dec.erased
        history[j] = dec.cpe.upsilon
        flagged += int(dec.cpe.flagged)
        prev = dec.cpe
    return FrameDecisions(
        bits=bits, soft=soft, erased=erased, flagged_symbols=flagged, cpe_history=history
    )
