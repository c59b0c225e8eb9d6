"""Nyquist contours, eigenloci sweeps, winding numbers, and the scalable
stability criteria (exact generalized-Nyquist check, field-of-values
sufficient check, per-agent decentralized blueprint, lossy full-rank
variant).

Conventions: contours are traversed clockwise around the right half-plane;
anticlockwise encirclements count positive. The upper half of a contour is
sampled and conjugate-mirrored to the lower half (loop values at conjugate
points are conjugates for real-coefficient systems). Frequency-domain
evaluation of delays is exact; only pole *counting* for delayed agents goes
through the Pade-rationalized form, at the caller-visible ``pade_order``.

Sweep evaluation across contour samples is embarrassingly parallel; setting
the environment variable ``NYQSCALE_THREADS`` > 1 chunks the batched
eigenvalue evaluation across that many threads (branch matching stays a
sequential post-pass, so results are deterministic).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import (
    BoundaryAmbiguityError,
    ContourError,
    InvalidInputError,
    MarginalStabilityError,
    PoleHitError,
    UndersampledContourError,
)
from .lti import TransferFunction, _classify_poles, rhp_poles_in_region
from .network import NormalizedNetwork
from .powerplant import Agent

__all__ = [
    "Contour",
    "LociSweep",
    "Verdict",
    "Violation",
    "DecentralizedPolicy",
    "make_contour",
    "eigenloci_sweep",
    "winding_number",
    "theorem1_check",
    "fov_check",
    "decentralized_check",
    "lossy_exponential_check",
    "default_outer_radius",
    "vertex_axis_crossings",
]

POINT_ON_CURVE_RTOL = 1e-9
WINDING_INTEGER_TOL = 1e-6
FOV_MARGIN_BAND = 1e-6
CLOSURE_LOCI_BOUND = 1e-3
REFINE_JUMP = math.pi / 2
MAX_REFINE_LEVELS = 12
DEGENERATE_LOCI = 1e-12


# ---------------------------------------------------------------------------
# contour geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Segment:
    """One smooth piece of the upper contour chain, parameterized t in [0,1].

    roles: origin-arc | axis | indent | closure.
    """

    kind: str  # "arc" | "axis"
    role: str
    a: float  # arc: theta0 [rad]; axis: omega0
    b: float  # arc: theta1 [rad]; axis: omega1
    center: complex = 0.0 + 0.0j
    radius: float = 0.0

    def point(self, t: float) -> complex:
        if self.kind == "arc":
            theta = self.a + (self.b - self.a) * t
            return self.center + self.radius * complex(math.cos(theta), math.sin(theta))
        # logarithmic interpolation along the imaginary axis
        omega = self.a * (self.b / self.a) ** t
        return 1j * omega


@dataclass(frozen=True)
class Contour:
    """Sampled Nyquist contour (full-D or D_r).

    ``nodes`` hold the upper chain from +r through +jR to +R as
    (segment_index, parameter) pairs; ``samples`` expands them to the full
    clockwise closed loop with the lower half conjugate-mirrored (the first
    sample is repeated at the end, closing the curve).
    """

    kind: str
    inner_radius: float
    outer_radius: float
    indent_radius: float
    jw_poles: tuple[float, ...]
    segments: tuple[_Segment, ...]
    nodes: tuple[tuple[int, float], ...]

    def point(self, node: tuple[int, float]) -> complex:
        seg, t = node
        return self.segments[seg].point(t)

    def upper_points(self, nodes=None) -> np.ndarray:
        nodes = self.nodes if nodes is None else nodes
        return np.array([self.point(nd) for nd in nodes], dtype=complex)

    @property
    def samples(self) -> np.ndarray:
        up = self.upper_points()
        return np.concatenate([up, np.conj(up[-2::-1])])

    def node_roles(self, nodes=None) -> list[str]:
        nodes = self.nodes if nodes is None else nodes
        return [self.segments[seg].role for seg, _ in nodes]

    def with_nodes(self, nodes) -> "Contour":
        return replace(self, nodes=tuple(nodes))


def make_contour(
    kind: str,
    r: float,
    R: float,
    density: int = 200,
    jw_pole_list: Sequence[float] = (),
    indent_radius: float | None = None,
    extra_axis_omegas: Sequence[float] = (),
) -> Contour:
    """Build a clockwise D- or D_r-contour.

    ``kind`` is "full-D" (r ignored; the origin gets a small indentation of
    radius ``indent_radius``, default 1e-4*R) or "D_r" (RHP indentation of
    radius r at the origin). ``jw_pole_list`` gives imaginary-axis pole
    frequencies (rad/s, or complex poles whose imaginary parts are taken)
    that receive small RHP semicircular indentations. ``density`` is samples
    per decade on the axis segments (>= 100). ``extra_axis_omegas`` forces
    exact samples at the given frequencies (plot markers).
    """
    if density < 100:
        raise InvalidInputError("density must be at least 100 samples per decade")
    if R <= 0:
        raise InvalidInputError("outer radius must be positive")
    rho = indent_radius if indent_radius is not None else 1e-4 * R
    if kind == "full-D":
        r_eff = rho
    elif kind == "D_r":
        if not r > 0:
            raise InvalidInputError("D_r contour needs r > 0")
        r_eff = float(r)
    else:
        raise InvalidInputError(f"unknown contour kind: {kind!r}")
    if not (R > r_eff >= 0):
        raise InvalidInputError("need R > r >= 0")

    omegas = []
    for p in jw_pole_list:
        w = abs(p.imag) if isinstance(p, complex) else abs(float(p))
        if w <= r_eff or w >= R:
            continue  # outside the swept axis range; covered by r or R
        omegas.append(w)
    omegas = sorted(set(omegas))
    for wa, wb in zip(omegas, omegas[1:]):
        if wb - wa < 2.2 * rho:
            raise ContourError(
                f"indentations at {wa:.4g} and {wb:.4g} rad/s overlap; "
                "reduce indent_radius"
            )
    if omegas:
        if omegas[0] - r_eff < 1.1 * rho or R - omegas[-1] < 1.1 * rho:
            raise ContourError(
                "pole indentation overlaps the contour start/closure; "
                "adjust r, R, or indent_radius"
            )

    segments: list[_Segment] = [
        _Segment("arc", "origin-arc", 0.0, math.pi / 2, 0.0j, r_eff)
    ]
    marks = sorted(w for w in extra_axis_omegas if r_eff < w < R)
    lo = r_eff
    for w in omegas:
        segments.append(_Segment("axis", "axis", lo, w - rho))
        segments.append(_Segment("arc", "indent", -math.pi / 2, math.pi / 2, 1j * w, rho))
        lo = w + rho
    segments.append(_Segment("axis", "axis", lo, R))
    segments.append(_Segment("arc", "closure", math.pi / 2, 0.0, 0.0j, R))

    n_arc = max(49, density // 2 + 1)
    n_indent = 33
    nodes: list[tuple[int, float]] = []
    for k, seg in enumerate(segments):
        if seg.kind == "axis":
            decades = math.log10(seg.b / seg.a)
            n = max(2, int(math.ceil(density * decades)) + 1)
            ts = list(np.linspace(0.0, 1.0, n))
            for w in marks:
                if seg.a < w < seg.b:
                    ts.append(math.log(w / seg.a) / math.log(seg.b / seg.a))
            ts.sort()
        else:
            n = n_arc if seg.role in ("origin-arc", "closure") else n_indent
            ts = list(np.linspace(0.0, 1.0, n))
        nodes.extend((k, t) for t in ts)
    return Contour(
        kind=kind,
        inner_radius=r_eff if kind == "D_r" else 0.0,
        outer_radius=float(R),
        indent_radius=rho,
        jw_poles=tuple(omegas),
        segments=tuple(segments),
        nodes=tuple(nodes),
    )


def default_outer_radius(agents: Sequence, gammas: Sequence[float] | None = None,
                         pade_order: int = 3) -> float:
    """Closure radius: at least 100x the largest agent pole/zero modulus,
    grown until every vertex magnitude |gamma_i g_i(R)| falls below 1e-4
    (so the closure arc cannot contribute winding)."""
    moduli = [1.0]
    gs = []
    for a in agents:
        g = a.g_rational(pade_order) if isinstance(a, Agent) else a
        gs.append((a, g))
        moduli.extend(abs(p) for p in g.poles)
        moduli.extend(abs(z) for z in g.zeros)
    R = 100.0 * max(moduli)
    gam = list(gammas) if gammas is not None else [1.0] * len(gs)
    for _ in range(60):
        worst = 0.0
        for (a, g), gi in zip(gs, gam):
            val = a.g_value(complex(R)) if isinstance(a, Agent) else g(complex(R))
            worst = max(worst, abs(gi * val))
        if worst < 1e-4:
            return R
        R *= 2.0
    raise ContourError("could not find a closure radius with negligible loci")


# ---------------------------------------------------------------------------
# winding numbers
# ---------------------------------------------------------------------------


def winding_number(closed_curve: Sequence[complex], point: complex) -> int:
    """Signed winding number of a sampled closed curve about a point,
    anticlockwise positive, by accumulated argument increments.

    The curve must be closed (first == last within tolerance) and stay off
    the point; a per-step argument increment of >= pi means the polyline
    cannot be disambiguated and is reported as undersampled.
    """
    z = np.asarray(closed_curve, dtype=complex)
    if len(z) < 3:
        raise InvalidInputError("need at least 3 samples")
    scale = max(1.0, float(np.abs(z).max()))
    if abs(z[0] - z[-1]) > 1e-9 * scale:
        raise InvalidInputError("curve is not closed (first != last)")
    rel = z - point
    dist = np.abs(rel)
    if dist.min() <= POINT_ON_CURVE_RTOL * scale:
        raise MarginalStabilityError(
            f"point {point} lies on the curve (distance {dist.min():.3g})"
        )
    steps = np.angle(rel[1:] / rel[:-1])
    if np.abs(steps).max() >= math.pi * (1 - 1e-12):
        raise UndersampledContourError(
            "argument increment >= pi between consecutive samples"
        )
    total = steps.sum() / (2 * math.pi)
    w = round(float(total))
    if abs(total - w) > WINDING_INTEGER_TOL:
        raise UndersampledContourError(
            f"accumulated winding {total:.3e} is not an integer"
        )
    return int(w)


def _accumulate_matched_winding(values: np.ndarray, point: complex) -> tuple[float, float]:
    """Sum of matched-branch argument increments (rad) about ``point`` over a
    closed multi-branch curve, plus the closest approach distance.

    values: (m, k) complex, rows = loop samples in order (closed: first and
    last rows describe the same contour point set).
    """
    m, k = values.shape
    rel = values - point
    dist = np.abs(rel)
    closest = float(dist.min())
    scale = max(1.0, float(np.abs(values).max()))
    if closest <= POINT_ON_CURVE_RTOL * scale:
        raise MarginalStabilityError(
            f"loci touch the point {point} (distance {closest:.3g})"
        )
    total = 0.0
    cur = rel[0]
    for i in range(1, m):
        nxt = rel[i][_match_indices(cur, rel[i])]
        steps = np.angle(nxt / cur)
        if np.abs(steps).max() >= math.pi * (1 - 1e-12):
            raise UndersampledContourError(
                "matched-branch argument increment >= pi; refinement exhausted"
            )
        total += float(steps.sum())
        cur = nxt
    return total, closest


def _match_indices(prev: np.ndarray, cur: np.ndarray) -> np.ndarray:
    """Branch matching: greedy minimal-distance assignment with an optimal
    (Hungarian) fallback when the greedy cost exceeds twice the row-minimum
    lower bound."""
    k = len(prev)
    if k == 1:
        return np.array([0])
    D = np.abs(prev[:, None] - cur[None, :])
    order = np.argsort(D, axis=None)
    rows_taken = np.zeros(k, dtype=bool)
    cols_taken = np.zeros(k, dtype=bool)
    assign = np.full(k, -1)
    cost = 0.0
    for flat in order:
        i, j = divmod(int(flat), k)
        if rows_taken[i] or cols_taken[j]:
            continue
        assign[i] = j
        rows_taken[i] = True
        cols_taken[j] = True
        cost += D[i, j]
        if rows_taken.all():
            break
    lower = float(D.min(axis=1).sum())
    if cost > 2.0 * lower + 1e-300:
        from scipy.optimize import linear_sum_assignment

        ri, ci = linear_sum_assignment(D)
        assign = np.empty(k, dtype=int)
        assign[ri] = ci
    return assign


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LociSweep:
    """Eigenloci and vertex trajectories along a contour.

    Upper-chain arrays are stored; the full closed loop is derived by
    conjugate mirroring. ``branches`` are matched into continuous curves
    (the matching is a bijection between consecutive samples); ``flagged``
    marks samples where the assignment was ambiguous at the 1e-12 level and
    densification could not separate the branches further.
    """

    contour: Contour
    s_upper: np.ndarray
    branches_upper: np.ndarray  # (m, k)
    vertices_upper: np.ndarray  # (m, n)
    flagged: tuple[int, ...] = ()

    @property
    def n_agents(self) -> int:
        return self.vertices_upper.shape[1]

    @property
    def s_full(self) -> np.ndarray:
        return np.concatenate([self.s_upper, np.conj(self.s_upper[-2::-1])])

    def _mirror(self, arr: np.ndarray) -> np.ndarray:
        return np.concatenate([arr, np.conj(arr[-2::-1, :])], axis=0)

    @property
    def branches_full(self) -> np.ndarray:
        return self._mirror(self.branches_upper)

    @property
    def vertices_full(self) -> np.ndarray:
        return self._mirror(self.vertices_upper)

    def total_winding(self, point: complex = -1.0 + 0.0j) -> tuple[int, float]:
        """(summed anticlockwise winding of all branches about the point,
        closest approach distance)."""
        total, closest = _accumulate_matched_winding(self.branches_full, point)
        w = total / (2 * math.pi)
        wi = round(w)
        if abs(w - wi) > WINDING_INTEGER_TOL:
            raise UndersampledContourError(
                f"summed branch winding {w:.3e} is not an integer"
            )
        return int(wi), closest

    def closest_approach(self, point: complex = -1.0 + 0.0j):
        """(distance, s, locus value) of the branch point nearest ``point``."""
        rel = np.abs(self.branches_upper - point)
        i, j = np.unravel_index(int(np.argmin(rel)), rel.shape)
        return float(rel[i, j]), complex(self.s_upper[i]), complex(
            self.branches_upper[i, j]
        )


def _vertex_evaluator(agents: Sequence, gamma: np.ndarray) -> Callable:
    def evaluate(s: np.ndarray) -> np.ndarray:
        cols = []
        for a, g in zip(agents, gamma):
            if isinstance(a, Agent):
                cols.append(g * a.g_value(s))
            else:
                cols.append(g * a(s))
        return np.stack(cols, axis=1)

    return evaluate


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("NYQSCALE_THREADS", "1")))
    except ValueError:
        return 1


def _batched_eigvals(mats: np.ndarray) -> np.ndarray:
    workers = _thread_count()
    if workers == 1 or mats.shape[0] < 4 * workers:
        return np.linalg.eigvals(mats)
    chunks = np.array_split(np.arange(mats.shape[0]), workers)
    out = np.empty(mats.shape[:2], dtype=complex)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(np.linalg.eigvals, mats[idx]) for idx in chunks]
        for idx, fut in zip(chunks, futures):
            out[idx] = fut.result()
    return out


def eigenloci_sweep(
    netN: NormalizedNetwork,
    agents: Sequence,
    contour: Contour,
    mode: str = "interarea",
    epsilon: float = 0.0,
    refine: bool = True,
) -> LociSweep:
    """Eigenvalue trajectories of the loop matrix along the contour.

    mode "interarea": the (n-1)x(n-1) projected return ratio
    Uhat^T G'(s) Uhat diag(mu_2..mu_n) -- its eigenvalues are exactly the
    nonzero eigenloci of L'G'(s). mode "full": the lossy full-rank loop
    U^T G'(s) U diag(mu + epsilon).

    Vertex values gamma_i g_i(s) are recorded at every sample. Consecutive
    samples whose matched eigenvalue argument about -1 jumps by >= pi/2 are
    densified (up to 12 levels, bisecting along the contour's own geometry).
    """
    if len(agents) != netN.n:
        raise InvalidInputError("agent count must match network size")
    if mode not in ("interarea", "full"):
        raise InvalidInputError(f"unknown sweep mode: {mode!r}")
    vertex_of = _vertex_evaluator(agents, netN.gamma)
    if mode == "interarea":
        U = netN.U_hat
        weights = netN.mu_hat
    else:
        U = netN.U
        weights = netN.mu + epsilon

    def evaluate(points: np.ndarray):
        try:
            verts = vertex_of(points)
        except PoleHitError as exc:
            raise ContourError(
                f"loop evaluation hit a pole at s = {exc.s}; re-route the "
                "contour (add a jw-axis indentation there or adjust r)"
            ) from None
        # Uhat^T diag(v) Uhat, batched over samples, columns scaled by mu
        mats = np.einsum("ji,mj,jl->mil", U, verts, U) * weights[None, None, :]
        eigs = _batched_eigvals(mats)
        return eigs, verts

    nodes = list(contour.nodes)
    pts = contour.upper_points(nodes)
    eigs, verts = evaluate(pts)
    flagged: set[tuple[int, float]] = set()

    if refine:
        for _level in range(MAX_REFINE_LEVELS):
            rel = eigs - (-1.0 + 0.0j)
            new_nodes: list[tuple[int, float]] = []
            insert_after: list[int] = []
            cur = rel[0]
            for i in range(1, len(nodes)):
                nxt = rel[i][_match_indices(cur, rel[i])]
                jump = np.abs(np.angle(nxt / cur)).max()
                if jump >= REFINE_JUMP:
                    sa, ta = nodes[i - 1]
                    sb, tb = nodes[i]
                    if sa == sb and abs(tb - ta) > 1e-12:
                        insert_after.append(i - 1)
                        new_nodes.append((sa, 0.5 * (ta + tb)))
                cur = nxt
            if not new_nodes:
                break
            merged_nodes = []
            merged_idx = 0
            inserts = dict(zip(insert_after, new_nodes))
            for i, nd in enumerate(nodes):
                merged_nodes.append(nd)
                if i in inserts:
                    merged_nodes.append(inserts[i])
            nodes = merged_nodes
            pts = contour.upper_points(nodes)
            eigs, verts = evaluate(pts)
        else:
            # levels exhausted; the winding accumulation will raise if the
            # remaining jumps are actually ambiguous (>= pi)
            pass

    # ambiguity flag: nearly coincident eigenvalues make matching arbitrary
    if eigs.shape[1] > 1:
        for i in range(eigs.shape[0]):
            row = eigs[i]
            d = np.abs(row[:, None] - row[None, :]) + np.eye(len(row))
            if d.min() <= 1e-12 * max(1.0, np.abs(row).max()):
                flagged.add(i)

    # build matched continuous branches for diagnostics/export
    matched = eigs.copy()
    for i in range(1, matched.shape[0]):
        matched[i] = matched[i][_match_indices(matched[i - 1] - (-1), matched[i] - (-1))]

    return LociSweep(
        contour=contour.with_nodes(nodes),
        s_upper=pts,
        branches_upper=matched,
        vertices_upper=verts,
        flagged=tuple(sorted(int(i) for i in flagged)),
    )


# ---------------------------------------------------------------------------
# verdicts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    condition: str
    frequency_rad_s: float | None = None
    value: object = None


@dataclass(frozen=True)
class Verdict:
    """Structured result of a stability check.

    ``result`` is "stable" (criterion satisfied), "unstable" (criterion
    violated; for the sufficient checks this means stability is not
    certified and the analysis suggests instability), or "inconclusive"
    (marginal/touching case). ``winding_count``/``n_required`` hold the
    generalized-Nyquist accounting where applicable.
    """

    result: str
    winding_count: int | None = None
    n_required: int | None = None
    violated_conditions: tuple[Violation, ...] = ()
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.result not in ("stable", "unstable", "inconclusive"):
            raise InvalidInputError(f"bad verdict result {self.result!r}")
        if self.result == "stable" and self.violated_conditions:
            raise InvalidInputError("stable verdict cannot carry violations")

    @property
    def is_stable(self) -> bool:
        return self.result == "stable"

    def to_json_dict(self) -> dict:
        return {
            "result": self.result,
            "winding": self.winding_count,
            "N": self.n_required,
            "violations": [
                {
                    "condition": v.condition,
                    "frequency_rad_s": _jsonable(v.frequency_rad_s),
                    "value": _jsonable(v.value),
                }
                for v in self.violated_conditions
            ],
            "closest_approach": _jsonable(self.diagnostics.get("closest_approach")),
        }


def _jsonable(v):
    if v is None or isinstance(v, (bool, int, str)):
        return v
    if isinstance(v, complex):
        return [float(v.real), float(v.imag)]
    if isinstance(v, (float, np.floating)):
        return float(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    return str(v)


# ---------------------------------------------------------------------------
# open-loop pole accounting
# ---------------------------------------------------------------------------


def _agent_rational(a, pade_order: int) -> TransferFunction:
    return a.g_rational(pade_order) if isinstance(a, Agent) else a


def _agent_axis_poles(agents, pade_order: int) -> list[float]:
    omegas: list[float] = []
    for a in agents:
        g = _agent_rational(a, pade_order)
        _, axis = _classify_poles(g.poles)
        omegas.extend(abs(p.imag) for p in axis)
    return sorted(set(w for w in omegas if w > 0))


def _count_unstable_loop_poles(
    agents, gamma: np.ndarray, U: np.ndarray, pade_order: int
) -> tuple[int, list[str]]:
    """Smith-McMillan RHP pole count of the projected loop U^T G' U X.

    Per-agent distinct poles contribute their multiplicity; a simple pole
    shared across agents contributes rank(sum res_i u_i u_i^T) (for
    homogeneous networks this is n-1, not n). Shared poles that are
    repeated inside an agent fall back to the conservative sum with a note.
    """
    notes: list[str] = []
    per_agent: list[list[complex]] = []
    for a in agents:
        g = _agent_rational(a, pade_order)
        per_agent.append(list(rhp_poles_in_region(g, 0.0)))
    clusters: list[list[tuple[int, complex]]] = []
    for idx, poles in enumerate(per_agent):
        for p in poles:
            for cl in clusters:
                if abs(cl[0][1] - p) <= 1e-6 * (1.0 + abs(p)):
                    cl.append((idx, p))
                    break
            else:
                clusters.append([(idx, p)])
    N = 0
    for cl in clusters:
        agents_in = [i for i, _ in cl]
        distinct_agents = set(agents_in)
        if len(cl) == 1:
            N += 1
            continue
        if len(distinct_agents) < len(agents_in):
            # repeated within at least one agent: conservative count
            N += len(cl)
            notes.append(
                f"shared repeated pole near {cl[0][1]:.4g}: counted with raw "
                f"multiplicity {len(cl)}"
            )
            continue
        p = np.mean([p for _, p in cl])
        Rmat = np.zeros((U.shape[1], U.shape[1]), dtype=complex)
        for i, pi in cl:
            g = _agent_rational(agents[i], pade_order)
            res = gamma[i] * g.num(pi) / g.den.derivative()(pi)
            ui = U[i, :]
            Rmat += res * np.outer(ui, ui)
        scale = np.abs(Rmat).max()
        rank = int(np.linalg.matrix_rank(Rmat, tol=1e-9 * max(scale, 1e-300)))
        N += max(rank, 1)
        if rank < len(cl):
            notes.append(
                f"pole near {p:.4g} shared by agents {sorted(distinct_agents)}: "
                f"Smith-McMillan multiplicity {rank}"
            )
    return N, notes


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


def _min_nonzero_feature(agents, pade_order: int) -> float:
    """Smallest nonzero pole/zero modulus across the agents; the origin
    indentation must stay well below it so the contour cannot exempt slow
    closed-loop poles."""
    best = math.inf
    for a in agents:
        g = _agent_rational(a, pade_order)
        for p in list(g.poles) + list(g.zeros):
            m = abs(p)
            if m > 1e-9:
                best = min(best, m)
    return best


def _default_contour(netN, agents, kind, r, R, density, pade_order, extra=()):
    if R is None:
        R = default_outer_radius(agents, netN.gamma, pade_order)
        if r:
            R = max(R, 100.0 * r)
    feature = _min_nonzero_feature(agents, pade_order)
    rho = 1e-4 * R
    if math.isfinite(feature):
        rho = min(rho, 1e-3 * feature)
    jw = _agent_axis_poles(agents, pade_order)
    return make_contour(kind, r, R, density=density, jw_pole_list=jw,
                        indent_radius=rho, extra_axis_omegas=extra)


def theorem1_check(
    netN: NormalizedNetwork,
    agents: Sequence,
    contour: Contour | None = None,
    density: int = 200,
    pade_order: int = 3,
) -> Verdict:
    """Exact asymptotic-synchronization test: the interarea eigenloci, taken
    together, must encircle -1 exactly N times anticlockwise, N being the
    Smith-McMillan RHP pole count of the projected loop.

    Necessary and sufficient (up to the marginal band); delayed agents are
    swept with exact exponentials but their N comes from the Pade form.
    """
    if contour is None:
        contour = _default_contour(netN, agents, "full-D", 0.0, None, density, pade_order)
    N, notes = _count_unstable_loop_poles(agents, netN.gamma, netN.U_hat, pade_order)
    sweep = eigenloci_sweep(netN, agents, contour, mode="interarea")
    return _winding_verdict(sweep, N, notes, check="theorem1")


def lossy_exponential_check(
    netN: NormalizedNetwork,
    agents: Sequence,
    epsilon: float,
    contour: Contour | None = None,
    density: int = 200,
    pade_order: int = 3,
) -> Verdict:
    """Exponential-stability test for the lossy interconnection L' + eps*I
    (full rank): all n eigenloci must encircle -1 N times anticlockwise."""
    if not epsilon > 0:
        raise InvalidInputError("lossy check needs epsilon > 0; use "
                                "theorem1_check for the lossless network")
    if contour is None:
        contour = _default_contour(netN, agents, "full-D", 0.0, None, density, pade_order)
    N, notes = _count_unstable_loop_poles(agents, netN.gamma, netN.U, pade_order)
    sweep = eigenloci_sweep(netN, agents, contour, mode="full", epsilon=epsilon)
    return _winding_verdict(sweep, N, notes, check="lossy")


def _winding_verdict(sweep: LociSweep, N: int, notes: list[str], check: str) -> Verdict:
    roles = np.array(sweep.contour.node_roles())
    closure = roles == "closure"
    closure_mag = float(np.abs(sweep.branches_upper[closure]).max()) if closure.any() else 0.0
    if closure_mag >= CLOSURE_LOCI_BOUND:
        raise ContourError(
            f"loci reach {closure_mag:.3g} on the closure arc; increase the "
            "outer radius R"
        )
    max_loci = float(np.abs(sweep.branches_upper).max())
    diagnostics = {
        "check": check,
        "max_loci_magnitude": max_loci,
        "closure_max_magnitude": closure_mag,
        "flagged_samples": list(sweep.flagged),
        "notes": notes,
    }
    if max_loci < DEGENERATE_LOCI:
        return Verdict(
            result="inconclusive",
            winding_count=None,
            n_required=N,
            violated_conditions=(
                Violation("degenerate-loop", None, "all loci identically zero"),
            ),
            diagnostics=diagnostics,
        )
    dist, s_at, val = sweep.closest_approach(-1.0)
    diagnostics["closest_approach"] = {
        "distance": dist,
        "s": complex(s_at),
        "value": complex(val),
    }
    diagnostics["real_axis_crossings"] = _branch_axis_crossings(sweep)
    try:
        winding, _ = sweep.total_winding(-1.0)
    except MarginalStabilityError:
        return Verdict(
            result="inconclusive",
            winding_count=None,
            n_required=N,
            violated_conditions=(
                Violation("loci-touch-minus-one", abs(s_at.imag), dist),
            ),
            diagnostics=diagnostics,
        )
    if winding == N:
        return Verdict(
            result="stable",
            winding_count=winding,
            n_required=N,
            diagnostics=diagnostics,
        )
    return Verdict(
        result="unstable",
        winding_count=winding,
        n_required=N,
        violated_conditions=(
            Violation(
                "winding-mismatch",
                None,
                f"summed winding {winding} != required {N}",
            ),
        ),
        diagnostics=diagnostics,
    )


def _branch_axis_crossings(sweep: LociSweep) -> list[dict]:
    """Interpolated real-axis crossings of the matched branches (upper
    chain), reported as (frequency, crossing abscissa)."""
    out = []
    s_im = sweep.s_upper.imag
    br = sweep.branches_upper
    for k in range(br.shape[1]):
        im = br[:, k].imag
        re = br[:, k].real
        sign_change = np.where(np.diff(np.signbit(im)))[0]
        for i in sign_change:
            denom = im[i + 1] - im[i]
            if denom == 0:
                continue
            t = -im[i] / denom
            out.append(
                {
                    "branch": k,
                    "omega_rad_s": float(s_im[i] + t * (s_im[i + 1] - s_im[i])),
                    "re": float(re[i] + t * (re[i + 1] - re[i])),
                }
            )
    return out


# ---------------------------------------------------------------------------
# field-of-values (sufficient) check
# ---------------------------------------------------------------------------


def _hull_ray_min_x(points: np.ndarray) -> float:
    """Leftmost abscissa where the convex hull of the points meets the real
    axis (+inf when it does not). Exact segment/axis intersections over all
    opposite-side pairs; the extremes are attained on hull edges, which are
    a subset of those pairs."""
    re, im = points.real, points.imag
    tol = 1e-12 * (1.0 + float(np.abs(points).max()))
    best = math.inf
    on_axis = np.abs(im) <= tol
    if on_axis.any():
        best = float(re[on_axis].min())
    up = im > tol
    dn = im < -tol
    if up.any() and dn.any():
        for i in np.where(up)[0]:
            for j in np.where(dn)[0]:
                t = im[i] / (im[i] - im[j])
                x = re[i] + t * (re[j] - re[i])
                best = min(best, float(x))
    return best


def fov_check(
    netN: NormalizedNetwork,
    agents: Sequence,
    contour: Contour,
    alpha_fallback: bool = False,
    pade_order: int = 3,
) -> Verdict:
    """Sufficient scalable criterion: at every contour sample the convex
    hull of the vertices gamma_i g_i(s) (the field of values of the diagonal
    G'(s)) must not intersect the real ray (-inf, -1]; then no alpha-scaled
    field of values, alpha in (0,1], can encircle -1, because any
    encirclement would have to cross that ray and scaling by alpha <= 1 only
    moves hull points x <= -1/alpha onto it.

    Precondition (pole gate): no open-loop unstable poles inside the contour
    region -- violations are returned as a failed verdict listing agents and
    pole moduli. The optional ``alpha_fallback`` computes per-vertex winding
    numbers for 16 sampled alphas in [mu_2, 1]; it is a labeled heuristic
    and can only soften a ray failure to "inconclusive", never certify
    stability.
    """
    r_gate = contour.inner_radius if contour.kind == "D_r" else 0.0
    violations: list[Violation] = []
    for idx, a in enumerate(agents):
        g = _agent_rational(a, pade_order)
        poles = rhp_poles_in_region(g, r_gate)
        if poles:
            violations.append(
                Violation(
                    "pole-gate",
                    None,
                    {
                        "agent": idx,
                        "pole_moduli_rad_s": [abs(p) for p in poles],
                    },
                )
            )
    sweep = eigenloci_sweep(netN, agents, contour, mode="interarea")
    verts = sweep.vertices_upper
    min_x = np.array([_hull_ray_min_x(verts[i]) for i in range(verts.shape[0])])
    worst_i = int(np.argmin(min_x))
    worst = float(min_x[worst_i])
    diagnostics = {
        "check": "fov",
        "worst_hull_axis_x": worst,
        "worst_frequency_rad_s": float(sweep.s_upper[worst_i].imag),
        "pole_gate_r": r_gate,
    }
    ray_failed = worst <= -1.0 - FOV_MARGIN_BAND
    marginal = abs(worst + 1.0) <= FOV_MARGIN_BAND
    if ray_failed:
        violations.append(
            Violation(
                "fov-ray",
                float(sweep.s_upper[worst_i].imag),
                worst,
            )
        )
    if alpha_fallback and (ray_failed or marginal):
        alphas = np.linspace(netN.algebraic_connectivity, 1.0, 16)
        windings = []
        ok = True
        vf = sweep.vertices_full
        for alpha in alphas:
            for i in range(vf.shape[1]):
                curve = alpha * vf[:, i]
                try:
                    w = winding_number(curve, -1.0)
                except (MarginalStabilityError, UndersampledContourError):
                    w = None
                windings.append({"alpha": float(alpha), "vertex": i, "winding": w})
                if w is None or w != 0:
                    ok = False
        diagnostics["alpha_fallback"] = {
            "heuristic": True,
            "all_zero": ok,
            "windings": windings,
        }
        if ray_failed and ok and not any(v.condition == "pole-gate" for v in violations):
            return Verdict(
                result="inconclusive",
                violated_conditions=tuple(violations),
                diagnostics=diagnostics,
            )
    if violations:
        return Verdict(
            result="unstable",
            violated_conditions=tuple(violations),
            diagnostics=diagnostics,
        )
    if marginal:
        return Verdict(
            result="inconclusive",
            violated_conditions=(
                Violation("fov-ray-marginal", diagnostics["worst_frequency_rad_s"], worst),
            ),
            diagnostics=diagnostics,
        )
    return Verdict(result="stable", diagnostics=diagnostics)


# ---------------------------------------------------------------------------
# decentralized per-agent blueprint
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecentralizedPolicy:
    """Network-wide policy every connecting agent is checked against: the
    D_r radius, a separating hyperplane (point + unit normal; "right of" is
    Re(conj(normal) * (z - point)) > 0), and the slowest admissible
    actuation delay."""

    r: float
    hyperplane_point: complex
    hyperplane_normal: complex
    tau_max: float
    R: float | None = None

    def __post_init__(self):
        if self.r <= 0 or self.tau_max <= 0:
            raise InvalidInputError("policy needs r > 0 and tau_max > 0")
        n = abs(self.hyperplane_normal)
        if n == 0:
            raise InvalidInputError("hyperplane normal must be nonzero")
        object.__setattr__(self, "hyperplane_normal", self.hyperplane_normal / n)

    def side(self, z) -> np.ndarray:
        """Signed distance to the hyperplane, positive on the admissible side."""
        return np.real(np.conj(self.hyperplane_normal) * (np.asarray(z) - self.hyperplane_point))


def decentralized_check(
    agent,
    gamma_bound: float,
    policy: DecentralizedPolicy,
    density: int = 200,
    pade_order: int = 3,
) -> Verdict:
    """Per-agent, network-independent screening (the decentralized
    blueprint): with gamma_bound an upper bound on the agent's network
    incidence, require

    1. no unstable agent poles inside the D_r-contour,
    2. the vertex gamma*g(s) never enters {Re < -1, Im > 0} along the
       positive-imaginary part of the contour, and
    3. gamma*g(jw) strictly on the designated hyperplane side for all
       w > pi/(2 tau_max).

    Every agent passing this against the same policy keeps the network free
    of unstable interarea modes faster than r.
    """
    if gamma_bound <= 0:
        raise InvalidInputError("gamma bound must be positive")
    g_rat = _agent_rational(agent, pade_order)
    R = policy.R
    if R is None:
        R = default_outer_radius([agent], [gamma_bound], pade_order)
        R = max(R, 100.0 * policy.r, 4.0 * math.pi / (2 * policy.tau_max))
    jw = _agent_axis_poles([agent], pade_order)
    contour = make_contour(
        "D_r", policy.r, R, density=density, jw_pole_list=jw,
        extra_axis_omegas=(math.pi / (2 * policy.tau_max),),
    )
    violations: list[Violation] = []
    try:
        inside = rhp_poles_in_region(g_rat, policy.r)
    except BoundaryAmbiguityError as exc:
        return Verdict(
            result="inconclusive",
            violated_conditions=(Violation("pole-on-contour", policy.r, str(exc)),),
            diagnostics={"check": "decentralized"},
        )
    if inside:
        violations.append(
            Violation(
                "unstable-poles-inside-contour",
                None,
                {"pole_moduli_rad_s": [abs(p) for p in inside]},
            )
        )

    # vertex along the positive-imaginary chain (everything but the closure)
    roles = np.array(contour.node_roles())
    keep = roles != "closure"
    pts = contour.upper_points()[keep]
    evaluate = _vertex_evaluator([agent], np.array([gamma_bound]))
    try:
        v = evaluate(pts)[:, 0]
    except PoleHitError as exc:
        raise ContourError(
            f"vertex evaluation hit a pole at s = {exc.s}; adjust the policy r"
        ) from None
    scale_tol = 1e-12 * (1.0 + np.abs(v))
    in_bad_region = (v.real <= -1.0) & (v.imag > scale_tol)
    if in_bad_region.any():
        first = int(np.argmax(in_bad_region))
        violations.append(
            Violation(
                "vertex-in-top-left-of-minus-one",
                float(pts[first].imag),
                complex(v[first]),
            )
        )

    axis_mask = keep.copy()
    axis_mask[keep] = roles[keep] == "axis"
    omega = contour.upper_points()[axis_mask].imag
    v_axis = evaluate(contour.upper_points()[axis_mask])[:, 0]
    fast = omega > math.pi / (2 * policy.tau_max)
    side = policy.side(v_axis[fast])
    if side.size and side.min() <= 0.0:
        first = int(np.argmax(side <= 0.0))
        violations.append(
            Violation(
                "vertex-off-hyperplane-side",
                float(omega[fast][first]),
                complex(v_axis[fast][first]),
            )
        )
    diagnostics = {
        "check": "decentralized",
        "gamma_bound": gamma_bound,
        "pi_over_2tau": math.pi / (2 * policy.tau_max),
        "min_hyperplane_margin": float(side.min()) if side.size else None,
        "vertex_axis_crossings": vertex_axis_crossings(
            agent, gamma_bound, max(policy.r, 1e-6), R
        ),
    }
    if violations:
        return Verdict(
            result="unstable",
            violated_conditions=tuple(violations),
            diagnostics=diagnostics,
        )
    return Verdict(result="stable", diagnostics=diagnostics)


def vertex_axis_crossings(
    agent,
    gamma: float,
    omega_lo: float,
    omega_hi: float,
    density: int = 400,
) -> list[dict]:
    """Real-axis crossings of the vertex gamma*g(jw) for w in [lo, hi]:
    sign changes of Im on a log grid, refined by root bracketing on the
    exact evaluator. Returns [{omega_rad_s, re}] sorted by frequency."""

    def im_vertex(w: float) -> float:
        s = 1j * w
        val = agent.g_value(s) if isinstance(agent, Agent) else agent(s)
        return float(np.imag(gamma * val))

    grid = np.geomspace(omega_lo, omega_hi, max(64, int(density * math.log10(omega_hi / omega_lo))))
    vals = np.array([im_vertex(w) for w in grid])
    out = []
    for i in np.where(np.diff(np.signbit(vals)))[0]:
        try:
            w_star = brentq(im_vertex, grid[i], grid[i + 1], xtol=1e-12, rtol=1e-12)
        except ValueError:
            continue
        s = 1j * w_star
        val = agent.g_value(s) if isinstance(agent, Agent) else agent(s)
        out.append({"omega_rad_s": float(w_star), "re": float(np.real(gamma * val))})
    return out
