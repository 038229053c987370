"""Proof driver and command line.

A proof run loads a frame, a box in frame coordinates and a section, maps
the set ``x0 + C*box`` once around with the rigorous Poincaré map and checks
that the image lands strictly inside the box again. With the convexity of
the box and the compactness of the map for return times of at least
``(n+1)*tau`` this is the inclusion hypothesis of Schauder's theorem, so the
box contains a periodic solution. The trajectory of the set is then compared
with a Fourier approximant in the C^k norms.

Subcommands::

    rigdde find  --config FILE [--out DIR]   regenerate frame, box, section
    rigdde prove --config FILE [--out DIR]   rigorous run, report and CSVs
    rigdde bench [--sizes 4,1 8,2 ...]        block vs dense DΦ products
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .interval import (
    Interval,
    format_interval,
    from_hex,
    icos,
    isin,
    matmul,
    matmul_fast,
    parse_decimal,
    pi_interval,
    to_hex,
)
from .integrator import step
from .lohner import BlockMatrix, block_mul, hull_of
from .pnrep import PnParams, PnVector, ck_norm_distance, eval_ck
from .poincare import RegularityGateViolated, Section, poincare_map
from .section_finder import (
    Frame,
    FloatIntegrator,
    build_candidate,
    build_frame,
    frame_coordinates,
    grow_candidate,
    monodromy_left_eigvec,
    newton_refine,
    radii_law,
    remainder_centres,
    shrink_to_invariant,
)
from .taylor_ad import RhsSpec, mg_rhs, parse_rhs

__all__ = [
    "ProofConfig",
    "FourierApprox",
    "ProofReport",
    "SchauderResult",
    "ProofError",
    "InclusionFailed",
    "fourier_eval",
    "fourier_derivatives",
    "fit_phase",
    "verify_schauder",
    "run_proof",
    "emit_outputs",
    "run_finder",
    "bench",
    "load_box",
    "save_box",
    "main",
    "DATA_DIR",
]

DATA_DIR = Path(__file__).resolve().parent / "data"


class ProofError(RuntimeError):
    """A proof stage failed; ``stage`` names it and ``cause`` is the original error."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage}: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


class InclusionFailed(RuntimeError):
    def __init__(self, index: int, margin: float, message: str):
        super().__init__(message)
        self.index = index
        self.margin = margin


# --------------------------------------------------------------------------
# configuration


def _parse_kv(text: str) -> dict:
    out = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {ln}: expected key = value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _parse_harmonics(text: str) -> list[tuple[int, str, str]]:
    """``"2 -0.0031 0.2398; 4 0.0165 -0.0043"`` -> ``[(2, "-0.0031", "0.2398"), ...]``."""
    out = []
    for chunk in text.split(";"):
        parts = chunk.split()
        if not parts:
            continue
        if len(parts) != 3:
            raise ValueError(f"harmonic needs 'j cos sin', got {chunk!r}")
        parse_decimal(parts[1])
        parse_decimal(parts[2])
        out.append((int(parts[0]), parts[1], parts[2]))
    return out


@dataclass
class ProofConfig:
    """Flat ``key = value`` description of one proof (and of its finder run)."""

    name: str
    beta: str
    gamma: str
    n_exp: int
    tau: str
    p: int
    n: int
    min_return: int
    box: str
    section: str
    frame: str
    xhat_constant: str
    xhat_harmonics: list
    rhs: str | None = None
    xhat_phase: str = "0"
    report: str = "report.txt"
    plot_values: str = "values.csv"
    plot_parametric: str = "parametric.csv"
    samples_per_cell: int = 4
    norm_subdiv: int = 4
    targets: dict = field(default_factory=dict)
    finder: dict = field(default_factory=dict)
    verbosity: int = 1
    base_dir: Path = Path(".")

    _KNOWN = {
        "name", "beta", "gamma", "n_exp", "tau", "p", "n", "min_return", "box", "section",
        "frame", "xhat_constant", "xhat_harmonics", "rhs", "xhat_phase", "report", "plot_values",
        "plot_parametric", "samples_per_cell", "norm_subdiv", "verbosity",
    }

    @classmethod
    def parse(cls, text: str, base_dir=".") -> "ProofConfig":
        kv = _parse_kv(text)
        targets = {k[len("target_"):]: v for k, v in kv.items() if k.startswith("target_")}
        finder = {k[len("find_"):]: v for k, v in kv.items() if k.startswith("find_")}
        unknown = [k for k in kv if k not in cls._KNOWN and not k.startswith(("target_", "find_"))]
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        required = ["name", "tau", "p", "n", "min_return", "box", "section", "frame",
                    "xhat_constant", "xhat_harmonics"]
        if "rhs" not in kv:
            required += ["beta", "gamma", "n_exp"]
        missing = [k for k in required if k not in kv]
        if missing:
            raise ValueError(f"missing config keys: {', '.join(missing)}")
        for key in ("beta", "gamma", "tau", "xhat_constant", "xhat_phase"):
            if key in kv and not (key == "xhat_phase" and kv[key] == "auto"):
                parse_decimal(kv[key])
        return cls(
            name=kv["name"],
            beta=kv.get("beta", "0"),
            gamma=kv.get("gamma", "0"),
            n_exp=int(kv.get("n_exp", "1")),
            tau=kv["tau"],
            p=int(kv["p"]),
            n=int(kv["n"]),
            min_return=int(kv["min_return"]),
            box=kv["box"],
            section=kv["section"],
            frame=kv["frame"],
            xhat_constant=kv["xhat_constant"],
            xhat_harmonics=_parse_harmonics(kv["xhat_harmonics"]),
            rhs=kv.get("rhs"),
            xhat_phase=kv.get("xhat_phase", "0"),
            report=kv.get("report", "report.txt"),
            plot_values=kv.get("plot_values", "values.csv"),
            plot_parametric=kv.get("plot_parametric", "parametric.csv"),
            samples_per_cell=int(kv.get("samples_per_cell", "4")),
            norm_subdiv=int(kv.get("norm_subdiv", "4")),
            targets=targets,
            finder=finder,
            verbosity=int(kv.get("verbosity", "1")),
            base_dir=Path(base_dir),
        )

    @classmethod
    def load(cls, path) -> "ProofConfig":
        path = Path(path)
        return cls.parse(path.read_text(), path.resolve().parent)

    def resolve(self, rel: str) -> Path:
        path = Path(rel)
        return path if path.is_absolute() else self.base_dir / path

    def rhs_spec(self) -> RhsSpec:
        if self.rhs:
            return parse_rhs(self.rhs)
        return mg_rhs(parse_decimal(self.beta), parse_decimal(self.gamma), self.n_exp)

    def params(self) -> PnParams:
        return PnParams(self.p, self.n, parse_decimal(self.tau))

    def fourier(self, period: Interval, phase: str | None = None) -> "FourierApprox":
        """The approximant; ``phase`` overrides the configured shift (needed for ``auto``)."""
        phase = self.xhat_phase if phase is None else phase
        return FourierApprox(self.xhat_constant, self.xhat_harmonics, period, "0" if phase == "auto" else phase)


# --------------------------------------------------------------------------
# Fourier approximant


class FourierApprox:
    """``c + Σ a_j cos(2πj(t+σ)/T) + b_j sin(2πj(t+σ)/T)`` with decimal coefficients.

    ``T`` is an interval (the proved period) and ``σ`` a decimal phase
    shift; a shifted periodic solution is again a periodic solution, so the
    shift only selects which member of the orbit is compared.
    """

    def __init__(self, constant: str, harmonics, period: Interval, phase: str = "0"):
        if period.contains_zero():
            raise ValueError("period must not contain 0")
        self.constant = constant
        self.harmonics = [(int(j), str(a), str(b)) for j, a, b in harmonics]
        self.period = period
        self.phase = phase
        self._c = parse_decimal(constant)
        self._shift = parse_decimal(phase)
        two_pi_over_T = pi_interval() * 2.0 / period
        self._terms = [
            (two_pi_over_T * float(j), parse_decimal(a), parse_decimal(b)) for j, a, b in self.harmonics
        ]

    def __repr__(self):
        return f"FourierApprox({len(self.harmonics)} harmonics, T={self.period})"


def fourier_derivatives(fx: FourierApprox, t, max_order: int) -> list[Interval]:
    """Enclosures of ``x̂^(d)(t)`` for ``d = 0..max_order`` (one sin/cos per harmonic)."""
    t = t if isinstance(t, Interval) else Interval(np.asarray(t, dtype=float))
    ts = t + fx._shift
    zero = t * 0.0
    out = [zero + fx._c] + [zero for _ in range(max_order)]
    for w, a, b in fx._terms:
        theta = w * ts
        c, s = icos(theta), isin(theta)
        # derivative d rotates (cos, sin) by d quarter turns
        cyc_cos = [c, -s, -c, s]
        cyc_sin = [s, c, -s, -c]
        wp = Interval(1.0)
        for d in range(max_order + 1):
            out[d] = out[d] + wp * (a * cyc_cos[d % 4] + b * cyc_sin[d % 4])
            wp = wp * w
    return out


def fourier_eval(fx: FourierApprox, t, deriv_order: int = 0) -> Interval:
    """Enclosure of ``x̂^(deriv_order)(t)``."""
    if not 0 <= deriv_order <= 4:
        raise ValueError("derivative order must be in 0..4")
    return fourier_derivatives(fx, t, deriv_order)[deriv_order]


def fit_phase(fx: FourierApprox, t, x, digits: int = 6) -> str:
    """Shift ``σ`` (as a decimal string) minimising ``max |x̂(t+σ) - x|`` over samples.

    Plain floating point: any shift is admissible, this only picks a good one.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    T = float(fx.period.mid())
    c = float(fx._c.mid())
    terms = [(2.0 * math.pi * j / T, float(a.mid()), float(b.mid()))
             for (j, _, _), (_, a, b) in zip(fx.harmonics, fx._terms)]

    def err(sig):
        ts = t[None, :] + np.asarray(sig, dtype=float)[:, None]
        v = np.full(ts.shape, c)
        for w, a, b in terms:
            v += a * np.cos(w * ts) + b * np.sin(w * ts)
        return np.max(np.abs(v - x[None, :]), axis=1)

    grid = np.linspace(0.0, T, 4001)
    best = float(grid[np.argmin(err(grid))])
    width = T / 4000
    for _ in range(3):
        grid = np.linspace(best - width, best + width, 201)
        best = float(grid[np.argmin(err(grid))])
        width /= 100
    return f"{best % T:.{digits}f}"


def _cached_approx(fx: FourierApprox, max_order: int):
    cache = {}

    def approx(times: Interval, j: int) -> Interval:
        key = (times.lo.tobytes(), times.hi.tobytes())
        if key not in cache:
            if len(cache) > 8:
                cache.clear()
            cache[key] = fourier_derivatives(fx, times, max_order)
        return cache[key][j]

    return approx


# --------------------------------------------------------------------------
# boxes in frame coordinates


def save_box(path, box: Interval, params: PnParams):
    lines = [f"{params.p} {params.n} {params.tau.lo.hex()} {params.tau.hi.hex()}"]
    for j in range(box.shape[0]):
        lines.append(f"{j + 1} {to_hex(box[j])}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_box(path) -> tuple[Interval, PnParams]:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    params = PnParams(int(rows[0][0]), int(rows[0][1]), from_hex(rows[0][2], rows[0][3]))
    lo = np.zeros(params.m)
    hi = np.zeros(params.m)
    for row in rows[1:]:
        j = int(row[0]) - 1
        lo[j], hi[j] = float.fromhex(row[1]), float.fromhex(row[2])
    if len(rows) - 1 != params.m:
        raise ValueError(f"expected {params.m} box entries, found {len(rows) - 1}")
    return Interval(lo, hi), params


# --------------------------------------------------------------------------
# Schauder inclusion


@dataclass
class SchauderResult:
    inclusion: bool
    margins: np.ndarray
    worst_index: int
    image_coords: Interval

    @property
    def min_margin(self) -> float:
        return float(self.margins[self.worst_index])


def verify_schauder(box: Interval, image, frame: Frame, q: int | None = None) -> SchauderResult:
    """Strict inclusion of the image in ``x0 + C*box`` checked in frame coordinates.

    ``image`` is a PoincareResult (then its return time is checked too) or a
    set. The frame coordinates of the image are enclosed with ``C^T`` plus a
    rigorous bound on ``C^-1 - C^T``. Coordinate 0 is the section normal:
    points of the section have it equal to 0 exactly and the box must be
    ``[0, 0]`` there, so it is not compared.
    """
    P = frame.params
    if hasattr(image, "image"):
        q = image.q if q is None else q
        image = image.image
    if q is not None and q < (P.n + 1) * P.p:
        raise RegularityGateViolated(f"return after {q} steps is shorter than (n+1)*tau")
    if box.lo[0] != 0.0 or box.hi[0] != 0.0:
        raise ValueError("the normal coordinate of the box must be [0, 0]")
    y = frame_coordinates(frame, image)
    lo_gap = y.lo[1:] - box.lo[1:]
    hi_gap = box.hi[1:] - y.hi[1:]
    # margins are rounded down; the verdict uses exact comparisons
    margins = np.full(P.m, np.inf)
    margins[1:] = np.nextafter(np.minimum(lo_gap, hi_gap), -np.inf)
    inside = bool(np.all(box.lo[1:] < y.lo[1:]) and np.all(y.hi[1:] < box.hi[1:]))
    worst = int(np.argmin(margins))
    if not inside:
        raise InclusionFailed(worst, float(margins[worst]),
                              f"image leaves the box at coordinate {worst}: {y[worst]} vs {box[worst]}")
    return SchauderResult(True, margins, worst, y)


# --------------------------------------------------------------------------
# proof run


@dataclass
class ProofReport:
    name: str
    period: Interval
    q: int
    eps: Interval
    transversality_lb: Interval
    inclusion: bool
    phase: str
    min_margin: float
    worst_index: int
    norm_bounds: list
    wall_time: float
    targets: list = field(default_factory=list)
    stage_times: dict = field(default_factory=dict)
    header: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.inclusion and all(ok for _, ok, _ in self.targets)


@dataclass
class ProofArtifacts:
    windows: list
    window_times: list
    fourier: FourierApprox
    result: object
    box: Interval
    frame: Frame


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except RegularityGateViolated:
        # surfaced unchanged: callers test for this type
        raise
    except Exception as exc:
        raise ProofError(name, exc) from exc


def _load_inputs(cfg: ProofConfig):
    P = cfg.params()
    frame = Frame.load(cfg.resolve(cfg.frame))
    box, Pb = load_box(cfg.resolve(cfg.box))
    sec = Section.load(cfg.resolve(cfg.section))
    if not (frame.params == P and Pb == P and sec.params == P):
        raise ValueError("frame, box and section must use the configured (p, n, tau)")
    ref = Section.from_frame(frame)
    same = (np.array_equal(ref.l.lo, sec.l.lo) and np.array_equal(ref.l.hi, sec.l.hi)
            and ref.a == sec.a)
    if not same:
        raise ValueError("section file does not match the section spanned by the frame")
    return P, frame, box, sec


def _window_samples(windows, wtimes):
    """Grid times and midpoint values of all windows (float)."""
    ts, xs = [], []
    for win, tw in zip(windows, wtimes):
        P = win.params
        h = float(P.h.mid())
        for i in range(P.p, 0, -1):
            ts.append(float(tw.mid()) - i * h)
            xs.append(float(win[i, 0].mid()))
    return np.array(ts), np.array(xs)


def _evaluate_targets(cfg: ProofConfig, rep: ProofReport) -> list:
    out = []
    t = cfg.targets
    if "period" in t:
        lo, hi = t["period"].split()
        target = Interval(parse_decimal(lo).lo, parse_decimal(hi).hi)
        out.append((f"period in [{lo}, {hi}]", bool(rep.period.subset(target)), format_interval(rep.period)))
    if "transversality" in t:
        bound = parse_decimal(t["transversality"])
        out.append((f"transversality >= {t['transversality']}", bool(rep.transversality_lb.lo >= bound.hi),
                    format_interval(rep.transversality_lb)))
    for k in range(len(rep.norm_bounds)):
        key = f"c{k}"
        if key in t:
            bound = parse_decimal(t[key])
            val = rep.norm_bounds[k]
            out.append((f"C^{k} distance <= {t[key]}", bool(val.hi <= bound.lo), format_interval(val)))
    return out


def run_proof(cfg: ProofConfig, log=None) -> tuple[ProofReport, ProofArtifacts]:
    """Load, map, verify inclusion, bound norms; raise :class:`ProofError` on failure."""
    t_start = time.perf_counter()
    times = {}
    say = log if log is not None else (lambda msg: None)

    t0 = time.perf_counter()
    P, frame, box, sec = _stage("load", _load_inputs, cfg)
    f = _stage("load", cfg.rhs_spec)
    V = _stage("load", build_candidate, frame, box)
    times["load"] = time.perf_counter() - t0
    say(f"[{cfg.name}] loaded: p={P.p} n={P.n} m={P.m}")

    t0 = time.perf_counter()
    res = _stage("poincare_map", poincare_map, V, sec, f, min_return=cfg.min_return,
                 keep_trajectory=True, log=say if cfg.verbosity > 1 else None)
    times["poincare_map"] = time.perf_counter() - t0
    say(f"[{cfg.name}] map: q={res.q} eps={format_interval(res.eps)} ({times['poincare_map']:.1f} s)")

    t0 = time.perf_counter()
    sch = _stage("schauder", verify_schauder, box, res, frame)
    times["schauder"] = time.perf_counter() - t0
    say(f"[{cfg.name}] inclusion holds, min margin {sch.min_margin:.3g} at coordinate {sch.worst_index}")

    t0 = time.perf_counter()
    period = res.t_S
    # windows [k*tau - tau, k*tau] at steps k*p, k >= 1, until [0, T] is
    # covered; every node of these windows was produced by integration
    tau = P.tau
    kmax = int(math.ceil(period.hi / tau.lo))
    traj = list(res.trajectory[: res.q + 1])
    s = res.last_step
    while len(traj) <= kmax * P.p:
        s = _stage("norms", step, s, f)
        traj.append(hull_of(s))
    windows = [PnVector(P, traj[k * P.p]) for k in range(1, kmax + 1)]
    wtimes = [tau * float(k) for k in range(1, kmax + 1)]
    phase = cfg.xhat_phase
    if phase == "auto":
        ts, xs = _window_samples(windows, wtimes)
        phase = fit_phase(cfg.fourier(period), ts, xs)
    fx = _stage("norms", cfg.fourier, period, phase)
    r = min(4, P.n)
    norms = _stage("norms", ck_norm_distance, windows, _cached_approx(fx, r + 1), r, wtimes, cfg.norm_subdiv)
    norms = [Interval(0.0, v.hi) for v in norms]
    times["norms"] = time.perf_counter() - t0
    say(f"[{cfg.name}] C^0 distance <= {norms[0].hi:.6g} ({times['norms']:.1f} s)")

    rep = ProofReport(
        name=cfg.name,
        period=period,
        q=res.q,
        eps=res.eps,
        transversality_lb=res.transversality_lb,
        inclusion=sch.inclusion,
        phase=phase,
        min_margin=sch.min_margin,
        worst_index=sch.worst_index,
        norm_bounds=norms,
        wall_time=time.perf_counter() - t_start,
        stage_times=times,
        header=_report_header(cfg),
    )
    rep.targets = _evaluate_targets(cfg, rep)
    return rep, ProofArtifacts(windows, wtimes, fx, res, box, frame)


# --------------------------------------------------------------------------
# outputs


def _report_header(cfg: ProofConfig) -> list:
    P = cfg.params()
    out = [f"# system: p = {P.p}, n = {P.n}, tau = {cfg.tau}, min_return = {cfg.min_return}"]
    if cfg.rhs:
        out.append(f"# rhs: {cfg.rhs}")
    else:
        out.append(f"# rhs: beta*z1/(1+z1^{cfg.n_exp}) - gamma*z2 with beta = {cfg.beta}, gamma = {cfg.gamma}")
        out.append("# naming: beta is the gain of the delayed term and gamma the decay rate of x(t);"
                   " the same pair is also quoted as gamma = 2, alpha = 1 in the literature")
    return out


def format_report(rep: ProofReport) -> str:
    lines = [f"# proof report: {rep.name}"] + list(rep.header)
    lines.append(f"PERIOD = {format_interval(rep.period)}")
    lines.append(f"Q = {rep.q}")
    lines.append(f"EPS = {format_interval(rep.eps)}")
    lines.append(f"EPS_DIAM = {format_interval(rep.eps.hi - Interval(rep.eps.lo))}")
    lines.append(f"TRANSVERSALITY = {format_interval(rep.transversality_lb)}")
    lines.append(f"INCLUSION = {'true' if rep.inclusion else 'false'}")
    lines.append(f"MIN_MARGIN = {rep.min_margin!r} (coordinate {rep.worst_index})")
    lines.append(f"XHAT_PHASE = {rep.phase}")
    for k, v in enumerate(rep.norm_bounds):
        lines.append(f"C{k} = {format_interval(v)}")
    for stage, sec in rep.stage_times.items():
        lines.append(f"TIME_{stage.upper()} = {sec:.2f} s")
    lines.append(f"WALL_TIME = {rep.wall_time:.2f} s")
    for name, ok, detail in rep.targets:
        lines.append(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    lines.append(f"{'PASS' if rep.passed else 'FAIL'} overall")
    return "\n".join(lines) + "\n"


def _sample_windows(orbit, times, fx, samples_per_cell):
    """Rows ``(t, lo, hi, xhat)`` on all windows, oldest sample first."""
    rows = []
    for win, tw in zip(orbit, times):
        P = win.params
        h = P.h
        for i in range(P.p, 0, -1):
            for s in range(samples_per_cell):
                eps = h * s / samples_per_cell
                eps = Interval(eps.lo, min(eps.hi, h.hi))
                x = eval_ck(win, i, 0, eps)
                t = tw - h * float(i) + eps
                rows.append((t, x))
    last, tl = orbit[-1], times[-1]
    rows.append((tl, last.value))
    xh = fourier_eval(fx, Interval.stack([t for t, _ in rows]), 0)
    return [(float(t.mid()), float(x.lo), float(x.hi), float(xh[j].mid())) for j, (t, x) in enumerate(rows)]


def emit_outputs(report: ProofReport, orbit, fx: FourierApprox, paths: dict, samples_per_cell: int = 4,
                 times=None) -> dict:
    """Write the report and plot CSVs.

    ``orbit`` is one PnVector or a list of consecutive windows (``times``
    gives their end times, default ``k*tau``). ``paths`` has keys
    ``report``, ``values`` and ``parametric``.
    """
    orbit = list(orbit) if isinstance(orbit, (list, tuple)) else [orbit]
    P = orbit[0].params
    if times is None:
        times = [P.tau * float(k) for k in range(len(orbit))]
    out = {}
    if paths.get("report"):
        Path(paths["report"]).write_text(format_report(report))
        out["report"] = paths["report"]
    rows = _sample_windows(orbit, times, fx, samples_per_cell)
    if paths.get("values"):
        with open(paths["values"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x_lo", "x_hi", "xhat"])
            for row in rows:
                w.writerow([repr(v) for v in row])
        out["values"] = paths["values"]
    if paths.get("parametric"):
        # x(t) against x(t - tau): one window is p*samples rows later
        lag = P.p * samples_per_cell
        with open(paths["parametric"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x_lo", "x_hi", "xd_lo", "xd_hi", "xhat", "xhat_delayed"])
            for j in range(lag, len(rows)):
                t, lo, hi, xh = rows[j]
                _, dlo, dhi, dxh = rows[j - lag]
                w.writerow([repr(v) for v in (t, lo, hi, dlo, dhi, xh, dxh)])
        out["parametric"] = paths["parametric"]
    return out


# --------------------------------------------------------------------------
# finder pipeline


@dataclass
class FinderReport:
    period: float
    minimal_period: float
    eigenvalue: complex
    return_eigenvalues: np.ndarray
    newton_iterations: int
    shrink_iterations: int
    image_q: int
    eps: Interval


def minimal_period(x, f: RhsSpec, params: PnParams, c: float, direction: float, period: float,
                   tol: float = 1e-6) -> float:
    """Shortest return time to ``x(0) = c`` at which the whole state repeats."""
    fi = FloatIntegrator(params, f)
    y = np.array(x, dtype=float)
    y[params.remainder_positions] = 0.0
    start = y.copy()
    cols = np.concatenate([[0], params.coeff_positions[:, 0]])
    t = 0.0
    while t < period - 1e-3:
        # the state starts on the section; min_steps=2 skips re-detecting
        # that crossing at offset ~0 in the first step
        y, dt = fi.return_map(y, c, direction, min_steps=2)
        t += dt
        if np.max(np.abs(y[cols] - start[cols])) < tol:
            return t
    return period


def run_finder(cfg: ProofConfig, out_dir=None, log=None) -> FinderReport:
    """Regenerate the frame, box and section of a configuration.

    Finder settings are ``find_*`` keys: ``find_x_init`` (constant initial
    function), ``find_t_transient``, ``find_fd_step``, ``find_radii`` (three
    numbers for :func:`radii_law`), ``find_inflate`` and ``find_floor``.
    """
    say = log if log is not None else (lambda msg: None)
    fs = cfg.finder
    P = cfg.params()
    f = cfg.rhs_spec()
    fi = FloatIntegrator(P, f)
    x = fi.flow(fi.constant(float(fs.get("x_init", "1.1"))), float(fs.get("t_transient", "200")))
    nr = newton_refine(x, f, P, fd_step=float(fs.get("fd_step", "1e-7")), log=say)
    say(f"period {nr.period!r} after {nr.iterations} Newton steps")
    mono = monodromy_left_eigvec(nr.x, f, nr.period, P, fd_step=float(fs.get("fd_step", "1e-7")))
    tmin = minimal_period(nr.x, f, P, nr.section_value, nr.direction, nr.period)
    eig_src = mono
    if tmin < nr.period - 1e-6:
        eig_src = monodromy_left_eigvec(nr.x, f, tmin, P, fd_step=float(fs.get("fd_step", "1e-7")))
    say(f"minimal period {tmin!r}; leading return eigenvalues {np.round(eig_src.return_eigenvalues[:4], 4)}")
    x0 = remainder_centres(nr.x, P)
    frame = build_frame(mono.l_hat, x0, P)
    sec = Section.from_frame(frame)

    def pmap(V):
        return poincare_map(V, sec, f, min_return=cfg.min_return)

    radii = [float(v) for v in fs.get("radii", "1e-7 1 1e-7").split()]
    V, r0, res = grow_candidate(frame, pmap, radii_law(P, *radii), inflate=float(fs.get("inflate", "2")),
                                floor=float(fs.get("floor", "1e-7")), log=say)
    sr = shrink_to_invariant(V, frame, pmap, log=say, box=r0)
    out = Path(out_dir) if out_dir is not None else cfg.base_dir
    out.mkdir(parents=True, exist_ok=True)
    frame.save(out / Path(cfg.frame).name)
    save_box(out / Path(cfg.box).name, sr.r0, P)
    sec.save(out / Path(cfg.section).name)
    say(f"wrote {cfg.frame}, {cfg.box}, {cfg.section} to {out}")
    return FinderReport(nr.period, tmin, eig_src.eigenvalue, eig_src.return_eigenvalues, nr.iterations,
                        sr.iterations, sr.result.q, sr.result.eps)


# --------------------------------------------------------------------------
# benchmark


def bench(sizes=((4, 1), (8, 2), (32, 4), (128, 4)), seed: int = 0, repeat: int = 1, exact_limit: int = 200,
          log=None) -> list[dict]:
    """Time ``[A]*C`` for a random step derivative ``A`` and dense ``C``.

    The block product is timed against the dense BLAS (mid-rad) product,
    the fastest dense route available, which gives ``speedup``. For
    ``m <= exact_limit`` the block result is also compared bit for bit with
    the dense exact product, which uses the same rounding; ``identical`` is
    None where that comparison is skipped (it is slow for large ``m``).
    """
    rng = np.random.default_rng(seed)
    out = []
    for p, n in sizes:
        P = PnParams(p, n, Interval(2.0))
        a = rng.normal(size=n + 2)
        b = rng.normal(size=(n + 2, n + 1))
        A = BlockMatrix(P, Interval(a, a + np.abs(a) * 1e-9), Interval(b, b + np.abs(b) * 1e-9))
        C = rng.normal(size=(P.m, P.m))
        D = A.to_dense()
        tb = td = math.inf
        for _ in range(repeat):
            t0 = time.perf_counter()
            rb = block_mul(A, C)
            tb = min(tb, time.perf_counter() - t0)
            t0 = time.perf_counter()
            matmul_fast(D, C)
            td = min(td, time.perf_counter() - t0)
        same = None
        if P.m <= exact_limit:
            rd = matmul(D, Interval.point(C))
            same = bool(np.array_equal(rb.lo, rd.lo) and np.array_equal(rb.hi, rd.hi))
        rec = {"p": p, "n": n, "m": P.m, "block_s": tb, "dense_s": td, "speedup": td / tb, "identical": same}
        if log is not None:
            log(f"(p,n)=({p},{n}) m={P.m}: block {tb:.4f} s, dense {td:.4f} s, "
                f"speedup {td / tb:.1f}x, identical={same}")
        out.append(rec)
    return out


# --------------------------------------------------------------------------
# command line


def _cmd_prove(args) -> int:
    cfg = ProofConfig.load(args.config)
    out = Path(args.out) if args.out else Path.cwd()
    out.mkdir(parents=True, exist_ok=True)
    try:
        rep, art = run_proof(cfg, log=print if cfg.verbosity > 0 else None)
    except RegularityGateViolated as exc:
        print(f"FAILED at stage poincare_map: RegularityGateViolated: {exc}", file=sys.stderr)
        return 2
    except ProofError as exc:
        print(f"FAILED at stage {exc.stage}: {type(exc.cause).__name__}: {exc.cause}", file=sys.stderr)
        return 2
    paths = {"report": out / cfg.report, "values": out / cfg.plot_values, "parametric": out / cfg.plot_parametric}
    emit_outputs(rep, art.windows, art.fourier, paths, cfg.samples_per_cell, art.window_times)
    print(format_report(rep), end="")
    return 0 if rep.passed else 1


def _cmd_find(args) -> int:
    cfg = ProofConfig.load(args.config)
    rep = run_finder(cfg, args.out, log=print)
    print(f"period = {rep.period!r}")
    print(f"minimal period = {rep.minimal_period!r}")
    print("return eigenvalue magnitudes = " + " ".join(f"{v:.4f}" for v in rep.return_eigenvalues[:10]))
    print(f"invariant after {rep.shrink_iterations} shrink rounds, q = {rep.image_q}, eps = {rep.eps}")
    return 0


def _cmd_bench(args) -> int:
    sizes = [tuple(int(v) for v in s.split(",")) for s in args.sizes]
    recs = bench(sizes, repeat=args.repeat, exact_limit=args.exact_limit, log=print)
    return 0 if all(r["identical"] is not False for r in recs) else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="rigdde", description="Rigorous DDE integration and periodic orbit proofs")
    sub = parser.add_subparsers(dest="command", required=True)
    pp = sub.add_parser("prove", help="run a rigorous proof from a config file")
    pp.add_argument("--config", required=True)
    pp.add_argument("--out", default=None, help="directory for the report and CSVs (default: cwd)")
    pp.set_defaults(func=_cmd_prove)
    pf = sub.add_parser("find", help="regenerate frame, box and section for a config")
    pf.add_argument("--config", required=True)
    pf.add_argument("--out", default=None, help="directory for the data files (default: next to the config)")
    pf.set_defaults(func=_cmd_find)
    pb = sub.add_parser("bench", help="time block vs dense products of the step derivative")
    pb.add_argument("--sizes", nargs="+", default=["4,1", "8,2", "32,4", "128,4"])
    pb.add_argument("--repeat", type=int, default=1)
    pb.add_argument("--exact-limit", type=int, default=200,
                    help="compare bit for bit with the dense exact product up to this dimension")
    pb.set_defaults(func=_cmd_bench)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
