"""Gate-count registry for every method/representation pairing.

Each entry is a symbolic record: exponents on d and on 1/eps (each of the
form base + coef/ell, or alpha for the finite-difference QLSA cells), an
optional log factor and the sampling-factor symbol.  Suppressed constants
are 1, logs are base 2 and floored at 1 so that the polynomial part of a
formula is never annihilated near eps = 1.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import ValidationError
from .observables import c_observable

DEFAULT_ALPHA = 4.0
KINDS = ("subroutine", "observable")
REPRESENTATIONS = ("liouville_rep", "kvn_rep", "liouville_eq", "schrodinger_eq")
COLUMNS = ("sim", "spectral_qlsa", "fd_qlsa")


@dataclass(frozen=True)
class Exponent:
    """base + per_ell / ell, or alpha + base when ``alpha`` is set."""

    base: float = 0.0
    per_ell: float = 0.0
    alpha: bool = False

    def value(self, ell: float, alpha: float) -> float:
        inv = 0.0 if math.isinf(ell) else 1.0 / ell
        return (alpha if self.alpha else 0.0) + self.base + self.per_ell * inv

    def render(self) -> str:
        parts = []
        if self.alpha:
            parts.append("alpha")
        if self.base or not (self.alpha or self.per_ell):
            parts.append(f"{self.base:g}")
        if self.per_ell:
            parts.append(f"{self.per_ell:g}/l")
        return "+".join(parts)


@dataclass(frozen=True)
class LogTerm:
    """log2(d^{d_exp} / eps^{eps_exp}), floored at 1."""

    d_exp: Exponent = Exponent()
    eps_exp: Exponent = Exponent(1.0)

    def value(self, d: float, eps: float, ell: float, alpha: float) -> float:
        arg = self.d_exp.value(ell, alpha) * math.log2(d) - self.eps_exp.value(ell, alpha) * math.log2(eps)
        return max(1.0, arg)

    def render(self) -> str:
        num = "1" if self.d_exp == Exponent() else f"d^({self.d_exp.render()})"
        return f"log2({num}/eps^({self.eps_exp.render()}))"


@dataclass(frozen=True)
class ComplexityEntry:
    method: str
    kind: str
    representation: str
    column: str
    d_exp: Exponent
    eps_exp: Exponent
    log: LogTerm | None = None
    factor: str | None = None
    factor_power: int = 0
    c_O: bool = False
    anchor: str = ""
    note: str = ""

    def __post_init__(self):
        if self.kind not in KINDS + ("wavefunction",):
            raise ValidationError(f"unknown entry kind {self.kind!r}", "kind")

    @property
    def key(self) -> tuple[str, str]:
        return (self.method, self.kind)

    @property
    def uses_alpha(self) -> bool:
        return self.d_exp.alpha or self.eps_exp.alpha

    def render(self) -> str:
        pre = ""
        if self.c_O:
            pre += "c_O*"
        if self.factor:
            pre += f"{self.factor}^{self.factor_power}*"
        s = f"{pre}d^({self.d_exp.render()})/eps^({self.eps_exp.render()})"
        if self.log is not None:
            s += "*" + self.log.render()
        return s


def _check_params(d, eps, ell, alpha):
    if not (isinstance(d, (int, float)) and d >= 1):
        raise ValidationError(f"d must be >= 1, got {d}", "d")
    if not (0 < eps <= 1):
        raise ValidationError(f"eps must lie in (0, 1], got {eps}", "eps")
    if not ell >= 1:
        raise ValidationError(f"ell must be >= 1, got {ell}", "ell")
    if not alpha >= 3:
        raise ValidationError(f"alpha must be >= 3, got {alpha}", "alpha")


def evaluate(entry: ComplexityEntry, d: float, eps: float, ell: float = math.inf,
             factors: Mapping[str, float] | None = None, alpha: float = DEFAULT_ALPHA,
             observable: str = "density") -> float:
    """Numeric value with constants 1 and logs base 2.

    ``factors`` maps sampling symbols (n_L, n_H, N_u0) to values; missing
    symbols count as 1.  ``observable`` selects c_O for Schrodinger cells.
    """
    _check_params(d, eps, ell, alpha)
    factors = dict(factors or {})
    val = d ** entry.d_exp.value(ell, alpha) / eps ** entry.eps_exp.value(ell, alpha)
    if entry.log is not None:
        val *= entry.log.value(d, eps, ell, alpha)
    if entry.factor:
        f = float(factors.get(entry.factor, 1.0))
        if f < 0:
            raise ValidationError(f"sampling factor {entry.factor} must be nonnegative", entry.factor)
        val *= f ** entry.factor_power
    if entry.c_O:
        val *= c_observable(observable, d, eps, ell)
    return float(val)


# --- registry ----------------------------------------------------------------------

E = Exponent
_SIM_LOG = LogTerm(E(0, 1), E(1, 2))          # log(d^{1/l} / eps^{1+2/l})
_SCHR_OBS_LOG = LogTerm(E(0, 1), E(0.5, 2))   # log(d^{1/l} / eps^{1/2+2/l})
_SCHR_WF_LOG = LogTerm(E(0, 1), E(0.5, 2.5))  # log(d^{1/l} / eps^{1/2+5/(2l)})
_FD_LOG = LogTerm(E(0), E(1))                 # log(1/eps)

_FACTOR = {"liouville_rep": ("n_L", 4), "kvn_rep": ("n_L", 2),
           "liouville_eq": ("n_H", 4), "schrodinger_eq": ("N_u0", 4)}

_PREFIX = {"liouville_rep": "liouville", "kvn_rep": "kvn",
           "liouville_eq": "liouville_phase", "schrodinger_eq": "schrodinger"}

# representation -> column -> (d exponent, eps exponent, log) of the subroutine cell
_SUBROUTINES = {
    "liouville_rep": {
        "sim": (E(2, 2), E(2, 4), _SIM_LOG),
        "spectral_qlsa": (E(3, 2), E(4, 4), None),
        "fd_qlsa": (E(0, 0, True), E(3), _FD_LOG),
    },
    "kvn_rep": {
        "sim": (E(2, 2), E(2, 4), _SIM_LOG),
        "spectral_qlsa": (E(3, 2), E(2, 4), None),
        "fd_qlsa": (E(0, 0, True), E(3), _FD_LOG),
    },
    "liouville_eq": {
        "sim": (E(1), E(2), _SIM_LOG),
        "spectral_qlsa": (E(2, 2), E(2, 4), None),
        "fd_qlsa": (E(0, 0, True), E(3), _FD_LOG),
    },
    "schrodinger_eq": {
        "sim": (E(1), E(1), _SCHR_OBS_LOG),
        "spectral_qlsa": (E(2, 2), E(1, 4), None),
    },
}

_SECTION = {"liouville_rep": "nonlinear ODEs", "kvn_rep": "nonlinear ODEs",
            "liouville_eq": "Hamilton-Jacobi PDEs", "schrodinger_eq": "Hamilton-Jacobi PDEs"}


def _build_registry() -> dict[tuple[str, str], ComplexityEntry]:
    reg = {}
    for rep, cols in _SUBROUTINES.items():
        sym, power = _FACTOR[rep]
        for col, (dx, ex, log) in cols.items():
            method = f"{_PREFIX[rep]}_{col}"
            anchor = f"summary table / {_SECTION[rep]} / {rep} / {col}"
            sub = ComplexityEntry(method, "subroutine", rep, col, dx, ex, log, anchor=anchor + " / subroutine",
                                  note="alpha parameterised, default 4" if dx.alpha else "")
            # sampling multiplies by factor^power / eps^2
            obs = ComplexityEntry(method, "observable", rep, col, dx, E(ex.base + 2, ex.per_ell, ex.alpha), log,
                                  factor=sym, factor_power=power, c_O=(rep == "schrodinger_eq"),
                                  anchor=anchor + " / observable", note=sub.note)
            reg[sub.key] = sub
            reg[obs.key] = obs
    wf = ComplexityEntry("schrodinger_sim_wavefunction", "wavefunction", "schrodinger_eq", "sim",
                         E(1), E(1.5), _SCHR_WF_LOG,
                         anchor="Schrodinger splitting theorem / wavefunction gate count",
                         note="wavefunction accuracy eps with hbar ~ sqrt(eps)")
    reg[("schrodinger_sim_wavefunction", "subroutine")] = wf
    return reg


REGISTRY: dict[tuple[str, str], ComplexityEntry] = _build_registry()

ALIASES = {
    "liouville_fd_qlsa": "liouville_fd_qlsa",
    "kvn_spectral_sim": "kvn_sim",
    "schrodinger_sim": "schrodinger_sim",
    "liouville_phase_sim": "liouville_phase_sim",
    "hje_sim": "liouville_phase_sim",
}


def table_cells() -> list[tuple[str, str, str]]:
    """(representation, column, kind) for every non-empty summary-table cell."""
    return [(rep, col, kind) for rep in REPRESENTATIONS for col in COLUMNS
            if col in _SUBROUTINES[rep] for kind in KINDS]


def lookup(method: str, kind: str = "subroutine") -> ComplexityEntry:
    name = ALIASES.get(method, method)
    try:
        return REGISTRY[(name, kind)]
    except KeyError:
        raise ValidationError(f"no complexity entry for {method!r} ({kind})", "method") from None


def cell(representation: str, column: str, kind: str) -> ComplexityEntry | None:
    for e in REGISTRY.values():
        if (e.representation, e.column, e.kind) == (representation, column, kind):
            return e
    return None


def entries(kind: str | None = None) -> list[ComplexityEntry]:
    return [e for e in REGISTRY.values() if kind is None or e.kind == kind]


# --- comparison --------------------------------------------------------------------

@dataclass
class CompareRow:
    d: float
    eps: float
    values: dict[str, float]
    best: str
    sim_dominates: bool


@dataclass
class CompareTable:
    rows: list[CompareRow]
    methods: list[str]
    ell: float
    alpha: float
    crossovers: list[dict] = field(default_factory=list)

    def to_markdown(self) -> str:
        head = "| d | eps | " + " | ".join(self.methods) + " | best |"
        sep = "|" + "---|" * (len(self.methods) + 3)
        lines = [head, sep]
        for r in self.rows:
            cells = " | ".join(f"{r.values[m]:.3e}" for m in self.methods)
            lines.append(f"| {r.d:g} | {r.eps:g} | {cells} | {r.best} |")
        lines.append("")
        lines.append(f"ell = {self.ell:g}, alpha = {self.alpha:g}")
        for c in self.crossovers:
            lines.append(f"crossover at d={c['d']:g}: {c['cheaper_before']} -> {c['cheaper_after']} "
                         f"between eps={c['eps_from']:g} and eps={c['eps_to']:g}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["d", "eps"] + self.methods + ["best"])
        for r in self.rows:
            w.writerow([repr(float(r.d)), repr(float(r.eps))] + [format(r.values[m], ".17g") for m in self.methods]
                       + [r.best])
        return buf.getvalue()


def _label(e: ComplexityEntry) -> str:
    return e.method if e.kind == "subroutine" else f"{e.method}:{e.kind}"


def compare_table(selected: Sequence[ComplexityEntry], grid: Iterable[tuple[float, float]], ell: float = math.inf,
                  factors: Mapping[str, float] | None = None, alpha: float = DEFAULT_ALPHA,
                  observable: str = "density") -> CompareTable:
    """Evaluate ``selected`` over (d, eps) pairs and flag the cheapest per cell.

    ``sim_dominates`` is True when, within each representation present, the
    simulation entry is no more expensive than the QLSA entries.
    """
    selected = list(selected)
    labels = [_label(e) for e in selected]
    rows = []
    for d, eps in grid:
        vals = {lab: evaluate(e, d, eps, ell, factors, alpha, observable) for lab, e in zip(labels, selected)}
        best = min(labels, key=lambda k: (vals[k], k))
        dom = True
        for e, lab in zip(selected, labels):
            if e.column != "sim":
                continue
            for o, olab in zip(selected, labels):
                if o.representation == e.representation and o.kind == e.kind and o.column != "sim":
                    dom &= vals[lab] <= vals[olab]
        rows.append(CompareRow(float(d), float(eps), vals, best, dom))
    crossovers = []
    by_d: dict[float, list[CompareRow]] = {}
    for r in rows:
        by_d.setdefault(r.d, []).append(r)
    for d, rs in by_d.items():
        rs = sorted(rs, key=lambda r: -r.eps)
        for a, b in zip(rs, rs[1:]):
            if a.best != b.best:
                crossovers.append({"d": d, "eps_from": a.eps, "eps_to": b.eps,
                                   "cheaper_before": a.best, "cheaper_after": b.best})
    return CompareTable(rows, labels, ell, alpha, crossovers)


def full_table(d: float, eps: float, ell: float = math.inf, factors: Mapping[str, float] | None = None,
               alpha: float = DEFAULT_ALPHA, observable: str = "density") -> list[dict]:
    """One record per summary-table entry with its formula, value and anchor."""
    out = []
    for rep, col, kind in table_cells():
        e = cell(rep, col, kind)
        out.append({"representation": rep, "column": col, "kind": kind, "method": e.method,
                    "formula": e.render(), "value": evaluate(e, d, eps, ell, factors, alpha, observable),
                    "alpha_flag": e.uses_alpha, "anchor": e.anchor})
    return out


def table_markdown(d: float, eps: float, ell: float = math.inf, factors: Mapping[str, float] | None = None,
                   alpha: float = DEFAULT_ALPHA, observable: str = "density") -> str:
    recs = full_table(d, eps, ell, factors, alpha, observable)
    lines = [f"Gate-count estimates at d={d:g}, eps={eps:g}, ell={ell:g}, alpha={alpha:g}",
             "", "| representation | column | kind | formula | value | anchor |", "|---|---|---|---|---|---|"]
    for r in recs:
        flag = " (alpha)" if r["alpha_flag"] else ""
        lines.append(f"| {r['representation']} | {r['column']} | {r['kind']} | `{r['formula']}` | "
                     f"{r['value']:.4e}{flag} | {r['anchor']} |")
    lines.append("")
    lines.append("Constants set to 1; logs base 2 floored at 1; FD QLSA cells use d^alpha.")
    return "\n".join(lines) + "\n"


def table_csv(d: float, eps: float, ell: float = math.inf, factors: Mapping[str, float] | None = None,
              alpha: float = DEFAULT_ALPHA, observable: str = "density") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["representation", "column", "kind", "method", "formula", "value", "alpha_flag", "anchor"])
    for r in full_table(d, eps, ell, factors, alpha, observable):
        w.writerow([r["representation"], r["column"], r["kind"], r["method"], r["formula"],
                    format(r["value"], ".17g"), int(r["alpha_flag"]), r["anchor"]])
    return buf.getvalue()


# --- copy cost ---------------------------------------------------------------------

@dataclass(frozen=True)
class CopyCostReport:
    steps: int
    cumulative: float
    per_step_factor: float
    min_success_prob: float

    def to_dict(self) -> dict:
        return asdict(self)


def copy_cost(ledger) -> CopyCostReport:
    """Copies of the initial state needed by the post-selected splitting.

    ``per_step_factor`` is the geometric mean C with C^steps = cumulative.
    """
    probs = list(getattr(ledger, "per_step_success_prob", []))
    if not probs:
        raise ValidationError("copy ledger is empty", "ledger")
    if any(not (0 < p <= 1) for p in probs):
        raise ValidationError("success probabilities must lie in (0, 1]", "ledger")
    log_total = -sum(math.log(p) for p in probs)
    cumulative = 1.0
    for p in probs:
        cumulative /= p
    return CopyCostReport(len(probs), cumulative, math.exp(log_total / len(probs)), min(probs))
