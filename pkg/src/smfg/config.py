"""JSON run configurations.

A configuration names the model, the grid, the data as expressions in x (and
y), the flow and its integrator settings::

    {
      "variant": "standard",
      "dimension": 1,
      "n": 100,
      "V": "sin(2*pi*x)",
      "flow": "gradient",
      "u0": "0.2*cos(2*pi*x)",
      "flow_config": {"t_max": 1}
    }

Two-dimensional runs give the potential as ``W`` instead of ``V`` and have no
drift.  Unknown keys are rejected; every schema error carries the JSON
pointer of the offending field.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .core_grid import PeriodicGrid1D, PeriodicGrid2D
from .exact import ExactSolution, exact_2d_separable, exact_congestion, exact_gradient_drift, exact_zero_drift
from .expr import ExprDomainError, ExprSyntaxError, compile_expression
from .hamiltonian import ProblemData, Variant
from .integrators import FlowConfig, Integrator

FLOWS = ("gradient", "monotone")


class ConfigError(ValueError):
    """Invalid configuration; ``pointer`` is a JSON pointer to the field."""

    def __init__(self, message: str, pointer: str = ""):
        self.pointer = pointer
        super().__init__(f"{pointer or '/'}: {message}")


@dataclass(frozen=True)
class RunSpec:
    variant: Variant
    dimension: int
    n: int
    potential: str
    flow: str
    flow_config: FlowConfig
    drift: str | None = None
    u0: str = "0"
    m0: str | None = None
    psi: str | None = None
    output: str | None = None
    compare_exact: bool | None = None  # None: compare when an oracle exists
    name: str | None = None

    @property
    def variables(self) -> tuple[str, ...]:
        return ("x",) if self.dimension == 1 else ("x", "y")

    def grid(self):
        return PeriodicGrid1D(self.n) if self.dimension == 1 else PeriodicGrid2D(self.n)

    def function(self, src: str) -> Callable:
        return compile_expression(src, self.variables)

    def problem(self) -> ProblemData:
        grid = self.grid()
        b = None if self.drift is None else self.function(self.drift)
        return ProblemData.from_functions(grid, self.function(self.potential), b, self.variant)

    def initial_state(self) -> tuple[np.ndarray | None, np.ndarray]:
        grid = self.grid()
        u0 = grid.sample(self.function(self.u0))
        m0 = None if self.m0 is None else grid.sample(self.function(self.m0))
        return m0, u0

    def oracle(self) -> ExactSolution | None:
        """The closed-form solution of this problem, if one is known."""
        grid = self.grid()
        V = self.function(self.potential)
        if self.dimension == 2:
            V1 = self.separable_potential()
            return None if V1 is None else exact_2d_separable(V1, grid)
        if self.variant is Variant.CONGESTION:
            return exact_congestion(V, grid)
        if self.drift is None:
            return exact_zero_drift(V, grid)
        if self.psi is not None:
            return exact_gradient_drift(self.function(self.psi), self.function(self.drift), V, grid)
        return None

    def separable_potential(self) -> Callable | None:
        """For 2-D runs, V with W(x, y) = V(x) + V(y), or None when W is not of that form."""
        if self.dimension != 2:
            return None
        return _separable_part(self.function(self.potential), self.grid())

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "variant": self.variant.value,
            "dimension": self.dimension,
            "n": self.n,
            ("V" if self.dimension == 1 else "W"): self.potential,
            "b": self.drift,
            "psi": self.psi,
            "flow": self.flow,
            "u0": self.u0,
            "m0": self.m0,
            "output": self.output,
            "compare_exact": self.compare_exact,
            "flow_config": {
                k: (v.value if isinstance(v, Integrator) else v)
                for k, v in dataclasses.asdict(self.flow_config).items()
            },
        }
        return {k: v for k, v in out.items() if v is not None}


def _separable_part(W: Callable, grid: PeriodicGrid2D) -> Callable | None:
    """V with W(x, y) = V(x) + V(y) on the grid nodes, or None."""
    x = grid.nodes[0][:, 0]
    w00 = float(np.asarray(W(np.array(1.0), np.array(1.0))))

    def V(s):
        return W(s, np.ones_like(s)) - 0.5 * w00

    values = grid.sample(W)
    if np.allclose(values, V(x)[:, None] + V(x)[None, :], rtol=0, atol=1e-12 * max(1.0, np.abs(values).max())):
        return V
    return None


_TOP_KEYS = {"name", "variant", "dimension", "n", "V", "W", "b", "psi", "flow", "u0", "m0",
             "output", "compare_exact", "flow_config"}
_FLOW_KEYS = {f.name for f in dataclasses.fields(FlowConfig)}


def _expect(cond: bool, message: str, pointer: str):
    if not cond:
        raise ConfigError(message, pointer)


def _expression(doc: dict, key: str, variables, required: bool = False) -> str | None:
    pointer = f"/{key}"
    if key not in doc or doc[key] is None:
        _expect(not required, f"missing required field '{key}'", pointer)
        return None
    src = doc[key]
    if isinstance(src, (int, float)) and not isinstance(src, bool):
        src = repr(float(src))
    _expect(isinstance(src, str), "expected an expression string", pointer)
    try:
        compile_expression(src, variables)
    except ExprSyntaxError as exc:
        raise ConfigError(f"cannot parse expression: {exc}", pointer) from exc
    return src


def _number(doc: dict, key: str, pointer: str, *, integer: bool = False):
    value = doc[key]
    ok = isinstance(value, int) if integer else isinstance(value, (int, float))
    _expect(ok and not isinstance(value, bool), f"expected {'an integer' if integer else 'a number'}", pointer)
    _expect(math.isfinite(value), "expected a finite number", pointer)
    return value


def parse_config(doc) -> RunSpec:
    """Validate a decoded JSON document and build a ``RunSpec``."""
    _expect(isinstance(doc, dict), "configuration must be a JSON object", "")
    for key in doc:
        _expect(key in _TOP_KEYS, f"unknown key '{key}'", f"/{key}")

    variant = doc.get("variant", "standard")
    try:
        variant = Variant(variant)
    except ValueError:
        raise ConfigError(f"variant must be one of {[v.value for v in Variant]}", "/variant") from None

    dimension = doc.get("dimension", 1)
    _expect(dimension in (1, 2) and not isinstance(dimension, bool), "dimension must be 1 or 2", "/dimension")
    _expect("n" in doc, "missing required field 'n'", "/n")
    n = _number(doc, "n", "/n", integer=True)
    _expect(n >= 3, "n must be at least 3", "/n")
    variables = ("x",) if dimension == 1 else ("x", "y")

    if dimension == 1:
        _expect("W" not in doc, "W is for 2-D runs; use V", "/W")
        potential = _expression(doc, "V", variables, required=True)
    else:
        _expect("V" not in doc, "2-D runs take the potential as W", "/V")
        potential = _expression(doc, "W", variables, required=True)

    drift = _expression(doc, "b", variables)
    if drift is not None:
        _expect(variant is Variant.STANDARD, "the congestion model has no drift", "/b")
        _expect(dimension == 1, "2-D runs have no drift", "/b")
    psi = _expression(doc, "psi", variables)
    if psi is not None:
        _expect(drift is not None, "psi only makes sense together with a drift b = psi'", "/psi")

    flow = doc.get("flow")
    _expect(flow in FLOWS, f"flow must be one of {list(FLOWS)}", "/flow")
    if flow == "gradient":
        _expect(variant is Variant.STANDARD, "the gradient flow needs the standard variant", "/flow")
    u0 = _expression(doc, "u0", variables) or "0"
    m0 = _expression(doc, "m0", variables, required=(flow == "monotone"))

    output = doc.get("output")
    _expect(output is None or isinstance(output, str), "expected a path string", "/output")
    compare = doc.get("compare_exact")
    _expect(compare is None or isinstance(compare, bool), "expected true, false or null", "/compare_exact")
    name = doc.get("name")
    _expect(name is None or isinstance(name, str), "expected a string", "/name")

    fc = doc.get("flow_config")
    _expect(isinstance(fc, dict), "missing required object 'flow_config'", "/flow_config")
    for key in fc:
        _expect(key in _FLOW_KEYS, f"unknown key '{key}'", f"/flow_config/{key}")
    _expect("t_max" in fc, "missing required field 't_max'", "/flow_config/t_max")
    kwargs = {}
    for key, value in fc.items():
        pointer = f"/flow_config/{key}"
        if key == "integrator":
            try:
                kwargs[key] = Integrator(value)
            except ValueError:
                raise ConfigError(f"integrator must be one of {[i.value for i in Integrator]}", pointer) from None
        elif value is None and key in ("record_every", "first_step"):
            kwargs[key] = None
        else:
            kwargs[key] = _number(fc, key, pointer, integer=(key == "max_steps"))
    try:
        cfg = FlowConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc), "/flow_config") from exc

    spec = RunSpec(variant, dimension, n, potential, flow, cfg, drift, u0, m0, psi, output, compare, name)
    _check_evaluates(spec)
    if compare:
        _expect(spec.oracle() is not None, "no exact solution is known for this problem", "/compare_exact")
    return spec


def _check_evaluates(spec: RunSpec):
    """Evaluate every expression on the grid so domain errors surface as config errors."""
    grid = spec.grid()
    fields = {"V" if spec.dimension == 1 else "W": spec.potential, "b": spec.drift, "u0": spec.u0,
              "m0": spec.m0, "psi": spec.psi}
    for key, src in fields.items():
        if src is None:
            continue
        try:
            values = grid.sample(spec.function(src))
        except (ExprDomainError, KeyError) as exc:
            raise ConfigError(f"cannot evaluate expression: {exc}", f"/{key}") from exc
        _expect(bool(np.all(np.isfinite(values))), "expression is not finite on the grid", f"/{key}")
        if key == "m0":
            _expect(bool(np.all(values > 0)), "initial density must be strictly positive", "/m0")


def load_config(path) -> RunSpec:
    """Read and validate a JSON configuration file.

    Raises ``OSError`` when the file cannot be read and ``ConfigError`` for
    malformed JSON or schema violations.
    """
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return parse_config(doc)
