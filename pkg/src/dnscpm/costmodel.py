"""Closed-form memory / error / inference comparison of CMS, dwsHH and WS.

The formulas reproduce the published worked arithmetic, including two of
its quirks:

* the ``log m`` memory factor is never below 1 (the worked values for 10
  domains use a factor of 1 where ``log10(0.1 * 10)`` is 0);
* the dwsHH error is evaluated with cache size and sample length both equal
  to the domain count.

CMS and dwsHH memory come out in bits, WS memory in bytes.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass

DOMAIN_COUNTS = (10, 100, 1000, 10000)


class Method(str, enum.Enum):
    CMS = "CMS"
    DWSHH = "dwsHH"
    WS = "WS"


@dataclass(frozen=True)
class SketchCostParams:
    n: int = 10
    k: int = 100
    ell: int = 32
    tau_ws: float = 0.01
    weight: float = 1.0
    d: int = 5
    w: int = 200
    counter_size: int = 4

    def __post_init__(self) -> None:
        for fname in ("n", "k", "ell", "tau_ws", "weight", "d", "w", "counter_size"):
            if getattr(self, fname) <= 0:
                raise ValueError(f"{fname} must be positive")

    @property
    def monitored(self) -> float:
        """Monitored-item count m, taken as a tenth of the domain list."""
        return 0.1 * self.n


@dataclass(frozen=True)
class CostReport:
    method: Method
    n: int
    memory: float
    memory_unit: str
    error: float
    inference: float

    def display(self) -> dict[str, str]:
        """Values formatted the way the published tables print them."""
        return {
            "memory": _short(self.memory) if self.method is not Method.CMS else f"{self.memory:g}",
            "error": f"{self.error:.3f}" if self.method is Method.DWSHH else f"{self.error:g}",
            "inference": f"{self.inference:g}",
        }


def _short(value: float) -> str:
    if value >= 1000:
        return f"{value / 1000:g}K"
    return f"{value:g}"


def _log_factor(m: float) -> float:
    return max(1.0, math.log10(m))


def _clean(value: float) -> float:
    # strip binary noise such as 0.01 * 10 -> 0.09999999999999999
    return float(f"{value:.12g}")


def cost_model(method: Method | str, params: SketchCostParams) -> CostReport:
    method = Method(method)
    p = params
    if method is Method.CMS:
        memory = p.w * p.d * p.counter_size
        error = math.e / p.w
        inference = p.d
        unit = "bits"
    elif method is Method.DWSHH:
        memory = p.k * p.ell * _log_factor(p.monitored)
        cache = p.n
        error = (p.n * p.weight) / cache + p.weight / math.sqrt(2 * cache)
        inference = math.log10(p.n)
        unit = "bits"
    else:
        total_weight = p.n * p.weight
        memory = p.tau_ws * total_weight * p.ell * _log_factor(p.monitored)
        error = 1 / p.tau_ws + p.weight / math.sqrt(2 * p.ell)
        inference = p.tau_ws * p.n
        unit = "bytes"
    return CostReport(method, p.n, _clean(memory), unit, error, _clean(inference))


def cost_table(base: SketchCostParams | None = None, counts=DOMAIN_COUNTS) -> list[CostReport]:
    base = base or SketchCostParams()
    rows = []
    for method in Method:
        for n in counts:
            params = SketchCostParams(**{**base.__dict__, "n": n})
            rows.append(cost_model(method, params))
    return rows


CSV_FIELDS = ("method", "N", "memory", "error", "inference", "memory_unit")


def cost_table_csv(rows: list[CostReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for r in rows:
        writer.writerow([r.method.value, r.n, repr(r.memory), repr(r.error), repr(r.inference), r.memory_unit])
    return buf.getvalue()
