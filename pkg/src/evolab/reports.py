"""Check reports shared by the passivity auditors and the engine."""
import json
from dataclasses import dataclass, field

import numpy as np

MAX_WITNESSES = 25


@dataclass(frozen=True)
class Witness:
    p: tuple
    x: tuple
    value: float
    threshold: float

    def to_dict(self):
        return {"p": list(self.p), "x": list(self.x), "value": self.value, "threshold": self.threshold}


def witness(p, x, value, threshold):
    return Witness(tuple(np.asarray(p, dtype=float).tolist()), tuple(np.asarray(x, dtype=float).tolist()),
                   float(value), float(threshold))


@dataclass
class CheckReport:
    """Outcome of a sampled check.

    ``worst_margin`` is the largest value of (measured - threshold) seen;
    positive means violated. ``violations`` keeps the worst witnesses (up to
    ``MAX_WITNESSES``); ``n_violations`` counts all of them.
    """

    check_name: str
    samples: int
    violations: list
    worst_margin: float
    verdict: str
    n_violations: int = 0
    details: dict = field(default_factory=dict)

    @classmethod
    def from_margins(cls, name, p, x, measured, threshold, details=None, inconclusive=False):
        """Build a report from per-sample measured values and thresholds (violation: measured > threshold)."""
        measured = np.asarray(measured, dtype=float)
        threshold = np.broadcast_to(np.asarray(threshold, dtype=float), measured.shape)
        margin = measured - threshold
        bad = np.flatnonzero(margin > 0)
        order = bad[np.argsort(-margin[bad])][:MAX_WITNESSES]
        p = np.asarray(p, dtype=float)
        x = np.asarray(x, dtype=float)
        witnesses = [witness(p[i], x[i], measured[i], threshold[i]) for i in order]
        if bad.size:
            verdict = "fail"
        else:
            verdict = "inconclusive" if inconclusive else "pass"
        worst = float(margin.max()) if margin.size else float("-inf")
        return cls(name, int(measured.size), witnesses, worst, verdict, int(bad.size), dict(details or {}))

    @classmethod
    def from_mask(cls, name, p, x, bad, values, threshold, details=None):
        """Build a report from a per-sample violation mask; ``values`` are what gets recorded."""
        bad = np.asarray(bad, dtype=bool)
        values = np.asarray(values, dtype=float)
        threshold = np.broadcast_to(np.asarray(threshold, dtype=float), values.shape)
        idx = np.flatnonzero(bad)
        p = np.asarray(p, dtype=float)
        x = np.asarray(x, dtype=float)
        witnesses = [witness(p[i], x[i], values[i], threshold[i]) for i in idx[:MAX_WITNESSES]]
        # a mask marks violations that need not exceed the threshold numerically, so the
        # margin is reported as a magnitude: positive exactly when something failed
        margin = np.abs(values - threshold)
        worst = max(float(margin[idx].max()), np.finfo(float).tiny) if idx.size else 0.0
        return cls(name, int(bad.size), witnesses, worst, "fail" if idx.size else "pass", int(idx.size),
                   dict(details or {}))

    @property
    def passed(self):
        return self.verdict == "pass"

    def to_dict(self):
        out = {
            "check": self.check_name,
            "samples": self.samples,
            "verdict": self.verdict,
            "worst_margin": self.worst_margin,
            "witnesses": [w.to_dict() for w in self.violations],
        }
        if self.n_violations:
            out["n_violations"] = self.n_violations
        if self.details:
            out["details"] = self.details
        return out

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    def summary(self):
        return (f"{self.check_name}: {self.verdict} "
                f"(samples={self.samples}, violations={self.n_violations}, worst_margin={self.worst_margin:.3g})")
