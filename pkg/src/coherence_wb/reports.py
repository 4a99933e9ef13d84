"""Plain result records returned by validators and property tests."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field


@dataclass
class ValidationReport:
    """Residuals of a batch of named checks; ``valid`` iff none exceeds ``threshold``."""

    residuals: dict[str, float] = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)
    threshold: float = 1e-9

    @property
    def valid(self) -> bool:
        return not self.failures

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)

    def record(self, name: str, residual: float) -> bool:
        residual = float(residual)
        self.residuals[name] = residual
        ok = residual <= self.threshold
        if not ok:
            self.failures.append(name)
        return ok

    def fail(self, name: str, reason: str) -> None:
        self.failures.append(f"{name}: {reason}")

    def merge(self, other: "ValidationReport", prefix: str = "") -> None:
        for k, v in other.residuals.items():
            self.residuals[prefix + k] = v
        self.failures.extend(prefix + f for f in other.failures)
        self.skipped.extend(prefix + s for s in other.skipped)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["valid"] = self.valid
        d["max_residual"] = self.max_residual
        return d


@dataclass
class PropertyReport:
    """Outcome of a randomized property test."""

    name: str
    samples: int
    seed: int | None
    threshold: float
    checked: int = 0
    max_residual: float = 0.0
    failures: list[str] = field(default_factory=list)
    counts: dict[str, int] = field(default_factory=dict)
    skipped: dict[str, int] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures and self.checked > 0

    def record(self, kind: str, residual: float, detail: str = "") -> bool:
        residual = float(residual)
        self.checked += 1
        self.counts[kind] = self.counts.get(kind, 0) + 1
        self.max_residual = max(self.max_residual, residual)
        ok = residual <= self.threshold
        if not ok:
            self.failures.append(f"{kind} {detail} residual={residual:.3e}".replace("  ", " "))
        return ok

    def skip(self, kind: str) -> None:
        self.skipped[kind] = self.skipped.get(kind, 0) + 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d
