from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass
class CheckResult:
    name: str
    passed: bool
    failures: list[Any] = field(default_factory=list)
    detail: str = ""

    def to_json(self) -> dict:
        out: dict[str, Any] = {"name": self.name, "passed": self.passed}
        if self.failures:
            out["failures"] = [list(f) if isinstance(f, tuple) else f for f in self.failures]
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass
class VerificationReport:
    subject: str
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, failures: list, detail: str = "") -> CheckResult:
        check = CheckResult(name, not failures, list(failures), detail)
        self.checks.append(check)
        return check

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def to_json(self) -> dict:
        return {
            "subject": self.subject,
            "passed": self.passed,
            "checks": [c.to_json() for c in self.checks],
        }

    def pretty(self) -> str:
        lines = [f"{self.subject}: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.checks:
            mark = "ok  " if c.passed else "FAIL"
            lines.append(f"  [{mark}] {c.name}" + (f"  ({c.detail})" if c.detail else ""))
            for f in c.failures:
                lines.append(f"         at {f}")
        return "\n".join(lines)
