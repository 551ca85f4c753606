from dataclasses import asdict, dataclass, field
from typing import List


@dataclass
class EpochMetrics:
    """One row of the training history."""

    epoch: int
    lr: float
    train_loss: float
    val_rel_l2: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class GradCheckReport:
    """Finite-difference comparison for one operation."""

    name: str
    max_rel_error: float
    tolerance: float
    checked: int

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


@dataclass
class Check:
    """A single PASS/FAIL assertion of a verification suite."""

    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}" + (f": {self.detail}" if self.detail else "")


@dataclass
class SuiteResult:
    """Measured rows of a verification suite plus its assertions."""

    suite: str
    columns: List[str]
    rows: List[list] = field(default_factory=list)
    checks: List[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def check(self, name: str, passed: bool, detail: str = "") -> bool:
        self.checks.append(Check(name=name, passed=bool(passed), detail=detail))
        return bool(passed)

    def failures(self) -> List[Check]:
        return [check for check in self.checks if not check.passed]
