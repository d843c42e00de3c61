import platform
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pydantic
import scipy
from pydantic import BaseModel, ConfigDict, Field

from constants import LOG_PREFIX_EXPORT
from export.records import CheckRow
from logger import logger


def package_versions() -> Dict[str, str]:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pydantic": pydantic.VERSION,
    }


class CheckSummary(BaseModel):
    total: int = 0
    passed: int = 0
    failed: List[str] = Field(default_factory=list)

    @classmethod
    def from_checks(cls, checks: Sequence[CheckRow]) -> "CheckSummary":
        failed = [c.name for c in checks if not c.passed]
        return cls(total=len(checks), passed=len(checks) - len(failed), failed=failed)


class RunManifest(BaseModel):
    """Everything needed to re-run a command: resolved parameters, seed and versions."""

    model_config = ConfigDict(extra="forbid")

    command: str
    config: Dict[str, Any] = Field(..., description="resolved configuration, auto values filled in")
    seed: int
    fingerprint: str = Field(..., description="sha256 of the configuration text")
    dev: bool = False
    versions: Dict[str, str] = Field(default_factory=package_versions)
    exit_status: int = 0
    checks: CheckSummary = Field(default_factory=CheckSummary)
    error: Optional[str] = Field(default=None, description="diagnostic of a failed command, verbatim")
    diagnostics: Dict[str, Any] = Field(default_factory=dict)
    outputs: List[str] = Field(default_factory=list)

    def write(self, directory: Path) -> Path:
        path = Path(directory) / "manifest.json"
        path.write_text(self.model_dump_json(indent=2) + "\n")
        logger.info(f"{LOG_PREFIX_EXPORT}: wrote {path} (exit status {self.exit_status})")
        return path
