from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class RunStatus(BaseModel):
    """Progress update emitted by long-running operations.

    Attributes:
        task_name: Name of the running operation
        status: Current status message
        progress: Optional progress value (0-100)
    """

    task_name: str
    status: str
    progress: Optional[float] = None


class RunReport(BaseModel):
    """Summary of a single CLI run"""

    subcommand: str = Field(..., description="Subcommand that produced the report")
    parameters: Dict[str, Any] = Field(default_factory=dict, description="Parsed run parameters")
    outcome: str = Field(default="pending", description="ok, inconclusive or error")
    stats: Dict[str, Any] = Field(default_factory=dict, description="Counters collected during the run")
    artifacts: List[str] = Field(default_factory=list, description="Paths of written artifacts")


class RunHistory(BaseModel):
    """Container for run reports"""

    max_items: int = Field(default=50, description="Maximum number of reports to keep")
    items: List[RunReport] = Field(default_factory=list, description="Run reports")

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, index: int) -> RunReport:
        return self.items[index]

    def __iter__(self):
        return iter(self.items)

    def append(self, item: RunReport) -> None:
        """Add new report, removing the oldest if max_items is reached"""
        self.items.append(item)  # pylint: disable=no-member
        if len(self) > self.max_items:
            self.items.pop(0)  # pylint: disable=no-member

    def get_current_item(self) -> Optional[RunReport]:
        """Get the most recent report"""
        return self.items[-1] if self.items else None

    def set_outcome(self, outcome: str, stats: Optional[Dict[str, Any]] = None) -> None:
        """Set outcome and merge stats into the current report"""
        if current_item := self.get_current_item():
            current_item.outcome = outcome
            current_item.stats.update(stats or {})
