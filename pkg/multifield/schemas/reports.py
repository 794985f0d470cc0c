from pydantic import BaseModel, Field
from typing import Optional, List, Dict
from enum import Enum


class TaskStatus(str, Enum):
    OK = "ok"
    FAILED = "failed"
    ERROR = "error"

class Series(BaseModel):
    """Labeled table for external plotting"""
    columns: List[str]
    rows: List[List[Optional[float]]] = Field(default_factory=list)

class ErrorInfo(BaseModel):
    code: str
    message: str
    exit_code: int

class TaskReport(BaseModel):
    """Outcome of one scenario task"""
    name: str
    kind: str
    status: TaskStatus = TaskStatus.OK
    metrics: Dict[str, Optional[float]] = Field(default_factory=dict)
    series: Dict[str, Series] = Field(default_factory=dict)
    flags: List[str] = Field(default_factory=list)
    acceptance: Dict[str, bool] = Field(default_factory=dict)
    error: Optional[ErrorInfo] = None

class ScenarioSummary(BaseModel):
    """Deterministic summary of a scenario run"""
    scenario: str
    seed: int
    tasks: List[TaskReport] = Field(default_factory=list)

    @property
    def exit_code(self) -> int:
        codes = [0]
        for task in self.tasks:
            if task.error is not None:
                codes.append(task.error.exit_code)
            elif task.status == TaskStatus.FAILED:
                codes.append(2)
        return max(codes)

class RunMetadata(BaseModel):
    """Non-deterministic run facts kept apart from the summary"""
    scenario: str
    started_at: str
    finished_at: str
    version: str
    environment: str
    python: str
    numpy: str
    scipy: str
