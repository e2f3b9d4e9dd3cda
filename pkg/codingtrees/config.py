import os
from pathlib import Path

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, field_validator

load_dotenv()


class CodingTreesConfig(BaseModel):
    model_config = ConfigDict(
        populate_by_name=True,
        extra="allow",
        validate_assignment=True,
    )

    log_level: str = Field(
        default_factory=lambda: os.getenv("CODINGTREES_LOG_LEVEL", "INFO"),
        validate_default=True,
        description="Log level to use",
    )
    output_path: Path = Field(default=Path("artifacts"), description="Default directory for run reports")

    sdap_bound1: int = Field(default=4, ge=1, description="Existential bound s1 for A' and C' in amalgamation audits")
    sdap_bound2: int = Field(default=5, ge=1, description="Universal bound s2 for B, D and E in amalgamation audits")
    ext_lookahead: int = Field(default=3, ge=1, description="Critical levels of look-ahead for Ext clause (3)")
    max_vertices: int = Field(default=4096, ge=1, description="Cap on generator growth during diagonal construction")
    search_budget: int = Field(default=200_000, ge=1, description="Node budget for bounded searches")
    plan_budget: int = Field(default=20_000, ge=1, description="Search steps allowed per diagonal stage plan")
    homogenize_budget: int = Field(default=20_000, ge=1, description="Search steps allowed per homogenization")
    indiv_tree_depth: int = Field(default=16, ge=1, description="Critical levels of the tree built for copy searches")
    cache_max_size: int = Field(default=4096, ge=1, description="Maximum number of memoised oracle answers")
    schema_version: int = Field(default=1, description="Version stamped on every serialised artifact")

    @field_validator("log_level")
    @classmethod
    def _upper(cls, value: str) -> str:
        value = value.upper()
        if value not in {"TRACE", "DEBUG", "INFO", "NOTICE", "WARN", "WARNING", "ERROR", "FATAL"}:
            raise ValueError(f"Unknown log level '{value}'")
        return value


config = CodingTreesConfig()
