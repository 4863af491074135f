"""Three-phase run management: descriptions, scanning and local launch."""

from .descriptions import (
    PHASES,
    SYSTEM_DEFAULTS,
    RunDescription,
    canonical_json,
    description_hash,
    generate_descriptions,
    read_description,
    validate_description,
    write_descriptions,
)
from .manager import (
    COMPLETE,
    FAILED,
    INCOMPLETE,
    MALFORMED,
    MISMATCHED,
    OUTSTANDING,
    RUNNING,
    LaunchSummary,
    ScanEntry,
    blockers,
    delete_runs,
    execute,
    launch,
    output_digest,
    run_state,
    scan,
)

__all__ = [
    "COMPLETE",
    "FAILED",
    "INCOMPLETE",
    "MALFORMED",
    "MISMATCHED",
    "OUTSTANDING",
    "PHASES",
    "RUNNING",
    "SYSTEM_DEFAULTS",
    "LaunchSummary",
    "RunDescription",
    "ScanEntry",
    "blockers",
    "canonical_json",
    "delete_runs",
    "description_hash",
    "execute",
    "generate_descriptions",
    "launch",
    "output_digest",
    "read_description",
    "run_state",
    "scan",
    "validate_description",
    "write_descriptions",
]
